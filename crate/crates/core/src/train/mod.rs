//! Exact-gradient training: loss, Adam with warmup, the random-slice epoch
//! loop, evaluation and fine-tuning.

mod data;
mod optim;
mod run;

pub use crate::model::backward;
pub use data::{split_indices, Batch, Dataset, Encoded, FeatureSource, ValSplit};
pub use optim::{adam_step, cross_entropy, lr_at, OptState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use run::{
    argmax, evaluate, finetune, fit, format_metrics_row, initial_checkpoint, predict_logits, read_metrics_csv,
    train_loop, train_loop_to, train_step, write_metrics_csv, EpochMetrics, TrainConfig, TrainOutcome,
    METRICS_HEADER,
};
