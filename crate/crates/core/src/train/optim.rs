use crate::model::{ModelParams, Real, Tensor};
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments, one pair per learnable tensor in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
    pub step: u64,
}

impl OptState {
    pub fn new(params: &ModelParams<f32>) -> Self {
        let m: Vec<Tensor<f32>> = params.learnable().iter().map(|(_, t)| t.zeros_like()).collect();
        OptState {
            v: m.clone(),
            m,
            step: 0,
        }
    }

    pub fn matches(&self, params: &ModelParams<f32>) -> bool {
        let shapes = params.learnable();
        self.m.len() == shapes.len()
            && self.v.len() == shapes.len()
            && self.m.iter().zip(&shapes).all(|(t, (_, p))| t.shape == p.shape)
    }
}

/// Linear warmup to `peak` over `warmup` steps, constant afterwards.
pub fn lr_at(step: u64, peak: f64, warmup: u64) -> f64 {
    if warmup == 0 {
        return peak;
    }
    peak * (step as f64 / warmup as f64).min(1.0)
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ModelParams<f32>, grads: &ModelParams<f32>, opt: &mut OptState, lr: f64) {
    assert!(opt.matches(params), "optimizer state does not mirror the parameters");
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, ((_, p), (_, g))) in params.learnable_mut().into_iter().zip(grads.learnable()).enumerate() {
        let (m, v) = (&mut opt.m[i].data, &mut opt.v[i].data);
        for j in 0..p.data.len() {
            let gj = g.data[j] as f64;
            let mj = ADAM_BETA1 * m[j] as f64 + (1.0 - ADAM_BETA1) * gj;
            let vj = ADAM_BETA2 * v[j] as f64 + (1.0 - ADAM_BETA2) * gj * gj;
            m[j] = mj as f32;
            v[j] = vj as f32;
            let update = lr * (mj / c1) / ((vj / c2).sqrt() + ADAM_EPS);
            p.data[j] = (p.data[j] as f64 - update) as f32;
        }
    }
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the
/// logits, `(softmax - onehot) / B`.
pub fn cross_entropy<T: Real>(logits: &[T], labels: &[usize], classes: usize) -> Result<(f64, Vec<T>)> {
    let b = labels.len();
    if b == 0 || logits.len() != b * classes {
        return Err(Error::Shape {
            dim: "logits",
            expected: b * classes,
            actual: logits.len(),
        });
    }
    let mut loss = 0.0;
    let mut grad = vec![T::zero(); logits.len()];
    for (e, &y) in labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::data(format!("label {y} out of range for {classes} classes")));
        }
        let row: Vec<f64> = logits[e * classes..(e + 1) * classes].iter().map(|v| v.f64()).collect();
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - m).exp()).sum();
        let log_z = m + sum.ln();
        loss += log_z - row[y];
        for c in 0..classes {
            let p = (row[c] - log_z).exp();
            let onehot = if c == y { 1.0 } else { 0.0 };
            grad[e * classes + c] = T::lit((p - onehot) / b as f64);
        }
    }
    Ok((loss / b as f64, grad))
}
