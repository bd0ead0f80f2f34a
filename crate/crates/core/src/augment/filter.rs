//! Butterworth lowpass via the bilinear transform, as cascaded biquads.

use std::f64::consts::PI;

/// One section `b0 + b1 z^-1 + b2 z^-2 / 1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// Designs an order-`order` Butterworth lowpass. `cutoff` is a fraction of
/// Nyquist in (0, 1); the -3 dB point lands exactly there.
pub fn butterworth_lowpass(order: usize, cutoff: f64) -> Vec<Section> {
    assert!(order >= 1 && cutoff > 0.0 && cutoff < 1.0);
    // K = 2 for the bilinear map s = K (z - 1) / (z + 1) with unit sample time.
    let k = 2.0;
    let wc = k * (PI * cutoff / 2.0).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        // conjugate pole pair on the left half of the circle of radius wc
        let theta = PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
        let damp = -2.0 * theta.cos() * wc;
        let d0 = k * k + damp * k + wc * wc;
        let d1 = 2.0 * (wc * wc - k * k);
        let d2 = k * k - damp * k + wc * wc;
        let g = wc * wc / d0;
        sections.push(Section {
            b: [g, 2.0 * g, g],
            a: [d1 / d0, d2 / d0],
        });
    }
    if order % 2 == 1 {
        let d0 = k + wc;
        sections.push(Section {
            b: [wc / d0, wc / d0, 0.0],
            a: [(wc - k) / d0, 0.0],
        });
    }
    sections
}

/// Forward-only filtering (transposed direct form II per section).
pub fn filter(sections: &[Section], x: &[f32]) -> Vec<f32> {
    let mut y: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    for s in sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b[0] * input + z1;
            z1 = s.b[1] * input - s.a[0] * out + z2;
            z2 = s.b[2] * input - s.a[1] * out;
            *v = out;
        }
    }
    y.into_iter().map(|v| v as f32).collect()
}
