//! Dense kernels shared by the forward and backward passes. All matrices are
//! row-major; `n` is the number of rows.

use super::params::{Affine, Linear};
use super::tensor::Real;

pub(crate) const LN_EPS: f64 = 1e-12;
pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

/// Dot product with eight independent partial sums so the loop vectorizes.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y = x W^T + b` for `n` rows.
pub(crate) fn linear<T: Real>(x: &[T], n: usize, lin: &Linear<T>) -> Vec<T> {
    let (out, inp) = (lin.out_dim(), lin.in_dim());
    debug_assert_eq!(x.len(), n * inp);
    let w = &lin.weight.data;
    let mut y = vec![T::zero(); n * out];
    for r in 0..n {
        let xr = &x[r * inp..(r + 1) * inp];
        let yr = &mut y[r * out..(r + 1) * out];
        for o in 0..out {
            yr[o] = dot(xr, &w[o * inp..(o + 1) * inp]) + lin.bias.data[o];
        }
    }
    y
}

/// Accumulates weight and bias gradients; returns `dx` when asked.
pub(crate) fn linear_backward<T: Real>(
    x: &[T],
    n: usize,
    lin: &Linear<T>,
    dy: &[T],
    grad: &mut Linear<T>,
    want_dx: bool,
) -> Option<Vec<T>> {
    let (out, inp) = (lin.out_dim(), lin.in_dim());
    for r in 0..n {
        let xr = &x[r * inp..(r + 1) * inp];
        let dyr = &dy[r * out..(r + 1) * out];
        for o in 0..out {
            let g = dyr[o];
            if g != T::zero() {
                axpy(g, xr, &mut grad.weight.data[o * inp..(o + 1) * inp]);
            }
            grad.bias.data[o] += g;
        }
    }
    want_dx.then(|| {
        let w = &lin.weight.data;
        let mut dx = vec![T::zero(); n * inp];
        for r in 0..n {
            let dyr = &dy[r * out..(r + 1) * out];
            let dxr = &mut dx[r * inp..(r + 1) * inp];
            for o in 0..out {
                if dyr[o] != T::zero() {
                    axpy(dyr[o], &w[o * inp..(o + 1) * inp], dxr);
                }
            }
        }
        dx
    })
}

#[derive(Debug, Clone)]
pub(crate) struct NormCache<T> {
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
}

/// Row-wise layer norm over the last dimension `h`.
pub(crate) fn layer_norm<T: Real>(x: &[T], h: usize, aff: &Affine<T>) -> (Vec<T>, NormCache<T>) {
    let n = x.len() / h;
    let hf = T::lit(h as f64);
    let eps = T::lit(LN_EPS);
    let mut y = vec![T::zero(); x.len()];
    let mut xhat = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); n];
    for r in 0..n {
        let row = &x[r * h..(r + 1) * h];
        let mean = row.iter().copied().sum::<T>() / hf;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / hf;
        let inv = T::one() / (var + eps).sqrt();
        inv_std[r] = inv;
        for i in 0..h {
            let xh = (row[i] - mean) * inv;
            xhat[r * h + i] = xh;
            y[r * h + i] = aff.gamma.data[i] * xh + aff.beta.data[i];
        }
    }
    (y, NormCache { xhat, inv_std })
}

pub(crate) fn layer_norm_backward<T: Real>(
    dy: &[T],
    h: usize,
    cache: &NormCache<T>,
    aff: &Affine<T>,
    grad: &mut Affine<T>,
) -> Vec<T> {
    let n = dy.len() / h;
    let hf = T::lit(h as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxhat = vec![T::zero(); h];
    for r in 0..n {
        let dyr = &dy[r * h..(r + 1) * h];
        let xh = &cache.xhat[r * h..(r + 1) * h];
        for i in 0..h {
            grad.gamma.data[i] += dyr[i] * xh[i];
            grad.beta.data[i] += dyr[i];
            dxhat[i] = dyr[i] * aff.gamma.data[i];
        }
        let mean_d = dxhat.iter().copied().sum::<T>() / hf;
        let mean_dx = dot(&dxhat, xh) / hf;
        let inv = cache.inv_std[r];
        for i in 0..h {
            dx[r * h + i] = inv * (dxhat[i] - mean_d - xh[i] * mean_dx);
        }
    }
    dx
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Exact (erf-based) GELU.
#[inline]
pub(crate) fn gelu<T: Real>(x: T) -> T {
    let v = x.f64();
    T::lit(0.5 * v * (1.0 + libm::erf(v * FRAC_1_SQRT_2)))
}

#[inline]
pub(crate) fn gelu_grad<T: Real>(x: T) -> T {
    let v = x.f64();
    let cdf = 0.5 * (1.0 + libm::erf(v * FRAC_1_SQRT_2));
    let pdf = (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt();
    T::lit(cdf + v * pdf)
}

/// In-place max-subtracted softmax of one row.
pub(crate) fn softmax_in_place<T: Real>(row: &mut [T]) {
    let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Multi-head scaled dot-product attention over `l` positions.
/// Returns the concatenated context (L x H) and the probabilities
/// (heads x L x L).
pub(crate) fn attention<T: Real>(q: &[T], k: &[T], v: &[T], l: usize, h: usize, heads: usize) -> (Vec<T>, Vec<T>) {
    let d = h / heads;
    let scale = T::lit(1.0 / (d as f64).sqrt());
    let mut probs = vec![T::zero(); heads * l * l];
    let mut ctx = vec![T::zero(); l * h];
    for hd in 0..heads {
        let off = hd * d;
        for i in 0..l {
            let qi = &q[i * h + off..i * h + off + d];
            let row = &mut probs[(hd * l + i) * l..(hd * l + i + 1) * l];
            for j in 0..l {
                row[j] = dot(qi, &k[j * h + off..j * h + off + d]) * scale;
            }
            softmax_in_place(row);
            let ci = &mut ctx[i * h + off..i * h + off + d];
            for j in 0..l {
                axpy(row[j], &v[j * h + off..j * h + off + d], ci);
            }
        }
    }
    (ctx, probs)
}

/// Gradients of attention inputs given `dctx`.
pub(crate) fn attention_backward<T: Real>(
    q: &[T],
    k: &[T],
    v: &[T],
    probs: &[T],
    dctx: &[T],
    l: usize,
    h: usize,
    heads: usize,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let d = h / heads;
    let scale = T::lit(1.0 / (d as f64).sqrt());
    let mut dq = vec![T::zero(); l * h];
    let mut dk = vec![T::zero(); l * h];
    let mut dv = vec![T::zero(); l * h];
    let mut ds = vec![T::zero(); l];
    for hd in 0..heads {
        let off = hd * d;
        for i in 0..l {
            let a = &probs[(hd * l + i) * l..(hd * l + i + 1) * l];
            let dci = &dctx[i * h + off..i * h + off + d];
            let mut rowdot = T::zero();
            for j in 0..l {
                let da = dot(dci, &v[j * h + off..j * h + off + d]);
                axpy(a[j], dci, &mut dv[j * h + off..j * h + off + d]);
                ds[j] = da;
                rowdot += da * a[j];
            }
            for j in 0..l {
                ds[j] = a[j] * (ds[j] - rowdot) * scale;
            }
            for j in 0..l {
                if ds[j] != T::zero() {
                    axpy(ds[j], &k[j * h + off..j * h + off + d], &mut dq[i * h + off..i * h + off + d]);
                    axpy(ds[j], &q[i * h + off..i * h + off + d], &mut dk[j * h + off..j * h + off + d]);
                }
            }
        }
    }
    (dq, dk, dv)
}
