//! Row normalizers for attention scores and their vector-Jacobian products.
//! `-inf` marks an excluded entry: it gets weight 0 and never enters the
//! sparsemax support.

use std::cmp::Ordering;

use super::linalg::Real;
use crate::error::{Error, Result};

/// Euclidean projection of `z` onto the probability simplex.
pub fn sparsemax(z: &[f64]) -> Result<Vec<f64>> {
    if z.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::NaN);
    }
    if !z.iter().any(|x| x.is_finite()) {
        return Err(Error::Shape("sparsemax needs at least one unmasked entry".into()));
    }
    let mut out = vec![0.0; z.len()];
    let mut scratch = Vec::with_capacity(z.len());
    sparsemax_into(z, &mut out, &mut scratch);
    Ok(out)
}

/// Threshold `tau` such that `max(z - tau, 0)` sums to one. Entries equal to
/// `-inf` are ignored; at least one entry must be finite.
pub(crate) fn sparsemax_threshold<T: Real>(z: &[T], sorted: &mut Vec<T>) -> T {
    sorted.clear();
    sorted.extend(z.iter().copied().filter(|x| x.is_finite()));
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let one = T::one();
    let mut cum = T::zero();
    let mut tau = T::zero();
    for (k, &zk) in sorted.iter().enumerate() {
        cum += zk;
        let kk = T::lit((k + 1) as f64);
        if one + kk * zk > cum {
            tau = (cum - one) / kk;
        } else {
            break;
        }
    }
    tau
}

pub(crate) fn sparsemax_into<T: Real>(z: &[T], out: &mut [T], scratch: &mut Vec<T>) {
    let tau = sparsemax_threshold(z, scratch);
    for (o, &x) in out.iter_mut().zip(z) {
        *o = (x - tau).max(T::zero());
    }
}

/// `dz = J^T dp` with `J = diag(s) - s s^T / |S|`, `s` the support indicator.
pub fn sparsemax_backward<T: Real>(p: &[T], dp: &[T], dz: &mut [T]) {
    let mut sum = T::zero();
    let mut k = 0usize;
    for (&pi, &gi) in p.iter().zip(dp) {
        if pi > T::zero() {
            sum += gi;
            k += 1;
        }
    }
    let mean = if k > 0 { sum / T::lit(k as f64) } else { T::zero() };
    for ((d, &pi), &gi) in dz.iter_mut().zip(p).zip(dp) {
        *d = if pi > T::zero() { gi - mean } else { T::zero() };
    }
}

pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::NaN);
    }
    if !z.iter().any(|x| x.is_finite()) {
        return Err(Error::Shape("softmax needs at least one unmasked entry".into()));
    }
    let mut out = vec![0.0; z.len()];
    softmax_into(z, &mut out);
    Ok(out)
}

pub(crate) fn softmax_into<T: Real>(z: &[T], out: &mut [T]) {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let mut s = T::zero();
    for (o, &x) in out.iter_mut().zip(z) {
        *o = (x - m).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

pub fn softmax_backward<T: Real>(p: &[T], dp: &[T], dz: &mut [T]) {
    let dot: T = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
    for ((d, &pi), &gi) in dz.iter_mut().zip(p).zip(dp) {
        *d = pi * (gi - dot);
    }
}
