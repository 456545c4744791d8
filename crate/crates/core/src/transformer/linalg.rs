use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Floating-point type the forward and backward passes run in.
pub trait Real:
    Float + Sum + AddAssign + SubAssign + MulAssign + DivAssign + Default + Debug + Send + Sync + 'static
{
    fn lit(x: f64) -> Self;
    fn widen(self) -> f64;

    /// Strided `c = beta * c + a b` through the blocked kernel.
    ///
    /// # Safety
    /// Every index reachable through the dimensions and strides must lie
    /// inside the buffers.
    #[allow(clippy::too_many_arguments)]
    unsafe fn blocked(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
    );
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }

    fn widen(self) -> f64 {
        self
    }

    unsafe fn blocked(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, 1);
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }

    fn widen(self) -> f64 {
        self as f64
    }

    unsafe fn blocked(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, 1);
    }
}

/// `c = beta * c + op(a) * op(b)` on contiguous row-major buffers, where
/// `op(a)` is `m x k` and `op(b)` is `k x n`. With `ta` set, `a` is stored as
/// `k x m`; with `tb` set, `b` is stored as `n x k`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    ta: bool,
    b: &[T],
    tb: bool,
    c: &mut [T],
    beta: T,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m * n * k <= SMALL {
        gemm_small(m, k, n, a, ta, b, tb, c, beta);
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        T::blocked(m, k, n, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize);
    }
}

/// Below this many multiply-adds the packing overhead of the blocked kernel
/// dominates; attention heads on short sentences live here.
const SMALL: usize = 16 * 1024;

#[allow(clippy::too_many_arguments)]
fn gemm_small<T: Real>(m: usize, k: usize, n: usize, a: &[T], ta: bool, b: &[T], tb: bool, c: &mut [T], beta: T) {
    for i in 0..m {
        for j in 0..n {
            let mut s = T::zero();
            for p in 0..k {
                let av = if ta { a[p * m + i] } else { a[i * k + p] };
                let bv = if tb { b[j * k + p] } else { b[p * n + j] };
                s += av * bv;
            }
            let cij = &mut c[i * n + j];
            *cij = if beta == T::zero() { s } else { beta * *cij + s };
        }
    }
}

/// `y = x w + b` for `x` of `rows x inp`, `w` of `inp x out`.
pub(crate) fn linear<T: Real>(x: &[T], rows: usize, inp: usize, w: &[T], b: &[T], out: usize) -> Vec<T> {
    let mut y = Vec::with_capacity(rows * out);
    for _ in 0..rows {
        y.extend_from_slice(b);
    }
    gemm(rows, inp, out, x, false, w, false, &mut y, T::one());
    y
}

/// Accumulates `dw += x^T dy`, `db += colsum(dy)` and returns `dx = dy w^T`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward<T: Real>(
    x: &[T],
    dy: &[T],
    rows: usize,
    inp: usize,
    out: usize,
    w: &[T],
    dw: &mut [T],
    db: &mut [T],
) -> Vec<T> {
    gemm(inp, rows, out, x, true, dy, false, dw, T::one());
    for r in dy.chunks_exact(out) {
        for (d, &g) in db.iter_mut().zip(r) {
            *d += g;
        }
    }
    let mut dx = vec![T::zero(); rows * inp];
    gemm(rows, out, inp, dy, false, w, true, &mut dx, T::zero());
    dx
}
