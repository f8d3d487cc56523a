//! Small dense complex linear-algebra helpers shared by the solvers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;

/// Thin SVD `Y = U diag(s) V^H` with singular values in descending order.
///
/// Each singular pair is rotated so that the largest-magnitude entry of `u_i`
/// is real and positive, which pins down the phase ambiguity of the complex SVD.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn new(y: &CMatrix) -> Result<Self> {
        let (m, n) = y.shape();
        if m == 0 || n == 0 {
            return Err(Error::shape("SVD of an empty matrix"));
        }
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("SVD input contains non-finite entries".into()));
        }
        let svd = nalgebra::linalg::SVD::try_new(y.clone(), true, true, SVD_EPS, SVD_MAX_ITER)
            .ok_or_else(|| {
                Error::Numerical(format!("SVD of {m}x{n} matrix did not converge"))
            })?;
        let mut u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v requested");
        let mut v = v_t.adjoint();
        let s: Vec<f64> = svd.singular_values.iter().copied().collect();

        for i in 0..s.len() {
            let mut best = 0;
            let mut best_mag = -1.0;
            for (r, z) in u.column(i).iter().enumerate() {
                let mag = z.norm_sqr();
                if mag > best_mag {
                    best_mag = mag;
                    best = r;
                }
            }
            let pivot = u[(best, i)];
            if pivot.norm() > 0.0 {
                let rot = pivot.conj() / pivot.norm();
                u.column_mut(i).iter_mut().for_each(|z| *z *= rot);
                v.column_mut(i).iter_mut().for_each(|z| *z *= rot);
            }
        }
        Ok(Svd { u, s, v })
    }

    /// `sum_i w_i u_i v_i^H` over the given weights (shorter than `s` is fine).
    pub fn recompose(&self, weights: &[f64]) -> CMatrix {
        let m = self.u.nrows();
        let n = self.v.nrows();
        let mut out = CMatrix::zeros(m, n);
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let u = self.u.column(i);
            let v = self.v.column(i);
            for c in 0..n {
                let f = v[c].conj() * w;
                let mut col = out.column_mut(c);
                for r in 0..m {
                    col[r] += u[r] * f;
                }
            }
        }
        out
    }
}

/// `||x||_2^2` over a flat complex buffer.
pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    norm_sqr(x).sqrt()
}

/// `<x, y> = sum conj(x_i) y_i`.
pub fn dotc(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn diff_norm_sqr(x: &[C64], y: &[C64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum()
}

/// `a^H b` for column-major `a` (m x k) and `b` (m x n), returning a k x n matrix.
///
/// This is the hot product of the dictionary learning step, so it goes through
/// a blocked GEMM kernel instead of nalgebra's generic complex path.
pub fn adjoint_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (m, k) = a.shape();
    let (mb, n) = b.shape();
    assert_eq!(m, mb, "adjoint_mul: inner dimensions differ");
    let a_conj = a.map(|z| z.conj());
    let mut out = CMatrix::zeros(k, n);
    if m == 0 || k == 0 || n == 0 {
        return out;
    }
    // SAFETY: Complex64 is repr(C) with layout [re, im], identical to [f64; 2].
    // Strides describe the column-major buffers exactly and all lengths are checked above.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            k,
            m,
            n,
            [1.0, 0.0],
            a_conj.as_ptr() as *const [f64; 2],
            m as isize,
            1,
            b.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            [0.0, 0.0],
            out.as_mut_ptr() as *mut [f64; 2],
            1,
            k as isize,
        );
    }
    out
}
