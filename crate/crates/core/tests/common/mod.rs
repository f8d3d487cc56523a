//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use lassi::{CMatrix, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randc(r: &mut ChaCha8Rng) -> C64 {
    C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5)
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn gaussc(r: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(r);
    let im: f64 = StandardNormal.sample(r);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_vec(n: usize, r: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| randc(r)).collect()
}

pub fn random_matrix(m: usize, n: usize, r: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(m, n, |_, _| randc(r))
}

pub fn dotc(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One-sided (Hestenes) Jacobi SVD: returns `(s, U, V)` with `s` descending,
/// `A = U diag(s) V^H`, `U` being `m x n` for `m >= n` (transposed otherwise).
pub fn jacobi_svd(a: &CMatrix) -> (Vec<f64>, CMatrix, CMatrix) {
    let (m, n) = a.shape();
    if m < n {
        let (s, u, v) = jacobi_svd(&a.adjoint());
        return (s, v, u);
    }
    let mut w = a.clone();
    let mut v = CMatrix::identity(n, n);
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w.column(q).iter().map(|z| z.norm_sqr()).sum();
                let g: C64 = w.column(p).iter().zip(w.column(q).iter()).map(|(x, y)| x.conj() * y).sum();
                let gabs = g.norm();
                if gabs <= 1e-15 * (alpha * beta).sqrt() || gabs == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = g / gabs;
                let zeta = (beta - alpha) / (2.0 * gabs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let xp = mat[(r, p)];
                        let xq = mat[(r, q)] * phase.conj();
                        mat[(r, p)] = xp * c - xq * s;
                        mat[(r, q)] = xp * s + xq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<(f64, usize)> =
        (0..n).map(|j| (w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), j)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut u = CMatrix::zeros(m, n);
    let mut vs = CMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &(sk, j)) in order.iter().enumerate() {
        s.push(sk);
        vs.set_column(k, &v.column(j));
        if sk > 0.0 {
            u.set_column(k, &(w.column(j) / C64::new(sk, 0.0)));
        }
    }
    (s, u, vs)
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    jacobi_svd(a).0
}

pub fn nuclear_norm(a: &CMatrix) -> f64 {
    singular_values(a).iter().sum()
}

/// `sum_{i<r} w_i u_i v_i^H` from the Jacobi factors.
pub fn recompose(u: &CMatrix, v: &CMatrix, weights: &[f64]) -> CMatrix {
    let mut out = CMatrix::zeros(u.nrows(), v.nrows());
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            out += u.column(i) * v.column(i).adjoint() * C64::new(w, 0.0);
        }
    }
    out
}

/// Best rank-`r` approximation.
pub fn truncate(a: &CMatrix, r: usize) -> CMatrix {
    let (s, u, v) = jacobi_svd(a);
    recompose(&u, &v, &s[..r.min(s.len())])
}

/// Gaussian elimination with partial pivoting on a dense complex system.
pub fn dense_solve(mut a: Vec<Vec<C64>>, mut b: Vec<C64>) -> Vec<C64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        assert!(d.norm() > 1e-14, "singular system");
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let sub = a[col][k] * f;
                a[row][k] -= sub;
            }
            let sub = b[col] * f;
            b[row] -= sub;
        }
    }
    let mut x = vec![C64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Minimizes a scalar function on `[lo, hi]` by a `points`-point grid followed
/// by golden-section refinement of the best grid cell. Returns `(argmin, min)`.
pub fn scan_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let h = (hi - lo) / (points - 1) as f64;
    let mut best = (lo, f(lo));
    for k in 1..points {
        let x = lo + h * k as f64;
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    if fx < best.1 {
        (x, fx)
    } else {
        best
    }
}
