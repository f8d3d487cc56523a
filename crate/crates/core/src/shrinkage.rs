//! Singular value shrinkage estimators for the low-rank block.
//!
//! Every estimator keeps the singular vectors of its input and replaces the
//! singular values by weights, so each returns the weights alongside the
//! matrix; penalties are later evaluated from the weights directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Svd};

/// Exponent of a Schatten quasi-norm penalty `tau * sum sigma_i^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchattenP {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "2/3")]
    TwoThirds,
}

impl SchattenP {
    pub fn value(self) -> f64 {
        match self {
            SchattenP::Half => 0.5,
            SchattenP::TwoThirds => 2.0 / 3.0,
        }
    }

    /// Accepts `0.5` or `2/3` (within `1e-9`).
    pub fn from_f64(p: f64) -> Result<Self> {
        if (p - 0.5).abs() < 1e-9 {
            Ok(SchattenP::Half)
        } else if (p - 2.0 / 3.0).abs() < 1e-9 {
            Ok(SchattenP::TwoThirds)
        } else {
            Err(Error::param(format!("Schatten exponent must be 1/2 or 2/3, got {p}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShrinkageSpec {
    /// Soft thresholding of singular values at `tau`.
    Svt { tau: f64 },
    /// Singular values below `tau` set to zero, the rest kept.
    Hard { tau: f64 },
    /// Scalar prox of `tau * sigma^p` on each singular value.
    Schatten { p: SchattenP, tau: f64 },
    /// Data-driven OptShrink weights for the leading `rank` singular values.
    OptShrink { rank: usize },
}

impl ShrinkageSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ShrinkageSpec::Svt { tau } | ShrinkageSpec::Hard { tau } | ShrinkageSpec::Schatten { tau, .. } => {
                check_tau(tau)
            }
            ShrinkageSpec::OptShrink { rank } => {
                if rank == 0 {
                    Err(Error::param("optshrink rank must be positive"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("shrinkage threshold must be finite and nonnegative, got {tau}")))
    }
}

/// Result of a shrinkage step: `matrix = sum_i weights[i] u_i v_i^H`.
#[derive(Debug, Clone)]
pub struct Shrunk {
    pub matrix: CMatrix,
    pub weights: Vec<f64>,
}

pub fn shrink(y: &CMatrix, spec: &ShrinkageSpec) -> Result<Shrunk> {
    spec.validate()?;
    let svd = Svd::new(y)?;
    let weights = match *spec {
        ShrinkageSpec::Svt { tau } => svt_weights(&svd.s, tau),
        ShrinkageSpec::Hard { tau } => hard_weights(&svd.s, tau),
        ShrinkageSpec::Schatten { p, tau } => svd.s.iter().map(|&s| schatten_scalar_prox(s, p, tau)).collect(),
        ShrinkageSpec::OptShrink { rank } => optshrink_weights(&svd.s, rank, y.nrows(), y.ncols())?,
    };
    Ok(Shrunk {
        matrix: svd.recompose(&weights),
        weights,
    })
}

fn svt_weights(s: &[f64], tau: f64) -> Vec<f64> {
    s.iter().map(|&s| (s - tau).max(0.0)).collect()
}

fn hard_weights(s: &[f64], tau: f64) -> Vec<f64> {
    s.iter().map(|&s| if s < tau { 0.0 } else { s }).collect()
}

/// `sum_i (sigma_i - tau)^+ u_i v_i^H`, the prox of `tau ||.||_*`.
pub fn svt(y: &CMatrix, tau: f64) -> Result<CMatrix> {
    Ok(shrink(y, &ShrinkageSpec::Svt { tau })?.matrix)
}

/// Zeroes singular values below `tau`; the prox of `(tau^2 / 2) rank(.)`.
pub fn hard_sv_threshold(y: &CMatrix, tau: f64) -> Result<CMatrix> {
    Ok(shrink(y, &ShrinkageSpec::Hard { tau })?.matrix)
}

pub fn schatten_prox(y: &CMatrix, p: SchattenP, tau: f64) -> Result<CMatrix> {
    Ok(shrink(y, &ShrinkageSpec::Schatten { p, tau })?.matrix)
}

pub fn optshrink(y: &CMatrix, rank: usize) -> Result<CMatrix> {
    Ok(shrink(y, &ShrinkageSpec::OptShrink { rank })?.matrix)
}

/// Largest real root of `t^3 + p t + q = 0`.
fn largest_cubic_root(p: f64, q: f64) -> f64 {
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let r = disc.sqrt();
        (-q / 2.0 + r).cbrt() + (-q / 2.0 - r).cbrt()
    } else if p == 0.0 {
        0.0
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        m * (arg.acos() / 3.0).cos()
    }
}

fn schatten_objective(w: f64, sigma: f64, p: f64, tau: f64) -> f64 {
    0.5 * (w - sigma).powi(2) + tau * w.powf(p)
}

/// `argmin_{w >= 0} 1/2 (w - sigma)^2 + tau w^p` for `p` in `{1/2, 2/3}`.
///
/// The positive stationary point is the largest root of `s^3 - sigma s + tau/2`
/// with `w = s^2` (p = 1/2), or of `s^4 - sigma s + 2 tau / 3` with `w = s^3`
/// (p = 2/3, solved through its resolvent cubic). It is compared against
/// `w = 0`, which wins ties.
pub fn schatten_scalar_prox(sigma: f64, p: SchattenP, tau: f64) -> f64 {
    if tau == 0.0 {
        return sigma.max(0.0);
    }
    if sigma <= 0.0 {
        return 0.0;
    }
    let pv = p.value();
    let candidate = match p {
        SchattenP::Half => {
            let s = largest_cubic_root(-sigma, tau / 2.0);
            if s > 0.0 {
                Some(s * s)
            } else {
                None
            }
        }
        SchattenP::TwoThirds => {
            let k = 2.0 * tau / 3.0;
            let y = largest_cubic_root(-k, -sigma * sigma / 8.0);
            let a = (2.0 * y).sqrt();
            let inner = 2.0 * sigma / a - 2.0 * y;
            if y > 0.0 && inner >= 0.0 {
                let s = (a + inner.sqrt()) / 2.0;
                Some(s * s * s)
            } else {
                None
            }
        }
    };
    let Some(mut w) = candidate else {
        return 0.0;
    };
    // Newton on w - sigma + tau p w^(p-1) = 0 to clean up cancellation.
    for _ in 0..3 {
        let g = w - sigma + tau * pv * w.powf(pv - 1.0);
        let dg = 1.0 + tau * pv * (pv - 1.0) * w.powf(pv - 2.0);
        if dg <= 0.0 || !g.is_finite() {
            break;
        }
        let next = w - g / dg;
        if !(next > 0.0) {
            break;
        }
        w = next;
    }
    if schatten_objective(w, sigma, pv, tau) < schatten_objective(0.0, sigma, pv, tau) {
        w
    } else {
        0.0
    }
}

/// OptShrink weights `w_i = -2 D(sigma_i) / D'(sigma_i)` for `i < rank`, from
/// the empirical D-transform of the trailing singular values.
fn optshrink_weights(s: &[f64], rank: usize, m: usize, n: usize) -> Result<Vec<f64>> {
    let q = s.len();
    if rank == 0 || rank + 2 > q {
        return Err(Error::param(format!(
            "optshrink rank {rank} needs at least two noise singular values (matrix has {q})"
        )));
    }
    let c = m.min(n) as f64 / m.max(n) as f64;
    let noise = &s[rank..];
    let count = noise.len() as f64;
    let mut weights = vec![0.0; q];
    for (i, &z) in s[..rank].iter().enumerate() {
        let mut phi = 0.0;
        let mut dphi = 0.0;
        for &sj in noise {
            let gap = z * z - sj * sj;
            if gap.abs() <= 1e-12 * z * z || z == 0.0 {
                return Err(Error::DegenerateShrinkage { index: i, value: z });
            }
            phi += z / gap;
            dphi -= (z * z + sj * sj) / (gap * gap);
        }
        phi /= count;
        dphi /= count;
        let tail = c * phi + (1.0 - c) / z;
        let dtail = c * dphi - (1.0 - c) / (z * z);
        let d = phi * tail;
        let dd = dphi * tail + phi * dtail;
        let w = -2.0 * d / dd;
        weights[i] = if w.is_finite() { w.max(0.0) } else { 0.0 };
    }
    Ok(weights)
}
