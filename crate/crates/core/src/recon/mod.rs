//! Image reconstruction: the proximal-gradient step for the low-rank plus
//! dictionary-sparse model, the alternating outer loop, the dictionary-only
//! special case and a low-rank plus temporal-Fourier-sparse baseline.

mod lassi;
mod lps;
mod prox;

pub use lassi::{run_dinokat, run_lassi, LassiOutput};
pub use lps::{run_lps_baseline, temporal_fft, LpsConfig, LpsOutput};
pub use prox::{gradient, prox_gradient_p4, prox_xl, prox_xs, ImageUpdate, ProxState, SparseModel};

use serde::{Deserialize, Serialize};

use crate::dictlearn::SparsityPenalty;
use crate::error::{Error, Result};
use crate::patches::PatchConfig;
use crate::shrinkage::{SchattenP, ShrinkageSpec};

/// Penalty on `R1(x_L)` and the shrinkage that serves as its prox.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LowRankPenalty {
    /// `lambda_L ||.||_*`, prox = SVT at `t lambda_L`.
    Nuclear,
    /// `lambda_L rank(.)`, prox = hard threshold at `sqrt(2 t lambda_L)`.
    Rank,
    /// `lambda_L sum sigma_i^p`.
    Schatten { p: SchattenP },
    /// OptShrink with `rank` signal components; has no associated cost.
    OptShrink { rank: usize },
}

impl LowRankPenalty {
    pub fn shrinkage(&self, step: f64, lambda_l: f64) -> ShrinkageSpec {
        match *self {
            LowRankPenalty::Nuclear => ShrinkageSpec::Svt { tau: step * lambda_l },
            LowRankPenalty::Rank => ShrinkageSpec::Hard { tau: (2.0 * step * lambda_l).sqrt() },
            LowRankPenalty::Schatten { p } => ShrinkageSpec::Schatten { p, tau: step * lambda_l },
            LowRankPenalty::OptShrink { rank } => ShrinkageSpec::OptShrink { rank },
        }
    }

    /// Penalty value from the singular values of `R1(x_L)`; `None` for OptShrink.
    pub fn value(&self, singular_values: &[f64], lambda_l: f64) -> Option<f64> {
        match *self {
            LowRankPenalty::Nuclear => Some(lambda_l * singular_values.iter().sum::<f64>()),
            LowRankPenalty::Rank => Some(lambda_l * singular_values.iter().filter(|&&s| s > 0.0).count() as f64),
            LowRankPenalty::Schatten { p } => {
                let pv = p.value();
                Some(lambda_l * singular_values.iter().map(|s| s.powf(pv)).sum::<f64>())
            }
            LowRankPenalty::OptShrink { .. } => None,
        }
    }

    pub fn is_certified(&self) -> bool {
        !matches!(self, LowRankPenalty::OptShrink { .. })
    }

    /// Rank and Schatten penalties have nonconvex proxes, which need a
    /// smaller step for guaranteed descent.
    pub fn is_nonconvex(&self) -> bool {
        matches!(self, LowRankPenalty::Rank | LowRankPenalty::Schatten { .. })
    }
}

/// All scalars of a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconConfig {
    pub lambda_l: f64,
    pub lambda_s: f64,
    pub lambda_z: f64,
    /// Code magnitude bound `a`; `None` picks `1e6` times the largest patch
    /// norm of the initialization.
    pub bound: Option<f64>,
    pub atom_rank: usize,
    /// Dictionary size `K`; `None` means square (`K = m`).
    pub natoms: Option<usize>,
    pub low_rank: LowRankPenalty,
    pub penalty: SparsityPenalty,
    /// Constant step `t`; `None` picks the default for the penalty.
    pub step: Option<f64>,
    pub outer_iters: usize,
    pub dict_sweeps: usize,
    pub prox_iters: usize,
    pub patch: PatchConfig,
    pub seed: u64,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            lambda_l: 0.02,
            lambda_s: 5e-4,
            lambda_z: 0.1,
            bound: None,
            atom_rank: 1,
            natoms: None,
            low_rank: LowRankPenalty::Nuclear,
            penalty: SparsityPenalty::L0,
            step: None,
            outer_iters: 50,
            dict_sweeps: 1,
            prox_iters: 5,
            patch: PatchConfig::default(),
            seed: 0,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_L", self.lambda_l), ("lambda_S", self.lambda_s), ("lambda_Z", self.lambda_z)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if let Some(a) = self.bound {
            if !(a > 0.0) {
                return Err(Error::param(format!("code bound must be positive, got {a}")));
            }
            if self.penalty == SparsityPenalty::L0 && a <= self.lambda_z {
                return Err(Error::param(format!("code bound a = {a} must exceed lambda_Z = {}", self.lambda_z)));
            }
        }
        if self.atom_rank == 0 || self.atom_rank > self.patch.spatial_len().min(self.patch.temporal_len()) {
            return Err(Error::param(format!(
                "atom rank {} outside [1, {}]",
                self.atom_rank,
                self.patch.spatial_len().min(self.patch.temporal_len())
            )));
        }
        if self.natoms == Some(0) {
            return Err(Error::param("the dictionary needs at least one atom"));
        }
        if let LowRankPenalty::OptShrink { rank } = self.low_rank {
            if rank == 0 {
                return Err(Error::param("optshrink rank must be positive"));
            }
        }
        Ok(())
    }

    /// Resolves the constant step against `||A||_2`.
    ///
    /// The gradient of the data term is Lipschitz with constant `2 ||A||^2`
    /// over the pair `(x_L, x_S)`, so any `t < 1/||A||^2` is admissible. The
    /// default is `0.99/||A||^2`, or `0.99 (2/3)/||A||^2` when the `x_L` prox
    /// is nonconvex: with one nonconvex and one strongly convex block, that is
    /// where every proximal step is guaranteed not to increase the cost.
    pub fn resolve_step(&self, op_norm: f64) -> Result<f64> {
        resolve_step(self.step, op_norm, self.low_rank.is_nonconvex())
    }
}

pub(crate) fn resolve_step(step: Option<f64>, op_norm: f64, nonconvex: bool) -> Result<f64> {
    if !(op_norm > 0.0 && op_norm.is_finite()) {
        return Err(Error::param(format!("operator norm must be positive, got {op_norm}")));
    }
    let limit = 1.0 / (op_norm * op_norm);
    match step {
        Some(t) if !(t > 0.0 && t < limit) => Err(Error::param(format!(
            "step {t} violates 0 < t < 2/l = {limit} for ||A|| = {op_norm}"
        ))),
        Some(t) => Ok(t),
        None if nonconvex => Ok(0.99 * (2.0 / 3.0) * limit),
        None => Ok(0.99 * limit),
    }
}
