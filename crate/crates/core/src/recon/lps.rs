use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::{reshape_r1, Decomposition, DynamicSequence, KtSpaceData};
use crate::sensing::{estimate_norm, zerofill_baseline, PowerIteration, SensingOperator};
use crate::shrinkage::{shrink, ShrinkageSpec};

use super::prox::{data_fidelity, gradient};
use super::resolve_step;

/// Low-rank plus temporal-Fourier-sparse baseline settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpsConfig {
    pub lambda_l: f64,
    pub lambda_s: f64,
    pub iters: usize,
    pub step: Option<f64>,
    pub seed: u64,
}

impl Default for LpsConfig {
    fn default() -> Self {
        LpsConfig {
            lambda_l: 5.0,
            lambda_s: 0.015,
            iters: 250,
            step: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LpsOutput {
    pub decomposition: Decomposition,
    /// Cost before the first iteration and after each one.
    pub objectives: Vec<f64>,
    pub step: f64,
}

/// Unitary DFT along time at every pixel.
pub fn temporal_fft(x: &DynamicSequence, inverse: bool) -> DynamicSequence {
    let dims = x.dims();
    let (n, nt) = (dims.frame_len(), dims.nt);
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(nt) } else { planner.plan_fft_forward(nt) };
    let scale = 1.0 / (nt as f64).sqrt();
    let src = x.as_slice();
    let mut out = DynamicSequence::zeros(dims);
    let dst = out.as_mut_slice();
    let mut buf = vec![C64::new(0.0, 0.0); nt];
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for p in 0..n {
        for (t, b) in buf.iter_mut().enumerate() {
            *b = src[p + n * t];
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (t, b) in buf.iter().enumerate() {
            dst[p + n * t] = b * scale;
        }
    }
    out
}

fn soft_threshold(z: C64, tau: f64) -> C64 {
    let mag = z.norm();
    if mag <= tau {
        C64::new(0.0, 0.0)
    } else {
        z * ((mag - tau) / mag)
    }
}

fn nuclear_norm(x: &DynamicSequence) -> Result<f64> {
    if x.norm() == 0.0 {
        return Ok(0.0);
    }
    Ok(crate::linalg::Svd::new(&reshape_r1(x))?.s.iter().sum())
}

fn l1(x: &DynamicSequence) -> f64 {
    x.as_slice().iter().map(|z| z.norm()).sum()
}

/// Proximal gradient on `0.5 ||A(x_L + x_S) - d||^2 + lambda_L ||R1(x_L)||_* + lambda_S ||T x_S||_1`
/// with `T` the unitary temporal Fourier transform. Starts from
/// `(x_L, x_S) = (zero-fill, 0)` unless `init` is given.
pub fn run_lps_baseline(
    d: &KtSpaceData,
    op: &SensingOperator,
    cfg: &LpsConfig,
    init: Option<Decomposition>,
) -> Result<LpsOutput> {
    for (name, v) in [("lambda_L", cfg.lambda_l), ("lambda_S", cfg.lambda_s)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::param(format!("{name} must be finite and nonnegative, got {v}")));
        }
    }
    let dims = op.dims();
    let init = match init {
        Some(i) => i,
        None => Decomposition::new(zerofill_baseline(d, op)?, DynamicSequence::zeros(dims))?,
    };
    if init.dims() != dims {
        return Err(Error::shape("initialization does not match the operator"));
    }
    let power = PowerIteration {
        seed: cfg.seed,
        ..PowerIteration::default()
    };
    let op_norm = estimate_norm(op, power)?;
    let step = resolve_step(cfg.step, op_norm, false)?;
    let objective = |xl: &DynamicSequence, xs: &DynamicSequence, sv_sum: Option<f64>| -> Result<f64> {
        let nuc = match sv_sum {
            Some(s) => s,
            None => nuclear_norm(xl)?,
        };
        Ok(data_fidelity(op, &xl.add(xs)?, d)? + cfg.lambda_l * nuc + cfg.lambda_s * l1(&temporal_fft(xs, false)))
    };

    let Decomposition { mut xl, mut xs } = init;
    let mut objectives = vec![objective(&xl, &xs, None)?];
    let svt = ShrinkageSpec::Svt { tau: step * cfg.lambda_l };
    for _ in 0..cfg.iters {
        let g = gradient(op, &xl, &xs, d)?.scale(step);
        let lt = xl.sub(&g)?;
        let out = shrink(&reshape_r1(&lt), &svt)?;
        let coeffs = temporal_fft(&xs.sub(&g)?, false);
        let (cdims, shrunk) = (coeffs.dims(), coeffs.into_vec());
        let shrunk = shrunk.into_iter().map(|z| soft_threshold(z, step * cfg.lambda_s)).collect();
        xs = temporal_fft(&DynamicSequence::from_vec(cdims, shrunk)?, true);
        xl = DynamicSequence::from_r1(dims, out.matrix)?;
        objectives.push(objective(&xl, &xs, Some(out.weights.iter().sum()))?);
    }
    Ok(LpsOutput {
        decomposition: Decomposition::new(xl, xs)?,
        objectives,
        step,
    })
}
