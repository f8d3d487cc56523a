use crate::dictlearn::{soup_bcd, Dictionary, SoupConfig, SoupEvent, SparseCodeMatrix, SparsityPenalty};
use crate::error::{Error, Result};
use crate::model::{nrmse, Decomposition, DynamicSequence, IterationRecord, KtSpaceData, MetricsTrace};
use crate::patches::{extract_patches, PatchGeometry};
use crate::sensing::{estimate_norm, PowerIteration, SensingOperator};

use super::prox::{ImageUpdate, ProxState, SparseModel};
use super::{resolve_step, ReconConfig};

#[derive(Debug, Clone)]
pub struct LassiOutput {
    pub decomposition: Decomposition,
    pub dictionary: Dictionary,
    pub codes: SparseCodeMatrix,
    pub trace: MetricsTrace,
    /// Step actually used.
    pub step: f64,
}

/// Alternates dictionary learning on the patches of `x_S` with proximal
/// gradient updates of `(x_L, x_S)`, for `cfg.outer_iters` rounds.
///
/// Without `dictionary`, learning starts from the DCT (extended with
/// patches of the initial reconstruction when overcomplete). Codes start at
/// zero. `reference` only feeds the NRMSE column of the trace.
pub fn run_lassi(
    d: &KtSpaceData,
    op: &SensingOperator,
    cfg: &ReconConfig,
    init: Decomposition,
    dictionary: Option<Dictionary>,
    reference: Option<&DynamicSequence>,
) -> Result<LassiOutput> {
    run(d, op, cfg, init, dictionary, reference, false)
}

/// The dictionary-only model: the same loop with `x_L` held at zero and the
/// low-rank term dropped.
pub fn run_dinokat(
    d: &KtSpaceData,
    op: &SensingOperator,
    cfg: &ReconConfig,
    x0: DynamicSequence,
    dictionary: Option<Dictionary>,
    reference: Option<&DynamicSequence>,
) -> Result<LassiOutput> {
    let init = Decomposition::new(DynamicSequence::zeros(x0.dims()), x0)?;
    run(d, op, cfg, init, dictionary, reference, true)
}

fn default_bound(p: &crate::linalg::CMatrix, lambda_z: f64) -> f64 {
    let peak = p.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        1e6 * peak
    } else {
        1e6 * lambda_z.max(1.0)
    }
}

fn initial_dictionary(
    cfg: &ReconConfig,
    geometry: &PatchGeometry,
    given: Option<Dictionary>,
    patches: &crate::linalg::CMatrix,
) -> Result<Dictionary> {
    match given {
        Some(dict) => {
            if dict.atom_len() != geometry.patch_len() {
                return Err(Error::shape(format!(
                    "dictionary atoms have length {} but patches have length {}",
                    dict.atom_len(),
                    geometry.patch_len()
                )));
            }
            if dict.reshape_dims() != (cfg.patch.spatial_len(), cfg.patch.temporal_len()) {
                return Err(Error::shape("dictionary reshape dimensions do not match the patch size"));
            }
            Ok(dict)
        }
        None => {
            let natoms = cfg.natoms.unwrap_or(geometry.patch_len());
            Dictionary::initial(&cfg.patch, natoms, cfg.atom_rank, Some(patches), cfg.seed)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    d: &KtSpaceData,
    op: &SensingOperator,
    cfg: &ReconConfig,
    init: Decomposition,
    dictionary: Option<Dictionary>,
    reference: Option<&DynamicSequence>,
    pin_low_rank: bool,
) -> Result<LassiOutput> {
    cfg.validate()?;
    let dims = op.dims();
    if init.dims() != dims || d.dims() != dims {
        return Err(Error::shape(format!(
            "initialization {} and data {} must match the operator {dims}",
            init.dims(),
            d.dims()
        )));
    }
    if let Some(r) = reference {
        if r.dims() != dims {
            return Err(Error::shape("reference does not match the operator"));
        }
    }
    let geometry = cfg.patch.geometry(dims)?;
    let init_patches = extract_patches(&init.combined(), &geometry)?;
    let mut dict = initial_dictionary(cfg, &geometry, dictionary, &init_patches)?;
    let bound = cfg.bound.unwrap_or_else(|| default_bound(&init_patches, cfg.lambda_z));
    drop(init_patches);
    if cfg.penalty == SparsityPenalty::L0 && bound <= cfg.lambda_z {
        return Err(Error::param(format!("code bound a = {bound} must exceed lambda_Z = {}", cfg.lambda_z)));
    }
    let mut codes = SparseCodeMatrix::zeros(geometry.count(), dict.len(), bound)?;
    let certified = pin_low_rank || cfg.low_rank.is_certified();
    let mut trace = MetricsTrace::new(certified);
    if cfg.outer_iters == 0 {
        return Ok(LassiOutput {
            decomposition: init,
            dictionary: dict,
            codes,
            trace,
            step: cfg.step.unwrap_or(0.0),
        });
    }

    let power = PowerIteration {
        seed: cfg.seed,
        ..PowerIteration::default()
    };
    let op_norm = estimate_norm(op, power)?;
    let step = resolve_step(cfg.step, op_norm, !pin_low_rank && cfg.low_rank.is_nonconvex())?;
    let update = ImageUpdate {
        low_rank: cfg.low_rank,
        lambda_l: cfg.lambda_l,
        lambda_s: cfg.lambda_s,
        step,
        pin_low_rank,
    };
    let soup = SoupConfig {
        lambda_z: cfg.lambda_z,
        bound,
        penalty: cfg.penalty,
        sweeps: cfg.dict_sweeps,
    };

    let mut state = ProxState::new(init)?;
    if pin_low_rank {
        state.xl_singular_values.clear();
    }
    let mut model = SparseModel::new(geometry.clone(), &dict, &codes, cfg.lambda_z, cfg.penalty)?;
    let mut objective = update.objective(op, d, &state, &model)?;
    trace.step_objectives.push(objective);
    let mut previous = state.combined()?;

    for _ in 0..cfg.outer_iters {
        let p = extract_patches(&state.xs, &geometry)?;
        let steps = &mut trace.step_objectives;
        let mut observer = |e: &SoupEvent| {
            objective += cfg.lambda_s * e.delta;
            steps.push(objective);
        };
        let learned = soup_bcd(&p, dict, codes, &soup, Some(&mut observer))?;
        drop(p);
        dict = learned.dictionary;
        codes = learned.codes;
        trace.clipped_codes += learned.clipped;

        model = SparseModel::new(geometry.clone(), &dict, &codes, cfg.lambda_z, cfg.penalty)?;
        objective = update.objective(op, d, &state, &model)?;
        trace.step_objectives.push(objective);

        for _ in 0..cfg.prox_iters {
            state = update.step(op, d, state, &model)?;
            objective = update.objective(op, d, &state, &model)?;
            trace.step_objectives.push(objective);
        }

        let x = state.combined()?;
        let change = x.sub(&previous)?.norm();
        let scale = match reference {
            Some(r) => r.norm(),
            None => x.norm(),
        };
        trace.push(IterationRecord {
            iter: 0,
            objective,
            nrmse: reference.map(|r| nrmse(&x, r, None)).transpose()?,
            sparsity_pct: 100.0 * codes.sparsity_fraction(),
            delta: if scale > 0.0 { change / scale } else { change },
        });
        previous = x;
    }

    Ok(LassiOutput {
        decomposition: state.into_decomposition(),
        dictionary: dict,
        codes,
        trace,
        step,
    })
}
