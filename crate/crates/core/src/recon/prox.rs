use crate::dictlearn::{code_penalty, sparse_approximation, Dictionary, SparseCodeMatrix, SparsityPenalty};
use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::model::{reshape_r1, Decomposition, DynamicSequence, KtSpaceData};
use crate::patches::{aggregate_patches, count_coverage, PatchGeometry};
use crate::sensing::SensingOperator;
use crate::shrinkage::{shrink, ShrinkageSpec};

use super::LowRankPenalty;

/// `A^H (A (x_L + x_S) - d)`, the gradient of the data term with respect to
/// either block.
pub fn gradient(
    op: &SensingOperator,
    xl: &DynamicSequence,
    xs: &DynamicSequence,
    d: &KtSpaceData,
) -> Result<DynamicSequence> {
    let x = xl.add(xs)?;
    let mut r = op.forward(&x)?;
    sub_in_place(&mut r, d)?;
    op.adjoint(&r)
}

fn sub_in_place(r: &mut KtSpaceData, d: &KtSpaceData) -> Result<()> {
    if r.as_slice().len() != d.as_slice().len() || r.coils() != d.coils() {
        return Err(Error::shape("measurements do not match the sensing operator"));
    }
    for (a, b) in r.samples_mut().iter_mut().zip(d.as_slice()) {
        *a -= b;
    }
    Ok(())
}

/// `0.5 ||A x - d||^2`.
pub(crate) fn data_fidelity(op: &SensingOperator, x: &DynamicSequence, d: &KtSpaceData) -> Result<f64> {
    let mut r = op.forward(x)?;
    sub_in_place(&mut r, d)?;
    Ok(0.5 * linalg::norm_sqr(r.as_slice()))
}

/// Shrinks `R1(x_L)`; returns the result and its singular values.
pub fn prox_xl(xl_tilde: &DynamicSequence, spec: &ShrinkageSpec) -> Result<(DynamicSequence, Vec<f64>)> {
    let out = shrink(&reshape_r1(xl_tilde), spec)?;
    Ok((DynamicSequence::from_r1(xl_tilde.dims(), out.matrix)?, out.weights))
}

/// The patch model `{D z_j}` frozen during the image update, with the pieces
/// of the `x_S` normal equation precomputed.
#[derive(Debug, Clone)]
pub struct SparseModel {
    geometry: PatchGeometry,
    /// `sum_j P_j^T D z_j`.
    aggregated: DynamicSequence,
    counts: Vec<u32>,
    /// `sum_j ||D z_j||^2`.
    approx_energy: f64,
    code_penalty: f64,
}

impl SparseModel {
    pub fn new(
        geometry: PatchGeometry,
        dictionary: &Dictionary,
        codes: &SparseCodeMatrix,
        lambda_z: f64,
        penalty: SparsityPenalty,
    ) -> Result<Self> {
        if codes.patches() != geometry.count() || dictionary.atom_len() != geometry.patch_len() {
            return Err(Error::shape("dictionary or codes do not match the patch geometry"));
        }
        let approx = sparse_approximation(dictionary, codes)?;
        let aggregated = aggregate_patches(&approx, &geometry)?;
        let counts = count_coverage(&geometry);
        Ok(SparseModel {
            approx_energy: linalg::norm_sqr(approx.as_slice()),
            code_penalty: code_penalty(codes, lambda_z, penalty),
            geometry,
            aggregated,
            counts,
        })
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geometry
    }

    pub fn aggregated(&self) -> &DynamicSequence {
        &self.aggregated
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `sum_j ||P_j x - D z_j||^2`, expanded through the coverage counts so
    /// no patch matrix is formed.
    pub fn fit(&self, xs: &DynamicSequence) -> Result<f64> {
        if xs.dims() != self.geometry.dims() {
            return Err(Error::shape("x_S does not match the patch geometry"));
        }
        let mut acc = self.approx_energy;
        for ((x, q), &c) in xs.as_slice().iter().zip(self.aggregated.as_slice()).zip(&self.counts) {
            acc += c as f64 * x.norm_sqr() - 2.0 * (x.conj() * q).re;
        }
        Ok(acc.max(0.0))
    }

    /// `sum_j ||P_j x - D z_j||^2 + penalty(Z)`.
    pub fn regularizer(&self, xs: &DynamicSequence) -> Result<f64> {
        Ok(self.fit(xs)? + self.code_penalty)
    }
}

/// Solves `(I + 2 t lambda_S sum_j P_j^T P_j) x = x_tilde + 2 t lambda_S sum_j P_j^T D z_j`.
/// The system matrix is diagonal with entries `1 + 2 t lambda_S count`.
pub fn prox_xs(xs_tilde: &DynamicSequence, model: &SparseModel, step: f64, lambda_s: f64) -> Result<DynamicSequence> {
    if xs_tilde.dims() != model.geometry.dims() {
        return Err(Error::shape("x_S does not match the patch geometry"));
    }
    let w = 2.0 * step * lambda_s;
    let data: Vec<C64> = xs_tilde
        .as_slice()
        .iter()
        .zip(model.aggregated.as_slice())
        .zip(&model.counts)
        .map(|((x, q), &c)| (x + q * w) / (1.0 + w * c as f64))
        .collect();
    DynamicSequence::from_vec(xs_tilde.dims(), data)
}

/// Iterate of the image update together with the singular values of
/// `R1(x_L)`, from which the low-rank penalty is evaluated.
#[derive(Debug, Clone)]
pub struct ProxState {
    pub xl: DynamicSequence,
    pub xs: DynamicSequence,
    pub xl_singular_values: Vec<f64>,
}

impl ProxState {
    /// Computes the singular values of `R1(x_L)` once.
    pub fn new(init: Decomposition) -> Result<Self> {
        let s = if init.xl.norm() == 0.0 {
            Vec::new()
        } else {
            linalg::Svd::new(&reshape_r1(&init.xl))?.s
        };
        Ok(ProxState {
            xl: init.xl,
            xs: init.xs,
            xl_singular_values: s,
        })
    }

    pub fn combined(&self) -> Result<DynamicSequence> {
        self.xl.add(&self.xs)
    }

    pub fn into_decomposition(self) -> Decomposition {
        Decomposition { xl: self.xl, xs: self.xs }
    }
}

/// Settings of one image update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageUpdate {
    pub low_rank: LowRankPenalty,
    pub lambda_l: f64,
    pub lambda_s: f64,
    pub step: f64,
    /// Keeps `x_L = 0` and drops the low-rank term.
    pub pin_low_rank: bool,
}

impl ImageUpdate {
    /// Full cost at `state`; the low-rank term is omitted for OptShrink.
    pub fn objective(
        &self,
        op: &SensingOperator,
        d: &KtSpaceData,
        state: &ProxState,
        model: &SparseModel,
    ) -> Result<f64> {
        let mut f = data_fidelity(op, &state.combined()?, d)?;
        if !self.pin_low_rank {
            f += self.low_rank.value(&state.xl_singular_values, self.lambda_l).unwrap_or(0.0);
        }
        Ok(f + self.lambda_s * model.regularizer(&state.xs)?)
    }

    pub fn step(&self, op: &SensingOperator, d: &KtSpaceData, state: ProxState, model: &SparseModel) -> Result<ProxState> {
        let g = gradient(op, &state.xl, &state.xs, d)?;
        let xs_tilde = state.xs.sub(&g.scale(self.step))?;
        let xs = prox_xs(&xs_tilde, model, self.step, self.lambda_s)?;
        if self.pin_low_rank {
            return Ok(ProxState { xs, ..state });
        }
        let xl_tilde = state.xl.sub(&g.scale(self.step))?;
        let spec = self.low_rank.shrinkage(self.step, self.lambda_l);
        let (xl, weights) = prox_xl(&xl_tilde, &spec)?;
        Ok(ProxState {
            xl,
            xs,
            xl_singular_values: weights,
        })
    }
}

/// `iters` proximal gradient iterations on the image update at fixed `(D, Z)`,
/// both blocks moving from the same gradient. The step is checked against
/// `op_norm`; `observer` receives the cost after every iteration.
pub fn prox_gradient_p4(
    init: ProxState,
    model: &SparseModel,
    op: &SensingOperator,
    d: &KtSpaceData,
    update: &ImageUpdate,
    op_norm: f64,
    iters: usize,
    mut observer: Option<&mut dyn FnMut(f64)>,
) -> Result<ProxState> {
    super::resolve_step(Some(update.step), op_norm, false)?;
    let mut state = init;
    for _ in 0..iters {
        state = update.step(op, d, state, model)?;
        if let Some(obs) = observer.as_deref_mut() {
            obs(update.objective(op, d, &state, model)?);
        }
    }
    Ok(state)
}
