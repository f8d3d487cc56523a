//! Domain types shared by every stage: space-time sequences, k-t data,
//! sampling masks, L+S decompositions, metric traces and the NRMSE metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Spatial and temporal extent of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nt: usize) -> Self {
        Dims { nx, ny, nt }
    }

    pub fn frame_len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index with x fastest, then y, then t.
    #[inline]
    pub fn index(&self, x: usize, y: usize, t: usize) -> usize {
        x + self.nx * (y + self.ny * t)
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || self.nt == 0 {
            return Err(Error::shape(format!("dimensions must be positive, got {self}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for Dims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nt)
    }
}

/// A complex `Nx x Ny x Nt` image sequence stored x-fastest, then y, then t.
///
/// With that layout the Casorati matricization (one vectorized frame per
/// column) is the same buffer read as a column-major `Nx*Ny x Nt` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSequence {
    dims: Dims,
    data: Vec<C64>,
}

impl DynamicSequence {
    pub fn zeros(dims: Dims) -> Self {
        DynamicSequence {
            dims,
            data: vec![C64::new(0.0, 0.0); dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<C64>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::shape(format!(
                "sequence {dims} needs {} samples, got {}",
                dims.len(),
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("sequence contains non-finite entries".into()));
        }
        Ok(DynamicSequence { dims, data })
    }

    /// Inverse of [`reshape_r1`]: a `Nx*Ny x Nt` matrix back to a sequence.
    pub fn from_r1(dims: Dims, matrix: CMatrix) -> Result<Self> {
        if matrix.shape() != (dims.frame_len(), dims.nt) {
            return Err(Error::shape(format!(
                "R1 matrix {:?} does not match sequence {dims}",
                matrix.shape()
            )));
        }
        DynamicSequence::from_vec(dims, matrix.as_slice().to_vec())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> C64 {
        self.data[self.dims.index(x, y, t)]
    }

    pub fn frame(&self, t: usize) -> &[C64] {
        let n = self.dims.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [C64] {
        let n = self.dims.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "sequence shapes differ: {} vs {}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(DynamicSequence { dims: self.dims, data })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DynamicSequence { dims: self.dims, data })
    }

    pub fn scale(&self, alpha: f64) -> Self {
        DynamicSequence {
            dims: self.dims,
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    /// Entrywise magnitude as a real-valued (zero imaginary part) sequence.
    pub fn magnitude(&self) -> Self {
        DynamicSequence {
            dims: self.dims,
            data: self.data.iter().map(|z| C64::new(z.norm(), 0.0)).collect(),
        }
    }
}

/// Casorati matricization: column `t` is frame `t` vectorized x-fastest.
pub fn reshape_r1(seq: &DynamicSequence) -> CMatrix {
    CMatrix::from_column_slice(seq.dims.frame_len(), seq.dims.nt, &seq.data)
}

/// Binary k-t sampling pattern. Index `(kx, ky, t)` uses the centered k-space
/// layout: the DC sample sits at `(Nx/2, Ny/2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingMask {
    dims: Dims,
    mask: Vec<bool>,
}

impl SamplingMask {
    pub fn new(dims: Dims, mask: Vec<bool>) -> Result<Self> {
        dims.validate()?;
        if mask.len() != dims.len() {
            return Err(Error::shape(format!(
                "mask {dims} needs {} entries, got {}",
                dims.len(),
                mask.len()
            )));
        }
        let n = dims.frame_len();
        for t in 0..dims.nt {
            if !mask[t * n..(t + 1) * n].iter().any(|&b| b) {
                return Err(Error::param(format!("mask frame {t} has no sampled location")));
            }
        }
        Ok(SamplingMask { dims, mask })
    }

    pub fn full(dims: Dims) -> Result<Self> {
        SamplingMask::new(dims, vec![true; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_sampled(&self, x: usize, y: usize, t: usize) -> bool {
        self.mask[self.dims.index(x, y, t)]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// `Nx*Ny*Nt / (number of sampled locations)`.
    pub fn acceleration(&self) -> f64 {
        self.dims.len() as f64 / self.count() as f64
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }
}

/// Undersampled multi-coil k-t measurements. Layout: x fastest, then y, then t,
/// with the coil index slowest. Unsampled locations are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct KtSpaceData {
    coils: usize,
    mask: SamplingMask,
    samples: Vec<C64>,
}

impl KtSpaceData {
    pub fn new(coils: usize, mask: SamplingMask, mut samples: Vec<C64>) -> Result<Self> {
        if coils == 0 {
            return Err(Error::param("coil count must be positive"));
        }
        let n = mask.dims().len();
        if samples.len() != coils * n {
            return Err(Error::shape(format!(
                "k-t data for {coils} coil(s) of {} needs {} samples, got {}",
                mask.dims(),
                coils * n,
                samples.len()
            )));
        }
        for (c, chunk) in samples.chunks_mut(n).enumerate() {
            for (z, &keep) in chunk.iter_mut().zip(mask.as_slice()) {
                if !keep {
                    if z.norm_sqr() != 0.0 {
                        return Err(Error::param(format!(
                            "coil {c} has a nonzero sample at an unsampled location"
                        )));
                    }
                    *z = C64::new(0.0, 0.0);
                }
            }
        }
        Ok(KtSpaceData { coils, mask, samples })
    }

    pub fn coils(&self) -> usize {
        self.coils
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn dims(&self) -> Dims {
        self.mask.dims()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.samples
    }

    pub fn coil(&self, c: usize) -> &[C64] {
        let n = self.dims().len();
        &self.samples[c * n..(c + 1) * n]
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.samples)
    }

    /// Callers must keep unsampled locations at zero.
    pub(crate) fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub(crate) fn from_parts_unchecked(coils: usize, mask: SamplingMask, samples: Vec<C64>) -> Self {
        KtSpaceData { coils, mask, samples }
    }
}

/// `x = xL + xS`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub xl: DynamicSequence,
    pub xs: DynamicSequence,
}

impl Decomposition {
    pub fn new(xl: DynamicSequence, xs: DynamicSequence) -> Result<Self> {
        if xl.dims() != xs.dims() {
            return Err(Error::shape(format!(
                "low-rank part {} and sparse part {} differ in shape",
                xl.dims(),
                xs.dims()
            )));
        }
        Ok(Decomposition { xl, xs })
    }

    pub fn dims(&self) -> Dims {
        self.xl.dims()
    }

    pub fn combined(&self) -> DynamicSequence {
        self.xl.add(&self.xs).expect("shapes checked at construction")
    }
}

/// One outer-iteration record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    /// `None` when no reference was supplied.
    pub nrmse: Option<f64>,
    pub sparsity_pct: f64,
    pub delta: f64,
}

/// Per-outer-iteration metrics plus the fine-grained objective after every
/// dictionary step and every proximal step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTrace {
    records: Vec<IterationRecord>,
    /// Objective before the first step and after every inner step, in order.
    pub step_objectives: Vec<f64>,
    /// The objective is certified only for variants that minimize a cost.
    pub certified: bool,
    /// How many code magnitudes were clipped at the bound `a`.
    pub clipped_codes: usize,
}

impl MetricsTrace {
    pub fn new(certified: bool) -> Self {
        MetricsTrace {
            certified,
            ..Default::default()
        }
    }

    pub fn push(&mut self, mut record: IterationRecord) {
        record.iter = self.records.len() + 1;
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub const CSV_HEADER: &'static str = "iter,objective,nrmse,sparsity_pct,delta";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let nrmse = r.nrmse.map(|v| format!("{v:e}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{:e},{},{:e},{:e}\n",
                r.iter, r.objective, nrmse, r.sparsity_pct, r.delta
            ));
        }
        out
    }
}

/// Axis-aligned spatial box, inclusive on both ends, applied to every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roi {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Roi {
    fn validate(&self, dims: Dims) -> Result<()> {
        if self.x0 > self.x1 || self.y0 > self.y1 || self.x1 >= dims.nx || self.y1 >= dims.ny {
            return Err(Error::param(format!(
                "ROI x{}..={} y{}..={} does not lie inside {dims}",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }

    fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// `||recon - ref||_2 / ||ref||_2`, optionally restricted to a spatial box.
pub fn nrmse(recon: &DynamicSequence, reference: &DynamicSequence, roi: Option<Roi>) -> Result<f64> {
    let dims = reference.dims();
    if recon.dims() != dims {
        return Err(Error::shape(format!(
            "reconstruction {} and reference {dims} differ in shape",
            recon.dims()
        )));
    }
    let (err, den) = match roi {
        None => (
            crate::linalg::diff_norm_sqr(recon.as_slice(), reference.as_slice()),
            crate::linalg::norm_sqr(reference.as_slice()),
        ),
        Some(roi) => {
            roi.validate(dims)?;
            let mut err = 0.0;
            let mut den = 0.0;
            for t in 0..dims.nt {
                for y in 0..dims.ny {
                    for x in 0..dims.nx {
                        if roi.contains(x, y) {
                            let r = reference.get(x, y, t);
                            err += (recon.get(x, y, t) - r).norm_sqr();
                            den += r.norm_sqr();
                        }
                    }
                }
            }
            (err, den)
        }
    };
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((err / den).sqrt())
}

/// NRMSE of every frame separately.
pub fn nrmse_per_frame(
    recon: &DynamicSequence,
    reference: &DynamicSequence,
    roi: Option<Roi>,
) -> Result<Vec<f64>> {
    let dims = reference.dims();
    if recon.dims() != dims {
        return Err(Error::shape("reconstruction and reference differ in shape"));
    }
    let frame_dims = Dims::new(dims.nx, dims.ny, 1);
    (0..dims.nt)
        .map(|t| {
            let a = DynamicSequence::from_vec(frame_dims, recon.frame(t).to_vec())?;
            let b = DynamicSequence::from_vec(frame_dims, reference.frame(t).to_vec())?;
            nrmse(&a, &b, roi)
        })
        .collect()
}
