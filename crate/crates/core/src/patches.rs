//! Overlapping spatiotemporal patches: extraction into the training matrix,
//! the adjoint scatter-add, and the per-voxel coverage count.
//!
//! Along each axis, origins are `0, s, 2s, ...` while the patch fits, plus one
//! final origin clamped so the last patch ends exactly at the volume edge.
//! Patches are enumerated x-fastest over origins and vectorized x-fastest,
//! then y, then t, so a patch vector reshaped as a column-major
//! `(mx*my) x mt` matrix has one spatial patch per column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::model::{Dims, DynamicSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub size: [usize; 3],
    pub stride: [usize; 3],
}

impl Default for PatchConfig {
    /// 8x8x5 patches with spatial stride 2 and temporal stride 1.
    fn default() -> Self {
        PatchConfig {
            size: [8, 8, 5],
            stride: [2, 2, 1],
        }
    }
}

fn axis_origins(n: usize, p: usize, s: usize) -> Vec<usize> {
    let mut origins: Vec<usize> = (0..=n - p).step_by(s).collect();
    if *origins.last().expect("p <= n") + p < n {
        origins.push(n - p);
    }
    origins
}

impl PatchConfig {
    pub fn new(size: [usize; 3], stride: [usize; 3]) -> Result<Self> {
        if size.contains(&0) || stride.contains(&0) {
            return Err(Error::param("patch sizes and strides must be positive"));
        }
        Ok(PatchConfig { size, stride })
    }

    /// Patch length `m = mx*my*mt`.
    pub fn patch_len(&self) -> usize {
        self.size.iter().product()
    }

    /// Rows of the reshaped atom matrix, `mx*my`.
    pub fn spatial_len(&self) -> usize {
        self.size[0] * self.size[1]
    }

    pub fn temporal_len(&self) -> usize {
        self.size[2]
    }

    pub fn geometry(&self, dims: Dims) -> Result<PatchGeometry> {
        let n = [dims.nx, dims.ny, dims.nt];
        for axis in 0..3 {
            if self.size[axis] > n[axis] {
                return Err(Error::shape(format!(
                    "patch {:?} is larger than volume {dims}",
                    self.size
                )));
            }
            if self.size[axis] == 0 || self.stride[axis] == 0 {
                return Err(Error::param("patch sizes and strides must be positive"));
            }
            if self.stride[axis] > self.size[axis] && self.size[axis] < n[axis] {
                return Err(Error::param(format!(
                    "stride {:?} exceeds patch size {:?}, leaving voxels uncovered",
                    self.stride, self.size
                )));
            }
        }
        let origins = [0, 1, 2].map(|a| axis_origins(n[a], self.size[a], self.stride[a]));
        Ok(PatchGeometry {
            cfg: *self,
            dims,
            origins,
        })
    }
}

/// A patch configuration resolved against a concrete volume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGeometry {
    cfg: PatchConfig,
    dims: Dims,
    origins: [Vec<usize>; 3],
}

impl PatchGeometry {
    pub fn config(&self) -> PatchConfig {
        self.cfg
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Number of patches `M`.
    pub fn count(&self) -> usize {
        self.origins.iter().map(Vec::len).product()
    }

    pub fn patch_len(&self) -> usize {
        self.cfg.patch_len()
    }

    /// Origin of patch `j`.
    pub fn origin(&self, j: usize) -> [usize; 3] {
        let nx = self.origins[0].len();
        let ny = self.origins[1].len();
        [
            self.origins[0][j % nx],
            self.origins[1][(j / nx) % ny],
            self.origins[2][j / (nx * ny)],
        ]
    }

    /// Calls `f(k, flat_index)` for each entry `k` of patch `j`.
    #[inline]
    fn for_each_voxel(&self, j: usize, mut f: impl FnMut(usize, usize)) {
        let [ox, oy, ot] = self.origin(j);
        let [mx, my, mt] = self.cfg.size;
        let mut k = 0;
        for c in 0..mt {
            for b in 0..my {
                let row = self.dims.index(ox, oy + b, ot + c);
                for a in 0..mx {
                    f(k, row + a);
                    k += 1;
                }
            }
        }
    }
}

/// Training matrix `P` (m x M) whose column `j` is patch `j` of `x`.
pub fn extract_patches(x: &DynamicSequence, geom: &PatchGeometry) -> Result<CMatrix> {
    if x.dims() != geom.dims {
        return Err(Error::shape(format!(
            "sequence {} does not match patch geometry {}",
            x.dims(),
            geom.dims
        )));
    }
    let m = geom.patch_len();
    let count = geom.count();
    let src = x.as_slice();
    let mut out = CMatrix::zeros(m, count);
    for j in 0..count {
        let mut col = out.column_mut(j);
        geom.for_each_voxel(j, |k, idx| col[k] = src[idx]);
    }
    Ok(out)
}

/// `sum_j P_j^T q_j`: every column added back into its source location.
pub fn aggregate_patches(q: &CMatrix, geom: &PatchGeometry) -> Result<DynamicSequence> {
    if q.shape() != (geom.patch_len(), geom.count()) {
        return Err(Error::shape(format!(
            "patch matrix {:?} does not match geometry ({} x {})",
            q.shape(),
            geom.patch_len(),
            geom.count()
        )));
    }
    let mut out = DynamicSequence::zeros(geom.dims);
    let dst = out.as_mut_slice();
    for j in 0..geom.count() {
        let col = q.column(j);
        geom.for_each_voxel(j, |k, idx| dst[idx] += col[k]);
    }
    Ok(out)
}

/// Number of patches covering each voxel: the diagonal of `sum_j P_j^T P_j`.
pub fn count_coverage(geom: &PatchGeometry) -> Vec<u32> {
    let mut counts = vec![0u32; geom.dims.len()];
    for j in 0..geom.count() {
        geom.for_each_voxel(j, |_, idx| counts[idx] += 1);
    }
    counts
}
