//! Reconstruction of dynamic image sequences from undersampled k-t space data
//! with a low-rank component plus a component that is sparse in an adaptively
//! learned spatiotemporal dictionary (LASSI), its dictionary-only special case
//! (DINO-KAT), and a low-rank plus temporal-Fourier-sparse baseline.
//!
//! Besides the solvers the crate ships the surrounding harness: the masked
//! Fourier encoding operator and sampling masks, patch operators, singular
//! value shrinkage estimators, synthetic phantoms, metrics and a small binary
//! container format.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dictlearn;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod patches;
pub mod phantom;
pub mod recon;
pub mod sensing;
pub mod shrinkage;

pub use dictlearn::{Dictionary, NsreRow, NsreStudy, SparseCodeMatrix, SparsityPenalty};
pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use model::{
    nrmse, reshape_r1, Decomposition, Dims, DynamicSequence, IterationRecord, KtSpaceData, MetricsTrace, Roi,
    SamplingMask,
};
pub use patches::{PatchConfig, PatchGeometry};
pub use phantom::PhantomSpec;
pub use recon::{LowRankPenalty, ReconConfig};
pub use sensing::{CoilMaps, SensingOperator};
pub use shrinkage::{SchattenP, ShrinkageSpec};
