//! Sum-of-outer-products dictionary learning: block coordinate descent over
//! sparse-code columns `c_i` and atoms `d_i` of `P ~ D C^H`, with an `l0` or
//! `l1` penalty on `C`, a magnitude bound on the codes and a rank bound on the
//! reshaped atoms.
//!
//! The residual matrices `E_i = P - sum_{k != i} d_k c_k^H` are never formed;
//! the two products each update needs are assembled from `P^H D`, the sparse
//! columns of `C` and `D` itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, Svd, C64};
use crate::patches::PatchConfig;

const UNIT_NORM_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparsityPenalty {
    /// `lambda_Z^2 ||C||_0`, hard thresholding.
    L0,
    /// `lambda_Z ||C||_1`, soft thresholding.
    L1,
}

impl std::str::FromStr for SparsityPenalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l0" => Ok(SparsityPenalty::L0),
            "l1" => Ok(SparsityPenalty::L1),
            other => Err(Error::param(format!("unknown sparsity penalty {other:?} (use l0 or l1)"))),
        }
    }
}

/// `m x K` synthesis dictionary with unit-norm atoms; atom `i` reshaped as a
/// column-major `spatial x temporal` matrix has rank at most `atom_rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: CMatrix,
    atom_rank: usize,
    spatial: usize,
    temporal: usize,
}

impl Dictionary {
    /// Checks shapes and unit norms. The rank bound is checked separately by
    /// [`Dictionary::max_trailing_singular_value`].
    pub fn new(atoms: CMatrix, atom_rank: usize, spatial: usize, temporal: usize) -> Result<Self> {
        if atoms.nrows() != spatial * temporal {
            return Err(Error::shape(format!(
                "atoms of length {} cannot be reshaped to {spatial}x{temporal}",
                atoms.nrows()
            )));
        }
        if atoms.ncols() == 0 {
            return Err(Error::shape("dictionary needs at least one atom"));
        }
        check_atom_rank(atom_rank, spatial, temporal)?;
        for (i, col) in atoms.column_iter().enumerate() {
            let n = col.norm();
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::param(format!("atom {i} has norm {n}, expected 1")));
            }
        }
        Ok(Dictionary {
            atoms,
            atom_rank,
            spatial,
            temporal,
        })
    }

    /// Orthonormal 1D DCT-II of size `m` (when `natoms == m`), extended for
    /// `natoms > m` with normalized columns drawn from `patches` at seeded
    /// random positions. Atoms violating the rank bound are replaced by their
    /// normalized best rank-`atom_rank` approximation.
    pub fn initial(
        cfg: &PatchConfig,
        natoms: usize,
        atom_rank: usize,
        patches: Option<&CMatrix>,
        seed: u64,
    ) -> Result<Self> {
        let m = cfg.patch_len();
        let (spatial, temporal) = (cfg.spatial_len(), cfg.temporal_len());
        check_atom_rank(atom_rank, spatial, temporal)?;
        if natoms == 0 {
            return Err(Error::param("dictionary needs at least one atom"));
        }
        let dct = dct_matrix(m);
        let mut atoms = CMatrix::zeros(m, natoms);
        for k in 0..natoms.min(m) {
            atoms.set_column(k, &dct.column(k));
        }
        if natoms > m {
            let p = patches.ok_or_else(|| {
                Error::param("an overcomplete dictionary needs training patches for initialization")
            })?;
            if p.nrows() != m || p.ncols() == 0 {
                return Err(Error::shape("initialization patches do not match the patch length"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut k = m;
            let mut attempts = 0;
            while k < natoms {
                let j = rng.random_range(0..p.ncols());
                let col = p.column(j);
                let n = col.norm();
                attempts += 1;
                if n > 0.0 {
                    atoms.set_column(k, &(col / C64::new(n, 0.0)));
                    k += 1;
                } else if attempts > 100 * natoms {
                    return Err(Error::param("initialization patches are all zero"));
                }
            }
        }
        if atom_rank < spatial.min(temporal) {
            for k in 0..natoms {
                let col: Vec<C64> = atoms.column(k).iter().copied().collect();
                let projected = low_rank_atom(&col, atom_rank, spatial, temporal)?;
                atoms.column_mut(k).copy_from_slice(&projected);
            }
        }
        Dictionary::new(atoms, atom_rank, spatial, temporal)
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &[C64] {
        let m = self.atoms.nrows();
        &self.atoms.as_slice()[i * m..(i + 1) * m]
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn atom_len(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn atom_rank(&self) -> usize {
        self.atom_rank
    }

    pub fn reshape_dims(&self) -> (usize, usize) {
        (self.spatial, self.temporal)
    }

    /// Largest singular value beyond index `atom_rank` over all reshaped atoms.
    pub fn max_trailing_singular_value(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            let r2 = CMatrix::from_column_slice(self.spatial, self.temporal, self.atom(i));
            let svd = Svd::new(&r2)?;
            if let Some(&s) = svd.s.get(self.atom_rank) {
                worst = worst.max(s);
            }
        }
        Ok(worst)
    }

    /// Unit norms and the rank bound, both to `1e-10`.
    pub fn check_invariants(&self) -> Result<()> {
        for i in 0..self.len() {
            let n = linalg::norm(self.atom(i));
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::param(format!("atom {i} has norm {n}")));
            }
        }
        let trailing = self.max_trailing_singular_value()?;
        if trailing > RANK_TOL {
            return Err(Error::param(format!(
                "a reshaped atom exceeds rank {} (trailing singular value {trailing:e})",
                self.atom_rank
            )));
        }
        Ok(())
    }

    fn set_atom(&mut self, i: usize, atom: &[C64]) {
        self.atoms.column_mut(i).copy_from_slice(atom);
    }
}

fn check_atom_rank(rank: usize, spatial: usize, temporal: usize) -> Result<()> {
    let full = spatial.min(temporal);
    if rank == 0 || rank > full {
        return Err(Error::param(format!(
            "atom rank must lie in [1, {full}] for {spatial}x{temporal} atoms, got {rank}"
        )));
    }
    Ok(())
}

/// Orthonormal DCT-II basis, one basis vector per column.
pub fn dct_matrix(m: usize) -> CMatrix {
    let mf = m as f64;
    CMatrix::from_fn(m, m, |n, k| {
        let alpha = if k == 0 { (1.0 / mf).sqrt() } else { (2.0 / mf).sqrt() };
        let v = alpha * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2.0 * mf)).cos();
        C64::new(v, 0.0)
    })
}

/// `K` sparse-code columns `c_i` (stored as the `M x K` matrix `C = Z^H`)
/// bounded in magnitude by `bound`.
///
/// Both `C` and `Z` are kept dense so that either a code column or a patch
/// column can be read contiguously, along with the nonzero entries of every
/// column of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodeMatrix {
    c: CMatrix,
    z: CMatrix,
    entries: Vec<Vec<(usize, C64)>>,
    bound: f64,
}

impl SparseCodeMatrix {
    pub fn zeros(patches: usize, atoms: usize, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::param(format!("code bound must be positive, got {bound}")));
        }
        Ok(SparseCodeMatrix {
            c: CMatrix::zeros(patches, atoms),
            z: CMatrix::zeros(atoms, patches),
            entries: vec![Vec::new(); atoms],
            bound,
        })
    }

    /// Wraps an `M x K` matrix `C`; fails if any entry exceeds `bound`.
    pub fn from_c(c: CMatrix, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(Error::param(format!("code bound must be positive, got {bound}")));
        }
        if let Some(z) = c.iter().find(|z| z.norm() > bound) {
            return Err(Error::param(format!("code magnitude {} exceeds bound {bound}", z.norm())));
        }
        let entries = c.column_iter().map(|col| nonzero_entries(col.as_slice())).collect();
        Ok(SparseCodeMatrix { z: c.adjoint(), c, entries, bound })
    }

    /// `C`, one column per atom.
    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    /// `Z = C^H`, one column per patch.
    pub fn z(&self) -> &CMatrix {
        &self.z
    }

    pub fn code(&self, i: usize) -> &[C64] {
        let m = self.c.nrows();
        &self.c.as_slice()[i * m..(i + 1) * m]
    }

    /// Nonzero `(patch, value)` pairs of `c_i`.
    pub fn entries(&self, i: usize) -> &[(usize, C64)] {
        &self.entries[i]
    }

    pub fn atoms(&self) -> usize {
        self.c.ncols()
    }

    pub fn patches(&self) -> usize {
        self.c.nrows()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn nnz(&self) -> usize {
        self.entries.iter().map(Vec::len).sum()
    }

    /// `||Z||_0 / (K M)`.
    pub fn sparsity_fraction(&self) -> f64 {
        self.nnz() as f64 / (self.c.nrows() * self.c.ncols()) as f64
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().flatten().map(|(_, z)| z.norm()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().map(|(_, z)| z.norm()).fold(0.0, f64::max)
    }

    fn set_code(&mut self, i: usize, code: &[C64]) {
        self.c.column_mut(i).copy_from_slice(code);
        for (j, z) in code.iter().enumerate() {
            self.z[(i, j)] = z.conj();
        }
        self.entries[i] = nonzero_entries(code);
    }
}

fn nonzero_entries(code: &[C64]) -> Vec<(usize, C64)> {
    code.iter().enumerate().filter(|(_, z)| z.norm_sqr() != 0.0).map(|(j, &z)| (j, z)).collect()
}

/// Hard-thresholded code update for the `l0` penalty: entries with magnitude
/// below `lambda` vanish, the rest keep their phase with magnitude capped at `a`.
/// Returns the code and how many entries were capped.
pub fn sparse_code_l0(v: &[C64], lambda: f64, a: f64) -> Result<(Vec<C64>, usize)> {
    if !(a > lambda) {
        return Err(Error::param(format!("code bound a = {a} must exceed lambda_Z = {lambda}")));
    }
    let mut clipped = 0;
    let out = v
        .iter()
        .map(|&z| {
            let mag = z.norm();
            if mag < lambda || mag == 0.0 {
                C64::new(0.0, 0.0)
            } else if mag > a {
                clipped += 1;
                z * (a / mag)
            } else {
                z
            }
        })
        .collect();
    Ok((out, clipped))
}

/// Soft-thresholded code update for the `l1` penalty: magnitude
/// `max(|v| - lambda/2, 0)`, capped at `a`, with the original phase.
pub fn sparse_code_l1(v: &[C64], lambda: f64, a: f64) -> Result<(Vec<C64>, usize)> {
    if !(a > 0.0) {
        return Err(Error::param(format!("code bound must be positive, got {a}")));
    }
    let mut clipped = 0;
    let out = v
        .iter()
        .map(|&z| {
            let mag = z.norm();
            let shrunk = mag - 0.5 * lambda;
            if shrunk <= 0.0 || mag == 0.0 {
                C64::new(0.0, 0.0)
            } else if shrunk > a {
                clipped += 1;
                z * (a / mag)
            } else {
                z * (shrunk / mag)
            }
        })
        .collect();
    Ok((out, clipped))
}

/// The atom `e_1` used whenever a code column is entirely zero.
pub fn reset_atom(m: usize) -> Vec<C64> {
    let mut w = vec![C64::new(0.0, 0.0); m];
    w[0] = C64::new(1.0, 0.0);
    w
}

fn low_rank_atom(v: &[C64], rank: usize, spatial: usize, temporal: usize) -> Result<Vec<C64>> {
    let y = CMatrix::from_column_slice(spatial, temporal, v);
    let svd = Svd::new(&y)?;
    let kept = &svd.s[..rank.min(svd.s.len())];
    let fro = kept.iter().map(|s| s * s).sum::<f64>().sqrt();
    if fro == 0.0 {
        return Ok(reset_atom(v.len()));
    }
    let weights: Vec<f64> = kept.iter().map(|s| s / fro).collect();
    Ok(svd.recompose(&weights).as_slice().to_vec())
}

/// Minimizer of `||E_i - d c_i^H||_F^2` over unit-norm `d` whose reshape has
/// rank at most `rank`, given `E_i c_i`.
///
/// A zero code gives `e_1`. For `rank = min(spatial, temporal)` the answer is
/// `E_i c_i / ||E_i c_i||`; otherwise the normalized rank-`rank` truncated SVD
/// of the reshaped `E_i c_i`.
pub fn atom_update(
    ei_ci: &[C64],
    rank: usize,
    spatial: usize,
    temporal: usize,
    ci_is_zero: bool,
) -> Result<Vec<C64>> {
    if ei_ci.len() != spatial * temporal {
        return Err(Error::shape(format!(
            "E_i c_i has length {} but atoms reshape to {spatial}x{temporal}",
            ei_ci.len()
        )));
    }
    check_atom_rank(rank, spatial, temporal)?;
    let n = linalg::norm(ei_ci);
    if ci_is_zero || n == 0.0 {
        return Ok(reset_atom(ei_ci.len()));
    }
    if rank == spatial.min(temporal) {
        return Ok(ei_ci.iter().map(|z| z / n).collect());
    }
    low_rank_atom(ei_ci, rank, spatial, temporal)
}

/// Settings of one dictionary learning step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoupConfig {
    pub lambda_z: f64,
    pub bound: f64,
    pub penalty: SparsityPenalty,
    pub sweeps: usize,
}

/// Which half of a coordinate pair just finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoupStep {
    Code,
    Atom,
}

/// Snapshot handed to the observer after every single update.
pub struct SoupEvent<'a> {
    pub sweep: usize,
    pub index: usize,
    pub step: SoupStep,
    pub dictionary: &'a Dictionary,
    pub codes: &'a SparseCodeMatrix,
    /// `E_i c_i` (only for [`SoupStep::Atom`]).
    pub ei_ci: Option<&'a [C64]>,
    /// Exact change of the learning objective caused by this update.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct SoupOutcome {
    pub dictionary: Dictionary,
    pub codes: SparseCodeMatrix,
    pub clipped: usize,
}

/// `J` sweeps of sequential `(c_i, d_i)` updates for `i = 0..K`.
pub fn soup_bcd(
    p: &CMatrix,
    dictionary: Dictionary,
    codes: SparseCodeMatrix,
    cfg: &SoupConfig,
    mut observer: Option<&mut dyn FnMut(&SoupEvent)>,
) -> Result<SoupOutcome> {
    let (m, npatch) = p.shape();
    let natoms = dictionary.len();
    if dictionary.atom_len() != m {
        return Err(Error::shape(format!(
            "dictionary atoms have length {} but patches have length {m}",
            dictionary.atom_len()
        )));
    }
    if codes.patches() != npatch || codes.atoms() != natoms {
        return Err(Error::shape(format!(
            "codes are {}x{} but expected {npatch}x{natoms}",
            codes.patches(),
            codes.atoms()
        )));
    }
    if !(cfg.lambda_z >= 0.0) {
        return Err(Error::param("lambda_Z must be nonnegative"));
    }
    if cfg.bound != codes.bound() {
        return Err(Error::param("code matrix bound differs from the configured bound"));
    }
    let (spatial, temporal) = dictionary.reshape_dims();
    let rank = dictionary.atom_rank();
    let mut dict = dictionary;
    let mut codes = codes;
    let mut clipped = 0;
    let mut v = vec![C64::new(0.0, 0.0); npatch];
    let mut u = vec![C64::new(0.0, 0.0); m];
    let mut w = vec![C64::new(0.0, 0.0); natoms];
    let mut y = vec![C64::new(0.0, 0.0); natoms];

    for sweep in 0..cfg.sweeps {
        // Column i is P^H d_i; d_i is untouched until its own turn in this sweep.
        let pd = linalg::adjoint_mul(p, dict.atoms());
        for i in 0..natoms {
            // v = E_i^H d_i = P^H d_i - sum_{k != i} c_k (d_k^H d_i)
            let di = dict.atom(i);
            for (k, wk) in w.iter_mut().enumerate() {
                *wk = linalg::dotc(dict.atom(k), di);
            }
            v.copy_from_slice(&pd.as_slice()[i * npatch..(i + 1) * npatch]);
            for k in (0..natoms).filter(|&k| k != i) {
                let wk = w[k];
                for &(j, c) in codes.entries(k) {
                    v[j] -= c * wk;
                }
            }
            let (code, n_clip) = match cfg.penalty {
                SparsityPenalty::L0 => sparse_code_l0(&v, cfg.lambda_z, cfg.bound)?,
                SparsityPenalty::L1 => sparse_code_l1(&v, cfg.lambda_z, cfg.bound)?,
            };
            clipped += n_clip;
            // Only the c_i-dependent part ||c||^2 - 2 Re<c, v> + penalty(c) changes.
            let local = |entries: &[(usize, C64)]| {
                let mut total = 0.0;
                for &(j, c) in entries {
                    total += c.norm_sqr() - 2.0 * (c.conj() * v[j]).re;
                    total += match cfg.penalty {
                        SparsityPenalty::L0 => cfg.lambda_z * cfg.lambda_z,
                        SparsityPenalty::L1 => cfg.lambda_z * c.norm(),
                    };
                }
                total
            };
            let before = local(codes.entries(i));
            codes.set_code(i, &code);
            let after = local(codes.entries(i));
            if let Some(obs) = observer.as_deref_mut() {
                let delta = after - before;
                obs(&SoupEvent { sweep, index: i, step: SoupStep::Code, dictionary: &dict, codes: &codes, ei_ci: None, delta });
            }

            // u = E_i c_i = P c_i - sum_{k != i} d_k (c_k^H c_i), where
            // C^H c_i = sum_j c_i[j] z_j over the support of c_i.
            u.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            y.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            let is_zero = codes.entries(i).is_empty();
            for &(j, cij) in codes.entries(i) {
                for (uu, &pv) in u.iter_mut().zip(&p.as_slice()[j * m..(j + 1) * m]) {
                    *uu += pv * cij;
                }
                for (yk, &zk) in y.iter_mut().zip(&codes.z().as_slice()[j * natoms..(j + 1) * natoms]) {
                    *yk += zk * cij;
                }
            }
            if !is_zero {
                y[i] = C64::new(0.0, 0.0);
                for (k, &yk) in y.iter().enumerate() {
                    if yk.norm_sqr() != 0.0 {
                        for (uu, &dv) in u.iter_mut().zip(dict.atom(k)) {
                            *uu -= dv * yk;
                        }
                    }
                }
            }
            let atom = atom_update(&u, rank, spatial, temporal, is_zero)?;
            // With unit-norm atoms only -2 Re<d, E_i c_i> depends on d_i.
            let delta = 2.0 * (linalg::dotc(dict.atom(i), &u).re - linalg::dotc(&atom, &u).re);
            dict.set_atom(i, &atom);
            if let Some(obs) = observer.as_deref_mut() {
                obs(&SoupEvent { sweep, index: i, step: SoupStep::Atom, dictionary: &dict, codes: &codes, ei_ci: Some(&u), delta });
            }
        }
    }
    Ok(SoupOutcome {
        dictionary: dict,
        codes,
        clipped,
    })
}

/// `D C^H` (m x M), column `j` being the sparse approximation `D z_j` of patch `j`.
pub fn sparse_approximation(dictionary: &Dictionary, codes: &SparseCodeMatrix) -> Result<CMatrix> {
    if codes.atoms() != dictionary.len() {
        return Err(Error::shape("codes and dictionary disagree on the number of atoms"));
    }
    let (m, natoms) = (dictionary.atom_len(), dictionary.len());
    let mut out = CMatrix::zeros(m, codes.patches());
    let z = codes.z().as_slice();
    for (j, col) in out.as_mut_slice().chunks_exact_mut(m).enumerate() {
        for (k, &zkj) in z[j * natoms..(j + 1) * natoms].iter().enumerate() {
            if zkj.norm_sqr() != 0.0 {
                for (o, &d) in col.iter_mut().zip(dictionary.atom(k)) {
                    *o += d * zkj;
                }
            }
        }
    }
    Ok(out)
}

/// `||P - D C^H||_F^2`.
pub fn representation_error(p: &CMatrix, dictionary: &Dictionary, codes: &SparseCodeMatrix) -> Result<f64> {
    let approx = sparse_approximation(dictionary, codes)?;
    if approx.shape() != p.shape() {
        return Err(Error::shape("patch matrix does not match the sparse approximation"));
    }
    Ok(linalg::diff_norm_sqr(p.as_slice(), approx.as_slice()))
}

/// Penalty value: `lambda_Z^2 ||C||_0` or `lambda_Z ||C||_1`.
pub fn code_penalty(codes: &SparseCodeMatrix, lambda_z: f64, penalty: SparsityPenalty) -> f64 {
    match penalty {
        SparsityPenalty::L0 => lambda_z * lambda_z * codes.nnz() as f64,
        SparsityPenalty::L1 => lambda_z * codes.l1_norm(),
    }
}

/// Dictionary learning objective `||P - D C^H||_F^2 + penalty(C)`.
pub fn soup_objective(
    p: &CMatrix,
    dictionary: &Dictionary,
    codes: &SparseCodeMatrix,
    lambda_z: f64,
    penalty: SparsityPenalty,
) -> Result<f64> {
    Ok(representation_error(p, dictionary, codes)? + code_penalty(codes, lambda_z, penalty))
}

/// Normalized sparse representation error `||P - D C^H||_F / ||P||_F`.
pub fn nsre(p: &CMatrix, dictionary: &Dictionary, codes: &SparseCodeMatrix) -> Result<f64> {
    let den = linalg::norm_sqr(p.as_slice());
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((representation_error(p, dictionary, codes)? / den).sqrt())
}

/// One row of an NSRE study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsreRow {
    pub atom_rank: usize,
    pub lambda_z: f64,
    /// Fraction of nonzero codes, in percent.
    pub sparsity_pct: f64,
    pub nsre: f64,
}

/// Settings of an NSRE study over atom ranks and sparsity weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsreStudy {
    pub natoms: usize,
    pub ranks: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub sweeps: usize,
    pub penalty: SparsityPenalty,
    pub seed: u64,
}

/// Learns a dictionary for every `(rank, lambda_Z)` pair with `sweeps` SOUP
/// sweeps from the initial dictionary and zero codes, and reports how well
/// the patches are represented at the sparsity reached.
pub fn nsre_study(p: &CMatrix, cfg: &PatchConfig, study: &NsreStudy) -> Result<Vec<NsreRow>> {
    let NsreStudy { natoms, ref ranks, ref lambdas, sweeps, penalty, seed } = *study;
    let peak = p.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut rows = Vec::with_capacity(ranks.len() * lambdas.len());
    for &rank in ranks {
        let initial = Dictionary::initial(cfg, natoms, rank, Some(p), seed)?;
        for &lambda_z in lambdas {
            let bound = 1e6 * peak.max(lambda_z).max(f64::MIN_POSITIVE);
            let soup = SoupConfig { lambda_z, bound, penalty, sweeps };
            let codes = SparseCodeMatrix::zeros(p.ncols(), natoms, bound)?;
            let out = soup_bcd(p, initial.clone(), codes, &soup, None)?;
            rows.push(NsreRow {
                atom_rank: rank,
                lambda_z,
                sparsity_pct: 100.0 * out.codes.sparsity_fraction(),
                nsre: nsre(p, &out.dictionary, &out.codes)?,
            });
        }
    }
    Ok(rows)
}
