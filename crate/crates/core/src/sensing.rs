//! The encoding operator `A`: optional coil weighting, unitary per-frame 2D
//! FFT into centered k-space, and k-t sampling. Also mask generators and the
//! zero-filled baseline reconstruction.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::model::{Dims, DynamicSequence, KtSpaceData, SamplingMask};

/// Complex coil sensitivities, x fastest, then y, coil slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilMaps {
    coils: usize,
    nx: usize,
    ny: usize,
    data: Vec<C64>,
}

impl CoilMaps {
    pub fn new(coils: usize, nx: usize, ny: usize, data: Vec<C64>) -> Result<Self> {
        if coils == 0 || nx == 0 || ny == 0 {
            return Err(Error::shape("coil maps need positive dimensions"));
        }
        if data.len() != coils * nx * ny {
            return Err(Error::shape(format!(
                "coil maps [{coils},{nx},{ny}] need {} values, got {}",
                coils * nx * ny,
                data.len()
            )));
        }
        Ok(CoilMaps { coils, nx, ny, data })
    }

    pub fn coils(&self) -> usize {
        self.coils
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn coil(&self, c: usize) -> &[C64] {
        let n = self.nx * self.ny;
        &self.data[c * n..(c + 1) * n]
    }

    /// `max over pixels of sum_c |S_c|^2`.
    fn max_power(&self) -> f64 {
        let n = self.nx * self.ny;
        (0..n)
            .map(|p| (0..self.coils).map(|c| self.data[c * n + p].norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone)]
struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.nx, self.ny)
    }
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            nx,
            ny,
            fwd_x: planner.plan_fft_forward(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_x: planner.plan_fft_inverse(nx),
            inv_y: planner.plan_fft_inverse(ny),
        }
    }

    /// In-place unitary 2D transform of an x-fastest frame.
    fn apply(&self, frame: &mut [C64], inverse: bool) {
        let (fx, fy) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        for row in frame.chunks_exact_mut(self.nx) {
            fx.process(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                col[y] = frame[x + self.nx * y];
            }
            fy.process(&mut col);
            for y in 0..self.ny {
                frame[x + self.nx * y] = col[y];
            }
        }
        let s = 1.0 / ((self.nx * self.ny) as f64).sqrt();
        frame.iter_mut().for_each(|z| *z *= s);
    }
}

/// `A x = scale * mask .* shift(FFT2(S_c .* x_t))` for every coil `c` and frame `t`.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    mask: SamplingMask,
    coil_maps: Option<CoilMaps>,
    scale: f64,
    fft: Fft2,
}

impl SensingOperator {
    /// Builds the operator, choosing `scale` so that its fully-sampled version has norm 1.
    pub fn new(mask: SamplingMask, coil_maps: Option<CoilMaps>) -> Result<Self> {
        let dims = mask.dims();
        let scale = match &coil_maps {
            Some(maps) => {
                if maps.nx != dims.nx || maps.ny != dims.ny {
                    return Err(Error::shape(format!(
                        "coil maps {}x{} do not match frames {}x{}",
                        maps.nx, maps.ny, dims.nx, dims.ny
                    )));
                }
                let p = maps.max_power();
                if p == 0.0 {
                    return Err(Error::param("coil maps are identically zero"));
                }
                1.0 / p.sqrt()
            }
            None => 1.0,
        };
        Ok(SensingOperator {
            fft: Fft2::new(dims.nx, dims.ny),
            mask,
            coil_maps,
            scale,
        })
    }

    pub fn single_coil(mask: SamplingMask) -> Self {
        SensingOperator::new(mask, None).expect("single-coil operator is always valid")
    }

    pub fn dims(&self) -> Dims {
        self.mask.dims()
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn coil_maps(&self) -> Option<&CoilMaps> {
        self.coil_maps.as_ref()
    }

    pub fn coils(&self) -> usize {
        self.coil_maps.as_ref().map_or(1, |m| m.coils)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The same coils and normalization with every k-t location sampled.
    pub fn fully_sampled(&self) -> Self {
        SensingOperator {
            mask: SamplingMask::full(self.dims()).expect("dims already validated"),
            coil_maps: self.coil_maps.clone(),
            scale: self.scale,
            fft: self.fft.clone(),
        }
    }

    fn centered(&self, kx: usize, ky: usize) -> usize {
        let d = self.dims();
        (kx + d.nx / 2) % d.nx + d.nx * ((ky + d.ny / 2) % d.ny)
    }

    pub fn forward(&self, x: &DynamicSequence) -> Result<KtSpaceData> {
        let dims = self.dims();
        if x.dims() != dims {
            return Err(Error::shape(format!(
                "image {} does not match operator {dims}",
                x.dims()
            )));
        }
        let n = dims.len();
        let nf = dims.frame_len();
        let coils = self.coils();
        let mut out = vec![C64::new(0.0, 0.0); coils * n];
        let mut buf = vec![C64::new(0.0, 0.0); nf];
        let mask = self.mask.as_slice();
        for c in 0..coils {
            for t in 0..dims.nt {
                let frame = x.frame(t);
                match &self.coil_maps {
                    Some(maps) => {
                        for ((b, &v), &s) in buf.iter_mut().zip(frame).zip(maps.coil(c)) {
                            *b = v * s;
                        }
                    }
                    None => buf.copy_from_slice(frame),
                }
                self.fft.apply(&mut buf, false);
                let base = c * n + t * nf;
                for ky in 0..dims.ny {
                    for kx in 0..dims.nx {
                        let dst = self.centered(kx, ky);
                        if mask[t * nf + dst] {
                            out[base + dst] = buf[kx + dims.nx * ky] * self.scale;
                        }
                    }
                }
            }
        }
        Ok(KtSpaceData::from_parts_unchecked(coils, self.mask.clone(), out))
    }

    pub fn adjoint(&self, d: &KtSpaceData) -> Result<DynamicSequence> {
        let dims = self.dims();
        if d.dims() != dims || d.coils() != self.coils() {
            return Err(Error::shape(format!(
                "k-t data ({} coil(s), {}) does not match operator ({} coil(s), {dims})",
                d.coils(),
                d.dims(),
                self.coils()
            )));
        }
        let nf = dims.frame_len();
        let mut out = DynamicSequence::zeros(dims);
        let mut buf = vec![C64::new(0.0, 0.0); nf];
        let mask = self.mask.as_slice();
        for c in 0..self.coils() {
            let coil = d.coil(c);
            for t in 0..dims.nt {
                for ky in 0..dims.ny {
                    for kx in 0..dims.nx {
                        let src = self.centered(kx, ky);
                        buf[kx + dims.nx * ky] = if mask[t * nf + src] {
                            coil[t * nf + src] * self.scale
                        } else {
                            C64::new(0.0, 0.0)
                        };
                    }
                }
                self.fft.apply(&mut buf, true);
                let frame = out.frame_mut(t);
                match &self.coil_maps {
                    Some(maps) => {
                        for ((o, &b), &s) in frame.iter_mut().zip(&buf).zip(maps.coil(c)) {
                            *o += b * s.conj();
                        }
                    }
                    None => {
                        for (o, &b) in frame.iter_mut().zip(&buf) {
                            *o += b;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// `A^H A x`.
    pub fn normal(&self, x: &DynamicSequence) -> Result<DynamicSequence> {
        self.adjoint(&self.forward(x)?)
    }
}

/// Settings for the power iteration in [`estimate_norm`].
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub max_iter: usize,
    /// Relative change of the Rayleigh quotient that counts as converged.
    pub tol: f64,
    pub seed: u64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration {
            max_iter: 5000,
            tol: 1e-10,
            seed: 0,
        }
    }
}

/// `||A||_2` by power iteration on `A^H A` from a seeded random start.
pub fn estimate_norm(op: &SensingOperator, settings: PowerIteration) -> Result<f64> {
    let dims = op.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let start = (0..dims.len())
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let mut x = DynamicSequence::from_vec(dims, start)?;
    let n0 = x.norm();
    x = x.scale(1.0 / n0);
    let mut lambda = 0.0;
    let mut change = f64::INFINITY;
    for it in 1..=settings.max_iter {
        let y = op.normal(&x)?;
        let rayleigh = linalg::dotc(x.as_slice(), y.as_slice()).re;
        let ny = y.norm();
        if ny == 0.0 {
            return Ok(0.0);
        }
        change = (rayleigh - lambda).abs() / rayleigh.abs().max(f64::MIN_POSITIVE);
        lambda = rayleigh;
        x = y.scale(1.0 / ny);
        if it > 1 && change <= settings.tol {
            return Ok(lambda.max(0.0).sqrt());
        }
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        last_change: change,
    })
}

/// Variable-density Cartesian sampling: `ceil(Ny/accel)` full phase-encode
/// lines per frame, always including the center line, the rest drawn without
/// replacement with weight `(1 + |j - Ny/2| / Ny)^-2`. Frames are independent.
pub fn make_cartesian_mask(nx: usize, ny: usize, nt: usize, accel: f64, seed: u64) -> Result<SamplingMask> {
    let dims = Dims::new(nx, ny, nt);
    if dims.is_empty() {
        return Err(Error::shape("mask dimensions must be positive"));
    }
    if !(accel >= 1.0) {
        return Err(Error::param(format!("acceleration must be >= 1, got {accel}")));
    }
    if accel > ny as f64 {
        return Err(Error::param(format!(
            "acceleration {accel} exceeds the number of phase-encode lines {ny}"
        )));
    }
    let lines = ((ny as f64 / accel) - 1e-9).ceil().max(1.0) as usize;
    let center = ny / 2;
    let others: Vec<usize> = (0..ny).filter(|&j| j != center).collect();
    let weight = |j: usize| {
        let dist = (j as f64 - center as f64).abs() / ny as f64;
        (1.0 + dist).powi(-2)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![false; dims.len()];
    for t in 0..nt {
        let mut chosen = vec![center];
        if lines > 1 {
            let picks = rand::seq::index::sample_weighted(
                &mut rng,
                others.len(),
                |i| weight(others[i]),
                lines - 1,
            )
            .map_err(|e| Error::Numerical(format!("weighted line sampling failed: {e}")))?;
            chosen.extend(picks.iter().map(|i| others[i]));
        }
        for ky in chosen {
            for kx in 0..nx {
                mask[dims.index(kx, ky, t)] = true;
            }
        }
    }
    SamplingMask::new(dims, mask)
}

/// Options for [`make_pseudoradial_mask`].
#[derive(Debug, Clone, Copy)]
pub struct RadialOptions {
    /// Per-frame rotation is uniform in `[0, jitter * pi / spokes)`.
    pub jitter: f64,
    /// Sampling step along each spoke, in pixels.
    pub step: f64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions { jitter: 1.0, step: 0.5 }
    }
}

/// Pseudo-radial sampling: `spokes` lines through the k-space center at
/// angles `pi k / spokes + offset_t`, rasterized by marking the nearest grid
/// sample along each line.
pub fn make_pseudoradial_mask(
    nx: usize,
    ny: usize,
    nt: usize,
    spokes: usize,
    seed: u64,
    options: RadialOptions,
) -> Result<SamplingMask> {
    let dims = Dims::new(nx, ny, nt);
    if dims.is_empty() {
        return Err(Error::shape("mask dimensions must be positive"));
    }
    if spokes == 0 {
        return Err(Error::param("at least one spoke is required"));
    }
    if !(options.step > 0.0) || !(0.0..=1.0).contains(&options.jitter) {
        return Err(Error::param("radial step must be positive and jitter in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = ((nx / 2) as f64, (ny / 2) as f64);
    let reach = nx.max(ny) as f64;
    let samples = (2.0 * reach / options.step).ceil() as usize;
    let mut mask = vec![false; dims.len()];
    for t in 0..nt {
        let offset = options.jitter * rng.random::<f64>() * PI / spokes as f64;
        for k in 0..spokes {
            let theta = PI * k as f64 / spokes as f64 + offset;
            let (s, c) = theta.sin_cos();
            for i in 0..=samples {
                let r = -reach + i as f64 * options.step;
                let x = (cx + r * c).round();
                let y = (cy + r * s).round();
                if x >= 0.0 && y >= 0.0 && (x as usize) < nx && (y as usize) < ny {
                    mask[dims.index(x as usize, y as usize, t)] = true;
                }
            }
        }
    }
    SamplingMask::new(dims, mask)
}

/// Zeroth-order temporal interpolation of unsampled k-t locations (nearest
/// sampled frame, earlier frame on ties; never-sampled locations stay zero),
/// followed by the fully-sampled adjoint.
pub fn zerofill_baseline(d: &KtSpaceData, op: &SensingOperator) -> Result<DynamicSequence> {
    let dims = d.dims();
    if dims != op.dims() || d.coils() != op.coils() {
        return Err(Error::shape("k-t data does not match the operator"));
    }
    let nf = dims.frame_len();
    let mask = d.mask().as_slice();
    let mut filled = d.as_slice().to_vec();
    let mut sampled_frames = Vec::with_capacity(dims.nt);
    for loc in 0..nf {
        sampled_frames.clear();
        sampled_frames.extend((0..dims.nt).filter(|&t| mask[t * nf + loc]));
        if sampled_frames.is_empty() || sampled_frames.len() == dims.nt {
            continue;
        }
        for t in 0..dims.nt {
            if mask[t * nf + loc] {
                continue;
            }
            // First sampled frame at or after t; the previous one is the other candidate.
            let pos = sampled_frames.partition_point(|&s| s < t);
            let source = match (pos.checked_sub(1).map(|p| sampled_frames[p]), sampled_frames.get(pos)) {
                (Some(before), Some(&after)) => {
                    if t - before <= after - t {
                        before
                    } else {
                        after
                    }
                }
                (Some(before), None) => before,
                (None, Some(&after)) => after,
                (None, None) => unreachable!(),
            };
            for c in 0..d.coils() {
                let base = c * dims.len();
                filled[base + t * nf + loc] = filled[base + source * nf + loc];
            }
        }
    }
    let full = op.fully_sampled();
    let filled = KtSpaceData::new(d.coils(), full.mask().clone(), filled)?;
    full.adjoint(&filled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::make_coil_maps;

    fn random_seq(dims: Dims, seed: u64) -> DynamicSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DynamicSequence::from_vec(
            dims,
            (0..dims.len())
                .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect(),
        )
        .unwrap()
    }

    fn random_kt(op: &SensingOperator, seed: u64) -> KtSpaceData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = op.dims().len();
        let mask = op.mask().as_slice();
        let samples = (0..op.coils() * n)
            .map(|i| {
                let z = C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                if mask[i % n] { z } else { C64::new(0.0, 0.0) }
            })
            .collect();
        KtSpaceData::new(op.coils(), op.mask().clone(), samples).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let dims = Dims::new(6, 4, 2);
        let op = SensingOperator::single_coil(make_cartesian_mask(6, 4, 2, 2.0, 1).unwrap());
        let d = op.forward(&DynamicSequence::zeros(dims)).unwrap();
        assert!(d.as_slice().iter().all(|z| z.norm() == 0.0));
        let x = op.adjoint(&d).unwrap();
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn full_sampling_is_unitary() {
        let dims = Dims::new(8, 6, 3);
        let op = SensingOperator::single_coil(SamplingMask::full(dims).unwrap());
        let x = random_seq(dims, 4);
        let d = op.forward(&x).unwrap();
        assert!((d.norm() - x.norm()).abs() < 1e-12 * x.norm());
        let back = op.adjoint(&d).unwrap();
        assert!(crate::linalg::diff_norm_sqr(back.as_slice(), x.as_slice()).sqrt() < 1e-12);
    }

    #[test]
    fn dc_lands_at_the_center() {
        let dims = Dims::new(4, 4, 1);
        let op = SensingOperator::single_coil(SamplingMask::full(dims).unwrap());
        let x = DynamicSequence::from_vec(dims, vec![C64::new(1.0, 0.0); 16]).unwrap();
        let d = op.forward(&x).unwrap();
        let dc = d.as_slice()[dims.index(2, 2, 0)];
        assert!((dc - C64::new(4.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn adjoint_identity_single_and_multi_coil() {
        let dims = Dims::new(8, 8, 3);
        let mask = make_cartesian_mask(8, 8, 3, 2.5, 7).unwrap();
        let ops = [
            SensingOperator::single_coil(mask.clone()),
            SensingOperator::new(mask, Some(make_coil_maps(8, 8, 4, 3).unwrap())).unwrap(),
        ];
        for op in &ops {
            for s in 0..20 {
                let x = random_seq(dims, s);
                let y = random_kt(op, 100 + s);
                let lhs = crate::linalg::dotc(op.forward(&x).unwrap().as_slice(), y.as_slice());
                let rhs = crate::linalg::dotc(x.as_slice(), op.adjoint(&y).unwrap().as_slice());
                assert!((lhs - rhs).norm() <= 1e-10 * x.norm() * y.norm());
            }
        }
    }

    #[test]
    fn normal_operator_is_psd() {
        let dims = Dims::new(8, 8, 3);
        let op = SensingOperator::single_coil(make_pseudoradial_mask(8, 8, 3, 3, 2, RadialOptions::default()).unwrap());
        for s in 0..100 {
            let x = random_seq(dims, s);
            let q = crate::linalg::dotc(x.as_slice(), op.normal(&x).unwrap().as_slice());
            assert!(q.re >= -1e-12 && q.im.abs() < 1e-10);
        }
    }

    #[test]
    fn norm_of_full_operator_is_one() {
        let dims = Dims::new(8, 8, 3);
        let full = SamplingMask::full(dims).unwrap();
        let n1 = estimate_norm(&SensingOperator::single_coil(full.clone()), PowerIteration::default()).unwrap();
        assert!((n1 - 1.0).abs() < 1e-4);
        let op4 = SensingOperator::new(full, Some(make_coil_maps(8, 8, 4, 1).unwrap())).unwrap();
        let n4 = estimate_norm(&op4, PowerIteration::default()).unwrap();
        assert!((n4 - 1.0).abs() < 1e-4, "{n4}");
    }

    #[test]
    fn cartesian_accel_one_is_full() {
        assert!(make_cartesian_mask(5, 7, 3, 1.0, 0).unwrap().is_full());
    }

    #[test]
    fn cartesian_accel_ny_is_center_line() {
        let m = make_cartesian_mask(6, 8, 4, 8.0, 5).unwrap();
        for t in 0..4 {
            for y in 0..8 {
                for x in 0..6 {
                    assert_eq!(m.is_sampled(x, y, t), y == 4);
                }
            }
        }
    }

    #[test]
    fn cartesian_rejects_bad_accel() {
        assert!(make_cartesian_mask(8, 8, 1, 9.0, 0).is_err());
        assert!(make_cartesian_mask(8, 8, 1, 0.5, 0).is_err());
    }

    #[test]
    fn cartesian_line_count_and_determinism() {
        let a = make_cartesian_mask(64, 64, 5, 8.0, 11).unwrap();
        let b = make_cartesian_mask(64, 64, 5, 8.0, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.count(), 64 * 8 * 5);
        assert_eq!(a.acceleration(), 8.0);
        assert_ne!(a, make_cartesian_mask(64, 64, 5, 8.0, 12).unwrap());
    }

    #[test]
    fn single_spoke_without_rotation_is_a_diameter() {
        let opts = RadialOptions { jitter: 0.0, ..Default::default() };
        let m = make_pseudoradial_mask(9, 7, 2, 1, 3, opts).unwrap();
        for t in 0..2 {
            for y in 0..7 {
                for x in 0..9 {
                    assert_eq!(m.is_sampled(x, y, t), y == 3);
                }
            }
        }
    }

    #[test]
    fn many_spokes_saturate() {
        let m = make_pseudoradial_mask(16, 16, 2, 400, 1, RadialOptions::default()).unwrap();
        assert!(m.is_full());
    }

    #[test]
    fn zerofill_of_full_data_is_the_adjoint() {
        let dims = Dims::new(6, 6, 3);
        let op = SensingOperator::single_coil(SamplingMask::full(dims).unwrap());
        let d = op.forward(&random_seq(dims, 2)).unwrap();
        assert_eq!(zerofill_baseline(&d, &op).unwrap(), op.adjoint(&d).unwrap());
    }

    /// Location 0 of a 2x1 grid is sampled only at `frames` (value = frame
    /// index); location 1 is always sampled with value 0. Returns the filled
    /// location-0 values recovered by undoing the fully-sampled adjoint.
    fn filled_values(nt: usize, frames: &[usize]) -> Vec<f64> {
        let dims = Dims::new(2, 1, nt);
        let mask = SamplingMask::new(dims, (0..2 * nt).map(|i| i % 2 == 1 || frames.contains(&(i / 2))).collect()).unwrap();
        let samples = (0..2 * nt)
            .map(|i| if i % 2 == 0 && frames.contains(&(i / 2)) { C64::new((i / 2) as f64, 0.0) } else { C64::new(0.0, 0.0) })
            .collect();
        let op = SensingOperator::single_coil(mask.clone());
        let d = KtSpaceData::new(1, mask, samples).unwrap();
        let x = zerofill_baseline(&d, &op).unwrap();
        let k = op.fully_sampled().forward(&x).unwrap();
        (0..nt).map(|t| (k.as_slice()[2 * t].re * 1e9).round() / 1e9).collect()
    }

    #[test]
    fn zerofill_nearest_frame_rule() {
        assert_eq!(filled_values(7, &[2, 5]), vec![2.0, 2.0, 2.0, 2.0, 5.0, 5.0, 5.0]);
        // Frame 3 is equidistant from 2 and 4; the earlier frame wins.
        assert_eq!(filled_values(5, &[2, 4]), vec![2.0, 2.0, 2.0, 2.0, 4.0]);
    }

    #[test]
    fn zerofill_single_sample_propagates_everywhere() {
        let dims = Dims::new(2, 1, 4);
        // Location 0 sampled only at frame 0; location 1 sampled always.
        let mask = SamplingMask::new(dims, (0..8).map(|i| i == 0 || i % 2 == 1).collect()).unwrap();
        let op = SensingOperator::single_coil(mask.clone());
        let samples = (0..8).map(|i| if i == 0 { C64::new(3.0, 1.0) } else if i % 2 == 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }).collect();
        let d = KtSpaceData::new(1, mask, samples).unwrap();
        let x = zerofill_baseline(&d, &op).unwrap();
        let full = op.fully_sampled();
        let mut filled = d.as_slice().to_vec();
        for t in 1..4 {
            filled[2 * t] = C64::new(3.0, 1.0);
        }
        let expect = full.adjoint(&KtSpaceData::new(1, full.mask().clone(), filled).unwrap()).unwrap();
        assert!(crate::linalg::diff_norm_sqr(x.as_slice(), expect.as_slice()) < 1e-24);
    }
}
