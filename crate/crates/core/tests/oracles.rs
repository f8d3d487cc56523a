mod common;

use std::collections::HashSet;

use common::*;
use lassi::dictlearn::{dct_matrix, soup_bcd, SoupConfig};
use lassi::model::{Dims, DynamicSequence, SamplingMask};
use lassi::recon::gradient;
use lassi::sensing::{
    estimate_norm, make_cartesian_mask, make_pseudoradial_mask, PowerIteration, RadialOptions,
};
use lassi::phantom::make_coil_maps;
use lassi::shrinkage::{hard_sv_threshold, optshrink, svt};
use lassi::{CMatrix, Dictionary, SensingOperator, SparseCodeMatrix, SparsityPenalty, C64};
use proptest::prelude::*;
use rand::Rng;

fn random_sequence(dims: Dims, seed: u64) -> DynamicSequence {
    let mut r = rng(seed);
    DynamicSequence::from_vec(dims, random_vec(dims.len(), &mut r)).unwrap()
}

fn random_mask(dims: Dims, seed: u64) -> SamplingMask {
    let mut r = rng(seed);
    let nf = dims.frame_len();
    let mut m: Vec<bool> = (0..dims.len()).map(|_| r.random::<f64>() < 0.4).collect();
    for t in 0..dims.nt {
        m[t * nf] = true;
    }
    SamplingMask::new(dims, m).unwrap()
}

/// Explicit matrix of the operator, one column per unit input.
fn dense_operator(op: &SensingOperator) -> CMatrix {
    let dims = op.dims();
    let n = dims.len();
    let rows = op.coils() * n;
    let mut a = CMatrix::zeros(rows, n);
    for j in 0..n {
        let mut e = DynamicSequence::zeros(dims);
        e.as_mut_slice()[j] = C64::new(1.0, 0.0);
        let col = op.forward(&e).unwrap();
        a.column_mut(j).copy_from_slice(col.as_slice());
    }
    a
}

#[test]
fn operator_norm_matches_dense_svd() {
    let dims = Dims::new(8, 8, 3);
    for (seed, coils) in [(1u64, None), (2, Some(3usize))] {
        let maps = coils.map(|c| make_coil_maps(8, 8, c, seed).unwrap());
        let op = SensingOperator::new(random_mask(dims, seed), maps).unwrap();
        let sigma = singular_values(&dense_operator(&op))[0];
        let est = estimate_norm(&op, PowerIteration::default()).unwrap();
        assert!((sigma - est).abs() < 1e-6, "dense {sigma} vs power {est}");
        assert!(sigma <= 1.0 + 1e-4);
        let full = singular_values(&dense_operator(&op.fully_sampled()))[0];
        assert!((full - 1.0).abs() < 1e-4, "full-sampling norm {full}");
    }
}

#[test]
fn gradient_matches_central_differences() {
    let dims = Dims::new(8, 8, 3);
    let maps = make_coil_maps(8, 8, 2, 5).unwrap();
    let op = SensingOperator::new(random_mask(dims, 3), Some(maps)).unwrap();
    let (xl, xs) = (random_sequence(dims, 10), random_sequence(dims, 11));
    let d = op.forward(&random_sequence(dims, 12)).unwrap();
    let f = |x: &DynamicSequence| {
        let r = op.forward(x).unwrap();
        0.5 * r.as_slice().iter().zip(d.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>()
    };
    let g = gradient(&op, &xl, &xs, &d).unwrap();
    let x = xl.add(&xs).unwrap();
    for seed in 0..5 {
        let h = random_sequence(dims, 100 + seed);
        let eps = 1e-5;
        let fd = (f(&x.add(&h.scale(eps)).unwrap()) - f(&x.sub(&h.scale(eps)).unwrap())) / (2.0 * eps);
        let exact = dotc(g.as_slice(), h.as_slice()).re;
        assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1e-3), "{fd} vs {exact}");
    }
}

#[test]
fn cartesian_center_is_sampled_at_least_as_often_as_the_edge() {
    let (nx, ny, nt) = (4, 64, 2);
    let mut hist = vec![0usize; ny];
    for seed in 0..1000 {
        let mask = make_cartesian_mask(nx, ny, nt, 8.0, seed).unwrap();
        for t in 0..nt {
            let lines: Vec<usize> = (0..ny).filter(|&y| mask.is_sampled(0, y, t)).collect();
            assert_eq!(lines.len(), 8);
            for &y in &lines {
                assert!((0..nx).all(|x| mask.is_sampled(x, y, t)), "partial line");
                hist[y] += 1;
            }
        }
    }
    let band = |lo: usize, hi: usize| hist[lo..hi].iter().sum::<usize>() as f64 / (hi - lo) as f64;
    assert_eq!(hist[ny / 2], 2000);
    assert!(band(24, 31) >= band(0, 7), "center {} edge {}", band(24, 31), band(0, 7));
    assert!(band(33, 40) >= band(57, 64));
}

/// Independent nearest-grid rasterization of the spokes without rotation.
fn reference_radial_count(n: usize, spokes: usize, step: f64) -> usize {
    let c = (n / 2) as f64;
    let mut hit = HashSet::new();
    let samples = (2.0 * n as f64 / step).ceil() as i64;
    for k in 0..spokes {
        let theta = std::f64::consts::PI * k as f64 / spokes as f64;
        for i in 0..=samples {
            let r = -(n as f64) + i as f64 * step;
            let (x, y) = ((c + r * theta.cos()).round(), (c + r * theta.sin()).round());
            if (0.0..n as f64).contains(&x) && (0.0..n as f64).contains(&y) {
                hit.insert((x as i64, y as i64));
            }
        }
    }
    hit.len()
}

#[test]
fn radial_acceleration_agrees_with_independent_rasterizer() {
    let options = RadialOptions { jitter: 0.0, ..RadialOptions::default() };
    let mask = make_pseudoradial_mask(64, 64, 3, 16, 0, options).unwrap();
    let per_frame = reference_radial_count(64, 16, options.step);
    assert_eq!(mask.count(), 3 * per_frame);
    let rotated = make_pseudoradial_mask(64, 64, 16, 16, 4, RadialOptions::default()).unwrap();
    let accel = rotated.acceleration();
    assert!((3.0..=6.0).contains(&accel), "acceleration {accel}");
}

fn random_unitary(n: usize, r: &mut rand_chacha::ChaCha8Rng) -> CMatrix {
    random_matrix(n, n, r).qr().q()
}

#[test]
fn svt_commutes_with_unitary_maps() {
    let mut r = rng(21);
    for _ in 0..20 {
        let y = random_matrix(7, 5, &mut r);
        let (u, v) = (random_unitary(7, &mut r), random_unitary(5, &mut r));
        let tau = r.random::<f64>();
        let lhs = svt(&(&u * &y * v.adjoint()), tau).unwrap();
        let rhs = &u * svt(&y, tau).unwrap() * v.adjoint();
        assert!((lhs - rhs).norm() < 1e-10);
    }
}

#[test]
fn hard_threshold_beats_every_rank_in_a_sweep() {
    let mut r = rng(22);
    for _ in 0..50 {
        let y = random_matrix(5, 4, &mut r);
        let tau = 0.3 + r.random::<f64>();
        let x = hard_sv_threshold(&y, tau).unwrap();
        let sx = singular_values(&x);
        let rank = sx.iter().filter(|&&s| s > 1e-9).count();
        let value = 0.5 * (&y - &x).norm_squared() + 0.5 * tau * tau * rank as f64;
        let s = singular_values(&y);
        let best = (0..=s.len())
            .map(|k| 0.5 * s[k..].iter().map(|v| v * v).sum::<f64>() + 0.5 * tau * tau * k as f64)
            .fold(f64::INFINITY, f64::min);
        assert!(value <= best + 1e-10, "{value} > {best}");
    }
}

#[test]
fn optshrink_output_has_the_requested_rank() {
    let mut r = rng(23);
    for rank in 1..4 {
        let y = random_matrix(12, 9, &mut r);
        let out = optshrink(&y, rank).unwrap();
        let s = singular_values(&out);
        assert!(s[rank..].iter().all(|&v| v < 1e-10), "{s:?}");
    }
}

#[test]
fn jacobi_oracle_reconstructs() {
    let mut r = rng(24);
    let a = random_matrix(6, 9, &mut r);
    let (s, u, v) = jacobi_svd(&a);
    assert!((recompose(&u, &v, &s) - &a).norm() < 1e-12);
    assert!(s.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn soup_fixed_point_on_one_sparse_data() {
    // 2x2x2 patches: 4 spatial by 2 temporal, full-rank atoms.
    let (m, k, npatch) = (8, 8, 24);
    let d0 = Dictionary::new(dct_matrix(m), 2, 4, 2).unwrap();
    let mut r = rng(25);
    let mut c = CMatrix::zeros(npatch, k);
    for j in 0..npatch {
        let phase = C64::from_polar(1.0, r.random::<f64>() * 6.0);
        c[(j, j % k)] = phase * (1.0 + r.random::<f64>());
    }
    let p = d0.atoms() * c.adjoint();
    let codes = SparseCodeMatrix::from_c(c.clone(), 1e6).unwrap();
    let cfg = SoupConfig { lambda_z: 0.5, bound: 1e6, penalty: SparsityPenalty::L0, sweeps: 1 };
    let out = soup_bcd(&p, d0.clone(), codes, &cfg, None).unwrap();
    assert!((out.dictionary.atoms() - d0.atoms()).norm() < 1e-12);
    assert!((out.codes.c() - &c).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(seed in any::<u64>(), nx in 1usize..6, ny in 1usize..6, nt in 1usize..4, coils in 1usize..4) {
        let dims = Dims::new(nx, ny, nt);
        let maps = make_coil_maps(nx, ny, coils, seed).unwrap();
        let op = SensingOperator::new(random_mask(dims, seed), Some(maps)).unwrap();
        let x = random_sequence(dims, seed ^ 1);
        let y = op.forward(&random_sequence(dims, seed ^ 2)).unwrap();
        let lhs = dotc(op.forward(&x).unwrap().as_slice(), y.as_slice());
        let rhs = dotc(x.as_slice(), op.adjoint(&y).unwrap().as_slice());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0));
    }

    #[test]
    fn svt_weights_never_exceed_singular_values(seed in any::<u64>(), tau in 0.0f64..2.0) {
        let mut r = rng(seed);
        let y = random_matrix(6, 4, &mut r);
        let s = singular_values(&y);
        let out = singular_values(&svt(&y, tau).unwrap());
        for (a, b) in out.iter().zip(&s) {
            prop_assert!((a - (b - tau).max(0.0)).abs() < 1e-10);
        }
    }
}
