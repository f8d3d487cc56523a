mod common;

use common::*;
use lassi::dictlearn::{dct_matrix, soup_bcd, SoupConfig};
use lassi::model::{Dims, DynamicSequence, SamplingMask};
use lassi::patches::extract_patches;
use lassi::phantom::{make_phantom, Ellipse, Motion, DynamicEllipse};
use lassi::recon::{prox_gradient_p4, run_dinokat, run_lassi, run_lps_baseline, ImageUpdate, ProxState, SparseModel};
use lassi::sensing::{estimate_norm, make_cartesian_mask, zerofill_baseline, PowerIteration};
use lassi::{
    nrmse, CMatrix, Decomposition, Dictionary, LowRankPenalty, PatchConfig, PhantomSpec, ReconConfig, SchattenP,
    SensingOperator, SparseCodeMatrix, SparsityPenalty, C64,
};
use lassi::recon::LpsConfig;

fn assert_monotone(values: &[f64], what: &str) {
    for (k, w) in values.windows(2).enumerate() {
        assert!(w[1] <= w[0] + 1e-10 * w[0].abs(), "{what}: step {k} rose from {} to {}", w[0], w[1]);
    }
}

fn small_phantom() -> DynamicSequence {
    let mut spec = PhantomSpec::empty(16, 16, 6);
    spec.static_ellipses.push(Ellipse { center: [0.0, 0.0], axes: [0.75, 0.6], angle: 0.0, intensity: 0.5 });
    spec.dynamic_ellipses.push(DynamicEllipse {
        ellipse: Ellipse { center: [0.2, 0.1], axes: [0.3, 0.22], angle: 15.0, intensity: 0.4 },
        motion: Some(Motion { amplitude: [0.1, 0.05], period: 6.0, phase: 0.0 }),
        pulsation: 0.1,
        enhances: false,
    });
    make_phantom(&spec).unwrap()
}

fn small_config() -> ReconConfig {
    ReconConfig {
        patch: PatchConfig::new([4, 4, 3], [2, 2, 1]).unwrap(),
        outer_iters: 20,
        lambda_z: 0.05,
        lambda_s: 0.01,
        ..ReconConfig::default()
    }
}

fn small_problem(accel: f64) -> (DynamicSequence, SensingOperator, lassi::KtSpaceData) {
    let truth = small_phantom();
    let mask = make_cartesian_mask(16, 16, 6, accel, 2).unwrap();
    let op = SensingOperator::single_coil(mask);
    let d = op.forward(&truth).unwrap();
    (truth, op, d)
}

#[test]
fn prox_gradient_recovers_a_rank_one_sequence() {
    let dims = Dims::new(8, 8, 4);
    let mut r = rng(1);
    let (u, v) = (random_vec(64, &mut r), random_vec(4, &mut r));
    let data: Vec<C64> = (0..4).flat_map(|t| u.iter().map(|&a| a * v[t]).collect::<Vec<_>>()).collect();
    let xl = DynamicSequence::from_vec(dims, data).unwrap();
    let op = SensingOperator::single_coil(SamplingMask::full(dims).unwrap());
    let d = op.forward(&xl).unwrap();
    let cfg = PatchConfig::new([4, 4, 2], [2, 2, 1]).unwrap();
    let geometry = cfg.geometry(dims).unwrap();
    let dict = Dictionary::initial(&cfg, 32, 2, None, 0).unwrap();
    let codes = SparseCodeMatrix::zeros(geometry.count(), 32, 1e6).unwrap();
    let model = SparseModel::new(geometry, &dict, &codes, 0.1, SparsityPenalty::L0).unwrap();
    // Both blocks take the same gradient, so the sum moves by 2t g; t = 1/2 makes that a full step.
    let update = ImageUpdate { low_rank: LowRankPenalty::Nuclear, lambda_l: 1e-4, lambda_s: 0.0, step: 0.5, pin_low_rank: false };
    let init = ProxState::new(Decomposition::new(DynamicSequence::zeros(dims), DynamicSequence::zeros(dims)).unwrap()).unwrap();
    let out = prox_gradient_p4(init, &model, &op, &d, &update, 1.0, 200, None).unwrap();
    assert!(nrmse(&out.combined().unwrap(), &xl, None).unwrap() < 1e-3);
}

#[test]
fn prox_gradient_objective_is_monotone_for_every_certified_penalty() {
    let (truth, op, d) = small_problem(4.0);
    let dims = truth.dims();
    let cfg = PatchConfig::new([4, 4, 3], [2, 2, 1]).unwrap();
    let geometry = cfg.geometry(dims).unwrap();
    let x0 = zerofill_baseline(&d, &op).unwrap();
    let p = extract_patches(&x0, &geometry).unwrap();
    let dict = Dictionary::initial(&cfg, 48, 1, None, 0).unwrap();
    let soup = SoupConfig { lambda_z: 0.05, bound: 1e6, penalty: SparsityPenalty::L0, sweeps: 2 };
    let codes = SparseCodeMatrix::zeros(geometry.count(), 48, 1e6).unwrap();
    let learned = soup_bcd(&p, dict, codes, &soup, None).unwrap();
    let model = SparseModel::new(geometry, &learned.dictionary, &learned.codes, 0.05, SparsityPenalty::L0).unwrap();
    let op_norm = estimate_norm(&op, PowerIteration::default()).unwrap();
    for low_rank in [
        LowRankPenalty::Nuclear,
        LowRankPenalty::Rank,
        LowRankPenalty::Schatten { p: SchattenP::Half },
        LowRankPenalty::Schatten { p: SchattenP::TwoThirds },
    ] {
        let step = ReconConfig { low_rank, ..ReconConfig::default() }.resolve_step(op_norm).unwrap();
        let update = ImageUpdate { low_rank, lambda_l: 0.3, lambda_s: 0.05, step, pin_low_rank: false };
        let init = ProxState::new(Decomposition::new(x0.scale(0.5), x0.scale(0.5)).unwrap()).unwrap();
        let mut trace = vec![update.objective(&op, &d, &init, &model).unwrap()];
        let mut obs = |f: f64| trace.push(f);
        prox_gradient_p4(init, &model, &op, &d, &update, op_norm, 50, Some(&mut obs)).unwrap();
        assert_monotone(&trace, &format!("{low_rank:?}"));
    }
}

#[test]
fn prox_gradient_rejects_an_inadmissible_step() {
    let (truth, op, d) = small_problem(4.0);
    let cfg = PatchConfig::new([4, 4, 3], [2, 2, 1]).unwrap();
    let geometry = cfg.geometry(truth.dims()).unwrap();
    let dict = Dictionary::initial(&cfg, 48, 1, None, 0).unwrap();
    let codes = SparseCodeMatrix::zeros(geometry.count(), 48, 1e6).unwrap();
    let model = SparseModel::new(geometry, &dict, &codes, 0.05, SparsityPenalty::L0).unwrap();
    let update = ImageUpdate { low_rank: LowRankPenalty::Nuclear, lambda_l: 0.1, lambda_s: 0.1, step: 1.5, pin_low_rank: false };
    let init = ProxState::new(Decomposition::new(truth.clone(), truth.clone()).unwrap()).unwrap();
    assert!(prox_gradient_p4(init, &model, &op, &d, &update, 1.0, 1, None).is_err());
}

#[test]
fn lps_least_squares_limit_and_huge_sparsity_weight() {
    let (truth, _, _) = small_problem(4.0);
    let full = SensingOperator::single_coil(SamplingMask::full(truth.dims()).unwrap());
    let d = full.forward(&truth).unwrap();
    let cfg = LpsConfig { lambda_l: 0.0, lambda_s: 0.0, iters: 50, ..LpsConfig::default() };
    let out = run_lps_baseline(&d, &full, &cfg, None).unwrap();
    assert!(nrmse(&out.decomposition.combined(), &truth, None).unwrap() < 1e-3);

    let (_, op, d) = small_problem(4.0);
    let cfg = LpsConfig { lambda_l: 0.5, lambda_s: 1e6, iters: 30, ..LpsConfig::default() };
    let out = run_lps_baseline(&d, &op, &cfg, None).unwrap();
    assert_eq!(out.decomposition.xs.norm(), 0.0);
    assert_monotone(&out.objectives, "lps");
}

#[test]
fn lps_improves_on_zerofill() {
    let (truth, op, d) = small_problem(4.0);
    let zf = nrmse(&zerofill_baseline(&d, &op).unwrap(), &truth, None).unwrap();
    let out = run_lps_baseline(&d, &op, &LpsConfig { lambda_l: 1.0, lambda_s: 0.01, ..LpsConfig::default() }, None).unwrap();
    assert_monotone(&out.objectives, "lps");
    assert_eq!(out.objectives.len(), 251);
    assert!(nrmse(&out.decomposition.combined(), &truth, None).unwrap() < zf);
}

#[test]
fn lassi_objective_is_monotone_for_all_certified_variants() {
    let (truth, op, d) = small_problem(4.0);
    let x0 = zerofill_baseline(&d, &op).unwrap();
    for low_rank in [LowRankPenalty::Nuclear, LowRankPenalty::Rank, LowRankPenalty::Schatten { p: SchattenP::Half }] {
        for penalty in [SparsityPenalty::L0, SparsityPenalty::L1] {
            let cfg = ReconConfig { low_rank, penalty, ..small_config() };
            let init = Decomposition::new(DynamicSequence::zeros(truth.dims()), x0.clone()).unwrap();
            let out = run_lassi(&d, &op, &cfg, init, None, Some(&truth)).unwrap();
            assert!(out.trace.certified);
            assert_monotone(&out.trace.step_objectives, &format!("{low_rank:?} {penalty:?}"));
            // initial + per outer (2K soup updates + refresh + prox steps)
            let natoms = cfg.patch.patch_len();
            assert_eq!(out.trace.step_objectives.len(), 1 + 20 * (2 * natoms + 1 + cfg.prox_iters));
            let iters: Vec<usize> = out.trace.records().iter().map(|r| r.iter).collect();
            assert_eq!(iters, (1..=20).collect::<Vec<_>>());
            out.dictionary.check_invariants().unwrap();
            assert!(out.codes.max_abs() <= out.codes.bound());
        }
    }
}

#[test]
fn lassi_and_dinokat_improve_on_zerofill() {
    let (truth, op, d) = small_problem(4.0);
    let x0 = zerofill_baseline(&d, &op).unwrap();
    let zf = nrmse(&x0, &truth, None).unwrap();
    let cfg = small_config();
    let init = Decomposition::new(DynamicSequence::zeros(truth.dims()), x0.clone()).unwrap();
    let lassi = run_lassi(&d, &op, &cfg, init, None, Some(&truth)).unwrap();
    let dino = run_dinokat(&d, &op, &cfg, x0, None, Some(&truth)).unwrap();
    assert_monotone(&dino.trace.step_objectives, "dinokat");
    assert_eq!(dino.decomposition.xl.norm(), 0.0);
    for (name, out) in [("lassi", &lassi), ("dinokat", &dino)] {
        let e = nrmse(&out.decomposition.combined(), &truth, None).unwrap();
        assert!(e < zf, "{name}: {e} vs zerofill {zf}");
        let last = out.trace.records().last().unwrap();
        assert!((last.nrmse.unwrap() - e).abs() < 1e-12);
    }
}

#[test]
fn optshrink_variant_runs_uncertified() {
    let (truth, op, d) = small_problem(4.0);
    let x0 = zerofill_baseline(&d, &op).unwrap();
    let cfg = ReconConfig { low_rank: LowRankPenalty::OptShrink { rank: 1 }, outer_iters: 3, ..small_config() };
    let init = Decomposition::new(DynamicSequence::zeros(truth.dims()), x0).unwrap();
    let out = run_lassi(&d, &op, &cfg, init, None, None).unwrap();
    assert!(!out.trace.certified);
    assert_eq!(out.trace.len(), 3);
    let s = singular_values(&lassi::reshape_r1(&out.decomposition.xl));
    assert!(s[1..].iter().all(|&v| v < 1e-9 * s[0].max(1.0)));
}

#[test]
fn strong_dictionary_weight_on_exactly_sparse_data() {
    // Non-overlapping 4x4x3 tiles, each a multiple of a single DCT atom.
    let cfg = PatchConfig::new([4, 4, 3], [4, 4, 3]).unwrap();
    let dims = Dims::new(8, 8, 6);
    let geometry = cfg.geometry(dims).unwrap();
    let dct = dct_matrix(48);
    let mut r = rng(5);
    let mut q = CMatrix::zeros(48, geometry.count());
    for j in 0..geometry.count() {
        let k = [0, 1, 4, 12, 17][j % 5];
        q.set_column(j, &(dct.column(k) * C64::new(1.0 + rand::Rng::random::<f64>(&mut r), 0.0)));
    }
    let truth = lassi::patches::aggregate_patches(&q, &geometry).unwrap();
    let mask = make_cartesian_mask(8, 8, 6, 2.0, 3).unwrap();
    let op = SensingOperator::single_coil(mask);
    let d = op.forward(&truth).unwrap();
    let x0 = zerofill_baseline(&d, &op).unwrap();
    let zf = nrmse(&x0, &truth, None).unwrap();
    let dict = Dictionary::new(dct.clone(), 3, 16, 3).unwrap();
    let recon = ReconConfig { patch: cfg, atom_rank: 3, lambda_s: 5.0, lambda_z: 0.2, outer_iters: 10, ..ReconConfig::default() };
    let out = run_dinokat(&d, &op, &recon, x0, Some(dict), Some(&truth)).unwrap();
    let e = nrmse(&out.decomposition.combined(), &truth, None).unwrap();
    assert!(e < zf, "{e} vs zerofill {zf}");
}

#[test]
fn mismatched_inputs_are_rejected() {
    let (truth, op, d) = small_problem(4.0);
    let other = DynamicSequence::zeros(Dims::new(8, 8, 6));
    let init = Decomposition::new(other.clone(), other.clone()).unwrap();
    assert!(run_lassi(&d, &op, &small_config(), init, None, None).is_err());
    let wrong_dict = Dictionary::initial(&PatchConfig::default(), 320, 1, None, 0).unwrap();
    assert!(run_dinokat(&d, &op, &small_config(), truth.clone(), Some(wrong_dict), None).is_err());
    let bad = ReconConfig { bound: Some(0.01), lambda_z: 0.05, ..small_config() };
    assert!(run_dinokat(&d, &op, &bad, truth, None, None).is_err());
}
