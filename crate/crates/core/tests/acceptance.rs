//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

use rrmimo::beamspace::{build_dft, build_geb, BeamKind, Beamspace, Normalization};
use rrmimo::cli::{self, Overrides};
use rrmimo::estimators::{self, LinearEstimator, Setting, Target};
use rrmimo::evaluation::{direct_criteria, identity_checks, monte_carlo_mse, mse, spectral_criteria, NoiseMode};
use rrmimo::instances::{full_rank_instance, orthogonal_instance, scalar_instance, small_reference_scenario};
use rrmimo::linalg::{self, CMat};
use rrmimo::rng;
use rrmimo::scenario::{default_scenario, Model};
use rrmimo::sweep::{run_sweep, Axis, Benchmark, EstimatorChoice, SweepResult, SweepSpec};

const WIENER_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-8;
const SCALAR_TOL: f64 = 1e-12;
const HIGH_SNR_TOL: f64 = 1e-3;
const BENCHMARK_GAP_DB: f64 = 1.0;
const MC_TRIALS: usize = 10_000;
const MC_SIGMAS: f64 = 3.0;
const MC_SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Brute-force conditional mean of h given z, every covariance written out.
fn brute_force_wiener(setting: &Setting, s: &CMat) -> CMat {
    let n = setting.num_antennas();
    let t = setting.len();
    let l_count = setting.num_mpcs();
    let kl = setting.num_users() * l_count;
    let mut rhh = CMat::zeros(kl * n, kl * n);
    for k in 0..setting.num_users() {
        for l in 0..l_count {
            let off = (k * l_count + l) * n;
            rhh.view_mut((off, off), (n, n)).copy_from(&setting.stats.covs[l].matrix.scale(setting.stats.powers[l]));
        }
    }
    let a = linalg::kron(&linalg::identity(t), &s.adjoint()) * linalg::kron(&setting.train.x, &linalg::identity(n));
    let noise = linalg::kron(&linalg::identity(t), &(s.adjoint() * &setting.noise.matrix * s));
    let rzz = &a * &rhh * a.adjoint() + noise;
    &rhh * a.adjoint() * rzz.try_inverse().expect("R_zz invertible")
}

fn wiener_oracle() -> Outcome {
    let start = Instant::now();
    let m = Model::build(&small_reference_scenario(), 1).unwrap();
    let set = m.setting();
    let beam = m.beam(BeamKind::Geb, 4, None).unwrap();
    let est = estimators::rr_mmse_joint(&set, &beam).unwrap();
    let w = brute_force_wiener(&set, &beam.s);
    let dev = linalg::max_abs(&(est.map(Target::Full).unwrap() - w));
    let secs = start.elapsed().as_secs_f64();
    Outcome { pass: dev < WIENER_TOL && secs < 1.0, detail: format!("max deviation {dev:.2e} (< {WIENER_TOL:e}), {secs:.3} s (< 1 s)") }
}

fn determinant_identities() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..4u64 {
        for n in 3..=6usize {
            let inst = full_rank_instance(seed, n, 2, 2, 3, 10.0).unwrap();
            let set = inst.setting();
            for d in [n - 1, n] {
                let beam = build_geb(set.stats, set.noise, set.train, d).unwrap();
                for c in identity_checks(&set, &beam, IDENTITY_TOL).unwrap() {
                    worst = worst.max(c.rel_err);
                    count += 1;
                }
            }
        }
    }
    let mut scalar_worst: f64 = 0.0;
    for snr in [-10.0, 0.0, 10.0, 20.0, 30.0] {
        let inst = scalar_instance(snr).unwrap();
        let set = inst.setting();
        let v = mse(&set, &estimators::full_wiener(&set).unwrap(), Target::Full).unwrap();
        let want = 1.0 / (1.0 + 10f64.powf(snr / 10.0));
        scalar_worst = scalar_worst.max((v - want).abs() / want);
    }
    Outcome {
        pass: count == 96 && worst <= IDENTITY_TOL && scalar_worst <= SCALAR_TOL,
        detail: format!(
            "{count} checks on N=3..6, worst rel err {worst:.2e} (<= {IDENTITY_TOL:e}); scalar nMSE worst rel err {scalar_worst:.2e} (<= {SCALAR_TOL:e})"
        ),
    }
}

fn criterion_consistency() -> Outcome {
    let inst = full_rank_instance(42, 6, 2, 2, 4, 5.0).unwrap();
    let set = inst.setting();
    let mut g = rng::stream(42, 1, 0);
    let mut worst: f64 = 0.0;
    for i in 0..100usize {
        let d = 1 + i % 6;
        let s = CMat::from_fn(6, d, |_, _| rng::complex_normal(&mut g));
        let beam = Beamspace::custom(s, Normalization::NoiseOrthonormal).unwrap();
        let spec = spectral_criteria(&set, &beam).unwrap();
        let dir = direct_criteria(&set, &beam).unwrap();
        let vol = dir.log_det_error.unwrap() - dir.log_det_channel.unwrap();
        worst = worst
            .max((spec.nmse_trace - dir.nmse_trace).abs() / dir.nmse_trace)
            .max((spec.mutual_info - dir.mutual_info).abs() / dir.mutual_info.abs())
            .max((spec.log_error_volume_ratio - vol).abs());
    }

    // GEB against random and DFT-derived candidates of the same dimension.
    let n = 16;
    let orth = orthogonal_instance(n, &[2, 5], 11, 2, 8, 10.0).unwrap();
    let oset = orth.setting();
    let mut beaten = 0;
    let mut candidates = 0;
    for d in [2usize, 3] {
        let geb = build_geb(oset.stats, oset.noise, oset.train, d).unwrap();
        let best = spectral_criteria(&oset, &geb).unwrap().mutual_info;
        let mut others: Vec<Beamspace> = vec![build_dft(oset.stats, d).unwrap()];
        for _ in 0..100 {
            let s = CMat::from_fn(n, d, |_, _| rng::complex_normal(&mut g));
            others.push(Beamspace::custom(s, Normalization::NoiseOrthonormal).unwrap());
        }
        for o in &others {
            candidates += 1;
            if spectral_criteria(&oset, o).unwrap().mutual_info > best + 1e-9 {
                beaten += 1;
            }
        }
    }
    Outcome {
        pass: worst <= IDENTITY_TOL && beaten == 0,
        detail: format!(
            "100 random beams, worst identity error {worst:.2e} (<= {IDENTITY_TOL:e}); GEB det(I+F) beaten by {beaten} of {candidates} candidates"
        ),
    }
}

fn high_snr_convergence() -> Outcome {
    let inst = orthogonal_instance(16, &[2, 9], 13, 2, 8, 80.0).unwrap();
    let set = inst.setting();
    let beam = build_geb(set.stats, set.noise, set.train, 2).unwrap();
    let rel = |a: &LinearEstimator, b: &LinearEstimator| {
        let (x, y) = (a.map(Target::Effective).unwrap(), b.map(Target::Effective).unwrap());
        (x - y).norm() / y.norm()
    };
    let corr = estimators::correlator_rank1(&set, &beam).unwrap();
    let joint = estimators::rr_mmse_joint(&set, &beam).unwrap();
    let ls = estimators::ls_angle(&set, &beam).unwrap();
    let angle = estimators::rr_mmse_angle(&set, &beam).unwrap();
    let e1 = rel(&corr, &joint);
    let e2 = rel(&ls, &angle);
    let m1 = (mse(&set, &corr, Target::Effective).unwrap() / mse(&set, &joint, Target::Effective).unwrap() - 1.0).abs();
    let m2 = (mse(&set, &ls, Target::Effective).unwrap() / mse(&set, &angle, Target::Effective).unwrap() - 1.0).abs();
    let worst = e1.max(e2).max(m1).max(m2);
    Outcome {
        pass: worst < HIGH_SNR_TOL,
        detail: format!(
            "80 dB: map rel err corr_rank1/joint {e1:.2e}, ls/angle {e2:.2e}; MSE rel err {m1:.2e}, {m2:.2e} (< {HIGH_SNR_TOL:e})"
        ),
    }
}

fn series(r: &SweepResult, est: &str, beam: &str) -> Vec<(f64, f64)> {
    r.points.iter().filter(|p| p.estimator == est && p.beam == beam).map(|p| (p.axis_value, p.mse_analytic)).collect()
}

fn dimension_sweep() -> Vec<(String, Outcome)> {
    let start = Instant::now();
    let spec = SweepSpec::dimension_default();
    let r = run_sweep(&default_scenario(), &spec, 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let gj = series(&r, "rrmmse_joint", "geb");
    let dj = series(&r, "rrmmse_joint", "dft");
    let ga = series(&r, "rrmmse_angle", "geb");
    let da = series(&r, "rrmmse_angle", "dft");
    let bench = series(&r, "full_wiener_clean", "identity");
    let complete = gj.len() == 17 && dj.len() == 17 && ga.len() == 17 && da.len() == 17 && bench.len() == 17;

    let increases: Vec<f64> = gj.windows(2).filter(|w| w[1].1 > w[0].1 * (1.0 + 1e-9)).map(|w| w[1].0).collect();
    let a = Outcome {
        pass: complete && increases.is_empty() && secs < 300.0,
        detail: format!("GEB joint MSE {:.2} dB at D=4 to {:.2} dB at D=20, increases at {increases:?}; sweep {secs:.1} s (< 300 s)", db(gj[0].1), db(gj[16].1)),
    };
    let worse: Vec<f64> = gj.iter().zip(&dj).filter(|(g, d)| g.0 <= 14.0 && g.1 > d.1).map(|(g, _)| g.0).collect();
    let b = Outcome {
        pass: complete && worse.is_empty(),
        detail: format!("GEB <= DFT for D in 4..=14, violations at {worse:?}; gap at D=4 {:.2} dB", db(dj[0].1) - db(gj[0].1)),
    };
    let at7 = gj.iter().find(|p| p.0 == 7.0).unwrap().1;
    let gap = db(at7) - db(bench[0].1);
    let c = Outcome {
        pass: complete && gap <= BENCHMARK_GAP_DB,
        detail: format!("D=7 GEB joint {:.2} dB vs interference-free full Wiener {:.2} dB, gap {gap:.3} dB (<= {BENCHMARK_GAP_DB} dB)", db(at7), db(bench[0].1)),
    };
    let bad: usize = ga.iter().zip(&gj).chain(da.iter().zip(&dj)).filter(|(a, j)| a.1 < j.1 * (1.0 - 1e-9)).count();
    let min_gap = ga
        .iter()
        .zip(&gj)
        .chain(da.iter().zip(&dj))
        .map(|(a, j)| db(a.1) - db(j.1))
        .fold(f64::INFINITY, f64::min);
    let d = Outcome {
        pass: complete && bad == 0,
        detail: format!("angle >= joint at all 34 (D, beam) pairs, violations {bad}; smallest gap {min_gap:.3} dB"),
    };
    vec![("Dimension sweep: monotone in D".into(), a), ("Dimension sweep: GEB beats DFT".into(), b), ("Dimension sweep: D=7 near benchmark".into(), c), ("Dimension sweep: angle-only inferior".into(), d)]
}

/// Signal rank threshold for the correlator trend: rank of the group's
/// total covariance.
fn correlator_trend() -> Outcome {
    let sc = default_scenario();
    let rank = Model::build(&sc, 1).unwrap().stats.r_sum.rank();
    let spec = SweepSpec {
        axis: Axis::Dimension,
        grid: (4..=20).map(f64::from).collect(),
        estimators: vec![EstimatorChoice::RrmmseJoint, EstimatorChoice::CorrGeneral, EstimatorChoice::LsAngle],
        beams: vec![BeamKind::Geb, BeamKind::Dft],
        dim: 8,
        target: Target::Effective,
        normalization: Some(Normalization::Orthonormal),
        normalize_to: Some(Benchmark { estimator: EstimatorChoice::RrmmseJoint, beam: BeamKind::Geb }),
        mc_trials: 0,
    };
    let r = run_sweep(&sc, &spec, 1).unwrap();
    let mut decreases = Vec::new();
    let mut not_better = Vec::new();
    for est in ["corr_general", "ls_angle"] {
        let g = series(&r, est, "geb");
        let d = series(&r, est, "dft");
        for w in g.windows(2).chain(d.windows(2)) {
            if w[0].0 >= rank as f64 && w[1].1 < w[0].1 * (1.0 - 1e-9) {
                decreases.push(format!("{est}@{}", w[1].0));
            }
        }
        for (a, b) in g.iter().zip(&d) {
            if a.1 >= b.1 {
                not_better.push(format!("{est}@{}", a.0));
            }
        }
        if g.len() != 17 || d.len() != 17 {
            not_better.push(format!("{est}: missing points"));
        }
    }
    let g7 = series(&r, "corr_general", "geb").iter().find(|p| p.0 == 7.0).unwrap().1;
    let d7 = series(&r, "corr_general", "dft").iter().find(|p| p.0 == 7.0).unwrap().1;
    Outcome {
        pass: decreases.is_empty() && not_better.is_empty(),
        detail: format!(
            "correlators vs GEB joint, D=4..20, signal rank {rank}: decreases beyond rank {decreases:?}, GEB not better {not_better:?}; corr_general at D=7 GEB {:.2} dB, DFT {:.2} dB",
            db(g7),
            db(d7)
        ),
    }
}

fn interference_robustness() -> Outcome {
    let spec = SweepSpec {
        axis: Axis::InrDb,
        grid: vec![0.0, 5.0, 10.0, 15.0, 20.0],
        estimators: vec![EstimatorChoice::RrmmseJoint],
        beams: vec![BeamKind::Geb, BeamKind::Dft],
        dim: 8,
        target: Target::Full,
        normalization: None,
        normalize_to: None,
        mc_trials: 0,
    };
    let r = run_sweep(&default_scenario(), &spec, 1).unwrap();
    let range = |b: &str| {
        let v: Vec<f64> = series(&r, "rrmmse_joint", b).iter().map(|p| db(p.1)).collect();
        assert_eq!(v.len(), 5);
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    let (g, d) = (range("geb"), range("dft"));
    Outcome { pass: g < d, detail: format!("degradation over inr 0..20 dB at D=8: GEB {g:.3} dB, DFT {d:.3} dB") }
}

fn monte_carlo() -> Outcome {
    let m = Model::build(&small_reference_scenario(), 1).unwrap();
    let set = m.setting();
    let b4 = m.beam(BeamKind::Geb, 4, None).unwrap();
    let b2 = m.beam(BeamKind::Geb, 2, None).unwrap();
    let cases: Vec<(LinearEstimator, Target, &str)> = vec![
        (estimators::rr_mmse_joint(&set, &b4).unwrap(), Target::Full, "rrmmse_joint/full"),
        (estimators::rr_mmse_joint(&set, &b4).unwrap(), Target::Effective, "rrmmse_joint/eff"),
        (estimators::rr_mmse_angle(&set, &b4).unwrap(), Target::Full, "rrmmse_angle/full"),
        (estimators::rr_mmse_angle(&set, &b4).unwrap(), Target::Effective, "rrmmse_angle/eff"),
        (estimators::ls_angle(&set, &b4).unwrap(), Target::Effective, "ls_angle/eff"),
        (estimators::correlator_rank1(&set, &b2).unwrap(), Target::Effective, "corr_rank1/eff"),
        (estimators::correlator_general(&set, &b4).unwrap(), Target::Effective, "corr_general/eff"),
        (estimators::full_wiener(&set).unwrap(), Target::Full, "full_wiener/full"),
    ];
    let mut worst: f64 = 0.0;
    let mut fails = Vec::new();
    // Common random numbers: every estimator sees the same realizations.
    for (est, target, name) in &cases {
        let analytic = mse(&set, est, *target).unwrap();
        let mc = monte_carlo_mse(&set, est, *target, NoiseMode::Gaussian, MC_TRIALS, MC_SEED, 0).unwrap();
        let z = (mc.mean - analytic).abs() / mc.std_err;
        worst = worst.max(z);
        if z > MC_SIGMAS {
            fails.push(format!("{name} ({z:.2} SE)"));
        }
    }
    let est = estimators::rr_mmse_joint(&set, &b4).unwrap();
    let analytic = mse(&set, &est, Target::Full).unwrap();
    let mode = NoiseMode::Explicit { interferers: &m.interferers, energy: m.energy() };
    let mc = monte_carlo_mse(&set, &est, Target::Full, mode, MC_TRIALS, MC_SEED, 0).unwrap();
    let z = (mc.mean - analytic).abs() / mc.std_err;
    worst = worst.max(z);
    if z > MC_SIGMAS {
        fails.push(format!("rrmmse_joint/explicit interference ({z:.2} SE)"));
    }
    Outcome {
        pass: fails.is_empty(),
        detail: format!("{} estimator/target pairs plus explicit interference, {MC_TRIALS} trials, worst {worst:.2} SE (<= {MC_SIGMAS}); failures {fails:?}", cases.len()),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for (i, threads) in [1usize, 4, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = Overrides { out: Some(out.clone()), threads: Some(threads), seed: Some(7), ..Default::default() };
        let cfg = cli::load(None, &o).unwrap();
        cli::run(&cfg).unwrap();
        bytes.push(std::fs::read(out.join("sweep_dimension.csv")).unwrap());
    }
    let same = bytes.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass: same && !bytes[0].is_empty(),
        detail: format!("dimension sweep CSV with 1, 4 and 4 threads: {} bytes, identical = {same}", bytes[0].len()),
    }
}

fn main() {
    let mut results: Vec<(String, Outcome)> = vec![
        ("Wiener oracle equivalence".into(), wiener_oracle()),
        ("Determinant, trace and MI identities".into(), determinant_identities()),
        ("Criterion consistency and GEB optimality".into(), criterion_consistency()),
        ("High-SNR correlator convergence".into(), high_snr_convergence()),
    ];
    results.extend(dimension_sweep());
    results.push(("Correlator trend".into(), correlator_trend()));
    results.push(("Graceful degradation under interference".into(), interference_robustness()));
    results.push(("Monte Carlo consistency".into(), monte_carlo()));
    results.push(("Determinism across thread counts".into(), determinism()));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
