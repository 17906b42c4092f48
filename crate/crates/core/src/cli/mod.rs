//! Configuration-driven runs: the library side of the `rrmimo` binary.
//!
//! Every run writes `config.json`, the effective configuration with the
//! scenario inlined, next to its CSV outputs. Feeding that file back with
//! `--config` reproduces the run byte for byte.

mod config;

use std::path::{Path, PathBuf};

pub use config::{default_grid, parse_grid, Command, Overrides, RunConfig, CONFIG_VERSION};

use crate::beamspace::{beam_pattern, evaluate_criteria, BeamKind};
use crate::error::{Error, Result};
use crate::estimators::{self, Target};
use crate::evaluation::{identity_checks, mse, synthesize, IdentityCheck, NoiseMode};
use crate::instances::{full_rank_instance, scalar_instance};
use crate::report;
use crate::scenario::Model;
use crate::sweep::run_sweep;

/// Tolerance used by the `identities` command.
pub const IDENTITY_TOL: f64 = 1e-8;

/// Process exit code for an error: 2 for configuration and input problems,
/// 3 for numerical failures, 4 for I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Validation(_)
        | Error::Shape(_)
        | Error::Unsupported(_)
        | Error::Json(_) => 2,
        Error::Numerical(_) | Error::Conditioning(_) => 3,
        Error::Io(_) | Error::Csv(_) => 4,
    }
}

/// Reads the config file (if any), applies flag overrides and resolves the
/// scenario. Relative `scenario_path` values are taken relative to the
/// config file.
pub fn load(config_path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match config_path {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(overrides)?;
    cfg.resolve(config_path.and_then(Path::parent))
}

/// Files written by a run, in the order they were written.
#[derive(Debug, Clone, Default)]
pub struct RunOutputs {
    pub files: Vec<PathBuf>,
}

/// Executes a resolved configuration on a thread pool of the configured
/// size.
pub fn run(cfg: &RunConfig) -> Result<RunOutputs> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<RunOutputs> {
    let out = &cfg.out;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display()))))?;
    let mut outputs = RunOutputs::default();
    let snapshot = out.join("config.json");
    report::write_text(&snapshot, &cfg.to_json()?)?;
    outputs.files.push(snapshot);
    match cfg.command {
        Command::Sweep => sweep(cfg, &mut outputs)?,
        Command::Design => design(cfg, &mut outputs)?,
        Command::Estimate => estimate(cfg, &mut outputs)?,
        Command::Identities => identities(cfg, &mut outputs)?,
    }
    Ok(outputs)
}

fn sweep(cfg: &RunConfig, outputs: &mut RunOutputs) -> Result<()> {
    let scenario = cfg.scenario();
    let result = run_sweep(&scenario, &cfg.sweep, cfg.seed)?;
    for f in &result.failures {
        log::warn!("sweep point failed: {f}");
    }
    if result.points.is_empty() && !result.failures.is_empty() {
        return Err(Error::Numerical(format!(
            "every sweep point failed ({} failures); first: {}",
            result.failures.len(),
            result.failures[0]
        )));
    }
    let path = cfg.out.join(format!("sweep_{}.csv", cfg.sweep.axis.name()));
    report::write_sweep_csv(&result, &path)?;
    log::info!("wrote {} rows to {}", result.points.len(), path.display());
    outputs.files.push(path);
    Ok(())
}

fn design(cfg: &RunConfig, outputs: &mut RunOutputs) -> Result<()> {
    let model = Model::build(&cfg.scenario(), cfg.seed)?;
    let beam = model.beam(cfg.beam, cfg.dim, cfg.normalization)?;
    let setting = model.setting();
    let crit = evaluate_criteria(&beam, setting.stats, setting.noise, setting.train)?;

    let path = cfg.out.join("design.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["beam", "normalization", "d_total", "blocks", "nmse_trace", "mi_nats", "log_error_volume_ratio"])?;
    let blocks: Vec<String> = beam
        .blocks
        .iter()
        .map(|b| match &b.label {
            crate::beamspace::BlockLabel::Cluster(m) => {
                let ids: Vec<String> = m.iter().map(|i| i.to_string()).collect();
                format!("{}:{}", ids.join("+"), b.cols.len())
            }
            crate::beamspace::BlockLabel::Unified => format!("unified:{}", b.cols.len()),
        })
        .collect();
    let values = [crit.nmse_trace, crit.mutual_info, crit.log_error_volume_ratio];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("design criteria are not finite".into()));
    }
    w.write_record([
        beam.kind.name().to_string(),
        serde_json::to_value(beam.normalization)?.as_str().unwrap_or_default().to_string(),
        beam.dim().to_string(),
        blocks.join(" "),
        format!("{}", values[0]),
        format!("{}", values[1]),
        format!("{}", values[2]),
    ])?;
    w.flush()?;
    outputs.files.push(path);

    let pilots = cfg.out.join("pilots.csv");
    report::write_pilot_csv(&model.pilots, &pilots)?;
    outputs.files.push(pilots);

    if cfg.export_pattern {
        let thetas = report::pattern_grid();
        let rows = beam_pattern(&beam, &model.scenario.array, &thetas)?;
        let path = cfg.out.join(format!("pattern_{}_d{}.csv", beam.kind.name(), beam.dim()));
        report::write_pattern_csv(&thetas, &rows, &path)?;
        outputs.files.push(path);
    }
    Ok(())
}

/// One channel realization and its estimate; also reports the analytic MSE
/// of the chosen estimator.
fn estimate(cfg: &RunConfig, outputs: &mut RunOutputs) -> Result<()> {
    let model = Model::build(&cfg.scenario(), cfg.seed)?;
    let choice = cfg.estimator;
    let setting = if choice == crate::sweep::EstimatorChoice::FullWienerClean {
        model.clean_setting()
    } else {
        model.setting()
    };
    let est = if choice.is_full() {
        estimators::full_wiener(&setting)?
    } else {
        let beam = model.beam(cfg.beam, cfg.dim, cfg.normalization)?;
        estimators::build(choice.kind(), &setting, &beam)?
    };
    for w in &est.warnings {
        log::warn!("{w}");
    }
    // Correlators and LS only estimate the effective channel S^H h_{k,l}.
    let target = if est.w_full.is_some() { Target::Full } else { Target::Effective };
    let (h, y) = synthesize(&setting, NoiseMode::Gaussian, cfg.seed, model.scenario.intended, 0);
    let h = match target {
        Target::Full => h,
        Target::Effective => {
            let hm = crate::linalg::CMat::from_column_slice(setting.num_antennas(), setting.train.cols(), h.as_slice());
            let e = est.beam.s.adjoint() * hm;
            crate::linalg::CVec::from_column_slice(e.as_slice())
        }
    };
    let h_hat = est.apply(&y, target)?;
    let err = (&h - &h_hat).norm_squared() / setting.num_users() as f64;
    let analytic = mse(&setting, &est, target)?;
    if !(err.is_finite() && h_hat.iter().all(|v| v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Numerical("estimate is not finite".into()));
    }

    let path = cfg.out.join("estimate.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["index", "h_re", "h_im", "est_re", "est_im"])?;
    for (i, (a, b)) in h.iter().zip(h_hat.iter()).enumerate() {
        w.write_record([i.to_string(), format!("{}", a.re), format!("{}", a.im), format!("{}", b.re), format!("{}", b.im)])?;
    }
    w.flush()?;
    outputs.files.push(path);

    let path = cfg.out.join("estimate_summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["estimator", "beam", "d_total", "target", "squared_error", "mse_analytic"])?;
    w.write_record([
        choice.name().to_string(),
        est.beam.kind.name().to_string(),
        est.beam.dim().to_string(),
        serde_json::to_value(target)?.as_str().unwrap_or_default().to_string(),
        format!("{err}"),
        format!("{analytic}"),
    ])?;
    w.flush()?;
    outputs.files.push(path);
    Ok(())
}

/// Identity report on the configured scenario's GEB beam, on a set of
/// small full-rank instances and on the scalar case. Fails with a numerical
/// error, after writing the report, if any check fails.
fn identities(cfg: &RunConfig, outputs: &mut RunOutputs) -> Result<()> {
    let mut rows: Vec<(String, IdentityCheck)> = Vec::new();

    let model = Model::build(&cfg.scenario(), cfg.seed)?;
    let beam = model.beam(BeamKind::Geb, cfg.dim, cfg.normalization)?;
    for c in identity_checks(&model.setting(), &beam, IDENTITY_TOL)? {
        rows.push(("scenario".into(), c));
    }
    for (i, n) in [4usize, 5, 6].into_iter().enumerate() {
        let inst = full_rank_instance(cfg.seed.wrapping_add(i as u64), n, 2, 2, 4, 10.0)?;
        let setting = inst.setting();
        let beam = crate::beamspace::build_geb(setting.stats, setting.noise, setting.train, n - 1)?;
        for c in identity_checks(&setting, &beam, IDENTITY_TOL)? {
            rows.push((format!("full_rank_n{n}"), c));
        }
    }
    for snr in [-10.0, 0.0, 10.0, 20.0, 30.0] {
        let inst = scalar_instance(snr)?;
        let setting = inst.setting();
        let est = estimators::full_wiener(&setting)?;
        let value = mse(&setting, &est, Target::Full)?;
        let snr_lin = 10f64.powf(snr / 10.0);
        let expect = 1.0 / (1.0 + snr_lin);
        let rel_err = (value - expect).abs() / expect;
        rows.push((
            format!("scalar_snr{snr}"),
            IdentityCheck { name: "nmse_scalar", closed_form: expect, direct: value, rel_err, pass: rel_err <= 1e-12 },
        ));
    }

    let path = cfg.out.join("identities.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["instance", "check", "closed_form", "direct", "rel_err", "pass"])?;
    for (inst, c) in &rows {
        w.write_record([
            inst.clone(),
            c.name.to_string(),
            format!("{}", c.closed_form),
            format!("{}", c.direct),
            format!("{}", c.rel_err),
            c.pass.to_string(),
        ])?;
    }
    w.flush()?;
    outputs.files.push(path);

    let failed: Vec<String> = rows.iter().filter(|(_, c)| !c.pass).map(|(i, c)| format!("{i}/{}", c.name)).collect();
    if !failed.is_empty() {
        return Err(Error::Numerical(format!("identity checks failed: {}", failed.join(", "))));
    }
    Ok(())
}
