//! Parameter sweeps over dimension, SNR, INR and angular separation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamspace::{evaluate_criteria, BeamKind, Beamspace, CriterionReport, Normalization};
use crate::error::{Error, Result};
use crate::estimators::{self, EstimatorKind, LinearEstimator, Setting, Target};
use crate::evaluation::{monte_carlo_mse, mse, NoiseMode};
use crate::scenario::{separation_scenario, Model, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Dimension,
    SnrDb,
    InrDb,
    SeparationDeg,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Dimension => "dimension",
            Axis::SnrDb => "snr_db",
            Axis::InrDb => "inr_db",
            Axis::SeparationDeg => "separation_deg",
        }
    }
}

/// Estimators selectable in a sweep. The clean variant is the full Wiener
/// filter evaluated with interference removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    RrmmseJoint,
    RrmmseAngle,
    LsAngle,
    CorrRank1,
    CorrGeneral,
    FullWiener,
    FullWienerClean,
}

impl EstimatorChoice {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorChoice::FullWienerClean => "full_wiener_clean",
            other => other.kind().name(),
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorChoice::RrmmseJoint => EstimatorKind::RrmmseJoint,
            EstimatorChoice::RrmmseAngle => EstimatorKind::RrmmseAngle,
            EstimatorChoice::LsAngle => EstimatorKind::LsAngle,
            EstimatorChoice::CorrRank1 => EstimatorKind::CorrRank1,
            EstimatorChoice::CorrGeneral => EstimatorKind::CorrGeneral,
            EstimatorChoice::FullWiener | EstimatorChoice::FullWienerClean => EstimatorKind::FullWiener,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, EstimatorChoice::FullWiener | EstimatorChoice::FullWienerClean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Benchmark {
    pub estimator: EstimatorChoice,
    pub beam: BeamKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub estimators: Vec<EstimatorChoice>,
    pub beams: Vec<BeamKind>,
    /// Beamspace dimension for axes other than `dimension`.
    pub dim: usize,
    pub target: Target,
    /// Optional re-normalization of designed beams before use.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    /// When set, every MSE at a grid point is divided by this pair's value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_to: Option<Benchmark>,
    #[serde(default)]
    pub mc_trials: usize,
}

impl SweepSpec {
    /// MSE versus D ∈ {4, …, 20} for both beam designs, with the
    /// interference-free full-dimensional benchmark.
    pub fn dimension_default() -> Self {
        SweepSpec {
            axis: Axis::Dimension,
            grid: (4..=20).map(f64::from).collect(),
            estimators: vec![EstimatorChoice::RrmmseJoint, EstimatorChoice::RrmmseAngle, EstimatorChoice::FullWienerClean],
            beams: vec![BeamKind::Geb, BeamKind::Dft],
            dim: 8,
            target: Target::Full,
            normalization: None,
            normalize_to: None,
            mc_trials: 0,
        }
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<()> {
        let n = scenario.array.num_elements;
        for &v in &self.grid {
            if !v.is_finite() {
                return Err(Error::Config(format!("grid value {v} is not finite")));
            }
            match self.axis {
                Axis::Dimension => {
                    if v.fract() != 0.0 || v < 1.0 || v > n as f64 {
                        return Err(Error::Config(format!("dimension grid value {v} must be an integer in 1..={n}")));
                    }
                }
                Axis::SeparationDeg => {
                    if v.abs() > 89.0 {
                        return Err(Error::Config(format!("separation {v} must lie in [-89, 89] degrees")));
                    }
                }
                Axis::SnrDb | Axis::InrDb => {}
            }
        }
        if self.axis != Axis::Dimension && (self.dim == 0 || self.dim > n) {
            return Err(Error::Config(format!("dim {} must be in 1..={n}", self.dim)));
        }
        if self.beams.iter().any(|b| matches!(b, BeamKind::Custom | BeamKind::Identity)) {
            return Err(Error::Config("sweep beams must be geb or dft".into()));
        }
        if self.mc_trials == 1 {
            return Err(Error::Config("mc_trials must be 0 or at least 2".into()));
        }
        Ok(())
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub estimator: String,
    pub beam: String,
    pub d_total: usize,
    pub mse_analytic: f64,
    pub mse_mc: Option<f64>,
    pub mc_std: Option<f64>,
    pub mi_nats: f64,
    pub nmse_trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<String>,
}

fn point_scenario(base: &Scenario, axis: Axis, v: f64) -> Result<Scenario> {
    let mut sc = base.clone();
    match axis {
        Axis::Dimension => {}
        Axis::SnrDb => {
            // Keep the interference-to-noise ratio of the base scenario.
            let inr = base_inr(base);
            sc.snr_db = v;
            if let Some(i) = inr {
                sc.set_inr_db(i);
            }
        }
        Axis::InrDb => sc.set_inr_db(v),
        Axis::SeparationDeg => sc = separation_scenario(base, v)?,
    }
    Ok(sc)
}

fn base_inr(sc: &Scenario) -> Option<f64> {
    match &sc.gamma {
        crate::scenario::Gamma::Uniform(g) if *g > 0.0 => Some(sc.snr_db + 10.0 * g.log10()),
        _ => None,
    }
}

#[derive(Clone)]
struct Evaluated {
    mse: f64,
    mc: Option<(f64, f64)>,
    criteria: CriterionReport,
    d_total: usize,
    beam_name: &'static str,
}

fn evaluate(
    model: &Model,
    choice: EstimatorChoice,
    beam: Option<&Beamspace>,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Evaluated> {
    let setting: Setting = if choice == EstimatorChoice::FullWienerClean { model.clean_setting() } else { model.setting() };
    let est: LinearEstimator = match (choice.is_full(), beam) {
        (true, _) => estimators::full_wiener(&setting)?,
        (false, Some(b)) => estimators::build(choice.kind(), &setting, b)?,
        (false, None) => return Err(Error::validation("reduced-rank estimator needs a beam")),
    };
    let value = mse(&setting, &est, spec.target)?;
    let mc = if spec.mc_trials > 0 {
        let r = monte_carlo_mse(&setting, &est, spec.target, NoiseMode::Gaussian, spec.mc_trials, seed, model.scenario.intended)?;
        Some((r.mean, r.std_err))
    } else {
        None
    };
    let criteria = evaluate_criteria(&est.beam, setting.stats, setting.noise, setting.train)?;
    Ok(Evaluated { mse: value, mc, criteria, d_total: est.beam.dim(), beam_name: est.beam.kind.name() })
}

/// Full-dimensional results do not depend on D, so a dimension sweep
/// evaluates them once.
type FullCache = Vec<(EstimatorChoice, std::result::Result<Evaluated, String>)>;

fn cached_or_evaluate(
    cache: &FullCache,
    model: &Model,
    choice: EstimatorChoice,
    beam: Option<&Beamspace>,
    spec: &SweepSpec,
    seed: u64,
) -> Result<Evaluated> {
    match cache.iter().find(|(c, _)| *c == choice) {
        Some((_, Ok(e))) => Ok(e.clone()),
        Some((_, Err(msg))) => Err(Error::Numerical(msg.clone())),
        None => evaluate(model, choice, beam, spec, seed),
    }
}

fn run_point(
    spec: &SweepSpec,
    base: &Scenario,
    shared: Option<&Model>,
    cache: &FullCache,
    v: f64,
    seed: u64,
) -> (Vec<SweepPoint>, Vec<String>) {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    let owned;
    let model = match shared {
        Some(m) => m,
        None => match point_scenario(base, spec.axis, v).and_then(|sc| Model::build(&sc, seed)) {
            Ok(m) => {
                owned = m;
                &owned
            }
            Err(e) => {
                failures.push(format!("{}={v}: {e}", spec.axis.name()));
                return (points, failures);
            }
        },
    };
    let d = if spec.axis == Axis::Dimension { v as usize } else { spec.dim };
    let mut beams: Vec<(BeamKind, Result<Beamspace>)> = Vec::new();
    let mut need: Vec<BeamKind> = spec.beams.clone();
    if let Some(b) = spec.normalize_to {
        if !b.estimator.is_full() && !need.contains(&b.beam) {
            need.push(b.beam);
        }
    }
    for k in need {
        beams.push((k, model.beam(k, d, spec.normalization)));
    }
    let beam_of = |k: BeamKind| beams.iter().find(|(b, _)| *b == k).map(|(_, r)| r);

    let reference = match spec.normalize_to {
        None => Ok(1.0),
        Some(b) => {
            let beam = if b.estimator.is_full() {
                Ok(None)
            } else {
                match beam_of(b.beam) {
                    Some(Ok(bs)) => Ok(Some(bs)),
                    Some(Err(e)) => Err(Error::validation(format!("benchmark beam: {e}"))),
                    None => Err(Error::validation("benchmark beam missing")),
                }
            };
            let spec_no_mc = SweepSpec { mc_trials: 0, ..spec.clone() };
            beam.and_then(|bs| cached_or_evaluate(cache, model, b.estimator, bs, &spec_no_mc, seed)).map(|e| e.mse)
        }
    };
    let reference = match reference {
        Ok(r) if r > 0.0 => r,
        Ok(_) => {
            failures.push(format!("{}={v}: benchmark MSE is zero", spec.axis.name()));
            return (points, failures);
        }
        Err(e) => {
            failures.push(format!("{}={v}: benchmark: {e}", spec.axis.name()));
            return (points, failures);
        }
    };

    for &choice in &spec.estimators {
        let targets: Vec<Option<BeamKind>> =
            if choice.is_full() { vec![None] } else { spec.beams.iter().map(|&b| Some(b)).collect() };
        for bk in targets {
            let beam = match bk {
                None => Ok(None),
                Some(k) => match beam_of(k) {
                    Some(Ok(b)) => Ok(Some(b)),
                    Some(Err(e)) => Err(Error::validation(format!("{} beam: {e}", k.name()))),
                    None => Err(Error::validation("beam missing")),
                },
            };
            match beam.and_then(|b| cached_or_evaluate(cache, model, choice, b, spec, seed)) {
                Ok(e) => points.push(SweepPoint {
                    axis_value: v,
                    estimator: choice.name().to_string(),
                    beam: e.beam_name.to_string(),
                    d_total: e.d_total,
                    mse_analytic: e.mse / reference,
                    mse_mc: e.mc.map(|m| m.0 / reference),
                    mc_std: e.mc.map(|m| m.1 / reference),
                    mi_nats: e.criteria.mutual_info,
                    nmse_trace: e.criteria.nmse_trace,
                }),
                Err(err) => {
                    let bn = bk.map(|b| b.name()).unwrap_or("identity");
                    log::warn!("{}={v} {} on {bn}: {err}", spec.axis.name(), choice.name());
                    failures.push(format!("{}={v} {} on {bn}: {err}", spec.axis.name(), choice.name()));
                }
            }
        }
    }
    (points, failures)
}

/// Runs a sweep. Grid points are evaluated in parallel and merged in grid
/// order; within a point rows follow the estimator list, then the beam list.
pub fn run_sweep(scenario: &Scenario, spec: &SweepSpec, seed: u64) -> Result<SweepResult> {
    spec.validate(scenario)?;
    let shared = if spec.axis == Axis::Dimension { Some(Model::build(scenario, seed)?) } else { None };
    let mut cache = FullCache::new();
    if let (Some(model), false) = (&shared, spec.grid.is_empty()) {
        let no_mc = SweepSpec { mc_trials: 0, ..spec.clone() };
        let listed = spec.estimators.iter().copied().filter(|c| c.is_full()).map(|c| (c, spec));
        let bench = spec.normalize_to.map(|b| b.estimator).filter(|c| c.is_full()).map(|c| (c, &no_mc));
        for (choice, sp) in listed.chain(bench) {
            if cache.iter().all(|(c, _)| *c != choice) {
                cache.push((choice, evaluate(model, choice, None, sp, seed).map_err(|e| e.to_string())));
            }
        }
    }
    let per_point: Vec<(Vec<SweepPoint>, Vec<String>)> = spec
        .grid
        .par_iter()
        .map(|&v| run_point(spec, scenario, shared.as_ref(), &cache, v, seed))
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (p, f) in per_point {
        points.extend(p);
        failures.extend(f);
    }
    Ok(SweepResult { axis: spec.axis, points, failures })
}
