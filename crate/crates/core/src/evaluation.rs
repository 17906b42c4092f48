//! Analytic error covariances, design-criterion identities and Monte Carlo
//! checks for linear estimators.

use rayon::prelude::*;

use crate::beamspace::{build_f, criteria, Beamspace, CriterionReport};
use crate::error::{Error, Result};
use crate::estimators::{LinearEstimator, Setting, Target};
use crate::interference::{sample_explicit, Interferer};
use crate::linalg::{self, CMat, CVec};
use crate::rng;

/// Error covariance of the conditional-mean estimator on the beam's
/// observation: R_tt − R_tz R_zz^{-1} R_zt.
pub fn mmse_error_cov(setting: &Setting, beam: &Beamspace, target: Target) -> Result<CMat> {
    let rzz = setting.r_zz(beam);
    let rtz = setting.r_tz(beam, target);
    let g = linalg::solve_hpd(&rzz, &rtz.adjoint())?;
    Ok(linalg::hermitianize(&(setting.r_tt(beam, target) - &rtz * g)))
}

/// Error covariance of an arbitrary linear estimator, written as the MMSE
/// error plus the excess (W − W_mmse) R_zz (W − W_mmse)^H.
pub fn error_cov(setting: &Setting, est: &LinearEstimator, target: Target) -> Result<CMat> {
    let w = est.map(target)?;
    let w_mmse = setting.wiener_map(&est.beam, target)?;
    let delta = w - w_mmse;
    let excess = &delta * setting.r_zz(&est.beam) * delta.adjoint();
    Ok(linalg::hermitianize(&(mmse_error_cov(setting, &est.beam, target)? + excess)))
}

/// Same quantity expanded directly: R_tt − W R_zt − R_tz W^H + W R_zz W^H.
pub fn error_cov_direct(setting: &Setting, est: &LinearEstimator, target: Target) -> Result<CMat> {
    let w = est.map(target)?;
    let rtz = setting.r_tz(&est.beam, target);
    let cross = w * rtz.adjoint();
    let r = setting.r_tt(&est.beam, target) - &cross - cross.adjoint() + w * setting.r_zz(&est.beam) * w.adjoint();
    Ok(linalg::hermitianize(&r))
}

/// Analytic MSE per user, Tr(R_e) / K.
pub fn mse(setting: &Setting, est: &LinearEstimator, target: Target) -> Result<f64> {
    let r = error_cov(setting, est, target)?;
    let v = linalg::trace_re(&r) / setting.num_users() as f64;
    if !v.is_finite() {
        return Err(Error::Numerical(format!("{} produced a non-finite MSE", est.kind.name())));
    }
    Ok(v)
}

/// Quantities computed without going through F, to cross-check the
/// eigenvalue formulas.
#[derive(Debug, Clone, Copy)]
pub struct DirectCriteria {
    /// Trace of I − Ψ^H R_zz^{-1} Ψ with Ψ the covariance between z and the
    /// KLT coefficients.
    pub nmse_trace: f64,
    /// log det R_zz − log det(I_T ⊗ Q).
    pub mutual_info: f64,
    /// log det of the MMSE error covariance of the full channel, when that
    /// covariance is non-singular.
    pub log_det_error: Option<f64>,
    /// log det of the channel covariance, when non-singular.
    pub log_det_channel: Option<f64>,
}

pub fn direct_criteria(setting: &Setting, beam: &Beamspace) -> Result<DirectCriteria> {
    let s = &beam.s;
    let t = setting.len();
    let rzz = setting.r_zz(beam);
    // Ψ = (X ⊗ S^H) Υ_U.
    let psi = linalg::kron(&setting.train.x, &s.adjoint()) * setting.stats.klt_operator();
    let g = linalg::solve_hpd(&rzz, &psi)?;
    let m = psi.ncols();
    let err = linalg::identity(m) - psi.adjoint() * g;
    let q = crate::beamspace::q_matrix(s, setting.noise);
    let mutual_info = linalg::logdet_hpd(&rzz)? - t as f64 * linalg::logdet_hpd(&q)?;
    let full_rank = setting.stats.total_rank() == setting.num_mpcs() * setting.num_antennas();
    let (log_det_error, log_det_channel) = if full_rank {
        let re = mmse_error_cov(setting, beam, Target::Full)?;
        let rh = setting.r_tt(beam, Target::Full);
        (Some(linalg::logdet_hpd(&re)?), Some(linalg::logdet_hpd(&rh)?))
    } else {
        (None, None)
    };
    Ok(DirectCriteria { nmse_trace: linalg::trace_re(&err), mutual_info, log_det_error, log_det_channel })
}

/// Criteria from the eigenvalues of F.
pub fn spectral_criteria(setting: &Setting, beam: &Beamspace) -> Result<CriterionReport> {
    let f = build_f(beam, setting.stats, setting.noise, setting.train)?;
    Ok(criteria(&f.kappa, setting.num_users() * setting.stats.total_rank()))
}

/// How interference is generated in Monte Carlo trials.
#[derive(Debug, Clone, Copy)]
pub enum NoiseMode<'a> {
    /// Gaussian with covariance R_η.
    Gaussian,
    /// Explicit interfering channels and data plus white noise.
    Explicit { interferers: &'a [Interferer], energy: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub mean: f64,
    /// Standard error of the mean.
    pub std_err: f64,
    pub trials: usize,
}

/// One synthetic training observation Y (N × T) and the channel h.
pub fn synthesize(setting: &Setting, mode: NoiseMode, seed: u64, group: u32, trial: u64) -> (CVec, CMat) {
    let mut g = rng::stream(seed, group, trial);
    let h = setting.stats.sample_channel(&mut g);
    let n = setting.num_antennas();
    let kl = setting.train.cols();
    let hmat = CMat::from_column_slice(n, kl, h.as_slice());
    let clean = &hmat * setting.train.x.transpose();
    let noise = match mode {
        NoiseMode::Gaussian => setting.noise.sample(&mut g, setting.len()),
        NoiseMode::Explicit { interferers, energy } => {
            sample_explicit(&mut g, interferers, energy, setting.noise.n0, n, setting.len())
        }
    };
    (h, clean + noise)
}

/// Empirical MSE per user of an estimator over independent trials.
///
/// Trials are drawn from streams keyed by (seed, group, trial) and summed in
/// trial order, so the result is identical for any number of threads.
pub fn monte_carlo_mse(
    setting: &Setting,
    est: &LinearEstimator,
    target: Target,
    mode: NoiseMode,
    trials: usize,
    seed: u64,
    group: u32,
) -> Result<McResult> {
    if trials < 2 {
        return Err(Error::domain("Monte Carlo needs at least two trials"));
    }
    let w = est.map(target)?;
    let n = setting.num_antennas();
    let kl = setting.train.cols();
    let k = setting.num_users() as f64;
    let errs: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let (h, y) = synthesize(setting, mode, seed, group, trial);
            let est_t = w * est.reduce(&y);
            let truth = match target {
                Target::Full => h,
                Target::Effective => {
                    let hm = CMat::from_column_slice(n, kl, h.as_slice());
                    let e = est.beam.s.adjoint() * hm;
                    CVec::from_column_slice(e.as_slice())
                }
            };
            (truth - est_t).norm_squared() / k
        })
        .collect();
    let m = trials as f64;
    let mean = errs.iter().sum::<f64>() / m;
    let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let res = McResult { mean, std_err: (var / m).sqrt(), trials };
    if !(res.mean.is_finite() && res.std_err.is_finite()) {
        return Err(Error::Numerical("Monte Carlo produced a non-finite error".into()));
    }
    Ok(res)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Outcome of comparing one closed-form criterion with its direct value.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub closed_form: f64,
    pub direct: f64,
    pub rel_err: f64,
    pub pass: bool,
}

fn compare(name: &'static str, closed_form: f64, direct: f64, tol: f64) -> IdentityCheck {
    let rel_err = (closed_form - direct).abs() / direct.abs().max(1e-300);
    IdentityCheck { name, closed_form, direct, rel_err, pass: rel_err <= tol }
}

/// Checks the determinant, normalized-MSE and mutual-information formulas
/// against direct evaluation. The determinant identity is compared in the
/// log domain (so `rel_err` is the relative error of the determinant) and
/// is skipped when the channel covariance is singular.
pub fn identity_checks(setting: &Setting, beam: &Beamspace, tol: f64) -> Result<Vec<IdentityCheck>> {
    let spec = spectral_criteria(setting, beam)?;
    let direct = direct_criteria(setting, beam)?;
    let mut out = vec![
        compare("nmse_trace", spec.nmse_trace, direct.nmse_trace, tol),
        compare("mutual_info", spec.mutual_info, direct.mutual_info, tol),
    ];
    if let (Some(le), Some(lh)) = (direct.log_det_error, direct.log_det_channel) {
        let closed = lh + spec.log_error_volume_ratio;
        let err = (closed - le).abs();
        out.push(IdentityCheck { name: "error_volume", closed_form: closed, direct: le, rel_err: err, pass: err <= tol });
    }
    Ok(out)
}
