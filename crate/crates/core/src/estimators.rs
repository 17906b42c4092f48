//! Linear channel estimators operating on the beamspace observation
//! z = (I_T ⊗ S^H) y.

use serde::{Deserialize, Serialize};

use crate::array_channel::GroupStatistics;
use crate::beamspace::{q_matrix, BlockLabel, Beamspace};
use crate::error::{Error, Result};
use crate::interference::NoiseCovariance;
use crate::linalg::{self, CMat, CVec};
use crate::training::TrainingMatrices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    RrmmseJoint,
    RrmmseAngle,
    LsAngle,
    CorrRank1,
    CorrGeneral,
    FullWiener,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::RrmmseJoint => "rrmmse_joint",
            EstimatorKind::RrmmseAngle => "rrmmse_angle",
            EstimatorKind::LsAngle => "ls_angle",
            EstimatorKind::CorrRank1 => "corr_rank1",
            EstimatorKind::CorrGeneral => "corr_general",
            EstimatorKind::FullWiener => "full_wiener",
        }
    }
}

/// What an estimator's output is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// The full channel h (length KLN).
    Full,
    /// The effective channel (I_{KL} ⊗ S^H) h (length KLD).
    Effective,
}

/// Second-order model of the intended group's training observation.
#[derive(Debug, Clone, Copy)]
pub struct Setting<'a> {
    pub stats: &'a GroupStatistics,
    pub noise: &'a NoiseCovariance,
    pub train: &'a TrainingMatrices,
}

impl<'a> Setting<'a> {
    pub fn new(stats: &'a GroupStatistics, noise: &'a NoiseCovariance, train: &'a TrainingMatrices) -> Result<Self> {
        if train.num_users != stats.num_users || train.num_mpcs != stats.num_mpcs() {
            return Err(Error::shape(format!(
                "training matrix is for K={} L={}, group has K={} L={}",
                train.num_users,
                train.num_mpcs,
                stats.num_users,
                stats.num_mpcs()
            )));
        }
        if noise.dim() != stats.num_antennas() {
            return Err(Error::shape("noise covariance and channel have different array sizes"));
        }
        Ok(Setting { stats, noise, train })
    }

    pub fn num_users(&self) -> usize {
        self.stats.num_users
    }

    pub fn num_mpcs(&self) -> usize {
        self.stats.num_mpcs()
    }

    pub fn num_antennas(&self) -> usize {
        self.stats.num_antennas()
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    /// (I_K ⊗ E_{L,l}) X^H, the rows of X^H belonging to delay l.
    fn delay_rows(&self, l: usize) -> CMat {
        self.train.delay_selector(&[l]) * self.train.x.adjoint()
    }

    /// Covariance of z: Σ_l ρ_l R_code(l) ⊗ S^H R_l S + I_T ⊗ Q.
    pub fn r_zz(&self, beam: &Beamspace) -> CMat {
        let s = &beam.s;
        let mut r = linalg::kron(&linalg::identity(self.len()), &q_matrix(s, self.noise));
        for l in 0..self.num_mpcs() {
            let sig = (s.adjoint() * &self.stats.covs[l].matrix * s).scale(self.stats.powers[l]);
            r += linalg::kron(&self.train.code_correlation(&[l]), &sig);
        }
        linalg::hermitianize(&r)
    }

    /// Cross-covariance E{t z^H} for the chosen target.
    pub fn r_tz(&self, beam: &Beamspace, target: Target) -> CMat {
        let s = &beam.s;
        let rows = self.num_users() * self.num_mpcs() * target_dim(beam, target);
        let mut r = CMat::zeros(rows, self.len() * beam.dim());
        for l in 0..self.num_mpcs() {
            let cov = self.stats.covs[l].matrix.scale(self.stats.powers[l]);
            let right = match target {
                Target::Full => cov * s,
                Target::Effective => s.adjoint() * cov * s,
            };
            r += linalg::kron(&self.delay_rows(l), &right);
        }
        r
    }

    /// Covariance of the target.
    pub fn r_tt(&self, beam: &Beamspace, target: Target) -> CMat {
        let kl = self.num_users() * self.num_mpcs();
        let m = target_dim(beam, target);
        let mut r = CMat::zeros(kl * m, kl * m);
        for k in 0..self.num_users() {
            for l in 0..self.num_mpcs() {
                let cov = self.stats.covs[l].matrix.scale(self.stats.powers[l]);
                let blk = match target {
                    Target::Full => cov,
                    Target::Effective => beam.s.adjoint() * cov * &beam.s,
                };
                let off = (k * self.num_mpcs() + l) * m;
                r.view_mut((off, off), (m, m)).copy_from(&blk);
            }
        }
        r
    }

    /// Conditional-mean map W = R_tz R_zz^{-1} obtained by a direct solve.
    pub fn wiener_map(&self, beam: &Beamspace, target: Target) -> Result<CMat> {
        let rzz = self.r_zz(beam);
        let rtz = self.r_tz(beam, target);
        Ok(linalg::solve_hpd(&rzz, &rtz.adjoint())?.adjoint())
    }
}

fn target_dim(beam: &Beamspace, target: Target) -> usize {
    match target {
        Target::Full => beam.num_antennas(),
        Target::Effective => beam.dim(),
    }
}

/// A linear estimator t̂ = W z together with the beam that produced z.
#[derive(Debug, Clone)]
pub struct LinearEstimator {
    pub kind: EstimatorKind,
    pub beam: Beamspace,
    /// Map from z (length TD) to the effective channel (length KLD).
    pub w_eff: CMat,
    /// Map from z to the full channel (length KLN), when the estimator has one.
    pub w_full: Option<CMat>,
    pub warnings: Vec<String>,
}

impl LinearEstimator {
    pub fn map(&self, target: Target) -> Result<&CMat> {
        match target {
            Target::Effective => Ok(&self.w_eff),
            Target::Full => self.w_full.as_ref().ok_or_else(|| {
                Error::Unsupported(format!("{} does not estimate the full channel", self.kind.name()))
            }),
        }
    }

    /// Projects an N × T observation onto the beamspace: z = vec(S^H Y).
    pub fn reduce(&self, y: &CMat) -> CVec {
        let z = self.beam.s.adjoint() * y;
        CVec::from_column_slice(z.as_slice())
    }

    pub fn apply(&self, y: &CMat, target: Target) -> Result<CVec> {
        Ok(self.map(target)? * self.reduce(y))
    }

    /// The map written against the unreduced observation y, W (I_T ⊗ S^H).
    pub fn full_observation_map(&self, target: Target, t: usize) -> Result<CMat> {
        let sh = linalg::kron(&linalg::identity(t), &self.beam.s.adjoint());
        Ok(self.map(target)? * sh)
    }
}

fn check_beam(setting: &Setting, beam: &Beamspace) -> Result<()> {
    if beam.num_antennas() != setting.num_antennas() {
        return Err(Error::shape(format!(
            "beamspace has {} rows, array has {} elements",
            beam.num_antennas(),
            setting.num_antennas()
        )));
    }
    Ok(())
}

fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::conditioning("system matrix is singular"))
}

/// Reduced-rank MMSE estimator using the full delay-angle statistics.
pub fn rr_mmse_joint(setting: &Setting, beam: &Beamspace) -> Result<LinearEstimator> {
    check_beam(setting, beam)?;
    let s = &beam.s;
    let q = q_matrix(s, setting.noise);
    let t = setting.len();
    let d = beam.dim();
    let mut system = linalg::identity(t * d);
    let mut left_eff = CMat::zeros(setting.num_users() * setting.num_mpcs() * d, t * d);
    let mut left_full = CMat::zeros(setting.num_users() * setting.num_mpcs() * setting.num_antennas(), t * d);
    for l in 0..setting.num_mpcs() {
        let rl = &setting.stats.covs[l].matrix;
        let rho = setting.stats.powers[l];
        let snr = linalg::solve_hpd(&q, &(s.adjoint() * rl * s).scale(rho))?;
        system += linalg::kron(&setting.train.code_correlation(&[l]), &snr.adjoint());
        let rows = setting.delay_rows(l);
        left_eff += linalg::kron(&rows, &snr.adjoint());
        // ρ_l R_l S Q^{-1} = (Q^{-1} S^H R_l S ρ_l)^H.
        let full_right = linalg::solve_hpd(&q, &(s.adjoint() * rl).scale(rho))?.adjoint();
        left_full += linalg::kron(&rows, &full_right);
    }
    let inv = inverse(&system)?;
    Ok(LinearEstimator {
        kind: EstimatorKind::RrmmseJoint,
        beam: beam.clone(),
        w_eff: left_eff * &inv,
        w_full: Some(left_full * inv),
        warnings: Vec::new(),
    })
}

/// Reduced-rank MMSE estimator that only uses the total spatial covariance
/// Σ_l ρ_l R_l, ignoring how power is split over delays.
pub fn rr_mmse_angle(setting: &Setting, beam: &Beamspace) -> Result<LinearEstimator> {
    check_beam(setting, beam)?;
    let s = &beam.s;
    let q = q_matrix(s, setting.noise);
    let t = setting.len();
    let d = beam.dim();
    let r_sum = &setting.stats.r_sum.matrix;
    let snr = linalg::solve_hpd(&q, &(s.adjoint() * r_sum * s))?;
    let system = linalg::kron(&setting.train.total_code_correlation(), &snr.adjoint()) + linalg::identity(t * d);
    let inv = inverse(&system)?;
    let xh = setting.train.x.adjoint();
    let full_right = linalg::solve_hpd(&q, &(s.adjoint() * r_sum))?.adjoint();
    Ok(LinearEstimator {
        kind: EstimatorKind::RrmmseAngle,
        beam: beam.clone(),
        w_eff: linalg::kron(&xh, &snr.adjoint()) * &inv,
        w_full: Some(linalg::kron(&xh, &full_right) * inv),
        warnings: Vec::new(),
    })
}

/// Least-squares inverse of a training matrix: (X^H X)^{-1} X^H for full
/// column rank, X^H (X X^H)^{-1} for full row rank, else the pseudoinverse.
fn ls_inverse(x: &CMat, warnings: &mut Vec<String>, what: &str) -> Result<CMat> {
    let (t, m) = x.shape();
    let r = linalg::rank(x);
    if r == m && m > 0 {
        let g = linalg::hermitianize(&(x.adjoint() * x));
        return linalg::solve_hpd(&g, &x.adjoint());
    }
    if r == t && t > 0 {
        let g = linalg::hermitianize(&(x * x.adjoint()));
        return Ok(linalg::solve_hpd(&g, x)?.adjoint());
    }
    warnings.push(format!("{what}: training matrix is rank deficient, using the pseudoinverse"));
    log::warn!("{what}: training matrix is rank deficient, using the pseudoinverse");
    Ok(linalg::pinv(x)?.0)
}

/// Pseudoinverse of X restricted to a set of delays. Columns outside the
/// set are zero and give zero rows.
fn masked_pinv(train: &TrainingMatrices, delays: &[usize]) -> Result<CMat> {
    let idx = train.columns_for(delays);
    let sub = train.x.select_columns(&idx);
    let p = linalg::pinv(&sub)?.0;
    let mut out = CMat::zeros(train.cols(), train.len());
    for (r, &i) in idx.iter().enumerate() {
        out.set_row(i, &p.row(r));
    }
    Ok(out)
}

/// Least-squares estimate of the effective channel from z.
pub fn ls_angle(setting: &Setting, beam: &Beamspace) -> Result<LinearEstimator> {
    check_beam(setting, beam)?;
    let mut warnings = Vec::new();
    let xp = ls_inverse(&setting.train.x, &mut warnings, "ls_angle")?;
    Ok(LinearEstimator {
        kind: EstimatorKind::LsAngle,
        beam: beam.clone(),
        w_eff: linalg::kron(&xp, &linalg::identity(beam.dim())),
        w_full: None,
        warnings,
    })
}

/// Correlator that observes every MPC through exactly one beam column.
/// The beam must consist of L single-MPC blocks of width one.
pub fn correlator_rank1(setting: &Setting, beam: &Beamspace) -> Result<LinearEstimator> {
    check_beam(setting, beam)?;
    let l_count = setting.num_mpcs();
    if beam.dim() != l_count {
        return Err(Error::Unsupported(format!(
            "rank-one correlator needs D = L = {l_count}, beam has D = {}",
            beam.dim()
        )));
    }
    let mut col_of = vec![None; l_count];
    for b in &beam.blocks {
        match (&b.label, b.cols.as_slice()) {
            (BlockLabel::Cluster(m), [j]) if m.len() == 1 && col_of[m[0]].is_none() => col_of[m[0]] = Some(*j),
            _ => {
                return Err(Error::Unsupported(
                    "rank-one correlator needs one single-column block per MPC".into(),
                ))
            }
        }
    }
    let d = beam.dim();
    let mut w = CMat::zeros(setting.train.cols() * d, setting.len() * d);
    for (l, col) in col_of.iter().enumerate() {
        let j = col.ok_or_else(|| Error::Unsupported(format!("MPC {l} has no beam column")))?;
        w += linalg::kron(&masked_pinv(setting.train, &[l])?, &linalg::selector(d, &[j]));
    }
    Ok(LinearEstimator { kind: EstimatorKind::CorrRank1, beam: beam.clone(), w_eff: w, w_full: None, warnings: Vec::new() })
}

/// Correlator for arbitrary MPC clusters and column sets.
pub fn correlator_general(setting: &Setting, beam: &Beamspace) -> Result<LinearEstimator> {
    check_beam(setting, beam)?;
    let d = beam.dim();
    let mut w = CMat::zeros(setting.train.cols() * d, setting.len() * d);
    for (mpcs, cols) in beam.cluster_columns(setting.stats) {
        if cols.is_empty() {
            continue;
        }
        w += linalg::kron(&masked_pinv(setting.train, &mpcs)?, &linalg::selector(d, &cols));
    }
    Ok(LinearEstimator { kind: EstimatorKind::CorrGeneral, beam: beam.clone(), w_eff: w, w_full: None, warnings: Vec::new() })
}

/// Largest NT for which the unreduced Wiener filter is formed explicitly.
pub const FULL_WIENER_MAX_DIM: usize = 8192;

/// Exact LMMSE estimator on the unreduced observation. Pass a white-noise
/// covariance to obtain the interference-free benchmark.
pub fn full_wiener(setting: &Setting) -> Result<LinearEstimator> {
    let n = setting.num_antennas();
    let t = setting.len();
    if n * t > FULL_WIENER_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "full Wiener filter with NT = {} exceeds the limit {FULL_WIENER_MAX_DIM}",
            n * t
        )));
    }
    let beam = Beamspace::identity(n);
    let w = setting.wiener_map(&beam, Target::Full)?;
    Ok(LinearEstimator { kind: EstimatorKind::FullWiener, beam, w_eff: w.clone(), w_full: Some(w), warnings: Vec::new() })
}

/// Builds the estimator of the given kind on `beam` (ignored for the full
/// Wiener filter).
pub fn build(kind: EstimatorKind, setting: &Setting, beam: &Beamspace) -> Result<LinearEstimator> {
    match kind {
        EstimatorKind::RrmmseJoint => rr_mmse_joint(setting, beam),
        EstimatorKind::RrmmseAngle => rr_mmse_angle(setting, beam),
        EstimatorKind::LsAngle => ls_angle(setting, beam),
        EstimatorKind::CorrRank1 => correlator_rank1(setting, beam),
        EstimatorKind::CorrGeneral => correlator_general(setting, beam),
        EstimatorKind::FullWiener => full_wiener(setting),
    }
}
