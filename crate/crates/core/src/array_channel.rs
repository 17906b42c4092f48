//! Array geometry, angular-sector covariances and the per-group channel model.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ZERO};
use crate::rng::complex_normal_vec;

/// Uniform linear array; spacing is in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub num_elements: usize,
    pub spacing: f64,
}

impl ArrayGeometry {
    pub fn ula(num_elements: usize, spacing: f64) -> Result<Self> {
        let g = ArrayGeometry { num_elements, spacing };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_elements == 0 {
            return Err(Error::domain("array needs at least one element"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::domain(format!("element spacing {} must be positive", self.spacing)));
        }
        Ok(())
    }
}

/// Interval of angles of arrival in degrees, lo ≤ hi, inside [−90, 90].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct AngularSector {
    lo: f64,
    hi: f64,
}

impl AngularSector {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < -90.0 || hi > 90.0 {
            return Err(Error::domain(format!("invalid angular sector [{lo}, {hi}]")));
        }
        Ok(AngularSector { lo, hi })
    }

    pub fn centered(center: f64, width: f64) -> Result<Self> {
        Self::new(center - width / 2.0, center + width / 2.0)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl TryFrom<[f64; 2]> for AngularSector {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        AngularSector::new(v[0], v[1])
    }
}

impl From<AngularSector> for [f64; 2] {
    fn from(s: AngularSector) -> Self {
        [s.lo, s.hi]
    }
}

/// Array response a(θ) with unit-modulus entries, so ‖a‖² = N.
pub fn steering_vector(geom: &ArrayGeometry, theta_deg: f64) -> CVec {
    let phase = 2.0 * PI * geom.spacing * theta_deg.to_radians().sin();
    CVec::from_fn(geom.num_elements, |n, _| C64::from_polar(1.0, phase * n as f64))
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Trace-one covariance of a uniform power angular spectrum over a sector.
///
/// Sectors narrower than 1e-9 degrees collapse to the point-source matrix
/// a a^H / N and the returned flag is set.
pub fn sector_covariance(
    geom: &ArrayGeometry,
    sector: &AngularSector,
    quad_points: usize,
) -> Result<(CMat, bool)> {
    geom.validate()?;
    let n = geom.num_elements;
    if sector.width() < 1e-9 {
        let a = steering_vector(geom, sector.center());
        return Ok(((&a * a.adjoint()).scale(1.0 / n as f64), true));
    }
    if quad_points < 2 * n {
        return Err(Error::domain(format!(
            "quadrature needs at least 2N = {} points, got {quad_points}",
            2 * n
        )));
    }
    let (nodes, weights) = gauss_legendre(quad_points);
    let half = 0.5 * sector.width();
    let mid = sector.center();
    // Toeplitz structure: only the first column is integrated.
    let mut col = vec![ZERO; n];
    for (&x, &wt) in nodes.iter().zip(&weights) {
        let theta = mid + half * x;
        let phase = 2.0 * PI * geom.spacing * theta.to_radians().sin();
        for (m, entry) in col.iter_mut().enumerate() {
            *entry += C64::from_polar(0.5 * wt, phase * m as f64);
        }
    }
    let r = CMat::from_fn(n, n, |i, j| {
        if i >= j {
            col[i - j] / n as f64
        } else {
            col[j - i].conj() / n as f64
        }
    });
    Ok((r, false))
}

/// Reduced-rank model of a spatial covariance.
///
/// `matrix` is rebuilt from the retained eigenpairs, whose eigenvalues are
/// rescaled to sum to one so the model stays trace-normalized. The matrix
/// before truncation is kept in `untruncated` for callers that need to rank
/// directions outside the retained subspace.
#[derive(Debug, Clone)]
pub struct SpatialCovariance {
    pub matrix: CMat,
    pub eigvecs: CMat,
    pub eigvals: Vec<f64>,
    pub untruncated: CMat,
}

impl SpatialCovariance {
    /// Keeps the smallest number of leading eigenpairs whose energy reaches
    /// `fraction` of the trace, or exactly `rank_override` of them.
    pub fn truncated(r: &CMat, fraction: f64, rank_override: Option<usize>) -> Result<Self> {
        let n = r.nrows();
        if !r.is_square() || n == 0 {
            return Err(Error::shape("covariance must be a non-empty square matrix"));
        }
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::domain(format!("energy fraction {fraction} outside (0, 1]")));
        }
        let herm_err = linalg::rel_diff(&r.adjoint(), r);
        if herm_err > 1e-9 {
            return Err(Error::domain(format!("covariance is not Hermitian (rel. asymmetry {herm_err:e})")));
        }
        let (vals, vecs) = linalg::hermitian_eig(r)?;
        let top = vals[0].max(0.0);
        if vals[n - 1] < -1e-9 * top.max(1.0) {
            return Err(Error::domain(format!(
                "covariance is not positive semidefinite (eigenvalue {:e})",
                vals[n - 1]
            )));
        }
        let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
        if total <= 0.0 {
            return Err(Error::domain("covariance has zero trace"));
        }
        let positive = vals.iter().take_while(|&&v| v > 1e-14 * top).count().max(1);
        let rank = match rank_override {
            Some(0) => return Err(Error::domain("rank override must be at least 1")),
            Some(k) if k > positive => {
                return Err(Error::domain(format!(
                    "rank override {k} exceeds numerical rank {positive}"
                )))
            }
            Some(k) => k,
            None => {
                let target = fraction * total * (1.0 - 1e-12);
                let mut acc = 0.0;
                let mut k = 0;
                while k < positive {
                    acc += vals[k];
                    k += 1;
                    if acc >= target {
                        break;
                    }
                }
                k
            }
        };
        let kept: f64 = vals[..rank].iter().sum();
        let eigvals: Vec<f64> = vals[..rank].iter().map(|v| v / kept).collect();
        let eigvecs = vecs.columns(0, rank).into_owned();
        let matrix = model_matrix(&eigvecs, &eigvals);
        let untruncated = r.scale(1.0 / total);
        Ok(SpatialCovariance { matrix, eigvecs, eigvals, untruncated })
    }

    /// Wraps a covariance without discarding any direction above round-off.
    pub fn exact(r: &CMat) -> Result<Self> {
        Self::truncated(r, 1.0, None)
    }

    pub fn rank(&self) -> usize {
        self.eigvals.len()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn model_matrix(u: &CMat, vals: &[f64]) -> CMat {
    let mut scaled = u.clone();
    for (j, &v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    linalg::hermitianize(&(&scaled * u.adjoint()))
}

/// One multipath component of a group's channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcSpec {
    pub delay: usize,
    pub power: f64,
    pub sector: AngularSector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_override: Option<usize>,
}

/// A group of co-located users sharing second-order channel statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub id: u32,
    pub num_users: usize,
    pub mpcs: Vec<MpcSpec>,
}

impl GroupSpec {
    /// Group whose MPC powers are all equal.
    pub fn uniform(id: u32, num_users: usize, sectors: &[AngularSector]) -> Self {
        let p = 1.0 / sectors.len() as f64;
        let mpcs = sectors
            .iter()
            .enumerate()
            .map(|(delay, &sector)| MpcSpec { delay, power: p, sector, rank_override: None })
            .collect();
        GroupSpec { id, num_users, mpcs }
    }

    pub fn num_mpcs(&self) -> usize {
        self.mpcs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::domain(format!("group {} has no users", self.id)));
        }
        if self.mpcs.is_empty() {
            return Err(Error::domain(format!("group {} has no multipath components", self.id)));
        }
        for (l, m) in self.mpcs.iter().enumerate() {
            if m.delay != l {
                return Err(Error::validation(format!(
                    "group {}: MPC {l} has delay {}, delays must be 0..L-1 in order",
                    self.id, m.delay
                )));
            }
            if !(m.power > 0.0 && m.power.is_finite()) {
                return Err(Error::domain(format!("group {}: MPC {l} power must be positive", self.id)));
            }
        }
        let total: f64 = self.mpcs.iter().map(|m| m.power).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "group {}: power delay profile sums to {total}, expected 1",
                self.id
            )));
        }
        Ok(())
    }

    /// Partition of the MPC indices into runs that share an identical sector
    /// and rank override. Such MPCs have identical spatial covariances.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (l, m) in self.mpcs.iter().enumerate() {
            let hit = out.iter_mut().find(|cl| {
                let first = &self.mpcs[cl[0]];
                first.sector == m.sector && first.rank_override == m.rank_override
            });
            match hit {
                Some(cl) => cl.push(l),
                None => out.push(vec![l]),
            }
        }
        out
    }
}

/// Settings that control how sector covariances are discretized and truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceModel {
    pub quad_points: usize,
    pub energy_fraction: f64,
}

impl CovarianceModel {
    pub fn for_array(geom: &ArrayGeometry) -> Self {
        CovarianceModel { quad_points: (4 * geom.num_elements).max(64), energy_fraction: 0.999 }
    }
}

/// Second-order statistics of one group.
#[derive(Debug, Clone)]
pub struct GroupStatistics {
    pub num_users: usize,
    pub powers: Vec<f64>,
    pub covs: Vec<SpatialCovariance>,
    /// Σ_l ρ_l R_l, built from the reduced-rank models.
    pub r_sum: SpatialCovariance,
    pub clusters: Vec<Vec<usize>>,
}

pub fn group_statistics(
    geom: &ArrayGeometry,
    group: &GroupSpec,
    model: &CovarianceModel,
) -> Result<GroupStatistics> {
    group.validate()?;
    let mut covs: Vec<SpatialCovariance> = Vec::with_capacity(group.num_mpcs());
    for (l, m) in group.mpcs.iter().enumerate() {
        let reuse = group.mpcs[..l]
            .iter()
            .position(|p| p.sector == m.sector && p.rank_override == m.rank_override);
        let cov = match reuse {
            Some(j) => covs[j].clone(),
            None => {
                let (r, degenerate) = sector_covariance(geom, &m.sector, model.quad_points)?;
                if degenerate {
                    log::warn!("group {} MPC {l}: degenerate sector treated as a point source", group.id);
                }
                SpatialCovariance::truncated(&r, model.energy_fraction, m.rank_override)?
            }
        };
        covs.push(cov);
    }
    let powers: Vec<f64> = group.mpcs.iter().map(|m| m.power).collect();
    from_parts(group.num_users, powers, covs, group.clusters())
}

/// Assembles group statistics from already-built covariances.
pub fn from_parts(
    num_users: usize,
    powers: Vec<f64>,
    covs: Vec<SpatialCovariance>,
    clusters: Vec<Vec<usize>>,
) -> Result<GroupStatistics> {
    if powers.len() != covs.len() || covs.is_empty() {
        return Err(Error::shape("one covariance per MPC power is required"));
    }
    let n = covs[0].dim();
    if covs.iter().any(|r| r.dim() != n) {
        return Err(Error::shape("covariances have different dimensions"));
    }
    let mut model = CMat::zeros(n, n);
    let mut full = CMat::zeros(n, n);
    for (r, &p) in covs.iter().zip(&powers) {
        model += r.matrix.scale(p);
        full += r.untruncated.scale(p);
    }
    let mut r_sum = SpatialCovariance::exact(&model)?;
    r_sum.untruncated = full;
    Ok(GroupStatistics { num_users, powers, covs, r_sum, clusters })
}

impl GroupStatistics {
    pub fn num_mpcs(&self) -> usize {
        self.covs.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.covs[0].dim()
    }

    /// Σ_l r_l, the number of KLT coefficients per user.
    pub fn total_rank(&self) -> usize {
        self.covs.iter().map(|r| r.rank()).sum()
    }

    /// Σ_{l ∈ cluster} ρ_l R_l.
    pub fn cluster_cov(&self, cluster: &[usize]) -> CMat {
        let n = self.num_antennas();
        cluster
            .iter()
            .fold(CMat::zeros(n, n), |acc, &l| acc + self.covs[l].matrix.scale(self.powers[l]))
    }

    pub fn cluster_cov_untruncated(&self, cluster: &[usize]) -> CMat {
        let n = self.num_antennas();
        cluster
            .iter()
            .fold(CMat::zeros(n, n), |acc, &l| acc + self.covs[l].untruncated.scale(self.powers[l]))
    }

    /// Covariance of one user's stacked channel [h_0; …; h_{L−1}]:
    /// block-diagonal with blocks ρ_l R_l.
    pub fn user_cov(&self) -> CMat {
        let n = self.num_antennas();
        let l = self.num_mpcs();
        let mut out = CMat::zeros(n * l, n * l);
        for (i, r) in self.covs.iter().enumerate() {
            out.view_mut((i * n, i * n), (n, n)).copy_from(&r.matrix.scale(self.powers[i]));
        }
        out
    }

    /// Covariance of the whole group channel h = [f_1; …; f_K].
    pub fn full_cov(&self) -> CMat {
        linalg::kron(&linalg::identity(self.num_users), &self.user_cov())
    }

    /// Per-user KLT factor V = blkdiag(√ρ_l U_l Λ_l^{1/2}), size LN × Σr.
    pub fn klt_factor(&self) -> CMat {
        let n = self.num_antennas();
        let l = self.num_mpcs();
        let r = self.total_rank();
        let mut v = CMat::zeros(n * l, r);
        let mut col = 0;
        for (i, cov) in self.covs.iter().enumerate() {
            for (j, &lam) in cov.eigvals.iter().enumerate() {
                let s = (self.powers[i] * lam).sqrt();
                v.view_mut((i * n, col), (n, 1)).copy_from(&cov.eigvecs.column(j).scale(s));
                col += 1;
            }
        }
        v
    }

    /// Υ_U = I_K ⊗ V, mapping KLT coefficients to the group channel.
    pub fn klt_operator(&self) -> CMat {
        linalg::kron(&linalg::identity(self.num_users), &self.klt_factor())
    }

    /// Draws one channel realization h = Υ_U c with c ~ CN(0, I).
    pub fn sample_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let v = self.klt_factor();
        let r = v.ncols();
        let n = v.nrows();
        let mut h = CVec::zeros(n * self.num_users);
        for k in 0..self.num_users {
            let coeff = complex_normal_vec(rng, r);
            h.rows_mut(k * n, n).copy_from(&(&v * coeff));
        }
        h
    }
}

/// Builds statistics directly from covariance matrices (used for synthetic
/// instances where the covariances do not come from angular sectors).
pub fn statistics_from_matrices(
    num_users: usize,
    powers: &[f64],
    mats: &[CMat],
    fraction: f64,
) -> Result<GroupStatistics> {
    let covs = mats
        .iter()
        .map(|m| {
            let t = linalg::trace_re(m);
            if t <= 0.0 {
                return Err(Error::domain("covariance with non-positive trace"));
            }
            SpatialCovariance::truncated(&m.scale(1.0 / t), fraction, None)
        })
        .collect::<Result<Vec<_>>>()?;
    let clusters = (0..mats.len()).map(|l| vec![l]).collect();
    from_parts(num_users, powers.to_vec(), covs, clusters)
}

/// Point-source covariance a(θ) a(θ)^H / N.
pub fn point_covariance(geom: &ArrayGeometry, theta_deg: f64) -> CMat {
    let a = steering_vector(geom, theta_deg);
    (&a * a.adjoint()).scale(1.0 / geom.num_elements as f64)
}

/// Diagonal loading helper: R + ε I.
pub fn loaded(r: &CMat, eps: f64) -> CMat {
    r + linalg::identity(r.nrows()).scale(eps)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // ∫ x^12 over [−1, 1] = 2/13, exact for 7 nodes.
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((v - 2.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn broadside_half_wavelength_steering() {
        let g = ArrayGeometry::ula(4, 0.5).unwrap();
        let a = steering_vector(&g, 0.0);
        assert!(a.iter().all(|z| (z - c(1.0)).norm() < 1e-15));
        let e = steering_vector(&g, 90.0);
        let expect = [1.0, -1.0, 1.0, -1.0];
        for (z, s) in e.iter().zip(expect) {
            assert!((z - c(s)).norm() < 1e-12);
        }
    }

    #[test]
    fn sector_covariance_is_trace_one_toeplitz_psd() {
        let g = ArrayGeometry::ula(16, 0.5).unwrap();
        let s = AngularSector::new(-10.0, 5.0).unwrap();
        let (r, deg) = sector_covariance(&g, &s, 64).unwrap();
        assert!(!deg);
        assert!((linalg::trace_re(&r) - 1.0).abs() < 1e-12);
        assert!(linalg::rel_diff(&r.adjoint(), &r) < 1e-15);
        let (lo, _) = linalg::eig_extremes(&r).unwrap();
        assert!(lo > -1e-12);
        assert!((r[(3, 1)] - r[(5, 3)]).norm() < 1e-14);
    }

    #[test]
    fn sector_covariance_has_flat_diagonal() {
        // Over the full half-plane with half-wavelength spacing, off-diagonal
        // entries are Bessel values J0(π m) which are small but not zero; the
        // diagonal must be exactly 1/N.
        let g = ArrayGeometry::ula(4, 0.5).unwrap();
        let s = AngularSector::new(-90.0, 90.0).unwrap();
        let (r, _) = sector_covariance(&g, &s, 2000).unwrap();
        for i in 0..4 {
            assert!((r[(i, i)].re - 0.25).abs() < 1e-13);
        }
    }

    #[test]
    fn truncation_rank_and_renormalization() {
        let vals = [0.6, 0.3, 0.09, 0.01];
        let r = linalg::real_diagonal(&vals);
        let m = SpatialCovariance::truncated(&r, 0.95, None).unwrap();
        assert_eq!(m.rank(), 3);
        let kept: f64 = m.eigvals.iter().sum();
        assert!((kept - 1.0).abs() < 1e-14);
        assert!((m.eigvals[0] - 0.6 / 0.99).abs() < 1e-14);
        assert_eq!(SpatialCovariance::truncated(&r, 1.0, None).unwrap().rank(), 4);
        let id = linalg::identity(5).scale(0.2);
        assert_eq!(SpatialCovariance::truncated(&id, 1.0, None).unwrap().rank(), 5);
    }

    #[test]
    fn non_psd_input_is_rejected() {
        let r = linalg::real_diagonal(&[1.0, -0.1]);
        assert!(matches!(SpatialCovariance::truncated(&r, 0.9, None), Err(Error::Domain(_))));
    }

    #[test]
    fn unnormalized_pdp_is_rejected() {
        let s = AngularSector::new(0.0, 1.0).unwrap();
        let mut g = GroupSpec::uniform(0, 1, &[s, s]);
        g.mpcs[1].power = 0.6;
        assert!(matches!(g.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn clusters_merge_identical_sectors() {
        let a = AngularSector::new(-1.0, 1.0).unwrap();
        let b = AngularSector::new(5.0, 7.0).unwrap();
        let g = GroupSpec::uniform(0, 2, &[a, a, b]);
        assert_eq!(g.clusters(), vec![vec![0, 1], vec![2]]);
    }
}
