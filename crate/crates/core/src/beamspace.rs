//! Beamspace (spatial compression) matrices and the SNR criteria used to
//! design and compare them.

use serde::{Deserialize, Serialize};

use crate::array_channel::{steering_vector, ArrayGeometry, GroupStatistics};
use crate::error::{Error, Result};
use crate::interference::NoiseCovariance;
use crate::linalg::{self, CMat, CVec, C64};
use crate::training::TrainingMatrices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamKind {
    /// Generalized eigenbeams of (cluster covariance, R_η).
    Geb,
    /// Dominant eigenvectors of the group's total covariance.
    Dft,
    /// No compression, S = I_N.
    Identity,
    Custom,
}

impl BeamKind {
    pub fn name(&self) -> &'static str {
        match self {
            BeamKind::Geb => "geb",
            BeamKind::Dft => "dft",
            BeamKind::Identity => "identity",
            BeamKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Each block satisfies S_b^H R_η S_b = I.
    NoiseOrthonormal,
    /// S^H S = I.
    Orthonormal,
}

/// Which MPCs a block of beam columns is designed for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockLabel {
    Cluster(Vec<usize>),
    Unified,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamBlock {
    pub label: BlockLabel,
    pub cols: Vec<usize>,
}

/// An N × D compression matrix with full column rank.
#[derive(Debug, Clone)]
pub struct Beamspace {
    pub s: CMat,
    pub blocks: Vec<BeamBlock>,
    pub kind: BeamKind,
    pub normalization: Normalization,
}

impl Beamspace {
    pub fn new(s: CMat, blocks: Vec<BeamBlock>, kind: BeamKind, normalization: Normalization) -> Result<Self> {
        let (n, d) = s.shape();
        if d == 0 || d > n {
            return Err(Error::domain(format!("beamspace dimension {d} outside 1..={n}")));
        }
        linalg::check_finite(&s, "beamspace")?;
        let mut seen = vec![false; d];
        for b in &blocks {
            for &j in &b.cols {
                if j >= d || seen[j] {
                    return Err(Error::validation("beam blocks must partition the columns"));
                }
                seen[j] = true;
            }
        }
        if seen.iter().any(|&x| !x) {
            return Err(Error::validation("beam blocks must cover every column"));
        }
        if linalg::rank(&s) < d {
            return Err(Error::conditioning("beamspace matrix is rank deficient"));
        }
        Ok(Beamspace { s, blocks, kind, normalization })
    }

    pub fn identity(n: usize) -> Self {
        Beamspace {
            s: linalg::identity(n),
            blocks: vec![BeamBlock { label: BlockLabel::Unified, cols: (0..n).collect() }],
            kind: BeamKind::Identity,
            normalization: Normalization::Orthonormal,
        }
    }

    /// User-supplied matrix treated as a single block.
    pub fn custom(s: CMat, normalization: Normalization) -> Result<Self> {
        let d = s.ncols();
        Self::new(s, vec![BeamBlock { label: BlockLabel::Unified, cols: (0..d).collect() }], BeamKind::Custom, normalization)
    }

    pub fn dim(&self) -> usize {
        self.s.ncols()
    }

    pub fn num_antennas(&self) -> usize {
        self.s.nrows()
    }

    /// Same column span re-expressed with S^H S = I. Gram–Schmidt runs in
    /// column order, so each block keeps its column positions.
    pub fn orthonormalized(&self) -> Result<Self> {
        let q = orthonormal_columns(&self.s)?;
        Ok(Beamspace { s: q, blocks: self.blocks.clone(), kind: self.kind, normalization: Normalization::Orthonormal })
    }

    /// Assigns every column to one MPC cluster: designed blocks keep their
    /// label, columns of unified blocks go to the cluster whose covariance
    /// they capture the most power from.
    pub fn cluster_columns(&self, stats: &GroupStatistics) -> Vec<(Vec<usize>, Vec<usize>)> {
        let clusters = &stats.clusters;
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); clusters.len()];
        let covs: Vec<CMat> = clusters.iter().map(|c| stats.cluster_cov_untruncated(c)).collect();
        for b in &self.blocks {
            let fixed = match &b.label {
                BlockLabel::Cluster(m) => clusters.iter().position(|c| c == m),
                BlockLabel::Unified => None,
            };
            for &j in &b.cols {
                let ci = fixed.unwrap_or_else(|| {
                    let s = self.s.column(j);
                    let mut best = 0;
                    let mut best_p = f64::NEG_INFINITY;
                    for (i, r) in covs.iter().enumerate() {
                        let p = (s.adjoint() * r * s)[(0, 0)].re;
                        if p > best_p {
                            best_p = p;
                            best = i;
                        }
                    }
                    best
                });
                cols[ci].push(j);
            }
        }
        clusters.iter().cloned().zip(cols).collect()
    }
}

/// Thin QR via modified Gram–Schmidt with one re-orthogonalization pass.
pub fn orthonormal_columns(a: &CMat) -> Result<CMat> {
    let (n, d) = a.shape();
    let mut q = CMat::zeros(n, d);
    for j in 0..d {
        let mut v: CVec = a.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dotc(&v);
                v -= qi * proj;
            }
        }
        let nv = v.norm();
        if nv <= 1e-12 * a.column(j).norm().max(f64::MIN_POSITIVE) {
            return Err(Error::conditioning("columns are linearly dependent"));
        }
        q.set_column(j, &v.unscale(nv));
    }
    Ok(q)
}

/// Q = S^H R_η S.
pub fn q_matrix(s: &CMat, noise: &NoiseCovariance) -> CMat {
    linalg::hermitianize(&(s.adjoint() * &noise.matrix * s))
}

/// SNR matrix ρ Q^{-1} S^H R S of one MPC.
pub fn snr_matrix(s: &CMat, cov: &CMat, power: f64, noise: &NoiseCovariance) -> Result<CMat> {
    let q = q_matrix(s, noise);
    let sig = (s.adjoint() * cov * s).scale(power);
    linalg::solve_hpd(&q, &sig)
}

/// Hermitian stand-in for F = Σ_l R_code(l) ⊗ SNR(l).
///
/// F itself is generally not Hermitian; conjugating each SNR matrix with
/// the Cholesky factor of Q gives a similar Hermitian matrix with the same
/// eigenvalues κ_i, which is what every criterion depends on.
#[derive(Debug, Clone)]
pub struct SnrOperator {
    pub hermitian: CMat,
    pub kappa: Vec<f64>,
}

pub fn build_f(
    beam: &Beamspace,
    stats: &GroupStatistics,
    noise: &NoiseCovariance,
    train: &TrainingMatrices,
) -> Result<SnrOperator> {
    let s = &beam.s;
    let lq = linalg::cholesky(&q_matrix(s, noise))?.l();
    let t = train.len();
    let d = beam.dim();
    let mut f = CMat::zeros(t * d, t * d);
    for l in 0..stats.num_mpcs() {
        let sig = (s.adjoint() * &stats.covs[l].matrix * s).scale(stats.powers[l]);
        let half = linalg::solve_lower(&lq, &sig)?;
        let a = linalg::hermitianize(&linalg::solve_lower(&lq, &half.adjoint())?);
        f += linalg::kron(&train.code_correlation(&[l]), &a);
    }
    let f = linalg::hermitianize(&f);
    let (vals, _) = linalg::hermitian_eig(&f)?;
    let kappa = vals.into_iter().map(|v| v.max(0.0)).collect();
    Ok(SnrOperator { hermitian: f, kappa })
}

/// Scalar design criteria derived from the eigenvalues κ_i of F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionReport {
    /// Trace of the normalized (KLT-coefficient) MMSE error covariance.
    pub nmse_trace: f64,
    /// I(h; y) in nats.
    pub mutual_info: f64,
    /// log det R_e − log det R_h, the log shrinkage of the error volume.
    pub log_error_volume_ratio: f64,
}

pub fn criteria(kappa: &[f64], num_coeffs: usize) -> CriterionReport {
    let td = kappa.len() as f64;
    let nmse_trace = kappa.iter().map(|k| 1.0 / (1.0 + k)).sum::<f64>() + (num_coeffs as f64 - td);
    let mutual_info: f64 = kappa.iter().map(|k| k.ln_1p()).sum();
    CriterionReport { nmse_trace, mutual_info, log_error_volume_ratio: -mutual_info }
}

pub fn evaluate_criteria(
    beam: &Beamspace,
    stats: &GroupStatistics,
    noise: &NoiseCovariance,
    train: &TrainingMatrices,
) -> Result<CriterionReport> {
    let f = build_f(beam, stats, noise, train)?;
    Ok(criteria(&f.kappa, stats.num_users * stats.total_rank()))
}

/// Greedy split of D dimensions over clusters. `gains[c][n]` is the gain of
/// giving cluster c its (n+1)-th dimension and must be non-increasing in n;
/// under that condition the greedy split is optimal and nested in D.
pub fn allocate_greedy(gains: &[Vec<f64>], d: usize) -> Vec<usize> {
    let mut pool: Vec<(f64, usize, usize)> = Vec::new();
    for (c, g) in gains.iter().enumerate() {
        for (n, &v) in g.iter().enumerate() {
            pool.push((v, c, n));
        }
    }
    pool.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut alloc = vec![0; gains.len()];
    for &(_, c, _) in pool.iter().take(d) {
        alloc[c] += 1;
    }
    alloc
}

/// Exhaustive search over all splits with Σ d_c = min(D, Σ capacities).
pub fn allocate_exhaustive(gains: &[Vec<f64>], d: usize) -> Vec<usize> {
    let cap: usize = gains.iter().map(|g| g.len()).sum();
    let target = d.min(cap);
    let mut best = (f64::NEG_INFINITY, vec![0; gains.len()]);
    let mut cur = vec![0; gains.len()];
    fn rec(gains: &[Vec<f64>], c: usize, left: usize, cur: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        if c == gains.len() {
            if left == 0 {
                let v: f64 = gains.iter().zip(cur.iter()).map(|(g, &k)| g[..k].iter().sum::<f64>()).sum();
                if v > best.0 {
                    *best = (v, cur.clone());
                }
            }
            return;
        }
        for k in 0..=gains[c].len().min(left) {
            cur[c] = k;
            rec(gains, c + 1, left - k, cur, best);
        }
        cur[c] = 0;
    }
    rec(gains, 0, target, &mut cur, &mut best);
    best.1
}

/// Per-dimension gains Σ_m β_m λ_n / (β_m λ_n + 1) of one cluster.
fn cluster_gains(lambdas: &[f64], betas: &[f64]) -> Vec<f64> {
    lambdas
        .iter()
        .map(|&lam| betas.iter().map(|&b| b * lam / (b * lam + 1.0)).sum())
        .collect()
}

/// Relative floor below which generalized eigenvalues count as zero.
const SIGNAL_FLOOR: f64 = 1e-10;
/// Diagonal loading used to order directions that carry no modelled signal.
const FILL_LOADING: f64 = 1e-10;

/// Generalized eigenbeams for the intended group.
///
/// Each MPC cluster gets the leading generalized eigenvectors of
/// (Σ_{l∈c} ρ_l R_l, R_η); dimensions are split across clusters greedily by
/// their contribution to Tr(F + I)^{-1}. If D exceeds the total signal rank,
/// the remaining columns are the leading eigenvectors of the whitened,
/// lightly loaded untruncated covariance restricted to the R_η-orthogonal
/// complement of the designed columns.
pub fn build_geb(
    stats: &GroupStatistics,
    noise: &NoiseCovariance,
    train: &TrainingMatrices,
    d: usize,
) -> Result<Beamspace> {
    let n = stats.num_antennas();
    if d == 0 || d > n {
        return Err(Error::domain(format!("beamspace dimension {d} outside 1..={n}")));
    }
    let mut cand: Vec<(Vec<f64>, CMat)> = Vec::new();
    let mut gains = Vec::new();
    for cl in &stats.clusters {
        let (vals, vecs) = linalg::generalized_eig(&stats.cluster_cov(cl), &noise.matrix)?;
        let top = vals[0].max(0.0);
        let r = vals.iter().take_while(|&&v| v > SIGNAL_FLOOR * top && v > 0.0).count();
        let (betas, _) = linalg::hermitian_eig(&train.code_correlation(cl))?;
        gains.push(cluster_gains(&vals[..r], &betas));
        cand.push((vals[..r].to_vec(), vecs.columns(0, r).into_owned()));
    }
    let alloc = allocate_greedy(&gains, d);
    let mut cols: Vec<CVec> = Vec::with_capacity(d);
    let mut blocks = Vec::new();
    for (ci, &k) in alloc.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let start = cols.len();
        for j in 0..k {
            cols.push(cand[ci].1.column(j).into_owned());
        }
        blocks.push(BeamBlock { label: BlockLabel::Cluster(stats.clusters[ci].clone()), cols: (start..cols.len()).collect() });
    }
    let designed = cols.len();
    if designed < d {
        let l = noise.factor();
        let s0 = linalg::hstack(&cols, n);
        let basis = if designed > 0 { orthonormal_columns(&linalg::solve_lower(l, &s0)?)? } else { CMat::zeros(n, 0) };
        let proj = linalg::identity(n) - &basis * basis.adjoint();
        let design = stats.r_sum.untruncated.clone() + linalg::identity(n).scale(FILL_LOADING);
        let half = linalg::solve_lower(l, &design)?;
        let white = linalg::solve_lower(l, &half.adjoint())?;
        let g = &proj * white * &proj;
        let (_, w) = linalg::hermitian_eig(&g)?;
        let lh = l.adjoint();
        for j in 0..d - designed {
            let v = lh
                .solve_upper_triangular(&w.column(j).into_owned())
                .ok_or_else(|| Error::conditioning("singular noise factor"))?;
            cols.push(v);
        }
        blocks.push(BeamBlock { label: BlockLabel::Unified, cols: (designed..d).collect() });
    }
    Beamspace::new(linalg::hstack(&cols, n), blocks, BeamKind::Geb, Normalization::NoiseOrthonormal)
}

/// Unitary DFT column k of size N.
pub fn dft_column(n: usize, k: usize) -> CVec {
    let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
    CVec::from_fn(n, |i, _| C64::from_polar(1.0 / (n as f64).sqrt(), w * i as f64))
}

/// Leading eigenvectors of the group's total covariance Σ_l ρ_l R_l.
///
/// Beyond its rank the basis is completed from DFT columns ranked by the
/// untruncated power they capture, nearest index first among ties.
pub fn build_dft(stats: &GroupStatistics, d: usize) -> Result<Beamspace> {
    let n = stats.num_antennas();
    if d == 0 || d > n {
        return Err(Error::domain(format!("beamspace dimension {d} outside 1..={n}")));
    }
    let r_sum = &stats.r_sum;
    let mut cols: Vec<CVec> = (0..d.min(r_sum.rank())).map(|j| r_sum.eigvecs.column(j).into_owned()).collect();
    if cols.len() < d {
        let full = &r_sum.untruncated;
        let scores: Vec<f64> = (0..n)
            .map(|k| {
                let f = dft_column(n, k);
                (f.adjoint() * full * &f)[(0, 0)].re
            })
            .collect();
        let peak = scores.iter().cloned().fold(0.0, f64::max);
        let best = scores.iter().position(|&s| s == peak).unwrap_or(0);
        let floor = 1e-12 * peak;
        let circ = |k: usize| {
            let dk = k.abs_diff(best);
            dk.min(n - dk)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let sa = if scores[a] > floor { scores[a] } else { 0.0 };
            let sb = if scores[b] > floor { scores[b] } else { 0.0 };
            sb.partial_cmp(&sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(circ(a).cmp(&circ(b)))
                .then(a.cmp(&b))
        });
        for k in order {
            if cols.len() == d {
                break;
            }
            let mut v = dft_column(n, k);
            for _ in 0..2 {
                for q in &cols {
                    let p = q.dotc(&v);
                    v -= q * p;
                }
            }
            let nv = v.norm();
            if nv > 1e-6 {
                cols.push(v.unscale(nv));
            }
        }
    }
    let blocks = vec![BeamBlock { label: BlockLabel::Unified, cols: (0..d).collect() }];
    Beamspace::new(linalg::hstack(&cols, n), blocks, BeamKind::Dft, Normalization::Orthonormal)
}

/// Beam patterns over a grid of angles: one gain row per angle with the
/// per-column gains |s_d^H a(θ)|² / (‖s_d‖² N) followed by the aggregate
/// ‖P_S a(θ)‖² / N, all in dB.
pub fn beam_pattern(beam: &Beamspace, geom: &ArrayGeometry, thetas: &[f64]) -> Result<Vec<Vec<f64>>> {
    let q = orthonormal_columns(&beam.s)?;
    let n = geom.num_elements as f64;
    let norms: Vec<f64> = (0..beam.dim()).map(|j| beam.s.column(j).norm_squared()).collect();
    let floor = 1e-30;
    Ok(thetas
        .iter()
        .map(|&th| {
            let a = steering_vector(geom, th);
            let mut row: Vec<f64> = (0..beam.dim())
                .map(|j| {
                    let g = beam.s.column(j).dotc(&a).norm_sqr() / (norms[j] * n);
                    10.0 * g.max(floor).log10()
                })
                .collect();
            let agg = (q.adjoint() * &a).norm_squared() / n;
            row.push(10.0 * agg.max(floor).log10());
            row
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_matches_exhaustive_on_concave_gains() {
        let gains = vec![vec![5.0, 3.0, 0.5], vec![4.0, 3.5, 1.0, 0.2], vec![2.0]];
        for d in 0..=8 {
            let g = allocate_greedy(&gains, d);
            let e = allocate_exhaustive(&gains, d);
            let val = |a: &[usize]| -> f64 { gains.iter().zip(a).map(|(g, &k)| g[..k].iter().sum::<f64>()).sum() };
            assert!((val(&g) - val(&e)).abs() < 1e-12, "d = {d}");
        }
    }

    #[test]
    fn orthonormal_columns_preserves_leading_spans() {
        let a = CMat::from_fn(5, 3, |i, j| C64::new(((i * i + 3 * j * j) % 7) as f64 + 1.0, i as f64 - j as f64));
        let q = orthonormal_columns(&a).unwrap();
        assert!(linalg::rel_diff(&(q.adjoint() * &q), &linalg::identity(3)) < 1e-13);
        let c0 = q.column(0).dotc(&a.column(0));
        assert!((q.column(0) * c0 - a.column(0)).norm() < 1e-12);
    }

    #[test]
    fn criteria_of_zero_snr() {
        let r = criteria(&[0.0; 4], 6);
        assert_eq!(r.nmse_trace, 6.0);
        assert_eq!(r.mutual_info, 0.0);
    }
}
