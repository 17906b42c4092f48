//! Interference-plus-noise statistics seen by the intended group.

use rand::Rng;

use crate::array_channel::GroupStatistics;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::rng::complex_normal_vec;

/// An interfering group together with its received power scaling γ.
#[derive(Debug, Clone)]
pub struct Interferer {
    pub stats: GroupStatistics,
    pub gamma: f64,
}

/// R_η = E_s Σ_g γ_g K_g Σ_l ρ_l R_l^{(g)} + N_0 I and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct NoiseCovariance {
    pub matrix: CMat,
    pub n0: f64,
    chol: CMat,
}

impl NoiseCovariance {
    pub fn new(interferers: &[Interferer], energy: f64, n0: f64, dim: usize) -> Result<Self> {
        if !(n0 >= 0.0 && n0.is_finite()) {
            return Err(Error::domain(format!("noise density {n0} must be non-negative")));
        }
        if !(energy >= 0.0 && energy.is_finite()) {
            return Err(Error::domain(format!("symbol energy {energy} must be non-negative")));
        }
        let mut m = linalg::identity(dim).scale(n0);
        for (i, g) in interferers.iter().enumerate() {
            if !(g.gamma >= 0.0 && g.gamma.is_finite()) {
                return Err(Error::domain(format!("interferer {i}: gamma {} must be non-negative", g.gamma)));
            }
            if g.stats.num_antennas() != dim {
                return Err(Error::shape(format!("interferer {i} has a different array size")));
            }
            let w = energy * g.gamma * g.stats.num_users as f64;
            m += g.stats.r_sum.matrix.scale(w);
        }
        Self::from_matrix(linalg::hermitianize(&m), n0)
    }

    /// Wraps an arbitrary covariance, checking that it is usable as R_η.
    pub fn from_matrix(matrix: CMat, n0: f64) -> Result<Self> {
        let (lo, hi) = linalg::eig_extremes(&matrix)?;
        if hi <= 0.0 || lo < 1e-12 * hi {
            return Err(Error::conditioning(format!(
                "noise covariance is singular or ill-conditioned (eigenvalues {lo:e} .. {hi:e})"
            )));
        }
        let chol = linalg::cholesky(&matrix)?.l();
        Ok(NoiseCovariance { matrix, n0, chol })
    }

    pub fn white(dim: usize, n0: f64) -> Result<Self> {
        Self::new(&[], 0.0, n0, dim)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Lower Cholesky factor L with R_η = L L^H.
    pub fn factor(&self) -> &CMat {
        &self.chol
    }

    /// Draws T independent columns η_t ~ CN(0, R_η), returned as an N × T matrix.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, t: usize) -> CMat {
        let n = self.dim();
        let mut out = CMat::zeros(n, t);
        for col in 0..t {
            out.set_column(col, &(&self.chol * complex_normal_vec(rng, n)));
        }
        out
    }
}

/// Explicit interference: channels and i.i.d. BPSK data are drawn for every
/// interfering user, and white noise of density N_0 is added. The returned
/// N × T matrix has covariance R_η per column.
pub fn sample_explicit<R: Rng + ?Sized>(
    rng: &mut R,
    interferers: &[Interferer],
    energy: f64,
    n0: f64,
    dim: usize,
    t: usize,
) -> CMat {
    let mut out = CMat::zeros(dim, t);
    for col in 0..t {
        let noise: CVec = complex_normal_vec(rng, dim).scale(n0.sqrt());
        out.set_column(col, &noise);
    }
    for g in interferers {
        let amp = (energy * g.gamma).sqrt();
        let l = g.stats.num_mpcs();
        let h = g.stats.sample_channel(rng);
        for k in 0..g.stats.num_users {
            let data: Vec<f64> = (0..t + l - 1)
                .map(|_| if rng.gen::<bool>() { amp } else { -amp })
                .collect();
            for d in 0..l {
                let start = (k * l + d) * dim;
                let hl = h.rows(start, dim);
                for n in 0..t {
                    let x = data[n + l - 1 - d];
                    for (o, z) in out.column_mut(n).iter_mut().zip(hl.iter()) {
                        *o += z * x;
                    }
                }
            }
        }
    }
    out
}
