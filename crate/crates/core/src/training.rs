//! Pilot sequences and the training matrices built from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};

/// Primitive polynomials x^m + … + 1 over GF(2) for the even degrees the
/// small Kasami construction supports, given as the exponents of the
/// non-leading terms.
fn primitive_taps(degree: u32) -> Option<&'static [u32]> {
    match degree {
        4 => Some(&[1, 0]),
        6 => Some(&[1, 0]),
        8 => Some(&[4, 3, 2, 0]),
        10 => Some(&[3, 0]),
        12 => Some(&[6, 4, 1, 0]),
        14 => Some(&[10, 6, 1, 0]),
        16 => Some(&[12, 3, 1, 0]),
        _ => None,
    }
}

/// Maximal-length binary sequence of period 2^m − 1 from the register
/// state 1, 0, …, 0.
pub fn m_sequence(degree: u32) -> Result<Vec<u8>> {
    let taps = primitive_taps(degree)
        .ok_or_else(|| Error::domain(format!("no primitive polynomial tabulated for degree {degree}")))?;
    let m = degree as usize;
    let period = (1usize << m) - 1;
    let mut s = vec![0u8; period + m];
    s[0] = 1;
    for n in 0..period {
        s[n + m] = taps.iter().fold(0, |acc, &t| acc ^ s[n + t as usize]);
    }
    s.truncate(period);
    Ok(s)
}

/// Small Kasami set for an even degree m: the m-sequence u followed by
/// u ⊕ shift_k(w) for k = 0, …, 2^{m/2} − 2, where w is u decimated by
/// 2^{m/2} + 1.
pub fn kasami_small_set(degree: u32) -> Result<Vec<Vec<u8>>> {
    if degree % 2 != 0 || degree < 2 {
        return Err(Error::domain(format!("Kasami degree must be even, got {degree}")));
    }
    let u = m_sequence(degree)?;
    let period = u.len();
    let q = (1usize << (degree / 2)) + 1;
    let short = (1usize << (degree / 2)) - 1;
    let w: Vec<u8> = (0..period).map(|n| u[(q * n) % period]).collect();
    let mut set = Vec::with_capacity(short + 1);
    set.push(u.clone());
    for k in 0..short {
        set.push((0..period).map(|n| u[n] ^ w[(n + k) % period]).collect());
    }
    Ok(set)
}

/// Where pilot symbols come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PilotSource {
    /// The last K sequences of the small Kasami set, read cyclically so the
    /// symbols preceding the training window are the sequence's own tail.
    Kasami { degree: u32 },
    /// Independent equiprobable BPSK symbols drawn from the group's stream.
    RandomBpsk,
}

/// Pilot symbols of one group, including the L − 1 symbols sent before the
/// training window starts.
#[derive(Debug, Clone)]
pub struct PilotSet {
    len: usize,
    precursors: usize,
    energy: f64,
    seqs: Vec<Vec<f64>>,
}

impl PilotSet {
    pub fn generate<R: Rng + ?Sized>(
        source: PilotSource,
        num_users: usize,
        len: usize,
        num_mpcs: usize,
        energy: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if num_users == 0 || len == 0 || num_mpcs == 0 {
            return Err(Error::domain("pilots need at least one user, symbol and MPC"));
        }
        if !(energy >= 0.0 && energy.is_finite()) {
            return Err(Error::domain(format!("symbol energy {energy} must be non-negative")));
        }
        let precursors = num_mpcs - 1;
        let amp = energy.sqrt();
        let seqs = match source {
            PilotSource::Kasami { degree } => {
                let set = kasami_small_set(degree)?;
                let period = set[0].len();
                if num_users > set.len() {
                    return Err(Error::domain(format!(
                        "Kasami degree {degree} gives {} sequences, {num_users} requested",
                        set.len()
                    )));
                }
                if len + precursors > period {
                    return Err(Error::domain(format!(
                        "training length {len} plus {precursors} precursors exceeds period {period}"
                    )));
                }
                set[set.len() - num_users..]
                    .iter()
                    .map(|s| {
                        (0..len + precursors)
                            .map(|i| {
                                let n = (i + period - precursors) % period;
                                if s[n] == 0 {
                                    amp
                                } else {
                                    -amp
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
            PilotSource::RandomBpsk => (0..num_users)
                .map(|_| {
                    (0..len + precursors)
                        .map(|_| if rng.gen::<bool>() { amp } else { -amp })
                        .collect()
                })
                .collect(),
        };
        Ok(PilotSet { len, precursors, energy, seqs })
    }

    pub fn num_users(&self) -> usize {
        self.seqs.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn max_mpcs(&self) -> usize {
        self.precursors + 1
    }

    /// Symbol x_n of user k, for −(L−1) ≤ n < T.
    pub fn symbol(&self, user: usize, n: isize) -> f64 {
        self.seqs[user][(n + self.precursors as isize) as usize]
    }

    /// T×L matrix of user k with entry (n, l) = x_{n−l}.
    pub fn user_matrix(&self, user: usize, num_mpcs: usize) -> Result<CMat> {
        if num_mpcs > self.max_mpcs() {
            return Err(Error::shape(format!(
                "pilots carry {} precursors, {num_mpcs} MPCs need {}",
                self.precursors,
                num_mpcs - 1
            )));
        }
        Ok(CMat::from_fn(self.len, num_mpcs, |n, l| c(self.symbol(user, n as isize - l as isize))))
    }

    /// Stacked training matrix X = [X_1 … X_K] of size T × KL.
    pub fn training_matrix(&self, num_mpcs: usize) -> Result<TrainingMatrices> {
        let k = self.num_users();
        let mut x = CMat::zeros(self.len, k * num_mpcs);
        for user in 0..k {
            let xu = self.user_matrix(user, num_mpcs)?;
            x.view_mut((0, user * num_mpcs), (self.len, num_mpcs)).copy_from(&xu);
        }
        Ok(TrainingMatrices { x, num_users: k, num_mpcs })
    }
}

/// The stacked training matrix with helpers for delay-selected products.
#[derive(Debug, Clone)]
pub struct TrainingMatrices {
    pub x: CMat,
    pub num_users: usize,
    pub num_mpcs: usize,
}

impl TrainingMatrices {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn cols(&self) -> usize {
        self.x.ncols()
    }

    /// Column indices (k, l) of X with l in `delays`.
    pub fn columns_for(&self, delays: &[usize]) -> Vec<usize> {
        let mut idx = Vec::new();
        for k in 0..self.num_users {
            for &l in delays {
                idx.push(k * self.num_mpcs + l);
            }
        }
        idx.sort_unstable();
        idx
    }

    /// I_K ⊗ Σ_{l ∈ delays} E_{L,l}.
    pub fn delay_selector(&self, delays: &[usize]) -> CMat {
        linalg::selector(self.cols(), &self.columns_for(delays))
    }

    /// X (I_K ⊗ Σ_{l ∈ delays} E_{L,l}): X with all other delays zeroed.
    pub fn masked(&self, delays: &[usize]) -> CMat {
        &self.x * self.delay_selector(delays)
    }

    /// Code correlation X (I_K ⊗ Σ_{l ∈ delays} E_{L,l}) X^H.
    pub fn code_correlation(&self, delays: &[usize]) -> CMat {
        let m = self.masked(delays);
        linalg::hermitianize(&(&m * m.adjoint()))
    }

    /// X X^H, the code correlation over all delays.
    pub fn total_code_correlation(&self) -> CMat {
        linalg::hermitianize(&(&self.x * self.x.adjoint()))
    }
}
