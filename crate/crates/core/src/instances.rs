//! Small self-contained problem instances used by the identity checks, the
//! Monte Carlo validation and the test suites.

use crate::array_channel::{
    self, point_covariance, statistics_from_matrices, AngularSector, ArrayGeometry, GroupSpec, GroupStatistics,
};
use crate::error::Result;
use crate::interference::{Interferer, NoiseCovariance};
use crate::linalg::{self, CMat, C64};
use crate::rng;
use crate::scenario::{Gamma, Scenario};
use crate::training::{PilotSet, PilotSource, TrainingMatrices};
use rand::Rng;

/// A complete intended-group problem with owned parts.
#[derive(Debug, Clone)]
pub struct Instance {
    pub stats: GroupStatistics,
    pub noise: NoiseCovariance,
    pub train: TrainingMatrices,
    pub interferers: Vec<Interferer>,
    pub energy: f64,
}

impl Instance {
    pub fn setting(&self) -> crate::estimators::Setting<'_> {
        crate::estimators::Setting { stats: &self.stats, noise: &self.noise, train: &self.train }
    }
}

/// Eight-element array, two users with two rank-one MPCs, one interfering
/// group, four training symbols.
pub fn small_reference_scenario() -> Scenario {
    let s = |lo, hi| AngularSector::new(lo, hi).expect("valid sector");
    let mut intended = GroupSpec::uniform(0, 2, &[s(-10.0, -8.0), s(20.0, 22.0)]);
    for m in &mut intended.mpcs {
        m.rank_override = Some(1);
    }
    let interferer = GroupSpec::uniform(1, 2, &[s(40.0, 50.0)]);
    Scenario {
        array: ArrayGeometry { num_elements: 8, spacing: 0.5 },
        quad_points: None,
        energy_fraction: 0.999,
        groups: vec![intended, interferer],
        intended: 0,
        training_length: 4,
        pilots: PilotSource::Kasami { degree: 4 },
        snr_db: 10.0,
        n0: 1.0,
        gamma: Gamma::Uniform(0.5),
    }
}

fn random_pd(n: usize, rng: &mut impl Rng) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let m = &a * a.adjoint() + linalg::identity(n).scale(0.05);
    m.scale(1.0 / linalg::trace_re(&m))
}

/// Instance whose channel covariance has full rank, so determinants of
/// the channel and error covariances are non-zero.
pub fn full_rank_instance(seed: u64, n: usize, num_mpcs: usize, num_users: usize, t: usize, energy: f64) -> Result<Instance> {
    let mut g = rng::stream(seed, 0, 0);
    let mats: Vec<CMat> = (0..num_mpcs).map(|_| random_pd(n, &mut g)).collect();
    let raw: Vec<f64> = (0..num_mpcs).map(|_| 0.5 + g.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let powers: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let stats = statistics_from_matrices(num_users, &powers, &mats, 1.0)?;
    let interf = statistics_from_matrices(1, &[1.0], &[random_pd(n, &mut g)], 1.0)?;
    let interferers = vec![Interferer { stats: interf, gamma: 0.3 }];
    let noise = NoiseCovariance::new(&interferers, energy, 1.0, n)?;
    let pilots = PilotSet::generate(PilotSource::RandomBpsk, num_users, t, num_mpcs, energy, &mut g)?;
    let train = pilots.training_matrix(num_mpcs)?;
    Ok(Instance { stats, noise, train, interferers, energy })
}

/// Single antenna, user, path and symbol: y = x h + n with E|h|² = 1.
pub fn scalar_instance(snr_db: f64) -> Result<Instance> {
    let energy = 10f64.powf(snr_db / 10.0);
    let stats = statistics_from_matrices(1, &[1.0], &[linalg::identity(1)], 1.0)?;
    let noise = NoiseCovariance::white(1, 1.0)?;
    let mut g = rng::stream(0, 0, 0);
    let pilots = PilotSet::generate(PilotSource::Kasami { degree: 4 }, 1, 1, 1, energy, &mut g)?;
    let train = pilots.training_matrix(1)?;
    Ok(Instance { stats, noise, train, interferers: Vec::new(), energy })
}

/// Rank-one MPCs and a rank-one interferer placed on the DFT grid of a
/// half-wavelength ULA, so all of them are mutually orthogonal and R_η is
/// diagonal in the DFT basis. `grid` lists DFT indices of the MPCs; the
/// interferer uses `interferer_bin`.
pub fn orthogonal_instance(
    n: usize,
    grid: &[usize],
    interferer_bin: usize,
    num_users: usize,
    t: usize,
    snr_db: f64,
) -> Result<Instance> {
    let geom = ArrayGeometry::ula(n, 0.5)?;
    let angle = |k: usize| {
        // sin θ = 2k/N folded into [−1, 1).
        let mut s = 2.0 * k as f64 / n as f64;
        if s >= 1.0 {
            s -= 2.0;
        }
        s.asin().to_degrees()
    };
    let mats: Vec<CMat> = grid.iter().map(|&k| point_covariance(&geom, angle(k))).collect();
    let powers = vec![1.0 / grid.len() as f64; grid.len()];
    let stats = statistics_from_matrices(num_users, &powers, &mats, 1.0)?;
    let interf = statistics_from_matrices(2, &[1.0], &[point_covariance(&geom, angle(interferer_bin))], 1.0)?;
    let energy = 10f64.powf(snr_db / 10.0);
    let interferers = vec![Interferer { stats: interf, gamma: 1.0 }];
    let noise = NoiseCovariance::new(&interferers, energy, 1.0, n)?;
    let mut g = rng::stream(5, 0, 0);
    let pilots = PilotSet::generate(PilotSource::Kasami { degree: 4 }, num_users, t, grid.len(), energy, &mut g)?;
    let train = pilots.training_matrix(grid.len())?;
    Ok(Instance { stats, noise, train, interferers, energy })
}

/// Group statistics for a group given directly by sectors (convenience for
/// tests that do not need a whole scenario).
pub fn sector_group(geom: &ArrayGeometry, users: usize, sectors: &[(f64, f64)], fraction: f64) -> Result<GroupStatistics> {
    let secs = sectors
        .iter()
        .map(|&(lo, hi)| AngularSector::new(lo, hi))
        .collect::<Result<Vec<_>>>()?;
    let spec = GroupSpec::uniform(0, users, &secs);
    let mut model = array_channel::CovarianceModel::for_array(geom);
    model.energy_fraction = fraction;
    array_channel::group_statistics(geom, &spec, &model)
}
