//! Scenario descriptions and the compiled second-order model they produce.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::array_channel::{group_statistics, AngularSector, ArrayGeometry, CovarianceModel, GroupSpec, GroupStatistics};
use crate::beamspace::{build_dft, build_geb, BeamKind, Beamspace, Normalization};
use crate::error::{Error, Result};
use crate::estimators::Setting;
use crate::interference::{Interferer, NoiseCovariance};
use crate::rng;
use crate::training::{PilotSet, PilotSource, TrainingMatrices};

/// Received power of interfering groups relative to the intended one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Uniform(f64),
    PerGroup(BTreeMap<u32, f64>),
}

impl Gamma {
    pub fn for_group(&self, id: u32) -> Result<f64> {
        match self {
            Gamma::Uniform(g) => Ok(*g),
            Gamma::PerGroup(m) => m
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Config(format!("no gamma given for group {id}"))),
        }
    }
}

fn default_energy_fraction() -> f64 {
    0.999
}

fn default_n0() -> f64 {
    1.0
}

/// Complete description of a multi-group training scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub array: ArrayGeometry,
    /// Gauss–Legendre nodes per sector integral; defaults to 4N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_points: Option<usize>,
    #[serde(default = "default_energy_fraction")]
    pub energy_fraction: f64,
    pub groups: Vec<GroupSpec>,
    /// Id of the group whose channel is estimated.
    pub intended: u32,
    pub training_length: usize,
    pub pilots: PilotSource,
    /// E_s / N_0 in dB.
    pub snr_db: f64,
    #[serde(default = "default_n0")]
    pub n0: f64,
    pub gamma: Gamma,
}

impl Scenario {
    pub fn energy(&self) -> f64 {
        self.n0 * 10f64.powf(self.snr_db / 10.0)
    }

    pub fn covariance_model(&self) -> CovarianceModel {
        let mut m = CovarianceModel::for_array(&self.array);
        if let Some(q) = self.quad_points {
            m.quad_points = q;
        }
        m.energy_fraction = self.energy_fraction;
        m
    }

    pub fn intended_group(&self) -> Result<&GroupSpec> {
        self.groups
            .iter()
            .find(|g| g.id == self.intended)
            .ok_or_else(|| Error::Config(format!("intended group {} is not defined", self.intended)))
    }

    /// Sets a uniform γ so that γ E_s / N_0 equals the given ratio in dB.
    pub fn set_inr_db(&mut self, inr_db: f64) {
        self.gamma = Gamma::Uniform(10f64.powf((inr_db - self.snr_db) / 10.0));
    }

    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(Error::domain(format!("noise density {} must be positive", self.n0)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::domain("snr_db must be finite"));
        }
        if self.training_length == 0 {
            return Err(Error::domain("training length must be positive"));
        }
        let mut ids: Vec<u32> = self.groups.iter().map(|g| g.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("group ids must be unique"));
        }
        for g in &self.groups {
            g.validate()?;
            if g.id != self.intended {
                let gamma = self.gamma.for_group(g.id)?;
                if !(gamma >= 0.0 && gamma.is_finite()) {
                    return Err(Error::domain(format!("gamma for group {} must be non-negative", g.id)));
                }
            }
        }
        self.intended_group()?;
        Ok(())
    }
}

/// The evaluation scenario: a 100-element half-wavelength ULA, eight groups
/// of which the intended one has two users and three MPCs, Kasami pilots
/// of length 6 and equal received power for all groups.
///
/// Covariances keep 99% of their energy here rather than the library
/// default of 99.9%, which gives the intended group a total signal rank of
/// six.
pub fn default_scenario() -> Scenario {
    let s = |lo, hi| AngularSector::new(lo, hi).expect("valid sector");
    let mut groups = vec![GroupSpec::uniform(0, 2, &[s(-1.0, 1.0), s(-1.0, 1.0), s(5.0, 7.0)])];
    let interferers = [
        (-29.0, -26.0),
        (-21.0, -19.0),
        (-12.0, -9.0),
        (-5.5, -3.5),
        (9.5, 12.5),
        (15.0, 17.0),
        (24.0, 27.0),
    ];
    for (i, &(lo, hi)) in interferers.iter().enumerate() {
        let sec = s(lo, hi);
        groups.push(GroupSpec::uniform(i as u32 + 1, 3, &[sec, sec, sec]));
    }
    Scenario {
        array: ArrayGeometry { num_elements: 100, spacing: 0.5 },
        quad_points: None,
        energy_fraction: 0.99,
        groups,
        intended: 0,
        training_length: 6,
        pilots: PilotSource::Kasami { degree: 6 },
        snr_db: 30.0,
        n0: 1.0,
        gamma: Gamma::Uniform(1.0),
    }
}

/// Two-group variant for angular-separation studies: the intended group has
/// two users and two MPCs over [−1°, 1°]; one interfering group with three
/// users and three MPCs occupies a 2° sector centred `separation` degrees
/// away.
pub fn separation_scenario(base: &Scenario, separation: f64) -> Result<Scenario> {
    let mut sc = base.clone();
    let a = AngularSector::new(-1.0, 1.0)?;
    let b = AngularSector::centered(separation, 2.0)?;
    sc.groups = vec![GroupSpec::uniform(0, 2, &[a, a]), GroupSpec::uniform(1, 3, &[b, b, b])];
    sc.intended = 0;
    if let Gamma::PerGroup(_) = sc.gamma {
        sc.gamma = Gamma::Uniform(1.0);
    }
    Ok(sc)
}

/// Second-order model of a scenario as seen by the intended group.
#[derive(Debug, Clone)]
pub struct Model {
    pub scenario: Scenario,
    pub stats: GroupStatistics,
    pub interferers: Vec<Interferer>,
    pub pilots: PilotSet,
    pub train: TrainingMatrices,
    pub noise: NoiseCovariance,
    /// White noise only, for interference-free benchmarks.
    pub clean_noise: NoiseCovariance,
}

impl Model {
    pub fn build(scenario: &Scenario, seed: u64) -> Result<Self> {
        scenario.validate()?;
        let geom = scenario.array;
        let cov = scenario.covariance_model();
        let energy = scenario.energy();
        let intended = scenario.intended_group()?;
        let stats = group_statistics(&geom, intended, &cov)?;
        let mut interferers = Vec::new();
        for g in scenario.groups.iter().filter(|g| g.id != scenario.intended) {
            interferers.push(Interferer { stats: group_statistics(&geom, g, &cov)?, gamma: scenario.gamma.for_group(g.id)? });
        }
        let mut prng = rng::stream(seed, intended.id, u64::MAX);
        let pilots = PilotSet::generate(
            scenario.pilots,
            intended.num_users,
            scenario.training_length,
            intended.num_mpcs(),
            energy,
            &mut prng,
        )?;
        let train = pilots.training_matrix(intended.num_mpcs())?;
        let n = geom.num_elements;
        let noise = NoiseCovariance::new(&interferers, energy, scenario.n0, n)?;
        let clean_noise = NoiseCovariance::white(n, scenario.n0)?;
        Ok(Model { scenario: scenario.clone(), stats, interferers, pilots, train, noise, clean_noise })
    }

    pub fn setting(&self) -> Setting<'_> {
        Setting { stats: &self.stats, noise: &self.noise, train: &self.train }
    }

    pub fn clean_setting(&self) -> Setting<'_> {
        Setting { stats: &self.stats, noise: &self.clean_noise, train: &self.train }
    }

    pub fn energy(&self) -> f64 {
        self.scenario.energy()
    }

    pub fn beam(&self, kind: BeamKind, d: usize, normalization: Option<Normalization>) -> Result<Beamspace> {
        let b = match kind {
            BeamKind::Geb => build_geb(&self.stats, &self.noise, &self.train, d)?,
            BeamKind::Dft => build_dft(&self.stats, d)?,
            BeamKind::Identity => Beamspace::identity(self.stats.num_antennas()),
            BeamKind::Custom => return Err(Error::Unsupported("custom beams are not built from a scenario".into())),
        };
        match normalization {
            Some(Normalization::Orthonormal) if b.normalization != Normalization::Orthonormal => b.orthonormalized(),
            _ => Ok(b),
        }
    }
}
