//! Seeded ground truth and observation streams for a single unit moving
//! along a road with three sub-units in formation.
//!
//! Per step the unit velocity is drawn from `N(v_u, sigma_u)` and the unit
//! advances by `v_t * dt`. Sub-units sit at `x_t - x_doctrine`, `x_t`,
//! `x_t + x_doctrine`, each perturbed by independent `N(0, sigma_doctrine)`
//! noise and sharing the unit velocity. Every object is detected
//! independently with probability `p_detect`; a detection reports position
//! and velocity with additive Gaussian noise.
//!
//! Ground truth, unit-sensor and sub-unit-sensor randomness come from three
//! separate RNG streams, so the two observation streams are independent given
//! the truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phd::StateVector;

pub const TRUTH_STREAM: u64 = 0;
pub const UNIT_SENSOR_STREAM: u64 = 1;
pub const SUBUNIT_SENSOR_STREAM: u64 = 2;
/// Filter RNG streams start here; a filter's `rng_seed` is added to it.
pub const FILTER_STREAM_BASE: u64 = 16;

/// ChaCha8 generator for one named stream under a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    /// Mean unit velocity, m/s.
    pub v_u: f64,
    pub sigma_u: f64,
    /// Nominal spacing between neighbouring sub-units, m.
    pub x_doctrine: f64,
    /// Random deviation of each sub-unit from its doctrine slot, m.
    pub sigma_doctrine: f64,
    /// Per-object per-step detection probability (written `p_FN` in the
    /// original scenario description).
    pub p_detect: f64,
    pub sigma_obs_x: f64,
    pub sigma_obs_v: f64,
    pub x0: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            v_u: 1.0,
            sigma_u: 0.2,
            x_doctrine: 5.0,
            sigma_doctrine: 0.5,
            p_detect: 0.95,
            sigma_obs_x: 0.5,
            sigma_obs_v: 0.1,
            x0: 40.0,
            dt: 1.0,
            n_steps: 100,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("v_u", self.v_u),
            ("x0", self.x0),
            ("sigma_u", self.sigma_u),
            ("sigma_doctrine", self.sigma_doctrine),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(format!("scenario.{name} must be finite")));
            }
        }
        for (name, v) in [("sigma_u", self.sigma_u), ("sigma_doctrine", self.sigma_doctrine)] {
            if v < 0.0 {
                return Err(Error::config(format!("scenario.{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("x_doctrine", self.x_doctrine),
            ("sigma_obs_x", self.sigma_obs_x),
            ("sigma_obs_v", self.sigma_obs_v),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("scenario.{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.p_detect) {
            return Err(Error::config(format!(
                "scenario.p_detect must lie in [0, 1], got {}",
                self.p_detect
            )));
        }
        if self.n_steps == 0 {
            return Err(Error::config("scenario.n_steps must be positive"));
        }
        Ok(())
    }

    /// Position interval the truth and its observations are expected to
    /// stay inside (three-sigma envelope).
    pub fn reachable_interval(&self) -> (f64, f64) {
        let travel = self.v_u * self.dt * self.n_steps as f64;
        let margin = self.x_doctrine
            + 3.0 * self.sigma_doctrine
            + 3.0 * self.sigma_obs_x
            + 3.0 * self.sigma_u * self.dt * (self.n_steps as f64).sqrt();
        (
            self.x0 + travel.min(0.0) - margin,
            self.x0 + travel.max(0.0) + margin,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthStep {
    pub t: usize,
    pub unit: StateVector,
    pub subunits: [StateVector; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub t: usize,
    pub measurements: Vec<StateVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub truth: Vec<TruthStep>,
    pub unit_observations: Vec<ObservationSet>,
    pub subunit_observations: Vec<ObservationSet>,
}

/// The three RNG streams consumed by [`simulate_with_streams`].
#[derive(Debug, Clone)]
pub struct ScenarioStreams {
    pub truth: ChaCha8Rng,
    pub unit_sensor: ChaCha8Rng,
    pub subunit_sensor: ChaCha8Rng,
}

impl ScenarioStreams {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            truth: stream_rng(seed, TRUTH_STREAM),
            unit_sensor: stream_rng(seed, UNIT_SENSOR_STREAM),
            subunit_sensor: stream_rng(seed, SUBUNIT_SENSOR_STREAM),
        }
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    mean + std * n
}

/// Sub-unit positions around a unit at `x_t`: left, center, right slot,
/// each with independent doctrine noise.
pub fn subunit_positions<R: Rng + ?Sized>(x_t: f64, config: &ScenarioConfig, rng: &mut R) -> [f64; 3] {
    let s = config.sigma_doctrine;
    [
        x_t - config.x_doctrine + gaussian(rng, 0.0, s),
        x_t + gaussian(rng, 0.0, s),
        x_t + config.x_doctrine + gaussian(rng, 0.0, s),
    ]
}

fn observe<R: Rng + ?Sized>(
    objects: &[StateVector],
    config: &ScenarioConfig,
    rng: &mut R,
) -> Vec<StateVector> {
    let mut out = Vec::with_capacity(objects.len());
    for obj in objects {
        if rng.random::<f64>() < config.p_detect {
            out.push(StateVector::new(
                gaussian(rng, obj.position, config.sigma_obs_x),
                gaussian(rng, obj.velocity, config.sigma_obs_v),
            ));
        }
    }
    out
}

pub fn simulate(config: &ScenarioConfig) -> Result<Simulation> {
    simulate_with_streams(config, ScenarioStreams::from_seed(config.seed))
}

pub fn simulate_with_streams(config: &ScenarioConfig, streams: ScenarioStreams) -> Result<Simulation> {
    config.validate()?;
    let ScenarioStreams {
        mut truth,
        mut unit_sensor,
        mut subunit_sensor,
    } = streams;
    let n = config.n_steps;
    let mut sim = Simulation {
        truth: Vec::with_capacity(n),
        unit_observations: Vec::with_capacity(n),
        subunit_observations: Vec::with_capacity(n),
    };
    let mut x = config.x0;
    for t in 0..n {
        let v = gaussian(&mut truth, config.v_u, config.sigma_u);
        let unit = StateVector::new(x, v);
        let subunits = subunit_positions(x, config, &mut truth).map(|p| StateVector::new(p, v));
        sim.unit_observations.push(ObservationSet {
            t,
            measurements: observe(&[unit], config, &mut unit_sensor),
        });
        sim.subunit_observations.push(ObservationSet {
            t,
            measurements: observe(&subunits, config, &mut subunit_sensor),
        });
        sim.truth.push(TruthStep { t, unit, subunits });
        x += v * config.dt;
    }
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_skeleton() {
        let eps = 1e-6;
        let config = ScenarioConfig {
            sigma_u: 0.0,
            sigma_doctrine: 0.0,
            sigma_obs_x: eps,
            sigma_obs_v: eps,
            p_detect: 1.0,
            n_steps: 50,
            ..Default::default()
        };
        let sim = simulate(&config).unwrap();
        for (truth, obs) in sim.truth.iter().zip(&sim.subunit_observations) {
            assert_eq!(obs.measurements.len(), 3);
            let x = truth.unit.position;
            let expected = [x - config.x_doctrine, x, x + config.x_doctrine];
            for (m, e) in obs.measurements.iter().zip(expected) {
                assert!((m.position - e).abs() <= 3.0 * eps + 1e-9);
            }
        }
        // deterministic travel at v_u
        let last = sim.truth.last().unwrap();
        assert!((last.unit.position - (config.x0 + 49.0)).abs() < 1e-9);
    }

    #[test]
    fn no_detections_when_p_detect_is_zero() {
        let config = ScenarioConfig {
            p_detect: 0.0,
            ..Default::default()
        };
        let sim = simulate(&config).unwrap();
        assert!(sim.unit_observations.iter().all(|o| o.measurements.is_empty()));
        assert!(sim.subunit_observations.iter().all(|o| o.measurements.is_empty()));
    }

    #[test]
    fn detection_rate_concentrates() {
        let config = ScenarioConfig {
            p_detect: 0.9,
            n_steps: 1000,
            seed: 3,
            ..Default::default()
        };
        let sim = simulate(&config).unwrap();
        let detected = sim
            .unit_observations
            .iter()
            .filter(|o| !o.measurements.is_empty())
            .count() as f64
            / 1000.0;
        assert!((0.87..=0.93).contains(&detected), "{detected}");
    }

    #[test]
    fn deterministic_subunit_positions() {
        let config = ScenarioConfig {
            sigma_doctrine: 0.0,
            x_doctrine: 2.0,
            ..Default::default()
        };
        let mut rng = stream_rng(1, 0);
        let p = subunit_positions(10.0, &config, &mut rng);
        assert_eq!(p, [8.0, 10.0, 12.0]);
        assert_eq!(p[1] - p[0], 2.0);
        assert_eq!(p[2] - p[1], 2.0);
        assert_eq!((p[0] + p[1] + p[2]) / 3.0, 10.0);
    }

    #[test]
    fn subunit_center_of_gravity_mean() {
        let config = ScenarioConfig {
            sigma_doctrine: 1.5,
            ..Default::default()
        };
        let mut rng = stream_rng(11, 0);
        let draws = 100_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += subunit_positions(10.0, &config, &mut rng).iter().sum::<f64>();
        }
        let mean = sum / (3 * draws) as f64;
        let tol = 3.0 * config.sigma_doctrine / ((3 * draws) as f64).sqrt();
        assert!((mean - 10.0).abs() <= tol, "{mean}");
    }

    #[test]
    fn same_seed_same_output() {
        let config = ScenarioConfig {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(simulate(&config).unwrap(), simulate(&config).unwrap());
    }

    #[test]
    fn sensor_streams_are_independent() {
        let config = ScenarioConfig::default();
        let base = simulate(&config).unwrap();

        let mut streams = ScenarioStreams::from_seed(config.seed);
        streams.subunit_sensor = stream_rng(999, SUBUNIT_SENSOR_STREAM);
        let other = simulate_with_streams(&config, streams).unwrap();
        assert_eq!(base.truth, other.truth);
        assert_eq!(base.unit_observations, other.unit_observations);
        assert_ne!(base.subunit_observations, other.subunit_observations);

        let mut streams = ScenarioStreams::from_seed(config.seed);
        streams.unit_sensor = stream_rng(999, UNIT_SENSOR_STREAM);
        let other = simulate_with_streams(&config, streams).unwrap();
        assert_eq!(base.subunit_observations, other.subunit_observations);
        assert_ne!(base.unit_observations, other.unit_observations);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            ScenarioConfig { dt: 0.0, ..Default::default() },
            ScenarioConfig { sigma_u: -1.0, ..Default::default() },
            ScenarioConfig { p_detect: 1.5, ..Default::default() },
            ScenarioConfig { sigma_obs_x: 0.0, ..Default::default() },
            ScenarioConfig { n_steps: 0, ..Default::default() },
            ScenarioConfig { x_doctrine: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(simulate(&c).is_err(), "{c:?}");
        }
    }
}
