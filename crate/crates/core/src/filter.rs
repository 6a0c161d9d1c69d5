//! Sequential Monte Carlo PHD filter over (position, velocity).
//!
//! Each step runs the standard particle PHD recursion:
//!
//! * predict: near-constant-velocity motion with Gaussian process noise,
//!   survival thinning by `p_S`, and uniform birth particles appended;
//! * update: the PHD corrector
//!   `w' = (1 - p_D) w + Σ_z p_D g(z|x) w / (λ_c + Σ_j p_D g(z|x_j) w_j)`;
//! * resample: systematic, only when the effective sample size drops below
//!   half of the particle budget.
//!
//! Filters are plain values plus an explicit RNG, so two trackers never
//! share state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::phd::{Particle, ParticlePhd, StateVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionModel {
    /// Velocity drift added per step, m/s.
    pub mean_velocity_drift: f64,
    pub process_noise_std_position: f64,
    pub process_noise_std_velocity: f64,
    /// Probability `p_S` that an object persists to the next step.
    pub survival_probability: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            mean_velocity_drift: 0.0,
            process_noise_std_position: 0.3,
            process_noise_std_velocity: 0.3,
            survival_probability: 0.99,
        }
    }
}

impl MotionModel {
    pub fn validate(&self) -> Result<()> {
        check_nonneg_std("process_noise_std_position", self.process_noise_std_position)?;
        check_nonneg_std("process_noise_std_velocity", self.process_noise_std_velocity)?;
        if !self.mean_velocity_drift.is_finite() {
            return Err(Error::config("mean_velocity_drift must be finite"));
        }
        check_probability("survival_probability", self.survival_probability, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    /// Probability `p_D` that an existing object yields a measurement.
    pub detection_probability: f64,
    pub obs_noise_std_position: f64,
    pub obs_noise_std_velocity: f64,
    /// Clutter intensity `λ_c` per unit of measurement space.
    pub clutter_intensity: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            detection_probability: 0.95,
            obs_noise_std_position: 0.5,
            obs_noise_std_velocity: 0.1,
            clutter_intensity: 0.0,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        check_probability("detection_probability", self.detection_probability, false)?;
        for (name, v) in [
            ("obs_noise_std_position", self.obs_noise_std_position),
            ("obs_noise_std_velocity", self.obs_noise_std_velocity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.clutter_intensity.is_finite() && self.clutter_intensity >= 0.0) {
            return Err(Error::config(format!(
                "clutter_intensity must be >= 0, got {}",
                self.clutter_intensity
            )));
        }
        Ok(())
    }

    /// Log of the Gaussian measurement likelihood `g(z | x)` over both
    /// position and velocity.
    pub fn log_likelihood(&self, z: &StateVector, x: &StateVector) -> f64 {
        let (sx, sv) = (self.obs_noise_std_position, self.obs_noise_std_velocity);
        let ex = (z.position - x.position) / sx;
        let ev = (z.velocity - x.velocity) / sv;
        -0.5 * (ex * ex + ev * ev) - (std::f64::consts::TAU * sx * sv).ln()
    }
}

/// Uniform birth intensity over a position × velocity box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthModel {
    pub birth_mass_per_step: f64,
    pub position_range: (f64, f64),
    pub velocity_range: (f64, f64),
    pub particles_per_birth: usize,
}

impl Default for BirthModel {
    fn default() -> Self {
        Self {
            birth_mass_per_step: 0.02,
            position_range: (0.0, 250.0),
            velocity_range: (-3.0, 3.0),
            particles_per_birth: 2000,
        }
    }
}

impl BirthModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.birth_mass_per_step.is_finite() && self.birth_mass_per_step >= 0.0) {
            return Err(Error::config("birth_mass_per_step must be >= 0"));
        }
        for (name, (lo, hi)) in [
            ("birth position range", self.position_range),
            ("birth velocity range", self.velocity_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!("{name} [{lo}, {hi}] is degenerate")));
            }
        }
        if self.particles_per_birth == 0 {
            return Err(Error::config("particles_per_birth must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub particles_per_expected_target: usize,
    pub motion: MotionModel,
    pub sensor: SensorModel,
    pub birth: BirthModel,
    /// Selects the filter's RNG stream under the experiment's master seed.
    pub rng_seed: u64,
}

pub const MIN_PARTICLE_BUDGET: usize = 50;

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles_per_expected_target: 500,
            motion: MotionModel::default(),
            sensor: SensorModel::default(),
            birth: BirthModel::default(),
            rng_seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles_per_expected_target < MIN_PARTICLE_BUDGET {
            return Err(Error::config(format!(
                "particles_per_expected_target must be >= {MIN_PARTICLE_BUDGET}"
            )));
        }
        self.motion.validate()?;
        self.sensor.validate()?;
        self.birth.validate()
    }

    /// Particle budget for a PHD of the given mass: the per-target count
    /// scaled by the expected number of targets, never below one target's worth.
    pub fn particle_budget(&self, mass: f64) -> usize {
        let scaled = (mass * self.particles_per_expected_target as f64).ceil();
        (scaled as usize).max(self.particles_per_expected_target)
    }
}

fn check_nonneg_std(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} must be >= 0, got {v}")))
    }
}

fn check_probability(name: &str, p: f64, allow_zero: bool) -> Result<()> {
    let ok = p <= 1.0 && if allow_zero { p >= 0.0 } else { p > 0.0 };
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("{name} out of range: {p}")))
    }
}

/// Moves every particle through the motion model, thins by `p_S` and
/// appends the birth particles.
pub fn predict<R: Rng + ?Sized>(
    phd: &ParticlePhd,
    motion: &MotionModel,
    birth: &BirthModel,
    dt: f64,
    rng: &mut R,
) -> ParticlePhd {
    debug_assert!(dt > 0.0);
    let n_birth = if birth.birth_mass_per_step > 0.0 {
        birth.particles_per_birth
    } else {
        0
    };
    let mut out = Vec::with_capacity(phd.len() + n_birth);
    for p in phd.particles() {
        let n_x: f64 = rng.sample(StandardNormal);
        let n_v: f64 = rng.sample(StandardNormal);
        let StateVector { position, velocity } = p.state;
        out.push(Particle {
            state: StateVector {
                position: position + velocity * dt + motion.process_noise_std_position * n_x,
                velocity: velocity
                    + motion.mean_velocity_drift
                    + motion.process_noise_std_velocity * n_v,
            },
            weight: p.weight * motion.survival_probability,
        });
    }
    if n_birth > 0 {
        let w = birth.birth_mass_per_step / n_birth as f64;
        let (x0, x1) = birth.position_range;
        let (v0, v1) = birth.velocity_range;
        for _ in 0..n_birth {
            out.push(Particle {
                state: StateVector::new(rng.random_range(x0..x1), rng.random_range(v0..v1)),
                weight: w,
            });
        }
    }
    ParticlePhd::from_particles_unchecked(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateDiagnostics {
    /// Observations whose corrector denominator was zero (no clutter and no
    /// particle with positive likelihood-weight); they contribute nothing.
    pub degenerate_observations: usize,
}

/// PHD corrector. Particle states are unchanged; only weights move.
///
/// Sums run in the log domain so that far-off observations still resolve
/// onto the nearest particles instead of underflowing to 0/0.
pub fn update(
    phd: &ParticlePhd,
    observations: &[StateVector],
    sensor: &SensorModel,
) -> (ParticlePhd, UpdateDiagnostics) {
    let p_d = sensor.detection_probability;
    let mut weights: Vec<f64> = phd.particles().iter().map(|p| (1.0 - p_d) * p.weight).collect();
    let mut diag = UpdateDiagnostics::default();
    let log_clutter = if sensor.clutter_intensity > 0.0 {
        Some(sensor.clutter_intensity.ln())
    } else {
        None
    };
    let mut terms = vec![f64::NEG_INFINITY; phd.len()];
    for z in observations {
        let mut max = f64::NEG_INFINITY;
        for (t, p) in terms.iter_mut().zip(phd.particles()) {
            *t = if p.weight > 0.0 {
                p_d.ln() + sensor.log_likelihood(z, &p.state) + p.weight.ln()
            } else {
                f64::NEG_INFINITY
            };
            max = max.max(*t);
        }
        if max == f64::NEG_INFINITY && log_clutter.is_none() {
            diag.degenerate_observations += 1;
            continue;
        }
        let log_sum = if max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
        };
        let log_denom = match log_clutter {
            Some(lc) => log_add_exp(lc, log_sum),
            None => log_sum,
        };
        for (w, t) in weights.iter_mut().zip(&terms) {
            if *t > f64::NEG_INFINITY {
                *w += (t - log_denom).exp();
            }
        }
    }
    let particles = phd
        .particles()
        .iter()
        .zip(weights)
        .map(|(p, weight)| Particle { state: p.state, weight })
        .collect();
    (ParticlePhd::from_particles_unchecked(particles), diag)
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        hi
    } else {
        hi + (lo - hi).exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ResampleDiagnostics {
    /// Set when the input carried no mass and the output is empty.
    pub zero_mass: bool,
}

/// Systematic resampling to `target_count` equally weighted particles. The
/// total mass is carried over: each output weight is `mass / target_count`.
pub fn resample<R: Rng + ?Sized>(
    phd: &ParticlePhd,
    target_count: usize,
    rng: &mut R,
) -> (ParticlePhd, ResampleDiagnostics) {
    let mass = phd.mass();
    if mass.is_nan() || mass <= 0.0 || target_count == 0 {
        return (ParticlePhd::empty(), ResampleDiagnostics { zero_mass: true });
    }
    let particles = phd.particles();
    // Index of the last particle with positive weight, the fallback when
    // rounding leaves the cumulative sum short of the final pointer.
    let last_positive = particles.iter().rposition(|p| p.weight > 0.0).unwrap_or(0);
    let step = mass / target_count as f64;
    let u0: f64 = rng.random::<f64>();
    let mut out = Vec::with_capacity(target_count);
    let mut i = 0;
    let mut cumulative = particles[0].weight;
    for k in 0..target_count {
        let pointer = (u0 + k as f64) * step;
        while cumulative <= pointer && i < last_positive {
            i += 1;
            cumulative += particles[i].weight;
        }
        out.push(Particle {
            state: particles[i].state,
            weight: step,
        });
    }
    (ParticlePhd::from_particles_unchecked(out), ResampleDiagnostics::default())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepDiagnostics {
    pub update: UpdateDiagnostics,
    pub resampled: bool,
    pub zero_mass: bool,
}

/// One predict → update → (conditional) resample cycle.
///
/// Resampling runs when the effective sample size falls below half the
/// particle budget, or when the particle count exceeds four budgets (birth
/// particles otherwise accumulate while weights stay uniform).
pub fn filter_step<R: Rng + ?Sized>(
    phd: &ParticlePhd,
    observations: &[StateVector],
    config: &FilterConfig,
    dt: f64,
    rng: &mut R,
) -> (ParticlePhd, StepDiagnostics) {
    let predicted = predict(phd, &config.motion, &config.birth, dt, rng);
    let (updated, update_diag) = update(&predicted, observations, &config.sensor);
    let mut diag = StepDiagnostics {
        update: update_diag,
        ..Default::default()
    };
    let budget = config.particle_budget(updated.mass());
    let ess = updated.effective_sample_size();
    if ess < 0.5 * budget as f64 || updated.len() > 4 * budget {
        let (resampled, rdiag) = resample(&updated, budget, rng);
        diag.resampled = true;
        diag.zero_mass = rdiag.zero_mass;
        return (resampled, diag);
    }
    (updated, diag)
}

/// A PHD particle filter instance: configuration, current PHD and RNG.
#[derive(Debug, Clone)]
pub struct PhdFilter {
    config: FilterConfig,
    phd: ParticlePhd,
    rng: ChaCha8Rng,
    degenerate_observations: usize,
}

impl PhdFilter {
    pub fn new(config: FilterConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            phd: ParticlePhd::empty(),
            rng,
            degenerate_observations: 0,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn phd(&self) -> &ParticlePhd {
        &self.phd
    }

    /// Running count of observations the corrector could not attribute.
    pub fn degenerate_observations(&self) -> usize {
        self.degenerate_observations
    }

    pub fn step(&mut self, observations: &[StateVector], dt: f64) -> Result<StepDiagnostics> {
        let (next, diag) = filter_step(&self.phd, observations, &self.config, dt, &mut self.rng);
        if let Some(p) = next
            .particles()
            .iter()
            .find(|p| !(p.weight.is_finite() && p.state.is_finite()))
        {
            return Err(Error::Numerical(format!("filter produced particle {p:?}")));
        }
        self.degenerate_observations += diag.update.degenerate_observations;
        self.phd = next;
        Ok(diag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn phd_of(items: &[(f64, f64, f64)]) -> ParticlePhd {
        ParticlePhd::new(
            items
                .iter()
                .map(|&(x, v, w)| Particle {
                    state: StateVector::new(x, v),
                    weight: w,
                })
                .collect(),
        )
        .unwrap()
    }

    fn no_birth() -> BirthModel {
        BirthModel {
            birth_mass_per_step: 0.0,
            ..Default::default()
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn predict_conserves_mass_without_death_or_birth() {
        let phd = phd_of(&[(0.0, 1.0, 0.3), (5.0, -1.0, 0.7), (9.0, 0.0, 1.1)]);
        let motion = MotionModel {
            survival_probability: 1.0,
            ..Default::default()
        };
        let out = predict(&phd, &motion, &no_birth(), 1.0, &mut rng());
        assert_eq!(out.len(), 3);
        assert!(rel(out.mass(), phd.mass()) <= 1e-12);
    }

    #[test]
    fn predict_scales_mass_by_survival() {
        let phd = phd_of(&[(0.0, 1.0, 0.25), (1.0, 1.0, 0.75)]);
        let motion = MotionModel {
            survival_probability: 0.9,
            ..Default::default()
        };
        let out = predict(&phd, &motion, &no_birth(), 1.0, &mut rng());
        assert!((out.mass() - 0.9).abs() <= 1e-12);
    }

    #[test]
    fn predict_noise_free_kinematics() {
        let phd = phd_of(&[(0.0, 2.0, 1.0)]);
        let motion = MotionModel {
            mean_velocity_drift: 0.0,
            process_noise_std_position: 0.0,
            process_noise_std_velocity: 0.0,
            survival_probability: 1.0,
        };
        let out = predict(&phd, &motion, &no_birth(), 1.0, &mut rng());
        assert_eq!(out.particles()[0].state, StateVector::new(2.0, 2.0));
    }

    #[test]
    fn predict_appends_birth_inside_region() {
        let birth = BirthModel {
            birth_mass_per_step: 0.5,
            position_range: (10.0, 20.0),
            velocity_range: (-1.0, 1.0),
            particles_per_birth: 100,
        };
        let out = predict(&ParticlePhd::empty(), &MotionModel::default(), &birth, 1.0, &mut rng());
        assert_eq!(out.len(), 100);
        assert!((out.mass() - 0.5).abs() < 1e-12);
        assert!(out.particles().iter().all(|p| {
            (10.0..20.0).contains(&p.state.position) && (-1.0..1.0).contains(&p.state.velocity)
        }));
    }

    #[test]
    fn update_without_observations_scales_by_missed_detection() {
        let phd = phd_of(&[(0.0, 1.0, 0.4), (3.0, 1.0, 0.8)]);
        let sensor = SensorModel::default();
        let (out, diag) = update(&phd, &[], &sensor);
        for (a, b) in out.particles().iter().zip(phd.particles()) {
            assert_eq!(a.weight, b.weight * (1.0 - sensor.detection_probability));
            assert_eq!(a.state, b.state);
        }
        assert_eq!(diag.degenerate_observations, 0);
    }

    #[test]
    fn update_single_particle_observation_on_top() {
        // The detection term normalizes to exactly one object per observation.
        let sensor = SensorModel::default();
        let p_d = sensor.detection_probability;
        for w in [1.0, 0.4, 2.5] {
            let phd = phd_of(&[(4.0, 1.0, w)]);
            let (out, _) = update(&phd, &[StateVector::new(4.0, 1.0)], &sensor);
            assert!(rel(out.mass(), (1.0 - p_d) * w + 1.0) < 1e-12, "w = {w}");
        }
    }

    #[test]
    fn update_clutter_dominated_limit() {
        let sensor = SensorModel {
            clutter_intensity: 1e12,
            ..Default::default()
        };
        let phd = phd_of(&[(0.0, 1.0, 0.6), (0.3, 1.1, 0.6)]);
        let (out, _) = update(&phd, &[StateVector::new(0.1, 1.0)], &sensor);
        let expected = (1.0 - sensor.detection_probability) * phd.mass();
        assert!(rel(out.mass(), expected) < 1e-9);
    }

    #[test]
    fn update_guards_zero_denominator() {
        let phd = phd_of(&[(0.0, 0.0, 0.0)]);
        let (out, diag) = update(&phd, &[StateVector::new(0.0, 0.0)], &SensorModel::default());
        assert_eq!(out.mass(), 0.0);
        assert_eq!(diag.degenerate_observations, 1);

        let (out, diag) = update(&ParticlePhd::empty(), &[StateVector::new(0.0, 0.0)], &SensorModel::default());
        assert!(out.is_empty());
        assert_eq!(diag.degenerate_observations, 1);
    }

    #[test]
    fn update_far_observation_resolves_to_nearest_particle() {
        let phd = phd_of(&[(0.0, 0.0, 1.0), (10.0, 0.0, 1.0)]);
        let (out, diag) = update(&phd, &[StateVector::new(500.0, 0.0)], &SensorModel::default());
        assert_eq!(diag.degenerate_observations, 0);
        let w = out.particles()[1].weight;
        assert!((w - (0.05 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn resample_examples() {
        let phd = phd_of(&[(1.0, 0.0, 3.0)]);
        let (out, diag) = resample(&phd, 6, &mut rng());
        assert!(!diag.zero_mass);
        assert_eq!(out.len(), 6);
        assert!(out.particles().iter().all(|p| p.weight == 0.5 && p.state.position == 1.0));

        let phd = phd_of(&(0..50).map(|i| (i as f64, 0.0, 2.7 / 50.0)).collect::<Vec<_>>());
        let (out, _) = resample(&phd, 1000, &mut rng());
        assert_eq!(out.len(), 1000);
        assert!(out.particles().iter().all(|p| (p.weight - 0.0027).abs() < 1e-15));
        assert!(rel(out.mass(), phd.mass()) <= 1e-12);
    }

    #[test]
    fn resample_uniform_input_keeps_mass_and_count() {
        let phd = phd_of(&(0..200).map(|i| (i as f64, 0.0, 0.01)).collect::<Vec<_>>());
        let (out, _) = resample(&phd, 200, &mut rng());
        assert_eq!(out.len(), 200);
        assert!(rel(out.mass(), phd.mass()) <= 1e-12);
        // systematic resampling of equal weights keeps each particle exactly once
        let mut xs: Vec<f64> = out.particles().iter().map(|p| p.state.position).collect();
        xs.dedup();
        assert_eq!(xs.len(), 200);
    }

    #[test]
    fn resample_zero_mass_is_empty_and_flagged() {
        let phd = phd_of(&[(0.0, 0.0, 0.0)]);
        let (out, diag) = resample(&phd, 10, &mut rng());
        assert!(out.is_empty());
        assert!(diag.zero_mass);
    }

    #[test]
    fn resample_skips_zero_weight_particles() {
        let phd = phd_of(&[(0.0, 0.0, 0.0), (1.0, 0.0, 1.0), (2.0, 0.0, 0.0)]);
        let (out, _) = resample(&phd, 100, &mut rng());
        assert!(out.particles().iter().all(|p| p.state.position == 1.0));
    }

    #[test]
    fn missed_detections_decay_geometrically() {
        let config = FilterConfig {
            birth: no_birth(),
            ..Default::default()
        };
        let rate = config.motion.survival_probability * (1.0 - config.sensor.detection_probability);
        let mut phd = phd_of(&(0..500).map(|i| (100.0 + i as f64 * 0.01, 1.0, 1.0 / 500.0)).collect::<Vec<_>>());
        let mut r = rng();
        for k in 1..=10 {
            phd = filter_step(&phd, &[], &config, 1.0, &mut r).0;
            assert!(rel(phd.mass(), rate.powi(k)) < 1e-9, "step {k}");
        }
    }

    #[test]
    fn filter_step_is_deterministic() {
        let config = FilterConfig::default();
        let obs = [StateVector::new(120.0, 1.0)];
        let run = || {
            let mut r = ChaCha8Rng::seed_from_u64(99);
            let mut phd = ParticlePhd::empty();
            for _ in 0..5 {
                phd = filter_step(&phd, &obs, &config, 1.0, &mut r).0;
            }
            phd
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        assert!(FilterConfig::default().validate().is_ok());
        let mut c = FilterConfig::default();
        c.particles_per_expected_target = 10;
        assert!(c.validate().is_err());
        let mut c = FilterConfig::default();
        c.sensor.detection_probability = 0.0;
        assert!(c.validate().is_err());
        let mut c = FilterConfig::default();
        c.motion.survival_probability = 1.2;
        assert!(c.validate().is_err());
        let mut c = FilterConfig::default();
        c.birth.velocity_range = (1.0, 1.0);
        assert!(c.validate().is_err());
        let mut c = FilterConfig::default();
        c.sensor.clutter_intensity = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn particle_budget_floor() {
        let c = FilterConfig::default();
        assert_eq!(c.particle_budget(0.0), 500);
        assert_eq!(c.particle_budget(0.3), 500);
        assert_eq!(c.particle_budget(2.9), 1450);
    }
}
