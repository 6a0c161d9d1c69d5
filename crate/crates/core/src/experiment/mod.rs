//! End-to-end experiment: scenario → two independent PHD filters →
//! discretization → doctrine transform → distances (and optional failure
//! localization) at every time step.

mod config;
pub mod output;

use std::path::Path;

pub use config::{parse_norms, DoctrineChoice, ExperimentConfig, LocalizationConfig, Preset, DEFAULT_GRID};

use serde::Serialize;

use crate::doctrine::{apply_doctrine, superpose, DoctrineMask};
use crate::error::{Error, Result};
use crate::filter::PhdFilter;
use crate::metrics::{distance, localize_failure, DiscrepancyRegion, NormOrder};
use crate::phd::{discretize, GridPhd};
use crate::scenario::{simulate, stream_rng, Simulation, FILTER_STREAM_BASE};

/// Per-step masses and distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub mass_u: f64,
    pub mass_su: f64,
    pub mass_su_star: f64,
    pub d_1: Option<f64>,
    pub d_2: Option<f64>,
    pub d_inf: Option<f64>,
    /// Particle mass outside the grid (both filters) plus mass the doctrine
    /// convolution pushed past the domain edges.
    pub leaked_mass: f64,
    pub regions: Vec<DiscrepancyRegion>,
}

impl StepRecord {
    pub fn distance(&self, p: NormOrder) -> Option<f64> {
        match p {
            NormOrder::L1 => self.d_1,
            NormOrder::L2 => self.d_2,
            NormOrder::Inf => self.d_inf,
        }
    }

    fn check_finite(&self) -> Result<()> {
        let values = [self.mass_u, self.mass_su, self.mass_su_star, self.leaked_mass]
            .into_iter()
            .chain([self.d_1, self.d_2, self.d_inf].into_iter().flatten());
        for v in values {
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite value at step {}", self.t)));
            }
        }
        Ok(())
    }
}

/// Everything computed at one step: the record and the three grids.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub record: StepRecord,
    /// Unit PHD `D_U`.
    pub unit: GridPhd,
    /// Sub-unit PHD `D_SU` from the sub-unit tracker.
    pub subunit: GridPhd,
    /// Synthesized sub-unit PHD `D*_SU = Doctrine(D_U)`.
    pub synthesized: GridPhd,
}

/// A running experiment. Iterating yields one [`StepOutput`] per time step.
pub struct Experiment {
    config: ExperimentConfig,
    simulation: Simulation,
    unit: PhdFilter,
    subunit: PhdFilter,
    mask: DoctrineMask,
    t: usize,
}

impl Experiment {
    /// Validates the config, builds the doctrine mask and simulates the
    /// scenario. Configuration errors surface here, before any filtering.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mask = superpose(&config.doctrine_specs()?, config.grid.dx(), config.truncation_sigmas)?;
        let simulation = simulate(&config.scenario)?;
        let seed = config.scenario.seed;
        let unit = PhdFilter::new(
            config.unit_filter,
            stream_rng(seed, FILTER_STREAM_BASE + config.unit_filter.rng_seed),
        )?;
        let subunit = PhdFilter::new(
            config.subunit_filter,
            stream_rng(seed, FILTER_STREAM_BASE + config.subunit_filter.rng_seed),
        )?;
        Ok(Self {
            config,
            simulation,
            unit,
            subunit,
            mask,
            t: 0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn simulation(&self) -> &Simulation {
        &self.simulation
    }

    pub fn mask(&self) -> &DoctrineMask {
        &self.mask
    }

    fn advance(&mut self) -> Result<StepOutput> {
        let t = self.t;
        let dt = self.config.scenario.dt;
        let unit_obs = &self.simulation.unit_observations[t].measurements;
        let subunit_obs = &self.simulation.subunit_observations[t].measurements;
        let (unit, subunit) = (&mut self.unit, &mut self.subunit);

        #[cfg(feature = "parallel")]
        let (ru, rs) = rayon::join(|| unit.step(unit_obs, dt), || subunit.step(subunit_obs, dt));
        #[cfg(not(feature = "parallel"))]
        let (ru, rs) = (unit.step(unit_obs, dt), subunit.step(subunit_obs, dt));
        ru?;
        rs?;

        let grid = &self.config.grid;
        let d_u = discretize(self.unit.phd(), grid);
        let d_su = discretize(self.subunit.phd(), grid);
        let synth = apply_doctrine(&d_u.grid, &self.mask)?;

        let wants = |p: NormOrder| self.config.norms.contains(&p);
        let dist = |p: NormOrder| -> Result<Option<f64>> {
            if wants(p) {
                distance(&d_su.grid, &synth.grid, p).map(Some)
            } else {
                Ok(None)
            }
        };
        let regions = match &self.config.localization {
            Some(loc) => localize_failure(&d_su.grid, &synth.grid, loc.norm, loc.threshold, loc.min_width)?,
            None => Vec::new(),
        };
        let record = StepRecord {
            t,
            mass_u: d_u.grid.mass(),
            mass_su: d_su.grid.mass(),
            mass_su_star: synth.grid.mass(),
            d_1: dist(NormOrder::L1)?,
            d_2: dist(NormOrder::L2)?,
            d_inf: dist(NormOrder::Inf)?,
            leaked_mass: d_u.dropped_mass + d_su.dropped_mass + synth.leaked_mass,
            regions,
        };
        record.check_finite()?;
        self.t += 1;
        Ok(StepOutput {
            record,
            unit: d_u.grid,
            subunit: d_su.grid,
            synthesized: synth.grid,
        })
    }
}

impl Iterator for Experiment {
    type Item = Result<StepOutput>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.t >= self.config.scenario.n_steps {
            return None;
        }
        let out = self.advance();
        if out.is_err() {
            // stop after the first failure
            self.t = self.config.scenario.n_steps;
        }
        Some(out)
    }
}

/// Runs the experiment in memory and returns its step records.
pub fn run(config: &ExperimentConfig) -> Result<Vec<StepRecord>> {
    Experiment::new(config.clone())?
        .map(|s| s.map(|s| s.record))
        .collect()
}

/// Runs the experiment and writes all artifacts into `out_dir`.
pub fn run_to_dir(config: &ExperimentConfig, out_dir: &Path) -> Result<(Vec<StepRecord>, Summary)> {
    std::fs::create_dir_all(out_dir)?;
    let experiment = Experiment::new(config.clone())?;
    std::fs::write(out_dir.join("config_used.txt"), config.to_config_string())?;
    output::write_truth_csv(&out_dir.join("truth.csv"), &experiment.simulation().truth)?;
    output::write_observations_csv(&out_dir.join("observations.csv"), experiment.simulation())?;

    let mut records = Vec::with_capacity(config.scenario.n_steps);
    let mut snapshots = Vec::new();
    for step in experiment {
        let step = step?;
        if config.snapshot_every > 0 && step.record.t % config.snapshot_every == 0 {
            let name = format!("grids_{}.csv", step.record.t);
            output::write_grid_snapshot(&out_dir.join(&name), &step)?;
            snapshots.push(step.record.t);
        }
        records.push(step.record);
    }
    output::write_records_csv(&out_dir.join("records.csv"), &records)?;
    if config.localization.is_some() {
        output::write_regions_csv(&out_dir.join("regions.csv"), &records)?;
    }
    let summary = summarize(&records, config.burn_in)?;
    output::write_summary_csv(&out_dir.join("summary.csv"), &summary)?;
    output::write_gnuplot_script(&out_dir.join("plot.gp"), &snapshots)?;
    Ok((records, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
    pub steps: usize,
}

/// Per-metric statistics over the post-burn-in steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn get(&self, metric: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn distance(&self, p: NormOrder) -> Option<&SummaryRow> {
        self.get(&format!("d_{}", p.label()))
    }
}

fn stats(metric: &str, values: &[f64]) -> SummaryRow {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    SummaryRow {
        metric: metric.to_string(),
        mean,
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        std: var.sqrt(),
        steps: values.len(),
    }
}

/// Summarizes the records after dropping the first `burn_in` steps.
pub fn summarize(records: &[StepRecord], burn_in: usize) -> Result<Summary> {
    if records.len() <= burn_in {
        return Err(Error::config(format!(
            "{} records leave nothing after a burn-in of {burn_in}",
            records.len()
        )));
    }
    let kept = &records[burn_in..];
    let mut rows = Vec::new();
    for p in NormOrder::ALL {
        let values: Option<Vec<f64>> = kept.iter().map(|r| r.distance(p)).collect();
        if let Some(values) = values {
            rows.push(stats(&format!("d_{}", p.label()), &values));
        }
    }
    type Field = fn(&StepRecord) -> f64;
    let fields: [(&str, Field); 4] = [
        ("mass_U", |r| r.mass_u),
        ("mass_SU", |r| r.mass_su),
        ("mass_SU_star", |r| r.mass_su_star),
        ("leaked_mass", |r| r.leaked_mass),
    ];
    for (name, f) in fields {
        let values: Vec<f64> = kept.iter().map(f).collect();
        rows.push(stats(name, &values));
    }
    Ok(Summary { rows })
}

/// Summary for each of `n_seeds` consecutive seeds starting at the
/// config's seed. Seeds run in parallel when the `parallel` feature is on.
pub fn batch(config: &ExperimentConfig, n_seeds: u64) -> Result<Vec<(u64, Summary)>> {
    config.validate()?;
    let base = config.scenario.seed;
    let one = |k: u64| -> Result<(u64, Summary)> {
        let seed = base.wrapping_add(k);
        let records = run(&config.clone().with_seed(seed))?;
        Ok((seed, summarize(&records, config.burn_in)?))
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_seeds).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_seeds).map(one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize, d1: f64) -> StepRecord {
        StepRecord {
            t,
            mass_u: 1.0,
            mass_su: 3.0,
            mass_su_star: 3.0,
            d_1: Some(d1),
            d_2: None,
            d_inf: None,
            leaked_mass: 0.0,
            regions: vec![],
        }
    }

    #[test]
    fn summarize_constant_series() {
        let records: Vec<_> = (0..30).map(|t| record(t, 1.7)).collect();
        let s = summarize(&records, 20).unwrap();
        let d1 = s.distance(NormOrder::L1).unwrap();
        assert!((d1.mean - 1.7).abs() < 1e-12);
        assert_eq!(d1.max, 1.7);
        assert!(d1.std < 1e-12);
        assert_eq!(d1.steps, 10);
        assert!(s.distance(NormOrder::L2).is_none());
    }

    #[test]
    fn summarize_zero_series() {
        let records: Vec<_> = (0..5)
            .map(|t| StepRecord {
                d_2: Some(0.0),
                d_inf: Some(0.0),
                mass_u: 0.0,
                mass_su: 0.0,
                mass_su_star: 0.0,
                ..record(t, 0.0)
            })
            .collect();
        let s = summarize(&records, 0).unwrap();
        for row in &s.rows {
            assert_eq!((row.mean, row.max, row.std), (0.0, 0.0, 0.0), "{}", row.metric);
        }
    }

    #[test]
    fn summarize_needs_records_after_burn_in() {
        let records: Vec<_> = (0..20).map(|t| record(t, 1.0)).collect();
        assert!(summarize(&records, 20).is_err());
        assert!(summarize(&records, 19).is_ok());
    }

    #[test]
    fn non_finite_records_are_numerical_failures() {
        let mut r = record(0, 1.0);
        r.d_1 = Some(f64::NAN);
        assert_eq!(r.check_finite().unwrap_err().exit_code(), 3);
    }

    #[test]
    fn short_run_produces_one_record_per_step() {
        let mut config = ExperimentConfig::default();
        config.scenario.n_steps = 25;
        config.norms = vec![NormOrder::L1];
        let records = run(&config).unwrap();
        assert_eq!(records.len(), 25);
        for (t, r) in records.iter().enumerate() {
            assert_eq!(r.t, t);
            assert!(r.d_1.is_some() && r.d_2.is_none() && r.d_inf.is_none());
            assert!(r.d_1.unwrap() <= r.mass_su + r.mass_su_star + 1e-9);
        }
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let mut config = ExperimentConfig::default();
        config.scenario.n_steps = 1000;
        assert!(matches!(Experiment::new(config), Err(Error::Config(_))));
    }
}
