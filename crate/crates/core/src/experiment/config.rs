//! Experiment configuration and its flat `key = value` file format.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Keys are namespaced by component (`scenario.sigma_doctrine`,
//! `unit_filter.particles_per_birth`, `grid.n_bins`, ...). Unknown or
//! repeated keys are errors. Filter sensor parameters default to the
//! scenario's, and the birth region defaults to the grid domain.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::doctrine::{DoctrineSpec, DEFAULT_TRUNCATION_SIGMAS};
use crate::error::{Error, Result};
use crate::filter::{BirthModel, FilterConfig, MotionModel, SensorModel};
use crate::metrics::NormOrder;
use crate::phd::GridSpec;
use crate::scenario::ScenarioConfig;

/// Which doctrine the unit PHD is transformed with.
#[derive(Debug, Clone, PartialEq)]
pub enum DoctrineChoice {
    /// Three sub-units at the scenario's `x_doctrine` and `sigma_doctrine`.
    Matched,
    Explicit(DoctrineSpec),
    /// Prior-weighted superposition of several doctrines.
    Superposition(Vec<(DoctrineSpec, f64)>),
}

impl DoctrineChoice {
    /// The expected sub-unit count implied by the choice.
    pub fn subunit_count(&self) -> f64 {
        match self {
            DoctrineChoice::Matched => 3.0,
            DoctrineChoice::Explicit(s) => s.subunit_count(),
            DoctrineChoice::Superposition(v) => v.iter().map(|(s, p)| p * s.subunit_count()).sum(),
        }
    }

    fn max_half_width(&self, scenario: &ScenarioConfig, truncation: f64) -> f64 {
        match self {
            DoctrineChoice::Matched => scenario.x_doctrine + truncation * scenario.sigma_doctrine,
            DoctrineChoice::Explicit(s) => s.half_width(truncation),
            DoctrineChoice::Superposition(v) => v
                .iter()
                .map(|(s, _)| s.half_width(truncation))
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationConfig {
    pub threshold: f64,
    pub min_width: f64,
    pub norm: NormOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub unit_filter: FilterConfig,
    pub subunit_filter: FilterConfig,
    pub doctrine: DoctrineChoice,
    pub truncation_sigmas: f64,
    pub grid: GridSpec,
    pub norms: Vec<NormOrder>,
    pub localization: Option<LocalizationConfig>,
    /// Leading steps excluded from summaries.
    pub burn_in: usize,
    /// Write a grid snapshot every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
}

pub const DEFAULT_GRID: (f64, f64, usize) = (0.0, 300.0, 600);

impl Default for ExperimentConfig {
    fn default() -> Self {
        let scenario = ScenarioConfig::default();
        let grid = GridSpec::new(DEFAULT_GRID.0, DEFAULT_GRID.1, DEFAULT_GRID.2).expect("valid default grid");
        let unit_filter = default_filter(&scenario, &grid, 0);
        let subunit_filter = default_filter(&scenario, &grid, 1);
        Self {
            scenario,
            unit_filter,
            subunit_filter,
            doctrine: DoctrineChoice::Matched,
            truncation_sigmas: DEFAULT_TRUNCATION_SIGMAS,
            grid,
            norms: NormOrder::ALL.to_vec(),
            localization: None,
            burn_in: 20,
            snapshot_every: 10,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn default_filter(scenario: &ScenarioConfig, grid: &GridSpec, rng_seed: u64) -> FilterConfig {
    FilterConfig {
        sensor: SensorModel {
            detection_probability: scenario.p_detect,
            obs_noise_std_position: scenario.sigma_obs_x,
            obs_noise_std_velocity: scenario.sigma_obs_v,
            clutter_intensity: 0.0,
        },
        birth: BirthModel {
            position_range: (grid.x_min(), grid.x_max()),
            ..BirthModel::default()
        },
        rng_seed,
        ..FilterConfig::default()
    }
}

/// The three doctrine regimes: near-rigid, moderate and loose formations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `sigma_doctrine = 0.01 * sigma_obs_x`.
    Exact,
    /// `sigma_doctrine = sigma_obs_x`.
    Moderate,
    /// `sigma_doctrine = x_doctrine`.
    Loose,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Exact, Preset::Moderate, Preset::Loose];

    pub fn sigma_doctrine(&self, scenario: &ScenarioConfig) -> f64 {
        match self {
            Preset::Exact => 0.01 * scenario.sigma_obs_x,
            Preset::Moderate => scenario.sigma_obs_x,
            Preset::Loose => scenario.x_doctrine,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Exact => "exact",
            Preset::Moderate => "moderate",
            Preset::Loose => "loose",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Preset::Exact),
            "moderate" => Ok(Preset::Moderate),
            "loose" => Ok(Preset::Loose),
            other => Err(Error::config(format!(
                "unknown preset {other:?}; use exact, moderate or loose"
            ))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ExperimentConfig {
    /// Applies a preset. Only `scenario.sigma_doctrine` changes.
    pub fn with_preset(mut self, preset: Preset) -> Self {
        self.scenario.sigma_doctrine = preset.sigma_doctrine(&self.scenario);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self
    }

    /// The doctrines the transform uses, with priors.
    pub fn doctrine_specs(&self) -> Result<Vec<(DoctrineSpec, f64)>> {
        Ok(match &self.doctrine {
            DoctrineChoice::Matched => vec![(
                DoctrineSpec::three_abreast(self.scenario.x_doctrine, self.scenario.sigma_doctrine)?,
                1.0,
            )],
            DoctrineChoice::Explicit(s) => vec![(s.clone(), 1.0)],
            DoctrineChoice::Superposition(v) => v.clone(),
        })
    }

    /// Checks every component and their mutual consistency. Runs before any
    /// simulation.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.unit_filter
            .validate()
            .map_err(|e| e.context("unit_filter"))?;
        self.subunit_filter
            .validate()
            .map_err(|e| e.context("subunit_filter"))?;
        if self.norms.is_empty() {
            return Err(Error::config("at least one norm must be requested"));
        }
        if !(self.truncation_sigmas.is_finite() && self.truncation_sigmas >= 0.0) {
            return Err(Error::config("doctrine.truncation_sigmas must be >= 0"));
        }
        let specs = self.doctrine_specs()?;
        if let DoctrineChoice::Superposition(v) = &self.doctrine {
            if v.is_empty() {
                return Err(Error::config("doctrine superposition is empty"));
            }
            let total: f64 = v.iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!("doctrine priors sum to {total}, not 1")));
            }
        } else {
            let count = specs[0].0.subunit_count();
            if (count - 3.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "doctrine describes {count} sub-units but the scenario has 3"
                )));
            }
        }
        let width = self.grid.x_max() - self.grid.x_min();
        let mask_reach = self.doctrine.max_half_width(&self.scenario, self.truncation_sigmas);
        if 2.0 * mask_reach >= width {
            return Err(Error::config(format!(
                "doctrine mask (half-width {mask_reach}) does not fit in the grid domain"
            )));
        }
        let (lo, hi) = self.scenario.reachable_interval();
        if lo < self.grid.x_min() || hi > self.grid.x_max() {
            return Err(Error::config(format!(
                "grid [{}, {}] does not cover the reachable positions [{lo:.1}, {hi:.1}]",
                self.grid.x_min(),
                self.grid.x_max()
            )));
        }
        if let Some(loc) = &self.localization {
            if !(loc.threshold.is_finite() && loc.threshold > 0.0) {
                return Err(Error::config("localize.threshold must be > 0"));
            }
            if loc.min_width.is_nan() || loc.min_width < 2.0 * self.grid.dx() {
                return Err(Error::config(format!(
                    "localize.min_width must be at least two bins ({})",
                    2.0 * self.grid.dx()
                )));
            }
        }
        if self.burn_in >= self.scenario.n_steps {
            return Err(Error::config(format!(
                "burn_in ({}) must be shorter than n_steps ({})",
                self.burn_in, self.scenario.n_steps
            )));
        }
        Ok(())
    }

    /// Parses a config file's text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Entries::read(text)?;
        let mut c = ExperimentConfig::default();

        let s = &mut c.scenario;
        entries.set("scenario.v_u", &mut s.v_u)?;
        entries.set("scenario.sigma_u", &mut s.sigma_u)?;
        entries.set("scenario.x_doctrine", &mut s.x_doctrine)?;
        entries.set("scenario.sigma_doctrine", &mut s.sigma_doctrine)?;
        entries.set("scenario.p_detect", &mut s.p_detect)?;
        entries.set("scenario.sigma_obs_x", &mut s.sigma_obs_x)?;
        entries.set("scenario.sigma_obs_v", &mut s.sigma_obs_v)?;
        entries.set("scenario.x0", &mut s.x0)?;
        entries.set("scenario.dt", &mut s.dt)?;
        entries.set("scenario.n_steps", &mut s.n_steps)?;
        entries.set("scenario.seed", &mut s.seed)?;

        let (mut x_min, mut x_max, mut n_bins) = DEFAULT_GRID;
        entries.set("grid.x_min", &mut x_min)?;
        entries.set("grid.x_max", &mut x_max)?;
        entries.set("grid.n_bins", &mut n_bins)?;
        c.grid = GridSpec::new(x_min, x_max, n_bins)?;

        c.unit_filter = parse_filter(&mut entries, "unit_filter", default_filter(&c.scenario, &c.grid, 0))?;
        c.subunit_filter =
            parse_filter(&mut entries, "subunit_filter", default_filter(&c.scenario, &c.grid, 1))?;

        entries.set("doctrine.truncation_sigmas", &mut c.truncation_sigmas)?;
        let mut mode = String::from("matched");
        entries.set("doctrine.mode", &mut mode)?;
        c.doctrine = match mode.as_str() {
            "matched" => DoctrineChoice::Matched,
            "explicit" => DoctrineChoice::Explicit(parse_doctrine(&mut entries, "doctrine")?),
            "superpose" => {
                let mut n: usize = 0;
                entries.require("doctrine.candidates", &mut n)?;
                let mut v = Vec::with_capacity(n);
                for k in 1..=n {
                    let prefix = format!("doctrine.{k}");
                    let spec = parse_doctrine(&mut entries, &prefix)?;
                    let mut prior = 1.0 / n as f64;
                    entries.set(&format!("{prefix}.prior"), &mut prior)?;
                    v.push((spec, prior));
                }
                DoctrineChoice::Superposition(v)
            }
            other => {
                return Err(Error::config(format!(
                    "doctrine.mode {other:?} is not one of matched, explicit, superpose"
                )))
            }
        };

        let mut norms = String::from("1,2,inf");
        entries.set("norms", &mut norms)?;
        c.norms = parse_norms(&norms)?;

        let mut threshold: Option<f64> = None;
        let mut min_width: Option<f64> = None;
        let mut norm = String::from("1");
        entries.set_opt("localize.threshold", &mut threshold)?;
        entries.set_opt("localize.min_width", &mut min_width)?;
        entries.set("localize.norm", &mut norm)?;
        c.localization = match (threshold, min_width) {
            (Some(threshold), Some(min_width)) => Some(LocalizationConfig {
                threshold,
                min_width,
                norm: norm.parse()?,
            }),
            (None, None) => None,
            _ => {
                return Err(Error::config(
                    "localize.threshold and localize.min_width must be given together",
                ))
            }
        };

        entries.set("burn_in", &mut c.burn_in)?;
        entries.set("snapshot_every", &mut c.snapshot_every)?;
        let mut out = c.output_dir.display().to_string();
        entries.set("output_dir", &mut out)?;
        c.output_dir = PathBuf::from(out);

        entries.finish()?;
        Ok(c)
    }

    /// Renders the configuration in the file format, fully materialized.
    pub fn to_config_string(&self) -> String {
        let mut o = String::new();
        let s = &self.scenario;
        let _ = writeln!(o, "# scenario");
        for (k, v) in [
            ("v_u", s.v_u),
            ("sigma_u", s.sigma_u),
            ("x_doctrine", s.x_doctrine),
            ("sigma_doctrine", s.sigma_doctrine),
            ("p_detect", s.p_detect),
            ("sigma_obs_x", s.sigma_obs_x),
            ("sigma_obs_v", s.sigma_obs_v),
            ("x0", s.x0),
            ("dt", s.dt),
        ] {
            let _ = writeln!(o, "scenario.{k} = {v}");
        }
        let _ = writeln!(o, "scenario.n_steps = {}", s.n_steps);
        let _ = writeln!(o, "scenario.seed = {}", s.seed);
        let _ = writeln!(o, "\n# grid");
        let _ = writeln!(o, "grid.x_min = {}", self.grid.x_min());
        let _ = writeln!(o, "grid.x_max = {}", self.grid.x_max());
        let _ = writeln!(o, "grid.n_bins = {}", self.grid.n_bins());
        for (name, f) in [("unit_filter", &self.unit_filter), ("subunit_filter", &self.subunit_filter)] {
            let _ = writeln!(o, "\n# {name}");
            write_filter(&mut o, name, f);
        }
        let _ = writeln!(o, "\n# doctrine");
        let _ = writeln!(o, "doctrine.truncation_sigmas = {}", self.truncation_sigmas);
        match &self.doctrine {
            DoctrineChoice::Matched => {
                let _ = writeln!(o, "doctrine.mode = matched");
            }
            DoctrineChoice::Explicit(spec) => {
                let _ = writeln!(o, "doctrine.mode = explicit");
                write_doctrine(&mut o, "doctrine", spec);
            }
            DoctrineChoice::Superposition(v) => {
                let _ = writeln!(o, "doctrine.mode = superpose");
                let _ = writeln!(o, "doctrine.candidates = {}", v.len());
                for (k, (spec, prior)) in v.iter().enumerate() {
                    let prefix = format!("doctrine.{}", k + 1);
                    write_doctrine(&mut o, &prefix, spec);
                    let _ = writeln!(o, "{prefix}.prior = {prior}");
                }
            }
        }
        let _ = writeln!(o, "\n# metrics and output");
        let norms: Vec<&str> = self.norms.iter().map(NormOrder::label).collect();
        let _ = writeln!(o, "norms = {}", norms.join(","));
        if let Some(loc) = &self.localization {
            let _ = writeln!(o, "localize.threshold = {}", loc.threshold);
            let _ = writeln!(o, "localize.min_width = {}", loc.min_width);
            let _ = writeln!(o, "localize.norm = {}", loc.norm);
        }
        let _ = writeln!(o, "burn_in = {}", self.burn_in);
        let _ = writeln!(o, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(o, "output_dir = {}", self.output_dir.display());
        o
    }
}

pub fn parse_norms(text: &str) -> Result<Vec<NormOrder>> {
    let mut norms = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<NormOrder>>>()?;
    norms.sort();
    norms.dedup();
    if norms.is_empty() {
        return Err(Error::config("empty norm list"));
    }
    Ok(norms)
}

fn parse_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect()
}

fn parse_doctrine(entries: &mut Entries, prefix: &str) -> Result<DoctrineSpec> {
    let mut offsets = String::new();
    let mut sigma = 0.0;
    entries.require(&format!("{prefix}.offsets"), &mut offsets)?;
    entries.require(&format!("{prefix}.sigma"), &mut sigma)?;
    let offsets = parse_list(&offsets).map_err(|e| Error::config(format!("{prefix}.offsets: {e}")))?;
    let mut weights = vec![1.0; offsets.len()];
    let mut weights_text: Option<String> = None;
    entries.set_opt(&format!("{prefix}.weights"), &mut weights_text)?;
    if let Some(w) = weights_text {
        weights = parse_list(&w).map_err(|e| Error::config(format!("{prefix}.weights: {e}")))?;
    }
    DoctrineSpec::new(offsets, sigma, weights)
}

fn write_doctrine(o: &mut String, prefix: &str, spec: &DoctrineSpec) {
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ");
    let _ = writeln!(o, "{prefix}.offsets = {}", join(spec.offsets()));
    let _ = writeln!(o, "{prefix}.sigma = {}", spec.sigma());
    let _ = writeln!(o, "{prefix}.weights = {}", join(spec.weights()));
}

fn parse_filter(entries: &mut Entries, prefix: &str, mut f: FilterConfig) -> Result<FilterConfig> {
    let key = |k: &str| format!("{prefix}.{k}");
    entries.set(&key("particles_per_expected_target"), &mut f.particles_per_expected_target)?;
    let m: &mut MotionModel = &mut f.motion;
    entries.set(&key("mean_velocity_drift"), &mut m.mean_velocity_drift)?;
    entries.set(&key("process_noise_std_position"), &mut m.process_noise_std_position)?;
    entries.set(&key("process_noise_std_velocity"), &mut m.process_noise_std_velocity)?;
    entries.set(&key("survival_probability"), &mut m.survival_probability)?;
    let s: &mut SensorModel = &mut f.sensor;
    entries.set(&key("detection_probability"), &mut s.detection_probability)?;
    entries.set(&key("obs_noise_std_position"), &mut s.obs_noise_std_position)?;
    entries.set(&key("obs_noise_std_velocity"), &mut s.obs_noise_std_velocity)?;
    entries.set(&key("clutter_intensity"), &mut s.clutter_intensity)?;
    let b: &mut BirthModel = &mut f.birth;
    entries.set(&key("birth_mass_per_step"), &mut b.birth_mass_per_step)?;
    entries.set(&key("birth_position_min"), &mut b.position_range.0)?;
    entries.set(&key("birth_position_max"), &mut b.position_range.1)?;
    entries.set(&key("birth_velocity_min"), &mut b.velocity_range.0)?;
    entries.set(&key("birth_velocity_max"), &mut b.velocity_range.1)?;
    entries.set(&key("particles_per_birth"), &mut b.particles_per_birth)?;
    entries.set(&key("rng_seed"), &mut f.rng_seed)?;
    Ok(f)
}

fn write_filter(o: &mut String, prefix: &str, f: &FilterConfig) {
    let _ = writeln!(o, "{prefix}.particles_per_expected_target = {}", f.particles_per_expected_target);
    for (k, v) in [
        ("mean_velocity_drift", f.motion.mean_velocity_drift),
        ("process_noise_std_position", f.motion.process_noise_std_position),
        ("process_noise_std_velocity", f.motion.process_noise_std_velocity),
        ("survival_probability", f.motion.survival_probability),
        ("detection_probability", f.sensor.detection_probability),
        ("obs_noise_std_position", f.sensor.obs_noise_std_position),
        ("obs_noise_std_velocity", f.sensor.obs_noise_std_velocity),
        ("clutter_intensity", f.sensor.clutter_intensity),
        ("birth_mass_per_step", f.birth.birth_mass_per_step),
        ("birth_position_min", f.birth.position_range.0),
        ("birth_position_max", f.birth.position_range.1),
        ("birth_velocity_min", f.birth.velocity_range.0),
        ("birth_velocity_max", f.birth.velocity_range.1),
    ] {
        let _ = writeln!(o, "{prefix}.{k} = {v}");
    }
    let _ = writeln!(o, "{prefix}.particles_per_birth = {}", f.birth.particles_per_birth);
    let _ = writeln!(o, "{prefix}.rng_seed = {}", f.rng_seed);
}

/// Raw `key = value` entries with their line numbers, consumed as the
/// parser recognizes them.
struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn read(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty key".into(),
                });
            }
            if let Some((first, _)) = map.insert(key.to_string(), (line, value.trim().to_string())) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key {key:?} (first set on line {first})"),
                });
            }
        }
        Ok(Self { map })
    }

    fn set<T: FromStr>(&mut self, key: &str, target: &mut T) -> Result<()>
    where
        T::Err: fmt::Display,
    {
        if let Some((line, value)) = self.map.remove(key) {
            *target = value.parse().map_err(|e: T::Err| Error::Parse {
                line,
                msg: format!("{key}: cannot parse {value:?}: {e}"),
            })?;
        }
        Ok(())
    }

    fn set_opt<T: FromStr>(&mut self, key: &str, target: &mut Option<T>) -> Result<()>
    where
        T::Err: fmt::Display,
    {
        if let Some((line, value)) = self.map.remove(key) {
            *target = Some(value.parse().map_err(|e: T::Err| Error::Parse {
                line,
                msg: format!("{key}: cannot parse {value:?}: {e}"),
            })?);
        }
        Ok(())
    }

    fn require<T: FromStr>(&mut self, key: &str, target: &mut T) -> Result<()>
    where
        T::Err: fmt::Display,
    {
        if !self.map.contains_key(key) {
            return Err(Error::config(format!("missing required key {key}")));
        }
        self.set(key, target)
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            Some((key, (line, _))) => Err(Error::Parse {
                line,
                msg: format!("unknown key {key:?}"),
            }),
            None => Ok(()),
        }
    }
}
