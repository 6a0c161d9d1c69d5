//! Browser demo: doctrine mask explorer, a stepped experiment session and
//! failure localization on any of its frames. The plain functions carry the
//! logic and are tested natively; the `#[wasm_bindgen]` items only convert
//! errors for JavaScript. Every result crosses the boundary as a JSON string.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use phd_consistency::doctrine::{apply_doctrine, doctrine_mask, DoctrineSpec, DEFAULT_TRUNCATION_SIGMAS};
use phd_consistency::experiment::{Experiment, ExperimentConfig, StepOutput};
use phd_consistency::metrics::{localize_failure, NormOrder};
use phd_consistency::phd::{GridPhd, GridSpec};
use phd_consistency::scenario::TruthStep;

pub const MAX_STEPS: usize = 200;

/// Mask for a three-abreast doctrine and its response to a unit-mass spike
/// in the middle of a small grid.
pub fn mask_explorer(spacing: f64, sigma: f64, dx: f64) -> Result<Value, String> {
    let spec = DoctrineSpec::three_abreast(spacing, sigma).map_err(|e| e.to_string())?;
    let mask = doctrine_mask(&spec, dx, DEFAULT_TRUNCATION_SIGMAS).map_err(|e| e.to_string())?;
    let k = mask.half_bins() as isize;
    let n = 2 * (mask.half_bins() + 8) + 1;
    let grid = GridSpec::new(-(n as f64) * dx / 2.0, n as f64 * dx / 2.0, n).map_err(|e| e.to_string())?;
    let mut spike = vec![0.0; n];
    spike[n / 2] = 1.0 / dx;
    let unit = GridPhd::new(grid, spike).map_err(|e| e.to_string())?;
    let response = apply_doctrine(&unit, &mask).map_err(|e| e.to_string())?;
    Ok(json!({
        "offsets": (-k..=k).map(|i| mask.center(i)).collect::<Vec<_>>(),
        "mask": mask.values(),
        "mask_mass": mask.mass(),
        "grid_centers": grid.centers().collect::<Vec<_>>(),
        "dirac_response": response.grid.values(),
        "dirac_mass": response.grid.mass(),
    }))
}

/// A full experiment run kept in memory so frames can be scrubbed.
pub struct SessionData {
    grid: GridSpec,
    truth: Vec<TruthStep>,
    steps: Vec<StepOutput>,
}

impl SessionData {
    pub fn run(sigma_doctrine: f64, seed: u64, n_steps: usize) -> Result<Self, String> {
        if n_steps == 0 || n_steps > MAX_STEPS {
            return Err(format!("n_steps must be in 1..={MAX_STEPS}"));
        }
        let mut config = ExperimentConfig::default().with_seed(seed);
        config.scenario.sigma_doctrine = sigma_doctrine;
        config.scenario.n_steps = n_steps;
        config.burn_in = 0;
        let experiment = Experiment::new(config).map_err(|e| e.to_string())?;
        let grid = experiment.config().grid;
        let truth = experiment.simulation().truth.clone();
        let steps = experiment.collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        Ok(Self { grid, truth, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Per-step masses and distances for the time-series plot.
    pub fn series(&self) -> Value {
        let records: Vec<_> = self.steps.iter().map(|s| &s.record).collect();
        json!({
            "x_min": self.grid.x_min(),
            "dx": self.grid.dx(),
            "n_bins": self.grid.n_bins(),
            "records": records,
        })
    }

    fn step(&self, t: usize) -> Result<&StepOutput, String> {
        self.steps.get(t).ok_or_else(|| format!("no step {t}"))
    }

    pub fn frame(&self, t: usize) -> Result<Value, String> {
        let s = self.step(t)?;
        let truth = &self.truth[t];
        Ok(json!({
            "t": t,
            "unit": s.unit.values(),
            "subunit": s.subunit.values(),
            "synthesized": s.synthesized.values(),
            "record": s.record,
            "truth_unit": truth.unit.position,
            "truth_subunits": truth.subunits.iter().map(|p| p.position).collect::<Vec<_>>(),
        }))
    }

    pub fn localize(&self, t: usize, norm: &str, threshold: f64, min_width: f64) -> Result<Value, String> {
        let s = self.step(t)?;
        let p: NormOrder = norm.parse().map_err(|e: phd_consistency::Error| e.to_string())?;
        let regions =
            localize_failure(&s.subunit, &s.synthesized, p, threshold, min_width).map_err(|e| e.to_string())?;
        serde_json::to_value(regions).map_err(|e| e.to_string())
    }
}

fn js(result: Result<Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = maskExplorer)]
pub fn mask_explorer_js(spacing: f64, sigma: f64, dx: f64) -> Result<String, JsError> {
    js(mask_explorer(spacing, sigma, dx))
}

#[wasm_bindgen]
pub struct Session {
    data: SessionData,
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(sigma_doctrine: f64, seed: u32, n_steps: u32) -> Result<Session, JsError> {
        SessionData::run(sigma_doctrine, u64::from(seed), n_steps as usize)
            .map(|data| Session { data })
            .map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> u32 {
        self.data.len() as u32
    }

    pub fn series(&self) -> String {
        self.data.series().to_string()
    }

    pub fn frame(&self, t: u32) -> Result<String, JsError> {
        js(self.data.frame(t as usize))
    }

    pub fn localize(&self, t: u32, norm: &str, threshold: f64, min_width: f64) -> Result<String, JsError> {
        js(self.data.localize(t as usize, norm, threshold, min_width))
    }
}
