//! Doctrine masks and the doctrine operator.
//!
//! A doctrine places sub-units at fixed offsets from their unit, each with
//! Gaussian spread `sigma`. Given exact knowledge of the unit position, the
//! sub-unit PHD is the mask itself; for an uncertain unit it is the mask
//! convolved with the unit PHD.

use crate::error::{Error, Result};
use crate::metrics::{distance, NormOrder};
use crate::phd::{GridPhd, GridSpec};

/// Default truncation radius of each Gaussian component, in sigmas.
pub const DEFAULT_TRUNCATION_SIGMAS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DoctrineSpec {
    offsets: Vec<f64>,
    sigma: f64,
    weights: Vec<f64>,
}

impl DoctrineSpec {
    pub fn new(offsets: Vec<f64>, sigma: f64, weights: Vec<f64>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::config("doctrine needs at least one offset"));
        }
        if offsets.len() != weights.len() {
            return Err(Error::config(format!(
                "doctrine has {} offsets but {} weights",
                offsets.len(),
                weights.len()
            )));
        }
        if offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::config("doctrine offsets must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config("doctrine weights must be > 0"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::config(format!("doctrine sigma must be >= 0, got {sigma}")));
        }
        Ok(Self {
            offsets,
            sigma,
            weights,
        })
    }

    /// Equally weighted sub-units at the given offsets.
    pub fn with_unit_weights(offsets: Vec<f64>, sigma: f64) -> Result<Self> {
        let weights = vec![1.0; offsets.len()];
        Self::new(offsets, sigma, weights)
    }

    /// Three sub-units at `-spacing, 0, +spacing`.
    pub fn three_abreast(spacing: f64, sigma: f64) -> Result<Self> {
        Self::with_unit_weights(vec![-spacing, 0.0, spacing], sigma)
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Expected number of sub-units per unit.
    pub fn subunit_count(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mask half-width: furthest offset plus the truncation radius.
    pub fn half_width(&self, truncation_sigmas: f64) -> f64 {
        let reach = self.offsets.iter().fold(0.0_f64, |m, o| m.max(o.abs()));
        reach + truncation_sigmas * self.sigma
    }
}

/// Doctrine PHD sampled on bins of width `dx` centered at `k * dx` for
/// `k = -half_bins ..= half_bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoctrineMask {
    dx: f64,
    half_bins: usize,
    values: Vec<f64>,
}

impl DoctrineMask {
    fn zeros(dx: f64, half_bins: usize) -> Self {
        Self {
            dx,
            half_bins,
            values: vec![0.0; 2 * half_bins + 1],
        }
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn half_bins(&self) -> usize {
        self.half_bins
    }

    /// Half-width of the mask domain `[-L, L]`.
    pub fn half_width(&self) -> f64 {
        (self.half_bins as f64 + 0.5) * self.dx
    }

    /// Intensity values, index `half_bins` being the zero-offset bin.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at signed bin offset `k`, zero outside the mask.
    pub fn at(&self, k: isize) -> f64 {
        let idx = k + self.half_bins as isize;
        if idx < 0 || idx as usize >= self.values.len() {
            0.0
        } else {
            self.values[idx as usize]
        }
    }

    /// Center of the bin at signed offset `k`.
    pub fn center(&self, k: isize) -> f64 {
        k as f64 * self.dx
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    /// The mask as a grid PHD over `[-L, L]`.
    pub fn to_grid(&self) -> GridPhd {
        let l = self.half_width();
        let spec = GridSpec::new(-l, l, self.values.len()).expect("mask grid has >= 3 bins");
        GridPhd::from_values_unchecked(spec, self.values.clone())
    }

    fn accumulate(&mut self, other: &DoctrineMask, factor: f64) {
        debug_assert!(other.half_bins <= self.half_bins);
        let shift = self.half_bins - other.half_bins;
        for (i, v) in other.values.iter().enumerate() {
            self.values[shift + i] += factor * v;
        }
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Builds the doctrine mask: each component deposits its Gaussian mass per
/// bin as a CDF difference. Components with `sigma < dx / 2` deposit their
/// whole weight in the bin containing the offset.
pub fn doctrine_mask(spec: &DoctrineSpec, dx: f64, truncation_sigmas: f64) -> Result<DoctrineMask> {
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::config(format!("mask bin width must be > 0, got {dx}")));
    }
    if !(truncation_sigmas.is_finite() && truncation_sigmas >= 0.0) {
        return Err(Error::config("truncation radius must be >= 0"));
    }
    let l = spec.half_width(truncation_sigmas);
    // floor(L/dx + 1/2) also covers an offset sitting exactly on the outer edge.
    let half_bins = ((l / dx + 0.5).floor() as usize).max(1);
    let mut mask = DoctrineMask::zeros(dx, half_bins);
    let sigma = spec.sigma();
    let kmax = half_bins as isize;
    for (&offset, &weight) in spec.offsets().iter().zip(spec.weights()) {
        if sigma < dx / 2.0 {
            let k = (offset / dx + 0.5).floor() as isize;
            mask.values[(k + kmax) as usize] += weight / dx;
            continue;
        }
        // Every component spans the full mask, so only the outermost tails
        // are truncated.
        for k in -kmax..=kmax {
            let edge_lo = (k as f64 - 0.5) * dx;
            let edge_hi = (k as f64 + 0.5) * dx;
            let bin_mass = std_normal_cdf((edge_hi - offset) / sigma)
                - std_normal_cdf((edge_lo - offset) / sigma);
            mask.values[(k + kmax) as usize] += weight * bin_mass / dx;
        }
    }
    Ok(mask)
}

/// Result of applying a doctrine: the synthesized sub-unit PHD and the mass
/// pushed past the domain edges by the convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub grid: GridPhd,
    pub leaked_mass: f64,
}

/// Discrete convolution of a unit PHD with a doctrine mask, zero padded
/// at the domain edges.
pub fn apply_doctrine(unit_phd: &GridPhd, mask: &DoctrineMask) -> Result<Synthesized> {
    let dx = unit_phd.dx();
    if dx != mask.dx() {
        return Err(Error::config(format!(
            "mask bin width {} does not match grid bin width {dx}",
            mask.dx()
        )));
    }
    let n = unit_phd.values().len() as isize;
    let kmax = mask.half_bins() as isize;
    let mut out = vec![0.0; n as usize];
    let mut leaked = 0.0;
    for (j, &dj) in unit_phd.values().iter().enumerate() {
        if dj == 0.0 {
            continue;
        }
        let j = j as isize;
        let scale = dj * dx;
        let lo = (j - kmax).max(0);
        let hi = (j + kmax).min(n - 1);
        for i in lo..=hi {
            out[i as usize] += scale * mask.values()[(i - j + kmax) as usize];
        }
        // mask bins that land outside the domain
        let outside: f64 = mask.values()[..(lo - (j - kmax)) as usize]
            .iter()
            .chain(&mask.values()[(hi - j + kmax + 1) as usize..])
            .sum();
        leaked += scale * outside * dx;
    }
    Ok(Synthesized {
        grid: GridPhd::from_values_unchecked(*unit_phd.spec(), out),
        leaked_mass: leaked,
    })
}

/// Prior-weighted superposition of several doctrines.
pub fn superpose(
    specs: &[(DoctrineSpec, f64)],
    dx: f64,
    truncation_sigmas: f64,
) -> Result<DoctrineMask> {
    if specs.is_empty() {
        return Err(Error::config("superposition needs at least one doctrine"));
    }
    if specs.iter().any(|(_, p)| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::config("doctrine priors must be >= 0"));
    }
    let total: f64 = specs.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("doctrine priors sum to {total}, not 1")));
    }
    let masks = specs
        .iter()
        .map(|(s, _)| doctrine_mask(s, dx, truncation_sigmas))
        .collect::<Result<Vec<_>>>()?;
    let half_bins = masks.iter().map(DoctrineMask::half_bins).max().unwrap_or(1);
    let mut out = DoctrineMask::zeros(dx, half_bins);
    for (mask, (_, prior)) in masks.iter().zip(specs) {
        out.accumulate(mask, *prior);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoctrineMatch {
    /// Candidate with the smallest distance; ties go to the lowest index.
    pub index: usize,
    pub distances: Vec<f64>,
}

/// Applies every candidate doctrine to the unit PHD and scores it against
/// the observed sub-unit PHD.
pub fn select_best_doctrine(
    unit_phd: &GridPhd,
    subunit_phd: &GridPhd,
    candidates: &[DoctrineSpec],
    p: NormOrder,
    truncation_sigmas: f64,
) -> Result<DoctrineMatch> {
    if candidates.is_empty() {
        return Err(Error::config("no candidate doctrines"));
    }
    let distances = candidates
        .iter()
        .map(|c| {
            let mask = doctrine_mask(c, unit_phd.dx(), truncation_sigmas)?;
            let synth = apply_doctrine(unit_phd, &mask)?;
            distance(subunit_phd, &synth.grid, p)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut index = 0;
    for (i, d) in distances.iter().enumerate() {
        if *d < distances[index] {
            index = i;
        }
    }
    Ok(DoctrineMatch { index, distances })
}
