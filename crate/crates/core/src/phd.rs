//! Particle and grid representations of a probability hypothesis density.
//!
//! A PHD is an intensity over single-object state space whose integral over a
//! region is the expected number of objects inside it. Neither representation
//! is normalized: total mass is the expected object count.
//!
//! Filters carry a [`ParticlePhd`] over (position, velocity). Comparisons are
//! made on a [`GridPhd`], the position marginal binned on a uniform grid.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateVector {
    /// Meters.
    pub position: f64,
    /// Meters per second.
    pub velocity: f64,
}

impl StateVector {
    pub fn new(position: f64, velocity: f64) -> Self {
        Self { position, velocity }
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: StateVector,
    pub weight: f64,
}

/// Weighted particle set. The weights sum to the expected object count.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParticlePhd {
    particles: Vec<Particle>,
}

impl ParticlePhd {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a particle PHD, rejecting negative or non-finite weights and
    /// non-finite states.
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        for (i, p) in particles.iter().enumerate() {
            if !p.state.is_finite() {
                return Err(Error::Numerical(format!("particle {i} has a non-finite state")));
            }
            if !(p.weight.is_finite() && p.weight >= 0.0) {
                return Err(Error::Numerical(format!(
                    "particle {i} has invalid weight {}",
                    p.weight
                )));
            }
        }
        Ok(Self { particles })
    }

    /// Construction without validation, for filter internals that preserve
    /// the invariants by construction.
    pub(crate) fn from_particles_unchecked(particles: Vec<Particle>) -> Self {
        Self { particles }
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn into_particles(self) -> Vec<Particle> {
        self.particles
    }

    /// Expected number of objects.
    pub fn mass(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Effective sample size `(Σw)² / Σw²`. Zero for an empty or massless set.
    pub fn effective_sample_size(&self) -> f64 {
        let (sum, sum_sq) = self
            .particles
            .iter()
            .fold((0.0, 0.0), |(s, s2), p| (s + p.weight, s2 + p.weight * p.weight));
        if sum_sq > 0.0 {
            sum * sum / sum_sq
        } else {
            0.0
        }
    }
}

/// Uniform 1D position grid over `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    n_bins: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_bins: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::config(format!(
                "grid domain [{x_min}, {x_max}] must be finite with x_min < x_max"
            )));
        }
        if n_bins < 2 {
            return Err(Error::config(format!("grid needs at least 2 bins, got {n_bins}")));
        }
        Ok(Self { x_min, x_max, n_bins })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    /// Bin width.
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_bins as f64
    }

    /// Lower edge of bin `i`; `edge(n_bins)` is `x_max`.
    pub fn edge(&self, i: usize) -> f64 {
        if i >= self.n_bins {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_bins).map(|i| self.center(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Bin holding `x`: half-open `[edge_i, edge_{i+1})`, with the last bin
    /// closed at `x_max`. `None` outside the domain.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx()).floor() as usize;
        // Rounding in the division can push points onto the wrong side of an edge.
        let i = i.min(self.n_bins - 1);
        if x < self.edge(i) {
            Some(i - 1)
        } else if i + 1 < self.n_bins && x >= self.edge(i + 1) {
            Some(i + 1)
        } else {
            Some(i)
        }
    }

    /// True when both grids have identical domain and bin count.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self == other
    }
}

/// Non-negative intensity (objects per meter) on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPhd {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridPhd {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.n_bins()],
        }
    }

    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_bins() {
            return Err(Error::config(format!(
                "grid has {} bins but {} values were given",
                spec.n_bins(),
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Numerical(format!("grid value {i} is invalid: {v}")));
        }
        Ok(Self { spec, values })
    }

    pub(crate) fn from_values_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.n_bins());
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dx(&self) -> f64 {
        self.spec.dx()
    }

    /// Expected number of objects over the whole domain.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    /// Expected number of objects in `[a, b]`. Bins partly covered by the
    /// interval contribute in proportion to the overlap.
    pub fn mass_in(&self, a: f64, b: f64) -> Result<f64> {
        let (lo, hi) = (self.spec.x_min(), self.spec.x_max());
        if !(a <= b && a >= lo && b <= hi) {
            return Err(Error::Domain { a, b, lo, hi });
        }
        if a == lo && b == hi {
            return Ok(self.mass());
        }
        if a == b {
            return Ok(0.0);
        }
        let dx = self.dx();
        let first = self.spec.bin_of(a).unwrap_or(0);
        let last = self.spec.bin_of(b).unwrap_or(self.spec.n_bins() - 1);
        let mut total = 0.0;
        for i in first..=last {
            let (e0, e1) = (self.spec.edge(i), self.spec.edge(i + 1));
            let overlap = (b.min(e1) - a.max(e0)).max(0.0);
            if overlap >= dx {
                total += self.values[i] * dx;
            } else {
                total += self.values[i] * overlap;
            }
        }
        Ok(total)
    }

    /// Scales every value by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.spec, self.values.iter().map(|v| v * factor).collect())
    }

    /// Pointwise sum of two grids on the same spec.
    pub fn add(&self, other: &GridPhd) -> Result<Self> {
        if !self.spec.same_as(&other.spec) {
            return Err(Error::config("cannot add grids with different specs"));
        }
        Ok(Self::from_values_unchecked(
            self.spec,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }
}

/// Output of [`discretize`]: the grid plus the particle mass that fell
/// outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretized {
    pub grid: GridPhd,
    pub dropped_mass: f64,
}

/// Position-marginal histogram of a particle PHD. Velocity is integrated out.
pub fn discretize(phd: &ParticlePhd, spec: &GridSpec) -> Discretized {
    let mut values = vec![0.0; spec.n_bins()];
    let mut dropped_mass = 0.0;
    for p in phd.particles() {
        match spec.bin_of(p.state.position) {
            Some(i) => values[i] += p.weight,
            None => dropped_mass += p.weight,
        }
    }
    let dx = spec.dx();
    values.iter_mut().for_each(|v| *v /= dx);
    Discretized {
        grid: GridPhd::from_values_unchecked(*spec, values),
        dropped_mass,
    }
}
