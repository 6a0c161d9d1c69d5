//! Slow reference implementations used to cross-check the production paths.
//!
//! Each routine computes the same quantity by a different route: the
//! convolution as a gather over every pair of bins, mask bins by Simpson
//! quadrature of the Gaussian density, and interval masses from the
//! cumulative mass function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::doctrine::{apply_doctrine, doctrine_mask, DoctrineMask, DoctrineSpec};
use crate::phd::{discretize, GridPhd, GridSpec, Particle, ParticlePhd, StateVector};

/// O(n²) convolution: every output bin gathers from every input bin via the
/// displacement between their centers.
pub fn brute_force_convolution(unit: &GridPhd, mask: &DoctrineMask) -> Vec<f64> {
    let spec = unit.spec();
    let dx = spec.dx();
    let n = spec.n_bins();
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let xi = spec.center(i);
        for j in 0..n {
            let displacement = xi - spec.center(j);
            let k = (displacement / dx).round() as isize;
            *o += unit.values()[j] * mask.at(k) * dx;
        }
    }
    out
}

fn gaussian_density(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (std::f64::consts::TAU).sqrt())
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let mut sum = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

/// Mask intensities by Simpson quadrature of the doctrine density over each
/// bin, on the same bin layout as `reference`. Only meaningful when
/// `sigma >= dx / 2` (no point-mass deposition).
pub fn quadrature_mask(spec: &DoctrineSpec, reference: &DoctrineMask) -> Vec<f64> {
    let dx = reference.dx();
    let k = reference.half_bins() as isize;
    (-k..=k)
        .map(|b| {
            let lo = (b as f64 - 0.5) * dx;
            let hi = lo + dx;
            let density = |x: f64| -> f64 {
                spec.offsets()
                    .iter()
                    .zip(spec.weights())
                    .map(|(o, w)| w * gaussian_density(x, *o, spec.sigma()))
                    .sum()
            };
            simpson(density, lo, hi, 64) / dx
        })
        .collect()
}

/// Interval mass as a difference of the cumulative mass function
/// `F(x) = ∫_{x_min}^{x} D`.
pub fn cumulative_mass_in(grid: &GridPhd, a: f64, b: f64) -> f64 {
    let spec = grid.spec();
    let dx = spec.dx();
    let cumulative = |x: f64| -> f64 {
        let mut total = 0.0;
        for (i, v) in grid.values().iter().enumerate() {
            let lo = spec.x_min() + i as f64 * dx;
            if x >= lo + dx {
                total += v * dx;
            } else if x > lo {
                total += v * (x - lo);
            }
        }
        total
    };
    cumulative(b) - cumulative(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Random non-negative grid whose support keeps `margin` bins clear of both
/// edges.
pub fn random_interior_grid<R: Rng + ?Sized>(spec: GridSpec, margin: usize, rng: &mut R) -> GridPhd {
    let n = spec.n_bins();
    let values = (0..n)
        .map(|i| {
            if i < margin || i + margin >= n || rng.random::<f64>() < 0.5 {
                0.0
            } else {
                rng.random::<f64>() * 3.0
            }
        })
        .collect();
    GridPhd::new(spec, values).expect("non-negative by construction")
}

fn random_doctrine<R: Rng + ?Sized>(rng: &mut R, dx: f64) -> DoctrineSpec {
    let spacing = rng.random_range(1.0..6.0);
    let sigma = rng.random_range(dx..3.0 * dx.max(0.5));
    DoctrineSpec::new(
        vec![-spacing, 0.0, spacing],
        sigma,
        vec![rng.random_range(0.5..1.5), 1.0, rng.random_range(0.5..1.5)],
    )
    .expect("valid random doctrine")
}

/// Runs every oracle comparison on `trials` random cases.
pub fn run_checks(trials: usize, seed: u64) -> Vec<OracleCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = GridSpec::new(0.0, 128.0, 256).expect("valid grid");
    let dx = spec.dx();

    let mut conv = 0.0_f64;
    let mut quad = 0.0_f64;
    let mut interval = 0.0_f64;
    let mut conservation = 0.0_f64;
    for _ in 0..trials {
        let doctrine = random_doctrine(&mut rng, dx);
        let mask = doctrine_mask(&doctrine, dx, 5.0).expect("valid mask");
        let unit = random_interior_grid(spec, mask.half_bins() + 1, &mut rng);

        let fast = apply_doctrine(&unit, &mask).expect("matching dx");
        let slow = brute_force_convolution(&unit, &mask);
        for (a, b) in fast.grid.values().iter().zip(&slow) {
            conv = conv.max((a - b).abs());
        }

        for (a, b) in mask.values().iter().zip(quadrature_mask(&doctrine, &mask)) {
            quad = quad.max((a - b).abs());
        }

        let a = rng.random_range(0.0..64.0);
        let b = rng.random_range(a..128.0);
        let exact = unit.mass_in(a, b).expect("inside domain");
        let reference = cumulative_mass_in(&unit, a, b);
        interval = interval.max((exact - reference).abs() / unit.mass().max(1.0));

        let particles: Vec<Particle> = (0..500)
            .map(|_| Particle {
                state: StateVector::new(rng.random_range(0.0..128.0), 0.0),
                weight: rng.random::<f64>(),
            })
            .collect();
        let phd = ParticlePhd::new(particles).expect("valid particles");
        let grid = discretize(&phd, &spec).grid;
        conservation = conservation.max((grid.mass() - phd.mass()).abs() / phd.mass());
    }
    vec![
        OracleCheck {
            name: "convolution vs O(n^2) gather",
            trials,
            max_error: conv,
            tolerance: 1e-9,
        },
        OracleCheck {
            name: "mask bins vs Simpson quadrature",
            trials,
            max_error: quad,
            tolerance: 1e-8,
        },
        OracleCheck {
            name: "interval mass vs cumulative mass function (relative)",
            trials,
            max_error: interval,
            tolerance: 1e-9,
        },
        OracleCheck {
            name: "discretize mass conservation (relative)",
            trials,
            max_error: conservation,
            tolerance: 1e-9,
        },
    ]
}
