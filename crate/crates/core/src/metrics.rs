//! L_p norms and distances between grid PHDs, and recursive localization of
//! the regions where two PHDs disagree.
//!
//! Norms are Riemann sums over the grid: `(Σ |f_i|^p Δx)^(1/p)` for finite
//! `p`, and `max |f_i|` for `p = ∞`. The difference of two PHDs is signed,
//! hence the absolute value in the sup norm.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::phd::GridPhd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum NormOrder {
    L1,
    L2,
    Inf,
}

impl NormOrder {
    pub const ALL: [NormOrder; 3] = [NormOrder::L1, NormOrder::L2, NormOrder::Inf];

    /// Column suffix used in output files: `1`, `2`, `inf`.
    pub fn label(&self) -> &'static str {
        match self {
            NormOrder::L1 => "1",
            NormOrder::L2 => "2",
            NormOrder::Inf => "inf",
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(NormOrder::L1),
            "2" => Ok(NormOrder::L2),
            "inf" | "infinity" | "max" => Ok(NormOrder::Inf),
            other => Err(Error::config(format!("unknown norm order {other:?}; use 1, 2 or inf"))),
        }
    }
}

/// L_p norm of a (possibly signed) grid function with bin width `dx`.
pub fn lp_norm(values: &[f64], dx: f64, p: NormOrder) -> f64 {
    match p {
        NormOrder::L1 => values.iter().map(|v| v.abs()).sum::<f64>() * dx,
        NormOrder::L2 => (values.iter().map(|v| v * v).sum::<f64>() * dx).sqrt(),
        NormOrder::Inf => values.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

fn check_same_grid(a: &GridPhd, b: &GridPhd) -> Result<()> {
    if a.spec().same_as(b.spec()) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "grid mismatch: {:?} vs {:?}",
            a.spec(),
            b.spec()
        )))
    }
}

/// Pointwise difference `a - b`.
pub fn difference(a: &GridPhd, b: &GridPhd) -> Result<Vec<f64>> {
    check_same_grid(a, b)?;
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect())
}

/// `d_p(a, b) = ||a - b||_p`.
pub fn distance(a: &GridPhd, b: &GridPhd, p: NormOrder) -> Result<f64> {
    let diff = difference(a, b)?;
    Ok(lp_norm(&diff, a.dx(), p))
}

/// Distance restricted to the bins whose centers fall in an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalDistance {
    pub distance: f64,
    /// Number of bins in the restriction. Zero flags an empty restriction,
    /// in which case `distance` is 0.
    pub bins: usize,
}

impl LocalDistance {
    pub fn is_empty(&self) -> bool {
        self.bins == 0
    }
}

pub fn local_distance(
    a: &GridPhd,
    b: &GridPhd,
    p: NormOrder,
    lo: f64,
    hi: f64,
) -> Result<LocalDistance> {
    check_same_grid(a, b)?;
    let spec = a.spec();
    if !(lo <= hi && lo >= spec.x_min() && hi <= spec.x_max()) {
        return Err(Error::Domain {
            a: lo,
            b: hi,
            lo: spec.x_min(),
            hi: spec.x_max(),
        });
    }
    Ok(restricted(a, b, p, lo, hi))
}

fn restricted(a: &GridPhd, b: &GridPhd, p: NormOrder, lo: f64, hi: f64) -> LocalDistance {
    let spec = a.spec();
    let diff: Vec<f64> = (0..spec.n_bins())
        .filter(|&i| {
            let c = spec.center(i);
            c >= lo && c <= hi
        })
        .map(|i| a.values()[i] - b.values()[i])
        .collect();
    LocalDistance {
        distance: lp_norm(&diff, spec.dx(), p),
        bins: diff.len(),
    }
}

/// A sub-interval whose local distance exceeded the alarm threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscrepancyRegion {
    pub a: f64,
    pub b: f64,
    pub local_distance: f64,
    /// Number of bisections from the full domain.
    pub depth: usize,
}

/// Recursive bisection search for high-difference regions.
///
/// Nothing is returned when the global distance is at or below `threshold`.
/// Otherwise each region above threshold is halved, and halves still above
/// threshold are searched in turn, until halving would go below `min_width`.
/// A region none of whose halves exceeds the threshold is returned itself.
/// Results are the leaves of the search, ordered by position.
pub fn localize_failure(
    a: &GridPhd,
    b: &GridPhd,
    p: NormOrder,
    threshold: f64,
    min_width: f64,
) -> Result<Vec<DiscrepancyRegion>> {
    check_same_grid(a, b)?;
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::config(format!("localization threshold must be > 0, got {threshold}")));
    }
    if !(min_width.is_finite() && min_width >= 2.0 * a.dx()) {
        return Err(Error::config(format!(
            "localization min_width {min_width} must be at least two bins ({})",
            2.0 * a.dx()
        )));
    }
    let (lo, hi) = (a.spec().x_min(), a.spec().x_max());
    let global = restricted(a, b, p, lo, hi).distance;
    let mut out = Vec::new();
    if global > threshold {
        bisect(a, b, p, threshold, min_width, lo, hi, global, 0, &mut out);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn bisect(
    a: &GridPhd,
    b: &GridPhd,
    p: NormOrder,
    threshold: f64,
    min_width: f64,
    lo: f64,
    hi: f64,
    local: f64,
    depth: usize,
    out: &mut Vec<DiscrepancyRegion>,
) {
    let region = DiscrepancyRegion {
        a: lo,
        b: hi,
        local_distance: local,
        depth,
    };
    if (hi - lo) / 2.0 < min_width {
        out.push(region);
        return;
    }
    let mid = 0.5 * (lo + hi);
    let before = out.len();
    for (l, h) in [(lo, mid), (mid, hi)] {
        let d = restricted(a, b, p, l, h).distance;
        if d > threshold {
            bisect(a, b, p, threshold, min_width, l, h, d, depth + 1, out);
        }
    }
    if out.len() == before {
        out.push(region);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phd::GridSpec;

    fn grid(values: Vec<f64>, lo: f64, hi: f64) -> GridPhd {
        let n = values.len();
        GridPhd::new(GridSpec::new(lo, hi, n).unwrap(), values).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_eq!(lp_norm(&[0.0; 8], 0.5, NormOrder::L1), 0.0);
        assert_eq!(lp_norm(&[0.0; 8], 0.5, NormOrder::L2), 0.0);
        assert_eq!(lp_norm(&[0.0; 8], 0.5, NormOrder::Inf), 0.0);
        assert_eq!(lp_norm(&[2.0, 0.0], 0.5, NormOrder::L1), 1.0);
        assert_eq!(lp_norm(&[2.0, 0.0], 0.5, NormOrder::Inf), 2.0);
        assert_eq!(lp_norm(&[3.0, -4.0], 1.0, NormOrder::L2), 5.0);
        assert_eq!(lp_norm(&[3.0, -4.0], 1.0, NormOrder::Inf), 4.0);
    }

    #[test]
    fn norm_order_parsing() {
        assert_eq!("1".parse::<NormOrder>().unwrap(), NormOrder::L1);
        assert_eq!(" 2 ".parse::<NormOrder>().unwrap(), NormOrder::L2);
        assert_eq!("INF".parse::<NormOrder>().unwrap(), NormOrder::Inf);
        assert!("3".parse::<NormOrder>().is_err());
    }

    #[test]
    fn distance_examples() {
        let f = grid(vec![0.0, 1.0, 2.0, 0.5], 0.0, 4.0);
        for p in NormOrder::ALL {
            assert_eq!(distance(&f, &f, p).unwrap(), 0.0);
        }
        let g = grid(vec![3.0, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0, 6.0);
        let h = grid(vec![0.0, 0.0, 0.0, 1.5, 1.5, 0.0], 0.0, 6.0);
        assert_eq!(distance(&g, &h, NormOrder::L1).unwrap(), 6.0);
        let scaled = f.scaled(0.25).unwrap();
        let d = distance(&f, &scaled, NormOrder::L1).unwrap();
        assert!((d - 0.75 * f.mass()).abs() < 1e-12);
    }

    #[test]
    fn distance_rejects_grid_mismatch() {
        let f = grid(vec![0.0; 4], 0.0, 4.0);
        let g = grid(vec![0.0; 4], 0.0, 5.0);
        assert!(matches!(distance(&f, &g, NormOrder::L1), Err(Error::Config(_))));
    }

    #[test]
    fn local_distance_examples() {
        let f = grid(vec![1.0, 2.0, 0.0, 0.0, 4.0, 1.0, 0.0, 0.0], 0.0, 8.0);
        let g = grid(vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 3.0], 0.0, 8.0);
        for p in NormOrder::ALL {
            let full = local_distance(&f, &g, p, 0.0, 8.0).unwrap();
            assert_eq!(full.distance, distance(&f, &g, p).unwrap());
        }
        // no difference in [2, 4]
        let none = local_distance(&f, &g, NormOrder::L2, 2.0, 4.0).unwrap();
        assert_eq!(none.distance, 0.0);
        assert_eq!(none.bins, 2);
        // empty restriction
        let empty = local_distance(&f, &g, NormOrder::L1, 2.1, 2.2).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.distance, 0.0);
        // partition additivity for L1
        let parts: f64 = [(0.0, 2.0), (2.0, 5.0), (5.0, 8.0)]
            .iter()
            .map(|&(a, b)| local_distance(&f, &g, NormOrder::L1, a, b).unwrap().distance)
            .sum();
        assert!((parts - distance(&f, &g, NormOrder::L1).unwrap()).abs() < 1e-12);
        assert!(local_distance(&f, &g, NormOrder::L1, -1.0, 3.0).is_err());
    }

    #[test]
    fn localize_identical_is_empty() {
        let f = grid((0..64).map(|i| i as f64 * 0.1).collect(), 0.0, 64.0);
        assert!(localize_failure(&f, &f, NormOrder::L1, 1e-6, 2.0).unwrap().is_empty());
    }

    #[test]
    fn localize_below_threshold_is_empty() {
        let f = grid(vec![1.0; 64], 0.0, 64.0);
        let g = grid(vec![1.01; 64], 0.0, 64.0);
        let d = distance(&f, &g, NormOrder::L1).unwrap();
        assert!(localize_failure(&f, &g, NormOrder::L1, d * 1.01, 2.0).unwrap().is_empty());
    }

    #[test]
    fn localize_finds_spike() {
        let mut values = vec![0.0; 64];
        values[10] = 5.0;
        let f = grid(values, 0.0, 64.0);
        let g = GridPhd::zeros(*f.spec());
        let regions = localize_failure(&f, &g, NormOrder::L1, 1.0, 4.0).unwrap();
        assert_eq!(regions.len(), 1);
        let r = regions[0];
        assert!(r.a <= 10.5 && r.b >= 10.5);
        assert!(r.b - r.a < 8.0 + 1e-12);
        assert!(r.local_distance > 1.0);
        assert_eq!(r.depth, 4);
    }

    #[test]
    fn localize_returns_parent_when_no_half_exceeds() {
        // two equal bumps straddling the midpoint; each half carries 1.0
        let mut values = vec![0.0; 16];
        values[7] = 1.0;
        values[8] = 1.0;
        let f = grid(values, 0.0, 16.0);
        let g = GridPhd::zeros(*f.spec());
        let regions = localize_failure(&f, &g, NormOrder::L1, 1.5, 2.0).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!((regions[0].a, regions[0].b, regions[0].depth), (0.0, 16.0, 0));
    }

    #[test]
    fn localize_validates_arguments() {
        let f = grid(vec![0.0; 16], 0.0, 16.0);
        assert!(localize_failure(&f, &f, NormOrder::L1, 0.0, 4.0).is_err());
        assert!(localize_failure(&f, &f, NormOrder::L1, 1.0, 1.0).is_err());
    }
}
