//! L2 geometry on discretized curves: inner products, distances and
//! percentile bandwidths.
//!
//! All integrals use the trapezoidal rule on the curve grid, which is exact
//! for piecewise-linear interpolants.

use crate::error::{Error, Result};
use crate::sample::{Curve, FunctionalSample, Grid};

fn check_lengths(f: &Curve, g: &Curve, grid: &Grid) -> Result<()> {
    if f.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "curves of length {} and {} on a {}-point grid",
            f.len(),
            g.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// Trapezoidal L2 inner product of two curves over the grid.
pub fn l2_inner(f: &Curve, g: &Curve, grid: &Grid) -> Result<f64> {
    check_lengths(f, g, grid)?;
    let pts = grid.points();
    let fv = f.values();
    let gv = g.values();
    let mut acc = 0.0;
    for i in 0..pts.len() - 1 {
        let h = pts[i + 1] - pts[i];
        acc += 0.5 * h * (fv[i] * gv[i] + fv[i + 1] * gv[i + 1]);
    }
    Ok(acc)
}

/// L2 norm of a curve over the grid.
pub fn l2_norm(f: &Curve, grid: &Grid) -> Result<f64> {
    Ok(l2_inner(f, f, grid)?.max(0.0).sqrt())
}

/// L2 distance between two curves over the grid.
pub fn l2_distance(f: &Curve, g: &Curve, grid: &Grid) -> Result<f64> {
    check_lengths(f, g, grid)?;
    let pts = grid.points();
    let fv = f.values();
    let gv = g.values();
    let mut acc = 0.0;
    for i in 0..pts.len() - 1 {
        let h = pts[i + 1] - pts[i];
        let a = fv[i] - gv[i];
        let b = fv[i + 1] - gv[i + 1];
        acc += 0.5 * h * (a * a + b * b);
    }
    Ok(acc.max(0.0).sqrt())
}

/// Symmetric matrix of pairwise L2 distances with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>, // row-major n x n
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Strictly-upper-triangle entries (i < j) in row order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }

    /// Largest entry.
    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }
}

/// Pairwise L2 distances of all curves in the sample.
///
/// Each entry is computed once (i < j) and mirrored, so the result is
/// symmetric by construction.
pub fn pairwise_distances(s: &FunctionalSample) -> DistanceMatrix {
    let n = s.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            // construction guarantees matching lengths
            let d = l2_distance(&s.curves()[i], &s.curves()[j], s.grid())
                .expect("curves in a sample share the grid");
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix { n, entries }
}

/// Percentile of sorted values using linear interpolation between closest
/// ranks: percentile p of sorted v_1..v_m is the value at fractional rank
/// 1 + (m - 1) p / 100.
fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let rank = 1.0 + (m - 1) as f64 * pct / 100.0;
    let lo = rank.floor() as usize - 1;
    let frac = rank - rank.floor();
    if lo + 1 >= m {
        return sorted[m - 1];
    }
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Kernel bandwidth: the `pct`-th percentile of the strictly-upper-triangle
/// pairwise distances (self-distances excluded).
pub fn bandwidth_from_percentile(d: &DistanceMatrix, pct: f64) -> Result<f64> {
    if d.n() < 2 {
        return Err(Error::InsufficientSample(format!(
            "bandwidth needs at least 2 curves, got {}",
            d.n()
        )));
    }
    if !(pct > 0.0 && pct < 100.0) {
        return Err(Error::InvalidSpec(format!(
            "percentile {pct} outside (0, 100)"
        )));
    }
    let mut v = d.upper_triangle();
    v.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let bw = percentile_sorted(&v, pct);
    if bw <= 0.0 {
        return Err(Error::DegenerateBandwidth(format!(
            "{pct}-th percentile of pairwise distances is 0"
        )));
    }
    Ok(bw)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn curve_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, m)
    }

    proptest! {
        #[test]
        fn inner_is_symmetric_and_bilinear(
            fv in curve_strategy(9),
            gv in curve_strategy(9),
            hv in curve_strategy(9),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let grid = Grid::equidistant(0.0, 1.0, 9).unwrap();
            let f = Curve::new(fv).unwrap();
            let g = Curve::new(gv).unwrap();
            let h = Curve::new(hv).unwrap();

            let fg = l2_inner(&f, &g, &grid).unwrap();
            let gf = l2_inner(&g, &f, &grid).unwrap();
            prop_assert!((fg - gf).abs() <= 1e-12 * (1.0 + fg.abs()));

            // <a f + b g, h> = a <f, h> + b <g, h>
            let comb = Curve::new(
                f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect(),
            ).unwrap();
            let lhs = l2_inner(&comb, &h, &grid).unwrap();
            let rhs = a * l2_inner(&f, &h, &grid).unwrap() + b * l2_inner(&g, &h, &grid).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn distance_satisfies_triangle_inequality(
            fv in curve_strategy(9),
            gv in curve_strategy(9),
            hv in curve_strategy(9),
        ) {
            let grid = Grid::equidistant(0.0, 1.0, 9).unwrap();
            let f = Curve::new(fv).unwrap();
            let g = Curve::new(gv).unwrap();
            let h = Curve::new(hv).unwrap();
            let fg = l2_distance(&f, &g, &grid).unwrap();
            let fh = l2_distance(&f, &h, &grid).unwrap();
            let hg = l2_distance(&h, &g, &grid).unwrap();
            prop_assert!(fg <= fh + hg + 1e-9);
        }
    }
}
