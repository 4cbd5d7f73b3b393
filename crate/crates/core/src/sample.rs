//! Domain types: grids, curves, functional samples and labeled samples.
//!
//! All types validate their invariants at construction and are immutable
//! afterwards, so the algorithm modules never have to re-check shapes.

use crate::error::{Error, Result};

/// Relative tolerance for deciding whether a grid is equidistant.
const EQUIDISTANT_RTOL: f64 = 1e-9;

/// Ordered evaluation points shared by every curve of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    equidistant: bool,
}

impl Grid {
    /// Build a grid from explicit points; they must be finite, strictly
    /// increasing and at least two.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFiniteValue(format!("grid point {p}")));
        }
        for i in 1..points.len() {
            if points[i] <= points[i - 1] {
                return Err(Error::DomainNotIncreasing(i));
            }
        }
        let mean_step = (points[points.len() - 1] - points[0]) / (points.len() - 1) as f64;
        let equidistant = points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - mean_step).abs() <= EQUIDISTANT_RTOL * mean_step.abs());
        Ok(Self {
            points,
            equidistant,
        })
    }

    /// An equidistant grid of `m` points spanning `[a, b]`.
    pub fn equidistant(a: f64, b: f64, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid needs at least 2 points, got {m}"
            )));
        }
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::InvalidSpec(format!("invalid grid span [{a}, {b}]")));
        }
        let step = (b - a) / (m - 1) as f64;
        let points = (0..m)
            .map(|i| if i == m - 1 { b } else { a + step * i as f64 })
            .collect();
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a valid grid always has >= 2 points
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn is_equidistant(&self) -> bool {
        self.equidistant
    }

    /// Length of the spanned domain.
    pub fn span(&self) -> f64 {
        self.points[self.points.len() - 1] - self.points[0]
    }

    /// Trapezoidal quadrature weights for this grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let m = self.points.len();
        let mut w = vec![0.0; m];
        for i in 0..m - 1 {
            let h = (self.points[i + 1] - self.points[i]) / 2.0;
            w[i] += h;
            w[i + 1] += h;
        }
        w
    }
}

/// One curve: a value per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    values: Vec<f64>,
}

impl Curve {
    /// Build a curve; all values must be finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("curve value {v} at index {i}")));
        }
        Ok(Self { values })
    }

    /// A constant curve of length `m`.
    pub fn constant(value: f64, m: usize) -> Result<Self> {
        Self::new(vec![value; m])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pointwise affine image `scale * self + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Curve {
        Curve {
            values: self.values.iter().map(|v| scale * v + shift).collect(),
        }
    }

    /// Pointwise difference `self - other`; lengths must already agree.
    pub(crate) fn minus(&self, other: &Curve) -> Curve {
        debug_assert_eq!(self.len(), other.len());
        Curve {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// A set of curves observed on a common grid.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Grid,
    curves: Vec<Curve>,
}

impl FunctionalSample {
    /// Build a sample; every curve must match the grid length and the sample
    /// must be nonempty.
    pub fn new(grid: Grid, curves: Vec<Curve>) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::InsufficientSample(
                "a functional sample needs at least one curve".into(),
            ));
        }
        for (i, c) in curves.iter().enumerate() {
            if c.len() != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "curve {i} has {} values on a {}-point grid",
                    c.len(),
                    grid.len()
                )));
            }
        }
        Ok(Self { grid, curves })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Sample with every curve mapped through `scale * x + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> FunctionalSample {
        FunctionalSample {
            grid: self.grid.clone(),
            curves: self.curves.iter().map(|c| c.affine(scale, shift)).collect(),
        }
    }
}

/// A functional sample with one binary label per curve.
#[derive(Debug, Clone)]
pub struct LabeledSample {
    sample: FunctionalSample,
    labels: Vec<u8>,
}

impl LabeledSample {
    /// Build a labeled sample; labels are restricted to `{0, 1}` and must
    /// match the curve count.
    ///
    /// A group may be empty here (leave-one-out test samples hold a single
    /// curve); [`validate_labeled_sample`] and the classifier entry points
    /// reject empty groups where both are required.
    pub fn new(sample: FunctionalSample, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != sample.len() {
            return Err(Error::InvalidSpec(format!(
                "{} labels for {} curves",
                labels.len(),
                sample.len()
            )));
        }
        if let Some(l) = labels.iter().find(|l| **l > 1) {
            return Err(Error::InvalidSpec(format!("label {l} outside {{0, 1}}")));
        }
        Ok(Self { sample, labels })
    }

    pub fn sample(&self) -> &FunctionalSample {
        &self.sample
    }

    pub fn grid(&self) -> &Grid {
        self.sample.grid()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.sample.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample.is_empty()
    }

    pub fn group_size(&self, label: u8) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Indices of the curves carrying `label`, in sample order.
    pub fn group_indices(&self, label: u8) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// The curves of one group as a standalone sample.
    pub fn group_sample(&self, label: u8) -> Result<FunctionalSample> {
        let curves: Vec<Curve> = self
            .group_indices(label)
            .into_iter()
            .map(|i| self.sample.curves()[i].clone())
            .collect();
        if curves.is_empty() {
            return Err(Error::EmptyGroup(label));
        }
        FunctionalSample::new(self.sample.grid().clone(), curves)
    }

    /// Sub-sample restricted to `indices` (kept in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledSample> {
        let mut curves = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
            curves.push(self.sample.curves()[i].clone());
            labels.push(self.labels[i]);
        }
        LabeledSample::new(
            FunctionalSample::new(self.sample.grid().clone(), curves)?,
            labels,
        )
    }

    /// Same curves with the two labels exchanged.
    pub fn swap_labels(&self) -> LabeledSample {
        LabeledSample {
            sample: self.sample.clone(),
            labels: self.labels.iter().map(|l| 1 - l).collect(),
        }
    }

    /// Labeled sample with every curve mapped through `scale * x + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> LabeledSample {
        LabeledSample {
            sample: self.sample.affine(scale, shift),
            labels: self.labels.clone(),
        }
    }
}

/// Re-check every `LabeledSample` invariant.
///
/// Construction already enforces them; this is the explicit entry point for
/// callers holding data of uncertain provenance.
pub fn validate_labeled_sample(s: &LabeledSample) -> Result<()> {
    for (i, c) in s.sample().curves().iter().enumerate() {
        if c.len() != s.grid().len() {
            return Err(Error::GridMismatch(format!(
                "curve {i} has {} values on a {}-point grid",
                c.len(),
                s.grid().len()
            )));
        }
        if let Some(v) = c.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(format!("curve {i} value {v}")));
        }
    }
    for g in 0..2u8 {
        if s.group_size(g) == 0 {
            return Err(Error::EmptyGroup(g));
        }
    }
    Ok(())
}

/// Which functional depth to compute, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DepthKind {
    Fmd,
    Hmd,
    Rtd,
    Idd,
    Mbd,
    Fsd,
    Kfsd,
}

impl DepthKind {
    pub fn name(&self) -> &'static str {
        match self {
            DepthKind::Fmd => "FMD",
            DepthKind::Hmd => "HMD",
            DepthKind::Rtd => "RTD",
            DepthKind::Idd => "IDD",
            DepthKind::Mbd => "MBD",
            DepthKind::Fsd => "FSD",
            DepthKind::Kfsd => "KFSD",
        }
    }

    pub const ALL: [DepthKind; 7] = [
        DepthKind::Fmd,
        DepthKind::Hmd,
        DepthKind::Rtd,
        DepthKind::Idd,
        DepthKind::Mbd,
        DepthKind::Fsd,
        DepthKind::Kfsd,
    ];
}

impl std::fmt::Display for DepthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully resolved depth specification.
///
/// Hyperparameters must be present exactly for the kinds that use them:
/// bandwidth percentile for HMD and KFSD, projection count and seed for RTD
/// and IDD, band order (fixed at 2) for MBD.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSpec {
    pub kind: DepthKind,
    pub bandwidth_percentile: Option<f64>,
    pub num_projections: Option<usize>,
    pub band_order: Option<u32>,
    pub projection_seed: Option<u64>,
}

impl DepthSpec {
    pub fn fmd() -> Self {
        Self {
            kind: DepthKind::Fmd,
            bandwidth_percentile: None,
            num_projections: None,
            band_order: None,
            projection_seed: None,
        }
    }

    pub fn hmd(bandwidth_percentile: f64) -> Self {
        Self {
            kind: DepthKind::Hmd,
            bandwidth_percentile: Some(bandwidth_percentile),
            num_projections: None,
            band_order: None,
            projection_seed: None,
        }
    }

    pub fn rtd(num_projections: usize, projection_seed: u64) -> Self {
        Self {
            kind: DepthKind::Rtd,
            bandwidth_percentile: None,
            num_projections: Some(num_projections),
            band_order: None,
            projection_seed: Some(projection_seed),
        }
    }

    pub fn idd(num_projections: usize, projection_seed: u64) -> Self {
        Self {
            kind: DepthKind::Idd,
            bandwidth_percentile: None,
            num_projections: Some(num_projections),
            band_order: None,
            projection_seed: Some(projection_seed),
        }
    }

    pub fn mbd() -> Self {
        Self {
            kind: DepthKind::Mbd,
            bandwidth_percentile: None,
            num_projections: None,
            band_order: Some(2),
            projection_seed: None,
        }
    }

    pub fn fsd() -> Self {
        Self {
            kind: DepthKind::Fsd,
            bandwidth_percentile: None,
            num_projections: None,
            band_order: None,
            projection_seed: None,
        }
    }

    pub fn kfsd(bandwidth_percentile: f64) -> Self {
        Self {
            kind: DepthKind::Kfsd,
            bandwidth_percentile: Some(bandwidth_percentile),
            num_projections: None,
            band_order: None,
            projection_seed: None,
        }
    }

    /// Check that hyperparameters are present exactly where required.
    pub fn validate(&self) -> Result<()> {
        let needs_bandwidth = matches!(self.kind, DepthKind::Hmd | DepthKind::Kfsd);
        let needs_projections = matches!(self.kind, DepthKind::Rtd | DepthKind::Idd);
        let needs_band = self.kind == DepthKind::Mbd;

        match (needs_bandwidth, self.bandwidth_percentile) {
            (true, Some(p)) if p > 0.0 && p < 100.0 => {}
            (true, Some(p)) => {
                return Err(Error::InvalidSpec(format!(
                    "bandwidth percentile {p} outside (0, 100)"
                )))
            }
            (true, None) => {
                return Err(Error::InvalidSpec(format!(
                    "{} requires a bandwidth percentile",
                    self.kind
                )))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidSpec(format!(
                    "{} does not take a bandwidth percentile",
                    self.kind
                )))
            }
            (false, None) => {}
        }

        match (needs_projections, self.num_projections, self.projection_seed) {
            (true, Some(p), Some(_)) if p >= 1 => {}
            (true, Some(_), Some(_)) => {
                return Err(Error::InvalidSpec("projection count must be >= 1".into()))
            }
            (true, _, _) => {
                return Err(Error::InvalidSpec(format!(
                    "{} requires a projection count and seed",
                    self.kind
                )))
            }
            (false, None, None) => {}
            (false, _, _) => {
                return Err(Error::InvalidSpec(format!(
                    "{} does not take projections",
                    self.kind
                )))
            }
        }

        match (needs_band, self.band_order) {
            (true, Some(2)) => {}
            (true, Some(j)) => {
                return Err(Error::InvalidSpec(format!(
                    "only band order 2 is supported, got {j}"
                )))
            }
            (true, None) => return Err(Error::InvalidSpec("MBD requires a band order".into())),
            (false, Some(_)) => {
                return Err(Error::InvalidSpec(format!(
                    "{} does not take a band order",
                    self.kind
                )))
            }
            (false, None) => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new(vec![0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn grid_rejects_short_and_unsorted() {
        assert!(Grid::new(vec![0.0]).is_err());
        assert!(matches!(
            Grid::new(vec![0.0, 2.0, 1.0]),
            Err(Error::DomainNotIncreasing(2))
        ));
        assert!(Grid::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn grid_equidistance_flag() {
        assert!(grid3().is_equidistant());
        assert!(!Grid::new(vec![0.0, 0.1, 1.0]).unwrap().is_equidistant());
        let g = Grid::equidistant(0.0, 2.0 * std::f64::consts::PI, 51).unwrap();
        assert!(g.is_equidistant());
        assert_eq!(g.len(), 51);
        assert_eq!(g.points()[50], 2.0 * std::f64::consts::PI);
    }

    #[test]
    fn trapezoid_weights_sum_to_span() {
        let g = Grid::new(vec![0.0, 0.3, 1.0, 2.0]).unwrap();
        let total: f64 = g.trapezoid_weights().iter().sum();
        assert!((total - g.span()).abs() < 1e-12);
    }

    #[test]
    fn curve_rejects_non_finite() {
        assert!(Curve::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(Curve::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn minimal_valid_labeled_sample() {
        let s = FunctionalSample::new(
            grid3(),
            vec![Curve::constant(0.0, 3).unwrap(), Curve::constant(1.0, 3).unwrap()],
        )
        .unwrap();
        let ls = LabeledSample::new(s, vec![0, 1]).unwrap();
        assert!(validate_labeled_sample(&ls).is_ok());
        assert_eq!(ls.group_size(0), 1);
        assert_eq!(ls.group_size(1), 1);
    }

    #[test]
    fn one_sided_labels_fail_validation_with_empty_group() {
        let s = FunctionalSample::new(
            grid3(),
            vec![Curve::constant(0.0, 3).unwrap(), Curve::constant(1.0, 3).unwrap()],
        )
        .unwrap();
        let ls = LabeledSample::new(s, vec![0, 0]).unwrap();
        match validate_labeled_sample(&ls) {
            Err(Error::EmptyGroup(1)) => {}
            other => panic!("expected EmptyGroup(1), got {other:?}"),
        }
    }

    #[test]
    fn short_curve_is_a_grid_mismatch() {
        let r = FunctionalSample::new(grid3(), vec![Curve::new(vec![1.0, 2.0]).unwrap()]);
        assert!(matches!(r, Err(Error::GridMismatch(_))));
    }

    #[test]
    fn subset_and_swap() {
        let s = FunctionalSample::new(
            grid3(),
            vec![
                Curve::constant(0.0, 3).unwrap(),
                Curve::constant(1.0, 3).unwrap(),
                Curve::constant(2.0, 3).unwrap(),
            ],
        )
        .unwrap();
        let ls = LabeledSample::new(s, vec![0, 1, 0]).unwrap();
        let sub = ls.subset(&[2, 1]).unwrap();
        assert_eq!(sub.labels(), &[0, 1]);
        assert_eq!(sub.sample().curves()[0].values()[0], 2.0);
        let swapped = ls.swap_labels();
        assert_eq!(swapped.labels(), &[1, 0, 1]);
    }

    #[test]
    fn depth_spec_hyperparameter_presence() {
        assert!(DepthSpec::fmd().validate().is_ok());
        assert!(DepthSpec::kfsd(15.0).validate().is_ok());
        assert!(DepthSpec::rtd(50, 1).validate().is_ok());
        assert!(DepthSpec::mbd().validate().is_ok());

        let mut bad = DepthSpec::fmd();
        bad.bandwidth_percentile = Some(15.0);
        assert!(bad.validate().is_err());

        assert!(DepthSpec::kfsd(0.0).validate().is_err());
        assert!(DepthSpec::kfsd(100.0).validate().is_err());
        assert!(DepthSpec::rtd(0, 1).validate().is_err());

        let mut j3 = DepthSpec::mbd();
        j3.band_order = Some(3);
        assert!(j3.validate().is_err());
    }
}
