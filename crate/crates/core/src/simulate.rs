//! Seeded generation of the built-in curve models CGP1-CGP4 and their
//! contaminated variants.
//!
//! Randomness is organized in named substreams keyed by the curve index, so
//! toggling contamination or changing one draw never shifts the others.

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sample::{Curve, FunctionalSample, Grid, LabeledSample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Functional form of a stationary covariance kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovKernelForm {
    /// amplitude * exp(-((t - s) / scale)^2)
    SqExp,
    /// amplitude * exp(-|t - s| / scale)
    AbsExp,
}

/// A stationary covariance kernel with positive amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceKernel {
    form: CovKernelForm,
    amplitude: f64,
    scale: f64,
}

impl CovarianceKernel {
    pub fn new(form: CovKernelForm, amplitude: f64, scale: f64) -> Result<Self> {
        if amplitude <= 0.0 || !amplitude.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "covariance amplitude must be positive, got {amplitude}"
            )));
        }
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "covariance scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            form,
            amplitude,
            scale,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn evaluate(&self, t: f64, s: f64) -> f64 {
        match self.form {
            CovKernelForm::SqExp => {
                let u = (t - s) / self.scale;
                self.amplitude * (-(u * u)).exp()
            }
            CovKernelForm::AbsExp => self.amplitude * (-((t - s).abs() / self.scale)).exp(),
        }
    }

    /// Dense covariance matrix over the grid (row-major).
    fn matrix(&self, grid: &Grid) -> Vec<f64> {
        let pts = grid.points();
        let m = pts.len();
        let mut k = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                k[i * m + j] = self.evaluate(pts[i], pts[j]);
            }
        }
        k
    }
}

/// Lower-triangular Cholesky factor of a symmetric matrix, in place.
/// Returns false if a non-positive pivot is hit.
fn cholesky_in_place(a: &mut [f64], m: usize) -> bool {
    for i in 0..m {
        for j in 0..=i {
            let mut sum = a[i * m + j];
            for k in 0..j {
                sum -= a[i * m + k] * a[j * m + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return false;
                }
                a[i * m + j] = sum.sqrt();
            } else {
                a[i * m + j] = sum / a[j * m + j];
            }
        }
        for j in i + 1..m {
            a[i * m + j] = 0.0;
        }
    }
    true
}

/// Lower-triangular factor of the kernel matrix with escalating diagonal
/// jitter. Jitter starts at 1e-10 * amplitude and is escalated tenfold up to
/// three times before giving up.
fn factor_with_jitter(cov: &CovarianceKernel, grid: &Grid) -> Result<Vec<f64>> {
    let m = grid.len();
    let base = cov.matrix(grid);
    let mut jitter = 0.0;
    for attempt in 0..=3 {
        let mut a = base.clone();
        if jitter > 0.0 {
            for i in 0..m {
                a[i * m + i] += jitter;
            }
        }
        if cholesky_in_place(&mut a, m) {
            return Ok(a);
        }
        jitter = if attempt == 0 {
            1e-10 * cov.amplitude()
        } else {
            jitter * 10.0
        };
    }
    Err(Error::FactorizationFailure(3))
}

fn draw_with_factor(factor: &[f64], m: usize, rng: &mut ChaCha8Rng) -> Curve {
    let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
    let mut out = vec![0.0; m];
    for i in 0..m {
        let mut acc = 0.0;
        for k in 0..=i {
            acc += factor[i * m + k] * z[k];
        }
        out[i] = acc;
    }
    Curve::new(out).expect("gaussian draw is finite")
}

/// One draw from the zero-mean Gaussian process with the given covariance,
/// advancing `rng`.
pub fn sample_gaussian_process(
    grid: &Grid,
    cov: &CovarianceKernel,
    rng: &mut ChaCha8Rng,
) -> Result<Curve> {
    let factor = factor_with_jitter(cov, grid)?;
    Ok(draw_with_factor(&factor, grid.len(), rng))
}

/// Which curve model to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CgpModel {
    Cgp1,
    Cgp2,
    Cgp3,
    Cgp4,
}

impl CgpModel {
    pub fn name(&self) -> &'static str {
        match self {
            CgpModel::Cgp1 => "CGP1",
            CgpModel::Cgp2 => "CGP2",
            CgpModel::Cgp3 => "CGP3",
            CgpModel::Cgp4 => "CGP4",
        }
    }

    /// Domain span of the model: [0, 1] for CGP1/CGP3, [0, 2 pi] for
    /// CGP2/CGP4.
    pub fn domain_end(&self) -> f64 {
        match self {
            CgpModel::Cgp1 | CgpModel::Cgp3 => 1.0,
            CgpModel::Cgp2 | CgpModel::Cgp4 => 2.0 * std::f64::consts::PI,
        }
    }
}

/// Full description of one simulated two-group sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgpSpec {
    pub model: CgpModel,
    pub contaminated: bool,
    /// Contamination probability for group 0.
    pub q: f64,
    pub n0: usize,
    pub n1: usize,
    pub grid_points: usize,
    pub seed: u64,
}

impl CgpSpec {
    pub fn new(model: CgpModel, n0: usize, n1: usize, seed: u64) -> Self {
        Self {
            model,
            contaminated: false,
            q: 0.10,
            n0,
            n1,
            grid_points: 51,
            seed,
        }
    }

    pub fn contaminated(mut self, q: f64) -> Self {
        self.contaminated = true;
        self.q = q;
        self
    }

    pub fn with_grid_points(mut self, m: usize) -> Self {
        self.grid_points = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.n1 == 0 {
            return Err(Error::InvalidSpec(format!(
                "group sizes must be positive, got {} and {}",
                self.n0, self.n1
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid needs at least 2 points, got {}",
                self.grid_points
            )));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidSpec(format!(
                "contamination probability {} outside [0, 1]",
                self.q
            )));
        }
        if self.contaminated && matches!(self.model, CgpModel::Cgp3 | CgpModel::Cgp4) {
            return Err(Error::InvalidSpec(format!(
                "{} has no contaminated variant",
                self.model.name()
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::equidistant(0.0, self.model.domain_end(), self.grid_points)
    }
}

/// Noise covariance of the model, if it has a Gaussian component.
fn noise_kernel(model: CgpModel) -> Option<CovarianceKernel> {
    match model {
        CgpModel::Cgp1 => Some(CovarianceKernel::new(CovKernelForm::SqExp, 0.25, 1.0).unwrap()),
        CgpModel::Cgp3 => Some(CovarianceKernel::new(CovKernelForm::AbsExp, 0.30, 0.3).unwrap()),
        CgpModel::Cgp4 => Some(CovarianceKernel::new(CovKernelForm::SqExp, 0.00025, 1.0).unwrap()),
        CgpModel::Cgp2 => None,
    }
}

/// Generate a labeled two-group sample from the model.
///
/// Group 0 curves come first (indices 0..n0), then group 1. The draws for
/// curve `i` depend only on `(seed, i)`, so samples with and without
/// contamination share all their noise and coefficient draws.
pub fn generate_cgp(spec: &CgpSpec) -> Result<LabeledSample> {
    spec.validate()?;
    let grid = spec.grid()?;
    let m = grid.len();
    let pts = grid.points();
    let n = spec.n0 + spec.n1;

    let factor = match noise_kernel(spec.model) {
        Some(cov) => Some(factor_with_jitter(&cov, &grid)?),
        None => None,
    };

    let mut curves = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);

    for i in 0..n {
        let group: u8 = if i < spec.n0 { 0 } else { 1 };
        let idx = i as u64;

        let contaminate = group == 0
            && spec.contaminated
            && substream(spec.seed, "contamination", idx).gen_bool(spec.q);

        let noise = factor.as_ref().map(|f| {
            let mut rng = substream(spec.seed, "gp", idx);
            draw_with_factor(f, m, &mut rng)
        });

        let values: Vec<f64> = match spec.model {
            CgpModel::Cgp1 | CgpModel::Cgp3 => {
                let eps = noise.expect("CGP1/CGP3 have a noise component");
                pts.iter()
                    .zip(eps.values())
                    .map(|(&t, &e)| {
                        let mean = match (group, contaminate) {
                            (0, false) => 4.0 * t,
                            (0, true) => 4.0 * t.sqrt(),
                            _ => 8.0 * t - 2.0,
                        };
                        mean + e
                    })
                    .collect()
            }
            CgpModel::Cgp2 | CgpModel::Cgp4 => {
                let mut rng = substream(spec.seed, "uniform", idx);
                let (u1, u2) = if group == 0 {
                    let a = rng.gen_range(0.05..0.1);
                    let b = rng.gen_range(0.05..0.1);
                    if contaminate {
                        // the cosine coefficient jumps to the group-1 range
                        (a, rng.gen_range(0.1..0.12))
                    } else {
                        (a, b)
                    }
                } else {
                    (rng.gen_range(0.1..0.12), rng.gen_range(0.1..0.12))
                };
                debug_assert!(if group == 1 || contaminate {
                    (0.1..0.12).contains(&u2)
                } else {
                    (0.05..0.1).contains(&u2)
                });
                pts.iter()
                    .enumerate()
                    .map(|(j, &t)| {
                        let base = u1 * t.sin() + u2 * t.cos();
                        match &noise {
                            Some(eps) => base + eps.values()[j],
                            None => base,
                        }
                    })
                    .collect()
            }
        };
        curves.push(Curve::new(values)?);
        labels.push(group);
    }

    LabeledSample::new(FunctionalSample::new(grid, curves)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_rejects_nonpositive_amplitude() {
        assert!(CovarianceKernel::new(CovKernelForm::SqExp, 0.0, 1.0).is_err());
        assert!(CovarianceKernel::new(CovKernelForm::SqExp, -1.0, 1.0).is_err());
    }

    #[test]
    fn gp_draw_is_deterministic() {
        let grid = Grid::equidistant(0.0, 1.0, 51).unwrap();
        let cov = CovarianceKernel::new(CovKernelForm::SqExp, 0.25, 1.0).unwrap();
        let mut a = substream(5, "gp", 0);
        let mut b = substream(5, "gp", 0);
        let x = sample_gaussian_process(&grid, &cov, &mut a).unwrap();
        let y = sample_gaussian_process(&grid, &cov, &mut b).unwrap();
        assert_eq!(x.values(), y.values());
    }

    #[test]
    fn gp_pointwise_variance_matches_amplitude() {
        let grid = Grid::equidistant(0.0, 1.0, 11).unwrap();
        let cov = CovarianceKernel::new(CovKernelForm::SqExp, 0.25, 1.0).unwrap();
        let factor = factor_with_jitter(&cov, &grid).unwrap();
        let n = 10_000;
        let t_idx = 5;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let mut rng = substream(99, "gp-var", i);
            let c = draw_with_factor(&factor, grid.len(), &mut rng);
            let v = c.values()[t_idx];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((var - 0.25).abs() <= 0.01, "sample variance {var}");
    }

    #[test]
    fn cgp1_sample_shapes_and_determinism() {
        let spec = CgpSpec::new(CgpModel::Cgp1, 6, 4, 11);
        let a = generate_cgp(&spec).unwrap();
        let b = generate_cgp(&spec).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.group_size(0), 6);
        assert_eq!(a.grid().len(), 51);
        for (ca, cb) in a.sample().curves().iter().zip(b.sample().curves()) {
            assert_eq!(ca.values(), cb.values());
        }
    }

    #[test]
    fn cgp2_single_curve_is_exact_sinusoid() {
        let spec = CgpSpec::new(CgpModel::Cgp2, 1, 1, 21).with_grid_points(51);
        let s = generate_cgp(&spec).unwrap();
        let grid = s.grid().clone();
        let c = &s.sample().curves()[0];

        // recover the coefficients from two grid points and check the rest
        let t0 = grid.points()[0]; // cos(0) = 1 so v0 = u2
        let u2 = c.values()[0] / t0.cos();
        let t1 = grid.points()[13];
        let u1 = (c.values()[13] - u2 * t1.cos()) / t1.sin();
        assert!((0.05..0.1).contains(&u1), "u1 = {u1}");
        assert!((0.05..0.1).contains(&u2), "u2 = {u2}");
        for (t, v) in grid.points().iter().zip(c.values()) {
            assert!((u1 * t.sin() + u2 * t.cos() - v).abs() <= 1e-12);
        }

        // group 1 coefficients live in [0.1, 0.12]
        let c1 = &s.sample().curves()[1];
        let v2 = c1.values()[0] / t0.cos();
        let v1 = (c1.values()[13] - v2 * t1.cos()) / t1.sin();
        assert!((0.1..0.12).contains(&v1), "v1 = {v1}");
        assert!((0.1..0.12).contains(&v2), "v2 = {v2}");
    }

    #[test]
    fn contamination_off_equals_plain_model() {
        let plain = generate_cgp(&CgpSpec::new(CgpModel::Cgp1, 5, 5, 7)).unwrap();
        let out_q0 = generate_cgp(&CgpSpec::new(CgpModel::Cgp1, 5, 5, 7).contaminated(0.0)).unwrap();
        for (a, b) in plain.sample().curves().iter().zip(out_q0.sample().curves()) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn contaminated_fraction_near_q() {
        let spec = CgpSpec::new(CgpModel::Cgp1, 10_000, 1, 3)
            .contaminated(0.10)
            .with_grid_points(5);
        let grid = spec.grid().unwrap();
        let plain = CgpSpec::new(CgpModel::Cgp1, 10_000, 1, 3).with_grid_points(5);
        let a = generate_cgp(&spec).unwrap();
        let b = generate_cgp(&plain).unwrap();
        // a curve is contaminated iff it differs from its uncontaminated twin
        let mut contaminated = 0usize;
        for i in 0..10_000 {
            if a.sample().curves()[i].values() != b.sample().curves()[i].values() {
                contaminated += 1;
            }
        }
        let frac = contaminated as f64 / 10_000.0;
        assert!((frac - 0.10).abs() <= 0.01, "contaminated fraction {frac}");
        let _ = grid;
    }

    #[test]
    fn cgp4_minus_cgp2_is_the_small_noise_component() {
        let n = 1000;
        let s2 = generate_cgp(&CgpSpec::new(CgpModel::Cgp2, n, 1, 77)).unwrap();
        let s4 = generate_cgp(&CgpSpec::new(CgpModel::Cgp4, n, 1, 77)).unwrap();
        let t_idx = 25;
        let diffs: Vec<f64> = (0..n)
            .map(|i| {
                s4.sample().curves()[i].values()[t_idx] - s2.sample().curves()[i].values()[t_idx]
            })
            .collect();
        let mean = diffs.iter().sum::<f64>() / n as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        assert!(
            var > 0.000125 && var < 0.000375,
            "difference variance {var} not within 50% of 0.00025"
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate_cgp(&CgpSpec::new(CgpModel::Cgp1, 0, 5, 1)).is_err());
        assert!(generate_cgp(&CgpSpec::new(CgpModel::Cgp3, 2, 2, 1).contaminated(0.1)).is_err());
        let mut bad_q = CgpSpec::new(CgpModel::Cgp1, 2, 2, 1);
        bad_q.q = 1.5;
        assert!(bad_q.validate().is_err());
    }
}
