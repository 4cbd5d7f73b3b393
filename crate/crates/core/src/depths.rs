//! The seven functional depths and the 1-D depths behind the projection
//! methods.
//!
//! FSD is the spatial depth built from unit-norm direction curves; KFSD is
//! its kernelized version where every inner product is replaced by a
//! Gaussian kernel, which concentrates influence on neighboring curves.
//! Summation order is fixed (sample index order) so results are
//! bit-reproducible.

use crate::error::{Error, Result};
use crate::geometry::{bandwidth_from_percentile, l2_distance, l2_inner, l2_norm, pairwise_distances, DistanceMatrix};
use crate::rng::substream;
use crate::sample::{Curve, DepthKind, DepthSpec, FunctionalSample, Grid, LabeledSample};
use rand_distr::{Distribution, StandardNormal};

/// Relative threshold under which two curves are treated as coincident.
const EPS_ZERO_REL: f64 = 1e-12;

/// Law of the random direction curves.
///
/// Random Tukey depth follows its source convention of directions drawn
/// uniformly on the sphere of the discretization (normalized white noise);
/// the random-projection tradition behind IDD draws Brownian paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionProcess {
    BrownianMotion,
    WhiteNoise,
}

/// `p` random unit-norm direction curves on a grid.
#[derive(Debug, Clone)]
pub struct ProjectionSet {
    directions: FunctionalSample,
    process: ProjectionProcess,
    seed: u64,
}

impl ProjectionSet {
    pub fn directions(&self) -> &FunctionalSample {
        &self.directions
    }

    pub fn process(&self) -> ProjectionProcess {
        self.process
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Depth values for a batch of query curves, together with the spec that
/// produced them.
#[derive(Debug, Clone)]
pub struct DepthVector {
    pub values: Vec<f64>,
    pub spec: DepthSpec,
}

fn check_query(s: &FunctionalSample, x: &Curve) -> Result<()> {
    if x.len() != s.grid().len() {
        return Err(Error::GridMismatch(format!(
            "query of length {} on a {}-point grid",
            x.len(),
            s.grid().len()
        )));
    }
    Ok(())
}

/// Coincidence threshold: 1e-12 times the largest L2 norm among the sample
/// curves and the query.
fn eps_zero(s: &FunctionalSample, x: &Curve) -> f64 {
    let grid = s.grid();
    let mut scale = l2_norm(x, grid).unwrap_or(0.0);
    for c in s.curves() {
        scale = scale.max(l2_norm(c, grid).unwrap_or(0.0));
    }
    EPS_ZERO_REL * scale
}

/// Functional spatial depth of `x` relative to the sample.
///
/// One minus the norm of the average unit direction from `x` to the sample
/// curves; curves coinciding with `x` contribute the zero function.
pub fn fsd(s: &FunctionalSample, x: &Curve) -> Result<f64> {
    check_query(s, x)?;
    let grid = s.grid();
    let eps = eps_zero(s, x);
    let m = grid.len();
    let mut sum_sign = vec![0.0; m];
    for y in s.curves() {
        let diff = x.minus(y);
        let norm = l2_norm(&diff, grid)?;
        if norm > eps {
            for (acc, v) in sum_sign.iter_mut().zip(diff.values()) {
                *acc += v / norm;
            }
        }
    }
    let sum_curve = Curve::new(sum_sign)?;
    Ok(1.0 - l2_norm(&sum_curve, grid)? / s.len() as f64)
}

/// FSD computed through the inner-product expansion of the squared sign sum.
///
/// Independent of the direction-sum route in [`fsd`]; the query must be
/// distinct from every sample curve.
pub fn fsd_inner_product_oracle(s: &FunctionalSample, x: &Curve) -> Result<f64> {
    check_query(s, x)?;
    let grid = s.grid();
    let eps = eps_zero(s, x);
    let n = s.len();

    let xx = l2_inner(x, x, grid)?;
    let mut xy = vec![0.0; n];
    let mut dist_x = vec![0.0; n];
    for (i, y) in s.curves().iter().enumerate() {
        xy[i] = l2_inner(x, y, grid)?;
        dist_x[i] = l2_distance(x, y, grid)?;
        if dist_x[i] <= eps {
            return Err(Error::ZeroDistance(i));
        }
    }

    let mut total = 0.0;
    for (i, y) in s.curves().iter().enumerate() {
        for (j, z) in s.curves().iter().enumerate() {
            let yz = l2_inner(y, z, grid)?;
            total += (xx + yz - xy[i] - xy[j]) / (dist_x[i] * dist_x[j]);
        }
    }
    Ok(1.0 - total.max(0.0).sqrt() / n as f64)
}

/// Gaussian kernel used by KFSD: exp(-||x - y||^2 / sigma^2).
pub fn gaussian_kernel_kfsd(x: &Curve, y: &Curve, grid: &Grid, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::DegenerateBandwidth(format!("sigma {sigma}")));
    }
    let d = l2_distance(x, y, grid)?;
    Ok((-(d * d) / (sigma * sigma)).exp())
}

/// 1 - exp(-u) computed without cancellation for small u.
fn one_minus_exp_neg(u: f64) -> f64 {
    -(-u).exp_m1()
}

/// Precomputed per-sample state for repeated KFSD evaluations at one
/// bandwidth: the kernel values between all sample pairs.
pub(crate) struct KfsdContext {
    kernel: Vec<f64>, // row-major n x n, kappa(y_i, y_j)
    n: usize,
    sigma_sq: f64,
}

impl KfsdContext {
    pub(crate) fn new(pairwise: &DistanceMatrix, sigma: f64) -> Result<Self> {
        if sigma <= 0.0 {
            return Err(Error::DegenerateBandwidth(format!("sigma {sigma}")));
        }
        let n = pairwise.n();
        let s2 = sigma * sigma;
        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = pairwise.get(i, j);
                kernel[i * n + j] = (-(d * d) / s2).exp();
            }
        }
        Ok(Self {
            kernel,
            n,
            sigma_sq: s2,
        })
    }

    /// KFSD of a query at distances `dist_x` from the sample curves.
    ///
    /// Curves within `eps` of the query are excluded from the double sum;
    /// the divisor stays at the full sample size.
    pub(crate) fn depth(&self, dist_x: &[f64], eps: f64) -> f64 {
        let kept: Vec<usize> = (0..self.n).filter(|&i| dist_x[i] > eps).collect();
        if kept.is_empty() {
            return 1.0;
        }
        // 1 - kappa(x, y_i) computed without cancellation for tiny exponents
        let one_minus_kxy: Vec<f64> = kept
            .iter()
            .map(|&i| one_minus_exp_neg(dist_x[i] * dist_x[i] / self.sigma_sq))
            .collect();
        let denom: Vec<f64> = one_minus_kxy.iter().map(|v| (2.0 * v).sqrt()).collect();
        let kxy: Vec<f64> = one_minus_kxy.iter().map(|v| 1.0 - v).collect();

        let mut total = 0.0;
        for (a, &i) in kept.iter().enumerate() {
            for (b, &j) in kept.iter().enumerate() {
                let kyz = self.kernel[i * self.n + j];
                // kappa(x,x) + kappa(y,z) - kappa(x,y) - kappa(x,z), grouped
                // to avoid cancellation when all kernels are close to 1
                let numer = one_minus_kxy[a] + (kyz - kxy[b]);
                total += numer / (denom[a] * denom[b]);
            }
        }
        1.0 - total.max(0.0).sqrt() / self.n as f64
    }
}

/// Kernelized functional spatial depth of `x` with bandwidth `sigma`.
pub fn kfsd(s: &FunctionalSample, x: &Curve, sigma: f64) -> Result<f64> {
    check_query(s, x)?;
    let grid = s.grid();
    let eps = eps_zero(s, x);
    let dist_x: Vec<f64> = s
        .curves()
        .iter()
        .map(|y| l2_distance(x, y, grid))
        .collect::<Result<_>>()?;
    let ctx = KfsdContext::new(&pairwise_distances(s), sigma)?;
    Ok(ctx.depth(&dist_x, eps))
}

/// Normalizing constant of the h-modal kernel, kappa(0) = 2 / sqrt(2 pi).
pub const HMD_KERNEL_AT_ZERO: f64 = 0.797_884_560_802_865_4;

/// h-modal depth: sum of Gaussian kernel similarities to the sample curves.
///
/// `normalized` divides by `n * kappa(0)` so the value lies in (0, 1].
pub fn hmd(s: &FunctionalSample, x: &Curve, sigma: f64, normalized: bool) -> Result<f64> {
    check_query(s, x)?;
    if sigma <= 0.0 {
        return Err(Error::DegenerateBandwidth(format!("sigma {sigma}")));
    }
    let grid = s.grid();
    let mut raw = 0.0;
    for y in s.curves() {
        let d = l2_distance(x, y, grid)?;
        raw += HMD_KERNEL_AT_ZERO * (-(d * d) / (2.0 * sigma * sigma)).exp();
    }
    if normalized {
        Ok(raw / (s.len() as f64 * HMD_KERNEL_AT_ZERO))
    } else {
        Ok(raw)
    }
}

/// Fraiman-Muniz depth: integrated pointwise centrality of `x(t)` in the
/// empirical distribution of the sample values at `t`.
pub fn fmd(s: &FunctionalSample, x: &Curve) -> Result<f64> {
    check_query(s, x)?;
    let grid = s.grid();
    let n = s.len() as f64;
    let weights = grid.trapezoid_weights();
    let span = grid.span();
    let mut acc = 0.0;
    for (t, (&w, &v)) in weights.iter().zip(x.values()).enumerate() {
        let count = s
            .curves()
            .iter()
            .filter(|y| y.values()[t] <= v)
            .count() as f64;
        let centrality = 1.0 - (0.5 - count / n).abs();
        acc += w * centrality;
    }
    Ok(acc / span)
}

/// Modified band depth with bands of two curves: the average over unordered
/// sample pairs of the fraction of grid points where `x` lies inside the
/// closed band of the pair.
pub fn mbd(s: &FunctionalSample, x: &Curve) -> Result<f64> {
    check_query(s, x)?;
    let n = s.len();
    if n < 2 {
        return Err(Error::InsufficientSample(format!(
            "MBD needs at least 2 curves, got {n}"
        )));
    }
    let m = s.grid().len() as f64;
    let xv = x.values();
    let mut total = 0.0;
    for i in 0..n {
        let yi = s.curves()[i].values();
        for j in i + 1..n {
            let yj = s.curves()[j].values();
            let mut inside = 0usize;
            for t in 0..xv.len() {
                let (lo, hi) = if yi[t] <= yj[t] { (yi[t], yj[t]) } else { (yj[t], yi[t]) };
                if lo <= xv[t] && xv[t] <= hi {
                    inside += 1;
                }
            }
            total += inside as f64 / m;
        }
    }
    Ok(total / (n * (n - 1) / 2) as f64)
}

/// 1-D halfspace (Tukey) depth: min(#{u <= v}, #{u >= v}) / n.
pub fn halfspace_depth_1d(values: &[f64], v: f64) -> f64 {
    assert!(!values.is_empty(), "halfspace depth of an empty sample");
    let le = values.iter().filter(|u| **u <= v).count();
    let ge = values.iter().filter(|u| **u >= v).count();
    le.min(ge) as f64 / values.len() as f64
}

/// 1-D simplicial depth: fraction of unordered pairs whose closed interval
/// covers `v`.
pub fn simplicial_depth_1d(values: &[f64], v: f64) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientSample(format!(
            "simplicial depth needs at least 2 values, got {n}"
        )));
    }
    let mut covered = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            let (lo, hi) = if values[i] <= values[j] {
                (values[i], values[j])
            } else {
                (values[j], values[i])
            };
            if lo <= v && v <= hi {
                covered += 1;
            }
        }
    }
    Ok(covered as f64 / (n * (n - 1) / 2) as f64)
}

/// `p` unit-norm random direction curves on the grid, deterministic in
/// `seed`.
///
/// Brownian paths start at 0 and accumulate independent Gaussian increments
/// with variance equal to the grid spacing; white-noise directions draw an
/// independent standard Gaussian at every grid point. Both are rescaled to
/// unit L2 norm.
pub fn generate_projections(
    grid: &Grid,
    p: usize,
    seed: u64,
    process: ProjectionProcess,
) -> ProjectionSet {
    let pts = grid.points();
    let mut directions = Vec::with_capacity(p);
    for k in 0..p {
        let mut rng = substream(seed, "projection", k as u64);
        let mut path = Vec::with_capacity(pts.len());
        match process {
            ProjectionProcess::WhiteNoise => {
                for _ in 0..pts.len() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    path.push(z);
                }
            }
            ProjectionProcess::BrownianMotion => {
                path.push(0.0);
                for i in 1..pts.len() {
                    let dt = pts[i] - pts[i - 1];
                    let z: f64 = StandardNormal.sample(&mut rng);
                    path.push(path[i - 1] + z * dt.sqrt());
                }
            }
        }
        let curve = Curve::new(path).expect("gaussian draws are finite");
        let norm = l2_norm(&curve, grid).expect("path matches grid");
        let unit = if norm > 0.0 {
            curve.affine(1.0 / norm, 0.0)
        } else {
            curve
        };
        directions.push(unit);
    }
    ProjectionSet {
        directions: FunctionalSample::new(grid.clone(), directions)
            .expect("directions share the grid"),
        process,
        seed,
    }
}

/// The direction law each projection depth uses by convention.
pub fn projection_process_for(kind: DepthKind) -> ProjectionProcess {
    match kind {
        DepthKind::Rtd => ProjectionProcess::WhiteNoise,
        _ => ProjectionProcess::BrownianMotion,
    }
}

fn check_projections(s: &FunctionalSample, proj: &ProjectionSet) -> Result<()> {
    if proj.directions.grid().points() != s.grid().points() {
        return Err(Error::GridMismatch(
            "projection directions on a different grid".into(),
        ));
    }
    Ok(())
}

/// Random Tukey depth: minimum 1-D halfspace depth of the projected query
/// over the direction set.
pub fn rtd(s: &FunctionalSample, x: &Curve, proj: &ProjectionSet) -> Result<f64> {
    check_query(s, x)?;
    check_projections(s, proj)?;
    let grid = s.grid();
    let mut depth = f64::INFINITY;
    for d in proj.directions.curves() {
        let projected: Vec<f64> = s
            .curves()
            .iter()
            .map(|y| l2_inner(y, d, grid))
            .collect::<Result<_>>()?;
        let v = l2_inner(x, d, grid)?;
        depth = depth.min(halfspace_depth_1d(&projected, v));
    }
    Ok(depth)
}

/// Integrated dual depth: mean 1-D simplicial depth of the projected query
/// over the direction set.
pub fn idd(s: &FunctionalSample, x: &Curve, proj: &ProjectionSet) -> Result<f64> {
    check_query(s, x)?;
    check_projections(s, proj)?;
    let grid = s.grid();
    let mut total = 0.0;
    for d in proj.directions.curves() {
        let projected: Vec<f64> = s
            .curves()
            .iter()
            .map(|y| l2_inner(y, d, grid))
            .collect::<Result<_>>()?;
        let v = l2_inner(x, d, grid)?;
        total += simplicial_depth_1d(&projected, v)?;
    }
    Ok(total / proj.len() as f64)
}

/// Depth of every query curve relative to one labeled group.
///
/// Bandwidth percentiles are converted to sigma using the group's own
/// pairwise distances; HMD is returned in normalized form. When a query
/// belongs to the group, the membership conventions of each depth apply
/// (FSD: zero self term; KFSD: coincident curves excluded; others: self
/// included).
pub fn depth_vector(
    s: &LabeledSample,
    group: u8,
    queries: &FunctionalSample,
    spec: &DepthSpec,
) -> Result<DepthVector> {
    spec.validate()?;
    if queries.grid().points() != s.grid().points() {
        return Err(Error::GridMismatch(
            "queries on a different grid than the sample".into(),
        ));
    }
    let group_sample = s.group_sample(group)?;

    let values = match spec.kind {
        DepthKind::Fmd => queries
            .curves()
            .iter()
            .map(|x| fmd(&group_sample, x))
            .collect::<Result<Vec<_>>>()?,
        DepthKind::Mbd => queries
            .curves()
            .iter()
            .map(|x| mbd(&group_sample, x))
            .collect::<Result<Vec<_>>>()?,
        DepthKind::Fsd => queries
            .curves()
            .iter()
            .map(|x| fsd(&group_sample, x))
            .collect::<Result<Vec<_>>>()?,
        DepthKind::Hmd => {
            let dist = pairwise_distances(&group_sample);
            let sigma = bandwidth_from_percentile(
                &dist,
                spec.bandwidth_percentile.expect("validated"),
            )?;
            queries
                .curves()
                .iter()
                .map(|x| hmd(&group_sample, x, sigma, true))
                .collect::<Result<Vec<_>>>()?
        }
        DepthKind::Kfsd => {
            let dist = pairwise_distances(&group_sample);
            let sigma = bandwidth_from_percentile(
                &dist,
                spec.bandwidth_percentile.expect("validated"),
            )?;
            let ctx = KfsdContext::new(&dist, sigma)?;
            let grid = group_sample.grid();
            let mut group_scale: f64 = 0.0;
            for c in group_sample.curves() {
                group_scale = group_scale.max(l2_norm(c, grid)?);
            }
            queries
                .curves()
                .iter()
                .map(|x| {
                    let eps = EPS_ZERO_REL * group_scale.max(l2_norm(x, grid)?);
                    let dist_x: Vec<f64> = group_sample
                        .curves()
                        .iter()
                        .map(|y| l2_distance(x, y, grid))
                        .collect::<Result<_>>()?;
                    Ok(ctx.depth(&dist_x, eps))
                })
                .collect::<Result<Vec<_>>>()?
        }
        DepthKind::Rtd | DepthKind::Idd => {
            let proj = generate_projections(
                s.grid(),
                spec.num_projections.expect("validated"),
                spec.projection_seed.expect("validated"),
                projection_process_for(spec.kind),
            );
            let f = if spec.kind == DepthKind::Rtd { rtd } else { idd };
            queries
                .curves()
                .iter()
                .map(|x| f(&group_sample, x, &proj))
                .collect::<Result<Vec<_>>>()?
        }
    };

    Ok(DepthVector {
        values,
        spec: spec.clone(),
    })
}
