//! Depth-based binary classifiers and functional k-nearest neighbors.
//!
//! DTM assigns to the group with the nearer depth-trimmed mean, WAD to the
//! group with the smaller depth-weighted average distance, WMD to the group
//! in which the query is deeper. Exact score ties (measure zero for
//! continuous data) are broken uniformly at random from a recorded seed and
//! surfaced through `tie_broken`.

use crate::depths::depth_vector;
use crate::error::{Error, Result};
use crate::geometry::l2_distance;
use crate::rng::substream;
use crate::sample::{Curve, DepthSpec, FunctionalSample, LabeledSample};
use rand::Rng;

/// Classification procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Procedure {
    Dtm,
    Wad,
    Wmd,
    Knn,
}

impl Procedure {
    pub fn name(&self) -> &'static str {
        match self {
            Procedure::Dtm => "DTM",
            Procedure::Wad => "WAD",
            Procedure::Wmd => "WMD",
            Procedure::Knn => "kNN",
        }
    }
}

impl std::fmt::Display for Procedure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully resolved classifier: procedure, depth, and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub method: Procedure,
    pub depth: Option<DepthSpec>,
    /// Trimming proportion for DTM.
    pub alpha: Option<f64>,
    /// Neighbor count for k-NN; odd so two-group votes cannot tie.
    pub k: Option<usize>,
    /// Seed for breaking exact score ties.
    pub tie_seed: u64,
}

impl ClassifierSpec {
    pub fn dtm(depth: DepthSpec, alpha: f64, tie_seed: u64) -> Self {
        Self {
            method: Procedure::Dtm,
            depth: Some(depth),
            alpha: Some(alpha),
            k: None,
            tie_seed,
        }
    }

    pub fn wad(depth: DepthSpec, tie_seed: u64) -> Self {
        Self {
            method: Procedure::Wad,
            depth: Some(depth),
            alpha: None,
            k: None,
            tie_seed,
        }
    }

    pub fn wmd(depth: DepthSpec, tie_seed: u64) -> Self {
        Self {
            method: Procedure::Wmd,
            depth: Some(depth),
            alpha: None,
            k: None,
            tie_seed,
        }
    }

    pub fn knn(k: usize, tie_seed: u64) -> Self {
        Self {
            method: Procedure::Knn,
            depth: None,
            alpha: None,
            k: Some(k),
            tie_seed,
        }
    }

    /// Same classifier with a different KFSD/HMD bandwidth percentile.
    pub fn with_percentile(&self, pct: f64) -> Self {
        let mut out = self.clone();
        if let Some(d) = &mut out.depth {
            d.bandwidth_percentile = Some(pct);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Procedure::Knn => {
                if self.depth.is_some() {
                    return Err(Error::InvalidSpec("k-NN does not take a depth".into()));
                }
                match self.k {
                    Some(k) if k >= 1 && k % 2 == 1 => {}
                    Some(k) => {
                        return Err(Error::InvalidSpec(format!("k must be odd and >= 1, got {k}")))
                    }
                    None => return Err(Error::InvalidSpec("k-NN requires k".into())),
                }
                if self.alpha.is_some() {
                    return Err(Error::InvalidSpec("k-NN does not take alpha".into()));
                }
            }
            method => {
                let depth = self
                    .depth
                    .as_ref()
                    .ok_or_else(|| Error::InvalidSpec(format!("{method} requires a depth")))?;
                depth.validate()?;
                if self.k.is_some() {
                    return Err(Error::InvalidSpec(format!("{method} does not take k")));
                }
                match (method, self.alpha) {
                    (Procedure::Dtm, Some(a)) if (0.0..1.0).contains(&a) => {}
                    (Procedure::Dtm, Some(a)) => {
                        return Err(Error::InvalidSpec(format!("alpha {a} outside [0, 1)")))
                    }
                    (Procedure::Dtm, None) => {
                        return Err(Error::InvalidSpec("DTM requires alpha".into()))
                    }
                    (_, Some(_)) => {
                        return Err(Error::InvalidSpec(format!("{method} does not take alpha")))
                    }
                    (_, None) => {}
                }
            }
        }
        Ok(())
    }
}

/// A classified query: predicted label, the per-group decision scores, and
/// whether an exact tie had to be broken at random.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: u8,
    pub scores: [f64; 2],
    pub tie_broken: bool,
}

fn break_tie(tie_seed: u64) -> u8 {
    let mut rng = substream(tie_seed, "tie-break", 0);
    rng.gen_range(0..2u8)
}

/// Pick the label minimizing (or maximizing) the scores, breaking an exact
/// tie uniformly at random from `tie_seed`.
fn decide(scores: [f64; 2], minimize: bool, tie_seed: u64) -> Prediction {
    if scores[0] == scores[1] {
        return Prediction {
            label: break_tie(tie_seed),
            scores,
            tie_broken: true,
        };
    }
    let first_wins = if minimize {
        scores[0] < scores[1]
    } else {
        scores[0] > scores[1]
    };
    Prediction {
        label: if first_wins { 0 } else { 1 },
        scores,
        tie_broken: false,
    }
}

/// Number of curves kept by an alpha-trim of a group of size `n`:
/// ceil((1 - alpha) n), computed robustly when the product is integral.
fn trim_keep_count(n: usize, alpha: f64) -> usize {
    let v = (1.0 - alpha) * n as f64;
    let rounded = v.round();
    let m = if (v - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        v.ceil() as usize
    };
    m.clamp(1, n)
}

/// Pointwise mean of the `ceil((1 - alpha) n_g)` deepest curves of a group.
///
/// Within-group depths are computed with every training curve as a member
/// of its own group; depth ties at the cutoff keep the lower curve index.
pub fn trimmed_mean(
    s: &LabeledSample,
    group: u8,
    depth: &DepthSpec,
    alpha: f64,
) -> Result<Curve> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidSpec(format!("alpha {alpha} outside [0, 1)")));
    }
    let group_sample = s.group_sample(group)?;
    let depths = depth_vector(s, group, &group_sample, depth)?;
    let n = group_sample.len();
    let keep = trim_keep_count(n, alpha);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        depths.values[b]
            .partial_cmp(&depths.values[a])
            .expect("depths are finite")
            .then(a.cmp(&b))
    });

    let m = group_sample.grid().len();
    let mut mean = vec![0.0; m];
    for &i in order.iter().take(keep) {
        for (acc, v) in mean.iter_mut().zip(group_sample.curves()[i].values()) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= keep as f64;
    }
    Curve::new(mean)
}

/// Distance-to-trimmed-mean classification.
pub fn dtm_classify(s: &LabeledSample, x: &Curve, spec: &ClassifierSpec) -> Result<Prediction> {
    spec.validate()?;
    if spec.method != Procedure::Dtm {
        return Err(Error::InvalidSpec(format!("{} passed to DTM", spec.method)));
    }
    let depth = spec.depth.as_ref().expect("validated");
    let alpha = spec.alpha.expect("validated");
    let mut scores = [0.0; 2];
    for g in 0..2u8 {
        let center = trimmed_mean(s, g, depth, alpha)?;
        scores[g as usize] = l2_distance(x, &center, s.grid())?;
    }
    Ok(decide(scores, true, spec.tie_seed))
}

/// Depth-weighted average distance from `x` to the curves of one group; the
/// weights are the within-group depths normalized by their sum.
pub fn wad_group_score(s: &LabeledSample, group: u8, x: &Curve, depth: &DepthSpec) -> Result<f64> {
    let group_sample = s.group_sample(group)?;
    let depths = depth_vector(s, group, &group_sample, depth)?;
    let total: f64 = depths.values.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeights(group));
    }
    let mut acc = 0.0;
    for (y, d) in group_sample.curves().iter().zip(&depths.values) {
        acc += d * l2_distance(x, y, s.grid())?;
    }
    Ok(acc / total)
}

/// Weighted-average-distance classification. The weights are the
/// within-group depths, normalized per group so group sizes are comparable.
pub fn wad_classify(s: &LabeledSample, x: &Curve, spec: &ClassifierSpec) -> Result<Prediction> {
    spec.validate()?;
    if spec.method != Procedure::Wad {
        return Err(Error::InvalidSpec(format!("{} passed to WAD", spec.method)));
    }
    let depth = spec.depth.as_ref().expect("validated");
    let mut scores = [0.0; 2];
    for g in 0..2u8 {
        scores[g as usize] = wad_group_score(s, g, x, depth)?;
    }
    Ok(decide(scores, true, spec.tie_seed))
}

/// Within-maximum-depth classification: the query goes to the group in
/// which it is deeper, with bandwidths resolved per group.
pub fn wmd_classify(s: &LabeledSample, x: &Curve, spec: &ClassifierSpec) -> Result<Prediction> {
    spec.validate()?;
    if spec.method != Procedure::Wmd {
        return Err(Error::InvalidSpec(format!("{} passed to WMD", spec.method)));
    }
    let depth = spec.depth.as_ref().expect("validated");
    let queries = FunctionalSample::new(s.grid().clone(), vec![x.clone()])?;
    let mut scores = [0.0; 2];
    for g in 0..2u8 {
        scores[g as usize] = depth_vector(s, g, &queries, depth)?.values[0];
    }
    Ok(decide(scores, false, spec.tie_seed))
}

/// Majority vote among the k nearest training curves. Distance ties at the
/// k-th rank keep the lower curve index; odd k with two groups means the
/// vote itself cannot tie.
pub fn knn_classify(s: &LabeledSample, x: &Curve, spec: &ClassifierSpec) -> Result<Prediction> {
    spec.validate()?;
    if spec.method != Procedure::Knn {
        return Err(Error::InvalidSpec(format!("{} passed to k-NN", spec.method)));
    }
    let k = spec.k.expect("validated");
    if s.len() < k {
        return Err(Error::InsufficientSample(format!(
            "k-NN with k = {k} on {} curves",
            s.len()
        )));
    }
    let mut ranked: Vec<(f64, usize)> = s
        .sample()
        .curves()
        .iter()
        .enumerate()
        .map(|(i, y)| Ok((l2_distance(x, y, s.grid())?, i)))
        .collect::<Result<_>>()?;
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1)));

    let mut votes = [0usize; 2];
    for (_, i) in ranked.iter().take(k) {
        votes[s.labels()[*i] as usize] += 1;
    }
    let scores = [votes[0] as f64, votes[1] as f64];
    Ok(decide(scores, false, spec.tie_seed))
}

/// Dispatch on the procedure named in the spec.
pub fn classify(s: &LabeledSample, x: &Curve, spec: &ClassifierSpec) -> Result<Prediction> {
    match spec.method {
        Procedure::Dtm => dtm_classify(s, x, spec),
        Procedure::Wad => wad_classify(s, x, spec),
        Procedure::Wmd => wmd_classify(s, x, spec),
        Procedure::Knn => knn_classify(s, x, spec),
    }
}

/// Classify a batch of queries, computing per-group training artifacts
/// (trimmed means, depth weights, bandwidths) once.
///
/// Each query gets its own tie substream derived from `(tie_seed, index)`,
/// so ties within a batch are broken independently.
pub fn classify_batch(
    s: &LabeledSample,
    queries: &FunctionalSample,
    spec: &ClassifierSpec,
) -> Result<Vec<Prediction>> {
    spec.validate()?;
    let tie_seed_for = |i: usize| crate::rng::derive_seed(spec.tie_seed, "batch-query", i as u64);
    match spec.method {
        Procedure::Dtm => {
            let depth = spec.depth.as_ref().expect("validated");
            let alpha = spec.alpha.expect("validated");
            let centers = [
                trimmed_mean(s, 0, depth, alpha)?,
                trimmed_mean(s, 1, depth, alpha)?,
            ];
            queries
                .curves()
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let scores = [
                        l2_distance(x, &centers[0], s.grid())?,
                        l2_distance(x, &centers[1], s.grid())?,
                    ];
                    Ok(decide(scores, true, tie_seed_for(i)))
                })
                .collect()
        }
        Procedure::Wad => {
            let depth = spec.depth.as_ref().expect("validated");
            let mut groups = Vec::new();
            for g in 0..2u8 {
                let group_sample = s.group_sample(g)?;
                let depths = depth_vector(s, g, &group_sample, depth)?;
                let total: f64 = depths.values.iter().sum();
                if total <= 0.0 {
                    return Err(Error::ZeroWeights(g));
                }
                groups.push((group_sample, depths.values, total));
            }
            queries
                .curves()
                .iter()
                .enumerate()
                .map(|(i, x)| {
                    let mut scores = [0.0; 2];
                    for (g, (group_sample, weights, total)) in groups.iter().enumerate() {
                        let mut acc = 0.0;
                        for (y, d) in group_sample.curves().iter().zip(weights) {
                            acc += d * l2_distance(x, y, s.grid())?;
                        }
                        scores[g] = acc / total;
                    }
                    Ok(decide(scores, true, tie_seed_for(i)))
                })
                .collect()
        }
        Procedure::Wmd => {
            let depth = spec.depth.as_ref().expect("validated");
            let d0 = depth_vector(s, 0, queries, depth)?;
            let d1 = depth_vector(s, 1, queries, depth)?;
            Ok(d0
                .values
                .iter()
                .zip(&d1.values)
                .enumerate()
                .map(|(i, (&a, &b))| decide([a, b], false, tie_seed_for(i)))
                .collect())
        }
        Procedure::Knn => queries
            .curves()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut by_query = spec.clone();
                by_query.tie_seed = tie_seed_for(i);
                knn_classify(s, x, &by_query)
            })
            .collect(),
    }
}
