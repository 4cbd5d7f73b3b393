//! Cross-validated selection of the KFSD bandwidth percentile.
//!
//! The training sample is split into label-stratified folds; every
//! candidate percentile is scored by its total misclassification count over
//! the folds. Ties at the minimum are broken by a per-method secondary
//! criterion, and only then at random.

use crate::classify::{classify_batch, trimmed_mean, wad_group_score, ClassifierSpec, Procedure};
use crate::depths::depth_vector;
use crate::error::{Error, Result};
use crate::geometry::l2_distance;
use crate::rng::substream;
use crate::sample::{DepthKind, FunctionalSample, LabeledSample};
use rand::seq::SliceRandom;
use rand::Rng;

/// A label-stratified fold assignment.
#[derive(Debug, Clone)]
pub struct CvPlan {
    folds: usize,
    fold_assignment: Vec<usize>,
    seed: u64,
}

impl CvPlan {
    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-curve fold index, in sample order.
    pub fn assignment(&self) -> &[usize] {
        &self.fold_assignment
    }

    /// Curve indices of one fold.
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_assignment
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Curve indices outside one fold.
    pub fn complement_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_assignment
            .iter()
            .enumerate()
            .filter(|(_, f)| **f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified random partition into `folds` folds.
///
/// Within each label the curves are shuffled and dealt round-robin; the
/// dealing cursor continues across labels so total fold sizes stay balanced
/// to within one even when group sizes are not multiples of the fold count.
pub fn make_cv_plan(s: &LabeledSample, folds: usize, seed: u64) -> Result<CvPlan> {
    if folds < 2 {
        return Err(Error::InvalidSpec(format!(
            "cross validation needs at least 2 folds, got {folds}"
        )));
    }
    for g in 0..2u8 {
        if s.group_size(g) < folds {
            return Err(Error::InsufficientSample(format!(
                "group {g} has {} curves for {folds} folds",
                s.group_size(g)
            )));
        }
    }
    let mut fold_assignment = vec![0usize; s.len()];
    let mut cursor = 0usize;
    for g in 0..2u8 {
        let mut indices = s.group_indices(g);
        let mut rng = substream(seed, "cv-shuffle", u64::from(g));
        indices.shuffle(&mut rng);
        for i in indices {
            fold_assignment[i] = cursor % folds;
            cursor += 1;
        }
    }
    Ok(CvPlan {
        folds,
        fold_assignment,
        seed,
    })
}

/// Which stage of tie-breaking decided the percentile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieLevel {
    Primary,
    Secondary,
    Random,
}

/// The outcome of the percentile search.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileChoice {
    pub percentile: f64,
    /// Minimum misclassification rate attained over the folds.
    pub cv_error: f64,
    /// Whether at least two candidates produced distinct error counts.
    pub required_cv: bool,
    pub tie_level: TieLevel,
}

/// The paper-style default candidate percentiles.
pub const DEFAULT_PERCENTILE_GRID: [f64; 7] = [15.0, 25.0, 33.0, 50.0, 66.0, 75.0, 85.0];

/// Secondary tie-break score of one candidate percentile on one fold pair.
///
/// DTM: total distance of the cv-test curves to the trimmed mean of their
/// own group (minimize). WAD: total depth-weighted average distance to the
/// own group (minimize). WMD: total KFSD of the cv-test curves within their
/// own group (maximize).
pub fn tiebreak_score(
    method: &ClassifierSpec,
    cv_train: &LabeledSample,
    cv_test: &LabeledSample,
    percentile: f64,
) -> Result<f64> {
    let spec = method.with_percentile(percentile);
    let depth = spec
        .depth
        .as_ref()
        .ok_or_else(|| Error::InvalidSpec("tie-break needs a depth-based method".into()))?;
    let mut total = 0.0;
    match spec.method {
        Procedure::Dtm => {
            let alpha = spec.alpha.expect("DTM carries alpha");
            let centers = [
                trimmed_mean(cv_train, 0, depth, alpha)?,
                trimmed_mean(cv_train, 1, depth, alpha)?,
            ];
            for (x, &g) in cv_test.sample().curves().iter().zip(cv_test.labels()) {
                total += l2_distance(x, &centers[g as usize], cv_train.grid())?;
            }
        }
        Procedure::Wad => {
            for (x, &g) in cv_test.sample().curves().iter().zip(cv_test.labels()) {
                total += wad_group_score(cv_train, g, x, depth)?;
            }
        }
        Procedure::Wmd => {
            for g in 0..2u8 {
                let idx: Vec<usize> = cv_test
                    .labels()
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| **l == g)
                    .map(|(i, _)| i)
                    .collect();
                if idx.is_empty() {
                    continue;
                }
                let curves = idx
                    .iter()
                    .map(|&i| cv_test.sample().curves()[i].clone())
                    .collect();
                let queries = FunctionalSample::new(cv_test.grid().clone(), curves)?;
                let depths = depth_vector(cv_train, g, &queries, depth)?;
                total += depths.values.iter().sum::<f64>();
            }
        }
        Procedure::Knn => {
            return Err(Error::InvalidSpec("k-NN has no percentile to select".into()))
        }
    }
    Ok(total)
}

/// Search the candidate percentiles by total cross-validated
/// misclassification count; break ties with [`tiebreak_score`], then at
/// random from the plan seed.
pub fn cv_select_percentile(
    s: &LabeledSample,
    method: &ClassifierSpec,
    grid: &[f64],
    plan: &CvPlan,
) -> Result<PercentileChoice> {
    method.validate()?;
    match &method.depth {
        Some(d) if d.kind == DepthKind::Kfsd => {}
        _ => {
            return Err(Error::InvalidSpec(
                "percentile selection applies to KFSD-based methods".into(),
            ))
        }
    }
    if grid.is_empty() {
        return Err(Error::InvalidSpec("empty percentile grid".into()));
    }
    if plan.assignment().len() != s.len() {
        return Err(Error::InvalidSpec(format!(
            "plan for {} curves applied to {}",
            plan.assignment().len(),
            s.len()
        )));
    }

    // assemble the fold splits once
    let mut splits = Vec::with_capacity(plan.folds());
    let mut total_tests = 0usize;
    for f in 0..plan.folds() {
        let test_idx = plan.fold_indices(f);
        let train_idx = plan.complement_indices(f);
        total_tests += test_idx.len();
        splits.push((s.subset(&train_idx)?, s.subset(&test_idx)?));
    }

    let mut counts = Vec::with_capacity(grid.len());
    for &pct in grid {
        let spec = method.with_percentile(pct);
        let mut wrong = 0usize;
        for (cv_train, cv_test) in &splits {
            let preds = classify_batch(cv_train, cv_test.sample(), &spec)?;
            for (p, &actual) in preds.iter().zip(cv_test.labels()) {
                if p.label != actual {
                    wrong += 1;
                }
            }
        }
        counts.push(wrong);
    }

    let mut distinct = counts.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let required_cv = distinct.len() >= 2;

    let min_count = *counts.iter().min().expect("nonempty grid");
    let tied: Vec<usize> = (0..grid.len()).filter(|&i| counts[i] == min_count).collect();

    let (choice_idx, tie_level) = if tied.len() == 1 {
        (tied[0], TieLevel::Primary)
    } else {
        // secondary criterion, accumulated over the folds
        let mut scores = Vec::with_capacity(tied.len());
        for &i in &tied {
            let mut sc = 0.0;
            for (cv_train, cv_test) in &splits {
                sc += tiebreak_score(method, cv_train, cv_test, grid[i])?;
            }
            scores.push(sc);
        }
        let best = match method.method {
            Procedure::Wmd => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            _ => scores.iter().copied().fold(f64::INFINITY, f64::min),
        };
        let winners: Vec<usize> = tied
            .iter()
            .zip(&scores)
            .filter(|(_, sc)| **sc == best)
            .map(|(&i, _)| i)
            .collect();
        if winners.len() == 1 {
            (winners[0], TieLevel::Secondary)
        } else {
            let mut rng = substream(plan.seed(), "cv-random-tie", 0);
            (winners[rng.gen_range(0..winners.len())], TieLevel::Random)
        }
    };

    Ok(PercentileChoice {
        percentile: grid[choice_idx],
        cv_error: min_count as f64 / total_tests as f64,
        required_cv,
        tie_level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depths::kfsd;
    use crate::geometry::{bandwidth_from_percentile, pairwise_distances};
    use crate::sample::{Curve, DepthSpec, Grid};
    use rand::Rng;

    fn labeled(values0: &[f64], values1: &[f64], m: usize) -> LabeledSample {
        let g = Grid::equidistant(0.0, 1.0, m).unwrap();
        let mut curves = Vec::new();
        let mut labels = Vec::new();
        for &v in values0 {
            curves.push(Curve::constant(v, m).unwrap());
            labels.push(0);
        }
        for &v in values1 {
            curves.push(Curve::constant(v, m).unwrap());
            labels.push(1);
        }
        LabeledSample::new(FunctionalSample::new(g, curves).unwrap(), labels).unwrap()
    }

    fn random_labeled(n0: usize, n1: usize, m: usize, seed: u64) -> LabeledSample {
        let mut rng = substream(seed, "ms-test", 0);
        let g = Grid::equidistant(0.0, 1.0, m).unwrap();
        let mut curves = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n0 {
            curves.push(Curve::new((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap());
            labels.push(0);
        }
        for _ in 0..n1 {
            curves.push(
                Curve::new((0..m).map(|_| rng.gen_range(-1.0..1.0) + 4.0).collect()).unwrap(),
            );
            labels.push(1);
        }
        LabeledSample::new(FunctionalSample::new(g, curves).unwrap(), labels).unwrap()
    }

    #[test]
    fn balanced_folds_for_balanced_groups() {
        let s = random_labeled(25, 25, 5, 1);
        let plan = make_cv_plan(&s, 5, 9).unwrap();
        for f in 0..5 {
            let idx = plan.fold_indices(f);
            assert_eq!(idx.len(), 10);
            let zeros = idx.iter().filter(|&&i| s.labels()[i] == 0).count();
            assert_eq!(zeros, 5, "fold {f} has {zeros} group-0 curves");
        }
    }

    #[test]
    fn stratified_folds_for_unbalanced_groups() {
        let s = random_labeled(40, 30, 5, 2);
        let plan = make_cv_plan(&s, 5, 9).unwrap();
        for f in 0..5 {
            let idx = plan.fold_indices(f);
            let zeros = idx.iter().filter(|&&i| s.labels()[i] == 0).count();
            let ones = idx.len() - zeros;
            assert_eq!(zeros, 8, "fold {f}");
            assert_eq!(ones, 6, "fold {f}");
        }
    }

    #[test]
    fn plan_is_deterministic_and_seed_sensitive() {
        let s = random_labeled(12, 13, 5, 3);
        let a = make_cv_plan(&s, 5, 4).unwrap();
        let b = make_cv_plan(&s, 5, 4).unwrap();
        let c = make_cv_plan(&s, 5, 5).unwrap();
        assert_eq!(a.assignment(), b.assignment());
        assert_ne!(a.assignment(), c.assignment());

        // every fold sees both labels and sizes are balanced within one
        let sizes: Vec<usize> = (0..5).map(|f| a.fold_indices(f).len()).collect();
        let min = *sizes.iter().min().unwrap();
        let max = *sizes.iter().max().unwrap();
        assert!(max - min <= 1, "fold sizes {sizes:?}");
        for f in 0..5 {
            let idx = a.fold_indices(f);
            assert!(idx.iter().any(|&i| s.labels()[i] == 0));
            assert!(idx.iter().any(|&i| s.labels()[i] == 1));
        }
    }

    #[test]
    fn too_small_groups_are_rejected() {
        let s = random_labeled(4, 9, 5, 4);
        assert!(matches!(
            make_cv_plan(&s, 5, 0),
            Err(Error::InsufficientSample(_))
        ));
    }

    #[test]
    fn single_percentile_grid_is_trivially_unique() {
        let s = random_labeled(10, 10, 9, 5);
        let plan = make_cv_plan(&s, 5, 6).unwrap();
        let method = ClassifierSpec::wmd(DepthSpec::kfsd(50.0), 0);
        let choice = cv_select_percentile(&s, &method, &[50.0], &plan).unwrap();
        assert_eq!(choice.percentile, 50.0);
        assert!(!choice.required_cv);
        assert_eq!(choice.tie_level, TieLevel::Primary);
    }

    #[test]
    fn all_tie_case_passes_to_secondary() {
        // well separated groups of distinct constants: zero error everywhere
        let s = labeled(
            &[0.0, 0.1, 0.2, 0.3, 0.45, 0.5, 0.6, 0.7, 0.8, 0.9],
            &[20.0, 20.1, 20.2, 20.3, 20.45, 20.5, 20.6, 20.7, 20.8, 20.9],
            7,
        );
        let plan = make_cv_plan(&s, 5, 8).unwrap();
        let method = ClassifierSpec::wmd(DepthSpec::kfsd(50.0), 0);
        let choice =
            cv_select_percentile(&s, &method, &DEFAULT_PERCENTILE_GRID, &plan).unwrap();
        assert_eq!(choice.cv_error, 0.0);
        assert!(!choice.required_cv);
        assert_ne!(choice.tie_level, TieLevel::Primary);
        assert!(DEFAULT_PERCENTILE_GRID.contains(&choice.percentile));
    }

    #[test]
    fn selection_is_deterministic_and_attains_the_minimum() {
        let s = random_labeled(15, 15, 11, 7);
        let plan = make_cv_plan(&s, 5, 11).unwrap();
        let method = ClassifierSpec::wmd(DepthSpec::kfsd(50.0), 0);
        let a = cv_select_percentile(&s, &method, &DEFAULT_PERCENTILE_GRID, &plan).unwrap();
        let b = cv_select_percentile(&s, &method, &DEFAULT_PERCENTILE_GRID, &plan).unwrap();
        assert_eq!(a, b);

        // recompute the chosen percentile's error and check no candidate beats it
        let mut best = usize::MAX;
        let mut chosen = usize::MAX;
        for &pct in DEFAULT_PERCENTILE_GRID.iter() {
            let spec = method.with_percentile(pct);
            let mut wrong = 0usize;
            for f in 0..plan.folds() {
                let tr = s.subset(&plan.complement_indices(f)).unwrap();
                let te = s.subset(&plan.fold_indices(f)).unwrap();
                for (p, &l) in classify_batch(&tr, te.sample(), &spec)
                    .unwrap()
                    .iter()
                    .zip(te.labels())
                {
                    if p.label != l {
                        wrong += 1;
                    }
                }
            }
            best = best.min(wrong);
            if pct == a.percentile {
                chosen = wrong;
            }
        }
        assert_eq!(chosen, best);
        assert!((a.cv_error - best as f64 / 30.0).abs() <= 1e-12);
    }

    #[test]
    fn dtm_tiebreak_contributes_zero_at_the_trimmed_mean() {
        // symmetric group around 0.5: its 0-trim mean is the constant 0.5
        let train = labeled(&[0.0, 0.2, 0.8, 1.0, 0.4, 0.6], &[5.0, 5.2, 5.4, 5.6, 5.8, 6.0], 7);
        let test = labeled(&[0.5], &[5.5], 7);
        let method = ClassifierSpec::dtm(DepthSpec::kfsd(50.0), 0.0, 0);
        let score = tiebreak_score(&method, &train, &test, 50.0).unwrap();
        // group-1 test curve also sits at its own group mean
        assert!(score.abs() <= 1e-9, "score {score}");
    }

    #[test]
    fn wmd_tiebreak_matches_direct_depth_sums() {
        let train = random_labeled(6, 6, 9, 8);
        let test = random_labeled(2, 2, 9, 9);
        let method = ClassifierSpec::wmd(DepthSpec::kfsd(33.0), 0);
        let got = tiebreak_score(&method, &train, &test, 33.0).unwrap();

        let mut want = 0.0;
        for g in 0..2u8 {
            let group = train.group_sample(g).unwrap();
            let sigma =
                bandwidth_from_percentile(&pairwise_distances(&group), 33.0).unwrap();
            for (x, &l) in test.sample().curves().iter().zip(test.labels()) {
                if l == g {
                    want += kfsd(&group, x, sigma).unwrap();
                }
            }
        }
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }

    #[test]
    fn knn_has_no_percentile_selection() {
        let s = random_labeled(10, 10, 5, 10);
        let plan = make_cv_plan(&s, 5, 0).unwrap();
        let method = ClassifierSpec::knn(5, 0);
        assert!(cv_select_percentile(&s, &method, &DEFAULT_PERCENTILE_GRID, &plan).is_err());
    }
}
