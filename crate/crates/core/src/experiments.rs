//! Replication runner: simulated or real-data misclassification studies
//! with deterministic seeding, summary statistics and table emission.

use crate::classify::{classify_batch, ClassifierSpec};
use crate::datasets::{load_curves_csv, natural_cubic_regrid_labeled, split_t1, split_t2, SplitScheme};
use crate::depths::depth_vector;
use crate::error::{Error, Result};
use crate::modelselect::{cv_select_percentile, make_cv_plan, PercentileChoice, TieLevel};
use crate::rng::derive_seed;
use crate::sample::{DepthKind, DepthSpec, LabeledSample};
use crate::simulate::{generate_cgp, CgpModel, CgpSpec};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

/// One classification method: a procedure, optionally paired with a depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId {
    pub procedure: ProcedureId,
    pub depth: Option<DepthKind>,
}

/// Procedure tag that orders the way the tables are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcedureId {
    Dtm,
    Wad,
    Wmd,
    Knn,
}

impl ProcedureId {
    pub fn name(&self) -> &'static str {
        match self {
            ProcedureId::Dtm => "DTM",
            ProcedureId::Wad => "WAD",
            ProcedureId::Wmd => "WMD",
            ProcedureId::Knn => "kNN",
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.depth {
            Some(d) => write!(f, "{}+{}", self.procedure.name(), d.name()),
            None => f.write_str(self.procedure.name()),
        }
    }
}

/// Where the curves come from.
#[derive(Debug, Clone)]
pub enum Source {
    Cgp {
        model: CgpModel,
        contaminated: bool,
        q: f64,
        n0: usize,
        n1: usize,
        grid_points: usize,
        train_per_group: [usize; 2],
    },
    Dataset {
        path: PathBuf,
        scheme_kind: SchemeKind,
        train_per_group: [usize; 2],
        /// Re-grid to this many equidistant points via natural cubic
        /// splines; `None` keeps the raw grid.
        regrid_points: Option<usize>,
        /// Keep only the first k domain points before re-gridding.
        truncate_to: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    T1,
    T2,
}

/// Hyperparameters shared by all methods in a study.
#[derive(Debug, Clone)]
pub struct DepthParams {
    pub hmd_percentile: f64,
    pub projections: usize,
    pub trim_alpha: f64,
    pub knn_k: usize,
}

impl Default for DepthParams {
    fn default() -> Self {
        Self {
            hmd_percentile: 15.0,
            projections: 50,
            trim_alpha: 0.2,
            knn_k: 5,
        }
    }
}

/// Output table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Markdown,
}

/// Full description of a study.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: Source,
    pub methods: Vec<MethodId>,
    pub replications: usize,
    pub cv_folds: usize,
    pub percentile_grid: Vec<f64>,
    pub master_seed: u64,
    pub depth_params: DepthParams,
    pub format: TableFormat,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidSpec("no methods configured".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidSpec("replications must be >= 1".into()));
        }
        if self.percentile_grid.is_empty() {
            return Err(Error::InvalidSpec("empty percentile grid".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidSpec("cross validation needs >= 2 folds".into()));
        }
        match &self.source {
            Source::Cgp {
                n0,
                n1,
                train_per_group,
                ..
            } => {
                if train_per_group[0] == 0 || train_per_group[0] >= *n0 {
                    return Err(Error::InvalidSpec(format!(
                        "group-0 training size {} of {n0}",
                        train_per_group[0]
                    )));
                }
                if train_per_group[1] == 0 || train_per_group[1] >= *n1 {
                    return Err(Error::InvalidSpec(format!(
                        "group-1 training size {} of {n1}",
                        train_per_group[1]
                    )));
                }
            }
            Source::Dataset { .. } => {}
        }
        Ok(())
    }
}

/// Result of one replication.
#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub errors: Vec<(MethodId, f64)>,
    pub choices: Vec<(MethodId, PercentileChoice)>,
    pub tie_counts: Vec<(MethodId, usize)>,
    pub depth_seconds: Vec<(DepthKind, f64)>,
    pub test_size: usize,
}

/// Cross-validation bookkeeping for a KFSD-based method.
#[derive(Debug, Clone, Default)]
pub struct CvSummary {
    /// Fraction of replications where at least two candidate percentiles
    /// produced distinct error counts.
    pub required_fraction: f64,
    /// Chosen percentile per replication.
    pub chosen_percentiles: Vec<f64>,
    pub random_tie_count: usize,
}

/// Per-method aggregate over replications.
#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub id: MethodId,
    /// Misclassification percentage per replication.
    pub errors_pct: Vec<f64>,
    pub mean_pct: f64,
    pub sd_pct: f64,
    pub tie_count: usize,
    pub cv: Option<CvSummary>,
}

/// Aggregate of a whole study.
#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub methods: Vec<MethodSummary>,
    pub replications: usize,
    /// Mean seconds per replication spent computing within-group training
    /// depths, per depth (machine-dependent; qualitative).
    pub depth_seconds: Vec<(DepthKind, f64)>,
}

impl ExperimentSummary {
    pub fn method(&self, id: MethodId) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.id == id)
    }
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Load and prepare the dataset behind a [`Source::Dataset`].
pub fn load_dataset_source(source: &Source) -> Result<LabeledSample> {
    match source {
        Source::Dataset {
            path,
            regrid_points,
            truncate_to,
            ..
        } => {
            let mut table = load_curves_csv(path)?;
            if let Some(k) = truncate_to {
                table = table.truncate_domain(*k)?;
            }
            match regrid_points {
                Some(m) => natural_cubic_regrid_labeled(&table, *m),
                None => table.to_labeled_sample(),
            }
        }
        Source::Cgp { .. } => Err(Error::InvalidSpec("not a dataset source".into())),
    }
}

/// Training/test pair for replication `r`.
fn split_for_replication(
    cfg: &ExperimentConfig,
    dataset: Option<&LabeledSample>,
    r: usize,
) -> Result<(LabeledSample, LabeledSample)> {
    match &cfg.source {
        Source::Cgp {
            model,
            contaminated,
            q,
            n0,
            n1,
            grid_points,
            train_per_group,
        } => {
            let mut spec = CgpSpec::new(*model, *n0, *n1, derive_seed(cfg.master_seed, "cgp", r as u64))
                .with_grid_points(*grid_points);
            if *contaminated {
                spec = spec.contaminated(*q);
            }
            let sample = generate_cgp(&spec)?;
            // the curves are exchangeable within each group, so the first
            // train_per_group of each group form the training sample
            let mut train_idx = Vec::new();
            let mut test_idx = Vec::new();
            for g in 0..2u8 {
                let idx = sample.group_indices(g);
                let k = train_per_group[g as usize];
                train_idx.extend_from_slice(&idx[..k]);
                test_idx.extend_from_slice(&idx[k..]);
            }
            Ok((sample.subset(&train_idx)?, sample.subset(&test_idx)?))
        }
        Source::Dataset {
            scheme_kind,
            train_per_group,
            ..
        } => {
            let data = dataset.expect("dataset loaded before replications");
            match scheme_kind {
                SchemeKind::T1 => {
                    let scheme = SplitScheme::T1 {
                        train_per_group: *train_per_group,
                        replications: cfg.replications,
                        seed: derive_seed(cfg.master_seed, "t1", 0),
                    };
                    split_t1(data, &scheme, r)
                }
                SchemeKind::T2 => split_t2(data, r),
            }
        }
    }
}

/// Resolve the classifier spec of a method for replication `r`; KFSD-based
/// methods run the cross-validated percentile search on the training
/// sample.
fn resolve_method(
    cfg: &ExperimentConfig,
    id: MethodId,
    train: &LabeledSample,
    r: usize,
) -> Result<(ClassifierSpec, Option<PercentileChoice>)> {
    let p = &cfg.depth_params;
    let tie_seed = derive_seed(cfg.master_seed, "tie", r as u64);
    let proj_seed = derive_seed(cfg.master_seed, "projections", r as u64);

    let depth_spec = |kind: DepthKind, pct: f64| -> DepthSpec {
        match kind {
            DepthKind::Fmd => DepthSpec::fmd(),
            DepthKind::Hmd => DepthSpec::hmd(p.hmd_percentile),
            DepthKind::Rtd => DepthSpec::rtd(p.projections, proj_seed),
            DepthKind::Idd => DepthSpec::idd(p.projections, proj_seed),
            DepthKind::Mbd => DepthSpec::mbd(),
            DepthKind::Fsd => DepthSpec::fsd(),
            DepthKind::Kfsd => DepthSpec::kfsd(pct),
        }
    };

    let build = |depth: DepthSpec| -> Result<ClassifierSpec> {
        Ok(match id.procedure {
            ProcedureId::Dtm => ClassifierSpec::dtm(depth, p.trim_alpha, tie_seed),
            ProcedureId::Wad => ClassifierSpec::wad(depth, tie_seed),
            ProcedureId::Wmd => ClassifierSpec::wmd(depth, tie_seed),
            ProcedureId::Knn => {
                return Err(Error::InvalidSpec("k-NN takes no depth".into()));
            }
        })
    };

    match (id.procedure, id.depth) {
        (ProcedureId::Knn, _) => Ok((ClassifierSpec::knn(p.knn_k, tie_seed), None)),
        (_, Some(DepthKind::Kfsd)) => {
            let probe = build(depth_spec(DepthKind::Kfsd, cfg.percentile_grid[0]))?;
            let plan = make_cv_plan(train, cfg.cv_folds, derive_seed(cfg.master_seed, "cv", r as u64))?;
            let choice = cv_select_percentile(train, &probe, &cfg.percentile_grid, &plan)?;
            let spec = probe.with_percentile(choice.percentile);
            Ok((spec, Some(choice)))
        }
        (_, Some(kind)) => Ok((build(depth_spec(kind, 0.0))?, None)),
        (_, None) => Err(Error::InvalidSpec(format!(
            "{} requires a depth",
            id.procedure.name()
        ))),
    }
}

/// Run one replication: build the split, resolve every method (including
/// per-method percentile selection) and classify the test curves.
pub fn run_replication(
    cfg: &ExperimentConfig,
    dataset: Option<&LabeledSample>,
    r: usize,
) -> Result<ReplicationOutcome> {
    let (train, test) = split_for_replication(cfg, dataset, r)?;

    let mut errors = Vec::with_capacity(cfg.methods.len());
    let mut choices = Vec::new();
    let mut tie_counts = Vec::new();

    for &id in &cfg.methods {
        let (spec, choice) = resolve_method(cfg, id, &train, r)?;
        let preds = classify_batch(&train, test.sample(), &spec)?;
        let wrong = preds
            .iter()
            .zip(test.labels())
            .filter(|(p, &l)| p.label != l)
            .count();
        let ties = preds.iter().filter(|p| p.tie_broken).count();
        errors.push((id, wrong as f64 / test.len() as f64));
        tie_counts.push((id, ties));
        if let Some(c) = choice {
            choices.push((id, c));
        }
    }

    // qualitative timing of the within-group training depths, per depth kind
    let mut depth_seconds = Vec::new();
    let mut kinds: Vec<DepthKind> = cfg.methods.iter().filter_map(|m| m.depth).collect();
    kinds.sort_by_key(|k| k.name());
    kinds.dedup();
    let p = &cfg.depth_params;
    for kind in kinds {
        let spec = match kind {
            DepthKind::Fmd => DepthSpec::fmd(),
            DepthKind::Hmd => DepthSpec::hmd(p.hmd_percentile),
            DepthKind::Rtd => DepthSpec::rtd(p.projections, 0),
            DepthKind::Idd => DepthSpec::idd(p.projections, 0),
            DepthKind::Mbd => DepthSpec::mbd(),
            DepthKind::Fsd => DepthSpec::fsd(),
            DepthKind::Kfsd => DepthSpec::kfsd(50.0),
        };
        let start = Instant::now();
        for g in 0..2u8 {
            let group = train.group_sample(g)?;
            depth_vector(&train, g, &group, &spec)?;
        }
        depth_seconds.push((kind, start.elapsed().as_secs_f64()));
    }

    Ok(ReplicationOutcome {
        errors,
        choices,
        tie_counts,
        depth_seconds,
        test_size: test.len(),
    })
}

/// Aggregate per-replication outcomes into the study summary.
pub fn summarize(methods: &[MethodId], outcomes: &[ReplicationOutcome]) -> ExperimentSummary {
    let reps = outcomes.len();
    let mut summaries = Vec::with_capacity(methods.len());
    for &id in methods {
        let mut errors_pct = Vec::with_capacity(reps);
        let mut tie_count = 0usize;
        let mut chosen = Vec::new();
        let mut required = 0usize;
        let mut random_ties = 0usize;
        let mut has_cv = false;
        for o in outcomes {
            if let Some((_, e)) = o.errors.iter().find(|(m, _)| *m == id) {
                errors_pct.push(100.0 * e);
            }
            if let Some((_, t)) = o.tie_counts.iter().find(|(m, _)| *m == id) {
                tie_count += t;
            }
            if let Some((_, c)) = o.choices.iter().find(|(m, _)| *m == id) {
                has_cv = true;
                chosen.push(c.percentile);
                if c.required_cv {
                    required += 1;
                }
                if c.tie_level == TieLevel::Random {
                    random_ties += 1;
                }
            }
        }
        let (mean_pct, sd_pct) = mean_and_sd(&errors_pct);
        summaries.push(MethodSummary {
            id,
            errors_pct,
            mean_pct,
            sd_pct,
            tie_count,
            cv: if has_cv {
                Some(CvSummary {
                    required_fraction: required as f64 / reps as f64,
                    chosen_percentiles: chosen,
                    random_tie_count: random_ties,
                })
            } else {
                None
            },
        });
    }

    // mean per-replication depth timings
    let mut timing: BTreeMap<&'static str, (DepthKind, f64, usize)> = BTreeMap::new();
    for o in outcomes {
        for (kind, secs) in &o.depth_seconds {
            let e = timing.entry(kind.name()).or_insert((*kind, 0.0, 0));
            e.1 += secs;
            e.2 += 1;
        }
    }
    let depth_seconds = timing
        .into_values()
        .map(|(k, total, n)| (k, total / n.max(1) as f64))
        .collect();

    ExperimentSummary {
        methods: summaries,
        replications: reps,
        depth_seconds,
    }
}

/// Run the full study described by the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let dataset = match &cfg.source {
        Source::Dataset { .. } => Some(load_dataset_source(&cfg.source)?),
        Source::Cgp { .. } => None,
    };
    // leave-one-out visits every curve exactly once
    let replications = match &cfg.source {
        Source::Dataset {
            scheme_kind: SchemeKind::T2,
            ..
        } => dataset.as_ref().map(|d| d.len()).unwrap_or(0),
        _ => cfg.replications,
    };
    let mut outcomes = Vec::with_capacity(replications);
    for r in 0..replications {
        outcomes.push(run_replication(cfg, dataset.as_ref(), r)?);
    }
    Ok(summarize(&cfg.methods, &outcomes))
}

fn table_layout(summary: &ExperimentSummary) -> (Vec<ProcedureId>, Vec<DepthKind>) {
    let mut procedures: Vec<ProcedureId> = summary
        .methods
        .iter()
        .map(|m| m.id.procedure)
        .collect();
    procedures.sort();
    procedures.dedup();
    let mut depths: Vec<DepthKind> = DepthKind::ALL
        .iter()
        .filter(|d| summary.methods.iter().any(|m| m.id.depth == Some(**d)))
        .copied()
        .collect();
    if depths.is_empty() {
        depths = vec![DepthKind::Fsd];
    }
    (procedures, depths)
}

/// Render the summary as a table: one row per procedure, one column per
/// depth, mean misclassification percentages to two decimals with the
/// standard deviation alongside. The k-NN row carries its single value in
/// the first column.
pub fn emit_table(summary: &ExperimentSummary, format: TableFormat) -> String {
    let (procedures, depths) = table_layout(summary);
    let cell = |p: ProcedureId, d: DepthKind| -> Option<&MethodSummary> {
        let id = if p == ProcedureId::Knn {
            MethodId {
                procedure: p,
                depth: None,
            }
        } else {
            MethodId {
                procedure: p,
                depth: Some(d),
            }
        };
        summary.method(id)
    };

    match format {
        TableFormat::Csv => {
            let mut out = String::from("method");
            for d in &depths {
                out.push(',');
                out.push_str(d.name());
            }
            out.push('\n');
            for p in &procedures {
                let mut mean_row = p.name().to_string();
                let mut sd_row = format!("{}_sd", p.name());
                for (col, d) in depths.iter().enumerate() {
                    mean_row.push(',');
                    sd_row.push(',');
                    let include = *p != ProcedureId::Knn || col == 0;
                    if include {
                        if let Some(m) = cell(*p, *d) {
                            mean_row.push_str(&format!("{:.2}", m.mean_pct));
                            sd_row.push_str(&format!("{:.2}", m.sd_pct));
                        }
                    }
                }
                out.push_str(&mean_row);
                out.push('\n');
                out.push_str(&sd_row);
                out.push('\n');
            }
            out
        }
        TableFormat::Markdown => {
            let mut out = String::from("| Method |");
            for d in &depths {
                out.push_str(&format!(" {} |", d.name()));
            }
            out.push('\n');
            out.push_str("|---|");
            for _ in &depths {
                out.push_str("---|");
            }
            out.push('\n');
            for p in &procedures {
                out.push_str(&format!("| {} |", p.name()));
                for (col, d) in depths.iter().enumerate() {
                    let include = *p != ProcedureId::Knn || col == 0;
                    match cell(*p, *d) {
                        Some(m) if include => out.push_str(&format!(
                            " {:.2} ({:.2}) |",
                            m.mean_pct, m.sd_pct
                        )),
                        _ => out.push_str("  |"),
                    }
                }
                out.push('\n');
            }
            out
        }
    }
}

/// Render the cross-validation bookkeeping of the KFSD-based methods:
/// fraction of replications that required the CV step and the multiset of
/// chosen percentiles.
pub fn emit_cv_table(summary: &ExperimentSummary, format: TableFormat) -> String {
    let rows: Vec<&MethodSummary> =
        summary.methods.iter().filter(|m| m.cv.is_some()).collect();
    let mut out = String::new();
    if rows.is_empty() {
        return out;
    }
    let percentile_counts = |m: &MethodSummary| -> String {
        let cv = m.cv.as_ref().expect("filtered");
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for p in &cv.chosen_percentiles {
            *counts.entry(format!("{p}")).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(p, c)| format!("{p}th x{c}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    match format {
        TableFormat::Csv => {
            out.push_str("method,cv_required_pct,chosen_percentiles\n");
            for m in rows {
                let cv = m.cv.as_ref().expect("filtered");
                out.push_str(&format!(
                    "{},{:.2},{}\n",
                    m.id,
                    100.0 * cv.required_fraction,
                    percentile_counts(m)
                ));
            }
        }
        TableFormat::Markdown => {
            out.push_str("| Method | CV required (%) | Chosen percentiles |\n|---|---|---|\n");
            for m in rows {
                let cv = m.cv.as_ref().expect("filtered");
                out.push_str(&format!(
                    "| {} | {:.2} | {} |\n",
                    m.id,
                    100.0 * cv.required_fraction,
                    percentile_counts(m)
                ));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// config file parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: RawExperiment,
    source: RawSource,
    methods: RawMethods,
    #[serde(default)]
    cv: RawCv,
    #[serde(default)]
    depth_params: RawDepthParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    replications: usize,
    master_seed: u64,
    #[serde(default = "default_format")]
    format: TableFormat,
}

fn default_format() -> TableFormat {
    TableFormat::Markdown
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    kind: String,
    // cgp fields
    model: Option<CgpModel>,
    #[serde(default)]
    contaminated: bool,
    #[serde(default = "default_q")]
    q: f64,
    #[serde(default = "default_group_size")]
    n0: usize,
    #[serde(default = "default_group_size")]
    n1: usize,
    #[serde(default = "default_grid_points")]
    grid_points: usize,
    #[serde(default = "default_train")]
    train_per_group: [usize; 2],
    // dataset fields
    path: Option<PathBuf>,
    scheme: Option<SchemeKind>,
    regrid_points: Option<usize>,
    truncate_to: Option<usize>,
}

fn default_q() -> f64 {
    0.10
}
fn default_group_size() -> usize {
    50
}
fn default_grid_points() -> usize {
    51
}
fn default_train() -> [usize; 2] {
    [25, 25]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethods {
    procedures: Vec<String>,
    depths: Vec<String>,
    #[serde(default = "default_true")]
    knn: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawCv {
    folds: Option<usize>,
    percentiles: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDepthParams {
    hmd_percentile: Option<f64>,
    projections: Option<usize>,
    trim_alpha: Option<f64>,
    knn_k: Option<usize>,
}

fn parse_procedure(name: &str) -> Result<ProcedureId> {
    match name.to_ascii_lowercase().as_str() {
        "dtm" => Ok(ProcedureId::Dtm),
        "wad" => Ok(ProcedureId::Wad),
        "wmd" => Ok(ProcedureId::Wmd),
        other => Err(Error::InvalidSpec(format!("unknown procedure '{other}'"))),
    }
}

pub fn parse_depth_kind(name: &str) -> Result<DepthKind> {
    match name.to_ascii_lowercase().as_str() {
        "fmd" => Ok(DepthKind::Fmd),
        "hmd" => Ok(DepthKind::Hmd),
        "rtd" => Ok(DepthKind::Rtd),
        "idd" => Ok(DepthKind::Idd),
        "mbd" => Ok(DepthKind::Mbd),
        "fsd" => Ok(DepthKind::Fsd),
        "kfsd" => Ok(DepthKind::Kfsd),
        other => Err(Error::InvalidSpec(format!("unknown depth '{other}'"))),
    }
}

/// Parse a study config from its TOML text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| Error::InvalidSpec(format!("config: {e}")))?;

    let source = match raw.source.kind.as_str() {
        "cgp" => {
            let model = raw
                .source
                .model
                .ok_or_else(|| Error::InvalidSpec("cgp source needs a model".into()))?;
            Source::Cgp {
                model,
                contaminated: raw.source.contaminated,
                q: raw.source.q,
                n0: raw.source.n0,
                n1: raw.source.n1,
                grid_points: raw.source.grid_points,
                train_per_group: raw.source.train_per_group,
            }
        }
        "dataset" => {
            let path = raw
                .source
                .path
                .ok_or_else(|| Error::InvalidSpec("dataset source needs a path".into()))?;
            let scheme_kind = raw
                .source
                .scheme
                .ok_or_else(|| Error::InvalidSpec("dataset source needs a scheme".into()))?;
            Source::Dataset {
                path,
                scheme_kind,
                train_per_group: raw.source.train_per_group,
                regrid_points: raw.source.regrid_points,
                truncate_to: raw.source.truncate_to,
            }
        }
        other => {
            return Err(Error::InvalidSpec(format!(
                "unknown source kind '{other}' (expected 'cgp' or 'dataset')"
            )))
        }
    };

    let mut methods = Vec::new();
    for p in &raw.methods.procedures {
        let procedure = parse_procedure(p)?;
        for d in &raw.methods.depths {
            methods.push(MethodId {
                procedure,
                depth: Some(parse_depth_kind(d)?),
            });
        }
    }
    if raw.methods.knn {
        methods.push(MethodId {
            procedure: ProcedureId::Knn,
            depth: None,
        });
    }

    let defaults = DepthParams::default();
    let cfg = ExperimentConfig {
        source,
        methods,
        replications: raw.experiment.replications,
        cv_folds: raw.cv.folds.unwrap_or(5),
        percentile_grid: raw
            .cv
            .percentiles
            .unwrap_or_else(|| crate::modelselect::DEFAULT_PERCENTILE_GRID.to_vec()),
        master_seed: raw.experiment.master_seed,
        depth_params: DepthParams {
            hmd_percentile: raw.depth_params.hmd_percentile.unwrap_or(defaults.hmd_percentile),
            projections: raw.depth_params.projections.unwrap_or(defaults.projections),
            trim_alpha: raw.depth_params.trim_alpha.unwrap_or(defaults.trim_alpha),
            knn_k: raw.depth_params.knn_k.unwrap_or(defaults.knn_k),
        },
        format: raw.experiment.format,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// All 21 depth-based methods plus k-NN, in table order.
pub fn all_methods() -> Vec<MethodId> {
    let mut out = Vec::new();
    for p in [ProcedureId::Dtm, ProcedureId::Wad, ProcedureId::Wmd] {
        for d in DepthKind::ALL {
            out.push(MethodId {
                procedure: p,
                depth: Some(d),
            });
        }
    }
    out.push(MethodId {
        procedure: ProcedureId::Knn,
        depth: None,
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{Curve, FunctionalSample, Grid};

    fn cgp_config(methods: Vec<MethodId>, reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            source: Source::Cgp {
                model: CgpModel::Cgp1,
                contaminated: false,
                q: 0.10,
                n0: 10,
                n1: 10,
                grid_points: 21,
                train_per_group: [5, 5],
            },
            methods,
            replications: reps,
            cv_folds: 5,
            percentile_grid: vec![15.0, 50.0, 85.0],
            master_seed: 99,
            depth_params: DepthParams {
                projections: 10,
                ..DepthParams::default()
            },
            format: TableFormat::Markdown,
        }
    }

    #[test]
    fn separable_groups_have_zero_error() {
        // two well separated constant groups; the test curves sit strictly
        // inside the pointwise range of their own training group, so no
        // depth degenerates at the hull boundary and every method is exact
        let grid = Grid::equidistant(0.0, 1.0, 7).unwrap();
        let heights = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2];
        let mut curves = Vec::new();
        let mut labels = Vec::new();
        for g in 0..2u8 {
            for h in heights {
                curves.push(Curve::constant(40.0 * g as f64 + h, 7).unwrap());
                labels.push(g);
            }
        }
        let train =
            LabeledSample::new(FunctionalSample::new(grid.clone(), curves).unwrap(), labels)
                .unwrap();

        let test_values = [0.3, 0.5, 0.9, 40.3, 40.5, 40.9];
        let test_labels = [0u8, 0, 0, 1, 1, 1];
        let queries = FunctionalSample::new(
            grid,
            test_values.iter().map(|v| Curve::constant(*v, 7).unwrap()).collect(),
        )
        .unwrap();

        let p = DepthParams {
            projections: 10,
            knn_k: 3,
            ..DepthParams::default()
        };
        for id in all_methods() {
            let depth = |kind: DepthKind| match kind {
                DepthKind::Fmd => DepthSpec::fmd(),
                DepthKind::Hmd => DepthSpec::hmd(p.hmd_percentile),
                DepthKind::Rtd => DepthSpec::rtd(p.projections, 3),
                DepthKind::Idd => DepthSpec::idd(p.projections, 3),
                DepthKind::Mbd => DepthSpec::mbd(),
                DepthKind::Fsd => DepthSpec::fsd(),
                DepthKind::Kfsd => DepthSpec::kfsd(50.0),
            };
            let spec = match (id.procedure, id.depth) {
                (ProcedureId::Knn, _) => ClassifierSpec::knn(p.knn_k, 5),
                (ProcedureId::Dtm, Some(k)) => ClassifierSpec::dtm(depth(k), p.trim_alpha, 5),
                (ProcedureId::Wad, Some(k)) => ClassifierSpec::wad(depth(k), 5),
                (ProcedureId::Wmd, Some(k)) => ClassifierSpec::wmd(depth(k), 5),
                _ => unreachable!(),
            };
            let preds = classify_batch(&train, &queries, &spec).unwrap();
            for (p, &want) in preds.iter().zip(&test_labels) {
                assert_eq!(p.label, want, "{id} misclassified");
                assert!(!p.tie_broken, "{id} needed a tie break");
            }
        }
    }

    #[test]
    fn leave_one_out_study_on_separable_data() {
        // full leave-one-out study over the hull-robust methods; curves at
        // the extreme of a group are duplicated so a left-out curve keeps a
        // twin in the training sample
        let grid = Grid::equidistant(0.0, 1.0, 7).unwrap();
        let heights = [0.0, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.2];
        let mut curves = Vec::new();
        let mut labels = Vec::new();
        for g in 0..2u8 {
            for h in heights {
                curves.push(Curve::constant(40.0 * g as f64 + h, 7).unwrap());
                labels.push(g);
            }
        }
        let data = LabeledSample::new(FunctionalSample::new(grid, curves).unwrap(), labels).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        std::fs::write(&path, crate::datasets::write_curves_csv(&data)).unwrap();

        let methods = vec![
            MethodId { procedure: ProcedureId::Dtm, depth: Some(DepthKind::Fsd) },
            MethodId { procedure: ProcedureId::Wad, depth: Some(DepthKind::Mbd) },
            MethodId { procedure: ProcedureId::Wmd, depth: Some(DepthKind::Hmd) },
            MethodId { procedure: ProcedureId::Wmd, depth: Some(DepthKind::Kfsd) },
            MethodId { procedure: ProcedureId::Knn, depth: None },
        ];
        let cfg = ExperimentConfig {
            source: Source::Dataset {
                path,
                scheme_kind: SchemeKind::T2,
                train_per_group: [0, 0],
                regrid_points: None,
                truncate_to: None,
            },
            methods,
            replications: 1, // overridden by leave-one-out
            cv_folds: 5,
            percentile_grid: vec![15.0, 50.0],
            master_seed: 7,
            depth_params: DepthParams {
                projections: 10,
                knn_k: 3,
                ..DepthParams::default()
            },
            format: TableFormat::Markdown,
        };
        let summary = run_experiment(&cfg).unwrap();
        assert_eq!(summary.replications, 18);
        for m in &summary.methods {
            assert_eq!(m.mean_pct, 0.0, "{} misclassified", m.id);
        }
    }

    #[test]
    fn knn_error_range_and_denominator() {
        let cfg = cgp_config(
            vec![MethodId {
                procedure: ProcedureId::Knn,
                depth: None,
            }],
            1,
        );
        let out = run_replication(&cfg, None, 0).unwrap();
        assert_eq!(out.test_size, 10);
        let (_, e) = out.errors[0];
        assert!((0.0..=1.0).contains(&e));
        assert_eq!((e * 10.0).fract(), 0.0, "error not a multiple of 1/test size");
    }

    #[test]
    fn replications_are_deterministic() {
        let methods = vec![
            MethodId {
                procedure: ProcedureId::Wmd,
                depth: Some(DepthKind::Kfsd),
            },
            MethodId {
                procedure: ProcedureId::Knn,
                depth: None,
            },
        ];
        let cfg = cgp_config(methods.clone(), 3);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        for (ma, mb) in a.methods.iter().zip(&b.methods) {
            assert_eq!(ma.errors_pct, mb.errors_pct);
        }
        assert_eq!(
            emit_table(&a, TableFormat::Csv),
            emit_table(&b, TableFormat::Csv)
        );
    }

    #[test]
    fn summary_moments_match_recomputation() {
        let rates = [
            ReplicationOutcome {
                errors: vec![(all_methods()[0], 0.10)],
                choices: vec![],
                tie_counts: vec![(all_methods()[0], 0)],
                depth_seconds: vec![],
                test_size: 10,
            },
            ReplicationOutcome {
                errors: vec![(all_methods()[0], 0.20)],
                choices: vec![],
                tie_counts: vec![(all_methods()[0], 1)],
                depth_seconds: vec![],
                test_size: 10,
            },
        ];
        let summary = summarize(&[all_methods()[0]], &rates);
        let m = &summary.methods[0];
        assert!((m.mean_pct - 15.0).abs() <= 1e-12);
        assert!((m.sd_pct - 50.0f64.sqrt()).abs() <= 1e-12);
        assert_eq!(m.tie_count, 1);

        // recomputable from the stored error vector
        let mean = m.errors_pct.iter().sum::<f64>() / m.errors_pct.len() as f64;
        assert!((mean - m.mean_pct).abs() <= 1e-12);
    }

    #[test]
    fn csv_table_round_trips_within_rounding() {
        let methods = vec![
            MethodId {
                procedure: ProcedureId::Wad,
                depth: Some(DepthKind::Fsd),
            },
            MethodId {
                procedure: ProcedureId::Wmd,
                depth: Some(DepthKind::Fsd),
            },
            MethodId {
                procedure: ProcedureId::Knn,
                depth: None,
            },
        ];
        let cfg = cgp_config(methods.clone(), 2);
        let summary = run_experiment(&cfg).unwrap();
        let csv = emit_table(&summary, TableFormat::Csv);

        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, "method,FSD");
        for line in lines {
            let mut cols = line.split(',');
            let name = cols.next().unwrap();
            let value: f64 = cols.next().unwrap().parse().unwrap();
            let (proc_name, is_sd) = match name.strip_suffix("_sd") {
                Some(p) => (p, true),
                None => (name, false),
            };
            let m = summary
                .methods
                .iter()
                .find(|m| m.id.procedure.name() == proc_name)
                .unwrap();
            let want = if is_sd { m.sd_pct } else { m.mean_pct };
            assert!((value - want).abs() <= 0.005 + 1e-12, "{name}: {value} vs {want}");
        }
    }

    #[test]
    fn single_method_emits_one_data_row() {
        let cfg = cgp_config(
            vec![MethodId {
                procedure: ProcedureId::Wmd,
                depth: Some(DepthKind::Fsd),
            }],
            1,
        );
        let summary = run_experiment(&cfg).unwrap();
        let md = emit_table(&summary, TableFormat::Markdown);
        let data_rows = md.lines().filter(|l| l.starts_with("| WMD")).count();
        assert_eq!(data_rows, 1);
    }

    #[test]
    fn config_parsing_round_trip() {
        let text = r#"
[experiment]
replications = 4
master_seed = 11
format = "csv"

[source]
kind = "cgp"
model = "cgp2"
contaminated = true
q = 0.2
n0 = 12
n1 = 12
grid_points = 21
train_per_group = [6, 6]

[methods]
procedures = ["wmd"]
depths = ["fsd", "kfsd"]
knn = true

[cv]
folds = 3
percentiles = [15.0, 50.0]

[depth_params]
projections = 10
knn_k = 3
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.replications, 4);
        assert_eq!(cfg.methods.len(), 3);
        assert_eq!(cfg.cv_folds, 3);
        assert_eq!(cfg.percentile_grid, vec![15.0, 50.0]);
        assert!(matches!(
            cfg.source,
            Source::Cgp {
                model: CgpModel::Cgp2,
                contaminated: true,
                ..
            }
        ));
        assert_eq!(cfg.format, TableFormat::Csv);

        assert!(parse_config("not toml at all [").is_err());
        let bad = text.replace("cgp2", "cgp9");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn empty_method_list_is_rejected() {
        let mut cfg = cgp_config(vec![], 1);
        assert!(cfg.validate().is_err());
        cfg.methods = all_methods();
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
    }
}
