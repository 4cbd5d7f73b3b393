//! `fdepth`: functional depths, depth-based classification and simulation
//! studies from the command line.

use clap::{Args, Parser, Subcommand, ValueEnum};
use fdepth_core::classify::{classify_batch, ClassifierSpec};
use fdepth_core::datasets::{load_curves_csv, write_curves_csv};
use fdepth_core::experiments::{
    emit_cv_table, emit_table, parse_config, run_experiment, TableFormat,
};
use fdepth_core::geometry::{bandwidth_from_percentile, pairwise_distances};
use fdepth_core::modelselect::{cv_select_percentile, make_cv_plan, TieLevel};
use fdepth_core::sample::{DepthKind, DepthSpec, LabeledSample};
use fdepth_core::simulate::{generate_cgp, CgpModel, CgpSpec};
use fdepth_core::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "fdepth", version, about = "Functional data depths and depth-based classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a functional depth for every curve of a dataset.
    Depth(DepthArgs),
    /// Classify query curves against a labeled training dataset.
    Classify(ClassifyArgs),
    /// Generate curves from one of the built-in models.
    Simulate(SimulateArgs),
    /// Cross-validate the KFSD bandwidth percentile on a training dataset.
    Cv(CvArgs),
    /// Run a replication study described by a config file.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DepthArg {
    Fmd,
    Hmd,
    Rtd,
    Idd,
    Mbd,
    Fsd,
    Kfsd,
}

impl DepthArg {
    fn kind(self) -> DepthKind {
        match self {
            DepthArg::Fmd => DepthKind::Fmd,
            DepthArg::Hmd => DepthKind::Hmd,
            DepthArg::Rtd => DepthKind::Rtd,
            DepthArg::Idd => DepthKind::Idd,
            DepthArg::Mbd => DepthKind::Mbd,
            DepthArg::Fsd => DepthKind::Fsd,
            DepthArg::Kfsd => DepthKind::Kfsd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Dtm,
    Wad,
    Wmd,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Markdown,
}

impl FormatArg {
    fn table(self) -> TableFormat {
        match self {
            FormatArg::Csv => TableFormat::Csv,
            FormatArg::Markdown => TableFormat::Markdown,
        }
    }
}

#[derive(Args)]
struct DepthArgs {
    /// Curve CSV file; depths are computed within the whole file.
    #[arg(long)]
    data: PathBuf,
    /// Which depth to compute.
    #[arg(long, value_enum)]
    depth: DepthArg,
    /// Bandwidth percentile for HMD and KFSD.
    #[arg(long, default_value_t = 15.0)]
    percentile: f64,
    /// Number of random projections for RTD and IDD.
    #[arg(long, default_value_t = 50)]
    projections: usize,
    /// Seed for the random projections.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Labeled training CSV file.
    #[arg(long)]
    train: PathBuf,
    /// Query CSV file (labels, when present, are echoed as `actual`).
    #[arg(long)]
    query: PathBuf,
    /// Classification procedure.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Depth used by DTM, WAD and WMD.
    #[arg(long, value_enum)]
    depth: Option<DepthArg>,
    /// Bandwidth percentile for HMD/KFSD-based methods.
    #[arg(long)]
    percentile: Option<f64>,
    /// Select the KFSD percentile by cross validation on the training data.
    #[arg(long)]
    cv: bool,
    /// Trimming proportion for DTM.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Neighbor count for k-NN (odd).
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Cross-validation folds for --cv.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Number of random projections for RTD and IDD.
    #[arg(long, default_value_t = 50)]
    projections: usize,
    /// Seed for projections, tie breaks and cross validation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Which curve model to draw from.
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Use the contaminated variant (CGP1 and CGP2 only).
    #[arg(long)]
    contaminated: bool,
    /// Contamination probability.
    #[arg(long, default_value_t = 0.10)]
    q: f64,
    #[arg(long, default_value_t = 50)]
    n0: usize,
    #[arg(long, default_value_t = 50)]
    n1: usize,
    /// Number of equidistant grid points.
    #[arg(long, default_value_t = 51)]
    grid_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Cgp1,
    Cgp2,
    Cgp3,
    Cgp4,
}

impl ModelArg {
    fn model(self) -> CgpModel {
        match self {
            ModelArg::Cgp1 => CgpModel::Cgp1,
            ModelArg::Cgp2 => CgpModel::Cgp2,
            ModelArg::Cgp3 => CgpModel::Cgp3,
            ModelArg::Cgp4 => CgpModel::Cgp4,
        }
    }
}

#[derive(Args)]
struct CvArgs {
    /// Labeled training CSV file.
    #[arg(long)]
    train: PathBuf,
    /// Procedure whose KFSD percentile is selected.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Candidate percentiles.
    #[arg(long, value_delimiter = ',', default_values_t = vec![15.0, 25.0, 33.0, 50.0, 66.0, 75.0, 85.0])]
    percentiles: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trimming proportion when the procedure is DTM.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Study config file (TOML).
    config: PathBuf,
    /// Override the configured replication count.
    #[arg(long)]
    replications: Option<usize>,
    /// Override the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured table format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Write the tables here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print per-depth timing of within-group training depths to stderr.
    #[arg(long)]
    timings: bool,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidSpec(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::Io),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn depth_spec_from(kind: DepthKind, percentile: f64, projections: usize, seed: u64) -> DepthSpec {
    match kind {
        DepthKind::Fmd => DepthSpec::fmd(),
        DepthKind::Hmd => DepthSpec::hmd(percentile),
        DepthKind::Rtd => DepthSpec::rtd(projections, seed),
        DepthKind::Idd => DepthSpec::idd(projections, seed),
        DepthKind::Mbd => DepthSpec::mbd(),
        DepthKind::Fsd => DepthSpec::fsd(),
        DepthKind::Kfsd => DepthSpec::kfsd(percentile),
    }
}

fn run_depth(args: &DepthArgs) -> Result<(), Error> {
    let table = load_curves_csv(&args.data)?;
    let sample = table.to_sample()?;
    let kind = args.depth.kind();
    let spec = depth_spec_from(kind, args.percentile, args.projections, args.seed);
    spec.validate()?;

    // depth of each curve within the whole sample
    let values: Vec<f64> = match kind {
        DepthKind::Hmd | DepthKind::Kfsd => {
            let sigma =
                bandwidth_from_percentile(&pairwise_distances(&sample), args.percentile)?;
            sample
                .curves()
                .iter()
                .map(|x| match kind {
                    DepthKind::Hmd => fdepth_core::depths::hmd(&sample, x, sigma, true),
                    _ => fdepth_core::depths::kfsd(&sample, x, sigma),
                })
                .collect::<Result<_, _>>()?
        }
        DepthKind::Rtd | DepthKind::Idd => {
            let proj = fdepth_core::depths::generate_projections(
                sample.grid(),
                args.projections,
                args.seed,
                fdepth_core::depths::projection_process_for(kind),
            );
            sample
                .curves()
                .iter()
                .map(|x| match kind {
                    DepthKind::Rtd => fdepth_core::depths::rtd(&sample, x, &proj),
                    _ => fdepth_core::depths::idd(&sample, x, &proj),
                })
                .collect::<Result<_, _>>()?
        }
        DepthKind::Fmd => sample
            .curves()
            .iter()
            .map(|x| fdepth_core::depths::fmd(&sample, x))
            .collect::<Result<_, _>>()?,
        DepthKind::Mbd => sample
            .curves()
            .iter()
            .map(|x| fdepth_core::depths::mbd(&sample, x))
            .collect::<Result<_, _>>()?,
        DepthKind::Fsd => sample
            .curves()
            .iter()
            .map(|x| fdepth_core::depths::fsd(&sample, x))
            .collect::<Result<_, _>>()?,
    };

    let mut out = String::from("index,label,depth\n");
    for (i, v) in values.iter().enumerate() {
        let label = match table.labels()[i] {
            Some(l) => l.to_string(),
            None => "-".into(),
        };
        out.push_str(&format!("{i},{label},{v:.12}\n"));
    }
    write_output(&args.out, &out)
}

fn classifier_spec(args: &ClassifyArgs, train: &LabeledSample) -> Result<ClassifierSpec, Error> {
    let tie_seed = args.seed;
    let build = |depth: DepthSpec| -> Result<ClassifierSpec, Error> {
        Ok(match args.method {
            MethodArg::Dtm => ClassifierSpec::dtm(depth, args.alpha, tie_seed),
            MethodArg::Wad => ClassifierSpec::wad(depth, tie_seed),
            MethodArg::Wmd => ClassifierSpec::wmd(depth, tie_seed),
            MethodArg::Knn => unreachable!("handled by the caller"),
        })
    };
    let spec = match args.method {
        MethodArg::Knn => ClassifierSpec::knn(args.k, tie_seed),
        _ => {
            let kind = args
                .depth
                .ok_or_else(|| Error::InvalidSpec("this method requires --depth".into()))?
                .kind();
            let percentile = if args.cv {
                if kind != DepthKind::Kfsd {
                    return Err(Error::InvalidSpec(
                        "--cv selects the KFSD percentile; use --depth kfsd".into(),
                    ));
                }
                let probe = build(DepthSpec::kfsd(15.0))?;
                let plan = make_cv_plan(train, args.folds, args.seed)?;
                let grid = fdepth_core::modelselect::DEFAULT_PERCENTILE_GRID;
                let choice = cv_select_percentile(train, &probe, &grid, &plan)?;
                eprintln!(
                    "selected percentile {} (cv error {:.4})",
                    choice.percentile, choice.cv_error
                );
                choice.percentile
            } else {
                args.percentile.unwrap_or(15.0)
            };
            build(depth_spec_from(kind, percentile, args.projections, args.seed))?
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn run_classify(args: &ClassifyArgs) -> Result<(), Error> {
    let train = load_curves_csv(&args.train)?.to_labeled_sample()?;
    fdepth_core::sample::validate_labeled_sample(&train)?;
    let query_table = load_curves_csv(&args.query)?;
    let queries = query_table.to_sample()?;
    if queries.grid().points() != train.grid().points() {
        return Err(Error::GridMismatch(
            "query curves on a different grid than the training data".into(),
        ));
    }
    let spec = classifier_spec(args, &train)?;
    let preds = classify_batch(&train, &queries, &spec)?;

    let has_labels = query_table.labels().iter().any(|l| l.is_some());
    let mut out = String::from("index,predicted,score0,score1,tie_broken");
    if has_labels {
        out.push_str(",actual");
    }
    out.push('\n');
    let mut wrong = 0usize;
    let mut labeled = 0usize;
    for (i, p) in preds.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{:.12},{:.12},{}",
            p.label, p.scores[0], p.scores[1], p.tie_broken
        ));
        if has_labels {
            match query_table.labels()[i] {
                Some(l) => {
                    out.push_str(&format!(",{l}"));
                    labeled += 1;
                    if l != p.label {
                        wrong += 1;
                    }
                }
                None => out.push_str(",-"),
            }
        }
        out.push('\n');
    }
    write_output(&args.out, &out)?;
    if labeled > 0 {
        eprintln!(
            "misclassified {wrong} of {labeled} ({:.2}%)",
            100.0 * wrong as f64 / labeled as f64
        );
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let mut spec = CgpSpec::new(args.model.model(), args.n0, args.n1, args.seed)
        .with_grid_points(args.grid_points);
    if args.contaminated {
        spec = spec.contaminated(args.q);
    }
    let sample = generate_cgp(&spec)?;
    write_output(&args.out, &write_curves_csv(&sample))
}

fn run_cv(args: &CvArgs) -> Result<(), Error> {
    let train = load_curves_csv(&args.train)?.to_labeled_sample()?;
    fdepth_core::sample::validate_labeled_sample(&train)?;
    let method = match args.method {
        MethodArg::Dtm => ClassifierSpec::dtm(DepthSpec::kfsd(15.0), args.alpha, args.seed),
        MethodArg::Wad => ClassifierSpec::wad(DepthSpec::kfsd(15.0), args.seed),
        MethodArg::Wmd => ClassifierSpec::wmd(DepthSpec::kfsd(15.0), args.seed),
        MethodArg::Knn => {
            return Err(Error::InvalidSpec(
                "k-NN has no KFSD percentile to select".into(),
            ))
        }
    };
    let plan = make_cv_plan(&train, args.folds, args.seed)?;
    let choice = cv_select_percentile(&train, &method, &args.percentiles, &plan)?;
    println!("percentile: {}", choice.percentile);
    println!("cv_error: {:.6}", choice.cv_error);
    println!("required_cv: {}", choice.required_cv);
    let tie = match choice.tie_level {
        TieLevel::Primary => "primary",
        TieLevel::Secondary => "secondary",
        TieLevel::Random => "random",
    };
    println!("tie_level: {tie}");
    Ok(())
}

fn run_experiment_cmd(args: &ExperimentArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    if let Some(r) = args.replications {
        cfg.replications = r;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(f) = args.format {
        cfg.format = f.table();
    }
    cfg.validate()?;

    let summary = run_experiment(&cfg)?;
    let mut rendered = emit_table(&summary, cfg.format);
    let cv = emit_cv_table(&summary, cfg.format);
    if !cv.is_empty() {
        rendered.push('\n');
        rendered.push_str(&cv);
    }
    write_output(&args.out, &rendered)?;

    if args.timings {
        for (kind, secs) in &summary.depth_seconds {
            eprintln!(
                "{}: {:.4} s per replication (within-group training depths)",
                kind.name(),
                secs
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Depth(args) => run_depth(args),
        Command::Classify(args) => run_classify(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Cv(args) => run_cv(args),
        Command::Experiment(args) => run_experiment_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
