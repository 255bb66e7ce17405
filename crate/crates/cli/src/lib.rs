//! `icot` command-line interface.
//!
//! Exit codes: 0 on success, 1 on data or compute errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use icot::dataset::{load_labeled_csv, LoadOptions};
use icot::oracle::{export_lp, MAX_MIO_DEPTH, MAX_MIO_OBSERVATIONS};
use icot::report::{build_report, render_paths, render_table, run_methods, Method};
use icot::{generate_synthetic, Criterion, Dataset, IcotError, SearchConfig, SyntheticShape};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "icot", version, about = "Interpretable clustering with optimal trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a clustering tree and print its decision paths.
    Fit(FitArgs),
    /// Compare ICOT with K-Means, the two-step tree and the truth labels.
    Benchmark(BenchmarkArgs),
    /// Write the mixed-integer model of an instance as an LP file.
    ExportMio(ExportArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct InputArgs {
    /// CSV or FCPS .lrn file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Synthetic shape: gaussian_blobs, tetra, two_diamonds, target_rings or wingnut.
    #[arg(long, value_parser = parse_shape)]
    pub generate: Option<SyntheticShape>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub source: InputArgs,
    /// Observation count for generated data.
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Column with ground-truth labels (default: a column named `class`).
    #[arg(long)]
    pub label_col: Option<String>,
    /// FCPS .cls label file for an .lrn input (default: the sibling .cls file).
    #[arg(long)]
    pub cls: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "silhouette", value_parser = parse_criterion)]
    pub criterion: Criterion,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_bucket: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Scan at most this many thresholds per feature and node.
    #[arg(long)]
    pub threshold_quantiles: Option<usize>,
    /// Tree document output path.
    #[arg(long)]
    pub out_tree: Option<PathBuf>,
    /// Report document output path.
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// Store wall-clock seconds in the report (makes it run-dependent).
    #[arg(long)]
    pub record_timing: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub fit: FitArgs,
    /// Comma-separated subset of icot, kmeans, two_step, truth.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Depth of the full binary topology.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_bucket: usize,
    /// Big-M constant (default: twice the largest pairwise distance).
    #[arg(long)]
    pub big_m: Option<f64>,
    /// LP file output path.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_shape(s: &str) -> Result<SyntheticShape, String> {
    s.parse().map_err(|e: IcotError| e.to_string())
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: IcotError| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: IcotError| e.to_string())
}

struct Loaded {
    data: Dataset,
    truth: Option<Vec<usize>>,
    source: String,
}

fn load_file(args: &DataArgs, path: &Path) -> icot::Result<Loaded> {
    let (data, truth) = if path.extension().is_some_and(|e| e == "lrn") {
        let cls = args.cls.clone().or_else(|| {
            let sibling = path.with_extension("cls");
            sibling.exists().then_some(sibling)
        });
        icot::dataset::load_fcps(path, cls.as_deref())?
    } else {
        let options = LoadOptions {
            label_column: args.label_col.clone(),
            ..LoadOptions::default()
        };
        load_labeled_csv(path, &options)?
    };
    Ok(Loaded {
        data,
        truth,
        source: path.display().to_string(),
    })
}

fn load_with_seed(args: &DataArgs, seed: u64) -> icot::Result<Loaded> {
    match args.source.generate {
        Some(shape) => {
            let labeled = generate_synthetic(shape, args.n, seed)?;
            Ok(Loaded {
                data: labeled.data,
                truth: Some(labeled.truth),
                source: format!("generate:{shape}"),
            })
        }
        None => load_file(args, args.source.input.as_deref().expect("clap enforces one input")),
    }
}

fn config_of(args: &FitArgs) -> SearchConfig {
    SearchConfig {
        criterion: args.criterion,
        max_depth: args.max_depth,
        min_bucket: args.min_bucket,
        restarts: args.restarts,
        seed: args.seed,
        threshold_quantiles: args.threshold_quantiles,
        ..SearchConfig::default()
    }
}

fn write_file(path: &Path, text: &str) -> icot::Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn run_fit_like(command: &str, args: &FitArgs, methods: &[Method], out: &mut dyn Write) -> icot::Result<()> {
    let loaded = load_with_seed(&args.data, args.seed)?;
    let config = config_of(args);
    let mut methods = methods.to_vec();
    if loaded.truth.is_none() {
        methods.retain(|m| *m != Method::Truth);
    }
    let start = Instant::now();
    let outcome = run_methods(&loaded.data, loaded.truth.as_deref(), &methods, &config)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = build_report(
        command,
        &loaded.source,
        &loaded.data,
        &config,
        &outcome,
        args.record_timing.then_some(seconds),
    )?;
    let fit = &outcome.fit;

    let _ = writeln!(
        out,
        "{} = {:.6}, leaves = {}, restarts = {}, seed = {}",
        config.criterion,
        fit.score.value,
        fit.tree.leaf_count(),
        config.restarts,
        config.seed
    );
    let _ = write!(out, "{}", render_paths(&fit.tree, &loaded.data)?);
    if command == "benchmark" {
        let _ = writeln!(out);
        let _ = write!(out, "{}", render_table(&outcome.rows));
    }
    log::info!("{command} finished in {seconds:.2}s");

    if let Some(path) = &args.out_tree {
        let sizes = fit.tree.leaf_sizes(&loaded.data)?;
        let mut text = fit.tree.to_json(Some(loaded.data.feature_names()), Some(&sizes));
        text.push('\n');
        write_file(path, &text)?;
    }
    if let Some(path) = &args.out_report {
        write_file(path, &report.to_json()?)?;
    }
    Ok(())
}

fn run_export(args: &ExportArgs, out: &mut dyn Write) -> icot::Result<()> {
    let loaded = load_with_seed(&args.data, 42)?;
    let n = loaded.data.n();
    if n > MAX_MIO_OBSERVATIONS {
        return Err(IcotError::TooLarge {
            what: "observation count",
            actual: n as u64,
            limit: MAX_MIO_OBSERVATIONS as u64,
        });
    }
    if args.depth > MAX_MIO_DEPTH {
        return Err(IcotError::TooLarge {
            what: "model depth",
            actual: args.depth as u64,
            limit: MAX_MIO_DEPTH as u64,
        });
    }
    let model = export_lp(&loaded.data, args.depth, args.min_bucket, args.big_m, &args.out)?;
    let _ = writeln!(
        out,
        "wrote {}: {} variables, {} linear rows, {} nonlinear definitions, big_M = {}",
        args.out.display(),
        model.variables.len(),
        model.rows.len(),
        model.nonlinear.len(),
        model.metadata.big_m
    );
    Ok(())
}

fn exit_code(err: &IcotError) -> i32 {
    match err {
        IcotError::Usage(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Fit(args) => run_fit_like("fit", args, &[Method::Icot, Method::Truth], out),
        Command::Benchmark(args) => {
            let methods = args.methods.clone().unwrap_or_else(|| Method::ALL.to_vec());
            run_fit_like("benchmark", &args.fit, &methods, out)
        }
        Command::ExportMio(args) => run_export(args, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
