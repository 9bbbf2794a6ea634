use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use interprox::io::{self as mio, Model};
use interprox::{
    audit_strong_hierarchy, fdr, fit_path, generate, interaction_fdr, prediction_error, Error, ErrorKind, PathConfig,
    Setting, TruthSpec, SUPPORT_EPS,
};

#[derive(Parser, Debug)]
#[command(name = "interprox", version, about = "Sparse interaction regression under strong hierarchy")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a regularization path and write the model file.
    Fit(FitArgs),
    /// Apply one path entry to new data.
    Predict(PredictArgs),
    /// Write a synthetic data set and its true coefficients.
    Simulate(SimulateArgs),
    /// Score a model against true coefficients (and optionally test data).
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Training data (CSV with header).
    #[arg(long)]
    data: PathBuf,
    /// Response column name, or 0-based index.
    #[arg(long, default_value = "y")]
    response: String,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-entry diagnostics CSV.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    lambda_count: usize,
    #[arg(long, default_value_t = 0.05)]
    lambda_min_ratio: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda2_ratio: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Center and scale features before fitting.
    #[arg(long)]
    standardize: bool,
    /// Stop the path once the support exceeds this size.
    #[arg(long)]
    max_support: Option<usize>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Response column to drop from the features if present.
    #[arg(long, default_value = "y")]
    response: String,
    /// Path entry to use (0-based; default: last).
    #[arg(long)]
    entry: Option<usize>,
    /// Predictions CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// hierarchical, anti_hierarchical or main_only.
    #[arg(long, default_value = "hierarchical")]
    setting: Setting,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    k_main: usize,
    /// Signal-to-noise ratio; `inf` for noiseless data.
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Data CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// True coefficients, in the model file format.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Test data for prediction error.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    response: String,
    /// Only this entry (0-based; default: all).
    #[arg(long)]
    entry: Option<usize>,
    /// Report CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numerical(_) => 3,
        Error::Resource(_) => 4,
        _ => 2,
    }
}

fn output(path: Option<&Path>) -> interprox::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn pick_entry(model: &Model, entry: Option<usize>) -> interprox::Result<usize> {
    if model.entries.is_empty() {
        return Err(Error::InvalidArgument("model has no entries".into()));
    }
    let k = entry.unwrap_or(model.entries.len() - 1);
    if k >= model.entries.len() {
        return Err(Error::InvalidArgument(format!(
            "entry {k} out of range (model has {} entries)",
            model.entries.len()
        )));
    }
    Ok(k)
}

fn run_fit(args: &FitArgs) -> interprox::Result<()> {
    let table = mio::load_csv(&args.data, &args.response, true)?;
    let data = table.prepared(args.standardize)?;
    let config = PathConfig {
        n_lambda: args.lambda_count,
        lambda_min_ratio: args.lambda_min_ratio,
        lambda2_ratio: args.lambda2_ratio,
        tol: args.tol,
        max_support: args.max_support,
        ..PathConfig::default()
    };
    config.validate()?;
    let started = Instant::now();
    let path = fit_path(&data, &config, args.threads)?;
    let elapsed = started.elapsed().as_secs_f64();
    mio::save_model(&args.out, &Model::from_path(&path, data.transform()))?;
    if let Some(d) = &args.diagnostics {
        mio::write_diagnostics(BufWriter::new(File::create(d)?), &path)?;
    }
    let failures = path.entries.iter().filter(|e| e.error.is_some()).count();
    eprintln!(
        "fit {} entries (lambda_max {:.6e}) in {:.3}s, {:.4}s per entry{}",
        path.entries.len(),
        path.lambda_max,
        elapsed,
        elapsed / path.entries.len().max(1) as f64,
        if failures > 0 { format!(", {failures} entries needed a cold restart") } else { String::new() }
    );
    Ok(())
}

fn run_predict(args: &PredictArgs) -> interprox::Result<()> {
    let model = mio::load_model(&args.model)?;
    let k = pick_entry(&model, args.entry)?;
    let table = mio::load_csv(&args.data, &args.response, false)?;
    let data = model.prepare(&table)?;
    let coef = &model.entries[k].coef;
    let pred = interprox::gradient::predict(&data, coef);
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "prediction")?;
    for f in &pred {
        writeln!(out, "{:?}", coef.intercept + f)?;
    }
    out.flush()?;
    if table.response_name.is_some() {
        let mse = prediction_error(coef, &data, ErrorKind::Mse)?;
        eprintln!("entry {k}: mse {mse:?}");
    }
    Ok(())
}

fn run_simulate(args: &SimulateArgs) -> interprox::Result<()> {
    let spec = TruthSpec {
        setting: args.setting,
        n: args.n,
        p: args.p,
        k_main: args.k_main,
        seed: args.seed,
        snr: args.snr,
    };
    let sim = generate(&spec)?;
    mio::save_csv(&args.out, "y", &mio::feature_names(args.p), &sim.data)?;
    mio::save_model(&args.truth, &Model::single(sim.truth))?;
    eprintln!("simulated n = {}, p = {}, sigma = {:.6}", args.n, args.p, sim.sigma);
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> interprox::Result<()> {
    let model = mio::load_model(&args.model)?;
    let truth_model = mio::load_model(&args.truth)?;
    let truth = truth_model
        .entries
        .first()
        .ok_or_else(|| Error::InvalidArgument("truth file has no entry".into()))?;
    if truth_model.p != model.p {
        return Err(Error::Dimension {
            what: "truth features",
            expected: model.p,
            got: truth_model.p,
        });
    }
    let truth_support = truth.coef.support(SUPPORT_EPS);
    let test = match &args.data {
        Some(path) => Some(model.prepare(&mio::load_csv(path, &args.response, true)?)?),
        None => None,
    };
    let entries: Vec<usize> = match args.entry {
        Some(k) => vec![pick_entry(&model, Some(k))?],
        None => (0..model.entries.len()).collect(),
    };

    let mut out = output(args.out.as_deref())?;
    write!(out, "entry,lambda1,lambda2,main_support,pair_support,fdr,interaction_fdr,sh_violations")?;
    if test.is_some() {
        write!(out, ",mse,rmse")?;
    }
    writeln!(out)?;
    for k in entries {
        let e = &model.entries[k];
        let support = e.coef.support(SUPPORT_EPS);
        write!(
            out,
            "{k},{:?},{:?},{},{},{:?},{:?},{}",
            e.lambda1,
            e.lambda2,
            support.mains.len(),
            support.pairs.len(),
            fdr(&support, &truth_support),
            interaction_fdr(&support, &truth_support),
            audit_strong_hierarchy(&e.coef, 1e-8).len()
        )?;
        if let Some(d) = &test {
            let mse = prediction_error(&e.coef, d, ErrorKind::Mse)?;
            write!(out, ",{mse:?},{:?}", mse.sqrt())?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let result = match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Evaluate(a) => run_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
