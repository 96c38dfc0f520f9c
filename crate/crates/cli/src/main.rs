//! `linml`: train, apply and benchmark linearization models from the shell.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use linearization::dataset::{generate_synthetic, parse_libsvm, parse_libsvm_with_map, split_dataset, write_libsvm};
use linearization::training::tune_k_scored;
use linearization::{
    evaluate, predict_ovr, read_any, run_benchmark_file, train, train_ovr, write_model, write_ovr,
    AnyModel, ConsensusVariant, Dataset, Error, ErrorKind, SyntheticFn, SyntheticMode, Task,
    TrainConfig,
};

#[derive(Parser)]
#[command(name = "linml", version, about = "Projection + 1-D neighbor consensus learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Reg,
    Bin,
    Ovr,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Reg => Task::Regression,
            TaskArg::Bin => Task::Binary,
            TaskArg::Ovr => Task::Multiclass,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ConsensusArg {
    Mean,
    Median,
}

#[derive(Clone, Copy, ValueEnum)]
enum FnArg {
    Sqrt,
    Exp,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Reg,
    Binmed,
}

#[derive(clap::Args)]
struct TrainOpts {
    #[arg(long, default_value_t = 0.05)]
    inc: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long = "max-iters", default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ConsensusArg::Mean)]
    consensus: ConsensusArg,
    #[arg(long = "ridge-lambda", default_value_t = 1e-6)]
    ridge_lambda: f64,
    /// Keep each point in its own neighborhood during pseudo-label refinement.
    #[arg(long = "include-self")]
    include_self: bool,
    /// Refit the projection against the refined pseudo-labels.
    #[arg(long)]
    refit: bool,
}

impl TrainOpts {
    fn config(&self, k: usize) -> TrainConfig {
        TrainConfig {
            k,
            inc: self.inc,
            eps: self.eps,
            max_iters: self.max_iters,
            ridge_lambda: self.ridge_lambda,
            seed: self.seed,
            consensus: match self.consensus {
                ConsensusArg::Mean => ConsensusVariant::Mean,
                ConsensusArg::Median => ConsensusVariant::Median,
            },
            leave_self_out: !self.include_self,
            refit_after_converge: self.refit,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a LIBSVM file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        opts: TrainOpts,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one prediction per input line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print accuracy metrics of a model on a LIBSVM file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Pick k on a seeded validation split.
    Tune {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = TaskArg::Bin)]
        task: TaskArg,
        #[arg(long = "k-grid", value_delimiter = ',', required = true)]
        k_grid: Vec<usize>,
        #[arg(long = "val-fraction", default_value_t = 0.25)]
        val_fraction: f64,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Generate a synthetic function dataset.
    Gen {
        #[arg(long = "fn", value_enum)]
        function: FnArg,
        #[arg(long)]
        n: usize,
        /// Interval as `lo:hi`.
        #[arg(long)]
        range: String,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark described by a TOML spec.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Include wall-clock timings (makes output non-reproducible).
        #[arg(long)]
        timings: bool,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Lib(e) => match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::DatasetNotFound(path.display().to_string()).into(),
        _ => Error::Io(format!("{}: {e}", path.display())).into(),
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())).into())
}

fn load_model(path: &Path) -> CliResult<AnyModel> {
    Ok(read_any(&read_text(path)?)?)
}

/// Parses a data file consistently with the model's task and label mapping.
fn load_data_for(model: &AnyModel, path: &Path) -> CliResult<Dataset> {
    let text = read_text(path)?;
    Ok(match model {
        AnyModel::Single(m) => parse_libsvm_with_map(&text, m.task, m.label_map)?,
        AnyModel::Ovr(_) => parse_libsvm(&text, Task::Multiclass)?,
    })
}

/// Predictions in internal label space (0/1 for binary, class id for ovr).
fn predict_all(model: &AnyModel, data: &Dataset) -> CliResult<Vec<f64>> {
    let out = data
        .examples
        .iter()
        .map(|e| match model {
            AnyModel::Single(m) => m.predict(&e.features),
            AnyModel::Ovr(m) => predict_ovr(m, &e.features).map(f64::from),
        })
        .collect::<linearization::Result<Vec<_>>>()?;
    Ok(out)
}

fn parse_range(s: &str) -> CliResult<(f64, f64)> {
    let bad = || CliError::Usage(format!("--range expects lo:hi, got '{s}'"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok((lo.trim().parse().map_err(|_| bad())?, hi.trim().parse().map_err(|_| bad())?))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train {
            data,
            task,
            k,
            opts,
            out,
        } => {
            let task: Task = task.into();
            let d = parse_libsvm(&read_text(&data)?, task)?;
            let cfg = opts.config(k);
            let text = if task == Task::Multiclass {
                write_ovr(&train_ovr(&d, &cfg)?)
            } else {
                let m = train(&d, &cfg)?;
                if let Some(s) = m.learn {
                    eprintln!(
                        "learn: {} after {} sweeps",
                        if s.converged { "converged" } else { "stopped" },
                        s.iterations
                    );
                }
                write_model(&m)
            };
            write_text(&out, &text)?;
            eprintln!("trained on {} examples, model written to {}", d.len(), out.display());
        }
        Command::Predict { model, data, out } => {
            let m = load_model(&model)?;
            let d = load_data_for(&m, &data)?;
            let preds = predict_all(&m, &d)?;
            let mut text = String::new();
            for p in preds {
                let v = match &m {
                    AnyModel::Single(s) if s.task == Task::Binary => {
                        s.label_map.unwrap_or_default().raw_of(p)
                    }
                    _ => p,
                };
                writeln!(text, "{v}").unwrap();
            }
            write_text(&out, &text)?;
        }
        Command::Eval { model, data } => {
            let m = load_model(&model)?;
            let d = load_data_for(&m, &data)?;
            let preds = predict_all(&m, &d)?;
            let metrics = evaluate(&preds, &d.targets(), d.task)?;
            print!("{metrics}");
        }
        Command::Tune {
            data,
            task,
            k_grid,
            val_fraction,
            opts,
        } => {
            let task: Task = task.into();
            if task == Task::Multiclass {
                return Err(CliError::Usage("tune supports reg and bin tasks".into()));
            }
            if !(val_fraction > 0.0 && val_fraction < 1.0) {
                return Err(CliError::Usage("--val-fraction must lie in (0, 1)".into()));
            }
            let d = parse_libsvm(&read_text(&data)?, task)?;
            let (fit, val) = split_dataset(&d, 1.0 - val_fraction, opts.seed)?;
            let r = tune_k_scored(&fit, &val, &k_grid, &opts.config(k_grid[0]))?;
            let metric = if task == Task::Binary { "accuracy" } else { "neg_rmse" };
            for (k, s) in &r.scores {
                println!("k {k} {metric} {s:.6}");
            }
            println!("best_k {}", r.best_k);
        }
        Command::Gen {
            function,
            n,
            range,
            mode,
            seed,
            out,
        } => {
            let f = match function {
                FnArg::Sqrt => SyntheticFn::Sqrt,
                FnArg::Exp => SyntheticFn::Exp,
            };
            let mode = match mode {
                ModeArg::Reg => SyntheticMode::Regression,
                ModeArg::Binmed => SyntheticMode::BinarizedAtMedian,
            };
            let d = generate_synthetic(f, n, parse_range(&range)?, mode, seed)?;
            write_text(&out, &write_libsvm(&d))?;
        }
        Command::Bench { spec, out, timings } => {
            let report = run_benchmark_file(&spec)?;
            print!("{}", report.to_table(timings));
            if timings {
                eprintln!("total row time: {:.1} ms", report.total_wall_time_ms());
            }
            if let Some(path) = out {
                write_text(&path, &report.to_json(timings))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
