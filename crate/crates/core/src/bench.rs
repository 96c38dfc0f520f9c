//! Benchmark orchestration: datasets x algorithms x seeds.
//!
//! A benchmark is described by a TOML document:
//!
//! ```toml
//! seeds = [1, 2, 3, 4, 5]
//! train_fraction = 0.64
//! algorithms = ["linearization", "logistic"]
//!
//! [linearization]
//! k_grid = [1, 3, 5, 7, 11, 15, 21]
//! val_fraction = 0.25
//!
//! [[dataset]]
//! id = "breast-cancer"
//! path = "breast-cancer"
//! task = "binary"
//! reference = { linearization = "241/248" }
//!
//! [[dataset]]
//! id = "sqrt"
//! synthetic = { function = "sqrt", n = 1000, range = [0.0, 100.0], mode = "binmed" }
//! ```
//!
//! Relative paths resolve against `base_dir` (the spec file's directory).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{knn_baseline_predict, logistic_predict, logistic_train};
use crate::dataset::{
    generate_synthetic, read_libsvm_file, split_dataset, subsample, Dataset, SyntheticFn,
    SyntheticMode, Task,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics};
use crate::multiclass::{predict_ovr, train_ovr};
use crate::training::{train, tune_k_scored, LearnSummary, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Linearization,
    Logistic,
    KnnBaseline,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Linearization => "linearization",
            Algorithm::Logistic => "logistic",
            Algorithm::KnnBaseline => "knn_baseline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub function: SyntheticFn,
    pub n: usize,
    pub range: [f64; 2],
    pub mode: SyntheticMode,
    /// Generator seed; defaults to the run seed so each seed sees a fresh sample.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default = "default_task")]
    pub task: Task,
    /// Seeded subsample size applied before splitting.
    #[serde(default)]
    pub subsample: Option<usize>,
    #[serde(default)]
    pub subsample_seed: u64,
    #[serde(default)]
    pub train_fraction: Option<f64>,
    /// Replaces the top-level `[logistic]` settings for this dataset.
    #[serde(default)]
    pub logistic: Option<LogisticSpec>,
    /// Externally published figures shown next to the measured ones, per algorithm.
    #[serde(default)]
    pub reference: BTreeMap<String, String>,
}

fn default_task() -> Task {
    Task::Binary
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearizationSpec {
    #[serde(flatten)]
    pub config: TrainConfig,
    /// Empty grid: use `config.k` directly.
    pub k_grid: Vec<usize>,
    pub val_fraction: f64,
}

impl Default for LinearizationSpec {
    fn default() -> Self {
        Self {
            config: TrainConfig::default(),
            k_grid: vec![1, 3, 5, 7, 11, 15, 21],
            val_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticSpec {
    pub lr: f64,
    pub iters: usize,
    pub l2: f64,
}

impl Default for LogisticSpec {
    fn default() -> Self {
        Self {
            lr: 0.1,
            iters: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnSpec {
    pub k: usize,
}

impl Default for KnnSpec {
    fn default() -> Self {
        Self { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub linearization: LinearizationSpec,
    #[serde(default)]
    pub logistic: LogisticSpec,
    #[serde(default)]
    pub knn_baseline: KnnSpec,
    #[serde(default, rename = "dataset")]
    pub datasets: Vec<DatasetSpec>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_train_fraction() -> f64 {
    0.64
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Linearization, Algorithm::Logistic]
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            train_fraction: default_train_fraction(),
            algorithms: default_algorithms(),
            linearization: LinearizationSpec::default(),
            logistic: LogisticSpec::default(),
            knn_baseline: KnnSpec::default(),
            datasets: Vec::new(),
        }
    }
}

impl BenchSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return bad(format!("train_fraction {} outside [0, 1]", self.train_fraction));
        }
        if !(self.linearization.val_fraction > 0.0 && self.linearization.val_fraction < 1.0) {
            return bad("linearization.val_fraction must lie in (0, 1)".into());
        }
        self.linearization
            .config
            .validate()
            .map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        for d in &self.datasets {
            match (&d.path, &d.synthetic) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => return bad(format!("dataset '{}' needs exactly one of path / synthetic", d.id)),
            }
            if let Some(f) = d.train_fraction {
                if !(0.0..=1.0).contains(&f) {
                    return bad(format!("dataset '{}': train_fraction {f} outside [0, 1]", d.id));
                }
            }
            if let Some(l) = &d.logistic {
                if !(l.lr > 0.0 && l.lr.is_finite()) || l.iters == 0 {
                    return bad(format!("dataset '{}': logistic needs lr > 0 and iters >= 1", d.id));
                }
            }
            if d.task != Task::Binary
                && self
                    .algorithms
                    .iter()
                    .any(|a| *a != Algorithm::Linearization)
            {
                return bad(format!(
                    "dataset '{}': baselines support binary tasks only",
                    d.id
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub train_fraction: f64,
    pub n_train: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learn: Option<LearnSummary>,
    pub metrics: Metrics,
    /// Omitted from deterministic renderings.
    #[serde(skip)]
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub seeds: usize,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<BenchSummary>,
}

impl BenchReport {
    pub fn summary_for(&self, dataset: &str, algorithm: Algorithm) -> Option<&BenchSummary> {
        self.summary
            .iter()
            .find(|s| s.dataset == dataset && s.algorithm == algorithm)
    }

    pub fn total_wall_time_ms(&self) -> f64 {
        self.rows.iter().map(|r| r.wall_time_ms).sum()
    }

    /// JSON rendering; byte-identical across runs unless timings are included.
    pub fn to_json(&self, include_timings: bool) -> String {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if include_timings {
            if let Some(rows) = value.get_mut("rows").and_then(|r| r.as_array_mut()) {
                for (row, r) in rows.iter_mut().zip(&self.rows) {
                    row["wall_time_ms"] = serde_json::json!(r.wall_time_ms);
                }
            }
        }
        serde_json::to_string_pretty(&value).expect("report serializes") + "\n"
    }

    pub fn to_table(&self, include_timings: bool) -> String {
        let mut out = String::new();
        let w = self
            .rows
            .iter()
            .map(|r| r.dataset.len())
            .chain(self.summary.iter().map(|s| s.dataset.len()))
            .max()
            .unwrap_or(7)
            .max(7);
        write!(out, "{:<w$}  {:<13}  {:>6}  {:>3}  {:>5}  {:>13}", "dataset", "algorithm", "seed", "k", "acc", "correct/n").unwrap();
        if include_timings {
            write!(out, "  {:>10}", "time_ms").unwrap();
        }
        out.push('\n');
        for r in &self.rows {
            let k = r.k.map_or("-".to_string(), |k| k.to_string());
            let ratio = format!("{}/{}", r.metrics.correct, r.metrics.n);
            write!(
                out,
                "{:<w$}  {:<13}  {:>6}  {:>3}  {:>4}%  {:>13}",
                r.dataset,
                r.algorithm.name(),
                r.seed,
                k,
                r.metrics.percent(),
                ratio
            )
            .unwrap();
            if let Some(rmse) = r.metrics.rmse {
                write!(out, "  rmse={rmse:.6}").unwrap();
            }
            if include_timings {
                write!(out, "  {:>10.1}", r.wall_time_ms).unwrap();
            }
            out.push('\n');
        }
        if !self.summary.is_empty() {
            out.push('\n');
            writeln!(
                out,
                "{:<w$}  {:<13}  {:>5}  {:>8}  {:>8}  {:>8}  reference",
                "dataset", "algorithm", "seeds", "mean", "min", "max"
            )
            .unwrap();
            for s in &self.summary {
                writeln!(
                    out,
                    "{:<w$}  {:<13}  {:>5}  {:>7.2}%  {:>7.2}%  {:>7.2}%  {}",
                    s.dataset,
                    s.algorithm.name(),
                    s.seeds,
                    100.0 * s.mean_accuracy,
                    100.0 * s.min_accuracy,
                    100.0 * s.max_accuracy,
                    s.reference.as_deref().unwrap_or("-")
                )
                .unwrap();
            }
        }
        out
    }
}

enum Source {
    Loaded(Dataset),
    Synthetic(SyntheticSpec),
}

fn resolve(spec: &DatasetSpec, base_dir: &Path) -> Result<Source> {
    if let Some(path) = &spec.path {
        let full = if path.is_absolute() {
            path.clone()
        } else {
            base_dir.join(path)
        };
        let mut d = read_libsvm_file(&full, spec.task)?;
        if let Some(n) = spec.subsample {
            d = subsample(&d, n, spec.subsample_seed);
        }
        Ok(Source::Loaded(d))
    } else {
        let s = spec.synthetic.clone().expect("validated");
        Ok(Source::Synthetic(s))
    }
}

fn materialize(src: &Source, spec: &DatasetSpec, seed: u64) -> Result<Dataset> {
    match src {
        Source::Loaded(d) => Ok(d.clone()),
        Source::Synthetic(s) => {
            let mut d = generate_synthetic(
                s.function,
                s.n,
                (s.range[0], s.range[1]),
                s.mode,
                s.seed.unwrap_or(seed),
            )?;
            if let Some(n) = spec.subsample {
                d = subsample(&d, n, spec.subsample_seed);
            }
            Ok(d)
        }
    }
}

struct Outcome {
    predictions: Vec<f64>,
    k: Option<usize>,
    learn: Option<LearnSummary>,
}

fn run_linearization(train_set: &Dataset, test: &Dataset, ls: &LinearizationSpec, seed: u64) -> Result<Outcome> {
    let cfg = ls.config.with_seed(seed);
    if train_set.task == Task::Multiclass {
        let m = train_ovr(train_set, &cfg)?;
        let predictions = test
            .examples
            .iter()
            .map(|e| predict_ovr(&m, &e.features).map(f64::from))
            .collect::<Result<_>>()?;
        return Ok(Outcome {
            predictions,
            k: Some(cfg.k),
            learn: None,
        });
    }
    let k = if ls.k_grid.is_empty() {
        cfg.k
    } else {
        let (fit, val) = split_dataset(train_set, 1.0 - ls.val_fraction, seed)?;
        let limit = fit.len().saturating_sub(usize::from(cfg.leave_self_out));
        let grid: Vec<usize> = ls.k_grid.iter().copied().filter(|&k| k <= limit).collect();
        if grid.is_empty() || val.is_empty() {
            return Err(Error::ConfigInvalid(
                "training split too small for every k in the grid".into(),
            ));
        }
        tune_k_scored(&fit, &val, &grid, &cfg)?.best_k
    };
    let model = train(train_set, &cfg.with_k(k))?;
    let predictions = test
        .examples
        .iter()
        .map(|e| model.predict(&e.features))
        .collect::<Result<_>>()?;
    Ok(Outcome {
        predictions,
        k: Some(k),
        learn: model.learn,
    })
}

fn run_row(
    spec: &BenchSpec,
    dspec: &DatasetSpec,
    src: &Source,
    algorithm: Algorithm,
    seed: u64,
) -> Result<BenchRow> {
    let start = Instant::now();
    let data = materialize(src, dspec, seed)?;
    let fraction = dspec.train_fraction.unwrap_or(spec.train_fraction);
    let (train_set, test) = split_dataset(&data, fraction, seed)?;
    if test.is_empty() || train_set.is_empty() {
        return Err(Error::ConfigInvalid(format!(
            "dataset '{}': split leaves an empty side",
            dspec.id
        )));
    }
    let outcome = match algorithm {
        Algorithm::Linearization => run_linearization(&train_set, &test, &spec.linearization, seed)?,
        Algorithm::Logistic => {
            let ls = dspec.logistic.as_ref().unwrap_or(&spec.logistic);
            let m = logistic_train(&train_set, ls.lr, ls.iters, ls.l2, seed)?;
            Outcome {
                predictions: test
                    .examples
                    .iter()
                    .map(|e| logistic_predict(&m, &e.features))
                    .collect::<Result<_>>()?,
                k: None,
                learn: None,
            }
        }
        Algorithm::KnnBaseline => {
            let k = spec.knn_baseline.k.min(train_set.len());
            Outcome {
                predictions: test
                    .examples
                    .iter()
                    .map(|e| knn_baseline_predict(&train_set, &e.features, k))
                    .collect::<Result<_>>()?,
                k: Some(k),
                learn: None,
            }
        }
    };
    let metrics = evaluate(&outcome.predictions, &test.targets(), data.task)?;
    Ok(BenchRow {
        dataset: dspec.id.clone(),
        algorithm,
        seed,
        train_fraction: fraction,
        n_train: train_set.len(),
        k: outcome.k,
        learn: outcome.learn,
        metrics,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Runs every (dataset, algorithm, seed) row; rows come back in spec order.
pub fn run_benchmark(spec: &BenchSpec, base_dir: &Path) -> Result<BenchReport> {
    spec.validate()?;
    let sources = spec
        .datasets
        .iter()
        .map(|d| resolve(d, base_dir))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, Algorithm, u64)> = (0..spec.datasets.len())
        .flat_map(|di| {
            spec.algorithms
                .iter()
                .flat_map(move |&a| spec.seeds.iter().map(move |&s| (di, a, s)))
        })
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(di, a, s)| run_row(spec, &spec.datasets[di], &sources[di], a, s))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = Vec::new();
    for d in &spec.datasets {
        for &a in &spec.algorithms {
            let accs: Vec<f64> = rows
                .iter()
                .filter(|r| r.dataset == d.id && r.algorithm == a)
                .map(|r| r.metrics.accuracy)
                .collect();
            if accs.is_empty() {
                continue;
            }
            summary.push(BenchSummary {
                dataset: d.id.clone(),
                algorithm: a,
                seeds: accs.len(),
                mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                min_accuracy: accs.iter().copied().fold(f64::INFINITY, f64::min),
                max_accuracy: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                reference: d.reference.get(a.name()).cloned(),
            });
        }
    }
    Ok(BenchReport { rows, summary })
}

pub fn run_benchmark_file(path: &Path) -> Result<BenchReport> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
    let spec = BenchSpec::from_toml(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    run_benchmark(&spec, base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_spec() -> BenchSpec {
        BenchSpec::from_toml(
            r#"
            seeds = [1, 2]
            algorithms = ["linearization", "logistic", "knn_baseline"]

            [linearization]
            k_grid = [1, 5]

            [[dataset]]
            id = "sqrt"
            synthetic = { function = "sqrt", n = 200, range = [0.0, 100.0], mode = "binmed" }
            reference = { linearization = "90%" }
            "#,
        )
        .unwrap()
    }

    #[test]
    fn empty_dataset_list_gives_empty_report() {
        let r = run_benchmark(&BenchSpec::default(), Path::new(".")).unwrap();
        assert!(r.rows.is_empty() && r.summary.is_empty());
    }

    #[test]
    fn rows_follow_spec_order_and_are_deterministic() {
        let spec = synthetic_spec();
        let a = run_benchmark(&spec, Path::new(".")).unwrap();
        let b = run_benchmark(&spec, Path::new(".")).unwrap();
        assert_eq!(a.to_json(false), b.to_json(false));
        assert_eq!(a.to_table(false), b.to_table(false));
        let order: Vec<(Algorithm, u64)> = a.rows.iter().map(|r| (r.algorithm, r.seed)).collect();
        assert_eq!(
            order,
            vec![
                (Algorithm::Linearization, 1),
                (Algorithm::Linearization, 2),
                (Algorithm::Logistic, 1),
                (Algorithm::Logistic, 2),
                (Algorithm::KnnBaseline, 1),
                (Algorithm::KnnBaseline, 2),
            ]
        );
        for r in &a.rows {
            assert!(r.metrics.correct <= r.metrics.n);
            assert_eq!(r.metrics.n, 72);
        }
        assert_eq!(a.summary.len(), 3);
        assert_eq!(a.summary[0].reference.as_deref(), Some("90%"));
        assert!(a.to_table(false).contains("90%"));
    }

    #[test]
    fn printed_percentages_match_ratios() {
        let r = run_benchmark(&synthetic_spec(), Path::new(".")).unwrap();
        let table = r.to_table(false);
        for row in &r.rows {
            let cell = format!("{}%  ", row.metrics.percent());
            let expected = ((100 * row.metrics.correct) as f64 / row.metrics.n as f64).round() as u64;
            assert_eq!(row.metrics.percent(), expected);
            assert!(table.contains(&cell));
        }
    }

    #[test]
    fn missing_file_is_reported() {
        let spec = BenchSpec::from_toml(
            r#"
            [[dataset]]
            id = "nope"
            path = "does/not/exist"
            "#,
        )
        .unwrap();
        assert!(matches!(
            run_benchmark(&spec, Path::new(".")),
            Err(Error::DatasetNotFound(_))
        ));
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(BenchSpec::from_toml("train_fraction = 2.0"), Err(Error::ConfigInvalid(_))));
        assert!(BenchSpec::from_toml("algorithms = [\"mlp\"]").is_err());
        assert!(BenchSpec::from_toml("[[dataset]]\nid = \"x\"").is_err());
        assert!(BenchSpec::from_toml("[linearization]\nk = 0").is_err());
        assert!(BenchSpec::from_toml("bogus = 1").is_err());
    }
}
