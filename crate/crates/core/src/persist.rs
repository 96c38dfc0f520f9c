//! Versioned plain-text model files.
//!
//! One `key value` pair per line, reals in shortest round-trip exponent
//! notation. A binary/regression model:
//!
//! ```text
//! linearization-model v1
//! task binary
//! labels 2 4
//! k 5
//! inc 5e-2
//! eps 1e-3
//! max_iters 100
//! ridge_lambda 1e-6
//! seed 42
//! consensus mean
//! leave_self_out true
//! refit_after_converge false
//! rng chacha8/rand_chacha-0.9
//! learn converged 12
//! bias 1.25e-1
//! weights 2
//! 3.5e-1
//! -2e0
//! index 3
//! -1e0 2e-1
//! ...
//! end
//! ```
//!
//! A one-vs-rest model wraps one such block per class between
//! `linearization-ovr v1` / `classes <n>` and `end-ovr`.

use std::fmt::Write as _;

use crate::dataset::{LabelMap, Task};
use crate::error::{Error, Result};
use crate::multiclass::{ClassId, OvrModel};
use crate::projection::{Neighbor, NeighborIndex, Projection};
use crate::training::{LearnSummary, Model, TrainConfig, RNG_ID};

pub const MODEL_MAGIC: &str = "linearization-model";
pub const OVR_MAGIC: &str = "linearization-ovr";
pub const FORMAT_VERSION: &str = "v1";

fn real(v: f64) -> String {
    format!("{v:e}")
}

fn opt_real(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), real)
}

pub fn write_model(m: &Model) -> String {
    let mut out = String::new();
    write_model_into(&mut out, m);
    out
}

fn write_model_into(out: &mut String, m: &Model) {
    let c = &m.config;
    writeln!(out, "{MODEL_MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(out, "task {}", m.task).unwrap();
    match m.label_map {
        Some(map) => writeln!(out, "labels {} {}", opt_real(map.zero), opt_real(map.one)).unwrap(),
        None => writeln!(out, "labels none").unwrap(),
    }
    writeln!(out, "k {}", m.k).unwrap();
    writeln!(out, "inc {}", real(c.inc)).unwrap();
    writeln!(out, "eps {}", real(c.eps)).unwrap();
    writeln!(out, "max_iters {}", c.max_iters).unwrap();
    writeln!(out, "ridge_lambda {}", real(c.ridge_lambda)).unwrap();
    writeln!(out, "seed {}", c.seed).unwrap();
    writeln!(out, "consensus {}", c.consensus).unwrap();
    writeln!(out, "leave_self_out {}", c.leave_self_out).unwrap();
    writeln!(out, "refit_after_converge {}", c.refit_after_converge).unwrap();
    writeln!(out, "rng {RNG_ID}").unwrap();
    match m.learn {
        Some(s) => {
            let status = if s.converged { "converged" } else { "not-converged" };
            writeln!(out, "learn {status} {}", s.iterations).unwrap();
        }
        None => writeln!(out, "learn none").unwrap(),
    }
    writeln!(out, "bias {}", real(m.projection.bias)).unwrap();
    writeln!(out, "weights {}", m.projection.weights.len()).unwrap();
    for w in &m.projection.weights {
        writeln!(out, "{}", real(*w)).unwrap();
    }
    writeln!(out, "index {}", m.index.len()).unwrap();
    for e in m.index.entries() {
        writeln!(out, "{} {}", real(e.projected), real(e.target)).unwrap();
    }
    writeln!(out, "end").unwrap();
}

pub fn write_ovr(m: &OvrModel) -> String {
    let mut out = String::new();
    writeln!(out, "{OVR_MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(out, "classes {}", m.classes.len()).unwrap();
    for (c, model) in m.classes.iter().zip(&m.models) {
        writeln!(out, "class {c}").unwrap();
        write_model_into(&mut out, model);
    }
    writeln!(out, "end-ovr").unwrap();
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
        }
    }

    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .ok_or_else(|| Error::ModelFormat("unexpected end of file".into()))
    }

    /// Next line, split into its leading key and the rest; the key must match.
    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, line) = self.next_line()?;
        let (k, rest) = line.split_once(' ').unwrap_or((line, ""));
        if k != key {
            return Err(Error::ModelFormat(format!(
                "line {n}: expected '{key}', found '{line}'"
            )));
        }
        Ok((n, rest.trim()))
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, v) = self.field(key)?;
        parse_value(n, v)
    }

    fn at_end(&mut self) -> bool {
        self.inner.peek().is_none()
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::ModelFormat(format!("line {line}: cannot parse '{v}'")))
}

fn parse_real(line: usize, v: &str) -> Result<f64> {
    let x: f64 = parse_value(line, v)?;
    if !x.is_finite() {
        return Err(Error::ModelFormat(format!("line {line}: non-finite value")));
    }
    Ok(x)
}

fn parse_opt_real(line: usize, v: &str) -> Result<Option<f64>> {
    if v == "-" {
        Ok(None)
    } else {
        parse_real(line, v).map(Some)
    }
}

fn check_header(lines: &mut Lines<'_>, magic: &str) -> Result<()> {
    let (_, version) = lines.field(magic)?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version.to_string()));
    }
    Ok(())
}

fn read_model_from(lines: &mut Lines<'_>) -> Result<Model> {
    check_header(lines, MODEL_MAGIC)?;
    let (n, task_s) = lines.field("task")?;
    let task: Task = task_s
        .parse()
        .map_err(|_| Error::ModelFormat(format!("line {n}: unknown task '{task_s}'")))?;
    if task == Task::Multiclass {
        return Err(Error::ModelFormat(format!("line {n}: multiclass needs an ovr file")));
    }
    let (n, labels) = lines.field("labels")?;
    let label_map = if labels == "none" {
        None
    } else {
        let (a, b) = labels
            .split_once(' ')
            .ok_or_else(|| Error::ModelFormat(format!("line {n}: bad label map")))?;
        Some(LabelMap {
            zero: parse_opt_real(n, a)?,
            one: parse_opt_real(n, b)?,
        })
    };
    let k: usize = lines.parsed("k")?;
    let (n, v) = lines.field("inc")?;
    let inc = parse_real(n, v)?;
    let (n, v) = lines.field("eps")?;
    let eps = parse_real(n, v)?;
    let max_iters: usize = lines.parsed("max_iters")?;
    let (n, v) = lines.field("ridge_lambda")?;
    let ridge_lambda = parse_real(n, v)?;
    let seed: u64 = lines.parsed("seed")?;
    let (n, v) = lines.field("consensus")?;
    let consensus = v
        .parse()
        .map_err(|_| Error::ModelFormat(format!("line {n}: unknown consensus '{v}'")))?;
    let leave_self_out: bool = lines.parsed("leave_self_out")?;
    let refit_after_converge: bool = lines.parsed("refit_after_converge")?;
    let (n, rng) = lines.field("rng")?;
    if rng != RNG_ID {
        return Err(Error::ModelFormat(format!(
            "line {n}: model was trained with generator '{rng}', expected '{RNG_ID}'"
        )));
    }
    let (n, learn_s) = lines.field("learn")?;
    let learn = match learn_s.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["none"] => None,
        [status @ ("converged" | "not-converged"), iters] => Some(LearnSummary {
            converged: *status == "converged",
            iterations: parse_value(n, iters)?,
        }),
        _ => return Err(Error::ModelFormat(format!("line {n}: bad learn summary"))),
    };
    let (n, v) = lines.field("bias")?;
    let bias = parse_real(n, v)?;
    let dim: usize = lines.parsed("weights")?;
    let mut weights = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (n, v) = lines.next_line()?;
        weights.push(parse_real(n, v)?);
    }
    let size: usize = lines.parsed("index")?;
    let mut entries = Vec::with_capacity(size);
    for id in 0..size {
        let (n, v) = lines.next_line()?;
        let (a, b) = v
            .split_once(' ')
            .ok_or_else(|| Error::ModelFormat(format!("line {n}: expected 'projected target'")))?;
        entries.push(Neighbor {
            projected: parse_real(n, a)?,
            target: parse_real(n, b.trim())?,
            id,
        });
    }
    lines.field("end")?;

    let config = TrainConfig {
        k,
        inc,
        eps,
        max_iters,
        ridge_lambda,
        seed,
        consensus,
        leave_self_out,
        refit_after_converge,
    };
    config
        .validate()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    let index = NeighborIndex::from_sorted(entries)?;
    if index.len() < k {
        return Err(Error::ModelFormat(format!(
            "index holds {} entries but k = {k}",
            index.len()
        )));
    }
    Ok(Model {
        task,
        projection: Projection::new(bias, weights)?,
        index,
        k,
        config,
        label_map,
        learn,
    })
}

pub fn read_model(text: &str) -> Result<Model> {
    let mut lines = Lines::new(text);
    let m = read_model_from(&mut lines)?;
    if !lines.at_end() {
        return Err(Error::ModelFormat("trailing content after 'end'".into()));
    }
    Ok(m)
}

pub fn read_ovr(text: &str) -> Result<OvrModel> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, OVR_MAGIC)?;
    let count: usize = lines.parsed("classes")?;
    let mut classes = Vec::with_capacity(count);
    let mut models = Vec::with_capacity(count);
    for _ in 0..count {
        let c: ClassId = lines.parsed("class")?;
        classes.push(c);
        models.push(read_model_from(&mut lines)?);
    }
    lines.field("end-ovr")?;
    if count == 0 || classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ModelFormat("class ids must be nonempty and ascending".into()));
    }
    Ok(OvrModel { classes, models })
}

/// Either kind of model file, dispatched on the header line.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyModel {
    Single(Model),
    Ovr(OvrModel),
}

pub fn read_any(text: &str) -> Result<AnyModel> {
    let first = text.lines().next().unwrap_or("");
    if first.starts_with(OVR_MAGIC) {
        read_ovr(text).map(AnyModel::Ovr)
    } else {
        read_model(text).map(AnyModel::Single)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Dataset, Example, SparseVector};
    use crate::multiclass::train_ovr;
    use crate::projection::NeighborIndex;
    use crate::training::{train_binary, train_regression};
    use proptest::prelude::*;

    fn binary_data() -> Dataset {
        let examples = (0..30)
            .map(|i| Example {
                features: SparseVector::from_dense(&[i as f64 * 0.37 - 3.0, (i % 4) as f64]).unwrap(),
                target: if i > 14 { 1.0 } else { 0.0 },
            })
            .collect();
        Dataset::from_examples(examples, Task::Binary).unwrap()
    }

    #[test]
    fn binary_model_round_trips() {
        let m = train_binary(&binary_data(), &TrainConfig { seed: 9, ..Default::default() }).unwrap();
        let text = write_model(&m);
        let back = read_model(&text).unwrap();
        assert_eq!(back.projection, m.projection);
        let pairs = |i: &NeighborIndex| -> Vec<(f64, f64)> {
            i.entries().iter().map(|e| (e.projected, e.target)).collect()
        };
        assert_eq!(pairs(&back.index), pairs(&m.index));
        assert_eq!(back.config, m.config);
        assert_eq!(back.learn, m.learn);
        assert_eq!(write_model(&back), text);
    }

    #[test]
    fn regression_model_round_trips() {
        let examples = (0..12)
            .map(|i| Example {
                features: SparseVector::from_dense(&[i as f64]).unwrap(),
                target: (i as f64).sqrt(),
            })
            .collect();
        let d = Dataset::from_examples(examples, Task::Regression).unwrap();
        let m = train_regression(&d, &TrainConfig::default()).unwrap();
        let text = write_model(&m);
        assert!(text.contains("labels none"));
        assert_eq!(write_model(&read_model(&text).unwrap()), text);
    }

    #[test]
    fn ovr_round_trips() {
        let examples = (0..30)
            .map(|i| Example {
                features: SparseVector::from_dense(&[(i % 3) as f64 * 5.0 + i as f64 * 0.01 + 1.0]).unwrap(),
                target: (i % 3) as f64,
            })
            .collect();
        let d = Dataset::from_examples(examples, Task::Multiclass).unwrap();
        let m = train_ovr(&d, &TrainConfig::default()).unwrap();
        let text = write_ovr(&m);
        let back = read_ovr(&text).unwrap();
        assert_eq!(back.classes, m.classes);
        assert_eq!(write_ovr(&back), text);
        assert!(matches!(read_any(&text).unwrap(), AnyModel::Ovr(_)));
    }

    #[test]
    fn rejects_unknown_version() {
        let m = train_binary(&binary_data(), &TrainConfig::default()).unwrap();
        let text = write_model(&m).replacen("v1", "v2", 1);
        assert_eq!(read_model(&text).unwrap_err(), Error::UnsupportedVersion("v2".into()));
    }

    #[test]
    fn rejects_truncated_and_corrupted_files() {
        let m = train_binary(&binary_data(), &TrainConfig::default()).unwrap();
        let text = write_model(&m);
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(matches!(read_model(&cut), Err(Error::ModelFormat(_))));
        let bad = text.replacen("consensus mean", "consensus mode", 1);
        assert!(matches!(read_model(&bad), Err(Error::ModelFormat(_))));
        let trailing = format!("{text}extra\n");
        assert!(read_model(&trailing).is_err());
        assert!(read_model("").is_err());
    }

    proptest! {
        #[test]
        fn reals_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let s = real(v);
            prop_assert_eq!(parse_real(1, &s).unwrap().to_bits(), v.to_bits());
        }
    }
}
