//! LIBSVM ingestion, synthetic function datasets and seeded splits.
//!
//! Feature indices are 1-based, as in the file format. The implicit leading
//! constant of an observation is not stored here; the bias lives in
//! [`Projection`](crate::projection::Projection).

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse observation with strictly ascending 1-based indices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut previous = 0;
        for &(index, value) in &entries {
            if index <= previous {
                return Err(Error::NonAscendingIndex {
                    line: 0,
                    previous,
                    index,
                });
            }
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { line: 0 });
            }
            previous = index;
        }
        Ok(Self { entries })
    }

    /// Dense constructor: `values[0]` becomes index 1. Zeros are kept.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().enumerate().map(|(i, &v)| (i + 1, v)).collect())
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.entries.last().map_or(0, |&(i, _)| i)
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(0.0, |pos| self.entries[pos].1)
    }

    /// Squared Euclidean distance, treating absent entries as zero.
    pub fn squared_distance(&self, other: &SparseVector) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        loop {
            let d = match (a.get(i), b.get(j)) {
                (Some(&(ia, va)), Some(&(ib, vb))) => match ia.cmp(&ib) {
                    std::cmp::Ordering::Equal => {
                        i += 1;
                        j += 1;
                        va - vb
                    }
                    std::cmp::Ordering::Less => {
                        i += 1;
                        va
                    }
                    std::cmp::Ordering::Greater => {
                        j += 1;
                        vb
                    }
                },
                (Some(&(_, va)), None) => {
                    i += 1;
                    va
                }
                (None, Some(&(_, vb))) => {
                    j += 1;
                    vb
                }
                (None, None) => break,
            };
            sum += d * d;
        }
        sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: SparseVector,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Binary,
    Multiclass,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" | "reg" => Ok(Task::Regression),
            "binary" | "bin" => Ok(Task::Binary),
            "multiclass" | "ovr" => Ok(Task::Multiclass),
            other => Err(Error::InvalidParameter(format!("unknown task '{other}'"))),
        }
    }
}

/// Raw file labels that were normalized to class 0 and class 1.
///
/// A side is `None` when that class never appeared in the source.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelMap {
    pub zero: Option<f64>,
    pub one: Option<f64>,
}

impl LabelMap {
    pub fn identity() -> Self {
        Self {
            zero: Some(0.0),
            one: Some(1.0),
        }
    }

    /// Mapping for a set of distinct raw labels: the smaller of two labels
    /// becomes 0; a lone label becomes 0 iff it is `<= 0`.
    pub fn infer(distinct: &[f64]) -> Result<Self> {
        let mut labels = distinct.to_vec();
        labels.sort_by(f64::total_cmp);
        labels.dedup();
        match labels.as_slice() {
            [] => Ok(Self::default()),
            [only] if *only <= 0.0 => Ok(Self {
                zero: Some(*only),
                one: None,
            }),
            [only] => Ok(Self {
                zero: None,
                one: Some(*only),
            }),
            [lo, hi] => Ok(Self {
                zero: Some(*lo),
                one: Some(*hi),
            }),
            more => Err(Error::LabelArityMismatch { found: more.len() }),
        }
    }

    pub fn class_of(&self, raw: f64) -> Option<f64> {
        if self.zero == Some(raw) {
            Some(0.0)
        } else if self.one == Some(raw) {
            Some(1.0)
        } else {
            None
        }
    }

    /// Raw label for a class; classes with no recorded label map to themselves.
    pub fn raw_of(&self, class: f64) -> f64 {
        if class == 0.0 {
            self.zero.unwrap_or(0.0)
        } else {
            self.one.unwrap_or(1.0)
        }
    }

    /// Extends the map with a label not yet seen, if a side is still free.
    fn absorb(&mut self, raw: f64) -> Result<f64> {
        if let Some(c) = self.class_of(raw) {
            return Ok(c);
        }
        let mut seen: Vec<f64> = self.zero.into_iter().chain(self.one).collect();
        seen.push(raw);
        let inferred = Self::infer(&seen)?;
        // An established assignment must not flip.
        if (self.zero.is_some() && inferred.zero != self.zero)
            || (self.one.is_some() && inferred.one != self.one)
        {
            return Err(Error::LabelArityMismatch { found: seen.len() });
        }
        *self = inferred;
        Ok(self.class_of(raw).expect("label just absorbed"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub n_features: usize,
    pub task: Task,
    /// Present for binary datasets.
    pub label_map: Option<LabelMap>,
}

impl Dataset {
    pub fn empty(task: Task) -> Self {
        Self {
            examples: Vec::new(),
            n_features: 0,
            task,
            label_map: (task == Task::Binary).then(LabelMap::default),
        }
    }

    /// Builds a dataset from already-normalized examples, checking the task
    /// invariants and computing `n_features`.
    pub fn from_examples(examples: Vec<Example>, task: Task) -> Result<Self> {
        for (i, ex) in examples.iter().enumerate() {
            check_target(ex.target, task, i + 1)?;
        }
        let n_features = examples
            .iter()
            .map(|e| e.features.max_index())
            .max()
            .unwrap_or(0);
        Ok(Self {
            examples,
            n_features,
            task,
            label_map: (task == Task::Binary).then(LabelMap::identity),
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.target).collect()
    }

    fn with_examples(&self, examples: Vec<Example>) -> Self {
        Self {
            examples,
            n_features: self.n_features,
            task: self.task,
            label_map: self.label_map,
        }
    }
}

fn check_target(target: f64, task: Task, line: usize) -> Result<()> {
    if !target.is_finite() {
        return Err(Error::NonFiniteValue { line });
    }
    let ok = match task {
        Task::Regression => true,
        Task::Binary => target == 0.0 || target == 1.0,
        Task::Multiclass => target >= 0.0 && target.fract() == 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::MalformedLine {
            line,
            detail: format!("label {target} is not valid for a {task} task"),
        })
    }
}

/// Parses LIBSVM text. Binary labels are normalized with [`LabelMap::infer`].
pub fn parse_libsvm(text: &str, task: Task) -> Result<Dataset> {
    parse_libsvm_with_map(text, task, None)
}

/// Like [`parse_libsvm`], but binary labels are resolved against an existing
/// mapping (e.g. the one recorded in a trained model).
pub fn parse_libsvm_with_map(text: &str, task: Task, map: Option<LabelMap>) -> Result<Dataset> {
    let mut rows: Vec<(f64, SparseVector, usize)> = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok.parse().map_err(|_| Error::MalformedLine {
            line,
            detail: format!("bad label '{label_tok}'"),
        })?;
        if !label.is_finite() {
            return Err(Error::NonFiniteValue { line });
        }
        let mut entries = Vec::new();
        let mut previous = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::MalformedLine {
                line,
                detail: format!("expected index:value, got '{tok}'"),
            })?;
            let index: usize = idx_s
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| Error::MalformedLine {
                    line,
                    detail: format!("bad feature index '{idx_s}'"),
                })?;
            let value: f64 = val_s.parse().map_err(|_| Error::MalformedLine {
                line,
                detail: format!("bad feature value '{val_s}'"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { line });
            }
            if index <= previous {
                return Err(Error::NonAscendingIndex {
                    line,
                    previous,
                    index,
                });
            }
            previous = index;
            entries.push((index, value));
        }
        rows.push((label, SparseVector { entries }, line));
    }

    let label_map = match task {
        Task::Binary => Some(match map {
            Some(m) => m,
            None => {
                let labels: Vec<f64> = rows.iter().map(|r| r.0).collect();
                LabelMap::infer(&labels)?
            }
        }),
        _ => None,
    };

    let mut working_map = label_map;
    let mut examples = Vec::with_capacity(rows.len());
    for (label, features, line) in rows {
        let target = match working_map.as_mut() {
            Some(m) => m.absorb(label)?,
            None => label,
        };
        check_target(target, task, line)?;
        examples.push(Example { features, target });
    }
    let n_features = examples
        .iter()
        .map(|e| e.features.max_index())
        .max()
        .unwrap_or(0);
    Ok(Dataset {
        examples,
        n_features,
        task,
        label_map: working_map,
    })
}

pub fn read_libsvm_file(path: impl AsRef<Path>, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::DatasetNotFound(path.display().to_string()),
        _ => Error::Io(format!("{}: {e}", path.display())),
    })?;
    parse_libsvm(&text, task)
}

/// Serializes targets and entries with round-trip precision.
pub fn write_libsvm(d: &Dataset) -> String {
    let mut out = String::new();
    for ex in &d.examples {
        write!(out, "{}", ex.target).unwrap();
        for (i, v) in ex.features.iter() {
            write!(out, " {i}:{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Seeded shuffle followed by a cut at `round(train_fraction * n)`.
pub fn split_dataset(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidParameter(format!(
            "train fraction {train_fraction} outside [0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (train_fraction * d.len() as f64).round() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| d.examples[i].clone()).collect();
    Ok((d.with_examples(pick(&order[..cut])), d.with_examples(pick(&order[cut..]))))
}

/// Seeded subsample of at most `n` examples, preserving file order.
pub fn subsample(d: &Dataset, n: usize, seed: u64) -> Dataset {
    if n >= d.len() {
        return d.clone();
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut keep = order[..n].to_vec();
    keep.sort_unstable();
    d.with_examples(keep.into_iter().map(|i| d.examples[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticFn {
    Sqrt,
    Exp,
}

impl SyntheticFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            SyntheticFn::Sqrt => x.sqrt(),
            SyntheticFn::Exp => x.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyntheticMode {
    #[serde(rename = "reg")]
    Regression,
    #[serde(rename = "binmed")]
    BinarizedAtMedian,
}

/// `n` points with `x` uniform on `[lo, hi)` and target `f(x)`, or `1{f(x) > median}`.
pub fn generate_synthetic(
    kind: SyntheticFn,
    n: usize,
    x_range: (f64, f64),
    mode: SyntheticMode,
    seed: u64,
) -> Result<Dataset> {
    let (lo, hi) = x_range;
    let invalid = |detail: &str| Error::InvalidRange {
        lo,
        hi,
        detail: detail.to_string(),
    };
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(invalid("interval must be finite and nonempty"));
    }
    if kind == SyntheticFn::Sqrt && lo < 0.0 {
        return Err(invalid("square root needs a non-negative domain"));
    }
    if !kind.eval(hi).is_finite() {
        return Err(invalid("function overflows on this interval"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    let fx: Vec<f64> = xs.iter().map(|&x| kind.eval(x)).collect();
    let targets = match mode {
        SyntheticMode::Regression => fx,
        SyntheticMode::BinarizedAtMedian => {
            let m = median(&fx);
            fx.iter().map(|&v| if v > m { 1.0 } else { 0.0 }).collect()
        }
    };
    let examples = xs
        .into_iter()
        .zip(targets)
        .map(|(x, target)| Example {
            features: SparseVector {
                entries: vec![(1, x)],
            },
            target,
        })
        .collect();
    let task = match mode {
        SyntheticMode::Regression => Task::Regression,
        SyntheticMode::BinarizedAtMedian => Task::Binary,
    };
    Dataset::from_examples(examples, task)
}

/// Median with the even-count midpoint convention; 0 for an empty slice.
pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}
