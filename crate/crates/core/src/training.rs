//! Projection fitting, pseudo-label refinement and the trained [`Model`].
//!
//! Binary training proceeds in three stages:
//!
//! 1. every training point gets a random pseudo-label `p_i` inside its class
//!    range (`(0, 0.5)` for class 0, `(0.5, 1]` for class 1);
//! 2. the projection is fitted by ridge least squares against those `p_i`;
//! 3. [`learn`] repeatedly recomputes each point's neighbor consensus `q_i`
//!    and moves `p_i` toward it without leaving the class range, until a
//!    sweep changes nothing.
//!
//! Prediction is the ratio consensus over the final `(y'_j, p_j)` pairs,
//! thresholded at 0.5.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabelMap, SparseVector, Task};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, SymmetricMatrix};
use crate::projection::{
    build_index, consensus, k_nearest, ConsensusVariant, NeighborIndex, Projection,
};

/// Identity of the generator behind every seeded draw, echoed in model files.
pub const RNG_ID: &str = "chacha8/rand_chacha-0.9";

/// Margin keeping initial pseudo-labels off the class-range boundaries.
pub const INIT_MARGIN: f64 = 1e-3;

/// Pseudo-label moves smaller than this do not count as changes.
pub const CHANGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub k: usize,
    pub inc: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub ridge_lambda: f64,
    pub seed: u64,
    pub consensus: ConsensusVariant,
    pub leave_self_out: bool,
    /// Refit the projection against the learned pseudo-labels after `learn`.
    pub refit_after_converge: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: 5,
            inc: 0.05,
            eps: 1e-3,
            max_iters: 100,
            ridge_lambda: 1e-6,
            seed: 0,
            consensus: ConsensusVariant::Mean,
            leave_self_out: true,
            refit_after_converge: false,
        }
    }
}

impl TrainConfig {
    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.inc > 0.0 && self.inc < 0.5) {
            return bad(format!("inc = {} must lie in (0, 0.5)", self.inc));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps = {} must be positive", self.eps));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return bad(format!(
                "ridge_lambda = {} must be non-negative",
                self.ridge_lambda
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelState {
    pub p: Vec<f64>,
    pub classes: Vec<u8>,
}

impl PseudoLabelState {
    pub fn new(p: Vec<f64>, classes: Vec<u8>) -> Result<Self> {
        if p.len() != classes.len() {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: classes.len(),
            });
        }
        if classes.iter().any(|&c| c > 1) {
            return Err(Error::InvalidParameter("classes must be 0 or 1".into()));
        }
        Ok(Self { p, classes })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `c = 0 => p in (0, 0.5)` and `c = 1 => p in (0.5, 1]` for every point.
    pub fn satisfies_class_ranges(&self) -> bool {
        self.p
            .iter()
            .zip(&self.classes)
            .all(|(&p, &c)| in_class_range(p, c))
    }
}

pub fn in_class_range(p: f64, class: u8) -> bool {
    if class == 0 {
        p > 0.0 && p < 0.5
    } else {
        p > 0.5 && p <= 1.0
    }
}

/// Ridge least squares with an unpenalized bias.
///
/// Minimizes `sum (w0 + w.x_i - t_i)^2 + lambda * |w|^2`. The bias is
/// eliminated by centering, which leaves the minimizer of the augmented
/// normal equations unchanged; the centered system is solved by Cholesky.
pub fn fit_projection(d: &Dataset, targets: &[f64], ridge_lambda: f64) -> Result<Projection> {
    if targets.len() != d.len() {
        return Err(Error::LengthMismatch {
            left: d.len(),
            right: targets.len(),
        });
    }
    if d.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge_lambda = {ridge_lambda} must be non-negative"
        )));
    }
    let dim = d.n_features;
    let n = d.len() as f64;

    let mut mean = vec![0.0; dim];
    for ex in &d.examples {
        for (i, v) in ex.features.iter() {
            mean[i - 1] += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let target_mean = targets.iter().sum::<f64>() / n;

    let mut gram = SymmetricMatrix::zeros(dim);
    let mut rhs = vec![0.0; dim];
    let mut row = vec![0.0; dim];
    for (ex, &t) in d.examples.iter().zip(targets) {
        row.copy_from_slice(&mean);
        row.iter_mut().for_each(|v| *v = -*v);
        for (i, v) in ex.features.iter() {
            row[i - 1] += v;
        }
        let tc = t - target_mean;
        for a in 0..dim {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            rhs[a] += ra * tc;
            gram.add_row_scaled(a, ra, &row);
        }
    }
    for a in 0..dim {
        gram.add_diagonal(a, ridge_lambda);
    }

    let weights = cholesky_solve(gram, &rhs)?;
    let bias = target_mean - weights.iter().zip(&mean).map(|(w, m)| w * m).sum::<f64>();
    Projection::new(bias, weights).map_err(|_| Error::SingularSystem)
}

/// Uniform draws on `(margin, 0.5 - margin)` or `(0.5 + margin, 1 - margin)`.
pub fn init_pseudo_labels(classes: &[u8], seed: u64) -> Result<PseudoLabelState> {
    if classes.is_empty() {
        return Err(Error::Empty("class labels"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = classes
        .iter()
        .map(|&c| {
            if c == 0 {
                rng.random_range(INIT_MARGIN..0.5 - INIT_MARGIN)
            } else {
                rng.random_range(0.5 + INIT_MARGIN..1.0 - INIT_MARGIN)
            }
        })
        .collect();
    PseudoLabelState::new(p, classes.to_vec())
}

/// New pseudo-label for one point given its consensus `q`.
fn update_pseudo_label(p: f64, q: f64, class: u8, inc: f64, eps: f64) -> f64 {
    if (q - p).abs() <= eps {
        return p;
    }
    let direct = if class == 0 {
        q > 0.0 && q < 0.5
    } else {
        q > 0.5 && q <= 1.0
    };
    if direct {
        return q;
    }
    let can_rise = if class == 0 {
        p + inc < 0.5
    } else {
        p + inc <= 1.0
    };
    if q - p > eps && can_rise {
        return p + inc;
    }
    let can_fall = if class == 0 {
        p - inc > 0.0
    } else {
        p - inc > 0.5
    };
    if p - q > eps && can_fall {
        return p - inc;
    }
    p
}

/// One synchronous sweep: every `q_i` is computed from the previous state.
pub fn learn_step(
    projections: &[f64],
    state: &PseudoLabelState,
    cfg: &TrainConfig,
) -> Result<(PseudoLabelState, usize)> {
    if projections.len() != state.len() {
        return Err(Error::LengthMismatch {
            left: projections.len(),
            right: state.len(),
        });
    }
    let index = build_index(projections, &state.p)?;
    let next: Vec<f64> = (0..state.len())
        .into_par_iter()
        .map(|i| {
            let exclude = cfg.leave_self_out.then_some(i);
            let neighbors = k_nearest(&index, projections[i], cfg.k, exclude)?;
            let q = consensus(projections[i], &neighbors, cfg.consensus)?;
            Ok(update_pseudo_label(
                state.p[i],
                q,
                state.classes[i],
                cfg.inc,
                cfg.eps,
            ))
        })
        .collect::<Result<_>>()?;
    let changed = next
        .iter()
        .zip(&state.p)
        .filter(|(a, b)| (*a - *b).abs() > CHANGE_TOL)
        .count();
    Ok((
        PseudoLabelState {
            p: next,
            classes: state.classes.clone(),
        },
        changed,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub state: PseudoLabelState,
    pub converged: bool,
    pub iterations: usize,
}

/// Iterates [`learn_step`] until a sweep changes nothing or `max_iters` sweeps ran.
///
/// On convergence the returned state is the input of the final sweep, so a
/// further sweep over it reports zero changes.
pub fn learn(
    projections: &[f64],
    state: PseudoLabelState,
    cfg: &TrainConfig,
) -> Result<LearnOutcome> {
    let mut current = state;
    for iteration in 1..=cfg.max_iters {
        let (next, changed) = learn_step(projections, &current, cfg)?;
        if changed == 0 {
            return Ok(LearnOutcome {
                state: current,
                converged: true,
                iterations: iteration,
            });
        }
        current = next;
    }
    Ok(LearnOutcome {
        state: current,
        converged: false,
        iterations: cfg.max_iters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnSummary {
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub task: Task,
    pub projection: Projection,
    pub index: NeighborIndex,
    pub k: usize,
    pub config: TrainConfig,
    pub label_map: Option<LabelMap>,
    pub learn: Option<LearnSummary>,
}

/// Class shared by every stored pseudo-label, if the training set had only one.
pub fn uniform_class(index: &NeighborIndex) -> Option<f64> {
    let entries = index.entries();
    if entries.iter().all(|e| in_class_range(e.target, 1)) {
        Some(1.0)
    } else if entries.iter().all(|e| in_class_range(e.target, 0)) {
        Some(0.0)
    } else {
        None
    }
}

impl Model {
    pub fn dim(&self) -> usize {
        self.projection.dim()
    }

    /// Raw consensus at the query's projection.
    pub fn score(&self, x: &SparseVector) -> Result<f64> {
        let y = self.projection.project(x)?;
        let neighbors = k_nearest(&self.index, y, self.k, None)?;
        consensus(y, &neighbors, self.config.consensus)
    }

    /// Regression value, or class `0.0` / `1.0`.
    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        predict(self, x)
    }
}

pub fn predict(m: &Model, x: &SparseVector) -> Result<f64> {
    let s = m.score(x)?;
    Ok(match m.task {
        // A single-class training set admits only that class.
        Task::Binary => uniform_class(&m.index).unwrap_or_else(|| threshold(s)),
        _ => s,
    })
}

/// Class 1 only for scores strictly above one half.
pub fn threshold(score: f64) -> f64 {
    if score > 0.5 {
        1.0
    } else {
        0.0
    }
}

fn expect_task(d: &Dataset, task: Task) -> Result<()> {
    if d.task != task {
        return Err(Error::TaskMismatch {
            expected: task.to_string(),
            got: d.task.to_string(),
        });
    }
    Ok(())
}

fn project_all(p: &Projection, d: &Dataset) -> Result<Vec<f64>> {
    d.examples.iter().map(|e| p.project(&e.features)).collect()
}

pub fn train_regression(d: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    expect_task(d, Task::Regression)?;
    if d.len() < cfg.k {
        return Err(Error::KTooLarge {
            k: cfg.k,
            available: d.len(),
        });
    }
    let targets = d.targets();
    let projection = fit_projection(d, &targets, cfg.ridge_lambda)?;
    let projected = project_all(&projection, d)?;
    let index = build_index(&projected, &targets)?;
    Ok(Model {
        task: Task::Regression,
        projection,
        index,
        k: cfg.k,
        config: cfg.clone(),
        label_map: None,
        learn: None,
    })
}

pub fn train_binary(d: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    expect_task(d, Task::Binary)?;
    let needed = cfg.k + usize::from(cfg.leave_self_out);
    if d.len() < needed {
        return Err(Error::KTooLarge {
            k: cfg.k,
            available: d.len().saturating_sub(usize::from(cfg.leave_self_out)),
        });
    }
    let classes: Vec<u8> = d.examples.iter().map(|e| (e.target == 1.0) as u8).collect();
    let initial = init_pseudo_labels(&classes, cfg.seed)?;
    let mut projection = fit_projection(d, &initial.p, cfg.ridge_lambda)?;
    let mut projected = project_all(&projection, d)?;
    let outcome = learn(&projected, initial, cfg)?;
    if cfg.refit_after_converge {
        projection = fit_projection(d, &outcome.state.p, cfg.ridge_lambda)?;
        projected = project_all(&projection, d)?;
    }
    let index = build_index(&projected, &outcome.state.p)?;
    Ok(Model {
        task: Task::Binary,
        projection,
        index,
        k: cfg.k,
        config: cfg.clone(),
        label_map: d.label_map,
        learn: Some(LearnSummary {
            converged: outcome.converged,
            iterations: outcome.iterations,
        }),
    })
}

/// Dispatches on the dataset task (regression or binary).
pub fn train(d: &Dataset, cfg: &TrainConfig) -> Result<Model> {
    match d.task {
        Task::Regression => train_regression(d, cfg),
        Task::Binary => train_binary(d, cfg),
        Task::Multiclass => Err(Error::TaskMismatch {
            expected: "regression or binary".into(),
            got: d.task.to_string(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best_k: usize,
    /// `(k, score)` in grid order; accuracy for binary, negative RMSE for regression.
    pub scores: Vec<(usize, f64)>,
}

pub fn tune_k(train_set: &Dataset, val: &Dataset, grid: &[usize], cfg: &TrainConfig) -> Result<usize> {
    tune_k_scored(train_set, val, grid, cfg).map(|r| r.best_k)
}

pub fn tune_k_scored(
    train_set: &Dataset,
    val: &Dataset,
    grid: &[usize],
    cfg: &TrainConfig,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if val.is_empty() {
        return Err(Error::Empty("validation set"));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &k in grid {
        let model = train(train_set, &cfg.with_k(k))?;
        let score = validation_score(&model, val)?;
        scores.push((k, score));
    }
    let (best_k, _) = scores
        .iter()
        .copied()
        .reduce(|best, cand| {
            if cand.1 > best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                cand
            } else {
                best
            }
        })
        .expect("grid is nonempty");
    Ok(TuneResult { best_k, scores })
}

fn validation_score(model: &Model, val: &Dataset) -> Result<f64> {
    let mut acc = 0.0;
    for ex in &val.examples {
        let y = model.predict(&ex.features)?;
        acc += match model.task {
            Task::Binary => f64::from(u8::from(y == ex.target)),
            _ => (y - ex.target).powi(2),
        };
    }
    let n = val.len() as f64;
    Ok(match model.task {
        Task::Binary => acc / n,
        _ => -(acc / n).sqrt(),
    })
}
