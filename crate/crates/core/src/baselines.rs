//! Comparison learners: full-batch logistic regression and feature-space k-NN.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SparseVector, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub bias: f64,
    pub weights: Vec<f64>,
    pub lr: f64,
    pub iters: usize,
    pub l2: f64,
}

impl LogisticModel {
    pub fn margin(&self, x: &SparseVector) -> Result<f64> {
        let mut z = self.bias;
        for (i, v) in x.iter() {
            let w = self.weights.get(i - 1).ok_or(Error::IndexOutOfRange {
                index: i,
                dim: self.weights.len(),
            })?;
            z += w * v;
        }
        Ok(z)
    }

    pub fn probability(&self, x: &SparseVector) -> Result<f64> {
        self.margin(x).map(sigmoid)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2` (bias unpenalized).
pub fn logistic_loss(m: &LogisticModel, d: &Dataset) -> Result<f64> {
    let mut loss = 0.0;
    for ex in &d.examples {
        let z = m.margin(&ex.features)?;
        // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
        loss += softplus(z) - ex.target * z;
    }
    let reg: f64 = m.weights.iter().map(|w| w * w).sum();
    Ok(loss / d.len().max(1) as f64 + 0.5 * m.l2 * reg)
}

/// Full-batch gradient descent from zero weights.
///
/// `_seed` is accepted for interface symmetry with the other trainers; the
/// procedure draws nothing at random.
pub fn logistic_train(
    d: &Dataset,
    lr: f64,
    iters: usize,
    l2: f64,
    _seed: u64,
) -> Result<LogisticModel> {
    if d.task != Task::Binary {
        return Err(Error::TaskMismatch {
            expected: Task::Binary.to_string(),
            got: d.task.to_string(),
        });
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidParameter(format!("learning rate {lr} must be positive")));
    }
    if iters == 0 {
        return Err(Error::InvalidParameter("iters must be at least 1".into()));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::InvalidParameter(format!("l2 = {l2} must be non-negative")));
    }
    if d.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let dim = d.n_features;
    let n = d.len() as f64;
    let mut m = LogisticModel {
        bias: 0.0,
        weights: vec![0.0; dim],
        lr,
        iters,
        l2,
    };
    let mut grad = vec![0.0; dim];
    for iteration in 1..=iters {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_bias = 0.0;
        let mut loss = 0.0;
        for ex in &d.examples {
            let z = m.margin(&ex.features)?;
            loss += softplus(z) - ex.target * z;
            let r = sigmoid(z) - ex.target;
            grad_bias += r;
            for (i, v) in ex.features.iter() {
                grad[i - 1] += r * v;
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration });
        }
        m.bias -= lr * grad_bias / n;
        for (w, g) in m.weights.iter_mut().zip(&grad) {
            *w -= lr * (g / n + l2 * *w);
        }
        if !m.bias.is_finite() || m.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration });
        }
    }
    Ok(m)
}

/// 1 iff `sigmoid(w.x + b) > 0.5`, i.e. iff the margin is positive.
pub fn logistic_predict(m: &LogisticModel, x: &SparseVector) -> Result<f64> {
    Ok(if m.margin(x)? > 0.0 { 1.0 } else { 0.0 })
}

/// Majority label among the `k` nearest training points (Euclidean); ties give 0.
pub fn knn_baseline_predict(train: &Dataset, x: &SparseVector, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > train.len() {
        return Err(Error::KTooLarge {
            k,
            available: train.len(),
        });
    }
    let mut dist: Vec<(f64, usize)> = train
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| (e.features.squared_distance(x), i))
        .collect();
    dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ones = dist[..k]
        .iter()
        .filter(|&&(_, i)| train.examples[i].target == 1.0)
        .count();
    Ok(if 2 * ones > k { 1.0 } else { 0.0 })
}
