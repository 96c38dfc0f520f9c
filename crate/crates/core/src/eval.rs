//! Prediction accounting.

use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: usize,
    /// Exact matches between prediction and truth.
    pub correct: usize,
    pub accuracy: f64,
    /// `confusion[truth][prediction]`, binary tasks only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confusion: Option<[[usize; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
}

impl Metrics {
    /// `round(100 * correct / n)`, the figure shown in reports.
    pub fn percent(&self) -> u64 {
        ((100 * self.correct) as f64 / self.n as f64).round() as u64
    }
}

impl std::fmt::Display for Metrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "n {}", self.n)?;
        writeln!(f, "correct {}", self.correct)?;
        writeln!(f, "accuracy {:.6} ({}% {}/{})", self.accuracy, self.percent(), self.correct, self.n)?;
        if let Some([[tn, fp], [fn_, tp]]) = self.confusion {
            writeln!(f, "confusion tn={tn} fp={fp} fn={fn_} tp={tp}")?;
        }
        if let Some(rmse) = self.rmse {
            writeln!(f, "rmse {rmse:.6}")?;
        }
        if let Some(mae) = self.mae {
            writeln!(f, "mae {mae:.6}")?;
        }
        Ok(())
    }
}

pub fn evaluate(predictions: &[f64], truths: &[f64], task: Task) -> Result<Metrics> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    let n = predictions.len();
    let correct = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count();
    let mut m = Metrics {
        n,
        correct,
        accuracy: correct as f64 / n as f64,
        confusion: None,
        rmse: None,
        mae: None,
    };
    match task {
        Task::Binary => {
            let mut c = [[0usize; 2]; 2];
            for (&p, &t) in predictions.iter().zip(truths) {
                c[usize::from(t == 1.0)][usize::from(p == 1.0)] += 1;
            }
            m.confusion = Some(c);
        }
        Task::Regression => {
            let (sq, abs) = predictions
                .iter()
                .zip(truths)
                .fold((0.0, 0.0), |(sq, abs), (p, t)| {
                    (sq + (p - t) * (p - t), abs + (p - t).abs())
                });
            m.rmse = Some((sq / n as f64).sqrt());
            m.mae = Some(abs / n as f64);
        }
        Task::Multiclass => {}
    }
    Ok(m)
}
