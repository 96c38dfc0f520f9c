//! One-vs-rest reduction onto the binary trainer.

use crate::dataset::{Dataset, Example, LabelMap, SparseVector, Task};
use crate::error::{Error, Result};
use crate::training::{train_binary, Model, TrainConfig};

pub type ClassId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct OvrModel {
    /// Ascending class ids, one binary model each (class = 1, rest = 0).
    pub classes: Vec<ClassId>,
    pub models: Vec<Model>,
}

/// Distinct class ids of a multiclass dataset, ascending.
pub fn class_ids(d: &Dataset) -> Vec<ClassId> {
    let mut ids: Vec<ClassId> = d.examples.iter().map(|e| e.target as ClassId).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Binary view of `d` with class `c` as the positive class.
pub fn relabel(d: &Dataset, c: ClassId) -> Dataset {
    let examples = d
        .examples
        .iter()
        .map(|e| Example {
            features: e.features.clone(),
            target: if e.target as ClassId == c { 1.0 } else { 0.0 },
        })
        .collect();
    Dataset {
        examples,
        n_features: d.n_features,
        task: Task::Binary,
        label_map: Some(LabelMap::identity()),
    }
}

/// Trains one binary model per class; the model for the `i`-th class uses seed `seed + i`.
pub fn train_ovr(d: &Dataset, cfg: &TrainConfig) -> Result<OvrModel> {
    if d.task != Task::Multiclass {
        return Err(Error::TaskMismatch {
            expected: Task::Multiclass.to_string(),
            got: d.task.to_string(),
        });
    }
    let classes = class_ids(d);
    if classes.is_empty() {
        return Err(Error::Empty("multiclass training set"));
    }
    let models = classes
        .iter()
        .enumerate()
        .map(|(i, &c)| train_binary(&relabel(d, c), &cfg.with_seed(cfg.seed.wrapping_add(i as u64))))
        .collect::<Result<Vec<_>>>()?;
    Ok(OvrModel { classes, models })
}

/// Class whose model yields the largest raw consensus; ties go to the smaller id.
pub fn predict_ovr(m: &OvrModel, x: &SparseVector) -> Result<ClassId> {
    if m.classes.len() == 1 {
        // Still validates the query's dimension.
        m.models[0].projection.project(x)?;
        return Ok(m.classes[0]);
    }
    let scores = m
        .models
        .iter()
        .map(|model| model.score(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_class(&m.classes, &scores))
}

pub(crate) fn argmax_class(classes: &[ClassId], scores: &[f64]) -> ClassId {
    classes
        .iter()
        .zip(scores)
        .fold(None::<(ClassId, f64)>, |best, (&c, &s)| match best {
            Some((bc, bs)) if bs > s || (bs == s && bc < c) => Some((bc, bs)),
            _ => Some((c, s)),
        })
        .map(|(c, _)| c)
        .expect("at least one class")
}
