//! Multilinear projection, the sorted 1-D neighbor index and ratio consensus.
//!
//! A query `x` is mapped to `y' = w0 + w . x`. Its `k` nearest training
//! projections `y'_j` (under `|y'_j - y'|`) each vote `y' * t_j / y'_j`,
//! where `t_j` is the stored target, and the votes are aggregated by mean
//! or median.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dataset::SparseVector;
use crate::error::{Error, Result};

/// Neighbors whose projected value is within this of zero do not vote.
pub const DEFAULT_DIV_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl Projection {
    pub fn new(bias: f64, weights: Vec<f64>) -> Result<Self> {
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "projection components must be finite".into(),
            ));
        }
        Ok(Self { bias, weights })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            bias: 0.0,
            weights: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn project(&self, x: &SparseVector) -> Result<f64> {
        project(self, x)
    }
}

pub fn project(p: &Projection, x: &SparseVector) -> Result<f64> {
    let mut acc = p.bias;
    for (index, value) in x.iter() {
        let w = p.weights.get(index - 1).ok_or(Error::IndexOutOfRange {
            index,
            dim: p.dim(),
        })?;
        acc += w * value;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub projected: f64,
    pub target: f64,
    /// Position of the pair in the sequences given to [`build_index`].
    pub id: usize,
}

/// Training pairs sorted by projected value, ties kept in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborIndex {
    entries: Vec<Neighbor>,
}

pub fn build_index(projected: &[f64], targets: &[f64]) -> Result<NeighborIndex> {
    if projected.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: projected.len(),
            right: targets.len(),
        });
    }
    if projected.is_empty() {
        return Err(Error::Empty("neighbor index"));
    }
    if projected.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "index entries must be finite".into(),
        ));
    }
    let mut entries: Vec<Neighbor> = projected
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(id, (&projected, &target))| Neighbor {
            projected,
            target,
            id,
        })
        .collect();
    // Stable sort keeps insertion order among equal projections.
    entries.sort_by(|a, b| a.projected.total_cmp(&b.projected));
    Ok(NeighborIndex { entries })
}

impl NeighborIndex {
    /// Rebuilds an index from entries already in index order (used when loading models).
    pub(crate) fn from_sorted(entries: Vec<Neighbor>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("neighbor index"));
        }
        if entries.windows(2).any(|w| w[0].projected > w[1].projected) {
            return Err(Error::ModelFormat("index entries are not sorted".into()));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn k_nearest(&self, query: f64, k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        k_nearest(self, query, k, exclude)
    }
}

/// Total order used for neighbor selection: distance, then projected value,
/// then insertion order.
fn neighbor_order(query: f64, a: &Neighbor, b: &Neighbor) -> Ordering {
    (a.projected - query)
        .abs()
        .total_cmp(&(b.projected - query).abs())
        .then(a.projected.total_cmp(&b.projected))
        .then(a.id.cmp(&b.id))
}

/// The `k` entries closest to `query`, nearest first.
///
/// Only a window around the binary-search position is inspected: `k` (plus
/// one when excluding) entries on each side, widened on the left across a
/// run of equal projections so that earlier-inserted duplicates win ties.
pub fn k_nearest(
    idx: &NeighborIndex,
    query: f64,
    k: usize,
    exclude: Option<usize>,
) -> Result<Vec<Neighbor>> {
    let entries = &idx.entries;
    let excluded_present = exclude.is_some_and(|id| id < entries.len());
    let available = entries.len() - usize::from(excluded_present);
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > available {
        return Err(Error::KTooLarge { k, available });
    }

    let reach = k + usize::from(excluded_present);
    let pos = entries.partition_point(|e| e.projected < query);
    let mut lo = pos.saturating_sub(reach);
    if lo > 0 {
        let boundary = entries[lo].projected;
        while lo > 0 && entries[lo - 1].projected == boundary {
            lo -= 1;
        }
    }
    let hi = (pos + reach).min(entries.len());

    let mut window: Vec<Neighbor> = entries[lo..hi]
        .iter()
        .filter(|e| Some(e.id) != exclude)
        .copied()
        .collect();
    window.sort_by(|a, b| neighbor_order(query, a, b));
    window.truncate(k);
    Ok(window)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsensusVariant {
    #[default]
    Mean,
    Median,
}

impl std::str::FromStr for ConsensusVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => Err(Error::InvalidParameter(format!(
                "unknown consensus variant '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for ConsensusVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Median => "median",
        })
    }
}

pub fn consensus(query: f64, neighbors: &[Neighbor], variant: ConsensusVariant) -> Result<f64> {
    consensus_with(query, neighbors, variant, DEFAULT_DIV_EPS)
}

/// Aggregates the ratio votes `query * target / projected`.
///
/// Neighbors with `|projected| <= div_eps` abstain. If every neighbor
/// abstains, the targets themselves are aggregated instead.
pub fn consensus_with(
    query: f64,
    neighbors: &[Neighbor],
    variant: ConsensusVariant,
    div_eps: f64,
) -> Result<f64> {
    if neighbors.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    let mut votes: Vec<f64> = neighbors
        .iter()
        .filter(|n| n.projected.abs() > div_eps)
        .map(|n| query * n.target / n.projected)
        .collect();
    if votes.is_empty() {
        votes = neighbors.iter().map(|n| n.target).collect();
    }
    Ok(match variant {
        ConsensusVariant::Mean => votes.iter().sum::<f64>() / votes.len() as f64,
        ConsensusVariant::Median => crate::dataset::median(&votes),
    })
}
