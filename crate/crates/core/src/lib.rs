//! Supervised learning by linearization.
//!
//! Training data is mapped through a fitted multilinear projection
//! `y' = w0 + w . x`. A query is answered from the `k` training points whose
//! projections lie closest to its own, each contributing the ratio vote
//! `y' * t_j / y'_j`. Binary classifiers first refine per-point pseudo-labels
//! to a fixpoint ([`training::learn`]) and threshold the consensus at 0.5.
//!
//! ```
//! use linearization::{generate_synthetic, split_dataset, train_binary, SyntheticFn, SyntheticMode, TrainConfig};
//!
//! let data = generate_synthetic(SyntheticFn::Sqrt, 300, (0.0, 100.0), SyntheticMode::BinarizedAtMedian, 7)?;
//! let (train, test) = split_dataset(&data, 0.64, 7)?;
//! let model = train_binary(&train, &TrainConfig { k: 5, ..Default::default() })?;
//! let correct = test.examples.iter().filter(|e| model.predict(&e.features).unwrap() == e.target).count();
//! assert!(correct as f64 / test.len() as f64 > 0.9);
//! # Ok::<(), linearization::Error>(())
//! ```

pub mod baselines;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod multiclass;
pub mod persist;
pub mod projection;
pub mod training;

pub use baselines::{knn_baseline_predict, logistic_predict, logistic_train, LogisticModel};
pub use bench::{run_benchmark, run_benchmark_file, Algorithm, BenchReport, BenchSpec};
pub use dataset::{
    generate_synthetic, parse_libsvm, parse_libsvm_with_map, read_libsvm_file, split_dataset,
    write_libsvm, Dataset, Example, LabelMap, SparseVector, SyntheticFn, SyntheticMode, Task,
};
pub use error::{Error, ErrorKind, Result};
pub use eval::{evaluate, Metrics};
pub use multiclass::{predict_ovr, train_ovr, OvrModel};
pub use persist::{read_any, read_model, read_ovr, write_model, write_ovr, AnyModel};
pub use projection::{
    build_index, consensus, k_nearest, project, ConsensusVariant, Neighbor, NeighborIndex,
    Projection,
};
pub use training::{
    fit_projection, init_pseudo_labels, learn, learn_step, predict, train, train_binary,
    train_regression, tune_k, LearnOutcome, Model, PseudoLabelState, TrainConfig,
};
