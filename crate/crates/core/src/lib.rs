//! Corpus engine and evaluation harness for dual-mode (fast/slow) planning models.
//!
//! The pipeline runs in five stages, each a module:
//!
//! - [`grid`]: seeded Maze and Sokoban task generation, canonical task records and fingerprints.
//! - [`search`]: randomized A* that records `create`/`close` traces, plus exact BFS oracles.
//! - [`tokenize`]: the token vocabulary, prompt/response codecs and the tolerant rollout parser.
//! - [`dropping`]: structured trace dropping (levels 1-4) and categorical level sampling.
//! - [`corpus`]: raw datasets, disjoint train/eval splits and per-epoch dropped training files.
//! - [`eval`]: plan validation and the k-Solved/k-Optimal/SWC/diversity/trace-length metrics.
//!
//! Metric arithmetic is generic over [`Scalar`], so reports can be produced in `f32`, `f64`
//! or exact rationals. The aliases below pin the common choices.

pub mod corpus;
pub mod dropping;
pub mod eval;
pub mod grid;
pub mod scalar;
pub mod search;
pub mod seed;
pub mod tokenize;

pub use scalar::Scalar;

/// Arbitrary-precision rational used for exact metric computation.
pub type Rational = num::BigRational;

pub type TaskMetrics = eval::TaskMetrics<f64>;
pub type AggregateReport = eval::AggregateReport<f64>;
pub type ExactTaskMetrics = eval::TaskMetrics<Rational>;
pub type ExactAggregateReport = eval::AggregateReport<Rational>;
pub type Evaluation = eval::Evaluation<f64>;
pub type ExactEvaluation = eval::Evaluation<Rational>;
