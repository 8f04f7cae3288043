//! Find the k most statistically interesting multidimensional aggregates
//! hiding in an RDF graph.
//!
//! The pipeline: load a graph, pick a candidate fact set (all subjects of a
//! type, or all subjects sharing properties), derive extra attributes
//! (value counts, keywords, languages, one-hop paths), enumerate aggregate
//! lattices whose roots are maximal frequent dimension sets, then evaluate
//! every lattice in a single pass over the data. Fact identity travels down
//! the lattice in compressed bitmaps, which keeps counts and sums correct
//! when dimensions are multi-valued (a CEO with four nationalities is still
//! one CEO). A sampling front end prunes aggregates whose interestingness
//! confidence interval cannot reach the current top k.
//!
//! Modules map onto pipeline stages:
//!
//! * [`graph`]: triple store, N-Triples and CSV loading, fact set selection
//! * [`attrs`]: attribute statistics, derivations, per-fact pre-aggregation
//! * [`plan`]: dimension filtering, frequent-set mining, lattice construction
//! * [`bitmap`]: the compressed fact-id set used by the cube engine
//! * [`cube`]: dimension encodings, minimum-memory spanning tree, one-pass
//!   evaluation with bitmap propagation
//! * [`sample`]: reservoir sampling and confidence-interval based pruning
//! * [`stats`]: the scalar-generic estimator kernel (variance, skewness,
//!   kurtosis, gradients, delta-method intervals)
//! * [`score`]: scoring, top-k selection, report rendering
//! * [`oracle`]: a naive reference evaluator, an aggregate-error simulator,
//!   and synthetic data generators for benchmarks
//! * [`cli`]: the `graphcube` command line

pub mod attrs;
pub mod bitmap;
pub mod cli;
pub mod cube;
pub mod error;
pub mod graph;
pub mod num;
pub mod oracle;
pub mod plan;
pub mod sample;
pub mod samples;
pub mod score;
pub mod stats;

pub use error::GraphCubeError;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, GraphCubeError>;

/// Delta-method confidence interval over `f64`, the scalar the engine runs on.
pub type Ci64 = stats::Ci<f64>;
/// Delta-method confidence interval over `f32`.
pub type Ci32 = stats::Ci<f32>;
