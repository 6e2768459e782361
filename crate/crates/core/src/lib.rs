//! Sensor ranking and selection for labeled multivariate time series.
//!
//! Each feature (sensor) is turned into a k-nearest-neighbor similarity graph
//! over the segments, using dynamic time warping for series, absolute
//! difference for scalars and 0/1 mismatch for categories. Features are then
//! either ranked by how well a power-iteration embedding of their graph
//! agrees with the labels, or selected jointly by a sparse nonnegative fit of
//! their graphs to the label graph with a redundancy penalty.

pub mod dataset;
pub mod distance;
pub mod error;
pub mod eval;
pub mod graph;
pub mod info;
pub mod matrix;
pub mod pipeline;
pub mod ranker;
pub mod rng;
pub mod select;
pub mod solver;
pub mod spectral;
pub mod synthetic;

pub use dataset::{load_dataset, split, write_dataset, Dataset, FeatureDescriptor, FeatureKind, Segment, Value};
pub use distance::{all_distance_matrices, DistanceCache, DistanceMatrix, DistanceParams};
pub use error::{Error, Result};
pub use eval::{accuracy, aggregate, aggregate_graphs, nn1_classify, AggregatedDistance};
pub use graph::SimilarityGraph;
pub use info::{RedundancyKind, RedundancyMatrix};
pub use matrix::SquareMatrix;
pub use ranker::{pie_rank, pie_rank_with, RankParams, RankResult};
pub use select::{pie_ss, pie_ss_with, LambdaChoice, NystromChoice, SelectParams, SelectionResult};
pub use solver::{SolveResult, SolverOptions};
pub use spectral::{Embedding, PieParams};
pub use synthetic::{gen_synthetic, SyntheticSpec};
