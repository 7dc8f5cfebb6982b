//! Loss landscape visualization and trajectory analysis for graph neural networks.
//!
//! The pipeline: train a small GNN (GCN/GAT/GIN) on a node-classification graph
//! while snapshotting the flattened parameter vector every epoch, build the
//! snapshot difference matrix around the selected optimum, compute a 2D basis
//! (filter-normalized random directions, PCA, or a learnable projection fit by
//! gradient descent), evaluate the loss over a 2D grid through the optimum, and
//! project the optimizer trajectory into the same plane. Results are exported
//! as CSV/JSON/SVG.

pub mod backward;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod landscape;
pub mod mat;
pub mod model;
pub mod optim;
pub mod params;
pub mod projection;
pub mod snapshot;
pub mod svg;
pub mod train;

pub use error::{Error, Result};
pub use graph::{Graph, PropagationOperator};
pub use mat::Mat;
pub use model::{Architecture, JumpingKnowledge, ModelConfig};
pub use params::{FlatParams, ParamLayout};
pub use projection::{DifferenceMatrix, DirectionPair, Projection2D, ProjectionMethod};
pub use train::TrainRecord;
