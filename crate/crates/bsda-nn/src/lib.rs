//! Tape-based reverse-mode autodiff, conv-net building blocks, and the
//! three-branch segmentation network with its fused classifier.

pub mod adam;
pub mod checkpoint;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod model;
pub mod tensor;
pub mod train;

pub use adam::AdamState;
pub use checkpoint::{load_model, model_from_checkpoint, model_to_checkpoint, save_model};
pub use eval::{evaluate, ClsSummary, EvalReport, SegSummary};
pub use gradcheck::{check_all_ops, GradCheckResult};
pub use graph::{BnRunning, Graph, GraphError, NodeId};
pub use kernels::ConvDims;
pub use model::{Ablation, BsdaConfig, BsdaModel, ModelError, ParamGroup, Pyramids, SegOut};
pub use tensor::{Tensor, TensorError};
pub use train::{history_csv, prepare_samples, EpochLosses, GeoAug, TrainSample, Trainer};
