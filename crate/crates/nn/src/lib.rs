//! Dense f64 tensors with reverse-mode autodiff, the transformer and MLP
//! classifiers, AdamW, the learning-rate schedule, checkpoints and
//! integrated-gradients attribution.

mod checkpoint;
mod error;
mod gradcheck;
mod graph;
mod ig;
mod model;
mod optim;
mod tensor;

pub use checkpoint::{read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to};
pub use error::{NnError, Result};
pub use gradcheck::{finite_difference_check, toy_batch, toy_spec, GradCheck, GRADCHECK_FLOOR};
pub use graph::{softmax_rows, Graph, Var, LAYER_NORM_EPS};
pub use ig::{integrate_path, integrated_gradients, Attribution};
pub use model::{Batch, InitConfig, Model, ModelSpec, Param, ParamVars, Variant, AOI_VOCAB};
pub use optim::{lr_at, AdamW, TrainConfig};
pub use tensor::Tensor;
