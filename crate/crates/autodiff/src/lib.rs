//! Small reverse-mode differentiation engine for the learners in this
//! workspace: dense `f64` tensors, a per-minibatch graph, MLP layers,
//! RMSProp and finite-difference gradient checks.

mod graph;
mod gradcheck;
mod mlp;
mod optim;
mod params;
mod tensor;

pub use graph::{log_sum_exp, softmax_rows, BoundParams, Gradients, Graph, Var};
pub use gradcheck::{check_gradients, grad_check, relative_error, GradCheckReport, FD_STEP, REL_ERROR_FLOOR};
pub use mlp::{Activation, Mlp};
pub use optim::{clip_grad_norm, RmsProp, RmsPropConfig};
pub use params::{ParamId, ParamSet, CHECKPOINT_FORMAT_VERSION};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("non-finite gradient in parameter `{name}` (tensor #{index})")]
    NonFiniteGradient { name: String, index: usize },
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
