//! Small dense engine: matrices, affine/LSTM/MLP layers with hand-written
//! backward passes, losses, Adam, and a finite-difference checker.

mod affine;
mod gradcheck;
mod loss;
mod lstm;
mod mlp;
mod optim;
mod param;
mod tensor;

pub use affine::{affine, affine_backward, Affine, AffineGrads};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, FD_STEP, FULL_CHECK_LIMIT};
pub use loss::{check_distribution, exp_l2_loss, softmax, softmax_cross_entropy};
pub use lstm::{BiLstm, BiLstmTrace, Lstm, StepCache, StepGrads};
pub use mlp::{sigmoid, Activation, Mlp, MlpTrace};
pub use optim::{Adam, AdamConfig};
pub use param::{Gradients, ParamId, ParamSet};
pub use tensor::Matrix;
