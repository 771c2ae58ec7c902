//! Dense layers with hand-written backward passes.
//!
//! Each layer exposes `forward` returning its output plus whatever it needs
//! for `backward`, and `backward` accumulating parameter gradients into a
//! zeroed clone of the layer (see [`Parameters::zeros_like`]).

mod activation;
mod gradcheck;
mod linear;
mod loss;
mod norm;
mod params;

use serde::{Deserialize, Serialize};

pub use activation::{relu_backward, relu_forward, sigmoid};
pub use gradcheck::{
    finite_diff_check, finite_diff_check_with, GradCheck, Stencil, DEFAULT_FD_EPS, MAGNITUDE_FLOOR,
};
pub use linear::{linear_backward, linear_forward, Linear};
pub use loss::{log_sum_exp, softmax_cross_entropy, softmax_rows};
pub use norm::{
    BatchNorm, BatchNormCache, BatchNormConfig, LayerNorm, LayerNormCache, BN_EPS, BN_MOMENTUM,
    LN_EPS,
};
pub use params::{ParamKind, Parameters};

pub(crate) use params::join;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}
