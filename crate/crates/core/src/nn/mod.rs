//! Dense/LSTM networks with hand-written reverse-mode gradients, gradient
//! clipping and the two optimisers used by the base-learners.

mod network;
mod optim;

pub use network::{
    Gradients, LayerKind, LayerParams, LayerSpec, Network, NetworkSpec, ParamSet, RecurrentState,
    Tape,
};
pub use optim::{clip_gradients, ClipMode, GradientClip, OptimizerConfig, OptimizerState};
