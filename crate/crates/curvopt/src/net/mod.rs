//! Small dense MLP with periodic input embeddings and exact differentiation
//! (input jets up to second order recorded on a scalar tape, parameter
//! gradients by reverse sweep).

pub mod mlp;
pub mod tape;

pub use mlp::{
    eval_input_hessian_full, eval_with_derivs, forward_on_tape, init_params, load_params,
    param_jacobian_rows, pushforward, save_params, Activation, Embedding, JetDir, JetNodes,
    JetOut, JetReq, MlpSpec, NetEval,
};
pub use tape::{NodeId, Tape};
