//! Dense numerics and the separable critic network.
//!
//! The critic embeds `x` and `z` with two tanh MLPs, joins the embeddings by
//! cosine similarity and squashes through a scaled `tanh` head so every score
//! lies in a known interval `[L, U]`. Gradients are computed by hand-written
//! reverse mode over this fixed architecture.

mod adam;
mod critic;
mod matrix;

pub use adam::{adam_step, AdamState};
pub use critic::{
    Critic, CriticRecord, EncoderTrace, ForwardTrace, GradientTape, MlpEncoder, NORM_EPS,
};
pub use matrix::Matrix;
