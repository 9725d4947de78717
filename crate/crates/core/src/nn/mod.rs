//! Small deterministic neural-network engine: dense and GRU layers,
//! activations, losses, Adam, and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod gru;
mod layers;
mod loss;
mod matrix;
mod mlp;
mod param;

pub use adam::{adam_step, Adam, AdamConfig};
pub use gradcheck::{grad_check, relative_error, GradCheckOptions};
pub use gru::{gru_cell_step, GruCell, GruStep};
pub use layers::{
    dropout, linear_backward, linear_forward, relu, relu_backward, sigmoid, DropoutMask, Linear,
};
pub use loss::{
    cosine_similarity, cosine_similarity_grad, cross_entropy_loss, ranking_loss,
    ranking_loss_grad, softmax, softmax_cross_entropy, TripletGrad, PROB_FLOOR,
};
pub use matrix::{dot, norm, Matrix};
pub use mlp::{Mlp, MlpTrace};
pub use param::{Parameter, Parameterized};
