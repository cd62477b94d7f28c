//! The learned execution-time regressor, its training loop, the linear
//! baseline, evaluation metrics and model serialization.

mod io;
mod linear;
mod metrics;
mod mlp;

pub use io::{load_model, model_from_string, model_to_string, save_model};
pub use linear::{baseline_slots, fit_linear, predict_linear, LinearModel};
pub use metrics::{loss_rmsle, rmse};
pub use mlp::{
    default_hidden_widths, depth_sweep, evaluate, init, train, DepthSweepRow, EpochStats,
    EvalReport, ForwardMode, Gradients, MlpArchitecture, MlpPredictor, TrainConfig,
};
