//! Non-crossing multiple quantile regression with smooth pinball neural networks.
//!
//! A feedforward network emits `M` conditional quantiles at once. It is
//! trained with Adam on a logistic smoothing of the pinball loss, with a
//! squared-hinge penalty that pushes adjacent quantiles apart. The crate also
//! carries the usual benchmark forecasters (persistence, climatology,
//! uniform and linear quantile regression), the probabilistic scoring
//! measures (QS, QVSS, PICP, ACE, sharpness, interval score) and the data
//! plumbing for hourly wind-power backtests on a monthly sliding window.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` and `*32` aliases below name the common instantiations.

pub mod backtest;
pub mod baselines;
pub mod data;
pub mod error;
pub mod io;
pub mod metrics;
pub mod network;
pub mod optimizer;
pub mod quantile;
pub mod scalar;
pub mod synth;

pub use backtest::{ExperimentConfig, ModelKind};
pub use data::{Dataset, FeatureStats, Window, WindowPlan, YearMonth};
pub use error::{Error, Result};
pub use io::ModelFile;
pub use metrics::{evaluate, EvaluationReport, IntervalSet};
pub use network::{backward, forward, init_params, predict, Activation, ForwardCache, Layer, NetworkConfig, NetworkParams};
pub use optimizer::{adam_step, gradient_check, train, AdamState, GradCheck, TrainConfig, Trained};
pub use quantile::{
    composite_objective, crossing_penalty, crossing_penalty_grad, pinball_loss, smooth_pinball,
    smooth_pinball_grad, ForecastMatrix, QuantileLevels, SmoothingConfig,
};
pub use scalar::Scalar;

pub type NetworkParams64 = NetworkParams<f64>;
pub type NetworkParams32 = NetworkParams<f32>;
pub type ForecastMatrix64 = ForecastMatrix<f64>;
pub type ForecastMatrix32 = ForecastMatrix<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type Dataset32 = data::Dataset<f32>;
pub type LinearQr64 = baselines::LinearQrParams<f64>;
pub type Trained64 = Trained<f64>;

