//! Reference forecasters: persistence, climatology, uniform and linear
//! quantile regression.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::network::{Layer, NetworkConfig, NetworkParams};
use crate::optimizer::{train, TrainConfig};
use crate::quantile::{QuantileLevels, SmoothingConfig};
use crate::scalar::Scalar;

/// Hours of history behind the persistence distribution.
pub const PERSISTENCE_WINDOW: usize = 24;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

// Acklam's rational approximation; relative error 1.15e-9 before refinement.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.38357751867269e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.54967101043147e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Inverse of the standard normal CDF.
///
/// Rational approximation followed by one Halley step against [`normal_cdf`].
/// Upper-tail arguments are reflected so that `q(p) = -q(1 - p)` holds exactly.
pub fn normal_inverse_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs p in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return normal_inverse_cdf(1.0 - p).map(|x| -x);
    }
    let x = acklam_lower(p);
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Normal quantiles from the mean and sample standard deviation of the last
/// [`PERSISTENCE_WINDOW`] values of `history`.
///
/// A constant window yields the constant row. With `clamp_unit` every
/// quantile is clipped to `[0, 1]`.
pub fn persistence_forecast<T: Scalar>(history: &[T], levels: &QuantileLevels, clamp_unit: bool) -> Result<Vec<T>> {
    if history.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "persistence needs at least 2 past observations, got {}",
            history.len()
        )));
    }
    let window = &history[history.len().saturating_sub(PERSISTENCE_WINDOW)..];
    let n = window.len() as f64;
    let mean = window.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n;
    let var = window.iter().map(|v| (v.to_f64_lossy() - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    levels
        .iter()
        .map(|tau| {
            let q = if std == 0.0 { mean } else { mean + std * normal_inverse_cdf(tau)? };
            let q = if clamp_unit { q.clamp(0.0, 1.0) } else { q };
            Ok(T::lit(q))
        })
        .collect()
}

/// Empirical quantiles of `history`, interpolating linearly between order
/// statistics at 1-based position `h = (n - 1) tau + 1`.
pub fn climatology_forecast<T: Scalar>(history: &[T], levels: &QuantileLevels) -> Result<Vec<T>> {
    if history.is_empty() {
        return Err(Error::InvalidConfig("climatology needs a nonempty history".into()));
    }
    let mut sorted = history.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    Ok(levels
        .iter()
        .map(|tau| {
            let pos = (n - 1) as f64 * tau;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = T::lit(pos - lo as f64);
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        })
        .collect())
}

/// Uniform distribution on `[0, 1]`: each quantile equals its level.
pub fn uniform_forecast<T: Scalar>(levels: &QuantileLevels) -> Vec<T> {
    levels.to_scalars()
}

/// Linear multiple quantile regression `q = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQrParams<T> {
    /// `(n_x, M)`; column `m` belongs to level `m`.
    pub weights: Array2<T>,
    pub intercepts: Array1<T>,
    pub levels: QuantileLevels,
}

impl<T: Scalar> LinearQrParams<T> {
    pub fn predict(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.ncols() != self.weights.nrows() {
            return Err(Error::DimensionMismatch {
                context: "linear QR input columns",
                expected: self.weights.nrows(),
                found: x.ncols(),
            });
        }
        let mut out = x.dot(&self.weights);
        out += &self.intercepts;
        Ok(out)
    }

    /// The same model as a single-layer network.
    pub fn to_network(&self) -> NetworkParams<T> {
        let layer = Layer {
            weights: self.weights.t().to_owned(),
            bias: self.intercepts.clone(),
        };
        NetworkParams::new(vec![layer], Default::default()).expect("single layer")
    }

    pub fn from_network(params: &NetworkParams<T>, levels: QuantileLevels) -> Result<Self> {
        if params.layers().len() != 1 {
            return Err(Error::InvalidConfig(format!(
                "linear QR has no hidden layer, network has {}",
                params.layers().len() - 1
            )));
        }
        let layer = &params.layers()[0];
        Ok(Self {
            weights: layer.weights.t().to_owned(),
            intercepts: layer.bias.clone(),
            levels,
        })
    }
}

/// Fits linear quantile regression by minimising the smooth composite
/// objective with the network optimizer and no hidden layer.
pub fn train_linear_qr<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    levels: &QuantileLevels,
    smoothing: &SmoothingConfig,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LinearQrParams<T>> {
    let net = NetworkConfig::linear(x.ncols(), seed);
    let trained = train(x, y, levels, &net, smoothing, cfg)?;
    LinearQrParams::from_network(&trained.params, levels.clone())
}
