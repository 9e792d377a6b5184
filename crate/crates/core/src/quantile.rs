//! Pinball losses, their logistic smoothing and the non-crossing penalty.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::scalar::Scalar;

/// Strictly increasing quantile levels, each in the open interval (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidLevels("at least one level is required".into()));
        }
        for (i, &tau) in levels.iter().enumerate() {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::InvalidLevels(format!(
                    "level {i} = {tau} is outside (0, 1)"
                )));
            }
            if i > 0 && tau <= levels[i - 1] {
                return Err(Error::InvalidLevels(format!(
                    "levels must be strictly increasing ({} then {tau})",
                    levels[i - 1]
                )));
            }
        }
        Ok(Self(levels))
    }

    /// Evenly spaced percentiles `from/100, (from+step)/100, ..., to/100`.
    pub fn percent_grid(from: u32, to: u32, step: u32) -> Result<Self> {
        if step == 0 {
            return Err(Error::InvalidLevels("grid step must be positive".into()));
        }
        Self::new(
            (from..=to)
                .step_by(step as usize)
                .map(|k| f64::from(k) / 100.0)
                .collect(),
        )
    }

    /// The 99 percentiles 0.01..=0.99 scored in GEFCom2014.
    pub fn gefcom() -> Self {
        Self::percent_grid(1, 99, 1).expect("static grid")
    }

    /// 0.05..=0.95 in steps of 0.05: nine central intervals (10%..90%) plus the median.
    pub fn intervals() -> Self {
        Self::percent_grid(5, 95, 5).expect("static grid")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.0.iter().map(|&t| T::lit(t)).collect()
    }

    /// Levels agree within `1e-9` elementwise.
    pub fn approx_eq(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self.iter().zip(other.iter()).all(|(a, b)| (a - b).abs() < 1e-9)
    }
}

impl TryFrom<Vec<f64>> for QuantileLevels {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<QuantileLevels> for Vec<f64> {
    fn from(l: QuantileLevels) -> Self {
        l.0
    }
}

/// Accepts `gefcom`, `intervals` or a comma separated list of levels.
impl FromStr for QuantileLevels {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gefcom" => Ok(Self::gefcom()),
            "intervals" => Ok(Self::intervals()),
            list => {
                let levels = list
                    .split(',')
                    .map(|p| {
                        p.trim().parse::<f64>().map_err(|e| {
                            Error::InvalidLevels(format!("cannot parse level {p:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::new(levels)
            }
        }
    }
}

impl fmt::Display for QuantileLevels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Smoothing, crossing-penalty and weight-decay settings of the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingConfig {
    /// Smoothing parameter of the logistic pinball approximation.
    pub alpha: f64,
    /// Weight of the squared-hinge crossing penalty.
    pub penalty_c: f64,
    /// Minimum gap required between adjacent quantiles.
    pub penalty_eps: f64,
    /// Weight decay on the input layer.
    pub lambda1: f64,
    /// Weight decay on the output layer.
    pub lambda2: f64,
    /// Weight decay on hidden-to-hidden layers (two or more hidden layers).
    pub lambda_hidden: f64,
    /// Also penalise the lowest quantile for falling below zero.
    pub include_zero_floor: bool,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            penalty_c: 1000.0,
            penalty_eps: 0.0,
            lambda1: 0.01,
            lambda2: 0.01,
            lambda_hidden: 0.01,
            include_zero_floor: false,
        }
    }
}

impl SmoothingConfig {
    /// Plain averaged smooth pinball loss: no penalty, no weight decay.
    pub fn unpenalized(alpha: f64) -> Self {
        Self {
            alpha,
            penalty_c: 0.0,
            penalty_eps: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            lambda_hidden: 0.0,
            include_zero_floor: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        let named = [
            ("penalty_c", self.penalty_c),
            ("penalty_eps", self.penalty_eps),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda_hidden", self.lambda_hidden),
        ];
        for (name, v) in named {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Weight-decay coefficient of weight matrix `layer` out of `n_layers`.
    ///
    /// The first matrix uses `lambda1`, the last `lambda2`, anything between
    /// `lambda_hidden`. A single-matrix (linear) model uses `lambda1`.
    pub fn weight_decay(&self, layer: usize, n_layers: usize) -> f64 {
        if layer == 0 {
            self.lambda1
        } else if layer + 1 == n_layers {
            self.lambda2
        } else {
            self.lambda_hidden
        }
    }
}

/// Matrix of estimated quantiles: row `t` holds all `M` levels for observation `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastMatrix<T> {
    values: Array2<T>,
    levels: QuantileLevels,
}

impl<T: Scalar> ForecastMatrix<T> {
    pub fn new(values: Array2<T>, levels: QuantileLevels) -> Result<Self> {
        if values.ncols() != levels.len() {
            return Err(Error::DimensionMismatch {
                context: "forecast matrix columns",
                expected: levels.len(),
                found: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("forecast matrix contains non-finite entries".into()));
        }
        Ok(Self { values, levels })
    }

    pub fn from_rows(rows: &[Vec<T>], levels: QuantileLevels) -> Result<Self> {
        let m = levels.len();
        let mut values = Array2::zeros((rows.len(), m));
        for (t, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "forecast row length",
                    expected: m,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                values[[t, j]] = v;
            }
        }
        Self::new(values, levels)
    }

    pub fn values(&self) -> ArrayView2<'_, T> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    pub fn levels(&self) -> &QuantileLevels {
        &self.levels
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_levels(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, t: usize) -> ArrayView1<'_, T> {
        self.values.row(t)
    }

    /// Number of adjacent pairs with `q[m] - q[m-1] < -tol`.
    pub fn crossings(&self, tol: T) -> usize {
        self.values
            .rows()
            .into_iter()
            .map(|row| count_row_crossings(row, tol))
            .sum()
    }

    /// Largest adjacent violation `max(q[m-1] - q[m])`, or zero when ordered.
    pub fn max_crossing_gap(&self) -> T {
        let mut worst = T::zero();
        for row in self.values.rows() {
            for m in 1..row.len() {
                worst = worst.max(row[m - 1] - row[m]);
            }
        }
        worst
    }
}

pub(crate) fn count_row_crossings<T: Scalar>(row: ArrayView1<'_, T>, tol: T) -> usize {
    (1..row.len()).filter(|&m| row[m] - row[m - 1] < -tol).count()
}

/// Pinball (check) loss of residual `u = y - q`.
#[inline]
pub fn pinball_loss<T: Scalar>(u: T, tau: T) -> T {
    if u >= T::zero() {
        tau * u
    } else {
        (tau - T::one()) * u
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))` without overflow.
#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Logistic smoothing of the pinball loss: `tau*u + alpha*log(1 + exp(-u/alpha))`.
///
/// Evaluated as `pinball(u) + smoothing_gap(u)`, which is the same function
/// but never rounds below the pinball loss.
#[inline]
pub fn smooth_pinball<T: Scalar>(u: T, tau: T, alpha: T) -> T {
    pinball_loss(u, tau) + smoothing_gap(u, alpha)
}

/// `alpha * log(1 + exp(-|u|/alpha))`: the excess of the smooth loss over
/// the pinball loss. Lies in `(0, alpha ln 2]` but underflows to zero once
/// `|u|/alpha` exceeds roughly 745 in `f64`.
#[inline]
pub fn smoothing_gap<T: Scalar>(u: T, alpha: T) -> T {
    alpha * (-u.abs() / alpha).exp().ln_1p()
}

/// Natural log of [`smoothing_gap`], finite for every finite `u`.
pub fn ln_smoothing_gap<T: Scalar>(u: T, alpha: T) -> T {
    let z = u.abs() / alpha;
    let ln_softplus = if z > T::lit(30.0) {
        // log(log1p(e^-z)) = -z + log1p(-e^-z/2 + ...)
        let e = (-z).exp();
        -z + (-e / T::lit(2.0) + e * e / T::lit(3.0)).ln_1p()
    } else {
        (-z).exp().ln_1p().ln()
    };
    alpha.ln() + ln_softplus
}

/// Derivative of [`smooth_pinball`] with respect to the residual `u`.
#[inline]
pub fn smooth_pinball_grad<T: Scalar>(u: T, tau: T, alpha: T) -> T {
    tau - sigmoid(-u / alpha)
}

/// Hinge violations `max(0, eps - gap)` of a quantile row, in order.
///
/// With the zero floor enabled the first entry compares the lowest quantile to zero.
fn for_each_violation<T: Scalar>(
    row: ArrayView1<'_, T>,
    eps: T,
    zero_floor: bool,
    mut f: impl FnMut(Option<usize>, usize, T),
) {
    if row.is_empty() {
        return;
    }
    if zero_floor {
        let v = eps - row[0];
        if v > T::zero() {
            f(None, 0, v);
        }
    }
    for m in 1..row.len() {
        let v = eps - (row[m] - row[m - 1]);
        if v > T::zero() {
            f(Some(m - 1), m, v);
        }
    }
}

/// Squared-hinge crossing penalty `c * sum max(0, eps - (q[m] - q[m-1]))^2` of one row.
pub fn crossing_penalty<T: Scalar>(row: ArrayView1<'_, T>, cfg: &SmoothingConfig) -> T {
    let mut acc = T::zero();
    for_each_violation(
        row,
        T::lit(cfg.penalty_eps),
        cfg.include_zero_floor,
        |_, _, v| acc += v * v,
    );
    T::lit(cfg.penalty_c) * acc
}

/// Gradient of [`crossing_penalty`] with respect to each quantile of the row.
pub fn crossing_penalty_grad<T: Scalar>(row: ArrayView1<'_, T>, cfg: &SmoothingConfig) -> Vec<T> {
    let mut grad = vec![T::zero(); row.len()];
    accumulate_penalty_grad(row, cfg, T::one(), &mut grad);
    grad
}

/// Adds `scale * d penalty / d q` into `out`.
pub(crate) fn accumulate_penalty_grad<T: Scalar>(
    row: ArrayView1<'_, T>,
    cfg: &SmoothingConfig,
    scale: T,
    out: &mut [T],
) {
    let two_c = T::lit(2.0 * cfg.penalty_c) * scale;
    if two_c == T::zero() {
        return;
    }
    for_each_violation(
        row,
        T::lit(cfg.penalty_eps),
        cfg.include_zero_floor,
        |lower, upper, v| {
            out[upper] -= two_c * v;
            if let Some(l) = lower {
                out[l] += two_c * v;
            }
        },
    );
}

/// Averaged smooth pinball loss plus averaged crossing penalty over a batch.
///
/// Both terms are divided by `N * M`, where `N` is the number of rows.
pub fn data_objective<T: Scalar>(
    forecasts: ArrayView2<'_, T>,
    targets: ArrayView1<'_, T>,
    taus: &[T],
    cfg: &SmoothingConfig,
) -> Result<T> {
    check_batch(forecasts, targets, taus)?;
    let alpha = T::lit(cfg.alpha);
    let mut loss = T::zero();
    let mut penalty = T::zero();
    for (row, &y) in forecasts.rows().into_iter().zip(targets.iter()) {
        for (&q, &tau) in row.iter().zip(taus) {
            loss += smooth_pinball(y - q, tau, alpha);
        }
        if cfg.penalty_c > 0.0 {
            penalty += crossing_penalty(row, cfg);
        }
    }
    let nm = T::from_usize(forecasts.nrows() * taus.len()).expect("batch size");
    Ok((loss + penalty) / nm)
}

pub(crate) fn check_batch<T: Scalar>(
    forecasts: ArrayView2<'_, T>,
    targets: ArrayView1<'_, T>,
    taus: &[T],
) -> Result<()> {
    if forecasts.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "targets vs forecast rows",
            expected: forecasts.nrows(),
            found: targets.len(),
        });
    }
    if forecasts.ncols() != taus.len() {
        return Err(Error::DimensionMismatch {
            context: "forecast columns vs quantile levels",
            expected: taus.len(),
            found: forecasts.ncols(),
        });
    }
    if forecasts.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            context: "batch rows",
            expected: 1,
            found: 0,
        });
    }
    Ok(())
}

/// Full training objective: weight decay, averaged smooth pinball loss and
/// averaged crossing penalty.
///
/// `E = sum_l lambda_l/(2NM) ||W_l||_F^2 + 1/(NM) sum_{t,m} S(y_t - q_tm) + p/(NM)`.
pub fn composite_objective<T: Scalar>(
    forecasts: &ForecastMatrix<T>,
    targets: ArrayView1<'_, T>,
    params: &NetworkParams<T>,
    cfg: &SmoothingConfig,
) -> Result<T> {
    let taus = forecasts.levels().to_scalars::<T>();
    if params.output_dim() != taus.len() {
        return Err(Error::DimensionMismatch {
            context: "network outputs vs quantile levels",
            expected: taus.len(),
            found: params.output_dim(),
        });
    }
    let data = data_objective(forecasts.values(), targets, &taus, cfg)?;
    Ok(data + weight_decay_term(params, cfg, forecasts.n_obs() * taus.len()))
}

pub(crate) fn weight_decay_term<T: Scalar>(
    params: &NetworkParams<T>,
    cfg: &SmoothingConfig,
    nm: usize,
) -> T {
    let n_layers = params.layers().len();
    let denom = T::lit(2.0) * T::from_usize(nm).expect("batch size");
    params
        .layers()
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            let lambda = T::lit(cfg.weight_decay(l, n_layers));
            lambda * layer.weights.iter().map(|&w| w * w).sum::<T>() / denom
        })
        .sum()
}
