//! Scoring of quantile and interval forecasts.
//!
//! All measures are accumulated in `f64` whatever the forecast scalar type.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{pinball_loss, ForecastMatrix, QuantileLevels};
use crate::scalar::Scalar;

/// A central prediction interval built from two quantile columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalPair {
    pub lower: usize,
    pub upper: usize,
    /// Nominal coverage `1 - beta = tau_u - tau_l`.
    pub coverage: f64,
}

impl IntervalPair {
    pub fn beta(&self) -> f64 {
        1.0 - self.coverage
    }

    /// Nominal confidence in percent.
    pub fn pinc(&self) -> f64 {
        100.0 * self.coverage
    }
}

/// Central prediction intervals, ordered by increasing nominal coverage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IntervalSet {
    pairs: Vec<IntervalPair>,
}

const PAIR_TOL: f64 = 1e-9;

impl IntervalSet {
    pub fn new(pairs: Vec<IntervalPair>, levels: &QuantileLevels) -> Result<Self> {
        let taus = levels.as_slice();
        for p in &pairs {
            if p.lower >= taus.len() || p.upper >= taus.len() {
                return Err(Error::DimensionMismatch {
                    context: "interval column index",
                    expected: taus.len(),
                    found: p.lower.max(p.upper),
                });
            }
            let (tl, tu) = (taus[p.lower], taus[p.upper]);
            if (tl + tu - 1.0).abs() > PAIR_TOL || ((tu - tl) - p.coverage).abs() > PAIR_TOL || tu <= tl {
                return Err(Error::InvalidLevels(format!(
                    "levels {tl} and {tu} do not form a central interval of coverage {}",
                    p.coverage
                )));
            }
        }
        Ok(Self { pairs })
    }

    /// Pairs every level `tau < 0.5` with the level `1 - tau`, if present.
    /// Unpaired levels (such as the median) are left out.
    pub fn from_levels(levels: &QuantileLevels) -> Self {
        let taus = levels.as_slice();
        let mut pairs: Vec<IntervalPair> = taus
            .iter()
            .enumerate()
            .filter(|(_, &t)| t < 0.5 - PAIR_TOL)
            .filter_map(|(l, &tl)| {
                taus.iter()
                    .position(|&tu| (tu - (1.0 - tl)).abs() < PAIR_TOL)
                    .map(|u| IntervalPair {
                        lower: l,
                        upper: u,
                        coverage: taus[u] - tl,
                    })
            })
            .collect();
        pairs.sort_by(|a, b| a.coverage.total_cmp(&b.coverage));
        Self { pairs }
    }

    pub fn pairs(&self) -> &[IntervalPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pinc(&self) -> Vec<f64> {
        self.pairs.iter().map(IntervalPair::pinc).collect()
    }
}

fn check_rows<T: Scalar>(forecasts: &ForecastMatrix<T>, y: ArrayView1<'_, T>) -> Result<()> {
    if forecasts.n_obs() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "observations vs forecast rows",
            expected: forecasts.n_obs(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "observations",
            expected: 1,
            found: 0,
        });
    }
    Ok(())
}

/// Mean pinball loss over all observations and levels.
pub fn quantile_score<T: Scalar>(forecasts: &ForecastMatrix<T>, y: ArrayView1<'_, T>) -> Result<f64> {
    Ok(per_level_quantile_score(forecasts, y)?.iter().sum::<f64>() / forecasts.n_levels() as f64)
}

/// Mean pinball loss of each level over the observations.
pub fn per_level_quantile_score<T: Scalar>(forecasts: &ForecastMatrix<T>, y: ArrayView1<'_, T>) -> Result<Vec<f64>> {
    check_rows(forecasts, y)?;
    let n = y.len() as f64;
    let values = forecasts.values();
    Ok(forecasts
        .levels()
        .iter()
        .enumerate()
        .map(|(m, tau)| {
            values
                .column(m)
                .iter()
                .zip(y.iter())
                .map(|(&q, &obs)| pinball_loss(obs.to_f64_lossy() - q.to_f64_lossy(), tau))
                .sum::<f64>()
                / n
        })
        .collect())
}

/// Quantile verification skill score `1 - qs / qs_ref`.
pub fn qvss(qs_forecast: f64, qs_reference: f64) -> Result<f64> {
    if !(qs_reference > 0.0) {
        return Err(Error::UndefinedReference(qs_reference));
    }
    Ok(1.0 - qs_forecast / qs_reference)
}

/// Fraction of observations inside each closed interval `[l, u]`.
pub fn picp<T: Scalar>(forecasts: &ForecastMatrix<T>, y: ArrayView1<'_, T>, intervals: &IntervalSet) -> Result<Vec<f64>> {
    check_rows(forecasts, y)?;
    let values = forecasts.values();
    let n = y.len() as f64;
    Ok(intervals
        .pairs()
        .iter()
        .map(|p| {
            let inside = y
                .iter()
                .enumerate()
                .filter(|&(t, &obs)| values[[t, p.lower]] <= obs && obs <= values[[t, p.upper]])
                .count();
            inside as f64 / n
        })
        .collect())
}

/// Sum over levels of `|100 * picp - pinc|`, in percent.
pub fn ace(picp: &[f64], pinc: &[f64]) -> Result<f64> {
    if picp.len() != pinc.len() {
        return Err(Error::DimensionMismatch {
            context: "picp vs pinc",
            expected: pinc.len(),
            found: picp.len(),
        });
    }
    Ok(picp.iter().zip(pinc).map(|(p, n)| (100.0 * p - n).abs()).sum())
}

/// [`ace`] divided by the number of coverage levels.
pub fn ace_mean(picp: &[f64], pinc: &[f64]) -> Result<f64> {
    let total = ace(picp, pinc)?;
    Ok(if picp.is_empty() { 0.0 } else { total / picp.len() as f64 })
}

/// Interval widths: one mean per coverage level and the grand mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sharpness {
    pub per_level: Vec<f64>,
    pub mean: f64,
    /// Intervals with `u < l`; they enter the means with negative width.
    pub crossed: usize,
}

pub fn sharpness<T: Scalar>(forecasts: &ForecastMatrix<T>, intervals: &IntervalSet) -> Sharpness {
    let values = forecasts.values();
    let n = forecasts.n_obs() as f64;
    let mut crossed = 0;
    let per_level: Vec<f64> = intervals
        .pairs()
        .iter()
        .map(|p| {
            let mut total = 0.0;
            for t in 0..forecasts.n_obs() {
                let width = values[[t, p.upper]].to_f64_lossy() - values[[t, p.lower]].to_f64_lossy();
                if width < 0.0 {
                    crossed += 1;
                }
                total += width;
            }
            total / n
        })
        .collect();
    let mean = if per_level.is_empty() {
        0.0
    } else {
        per_level.iter().sum::<f64>() / per_level.len() as f64
    };
    if crossed > 0 {
        log::warn!("{crossed} crossed prediction intervals counted with negative width");
    }
    Sharpness { per_level, mean, crossed }
}

fn interval_terms<T: Scalar>(
    forecasts: &ForecastMatrix<T>,
    y: ArrayView1<'_, T>,
    intervals: &IntervalSet,
) -> Vec<f64> {
    let values = forecasts.values();
    intervals
        .pairs()
        .iter()
        .map(|p| {
            let beta = p.beta();
            y.iter()
                .enumerate()
                .map(|(t, &obs)| {
                    let (l, u, obs) = (
                        values[[t, p.lower]].to_f64_lossy(),
                        values[[t, p.upper]].to_f64_lossy(),
                        obs.to_f64_lossy(),
                    );
                    let mut s = u - l;
                    if obs < l {
                        s += 2.0 / beta * (l - obs);
                    }
                    if obs > u {
                        s += 2.0 / beta * (obs - u);
                    }
                    s
                })
                .sum::<f64>()
        })
        .collect()
}

/// Interval score `2/(N M) * sum_t sum_i [width + 2/beta (l - y) 1{y<l} + 2/beta (y - u) 1{y>u}]`,
/// with `M` the number of quantile levels of the forecast.
pub fn interval_score<T: Scalar>(
    forecasts: &ForecastMatrix<T>,
    y: ArrayView1<'_, T>,
    intervals: &IntervalSet,
) -> Result<f64> {
    check_rows(forecasts, y)?;
    let total: f64 = interval_terms(forecasts, y, intervals).iter().sum();
    Ok(2.0 * total / (y.len() as f64 * forecasts.n_levels() as f64))
}

/// Mean interval score of each coverage level over the observations.
pub fn per_level_interval_score<T: Scalar>(
    forecasts: &ForecastMatrix<T>,
    y: ArrayView1<'_, T>,
    intervals: &IntervalSet,
) -> Result<Vec<f64>> {
    check_rows(forecasts, y)?;
    let n = y.len() as f64;
    Ok(interval_terms(forecasts, y, intervals).into_iter().map(|s| s / n).collect())
}

/// Interval measures of an [`EvaluationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMetrics {
    pub pinc: Vec<f64>,
    pub picp: Vec<f64>,
    /// Sum of absolute coverage deviations, percent.
    pub ace: f64,
    pub ace_mean: f64,
    pub sharpness: f64,
    pub sharpness_per_level: Vec<f64>,
    pub interval_score: f64,
    pub interval_score_per_level: Vec<f64>,
    pub crossed_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub qs: f64,
    pub qvss: Option<f64>,
    pub n_obs: usize,
    pub n_levels: usize,
    /// Adjacent quantile pairs with `q[m] - q[m-1] < -1e-6`.
    pub crossings: usize,
    pub intervals: Option<IntervalMetrics>,
    pub notice: Option<String>,
}

/// Tolerance below which an adjacent quantile gap counts as a crossing.
pub const CROSSING_TOL: f64 = 1e-6;

/// Computes every measure for one forecast run. Intervals are derived by
/// pairing symmetric levels; `reference_qs` enables the skill score.
pub fn evaluate<T: Scalar>(
    forecasts: &ForecastMatrix<T>,
    y: ArrayView1<'_, T>,
    reference_qs: Option<f64>,
) -> Result<EvaluationReport> {
    let qs = quantile_score(forecasts, y)?;
    let qvss = reference_qs.map(|r| qvss(qs, r)).transpose()?;
    let set = IntervalSet::from_levels(forecasts.levels());
    let (intervals, notice) = if set.is_empty() {
        (None, Some("no symmetric level pairs: interval measures omitted".to_string()))
    } else {
        let picp = picp(forecasts, y, &set)?;
        let pinc = set.pinc();
        let sharp = sharpness(forecasts, &set);
        (
            Some(IntervalMetrics {
                ace: ace(&picp, &pinc)?,
                ace_mean: ace_mean(&picp, &pinc)?,
                sharpness: sharp.mean,
                sharpness_per_level: sharp.per_level,
                interval_score: interval_score(forecasts, y, &set)?,
                interval_score_per_level: per_level_interval_score(forecasts, y, &set)?,
                crossed_intervals: sharp.crossed,
                pinc,
                picp,
            }),
            None,
        )
    };
    Ok(EvaluationReport {
        qs,
        qvss,
        n_obs: y.len(),
        n_levels: forecasts.n_levels(),
        crossings: forecasts.crossings(T::lit(CROSSING_TOL)),
        intervals,
        notice,
    })
}
