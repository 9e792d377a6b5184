//! Per-window fitting, forecasting and scoring of every model kind.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::baselines::{climatology_forecast, persistence_forecast, uniform_forecast, PERSISTENCE_WINDOW};
use crate::data::{standardize, ColumnMap, Dataset, Window};
use crate::error::{Error, Result};
use crate::io::{ModelFile, MODEL_VERSION};
use crate::metrics::{evaluate, EvaluationReport};
use crate::network::{predict, Activation, NetworkConfig};
use crate::optimizer::{train, TrainConfig};
use crate::quantile::{ForecastMatrix, QuantileLevels, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Spnn1,
    Spnn2,
    LinearQr,
    Persistence,
    Climatology,
    Uniform,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Spnn1,
        ModelKind::Spnn2,
        ModelKind::LinearQr,
        ModelKind::Persistence,
        ModelKind::Climatology,
        ModelKind::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Spnn1 => "spnn1",
            ModelKind::Spnn2 => "spnn2",
            ModelKind::LinearQr => "linear_qr",
            ModelKind::Persistence => "persistence",
            ModelKind::Climatology => "climatology",
            ModelKind::Uniform => "uniform",
        }
    }

    /// Whether fitting runs the optimizer.
    pub fn is_trained(self) -> bool {
        matches!(self, ModelKind::Spnn1 | ModelKind::Spnn2 | ModelKind::LinearQr)
    }

    pub fn network_config(self, input_dim: usize, seed: u64, activation: Activation) -> Option<NetworkConfig> {
        let cfg = match self {
            ModelKind::Spnn1 => NetworkConfig::spnn1(input_dim, seed),
            ModelKind::Spnn2 => NetworkConfig::spnn2(input_dim, seed),
            ModelKind::LinearQr => NetworkConfig::linear(input_dim, seed),
            _ => return None,
        };
        Some(NetworkConfig { activation, ..cfg })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key || (key == "linear" && *k == ModelKind::LinearQr))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model {s:?}")))
    }
}

/// Settings shared by every window of a backtest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub levels: QuantileLevels,
    pub smoothing: SmoothingConfig,
    /// Crossing-penalty weight used for linear QR in place of `smoothing.penalty_c`.
    pub linear_qr_penalty_c: f64,
    pub train: TrainConfig,
    pub activation: Activation,
    /// Seed of the weight initialisation.
    pub seed: u64,
    pub eval_year: i32,
    pub columns: ColumnMap,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            levels: QuantileLevels::gefcom(),
            smoothing: SmoothingConfig::default(),
            linear_qr_penalty_c: 0.0,
            train: TrainConfig::default(),
            activation: Activation::Tanh,
            seed: 0,
            eval_year: 2013,
            columns: ColumnMap::default(),
        }
    }
}

impl ExperimentConfig {
    /// Objective settings for `kind`; linear QR swaps in its own penalty weight.
    pub fn smoothing_for(&self, kind: ModelKind) -> SmoothingConfig {
        match kind {
            ModelKind::LinearQr => SmoothingConfig {
                penalty_c: self.linear_qr_penalty_c,
                ..self.smoothing.clone()
            },
            _ => self.smoothing.clone(),
        }
    }
}

/// A fitted model and its training trace.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: ModelFile,
    pub loss_history: Vec<f64>,
}

/// Fits `kind` on the training rows of `window`. Rows without an observed
/// target are skipped and counted in [`ModelFile::dropped_rows`].
pub fn fit_window(dataset: &Dataset<f64>, window: &Window, kind: ModelKind, cfg: &ExperimentConfig) -> Result<Fit> {
    let rows = dataset.observed_rows(window.train.clone());
    let dropped = window.train.len() - rows.len();
    if dropped > 0 {
        log::info!(
            "{} {}: {dropped} training rows without power skipped",
            dataset.zone,
            window.test_month
        );
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no observed targets in the training window of {}",
            window.test_month
        )));
    }
    let mut model = ModelFile::baseline(kind, &dataset.zone, cfg.levels.clone());
    model.version = MODEL_VERSION.into();
    model.window = Some(window.test_month);
    model.bounded_target = dataset.bounded_target;
    model.train_rows = rows.len();
    model.dropped_rows = dropped;
    model.smoothing = cfg.smoothing_for(kind);
    model.train = cfg.train.clone();

    let Some(net) = kind.network_config(dataset.features.ncols(), cfg.seed, cfg.activation) else {
        return Ok(Fit {
            model,
            loss_history: Vec::new(),
        });
    };
    let standardized = standardize(dataset, window.train.clone())?;
    let (x, y) = standardized.select(&rows);
    let trained = train(x.view(), y.view(), &cfg.levels, &net, &model.smoothing, &cfg.train)?;
    model.network = Some(net);
    model.standardization = standardized.stats;
    model.set_params(&trained.params);
    Ok(Fit {
        model,
        loss_history: trained.loss_history,
    })
}

/// Quantile forecasts for every row of `window.test`.
pub fn forecast_window(dataset: &Dataset<f64>, window: &Window, model: &ModelFile) -> Result<ForecastMatrix<f64>> {
    let levels = &model.levels;
    let test = window.test.clone();
    let n = test.len();
    let values = match model.kind {
        kind if kind.is_trained() => {
            let stats = model
                .standardization
                .as_ref()
                .ok_or_else(|| Error::Model("trained model lacks standardisation statistics".into()))?;
            let mut x = dataset.features.slice(ndarray::s![test, ..]).to_owned();
            stats.apply(&mut x)?;
            predict(&model.params::<f64>()?, x.view())?
        }
        ModelKind::Persistence => {
            let mut out = Array2::zeros((n, levels.len()));
            for (mut row, t) in out.axis_iter_mut(Axis(0)).zip(test) {
                let history = recent_observations(&dataset.targets, t, PERSISTENCE_WINDOW);
                let q = persistence_forecast(&history, levels, model.bounded_target)?;
                row.assign(&Array1::from(q));
            }
            out
        }
        ModelKind::Climatology => {
            let history: Vec<f64> = dataset
                .targets
                .slice(ndarray::s![..window.test.start])
                .iter()
                .copied()
                .filter(|v| v.is_finite())
                .collect();
            let q = Array1::from(climatology_forecast(&history, levels)?);
            broadcast_row(&q, n)
        }
        _ => broadcast_row(&Array1::from(uniform_forecast::<f64>(levels)), n),
    };
    ForecastMatrix::new(values, levels.clone())
}

/// The last `k` observed targets strictly before row `t`, oldest first.
fn recent_observations(targets: &Array1<f64>, t: usize, k: usize) -> Vec<f64> {
    let mut out: Vec<f64> = targets
        .slice(ndarray::s![..t])
        .iter()
        .rev()
        .filter(|v| v.is_finite())
        .take(k)
        .copied()
        .collect();
    out.reverse();
    out
}

fn broadcast_row(row: &Array1<f64>, n: usize) -> Array2<f64> {
    row.broadcast((n, row.len())).expect("row broadcast").to_owned()
}

/// Scores forecasts of `window.test` against the observed targets; rows
/// without power are left out.
pub fn evaluate_window(
    dataset: &Dataset<f64>,
    window: &Window,
    forecasts: &ForecastMatrix<f64>,
    reference_qs: Option<f64>,
) -> Result<EvaluationReport> {
    let (fm, y) = observed_subset(dataset, window, forecasts)?;
    evaluate(&fm, y.view(), reference_qs)
}

/// Forecast rows and targets of the observed test rows.
pub fn observed_subset(
    dataset: &Dataset<f64>,
    window: &Window,
    forecasts: &ForecastMatrix<f64>,
) -> Result<(ForecastMatrix<f64>, Array1<f64>)> {
    if forecasts.n_obs() != window.test.len() {
        return Err(Error::DimensionMismatch {
            context: "forecast rows vs test window",
            expected: window.test.len(),
            found: forecasts.n_obs(),
        });
    }
    let keep: Vec<usize> = (0..window.test.len())
        .filter(|&k| dataset.has_target(window.test.start + k))
        .collect();
    let values = forecasts.values().select(Axis(0), &keep);
    let y = keep.iter().map(|&k| dataset.targets[window.test.start + k]).collect();
    Ok((ForecastMatrix::new(values, forecasts.levels().clone())?, y))
}

/// Everything produced for one model on one window.
#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub fit: Fit,
    pub timestamps: Vec<NaiveDateTime>,
    pub forecasts: ForecastMatrix<f64>,
    pub report: EvaluationReport,
}

/// Fits, forecasts and scores `kind` on one window.
pub fn run_window(
    dataset: &Dataset<f64>,
    window: &Window,
    kind: ModelKind,
    cfg: &ExperimentConfig,
    reference_qs: Option<f64>,
) -> Result<WindowOutcome> {
    let fit = fit_window(dataset, window, kind, cfg)?;
    let forecasts = forecast_window(dataset, window, &fit.model)?;
    let report = evaluate_window(dataset, window, &forecasts, reference_qs)?;
    Ok(WindowOutcome {
        fit,
        timestamps: dataset.timestamps[window.test.clone()].to_vec(),
        forecasts,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_features, make_windows, YearMonth};
    use crate::synth::synthetic_zone;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            levels: QuantileLevels::intervals(),
            train: TrainConfig {
                epochs: 2,
                batch_size: 500,
                learning_rate: 0.01,
                ..TrainConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    fn zone() -> Dataset<f64> {
        build_features("zone1", &synthetic_zone(2012, 2, 3).records)
    }

    #[test]
    fn names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert_eq!("LINEAR-QR".parse::<ModelKind>().unwrap(), ModelKind::LinearQr);
        assert!("forest".parse::<ModelKind>().is_err());
    }

    #[test]
    fn every_kind_runs_on_a_window() {
        let d = zone();
        let plan = make_windows(&d.timestamps, 2013).unwrap();
        let w = &plan.windows[2];
        assert_eq!(w.test_month, YearMonth::new(2013, 3));
        let cfg = small_cfg();
        for kind in ModelKind::ALL {
            let out = run_window(&d, w, kind, &cfg, None).unwrap();
            assert_eq!(out.forecasts.n_obs(), 744, "{kind}");
            assert!(out.report.qs.is_finite() && out.report.qs > 0.0, "{kind}");
            assert_eq!(out.fit.loss_history.is_empty(), !kind.is_trained());
            if !kind.is_trained() {
                assert_eq!(out.report.crossings, 0, "{kind}");
            }
            let again = forecast_window(&d, w, &ModelFile::from_json(&out.fit.model.to_json().unwrap()).unwrap()).unwrap();
            assert_eq!(again, out.forecasts, "{kind}");
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let d = zone();
        let plan = make_windows(&d.timestamps, 2013).unwrap();
        let cfg = small_cfg();
        let a = fit_window(&d, &plan.windows[0], ModelKind::Spnn1, &cfg).unwrap();
        let b = fit_window(&d, &plan.windows[0], ModelKind::Spnn1, &cfg).unwrap();
        assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    }

    #[test]
    fn missing_targets_are_skipped() {
        let mut d = zone();
        let plan = make_windows(&d.timestamps, 2013).unwrap();
        let w = plan.windows[0].clone();
        for i in w.train.start..w.train.start + 10 {
            d.targets[i] = f64::NAN;
        }
        d.targets[w.test.start + 3] = f64::NAN;
        let out = run_window(&d, &w, ModelKind::Persistence, &small_cfg(), None).unwrap();
        assert_eq!(out.fit.model.dropped_rows, 10);
        assert_eq!(out.report.n_obs, w.test.len() - 1);
    }

    #[test]
    fn persistence_history_skips_gaps() {
        let t = Array1::from(vec![1.0, f64::NAN, 2.0, 3.0, 4.0]);
        assert_eq!(recent_observations(&t, 4, 3), vec![1.0, 2.0, 3.0]);
        assert_eq!(recent_observations(&t, 0, 3), Vec::<f64>::new());
    }
}
