//! File formats: model JSON, forecast CSV, loss-history CSV and reports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::backtest::ModelKind;
use crate::data::{format_timestamp, parse_timestamp, FeatureStats, YearMonth};
use crate::error::{Error, Result};
use crate::network::{Activation, Layer, NetworkConfig, NetworkParams};
use crate::optimizer::TrainConfig;
use crate::quantile::{ForecastMatrix, QuantileLevels, SmoothingConfig};
use crate::scalar::Scalar;

/// Format tag written to and required from every model file.
pub const MODEL_VERSION: &str = "spnn-1";

/// One affine layer, weights row-major `(n_out, n_in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Everything needed to rebuild a fitted forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub kind: ModelKind,
    pub zone: String,
    pub window: Option<YearMonth>,
    pub levels: QuantileLevels,
    pub network: Option<NetworkConfig>,
    pub smoothing: SmoothingConfig,
    pub train: TrainConfig,
    pub standardization: Option<FeatureStats>,
    /// Baseline forecasts are clipped to `[0, 1]`.
    pub bounded_target: bool,
    pub train_rows: usize,
    /// Training rows skipped for missing power.
    pub dropped_rows: usize,
    pub layers: Vec<LayerRecord>,
}

impl ModelFile {
    /// A model file without network weights.
    pub fn baseline(kind: ModelKind, zone: &str, levels: QuantileLevels) -> Self {
        Self {
            version: MODEL_VERSION.into(),
            kind,
            zone: zone.into(),
            window: None,
            levels,
            network: None,
            smoothing: SmoothingConfig::default(),
            train: TrainConfig::default(),
            standardization: None,
            bounded_target: false,
            train_rows: 0,
            dropped_rows: 0,
            layers: Vec::new(),
        }
    }

    pub fn set_params<T: Scalar>(&mut self, params: &NetworkParams<T>) {
        self.layers = params
            .layers()
            .iter()
            .map(|l| LayerRecord {
                n_in: l.n_in(),
                n_out: l.n_out(),
                weights: l.weights.iter().map(|v| v.to_f64_lossy()).collect(),
                bias: l.bias.iter().map(|v| v.to_f64_lossy()).collect(),
            })
            .collect();
    }

    pub fn params<T: Scalar>(&self) -> Result<NetworkParams<T>> {
        if self.layers.is_empty() {
            return Err(Error::Model(format!("{} model carries no network weights", self.kind)));
        }
        let activation = self.network.as_ref().map_or(Activation::default(), |n| n.activation);
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                if rec.weights.len() != rec.n_in * rec.n_out || rec.bias.len() != rec.n_out {
                    return Err(Error::Model(format!("layer {i} has inconsistent sizes")));
                }
                let weights = Array2::from_shape_vec((rec.n_out, rec.n_in), rec.weights.iter().map(|&v| T::lit(v)).collect())
                    .map_err(|e| Error::Model(e.to_string()))?;
                Ok(Layer {
                    weights,
                    bias: rec.bias.iter().map(|&v| T::lit(v)).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = NetworkParams::new(layers, activation)?;
        if params.output_dim() != self.levels.len() {
            return Err(Error::LevelMismatch(format!(
                "network emits {} quantiles but the file lists {} levels",
                params.output_dim(),
                self.levels.len()
            )));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        match value.get("version").and_then(|v| v.as_str()) {
            Some(MODEL_VERSION) => {}
            Some(other) => return Err(Error::Model(format!("unsupported version {other:?}, expected {MODEL_VERSION:?}"))),
            None => return Err(Error::Model("missing version field".into())),
        }
        Ok(serde_json::from_value(value)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Conventional file name, e.g. `zone1_2013-01.model.json`.
pub fn model_file_name(zone: &str, month: YearMonth) -> String {
    format!("{zone}_{month}.model.json")
}

/// Column name of a level: `q001`..`q099` for whole percents, `q<tau>` otherwise.
pub fn level_column(tau: f64) -> String {
    let pct = tau * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{:03}", pct.round() as u32)
    } else {
        format!("q{tau}")
    }
}

fn parse_level_column(name: &str) -> Option<f64> {
    let rest = name.trim().strip_prefix('q').or_else(|| name.trim().strip_prefix('Q'))?;
    if rest.contains('.') {
        rest.parse().ok()
    } else {
        rest.parse::<u32>().ok().map(|p| f64::from(p) / 100.0)
    }
}

/// Forecasts keyed by timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    pub timestamps: Vec<NaiveDateTime>,
    pub forecasts: ForecastMatrix<f64>,
}

pub fn write_forecast_csv<W: Write>(writer: W, timestamps: &[NaiveDateTime], forecasts: &ForecastMatrix<f64>) -> Result<()> {
    if timestamps.len() != forecasts.n_obs() {
        return Err(Error::DimensionMismatch {
            context: "forecast timestamps",
            expected: forecasts.n_obs(),
            found: timestamps.len(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(forecasts.levels().iter().map(level_column));
    w.write_record(&header)?;
    for (ts, row) in timestamps.iter().zip(forecasts.values().rows()) {
        let mut rec = vec![format_timestamp(ts)];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<forecast csv>", e))?;
    Ok(())
}

pub fn read_forecast_csv<R: Read>(reader: R, path: &Path) -> Result<ForecastTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    if !headers.get(0).is_some_and(|h| h.eq_ignore_ascii_case("timestamp")) {
        return Err(perr(1, "first column must be timestamp".into()));
    }
    let levels = headers
        .iter()
        .skip(1)
        .map(|h| parse_level_column(h).ok_or_else(|| perr(1, format!("bad level column {h:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let levels = QuantileLevels::new(levels)?;
    let mut timestamps = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let ts = parse_timestamp(&rec[0]).ok_or_else(|| perr(line, format!("bad timestamp {:?}", &rec[0])))?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| perr(line, format!("bad value {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        timestamps.push(ts);
        rows.push(row);
    }
    let forecasts = ForecastMatrix::from_rows(&rows, levels)?;
    Ok(ForecastTable { timestamps, forecasts })
}

pub fn save_forecast_csv(path: &Path, timestamps: &[NaiveDateTime], forecasts: &ForecastMatrix<f64>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_forecast_csv(BufWriter::new(file), timestamps, forecasts)
}

pub fn load_forecast_csv(path: &Path) -> Result<ForecastTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_forecast_csv(BufReader::new(file), path)
}

/// Writes `iteration,objective` rows, iterations counted from 1.
pub fn write_loss_history<W: Write>(writer: W, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "objective"])?;
    for (i, v) in history.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<loss history>", e))?;
    Ok(())
}

pub fn read_loss_history<R: Read>(reader: R) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        #[allow(dead_code)]
        iteration: usize,
        objective: f64,
    }
    csv::Reader::from_reader(reader)
        .deserialize::<Row>()
        .map(|r| Ok(r?.objective))
        .collect()
}

pub fn save_loss_history(path: &Path, history: &[f64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_loss_history(BufWriter::new(file), history)
}

/// Writes any serialisable value as pretty JSON.
pub fn save_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Writes serialisable flat records as CSV with a header row.
pub fn save_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes a regression data set as `x1,..,xk,y`.
pub fn save_xy_csv(path: &Path, x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "regression rows",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (row, yi) in x.rows().into_iter().zip(y.iter()) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(yi.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a file written by [`save_xy_csv`]; the last column is the target.
pub fn load_xy_csv(path: &Path) -> Result<(Array2<f64>, Array1<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "need at least one feature and a target column".into(),
        });
    }
    let mut flat = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (k, v) in rec.iter().enumerate() {
            let v: f64 = v.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: format!("bad number {v:?}"),
            })?;
            if k + 1 == width {
                y.push(v);
            } else {
                flat.push(v);
            }
        }
    }
    let x = Array2::from_shape_vec((y.len(), width - 1), flat).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    Ok((x, Array1::from(y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_params;
    use ndarray::arr2;

    #[test]
    fn level_columns() {
        assert_eq!(level_column(0.01), "q001");
        assert_eq!(level_column(0.5), "q050");
        assert_eq!(level_column(0.99), "q099");
        assert_eq!(level_column(0.025), "q0.025");
        for tau in [0.01, 0.37, 0.99, 0.025, 0.001] {
            assert!((parse_level_column(&level_column(tau)).unwrap() - tau).abs() < 1e-15);
        }
    }

    #[test]
    fn forecast_csv_round_trip() {
        let levels = QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap();
        let fm = ForecastMatrix::new(arr2(&[[0.1, 0.2, 0.30000000000000004], [1e-17, 0.5, 0.9]]), levels).unwrap();
        let ts = vec![parse_timestamp("2013-01-01T00:00").unwrap(), parse_timestamp("2013-01-01T01:00").unwrap()];
        let mut buf = Vec::new();
        write_forecast_csv(&mut buf, &ts, &fm).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,q010,q050,q090\n2013-01-01T00:00,"));
        let back = read_forecast_csv(buf.as_slice(), Path::new("f.csv")).unwrap();
        assert_eq!(back.timestamps, ts);
        assert_eq!(back.forecasts, fm);
    }

    #[test]
    fn forecast_csv_rejects_garbage() {
        let bad = "timestamp,q010\n2013-01-01T00:00,abc\n";
        assert!(matches!(read_forecast_csv(bad.as_bytes(), Path::new("f")), Err(Error::Parse { line: 2, .. })));
        let bad_header = "time,q010\n";
        assert!(read_forecast_csv(bad_header.as_bytes(), Path::new("f")).is_err());
    }

    #[test]
    fn model_round_trip_is_exact() {
        let levels = QuantileLevels::gefcom();
        let net = NetworkConfig::spnn2(8, 11);
        let params: NetworkParams<f64> = init_params(&net, &levels).unwrap();
        let mut file = ModelFile::baseline(ModelKind::Spnn2, "zone1", levels);
        file.network = Some(net);
        file.window = Some(YearMonth::new(2013, 1));
        file.standardization = Some(FeatureStats { means: vec![0.1; 8], stds: vec![1.5; 8] });
        file.set_params(&params);
        let json = file.to_json().unwrap();
        let back = ModelFile::from_json(&json).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.params::<f64>().unwrap(), params);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn model_version_is_checked() {
        let file = ModelFile::baseline(ModelKind::Climatology, "z", QuantileLevels::intervals());
        let json = file.to_json().unwrap().replace(MODEL_VERSION, "spnn-0");
        assert!(matches!(ModelFile::from_json(&json), Err(Error::Model(_))));
        assert!(file.params::<f64>().is_err());
    }

    #[test]
    fn loss_history_round_trip() {
        let h = vec![1.5, 0.25, 0.1];
        let mut buf = Vec::new();
        write_loss_history(&mut buf, &h).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("iteration,objective\n1,1.5\n"));
        assert_eq!(read_loss_history(buf.as_slice()).unwrap(), h);
    }

    #[test]
    fn xy_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("xy.csv");
        let (x, y) = crate::synth::hetero_dataset(50, 4);
        save_xy_csv(&path, x.view(), y.view()).unwrap();
        let (x2, y2) = load_xy_csv(&path).unwrap();
        assert_eq!((x, y), (x2, y2));
    }

    #[test]
    fn file_name() {
        assert_eq!(model_file_name("zone1", YearMonth::new(2013, 1)), "zone1_2013-01.model.json");
    }
}
