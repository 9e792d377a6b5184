use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use spnn::backtest::{fit_window, forecast_window, ExperimentConfig, ModelKind};
use spnn::data::{build_features, load_zone_csv, make_windows, Dataset, Window, YearMonth};
use spnn::io::{
    load_forecast_csv, model_file_name, save_csv, save_forecast_csv, save_json, save_loss_history, save_xy_csv,
    ModelFile,
};
use spnn::metrics::{evaluate, qvss, EvaluationReport};
use spnn::optimizer::{corrupt_largest_weight, gradient_check_against, GradCheckInstance};
use spnn::synth::{hetero_dataset, synthetic_zone};
use spnn::{Activation, Error, ForecastMatrix};

use crate::config::{zone_name, RunConfig};
use crate::{
    ActivationArg, ActivationChoice, Cli, Command, DataArgs, DepthChoice, EvaluateArgs, ForecastArgs, GradcheckArgs,
    SynthArgs, SynthKind, TrainArgs, EXIT_CHECK_FAILED,
};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = RunConfig::resolve(&cli)?;
    match &cli.command {
        Command::Train(args) => train(&cfg, args),
        Command::Forecast(args) => forecast(&cfg, args),
        Command::Evaluate(args) => evaluate_cmd(&cfg, args),
        Command::Gradcheck(args) => gradcheck(&cfg, args),
        Command::Synth(args) => synth(&cfg, args),
    }
}

fn load_zone(path: &Path, cfg: &RunConfig) -> Result<Dataset<f64>> {
    let zone = load_zone_csv(path, &cfg.experiment.columns)?;
    if zone.records.is_empty() {
        bail!("{}: no records", path.display());
    }
    Ok(build_features(&zone_name(path), &zone.records))
}

fn load_zones(paths: &[PathBuf], cfg: &RunConfig) -> Result<Vec<Dataset<f64>>> {
    let zones: Vec<Dataset<f64>> = paths.iter().map(|p| load_zone(p, cfg)).collect::<Result<_>>()?;
    let mut names: Vec<&str> = zones.iter().map(|z| z.zone.as_str()).collect();
    names.sort_unstable();
    if let Some(dup) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("two data files share the zone name {:?}", dup[0]);
    }
    Ok(zones)
}

fn windows_for(dataset: &Dataset<f64>, args: &DataArgs, cfg: &RunConfig) -> Result<Vec<Window>> {
    let year = args.eval_year.unwrap_or(cfg.experiment.eval_year);
    let plan = make_windows(&dataset.timestamps, year).with_context(|| format!("zone {}", dataset.zone))?;
    if args.months.is_empty() {
        return Ok(plan.windows);
    }
    args.months
        .iter()
        .map(|m| {
            let month: YearMonth = m.parse()?;
            plan.windows
                .iter()
                .find(|w| w.test_month == month)
                .cloned()
                .ok_or_else(|| anyhow!("zone {}: no test window for {month}", dataset.zone))
        })
        .collect()
}

/// Every (zone, window) pair, in file then calendar order.
fn tasks<'a>(zones: &'a [Dataset<f64>], args: &DataArgs, cfg: &RunConfig) -> Result<Vec<(&'a Dataset<f64>, Window)>> {
    let mut out = Vec::new();
    for z in zones {
        out.extend(windows_for(z, args, cfg)?.into_iter().map(|w| (z, w)));
    }
    Ok(out)
}

fn forecast_file_name(zone: &str, month: YearMonth, kind: ModelKind) -> String {
    format!("{zone}_{month}.{kind}.forecast.csv")
}

/// Splits `zone_YYYY-MM.kind.forecast.csv`.
fn parse_forecast_file_name(path: &Path) -> Option<(String, YearMonth, ModelKind)> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".forecast.csv")?;
    let (zone_month, kind) = stem.rsplit_once('.')?;
    let (zone, month) = zone_month.rsplit_once('_')?;
    Some((zone.to_string(), month.parse().ok()?, kind.parse().ok()?))
}

fn experiment_with_overrides(cfg: &RunConfig, args: &TrainArgs) -> ExperimentConfig {
    let mut exp = cfg.experiment.clone();
    if let Some(v) = args.epochs {
        exp.train.epochs = v;
    }
    if args.max_steps.is_some() {
        exp.train.max_steps = args.max_steps;
    }
    if let Some(v) = args.batch_size {
        exp.train.batch_size = v;
    }
    if let Some(v) = args.learning_rate {
        exp.train.learning_rate = v;
    }
    if let Some(v) = args.alpha {
        exp.smoothing.alpha = v;
    }
    if let Some(v) = args.penalty_c {
        exp.smoothing.penalty_c = v;
    }
    if let Some(a) = args.activation {
        exp.activation = match a {
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Relu => Activation::Relu,
        };
    }
    exp
}

fn train(cfg: &RunConfig, args: &TrainArgs) -> Result<ExitCode> {
    let kind = cfg.model_kind()?;
    let exp = experiment_with_overrides(cfg, args);
    exp.smoothing.validate()?;
    exp.train.validate()?;
    let out = cfg.out_dir()?;
    let zones = load_zones(&cfg.data_paths(&args.data.data)?, cfg)?;
    let work = tasks(&zones, &args.data, cfg)?;
    let fits = work
        .par_iter()
        .map(|(z, w)| fit_window(z, w, kind, &exp).with_context(|| format!("fitting {} {}", z.zone, w.test_month)))
        .collect::<Result<Vec<_>>>()?;
    for ((z, w), fit) in work.iter().zip(&fits) {
        let base = model_file_name(&z.zone, w.test_month);
        fit.model.save(&out.join(&base))?;
        if !fit.loss_history.is_empty() {
            let loss = base.replace(".model.json", ".loss.csv");
            save_loss_history(&out.join(loss), &fit.loss_history)?;
        }
        let last = fit.loss_history.last().map_or(String::from("-"), |v| format!("{v:.6}"));
        println!("{} {} {kind}: {} rows, final objective {last}", z.zone, w.test_month, fit.model.train_rows);
    }
    Ok(ExitCode::SUCCESS)
}

fn collect_files(inputs: &[PathBuf], suffix: &str) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.to_str().is_some_and(|s| s.ends_with(suffix)))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            bail!("{} does not exist", p.display());
        }
    }
    if files.is_empty() {
        bail!("no *{suffix} files found");
    }
    Ok(files)
}

fn forecast(cfg: &RunConfig, args: &ForecastArgs) -> Result<ExitCode> {
    let out = cfg.out_dir()?;
    let zones = load_zones(&cfg.data_paths(&args.data.data)?, cfg)?;
    let jobs: Vec<(&Dataset<f64>, Window, ModelFile)> = if args.models.is_empty() {
        let kind = cfg.model_kind()?;
        if kind.is_trained() {
            bail!("{kind} must be trained first; pass its model files with --models");
        }
        tasks(&zones, &args.data, cfg)?
            .into_par_iter()
            .map(|(z, w)| {
                let fit = fit_window(z, &w, kind, &cfg.experiment)?;
                Ok((z, w, fit.model))
            })
            .collect::<Result<_>>()?
    } else {
        let mut jobs = Vec::new();
        for path in collect_files(&args.models, ".model.json")? {
            let model = ModelFile::load(&path).with_context(|| format!("loading {}", path.display()))?;
            if cfg.levels_explicit && !model.levels.approx_eq(&cfg.experiment.levels) {
                return Err(Error::LevelMismatch(format!(
                    "{} was fitted for {} levels, the run asks for {}",
                    path.display(),
                    model.levels.len(),
                    cfg.experiment.levels.len()
                ))
                .into());
            }
            let z = zones
                .iter()
                .find(|z| z.zone == model.zone)
                .ok_or_else(|| anyhow!("{}: no data file for zone {:?}", path.display(), model.zone))?;
            let month = model.window.ok_or_else(|| anyhow!("{}: model has no window", path.display()))?;
            let year_args = DataArgs {
                data: Vec::new(),
                eval_year: Some(month.year),
                months: vec![month.to_string()],
            };
            let w = windows_for(z, &year_args, cfg)?.remove(0);
            jobs.push((z, w, model));
        }
        jobs
    };
    let results = jobs
        .par_iter()
        .map(|(z, w, m)| forecast_window(z, w, m).with_context(|| format!("forecasting {} {}", z.zone, w.test_month)))
        .collect::<Result<Vec<_>>>()?;
    for ((z, w, m), fm) in jobs.iter().zip(&results) {
        let path = out.join(forecast_file_name(&z.zone, w.test_month, m.kind));
        save_forecast_csv(&path, &z.timestamps[w.test.clone()], fm)?;
        println!("{}: {} rows", path.display(), fm.n_obs());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Serialize)]
struct EvalRecord {
    zone: String,
    month: String,
    model: ModelKind,
    report: EvaluationReport,
}

#[derive(Debug, Clone, Serialize)]
struct Aggregate {
    model: ModelKind,
    windows: usize,
    mean_qs: f64,
    mean_qvss: Option<f64>,
    mean_ace: Option<f64>,
    mean_sharpness: Option<f64>,
    mean_interval_score: Option<f64>,
    crossings: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    reference: ModelKind,
    records: Vec<EvalRecord>,
    aggregates: Vec<Aggregate>,
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    zone: &'a str,
    month: &'a str,
    model: ModelKind,
    n_obs: usize,
    qs: f64,
    qvss: Option<f64>,
    ace: Option<f64>,
    ace_mean: Option<f64>,
    sharpness: Option<f64>,
    interval_score: Option<f64>,
    crossings: usize,
}

#[derive(Debug, Serialize)]
struct ReliabilityRow<'a> {
    zone: &'a str,
    month: &'a str,
    model: ModelKind,
    pinc: f64,
    picp: f64,
    /// `100 picp - pinc`, percentage points.
    deviation: f64,
}

#[derive(Debug, Serialize)]
struct SharpnessRow<'a> {
    zone: &'a str,
    month: &'a str,
    model: ModelKind,
    pinc: f64,
    sharpness: f64,
    interval_score: f64,
}

/// Forecast rows aligned with observed power; rows without power are dropped.
fn align(dataset: &Dataset<f64>, path: &Path) -> Result<(ForecastMatrix<f64>, ndarray::Array1<f64>)> {
    let table = load_forecast_csv(path)?;
    let mut keep = Vec::new();
    let mut y = Vec::new();
    for (k, ts) in table.timestamps.iter().enumerate() {
        let i = dataset
            .timestamps
            .binary_search(ts)
            .map_err(|_| Error::Misaligned(spnn::data::format_timestamp(ts)))
            .with_context(|| format!("{} against zone {}", path.display(), dataset.zone))?;
        if dataset.has_target(i) {
            keep.push(k);
            y.push(dataset.targets[i]);
        }
    }
    let values = table.forecasts.values().select(ndarray::Axis(0), &keep);
    Ok((ForecastMatrix::new(values, table.forecasts.levels().clone())?, y.into()))
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.collect::<Option<Vec<_>>>()?;
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn evaluate_cmd(cfg: &RunConfig, args: &EvaluateArgs) -> Result<ExitCode> {
    let reference: ModelKind = args.reference.parse()?;
    let out = cfg.out_dir()?;
    let zones = load_zones(&cfg.data_paths(&args.data)?, cfg)?;
    let files = collect_files(&args.forecasts, ".forecast.csv")?;
    let keyed = files
        .iter()
        .map(|f| {
            parse_forecast_file_name(f)
                .map(|k| (k, f.clone()))
                .ok_or_else(|| anyhow!("{}: expected a name like zone1_2013-01.spnn1.forecast.csv", f.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = keyed
        .par_iter()
        .map(|((zone, month, kind), path)| {
            let z = zones
                .iter()
                .find(|d| &d.zone == zone)
                .ok_or_else(|| anyhow!("{}: no data file for zone {zone:?}", path.display()))?;
            let (fm, y) = align(z, path)?;
            let report = evaluate(&fm, y.view(), None).with_context(|| format!("scoring {}", path.display()))?;
            Ok(EvalRecord {
                zone: zone.clone(),
                month: month.to_string(),
                model: *kind,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| (&a.zone, &a.month, a.model).cmp(&(&b.zone, &b.month, b.model)));

    let reference_qs: BTreeMap<(String, String), f64> = records
        .iter()
        .filter(|r| r.model == reference)
        .map(|r| ((r.zone.clone(), r.month.clone()), r.report.qs))
        .collect();
    for r in &mut records {
        match reference_qs.get(&(r.zone.clone(), r.month.clone())) {
            Some(&qs_ref) => match qvss(r.report.qs, qs_ref) {
                Ok(v) => r.report.qvss = Some(v),
                Err(e) => r.report.notice = Some(e.to_string()),
            },
            None if r.report.notice.is_none() => {
                r.report.notice = Some(format!("no {reference} forecast for this window: skill score omitted"));
            }
            None => {}
        }
    }

    let mut by_model: BTreeMap<ModelKind, Vec<&EvalRecord>> = BTreeMap::new();
    for r in &records {
        by_model.entry(r.model).or_default().push(r);
    }
    let aggregates: Vec<Aggregate> = by_model
        .iter()
        .map(|(&model, rs)| {
            let iv = |f: fn(&spnn::metrics::IntervalMetrics) -> f64| mean_of(rs.iter().map(|r| r.report.intervals.as_ref().map(f)));
            Aggregate {
                model,
                windows: rs.len(),
                mean_qs: rs.iter().map(|r| r.report.qs).sum::<f64>() / rs.len() as f64,
                mean_qvss: mean_of(rs.iter().map(|r| r.report.qvss)),
                mean_ace: iv(|m| m.ace),
                mean_sharpness: iv(|m| m.sharpness),
                mean_interval_score: iv(|m| m.interval_score),
                crossings: rs.iter().map(|r| r.report.crossings).sum(),
            }
        })
        .collect();

    let summary: Vec<SummaryRow> = records
        .iter()
        .map(|r| SummaryRow {
            zone: &r.zone,
            month: &r.month,
            model: r.model,
            n_obs: r.report.n_obs,
            qs: r.report.qs,
            qvss: r.report.qvss,
            ace: r.report.intervals.as_ref().map(|i| i.ace),
            ace_mean: r.report.intervals.as_ref().map(|i| i.ace_mean),
            sharpness: r.report.intervals.as_ref().map(|i| i.sharpness),
            interval_score: r.report.intervals.as_ref().map(|i| i.interval_score),
            crossings: r.report.crossings,
        })
        .collect();
    let mut reliability = Vec::new();
    let mut sharp = Vec::new();
    for r in &records {
        let Some(iv) = &r.report.intervals else { continue };
        for k in 0..iv.pinc.len() {
            reliability.push(ReliabilityRow {
                zone: &r.zone,
                month: &r.month,
                model: r.model,
                pinc: iv.pinc[k],
                picp: iv.picp[k],
                deviation: 100.0 * iv.picp[k] - iv.pinc[k],
            });
            sharp.push(SharpnessRow {
                zone: &r.zone,
                month: &r.month,
                model: r.model,
                pinc: iv.pinc[k],
                sharpness: iv.sharpness_per_level[k],
                interval_score: iv.interval_score_per_level[k],
            });
        }
    }
    save_csv(&out.join("summary.csv"), &summary)?;
    save_csv(&out.join("reliability.csv"), &reliability)?;
    save_csv(&out.join("sharpness.csv"), &sharp)?;
    save_csv(&out.join("aggregate.csv"), &aggregates)?;
    save_json(
        &out.join("report.json"),
        &Report {
            reference,
            records: records.clone(),
            aggregates: aggregates.clone(),
        },
    )?;

    println!("{:<12} {:>7} {:>10} {:>8} {:>8} {:>10} {:>9}", "model", "windows", "QS", "QVSS", "ACE", "sharpness", "crossings");
    let fmt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |v| format!("{v:.p$}"));
    for a in &aggregates {
        println!(
            "{:<12} {:>7} {:>10.6} {:>8} {:>8} {:>10} {:>9}",
            a.model.name(),
            a.windows,
            a.mean_qs,
            fmt(a.mean_qvss, 4),
            fmt(a.mean_ace, 2),
            fmt(a.mean_sharpness, 4),
            a.crossings
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug)]
struct CheckOutcome {
    instance: usize,
    hidden: usize,
    activation: Activation,
    max_rel_error: f64,
    worst_layer: usize,
    tolerance: f64,
}

fn gradcheck(cfg: &RunConfig, args: &GradcheckArgs) -> Result<ExitCode> {
    if args.instances == 0 {
        bail!("--instances must be at least 1");
    }
    let depths: &[usize] = match args.depth {
        DepthChoice::One => &[1],
        DepthChoice::Two => &[2],
        DepthChoice::Both => &[1, 2],
    };
    let acts: &[Activation] = match args.activation {
        ActivationChoice::Tanh => &[Activation::Tanh],
        ActivationChoice::Relu => &[Activation::Relu],
        ActivationChoice::Both => &[Activation::Tanh, Activation::Relu],
    };
    let combos: Vec<(usize, Activation)> = depths.iter().flat_map(|&d| acts.iter().map(move |&a| (d, a))).collect();
    let seed = cfg.experiment.seed;
    let outcomes = (0..args.instances)
        .into_par_iter()
        .map(|i| {
            let (hidden, activation) = combos[i % combos.len()];
            let inst = GradCheckInstance::random(seed.wrapping_add(i as u64), hidden, activation);
            let mut analytic = inst.analytic_gradient()?;
            if args.corrupt {
                corrupt_largest_weight(&mut analytic, 1.5);
            }
            let r = gradient_check_against(
                &inst.params,
                &analytic,
                inst.x.view(),
                inst.y.view(),
                &inst.levels,
                &inst.smoothing,
                args.step,
            )?;
            let tolerance = match activation {
                Activation::Relu => 10.0 * args.tolerance,
                Activation::Tanh => args.tolerance,
            };
            Ok(CheckOutcome {
                instance: i,
                hidden,
                activation,
                max_rel_error: r.max_rel_error,
                worst_layer: r.worst_layer,
                tolerance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = outcomes
        .iter()
        .max_by(|a, b| (a.max_rel_error / a.tolerance).total_cmp(&(b.max_rel_error / b.tolerance)))
        .expect("at least one instance");
    let failures: Vec<&CheckOutcome> = outcomes.iter().filter(|o| !(o.max_rel_error < o.tolerance)).collect();
    const SHOWN: usize = 10;
    if failures.len() > SHOWN {
        eprintln!("showing {SHOWN} of {} failures", failures.len());
    }
    for f in failures.iter().take(SHOWN) {
        eprintln!(
            "FAIL instance {} ({} hidden, {:?}): relative error {:.3e} in layer {} exceeds {:.0e}",
            f.instance, f.hidden, f.activation, f.max_rel_error, f.worst_layer, f.tolerance
        );
    }
    println!(
        "{} instances, worst relative error {:.3e} (instance {}, {} hidden, {:?}, layer {})",
        outcomes.len(),
        worst.max_rel_error,
        worst.instance,
        worst.hidden,
        worst.activation,
        worst.worst_layer
    );
    if failures.is_empty() {
        println!("PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL: {} of {} instances", failures.len(), outcomes.len());
        Ok(ExitCode::from(EXIT_CHECK_FAILED))
    }
}

fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<ExitCode> {
    let out = cfg.out_dir()?;
    let seed = cfg.experiment.seed;
    match args.kind {
        SynthKind::Hetero => {
            let (x, y) = hetero_dataset(args.n_train, seed);
            save_xy_csv(&out.join("train.csv"), x.view(), y.view())?;
            let (x, y) = hetero_dataset(args.n_test, seed.wrapping_add(1));
            save_xy_csv(&out.join("test.csv"), x.view(), y.view())?;
            println!("wrote {} training and {} test rows to {}", args.n_train, args.n_test, out.display());
        }
        SynthKind::Zone => {
            for k in 1..=args.zones {
                let zone = synthetic_zone(args.start_year, args.years, seed.wrapping_add(k as u64));
                let path = out.join(format!("zone{k}.csv"));
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                spnn::data::write_zone_csv(std::io::BufWriter::new(file), &zone.records)?;
                println!("{}: {} hourly records", path.display(), zone.records.len());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forecast_names_round_trip() {
        let name = forecast_file_name("zone_a", YearMonth::new(2013, 2), ModelKind::LinearQr);
        assert_eq!(name, "zone_a_2013-02.linear_qr.forecast.csv");
        let parsed = parse_forecast_file_name(Path::new(&name)).unwrap();
        assert_eq!(parsed, ("zone_a".to_string(), YearMonth::new(2013, 2), ModelKind::LinearQr));
        assert!(parse_forecast_file_name(Path::new("zone1.csv")).is_none());
    }
}
