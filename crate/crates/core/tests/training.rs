use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use spnn::baselines::train_linear_qr;
use spnn::quantile::pinball_loss;
use spnn::synth::hetero_dataset;
use spnn::{predict, train, ForecastMatrix, NetworkConfig, QuantileLevels, SmoothingConfig, TrainConfig};

fn standardized(n: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
    let (x, y) = hetero_dataset(n, seed);
    let mean = x.mean_axis(Axis(0)).unwrap();
    let std = x.std_axis(Axis(0), 0.0);
    ((x - &mean) / &std, y)
}

#[test]
fn objective_trends_down() {
    let (x, y) = standardized(1000, 2);
    let cfg = TrainConfig { epochs: 400, learning_rate: 0.005, ..TrainConfig::default() };
    let t = train(x.view(), y.view(), &QuantileLevels::intervals(), &NetworkConfig::spnn1(1, 1), &SmoothingConfig::default(), &cfg)
        .unwrap();
    let h = &t.loss_history;
    assert!(h[h.len() - 1] < 0.1 * h[0], "{} -> {}", h[0], h[h.len() - 1]);
    // 100-epoch moving average over the second half
    let tail = &h[h.len() / 2 - 100..];
    let avg: Vec<f64> = tail.windows(100).map(|w| w.iter().sum::<f64>() / 100.0).collect();
    let rises = avg.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-3)).count();
    assert!(rises as f64 <= 0.05 * avg.len() as f64, "{rises} rises in {}", avg.len());
}

#[test]
fn penalised_training_set_has_no_crossings() {
    let (x, y) = standardized(2000, 4);
    let levels = QuantileLevels::intervals();
    let cfg = TrainConfig { epochs: 200, learning_rate: 0.005, ..TrainConfig::default() };
    let t = train(x.view(), y.view(), &levels, &NetworkConfig::spnn2(1, 2), &SmoothingConfig::default(), &cfg).unwrap();
    let fm = ForecastMatrix::new(predict(&t.params, x.view()).unwrap(), levels).unwrap();
    assert_eq!(fm.crossings(1e-6), 0, "largest {}", fm.max_crossing_gap());
}

#[test]
fn seeded_training_is_reproducible() {
    let (x, y) = standardized(300, 5);
    let levels = QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap();
    let cfg = TrainConfig { epochs: 20, batch_size: 64, shuffle_seed: 9, ..TrainConfig::default() };
    let run = || train(x.view(), y.view(), &levels, &NetworkConfig::spnn1(1, 3), &SmoothingConfig::default(), &cfg).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.params, b.params);
    assert_eq!(a.loss_history, b.loss_history);
    assert_eq!(a.steps, 20 * 5);
}

/// Exact linear quantile regression in one feature: some optimal line
/// passes through two observations, so every pair is a candidate.
fn exact_linear_qr(x: &[f64], y: &[f64], tau: f64) -> (f64, f64, f64) {
    let loss = |a: f64, b: f64| x.iter().zip(y).map(|(&xi, &yi)| pinball_loss(yi - a - b * xi, tau)).sum::<f64>() / x.len() as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let b = (y[j] - y[i]) / (x[j] - x[i]);
            let a = y[i] - b * x[i];
            let l = loss(a, b);
            if l < best.0 {
                best = (l, a, b);
            }
        }
    }
    best
}

#[test]
fn linear_qr_approaches_exact_solution_as_alpha_shrinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let unit = Uniform::new(-1.0, 1.0).unwrap();
    let xs: Vec<f64> = (0..50).map(|_| unit.sample(&mut rng)).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let e: f64 = StandardNormal.sample(&mut rng);
            0.5 + 2.0 * x + 0.3 * e
        })
        .collect();
    let x = Array2::from_shape_vec((50, 1), xs.clone()).unwrap();
    let y = Array1::from(ys.clone());
    let tau = 0.7;
    let levels = QuantileLevels::new(vec![tau]).unwrap();
    let (oracle_loss, a0, b0) = exact_linear_qr(&xs, &ys, tau);
    let cfg = TrainConfig { epochs: 20_000, batch_size: 50, learning_rate: 0.01, ..TrainConfig::default() };
    let fit = |alpha: f64| {
        let qr = train_linear_qr(x.view(), y.view(), &levels, &SmoothingConfig::unpenalized(alpha), &cfg, 1).unwrap();
        let (a, b) = (qr.intercepts[0], qr.weights[[0, 0]]);
        let loss = xs.iter().zip(&ys).map(|(&xi, &yi)| pinball_loss(yi - a - b * xi, tau)).sum::<f64>() / 50.0;
        (loss, a, b)
    };
    let (sharp, a, b) = fit(0.001);
    let (blunt, ..) = fit(0.1);
    assert!(sharp >= oracle_loss - 1e-12);
    assert!(sharp - oracle_loss < 1e-4, "excess {}", sharp - oracle_loss);
    assert!(blunt - oracle_loss > sharp - oracle_loss);
    assert!((a - a0).abs() < 0.05 && (b - b0).abs() < 0.05, "({a}, {b}) vs ({a0}, {b0})");
}

#[test]
fn f32_training_tracks_f64() {
    let (x, y) = standardized(500, 6);
    let levels = QuantileLevels::new(vec![0.25, 0.5, 0.75]).unwrap();
    let cfg = TrainConfig { epochs: 100, learning_rate: 0.005, ..TrainConfig::default() };
    let net = NetworkConfig::spnn1(1, 4);
    let smoothing = SmoothingConfig::default();
    let t64 = train(x.view(), y.view(), &levels, &net, &smoothing, &cfg).unwrap();
    let (x32, y32) = (x.mapv(|v| v as f32), y.mapv(|v| v as f32));
    let t32 = train(x32.view(), y32.view(), &levels, &net, &smoothing, &cfg).unwrap();
    let p64 = predict(&t64.params, x.view()).unwrap();
    let p32 = predict(&t32.params, x32.view()).unwrap().mapv(f64::from);
    let gap = (&p64 - &p32).mapv(f64::abs).fold(0.0f64, |m, &v| m.max(v));
    assert!(gap < 0.02, "{gap}");
}
