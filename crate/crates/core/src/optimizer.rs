//! Minibatch Adam training and finite-difference gradient checking.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{backward, forward, init_params, predict, Activation, NetworkConfig, NetworkParams};
use crate::quantile::{data_objective, weight_decay_term, QuantileLevels, SmoothingConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Full passes over the training rows.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub shuffle_seed: u64,
    /// Optional cap on the total number of minibatch updates.
    pub max_steps: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            batch_size: 200,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            shuffle_seed: 0,
            max_steps: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::InvalidConfig("adam_eps must be positive".into()));
        }
        if self.max_steps == Some(0) {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// First and second moment estimates of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: NetworkParams<T>,
    pub second: NetworkParams<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &NetworkParams<T>) -> Self {
        Self {
            first: NetworkParams::zeros_like(params),
            second: NetworkParams::zeros_like(params),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step<T: Scalar>(
    params: &mut NetworkParams<T>,
    grads: &NetworkParams<T>,
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.first) {
        return Err(Error::DimensionMismatch {
            context: "adam parameter shapes",
            expected: params.len(),
            found: grads.len(),
        });
    }
    for (l, g) in grads.layers().iter().enumerate() {
        if g.weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { what: "weight gradient", layer: l });
        }
        if g.bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { what: "bias gradient", layer: l });
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let lr = T::lit(cfg.learning_rate);
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let c1 = T::lit(1.0 - cfg.beta1.powf(t));
    let c2 = T::lit(1.0 - cfg.beta2.powf(t));
    let eps = T::lit(cfg.adam_eps);
    let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    let layers = params
        .layers_mut()
        .iter_mut()
        .zip(grads.layers())
        .zip(state.first.layers_mut().iter_mut().zip(state.second.layers_mut().iter_mut()));
    for ((p, g), (m, v)) in layers {
        Zip::from(&mut p.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .and(&g.weights)
            .for_each(|p, m, v, &g| update(p, m, v, g));
        Zip::from(&mut p.bias)
            .and(&mut m.bias)
            .and(&mut v.bias)
            .and(&g.bias)
            .for_each(|p, m, v, &g| update(p, m, v, g));
    }
    Ok(())
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub params: NetworkParams<T>,
    /// Mean minibatch objective of each epoch.
    pub loss_history: Vec<f64>,
    /// Number of Adam updates performed.
    pub steps: usize,
}

/// Trains a freshly initialised network on `(x, y)`.
pub fn train<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    levels: &QuantileLevels,
    net: &NetworkConfig,
    smoothing: &SmoothingConfig,
    cfg: &TrainConfig,
) -> Result<Trained<T>> {
    net.validate()?;
    if x.ncols() != net.input_dim {
        return Err(Error::DimensionMismatch {
            context: "training features vs network input",
            expected: net.input_dim,
            found: x.ncols(),
        });
    }
    let params = init_params(net, levels)?;
    train_from(params, x, y, levels, smoothing, cfg)
}

/// Continues training from `params` over shuffled minibatches for the
/// configured number of epochs (or until `max_steps` updates).
pub fn train_from<T: Scalar>(
    mut params: NetworkParams<T>,
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    levels: &QuantileLevels,
    smoothing: &SmoothingConfig,
    cfg: &TrainConfig,
) -> Result<Trained<T>> {
    smoothing.validate()?;
    cfg.validate()?;
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "training targets vs rows",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if params.output_dim() != levels.len() {
        return Err(Error::DimensionMismatch {
            context: "network outputs vs quantile levels",
            expected: levels.len(),
            found: params.output_dim(),
        });
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Domain("training data contains non-finite values".into()));
    }

    let taus = levels.to_scalars::<T>();
    let n = x.nrows();
    let m = taus.len();
    let mut state = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps = 0usize;

    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let (out, cache) = forward(&params, xb.view())?;
            let objective = data_objective(out.view(), yb.view(), &taus, smoothing)?
                + weight_decay_term(&params, smoothing, chunk.len() * m);
            let value = objective.to_f64_lossy();
            if !value.is_finite() {
                return Err(Error::Diverged { iteration: epoch, value });
            }
            total += value;
            batches += 1;
            let grads = backward(&params, &cache, xb.view(), yb.view(), &taus, smoothing)?;
            adam_step(&mut params, &grads, &mut state, cfg)?;
            steps += 1;
            if cfg.max_steps.is_some_and(|cap| steps >= cap) {
                history.push(total / batches as f64);
                break 'epochs;
            }
        }
        history.push(total / batches as f64);
    }
    if !params.is_finite() {
        return Err(Error::Diverged {
            iteration: history.len(),
            value: f64::NAN,
        });
    }
    Ok(Trained {
        params,
        loss_history: history,
        steps,
    })
}

/// Composite objective of `params` over the full set `(x, y)`.
pub fn objective_on<T: Scalar>(
    params: &NetworkParams<T>,
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    levels: &QuantileLevels,
    cfg: &SmoothingConfig,
) -> Result<T> {
    let out = predict(params, x)?;
    let taus = levels.to_scalars::<T>();
    Ok(data_objective(out.view(), y, &taus, cfg)? + weight_decay_term(params, cfg, x.nrows() * taus.len()))
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Flat index of the worst parameter.
    pub worst_index: usize,
    /// Layer that owns the worst parameter.
    pub worst_layer: usize,
}

/// Entries whose analytic and numeric gradients are both below this are
/// compared in absolute terms.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Default finite-difference step of [`gradient_check`].
pub const GRADCHECK_STEP: f64 = 1e-4;

/// Checks [`backward`] against fourth-order central differences of the
/// composite objective, over every parameter.
///
/// The five-point stencil lets `step` be large enough that roundoff in the
/// objective stays far below the smallest gradient entries.
pub fn gradient_check(
    params: &NetworkParams<f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    levels: &QuantileLevels,
    cfg: &SmoothingConfig,
    step: f64,
) -> Result<GradCheck> {
    let taus = levels.to_scalars::<f64>();
    let (_, cache) = forward(params, x)?;
    let analytic = backward(params, &cache, x, y, &taus, cfg)?;
    gradient_check_against(params, &analytic, x, y, levels, cfg, step)
}

/// Like [`gradient_check`] but against a caller-supplied gradient.
pub fn gradient_check_against(
    params: &NetworkParams<f64>,
    analytic: &NetworkParams<f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    levels: &QuantileLevels,
    cfg: &SmoothingConfig,
    step: f64,
) -> Result<GradCheck> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    if !params.same_shape(analytic) {
        return Err(Error::DimensionMismatch {
            context: "analytic gradient shape",
            expected: params.len(),
            found: analytic.len(),
        });
    }
    let mut probe = params.clone();
    let mut worst = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
        worst_layer: 0,
    };
    for i in 0..params.len() {
        let base = params.get_flat(i);
        let mut at = |offset: f64| {
            probe.set_flat(i, base + offset);
            objective_on(&probe, x, y, levels, cfg)
        };
        let (up2, up, down, down2) = (at(2.0 * step)?, at(step)?, at(-step)?, at(-2.0 * step)?);
        probe.set_flat(i, base);
        let numeric = (8.0 * (up - down) - (up2 - down2)) / (12.0 * step);
        let a = analytic.get_flat(i);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        if err > worst.max_rel_error || err.is_nan() {
            worst = GradCheck {
                max_rel_error: if err.is_nan() { f64::INFINITY } else { err },
                worst_index: i,
                worst_layer: params.layer_of_flat(i),
            };
        }
    }
    Ok(worst)
}

/// A small random network, batch and objective for gradient checking.
#[derive(Debug, Clone)]
pub struct GradCheckInstance {
    pub params: NetworkParams<f64>,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub levels: QuantileLevels,
    pub smoothing: SmoothingConfig,
}

/// Distance kept between every relu pre-activation or penalty hinge and its kink.
const KINK_MARGIN: f64 = 1e-3;
/// Output weights are shrunk and output biases jittered so adjacent quantiles
/// cross by moderate amounts: the penalty is active without dwarfing the
/// data term, which would leave small gradient entries below roundoff.
const OUTPUT_WEIGHT_SCALE: f64 = 0.1;
const OUTPUT_BIAS_JITTER: f64 = 0.05;

impl GradCheckInstance {
    /// Draws a random instance with `hidden_layers` hidden layers, at least
    /// one active crossing-penalty term and every kink at least `1e-3` away.
    /// Inputs are redrawn until both hold.
    pub fn random(seed: u64, hidden_layers: usize, activation: Activation) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_x = rng.random_range(2..=4);
        let m = rng.random_range(2..=5);
        let batch = rng.random_range(3..=6);
        let hidden: Vec<usize> = (0..hidden_layers).map(|_| rng.random_range(3..=6)).collect();
        let mut taus: Vec<f64> = (0..m).map(|_| rng.random_range(0.02..0.98)).collect();
        taus.sort_by(f64::total_cmp);
        taus.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        if taus.len() < 2 {
            taus = vec![0.25, 0.75];
        }
        let levels = QuantileLevels::new(taus).expect("sorted distinct levels");
        let net = NetworkConfig {
            input_dim: n_x,
            hidden_widths: hidden,
            activation,
            seed: rng.random(),
        };
        let mut params: NetworkParams<f64> = init_params(&net, &levels).expect("valid config");
        let hidden_jitter = Normal::new(0.0, 0.5).expect("std");
        let out_jitter = Normal::new(0.0, OUTPUT_BIAS_JITTER).expect("std");
        let n_layers = params.layers().len();
        for (l, layer) in params.layers_mut().iter_mut().enumerate() {
            if l + 1 == n_layers {
                // independent rows; the ordered start of `init_params` rarely crosses
                let std = OUTPUT_WEIGHT_SCALE / (layer.n_in() as f64).sqrt();
                let draw = Normal::new(0.0, std).expect("std");
                layer.weights.mapv_inplace(|_| draw.sample(&mut rng));
                layer.bias.mapv_inplace(|b| b + out_jitter.sample(&mut rng));
            } else {
                layer.bias.mapv_inplace(|b| b + hidden_jitter.sample(&mut rng));
            }
        }
        let alpha = 10f64.powf(rng.random_range(-1.3..0.0));
        let smoothing = SmoothingConfig {
            alpha,
            penalty_c: 1000.0,
            penalty_eps: rng.random_range(0.0..0.05),
            lambda1: rng.random_range(0.0..0.1),
            lambda2: rng.random_range(0.0..0.1),
            lambda_hidden: rng.random_range(0.0..0.1),
            include_zero_floor: rng.random(),
        };
        let unit = Uniform::new(-2.0, 2.0).expect("range");
        let targets = Normal::new(0.5, 0.5).expect("std");
        for attempt in 0.. {
            if attempt % 50 == 49 {
                // no active term yet: push the top quantile down
                let out = params.layers_mut().last_mut().expect("output layer");
                let m = out.bias.len();
                out.bias[m - 1] -= 0.1;
            }
            let x = Array2::from_shape_simple_fn((batch, n_x), || unit.sample(&mut rng));
            let y = Array1::from_shape_simple_fn(batch, || targets.sample(&mut rng));
            let inst = Self {
                params: params.clone(),
                x,
                y,
                levels: levels.clone(),
                smoothing: smoothing.clone(),
            };
            if inst.penalty_active() && !inst.near_kink() {
                return inst;
            }
        }
        unreachable!("attempt counter is unbounded")
    }

    /// Whether some adjacent gap (or the zero floor) violates the margin.
    pub fn penalty_active(&self) -> bool {
        let out = predict(&self.params, self.x.view()).expect("shapes");
        let eps = self.smoothing.penalty_eps;
        out.rows().into_iter().any(|row| {
            (self.smoothing.include_zero_floor && row[0] < eps) || (1..row.len()).any(|m| row[m] - row[m - 1] < eps)
        })
    }

    fn near_kink(&self) -> bool {
        let out = predict(&self.params, self.x.view()).expect("shapes");
        let eps = self.smoothing.penalty_eps;
        for row in out.rows() {
            if self.smoothing.include_zero_floor && (eps - row[0]).abs() < KINK_MARGIN {
                return true;
            }
            if (1..row.len()).any(|m| (eps - (row[m] - row[m - 1])).abs() < KINK_MARGIN) {
                return true;
            }
        }
        if self.params.activation() == Activation::Relu {
            let mut h = self.x.clone();
            let n = self.params.layers().len();
            for layer in &self.params.layers()[..n - 1] {
                let mut z = h.dot(&layer.weights.t());
                z += &layer.bias;
                if z.iter().any(|v| v.abs() < KINK_MARGIN) {
                    return true;
                }
                h = z.mapv(|v| v.max(0.0));
            }
        }
        false
    }

    pub fn check(&self, step: f64) -> Result<GradCheck> {
        gradient_check(&self.params, self.x.view(), self.y.view(), &self.levels, &self.smoothing, step)
    }

    pub fn analytic_gradient(&self) -> Result<NetworkParams<f64>> {
        let (_, cache) = forward(&self.params, self.x.view())?;
        backward(&self.params, &cache, self.x.view(), self.y.view(), &self.levels.to_scalars::<f64>(), &self.smoothing)
    }
}

/// Scales the largest-magnitude weight entry of `grads` by `factor`.
pub fn corrupt_largest_weight(grads: &mut NetworkParams<f64>, factor: f64) {
    let mut best: Option<(usize, usize, f64)> = None;
    for (l, layer) in grads.layers().iter().enumerate() {
        for (k, &g) in layer.weights.iter().enumerate() {
            if best.is_none_or(|(_, _, b)| g.abs() > b) {
                best = Some((l, k, g.abs()));
            }
        }
    }
    if let Some((l, k, _)) = best {
        let w = grads.layers_mut()[l].weights.as_slice_mut().expect("standard layout");
        w[k] *= factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr1;

    fn single_scalar_params(v: f64) -> NetworkParams<f64> {
        let mut p = NetworkParams::<f64>::zeros(&[1, 1]);
        p.layers_mut()[0].weights[[0, 0]] = v;
        p
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        for g in [1e-3, -0.5, 2.0, -300.0] {
            let mut p = single_scalar_params(1.0);
            let mut grads = NetworkParams::zeros_like(&p);
            grads.layers_mut()[0].weights[[0, 0]] = g;
            let mut state = AdamState::new(&p);
            adam_step(&mut p, &grads, &mut state, &cfg).unwrap();
            let moved = p.layers()[0].weights[[0, 0]] - 1.0;
            assert_abs_diff_eq!(moved, -cfg.learning_rate * g.signum(), epsilon = 1e-6);
            assert_eq!(state.step, 1);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let cfg = TrainConfig::default();
        let mut p = single_scalar_params(0.7);
        let grads = NetworkParams::zeros_like(&p);
        let mut state = AdamState::new(&p);
        for _ in 0..100 {
            adam_step(&mut p, &grads, &mut state, &cfg).unwrap();
        }
        assert_eq!(p, single_scalar_params(0.7));
        assert_eq!(state.step, 100);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut p = NetworkParams::<f64>::zeros(&[2, 3, 1]);
        let mut grads = NetworkParams::zeros_like(&p);
        grads.layers_mut()[1].bias[0] = f64::NAN;
        let mut state = AdamState::new(&p);
        let err = adam_step(&mut p, &grads, &mut state, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { layer: 1, .. }), "{err}");
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { beta1: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
    }

    fn toy_problem() -> (Array2<f64>, Array1<f64>) {
        let n = 64;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64 * 2.0 - 1.0);
        let y = x.column(0).mapv(|v| 0.5 * v + 0.1 * (7.0 * v).sin());
        (x, y)
    }

    #[test]
    fn training_is_deterministic_and_reduces_objective() {
        let (x, y) = toy_problem();
        let levels = QuantileLevels::new(vec![0.25, 0.5, 0.75]).unwrap();
        let net = NetworkConfig { input_dim: 1, hidden_widths: vec![8], activation: Activation::Tanh, seed: 5 };
        let smoothing = SmoothingConfig { alpha: 0.05, ..SmoothingConfig::default() };
        let cfg = TrainConfig { epochs: 50, batch_size: 16, learning_rate: 0.01, shuffle_seed: 3, ..Default::default() };
        let a = train(x.view(), y.view(), &levels, &net, &smoothing, &cfg).unwrap();
        let b = train(x.view(), y.view(), &levels, &net, &smoothing, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.loss_history.len(), 50);
        assert_eq!(a.steps, 50 * 4);
        let init: NetworkParams<f64> = init_params(&net, &levels).unwrap();
        let before = objective_on(&init, x.view(), y.view(), &levels, &smoothing).unwrap();
        let after = objective_on(&a.params, x.view(), y.view(), &levels, &smoothing).unwrap();
        assert!(after <= before, "{after} > {before}");
    }

    #[test]
    fn short_last_batch_is_kept_and_step_cap_applies() {
        let (x, y) = toy_problem();
        let levels = QuantileLevels::new(vec![0.5]).unwrap();
        let net = NetworkConfig::linear(1, 0);
        let cfg = TrainConfig { epochs: 3, batch_size: 60, ..Default::default() };
        let t = train(x.view(), y.view(), &levels, &net, &SmoothingConfig::default(), &cfg).unwrap();
        assert_eq!(t.steps, 6);
        let capped = TrainConfig { max_steps: Some(5), ..cfg };
        let t = train(x.view(), y.view(), &levels, &net, &SmoothingConfig::default(), &capped).unwrap();
        assert_eq!(t.steps, 5);
        assert_eq!(t.loss_history.len(), 3);
    }

    #[test]
    fn divergence_is_reported() {
        let x = Array2::from_elem((4, 1), 1.0);
        let y = arr1(&[1.0, f64::INFINITY, 0.0, 0.0]);
        let levels = QuantileLevels::new(vec![0.5]).unwrap();
        let r = train(x.view(), y.view(), &levels, &NetworkConfig::linear(1, 0), &SmoothingConfig::default(), &TrainConfig::default());
        assert!(r.is_err());
    }

    #[test]
    fn gradcheck_passes_and_detects_corruption() {
        for (seed, depth, act) in [(1, 1, Activation::Tanh), (2, 2, Activation::Tanh), (3, 1, Activation::Relu)] {
            let inst = GradCheckInstance::random(seed, depth, act);
            let report = inst.check(1e-5).unwrap();
            assert!(report.max_rel_error < 1e-5, "{report:?}");
            let mut grads = inst.analytic_gradient().unwrap();
            corrupt_largest_weight(&mut grads, 1.1);
            let bad = gradient_check_against(&inst.params, &grads, inst.x.view(), inst.y.view(), &inst.levels, &inst.smoothing, 1e-5).unwrap();
            assert!(bad.max_rel_error > 1e-2, "{bad:?}");
        }
    }

    #[test]
    fn gradcheck_small_alpha_looser_tolerance() {
        let mut inst = GradCheckInstance::random(9, 1, Activation::Tanh);
        inst.smoothing.alpha = 0.001;
        let report = inst.check(1e-5).unwrap();
        assert!(report.max_rel_error < 1e-3, "{report:?}");
    }

    #[test]
    fn gradcheck_rejects_bad_step() {
        let inst = GradCheckInstance::random(4, 1, Activation::Tanh);
        assert!(inst.check(0.0).is_err());
    }
}
