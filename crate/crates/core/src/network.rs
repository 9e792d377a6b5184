//! Fully connected quantile network with explicit forward and backward passes.
//!
//! Every layer computes `Z = input * W^T + b` on a row-major batch. Hidden
//! layers apply `tanh` or `relu`; the output layer is the identity and has
//! one unit per quantile level.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{accumulate_penalty_grad, check_batch, smooth_pinball_grad, QuantileLevels, SmoothingConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(T::zero()),
        }
    }

    /// Derivative expressed through the pre-activation `z` and activation `h`.
    /// The relu subgradient at zero is taken as zero.
    #[inline]
    fn derivative<T: Scalar>(self, z: T, h: T) -> T {
        match self {
            Activation::Tanh => T::one() - h * h,
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidConfig(format!("unknown activation {other:?}"))),
        }
    }
}

/// Architecture of a quantile network. The output width comes from the quantile levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    /// Hidden layer widths; empty gives a linear quantile regression.
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkConfig {
    /// One hidden layer of 40 units.
    pub fn spnn1(input_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![40],
            activation: Activation::Tanh,
            seed,
        }
    }

    /// Two hidden layers of 20 and 40 units.
    pub fn spnn2(input_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden_widths: vec![20, 40],
            activation: Activation::Tanh,
            seed,
        }
    }

    /// No hidden layer.
    pub fn linear(input_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden_widths: Vec::new(),
            activation: Activation::Tanh,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be at least 1".into()));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn dims(&self, n_outputs: usize) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_widths);
        dims.push(n_outputs);
        dims
    }
}

/// One affine map: `weights` is `(n_out, n_in)`, `bias` has length `n_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: Array2::zeros((n_out, n_in)),
            bias: Array1::zeros(n_out),
        }
    }

    pub fn n_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.weights.nrows()
    }
}

/// Weights and biases of every layer, plus the hidden activation.
///
/// Gradients and optimizer moments share this type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    layers: Vec<Layer<T>>,
    activation: Activation,
}

impl<T: Scalar> NetworkParams<T> {
    pub fn new(layers: Vec<Layer<T>>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("a network needs at least one layer".into()));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.n_out() {
                return Err(Error::DimensionMismatch {
                    context: "bias length",
                    expected: layer.n_out(),
                    found: layer.bias.len(),
                });
            }
            if l > 0 && layer.n_in() != layers[l - 1].n_out() {
                return Err(Error::DimensionMismatch {
                    context: "layer chaining",
                    expected: layers[l - 1].n_out(),
                    found: layer.n_in(),
                });
            }
            let finite = layer.weights.iter().chain(layer.bias.iter()).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Domain(format!("layer {l} has non-finite parameters")));
            }
        }
        Ok(Self { layers, activation })
    }

    /// All-zero parameters for the widths `dims = [n_x, h_1, ..., M]`.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "need input and output widths");
        Self {
            layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            activation: Activation::Tanh,
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            layers: other
                .layers
                .iter()
                .map(|l| Layer::zeros(l.n_in(), l.n_out()))
                .collect(),
            activation: other.activation,
        }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").n_out()
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.bias.len() == b.bias.len())
    }

    /// Parameter at flat index `i` (layer by layer, weights row-major then bias).
    pub fn get_flat(&self, mut i: usize) -> T {
        for layer in &self.layers {
            let nw = layer.weights.len();
            if i < nw {
                return layer.weights.as_slice().expect("standard layout")[i];
            }
            i -= nw;
            if i < layer.bias.len() {
                return layer.bias[i];
            }
            i -= layer.bias.len();
        }
        panic!("flat parameter index out of range");
    }

    pub fn set_flat(&mut self, mut i: usize, value: T) {
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if i < nw {
                layer.weights.as_slice_mut().expect("standard layout")[i] = value;
                return;
            }
            i -= nw;
            if i < layer.bias.len() {
                layer.bias[i] = value;
                return;
            }
            i -= layer.bias.len();
        }
        panic!("flat parameter index out of range");
    }

    /// Layer that owns flat index `i`.
    pub fn layer_of_flat(&self, mut i: usize) -> usize {
        for (l, layer) in self.layers.iter().enumerate() {
            let n = layer.weights.len() + layer.bias.len();
            if i < n {
                return l;
            }
            i -= n;
        }
        panic!("flat parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// Seeded initialisation: weights `N(0, 1/fan_in)`, hidden biases zero and
/// output biases equal to the quantile levels.
///
/// Every output row starts as the same draw, so `q_m = s(x) + tau_m` and the
/// initial network is ordered at every input. A crossed start would open
/// with penalty gradients orders of magnitude above the loss gradients,
/// which linger in Adam's second-moment estimate for thousands of steps.
pub fn init_params<T: Scalar>(cfg: &NetworkConfig, levels: &QuantileLevels) -> Result<NetworkParams<T>> {
    cfg.validate()?;
    let dims = cfg.dims(levels.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let normal = Normal::new(0.0, (1.0 / fan_in as f64).sqrt()).expect("positive std");
        let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || T::lit(normal.sample(&mut rng)));
        layers.push(Layer {
            weights,
            bias: Array1::zeros(fan_out),
        });
    }
    let out = layers.last_mut().expect("at least one layer");
    let shared = out.weights.row(0).to_owned();
    for mut row in out.weights.rows_mut() {
        row.assign(&shared);
    }
    for (b, tau) in out.bias.iter_mut().zip(levels.iter()) {
        *b = T::lit(tau);
    }
    NetworkParams::new(layers, cfg.activation)
}

/// Pre-activations and hidden activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// `Z[l]` for every layer; the last entry is the network output.
    pre: Vec<Array2<T>>,
    /// `H[l]` for hidden layers only.
    hidden: Vec<Array2<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn batch_size(&self) -> usize {
        self.pre[0].nrows()
    }

    pub fn outputs(&self) -> ArrayView2<'_, T> {
        self.pre.last().expect("nonempty").view()
    }
}

/// Runs the batch `x` (`B x n_x`) through the network, returning the `B x M`
/// quantile estimates and the cache needed by [`backward`].
pub fn forward<T: Scalar>(params: &NetworkParams<T>, x: ArrayView2<'_, T>) -> Result<(Array2<T>, ForwardCache<T>)> {
    if x.ncols() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input columns",
            expected: params.input_dim(),
            found: x.ncols(),
        });
    }
    let act = params.activation;
    let n_layers = params.layers.len();
    let mut pre = Vec::with_capacity(n_layers);
    let mut hidden = Vec::with_capacity(n_layers - 1);
    for (l, layer) in params.layers.iter().enumerate() {
        let input = if l == 0 { x } else { hidden.last().map(|h: &Array2<T>| h.view()).expect("hidden") };
        let mut z = input.dot(&layer.weights.t());
        z += &layer.bias;
        if l + 1 < n_layers {
            hidden.push(z.mapv(|v| act.apply(v)));
        }
        pre.push(z);
    }
    let out = pre.last().expect("nonempty").clone();
    Ok((out, ForwardCache { pre, hidden }))
}

/// Forward pass without the cache.
pub fn predict<T: Scalar>(params: &NetworkParams<T>, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
    forward(params, x).map(|(out, _)| out)
}

/// Gradient of the composite objective on the batch `(x, y)` with respect to
/// every parameter.
///
/// The objective is the one evaluated by [`crate::composite_objective`]:
/// averaged smooth pinball loss, averaged crossing penalty and the weight
/// decay terms, all normalised by `B * M`.
pub fn backward<T: Scalar>(
    params: &NetworkParams<T>,
    cache: &ForwardCache<T>,
    x: ArrayView2<'_, T>,
    y: ArrayView1<'_, T>,
    taus: &[T],
    cfg: &SmoothingConfig,
) -> Result<NetworkParams<T>> {
    let n_layers = params.layers.len();
    if cache.pre.len() != n_layers || cache.batch_size() != x.nrows() {
        return Err(Error::DimensionMismatch {
            context: "forward cache batch size",
            expected: x.nrows(),
            found: cache.batch_size(),
        });
    }
    for (z, layer) in cache.pre.iter().zip(&params.layers) {
        if z.ncols() != layer.n_out() {
            return Err(Error::DimensionMismatch {
                context: "forward cache layer width",
                expected: layer.n_out(),
                found: z.ncols(),
            });
        }
    }
    if x.ncols() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input columns",
            expected: params.input_dim(),
            found: x.ncols(),
        });
    }
    let outputs = cache.outputs();
    check_batch(outputs, y, taus)?;

    let b = x.nrows();
    let m = taus.len();
    let scale = T::one() / T::from_usize(b * m).expect("batch size");
    let alpha = T::lit(cfg.alpha);

    // dE/dQ: the smooth loss term is -S'(y - q) per entry.
    let mut delta = Array2::<T>::zeros((b, m));
    for ((t, j), d) in delta.indexed_iter_mut() {
        *d = -smooth_pinball_grad(y[t] - outputs[[t, j]], taus[j], alpha) * scale;
    }
    if cfg.penalty_c > 0.0 {
        for (t, mut drow) in delta.axis_iter_mut(Axis(0)).enumerate() {
            let slice = drow.as_slice_mut().expect("row-major delta");
            accumulate_penalty_grad(outputs.row(t), cfg, scale, slice);
        }
    }

    let act = params.activation;
    let mut grads = NetworkParams::zeros_like(params);
    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let input = if l == 0 { x } else { cache.hidden[l - 1].view() };
        let lambda = T::lit(cfg.weight_decay(l, n_layers)) * scale;
        let g = &mut grads.layers[l];
        g.weights = delta.t().dot(&input);
        g.weights.scaled_add(lambda, &layer.weights);
        g.bias = delta.sum_axis(Axis(0));
        if l > 0 {
            let mut next = delta.dot(&layer.weights);
            Zip::from(&mut next)
                .and(&cache.pre[l - 1])
                .and(&cache.hidden[l - 1])
                .for_each(|d, &z, &h| *d *= act.derivative(z, h));
            delta = next;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::{composite_objective, ForecastMatrix};
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2};

    fn levels3() -> QuantileLevels {
        QuantileLevels::new(vec![0.1, 0.5, 0.9]).unwrap()
    }

    #[test]
    fn init_is_ordered_at_every_input() {
        let levels = QuantileLevels::intervals();
        let p: NetworkParams<f64> = init_params(&NetworkConfig::spnn2(3, 5), &levels).unwrap();
        let out = p.layers().last().unwrap();
        for row in out.weights.rows() {
            assert_eq!(row, out.weights.row(0));
        }
        let x = Array2::from_shape_fn((50, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let q = predict(&p, x.view()).unwrap();
        for row in q.rows() {
            for m in 1..row.len() {
                assert_abs_diff_eq!(row[m] - row[m - 1], 0.05, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn init_is_deterministic_with_tau_output_bias() {
        let cfg = NetworkConfig::spnn2(8, 7);
        let a: NetworkParams<f64> = init_params(&cfg, &levels3()).unwrap();
        let b: NetworkParams<f64> = init_params(&cfg, &levels3()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers().last().unwrap().bias, arr1(&[0.1, 0.5, 0.9]));
        for layer in &a.layers()[..a.layers().len() - 1] {
            assert!(layer.bias.iter().all(|&v| v == 0.0));
        }
        let c: NetworkParams<f64> = init_params(&NetworkConfig::spnn2(8, 8), &levels3()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_weight_scale_follows_fan_in() {
        let cfg = NetworkConfig {
            input_dim: 50,
            hidden_widths: vec![400],
            activation: Activation::Tanh,
            seed: 1,
        };
        let p: NetworkParams<f64> = init_params(&cfg, &levels3()).unwrap();
        let w = &p.layers()[0].weights;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let target = (1.0f64 / 50.0).sqrt();
        assert!((std - target).abs() < 0.2 * target, "std {std} target {target}");
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let mut p = NetworkParams::<f64>::zeros(&[3, 4, 3]);
        p.layers_mut()[1].bias = arr1(&[0.1, 0.5, 0.9]);
        let x = arr2(&[[1.0, -2.0, 3.0], [0.5, 0.0, 9.0]]);
        let out = predict(&p, x.view()).unwrap();
        for row in out.rows() {
            assert_eq!(row, arr1(&[0.1, 0.5, 0.9]));
        }
    }

    #[test]
    fn hand_computed_three_node_network() {
        // x -> 2 tanh units -> 1 output
        let layers = vec![
            Layer { weights: arr2(&[[0.5], [-1.0]]), bias: arr1(&[0.1, 0.2]) },
            Layer { weights: arr2(&[[2.0, 3.0]]), bias: arr1(&[-0.5]) },
        ];
        let p = NetworkParams::new(layers, Activation::Tanh).unwrap();
        let x = arr2(&[[0.8]]);
        let out = predict(&p, x.view()).unwrap();
        let h1 = (0.5f64 * 0.8 + 0.1).tanh();
        let h2 = (0.2f64 - 0.8).tanh();
        let expected = 2.0 * h1 + 3.0 * h2 - 0.5;
        assert_abs_diff_eq!(out[[0, 0]], expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, -1.1869144, epsilon = 1e-6);

        let relu = p.clone().with_activation(Activation::Relu);
        let out = predict(&relu, x.view()).unwrap();
        assert_abs_diff_eq!(out[[0, 0]], 2.0 * 0.5 + 3.0 * 0.0 - 0.5, epsilon = 1e-15);
    }

    #[test]
    fn forward_is_batch_consistent() {
        let p: NetworkParams<f64> = init_params(&NetworkConfig::spnn2(3, 3), &levels3()).unwrap();
        let x = Array2::from_shape_fn((7, 3), |(i, j)| (i as f64 * 0.37 - j as f64 * 0.81).sin());
        let batch = predict(&p, x.view()).unwrap();
        for i in 0..7 {
            let single = predict(&p, x.slice(ndarray::s![i..i + 1, ..])).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(single[[0, j]], batch[[i, j]], epsilon = 1e-12);
            }
        }
        assert_eq!(batch.dim(), (7, 3));
        let single_row = predict(&p, x.slice(ndarray::s![0..1, ..])).unwrap();
        assert_eq!(single_row.dim(), (1, 3));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = NetworkParams::<f64>::zeros(&[3, 2]);
        assert!(forward(&p, arr2(&[[1.0, 2.0]]).view()).is_err());
    }

    #[test]
    fn zero_residual_output_bias_gradient() {
        // constant output equal to every target: residuals are zero
        let mut p = NetworkParams::<f64>::zeros(&[2, 5, 3]);
        p.layers_mut()[1].bias = arr1(&[0.4, 0.4, 0.4]);
        let x = arr2(&[[0.3, -0.1], [1.0, 2.0], [0.0, 0.5], [-1.0, 0.2]]);
        let y = arr1(&[0.4, 0.4, 0.4, 0.4]);
        let taus = [0.1, 0.5, 0.9];
        let cfg = SmoothingConfig::unpenalized(0.1);
        let (_, cache) = forward(&p, x.view()).unwrap();
        let g = backward(&p, &cache, x.view(), y.view(), &taus, &cfg).unwrap();
        let gb = &g.layers()[1].bias;
        for (m, tau) in taus.iter().enumerate() {
            assert_abs_diff_eq!(gb[m], (0.5 - tau) / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn weight_decay_only_gradient() {
        // data gradient is zero once residuals vanish at tau = 0.5
        let p: NetworkParams<f64> = init_params(&NetworkConfig::spnn1(2, 3), &QuantileLevels::new(vec![0.5]).unwrap()).unwrap();
        let x = arr2(&[[0.3, -0.1], [1.0, 2.0]]);
        let out = predict(&p, x.view()).unwrap();
        let y = out.column(0).to_owned();
        let cfg = SmoothingConfig { lambda1: 0.3, lambda2: 0.7, ..SmoothingConfig::unpenalized(0.1) };
        let (_, cache) = forward(&p, x.view()).unwrap();
        let g = backward(&p, &cache, x.view(), y.view(), &[0.5], &cfg).unwrap();
        let nm = 2.0;
        for (l, lambda) in [(0, 0.3), (1, 0.7)] {
            let expected = &p.layers()[l].weights * (lambda / nm);
            for (a, b) in g.layers()[l].weights.iter().zip(expected.iter()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-15);
            }
            assert!(g.layers()[l].bias.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn backward_matches_finite_differences_small_network() {
        let levels = levels3();
        let cfg = SmoothingConfig { alpha: 0.1, penalty_c: 50.0, lambda1: 0.2, lambda2: 0.3, ..SmoothingConfig::default() };
        let mut p: NetworkParams<f64> = init_params(&NetworkConfig { input_dim: 2, hidden_widths: vec![5], activation: Activation::Tanh, seed: 11 }, &levels).unwrap();
        // crossed outputs so the penalty is active
        p.layers_mut()[1].bias = arr1(&[0.6, 0.2, 0.5]);
        let x = arr2(&[[0.3, -0.1], [1.0, 2.0], [0.0, 0.5], [-1.0, 0.2]]);
        let y = arr1(&[0.1, 0.7, 0.4, 0.3]);
        let taus = levels.to_scalars::<f64>();
        let (_, cache) = forward(&p, x.view()).unwrap();
        let g = backward(&p, &cache, x.view(), y.view(), &taus, &cfg).unwrap();
        let objective = |q: &NetworkParams<f64>| {
            let fm = ForecastMatrix::new(predict(q, x.view()).unwrap(), levels.clone()).unwrap();
            composite_objective(&fm, y.view(), q, &cfg).unwrap()
        };
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..p.len() {
            let mut up = p.clone();
            let mut dn = p.clone();
            up.set_flat(i, p.get_flat(i) + h);
            dn.set_flat(i, p.get_flat(i) - h);
            let fd = (objective(&up) - objective(&dn)) / (2.0 * h);
            let a = g.get_flat(i);
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn backward_rejects_stale_cache() {
        let p = NetworkParams::<f64>::zeros(&[2, 3, 2]);
        let x = arr2(&[[0.3, -0.1], [1.0, 2.0]]);
        let (_, cache) = forward(&p, x.view()).unwrap();
        let x3 = arr2(&[[0.3, -0.1], [1.0, 2.0], [0.0, 0.0]]);
        let r = backward(&p, &cache, x3.view(), arr1(&[0.0, 0.0, 0.0]).view(), &[0.1, 0.9], &SmoothingConfig::default());
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn flat_indexing_round_trips() {
        let mut p = NetworkParams::<f64>::zeros(&[2, 3, 2]);
        assert_eq!(p.len(), 2 * 3 + 3 + 3 * 2 + 2);
        for i in 0..p.len() {
            p.set_flat(i, i as f64);
        }
        for i in 0..p.len() {
            assert_eq!(p.get_flat(i), i as f64);
        }
        assert_eq!(p.layer_of_flat(8), 0);
        assert_eq!(p.layer_of_flat(9), 1);
        assert_eq!(p.layers()[1].bias, arr1(&[15.0, 16.0]));
    }

    #[test]
    fn params_new_validates_chaining() {
        let layers = vec![Layer::<f64>::zeros(2, 3), Layer::zeros(4, 1)];
        assert!(NetworkParams::new(layers, Activation::Tanh).is_err());
    }

    #[test]
    fn f32_forward_runs() {
        let p: NetworkParams<f32> = init_params(&NetworkConfig::spnn1(3, 1), &levels3()).unwrap();
        let x = Array2::<f32>::ones((4, 3));
        assert_eq!(predict(&p, x.view()).unwrap().dim(), (4, 3));
    }
}
