//! Dense feed-forward networks with exact backpropagation and plain SGD.
//!
//! A layer computes `a = act(W · a_prev + b)` with `W` stored row-major as
//! `fan_out × fan_in`. Networks are evaluated on whole batches: every
//! activation is a `samples × units` matrix.
//!
//! The output layer of any network trained with [`Mlp::backward`] must be a
//! sigmoid; the gradient at its pre-activation uses the `p − y` identity of
//! sigmoid + binary cross-entropy.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Predictions are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Orthogonal matrix from the QR factorization of standard-normal draws.
///
/// Columns of Q are multiplied by the sign of the matching diagonal entry of
/// R, so the result is a deterministic function of the draws. When
/// `rows < cols` the transpose is factorized and the rows come out orthonormal.
pub fn init_orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let draws = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = draws.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            out[(i, j)] = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
        }
    }
    out
}

/// `fan_out × fan_in` matrix with entries uniform on `±sqrt(3 / fan_in)`,
/// i.e. per-entry variance `1 / fan_in`.
pub fn init_variance_scaling<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = (3.0 / fan_in as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data).expect("sized buffer")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Identity matrix (square layers only); the orthogonal matrix with no rotation.
    Identity,
    Orthogonal,
    VarianceScaling,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerRecord", into = "LayerRecord")]
pub struct DenseLayer {
    activation: Activation,
    weights: Matrix,
    bias: Vec<f64>,
}

/// On-disk form of a layer: dimensions, activation tag, row-major weights, biases.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRecord {
    fan_in: usize,
    fan_out: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl TryFrom<LayerRecord> for DenseLayer {
    type Error = Error;

    fn try_from(rec: LayerRecord) -> Result<Self> {
        let weights = Matrix::from_vec(rec.fan_out, rec.fan_in, rec.weights)?;
        DenseLayer::new(weights, rec.bias, rec.activation)
    }
}

impl From<DenseLayer> for LayerRecord {
    fn from(l: DenseLayer) -> Self {
        LayerRecord {
            fan_in: l.fan_in(),
            fan_out: l.fan_out(),
            activation: l.activation,
            weights: l.weights.into_vec(),
            bias: l.bias,
        }
    }
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: weights.rows(),
                got: bias.len(),
            });
        }
        if !weights.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("layer parameters must be finite"));
        }
        Ok(Self {
            activation,
            weights,
            bias,
        })
    }

    /// Zero biases; weights from the chosen initializer.
    pub fn init<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let weights = match init {
            Init::Identity => {
                let mut w = Matrix::zeros(fan_out, fan_in);
                for i in 0..fan_in.min(fan_out) {
                    w[(i, i)] = 1.0;
                }
                w
            }
            Init::Orthogonal => init_orthogonal(fan_out, fan_in, rng),
            Init::VarianceScaling => init_variance_scaling(fan_in, fan_out, rng),
            Init::Zeros => Matrix::zeros(fan_out, fan_in),
        };
        Self {
            activation,
            weights,
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Matrix {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// Sets each bias so the unit's hyperplane passes through a point drawn
    /// uniformly from the unit box: `b_j = −w_j · c_j`.
    pub fn center_in_unit_box<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = self.fan_in();
        for j in 0..self.fan_out() {
            let w = &self.weights.as_slice()[j * fan_in..(j + 1) * fan_in];
            self.bias[j] = -w.iter().map(|wi| wi * rng.random::<f64>()).sum::<f64>();
        }
    }

    fn forward(&self, input: &Matrix) -> Matrix {
        let (fan_in, fan_out) = (self.fan_in(), self.fan_out());
        let rows = input.rows();
        let mut out = Matrix::zeros(rows, fan_out);
        for s in 0..rows {
            out.row_mut(s).copy_from_slice(&self.bias);
        }
        // out += input · Wᵀ
        gemm(
            (rows, fan_in, fan_out),
            (input.as_slice(), fan_in, 1),
            (self.weights.as_slice(), 1, fan_in),
            (out.as_mut_slice(), fan_out, 1),
        );
        for v in out.as_mut_slice() {
            *v = self.activation.apply(*v);
        }
        out
    }
}

/// `c += a · b` with `(m, k, n)` shapes and `(data, row stride, col stride)` operands.
fn gemm(
    (m, k, n): (usize, usize, usize),
    a: (&[f64], usize, usize),
    b: (&[f64], usize, usize),
    c: (&mut [f64], usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every operand slice covers the strided extents implied by (m, k, n).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            1.0,
            c.0.as_mut_ptr(),
            c.1 as isize,
            c.2 as isize,
        );
    }
}

/// Inputs and every layer's output from one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub inputs: Matrix,
    pub activations: Vec<Matrix>,
}

impl ForwardPass {
    pub fn output(&self) -> &Matrix {
        self.activations.last().unwrap_or(&self.inputs)
    }

    /// First output column as a vector; the prediction of a single-output network.
    pub fn output_column(&self) -> Vec<f64> {
        self.output().column(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Per-layer parameter gradients, shape-matched to the owning [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|g| g.weights.as_slice().iter().chain(&g.bias))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.is_finite() && g.bias.iter().all(|b| b.is_finite()))
    }
}

/// Inputs with one target in `[0, 1]` per row.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Vec<f64>,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Vec<f64>) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(Error::DimensionMismatch {
                context: "batch targets",
                expected: inputs.rows(),
                got: targets.len(),
            });
        }
        if !inputs.is_finite() || targets.iter().any(|t| !t.is_finite() || !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("batch entries must be finite with targets in [0, 1]"));
        }
        Ok(Self { inputs, targets })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRecord", into = "MlpRecord")]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

#[derive(Serialize, Deserialize)]
struct MlpRecord {
    layers: Vec<DenseLayer>,
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(rec: MlpRecord) -> Result<Self> {
        Mlp::new(rec.layers)
    }
}

impl From<Mlp> for MlpRecord {
    fn from(m: Mlp) -> Self {
        MlpRecord { layers: m.layers }
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[1].fan_in() != pair[0].fan_out() {
                return Err(Error::DimensionMismatch {
                    context: "layer chain",
                    expected: pair[0].fan_out(),
                    got: pair[1].fan_in(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.fan_in() * l.fan_out() + l.fan_out()).sum()
    }

    /// All parameters flattened, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<ForwardPass> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                got: inputs.cols(),
            });
        }
        let mut activations: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = layer.forward(activations.last().unwrap_or(inputs));
            activations.push(next);
        }
        Ok(ForwardPass {
            inputs: inputs.clone(),
            activations,
        })
    }

    /// Output matrix only, without keeping intermediate activations.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                got: inputs.cols(),
            });
        }
        let mut current = self.layers[0].forward(inputs);
        for layer in &self.layers[1..] {
            current = layer.forward(&current);
        }
        Ok(current)
    }

    /// Gradients of `bce_loss(output, targets)` for a single sigmoid output.
    pub fn backward(&self, pass: &ForwardPass, targets: &[f64]) -> Result<Gradients> {
        Ok(self.backward_with_input_grad(pass, targets)?.0)
    }

    /// Like [`Mlp::backward`], also returning the loss gradient with respect to
    /// the network inputs (used to push gradients into a generator).
    pub fn backward_with_input_grad(&self, pass: &ForwardPass, targets: &[f64]) -> Result<(Gradients, Matrix)> {
        self.check_pass(pass)?;
        let last = &self.layers[self.layers.len() - 1];
        if last.activation != Activation::Sigmoid || last.fan_out() != 1 {
            return Err(Error::invalid(
                "cross-entropy backward needs a single sigmoid output unit",
            ));
        }
        let out = pass.output();
        if targets.len() != out.rows() {
            return Err(Error::DimensionMismatch {
                context: "backward targets",
                expected: out.rows(),
                got: targets.len(),
            });
        }
        let n = out.rows() as f64;
        let mut delta = Matrix::zeros(out.rows(), 1);
        for (s, t) in targets.iter().enumerate() {
            delta[(s, 0)] = (out[(s, 0)] - t) / n;
        }
        Ok(self.backprop(pass, delta))
    }

    /// Backpropagates a gradient given with respect to the network output
    /// (post-activation). Returns parameter gradients and the input gradient.
    pub fn backward_from_output_grad(&self, pass: &ForwardPass, output_grad: &Matrix) -> Result<(Gradients, Matrix)> {
        self.check_pass(pass)?;
        let out = pass.output();
        if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
            return Err(Error::DimensionMismatch {
                context: "output gradient",
                expected: out.rows() * out.cols(),
                got: output_grad.rows() * output_grad.cols(),
            });
        }
        let act = self.layers[self.layers.len() - 1].activation;
        let mut delta = output_grad.clone();
        for (d, a) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
            *d *= act.derivative_from_output(*a);
        }
        Ok(self.backprop(pass, delta))
    }

    fn check_pass(&self, pass: &ForwardPass) -> Result<()> {
        if pass.activations.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                context: "cached activations",
                expected: self.layers.len(),
                got: pass.activations.len(),
            });
        }
        for (layer, act) in self.layers.iter().zip(&pass.activations) {
            if act.cols() != layer.fan_out() || act.rows() != pass.inputs.rows() {
                return Err(Error::invalid("cached activations do not match the network"));
            }
        }
        if pass.inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "cached inputs",
                expected: self.input_dim(),
                got: pass.inputs.cols(),
            });
        }
        Ok(())
    }

    /// `delta` is the loss gradient at the last layer's pre-activation.
    fn backprop(&self, pass: &ForwardPass, mut delta: Matrix) -> (Gradients, Matrix) {
        let samples = pass.inputs.rows();
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut input_grad = Matrix::zeros(0, 0);
        for t in (0..self.layers.len()).rev() {
            let layer = &self.layers[t];
            let (fan_in, fan_out) = (layer.fan_in(), layer.fan_out());
            let prev = if t == 0 { &pass.inputs } else { &pass.activations[t - 1] };

            let mut gw = Matrix::zeros(fan_out, fan_in);
            let mut gb = vec![0.0; fan_out];
            let mut gprev = Matrix::zeros(samples, fan_in);
            for s in 0..samples {
                for (g, d) in gb.iter_mut().zip(delta.row(s)) {
                    *g += d;
                }
            }
            // gw += deltaᵀ · prev
            gemm(
                (fan_out, samples, fan_in),
                (delta.as_slice(), 1, fan_out),
                (prev.as_slice(), fan_in, 1),
                (gw.as_mut_slice(), fan_in, 1),
            );
            // gprev += delta · W
            gemm(
                (samples, fan_out, fan_in),
                (delta.as_slice(), fan_out, 1),
                (layer.weights.as_slice(), fan_in, 1),
                (gprev.as_mut_slice(), fan_in, 1),
            );
            grads.push(LayerGradient { weights: gw, bias: gb });

            if t == 0 {
                input_grad = gprev;
            } else {
                let below = self.layers[t - 1].activation;
                for (g, a) in gprev.as_mut_slice().iter_mut().zip(prev.as_slice()) {
                    *g *= below.derivative_from_output(*a);
                }
                delta = gprev;
            }
        }
        grads.reverse();
        (Gradients { layers: grads }, input_grad)
    }

    /// Plain SGD: `w ← w − lr·g`. Rejects non-finite gradients and leaves the
    /// network untouched in that case.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be finite and nonnegative, got {lr}"
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                context: "gradient layers",
                expected: self.layers.len(),
                got: grads.layers.len(),
            });
        }
        for (layer, g) in self.layers.iter().zip(&grads.layers) {
            if g.weights.rows() != layer.fan_out()
                || g.weights.cols() != layer.fan_in()
                || g.bias.len() != layer.fan_out()
            {
                return Err(Error::invalid("gradient shape does not match the network"));
            }
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite {
                context: "gradient".into(),
                epoch: 0,
            });
        }
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            for (w, gw) in layer.weights.as_mut_slice().iter_mut().zip(g.weights.as_slice()) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
        Ok(())
    }
}

/// Mean binary cross-entropy with fractional targets allowed.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::invalid("cross-entropy of an empty batch"));
    }
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            context: "cross-entropy",
            expected: pred.len(),
            got: target.len(),
        });
    }
    let total: f64 = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_orthonormality_error(m: &Matrix) -> f64 {
        // Gram matrix over the shorter side.
        let by_rows = m.rows() <= m.cols();
        let n = m.rows().min(m.cols());
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = if by_rows {
                    m.row(i).iter().zip(m.row(j)).map(|(a, b)| a * b).sum()
                } else {
                    (0..m.rows()).map(|r| m[(r, i)] * m[(r, j)]).sum()
                };
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expected).abs());
            }
        }
        worst
    }

    #[test]
    fn orthogonal_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = init_orthogonal(3, 3, &mut rng);
        assert!(max_orthonormality_error(&q) < 1e-6);
    }

    #[test]
    fn orthogonal_one_by_one_is_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = init_orthogonal(1, 1, &mut rng);
        assert!((q[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_tall_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = init_orthogonal(5, 2, &mut rng);
        let c1 = q.column(0);
        let c2 = q.column(1);
        let dot: f64 = c1.iter().zip(&c2).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-6);
        for c in [&c1, &c2] {
            let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn orthogonal_all_shapes_up_to_64() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for rows in [1, 2, 7, 16, 33, 64] {
            for cols in [1, 3, 16, 40, 64] {
                let q = init_orthogonal(rows, cols, &mut rng);
                assert!(max_orthonormality_error(&q) < 1e-6, "{rows}x{cols}");
            }
        }
    }

    #[test]
    fn orthogonal_sign_correction_is_deterministic() {
        let a = init_orthogonal(4, 4, &mut ChaCha8Rng::seed_from_u64(5));
        let b = init_orthogonal(4, 4, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }

    #[test]
    fn variance_scaling_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = init_variance_scaling(3, 50, &mut rng);
        assert!(w.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
        let w = init_variance_scaling(12, 50, &mut rng);
        assert!(w.as_slice().iter().all(|v| (-0.5..=0.5).contains(v)));
        assert_eq!((w.rows(), w.cols()), (50, 12));
    }

    #[test]
    fn variance_scaling_empirical_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = init_variance_scaling(4, 25_000, &mut rng);
        let v = w.as_slice();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!((var - 0.25).abs() < 0.01, "variance {var}");
    }

    fn single(weights: Vec<Vec<f64>>, bias: Vec<f64>, act: Activation) -> Mlp {
        let w = Matrix::from_rows(&weights).unwrap();
        Mlp::new(vec![DenseLayer::new(w, bias, act).unwrap()]).unwrap()
    }

    #[test]
    fn zero_sigmoid_network_outputs_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(vec![
            DenseLayer::init(3, 4, Activation::Relu, Init::Zeros, &mut rng),
            DenseLayer::init(4, 1, Activation::Sigmoid, Init::Zeros, &mut rng),
        ])
        .unwrap();
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.0, 0.0, 9.0]]).unwrap();
        let out = net.predict(&x).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn relu_identity_layer() {
        let net = single(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], Activation::Relu);
        let x = Matrix::from_rows(&[vec![2.0, -3.0], vec![0.4, 0.7]]).unwrap();
        let out = net.forward(&x).unwrap();
        assert_eq!(out.output().row(0), &[2.0, 0.0]);
        assert_eq!(out.output().row(1), &[0.4, 0.7]);
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = single(vec![vec![1.0, 0.0]], vec![0.0], Activation::Sigmoid);
        let x = Matrix::zeros(2, 3);
        assert!(matches!(net.forward(&x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn bce_values() {
        assert!((bce_loss(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(bce_loss(&[1.0 - BCE_EPS, BCE_EPS], &[1.0, 0.0]).unwrap() < 1e-6);
        assert!((bce_loss(&[0.9, 0.1], &[1.0, 0.0]).unwrap() - 0.105_360_515_657_826_3).abs() < 1e-12);
        assert!(bce_loss(&[], &[]).is_err());
        assert!(bce_loss(&[0.0, 1.0], &[0.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn sigmoid_unit_gradient_is_p_minus_y() {
        let net = single(vec![vec![0.7]], vec![-0.2], Activation::Sigmoid);
        let x = Matrix::from_rows(&[vec![1.5]]).unwrap();
        let pass = net.forward(&x).unwrap();
        let p = pass.output()[(0, 0)];
        let g = net.backward(&pass, &[1.0]).unwrap();
        // Bias gradient equals the pre-activation gradient for one sample.
        assert!((g.layers[0].bias[0] - (p - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_inputs_give_zero_first_layer_weight_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(vec![
            DenseLayer::init(3, 5, Activation::Relu, Init::VarianceScaling, &mut rng),
            DenseLayer::init(5, 1, Activation::Sigmoid, Init::VarianceScaling, &mut rng),
        ])
        .unwrap();
        let pass = net.forward(&Matrix::zeros(4, 3)).unwrap();
        let g = net.backward(&pass, &[1.0, 0.0, 1.0, 0.5]).unwrap();
        assert!(g.layers[0].weights.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sgd_arithmetic() {
        let mut net = single(vec![vec![1.0]], vec![0.0], Activation::Sigmoid);
        let grads = Gradients {
            layers: vec![LayerGradient {
                weights: Matrix::from_rows(&[vec![0.5]]).unwrap(),
                bias: vec![0.0],
            }],
        };
        net.sgd_step(&grads, 0.01).unwrap();
        assert!((net.layers()[0].weights()[(0, 0)] - 0.995).abs() < 1e-15);

        let before = net.clone();
        net.sgd_step(&grads, 0.0).unwrap();
        assert_eq!(net, before);
        let zero = Gradients {
            layers: vec![LayerGradient {
                weights: Matrix::zeros(1, 1),
                bias: vec![0.0],
            }],
        };
        net.sgd_step(&zero, 0.3).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn sgd_rejects_non_finite_gradient() {
        let mut net = single(vec![vec![1.0]], vec![0.0], Activation::Sigmoid);
        let before = net.clone();
        let bad = Gradients {
            layers: vec![LayerGradient {
                weights: Matrix::from_rows(&[vec![f64::NAN]]).unwrap(),
                bias: vec![0.0],
            }],
        };
        assert!(matches!(net.sgd_step(&bad, 0.1), Err(Error::NonFinite { .. })));
        assert_eq!(net, before);
    }

    #[test]
    fn layer_chain_is_validated() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = Mlp::new(vec![
            DenseLayer::init(3, 4, Activation::Relu, Init::Zeros, &mut rng),
            DenseLayer::init(5, 1, Activation::Sigmoid, Init::Zeros, &mut rng),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(vec![
            DenseLayer::init(3, 4, Activation::Relu, Init::Orthogonal, &mut rng),
            DenseLayer::init(4, 1, Activation::Sigmoid, Init::VarianceScaling, &mut rng),
        ])
        .unwrap();
        let text = serde_json::to_string(&net).unwrap();
        assert!(text.contains("\"fan_in\":3"));
        let back: Mlp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn json_with_broken_chain_is_rejected() {
        let layer = |fan_in: usize| {
            format!(
                r#"{{"fan_in":{fan_in},"fan_out":1,"activation":"relu","weights":[{}],"bias":[0]}}"#,
                vec!["0"; fan_in].join(",")
            )
        };
        let text = format!(r#"{{"layers":[{},{}]}}"#, layer(2), layer(3));
        assert!(serde_json::from_str::<Mlp>(&text).is_err());
    }
}
