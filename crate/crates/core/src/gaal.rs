//! Single- and multiple-objective generative adversarial active learning.
//!
//! A discriminator learns to separate the real rows (target 1) from points
//! produced by `k` sub-generators (target 0). In multi-objective mode the
//! real rows are split by their discriminator output into `k` equal blocks;
//! sub-generator `i` is pushed towards the smallest discriminator value of
//! its block, and receives a larger share of the generated batch the less
//! concentrated its block is. Once the generator loss plateaus the
//! generators are frozen and the discriminator keeps training on its own.
//!
//! One epoch is one minibatch iteration: a discriminator step followed by a
//! step of every sub-generator. Outlier score is `1 − D(x)`.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{bce_loss, Activation, DenseLayer, Init, Mlp};
use crate::stats::roc_auc;

/// Phase 2 ends once no discriminator parameter moves more than this in an epoch.
pub const PHASE2_PARAM_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaalConfig {
    /// Number of sub-generators; 1 is SO-GAAL.
    pub k: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    /// Minibatch size; `None` means `min(500, n)`.
    pub m: Option<usize>,
    /// Cap on adversarial (phase 1) epochs.
    pub max_epochs: usize,
    pub stop_window: usize,
    pub stop_eps: f64,
    /// Cap on discriminator-only (phase 2) epochs.
    pub d_patience: usize,
    pub seed: u64,
    /// Dense layers per sub-generator, each `d → d`.
    pub generator_layers: usize,
    /// Discriminator hidden width; `None` means `ceil(sqrt(n))`.
    pub discriminator_hidden: Option<usize>,
}

impl Default for GaalConfig {
    fn default() -> Self {
        Self {
            k: 10,
            lr_g: 1e-4,
            lr_d: 1e-2,
            m: None,
            max_epochs: 1500,
            stop_window: 20,
            stop_eps: 1e-3,
            d_patience: 20_000,
            seed: 0,
            generator_layers: 3,
            discriminator_hidden: None,
        }
    }
}

impl GaalConfig {
    pub fn batch_size(&self, n: usize) -> usize {
        self.m.unwrap_or_else(|| n.min(500))
    }

    pub fn discriminator_width(&self, n: usize) -> usize {
        self.discriminator_hidden
            .unwrap_or_else(|| (n as f64).sqrt().ceil() as usize)
            .max(1)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("empty dataset"));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.k > n {
            return Err(Error::invalid(format!("k = {} exceeds the {n} rows", self.k)));
        }
        if !(self.lr_g > 0.0 && self.lr_d > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        let m = self.batch_size(n);
        if m == 0 || m > n {
            return Err(Error::invalid(format!("batch size {m} must lie in 1..={n}")));
        }
        if m < self.k {
            return Err(Error::invalid(format!("batch size {m} is smaller than k = {}", self.k)));
        }
        if self.stop_window < 2 {
            return Err(Error::invalid("stop_window must be at least 2"));
        }
        if self.generator_layers == 0 {
            return Err(Error::invalid("generators need at least one layer"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Adversarial,
    DiscriminatorOnly,
    Done,
}

/// One row of training telemetry. `g_loss` is absent once the generators are frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaalModel {
    pub sub_generators: Vec<Mlp>,
    pub discriminator: Mlp,
    #[serde(skip)]
    pub telemetry: Vec<EpochRecord>,
    pub phase: Phase,
}

impl GaalModel {
    /// Fresh networks: identity-initialized relu generators (so each starts
    /// by reproducing its uniform noise), and a discriminator with a
    /// variance-scaling relu hidden layer whose units are centered in the
    /// unit box, followed by a zero-initialized sigmoid output.
    pub fn init<R: Rng + ?Sized>(d: usize, n: usize, cfg: &GaalConfig, rng: &mut R) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("data dimension must be positive"));
        }
        let mut sub_generators = Vec::with_capacity(cfg.k);
        for _ in 0..cfg.k {
            let layers = (0..cfg.generator_layers)
                .map(|_| DenseLayer::init(d, d, Activation::Relu, Init::Identity, rng))
                .collect();
            sub_generators.push(Mlp::new(layers)?);
        }
        let h = cfg.discriminator_width(n);
        let mut hidden = DenseLayer::init(d, h, Activation::Relu, Init::VarianceScaling, rng);
        hidden.center_in_unit_box(rng);
        let discriminator = Mlp::new(vec![
            hidden,
            DenseLayer::init(h, 1, Activation::Sigmoid, Init::Zeros, rng),
        ])?;
        Ok(Self {
            sub_generators,
            discriminator,
            telemetry: Vec::new(),
            phase: Phase::Adversarial,
        })
    }

    pub fn k(&self) -> usize {
        self.sub_generators.len()
    }

    pub fn dim(&self) -> usize {
        self.discriminator.input_dim()
    }

    /// `D(x)` for every row.
    pub fn discriminate(&self, x: &Matrix) -> Result<Vec<f64>> {
        Ok(self.discriminator.predict(x)?.into_vec())
    }
}

/// Uniform noise on `[0, 1)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub dim: usize,
}

pub fn sample_noise<R: Rng + ?Sized>(count: usize, spec: NoiseSpec, rng: &mut R) -> Matrix {
    let data = (0..count * spec.dim).map(|_| rng.random::<f64>()).collect();
    Matrix::from_vec(count, spec.dim, data).expect("sized buffer")
}

/// Row indices split into `k` blocks of ascending discriminator output.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPartition {
    pub subsets: Vec<Vec<usize>>,
    pub targets: Vec<f64>,
    pub quotas: Vec<usize>,
}

impl SubsetPartition {
    pub fn build(scores: &[f64], k: usize, generated_total: usize) -> Result<Self> {
        let subsets = partition_by_score(scores, k)?;
        let targets = subset_targets(&subsets, scores)?;
        let quotas = allocate_generated(generated_total, k)?;
        Ok(Self {
            subsets,
            targets,
            quotas,
        })
    }
}

/// Stable ascending sort by score, then `k` contiguous blocks; the first
/// `n mod k` blocks hold one extra row.
pub fn partition_by_score(scores: &[f64], k: usize) -> Result<Vec<Vec<usize>>> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot split {n} rows into {k} subsets")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// `T_i` = minimum score in subset `i`.
pub fn subset_targets(subsets: &[Vec<usize>], scores: &[f64]) -> Result<Vec<f64>> {
    subsets
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.is_empty() {
                return Err(Error::invalid(format!("subset {i} is empty")));
            }
            s.iter()
                .map(|&r| {
                    scores
                        .get(r)
                        .copied()
                        .ok_or_else(|| Error::invalid(format!("row {r} outside the score vector")))
                })
                .try_fold(f64::INFINITY, |m, v| Ok(m.min(v?)))
        })
        .collect()
}

/// Splits `total` generated points over `k` subsets with weights
/// `(k − i + 1) / (k(k+1)/2)`, rounding by largest remainder (earlier
/// subsets win ties).
pub fn allocate_generated(total: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || total < k {
        return Err(Error::invalid(format!(
            "cannot allocate {total} points over {k} generators"
        )));
    }
    let denom = k * (k + 1) / 2;
    let mut quotas = Vec::with_capacity(k);
    let mut remainders = Vec::with_capacity(k);
    for i in 0..k {
        let num = total * (k - i);
        quotas.push(num / denom);
        remainders.push((num % denom, i));
    }
    let assigned: usize = quotas.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(total - assigned) {
        quotas[i] += 1;
    }
    Ok(quotas)
}

/// True once the mean loss of the latest `window` epochs is no longer at
/// least `eps` (relatively) below the mean of the window before it.
pub fn nash_stop_check(loss_history: &[f64], window: usize, eps: f64) -> bool {
    if window == 0 || loss_history.len() < 2 * window {
        return false;
    }
    let n = loss_history.len();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let latest = mean(&loss_history[n - window..]);
    let previous = mean(&loss_history[n - 2 * window..n - window]);
    (previous - latest) / previous.max(1e-12) < eps
}

fn check_finite(v: f64, context: &str, epoch: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
            epoch,
        })
    }
}

/// One SGD step of the discriminator on real rows (target 1) against all
/// generated rows (target 0). Returns the loss on the same batch after the step.
pub fn discriminator_update(model: &mut GaalModel, real: &Matrix, fakes: &[Matrix], lr_d: f64) -> Result<f64> {
    let mut parts = vec![real];
    parts.extend(fakes.iter());
    let inputs = Matrix::vstack(&parts)?;
    let generated = inputs.rows() - real.rows();
    let mut targets = vec![1.0; real.rows()];
    targets.extend(std::iter::repeat_n(0.0, generated));

    let pass = model.discriminator.forward(&inputs)?;
    check_finite(bce_loss(&pass.output_column(), &targets)?, "discriminator loss", 0)?;
    let grads = model.discriminator.backward(&pass, &targets)?;
    if lr_d > 0.0 {
        model.discriminator.sgd_step(&grads, lr_d)?;
    }
    let after = model.discriminator.predict(&inputs)?;
    check_finite(bce_loss(after.as_slice(), &targets)?, "discriminator loss", 0)
}

/// One SGD step of sub-generator `i` towards discriminator output `target`
/// through the frozen discriminator. Returns the post-step loss on `noise`.
pub fn subgenerator_update(model: &mut GaalModel, i: usize, target: f64, noise: &Matrix, lr_g: f64) -> Result<f64> {
    if i >= model.k() {
        return Err(Error::invalid(format!("sub-generator {i} of {}", model.k())));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::invalid(format!("generator target {target} outside [0, 1]")));
    }
    let targets = vec![target; noise.rows()];
    let gen = &model.sub_generators[i];
    let gen_pass = gen.forward(noise)?;
    let disc_pass = model.discriminator.forward(gen_pass.output())?;
    check_finite(bce_loss(&disc_pass.output_column(), &targets)?, "generator loss", 0)?;
    let (_, fake_grad) = model.discriminator.backward_with_input_grad(&disc_pass, &targets)?;
    let (gen_grads, _) = gen.backward_from_output_grad(&gen_pass, &fake_grad)?;
    model.sub_generators[i].sgd_step(&gen_grads, lr_g)?;

    let fake = model.sub_generators[i].predict(noise)?;
    let out = model.discriminator.predict(&fake)?;
    check_finite(bce_loss(out.as_slice(), &targets)?, "generator loss", 0)
}

/// `1 − D(x)` per row.
pub fn score(model: &GaalModel, x: &Matrix) -> Result<Vec<f64>> {
    Ok(model.discriminate(x)?.into_iter().map(|p| 1.0 - p).collect())
}

fn telemetry_auc(labels: Option<&[u8]>, d_out: &[f64]) -> Option<f64> {
    let labels = labels?;
    let scores: Vec<f64> = d_out.iter().map(|p| 1.0 - p).collect();
    roc_auc(&scores, labels).ok()
}

fn with_epoch(err: Error, epoch: usize) -> Error {
    match err {
        Error::NonFinite { context, .. } => Error::NonFinite { context, epoch },
        other => other,
    }
}

/// SO-GAAL: one generator with the classic target 1. Any `k` in `cfg` is
/// replaced by 1.
pub fn so_gaal_fit(data: &Dataset, cfg: &GaalConfig) -> Result<GaalModel> {
    let cfg = GaalConfig { k: 1, ..cfg.clone() };
    mo_gaal_fit(data, &cfg)
}

/// MO-GAAL training. With `k = 1` this is exactly SO-GAAL (target 1).
pub fn mo_gaal_fit(data: &Dataset, cfg: &GaalConfig) -> Result<GaalModel> {
    let x = &data.features;
    let (n, d) = (x.rows(), x.cols());
    cfg.validate(n)?;
    if !x.is_finite() {
        return Err(Error::invalid("features must be finite"));
    }
    let labels = data.labels.as_deref();
    let k = cfg.k;
    let m = cfg.batch_size(n);
    let noise = NoiseSpec { dim: d };
    let quotas = allocate_generated(m, k)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GaalModel::init(d, n, cfg, &mut rng)?;
    if cfg.max_epochs == 0 {
        return Ok(model);
    }

    let generate = |model: &GaalModel, rng: &mut ChaCha8Rng| -> Result<(Matrix, Vec<Matrix>)> {
        let real = x.select_rows(&sample_indices(rng, n, m).into_vec());
        let mut fakes = Vec::with_capacity(k);
        for (g, &q) in model.sub_generators.iter().zip(&quotas) {
            fakes.push(g.predict(&sample_noise(q, noise, rng))?);
        }
        Ok((real, fakes))
    };

    let mut g_history = Vec::new();
    let mut epoch = 0;
    while epoch < cfg.max_epochs {
        let mut step = || -> Result<EpochRecord> {
            let (real, fakes) = generate(&model, &mut rng)?;
            let d_loss = discriminator_update(&mut model, &real, &fakes, cfg.lr_d)?;
            let d_out = if k > 1 || labels.is_some() {
                model.discriminate(x)?
            } else {
                Vec::new()
            };
            let targets = if k == 1 {
                vec![1.0]
            } else {
                subset_targets(&partition_by_score(&d_out, k)?, &d_out)?
            };
            let mut g_total = 0.0;
            for (i, &t) in targets.iter().enumerate() {
                let z = sample_noise(m, noise, &mut rng);
                g_total += subgenerator_update(&mut model, i, t, &z, cfg.lr_g)?;
            }
            Ok(EpochRecord {
                epoch,
                d_loss,
                g_loss: Some(g_total / k as f64),
                auc: telemetry_auc(labels, &d_out),
            })
        };
        let record = step().map_err(|e| with_epoch(e, epoch))?;
        g_history.push(record.g_loss.unwrap_or_default());
        model.telemetry.push(record);
        epoch += 1;
        if nash_stop_check(&g_history, cfg.stop_window, cfg.stop_eps) {
            break;
        }
    }

    model.phase = Phase::DiscriminatorOnly;
    for _ in 0..cfg.d_patience {
        let before = model.discriminator.parameters();
        let mut step = || -> Result<EpochRecord> {
            let (real, fakes) = generate(&model, &mut rng)?;
            let d_loss = discriminator_update(&mut model, &real, &fakes, cfg.lr_d)?;
            let auc = match labels {
                Some(_) => telemetry_auc(labels, &model.discriminate(x)?),
                None => None,
            };
            Ok(EpochRecord {
                epoch,
                d_loss,
                g_loss: None,
                auc,
            })
        };
        let record = step().map_err(|e| with_epoch(e, epoch))?;
        model.telemetry.push(record);
        epoch += 1;
        let moved = model
            .discriminator
            .parameters()
            .iter()
            .zip(&before)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        if moved < PHASE2_PARAM_TOL {
            break;
        }
    }
    model.phase = Phase::Done;
    Ok(model)
}
