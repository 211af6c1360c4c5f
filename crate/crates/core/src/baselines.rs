//! Comparison detectors: AGPO (a classifier trained against uniform
//! reference points) and distance to the k-th nearest neighbor.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gaal::{sample_noise, NoiseSpec};
use crate::matrix::Matrix;
use crate::nn::{Activation, DenseLayer, Init, Mlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgpoModel {
    pub classifier: Mlp,
    /// Number of real rows, and of reference points drawn.
    pub reference_count: usize,
    /// Trained with real rows labeled 0 and reference rows 1.
    #[serde(default)]
    pub swapped_labels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgpoConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Real rows per minibatch (matched by as many reference rows); `None` means `min(500, n)`.
    pub m: Option<usize>,
    pub seed: u64,
    pub hidden: Option<usize>,
    /// Label real rows 0 and reference rows 1; scoring flips to match.
    pub swap_labels: bool,
}

impl Default for AgpoConfig {
    fn default() -> Self {
        Self {
            epochs: 10_000,
            lr: 1e-2,
            m: None,
            seed: 0,
            hidden: None,
            swap_labels: false,
        }
    }
}

/// Same `d → ceil(sqrt(n)) → 1` network as the GAAL discriminator.
fn classifier(d: usize, n: usize, hidden: Option<usize>, rng: &mut ChaCha8Rng) -> Result<Mlp> {
    let h = hidden.unwrap_or_else(|| (n as f64).sqrt().ceil() as usize).max(1);
    let mut hidden = DenseLayer::init(d, h, Activation::Relu, Init::VarianceScaling, rng);
    hidden.center_in_unit_box(rng);
    Mlp::new(vec![
        hidden,
        DenseLayer::init(h, 1, Activation::Sigmoid, Init::Zeros, rng),
    ])
}

/// Draws `n` uniform points on `[0, 1]^d`, labels real rows 1 and reference
/// rows 0, and trains the classifier with minibatch SGD. Each epoch is one
/// shuffled pass over both sets.
pub fn agpo_fit(data: &Dataset, cfg: &AgpoConfig) -> Result<AgpoModel> {
    let x = &data.features;
    let (n, d) = (x.rows(), x.cols());
    if n == 0 || d == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    if cfg.lr.is_nan() || cfg.lr <= 0.0 {
        return Err(Error::invalid("learning rate must be positive"));
    }
    let m = cfg.m.unwrap_or_else(|| n.min(500));
    if m == 0 || m > n {
        return Err(Error::invalid(format!("batch size {m} must lie in 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = classifier(d, n, cfg.hidden, &mut rng)?;
    let reference = sample_noise(n, NoiseSpec { dim: d }, &mut rng);

    let (real_t, ref_t) = if cfg.swap_labels { (0.0, 1.0) } else { (1.0, 0.0) };
    let mut real_order: Vec<usize> = (0..n).collect();
    let mut ref_order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        real_order.shuffle(&mut rng);
        ref_order.shuffle(&mut rng);
        for (real_idx, ref_idx) in real_order.chunks(m).zip(ref_order.chunks(m)) {
            let batch = Matrix::vstack(&[&x.select_rows(real_idx), &reference.select_rows(ref_idx)])?;
            let mut targets = vec![real_t; real_idx.len()];
            targets.extend(std::iter::repeat_n(ref_t, ref_idx.len()));
            let pass = net.forward(&batch)?;
            let grads = net.backward(&pass, &targets)?;
            net.sgd_step(&grads, cfg.lr).map_err(|e| match e {
                Error::NonFinite { context, .. } => Error::NonFinite { context, epoch },
                other => other,
            })?;
        }
    }
    Ok(AgpoModel {
        classifier: net,
        reference_count: n,
        swapped_labels: cfg.swap_labels,
    })
}

/// `1 − C(x)` per row, or `C(x)` for a model trained with swapped labels.
pub fn agpo_score(model: &AgpoModel, x: &Matrix) -> Result<Vec<f64>> {
    let c = model.classifier.predict(x)?.into_vec();
    Ok(if model.swapped_labels {
        c
    } else {
        c.into_iter().map(|c| 1.0 - c).collect()
    })
}

/// Euclidean distance from each row to its k-th nearest other row (exact).
pub fn knn_score(x: &Matrix, k: usize) -> Result<Vec<f64>> {
    let n = x.rows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..{n}")));
    }
    let mut dist = vec![0.0; n - 1];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x.row(i);
        for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
            dist[slot] = xi.iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        let (_, kth, _) = dist.select_nth_unstable_by(k - 1, f64::total_cmp);
        out.push(kth.sqrt());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn knn_hand_distances() {
        assert_eq!(
            knn_score(&col(&[0.0, 1.0, 2.0, 10.0]), 1).unwrap(),
            vec![1.0, 1.0, 1.0, 8.0]
        );
    }

    #[test]
    fn knn_duplicates_score_zero() {
        let s = knn_score(&col(&[0.3, 0.3, 0.9, 0.9]), 1).unwrap();
        assert_eq!(s, vec![0.0; 4]);
    }

    #[test]
    fn knn_farthest_neighbor_at_max_k() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(knn_score(&x, 2).unwrap(), vec![5.0, 5.0, 20f64.sqrt()]);
        assert!(knn_score(&x, 3).is_err());
        assert!(knn_score(&x, 0).is_err());
    }

    fn small_dataset() -> Dataset {
        let x = sample_noise(40, NoiseSpec { dim: 2 }, &mut ChaCha8Rng::seed_from_u64(1));
        Dataset::from_raw(x, None, Provenance::InMemory).unwrap()
    }

    #[test]
    fn untrained_agpo_scores_half() {
        let ds = small_dataset();
        let model = agpo_fit(
            &ds,
            &AgpoConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let s = agpo_score(&model, &ds.features).unwrap();
        assert!(s.iter().all(|&v| v == 0.5));
        assert_eq!(model.reference_count, 40);
    }

    #[test]
    fn agpo_is_deterministic() {
        let ds = small_dataset();
        let cfg = AgpoConfig {
            epochs: 5,
            m: Some(16),
            ..Default::default()
        };
        let a = agpo_fit(&ds, &cfg).unwrap();
        let b = agpo_fit(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            agpo_score(&a, &ds.features).unwrap(),
            agpo_score(&b, &ds.features).unwrap()
        );
    }

    #[test]
    fn agpo_score_orientation() {
        let ds = small_dataset();
        let mut model = agpo_fit(
            &ds,
            &AgpoConfig {
                epochs: 0,
                ..Default::default()
            },
        )
        .unwrap();
        let last = model.classifier.layers_mut().last_mut().unwrap();
        last.bias_mut()[0] = 9f64.ln(); // C(x) = 0.9
        let s = agpo_score(&model, &ds.features).unwrap();
        assert!((s[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn agpo_rejects_empty() {
        let ds = Dataset {
            features: Matrix::zeros(0, 2),
            labels: None,
            provenance: Provenance::InMemory,
            normalizer: crate::dataset::Normalizer::identity(2),
        };
        assert!(agpo_fit(&ds, &AgpoConfig::default()).is_err());
    }
}
