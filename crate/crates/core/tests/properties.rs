use gaal_core::baselines::knn_score;
use gaal_core::gaal::{allocate_generated, partition_by_score, subset_targets};
use gaal_core::nn::{bce_loss, init_orthogonal, Activation, DenseLayer, Init, Mlp};
use gaal_core::stats::{friedman_statistic, roc_auc};
use gaal_core::{gen_synthetic, Dataset, Family, Matrix, Provenance, SynthSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate().filter(|(i, _)| labels[*i] == 1) {
        let _ = i;
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] == 0 {
                pairs += 1.0;
                credit += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    credit / pairs
}

fn scored_labels(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    prop::collection::vec((0u8..12, 0u8..=1), 2..max)
        .prop_map(|cells| {
            let (s, l): (Vec<u8>, Vec<u8>) = cells.into_iter().unzip();
            (s.into_iter().map(|v| f64::from(v) * 0.25 - 1.0).collect(), l)
        })
        .prop_filter("both classes", |(_, l)| l.contains(&0) && l.contains(&1))
}

fn dataset_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2usize..40, 1usize..5).prop_flat_map(|(n, d)| (Just(n), Just(d), prop::collection::vec(-100.0f64..100.0, n * d)))
}

fn fixed_rng_net(seed: u64, widths: &[usize]) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = widths.len() - 2;
    Mlp::new(
        (0..=last)
            .map(|l| {
                let act = if l == last {
                    Activation::Sigmoid
                } else {
                    Activation::Relu
                };
                DenseLayer::init(widths[l], widths[l + 1], act, Init::VarianceScaling, &mut rng)
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    // nn-core

    #[test]
    fn gradients_match_central_differences(seed in 0u64..10_000, batch in 1usize..=8,
                                           widths in prop::collection::vec(1usize..=16, 2..=3)) {
        let mut widths = widths;
        widths.push(1);
        let mut net = fixed_rng_net(seed, &widths);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for layer in net.layers_mut() {
            for b in layer.bias_mut() {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        let x = Matrix::from_vec(batch, widths[0], (0..batch * widths[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let t: Vec<f64> = (0..batch).map(|_| rng.random()).collect();
        // Skip draws with a hidden unit sitting on the relu kink.
        let pass = net.forward(&x).unwrap();
        for (layer, act) in net.layers().iter().zip(&pass.activations) {
            if layer.activation() == Activation::Relu {
                prop_assume!(act.as_slice().iter().all(|&a| a == 0.0 || a > 1e-3));
            }
        }
        let grads = net.backward(&pass, &t).unwrap();
        let h = 1e-5;
        for (l, g) in grads.layers.iter().enumerate() {
            let nw = g.weights.as_slice().len();
            for p in 0..nw + g.bias.len() {
                let eval = |delta: f64| {
                    let mut probe = net.clone();
                    let layer = &mut probe.layers_mut()[l];
                    if p < nw { layer.weights_mut().as_mut_slice()[p] += delta } else { layer.bias_mut()[p - nw] += delta }
                    bce_loss(&probe.forward(&x).unwrap().output_column(), &t).unwrap()
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let analytic = if p < nw { g.weights.as_slice()[p] } else { g.bias[p - nw] };
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                prop_assert!(rel < 1e-4, "layer {} param {}: {} vs {}", l, p, analytic, numeric);
            }
        }
    }

    #[test]
    fn orthogonal_init_is_orthonormal(rows in 1usize..=64, cols in 1usize..=64, seed in any::<u64>()) {
        let w = init_orthogonal(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed));
        // Rows are orthonormal when rows <= cols, columns otherwise.
        let (outer, inner) = if rows <= cols { (rows, cols) } else { (cols, rows) };
        let at = |a: usize, i: usize| if rows <= cols { w[(a, i)] } else { w[(i, a)] };
        for a in 0..outer {
            for b in 0..outer {
                let dot: f64 = (0..inner).map(|i| at(a, i) * at(b, i)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn training_is_deterministic(seed in any::<u64>(), steps in 1usize..20) {
        let run = || {
            let mut net = fixed_rng_net(seed, &[3, 5, 1]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..steps {
                let x = Matrix::from_vec(4, 3, (0..12).map(|_| rng.random()).collect()).unwrap();
                let t: Vec<f64> = (0..4).map(|_| rng.random()).collect();
                let g = net.backward(&net.forward(&x).unwrap(), &t).unwrap();
                net.sgd_step(&g, 0.1).unwrap();
            }
            net.parameters()
        };
        let a = run();
        let b = run();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn convex_loss_does_not_rise(seed in any::<u64>(), d in 1usize..6, n in 1usize..16) {
        let mut net = fixed_rng_net(seed, &[d, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let t: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let loss = |net: &Mlp| bce_loss(&net.forward(&x).unwrap().output_column(), &t).unwrap();
        let mut prev = loss(&net);
        let mut rise = 0.0;
        for _ in 0..50 {
            let g = net.backward(&net.forward(&x).unwrap(), &t).unwrap();
            net.sgd_step(&g, 1e-3).unwrap();
            let now = loss(&net);
            rise += (now - prev).max(0.0);
            prev = now;
        }
        prop_assert!(rise <= 1e-9);
    }

    // gaal

    #[test]
    fn partition_is_a_balanced_ordered_cover(scores in prop::collection::vec(0.0f64..1.0, 1..300), k in 1usize..30) {
        prop_assume!(k <= scores.len());
        let subsets = partition_by_score(&scores, k).unwrap();
        prop_assert_eq!(subsets.len(), k);
        let mut all = subsets.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..scores.len()).collect::<Vec<_>>());
        let sizes: Vec<usize> = subsets.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let t = subset_targets(&subsets, &scores).unwrap();
        prop_assert!(t.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn allocation_sums_and_decreases(m in 1usize..5000, k in 1usize..64) {
        prop_assume!(k <= m);
        let q = allocate_generated(m, k).unwrap();
        prop_assert_eq!(q.len(), k);
        prop_assert_eq!(q.iter().sum::<usize>(), m);
        prop_assert!(q.windows(2).all(|w| w[0] >= w[1]));
    }

    // eval-stats

    #[test]
    fn rank_auc_equals_pairwise_counting((scores, labels) in scored_labels(51)) {
        prop_assert!((roc_auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn auc_ignores_increasing_transforms((scores, labels) in scored_labels(80), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let base = roc_auc(&scores, &labels).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubic: Vec<f64> = scores.iter().map(|s| s.powi(3) + s).collect();
        prop_assert!((roc_auc(&affine, &labels).unwrap() - base).abs() <= 1e-12);
        prop_assert!((roc_auc(&cubic, &labels).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn auc_complement_law((scores, labels) in scored_labels(80)) {
        let base = roc_auc(&scores, &labels).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        prop_assert!((roc_auc(&neg, &flipped).unwrap() - base).abs() <= 1e-12);
        prop_assert!((roc_auc(&neg, &labels).unwrap() - (1.0 - base)).abs() <= 1e-12);
    }

    #[test]
    fn friedman_ignores_algorithm_order(ranks in prop::collection::vec(1.0f64..12.0, 2..15), n in 2usize..40, seed in any::<u64>()) {
        let mut shuffled = ranks.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let a = friedman_statistic(&ranks, n).unwrap();
        let b = friedman_statistic(&shuffled, n).unwrap();
        prop_assert!((a.statistic - b.statistic).abs() <= 1e-9 * a.statistic.abs().max(1.0));
        prop_assert!((a.bracket - b.bracket).abs() <= 1e-9 * a.bracket.abs().max(1.0));
    }

    // baselines

    #[test]
    fn knn_is_permutation_equivariant((n, d, values) in dataset_strategy(), k in 1usize..10, seed in any::<u64>()) {
        prop_assume!(k < n);
        let x = Matrix::from_vec(n, d, values).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let base = knn_score(&x, k).unwrap();
        let permuted = knn_score(&x.select_rows(&perm), k).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert_eq!(permuted[i].to_bits(), base[p].to_bits());
        }
    }

    // synthgen

    #[test]
    fn synthetic_label_count(f in 0usize..4, n in 50usize..600, d in 1usize..6, rate in 0.01f64..0.3,
                             ratio in 0.0f64..0.9, seed in any::<u64>()) {
        let spec = SynthSpec { irrelevant_ratio: ratio, outlier_rate: rate, seed, ..SynthSpec::new(Family::ALL[f], n, d) };
        prop_assume!(spec.validate().is_ok());
        let ds = gen_synthetic(&spec).unwrap();
        prop_assert_eq!(ds.n(), n);
        prop_assert_eq!(ds.d(), d);
        prop_assert_eq!(ds.outlier_count(), Some((n as f64 * rate).floor() as usize));
    }

    #[test]
    fn normalization_is_idempotent((n, d, values) in dataset_strategy()) {
        let once = Dataset::from_raw(Matrix::from_vec(n, d, values).unwrap(), None, Provenance::InMemory).unwrap();
        let twice = once.renormalized().unwrap();
        prop_assert_eq!(&once.features, &twice.features);
        prop_assert!(once.features.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn noise_dimensions_carry_no_label_signal(f in 0usize..4, d in 2usize..12, ratio in 0.1f64..0.9, seed in any::<u64>()) {
        let spec = SynthSpec { irrelevant_ratio: ratio, seed, ..SynthSpec::new(Family::ALL[f], 2000, d) };
        prop_assume!(spec.validate().is_ok() && spec.noise_dims() > 0);
        let ds = gen_synthetic(&spec).unwrap();
        let labels = ds.labels.as_ref().unwrap();
        let gap_over_se = |c: usize| {
            let col = ds.features.column(c);
            let split = |flag: u8| -> Vec<f64> { col.iter().zip(labels).filter(|(_, &l)| l == flag).map(|(v, _)| *v).collect() };
            let (a, b) = (split(1), split(0));
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            let (ma, mb) = (mean(&a), mean(&b));
            let pooled = ((a.len() - 1) as f64 * var(&a, ma) + (b.len() - 1) as f64 * var(&b, mb)) / (a.len() + b.len() - 2) as f64;
            let se = (pooled * (1.0 / a.len() as f64 + 1.0 / b.len() as f64)).sqrt();
            (ma - mb).abs() / se
        };
        let informative = spec.informative_dims();
        for c in informative..d {
            prop_assert!(gap_over_se(c) < 4.0, "noise dim {} gap/se {}", c, gap_over_se(c));
        }
        prop_assert!((0..informative).any(|c| gap_over_se(c) > 4.0));
    }
}
