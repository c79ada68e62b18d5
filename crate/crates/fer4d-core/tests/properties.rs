//! Cross-module invariants, mostly property-based.

use fer4d_core::fusion::{collaborate, make_folds, predict, ScoreCube, Stream};
use fer4d_core::mesh::CLASS_COUNT;
use fer4d_core::neural::{ConvNetConfig, ConvNetModel, DifferentiableClassifier, Tensor, TrainConfig};
use fer4d_core::rankpool::{
    arp_coefficients, compensated_sum, dynamic_image, PoolingConfig, PoolingVariant,
};
use fer4d_core::render::ProfileTag;
use proptest::prelude::*;

proptest! {
    #[test]
    fn arp_coefficient_nullity(t in 1usize..200) {
        for variant in [PoolingVariant::LinearArp, PoolingVariant::HarmonicArp] {
            let sum = compensated_sum(&arp_coefficients(t, variant));
            prop_assert!(sum.abs() <= 1e-12);
        }
    }

    #[test]
    fn linear_pooling_reversal_antisymmetry(
        frames in proptest::collection::vec(
            proptest::collection::vec(-10.0f64..10.0, 6), 1..12)
    ) {
        let cfg = PoolingConfig::default();
        let fwd = dynamic_image(&frames, &cfg).unwrap();
        let rev: Vec<Vec<f64>> = frames.iter().rev().cloned().collect();
        let bwd = dynamic_image(&rev, &cfg).unwrap();
        for (a, b) in fwd.values.iter().zip(&bwd.values) {
            prop_assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn pooling_annihilates_constant_offsets(
        base in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 4), 2..10),
        offset in proptest::collection::vec(-100.0f64..100.0, 4),
        scale in 0.1f64..10.0,
    ) {
        for variant in [PoolingVariant::LinearArp, PoolingVariant::HarmonicArp] {
            let cfg = PoolingConfig { variant, ..Default::default() };
            let plain = dynamic_image(&base, &cfg).unwrap();
            let shifted: Vec<Vec<f64>> = base
                .iter()
                .map(|f| f.iter().zip(&offset).map(|(&v, &o)| scale * v + o).collect())
                .collect();
            let pooled = dynamic_image(&shifted, &cfg).unwrap();
            for (s, p) in pooled.values.iter().zip(&plain.values) {
                // Tolerance scales with the annihilated offset magnitude.
                prop_assert!((s - scale * p).abs() < 1e-9 * (1.0 + offset.iter().fold(0.0f64, |a, &b| a.max(b.abs()))));
            }
        }
    }

    #[test]
    fn collaboration_matches_bruteforce_triple_loop(seed in 0u64..1000) {
        let cube = random_cube(seed, 5);
        let streams = [Stream::Dynamic, Stream::Landmark];
        let views = [ProfileTag::Rp, ProfileTag::Fp, ProfileTag::Lp];
        let fused = collaborate(&cube, &streams, &views).unwrap();
        // Independent accumulation order: per (view, stream, label).
        for n in 0..cube.n_samples {
            for l in 0..CLASS_COUNT {
                let mut acc = 0.0;
                for &v in &views {
                    for &s in &streams {
                        acc += cube.slice(s, v).unwrap()[n][l];
                    }
                }
                acc /= views.len() as f64;
                prop_assert!((fused.rows[n][l] - acc).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn argmax_invariance(seed in 0u64..500, scale in 0.1f64..50.0) {
        let cube = random_cube(seed, 4);
        let streams = [Stream::Dynamic, Stream::Landmark];
        let views = [ProfileTag::Rp, ProfileTag::Fp];
        let base = predict(&collaborate(&cube, &streams, &views).unwrap());

        // Positive scaling of every entry.
        let mut scaled = ScoreCube::new(cube.n_samples);
        for (s, v, rows) in cube.slices() {
            let rows2: Vec<[f64; CLASS_COUNT]> = rows
                .iter()
                .map(|r| {
                    let mut o = *r;
                    for x in o.iter_mut() {
                        *x *= scale;
                    }
                    o
                })
                .collect();
            scaled.set_slice(*s, *v, rows2).unwrap();
        }
        let scaled_pred = predict(&collaborate(&scaled, &streams, &views).unwrap());
        for (a, b) in base.iter().zip(&scaled_pred) {
            prop_assert_eq!(a.label, b.label);
        }

        // Appending a uniform-distribution view.
        let mut extended = cube.clone();
        let uniform = vec![[1.0 / CLASS_COUNT as f64; CLASS_COUNT]; cube.n_samples];
        extended.set_slice(Stream::Dynamic, ProfileTag::Lp, uniform.clone()).unwrap();
        extended.set_slice(Stream::Landmark, ProfileTag::Lp, uniform).unwrap();
        let views3 = [ProfileTag::Rp, ProfileTag::Fp, ProfileTag::Lp];
        let ext_pred = predict(&collaborate(&extended, &streams, &views3).unwrap());
        for (a, b) in base.iter().zip(&ext_pred) {
            prop_assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn folds_are_always_disjoint_and_sized(n in 5usize..40, k in 1usize..10, seed in 0u64..100) {
        prop_assume!(n >= k);
        let subjects: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let split = make_folds(&subjects, k, seed).unwrap();
        split.check_disjoint().unwrap();
        let n_test = ((0.2 * n as f64).round() as usize).max(1);
        for fold in &split.folds {
            prop_assert_eq!(fold.test.len(), n_test);
            prop_assert_eq!(fold.val.len(), n_test);
            prop_assert_eq!(fold.train.len(), n - 2 * n_test);
        }
    }
}

/// Deterministic pseudo-random score cube with per-slice distributions.
fn random_cube(seed: u64, n: usize) -> ScoreCube {
    let mut cube = ScoreCube::new(n);
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state % 1000) as f64 / 1000.0 + 1e-3
    };
    for stream in [Stream::Dynamic, Stream::Landmark] {
        for view in [ProfileTag::Rp, ProfileTag::Fp, ProfileTag::Lp] {
            let rows: Vec<[f64; CLASS_COUNT]> = (0..n)
                .map(|_| {
                    let mut row = [0.0; CLASS_COUNT];
                    let mut sum = 0.0;
                    for x in row.iter_mut() {
                        *x = next();
                        sum += *x;
                    }
                    for x in row.iter_mut() {
                        *x /= sum;
                    }
                    row
                })
                .collect();
            cube.set_slice(stream, view, rows).unwrap();
        }
    }
    cube
}

/// Full-batch training is insensitive to sample order up to floating-point
/// summation: permuting the training set with the same seed changes the
/// loss history only at the level of addition reordering.
#[test]
fn full_batch_training_is_permutation_insensitive() {
    let image = |v: f64, p: usize| {
        Tensor::from_vec(
            &[1, 8, 8],
            (0..64).map(|i| if i / 8 == p { v } else { 0.05 }).collect(),
        )
    };
    let mut data = Vec::new();
    for class in 0..CLASS_COUNT {
        for rep in 0..2 {
            data.push((image(0.8 + rep as f64 * 0.05, class + 1), class));
        }
    }
    let cfg = TrainConfig {
        learning_rate: 0.1,
        epochs: 5,
        batch_size: data.len(),
        weight_decay: 1e-4,
        seed: 3,
    };
    let net_cfg = ConvNetConfig {
        in_shape: [1, 8, 8],
        filters: vec![2],
        seed: 9,
    };
    let mut m1 = ConvNetModel::new(net_cfg.clone()).unwrap();
    let h1 = m1.train(&data, &[], &cfg).unwrap();

    let mut permuted = data.clone();
    permuted.reverse();
    permuted.swap(1, 7);
    let mut m2 = ConvNetModel::new(net_cfg).unwrap();
    let h2 = m2.train(&permuted, &[], &cfg).unwrap();

    for (a, b) in h1.loss_history.iter().zip(&h2.loss_history) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    for (a, b) in m1.params_vec().iter().zip(&m2.params_vec()) {
        assert!((a - b).abs() <= 1e-9);
    }
}
