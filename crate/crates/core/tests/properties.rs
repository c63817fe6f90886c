//! Randomized invariants.

use janossy_core::architectures::{Encoder, PointConfig};
use janossy_core::bounds::axis_cardinality;
use janossy_core::collision::BorsukUlamMap;
use janossy_core::constructions::{
    build_axis_set, build_grid, build_injection, build_labeled_cubes, sample_obstruction,
    ObstructionParams,
};
use janossy_core::geometry::{regular_simplex, sample_sphere, DeltaMap};
use janossy_core::numerics::{finite_difference_gradient, Activation, Mlp};
use proptest::prelude::*;

fn widths() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=16, 2..=4)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mlp_gradients_match_finite_differences(w in widths(), seed in any::<u64>(), xs in prop::collection::vec(-1.0f64..1.0, 16)) {
        let net = Mlp::random(&w, Activation::Tanh, seed).unwrap();
        let x = &xs[..w[0]];
        let grads = net.gradient(x).unwrap();
        for (o, g) in grads.iter().enumerate() {
            let fd = finite_difference_gradient(|v| net.forward(v).unwrap()[o], x, 1e-5).unwrap();
            for (a, b) in g.input.iter().zip(&fd) {
                prop_assert!(rel_err(*a, *b) <= 1e-5, "input grad {} vs {}", a, b);
            }
            let params = net.params();
            let fdp = finite_difference_gradient(
                |p| Mlp::from_params(&w, Activation::Tanh, p).unwrap().forward(x).unwrap()[o],
                &params,
                1e-5,
            ).unwrap();
            for (a, b) in g.params.iter().zip(&fdp) {
                prop_assert!(rel_err(*a, *b) <= 1e-5, "param grad {} vs {}", a, b);
            }
        }
    }

    #[test]
    fn forward_is_bitwise_repeatable(w in widths(), seed in any::<u64>(), xs in prop::collection::vec(-1.0f64..1.0, 16)) {
        let net = Mlp::random(&w, Activation::Relu, seed).unwrap();
        let x = &xs[..w[0]];
        prop_assert_eq!(net.forward(x).unwrap(), net.forward(x).unwrap());
    }

    #[test]
    fn shared_encoders_are_permutation_invariant(
        d in 1usize..=2, n in 2usize..=4, k in 1usize..=2, seed in any::<u64>(),
        coords in prop::collection::vec(0.0f64..=1.0, 8), perm_seed in any::<u64>(),
    ) {
        prop_assume!(k <= n);
        let phi = Mlp::random(&[d * k, 5, 2], Activation::Tanh, seed).unwrap();
        let enc = Encoder::shared_janossy(d, n, k, phi).unwrap();
        let x = PointConfig::new(d, coords[..d * n].to_vec()).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let y = x.permuted(&perm).unwrap();
        prop_assert_eq!(enc.encode(&x).unwrap(), enc.encode(&y).unwrap());
    }

    #[test]
    fn deep_sets_is_shared_k1(n in 2usize..=5, seed in any::<u64>(), coords in prop::collection::vec(0.0f64..=1.0, 5)) {
        let phi = Mlp::random(&[1, 4, 3], Activation::Tanh, seed).unwrap();
        let a = Encoder::deep_sets(1, n, phi.clone()).unwrap();
        let b = Encoder::shared_janossy(1, n, 1, phi).unwrap();
        let x = &coords[..n];
        prop_assert_eq!(a.encode_flat(x).unwrap(), b.encode_flat(x).unwrap());
    }

    #[test]
    fn covering_and_antipodal_freeness(b in 1usize..=12, seed in any::<u64>()) {
        let cover = regular_simplex(b).unwrap();
        for u in sample_sphere(b, 50, seed).unwrap() {
            let r = cover.assign_region(&u).unwrap();
            let ip = |v: &Vec<f64>| v.iter().zip(u.coords()).map(|(a, c)| a * c).sum::<f64>();
            let best = ip(&cover.vertices()[r - 1]);
            prop_assert!(cover.vertices().iter().all(|v| ip(v) <= best));
            prop_assert!(!cover.antipodal_free_violation(&u));
        }
    }

    #[test]
    fn delta_stays_in_band(n in 2usize..=5, eps in 0.01f64..0.49, seed in any::<u64>()) {
        let delta = DeltaMap::new(1, n, 1, eps).unwrap();
        for u in sample_sphere(n - 1, 20, seed).unwrap() {
            for sign in [1.0, -1.0] {
                for c in delta.embed(&u, sign).unwrap() {
                    prop_assert!(c >= 0.5 - eps - 1e-15 && c <= 0.5 + eps + 1e-15);
                    prop_assert!(c > 0.0 && c < 1.0);
                }
            }
        }
    }

    #[test]
    fn target_g_in_unit_interval(seed in 0u64..50, coords in prop::collection::vec(0.0f64..=1.0, 3)) {
        let inst = sample_obstruction(ObstructionParams::new(1, 3, 1, 0.25, 10, seed)).unwrap();
        let g = inst.target_g(&coords).unwrap();
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn residual_is_even(seed in any::<u64>(), enc_seed in any::<u64>()) {
        let inst = sample_obstruction(ObstructionParams::new(1, 4, 2, 0.25, 5, 1)).unwrap();
        let members = (0..16).map(|t| Mlp::random(&[2, 4, 1], Activation::Tanh, enc_seed ^ t).unwrap()).collect();
        let enc = Encoder::indexed(1, 4, 2, members).unwrap();
        let map = BorsukUlamMap::new(&enc, &inst).unwrap();
        for u in sample_sphere(2, 5, seed).unwrap() {
            prop_assert_eq!(map.antipodal_residual(&u).unwrap(), map.antipodal_residual(&u.antipode()).unwrap());
        }
    }
}

#[test]
fn axis_cardinality_matches_enumeration() {
    for d in 1..=4 {
        for n in 1..=12 {
            for k in 1..n.min(4) {
                let grid = build_grid(d, n, k).unwrap();
                let axis = build_axis_set(&grid);
                let enumerated = grid.all_tuples().iter().filter(|t| t.contains(&0)).count();
                assert_eq!(enumerated, axis.len());
                let s = grid.size() as u64;
                assert_eq!(axis.len() as u64, axis_cardinality(s, k as u64).unwrap());
                assert!(s.pow(k as u32) >= (d * (n - k) + 1) as u64);

                let chi = build_injection(&grid);
                let mut labels = chi.labels().to_vec();
                labels.sort();
                labels.dedup();
                assert_eq!(labels.len(), d * (n - k) + 1);
            }
        }
    }
}

#[test]
fn labeled_cubes_are_separated() {
    for d in 1..=3 {
        for n in 2..=8 {
            let c = build_labeled_cubes(d, n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        assert!(c.separation(i, j) >= 1.0 / (2 * n) as f64 - 1e-12);
                    }
                }
            }
        }
    }
}

/// Gram matrix of the centroid-subtracted standard basis of `R^{b+1}`,
/// normalized: `1` on the diagonal, `-1/b` off it.
fn centroid_gram(b: usize) -> Vec<Vec<f64>> {
    let m = b + 1;
    let w: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / m as f64)
                .collect()
        })
        .collect();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| dot(&w[i], &w[j]) / dot(&w[i], &w[i]))
                .collect()
        })
        .collect()
}

#[test]
fn simplex_gram_matches_centroid_construction() {
    for b in 1..=64 {
        let cover = regular_simplex(b).unwrap();
        let v = cover.vertices();
        let oracle = centroid_gram(b);
        let mut centroid = vec![0.0; b];
        for (i, vi) in v.iter().enumerate() {
            for (c, x) in centroid.iter_mut().zip(vi) {
                *c += x;
            }
            for (j, vj) in v.iter().enumerate() {
                let ip: f64 = vi.iter().zip(vj).map(|(a, c)| a * c).sum();
                assert!((ip - oracle[i][j]).abs() <= 1e-10, "b={b} ({i},{j})");
            }
        }
        assert!(centroid.iter().map(|c| c * c).sum::<f64>().sqrt() <= 1e-10);
    }
}

#[test]
fn sphere_samples_are_centered() {
    let s = sample_sphere(3, 100_000, 77).unwrap();
    let mut mean = [0.0; 3];
    for u in &s {
        assert!((u.coords().iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs() <= 1e-12);
        for (m, c) in mean.iter_mut().zip(u.coords()) {
            *m += c / s.len() as f64;
        }
    }
    assert!(mean.iter().map(|m| m * m).sum::<f64>().sqrt() <= 0.02);
    assert_eq!(s, sample_sphere(3, 100_000, 77).unwrap());
}
