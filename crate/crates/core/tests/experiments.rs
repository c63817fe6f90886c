use janossy_core::architectures::{EncoderKind, PointConfig};
use janossy_core::collision::decoder_lipschitz_estimate;
use janossy_core::constructions::sample_obstruction;
use janossy_core::experiments::{
    build_model, run_sweep, train, write_sweep_csv, Example, SweepConfig, TrainConfig,
};
use janossy_core::numerics::Activation;
use serde::Deserialize;

#[derive(Deserialize)]
struct Baseline {
    config: SweepConfig,
    records: Vec<BaselineRecord>,
}

#[derive(Deserialize)]
struct BaselineRecord {
    latent_dim: usize,
    certified: bool,
    final_loss: f64,
    train_max_error: f64,
    held_out_max_error: f64,
    implied_bound: Option<f64>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + b.abs())
}

#[test]
fn indexed_sweep_matches_baseline() {
    let text = include_str!("baselines/sweep_indexed_d1_n3_k1.json");
    let base: Baseline = serde_json::from_str(text).unwrap();
    let res = run_sweep(&base.config).unwrap();
    assert_eq!(res.records.len(), base.records.len());
    for (got, want) in res.records.iter().zip(&base.records) {
        assert_eq!(got.latent_dim, want.latent_dim);
        assert!(got.error.is_none(), "{:?}", got.error);
        assert_eq!(got.certified, want.certified, "M = {}", got.latent_dim);
        assert!(close(got.final_loss.unwrap(), want.final_loss));
        assert!(close(got.train_max_error.unwrap(), want.train_max_error));
        assert!(close(
            got.held_out_max_error.unwrap(),
            want.held_out_max_error
        ));
        match (got.implied_bound(), want.implied_bound) {
            (Some(a), Some(b)) => assert!(close(a, b)),
            (None, None) => {}
            other => panic!("implied bound mismatch {other:?}"),
        }

        if got.below_threshold {
            // below M|A| < d(n-k) the attack must certify and the theorem must hold
            let bound = got.implied_bound().unwrap();
            assert!(bound >= 0.5 - 1e-3, "{bound}");
            assert_eq!(got.theorem_consistent, Some(true));
        } else {
            assert!(got.best_residual.unwrap() > 1e-4);
        }
    }
    // gap inequality, with the shortfall of the sampled g from a full 0/1 gap made explicit
    let inst = sample_obstruction(base.config.instance_params()).unwrap();
    let configs: Vec<Vec<f64>> = inst
        .e_plus
        .iter()
        .chain(&inst.e_minus)
        .map(|s| s.point.clone())
        .collect();
    for rec in res.records.iter().filter(|r| r.certified) {
        let gap = rec.gap.as_ref().unwrap();
        let cert = &gap.certificate;
        assert!(cert.axis_residual <= 1e-8);
        let lip = decoder_lipschitz_estimate(rec.model.as_ref().unwrap(), &configs).unwrap();
        let sampling_shortfall = (1.0 - (gap.g_plus - gap.g_minus).abs()) / 2.0;
        assert!(
            gap.implied_bound >= 0.5 - 10.0 * lip * cert.grid_residual - sampling_shortfall - 1e-12
        );
        assert!(sampling_shortfall < 1e-3, "{sampling_shortfall}");
    }

    // M = 4 is above the threshold d(n-1) = 2 and fits the sampled target well
    let m4 = res.records.iter().find(|r| r.latent_dim == 4).unwrap();
    assert!(m4.held_out_max_error.unwrap() <= 0.2);
}

fn small_sweep() -> SweepConfig {
    SweepConfig {
        train: TrainConfig {
            d: 1,
            n: 3,
            k: 1,
            latent_dim: 1,
            kind: EncoderKind::DeepSets,
            encoder_hidden: vec![6],
            decoder_hidden: vec![6],
            activation: Activation::Tanh,
            epochs: 5,
            batch_size: 16,
            step_size: 0.01,
            seed: 99,
            e_plus_count: 100,
            e_minus_count: 100,
            background_count: 50,
            held_out_count: 20,
        },
        latent_dims: vec![1, 2, 4, 8],
        epsilon: 0.25,
        samples_per_region: 100,
        search: Default::default(),
    }
}

#[test]
fn sweep_is_deterministic_and_tabulates() {
    let cfg = small_sweep();
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert_eq!(a, b);
    let mut csv = Vec::new();
    write_sweep_csv(&a, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
    let below = &a.records[0];
    assert!(below.below_threshold && below.certified);
}

#[test]
fn constant_target_is_fit() {
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 8,
        ..small_sweep().train
    };
    let data: Vec<Example> = (0..16)
        .map(|i| {
            let t = i as f64 / 16.0;
            Example {
                x: PointConfig::new(1, vec![t, 1.0 - t, 0.5]).unwrap(),
                y: 0.3,
            }
        })
        .collect();
    let out = train(build_model(&cfg).unwrap(), &data, &cfg).unwrap();
    assert!(out.final_loss <= 1e-6, "{}", out.final_loss);
}

#[test]
fn divergence_is_reported() {
    let cfg = TrainConfig {
        epochs: 3,
        step_size: 1e300,
        ..small_sweep().train
    };
    let data = vec![Example {
        x: PointConfig::new(1, vec![0.1, 0.2, 0.3]).unwrap(),
        y: 1e300,
    }];
    assert!(train(build_model(&cfg).unwrap(), &data, &cfg).is_err());
}
