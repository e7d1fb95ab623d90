mod common;

use common::{random_partial, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use recovgraph::distance::{compare, pairwise_sum, DistanceScales};
use recovgraph::graph::SamplingConfig;
use recovgraph::pipeline::learn_series;
use recovgraph::{
    edge_posterior, generate_session, hellinger, kl_divergence, sample_edges, CorrelationModel, Error,
    GraphSampleSet, RunConfig, SessionSeries, SynthSpec,
};

fn sampled(n: usize, seed: u64, draws: usize) -> GraphSampleSet {
    let config = SamplingConfig {
        n_samples: draws,
        seed,
        ..Default::default()
    };
    sample_edges(&random_partial(n, &mut rng(seed)), &config).unwrap()
}

fn constant(n_samples: usize, log_pi: f64) -> GraphSampleSet {
    // A one-edge set whose every draw has the same posterior.
    let partial = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let mut set = sample_edges(
        &partial,
        &SamplingConfig {
            n_samples,
            ..Default::default()
        },
    )
    .unwrap();
    set.log_posterior = vec![log_pi; n_samples];
    set
}

#[test]
fn constant_posterior_closed_forms() {
    let (p, q) = (edge_posterior(true, 0.8), edge_posterior(true, 0.1));
    let (a, b) = (constant(1000, p.ln()), constant(1000, q.ln()));
    let scale = 1e15;
    let expected = (scale * (p.sqrt() - q.sqrt()).powi(2)).sqrt();
    assert!((hellinger(&a, &b, scale).unwrap() / expected - 1.0).abs() < 1e-12);
    let expected_kl = 1000.0 * 1e25 * p * (p / q).ln();
    assert!((kl_divergence(&a, &b, 1e25).unwrap() / expected_kl - 1.0).abs() < 1e-12);
}

#[test]
fn mismatched_sets_are_contract_errors() {
    let a = sampled(4, 1, 100);
    assert!(matches!(hellinger(&a, &sampled(4, 1, 101), 1.0), Err(Error::Contract(_))));
    assert!(matches!(kl_divergence(&a, &sampled(5, 1, 100), 1.0), Err(Error::Contract(_))));
}

#[test]
fn kl_orientation_follows_arguments() {
    let (a, b) = (sampled(5, 2, 2000), sampled(5, 3, 2000));
    let scales = DistanceScales::default();
    let d = compare(&a, &b, &scales).unwrap();
    assert_eq!(d.kl, kl_divergence(&a, &b, scales.kl).unwrap());
    assert_eq!(d.hellinger, hellinger(&b, &a, scales.hellinger).unwrap());
    assert_eq!(d.n_samples, 2000);
}

#[test]
fn negative_kl_is_reported() {
    // Later instance much less probable than the earlier one on every draw.
    let (a, b) = (constant(10, -5.0), constant(10, -1.0));
    let kl = kl_divergence(&a, &b, 1.0).unwrap();
    assert!(kl < 0.0);
    assert!((kl - 10.0 * (-5.0f64).exp() * -4.0).abs() < 1e-12);
}

#[test]
fn extreme_log_posteriors_stay_finite() {
    let (a, b) = (constant(50, -800.0), constant(50, -805.0));
    let h = hellinger(&a, &b, 1e15).unwrap();
    let expected = (1e15f64).sqrt() * ((-400.0f64).exp() - (-402.5f64).exp()).abs();
    assert!(h > 0.0 && (h / expected - 1.0).abs() < 1e-10);
}

#[test]
fn sample_size_robustness() {
    // Same population at q=200 and q=2000 should be closer than a different population.
    let n_joints = 6;
    let mut closer = 0;
    for seed in 0..20 {
        let spec = |rho, n_frames| SynthSpec {
            patient_id: "p".into(),
            game_id: "g".into(),
            n_joints,
            n_frames,
            population_correlation: CorrelationModel::Ar1 { rho }.build(n_joints).unwrap(),
            seed,
            drift: None,
        };
        let config = RunConfig {
            n_joints,
            n_samples: 20_000,
            seed,
            ..Default::default()
        };
        let learn = |spec: SynthSpec, instance| {
            let raw = generate_session(&spec, instance).unwrap();
            learn_series(&SessionSeries::from_raw(&raw).unwrap(), &config).unwrap().samples
        };
        let long = learn(spec(0.8, 2000), 1);
        let short = learn(spec(0.8, 200), 2);
        let other = learn(spec(0.0, 2000), 3);
        closer += usize::from(hellinger(&long, &short, 1e15).unwrap() < hellinger(&long, &other, 1e15).unwrap());
    }
    assert!(closer >= 19, "{closer}/20");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn axioms(seed in any::<u64>(), n in 2usize..7) {
        let (a, b) = (sampled(n, seed, 500), sampled(n, seed.wrapping_add(1), 500));
        prop_assert_eq!(hellinger(&a, &a, 1e15).unwrap(), 0.0);
        prop_assert_eq!(kl_divergence(&a, &a, 1e25).unwrap(), 0.0);
        prop_assert_eq!(hellinger(&a, &b, 1e15).unwrap(), hellinger(&b, &a, 1e15).unwrap());
        prop_assert!(hellinger(&a, &b, 1e15).unwrap() >= 0.0);
    }

    #[test]
    fn scaling_contract(seed in any::<u64>(), c in 1e-3f64..1e3) {
        let (a, b) = (sampled(4, seed, 300), sampled(4, seed.wrapping_add(7), 300));
        let h = hellinger(&a, &b, 1e15).unwrap();
        let hc = hellinger(&a, &b, 1e15 * c).unwrap();
        prop_assert!((hc - c.sqrt() * h).abs() <= 1e-10 * hc.abs().max(1e-300));
        let k = kl_divergence(&a, &b, 1e25).unwrap();
        let kc = kl_divergence(&a, &b, 1e25 * c).unwrap();
        prop_assert!((kc - c * k).abs() <= 1e-10 * kc.abs().max(1e-300));
    }

    #[test]
    fn pairwise_sum_close_to_naive(values in prop::collection::vec(-1e3f64..1e3, 0..5000)) {
        let naive: f64 = values.iter().sum();
        let scale: f64 = values.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!((pairwise_sum(&values) - naive).abs() <= 1e-12 * scale);
    }
}
