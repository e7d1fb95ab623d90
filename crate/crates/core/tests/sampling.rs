mod common;

use common::{ar1_cohort_mrs, drift_rhos, random_partial, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use recovgraph::graph::{container, pair_index, pairs, SamplingConfig};
use recovgraph::{
    edge_posterior, graph_log_posterior, sample_edges, EdgeMarginal, Proposal, RunConfig, SamplingMethod,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn single(psi: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, psi, psi, 1.0])
}

fn config(n: usize, method: SamplingMethod, seed: u64) -> SamplingConfig {
    SamplingConfig {
        n_samples: n,
        method,
        seed,
        ..Default::default()
    }
}

const REJECTION_UNIFORM: SamplingMethod = SamplingMethod::Rejection(Proposal::Uniform);
const REJECTION_BERNOULLI: SamplingMethod = SamplingMethod::Rejection(Proposal::Bernoulli);

#[test]
fn frequency_within_three_sigma() {
    let mut rng = rng(1);
    let mut inside = 0;
    let runs = 300;
    for seed in 0..runs {
        let psi: f64 = rng.random_range(-1.0..=1.0);
        let p = edge_posterior(true, psi);
        let n = 5_000;
        let method = if seed % 2 == 0 { REJECTION_UNIFORM } else { REJECTION_BERNOULLI };
        let nu = sample_edges(&single(psi), &config(n, method, seed)).unwrap().edge_freq[0];
        inside += usize::from((nu - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }
    assert!(inside as f64 >= 0.99 * runs as f64, "{inside}/{runs}");
}

#[test]
fn rejection_and_direct_agree_chi_squared() {
    // Two-sample test on edge counts across several pairs.
    let partial = DMatrix::from_row_slice(
        4,
        4,
        &[1.0, 0.9, 0.1, -0.4, 0.9, 1.0, 0.55, 0.05, 0.1, 0.55, 1.0, -0.95, -0.4, 0.05, -0.95, 1.0],
    );
    let n = 50_000;
    for method in [REJECTION_UNIFORM, REJECTION_BERNOULLI] {
        let a = sample_edges(&partial, &config(n, method, 5)).unwrap();
        let b = sample_edges(&partial, &config(n, SamplingMethod::Direct, 6)).unwrap();
        let mut stat = 0.0;
        for e in 0..a.n_pairs() {
            let (x, y) = (a.edge_freq[e] * n as f64, b.edge_freq[e] * n as f64);
            let pooled = (x + y) / (2.0 * n as f64);
            let expected = [pooled * n as f64, (1.0 - pooled) * n as f64];
            for (obs, exp) in [(x, expected[0]), (n as f64 - x, expected[1]), (y, expected[0]), (n as f64 - y, expected[1])] {
                stat += (obs - exp).powi(2) / exp;
            }
        }
        let p = 1.0 - ChiSquared::new(a.n_pairs() as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "{method:?}: chi2 = {stat}, p = {p}");
    }
}

#[test]
fn proposals_agree_on_edge_frequency() {
    for &psi in &[0.05, 0.3, 0.5, 0.8, 0.97] {
        let u = sample_edges(&single(psi), &config(50_000, REJECTION_UNIFORM, 2)).unwrap();
        let b = sample_edges(&single(psi), &config(50_000, REJECTION_BERNOULLI, 2)).unwrap();
        assert!((u.edge_freq[0] - b.edge_freq[0]).abs() < 0.01, "psi={psi}");
    }
}

#[test]
fn degenerate_bernoulli_parameters_are_clamped() {
    // A clamped proposal makes the envelope ~1.7e5, so keep N tiny.
    let partial = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, -1.0, 1.0, -1.0, 1.0]);
    let set = sample_edges(&partial, &config(20, REJECTION_BERNOULLI, 4)).unwrap();
    assert_eq!(set.stats.clamped_pairs, 3);
    assert!(set.stats.acceptance_rate() < 1e-3);
    assert!(set.log_posterior.iter().all(|lp| lp.is_finite()));
}

#[test]
fn thread_count_does_not_change_samples() {
    let partial = random_partial(8, &mut rng(3));
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sample_edges(&partial, &config(3_000, REJECTION_BERNOULLI, 9)).unwrap())
    };
    let one = run(1);
    let three = run(3);
    assert_eq!(one.edges, three.edges);
    assert_eq!(one.log_posterior, three.log_posterior);
}

#[test]
fn log_posterior_recomputed_independently() {
    let partial = random_partial(5, &mut rng(4));
    let set = sample_edges(&partial, &config(500, REJECTION_UNIFORM, 1)).unwrap();
    let recomputed = graph_log_posterior(&set, &partial).unwrap();
    for r in 0..set.n_samples {
        let mut log_pi = 0.0;
        for (a, b) in pairs(5) {
            let edge = set.edges.get(r, pair_index(5, a, b));
            log_pi += EdgeMarginal::new(partial[(a, b)]).prob(edge).ln();
        }
        assert!((set.log_posterior[r] - log_pi).abs() < 1e-12);
        assert_eq!(set.log_posterior[r], recomputed[r]);
    }
}

#[test]
fn container_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let set = sample_edges(&random_partial(6, &mut rng(5)), &config(777, SamplingMethod::Direct, 3)).unwrap();
    let path = dir.path().join("s.rggs");
    container::save(&set, &path).unwrap();
    let back = container::load(&path).unwrap();
    assert_eq!(back.edges, set.edges);
    assert_eq!(back.log_posterior, set.log_posterior);
    assert_eq!(back.edge_freq, set.edge_freq);
    assert_eq!(back.method, set.method);
    assert_eq!(back.rng_seed, 3);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 33 + 777 * 2 + 777 * 8);
}

#[test]
fn proposals_agree_on_small_graphs() {
    // With few joints the raw-draw distance estimator is well behaved and the
    // two proposals give the same trajectory.
    let uniform = RunConfig {
        n_joints: 6,
        ..Default::default()
    };
    let bernoulli = RunConfig {
        method: REJECTION_BERNOULLI,
        ..uniform.clone()
    };
    let a = ar1_cohort_mrs(6, 1000, &drift_rhos(), 0, &uniform);
    let b = ar1_cohort_mrs(6, 1000, &drift_rhos(), 0, &bernoulli);
    for j in 1..6 {
        assert!((a[j] - b[j]).abs() / a[j] < 0.05, "instance {}: {} vs {}", j + 1, a[j], b[j]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn same_seed_same_samples(seed in any::<u64>(), n in 2usize..6) {
        let partial = random_partial(n, &mut rng(seed));
        let a = sample_edges(&partial, &config(200, REJECTION_UNIFORM, seed)).unwrap();
        let b = sample_edges(&partial, &config(200, REJECTION_UNIFORM, seed)).unwrap();
        prop_assert_eq!(a.edges, b.edges);
        prop_assert_eq!(a.log_posterior, b.log_posterior);
    }

    #[test]
    fn frequencies_are_probabilities(seed in any::<u64>(), n in 2usize..7) {
        let set = sample_edges(&random_partial(n, &mut rng(seed)), &config(100, REJECTION_BERNOULLI, seed)).unwrap();
        prop_assert_eq!(set.edge_freq.len(), n * (n - 1) / 2);
        for &nu in &set.edge_freq {
            prop_assert!((0.0..=1.0).contains(&nu));
        }
        for &lp in &set.log_posterior {
            prop_assert!(lp.is_finite() && lp < 0.0);
        }
    }
}
