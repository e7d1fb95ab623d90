//! Fixtures shared by the benchmarks.

use recovgraph::{generate_session, CorrelationModel, CorrelationStructure, RidgeLadder, SessionSeries, SynthSpec};

/// A standardized synthetic session with AR(1) joint correlation.
pub fn series(n_joints: usize, n_frames: usize, seed: u64) -> SessionSeries {
    let spec = SynthSpec {
        patient_id: "bench".into(),
        game_id: "bench".into(),
        n_joints,
        n_frames,
        population_correlation: CorrelationModel::Ar1 { rho: 0.7 }.build(n_joints).unwrap(),
        seed,
        drift: None,
    };
    SessionSeries::from_raw(&generate_session(&spec, 1).unwrap()).unwrap()
}

pub fn correlation(n_joints: usize, n_frames: usize, seed: u64) -> CorrelationStructure {
    CorrelationStructure::estimate(&series(n_joints, n_frames, seed), &RidgeLadder::default()).unwrap()
}
