// Shared oracles and fixtures for the integration tests. Each test binary uses
// a different subset.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use recovgraph::pipeline::{learn_series, successive_distances};
use recovgraph::synth::linear_drift;
use recovgraph::{generate_session, CorrelationModel, RunConfig, SessionSeries, SynthSpec};

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let f: &dyn Fn(f64) -> f64 = &f;
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    adaptive(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 50)
}

/// `∫₀ᵘ (2πv)^{−1/2} exp(−S²/(2v)) dv` by quadrature. With `v = w²` the
/// integrand `2 (2π)^{−1/2} exp(−S²/(2w²))` is smooth on `[0, √u]`.
pub fn bracket_oracle(s: f64, u: f64) -> f64 {
    let c = 2.0 / (2.0 * std::f64::consts::PI).sqrt();
    integrate(
        |w| if w == 0.0 { if s == 0.0 { c } else { 0.0 } } else { c * (-s * s / (2.0 * w * w)).exp() },
        0.0,
        u.sqrt(),
        1e-14,
    )
}

/// `m(1 | ψ)` from the quadrature oracle.
pub fn present_oracle(psi: f64) -> f64 {
    let a = psi.abs();
    let absent = bracket_oracle(a, 1.0);
    let present = bracket_oracle(1.0 - a, 1.0);
    present / (absent + present)
}

/// A random symmetric matrix with unit diagonal and off-diagonal entries in (−1, 1).
pub fn random_partial(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::identity(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let v = rng.random_range(-0.99..0.99);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    m
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cumulative Hellinger MRS of a 6-instance AR(1) cohort with the given per-instance `rho`.
pub fn ar1_cohort_mrs(n_joints: usize, n_frames: usize, rhos: &[f64], seed: u64, config: &RunConfig) -> Vec<f64> {
    let drift: Vec<_> = rhos
        .iter()
        .map(|&rho| CorrelationModel::Ar1 { rho }.build(n_joints).unwrap())
        .collect();
    let spec = SynthSpec {
        patient_id: "synthetic".into(),
        game_id: "drift".into(),
        n_joints,
        n_frames,
        population_correlation: drift[0].clone(),
        seed,
        drift: Some(drift),
    };
    let sessions: Vec<_> = (1..=rhos.len() as u32)
        .map(|j| {
            let raw = generate_session(&spec, j).unwrap();
            learn_series(&SessionSeries::from_raw(&raw).unwrap(), config).unwrap()
        })
        .collect();
    let refs: Vec<_> = sessions.iter().collect();
    let rows = successive_distances(&refs, &config.scales).unwrap();
    let traj = recovgraph::mrs_trajectory("synthetic", "drift", &rows, vec![]).unwrap();
    traj.mrs_hellinger
}

pub fn drift_rhos() -> Vec<f64> {
    linear_drift(0.9, 0.1, 6)
}

/// Relative path → contents for every file under `dir`.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Run metadata with the wall-clock timings and output directory removed.
pub fn comparable_metadata(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("timings");
    obj["config"].as_object_mut().unwrap().remove("output_dir");
    v
}
