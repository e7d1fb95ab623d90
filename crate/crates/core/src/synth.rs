//! Synthetic sessions with a known population correlation structure.
//!
//! Each frame draws `S` correlated standard-normal channels `r = L·z + 10`
//! (with `L` the Cholesky factor of the target correlation) and emits them as
//! `(r, 0, 0)` triples. The offset keeps `r` positive, so the location norm is
//! `r` itself and the correlation target survives the norm stage exactly.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{write_session_csv, ChannelLayout, Manifest, ManifestEntry, RawSession, SessionKey};

/// Added to every channel so that its norm never folds.
pub const CHANNEL_OFFSET: f64 = 10.0;

/// Parametric correlation structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationModel {
    Identity,
    /// Every off-diagonal entry equal to `rho`.
    Equicorrelated { rho: f64 },
    /// Joints `(0,1), (2,3), …` correlated with `rho`; pairs independent of each other.
    Paired { rho: f64 },
    /// `rho^|s − s'|`.
    Ar1 { rho: f64 },
    Matrix { values: Vec<Vec<f64>> },
}

impl CorrelationModel {
    pub fn build(&self, n_joints: usize) -> Result<DMatrix<f64>> {
        let m = match self {
            CorrelationModel::Identity => DMatrix::identity(n_joints, n_joints),
            CorrelationModel::Equicorrelated { rho } => {
                DMatrix::from_fn(n_joints, n_joints, |a, b| if a == b { 1.0 } else { *rho })
            }
            CorrelationModel::Paired { rho } => DMatrix::from_fn(n_joints, n_joints, |a, b| {
                if a == b {
                    1.0
                } else if a / 2 == b / 2 {
                    *rho
                } else {
                    0.0
                }
            }),
            CorrelationModel::Ar1 { rho } => {
                DMatrix::from_fn(n_joints, n_joints, |a, b| rho.powi(a.abs_diff(b) as i32))
            }
            CorrelationModel::Matrix { values } => {
                if values.len() != n_joints || values.iter().any(|r| r.len() != n_joints) {
                    return Err(Error::Spec(format!("correlation matrix is not {n_joints}x{n_joints}")));
                }
                DMatrix::from_fn(n_joints, n_joints, |a, b| values[a][b])
            }
        };
        Ok(m)
    }
}

fn check_correlation(m: &DMatrix<f64>, n_joints: usize) -> Result<()> {
    if m.shape() != (n_joints, n_joints) {
        return Err(Error::Spec(format!(
            "correlation matrix is {}x{}, expected {n_joints}x{n_joints}",
            m.nrows(),
            m.ncols()
        )));
    }
    for a in 0..n_joints {
        if (m[(a, a)] - 1.0).abs() > 1e-12 {
            return Err(Error::Spec(format!("diagonal entry {a} is {}", m[(a, a)])));
        }
        for b in 0..a {
            if (m[(a, b)] - m[(b, a)]).abs() > 1e-12 {
                return Err(Error::Spec(format!("not symmetric at ({a},{b})")));
            }
        }
    }
    if m.clone().cholesky().is_none() {
        return Err(Error::Spec("correlation matrix is not positive definite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub patient_id: String,
    pub game_id: String,
    pub n_joints: usize,
    pub n_frames: usize,
    pub population_correlation: DMatrix<f64>,
    pub seed: u64,
    /// Per-instance correlation, instance `j` using entry `j − 1`.
    pub drift: Option<Vec<DMatrix<f64>>>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        check_correlation(&self.population_correlation, self.n_joints)?;
        if let Some(drift) = &self.drift {
            for m in drift {
                check_correlation(m, self.n_joints)?;
            }
        }
        Ok(())
    }

    pub fn correlation_for(&self, instance: u32) -> Result<&DMatrix<f64>> {
        match &self.drift {
            None => Ok(&self.population_correlation),
            Some(drift) => drift
                .get((instance as usize).wrapping_sub(1))
                .ok_or_else(|| Error::Spec(format!("instance {instance} outside drift list of {}", drift.len()))),
        }
    }
}

pub fn joint_names(n_joints: usize) -> Vec<String> {
    (1..=n_joints).map(|i| format!("joint{i}")).collect()
}

/// One session of `q` frames whose channels have the instance's population correlation.
///
/// Each instance draws from its own stream of the spec's seed.
pub fn generate_session(spec: &SynthSpec, instance: u32) -> Result<RawSession> {
    let corr = spec.correlation_for(instance)?;
    check_correlation(corr, spec.n_joints)?;
    let chol = corr
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Spec("correlation matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(instance as u64);
    let s = spec.n_joints;
    let mut z = vec![0.0; s];
    let mut frames = Vec::with_capacity(spec.n_frames);
    for _ in 0..spec.n_frames {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let mut row = Vec::with_capacity(3 * s);
        for a in 0..s {
            let r: f64 = (0..=a).map(|b| l[(a, b)] * z[b]).sum::<f64>() + CHANNEL_OFFSET;
            row.extend_from_slice(&[r, 0.0, 0.0]);
        }
        frames.push(row);
    }
    Ok(RawSession {
        key: SessionKey::new(&spec.patient_id, &spec.game_id, instance),
        joint_names: joint_names(s),
        layout: ChannelLayout::Xyz,
        frames,
        sample_interval: None,
    })
}

/// One synthetic (patient, game) series, as read from a plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCohort {
    pub patient_id: String,
    pub game_id: String,
    #[serde(default = "default_joints")]
    pub n_joints: usize,
    pub n_frames: usize,
    pub seed: u64,
    /// Used when `drift` is absent.
    #[serde(default)]
    pub n_instances: Option<u32>,
    #[serde(default = "default_model")]
    pub correlation: CorrelationModel,
    #[serde(default)]
    pub drift: Option<Vec<CorrelationModel>>,
    #[serde(default)]
    pub platform_points: Option<Vec<i64>>,
}

fn default_joints() -> usize {
    crate::ingest::DEFAULT_JOINTS
}

fn default_model() -> CorrelationModel {
    CorrelationModel::Identity
}

impl SynthCohort {
    pub fn spec(&self) -> Result<SynthSpec> {
        let drift = self
            .drift
            .as_ref()
            .map(|models| models.iter().map(|m| m.build(self.n_joints)).collect::<Result<Vec<_>>>())
            .transpose()?;
        let spec = SynthSpec {
            patient_id: self.patient_id.clone(),
            game_id: self.game_id.clone(),
            n_joints: self.n_joints,
            n_frames: self.n_frames,
            population_correlation: self.correlation.build(self.n_joints)?,
            seed: self.seed,
            drift,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn instances(&self) -> u32 {
        match &self.drift {
            Some(d) => d.len() as u32,
            None => self.n_instances.unwrap_or(1),
        }
    }
}

/// A synthetic study: one or more cohorts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPlan {
    pub cohorts: Vec<SynthCohort>,
}

impl SynthPlan {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Write every session as `P<id>_G<name>_J<j>.csv` plus `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = Manifest::default();
        for cohort in &self.cohorts {
            let spec = cohort.spec()?;
            for instance in 1..=cohort.instances() {
                let raw = generate_session(&spec, instance)?;
                let file = format!("{}.csv", raw.key.file_stem());
                write_session_csv(&dir.join(&file), &raw)?;
                manifest.sessions.push(ManifestEntry {
                    path: file.into(),
                    patient_id: cohort.patient_id.clone(),
                    game_id: cohort.game_id.clone(),
                    instance,
                    platform_points: cohort
                        .platform_points
                        .as_ref()
                        .and_then(|p| p.get(instance as usize - 1).copied()),
                    sample_interval: None,
                });
            }
        }
        manifest.save(&dir.join("manifest.json"))?;
        Ok(manifest)
    }
}

/// Linear interpolation of `rho` from `start` to `end` over `n` instances.
pub fn linear_drift(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    (0..n)
        .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
        .collect()
}
