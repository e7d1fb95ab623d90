//! End-to-end run over a manifest: norms → standardization → correlation →
//! partial correlation → edge sampling → graph posteriors → distances between
//! successive instances → recovery trajectories → recommendation table.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{CorrelationStructure, RidgeLadder};
use crate::distance::{compare, write_distance_csv, DistanceRow, DistanceScales};
use crate::error::{Error, Result};
use crate::graph::{container, realize_graph, sample_edges, GraphSampleSet, SamplingConfig, SamplingMethod};
use crate::ingest::{Manifest, ManifestEntry, SessionKey, SessionSeries, DEFAULT_JOINTS};
use crate::trajectory::{
    mrs_trajectory, recommendation_table, recovery_points, trajectory_file_name, write_recommendation_csv,
    write_trajectory_csv, PlotData, RecoveryTrajectory,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub output_dir: PathBuf,
    pub n_samples: usize,
    pub method: SamplingMethod,
    pub seed: u64,
    /// Cutoffs at which graph realizations are written.
    pub taus: Vec<f64>,
    pub scales: DistanceScales,
    pub ridge_ladder: RidgeLadder,
    pub n_joints: usize,
    pub variance_bound: f64,
    pub dump_correlation: bool,
    pub save_samples: bool,
    /// Also write distances between every instance pair (diagnostic only).
    pub all_pairs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            manifest_path: PathBuf::from("manifest.json"),
            output_dir: PathBuf::from("out"),
            n_samples: 50_000,
            method: SamplingMethod::default(),
            seed: 0,
            taus: vec![0.2],
            scales: DistanceScales::default(),
            ridge_ladder: RidgeLadder::default(),
            n_joints: DEFAULT_JOINTS,
            variance_bound: 1.0,
            dump_correlation: false,
            save_samples: false,
            all_pairs: false,
        }
    }
}

impl RunConfig {
    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            n_samples: self.n_samples,
            method: self.method,
            seed: self.seed,
            variance_bound: self.variance_bound,
        }
    }
}

/// A session carried through correlation estimation and sampling.
#[derive(Debug, Clone)]
pub struct LearntSession {
    pub key: SessionKey,
    pub joint_names: Vec<String>,
    pub correlation: CorrelationStructure,
    pub samples: GraphSampleSet,
}

/// Learn one session's graph posterior samples from its recording.
pub fn learn_session(entry: &ManifestEntry, config: &RunConfig) -> Result<LearntSession> {
    let raw = Manifest::read_entry(entry)?;
    let series = SessionSeries::from_raw(&raw)?;
    learn_series(&series, config)
}

pub fn learn_series(series: &SessionSeries, config: &RunConfig) -> Result<LearntSession> {
    if series.n_joints() != config.n_joints {
        return Err(Error::Data(format!(
            "{}: {} joints, expected {}",
            series.key,
            series.n_joints(),
            config.n_joints
        )));
    }
    let correlation = CorrelationStructure::estimate(series, &config.ridge_ladder)?;
    let samples = sample_edges(&correlation.partial, &config.sampling())?;
    Ok(LearntSession {
        key: series.key.clone(),
        joint_names: series.joint_names.clone(),
        correlation,
        samples,
    })
}

/// Distances between successive instances of an ordered, contiguous session list.
pub fn successive_distances(sessions: &[&LearntSession], scales: &DistanceScales) -> Result<Vec<DistanceRow>> {
    sessions
        .windows(2)
        .map(|w| {
            let (earlier, later) = (w[0], w[1]);
            let d = compare(&later.samples, &earlier.samples, scales)?;
            Ok(DistanceRow {
                earlier: earlier.key.instance,
                later: later.key.instance,
                hellinger: d.hellinger,
                kl: d.kl,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub patient_id: String,
    pub game_id: String,
    pub instance: u32,
    pub frames: Option<usize>,
    pub ridge_applied: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub clamped_pairs: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncompleteTrajectory {
    pub patient_id: String,
    pub game_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub learn_ms: u128,
    pub distance_ms: u128,
    pub write_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: RunConfig,
    pub pair_ordering: String,
    pub sessions: Vec<SessionReport>,
    pub trajectories: Vec<String>,
    pub incomplete: Vec<IncompleteTrajectory>,
    pub alpha_excluded: Vec<String>,
    pub timings: Timings,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub trajectories: Vec<RecoveryTrajectory>,
    pub incomplete: Vec<IncompleteTrajectory>,
    pub failed_sessions: usize,
    pub output_dir: PathBuf,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Bare comma-separated matrix at full precision.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn group_key(key: &SessionKey) -> (String, String) {
    (key.patient_id.clone(), key.game_id.clone())
}

/// Check instances `1..=N` are all present exactly once.
fn contiguity_problem(instances: &[u32]) -> Option<String> {
    for (i, &inst) in instances.iter().enumerate() {
        let expected = i as u32 + 1;
        if inst != expected {
            return Some(if inst < expected {
                format!("duplicate instance {inst}")
            } else {
                format!("missing instance {expected}")
            });
        }
    }
    None
}

pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    let manifest = Manifest::load(&config.manifest_path)?;
    run_manifest(&manifest, config)
}

type Member<'a> = (&'a ManifestEntry, &'a Result<LearntSession>);

pub fn run_manifest(manifest: &Manifest, config: &RunConfig) -> Result<RunSummary> {
    let out = &config.output_dir;
    create_dir(out)?;

    let mut entries = manifest.sessions.clone();
    entries.sort_by_key(|e| e.key());

    let started = Instant::now();
    let learnt: Vec<Result<LearntSession>> = entries.par_iter().map(|e| learn_session(e, config)).collect();
    let learn_ms = started.elapsed().as_millis();

    let mut reports = Vec::with_capacity(entries.len());
    let mut failed_sessions = 0;
    for (entry, result) in entries.iter().zip(&learnt) {
        let mut report = SessionReport {
            patient_id: entry.patient_id.clone(),
            game_id: entry.game_id.clone(),
            instance: entry.instance,
            frames: None,
            ridge_applied: None,
            acceptance_rate: None,
            clamped_pairs: None,
            error: None,
        };
        match result {
            Ok(s) => {
                report.ridge_applied = Some(s.correlation.ridge_applied);
                report.acceptance_rate = Some(s.samples.stats.acceptance_rate());
                report.clamped_pairs = Some(s.samples.stats.clamped_pairs);
                if s.correlation.ridge_applied > 0.0 {
                    warn!("{}: ridge {} applied before inversion", s.key, s.correlation.ridge_applied);
                }
            }
            Err(e) => {
                warn!("{}: skipped: {e}", entry.key());
                failed_sessions += 1;
                report.error = Some(e.to_string());
            }
        }
        reports.push(report);
    }

    let mut groups: BTreeMap<(String, String), Vec<Member>> = BTreeMap::new();
    for (entry, result) in entries.iter().zip(&learnt) {
        groups.entry(group_key(&entry.key())).or_default().push((entry, result));
    }

    let started = Instant::now();
    let mut trajectories = Vec::new();
    let mut incomplete = Vec::new();
    let mut distance_tables = Vec::new();
    let mut all_pair_tables = Vec::new();
    for ((patient, game), members) in &groups {
        let instances: Vec<u32> = members.iter().map(|(e, _)| e.instance).collect();
        let mut reason = contiguity_problem(&instances);
        if reason.is_none() {
            if let Some((e, _)) = members.iter().find(|(_, r)| r.is_err()) {
                reason = Some(format!("session {} failed", e.instance));
            }
        }
        if let Some(reason) = reason {
            warn!("{patient}/{game}: trajectory incomplete: {reason}");
            incomplete.push(IncompleteTrajectory {
                patient_id: patient.clone(),
                game_id: game.clone(),
                reason,
            });
            continue;
        }
        let sessions: Vec<&LearntSession> = members.iter().map(|(_, r)| r.as_ref().unwrap()).collect();
        let rows = match successive_distances(&sessions, &config.scales) {
            Ok(rows) => rows,
            Err(e) => {
                incomplete.push(IncompleteTrajectory {
                    patient_id: patient.clone(),
                    game_id: game.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let points = members.iter().map(|(e, _)| e.platform_points).collect();
        trajectories.push(mrs_trajectory(patient, game, &rows, points)?);
        distance_tables.push((patient.clone(), game.clone(), rows));
        if config.all_pairs {
            let mut all = Vec::new();
            for i in 0..sessions.len() {
                for j in (i + 1)..sessions.len() {
                    let d = compare(&sessions[j].samples, &sessions[i].samples, &config.scales)?;
                    all.push(DistanceRow {
                        earlier: sessions[i].key.instance,
                        later: sessions[j].key.instance,
                        hellinger: d.hellinger,
                        kl: d.kl,
                    });
                }
            }
            all_pair_tables.push((patient.clone(), game.clone(), all));
        }
    }
    let distance_ms = started.elapsed().as_millis();

    let started = Instant::now();
    for (patient, game, rows) in &distance_tables {
        write_distance_csv(&out.join(format!("distances_{patient}_{game}.csv")), rows)?;
    }
    for (patient, game, rows) in &all_pair_tables {
        write_distance_csv(&out.join(format!("all_pairs_{patient}_{game}.csv")), rows)?;
    }
    for traj in &trajectories {
        write_trajectory_csv(&out.join(trajectory_file_name(&traj.patient_id, &traj.game_id)), traj)?;
    }
    let (points, excluded) = recovery_points(&trajectories);
    for e in &excluded {
        warn!("excluded from recommendation: {e}");
    }
    let table = recommendation_table(&points);
    write_recommendation_csv(&out.join("recommendation.csv"), &table)?;
    let plot = PlotData::new(&trajectories, &table);
    fs::write(out.join("plot_data.json"), serde_json::to_string_pretty(&plot)? + "\n")
        .map_err(|e| Error::io(out.join("plot_data.json"), e))?;

    let ok_sessions: Vec<&LearntSession> = learnt.iter().filter_map(|r| r.as_ref().ok()).collect();
    if config.dump_correlation {
        let dir = out.join("correlation");
        create_dir(&dir)?;
        for s in &ok_sessions {
            let stem = s.key.file_stem();
            write_matrix_csv(&dir.join(format!("{stem}_pearson.csv")), &s.correlation.pearson)?;
            write_matrix_csv(&dir.join(format!("{stem}_partial.csv")), &s.correlation.partial)?;
        }
    }
    if config.save_samples {
        let dir = out.join("samples");
        create_dir(&dir)?;
        for s in &ok_sessions {
            container::save(&s.samples, &dir.join(format!("{}.rggs", s.key.file_stem())))?;
        }
    }
    if !config.taus.is_empty() {
        let dir = out.join("realizations");
        create_dir(&dir)?;
        for s in &ok_sessions {
            let stem = s.key.file_stem();
            for &tau in &config.taus {
                let g = realize_graph(&s.samples, tau)?;
                g.write_edge_list(&dir.join(format!("{stem}_tau{tau}_edges.csv")), &s.joint_names, &s.samples.edge_freq)?;
                g.write_adjacency(&dir.join(format!("{stem}_tau{tau}_adjacency.csv")), &s.joint_names)?;
            }
        }
    }
    let write_ms = started.elapsed().as_millis();

    let metadata = RunMetadata {
        config: config.clone(),
        pair_ordering: "row-major upper triangle: (1,2),(1,3),...,(1,S),(2,3),...".into(),
        sessions: reports,
        trajectories: trajectories
            .iter()
            .map(|t| format!("{}/{}", t.patient_id, t.game_id))
            .collect(),
        incomplete: incomplete.clone(),
        alpha_excluded: excluded.iter().map(|e| e.to_string()).collect(),
        timings: Timings {
            learn_ms,
            distance_ms,
            write_ms,
        },
    };
    fs::write(
        out.join("run_metadata.json"),
        serde_json::to_string_pretty(&metadata)? + "\n",
    )
    .map_err(|e| Error::io(out.join("run_metadata.json"), e))?;

    info!(
        "{} trajectories, {} incomplete, {} failed sessions",
        trajectories.len(),
        incomplete.len(),
        failed_sessions
    );
    Ok(RunSummary {
        trajectories,
        incomplete,
        failed_sessions,
        output_dir: out.clone(),
    })
}
