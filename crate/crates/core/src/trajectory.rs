//! Mobility Recovery Score trajectories, the recovery parameter, and the
//! per-game recommendation table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceRow;
use crate::error::{Error, Result};

/// Fewest instances a (patient, game) needs to enter the recommendation table.
pub const MIN_RECOMMENDATION_INSTANCES: usize = 4;

/// Totals smaller than this make α undefined.
pub const ALPHA_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTrajectory {
    pub patient_id: String,
    pub game_id: String,
    /// `MRS(1..=N_max)`, starting at 0.
    pub mrs_hellinger: Vec<f64>,
    pub mrs_kl: Vec<f64>,
    /// Per-step distances; entry `j−2` is the `(j−1, j)` distance.
    pub rate_hellinger: Vec<f64>,
    pub rate_kl: Vec<f64>,
    /// Platform-assigned points per instance, carried through untouched.
    pub platform_points: Vec<Option<i64>>,
}

impl RecoveryTrajectory {
    pub fn n_instances(&self) -> usize {
        self.mrs_hellinger.len()
    }

    pub fn initial_score(&self) -> Option<i64> {
        self.platform_points.first().copied().flatten()
    }
}

fn accumulate(steps: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(steps.len() + 1);
    let mut total = 0.0;
    out.push(total);
    for &d in steps {
        total += d;
        out.push(total);
    }
    out
}

/// Build `MRS(j) = D(j−1, j) + MRS(j−1)`, `MRS(1) = 0`, from consecutive-pair distances.
pub fn mrs_trajectory(
    patient_id: &str,
    game_id: &str,
    distances: &[DistanceRow],
    platform_points: Vec<Option<i64>>,
) -> Result<RecoveryTrajectory> {
    for (i, row) in distances.iter().enumerate() {
        let earlier = i as u32 + 1;
        if row.earlier != earlier || row.later != earlier + 1 {
            return Err(Error::Contract(format!(
                "{patient_id}/{game_id}: expected instance pair ({},{}), found ({},{})",
                earlier,
                earlier + 1,
                row.earlier,
                row.later
            )));
        }
    }
    let n_instances = distances.len() + 1;
    if !platform_points.is_empty() && platform_points.len() != n_instances {
        return Err(Error::Contract(format!(
            "{patient_id}/{game_id}: {} platform scores for {n_instances} instances",
            platform_points.len()
        )));
    }
    let rate_hellinger: Vec<f64> = distances.iter().map(|d| d.hellinger).collect();
    let rate_kl: Vec<f64> = distances.iter().map(|d| d.kl).collect();
    Ok(RecoveryTrajectory {
        patient_id: patient_id.to_string(),
        game_id: game_id.to_string(),
        mrs_hellinger: accumulate(&rate_hellinger),
        mrs_kl: accumulate(&rate_kl),
        rate_hellinger,
        rate_kl,
        platform_points: if platform_points.is_empty() {
            vec![None; n_instances]
        } else {
            platform_points
        },
    })
}

/// `α = (MRS_KL(N_max) − MRS_KL(2)) / MRS_KL(N_max)`.
pub fn recovery_parameter(traj: &RecoveryTrajectory) -> Result<f64> {
    let n = traj.mrs_kl.len();
    if n < 2 {
        return Err(Error::Contract(format!(
            "{}/{}: alpha needs at least 2 instances, found {n}",
            traj.patient_id, traj.game_id
        )));
    }
    let total = traj.mrs_kl[n - 1];
    if !(total.abs() >= ALPHA_EPSILON) {
        return Err(Error::UndefinedAlpha {
            patient_id: traj.patient_id.clone(),
            game_id: traj.game_id.clone(),
            total,
        });
    }
    Ok((total - traj.mrs_kl[1]) / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryPoint {
    pub patient_id: String,
    pub game_id: String,
    pub alpha: f64,
    pub initial_score: Option<i64>,
    pub n_instances: usize,
}

/// Recovery points for every trajectory with a defined α; the errors for the rest.
pub fn recovery_points(trajectories: &[RecoveryTrajectory]) -> (Vec<RecoveryPoint>, Vec<Error>) {
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for traj in trajectories {
        match recovery_parameter(traj) {
            Ok(alpha) => points.push(RecoveryPoint {
                patient_id: traj.patient_id.clone(),
                game_id: traj.game_id.clone(),
                alpha,
                initial_score: traj.initial_score(),
                n_instances: traj.n_instances(),
            }),
            Err(e) => skipped.push(e),
        }
    }
    (points, skipped)
}

/// Qualifying points grouped by game, each group ordered by patient.
pub fn recommendation_table(points: &[RecoveryPoint]) -> BTreeMap<String, Vec<RecoveryPoint>> {
    let mut table: BTreeMap<String, Vec<RecoveryPoint>> = BTreeMap::new();
    for p in points {
        let group = table.entry(p.game_id.clone()).or_default();
        if p.n_instances >= MIN_RECOMMENDATION_INSTANCES {
            group.push(p.clone());
        }
    }
    for group in table.values_mut() {
        group.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    }
    table
}

fn opt_to_string(v: Option<i64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `instance,mrs_hellinger,mrs_kl,rate_hellinger,rate_kl,platform_points`.
///
/// The rate columns hold the distance that led into each instance and are empty
/// for instance 1.
pub fn write_trajectory_csv(path: &Path, traj: &RecoveryTrajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "instance",
        "mrs_hellinger",
        "mrs_kl",
        "rate_hellinger",
        "rate_kl",
        "platform_points",
    ])?;
    for j in 0..traj.n_instances() {
        let rate = |v: &[f64]| if j == 0 { String::new() } else { v[j - 1].to_string() };
        w.write_record([
            (j + 1).to_string(),
            traj.mrs_hellinger[j].to_string(),
            traj.mrs_kl[j].to_string(),
            rate(&traj.rate_hellinger),
            rate(&traj.rate_kl),
            opt_to_string(traj.platform_points[j]),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn trajectory_file_name(patient_id: &str, game_id: &str) -> String {
    format!("trajectory_{patient_id}_{game_id}.csv")
}

/// Split `trajectory_<patient>_<game>.csv` at the first underscore after the prefix.
pub fn parse_trajectory_file_name(path: &Path) -> Option<(String, String)> {
    let name = path.file_name()?.to_str()?;
    let rest = name.strip_prefix("trajectory_")?.strip_suffix(".csv")?;
    let (patient, game) = rest.split_once('_')?;
    Some((patient.to_string(), game.to_string()))
}

pub fn read_trajectory_csv(path: &Path, patient_id: &str, game_id: &str) -> Result<RecoveryTrajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let mut traj = RecoveryTrajectory {
        patient_id: patient_id.to_string(),
        game_id: game_id.to_string(),
        mrs_hellinger: Vec::new(),
        mrs_kl: Vec::new(),
        rate_hellinger: Vec::new(),
        rate_kl: Vec::new(),
        platform_points: Vec::new(),
    };
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let err = |message: String| Error::Parse {
            path: path.display().to_string(),
            frame: i,
            message,
        };
        if record.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", record.len())));
        }
        let float = |s: &str| s.trim().parse::<f64>().map_err(|e| err(format!("`{s}`: {e}")));
        let instance: usize = record[0].trim().parse().map_err(|e| err(format!("instance: {e}")))?;
        if instance != i + 1 {
            return Err(err(format!("expected instance {}, found {instance}", i + 1)));
        }
        traj.mrs_hellinger.push(float(&record[1])?);
        traj.mrs_kl.push(float(&record[2])?);
        if i > 0 {
            traj.rate_hellinger.push(float(&record[3])?);
            traj.rate_kl.push(float(&record[4])?);
        }
        let points = record[5].trim();
        traj.platform_points.push(if points.is_empty() {
            None
        } else {
            Some(points.parse().map_err(|e| err(format!("platform_points: {e}")))?)
        });
    }
    Ok(traj)
}

/// `game,patient,initial_score,alpha,n_instances`.
pub fn write_recommendation_csv(path: &Path, table: &BTreeMap<String, Vec<RecoveryPoint>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["game", "patient", "initial_score", "alpha", "n_instances"])?;
    for (game, points) in table {
        for p in points {
            w.write_record([
                game.clone(),
                p.patient_id.clone(),
                opt_to_string(p.initial_score),
                p.alpha.to_string(),
                p.n_instances.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySeries {
    pub patient_id: String,
    pub game_id: String,
    pub instance: Vec<usize>,
    pub mrs_hellinger: Vec<f64>,
    pub mrs_kl: Vec<f64>,
    pub platform_points: Vec<Option<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSeries {
    pub game_id: String,
    pub patient_id: Vec<String>,
    pub initial_score: Vec<Option<i64>>,
    pub alpha: Vec<f64>,
}

/// Plot-ready x/y arrays for external plotting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub trajectories: Vec<TrajectorySeries>,
    pub recommendation: Vec<RecommendationSeries>,
}

impl PlotData {
    pub fn new(trajectories: &[RecoveryTrajectory], table: &BTreeMap<String, Vec<RecoveryPoint>>) -> Self {
        PlotData {
            trajectories: trajectories
                .iter()
                .map(|t| TrajectorySeries {
                    patient_id: t.patient_id.clone(),
                    game_id: t.game_id.clone(),
                    instance: (1..=t.n_instances()).collect(),
                    mrs_hellinger: t.mrs_hellinger.clone(),
                    mrs_kl: t.mrs_kl.clone(),
                    platform_points: t.platform_points.clone(),
                })
                .collect(),
            recommendation: table
                .iter()
                .map(|(game, points)| RecommendationSeries {
                    game_id: game.clone(),
                    patient_id: points.iter().map(|p| p.patient_id.clone()).collect(),
                    initial_score: points.iter().map(|p| p.initial_score).collect(),
                    alpha: points.iter().map(|p| p.alpha).collect(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(h: &[f64], kl: &[f64]) -> Vec<DistanceRow> {
        h.iter()
            .zip(kl)
            .enumerate()
            .map(|(i, (&hellinger, &kl))| DistanceRow {
                earlier: i as u32 + 1,
                later: i as u32 + 2,
                hellinger,
                kl,
            })
            .collect()
    }

    fn traj_kl(kl: &[f64]) -> RecoveryTrajectory {
        mrs_trajectory("p", "g", &rows(&vec![0.0; kl.len()], kl), vec![]).unwrap()
    }

    #[test]
    fn single_instance() {
        let t = mrs_trajectory("p", "g", &[], vec![Some(230)]).unwrap();
        assert_eq!(t.mrs_hellinger, vec![0.0]);
        assert_eq!(t.mrs_kl, vec![0.0]);
        assert_eq!(t.initial_score(), Some(230));
    }

    #[test]
    fn all_zero_steps() {
        let t = traj_kl(&[0.0, 0.0, 0.0]);
        assert!(t.mrs_hellinger.iter().chain(&t.mrs_kl).all(|&v| v == 0.0));
    }

    #[test]
    fn gap_names_missing_pair() {
        let mut r = rows(&[0.1, 0.2, 0.3], &[0.0, 0.0, 0.0]);
        r.remove(1);
        let err = mrs_trajectory("7", "Airplane", &r, vec![]).unwrap_err().to_string();
        assert!(err.contains("(2,3)"), "{err}");
    }

    #[test]
    fn negative_kl_step_propagates() {
        let t = traj_kl(&[0.5, -0.2, 0.1]);
        assert_eq!(t.mrs_kl[2], 0.3);
        assert!(t.mrs_kl[2] < t.mrs_kl[1]);
    }

    #[test]
    fn alpha_examples() {
        let t = traj_kl(&[0.1, 0.4]);
        assert!((recovery_parameter(&t).unwrap() - 0.8).abs() < 1e-12);
        let t = traj_kl(&[0.3, 0.0, 0.0]);
        assert_eq!(recovery_parameter(&t).unwrap(), 0.0);
        let t = traj_kl(&[0.7]);
        assert_eq!(recovery_parameter(&t).unwrap(), 0.0);
    }

    #[test]
    fn alpha_undefined() {
        let t = traj_kl(&[0.0, 0.0]);
        assert!(matches!(recovery_parameter(&t), Err(Error::UndefinedAlpha { .. })));
        let t = traj_kl(&[]);
        assert!(matches!(recovery_parameter(&t), Err(Error::Contract(_))));
    }

    fn point(patient: &str, game: &str, n: usize) -> RecoveryPoint {
        RecoveryPoint {
            patient_id: patient.into(),
            game_id: game.into(),
            alpha: 0.5,
            initial_score: Some(100),
            n_instances: n,
        }
    }

    #[test]
    fn recommendation_filters_and_groups() {
        let table = recommendation_table(&[
            point("1", "Airplane", 3),
            point("2", "Airplane", 4),
            point("3", "Cowboy", 6),
        ]);
        assert_eq!(table.len(), 2);
        assert_eq!(table["Airplane"].len(), 1);
        assert_eq!(table["Airplane"][0].patient_id, "2");
        assert_eq!(table["Cowboy"].len(), 1);
        let only_short = recommendation_table(&[point("1", "Airplane", 3)]);
        assert!(only_short["Airplane"].is_empty());
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = mrs_trajectory(
            "3071",
            "Airplane",
            &rows(&[0.1, 0.2], &[0.01, -0.02]),
            vec![Some(230), None, Some(290)],
        )
        .unwrap();
        let path = dir.path().join(trajectory_file_name("3071", "Airplane"));
        write_trajectory_csv(&path, &t).unwrap();
        assert_eq!(
            parse_trajectory_file_name(&path),
            Some(("3071".to_string(), "Airplane".to_string()))
        );
        let back = read_trajectory_csv(&path, "3071", "Airplane").unwrap();
        assert_eq!(back, t);
    }
}
