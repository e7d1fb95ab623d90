//! Session recordings: parsing, reduction to joint-location norms, and
//! per-column standardization.
//!
//! A session is one play of one exergame by one patient. Each frame holds the
//! 3-D coordinates of every tracked joint (or, for pre-reduced recordings, the
//! location norm of every joint). Only the location norm is used downstream.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of tracked joints.
pub const DEFAULT_JOINTS: usize = 20;

/// Fewest frames for which a sample standard deviation and correlation are usable.
pub const MIN_FRAMES: usize = 3;

/// Identity of a session: patient, exergame, and 1-based play instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionKey {
    pub patient_id: String,
    pub game_id: String,
    pub instance: u32,
}

impl SessionKey {
    pub fn new(patient_id: impl Into<String>, game_id: impl Into<String>, instance: u32) -> Self {
        SessionKey {
            patient_id: patient_id.into(),
            game_id: game_id.into(),
            instance,
        }
    }

    /// Canonical file stem, `P<patient>_G<game>_J<instance>`.
    pub fn file_stem(&self) -> String {
        format!("P{}_G{}_J{}", self.patient_id, self.game_id, self.instance)
    }
}

impl std::fmt::Display for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}#{}", self.patient_id, self.game_id, self.instance)
    }
}

/// How each frame row is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelLayout {
    /// `x, y, z` per joint, `3·S` values per frame.
    Xyz,
    /// One pre-computed location norm per joint, `S` values per frame.
    Norm,
}

impl ChannelLayout {
    pub fn width(self) -> usize {
        match self {
            ChannelLayout::Xyz => 3,
            ChannelLayout::Norm => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSession {
    pub key: SessionKey,
    pub joint_names: Vec<String>,
    pub layout: ChannelLayout,
    pub frames: Vec<Vec<f64>>,
    /// Seconds between frames; metadata only.
    pub sample_interval: Option<f64>,
}

impl RawSession {
    pub fn n_joints(&self) -> usize {
        self.joint_names.len()
    }

    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }
}

/// Reduce every frame to per-joint Euclidean norms, giving a `q × S` matrix.
pub fn location_norms(raw: &RawSession) -> Result<DMatrix<f64>> {
    let joints = raw.n_joints();
    let width = raw.layout.width();
    let expected = joints * width;
    let mut norms = DMatrix::zeros(raw.n_frames(), joints);
    for (t, row) in raw.frames.iter().enumerate() {
        if row.len() != expected {
            return Err(Error::Parse {
                path: raw.key.to_string(),
                frame: t,
                message: format!("expected {expected} values, found {}", row.len()),
            });
        }
        if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "{}: non-finite value in frame {t}, column {bad}",
                raw.key
            )));
        }
        for s in 0..joints {
            let chunk = &row[s * width..(s + 1) * width];
            norms[(t, s)] = match raw.layout {
                ChannelLayout::Xyz => chunk.iter().map(|c| c * c).sum::<f64>().sqrt(),
                ChannelLayout::Norm => {
                    if chunk[0] < 0.0 {
                        return Err(Error::Data(format!(
                            "{}: negative location norm in frame {t}, joint {s}",
                            raw.key
                        )));
                    }
                    chunk[0]
                }
            };
        }
    }
    Ok(norms)
}

/// Column-standardized matrix plus the statistics used to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub values: DMatrix<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns with zero variance; their standardized values are all zero.
    pub degenerate: Vec<bool>,
}

/// Centre each column by its mean (divisor `q`) and scale by its sample
/// standard deviation (divisor `q − 1`). Constant columns are zero-filled and
/// flagged.
pub fn standardize(norms: &DMatrix<f64>) -> Result<Standardized> {
    let (q, cols) = norms.shape();
    if q < MIN_FRAMES {
        return Err(Error::SessionTooShort {
            rows: q,
            min: MIN_FRAMES,
        });
    }
    let mut values = DMatrix::zeros(q, cols);
    let mut means = Vec::with_capacity(cols);
    let mut stds = Vec::with_capacity(cols);
    let mut degenerate = Vec::with_capacity(cols);
    for s in 0..cols {
        let column = norms.column(s);
        let mean = column.iter().sum::<f64>() / q as f64;
        let ss = column.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        let std = (ss / (q - 1) as f64).sqrt();
        let is_degenerate = !(std > 1e-12 * mean.abs().max(1.0));
        if !is_degenerate {
            for t in 0..q {
                values[(t, s)] = (column[t] - mean) / std;
            }
        }
        means.push(mean);
        stds.push(std);
        degenerate.push(is_degenerate);
    }
    Ok(Standardized {
        values,
        means,
        stds,
        degenerate,
    })
}

/// Standardized joint-location series of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSeries {
    pub key: SessionKey,
    pub joint_names: Vec<String>,
    /// `q × S`, standardized.
    pub values: DMatrix<f64>,
    pub column_means: Vec<f64>,
    pub column_stds: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl SessionSeries {
    pub fn from_raw(raw: &RawSession) -> Result<Self> {
        let norms = location_norms(raw)?;
        Self::from_norms(raw.key.clone(), raw.joint_names.clone(), &norms)
    }

    pub fn from_norms(key: SessionKey, joint_names: Vec<String>, norms: &DMatrix<f64>) -> Result<Self> {
        if joint_names.len() != norms.ncols() {
            return Err(Error::Contract(format!(
                "{} joint names for {} columns",
                joint_names.len(),
                norms.ncols()
            )));
        }
        let std = standardize(norms)?;
        Ok(SessionSeries {
            key,
            joint_names,
            values: std.values,
            column_means: std.means,
            column_stds: std.stds,
            degenerate: std.degenerate,
        })
    }

    pub fn q(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_joints(&self) -> usize {
        self.values.ncols()
    }
}

fn session_name_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^P([^_]+)_G([^_]+)_J([0-9]+)\.csv$").unwrap())
}

/// Parse `P<id>_G<name>_J<instance>.csv`.
pub fn parse_session_filename(path: &Path) -> Option<SessionKey> {
    let name = path.file_name()?.to_str()?;
    let caps = session_name_regex().captures(name)?;
    let instance = caps[3].parse().ok()?;
    Some(SessionKey::new(&caps[1], &caps[2], instance))
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<(ChannelLayout, Vec<String>)> {
    let bad = |message: String| Error::Parse {
        path: path.display().to_string(),
        frame: 0,
        message,
    };
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    if fields.is_empty() {
        return Err(bad("empty header".into()));
    }
    if fields.iter().all(|f| f.ends_with("_r")) {
        let names = fields.iter().map(|f| f[..f.len() - 2].to_string()).collect();
        return Ok((ChannelLayout::Norm, names));
    }
    if !fields.len().is_multiple_of(3) {
        return Err(bad(format!(
            "{} header columns is not a multiple of 3",
            fields.len()
        )));
    }
    let mut names = Vec::with_capacity(fields.len() / 3);
    for triple in fields.chunks(3) {
        let stem = triple[0]
            .strip_suffix("_x")
            .ok_or_else(|| bad(format!("expected `<joint>_x`, found `{}`", triple[0])))?;
        for (field, axis) in triple[1..].iter().zip(["_y", "_z"]) {
            if field.strip_suffix(axis) != Some(stem) {
                return Err(bad(format!("expected `{stem}{axis}`, found `{field}`")));
            }
        }
        names.push(stem.to_string());
    }
    Ok((ChannelLayout::Xyz, names))
}

/// Read one session CSV. Rows with missing or unparsable fields are rejected.
pub fn read_session_csv(path: &Path, key: SessionKey) -> Result<RawSession> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let (layout, joint_names) = parse_header(path, reader.headers()?)?;
    let expected = joint_names.len() * layout.width();
    let mut frames = Vec::new();
    for (t, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != expected {
            return Err(Error::Parse {
                path: path.display().to_string(),
                frame: t,
                message: format!("expected {expected} fields, found {}", record.len()),
            });
        }
        let row = record
            .iter()
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    frame: t,
                    message: format!("`{field}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(row);
    }
    Ok(RawSession {
        key,
        joint_names,
        layout,
        frames,
        sample_interval: None,
    })
}

/// Write a session in the `<joint>_x,<joint>_y,<joint>_z` layout (or `<joint>_r`).
pub fn write_session_csv(path: &Path, raw: &RawSession) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let header: Vec<String> = match raw.layout {
        ChannelLayout::Xyz => raw
            .joint_names
            .iter()
            .flat_map(|n| [format!("{n}_x"), format!("{n}_y"), format!("{n}_z")])
            .collect(),
        ChannelLayout::Norm => raw.joint_names.iter().map(|n| format!("{n}_r")).collect(),
    };
    writer.write_record(&header)?;
    for row in &raw.frames {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One manifest entry: a session file and its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub patient_id: String,
    pub game_id: String,
    pub instance: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform_points: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
}

impl ManifestEntry {
    pub fn key(&self) -> SessionKey {
        SessionKey::new(&self.patient_id, &self.game_id, self.instance)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sessions: Vec<ManifestEntry>,
}

impl Manifest {
    /// Load a manifest; relative session paths resolve against the manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: Manifest = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for entry in &mut manifest.sessions {
            if entry.path.is_relative() {
                entry.path = base.join(&entry.path);
            }
        }
        Ok(manifest)
    }

    /// Build a manifest from every `P<id>_G<name>_J<instance>.csv` file in a directory.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut sessions = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if let Some(key) = parse_session_filename(&path) {
                sessions.push(ManifestEntry {
                    path,
                    patient_id: key.patient_id,
                    game_id: key.game_id,
                    instance: key.instance,
                    platform_points: None,
                    sample_interval: None,
                });
            }
        }
        sessions.sort_by_key(|e| e.key());
        Ok(Manifest { sessions })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Read and standardize an entry's session.
    pub fn read_entry(entry: &ManifestEntry) -> Result<RawSession> {
        let mut raw = read_session_csv(&entry.path, entry.key())?;
        raw.sample_interval = entry.sample_interval;
        Ok(raw)
    }
}
