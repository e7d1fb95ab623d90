use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::warn;
use rayon::prelude::*;

use recovgraph::distance::{compare, write_distance_csv, DistanceRow};
use recovgraph::graph::container;
use recovgraph::graph::realize::GraphRealization;
use recovgraph::ingest::parse_session_filename;
use recovgraph::pipeline::{learn_session, run_pipeline};
use recovgraph::synth::{joint_names, SynthPlan};
use recovgraph::trajectory::{
    mrs_trajectory, parse_trajectory_file_name, read_trajectory_csv, recommendation_table, recovery_points,
    trajectory_file_name, write_recommendation_csv, write_trajectory_csv,
};
use recovgraph::{realize_graph, GraphSampleSet, Manifest};

mod config;

use config::{FileConfig, SamplingArgs};

const THREADS_ENV: &str = "RECOVGRAPH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "recovgraph", version, about = "Recovery trajectories from joint-location time series")]
struct Cli {
    /// TOML file supplying defaults for any flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the full pipeline over a manifest of sessions
    Analyze {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sampling: SamplingArgs,
        /// Write Pearson and partial-correlation matrices per session
        #[arg(long)]
        dump_correlation: bool,
        /// Write each session's sample set as a binary container
        #[arg(long)]
        save_samples: bool,
        /// Also write distances between every instance pair (diagnostic)
        #[arg(long)]
        all_pairs: bool,
    },
    /// Write graph realizations at one or more cutoffs
    Graph {
        /// Learn sample sets from these sessions
        #[arg(long, conflicts_with = "container")]
        manifest: Option<PathBuf>,
        /// Realize graphs from saved sample-set containers
        #[arg(long, num_args = 1..)]
        container: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Distances between two saved sample sets (later vs earlier instance)
    Distance {
        #[arg(long)]
        later: PathBuf,
        #[arg(long)]
        earlier: PathBuf,
        /// Instance pair as `earlier,later`; read from `P<id>_G<game>_J<j>.rggs` names when omitted
        #[arg(long)]
        pair: Option<String>,
        /// Output CSV; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Build a trajectory CSV from a distance CSV
    Trajectory {
        #[arg(long)]
        distances: PathBuf,
        /// Defaults to the `<patient>` in `distances_<patient>_<game>.csv`
        #[arg(long)]
        patient: Option<String>,
        #[arg(long)]
        game: Option<String>,
        /// Comma-separated platform points per instance
        #[arg(long, value_delimiter = ',')]
        points: Vec<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the recommendation table from trajectory CSVs
    Recommend {
        /// Trajectory files or directories containing `trajectory_*.csv`
        #[arg(long, required = true, num_args = 1..)]
        trajectories: Vec<PathBuf>,
        /// Manifest supplying platform points; overrides the trajectory files' column
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic sessions and a manifest from a JSON plan
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let n: usize = value
            .parse()
            .with_context(|| format!("{THREADS_ENV}={value} is not a thread count"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn parse_pair(s: &str) -> anyhow::Result<(u32, u32)> {
    let (a, b) = s
        .trim_matches(|c| c == '(' || c == ')')
        .split_once(',')
        .context("pair must be `earlier,later`")?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn container_instance(path: &Path) -> Option<u32> {
    parse_session_filename(&path.with_extension("csv")).map(|k| k.instance)
}

fn write_realizations(dir: &Path, stem: &str, names: &[String], set: &GraphSampleSet, taus: &[f64]) -> anyhow::Result<()> {
    for &tau in taus {
        let g: GraphRealization = realize_graph(set, tau)?;
        g.write_edge_list(&dir.join(format!("{stem}_tau{tau}_edges.csv")), names, &set.edge_freq)?;
        g.write_adjacency(&dir.join(format!("{stem}_tau{tau}_adjacency.csv")), names)?;
    }
    Ok(())
}

fn trajectory_files(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in std::fs::read_dir(input)? {
                let path = entry?.path();
                if parse_trajectory_file_name(&path).is_some() {
                    files.push(path);
                }
            }
        } else {
            files.push(input.clone());
        }
    }
    files.sort();
    Ok(files)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Analyze {
            manifest,
            out,
            sampling,
            dump_correlation,
            save_samples,
            all_pairs,
        } => {
            let mut config = sampling.resolve(&file)?;
            config.manifest_path = manifest
                .or(file.manifest.clone())
                .context("--manifest is required")?;
            config.output_dir = out.or(file.out.clone()).context("--out is required")?;
            config.dump_correlation = dump_correlation || file.dump_correlation.unwrap_or(false);
            config.save_samples = save_samples || file.save_samples.unwrap_or(false);
            config.all_pairs = all_pairs || file.all_pairs.unwrap_or(false);
            let summary = run_pipeline(&config)?;
            println!(
                "{} trajectories written to {} ({} incomplete, {} sessions failed)",
                summary.trajectories.len(),
                summary.output_dir.display(),
                summary.incomplete.len(),
                summary.failed_sessions
            );
            if summary.trajectories.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Graph {
            manifest,
            container: containers,
            out,
            sampling,
        } => {
            let config = sampling.resolve(&file)?;
            let dir = out.or(file.out.clone()).context("--out is required")?;
            std::fs::create_dir_all(&dir)?;
            if let Some(path) = manifest.or(if containers.is_empty() { file.manifest.clone() } else { None }) {
                let manifest = Manifest::load(&path)?;
                let learnt: Vec<_> = manifest.sessions.par_iter().map(|e| learn_session(e, &config)).collect();
                for (entry, result) in manifest.sessions.iter().zip(learnt) {
                    match result {
                        Ok(s) => write_realizations(&dir, &s.key.file_stem(), &s.joint_names, &s.samples, &config.taus)?,
                        Err(e) => warn!("{}: skipped: {e}", entry.key()),
                    }
                }
            } else if !containers.is_empty() {
                for path in &containers {
                    let set = container::load(path)?;
                    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("graph");
                    write_realizations(&dir, stem, &joint_names(set.n_joints), &set, &config.taus)?;
                }
            } else {
                bail!("either --manifest or --container is required");
            }
        }
        Command::Distance {
            later,
            earlier,
            pair,
            out,
            sampling,
        } => {
            let config = sampling.resolve(&file)?;
            let (first, second) = match pair {
                Some(p) => parse_pair(&p)?,
                None => (
                    container_instance(&earlier).context("cannot infer instance of --earlier; pass --pair")?,
                    container_instance(&later).context("cannot infer instance of --later; pass --pair")?,
                ),
            };
            let a = container::load(&later)?;
            let b = container::load(&earlier)?;
            let d = compare(&a, &b, &config.scales)?;
            let row = DistanceRow {
                earlier: first,
                later: second,
                hellinger: d.hellinger,
                kl: d.kl,
            };
            match out {
                Some(path) => write_distance_csv(&path, &[row])?,
                None => println!("instance_pair,hellinger,kl\n\"({first},{second})\",{},{}", d.hellinger, d.kl),
            }
        }
        Command::Trajectory {
            distances,
            patient,
            game,
            points,
            out,
        } => {
            let inferred = distances
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("distances_"))
                .and_then(|n| n.strip_suffix(".csv"))
                .and_then(|n| n.split_once('_'))
                .map(|(p, g)| (p.to_string(), g.to_string()));
            let patient = patient
                .or_else(|| inferred.as_ref().map(|i| i.0.clone()))
                .context("--patient is required")?;
            let game = game
                .or_else(|| inferred.as_ref().map(|i| i.1.clone()))
                .context("--game is required")?;
            let rows = recovgraph::distance::read_distance_csv(&distances)?;
            let traj = mrs_trajectory(&patient, &game, &rows, points.into_iter().map(Some).collect())?;
            let path = match out {
                Some(p) if p.is_dir() => p.join(trajectory_file_name(&patient, &game)),
                Some(p) => p,
                None => PathBuf::from(trajectory_file_name(&patient, &game)),
            };
            write_trajectory_csv(&path, &traj)?;
        }
        Command::Recommend {
            trajectories,
            manifest,
            out,
        } => {
            let manifest = manifest.map(|p| Manifest::load(&p)).transpose()?;
            let mut trajs = Vec::new();
            for path in trajectory_files(&trajectories)? {
                let (patient, game) = parse_trajectory_file_name(&path)
                    .with_context(|| format!("{}: expected trajectory_<patient>_<game>.csv", path.display()))?;
                let mut traj = read_trajectory_csv(&path, &patient, &game)?;
                if let Some(m) = &manifest {
                    for e in m.sessions.iter().filter(|e| e.patient_id == patient && e.game_id == game) {
                        if let Some(slot) = traj.platform_points.get_mut(e.instance as usize - 1) {
                            *slot = e.platform_points.or(*slot);
                        }
                    }
                }
                trajs.push(traj);
            }
            let (points, excluded) = recovery_points(&trajs);
            for e in excluded {
                warn!("excluded: {e}");
            }
            let table = recommendation_table(&points);
            write_recommendation_csv(&out.unwrap_or_else(|| PathBuf::from("recommendation.csv")), &table)?;
        }
        Command::Synth { spec, out } => {
            let plan = SynthPlan::load(&spec)?;
            let manifest = plan.write(&out)?;
            println!("{} sessions written to {}", manifest.sessions.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
