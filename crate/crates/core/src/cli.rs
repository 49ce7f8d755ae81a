//! Command-line front end. Stages exchange data only through files.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 when an internal invariant
//! check fails.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::embedding_io::{
    load_embeddings_csv, load_embeddings_raw, load_labels, write_embeddings_csv, write_labels, EmbeddingSet,
    IoError, LabelTable, EMB_MAGIC,
};
use crate::hierarchy::{ClusterHierarchy, HierarchyError};
use crate::matching::{MatchReport, Metric};
use crate::metric::{pairwise_distance, MetricError};
use crate::pipeline::{
    ccm_csv, cluster_from_base, evaluate, interpret, interpretation_pool, ClusterRun, Conjunctions, PipelineError,
    DEFAULT_MIN_MATCH_SIZE, DEFAULT_MIN_PTS,
};
use crate::render::{render_json, render_svg, RenderError, RenderSpec};
use crate::synth::{generate, SynthConfig, SynthError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Io(_)
            | PipelineError::Input(_)
            | PipelineError::Metric(MetricError::MinPtsTooLarge { .. })
            | PipelineError::Metric(MetricError::NonFinite { .. })
            | PipelineError::Hierarchy(HierarchyError::MinClusterSize { .. }) => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "hccm", version, about = "Cluster hierarchies over embeddings and their class interpretation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic embedding set.
    Synth(SynthArgs),
    /// Build one hierarchy per minPts value.
    Cluster(ClusterArgs),
    /// Matching degree per (minPts, category, metric) as CSV.
    Evaluate(EvaluateArgs),
    /// Greedy class-to-cluster matching report, optionally rendered.
    Interpret(InterpretArgs),
    /// Render a hierarchy JSON and match report as SVG + JSON layout.
    Render(RenderArgs),
    /// cluster, evaluate, interpret and render in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Embeddings: CSV, or raw binary starting with EMB1.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Sidecar id list for raw-binary embeddings (default: <embeddings>.ids).
    #[arg(long)]
    pub ids: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterOpts {
    /// Comma-separated minPts values; 0 is plain single linkage.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MIN_PTS)]
    pub min_pts: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_cluster_size: usize,
}

#[derive(Debug, Args)]
pub struct RenderOpts {
    /// Hide nodes with at most this many members.
    #[arg(long, default_value_t = crate::render::DEFAULT_DISPLAY_SIZE_THRESHOLD)]
    pub display_size_threshold: usize,
    /// Only label pairs scoring at least this much.
    #[arg(long, default_value_t = crate::render::DEFAULT_MIN_DISPLAY)]
    pub min_display: f64,
}

impl RenderOpts {
    fn spec(&self) -> RenderSpec {
        RenderSpec {
            display_size_threshold: self.display_size_threshold,
            min_display: self.min_display,
            ..RenderSpec::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub genders: usize,
    #[arg(long, default_value_t = 3)]
    pub nations_per_gender: usize,
    #[arg(long, default_value_t = 2)]
    pub identities_per_nation: usize,
    #[arg(long, default_value_t = 20)]
    pub points_per_identity: usize,
    #[arg(long, default_value_t = 8)]
    pub dim: usize,
    #[arg(long, default_value_t = 100.0)]
    pub s_gender: f64,
    #[arg(long, default_value_t = 30.0)]
    pub s_nation: f64,
    #[arg(long, default_value_t = 10.0)]
    pub s_identity: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Skip the separation check.
    #[arg(long)]
    pub allow_overlap: bool,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cluster: ClusterOpts,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Include member lists in the hierarchy JSON.
    #[arg(long)]
    pub emit_members: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub cluster: ClusterOpts,
    /// Restrict to one metric (default: both f and l).
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long, default_value_t = DEFAULT_MIN_MATCH_SIZE)]
    pub min_match_size: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InterpretArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = [0usize])]
    pub min_pts: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    pub min_cluster_size: usize,
    #[arg(long, default_value = "l")]
    pub metric: Metric,
    #[arg(long, default_value_t = DEFAULT_MIN_MATCH_SIZE)]
    pub min_match_size: usize,
    /// `all`, `none`, or a list such as `gender:nationality`.
    #[arg(long, default_value = "all")]
    pub conjunctions: Conjunctions,
    /// Also write the dendrogram SVG and layout JSON.
    #[arg(long)]
    pub render: bool,
    #[command(flatten)]
    pub render_opts: RenderOpts,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub hierarchy: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub render_opts: RenderOpts,
    #[arg(long)]
    pub svg_out: PathBuf,
    #[arg(long)]
    pub json_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[command(flatten)]
    pub cluster: ClusterOpts,
    /// Metric for the match reports; the CCM table always has both.
    #[arg(long, default_value = "l")]
    pub metric: Metric,
    #[arg(long, default_value_t = DEFAULT_MIN_MATCH_SIZE)]
    pub min_match_size: usize,
    #[arg(long, default_value = "all")]
    pub conjunctions: Conjunctions,
    #[command(flatten)]
    pub render_opts: RenderOpts,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub emit_members: bool,
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn load_set(input: &InputArgs) -> Result<EmbeddingSet, CliError> {
    let mut magic = [0u8; 4];
    let is_raw = fs::File::open(&input.embeddings)
        .and_then(|mut f| std::io::Read::read_exact(&mut f, &mut magic))
        .map(|_| &magic == EMB_MAGIC)
        .unwrap_or(false);
    if is_raw {
        let ids = input.ids.clone().unwrap_or_else(|| {
            let mut p = input.embeddings.clone().into_os_string();
            p.push(".ids");
            PathBuf::from(p)
        });
        Ok(load_embeddings_raw(&input.embeddings, &ids)?)
    } else {
        Ok(load_embeddings_csv(&input.embeddings)?)
    }
}

fn require_labels(labels: &Option<PathBuf>) -> Result<LabelTable, CliError> {
    let path = labels
        .as_ref()
        .ok_or_else(|| CliError::Input("--labels is required for this command".into()))?;
    Ok(load_labels(path)?)
}

fn check_min_pts(set: &EmbeddingSet, min_pts: &[usize]) -> Result<(), CliError> {
    if min_pts.is_empty() {
        return Err(CliError::Input("--min-pts needs at least one value".into()));
    }
    if let Some(bad) = min_pts.iter().find(|&&k| k > set.len().saturating_sub(1)) {
        return Err(CliError::Input(format!(
            "minPts {bad} exceeds n - 1 = {} for this embedding set",
            set.len().saturating_sub(1)
        )));
    }
    Ok(())
}

fn cluster_all(set: &EmbeddingSet, min_pts: &[usize], min_cluster_size: usize) -> Result<Vec<ClusterRun>, CliError> {
    check_min_pts(set, min_pts)?;
    let base = pairwise_distance(set).map_err(PipelineError::from)?;
    min_pts
        .iter()
        .map(|&k| {
            let run = cluster_from_base(&base, k, min_cluster_size)?;
            run.hierarchy
                .check_invariants()
                .map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(run)
        })
        .collect()
}

fn write_run(run: &ClusterRun, out_dir: &Path, emit_members: bool) -> Result<(), CliError> {
    let tag = run.tag();
    let json = run
        .hierarchy
        .to_json(emit_members)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write(&out_dir.join(format!("hierarchy_{tag}.json")), &json)?;
    let mut linkage = Vec::new();
    run.linkage
        .write_csv(&mut linkage)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    write(
        &out_dir.join(format!("linkage_{tag}.csv")),
        &String::from_utf8(linkage).expect("csv output is utf-8"),
    )
}

fn write_render(
    hierarchy: &ClusterHierarchy,
    report: &MatchReport,
    spec: &RenderSpec,
    svg_out: &Path,
    json_out: &Path,
) -> Result<(), CliError> {
    write(svg_out, &render_svg(hierarchy, report, spec)?)?;
    write(json_out, &render_json(hierarchy, report, spec)?)
}

fn run_interpret(
    set: &EmbeddingSet,
    labels: &LabelTable,
    runs: &[ClusterRun],
    metric: Metric,
    min_match_size: usize,
    conjunctions: &Conjunctions,
    render: Option<&RenderSpec>,
    out_dir: &Path,
) -> Result<(), CliError> {
    let pool = interpretation_pool(set, labels, conjunctions)?;
    for run in runs {
        let tag = run.tag();
        let report = interpret(&pool, run, metric, min_match_size)?;
        let text = report.to_json().map_err(|e| CliError::Internal(e.to_string()))?;
        write(&out_dir.join(format!("report_{tag}.json")), &text)?;
        if let Some(spec) = render {
            write_render(
                &run.hierarchy,
                &report,
                spec,
                &out_dir.join(format!("dendrogram_{tag}.svg")),
                &out_dir.join(format!("dendrogram_{tag}.json")),
            )?;
        }
    }
    Ok(())
}

fn metrics_for(choice: Option<Metric>) -> Vec<Metric> {
    choice.map_or_else(|| vec![Metric::F, Metric::L], |m| vec![m])
}

fn run_evaluate(
    set: &EmbeddingSet,
    labels: &LabelTable,
    runs: &[ClusterRun],
    metrics: &[Metric],
    min_match_size: usize,
    out_dir: &Path,
) -> Result<(), CliError> {
    let categories = labels.categories().to_vec();
    let mut rows = Vec::new();
    for run in runs {
        rows.extend(evaluate(set, labels, run, &categories, metrics, min_match_size)?);
    }
    if rows.iter().any(|r| !(0.0..=1.0).contains(&r.degree)) {
        return Err(CliError::Internal("matching degree outside [0, 1]".into()));
    }
    write(&out_dir.join("ccm.csv"), &ccm_csv(&rows))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => {
            let cfg = SynthConfig {
                genders: a.genders,
                nations_per_gender: a.nations_per_gender,
                identities_per_nation: a.identities_per_nation,
                points_per_identity: a.points_per_identity,
                dim: a.dim,
                s_gender: a.s_gender,
                s_nation: a.s_nation,
                s_identity: a.s_identity,
                radius: a.radius,
                seed: a.seed,
                allow_overlap: a.allow_overlap,
            };
            let (set, labels) = generate(&cfg)?;
            ensure_dir(&a.out_dir)?;
            write_embeddings_csv(&set, &a.out_dir.join("embeddings.csv"))?;
            write_labels(&labels, &a.out_dir.join("labels.csv"))?;
        }
        Command::Cluster(a) => {
            let set = load_set(&a.input)?;
            let runs = cluster_all(&set, &a.cluster.min_pts, a.cluster.min_cluster_size)?;
            ensure_dir(&a.out_dir)?;
            for run in &runs {
                write_run(run, &a.out_dir, a.emit_members)?;
            }
        }
        Command::Evaluate(a) => {
            let set = load_set(&a.input)?;
            let labels = require_labels(&a.labels)?;
            let runs = cluster_all(&set, &a.cluster.min_pts, a.cluster.min_cluster_size)?;
            ensure_dir(&a.out_dir)?;
            run_evaluate(&set, &labels, &runs, &metrics_for(a.metric), a.min_match_size, &a.out_dir)?;
        }
        Command::Interpret(a) => {
            let set = load_set(&a.input)?;
            let labels = require_labels(&a.labels)?;
            let runs = cluster_all(&set, &a.min_pts, a.min_cluster_size)?;
            ensure_dir(&a.out_dir)?;
            let spec = a.render_opts.spec();
            run_interpret(
                &set,
                &labels,
                &runs,
                a.metric,
                a.min_match_size,
                &a.conjunctions,
                a.render.then_some(&spec),
                &a.out_dir,
            )?;
        }
        Command::Render(a) => {
            let hierarchy = ClusterHierarchy::from_json(&read(&a.hierarchy)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", a.hierarchy.display())))?;
            let report = MatchReport::from_json(&read(&a.report)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", a.report.display())))?;
            write_render(&hierarchy, &report, &a.render_opts.spec(), &a.svg_out, &a.json_out)?;
        }
        Command::Pipeline(a) => {
            let set = load_set(&a.input)?;
            let labels = require_labels(&a.labels)?;
            let runs = cluster_all(&set, &a.cluster.min_pts, a.cluster.min_cluster_size)?;
            ensure_dir(&a.out_dir)?;
            for run in &runs {
                write_run(run, &a.out_dir, a.emit_members)?;
            }
            run_evaluate(&set, &labels, &runs, &metrics_for(None), a.min_match_size, &a.out_dir)?;
            let spec = a.render_opts.spec();
            run_interpret(
                &set,
                &labels,
                &runs,
                a.metric,
                a.min_match_size,
                &a.conjunctions,
                Some(&spec),
                &a.out_dir,
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn defaults() {
        let cli = Cli::try_parse_from(["hccm", "cluster", "--embeddings", "e.csv", "--out-dir", "o"]).unwrap();
        let Command::Cluster(a) = cli.command else { panic!() };
        assert_eq!(a.cluster.min_pts, DEFAULT_MIN_PTS.to_vec());
        assert_eq!(a.cluster.min_cluster_size, 1);
        let cli = Cli::try_parse_from([
            "hccm", "interpret", "--embeddings", "e.csv", "--labels", "l.csv", "--out-dir", "o",
        ])
        .unwrap();
        let Command::Interpret(a) = cli.command else { panic!() };
        assert_eq!(a.metric, Metric::L);
        assert_eq!(a.min_pts, vec![0]);
        assert_eq!(a.render_opts.display_size_threshold, 800);
        assert_eq!(a.render_opts.min_display, 0.25);
        assert_eq!(a.conjunctions, Conjunctions::All);
    }

    #[test]
    fn min_pts_list_parses() {
        let cli = Cli::try_parse_from([
            "hccm", "cluster", "--embeddings", "e.csv", "--out-dir", "o", "--min-pts", "0,2,4",
        ])
        .unwrap();
        let Command::Cluster(a) = cli.command else { panic!() };
        assert_eq!(a.cluster.min_pts, vec![0, 2, 4]);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 2);
        assert_eq!(CliError::Internal(String::new()).exit_code(), 3);
    }
}
