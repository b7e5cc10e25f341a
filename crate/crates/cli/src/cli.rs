//! Command-line definitions and dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use selfsample_core::eval::{
    density_iqr, dist_to_surface, f_score, normal_error_sharp, sample_edges, EvalReport,
    DEFAULT_DIHEDRAL_THRESHOLD_DEG,
};
use selfsample_core::proxy::{estimate_normals, DEFAULT_CURVATURE_K, DEFAULT_DENSITY_K};
use selfsample_core::PointCloud;

use crate::checkpoint::Checkpoint;
use crate::config::{Labeling, Mode, Overrides, RunConfig, Sampling};
use crate::error::{CliError, CliResult};
use crate::fixtures::{make_fixture, FixtureKind, FixtureParams};
use crate::formats::{
    read_mesh, read_point_cloud, read_point_data, write_obj, write_point_cloud, write_points,
    PointFormat,
};
use crate::pipeline::{self, Progress};

#[derive(Debug, Parser)]
#[command(
    name = "selfsample",
    version,
    about = "Self-sampling point cloud consolidation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label points and export them colored (positive red, negative blue).
    Label(RunArgs),
    /// Train a network and save a checkpoint.
    Train(RunArgs),
    /// Consolidate with a saved checkpoint.
    Infer(RunArgs),
    /// Train and infer in one run.
    Consolidate(RunArgs),
    /// Evaluation metrics, written as JSON.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Generate a synthetic cloud with known ground truth.
    Fixture(FixtureArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// TOML or JSON run configuration; flags given here take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// sharp, sparse or uniform.
    #[arg(long)]
    pub criterion: Option<Mode>,
    /// auto (uniform pairs below 20k points), balanced or uniform.
    #[arg(long)]
    pub sampling: Option<Sampling>,
    /// auto, threshold or kmeans.
    #[arg(long)]
    pub labeling: Option<Labeling>,
    #[arg(long)]
    pub p_target: Option<f64>,
    #[arg(long)]
    pub p_source: Option<f64>,
    #[arg(long)]
    pub subset_frac: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Output point count (default: input size).
    #[arg(long)]
    pub out_points: Option<usize>,
    /// Experimental: probability of drawing an inference point from the positive class.
    #[arg(long)]
    pub rebalanced_inference: Option<f64>,
    #[arg(long)]
    pub curvature_k: Option<usize>,
    #[arg(long)]
    pub density_k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training log CSV (iteration, loss, wall_ms).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write PLY output as ASCII instead of binary.
    #[arg(long)]
    pub ascii: bool,
    /// Print the training loss every N iterations (0 disables).
    #[arg(long, default_value_t = 500)]
    pub progress: usize,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            criterion: self.criterion,
            sampling: self.sampling,
            labeling: self.labeling,
            p_target: self.p_target,
            p_source: self.p_source,
            subset_frac: self.subset_frac,
            iters: self.iters,
            lr: self.lr,
            out_points: self.out_points,
            rebalanced_inference: self.rebalanced_inference,
            curvature_k: self.curvature_k,
            density_k: self.density_k,
            seed: self.seed,
            input: self.input.clone(),
            output: self.output.clone(),
            checkpoint: self.checkpoint.clone(),
        }
    }

    pub fn resolve(&self) -> CliResult<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let cfg = base.merge(self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Edge F-score against ground-truth points or edge samples of a mesh.
    Fscore(FscoreArgs),
    /// Interquartile range of per-point density.
    Density(DensityArgs),
    /// Median normal error in the sharp region of a mesh.
    Normals(NormalsArgs),
    /// Mean distance to a mesh surface.
    SurfaceDist(SurfaceArgs),
}

#[derive(Debug, Args)]
pub struct FscoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Ground-truth point cloud.
    #[arg(long, conflicts_with = "gt_mesh", required_unless_present = "gt_mesh")]
    pub gt: Option<PathBuf>,
    /// Mesh whose sharp edges are sampled as ground truth.
    #[arg(long)]
    pub gt_mesh: Option<PathBuf>,
    /// Distance threshold (default: 1% of the ground-truth bounding-box diagonal).
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 20_000)]
    pub edge_samples: usize,
    /// Off-edge sample spread (default: twice the mean mesh edge length).
    #[arg(long)]
    pub falloff: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_DIHEDRAL_THRESHOLD_DEG)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; the report is always printed.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DENSITY_K)]
    pub k: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NormalsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    /// Sharp-region radius (default: 1% of the mesh bounding-box diagonal).
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CURVATURE_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_DIHEDRAL_THRESHOLD_DEG)]
    pub threshold: f64,
    /// Use normals stored in the input instead of re-estimating them.
    #[arg(long)]
    pub file_normals: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// cube_missing_edges, two_density_sphere, noisy_cube, dihedral_wedge or grid.
    #[arg(long)]
    pub kind: FixtureKind,
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth mesh as OBJ, when the fixture has one.
    #[arg(long)]
    pub mesh_output: Option<PathBuf>,
    /// Export the ground-truth annotation flags as colors.
    #[arg(long)]
    pub colors: bool,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub band: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub density_ratio: Option<f64>,
    #[arg(long)]
    pub dihedral_deg: Option<f64>,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub mesh_segments: Option<usize>,
    #[arg(long)]
    pub ascii: bool,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Label(a) => run_label(&a),
        Command::Train(a) => run_train(&a),
        Command::Infer(a) => run_infer(&a),
        Command::Consolidate(a) => run_consolidate(&a),
        Command::Eval(e) => run_eval(e),
        Command::Fixture(a) => run_fixture(&a),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config file)")))
}

fn output_format(path: &Path, ascii: bool) -> CliResult<PointFormat> {
    Ok(match PointFormat::from_path(path)? {
        PointFormat::PlyBinary if ascii => PointFormat::PlyAscii,
        f => f,
    })
}

fn run_label(a: &RunArgs) -> CliResult<()> {
    let cfg = a.resolve()?;
    let input = required(&cfg.input, "input")?;
    let output = required(&cfg.output, "output")?;
    let criterion = cfg
        .criterion
        .criterion()
        .ok_or_else(|| CliError::Usage("label needs --criterion sharp or sparse".into()))?;
    let cloud = read_point_cloud(input)?;
    let labels = pipeline::compute_labels(&cloud, criterion, &cfg)?;
    let colors = pipeline::label_colors(&labels);
    write_point_cloud(
        &cloud,
        output,
        output_format(output, a.ascii)?,
        Some(&colors),
    )?;
    eprintln!(
        "{} of {} points positive ({:.1}%)",
        labels.positive_count(),
        labels.len(),
        100.0 * labels.positive_fraction()
    );
    pipeline::write_provenance(
        output,
        "label",
        &cfg,
        json!({ "positive_count": labels.positive_count(), "points": labels.len() }),
    )
}

fn train_and_log(a: &RunArgs, cfg: &RunConfig, cloud: &PointCloud) -> CliResult<pipeline::Trained> {
    let mut progress = Progress::new(a.progress, cfg.iters);
    let trained = pipeline::train_model(cloud, cfg, &mut progress)?;
    if let Some(log) = &a.log {
        pipeline::write_train_log(&trained.log, log)?;
    }
    Ok(trained)
}

fn train_details(t: &pipeline::Trained) -> serde_json::Value {
    json!({
        "subset_size": t.checkpoint.subset_size,
        "final_loss": t.log.losses.last(),
        "positive_count": t.labels.as_ref().map(|l| l.positive_count()),
        "fallbacks": { "target": t.log.fallbacks.target, "source": t.log.fallbacks.source },
    })
}

fn run_train(a: &RunArgs) -> CliResult<()> {
    let cfg = a.resolve()?;
    let input = required(&cfg.input, "input")?;
    let ck_path = required(&cfg.checkpoint, "checkpoint")?;
    let cloud = read_point_cloud(input)?;
    let trained = train_and_log(a, &cfg, &cloud)?;
    trained.checkpoint.save(ck_path)?;
    pipeline::write_provenance(ck_path, "train", &cfg, train_details(&trained))
}

fn run_infer(a: &RunArgs) -> CliResult<()> {
    let cfg = a.resolve()?;
    let input = required(&cfg.input, "input")?;
    let output = required(&cfg.output, "output")?;
    let ck = Checkpoint::load(required(&cfg.checkpoint, "checkpoint")?)?;
    let cloud = read_point_cloud(input)?;
    let points = pipeline::infer(&cloud, &ck, &cfg, None)?;
    write_points(&points, None, output, output_format(output, a.ascii)?, None)?;
    pipeline::write_provenance(
        output,
        "infer",
        &cfg,
        json!({ "subset_size": ck.subset_size, "points": points.len() }),
    )
}

fn run_consolidate(a: &RunArgs) -> CliResult<()> {
    let cfg = a.resolve()?;
    let input = required(&cfg.input, "input")?;
    let output = required(&cfg.output, "output")?;
    let cloud = read_point_cloud(input)?;
    let m = cfg.sampler_config().subset_size(cloud.len())?;
    if let Some(k) = cfg.out_points.filter(|&k| k != 0 && k < m) {
        return Err(CliError::Usage(format!(
            "--out-points {k} is below the subset size {m}"
        )));
    }
    let trained = train_and_log(a, &cfg, &cloud)?;
    if let Some(ck_path) = &cfg.checkpoint {
        trained.checkpoint.save(ck_path)?;
    }
    let points = pipeline::infer(&cloud, &trained.checkpoint, &cfg, trained.labels.as_ref())?;
    write_points(&points, None, output, output_format(output, a.ascii)?, None)?;
    let mut details = train_details(&trained);
    details["points"] = json!(points.len());
    pipeline::write_provenance(output, "consolidate", &cfg, details)
}

fn emit_report(
    report: &EvalReport,
    output: Option<&Path>,
    command: &str,
    args: serde_json::Value,
) -> CliResult<()> {
    let text = serde_json::to_string_pretty(report)?;
    if let Err(e) = writeln!(std::io::stdout().lock(), "{text}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(CliError::io("<stdout>", e));
        }
    }
    if let Some(path) = output {
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))?;
        pipeline::write_provenance(path, command, &args, json!({}))?;
    }
    Ok(())
}

fn run_eval(e: EvalCommand) -> CliResult<()> {
    match e {
        EvalCommand::Fscore(a) => {
            let pred = read_point_cloud(&a.input)?;
            let (gt, default_tau, falloff) = match (&a.gt, &a.gt_mesh) {
                (Some(gt), None) => {
                    let gt = read_point_cloud(gt)?;
                    let diag = gt.bbox_diagonal();
                    (gt.into_points(), 0.01 * diag, None)
                }
                (None, Some(mesh)) => {
                    let mesh = read_mesh(mesh)?;
                    let falloff = a.falloff.unwrap_or(2.0 * mesh.mean_edge_length());
                    let gt = sample_edges(&mesh, a.edge_samples, a.threshold, falloff, a.seed)?;
                    (
                        gt.into_points(),
                        0.01 * mesh.bbox().diagonal(),
                        Some(falloff),
                    )
                }
                _ => {
                    return Err(CliError::Usage(
                        "give exactly one of --gt and --gt-mesh".into(),
                    ))
                }
            };
            let tau = a.tau.unwrap_or(default_tau);
            let score = f_score(pred.points(), &gt, tau)?;
            let mut report = EvalReport::default().with_f_score(score, tau);
            if a.gt_mesh.is_some() {
                report.dihedral_threshold_deg = Some(a.threshold);
            }
            let args = json!({
                "input": a.input, "gt": a.gt, "gt_mesh": a.gt_mesh, "tau": tau,
                "edge_samples": a.edge_samples, "falloff": falloff, "threshold": a.threshold, "seed": a.seed,
            });
            emit_report(&report, a.output.as_deref(), "eval fscore", args)
        }
        EvalCommand::Density(a) => {
            let cloud = read_point_cloud(&a.input)?;
            let report = EvalReport {
                density_iqr: Some(density_iqr(&cloud, a.k)?),
                density_k: Some(a.k),
                ..EvalReport::default()
            };
            emit_report(
                &report,
                a.output.as_deref(),
                "eval density",
                json!({ "input": a.input, "k": a.k }),
            )
        }
        EvalCommand::Normals(a) => {
            let data = read_point_data(&a.input)?;
            let mesh = read_mesh(&a.mesh)?;
            let tau = a.tau.unwrap_or(0.01 * mesh.bbox().diagonal());
            let normals = if a.file_normals {
                data.normals.clone().ok_or_else(|| {
                    CliError::Usage(format!("{} has no normals", a.input.display()))
                })?
            } else {
                let cloud = PointCloud::new(data.points.clone())?;
                estimate_normals(&cloud, a.k)?.normals
            };
            let err = normal_error_sharp(&data.points, &normals, &mesh, tau, a.threshold)?;
            let report = EvalReport {
                normal_error_median_deg: Some(err),
                dihedral_threshold_deg: Some(a.threshold),
                tau: Some(tau),
                ..EvalReport::default()
            };
            let args = json!({
                "input": a.input, "mesh": a.mesh, "tau": tau, "k": a.k,
                "threshold": a.threshold, "file_normals": a.file_normals,
            });
            emit_report(&report, a.output.as_deref(), "eval normals", args)
        }
        EvalCommand::SurfaceDist(a) => {
            let cloud = read_point_cloud(&a.input)?;
            let mesh = read_mesh(&a.mesh)?;
            let (_, mean) = dist_to_surface(cloud.points(), &mesh)?;
            let report = EvalReport {
                mean_dist_to_surface: Some(mean),
                ..EvalReport::default()
            };
            emit_report(
                &report,
                a.output.as_deref(),
                "eval surface-dist",
                json!({ "input": a.input, "mesh": a.mesh }),
            )
        }
    }
}

fn run_fixture(a: &FixtureArgs) -> CliResult<()> {
    let d = FixtureParams::default();
    let params = FixtureParams {
        points: a.points.unwrap_or(d.points),
        seed: a.seed.unwrap_or(d.seed),
        band: a.band.unwrap_or(d.band),
        noise: a.noise.unwrap_or(d.noise),
        density_ratio: a.density_ratio.unwrap_or(d.density_ratio),
        dihedral_deg: a.dihedral_deg.unwrap_or(d.dihedral_deg),
        spacing: a.spacing.unwrap_or(d.spacing),
        grid_size: a.grid_size.unwrap_or(d.grid_size),
        mesh_segments: a.mesh_segments.unwrap_or(d.mesh_segments),
    };
    let fixture = make_fixture(a.kind, &params)?;
    let colors: Option<Vec<_>> = a.colors.then(|| {
        use crate::formats::{NEGATIVE_COLOR, POSITIVE_COLOR};
        fixture
            .flags
            .iter()
            .map(|&f| if f { POSITIVE_COLOR } else { NEGATIVE_COLOR })
            .collect()
    });
    write_point_cloud(
        &fixture.cloud,
        &a.output,
        output_format(&a.output, a.ascii)?,
        colors.as_deref(),
    )?;
    if let Some(mesh_path) = &a.mesh_output {
        let mesh = fixture
            .mesh
            .as_ref()
            .ok_or_else(|| CliError::Usage(format!("fixture {} has no mesh", a.kind)))?;
        write_obj(mesh, mesh_path)?;
    }
    pipeline::write_provenance(
        &a.output,
        "fixture",
        &json!({ "kind": a.kind.name(), "params": params }),
        json!({ "points": fixture.cloud.len() }),
    )
}
