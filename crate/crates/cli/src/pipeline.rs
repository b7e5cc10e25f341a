//! Command bodies shared by the binary and the tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use selfsample_core::consolidate::{
    consolidate_streaming, ConsolidationRequest, InferenceSubsets, PointSink,
};
use selfsample_core::labeling::{label_by_kmeans, label_by_threshold};
use selfsample_core::proxy::{curvature_proxy, density_proxy, estimate_normals};
use selfsample_core::train::{train_observed, PairSource, TrainLog, TrainObserver};
use selfsample_core::{Criterion, NetArchitecture, PointCloud, PointLabels, Vec3};

use crate::checkpoint::{Checkpoint, Params};
use crate::config::{Labeling, RunConfig};
use crate::error::{CliError, CliResult};
use crate::formats::{Rgb, NEGATIVE_COLOR, POSITIVE_COLOR};

/// Sharp uses the curvature proxy, sparse the density proxy. The mean
/// threshold marks high curvature or low density; 3-means marks the top
/// curvature or bottom density cluster.
pub fn compute_labels(
    cloud: &PointCloud,
    criterion: Criterion,
    cfg: &RunConfig,
) -> CliResult<PointLabels> {
    let proxy = match criterion {
        Criterion::Sharp => {
            let normals = estimate_normals(cloud, cfg.curvature_k)?;
            curvature_proxy(cloud, &normals.normals, cfg.curvature_k)?
        }
        Criterion::Sparse => density_proxy(cloud, cfg.density_k)?,
    };
    let kmeans = match cfg.labeling {
        Labeling::Auto => criterion == Criterion::Sparse,
        Labeling::Threshold => false,
        Labeling::Kmeans => true,
    };
    Ok(if kmeans {
        label_by_kmeans(&proxy, criterion, cfg.seed)?
    } else {
        label_by_threshold(&proxy, criterion)?
    })
}

pub fn label_colors(labels: &PointLabels) -> Vec<Rgb> {
    (0..labels.len())
        .map(|i| {
            if labels.is_positive(i) {
                POSITIVE_COLOR
            } else {
                NEGATIVE_COLOR
            }
        })
        .collect()
}

/// Prints a loss line to stderr every `every` iterations.
pub struct Progress {
    start: Instant,
    every: usize,
    total: usize,
}

impl Progress {
    pub fn new(every: usize, total: usize) -> Self {
        Progress {
            start: Instant::now(),
            every,
            total,
        }
    }
}

impl TrainObserver for Progress {
    fn now_ms(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64() * 1e3
    }

    fn on_iteration(&mut self, iteration: usize, loss: f64) {
        if self.every > 0
            && ((iteration + 1).is_multiple_of(self.every) || iteration + 1 == self.total)
        {
            eprintln!("iter {:>6}/{}  loss {loss:.6e}", iteration + 1, self.total);
        }
    }
}

pub struct Trained {
    pub checkpoint: Checkpoint,
    pub log: TrainLog,
    pub labels: Option<PointLabels>,
}

/// Labels (unless uniform), then trains the default architecture in 32-bit.
pub fn train_model(
    cloud: &PointCloud,
    cfg: &RunConfig,
    observer: &mut dyn TrainObserver,
) -> CliResult<Trained> {
    cfg.validate()?;
    let labels = match cfg.criterion.criterion() {
        Some(c) => Some(compute_labels(cloud, c, cfg)?),
        None => None,
    };
    let pairs = match &labels {
        Some(l) if cfg.balanced_pairs(cloud.len()) => PairSource::Balanced(l),
        _ => PairSource::Uniform,
    };
    let arch = NetArchitecture::default();
    let (model, log) = train_observed::<f32>(
        cloud,
        pairs,
        &cfg.sampler_config(),
        &cfg.train_config(),
        &arch,
        observer,
    )?;
    Ok(Trained {
        checkpoint: model.into(),
        log,
        labels,
    })
}

pub fn consolidation_request(
    cloud: &PointCloud,
    ck: &Checkpoint,
    cfg: &RunConfig,
) -> ConsolidationRequest {
    ConsolidationRequest {
        target_point_count: cfg.out_points.unwrap_or(cloud.len()),
        subset_size: ck.subset_size,
        criterion: cfg.criterion.criterion(),
        seed: cfg.inference_seed(),
    }
}

/// Runs inference into `sink`. `labels` are only needed for rebalanced inference
/// and are computed on demand when absent.
pub fn infer_into(
    cloud: &PointCloud,
    ck: &Checkpoint,
    cfg: &RunConfig,
    labels: Option<&PointLabels>,
    sink: &mut dyn PointSink,
) -> CliResult<usize> {
    let request = consolidation_request(cloud, ck, cfg);
    let computed;
    let subsets = match (cfg.rebalanced_inference, cfg.criterion.criterion()) {
        (Some(p_positive), Some(c)) => {
            let labels = match labels {
                Some(l) => l,
                None => {
                    computed = compute_labels(cloud, c, cfg)?;
                    &computed
                }
            };
            InferenceSubsets::Rebalanced { labels, p_positive }
        }
        (Some(_), None) => {
            return Err(CliError::Usage(
                "rebalanced inference needs a sharp or sparse criterion".into(),
            ))
        }
        (None, _) => InferenceSubsets::Uniform,
    };
    let n = match &ck.params {
        Params::F32(p) => {
            consolidate_streaming(cloud, p, &ck.arch, &ck.transform, &request, subsets, sink)?
        }
        Params::F64(p) => {
            consolidate_streaming(cloud, p, &ck.arch, &ck.transform, &request, subsets, sink)?
        }
    };
    Ok(n)
}

pub fn infer(
    cloud: &PointCloud,
    ck: &Checkpoint,
    cfg: &RunConfig,
    labels: Option<&PointLabels>,
) -> CliResult<Vec<Vec3>> {
    let mut out = Vec::new();
    infer_into(cloud, ck, cfg, labels, &mut out)?;
    Ok(out)
}

#[derive(Debug, Serialize)]
struct LogRow {
    iteration: usize,
    loss: f64,
    wall_ms: f64,
}

/// CSV with columns `iteration,loss,wall_ms`.
pub fn write_train_log(log: &TrainLog, path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, (&loss, &wall_ms)) in log.losses.iter().zip(&log.wall_ms).enumerate() {
        w.serialize(LogRow {
            iteration: i,
            loss,
            wall_ms,
        })?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn provenance_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    output.with_file_name(name)
}

/// Writes `<output>.provenance.json` with the tool version, the command, the
/// effective configuration and any command-specific details.
pub fn write_provenance(
    output: &Path,
    command: &str,
    cfg: &impl Serialize,
    details: serde_json::Value,
) -> CliResult<()> {
    let doc = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": cfg,
        "details": details,
    });
    let path = provenance_path(output);
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
}
