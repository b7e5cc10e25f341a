//! Inference: displace many random subsets and aggregate the results.

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::geometry::Vec3;
use crate::labeling::{Criterion, PointLabels};
use crate::net::{self, NetArchitecture, NetParams, NormalizationTransform};
use crate::real::Real;
use crate::sampler::{sample_uniform_subset, Sampler, SamplerConfig};
use crate::{Error, Result};

/// How inference subsets are drawn.
#[derive(Debug, Clone, Copy, Default)]
pub enum InferenceSubsets<'a> {
    #[default]
    Uniform,
    /// Experimental: each draw positive with the given probability.
    Rebalanced {
        labels: &'a PointLabels,
        p_positive: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConsolidationRequest {
    /// Number of output points; zero or at least `subset_size`.
    pub target_point_count: usize,
    pub subset_size: usize,
    /// Recorded for provenance; inference itself is criterion-agnostic.
    pub criterion: Option<Criterion>,
    pub seed: u64,
}

impl ConsolidationRequest {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.subset_size == 0 {
            return Err(Error::InvalidConfig("subset size must be positive"));
        }
        if self.subset_size > n {
            return Err(Error::SubsetTooLarge {
                m: self.subset_size,
                n,
            });
        }
        if self.target_point_count != 0 && self.target_point_count < self.subset_size {
            return Err(Error::InvalidConfig(
                "target point count must be zero or at least the subset size",
            ));
        }
        Ok(())
    }

    /// Number of subsets drawn: `ceil(target / m)`.
    pub fn batch_count(&self) -> usize {
        if self.subset_size == 0 {
            return 0;
        }
        self.target_point_count.div_ceil(self.subset_size)
    }
}

/// Receives consolidated points batch by batch.
pub trait PointSink {
    fn write_batch(&mut self, points: &[Vec3]) -> core::result::Result<(), String>;
}

impl PointSink for Vec<Vec3> {
    fn write_batch(&mut self, points: &[Vec3]) -> core::result::Result<(), String> {
        self.extend_from_slice(points);
        Ok(())
    }
}

/// Consolidated cloud of exactly `request.target_point_count` points, without normals.
pub fn consolidate<T: Real>(
    cloud: &PointCloud,
    params: &NetParams<T>,
    arch: &NetArchitecture,
    transform: &NormalizationTransform,
    request: &ConsolidationRequest,
    subsets: InferenceSubsets<'_>,
) -> Result<Vec<Vec3>> {
    let mut out = Vec::with_capacity(request.target_point_count);
    consolidate_streaming(cloud, params, arch, transform, request, subsets, &mut out)?;
    Ok(out)
}

/// Same point stream as [`consolidate`], emitted one subset at a time.
/// Returns the number of points written.
pub fn consolidate_streaming<T: Real>(
    cloud: &PointCloud,
    params: &NetParams<T>,
    arch: &NetArchitecture,
    transform: &NormalizationTransform,
    request: &ConsolidationRequest,
    subsets: InferenceSubsets<'_>,
    sink: &mut dyn PointSink,
) -> Result<usize> {
    let n = cloud.len();
    request.validate(n)?;
    let m = request.subset_size;
    let min = arch.min_points();
    if m < min {
        return Err(Error::InsufficientPoints {
            needed: min,
            got: m,
        });
    }
    if let InferenceSubsets::Rebalanced { labels, .. } = subsets {
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: n,
                got: labels.len(),
            });
        }
    }
    let unit: Vec<Vec3> = cloud.points().iter().map(|p| transform.apply(*p)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
    let mut rebalancer = match subsets {
        InferenceSubsets::Rebalanced { .. } => Some(Sampler::new(SamplerConfig {
            seed: request.seed,
            ..SamplerConfig::default()
        })?),
        InferenceSubsets::Uniform => None,
    };
    let mut written = 0usize;
    let mut batch: Vec<Vec3> = Vec::with_capacity(m);
    for _ in 0..request.batch_count() {
        let indices = match (subsets, rebalancer.as_mut()) {
            (InferenceSubsets::Rebalanced { labels, p_positive }, Some(s)) => {
                s.rebalanced_subset(labels, m, p_positive)?
            }
            _ => sample_uniform_subset(n, m, &mut rng)?,
        };
        let subset: Vec<[T; 3]> = indices.iter().map(|&i| to_net(unit[i])).collect();
        let offsets = net::forward(params, arch, &subset)?;
        batch.clear();
        let keep = m.min(request.target_point_count - written);
        for (s, d) in subset.iter().zip(&offsets).take(keep) {
            let p = Vec3::new(
                (s[0] + d[0]).as_f64(),
                (s[1] + d[1]).as_f64(),
                (s[2] + d[2]).as_f64(),
            );
            batch.push(transform.invert(p));
        }
        sink.write_batch(&batch)
            .map_err(|message| Error::Sink { written, message })?;
        written += batch.len();
    }
    Ok(written)
}

fn to_net<T: Real>(p: Vec3) -> [T; 3] {
    [T::from_f64(p.x), T::from_f64(p.y), T::from_f64(p.z)]
}
