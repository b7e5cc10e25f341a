//! Chamfer loss, Adam and the self-sampling training loop.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::geometry::Vec3;
use crate::knn::KnnIndex;
use crate::labeling::PointLabels;
use crate::net::{self, NetArchitecture, NetParams, NormalizationTransform};
use crate::real::Real;
use crate::sampler::{FallbackCount, Sampler, SamplerConfig, SubsetPair};
use crate::{Error, Result};

/// Sets larger than this use the kd-tree for nearest-neighbor lookups.
pub const BRUTE_FORCE_LIMIT: usize = 256;

/// For every point of `from`, the index of its nearest point in `to`
/// (ties to the lowest index) and the squared distance.
fn nearest_in(from: &[Vec3], to: &[Vec3]) -> Result<Vec<(usize, f64)>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if to.len() > BRUTE_FORCE_LIMIT {
        let index = KnnIndex::from_points(to)?;
        Ok(from
            .iter()
            .map(|p| {
                let n = index.nearest(*p);
                (n.index, n.dist_sq)
            })
            .collect())
    } else {
        Ok(from.iter().map(|p| brute_nearest(*p, to)).collect())
    }
}

fn brute_nearest(p: Vec3, to: &[Vec3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, q) in to.iter().enumerate() {
        let d = p.distance_squared(*q);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Bidirectional Chamfer distance in sum form.
pub fn chamfer_distance(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    let forward: f64 = nearest_in(p, q)?.iter().map(|n| n.1).sum();
    let backward: f64 = nearest_in(q, p)?.iter().map(|n| n.1).sum();
    Ok(forward + backward)
}

/// Same as [`chamfer_distance`] but always by exhaustive search.
pub fn chamfer_distance_brute_force(p: &[Vec3], q: &[Vec3]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let forward: f64 = p.iter().map(|x| brute_nearest(*x, q).1).sum();
    let backward: f64 = q.iter().map(|x| brute_nearest(*x, p).1).sum();
    Ok(forward + backward)
}

/// Training loss: the Chamfer distance divided by `m`.
pub fn chamfer_loss(predicted: &[Vec3], target: &[Vec3]) -> Result<f64> {
    check_equal_sizes(predicted.len(), target.len())?;
    Ok(chamfer_distance(predicted, target)? / predicted.len() as f64)
}

fn check_equal_sizes(predicted: usize, target: usize) -> Result<()> {
    if predicted != target {
        return Err(Error::LengthMismatch {
            what: "predicted/target sets",
            expected: target,
            got: predicted,
        });
    }
    if predicted == 0 {
        return Err(Error::EmptyCloud);
    }
    Ok(())
}

/// Loss and its gradient w.r.t. the predicted points.
pub fn chamfer_loss_with_gradient<T: Real>(
    predicted: &[[T; 3]],
    target: &[[T; 3]],
) -> Result<(f64, Vec<[T; 3]>)> {
    check_equal_sizes(predicted.len(), target.len())?;
    let m = predicted.len();
    let p: Vec<Vec3> = predicted.iter().map(to_vec3).collect();
    let q: Vec<Vec3> = target.iter().map(to_vec3).collect();
    let p_to_q = nearest_in(&p, &q)?;
    let q_to_p = nearest_in(&q, &p)?;
    let sum: f64 =
        p_to_q.iter().map(|n| n.1).sum::<f64>() + q_to_p.iter().map(|n| n.1).sum::<f64>();
    let scale = 2.0 / m as f64;
    let mut grad: Vec<Vec3> = p
        .iter()
        .zip(&p_to_q)
        .map(|(pi, &(j, _))| (*pi - q[j]) * scale)
        .collect();
    for (qj, &(i, _)) in q.iter().zip(&q_to_p) {
        grad[i] += (p[i] - *qj) * scale;
    }
    let grad = grad
        .into_iter()
        .map(|g| [T::from_f64(g.x), T::from_f64(g.y), T::from_f64(g.z)])
        .collect();
    Ok((sum / m as f64, grad))
}

fn to_vec3<T: Real>(p: &[T; 3]) -> Vec3 {
    Vec3::new(p[0].as_f64(), p[1].as_f64(), p[2].as_f64())
}

/// Loss of `subset + G(subset)` against `target` and its gradient w.r.t. every parameter.
pub fn loss_and_gradient<T: Real>(
    params: &NetParams<T>,
    arch: &NetArchitecture,
    subset: &[[T; 3]],
    target: &[[T; 3]],
) -> Result<(f64, Vec<T>)> {
    let tape = net::forward_with_tape(params, arch, subset)?;
    let predicted: Vec<[T; 3]> = subset
        .iter()
        .zip(tape.offsets())
        .map(|(s, d)| [s[0] + d[0], s[1] + d[1], s[2] + d[2]])
        .collect();
    let (loss, d_pred) = chamfer_loss_with_gradient(&predicted, target)?;
    let grads = net::backward(params, arch, &tape, &d_pred)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    /// Train in 64-bit precision.
    pub gradient_check_mode: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iterations: 10_000,
            gradient_check_mode: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning rate must be positive"));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("adam epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: alloc::vec![T::zero(); len],
            v: alloc::vec![T::zero(); len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<()> {
    let n = params.len();
    for (what, got) in [
        ("gradient", grads.len()),
        ("adam first moment", state.m.len()),
        ("adam second moment", state.v.len()),
    ] {
        if got != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                got,
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64(config.beta1);
    let b2 = T::from_f64(config.beta2);
    let one = T::one();
    let c1 = T::from_f64(1.0 - Float::powi(config.beta1, t));
    let c2 = T::from_f64(1.0 - Float::powi(config.beta2, t));
    let lr = T::from_f64(config.learning_rate);
    let eps = T::from_f64(config.epsilon);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (one - b1) * g;
        state.v[i] = b2 * state.v[i] + (one - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Where each iteration's source/target pair comes from.
#[derive(Debug, Clone, Copy)]
pub enum PairSource<'a> {
    /// Class-rebalanced pairs from the labels.
    Balanced(&'a PointLabels),
    /// Uniform pairs, labels ignored.
    Uniform,
    /// The same pair every iteration.
    Fixed(&'a SubsetPair),
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainLog {
    /// Loss of each completed iteration.
    pub losses: Vec<f64>,
    /// Wall-clock milliseconds of each completed iteration (zero without a clock).
    pub wall_ms: Vec<f64>,
    pub fallbacks: FallbackCount,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}

/// Hooks for timing and progress; the core has no clock of its own.
pub trait TrainObserver {
    /// Monotonic time in milliseconds.
    fn now_ms(&mut self) -> f64 {
        0.0
    }

    fn on_iteration(&mut self, _iteration: usize, _loss: f64) {}
}

/// Observer that does nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl TrainObserver for Silent {}

/// A trained network plus the frame it was trained in.
#[derive(Debug, Clone)]
pub struct TrainedModel<T: Real> {
    pub arch: NetArchitecture,
    pub params: NetParams<T>,
    pub transform: NormalizationTransform,
    /// Subset size used in training.
    pub subset_size: usize,
}

/// Trains `arch` on `cloud`. Use `T = f64` together with `gradient_check_mode`.
pub fn train<T: Real>(
    cloud: &PointCloud,
    pairs: PairSource<'_>,
    sampler_config: &SamplerConfig,
    config: &TrainConfig,
    arch: &NetArchitecture,
) -> Result<(TrainedModel<T>, TrainLog)> {
    train_observed(cloud, pairs, sampler_config, config, arch, &mut Silent)
}

pub fn train_observed<T: Real>(
    cloud: &PointCloud,
    pairs: PairSource<'_>,
    sampler_config: &SamplerConfig,
    config: &TrainConfig,
    arch: &NetArchitecture,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainedModel<T>, TrainLog)> {
    config.validate()?;
    if config.gradient_check_mode != (T::BYTES == 8) {
        return Err(Error::InvalidConfig(
            "gradient-check mode requires 64-bit parameters and training requires 32-bit otherwise",
        ));
    }
    let n = cloud.len();
    if let PairSource::Balanced(labels) = pairs {
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: n,
                got: labels.len(),
            });
        }
    }
    let m = match pairs {
        PairSource::Fixed(pair) => {
            if pair.source.iter().chain(&pair.target).any(|&i| i >= n) {
                return Err(Error::InvalidConfig("fixed pair index out of range"));
            }
            pair.m()
        }
        _ => sampler_config.subset_size(n)?,
    };
    let min = arch.min_points();
    if m < min {
        return Err(Error::InsufficientPoints {
            needed: min,
            got: m,
        });
    }
    let (unit, transform) = net::normalize(cloud)?;
    let points: Vec<[T; 3]> = net::to_network_points(unit.points());
    let mut params = net::init_params::<T>(arch, config.seed)?;
    let mut adam = AdamState::new(params.len());
    let mut sampler = Sampler::new(*sampler_config)?;
    let mut log = TrainLog {
        losses: Vec::with_capacity(config.iterations),
        wall_ms: Vec::with_capacity(config.iterations),
        fallbacks: FallbackCount::default(),
    };
    let mut subset = Vec::with_capacity(m);
    let mut target = Vec::with_capacity(m);
    for it in 0..config.iterations {
        let start = observer.now_ms();
        let drawn;
        let pair = match pairs {
            PairSource::Balanced(labels) => {
                drawn = sampler.sample_pair(labels, m)?;
                &drawn
            }
            PairSource::Uniform => {
                drawn = sampler.uniform_pair(n, m)?;
                &drawn
            }
            PairSource::Fixed(pair) => pair,
        };
        subset.clear();
        subset.extend(pair.source.iter().map(|&i| points[i]));
        target.clear();
        target.extend(pair.target.iter().map(|&i| points[i]));
        let (loss, grads) = loss_and_gradient(&params, arch, &subset, &target)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it });
        }
        adam_step(params.values_mut(), &grads, &mut adam, config)?;
        log.losses.push(loss);
        log.wall_ms.push(observer.now_ms() - start);
        observer.on_iteration(it, loss);
    }
    log.fallbacks = sampler.fallbacks();
    Ok((
        TrainedModel {
            arch: arch.clone(),
            params,
            transform,
            subset_size: m,
        },
        log,
    ))
}
