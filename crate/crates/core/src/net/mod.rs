//! The displacement network.
//!
//! A two-level hourglass in the style of set-abstraction point networks:
//! farthest-point centroids, radius grouping with a shared per-point MLP and
//! max-pooling on the way down, inverse-distance feature interpolation with
//! skip connections on the way up, and a per-point head that emits a 3D
//! offset. The predicted target is `subset + offsets`.

mod dense;
mod forward;
mod grouping;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::geometry::Vec3;
use crate::real::Real;
use crate::{Error, Result};

pub use forward::{backward, forward, forward_with_tape, Tape};

/// Bound of the uniform init of the final head layer weights.
pub const FINAL_LAYER_INIT: f64 = 1e-5;

/// One set-abstraction (downsampling) level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderLevel {
    /// Centroids kept relative to the previous level's point count.
    pub sample_ratio: f64,
    /// Grouping radius in the normalized (unit-sphere) frame.
    pub radius: f64,
    pub group_size: usize,
    /// Widths of the shared dense layers; all followed by ReLU.
    pub widths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetArchitecture {
    pub encoder: Vec<EncoderLevel>,
    /// One entry per encoder level, deepest first; each is a list of dense widths.
    pub decoder: Vec<Vec<usize>>,
    /// Per-point head widths; the last must be 3 and has no activation.
    pub head: Vec<usize>,
}

impl Default for NetArchitecture {
    fn default() -> Self {
        NetArchitecture {
            encoder: alloc::vec![
                EncoderLevel {
                    sample_ratio: 0.25,
                    radius: 0.1,
                    group_size: 16,
                    widths: alloc::vec![32, 64],
                },
                EncoderLevel {
                    sample_ratio: 0.25,
                    radius: 0.25,
                    group_size: 32,
                    widths: alloc::vec![128],
                },
            ],
            decoder: alloc::vec![alloc::vec![128], alloc::vec![64]],
            head: alloc::vec![64, 3],
        }
    }
}

/// Shape and parameter offset of one dense layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub name: String,
    pub in_dim: usize,
    pub out_dim: usize,
    pub relu: bool,
    /// Start of this layer's weights in the flat parameter vector; bias follows.
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_count(&self) -> usize {
        self.in_dim * self.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

impl NetArchitecture {
    pub fn validate(&self) -> Result<()> {
        if self.head.is_empty() {
            return Err(Error::InvalidArchitecture("empty architecture"));
        }
        if self.head.last() != Some(&3) {
            return Err(Error::InvalidArchitecture("head must end with 3 outputs"));
        }
        if self.decoder.len() != self.encoder.len() {
            return Err(Error::InvalidArchitecture(
                "need exactly one decoder level per encoder level",
            ));
        }
        for level in &self.encoder {
            if level.widths.is_empty() || level.group_size == 0 {
                return Err(Error::InvalidArchitecture(
                    "encoder level without layers or group",
                ));
            }
            if !(level.radius > 0.0) || !(level.sample_ratio > 0.0 && level.sample_ratio <= 1.0) {
                return Err(Error::InvalidArchitecture(
                    "encoder radius or sample ratio out of range",
                ));
            }
        }
        if self.decoder.iter().any(|d| d.is_empty()) {
            return Err(Error::InvalidArchitecture("decoder level without layers"));
        }
        let all_widths = self
            .encoder
            .iter()
            .flat_map(|l| l.widths.iter())
            .chain(self.decoder.iter().flatten())
            .chain(self.head.iter());
        if all_widths.into_iter().any(|&w| w == 0) {
            return Err(Error::InvalidArchitecture("zero-width layer"));
        }
        Ok(())
    }

    /// Every dense layer in parameter order: encoder levels, decoder levels, head.
    pub fn layers(&self) -> Result<Vec<LayerShape>> {
        self.validate()?;
        let mut layers = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, in_dim: usize, out_dim: usize, relu: bool| {
            layers.push(LayerShape {
                name,
                in_dim,
                out_dim,
                relu,
                offset,
            });
            offset += in_dim * out_dim + out_dim;
        };
        // Level dims: level 0 carries the raw coordinates.
        let mut level_dims = alloc::vec![3usize];
        for (l, level) in self.encoder.iter().enumerate() {
            let mut d = 3 + level_dims[l];
            for (i, &w) in level.widths.iter().enumerate() {
                push(format!("encoder{}.{}", l + 1, i), d, w, true);
                d = w;
            }
            level_dims.push(d);
        }
        let depth = self.encoder.len();
        let mut current = level_dims[depth];
        for (j, widths) in self.decoder.iter().enumerate() {
            let skip = level_dims[depth - 1 - j];
            let mut d = current + skip;
            for (i, &w) in widths.iter().enumerate() {
                push(format!("decoder{}.{}", j + 1, i), d, w, true);
                d = w;
            }
            current = d;
        }
        let last = self.head.len() - 1;
        for (i, &w) in self.head.iter().enumerate() {
            push(format!("head.{i}"), current, w, i != last);
            current = w;
        }
        Ok(layers)
    }

    pub fn num_params(&self) -> Result<usize> {
        Ok(self.layers()?.iter().map(LayerShape::param_count).sum())
    }

    /// Layers with an activation (everything except the final head layer).
    pub fn hidden_layer_count(&self) -> Result<usize> {
        Ok(self.layers()?.len() - 1)
    }

    /// Smallest subset the network accepts.
    pub fn min_points(&self) -> usize {
        self.encoder
            .iter()
            .map(|l| l.group_size)
            .min()
            .unwrap_or(1)
            .max(1)
    }

    /// Point count at every level for an input of `m` points.
    pub fn level_sizes(&self, m: usize) -> Vec<usize> {
        let mut sizes = alloc::vec![m];
        for level in &self.encoder {
            let prev = *sizes.last().unwrap_or(&m) as f64;
            sizes.push(((prev * level.sample_ratio).ceil() as usize).max(1));
        }
        sizes
    }
}

/// Exact parameter count of `arch`.
pub fn num_params(arch: &NetArchitecture) -> Result<usize> {
    arch.num_params()
}

/// Flat network parameters (weights input-major, then bias, per layer).
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T: Real> {
    layers: Vec<LayerShape>,
    values: Vec<T>,
}

impl<T: Real> NetParams<T> {
    pub fn zeros(arch: &NetArchitecture) -> Result<Self> {
        let layers = arch.layers()?;
        let total = layers.iter().map(LayerShape::param_count).sum();
        Ok(NetParams {
            layers,
            values: alloc::vec![T::zero(); total],
        })
    }

    /// Wraps a flat vector, checking its length against `arch`.
    pub fn from_values(arch: &NetArchitecture, values: Vec<T>) -> Result<Self> {
        let layers = arch.layers()?;
        let expected: usize = layers.iter().map(LayerShape::param_count).sum();
        if values.len() != expected {
            return Err(Error::ParamShape {
                expected,
                got: values.len(),
            });
        }
        Ok(NetParams { layers, values })
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn weights(&self, layer: usize) -> &[T] {
        let l = &self.layers[layer];
        &self.values[l.offset..l.offset + l.weight_count()]
    }

    pub fn bias(&self, layer: usize) -> &[T] {
        let l = &self.layers[layer];
        let start = l.offset + l.weight_count();
        &self.values[start..start + l.out_dim]
    }

    /// Same layout with every value converted to another precision.
    pub fn cast<U: Real>(&self) -> NetParams<U> {
        NetParams {
            layers: self.layers.clone(),
            values: self
                .values
                .iter()
                .map(|v| U::from_f64(v.as_f64()))
                .collect(),
        }
    }

    pub(crate) fn matches(&self, arch: &NetArchitecture) -> Result<()> {
        let layers = arch.layers()?;
        if layers != self.layers {
            let expected = layers.iter().map(LayerShape::param_count).sum();
            return Err(Error::ParamShape {
                expected,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Random init: hidden layers uniform in `+-1/sqrt(fan_in)` (weights and
/// biases); the final layer uniform in `+-FINAL_LAYER_INIT` with zero bias so
/// the initial offsets are close to zero.
pub fn init_params<T: Real>(arch: &NetArchitecture, seed: u64) -> Result<NetParams<T>> {
    let mut params = NetParams::<T>::zeros(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = params.layers.len() - 1;
    for (li, layer) in params.layers.clone().iter().enumerate() {
        let w_end = layer.offset + layer.weight_count();
        let b_end = w_end + layer.out_dim;
        if li == last {
            for v in &mut params.values[layer.offset..w_end] {
                *v = T::from_f64(rng.random_range(-FINAL_LAYER_INIT..FINAL_LAYER_INIT));
            }
        } else {
            let bound = 1.0 / (layer.in_dim as f64).sqrt();
            for v in &mut params.values[layer.offset..b_end] {
                *v = T::from_f64(rng.random_range(-bound..bound));
            }
        }
    }
    Ok(params)
}

/// Maps model coordinates to the canonical unit-sphere frame: `(p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizationTransform {
    pub center: Vec3,
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn for_cloud(cloud: &PointCloud) -> Result<Self> {
        let center = cloud.bbox().center();
        let radius = cloud
            .points()
            .iter()
            .map(|p| p.distance(center))
            .fold(0.0, f64::max);
        if !(radius > 0.0) {
            return Err(Error::CoincidentPoints);
        }
        Ok(NormalizationTransform {
            center,
            scale: 1.0 / radius,
        })
    }

    #[inline]
    pub fn apply(&self, p: Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    #[inline]
    pub fn invert(&self, p: Vec3) -> Vec3 {
        p / self.scale + self.center
    }

    /// Offsets only scale; no translation.
    #[inline]
    pub fn invert_offset(&self, d: Vec3) -> Vec3 {
        d / self.scale
    }
}

/// Centers the cloud on its bounding-box center and scales the farthest point to norm 1.
pub fn normalize(cloud: &PointCloud) -> Result<(PointCloud, NormalizationTransform)> {
    let t = NormalizationTransform::for_cloud(cloud)?;
    let points = cloud.points().iter().map(|p| t.apply(*p)).collect();
    let mut out = PointCloud::new(points)?;
    if let Some(n) = cloud.normals() {
        out = out.set_normals(n.to_vec())?;
    }
    Ok((out, t))
}

/// Converts model-frame points to network scalars.
pub fn to_network_points<T: Real>(points: &[Vec3]) -> Vec<[T; 3]> {
    points
        .iter()
        .map(|p| [T::from_f64(p.x), T::from_f64(p.y), T::from_f64(p.z)])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn default_architecture_shape() {
        let arch = NetArchitecture::default();
        assert_eq!(arch.hidden_layer_count().unwrap(), 6);
        let layers = arch.layers().unwrap();
        let dims: Vec<(usize, usize)> = layers.iter().map(|l| (l.in_dim, l.out_dim)).collect();
        assert_eq!(
            dims,
            vec![
                (6, 32),
                (32, 64),
                (67, 128),
                (192, 128),
                (131, 64),
                (64, 64),
                (64, 3)
            ]
        );
        // 224 + 2112 + 8704 + 24704 + 8448 + 4160 + 195
        assert_eq!(arch.num_params().unwrap(), 48_547);
        assert!(arch.num_params().unwrap() <= 200_000);
    }

    #[test]
    fn single_layer_count() {
        let arch = NetArchitecture {
            encoder: vec![],
            decoder: vec![],
            head: vec![3],
        };
        assert_eq!(num_params(&arch).unwrap(), 12);
    }

    #[test]
    fn empty_architecture_rejected() {
        let arch = NetArchitecture {
            encoder: vec![],
            decoder: vec![],
            head: vec![],
        };
        assert!(matches!(
            num_params(&arch),
            Err(Error::InvalidArchitecture(_))
        ));
    }

    #[test]
    fn init_is_seeded() {
        let arch = NetArchitecture::default();
        let a = init_params::<f32>(&arch, 1).unwrap();
        let b = init_params::<f32>(&arch, 1).unwrap();
        let c = init_params::<f32>(&arch, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let last = a.layers().len() - 1;
        assert!(a.weights(last).iter().all(|w| w.abs() <= 1e-4));
        assert!(a.bias(last).iter().all(|w| *w == 0.0));
    }

    #[test]
    fn normalize_offset_sphere() {
        let pts = vec![
            Vec3::new(3.0, 5.0, 5.0),
            Vec3::new(7.0, 5.0, 5.0),
            Vec3::new(5.0, 3.0, 5.0),
            Vec3::new(5.0, 7.0, 5.0),
            Vec3::new(5.0, 5.0, 3.0),
            Vec3::new(5.0, 5.0, 7.0),
        ];
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let (unit, t) = normalize(&cloud).unwrap();
        assert_eq!(t.center, Vec3::new(5.0, 5.0, 5.0));
        assert_eq!(t.scale, 0.5);
        for (p, q) in pts.iter().zip(unit.points()) {
            assert!((q.norm() - 1.0).abs() < 1e-12);
            assert!(t.invert(*q).distance(*p) < 1e-12);
        }
    }

    #[test]
    fn normalize_identity_for_unit_cloud() {
        let cloud = PointCloud::new(vec![Vec3::X, -Vec3::X, Vec3::Y * 0.5]).unwrap();
        let (_, t) = normalize(&cloud).unwrap();
        assert!(t.center.distance(Vec3::new(0.0, 0.25, 0.0)) < 1e-15);
        let cloud = PointCloud::new(vec![Vec3::X, -Vec3::X, Vec3::Y, -Vec3::Y]).unwrap();
        let (_, t) = normalize(&cloud).unwrap();
        assert_eq!(t.center, Vec3::ZERO);
        assert_eq!(t.scale, 1.0);
    }

    #[test]
    fn normalize_coincident_fails() {
        let cloud = PointCloud::new(vec![Vec3::X; 3]).unwrap();
        assert_eq!(normalize(&cloud).unwrap_err(), Error::CoincidentPoints);
    }
}
