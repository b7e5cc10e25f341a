//! Per-point geometric proxies: plane-fit normals, kNN curvature and kNN density.
//!
//! Proxy neighborhoods exclude the query point itself; the plane fit used for
//! normals includes it.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::cloud::PointCloud;
use crate::geometry::{unoriented_angle, Vec3};
use crate::knn::{KnnIndex, Neighbor};
use crate::linalg::symmetric_eigen3;
use crate::{Error, Result};

pub const DEFAULT_CURVATURE_K: usize = 16;
pub const DEFAULT_DENSITY_K: usize = 8;

/// Relative eigenvalue ratio under which a neighborhood counts as rank deficient.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProxyKind {
    Curvature,
    Density,
}

/// Non-negative scalar per point, with the indices of points that hit a degenerate rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyValues {
    pub kind: ProxyKind,
    pub values: Vec<f64>,
    /// Points whose value came from a fallback (duplicates for density).
    pub flagged: Vec<usize>,
}

impl ProxyValues {
    pub fn new(kind: ProxyKind, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig(
                "proxy values must be finite and non-negative",
            ));
        }
        Ok(ProxyValues {
            kind,
            values,
            flagged: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Estimated normals. Orientation carries no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub normals: Vec<Vec3>,
    /// Points whose neighborhood had covariance rank < 2; their normal is +z.
    pub degenerate: Vec<usize>,
}

fn require_points(cloud: &PointCloud, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::KOutOfRange { k, n: cloud.len() });
    }
    if cloud.len() < k + 1 {
        return Err(Error::InsufficientPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    Ok(())
}

/// Least-squares plane normal through each point's `k` nearest neighbors (self included).
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalField> {
    require_points(cloud, k)?;
    let index = KnnIndex::build(cloud);
    estimate_normals_with(&index, k)
}

pub fn estimate_normals_with(index: &KnnIndex, k: usize) -> Result<NormalField> {
    let points = index.points();
    let n = points.len();
    let reference = points.iter().fold(Vec3::ZERO, |a, p| a + *p) / n as f64;
    let mut normals = Vec::with_capacity(n);
    let mut degenerate = Vec::new();
    let mut nbrs: Vec<Neighbor> = Vec::with_capacity(k);
    for (i, &p) in points.iter().enumerate() {
        index.knn_into(p, k, &mut nbrs)?;
        match plane_normal(points, &nbrs, reference) {
            Some(normal) => normals.push(normal),
            None => {
                normals.push(Vec3::Z);
                degenerate.push(i);
            }
        }
    }
    Ok(NormalField {
        normals,
        degenerate,
    })
}

fn plane_normal(points: &[Vec3], nbrs: &[Neighbor], reference: Vec3) -> Option<Vec3> {
    let count = nbrs.len() as f64;
    let centroid = nbrs.iter().fold(Vec3::ZERO, |a, nb| a + points[nb.index]) / count;
    let mut cov = [[0.0f64; 3]; 3];
    for nb in nbrs {
        let d = points[nb.index] - centroid;
        let d = d.to_array();
        for r in 0..3 {
            for c in r..3 {
                cov[r][c] += d[r] * d[c];
            }
        }
    }
    cov[1][0] = cov[0][1];
    cov[2][0] = cov[0][2];
    cov[2][1] = cov[1][2];
    let (values, vectors) = symmetric_eigen3(cov);
    let largest = values[2];
    if !(largest > 0.0) || values[1] <= RANK_TOLERANCE * largest {
        return None;
    }
    let mut normal = vectors[0].normalized()?;
    if normal.dot(reference - centroid) < 0.0 {
        normal = -normal;
    }
    Some(normal)
}

/// Sum over the `k` nearest neighbors of the unoriented angle between normals, in radians.
pub fn curvature_proxy(cloud: &PointCloud, normals: &[Vec3], k: usize) -> Result<ProxyValues> {
    if normals.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            what: "normals",
            expected: cloud.len(),
            got: normals.len(),
        });
    }
    require_points(cloud, k)?;
    let index = KnnIndex::build(cloud);
    let mut nbrs = Vec::with_capacity(k + 1);
    let mut values = Vec::with_capacity(cloud.len());
    for (i, ni) in normals.iter().enumerate() {
        index.knn_excluding(i, k, &mut nbrs)?;
        let sum: f64 = nbrs
            .iter()
            .map(|nb| unoriented_angle(*ni, normals[nb.index]))
            .sum();
        values.push(sum);
    }
    Ok(ProxyValues {
        kind: ProxyKind::Curvature,
        values,
        flagged: Vec::new(),
    })
}

/// `k / r^3` with `r` the distance to the k-th nearest neighbor (self excluded).
///
/// Points with `r == 0` (duplicates) get `k / (1e-9 * bbox_diagonal)^3` and are flagged.
pub fn density_proxy(cloud: &PointCloud, k: usize) -> Result<ProxyValues> {
    require_points(cloud, k)?;
    let diag = cloud.bbox_diagonal();
    if !(diag > 0.0) {
        return Err(Error::CoincidentPoints);
    }
    let kf = k as f64;
    let cap = kf / (1e-9 * diag).powi(3);
    let index = KnnIndex::build(cloud);
    let mut nbrs = Vec::with_capacity(k + 1);
    let mut values = Vec::with_capacity(cloud.len());
    let mut flagged = Vec::new();
    for i in 0..cloud.len() {
        index.knn_excluding(i, k, &mut nbrs)?;
        let r = nbrs[k - 1].dist_sq.sqrt();
        if r > 0.0 {
            values.push((kf / (r * r * r)).min(cap));
        } else {
            values.push(cap);
            flagged.push(i);
        }
    }
    Ok(ProxyValues {
        kind: ProxyKind::Density,
        values,
        flagged,
    })
}
