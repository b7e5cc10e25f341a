use alloc::vec::Vec;

use crate::geometry::{Aabb, Vec3};
use crate::{Error, Result};

/// Tolerance on the norm of stored normals.
pub const UNIT_NORMAL_TOLERANCE: f64 = 1e-6;

/// A non-empty set of finite 3D points with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    bbox: Aabb,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinitePoint { index });
        }
        let bbox = Aabb::from_points(&points);
        Ok(PointCloud {
            points,
            normals: None,
            bbox,
        })
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        PointCloud::new(points)?.set_normals(normals)
    }

    /// Attaches normals, replacing any existing ones.
    pub fn set_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                what: "normals",
                expected: self.points.len(),
                got: normals.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let norm = n.norm();
            if !((norm - 1.0).abs() <= UNIT_NORMAL_TOLERANCE) {
                return Err(Error::NonUnitNormal { index, norm });
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn without_normals(mut self) -> Self {
        self.normals = None;
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; kept for API symmetry with collections.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    #[inline]
    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn bbox(&self) -> Aabb {
        self.bbox
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox.diagonal()
    }

    pub fn centroid(&self) -> Vec3 {
        let sum = self.points.iter().fold(Vec3::ZERO, |acc, p| acc + *p);
        sum / self.points.len() as f64
    }

    /// New cloud made of the points at `indices` (normals carried over).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let mut out = PointCloud::new(points)?;
        if let Some(normals) = &self.normals {
            out.normals = Some(indices.iter().map(|&i| normals[i]).collect());
        }
        Ok(out)
    }

    /// Concatenates two clouds; normals are kept only if both have them.
    pub fn concat(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        let normals = match (&self.normals, &other.normals) {
            (Some(a), Some(b)) => {
                let mut n = a.clone();
                n.extend_from_slice(b);
                Some(n)
            }
            _ => None,
        };
        PointCloud {
            points,
            normals,
            bbox: self.bbox.union(other.bbox),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(PointCloud::new(vec![]), Err(Error::EmptyCloud));
        let err = PointCloud::new(vec![Vec3::ZERO, Vec3::new(f64::NAN, 0.0, 0.0)]);
        assert_eq!(err, Err(Error::NonFinitePoint { index: 1 }));
    }

    #[test]
    fn normals_must_be_unit() {
        let pts = vec![Vec3::ZERO, Vec3::X];
        assert!(PointCloud::with_normals(pts.clone(), vec![Vec3::Z, Vec3::Z]).is_ok());
        assert!(matches!(
            PointCloud::with_normals(pts.clone(), vec![Vec3::Z, Vec3::Z * 2.0]),
            Err(Error::NonUnitNormal { index: 1, .. })
        ));
        assert!(matches!(
            PointCloud::with_normals(pts, vec![Vec3::Z]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn bbox_diagonal_zero_only_for_coincident_points() {
        let single = PointCloud::new(vec![Vec3::X, Vec3::X]).unwrap();
        assert_eq!(single.bbox_diagonal(), 0.0);
        let two = PointCloud::new(vec![Vec3::ZERO, Vec3::new(3.0, 4.0, 0.0)]).unwrap();
        assert_eq!(two.bbox_diagonal(), 5.0);
    }
}
