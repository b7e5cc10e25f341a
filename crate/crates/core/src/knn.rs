//! Exact k-nearest-neighbor search over a frozen point set.
//!
//! Results are ordered by `(squared distance, point index)`, so ties are
//! broken by ascending index and every query returns exactly what a linear
//! scan sorted the same way would return.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::cloud::PointCloud;
use crate::geometry::{Aabb, Vec3};
use crate::{Error, Result};

const LEAF_SIZE: usize = 8;

/// One query result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Neighbor {
    #[inline]
    fn cmp_key(&self, other: &Neighbor) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Immutable kd-tree over a snapshot of points.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KnnIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        // A PointCloud is never empty.
        Self::from_points(cloud.points()).expect("point cloud is non-empty")
    }

    pub fn from_points(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut index = KnnIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::with_capacity(2 * points.len() / LEAF_SIZE + 1),
        };
        index.build_node(0, points.len());
        Ok(index)
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let bbox = Aabb::from_points(self.order[start..end].iter().map(|&i| &self.points[i]));
        let axis = bbox.longest_axis();
        if bbox.extent()[axis] <= 0.0 {
            // All points coincide; nothing to split on.
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[start + mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, start + mid);
        let right = self.build_node(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    #[inline]
    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// The `k` nearest points to `query`, ascending by distance then index.
    pub fn knn(&self, query: Vec3, k: usize) -> Result<Vec<Neighbor>> {
        let mut out = Vec::with_capacity(k);
        self.knn_into(query, k, &mut out)?;
        Ok(out)
    }

    /// Like [`knn`](Self::knn) but reuses the caller's buffer.
    pub fn knn_into(&self, query: Vec3, k: usize, out: &mut Vec<Neighbor>) -> Result<()> {
        if k == 0 || k > self.points.len() {
            return Err(Error::KOutOfRange {
                k,
                n: self.points.len(),
            });
        }
        out.clear();
        self.search(0, query, k, out);
        Ok(())
    }

    /// The `k` nearest neighbors of indexed point `i`, excluding `i` itself.
    pub fn knn_excluding(&self, i: usize, k: usize, out: &mut Vec<Neighbor>) -> Result<()> {
        if k == 0 || k >= self.points.len() {
            return Err(Error::KOutOfRange {
                k,
                n: self.points.len(),
            });
        }
        self.knn_into(self.points[i], k + 1, out)?;
        match out.iter().position(|nb| nb.index == i) {
            Some(pos) => {
                out.remove(pos);
            }
            None => {
                out.pop();
            }
        }
        Ok(())
    }

    /// Single nearest neighbor (lowest index among equidistant points).
    pub fn nearest(&self, query: Vec3) -> Neighbor {
        let mut best = Neighbor {
            index: usize::MAX,
            dist_sq: f64::INFINITY,
        };
        self.search_nearest(0, query, &mut best);
        best
    }

    fn search_nearest(&self, node: usize, q: Vec3, best: &mut Neighbor) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist_sq: self.points[i].distance_squared(q),
                    };
                    if cand.cmp_key(best) == Ordering::Less {
                        *best = cand;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search_nearest(near, q, best);
                if diff * diff <= best.dist_sq {
                    self.search_nearest(far, q, best);
                }
            }
        }
    }

    fn search(&self, node: usize, q: Vec3, k: usize, out: &mut Vec<Neighbor>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Neighbor {
                        index: i,
                        dist_sq: self.points[i].distance_squared(q),
                    };
                    insert_bounded(out, k, cand);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, k, out);
                let visit_far = out.len() < k || diff * diff <= out[out.len() - 1].dist_sq;
                if visit_far {
                    self.search(far, q, k, out);
                }
            }
        }
    }
}

/// Keeps `out` sorted and at most `k` long.
#[inline]
fn insert_bounded(out: &mut Vec<Neighbor>, k: usize, cand: Neighbor) {
    if out.len() == k {
        if cand.cmp_key(&out[k - 1]) != Ordering::Less {
            return;
        }
        out.pop();
    }
    let pos = out.partition_point(|nb| nb.cmp_key(&cand) == Ordering::Less);
    out.insert(pos, cand);
}

/// Reference linear scan with the same ordering contract as [`KnnIndex`].
pub fn brute_force_knn(points: &[Vec3], query: Vec3, k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .map(|(index, p)| Neighbor {
            index,
            dist_sq: p.distance_squared(query),
        })
        .collect();
    all.sort_by(|a, b| a.cmp_key(b));
    all.truncate(k);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn grid(n: usize, h: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    pts.push(Vec3::new(i as f64 * h, j as f64 * h, l as f64 * h));
                }
            }
        }
        pts
    }

    #[test]
    fn single_point_index() {
        let idx = KnnIndex::from_points(&[Vec3::X]).unwrap();
        assert_eq!(idx.point_count(), 1);
        assert_eq!(idx.knn(Vec3::ZERO, 1).unwrap()[0].index, 0);
    }

    #[test]
    fn empty_and_out_of_range() {
        assert_eq!(KnnIndex::from_points(&[]).unwrap_err(), Error::EmptyCloud);
        let idx = KnnIndex::from_points(&[Vec3::X, Vec3::Y]).unwrap();
        assert!(matches!(
            idx.knn(Vec3::ZERO, 3),
            Err(Error::KOutOfRange { k: 3, n: 2 })
        ));
        assert!(matches!(
            idx.knn(Vec3::ZERO, 0),
            Err(Error::KOutOfRange { .. })
        ));
    }

    #[test]
    fn grid_interior_nearest_is_spacing() {
        let h = 0.25;
        let pts = grid(5, h);
        let idx = KnnIndex::from_points(&pts).unwrap();
        let centre = 2 * 25 + 2 * 5 + 2;
        let mut out = Vec::new();
        idx.knn_excluding(centre, 1, &mut out).unwrap();
        assert_eq!(out[0].dist_sq, h * h);
    }

    #[test]
    fn self_match_and_index_ties() {
        let pts = vec![
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::ZERO,
        ];
        let idx = KnnIndex::from_points(&pts).unwrap();
        let hit = idx.knn(Vec3::new(2.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(
            hit[0],
            Neighbor {
                index: 0,
                dist_sq: 0.0
            }
        );
        let tie = idx.knn(Vec3::ZERO, 3).unwrap();
        let order: Vec<usize> = tie.iter().map(|n| n.index).collect();
        assert_eq!(order, vec![3, 1, 2]);
        assert_eq!(idx.nearest(Vec3::new(0.5, 0.0, 0.0)).index, 2);
    }

    #[test]
    fn k_equal_n_returns_all_once() {
        let pts = grid(4, 1.0);
        let idx = KnnIndex::from_points(&pts).unwrap();
        let all = idx.knn(Vec3::new(0.3, 1.7, 2.2), pts.len()).unwrap();
        let mut seen: Vec<usize> = all.iter().map(|n| n.index).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..pts.len()).collect::<Vec<_>>());
    }

    #[test]
    fn duplicates_do_not_break_tree() {
        let pts = vec![Vec3::new(1.0, 1.0, 1.0); 40];
        let idx = KnnIndex::from_points(&pts).unwrap();
        let res = idx.knn(Vec3::ZERO, 5).unwrap();
        assert_eq!(
            res.iter().map(|n| n.index).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
        let mut out = Vec::new();
        idx.knn_excluding(0, 3, &mut out).unwrap();
        assert_eq!(
            out.iter().map(|n| n.index).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }
}
