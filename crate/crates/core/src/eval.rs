//! Ground-truth meshes and quality metrics: edge-aware sampling, F-score,
//! density spread, normal error near sharp edges and distance to surface.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::geometry::{
    closest_point_on_segment, closest_point_on_triangle, unoriented_angle, Aabb, Vec3,
};
use crate::knn::KnnIndex;
use crate::proxy::density_proxy;
use crate::{Error, Result};

/// Default dihedral threshold below which an edge is sharp.
pub const DEFAULT_DIHEDRAL_THRESHOLD_DEG: f64 = 120.0;
/// Fraction of edge samples placed exactly on the edge segment.
pub const ON_EDGE_FRACTION: f64 = 0.25;

/// An edge with its incident faces (one for boundary edges, two otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshEdge {
    pub a: usize,
    pub b: usize,
    pub faces: [usize; 2],
    pub face_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    edges: Vec<MeshEdge>,
}

impl TriangleMesh {
    /// Validates indices and builds edge adjacency. An edge shared by more
    /// than two faces is rejected.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMesh(format!("vertex {i} is not finite")));
        }
        let mut adjacency: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {v} but the mesh has {}",
                        vertices.len()
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
            for j in 0..3 {
                let (a, b) = (f[j], f[(j + 1) % 3]);
                adjacency.entry((a.min(b), a.max(b))).or_default().push(fi);
            }
        }
        let mut edges = Vec::with_capacity(adjacency.len());
        for ((a, b), fs) in adjacency {
            if fs.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) has {} incident faces",
                    fs.len()
                )));
            }
            edges.push(MeshEdge {
                a,
                b,
                faces: [fs[0], *fs.get(1).unwrap_or(&fs[0])],
                face_count: fs.len(),
            });
        }
        Ok(TriangleMesh {
            vertices,
            faces,
            edges,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.edges
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unit normal from the winding; `None` for zero-area faces.
    pub fn face_normal(&self, f: usize) -> Option<Vec3> {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(c - a).normalized()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn mean_edge_length(&self) -> f64 {
        let total: f64 = self
            .edges
            .iter()
            .map(|e| self.vertices[e.a].distance(self.vertices[e.b]))
            .sum();
        total / self.edges.len() as f64
    }

    /// Interior dihedral angle in degrees, or `None` for boundary edges.
    ///
    /// Assumes consistent winding: `180 - angle between face normals`, so a
    /// flat pair gives 180 and a cube edge 90.
    pub fn dihedral_deg(&self, edge: &MeshEdge) -> Option<f64> {
        if edge.face_count < 2 {
            return None;
        }
        let n0 = self.face_normal(edge.faces[0])?;
        let n1 = self.face_normal(edge.faces[1])?;
        let between = n0.dot(n1).clamp(-1.0, 1.0).acos();
        Some((PI - between).to_degrees())
    }

    /// Edges with a dihedral angle below `threshold_deg`.
    pub fn sharp_edges(&self, threshold_deg: f64) -> Vec<(MeshEdge, f64)> {
        self.edges
            .iter()
            .filter_map(|e| self.dihedral_deg(e).map(|d| (*e, d)))
            .filter(|(_, d)| *d < threshold_deg)
            .collect()
    }

    fn min_dihedral_deg(&self) -> f64 {
        self.edges
            .iter()
            .filter_map(|e| self.dihedral_deg(e))
            .fold(f64::INFINITY, f64::min)
    }

    /// Axis-aligned box `[min, max]` with outward winding, 12 triangles.
    pub fn cuboid(min: Vec3, max: Vec3) -> Result<Self> {
        TriangleMesh::cuboid_grid(min, max, 1)
    }

    /// Axis-aligned box whose faces are each split into a `segments x segments`
    /// grid of quads (two triangles each). Vertices along box edges are shared.
    pub fn cuboid_grid(min: Vec3, max: Vec3, segments: usize) -> Result<Self> {
        if segments == 0 || !(max.x > min.x && max.y > min.y && max.z > min.z) {
            return Err(Error::InvalidMesh(
                "cuboid needs min < max and segments >= 1".into(),
            ));
        }
        let s = segments;
        let mut ids: BTreeMap<[usize; 3], usize> = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut vertex = |g: [usize; 3], vertices: &mut Vec<Vec3>| {
            *ids.entry(g).or_insert_with(|| {
                let t = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / s as f64;
                vertices.push(Vec3::new(
                    t(g[0], min.x, max.x),
                    t(g[1], min.y, max.y),
                    t(g[2], min.z, max.z),
                ));
                vertices.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(12 * s * s);
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for side in [0, s] {
                for i in 0..s {
                    for j in 0..s {
                        let corner = |di: usize, dj: usize| {
                            let mut g = [0; 3];
                            g[axis] = side;
                            g[u] = i + di;
                            g[v] = j + dj;
                            g
                        };
                        let mut quad = [
                            vertex(corner(0, 0), &mut vertices),
                            vertex(corner(1, 0), &mut vertices),
                            vertex(corner(1, 1), &mut vertices),
                            vertex(corner(0, 1), &mut vertices),
                        ];
                        if side == 0 {
                            quad.reverse();
                        }
                        faces.push([quad[0], quad[1], quad[2]]);
                        faces.push([quad[0], quad[2], quad[3]]);
                    }
                }
            }
        }
        TriangleMesh::new(vertices, faces)
    }

    /// Unit cube `[0, 1]^3`.
    pub fn unit_cube() -> Self {
        TriangleMesh::cuboid(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0)).expect("valid cube")
    }

    /// Unit sphere from a subdivided icosahedron.
    pub fn icosphere(subdivisions: usize) -> Self {
        let t = (1.0 + 5.0f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ]
        .iter()
        .map(|a| Vec3::from_array(*a).normalized().expect("nonzero"))
        .collect();
        let mut faces: Vec<[usize; 3]> = alloc::vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let m = ((vertices[a] + vertices[b]) * 0.5)
                        .normalized()
                        .expect("nonzero");
                    vertices.push(m);
                    vertices.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = mid(a, b, &mut vertices);
                let bc = mid(b, c, &mut vertices);
                let ca = mid(c, a, &mut vertices);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        TriangleMesh::new(vertices, faces).expect("valid icosphere")
    }

    /// Two `length x width` rectangles meeting along the x axis at
    /// `dihedral_deg`, each split into `segments` quads along the edge.
    pub fn wedge(dihedral_deg: f64, length: f64, width: f64, segments: usize) -> Result<Self> {
        if !(dihedral_deg > 0.0 && dihedral_deg < 180.0) || !(length > 0.0) || !(width > 0.0) {
            return Err(Error::InvalidMesh(
                "wedge needs 0 < angle < 180 and positive size".into(),
            ));
        }
        let segments = segments.max(1);
        let half = (dihedral_deg.to_radians() / 2.0).min(PI / 2.0);
        // Both flaps point down from the ridge, symmetric about the -z axis.
        let d0 = Vec3::new(0.0, half.sin(), -half.cos()) * width;
        let d1 = Vec3::new(0.0, -half.sin(), -half.cos()) * width;
        let mut vertices = Vec::with_capacity(3 * (segments + 1));
        for i in 0..=segments {
            let ridge = Vec3::new(length * i as f64 / segments as f64, 0.0, 0.0);
            vertices.extend([ridge, ridge + d0, ridge + d1]);
        }
        let mut faces = Vec::with_capacity(4 * segments);
        for i in 0..segments {
            let (r0, a0, b0) = (3 * i, 3 * i + 1, 3 * i + 2);
            let (r1, a1, b1) = (r0 + 3, a0 + 3, b0 + 3);
            faces.extend([[r0, a0, a1], [r0, a1, r1], [r0, r1, b1], [r0, b1, b0]]);
        }
        TriangleMesh::new(vertices, faces)
    }

    /// Uniform random points on the surface (area weighted).
    pub fn sample_surface(&self, n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let areas: Vec<f64> = (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                (b - a).cross(c - a).norm() * 0.5
            })
            .collect();
        let cumulative = prefix_sums(&areas);
        (0..n)
            .map(|_| {
                let f = pick_weighted(&cumulative, &mut rng);
                let [a, b, c] = self.triangle(f);
                let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                a + (b - a) * u + (c - a) * v
            })
            .collect()
    }
}

fn prefix_sums(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn pick_weighted<R: Rng>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().unwrap_or(&0.0);
    let x = rng.random::<f64>() * total;
    cumulative
        .partition_point(|&c| c <= x)
        .min(cumulative.len() - 1)
}

/// Bounding-volume hierarchy over mesh triangles for closest-point queries.
#[derive(Debug, Clone)]
pub struct MeshDistance<'a> {
    mesh: &'a TriangleMesh,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

#[derive(Debug, Clone)]
struct BvhNode {
    bbox: Aabb,
    start: usize,
    end: usize,
    /// Children indices; `usize::MAX` for leaves.
    left: usize,
    right: usize,
}

const BVH_LEAF: usize = 4;

/// Closest surface point, its squared distance and the face it lies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Vec3,
    pub dist_sq: f64,
    pub face: usize,
}

impl<'a> MeshDistance<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        let boxes: Vec<Aabb> = (0..mesh.faces.len())
            .map(|f| Aabb::from_points(&mesh.triangle(f)))
            .collect();
        let mut order: Vec<usize> = (0..mesh.faces.len()).collect();
        let mut nodes = Vec::new();
        build_bvh(&boxes, &mut order, 0, mesh.faces.len(), &mut nodes);
        MeshDistance { mesh, order, nodes }
    }

    pub fn closest(&self, p: Vec3) -> SurfaceHit {
        let mut best = SurfaceHit {
            point: p,
            dist_sq: f64::INFINITY,
            face: usize::MAX,
        };
        let mut stack = alloc::vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bbox.distance_squared(p) > best.dist_sq {
                continue;
            }
            if node.left == usize::MAX {
                for &f in &self.order[node.start..node.end] {
                    consider(self.mesh, f, p, &mut best);
                }
            } else {
                let (l, r) = (&self.nodes[node.left], &self.nodes[node.right]);
                // Visit the nearer child first.
                if l.bbox.distance_squared(p) <= r.bbox.distance_squared(p) {
                    stack.extend([node.right, node.left]);
                } else {
                    stack.extend([node.left, node.right]);
                }
            }
        }
        best
    }

    pub fn distance(&self, p: Vec3) -> f64 {
        self.closest(p).dist_sq.sqrt()
    }
}

fn consider(mesh: &TriangleMesh, f: usize, p: Vec3, best: &mut SurfaceHit) {
    let [a, b, c] = mesh.triangle(f);
    let q = closest_point_on_triangle(p, a, b, c);
    let d = p.distance_squared(q);
    if d < best.dist_sq || (d == best.dist_sq && f < best.face) {
        *best = SurfaceHit {
            point: q,
            dist_sq: d,
            face: f,
        };
    }
}

fn build_bvh(
    boxes: &[Aabb],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let bbox = order[start..end]
        .iter()
        .fold(Aabb::EMPTY, |acc, &f| acc.union(boxes[f]));
    let idx = nodes.len();
    nodes.push(BvhNode {
        bbox,
        start,
        end,
        left: usize::MAX,
        right: usize::MAX,
    });
    if end - start <= BVH_LEAF {
        return idx;
    }
    let centers = Aabb::from_points(
        order[start..end]
            .iter()
            .map(|&f| boxes[f].center())
            .collect::<Vec<_>>()
            .iter(),
    );
    let axis = centers.longest_axis();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
        boxes[x].center()[axis]
            .total_cmp(&boxes[y].center()[axis])
            .then(x.cmp(&y))
    });
    let left = build_bvh(boxes, order, start, mid, nodes);
    let right = build_bvh(boxes, order, mid, end, nodes);
    nodes[idx].left = left;
    nodes[idx].right = right;
    idx
}

/// Exhaustive closest-point search over every face.
pub fn closest_point_brute_force(mesh: &TriangleMesh, p: Vec3) -> SurfaceHit {
    let mut best = SurfaceHit {
        point: p,
        dist_sq: f64::INFINITY,
        face: usize::MAX,
    };
    for f in 0..mesh.faces.len() {
        consider(mesh, f, p, &mut best);
    }
    best
}

/// Per-point distances to the mesh and their mean.
pub fn dist_to_surface(points: &[Vec3], mesh: &TriangleMesh) -> Result<(Vec<f64>, f64)> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let bvh = MeshDistance::new(mesh);
    let d: Vec<f64> = points.iter().map(|p| bvh.distance(*p)).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok((d, mean))
}

/// Edge-concentrated ground-truth samples.
///
/// Sharp edges are picked with weight `length * (180 - dihedral)`. A fixed
/// fraction of samples lands on the edge itself; the rest go onto one of the
/// two incident faces at a distance from the edge drawn from a linearly
/// decreasing density on `[0, falloff_width]`.
pub fn sample_edges(
    mesh: &TriangleMesh,
    n_samples: usize,
    dihedral_threshold_deg: f64,
    falloff_width: f64,
    seed: u64,
) -> Result<PointCloud> {
    if !(falloff_width >= 0.0) {
        return Err(Error::InvalidConfig("falloff width must be non-negative"));
    }
    if n_samples == 0 {
        return Err(Error::InvalidConfig("need at least one edge sample"));
    }
    let sharp = mesh.sharp_edges(dihedral_threshold_deg);
    if sharp.is_empty() {
        return Err(Error::NoSharpEdges {
            min_dihedral_deg: mesh.min_dihedral_deg(),
        });
    }
    let weights: Vec<f64> = sharp
        .iter()
        .map(|(e, d)| mesh.vertices[e.a].distance(mesh.vertices[e.b]) * (180.0 - d))
        .collect();
    let cumulative = prefix_sums(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_samples);
    while out.len() < n_samples {
        let (edge, _) = sharp[pick_weighted(&cumulative, &mut rng)];
        let a = mesh.vertices[edge.a];
        let b = mesh.vertices[edge.b];
        let t: f64 = rng.random();
        let on_edge = a + (b - a) * t;
        if rng.random_bool(ON_EDGE_FRACTION) || falloff_width == 0.0 {
            out.push(on_edge);
            continue;
        }
        let face = edge.faces[rng.random_range(0..2)];
        let fv = mesh.faces[face];
        let Some(&c_idx) = fv.iter().find(|&&v| v != edge.a && v != edge.b) else {
            continue;
        };
        let c = mesh.vertices[c_idx];
        let height = (c - closest_on_line(c, a, b)).norm();
        if !(height > 0.0) {
            continue;
        }
        let u: f64 = rng.random();
        let d = falloff_width * (1.0 - (1.0 - u).sqrt());
        if d > height {
            // Beyond the incident triangle; redraw.
            continue;
        }
        // Slice of the triangle at distance d from the edge.
        let s = d / height;
        let p0 = a + (c - a) * s;
        let p1 = b + (c - b) * s;
        out.push(p0 + (p1 - p0) * t);
    }
    PointCloud::new(out)
}

fn closest_on_line(p: Vec3, a: Vec3, b: Vec3) -> Vec3 {
    let ab = b - a;
    a + ab * ((p - a).dot(ab) / ab.norm_squared())
}

/// Distance from `p` to the nearest sharp edge segment.
pub fn distance_to_edges(p: Vec3, mesh: &TriangleMesh, edges: &[(MeshEdge, f64)]) -> f64 {
    edges
        .iter()
        .map(|(e, _)| {
            let (a, b) = (mesh.vertices[e.a], mesh.vertices[e.b]);
            p.distance_squared(closest_point_on_segment(p, a, b))
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Precision, recall and F in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

impl FScore {
    pub fn from_fractions(precision: f64, recall: f64) -> Self {
        let f = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        FScore {
            precision: precision * 100.0,
            recall: recall * 100.0,
            f: f * 100.0,
        }
    }
}

/// Number of `from` points within `tau` (inclusive) of some `to` point.
pub fn count_within(from: &[Vec3], to: &[Vec3], tau: f64) -> Result<usize> {
    let index = KnnIndex::from_points(to)?;
    let t2 = tau * tau;
    Ok(from
        .iter()
        .filter(|p| index.nearest(**p).dist_sq <= t2)
        .count())
}

pub fn f_score(predicted: &[Vec3], ground_truth: &[Vec3], tau: f64) -> Result<FScore> {
    if predicted.is_empty() || ground_truth.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig("tau must be positive"));
    }
    let p = count_within(predicted, ground_truth, tau)? as f64 / predicted.len() as f64;
    let r = count_within(ground_truth, predicted, tau)? as f64 / ground_truth.len() as f64;
    Ok(FScore::from_fractions(p, r))
}

/// Percentile with linear interpolation between order statistics; `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 75th minus 25th percentile of the values.
pub fn iqr(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile(&sorted, 0.75) - percentile(&sorted, 0.25))
}

/// Interquartile range of the density proxy.
pub fn density_iqr(cloud: &PointCloud, k: usize) -> Result<f64> {
    iqr(&density_proxy(cloud, k)?.values)
}

/// Median angle in degrees between estimated normals and the nearest face
/// normal, over points within `tau` of a sharp edge.
pub fn normal_error_sharp(
    points: &[Vec3],
    normals: &[Vec3],
    mesh: &TriangleMesh,
    tau: f64,
    dihedral_threshold_deg: f64,
) -> Result<f64> {
    if points.len() != normals.len() {
        return Err(Error::LengthMismatch {
            what: "normals",
            expected: points.len(),
            got: normals.len(),
        });
    }
    let sharp = mesh.sharp_edges(dihedral_threshold_deg);
    if sharp.is_empty() {
        return Err(Error::NoSharpEdges {
            min_dihedral_deg: mesh.min_dihedral_deg(),
        });
    }
    let bvh = MeshDistance::new(mesh);
    let mut errors: Vec<f64> = Vec::new();
    for (p, n) in points.iter().zip(normals) {
        if distance_to_edges(*p, mesh, &sharp) > tau {
            continue;
        }
        let hit = bvh.closest(*p);
        if let Some(face_n) = mesh.face_normal(hit.face) {
            errors.push(unoriented_angle(*n, face_n).to_degrees());
        }
    }
    if errors.is_empty() {
        return Err(Error::NoPointsInSharpRegion);
    }
    errors.sort_by(f64::total_cmp);
    Ok(percentile(&errors, 0.5))
}

/// Collected metric values; absent entries were not computed.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(default)
)]
pub struct EvalReport {
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub f_score: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub precision: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub recall: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub tau: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub density_iqr: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub density_k: Option<usize>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub normal_error_median_deg: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub dihedral_threshold_deg: Option<f64>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub mean_dist_to_surface: Option<f64>,
}

impl EvalReport {
    pub fn with_f_score(mut self, s: FScore, tau: f64) -> Self {
        self.f_score = Some(s.f);
        self.precision = Some(s.precision);
        self.recall = Some(s.recall);
        self.tau = Some(tau);
        self
    }
}
