//! Independent reference implementations and generators shared by the
//! integration tests and the acceptance runner.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use selfsample_core::net::{init_params, EncoderLevel};
use selfsample_core::train::loss_and_gradient;
use selfsample_core::{NetArchitecture, NetParams, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, half_extent: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-half_extent..half_extent),
                rng.random_range(-half_extent..half_extent),
                rng.random_range(-half_extent..half_extent),
            )
        })
        .collect()
}

/// Uniform on the unit sphere.
pub fn sphere_points<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| loop {
            let v = Vec3::new(
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
                StandardNormal.sample(rng),
            );
            if let Some(u) = v.normalized() {
                break u;
            }
        })
        .collect()
}

/// Uniform on the surface of `[0, 1]^3`.
pub fn cube_surface_points<R: Rng>(rng: &mut R, n: usize) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            let face = rng.random_range(0..6);
            let axis = face / 2;
            let mut p = [
                rng.random::<f64>(),
                rng.random::<f64>(),
                rng.random::<f64>(),
            ];
            p[axis] = (face % 2) as f64;
            Vec3::from_array(p)
        })
        .collect()
}

/// Sphere where the `z > 0` cap is `ratio` times denser than the rest.
/// Returns the points and a flag per point marking the sparse half.
pub fn two_density_sphere<R: Rng>(rng: &mut R, n: usize, ratio: f64) -> (Vec<Vec3>, Vec<bool>) {
    let dense = (n as f64 * ratio / (1.0 + ratio)).round() as usize;
    let mut points = Vec::with_capacity(n);
    let mut sparse = Vec::with_capacity(n);
    while points.len() < n {
        let p = sphere_points(rng, 1)[0];
        let want_dense = points.len() < dense;
        if (p.z > 0.0) == want_dense {
            points.push(p);
            sparse.push(!want_dense);
        }
    }
    (points, sparse)
}

/// Two-level network with a few hundred parameters.
pub fn tiny_arch() -> NetArchitecture {
    NetArchitecture {
        encoder: vec![
            EncoderLevel {
                sample_ratio: 0.5,
                radius: 0.5,
                group_size: 4,
                widths: vec![6],
            },
            EncoderLevel {
                sample_ratio: 0.5,
                radius: 1.0,
                group_size: 4,
                widths: vec![8],
            },
        ],
        decoder: vec![vec![8], vec![6]],
        head: vec![6, 3],
    }
}

/// Fan-in scaled random values everywhere, final layer included, so the
/// network output is far from the identity.
pub fn active_params(arch: &NetArchitecture, seed: u64) -> NetParams<f64> {
    let mut p = init_params::<f64>(arch, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    let layers = p.layers().to_vec();
    let values = p.values_mut();
    for l in &layers {
        let bound = 1.0 / (l.in_dim as f64).sqrt();
        for v in &mut values[l.offset..l.offset + l.param_count()] {
            *v = r.random_range(-bound..bound);
        }
    }
    p
}

pub fn ball_points<R: Rng>(r: &mut R, m: usize) -> Vec<[f64; 3]> {
    (0..m)
        .map(|_| loop {
            let p = [
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
            ];
            if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                break p;
            }
        })
        .collect()
}

pub struct FdReport {
    pub checked: usize,
    pub failures: usize,
    pub worst_rel: f64,
    /// Layers whose gradient is zero everywhere.
    pub silent_layers: Vec<usize>,
}

/// Central differences over every parameter, 64-bit, on a 16-point subset.
/// A parameter passes within 1e-8 absolute or 1e-3 relative.
pub fn finite_difference_sweep(arch: &NetArchitecture, seed: u64) -> FdReport {
    let mut params = active_params(arch, seed);
    let mut r = rng(seed);
    let subset = ball_points(&mut r, 16);
    let target = ball_points(&mut r, 16);
    let (_, grads) = loss_and_gradient(&params, arch, &subset, &target).unwrap();
    let silent_layers = params
        .layers()
        .iter()
        .enumerate()
        .filter(|(_, l)| {
            grads[l.offset..l.offset + l.param_count()]
                .iter()
                .all(|g| g.abs() <= 1e-6)
        })
        .map(|(i, _)| i)
        .collect();
    let mut failures = 0;
    let mut worst_rel = 0.0f64;
    for i in 0..params.len() {
        let orig = params.values()[i];
        let h = 1e-5 * orig.abs().max(1.0);
        params.values_mut()[i] = orig + h;
        let plus = loss_and_gradient(&params, arch, &subset, &target)
            .unwrap()
            .0;
        params.values_mut()[i] = orig - h;
        let minus = loss_and_gradient(&params, arch, &subset, &target)
            .unwrap()
            .0;
        params.values_mut()[i] = orig;
        let fd = (plus - minus) / (2.0 * h);
        let err = (fd - grads[i]).abs();
        let rel = err / fd.abs().max(grads[i].abs());
        if !(err <= 1e-8 || rel <= 1e-3) {
            failures += 1;
            worst_rel = worst_rel.max(rel);
        }
    }
    FdReport {
        checked: params.len(),
        failures,
        worst_rel,
        silent_layers,
    }
}

pub fn dist_sq(a: Vec3, b: Vec3) -> f64 {
    let (dx, dy, dz) = (a.x - b.x, a.y - b.y, a.z - b.z);
    dx * dx + dy * dy + dz * dz
}

/// `(index, squared distance)` of the `k` nearest points, ties by index.
pub fn knn_oracle(points: &[Vec3], q: Vec3, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, dist_sq(*p, q)))
        .collect();
    all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn nearest_sq(points: &[Vec3], q: Vec3) -> f64 {
    points
        .iter()
        .map(|p| dist_sq(*p, q))
        .fold(f64::INFINITY, f64::min)
}

/// Sum-form Chamfer distance by exhaustive search.
pub fn chamfer_oracle(p: &[Vec3], q: &[Vec3]) -> f64 {
    p.iter().map(|&a| nearest_sq(q, a)).sum::<f64>()
        + q.iter().map(|&b| nearest_sq(p, b)).sum::<f64>()
}

/// Number of `from` points with some `to` point within `tau`.
pub fn count_within_oracle(from: &[Vec3], to: &[Vec3], tau: f64) -> usize {
    from.iter()
        .filter(|&&a| to.iter().any(|&b| dist_sq(a, b) <= tau * tau))
        .count()
}

fn segment_dist_sq(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let ab = Vec3::new(b.x - a.x, b.y - a.y, b.z - a.z);
    let ap = Vec3::new(p.x - a.x, p.y - a.y, p.z - a.z);
    let len = ab.dot(ab);
    let t = if len > 0.0 {
        (ap.dot(ab) / len).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist_sq(p, Vec3::new(a.x + t * ab.x, a.y + t * ab.y, a.z + t * ab.z))
}

/// Point-to-triangle squared distance: plane projection when it lands inside
/// the triangle, otherwise the closest of the three edges.
pub fn triangle_dist_sq_oracle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let ab = Vec3::new(b.x - a.x, b.y - a.y, b.z - a.z);
    let ac = Vec3::new(c.x - a.x, c.y - a.y, c.z - a.z);
    let n = ab.cross(ac);
    let nn = n.dot(n);
    if nn > 0.0 {
        let ap = Vec3::new(p.x - a.x, p.y - a.y, p.z - a.z);
        let h = ap.dot(n) / nn;
        let proj = Vec3::new(p.x - h * n.x, p.y - h * n.y, p.z - h * n.z);
        // Barycentric signs via sub-triangle orientation.
        let inside = [(a, b), (b, c), (c, a)].iter().all(|&(u, v)| {
            let e = Vec3::new(v.x - u.x, v.y - u.y, v.z - u.z);
            let w = Vec3::new(proj.x - u.x, proj.y - u.y, proj.z - u.z);
            e.cross(w).dot(n) >= 0.0
        });
        if inside {
            return h * h * nn;
        }
    }
    segment_dist_sq(p, a, b)
        .min(segment_dist_sq(p, b, c))
        .min(segment_dist_sq(p, c, a))
}

pub fn mesh_dist_oracle(vertices: &[Vec3], faces: &[[usize; 3]], p: Vec3) -> f64 {
    faces
        .iter()
        .map(|f| triangle_dist_sq_oracle(p, vertices[f[0]], vertices[f[1]], vertices[f[2]]))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Optimal 1-D k-means by dynamic programming over sorted values.
/// Returns ascending centers.
pub fn kmeans_dp_oracle(values: &[f64], k: usize) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for i in 0..n {
        s1[i + 1] = s1[i] + v[i];
        s2[i + 1] = s2[i] + v[i] * v[i];
    }
    // Within-cluster sum of squares of v[i..j].
    let cost = |i: usize, j: usize| {
        let c = (j - i) as f64;
        let s = s1[j] - s1[i];
        s2[j] - s2[i] - s * s / c
    };
    let inf = f64::INFINITY;
    let mut dp = vec![vec![inf; n + 1]; k + 1];
    let mut cut = vec![vec![0usize; n + 1]; k + 1];
    dp[0][0] = 0.0;
    for c in 1..=k {
        for j in c..=n {
            for i in (c - 1)..j {
                let val = dp[c - 1][i] + cost(i, j);
                if val < dp[c][j] {
                    dp[c][j] = val;
                    cut[c][j] = i;
                }
            }
        }
    }
    let mut centers = Vec::with_capacity(k);
    let mut j = n;
    for c in (1..=k).rev() {
        let i = cut[c][j];
        centers.push((s1[j] - s1[i]) / (j - i) as f64);
        j = i;
    }
    centers.reverse();
    centers
}

/// `|a - b| <= tol * max(|a|, |b|)`, with exact equality accepted.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
