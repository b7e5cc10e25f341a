//! Synthetic inputs with known ground truth.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use selfsample_core::eval::TriangleMesh;
use selfsample_core::geometry::{closest_point_on_segment, Vec3};
use selfsample_core::PointCloud;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    CubeMissingEdges,
    TwoDensitySphere,
    NoisyCube,
    DihedralWedge,
    Grid,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 5] = [
        FixtureKind::CubeMissingEdges,
        FixtureKind::TwoDensitySphere,
        FixtureKind::NoisyCube,
        FixtureKind::DihedralWedge,
        FixtureKind::Grid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::CubeMissingEdges => "cube_missing_edges",
            FixtureKind::TwoDensitySphere => "two_density_sphere",
            FixtureKind::NoisyCube => "noisy_cube",
            FixtureKind::DihedralWedge => "dihedral_wedge",
            FixtureKind::Grid => "grid",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        FixtureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown fixture kind `{s}`")))
    }
}

/// Generator knobs. Fields a fixture does not use are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureParams {
    pub points: usize,
    pub seed: u64,
    /// Width of the removed band around masked cube edges.
    pub band: f64,
    /// Noise standard deviation as a fraction of the bounding-box diagonal.
    pub noise: f64,
    /// Density ratio between the dense cap and the rest of the sphere.
    pub density_ratio: f64,
    pub dihedral_deg: f64,
    /// Grid spacing and points per axis.
    pub spacing: f64,
    pub grid_size: usize,
    /// Quads per cube side in the ground-truth mesh.
    pub mesh_segments: usize,
}

impl Default for FixtureParams {
    fn default() -> Self {
        FixtureParams {
            points: 30_000,
            seed: 0,
            band: 0.05,
            noise: 0.01,
            density_ratio: 10.0,
            dihedral_deg: 90.0,
            spacing: 0.1,
            grid_size: 10,
            mesh_segments: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub kind: FixtureKind,
    pub params: FixtureParams,
    pub cloud: PointCloud,
    /// Ground-truth surface, where one exists.
    pub mesh: Option<TriangleMesh>,
    /// Noise-free positions (noisy fixtures only).
    pub clean: Option<Vec<Vec3>>,
    /// Per-point annotation: near a cube edge, inside the dense cap, or near
    /// the wedge ridge, depending on the fixture.
    pub flags: Vec<bool>,
}

/// The three cube edges meeting at the corner `(1, 1, 1)` are masked.
pub const MASKED_CORNER: Vec3 = Vec3::new(1.0, 1.0, 1.0);

pub fn cube_edges() -> Vec<(Vec3, Vec3)> {
    let mut edges = Vec::with_capacity(12);
    for axis in 0..3 {
        for a in [0.0, 1.0] {
            for b in [0.0, 1.0] {
                let mut p = [0.0; 3];
                let mut q = [1.0; 3];
                p[(axis + 1) % 3] = a;
                p[(axis + 2) % 3] = b;
                q[(axis + 1) % 3] = a;
                q[(axis + 2) % 3] = b;
                edges.push((Vec3::from_array(p), Vec3::from_array(q)));
            }
        }
    }
    edges
}

pub fn masked_cube_edges() -> Vec<(Vec3, Vec3)> {
    cube_edges()
        .into_iter()
        .filter(|(a, b)| *a == MASKED_CORNER || *b == MASKED_CORNER)
        .collect()
}

pub fn distance_to_segments(p: Vec3, segments: &[(Vec3, Vec3)]) -> f64 {
    segments
        .iter()
        .map(|(a, b)| p.distance(closest_point_on_segment(p, *a, *b)))
        .fold(f64::INFINITY, f64::min)
}

pub fn make_fixture(kind: FixtureKind, params: &FixtureParams) -> CliResult<Fixture> {
    if params.points == 0 && kind != FixtureKind::Grid {
        return Err(CliError::Usage("fixture needs at least one point".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fixture = match kind {
        FixtureKind::CubeMissingEdges => cube_missing_edges(params, &mut rng)?,
        FixtureKind::TwoDensitySphere => two_density_sphere(params, &mut rng)?,
        FixtureKind::NoisyCube => noisy_cube(params, &mut rng)?,
        FixtureKind::DihedralWedge => dihedral_wedge(params, &mut rng)?,
        FixtureKind::Grid => grid(params)?,
    };
    Ok(fixture)
}

fn unit_cube_mesh(params: &FixtureParams) -> CliResult<TriangleMesh> {
    Ok(TriangleMesh::cuboid_grid(
        Vec3::ZERO,
        Vec3::new(1.0, 1.0, 1.0),
        params.mesh_segments.max(1),
    )?)
}

fn cube_surface_point<R: Rng>(rng: &mut R) -> Vec3 {
    let face = rng.random_range(0..6usize);
    let (u, v): (f64, f64) = (rng.random(), rng.random());
    let side = (face % 2) as f64;
    match face / 2 {
        0 => Vec3::new(side, u, v),
        1 => Vec3::new(u, side, v),
        _ => Vec3::new(u, v, side),
    }
}

fn cube_missing_edges(params: &FixtureParams, rng: &mut ChaCha8Rng) -> CliResult<Fixture> {
    let masked = masked_cube_edges();
    let all = cube_edges();
    let mut points = Vec::with_capacity(params.points);
    while points.len() < params.points {
        let p = cube_surface_point(rng);
        if distance_to_segments(p, &masked) > params.band {
            points.push(p);
        }
    }
    let flags = points
        .iter()
        .map(|p| distance_to_segments(*p, &all) <= params.band)
        .collect();
    Ok(Fixture {
        kind: FixtureKind::CubeMissingEdges,
        params: *params,
        cloud: PointCloud::new(points)?,
        mesh: Some(unit_cube_mesh(params)?),
        clean: None,
        flags,
    })
}

fn noisy_cube(params: &FixtureParams, rng: &mut ChaCha8Rng) -> CliResult<Fixture> {
    let sigma = params.noise * 3f64.sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| CliError::Usage(format!("noise: {e}")))?;
    let clean: Vec<Vec3> = (0..params.points)
        .map(|_| cube_surface_point(rng))
        .collect();
    let noisy: Vec<Vec3> = clean
        .iter()
        .map(|p| *p + Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng)))
        .collect();
    Ok(Fixture {
        kind: FixtureKind::NoisyCube,
        params: *params,
        cloud: PointCloud::new(noisy)?,
        mesh: Some(TriangleMesh::unit_cube()),
        clean: Some(clean),
        flags: vec![false; params.points],
    })
}

/// Uniform direction on the sphere with `z` restricted to `[z_lo, z_hi]`.
fn sphere_band_point<R: Rng>(rng: &mut R, z_lo: f64, z_hi: f64) -> Vec3 {
    let z = rng.random_range(z_lo..=z_hi);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// The dense cap covers `1 / (1 + ratio)` of the sphere's area, so for a
/// 10:1 ratio it holds half the points and both density modes straddle the
/// quartiles.
fn two_density_sphere(params: &FixtureParams, rng: &mut ChaCha8Rng) -> CliResult<Fixture> {
    let ratio = params.density_ratio;
    if !(ratio >= 1.0) {
        return Err(CliError::Usage("density ratio must be at least 1".into()));
    }
    let cap_area = 1.0 / (1.0 + ratio);
    // Area fraction of a cap {z >= h} is (1 - h) / 2.
    let h = 1.0 - 2.0 * cap_area;
    let dense_share = ratio * cap_area / (ratio * cap_area + (1.0 - cap_area));
    let n_dense = (params.points as f64 * dense_share).round() as usize;
    let mut points = Vec::with_capacity(params.points);
    let mut flags = Vec::with_capacity(params.points);
    for i in 0..params.points {
        let dense = i < n_dense;
        points.push(if dense {
            sphere_band_point(rng, h, 1.0)
        } else {
            sphere_band_point(rng, -1.0, h)
        });
        flags.push(dense);
    }
    Ok(Fixture {
        kind: FixtureKind::TwoDensitySphere,
        params: *params,
        cloud: PointCloud::new(points)?,
        mesh: Some(TriangleMesh::icosphere(4)),
        clean: None,
        flags,
    })
}

/// Two flaps of `1 x 0.5` meeting along the x axis.
fn dihedral_wedge(params: &FixtureParams, rng: &mut ChaCha8Rng) -> CliResult<Fixture> {
    let mesh = TriangleMesh::wedge(params.dihedral_deg, 1.0, 0.5, params.mesh_segments.max(1))?;
    let half = params.dihedral_deg.to_radians() / 2.0;
    let dirs = [
        Vec3::new(0.0, half.sin(), -half.cos()),
        Vec3::new(0.0, -half.sin(), -half.cos()),
    ];
    let mut points = Vec::with_capacity(params.points);
    while points.len() < params.points {
        let x: f64 = rng.random();
        let w: f64 = rng.random::<f64>() * 0.5;
        if w <= params.band {
            continue;
        }
        let flap = dirs[rng.random_range(0..2usize)];
        points.push(Vec3::new(x, 0.0, 0.0) + flap * w);
    }
    let flags = points
        .iter()
        .map(|p| (p.y * p.y + p.z * p.z).sqrt() <= params.band.max(0.05))
        .collect();
    Ok(Fixture {
        kind: FixtureKind::DihedralWedge,
        params: *params,
        cloud: PointCloud::new(points)?,
        mesh: Some(mesh),
        clean: None,
        flags,
    })
}

fn grid(params: &FixtureParams) -> CliResult<Fixture> {
    let c = params.grid_size;
    if c < 2 || !(params.spacing > 0.0) {
        return Err(CliError::Usage(
            "grid needs at least 2 points per axis and positive spacing".into(),
        ));
    }
    let mut points = Vec::with_capacity(c * c * c);
    let mut flags = Vec::with_capacity(c * c * c);
    for i in 0..c {
        for j in 0..c {
            for k in 0..c {
                points.push(Vec3::new(i as f64, j as f64, k as f64) * params.spacing);
                let interior = [i, j, k].iter().all(|&t| t > 0 && t + 1 < c);
                flags.push(interior);
            }
        }
    }
    Ok(Fixture {
        kind: FixtureKind::Grid,
        params: *params,
        cloud: PointCloud::new(points)?,
        mesh: None,
        clean: None,
        flags,
    })
}
