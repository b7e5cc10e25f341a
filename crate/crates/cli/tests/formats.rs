use std::fs;
use std::path::Path;

use proptest::prelude::*;
use selfsample::config::RunConfig;
use selfsample::fixtures::{cube_edges, make_fixture, FixtureKind, FixtureParams};
use selfsample::formats::*;
use selfsample::pipeline::{compute_labels, label_colors};
use selfsample_core::eval::TriangleMesh;
use selfsample_core::{Criterion, PointCloud, Vec3};

fn finite_point() -> impl Strategy<Value = Vec3> {
    let c = prop_oneof![
        -1e6..1e6f64,
        -1.0..1.0f64,
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
        Just(1e-300),
    ];
    (c.clone(), c.clone(), c).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binary_ply_round_trip_is_bitwise(points in prop::collection::vec(finite_point(), 1..200)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        let cloud = PointCloud::new(points.clone()).unwrap();
        write_point_cloud(&cloud, &path, PointFormat::PlyBinary, None).unwrap();
        let back = read_point_cloud(&path).unwrap();
        prop_assert_eq!(back.len(), points.len());
        for (a, b) in back.points().iter().zip(&points) {
            prop_assert_eq!(a.x.to_bits(), b.x.to_bits());
            prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
            prop_assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
    }

    #[test]
    fn ascii_and_binary_agree(points in prop::collection::vec(finite_point(), 1..200)) {
        let dir = tempfile::tempdir().unwrap();
        let cloud = PointCloud::new(points).unwrap();
        let a = dir.path().join("a.ply");
        let b = dir.path().join("b.ply");
        let x = dir.path().join("c.xyz");
        write_point_cloud(&cloud, &a, PointFormat::PlyAscii, None).unwrap();
        write_point_cloud(&cloud, &b, PointFormat::PlyBinary, None).unwrap();
        write_point_cloud(&cloud, &x, PointFormat::Xyz, None).unwrap();
        let pa = read_point_cloud(&a).unwrap();
        let pb = read_point_cloud(&b).unwrap();
        let px = read_point_cloud(&x).unwrap();
        for ((p, q), r) in pa.points().iter().zip(pb.points()).zip(px.points()) {
            prop_assert!(p.distance(*q) <= 1e-6 * (1.0 + q.norm()));
            prop_assert!(r.distance(*q) <= 1e-6 * (1.0 + q.norm()));
        }
    }
}

#[test]
fn normals_and_colors_survive() {
    let dir = tempfile::tempdir().unwrap();
    let points = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 2.0, 3.0)];
    let normals = vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)];
    let colors = [POSITIVE_COLOR, NEGATIVE_COLOR];
    for format in [PointFormat::PlyAscii, PointFormat::PlyBinary] {
        let path = dir.path().join("n.ply");
        write_points(&points, Some(&normals), &path, format, Some(&colors)).unwrap();
        let data = read_point_data(&path).unwrap();
        assert_eq!(data.points, points);
        assert_eq!(data.normals.as_deref(), Some(&normals[..]));
        assert_eq!(data.colors.as_deref(), Some(&colors[..]));
        let cloud = data.into_cloud().unwrap();
        assert!(cloud.normals().is_some());
    }
}

#[test]
fn empty_colors_write_plain_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ply");
    let cloud = PointCloud::new(vec![Vec3::new(1.0, 1.0, 1.0)]).unwrap();
    write_point_cloud(&cloud, &path, PointFormat::PlyAscii, Some(&[])).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(!text.contains("red"));
    assert_eq!(read_point_data(&path).unwrap().colors, None);
}

#[test]
fn xyz_two_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.xyz");
    fs::write(&path, "0 0 0\n1 0 0").unwrap();
    let cloud = read_point_cloud(&path).unwrap();
    assert_eq!(
        cloud.points(),
        &[Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]
    );
}

#[test]
fn truncated_binary_ply_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ply");
    let points: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
    write_points(&points, None, &path, PointFormat::PlyBinary, None).unwrap();
    let bytes = fs::read(&path).unwrap();
    fs::write(&path, &bytes[..bytes.len() - 24]).unwrap();
    let err = read_point_cloud(&path).unwrap_err().to_string();
    assert!(err.contains("t.ply"), "{err}");
    assert!(err.contains("byte"), "{err}");
}

#[test]
fn ascii_ply_count_mismatch_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ply");
    let mut text = String::from("ply\nformat ascii 1.0\nelement vertex 10\nproperty float x\nproperty float y\nproperty float z\nend_header\n");
    for i in 0..9 {
        text.push_str(&format!("{i} 0 0\n"));
    }
    fs::write(&path, text).unwrap();
    let err = read_point_cloud(&path).unwrap_err().to_string();
    assert!(err.contains("line"), "{err}");
}

fn write_text(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

#[test]
fn obj_cube_and_quads() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = read_mesh(&write_text(dir.path(), "c.obj", CUBE_OBJ)).unwrap();
    assert_eq!(mesh.vertices().len(), 8);
    assert_eq!(mesh.faces().len(), 12);

    let quads = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
                 f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
    let mesh = read_mesh(&write_text(dir.path(), "q.obj", quads)).unwrap();
    assert_eq!(mesh.faces().len(), 12);
}

#[test]
fn obj_dangling_index_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_text(dir.path(), "d.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n");
    assert!(read_mesh(&path).is_err());
}

#[test]
fn mesh_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = TriangleMesh::icosphere(2);
    let obj = dir.path().join("s.obj");
    write_obj(&mesh, &obj).unwrap();
    let back = read_mesh(&obj).unwrap();
    assert_eq!(back.faces(), mesh.faces());
    for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
        assert!(a.distance(*b) < 1e-12);
    }

    let ply = "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\n\
               element face 2\nproperty list uchar int vertex_indices\nend_header\n\
               0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n";
    let mesh = read_mesh(&write_text(dir.path(), "sq.ply", ply)).unwrap();
    assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn label_export_colors_follow_cube_edges() {
    let fixture = make_fixture(
        FixtureKind::CubeMissingEdges,
        &FixtureParams {
            points: 8000,
            ..FixtureParams::default()
        },
    )
    .unwrap();
    let labels = compute_labels(&fixture.cloud, Criterion::Sharp, &RunConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("labels.ply");
    write_point_cloud(
        &fixture.cloud,
        &path,
        PointFormat::PlyBinary,
        Some(&label_colors(&labels)),
    )
    .unwrap();

    let data = read_point_data(&path).unwrap();
    let colors = data.colors.unwrap();
    let edges = cube_edges();
    let mean_edge_dist = |want: Rgb| {
        let d: Vec<f64> = data
            .points
            .iter()
            .zip(&colors)
            .filter(|(_, c)| **c == want)
            .map(|(p, _)| selfsample::fixtures::distance_to_segments(*p, &edges))
            .collect();
        assert!(!d.is_empty());
        d.iter().sum::<f64>() / d.len() as f64
    };
    let red = mean_edge_dist(POSITIVE_COLOR);
    let blue = mean_edge_dist(NEGATIVE_COLOR);
    assert!(red < 0.5 * blue, "red {red} blue {blue}");
}
