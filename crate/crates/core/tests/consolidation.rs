mod common;

use std::sync::OnceLock;

use common::*;
use rand::Rng;
use selfsample_core::consolidate::{
    consolidate, consolidate_streaming, ConsolidationRequest, InferenceSubsets, PointSink,
};
use selfsample_core::eval::TriangleMesh;
use selfsample_core::net::{forward, init_params, normalize, to_network_points};
use selfsample_core::sampler::sample_uniform_subset;
use selfsample_core::train::{train, PairSource, TrainConfig, TrainedModel};
use selfsample_core::{KnnIndex, NetArchitecture, PointCloud, SamplerConfig, Vec3};

struct Fixture {
    cloud: PointCloud,
    model: TrainedModel<f32>,
}

/// Briefly trained cube model.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let cloud = PointCloud::new(TriangleMesh::unit_cube().sample_surface(5000, 8)).unwrap();
        let config = TrainConfig {
            iterations: 400,
            seed: 8,
            ..TrainConfig::default()
        };
        let (model, _) = train::<f32>(
            &cloud,
            PairSource::Uniform,
            &SamplerConfig::default(),
            &config,
            &NetArchitecture::default(),
        )
        .unwrap();
        Fixture { cloud, model }
    })
}

fn request(target: usize, seed: u64) -> ConsolidationRequest {
    ConsolidationRequest {
        target_point_count: target,
        subset_size: fixture().model.subset_size,
        criterion: None,
        seed,
    }
}

fn run(req: &ConsolidationRequest) -> Vec<Vec3> {
    let f = fixture();
    consolidate(
        &f.cloud,
        &f.model.params,
        &f.model.arch,
        &f.model.transform,
        req,
        InferenceSubsets::Uniform,
    )
    .unwrap()
}

#[derive(Default)]
struct Batches(Vec<Vec<Vec3>>);

impl PointSink for Batches {
    fn write_batch(&mut self, points: &[Vec3]) -> Result<(), String> {
        self.0.push(points.to_vec());
        Ok(())
    }
}

fn mean_nn_distance(points: &[Vec3]) -> f64 {
    let index = KnnIndex::from_points(points).unwrap();
    let mut nbrs = Vec::new();
    let mut total = 0.0;
    for i in 0..points.len() {
        index.knn_excluding(i, 1, &mut nbrs).unwrap();
        total += nbrs[0].dist_sq.sqrt();
    }
    total / points.len() as f64
}

#[test]
fn single_batch_is_one_displaced_subset() {
    let f = fixture();
    let m = f.model.subset_size;
    let out = run(&request(m, 21));
    assert_eq!(out.len(), m);
    let idx = sample_uniform_subset(f.cloud.len(), m, &mut rng(21)).unwrap();
    let subset: Vec<[f32; 3]> = idx
        .iter()
        .map(|&i| {
            let p = f.model.transform.apply(f.cloud.points()[i]);
            [p.x as f32, p.y as f32, p.z as f32]
        })
        .collect();
    let offsets = forward(&f.model.params, &f.model.arch, &subset).unwrap();
    for ((s, d), got) in subset.iter().zip(&offsets).zip(&out) {
        let unit = Vec3::new(
            (s[0] + d[0]) as f64,
            (s[1] + d[1]) as f64,
            (s[2] + d[2]) as f64,
        );
        assert_eq!(f.model.transform.invert(unit), *got);
    }
}

#[test]
fn streaming_matches_batch_output() {
    let f = fixture();
    let m = f.model.subset_size;
    let target = 3 * m + m / 2;
    let req = request(target, 5);
    let whole = run(&req);
    assert_eq!(whole.len(), target);
    let mut sink = Batches::default();
    let written = consolidate_streaming(
        &f.cloud,
        &f.model.params,
        &f.model.arch,
        &f.model.transform,
        &req,
        InferenceSubsets::Uniform,
        &mut sink,
    )
    .unwrap();
    assert_eq!(written, target);
    let sizes: Vec<usize> = sink.0.iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![m, m, m, m / 2]);
    assert_eq!(sink.0.concat(), whole);
    assert_eq!(run(&req), whole);
    assert_ne!(run(&request(target, 6)), whole);
}

#[test]
fn zero_target_writes_nothing() {
    let f = fixture();
    let mut sink = Batches::default();
    let written = consolidate_streaming(
        &f.cloud,
        &f.model.params,
        &f.model.arch,
        &f.model.transform,
        &request(0, 0),
        InferenceSubsets::Uniform,
        &mut sink,
    )
    .unwrap();
    assert_eq!(written, 0);
    assert!(sink.0.is_empty());
}

#[test]
fn outputs_stay_finite_and_near_the_input() {
    let f = fixture();
    let out = run(&request(50_000, 2));
    let bbox = f.cloud.bbox();
    let center = (bbox.min + bbox.max) * 0.5;
    let half = (bbox.max - bbox.min) * 0.75;
    for p in &out {
        assert!(p.is_finite());
        let d = *p - center;
        assert!(
            d.x.abs() <= half.x && d.y.abs() <= half.y && d.z.abs() <= half.z,
            "{p:?}"
        );
    }
}

#[test]
fn coverage_grows_with_output_count() {
    let counts = [160_000, 480_000, 1_280_000];
    let spacing: Vec<f64> = counts
        .iter()
        .map(|&c| mean_nn_distance(&run(&request(c, 9))))
        .collect();
    assert!(
        spacing[0] > spacing[1] && spacing[1] > spacing[2],
        "{spacing:?}"
    );
}

#[test]
fn anchor_output_depends_on_its_subset() {
    let f = fixture();
    let m = f.model.subset_size;
    let n = f.cloud.len();
    let anchor = 0;
    let unit: Vec<Vec3> = f
        .cloud
        .points()
        .iter()
        .map(|p| f.model.transform.apply(*p))
        .collect();
    let mut r = rng(33);
    let mut outputs = Vec::new();
    while outputs.len() < 100 {
        let mut idx = sample_uniform_subset(n, m, &mut r).unwrap();
        let pos = match idx.iter().position(|&i| i == anchor) {
            Some(p) => p,
            None => {
                let p = r.random_range(0..m);
                idx[p] = anchor;
                p
            }
        };
        let subset: Vec<Vec3> = idx.iter().map(|&i| unit[i]).collect();
        let d = forward(
            &f.model.params,
            &f.model.arch,
            &to_network_points::<f32>(&subset),
        )
        .unwrap()[pos];
        outputs.push(unit[anchor] + Vec3::new(d[0] as f64, d[1] as f64, d[2] as f64));
    }
    let mean = outputs.iter().fold(Vec3::ZERO, |a, &b| a + b) / outputs.len() as f64;
    let var = outputs
        .iter()
        .map(|p| (*p - mean).norm_squared())
        .sum::<f64>()
        / outputs.len() as f64;
    assert!(var.sqrt() > 0.0);
}

#[test]
fn untrained_network_resamples_the_input() {
    let cloud = PointCloud::new(sphere_points(&mut rng(4), 4000)).unwrap();
    let arch = NetArchitecture::default();
    let params = init_params::<f32>(&arch, 4).unwrap();
    let (_, transform) = normalize(&cloud).unwrap();
    let req = ConsolidationRequest {
        target_point_count: 3200,
        subset_size: 320,
        criterion: None,
        seed: 4,
    };
    let out = consolidate(
        &cloud,
        &params,
        &arch,
        &transform,
        &req,
        InferenceSubsets::Uniform,
    )
    .unwrap();
    let index = KnnIndex::from_points(cloud.points()).unwrap();
    let mean = out
        .iter()
        .map(|p| index.nearest(*p).dist_sq.sqrt())
        .sum::<f64>()
        / out.len() as f64;
    assert!(mean <= 1e-3 * cloud.bbox_diagonal(), "{mean}");
}
