//! Parallel vs sequential throughput on the two hot paths: eigenfeature
//! extraction (per-point) and per-class BFS over blocks (per-slice).
//!
//! The parallel numbers use the rayon pool (default feature); the `seq/*`
//! baselines call the always-compiled sequential mappers, so one run of this
//! bench shows the speedup directly. Building with `--no-default-features`
//! additionally removes rayon from the parallel path for a cross-check.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use plantseg::classify::extract_features;
use plantseg::exec;
use plantseg::geometry::build_index;
use plantseg::instance::{bfs_block, BfsParams};
use plantseg::labels::Labeling;
use plantseg::partition::{partition, PartitionParams};
use plantseg::synth::{generate_scene, ObjectSpec, SceneSpec, Shape};

fn bench_scene(objects: usize) -> (plantseg::geometry::PointCloud, Labeling) {
    let spec = SceneSpec {
        seed: 99,
        objects: (0..objects)
            .map(|i| ObjectSpec {
                shape: Shape::Cylinder {
                    radius: 0.06,
                    length: 1.0,
                },
                center: [(i % 8) as f64 * 0.8, (i / 8) as f64 * 0.8, 0.0],
                yaw: 0.0,
                density: 10_000.0,
            })
            .collect(),
        noise_sigma: 0.002,
        occlusion: vec![],
        drop_fraction: 0.0,
        clutter_points: 0,
        boundary_radius: 0.04,
    };
    generate_scene(&spec).unwrap()
}

fn features(c: &mut Criterion) {
    let (cloud, _) = bench_scene(16);
    let index = build_index(&cloud, None).unwrap();
    let mut group = c.benchmark_group("eigenfeatures");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("parallel", cloud.len()), &cloud, |b, cloud| {
        b.iter(|| exec::map_indices(cloud.len(), |i| extract_features(cloud, &index, i, 0.05).ok()))
    });
    group.bench_with_input(BenchmarkId::new("seq", cloud.len()), &cloud, |b, cloud| {
        b.iter(|| {
            exec::seq::map_indices(cloud.len(), |i| extract_features(cloud, &index, i, 0.05).ok())
        })
    });
    group.finish();
}

fn block_bfs(c: &mut Criterion) {
    let (cloud, labeling) = bench_scene(16);
    let grid = partition(&cloud, &PartitionParams::default()).unwrap();
    let refs: Vec<(usize, &[u32])> = grid
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (i, b.indices.as_slice()))
        .collect();
    let params = BfsParams::default();
    let mut group = c.benchmark_group("block_bfs");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", refs.len()), |b| {
        b.iter(|| {
            exec::map_slice(&refs, |(id, indices)| {
                bfs_block(&cloud, &labeling, &params, *id, indices)
            })
        })
    });
    group.bench_function(BenchmarkId::new("seq", refs.len()), |b| {
        b.iter(|| {
            exec::seq::map_slice(&refs, |(id, indices)| {
                bfs_block(&cloud, &labeling, &params, *id, indices)
            })
        })
    });
    group.finish();
}

criterion_group!(benches, features, block_bfs);
criterion_main!(benches);
