use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use esdfmap::{Connectivity, EsdfConfig, IndexConfig, MapConfig, UpdateRule, VoxelBox, VoxelKey};
use esdfmap_bench::{open_grid, scattered_keys};

const SIDE: i32 = 32;

fn config(index: IndexConfig, esdf: EsdfConfig) -> MapConfig {
    MapConfig {
        index,
        esdf,
        ..Default::default()
    }
}

fn insert_epoch(c: &mut Criterion, name: &str, cfg: MapConfig) {
    let base = open_grid(cfg, SIDE);
    let obstacles = scattered_keys(SIDE, 200, 42);
    c.bench_function(name, |b| {
        b.iter_batched(
            || {
                let mut m = base.clone();
                for &k in &obstacles {
                    m.set_voxel_state(k, true).unwrap();
                }
                m
            },
            |mut m| m.run_epoch().unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn connectivity(c: &mut Criterion) {
    let mut group = c.benchmark_group("connectivity");
    group.sample_size(10);
    for conn in Connectivity::ALL {
        let cfg = config(
            IndexConfig::default(),
            EsdfConfig {
                connectivity: conn,
                ..Default::default()
            },
        );
        let base = open_grid(cfg, SIDE);
        let obstacles = scattered_keys(SIDE, 200, 42);
        group.bench_with_input(BenchmarkId::from_parameter(conn), &conn, |b, _| {
            b.iter_batched(
                || {
                    let mut m = base.clone();
                    for &k in &obstacles {
                        m.set_voxel_state(k, true).unwrap();
                    }
                    m
                },
                |mut m| m.run_epoch().unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn indexing(c: &mut Criterion) {
    let dense = VoxelBox::new(VoxelKey::new(0, 0, 0), VoxelKey::new(SIDE, SIDE, SIDE));
    insert_epoch(
        c,
        "index/dense",
        config(IndexConfig::dense(dense), EsdfConfig::default()),
    );
    for bs in [1, 2, 4, 8, 16] {
        insert_epoch(
            c,
            &format!("index/hashed_{bs}"),
            config(IndexConfig::hashed(bs), EsdfConfig::default()),
        );
    }
}

fn rules(c: &mut Criterion) {
    for rule in [UpdateRule::EuclideanClosestObstacle, UpdateRule::QuasiEuclidean] {
        insert_epoch(
            c,
            &format!("rule/{rule}"),
            config(
                IndexConfig::default(),
                EsdfConfig {
                    update_rule: rule,
                    ..Default::default()
                },
            ),
        );
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = connectivity, indexing, rules
}
criterion_main!(benches);
