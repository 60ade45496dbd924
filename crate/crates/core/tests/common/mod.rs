#![allow(dead_code)]

use esdfmap::oracle::{compare, exact_edt};
use esdfmap::{Connectivity, EsdfConfig, EsdfMap, IndexConfig, Layer, MapConfig, OccupancyConfig, VoxelKey};

pub fn k(x: i32, y: i32, z: i32) -> VoxelKey {
    VoxelKey::new(x, y, z)
}

pub fn map_with(conn: Connectivity) -> EsdfMap {
    EsdfMap::new(MapConfig {
        esdf: EsdfConfig {
            connectivity: conn,
            ..Default::default()
        },
        ..Default::default()
    })
    .unwrap()
}

pub fn map_from(esdf: EsdfConfig, index: IndexConfig, occupancy: OccupancyConfig) -> EsdfMap {
    EsdfMap::new(MapConfig { index, occupancy, esdf }).unwrap()
}

pub fn cube(n: i32) -> Vec<VoxelKey> {
    let mut v = Vec::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                v.push(k(x, y, z));
            }
        }
    }
    v
}

/// Observes every voxel of a cube, occupied where `occupied` says so.
pub fn fill(map: &mut EsdfMap, n: i32, occupied: impl Fn(VoxelKey) -> bool) {
    for key in cube(n) {
        map.set_voxel_state(key, occupied(key)).unwrap();
    }
}

/// Field values over the map's observed voxels alongside exact distances.
pub fn field_and_truth(map: &EsdfMap) -> (Vec<VoxelKey>, Vec<f64>, Vec<f64>) {
    let domain = map.observed_keys();
    let truth = exact_edt(&map.occupied_keys(), &domain);
    let field = domain.iter().map(|&v| map.distance_voxels(v).unwrap()).collect();
    (domain, field, truth)
}

pub fn rms(map: &EsdfMap) -> f64 {
    let (_, f, t) = field_and_truth(map);
    compare(&f, &t).rms_error_voxels
}

/// Invariants that must hold after every epoch.
pub fn assert_consistent(map: &EsdfMap) {
    map.check_list_partition(Layer::Obstacle).unwrap();
    assert!(map.fixed_point_violations(Layer::Obstacle).is_empty());
    let (domain, field, truth) = field_and_truth(map);
    for ((v, f), t) in domain.iter().zip(&field).zip(&truth) {
        if f.is_finite() {
            assert!(f - t >= -1e-9, "{v}: field {f} below exact {t}");
            let rec = map.voxel(*v).unwrap();
            let coc = rec.coc().voxel().unwrap();
            assert_eq!(map.occupancy_state(coc), esdfmap::OccState::Occupied);
            assert_eq!(rec.dis(), v.dist(coc));
        }
    }
    for o in map.occupied_keys() {
        let rec = map.voxel(o).unwrap();
        assert_eq!(rec.dis(), 0.0);
        assert_eq!(rec.coc(), esdfmap::Coc::Voxel(o));
    }
}
