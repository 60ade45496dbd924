mod common;

use common::*;
use esdfmap::{Connectivity, EsdfConfig, EsdfMap, IndexConfig, Layer, MapConfig, OccupancyConfig};
use proptest::prelude::*;

fn op() -> impl Strategy<Value = (i32, i32, i32, bool, bool)> {
    (0..6, 0..6, 0..6, prop::bool::weighted(0.25), prop::bool::weighted(0.15))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_state_sequence_keeps_field_consistent(
        ops in prop::collection::vec(op(), 1..150),
        conn in prop::sample::select(Connectivity::ALL.to_vec()),
        block_size in prop::sample::select(vec![1u32, 2, 4, 8]),
        signed in any::<bool>(),
    ) {
        let mut map = EsdfMap::new(MapConfig {
            index: IndexConfig::hashed(block_size),
            occupancy: OccupancyConfig::default(),
            esdf: EsdfConfig { connectivity: conn, signed_mode: signed, ..Default::default() },
        }).unwrap();
        for (x, y, z, occupied, epoch) in ops {
            map.set_voxel_state(k(x, y, z), occupied).unwrap();
            if epoch {
                map.run_epoch().unwrap();
                assert_consistent(&map);
            }
        }
        map.run_epoch().unwrap();
        assert_consistent(&map);
        if signed {
            map.check_list_partition(Layer::Complement).unwrap();
            prop_assert!(map.fixed_point_violations(Layer::Complement).is_empty());
        }
        if block_size == 1 {
            prop_assert_eq!(map.memory_stats().allocated_voxel_records, map.observed_count());
        }
    }
}
