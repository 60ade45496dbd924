//! Synthetic workloads shared by the benchmarks.

use esdfmap::{EsdfMap, MapConfig, VoxelKey};

/// A cube of side `n` fully observed as free, with its first epoch run.
pub fn open_grid(config: MapConfig, n: i32) -> EsdfMap {
    let mut map = EsdfMap::new(config).expect("valid config");
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                map.set_voxel_state(VoxelKey::new(x, y, z), false).unwrap();
            }
        }
    }
    map.run_epoch().unwrap();
    map
}

/// `count` distinct pseudo-random keys inside a cube of side `n`.
pub fn scattered_keys(n: i32, count: usize, seed: u64) -> Vec<VoxelKey> {
    // SplitMix64; keeps the library free of an RNG dependency.
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count.min((n as usize).pow(3)) {
        let r = next();
        let k = VoxelKey::new(
            (r % n as u64) as i32,
            ((r >> 20) % n as u64) as i32,
            ((r >> 40) % n as u64) as i32,
        );
        if seen.insert(k) {
            out.push(k);
        }
    }
    out
}
