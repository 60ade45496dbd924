use std::fmt;
use std::ops::{Add, Sub};

/// Integer voxel coordinate.
///
/// Ordering is lexicographic over `(x, y, z)`, which gives deterministic
/// iteration wherever keys are sorted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelKey {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    /// Squared Euclidean distance in voxel units. Exact.
    #[inline]
    pub fn dist_sq(self, other: VoxelKey) -> i64 {
        let dx = (self.x - other.x) as i64;
        let dy = (self.y - other.y) as i64;
        let dz = (self.z - other.z) as i64;
        dx * dx + dy * dy + dz * dz
    }

    #[inline]
    pub fn dist(self, other: VoxelKey) -> f64 {
        (self.dist_sq(other) as f64).sqrt()
    }

    pub fn to_array(self) -> [i32; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[i32; 3]> for VoxelKey {
    fn from(v: [i32; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<(i32, i32, i32)> for VoxelKey {
    fn from((x, y, z): (i32, i32, i32)) -> Self {
        Self::new(x, y, z)
    }
}

impl Add for VoxelKey {
    type Output = VoxelKey;
    fn add(self, o: VoxelKey) -> VoxelKey {
        VoxelKey::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for VoxelKey {
    type Output = VoxelKey;
    fn sub(self, o: VoxelKey) -> VoxelKey {
        VoxelKey::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl fmt::Display for VoxelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Coordinate of a block of `block_size³` voxels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    pub bx: i32,
    pub by: i32,
    pub bz: i32,
}

impl BlockKey {
    pub const fn new(bx: i32, by: i32, bz: i32) -> Self {
        Self { bx, by, bz }
    }
}

/// Position of a voxel inside its block; each component is in `[0, block_size)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct BlockOffset {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl BlockOffset {
    /// Row-major slot inside the block's record array.
    #[inline]
    pub fn linear(self, block_size: u32) -> usize {
        ((self.z * block_size + self.y) * block_size + self.x) as usize
    }
}

/// Splits a voxel key into block coordinate and intra-block offset.
///
/// Uses floor semantics so that negative coordinates map into the block
/// "below" zero. Power-of-two sizes take the shift/mask path.
#[inline]
pub fn block_of(key: VoxelKey, block_size: u32) -> (BlockKey, BlockOffset) {
    debug_assert!(block_size >= 1);
    if block_size.is_power_of_two() {
        let shift = block_size.trailing_zeros();
        let mask = (block_size - 1) as i32;
        (
            BlockKey::new(key.x >> shift, key.y >> shift, key.z >> shift),
            BlockOffset {
                x: (key.x & mask) as u32,
                y: (key.y & mask) as u32,
                z: (key.z & mask) as u32,
            },
        )
    } else {
        let bs = block_size as i32;
        (
            BlockKey::new(key.x.div_euclid(bs), key.y.div_euclid(bs), key.z.div_euclid(bs)),
            BlockOffset {
                x: key.x.rem_euclid(bs) as u32,
                y: key.y.rem_euclid(bs) as u32,
                z: key.z.rem_euclid(bs) as u32,
            },
        )
    }
}

/// Inverse of [`block_of`].
#[inline]
pub fn key_of(block: BlockKey, offset: BlockOffset, block_size: u32) -> VoxelKey {
    let bs = block_size as i32;
    VoxelKey::new(
        block.bx * bs + offset.x as i32,
        block.by * bs + offset.y as i32,
        block.bz * bs + offset.z as i32,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floor_div(a: i32, b: i32) -> i32 {
        // Reference floor division, independent of div_euclid and shifts.
        let q = a / b;
        if (a % b != 0) && ((a < 0) != (b < 0)) {
            q - 1
        } else {
            q
        }
    }

    #[test]
    fn block_of_examples() {
        let (b, o) = block_of(VoxelKey::new(7, 0, 0), 8);
        assert_eq!(b, BlockKey::new(0, 0, 0));
        assert_eq!(o, BlockOffset { x: 7, y: 0, z: 0 });

        let (b, o) = block_of(VoxelKey::new(-1, 0, 0), 8);
        assert_eq!(b, BlockKey::new(-1, 0, 0));
        assert_eq!(o, BlockOffset { x: 7, y: 0, z: 0 });

        let (b, o) = block_of(VoxelKey::new(16, 9, -3), 8);
        assert_eq!(b, BlockKey::new(2, 1, -1));
        assert_eq!(o, BlockOffset { x: 0, y: 1, z: 5 });
    }

    #[test]
    fn block_of_matches_floor_division_exhaustively() {
        for bs in [1u32, 2, 3, 4, 5, 8, 16] {
            for x in -32..32 {
                let key = VoxelKey::new(x, -x, x / 2);
                let (b, o) = block_of(key, bs);
                let bsi = bs as i32;
                assert_eq!(b.bx, floor_div(key.x, bsi), "bs={bs} x={x}");
                assert_eq!(b.by, floor_div(key.y, bsi));
                assert_eq!(b.bz, floor_div(key.z, bsi));
                assert_eq!(o.x as i32, key.x - floor_div(key.x, bsi) * bsi);
                assert!(o.x < bs && o.y < bs && o.z < bs);
                assert_eq!(key_of(b, o, bs), key);
            }
        }
    }

    #[test]
    fn block_of_is_a_bijection_on_a_small_cube() {
        use std::collections::HashSet;
        for bs in [1u32, 2, 4, 8] {
            let mut seen = HashSet::new();
            for x in -9..9 {
                for y in -9..9 {
                    for z in -9..9 {
                        let (b, o) = block_of(VoxelKey::new(x, y, z), bs);
                        assert!(seen.insert((b, o.x, o.y, o.z)));
                    }
                }
            }
        }
    }

    #[test]
    fn ordering_is_lexicographic() {
        let mut keys = vec![
            VoxelKey::new(1, 0, 0),
            VoxelKey::new(0, 2, 0),
            VoxelKey::new(0, 1, 5),
            VoxelKey::new(0, 1, -1),
        ];
        keys.sort();
        assert_eq!(
            keys,
            vec![
                VoxelKey::new(0, 1, -1),
                VoxelKey::new(0, 1, 5),
                VoxelKey::new(0, 2, 0),
                VoxelKey::new(1, 0, 0)
            ]
        );
    }

    #[test]
    fn three_four_five() {
        assert_eq!(VoxelKey::new(0, 0, 0).dist_sq(VoxelKey::new(3, 4, 0)), 25);
        assert_eq!(VoxelKey::new(0, 0, 0).dist(VoxelKey::new(3, 4, 0)), 5.0);
    }
}
