//! Coordinate-to-record indexing.
//!
//! Two backends: a dense array over a known bounding box, and a hash table
//! of fixed-size blocks for maps that grow with observed space. Both give
//! average constant-time lookup.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::key::{block_of, key_of, BlockKey, BlockOffset, VoxelKey};
use crate::voxel::VoxelInfo;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    DenseArray,
    HashedBlocks,
}

/// Half-open axis-aligned box of voxels: `min <= key < max` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VoxelBox {
    pub min: VoxelKey,
    pub max: VoxelKey,
}

impl VoxelBox {
    pub fn new(min: VoxelKey, max: VoxelKey) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, k: VoxelKey) -> bool {
        k.x >= self.min.x
            && k.y >= self.min.y
            && k.z >= self.min.z
            && k.x < self.max.x
            && k.y < self.max.y
            && k.z < self.max.z
    }

    pub fn extent(&self) -> [usize; 3] {
        [
            (self.max.x - self.min.x).max(0) as usize,
            (self.max.y - self.min.y).max(0) as usize,
            (self.max.z - self.min.z).max(0) as usize,
        ]
    }

    pub fn volume(&self) -> usize {
        let [a, b, c] = self.extent();
        a * b * c
    }

    /// Every key in the box, lexicographically ordered.
    pub fn keys(&self) -> impl Iterator<Item = VoxelKey> + '_ {
        (self.min.x..self.max.x).flat_map(move |x| {
            (self.min.y..self.max.y).flat_map(move |y| (self.min.z..self.max.z).map(move |z| VoxelKey::new(x, y, z)))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexConfig {
    pub backend: Backend,
    pub bounds: Option<VoxelBox>,
    pub block_size: u32,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            backend: Backend::HashedBlocks,
            bounds: None,
            block_size: 8,
        }
    }
}

impl IndexConfig {
    pub fn hashed(block_size: u32) -> Self {
        Self {
            backend: Backend::HashedBlocks,
            bounds: None,
            block_size,
        }
    }

    pub fn dense(bounds: VoxelBox) -> Self {
        Self {
            backend: Backend::DenseArray,
            bounds: Some(bounds),
            block_size: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.backend {
            Backend::DenseArray => match self.bounds {
                None => Err(Error::Config("dense array backend requires bounds".into())),
                Some(b) if b.volume() == 0 => Err(Error::Config("dense array bounds are empty".into())),
                Some(_) => Ok(()),
            },
            Backend::HashedBlocks if self.block_size == 0 => Err(Error::Config("block_size must be at least 1".into())),
            Backend::HashedBlocks => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MemoryStats {
    pub allocated_voxel_records: usize,
    pub allocated_blocks: usize,
}

#[derive(Clone, Debug)]
struct DenseIndex {
    bounds: VoxelBox,
    slots: Vec<Option<VoxelInfo>>,
    allocated: usize,
}

impl DenseIndex {
    #[inline]
    fn slot(&self, k: VoxelKey) -> Option<usize> {
        if !self.bounds.contains(k) {
            return None;
        }
        let [ex, ey, _] = self.bounds.extent();
        let lx = (k.x - self.bounds.min.x) as usize;
        let ly = (k.y - self.bounds.min.y) as usize;
        let lz = (k.z - self.bounds.min.z) as usize;
        Some((lz * ey + ly) * ex + lx)
    }
}

#[derive(Clone, Debug)]
struct HashedIndex {
    block_size: u32,
    lookup: FxHashMap<BlockKey, usize>,
    /// Blocks in allocation order, each a contiguous array indexed by offset.
    blocks: Vec<(BlockKey, Box<[VoxelInfo]>)>,
}

impl HashedIndex {
    fn new_block(&self, block: BlockKey) -> Result<Box<[VoxelInfo]>> {
        let bs = self.block_size;
        let n = (bs as usize).pow(3);
        let mut records = Vec::new();
        records.try_reserve_exact(n).map_err(|_| Error::Resource(n))?;
        for z in 0..bs {
            for y in 0..bs {
                for x in 0..bs {
                    records.push(VoxelInfo::new(key_of(block, BlockOffset { x, y, z }, bs)));
                }
            }
        }
        Ok(records.into_boxed_slice())
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(DenseIndex),
    Hashed(HashedIndex),
}

/// Maps voxel keys to [`VoxelInfo`] records, allocating lazily.
#[derive(Clone, Debug)]
pub struct VoxelIndex {
    config: IndexConfig,
    storage: Storage,
}

impl VoxelIndex {
    pub fn new(config: IndexConfig) -> Result<Self> {
        config.validate()?;
        let storage = match config.backend {
            Backend::DenseArray => {
                let bounds = config.bounds.expect("validated");
                let n = bounds.volume();
                let mut slots = Vec::new();
                slots.try_reserve_exact(n).map_err(|_| Error::Resource(n))?;
                slots.resize_with(n, || None);
                Storage::Dense(DenseIndex {
                    bounds,
                    slots,
                    allocated: 0,
                })
            }
            Backend::HashedBlocks => Storage::Hashed(HashedIndex {
                block_size: config.block_size,
                lookup: FxHashMap::default(),
                blocks: Vec::new(),
            }),
        };
        Ok(Self { config, storage })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    fn check_bounds(&self, key: VoxelKey) -> Result<()> {
        match &self.storage {
            Storage::Dense(d) if !d.bounds.contains(key) => Err(Error::OutOfBounds(key)),
            _ => Ok(()),
        }
    }

    /// Looks up a record without allocating. Out-of-bounds keys on the
    /// dense backend are an error.
    pub fn lookup(&self, key: VoxelKey) -> Result<Option<&VoxelInfo>> {
        self.check_bounds(key)?;
        Ok(self.get(key))
    }

    /// Like [`lookup`](Self::lookup) but treats out-of-bounds as absent.
    #[inline]
    pub fn get(&self, key: VoxelKey) -> Option<&VoxelInfo> {
        match &self.storage {
            Storage::Dense(d) => d.slot(key).and_then(|i| d.slots[i].as_ref()),
            Storage::Hashed(h) => {
                let (b, o) = block_of(key, h.block_size);
                h.lookup.get(&b).map(|&i| &h.blocks[i].1[o.linear(h.block_size)])
            }
        }
    }

    /// Calls `f` with the record at `key + off` for every offset that is
    /// allocated. Cheaper than repeated [`get`](Self::get) calls because
    /// offsets landing in the same block share one lookup.
    #[inline]
    pub fn for_each_offset<'s>(&'s self, key: VoxelKey, offsets: &[VoxelKey], mut f: impl FnMut(&'s VoxelInfo)) {
        match &self.storage {
            Storage::Dense(d) => {
                for &off in offsets {
                    if let Some(r) = d.slot(key + off).and_then(|i| d.slots[i].as_ref()) {
                        f(r);
                    }
                }
            }
            Storage::Hashed(h) if h.block_size >= 2 => {
                let bs = h.block_size as i32;
                let (home, local) = block_of(key, h.block_size);
                let mut blocks: [Option<Option<&'s [VoxelInfo]>>; 27] = [None; 27];
                let step = |l: i32| (l >= bs) as i32 - (l < 0) as i32;
                for &off in offsets {
                    let (lx, ly, lz) = (local.x as i32 + off.x, local.y as i32 + off.y, local.z as i32 + off.z);
                    let (dx, dy, dz) = (step(lx), step(ly), step(lz));
                    let slot = ((dz + 1) * 9 + (dy + 1) * 3 + dx + 1) as usize;
                    let records = *blocks[slot].get_or_insert_with(|| {
                        let b = BlockKey::new(home.bx + dx, home.by + dy, home.bz + dz);
                        h.lookup.get(&b).map(|&i| &*h.blocks[i].1)
                    });
                    if let Some(records) = records {
                        let (x, y, z) = (lx - dx * bs, ly - dy * bs, lz - dz * bs);
                        f(&records[((z * bs + y) * bs + x) as usize]);
                    }
                }
            }
            Storage::Hashed(_) => {
                for &off in offsets {
                    if let Some(r) = self.get(key + off) {
                        f(r);
                    }
                }
            }
        }
    }

    #[inline]
    pub fn get_mut(&mut self, key: VoxelKey) -> Option<&mut VoxelInfo> {
        match &mut self.storage {
            Storage::Dense(d) => match d.slot(key) {
                Some(i) => d.slots[i].as_mut(),
                None => None,
            },
            Storage::Hashed(h) => {
                let (b, o) = block_of(key, h.block_size);
                let bs = h.block_size;
                match h.lookup.get(&b) {
                    Some(&i) => Some(&mut h.blocks[i].1[o.linear(bs)]),
                    None => None,
                }
            }
        }
    }

    /// Returns the record for `key`, creating it (and on the hashed backend
    /// its whole block) with default state if needed.
    pub fn allocate(&mut self, key: VoxelKey) -> Result<&mut VoxelInfo> {
        self.check_bounds(key)?;
        match &mut self.storage {
            Storage::Dense(d) => {
                let i = d.slot(key).expect("bounds checked");
                if d.slots[i].is_none() {
                    d.allocated += 1;
                }
                Ok(d.slots[i].get_or_insert_with(|| VoxelInfo::new(key)))
            }
            Storage::Hashed(h) => {
                let (b, o) = block_of(key, h.block_size);
                let i = match h.lookup.get(&b) {
                    Some(&i) => i,
                    None => {
                        let block = h.new_block(b)?;
                        h.blocks.push((b, block));
                        h.lookup.insert(b, h.blocks.len() - 1);
                        h.blocks.len() - 1
                    }
                };
                let bs = h.block_size;
                Ok(&mut h.blocks[i].1[o.linear(bs)])
            }
        }
    }

    pub fn memory_stats(&self) -> MemoryStats {
        match &self.storage {
            Storage::Dense(d) => MemoryStats {
                allocated_voxel_records: d.allocated,
                allocated_blocks: usize::from(d.allocated > 0),
            },
            Storage::Hashed(h) => MemoryStats {
                allocated_voxel_records: h.blocks.len() * (h.block_size as usize).pow(3),
                allocated_blocks: h.blocks.len(),
            },
        }
    }

    /// All allocated records, in allocation order for the hashed backend and
    /// array order for the dense one.
    pub fn iter(&self) -> Box<dyn Iterator<Item = &VoxelInfo> + '_> {
        match &self.storage {
            Storage::Dense(d) => Box::new(d.slots.iter().flatten()),
            Storage::Hashed(h) => Box::new(h.blocks.iter().flat_map(|(_, b)| b.iter())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_map_lookup_is_absent() {
        let idx = VoxelIndex::new(IndexConfig::default()).unwrap();
        assert!(idx.lookup(VoxelKey::new(0, 0, 0)).unwrap().is_none());
        assert_eq!(idx.memory_stats(), MemoryStats::default());
    }

    #[test]
    fn allocate_round_trip_and_idempotence() {
        let mut idx = VoxelIndex::new(IndexConfig::default()).unwrap();
        let k = VoxelKey::new(3, 3, 3);
        idx.allocate(k).unwrap().occ = 1.25;
        let again = idx.allocate(k).unwrap();
        assert_eq!(again.occ, 1.25);
        assert_eq!(idx.lookup(k).unwrap().unwrap().pos, k);
        assert_eq!(idx.memory_stats().allocated_blocks, 1);
    }

    #[test]
    fn block_allocates_as_a_unit() {
        let mut idx = VoxelIndex::new(IndexConfig::hashed(8)).unwrap();
        idx.allocate(VoxelKey::new(3, 3, 3)).unwrap();
        let rec = idx.lookup(VoxelKey::new(4, 4, 4)).unwrap().unwrap();
        assert_eq!(rec.pos, VoxelKey::new(4, 4, 4));
        assert!(!rec.obs);
        // Exhaustive membership check against floor division.
        for x in -2..10 {
            for y in -2..10 {
                for z in -2..10 {
                    let k = VoxelKey::new(x, y, z);
                    let same_block = [x, y, z].iter().all(|c| c.div_euclid(8) == 0);
                    assert_eq!(idx.get(k).is_some(), same_block, "{k}");
                }
            }
        }
        assert_eq!(
            idx.memory_stats(),
            MemoryStats {
                allocated_voxel_records: 512,
                allocated_blocks: 1
            }
        );
    }

    #[test]
    fn unit_blocks_count_records_exactly() {
        let mut idx = VoxelIndex::new(IndexConfig::hashed(1)).unwrap();
        idx.allocate(VoxelKey::new(0, 0, 0)).unwrap();
        assert_eq!(
            idx.memory_stats(),
            MemoryStats {
                allocated_voxel_records: 1,
                allocated_blocks: 1
            }
        );
        for i in 0..50 {
            idx.allocate(VoxelKey::new(i % 7, -i, i * 3)).unwrap();
        }
        let distinct: std::collections::HashSet<_> = (0..50).map(|i| (i % 7, -i, i * 3)).chain([(0, 0, 0)]).collect();
        assert_eq!(idx.memory_stats().allocated_voxel_records, distinct.len());
    }

    #[test]
    fn dense_backend_bounds() {
        let bounds = VoxelBox::new(VoxelKey::new(-2, -2, -2), VoxelKey::new(2, 2, 2));
        let mut idx = VoxelIndex::new(IndexConfig::dense(bounds)).unwrap();
        assert_eq!(
            idx.lookup(VoxelKey::new(2, 0, 0)),
            Err(Error::OutOfBounds(VoxelKey::new(2, 0, 0)))
        );
        assert!(idx.allocate(VoxelKey::new(0, 5, 0)).is_err());
        idx.allocate(VoxelKey::new(-2, 1, 0)).unwrap();
        assert_eq!(idx.get(VoxelKey::new(-2, 1, 0)).unwrap().pos, VoxelKey::new(-2, 1, 0));
        assert!(idx.get(VoxelKey::new(-1, 1, 0)).is_none());
        assert_eq!(idx.memory_stats().allocated_voxel_records, 1);
    }

    #[test]
    fn dense_requires_bounds() {
        let cfg = IndexConfig {
            backend: Backend::DenseArray,
            bounds: None,
            block_size: 1,
        };
        assert!(matches!(VoxelIndex::new(cfg), Err(Error::Config(_))));
        assert!(VoxelIndex::new(IndexConfig::hashed(0)).is_err());
    }

    #[test]
    fn non_power_of_two_blocks() {
        let mut idx = VoxelIndex::new(IndexConfig::hashed(3)).unwrap();
        idx.allocate(VoxelKey::new(-1, -1, -1)).unwrap();
        assert!(idx.get(VoxelKey::new(-3, -3, -3)).is_some());
        assert!(idx.get(VoxelKey::new(0, 0, 0)).is_none());
        assert_eq!(idx.memory_stats().allocated_voxel_records, 27);
    }
}
