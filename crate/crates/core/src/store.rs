//! Voxel records plus the closest-obstacle lists.
//!
//! Every obstacle voxel owns a doubly linked list threading all voxels whose
//! closest obstacle it is; the point at infinity owns one more list holding
//! observed voxels that have no closest obstacle yet. Links are voxel keys
//! resolved through the index, so the lists work the same on every backend.

use crate::connectivity::Connectivity;
use crate::error::{Error, Result};
use crate::index::{IndexConfig, VoxelIndex};
use crate::key::VoxelKey;
use crate::voxel::{Coc, FieldCell, Layer, VoxelInfo};

#[derive(Clone, Debug)]
pub struct VoxelStore {
    index: VoxelIndex,
    ideal_heads: [Option<VoxelKey>; 2],
}

impl VoxelStore {
    pub fn new(config: IndexConfig) -> Result<Self> {
        Ok(Self {
            index: VoxelIndex::new(config)?,
            ideal_heads: [None; 2],
        })
    }

    pub fn index(&self) -> &VoxelIndex {
        &self.index
    }

    pub fn index_mut(&mut self) -> &mut VoxelIndex {
        &mut self.index
    }

    #[inline]
    pub fn get(&self, key: VoxelKey) -> Option<&VoxelInfo> {
        self.index.get(key)
    }

    #[inline]
    pub(crate) fn cell(&self, layer: Layer, key: VoxelKey) -> Result<&FieldCell> {
        self.index
            .get(key)
            .map(|r| r.field(layer))
            .ok_or(Error::Unallocated(key))
    }

    #[inline]
    pub(crate) fn cell_mut(&mut self, layer: Layer, key: VoxelKey) -> Result<&mut FieldCell> {
        self.index
            .get_mut(key)
            .map(|r| r.field_mut(layer))
            .ok_or(Error::Unallocated(key))
    }

    fn head(&self, layer: Layer, owner: Coc) -> Result<Option<VoxelKey>> {
        match owner {
            Coc::Ideal => Ok(self.ideal_heads[layer.slot()]),
            Coc::Voxel(k) => Ok(self.cell(layer, k)?.head),
        }
    }

    fn set_head(&mut self, layer: Layer, owner: Coc, head: Option<VoxelKey>) -> Result<()> {
        match owner {
            Coc::Ideal => self.ideal_heads[layer.slot()] = head,
            Coc::Voxel(k) => self.cell_mut(layer, k)?.head = head,
        }
        Ok(())
    }

    fn head_slot(&mut self, layer: Layer, owner: Coc) -> Result<&mut Option<VoxelKey>> {
        match owner {
            Coc::Ideal => Ok(&mut self.ideal_heads[layer.slot()]),
            Coc::Voxel(k) => Ok(&mut self.cell_mut(layer, k)?.head),
        }
    }

    /// Moves `member` from its current owner's list to the front of `owner`'s
    /// list and stores its new distance.
    pub fn relink(&mut self, layer: Layer, member: VoxelKey, owner: Coc, dis: f64, dis_sq: i64) -> Result<()> {
        let cell = *self.cell(layer, member)?;
        if !cell.linked {
            return Err(Error::ListCorruption(format!("{member} is not linked")));
        }
        match cell.prev {
            Some(p) => self.cell_mut(layer, p)?.next = cell.next,
            None => {
                let head = self.head_slot(layer, cell.coc)?;
                if *head != Some(member) {
                    return Err(Error::ListCorruption(format!(
                        "{member} has no predecessor but is not the head of {:?}",
                        cell.coc
                    )));
                }
                *head = cell.next;
            }
        }
        if let Some(n) = cell.next {
            self.cell_mut(layer, n)?.prev = cell.prev;
        }
        let old_head = self.head_slot(layer, owner)?.replace(member);
        if let Some(h) = old_head {
            self.cell_mut(layer, h)?.prev = Some(member);
        }
        let cell = self.cell_mut(layer, member)?;
        cell.prev = None;
        cell.next = old_head;
        cell.coc = owner;
        cell.dis = dis;
        cell.dis_sq = dis_sq;
        Ok(())
    }

    /// Pushes `member` at the front of `owner`'s list.
    pub fn insert_into_dll(&mut self, layer: Layer, owner: Coc, member: VoxelKey) -> Result<()> {
        if self.cell(layer, member)?.linked {
            return Err(Error::ListCorruption(format!("{member} is already linked")));
        }
        let old_head = self.head(layer, owner)?;
        if let Some(h) = old_head {
            self.cell_mut(layer, h)?.prev = Some(member);
        }
        let cell = self.cell_mut(layer, member)?;
        cell.prev = None;
        cell.next = old_head;
        cell.linked = true;
        self.set_head(layer, owner, Some(member))
    }

    /// Unlinks `member` from `owner`'s list. The member's current closest
    /// obstacle must be `owner`.
    pub fn delete_from_dll(&mut self, layer: Layer, owner: Coc, member: VoxelKey) -> Result<()> {
        let cell = *self.cell(layer, member)?;
        if !cell.linked || cell.coc != owner {
            return Err(Error::ListCorruption(format!("{member} is not linked under {owner:?}")));
        }
        match cell.prev {
            Some(p) => self.cell_mut(layer, p)?.next = cell.next,
            None => {
                if self.head(layer, owner)? != Some(member) {
                    return Err(Error::ListCorruption(format!(
                        "{member} has no predecessor but is not the head of {owner:?}"
                    )));
                }
                self.set_head(layer, owner, cell.next)?;
            }
        }
        if let Some(n) = cell.next {
            self.cell_mut(layer, n)?.prev = cell.prev;
        }
        let cell = self.cell_mut(layer, member)?;
        cell.prev = None;
        cell.next = None;
        cell.linked = false;
        Ok(())
    }

    /// Members of `owner`'s list from head to tail.
    pub fn iterate_dll(&self, layer: Layer, owner: Coc) -> Result<Vec<VoxelKey>> {
        let bound = self.index.memory_stats().allocated_voxel_records;
        let mut out = Vec::new();
        let mut cur = self.head(layer, owner)?;
        while let Some(k) = cur {
            if out.len() >= bound {
                return Err(Error::ListCorruption(format!("cycle in list of {owner:?}")));
            }
            out.push(k);
            cur = self.cell(layer, k)?.next;
        }
        Ok(out)
    }

    /// Calls `f` for each observed neighbour of `key`.
    #[inline]
    pub fn for_each_neighbor<'s>(
        &'s self,
        key: VoxelKey,
        connectivity: Connectivity,
        mut f: impl FnMut(&'s VoxelInfo),
    ) {
        self.index.for_each_offset(key, connectivity.offsets(), |r| {
            if r.obs {
                f(r)
            }
        });
    }

    /// Observed neighbours of `key` under `connectivity`.
    pub fn neighbors(&self, key: VoxelKey, connectivity: Connectivity) -> impl Iterator<Item = &VoxelInfo> + '_ {
        connectivity
            .offsets()
            .iter()
            .filter_map(move |&off| self.index.get(key + off))
            .filter(|r| r.obs)
    }
}
