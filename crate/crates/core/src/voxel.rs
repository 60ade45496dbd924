//! Per-voxel record.

use crate::key::VoxelKey;

/// Squared-distance sentinel for "no closest obstacle".
pub const INF_SQ: i64 = i64::MAX;

/// Closest-obstacle reference: a lattice voxel or the point at infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum Coc {
    #[default]
    Ideal,
    Voxel(VoxelKey),
}

impl Coc {
    pub fn voxel(self) -> Option<VoxelKey> {
        match self {
            Coc::Ideal => None,
            Coc::Voxel(k) => Some(k),
        }
    }

    pub fn is_ideal(self) -> bool {
        matches!(self, Coc::Ideal)
    }

    /// Squared distance to `to`, [`INF_SQ`] for the point at infinity.
    #[inline]
    pub fn dist_sq(self, to: VoxelKey) -> i64 {
        match self {
            Coc::Ideal => INF_SQ,
            Coc::Voxel(k) => k.dist_sq(to),
        }
    }
}

/// Which distance field a [`FieldCell`] belongs to.
///
/// `Obstacle` is the ordinary field measured to occupied voxels. `Complement`
/// measures distance to free voxels and exists only in signed mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layer {
    Obstacle,
    Complement,
}

impl Layer {
    pub(crate) fn slot(self) -> usize {
        match self {
            Layer::Obstacle => 0,
            Layer::Complement => 1,
        }
    }
}

/// Distance state and list links of one voxel within one field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldCell {
    /// Field value in voxels. Under the Euclidean rule this is `sqrt(dis_sq)`.
    pub dis: f64,
    /// Exact squared distance to `coc`.
    pub dis_sq: i64,
    pub coc: Coc,
    pub prev: Option<VoxelKey>,
    pub next: Option<VoxelKey>,
    /// First member of the list of voxels whose closest obstacle is this voxel.
    pub head: Option<VoxelKey>,
    /// Whether this voxel is currently a member of some list.
    pub linked: bool,
}

const EMPTY_CELL: FieldCell = FieldCell {
    dis: f64::INFINITY,
    dis_sq: INF_SQ,
    coc: Coc::Ideal,
    prev: None,
    next: None,
    head: None,
    linked: false,
};

impl Default for FieldCell {
    fn default() -> Self {
        EMPTY_CELL
    }
}

impl FieldCell {
    pub(crate) fn reset_distance(&mut self) {
        self.dis = f64::INFINITY;
        self.dis_sq = INF_SQ;
        self.coc = Coc::Ideal;
    }
}

/// Everything the map stores about one voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelInfo {
    pub pos: VoxelKey,
    /// Occupancy log-odds.
    pub occ: f32,
    /// Ever observed.
    pub obs: bool,
    fields: [FieldCell; 2],
}

impl VoxelInfo {
    pub fn new(pos: VoxelKey) -> Self {
        Self {
            pos,
            occ: 0.0,
            obs: false,
            fields: [EMPTY_CELL; 2],
        }
    }

    #[inline]
    pub fn field(&self, layer: Layer) -> &FieldCell {
        &self.fields[layer.slot()]
    }

    #[inline]
    pub fn field_mut(&mut self, layer: Layer) -> &mut FieldCell {
        &mut self.fields[layer.slot()]
    }

    /// Unsigned distance in voxels to the closest occupied voxel.
    pub fn dis(&self) -> f64 {
        self.fields[0].dis
    }

    pub fn coc(&self) -> Coc {
        self.fields[0].coc
    }
}
