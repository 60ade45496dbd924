//! Incremental distance-field update.
//!
//! Each epoch merges the voxels that became occupied (inserts) and the voxels
//! that stopped being occupied (deletes) into one update queue, then runs a
//! breadth-first propagation in which a voxel's value is the exact distance
//! to the closest obstacle of one of its neighbours. The propagation also
//! re-checks every popped voxel against its neighbours' obstacles before
//! expanding it, which repairs voxels that entered the map after the
//! obstacles around them were settled.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::connectivity::Connectivity;
use crate::error::{Error, Result};
use crate::key::VoxelKey;
use crate::store::VoxelStore;
use crate::voxel::{Coc, FieldCell, Layer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QueueDiscipline {
    #[default]
    Fifo,
    /// Min-heap on distance; ties broken by voxel key.
    PriorityByDistance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Straight-line distance to a neighbour's closest obstacle.
    #[default]
    EuclideanClosestObstacle,
    /// Neighbour's value plus the step length (broken-line distance).
    QuasiEuclidean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EsdfConfig {
    pub connectivity: Connectivity,
    pub queue_discipline: QueueDiscipline,
    pub update_rule: UpdateRule,
    /// Also maintain the field over the complement (distance to free space)
    /// so signed distances can be reported.
    pub signed_mode: bool,
}

impl Default for EsdfConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::C24,
            queue_discipline: QueueDiscipline::Fifo,
            update_rule: UpdateRule::EuclideanClosestObstacle,
            signed_mode: false,
        }
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateRule::EuclideanClosestObstacle => "euclidean",
            UpdateRule::QuasiEuclidean => "quasi",
        })
    }
}

impl FromStr for UpdateRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" | "euclideanclosestobstacle" => Ok(UpdateRule::EuclideanClosestObstacle),
            "quasi" | "quasieuclidean" | "quasi-euclidean" => Ok(UpdateRule::QuasiEuclidean),
            _ => Err(format!("unknown update rule '{s}'")),
        }
    }
}

impl fmt::Display for QueueDiscipline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueueDiscipline::Fifo => "fifo",
            QueueDiscipline::PriorityByDistance => "priority",
        })
    }
}

impl FromStr for QueueDiscipline {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fifo" => Ok(QueueDiscipline::Fifo),
            "priority" | "prioritybydistance" => Ok(QueueDiscipline::PriorityByDistance),
            _ => Err(format!("unknown queue discipline '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Priority(f64);

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// The update queue under either discipline.
#[derive(Debug)]
pub struct WorkQueue {
    fifo: VecDeque<VoxelKey>,
    heap: BinaryHeap<Reverse<(Priority, VoxelKey)>>,
    discipline: QueueDiscipline,
}

impl WorkQueue {
    pub fn new(discipline: QueueDiscipline) -> Self {
        Self {
            fifo: VecDeque::new(),
            heap: BinaryHeap::new(),
            discipline,
        }
    }

    pub fn len(&self) -> usize {
        self.fifo.len() + self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&mut self, key: VoxelKey, dis: f64) {
        match self.discipline {
            QueueDiscipline::Fifo => self.fifo.push_back(key),
            QueueDiscipline::PriorityByDistance => self.heap.push(Reverse((Priority(dis), key))),
        }
    }

    /// Next key, with the distance it was queued at (priority mode only).
    fn pop(&mut self) -> Option<(VoxelKey, Option<f64>)> {
        match self.discipline {
            QueueDiscipline::Fifo => self.fifo.pop_front().map(|k| (k, None)),
            QueueDiscipline::PriorityByDistance => self.heap.pop().map(|Reverse((p, k))| (k, Some(p.0))),
        }
    }

    /// Keys in queue order (FIFO) or heap order (priority).
    pub fn keys(&self) -> Vec<VoxelKey> {
        match self.discipline {
            QueueDiscipline::Fifo => self.fifo.iter().copied().collect(),
            QueueDiscipline::PriorityByDistance => {
                let mut v: Vec<_> = self.heap.iter().map(|Reverse(e)| *e).collect();
                v.sort();
                v.into_iter().map(|(_, k)| k).collect()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PropagationStats {
    pub pops: usize,
    pub expanded: usize,
    pub patched: usize,
    pub pushes: usize,
}

/// Slack below which a quasi-Euclidean path length does not count as shorter.
const QUASI_EPS: f64 = 1e-12;

/// A proposed closest obstacle for a voxel.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    coc: Coc,
    dis: f64,
    dis_sq: i64,
}

/// The parts of an observed neighbour the update needs.
#[derive(Clone, Copy, Debug)]
struct NeighborView {
    pos: VoxelKey,
    coc: Coc,
    dis: f64,
    dis_sq: i64,
}

/// Runs the update algorithms over one field layer of a [`VoxelStore`].
pub struct Propagator<'a> {
    store: &'a mut VoxelStore,
    layer: Layer,
    config: &'a EsdfConfig,
    occupied_threshold: f32,
    patch_enabled: bool,
    nbrs: Vec<NeighborView>,
    pub stats: PropagationStats,
}

impl<'a> Propagator<'a> {
    pub fn new(store: &'a mut VoxelStore, layer: Layer, config: &'a EsdfConfig, occupied_threshold: f32) -> Self {
        Self {
            store,
            layer,
            config,
            occupied_threshold,
            patch_enabled: true,
            nbrs: Vec::with_capacity(config.connectivity.degree()),
            stats: PropagationStats::default(),
        }
    }

    /// Disables the re-check of popped voxels. Only for demonstrating what
    /// goes wrong without it.
    pub fn with_patch(mut self, enabled: bool) -> Self {
        self.patch_enabled = enabled;
        self
    }

    /// Whether `key` is an obstacle for this layer: occupied for the
    /// ordinary field, observed-free for the complement.
    fn is_obstacle(&self, key: VoxelKey) -> bool {
        match self.store.get(key) {
            Some(r) if r.obs => {
                let occupied = r.occ >= self.occupied_threshold;
                match self.layer {
                    Layer::Obstacle => occupied,
                    Layer::Complement => !occupied,
                }
            }
            _ => false,
        }
    }

    /// Moves `key` into the list of `c.coc` and stores the new distance.
    fn assign(&mut self, key: VoxelKey, c: Candidate) -> Result<()> {
        self.store.relink(self.layer, key, c.coc, c.dis, c.dis_sq)
    }

    /// Fills `self.nbrs` with the observed neighbours of `key`.
    fn gather(&mut self, key: VoxelKey) {
        let layer = self.layer;
        let nbrs = &mut self.nbrs;
        nbrs.clear();
        self.store.for_each_neighbor(key, self.config.connectivity, |r| {
            let f = r.field(layer);
            nbrs.push(NeighborView {
                pos: r.pos,
                coc: f.coc,
                dis: f.dis,
                dis_sq: f.dis_sq,
            });
        });
    }

    /// Best improvement for `key` among the gathered neighbours' still-existing
    /// closest obstacles, measured against `current`.
    fn best_among_gathered(&self, key: VoxelKey, current: &FieldCell) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        match self.config.update_rule {
            UpdateRule::EuclideanClosestObstacle => {
                let mut bar = current.dis_sq;
                for n in &self.nbrs {
                    let Coc::Voxel(o) = n.coc else { continue };
                    let d = o.dist_sq(key);
                    if d < bar && self.is_obstacle(o) {
                        bar = d;
                        best = Some(Candidate {
                            coc: n.coc,
                            dis: 0.0,
                            dis_sq: d,
                        });
                    }
                }
                best.map(|c| Candidate {
                    dis: (c.dis_sq as f64).sqrt(),
                    ..c
                })
            }
            UpdateRule::QuasiEuclidean => {
                let mut bar = current.dis;
                for n in &self.nbrs {
                    let Coc::Voxel(o) = n.coc else { continue };
                    let dis = n.dis + n.pos.dist(key);
                    if dis < bar - QUASI_EPS && self.is_obstacle(o) {
                        bar = dis;
                        best = Some(Candidate {
                            coc: n.coc,
                            dis,
                            dis_sq: o.dist_sq(key),
                        });
                    }
                }
                best
            }
        }
    }

    /// Neighbours of `cur` that improve by taking over its closest obstacle.
    fn expansion(&self, cur: VoxelKey, cell: &FieldCell, out: &mut Vec<(VoxelKey, Candidate)>) {
        out.clear();
        let Coc::Voxel(o) = cell.coc else { return };
        match self.config.update_rule {
            UpdateRule::EuclideanClosestObstacle => {
                for n in &self.nbrs {
                    let d = o.dist_sq(n.pos);
                    if d < n.dis_sq {
                        let c = Candidate {
                            coc: cell.coc,
                            dis: (d as f64).sqrt(),
                            dis_sq: d,
                        };
                        out.push((n.pos, c));
                    }
                }
            }
            UpdateRule::QuasiEuclidean => {
                for n in &self.nbrs {
                    let dis = cell.dis + cur.dist(n.pos);
                    if dis < n.dis - QUASI_EPS {
                        let c = Candidate {
                            coc: cell.coc,
                            dis,
                            dis_sq: o.dist_sq(n.pos),
                        };
                        out.push((n.pos, c));
                    }
                }
            }
        }
    }

    fn best_from_neighbors(&mut self, key: VoxelKey, current: &FieldCell) -> Option<Candidate> {
        self.gather(key);
        self.best_among_gathered(key, current)
    }

    /// Initialization: turns the epoch's insert and delete queues into the
    /// update queue.
    pub fn initialize(
        &mut self,
        insert_queue: &[VoxelKey],
        delete_queue: &[VoxelKey],
        queue: &mut WorkQueue,
    ) -> Result<usize> {
        let layer = self.layer;
        let mut pushed = 0;
        for &cur in insert_queue {
            let old = self.store.cell(layer, cur)?.coc;
            self.store.delete_from_dll(layer, old, cur)?;
            let cell = self.store.cell_mut(layer, cur)?;
            cell.coc = Coc::Voxel(cur);
            cell.dis = 0.0;
            cell.dis_sq = 0;
            self.store.insert_into_dll(layer, Coc::Voxel(cur), cur)?;
            queue.push(cur, 0.0);
            pushed += 1;
        }

        for &cur in delete_queue {
            let owner = Coc::Voxel(cur);
            for vox in self.store.iterate_dll(layer, owner)? {
                self.store.delete_from_dll(layer, owner, vox)?;
                self.store.cell_mut(layer, vox)?.reset_distance();
                let reset = *self.store.cell(layer, vox)?;
                match self.best_from_neighbors(vox, &reset) {
                    Some(c) => {
                        let cell = self.store.cell_mut(layer, vox)?;
                        cell.coc = c.coc;
                        cell.dis = c.dis;
                        cell.dis_sq = c.dis_sq;
                        self.store.insert_into_dll(layer, c.coc, vox)?;
                        queue.push(vox, c.dis);
                        pushed += 1;
                    }
                    None => self.store.insert_into_dll(layer, Coc::Ideal, vox)?,
                }
            }
        }
        Ok(pushed)
    }

    /// Lets voxels that still have no closest obstacle adopt one from their
    /// neighbours, queueing the ones that did.
    pub fn adopt_unassigned(&mut self, keys: &[VoxelKey], queue: &mut WorkQueue) -> Result<usize> {
        let mut pushed = 0;
        for &key in keys {
            let cell = *self.store.cell(self.layer, key)?;
            if !cell.coc.is_ideal() {
                continue;
            }
            if let Some(c) = self.best_from_neighbors(key, &cell) {
                self.assign(key, c)?;
                queue.push(key, c.dis);
                pushed += 1;
            }
        }
        Ok(pushed)
    }

    /// Breadth-first propagation until the queue is empty.
    pub fn propagate(&mut self, queue: &mut WorkQueue) -> Result<()> {
        let layer = self.layer;
        let limit =
            self.store.index().memory_stats().allocated_voxel_records.max(1) * self.config.connectivity.degree();
        let mut updates: Vec<(VoxelKey, Candidate)> = Vec::with_capacity(self.config.connectivity.degree());

        while let Some((cur, queued_at)) = queue.pop() {
            self.stats.pops += 1;
            let cell = *self.store.cell(layer, cur)?;
            if let Some(p) = queued_at {
                // Stale heap entry: the voxel improved after being queued.
                if p > cell.dis {
                    continue;
                }
            }

            self.gather(cur);
            if self.patch_enabled {
                if let Some(c) = self.best_among_gathered(cur, &cell) {
                    self.assign(cur, c)?;
                    queue.push(cur, c.dis);
                    self.stats.patched += 1;
                    self.stats.pushes += 1;
                    continue;
                }
            }

            self.stats.expanded += 1;
            self.expansion(cur, &cell, &mut updates);
            for &(key, c) in &updates {
                self.assign(key, c)?;
                queue.push(key, c.dis);
                self.stats.pushes += 1;
            }
            if queue.len() > limit {
                return Err(Error::NonTermination { limit });
            }
        }
        Ok(())
    }
}

/// Full-scan check of the fixed-point condition: no observed voxel's closest
/// obstacle would improve any observed neighbour. Returns violating
/// `(voxel, neighbour)` pairs.
pub fn fixed_point_violations(
    store: &VoxelStore,
    layer: Layer,
    connectivity: Connectivity,
) -> Vec<(VoxelKey, VoxelKey)> {
    let mut out = Vec::new();
    for v in store.index().iter().filter(|r| r.obs) {
        let coc = v.field(layer).coc;
        if coc.is_ideal() {
            continue;
        }
        store.for_each_neighbor(v.pos, connectivity, |u| {
            if coc.dist_sq(u.pos) < u.field(layer).dis_sq {
                out.push((v.pos, u.pos));
            }
        });
    }
    out
}
