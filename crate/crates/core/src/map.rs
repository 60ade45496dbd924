use std::time::{Duration, Instant};

use nalgebra::{Point3, Vector3};
use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::esdf::{fixed_point_violations, EsdfConfig, Propagator, WorkQueue};
use crate::index::{IndexConfig, MemoryStats};
use crate::key::VoxelKey;
use crate::occupancy::{CrossingTracker, OccState, OccupancyConfig};
use crate::store::VoxelStore;
use crate::voxel::{Coc, Layer, VoxelInfo};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MapConfig {
    pub index: IndexConfig,
    pub occupancy: OccupancyConfig,
    pub esdf: EsdfConfig,
}

/// Outcome of one [`EsdfMap::run_epoch`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochReport {
    pub inserted: usize,
    pub deleted: usize,
    pub newly_observed: usize,
    /// Voxels queued by initialization (including late adoption of newly
    /// observed voxels).
    pub k_initialized: usize,
    /// Queue pops that expanded to neighbours.
    pub n_expanded: usize,
    pub pops: usize,
    pub m_observed_total: usize,
    pub wall_time: Duration,
}

impl EpochReport {
    pub fn is_noop(&self) -> bool {
        self.inserted == 0 && self.deleted == 0 && self.newly_observed == 0
    }
}

/// Result of a distance query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceQuery {
    /// Meters; `+inf` where unknown or no obstacle is reachable.
    pub distance: f64,
    pub observed: bool,
}

/// Occupancy grid plus incrementally maintained Euclidean distance field.
#[derive(Clone, Debug)]
pub struct EsdfMap {
    store: VoxelStore,
    occupancy: OccupancyConfig,
    esdf: EsdfConfig,
    pub(crate) epoch_tracker: CrossingTracker,
    pub(crate) last_timestamp: Option<f64>,
    observed: usize,
    patch_enabled: bool,
}

impl EsdfMap {
    pub fn new(config: MapConfig) -> Result<Self> {
        config.occupancy.validate()?;
        Ok(Self {
            store: VoxelStore::new(config.index)?,
            occupancy: config.occupancy,
            esdf: config.esdf,
            epoch_tracker: CrossingTracker::default(),
            last_timestamp: None,
            observed: 0,
            patch_enabled: true,
        })
    }

    pub fn store(&self) -> &VoxelStore {
        &self.store
    }

    pub(crate) fn store_mut(&mut self) -> &mut VoxelStore {
        &mut self.store
    }

    pub fn occupancy_config(&self) -> &OccupancyConfig {
        &self.occupancy
    }

    pub fn esdf_config(&self) -> &EsdfConfig {
        &self.esdf
    }

    pub fn voxel(&self, key: VoxelKey) -> Option<&VoxelInfo> {
        self.store.get(key)
    }

    pub fn memory_stats(&self) -> MemoryStats {
        self.store.index().memory_stats()
    }

    /// Number of distinct voxels ever observed.
    pub fn observed_count(&self) -> usize {
        self.observed
    }

    /// Turns off the per-pop neighbour re-check. Exists so tests can show
    /// the inconsistency it prevents; never disable it otherwise.
    #[doc(hidden)]
    pub fn set_observation_patch(&mut self, enabled: bool) {
        self.patch_enabled = enabled;
    }

    /// Marks `key` observed, linking it under the point at infinity the
    /// first time.
    pub(crate) fn observe(&mut self, key: VoxelKey) -> Result<()> {
        let rec = self.store.index_mut().allocate(key)?;
        if rec.obs {
            return Ok(());
        }
        rec.obs = true;
        self.observed += 1;
        self.store.insert_into_dll(Layer::Obstacle, Coc::Ideal, key)?;
        if self.esdf.signed_mode {
            self.store.insert_into_dll(Layer::Complement, Coc::Ideal, key)?;
        }
        Ok(())
    }

    fn layers(&self) -> &'static [Layer] {
        if self.esdf.signed_mode {
            &[Layer::Obstacle, Layer::Complement]
        } else {
            &[Layer::Obstacle]
        }
    }

    /// Updates the distance field for every occupancy change since the
    /// previous epoch.
    pub fn run_epoch(&mut self) -> Result<EpochReport> {
        let start = Instant::now();
        let touched = self.epoch_tracker.drain();
        let mut report = EpochReport::default();
        let newly: Vec<VoxelKey> = touched
            .iter()
            .filter(|(_, s)| *s == OccState::Unknown)
            .map(|&(k, _)| k)
            .collect();
        report.newly_observed = newly.len();

        for &layer in self.layers() {
            let target = match layer {
                Layer::Obstacle => OccState::Occupied,
                Layer::Complement => OccState::Free,
            };
            let mut inserts = Vec::new();
            let mut deletes = Vec::new();
            for &(k, before) in &touched {
                let after = self.occupancy_state(k);
                match (before == target, after == target) {
                    (false, true) => inserts.push(k),
                    (true, false) => deletes.push(k),
                    _ => {}
                }
            }
            if layer == Layer::Obstacle {
                report.inserted = inserts.len();
                report.deleted = deletes.len();
            }

            let threshold = self.occupancy.occupied_threshold;
            let mut queue = WorkQueue::new(self.esdf.queue_discipline);
            let mut p = Propagator::new(&mut self.store, layer, &self.esdf, threshold).with_patch(self.patch_enabled);
            report.k_initialized += p.initialize(&inserts, &deletes, &mut queue)?;
            p.propagate(&mut queue)?;
            report.k_initialized += p.adopt_unassigned(&newly, &mut queue)?;
            p.propagate(&mut queue)?;
            report.n_expanded += p.stats.expanded;
            report.pops += p.stats.pops;
        }
        report.m_observed_total = self.observed;
        report.wall_time = start.elapsed();
        Ok(report)
    }

    /// Whether any occupancy change is waiting for an epoch.
    pub fn has_pending_changes(&self) -> bool {
        !self.epoch_tracker.is_empty()
    }

    /// Distance in voxels stored at `key`, `None` when unobserved.
    pub fn distance_voxels(&self, key: VoxelKey) -> Option<f64> {
        self.store.get(key).filter(|r| r.obs).map(|r| r.dis())
    }

    fn layer_value(&self, key: VoxelKey, signed: bool) -> Option<f64> {
        let r = self.store.get(key).filter(|r| r.obs)?;
        if signed {
            Some(r.field(Layer::Obstacle).dis - r.field(Layer::Complement).dis)
        } else {
            Some(r.dis())
        }
    }

    fn trilinear(&self, point: &Point3<f64>, signed: bool) -> Option<f64> {
        let vs = self.occupancy.voxel_size;
        let u = point.coords / vs - Vector3::repeat(0.5);
        let base = u.map(f64::floor);
        let frac = u - base;
        let b = VoxelKey::new(base.x as i32, base.y as i32, base.z as i32);
        let mut acc = 0.0;
        for dz in 0..2 {
            for dy in 0..2 {
                for dx in 0..2 {
                    let v = self.layer_value(b + VoxelKey::new(dx, dy, dz), signed)?;
                    if !v.is_finite() {
                        return None;
                    }
                    let w = (if dx == 1 { frac.x } else { 1.0 - frac.x })
                        * (if dy == 1 { frac.y } else { 1.0 - frac.y })
                        * (if dz == 1 { frac.z } else { 1.0 - frac.z });
                    acc += w * v;
                }
            }
        }
        Some(acc * vs)
    }

    fn query(&self, point: &Point3<f64>, interpolate: bool, signed: bool) -> DistanceQuery {
        if interpolate {
            if let Some(d) = self.trilinear(point, signed) {
                return DistanceQuery {
                    distance: d,
                    observed: true,
                };
            }
        }
        match self.layer_value(self.occupancy.voxel_of(point), signed) {
            Some(v) => DistanceQuery {
                distance: v * self.occupancy.voxel_size,
                observed: true,
            },
            None => DistanceQuery {
                distance: f64::INFINITY,
                observed: false,
            },
        }
    }

    /// Distance to the closest obstacle, meters. With `interpolate`, blends
    /// the eight surrounding voxel centres when all are observed and finite,
    /// falling back to the containing voxel otherwise.
    pub fn query_distance(&self, point: &Point3<f64>, interpolate: bool) -> DistanceQuery {
        self.query(point, interpolate, false)
    }

    /// Central-difference gradient of the interpolated distance.
    pub fn query_gradient(&self, point: &Point3<f64>) -> Result<Vector3<f64>> {
        let h = self.occupancy.voxel_size;
        let mut g = Vector3::zeros();
        for axis in 0..3 {
            let mut step = Vector3::zeros();
            step[axis] = h;
            let fwd = self.trilinear(&(point + step), false);
            let bwd = self.trilinear(&(point - step), false);
            match (fwd, bwd) {
                (Some(f), Some(b)) => g[axis] = (f - b) / (2.0 * h),
                _ => return Err(Error::GradientUnavailable),
            }
        }
        Ok(g)
    }

    /// Signed distance, meters: positive in free space, negative inside
    /// obstacles. Requires signed mode.
    pub fn signed_distance(&self, point: &Point3<f64>, interpolate: bool) -> Result<DistanceQuery> {
        if !self.esdf.signed_mode {
            return Err(Error::Config("signed distances need esdf signed_mode".into()));
        }
        Ok(self.query(point, interpolate, true))
    }

    /// Observed voxel keys, sorted.
    pub fn observed_keys(&self) -> Vec<VoxelKey> {
        let mut v: Vec<_> = self.store.index().iter().filter(|r| r.obs).map(|r| r.pos).collect();
        v.sort_unstable();
        v
    }

    /// Occupied voxel keys, sorted.
    pub fn occupied_keys(&self) -> Vec<VoxelKey> {
        let t = self.occupancy.occupied_threshold;
        let mut v: Vec<_> = self
            .store
            .index()
            .iter()
            .filter(|r| r.obs && r.occ >= t)
            .map(|r| r.pos)
            .collect();
        v.sort_unstable();
        v
    }

    /// Neighbour pairs that break the fixed-point condition in `layer`.
    pub fn fixed_point_violations(&self, layer: Layer) -> Vec<(VoxelKey, VoxelKey)> {
        fixed_point_violations(&self.store, layer, self.esdf.connectivity)
    }

    /// Walks every closest-obstacle list of `layer` and checks that together
    /// they partition the observed voxels and agree with each voxel's `coc`.
    pub fn check_list_partition(&self, layer: Layer) -> Result<()> {
        let mut seen = FxHashSet::default();
        let mut owners = vec![Coc::Ideal];
        owners.extend(
            self.store
                .index()
                .iter()
                .filter(|r| r.field(layer).head.is_some())
                .map(|r| Coc::Voxel(r.pos)),
        );
        for owner in owners {
            for m in self.store.iterate_dll(layer, owner)? {
                let rec = self.store.get(m).ok_or(Error::Unallocated(m))?;
                if !rec.obs {
                    return Err(Error::ListCorruption(format!("unobserved {m} is linked")));
                }
                if rec.field(layer).coc != owner {
                    return Err(Error::ListCorruption(format!(
                        "{m} linked under {owner:?} but its coc is {:?}",
                        rec.field(layer).coc
                    )));
                }
                if !seen.insert(m) {
                    return Err(Error::ListCorruption(format!("{m} appears twice")));
                }
            }
        }
        if seen.len() != self.observed {
            return Err(Error::ListCorruption(format!(
                "{} voxels linked but {} observed",
                seen.len(),
                self.observed
            )));
        }
        Ok(())
    }
}
