//! Occupancy fusion: posed point clouds are ray-cast into the log-odds grid
//! and voxels whose state crosses the occupied threshold are queued.

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::key::VoxelKey;
use crate::map::EsdfMap;

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyConfig {
    /// Edge length of a voxel, meters.
    pub voxel_size: f64,
    pub log_odds_hit: f32,
    pub log_odds_miss: f32,
    pub log_odds_min: f32,
    pub log_odds_max: f32,
    pub occupied_threshold: f32,
    /// Rays longer than this are clamped and only clear space. Meters.
    pub max_ray_range: f64,
    /// Binary insert-only occupancy: a voxel's state is fixed on first
    /// observation, except that free voxels may still become occupied.
    pub deterministic: bool,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.1,
            log_odds_hit: 0.85,
            log_odds_miss: -0.4,
            log_odds_min: -2.0,
            log_odds_max: 3.5,
            // logit(0.7)
            occupied_threshold: (0.7f32 / 0.3).ln(),
            max_ray_range: 5.0,
            deterministic: false,
        }
    }
}

impl OccupancyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.voxel_size > 0.0
            && self.voxel_size.is_finite()
            && self.log_odds_hit > 0.0
            && self.log_odds_miss < 0.0
            && self.log_odds_min < self.occupied_threshold
            && self.occupied_threshold < self.log_odds_max
            && self.max_ray_range > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent occupancy parameters: {self:?}")))
        }
    }

    /// World point to the voxel containing it.
    pub fn voxel_of(&self, p: &Point3<f64>) -> VoxelKey {
        let f = |c: f64| (c / self.voxel_size).floor() as i32;
        VoxelKey::new(f(p.x), f(p.y), f(p.z))
    }

    pub fn voxel_center(&self, k: VoxelKey) -> Point3<f64> {
        let c = |i: i32| (i as f64 + 0.5) * self.voxel_size;
        Point3::new(c(k.x), c(k.y), c(k.z))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self::from_translation(Vector3::zeros())
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            translation,
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn transform(&self, p: &Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }
}

/// One depth measurement with its pose. Points are in the sensor frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorFrame {
    pub timestamp: f64,
    pub pose: Pose,
    pub points: Vec<Point3<f64>>,
}

impl SensorFrame {
    /// Checks finiteness and quaternion normalisation.
    pub fn validate(&self) -> Result<()> {
        let q = self.pose.rotation.quaternion();
        if !self.timestamp.is_finite() {
            return Err(Error::Data("non-finite timestamp".into()));
        }
        if !(q.coords.iter().all(|c| c.is_finite()) && (q.norm() - 1.0).abs() <= 1e-6) {
            return Err(Error::Data(format!(
                "rotation is not a unit quaternion (norm {})",
                q.norm()
            )));
        }
        if !self.pose.translation.iter().all(|c| c.is_finite()) {
            return Err(Error::Data("non-finite translation".into()));
        }
        if let Some(i) = self.points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::Data(format!("point {i} has non-finite coordinates")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OccState {
    Unknown,
    Free,
    Occupied,
}

/// Per-epoch queues and counters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateQueues {
    /// Voxels that became occupied.
    pub insert_queue: Vec<VoxelKey>,
    /// Voxels that stopped being occupied.
    pub delete_queue: Vec<VoxelKey>,
    /// Voxels observed for the first time.
    pub newly_observed: Vec<VoxelKey>,
    pub stats: QueueStats,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueueStats {
    /// Voxels placed on the update queue by initialization.
    pub k_initialized: usize,
    /// Queue pops that expanded to neighbours.
    pub n_expanded: usize,
    /// Distinct voxels observed since the map was created.
    pub m_observed_total: usize,
}

/// Remembers the state each touched voxel had when tracking started, so
/// crossings can be derived as (before, after) pairs.
#[derive(Clone, Debug, Default)]
pub(crate) struct CrossingTracker {
    before: FxHashMap<VoxelKey, OccState>,
    order: Vec<VoxelKey>,
}

impl CrossingTracker {
    pub(crate) fn note(&mut self, key: VoxelKey, state: OccState) {
        if let std::collections::hash_map::Entry::Vacant(e) = self.before.entry(key) {
            e.insert(state);
            self.order.push(key);
        }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Drains the tracker into `(key, before)` pairs in first-touch order.
    pub(crate) fn drain(&mut self) -> Vec<(VoxelKey, OccState)> {
        let before = std::mem::take(&mut self.before);
        std::mem::take(&mut self.order)
            .into_iter()
            .map(|k| (k, before[&k]))
            .collect()
    }
}

/// Voxels crossed by the segment `start → end` (meters), in order, each once,
/// including both endpoint voxels.
pub fn traverse_ray(start: &Point3<f64>, end: &Point3<f64>, voxel_size: f64) -> Vec<VoxelKey> {
    let s = start.coords / voxel_size;
    let e = end.coords / voxel_size;
    let first = [s.x.floor() as i32, s.y.floor() as i32, s.z.floor() as i32];
    let last = [e.x.floor() as i32, e.y.floor() as i32, e.z.floor() as i32];
    let d = e - s;

    let mut cur = first;
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    let mut remaining = [0u32; 3];
    for a in 0..3 {
        remaining[a] = last[a].abs_diff(first[a]);
        if remaining[a] == 0 {
            continue;
        }
        step[a] = if last[a] > first[a] { 1 } else { -1 };
        let boundary = if step[a] > 0 {
            first[a] as f64 + 1.0
        } else {
            first[a] as f64
        };
        t_max[a] = (boundary - s[a]) / d[a];
        t_delta[a] = 1.0 / d[a].abs();
    }

    let total: u32 = remaining.iter().sum();
    let mut out = Vec::with_capacity(total as usize + 1);
    out.push(VoxelKey::from(cur));
    for _ in 0..total {
        let mut axis = usize::MAX;
        for a in 0..3 {
            if remaining[a] > 0 && (axis == usize::MAX || t_max[a] < t_max[axis]) {
                axis = a;
            }
        }
        cur[axis] += step[axis];
        remaining[axis] -= 1;
        t_max[axis] += t_delta[axis];
        out.push(VoxelKey::from(cur));
    }
    out
}

impl EsdfMap {
    /// Occupancy state of a voxel.
    pub fn occupancy_state(&self, key: VoxelKey) -> OccState {
        match self.store().get(key) {
            Some(r) if r.obs => {
                if r.occ >= self.occupancy_config().occupied_threshold {
                    OccState::Occupied
                } else {
                    OccState::Free
                }
            }
            _ => OccState::Unknown,
        }
    }

    /// Ray-casts one frame into the occupancy grid.
    ///
    /// Returns the crossings caused by this frame alone; the map also
    /// accumulates them for the next [`run_epoch`](EsdfMap::run_epoch).
    pub fn integrate_frame(&mut self, frame: &SensorFrame) -> Result<UpdateQueues> {
        frame.validate()?;
        if let Some(prev) = self.last_timestamp {
            if frame.timestamp < prev {
                return Err(Error::Data(format!(
                    "timestamp {} precedes previous frame at {prev}",
                    frame.timestamp
                )));
            }
        }
        self.last_timestamp = Some(frame.timestamp);

        let cfg = self.occupancy_config().clone();
        let origin = Point3::from(frame.pose.translation);
        let mut hits: Vec<VoxelKey> = Vec::new();
        let mut hit_set = FxHashSet::default();
        let mut misses: Vec<VoxelKey> = Vec::new();
        let mut miss_set = FxHashSet::default();

        for p in &frame.points {
            let world = frame.pose.transform(p);
            let v = world - origin;
            let range = v.norm();
            let (end, is_hit) = if range > cfg.max_ray_range {
                (origin + v * (cfg.max_ray_range / range), false)
            } else {
                (world, true)
            };
            let ray = traverse_ray(&origin, &end, cfg.voxel_size);
            let (&last, free) = ray.split_last().expect("ray has at least one voxel");
            let free = if is_hit { free } else { &ray[..] };
            for &k in free {
                if miss_set.insert(k) {
                    misses.push(k);
                }
            }
            if is_hit && hit_set.insert(last) {
                hits.push(last);
            }
        }

        let mut frame_tracker = CrossingTracker::default();
        for &k in misses.iter().filter(|k| !hit_set.contains(k)) {
            self.apply_measurement(k, false, &mut frame_tracker)?;
        }
        for &k in &hits {
            self.apply_measurement(k, true, &mut frame_tracker)?;
        }
        Ok(self.crossings(frame_tracker.drain()))
    }

    /// Sets a voxel directly to a definite state, bypassing ray casting.
    /// Useful for synthetic grids.
    pub fn set_voxel_state(&mut self, key: VoxelKey, occupied: bool) -> Result<()> {
        let before = self.occupancy_state(key);
        let (lo, hi) = (
            self.occupancy_config().log_odds_min,
            self.occupancy_config().log_odds_max,
        );
        self.epoch_tracker.note(key, before);
        self.observe(key)?;
        let rec = self.store_mut().index_mut().get_mut(key).expect("observed");
        rec.occ = if occupied { hi } else { lo };
        Ok(())
    }

    fn apply_measurement(&mut self, key: VoxelKey, hit: bool, frame: &mut CrossingTracker) -> Result<()> {
        let before = self.occupancy_state(key);
        frame.note(key, before);
        self.epoch_tracker.note(key, before);
        let cfg = self.occupancy_config().clone();
        self.observe(key)?;
        let rec = self.store_mut().index_mut().get_mut(key).expect("observed");
        if cfg.deterministic {
            match (before, hit) {
                (_, true) => rec.occ = cfg.log_odds_max,
                (OccState::Unknown, false) => rec.occ = cfg.log_odds_min,
                _ => {}
            }
        } else {
            let delta = if hit { cfg.log_odds_hit } else { cfg.log_odds_miss };
            rec.occ = (rec.occ + delta).clamp(cfg.log_odds_min, cfg.log_odds_max);
        }
        Ok(())
    }

    pub(crate) fn crossings(&self, touched: Vec<(VoxelKey, OccState)>) -> UpdateQueues {
        let mut q = UpdateQueues::default();
        for (k, before) in touched {
            let after = self.occupancy_state(k);
            if before == OccState::Unknown {
                q.newly_observed.push(k);
            }
            match (before == OccState::Occupied, after == OccState::Occupied) {
                (false, true) => q.insert_queue.push(k),
                (true, false) => q.delete_queue.push(k),
                _ => {}
            }
        }
        q.stats.m_observed_total = self.observed_count();
        q
    }
}
