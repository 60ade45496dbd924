//! Synthetic worlds ray-cast into sensor frames.
//!
//! Scenario files are TOML:
//!
//! ```toml
//! id = "room"
//! seed = 7
//! frame_period = 0.1
//!
//! [world]
//! min = [0.0, 0.0, 0.0]
//! max = [4.0, 4.0, 2.0]
//! walls = true
//!
//! [[obstacles]]
//! kind = "box"
//! min = [1.0, 1.0, 0.0]
//! max = [1.5, 1.5, 1.0]
//! disappear = 5
//!
//! [[obstacles]]
//! kind = "sphere"
//! center = [3.0, 3.0, 1.0]
//! radius = 0.4
//!
//! [sensor]
//! max_range = 3.0
//! rays_per_frame = 2000
//! model = "fan"
//! horizontal_fov_deg = 90.0
//! vertical_fov_deg = 60.0
//!
//! [[trajectory]]
//! position = [0.5, 0.5, 1.0]
//! yaw_deg = 45.0
//! ```

use std::f64::consts::PI;
use std::path::Path;

use esdfmap::nalgebra::{Point3, UnitQuaternion, Vector3};
use esdfmap::{Pose, SensorFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ReplayError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub seed: u64,
    /// Seconds between consecutive frames.
    #[serde(default = "default_frame_period")]
    pub frame_period: f64,
    pub world: WorldSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub random_obstacles: Option<RandomObstacles>,
    pub sensor: SensorSpec,
    #[serde(default)]
    pub trajectory: Vec<PoseSpec>,
    #[serde(default)]
    pub orbit: Option<OrbitSpec>,
}

fn default_frame_period() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Treat the faces of the world box as obstacles.
    #[serde(default)]
    pub walls: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObstacleSpec {
    Box {
        min: [f64; 3],
        max: [f64; 3],
        #[serde(default)]
        appear: Option<usize>,
        #[serde(default)]
        disappear: Option<usize>,
    },
    Sphere {
        center: [f64; 3],
        radius: f64,
        #[serde(default)]
        appear: Option<usize>,
        #[serde(default)]
        disappear: Option<usize>,
    },
}

/// Boxes placed uniformly inside the world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomObstacles {
    pub count: usize,
    pub min_size: f64,
    pub max_size: f64,
    /// Fraction of boxes given a random disappearance frame.
    #[serde(default)]
    pub transient_fraction: f64,
    /// Minimum distance from any trajectory position to a box.
    #[serde(default)]
    pub clearance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorModel {
    Fan,
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub max_range: f64,
    pub rays_per_frame: usize,
    pub model: SensorModel,
    #[serde(default = "default_hfov")]
    pub horizontal_fov_deg: f64,
    #[serde(default = "default_vfov")]
    pub vertical_fov_deg: f64,
    /// Rays without a return are reported at twice `max_range`, so the
    /// integrator clears space along them without registering a hit.
    #[serde(default = "default_true")]
    pub clear_on_miss: bool,
}

fn default_hfov() -> f64 {
    90.0
}

fn default_vfov() -> f64 {
    60.0
}

fn default_true() -> bool {
    true
}

/// Sensor pose; the sensor looks along its local +x axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw_deg: f64,
    #[serde(default)]
    pub pitch_deg: f64,
}

/// Circular path around `center`, always facing it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSpec {
    pub center: [f64; 3],
    pub radius: f64,
    pub frames: usize,
    #[serde(default = "default_turns")]
    pub turns: f64,
}

fn default_turns() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Box { min: Vector3<f64>, max: Vector3<f64> },
    Sphere { center: Vector3<f64>, radius: f64 },
}

impl Shape {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        match *self {
            Shape::Box { min, max } => (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]),
            Shape::Sphere { center, radius } => (p - center).norm() <= radius,
        }
    }

    /// Smallest `t >= 0` with `origin + t * dir` on the surface, for an
    /// origin outside the shape and unit `dir`.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        if self.contains(origin) {
            return None;
        }
        match *self {
            Shape::Box { min, max } => {
                let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
                for i in 0..3 {
                    if dir[i] == 0.0 {
                        if origin[i] < min[i] || origin[i] > max[i] {
                            return None;
                        }
                        continue;
                    }
                    let a = (min[i] - origin[i]) / dir[i];
                    let b = (max[i] - origin[i]) / dir[i];
                    lo = lo.max(a.min(b));
                    hi = hi.min(a.max(b));
                }
                (lo <= hi).then_some(lo)
            }
            Shape::Sphere { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let disc = b * b - (oc.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t >= 0.0).then_some(t)
            }
        }
    }

    /// Distance from `p` to the surface.
    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Shape::Box { min, max } => {
                let outside = Vector3::from_fn(|i, _| (min[i] - p[i]).max(p[i] - max[i]).max(0.0));
                if outside.norm_squared() > 0.0 {
                    outside.norm()
                } else {
                    (0..3)
                        .map(|i| (p[i] - min[i]).min(max[i] - p[i]))
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Shape::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
        }
    }
}

/// An obstacle with its activity window in frame indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    pub appear: usize,
    pub disappear: Option<usize>,
}

impl Obstacle {
    pub fn active(&self, frame: usize) -> bool {
        frame >= self.appear && self.disappear.is_none_or(|d| frame < d)
    }
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

fn spec_err(msg: impl Into<String>) -> ReplayError {
    ReplayError::Spec(msg.into())
}

fn check_schedule(i: usize, appear: Option<usize>, disappear: Option<usize>) -> Result<()> {
    if let (Some(a), Some(d)) = (appear, disappear) {
        if d <= a {
            return Err(spec_err(format!(
                "obstacle {i}: disappear ({d}) must come after appear ({a})"
            )));
        }
    }
    Ok(())
}

impl ScenarioSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ReplayError::io(path, e))?;
        let mut spec: ScenarioSpec = toml::from_str(&text).map_err(|e| spec_err(format!("{}: {e}", path.display())))?;
        if spec.id.is_none() {
            spec.id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |a: &[f64]| a.iter().all(|v| v.is_finite());
        let (wmin, wmax) = (vec3(self.world.min), vec3(self.world.max));
        if !finite(&self.world.min) || !finite(&self.world.max) || (0..3).any(|i| wmin[i] >= wmax[i]) {
            return Err(spec_err("world box must have positive extent on every axis"));
        }
        if !(self.frame_period > 0.0 && self.frame_period.is_finite()) {
            return Err(spec_err("frame_period must be positive"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            match o {
                ObstacleSpec::Box {
                    min,
                    max,
                    appear,
                    disappear,
                } => {
                    if !finite(min) || !finite(max) || (0..3).any(|a| min[a] >= max[a]) {
                        return Err(spec_err(format!("obstacle {i}: box has zero volume")));
                    }
                    check_schedule(i, *appear, *disappear)?;
                }
                ObstacleSpec::Sphere {
                    center,
                    radius,
                    appear,
                    disappear,
                } => {
                    if !finite(center) || !(*radius > 0.0 && radius.is_finite()) {
                        return Err(spec_err(format!("obstacle {i}: sphere has zero volume")));
                    }
                    check_schedule(i, *appear, *disappear)?;
                }
            }
        }
        if let Some(r) = &self.random_obstacles {
            if !(r.min_size > 0.0 && r.min_size <= r.max_size && r.max_size.is_finite()) {
                return Err(spec_err("random_obstacles: need 0 < min_size <= max_size"));
            }
            if !(0.0..=1.0).contains(&r.transient_fraction) || !(r.clearance >= 0.0) {
                return Err(spec_err(
                    "random_obstacles: transient_fraction in [0,1], clearance >= 0",
                ));
            }
        }
        let s = &self.sensor;
        if !(s.max_range > 0.0 && s.max_range.is_finite()) || s.rays_per_frame == 0 {
            return Err(spec_err("sensor: max_range and rays_per_frame must be positive"));
        }
        let fov_ok = |f: f64| f > 0.0 && f <= 360.0;
        if s.model == SensorModel::Fan
            && !(fov_ok(s.horizontal_fov_deg) && s.vertical_fov_deg > 0.0 && s.vertical_fov_deg <= 180.0)
        {
            return Err(spec_err("sensor: field of view out of range"));
        }
        if let Some(o) = &self.orbit {
            if !finite(&o.center) || !(o.radius >= 0.0) || o.frames == 0 || !o.turns.is_finite() {
                return Err(spec_err("orbit: invalid parameters"));
            }
        }
        if self
            .trajectory
            .iter()
            .any(|p| !finite(&p.position) || !p.yaw_deg.is_finite() || !p.pitch_deg.is_finite())
        {
            return Err(spec_err("trajectory: non-finite pose"));
        }
        if self.trajectory.is_empty() && self.orbit.is_none() {
            return Err(spec_err("need at least one trajectory pose or an orbit"));
        }
        Ok(())
    }

    /// Sensor poses in frame order: the explicit trajectory, then the orbit.
    pub fn poses(&self) -> Vec<Pose> {
        let mut out: Vec<Pose> = self
            .trajectory
            .iter()
            .map(|p| Pose {
                translation: vec3(p.position),
                rotation: UnitQuaternion::from_euler_angles(0.0, p.pitch_deg.to_radians(), p.yaw_deg.to_radians()),
            })
            .collect();
        if let Some(o) = &self.orbit {
            for i in 0..o.frames {
                let a = 2.0 * PI * o.turns * i as f64 / o.frames as f64;
                let c = vec3(o.center);
                let pos = c + Vector3::new(o.radius * a.cos(), o.radius * a.sin(), 0.0);
                let yaw = (c.y - pos.y).atan2(c.x - pos.x);
                out.push(Pose {
                    translation: pos,
                    rotation: UnitQuaternion::from_euler_angles(0.0, 0.0, yaw),
                });
            }
        }
        out
    }

    /// Explicit obstacles followed by the seeded random ones.
    pub fn obstacles(&self) -> Vec<Obstacle> {
        let mut out: Vec<Obstacle> = self
            .obstacles
            .iter()
            .map(|o| match *o {
                ObstacleSpec::Box {
                    min,
                    max,
                    appear,
                    disappear,
                } => Obstacle {
                    shape: Shape::Box {
                        min: vec3(min),
                        max: vec3(max),
                    },
                    appear: appear.unwrap_or(0),
                    disappear,
                },
                ObstacleSpec::Sphere {
                    center,
                    radius,
                    appear,
                    disappear,
                } => Obstacle {
                    shape: Shape::Sphere {
                        center: vec3(center),
                        radius,
                    },
                    appear: appear.unwrap_or(0),
                    disappear,
                },
            })
            .collect();
        if let Some(r) = &self.random_obstacles {
            let positions: Vec<Vector3<f64>> = self.poses().iter().map(|p| p.translation).collect();
            let frames = positions.len().max(2);
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(u64::MAX);
            let (wmin, wmax) = (vec3(self.world.min), vec3(self.world.max));
            let mut placed = 0;
            let mut attempts = 0;
            while placed < r.count && attempts < r.count * 100 {
                attempts += 1;
                let size = Vector3::from_fn(|_, _| rng.random_range(r.min_size..=r.max_size));
                let lo = Vector3::from_fn(|i, _| {
                    let span = (wmax[i] - wmin[i] - size[i]).max(0.0);
                    wmin[i] + rng.random::<f64>() * span
                });
                let shape = Shape::Box {
                    min: lo,
                    max: lo + size,
                };
                let transient = rng.random::<f64>() < r.transient_fraction;
                let disappear = transient.then(|| rng.random_range(1..frames));
                if positions
                    .iter()
                    .any(|p| shape.contains(p) || shape.surface_distance(p) < r.clearance)
                {
                    continue;
                }
                out.push(Obstacle {
                    shape,
                    appear: 0,
                    disappear,
                });
                placed += 1;
            }
        }
        out
    }
}

/// Frame stream for a validated scenario.
#[derive(Clone, Debug)]
pub struct ScenarioFrames {
    spec: ScenarioSpec,
    poses: Vec<Pose>,
    obstacles: Vec<Obstacle>,
    next: usize,
}

impl ScenarioFrames {
    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    /// Sensor-frame unit ray directions for frame `index`.
    fn directions(&self, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
        let s = &self.spec.sensor;
        let n = s.rays_per_frame;
        match s.model {
            SensorModel::Sphere => (0..n)
                .map(|_| {
                    let z: f64 = rng.random_range(-1.0..=1.0);
                    let phi: f64 = rng.random_range(0.0..2.0 * PI);
                    let r = (1.0 - z * z).sqrt();
                    Vector3::new(r * phi.cos(), r * phi.sin(), z)
                })
                .collect(),
            SensorModel::Fan => {
                let (h, v) = (s.horizontal_fov_deg.to_radians(), s.vertical_fov_deg.to_radians());
                let cols = ((n as f64 * h / v).sqrt().ceil() as usize).clamp(1, n);
                let rows = n.div_ceil(cols);
                let mut out = Vec::with_capacity(n);
                'grid: for r in 0..rows {
                    for c in 0..cols {
                        if out.len() == n {
                            break 'grid;
                        }
                        let yaw = -h / 2.0 + h * (c as f64 + rng.random::<f64>()) / cols as f64;
                        let pitch = -v / 2.0 + v * (r as f64 + rng.random::<f64>()) / rows as f64;
                        out.push(Vector3::new(
                            pitch.cos() * yaw.cos(),
                            pitch.cos() * yaw.sin(),
                            pitch.sin(),
                        ));
                    }
                }
                out
            }
        }
    }

    fn cast(&self, index: usize, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let mut best = self
            .obstacles
            .iter()
            .filter(|o| o.active(index))
            .filter_map(|o| o.shape.intersect(origin, dir))
            .fold(f64::INFINITY, f64::min);
        if self.spec.world.walls {
            let (lo, hi) = (vec3(self.spec.world.min), vec3(self.spec.world.max));
            let exit = (0..3)
                .filter(|&i| dir[i] != 0.0)
                .map(|i| ((if dir[i] > 0.0 { hi[i] } else { lo[i] }) - origin[i]) / dir[i])
                .fold(f64::INFINITY, f64::min);
            if exit >= 0.0 {
                best = best.min(exit);
            }
        }
        best.is_finite().then_some(best)
    }

    fn frame(&self, index: usize) -> SensorFrame {
        let pose = self.poses[index].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(index as u64);
        let range = self.spec.sensor.max_range;
        let points = self
            .directions(&mut rng)
            .into_iter()
            .filter_map(|d| {
                let world_dir = pose.rotation * d;
                match self.cast(index, &pose.translation, &world_dir) {
                    Some(t) if t <= range => Some(Point3::from(d * t)),
                    _ if self.spec.sensor.clear_on_miss => Some(Point3::from(d * (2.0 * range))),
                    _ => None,
                }
            })
            .collect();
        SensorFrame {
            timestamp: index as f64 * self.spec.frame_period,
            pose,
            points,
        }
    }
}

impl Iterator for ScenarioFrames {
    type Item = SensorFrame;

    fn next(&mut self) -> Option<SensorFrame> {
        if self.next >= self.poses.len() {
            return None;
        }
        let f = self.frame(self.next);
        self.next += 1;
        Some(f)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.poses.len() - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for ScenarioFrames {}

/// Validates `spec` and returns its frame stream.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<ScenarioFrames> {
    spec.validate()?;
    Ok(ScenarioFrames {
        poses: spec.poses(),
        obstacles: spec.obstacles(),
        spec: spec.clone(),
        next: 0,
    })
}
