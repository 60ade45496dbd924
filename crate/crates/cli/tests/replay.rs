use std::fs;
use std::path::Path;

use esdfmap::nalgebra::Vector3;
use esdfmap::oracle::evaluate;
use esdfmap::{Connectivity, EsdfMap, MapConfig, SensorFrame};
use esdfmap_cli::replay::{bounding_box, SWEEP_BLOCK_SIZES};
use esdfmap_cli::scenario::{ObstacleSpec, OrbitSpec, PoseSpec, SensorModel, SensorSpec, Shape, WorldSpec};
use esdfmap_cli::{
    generate_scenario, load_dataset, run, write_dataset, Replay, ReplayError, RunConfig, ScenarioSpec, SliceRequest,
    Source, SweepKind,
};

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const POSE_HEADER: &str = "timestamp,tx,ty,tz,qx,qy,qz,qw\n";

fn base_spec() -> ScenarioSpec {
    ScenarioSpec {
        id: Some("unit".into()),
        seed: 11,
        frame_period: 0.1,
        world: WorldSpec {
            min: [-2.0, -2.0, -1.0],
            max: [2.0, 2.0, 1.0],
            walls: false,
        },
        obstacles: vec![],
        random_obstacles: None,
        sensor: SensorSpec {
            max_range: 2.5,
            rays_per_frame: 400,
            model: SensorModel::Fan,
            horizontal_fov_deg: 90.0,
            vertical_fov_deg: 60.0,
            clear_on_miss: true,
        },
        trajectory: vec![PoseSpec {
            position: [-1.5, 0.0, 0.0],
            yaw_deg: 0.0,
            pitch_deg: 0.0,
        }],
        orbit: None,
    }
}

fn room_spec() -> ScenarioSpec {
    let mut spec = base_spec();
    spec.world.walls = true;
    spec.obstacles = vec![
        ObstacleSpec::Box {
            min: [0.0, -0.4, -0.4],
            max: [0.4, 0.4, 0.4],
            appear: None,
            disappear: Some(4),
        },
        ObstacleSpec::Sphere {
            center: [0.5, 1.2, 0.0],
            radius: 0.3,
            appear: Some(2),
            disappear: None,
        },
    ];
    spec.trajectory = vec![];
    spec.orbit = Some(OrbitSpec {
        center: [0.2, 0.0, 0.0],
        radius: 1.5,
        frames: 8,
        turns: 1.0,
    });
    spec.sensor.rays_per_frame = 300;
    spec
}

fn run_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.map.occupancy.voxel_size = 0.2;
    cfg.map.occupancy.max_ray_range = 2.5;
    cfg.update_period = 0.2;
    cfg.out_dir = out.to_path_buf();
    cfg
}

fn field_snapshot(map: &EsdfMap) -> Vec<(esdfmap::VoxelKey, f64)> {
    let mut keys = map.observed_keys();
    keys.sort();
    keys.into_iter().map(|k| (k, map.distance_voxels(k).unwrap())).collect()
}

#[test]
fn empty_pose_file_gives_empty_stream() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "poses.csv", POSE_HEADER);
    let (frames, warnings) = load_dataset(dir.path()).unwrap();
    assert!(frames.is_empty());
    assert_eq!(warnings, 0);
}

#[test]
fn frames_follow_pose_order() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "poses.csv",
        &format!("{POSE_HEADER}0.0,0,0,0,0,0,0,1\n0.5,1,2,3,0,0,0.7071067811865476,0.7071067811865476\n"),
    );
    write(dir.path(), "cloud_0.csv", "x,y,z\n1,0,0\n");
    write(dir.path(), "cloud_1.csv", "x,y,z\n0,1,0\n0,0,1\n");
    let (frames, warnings) = load_dataset(dir.path()).unwrap();
    assert_eq!(warnings, 0);
    assert_eq!(frames.len(), 2);
    assert_eq!(frames[0].timestamp, 0.0);
    assert_eq!(frames[1].timestamp, 0.5);
    assert_eq!(frames[1].points.len(), 2);
    assert_eq!(frames[1].pose.translation, Vector3::new(1.0, 2.0, 3.0));
}

#[test]
fn missing_cloud_is_skipped_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "poses.csv",
        &format!("{POSE_HEADER}0,0,0,0,0,0,0,1\n1,0,0,0,0,0,0,1\n"),
    );
    write(dir.path(), "cloud_1.csv", "x,y,z\n1,1,1\n");
    let (frames, warnings) = load_dataset(dir.path()).unwrap();
    assert_eq!(frames.len(), 1);
    assert_eq!(frames[0].timestamp, 1.0);
    assert_eq!(warnings, 1);
}

#[test]
fn malformed_row_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "poses.csv",
        &format!("{POSE_HEADER}0,0,0,0,0,0,0,1\n1,0,zero,0,0,0,0,1\n"),
    );
    match load_dataset(dir.path()).unwrap_err() {
        ReplayError::Parse { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected error {e}"),
    }

    write(dir.path(), "poses.csv", "t,x,y,z\n");
    assert!(matches!(
        load_dataset(dir.path()),
        Err(ReplayError::Parse { line: 1, .. })
    ));

    write(dir.path(), "poses.csv", &format!("{POSE_HEADER}0,0,0,0,0,0,0,1\n"));
    write(dir.path(), "cloud_0.csv", "x,y,z\n1,2\n");
    assert!(matches!(
        load_dataset(dir.path()),
        Err(ReplayError::Parse { line: 2, .. })
    ));
}

#[test]
fn timestamp_regression_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "poses.csv",
        &format!("{POSE_HEADER}1,0,0,0,0,0,0,1\n0.5,0,0,0,0,0,0,1\n"),
    );
    let err = load_dataset(dir.path()).unwrap_err();
    assert!(matches!(err, ReplayError::Data(_)), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn unnormalised_quaternion_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "poses.csv", &format!("{POSE_HEADER}0,0,0,0,0,0,0,2\n"));
    write(dir.path(), "cloud_0.csv", "x,y,z\n");
    assert!(matches!(load_dataset(dir.path()), Err(ReplayError::Data(_))));
}

#[test]
fn dataset_round_trip_preserves_frames() {
    let frames: Vec<SensorFrame> = generate_scenario(&room_spec()).unwrap().collect();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &frames).unwrap();
    let (back, warnings) = load_dataset(dir.path()).unwrap();
    assert_eq!(warnings, 0);
    assert_eq!(back, frames);
}

#[test]
fn scenario_is_deterministic() {
    let mut spec = room_spec();
    spec.sensor.model = SensorModel::Sphere;
    let a: Vec<_> = generate_scenario(&spec).unwrap().collect();
    let b: Vec<_> = generate_scenario(&spec).unwrap().collect();
    assert_eq!(a, b);
    spec.seed += 1;
    let c: Vec<_> = generate_scenario(&spec).unwrap().collect();
    assert_ne!(a, c);
}

#[test]
fn box_returns_lie_on_its_faces() {
    let voxel_size = 0.1;
    let mut spec = base_spec();
    spec.sensor.clear_on_miss = false;
    spec.obstacles = vec![ObstacleSpec::Box {
        min: [0.0, -0.5, -0.3],
        max: [0.6, 0.5, 0.3],
        appear: None,
        disappear: None,
    }];
    let frames = generate_scenario(&spec).unwrap();
    let shape = match frames.obstacles()[0].shape {
        s @ Shape::Box { .. } => s,
        _ => unreachable!(),
    };
    let frames: Vec<_> = frames.collect();
    let mut count = 0;
    for f in &frames {
        for p in &f.points {
            let w = f.pose.transform(p).coords;
            assert!(shape.surface_distance(&w) <= voxel_size / 2.0, "{w:?} is off the box");
            count += 1;
        }
    }
    assert!(count > 50, "only {count} returns");
}

#[test]
fn degenerate_geometry_is_rejected() {
    let mut spec = base_spec();
    spec.obstacles = vec![ObstacleSpec::Box {
        min: [0.0, 0.0, 0.0],
        max: [1.0, 0.0, 1.0],
        appear: None,
        disappear: None,
    }];
    assert!(matches!(generate_scenario(&spec), Err(ReplayError::Spec(_))));
    spec.obstacles = vec![ObstacleSpec::Sphere {
        center: [0.0; 3],
        radius: 0.0,
        appear: None,
        disappear: None,
    }];
    assert!(matches!(generate_scenario(&spec), Err(ReplayError::Spec(_))));
    let mut spec = base_spec();
    spec.trajectory.clear();
    assert!(generate_scenario(&spec).is_err());
}

#[test]
fn scenario_parses_from_toml() {
    let text = r#"
seed = 3
[world]
min = [0.0, 0.0, 0.0]
max = [2.0, 2.0, 2.0]
[[obstacles]]
kind = "sphere"
center = [1.0, 1.0, 1.0]
radius = 0.2
disappear = 3
[random_obstacles]
count = 4
min_size = 0.1
max_size = 0.3
transient_fraction = 0.5
clearance = 0.3
[sensor]
max_range = 2.0
rays_per_frame = 10
model = "sphere"
[orbit]
center = [1.0, 1.0, 1.0]
radius = 0.8
frames = 5
"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    fs::write(&path, text).unwrap();
    let spec = ScenarioSpec::load(&path).unwrap();
    assert_eq!(spec.id.as_deref(), Some("s"));
    let frames = generate_scenario(&spec).unwrap();
    assert_eq!(frames.obstacles().len(), 5);
    assert_eq!(frames.count(), 5);

    fs::write(&path, "seed = 1\nbogus = 2\n").unwrap();
    assert!(matches!(ScenarioSpec::load(&path), Err(ReplayError::Spec(_))));
}

#[test]
fn disappearance_triggers_deletes_on_reobservation() {
    let mut spec = base_spec();
    spec.obstacles = vec![ObstacleSpec::Box {
        min: [0.0, -0.5, -0.5],
        max: [0.4, 0.5, 0.5],
        appear: None,
        disappear: Some(5),
    }];
    spec.trajectory = vec![spec.trajectory[0].clone(); 8];
    let mut cfg = MapConfig::default();
    cfg.occupancy.voxel_size = 0.1;
    cfg.occupancy.max_ray_range = 2.5;
    // One miss is enough to clear a voxel held at the clamp.
    cfg.occupancy.log_odds_max = 1.0;
    let mut map = EsdfMap::new(cfg).unwrap();
    for (i, frame) in generate_scenario(&spec).unwrap().enumerate() {
        let q = map.integrate_frame(&frame).unwrap();
        if i < 5 {
            assert!(q.delete_queue.is_empty(), "frame {i}");
        } else if i == 5 {
            assert!(!q.delete_queue.is_empty(), "no deletes after disappearance");
        }
        map.run_epoch().unwrap();
    }
}

#[test]
fn zero_obstacles_report_empty() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(dir.path());
    let out = run(&cfg, &Source::Scenario(base_spec()), None).unwrap();
    assert_eq!(out.rows.len(), 1);
    assert!(out.rows[0].error.is_empty());
    assert_eq!(out.rows[0].error.compared_voxel_count, 0);
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let line = csv.lines().nth(1).unwrap();
    assert!(line.starts_with("unit,C24,euclidean,8,empty,empty,0,"), "{line}");
}

#[test]
fn connectivity_sweep_emits_five_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(dir.path());
    let out = run(&cfg, &Source::Scenario(room_spec()), Some(SweepKind::Connectivity)).unwrap();
    assert_eq!(out.rows.len(), 5);
    assert!(out.rows.iter().all(|r| r.scenario_id == "unit"));
    let conns: Vec<Connectivity> = out.rows.iter().map(|r| r.connectivity).collect();
    assert_eq!(conns, Connectivity::ALL.to_vec());
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(
        csv.lines().next().unwrap(),
        "scenario_id,connectivity,rule,block_size,rms,max,count,wall_time_ms"
    );
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats.as_array().unwrap().len(), 5);
    assert!(stats[0]["epoch_time"]["median_ms"].is_number());
    assert!(stats[0]["memory"]["allocated_blocks"].is_number());
}

#[test]
fn block_size_sweep_memory_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(dir.path());
    let out = run(&cfg, &Source::Scenario(room_spec()), Some(SweepKind::BlockSize)).unwrap();
    assert_eq!(out.rows.len(), SWEEP_BLOCK_SIZES.len() + 1);
    assert_eq!(out.rows.last().unwrap().block_size, "dense");
    let observed = out.stats[0].m_observed;
    assert_eq!(out.stats[0].memory.allocated_voxel_records, observed);
    let blocks: Vec<usize> = out.stats[..SWEEP_BLOCK_SIZES.len()]
        .iter()
        .map(|s| s.memory.allocated_blocks)
        .collect();
    assert!(blocks.windows(2).all(|w| w[1] <= w[0]), "{blocks:?}");
    for (s, &bs) in out.stats.iter().zip(SWEEP_BLOCK_SIZES.iter()) {
        assert_eq!(s.m_observed, observed);
        assert!(s.memory.allocated_voxel_records <= (bs as usize).pow(3) * s.memory.allocated_blocks);
    }
    for r in &out.rows {
        assert_eq!(
            r.error, out.rows[0].error,
            "block size {} changed the field",
            r.block_size
        );
    }
}

#[test]
fn rule_sweep_emits_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(dir.path());
    let out = run(&cfg, &Source::Scenario(room_spec()), Some(SweepKind::Rule)).unwrap();
    let rules: Vec<String> = out.rows.iter().map(|r| r.rule.to_string()).collect();
    assert_eq!(rules, ["euclidean", "quasi"]);
}

#[test]
fn pause_and_resume_matches_uninterrupted() {
    let frames: Vec<_> = generate_scenario(&room_spec()).unwrap().collect();
    let cfg = run_config(Path::new("unused")).map;
    let mut whole = Replay::new(cfg.clone(), 0.2).unwrap();
    for f in &frames {
        whole.feed(f).unwrap();
    }
    whole.finish().unwrap();
    let expected = field_snapshot(whole.map());
    let expected_report = evaluate(whole.map());

    for pause in 0..=frames.len() {
        let mut first = Replay::new(cfg.clone(), 0.2).unwrap();
        for f in &frames[..pause] {
            first.feed(f).unwrap();
        }
        // Resume from a copy of the paused state.
        let mut resumed = first.clone();
        for f in &frames[pause..] {
            resumed.feed(f).unwrap();
        }
        resumed.finish().unwrap();
        assert_eq!(field_snapshot(resumed.map()), expected, "pause at {pause}");
        assert_eq!(evaluate(resumed.map()), expected_report);
        assert_eq!(resumed.epochs().len(), whole.epochs().len());
    }
}

#[test]
fn dataset_replay_matches_scenario_replay() {
    let spec = room_spec();
    let frames: Vec<_> = generate_scenario(&spec).unwrap().collect();
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), &frames).unwrap();
    let (o1, o2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut c1 = run_config(o1.path());
    c1.scenario_id = Some("same".into());
    let mut c2 = run_config(o2.path());
    c2.scenario_id = Some("same".into());
    let a = run(&c1, &Source::Scenario(spec), None).unwrap();
    let b = run(&c2, &Source::Dataset(data.path().to_path_buf()), None).unwrap();
    assert_eq!(a.rows[0].error, b.rows[0].error);
}

#[test]
fn slices_and_per_epoch_errors_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = run_config(dir.path());
    cfg.per_epoch_error = true;
    cfg.slices.push("axis=z,index=0".parse::<SliceRequest>().unwrap());
    let out = run(&cfg, &Source::Scenario(room_spec()), None).unwrap();
    assert!(dir.path().join("slice_z_0.csv").is_file());
    let pgm = fs::read(dir.path().join("slice_z_0.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5"));
    let per_epoch = out.stats[0].per_epoch_error.as_ref().unwrap();
    assert_eq!(per_epoch.len(), out.stats[0].epochs);
    assert!(per_epoch.iter().all(|e| e.min_signed_voxels >= -1e-9 || e.empty));
}

#[test]
fn bounding_box_pads_by_one() {
    use esdfmap::VoxelKey;
    let b = bounding_box(&[VoxelKey::new(0, 0, 0), VoxelKey::new(2, -1, 3)]).unwrap();
    assert_eq!(b.min, VoxelKey::new(-1, -2, -1));
    assert_eq!(b.max, VoxelKey::new(4, 2, 5));
    assert!(bounding_box(&[]).is_none());
}

#[test]
fn corruption_maps_to_exit_code_two() {
    let e = ReplayError::Map(esdfmap::Error::ListCorruption("x".into()));
    assert_eq!(e.exit_code(), 2);
    assert_eq!(ReplayError::Map(esdfmap::Error::Data("x".into())).exit_code(), 1);
    assert_eq!(ReplayError::Config("x".into()).exit_code(), 1);
}

#[test]
fn oracle_matches_direct_scan_on_walled_room() {
    use esdfmap_cli::scenario::RandomObstacles;
    let mut spec = room_spec();
    spec.seed = 3;
    spec.world = WorldSpec {
        min: [0.0, 0.0, 0.0],
        max: [4.0, 4.0, 2.0],
        walls: true,
    };
    spec.obstacles.clear();
    spec.random_obstacles = Some(RandomObstacles {
        count: 8,
        min_size: 0.2,
        max_size: 0.8,
        transient_fraction: 0.3,
        clearance: 0.5,
    });
    spec.sensor.max_range = 3.0;
    spec.sensor.rays_per_frame = 1500;
    spec.sensor.horizontal_fov_deg = 100.0;
    spec.orbit = Some(OrbitSpec {
        center: [2.0, 2.0, 1.0],
        radius: 1.2,
        frames: 20,
        turns: 1.0,
    });
    let mut cfg = MapConfig::default();
    cfg.occupancy.max_ray_range = 3.0;
    let mut replay = Replay::new(cfg, 0.5).unwrap();
    let mut checked = 0;
    for frame in generate_scenario(&spec).unwrap() {
        if replay.feed(&frame).unwrap().is_some() {
            let map = replay.map();
            let (occ, dom) = (map.occupied_keys(), map.observed_keys());
            assert_eq!(
                esdfmap::exact_edt(&occ, &dom),
                esdfmap::oracle::exact_edt_brute(&occ, &dom),
                "epoch {checked}"
            );
            assert!(evaluate(map).min_signed_error_voxels >= -1e-9);
            checked += 1;
        }
    }
    assert!(checked > 2);
}
