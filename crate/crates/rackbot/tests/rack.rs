mod common;

use std::net::TcpListener;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rackbot::api::CommandRequest;
use rackbot::config::{Deployment, RackConfig};
use rackbot::rack::{Rack, RackError, RegistryEntry};
use rackbot_core::kinematics::RobotPose;

use common::{get, small_rack, spawn};

fn wait_for(what: &str, timeout: Duration, mut cond: impl FnMut() -> bool) {
    let deadline = Instant::now() + timeout;
    while !cond() {
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
        std::thread::sleep(Duration::from_millis(20));
    }
}

fn registry(rack: &Rack) -> Vec<RegistryEntry> {
    let (status, body) = get(&rack.registry_url(), None);
    assert_eq!(status, 200);
    serde_json::from_slice(&body).unwrap()
}

#[test]
fn registry_lists_every_robot() {
    let rack = spawn(small_rack(4));
    let entries = registry(&rack);
    assert_eq!(entries.len(), 4);
    for (i, e) in entries.iter().enumerate() {
        assert_eq!(e.robot_id, format!("robot-{i:02}"));
        assert_eq!(e.endpoint, rack.endpoint(i).to_string());
        assert!(e.alive);
    }
    let ports: std::collections::BTreeSet<_> = entries.iter().map(|e| e.endpoint.clone()).collect();
    assert_eq!(ports.len(), 4);
}

#[test]
fn port_conflict_fails_before_serving() {
    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let mut cfg = small_rack(3);
    // robot 1 collides
    cfg.base_port = port - 1;
    match Rack::spawn(cfg) {
        Err(RackError::PortInUse { port: p, .. }) => assert_eq!(p, port),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("rack started on a taken port"),
    }
    // the ports of robot 0 and 2 were released again
    assert!(TcpListener::bind(("127.0.0.1", port - 1)).is_ok());
    assert!(TcpListener::bind(("127.0.0.1", port + 1)).is_ok());
}

#[test]
fn killed_robot_goes_dead_and_restarts_fresh() {
    let mut cfg = small_rack(3);
    cfg.server.time_scale = 50.0;
    let rack = spawn(cfg);
    let victim = rack.client(1);
    victim.command(&CommandRequest::move_z(0.3)).unwrap();
    rack.kill(1);
    assert!(victim.health().is_err());
    for i in [0, 2] {
        assert!(rack.client(i).state().is_ok(), "robot {i} unaffected");
    }
    wait_for("registry to mark robot-01 dead", Duration::from_secs(3), || {
        let e = registry(&rack);
        !e[1].alive && e[0].alive && e[2].alive
    });

    rack.restart(1).unwrap();
    let status = victim.state().unwrap();
    assert_eq!(status.command_counter, 0);
    assert!(status.homed);
    wait_for("registry to mark robot-01 alive", Duration::from_secs(3), || registry(&rack)[1].alive);
}

fn pose_log(cfg: RackConfig) -> Vec<(RobotPose, u64)> {
    let rack = spawn(cfg);
    let client = rack.client(0);
    let mut log = Vec::new();
    let moves = [
        CommandRequest::move_xy(0.7, 0.2),
        CommandRequest::move_z(0.6),
        CommandRequest::move_path(&[[0.1, 0.9], [0.4, 0.4]], 0.3, 0.8),
        CommandRequest::rotate(45.0),
        CommandRequest::gripper(0.2),
        CommandRequest::calibrate(),
        CommandRequest::move_xy(0.5, 0.5),
    ];
    for m in &moves {
        client.wait_idle(Duration::from_secs(10), Duration::from_millis(2)).unwrap();
        client.command(m).unwrap();
        let s = client.wait_idle(Duration::from_secs(10), Duration::from_millis(2)).unwrap();
        log.push((s.pose, s.command_counter));
    }
    log
}

#[test]
fn same_seed_same_pose_log() {
    let mut cfg = small_rack(1);
    cfg.server.time_scale = 100.0;
    let a = pose_log(cfg.clone());
    let b = pose_log(cfg.clone());
    let bits = |log: &[(RobotPose, u64)]| -> Vec<[u64; 5]> {
        log.iter()
            .map(|(p, _)| [p.x, p.y, p.z, p.r, p.d].map(f64::to_bits))
            .collect()
    };
    assert_eq!(bits(&a), bits(&b));
    cfg.seed_base += 1;
    let c = pose_log(cfg);
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn process_deployment() {
    let mut cfg = small_rack(2);
    cfg.deployment = Deployment::Processes;
    cfg.server.time_scale = 50.0;
    let exe = PathBuf::from(env!("CARGO_BIN_EXE_rack"));
    let rack = Rack::spawn_with(cfg.clone(), Some(exe)).unwrap();
    for i in 0..2 {
        let c = rack.client(i);
        assert_eq!(c.health().unwrap().robot_id, format!("robot-{i:02}"));
        c.command(&CommandRequest::move_xy(0.2, 0.2)).unwrap();
    }
    rack.kill(0);
    assert!(rack.client(0).health().is_err());
    assert!(rack.client(1).state().is_ok());
    rack.restart(0).unwrap();
    assert_eq!(rack.client(0).state().unwrap().command_counter, 0);

    // without an executable process mode cannot start
    assert!(matches!(Rack::spawn(cfg), Err(RackError::NoCellExecutable)));
}

#[test]
fn config_files_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for name in ["rack32", "repeat", "collection-mini", "collection-full"] {
        let path = PathBuf::from(dir).join(format!("{name}.toml"));
        RackConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert!(RackConfig::from_toml("robot_count = 2\nunknown_key = 1").is_err());
    assert!(RackConfig::from_toml("robot_count = 0").is_err());
}
