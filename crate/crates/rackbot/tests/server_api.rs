mod common;

use std::time::Duration;

use rackbot::api::{snapshot_nonce, CommandRequest};
use rackbot::client::ClientError;
use rackbot::dataset::layout::jpeg_dimensions;
use rackbot_core::workcell::View;

use common::{get, post, small_rack, spawn};

const TOKEN: &str = "rack-secret";

#[test]
fn auth_is_required_everywhere_but_health() {
    let rack = spawn(small_rack(1));
    let base = rack.base_url(0);
    assert_eq!(get(&format!("{base}/healthz"), None).0, 200);
    for path in [
        "/api/v1/state",
        "/api/v1/image/top",
        "/api/v1/image/bottom",
        "/api/v1/stream/top",
        "/api/v1/sim/rope",
        "/api/v1/nope",
    ] {
        assert_eq!(get(&format!("{base}{path}"), None).0, 401, "{path} without token");
        assert_eq!(get(&format!("{base}{path}"), Some("wrong")).0, 401, "{path} with a wrong token");
    }
    for path in ["/api/v1/command", "/api/v1/calibrate"] {
        let body = r#"{"kind":"move_z","z":0.5}"#;
        assert_eq!(post(&format!("{base}{path}"), None, body).0, 401);
        assert_eq!(post(&format!("{base}{path}"), Some("rack-secre"), body).0, 401);
    }
    assert_eq!(get(&format!("{base}/api/v1/nope"), Some(TOKEN)).0, 404);
    // nothing was executed by the rejected requests
    assert_eq!(rack.client(0).state().unwrap().command_counter, 0);
}

#[test]
fn images_have_camera_resolutions() {
    let rack = spawn(small_rack(1));
    let client = rack.client(0);
    for view in View::ALL {
        let image = client.image(view).unwrap();
        assert_eq!(jpeg_dimensions(&image.jpeg), Some(view.resolution()));
    }
    match client.get_raw("/api/v1/image/side") {
        Err(ClientError::Validation { field, .. }) => assert_eq!(field, "view"),
        other => panic!("expected a view validation error, got {other:?}"),
    }
}

#[test]
fn busy_rejection_leaves_counter_alone() {
    let rack = spawn(small_rack(1));
    let client = rack.client(0);
    let receipt = client.command(&CommandRequest::move_xy(0.9, 0.9)).unwrap();
    assert_eq!(receipt.command_id, 1);
    assert!(receipt.duration_s > 1.0);
    match client.command(&CommandRequest::move_xy(0.1, 0.1)) {
        Err(ClientError::Busy) => {}
        other => panic!("expected busy, got {other:?}"),
    }
    let status = client.state().unwrap();
    assert!(status.busy);
    assert_eq!(status.command_counter, 1);
    let idle = client.wait_idle(Duration::from_secs(10), Duration::from_millis(20)).unwrap();
    assert!((idle.pose.x - 0.9).abs() < 0.01 && (idle.pose.y - 0.9).abs() < 0.01);
    assert_eq!(client.command(&CommandRequest::move_z(0.5)).unwrap().command_id, 2);
}

#[test]
fn invalid_commands_name_the_field() {
    let rack = spawn(small_rack(1));
    let url = format!("{}/api/v1/command", rack.base_url(0));
    let cases = [
        (r#"{"kind":"move_xy","x":1.5,"y":0.5}"#, "x"),
        (r#"{"kind":"move_xy","x":0.5}"#, "y"),
        (r#"{"kind":"move_z","z":"high"}"#, "z"),
        (r#"{"kind":"teleport","x":0.5}"#, "kind"),
        (r#"{"kind":"move_xy","x":0.5,"y":0.5,"waypoints":[[0.1,0.2],[0.1,2.0]]}"#, "waypoints[1].y"),
        (r#"{"kind":"move_xy","x":0.5,"y":0.5,"waypoints":[{"x":0.1,"y":0.2}]}"#, "waypoints[0]"),
        (r#"{"kind":"rotate","r":1000}"#, "r"),
        (r#"{"kind":"gripper","d":-0.1}"#, "d"),
    ];
    for (body, field) in cases {
        let (status, text) = post(&url, Some(TOKEN), body);
        assert_eq!(status, 400, "{body}");
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["field"], field, "{body}");
    }
    let (status, _) = post(&url, Some(TOKEN), "not json");
    assert_eq!(status, 400);
    assert_eq!(rack.client(0).state().unwrap().command_counter, 0);
}

#[test]
fn status_snapshots_are_consistent() {
    let rack = spawn(small_rack(1));
    let client = rack.client(0);
    client.command(&CommandRequest::move_xy(0.8, 0.3)).unwrap();
    let mut last_seq = 0;
    for _ in 0..20 {
        let s = client.state().unwrap();
        assert!(s.snapshot_seq > last_seq);
        last_seq = s.snapshot_seq;
        assert_eq!(s.nonce, snapshot_nonce(s.snapshot_seq, &s.pose));
        assert!(s.homed);
        std::thread::sleep(Duration::from_millis(20));
    }
}

#[test]
fn stream_frames_are_evenly_spaced() {
    let rack = spawn(small_rack(1));
    let client = rack.client(0);
    for view in View::ALL {
        let frames: Vec<_> = client.stream(view).unwrap().take(8).map(Result::unwrap).collect();
        for (i, f) in frames.iter().enumerate() {
            assert_eq!(f.stream_seq, i as u64 + 1);
            assert_eq!(jpeg_dimensions(&f.jpeg), Some(view.resolution()));
        }
        for w in frames.windows(2) {
            let gap = w[1].ts_ms - w[0].ts_ms;
            assert!((90..=110).contains(&gap), "gap {gap} ms");
        }
    }
}

#[test]
fn motion_is_visible_on_camera_and_rope_endpoint() {
    let mut cfg = small_rack(1);
    cfg.server.time_scale = 20.0;
    cfg.server.sensor_noise = 0;
    let rack = spawn(cfg);
    let client = rack.client(0);
    let before = client.image(View::Top).unwrap();
    let rope0 = client.sim_rope().unwrap();
    // lower onto the plate away from the rope, then sweep across it
    for req in [
        CommandRequest::move_xy(0.5, 0.9),
        CommandRequest::move_z(0.0),
        CommandRequest::move_path(&[[0.1, 0.4]], 0.9, 0.4),
    ] {
        client.wait_idle(Duration::from_secs(10), Duration::from_millis(5)).unwrap();
        client.command(&req).unwrap();
    }
    client.wait_idle(Duration::from_secs(10), Duration::from_millis(5)).unwrap();
    std::thread::sleep(Duration::from_millis(50));
    let after = client.image(View::Top).unwrap();
    let rope1 = client.sim_rope().unwrap();
    assert!(after.seq > before.seq);
    assert_ne!(after.jpeg, before.jpeg);
    assert!(rope1.revision > rope0.revision);
    assert_ne!(rope1.particles, rope0.particles);
}

#[test]
fn calibrate_endpoint_homes() {
    let mut cfg = small_rack(1);
    cfg.server.time_scale = 50.0;
    let rack = spawn(cfg);
    let client = rack.client(0);
    client.command(&CommandRequest::move_xy(0.4, 0.6)).unwrap();
    client.wait_idle(Duration::from_secs(10), Duration::from_millis(5)).unwrap();
    let receipt = client.calibrate().unwrap();
    assert_eq!(receipt.command_id, 2);
    let s = client.wait_idle(Duration::from_secs(10), Duration::from_millis(5)).unwrap();
    assert_eq!((s.pose.x, s.pose.y), (0.0, 0.0));
    assert!(s.homed);
}
