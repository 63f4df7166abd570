#![allow(dead_code)]

use std::time::Duration;

use rackbot::config::RackConfig;
use rackbot::rack::Rack;

pub fn small_rack(robots: usize) -> RackConfig {
    RackConfig {
        robot_count: robots,
        heartbeat_interval_ms: 100,
        runtime_workers: 2,
        ..RackConfig::default()
    }
}

pub fn spawn(cfg: RackConfig) -> Rack {
    Rack::spawn(cfg).expect("rack starts")
}

/// Raw HTTP agent that never turns statuses into errors.
pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(5)))
        .build()
        .into()
}

pub fn post(url: &str, token: Option<&str>, body: &str) -> (u16, String) {
    let mut req = agent().post(url).header("content-type", "application/json");
    if let Some(t) = token {
        req = req.header("x-api-token", t);
    }
    let mut resp = req.send(body).expect("request completes");
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_string().unwrap_or_default())
}

pub fn get(url: &str, token: Option<&str>) -> (u16, Vec<u8>) {
    let mut req = agent().get(url);
    if let Some(t) = token {
        req = req.header("x-api-token", t);
    }
    let mut resp = req.call().expect("request completes");
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_vec().unwrap_or_default())
}
