//! Episodic rope-pushing collection over the fleet.
//!
//! One control thread and two recorder threads per robot. Recorders pull
//! the camera streams and write every frame; the controller issues
//! commands and logs their receipts. They share nothing but timestamps.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rackbot_core::geom::Vec2;
use rackbot_core::sampling::sample_push;
use rackbot_core::workcell::{DeviationProbe, MaskProbe, RopeState, View, WorkcellConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::{
    append_jsonl, episode_dir, episode_id, frame_file, write_json, write_manifest, ActionRecord, ActionRole,
    CameraIntrinsics, DatasetManifest, EpisodeRecord, EpisodeSummary, Environment, FrameEntry, PushInfo,
    RejectedCandidate, ACTIONS_FILE, EPISODE_FILE, MANIFEST_FILE, REJECTED_FILE, SCHEMA_VERSION,
};
use super::mask::RopeMask;
use crate::api::{CommandRequest, RobotStatus};
use crate::bench::Target;
use crate::client::{ClientError, RobotClient};
use crate::clock;
use crate::config::RackConfig;

const STAGING_DIR: &str = ".staging";
const COMMAND_RETRIES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum AcceptMode {
    /// Segment the latest top image and test the swept band against it.
    Mask,
    /// Test the sweep against the simulator's rope polyline.
    Geometric,
}

#[derive(Clone, Debug)]
pub struct CollectConfig {
    pub episodes_per_robot: usize,
    pub max_pushes: usize,
    /// Target spacing of accepted pushes.
    pub push_period_ms: u64,
    /// Rejected candidates per push slot before the episode is abandoned.
    pub max_rejections: usize,
    pub mode: AcceptMode,
    pub seed: u64,
    /// Minimum time between the observation a push is based on and the
    /// push itself, so a recorded frame of the settled scene precedes it.
    pub settle_ms: u64,
    pub idle_timeout: Duration,
    pub poll: Duration,
    pub description: String,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            episodes_per_robot: 3,
            max_pushes: 10,
            push_period_ms: 2000,
            max_rejections: 500,
            mode: AcceptMode::Mask,
            seed: 7,
            settle_ms: 150,
            idle_timeout: Duration::from_secs(30),
            poll: Duration::from_millis(10),
            description: "Anchored rope on a transparent floor plate, pushed by random linear sweeps of the lowered gripper.".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CollectError {
    #[error("output directory {0} already holds a dataset")]
    Exists(PathBuf),
    #[error("no robots to collect from")]
    NoRobots,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why an episode stopped early.
#[derive(Debug)]
enum Abort {
    Fault(ClientError),
    Rejections { slot: usize, rejected: usize },
    Io(std::io::Error),
}

impl From<ClientError> for Abort {
    fn from(e: ClientError) -> Self {
        Abort::Fault(e)
    }
}

impl From<std::io::Error> for Abort {
    fn from(e: std::io::Error) -> Self {
        Abort::Io(e)
    }
}

impl Abort {
    fn describe(&self) -> String {
        match self {
            Abort::Fault(e) => format!("robot fault: {e}"),
            Abort::Rejections { slot, rejected } => {
                format!("push slot {slot}: no candidate accepted after {rejected} rejections")
            }
            Abort::Io(e) => format!("io: {e}"),
        }
    }
}

/// Rope as seen at one instant, by either acceptance mode.
enum Observation {
    Mask(RopeMask),
    Geometric(Option<RopeState>),
}

impl Observation {
    fn intersects(&self, wc: &WorkcellConfig, start: Vec2, end: Vec2) -> bool {
        match self {
            Observation::Mask(m) => m.intersects(start, end, wc.footprint_radius_mm),
            Observation::Geometric(Some(rope)) => wc.predict(rope, start, end),
            Observation::Geometric(None) => false,
        }
    }

    fn probe(&self) -> Option<Box<dyn DeviationProbe + '_>> {
        match self {
            Observation::Mask(m) => Some(Box::new(MaskProbe {
                mask: &m.mask,
                camera: &m.camera,
            })),
            Observation::Geometric(rope) => rope.as_ref().map(|r| Box::new(r.clone()) as Box<dyn DeviationProbe>),
        }
    }
}

struct EpisodeRun<'a> {
    collector: &'a Collector<'a>,
    client: RobotClient,
    actions: fs::File,
    rejected: fs::File,
    rng: ChaCha8Rng,
    commands: usize,
    pushes: usize,
    last_push_ms: Option<u64>,
    last_ts_ms: u64,
}

impl EpisodeRun<'_> {
    fn wc(&self) -> &WorkcellConfig {
        &self.collector.workcell
    }

    fn cfg(&self) -> &CollectConfig {
        self.collector.cfg
    }

    fn wait_idle(&mut self) -> Result<RobotStatus, Abort> {
        let status = self.client.wait_idle(self.cfg().idle_timeout, self.cfg().poll)?;
        self.last_ts_ms = self.last_ts_ms.max(status.snapshot_ts_ms);
        Ok(status)
    }

    fn send(&mut self, command: CommandRequest, role: ActionRole, push: Option<PushInfo>) -> Result<u64, Abort> {
        let receipt = self
            .client
            .command_retrying(&command, COMMAND_RETRIES, Duration::from_millis(20))?;
        self.commands += 1;
        self.last_ts_ms = self.last_ts_ms.max(receipt.accepted_ts_ms);
        let record = ActionRecord {
            ts_ms: receipt.accepted_ts_ms,
            command_id: receipt.command_id,
            role,
            command,
            push,
        };
        append_jsonl(&mut self.actions, &record)?;
        Ok(receipt.accepted_ts_ms)
    }

    /// Sends a command once the previous one has finished.
    fn step(&mut self, command: CommandRequest, role: ActionRole) -> Result<(), Abort> {
        self.wait_idle()?;
        self.send(command, role, None).map(|_| ())
    }

    fn normalized(&self, p: Vec2) -> [f64; 2] {
        let ws = self.wc().workspace_mm;
        [(p.x / ws[0]).clamp(0.0, 1.0), (p.y / ws[1]).clamp(0.0, 1.0)]
    }

    /// Observes the rope after the robot went idle. Returns the
    /// observation and its server timestamp.
    fn observe(&mut self, idle_ts: u64) -> Result<(Observation, u64), Abort> {
        match self.cfg().mode {
            AcceptMode::Mask => {
                let deadline = Instant::now() + self.cfg().idle_timeout;
                let image = loop {
                    let image = self.client.image(View::Top)?;
                    // timestamps are whole ms; the idle instant may lie inside idle_ts
                    if image.ts_ms > idle_ts {
                        break image;
                    }
                    if Instant::now() > deadline {
                        return Err(ClientError::Timeout("a fresh top image").into());
                    }
                    std::thread::sleep(self.cfg().poll);
                };
                let mask = RopeMask::from_jpeg(&image.jpeg, self.wc())
                    .ok_or_else(|| Abort::Fault(ClientError::Decode("top image does not decode".into())))?;
                Ok((Observation::Mask(mask), image.ts_ms))
            }
            AcceptMode::Geometric => {
                let snapshot = self.client.sim_rope()?;
                let rope = snapshot.particles.and_then(|particles| {
                    let mut rope = self.wc().initial_rope()?;
                    rope.particles = particles.iter().map(|p| Vec2::new(p[0], p[1])).collect();
                    Some(rope)
                });
                Ok((Observation::Geometric(rope), idle_ts))
            }
        }
    }

    fn push_slot(&mut self, slot: usize) -> Result<(), Abort> {
        let idle = self.wait_idle()?;
        let (observation, seen_ms) = self.observe(idle.snapshot_ts_ms)?;
        let ws = self.wc().workspace_mm;
        let mut rejected = 0;
        let sweep = loop {
            let candidate = sample_push(&mut self.rng);
            let (a, b) = candidate.to_mm(ws);
            if observation.intersects(self.wc(), a, b) {
                break candidate;
            }
            append_jsonl(
                &mut self.rejected,
                &RejectedCandidate {
                    slot,
                    start: [candidate.start.x, candidate.start.y],
                    end: [candidate.end.x, candidate.end.y],
                },
            )?;
            rejected += 1;
            if rejected >= self.cfg().max_rejections {
                return Err(Abort::Rejections { slot, rejected });
            }
        };

        let mut earliest = seen_ms + self.cfg().settle_ms;
        if let Some(last) = self.last_push_ms {
            earliest = earliest.max(last + self.cfg().push_period_ms);
        }
        let wait = earliest as f64 - clock::now_ms_f64();
        if wait > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(wait / 1000.0));
        }

        let start = [sweep.start.x, sweep.start.y];
        let end = [sweep.end.x, sweep.end.y];
        let info = PushInfo {
            index_in_episode: slot,
            start,
            end,
            predicted_intersection: true,
            rejected_before: rejected,
        };
        let ts = self.send(CommandRequest::move_path(&[start], end[0], end[1]), ActionRole::Push, Some(info))?;
        self.last_push_ms = Some(ts);
        self.pushes += 1;
        Ok(())
    }

    /// Straightens the rope by combing sweeps, re-observing between sweeps.
    fn reset(&mut self) -> Result<(), Abort> {
        let mut planner = self.wc().reset_planner();
        loop {
            let idle = self.wait_idle()?;
            let (observation, _) = self.observe(idle.snapshot_ts_ms)?;
            let Some(sweep) = observation.probe().and_then(|p| planner.next_sweep(p.as_ref())) else {
                return Ok(());
            };
            let start = self.normalized(sweep.start);
            let end = self.normalized(sweep.end);
            self.step(CommandRequest::move_z(0.25), ActionRole::Reset)?;
            self.step(CommandRequest::move_xy(start[0], start[1]), ActionRole::Reset)?;
            self.step(CommandRequest::move_z(0.0), ActionRole::Reset)?;
            self.step(CommandRequest::move_xy(end[0], end[1]), ActionRole::Reset)?;
        }
    }

    fn control(&mut self) -> Result<(), Abort> {
        self.step(CommandRequest::move_z(1.0), ActionRole::Setup)?;
        self.step(CommandRequest::calibrate(), ActionRole::Calibrate)?;
        self.step(CommandRequest::move_z(0.0), ActionRole::Setup)?;
        for slot in 0..self.cfg().max_pushes {
            self.push_slot(slot)?;
        }
        self.reset()?;
        self.step(CommandRequest::move_z(1.0), ActionRole::Setup)?;
        self.wait_idle()?;
        Ok(())
    }
}

/// Writes one camera stream into `dir/<view>/` until a frame at or past
/// `end_ms` arrives. `end_ms` of zero means not yet known.
fn record(
    client: &RobotClient,
    view: View,
    dir: &Path,
    first_ms: &AtomicU64,
    end_ms: &AtomicU64,
) -> Result<Vec<FrameEntry>, String> {
    let mut frames = Vec::new();
    let stream = client.stream(view).map_err(|e| e.to_string())?;
    for frame in stream {
        let frame = frame.map_err(|e| e.to_string())?;
        let file = frame_file(view, frames.len());
        fs::write(dir.join(&file), &frame.jpeg).map_err(|e| e.to_string())?;
        if frames.is_empty() {
            first_ms.store(frame.ts_ms, Ordering::SeqCst);
        }
        frames.push(FrameEntry {
            ts_ms: frame.ts_ms,
            seq: frame.seq,
            file,
        });
        let end = end_ms.load(Ordering::SeqCst);
        if end != 0 && frame.ts_ms >= end {
            return Ok(frames);
        }
    }
    Err("stream closed".into())
}

struct Collector<'a> {
    workcell: WorkcellConfig,
    cfg: &'a CollectConfig,
    root: &'a Path,
    commit: Mutex<()>,
}

struct EpisodeResult {
    record: EpisodeRecord,
    fault: bool,
}

impl Collector<'_> {
    fn staging(&self, robot_id: &str, episode: &str) -> PathBuf {
        self.root.join(STAGING_DIR).join(robot_id).join(episode)
    }

    fn episode(&self, robot: usize, target: &Target, index: usize) -> std::io::Result<EpisodeResult> {
        let id = episode_id(index);
        let staging = self.staging(&target.robot_id, &id);
        let result = self.episode_in(robot, target, index, &staging);
        match result {
            Ok(r) => {
                let _guard = self.commit.lock().unwrap_or_else(|e| e.into_inner());
                let dest = episode_dir(self.root, &target.robot_id, &id);
                fs::create_dir_all(dest.parent().expect("episode dir has a parent"))?;
                if let Err(e) = fs::rename(&staging, &dest) {
                    let _ = fs::remove_dir_all(&staging);
                    return Err(e);
                }
                Ok(r)
            }
            Err(e) => {
                let _ = fs::remove_dir_all(&staging);
                Err(e)
            }
        }
    }

    fn episode_in(&self, robot: usize, target: &Target, index: usize, dir: &Path) -> std::io::Result<EpisodeResult> {
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        for view in View::ALL {
            fs::create_dir_all(dir.join(view.as_str()))?;
        }
        let id = episode_id(index);
        let seed = self.cfg.seed ^ ((robot as u64) << 32) ^ index as u64;
        let mut run = EpisodeRun {
            collector: self,
            client: target.client(),
            actions: fs::File::create(dir.join(ACTIONS_FILE))?,
            rejected: fs::File::create(dir.join(REJECTED_FILE))?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            commands: 0,
            pushes: 0,
            last_push_ms: None,
            last_ts_ms: 0,
        };

        let first = [AtomicU64::new(0), AtomicU64::new(0)];
        let end = AtomicU64::new(0);
        let (frames, outcome, start_ms, end_ms, final_rope) = std::thread::scope(|s| {
            let recorders: Vec<_> = View::ALL
                .iter()
                .zip(&first)
                .map(|(&view, first)| {
                    let client = target.client();
                    let end = &end;
                    s.spawn(move || record(&client, view, dir, first, end))
                })
                .collect();

            let deadline = Instant::now() + Duration::from_secs(10);
            while first.iter().any(|f| f.load(Ordering::SeqCst) == 0)
                && Instant::now() < deadline
                && !recorders.iter().any(|r| r.is_finished())
            {
                std::thread::sleep(Duration::from_millis(5));
            }
            let start_ms = first.iter().map(|f| f.load(Ordering::SeqCst)).max().unwrap_or(0);
            let outcome = if first.iter().any(|f| f.load(Ordering::SeqCst) == 0) {
                Err(Abort::Fault(ClientError::Timeout("first camera frames")))
            } else {
                run.control()
            };
            let final_rope = match &outcome {
                Ok(()) => run.client.sim_rope().ok().and_then(|r| r.particles),
                Err(_) => None,
            };
            let end_ms = run.last_ts_ms.max(start_ms);
            // aborted episodes stop recording at the next frame
            end.store(if outcome.is_ok() { end_ms } else { 1 }, Ordering::SeqCst);
            let frames: Vec<_> = recorders.into_iter().map(|r| r.join().expect("recorder panicked")).collect();
            (frames, outcome, start_ms, end_ms, final_rope)
        });

        let mut aborted = outcome.as_ref().err().map(Abort::describe);
        let fault = matches!(outcome, Err(Abort::Fault(_)));
        if let Err(Abort::Io(e)) = outcome {
            return Err(e);
        }
        let mut views = frames.into_iter();
        let mut take = |name: &str| match views.next().expect("two recorders") {
            Ok(f) => f,
            Err(e) => {
                aborted.get_or_insert_with(|| format!("{name} recorder: {e}"));
                Vec::new()
            }
        };
        let frames_top = take("top");
        let frames_bottom = take("bottom");
        let record = EpisodeRecord {
            episode_id: id,
            robot_id: target.robot_id.clone(),
            start_ts_ms: start_ms,
            end_ts_ms: end_ms,
            aborted,
            pushes: run.pushes,
            commands: run.commands,
            frames_top,
            frames_bottom,
            final_rope,
        };
        run.actions.sync_all()?;
        write_json(&dir.join(EPISODE_FILE), &record)?;
        Ok(EpisodeResult { record, fault })
    }

    fn robot(&self, robot: usize, target: &Target) -> std::io::Result<Vec<EpisodeRecord>> {
        let mut records = Vec::new();
        for index in 0..self.cfg.episodes_per_robot {
            let result = self.episode(robot, target, index)?;
            records.push(result.record);
            if result.fault {
                break;
            }
        }
        Ok(records)
    }
}

/// Builds the manifest from the episode records. Aborted episodes are
/// listed but do not count toward the totals.
pub fn build_manifest(
    rack: &RackConfig,
    robot_ids: Vec<String>,
    cfg: &CollectConfig,
    episodes: &[EpisodeRecord],
) -> DatasetManifest {
    let workcell = rack.cell(0).workcell;
    let complete = || episodes.iter().filter(|e| e.aborted.is_none());
    DatasetManifest {
        schema_version: SCHEMA_VERSION,
        robot_ids,
        environment: Environment {
            description: cfg.description.clone(),
            accept_mode: match cfg.mode {
                AcceptMode::Mask => "mask".into(),
                AcceptMode::Geometric => "geometric".into(),
            },
            push_period_s: cfg.push_period_ms as f64 / 1000.0,
            max_pushes: cfg.max_pushes,
            collection_seed: cfg.seed,
            rack_config: rack.to_toml(),
        },
        total_duration_s: complete().map(EpisodeRecord::duration_s).sum(),
        dataset_size_bytes: 0,
        cumulative_motion_commands: complete().map(|e| e.commands as u64).sum(),
        camera_intrinsics: CameraIntrinsics {
            top: workcell.camera(View::Top).intrinsics(),
            bottom: workcell.camera(View::Bottom).intrinsics(),
        },
        episodes: episodes
            .iter()
            .map(|e| EpisodeSummary {
                robot_id: e.robot_id.clone(),
                episode_id: e.episode_id.clone(),
                duration_s: e.duration_s(),
                pushes: e.pushes,
                commands: e.commands,
                aborted: e.aborted.is_some(),
            })
            .collect(),
    }
}

/// Runs the collection on every target concurrently and writes the
/// dataset under `root`.
pub fn collect(
    rack: &RackConfig,
    targets: &[Target],
    cfg: &CollectConfig,
    root: &Path,
) -> Result<DatasetManifest, CollectError> {
    if targets.is_empty() {
        return Err(CollectError::NoRobots);
    }
    if root.join(MANIFEST_FILE).exists() {
        return Err(CollectError::Exists(root.to_path_buf()));
    }
    fs::create_dir_all(root)?;
    let collector = Collector {
        workcell: rack.cell(0).workcell,
        cfg,
        root,
        commit: Mutex::new(()),
    };
    let results: Vec<std::io::Result<Vec<EpisodeRecord>>> = std::thread::scope(|s| {
        let handles: Vec<_> = targets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let collector = &collector;
                let robot = robot_index(&t.robot_id).unwrap_or(i);
                s.spawn(move || collector.robot(robot, t))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("collector panicked")).collect()
    });
    let _ = fs::remove_dir_all(root.join(STAGING_DIR));
    let mut episodes = Vec::new();
    for r in results {
        episodes.extend(r?);
    }
    let ids = targets.iter().map(|t| t.robot_id.clone()).collect();
    let mut manifest = build_manifest(rack, ids, cfg, &episodes);
    write_manifest(root, &mut manifest)?;
    Ok(manifest)
}

/// Index encoded in a robot identifier such as `robot-03`.
pub fn robot_index(robot_id: &str) -> Option<usize> {
    robot_id.rsplit('-').next()?.parse().ok()
}
