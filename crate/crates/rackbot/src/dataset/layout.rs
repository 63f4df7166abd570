//! On-disk dataset format.
//!
//! ```text
//! <root>/manifest.json
//! <root>/<robot_id>/<episode_id>/episode.json
//! <root>/<robot_id>/<episode_id>/actions.jsonl
//! <root>/<robot_id>/<episode_id>/rejected.jsonl
//! <root>/<robot_id>/<episode_id>/top/000000.jpg
//! <root>/<robot_id>/<episode_id>/bottom/000000.jpg
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rackbot_core::workcell::{Frame, View};
use serde::{Deserialize, Serialize};
use zune_jpeg::zune_core::bytestream::ZCursor;
use zune_jpeg::zune_core::colorspace::ColorSpace;
use zune_jpeg::zune_core::options::DecoderOptions;
use zune_jpeg::JpegDecoder;

use crate::api::CommandRequest;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EPISODE_FILE: &str = "episode.json";
pub const ACTIONS_FILE: &str = "actions.jsonl";
pub const REJECTED_FILE: &str = "rejected.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionRole {
    Calibrate,
    Setup,
    Push,
    Reset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushInfo {
    pub index_in_episode: usize,
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub predicted_intersection: bool,
    /// Candidates rejected before this one was accepted.
    pub rejected_before: usize,
}

/// One line of `actions.jsonl`: an accepted API command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    /// Acceptance timestamp from the robot's receipt.
    pub ts_ms: u64,
    pub command_id: u64,
    pub role: ActionRole,
    pub command: CommandRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub push: Option<PushInfo>,
}

/// One line of `rejected.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedCandidate {
    pub slot: usize,
    pub start: [f64; 2],
    pub end: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub ts_ms: u64,
    /// Camera sequence number.
    pub seq: u64,
    /// Path relative to the episode directory.
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: String,
    pub robot_id: String,
    pub start_ts_ms: u64,
    pub end_ts_ms: u64,
    pub aborted: Option<String>,
    pub pushes: usize,
    pub commands: usize,
    pub frames_top: Vec<FrameEntry>,
    pub frames_bottom: Vec<FrameEntry>,
    /// Rope particles in mm once the episode's last command settled.
    pub final_rope: Option<Vec<[f64; 2]>>,
}

impl EpisodeRecord {
    pub fn frames(&self, view: View) -> &[FrameEntry] {
        match view {
            View::Top => &self.frames_top,
            View::Bottom => &self.frames_bottom,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.end_ts_ms.saturating_sub(self.start_ts_ms) as f64 / 1000.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub robot_id: String,
    pub episode_id: String,
    pub duration_s: f64,
    pub pushes: usize,
    pub commands: usize,
    pub aborted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub top: [[f64; 3]; 3],
    pub bottom: [[f64; 3]; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub description: String,
    pub accept_mode: String,
    pub push_period_s: f64,
    pub max_pushes: usize,
    pub collection_seed: u64,
    /// Full rack configuration, TOML.
    pub rack_config: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub robot_ids: Vec<String>,
    pub environment: Environment,
    /// Sum of completed episode durations.
    pub total_duration_s: f64,
    /// Recursive size of the dataset root, this file included.
    pub dataset_size_bytes: u64,
    /// Accepted commands of completed episodes.
    pub cumulative_motion_commands: u64,
    pub camera_intrinsics: CameraIntrinsics,
    pub episodes: Vec<EpisodeSummary>,
}

pub fn episode_dir(root: &Path, robot_id: &str, episode_id: &str) -> PathBuf {
    root.join(robot_id).join(episode_id)
}

pub fn episode_id(index: usize) -> String {
    format!("ep-{index:04}")
}

pub fn frame_file(view: View, index: usize) -> String {
    format!("{view}/{index:06}.jpg")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    fs::write(path, bytes)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> std::io::Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

pub fn append_jsonl<T: Serialize>(file: &mut fs::File, value: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_vec(value).map_err(std::io::Error::other)?;
    line.push(b'\n');
    file.write_all(&line)
}

/// Parses a JSON-lines file; errors carry the 1-based line number.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?);
    }
    Ok(out)
}

pub fn read_manifest(root: &Path) -> std::io::Result<DatasetManifest> {
    read_json(&root.join(MANIFEST_FILE))
}

/// Total bytes of regular files below `root`.
pub fn dir_size(root: &Path) -> std::io::Result<u64> {
    let mut total = 0;
    for entry in walkdir::WalkDir::new(root) {
        let entry = entry.map_err(std::io::Error::other)?;
        if entry.file_type().is_file() {
            total += entry.metadata().map_err(std::io::Error::other)?.len();
        }
    }
    Ok(total)
}

/// Writes the manifest with a size field that includes the manifest itself.
pub fn write_manifest(root: &Path, manifest: &mut DatasetManifest) -> std::io::Result<()> {
    let path = root.join(MANIFEST_FILE);
    let _ = fs::remove_file(&path);
    let others = dir_size(root)?;
    manifest.dataset_size_bytes = others;
    for _ in 0..8 {
        let len = serde_json::to_vec_pretty(manifest).map_err(std::io::Error::other)?.len() as u64;
        if manifest.dataset_size_bytes == others + len {
            break;
        }
        manifest.dataset_size_bytes = others + len;
    }
    write_json(&path, manifest)
}

pub fn jpeg_dimensions(bytes: &[u8]) -> Option<(u32, u32)> {
    let mut decoder = JpegDecoder::new(ZCursor::new(bytes));
    decoder.decode_headers().ok()?;
    let info = decoder.info()?;
    Some((info.width as u32, info.height as u32))
}

pub fn decode_frame(view: View, bytes: &[u8]) -> Option<Frame> {
    let options = DecoderOptions::default().jpeg_set_out_colorspace(ColorSpace::RGB);
    let mut decoder = JpegDecoder::new_with_options(ZCursor::new(bytes), options);
    let pixels = decoder.decode().ok()?;
    let info = decoder.info()?;
    Some(Frame {
        view,
        width: info.width as u32,
        height: info.height as u32,
        pixels,
        timestamp_ms: 0,
        sequence: 0,
    })
}
