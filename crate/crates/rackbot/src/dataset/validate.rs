//! Dataset checker: walks a dataset directory and itemizes every broken
//! invariant.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rackbot_core::geom::Vec2;
use rackbot_core::workcell::{View, WorkcellConfig};
use serde::Serialize;

use super::layout::{
    dir_size, jpeg_dimensions, read_json, read_jsonl, read_manifest, ActionRecord, ActionRole, DatasetManifest,
    EpisodeRecord, ACTIONS_FILE, EPISODE_FILE,
};
use super::mask::RopeMask;
use crate::config::RackConfig;

pub const FRAME_INTERVAL_MS: f64 = 100.0;
pub const FRAME_TOLERANCE_MS: f64 = 10.0;
pub const PUSH_GAP_MS: (u64, u64) = (1500, 3000);
pub const SIZE_TOLERANCE: f64 = 0.001;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Manifest { message: String },
    ManifestMismatch { field: String, expected: String, found: String },
    MissingEpisode { episode: String },
    UnlistedEpisode { episode: String },
    UnreadableEpisode { episode: String, message: String },
    RecordMismatch { episode: String, field: String, expected: u64, found: u64 },
    MissingFrame { episode: String, view: View, file: String },
    UndecodableFrame { episode: String, view: View, file: String },
    WrongResolution { episode: String, view: View, file: String, width: u32, height: u32 },
    FrameOrder { episode: String, view: View, index: usize },
    FrameSpacing { episode: String, view: View, index: usize, gap_ms: u64 },
    FramesDoNotSpan { episode: String, view: View },
    ActionOrder { episode: String, line: usize },
    PushCount { episode: String, expected: usize, found: usize },
    PushIndex { episode: String, line: usize },
    PushSpacing { episode: String, index: usize, gap_ms: u64 },
    PushNotPredicted { episode: String, index: usize },
    PushWithoutFrame { episode: String, index: usize },
    PushMissesRope { episode: String, index: usize, frame: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Manifest { message } => write!(f, "manifest: {message}"),
            Violation::ManifestMismatch { field, expected, found } => {
                write!(f, "manifest field {field}: recomputed {expected}, recorded {found}")
            }
            Violation::MissingEpisode { episode } => write!(f, "{episode}: listed in manifest but missing"),
            Violation::UnlistedEpisode { episode } => write!(f, "{episode}: not listed in manifest"),
            Violation::UnreadableEpisode { episode, message } => write!(f, "{episode}: {message}"),
            Violation::RecordMismatch {
                episode,
                field,
                expected,
                found,
            } => write!(f, "{episode}: {field} is {found}, action log says {expected}"),
            Violation::MissingFrame { episode, view, file } => write!(f, "{episode}: {view} frame {file} missing"),
            Violation::UndecodableFrame { episode, view, file } => {
                write!(f, "{episode}: {view} frame {file} is not a readable JPEG")
            }
            Violation::WrongResolution {
                episode,
                view,
                file,
                width,
                height,
            } => write!(f, "{episode}: {view} frame {file} is {width}x{height}"),
            Violation::FrameOrder { episode, view, index } => {
                write!(f, "{episode}: {view} frame {index} out of order")
            }
            Violation::FrameSpacing {
                episode,
                view,
                index,
                gap_ms,
            } => write!(f, "{episode}: {view} frame {index} follows after {gap_ms} ms"),
            Violation::FramesDoNotSpan { episode, view } => {
                write!(f, "{episode}: {view} frames do not cover the episode")
            }
            Violation::ActionOrder { episode, line } => write!(f, "{episode}: action on line {line} out of order"),
            Violation::PushCount {
                episode,
                expected,
                found,
            } => write!(f, "{episode}: {found} pushes, expected {expected}"),
            Violation::PushIndex { episode, line } => write!(f, "{episode}: push on line {line} has a wrong index"),
            Violation::PushSpacing { episode, index, gap_ms } => {
                write!(f, "{episode}: push {index} accepted {gap_ms} ms after the previous one")
            }
            Violation::PushNotPredicted { episode, index } => {
                write!(f, "{episode}: push {index} executed without a predicted intersection")
            }
            Violation::PushWithoutFrame { episode, index } => {
                write!(f, "{episode}: no top frame precedes push {index}")
            }
            Violation::PushMissesRope { episode, index, frame } => {
                write!(f, "{episode}: push {index} misses the rope in {frame}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub episodes: usize,
    pub frames: usize,
    pub pushes: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

struct Checker<'a> {
    root: &'a Path,
    workcell: WorkcellConfig,
    max_pushes: usize,
    report: ValidationReport,
}

/// What an episode contributes to the manifest totals.
struct Totals {
    duration_s: f64,
    commands: u64,
}

impl Checker<'_> {
    fn flag(&mut self, v: Violation) {
        self.report.violations.push(v);
    }

    fn frames(&mut self, label: &str, dir: &Path, record: &EpisodeRecord, view: View, aborted: bool) {
        let frames = record.frames(view);
        let expected = view.resolution();
        for (i, entry) in frames.iter().enumerate() {
            self.report.frames += 1;
            match fs::read(dir.join(&entry.file)) {
                Err(_) => self.flag(Violation::MissingFrame {
                    episode: label.into(),
                    view,
                    file: entry.file.clone(),
                }),
                Ok(bytes) => match jpeg_dimensions(&bytes) {
                    None => self.flag(Violation::UndecodableFrame {
                        episode: label.into(),
                        view,
                        file: entry.file.clone(),
                    }),
                    Some(dims) if dims != expected => self.flag(Violation::WrongResolution {
                        episode: label.into(),
                        view,
                        file: entry.file.clone(),
                        width: dims.0,
                        height: dims.1,
                    }),
                    Some(_) => {}
                },
            }
            if i == 0 {
                continue;
            }
            let prev = &frames[i - 1];
            if entry.ts_ms <= prev.ts_ms || entry.file <= prev.file {
                self.flag(Violation::FrameOrder {
                    episode: label.into(),
                    view,
                    index: i,
                });
            } else {
                let gap = entry.ts_ms - prev.ts_ms;
                if (gap as f64 - FRAME_INTERVAL_MS).abs() > FRAME_TOLERANCE_MS && !aborted {
                    self.flag(Violation::FrameSpacing {
                        episode: label.into(),
                        view,
                        index: i,
                        gap_ms: gap,
                    });
                }
            }
        }
        if aborted {
            return;
        }
        let spans = match (frames.first(), frames.last()) {
            (Some(first), Some(last)) => first.ts_ms <= record.start_ts_ms && last.ts_ms >= record.end_ts_ms,
            _ => false,
        };
        if !spans {
            self.flag(Violation::FramesDoNotSpan {
                episode: label.into(),
                view,
            });
        }
    }

    fn push_hits_rope(&mut self, label: &str, dir: &Path, record: &EpisodeRecord, action: &ActionRecord, index: usize) {
        let Some(push) = &action.push else { return };
        let top = record.frames(View::Top);
        let Some(frame) = top.iter().rev().find(|f| f.ts_ms <= action.ts_ms) else {
            self.flag(Violation::PushWithoutFrame {
                episode: label.into(),
                index,
            });
            return;
        };
        // a missing or unreadable frame is already reported
        let Ok(bytes) = fs::read(dir.join(&frame.file)) else { return };
        let Some(mask) = RopeMask::from_jpeg(&bytes, &self.workcell) else { return };
        let ws = self.workcell.workspace_mm;
        let mm = |p: [f64; 2]| Vec2::new(p[0] * ws[0], p[1] * ws[1]);
        if !mask.intersects(mm(push.start), mm(push.end), self.workcell.footprint_radius_mm) {
            self.flag(Violation::PushMissesRope {
                episode: label.into(),
                index,
                frame: frame.file.clone(),
            });
        }
    }

    fn actions(&mut self, label: &str, dir: &Path, record: &EpisodeRecord, actions: &[ActionRecord], aborted: bool) {
        let mut last_push: Option<u64> = None;
        let mut pushes = 0;
        for (i, action) in actions.iter().enumerate() {
            if i > 0 && action.ts_ms < actions[i - 1].ts_ms {
                self.flag(Violation::ActionOrder {
                    episode: label.into(),
                    line: i + 1,
                });
            }
            if action.role != ActionRole::Push {
                continue;
            }
            let index = pushes;
            pushes += 1;
            self.report.pushes += 1;
            match &action.push {
                Some(p) if p.index_in_episode == index => {
                    if !p.predicted_intersection {
                        self.flag(Violation::PushNotPredicted {
                            episode: label.into(),
                            index,
                        });
                    }
                }
                _ => self.flag(Violation::PushIndex {
                    episode: label.into(),
                    line: i + 1,
                }),
            }
            if let Some(prev) = last_push {
                let gap = action.ts_ms.saturating_sub(prev);
                if !(PUSH_GAP_MS.0..=PUSH_GAP_MS.1).contains(&gap) {
                    self.flag(Violation::PushSpacing {
                        episode: label.into(),
                        index,
                        gap_ms: gap,
                    });
                }
            }
            last_push = Some(action.ts_ms);
            self.push_hits_rope(label, dir, record, action, index);
        }
        let expected_pushes = if aborted { pushes.min(self.max_pushes) } else { self.max_pushes };
        if pushes != expected_pushes {
            self.flag(Violation::PushCount {
                episode: label.into(),
                expected: expected_pushes,
                found: pushes,
            });
        }
        for (field, expected, found) in [
            ("pushes", pushes as u64, record.pushes as u64),
            ("commands", actions.len() as u64, record.commands as u64),
        ] {
            if expected != found {
                self.flag(Violation::RecordMismatch {
                    episode: label.into(),
                    field: field.into(),
                    expected,
                    found,
                });
            }
        }
    }

    fn episode(&mut self, robot_id: &str, episode_id: &str) -> Option<(EpisodeRecord, Totals)> {
        let label = format!("{robot_id}/{episode_id}");
        let dir = self.root.join(robot_id).join(episode_id);
        let record: EpisodeRecord = match read_json(&dir.join(EPISODE_FILE)) {
            Ok(r) => r,
            Err(e) => {
                self.flag(Violation::UnreadableEpisode {
                    episode: label,
                    message: format!("{EPISODE_FILE}: {e}"),
                });
                return None;
            }
        };
        let actions: Vec<ActionRecord> = match read_jsonl(&dir.join(ACTIONS_FILE)) {
            Ok(a) => a,
            Err(e) => {
                self.flag(Violation::UnreadableEpisode {
                    episode: label,
                    message: format!("{ACTIONS_FILE}: {e}"),
                });
                return None;
            }
        };
        self.report.episodes += 1;
        let aborted = record.aborted.is_some();
        for view in View::ALL {
            self.frames(&label, &dir, &record, view, aborted);
        }
        self.actions(&label, &dir, &record, &actions, aborted);
        let totals = Totals {
            duration_s: record.duration_s(),
            commands: actions.len() as u64,
        };
        Some((record, totals))
    }

    fn mismatch(&mut self, field: &str, expected: impl fmt::Display, found: impl fmt::Display) {
        self.flag(Violation::ManifestMismatch {
            field: field.into(),
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }

    fn manifest(&mut self, manifest: &DatasetManifest) {
        let on_disk = episodes_on_disk(self.root);
        let listed: BTreeSet<(String, String)> = manifest
            .episodes
            .iter()
            .map(|e| (e.robot_id.clone(), e.episode_id.clone()))
            .collect();
        for (robot, ep) in listed.difference(&on_disk) {
            self.flag(Violation::MissingEpisode {
                episode: format!("{robot}/{ep}"),
            });
        }
        for (robot, ep) in on_disk.difference(&listed) {
            self.flag(Violation::UnlistedEpisode {
                episode: format!("{robot}/{ep}"),
            });
        }

        let mut duration = 0.0;
        let mut commands = 0;
        for summary in &manifest.episodes {
            if !on_disk.contains(&(summary.robot_id.clone(), summary.episode_id.clone())) {
                continue;
            }
            let Some((record, totals)) = self.episode(&summary.robot_id, &summary.episode_id) else {
                continue;
            };
            let label = format!("{}/{}", summary.robot_id, summary.episode_id);
            if !manifest.robot_ids.contains(&record.robot_id) {
                self.flag(Violation::Manifest {
                    message: format!("{label}: robot {} not among robot_ids", record.robot_id),
                });
            }
            if summary.aborted != record.aborted.is_some()
                || summary.pushes != record.pushes
                || summary.commands != totals.commands as usize
                || summary.duration_s != totals.duration_s
            {
                self.mismatch(&format!("episodes[{label}]"), "episode record", "different summary");
            }
            if record.aborted.is_none() {
                duration += totals.duration_s;
                commands += totals.commands;
            }
        }
        for (robot, ep) in on_disk.difference(&listed) {
            // unlisted episodes are checked too, but not counted
            let _ = self.episode(robot, ep);
        }

        if (duration - manifest.total_duration_s).abs() > 1e-6 {
            self.mismatch("total_duration_s", duration, manifest.total_duration_s);
        }
        if commands != manifest.cumulative_motion_commands {
            self.mismatch("cumulative_motion_commands", commands, manifest.cumulative_motion_commands);
        }
        match dir_size(self.root) {
            Ok(size) => {
                let rel = (size as f64 - manifest.dataset_size_bytes as f64).abs() / (size.max(1) as f64);
                if rel > SIZE_TOLERANCE {
                    self.mismatch("dataset_size_bytes", size, manifest.dataset_size_bytes);
                }
            }
            Err(e) => self.flag(Violation::Manifest {
                message: format!("measuring dataset size: {e}"),
            }),
        }
        let top = self.workcell.camera(View::Top).intrinsics();
        let bottom = self.workcell.camera(View::Bottom).intrinsics();
        if manifest.camera_intrinsics.top != top {
            self.mismatch("camera_intrinsics.top", format!("{top:?}"), format!("{:?}", manifest.camera_intrinsics.top));
        }
        if manifest.camera_intrinsics.bottom != bottom {
            self.mismatch(
                "camera_intrinsics.bottom",
                format!("{bottom:?}"),
                format!("{:?}", manifest.camera_intrinsics.bottom),
            );
        }
        if manifest.schema_version != super::layout::SCHEMA_VERSION {
            self.mismatch("schema_version", super::layout::SCHEMA_VERSION, manifest.schema_version);
        }
    }
}

/// `(robot_id, episode_id)` of every directory holding an episode file.
fn episodes_on_disk(root: &Path) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    let Ok(robots) = fs::read_dir(root) else { return out };
    for robot in robots.flatten() {
        let name = robot.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') || !robot.path().is_dir() {
            continue;
        }
        let Ok(episodes) = fs::read_dir(robot.path()) else { continue };
        for ep in episodes.flatten() {
            if ep.path().join(EPISODE_FILE).is_file() {
                out.insert((name.clone(), ep.file_name().to_string_lossy().into_owned()));
            }
        }
    }
    out
}

/// Validates the dataset rooted at `root`.
pub fn validate_dataset(root: &Path) -> ValidationReport {
    let mut report = ValidationReport::default();
    let manifest = match read_manifest(root) {
        Ok(m) => m,
        Err(e) => {
            report.violations.push(Violation::Manifest {
                message: format!("unreadable: {e}"),
            });
            return report;
        }
    };
    let rack = match RackConfig::from_toml(&manifest.environment.rack_config) {
        Ok(r) => r,
        Err(e) => {
            report.violations.push(Violation::Manifest {
                message: format!("environment.rack_config: {e}"),
            });
            RackConfig::default()
        }
    };
    let mut checker = Checker {
        root,
        workcell: rack.cell(0).workcell,
        max_pushes: manifest.environment.max_pushes,
        report,
    };
    checker.manifest(&manifest);
    checker.report
}
