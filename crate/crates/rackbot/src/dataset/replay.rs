//! Re-executes recorded action logs against a fresh rack and compares the
//! settled rope with the recorded one.

use std::path::Path;
use std::time::Duration;

use serde::Serialize;

use super::layout::{read_json, read_jsonl, ActionRecord, EpisodeRecord, ACTIONS_FILE, EPISODE_FILE};
use crate::client::{ClientError, RobotClient};

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("no episodes recorded for {0}")]
    NoEpisodes(String),
    #[error("episode {0} not found")]
    UnknownEpisode(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeReplay {
    pub robot_id: String,
    pub episode_id: String,
    pub commands: usize,
    /// Receipts carried the same command identifiers as during collection.
    pub ids_match: bool,
    /// `None` when the episode recorded no final rope (aborted).
    pub identical: Option<bool>,
    pub max_deviation_mm: f64,
}

/// Episode ids recorded for one robot, in execution order.
pub fn robot_episodes(root: &Path, robot_id: &str) -> Vec<String> {
    let mut ids: Vec<String> = std::fs::read_dir(root.join(robot_id))
        .into_iter()
        .flatten()
        .flatten()
        .filter(|e| e.path().join(EPISODE_FILE).is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ids.sort();
    ids
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReplayError + '_ {
    move |source| ReplayError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Replays the robot's episodes in order, stopping after `until` if given.
/// The client must point at a freshly booted cell with the seed used
/// during collection.
pub fn replay_robot(
    client: &RobotClient,
    root: &Path,
    robot_id: &str,
    until: Option<&str>,
    idle_timeout: Duration,
) -> Result<Vec<EpisodeReplay>, ReplayError> {
    let episodes = robot_episodes(root, robot_id);
    if episodes.is_empty() {
        return Err(ReplayError::NoEpisodes(robot_id.into()));
    }
    if let Some(id) = until {
        if !episodes.iter().any(|e| e == id) {
            return Err(ReplayError::UnknownEpisode(format!("{robot_id}/{id}")));
        }
    }
    let poll = Duration::from_millis(2);
    let mut out = Vec::new();
    for id in episodes {
        let dir = root.join(robot_id).join(&id);
        let episode_path = dir.join(EPISODE_FILE);
        let record: EpisodeRecord = read_json(&episode_path).map_err(io_err(&episode_path))?;
        let actions_path = dir.join(ACTIONS_FILE);
        let actions: Vec<ActionRecord> = read_jsonl(&actions_path).map_err(io_err(&actions_path))?;
        let mut ids_match = true;
        for action in &actions {
            client.wait_idle(idle_timeout, poll)?;
            let receipt = client.command_retrying(&action.command, 3, Duration::from_millis(5))?;
            ids_match &= receipt.command_id == action.command_id;
        }
        client.wait_idle(idle_timeout, poll)?;
        let rope = client.sim_rope()?.particles;
        let (identical, max_deviation_mm) = match (&record.final_rope, &rope) {
            (Some(expected), Some(found)) => {
                let same_len = expected.len() == found.len();
                let bits_equal = same_len
                    && expected
                        .iter()
                        .flatten()
                        .zip(found.iter().flatten())
                        .all(|(a, b)| a.to_bits() == b.to_bits());
                let dev = expected
                    .iter()
                    .zip(found)
                    .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
                    .fold(0.0, f64::max);
                (Some(bits_equal), if same_len { dev } else { f64::INFINITY })
            }
            _ => (None, 0.0),
        };
        let done = until == Some(id.as_str());
        out.push(EpisodeReplay {
            robot_id: robot_id.into(),
            episode_id: id,
            commands: actions.len(),
            ids_match,
            identical,
            max_deviation_mm,
        });
        if done {
            break;
        }
    }
    Ok(out)
}
