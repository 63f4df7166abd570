use std::fs;

use proptest::prelude::*;
use rackbot::api::CommandRequest;
use rackbot::config::RackConfig;
use rackbot::dataset::collect::{build_manifest, CollectConfig};
use rackbot::dataset::layout::{
    append_jsonl, dir_size, episode_id, frame_file, read_jsonl, read_manifest, write_manifest, ActionRecord,
    ActionRole, EpisodeRecord, PushInfo,
};
use rackbot_core::workcell::View;

fn record(robot: usize, ep: usize, start: u64, len: u64, commands: usize, aborted: bool) -> EpisodeRecord {
    EpisodeRecord {
        episode_id: episode_id(ep),
        robot_id: format!("robot-{robot:02}"),
        start_ts_ms: start,
        end_ts_ms: start + len,
        aborted: aborted.then(|| "fault".to_string()),
        pushes: commands / 2,
        commands,
        frames_top: Vec::new(),
        frames_bottom: Vec::new(),
        final_rope: None,
    }
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn action() -> impl Strategy<Value = ActionRecord> {
    (
        any::<u64>(),
        any::<u64>(),
        prop::collection::vec((unit(), unit()), 0..5),
        unit(),
        unit(),
        any::<bool>(),
    )
        .prop_map(|(ts_ms, command_id, waypoints, x, y, push)| {
            let wp: Vec<[f64; 2]> = waypoints.iter().map(|&(a, b)| [a, b]).collect();
            ActionRecord {
                ts_ms,
                command_id,
                role: if push { ActionRole::Push } else { ActionRole::Reset },
                command: CommandRequest::move_path(&wp, x, y),
                push: push.then(|| PushInfo {
                    index_in_episode: command_id as usize % 10,
                    start: wp.first().copied().unwrap_or([x, y]),
                    end: [x, y],
                    predicted_intersection: true,
                    rejected_before: (ts_ms % 500) as usize,
                }),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frame_names_sort_like_indices(a in 0usize..1_000_000, b in 0usize..1_000_000) {
        for view in View::ALL {
            prop_assert_eq!(frame_file(view, a).cmp(&frame_file(view, b)), a.cmp(&b));
        }
        prop_assert_eq!(episode_id(a % 10_000).cmp(&episode_id(b % 10_000)), (a % 10_000).cmp(&(b % 10_000)));
    }

    #[test]
    fn manifest_totals_skip_aborted(eps in prop::collection::vec((0u64..1_000_000, 0u64..600_000, 0usize..200, any::<bool>()), 0..12)) {
        let records: Vec<EpisodeRecord> = eps
            .iter()
            .enumerate()
            .map(|(i, &(s, l, c, ab))| record(i % 3, i, s, l, c, ab))
            .collect();
        let m = build_manifest(&RackConfig::default(), vec!["robot-00".into()], &CollectConfig::default(), &records);
        let mut commands = 0u64;
        let mut ms = 0u64;
        for &(_, l, c, ab) in &eps {
            if !ab {
                commands += c as u64;
                ms += l;
            }
        }
        prop_assert_eq!(m.cumulative_motion_commands, commands);
        prop_assert!((m.total_duration_s - ms as f64 / 1000.0).abs() < 1e-6);
        prop_assert_eq!(m.episodes.len(), records.len());
        prop_assert_eq!(m.episodes.iter().filter(|e| e.aborted).count(), eps.iter().filter(|e| e.3).count());
    }

    #[test]
    fn manifest_size_counts_itself(files in prop::collection::vec(0usize..20_000, 0..6), desc in "[a-z ]{0,300}") {
        let tmp = tempfile::tempdir().unwrap();
        for (i, n) in files.iter().enumerate() {
            fs::write(tmp.path().join(format!("f{i}")), vec![7u8; *n]).unwrap();
        }
        let cfg = CollectConfig { description: desc, ..CollectConfig::default() };
        let mut m = build_manifest(&RackConfig::default(), Vec::new(), &cfg, &[]);
        write_manifest(tmp.path(), &mut m).unwrap();
        prop_assert_eq!(m.dataset_size_bytes, dir_size(tmp.path()).unwrap());
        prop_assert_eq!(read_manifest(tmp.path()).unwrap(), m);
    }

    #[test]
    fn actions_round_trip_bitwise(actions in prop::collection::vec(action(), 0..20)) {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("actions.jsonl");
        let mut file = fs::File::create(&path).unwrap();
        for a in &actions {
            append_jsonl(&mut file, a).unwrap();
        }
        drop(file);
        let back: Vec<ActionRecord> = read_jsonl(&path).unwrap();
        prop_assert_eq!(back, actions);
    }
}

#[test]
fn bad_jsonl_line_is_located() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("x.jsonl");
    fs::write(&path, "{\"slot\":0,\"start\":[0,0],\"end\":[1,1]}\n\nnot json\n").unwrap();
    let err = read_jsonl::<rackbot::dataset::layout::RejectedCandidate>(&path).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}
