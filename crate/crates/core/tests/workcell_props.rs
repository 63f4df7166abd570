use proptest::prelude::*;
use rackbot_core::geom::Vec2;
use rackbot_core::kinematics::RobotPose;
use rackbot_core::sampling::{sample_push, Sweep};
use rackbot_core::workcell::{
    mask_intersects_sweep, render, simulate_path, FloorMode, MaskProbe, RopeState, View,
    WorkcellConfig,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn random_pushes(cfg: &WorkcellConfig, rope: &RopeState, rng: &mut ChaCha8Rng, n: usize) -> RopeState {
    let mut state = rope.clone();
    let mut done = 0;
    while done < n {
        let (a, b) = sample_push(rng).to_mm(cfg.workspace_mm);
        if cfg.predict(&state, a, b) {
            state = cfg.push(&state, a, b);
            done += 1;
        }
    }
    state
}

/// Gripper parked in the far corner, away from where the rope can be.
const PARKED: RobotPose = RobotPose { x: 1.0, y: 1.0, z: 1.0, r: 0.0, d: 1.0 };

#[test]
fn push_soak_keeps_invariants() {
    let cfg = WorkcellConfig::default();
    let mut state = cfg.initial_rope().unwrap();
    let anchor = state.anchor();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut pushes = 0;
    while pushes < 1000 {
        let (a, b) = sample_push(&mut rng).to_mm(cfg.workspace_mm);
        let touched = cfg.predict(&state, a, b);
        let next = cfg.push(&state, a, b);
        if !touched {
            assert_eq!(next, state);
            continue;
        }
        state = next;
        pushes += 1;
        assert_eq!(state.anchor(), anchor);
        assert!(state.max_strain() <= cfg.rope.tolerance, "strain {}", state.max_strain());
        assert!(state.is_contained());
    }
}

#[test]
fn reset_after_random_pushes() {
    let cfg = WorkcellConfig::default();
    let line = cfg.nominal_line();
    let rope = cfg.initial_rope().unwrap();
    let mut worst = 0.0f64;
    let mut worst_change = 0.0f64;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let messy = random_pushes(&cfg, &rope, &mut rng, 10);
        let (reset, sweeps) = cfg.reset_rope(&messy);
        assert!(sweeps.len() <= 12);
        let dev = line.max_deviation(&reset.particles);
        worst = worst.max(dev);
        let (again, _) = cfg.reset_rope(&reset);
        worst_change = worst_change.max((line.max_deviation(&again.particles) - dev).abs());
    }
    assert!(worst <= 15.0, "worst post-reset deviation {worst} mm");
    assert!(worst_change < 1.0, "second reset moved deviation by {worst_change} mm");
}

#[test]
fn straight_rope_reset_is_a_fixed_point() {
    let cfg = WorkcellConfig::default();
    let rope = cfg.initial_rope().unwrap();
    let (after, sweeps) = cfg.reset_rope(&rope);
    assert!(sweeps.len() <= 2);
    let line = cfg.nominal_line();
    assert_eq!(line.max_deviation(&after.particles), line.max_deviation(&rope.particles));
}

#[test]
fn reset_from_images_alone() {
    let cfg = WorkcellConfig::default();
    let line = cfg.nominal_line();
    let cam = cfg.camera(View::Top);
    let rope = cfg.initial_rope().unwrap();
    for trial in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + trial);
        let mut state = random_pushes(&cfg, &rope, &mut rng, 10);
        let mut planner = cfg.reset_planner();
        loop {
            let frame = render(View::Top, &PARKED, Some(&state), &cfg);
            let mask = cfg.segment_rope(&frame);
            let probe = MaskProbe { mask: &mask, camera: &cam };
            let Some(sweep) = planner.next_sweep(&probe) else { break };
            state = cfg.push(&state, sweep.start, sweep.end);
        }
        assert!(planner.issued() <= 12);
        let dev = line.max_deviation(&state.particles);
        assert!(dev <= 15.0, "trial {trial}: {dev} mm");
    }
}

#[test]
fn render_shapes_and_background() {
    let cfg = WorkcellConfig::default();
    let rope = cfg.initial_rope().unwrap();
    let top = render(View::Top, &RobotPose::HOME, Some(&rope), &cfg);
    assert_eq!((top.width, top.height), (1280, 720));
    assert_eq!(top.pixels.len(), 1280 * 720 * 3);
    let bottom = render(View::Bottom, &RobotPose::HOME, Some(&rope), &cfg);
    assert_eq!((bottom.width, bottom.height), (640, 480));

    let dim = WorkcellConfig { lighting: 0.8, ..cfg.clone() };
    let empty = render(View::Top, &PARKED, None, &dim);
    let lit = dim.floor_color.map(|c| (c as f64 * 0.8).round() as u8);
    let gripper_pixels = empty.pixels.chunks(3).filter(|p| *p != lit).count();
    let cam = dim.camera(View::Top);
    let gripper_area = std::f64::consts::PI * (dim.footprint_radius_mm * cam.scale).powi(2);
    // only the parked gripper differs from the floor
    assert!((gripper_pixels as f64) < gripper_area * 1.1);

    let opaque = WorkcellConfig { floor_mode: FloorMode::OpaqueInlay, ..cfg.clone() };
    let hidden = render(View::Bottom, &RobotPose::HOME, Some(&rope), &opaque);
    assert!(hidden.pixels.chunks(3).all(|p| p == opaque.floor_color));
    assert!(cfg.segment_rope(&render(View::Top, &PARKED, None, &cfg)).is_empty());
}

#[test]
fn mask_area_matches_stroke_area() {
    let cfg = WorkcellConfig::default();
    let rope = cfg.initial_rope().unwrap();
    let frame = render(View::Top, &PARKED, Some(&rope), &cfg);
    let mask = cfg.segment_rope(&frame);
    let s = cfg.camera(View::Top).scale;
    let expected = 2.0 * rope.radius * cfg.rope.length_mm * s * s;
    let area = mask.count() as f64;
    assert!((area - expected).abs() <= 0.1 * expected, "area {area}, expected {expected}");
    let cam = cfg.camera(View::Top);
    for p in &rope.particles {
        let (u, v) = cam.to_pixel(*p);
        assert!(mask.get(u as u32, v as u32));
    }
}

#[test]
fn projected_particles_fall_inside_mask_after_pushes() {
    let cfg = WorkcellConfig::default();
    let cam = cfg.camera(View::Top);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let rope = random_pushes(&cfg, &cfg.initial_rope().unwrap(), &mut rng, 10);
    let frame = render(View::Top, &PARKED, Some(&rope), &cfg);
    let mask = cfg.segment_rope(&frame);
    for p in &rope.particles {
        let (u, v) = cam.to_pixel(*p);
        assert!(mask.get(u as u32, v as u32), "particle {p:?} missing from mask");
    }
}

#[test]
fn predictor_agrees_with_pixel_oracle() {
    let cfg = WorkcellConfig::default();
    let cam = cfg.camera(View::Top);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut agree = 0;
    let mut total = 0;
    let mut state = cfg.initial_rope().unwrap();
    for round in 0..100 {
        if round % 10 == 0 {
            state = cfg.initial_rope().unwrap();
        }
        state = random_pushes(&cfg, &state, &mut rng, 1);
        let frame = render(View::Top, &PARKED, Some(&state), &cfg);
        let mask = cfg.segment_rope(&frame);
        for _ in 0..100 {
            let (a, b) = sample_push(&mut rng).to_mm(cfg.workspace_mm);
            let geometric = cfg.predict(&state, a, b);
            let pixels = mask_intersects_sweep(&mask, &cam, a, b, cfg.footprint_radius_mm);
            agree += usize::from(geometric == pixels);
            total += 1;
        }
    }
    let rate = agree as f64 / total as f64;
    assert_eq!(total, 10_000);
    assert!(rate >= 0.99, "agreement {rate}");
}

#[test]
fn push_starts_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0u32; 100];
    let n = 10_000;
    for _ in 0..n {
        let s = sample_push(&mut rng);
        let i = ((s.start.x * 10.0) as usize).min(9);
        let j = ((s.start.y * 10.0) as usize).min(9);
        counts[i * 10 + j] += 1;
    }
    let expected = n as f64 / 100.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(99.0).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-squared {stat} >= {critical}");
}

/// Replays a fixed list of words, then counts upwards.
struct Scripted {
    words: Vec<u64>,
    next: usize,
}

impl RngCore for Scripted {
    fn next_u32(&mut self) -> u32 {
        self.next_u64() as u32
    }
    fn next_u64(&mut self) -> u64 {
        let w = self.words.get(self.next).copied().unwrap_or((self.next as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.next += 1;
        w
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }
}

#[test]
fn zero_length_candidates_are_redrawn() {
    let same = 1u64 << 62;
    let mut rng = Scripted { words: vec![same; 4], next: 0 };
    let sweep = sample_push(&mut rng);
    assert_ne!(sweep.start, sweep.end);
    assert!(rng.next > 4, "degenerate draw was not discarded");
}

fn rope_strategy() -> impl Strategy<Value = RopeState> {
    (any::<u64>(), 0usize..6).prop_map(|(seed, n)| {
        let cfg = WorkcellConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_pushes(&cfg, &cfg.initial_rope().unwrap(), &mut rng, n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_predicted_contact_means_no_change(
        rope in rope_strategy(),
        sx in 0.0f64..1.0, sy in 0.0f64..1.0, ex in 0.0f64..1.0, ey in 0.0f64..1.0,
    ) {
        let cfg = WorkcellConfig::default();
        let (a, b) = Sweep { start: Vec2::new(sx, sy), end: Vec2::new(ex, ey) }.to_mm(cfg.workspace_mm);
        if !cfg.predict(&rope, a, b) {
            prop_assert_eq!(cfg.push(&rope, a, b), rope);
        }
    }

    #[test]
    fn pushes_are_deterministic(
        rope in rope_strategy(),
        sx in 0.0f64..1.0, sy in 0.0f64..1.0, ex in 0.0f64..1.0, ey in 0.0f64..1.0,
    ) {
        let cfg = WorkcellConfig::default();
        let (a, b) = Sweep { start: Vec2::new(sx, sy), end: Vec2::new(ex, ey) }.to_mm(cfg.workspace_mm);
        prop_assert_eq!(cfg.push(&rope, a, b), cfg.push(&rope, a, b));
        let path = simulate_path(&rope, &[a, b], cfg.footprint_radius_mm, &cfg.rope, None);
        prop_assert_eq!(path.state, cfg.push(&rope, a, b));
    }

    #[test]
    fn render_is_deterministic(
        rope in rope_strategy(),
        x in 0.0f64..1.0, y in 0.0f64..1.0, r in -90.0f64..90.0, d in 0.0f64..1.0,
    ) {
        let cfg = WorkcellConfig::default();
        let pose = RobotPose { x, y, z: 0.0, r, d };
        for view in View::ALL {
            prop_assert_eq!(
                render(view, &pose, Some(&rope), &cfg),
                render(view, &pose, Some(&rope), &cfg)
            );
        }
    }
}
