use proptest::prelude::*;
use rackbot_core::geom::{Rect, Vec2};
use rackbot_core::kinematics::{
    plan_trajectory, Arm, ArmConfig, CoreXy, MotionProfile, MotorSteps, MoveTarget, NoiseModel,
    RobotPose,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn homed(noise: NoiseModel) -> Arm {
    let mut arm = Arm::new(ArmConfig::default(), noise).unwrap();
    arm.home_calibrate();
    arm
}

#[test]
fn corexy_round_trip_on_step_lattice() {
    let k = CoreXy::new(80.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        // step-aligned displacements are images of integer step pairs with a + b even
        let a: i64 = rng.random_range(-40_000..40_000);
        let b: i64 = 2 * rng.random_range(-20_000..20_000) + a.rem_euclid(2);
        let steps = MotorSteps::new(a, b);
        let v = k.inverse(steps);
        assert_eq!(k.forward(v), steps);
        assert_eq!(k.inverse(k.forward(v)), v);
    }
}

#[test]
fn zero_noise_excursion_returns_to_origin() {
    let mut arm = homed(NoiseModel::none());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let waypoints = (0..rng.random_range(1..5))
            .map(|_| Vec2::new(rng.random(), rng.random()))
            .collect();
        arm.execute_move(&MoveTarget::Xy(waypoints)).unwrap();
    }
    arm.execute_move(&MoveTarget::Xy(vec![Vec2::ZERO])).unwrap();
    assert_eq!((arm.actual().x, arm.actual().y), (0.0, 0.0));
    assert_eq!(arm.steps(), MotorSteps::ZERO);
    assert!(arm.home_switch_triggered());
}

/// Numerically integrates |dp/dt| with the midpoint rule.
fn integrated_length(traj: &rackbot_core::kinematics::Trajectory, n: usize) -> f64 {
    let dt = traj.duration() / n as f64;
    (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            traj.speed(t) * dt
        })
        .sum()
}

#[test]
fn trapezoid_reference_case() {
    let travel = Rect::from_size(190.0, 250.0);
    let traj = plan_trajectory(
        &[Vec2::new(10.0, 20.0), Vec2::new(110.0, 20.0)],
        MotionProfile { v_max: 100.0, a_max: 500.0 },
        &travel,
    )
    .unwrap();
    // ramp time v/a = 0.2 s covers v²/2a = 10 mm each, cruise 80 mm at 100 mm/s
    let expected = 2.0 * (100.0 / 500.0) + (100.0 - 100.0 * 100.0 / 500.0) / 100.0;
    assert!((traj.duration() - expected).abs() < 1e-9);
    assert!((traj.duration() - 1.2).abs() < 1e-9);
    assert!((integrated_length(&traj, 200_000) - 100.0).abs() < 1e-6);

    let short = plan_trajectory(
        &[Vec2::new(10.0, 20.0), Vec2::new(15.0, 20.0)],
        MotionProfile { v_max: 100.0, a_max: 500.0 },
        &travel,
    )
    .unwrap();
    let v_peak = (500.0f64 * 5.0).sqrt();
    assert!((short.peak_speed() - v_peak).abs() < 1e-9);
    assert!((short.duration() - 2.0 * v_peak / 500.0).abs() < 1e-9);
    assert!((integrated_length(&short, 100_000) - 5.0).abs() < 1e-6);
}

#[test]
fn sampled_speed_and_acceleration_within_limits() {
    let travel = Rect::from_size(190.0, 250.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-3;
    for _ in 0..100 {
        let profile = MotionProfile {
            v_max: rng.random_range(20.0..400.0),
            a_max: rng.random_range(100.0..5000.0),
        };
        let waypoints: Vec<Vec2> = (0..rng.random_range(2..7))
            .map(|_| Vec2::new(rng.random_range(0.0..190.0), rng.random_range(0.0..250.0)))
            .collect();
        let traj = plan_trajectory(&waypoints, profile, &travel).unwrap();
        assert_eq!(traj.sample(0.0), waypoints[0]);
        assert_eq!(traj.sample(traj.duration()), *waypoints.last().unwrap());
        let v_lim = profile.v_max * (1.0 + 1e-6);
        let a_lim = profile.a_max * (1.0 + 1e-6);
        let steps = (traj.duration() / h) as usize;
        for i in 1..steps {
            let t = i as f64 * h;
            let (p0, p1, p2) = (traj.sample(t - h), traj.sample(t), traj.sample(t + h));
            let speed = (p2 - p1).norm() / h;
            let accel = ((p2 - p1) - (p1 - p0)).norm() / (h * h);
            assert!(speed <= v_lim, "speed {speed} > {}", profile.v_max);
            assert!(accel <= a_lim, "accel {accel} > {}", profile.a_max);
        }
    }
}

#[derive(Clone, Debug)]
enum Cmd {
    Xy(Vec<(f64, f64)>),
    Z(f64),
    R(f64),
    D(f64),
    Home,
}

impl Cmd {
    fn target(&self) -> Option<MoveTarget> {
        Some(match self {
            Cmd::Xy(w) => MoveTarget::Xy(w.iter().map(|&(x, y)| Vec2::new(x, y)).collect()),
            Cmd::Z(z) => MoveTarget::Z(*z),
            Cmd::R(r) => MoveTarget::Rotate(*r),
            Cmd::D(d) => MoveTarget::Gripper(*d),
            Cmd::Home => return None,
        })
    }
}

fn cmd_strategy() -> impl Strategy<Value = Cmd> {
    prop_oneof![
        4 => prop::collection::vec((-0.3f64..1.3, -0.3f64..1.3), 1..4).prop_map(Cmd::Xy),
        1 => (-0.2f64..1.2).prop_map(Cmd::Z),
        1 => (-100.0f64..100.0).prop_map(Cmd::R),
        1 => (-0.2f64..1.2).prop_map(Cmd::D),
        1 => Just(Cmd::Home),
    ]
}

fn run_log(noise: NoiseModel, cmds: &[Cmd]) -> Vec<(RobotPose, RobotPose, bool)> {
    let mut arm = homed(noise);
    let mut log = Vec::new();
    for c in cmds {
        match c.target() {
            Some(t) => {
                let out = arm.execute_move(&t);
                log.push((arm.commanded(), arm.actual(), matches!(out, Ok(ref o) if o.collision.is_some())));
            }
            None => {
                arm.home_calibrate();
                log.push((arm.commanded(), arm.actual(), false));
            }
        }
    }
    log
}

fn in_range(p: &RobotPose) -> bool {
    (0.0..=1.0).contains(&p.x)
        && (0.0..=1.0).contains(&p.y)
        && (0.0..=1.0).contains(&p.z)
        && (-90.0..=90.0).contains(&p.r)
        && (0.0..=1.0).contains(&p.d)
}

proptest! {
    #[test]
    fn corexy_lattice_identity(a in -1_000_000i64..1_000_000, half in -500_000i64..500_000) {
        let k = CoreXy::new(80.0);
        let steps = MotorSteps::new(a, 2 * half + a.rem_euclid(2));
        prop_assert_eq!(k.forward(k.inverse(steps)), steps);
    }

    #[test]
    fn zero_noise_logs_are_bit_identical(cmds in prop::collection::vec(cmd_strategy(), 1..40)) {
        let a = run_log(NoiseModel::none(), &cmds);
        let b = run_log(NoiseModel::none(), &cmds);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn seeded_noise_logs_are_bit_identical(
        seed in any::<u64>(),
        cmds in prop::collection::vec(cmd_strategy(), 1..40),
    ) {
        let noise = NoiseModel::default().with_seed(seed);
        prop_assert_eq!(run_log(noise, &cmds), run_log(noise, &cmds));
    }

    #[test]
    fn actual_pose_stays_in_range(
        seed in any::<u64>(),
        cmds in prop::collection::vec(cmd_strategy(), 1..40),
    ) {
        // exaggerated noise makes clamping actually happen
        let noise = NoiseModel {
            sigma_xy_mm: 5.0,
            sigma_z_mm: 5.0,
            ..NoiseModel::default().with_seed(seed)
        };
        for (commanded, actual, _) in run_log(noise, &cmds) {
            prop_assert!(in_range(&actual), "{:?}", actual);
            prop_assert!(in_range(&commanded), "{:?}", commanded);
        }
    }

    #[test]
    fn boundary_violations_always_collide(
        seed in any::<u64>(),
        start in (0.0f64..1.0, 0.0f64..1.0),
        target in (-0.5f64..1.5, -0.5f64..1.5),
    ) {
        let mut arm = homed(NoiseModel::default().with_seed(seed));
        arm.execute_move(&MoveTarget::Xy(vec![Vec2::new(start.0, start.1)])).unwrap();
        let out = arm
            .execute_move(&MoveTarget::Xy(vec![Vec2::new(target.0, target.1)]))
            .unwrap();
        let outside = !(0.0..=1.0).contains(&target.0) || !(0.0..=1.0).contains(&target.1);
        prop_assert_eq!(out.collision.is_some(), outside);
        if let Some(event) = out.collision {
            prop_assert_eq!(event.pose_at_stop, arm.actual());
            let on_wall = [arm.actual().x, arm.actual().y]
                .iter()
                .any(|v| *v == 0.0 || *v == 1.0);
            prop_assert!(on_wall);
        }
    }
}
