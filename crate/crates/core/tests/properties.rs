use approx::assert_relative_eq;
use proptest::prelude::*;

use magtrap::analysis::{
    avg_force_in_radius, bz_zero_crossing, distance_sweep, trap_aspect_ratio, trap_center, SweepConfig,
    TrapMapOptions,
};
use magtrap::field::{evaluate_grid, EvaluationGrid, ForceField};
use magtrap::geometry::{build_array, MagnetArray, RobotMagnet};
use magtrap::objective::{evaluate_loss, LossConfig};
use magtrap::optimizer::{mirror_angles, multi_restart_problem, AdamConfig, Problem, RestartPolicy};
use magtrap::Vec3;

fn robot() -> RobotMagnet<f64> {
    RobotMagnet::cylinder(1.32, 1e-3, 2e-3).unwrap()
}

fn array(n: usize, angles: &[f64]) -> MagnetArray<f64> {
    build_array(n, 0.0508, 1.275, 0.0, Some(0.12))
        .unwrap()
        .with_angles(&angles[..n])
        .unwrap()
}

fn grid() -> EvaluationGrid<f64> {
    EvaluationGrid::new(0.089, 0.010, 8, 8).unwrap()
}

fn count() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(4), Just(6)]
}

fn angles() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..360.0f64, 6)
}

fn assert_forces_close(a: &ForceField<f64>, b: &ForceField<f64>, rel: f64) {
    for (fa, fb) in a.forces().iter().zip(b.forces()) {
        let scale = fa.norm().max(fb.norm());
        assert!((*fa - *fb).norm() <= rel * scale, "{fa:?} vs {fb:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn remanence_scales_force_linearly(n in count(), a in angles(), s in 0.2..5.0f64) {
        let base = array(n, &a);
        let scaled = base.scale_remanence(s).unwrap();
        let robot = robot();
        let f0 = evaluate_grid(&base, &grid(), &robot).unwrap();
        let f1 = evaluate_grid(&scaled, &grid(), &robot).unwrap();
        let c = [0.0, 0.089];
        let m0 = avg_force_in_radius(&f0, c, 0.010).unwrap();
        let m1 = avg_force_in_radius(&f1, c, 0.010).unwrap();
        prop_assert!((m1 - s * m0).abs() <= 1e-12 * m1);
    }

    #[test]
    fn bz_crossing_ignores_remanence(a in angles(), s in 0.2..5.0f64) {
        let base = array(2, &a);
        let scaled = base.scale_remanence(s).unwrap();
        match (bz_zero_crossing(&base, 0.001, 0.3), bz_zero_crossing(&scaled, 0.001, 0.3)) {
            (Ok(y0), Ok(y1)) => prop_assert!((y0 - y1).abs() <= 1e-9),
            (Err(_), Err(_)) => {}
            (r0, r1) => prop_assert!(false, "{r0:?} vs {r1:?}"),
        }
    }

    #[test]
    fn half_turn_leaves_forces_unchanged(n in count(), a in angles()) {
        let flipped: Vec<f64> = a.iter().map(|x| x + 180.0).collect();
        let robot = robot();
        let f0 = evaluate_grid(&array(n, &a), &grid(), &robot).unwrap();
        let f1 = evaluate_grid(&array(n, &flipped), &grid(), &robot).unwrap();
        assert_forces_close(&f0, &f1, 1e-12);
    }

    #[test]
    fn z_reflection_leaves_in_plane_forces_unchanged(n in count(), a in angles()) {
        let robot = robot();
        let f0 = evaluate_grid(&array(n, &a), &grid(), &robot).unwrap();
        let f1 = evaluate_grid(&array(n, &mirror_angles(&a[..n])), &grid(), &robot).unwrap();
        for (p, q) in f0.forces().iter().zip(f1.forces()) {
            let scale = p.norm();
            prop_assert!((p.x - q.x).abs() <= 1e-10 * scale);
            prop_assert!((p.y - q.y).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn aspect_ratio_at_least_one(n in count(), a in angles(), d in 0.04..0.12f64) {
        let opts = TrapMapOptions { half_width: 0.010, resolution: 21 };
        if let Ok(r) = trap_aspect_ratio(&array(n, &a), &robot(), d, 1e-4, &opts) {
            prop_assert!(r.ratio >= 1.0, "{r:?}");
        }
    }

    #[test]
    fn spring_field_centers_on_trap(k in 1e-6..1e2f64, odd in any::<bool>(), y in 0.01..0.2f64) {
        let n = if odd { 21 } else { 20 };
        let trap = Vec3::new(0.0, y, 0.0);
        let points: Vec<Vec3<f64>> = (0..n * n)
            .map(|i| {
                let u = -0.01 + 0.02 * (i % n) as f64 / (n - 1) as f64;
                let v = -0.01 + 0.02 * (i / n) as f64 / (n - 1) as f64;
                Vec3::new(u, y + v, 0.0)
            })
            .collect();
        let forces = points.iter().map(|p| (trap - *p) * k).collect();
        let field = ForceField::from_parts(points, forces, None).unwrap();
        let c = trap_center(&field).unwrap();
        prop_assert!(c[0].abs() <= 1e-12 && (c[1] - y).abs() <= 1e-12, "{c:?}");
    }

    #[test]
    fn loss_ignores_point_order(n in count(), a in angles(), seed in any::<u64>()) {
        let g = grid();
        let mut order: Vec<usize> = (0..g.len()).collect();
        // Fisher-Yates driven by a tiny LCG keeps the case reproducible from the seed
        let mut state = seed;
        for i in (1..order.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (state >> 33) as usize % (i + 1));
        }
        let shuffled = g.permuted(&order).unwrap();
        let cfg = LossConfig::new(1.0, 1.0, 0.05).unwrap();
        let arr = array(n, &a);
        let l0 = evaluate_loss(&arr, &g, &robot(), &cfg).unwrap();
        let l1 = evaluate_loss(&arr, &shuffled, &robot(), &cfg).unwrap();
        assert_relative_eq!(l0.total, l1.total, max_relative = 1e-12);
        assert_relative_eq!(l0.direction, l1.direction, max_relative = 1e-12);
    }
}

#[test]
fn spring_field_target_is_its_own_trap() {
    // the target directions themselves have unit in-plane magnitude everywhere,
    // so every point ties and the center is the grid centroid, i.e. the trap
    let g: EvaluationGrid<f64> = EvaluationGrid::new(0.05, 0.01, 20, 20).unwrap();
    let forces = g
        .points()
        .iter()
        .map(|p| (g.trap_point() - *p) / (g.trap_point() - *p).norm())
        .collect();
    let field = ForceField::from_parts(g.points().to_vec(), forces, None).unwrap();
    let c = trap_center(&field).unwrap();
    assert!(c[0].abs() < 1e-12 && (c[1] - 0.05).abs() < 1e-12, "{c:?}");
}

#[test]
fn single_point_sweep_matches_direct_search() {
    let policy = RestartPolicy::default();
    let adam = AdamConfig::default();
    let robot = robot();
    let cfg = SweepConfig {
        counts: vec![2],
        distances: vec![0.089],
        edge_length: 0.0508,
        remanence: 1.275,
        extra_spacing: 0.0,
        pitch_override: Some(0.12),
        robot,
        grid_half_width: 0.010,
        grid_resolution: (20, 20),
        loss: LossConfig::direction_only(),
        tune: false,
        gamma: 1.5,
        policy: policy.clone(),
        adam,
        continuation: false,
        map: TrapMapOptions::default(),
        force_radius: 0.010,
        aspect_threshold: 1e-4,
        smoothing_window: 5,
    };
    let table = distance_sweep(&cfg).unwrap();
    assert_eq!(table.rows.len(), 1);
    let row = &table.rows[0];

    let array = build_array(2, 0.0508, 1.275, 0.0, Some(0.12)).unwrap();
    let g = EvaluationGrid::new(0.089, 0.010, 20, 20).unwrap();
    let problem = Problem::new(&array, &g, &robot, LossConfig::direction_only()).unwrap();
    let direct = multi_restart_problem(&problem, &policy, &adam, None).unwrap();
    assert_eq!(row.angles_deg, direct.best_angles_deg);
    assert_eq!(row.loss, direct.best_loss);
    assert_eq!(row.accuracy, direct.best_accuracy);
}
