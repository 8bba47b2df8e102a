use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapecoh::flows::*;
use shapecoh::{Mat2, Vec2};

fn fd_jacobian(sys: &FlowSystem, z: Vec2, t_a: f64, t_b: f64, step: f64, h: f64) -> Mat2 {
    let col = |d: Vec2| {
        let p = flow_map_unwrapped(sys, z + d, t_a, t_b, step).unwrap();
        let m = flow_map_unwrapped(sys, z - d, t_a, t_b, step).unwrap();
        (p - m) * (0.5 / h)
    };
    Mat2::from_cols(col(Vec2::new(h, 0.0)), col(Vec2::new(0.0, h)))
}

fn random_point(rng: &mut ChaCha8Rng, d: &DomainBox, margin: f64) -> Vec2 {
    Vec2::new(
        rng.random_range(d.x_min + margin * d.width()..d.x_max - margin * d.width()),
        rng.random_range(d.y_min + margin * d.height()..d.y_max - margin * d.height()),
    )
}

#[test]
fn double_gyre_round_trip() {
    let sys = FlowSystem::new(SystemId::DoubleGyre);
    let z = Vec2::new(0.3, 0.4);
    let p = flow_map(&sys, z, 0.0, 10.0, 1e-3).unwrap();
    let back = flow_map(&sys, p, 10.0, 0.0, 1e-3).unwrap();
    assert!(back.dist(z) < 1e-6, "{:e}", back.dist(z));
}

#[test]
fn double_gyre_jacobian_matches_finite_differences() {
    let sys = FlowSystem::new(SystemId::DoubleGyre);
    let z = Vec2::new(0.7, 0.3);
    let jet = flow_jacobian(&sys, z, 0.0, 5.0, 1e-3).unwrap();
    let fd = fd_jacobian(&sys, z, 0.0, 5.0, 1e-3, 1e-6);
    assert!(jet.jacobian.max_abs_diff(&fd) < 1e-4, "{:?} vs {fd:?}", jet.jacobian);
}

#[test]
fn variational_jacobian_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases = [(SystemId::DoubleGyre, 1e-3, 10.0, 1e-6), (SystemId::RossbyWave, 100.0, 3.0 * SECONDS_PER_DAY, 1.0)];
    for (id, step, t_max, h) in cases {
        let sys = FlowSystem::new(id);
        let d = sys.domain();
        for _ in 0..100 {
            let z = random_point(&mut rng, &d, 0.02);
            let t = rng.random_range(0.1 * t_max..t_max) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let jet = flow_jacobian(&sys, z, 0.0, t, step).unwrap();
            let fd = fd_jacobian(&sys, z, 0.0, t, step, h);
            let tol = 1e-4 * jet.jacobian.norm().max(1.0);
            assert!(jet.jacobian.max_abs_diff(&fd) < tol, "{id} z={z:?} t={t}: {:?} vs {fd:?}", jet.jacobian);
            assert!((jet.jacobian.det() - 1.0).abs() < 1e-4, "{id}: det {}", jet.jacobian.det());
        }
    }
}

#[test]
fn round_trips_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (id, step, t) in [(SystemId::DoubleGyre, 1e-3, 10.0), (SystemId::RossbyWave, 100.0, 3.0 * SECONDS_PER_DAY)] {
        let sys = FlowSystem::new(id);
        let d = sys.domain();
        let scale = d.width().max(d.height());
        for _ in 0..20 {
            let z = random_point(&mut rng, &d, 0.0);
            let p = flow_map_unwrapped(&sys, z, 0.0, t, step).unwrap();
            let back = flow_map_unwrapped(&sys, p, t, 0.0, step).unwrap();
            // dimensionless for the gyre, relative to the domain size in metres for the wave
            let tol = if id == SystemId::RossbyWave { 1e-6 * scale } else { 1e-6 };
            assert!(back.dist(z) < tol, "{id}: {:e}", back.dist(z));
        }
    }
}

#[test]
fn double_gyre_boundaries_are_invariant() {
    let sys = FlowSystem::new(SystemId::DoubleGyre);
    for s in [0.1, 0.35, 0.8] {
        for (z, fixed_y) in [
            (Vec2::new(2.0 * s, 0.0), true),
            (Vec2::new(2.0 * s, 1.0), true),
            (Vec2::new(0.0, s), false),
            (Vec2::new(2.0, s), false),
        ] {
            let p = flow_map(&sys, z, 0.0, 10.0, 1e-3).unwrap();
            if fixed_y {
                assert!((p.y - z.y).abs() < 1e-10, "{z:?} → {p:?}");
            } else {
                assert!((p.x - z.x).abs() < 1e-10, "{z:?} → {p:?}");
            }
        }
    }
}
