use magloop::loops::shift_distance;
use magloop::solver::{continue_path, lock_on, newton_solve, seed_centers, ContinuationOptions, LockOn, PathStatus};
use magloop::verify::{alexandrov_check, verify_orbit, FailReason};
use magloop::{Alexandrov, ConformalMetric, DiscreteLoop, FieldPair, SolverOptions, SpherePoint, SphericalField};
use proptest::prelude::*;

fn gentle_pair() -> FieldPair {
    FieldPair::new(
        SphericalField::new(vec![(1, 0, 0.05)]).unwrap(),
        SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.05)]).unwrap(),
    )
    .unwrap()
}

fn continued(pair: &FieldPair, n: usize) -> magloop::solver::ContinuationPath {
    let opts = SolverOptions { n, ..SolverOptions::default() };
    let center = lock_on(pair, &seed_centers(8)[0], LockOn::Descend).unwrap();
    let seed = DiscreteLoop::circle(n, &center, (1.0 / pair.k_inf).atan()).unwrap();
    continue_path(pair, &seed, &opts, &ContinuationOptions::default()).unwrap()
}

#[test]
fn newton_output_is_gauge_stable() {
    let pair = gentle_pair();
    let path = continued(&pair, 64);
    assert_eq!(path.status, PathStatus::Reached);
    let sol = &path.samples.last().unwrap().1;
    let opts = SolverOptions { n: 64, ..SolverOptions::default() };
    let again = newton_solve(&sol.curve, &pair, &opts).unwrap();
    let drift = sol
        .curve
        .points()
        .iter()
        .zip(again.curve.points())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(drift <= 1e-10, "{drift:.2e}");
}

#[test]
fn continuation_steps_respect_the_continuity_bound() {
    let pair = gentle_pair();
    let path = continued(&pair, 64);
    assert_eq!(path.status, PathStatus::Reached);
    let mut speed: f64 = 1.0;
    for w in path.samples.windows(2) {
        let ((t0, a), (t1, b)) = (&w[0], &w[1]);
        let dt = t1 - t0;
        assert!(dt > 0.0);
        let d = shift_distance(&a.curve, &b.curve).distance;
        assert!(d <= 10.0 * dt * speed + 1e-12, "t = {t1}: {d} > {}", 10.0 * dt * speed);
        speed = speed.max(d / dt);
    }
    let end = &path.samples.last().unwrap().1;
    assert!(verify_orbit(end).passed);
}

#[test]
fn reached_solutions_satisfy_the_equation_pointwise() {
    let path = continued(&gentle_pair(), 64);
    for (_, sol) in &path.samples {
        assert!(sol.report.curvature_mismatch <= 1e-6, "{}", sol.report.curvature_mismatch);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn iterates_are_never_alexandrov(
        (x, y, z) in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 0.01),
        radius in 0.3..1.3f64,
        order in 2usize..4,
    ) {
        let c = DiscreteLoop::circle(32, &SpherePoint::new(x, y, z), radius).unwrap();
        let m = ConformalMetric::round();
        prop_assert_eq!(alexandrov_check(&c, &m).unwrap(), Alexandrov::AlexandrovBySimplicity);
        prop_assert_eq!(alexandrov_check(&c.iterate(order), &m).unwrap(), Alexandrov::Fails(FailReason::Iterate { order }));
    }
}
