use magloop::loops::io::{from_csv, from_json, to_csv, to_json};
use magloop::loops::{differentiate, enclosed_area, isotropy_order, rotation_index, spectral};
use magloop::verify::select_pole;
use magloop::{DiscreteLoop, SpherePoint, Vec3};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};

/// A circle with a small band-limited wobble. Amplitudes below 0.05 keep it
/// simple for radii in the sampled range.
fn wobbly() -> impl Strategy<Value = DiscreteLoop> {
    (
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter("nonzero", |(x, y, z)| x * x + y * y + z * z > 0.01),
        0.4..1.4f64,
        prop::collection::vec(-0.05..0.05f64, 6),
        prop::sample::select(vec![32usize, 48, 64]),
    )
        .prop_map(|((x, y, z), radius, w, n)| {
            let c = SpherePoint::new(x, y, z);
            let base = DiscreteLoop::circle(n, &c, radius).unwrap();
            let pts = base
                .points()
                .iter()
                .enumerate()
                .map(|(j, p)| {
                    let t = TAU * j as f64 / n as f64;
                    let bump = Vec3::new(w[0], w[1], w[2]) * (2.0 * t).cos() + Vec3::new(w[3], w[4], w[5]) * (3.0 * t).sin();
                    (p + bump).normalize()
                })
                .collect();
            DiscreteLoop::new(pts).unwrap()
        })
}

fn max_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn differentiation_is_linear(
        f in prop::collection::vec(-1.0..1.0f64, 32),
        g in prop::collection::vec(-1.0..1.0f64, 32),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
    ) {
        let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        for order in [1, 2] {
            let (df, dg, dh) = (spectral::derivative(&f, order), spectral::derivative(&g, order), spectral::derivative(&h, order));
            let scale = dh.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for j in 0..32 {
                prop_assert!((dh[j] - (a * df[j] + b * dg[j])).abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn differentiation_commutes_with_grid_shifts(lp in wobbly(), s in -40isize..40) {
        let n = lp.len() as isize;
        let shifted = differentiate(&lp.shift(s));
        let base = differentiate(&lp);
        let rolled: Vec<Vec3> = (0..n).map(|j| base.velocity[(j + s).rem_euclid(n) as usize]).collect();
        let scale = base.velocity.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(max_diff(&shifted.velocity, &rolled) < 1e-11 * scale);
        let rolled: Vec<Vec3> = (0..n).map(|j| base.acceleration[(j + s).rem_euclid(n) as usize]).collect();
        let scale = base.acceleration.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(max_diff(&shifted.acceleration, &rolled) < 1e-11 * scale);
    }

    #[test]
    fn rotation_index_survives_shifts_and_refinement(lp in wobbly(), s in 0isize..32) {
        let pole = select_pole(&lp, 11).unwrap();
        let r = rotation_index(&lp, &pole).unwrap().index;
        prop_assert_eq!(r, 1);
        prop_assert_eq!(rotation_index(&lp.shift(s), &pole).unwrap().index, r);
        prop_assert_eq!(rotation_index(&lp.resample(2 * lp.len()).unwrap(), &pole).unwrap().index, r);
    }

    #[test]
    fn loop_and_reversal_partition_the_sphere(lp in wobbly()) {
        let total = enclosed_area(&lp).unwrap() + enclosed_area(&lp.reversed()).unwrap();
        prop_assert!((total - 4.0 * PI).abs() < 1e-8, "{total}");
    }

    #[test]
    fn orbit_files_round_trip(lp in wobbly()) {
        let csv = to_csv(&lp);
        prop_assert_eq!(to_csv(&from_csv(&csv).unwrap()), csv.clone());
        let json = to_json(&lp, Some("abc".into()));
        let (back, sum) = from_json(&json).unwrap();
        prop_assert_eq!(sum.as_deref(), Some("abc"));
        prop_assert_eq!(to_json(&back, sum), json);
        prop_assert_eq!(to_csv(&back), csv);
    }

    #[test]
    fn iterates_multiply_isotropy(lp in wobbly(), k in 2usize..4) {
        let base = isotropy_order(&lp);
        prop_assert_eq!(isotropy_order(&lp.iterate(k)), k * base);
    }
}

#[test]
fn csv_has_the_documented_layout() {
    let lp = DiscreteLoop::circle(16, &SpherePoint::north(), 0.5).unwrap();
    let csv = to_csv(&lp);
    assert!(csv.starts_with("t,x,y,z\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 17);
}
