//! Certification of candidate orbits against the identities a solution must
//! satisfy: the defining equation, the length bound, Gauss–Bonnet,
//! isoperimetry, rotation index, primality and Alexandrov embeddedness.

use crate::error::{Error, Result};
use crate::fields::{FieldPair, SphericalField};
use crate::geometry::{geodesic_curvature_raw, ConformalMetric, SpherePoint};
use crate::loops::topology::POLE_CLEARANCE;
use crate::loops::{
    isotropy_order, region_integral, rotation_index, self_intersections, shift_distance, winding_about, DiscreteLoop,
};
use crate::solver::OrbitSolution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

pub const CURVATURE_TOL: f64 = 1e-6;
pub const SPEED_TOL: f64 = 1e-8;
pub const LENGTH_SLACK: f64 = 1e-6;
pub const GAUSS_BONNET_TOL: f64 = 1e-4;
pub const ISOPERIMETRIC_SLACK: f64 = -1e-6;
/// Two solutions closer than this (RMS, after alignment) are one orbit.
pub const DISTINCT_TOL: f64 = 1e-4;
pub const POLE_TRIES: usize = 20;
/// Seed of the pole search unless the caller supplies one.
pub const DEFAULT_POLE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FailReason {
    /// A nontrivial iterate of a positively curved curve.
    Iterate { order: usize },
    /// Prime and non-simple, but the rotation index is not 1.
    RotationIndex { index: i64 },
}

/// Oriented Alexandrov embeddedness, as far as it can be decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Alexandrov {
    /// Simple, hence bounds an embedded disk on its positive side.
    AlexandrovBySimplicity,
    /// Prime, non-simple, with rotation index 1. Not a certificate.
    NecessaryConditionsPass,
    Fails(FailReason),
}

impl Alexandrov {
    /// At least the necessary conditions hold.
    pub fn is_admissible(&self) -> bool {
        !matches!(self, Alexandrov::Fails(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// `(max − min) / mean` of the `g`-speed.
    pub speed_variation: f64,
    /// `sup_i |k_g(γ, t_i) − k(γ(t_i))|`.
    pub curvature_mismatch: f64,
    pub length: f64,
    /// `2π / k_inf`.
    pub length_upper_bound: f64,
    /// The bound is asserted only when `K_g ≥ 0` is certified.
    pub length_bound_applies: bool,
    pub gauss_bonnet_residual: Option<f64>,
    /// `L² − (4πA − A²)`, on the round metric only.
    pub isoperimetric_slack: Option<f64>,
    pub rotation_idx: i64,
    pub isotropy: usize,
    pub alexandrov: Alexandrov,
    /// Names of the checks that failed.
    pub failures: Vec<String>,
    pub passed: bool,
}

/// Pointwise geodesic curvature and `g`-speed.
pub fn curvature_samples(lp: &DiscreteLoop, phi: &SphericalField) -> (Vec<f64>, Vec<f64>) {
    let jet = lp.jet();
    lp.points()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (v, a) = (&jet.velocity[i], &jet.acceleration[i]);
            let fj = phi.jet_at(x);
            let kg = geodesic_curvature_raw(fj.value, &fj.grad, x, v, a);
            (kg, (0.5 * fj.value).exp() * v.norm())
        })
        .unzip()
}

/// Pole used for planar tests: among seeded random candidates clear of the
/// loop, one where the loop's winding number is minimal, so the positive
/// side of the loop does not cover the point at infinity.
pub fn select_pole(lp: &DiscreteLoop, seed: u64) -> Result<SpherePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clearance = |q: &SpherePoint| {
        lp.points()
            .iter()
            .map(|p| q.angle_to(&SpherePoint::from_vec(*p)))
            .fold(f64::INFINITY, f64::min)
    };
    let mut cands = Vec::new();
    for _ in 0..POLE_TRIES {
        let z: f64 = rng.random_range(-1.0..1.0);
        let lon: f64 = rng.random_range(0.0..TAU);
        let r = (1.0 - z * z).sqrt();
        let q = SpherePoint::new(r * lon.cos(), r * lon.sin(), z);
        let c = clearance(&q);
        if c >= 10.0 * POLE_CLEARANCE {
            cands.push((q, c));
        }
    }
    let Some(&(reference, _)) = cands.first() else {
        return Err(Error::NoAdmissiblePole(POLE_TRIES));
    };
    let mut best: Option<(i64, f64, SpherePoint)> = None;
    for (q, c) in cands {
        let w = if q == reference { 0 } else { winding_about(lp, &reference, &q)? };
        let better = match best {
            None => true,
            Some((bw, bc, _)) => w < bw || (w == bw && c > bc),
        };
        if better {
            best = Some((w, c, q));
        }
    }
    Ok(best.expect("at least one candidate").2)
}

pub fn alexandrov_check(lp: &DiscreteLoop, m: &ConformalMetric) -> Result<Alexandrov> {
    alexandrov_check_seeded(lp, m, DEFAULT_POLE_SEED)
}

pub fn alexandrov_check_seeded(lp: &DiscreteLoop, m: &ConformalMetric, seed: u64) -> Result<Alexandrov> {
    if self_intersections(lp).is_simple() {
        return Ok(Alexandrov::AlexandrovBySimplicity);
    }
    let order = isotropy_order(lp);
    if order > 1 {
        let (kg, _) = curvature_samples(lp, &m.phi);
        if kg.iter().all(|&k| k >= 0.0) {
            return Ok(Alexandrov::Fails(FailReason::Iterate { order }));
        }
    }
    let pole = select_pole(lp, seed)?;
    let index = rotation_index(lp, &pole)?.index;
    Ok(if index == 1 && order == 1 {
        Alexandrov::NecessaryConditionsPass
    } else if order > 1 {
        Alexandrov::Fails(FailReason::Iterate { order })
    } else {
        Alexandrov::Fails(FailReason::RotationIndex { index })
    })
}

/// Runs every applicable check on a loop claimed to solve the prescribed
/// curvature equation for `pair`.
pub fn verify_loop(lp: &DiscreteLoop, pair: &FieldPair) -> VerificationReport {
    verify_loop_seeded(lp, pair, DEFAULT_POLE_SEED)
}

pub fn verify_loop_seeded(lp: &DiscreteLoop, pair: &FieldPair, seed: u64) -> VerificationReport {
    let n = lp.len() as f64;
    let mut failures = Vec::new();
    let (kg, speed) = curvature_samples(lp, &pair.phi);
    let mean = speed.iter().sum::<f64>() / n;
    let (smin, smax) = speed.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    let speed_variation = if mean > 0.0 { (smax - smin) / mean } else { f64::INFINITY };
    let curvature_mismatch = lp
        .points()
        .iter()
        .zip(&kg)
        .map(|(x, k)| (k - pair.k.value_at(x)).abs())
        .fold(0.0, f64::max);
    let length = mean;
    let length_upper_bound = TAU / pair.k_inf;
    let length_bound_applies = pair.curvature_floor() >= 0.0;

    if !(speed_variation <= SPEED_TOL) {
        failures.push("speed_variation".to_string());
    }
    if !(curvature_mismatch <= CURVATURE_TOL) {
        failures.push("curvature_mismatch".to_string());
    }
    if length_bound_applies && !(length <= length_upper_bound + LENGTH_SLACK) {
        failures.push("length_upper_bound".to_string());
    }

    let simple = self_intersections(lp).is_simple();
    let mut gauss_bonnet_residual = None;
    let mut isoperimetric_slack = None;
    if simple {
        let boundary: f64 = kg.iter().zip(&speed).map(|(k, s)| k * s).sum::<f64>() / n;
        let density = SphericalField::constant(1.0).combine(1.0, &pair.phi.laplacian_field(), -0.5);
        match region_integral(lp, &density) {
            Ok(interior) => {
                let r = (boundary + interior - TAU).abs();
                if !(r <= GAUSS_BONNET_TOL) {
                    failures.push("gauss_bonnet".to_string());
                }
                gauss_bonnet_residual = Some(r);
            }
            Err(_) => failures.push("gauss_bonnet".to_string()),
        }
        if pair.phi.is_zero() {
            if let Ok(area) = crate::loops::enclosed_area(lp) {
                let slack = length * length - (4.0 * PI * area - area * area);
                if !(slack >= ISOPERIMETRIC_SLACK) {
                    failures.push("isoperimetric".to_string());
                }
                isoperimetric_slack = Some(slack);
            }
        }
    }

    let isotropy = isotropy_order(lp);
    let alexandrov = match alexandrov_check_seeded(lp, &pair.metric(), seed) {
        Ok(a) => a,
        Err(_) => {
            failures.push("alexandrov_pole".to_string());
            Alexandrov::Fails(FailReason::RotationIndex { index: 0 })
        }
    };
    let rotation_idx = match select_pole(lp, seed).and_then(|p| rotation_index(lp, &p)) {
        Ok(r) => r.index,
        Err(_) => {
            failures.push("rotation_index".to_string());
            0
        }
    };
    if !alexandrov.is_admissible() {
        failures.push("alexandrov".to_string());
    }
    VerificationReport {
        speed_variation,
        curvature_mismatch,
        length,
        length_upper_bound,
        length_bound_applies,
        gauss_bonnet_residual,
        isoperimetric_slack,
        rotation_idx,
        isotropy,
        alexandrov,
        passed: failures.is_empty(),
        failures,
    }
}

pub fn verify_orbit(sol: &OrbitSolution) -> VerificationReport {
    verify_loop(&sol.curve, &sol.equation_pair())
}

/// Removes solutions on the same circle orbit as a better one.
pub fn distinct_orbits(sols: Vec<OrbitSolution>) -> Vec<OrbitSolution> {
    let mut sorted = sols;
    sorted.sort_by(|a, b| a.residual_norm.total_cmp(&b.residual_norm));
    let mut kept: Vec<OrbitSolution> = Vec::new();
    for s in sorted {
        if kept.iter().all(|k| shift_distance(&k.curve, &s.curve).distance > DISTINCT_TOL) {
            kept.push(s);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Stereographic;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn latitude_circle_report() {
        let lp = DiscreteLoop::circle(128, &SpherePoint::north(), FRAC_PI_4).unwrap();
        let r = verify_loop(&lp, &FieldPair::round(1.0).unwrap());
        assert!(r.passed, "{:?}", r.failures);
        assert_abs_diff_eq!(r.length, PI * 2f64.sqrt(), epsilon = 1e-12);
        assert!(r.gauss_bonnet_residual.unwrap() <= 1e-6);
        assert!(r.isoperimetric_slack.unwrap() >= -1e-6);
        assert_eq!(r.rotation_idx, 1);
        assert_eq!(r.isotropy, 1);
        assert_eq!(r.alexandrov, Alexandrov::AlexandrovBySimplicity);
    }

    #[test]
    fn equator_closes_gauss_bonnet() {
        let lp = DiscreteLoop::circle(64, &SpherePoint::north(), PI / 2.0).unwrap();
        let p = FieldPair {
            phi: SphericalField::zero(),
            k: SphericalField::zero(),
            k_inf: 1e-3,
        };
        let r = verify_loop(&lp, &p);
        assert!(r.gauss_bonnet_residual.unwrap() < 1e-10);
    }

    #[test]
    fn long_loop_fails_length_bound() {
        // a circle of length 3·2π would need k_inf = 1/3; claim k ≡ 1 instead
        let lp = DiscreteLoop::circle(64, &SpherePoint::north(), PI / 2.0).unwrap().iterate(3);
        let r = verify_loop(&lp, &FieldPair::round(1.0).unwrap());
        assert!(r.length > 3.0 * TAU - 1e-9);
        assert!(!r.passed);
        assert!(r.failures.iter().any(|f| f == "length_upper_bound"));
    }

    #[test]
    fn iterates_fail() {
        let c = DiscreteLoop::circle(64, &SpherePoint::north(), FRAC_PI_4).unwrap();
        for n in [2, 3] {
            let a = alexandrov_check(&c.iterate(n), &ConformalMetric::round()).unwrap();
            assert_eq!(a, Alexandrov::Fails(FailReason::Iterate { order: n }));
        }
    }

    /// Boundary of a thick annular strip wrapped past a full turn: it
    /// bounds an immersed disk, crosses itself twice and has rotation index 1.
    fn overlapping_strip(n: usize) -> DiscreteLoop {
        let chart = Stereographic::new(&SpherePoint::north());
        let sweep = TAU + 0.8;
        DiscreteLoop::from_fn(n, |t| {
            let th = sweep * (1.0 - (TAU * t).cos()) / 2.0;
            let r = 0.3 * (1.25 + 0.4 * (TAU * t).sin());
            *chart.inverse([r * th.cos(), r * th.sin()]).vec()
        })
        .unwrap()
    }

    #[test]
    fn overlapping_strip_passes_necessary_conditions() {
        let lp = overlapping_strip(256);
        assert_eq!(self_intersections(&lp).crossings.len(), 2);
        assert_eq!(isotropy_order(&lp), 1);
        let a = alexandrov_check(&lp, &ConformalMetric::round()).unwrap();
        assert_eq!(a, Alexandrov::NecessaryConditionsPass);
    }

    #[test]
    fn distinctness() {
        let p = FieldPair::round(1.0).unwrap();
        let mk = |c: SpherePoint| {
            let lp = DiscreteLoop::circle(64, &c, FRAC_PI_4).unwrap();
            OrbitSolution::from_parts(lp, p.clone(), 0.0, 0).unwrap()
        };
        let a = mk(SpherePoint::north());
        let mut b = a.clone();
        b.curve = a.curve.shift(5);
        assert_eq!(distinct_orbits(vec![a.clone(), b]).len(), 1);
        let c = mk(SpherePoint::north().antipode());
        assert!(shift_distance(&a.curve, &c.curve).distance > 0.1);
        assert_eq!(distinct_orbits(vec![a, c]).len(), 2);
        assert!(distinct_orbits(vec![]).is_empty());
    }
}
