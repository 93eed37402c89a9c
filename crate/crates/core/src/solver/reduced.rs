//! The reduced function on the round-circle family.
//!
//! At `t = 0` every circle of radius `r = arccot(k_inf)` solves the equation.
//! The solutions that persist for small `t > 0` sit near critical points of
//! the first-order change of the action `L_g − ∫_B k dA_g` along the
//! homotopy, restricted to the family:
//!
//! ```text
//! Φ(c) = ½ ∮_{∂B_c} φ ds − ∫_{B_c} (k − k_inf + k_inf φ) dA
//! ```
//!
//! with `B_c` the cap of radius `r` about `c`. Averages of a degree-`l`
//! harmonic over circles and caps about `c` are multiples of its value at
//! `c` (Funk–Hecke), so `Φ` is again a harmonic expansion.

use crate::error::{Error, Result};
use crate::fields::{FieldPair, SphericalField};
use crate::geometry::SpherePoint;
use crate::Vec3;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// How a seed circle is placed on the family before the first correction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockOn {
    /// Keep the seed where it is.
    None,
    /// Follow the gradient flow of `Φ` down to a local minimum.
    #[default]
    Descend,
    /// Follow it up to a local maximum.
    Ascend,
}

const MAX_FLOW_STEPS: usize = 5000;
const MAX_NEWTON_STEPS: usize = 20;

/// Legendre polynomials `P_0 .. P_{lmax+1}` at `x`.
fn legendre(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![1.0, x];
    for l in 1..=lmax {
        let next = ((2 * l + 1) as f64 * x * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
        p.push(next);
    }
    p
}

/// `Φ` as a field of the cap center.
pub fn reduced_function(pair: &FieldPair) -> Result<SphericalField> {
    if !(pair.k_inf > 0.0) {
        return Err(Error::NonPositivePrescription(pair.k_inf));
    }
    let r = (1.0 / pair.k_inf).atan();
    let lmax = pair.phi.degree().max(pair.k.degree());
    let p = legendre(lmax, r.cos());
    let tau = std::f64::consts::TAU;
    // ∮ Y ds = circle[l] Y(c),  ∫_cap Y dA = cap[l] Y(c)
    let circle: Vec<f64> = (0..=lmax).map(|l| tau * r.sin() * p[l]).collect();
    let cap: Vec<f64> = (0..=lmax)
        .map(|l| {
            if l == 0 {
                tau * (1.0 - r.cos())
            } else {
                tau * (p[l - 1] - p[l + 1]) / (2 * l + 1) as f64
            }
        })
        .collect();
    let excess = pair.k.combine(1.0, &SphericalField::constant(pair.k_inf), -1.0);
    let mut terms = Vec::new();
    for &(l, m, a) in pair.phi.terms() {
        terms.push((l, m, a * (0.5 * circle[l] - pair.k_inf * cap[l])));
    }
    for &(l, m, b) in excess.terms() {
        terms.push((l, m, -b * cap[l]));
    }
    SphericalField::new(terms)
}

/// Moves `center` along the gradient flow of `Φ` until the flow stalls,
/// then polishes the critical point with Newton steps.
pub fn lock_on(pair: &FieldPair, center: &SpherePoint, mode: LockOn) -> Result<SpherePoint> {
    let sign = match mode {
        LockOn::None => return Ok(*center),
        LockOn::Descend => 1.0,
        LockOn::Ascend => -1.0,
    };
    let f = reduced_function(pair)?.scaled(sign);
    let scale = f.lipschitz_bound();
    if scale == 0.0 {
        return Ok(*center);
    }
    let mut c = *center.vec();
    let mut value = f.value_at(&c);
    let mut step = 0.5 / scale;
    for _ in 0..MAX_FLOW_STEPS {
        let g = f.gradient_at(&c);
        if g.norm() <= 1e-6 * scale {
            break;
        }
        let mut moved = false;
        while step * g.norm() > 1e-15 {
            let trial = (c - g * step).normalize();
            let v = f.value_at(&trial);
            // Armijo decrease
            if v <= value - 1e-4 * step * g.norm_squared() {
                c = trial;
                value = v;
                step = (2.0 * step).min(1.0 / scale);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    // Newton on the tangent plane, kept only while it stays a descent
    // method for a nondegenerate minimum
    for _ in 0..MAX_NEWTON_STEPS {
        let jet = f.jet_at(&c);
        let g = jet.grad;
        if g.norm() <= 1e-13 * scale {
            break;
        }
        let a = if c.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = (a - c * c.dot(&a)).normalize();
        let e2 = c.cross(&e1);
        let h = Matrix2::new(
            e1.dot(&(jet.dgrad * e1)),
            e1.dot(&(jet.dgrad * e2)),
            e2.dot(&(jet.dgrad * e1)),
            e2.dot(&(jet.dgrad * e2)),
        );
        let h = (h + h.transpose()) * 0.5;
        if !(h.determinant() > 0.0 && h.trace() > 0.0) {
            break;
        }
        let Some(d) = h.try_inverse().map(|hi| hi * Vector2::new(-g.dot(&e1), -g.dot(&e2))) else {
            break;
        };
        let trial = (c + e1 * d.x + e2 * d.y).normalize();
        if f.gradient_at(&trial).norm() >= g.norm() {
            break;
        }
        c = trial;
    }
    Ok(SpherePoint::from_vec(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loops::DiscreteLoop;
    use std::f64::consts::{PI, TAU};

    /// Direct quadrature of `Φ` on the cap about `c`.
    fn quadrature(pair: &FieldPair, c: &SpherePoint) -> f64 {
        let r = (1.0 / pair.k_inf).atan();
        let (nth, nps) = (400, 256);
        let z = *c.vec();
        let a = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = (a - z * z.dot(&a)).normalize();
        let e2 = z.cross(&e1);
        let point = |th: f64, ps: f64| z * th.cos() + (e1 * ps.cos() + e2 * ps.sin()) * th.sin();
        let f = |x: &Vec3| pair.k.value_at(x) - pair.k_inf + pair.k_inf * pair.phi.value_at(x);
        let mut area = 0.0;
        for i in 0..nth {
            let th = (i as f64 + 0.5) * r / nth as f64;
            for j in 0..nps {
                let ps = TAU * j as f64 / nps as f64;
                area += f(&point(th, ps)) * th.sin();
            }
        }
        area *= (r / nth as f64) * (TAU / nps as f64);
        let mut line = 0.0;
        for j in 0..nps {
            line += pair.phi.value_at(&point(r, TAU * j as f64 / nps as f64));
        }
        line *= r.sin() * TAU / nps as f64;
        0.5 * line - area
    }

    fn tilted() -> FieldPair {
        FieldPair::new(
            SphericalField::new(vec![(1, 0, 0.2), (2, 1, 0.1), (3, -2, 0.05)]).unwrap(),
            SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3), (2, -2, 0.1)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn matches_direct_quadrature() {
        let pair = tilted();
        let red = reduced_function(&pair).unwrap();
        for c in [SpherePoint::new(1.0, 0.2, -0.3), SpherePoint::north(), SpherePoint::new(-0.4, 0.8, 0.1)] {
            let q = quadrature(&pair, &c);
            assert!((red.value(&c) - q).abs() < 1e-5, "{} vs {q}", red.value(&c));
        }
    }

    #[test]
    fn is_the_derivative_of_the_action_along_the_homotopy() {
        // E_t = L_{g_t}(γ_c) − ∫_B k_t e^{tφ} dA on a fixed family circle
        let pair = tilted();
        let c = SpherePoint::new(0.3, -0.5, 0.8);
        let r = (1.0 / pair.k_inf).atan();
        let lp = DiscreteLoop::circle(256, &c, r).unwrap();
        let action = |t: f64| {
            let h = crate::fields::homotopy_fields(&pair, t).unwrap();
            let len = lp.length(&h.phi);
            let z = *c.vec();
            let a = Vec3::x();
            let e1 = (a - z * z.dot(&a)).normalize();
            let e2 = z.cross(&e1);
            let (nth, nps) = (300, 128);
            let mut area = 0.0;
            for i in 0..nth {
                let th = (i as f64 + 0.5) * r / nth as f64;
                for j in 0..nps {
                    let ps = TAU * j as f64 / nps as f64;
                    let x = z * th.cos() + (e1 * ps.cos() + e2 * ps.sin()) * th.sin();
                    area += h.k.value_at(&x) * h.phi.value_at(&x).exp() * th.sin();
                }
            }
            len - area * (r / nth as f64) * (TAU / nps as f64)
        };
        // one-sided, second order: the homotopy starts at t = 0
        let eps = 1e-4;
        let fd = (4.0 * action(eps) - action(2.0 * eps) - 3.0 * action(0.0)) / (2.0 * eps);
        let red = reduced_function(&pair).unwrap().value(&c);
        assert!((fd - red).abs() < 1e-4, "{fd} vs {red}");
    }

    #[test]
    fn flows_reach_distinct_critical_points() {
        let pair = FieldPair::new(
            SphericalField::new(vec![(1, 0, 0.2)]).unwrap(),
            SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3)]).unwrap(),
        )
        .unwrap();
        let red = reduced_function(&pair).unwrap();
        let start = SpherePoint::new(0.2, 0.9, 0.3);
        let lo = lock_on(&pair, &start, LockOn::Descend).unwrap();
        let hi = lock_on(&pair, &start, LockOn::Ascend).unwrap();
        assert!(red.gradient(&lo).v.norm() < 1e-9);
        assert!(red.gradient(&hi).v.norm() < 1e-9);
        assert!(red.value(&lo) < red.value(&hi));
        assert!(lo.angle_to(&hi) > PI / 2.0);
    }

    #[test]
    fn constant_problem_has_flat_reduced_function() {
        let red = reduced_function(&FieldPair::round(1.3).unwrap()).unwrap();
        assert!(red.is_zero());
        let c = SpherePoint::new(0.1, 0.2, 0.3);
        assert_eq!(lock_on(&FieldPair::round(1.3).unwrap(), &c, LockOn::Descend).unwrap(), c);
    }
}
