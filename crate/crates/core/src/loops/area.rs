//! Integrals over the region on the positive side of a simple loop.
//!
//! About an axis `c`, with polar angle `θ` and azimuth `ψ`, the 1-form
//! `F dψ` with `F(θ, ψ) = ∫_0^θ f sin θ' dθ'` has exterior derivative `f dA`.
//! Its line integral along the loop therefore equals the integral of `f`
//! weighted by the winding function relative to `−c`, which for a simple
//! loop is the indicator of the left-hand region, minus `∫_{S²} f` when `−c`
//! lies inside that region. `c` is chosen with both `±c` far from the loop,
//! so the outer periodic trapezoid rule converges spectrally.

use super::{topology::self_intersections, DiscreteLoop};
use crate::error::{Error, Result};
use crate::fields::SphericalField;
use crate::Vec3;
use std::f64::consts::PI;

const INNER_NODES: usize = 64;
const AXIS_CANDIDATES: usize = 400;

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn fibonacci_sphere(n: usize) -> impl Iterator<Item = Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n).map(move |i| {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let a = golden * i as f64;
        Vec3::new(r * a.cos(), r * a.sin(), z)
    })
}

/// Axis whose poles both stay as far as possible from the loop.
fn sweep_axis(points: &[Vec3]) -> Vec3 {
    let mut best = (f64::NEG_INFINITY, Vec3::z());
    for q in fibonacci_sphere(AXIS_CANDIDATES) {
        // |c·γ| close to 1 means γ is near ±c
        let worst = points.iter().map(|p| q.dot(p).abs()).fold(0.0, f64::max);
        if -worst > best.0 {
            best = (-worst, q);
        }
    }
    best.1
}

/// Raw sweep integrals `∮ F_f dψ` for each integrand, sharing one axis.
fn sweep(lp: &DiscreteLoop, integrands: &[&SphericalField]) -> Vec<f64> {
    // oversample so the outer rule resolves the azimuth rate
    let fine = lp.resample(4 * lp.len()).expect("refined grid is valid");
    let jet = fine.jet();
    let c = sweep_axis(fine.points());
    let (nodes, weights) = gauss_legendre(INNER_NODES);
    let n = fine.len();
    let mut acc = vec![0.0; integrands.len()];
    for (p, v) in fine.points().iter().zip(&jet.velocity) {
        let cos_t = c.dot(p).clamp(-1.0, 1.0);
        let radial = p - c * cos_t;
        let sin_t = radial.norm();
        let u = radial / sin_t;
        let theta = sin_t.atan2(cos_t);
        let rate = c.dot(&p.cross(v)) / (sin_t * sin_t);
        for (a, f) in acc.iter_mut().zip(integrands) {
            let mut inner = 0.0;
            for (x, w) in nodes.iter().zip(&weights) {
                let s = 0.5 * theta * (x + 1.0);
                let q = c * s.cos() + u * s.sin();
                inner += w * f.value_at(&q) * s.sin();
            }
            *a += 0.5 * theta * inner * rate;
        }
    }
    acc.iter().map(|a| a / n as f64).collect()
}

fn require_simple(lp: &DiscreteLoop) -> Result<()> {
    let r = self_intersections(lp);
    if !r.crossings.is_empty() {
        Err(Error::NotSimple("loop has self-crossings"))
    } else if r.is_degenerate() {
        Err(Error::NotSimple("loop overlaps itself"))
    } else {
        Ok(())
    }
}

/// `∫_B f dA_can` over the disk `B` on the `Jγ'` side of a simple loop.
pub fn region_integral(lp: &DiscreteLoop, f: &SphericalField) -> Result<f64> {
    require_simple(lp)?;
    let one = SphericalField::constant(1.0);
    let raw = sweep(lp, &[&one, f]);
    if raw[0] < 0.0 {
        Ok(raw[1] + 4.0 * PI * f.mean())
    } else {
        Ok(raw[1])
    }
}

/// Round-metric area of the disk on the `Jγ'` side, in `(0, 4π)`.
pub fn enclosed_area(lp: &DiscreteLoop) -> Result<f64> {
    require_simple(lp)?;
    let one = SphericalField::constant(1.0);
    let raw = sweep(lp, &[&one])[0];
    Ok(if raw < 0.0 { raw + 4.0 * PI } else { raw })
}
