use super::DiscreteLoop;
use crate::error::{Error, Result};
use crate::geometry::{SpherePoint, Stereographic};
use crate::Vec3;
use std::f64::consts::{FRAC_PI_4, PI, TAU};

/// A transversal crossing between chord segments `i` and `j`
/// (segment `i` joins points `i` and `i+1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub i: usize,
    pub j: usize,
    pub point: SpherePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersections {
    pub crossings: Vec<Crossing>,
    /// Pairs of segments lying on a common great circle and overlapping.
    pub overlaps: usize,
    /// Grid size the segments refer to (the loop is refined if its chords
    /// are too long).
    pub grid: usize,
}

impl Intersections {
    pub fn is_simple(&self) -> bool {
        self.crossings.is_empty() && self.overlaps == 0
    }

    pub fn is_degenerate(&self) -> bool {
        self.overlaps > 0
    }
}

enum ArcHit {
    Miss,
    Cross(Vec3),
    Overlap,
}

fn on_arc(p: &Vec3, a: &Vec3, b: &Vec3, normal: &Vec3) -> bool {
    a.cross(p).dot(normal) >= 0.0 && p.cross(b).dot(normal) >= 0.0
}

fn within_arc(p: &Vec3, a: &Vec3, b: &Vec3) -> bool {
    // p on the great circle of (a, b); test the angular span
    let ab = a.cross(b).norm().atan2(a.dot(b));
    let ap = a.cross(p).norm().atan2(a.dot(p));
    let pb = p.cross(b).norm().atan2(p.dot(b));
    (ap + pb - ab).abs() < 1e-12
}

fn arc_intersection(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> ArcHit {
    let n1 = a.cross(b);
    let n2 = c.cross(d);
    let line = n1.cross(&n2);
    if line.norm() <= 1e-13 * n1.norm() * n2.norm() {
        let shared = [c, d].iter().any(|p| within_arc(p, a, b)) || [a, b].iter().any(|p| within_arc(p, c, d));
        return if shared { ArcHit::Overlap } else { ArcHit::Miss };
    }
    let p = line.normalize();
    for cand in [p, -p] {
        if on_arc(&cand, a, b, &n1) && on_arc(&cand, c, d, &n2) {
            // half-open segments so a crossing through a vertex counts once
            if (cand - b).norm() < 1e-14 || (cand - d).norm() < 1e-14 {
                continue;
            }
            return ArcHit::Cross(cand);
        }
    }
    ArcHit::Miss
}

fn refine_for_chords(lp: &DiscreteLoop) -> DiscreteLoop {
    let mut cur = lp.clone();
    loop {
        let n = cur.len();
        let longest = (0..n)
            .map(|i| cur.point(i).angle_to(&cur.point(i + 1)))
            .fold(0.0, f64::max);
        if longest < FRAC_PI_4 || n > 1 << 16 {
            return cur;
        }
        cur = cur.resample(2 * n).expect("doubling keeps grid valid");
    }
}

/// All crossings between non-adjacent great-circle chords of the loop.
pub fn self_intersections(lp: &DiscreteLoop) -> Intersections {
    let lp = refine_for_chords(lp);
    let pts = lp.points();
    let n = pts.len();
    let mut crossings = Vec::new();
    let mut overlaps = 0;
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            // cheap rejection: chords are shorter than π/4
            if (a + b).dot(&(c + d)) < 0.0 {
                continue;
            }
            match arc_intersection(&a, &b, &c, &d) {
                ArcHit::Miss => {}
                ArcHit::Overlap => overlaps += 1,
                ArcHit::Cross(p) => crossings.push(Crossing {
                    i,
                    j,
                    point: SpherePoint::from_vec(p),
                }),
            }
        }
    }
    Intersections {
        crossings,
        overlaps,
        grid: n,
    }
}

/// Rotation index of the stereographic image, with the distance of the raw
/// angle count from the nearest integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationIndex {
    pub index: i64,
    pub residual: f64,
}

/// Minimum admissible angular distance between the loop and the pole.
pub const POLE_CLEARANCE: f64 = 1e-3;

fn wrap(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// Winding number of the tangent of the loop's stereographic image.
pub fn rotation_index(lp: &DiscreteLoop, pole: &SpherePoint) -> Result<RotationIndex> {
    let clearance = lp
        .points()
        .iter()
        .map(|p| pole.angle_to(&SpherePoint::from_vec(*p)))
        .fold(f64::INFINITY, f64::min);
    if clearance < POLE_CLEARANCE {
        return Err(Error::ChartSingularity(clearance));
    }
    let chart = Stereographic::new(pole);
    let jet = lp.jet();
    let angles: Vec<f64> = lp
        .points()
        .iter()
        .zip(&jet.velocity)
        .map(|(p, v)| {
            let w = chart.push_velocity(p, v);
            w[1].atan2(w[0])
        })
        .collect();
    let n = angles.len();
    let total: f64 = (0..n).map(|i| wrap(angles[(i + 1) % n] - angles[i])).sum();
    let raw = total / TAU;
    let index = raw.round();
    Ok(RotationIndex {
        index: index as i64,
        residual: (raw - index).abs(),
    })
}

/// Winding number of the planar polygon `σ(γ_j)` about `σ(q)`, where `σ` is
/// the stereographic chart from `pole`.
pub fn winding_about(lp: &DiscreteLoop, pole: &SpherePoint, q: &SpherePoint) -> Result<i64> {
    let chart = Stereographic::new(pole);
    let c = chart.forward(q)?;
    let angles = lp
        .points()
        .iter()
        .map(|p| {
            let w = chart.forward(&SpherePoint::from_vec(*p))?;
            Ok((w[1] - c[1]).atan2(w[0] - c[0]))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = angles.len();
    let total: f64 = (0..n).map(|i| wrap(angles[(i + 1) % n] - angles[i])).sum();
    Ok((total / TAU).round() as i64)
}
