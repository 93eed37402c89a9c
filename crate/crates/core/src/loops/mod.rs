//! Discrete closed curves on S².
//!
//! A loop is `N` points sampled at `t_j = j/N` on `S¹ = ℝ/ℤ`; derivatives and
//! off-grid values come from the coordinatewise trigonometric interpolant.

pub mod area;
pub mod io;
pub mod spectral;
pub mod topology;

pub use area::{enclosed_area, region_integral};
pub use topology::{rotation_index, self_intersections, winding_about, Crossing, Intersections, RotationIndex};

use crate::error::{Error, Result};
use crate::fields::SphericalField;
use crate::geometry::SpherePoint;
use crate::Vec3;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// RMS threshold below which two shifted copies count as the same loop.
pub const ISOTROPY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLoop {
    points: Vec<Vec3>,
}

/// First and second parameter derivatives on the grid.
#[derive(Debug, Clone)]
pub struct LoopJet {
    pub velocity: Vec<Vec3>,
    pub acceleration: Vec<Vec3>,
}

fn split_coords(points: &[Vec3]) -> [Vec<f64>; 3] {
    [0, 1, 2].map(|c| points.iter().map(|p| p[c]).collect())
}

fn join_coords(coords: &[Vec<f64>; 3]) -> Vec<Vec3> {
    (0..coords[0].len())
        .map(|i| Vec3::new(coords[0][i], coords[1][i], coords[2][i]))
        .collect()
}

impl DiscreteLoop {
    /// Builds a loop, placing every point on the sphere.
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        let n = points.len();
        if n < 16 || n % 2 != 0 {
            return Err(Error::BadGridSize(n));
        }
        if points.iter().any(|p| !(p.norm() > 0.0) || !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Parse("loop point is zero or not finite".into()));
        }
        Ok(DiscreteLoop {
            points: points.into_iter().map(|p| *SpherePoint::from_vec(p).vec()).collect(),
        })
    }

    /// Samples `f` at `t_j = j/N`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Vec3) -> Result<Self> {
        Self::new((0..n).map(|j| f(j as f64 / n as f64)).collect())
    }

    /// Circle of angular radius `radius` about `center`, traversed so that
    /// the centre lies on the `J γ'` side, uniformly parameterized.
    pub fn circle(n: usize, center: &SpherePoint, radius: f64) -> Result<Self> {
        let c = *center.vec();
        let helper = if c.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = (helper - c * c.dot(&helper)).normalize();
        let w = c.cross(&u);
        let (sr, cr) = radius.sin_cos();
        Self::from_fn(n, |t| {
            let (s, co) = (TAU * t).sin_cos();
            c * cr + (u * co + w * s) * sr
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> SpherePoint {
        SpherePoint::from_vec(self.points[i % self.len()])
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }

    pub fn jet(&self) -> LoopJet {
        differentiate(self)
    }

    /// Grid shift: point `j` of the result is point `j + s` of `self`.
    pub fn shift(&self, s: isize) -> Self {
        let n = self.len() as isize;
        let points = (0..n).map(|j| self.points[(j + s).rem_euclid(n) as usize]).collect();
        DiscreteLoop { points }
    }

    /// Continuous shift `θ*γ(t) = γ(t + θ)` through the interpolant.
    pub fn shift_by(&self, theta: f64) -> Self {
        let coords = split_coords(&self.points).map(|c| spectral::shift(&c, theta));
        DiscreteLoop::new(join_coords(&coords)).expect("shifted loop keeps its grid")
    }

    /// Opposite orientation, `γ(−t)`.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        DiscreteLoop {
            points: (0..n).map(|j| self.points[(n - j) % n]).collect(),
        }
    }

    /// The `n`-fold iterate, sampled with the same resolution per lap.
    pub fn iterate(&self, n: usize) -> Self {
        let points = (0..n).flat_map(|_| self.points.iter().copied()).collect();
        DiscreteLoop { points }
    }

    pub fn coefficients(&self) -> [Vec<Complex64>; 3] {
        split_coords(&self.points).map(|c| spectral::coefficients(&c))
    }

    /// Interpolated point at parameter `t`, projected to the sphere.
    pub fn evaluate(&self, t: f64) -> SpherePoint {
        let c = self.coefficients();
        eval_coeffs(&c, t)
    }

    pub fn resample(&self, m: usize) -> Result<Self> {
        let coords = split_coords(&self.points).map(|c| spectral::resample(&c, m));
        DiscreteLoop::new(join_coords(&coords))
    }

    /// Speeds `|γ'|_g = e^{φ/2}|γ'|` on the grid.
    pub fn speeds(&self, phi: &SphericalField) -> Vec<f64> {
        let jet = self.jet();
        self.points
            .iter()
            .zip(&jet.velocity)
            .map(|(p, v)| (0.5 * phi.value_at(p)).exp() * v.norm())
            .collect()
    }

    /// Length in `g`, by the (spectrally accurate) periodic trapezoid rule.
    pub fn length(&self, phi: &SphericalField) -> f64 {
        self.speeds(phi).iter().sum::<f64>() / self.len() as f64
    }

    /// Reparameterizes to constant `g`-speed, keeping `γ(0)` fixed.
    pub fn reparametrize_uniform(&self, phi: &SphericalField) -> Result<Self> {
        let n = self.len();
        let speeds = self.speeds(phi);
        let sc = spectral::coefficients(&speeds);
        let total = sc[0].re;
        let min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::DegenerateCurve(min));
        }
        let coords = self.coefficients();
        let mut points = Vec::with_capacity(n);
        for j in 0..n {
            let target = total * j as f64 / n as f64;
            let mut tau = j as f64 / n as f64;
            for _ in 0..50 {
                let err = spectral::integral(&sc, tau) - target;
                let rate = spectral::evaluate(&sc, tau).max(0.1 * min);
                let step = err / rate;
                tau -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            points.push(*eval_coeffs(&coords, tau).vec());
        }
        DiscreteLoop::new(points)
    }
}

fn eval_coeffs(c: &[Vec<Complex64>; 3], t: f64) -> SpherePoint {
    SpherePoint::from_vec(Vec3::new(
        spectral::evaluate(&c[0], t),
        spectral::evaluate(&c[1], t),
        spectral::evaluate(&c[2], t),
    ))
}

/// Spectral first and second derivatives, coordinatewise.
pub fn differentiate(lp: &DiscreteLoop) -> LoopJet {
    let coords = split_coords(&lp.points);
    let v = coords.clone().map(|c| spectral::derivative(&c, 1));
    let a = coords.map(|c| spectral::derivative(&c, 2));
    LoopJet {
        velocity: join_coords(&v),
        acceleration: join_coords(&a),
    }
}

/// Best alignment of two loops over the circle action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftMatch {
    /// RMS point distance after alignment.
    pub distance: f64,
    /// `θ` with `θ*a ≈ b`, as a fraction of the period in `[0, 1)`.
    pub shift: f64,
    /// Best grid shift in steps.
    pub grid_shift: usize,
}

/// RMS distance between `a` and `b` minimized over the circle action.
///
/// The grid shifts are scanned first; the best one is then refined over
/// continuous shifts of the interpolant, since independently computed
/// solutions carry arbitrary phases. Loops of different size are compared
/// after resampling to the larger grid.
pub fn shift_distance(a: &DiscreteLoop, b: &DiscreteLoop) -> ShiftMatch {
    if a.len() != b.len() {
        let m = a.len().max(b.len());
        let ra = if a.len() == m { a.clone() } else { a.resample(m).expect("resample") };
        let rb = if b.len() == m { b.clone() } else { b.resample(m).expect("resample") };
        return shift_distance(&ra, &rb);
    }
    let n = a.len();
    let mut best = (f64::INFINITY, 0usize);
    for s in 0..n {
        let d2: f64 = (0..n)
            .map(|j| (a.points[(j + s) % n] - b.points[j]).norm_squared())
            .sum::<f64>()
            / n as f64;
        if d2 < best.0 {
            best = (d2, s);
        }
    }
    let grid = ShiftMatch {
        distance: best.0.sqrt(),
        shift: best.1 as f64 / n as f64,
        grid_shift: best.1,
    };
    if grid.distance == 0.0 {
        return grid;
    }
    let ca = a.coefficients();
    let cb = b.coefficients();
    let d2 = |theta: f64| -> f64 {
        (0..3)
            .map(|c| {
                (0..n)
                    .map(|k| {
                        let rot = if k == n / 2 {
                            Complex64::new((std::f64::consts::PI * n as f64 * theta).cos(), 0.0)
                        } else {
                            Complex64::from_polar(1.0, TAU * spectral::wavenumber(k, n) as f64 * theta)
                        };
                        (ca[c][k] * rot - cb[c][k]).norm_sqr()
                    })
                    .sum::<f64>()
            })
            .sum()
    };
    // golden-section search on one grid step either side
    let h = 1.0 / n as f64;
    let (mut lo, mut hi) = (grid.shift - h, grid.shift + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (d2(x1), d2(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = d2(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = d2(x2);
        }
    }
    let (theta, val) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    let refined = val.max(0.0).sqrt();
    if refined < grid.distance {
        ShiftMatch {
            distance: refined,
            shift: theta.rem_euclid(1.0),
            grid_shift: grid.grid_shift,
        }
    } else {
        grid
    }
}

/// Largest `n | N` such that shifting by `N/n` grid steps maps the loop to
/// itself within [`ISOTROPY_TOL`]; `1` means prime.
pub fn isotropy_order(lp: &DiscreteLoop) -> usize {
    let n = lp.len();
    for order in (2..=n).rev() {
        if n % order != 0 {
            continue;
        }
        let step = (n / order) as isize;
        let shifted = lp.shift(step);
        let rms = (lp
            .points
            .iter()
            .zip(&shifted.points)
            .map(|(p, q)| (p - q).norm_squared())
            .sum::<f64>()
            / n as f64)
            .sqrt();
        if rms < ISOTROPY_TOL {
            return order;
        }
    }
    1
}
