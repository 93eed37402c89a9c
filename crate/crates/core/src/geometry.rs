//! Pointwise differential geometry of `(S², e^φ g_can)`.
//!
//! Points and tangent vectors live in the ambient `ℝ³`. Because the metric is
//! conformal to the round one, it shares angles with it: the rotation `J` is
//! the cross product with the base point for every conformal factor.

use crate::error::{Error, Result};
use crate::fields::SphericalField;
use crate::Vec3;
use serde::{Deserialize, Serialize};

/// Tolerance for on-sphere and tangency constraints.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Drift below this is left untouched so that serialized points read back
/// bit-identical.
const RENORMALIZE_SLACK: f64 = 1e-15;

/// A point of the unit sphere in ambient coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Builds a point from an arbitrary nonzero vector, renormalizing it.
    ///
    /// Panics on the zero vector.
    pub fn from_vec(v: Vec3) -> Self {
        let n = v.norm();
        assert!(n > 0.0 && n.is_finite(), "cannot place {v:?} on the sphere");
        if (n - 1.0).abs() > RENORMALIZE_SLACK {
            SpherePoint(v / n)
        } else {
            SpherePoint(v)
        }
    }

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self::from_vec(Vec3::new(x, y, z))
    }

    /// Point with polar angle `theta` (from +z) and azimuth `lambda`.
    pub fn from_spherical(theta: f64, lambda: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sl, cl) = lambda.sin_cos();
        SpherePoint(Vec3::new(st * cl, st * sl, ct))
    }

    pub fn north() -> Self {
        SpherePoint(Vec3::z())
    }

    pub fn vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn antipode(&self) -> Self {
        SpherePoint(-self.0)
    }

    /// Great-circle distance.
    pub fn angle_to(&self, other: &SpherePoint) -> f64 {
        self.0.cross(&other.0).norm().atan2(self.0.dot(&other.0))
    }
}

/// A tangent vector pinned to its base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub base: SpherePoint,
    pub v: Vec3,
}

impl TangentVector {
    /// Attaches `v` at `base`, projecting away any normal component larger
    /// than the constraint tolerance.
    pub fn new(base: SpherePoint, v: Vec3) -> Self {
        if base.0.dot(&v).abs() > CONSTRAINT_TOL {
            project_tangent(&base, &v)
        } else {
            TangentVector { base, v }
        }
    }

    fn check_base(&self, x: &SpherePoint) -> Result<()> {
        let d = (self.base.0 - x.0).norm();
        if d > CONSTRAINT_TOL {
            Err(Error::BaseMismatch(d))
        } else {
            Ok(())
        }
    }
}

/// The metric `e^φ g_can` determined by its log-conformal factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalMetric {
    pub phi: SphericalField,
}

impl ConformalMetric {
    pub fn new(phi: SphericalField) -> Self {
        ConformalMetric { phi }
    }

    pub fn round() -> Self {
        ConformalMetric {
            phi: SphericalField::zero(),
        }
    }

    /// Pointwise factor `e^{φ(x)}`.
    pub fn factor(&self, x: &SpherePoint) -> f64 {
        self.phi.value(x).exp()
    }

    pub fn norm(&self, u: &TangentVector) -> f64 {
        (self.factor(&u.base) * u.v.norm_squared()).sqrt()
    }
}

pub fn project_tangent(x: &SpherePoint, w: &Vec3) -> TangentVector {
    TangentVector {
        base: *x,
        v: w - x.0 * x.0.dot(w),
    }
}

pub fn metric_inner(
    m: &ConformalMetric,
    x: &SpherePoint,
    u: &TangentVector,
    v: &TangentVector,
) -> Result<f64> {
    u.check_base(x)?;
    v.check_base(x)?;
    let ip = m.factor(x) * u.v.dot(&v.v);
    debug_assert!(u.v.norm_squared() == 0.0 || m.factor(x) * u.v.norm_squared() > 0.0);
    Ok(ip)
}

/// Positive rotation by π/2: `J v = x × v`.
pub fn rotate_j(x: &SpherePoint, v: &TangentVector) -> TangentVector {
    TangentVector {
        base: *x,
        v: x.0.cross(&v.v),
    }
}

/// Covariant derivative along a curve from ambient data, given the round
/// gradient of φ at `x`.
///
/// `D_t V = P_x(V') + ½[dφ(x')V + dφ(V)x' − ⟨x',V⟩ ∇φ]`.
pub fn covariant_deriv_raw(grad_phi: &Vec3, x: &Vec3, xdot: &Vec3, v: &Vec3, vdot: &Vec3) -> Vec3 {
    let proj = vdot - x * x.dot(vdot);
    proj + 0.5 * (v * grad_phi.dot(xdot) + xdot * grad_phi.dot(v) - grad_phi * xdot.dot(v))
}

pub fn covariant_deriv(
    m: &ConformalMetric,
    x: &SpherePoint,
    xdot: &TangentVector,
    v: &TangentVector,
    vdot: &Vec3,
) -> Result<TangentVector> {
    xdot.check_base(x)?;
    v.check_base(x)?;
    let grad = m.phi.gradient(x);
    Ok(TangentVector {
        base: *x,
        v: covariant_deriv_raw(&grad.v, &x.0, &xdot.v, &v.v, vdot),
    })
}

/// Geodesic curvature `⟨D_t x', J x'⟩_g / |x'|_g³` from the curve's 2-jet.
pub fn geodesic_curvature(m: &ConformalMetric, x: &SpherePoint, xdot: &Vec3, xddot: &Vec3) -> Result<f64> {
    let speed = xdot.norm();
    if speed < CONSTRAINT_TOL {
        return Err(Error::DegenerateCurve(speed));
    }
    let phi = m.phi.value(x);
    let grad = m.phi.gradient(x).v;
    Ok(geodesic_curvature_raw(phi, &grad, &x.0, xdot, xddot))
}

pub(crate) fn geodesic_curvature_raw(phi: f64, grad_phi: &Vec3, x: &Vec3, xdot: &Vec3, xddot: &Vec3) -> f64 {
    let acc = covariant_deriv_raw(grad_phi, x, xdot, xdot, xddot);
    let jx = x.cross(xdot);
    // e^φ (a·Jv) / (e^{3φ/2}|v|³)
    (-0.5 * phi).exp() * acc.dot(&jx) / xdot.norm().powi(3)
}

/// Gauss curvature `K = e^{−φ}(1 − ½Δφ)`.
pub fn gauss_curvature(m: &ConformalMetric, x: &SpherePoint) -> f64 {
    (-m.phi.value(x)).exp() * (1.0 - 0.5 * m.phi.laplacian(x))
}

/// Stereographic chart projecting from `pole`; sends `−pole` to the origin.
///
/// The plane basis is chosen so the chart preserves orientation when the
/// sphere is viewed from outside near `−pole`.
#[derive(Debug, Clone, Copy)]
pub struct Stereographic {
    pole: Vec3,
    e1: Vec3,
    e2: Vec3,
}

/// Chart singularity radius around the pole.
pub const CHART_TOL: f64 = 1e-9;

impl Stereographic {
    pub fn new(pole: &SpherePoint) -> Self {
        let p = pole.0;
        let axes = [Vec3::x(), Vec3::y(), Vec3::z()];
        let mut a = axes[0];
        for ax in &axes[1..] {
            if ax.dot(&p).abs() < a.dot(&p).abs() {
                a = *ax;
            }
        }
        let e1 = (a - p * a.dot(&p)).normalize();
        let e2 = e1.cross(&p);
        Stereographic { pole: p, e1, e2 }
    }

    pub fn pole(&self) -> SpherePoint {
        SpherePoint(self.pole)
    }

    pub fn forward(&self, x: &SpherePoint) -> Result<[f64; 2]> {
        let d = (x.0 - self.pole).norm();
        if d < CHART_TOL {
            return Err(Error::ChartSingularity(d));
        }
        let s = 1.0 - x.0.dot(&self.pole);
        Ok([x.0.dot(&self.e1) / s, x.0.dot(&self.e2) / s])
    }

    /// Pushes a velocity through the chart differential.
    pub fn push_velocity(&self, x: &Vec3, xdot: &Vec3) -> [f64; 2] {
        let s = 1.0 - x.dot(&self.pole);
        let sdot = -xdot.dot(&self.pole);
        let f = |e: &Vec3| (xdot.dot(e) * s - x.dot(e) * sdot) / (s * s);
        [f(&self.e1), f(&self.e2)]
    }

    pub fn inverse(&self, w: [f64; 2]) -> SpherePoint {
        let r2 = w[0] * w[0] + w[1] * w[1];
        let v = (2.0 * w[0] * self.e1 + 2.0 * w[1] * self.e2 + (r2 - 1.0) * self.pole) / (r2 + 1.0);
        SpherePoint::from_vec(v)
    }
}

pub fn stereographic(x: &SpherePoint, pole: &SpherePoint) -> Result<[f64; 2]> {
    Stereographic::new(pole).forward(x)
}
