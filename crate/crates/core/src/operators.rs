//! Residuals of the curvature equation and their linearizations on loops.
//!
//! With `v = γ'`, `a = γ''`, `G = ∇φ` (round tangential gradient) and
//! `s = e^{φ/2}`, the covariant acceleration is
//! `D_t γ' = P a + (G·v) v − ½|v|² G`, and the prescribed-curvature residual
//! reads `F = −D_t γ' + s k |v| (γ × v)`.

use crate::cyclic::{apply_cyclic, solve_cyclic};
use crate::error::{Error, Result};
use crate::fields::{FieldJet, FieldPair};
use crate::geometry::geodesic_curvature_raw;
use crate::loops::{spectral, DiscreteLoop, LoopJet};
use crate::Vec3;
use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

/// Speeds below this fraction of the mean count as degenerate.
pub const REGULARITY_RATIO: f64 = 1e-6;

/// A vector field along a loop, tangent at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopField {
    pub vectors: Vec<Vec3>,
}

impl LoopField {
    /// Projects each vector to the tangent plane of the matching loop point.
    pub fn tangent(lp: &DiscreteLoop, vectors: Vec<Vec3>) -> Self {
        let vectors = lp.points().iter().zip(vectors).map(|(x, w)| w - x * x.dot(&w)).collect();
        LoopField { vectors }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        LoopField {
            vectors: self.vectors.iter().map(|v| v * c).collect(),
        }
    }

    /// Largest pointwise Euclidean norm.
    pub fn sup_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Coefficients in the `g`-orthonormal frame `e₁ = γ'/|γ'|_g`, `e₂ = J e₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCoords {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FrameCoords {
    /// Interleaved `[a₀, b₀, a₁, b₁, …]`.
    pub fn to_vector(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).flat_map(|(a, b)| [*a, *b]).collect()
    }

    pub fn from_vector(v: &[f64]) -> Self {
        FrameCoords {
            a: v.iter().step_by(2).copied().collect(),
            b: v.iter().skip(1).step_by(2).copied().collect(),
        }
    }
}

/// Pointwise data shared by the operators.
#[derive(Debug, Clone)]
pub struct Frame {
    pub e1: Vec<Vec3>,
    pub e2: Vec<Vec3>,
    /// `e^{φ/2}` at each point.
    pub scale: Vec<f64>,
    /// `g`-speed at each point.
    pub speed: Vec<f64>,
    /// Connection rate `⟨D_t e₁, e₂⟩_g = k_g |γ'|_g`.
    pub omega: Vec<f64>,
}

struct Samples {
    jet: LoopJet,
    phi: Vec<FieldJet>,
    k: Vec<FieldJet>,
}

fn sample(lp: &DiscreteLoop, pair: &FieldPair) -> Result<Samples> {
    let jet = lp.jet();
    let speeds: Vec<f64> = jet.velocity.iter().map(|v| v.norm()).collect();
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(mean > 0.0) || min < REGULARITY_RATIO * mean {
        return Err(Error::DegenerateCurve(min));
    }
    let phi = lp.points().iter().map(|p| pair.phi.jet_at(p)).collect();
    let k = lp.points().iter().map(|p| pair.k.jet_at(p)).collect();
    Ok(Samples { jet, phi, k })
}

fn covariant_acceleration(x: &Vec3, v: &Vec3, a: &Vec3, g: &Vec3) -> Vec3 {
    (a - x * x.dot(a)) + v * g.dot(v) - g * (0.5 * v.norm_squared())
}

pub fn frame(lp: &DiscreteLoop, pair: &FieldPair) -> Result<Frame> {
    let s = sample(lp, pair)?;
    Ok(frame_from(lp, &s))
}

fn frame_from(lp: &DiscreteLoop, s: &Samples) -> Frame {
    let n = lp.len();
    let mut f = Frame {
        e1: Vec::with_capacity(n),
        e2: Vec::with_capacity(n),
        scale: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        omega: Vec::with_capacity(n),
    };
    for i in 0..n {
        let (x, v, a) = (&lp.points()[i], &s.jet.velocity[i], &s.jet.acceleration[i]);
        let sc = (0.5 * s.phi[i].value).exp();
        let speed = sc * v.norm();
        // the interpolant's velocity is tangent only up to spectral error
        let e1 = (v - x * x.dot(v)).normalize() / sc;
        f.e2.push(x.cross(&e1));
        f.e1.push(e1);
        f.scale.push(sc);
        f.speed.push(speed);
        f.omega.push(geodesic_curvature_raw(s.phi[i].value, &s.phi[i].grad, x, v, a) * speed);
    }
    f
}

pub fn field_to_frame(frame: &Frame, field: &LoopField) -> FrameCoords {
    let (a, b) = field
        .vectors
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let s2 = frame.scale[i] * frame.scale[i];
            (s2 * w.dot(&frame.e1[i]), s2 * w.dot(&frame.e2[i]))
        })
        .unzip();
    FrameCoords { a, b }
}

pub fn frame_to_field(frame: &Frame, c: &FrameCoords) -> LoopField {
    LoopField {
        vectors: (0..c.a.len()).map(|i| frame.e1[i] * c.a[i] + frame.e2[i] * c.b[i]).collect(),
    }
}

/// `F(γ) = −D_t γ' + |γ'|_g k(γ) J γ'` on the grid.
pub fn residual_prescribed(lp: &DiscreteLoop, pair: &FieldPair) -> Result<LoopField> {
    let s = sample(lp, pair)?;
    Ok(residual_from(lp, &s))
}

/// The residual before projection. It is tangent only up to the spectral
/// error in the interpolant's velocity.
fn raw_residual(lp: &DiscreteLoop, s: &Samples) -> Vec<Vec3> {
    lp.points()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (v, a) = (&s.jet.velocity[i], &s.jet.acceleration[i]);
            let sc = (0.5 * s.phi[i].value).exp();
            -covariant_acceleration(x, v, a, &s.phi[i].grad) + x.cross(v) * (sc * s.k[i].value * v.norm())
        })
        .collect()
}

fn residual_from(lp: &DiscreteLoop, s: &Samples) -> LoopField {
    LoopField::tangent(lp, raw_residual(lp, s))
}

/// Magnetic residual `−D_τ γ' + k(γ) J γ'` in physical time `τ = period·t`.
pub fn residual_magnetic(lp: &DiscreteLoop, pair: &FieldPair, period: f64) -> Result<LoopField> {
    if !(period > 0.0) {
        return Err(Error::OutOfRange {
            value: period,
            range: "(0, inf)",
        });
    }
    let s = sample(lp, pair)?;
    let vectors = lp
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let v = s.jet.velocity[i] / period;
            let a = s.jet.acceleration[i] / (period * period);
            -covariant_acceleration(x, &v, &a, &s.phi[i].grad) + x.cross(&v) * s.k[i].value
        })
        .collect();
    Ok(LoopField { vectors })
}

/// Largest pointwise `g`-norm of a field along the loop.
pub fn g_sup_norm(lp: &DiscreteLoop, pair: &FieldPair, f: &LoopField) -> f64 {
    lp.points()
        .iter()
        .zip(&f.vectors)
        .map(|(p, v)| (0.5 * pair.phi.value_at(p)).exp() * v.norm())
        .fold(0.0, f64::max)
}

/// Scale-free residual size: `sup |F|_g / mean(|γ'|_g)²`. The residual is
/// quadratic in the speed, so this measures it independently of the length.
pub fn residual_norm(lp: &DiscreteLoop, pair: &FieldPair) -> Result<f64> {
    let s = sample(lp, pair)?;
    let f = residual_from(lp, &s);
    let fr = frame_from(lp, &s);
    let mean = fr.speed.iter().sum::<f64>() / fr.speed.len() as f64;
    let sup = f
        .vectors
        .iter()
        .zip(&fr.scale)
        .map(|(v, sc)| sc * v.norm())
        .fold(0.0, f64::max);
    Ok(sup / (mean * mean))
}

/// Root-mean-square counterpart of [`residual_norm`]. This is the quantity
/// a Gauss–Newton step decreases, so line searches use it as their merit.
pub fn residual_rms(lp: &DiscreteLoop, pair: &FieldPair) -> Result<f64> {
    let s = sample(lp, pair)?;
    let f = residual_from(lp, &s);
    let fr = frame_from(lp, &s);
    let n = fr.speed.len() as f64;
    let mean = fr.speed.iter().sum::<f64>() / n;
    let ms = f
        .vectors
        .iter()
        .zip(&fr.scale)
        .map(|(v, sc)| sc * sc * v.norm_squared())
        .sum::<f64>()
        / n;
    Ok(ms.sqrt() / (mean * mean))
}

/// Discretization of `−D_t² + 1` in frame coordinates as a complex cyclic
/// tridiagonal system on `z = a + i b`. Neighbours are compared after
/// transport by the link phases `exp(±i∫ω)`, which keeps the stencil
/// Hermitian positive definite.
fn covariant_stencil(frame: &Frame) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let n = frame.omega.len();
    let h = 1.0 / n as f64;
    let inv = 1.0 / (h * h);
    let link: Vec<f64> = (0..n).map(|i| 0.5 * h * (frame.omega[i] + frame.omega[(i + 1) % n])).collect();
    let c = (0..n).map(|i| -Complex64::from_polar(inv, link[i])).collect();
    let a = (0..n).map(|i| -Complex64::from_polar(inv, -link[(i + n - 1) % n])).collect();
    let b = vec![Complex64::new(2.0 * inv + 1.0, 0.0); n];
    (a, b, c)
}

fn to_complex(c: &FrameCoords) -> Vec<Complex64> {
    c.a.iter().zip(&c.b).map(|(a, b)| Complex64::new(*a, *b)).collect()
}

fn from_complex(z: &[Complex64]) -> FrameCoords {
    FrameCoords {
        a: z.iter().map(|z| z.re).collect(),
        b: z.iter().map(|z| z.im).collect(),
    }
}

/// Solves `(−D_t² + 1) X = rhs` along the loop.
pub fn solve_covariant(lp: &DiscreteLoop, pair: &FieldPair, rhs: &LoopField) -> Result<LoopField> {
    let fr = frame(lp, pair)?;
    let (a, b, c) = covariant_stencil(&fr);
    let z = solve_cyclic(&a, &b, &c, &to_complex(&field_to_frame(&fr, rhs)))?;
    Ok(frame_to_field(&fr, &from_complex(&z)))
}

/// Applies the discrete `−D_t² + 1` to a field along the loop.
pub fn apply_covariant_operator(lp: &DiscreteLoop, pair: &FieldPair, x: &LoopField) -> Result<LoopField> {
    let fr = frame(lp, pair)?;
    let (a, b, c) = covariant_stencil(&fr);
    let z = apply_cyclic(&a, &b, &c, &to_complex(&field_to_frame(&fr, x)));
    Ok(frame_to_field(&fr, &from_complex(&z)))
}

/// The preconditioned field `X = (−D_t² + 1)⁻¹ F(γ)`.
pub fn apply_x(lp: &DiscreteLoop, pair: &FieldPair) -> Result<LoopField> {
    let f = residual_prescribed(lp, pair)?;
    solve_covariant(lp, pair, &f)
}

fn cross_matrix(w: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Pointwise blocks of `dF = A δa + B δv + C δx`.
struct Blocks {
    a: Vec<Matrix3<f64>>,
    b: Vec<Matrix3<f64>>,
    c: Vec<Matrix3<f64>>,
}

fn linearize(lp: &DiscreteLoop, s: &Samples) -> Blocks {
    let n = lp.len();
    let mut out = Blocks {
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
    };
    let id = Matrix3::identity();
    for i in 0..n {
        let x = &lp.points()[i];
        let (v, acc) = (&s.jet.velocity[i], &s.jet.acceleration[i]);
        let (pj, kj) = (&s.phi[i], &s.k[i]);
        let g = &pj.grad;
        let sc = (0.5 * pj.value).exp();
        let sk = sc * kj.value;
        let vn = v.norm();
        let jv = x.cross(v);
        let v2 = v.norm_squared();
        out.a.push(-(id - x * x.transpose()));
        out.b.push(
            -(v * g.transpose() + id * g.dot(v)) + g * v.transpose() + (jv * v.transpose() / vn + cross_matrix(x) * vn) * sk,
        );
        let dsk = kj.grad * sc + g * (0.5 * sk);
        out.c.push(
            x * acc.transpose() + id * x.dot(acc) - v * (v.transpose() * pj.dgrad) + pj.dgrad * (0.5 * v2)
                + jv * dsk.transpose() * vn
                - cross_matrix(v) * (sk * vn),
        );
    }
    out
}

/// Derivative of [`residual_prescribed`] with respect to tangential
/// perturbations `W = Σ (α_j e₁ⱼ + β_j e₂ⱼ)`, as a `3N × 2N` matrix on the
/// interleaved frame coefficients.
pub fn jacobian_residual(lp: &DiscreteLoop, pair: &FieldPair) -> Result<DMatrix<f64>> {
    let s = sample(lp, pair)?;
    let fr = frame_from(lp, &s);
    let bl = linearize(lp, &s);
    let raw = raw_residual(lp, &s);
    let n = lp.len();
    let d1 = spectral::differentiation_matrix(n, 1);
    let d2 = spectral::differentiation_matrix(n, 2);
    let mut jac = DMatrix::zeros(3 * n, 2 * n);
    for j in 0..n {
        let x = &lp.points()[j];
        for (col, e) in [(2 * j, &fr.e1[j]), (2 * j + 1, &fr.e2[j])] {
            for i in 0..n {
                let mut w = (bl.a[i] * e) * d2[(i, j)] + (bl.b[i] * e) * d1[(i, j)];
                if i == j {
                    w += bl.c[i] * e;
                }
                let xi = &lp.points()[i];
                w -= xi * xi.dot(&w);
                if i == j {
                    // derivative of the projection itself
                    w -= e * x.dot(&raw[j]) + x * e.dot(&raw[j]);
                }
                for r in 0..3 {
                    jac[(3 * i + r, col)] = w[r];
                }
            }
        }
    }
    Ok(jac)
}

/// Square Newton system in frame coordinates: residual components and the
/// Jacobian rows projected on `(e₁, e₂)` with the `g` inner product.
pub(crate) struct FrameSystem {
    pub frame: Frame,
    pub residual: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub norm: f64,
}

pub(crate) fn frame_system(lp: &DiscreteLoop, pair: &FieldPair) -> Result<FrameSystem> {
    let s = sample(lp, pair)?;
    let fr = frame_from(lp, &s);
    let raw = raw_residual(lp, &s);
    let f = LoopField::tangent(lp, raw.clone());
    let bl = linearize(lp, &s);
    let n = lp.len();
    let d1 = spectral::differentiation_matrix(n, 1);
    let d2 = spectral::differentiation_matrix(n, 2);
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let s2 = fr.scale[i] * fr.scale[i];
        let rows = [fr.e1[i] * s2, fr.e2[i] * s2];
        // project each block on the row frame once
        let pa = rows.map(|r| bl.a[i].transpose() * r);
        let pb = rows.map(|r| bl.b[i].transpose() * r);
        let pc = rows.map(|r| bl.c[i].transpose() * r);
        for j in 0..n {
            let (q1, q2) = (d1[(i, j)], d2[(i, j)]);
            for (cj, e) in [&fr.e1[j], &fr.e2[j]].into_iter().enumerate() {
                for r in 0..2 {
                    let mut val = q2 * pa[r].dot(e) + q1 * pb[r].dot(e);
                    if i == j {
                        // the projection contributes −(x·F) e along the rows
                        val += pc[r].dot(e) - lp.points()[i].dot(&raw[i]) * rows[r].dot(e);
                    }
                    jac[(2 * i + r, 2 * j + cj)] = val;
                }
            }
        }
    }
    let coords = field_to_frame(&fr, &f);
    let mean = fr.speed.iter().sum::<f64>() / n as f64;
    let sup = f.vectors.iter().zip(&fr.scale).map(|(v, sc)| sc * v.norm()).fold(0.0, f64::max);
    Ok(FrameSystem {
        residual: coords.to_vector(),
        jacobian: jac,
        norm: sup / (mean * mean),
        frame: fr,
    })
}

/// `normalize(γ + W)` pointwise.
pub fn retract(lp: &DiscreteLoop, w: &LoopField) -> Result<DiscreteLoop> {
    DiscreteLoop::new(lp.points().iter().zip(&w.vectors).map(|(p, v)| (p + v).normalize()).collect())
}
