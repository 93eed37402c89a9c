//! Scalar fields on S² as finite real spherical-harmonic expansions.
//!
//! The basis is Schmidt semi-normalized: `Y_l0 = P_l(cos θ)`,
//! `Y_lm = √(2(l−m)!/(l+m)!) P_l^m(cos θ) cos(mλ)` and the `sin(mλ)` partner
//! for negative `m`. With this choice `Y_00 = 1`, `(Y_11, Y_1−1, Y_10) =
//! (x, y, z)` and `|Y_lm| ≤ 1` on the sphere, which keeps the derivative
//! bounds used for infimum certification simple.
//!
//! Each basis function is the restriction of a harmonic homogeneous
//! polynomial (a regular solid harmonic). Fields are stored as those
//! polynomials, so values, gradients and Hessians are exact.

use crate::error::{Error, Result};
use crate::geometry::{SpherePoint, TangentVector};
use crate::Vec3;
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

pub const MAX_DEGREE: usize = 24;

/// One `(l, m, coefficient)` term of an expansion.
pub type Term = (usize, i64, f64);

type Exps = (u8, u8, u8);

/// Homogeneous polynomial in (x, y, z), sparse.
#[derive(Debug, Clone, Default, PartialEq)]
struct Poly(Vec<(Exps, f64)>);

impl Poly {
    fn from_map(map: BTreeMap<Exps, f64>) -> Self {
        Poly(map.into_iter().filter(|(_, c)| *c != 0.0).collect())
    }

    fn partial(&self, axis: usize) -> Poly {
        let mut out = BTreeMap::new();
        for &((a, b, c), coef) in &self.0 {
            let e = [a, b, c];
            if e[axis] == 0 {
                continue;
            }
            let mut d = e;
            d[axis] -= 1;
            *out.entry((d[0], d[1], d[2])).or_insert(0.0) += coef * e[axis] as f64;
        }
        Poly::from_map(out)
    }

    fn eval(&self, pw: &Powers) -> f64 {
        self.0
            .iter()
            .map(|&((a, b, c), coef)| coef * pw.x[a as usize] * pw.y[b as usize] * pw.z[c as usize])
            .sum()
    }
}

struct Powers {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl Powers {
    fn new(p: &Vec3, degree: usize) -> Self {
        let table = |v: f64| {
            let mut t = Vec::with_capacity(degree + 1);
            let mut acc = 1.0;
            for _ in 0..=degree {
                t.push(acc);
                acc *= v;
            }
            t
        };
        Powers {
            x: table(p.x),
            y: table(p.y),
            z: table(p.z),
        }
    }
}

type Dense = BTreeMap<Exps, f64>;

fn mul_linear(p: &Dense, axis: usize, s: f64) -> Dense {
    let mut out = Dense::new();
    for (&(a, b, c), &v) in p {
        let mut e = [a, b, c];
        e[axis] += 1;
        *out.entry((e[0], e[1], e[2])).or_insert(0.0) += s * v;
    }
    out
}

fn add_into(acc: &mut Dense, p: &Dense, s: f64) {
    for (&k, &v) in p {
        *acc.entry(k).or_insert(0.0) += s * v;
    }
}

fn mul_r2(p: &Dense) -> Dense {
    let mut out = Dense::new();
    for axis in 0..3 {
        let once = mul_linear(p, axis, 1.0);
        add_into(&mut out, &mul_linear(&once, axis, 1.0), 1.0);
    }
    out
}

/// Unnormalized solid harmonics `r^l P_l^m(cos θ) cos mλ` and `... sin mλ`
/// for `0 ≤ m ≤ l ≤ degree`, indexed `[l][m]`.
fn solid_harmonics(degree: usize) -> (Vec<Vec<Dense>>, Vec<Vec<Dense>>) {
    let empty = || vec![vec![Dense::new(); degree + 1]; degree + 1];
    let (mut c, mut s) = (empty(), empty());
    c[0][0].insert((0, 0, 0), 1.0);
    for m in 0..=degree {
        if m > 0 {
            let f = (2 * m - 1) as f64;
            let mut cm = mul_linear(&c[m - 1][m - 1], 0, f);
            add_into(&mut cm, &mul_linear(&s[m - 1][m - 1], 1, f), -1.0);
            let mut sm = mul_linear(&c[m - 1][m - 1], 1, f);
            add_into(&mut sm, &mul_linear(&s[m - 1][m - 1], 0, f), 1.0);
            c[m][m] = cm;
            s[m][m] = sm;
        }
        for l in m..degree {
            // (l−m+1) P_{l+1} = (2l+1) z P_l − (l+m) r² P_{l−1}
            let denom = (l - m + 1) as f64;
            for tab in [&mut c, &mut s] {
                let mut next = mul_linear(&tab[l][m], 2, (2 * l + 1) as f64 / denom);
                if l > m {
                    let lower = mul_r2(&tab[l - 1][m]);
                    add_into(&mut next, &lower, -((l + m) as f64) / denom);
                }
                tab[l + 1][m] = next;
            }
        }
    }
    (c, s)
}

fn schmidt_factor(l: usize, m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    // 2 (l−m)! / (l+m)!
    let mut ratio = 2.0;
    for j in (l - m + 1)..=(l + m) {
        ratio /= j as f64;
    }
    ratio.sqrt()
}

/// Value and derivatives of a field at a sphere point.
#[derive(Debug, Clone, Copy)]
pub struct FieldJet {
    pub value: f64,
    /// Tangential (round) gradient.
    pub grad: Vec3,
    /// Derivative of the tangential gradient field, valid on tangent
    /// directions: `δ(grad) = dgrad · δx`.
    pub dgrad: Matrix3<f64>,
}

/// A real spherical-harmonic expansion with exact derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<Term>", into = "Vec<Term>")]
pub struct SphericalField {
    terms: Vec<Term>,
    degree: usize,
    value: Poly,
    grad: [Poly; 3],
    hess: [Poly; 6],
    lap: Poly,
}

impl PartialEq for SphericalField {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl From<SphericalField> for Vec<Term> {
    fn from(f: SphericalField) -> Self {
        f.terms
    }
}

impl TryFrom<Vec<Term>> for SphericalField {
    type Error = Error;
    fn try_from(terms: Vec<Term>) -> Result<Self> {
        SphericalField::new(terms)
    }
}

const HESS_INDEX: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

impl SphericalField {
    /// Builds a field from `(l, m, coeff)` terms. Repeated `(l, m)` pairs are
    /// summed; terms are stored sorted by `(l, m)`.
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, i64), f64> = BTreeMap::new();
        for (l, m, c) in terms {
            if l > MAX_DEGREE {
                return Err(Error::InvalidField(format!("degree {l} exceeds {MAX_DEGREE}")));
            }
            if m.unsigned_abs() as usize > l {
                return Err(Error::InvalidField(format!("order {m} outside [-{l}, {l}]")));
            }
            if !c.is_finite() {
                return Err(Error::InvalidField(format!("coefficient {c} for ({l}, {m}) is not finite")));
            }
            *merged.entry((l, m)).or_insert(0.0) += c;
        }
        let terms: Vec<Term> = merged
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((l, m), c)| (l, m, c))
            .collect();
        let degree = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let (cos_tab, sin_tab) = solid_harmonics(degree);
        let mut value = Dense::new();
        let mut lap = Dense::new();
        for &(l, m, coef) in &terms {
            let am = m.unsigned_abs() as usize;
            let basis = if m >= 0 { &cos_tab[l][am] } else { &sin_tab[l][am] };
            let s = coef * schmidt_factor(l, am);
            add_into(&mut value, basis, s);
            add_into(&mut lap, basis, -((l * (l + 1)) as f64) * s);
        }
        let value = Poly::from_map(value);
        let grad = [value.partial(0), value.partial(1), value.partial(2)];
        let hess = HESS_INDEX.map(|(i, j)| grad[i].partial(j));
        Ok(SphericalField {
            terms,
            degree,
            value,
            grad,
            hess,
            lap: Poly::from_map(lap),
        })
    }

    pub fn zero() -> Self {
        Self::new(Vec::new()).expect("empty field")
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![(0, 0, c)]).expect("constant field")
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `Y_00`; also the mean value over the sphere.
    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.0 == 0)
            .map_or(0.0, |t| t.2)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.terms.iter().map(|&(l, m, c)| (l, m, s * c)).collect()).expect("scaled field")
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SphericalField, b: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|&(l, m, c)| (l, m, a * c))
            .chain(other.terms.iter().map(|&(l, m, c)| (l, m, b * c)))
            .collect();
        Self::new(terms).expect("combined field")
    }

    /// The field `Δ_can f` as an expansion.
    pub fn laplacian_field(&self) -> Self {
        Self::new(
            self.terms
                .iter()
                .map(|&(l, m, c)| (l, m, -((l * (l + 1)) as f64) * c))
                .collect(),
        )
        .expect("laplacian field")
    }

    /// Bound on the derivative along unit-speed great circles (Bernstein:
    /// a degree-l trigonometric polynomial bounded by 1 has derivative ≤ l).
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms.iter().map(|&(l, _, c)| c.abs() * l as f64).sum()
    }

    /// Bound on the second derivative along unit-speed great circles.
    pub fn second_derivative_bound(&self) -> f64 {
        self.terms.iter().map(|&(l, _, c)| c.abs() * (l * l) as f64).sum()
    }

    pub fn value(&self, x: &SpherePoint) -> f64 {
        self.value_at(x.vec())
    }

    pub(crate) fn value_at(&self, p: &Vec3) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        self.value.eval(&Powers::new(p, self.degree))
    }

    pub fn gradient(&self, x: &SpherePoint) -> TangentVector {
        TangentVector {
            base: *x,
            v: self.gradient_at(x.vec()),
        }
    }

    pub(crate) fn gradient_at(&self, p: &Vec3) -> Vec3 {
        if self.degree == 0 {
            return Vec3::zeros();
        }
        let pw = Powers::new(p, self.degree);
        let amb = Vec3::new(self.grad[0].eval(&pw), self.grad[1].eval(&pw), self.grad[2].eval(&pw));
        amb - p * p.dot(&amb)
    }

    pub fn laplacian(&self, x: &SpherePoint) -> f64 {
        if self.degree == 0 {
            return 0.0;
        }
        self.lap.eval(&Powers::new(x.vec(), self.degree))
    }

    pub(crate) fn jet_at(&self, p: &Vec3) -> FieldJet {
        if self.degree == 0 {
            return FieldJet {
                value: self.mean(),
                grad: Vec3::zeros(),
                dgrad: Matrix3::zeros(),
            };
        }
        let pw = Powers::new(p, self.degree);
        let value = self.value.eval(&pw);
        let amb = Vec3::new(self.grad[0].eval(&pw), self.grad[1].eval(&pw), self.grad[2].eval(&pw));
        let mut h = Matrix3::zeros();
        for (poly, &(i, j)) in self.hess.iter().zip(HESS_INDEX.iter()) {
            let v = poly.eval(&pw);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
        let radial = p.dot(&amb);
        let grad = amb - p * radial;
        // G(x) = ∇Φ − (x·∇Φ)x  ⇒  DG = H − x(∇Φ + Hx)ᵀ − (x·∇Φ)I
        let dgrad = h - p * (amb + h * p).transpose() - Matrix3::identity() * radial;
        FieldJet { value, grad, dgrad }
    }

    pub fn jet(&self, x: &SpherePoint) -> FieldJet {
        self.jet_at(x.vec())
    }
}

/// A single Schmidt-normalized basis function, for tests and diagnostics.
pub fn basis_function(l: usize, m: i64) -> Result<SphericalField> {
    SphericalField::new(vec![(l, m, 1.0)])
}

pub fn eval_field(f: &SphericalField, x: &SpherePoint) -> f64 {
    f.value(x)
}

pub fn grad_field(f: &SphericalField, x: &SpherePoint) -> TangentVector {
    f.gradient(x)
}

pub fn laplacian_field(f: &SphericalField, x: &SpherePoint) -> f64 {
    f.laplacian(x)
}

/// Certified enclosure of a field's minimum over the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Infimum {
    /// Guaranteed `≤ min f` (up to floating-point rounding).
    pub lower: f64,
    /// Best value found, `≥ min f`.
    pub upper: f64,
    pub gap: f64,
    pub argmin: [f64; 3],
}

struct Cell {
    verts: [Vec3; 3],
    lower: f64,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.lower == other.lower
    }
}
impl Eq for Cell {}
impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cell {
    // min-heap on the lower bound
    fn cmp(&self, other: &Self) -> Ordering {
        other.lower.total_cmp(&self.lower)
    }
}

pub(crate) fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(a, b, c)| Vec3::new(a, b, c).normalize())
    .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn split(tri: &[Vec3; 3]) -> [[Vec3; 3]; 4] {
    let [a, b, c] = *tri;
    let ab = (a + b).normalize();
    let bc = (b + c).normalize();
    let ca = (c + a).normalize();
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}

const INFIMUM_TOL: f64 = 1e-9;
const INFIMUM_MAX_CELLS: usize = 400_000;

/// Certified lower bound for `min f` over S².
///
/// An icosahedral grid is refined by branch and bound. On a cell with centre
/// `c` and angular radius `r`, `f ≥ f(c) − |∇f(c)| r − ½ M₂ r²` where `M₂`
/// bounds second derivatives along great circles. A projected-gradient
/// descent from the best sample tightens the upper bound.
pub fn field_infimum(f: &SphericalField) -> Infimum {
    field_infimum_with(f, INFIMUM_TOL, INFIMUM_MAX_CELLS)
}

pub fn field_infimum_with(f: &SphericalField, tol: f64, max_cells: usize) -> Infimum {
    let m2 = f.second_derivative_bound();
    let mut best = (f64::INFINITY, Vec3::z());
    let consider = |v: f64, p: Vec3, best: &mut (f64, Vec3)| {
        if v < best.0 {
            *best = (v, p);
        }
    };
    let make_cell = |verts: [Vec3; 3], best: &mut (f64, Vec3)| {
        let c = (verts[0] + verts[1] + verts[2]).normalize();
        let r = verts
            .iter()
            .map(|v| c.cross(v).norm().atan2(c.dot(v)))
            .fold(0.0, f64::max);
        let value = f.value_at(&c);
        let slope = f.gradient_at(&c).norm();
        consider(value, c, best);
        Cell {
            verts,
            lower: value - slope * r - 0.5 * m2 * r * r,
        }
    };

    let (verts, faces) = icosahedron();
    let mut heap = BinaryHeap::new();
    for face in &faces {
        let tri = [verts[face[0]], verts[face[1]], verts[face[2]]];
        for t in split(&tri) {
            for t2 in split(&t) {
                heap.push(make_cell(t2, &mut best));
            }
        }
    }
    best = descend(f, best);

    let mut processed = 0;
    let lower = loop {
        let cell = heap.pop().expect("nonempty cell heap");
        if best.0 - cell.lower <= tol || processed >= max_cells {
            break cell.lower.min(best.0);
        }
        processed += 1;
        for child in split(&cell.verts) {
            heap.push(make_cell(child, &mut best));
        }
        if processed % 256 == 0 {
            best = descend(f, best);
        }
    };
    let best = descend(f, best);
    let lower = lower.min(best.0);
    Infimum {
        lower,
        upper: best.0,
        gap: best.0 - lower,
        argmin: [best.1.x, best.1.y, best.1.z],
    }
}

fn descend(f: &SphericalField, start: (f64, Vec3)) -> (f64, Vec3) {
    let (mut val, mut p) = start;
    let mut step = 1.0 / f.second_derivative_bound().max(1e-12);
    for _ in 0..100 {
        let g = f.gradient_at(&p);
        if g.norm() < 1e-15 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let trial = (p - g * step).normalize();
            let tv = f.value_at(&trial);
            if tv < val {
                val = tv;
                p = trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 2.0;
    }
    (val, p)
}

/// A conformal factor together with a positive curvature prescription.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub phi: SphericalField,
    pub k: SphericalField,
    /// Certified lower bound of `k` over S².
    pub k_inf: f64,
}

impl FieldPair {
    /// Certifies `inf k` and rejects nonpositive prescriptions.
    pub fn new(phi: SphericalField, k: SphericalField) -> Result<Self> {
        let inf = field_infimum(&k);
        if !(inf.lower > 0.0) {
            return Err(Error::NonPositivePrescription(inf.lower));
        }
        Ok(FieldPair { phi, k, k_inf: inf.lower })
    }

    pub fn round(k0: f64) -> Result<Self> {
        Self::new(SphericalField::zero(), SphericalField::constant(k0))
    }

    pub fn metric(&self) -> crate::geometry::ConformalMetric {
        crate::geometry::ConformalMetric::new(self.phi.clone())
    }

    /// Certified lower bound of the Gauss curvature numerator `1 − ½Δφ`;
    /// `K_g ≥ 0` everywhere iff this is nonnegative.
    pub fn curvature_floor(&self) -> f64 {
        let numerator = SphericalField::constant(1.0).combine(1.0, &self.phi.laplacian_field(), -0.5);
        field_infimum(&numerator).lower
    }

    /// Short stable digest of the field coefficients.
    pub fn checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (tag, f) in [("phi", &self.phi), ("k", &self.k)] {
            h.update(tag.as_bytes());
            for &(l, m, c) in f.terms() {
                h.update(format!("{l},{m},{:.17e};", c).as_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The deformation `(φ_t, k_t) = (tφ, (1−t) k_inf + t k)` joining the round
/// sphere with constant prescription to the target pair.
pub fn homotopy_fields(pair: &FieldPair, t: f64) -> Result<FieldPair> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange { value: t, range: "[0, 1]" });
    }
    if !(pair.k_inf > 0.0) {
        return Err(Error::NonPositivePrescription(pair.k_inf));
    }
    let k = pair.k.combine(t, &SphericalField::constant(pair.k_inf), 1.0 - t);
    Ok(FieldPair {
        phi: pair.phi.scaled(t),
        k,
        k_inf: pair.k_inf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn lat_long(nt: usize, nl: usize) -> Vec<(f64, f64)> {
        (0..nt)
            .flat_map(|i| (0..nl).map(move |j| ((i as f64 + 0.5) * PI / nt as f64, j as f64 * 2.0 * PI / nl as f64)))
            .collect()
    }

    #[test]
    fn low_degree_basis_is_coordinates() {
        let x = SpherePoint::new(0.3, -0.4, 0.7);
        let v = x.vec();
        assert_abs_diff_eq!(basis_function(0, 0).unwrap().value(&x), 1.0);
        assert_abs_diff_eq!(basis_function(1, 0).unwrap().value(&x), v.z, epsilon = 1e-15);
        assert_abs_diff_eq!(basis_function(1, 1).unwrap().value(&x), v.x, epsilon = 1e-15);
        assert_abs_diff_eq!(basis_function(1, -1).unwrap().value(&x), v.y, epsilon = 1e-15);
        let y20 = basis_function(2, 0).unwrap().value(&x);
        assert_abs_diff_eq!(y20, 1.5 * v.z * v.z - 0.5, epsilon = 1e-15);
        let y22 = basis_function(2, 2).unwrap().value(&x);
        assert_abs_diff_eq!(y22, 3f64.sqrt() / 2.0 * (v.x * v.x - v.y * v.y), epsilon = 1e-15);
    }

    #[test]
    fn eval_examples() {
        let c = SphericalField::constant(2.5);
        assert_eq!(c.value(&SpherePoint::new(0.1, 0.2, 0.3)), 2.5);
        let z = basis_function(1, 0).unwrap();
        assert_eq!(z.value(&SpherePoint::north()), 1.0);
        assert_eq!(z.value(&SpherePoint::new(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn schmidt_basis_bounded_by_one() {
        let pts = lat_long(40, 80);
        for l in 0..=6 {
            for m in -(l as i64)..=(l as i64) {
                let f = basis_function(l, m).unwrap();
                let max = pts
                    .iter()
                    .map(|&(t, p)| f.value(&SpherePoint::from_spherical(t, p)).abs())
                    .fold(0.0, f64::max);
                assert!(max <= 1.0 + 1e-12, "({l},{m}) max {max}");
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let c = SphericalField::constant(3.0);
        assert_eq!(c.gradient(&SpherePoint::new(0.3, 0.1, 0.2)).v, Vec3::zeros());
        let z = basis_function(1, 0).unwrap();
        let g = z.gradient(&SpherePoint::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!((g.v - Vec3::z()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_matches_great_circle_differences() {
        let f = SphericalField::new(vec![(1, 1, 0.3), (2, -1, 0.5), (3, 2, -0.2), (4, 0, 0.1)]).unwrap();
        let x = SpherePoint::new(0.2, 0.6, -0.5);
        let g = f.gradient(&x);
        assert!(g.v.dot(x.vec()).abs() < 1e-15);
        let h = 1e-4;
        for w in [Vec3::x(), Vec3::y(), Vec3::new(0.3, -0.2, 1.0)] {
            let u = crate::geometry::project_tangent(&x, &w).v.normalize();
            let at = |s: f64| f.value(&SpherePoint::from_vec(x.vec() * s.cos() + u * s.sin()));
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, g.v.dot(&u), epsilon = 1e-6);
        }
    }

    #[test]
    fn hessian_jet_matches_gradient_differences() {
        let f = SphericalField::new(vec![(1, 0, 0.4), (2, 2, 0.5), (3, -3, 0.3)]).unwrap();
        let p = Vec3::new(0.4, -0.3, 0.5).normalize();
        let jet = f.jet_at(&p);
        let u = (Vec3::new(1.0, 2.0, 0.0) - p * p.dot(&Vec3::new(1.0, 2.0, 0.0))).normalize();
        let h = 1e-6;
        let at = |s: f64| f.gradient_at(&(p + u * s).normalize());
        let fd = (at(h) - at(-h)) / (2.0 * h);
        assert_abs_diff_eq!((fd - jet.dgrad * u).norm(), 0.0, epsilon = 1e-7);
    }

    fn fd_laplacian(f: &SphericalField, th: f64, l: f64, h: f64) -> f64 {
        let v = |a: f64, b: f64| f.value(&SpherePoint::from_spherical(a, b));
        let d_tt = (v(th + h, l) - 2.0 * v(th, l) + v(th - h, l)) / (h * h);
        let d_t = (v(th + h, l) - v(th - h, l)) / (2.0 * h);
        let d_ll = (v(th, l + h) - 2.0 * v(th, l) + v(th, l - h)) / (h * h);
        d_tt + th.cos() / th.sin() * d_t + d_ll / th.sin().powi(2)
    }

    #[test]
    fn laplacian_examples() {
        let c = SphericalField::constant(1.0);
        assert_eq!(c.laplacian(&SpherePoint::new(0.5, 0.5, 0.5)), 0.0);
        let z = basis_function(1, 0).unwrap();
        for (th, l) in [(0.3, 0.1), (1.5, 2.0), (2.8, -1.0)] {
            let x = SpherePoint::from_spherical(th, l);
            assert_abs_diff_eq!(z.laplacian(&x), -2.0 * th.cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(fd_laplacian(&z, th, l, 1e-4), -2.0 * th.cos(), epsilon = 1e-6);
        }
        let f = SphericalField::new(vec![(2, 1, 0.7)]).unwrap();
        let g = SphericalField::new(vec![(3, -2, 0.4), (1, 1, 1.0)]).unwrap();
        let sum = f.combine(2.0, &g, -3.0);
        let x = SpherePoint::new(0.1, 0.9, 0.3);
        assert_abs_diff_eq!(sum.laplacian(&x), 2.0 * f.laplacian(&x) - 3.0 * g.laplacian(&x), epsilon = 1e-13);
    }

    #[test]
    fn every_basis_term_matches_fd_laplacian_on_grid() {
        // 100 × 200 lat–long grid, 5-point stencil oracle.
        let h = 3e-4;
        let pts = lat_long(100, 200);
        for l in 0..=4 {
            for m in -(l as i64)..=(l as i64) {
                let f = basis_function(l, m).unwrap();
                let worst = pts
                    .iter()
                    .step_by(7)
                    .filter(|(th, _)| th.sin() > 0.05)
                    .map(|&(th, lam)| (fd_laplacian(&f, th, lam, h) - f.laplacian(&SpherePoint::from_spherical(th, lam))).abs())
                    .fold(0.0, f64::max);
                assert!(worst < 1e-5, "({l},{m}) laplacian error {worst}");
            }
        }
    }

    #[test]
    fn infimum_examples() {
        let c = field_infimum(&SphericalField::constant(0.8));
        assert_eq!(c.lower, 0.8);
        assert_eq!(c.gap, 0.0);
        let k = SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3)]).unwrap();
        let inf = field_infimum(&k);
        assert!(inf.lower <= 0.7 + 1e-15);
        assert!(0.7 - inf.lower <= 1e-6);
        assert!(inf.gap <= 1e-6);
        assert_abs_diff_eq!(inf.argmin[0], -1.0, epsilon = 1e-3);
        let k2 = SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3), (1, -1, 0.1)]).unwrap();
        let inf2 = field_infimum(&k2);
        let exact = 1.0 - (0.09f64 + 0.01).sqrt();
        assert!(inf2.lower <= exact + 1e-15 && exact - inf2.lower <= 1e-6);
        assert_abs_diff_eq!(exact, 0.68377, epsilon = 1e-5);
    }

    #[test]
    fn infimum_is_a_lower_bound_on_dense_samples() {
        let f = SphericalField::new(vec![(0, 0, 1.0), (2, 1, 0.3), (3, -2, 0.2), (4, 4, 0.1)]).unwrap();
        let inf = field_infimum(&f);
        let sampled = lat_long(200, 400)
            .iter()
            .map(|&(t, p)| f.value(&SpherePoint::from_spherical(t, p)))
            .fold(f64::INFINITY, f64::min);
        assert!(inf.lower <= sampled);
        assert!(sampled - inf.lower < 1e-3);
        assert!(inf.gap < 1e-6);
    }

    #[test]
    fn homotopy_examples() {
        let phi = SphericalField::new(vec![(1, 0, 0.2)]).unwrap();
        let k = SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3)]).unwrap();
        let pair = FieldPair::new(phi, k).unwrap();
        let x = SpherePoint::new(0.3, -0.2, 0.6);
        let h0 = homotopy_fields(&pair, 0.0).unwrap();
        assert!(h0.phi.is_zero());
        assert_abs_diff_eq!(h0.k.value(&x), pair.k_inf, epsilon = 1e-15);
        let h1 = homotopy_fields(&pair, 1.0).unwrap();
        assert_abs_diff_eq!(h1.k.value(&x), pair.k.value(&x), epsilon = 1e-15);
        assert_eq!(h1.phi, pair.phi);
        let half = homotopy_fields(&pair, 0.5).unwrap();
        let expected = 0.5 * pair.k_inf + 0.5 * (1.0 + 0.3 * x.vec().x);
        assert_abs_diff_eq!(half.k.value(&x), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 0.85 + 0.15 * x.vec().x, epsilon = 1e-6);
        assert!(homotopy_fields(&pair, 1.5).is_err());
        assert!(homotopy_fields(&pair, -0.1).is_err());
    }

    #[test]
    fn homotopy_keeps_prescription_positive() {
        let k = SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3), (2, 0, 0.2)]).unwrap();
        let pair = FieldPair::new(SphericalField::zero(), k).unwrap();
        for i in 0..=10 {
            let kt = homotopy_fields(&pair, i as f64 / 10.0).unwrap().k;
            assert!(field_infimum(&kt).lower >= pair.k_inf - 1e-9);
        }
    }

    #[test]
    fn nonpositive_prescription_rejected() {
        assert!(matches!(FieldPair::round(-1.0), Err(Error::NonPositivePrescription(_))));
        let k = SphericalField::new(vec![(0, 0, 0.2), (1, 0, 0.5)]).unwrap();
        assert!(FieldPair::new(SphericalField::zero(), k).is_err());
    }

    #[test]
    fn invalid_terms_rejected() {
        assert!(SphericalField::new(vec![(1, 2, 1.0)]).is_err());
        assert!(SphericalField::new(vec![(1, 0, f64::NAN)]).is_err());
        assert!(SphericalField::new(vec![(MAX_DEGREE + 1, 0, 1.0)]).is_err());
    }

    #[test]
    fn serde_uses_term_lists() {
        let f = SphericalField::new(vec![(1, 0, 0.2), (0, 0, 1.0)]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, "[[0,0,1.0],[1,0,0.2]]");
        let back: SphericalField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
