use super::{newton::newton_solve, OrbitSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::fields::FieldPair;
use crate::geometry::{SpherePoint, TangentVector};
use crate::loops::DiscreteLoop;
use crate::Vec3;
use nalgebra::{DMatrix, DVector};

/// Sampled solution of the magnetic equation `D_τ γ' = k(γ) J γ'`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    /// `max |(|γ'|_g − |γ'(0)|_g)| / |γ'(0)|_g` over the samples.
    pub speed_drift: f64,
}

impl Trajectory {
    pub fn end(&self) -> (Vec3, Vec3) {
        (*self.points.last().expect("nonempty"), *self.velocities.last().expect("nonempty"))
    }
}

/// Ambient right-hand side: `x' = v`,
/// `v' = −|v|²x + k x×v − (G·v)v + ½|v|²G`.
fn rhs(pair: &FieldPair, x: &Vec3, v: &Vec3) -> (Vec3, Vec3) {
    let g = pair.phi.gradient_at(x);
    let k = pair.k.value_at(x);
    let v2 = v.norm_squared();
    (*v, -x * v2 + x.cross(v) * k - v * g.dot(v) + g * (0.5 * v2))
}

fn rk4_step(pair: &FieldPair, x: &Vec3, v: &Vec3, h: f64) -> (Vec3, Vec3) {
    let (k1x, k1v) = rhs(pair, x, v);
    let (k2x, k2v) = rhs(pair, &(x + k1x * (0.5 * h)), &(v + k1v * (0.5 * h)));
    let (k3x, k3v) = rhs(pair, &(x + k2x * (0.5 * h)), &(v + k2v * (0.5 * h)));
    let (k4x, k4v) = rhs(pair, &(x + k3x * h), &(v + k3v * h));
    let xn = (x + (k1x + 2.0 * k2x + 2.0 * k3x + k4x) * (h / 6.0)).normalize();
    let vn = v + (k1v + 2.0 * k2v + 2.0 * k3v + k4v) * (h / 6.0);
    (xn, vn - xn * xn.dot(&vn))
}

fn g_speed(pair: &FieldPair, x: &Vec3, v: &Vec3) -> f64 {
    (0.5 * pair.phi.value_at(x)).exp() * v.norm()
}

fn integrate_steps(x0: &Vec3, v0: &Vec3, t_end: f64, steps: usize, pair: &FieldPair) -> Trajectory {
    let h = t_end / steps as f64;
    let s0 = g_speed(pair, x0, v0);
    let mut tr = Trajectory {
        times: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
        velocities: Vec::with_capacity(steps + 1),
        speed_drift: 0.0,
    };
    let (mut x, mut v) = (*x0, *v0);
    tr.times.push(0.0);
    tr.points.push(x);
    tr.velocities.push(v);
    for i in 1..=steps {
        (x, v) = rk4_step(pair, &x, &v, h);
        tr.speed_drift = tr.speed_drift.max((g_speed(pair, &x, &v) - s0).abs() / s0);
        tr.times.push(i as f64 * h);
        tr.points.push(x);
        tr.velocities.push(v);
    }
    tr
}

/// Fixed-step RK4 over `[0, t_end]` with steps no longer than `dt`,
/// projecting back to the sphere and its tangent planes after every step.
pub fn integrate_flow(x0: &SpherePoint, v0: &TangentVector, t_end: f64, pair: &FieldPair, dt: f64) -> Result<Trajectory> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(Error::OutOfRange { value: t_end.min(dt), range: "(0, inf)" });
    }
    let speed = g_speed(pair, x0.vec(), &v0.v);
    if !(speed > 0.0) {
        return Err(Error::DegenerateCurve(speed));
    }
    let steps = (t_end / dt).ceil() as usize;
    Ok(integrate_steps(x0.vec(), &v0.v, t_end, steps, pair))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Largest integration step.
    pub dt: f64,
    /// Target for the return-map mismatch.
    pub tol: f64,
    pub max_iters: usize,
    /// Finite-difference step for the return-map derivatives.
    pub fd_step: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        ShootingOptions {
            dt: 1e-3,
            tol: 1e-10,
            max_iters: 30,
            fd_step: 1e-6,
        }
    }
}

/// A periodic orbit found by shooting, polished by Newton on loops.
#[derive(Debug, Clone)]
pub struct Shot {
    pub solution: OrbitSolution,
    /// Return time of the unit-speed flow.
    pub period: f64,
    /// Newton iterations spent on the return map.
    pub iterations: usize,
}

struct Section {
    x0: Vec3,
    across: Vec3,
    along: Vec3,
}

impl Section {
    /// Initial state for section coordinate `s` and heading `alpha`, at unit
    /// `g`-speed.
    fn state(&self, pair: &FieldPair, s: f64, alpha: f64) -> (Vec3, Vec3) {
        let x = (self.x0 + self.across * s).normalize();
        let t1 = (self.along - x * x.dot(&self.along)).normalize();
        let t2 = x.cross(&t1);
        let v = (t1 * alpha.cos() + t2 * alpha.sin()) * (-0.5 * pair.phi.value_at(&x)).exp();
        (x, v)
    }
}

/// Newton on the return map of the unit-speed magnetic flow, whose periodic
/// orbits are the solutions of the prescribed-curvature equation. Unknowns
/// are the position along a transverse great circle through `x0`, the
/// heading, and the period; the orbit is then resampled on `opts.n` points
/// and polished with [`newton_solve`].
pub fn shoot_periodic(
    x0: &SpherePoint,
    v0: &TangentVector,
    t_guess: f64,
    pair: &FieldPair,
    shooting: &ShootingOptions,
    opts: &SolverOptions,
) -> Result<Shot> {
    if !(t_guess > 0.0) {
        return Err(Error::OutOfRange { value: t_guess, range: "(0, inf)" });
    }
    let along = v0.v.normalize();
    if !along.iter().all(|c| c.is_finite()) {
        return Err(Error::DegenerateCurve(v0.v.norm()));
    }
    let sec = Section {
        x0: *x0.vec(),
        across: x0.vec().cross(&along),
        along,
    };
    let steps = (t_guess / shooting.dt).ceil() as usize;
    let mismatch = |u: &[f64; 3]| -> DVector<f64> {
        let (x, v) = sec.state(pair, u[0], u[1]);
        let (xe, ve) = integrate_steps(&x, &v, u[2], steps, pair).end();
        let d = [xe - x, ve - v];
        DVector::from_iterator(6, d.iter().flat_map(|w| w.iter().copied()))
    };
    let mut u = [0.0, 0.0, t_guess];
    let mut r = mismatch(&u);
    let mut iterations = 0;
    while r.norm() > shooting.tol {
        if iterations == shooting.max_iters {
            return Err(Error::NonConvergence {
                iters: iterations,
                residual: r.norm(),
            });
        }
        let mut jac = DMatrix::zeros(6, 3);
        for c in 0..3 {
            let h = shooting.fd_step * if c == 2 { u[2].max(1.0) } else { 1.0 };
            let (mut up, mut um) = (u, u);
            up[c] += h;
            um[c] -= h;
            jac.set_column(c, &((mismatch(&up) - mismatch(&um)) / (2.0 * h)));
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let delta = svd
            .solve(&(-&r), 1e-10 * smax)
            .map_err(|_| Error::LinearSolve { condition: f64::INFINITY })?;
        let mut lambda = 1.0;
        loop {
            let cand = [u[0] + lambda * delta[0], u[1] + lambda * delta[1], u[2] + lambda * delta[2]];
            let rc = mismatch(&cand);
            if rc.norm() < r.norm() || lambda < 1e-3 {
                u = cand;
                r = rc;
                break;
            }
            lambda *= 0.5;
        }
        iterations += 1;
        if !(u[2] > 0.0) {
            return Err(Error::NonConvergence { iters: iterations, residual: r.norm() });
        }
    }
    let (x, v) = sec.state(pair, u[0], u[1]);
    let per_sample = steps.div_ceil(opts.n).max(1);
    let tr = integrate_steps(&x, &v, u[2], per_sample * opts.n, pair);
    let (_, ve) = tr.end();
    let transversality = ve.normalize().dot(&sec.along).abs();
    if transversality < 1e-3 {
        return Err(Error::SectionDegenerate(transversality));
    }
    let points = tr.points.iter().step_by(per_sample).take(opts.n).copied().collect();
    let guess = DiscreteLoop::new(points)?;
    let solution = newton_solve(&guess, pair, opts)?;
    Ok(Shot {
        solution,
        period: u[2],
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SphericalField;
    use std::f64::consts::{FRAC_PI_4, TAU};

    fn start(theta: f64) -> (SpherePoint, TangentVector) {
        // on the circle of polar angle θ about the north pole, heading east
        let x = SpherePoint::from_spherical(theta, 0.0);
        let v = TangentVector::new(x, Vec3::new(0.0, 1.0, 0.0));
        (x, v)
    }

    #[test]
    fn unit_prescription_closes_on_latitude_circle() {
        let p = FieldPair::round(1.0).unwrap();
        let (x, v) = start(FRAC_PI_4);
        let period = TAU / 2f64.sqrt();
        let tr = integrate_flow(&x, &v, period, &p, 1e-3).unwrap();
        let (xe, _) = tr.end();
        assert!((xe - x.vec()).norm() <= 1e-8);
        assert!(tr.speed_drift <= 1e-9);
    }

    #[test]
    fn geodesic_flow() {
        let geo = FieldPair {
            phi: SphericalField::zero(),
            k: SphericalField::zero(),
            k_inf: 0.0,
        };
        let (x, v) = start(1.0);
        let tr = integrate_flow(&x, &v, TAU, &geo, 1e-3).unwrap();
        assert!((tr.end().0 - x.vec()).norm() <= 1e-8);
        assert!(tr.speed_drift <= 1e-9);
    }

    #[test]
    fn speed_is_conserved_for_smooth_pairs() {
        let p = FieldPair::new(
            SphericalField::new(vec![(1, 0, 0.2), (2, 1, 0.1)]).unwrap(),
            SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3)]).unwrap(),
        )
        .unwrap();
        let (x, v) = start(0.9);
        let tr = integrate_flow(&x, &v, 5.0, &p, 1e-3).unwrap();
        assert!(tr.speed_drift <= 1e-9, "{}", tr.speed_drift);
    }

    #[test]
    fn shooting_recovers_circle_period() {
        let p = FieldPair::round(1.0).unwrap();
        let (x, v) = start(FRAC_PI_4 + 0.02);
        let shot = shoot_periodic(&x, &v, 4.3, &p, &ShootingOptions::default(), &SolverOptions::default()).unwrap();
        let exact = TAU / 2f64.sqrt();
        assert!((shot.period - exact).abs() <= 1e-8 * exact);
        assert!((shot.solution.length() - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn exact_data_needs_no_correction() {
        let p = FieldPair::round(1.0).unwrap();
        let (x, v) = start(FRAC_PI_4);
        let period = TAU / 2f64.sqrt();
        let shot = shoot_periodic(&x, &v, period, &p, &ShootingOptions { tol: 1e-9, ..Default::default() }, &SolverOptions::default()).unwrap();
        assert_eq!(shot.iterations, 0);
    }
}
