use super::{OrbitSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::fields::FieldPair;
use crate::loops::DiscreteLoop;
use crate::operators::{frame_system, frame_to_field, residual_rms, retract, FrameCoords, LoopField, REGULARITY_RATIO};
use nalgebra::{DMatrix, DVector};

/// Damped Gauss–Newton on the prescribed-curvature residual, gauge-fixed by
/// the phase condition `∫⟨W, γ'⟩_g = 0` and reparameterized to uniform
/// speed after every step.
pub fn newton_solve(guess: &DiscreteLoop, pair: &FieldPair, opts: &SolverOptions) -> Result<OrbitSolution> {
    let (curve, residual, iters) = newton_core(guess, pair, opts)?;
    OrbitSolution::from_parts(curve, pair.clone(), residual, iters)
}

fn prepare(lp: &DiscreteLoop, pair: &FieldPair, n: usize) -> Result<DiscreteLoop> {
    let lp = if lp.len() == n { lp.clone() } else { lp.resample(n)? };
    let speeds = lp.speeds(&pair.phi);
    let mean = speeds.iter().sum::<f64>() / n as f64;
    let min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min >= REGULARITY_RATIO * mean) {
        return Err(Error::Collapse(min / mean));
    }
    lp.reparametrize_uniform(&pair.phi)
}

/// Singular value decomposition of the bordered Newton matrix, kept so the
/// step can be recomputed with different damping.
struct Decomposition {
    u_t_rhs: DVector<f64>,
    sigma: DVector<f64>,
    v: DMatrix<f64>,
    cutoff: f64,
}

impl Decomposition {
    fn new(m: DMatrix<f64>, rhs: &DVector<f64>, cutoff: f64) -> Result<Self> {
        let svd = m.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) || !smax.is_finite() {
            return Err(Error::LinearSolve { condition: f64::INFINITY });
        }
        let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
            return Err(Error::LinearSolve { condition: f64::INFINITY });
        };
        Ok(Decomposition {
            u_t_rhs: u.transpose() * rhs,
            sigma: svd.singular_values,
            v: v_t.transpose(),
            cutoff: cutoff * smax,
        })
    }

    fn smax(&self) -> f64 {
        self.sigma.max()
    }

    /// Minimizer of `|m x − rhs|² + μ|x|²`, discarding singular values
    /// below the cutoff. `μ = 0` is the truncated least-squares solution.
    fn step(&self, mu: f64) -> DVector<f64> {
        let filtered = DVector::from_iterator(
            self.sigma.len(),
            self.sigma.iter().zip(self.u_t_rhs.iter()).map(|(&s, &b)| if s > self.cutoff { s * b / (s * s + mu) } else { 0.0 }),
        );
        &self.v * filtered
    }
}

pub(crate) fn newton_core(guess: &DiscreteLoop, pair: &FieldPair, opts: &SolverOptions) -> Result<(DiscreteLoop, f64, usize)> {
    let n = opts.n;
    let mut lp = prepare(guess, pair, n)?;
    for iter in 0..=opts.max_iters {
        let sys = frame_system(&lp, pair)?;
        let mean = sys.frame.speed.iter().sum::<f64>() / n as f64;
        let min = sys.frame.speed.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < REGULARITY_RATIO * mean {
            return Err(Error::Collapse(min / mean));
        }
        log::trace!("newton iter {iter}: residual {:.3e}", sys.norm);
        if sys.norm <= opts.newton_tol {
            return Ok((lp, sys.norm, iter));
        }
        if iter == opts.max_iters {
            return Err(Error::NonConvergence { iters: iter, residual: sys.norm });
        }
        // phase row, scaled like the largest Jacobian row
        let row_scale = (0..2 * n).map(|r| sys.jacobian.row(r).norm()).fold(0.0, f64::max);
        let mut phase = DVector::zeros(2 * n);
        for i in 0..n {
            phase[2 * i] = sys.frame.speed[i];
        }
        phase *= row_scale / phase.norm();
        let mut m = sys.jacobian.clone().insert_row(2 * n, 0.0);
        m.row_mut(2 * n).copy_from(&phase.transpose());
        let mut rhs = DVector::zeros(2 * n + 1);
        for (k, r) in sys.residual.iter().enumerate() {
            rhs[k] = -r;
        }
        let dec = Decomposition::new(m, &rhs, opts.svd_cutoff)?;
        let field = |delta: DVector<f64>| {
            let w = frame_to_field(&sys.frame, &FrameCoords::from_vector(delta.as_slice()));
            let big = w.sup_norm();
            if big > opts.trust_radius {
                w.scaled(opts.trust_radius / big)
            } else {
                w
            }
        };
        // the sup norm is not smooth, so sufficient decrease is judged on
        // the RMS residual that the Gauss–Newton step actually reduces
        let merit = residual_rms(&lp, pair)?;
        let attempt = |w: &LoopField, lambda: f64| -> Option<(f64, DiscreteLoop)> {
            let c = retract(&lp, &w.scaled(lambda)).and_then(|c| prepare(&c, pair, n)).ok()?;
            let r = residual_rms(&c, pair).ok()?;
            (r < merit * (1.0 - 1e-4 * lambda)).then_some((r, c))
        };
        let better = |a: Option<(f64, DiscreteLoop)>, b: Option<(f64, DiscreteLoop)>| match (a, b) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        };
        // near a nearly degenerate solution family the Gauss–Newton step can
        // be swamped by near-kernel directions, which Levenberg–Marquardt
        // damping suppresses; short backtracking and the damped steps
        // compete on merit
        let gn = field(dec.step(0.0));
        let mut best = None;
        let mut lambda = 1.0;
        while lambda > 1e-2 {
            best = better(best, attempt(&gn, lambda));
            lambda *= opts.damping;
        }
        let mut mu = dec.smax().powi(2) * 1e-12;
        while mu <= dec.smax().powi(2) {
            best = better(best, attempt(&field(dec.step(mu)), 1.0));
            mu *= 100.0;
        }
        while best.is_none() && lambda > 1e-6 {
            best = attempt(&gn, lambda);
            lambda *= opts.damping;
        }
        let accepted = best.map(|(_, c)| c);
        match accepted {
            Some(c) => lp = c,
            None => {
                return Err(Error::NonConvergence {
                    iters: iter + 1,
                    residual: sys.norm,
                })
            }
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::SphericalField;
    use crate::geometry::SpherePoint;
    use crate::loops::shift_distance;
    use crate::Vec3;
    use std::f64::consts::{FRAC_PI_4, TAU};

    fn perturbed_circle(n: usize, amp: f64) -> DiscreteLoop {
        let c = DiscreteLoop::circle(n, &SpherePoint::north(), FRAC_PI_4).unwrap();
        let pts = c
            .points()
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let t = TAU * j as f64 / n as f64;
                let normal = (Vec3::z() - p * p.z).normalize();
                p + normal * amp * ((2.0 * t).cos() + 0.5 * (3.0 * t).sin())
            })
            .collect();
        DiscreteLoop::new(pts).unwrap()
    }

    #[test]
    fn exact_circle_is_a_fixed_point() {
        let c = DiscreteLoop::circle(128, &SpherePoint::north(), FRAC_PI_4).unwrap();
        let sol = newton_solve(&c, &FieldPair::round(1.0).unwrap(), &SolverOptions::default()).unwrap();
        assert!(sol.newton_iters <= 1);
        assert!(shift_distance(&sol.curve, &c).distance < 1e-10);
    }

    #[test]
    fn perturbed_circle_converges() {
        let p = FieldPair::round(1.0).unwrap();
        let sol = newton_solve(&perturbed_circle(128, 1e-2), &p, &SolverOptions::default()).unwrap();
        assert!(sol.residual_norm <= 1e-10);
        assert!((sol.length() - TAU / 2f64.sqrt()).abs() < 1e-8 * TAU);
        assert!(sol.report.passed, "{:?}", sol.report);
    }

    #[test]
    fn near_geodesic_converges_to_great_circle() {
        let geo = FieldPair {
            phi: SphericalField::zero(),
            k: SphericalField::zero(),
            k_inf: 0.0,
        };
        let guess = DiscreteLoop::from_fn(64, |t| {
            let s = TAU * t;
            Vec3::new(s.cos(), s.sin(), 0.05 * (2.0 * s).sin())
        })
        .unwrap();
        let (lp, r, _) = newton_core(&guess, &geo, &SolverOptions { n: 64, ..Default::default() }).unwrap();
        assert!(r <= 1e-10);
        assert!((lp.length(&geo.phi) - TAU).abs() < 1e-9);
    }

    #[test]
    fn resolving_a_solution_does_not_drift() {
        let p = FieldPair::round(1.0).unwrap();
        let opts = SolverOptions::default();
        let first = newton_solve(&perturbed_circle(128, 1e-2), &p, &opts).unwrap();
        let again = newton_solve(&first.curve, &p, &opts).unwrap();
        let d = first
            .curve
            .points()
            .iter()
            .zip(again.curve.points())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn collapse_is_reported() {
        let pts: Vec<Vec3> = (0..32).map(|j| Vec3::new(1.0, 1e-9 * j as f64, 0.0)).collect();
        let lp = DiscreteLoop::new(pts).unwrap();
        let r = newton_solve(&lp, &FieldPair::round(1.0).unwrap(), &SolverOptions { n: 32, ..Default::default() });
        assert!(r.is_err());
    }
}
