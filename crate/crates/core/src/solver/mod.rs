//! Finding closed solutions: Newton on loops, flow shooting, homotopy
//! continuation from the round sphere, and the two-orbit search.

mod continuation;
mod flow;
mod newton;
mod reduced;

pub use continuation::{continue_path, ContinuationOptions, ContinuationPath, PathStatus, StepRecord};
pub use flow::{integrate_flow, shoot_periodic, ShootingOptions, Trajectory};
pub use newton::newton_solve;
pub use reduced::{lock_on, reduced_function, LockOn};

use crate::error::{Error, Result};
use crate::fields::{homotopy_fields, FieldPair};
use crate::geometry::SpherePoint;
use crate::loops::DiscreteLoop;
use crate::operators::{g_sup_norm, residual_magnetic};
use crate::verify::{distinct_orbits, verify_loop, VerificationReport};
use crate::Vec3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Target for the scale-free residual `sup |F|_g / mean(|γ'|_g)²`.
    pub newton_tol: f64,
    pub max_iters: usize,
    /// Line-search backtracking factor.
    pub damping: f64,
    /// Grid size.
    pub n: usize,
    /// Relative singular-value cutoff of the least-squares step.
    pub svd_cutoff: f64,
    /// Largest pointwise update (radians) per Newton step.
    pub trust_radius: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-10,
            max_iters: 50,
            damping: 0.5,
            n: 128,
            svd_cutoff: 1e-8,
            trust_radius: 0.5,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(self.newton_tol > 0.0) {
            errs.push(format!("newton_tol must be positive, got {}", self.newton_tol));
        }
        if self.n < 16 || self.n % 2 != 0 {
            errs.push(format!("n must be even and at least 16, got {}", self.n));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            errs.push(format!("damping must lie in (0, 1), got {}", self.damping));
        }
        if self.max_iters == 0 {
            errs.push("max_iters must be positive".to_string());
        }
        if !(self.svd_cutoff > 0.0 && self.svd_cutoff < 1.0) {
            errs.push(format!("svd_cutoff must lie in (0, 1), got {}", self.svd_cutoff));
        }
        if !(self.trust_radius > 0.0) {
            errs.push(format!("trust_radius must be positive, got {}", self.trust_radius));
        }
        errs
    }
}

/// A converged loop with its certificate.
#[derive(Debug, Clone)]
pub struct OrbitSolution {
    /// The loop, parameterized on `[0, 1)` with constant `g`-speed.
    pub curve: DiscreteLoop,
    /// Fields of the equation the loop solves.
    pub pair: FieldPair,
    /// Scale-free residual of the prescribed-curvature equation, or the
    /// `g`-sup-norm of the magnetic residual for rescaled solutions.
    pub residual_norm: f64,
    /// Constant `g`-speed in physical time.
    pub speed: f64,
    /// Physical period: 1 for prescribed-curvature solutions, `L/c` on `E_c`.
    pub period: f64,
    /// Energy level for magnetic solutions.
    pub energy: Option<f64>,
    pub report: VerificationReport,
    pub newton_iters: usize,
}

impl OrbitSolution {
    /// Certifies `curve` as a solution of the prescribed-curvature equation.
    pub fn from_parts(curve: DiscreteLoop, pair: FieldPair, residual_norm: f64, newton_iters: usize) -> Result<Self> {
        let report = verify_loop(&curve, &pair);
        Ok(OrbitSolution {
            speed: report.length,
            period: 1.0,
            energy: None,
            curve,
            pair,
            residual_norm,
            report,
            newton_iters,
        })
    }

    /// Fields of the prescribed-curvature equation the geometry solves:
    /// `k/c` on the energy level `c`, `k` otherwise.
    pub fn equation_pair(&self) -> FieldPair {
        match self.energy {
            None => self.pair.clone(),
            Some(c) => FieldPair {
                phi: self.pair.phi.clone(),
                k: self.pair.k.scaled(1.0 / c),
                k_inf: self.pair.k_inf / c,
            },
        }
    }

    pub fn length(&self) -> f64 {
        self.report.length
    }
}

/// Circles of radius `arccot(k_inf)` solving the round-sphere problem with
/// constant prescription `k_inf`, centred at the cube vertices for
/// `count = 8` and at Fibonacci points otherwise.
pub fn seed_circles(pair: &FieldPair, count: usize, n: usize) -> Result<Vec<DiscreteLoop>> {
    let radius = (1.0 / pair.k_inf).atan();
    seed_centers(count)
        .into_iter()
        .map(|c| DiscreteLoop::circle(n, &c, radius))
        .collect()
}

pub fn seed_centers(count: usize) -> Vec<SpherePoint> {
    if count == 8 {
        let mut out = Vec::with_capacity(8);
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    out.push(SpherePoint::new(sx, sy, sz));
                }
            }
        }
        return out;
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            SpherePoint::from_vec(Vec3::new(r * a.cos(), r * a.sin(), z))
        })
        .collect()
}

/// Turns a solution for prescription `k/c` into a magnetic geodesic with
/// field `k` on the energy level `c`: same curve, period `L/c`.
pub fn rescale_to_energy(sol: &OrbitSolution, c: f64) -> Result<OrbitSolution> {
    if !(c > 0.0) {
        return Err(Error::OutOfRange { value: c, range: "(0, inf)" });
    }
    let base = sol.equation_pair();
    let pair = FieldPair {
        phi: base.phi.clone(),
        k: base.k.scaled(c),
        k_inf: base.k_inf * c,
    };
    let period = sol.length() / c;
    let res = residual_magnetic(&sol.curve, &pair, period)?;
    Ok(OrbitSolution {
        curve: sol.curve.clone(),
        residual_norm: g_sup_norm(&sol.curve, &pair, &res),
        speed: c,
        period,
        energy: Some(c),
        report: sol.report.clone(),
        newton_iters: sol.newton_iters,
        pair,
    })
}

/// Outcome of the multi-seed search, with per-path diagnostics.
#[derive(Debug, Clone)]
pub struct OrbitSearch {
    pub orbits: Vec<OrbitSolution>,
    pub paths: Vec<std::result::Result<ContinuationPath, String>>,
}

impl OrbitSearch {
    pub fn statuses(&self) -> Vec<String> {
        self.paths
            .iter()
            .enumerate()
            .map(|(i, p)| match p {
                Ok(path) => format!("seed {i}: {}", path.status),
                Err(e) => format!("seed {i}: error: {e}"),
            })
            .collect()
    }
}

/// Continues every seed circle to `t = 1` and keeps the distinct endpoints
/// that pass verification with an admissible Alexandrov class.
pub fn search_orbits(pair: &FieldPair, opts: &SolverOptions, copts: &ContinuationOptions, seeds: usize) -> Result<OrbitSearch> {
    if !(pair.k_inf > 0.0) {
        return Err(Error::NonPositivePrescription(pair.k_inf));
    }
    if pair.curvature_floor() < 0.0 {
        log::warn!("Gauss curvature is not certified nonnegative; the existence guarantee does not apply");
    }
    let start = homotopy_fields(pair, copts.t_start)?;
    let loops = if copts.t_start == 0.0 {
        let radius = (1.0 / start.k_inf).atan();
        seed_centers(seeds)
            .iter()
            .enumerate()
            .map(|(i, c)| {
                // alternate so both the minimum and the maximum get a seed
                let mode = match (copts.lock_on, i % 2) {
                    (false, _) => LockOn::None,
                    (true, 0) => LockOn::Descend,
                    (true, _) => LockOn::Ascend,
                };
                DiscreteLoop::circle(opts.n, &lock_on(pair, c, mode)?, radius)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        return Err(Error::OutOfRange {
            value: copts.t_start,
            range: "{0} for seeded searches",
        });
    };
    let paths: Vec<_> = loops
        .par_iter()
        .map(|s| continue_path(pair, s, opts, copts).map_err(|e| e.to_string()))
        .collect();
    let mut ends = Vec::new();
    for p in paths.iter().flatten() {
        if p.status == PathStatus::Reached {
            if let Some((_, sol)) = p.samples.last() {
                if sol.report.passed && sol.report.alexandrov.is_admissible() {
                    ends.push(sol.clone());
                }
            }
        }
    }
    Ok(OrbitSearch {
        orbits: distinct_orbits(ends),
        paths,
    })
}

/// At least two distinct certified solutions for `pair`, or a search
/// failure carrying the per-seed statuses.
pub fn find_two_orbits(pair: &FieldPair, opts: &SolverOptions, copts: &ContinuationOptions) -> Result<Vec<OrbitSolution>> {
    let search = search_orbits(pair, opts, copts, 8)?;
    if search.orbits.len() < 2 {
        return Err(Error::SearchFailure {
            found: search.orbits.len(),
            statuses: search.statuses(),
        });
    }
    Ok(search.orbits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::residual_norm;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    #[test]
    fn seed_lengths() {
        for (k, len) in [(1.0, 4.442883), (2.0, 2.809926)] {
            let p = FieldPair::round(k).unwrap();
            let seeds = seed_circles(&p, 8, 128).unwrap();
            assert_eq!(seeds.len(), 8);
            for s in &seeds {
                assert_relative_eq!(s.length(&p.phi), TAU / (1.0 + k * k).sqrt(), max_relative = 1e-12);
                assert!((s.length(&p.phi) - len).abs() < 1e-6);
                assert!(residual_norm(s, &p).unwrap() < 1e-10);
            }
        }
        let tiny = FieldPair::round(1e-6).unwrap();
        let s = &seed_circles(&tiny, 4, 64).unwrap()[0];
        assert!((s.length(&tiny.phi) - TAU).abs() < 1e-5);
    }

    #[test]
    fn rescaling() {
        for c in [0.5, 1.0, 2.0] {
            let k = FieldPair::round(1.0 / c).unwrap();
            let lp = seed_circles(&k, 1, 128).unwrap().remove(0);
            let sol = OrbitSolution::from_parts(lp, k, 0.0, 0).unwrap();
            let mag = rescale_to_energy(&sol, c).unwrap();
            assert!(mag.residual_norm <= 1e-8, "{}", mag.residual_norm);
            assert_eq!(mag.speed, c);
            assert_relative_eq!(mag.period * c, sol.length(), max_relative = 1e-14);
            assert_relative_eq!(mag.pair.k.mean(), 1.0, max_relative = 1e-14);
        }
        let p = FieldPair::round(1.0).unwrap();
        let sol = OrbitSolution::from_parts(seed_circles(&p, 1, 64).unwrap().remove(0), p, 0.0, 0).unwrap();
        assert!(rescale_to_energy(&sol, 0.0).is_err());
        let same = rescale_to_energy(&sol, sol.speed).unwrap();
        assert_eq!(same.curve, sol.curve);
        assert_relative_eq!(same.period, 1.0, max_relative = 1e-14);
    }
}
