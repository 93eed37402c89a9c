use super::{newton::newton_core, OrbitSolution, SolverOptions};
use crate::error::{Error, Result};
use crate::fields::{homotopy_fields, FieldPair};
use crate::loops::{shift_distance, DiscreteLoop};
use crate::operators::residual_norm;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationOptions {
    pub t_start: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub grow: f64,
    pub shrink: f64,
    /// Corrector iteration count up to which a step counts as easy.
    pub easy_iters: usize,
    /// Upper limit on attempted steps.
    pub max_steps: usize,
    /// Whether multi-seed searches move their seeds to critical points of
    /// the reduced function first.
    pub lock_on: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            t_start: 0.0,
            initial_step: 0.05,
            min_step: 1e-4,
            max_step: 0.1,
            grow: 1.5,
            shrink: 0.5,
            easy_iters: 4,
            max_steps: 400,
            lock_on: true,
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if !(0.0..1.0).contains(&self.t_start) {
            errs.push(format!("t_start must lie in [0, 1), got {}", self.t_start));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step && self.initial_step <= self.max_step) {
            errs.push("steps must satisfy 0 < min_step <= initial_step <= max_step".to_string());
        }
        if !(self.grow >= 1.0) {
            errs.push(format!("grow must be at least 1, got {}", self.grow));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            errs.push(format!("shrink must lie in (0, 1), got {}", self.shrink));
        }
        if self.max_steps == 0 {
            errs.push("max_steps must be positive".to_string());
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PathStatus {
    Reached,
    Blocked { t: f64, reason: String },
}

impl fmt::Display for PathStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathStatus::Reached => write!(f, "reached t = 1"),
            PathStatus::Blocked { t, reason } => write!(f, "blocked at t = {t:.6} ({reason})"),
        }
    }
}

/// One attempted predictor–corrector step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub accepted: bool,
    pub iters: Option<usize>,
    pub residual: Option<f64>,
    /// Distance to the previous accepted solution, after alignment.
    pub jump: Option<f64>,
    pub note: String,
}

#[derive(Debug, Clone)]
pub struct ContinuationPath {
    pub samples: Vec<(f64, OrbitSolution)>,
    pub history: Vec<StepRecord>,
    pub status: PathStatus,
}

/// Secant extrapolation of the loop points to `t_new`.
fn predict(prev: Option<&(f64, DiscreteLoop)>, cur: &(f64, DiscreteLoop), t_new: f64) -> DiscreteLoop {
    let Some((tp, lp)) = prev else {
        return cur.1.clone();
    };
    let aligned = lp.shift_by(-shift_distance(&cur.1, lp).shift);
    let r = (t_new - cur.0) / (cur.0 - tp);
    let pts = cur
        .1
        .points()
        .iter()
        .zip(aligned.points())
        .map(|(c, p)| c + (c - p) * r)
        .collect();
    DiscreteLoop::new(pts).unwrap_or_else(|_| cur.1.clone())
}

/// Round circle of the `t = 0` family whose center best matches `lp`, or
/// `None` if `lp` is too far from any circle to be a locked-on member.
fn nearest_family_member(lp: &DiscreteLoop, pair: &FieldPair) -> Result<Option<DiscreteLoop>> {
    let sum: crate::Vec3 = lp.points().iter().sum();
    if sum.norm() < 1e-8 * lp.len() as f64 {
        return Ok(None);
    }
    let radius = (1.0 / pair.k_inf).atan();
    let center = crate::geometry::SpherePoint::from_vec(sum);
    let circle = DiscreteLoop::circle(lp.len(), &center, radius)?;
    let m = shift_distance(lp, &circle);
    Ok(Some(circle.shift_by(-m.shift)))
}

/// Predictor–corrector continuation in the homotopy parameter, from a seed
/// solving the fields at `copts.t_start` to `t = 1`.
///
/// The seed is not corrected at `t_start`, where the solutions form a
/// degenerate family; the first correction happens at `t_start + Δt`.
/// When `t_start = 0` the corrector is free to slide along the family of
/// round circles, so the first sample is replaced by the family member
/// closest to the first corrected loop before continuity is checked.
/// Failed corrections halve the step; the path is blocked once the step
/// drops below `min_step`. Loop collapse aborts the path with an error.
pub fn continue_path(
    pair: &FieldPair,
    seed: &DiscreteLoop,
    opts: &SolverOptions,
    copts: &ContinuationOptions,
) -> Result<ContinuationPath> {
    let start_pair = homotopy_fields(pair, copts.t_start)?;
    let seed = if seed.len() == opts.n { seed.clone() } else { seed.resample(opts.n)? };
    let seed_res = residual_norm(&seed, &start_pair)?;
    let mut samples = vec![(copts.t_start, OrbitSolution::from_parts(seed.clone(), start_pair.clone(), seed_res, 0)?)];
    let mut history = Vec::new();
    let mut prev: Option<(f64, DiscreteLoop)> = None;
    let mut cur = (copts.t_start, seed);
    let mut dt = copts.initial_step;
    // largest observed rate of change of the loop along the path
    let mut path_speed: f64 = 1.0;
    let status = loop {
        if cur.0 >= 1.0 {
            break PathStatus::Reached;
        }
        if history.len() >= copts.max_steps {
            break PathStatus::Blocked {
                t: cur.0,
                reason: "step budget exhausted".into(),
            };
        }
        let t_new = (cur.0 + dt).min(1.0);
        let step = t_new - cur.0;
        let fields = homotopy_fields(pair, t_new)?;
        let guess = predict(prev.as_ref(), &cur, t_new);
        let mut record = StepRecord {
            t: t_new,
            dt: step,
            accepted: false,
            iters: None,
            residual: None,
            jump: None,
            note: String::new(),
        };
        match newton_core(&guess, &fields, opts) {
            Ok((lp, res, iters)) => {
                if prev.is_none() && copts.t_start == 0.0 {
                    if let Some(member) = nearest_family_member(&lp, pair)? {
                        let res0 = residual_norm(&member, &start_pair)?;
                        samples[0] = (0.0, OrbitSolution::from_parts(member.clone(), start_pair.clone(), res0, 0)?);
                        cur.1 = member;
                    }
                }
                let jump = shift_distance(&cur.1, &lp).distance;
                record.iters = Some(iters);
                record.residual = Some(res);
                record.jump = Some(jump);
                if jump <= 10.0 * step * path_speed {
                    record.accepted = true;
                    history.push(record);
                    path_speed = path_speed.max(jump / step);
                    if iters <= copts.easy_iters {
                        dt = (dt * copts.grow).min(copts.max_step);
                    }
                    samples.push((t_new, OrbitSolution::from_parts(lp.clone(), fields, res, iters)?));
                    prev = Some(std::mem::replace(&mut cur, (t_new, lp)));
                    continue;
                }
                record.note = "continuity bound violated".into();
            }
            Err(Error::Collapse(r)) => {
                return Err(Error::Corrector {
                    t: t_new,
                    source: Box::new(Error::Collapse(r)),
                })
            }
            Err(e) => record.note = e.to_string(),
        }
        log::debug!("step to t = {t_new:.6} rejected: {}", record.note);
        history.push(record);
        dt *= copts.shrink;
        if dt < copts.min_step {
            break PathStatus::Blocked {
                t: cur.0,
                reason: "step underflow".into(),
            };
        }
    };
    Ok(ContinuationPath {
        samples,
        history,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpherePoint;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn constant_homotopy_is_trivial() {
        let p = FieldPair::round(1.0).unwrap();
        let seed = DiscreteLoop::circle(64, &SpherePoint::new(1.0, 1.0, 1.0), FRAC_PI_4).unwrap();
        let opts = SolverOptions { n: 64, ..Default::default() };
        let path = continue_path(&p, &seed, &opts, &ContinuationOptions::default()).unwrap();
        assert_eq!(path.status, PathStatus::Reached);
        assert!(path.history.iter().all(|r| r.accepted && r.iters.unwrap() <= 1));
        let ts: Vec<f64> = path.samples.iter().map(|s| s.0).collect();
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*ts.last().unwrap(), 1.0);
    }

    #[test]
    fn unreachable_tolerance_blocks() {
        let p = FieldPair::new(
            crate::fields::SphericalField::new(vec![(1, 0, 0.2)]).unwrap(),
            crate::fields::SphericalField::new(vec![(0, 0, 1.0), (1, 1, 0.3)]).unwrap(),
        )
        .unwrap();
        let seed = DiscreteLoop::circle(32, &SpherePoint::new(1.0, 1.0, 1.0), (1.0 / p.k_inf).atan()).unwrap();
        let opts = SolverOptions {
            n: 32,
            newton_tol: 1e-16,
            max_iters: 8,
            ..Default::default()
        };
        let path = continue_path(&p, &seed, &opts, &ContinuationOptions::default()).unwrap();
        match path.status {
            PathStatus::Blocked { reason, .. } => assert_eq!(reason, "step underflow"),
            s => panic!("unexpected {s:?}"),
        }
    }
}
