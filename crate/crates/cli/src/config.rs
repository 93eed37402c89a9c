//! Run configuration: one TOML document per run.
//!
//! ```toml
//! n = 128
//! seed = 24301
//!
//! [phi]
//! terms = [{ l = 1, m = 0, c = 0.2 }]
//!
//! [k]
//! constant = 1.0
//! terms = [{ l = 1, m = 1, c = 0.3 }]
//!
//! [solver]
//! newton_tol = 1e-10
//!
//! [continuation]
//! seeds = 8
//! ```
//!
//! Parsing is strict: unknown keys are rejected, and semantic problems are
//! collected and reported together.

use magloop::fields::{field_infimum, SphericalField};
use magloop::solver::{seed_centers, ContinuationOptions, LockOn, SolverOptions};
use magloop::verify::DEFAULT_POLE_SEED;
use magloop::{FieldPair, SpherePoint, Vec3};
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub Vec<String>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSpec {
    l: usize,
    m: i64,
    c: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FieldSpec {
    constant: f64,
    terms: Vec<TermSpec>,
}

impl FieldSpec {
    fn build(&self) -> magloop::Result<SphericalField> {
        let mut terms = vec![(0, 0, self.constant)];
        terms.extend(self.terms.iter().map(|t| (t.l, t.m, t.c)));
        SphericalField::new(terms)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SolverSection {
    newton_tol: f64,
    max_iters: usize,
    damping: f64,
    svd_cutoff: f64,
    trust_radius: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverSection {
            newton_tol: d.newton_tol,
            max_iters: d.max_iters,
            damping: d.damping,
            svd_cutoff: d.svd_cutoff,
            trust_radius: d.trust_radius,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ContinuationSection {
    t_start: f64,
    initial_step: f64,
    min_step: f64,
    max_step: f64,
    grow: f64,
    shrink: f64,
    easy_iters: usize,
    max_steps: usize,
    seeds: usize,
    lock_on: bool,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        let d = ContinuationOptions::default();
        ContinuationSection {
            t_start: d.t_start,
            initial_step: d.initial_step,
            min_step: d.min_step,
            max_step: d.max_step,
            grow: d.grow,
            shrink: d.shrink,
            easy_iters: d.easy_iters,
            max_steps: d.max_steps,
            seeds: 8,
            lock_on: d.lock_on,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Newton,
    Shoot,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SolveSection {
    method: Method,
    center: Option<[f64; 3]>,
    radius: Option<f64>,
    perturbation: f64,
    guess: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ContinueSection {
    center: Option<[f64; 3]>,
    seed_loop: Option<PathBuf>,
    lock_on: LockOn,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LoopSection {
    #[serde(rename = "loop")]
    loop_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SweepSection {
    energies: Vec<f64>,
    center: Option<[f64; 3]>,
    lock_on: LockOn,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            energies: vec![0.5, 1.0, 2.0],
            center: None,
            lock_on: LockOn::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PlotSection {
    #[serde(rename = "loop")]
    loop_file: Option<PathBuf>,
    view: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    phi: FieldSpec,
    k: FieldSpec,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    continuation: ContinuationSection,
    #[serde(default)]
    solve: SolveSection,
    #[serde(default, rename = "continue")]
    continue_: ContinueSection,
    #[serde(default)]
    verify: LoopSection,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    plot: PlotSection,
}

fn default_n() -> usize {
    128
}

fn default_seed() -> u64 {
    DEFAULT_POLE_SEED
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub method: Method,
    pub center: SpherePoint,
    pub radius: f64,
    pub perturbation: f64,
    pub guess: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub pair: FieldPair,
    pub solver: SolverOptions,
    pub continuation: ContinuationOptions,
    /// Number of seed circles for `find-two`.
    pub seeds: usize,
    /// Seed for pole and section retries.
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub solve: SolveParams,
    pub continue_center: SpherePoint,
    /// Placement of the seed circle on the round family.
    pub continue_lock_on: LockOn,
    pub continue_seed: Option<PathBuf>,
    pub verify_loop: Option<PathBuf>,
    pub sweep_energies: Vec<f64>,
    pub sweep_center: SpherePoint,
    pub sweep_lock_on: LockOn,
    pub plot_loop: Option<PathBuf>,
    pub plot_view: Option<Vec3>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn center_point(c: Option<[f64; 3]>, what: &str, errs: &mut Vec<String>) -> SpherePoint {
    match c {
        None => seed_centers(8)[0],
        Some(v) => {
            let v = Vec3::new(v[0], v[1], v[2]);
            if v.norm() > 0.0 && v.iter().all(|x| x.is_finite()) {
                SpherePoint::from_vec(v)
            } else {
                errs.push(format!("{what} must be a finite nonzero vector"));
                SpherePoint::north()
            }
        }
    }
}

/// Parses and validates a configuration. Relative paths are resolved
/// against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().trim().to_string();
        ConfigError(vec![match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("line {line}, column {col}: {msg}")
            }
            None => msg,
        }])
    })?;
    let mut errs = Vec::new();

    let phi = raw.phi.build().map_err(|e| errs.push(format!("phi: {e}"))).ok();
    let k = raw.k.build().map_err(|e| errs.push(format!("k: {e}"))).ok();
    let mut pair = None;
    if let (Some(phi), Some(k)) = (phi, k) {
        let inf = field_infimum(&k).lower;
        if inf > 0.0 {
            pair = FieldPair::new(phi, k).map_err(|e| errs.push(format!("k: {e}"))).ok();
        } else {
            errs.push(format!("k must be positive everywhere; its certified infimum is {inf:.6}"));
        }
    }

    let solver = SolverOptions {
        newton_tol: raw.solver.newton_tol,
        max_iters: raw.solver.max_iters,
        damping: raw.solver.damping,
        n: raw.n,
        svd_cutoff: raw.solver.svd_cutoff,
        trust_radius: raw.solver.trust_radius,
    };
    errs.extend(solver.validate());
    let c = &raw.continuation;
    let continuation = ContinuationOptions {
        t_start: c.t_start,
        initial_step: c.initial_step,
        min_step: c.min_step,
        max_step: c.max_step,
        grow: c.grow,
        shrink: c.shrink,
        easy_iters: c.easy_iters,
        max_steps: c.max_steps,
        lock_on: c.lock_on,
    };
    errs.extend(continuation.validate().into_iter().map(|e| format!("continuation: {e}")));
    if c.seeds == 0 {
        errs.push("continuation: seeds must be positive".into());
    }

    let solve_center = center_point(raw.solve.center, "solve.center", &mut errs);
    if let Some(r) = raw.solve.radius {
        if !(r > 0.0 && r < std::f64::consts::PI) {
            errs.push(format!("solve.radius must lie in (0, pi), got {r}"));
        }
    }
    if !(raw.solve.perturbation.is_finite() && raw.solve.perturbation.abs() < 0.5) {
        errs.push(format!("solve.perturbation must lie in (-0.5, 0.5), got {}", raw.solve.perturbation));
    }
    let continue_center = center_point(raw.continue_.center, "continue.center", &mut errs);
    let sweep_center = center_point(raw.sweep.center, "sweep.center", &mut errs);
    if raw.sweep.energies.is_empty() {
        errs.push("sweep.energies must not be empty".into());
    }
    for e in &raw.sweep.energies {
        if !(*e > 0.0 && e.is_finite()) {
            errs.push(format!("sweep.energies must be positive, got {e}"));
        }
    }
    let plot_view = raw.plot.view.map(|v| Vec3::new(v[0], v[1], v[2]));
    if let Some(v) = plot_view {
        if !(v.norm() > 0.0 && v.iter().all(|x| x.is_finite())) {
            errs.push("plot.view must be a finite nonzero vector".into());
        }
    }

    let Some(pair) = pair.filter(|_| errs.is_empty()) else {
        return Err(ConfigError(errs));
    };
    let resolve = |p: Option<PathBuf>| p.map(|p| if p.is_absolute() { p } else { base.join(p) });
    let radius = raw.solve.radius.unwrap_or_else(|| (1.0 / pair.k_inf).atan());
    Ok(RunConfig {
        solver,
        continuation,
        seeds: c.seeds,
        seed: raw.seed,
        output_dir: resolve(raw.output_dir),
        solve: SolveParams {
            method: raw.solve.method,
            center: solve_center,
            radius,
            perturbation: raw.solve.perturbation,
            guess: resolve(raw.solve.guess),
        },
        continue_center,
        continue_lock_on: raw.continue_.lock_on,
        continue_seed: resolve(raw.continue_.seed_loop),
        verify_loop: resolve(raw.verify.loop_file),
        sweep_energies: raw.sweep.energies,
        sweep_center,
        sweep_lock_on: raw.sweep.lock_on,
        plot_loop: resolve(raw.plot.loop_file),
        plot_view,
        pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        parse_config(text, Path::new("."))
    }

    #[test]
    fn minimal_round_config() {
        let cfg = parse("n = 128\n[k]\nconstant = 1.0\n").unwrap();
        assert!(cfg.pair.phi.is_zero());
        assert_eq!(cfg.solver.n, 128);
        assert!((cfg.pair.k_inf - 1.0).abs() < 1e-6);
        assert_eq!(cfg.seeds, 8);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("metrick = 1\n[k]\nconstant = 1.0\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].contains("metrick"), "{err}");
        assert!(err.0[0].starts_with("line 1, column 1"), "{err}");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse("[k]\nconstant = = 1\n").unwrap_err();
        assert!(err.0[0].starts_with("line 2, column"), "{err}");
    }

    #[test]
    fn negative_prescription_rejected() {
        let err = parse("[k]\nconstant = -1.0\n").unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("positive")), "{err}");
    }

    #[test]
    fn all_violations_are_listed() {
        let text = "n = 33\n[k]\nconstant = -1.0\n[solver]\ndamping = 2.0\n[continuation]\nseeds = 0\n";
        let err = parse(text).unwrap_err();
        assert_eq!(err.0.len(), 4, "{err}");
        assert!(err.0.iter().any(|e| e.contains("n must be even")));
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let cfg = parse_config("[k]\nconstant = 1.0\n[verify]\nloop = \"a.csv\"\n", Path::new("/tmp/run")).unwrap();
        assert_eq!(cfg.verify_loop.unwrap(), PathBuf::from("/tmp/run/a.csv"));
    }

    #[test]
    fn field_terms_are_read() {
        let cfg = parse("[phi]\nterms = [{ l = 1, m = 0, c = 0.2 }]\n[k]\nconstant = 1.0\nterms = [{ l = 1, m = 1, c = 0.3 }]\n").unwrap();
        assert_eq!(cfg.pair.phi.terms(), &[(1, 0, 0.2)]);
        assert_eq!(cfg.pair.k.terms(), &[(0, 0, 1.0), (1, 1, 0.3)]);
        assert!((cfg.pair.k_inf - 0.7).abs() < 1e-6);
    }
}
