use crate::artifacts::Artifacts;
use crate::config::{Method, RunConfig};
use crate::plot::render_svg;
use magloop::geometry::TangentVector;
use magloop::loops::io::{from_csv, from_json, to_csv, to_json};
use magloop::loops::shift_distance;
use magloop::solver::{
    continue_path, lock_on, newton_solve, rescale_to_energy, search_orbits, shoot_periodic, ContinuationPath, PathStatus,
    ShootingOptions,
};
use magloop::verify::verify_loop_seeded;
use magloop::{DiscreteLoop, FieldPair, OrbitSolution, SpherePoint, VerificationReport};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Continue,
    Verify,
    FindTwo,
    Sweep,
    Plot,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Continue => "continue",
            Command::Verify => "verify",
            Command::FindTwo => "find-two",
            Command::Sweep => "sweep",
            Command::Plot => "plot",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("solver failed: {0}")]
    Solver(#[from] magloop::Error),
    #[error("continuation blocked: {0}")]
    Blocked(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use magloop::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(e) => match e {
                E::NonConvergence { .. } | E::LinearSolve { .. } | E::Collapse(_) | E::SectionDegenerate(_) | E::Corrector { .. } => 3,
                E::SearchFailure { .. } => 5,
                _ => 1,
            },
            CliError::Blocked(_) => 4,
            CliError::Certification(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

type Outcome = Result<(), CliError>;

#[derive(Serialize)]
struct SolutionSummary {
    residual_norm: f64,
    length: f64,
    speed: f64,
    period: f64,
    energy: Option<f64>,
    newton_iters: usize,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    schema_version: u32,
    command: &'a str,
    field_checksum: String,
    orbit: Option<String>,
    solution: Option<SolutionSummary>,
    report: &'a VerificationReport,
}

pub fn read_loop(path: &Path) -> anyhow::Result<DiscreteLoop> {
    use anyhow::Context;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let lp = if path.extension().is_some_and(|e| e == "json") {
        from_json(&text)?.0
    } else {
        from_csv(&text)?
    };
    Ok(lp)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// Writes `<stem>.csv`, `<stem>.json` and `<report>`; returns the report
/// re-derived with the run's pole seed.
fn write_orbit(art: &mut Artifacts, cfg: &RunConfig, cmd: Command, stem: &str, report_name: &str, sol: &OrbitSolution) -> anyhow::Result<VerificationReport> {
    let eq = sol.equation_pair();
    let report = verify_loop_seeded(&sol.curve, &eq, cfg.seed);
    art.write(&format!("{stem}.csv"), to_csv(&sol.curve))?;
    art.write(&format!("{stem}.json"), to_json(&sol.curve, Some(sol.pair.checksum())))?;
    art.write_json(
        report_name,
        &ReportDoc {
            schema_version: REPORT_SCHEMA_VERSION,
            command: cmd.name(),
            field_checksum: sol.pair.checksum(),
            orbit: Some(format!("{stem}.csv")),
            solution: Some(SolutionSummary {
                residual_norm: sol.residual_norm,
                length: sol.length(),
                speed: sol.speed,
                period: sol.period,
                energy: sol.energy,
                newton_iters: sol.newton_iters,
            }),
            report: &report,
        },
    )?;
    Ok(report)
}

fn certify(report: &VerificationReport, what: &str) -> Outcome {
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Certification(format!("{what}: {}", report.failures.join(", "))))
    }
}

fn perturbed_circle(n: usize, center: &SpherePoint, radius: f64, amp: f64) -> magloop::Result<DiscreteLoop> {
    let c = DiscreteLoop::circle(n, center, radius)?;
    if amp == 0.0 {
        return Ok(c);
    }
    let pts = c
        .points()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let t = std::f64::consts::TAU * j as f64 / n as f64;
            let normal = (center.vec() - p * p.dot(center.vec())).normalize();
            (p + normal * amp * ((2.0 * t).cos() + 0.5 * (3.0 * t).sin())).normalize()
        })
        .collect();
    DiscreteLoop::new(pts)
}

fn solve(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let p = &cfg.solve;
    let guess = match &p.guess {
        Some(path) => read_loop(path)?,
        None => perturbed_circle(cfg.solver.n, &p.center, p.radius, p.perturbation)?,
    };
    let sol = match p.method {
        Method::Newton => newton_solve(&guess, &cfg.pair, &cfg.solver)?,
        Method::Shoot => {
            let jet = guess.jet();
            let x0 = guess.point(0);
            let v0 = TangentVector::new(x0, jet.velocity[0]);
            let t_guess = guess.length(&cfg.pair.phi);
            shoot_periodic(&x0, &v0, t_guess, &cfg.pair, &ShootingOptions::default(), &cfg.solver)?.solution
        }
    };
    let report = write_orbit(art, cfg, Command::Solve, "orbit", "report.json", &sol)?;
    certify(&report, "orbit")
}

fn continuation_logs(path: &ContinuationPath) -> (String, String) {
    let mut accepted = String::from("t,dt,iters,residual,jump,length\n");
    let mut all = String::from("t,dt,accepted,iters,residual,jump,note\n");
    let mut sample = path.samples.iter().skip(1);
    for r in &path.history {
        writeln!(
            all,
            "{:.16e},{:.16e},{},{},{},{},{}",
            r.t,
            r.dt,
            r.accepted,
            r.iters.map(|i| i.to_string()).unwrap_or_default(),
            fmt_opt(r.residual),
            fmt_opt(r.jump),
            r.note.replace(',', ";")
        )
        .unwrap();
        if r.accepted {
            let len = sample.next().map(|(_, s)| s.length());
            writeln!(
                accepted,
                "{:.16e},{:.16e},{},{},{},{}",
                r.t,
                r.dt,
                r.iters.unwrap_or(0),
                fmt_opt(r.residual),
                fmt_opt(r.jump),
                fmt_opt(len)
            )
            .unwrap();
        }
    }
    (accepted, all)
}

#[derive(Serialize)]
struct PathSummary<'a> {
    schema_version: u32,
    status: &'a PathStatus,
    attempted_steps: usize,
    accepted_steps: usize,
}

fn write_path(art: &mut Artifacts, prefix: &str, path: &ContinuationPath) -> anyhow::Result<()> {
    let (accepted, all) = continuation_logs(path);
    art.write(&format!("{prefix}continuation.csv"), accepted)?;
    art.write(&format!("{prefix}continuation_steps.csv"), all)?;
    art.write_json(
        &format!("{prefix}continuation.json"),
        &PathSummary {
            schema_version: REPORT_SCHEMA_VERSION,
            status: &path.status,
            attempted_steps: path.history.len(),
            accepted_steps: path.history.iter().filter(|r| r.accepted).count(),
        },
    )
}

fn continue_cmd(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let seed = match &cfg.continue_seed {
        Some(path) => read_loop(path)?,
        None => {
            let center = lock_on(&cfg.pair, &cfg.continue_center, cfg.continue_lock_on)?;
            DiscreteLoop::circle(cfg.solver.n, &center, (1.0 / cfg.pair.k_inf).atan())?
        }
    };
    let path = continue_path(&cfg.pair, &seed, &cfg.solver, &cfg.continuation)?;
    write_path(art, "", &path)?;
    if let PathStatus::Blocked { .. } = path.status {
        return Err(CliError::Blocked(path.status.to_string()));
    }
    let (_, end) = path.samples.last().expect("a reached path has samples");
    let report = write_orbit(art, cfg, Command::Continue, "orbit", "report.json", end)?;
    certify(&report, "endpoint")
}

fn verify_cmd(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let path = cfg
        .verify_loop
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("no loop file given; set verify.loop or pass --loop"))?;
    let lp = read_loop(path)?;
    let report = verify_loop_seeded(&lp, &cfg.pair, cfg.seed);
    art.write_json(
        "report.json",
        &ReportDoc {
            schema_version: REPORT_SCHEMA_VERSION,
            command: Command::Verify.name(),
            field_checksum: cfg.pair.checksum(),
            orbit: path.file_name().map(|f| f.to_string_lossy().into_owned()),
            solution: None,
            report: &report,
        },
    )?;
    certify(&report, "loop")
}

#[derive(Serialize)]
struct SearchSummary {
    schema_version: u32,
    seeds: usize,
    statuses: Vec<String>,
    orbits: Vec<String>,
    lengths: Vec<f64>,
    /// Smallest pairwise shift distance among the returned orbits.
    min_separation: Option<f64>,
}

fn find_two(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let search = search_orbits(&cfg.pair, &cfg.solver, &cfg.continuation, cfg.seeds)?;
    for (i, p) in search.paths.iter().enumerate() {
        if let Ok(path) = p {
            write_path(art, &format!("seed_{i}_"), path)?;
        }
    }
    let mut names = Vec::new();
    let mut failed = Vec::new();
    for (i, sol) in search.orbits.iter().enumerate() {
        let stem = format!("orbit_{}", i + 1);
        let report = write_orbit(art, cfg, Command::FindTwo, &stem, &format!("report_{}.json", i + 1), sol)?;
        if !report.passed {
            failed.push(stem.clone());
        }
        names.push(stem);
    }
    let mut sep: Option<f64> = None;
    for (i, a) in search.orbits.iter().enumerate() {
        for b in &search.orbits[i + 1..] {
            let d = shift_distance(&a.curve, &b.curve).distance;
            sep = Some(sep.map_or(d, |s| s.min(d)));
        }
    }
    art.write_json(
        "find_two.json",
        &SearchSummary {
            schema_version: REPORT_SCHEMA_VERSION,
            seeds: cfg.seeds,
            statuses: search.statuses(),
            orbits: names,
            lengths: search.orbits.iter().map(|o| o.length()).collect(),
            min_separation: sep,
        },
    )?;
    if search.orbits.len() < 2 {
        return Err(CliError::Solver(magloop::Error::SearchFailure {
            found: search.orbits.len(),
            statuses: search.statuses(),
        }));
    }
    if !failed.is_empty() {
        return Err(CliError::Certification(failed.join(", ")));
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let jobs: Vec<Result<(ContinuationPath, Option<OrbitSolution>), String>> = cfg
        .sweep_energies
        .par_iter()
        .map(|&c| {
            let pc = FieldPair::new(cfg.pair.phi.clone(), cfg.pair.k.scaled(1.0 / c)).map_err(|e| e.to_string())?;
            let center = lock_on(&pc, &cfg.sweep_center, cfg.sweep_lock_on).map_err(|e| e.to_string())?;
            let seed = DiscreteLoop::circle(cfg.solver.n, &center, (1.0 / pc.k_inf).atan()).map_err(|e| e.to_string())?;
            let path = continue_path(&pc, &seed, &cfg.solver, &cfg.continuation).map_err(|e| e.to_string())?;
            let end = match path.status {
                PathStatus::Reached => {
                    let (_, sol) = path.samples.last().expect("a reached path has samples");
                    Some(rescale_to_energy(sol, c).map_err(|e| e.to_string())?)
                }
                PathStatus::Blocked { .. } => None,
            };
            Ok((path, end))
        })
        .collect();
    let mut table = String::from("energy,status,length,period,magnetic_residual,passed\n");
    let mut first_err: Option<CliError> = None;
    for (i, (c, job)) in cfg.sweep_energies.iter().zip(jobs).enumerate() {
        match job {
            Err(e) => {
                writeln!(table, "{c:.16e},error: {},,,,", e.replace(',', ";")).unwrap();
                first_err.get_or_insert(CliError::Other(anyhow::anyhow!("energy {c}: {e}")));
            }
            Ok((path, end)) => {
                write_path(art, &format!("energy_{i}_"), &path)?;
                match end {
                    None => {
                        writeln!(table, "{c:.16e},{},,,,", path.status.to_string().replace(',', ";")).unwrap();
                        first_err.get_or_insert(CliError::Blocked(format!("energy {c}: {}", path.status)));
                    }
                    Some(sol) => {
                        let report = write_orbit(art, cfg, Command::Sweep, &format!("orbit_energy_{i}"), &format!("report_energy_{i}.json"), &sol)?;
                        writeln!(
                            table,
                            "{c:.16e},reached,{:.16e},{:.16e},{:.16e},{}",
                            sol.length(),
                            sol.period,
                            sol.residual_norm,
                            report.passed
                        )
                        .unwrap();
                        if let Err(e) = certify(&report, &format!("energy {c}")) {
                            first_err.get_or_insert(e);
                        }
                    }
                }
            }
        }
    }
    art.write("sweep.csv", table)?;
    first_err.map_or(Ok(()), Err)
}

fn plot(cfg: &RunConfig, art: &mut Artifacts) -> Outcome {
    let path = cfg
        .plot_loop
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("no loop file given; set plot.loop or pass --loop"))?;
    let lp = read_loop(path)?;
    art.write("plot.svg", render_svg(&lp, cfg.plot_view, cfg.seed))?;
    Ok(())
}

/// Runs `cmd` and writes the MANIFEST whatever the outcome.
pub fn run_command(cmd: Command, cfg: &RunConfig, config_text: &str, out_dir: &Path) -> Outcome {
    let mut art = Artifacts::create(out_dir, cmd.name(), config_text)?;
    let result = match cmd {
        Command::Solve => solve(cfg, &mut art),
        Command::Continue => continue_cmd(cfg, &mut art),
        Command::Verify => verify_cmd(cfg, &mut art),
        Command::FindTwo => find_two(cfg, &mut art),
        Command::Sweep => sweep(cfg, &mut art),
        Command::Plot => plot(cfg, &mut art),
    };
    // a failed certification still leaves a full set of artifacts
    let incomplete = match &result {
        Ok(()) | Err(CliError::Certification(_)) => None,
        Err(e) => Some(e.to_string()),
    };
    art.finish(incomplete.as_deref())?;
    result
}
