//! The four driver commands. Each writes its artifacts and a `manifest.json`
//! into the configured output directory and returns the computed data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};

use super::config::{ProblemKind, RunConfig};
use crate::analysis::{
    ConvergenceTable, StepContraction, compute_errors, compute_rates, contraction_diagnostics,
};
use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::io::{RunManifest, write_convergence_csv, write_history_csv, write_vtk};
use crate::stepper::{
    IterationHistory, Simulator, TauReport, TimeGrid, TwoPhaseState, check_tau_restriction,
};

/// Process exit code for an error: 1 for solver failures, 3 for configuration problems.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::SingularSystem(_)
        | Error::MaxItersExceeded { .. }
        | Error::QuadratureFailure(_)
        | Error::IoFailure { .. }
        | Error::NonPositiveWeight { .. } => 1,
        _ => 3,
    }
}

pub const EXIT_TAU_INADMISSIBLE: i32 = 2;

fn finish_manifest(
    manifest: &mut RunManifest,
    out: &Path,
    files: &[PathBuf],
    started: Instant,
) -> Result<()> {
    for f in files {
        manifest.add_artifact(out, f)?;
    }
    manifest.timings.total_s = started.elapsed().as_secs_f64();
    manifest.write(&out.join("manifest.json"))
}

/// Runs the manufactured problem on `levels` grids, halving `h` and quartering
/// `tau` each time, and writes `convergence.csv`. With fewer than two levels
/// the table is written without rates and `InsufficientRows` is returned.
pub fn cmd_convergence_study(base: &RunConfig) -> Result<ConvergenceTable> {
    let started = Instant::now();
    if base.levels == 0 {
        return Err(Error::InvalidConfig("levels must be at least 1".into()));
    }
    let first = base.resolve()?;
    let exact = first.problem.exact.clone().ok_or_else(|| {
        Error::InvalidConfig(format!(
            "problem '{}' has no exact solution",
            first.problem.name
        ))
    })?;
    let mut manifest = RunManifest::new(
        "convergence-study",
        base.to_json(),
        base.tol_abs,
        base.tol_rel,
    );
    let mut reports = Vec::with_capacity(base.levels);
    for level in 0..base.levels {
        let factor = 1usize << level;
        let counts: Vec<usize> = first.grid.counts().iter().map(|c| c * factor).collect();
        let grid = StructuredGrid::new(first.problem.dim, &first.problem.extents, &counts)?;
        let tau = first.time.tau / (factor * factor) as f64;
        let time = TimeGrid::from_end(first.time.t_end(), tau)?;
        manifest.describe_grid(&grid);
        let t0 = Instant::now();
        let mut sim = Simulator::new(
            grid.clone(),
            first.problem.clone(),
            first.lscheme,
            tau,
            first.options,
        )?;
        manifest.timings.assembly_s += t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let (snaps, hist) = sim.run(&time, 1)?;
        manifest.timings.solve_s += t1.elapsed().as_secs_f64();
        let report = compute_errors(&snaps, &exact, &grid, &time)?;
        info!(
            "level {level}: h = {}, tau = {tau}, max iterations {}, E_p = {:e}",
            grid.h_max(),
            hist.iter()
                .map(IterationHistory::iterations)
                .max()
                .unwrap_or(0),
            report.e_p
        );
        reports.push(report);
    }
    let table = ConvergenceTable::from_reports(reports);
    let table = match compute_rates(&table) {
        Ok(t) => t,
        Err(e) => {
            write_convergence_csv(&table, &base.output_dir.join("convergence.csv"))?;
            return Err(e);
        }
    };
    let path = base.output_dir.join("convergence.csv");
    write_convergence_csv(&table, &path)?;
    finish_manifest(&mut manifest, &base.output_dir, &[path], started)?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct InjectionOutcome {
    pub grid: StructuredGrid,
    pub snapshots: Vec<(usize, TwoPhaseState)>,
    pub histories: Vec<IterationHistory>,
    pub files: Vec<PathBuf>,
}

/// Runs a full simulation, writing one VTK file per snapshot and the iteration history.
pub fn cmd_injection(cfg: &RunConfig) -> Result<InjectionOutcome> {
    let started = Instant::now();
    let run = cfg.resolve()?;
    let mut manifest = RunManifest::new("injection", cfg.to_json(), cfg.tol_abs, cfg.tol_rel);
    manifest.describe_grid(&run.grid);
    let t0 = Instant::now();
    let mut sim = Simulator::new(
        run.grid.clone(),
        run.problem,
        run.lscheme,
        run.time.tau,
        run.options,
    )?;
    manifest.timings.assembly_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (snapshots, histories) = sim.run(&run.time, cfg.snapshot_cadence)?;
    manifest.timings.solve_s = t1.elapsed().as_secs_f64();
    for h in &histories {
        debug!(
            "step {} (t = {}): {} iterations",
            h.step,
            h.t,
            h.iterations()
        );
    }
    let out = &cfg.output_dir;
    let mut files = Vec::new();
    for (n, st) in &snapshots {
        let path = out.join(format!("state_{n:05}.vtk"));
        write_vtk(
            &run.grid,
            &[
                ("saturation", &st.sat),
                ("theta", &st.theta),
                ("pressure", &st.p),
            ],
            &path,
        )?;
        files.push(path);
    }
    if !histories.is_empty() {
        let path = out.join("iterations.csv");
        write_history_csv(&histories, &path)?;
        files.push(path);
    }
    finish_manifest(&mut manifest, out, &files, started)?;
    info!(
        "{} steps, {} snapshots written to {}",
        histories.len(),
        snapshots.len(),
        out.display()
    );
    Ok(InjectionOutcome {
        grid: run.grid,
        snapshots,
        histories,
        files,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauOutcome {
    pub report: TauReport,
    pub tau: f64,
    pub l: f64,
    pub c_omega_d: f64,
    /// Flux bound from the pilot solve when none was declared.
    pub estimated_m_u: Option<f64>,
    /// Reports for `C_omega_d` in `{0.5, 1, 2}` times the configured value.
    pub sensitivity: Vec<(f64, TauReport)>,
}

impl TauOutcome {
    pub fn render(&self) -> String {
        let fmt_tau = |t: f64| {
            if t.is_infinite() {
                "unrestricted".to_string()
            } else {
                format!("{t:e}")
            }
        };
        let mut s = String::new();
        let _ = writeln!(s, "tau        = {:e}", self.tau);
        let _ = writeln!(s, "L          = {}", self.l);
        if let Some(m) = self.estimated_m_u {
            let _ = writeln!(s, "M_u        = {m:e} (pilot estimate)");
        }
        let _ = writeln!(s, "C1         = {:e}", self.report.c1);
        let _ = writeln!(s, "C3         = {:e}", self.report.c3);
        let _ = writeln!(s, "tau_max    = {}", fmt_tau(self.report.tau_max));
        let _ = writeln!(s, "admissible = {}", self.report.admissible);
        for (c, r) in &self.sensitivity {
            let _ = writeln!(s, "C_omega_d = {c}: tau_max = {}", fmt_tau(r.tau_max));
        }
        s
    }
}

/// Evaluates the time-step restriction of the L-scheme for the configured problem.
pub fn cmd_check_tau(cfg: &RunConfig) -> Result<TauOutcome> {
    let run = cfg.resolve()?;
    let mut bounds = run.problem.coeffs.bounds.clone();
    let mut estimated_m_u = None;
    if bounds.m_u.is_none() {
        let mut sim = Simulator::new(
            run.grid.clone(),
            run.problem.clone(),
            run.lscheme,
            run.time.tau,
            run.options,
        )?;
        let m = sim.estimate_flux_bound()?;
        bounds.m_u = Some(m);
        estimated_m_u = Some(m);
    }
    let report = check_tau_restriction(&bounds, run.lscheme.l, cfg.c_omega_d, run.time.tau)?;
    let sensitivity = [0.5, 1.0, 2.0]
        .iter()
        .map(|&k| {
            let c = k * cfg.c_omega_d;
            check_tau_restriction(&bounds, run.lscheme.l, c, run.time.tau).map(|r| (c, r))
        })
        .collect::<Result<_>>()?;
    Ok(TauOutcome {
        report,
        tau: run.time.tau,
        l: run.lscheme.l,
        c_omega_d: cfg.c_omega_d,
        estimated_m_u,
        sensitivity,
    })
}

#[derive(Debug, Clone)]
pub struct ProbeOutcome {
    pub step: usize,
    pub history: IterationHistory,
    pub contraction: Option<StepContraction>,
    pub file: PathBuf,
}

fn default_probe_step(cfg: &RunConfig, time: &TimeGrid) -> usize {
    match cfg.problem {
        ProblemKind::Injection3d => {
            ((20.0 / time.tau).round() as usize).clamp(1, time.n_steps.max(1))
        }
        _ => time.n_steps.max(1),
    }
}

/// Advances to the probed step and writes that step's iteration history.
pub fn cmd_lscheme_probe(cfg: &RunConfig) -> Result<ProbeOutcome> {
    let started = Instant::now();
    let run = cfg.resolve()?;
    let step = cfg
        .probe_step
        .unwrap_or_else(|| default_probe_step(cfg, &run.time));
    if step == 0 || step > run.time.n_steps {
        return Err(Error::InvalidConfig(format!(
            "probe step {step} outside 1..={}",
            run.time.n_steps
        )));
    }
    let mut manifest = RunManifest::new("lscheme-probe", cfg.to_json(), cfg.tol_abs, cfg.tol_rel);
    manifest.describe_grid(&run.grid);
    let mut sim = Simulator::new(
        run.grid.clone(),
        run.problem,
        run.lscheme,
        run.time.tau,
        run.options,
    )?;
    let mut state = sim.initial_state()?;
    let mut history = None;
    for n in 1..=step {
        let (next, h) = sim.l_scheme_solve(&state, n)?;
        state = next;
        state.t = run.time.t(n);
        history = Some(h);
    }
    let history = history.expect("at least one step");
    let contraction = contraction_diagnostics(std::slice::from_ref(&history))
        .ok()
        .map(|s| s.steps[0].clone());
    let file = cfg.output_dir.join(format!("probe_step_{step:05}.csv"));
    write_history_csv(std::slice::from_ref(&history), &file)?;
    manifest.timings.solve_s = started.elapsed().as_secs_f64();
    finish_manifest(
        &mut manifest,
        &cfg.output_dir,
        std::slice::from_ref(&file),
        started,
    )?;
    Ok(ProbeOutcome {
        step,
        history,
        contraction,
        file,
    })
}
