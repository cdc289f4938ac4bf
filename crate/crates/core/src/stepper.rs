//! Backward Euler time stepping with the L-scheme inner iteration.
//!
//! Iteration `i` of step `n` first solves the pressure system with the mass
//! weight `a(s^{n,i-1})` and divergence data `f2(s^{n,i-1})`, then the
//! saturation system
//!
//! ```text
//! L (theta^i - theta^{i-1}) + s(theta^{i-1}) - s^{n-1} + tau div q^i = tau f_s
//! <q^i, v> - <theta^i, div v> = <f_w(s^{n,i-1}) u^i, v> + <f1(s^{n,i-1}), v>
//! ```
//!
//! Only the right-hand side of the saturation system changes between
//! iterations and time steps, so its factorization is computed once.

use crate::error::{Error, Result};
use crate::fespace::{
    FluxFieldRT0, ScalarFieldP0, apply_mass_rt0, assemble_div, assemble_mass_rt0,
    assemble_mass_rt0_lumped, boundary_pressure_load, project_p0, vector_load,
};
use crate::grid::{BoundarySide, StructuredGrid};
use crate::linsolve::{SaddleFactorization, SaddleSolver, SaddleSystem};
use crate::model::{BoundaryConditions, CoefficientBounds, CoefficientSet, Problem, SideCondition};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LSchemeConfig {
    pub l: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iters: usize,
}

impl LSchemeConfig {
    pub fn new(l: f64) -> Self {
        Self {
            l,
            tol_abs: 1e-8,
            tol_rel: 0.0,
            max_iters: 200,
        }
    }

    pub fn validate(&self, bounds: &CoefficientBounds) -> Result<()> {
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "L must be positive, got {}",
                self.l
            )));
        }
        if self.l < bounds.l_s {
            return Err(Error::InvalidConfig(format!(
                "L = {} is below the Lipschitz constant L_s = {} of s; the L-scheme requires L >= L_s",
                self.l, bounds.l_s
            )));
        }
        if !(self.tol_abs > 0.0 || self.tol_rel > 0.0) || self.tol_abs < 0.0 || self.tol_rel < 0.0 {
            return Err(Error::InvalidConfig(
                "need tol_abs > 0 or tol_rel > 0, both nonnegative".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub tau: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, n_steps: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must be positive, got {tau}"
            )));
        }
        Ok(Self { tau, n_steps })
    }

    /// Uniform steps of size `tau` up to `t_end`, which must be a multiple of `tau`.
    pub fn from_end(t_end: f64, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) || !(t_end >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "invalid time grid: t_end = {t_end}, tau = {tau}"
            )));
        }
        let n = (t_end / tau).round();
        if ((n * tau) - t_end).abs() > 1e-12 * t_end.max(tau) {
            return Err(Error::InvalidConfig(format!(
                "t_end = {t_end} is not a multiple of tau = {tau}"
            )));
        }
        Ok(Self {
            tau,
            n_steps: n as usize,
        })
    }

    pub fn t_end(&self) -> f64 {
        self.tau * self.n_steps as f64
    }

    pub fn t(&self, n: usize) -> f64 {
        self.tau * n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseState {
    pub theta: ScalarFieldP0,
    pub sat: ScalarFieldP0,
    pub p: ScalarFieldP0,
    pub q: FluxFieldRT0,
    pub u: FluxFieldRT0,
    pub t: f64,
}

impl TwoPhaseState {
    pub fn initial(grid: &StructuredGrid, coeffs: &CoefficientSet, theta: ScalarFieldP0) -> Self {
        let sat = coeffs.saturation_field(&theta);
        Self {
            theta,
            sat,
            p: ScalarFieldP0::zeros(grid),
            q: FluxFieldRT0::zeros(grid),
            u: FluxFieldRT0::zeros(grid),
            t: 0.0,
        }
    }
}

/// Saved states keyed by time step.
pub type Snapshots = Vec<(usize, TwoPhaseState)>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `|| theta^i - theta^{i-1} ||` in L2.
    pub inc_theta: f64,
    /// `|| q^i - q^{i-1} ||` in L2.
    pub inc_q: f64,
    /// `inc_theta(i) / inc_theta(i-1)`, absent for the first iteration.
    pub ratio: Option<f64>,
    /// Residual of `B u^i = int f2(s^{i-1})` relative to `max(|rhs|, | |B| |u| |)`.
    pub div_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationHistory {
    pub step: usize,
    pub t: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// L2 norm of the cellwise mass-balance defect density at the final iterate.
    pub balance_defect: f64,
}

impl IterationHistory {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepperOptions {
    pub mass_lumping: bool,
}

/// Corrections allowed when an older pressure factorization preconditions a
/// system with new mobility weights before refactoring.
const STALE_REFINEMENT_STEPS: usize = 12;

/// Outward flux DOF for a prescribed outward normal flux density on a face.
fn flux_constraints(grid: &StructuredGrid, bc: &BoundaryConditions) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for side in BoundarySide::all(grid.dim()) {
        if let SideCondition::Flux(g) = bc.get(side) {
            let fm = grid.face_measure_of_axis(side.axis);
            for face in grid.boundary_faces(side) {
                out.push((face, side.outward_sign() * g * fm));
            }
        }
    }
    out
}

fn dirichlet_load(grid: &StructuredGrid, bc: &BoundaryConditions) -> Result<Vec<f64>> {
    let mut total = vec![0.0; grid.num_faces()];
    for side in bc.dirichlet_sides(grid.dim()) {
        if let SideCondition::Dirichlet(g) = bc.get(side) {
            let g = g.clone();
            let load = boundary_pressure_load(grid, &[side], move |x| g(x))?;
            total.iter_mut().zip(load).for_each(|(t, l)| *t += l);
        }
    }
    Ok(total)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_weighted_norm(values: &[f64], measure: f64) -> f64 {
    (measure * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// Owns the discretization of one problem on one grid with one time step.
pub struct Simulator {
    grid: StructuredGrid,
    problem: Problem,
    cfg: LSchemeConfig,
    tau: f64,
    opts: StepperOptions,
    div: SparseMatrix,
    pressure_solver: SaddleSolver,
    /// Most recent pressure factorization and the mobility weights it was built with.
    pressure_cache: Option<(Vec<f64>, SaddleFactorization)>,
    pressure_constraints: Vec<(usize, f64)>,
    pressure_dirichlet: Vec<f64>,
    sat_factor: SaddleFactorization,
    sat_constraints: Vec<(usize, f64)>,
    sat_dirichlet: Vec<f64>,
    last_history: Option<IterationHistory>,
}

impl Simulator {
    pub fn new(
        grid: StructuredGrid,
        problem: Problem,
        cfg: LSchemeConfig,
        tau: f64,
        opts: StepperOptions,
    ) -> Result<Self> {
        if grid.dim() != problem.dim {
            return Err(Error::InvalidConfig(format!(
                "grid is {}D but problem '{}' is {}D",
                grid.dim(),
                problem.name,
                problem.dim
            )));
        }
        cfg.validate(&problem.coeffs.bounds)?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tau must be positive, got {tau}"
            )));
        }
        let div = assemble_div(&grid);
        let pressure_constraints = flux_constraints(&grid, &problem.pressure_bc);
        let pressure_dirichlet = dirichlet_load(&grid, &problem.pressure_bc)?;
        let sat_constraints = flux_constraints(&grid, &problem.saturation_bc);
        let sat_dirichlet = dirichlet_load(&grid, &problem.saturation_bc)?;

        let unit = ScalarFieldP0::constant(&grid, 1.0);
        let m = if opts.mass_lumping {
            assemble_mass_rt0_lumped(&grid, &unit)?
        } else {
            assemble_mass_rt0(&grid, &unit)?
        };
        let d = SparseMatrix::diagonal(&vec![cfg.l * grid.cell_measure() / tau; grid.num_cells()]);
        let sat_system = SaddleSystem {
            m,
            b: div.clone(),
            d,
            rhs_flux: vec![0.0; grid.num_faces()],
            rhs_scalar: vec![0.0; grid.num_cells()],
            constrained: sat_constraints.clone(),
        };
        let sat_factor = SaddleSolver::new().factorize(&sat_system)?;
        Ok(Self {
            grid,
            problem,
            cfg,
            tau,
            opts,
            div,
            pressure_solver: SaddleSolver::new(),
            pressure_cache: None,
            pressure_constraints,
            pressure_dirichlet,
            sat_factor,
            sat_constraints,
            sat_dirichlet,
            last_history: None,
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn config(&self) -> &LSchemeConfig {
        &self.cfg
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// History of the most recent L-scheme solve, including failed ones.
    pub fn last_history(&self) -> Option<&IterationHistory> {
        self.last_history.as_ref()
    }

    pub fn initial_state(&self) -> Result<TwoPhaseState> {
        let init = self.problem.initial_theta.clone();
        let theta = project_p0(&self.grid, move |x| init(x))?;
        Ok(TwoPhaseState::initial(
            &self.grid,
            &self.problem.coeffs,
            theta,
        ))
    }

    fn weighted_mass_product(&self, weight: &[f64], dofs: &[f64]) -> Vec<f64> {
        if self.opts.mass_lumping {
            let grid = &self.grid;
            let mut out = vec![0.0; grid.num_faces()];
            for (c, &w) in weight.iter().enumerate() {
                for axis in 0..grid.dim() {
                    let fm = grid.face_measure_of_axis(axis);
                    let half = 0.5 * w * grid.cell_measure() / (fm * fm);
                    let (lo, hi) = grid.cell_faces_on_axis(c, axis);
                    out[lo] += half * dofs[lo];
                    out[hi] += half * dofs[hi];
                }
            }
            out
        } else {
            apply_mass_rt0(&self.grid, weight, dofs)
        }
    }

    /// Mixed pressure solve with lagged saturation. Returns `(u, p)` and the
    /// relative residual of the divergence equation.
    pub fn pressure_step(
        &mut self,
        sat_lagged: &ScalarFieldP0,
    ) -> Result<(FluxFieldRT0, ScalarFieldP0, f64)> {
        let grid = &self.grid;
        let coeffs = &self.problem.coeffs;
        if sat_lagged.len() != grid.num_cells() {
            return Err(Error::LengthMismatch {
                what: "saturation",
                expected: grid.num_cells(),
                got: sat_lagged.len(),
            });
        }
        let weight = sat_lagged.map(|s| (coeffs.a)(s));
        let mut rhs_flux = self.pressure_dirichlet.clone();
        if let Some(f3) = &coeffs.f3 {
            let load = vector_load(grid, |c, x| f3(x, sat_lagged.values[c]))?;
            rhs_flux.iter_mut().zip(load).for_each(|(r, l)| *r -= l);
        }
        let rhs_scalar = coeffs.f2_cell_integrals(grid, sat_lagged)?;
        let exact_hit = matches!(&self.pressure_cache, Some((w, _)) if *w == weight.values);
        let sol = if exact_hit {
            let factor = &self.pressure_cache.as_ref().expect("checked above").1;
            factor.solve_with(&rhs_flux, &rhs_scalar, &self.pressure_constraints)?
        } else {
            let m = if self.opts.mass_lumping {
                assemble_mass_rt0_lumped(grid, &weight)?
            } else {
                assemble_mass_rt0(grid, &weight)?
            };
            let stale = match &self.pressure_cache {
                Some((_, factor)) => factor.solve_preconditioned(
                    &m,
                    &rhs_flux,
                    &rhs_scalar,
                    &self.pressure_constraints,
                    STALE_REFINEMENT_STEPS,
                )?,
                None => None,
            };
            match stale {
                Some(sol) => sol,
                None => {
                    let sys = SaddleSystem {
                        m,
                        b: self.div.clone(),
                        d: SparseMatrix::zeros(grid.num_cells(), grid.num_cells()),
                        rhs_flux: rhs_flux.clone(),
                        rhs_scalar: rhs_scalar.clone(),
                        constrained: self.pressure_constraints.clone(),
                    };
                    let factor = self.pressure_solver.factorize(&sys)?;
                    let sol =
                        factor.solve_with(&rhs_flux, &rhs_scalar, &self.pressure_constraints)?;
                    self.pressure_cache = Some((weight.values, factor));
                    sol
                }
            }
        };
        let bu = self.div.mul_vec(&sol.flux);
        let res: f64 = bu
            .iter()
            .zip(&rhs_scalar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        // scaled by the face fluxes too, since B u cancels large opposite DOFs
        let abs_bu: Vec<f64> = (0..grid.num_cells())
            .map(|c| self.div.row(c).map(|(f, v)| (v * sol.flux[f]).abs()).sum())
            .collect();
        let flux_scale = norm2(&abs_bu);
        let scale = norm2(&rhs_scalar).max(flux_scale);
        let div_residual = if scale > 0.0 { res / scale } else { res };
        Ok((
            FluxFieldRT0 { dofs: sol.flux },
            ScalarFieldP0 { values: sol.scalar },
            div_residual,
        ))
    }

    /// Linear mixed saturation solve of one L-scheme iteration at time `t`.
    pub fn saturation_step(
        &self,
        sat_prev_step: &ScalarFieldP0,
        theta_lagged: &ScalarFieldP0,
        u_fresh: &FluxFieldRT0,
        t: f64,
    ) -> Result<(ScalarFieldP0, FluxFieldRT0)> {
        let grid = &self.grid;
        let coeffs = &self.problem.coeffs;
        let sat_lagged = coeffs.saturation_field(theta_lagged);
        let fw: Vec<f64> = sat_lagged
            .values
            .iter()
            .map(|&s| (coeffs.frac_flow)(s))
            .collect();
        let mut rhs_flux = self.weighted_mass_product(&fw, &u_fresh.dofs);
        rhs_flux
            .iter_mut()
            .zip(&self.sat_dirichlet)
            .for_each(|(r, d)| *r += d);
        if let Some(f1) = &coeffs.f1 {
            let load = vector_load(grid, |c, x| f1(x, sat_lagged.values[c]))?;
            rhs_flux.iter_mut().zip(load).for_each(|(r, l)| *r += l);
        }
        let source = coeffs.source_cell_integrals(grid, t)?;
        let vol = grid.cell_measure();
        let l = self.cfg.l;
        let rhs_scalar: Vec<f64> = (0..grid.num_cells())
            .map(|c| {
                (l * vol * theta_lagged.values[c]
                    - vol * (sat_lagged.values[c] - sat_prev_step.values[c]))
                    / self.tau
                    + source[c]
            })
            .collect();
        let sol = self
            .sat_factor
            .solve_with(&rhs_flux, &rhs_scalar, &self.sat_constraints)?;
        Ok((
            ScalarFieldP0 { values: sol.scalar },
            FluxFieldRT0 { dofs: sol.flux },
        ))
    }

    /// Solves one backward Euler step from `prev` by L-scheme iterations
    /// starting at `theta^{n,0} = theta^{n-1}`.
    pub fn l_scheme_solve(
        &mut self,
        prev: &TwoPhaseState,
        step: usize,
    ) -> Result<(TwoPhaseState, IterationHistory)> {
        let t = prev.t + self.tau;
        let mut theta = prev.theta.clone();
        let mut q = prev.q.clone();
        let mut history = IterationHistory {
            step,
            t,
            records: Vec::new(),
            converged: false,
            balance_defect: f64::NAN,
        };
        let mut last_inc: Option<f64> = None;
        let mut result = None;
        for iter in 1..=self.cfg.max_iters {
            let sat_lagged = self.problem.coeffs.saturation_field(&theta);
            let (u, p, div_residual) = self.pressure_step(&sat_lagged)?;
            let (theta_new, q_new) = self.saturation_step(&prev.sat, &theta, &u, t)?;
            let inc_theta = theta_new.l2_distance(&theta, &self.grid);
            let dq = FluxFieldRT0 {
                dofs: q_new.dofs.iter().zip(&q.dofs).map(|(a, b)| a - b).collect(),
            };
            let inc_q = dq.l2_norm(&self.grid);
            let ratio = last_inc.map(|prev_inc| {
                if prev_inc > 0.0 {
                    inc_theta / prev_inc
                } else {
                    0.0
                }
            });
            history.records.push(IterationRecord {
                iter,
                inc_theta,
                inc_q,
                ratio,
                div_residual,
            });
            last_inc = Some(inc_theta);
            let converged =
                inc_theta <= self.cfg.tol_abs + self.cfg.tol_rel * theta_new.l2_norm(&self.grid);
            let theta_prev_iter = std::mem::replace(&mut theta, theta_new);
            q = q_new;
            if converged {
                result = Some((theta_prev_iter, u, p));
                break;
            }
        }
        let Some((theta_prev_iter, u, p)) = result else {
            let last_increment = last_inc.unwrap_or(f64::NAN);
            self.last_history = Some(history);
            return Err(Error::MaxItersExceeded {
                iters: self.cfg.max_iters,
                last_increment,
            });
        };
        let sat = self.problem.coeffs.saturation_field(&theta);
        let state = TwoPhaseState {
            theta,
            sat,
            p,
            q,
            u,
            t,
        };
        history.converged = true;
        history.balance_defect = self.balance_defect(prev, &state)?;
        // the defect is controlled by the last increment through the L-term
        debug_assert!(theta_prev_iter.len() == state.theta.len());
        self.last_history = Some(history.clone());
        Ok((state, history))
    }

    /// Per-cell mass-balance defect densities
    /// `((s^n - s^{n-1}) |T| + tau sum(sign q) - tau int f_s) / |T|`.
    pub fn balance_defects(&self, prev: &TwoPhaseState, next: &TwoPhaseState) -> Result<Vec<f64>> {
        let vol = self.grid.cell_measure();
        let divq = self.div.mul_vec(&next.q.dofs);
        let src = self
            .problem
            .coeffs
            .source_cell_integrals(&self.grid, next.t)?;
        Ok((0..self.grid.num_cells())
            .map(|c| {
                ((next.sat.values[c] - prev.sat.values[c]) * vol + self.tau * (divq[c] - src[c]))
                    / vol
            })
            .collect())
    }

    pub fn balance_defect(&self, prev: &TwoPhaseState, next: &TwoPhaseState) -> Result<f64> {
        Ok(l2_weighted_norm(
            &self.balance_defects(prev, next)?,
            self.grid.cell_measure(),
        ))
    }

    /// Advances `time.n_steps` steps from the initial state. Snapshots are kept
    /// every `cadence` steps (0 keeps only the initial and final states); the
    /// initial state is always the first snapshot.
    pub fn run(
        &mut self,
        time: &TimeGrid,
        cadence: usize,
    ) -> Result<(Snapshots, Vec<IterationHistory>)> {
        if (time.tau - self.tau).abs() > 1e-14 * self.tau {
            return Err(Error::InvalidConfig(format!(
                "time grid step {} differs from the factorized step {}",
                time.tau, self.tau
            )));
        }
        let mut state = self.initial_state()?;
        let mut snapshots = vec![(0, state.clone())];
        let mut histories = Vec::with_capacity(time.n_steps);
        for n in 1..=time.n_steps {
            let (next, hist) = self.l_scheme_solve(&state, n)?;
            histories.push(hist);
            state = next;
            // exact multiple of tau keeps times reproducible
            state.t = time.t(n);
            let keep = if cadence == 0 {
                n == time.n_steps
            } else {
                n % cadence == 0 || n == time.n_steps
            };
            if keep {
                snapshots.push((n, state.clone()));
            }
        }
        Ok((snapshots, histories))
    }

    /// Sup-norm estimate of the total flux from a pressure solve at the initial saturation.
    pub fn estimate_flux_bound(&mut self) -> Result<f64> {
        let init = self.initial_state()?;
        let (u, _, _) = self.pressure_step(&init.sat)?;
        Ok(u.max_face_density(&self.grid))
    }
}

/// One-shot pressure solve.
pub fn pressure_step(
    grid: &StructuredGrid,
    problem: &Problem,
    sat_lagged: &ScalarFieldP0,
    opts: StepperOptions,
) -> Result<(FluxFieldRT0, ScalarFieldP0)> {
    let mut sim = Simulator::new(
        grid.clone(),
        problem.clone(),
        LSchemeConfig::new(problem.default_l.max(problem.coeffs.bounds.l_s)),
        1.0,
        opts,
    )?;
    let (u, p, _) = sim.pressure_step(sat_lagged)?;
    Ok((u, p))
}

/// Runs a whole simulation.
pub fn run_simulation(
    grid: &StructuredGrid,
    problem: &Problem,
    time: &TimeGrid,
    cfg: &LSchemeConfig,
    opts: StepperOptions,
    cadence: usize,
) -> Result<(Snapshots, Vec<IterationHistory>)> {
    let mut sim = Simulator::new(grid.clone(), problem.clone(), *cfg, time.tau, opts)?;
    sim.run(time, cadence)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauReport {
    pub admissible: bool,
    pub tau_max: f64,
    pub c1: f64,
    pub c3: f64,
}

/// Time-step bound under which the L-scheme is a contraction:
///
/// ```text
/// C1 = 4 (M_u^2 L_a^2 + L_f3^2 + 2 a*^2 C^2 L_f2^2) / a_*^2 + (M_u L_a + L_f3)^2 / a*^2
/// C3 = M_fw^2 C1 + (M_u L_fw + L_f1)^2
/// tau_max = 1 / (L (C3 + 4 L_f1^2 + 8 L_fw^2 M_u^2 + 8 C1 M_fw^2))
/// ```
///
/// `c_omega_d` is the discrete inf-sup constant of the mixed pair. It has no
/// computable value and is supplied by the caller.
pub fn check_tau_restriction(
    bounds: &CoefficientBounds,
    l: f64,
    c_omega_d: f64,
    tau: f64,
) -> Result<TauReport> {
    let need = |v: Option<f64>, name: &'static str| v.ok_or(Error::MissingMetadata(name));
    let m_u = need(bounds.m_u, "M_u")?;
    let a_lo = need(bounds.a_lo, "a_*")?;
    let a_hi = need(bounds.a_hi, "a^*")?;
    let l_a = need(bounds.l_a, "L_a")?;
    let l_fw = need(bounds.l_fw, "L_fw")?;
    let m_fw = need(bounds.m_fw, "M_fw")?;
    let l_f1 = need(bounds.l_f1, "L_f1")?;
    let l_f2 = need(bounds.l_f2, "L_f2")?;
    let l_f3 = need(bounds.l_f3, "L_f3")?;
    if !(a_lo > 0.0 && a_hi >= a_lo) {
        return Err(Error::InvalidCoefficients(format!(
            "invalid bounds a_* = {a_lo}, a^* = {a_hi}"
        )));
    }
    if !(l > 0.0) {
        return Err(Error::InvalidConfig(format!("L must be positive, got {l}")));
    }
    let c2 = c_omega_d * c_omega_d;
    let c1 = 4.0 * (m_u * m_u * l_a * l_a + l_f3 * l_f3 + 2.0 * a_hi * a_hi * c2 * l_f2 * l_f2)
        / (a_lo * a_lo)
        + (m_u * l_a + l_f3).powi(2) / (a_hi * a_hi);
    let c3 = m_fw * m_fw * c1 + (m_u * l_fw + l_f1).powi(2);
    let denom =
        l * (c3 + 4.0 * l_f1 * l_f1 + 8.0 * l_fw * l_fw * m_u * m_u + 8.0 * c1 * m_fw * m_fw);
    let tau_max = if denom > 0.0 {
        1.0 / denom
    } else {
        f64::INFINITY
    };
    Ok(TauReport {
        admissible: tau <= tau_max,
        tau_max,
        c1,
        c3,
    })
}
