//! Space-time error functionals, convergence rates and L-scheme contraction diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::model::ManufacturedSolution;
use crate::quadrature::{cell_points, gauss2_interval};
use crate::stepper::{IterationHistory, TimeGrid, TwoPhaseState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h: f64,
    pub tau: f64,
    pub e_p: f64,
    pub e_theta: f64,
    pub e_s: f64,
    pub e_stheta: f64,
    /// `|| sum_n int (q - q_h^n) dt ||^2` at the final time, when the exact flux is known.
    pub e_q: Option<f64>,
}

impl ErrorReport {
    /// Values in table column order: `E_p, E_stheta, E_theta, E_s`.
    pub fn columns(&self) -> [f64; 4] {
        [self.e_p, self.e_stheta, self.e_theta, self.e_s]
    }
}

pub const COLUMN_NAMES: [&str; 4] = ["p", "stheta", "theta", "s"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub report: ErrorReport,
    /// Rates against the previous row in column order; `None` on the first row.
    pub rates: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn from_reports(reports: impl IntoIterator<Item = ErrorReport>) -> Self {
        Self {
            rows: reports
                .into_iter()
                .map(|report| ConvergenceRow {
                    report,
                    rates: None,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Finds the snapshot for each step `1..=n_steps`.
fn snapshots_by_step(
    snapshots: &[(usize, TwoPhaseState)],
    n_steps: usize,
) -> Result<Vec<&TwoPhaseState>> {
    (1..=n_steps)
        .map(|n| {
            snapshots
                .iter()
                .find(|(k, _)| *k == n)
                .map(|(_, s)| s)
                .ok_or(Error::MissingSnapshot(n))
        })
        .collect()
}

/// Error functionals of a run against a manufactured solution. `snapshots`
/// must contain every step `1..=n_steps`.
pub fn compute_errors(
    snapshots: &[(usize, TwoPhaseState)],
    exact: &ManufacturedSolution,
    grid: &StructuredGrid,
    time: &TimeGrid,
) -> Result<ErrorReport> {
    let states = snapshots_by_step(snapshots, time.n_steps)?;
    let tau = time.tau;
    let nc = grid.num_cells();
    let cell_pts: Vec<_> = (0..nc).map(|c| cell_points(grid, c)).collect();
    let (mut e_p, mut e_theta, mut e_s, mut e_stheta) = (0.0, 0.0, 0.0, 0.0);
    let mut q_acc = vec![vec![[0.0f64; 3]; 1 << grid.dim()]; nc];
    for n in 1..=time.n_steps {
        let st = states[n - 1];
        for len in [st.theta.len(), st.sat.len(), st.p.len()] {
            if len != nc {
                return Err(Error::LengthMismatch {
                    what: "snapshot field",
                    expected: nc,
                    got: len,
                });
            }
        }
        let t_rule = gauss2_interval(time.t(n - 1), time.t(n));
        for (c, pts) in cell_pts.iter().enumerate() {
            let (th_h, s_h, p_h) = (st.theta.values[c], st.sat.values[c], st.p.values[c]);
            for (k, (x, w)) in pts.iter().enumerate() {
                let mut p_bar = 0.0;
                for &(t, wt) in &t_rule {
                    p_bar += wt * (exact.p)(t, x);
                    let th = (exact.theta)(t, x);
                    let s = (exact.s)(t, x);
                    e_theta += wt * w * (th - th_h).powi(2);
                    e_s += wt * w * (s - s_h).powi(2);
                    e_stheta += wt * w * (s - s_h) * (th - th_h);
                    let qv = (exact.q)(t, x);
                    let qh = st.q.value_in_cell(grid, c, x);
                    for a in 0..3 {
                        q_acc[c][k][a] += wt * (qv[a] - qh[a]);
                    }
                }
                p_bar /= tau;
                e_p += tau * w * (p_bar - p_h).powi(2);
            }
        }
    }
    let e_q = if time.n_steps > 0 {
        let mut acc = 0.0;
        for (pts, qs) in cell_pts.iter().zip(&q_acc) {
            for ((_, w), v) in pts.iter().zip(qs) {
                acc += w * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            }
        }
        Some(acc)
    } else {
        None
    };
    let report = ErrorReport {
        h: grid.h_max(),
        tau,
        e_p,
        e_theta,
        e_s,
        e_stheta,
        e_q,
    };
    for v in report.columns() {
        if !v.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite error functional in {report:?}"
            )));
        }
    }
    Ok(report)
}

/// Fills `rate = (log E(i+1) - log E(i)) / (log h(i+1) - log h(i))` for every
/// row after the first.
pub fn compute_rates(table: &ConvergenceTable) -> Result<ConvergenceTable> {
    if table.rows.len() < 2 {
        return Err(Error::InsufficientRows(table.rows.len()));
    }
    let mut out = table.clone();
    out.rows[0].rates = None;
    for i in 1..out.rows.len() {
        let (prev, cur) = (&table.rows[i - 1].report, &table.rows[i].report);
        let dh = cur.h.ln() - prev.h.ln();
        let (pc, cc) = (prev.columns(), cur.columns());
        let rates = std::array::from_fn(|k| {
            if pc[k] == cc[k] {
                0.0
            } else {
                (cc[k].ln() - pc[k].ln()) / dh
            }
        });
        out.rows[i].rates = Some(rates);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepContraction {
    pub step: usize,
    pub iterations: usize,
    /// Geometric mean of `inc(i) / inc(i-1)` over `i >= 2`; `None` with fewer than three iterations.
    pub rho: Option<f64>,
    /// Geometric standard deviation `exp(std(ln ratio))` of the same ratios.
    pub ratio_gsd: Option<f64>,
    pub max_ratio: Option<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSummary {
    pub steps: Vec<StepContraction>,
    pub max_iterations: usize,
    pub mean_iterations: f64,
}

fn step_contraction(hist: &IterationHistory) -> StepContraction {
    let incs: Vec<f64> = hist.records.iter().map(|r| r.inc_theta).collect();
    let monotone = incs.windows(2).all(|w| w[1] <= w[0]);
    // ratio for iteration i uses inc(i) / inc(i-1); i = 2 is the first ratio
    let logs: Vec<f64> = incs
        .windows(2)
        .filter(|w| w[0] > 0.0 && w[1] > 0.0)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    let (rho, gsd, max_ratio) = if incs.len() >= 3 && !logs.is_empty() {
        let n = logs.len() as f64;
        let mean = logs.iter().sum::<f64>() / n;
        let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
        (Some(mean.exp()), Some(var.sqrt().exp()), Some(max))
    } else {
        (None, None, None)
    };
    StepContraction {
        step: hist.step,
        iterations: incs.len(),
        rho,
        ratio_gsd: gsd,
        max_ratio,
        monotone,
    }
}

/// Per-step contraction factors. Requires at least one step with three or more iterations.
pub fn contraction_diagnostics(histories: &[IterationHistory]) -> Result<ContractionSummary> {
    let max_iterations = histories.iter().map(|h| h.iterations()).max().unwrap_or(0);
    if max_iterations < 3 {
        return Err(Error::TooFewIterations(max_iterations));
    }
    let steps: Vec<StepContraction> = histories.iter().map(step_contraction).collect();
    let mean_iterations =
        histories.iter().map(|h| h.iterations() as f64).sum::<f64>() / histories.len() as f64;
    Ok(ContractionSummary {
        steps,
        max_iterations,
        mean_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{FluxFieldRT0, ScalarFieldP0};
    use crate::stepper::IterationRecord;

    fn report(h: f64, e: f64) -> ErrorReport {
        ErrorReport {
            h,
            tau: h * h,
            e_p: e,
            e_theta: e,
            e_s: e,
            e_stheta: e,
            e_q: None,
        }
    }

    #[test]
    fn rates_from_reference_table_values() {
        let t = ConvergenceTable::from_reports([
            ErrorReport {
                e_p: 1.96e-4,
                ..report(0.25, 1.0)
            },
            ErrorReport {
                e_p: 4.48e-5,
                ..report(0.125, 1.0)
            },
        ]);
        let r = compute_rates(&t).unwrap().rows[1].rates.unwrap();
        assert!((r[0] - 2.13).abs() < 5e-3, "{}", r[0]);
        assert_eq!(r[1], 0.0);
    }

    #[test]
    fn rates_exact_square() {
        let rows: Vec<_> = (0..4)
            .map(|k| {
                let h = 0.25 / 2f64.powi(k);
                report(h, 3.0 * h * h)
            })
            .collect();
        let t = compute_rates(&ConvergenceTable::from_reports(rows)).unwrap();
        assert!(t.rows[0].rates.is_none());
        for row in &t.rows[1..] {
            for r in row.rates.unwrap() {
                assert!((r - 2.0).abs() < 1e-12);
            }
        }
        assert!(matches!(
            compute_rates(&ConvergenceTable::from_reports([report(1.0, 1.0)])),
            Err(Error::InsufficientRows(1))
        ));
    }

    fn history(incs: &[f64]) -> IterationHistory {
        IterationHistory {
            step: 1,
            t: 1.0,
            records: incs
                .iter()
                .enumerate()
                .map(|(i, &inc)| IterationRecord {
                    iter: i + 1,
                    inc_theta: inc,
                    inc_q: 0.0,
                    ratio: None,
                    div_residual: 0.0,
                })
                .collect(),
            converged: true,
            balance_defect: 0.0,
        }
    }

    #[test]
    fn geometric_sequence() {
        let s = contraction_diagnostics(&[history(&[1.0, 0.1, 0.01, 0.001])]).unwrap();
        let st = &s.steps[0];
        assert!((st.rho.unwrap() - 0.1).abs() < 1e-12);
        assert!((st.ratio_gsd.unwrap() - 1.0).abs() < 1e-12);
        assert!(st.monotone);
        assert_eq!(s.max_iterations, 4);
        let bumpy = contraction_diagnostics(&[history(&[1.0, 0.1, 0.2, 0.01])]).unwrap();
        assert!(!bumpy.steps[0].monotone);
        assert!(matches!(
            contraction_diagnostics(&[history(&[1.0, 0.1])]),
            Err(Error::TooFewIterations(2))
        ));
    }

    #[test]
    fn zero_everything_gives_zero_errors() {
        let grid = StructuredGrid::unit(2, 2).unwrap();
        let time = TimeGrid::new(0.5, 2).unwrap();
        let zero = TwoPhaseState {
            theta: ScalarFieldP0::zeros(&grid),
            sat: ScalarFieldP0::zeros(&grid),
            p: ScalarFieldP0::zeros(&grid),
            q: FluxFieldRT0::zeros(&grid),
            u: FluxFieldRT0::zeros(&grid),
            t: 0.0,
        };
        let snaps: Vec<_> = (0..=2).map(|n| (n, zero.clone())).collect();
        let r = compute_errors(&snaps, &ManufacturedSolution::zero(), &grid, &time).unwrap();
        assert_eq!(r.columns(), [0.0; 4]);
        assert_eq!(r.e_q, Some(0.0));
        assert!(matches!(
            compute_errors(&snaps[..2], &ManufacturedSolution::zero(), &grid, &time),
            Err(Error::MissingSnapshot(2))
        ));
    }
}
