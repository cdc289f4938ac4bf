//! Oracles shared by the integration test targets. Nothing here calls into the
//! finite element code; basis functions and quadrature are rebuilt from the
//! grid geometry alone.

#![allow(dead_code)]

use std::sync::Arc;

use lscheme_core::StructuredGrid;
use lscheme_core::model::{Problem, builtin_manufactured_2d};

/// Three-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss3(a: f64, b: f64) -> [(f64, f64); 3] {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let x = (0.6f64).sqrt();
    [
        (m - r * x, r * 5.0 / 9.0),
        (m, r * 8.0 / 9.0),
        (m + r * x, r * 5.0 / 9.0),
    ]
}

/// Tensor Gauss points of a cell as `(point, weight)`.
pub fn cell_rule(grid: &StructuredGrid, cell: usize) -> Vec<([f64; 3], f64)> {
    let o = grid.cell_origin(cell);
    let h = grid.h();
    let mut pts = vec![([0.0; 3], 1.0)];
    for axis in 0..grid.dim() {
        let mut next = Vec::with_capacity(pts.len() * 3);
        for (p, w) in &pts {
            for (x, wx) in gauss3(o[axis], o[axis] + h[axis]) {
                let mut q = *p;
                q[axis] = x;
                next.push((q, w * wx));
            }
        }
        pts = next;
    }
    pts
}

/// RT0 basis of `cell` for a total-flux DOF on the face normal to `axis`
/// (`hi` selects the upper face), evaluated at `x`.
pub fn basis(grid: &StructuredGrid, cell: usize, axis: usize, hi: bool, x: &[f64; 3]) -> [f64; 3] {
    let o = grid.cell_origin(cell);
    let h = grid.h();
    let face_area: f64 = (0..grid.dim())
        .filter(|&a| a != axis)
        .map(|a| h[a])
        .product();
    let t = (x[axis] - o[axis]) / h[axis];
    let mut v = [0.0; 3];
    v[axis] = if hi { t } else { 1.0 - t } / face_area;
    v
}

/// Local mass matrix of `cell` over its faces ordered (axis, lo/hi), by quadrature.
pub fn local_mass(grid: &StructuredGrid, cell: usize) -> Vec<Vec<f64>> {
    let local: Vec<(usize, bool)> = (0..grid.dim())
        .flat_map(|a| [(a, false), (a, true)])
        .collect();
    let rule = cell_rule(grid, cell);
    local
        .iter()
        .map(|&(ai, hi_i)| {
            local
                .iter()
                .map(|&(aj, hi_j)| {
                    rule.iter()
                        .map(|(x, w)| {
                            let (u, v) = (
                                basis(grid, cell, ai, hi_i, x),
                                basis(grid, cell, aj, hi_j, x),
                            );
                            w * (u[0] * v[0] + u[1] * v[1] + u[2] * v[2])
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Dense Cholesky; `None` unless the matrix is symmetric positive definite.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                return None;
            }
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Unit square with `a = 1`, `f2 = 1` and homogeneous Dirichlet pressure.
/// On one cell the hand solution is `U = 1/4` outward on every face and `p = 1/24`.
pub fn unit_source_problem() -> Problem {
    let mut pb = builtin_manufactured_2d(1.0);
    pb.coeffs.f2 = Some(Arc::new(|_, _| 1.0));
    pb
}
