//! Gauss rules on cells, faces and time intervals, plus adaptive Simpson for 1D integrals.

use crate::error::{Error, Result};
use crate::grid::{Point, StructuredGrid};

const GAUSS2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Two-point Gauss nodes and weights on `[a, b]`.
pub fn gauss2_interval(a: f64, b: f64) -> [(f64, f64); 2] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    GAUSS2.map(|x| (mid + half * x, half))
}

/// Tensor two-point Gauss points on a cell; weights sum to the cell measure.
pub fn cell_points(grid: &StructuredGrid, cell: usize) -> Vec<(Point, f64)> {
    let origin = grid.cell_origin(cell);
    let h = grid.h();
    let dim = grid.dim();
    let weight = grid.cell_measure() / (1 << dim) as f64;
    let mut out = Vec::with_capacity(1 << dim);
    for code in 0..(1usize << dim) {
        let mut p = [0.0; 3];
        for axis in 0..dim {
            let xi = 0.5 * (1.0 + GAUSS2[(code >> axis) & 1]);
            p[axis] = origin[axis] + xi * h[axis];
        }
        out.push((p, weight));
    }
    out
}

/// Tensor two-point Gauss points on a face; weights sum to the face measure.
pub fn face_points(grid: &StructuredGrid, face: usize) -> Result<Vec<(Point, f64)>> {
    let (axis, _) = grid.face_coords(face)?;
    let center = grid.face_center(face)?;
    let dim = grid.dim();
    let h = grid.h();
    let tangential: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
    let weight = grid.face_measure_of_axis(axis) / (1 << tangential.len()) as f64;
    let mut out = Vec::with_capacity(1 << tangential.len());
    for code in 0..(1usize << tangential.len()) {
        let mut p = center;
        for (bit, &a) in tangential.iter().enumerate() {
            p[a] = center[a] + 0.5 * h[a] * GAUSS2[(code >> bit) & 1];
        }
        out.push((p, weight));
    }
    Ok(out)
}

/// Cell integral of `f` by the tensor two-point rule.
pub fn integrate_cell(
    grid: &StructuredGrid,
    cell: usize,
    f: impl Fn(&Point) -> f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for (p, w) in cell_points(grid, cell) {
        let v = f(&p);
        if !v.is_finite() {
            return Err(Error::QuadratureFailure(format!(
                "non-finite integrand {v} at {p:?} in cell {cell}"
            )));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Adaptive Simpson quadrature on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    if !(fa.is_finite() && fm.is_finite() && fb.is_finite()) {
        return Err(Error::QuadratureFailure(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::QuadratureFailure(format!(
            "tolerance {tol:e} not reached on [{a}, {b}] (estimate {:e})",
            delta.abs() / 15.0
        )));
    }
    Ok(
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_rule_exact_for_cubics() {
        let g = StructuredGrid::new(2, &[(0.0, 1.0), (0.0, 2.0)], &[3, 2]).unwrap();
        let f = |p: &Point| p[0].powi(3) * p[1] + p[1].powi(2);
        let total: f64 = (0..g.num_cells())
            .map(|c| integrate_cell(&g, c, f).unwrap())
            .sum();
        // int_0^1 int_0^2 x^3 y + y^2 = (1/4)(2) + 8/3
        assert!((total - (0.5 + 8.0 / 3.0)).abs() < 1e-13);
    }

    #[test]
    fn face_rule_weights() {
        let g = StructuredGrid::unit(3, 2).unwrap();
        for f in 0..g.num_faces() {
            let pts = face_points(&g, f).unwrap();
            assert_eq!(pts.len(), 4);
            let w: f64 = pts.iter().map(|p| p.1).sum();
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn simpson() {
        let v = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
        assert!(adaptive_simpson(&|x: f64| 1.0 / x, 0.0, 1.0, 1e-10).is_err());
    }
}
