//! Piecewise-constant (P0) and lowest-order Raviart–Thomas (RT0) spaces on a
//! [`StructuredGrid`].
//!
//! An RT0 degree of freedom is the total flux through a face along its global
//! normal, not the mean normal component. With this scaling the divergence
//! matrix is the signed cell–face incidence matrix. Inside a cell the `a`-th
//! component of an RT0 field depends only on `x_a` and interpolates linearly
//! between `U_lo / |f_a|` and `U_hi / |f_a|`, where `|f_a|` is the measure of
//! the faces normal to axis `a`.

use crate::error::{Error, Result};
use crate::grid::{BoundarySide, Point, StructuredGrid};
use crate::quadrature::{cell_points, face_points, integrate_cell};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldP0 {
    pub values: Vec<f64>,
}

impl ScalarFieldP0 {
    pub fn zeros(grid: &StructuredGrid) -> Self {
        Self {
            values: vec![0.0; grid.num_cells()],
        }
    }

    pub fn constant(grid: &StructuredGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.num_cells()],
        }
    }

    pub fn from_values(grid: &StructuredGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::LengthMismatch {
                what: "P0 field",
                expected: grid.num_cells(),
                got: values.len(),
            });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn l2_norm(&self, grid: &StructuredGrid) -> f64 {
        (grid.cell_measure() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// L2 norm of `self - other`.
    pub fn l2_distance(&self, other: &Self, grid: &StructuredGrid) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (grid.cell_measure() * s).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> Option<usize> {
        self.values
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxFieldRT0 {
    pub dofs: Vec<f64>,
}

impl FluxFieldRT0 {
    pub fn zeros(grid: &StructuredGrid) -> Self {
        Self {
            dofs: vec![0.0; grid.num_faces()],
        }
    }

    pub fn from_dofs(grid: &StructuredGrid, dofs: Vec<f64>) -> Result<Self> {
        if dofs.len() != grid.num_faces() {
            return Err(Error::LengthMismatch {
                what: "RT0 field",
                expected: grid.num_faces(),
                got: dofs.len(),
            });
        }
        Ok(Self { dofs })
    }

    /// Per-cell divergence integrals.
    pub fn divergence_integrals(&self, grid: &StructuredGrid) -> Vec<f64> {
        (0..grid.num_cells())
            .map(|c| {
                (0..grid.dim())
                    .map(|axis| {
                        let (lo, hi) = grid.cell_faces_on_axis(c, axis);
                        self.dofs[hi] - self.dofs[lo]
                    })
                    .sum()
            })
            .collect()
    }

    /// Point value of the field inside `cell`.
    pub fn value_in_cell(&self, grid: &StructuredGrid, cell: usize, p: &Point) -> [f64; 3] {
        let origin = grid.cell_origin(cell);
        let mut v = [0.0; 3];
        for axis in 0..grid.dim() {
            let (lo, hi) = grid.cell_faces_on_axis(cell, axis);
            let xi = (p[axis] - origin[axis]) / grid.h()[axis];
            v[axis] =
                ((1.0 - xi) * self.dofs[lo] + xi * self.dofs[hi]) / grid.face_measure_of_axis(axis);
        }
        v
    }

    /// L2 norm, computed with the exact unweighted mass matrix.
    pub fn l2_norm(&self, grid: &StructuredGrid) -> f64 {
        let mu = apply_mass_rt0(grid, &vec![1.0; grid.num_cells()], &self.dofs);
        self.dofs
            .iter()
            .zip(&mu)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// Largest mean normal flux density over all faces, `max |U_f| / |f|`.
    pub fn max_face_density(&self, grid: &StructuredGrid) -> f64 {
        (0..grid.dim())
            .flat_map(|axis| {
                let m = grid.face_measure_of_axis(axis);
                self.dofs[grid.faces_of_axis(axis)]
                    .iter()
                    .map(move |u| u.abs() / m)
            })
            .fold(0.0, f64::max)
    }
}

/// L2 projection onto P0: cell averages by the tensor two-point Gauss rule.
pub fn project_p0(grid: &StructuredGrid, f: impl Fn(&Point) -> f64) -> Result<ScalarFieldP0> {
    let inv = 1.0 / grid.cell_measure();
    let values = (0..grid.num_cells())
        .map(|c| integrate_cell(grid, c, &f).map(|v| v * inv))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalarFieldP0 { values })
}

/// RT0 interpolant: face DOF is the integral of `v . n` over the face.
pub fn project_rt0(grid: &StructuredGrid, v: impl Fn(&Point) -> [f64; 3]) -> Result<FluxFieldRT0> {
    let mut dofs = vec![0.0; grid.num_faces()];
    for (face, dof) in dofs.iter_mut().enumerate() {
        let (axis, _) = grid.face_coords(face)?;
        for (p, w) in face_points(grid, face)? {
            let val = v(&p)[axis];
            if !val.is_finite() {
                return Err(Error::QuadratureFailure(format!(
                    "non-finite normal trace at {p:?}"
                )));
            }
            *dof += w * val;
        }
    }
    Ok(FluxFieldRT0 { dofs })
}

/// Divergence matrix `B` (cells x faces) with `B[cell, face]` = incidence sign.
pub fn assemble_div(grid: &StructuredGrid) -> SparseMatrix {
    let mut t = Vec::with_capacity(2 * grid.dim() * grid.num_cells());
    for c in 0..grid.num_cells() {
        for axis in 0..grid.dim() {
            let (lo, hi) = grid.cell_faces_on_axis(c, axis);
            t.push((c, lo, -1.0));
            t.push((c, hi, 1.0));
        }
    }
    SparseMatrix::from_triplets(grid.num_cells(), grid.num_faces(), &t)
        .expect("incidence indices are in range")
}

/// Reference 2x2 block of the RT0 mass matrix along one axis for a unit-measure cell.
pub const LOCAL_MASS: [[f64; 2]; 2] = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];

fn check_weight(grid: &StructuredGrid, weight: &[f64]) -> Result<()> {
    if weight.len() != grid.num_cells() {
        return Err(Error::LengthMismatch {
            what: "mass weight",
            expected: grid.num_cells(),
            got: weight.len(),
        });
    }
    if let Some((cell, &value)) = weight
        .iter()
        .enumerate()
        .find(|&(_, &w)| !(w > 0.0 && w.is_finite()))
    {
        return Err(Error::NonPositiveWeight { cell, value });
    }
    Ok(())
}

fn axis_scale(grid: &StructuredGrid, axis: usize) -> f64 {
    let fm = grid.face_measure_of_axis(axis);
    grid.cell_measure() / (fm * fm)
}

/// Weighted RT0 mass matrix `M[f, g] = sum_T w_T int_T phi_f . phi_g`, integrated exactly.
pub fn assemble_mass_rt0(grid: &StructuredGrid, weight: &ScalarFieldP0) -> Result<SparseMatrix> {
    check_weight(grid, &weight.values)?;
    let mut t = Vec::with_capacity(4 * grid.dim() * grid.num_cells());
    for (c, &w) in weight.values.iter().enumerate() {
        for axis in 0..grid.dim() {
            let scale = w * axis_scale(grid, axis);
            let (lo, hi) = grid.cell_faces_on_axis(c, axis);
            let idx = [lo, hi];
            for a in 0..2 {
                for b in 0..2 {
                    t.push((idx[a], idx[b], scale * LOCAL_MASS[a][b]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(grid.num_faces(), grid.num_faces(), &t)
}

/// Row-sum lumped version of [`assemble_mass_rt0`]; diagonal.
pub fn assemble_mass_rt0_lumped(
    grid: &StructuredGrid,
    weight: &ScalarFieldP0,
) -> Result<SparseMatrix> {
    check_weight(grid, &weight.values)?;
    let mut diag = vec![0.0; grid.num_faces()];
    for (c, &w) in weight.values.iter().enumerate() {
        for axis in 0..grid.dim() {
            let half = 0.5 * w * axis_scale(grid, axis);
            let (lo, hi) = grid.cell_faces_on_axis(c, axis);
            diag[lo] += half;
            diag[hi] += half;
        }
    }
    Ok(SparseMatrix::diagonal(&diag))
}

/// Matrix-free product with the weighted mass matrix. Weights may be zero or negative.
pub fn apply_mass_rt0(grid: &StructuredGrid, weight: &[f64], dofs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grid.num_faces()];
    for (c, &w) in weight.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for axis in 0..grid.dim() {
            let scale = w * axis_scale(grid, axis);
            let (lo, hi) = grid.cell_faces_on_axis(c, axis);
            out[lo] += scale * (LOCAL_MASS[0][0] * dofs[lo] + LOCAL_MASS[0][1] * dofs[hi]);
            out[hi] += scale * (LOCAL_MASS[1][0] * dofs[lo] + LOCAL_MASS[1][1] * dofs[hi]);
        }
    }
    out
}

/// Load vector `F[f] = <g, phi_f>` for a vector field `g(cell, x)` that may
/// depend on the cell (e.g. through a cellwise saturation).
pub fn vector_load(
    grid: &StructuredGrid,
    g: impl Fn(usize, &Point) -> [f64; 3],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid.num_faces()];
    for c in 0..grid.num_cells() {
        let origin = grid.cell_origin(c);
        for (p, w) in cell_points(grid, c) {
            let val = g(c, &p);
            for axis in 0..grid.dim() {
                if val[axis] == 0.0 {
                    continue;
                }
                if !val[axis].is_finite() {
                    return Err(Error::QuadratureFailure(format!(
                        "non-finite vector load at {p:?}"
                    )));
                }
                let xi = (p[axis] - origin[axis]) / grid.h()[axis];
                let fm = grid.face_measure_of_axis(axis);
                let (lo, hi) = grid.cell_faces_on_axis(c, axis);
                out[lo] += w * val[axis] * (1.0 - xi) / fm;
                out[hi] += w * val[axis] * xi / fm;
            }
        }
    }
    Ok(out)
}

/// Natural-boundary load for Dirichlet data `g_d` on the listed sides:
/// `load[f] = -<g_d, phi_f . n_out>` on those faces and zero elsewhere.
pub fn boundary_pressure_load(
    grid: &StructuredGrid,
    sides: &[BoundarySide],
    g_d: impl Fn(&Point) -> f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid.num_faces()];
    for &side in sides {
        for face in grid.boundary_faces(side) {
            let fm = grid.face_measure(face)?;
            let integral: f64 = face_points(grid, face)?
                .into_iter()
                .map(|(p, w)| w * g_d(&p))
                .sum();
            if !integral.is_finite() {
                return Err(Error::QuadratureFailure(format!(
                    "non-finite boundary data on face {face}"
                )));
            }
            out[face] -= side.outward_sign() * integral / fm;
        }
    }
    Ok(out)
}
