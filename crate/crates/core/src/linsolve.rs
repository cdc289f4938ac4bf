//! Saddle-point systems of the mixed discretization
//!
//! ```text
//! [ M  -B^T ] [flux  ]   [rhs_flux  ]
//! [ B   D   ] [scalar] = [rhs_scalar]
//! ```
//!
//! with `M` symmetric positive definite, `B` the signed incidence matrix and
//! `D` diagonal and nonnegative. Constrained face DOFs are eliminated before
//! factorization. When `D = 0` and no free face touches the boundary, the
//! scalar is only defined up to a constant and its sum is pinned to zero
//! through one extra multiplier.
//!
//! Factorization is a sparse LU with partial pivoting (faer). The symbolic
//! analysis is cached and reused while the sparsity pattern is unchanged.

use std::collections::BTreeMap;

use faer::Mat;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Residuals of both block rows must satisfy `|r| <= RESIDUAL_TOL * (1 + |rhs|)`.
pub const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub m: SparseMatrix,
    pub b: SparseMatrix,
    pub d: SparseMatrix,
    pub rhs_flux: Vec<f64>,
    pub rhs_scalar: Vec<f64>,
    /// Prescribed face DOFs as `(face, value)`.
    pub constrained: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub flux: Vec<f64>,
    pub scalar: Vec<f64>,
    /// Multiplier of the zero-sum gauge, when one was needed.
    pub gauge_multiplier: Option<f64>,
}

impl SaddleSystem {
    pub fn num_faces(&self) -> usize {
        self.m.nrows()
    }

    pub fn num_cells(&self) -> usize {
        self.b.nrows()
    }

    fn validate(&self) -> Result<BTreeMap<usize, f64>> {
        let (nf, nc) = (self.num_faces(), self.num_cells());
        let shape_err = |what: &'static str, expected: usize, got: usize| Error::LengthMismatch {
            what,
            expected,
            got,
        };
        if self.m.ncols() != nf {
            return Err(shape_err("M columns", nf, self.m.ncols()));
        }
        if self.b.ncols() != nf {
            return Err(shape_err("B columns", nf, self.b.ncols()));
        }
        if self.d.nrows() != nc || self.d.ncols() != nc {
            return Err(shape_err("D rows", nc, self.d.nrows()));
        }
        if self.rhs_flux.len() != nf {
            return Err(shape_err("flux rhs", nf, self.rhs_flux.len()));
        }
        if self.rhs_scalar.len() != nc {
            return Err(shape_err("scalar rhs", nc, self.rhs_scalar.len()));
        }
        if !self.d.is_diagonal() || self.d.triplets().any(|(_, _, v)| v < 0.0) {
            return Err(Error::SingularSystem(
                "D block must be diagonal and nonnegative".into(),
            ));
        }
        for (what, v) in [
            ("flux rhs", &self.rhs_flux),
            ("scalar rhs", &self.rhs_scalar),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::SingularSystem(format!("non-finite entry in {what}")));
            }
        }
        constraint_map(&self.constrained, nf)
    }

    /// Block residuals `(M u - B^T p - f, B u + D p - g)` for a candidate solution.
    pub fn residuals(&self, flux: &[f64], scalar: &[f64]) -> (Vec<f64>, Vec<f64>) {
        block_residuals(self, &self.rhs_flux, &self.rhs_scalar, flux, scalar)
    }
}

fn constraint_map(constrained: &[(usize, f64)], nf: usize) -> Result<BTreeMap<usize, f64>> {
    let mut constraints = BTreeMap::new();
    for &(face, value) in constrained {
        if face >= nf {
            return Err(Error::IndexOutOfRange {
                what: "constrained face",
                index: face,
                len: nf,
            });
        }
        if !value.is_finite() {
            return Err(Error::SingularSystem(format!(
                "non-finite constraint value on face {face}"
            )));
        }
        if let Some(&prev) = constraints.get(&face)
            && prev != value
        {
            return Err(Error::ConstraintConflict {
                face,
                first: prev,
                second: value,
            });
        }
        constraints.insert(face, value);
    }
    Ok(constraints)
}

fn block_residuals(
    sys: &SaddleSystem,
    rhs_flux: &[f64],
    rhs_scalar: &[f64],
    flux: &[f64],
    scalar: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    block_residuals_with(sys, &sys.m, rhs_flux, rhs_scalar, flux, scalar)
}

/// As [`block_residuals`] with `m` in place of the system's mass block.
fn block_residuals_with(
    sys: &SaddleSystem,
    m: &SparseMatrix,
    rhs_flux: &[f64],
    rhs_scalar: &[f64],
    flux: &[f64],
    scalar: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mu = m.mul_vec(flux);
    let btp = sys.b.mul_transpose_vec(scalar);
    let r1 = (0..sys.num_faces())
        .map(|f| mu[f] - btp[f] - rhs_flux[f])
        .collect();
    let bu = sys.b.mul_vec(flux);
    let dp = sys.d.mul_vec(scalar);
    let r2 = (0..sys.num_cells())
        .map(|c| bu[c] + dp[c] - rhs_scalar[c])
        .collect();
    (r1, r2)
}

/// Reduced system layout: which faces are free and whether a gauge is needed.
#[derive(Debug, Clone, PartialEq)]
struct Layout {
    free_of_face: Vec<Option<usize>>,
    free_faces: Vec<usize>,
    num_cells: usize,
    gauge: bool,
}

impl Layout {
    fn new(sys: &SaddleSystem, constraints: &BTreeMap<usize, f64>) -> Self {
        let nf = sys.num_faces();
        let free_faces: Vec<usize> = (0..nf).filter(|f| !constraints.contains_key(f)).collect();
        let mut free_of_face = vec![None; nf];
        for (i, &f) in free_faces.iter().enumerate() {
            free_of_face[f] = Some(i);
        }
        // the constant scalar is in the kernel of B^T on free faces iff every
        // free column of B sums to zero
        let d_zero = sys.d.triplets().all(|(_, _, v)| v == 0.0);
        let gauge = d_zero && {
            let sums = sys.b.mul_transpose_vec(&vec![1.0; sys.num_cells()]);
            free_faces.iter().all(|&f| sums[f] == 0.0)
        };
        Self {
            free_of_face,
            free_faces,
            num_cells: sys.num_cells(),
            gauge,
        }
    }

    fn size(&self) -> usize {
        self.free_faces.len() + self.num_cells + self.gauge as usize
    }

    fn cell_col(&self, c: usize) -> usize {
        self.free_faces.len() + c
    }
}

/// A factorized reduced saddle matrix; reusable for any right-hand side and
/// any constraint values on the same constrained face set.
pub struct SaddleFactorization {
    layout: Layout,
    system: SaddleSystem,
    lu: Lu<usize, f64>,
}

/// Caches the symbolic LU analysis between factorizations with the same pattern.
#[derive(Default)]
pub struct SaddleSolver {
    cached: Option<(Vec<usize>, Vec<usize>, SymbolicLu<usize>)>,
}

impl SaddleSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factorize(&mut self, sys: &SaddleSystem) -> Result<SaddleFactorization> {
        let constraints = sys.validate()?;
        let layout = Layout::new(sys, &constraints);
        let n = layout.size();
        let mut trip = Vec::with_capacity(sys.m.nnz() + 2 * sys.b.nnz() + 2 * layout.num_cells + 1);
        for (i, &f) in layout.free_faces.iter().enumerate() {
            for (g, v) in sys.m.row(f) {
                if let Some(j) = layout.free_of_face[g] {
                    trip.push(Triplet::new(i, j, v));
                }
            }
        }
        for c in 0..layout.num_cells {
            let row = layout.cell_col(c);
            for (f, v) in sys.b.row(c) {
                if let Some(j) = layout.free_of_face[f] {
                    trip.push(Triplet::new(row, j, v));
                    trip.push(Triplet::new(j, row, -v));
                }
            }
            // explicit diagonal entry keeps the pattern independent of D's values
            trip.push(Triplet::new(row, row, sys.d.get(c, c)));
            if layout.gauge {
                trip.push(Triplet::new(row, n - 1, 1.0));
                trip.push(Triplet::new(n - 1, row, 1.0));
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| Error::SingularSystem(format!("matrix assembly failed: {e:?}")))?;
        let symbolic = {
            let sym = mat.symbolic();
            let reuse = matches!(&self.cached, Some((cp, ri, _)) if cp.as_slice() == sym.col_ptr() && ri.as_slice() == sym.row_idx());
            if !reuse {
                let s = SymbolicLu::try_new(sym)
                    .map_err(|e| Error::SingularSystem(format!("symbolic analysis: {e:?}")))?;
                self.cached = Some((sym.col_ptr().to_vec(), sym.row_idx().to_vec(), s));
            }
            self.cached.as_ref().unwrap().2.clone()
        };
        let lu = Lu::try_new_with_symbolic(symbolic, mat.as_ref())
            .map_err(|e| Error::SingularSystem(format!("numeric factorization: {e:?}")))?;
        let mut system = sys.clone();
        system.constrained = constraints.into_iter().collect();
        Ok(SaddleFactorization { layout, system, lu })
    }
}

impl SaddleFactorization {
    pub fn has_gauge(&self) -> bool {
        self.layout.gauge
    }

    /// Solves with the stored matrix and the stored right-hand side.
    pub fn solve_stored(&self) -> Result<SaddleSolution> {
        self.solve_with(
            &self.system.rhs_flux,
            &self.system.rhs_scalar,
            &self.system.constrained,
        )
    }

    /// Solves with new right-hand sides and constraint values. The constrained
    /// face set must be the one the factorization was built with.
    pub fn solve_with(
        &self,
        rhs_flux: &[f64],
        rhs_scalar: &[f64],
        constrained: &[(usize, f64)],
    ) -> Result<SaddleSolution> {
        let (sol, res, tol) = self.refine(
            &self.system.m,
            rhs_flux,
            rhs_scalar,
            constrained,
            REFINEMENT_STEPS,
        )?;
        if res > tol {
            return Err(Error::SingularSystem(format!(
                "residual {res:e} exceeds tolerance {tol:e}"
            )));
        }
        Ok(sol)
    }

    /// Solves the system whose mass block is `m` (same pattern roles for `B`,
    /// `D` and the constrained faces) by iterative refinement preconditioned
    /// with this factorization. Returns `None` if the residual tolerance is not
    /// reached within `max_steps` corrections, which happens when `m` is far
    /// from the factorized mass block.
    pub fn solve_preconditioned(
        &self,
        m: &SparseMatrix,
        rhs_flux: &[f64],
        rhs_scalar: &[f64],
        constrained: &[(usize, f64)],
        max_steps: usize,
    ) -> Result<Option<SaddleSolution>> {
        let nf = self.system.num_faces();
        if m.nrows() != nf || m.ncols() != nf {
            return Err(Error::LengthMismatch {
                what: "mass block",
                expected: nf,
                got: m.nrows(),
            });
        }
        let (sol, res, tol) = self.refine(m, rhs_flux, rhs_scalar, constrained, max_steps)?;
        Ok((res <= tol).then_some(sol))
    }

    /// Refinement loop shared by the solves. Returns the iterate, its largest
    /// block residual and the acceptance tolerance.
    fn refine(
        &self,
        m: &SparseMatrix,
        rhs_flux: &[f64],
        rhs_scalar: &[f64],
        constrained: &[(usize, f64)],
        max_steps: usize,
    ) -> Result<(SaddleSolution, f64, f64)> {
        let sys = &self.system;
        let nf = sys.num_faces();
        if rhs_flux.len() != nf {
            return Err(Error::LengthMismatch {
                what: "flux rhs",
                expected: nf,
                got: rhs_flux.len(),
            });
        }
        if rhs_scalar.len() != sys.num_cells() {
            return Err(Error::LengthMismatch {
                what: "scalar rhs",
                expected: sys.num_cells(),
                got: rhs_scalar.len(),
            });
        }
        let constraints = constraint_map(constrained, nf)?;
        if constraints.len() != self.system.constrained.len()
            || self
                .system
                .constrained
                .iter()
                .any(|(f, _)| !constraints.contains_key(f))
        {
            return Err(Error::SingularSystem(
                "constrained face set differs from the factorized one".into(),
            ));
        }
        let lay = &self.layout;
        let mut flux = vec![0.0; nf];
        for (&f, &v) in &constraints {
            flux[f] = v;
        }
        let mut scalar = vec![0.0; lay.num_cells];
        let mut multiplier = 0.0;
        let rhs_norm = norm(rhs_flux).max(norm(rhs_scalar));
        let tol = RESIDUAL_TOL * (1.0 + rhs_norm);
        let mut prev_res = f64::INFINITY;

        for step in 0..=max_steps {
            let (r1, r2) = block_residuals_with(sys, m, rhs_flux, rhs_scalar, &flux, &scalar);
            let (n1, n2) = free_norms(lay, &r1, &r2, multiplier);
            let gauge_res = if lay.gauge {
                scalar.iter().sum::<f64>().abs()
            } else {
                0.0
            };
            let res = n1.max(n2).max(gauge_res);
            if step > 0 && (res <= tol * 1e-3 || !(res < prev_res)) {
                break;
            }
            prev_res = res;
            let n = lay.size();
            let mut rhs = Mat::<f64>::zeros(n, 1);
            for (i, &f) in lay.free_faces.iter().enumerate() {
                rhs[(i, 0)] = -r1[f];
            }
            for c in 0..lay.num_cells {
                rhs[(lay.cell_col(c), 0)] = -(r2[c] + if lay.gauge { multiplier } else { 0.0 });
            }
            if lay.gauge {
                rhs[(n - 1, 0)] = -scalar.iter().sum::<f64>();
            }
            let delta = self.lu.solve(&rhs);
            for (i, &f) in lay.free_faces.iter().enumerate() {
                flux[f] += delta[(i, 0)];
            }
            for (c, s) in scalar.iter_mut().enumerate() {
                *s += delta[(lay.cell_col(c), 0)];
            }
            if lay.gauge {
                multiplier += delta[(n - 1, 0)];
            }
        }
        if flux.iter().chain(&scalar).any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem("non-finite solution".into()));
        }
        let (r1, r2) = block_residuals_with(sys, m, rhs_flux, rhs_scalar, &flux, &scalar);
        let (n1, n2) = free_norms(lay, &r1, &r2, multiplier);
        let sol = SaddleSolution {
            flux,
            scalar,
            gauge_multiplier: lay.gauge.then_some(multiplier),
        };
        Ok((sol, n1.max(n2), tol))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Residual norms over free faces and over cells (the gauge multiplier shifts every cell row).
fn free_norms(lay: &Layout, r1: &[f64], r2: &[f64], multiplier: f64) -> (f64, f64) {
    let n1 = lay
        .free_faces
        .iter()
        .map(|&f| r1[f] * r1[f])
        .sum::<f64>()
        .sqrt();
    let shift = if lay.gauge { multiplier } else { 0.0 };
    let n2 = r2
        .iter()
        .map(|r| (r + shift) * (r + shift))
        .sum::<f64>()
        .sqrt();
    (n1, n2)
}

/// One-shot factorize and solve.
pub fn solve_saddle(sys: &SaddleSystem) -> Result<SaddleSolution> {
    SaddleSolver::new().factorize(sys)?.solve_stored()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(d: f64) -> SaddleSystem {
        // two faces, one cell: M = I, B = [1 -1]
        SaddleSystem {
            m: SparseMatrix::diagonal(&[1.0, 1.0]),
            b: SparseMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, -1.0)]).unwrap(),
            d: SparseMatrix::diagonal(&[d]),
            rhs_flux: vec![1.0, 1.0],
            rhs_scalar: vec![0.0],
            constrained: vec![],
        }
    }

    #[test]
    fn two_face_toy_recovers_hand_solution() {
        // flux = (1, 1), scalar = 0 satisfies M u - B^T p = (1, 1) and B u = 0
        let sol = solve_saddle(&toy(0.0)).unwrap();
        assert_eq!(sol.gauge_multiplier, None);
        assert!((sol.flux[0] - 1.0).abs() < 1e-15 && (sol.flux[1] - 1.0).abs() < 1e-15);
        assert!(sol.scalar[0].abs() < 1e-15);
    }

    #[test]
    fn toy_with_scalar_block() {
        // u0 - p = 1, u1 + p = 1, u0 - u1 + 2p = 3 -> p = 3/4
        let mut sys = toy(2.0);
        sys.rhs_scalar = vec![3.0];
        let sol = solve_saddle(&sys).unwrap();
        assert!((sol.scalar[0] - 0.75).abs() < 1e-14);
        assert!((sol.flux[0] - 1.75).abs() < 1e-14);
        assert!((sol.flux[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn constraint_conflict() {
        let mut sys = toy(1.0);
        sys.constrained = vec![(0, 1.0), (0, 2.0)];
        assert!(matches!(
            solve_saddle(&sys),
            Err(Error::ConstraintConflict { face: 0, .. })
        ));
        sys.constrained = vec![(0, 1.0), (0, 1.0)];
        assert!(solve_saddle(&sys).is_ok());
    }

    #[test]
    fn constrained_faces_hold_exactly() {
        let mut sys = toy(1.0);
        sys.constrained = vec![(1, 0.5)];
        let sol = solve_saddle(&sys).unwrap();
        assert_eq!(sol.flux[1], 0.5);
        // u0 - p = 1, u0 - 0.5 + p = 0 -> u0 = 0.75, p = -0.25
        assert!((sol.flux[0] - 0.75).abs() < 1e-14);
        assert!((sol.scalar[0] + 0.25).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_d() {
        let sys = toy(-1.0);
        assert!(matches!(solve_saddle(&sys), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn stale_factorization_preconditions_nearby_mass() {
        let f = SaddleSolver::new().factorize(&toy(0.5)).unwrap();
        let near = SparseMatrix::diagonal(&[1.05, 0.97]);
        let sol = f
            .solve_preconditioned(&near, &[1.0, 1.0], &[0.0], &[], 30)
            .unwrap()
            .expect("converges for a small perturbation");
        let direct = solve_saddle(&SaddleSystem {
            m: near,
            ..toy(0.5)
        })
        .unwrap();
        for (a, b) in sol
            .flux
            .iter()
            .chain(&sol.scalar)
            .zip(direct.flux.iter().chain(&direct.scalar))
        {
            assert!((a - b).abs() < 1e-12);
        }
        // too far from the factorized matrix for the correction to contract
        let far = SparseMatrix::diagonal(&[20.0, 20.0]);
        assert!(
            f.solve_preconditioned(&far, &[1.0, 1.0], &[0.0], &[], 30)
                .unwrap()
                .is_none()
        );
    }
}
