mod common;

use lscheme_core::StructuredGrid;
use lscheme_core::analysis::{ConvergenceTable, ErrorReport, compute_errors};
use lscheme_core::fespace::{FluxFieldRT0, ScalarFieldP0, assemble_div, assemble_mass_rt0};
use lscheme_core::io::{read_convergence_csv, vtk_string, write_convergence_csv};
use lscheme_core::linsolve::{SaddleSystem, solve_saddle};
use lscheme_core::model::builtin_manufactured_2d;
use lscheme_core::stepper::{TimeGrid, TwoPhaseState};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = StructuredGrid> {
    (
        2usize..=3,
        prop::collection::vec(1usize..=4, 3),
        prop::collection::vec(0.1f64..3.0, 3),
    )
        .prop_map(|(dim, counts, widths)| {
            let extents: Vec<(f64, f64)> =
                widths[..dim].iter().map(|&w| (-0.5, -0.5 + w)).collect();
            StructuredGrid::new(dim, &extents, &counts[..dim]).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cell_index_and_coords_are_inverse(grid in grid_strategy()) {
        for cell in 0..grid.num_cells() {
            prop_assert_eq!(grid.cell_index(grid.cell_coords(cell)), cell);
            prop_assert_eq!(grid.locate(&grid.cell_center(cell)), Some(cell));
        }
    }

    #[test]
    fn faces_have_consistent_incidence(grid in grid_strategy()) {
        let b = assemble_div(&grid);
        for face in 0..grid.num_faces() {
            let (lo, hi) = grid.cells_of_face(face).unwrap();
            prop_assert!(lo.is_some() || hi.is_some());
            // fixed global normal: +1 for the cell below the face, -1 for the one above
            if let Some(c) = lo { prop_assert_eq!(b.get(c, face), 1.0); }
            if let Some(c) = hi { prop_assert_eq!(b.get(c, face), -1.0); }
        }
        // divergence of a constant field vanishes
        let (axis, value) = (grid.dim() - 1, 1.7);
        let mut dofs = vec![0.0; grid.num_faces()];
        for f in grid.faces_of_axis(axis) {
            dofs[f] = value * grid.face_measure_of_axis(axis);
        }
        let div = FluxFieldRT0::from_dofs(&grid, dofs).unwrap().divergence_integrals(&grid);
        let interior: Vec<usize> = (0..grid.num_cells()).collect();
        for c in interior {
            prop_assert!(div[c].abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_mass_is_spd(grid in grid_strategy(), seed in prop::collection::vec(0.01f64..100.0, 64)) {
        let weights: Vec<f64> = (0..grid.num_cells()).map(|c| seed[c % seed.len()]).collect();
        let w = ScalarFieldP0::from_values(&grid, weights).unwrap();
        let m = assemble_mass_rt0(&grid, &w).unwrap();
        prop_assert!(m.is_symmetric(1e-12));
        prop_assert!(common::cholesky(&m.to_dense()).is_some());
    }

    #[test]
    fn saddle_solution_has_small_residuals(
        n in 1usize..=4,
        weights in prop::collection::vec(0.1f64..10.0, 16),
        rhs in prop::collection::vec(-1.0f64..1.0, 64),
        d in 0.0f64..2.0,
    ) {
        let grid = StructuredGrid::unit(2, n).unwrap();
        let w = ScalarFieldP0::from_values(&grid, weights[..grid.num_cells()].to_vec()).unwrap();
        let nc = grid.num_cells();
        let nf = grid.num_faces();
        let sys = SaddleSystem {
            m: assemble_mass_rt0(&grid, &w).unwrap(),
            b: assemble_div(&grid),
            d: lscheme_core::sparse::SparseMatrix::diagonal(&vec![d; nc]),
            rhs_flux: rhs[..nf].to_vec(),
            rhs_scalar: rhs[nf..nf + nc].to_vec(),
            constrained: vec![],
        };
        let sol = solve_saddle(&sys).unwrap();
        let (r1, r2) = sys.residuals(&sol.flux, &sol.scalar);
        let tol = 1e-10 * (1.0 + rhs.iter().map(|v| v.abs()).fold(0.0, f64::max));
        prop_assert!(r1.iter().chain(&r2).all(|r| r.abs() <= tol));
    }

    #[test]
    fn convergence_csv_roundtrips_exactly(values in prop::collection::vec(1e-300f64..1e300, 12)) {
        let reports = values.chunks(6).map(|v| ErrorReport {
            h: v[0], tau: v[1], e_p: v[2], e_theta: v[3], e_s: v[4], e_stheta: v[5], e_q: None,
        });
        let table = ConvergenceTable::from_reports(reports);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_convergence_csv(&table, &path).unwrap();
        let back = read_convergence_csv(&path).unwrap();
        prop_assert_eq!(back.len(), table.len());
        for (a, b) in back.rows.iter().zip(&table.rows) {
            prop_assert_eq!(a.report.columns(), b.report.columns());
            prop_assert_eq!(a.report.h, b.report.h);
            prop_assert_eq!(a.report.tau, b.report.tau);
        }
    }

    #[test]
    fn vtk_output_is_deterministic(grid in grid_strategy(), v in -10.0f64..10.0) {
        let f = ScalarFieldP0::constant(&grid, v);
        let a = vtk_string(&grid, &[("f", &f)]).unwrap();
        let b = vtk_string(&grid.clone(), &[("f", &f.clone())]).unwrap();
        prop_assert_eq!(&a, &b);
        let cell_data = format!("CELL_DATA {}", grid.num_cells());
        prop_assert!(a.contains(&cell_data));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stheta_error_is_nonnegative(values in prop::collection::vec(-0.2f64..0.3, 16 * 3)) {
        let pb = builtin_manufactured_2d(1.0);
        let grid = StructuredGrid::unit(2, 4).unwrap();
        let time = TimeGrid::from_end(1.0, 1.0 / 3.0).unwrap();
        let snaps: Vec<(usize, TwoPhaseState)> = values
            .chunks(16)
            .enumerate()
            .map(|(k, v)| {
                let theta = ScalarFieldP0::from_values(&grid, v.to_vec()).unwrap();
                let mut st = TwoPhaseState::initial(&grid, &pb.coeffs, theta);
                st.t = time.t(k + 1);
                (k + 1, st)
            })
            .collect();
        let r = compute_errors(&snaps, pb.exact.as_ref().unwrap(), &grid, &time).unwrap();
        prop_assert!(r.e_stheta >= 0.0);
        prop_assert!(r.e_p >= 0.0 && r.e_theta >= 0.0 && r.e_s >= 0.0);
    }
}
