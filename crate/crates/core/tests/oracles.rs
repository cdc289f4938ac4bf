mod common;

use lscheme_core::fespace::{ScalarFieldP0, assemble_mass_rt0, project_p0, project_rt0};
use lscheme_core::model::{InjectionOptions, builtin_injection_3d, builtin_manufactured_2d};
use lscheme_core::stepper::{
    LSchemeConfig, Simulator, StepperOptions, TwoPhaseState, pressure_step,
};
use lscheme_core::{BoundarySide, StructuredGrid};

fn bubble(x: &[f64; 3]) -> f64 {
    x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
}

/// Richardson-extrapolated central difference of `f` at `x`.
fn derivative(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let h = 1e-3;
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[test]
fn manufactured_data_satisfy_the_pde() {
    let pb = builtin_manufactured_2d(1.0);
    let ex = pb.exact.as_ref().unwrap();
    let f2 = pb.coeffs.f2.as_ref().unwrap();
    for &t in &[0.3, 0.77, 1.0] {
        for &(x, y) in &[(0.2, 0.3), (0.5, 0.5), (0.81, 0.13), (0.4, 0.9)] {
            let at = |x: f64, y: f64| [x, y, 0.0];
            // s = theta^2 and theta = t p
            let theta = (ex.theta)(t, &at(x, y));
            assert!(((ex.s)(t, &at(x, y)) - theta * theta).abs() < 1e-15);
            assert!((theta - t * (ex.p)(t, &at(x, y))).abs() < 1e-15);

            // q = -grad theta + s u
            let q = (ex.q)(t, &at(x, y));
            let u = (ex.u)(t, &at(x, y));
            let s = (ex.s)(t, &at(x, y));
            let gx = derivative(&|xx| (ex.theta)(t, &at(xx, y)), x);
            let gy = derivative(&|yy| (ex.theta)(t, &at(x, yy)), y);
            assert!((q[0] - (-gx + s * u[0])).abs() < 1e-10);
            assert!((q[1] - (-gy + s * u[1])).abs() < 1e-10);

            // u = -grad p and div u = f2
            let px = derivative(&|xx| (ex.p)(t, &at(xx, y)), x);
            let py = derivative(&|yy| (ex.p)(t, &at(x, yy)), y);
            assert!((u[0] + px).abs() < 1e-10 && (u[1] + py).abs() < 1e-10);
            let div_u = derivative(&|xx| (ex.u)(t, &at(xx, y))[0], x)
                + derivative(&|yy| (ex.u)(t, &at(x, yy))[1], y);
            assert!((div_u - f2(&at(x, y), s)).abs() < 1e-9);

            // ds/dt + div q = f_s
            let dsdt = derivative(&|tt| (ex.s)(tt, &at(x, y)), t);
            let div_q = derivative(&|xx| (ex.q)(t, &at(xx, y))[0], x)
                + derivative(&|yy| (ex.q)(t, &at(x, yy))[1], y);
            assert!(
                (dsdt + div_q - (ex.source)(t, &at(x, y))).abs() < 1e-9,
                "t={t} x={x} y={y}"
            );
        }
    }
}

#[test]
fn p0_projection_of_bubble_is_the_analytic_cell_average() {
    let grid = StructuredGrid::unit(2, 5).unwrap();
    let proj = project_p0(&grid, bubble).unwrap();
    // mean of x(1-x) over [a, b]
    let mean = |a: f64, b: f64| ((b * b - a * a) / 2.0 - (b.powi(3) - a.powi(3)) / 3.0) / (b - a);
    for cell in 0..grid.num_cells() {
        let o = grid.cell_origin(cell);
        let h = grid.h();
        let want = mean(o[0], o[0] + h[0]) * mean(o[1], o[1] + h[1]);
        assert!((proj.values[cell] - want).abs() < 1e-15);
    }
}

#[test]
fn rt0_interpolant_matches_analytic_face_integrals() {
    let grid = StructuredGrid::unit(2, 4).unwrap();
    let grad = |x: &[f64; 3]| {
        [
            (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]),
            x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]),
            0.0,
        ]
    };
    let u = project_rt0(&grid, grad).unwrap();
    // integral of z(1-z) over [a, b]
    let int = |a: f64, b: f64| (b * b - a * a) / 2.0 - (b.powi(3) - a.powi(3)) / 3.0;
    for face in 0..grid.num_faces() {
        let (axis, ijk) = grid.face_coords(face).unwrap();
        let h = grid.h();
        let other = 1 - axis;
        let pos = ijk[axis] as f64 * h[axis];
        let (a, b) = (
            ijk[other] as f64 * h[other],
            (ijk[other] + 1) as f64 * h[other],
        );
        let want = (1.0 - 2.0 * pos) * int(a, b);
        assert!((u.dofs[face] - want).abs() < 1e-15, "face {face}");
    }
}

#[test]
fn local_mass_blocks_match_quadrature_oracle() {
    let grids = [
        StructuredGrid::new(2, &[(0.0, 1.5), (0.0, 0.4)], &[3, 2]).unwrap(),
        StructuredGrid::new(3, &[(0.0, 1.0), (0.0, 2.0), (0.0, 0.5)], &[2, 1, 2]).unwrap(),
    ];
    for grid in grids {
        let weight = ScalarFieldP0::constant(&grid, 1.0);
        let m = assemble_mass_rt0(&grid, &weight).unwrap();
        // a face shared by two cells collects both cells' contributions
        let mut assembled = vec![vec![0.0; grid.num_faces()]; grid.num_faces()];
        for cell in 0..grid.num_cells() {
            let faces: Vec<usize> = grid
                .faces_of_cell(cell)
                .unwrap()
                .into_iter()
                .map(|(f, _)| f)
                .collect();
            let local = common::local_mass(&grid, cell);
            for (i, &fi) in faces.iter().enumerate() {
                for (j, &fj) in faces.iter().enumerate() {
                    assembled[fi][fj] += local[i][j];
                }
            }
        }
        for (i, row) in assembled.iter().enumerate() {
            for (j, &want) in row.iter().enumerate() {
                assert!((m.get(i, j) - want).abs() < 1e-12, "({i}, {j})");
            }
        }
    }
}

#[test]
fn mass_matrix_on_4x4_is_spd() {
    let grid = StructuredGrid::unit(2, 4).unwrap();
    let weight =
        ScalarFieldP0::from_values(&grid, (0..16).map(|c| 1.0 + 0.3 * c as f64).collect()).unwrap();
    let m = assemble_mass_rt0(&grid, &weight).unwrap().to_dense();
    assert!(common::cholesky(&m).is_some());
}

#[test]
fn single_cell_pressure_solve_matches_hand_solution() {
    let grid = StructuredGrid::unit(2, 1).unwrap();
    let (u, p) = pressure_step(
        &grid,
        &common::unit_source_problem(),
        &ScalarFieldP0::zeros(&grid),
        StepperOptions::default(),
    )
    .unwrap();
    for (face, sign) in grid.faces_of_cell(0).unwrap() {
        assert!((u.dofs[face] - 0.25 * sign).abs() < 1e-15);
    }
    assert!((p.values[0] - 1.0 / 24.0).abs() < 1e-15);
}

#[test]
fn pressure_error_at_cell_centers_is_second_order() {
    let pb = builtin_manufactured_2d(1.0);
    let errors: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let grid = StructuredGrid::unit(2, n).unwrap();
            let sat = ScalarFieldP0::zeros(&grid);
            let (_, p) = pressure_step(&grid, &pb, &sat, StepperOptions::default()).unwrap();
            (0..grid.num_cells())
                .map(|c| (p.values[c] - bubble(&grid.cell_center(c))).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errors.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn injection_outflow_equals_injected_rate() {
    let pb = builtin_injection_3d(&InjectionOptions::default()).unwrap();
    let grid = StructuredGrid::unit(3, 8).unwrap();
    let mut sim = Simulator::new(
        grid.clone(),
        pb.clone(),
        LSchemeConfig::new(2.0),
        0.5,
        StepperOptions::default(),
    )
    .unwrap();
    let init: TwoPhaseState = sim.initial_state().unwrap();
    let (u, _, _) = sim.pressure_step(&init.sat).unwrap();
    let mut outflow = 0.0;
    for side in BoundarySide::all(3) {
        for face in grid.boundary_faces(side) {
            outflow += side.outward_sign() * u.dofs[face];
        }
    }
    let rate = InjectionOptions::default().rate;
    assert!((outflow - rate).abs() < 1e-9 * rate, "outflow {outflow:e}");
}
