//! Coefficient sets, boundary data and the built-in problems.
//!
//! The system solved is, in complementary-pressure form,
//!
//! ```text
//! d/dt s(theta) + div q = f_s
//! q = -grad theta + f_w(s) u + f1(s)
//! div u = f2(s)
//! a(s) u = -grad p - f3(s)
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fespace::ScalarFieldP0;
use crate::grid::{BoundarySide, Point, Side, StructuredGrid};
use crate::quadrature::{adaptive_simpson, integrate_cell};

pub type ScalarLaw = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Scalar coefficient of position and saturation.
pub type FieldLaw = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;
/// Vector coefficient of position and saturation.
pub type VectorLaw = Arc<dyn Fn(&Point, f64) -> [f64; 3] + Send + Sync>;
/// Function of time and position.
pub type SpaceTimeFn = Arc<dyn Fn(f64, &Point) -> f64 + Send + Sync>;
pub type SpaceTimeVectorFn = Arc<dyn Fn(f64, &Point) -> [f64; 3] + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Lipschitz constants and bounds of the coefficient functions.
///
/// Only `l_s` is needed to run the L-scheme. The rest feed the time-step
/// admissibility check and are optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoefficientBounds {
    pub l_s: f64,
    pub a_lo: Option<f64>,
    pub a_hi: Option<f64>,
    pub l_a: Option<f64>,
    pub l_fw: Option<f64>,
    pub m_fw: Option<f64>,
    pub l_f1: Option<f64>,
    pub l_f2: Option<f64>,
    pub l_f3: Option<f64>,
    /// Sup-norm bound of the total flux; estimated from a pilot solve when absent.
    pub m_u: Option<f64>,
}

/// A concentrated source of total rate `rate` placed in the cell containing `location`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub rate: f64,
    pub location: Point,
    /// Fraction of the injected volume that is wetting phase.
    pub wetting_fraction: f64,
}

#[derive(Clone)]
pub struct CoefficientSet {
    pub saturation: ScalarLaw,
    pub a: ScalarLaw,
    pub frac_flow: ScalarLaw,
    pub f1: Option<VectorLaw>,
    pub f2: Option<FieldLaw>,
    pub f3: Option<VectorLaw>,
    pub source: Option<SpaceTimeFn>,
    pub injection: Option<Injection>,
    pub bounds: CoefficientBounds,
    /// Range of the complementary pressure over which `saturation` is validated.
    pub theta_range: (f64, f64),
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("bounds", &self.bounds)
            .field("theta_range", &self.theta_range)
            .field("injection", &self.injection)
            .finish_non_exhaustive()
    }
}

const VALIDATION_SAMPLES: usize = 10_000;
const LIPSCHITZ_SLACK: f64 = 1e-9;

impl CoefficientSet {
    pub fn s(&self, theta: f64) -> f64 {
        (self.saturation)(theta)
    }

    pub fn saturation_field(&self, theta: &ScalarFieldP0) -> ScalarFieldP0 {
        theta.map(|t| self.s(t))
    }

    /// Cell integrals of `f2(x, s_T)` plus the injection rate in its cell.
    pub fn f2_cell_integrals(
        &self,
        grid: &StructuredGrid,
        sat: &ScalarFieldP0,
    ) -> Result<Vec<f64>> {
        let mut out = match &self.f2 {
            Some(f2) => (0..grid.num_cells())
                .map(|c| integrate_cell(grid, c, |x| f2(x, sat.values[c])))
                .collect::<Result<Vec<_>>>()?,
            None => vec![0.0; grid.num_cells()],
        };
        if let Some(inj) = self.injection_cell(grid)? {
            out[inj.0] += inj.1.rate;
        }
        Ok(out)
    }

    /// Cell integrals of the saturation-equation source at time `t`.
    pub fn source_cell_integrals(&self, grid: &StructuredGrid, t: f64) -> Result<Vec<f64>> {
        let mut out = match &self.source {
            Some(f) => (0..grid.num_cells())
                .map(|c| integrate_cell(grid, c, |x| f(t, x)))
                .collect::<Result<Vec<_>>>()?,
            None => vec![0.0; grid.num_cells()],
        };
        if let Some((cell, inj)) = self.injection_cell(grid)? {
            out[cell] += inj.wetting_fraction * inj.rate;
        }
        Ok(out)
    }

    fn injection_cell(&self, grid: &StructuredGrid) -> Result<Option<(usize, Injection)>> {
        match self.injection {
            None => Ok(None),
            Some(inj) => grid
                .locate(&inj.location)
                .map(|c| Some((c, inj)))
                .ok_or_else(|| {
                    Error::InvalidCoefficients(format!(
                        "injection point {:?} is outside the grid",
                        inj.location
                    ))
                }),
        }
    }

    /// Samples the coefficient laws densely and checks monotonicity, ranges and
    /// that the declared constants dominate the sampled difference quotients.
    pub fn validate(&self, probes: &[Point]) -> Result<()> {
        let (lo, hi) = self.theta_range;
        if !(lo < hi) {
            return Err(Error::InvalidCoefficients(format!(
                "empty theta range [{lo}, {hi}]"
            )));
        }
        if !(self.bounds.l_s > 0.0) {
            return Err(Error::InvalidCoefficients(format!(
                "L_s must be positive, got {}",
                self.bounds.l_s
            )));
        }
        let thetas = linspace(lo, hi, VALIDATION_SAMPLES);
        let svals: Vec<f64> = thetas.iter().map(|&t| self.s(t)).collect();
        for (i, &s) in svals.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidCoefficients(format!(
                    "s({}) = {s} outside [0, 1]",
                    thetas[i]
                )));
            }
        }
        for w in 0..svals.len() - 1 {
            if svals[w + 1] < svals[w] {
                return Err(Error::InvalidCoefficients(format!(
                    "s decreases near theta = {}",
                    thetas[w]
                )));
            }
        }
        check_lipschitz("s", &thetas, &svals, Some(self.bounds.l_s))?;

        let sats = linspace(0.0, 1.0, VALIDATION_SAMPLES);
        let avals: Vec<f64> = sats.iter().map(|&s| (self.a)(s)).collect();
        let a_lo = self.bounds.a_lo.unwrap_or(f64::MIN_POSITIVE);
        let a_hi = self.bounds.a_hi.unwrap_or(f64::INFINITY);
        if a_lo <= 0.0 || a_hi < a_lo {
            return Err(Error::InvalidCoefficients(format!(
                "invalid bounds a_* = {a_lo}, a^* = {a_hi}"
            )));
        }
        for (i, &a) in avals.iter().enumerate() {
            if !(a >= a_lo * (1.0 - LIPSCHITZ_SLACK) && a <= a_hi * (1.0 + LIPSCHITZ_SLACK)) {
                return Err(Error::InvalidCoefficients(format!(
                    "a({}) = {a} violates bounds [{a_lo}, {a_hi}]",
                    sats[i]
                )));
            }
        }
        check_lipschitz("a", &sats, &avals, self.bounds.l_a)?;

        let fw: Vec<f64> = sats.iter().map(|&s| (self.frac_flow)(s)).collect();
        let m_fw = self.bounds.m_fw.unwrap_or(1.0);
        if m_fw > 1.0 + LIPSCHITZ_SLACK {
            return Err(Error::InvalidCoefficients(format!(
                "M_fw = {m_fw} exceeds 1"
            )));
        }
        if let Some(v) = fw
            .iter()
            .find(|v| !(v.abs() <= m_fw * (1.0 + LIPSCHITZ_SLACK)))
        {
            return Err(Error::InvalidCoefficients(format!(
                "|f_w| = {v} exceeds M_fw = {m_fw}"
            )));
        }
        check_lipschitz("f_w", &sats, &fw, self.bounds.l_fw)?;

        for x in probes {
            if let Some(f2) = &self.f2 {
                let v: Vec<f64> = sats.iter().map(|&s| f2(x, s)).collect();
                check_lipschitz("f2", &sats, &v, self.bounds.l_f2)?;
            }
            for (name, law, bound) in [
                ("f1", &self.f1, self.bounds.l_f1),
                ("f3", &self.f3, self.bounds.l_f3),
            ] {
                if let Some(law) = law {
                    for axis in 0..3 {
                        let v: Vec<f64> = sats.iter().map(|&s| law(x, s)[axis]).collect();
                        check_lipschitz(name, &sats, &v, bound)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn check_lipschitz(name: &str, x: &[f64], y: &[f64], declared: Option<f64>) -> Result<()> {
    let Some(l) = declared else { return Ok(()) };
    for w in 0..x.len() - 1 {
        let q = (y[w + 1] - y[w]).abs() / (x[w + 1] - x[w]);
        if !q.is_finite() || q > l * (1.0 + 1e-6) + LIPSCHITZ_SLACK {
            return Err(Error::InvalidCoefficients(format!(
                "{name}: difference quotient {q} near {} exceeds declared Lipschitz constant {l}",
                x[w]
            )));
        }
    }
    Ok(())
}

/// Boundary condition on one side of the domain.
#[derive(Clone)]
pub enum SideCondition {
    /// Prescribed potential (pressure or complementary pressure); natural in mixed form.
    Dirichlet(SpaceFn),
    /// Prescribed outward normal flux density; `Flux(0.0)` is no-flow.
    Flux(f64),
}

impl fmt::Debug for SideCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SideCondition::Dirichlet(_) => write!(f, "Dirichlet(..)"),
            SideCondition::Flux(v) => write!(f, "Flux({v})"),
        }
    }
}

/// Conditions on all `2 * dim` sides, indexed by [`BoundarySide::index`].
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    pub sides: Vec<SideCondition>,
}

impl BoundaryConditions {
    pub fn uniform(dim: usize, cond: SideCondition) -> Self {
        Self {
            sides: vec![cond; 2 * dim],
        }
    }

    pub fn homogeneous_dirichlet(dim: usize) -> Self {
        Self::uniform(dim, SideCondition::Dirichlet(Arc::new(|_| 0.0)))
    }

    pub fn no_flow(dim: usize) -> Self {
        Self::uniform(dim, SideCondition::Flux(0.0))
    }

    pub fn get(&self, side: BoundarySide) -> &SideCondition {
        &self.sides[side.index()]
    }

    pub fn set(&mut self, side: BoundarySide, cond: SideCondition) {
        self.sides[side.index()] = cond;
    }

    pub fn dirichlet_sides(&self, dim: usize) -> Vec<BoundarySide> {
        BoundarySide::all(dim)
            .filter(|s| matches!(self.get(*s), SideCondition::Dirichlet(_)))
            .collect()
    }

    pub fn has_dirichlet(&self, dim: usize) -> bool {
        !self.dirichlet_sides(dim).is_empty()
    }
}

/// Exact solution with its data, used by the convergence study.
#[derive(Clone)]
pub struct ManufacturedSolution {
    pub p: SpaceTimeFn,
    pub theta: SpaceTimeFn,
    pub s: SpaceTimeFn,
    pub u: SpaceTimeVectorFn,
    pub q: SpaceTimeVectorFn,
    pub source: SpaceTimeFn,
}

impl fmt::Debug for ManufacturedSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ManufacturedSolution { .. }")
    }
}

impl ManufacturedSolution {
    /// Identically zero solution.
    pub fn zero() -> Self {
        Self {
            p: Arc::new(|_, _| 0.0),
            theta: Arc::new(|_, _| 0.0),
            s: Arc::new(|_, _| 0.0),
            u: Arc::new(|_, _| [0.0; 3]),
            q: Arc::new(|_, _| [0.0; 3]),
            source: Arc::new(|_, _| 0.0),
        }
    }
}

/// Everything needed to run one simulation apart from discretization choices.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub dim: usize,
    pub extents: Vec<(f64, f64)>,
    pub coeffs: CoefficientSet,
    pub pressure_bc: BoundaryConditions,
    pub saturation_bc: BoundaryConditions,
    pub initial_theta: SpaceFn,
    pub exact: Option<ManufacturedSolution>,
    /// Stabilization parameter suggested for this problem.
    pub default_l: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("extents", &self.extents)
            .field("coeffs", &self.coeffs)
            .field("pressure_bc", &self.pressure_bc)
            .field("saturation_bc", &self.saturation_bc)
            .field("default_l", &self.default_l)
            .finish_non_exhaustive()
    }
}

/// `clamp(theta, 0, 1)^2`; monotone, Lipschitz with constant 2 and flat outside `[0, 1]`.
pub fn quadratic_saturation(theta: f64) -> f64 {
    let t = theta.clamp(0.0, 1.0);
    t * t
}

/// Manufactured 2D problem on the unit square with `p = x(1-x)y(1-y)` and
/// `theta = t p`, `s = theta^2`, unit mobility, `f_w = s`, final time `t_end`.
pub fn builtin_manufactured_2d(t_end: f64) -> Problem {
    let bub = |x: &Point| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
    let p: SpaceTimeFn = Arc::new(move |_, x| bub(x));
    let theta: SpaceTimeFn = Arc::new(move |t, x| t * bub(x));
    let s: SpaceTimeFn = Arc::new(move |t, x| {
        let th = t * bub(x);
        th * th
    });
    let grad_bub = |x: &Point| {
        let (bx, by) = (x[0] * (1.0 - x[0]), x[1] * (1.0 - x[1]));
        [(1.0 - 2.0 * x[0]) * by, bx * (1.0 - 2.0 * x[1]), 0.0]
    };
    let u: SpaceTimeVectorFn = Arc::new(move |_, x| {
        let g = grad_bub(x);
        [-g[0], -g[1], 0.0]
    });
    let q: SpaceTimeVectorFn = Arc::new(move |t, x| {
        let g = grad_bub(x);
        let th = t * bub(x);
        let sat = th * th;
        [-t * g[0] - sat * g[0], -t * g[1] - sat * g[1], 0.0]
    });
    let source: SpaceTimeFn = Arc::new(move |t, x| {
        let (xx, yy) = (x[0], x[1]);
        let bx = xx * (1.0 - xx);
        let by = yy * (1.0 - yy);
        2.0 * t * bx * bx * by * by
            + 2.0 * t * bx
            + 2.0 * t * by
            + t * t
                * by.powi(3)
                * (10.0 * xx.powi(4) - 20.0 * xx.powi(3) + 12.0 * xx * xx - 2.0 * xx)
            + t * t
                * bx.powi(3)
                * (10.0 * yy.powi(4) - 20.0 * yy.powi(3) + 12.0 * yy * yy - 2.0 * yy)
    });
    let theta_max = t_end / 16.0;
    let l_s = 2.0 * theta_max;
    let coeffs = CoefficientSet {
        saturation: Arc::new(quadratic_saturation),
        a: Arc::new(|_| 1.0),
        frac_flow: Arc::new(|s: f64| s.clamp(0.0, 1.0)),
        f1: None,
        f2: Some(Arc::new(|x: &Point, _| {
            2.0 * x[0] * (1.0 - x[0]) + 2.0 * x[1] * (1.0 - x[1])
        })),
        f3: None,
        source: Some(source.clone()),
        injection: None,
        bounds: CoefficientBounds {
            l_s,
            a_lo: Some(1.0),
            a_hi: Some(1.0),
            l_a: Some(0.0),
            l_fw: Some(1.0),
            m_fw: Some(1.0),
            l_f1: Some(0.0),
            l_f2: Some(0.0),
            l_f3: Some(0.0),
            m_u: Some(0.25),
        },
        theta_range: (0.0, theta_max),
    };
    Problem {
        name: "manufactured2d".into(),
        dim: 2,
        extents: vec![(0.0, 1.0); 2],
        coeffs,
        pressure_bc: BoundaryConditions::homogeneous_dirichlet(2),
        saturation_bc: BoundaryConditions::homogeneous_dirichlet(2),
        initial_theta: Arc::new(|_| 0.0),
        exact: Some(ManufacturedSolution {
            p,
            theta,
            s,
            u,
            q,
            source,
        }),
        default_l: l_s,
    }
}

/// How the total-mobility coefficient of the 3D injection problem is built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MobilityModel {
    /// `a(s) = scale / (s^2 + (1-s)^2)` and `f_w = s^2 / (s^2 + (1-s)^2)`.
    Lumped { scale: f64 },
    /// `a(s) = 1 / (k (s^2/mu_w + (1-s)^2/mu_o))` with viscosities in Pa s.
    Dimensional {
        permeability: f64,
        mu_w: f64,
        mu_o: f64,
    },
}

impl MobilityModel {
    /// Lumped law with the scale `1e-6` printed next to it.
    pub const DISPLAYED: Self = MobilityModel::Lumped { scale: 1e-6 };
    /// Lumped law with scale `1/k = 1e6`, the inverse of the permeability `k = 1e-6`.
    pub const INVERSE_PERMEABILITY: Self = MobilityModel::Lumped { scale: 1e6 };

    pub fn standard_dimensional() -> Self {
        MobilityModel::Dimensional {
            permeability: 1e-6,
            mu_w: 1e-3,
            mu_o: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionOptions {
    pub mobility: MobilityModel,
    pub s_init: f64,
    /// Total injection rate, volume per unit model time.
    pub rate: f64,
    pub p_left: f64,
    pub p_right: f64,
}

impl Default for InjectionOptions {
    fn default() -> Self {
        Self {
            mobility: MobilityModel::INVERSE_PERMEABILITY,
            s_init: 0.25,
            rate: 1e-5,
            p_left: 0.0,
            p_right: 10.0,
        }
    }
}

/// 3D injection problem on the unit cube with `s(theta) = theta^2`: water is
/// injected in the cell containing the cube center, pressure is fixed on
/// `x = 0` and `x = 1`, and all other boundaries are closed.
pub fn builtin_injection_3d(opts: &InjectionOptions) -> Result<Problem> {
    if !(0.0..=1.0).contains(&opts.s_init) {
        return Err(Error::InvalidConfig(format!(
            "s_init = {} outside [0, 1]",
            opts.s_init
        )));
    }
    let g = |s: f64| s * s + (1.0 - s) * (1.0 - s);
    let (a, frac_flow, a_lo, a_hi, l_a, l_fw): (ScalarLaw, ScalarLaw, f64, f64, f64, f64) =
        match opts.mobility {
            MobilityModel::Lumped { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "mobility scale must be positive, got {scale}"
                    )));
                }
                (
                    Arc::new(move |s: f64| {
                        let s = s.clamp(0.0, 1.0);
                        scale / g(s)
                    }),
                    Arc::new(move |s: f64| {
                        let s = s.clamp(0.0, 1.0);
                        s * s / g(s)
                    }),
                    scale,
                    2.0 * scale,
                    2.6 * scale,
                    2.0,
                )
            }
            MobilityModel::Dimensional {
                permeability,
                mu_w,
                mu_o,
            } => {
                if !(permeability > 0.0 && mu_w > 0.0 && mu_o > 0.0) {
                    return Err(Error::InvalidConfig(
                        "permeability and viscosities must be positive".into(),
                    ));
                }
                let lam = move |s: f64| s * s / mu_w + (1.0 - s) * (1.0 - s) / mu_o;
                // total mobility is minimal at s = mu_w / (mu_w + mu_o)
                let s_min = mu_w / (mu_w + mu_o);
                let lam_min = lam(s_min);
                let lam_max = (1.0 / mu_w).max(1.0 / mu_o);
                let a_hi = 1.0 / (permeability * lam_min);
                let a_lo = 1.0 / (permeability * lam_max);
                // |a'| <= 2 max(1/mu_w, 1/mu_o) / (k lam_min^2); |f_w'| <= 2 / (mu_w mu_o lam_min^2)
                let l_a = 2.0 * lam_max / (permeability * lam_min * lam_min);
                let l_fw = 2.0 / (mu_w * mu_o * lam_min * lam_min);
                (
                    Arc::new(move |s: f64| 1.0 / (permeability * lam(s.clamp(0.0, 1.0)))),
                    Arc::new(move |s: f64| {
                        let s = s.clamp(0.0, 1.0);
                        s * s / mu_w / lam(s)
                    }),
                    a_lo,
                    a_hi,
                    l_a,
                    l_fw,
                )
            }
        };
    let coeffs = CoefficientSet {
        saturation: Arc::new(quadratic_saturation),
        a,
        frac_flow,
        f1: None,
        f2: None,
        f3: None,
        source: None,
        injection: Some(Injection {
            rate: opts.rate,
            location: [0.5, 0.5, 0.5],
            wetting_fraction: 1.0,
        }),
        bounds: CoefficientBounds {
            l_s: 2.0,
            a_lo: Some(a_lo),
            a_hi: Some(a_hi),
            l_a: Some(l_a),
            l_fw: Some(l_fw),
            m_fw: Some(1.0),
            l_f1: Some(0.0),
            l_f2: Some(0.0),
            l_f3: Some(0.0),
            m_u: None,
        },
        theta_range: (-0.5, 1.5),
    };
    let mut pressure_bc = BoundaryConditions::no_flow(3);
    let (pl, pr) = (opts.p_left, opts.p_right);
    pressure_bc.set(
        BoundarySide::new(0, Side::Lo),
        SideCondition::Dirichlet(Arc::new(move |_| pl)),
    );
    pressure_bc.set(
        BoundarySide::new(0, Side::Hi),
        SideCondition::Dirichlet(Arc::new(move |_| pr)),
    );
    let theta0 = opts.s_init.sqrt();
    Ok(Problem {
        name: "injection3d".into(),
        dim: 3,
        extents: vec![(0.0, 1.0); 3],
        coeffs,
        pressure_bc,
        saturation_bc: BoundaryConditions::no_flow(3),
        initial_theta: Arc::new(move |_| theta0),
        exact: None,
        default_l: 2.0,
    })
}

/// Complementary pressure `theta(s_w) = -int_0^{s_w} f_w lambda_n dp_cap/ds`,
/// with `f_w = lambda_w / (lambda_w + lambda_n)`. Takes the derivative of the
/// capillary pressure curve.
pub fn complementary_pressure(
    dpcap: &dyn Fn(f64) -> f64,
    lambda_w: &dyn Fn(f64) -> f64,
    lambda_n: &dyn Fn(f64) -> f64,
    s_w: f64,
) -> Result<f64> {
    check_saturation(s_w)?;
    let integrand = |xi: f64| {
        let (lw, ln) = (lambda_w(xi), lambda_n(xi));
        let total = lw + ln;
        let fw = if total > 0.0 { lw / total } else { 0.0 };
        -fw * ln * dpcap(xi)
    };
    adaptive_simpson(&integrand, 0.0, s_w, 1e-10)
}

/// Global pressure `p = p_n - int_0^{s_w} f_w dp_cap/ds`.
pub fn global_pressure(
    p_n: f64,
    dpcap: &dyn Fn(f64) -> f64,
    lambda_w: &dyn Fn(f64) -> f64,
    lambda_n: &dyn Fn(f64) -> f64,
    s_w: f64,
) -> Result<f64> {
    check_saturation(s_w)?;
    let integrand = |xi: f64| {
        let (lw, ln) = (lambda_w(xi), lambda_n(xi));
        let total = lw + ln;
        let fw = if total > 0.0 { lw / total } else { 0.0 };
        fw * dpcap(xi)
    };
    Ok(p_n - adaptive_simpson(&integrand, 0.0, s_w, 1e-10)?)
}

fn check_saturation(s_w: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s_w) {
        return Err(Error::InvalidCoefficients(format!(
            "saturation {s_w} outside [0, 1]"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manufactured_values() {
        let pb = builtin_manufactured_2d(1.0);
        let ex = pb.exact.as_ref().unwrap();
        let x = [0.5, 0.5, 0.0];
        assert!(((ex.theta)(1.0, &x) - 1.0 / 16.0).abs() < 1e-15);
        assert!(((ex.s)(1.0, &x) - 1.0 / 256.0).abs() < 1e-15);
        assert!((pb.coeffs.bounds.l_s - 0.125).abs() < 1e-15);
        pb.coeffs.validate(&[x]).unwrap();
    }

    #[test]
    fn injection_values() {
        let opts = InjectionOptions {
            mobility: MobilityModel::DISPLAYED,
            s_init: 0.0,
            ..Default::default()
        };
        let pb = builtin_injection_3d(&opts).unwrap();
        let c = &pb.coeffs;
        assert!(((c.frac_flow)(0.5) - 0.5).abs() < 1e-15);
        assert!(((c.a)(0.0) - 1e-6).abs() < 1e-21);
        assert!(((c.a)(1.0) - 1e-6).abs() < 1e-21);
        assert!(((c.a)(0.5) - 2e-6).abs() < 1e-21);
        c.validate(&[[0.5; 3]]).unwrap();
        let grid = StructuredGrid::unit(3, 20).unwrap();
        let f2 = c
            .f2_cell_integrals(&grid, &ScalarFieldP0::zeros(&grid))
            .unwrap();
        let nonzero: Vec<_> = f2.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(*nonzero[0].1, 1e-5);
        assert_eq!(grid.cell_coords(nonzero[0].0), [10, 10, 10]);
    }

    #[test]
    fn default_injection_uses_inverse_permeability() {
        let pb = builtin_injection_3d(&InjectionOptions::default()).unwrap();
        assert!(((pb.coeffs.a)(0.0) - 1e6).abs() < 1e-6);
        assert!(((pb.coeffs.a)(0.5) - 2e6).abs() < 1e-6);
        assert!(((pb.initial_theta)(&[0.1, 0.2, 0.3]) - 0.5).abs() < 1e-15);
        pb.coeffs.validate(&[[0.5; 3]]).unwrap();
    }

    #[test]
    fn dimensional_variant_validates() {
        let opts = InjectionOptions {
            mobility: MobilityModel::standard_dimensional(),
            ..Default::default()
        };
        let pb = builtin_injection_3d(&opts).unwrap();
        pb.coeffs.validate(&[[0.5; 3]]).unwrap();
        assert!(((pb.coeffs.a)(1.0) - 1e3).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_decreasing_s_and_bad_bounds() {
        let mut c = builtin_manufactured_2d(1.0).coeffs;
        c.saturation = Arc::new(|t: f64| (0.5 - t).clamp(0.0, 1.0));
        c.theta_range = (0.0, 0.5);
        assert!(matches!(
            c.validate(&[]),
            Err(Error::InvalidCoefficients(_))
        ));

        let mut c = builtin_manufactured_2d(1.0).coeffs;
        c.a = Arc::new(|s: f64| 1.0 + s);
        assert!(matches!(
            c.validate(&[]),
            Err(Error::InvalidCoefficients(_))
        ));

        let mut c = builtin_manufactured_2d(1.0).coeffs;
        c.bounds.l_s = 0.01;
        assert!(matches!(
            c.validate(&[]),
            Err(Error::InvalidCoefficients(_))
        ));
    }

    #[test]
    fn complementary_pressure_cases() {
        let zero = |_: f64| 0.0;
        let lw = |x: f64| x;
        let ln = |x: f64| 1.0 - x;
        assert_eq!(complementary_pressure(&zero, &lw, &ln, 0.7).unwrap(), 0.0);
        // p_cap = 1 - xi: integrand f_w lambda_n = xi (1 - xi)
        let dpc = |_: f64| -1.0;
        for s in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let v = complementary_pressure(&dpc, &lw, &ln, s).unwrap();
            let exact = s * s / 2.0 - s * s * s / 3.0;
            assert!((v - exact).abs() < 1e-10, "{s}: {v} vs {exact}");
        }
        let dpc = |x: f64| -1.0 / (x + 0.1).powi(2);
        let a = complementary_pressure(&dpc, &lw, &ln, 0.4).unwrap();
        let b = complementary_pressure(&dpc, &lw, &ln, 0.8).unwrap();
        assert!(b > a);
        assert!(complementary_pressure(&dpc, &lw, &ln, 1.5).is_err());
        let singular = |x: f64| -1.0 / x;
        let one = |_: f64| 1.0;
        assert!(matches!(
            complementary_pressure(&singular, &one, &one, 0.5),
            Err(Error::QuadratureFailure(_))
        ));
    }

    #[test]
    fn global_pressure_linear_case() {
        let lw = |x: f64| x;
        let ln = |x: f64| 1.0 - x;
        let dpc = |_: f64| -1.0;
        // int_0^s xi d xi = s^2 / 2
        let p = global_pressure(3.0, &dpc, &lw, &ln, 0.6).unwrap();
        assert!((p - (3.0 + 0.18)).abs() < 1e-10);
    }
}
