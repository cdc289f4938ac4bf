//! Problems described by a JSON file.
//!
//! ```json
//! {
//!   "name": "richards-like",
//!   "dim": 2,
//!   "saturation": { "type": "power", "coef": 1.0, "exponent": 2.0 },
//!   "a": { "type": "constant", "value": 1.0 },
//!   "frac_flow": { "type": "tabulated", "x": [0, 1], "y": [0, 1] },
//!   "f2": 0.0,
//!   "source": 1.0,
//!   "pressure_bc": { "default": { "dirichlet": 0.0 } },
//!   "saturation_bc": { "default": { "flux": 0.0 }, "sides": { "x_lo": { "dirichlet": 0.0 } } },
//!   "initial_theta": 0.0,
//!   "theta_range": [0.0, 1.0]
//! }
//! ```
//!
//! Lipschitz constants and bounds that are not given in `bounds` are
//! estimated from the laws on dense samples.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundarySide, Point, Side};
use crate::model::{
    BoundaryConditions, CoefficientBounds, CoefficientSet, Injection, Problem, ScalarLaw,
    SideCondition,
};

/// A scalar law of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Law {
    Constant {
        value: f64,
    },
    Linear {
        slope: f64,
        intercept: f64,
    },
    /// `coef * clamp(x, 0, 1)^exponent`
    Power {
        coef: f64,
        exponent: f64,
    },
    /// Piecewise linear through `(x, y)`, constant outside the table.
    Tabulated {
        x: Vec<f64>,
        y: Vec<f64>,
    },
    /// `scale / (x^2 + (1-x)^2)` with `x` clamped to `[0, 1]`.
    Lumped {
        scale: f64,
    },
    /// `x^2 / (x^2 + (1-x)^2)` with `x` clamped to `[0, 1]`.
    QuadraticFractionalFlow,
}

impl Law {
    fn check(&self) -> Result<()> {
        match self {
            Law::Tabulated { x, y } => {
                if x.len() < 2 || x.len() != y.len() {
                    return Err(Error::InvalidConfig(
                        "tabulated law needs at least two points and equal lengths".into(),
                    ));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::InvalidConfig(
                        "tabulated abscissae must increase strictly".into(),
                    ));
                }
            }
            Law::Power { exponent, .. } if *exponent < 1.0 => {
                return Err(Error::InvalidConfig(
                    "power law exponent below 1 is not Lipschitz".into(),
                ));
            }
            Law::Lumped { scale } if !(*scale > 0.0) => {
                return Err(Error::InvalidConfig(
                    "lumped law scale must be positive".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn to_fn(&self) -> Result<ScalarLaw> {
        self.check()?;
        Ok(match self.clone() {
            Law::Constant { value } => Arc::new(move |_| value),
            Law::Linear { slope, intercept } => Arc::new(move |x| slope * x + intercept),
            Law::Power { coef, exponent } => {
                Arc::new(move |x: f64| coef * x.clamp(0.0, 1.0).powf(exponent))
            }
            Law::Tabulated { x, y } => Arc::new(move |v: f64| interpolate(&x, &y, v)),
            Law::Lumped { scale } => Arc::new(move |x: f64| {
                let s = x.clamp(0.0, 1.0);
                scale / (s * s + (1.0 - s) * (1.0 - s))
            }),
            Law::QuadraticFractionalFlow => Arc::new(|x: f64| {
                let s = x.clamp(0.0, 1.0);
                s * s / (s * s + (1.0 - s) * (1.0 - s))
            }),
        })
    }
}

fn interpolate(x: &[f64], y: &[f64], v: f64) -> f64 {
    if v <= x[0] {
        return y[0];
    }
    if v >= x[x.len() - 1] {
        return y[y.len() - 1];
    }
    let k = x.partition_point(|&xi| xi <= v) - 1;
    let t = (v - x[k]) / (x[k + 1] - x[k]);
    y[k] + t * (y[k + 1] - y[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcSpec {
    Dirichlet(f64),
    /// Outward normal flux density.
    Flux(f64),
}

impl BcSpec {
    fn condition(self) -> SideCondition {
        match self {
            BcSpec::Dirichlet(v) => SideCondition::Dirichlet(Arc::new(move |_| v)),
            BcSpec::Flux(v) => SideCondition::Flux(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcFile {
    pub default: BcSpec,
    /// Overrides keyed by `x_lo`, `x_hi`, `y_lo`, `y_hi`, `z_lo`, `z_hi`.
    #[serde(default)]
    pub sides: BTreeMap<String, BcSpec>,
}

fn parse_side(name: &str, dim: usize) -> Result<BoundarySide> {
    let (axis, side) = name
        .split_once('_')
        .ok_or_else(|| Error::InvalidConfig(format!("bad boundary side '{name}'")))?;
    let axis = match axis {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        _ => {
            return Err(Error::InvalidConfig(format!(
                "bad boundary axis in '{name}'"
            )));
        }
    };
    let side = match side {
        "lo" => Side::Lo,
        "hi" => Side::Hi,
        _ => {
            return Err(Error::InvalidConfig(format!(
                "bad boundary side in '{name}'"
            )));
        }
    };
    if axis >= dim {
        return Err(Error::InvalidConfig(format!(
            "side '{name}' does not exist in {dim}D"
        )));
    }
    Ok(BoundarySide::new(axis, side))
}

impl BcFile {
    fn build(&self, dim: usize) -> Result<BoundaryConditions> {
        let mut bc = BoundaryConditions::uniform(dim, self.default.condition());
        for (name, spec) in &self.sides {
            bc.set(parse_side(name, dim)?, spec.condition());
        }
        Ok(bc)
    }
}

/// Optional overrides of the estimated coefficient metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub l_s: Option<f64>,
    pub a_lo: Option<f64>,
    pub a_hi: Option<f64>,
    pub l_a: Option<f64>,
    pub l_fw: Option<f64>,
    pub m_fw: Option<f64>,
    pub l_f1: Option<f64>,
    pub l_f2: Option<f64>,
    pub l_f3: Option<f64>,
    pub m_u: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectionFile {
    pub rate: f64,
    pub location: [f64; 3],
    #[serde(default = "one")]
    pub wetting_fraction: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomProblemFile {
    pub name: String,
    pub dim: usize,
    pub extents: Option<Vec<(f64, f64)>>,
    pub saturation: Law,
    pub a: Law,
    pub frac_flow: Law,
    /// Constant right-hand side of the pressure equation.
    pub f2: Option<f64>,
    /// Constant source of the saturation equation.
    pub source: Option<f64>,
    pub injection: Option<InjectionFile>,
    pub pressure_bc: BcFile,
    pub saturation_bc: BcFile,
    #[serde(default)]
    pub initial_theta: f64,
    pub theta_range: (f64, f64),
    #[serde(default)]
    pub bounds: BoundsFile,
    pub default_l: Option<f64>,
}

const ESTIMATE_SAMPLES: usize = 20_001;
/// Relative margin added to sampled estimates so that they dominate the validation samples.
const ESTIMATE_MARGIN: f64 = 1.01;

fn samples(lo: f64, hi: f64) -> Vec<f64> {
    (0..ESTIMATE_SAMPLES)
        .map(|k| lo + (hi - lo) * k as f64 / (ESTIMATE_SAMPLES - 1) as f64)
        .collect()
}

fn sampled_lipschitz(f: &ScalarLaw, lo: f64, hi: f64) -> f64 {
    let xs = samples(lo, hi);
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let max = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
        .fold(0.0, f64::max);
    max * ESTIMATE_MARGIN
}

fn sampled_range(f: &ScalarLaw) -> (f64, f64) {
    samples(0.0, 1.0)
        .iter()
        .map(|&x| f(x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        })
}

impl CustomProblemFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn build(&self) -> Result<Problem> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::InvalidDimension(self.dim));
        }
        let saturation = self.saturation.to_fn()?;
        let a = self.a.to_fn()?;
        let frac_flow = self.frac_flow.to_fn()?;
        let (lo, hi) = self.theta_range;
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "empty theta range [{lo}, {hi}]"
            )));
        }
        let b = &self.bounds;
        let (a_min, a_max) = sampled_range(&a);
        let (fw_min, fw_max) = sampled_range(&frac_flow);
        let bounds = CoefficientBounds {
            l_s: b
                .l_s
                .unwrap_or_else(|| sampled_lipschitz(&saturation, lo, hi)),
            a_lo: Some(b.a_lo.unwrap_or(a_min)),
            a_hi: Some(b.a_hi.unwrap_or(a_max)),
            l_a: Some(b.l_a.unwrap_or_else(|| sampled_lipschitz(&a, 0.0, 1.0))),
            l_fw: Some(
                b.l_fw
                    .unwrap_or_else(|| sampled_lipschitz(&frac_flow, 0.0, 1.0)),
            ),
            m_fw: Some(b.m_fw.unwrap_or(fw_min.abs().max(fw_max.abs()))),
            l_f1: Some(b.l_f1.unwrap_or(0.0)),
            l_f2: Some(b.l_f2.unwrap_or(0.0)),
            l_f3: Some(b.l_f3.unwrap_or(0.0)),
            m_u: b.m_u,
        };
        let f2 = self.f2.map(|v| Arc::new(move |_: &Point, _: f64| v) as _);
        let source = self
            .source
            .map(|v| Arc::new(move |_: f64, _: &Point| v) as _);
        let injection = self.injection.as_ref().map(|i| Injection {
            rate: i.rate,
            location: i.location,
            wetting_fraction: i.wetting_fraction,
        });
        let coeffs = CoefficientSet {
            saturation,
            a,
            frac_flow,
            f1: None,
            f2,
            f3: None,
            source,
            injection,
            bounds,
            theta_range: self.theta_range,
        };
        coeffs.validate(&[])?;
        let theta0 = self.initial_theta;
        Ok(Problem {
            name: self.name.clone(),
            dim: self.dim,
            extents: self
                .extents
                .clone()
                .unwrap_or_else(|| vec![(0.0, 1.0); self.dim]),
            default_l: self.default_l.unwrap_or(coeffs.bounds.l_s),
            coeffs,
            pressure_bc: self.pressure_bc.build(self.dim)?,
            saturation_bc: self.saturation_bc.build(self.dim)?,
            initial_theta: Arc::new(move |_| theta0),
            exact: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "name": "sample",
        "dim": 2,
        "saturation": { "type": "power", "coef": 1.0, "exponent": 2.0 },
        "a": { "type": "constant", "value": 1.0 },
        "frac_flow": { "type": "tabulated", "x": [0, 1], "y": [0, 1] },
        "source": 1.0,
        "pressure_bc": { "default": { "dirichlet": 0.0 } },
        "saturation_bc": { "default": { "flux": 0.0 }, "sides": { "x_lo": { "dirichlet": 0.0 } } },
        "theta_range": [0.0, 1.0]
    }"#;

    #[test]
    fn sample_file_builds() {
        let f: CustomProblemFile = serde_json::from_str(SAMPLE).unwrap();
        let pb = f.build().unwrap();
        assert!((pb.coeffs.bounds.l_s - 2.0).abs() < 0.03);
        assert_eq!(pb.coeffs.bounds.l_a, Some(0.0));
        assert_eq!(pb.coeffs.bounds.m_fw, Some(1.0));
        assert!(matches!(
            pb.saturation_bc.get(BoundarySide::new(0, Side::Lo)),
            SideCondition::Dirichlet(_)
        ));
        assert!(matches!(
            pb.saturation_bc.get(BoundarySide::new(1, Side::Lo)),
            SideCondition::Flux(_)
        ));
    }

    #[test]
    fn tabulated_interpolation() {
        let law = Law::Tabulated {
            x: vec![0.0, 1.0, 2.0],
            y: vec![0.0, 2.0, 3.0],
        }
        .to_fn()
        .unwrap();
        assert_eq!(law(-1.0), 0.0);
        assert_eq!(law(0.5), 1.0);
        assert_eq!(law(1.5), 2.5);
        assert_eq!(law(5.0), 3.0);
        assert!(
            Law::Tabulated {
                x: vec![0.0, 0.0],
                y: vec![0.0, 1.0]
            }
            .to_fn()
            .is_err()
        );
    }

    #[test]
    fn rejects_bad_side_and_decreasing_s() {
        assert!(parse_side("w_lo", 2).is_err());
        assert!(parse_side("z_hi", 2).is_err());
        let mut f: CustomProblemFile = serde_json::from_str(SAMPLE).unwrap();
        f.saturation = Law::Linear {
            slope: -1.0,
            intercept: 1.0,
        };
        assert!(f.build().is_err());
    }
}
