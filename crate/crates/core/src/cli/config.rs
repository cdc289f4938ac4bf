//! Run configuration: a JSON document whose fields can be overridden from the command line.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::custom::CustomProblemFile;
use crate::error::{Error, Result};
use crate::grid::StructuredGrid;
use crate::model::{
    InjectionOptions, MobilityModel, Problem, builtin_injection_3d, builtin_manufactured_2d,
};
use crate::stepper::{LSchemeConfig, StepperOptions, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Manufactured2d,
    Injection3d,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MobilityChoice {
    /// `1e6 / (s^2 + (1-s)^2)`
    InversePermeability,
    /// `1e-6 / (s^2 + (1-s)^2)`
    Displayed,
    /// `1 / (k (s^2/mu_w + (1-s)^2/mu_o))` with `k = 1e-6`, `mu_w = 1e-3`, `mu_o = 1e-2`
    Dimensional,
}

impl MobilityChoice {
    pub fn model(self) -> MobilityModel {
        match self {
            MobilityChoice::InversePermeability => MobilityModel::INVERSE_PERMEABILITY,
            MobilityChoice::Displayed => MobilityModel::DISPLAYED,
            MobilityChoice::Dimensional => MobilityModel::standard_dimensional(),
        }
    }
}

/// Every field is optional in the file; `None` means "problem default".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub custom_file: Option<PathBuf>,
    pub counts: Option<Vec<usize>>,
    pub extents: Option<Vec<(f64, f64)>>,
    pub tau: Option<f64>,
    pub t_end: Option<f64>,
    pub l: Option<f64>,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub max_iters: usize,
    pub mass_lumping: bool,
    pub c_omega_d: f64,
    pub output_dir: PathBuf,
    /// Snapshot every this many steps; 0 keeps only the final state.
    pub snapshot_cadence: usize,
    pub levels: usize,
    pub s_init: Option<f64>,
    pub mobility: MobilityChoice,
    pub injection_rate: f64,
    /// Flux sup-norm bound for the time-step check; estimated by a pilot solve when absent.
    pub m_u: Option<f64>,
    /// Time step whose iteration history `lscheme-probe` reports; defaults to the step at `t = 20`
    /// for the injection problem and to the last step otherwise.
    pub probe_step: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let inj = InjectionOptions::default();
        Self {
            problem: ProblemKind::Manufactured2d,
            custom_file: None,
            counts: None,
            extents: None,
            tau: None,
            t_end: None,
            l: None,
            tol_abs: 1e-8,
            tol_rel: 0.0,
            max_iters: 200,
            mass_lumping: false,
            c_omega_d: 1.0,
            output_dir: PathBuf::from("out"),
            snapshot_cadence: 0,
            levels: 4,
            s_init: None,
            mobility: MobilityChoice::InversePermeability,
            injection_rate: inj.rate,
            m_u: None,
            probe_step: None,
        }
    }
}

/// A configuration with every default filled in and every precondition checked.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub problem: Problem,
    pub grid: StructuredGrid,
    pub time: TimeGrid,
    pub lscheme: LSchemeConfig,
    pub options: StepperOptions,
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("run config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)?;
        // custom problem paths are relative to the config file
        if let (Some(file), Some(dir)) = (&cfg.custom_file, path.parent())
            && file.is_relative()
        {
            cfg.custom_file = Some(dir.join(file));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("RunConfig serializes")
    }

    pub fn build_problem(&self) -> Result<Problem> {
        match self.problem {
            ProblemKind::Manufactured2d => Ok(builtin_manufactured_2d(self.t_end.unwrap_or(1.0))),
            ProblemKind::Injection3d => {
                let defaults = InjectionOptions::default();
                builtin_injection_3d(&InjectionOptions {
                    mobility: self.mobility.model(),
                    s_init: self.s_init.unwrap_or(defaults.s_init),
                    rate: self.injection_rate,
                    ..defaults
                })
            }
            ProblemKind::Custom => {
                let path = self.custom_file.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("problem 'custom' needs custom_file".into())
                })?;
                CustomProblemFile::load(path)?.build()
            }
        }
    }

    fn default_counts(&self, problem: &Problem) -> Vec<usize> {
        match self.problem {
            ProblemKind::Manufactured2d => vec![4, 4],
            ProblemKind::Injection3d => vec![20, 20, 20],
            ProblemKind::Custom => vec![8; problem.dim],
        }
    }

    fn default_times(&self) -> (f64, f64) {
        match self.problem {
            ProblemKind::Manufactured2d => (0.2, 1.0),
            ProblemKind::Injection3d => (0.5, 50.0),
            ProblemKind::Custom => (0.1, 1.0),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let mut problem = self.build_problem()?;
        if let Some(m_u) = self.m_u {
            problem.coeffs.bounds.m_u = Some(m_u);
        }
        if let Some(ext) = &self.extents {
            problem.extents = ext.clone();
        }
        let counts = self
            .counts
            .clone()
            .unwrap_or_else(|| self.default_counts(&problem));
        if counts.len() != problem.dim {
            return Err(Error::InvalidConfig(format!(
                "{} grid counts given for a {}D problem",
                counts.len(),
                problem.dim
            )));
        }
        let grid = StructuredGrid::new(problem.dim, &problem.extents, &counts)?;
        let (tau, t_end) = self.default_times();
        let time = TimeGrid::from_end(self.t_end.unwrap_or(t_end), self.tau.unwrap_or(tau))?;
        let lscheme = LSchemeConfig {
            l: self.l.unwrap_or(problem.default_l),
            tol_abs: self.tol_abs,
            tol_rel: self.tol_rel,
            max_iters: self.max_iters,
        };
        lscheme.validate(&problem.coeffs.bounds)?;
        if !(self.c_omega_d > 0.0 && self.c_omega_d.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "C_omega_d must be positive, got {}",
                self.c_omega_d
            )));
        }
        Ok(ResolvedRun {
            problem,
            grid,
            time,
            lscheme,
            options: StepperOptions {
                mass_lumping: self.mass_lumping,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let r = RunConfig::default().resolve().unwrap();
        assert_eq!(r.grid.counts(), &[4, 4]);
        assert_eq!(r.time.n_steps, 5);
        assert!((r.lscheme.l - 0.125).abs() < 1e-15);

        let cfg = RunConfig {
            problem: ProblemKind::Injection3d,
            counts: Some(vec![4, 4, 4]),
            ..Default::default()
        };
        let r = cfg.resolve().unwrap();
        assert_eq!(r.time.n_steps, 100);
        assert_eq!(r.lscheme.l, 2.0);
    }

    #[test]
    fn rejects_small_l_with_reason() {
        let cfg = RunConfig {
            l: Some(0.01),
            ..Default::default()
        };
        let msg = cfg.resolve().unwrap_err().to_string();
        assert!(msg.contains("L >= L_s"), "{msg}");
        let cfg = RunConfig {
            tau: Some(-1.0),
            ..Default::default()
        };
        assert!(cfg.resolve().is_err());
        let cfg = RunConfig {
            counts: Some(vec![4, 4, 4]),
            ..Default::default()
        };
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn json_roundtrip_and_unknown_keys() {
        let cfg = RunConfig::from_json_str(
            r#"{"problem": "injection3d", "counts": [8, 8, 8], "mobility": "dimensional"}"#,
        )
        .unwrap();
        assert_eq!(cfg.problem, ProblemKind::Injection3d);
        assert_eq!(cfg.mobility, MobilityChoice::Dimensional);
        assert_eq!(cfg.tol_abs, 1e-8);
        let back: RunConfig = serde_json::from_value(cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert!(RunConfig::from_json_str(r#"{"tua": 1}"#).is_err());
    }
}
