use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lscheme_core::Error;
use lscheme_core::cli::{
    EXIT_TAU_INADMISSIBLE, MobilityChoice, ProblemKind, RunConfig, cmd_check_tau,
    cmd_convergence_study, cmd_injection, cmd_lscheme_probe, exit_code,
};

/// Mixed finite element two-phase flow solver with L-scheme linearization.
///
/// Log verbosity is read from the LSCHEME_LOG environment variable
/// (error, warn, info, debug, trace).
#[derive(Parser, Debug)]
#[command(name = "lscheme", version)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Manufactured-solution error table with convergence rates.
    ConvergenceStudy,
    /// Full simulation with VTK snapshots and iteration history.
    Injection,
    /// Time-step admissibility of the L-scheme.
    CheckTau,
    /// Iteration history of a single time step.
    LschemeProbe,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true, value_enum)]
    problem: Option<ProblemKind>,
    #[arg(long, global = true)]
    custom_file: Option<PathBuf>,
    /// Cells per axis, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    t_end: Option<f64>,
    #[arg(long = "l", global = true)]
    l: Option<f64>,
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    mass_lumping: bool,
    #[arg(long, global = true)]
    c_omega_d: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    snapshot_cadence: Option<usize>,
    #[arg(long, global = true)]
    levels: Option<usize>,
    #[arg(long, global = true)]
    s_init: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mobility: Option<MobilityChoice>,
    #[arg(long, global = true)]
    injection_rate: Option<f64>,
    #[arg(long, global = true)]
    m_u: Option<f64>,
    #[arg(long, global = true)]
    probe_step: Option<usize>,
}

impl Overrides {
    fn apply(self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { cfg.$field = self.$field; } )* };
        }
        set!(
            problem,
            tol_abs,
            tol_rel,
            max_iters,
            c_omega_d,
            output_dir,
            snapshot_cadence,
            levels,
            mobility,
            injection_rate
        );
        set_opt!(custom_file, counts, tau, t_end, l, s_init, m_u, probe_step);
        if self.mass_lumping {
            cfg.mass_lumping = true;
        }
    }
}

fn build_config(cli: Cli) -> Result<(Command, RunConfig), Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let problem = match cli.command {
                Command::ConvergenceStudy => ProblemKind::Manufactured2d,
                _ => ProblemKind::Injection3d,
            };
            RunConfig {
                problem,
                ..Default::default()
            }
        }
    };
    cli.overrides.apply(&mut cfg);
    Ok((cli.command, cfg))
}

fn run(command: Command, cfg: &RunConfig) -> Result<i32, Error> {
    match command {
        Command::ConvergenceStudy => {
            let table = cmd_convergence_study(cfg)?;
            println!(
                "{:>10} {:>10} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6} {:>12} {:>6}",
                "h", "tau", "E_p", "rate", "E_stheta", "rate", "E_theta", "rate", "E_s", "rate"
            );
            for row in &table.rows {
                let r = &row.report;
                let e = r.columns();
                let mut line = format!("{:>10.6} {:>10.6}", r.h, r.tau);
                for (k, v) in e.iter().enumerate() {
                    let rate = row
                        .rates
                        .map(|rates| format!("{:.2}", rates[k]))
                        .unwrap_or_else(|| "--".into());
                    line.push_str(&format!(" {v:>12.3e} {rate:>6}"));
                }
                println!("{line}");
            }
            Ok(0)
        }
        Command::Injection => {
            let out = cmd_injection(cfg)?;
            let its: Vec<usize> = out.histories.iter().map(|h| h.iterations()).collect();
            if let (Some(min), Some(max)) = (its.iter().min(), its.iter().max()) {
                println!("{} steps, iterations per step in [{min}, {max}]", its.len());
            } else {
                println!("0 steps");
            }
            if let Some((n, last)) = out.snapshots.last() {
                println!(
                    "step {n}: max saturation {:.6} in cell {:?}",
                    last.sat.max(),
                    last.sat.argmax()
                );
            }
            Ok(0)
        }
        Command::CheckTau => {
            let out = cmd_check_tau(cfg)?;
            print!("{}", out.render());
            Ok(if out.report.admissible {
                0
            } else {
                EXIT_TAU_INADMISSIBLE
            })
        }
        Command::LschemeProbe => {
            let out = cmd_lscheme_probe(cfg)?;
            println!("step {}: {} iterations", out.step, out.history.iterations());
            for r in &out.history.records {
                let ratio = r
                    .ratio
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "--".into());
                println!(
                    "  iter {:>3}  inc_theta {:.3e}  inc_q {:.3e}  ratio {ratio}",
                    r.iter, r.inc_theta, r.inc_q
                );
            }
            if let Some(c) = &out.contraction {
                println!("rho = {:.4}", c.rho.unwrap_or(f64::NAN));
            }
            println!("history written to {}", out.file.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LSCHEME_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = build_config(cli).and_then(|(command, cfg)| run(command, &cfg));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
