//! Result files: convergence and iteration CSV tables, legacy VTK cell data
//! and a run manifest with checksums.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{ConvergenceRow, ConvergenceTable, ErrorReport};
use crate::error::{Error, Result};
use crate::fespace::ScalarFieldP0;
use crate::grid::StructuredGrid;
use crate::stepper::{IterationHistory, IterationRecord};

pub const CONVERGENCE_COLUMNS: [&str; 10] = [
    "h",
    "tau",
    "E_p",
    "rate_p",
    "E_stheta",
    "rate_stheta",
    "E_theta",
    "rate_theta",
    "E_s",
    "rate_s",
];
pub const HISTORY_COLUMNS: [&str; 5] = ["step", "iter", "inc_theta", "inc_q", "ratio"];

/// 17 significant digits, enough to round-trip any f64.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, comment: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "# {comment}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: unexpected header {found:?}",
            path.display()
        )));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_err(path, e)))
        .collect()
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("not a number: '{s}'")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.trim().is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

/// Writes a convergence table; rate cells of the first row are empty.
pub fn write_convergence_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::InsufficientRows(0));
    }
    let rows = table
        .rows
        .iter()
        .map(|row| {
            let r = &row.report;
            let e = r.columns();
            let mut out = vec![num(r.h), num(r.tau)];
            for k in 0..4 {
                out.push(num(e[k]));
                out.push(opt_num(row.rates.map(|rates| rates[k])));
            }
            out
        })
        .collect();
    write_rows(
        path,
        "columns: h, tau, then E_p, E_stheta, E_theta, E_s each followed by its rate against the previous row",
        &CONVERGENCE_COLUMNS,
        rows,
    )
}

pub fn read_convergence_csv(path: &Path) -> Result<ConvergenceTable> {
    let mut rows = Vec::new();
    for rec in read_rows(path, &CONVERGENCE_COLUMNS)? {
        let f: Vec<&str> = rec.iter().collect();
        let e: Vec<f64> = [2, 4, 6, 8]
            .iter()
            .map(|&i| parse_f64(f[i]))
            .collect::<Result<_>>()?;
        let rates: Vec<Option<f64>> = [3, 5, 7, 9]
            .iter()
            .map(|&i| parse_opt(f[i]))
            .collect::<Result<_>>()?;
        let rates = if rates.iter().all(Option::is_none) {
            None
        } else {
            let vals: Option<Vec<f64>> = rates.into_iter().collect();
            let vals = vals.ok_or_else(|| {
                Error::Parse(format!("{}: partially empty rate cells", path.display()))
            })?;
            Some([vals[0], vals[1], vals[2], vals[3]])
        };
        let report = ErrorReport {
            h: parse_f64(f[0])?,
            tau: parse_f64(f[1])?,
            e_p: e[0],
            e_stheta: e[1],
            e_theta: e[2],
            e_s: e[3],
            e_q: None,
        };
        rows.push(ConvergenceRow { report, rates });
    }
    Ok(ConvergenceTable { rows })
}

/// Writes one row per iteration of every history; `ratio` is empty on first iterations.
pub fn write_history_csv(histories: &[IterationHistory], path: &Path) -> Result<()> {
    if histories.iter().all(|h| h.records.is_empty()) {
        return Err(Error::Parse("iteration history is empty".into()));
    }
    let rows = histories
        .iter()
        .flat_map(|h| {
            h.records.iter().map(move |r| {
                vec![
                    h.step.to_string(),
                    r.iter.to_string(),
                    num(r.inc_theta),
                    num(r.inc_q),
                    opt_num(r.ratio),
                ]
            })
        })
        .collect();
    write_rows(
        path,
        "columns: time step, iteration, L2 increments of theta and q, increment ratio",
        &HISTORY_COLUMNS,
        rows,
    )
}

/// Reads a history CSV back as `(step, record)` pairs. Residual fields are not stored and read as zero.
pub fn read_history_csv(path: &Path) -> Result<Vec<(usize, IterationRecord)>> {
    read_rows(path, &HISTORY_COLUMNS)?
        .iter()
        .map(|rec| {
            let f: Vec<&str> = rec.iter().collect();
            let int = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("not an integer: '{s}'")))
            };
            Ok((
                int(f[0])?,
                IterationRecord {
                    iter: int(f[1])?,
                    inc_theta: parse_f64(f[2])?,
                    inc_q: parse_f64(f[3])?,
                    ratio: parse_opt(f[4])?,
                    div_residual: 0.0,
                },
            ))
        })
        .collect()
}

/// Legacy ASCII VTK, `STRUCTURED_POINTS` with one `SCALARS` block per field.
pub fn vtk_string(grid: &StructuredGrid, fields: &[(&str, &ScalarFieldP0)]) -> Result<String> {
    let nc = grid.num_cells();
    for (name, f) in fields {
        if f.len() != nc {
            return Err(Error::LengthMismatch {
                what: "VTK field",
                expected: nc,
                got: f.len(),
            });
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!(
                "VTK field name '{name}' must be nonempty without whitespace"
            )));
        }
    }
    let counts = grid.counts();
    let h = grid.h();
    let mut dims = [1usize; 3];
    let mut origin = [0.0; 3];
    let mut spacing = [1.0; 3];
    for a in 0..grid.dim() {
        dims[a] = counts[a] + 1;
        origin[a] = grid.extent(a).0;
        spacing[a] = h[a];
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nlscheme cell data\nASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(s, "ORIGIN {} {} {}", origin[0], origin[1], origin[2]);
    let _ = writeln!(s, "SPACING {} {} {}", spacing[0], spacing[1], spacing[2]);
    if !fields.is_empty() {
        let _ = writeln!(s, "CELL_DATA {nc}");
        for (name, f) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
            for v in &f.values {
                let _ = writeln!(s, "{v}");
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(
    grid: &StructuredGrid,
    fields: &[(&str, &ScalarFieldP0)],
    path: &Path,
) -> Result<()> {
    let text = vtk_string(grid, fields)?;
    let mut file = create(path)?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub assembly_s: f64,
    pub solve_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub grids: Vec<String>,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub linear_residual_tol: f64,
    pub timings: PhaseTimings,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, tol_abs: f64, tol_rel: f64) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            grids: Vec::new(),
            tol_abs,
            tol_rel,
            linear_residual_tol: crate::linsolve::RESIDUAL_TOL,
            timings: PhaseTimings::default(),
            artifacts: Vec::new(),
        }
    }

    pub fn describe_grid(&mut self, grid: &StructuredGrid) {
        let counts: Vec<String> = grid.counts().iter().map(usize::to_string).collect();
        self.grids.push(format!(
            "{}D {} cells, {} faces",
            grid.dim(),
            counts.join("x"),
            grid.num_faces()
        ));
    }

    /// Records a file already written under `out_dir`.
    pub fn add_artifact(&mut self, out_dir: &Path, path: &Path) -> Result<()> {
        let rel: PathBuf = path.strip_prefix(out_dir).unwrap_or(path).to_path_buf();
        let sha256 = sha256_file(path)?;
        self.artifacts.push(Artifact {
            path: rel.to_string_lossy().replace('\\', "/"),
            sha256,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        let mut file = create(path)?;
        file.write_all(text.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        file.write_all(b"\n").map_err(|e| Error::io(path, e))
    }
}
