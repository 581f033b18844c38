//! Output plumbing. Every artifact is written atomically (temp file in
//! the target directory, then rename); the manifest goes last, so a
//! directory containing `manifest.json` is a complete run. CSV cells use
//! the shortest round-trip float format, which makes reruns of the same
//! config byte-identical.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use pme_core::verify::EstimateReport;
use pme_core::{ScalarField, SolveReport, SolverConfig};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::Failure;

pub struct Sink {
    dir: PathBuf,
    command: String,
    config_sha256: String,
    /// Parsed config echo, replayed into the manifest.
    config_echo: serde_json::Value,
    tolerances: SolverConfig,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct ManifestTolerances {
    m: f64,
    newton_tol: f64,
    newton_max_iter: usize,
    reg_eps: f64,
    linear_tol: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_sha256: &'a str,
    config: &'a serde_json::Value,
    tolerances: ManifestTolerances,
    outputs: &'a [String],
    /// Sole nondeterministic entry; everything else reruns byte-equal.
    timestamp_unix: u64,
}

impl Sink {
    pub fn new(
        dir: &std::path::Path,
        command: &str,
        raw_config: &[u8],
        cfg: &ExperimentConfig,
    ) -> Result<Sink, Failure> {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::Config(format!("cannot create {}: {e}", dir.display())))?;
        let config_echo: serde_json::Value = serde_json::from_slice(raw_config)
            .map_err(|e| Failure::Config(format!("config echo: {e}")))?;
        let mut hasher = Sha256::new();
        hasher.update(raw_config);
        Ok(Sink {
            dir: dir.to_path_buf(),
            command: command.into(),
            config_sha256: format!("{:x}", hasher.finalize()),
            config_echo,
            tolerances: cfg.solver_config(),
            outputs: Vec::new(),
        })
    }

    /// Atomic write: temp name in the same directory, then rename.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        let err = |e: std::io::Error| Failure::Config(format!("writing {name}: {e}"));
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let path = self.dir.join(name);
        {
            let mut f = fs::File::create(&tmp).map_err(err)?;
            f.write_all(bytes).map_err(err)?;
            f.sync_all().map_err(err)?;
        }
        fs::rename(&tmp, &path).map_err(err)?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| Failure::Config(format!("serializing {name}: {e}")))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    pub fn finish(self) -> Result<(), Failure> {
        let timestamp_unix =
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let t = &self.tolerances;
        let manifest = Manifest {
            command: &self.command,
            config_sha256: &self.config_sha256,
            config: &self.config_echo,
            tolerances: ManifestTolerances {
                m: t.m,
                newton_tol: t.newton_tol,
                newton_max_iter: t.newton_max_iter,
                reg_eps: t.reg_eps,
                linear_tol: t.linear_tol,
            },
            outputs: &self.outputs,
            timestamp_unix,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)
            .map_err(|e| Failure::Config(format!("serializing manifest: {e}")))?;
        bytes.push(b'\n');
        let dir = self.dir.clone();
        let err = |e: std::io::Error| Failure::Config(format!("writing manifest: {e}"));
        let tmp = dir.join(".manifest.json.tmp");
        {
            let mut f = fs::File::create(&tmp).map_err(err)?;
            f.write_all(&bytes).map_err(err)?;
            f.sync_all().map_err(err)?;
        }
        fs::rename(&tmp, dir.join("manifest.json")).map_err(err)?;
        Ok(())
    }
}

// ------------------------------------------------------------------
// Field dumps.

/// CSV of inside-cell values, one row per (slice, cell).
pub fn field_csv(u: &ScalarField) -> Vec<u8> {
    let grid = &u.grid;
    let mask = &grid.mask;
    let nx = mask.nx();
    let mut out = String::from("slice,ix,iy,value\n");
    for k in 0..=grid.nt() {
        for flat in mask.inside_cells() {
            let (ix, iy) = (flat % nx, flat / nx);
            out.push_str(&format!("{k},{ix},{iy},{}\n", u.at(k, flat)));
        }
    }
    out.into_bytes()
}

/// Little-endian dump: magic `PMEFLD01`, extents (nx, ny, nt as u32),
/// h, dt, m (f64), then `(nt+1) * ny * nx` doubles, slices outermost,
/// rows inner, zeros outside the mask.
pub fn field_bin(u: &ScalarField, m: f64) -> Vec<u8> {
    let grid = &u.grid;
    let mask = &grid.mask;
    let mut out = Vec::with_capacity(44 + 8 * u.values().len());
    out.extend_from_slice(b"PMEFLD01");
    for v in [mask.nx() as u32, mask.ny() as u32, grid.nt() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in [mask.h(), grid.dt(), m] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Centerline profile: for each slice, the row of cells nearest y = 0
/// (the whole line in 1D), with coordinates.
pub fn centerline_csv(u: &ScalarField) -> Vec<u8> {
    let grid = &u.grid;
    let mask = &grid.mask;
    let mut row: Vec<usize> = Vec::new();
    let mut best = f64::INFINITY;
    for flat in mask.inside_cells() {
        let (_, y) = mask.coords(flat);
        if y.abs() < best - 1e-12 {
            best = y.abs();
            row.clear();
        }
        if (y.abs() - best).abs() <= 1e-12 {
            row.push(flat);
        }
    }
    let mut out = String::from("slice,t,x,value\n");
    for k in 0..=grid.nt() {
        for &flat in &row {
            let (x, _) = mask.coords(flat);
            out.push_str(&format!("{k},{},{x},{}\n", grid.time(k), u.at(k, flat)));
        }
    }
    out.into_bytes()
}

// ------------------------------------------------------------------
// Report mirrors (the core crate carries no serde).

#[derive(Serialize)]
pub struct SolveReportJson {
    residual_per_step: Vec<f64>,
    newton_iters_per_step: Vec<usize>,
    max_field: f64,
    weak_form_residual: f64,
    penalty_violation: f64,
}

impl From<&SolveReport> for SolveReportJson {
    fn from(r: &SolveReport) -> Self {
        SolveReportJson {
            residual_per_step: r.residual_per_step.clone(),
            newton_iters_per_step: r.newton_iters_per_step.clone(),
            max_field: r.max_field,
            weak_form_residual: r.weak_form_residual,
            penalty_violation: r.penalty_violation,
        }
    }
}

#[derive(Serialize)]
pub struct ContextEntry {
    key: String,
    value: f64,
}

#[derive(Serialize)]
pub struct EstimateReportJson {
    name: String,
    lhs: f64,
    rhs: f64,
    margin: f64,
    satisfied: bool,
    context: Vec<ContextEntry>,
}

impl From<&EstimateReport> for EstimateReportJson {
    fn from(r: &EstimateReport) -> Self {
        EstimateReportJson {
            name: r.name.clone(),
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            satisfied: r.satisfied,
            context: r
                .context
                .iter()
                .map(|(k, v)| ContextEntry { key: k.clone(), value: *v })
                .collect(),
        }
    }
}

/// Verdict table over every report of the run.
pub fn verdict_csv(reports: &[EstimateReport]) -> Vec<u8> {
    let mut out = String::from("name,lhs,rhs,margin,satisfied\n");
    for r in reports {
        out.push_str(&format!("{},{},{},{},{}\n", r.name, r.lhs, r.rhs, r.margin, r.satisfied));
    }
    out.into_bytes()
}
