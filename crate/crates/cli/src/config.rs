//! Experiment configuration: one JSON document per run. Flags only pick
//! the config file and the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use pme_core::boundary::{Bump, Constant, CornerRamp, Datum, LinearInT};
use pme_core::exact::{normalize_c, BarenblattParams, BarenblattTrace};
use pme_core::geometry::{DomainMask, SpaceTimeGrid};
use pme_core::SolverConfig;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the invoked subcommand; keeps configs self-describing
    /// and replayable from the manifest alone.
    pub command: String,
    pub m: f64,
    pub grid: Option<GridSpec>,
    pub datum: Option<DatumSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweeps: Sweeps,
    pub barenblatt: Option<BarenblattSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// interval | square | l-shape | torus | mask-file
    pub base: String,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub h: f64,
    pub t_final: f64,
    pub nt: usize,
    pub mask_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatumSpec {
    Constant {
        value: f64,
    },
    LinearInT {
        a: f64,
        b: f64,
    },
    Bump {
        base: f64,
        amp: f64,
        width: f64,
        center: [f64; 2],
        #[serde(default)]
        decay: f64,
    },
    BarenblattTrace {
        c: Option<f64>,
        t0: f64,
        #[serde(default)]
        normalized: bool,
    },
    #[serde(rename = "l-corner-ramp")]
    LCornerRamp {
        corner: [f64; 2],
        scale: f64,
        height: f64,
    },
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub reg_eps: Option<f64>,
    pub linear_tol: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweeps {
    pub eps: Option<Vec<f64>>,
    pub delta: Option<Vec<f64>>,
    pub jmax: Option<usize>,
    /// Refinement rows `[n, nt, jsmooth]` for the resolutivity ladder.
    pub levels: Option<Vec<[usize; 3]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarenblattSpec {
    /// Spatial dimension of the self-similar family (1 or 2).
    pub n: usize,
    pub c: Option<f64>,
    #[serde(default)]
    pub normalized: bool,
    #[serde(default)]
    pub t0: f64,
    pub times: Vec<f64>,
    #[serde(default = "default_quadrature")]
    pub quadrature: usize,
}

fn default_quadrature() -> usize {
    20_000
}

pub fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if !(cfg.m > 1.0) {
        return Err(Failure::Config(format!("m must be > 1, got {}", cfg.m)));
    }
    if let Some(eps) = &cfg.sweeps.eps {
        if eps.is_empty() {
            return Err(Failure::Config("sweeps.eps must be nonempty when given".into()));
        }
    }
    if let Some(delta) = &cfg.sweeps.delta {
        if delta.is_empty() {
            return Err(Failure::Config("sweeps.delta must be nonempty when given".into()));
        }
    }
    if let Some(levels) = &cfg.sweeps.levels {
        if levels.is_empty() {
            return Err(Failure::Config("sweeps.levels must be nonempty when given".into()));
        }
    }
    Ok(cfg)
}

/// Raw config bytes, for hashing into the manifest.
pub fn raw_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn expect_command(&self, name: &str) -> Result<(), Failure> {
        if self.command != name {
            return Err(Failure::Config(format!(
                "config names command \"{}\" but \"{name}\" was invoked",
                self.command
            )));
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::with_m(self.m);
        if let Some(v) = self.solver.newton_tol {
            cfg.newton_tol = v;
        }
        if let Some(v) = self.solver.newton_max_iter {
            cfg.newton_max_iter = v;
        }
        if let Some(v) = self.solver.reg_eps {
            cfg.reg_eps = v;
        }
        if let Some(v) = self.solver.linear_tol {
            cfg.linear_tol = v;
        }
        cfg
    }

    pub fn grid_spec(&self) -> Result<&GridSpec, Failure> {
        self.grid.as_ref().ok_or_else(|| Failure::Config("missing \"grid\" block".into()))
    }

    pub fn datum_spec(&self) -> Result<&DatumSpec, Failure> {
        self.datum.as_ref().ok_or_else(|| Failure::Config("missing \"datum\" block".into()))
    }
}

pub fn build_mask(spec: &GridSpec) -> Result<DomainMask, Failure> {
    let named = |r: pme_core::error::Result<DomainMask>| {
        r.map_err(|e| Failure::Config(format!("grid: {e}")))
    };
    match spec.base.as_str() {
        "interval" => named(DomainMask::interval(spec.n, spec.h)),
        "square" => named(DomainMask::square(spec.n, spec.h)),
        "l-shape" => named(DomainMask::l_shape(spec.n, spec.h)),
        "torus" => named(DomainMask::torus(spec.n, spec.n, spec.h)),
        "mask-file" => {
            let path = spec
                .mask_file
                .as_ref()
                .ok_or_else(|| Failure::Config("base \"mask-file\" needs mask_file".into()))?;
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            named(DomainMask::from_text(&text))
        }
        other => Err(Failure::Config(format!(
            "unknown grid base \"{other}\" (interval|square|l-shape|torus|mask-file)"
        ))),
    }
}

pub fn build_grid(spec: &GridSpec) -> Result<SpaceTimeGrid, Failure> {
    let mask = build_mask(spec)?;
    SpaceTimeGrid::new(mask, spec.t_final, spec.nt).map_err(|e| Failure::Config(format!("grid: {e}")))
}

pub fn build_datum(
    spec: &DatumSpec,
    m: f64,
    dim: usize,
    t_final: f64,
) -> Result<Box<dyn Datum>, Failure> {
    match spec {
        DatumSpec::Constant { value } => {
            if *value < 0.0 {
                return Err(Failure::Config("constant datum must be >= 0".into()));
            }
            Ok(Box::new(Constant { c: *value, m }))
        }
        DatumSpec::LinearInT { a, b } => {
            if *a < 0.0 || a + b * t_final < 0.0 {
                return Err(Failure::Config("linear-in-t datum goes negative".into()));
            }
            Ok(Box::new(LinearInT::new(*a, *b, m, t_final)))
        }
        DatumSpec::Bump { base, amp, width, center, decay } => {
            if *base < 0.0 || base + amp.min(0.0) < 0.0 || *width <= 0.0 {
                return Err(Failure::Config("bump datum must stay nonnegative".into()));
            }
            if 1.0 - decay * t_final <= 0.0 {
                return Err(Failure::Config("bump decay kills the datum before t_final".into()));
            }
            Ok(Box::new(Bump::new(
                *base,
                *amp,
                *width,
                (center[0], center[1]),
                *decay,
                m,
                dim,
                t_final,
            )))
        }
        DatumSpec::BarenblattTrace { c, t0, normalized } => {
            if *t0 <= 0.0 {
                return Err(Failure::Config("barenblatt-trace needs t0 > 0 for a bounded trace".into()));
            }
            let c = match (c, normalized) {
                (Some(c), false) => *c,
                (None, true) => normalize_c(dim, m, 20_000),
                (Some(_), true) => {
                    return Err(Failure::Config("give either c or normalized, not both".into()))
                }
                (None, false) => {
                    return Err(Failure::Config("barenblatt-trace needs c or normalized=true".into()))
                }
            };
            let p = BarenblattParams { n: dim, m, c, t0: *t0 };
            Ok(Box::new(BarenblattTrace { p }))
        }
        DatumSpec::LCornerRamp { corner, scale, height } => {
            if *scale <= 0.0 || *height < 0.0 {
                return Err(Failure::Config("l-corner-ramp needs scale > 0, height >= 0".into()));
            }
            Ok(Box::new(CornerRamp {
                corner: (corner[0], corner[1]),
                scale: *scale,
                height: *height,
                m,
            }))
        }
    }
}
