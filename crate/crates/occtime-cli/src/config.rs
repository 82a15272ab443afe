//! The JSON run configuration: which system to study, its noise, and the
//! initial condition, plus constructors for the library objects.

use std::path::Path;

use occtime::sliding_long::{FilippovSystem, NoiseSpec};
use occtime::{Error, Result};
use serde::Deserialize;

/// Top-level configuration file. `kind` selects the system and decides
/// which of the optional blocks apply:
///
/// * `"two_valued"` — scalar Brownian motion with drift `a_L` toward the
///   origin from the left and `-a_R` from the right (unit noise). Uses
///   `a_L`, `a_R`, and optionally `initial.x0`.
/// * `"builtin_example"` — the worked two-dimensional piecewise-affine
///   system. `noise` and `initial.y0` may override the defaults
///   (`epsilon = 0.1`, `D = [[1, 0], [0, 0.1]]`, `y0 = [2]`).
/// * `"piecewise_affine"` — drift `A [x; y] + c` on each side of the
///   switching plane. Requires `N`, `A_L`, `c_L`, `A_R`, `c_R`, `noise`,
///   and `initial.y0` (length `N - 1`).
///
/// Unknown keys are rejected so a typo cannot silently fall back to a
/// default.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: String,
    /// Drift toward the switching point from the left (two_valued only).
    #[serde(rename = "a_L", default)]
    pub a_l: Option<f64>,
    /// Drift toward the switching point from the right (two_valued only).
    #[serde(rename = "a_R", default)]
    pub a_r: Option<f64>,
    /// Full state dimension, transverse coordinate included
    /// (piecewise_affine only).
    #[serde(rename = "N", default)]
    pub n: Option<usize>,
    #[serde(rename = "A_L", default)]
    pub a_mat_left: Option<Vec<Vec<f64>>>,
    #[serde(rename = "c_L", default)]
    pub c_left: Option<Vec<f64>>,
    #[serde(rename = "A_R", default)]
    pub a_mat_right: Option<Vec<Vec<f64>>>,
    #[serde(rename = "c_R", default)]
    pub c_right: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub initial: Option<InitialConfig>,
}

/// Noise block: overall scale and the full-state mixing matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub epsilon: f64,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

/// Initial condition block. `x0` applies to the scalar two-valued system;
/// the piecewise-smooth systems start on the switching manifold (x = 0)
/// at the manifold point `y0`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default)]
    pub x0: Option<f64>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
}

/// The scalar two-valued-drift setup extracted from a config.
#[derive(Debug, Clone, Copy)]
pub struct TwoValuedSetup {
    pub a_l: f64,
    pub a_r: f64,
    pub x0: f64,
}

/// A config materialized into library objects.
pub enum BuiltSystem {
    TwoValued(TwoValuedSetup),
    Sliding {
        system: FilippovSystem,
        noise: NoiseSpec,
        y0: Vec<f64>,
    },
}

/// Reads and parses a config file, returning the parsed structure together
/// with the raw bytes (hashed into the run manifest).
pub fn load(path: &Path) -> Result<(SystemConfig, Vec<u8>)> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::Domain(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: SystemConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Domain(format!("invalid config {}: {e}", path.display())))?;
    Ok((cfg, bytes))
}

fn require<T: Copy>(field: Option<T>, kind: &str, name: &str) -> Result<T> {
    field.ok_or_else(|| Error::Domain(format!("kind \"{kind}\" requires the key \"{name}\"")))
}

fn forbid<T>(field: &Option<T>, kind: &str, name: &str) -> Result<()> {
    if field.is_some() {
        return Err(Error::Domain(format!(
            "key \"{name}\" does not apply to kind \"{kind}\""
        )));
    }
    Ok(())
}

fn forbid_x0(initial: &Option<InitialConfig>, kind: &str) -> Result<()> {
    if let Some(init) = initial {
        if let Some(x0) = init.x0 {
            if x0 != 0.0 {
                return Err(Error::Domain(format!(
                    "kind \"{kind}\" starts on the switching manifold; initial.x0 must be \
                     absent or 0, got {x0}"
                )));
            }
        }
    }
    Ok(())
}

/// The default noise of the built-in example: epsilon = 0.1 and
/// D = [[1, 0], [0, 0.1]], i.e. unit transverse noise variance,
/// independent manifold noise with variance 0.01.
pub fn builtin_default_noise() -> Result<NoiseSpec> {
    NoiseSpec::new(0.1, vec![vec![1.0, 0.0], vec![0.0, 0.1]])
}

/// Validates the per-kind key set and constructs the library objects.
pub fn build(cfg: &SystemConfig) -> Result<BuiltSystem> {
    let kind = cfg.kind.as_str();
    match kind {
        "two_valued" => {
            forbid(&cfg.n, kind, "N")?;
            forbid(&cfg.a_mat_left, kind, "A_L")?;
            forbid(&cfg.c_left, kind, "c_L")?;
            forbid(&cfg.a_mat_right, kind, "A_R")?;
            forbid(&cfg.c_right, kind, "c_R")?;
            forbid(&cfg.noise, kind, "noise")?;
            let a_l = require(cfg.a_l, kind, "a_L")?;
            let a_r = require(cfg.a_r, kind, "a_R")?;
            let init = cfg.initial.clone().unwrap_or_default();
            if init.y0.is_some() {
                return Err(Error::Domain(
                    "kind \"two_valued\" has no manifold coordinates; remove initial.y0".into(),
                ));
            }
            let x0 = init.x0.unwrap_or(0.0);
            for (name, v) in [("a_L", a_l), ("a_R", a_r), ("initial.x0", x0)] {
                if !v.is_finite() {
                    return Err(Error::Domain(format!("config key {name} must be finite")));
                }
            }
            Ok(BuiltSystem::TwoValued(TwoValuedSetup { a_l, a_r, x0 }))
        }
        "builtin_example" => {
            forbid(&cfg.a_l, kind, "a_L")?;
            forbid(&cfg.a_r, kind, "a_R")?;
            forbid(&cfg.n, kind, "N")?;
            forbid(&cfg.a_mat_left, kind, "A_L")?;
            forbid(&cfg.c_left, kind, "c_L")?;
            forbid(&cfg.a_mat_right, kind, "A_R")?;
            forbid(&cfg.c_right, kind, "c_R")?;
            forbid_x0(&cfg.initial, kind)?;
            let system = FilippovSystem::builtin_example();
            let noise = match &cfg.noise {
                Some(nc) => NoiseSpec::new(nc.epsilon, nc.d.clone())?,
                None => builtin_default_noise()?,
            };
            let y0 = cfg
                .initial
                .as_ref()
                .and_then(|i| i.y0.clone())
                .unwrap_or_else(|| vec![2.0]);
            check_sliding_dimensions(&system, &noise, &y0)?;
            Ok(BuiltSystem::Sliding { system, noise, y0 })
        }
        "piecewise_affine" => {
            forbid(&cfg.a_l, kind, "a_L")?;
            forbid(&cfg.a_r, kind, "a_R")?;
            forbid_x0(&cfg.initial, kind)?;
            let n = require(cfg.n, kind, "N")?;
            if n < 2 {
                return Err(Error::Domain(format!(
                    "N must be at least 2 (transverse coordinate plus manifold), got {n}"
                )));
            }
            let a_mat_left = cfg
                .a_mat_left
                .clone()
                .ok_or_else(|| Error::Domain("kind \"piecewise_affine\" requires \"A_L\"".into()))?;
            let c_left = cfg
                .c_left
                .clone()
                .ok_or_else(|| Error::Domain("kind \"piecewise_affine\" requires \"c_L\"".into()))?;
            let a_mat_right = cfg
                .a_mat_right
                .clone()
                .ok_or_else(|| Error::Domain("kind \"piecewise_affine\" requires \"A_R\"".into()))?;
            let c_right = cfg
                .c_right
                .clone()
                .ok_or_else(|| Error::Domain("kind \"piecewise_affine\" requires \"c_R\"".into()))?;
            if c_left.len() != n {
                return Err(Error::Domain(format!(
                    "c_L has length {}, but N = {n}",
                    c_left.len()
                )));
            }
            let system = FilippovSystem::piecewise_affine(a_mat_left, c_left, a_mat_right, c_right)?;
            let noise_cfg = cfg.noise.as_ref().ok_or_else(|| {
                Error::Domain("kind \"piecewise_affine\" requires a \"noise\" block".into())
            })?;
            let noise = NoiseSpec::new(noise_cfg.epsilon, noise_cfg.d.clone())?;
            let y0 = cfg
                .initial
                .as_ref()
                .and_then(|i| i.y0.clone())
                .ok_or_else(|| {
                    Error::Domain("kind \"piecewise_affine\" requires \"initial.y0\"".into())
                })?;
            check_sliding_dimensions(&system, &noise, &y0)?;
            Ok(BuiltSystem::Sliding { system, noise, y0 })
        }
        other => Err(Error::Domain(format!(
            "unknown kind \"{other}\"; expected \"two_valued\", \"builtin_example\", or \
             \"piecewise_affine\""
        ))),
    }
}

fn check_sliding_dimensions(
    system: &FilippovSystem,
    noise: &NoiseSpec,
    y0: &[f64],
) -> Result<()> {
    if noise.dimension() != system.dimension() {
        return Err(Error::Domain(format!(
            "noise matrix D is {0}x{0}, but the system dimension is {1}",
            noise.dimension(),
            system.dimension()
        )));
    }
    if y0.len() != system.manifold_dimension() {
        return Err(Error::Domain(format!(
            "initial.y0 has {} coordinates, expected {}",
            y0.len(),
            system.manifold_dimension()
        )));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial.y0 must be finite".into()));
    }
    Ok(())
}

/// Maps a library error to the documented process exit code.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::EmptyRange => 2,
        Error::NonConvergence { .. } => 3,
        Error::NotStableSliding(_) | Error::LeftSlidingRegion { .. } => 4,
        Error::IndependenceViolated(_) => 5,
        Error::NonFinite(_) => 6,
        Error::MismatchedGrids => 7,
        _ => 1,
    }
}
