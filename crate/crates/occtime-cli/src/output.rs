//! File outputs: atomic writes, the CSV grid format, and the run manifest.
//!
//! Every data file is written atomically (temporary file in the target
//! directory, then rename), uses LF line endings, and formats each number
//! with 17 significant digits so a written value reads back bit-identical.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use occtime::{DensityGrid, Error, Result};
use sha2::{Digest, Sha256};

/// One numeric cell: scientific notation with 17 significant digits,
/// enough for an exact f64 round trip.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_error(path: &Path, action: &str, e: std::io::Error) -> Error {
    Error::Domain(format!("cannot {action} {}: {e}", path.display()))
}

/// Writes bytes through a temporary file in the same directory, so a
/// crashed run never leaves a truncated output behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(path, "create file near", e))?;
    tmp.write_all(bytes)
        .and_then(|()| tmp.flush())
        .map_err(|e| io_error(path, "write", e))?;
    tmp.persist(path)
        .map_err(|e| io_error(path, "replace", e.error))?;
    Ok(())
}

/// Writes a CSV file: one header row, comma separators, LF line endings,
/// every cell formatted by [`format_value`].
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut buf = String::new();
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                buf.push(',');
            }
            buf.push_str(&format_value(*v));
        }
        buf.push('\n');
    }
    atomic_write(path, buf.as_bytes())
}

/// Writes a density grid as a two-column CSV headed `{axis},density`.
pub fn write_density_grid(path: &Path, grid: &DensityGrid) -> Result<()> {
    write_csv(
        path,
        &[grid.axis(), "density"],
        grid.abscissae()
            .iter()
            .zip(grid.values())
            .map(|(&x, &v)| vec![x, v]),
    )
}

/// Reads a density grid back from CSV. The first column holds the
/// abscissae and the last column the density, so both plain grids and
/// histogram files (`center,count,density`) load with the same call; the
/// first header field names the axis.
pub fn read_csv_grid(path: &Path) -> Result<DensityGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, "read", e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Domain(format!("{}: empty file", path.display())))?;
    let axis = header.split(',').next().unwrap_or("x").trim().to_string();
    let mut abscissae = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Domain(format!(
                "{} line {}: expected at least two columns",
                path.display(),
                i + 2
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| {
                Error::Domain(format!(
                    "{} line {}: bad number {s:?}: {e}",
                    path.display(),
                    i + 2
                ))
            })
        };
        abscissae.push(parse(fields[0])?);
        values.push(parse(fields[fields.len() - 1])?);
    }
    let metadata = BTreeMap::from([
        ("source".to_string(), "csv".to_string()),
        ("path".to_string(), path.display().to_string()),
    ]);
    DensityGrid::new(axis, abscissae, values, metadata)
}

/// Serializes a value as pretty JSON with a trailing newline, atomically.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Domain(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Provenance record written next to every output. `wall_time_seconds`
/// varies run to run; reproducibility comparisons cover the data files,
/// not the manifest.
#[derive(Debug, serde::Serialize)]
pub struct RunManifest {
    /// The invocation, excluding the binary path.
    pub command: Vec<String>,
    /// SHA-256 of the config file bytes, or of the canonical parameter
    /// line for commands that take no config file.
    pub config_sha256: String,
    /// Base RNG seed, present for commands that draw samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_seconds: f64,
    /// Data files written by the run, in the order produced.
    pub outputs: Vec<String>,
}

/// Writes the manifest next to the named output: `out.csv` gets
/// `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(path, manifest)
}
