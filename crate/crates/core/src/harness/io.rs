//! CSV and manifest output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optimizer::IterationTrace;
use crate::rates::Allocation;

pub const SCHEMA_LINE: &str = "# schema=1";

/// Version string written to manifests.
pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

/// Shortest round-trip formatting; missing values are empty cells.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:e}")
    }
}

/// CSV file with the schema comment line already written.
pub struct CsvOut {
    path: PathBuf,
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut buf = BufWriter::new(file);
        writeln!(buf, "{SCHEMA_LINE}").map_err(|e| Error::io(path, e))?;
        let inner = csv::WriterBuilder::new().flexible(true).from_writer(buf);
        let mut out = CsvOut {
            path: path.to_path_buf(),
            inner,
        };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) -> Result<()> {
        let cells: Vec<String> = cells.into_iter().collect();
        self.inner.write_record(&cells).map_err(|e| self.csv_err(e))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }

    fn csv_err(&self, e: csv::Error) -> Error {
        Error::io(&self.path, std::io::Error::other(e.to_string()))
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Hex SHA-256 of the concatenated parts.
pub fn config_hash(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

pub fn write_manifest(dir: &Path, command: &str, hash: &str, seed: u64, files: &[PathBuf]) -> Result<PathBuf> {
    let path = dir.join("manifest.toml");
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let names: Vec<String> = files
        .iter()
        .map(|f| f.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let mut table = toml::Table::new();
    table.insert("command".into(), command.into());
    table.insert("version".into(), version_string().into());
    table.insert("config_sha256".into(), hash.into());
    table.insert("seed".into(), toml::Value::String(seed.to_string()));
    table.insert("timestamp".into(), toml::Value::Integer(stamp as i64));
    table.insert("files".into(), names.into());
    let text = toml::to_string(&table).map_err(|e| Error::io(&path, std::io::Error::other(e.to_string())))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Euclidean norm of the power and splitting variables.
pub fn anchor_norm(a: &Allocation) -> f64 {
    a.p_p
        .iter()
        .chain(&a.p_d)
        .chain(&a.p_s)
        .chain(&a.alpha)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Trace rows: iteration, objective, chaining residual of the GP built at
/// that point (empty for the last point), anchor norm.
pub fn trace_rows(trace: &IterationTrace) -> Vec<[String; 4]> {
    trace
        .objective
        .iter()
        .enumerate()
        .map(|(i, &obj)| {
            let res = trace.residuals.get(i).copied().unwrap_or(f64::NAN);
            let norm = trace.anchors.get(i).map(anchor_norm).unwrap_or(f64::NAN);
            [i.to_string(), num(obj), num(res), num(norm)]
        })
        .collect()
}

pub fn write_trace(path: &Path, traces: &[IterationTrace]) -> Result<PathBuf> {
    let mut out = CsvOut::create(path, &["pass", "iteration", "objective", "residual", "anchor_norm"])?;
    for (pass, tr) in traces.iter().enumerate() {
        for r in trace_rows(tr) {
            out.row(std::iter::once(pass.to_string()).chain(r))?;
        }
    }
    out.finish()
}

pub fn write_allocation(path: &Path, a: &Allocation) -> Result<PathBuf> {
    let mut out = CsvOut::create(path, &["t_u", "t_d"])?;
    out.row([a.t_u.to_string(), a.t_d.to_string()])?;
    out.row(["k", "p_p", "p_d", "p_s", "alpha"].map(String::from))?;
    for k in 0..a.k() {
        out.row([k.to_string(), num(a.p_p[k]), num(a.p_d[k]), num(a.p_s[k]), num(a.alpha[k])])?;
    }
    out.finish()
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [1e-15, 0.1, 33.233, -2.5e7, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn csv_starts_with_schema_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let mut out = CsvOut::create(&p, &["a", "b"]).unwrap();
        out.row([num(1.0), num(2.0)]).unwrap();
        out.finish().unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "# schema=1\na,b\n1e0,2e0\n");
    }

    #[test]
    fn hash_separates_parts() {
        assert_ne!(config_hash(&["ab", "c"]), config_hash(&["a", "bc"]));
        assert_eq!(config_hash(&["x"]).len(), 64);
    }

    #[test]
    fn mean_se_of_constant_is_zero() {
        assert_eq!(mean_se(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
