//! Per-point result cache keyed by the physics of a curve.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use critx_core::fidelity::{FsMethod, FsPoint};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const CACHE_ENV: &str = "CRITX_CACHE";
pub const DEFAULT_CACHE: &str = "critx-cache";

pub fn cache_root() -> PathBuf {
    std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of `key=value` lines; the order of `fields` is part of the key.
pub fn key_of(fields: &[(String, String)]) -> String {
    let mut text = String::new();
    for (k, v) in fields {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    sha256_hex(text.as_bytes())
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io)?;
        }
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

/// Stored form of one evaluated point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedPoint {
    pub x: f64,
    pub chi: f64,
    pub method: String,
    pub delta_used: Option<f64>,
    pub raw: Option<(f64, f64)>,
    pub residual: f64,
    pub iterations: usize,
}

impl CachedPoint {
    pub fn from_point(p: &FsPoint) -> Self {
        CachedPoint {
            x: p.x,
            chi: p.chi,
            method: p.method.as_str().into(),
            delta_used: p.delta_used,
            raw: p.raw,
            residual: p.residual,
            iterations: p.iterations,
        }
    }

    pub fn method(&self) -> Result<FsMethod, CliError> {
        FsMethod::parse(&self.method).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Cache directory of one curve.
#[derive(Debug, Clone)]
pub struct CurveCache {
    dir: PathBuf,
}

impl CurveCache {
    pub fn new(root: &Path, key: &str) -> Self {
        CurveCache { dir: root.join(key) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Point files are named by the bit pattern of the coupling.
    pub fn point_path(&self, x: f64) -> PathBuf {
        self.dir.join(format!("{:016x}.json", x.to_bits()))
    }

    pub fn load(&self, x: f64) -> Option<CachedPoint> {
        let text = fs::read_to_string(self.point_path(x)).ok()?;
        let p: CachedPoint = serde_json::from_str(&text).ok()?;
        (p.x.to_bits() == x.to_bits()).then_some(p)
    }

    pub fn store(&self, p: &CachedPoint) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(p).map_err(|e| CliError::Io(e.to_string()))?;
        atomic_write(&self.point_path(p.x), text.as_bytes())
    }

    pub fn write_manifest(&self, fields: &[(String, String)]) -> Result<(), CliError> {
        let mut text = String::new();
        for (k, v) in fields {
            text.push_str(&format!("{k}={v}\n"));
        }
        atomic_write(&self.dir.join("key.txt"), text.as_bytes())
    }
}

/// `(key, points, description)` for every curve directory under `root`.
pub fn list(root: &Path) -> Result<Vec<(String, usize, String)>, CliError> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(root) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(CliError::Io(format!("{}: {e}", root.display()))),
    };
    for e in entries.flatten() {
        if !e.path().is_dir() {
            continue;
        }
        let n = fs::read_dir(e.path())
            .map(|d| d.flatten().filter(|f| f.file_name().to_string_lossy().ends_with(".json")).count())
            .unwrap_or(0);
        let desc = fs::read_to_string(e.path().join("key.txt"))
            .unwrap_or_default()
            .lines()
            .filter(|l| l.starts_with("model=") || l.starts_with("sites=") || l.starts_with("u=") || l.starts_with("driving="))
            .collect::<Vec<_>>()
            .join(" ");
        out.push((e.file_name().to_string_lossy().into_owned(), n, desc));
    }
    out.sort();
    Ok(out)
}

/// Remove the whole cache root, or one curve directory.
pub fn clear(root: &Path, key: Option<&str>) -> Result<usize, CliError> {
    let target = match key {
        Some(k) => root.join(k),
        None => root.to_path_buf(),
    };
    let n = list(root)?.iter().filter(|(k, _, _)| key.is_none_or(|want| want == k)).count();
    match fs::remove_dir_all(&target) {
        Ok(()) => Ok(n),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
        Err(e) => Err(CliError::Io(format!("{}: {e}", target.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = CurveCache::new(dir.path(), "abc");
        let p = CachedPoint {
            x: 0.1 + 0.2,
            chi: std::f64::consts::E * 1e7,
            method: "linear_response".into(),
            delta_used: None,
            raw: Some((1.0 / 3.0, 2.0 / 7.0)),
            residual: 3.3e-11,
            iterations: 42,
        };
        c.store(&p).unwrap();
        let back = c.load(p.x).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.chi.to_bits(), p.chi.to_bits());
        assert!(c.load(0.3).is_none());
        assert_eq!(list(dir.path()).unwrap()[0].1, 1);
        assert_eq!(clear(dir.path(), Some("abc")).unwrap(), 1);
        assert!(list(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn key_depends_on_every_field() {
        let a = vec![("a".to_string(), "1".to_string()), ("b".into(), "2".into())];
        let mut b = a.clone();
        b[1].1 = "3".into();
        assert_ne!(key_of(&a), key_of(&b));
        assert_eq!(key_of(&a).len(), 64);
    }
}
