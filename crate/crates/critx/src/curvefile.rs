//! Curve files: `#key=value` header lines followed by a CSV body.

use std::fs;
use std::path::Path;

use critx_core::basis::BoundaryCondition;
use critx_core::fidelity::FsMethod;
use critx_core::models::{AhmParams, DrivingTag, ModelParams, TfimParams};
use critx_core::scaling::{FsCurve, Provenance};

use crate::config::fmt_f64;
use crate::CliError;

pub const COLUMNS: &str = "t,chi,method,delta_used,residual";

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub t: f64,
    pub chi: f64,
    pub method: FsMethod,
    pub delta_used: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    /// Header entries in file order.
    pub header: Vec<(String, String)>,
    pub rows: Vec<CurveRow>,
}

impl CurveFile {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn need(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Config(format!("curve file lacks header '{key}'")))
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.need(key)?;
        v.parse().map_err(|_| CliError::Config(format!("header '{key}' has unreadable value '{v}'")))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.header {
            s.push_str(&format!("#{k}={v}\n"));
        }
        s.push_str(COLUMNS);
        s.push('\n');
        for r in &self.rows {
            let d = r.delta_used.map(fmt_f64).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(r.t),
                fmt_f64(r.chi),
                r.method.as_str(),
                d,
                fmt_f64(r.residual)
            ));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Config(format!("malformed curve file: {m}"));
        let mut header = Vec::new();
        let mut rows = Vec::new();
        let mut seen_columns = false;
        for (n, line) in text.lines().enumerate() {
            if let Some(h) = line.strip_prefix('#') {
                let (k, v) = h.split_once('=').ok_or_else(|| bad(format!("line {}: header without '='", n + 1)))?;
                header.push((k.to_string(), v.to_string()));
            } else if !seen_columns {
                if line != COLUMNS {
                    return Err(bad(format!("line {}: expected column line '{COLUMNS}'", n + 1)));
                }
                seen_columns = true;
            } else if !line.is_empty() {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(bad(format!("line {}: expected 5 fields", n + 1)));
                }
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("line {}: bad number '{s}'", n + 1)));
                rows.push(CurveRow {
                    t: num(f[0])?,
                    chi: num(f[1])?,
                    method: FsMethod::parse(f[2]).map_err(|e| bad(e.to_string()))?,
                    delta_used: if f[3].is_empty() { None } else { Some(num(f[3])?) },
                    residual: num(f[4])?,
                });
            }
        }
        if !seen_columns {
            return Err(bad("no column line".into()));
        }
        Ok(CurveFile { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Write through a temporary file and rename.
    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        crate::cache::atomic_write(path, self.to_text().as_bytes())
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        let sites = self.num("sites")?;
        match self.need("model")? {
            "ahm" => Ok(ModelParams::Ahm(AhmParams {
                sites,
                t: 0.0,
                u: self.num("u")?,
                n_up: self.num("n_up")?,
                n_dn: self.num("n_dn")?,
                bc: BoundaryCondition::parse(self.need("bc")?).map_err(|e| CliError::Config(e.to_string()))?,
            })),
            "tfim" => Ok(ModelParams::Tfim(TfimParams { sites, lambda: self.num("lambda")?, h: self.num("h")? })),
            m => Err(CliError::Config(format!("unknown model '{m}' in curve header"))),
        }
    }

    pub fn tag(&self) -> Result<DrivingTag, CliError> {
        DrivingTag::parse(self.need("driving")?).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_curve(&self) -> Result<FsCurve, CliError> {
        let method = FsMethod::parse(self.need("method")?).map_err(|e| CliError::Config(e.to_string()))?;
        let provenance = Provenance {
            seed: self.num("seed")?,
            delta: self.num("delta")?,
            lanczos_tol: self.num("lanczos_tol")?,
            solve_tol: self.num("solve_tol")?,
        };
        FsCurve::new(
            self.params()?,
            self.tag()?,
            self.rows.iter().map(|r| r.t).collect(),
            self.rows.iter().map(|r| r.chi).collect(),
            method,
            provenance,
        )
        .map_err(|e| CliError::Config(format!("curve file violates curve invariants: {e}")))
    }
}

/// Header entries describing a model.
pub fn model_header(params: &ModelParams, tag: DrivingTag) -> Vec<(String, String)> {
    let mut h = vec![("model".to_string(), params.kind().to_string()), ("sites".into(), params.sites().to_string())];
    match params {
        ModelParams::Ahm(p) => {
            h.push(("u".into(), fmt_f64(p.u)));
            h.push(("n_up".into(), p.n_up.to_string()));
            h.push(("n_dn".into(), p.n_dn.to_string()));
            h.push(("bc".into(), p.bc.as_str().into()));
        }
        ModelParams::Tfim(p) => {
            h.push(("lambda".into(), fmt_f64(p.lambda)));
            h.push(("h".into(), fmt_f64(p.h)));
        }
    }
    h.push(("driving".into(), tag.as_str().into()));
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CurveFile {
        let params = ModelParams::Ahm(AhmParams {
            sites: 6,
            t: 0.0,
            u: 10.0,
            n_up: 2,
            n_dn: 2,
            bc: BoundaryCondition::Antiperiodic,
        });
        let mut header = model_header(&params, DrivingTag::AhmDownHop);
        for (k, v) in [("method", "finite_difference"), ("seed", "7"), ("delta", "1e-3"), ("lanczos_tol", "1e-10"), ("solve_tol", "1e-10")] {
            header.push((k.into(), v.into()));
        }
        let rows = (0..7)
            .map(|i| {
                let t = 0.1 + 0.1 * f64::from(i);
                CurveRow {
                    t,
                    chi: 1.0 / (3.0 + t).sqrt() * std::f64::consts::PI,
                    method: FsMethod::FiniteDifference,
                    delta_used: if i % 2 == 0 { Some(1e-3) } else { None },
                    residual: 1.234e-11 * t,
                }
            })
            .collect();
        CurveFile { header, rows }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let back = CurveFile::parse(&f.to_text()).unwrap();
        assert_eq!(back, f);
        for (a, b) in back.rows.iter().zip(&f.rows) {
            assert_eq!(a.chi.to_bits(), b.chi.to_bits());
            assert_eq!(a.t.to_bits(), b.t.to_bits());
        }
        let c = back.to_curve().unwrap();
        assert_eq!(c.sites(), 6);
        assert_eq!(c.provenance.seed, 7);
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(CurveFile::parse("#a=b\n").is_err());
        assert!(CurveFile::parse(&format!("{COLUMNS}\n1,2,3\n")).is_err());
        assert!(CurveFile::parse(&format!("{COLUMNS}\n1,2,bogus,,0\n")).is_err());
        assert!(CurveFile::parse(&format!("#novalue\n{COLUMNS}\n")).is_err());
    }
}
