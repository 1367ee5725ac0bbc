//! Sweep configuration and its resolution into concrete curve jobs.

use std::path::PathBuf;

use critx_core::basis::{select_bc, BoundaryCondition};
use critx_core::fidelity::FsMethod;
use critx_core::models::{AhmParams, DrivingTag, ModelParams, TfimParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Ahm,
    Tfim,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ahm => "ahm",
            ModelKind::Tfim => "tfim",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "ahm" => Ok(ModelKind::Ahm),
            "tfim" => Ok(ModelKind::Tfim),
            _ => Err(CliError::Config(format!("unknown model '{s}' (expected ahm or tfim)"))),
        }
    }
}

/// Driving-parameter values to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Range { start: f64, stop: f64, count: usize },
    List { values: Vec<f64> },
    /// Coarse scan, then a fine scan around the coarse maximum.
    TwoTier {
        start: f64,
        stop: f64,
        #[serde(default = "default_coarse")]
        coarse: f64,
        #[serde(default = "default_fine")]
        fine: f64,
        #[serde(default = "default_window")]
        window: f64,
    },
}

fn default_coarse() -> f64 {
    0.02
}
fn default_fine() -> f64 {
    0.002
}
fn default_window() -> f64 {
    0.05
}

impl GridSpec {
    /// `range:a:b:n`, `list:x,y,...` or `two-tier:a:b[:coarse:fine:window]`.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("cannot parse grid '{s}'"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let nums = |sep: char| -> Result<Vec<f64>, CliError> {
            rest.split(sep).map(|v| v.trim().parse::<f64>().map_err(|_| bad())).collect()
        };
        match kind {
            "range" => {
                let v = nums(':')?;
                if v.len() != 3 || v[2] < 1.0 || v[2].fract() != 0.0 {
                    return Err(bad());
                }
                Ok(GridSpec::Range { start: v[0], stop: v[1], count: v[2] as usize })
            }
            "list" => Ok(GridSpec::List { values: nums(',')? }),
            "two-tier" | "two_tier" => {
                let v = nums(':')?;
                match v.len() {
                    2 => Ok(GridSpec::TwoTier {
                        start: v[0],
                        stop: v[1],
                        coarse: default_coarse(),
                        fine: default_fine(),
                        window: default_window(),
                    }),
                    5 => Ok(GridSpec::TwoTier { start: v[0], stop: v[1], coarse: v[2], fine: v[3], window: v[4] }),
                    _ => Err(bad()),
                }
            }
            _ => Err(bad()),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |m: String| Err(CliError::Config(m));
        match self {
            GridSpec::Range { start, stop, count } => {
                if *count == 0 || !(start.is_finite() && stop.is_finite()) || (*count > 1 && !(start < stop)) {
                    return err(format!("range grid needs start < stop and count ≥ 1 (got {start}, {stop}, {count})"));
                }
            }
            GridSpec::List { values } => {
                if values.is_empty() || values.windows(2).any(|w| !(w[0] < w[1])) {
                    return err("list grid must be non-empty and strictly ascending".into());
                }
            }
            GridSpec::TwoTier { start, stop, coarse, fine, window } => {
                let ratio = coarse / fine;
                if !(start < stop) || !(*fine > 0.0) || !(*window > 0.0) || (ratio - ratio.round()).abs() > 1e-9 {
                    return err("two-tier grid needs start < stop, positive steps and coarse a multiple of fine".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub sites: Vec<u32>,
    /// Filling `N/L` as a fraction, e.g. "2/3"; species are balanced.
    pub filling: Option<String>,
    /// Explicit species counts, overriding the filling.
    pub n_up: Option<u32>,
    pub n_dn: Option<u32>,
    /// Interaction strengths, one curve per value (AHM).
    pub u: Vec<f64>,
    /// Fixed couplings of the Ising ring; the driven one is ignored.
    pub lambda: f64,
    pub h: f64,
    /// Driving tag; defaults to ahm_down_hop or tfim_x_sum.
    pub driving: Option<String>,
    pub grid: GridSpec,
    pub method: String,
    pub delta: f64,
    pub lanczos_tol: f64,
    pub solve_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            model: ModelKind::Ahm,
            sites: Vec::new(),
            filling: None,
            n_up: None,
            n_dn: None,
            u: Vec::new(),
            lambda: 1.0,
            h: 0.0,
            driving: None,
            grid: GridSpec::TwoTier {
                start: 0.02,
                stop: 0.98,
                coarse: default_coarse(),
                fine: default_fine(),
                window: default_window(),
            },
            method: FsMethod::FiniteDifference.as_str().into(),
            delta: critx_core::fidelity::DEFAULT_DELTA,
            lanczos_tol: 1e-10,
            solve_tol: 1e-10,
            max_iter: 5000,
            seed: 0x5eed,
            output: PathBuf::from("critx-out"),
            workers: 1,
        }
    }
}

/// One curve to compute: a model with its driven coupling left open.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveJob {
    pub params: ModelParams,
    pub tag: DrivingTag,
    pub filling: Option<String>,
}

impl CurveJob {
    pub fn label(&self) -> String {
        match &self.params {
            ModelParams::Ahm(p) => format!("ahm_L{}_U{}_nup{}_ndn{}", p.sites, p.u, p.n_up, p.n_dn),
            ModelParams::Tfim(p) => match self.tag {
                DrivingTag::TfimZSum => format!("tfim_L{}_lambda{}_{}", p.sites, p.lambda, self.tag.as_str()),
                _ => format!("tfim_L{}_h{}_{}", p.sites, p.h, self.tag.as_str()),
            },
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config file: {e}")))
    }

    pub fn method(&self) -> Result<FsMethod, CliError> {
        FsMethod::parse(&self.method).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn tag(&self) -> Result<DrivingTag, CliError> {
        match &self.driving {
            Some(s) => DrivingTag::parse(s).map_err(|e| CliError::Config(e.to_string())),
            None => Ok(match self.model {
                ModelKind::Ahm => DrivingTag::AhmDownHop,
                ModelKind::Tfim => DrivingTag::TfimXSum,
            }),
        }
    }

    /// Check every field and expand into one job per (L, U).
    pub fn jobs(&self) -> Result<Vec<CurveJob>, CliError> {
        let cfg = |m: String| CliError::Config(m);
        if self.sites.is_empty() {
            return Err(cfg("no system sizes given".into()));
        }
        self.grid.validate()?;
        self.method()?;
        if !(self.delta > 0.0) || !(self.lanczos_tol > 0.0) || !(self.solve_tol > 0.0) || self.max_iter == 0 {
            return Err(cfg("delta, tolerances and max_iter must be positive".into()));
        }
        if self.workers == 0 {
            return Err(cfg("workers must be at least 1".into()));
        }
        let tag = self.tag()?;
        let mut jobs = Vec::new();
        for &l in &self.sites {
            match self.model {
                ModelKind::Ahm => {
                    if self.u.is_empty() {
                        return Err(cfg("AHM sweep needs at least one U value".into()));
                    }
                    let (n_up, n_dn) = self.resolve_sector(l)?;
                    let bc = select_bc(n_up + n_dn).map_err(|e| cfg(format!("L = {l}: {e}")))?;
                    for &u in &self.u {
                        let params = ModelParams::Ahm(AhmParams { sites: l, t: 0.0, u, n_up, n_dn, bc });
                        params.validate().map_err(|e| cfg(format!("L = {l}: {e}")))?;
                        if !params.supports(tag) {
                            return Err(cfg(format!("driving {} does not apply to the AHM", tag.as_str())));
                        }
                        jobs.push(CurveJob { params, tag, filling: self.filling.clone() });
                    }
                }
                ModelKind::Tfim => {
                    let params = ModelParams::Tfim(TfimParams { sites: l, lambda: self.lambda, h: self.h });
                    if !params.supports(tag) {
                        return Err(cfg(format!("driving {} does not apply to the TFIM", tag.as_str())));
                    }
                    params
                        .with_driving(tag, 0.5)
                        .and_then(|p| p.validate())
                        .map_err(|e| cfg(format!("L = {l}: {e}")))?;
                    jobs.push(CurveJob { params, tag, filling: None });
                }
            }
        }
        Ok(jobs)
    }

    fn resolve_sector(&self, l: u32) -> Result<(u32, u32), CliError> {
        match (self.n_up, self.n_dn, &self.filling) {
            (Some(u), Some(d), _) => Ok((u, d)),
            (None, None, Some(f)) => {
                let (p, q) = parse_fraction(f)?;
                let num = u64::from(p) * u64::from(l);
                if num % u64::from(q) != 0 {
                    return Err(CliError::Config(format!("filling {f} gives non-integer N at L = {l}")));
                }
                let n = num / u64::from(q);
                if n % 2 != 0 {
                    return Err(CliError::Config(format!(
                        "filling {f} gives odd N = {n} at L = {l}; balanced species need even N"
                    )));
                }
                let half = (n / 2) as u32;
                if half > l {
                    return Err(CliError::Config(format!("filling {f} exceeds one particle per species at L = {l}")));
                }
                Ok((half, half))
            }
            (None, None, None) => Err(CliError::Config("AHM sweep needs a filling or n_up and n_dn".into())),
            _ => Err(CliError::Config("n_up and n_dn must be given together".into())),
        }
    }

    /// Fields that change the physics of a point, in a fixed text form.
    pub fn physics_fields(&self) -> Result<Vec<(&'static str, String)>, CliError> {
        Ok(vec![
            ("method", self.method()?.as_str().to_string()),
            ("delta", fmt_f64(self.delta)),
            ("lanczos_tol", fmt_f64(self.lanczos_tol)),
            ("solve_tol", fmt_f64(self.solve_tol)),
            ("max_iter", self.max_iter.to_string()),
            ("seed", self.seed.to_string()),
        ])
    }
}

/// `p/q` or an integer.
pub fn parse_fraction(s: &str) -> Result<(u32, u32), CliError> {
    let bad = || CliError::Config(format!("filling '{s}' is not a fraction p/q"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim().parse::<u32>().map_err(|_| bad())?, q.trim().parse::<u32>().map_err(|_| bad())?),
        None => (s.trim().parse::<u32>().map_err(|_| bad())?, 1),
    };
    if q == 0 {
        return Err(bad());
    }
    Ok((p, q))
}

/// Round-trip text form used in every file: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn bc_str(bc: BoundaryCondition) -> &'static str {
    bc.as_str()
}
