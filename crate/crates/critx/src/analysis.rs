//! Analyses over curve files, producing JSON results and plot-data CSVs.

use std::fs;
use std::path::{Path, PathBuf};

use critx_core::eigen::{LanczosOptions, SolveOptions};
use critx_core::fidelity::DrivenModel;
use critx_core::models::ModelParams;
use critx_core::scaling::{
    collapse_fit, collapse_points, extrapolate_tc, extrapolate_tc_kt, find_peak, find_peak_refined, fit_kt_form,
    fit_power, steepest_descent, CollapseOptions, CollapseWindow, FsCurve, PeakEstimate, TcEstimate, TcLaw,
};
use critx_core::tfim_oracle;
use serde_json::{json, Value};

use crate::cache::{atomic_write, sha256_hex};
use crate::config::fmt_f64;
use crate::curvefile::CurveFile;
use crate::CliError;

/// Ising order-parameter exponent used by the exponent relation.
pub const ISING_BETA: f64 = 0.125;

#[derive(Debug, Clone)]
pub struct LoadedCurve {
    pub path: PathBuf,
    pub sha256: String,
    pub file: CurveFile,
    pub curve: FsCurve,
}

impl LoadedCurve {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
        let file = CurveFile::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let curve = file.to_curve()?;
        Ok(LoadedCurve { path: path.to_path_buf(), sha256: sha256_hex(&bytes), file, curve })
    }

    pub fn u(&self) -> Option<f64> {
        match &self.curve.params {
            ModelParams::Ahm(p) => Some(p.u),
            ModelParams::Tfim(_) => None,
        }
    }
}

pub fn load_all(paths: &[PathBuf]) -> Result<Vec<LoadedCurve>, CliError> {
    let mut v: Vec<LoadedCurve> = paths.iter().map(|p| LoadedCurve::read(p)).collect::<Result<_, _>>()?;
    v.sort_by(|a, b| {
        (a.u().unwrap_or(0.0), a.curve.sites())
            .partial_cmp(&(b.u().unwrap_or(0.0), b.curve.sites()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(v)
}

fn refuse(e: critx_core::Error) -> CliError {
    CliError::Refusal(e.to_string())
}

/// Every input must describe the same family; `by_u` allows several U.
pub fn check_family(curves: &[LoadedCurve], by_u: bool) -> Result<(), CliError> {
    let first = curves.first().ok_or_else(|| CliError::Refusal("no input curves".into()))?;
    let sig = |c: &LoadedCurve| {
        (
            c.file.get("model").map(str::to_string),
            c.file.get("driving").map(str::to_string),
            c.file.get("method").map(str::to_string),
            c.file.get("filling").map(str::to_string),
            if by_u { None } else { c.file.get("u").map(str::to_string) },
            c.file.get("lambda").map(str::to_string),
            c.file.get("h").map(str::to_string),
        )
    };
    let s0 = sig(first);
    for c in curves {
        if sig(c) != s0 {
            return Err(CliError::Refusal(format!(
                "mixed inputs: {} does not match {} (model, driving, method, filling and couplings must agree)",
                c.path.display(),
                first.path.display()
            )));
        }
    }
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            if a.curve.sites() == b.curve.sites() && a.u() == b.u() {
                return Err(CliError::Refusal(format!("two inputs share L = {}", a.curve.sites())));
            }
        }
    }
    Ok(())
}

/// Input list with hashes, and a hash over all of it.
pub fn provenance(curves: &[LoadedCurve]) -> Value {
    let inputs: Vec<Value> = curves
        .iter()
        .map(|c| {
            json!({
                "path": c.path.display().to_string(),
                "sha256": c.sha256,
                "cache_key": c.file.get("cache_key"),
                "config": c.file.get("config").and_then(|s| serde_json::from_str::<Value>(s).ok()),
            })
        })
        .collect();
    let chain: String = curves.iter().map(|c| c.sha256.as_str()).collect::<Vec<_>>().join("\n");
    json!({ "inputs": inputs, "input_chain_sha256": sha256_hex(chain.as_bytes()), "code_version": env!("CARGO_PKG_VERSION") })
}

fn peak_json(p: &PeakEstimate) -> Value {
    json!({
        "sites": p.sites,
        "t_max": p.t_max,
        "chi_max": p.chi_max,
        "curvature": p.curvature,
        "window": p.window,
        "refinements": p.refinements,
    })
}

fn tc_json(t: &TcEstimate) -> Value {
    json!({
        "tc": t.tc,
        "tc_se": t.tc_se,
        "slope": t.slope,
        "law": t.law.as_str(),
        "residual": t.residual,
        "markers": t.markers,
    })
}

/// One peak per curve; with `refine > 0` the vertex is re-evaluated by the
/// curve's own solver settings.
pub fn peaks(curves: &[LoadedCurve], refine: usize) -> Result<Vec<PeakEstimate>, CliError> {
    curves
        .iter()
        .map(|c| {
            if refine == 0 {
                return find_peak(&c.curve).map_err(refuse);
            }
            let pv = &c.curve.provenance;
            let lanczos = LanczosOptions { tol: pv.lanczos_tol, seed: pv.seed, ..LanczosOptions::default() };
            let solve = SolveOptions { tol: pv.solve_tol, ..SolveOptions::default() };
            let model = DrivenModel::new(c.curve.params.clone(), c.curve.tag)
                .map_err(|e| CliError::Config(e.to_string()))?
                .with_options(lanczos, solve);
            let method = c.curve.method;
            find_peak_refined(&c.curve, refine.min(3), |t| model.fs(t, method, pv.delta).map(|p| p.chi)).map_err(
                |e| match e {
                    critx_core::Error::Refused(_) | critx_core::Error::Domain(_) => refuse(e),
                    other => CliError::Solver(other.to_string()),
                },
            )
        })
        .collect()
}

/// Output of an analysis: the JSON document and plot-data files.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub result: Value,
    pub plots: Vec<(String, String)>,
}

impl Report {
    /// Write `<name>.json` and each plot file into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let mut written = Vec::new();
        let path = dir.join(format!("{}.json", self.name));
        let text = serde_json::to_string_pretty(&self.result).map_err(|e| CliError::Io(e.to_string()))?;
        atomic_write(&path, text.as_bytes())?;
        written.push(path);
        for (file, body) in &self.plots {
            let p = dir.join(file);
            atomic_write(&p, body.as_bytes())?;
            written.push(p);
        }
        Ok(written)
    }
}

pub fn peak_report(curves: &[LoadedCurve], refine: usize) -> Result<Report, CliError> {
    let ps = peaks(curves, refine)?;
    Ok(Report {
        name: "peak".into(),
        result: json!({
            "analysis": "peak",
            "refine": refine,
            "peaks": ps.iter().map(peak_json).collect::<Vec<_>>(),
            "provenance": provenance(curves),
        }),
        plots: vec![],
    })
}

pub fn parse_window(s: &str) -> Result<CollapseWindow, CliError> {
    let bad = || CliError::Config(format!("window '{s}' is not height:<fraction> or parameter:<half-width>"));
    let (k, v) = s.split_once(':').ok_or_else(bad)?;
    let v: f64 = v.parse().map_err(|_| bad())?;
    match k {
        "height" if v > 0.0 && v < 1.0 => Ok(CollapseWindow::Height { fraction: v }),
        "parameter" if v > 0.0 => Ok(CollapseWindow::Parameter { half_width: v }),
        _ => Err(bad()),
    }
}

pub fn collapse_report(curves: &[LoadedCurve], opts: &CollapseOptions) -> Result<Report, CliError> {
    check_family(curves, false)?;
    let cs: Vec<FsCurve> = curves.iter().map(|c| c.curve.clone()).collect();
    let ps = peaks(curves, 0)?;
    let fit = collapse_fit(&cs, &ps, opts).map_err(refuse)?;
    let resc = collapse_points(&cs, &ps, fit.nu, opts.window).map_err(refuse)?;
    let mut pts = String::from("sites,x,y\n");
    for r in &resc {
        for (x, y) in &r.points {
            pts.push_str(&format!("{},{},{}\n", r.sites, fmt_f64(*x), fmt_f64(*y)));
        }
    }
    let mut loglog = String::from("sites,ln_sites,chi_max,ln_chi_max,ln_chi_fit\n");
    let heights: Vec<(f64, f64)> = ps.iter().map(|p| (f64::from(p.sites), p.chi_max)).collect();
    let pf = fit_power(&heights).map_err(refuse)?;
    for (l, c) in &heights {
        loglog.push_str(&format!(
            "{},{},{},{},{}\n",
            l,
            fmt_f64(l.ln()),
            fmt_f64(*c),
            fmt_f64(c.ln()),
            fmt_f64(pf.prefactor.ln() + pf.exponent * l.ln())
        ));
    }
    let mut scan = String::from("nu,cost\n");
    for (nu, c) in &fit.scan {
        scan.push_str(&format!("{},{}\n", fmt_f64(*nu), fmt_f64(*c)));
    }
    Ok(Report {
        name: "collapse".into(),
        result: json!({
            "analysis": "collapse",
            "nu": fit.nu, "nu_se": finite(fit.nu_se),
            "mu": fit.mu, "mu_se": fit.mu_se,
            "alpha": fit.alpha, "alpha_se": finite(fit.alpha_se),
            "A": fit.a, "B": fit.b,
            "residual": fit.residual,
            "points_used": fit.points_used,
            "mu_largest_sizes": fit.mu_largest.map(|m| json!({"exponent": m.exponent, "exponent_se": m.exponent_se, "r_squared": m.r_squared})),
            "mu_r_squared": pf.r_squared,
            "options": {
                "nu_bracket": [opts.nu_bracket.0, opts.nu_bracket.1],
                "window": opts.window.describe(),
                "neighbors": opts.neighbors,
                "scan_points": opts.scan_points,
                "tol": opts.tol,
                "rescale": "(chi_max - chi)/chi vs L^nu (t - t_max)",
            },
            "peaks": ps.iter().map(peak_json).collect::<Vec<_>>(),
            "provenance": provenance(curves),
        }),
        plots: vec![
            ("collapse_points.csv".into(), pts),
            ("collapse_peaks_loglog.csv".into(), loglog),
            ("collapse_cost_scan.csv".into(), scan),
        ],
    })
}

fn finite(x: f64) -> Value {
    if x.is_finite() { json!(x) } else { Value::Null }
}

pub fn ktform_report(curves: &[LoadedCurve], half_width: f64) -> Result<Report, CliError> {
    check_family(curves, false)?;
    let cs: Vec<FsCurve> = curves.iter().map(|c| c.curve.clone()).collect();
    let ps = peaks(curves, 0)?;
    let f = fit_kt_form(&cs, &ps, half_width).map_err(refuse)?;
    let shifted: Vec<(f64, f64)> = ps.iter().map(|p| (f64::from(p.sites), p.chi_max - f.a)).collect();
    let growth = fit_power(&shifted).ok();
    let mut plot = String::from("sites,chi_max,chi_max_over_L,chi_max_minus_a\n");
    for p in &ps {
        let l = f64::from(p.sites);
        plot.push_str(&format!("{},{},{},{}\n", p.sites, fmt_f64(p.chi_max), fmt_f64(p.chi_max / l), fmt_f64(p.chi_max - f.a)));
    }
    Ok(Report {
        name: "ktform".into(),
        result: json!({
            "analysis": "ktform",
            "a": f.a, "a_se": f.a_se,
            "b": f.b, "b_se": f.b_se,
            "c": f.c, "c_se": f.c_se,
            "rss": f.rss,
            "points_used": f.points_used,
            "options": { "half_width": f.half_width, "form": "a + b L + c L^(-1/2) (t - t_max)^2" },
            "peak_growth_after_a": growth.map(|g| json!({"exponent": g.exponent, "exponent_se": g.exponent_se, "r_squared": g.r_squared})),
            "peaks": ps.iter().map(peak_json).collect::<Vec<_>>(),
            "provenance": provenance(curves),
        }),
        plots: vec![("ktform_peaks.csv".into(), plot)],
    })
}

fn swept_range(curves: &[LoadedCurve]) -> (f64, f64) {
    curves.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |r, c| {
        let (a, b) = c.curve.range();
        (r.0.min(a), r.1.max(b))
    })
}

pub fn tc_landau_report(curves: &[LoadedCurve]) -> Result<Report, CliError> {
    check_family(curves, false)?;
    let ps = peaks(curves, 0)?;
    let range = swept_range(curves);
    let markers: Vec<(f64, f64)> = ps.iter().map(|p| (f64::from(p.sites), p.t_max)).collect();
    let l2 = extrapolate_tc(&markers, TcLaw::LandauL2, range).map_err(refuse)?;
    let l1 = extrapolate_tc(&markers, TcLaw::OneOverL, range).ok();
    let dropped = if markers.len() > 3 { extrapolate_tc(&markers[1..], TcLaw::LandauL2, range).ok() } else { None };
    let mut plot = String::from("sites,inv_L2,t_max\n");
    for (l, t) in &markers {
        plot.push_str(&format!("{},{},{}\n", l, fmt_f64(l.powi(-2)), fmt_f64(*t)));
    }
    Ok(Report {
        name: "tc-landau".into(),
        result: json!({
            "analysis": "tc-landau",
            "landau_L2": tc_json(&l2),
            "one_over_L": l1.as_ref().map(tc_json),
            "l2_beats_l1": l1.as_ref().map(|f| l2.residual < f.residual),
            "without_smallest_L": dropped.as_ref().map(tc_json),
            "stability_shift": dropped.as_ref().map(|d| (d.tc - l2.tc).abs()),
            "peaks": ps.iter().map(peak_json).collect::<Vec<_>>(),
            "provenance": provenance(curves),
        }),
        plots: vec![("tc_landau_markers.csv".into(), plot)],
    })
}

/// Curves grouped by U, one extrapolation per group.
pub fn tc_kt_report(curves: &[LoadedCurve]) -> Result<Report, CliError> {
    check_family(curves, true)?;
    let mut groups: Vec<(f64, Vec<&LoadedCurve>)> = Vec::new();
    for c in curves {
        let u = c.u().unwrap_or(f64::NAN);
        match groups.iter_mut().find(|g| g.0.to_bits() == u.to_bits()) {
            Some(g) => g.1.push(c),
            None => groups.push((u, vec![c])),
        }
    }
    let mut out = Vec::new();
    let mut plot = String::from("u,sites,inv_L,t_steepest,dchi_dt\n");
    for (u, g) in &groups {
        let cs: Vec<FsCurve> = g.iter().map(|c| c.curve.clone()).collect();
        for c in &cs {
            let (t, d) = steepest_descent(c).map_err(refuse)?;
            plot.push_str(&format!("{u},{},{},{},{}\n", c.sites(), fmt_f64(1.0 / f64::from(c.sites())), fmt_f64(t), fmt_f64(d)));
        }
        let e = extrapolate_tc_kt(&cs).map_err(refuse)?;
        out.push(json!({ "u": u, "estimate": tc_json(&e) }));
    }
    Ok(Report {
        name: "tc-kt".into(),
        result: json!({
            "analysis": "tc-kt",
            "groups": out,
            "options": { "derivative": "three-point non-uniform central difference", "extrapolation": "linear in 1/L" },
            "provenance": provenance(curves),
        }),
        plots: vec![("tc_kt_markers.csv".into(), plot)],
    })
}

/// Exact Ising FS table, peak and density exponent.
pub fn oracle_report(sites: u32, lambdas: &[f64], window: (f64, f64), density_sites: u32) -> Result<Report, CliError> {
    let mut table = String::from("lambda,chi,chi_per_site\n");
    let mut rows = Vec::new();
    for &l in lambdas {
        let chi = tfim_oracle::fs_exact(l, sites).map_err(refuse)?;
        table.push_str(&format!("{},{},{}\n", fmt_f64(l), fmt_f64(chi), fmt_f64(chi / f64::from(sites))));
        rows.push(json!([l, chi]));
    }
    let d = tfim_oracle::fs_density_exponent(window.0, window.1, density_sites, 41).map_err(refuse)?;
    let peak = tfim_oracle::peak(sites).ok();
    let mut dens = String::from("lambda,abs_lambda_minus_1,chi_per_site\n");
    for (l, c) in &d.points {
        dens.push_str(&format!("{},{},{}\n", fmt_f64(*l), fmt_f64((l - 1.0).abs()), fmt_f64(*c)));
    }
    Ok(Report {
        name: "oracle".into(),
        result: json!({
            "analysis": "oracle",
            "sites": sites,
            "table": rows,
            "peak": peak.map(|p| json!({"lambda_max": p.lambda_max, "chi_max": p.chi_max})),
            "density_exponent": {
                "slope": d.slope, "slope_se": d.slope_se, "r_squared": d.r_squared,
                "sites": d.sites, "window": [d.window.0, d.window.1],
            },
            "code_version": env!("CARGO_PKG_VERSION"),
        }),
        plots: vec![("oracle_table.csv".into(), table), ("oracle_density.csv".into(), dens)],
    })
}

/// `α + 2β + γ` against 3 with errors added in quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationReport {
    pub sum: f64,
    pub deviation: f64,
    pub error: f64,
}

pub fn exponent_relation(alpha: f64, alpha_se: f64, gamma: f64, gamma_se: f64) -> RelationReport {
    let sum = alpha + 2.0 * ISING_BETA + gamma;
    RelationReport { sum, deviation: sum - 3.0, error: (alpha_se * alpha_se + gamma_se * gamma_se).sqrt() }
}

pub fn relation_report(alpha: f64, alpha_se: f64, gamma: f64, gamma_se: f64) -> Report {
    let r = exponent_relation(alpha, alpha_se, gamma, gamma_se);
    Report {
        name: "relation".into(),
        result: json!({
            "analysis": "relation",
            "alpha": alpha, "alpha_se": alpha_se,
            "gamma": gamma, "gamma_se": gamma_se,
            "beta": ISING_BETA,
            "sum": r.sum, "deviation": r.deviation, "error": r.error,
        }),
        plots: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relation_arithmetic() {
        let r = exponent_relation(1.0, 0.0, 1.75, 0.0);
        assert_eq!(r.sum, 3.0);
        let r = exponent_relation(1.1, 0.03, 1.6, 0.04);
        assert!((r.sum - 2.95).abs() < 1e-12 && (r.deviation + 0.05).abs() < 1e-12);
        assert!((r.error - 0.05).abs() < 1e-12);
    }

    #[test]
    fn window_parsing() {
        assert_eq!(parse_window("height:0.5").unwrap(), CollapseWindow::Height { fraction: 0.5 });
        assert!(parse_window("height:2").is_err());
        assert!(parse_window("parameter:0.05").is_ok());
    }
}
