//! Peak location, power laws, data collapse and critical-point
//! extrapolation over families of FS curves.
//!
//! The scaling form fitted here is
//! `χ(t, L) = A / (L^{-μ} + B |t − t_max|^α)`, which makes
//! `(χ_max − χ)/χ` a function of `L^ν (t − t_max)` alone with `ν = μ/α`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::fidelity::FsMethod;
use crate::models::{DrivingTag, ModelParams};
use crate::stats::{fit_line, golden_min, least_squares, parabola_vertex};
use crate::{Error, Result};

/// Solver settings a curve was produced with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub delta: f64,
    pub lanczos_tol: f64,
    pub solve_tol: f64,
}

/// FS sampled along one driving coupling at fixed size and sector.
#[derive(Debug, Clone, PartialEq)]
pub struct FsCurve {
    /// Model with the driven coupling zeroed.
    pub params: ModelParams,
    pub tag: DrivingTag,
    pub grid: Vec<f64>,
    pub chi: Vec<f64>,
    pub method: FsMethod,
    pub provenance: Provenance,
}

impl FsCurve {
    pub fn new(
        params: ModelParams,
        tag: DrivingTag,
        grid: Vec<f64>,
        chi: Vec<f64>,
        method: FsMethod,
        provenance: Provenance,
    ) -> Result<Self> {
        if grid.len() != chi.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: chi.len() });
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::domain("curve grid must be strictly ascending"));
        }
        if let Some(c) = chi.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::domain(format!("curve holds an invalid FS value {c}")));
        }
        let params = params.with_driving(tag, 0.0)?;
        Ok(FsCurve { params, tag, grid, chi, method, provenance })
    }

    pub fn sites(&self) -> u32 {
        self.params.sites()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    /// Same curve with every χ multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> FsCurve {
        let mut c = self.clone();
        c.chi.iter_mut().for_each(|v| *v *= factor);
        c
    }
}

/// Located FS maximum of one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakEstimate {
    pub sites: u32,
    pub t_max: f64,
    pub chi_max: f64,
    /// Second derivative of the local parabola.
    pub curvature: f64,
    /// Grid indices of the samples the parabola went through.
    pub window: [usize; 3],
    /// Extra evaluations made by the refinement callback.
    pub refinements: usize,
}

/// Parabola through the largest sample and its two neighbors.
pub fn find_peak(curve: &FsCurve) -> Result<PeakEstimate> {
    find_peak_refined(curve, 0, |_| Err(Error::domain("no refinement")))
}

/// As [`find_peak`], then re-evaluate χ at the vertex up to `max_refine`
/// times, each time refitting through the best sample and its nearest
/// neighbors among all samples seen so far.
pub fn find_peak_refined(
    curve: &FsCurve,
    max_refine: usize,
    mut eval: impl FnMut(f64) -> Result<f64>,
) -> Result<PeakEstimate> {
    let n = curve.len();
    if n < 5 {
        return Err(Error::domain(format!("peak search needs at least 5 points, got {n}")));
    }
    let i = argmax(&curve.chi);
    if i == 0 || i == n - 1 {
        let side = if i == 0 { "below" } else { "above" };
        return Err(Error::refused(format!(
            "L = {}: FS maximum sits on the grid boundary t = {}; extend the grid {side}",
            curve.sites(),
            curve.grid[i]
        )));
    }
    let tri = |pts: &[(f64, f64)], j: usize| [pts[j - 1], pts[j], pts[j + 1]];
    let mut pts: Vec<(f64, f64)> = curve.grid.iter().copied().zip(curve.chi.iter().copied()).collect();
    let (mut tv, mut cv, mut curv) = vertex(tri(&pts, i))?;
    let mut refinements = 0;
    while refinements < max_refine {
        let spacing = pts[i + 1].0 - pts[i - 1].0;
        if pts.iter().any(|p| (p.0 - tv).abs() < 1e-9 * spacing) {
            break;
        }
        let c = eval(tv)?;
        refinements += 1;
        let pos = pts.partition_point(|p| p.0 < tv);
        pts.insert(pos, (tv, c));
        let chis: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let j = argmax(&chis);
        let (t2, c2, k2) = vertex(tri(&pts, j))?;
        let moved = (t2 - tv).abs();
        tv = t2;
        cv = c2;
        curv = k2;
        if moved < 1e-6 * spacing {
            break;
        }
    }
    Ok(PeakEstimate {
        sites: curve.sites(),
        t_max: tv,
        chi_max: cv,
        curvature: curv,
        window: [i - 1, i, i + 1],
        refinements,
    })
}

fn vertex(p: [(f64, f64); 3]) -> Result<(f64, f64, f64)> {
    match parabola_vertex(p) {
        Some((t, c, k)) if k < 0.0 && t >= p[0].0 && t <= p[2].0 => Ok((t, c, k)),
        _ => Err(Error::refused("FS samples around the maximum are not concave; refine the grid")),
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// `y = prefactor · L^exponent` fitted in log-log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub exponent: f64,
    pub exponent_se: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

pub fn fit_power(points: &[(f64, f64)]) -> Result<PowerFit> {
    if points.len() < 3 {
        return Err(Error::domain(format!("power fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0) || !(p.1 > 0.0)) {
        return Err(Error::domain(format!("power fit needs positive data, got ({}, {})", p.0, p.1)));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let f = fit_line(&x, &y)?;
    Ok(PowerFit {
        exponent: f.slope,
        exponent_se: f.slope_se,
        prefactor: f.intercept.exp(),
        r_squared: f.r_squared,
    })
}

/// A curve mapped to `(L^ν (t − t_max), (χ_max − χ)/χ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledCurve {
    pub sites: u32,
    pub points: Vec<(f64, f64)>,
}

pub fn rescale(curve: &FsCurve, peak: &PeakEstimate, nu: f64) -> Result<RescaledCurve> {
    rescale_indices(curve, peak, nu, 0..curve.len())
}

fn rescale_indices(
    curve: &FsCurve,
    peak: &PeakEstimate,
    nu: f64,
    idx: impl Iterator<Item = usize>,
) -> Result<RescaledCurve> {
    let scale = f64::from(curve.sites()).powf(nu);
    let mut points = Vec::new();
    for i in idx {
        let c = curve.chi[i];
        if !(c > 0.0) {
            return Err(Error::domain(format!("cannot rescale zero FS at t = {}", curve.grid[i])));
        }
        points.push((scale * (curve.grid[i] - peak.t_max), (peak.chi_max - c) / c));
    }
    Ok(RescaledCurve { sites: curve.sites(), points })
}

/// Which samples of each curve enter the collapse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollapseWindow {
    /// Samples with `χ ≥ fraction · χ_max`.
    Height { fraction: f64 },
    /// Samples with `|t − t_max| ≤ half_width`.
    Parameter { half_width: f64 },
}

impl CollapseWindow {
    fn contains(&self, t: f64, chi: f64, peak: &PeakEstimate) -> bool {
        match *self {
            CollapseWindow::Height { fraction } => chi >= fraction * peak.chi_max,
            CollapseWindow::Parameter { half_width } => (t - peak.t_max).abs() <= half_width,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CollapseWindow::Height { fraction } => format!("height:{fraction}"),
            CollapseWindow::Parameter { half_width } => format!("parameter:{half_width}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseOptions {
    pub nu_bracket: (f64, f64),
    pub window: CollapseWindow,
    /// Points from other sizes used by each local quadratic.
    pub neighbors: usize,
    /// Coarse scan resolution before golden section.
    pub scan_points: usize,
    pub tol: f64,
}

impl CollapseOptions {
    /// Bracket for fillings away from one.
    pub fn landau() -> Self {
        CollapseOptions {
            nu_bracket: (1.0, 4.0),
            window: CollapseWindow::Height { fraction: 0.5 },
            neighbors: 6,
            scan_points: 31,
            tol: 1e-6,
        }
    }

    /// Bracket for half filling.
    pub fn kt() -> Self {
        CollapseOptions { nu_bracket: (-1.0, 0.5), ..Self::landau() }
    }
}

/// Result of a data collapse.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseFit {
    pub mu: f64,
    pub mu_se: f64,
    pub nu: f64,
    pub nu_se: f64,
    pub alpha: f64,
    pub alpha_se: f64,
    pub a: f64,
    pub b: f64,
    /// Collapse cost at the optimum.
    pub residual: f64,
    /// Points that had a master-curve estimate at the optimum.
    pub points_used: usize,
    pub peaks: Vec<PeakEstimate>,
    /// μ from the largest sizes only (smallest one dropped), when ≥ 3 remain.
    pub mu_largest: Option<PowerFit>,
    /// Coarse scan of the cost, for inspection.
    pub scan: Vec<(f64, f64)>,
    pub options: CollapseOptions,
}

struct Pooled {
    curve: usize,
    sites: f64,
    dt: f64,
    y: f64,
}

fn pool(curves: &[FsCurve], peaks: &[PeakEstimate], window: CollapseWindow) -> Result<Vec<Pooled>> {
    let mut out = Vec::new();
    for (ci, (c, p)) in curves.iter().zip(peaks).enumerate() {
        for (&t, &chi) in c.grid.iter().zip(&c.chi) {
            if !window.contains(t, chi, p) {
                continue;
            }
            if !(chi > 0.0) {
                return Err(Error::domain(format!("cannot rescale zero FS at t = {t}")));
            }
            out.push(Pooled { curve: ci, sites: f64::from(c.sites()), dt: t - p.t_max, y: (p.chi_max - chi) / chi });
        }
    }
    Ok(out)
}

/// Mean squared distance of each pooled point from a local quadratic
/// through its nearest neighbors on the other curves. Points without
/// neighbors on both sides are skipped.
fn collapse_cost(pts: &[Pooled], nu: f64, neighbors: usize) -> (f64, usize) {
    let xs: Vec<f64> = pts.iter().map(|p| p.sites.powf(nu) * p.dt).collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut sum = 0.0;
    let mut used = 0;
    let mut near: Vec<(f64, usize)> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        near.clear();
        near.extend(
            order
                .iter()
                .filter(|&&j| pts[j].curve != p.curve)
                .map(|&j| ((xs[j] - xs[i]).abs(), j)),
        );
        if near.len() < 3 {
            continue;
        }
        let k = neighbors.max(3).min(near.len());
        near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let chosen = &near[..k];
        let left = chosen.iter().any(|&(_, j)| xs[j] <= xs[i]);
        let right = chosen.iter().any(|&(_, j)| xs[j] >= xs[i]);
        if !(left && right) {
            continue;
        }
        let span = chosen.iter().map(|c| c.0).fold(0.0, f64::max);
        if !(span > 0.0) {
            continue;
        }
        let rows: Vec<Vec<f64>> = chosen
            .iter()
            .map(|&(_, j)| {
                let u = (xs[j] - xs[i]) / span;
                vec![1.0, u, u * u]
            })
            .collect();
        let ys: Vec<f64> = chosen.iter().map(|&(_, j)| pts[j].y).collect();
        if let Ok(fit) = least_squares(&rows, &ys) {
            let d = p.y - fit.coef[0];
            sum += d * d;
            used += 1;
        }
    }
    if used == 0 { (f64::INFINITY, 0) } else { (sum / used as f64, used) }
}

/// Fit ν by collapsing `(χ_max − χ)/χ` against `L^ν (t − t_max)`, take μ
/// from the peak heights and derive α = μ/ν, A and B.
pub fn collapse_fit(curves: &[FsCurve], peaks: &[PeakEstimate], opts: &CollapseOptions) -> Result<CollapseFit> {
    if curves.len() < 3 || curves.len() != peaks.len() {
        return Err(Error::domain(format!(
            "collapse needs at least 3 sizes with one peak each (got {} curves, {} peaks)",
            curves.len(),
            peaks.len()
        )));
    }
    let (lo, hi) = opts.nu_bracket;
    if !(lo < hi) || opts.scan_points < 3 {
        return Err(Error::domain("collapse bracket must be ordered and scanned by at least 3 points"));
    }
    let pts = pool(curves, peaks, opts.window)?;
    let cost = |nu: f64| collapse_cost(&pts, nu, opts.neighbors).0;
    let step = (hi - lo) / (opts.scan_points - 1) as f64;
    let scan: Vec<(f64, f64)> = (0..opts.scan_points)
        .map(|i| {
            let nu = lo + step * i as f64;
            (nu, cost(nu))
        })
        .collect();
    let best = (0..scan.len())
        .min_by(|&a, &b| scan[a].1.total_cmp(&scan[b].1))
        .unwrap_or(0);
    if best == 0 || best == scan.len() - 1 || !scan[best].1.is_finite() {
        return Err(Error::refused(format!(
            "collapse cost not bracketed in nu ∈ [{lo}, {hi}]: cost({lo}) = {:.6e}, cost({hi}) = {:.6e}, minimum at nu = {}",
            scan[0].1,
            scan[scan.len() - 1].1,
            scan[best].0
        )));
    }
    let (nu, residual) = golden_min(cost, scan[best - 1].0, scan[best + 1].0, opts.tol);
    let (_, points_used) = collapse_cost(&pts, nu, opts.neighbors);

    // curvature of the cost gives the usual least-squares error estimate
    let h = (step * 0.25).max(1e-4);
    let s2 = (cost(nu + h) - 2.0 * residual + cost(nu - h)) / (h * h);
    let nu_se = if s2 > 0.0 && points_used > 1 {
        (2.0 * residual / ((points_used - 1) as f64 * s2)).sqrt()
    } else {
        f64::INFINITY
    };

    let heights: Vec<(f64, f64)> = peaks.iter().map(|p| (f64::from(p.sites), p.chi_max)).collect();
    let pf = fit_power(&heights)?;
    let mu_largest = if heights.len() > 3 {
        let mut sorted = heights.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(fit_power(&sorted[1..])?)
    } else {
        None
    };
    let mu = pf.exponent;
    let alpha = mu / nu;
    let alpha_se = alpha.abs() * ((pf.exponent_se / mu).powi(2) + (nu_se / nu).powi(2)).sqrt();
    let (a, b) = fit_amplitudes(curves, peaks, opts.window, mu, alpha)?;
    Ok(CollapseFit {
        mu,
        mu_se: pf.exponent_se,
        nu,
        nu_se,
        alpha,
        alpha_se,
        a,
        b,
        residual,
        points_used,
        peaks: peaks.to_vec(),
        mu_largest,
        scan,
        options: *opts,
    })
}

/// `1/χ = L^{-μ}/A + (B/A)|t − t_max|^α` by linear least squares.
fn fit_amplitudes(
    curves: &[FsCurve],
    peaks: &[PeakEstimate],
    window: CollapseWindow,
    mu: f64,
    alpha: f64,
) -> Result<(f64, f64)> {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (c, p) in curves.iter().zip(peaks) {
        let l = f64::from(c.sites());
        for (&t, &chi) in c.grid.iter().zip(&c.chi) {
            if chi > 0.0 && window.contains(t, chi, p) {
                rows.push(vec![l.powf(-mu), (t - p.t_max).abs().powf(alpha)]);
                ys.push(1.0 / chi);
            }
        }
    }
    let fit = least_squares(&rows, &ys)?;
    let (p, q) = (fit.coef[0], fit.coef[1]);
    Ok((1.0 / p, q / p))
}

/// Rescaled points of every curve at a given ν, inside the collapse window.
pub fn collapse_points(
    curves: &[FsCurve],
    peaks: &[PeakEstimate],
    nu: f64,
    window: CollapseWindow,
) -> Result<Vec<RescaledCurve>> {
    curves
        .iter()
        .zip(peaks)
        .map(|(c, p)| {
            let idx = (0..c.len()).filter(|&i| window.contains(c.grid[i], c.chi[i], p));
            rescale_indices(c, p, nu, idx)
        })
        .collect()
}

/// `χ ≈ a + b L + c L^{-1/2} (t − t_max)²` near the maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct KtFormFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_se: f64,
    pub b_se: f64,
    pub c_se: f64,
    pub rss: f64,
    pub half_width: f64,
    pub points_used: usize,
}

pub const DEFAULT_KT_HALF_WIDTH: f64 = 0.05;

pub fn fit_kt_form(curves: &[FsCurve], peaks: &[PeakEstimate], half_width: f64) -> Result<KtFormFit> {
    if curves.len() != peaks.len() || curves.len() < 2 {
        return Err(Error::domain("KT form needs at least two curves with one peak each"));
    }
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (c, p) in curves.iter().zip(peaks) {
        let l = f64::from(c.sites());
        let before = rows.len();
        for (&t, &chi) in c.grid.iter().zip(&c.chi) {
            let d = t - p.t_max;
            if d.abs() <= half_width {
                rows.push(vec![1.0, l, d * d / l.sqrt()]);
                ys.push(chi);
            }
        }
        if rows.len() - before < 3 {
            return Err(Error::refused(format!(
                "L = {}: fewer than 3 samples within {half_width} of t_max = {}",
                c.sites(),
                p.t_max
            )));
        }
    }
    let fit = least_squares(&rows, &ys)?;
    Ok(KtFormFit {
        a: fit.coef[0],
        b: fit.coef[1],
        c: fit.coef[2],
        a_se: fit.se[0],
        b_se: fit.se[1],
        c_se: fit.se[2],
        rss: fit.rss,
        half_width,
        points_used: ys.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcLaw {
    /// `t(L) = t_c + c L⁻²`
    LandauL2,
    /// `t(L) = t_c + c L⁻¹`
    OneOverL,
}

impl TcLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            TcLaw::LandauL2 => "landau_L2",
            TcLaw::OneOverL => "kt_one_over_L",
        }
    }

    fn power(self) -> f64 {
        match self {
            TcLaw::LandauL2 => 2.0,
            TcLaw::OneOverL => 1.0,
        }
    }
}

/// Extrapolated critical coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct TcEstimate {
    pub tc: f64,
    pub tc_se: f64,
    pub slope: f64,
    pub law: TcLaw,
    /// Residual sum of squares of the size fit.
    pub residual: f64,
    /// `(L, marker)` pairs that were extrapolated.
    pub markers: Vec<(f64, f64)>,
}

/// Fit `marker(L) = t_c + c L^{-p}` for the law's power `p`, refusing a
/// `t_c` outside `range`.
pub fn extrapolate_tc(markers: &[(f64, f64)], law: TcLaw, range: (f64, f64)) -> Result<TcEstimate> {
    if markers.len() < 3 {
        return Err(Error::refused(format!(
            "critical-point extrapolation needs at least 3 sizes, got {}",
            markers.len()
        )));
    }
    let x: Vec<f64> = markers.iter().map(|m| m.0.powf(-law.power())).collect();
    let y: Vec<f64> = markers.iter().map(|m| m.1).collect();
    let f = fit_line(&x, &y)?;
    if f.intercept < range.0 || f.intercept > range.1 {
        return Err(Error::refused(format!(
            "extrapolated t_c = {} lies outside the swept range [{}, {}]",
            f.intercept, range.0, range.1
        )));
    }
    Ok(TcEstimate {
        tc: f.intercept,
        tc_se: f.intercept_se,
        slope: f.slope,
        law,
        residual: f.rss,
        markers: markers.to_vec(),
    })
}

/// `t_max(L) = t_c + c L⁻²`.
pub fn extrapolate_tc_landau(peaks: &[PeakEstimate], range: (f64, f64)) -> Result<TcEstimate> {
    let m: Vec<(f64, f64)> = peaks.iter().map(|p| (f64::from(p.sites), p.t_max)).collect();
    extrapolate_tc(&m, TcLaw::LandauL2, range)
}

/// Three-point derivative at each interior grid point (exact for
/// quadratics on non-uniform grids).
pub fn central_derivative(grid: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    (1..grid.len().saturating_sub(1))
        .map(|i| {
            let (h0, h1) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
            let d = (-h1 / (h0 * (h0 + h1))) * values[i - 1]
                + ((h1 - h0) / (h0 * h1)) * values[i]
                + (h0 / (h1 * (h0 + h1))) * values[i + 1];
            (grid[i], d)
        })
        .collect()
}

/// Location of the steepest descent of one curve.
pub fn steepest_descent(curve: &FsCurve) -> Result<(f64, f64)> {
    let d = central_derivative(&curve.grid, &curve.chi);
    if d.len() < 3 {
        return Err(Error::domain("derivative minimum needs at least 5 grid points"));
    }
    let i = (0..d.len()).min_by(|&a, &b| d[a].1.total_cmp(&d[b].1)).unwrap_or(0);
    if i == 0 || i == d.len() - 1 {
        return Err(Error::refused(format!(
            "L = {}: steepest descent at the grid boundary t = {}; extend the grid",
            curve.sites(),
            d[i].0
        )));
    }
    match parabola_vertex([d[i - 1], d[i], d[i + 1]]) {
        Some((t, v, k)) if k > 0.0 && t >= d[i - 1].0 && t <= d[i + 1].0 => Ok((t, v)),
        _ => Ok(d[i]),
    }
}

/// Minima of dχ/dt extrapolated linearly in 1/L.
pub fn extrapolate_tc_kt(curves: &[FsCurve]) -> Result<TcEstimate> {
    if curves.len() < 3 {
        return Err(Error::refused(format!(
            "critical-point extrapolation needs at least 3 sizes, got {}",
            curves.len()
        )));
    }
    let mut markers = Vec::new();
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for c in curves {
        let (t, _) = steepest_descent(c)?;
        markers.push((f64::from(c.sites()), t));
        let (a, b) = c.range();
        range = (range.0.min(a), range.1.max(b));
    }
    extrapolate_tc(&markers, TcLaw::OneOverL, range)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BoundaryCondition;
    use crate::models::AhmParams;

    fn prov() -> Provenance {
        Provenance { seed: 1, delta: 1e-3, lanczos_tol: 1e-10, solve_tol: 1e-10 }
    }

    fn ahm(sites: u32) -> ModelParams {
        ModelParams::Ahm(AhmParams {
            sites,
            t: 0.5,
            u: 30.0,
            n_up: 1,
            n_dn: 1,
            bc: BoundaryCondition::Periodic,
        })
    }

    fn curve(sites: u32, grid: Vec<f64>, f: impl Fn(f64) -> f64) -> FsCurve {
        let chi = grid.iter().map(|&t| f(t)).collect();
        FsCurve::new(ahm(sites), DrivingTag::AhmDownHop, grid, chi, FsMethod::LinearResponse, prov()).unwrap()
    }

    fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    fn eq7(l: f64, t: f64, a: f64, b: f64, mu: f64, alpha: f64, tmax: f64) -> f64 {
        a / (l.powf(-mu) + b * (t - tmax).abs().powf(alpha))
    }

    #[test]
    fn curve_invariants() {
        let g = vec![0.1, 0.2, 0.2];
        assert!(FsCurve::new(ahm(6), DrivingTag::AhmDownHop, g, vec![1.0; 3], FsMethod::SpectralSum, prov()).is_err());
        assert!(FsCurve::new(ahm(6), DrivingTag::AhmDownHop, vec![0.1, 0.2], vec![1.0, -1.0], FsMethod::SpectralSum, prov())
            .is_err());
        assert!(FsCurve::new(ahm(6), DrivingTag::AhmDownHop, vec![0.1, 0.2], vec![1.0], FsMethod::SpectralSum, prov())
            .is_err());
    }

    #[test]
    fn exact_parabola_peak() {
        let c = curve(6, uniform(0.0, 1.0, 11), |t| 5.0 - 3.0 * (t - 0.43) * (t - 0.43));
        let p = find_peak(&c).unwrap();
        assert!((p.t_max - 0.43).abs() < 1e-13);
        assert!((p.chi_max - 5.0).abs() < 1e-13);
        assert!((p.curvature + 6.0).abs() < 1e-9);
        assert_eq!(p.window, [3, 4, 5]);
    }

    #[test]
    fn symmetric_peak_at_midpoint() {
        let c = curve(6, uniform(-1.0, 1.0, 9), |t| 1.0 / (1.0 + t * t));
        assert!(find_peak(&c).unwrap().t_max.abs() < 1e-14);
    }

    #[test]
    fn peak_refinement_converges() {
        let f = |t: f64| 1.0 / (0.01 + (t - 0.337) * (t - 0.337));
        let c = curve(6, uniform(0.0, 1.0, 21), f);
        let crude = find_peak(&c).unwrap();
        let fine = find_peak_refined(&c, 3, |t| Ok(f(t))).unwrap();
        assert!(fine.refinements >= 1 && fine.refinements <= 3);
        assert!((fine.t_max - 0.337).abs() < (crude.t_max - 0.337).abs());
        assert!((fine.t_max - 0.337).abs() < 1e-3);
    }

    #[test]
    fn boundary_peak_refused() {
        let c = curve(6, uniform(0.0, 1.0, 6), |t| t);
        match find_peak(&c) {
            Err(Error::Refused(m)) => assert!(m.contains("extend the grid")),
            other => panic!("{other:?}"),
        }
        let short = curve(6, uniform(0.0, 1.0, 4), |t| 1.0 - (t - 0.5).abs());
        assert!(find_peak(&short).is_err());
    }

    #[test]
    fn power_law() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0].iter().map(|&l| (l, 3.0 * l * l)).collect();
        let f = fit_power(&pts).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_power(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_power(&[(1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn rescale_contracts() {
        let c = curve(8, uniform(0.0, 1.0, 11), |t| 2.0 - (t - 0.5) * (t - 0.5));
        let p = find_peak(&c).unwrap();
        let r = rescale(&c, &p, 1.5).unwrap();
        assert_eq!(r.points[5], (0.0, 0.0));
        let shift = rescale(&c, &p, 0.0).unwrap();
        for (pt, t) in shift.points.iter().zip(&c.grid) {
            assert!((pt.0 - (t - 0.5)).abs() < 1e-15);
        }
        assert!(r.points.windows(2).all(|w| w[0].0 < w[1].0));
        // the maximum of −y' sits at x' = 0
        let top = r.points.iter().max_by(|a, b| (-a.1).total_cmp(&-b.1)).unwrap();
        assert_eq!(top.0, 0.0);
        let zero = curve(8, uniform(0.0, 1.0, 5), |t| if t == 0.0 { 0.0 } else { 1.0 });
        assert!(rescale(&zero, &p, 1.0).is_err());
    }

    fn synthetic_family(mu: f64, nu: f64) -> (Vec<FsCurve>, Vec<PeakEstimate>) {
        let alpha = mu / nu;
        let mut curves = Vec::new();
        for &l in &[6u32, 9, 12, 15] {
            let lf = f64::from(l);
            let tmax = 0.3 + 2.0 / (lf * lf);
            // each grid hits t_max exactly, spacing shrinks with the peak width
            let w = lf.powf(-nu);
            let grid: Vec<f64> = (-30..=30).map(|i| tmax + w * 0.1 * f64::from(i)).collect();
            curves.push(curve(l, grid, |t| eq7(lf, t, 2.0, 0.7, mu, alpha, tmax)));
        }
        let peaks = curves.iter().map(|c| find_peak(c).unwrap()).collect();
        (curves, peaks)
    }

    #[test]
    fn synthetic_collapse_recovers_exponents() {
        let (curves, peaks) = synthetic_family(5.3, 2.65);
        let fit = collapse_fit(&curves, &peaks, &CollapseOptions::landau()).unwrap();
        assert!((fit.nu - 2.65).abs() < 0.01 * 2.65, "nu {}", fit.nu);
        assert!((fit.mu - 5.3).abs() < 0.01 * 5.3, "mu {}", fit.mu);
        assert!((fit.alpha - 2.0).abs() < 0.02);
        assert!((fit.a - 2.0).abs() < 1e-6 && (fit.b - 0.7).abs() < 1e-6, "A {} B {}", fit.a, fit.b);
        assert_eq!(fit.alpha, fit.mu / fit.nu);
        assert!(fit.residual >= 0.0);
        assert!(fit.mu_largest.is_some());
    }

    #[test]
    fn collapse_is_scale_invariant() {
        let (curves, peaks) = synthetic_family(5.3, 2.65);
        let opts = CollapseOptions::landau();
        let a = collapse_fit(&curves, &peaks, &opts).unwrap();
        let scaled: Vec<FsCurve> = curves.iter().map(|c| c.scaled(7.5)).collect();
        let speaks: Vec<PeakEstimate> = scaled.iter().map(|c| find_peak(c).unwrap()).collect();
        let b = collapse_fit(&scaled, &speaks, &opts).unwrap();
        assert!((a.nu - b.nu).abs() < 10.0 * opts.tol);
        assert!((a.mu - b.mu).abs() < 1e-10);
    }

    #[test]
    fn unbracketed_collapse_refused() {
        let (curves, peaks) = synthetic_family(5.3, 2.65);
        let opts = CollapseOptions { nu_bracket: (1.0, 2.2), ..CollapseOptions::landau() };
        match collapse_fit(&curves, &peaks, &opts) {
            Err(Error::Refused(m)) => assert!(m.contains("cost(1)") && m.contains("cost(2.2)"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(collapse_fit(&curves[..2], &peaks[..2], &CollapseOptions::landau()).is_err());
    }

    #[test]
    fn kt_form_exact_recovery() {
        let (a, b, c) = (3.855, 0.7478, -1349.9);
        let mut curves = Vec::new();
        let mut peaks = Vec::new();
        for &l in &[6u32, 8, 10, 12] {
            let lf = f64::from(l);
            let tmax = 0.1 + 0.01 * lf;
            let cv = curve(l, uniform(tmax - 0.1, tmax + 0.1, 41), |t| {
                a + b * lf + c / lf.sqrt() * (t - tmax) * (t - tmax)
            });
            peaks.push(find_peak(&cv).unwrap());
            curves.push(cv);
        }
        let f = fit_kt_form(&curves, &peaks, DEFAULT_KT_HALF_WIDTH).unwrap();
        assert!((f.a - a).abs() < 1e-8 && (f.b - b).abs() < 1e-9 && (f.c - c).abs() < 1e-6);
        let ratios: Vec<f64> = peaks.iter().map(|p| (p.chi_max / f64::from(p.sites) - b).abs()).collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]));
        assert!(matches!(fit_kt_form(&curves, &peaks, 0.004), Err(Error::Refused(_))));
    }

    #[test]
    fn landau_extrapolation() {
        let peaks: Vec<PeakEstimate> = [6u32, 9, 12, 15]
            .iter()
            .map(|&l| PeakEstimate {
                sites: l,
                t_max: 0.5 + 2.0 / f64::from(l * l),
                chi_max: 1.0,
                curvature: -1.0,
                window: [0, 1, 2],
                refinements: 0,
            })
            .collect();
        let e = extrapolate_tc_landau(&peaks, (0.0, 1.0)).unwrap();
        assert!((e.tc - 0.5).abs() < 1e-13 && (e.slope - 2.0).abs() < 1e-10);
        assert_eq!(e.law.as_str(), "landau_L2");
        let flat: Vec<(f64, f64)> = [6.0, 9.0, 12.0].iter().map(|&l| (l, 0.4)).collect();
        let f = extrapolate_tc(&flat, TcLaw::LandauL2, (0.0, 1.0)).unwrap();
        assert!((f.tc - 0.4).abs() < 1e-14 && f.slope.abs() < 1e-12);
        assert!(matches!(extrapolate_tc_landau(&peaks[..2], (0.0, 1.0)), Err(Error::Refused(_))));
        assert!(matches!(extrapolate_tc_landau(&peaks, (0.6, 1.0)), Err(Error::Refused(_))));
    }

    #[test]
    fn derivative_exact_for_quadratic_and_small_for_cubic() {
        let grid = vec![0.0, 0.1, 0.25, 0.3, 0.5, 0.55, 0.8];
        let q: Vec<f64> = grid.iter().map(|t| 1.0 + 2.0 * t - 3.0 * t * t).collect();
        for (t, d) in central_derivative(&grid, &q) {
            assert!((d - (2.0 - 6.0 * t)).abs() < 1e-12);
        }
        let h = 1e-2;
        let g: Vec<f64> = (0..50).map(|i| f64::from(i) * h).collect();
        let c: Vec<f64> = g.iter().map(|t| t * t * t).collect();
        for (t, d) in central_derivative(&g, &c) {
            // truncation error of the central difference is h² f'''/6 = h²
            assert!((d - 3.0 * t * t - h * h).abs() < 1e-10);
        }
    }

    #[test]
    fn kt_extrapolation_recovers_intercept() {
        let curves: Vec<FsCurve> = [6u32, 8, 10, 12]
            .iter()
            .map(|&l| {
                let s = 0.3 - 0.5 / f64::from(l);
                curve(l, uniform(0.0, 0.6, 121), move |t| 10.0 - (8.0 * (t - s)).tanh())
            })
            .collect();
        let e = extrapolate_tc_kt(&curves).unwrap();
        assert!((e.tc - 0.3).abs() < 0.01 * 0.3, "tc {}", e.tc);
        assert_eq!(e.law, TcLaw::OneOverL);
        let edge = curve(6, uniform(0.0, 0.6, 31), |t| 1.0 - t * t);
        assert!(matches!(extrapolate_tc_kt(&[edge.clone(), edge.clone(), edge]), Err(Error::Refused(_))));
    }
}
