//! Closed-form fidelity susceptibility of the transverse-field Ising ring
//! at zero longitudinal field.
//!
//! After Jordan–Wigner the even-parity sector is a set of independent
//! 2×2 Bogoliubov problems, one per momentum pair `±k` with
//! `k = (2m+1)π/L`. With `H = Σ σᶻσᶻ + λ Σ σˣ` the block for `k` is
//! diagonalized by the angle `tan θ_k = sin k / (λ − cos k)` (for even `L`
//! the antiferromagnetic sign is removed by rotating every other spin,
//! which maps `k → π − k` and leaves the sum unchanged). The ground state
//! is a product over pairs of `cos(θ_k/2)|0⟩ + i sin(θ_k/2)|k,−k⟩`, so
//!
//! ```text
//! χ(λ) = Σ_{0<k<π} (1/4) (dθ_k/dλ)²
//!      = Σ_{0<k<π} sin²k / (4 (1 + λ² − 2λ cos k)²).
//! ```
//!
//! In the thermodynamic limit `χ/L → 1/(16(1−λ²))` for `λ < 1` and
//! `1/(16 λ² (λ²−1))` for `λ > 1`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::stats::{fit_line, golden_min};
use crate::{Error, Result};

/// Default chain length for the density exponent.
pub const DEFAULT_DENSITY_SITES: u32 = 4096;

/// Antiperiodic momenta of the even-parity sector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    sites: u32,
    momenta: Vec<f64>,
}

impl ModeSet {
    /// Momenta `(2m+1)π/L` folded into `(−π, π]`.
    pub fn new(sites: u32) -> Result<Self> {
        if sites < 2 {
            return Err(Error::domain(format!("mode set needs at least 2 sites, got {sites}")));
        }
        let l = sites as f64;
        let momenta = (0..sites)
            .map(|m| {
                let k = (2 * m + 1) as f64 * PI / l;
                if k > PI { k - 2.0 * PI } else { k }
            })
            .collect();
        Ok(ModeSet { sites, momenta })
    }

    pub fn sites(&self) -> u32 {
        self.sites
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    /// Momenta with `0 < k < π`.
    pub fn positive(&self) -> impl Iterator<Item = f64> + '_ {
        self.momenta.iter().copied().filter(|&k| k > 0.0 && k < PI)
    }
}

/// Contribution of a single mode `k`.
pub fn mode_fs(lambda: f64, k: f64) -> f64 {
    let s = k.sin();
    let d = 1.0 + lambda * lambda - 2.0 * lambda * k.cos();
    s * s / (4.0 * d * d)
}

fn check(lambda: f64, sites: u32) -> Result<ModeSet> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    if sites % 2 != 0 {
        return Err(Error::domain(format!(
            "the oracle covers even rings only (sublattice rotation), got L = {sites}"
        )));
    }
    let modes = ModeSet::new(sites)?;
    for &k in modes.momenta() {
        let d = 1.0 + lambda * lambda - 2.0 * lambda * k.cos();
        if !(d > 1e-300) {
            return Err(Error::domain(format!("mode gap closes at lambda = {lambda}, k = {k}")));
        }
    }
    Ok(modes)
}

/// Exact χ(λ) for an even ring of `sites` spins.
pub fn fs_exact(lambda: f64, sites: u32) -> Result<f64> {
    let modes = check(lambda, sites)?;
    Ok(modes.positive().map(|k| mode_fs(lambda, k)).sum())
}

/// Same quantity summed over every mode and halved.
pub fn fs_exact_full_sum(lambda: f64, sites: u32) -> Result<f64> {
    let modes = check(lambda, sites)?;
    Ok(0.5 * modes.momenta().iter().map(|&k| mode_fs(lambda, k)).sum::<f64>())
}

/// Thermodynamic-limit density `lim χ/L` (diverges at `λ = 1`).
pub fn fs_density_limit(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || lambda == 1.0 || !lambda.is_finite() {
        return Err(Error::domain(format!("no finite density at lambda = {lambda}")));
    }
    let l2 = lambda * lambda;
    Ok(if lambda < 1.0 { 1.0 / (16.0 * (1.0 - l2)) } else { 1.0 / (16.0 * l2 * (l2 - 1.0)) })
}

/// Finite-size maximum of χ(λ) located by golden section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePeak {
    pub sites: u32,
    pub lambda_max: f64,
    pub chi_max: f64,
}

pub fn peak(sites: u32) -> Result<OraclePeak> {
    check(1.0, sites)?;
    // coarse scan, then golden section between the neighbors of the best sample
    let grid: Vec<f64> = (0..=200).map(|i| 0.5 + i as f64 * 0.01).collect();
    let mut best = 0;
    let mut best_chi = f64::NEG_INFINITY;
    for (i, &l) in grid.iter().enumerate() {
        let c = fs_exact(l, sites)?;
        if c > best_chi {
            best_chi = c;
            best = i;
        }
    }
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::refused(format!("oracle peak for L = {sites} is outside [0.5, 2.5]")));
    }
    let neg = |l: f64| -fs_exact(l, sites).unwrap_or(0.0);
    let (lambda_max, f) = golden_min(neg, grid[best - 1], grid[best + 1], 1e-12);
    Ok(OraclePeak { sites, lambda_max, chi_max: -f })
}

/// Log-log slope of χ/L against |λ − 1|.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityExponent {
    pub slope: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub sites: u32,
    pub window: (f64, f64),
    pub points: Vec<(f64, f64)>,
}

/// Fit `ln(χ/L)` against `ln|λ−1|` on `npoints` log-spaced couplings in the
/// window `[lo, hi]`, which must lie on one side of `λ = 1` and keep
/// `|λ−1| ≥ 4π/L`.
pub fn fs_density_exponent(lo: f64, hi: f64, sites: u32, npoints: usize) -> Result<DensityExponent> {
    if !(lo < hi) || !(lo > 0.0) || !hi.is_finite() {
        return Err(Error::domain(format!("invalid lambda window [{lo}, {hi}]")));
    }
    if lo < 1.0 && hi > 1.0 {
        return Err(Error::refused(format!("window [{lo}, {hi}] straddles lambda = 1")));
    }
    if npoints < 3 {
        return Err(Error::domain("density exponent needs at least 3 points"));
    }
    let cutoff = 4.0 * PI / sites as f64;
    let (d_lo, d_hi) = {
        let a = (lo - 1.0).abs();
        let b = (hi - 1.0).abs();
        if a < b { (a, b) } else { (b, a) }
    };
    if d_lo < cutoff {
        return Err(Error::refused(format!(
            "window reaches |lambda-1| = {d_lo:.3e}, inside the finite-size cutoff 4π/L = {cutoff:.3e}"
        )));
    }
    let above = lo >= 1.0;
    let mut points = Vec::with_capacity(npoints);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..npoints {
        let d = d_lo * (d_hi / d_lo).powf(i as f64 / (npoints - 1) as f64);
        let lambda = if above { 1.0 + d } else { 1.0 - d };
        let density = fs_exact(lambda, sites)? / sites as f64;
        points.push((lambda, density));
        xs.push(d.ln());
        ys.push(density.ln());
    }
    let fit = fit_line(&xs, &ys)?;
    Ok(DensityExponent {
        slope: fit.slope,
        slope_se: fit.slope_se,
        r_squared: fit.r_squared,
        sites,
        window: (lo, hi),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{LanczosOptions, SolveOptions};
    use crate::fidelity::{DrivenModel, FsMethod};
    use crate::models::{DrivingTag, ModelParams, TfimParams};

    fn ed(sites: u32, lambda: f64, method: FsMethod) -> f64 {
        let base = ModelParams::Tfim(TfimParams { sites, lambda, h: 0.0 });
        let lanczos = LanczosOptions { tol: 1e-13, max_iter: 50_000, ..LanczosOptions::default() };
        let solve = SolveOptions { tol: 1e-13, ..SolveOptions::default() };
        let model = DrivenModel::new(base, DrivingTag::TfimXSum).unwrap().with_options(lanczos, solve);
        model.fs(lambda, method, 1e-3).unwrap().chi
    }

    #[test]
    fn mode_set_pairs() {
        let m = ModeSet::new(8).unwrap();
        assert_eq!(m.momenta().len(), 8);
        for &k in m.momenta() {
            assert!(m.momenta().iter().any(|&q| (q + k).abs() < 1e-12));
        }
        assert_eq!(m.positive().count(), 4);
    }

    #[test]
    fn matches_ed_finite_difference_at_ten_sites() {
        let exact = fs_exact(0.5, 10).unwrap();
        let fd = ed(10, 0.5, FsMethod::FiniteDifference);
        assert!(((fd - exact) / exact).abs() < 1e-6, "fd {fd} exact {exact}");
    }

    #[test]
    fn matches_ed_over_sizes_and_couplings() {
        for sites in [6, 8, 10] {
            for lambda in [0.3, 0.5, 1.5, 2.0] {
                let exact = fs_exact(lambda, sites).unwrap();
                let lr = ed(sites, lambda, FsMethod::SpectralSum);
                assert!(((lr - exact) / exact).abs() < 1e-6, "L={sites} λ={lambda}: {lr} vs {exact}");
            }
        }
    }

    #[test]
    fn half_sum_equals_full_sum() {
        for lambda in [0.2, 0.9, 1.1, 3.0] {
            let a = fs_exact(lambda, 12).unwrap();
            let b = fs_exact_full_sum(lambda, 12).unwrap();
            assert!(a > 0.0);
            assert!((a - b).abs() < 1e-14 * a);
        }
    }

    #[test]
    fn quartic_decay() {
        let c: Vec<f64> = [10.0, 20.0, 40.0].iter().map(|&l| fs_exact(l, 64).unwrap()).collect();
        for w in c.windows(2) {
            assert!((w[0] / w[1] - 16.0).abs() < 0.2, "ratio {}", w[0] / w[1]);
        }
    }

    #[test]
    fn peak_grows_quadratically() {
        let pts: Vec<(f64, f64)> = [64, 128, 256, 512]
            .iter()
            .map(|&l| (f64::from(l).ln(), peak(l).unwrap().chi_max.ln()))
            .collect();
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.02, "exponent {}", fit.slope);
    }

    #[test]
    fn density_approaches_limit() {
        for lambda in [0.5, 1.5] {
            let d = fs_exact(lambda, 4096).unwrap() / 4096.0;
            let lim = fs_density_limit(lambda).unwrap();
            assert!(((d - lim) / lim).abs() < 1e-6);
        }
    }

    #[test]
    fn density_exponent_contracts() {
        let a = fs_density_exponent(1.05, 1.5, 4096, 41).unwrap();
        let b = fs_density_exponent(1.05, 1.5, 8192, 41).unwrap();
        assert!((a.slope - b.slope).abs() < 0.01);
        let far = fs_density_exponent(2.0, 4.0, 4096, 41).unwrap();
        assert!((far.slope + 1.0).abs() > 0.5, "crossover slope {}", far.slope);
        assert!(matches!(fs_density_exponent(1.001, 1.5, 4096, 41), Err(Error::Refused(_))));
        assert!(fs_density_exponent(0.9, 1.1, 4096, 41).is_err());
    }

    #[test]
    fn invalid_inputs() {
        assert!(fs_exact(0.0, 8).is_err());
        assert!(fs_exact(f64::NAN, 8).is_err());
        assert!(fs_exact(0.5, 7).is_err());
        assert!(fs_density_limit(1.0).is_err());
    }
}
