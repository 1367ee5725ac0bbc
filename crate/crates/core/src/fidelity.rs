//! Fidelity and fidelity susceptibility (FS).
//!
//! Three routes to the same quantity:
//!
//! * finite difference of the ground-state overlap,
//!   `χ ≈ -2 ln |⟨ψ(x - δ/2)|ψ(x + δ/2)⟩| / δ²`, Richardson-paired over
//!   `{δ, δ/2}`;
//! * the spectral sum `Σ_{n≠0} |⟨n|H_I|0⟩|² / (E_n - E_0)²` over a dense
//!   spectrum;
//! * linear response, `χ = ‖(H - E₀)⁻¹ Q H_I ψ₀‖²`.
//!
//! The overlap is taken between states placed symmetrically around `x`, so
//! the odd terms of its expansion cancel and the step error is `O(δ²)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::eigen::{
    deflated_solve, dense_spectrum, ground_state, ground_state_from, EigResult, LanczosOptions,
    Operator, SolveOptions, Spectrum, DEGENERACY_RATIO,
};
use crate::models::{dot, DrivingTag, ModelParams, System, TfimParams};
use crate::{Error, Result};

/// Default finite-difference step in the driven coupling.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Overlaps below this are treated as a level crossing.
pub const MIN_OVERLAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FsMethod {
    FiniteDifference,
    SpectralSum,
    LinearResponse,
}

impl FsMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FsMethod::FiniteDifference => "finite_difference",
            FsMethod::SpectralSum => "spectral_sum",
            FsMethod::LinearResponse => "linear_response",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "finite_difference" => Ok(FsMethod::FiniteDifference),
            "spectral_sum" => Ok(FsMethod::SpectralSum),
            "linear_response" => Ok(FsMethod::LinearResponse),
            other => Err(Error::domain(format!("unknown FS method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FsPoint {
    pub x: f64,
    pub chi: f64,
    pub method: FsMethod,
    /// Step of the finite-difference route.
    pub delta_used: Option<f64>,
    /// Unextrapolated finite-difference values at `δ` and `δ/2`.
    pub raw: Option<(f64, f64)>,
    /// Worst solver residual behind this value.
    pub residual: f64,
    /// Total operator applications.
    pub iterations: usize,
}

/// `|⟨a|b⟩|`, clamped to `[0, 1]`.
pub fn overlap(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(dot(a, b).abs().min(1.0))
}

pub(crate) fn is_degenerate(gap: f64, e0: f64) -> bool {
    gap < DEGENERACY_RATIO * e0.abs().max(1.0)
}

/// A one-parameter family of Hamiltonians with a ground-state solver.
pub trait GroundStateFamily {
    fn ground_state_at(&self, x: f64) -> Result<EigResult>;

    /// Solve at `x` seeded from a nearby ground state.
    fn ground_state_near(&self, x: f64, _start: &[f64]) -> Result<EigResult> {
        self.ground_state_at(x)
    }
}

impl<F: Fn(f64) -> Result<EigResult>> GroundStateFamily for F {
    fn ground_state_at(&self, x: f64) -> Result<EigResult> {
        self(x)
    }
}

fn overlap_fs(a: &EigResult, b: &EigResult, delta: f64, x: f64) -> Result<f64> {
    for g in [a, b] {
        if g.near_degenerate {
            return Err(Error::Degenerate { gap: g.gap_estimate });
        }
    }
    let f = overlap(a.state.amplitudes(), b.state.amplitudes())?;
    if f < MIN_OVERLAP {
        return Err(Error::LevelCrossing { x });
    }
    Ok(-2.0 * f.ln() / (delta * delta))
}

/// Overlap-route FS at `x` with Richardson pairing of `δ` and `δ/2`.
pub fn fs_finite_difference(
    family: &impl GroundStateFamily,
    x: f64,
    delta: f64,
) -> Result<FsPoint> {
    fs_finite_difference_near(family, x, delta, None).map(|(p, _)| p)
}

/// As [`fs_finite_difference`], seeding the first solve from `start` and
/// also returning the ground state at `x + δ/2` for the next point.
pub fn fs_finite_difference_near(
    family: &impl GroundStateFamily,
    x: f64,
    delta: f64,
    start: Option<&[f64]>,
) -> Result<(FsPoint, Vec<f64>)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(format!("step δ = {delta} must be positive")));
    }
    let lo = match start {
        Some(s) => family.ground_state_near(x - delta / 2.0, s)?,
        None => family.ground_state_at(x - delta / 2.0)?,
    };
    let hi = family.ground_state_near(x + delta / 2.0, lo.state.amplitudes())?;
    let lo2 = family.ground_state_near(x - delta / 4.0, lo.state.amplitudes())?;
    let hi2 = family.ground_state_near(x + delta / 4.0, hi.state.amplitudes())?;
    let chi_full = overlap_fs(&lo, &hi, delta, x)?;
    let chi_half = overlap_fs(&lo2, &hi2, delta / 2.0, x)?;
    let chi = ((4.0 * chi_half - chi_full) / 3.0).max(0.0);
    let solves = [&lo, &hi, &lo2, &hi2];
    let point = FsPoint {
        x,
        chi,
        method: FsMethod::FiniteDifference,
        delta_used: Some(delta),
        raw: Some((chi_full, chi_half)),
        residual: solves.iter().map(|g| g.residual).fold(0.0, f64::max),
        iterations: solves.iter().map(|g| g.iterations).sum(),
    };
    Ok((point, hi.state.into_inner()))
}

/// Unextrapolated overlap FS for a single step, for convergence studies.
pub fn fs_overlap_single(family: &impl GroundStateFamily, x: f64, delta: f64) -> Result<f64> {
    let lo = family.ground_state_at(x - delta / 2.0)?;
    let hi = family.ground_state_near(x + delta / 2.0, lo.state.amplitudes())?;
    overlap_fs(&lo, &hi, delta, x)
}

/// FS from a complete spectrum.
pub fn fs_spectral_sum(spectrum: &Spectrum, driving: &impl Operator, x: f64) -> Result<FsPoint> {
    let n = spectrum.energies.len();
    if driving.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: driving.dim() });
    }
    let (e0, psi0) = spectrum.ground();
    if n > 1 && is_degenerate(spectrum.energies[1] - e0, e0) {
        return Err(Error::Degenerate { gap: spectrum.energies[1] - e0 });
    }
    let mut hi = vec![0.0; n];
    driving.apply_into(psi0, &mut hi);
    let chi = spectrum.energies[1..]
        .iter()
        .zip(&spectrum.vectors[1..])
        .map(|(e, v)| {
            let m = dot(v, &hi);
            m * m / ((e - e0) * (e - e0))
        })
        .sum();
    Ok(FsPoint {
        x,
        chi,
        method: FsMethod::SpectralSum,
        delta_used: None,
        raw: None,
        residual: 0.0,
        iterations: 0,
    })
}

/// FS as the squared norm of the deflated resolvent applied to `H_I ψ₀`.
pub fn fs_linear_response(
    hamiltonian: &impl Operator,
    ground: &EigResult,
    driving: &impl Operator,
    x: f64,
    opts: &SolveOptions,
) -> Result<FsPoint> {
    if ground.near_degenerate {
        return Err(Error::Degenerate { gap: ground.gap_estimate });
    }
    let psi0 = ground.state.amplitudes();
    let mut rhs = vec![0.0; psi0.len()];
    driving.apply_into(psi0, &mut rhs);
    let sol = deflated_solve(hamiltonian, ground.energy, psi0, &rhs, opts)?;
    let chi = dot(&sol.x, &sol.x);
    Ok(FsPoint {
        x,
        chi,
        method: FsMethod::LinearResponse,
        delta_used: None,
        raw: None,
        residual: ground.residual.max(sol.relative_residual),
        iterations: ground.iterations + sol.iterations,
    })
}

/// FS with respect to a longitudinal field `h` at `h = 0` on the
/// paramagnetic side of the Ising ring (`λ > 1`).
pub fn fs_h_driven(
    sites: u32,
    lambda: f64,
    lanczos: &LanczosOptions,
    solve: &SolveOptions,
) -> Result<FsPoint> {
    if !(lambda > 1.0) {
        return Err(Error::domain(format!(
            "h-driven FS needs lambda > 1 (got {lambda}); the ordered side is quasi-degenerate"
        )));
    }
    let base = ModelParams::Tfim(TfimParams { sites, lambda, h: 0.0 });
    let model = DrivenModel::new(base, DrivingTag::TfimZSum)?.with_options(*lanczos, *solve);
    let mut p = model.fs(0.0, FsMethod::LinearResponse, DEFAULT_DELTA)?;
    p.x = lambda;
    Ok(p)
}

/// A model with one driven coupling: the unit a sweep evaluates pointwise.
#[derive(Debug, Clone)]
pub struct DrivenModel {
    base: ModelParams,
    tag: DrivingTag,
    system: System,
    pub lanczos: LanczosOptions,
    pub solve: SolveOptions,
    /// Dimension limit for the dense spectral route.
    pub dense_max: usize,
}

impl DrivenModel {
    pub fn new(base: ModelParams, tag: DrivingTag) -> Result<Self> {
        if !base.supports(tag) {
            return Err(Error::domain(format!(
                "driving {} is not defined for the {} model",
                tag.as_str(),
                base.kind()
            )));
        }
        let system = System::new(&base)?;
        Ok(DrivenModel {
            base,
            tag,
            system,
            lanczos: LanczosOptions::default(),
            solve: SolveOptions::default(),
            dense_max: crate::eigen::DEFAULT_DENSE_MAX,
        })
    }

    pub fn with_options(mut self, lanczos: LanczosOptions, solve: SolveOptions) -> Self {
        self.lanczos = lanczos;
        self.solve = solve;
        self
    }

    pub fn base(&self) -> &ModelParams {
        &self.base
    }

    pub fn tag(&self) -> DrivingTag {
        self.tag
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn params_at(&self, x: f64) -> Result<ModelParams> {
        self.base.with_driving(self.tag, x)
    }

    pub fn spectrum_at(&self, x: f64) -> Result<Spectrum> {
        let p = self.params_at(x)?;
        dense_spectrum(&self.system.hamiltonian(&p)?, self.dense_max)
    }

    /// FS at coupling `x` by the chosen route.
    pub fn fs(&self, x: f64, method: FsMethod, delta: f64) -> Result<FsPoint> {
        match method {
            FsMethod::FiniteDifference => fs_finite_difference(self, x, delta),
            FsMethod::SpectralSum => {
                let spec = self.spectrum_at(x)?;
                fs_spectral_sum(&spec, &self.system.driving(self.tag)?, x)
            }
            FsMethod::LinearResponse => {
                let p = self.params_at(x)?;
                let h = self.system.hamiltonian(&p)?;
                let g = ground_state(&h, &self.lanczos)?;
                fs_linear_response(&h, &g, &self.system.driving(self.tag)?, x, &self.solve)
            }
        }
    }

    /// FS by any route, seeding Lanczos from `start` where the route uses
    /// it; returns a ground state to seed the next nearby point with.
    pub fn fs_near(
        &self,
        x: f64,
        method: FsMethod,
        delta: f64,
        start: Option<&[f64]>,
    ) -> Result<(FsPoint, Option<Vec<f64>>)> {
        match method {
            FsMethod::FiniteDifference => {
                fs_finite_difference_near(self, x, delta, start).map(|(p, s)| (p, Some(s)))
            }
            FsMethod::LinearResponse => self.fs_linear_response_near(x, start).map(|(p, s)| (p, Some(s))),
            FsMethod::SpectralSum => self.fs(x, method, delta).map(|p| (p, None)),
        }
    }

    /// Linear-response FS reusing a nearby ground state as the Lanczos start.
    pub fn fs_linear_response_near(&self, x: f64, start: Option<&[f64]>) -> Result<(FsPoint, Vec<f64>)> {
        let p = self.params_at(x)?;
        let h = self.system.hamiltonian(&p)?;
        let g = match start {
            Some(s) => ground_state_from(&h, &self.lanczos, s)?,
            None => ground_state(&h, &self.lanczos)?,
        };
        let point = fs_linear_response(&h, &g, &self.system.driving(self.tag)?, x, &self.solve)?;
        Ok((point, g.state.into_inner()))
    }
}

impl GroundStateFamily for DrivenModel {
    fn ground_state_at(&self, x: f64) -> Result<EigResult> {
        let p = self.params_at(x)?;
        ground_state(&self.system.hamiltonian(&p)?, &self.lanczos)
    }

    fn ground_state_near(&self, x: f64, start: &[f64]) -> Result<EigResult> {
        let p = self.params_at(x)?;
        ground_state_from(&self.system.hamiltonian(&p)?, &self.lanczos, start)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BoundaryCondition;
    use crate::eigen::{DenseOperator, FnOperator};
    use crate::models::{AhmParams, Wavefunction};

    /// `H = σ^z + λσ^x`, driven by `σ^x`.
    fn two_level(lambda: f64) -> DenseOperator {
        DenseOperator::from_row_major(2, vec![1.0, lambda, lambda, -1.0]).unwrap()
    }

    fn sigma_x() -> DenseOperator {
        DenseOperator::from_row_major(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn two_level_analytic(lambda: f64) -> f64 {
        1.0 / (4.0 * (1.0 + lambda * lambda).powi(2))
    }

    fn tight() -> LanczosOptions {
        LanczosOptions { tol: 1e-13, ..Default::default() }
    }

    #[test]
    fn overlap_basics() {
        let a = Wavefunction::normalized(vec![0.3, -0.4, 1.2]).unwrap();
        let v = a.amplitudes();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((overlap(v, v).unwrap() - 1.0).abs() < 1e-15);
        assert!((overlap(v, &neg).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(overlap(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(overlap(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn two_level_toy_all_routes() {
        for lambda in [0.0, 0.3, 1.7] {
            let expect = two_level_analytic(lambda);
            let spec = dense_spectrum(&two_level(lambda), 16).unwrap();
            let ss = fs_spectral_sum(&spec, &sigma_x(), lambda).unwrap();
            assert!((ss.chi - expect).abs() < 1e-12, "{lambda}: {}", ss.chi);

            let g = ground_state(&two_level(lambda), &tight()).unwrap();
            let lr = fs_linear_response(&two_level(lambda), &g, &sigma_x(), lambda, &SolveOptions::default())
                .unwrap();
            assert!((lr.chi - expect).abs() < 1e-10);

            let family = |x: f64| ground_state(&two_level(x), &tight());
            let fd = fs_finite_difference(&family, lambda, 1e-3).unwrap();
            assert!((fd.chi - expect).abs() < 1e-7, "{lambda}: {}", fd.chi);
        }
        assert!((two_level_analytic(0.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn spectral_sum_is_quadratic_in_driving() {
        let spec = dense_spectrum(&two_level(0.4), 16).unwrap();
        let base = fs_spectral_sum(&spec, &sigma_x(), 0.4).unwrap().chi;
        let scaled = FnOperator::new(2, |x: &[f64], y: &mut [f64]| {
            y[0] = 3.0 * x[1];
            y[1] = 3.0 * x[0];
        });
        let chi3 = fs_spectral_sum(&spec, &scaled, 0.4).unwrap().chi;
        assert!((chi3 - 9.0 * base).abs() < 1e-12);
        assert!(base >= 0.0);
    }

    #[test]
    fn degenerate_spectrum_is_refused() {
        let op = DenseOperator::from_row_major(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let spec = dense_spectrum(&op, 16).unwrap();
        assert!(matches!(fs_spectral_sum(&spec, &op, 0.0), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn level_crossing_is_reported() {
        // diag(x, -x): ground state jumps between unit vectors at x = 0
        let family = |x: f64| {
            let op = DenseOperator::from_row_major(2, vec![x, 0.0, 0.0, -x]).unwrap();
            ground_state(&op, &tight())
        };
        assert!(matches!(
            fs_finite_difference(&family, 0.0, 1e-3),
            Err(Error::LevelCrossing { .. })
        ));
    }

    fn ahm_model(sites: u32, t: f64, u: f64, n_up: u32, n_dn: u32, bc: BoundaryCondition) -> DrivenModel {
        let p = ModelParams::Ahm(AhmParams { sites, t, u, n_up, n_dn, bc });
        DrivenModel::new(p, DrivingTag::AhmDownHop).unwrap().with_options(
            tight(),
            SolveOptions { tol: 1e-12, max_iter: 10_000 },
        )
    }

    #[test]
    fn three_routes_agree_on_small_ahm() {
        for (nu, nd) in [(1, 1), (1, 2), (2, 1)] {
            for bc in [BoundaryCondition::Periodic, BoundaryCondition::Antiperiodic] {
                let m = ahm_model(3, 0.5, 4.0, nu, nd, bc);
                let ss = m.fs(0.5, FsMethod::SpectralSum, DEFAULT_DELTA);
                let ss = match ss {
                    Ok(p) => p,
                    // some odd-particle sectors are degenerate at this t
                    Err(Error::Degenerate { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                let fd = m.fs(0.5, FsMethod::FiniteDifference, DEFAULT_DELTA).unwrap();
                let lr = m.fs(0.5, FsMethod::LinearResponse, DEFAULT_DELTA).unwrap();
                assert!((fd.chi - ss.chi).abs() < 1e-6, "{nu},{nd} {bc:?}: {} {}", fd.chi, ss.chi);
                assert!((lr.chi - ss.chi).abs() < 1e-8 * ss.chi.max(1.0));
            }
        }
    }

    #[test]
    fn free_fermions_have_zero_fs() {
        for t in [0.3, 0.7, 1.0] {
            let m = ahm_model(6, t, 0.0, 2, 2, BoundaryCondition::Antiperiodic);
            let fd = m.fs(t, FsMethod::FiniteDifference, DEFAULT_DELTA).unwrap();
            assert!(fd.chi < 1e-6, "{t}: {}", fd.chi);
            let lr = m.fs(t, FsMethod::LinearResponse, DEFAULT_DELTA).unwrap();
            assert!(lr.chi < 1e-6, "{t}: {}", lr.chi);
        }
    }

    #[test]
    fn step_error_is_second_order() {
        let m = ahm_model(4, 0.6, 5.0, 2, 2, BoundaryCondition::Antiperiodic);
        let c: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&d| fs_overlap_single(&m, 0.6, d).unwrap())
            .collect();
        let ratio = (c[0] - c[1]) / (c[1] - c[2]);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}, values {c:?}");
    }

    #[test]
    fn h_driven_refuses_ordered_side() {
        let l = LanczosOptions::default();
        let s = SolveOptions::default();
        assert!(fs_h_driven(6, 0.9, &l, &s).is_err());
        assert!(fs_h_driven(6, 1.0, &l, &s).is_err());
        let p = fs_h_driven(6, 1.5, &l, &s).unwrap();
        assert_eq!(p.x, 1.5);
        assert!(p.chi > 0.0);
    }
}
