//! Matrix-free Hamiltonians for the asymmetric Hubbard ring and the
//! transverse-field Ising ring, plus their driving operators.
//!
//! AHM: `H = -Σ_{j,δ,σ} t_σ c†_{j,σ} c_{j+δ,σ} + U Σ_j n_{j↑} n_{j↓}` with
//! `t_↑ = 1`, `t_↓ = t`.
//!
//! TFIM: `H = Σ_j [σ^z_j σ^z_{j+1} + λ σ^x_j + h σ^z_j]` on the full `2^L`
//! σ^z basis, bit `j` set meaning `σ^z_j = +1`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::basis::{BoundaryCondition, HopTable, ProductBasis};
use crate::eigen::Operator;
use crate::{Error, Result};

/// Largest Ising ring handled by the full σ^z basis.
pub const MAX_TFIM_SITES: u32 = 26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AhmParams {
    pub sites: u32,
    /// Down/up hopping ratio `t_↓ / t_↑`.
    pub t: f64,
    /// On-site repulsion in units of `t_↑`.
    pub u: f64,
    pub n_up: u32,
    pub n_dn: u32,
    pub bc: BoundaryCondition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfimParams {
    pub sites: u32,
    pub lambda: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams {
    Ahm(AhmParams),
    Tfim(TfimParams),
}

/// Which coupling is driven; each tag is `∂H/∂x` for its coupling `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DrivingTag {
    /// `∂H/∂t = -Σ_{j,δ} c†_{j↓} c_{j+δ,↓}`
    AhmDownHop,
    /// `∂H/∂λ = Σ_j σ^x_j`
    TfimXSum,
    /// `∂H/∂h = Σ_j σ^z_j`
    TfimZSum,
}

impl DrivingTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DrivingTag::AhmDownHop => "ahm_down_hop",
            DrivingTag::TfimXSum => "tfim_x_sum",
            DrivingTag::TfimZSum => "tfim_z_sum",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ahm_down_hop" => Ok(DrivingTag::AhmDownHop),
            "tfim_x_sum" => Ok(DrivingTag::TfimXSum),
            "tfim_z_sum" => Ok(DrivingTag::TfimZSum),
            other => Err(Error::domain(format!("unknown driving tag {other:?}"))),
        }
    }

    /// Name of the coupling this tag drives.
    pub fn coupling(self) -> &'static str {
        match self {
            DrivingTag::AhmDownHop => "t",
            DrivingTag::TfimXSum => "lambda",
            DrivingTag::TfimZSum => "h",
        }
    }
}

impl ModelParams {
    pub fn sites(&self) -> u32 {
        match self {
            ModelParams::Ahm(p) => p.sites,
            ModelParams::Tfim(p) => p.sites,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelParams::Ahm(_) => "ahm",
            ModelParams::Tfim(_) => "tfim",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Ahm(p) => {
                if p.sites < 3 || p.sites > crate::basis::MAX_SITES {
                    return Err(Error::domain(format!("AHM needs 3 <= L <= 63, got {}", p.sites)));
                }
                if p.n_up > p.sites || p.n_dn > p.sites {
                    return Err(Error::domain(format!(
                        "particle numbers ({}, {}) exceed L = {}",
                        p.n_up, p.n_dn, p.sites
                    )));
                }
                if !(p.t >= 0.0) || !p.t.is_finite() {
                    return Err(Error::domain(format!("hopping ratio t = {} must be >= 0", p.t)));
                }
                if !p.u.is_finite() {
                    return Err(Error::domain("U must be finite"));
                }
            }
            ModelParams::Tfim(p) => {
                if p.sites < 3 || p.sites > MAX_TFIM_SITES {
                    return Err(Error::domain(format!(
                        "TFIM needs 3 <= L <= {MAX_TFIM_SITES}, got {}",
                        p.sites
                    )));
                }
                if !(p.lambda >= 0.0) || !p.lambda.is_finite() {
                    return Err(Error::domain(format!("lambda = {} must be >= 0", p.lambda)));
                }
                if !p.h.is_finite() {
                    return Err(Error::domain("h must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn supports(&self, tag: DrivingTag) -> bool {
        matches!(
            (self, tag),
            (ModelParams::Ahm(_), DrivingTag::AhmDownHop)
                | (ModelParams::Tfim(_), DrivingTag::TfimXSum | DrivingTag::TfimZSum)
        )
    }

    /// Current value of the coupling driven by `tag`.
    pub fn driving_value(&self, tag: DrivingTag) -> Result<f64> {
        match (self, tag) {
            (ModelParams::Ahm(p), DrivingTag::AhmDownHop) => Ok(p.t),
            (ModelParams::Tfim(p), DrivingTag::TfimXSum) => Ok(p.lambda),
            (ModelParams::Tfim(p), DrivingTag::TfimZSum) => Ok(p.h),
            _ => Err(incompatible(self, tag)),
        }
    }

    /// Copy with the driven coupling set to `x`.
    pub fn with_driving(&self, tag: DrivingTag, x: f64) -> Result<ModelParams> {
        let mut out = *self;
        match (&mut out, tag) {
            (ModelParams::Ahm(p), DrivingTag::AhmDownHop) => p.t = x,
            (ModelParams::Tfim(p), DrivingTag::TfimXSum) => p.lambda = x,
            (ModelParams::Tfim(p), DrivingTag::TfimZSum) => p.h = x,
            _ => return Err(incompatible(self, tag)),
        }
        out.validate()?;
        Ok(out)
    }
}

fn incompatible(p: &ModelParams, tag: DrivingTag) -> Error {
    Error::domain(format!(
        "driving {} is not defined for the {} model",
        tag.as_str(),
        p.kind()
    ))
}

/// Normalized real amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction(Vec<f64>);

impl Wavefunction {
    /// Scale `v` to unit norm.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::domain("cannot normalize a zero or non-finite vector"));
        }
        v.iter_mut().for_each(|x| *x /= n);
        Ok(Wavefunction(v))
    }

    /// Wrap an already normalized vector (norm within `1e-12`).
    pub fn from_normalized(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("vector norm {n} is not 1")));
        }
        Ok(Wavefunction(v))
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // independent partial sums let the loop vectorize
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    acc.iter().sum::<f64>() + tail
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Coupling-independent structure of a model: bases and hop tables. Build
/// once per sector and reuse across a sweep of the driven coupling.
#[derive(Debug, Clone)]
pub enum System {
    Ahm(AhmSystem),
    Tfim(TfimSystem),
}

#[derive(Debug, Clone)]
pub struct AhmSystem {
    pub basis: ProductBasis,
    bc: BoundaryCondition,
    up_hops: HopTable,
    dn_hops: HopTable,
}

#[derive(Debug, Clone)]
pub struct TfimSystem {
    sites: u32,
}

impl System {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(match params {
            ModelParams::Ahm(p) => {
                let basis = ProductBasis::new(p.sites, p.n_up, p.n_dn)?;
                let up_hops = basis.up.hop_table(p.bc);
                let dn_hops = basis.dn.hop_table(p.bc);
                System::Ahm(AhmSystem { basis, bc: p.bc, up_hops, dn_hops })
            }
            ModelParams::Tfim(p) => System::Tfim(TfimSystem { sites: p.sites }),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            System::Ahm(s) => s.basis.dim(),
            System::Tfim(s) => 1usize << s.sites,
        }
    }

    fn matches(&self, params: &ModelParams) -> bool {
        match (self, params) {
            (System::Ahm(s), ModelParams::Ahm(p)) => {
                s.basis.up.sites() == p.sites
                    && s.basis.up.particles() == p.n_up
                    && s.basis.dn.particles() == p.n_dn
                    && s.bc == p.bc
            }
            (System::Tfim(s), ModelParams::Tfim(p)) => s.sites == p.sites,
            _ => false,
        }
    }

    /// Hamiltonian at the couplings in `params`, which must describe the
    /// same sector this system was built for.
    pub fn hamiltonian(&self, params: &ModelParams) -> Result<Hamiltonian<'_>> {
        params.validate()?;
        if !self.matches(params) {
            return Err(Error::domain("model parameters do not match the system's sector"));
        }
        Ok(Hamiltonian { system: self, params: *params })
    }

    pub fn driving(&self, tag: DrivingTag) -> Result<Driving<'_>> {
        match (self, tag) {
            (System::Ahm(_), DrivingTag::AhmDownHop)
            | (System::Tfim(_), DrivingTag::TfimXSum | DrivingTag::TfimZSum) => {
                Ok(Driving { system: self, tag })
            }
            _ => Err(Error::domain(format!(
                "driving {} is incompatible with this basis",
                tag.as_str()
            ))),
        }
    }

    /// `H_I · input` for the driving operator `tag`.
    pub fn apply_driving(&self, tag: DrivingTag, input: &[f64]) -> Result<Vec<f64>> {
        self.driving(tag)?.apply(input)
    }
}

/// `H(params)` bound to a system.
#[derive(Debug, Clone, Copy)]
pub struct Hamiltonian<'a> {
    system: &'a System,
    params: ModelParams,
}

impl Hamiltonian<'_> {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        checked_apply(self, input)
    }
}

fn checked_apply(op: &impl Operator, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: input.len() });
    }
    let mut out = vec![0.0; input.len()];
    op.apply_into(input, &mut out);
    Ok(out)
}

impl Operator for Hamiltonian<'_> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        match (self.system, &self.params) {
            (System::Ahm(s), ModelParams::Ahm(p)) => ahm_apply(s, p.t, p.u, x, y),
            (System::Tfim(s), ModelParams::Tfim(p)) => tfim_apply(s.sites, p.lambda, p.h, x, y),
            _ => unreachable!("hamiltonian built for a mismatched system"),
        }
    }
}

fn ahm_apply(s: &AhmSystem, t_dn: f64, u: f64, x: &[f64], y: &mut [f64]) {
    let dd = s.basis.dn.dim();
    let dn_words = s.basis.dn.words();
    for (iu, &wu) in s.basis.up.words().iter().enumerate() {
        let base = iu * dd;
        let xs = &x[base..base + dd];
        let row = &mut y[base..base + dd];
        for (id, out) in row.iter_mut().enumerate() {
            let docc = (wu & dn_words[id]).count_ones() as f64;
            let mut acc = u * docc * xs[id];
            let mut hop = 0.0;
            for (k, sign) in s.dn_hops.row(id) {
                hop += sign * xs[k];
            }
            acc -= t_dn * hop;
            *out = acc;
        }
        for (ku, sign) in s.up_hops.row(iu) {
            let src = &x[ku * dd..ku * dd + dd];
            let c = -sign;
            for (o, v) in row.iter_mut().zip(src) {
                *o += c * v;
            }
        }
    }
}

#[inline]
fn aligned_bonds(word: u64, sites: u32) -> i64 {
    let mask = (1u64 << sites) - 1;
    let rotated = ((word >> 1) | (word << (sites - 1))) & mask;
    sites as i64 - 2 * (word ^ rotated).count_ones() as i64
}

#[inline]
fn z_total(word: u64, sites: u32) -> i64 {
    2 * word.count_ones() as i64 - sites as i64
}

fn tfim_apply(sites: u32, lambda: f64, h: f64, x: &[f64], y: &mut [f64]) {
    for (w, out) in y.iter_mut().enumerate() {
        let word = w as u64;
        let diag = aligned_bonds(word, sites) as f64 + h * z_total(word, sites) as f64;
        let mut flips = 0.0;
        for j in 0..sites {
            flips += x[w ^ (1usize << j)];
        }
        *out = diag * x[w] + lambda * flips;
    }
}

/// Driving operator `H_I = ∂H/∂x` bound to a system.
#[derive(Debug, Clone, Copy)]
pub struct Driving<'a> {
    system: &'a System,
    tag: DrivingTag,
}

impl Driving<'_> {
    pub fn tag(&self) -> DrivingTag {
        self.tag
    }

    pub fn apply(&self, input: &[f64]) -> Result<Vec<f64>> {
        checked_apply(self, input)
    }
}

impl Operator for Driving<'_> {
    fn dim(&self) -> usize {
        self.system.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        match (self.system, self.tag) {
            (System::Ahm(s), DrivingTag::AhmDownHop) => {
                let dd = s.basis.dn.dim();
                for iu in 0..s.basis.up.dim() {
                    let base = iu * dd;
                    for id in 0..dd {
                        let mut hop = 0.0;
                        for (k, sign) in s.dn_hops.row(id) {
                            hop += sign * x[base + k];
                        }
                        y[base + id] = -hop;
                    }
                }
            }
            (System::Tfim(s), DrivingTag::TfimXSum) => {
                for (w, out) in y.iter_mut().enumerate() {
                    *out = (0..s.sites).map(|j| x[w ^ (1usize << j)]).sum();
                }
            }
            (System::Tfim(s), DrivingTag::TfimZSum) => {
                for (w, out) in y.iter_mut().enumerate() {
                    *out = z_total(w as u64, s.sites) as f64 * x[w];
                }
            }
            _ => unreachable!("driving built for a mismatched system"),
        }
    }
}
