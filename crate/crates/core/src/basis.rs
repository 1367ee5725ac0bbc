//! Fixed-particle-number occupation bases and fermionic hopping.
//!
//! A spin species on `L` sites is stored as an `L`-bit word, bit `j` = site
//! `j`. Fermionic signs follow the Jordan–Wigner ordering of sites
//! `0..L`, so `c†_to c_from` picks up `(-1)^k` where `k` counts occupied
//! sites strictly between the two.

use alloc::vec::Vec;
use alloc::format;

use crate::{Error, Result};

/// Largest supported number of sites per species (one `u64` word).
pub const MAX_SITES: u32 = 63;

/// Sector enumeration refuses anything larger than this many words.
pub const MAX_SECTOR_DIM: u64 = 1 << 28;

/// Ring boundary condition for one fermion species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    Periodic,
    Antiperiodic,
}

impl BoundaryCondition {
    /// Phase carried by a hop across the `L-1 <-> 0` bond.
    pub fn phase(self) -> f64 {
        match self {
            BoundaryCondition::Periodic => 1.0,
            BoundaryCondition::Antiperiodic => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::Antiperiodic => "antiperiodic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(BoundaryCondition::Periodic),
            "antiperiodic" => Ok(BoundaryCondition::Antiperiodic),
            other => Err(Error::domain(format!("unknown boundary condition {other:?}"))),
        }
    }
}

/// Boundary condition that keeps the ground state of a closed-shell ring
/// non-degenerate: periodic for `4l+2` electrons, antiperiodic for `4l`.
pub fn select_bc(n_total: u32) -> Result<BoundaryCondition> {
    match n_total % 4 {
        2 => Ok(BoundaryCondition::Periodic),
        0 => Ok(BoundaryCondition::Antiperiodic),
        _ => Err(Error::domain(format!(
            "no boundary rule for an odd electron count ({n_total})"
        ))),
    }
}

/// Pascal's triangle up to 64, exact in `u64`.
fn binomial_table() -> [[u64; 65]; 65] {
    let mut c = [[0u64; 65]; 65];
    for n in 0..65 {
        c[n][0] = 1;
        for k in 1..=n {
            c[n][k] = c[n - 1][k - 1] + if k < n { c[n - 1][k] } else { 0 };
        }
    }
    c
}

pub fn binomial(n: u32, k: u32) -> u64 {
    if k > n || n > 64 {
        return 0;
    }
    // small enough to recompute; hot paths use the cached table in the basis
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (n as u128 - i) / (i + 1);
    }
    acc as u64
}

/// All `L`-bit words with exactly `n` set bits, in ascending numeric order.
#[derive(Debug, Clone)]
pub struct SpinSectorBasis {
    sites: u32,
    particles: u32,
    words: Vec<u64>,
    // binom[p][k] = C(p, k), used by the combinadic rank
    binom: Vec<[u64; 65]>,
}

impl SpinSectorBasis {
    pub fn new(sites: u32, particles: u32) -> Result<Self> {
        enumerate_sector(sites, particles)
    }

    pub fn sites(&self) -> u32 {
        self.sites
    }

    pub fn particles(&self) -> u32 {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Combinadic rank: the position of `word` in the ascending word list.
    pub fn rank(&self, word: u64) -> Result<usize> {
        if word.count_ones() != self.particles || (self.sites < 64 && word >> self.sites != 0) {
            return Err(Error::domain(format!(
                "word {word:#b} is not in the ({}, {}) sector",
                self.sites, self.particles
            )));
        }
        Ok(self.rank_unchecked(word))
    }

    #[inline]
    pub(crate) fn rank_unchecked(&self, mut word: u64) -> usize {
        let mut r = 0u64;
        let mut k = 1;
        while word != 0 {
            let p = word.trailing_zeros() as usize;
            r += self.binom[p][k];
            word &= word - 1;
            k += 1;
        }
        r as usize
    }

    pub fn unrank(&self, index: usize) -> Result<u64> {
        self.words.get(index).copied().ok_or_else(|| {
            Error::domain(format!("index {index} out of range for dimension {}", self.dim()))
        })
    }

    /// Sparse rows of the ring kinetic operator `K = Σ_<ij> c†_i c_j`
    /// (both directions of every nearest-neighbour bond) in this sector.
    pub fn hop_table(&self, bc: BoundaryCondition) -> HopTable {
        let l = self.sites;
        let mut offsets = Vec::with_capacity(self.dim() + 1);
        let mut targets = Vec::new();
        let mut signs = Vec::new();
        offsets.push(0);
        for &w in &self.words {
            for j in 0..l {
                let a = j;
                let b = (j + 1) % l;
                for (from, to) in [(a, b), (b, a)] {
                    if let Ok(Some((nw, s))) = apply_hop(w, from, to, l, bc) {
                        targets.push(self.rank_unchecked(nw) as u32);
                        signs.push(s);
                    }
                }
            }
            offsets.push(targets.len());
        }
        HopTable { offsets, targets, signs }
    }
}

/// Enumerate the `(L, n)` sector by Gosper's next-permutation walk.
pub fn enumerate_sector(sites: u32, particles: u32) -> Result<SpinSectorBasis> {
    if sites > MAX_SITES {
        return Err(Error::domain(format!("L = {sites} exceeds {MAX_SITES} sites")));
    }
    if particles > sites {
        return Err(Error::domain(format!("n = {particles} exceeds L = {sites}")));
    }
    let dim = binomial(sites, particles);
    if dim > MAX_SECTOR_DIM {
        return Err(Error::domain(format!("sector dimension {dim} is too large")));
    }
    let mut words = Vec::with_capacity(dim as usize);
    if particles == 0 {
        words.push(0);
    } else {
        let mut w: u64 = (1u64 << particles) - 1;
        let limit = 1u64 << sites;
        while w < limit {
            words.push(w);
            let c = w & w.wrapping_neg();
            let r = w + c;
            w = (((r ^ w) >> 2) / c) | r;
        }
    }
    debug_assert_eq!(words.len() as u64, dim);
    let table = binomial_table();
    Ok(SpinSectorBasis {
        sites,
        particles,
        words,
        binom: table.to_vec(),
    })
}

/// `c†_to c_from` on a word without any boundary phase. The sign counts the
/// occupied sites strictly between `from` and `to`. Returns `None` when the
/// source is empty or the target already occupied.
pub fn jw_transfer(word: u64, from: u32, to: u32) -> Option<(u64, f64)> {
    let src = 1u64 << from;
    let dst = 1u64 << to;
    if word & src == 0 || word & dst != 0 {
        return None;
    }
    let (lo, hi) = if from < to { (from, to) } else { (to, from) };
    let between = if hi - lo > 1 {
        ((1u64 << hi) - 1) & !((1u64 << (lo + 1)) - 1)
    } else {
        0
    };
    let sign = if (word & between).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some(((word & !src) | dst, sign))
}

/// Nearest-neighbour hop `c†_to c_from` on an `L`-site ring.
///
/// `Ok(None)` means the hop is blocked by occupancy. Hops across the
/// `L-1 <-> 0` bond carry the string over sites `1..L-1` plus the boundary
/// phase.
pub fn apply_hop(
    word: u64,
    from: u32,
    to: u32,
    sites: u32,
    bc: BoundaryCondition,
) -> Result<Option<(u64, f64)>> {
    if from >= sites || to >= sites || from == to {
        return Err(Error::domain(format!(
            "invalid hop {from} -> {to} on {sites} sites"
        )));
    }
    let d = from.abs_diff(to);
    if d == 1 {
        Ok(jw_transfer(word, from, to))
    } else if d == sites - 1 {
        Ok(jw_transfer(word, from, to).map(|(w, s)| (w, s * bc.phase())))
    } else {
        Err(Error::domain(format!(
            "sites {from} and {to} are not neighbours on a {sites}-site ring"
        )))
    }
}

/// CSR storage of a kinetic operator restricted to one sector.
#[derive(Debug, Clone)]
pub struct HopTable {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    signs: Vec<f64>,
}

impl HopTable {
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()]
            .iter()
            .zip(&self.signs[r])
            .map(|(&t, &s)| (t as usize, s))
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Two independent spin species; composite index `i_up * dim(dn) + i_dn`.
#[derive(Debug, Clone)]
pub struct ProductBasis {
    pub up: SpinSectorBasis,
    pub dn: SpinSectorBasis,
}

impl ProductBasis {
    pub fn new(sites: u32, n_up: u32, n_dn: u32) -> Result<Self> {
        Ok(ProductBasis {
            up: enumerate_sector(sites, n_up)?,
            dn: enumerate_sector(sites, n_dn)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.up.dim() * self.dn.dim()
    }

    #[inline]
    pub fn index(&self, i_up: usize, i_dn: usize) -> usize {
        i_up * self.dn.dim() + i_dn
    }

    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.dn.dim(), index % self.dn.dim())
    }
}
