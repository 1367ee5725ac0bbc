//! Ground-state and dense eigensolvers, and the deflated linear solver used
//! by the linear-response fidelity susceptibility.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::models::{dot, norm, Wavefunction};
use crate::{Error, Result};

/// Real symmetric linear operator applied without storing a matrix.
pub trait Operator {
    fn dim(&self) -> usize;

    /// `y = A x`; both slices have length `dim()`.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
}

impl<T: Operator + ?Sized> Operator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply_into(x, y)
    }
}

/// Operator from a closure.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> Operator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Dense row-major symmetric matrix as an operator; used by tests and the
/// small-instance paths.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    n: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(DenseOperator { n, data })
    }

    /// Materialize any operator by applying it to unit vectors.
    pub fn assemble(op: &impl Operator) -> Self {
        let n = op.dim();
        let mut data = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            op.apply_into(&e, &mut col);
            e[c] = 0.0;
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
        DenseOperator { n, data }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }
}

impl Operator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = dot(&self.data[r * self.n..(r + 1) * self.n], x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Target for `‖Hψ − E₀ψ‖`.
    pub tol: f64,
    /// Cap on operator applications.
    pub max_iter: usize,
    pub seed: u64,
    /// Krylov basis size before a thick restart.
    pub max_basis: usize,
    /// Ritz vectors retained across a restart.
    pub keep: usize,
    /// Measure `E₁ − E₀` with a second, deflated Lanczos run. Single-vector
    /// Lanczos cannot see an exact degeneracy on its own.
    pub refine_gap: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            tol: 1e-10,
            max_iter: 5000,
            seed: 0x5eed,
            max_basis: 60,
            keep: 4,
            refine_gap: false,
        }
    }
}

impl LanczosOptions {
    /// Shrink the Krylov basis so `(max_basis + keep)` vectors of length
    /// `dim` fit in `bytes`.
    pub fn with_memory_budget(mut self, dim: usize, bytes: usize) -> Self {
        let per_vec = dim.max(1) * core::mem::size_of::<f64>();
        let fit = bytes / per_vec;
        self.max_basis = self.max_basis.min(fit.saturating_sub(self.keep)).max(self.keep + 4);
        self
    }
}

#[derive(Debug, Clone)]
pub struct EigResult {
    pub energy: f64,
    pub state: Wavefunction,
    /// True residual `‖Hψ − E₀ψ‖` of the returned pair.
    pub residual: f64,
    /// `θ₁ − θ₀` from the final Ritz values; an upper bound on the gap.
    pub gap_estimate: f64,
    /// Operator applications used.
    pub iterations: usize,
    pub seed: u64,
    pub near_degenerate: bool,
}

/// Relative gap below which a ground state counts as degenerate.
pub const DEGENERACY_RATIO: f64 = 1e-8;

fn random_start(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
}

/// Lowest eigenpair of a symmetric operator by thick-restart Lanczos with
/// full reorthogonalization, started from a seeded random vector.
pub fn ground_state(op: &impl Operator, opts: &LanczosOptions) -> Result<EigResult> {
    let start = random_start(op.dim(), opts.seed);
    finish(op, opts, lanczos(op, opts, start)?)
}

/// As [`ground_state`], but starting from `start` (e.g. the ground state at
/// a neighbouring coupling). A zero start falls back to the seeded vector.
pub fn ground_state_from(
    op: &impl Operator,
    opts: &LanczosOptions,
    start: &[f64],
) -> Result<EigResult> {
    if start.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: start.len() });
    }
    if norm(start) == 0.0 {
        return ground_state(op, opts);
    }
    finish(op, opts, lanczos(op, opts, start.to_vec())?)
}

fn finish(op: &impl Operator, opts: &LanczosOptions, mut res: EigResult) -> Result<EigResult> {
    if opts.refine_gap && op.dim() > 1 {
        let psi = res.state.amplitudes();
        // Hotelling shift lifts ψ₀ above E₁ so the next level becomes lowest
        let shift = 4.0 * res.energy.abs().max(1.0);
        let deflated = FnOperator::new(op.dim(), |x: &[f64], y: &mut [f64]| {
            op.apply_into(x, y);
            axpy(y, shift * dot(psi, x), psi);
        });
        let mut start = random_start(op.dim(), opts.seed ^ 0x9e37_79b9_7f4a_7c15);
        project_out(&mut start, psi);
        let loose = LanczosOptions { tol: opts.tol.max(1e-8), refine_gap: false, ..*opts };
        let second = lanczos(&deflated, &loose, start)?;
        res.gap_estimate = res.gap_estimate.min(second.energy - res.energy);
        res.iterations += second.iterations;
        res.near_degenerate = res.gap_estimate < DEGENERACY_RATIO * res.energy.abs();
    }
    if res.near_degenerate {
        log::warn!(
            "near-degenerate ground state: gap estimate {:e} at E0 = {}",
            res.gap_estimate,
            res.energy
        );
    }
    Ok(res)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

const BLOCK: usize = 2048;

/// One classical Gram–Schmidt pass `w ← w − Σ ⟨b_i, w⟩ b_i`, returning the
/// coefficients. Works in cache-sized chunks so `w` is streamed once per
/// sweep instead of once per basis vector.
fn block_project(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coef = vec![0.0; basis.len()];
    for start in (0..w.len()).step_by(BLOCK) {
        let end = (start + BLOCK).min(w.len());
        let wc = &w[start..end];
        for (c, b) in coef.iter_mut().zip(basis) {
            *c += dot(&b[start..end], wc);
        }
    }
    for start in (0..w.len()).step_by(BLOCK) {
        let end = (start + BLOCK).min(w.len());
        let wc = &mut w[start..end];
        for (c, b) in coef.iter().zip(basis) {
            axpy(wc, -c, &b[start..end]);
        }
    }
    coef
}

fn scale(v: &mut [f64], a: f64) {
    v.iter_mut().for_each(|x| *x *= a);
}

/// Ascending eigenpairs of the leading `k×k` block of a row-major matrix.
fn small_eigen(t: &[f64], stride: usize, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let m = DMatrix::from_fn(k, k, |i, j| 0.5 * (t[i * stride + j] + t[j * stride + i]));
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn lanczos(op: &impl Operator, opts: &LanczosOptions, mut start: Vec<f64>) -> Result<EigResult> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::domain("operator dimension must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let m = opts.max_basis.max(2).min(n);
    let keep = opts.keep.max(1).min(m.saturating_sub(1)).max(1);
    let s = norm(&start);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain("start vector must be nonzero and finite"));
    }
    scale(&mut start, 1.0 / s);

    // projected matrix, row-major m×m
    let mut t = vec![0.0; m * m];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    basis.push(start);
    let mut w = vec![0.0; n];
    let mut matvecs = 0usize;
    let mut best = f64::INFINITY;
    // index of the first basis vector whose H-product is still pending
    let mut j = 0usize;

    loop {
        let mut beta;
        loop {
            op.apply_into(&basis[j], &mut w);
            matvecs += 1;
            // three-term (or arrowhead, after a restart) recurrence first
            for i in 0..j {
                let c = t[i * m + j];
                if c != 0.0 {
                    axpy(&mut w, -c, &basis[i]);
                }
            }
            let alpha = dot(&basis[j], &w);
            axpy(&mut w, -alpha, &basis[j]);
            t[j * m + j] = alpha;
            // full reorthogonalization, repeated once if it cancels heavily
            let mut before = norm(&w);
            for _ in 0..2 {
                let coef = block_project(&basis, &mut w);
                for (i, c) in coef.iter().enumerate() {
                    t[i * m + j] += c;
                    if i != j {
                        t[j * m + i] += c;
                    }
                }
                let after = norm(&w);
                if after > core::f64::consts::FRAC_1_SQRT_2 * before {
                    break;
                }
                before = after;
            }
            beta = norm(&w);
            let scale_t = t[j * m + j].abs().max(1.0);
            let breakdown = beta <= 1e-14 * scale_t;
            if basis.len() == m || breakdown {
                if breakdown {
                    beta = 0.0;
                }
                break;
            }
            let mut v = w.clone();
            scale(&mut v, 1.0 / beta);
            basis.push(v);
            j += 1;
            t[j * m + (j - 1)] = beta;
            t[(j - 1) * m + j] = beta;
            if matvecs >= opts.max_iter {
                break;
            }
        }

        let k = basis.len();
        let (vals, vecs) = small_eigen(&t, m, k);
        let estimate = beta * vecs[(k - 1, 0)].abs();

        if estimate <= 0.5 * opts.tol || beta == 0.0 || matvecs >= opts.max_iter || k < m {
            let mut psi = vec![0.0; n];
            for (l, b) in basis.iter().enumerate() {
                axpy(&mut psi, vecs[(l, 0)], b);
            }
            let state = Wavefunction::normalized(psi)?;
            let mut hpsi = vec![0.0; n];
            op.apply_into(state.amplitudes(), &mut hpsi);
            matvecs += 1;
            let energy = dot(state.amplitudes(), &hpsi);
            axpy(&mut hpsi, -energy, state.amplitudes());
            let residual = norm(&hpsi);
            best = best.min(residual);
            if residual <= opts.tol {
                let gap_estimate = if k > 1 { vals[1] - vals[0] } else { f64::INFINITY };
                let near_degenerate = gap_estimate < DEGENERACY_RATIO * energy.abs();
                return Ok(EigResult {
                    energy,
                    state,
                    residual,
                    gap_estimate,
                    iterations: matvecs,
                    seed: opts.seed,
                    near_degenerate,
                });
            }
            if matvecs >= opts.max_iter {
                return Err(Error::NoConvergence { iterations: matvecs, residual: best });
            }
            if beta == 0.0 || k < m {
                // invariant subspace that still misses the target accuracy:
                // restart from the current Ritz vector
                basis.clear();
                basis.push(state.into_inner());
                t.iter_mut().for_each(|x| *x = 0.0);
                j = 0;
                continue;
            }
        }
        best = best.min(estimate);

        // thick restart: keep the lowest Ritz vectors plus the residual direction
        let kept = keep.min(k - 1);
        let mut fresh: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        for c in 0..kept {
            let mut u = vec![0.0; n];
            for (l, b) in basis.iter().enumerate() {
                axpy(&mut u, vecs[(l, c)], b);
            }
            fresh.push(u);
        }
        drop(basis);
        t.iter_mut().for_each(|x| *x = 0.0);
        for c in 0..kept {
            t[c * m + c] = vals[c];
            let coupling = beta * vecs[(k - 1, c)];
            t[c * m + kept] = coupling;
            t[kept * m + c] = coupling;
        }
        let mut v = w.clone();
        scale(&mut v, 1.0 / beta);
        fresh.push(v);
        basis = fresh;
        j = kept;
    }
}

/// Default refusal threshold for [`dense_spectrum`].
pub const DEFAULT_DENSE_MAX: usize = 4096;

/// Full spectrum with eigenvectors, energies ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    /// `vectors[n]` is the normalized eigenvector of `energies[n]`.
    pub vectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn ground(&self) -> (f64, &[f64]) {
        (self.energies[0], &self.vectors[0])
    }
}

/// Full diagonalization of an assembled operator.
pub fn dense_spectrum(op: &impl Operator, max_dim: usize) -> Result<Spectrum> {
    let n = op.dim();
    if n > max_dim {
        return Err(Error::TooLarge { dim: n, max: max_dim });
    }
    if n == 0 {
        return Err(Error::domain("operator dimension must be at least 1"));
    }
    let dense = DenseOperator::assemble(op);
    let m = DMatrix::from_fn(n, n, |r, c| 0.5 * (dense.get(r, c) + dense.get(c, r)));
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    Ok(Spectrum { energies, vectors })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target `‖r‖ / ‖Q·rhs‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖(H − E₀)x − Q·rhs‖ / ‖Q·rhs‖`, recomputed from scratch.
    pub relative_residual: f64,
}

fn project_out(v: &mut [f64], psi: &[f64]) {
    let c = dot(psi, v);
    axpy(v, -c, psi);
}

/// Solve `(H − E₀) x = Q·rhs` on the complement of `psi0`, with
/// `Q = 1 − |ψ₀⟩⟨ψ₀|`, by conjugate gradients on `Q(H − E₀)Q`.
pub fn deflated_solve(
    op: &impl Operator,
    e0: f64,
    psi0: &[f64],
    rhs: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let n = op.dim();
    for len in [psi0.len(), rhs.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    let mut b = rhs.to_vec();
    project_out(&mut b, psi0);
    let bnorm = norm(&b);
    // rhs parallel to psi0 up to rounding: the solution is zero
    if bnorm <= 64.0 * f64::EPSILON * norm(rhs) {
        return Ok(SolveResult { x: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }

    let shifted = |x: &[f64], y: &mut [f64]| {
        op.apply_into(x, y);
        axpy(y, -e0, x);
        project_out(y, psi0);
    };

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut best = 1.0f64;
    let mut since_best = 0usize;
    let mut iterations = 0usize;

    loop {
        if iterations >= opts.max_iter {
            return Err(Error::Stagnation { residual: rr.sqrt() / bnorm });
        }
        shifted(&p, &mut ap);
        iterations += 1;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Stagnation { residual: rr.sqrt() / bnorm });
        }
        let a = rr / pap;
        axpy(&mut x, a, &p);
        axpy(&mut r, -a, &ap);
        project_out(&mut r, psi0);
        let rr_new = dot(&r, &r);
        let rel = rr_new.sqrt() / bnorm;
        if rel < 0.5 * best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 2000 {
                return Err(Error::Stagnation { residual: best });
            }
        }
        if rel <= opts.tol {
            project_out(&mut x, psi0);
            // recompute the true residual; refresh and continue if drift spoiled it
            let mut check = vec![0.0; n];
            op.apply_into(&x, &mut check);
            axpy(&mut check, -e0, &x);
            let mut proj = check.clone();
            axpy(&mut proj, -1.0, &b);
            project_out(&mut proj, psi0);
            let projected = norm(&proj) / bnorm;
            if projected <= opts.tol {
                axpy(&mut check, -1.0, &b);
                let relative_residual = norm(&check) / bnorm;
                return Ok(SolveResult { x, iterations, relative_residual });
            }
            r = b.clone();
            let mut ax = vec![0.0; n];
            shifted(&x, &mut ax);
            axpy(&mut r, -1.0, &ax);
            project_out(&mut r, psi0);
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> DenseOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..=r {
                let v = rng.random::<f64>() - 0.5;
                data[r * n + c] = v;
                data[c * n + r] = v;
            }
        }
        DenseOperator::from_row_major(n, data).unwrap()
    }

    fn residual_of(op: &impl Operator, e: f64, v: &[f64]) -> f64 {
        let mut hv = vec![0.0; v.len()];
        op.apply_into(v, &mut hv);
        axpy(&mut hv, -e, v);
        norm(&hv)
    }

    #[test]
    fn lanczos_matches_dense_on_random_matrices() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (150, 4), (400, 5)] {
            let a = random_symmetric(n, seed);
            let spec = dense_spectrum(&a, DEFAULT_DENSE_MAX).unwrap();
            let opts = LanczosOptions { tol: 1e-11, max_basis: 30, ..Default::default() };
            let g = ground_state(&a, &opts).unwrap();
            assert!((g.energy - spec.energies[0]).abs() < 1e-10, "n={n}");
            assert!((norm(g.state.amplitudes()) - 1.0).abs() < 1e-12);
            assert!(g.residual <= 1e-11);
            assert!(residual_of(&a, g.energy, g.state.amplitudes()) <= 1e-11);
        }
    }

    #[test]
    fn lanczos_is_deterministic() {
        let a = random_symmetric(200, 9);
        let opts = LanczosOptions { max_basis: 20, ..Default::default() };
        let g1 = ground_state(&a, &opts).unwrap();
        let g2 = ground_state(&a, &opts).unwrap();
        assert_eq!(g1.energy.to_bits(), g2.energy.to_bits());
        assert_eq!(g1.state, g2.state);
        assert_eq!(g1.seed, opts.seed);
    }

    #[test]
    fn lanczos_reports_non_convergence() {
        let a = random_symmetric(300, 10);
        let opts = LanczosOptions { max_iter: 15, max_basis: 10, ..Default::default() };
        match ground_state(&a, &opts) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert!(iterations >= 15);
                assert!(residual > 0.0);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_ground_state_is_flagged() {
        let n = 30;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = if i < 2 { -3.0 } else { i as f64 };
        }
        let a = DenseOperator::from_row_major(n, data).unwrap();
        let opts = LanczosOptions { max_basis: 12, keep: 3, refine_gap: true, ..Default::default() };
        let g = ground_state(&a, &opts).unwrap();
        assert!((g.energy + 3.0).abs() < 1e-10);
        assert!(g.near_degenerate, "gap {}", g.gap_estimate);

        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = i as f64 - 3.0;
        }
        let b = DenseOperator::from_row_major(n, data).unwrap();
        let g = ground_state(&b, &opts).unwrap();
        assert!(!g.near_degenerate);
        assert!((g.gap_estimate - 1.0).abs() < 1e-7, "{}", g.gap_estimate);
    }

    #[test]
    fn warm_start_converges_fast() {
        let a = random_symmetric(300, 12);
        let opts = LanczosOptions::default();
        let g = ground_state(&a, &opts).unwrap();
        let again = ground_state_from(&a, &opts, g.state.amplitudes()).unwrap();
        assert!(again.iterations <= 3);
        assert!(ground_state_from(&a, &opts, &[1.0]).is_err());
    }

    #[test]
    fn variational_bound() {
        let a = random_symmetric(120, 13);
        let g = ground_state(&a, &LanczosOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let v: Vec<f64> = (0..120).map(|_| rng.random::<f64>() - 0.5).collect();
            let v = Wavefunction::normalized(v).unwrap();
            let mut hv = vec![0.0; 120];
            a.apply_into(v.amplitudes(), &mut hv);
            assert!(dot(v.amplitudes(), &hv) >= g.energy - 1e-10);
        }
    }

    #[test]
    fn dense_spectrum_properties() {
        let a = random_symmetric(60, 15);
        let s = dense_spectrum(&a, DEFAULT_DENSE_MAX).unwrap();
        let trace: f64 = (0..60).map(|i| a.get(i, i)).sum();
        assert!((s.energies.iter().sum::<f64>() - trace).abs() < 1e-10);
        assert!(s.energies.windows(2).all(|w| w[0] <= w[1]));
        for i in 0..60 {
            for j in 0..60 {
                let g = dot(&s.vectors[i], &s.vectors[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-10);
            }
        }
        assert!(matches!(dense_spectrum(&a, 59), Err(Error::TooLarge { dim: 60, max: 59 })));
    }

    #[test]
    fn deflated_solve_contract() {
        let a = random_symmetric(500, 16);
        let s = dense_spectrum(&a, DEFAULT_DENSE_MAX).unwrap();
        let (e0, psi) = s.ground();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rhs: Vec<f64> = (0..500).map(|_| rng.random::<f64>() - 0.5).collect();
        let opts = SolveOptions { tol: 1e-10, max_iter: 20_000 };
        let sol = deflated_solve(&a, e0, psi, &rhs, &opts).unwrap();
        assert!(sol.relative_residual <= 1e-10 * 1.01, "{}", sol.relative_residual);
        assert!(dot(psi, &sol.x).abs() < 1e-10);

        let double: Vec<f64> = rhs.iter().map(|x| 2.0 * x).collect();
        let sol2 = deflated_solve(&a, e0, psi, &double, &opts).unwrap();
        let diff: f64 = sol.x.iter().zip(&sol2.x).map(|(a, b)| (2.0 * a - b).powi(2)).sum();
        assert!(diff.sqrt() <= 1e-8 * norm(&sol2.x));
    }

    #[test]
    fn deflated_solve_against_spectral_expansion() {
        let a = random_symmetric(80, 18);
        let s = dense_spectrum(&a, DEFAULT_DENSE_MAX).unwrap();
        let (e0, psi) = s.ground();
        let rhs: Vec<f64> = (0..80).map(|i| (i as f64 * 0.37).sin()).collect();
        let sol = deflated_solve(&a, e0, psi, &rhs, &SolveOptions::default()).unwrap();
        let mut expect = vec![0.0; 80];
        for n in 1..80 {
            let c = dot(&s.vectors[n], &rhs) / (s.energies[n] - e0);
            axpy(&mut expect, c, &s.vectors[n]);
        }
        let err: f64 = sol.x.iter().zip(&expect).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err.sqrt() < 1e-8 * norm(&expect));
    }

    #[test]
    fn deflated_solve_refuses_degenerate_kernel() {
        // doubly degenerate ground level: deflating one vector leaves a kernel
        let n = 20;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = if i < 2 { 0.0 } else { 1.0 + i as f64 };
        }
        let a = DenseOperator::from_row_major(n, data).unwrap();
        let mut psi = vec![0.0; n];
        psi[0] = 1.0;
        let mut rhs = vec![1.0; n];
        rhs[0] = 0.0;
        let r = deflated_solve(&a, 0.0, &psi, &rhs, &SolveOptions { tol: 1e-12, max_iter: 500 });
        assert!(matches!(r, Err(Error::Stagnation { .. })), "{r:?}");
    }
}
