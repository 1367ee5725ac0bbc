//! Small least-squares and 1-D minimization helpers shared by the fits.

use alloc::vec::Vec;
use alloc::format;

use nalgebra::{DMatrix, DVector};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::{Error, Result};

/// Ordinary least squares result.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqFit {
    pub coef: Vec<f64>,
    /// Standard errors from `σ² (AᵀA)⁻¹` with `σ² = rss / (n - p)`; zero
    /// when there are no spare degrees of freedom.
    pub se: Vec<f64>,
    /// Residual sum of squares.
    pub rss: f64,
    pub n: usize,
}

impl LstsqFit {
    pub fn rms(&self) -> f64 {
        (self.rss / self.n as f64).sqrt()
    }
}

/// Minimize `‖A c − y‖²` for design rows `rows`.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<LstsqFit> {
    let n = rows.len();
    if n == 0 || n != y.len() {
        return Err(Error::domain("least squares needs matching, non-empty rows and targets"));
    }
    let p = rows[0].len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Error::domain("ragged design matrix"));
    }
    if n < p {
        return Err(Error::domain(format!("{n} points cannot determine {p} parameters")));
    }
    let a = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let inv = ata
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::domain("singular design matrix"))?;
    // solve through SVD for accuracy, use the inverse only for the errors
    let svd = a.clone().svd(true, true);
    let coef = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::domain(format!("least squares failed: {e}")))?;
    let resid = &a * &coef - &b;
    let rss = resid.dot(&resid);
    let sigma2 = if n > p { rss / (n - p) as f64 } else { 0.0 };
    let se = (0..p).map(|j| (sigma2 * inv[(j, j)]).max(0.0).sqrt()).collect();
    Ok(LstsqFit { coef: coef.iter().copied().collect(), se, rss, n })
}

/// Straight-line fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
    pub rss: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&xi| alloc::vec![1.0, xi]).collect();
    let fit = least_squares(&rows, y)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let r_squared = if tss > 0.0 { 1.0 - fit.rss / tss } else { 1.0 };
    Ok(LineFit {
        slope: fit.coef[1],
        intercept: fit.coef[0],
        slope_se: fit.se[1],
        intercept_se: fit.se[0],
        r_squared,
        rss: fit.rss,
    })
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Vertex of the parabola through three points with distinct abscissae.
/// Returns `(x_vertex, y_vertex, second_derivative)`.
pub fn parabola_vertex(p: [(f64, f64); 3]) -> Option<(f64, f64, f64)> {
    let [(x0, y0), (x1, y1), (x2, y2)] = p;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a.abs() > 0.0) || !a.is_finite() {
        return None;
    }
    let b = d01 - a * (x0 + x1);
    let c = y0 - a * x0 * x0 - b * x0;
    let xv = -b / (2.0 * a);
    Some((xv, c + b * xv + a * xv * xv, 2.0 * a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 - 0.5 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-13);
        assert!((f.intercept - 2.5).abs() < 1e-13);
        assert!((f.r_squared - 1.0).abs() < 1e-13);
        assert!(f.slope_se < 1e-12);
    }

    #[test]
    fn least_squares_errors() {
        assert!(least_squares(&[vec![1.0, 2.0]], &[1.0]).is_err());
        assert!(least_squares(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn golden_and_parabola() {
        let (x, fx) = golden_min(|x| (x - 0.3) * (x - 0.3) + 1.0, -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 1.0).abs() < 1e-14);
        let f = |x: f64| -3.0 * (x - 0.7) * (x - 0.7) + 2.0;
        let (xv, yv, curv) = parabola_vertex([(0.1, f(0.1)), (0.5, f(0.5)), (1.3, f(1.3))]).unwrap();
        assert!((xv - 0.7).abs() < 1e-12);
        assert!((yv - 2.0).abs() < 1e-12);
        assert!((curv + 6.0).abs() < 1e-10);
        assert!(parabola_vertex([(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]).is_none());
    }
}
