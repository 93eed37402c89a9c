//! Periodic tridiagonal systems
//! `a_i x_{i−1} + b_i x_i + c_i x_{i+1} = d_i` (indices mod `n`), solved by
//! the Thomas algorithm with a Sherman–Morrison correction for the corners.

use crate::error::{Error, Result};
use num_complex::Complex64;

fn thomas(a: &[Complex64], b: &[Complex64], c: &[Complex64], d: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = b.len();
    let mut cp = vec![Complex64::default(); n];
    let mut dp = vec![Complex64::default(); n];
    let mut piv = b[0];
    let mut smallest = piv.norm();
    cp[0] = c[0] / piv;
    dp[0] = d[0] / piv;
    for i in 1..n {
        piv = b[i] - a[i] * cp[i - 1];
        smallest = smallest.min(piv.norm());
        if piv.norm() == 0.0 {
            return Err(Error::LinearSolve { condition: f64::INFINITY });
        }
        cp[i] = c[i] / piv;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv;
    }
    let scale = b.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if smallest < 1e-14 * scale {
        return Err(Error::LinearSolve { condition: scale / smallest });
    }
    let mut x = vec![Complex64::default(); n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves the cyclic system; `a[0]` couples row 0 to `x_{n−1}` and `c[n−1]`
/// couples row `n−1` to `x_0`.
pub fn solve_cyclic(a: &[Complex64], b: &[Complex64], c: &[Complex64], d: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = b.len();
    assert!(n >= 3 && a.len() == n && c.len() == n && d.len() == n);
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;
    let mut aa = a.to_vec();
    aa[0] = Complex64::default();
    let mut cc = c.to_vec();
    cc[n - 1] = Complex64::default();
    let x = thomas(&aa, &bb, &cc, d)?;
    let mut u = vec![Complex64::default(); n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(&aa, &bb, &cc, &u)?;
    let denom = Complex64::new(1.0, 0.0) + z[0] + beta * z[n - 1] / gamma;
    if denom.norm() < 1e-14 {
        return Err(Error::LinearSolve { condition: 1.0 / denom.norm() });
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(x, z)| x - fact * z).collect())
}

/// Applies the cyclic tridiagonal matrix to `x`.
pub fn apply_cyclic(a: &[Complex64], b: &[Complex64], c: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
    let n = b.len();
    (0..n)
        .map(|i| a[i] * x[(i + n - 1) % n] + b[i] * x[i] + c[i] * x[(i + 1) % n])
        .collect()
}
