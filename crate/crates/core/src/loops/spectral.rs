//! Trigonometric interpolation on the uniform grid `t_j = j/N` of `ℝ/ℤ`.
//!
//! Coefficients follow `ĉ_k = (1/N) Σ_j f_j e^{−2πi jk/N}`. For even `N` the
//! Nyquist mode is represented by the real cosine `ĉ_{N/2} cos(πN t)`, so the
//! interpolant of real data is real and odd derivatives drop that mode.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::TAU;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(data: &mut [Complex64], inverse: bool) {
    let n = data.len();
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    fft.process(data);
}

/// Signed wavenumber of coefficient index `k`.
pub fn wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

pub fn coefficients(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform(&mut buf, false);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

pub fn synthesize(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    transform(&mut buf, true);
    buf.iter().map(|c| c.re).collect()
}

/// `order`-th derivative of the interpolant, sampled on the grid.
pub fn derivative(values: &[f64], order: u32) -> Vec<f64> {
    let n = values.len();
    let mut c = coefficients(values);
    for (k, ck) in c.iter_mut().enumerate() {
        let kappa = wavenumber(k, n);
        if n % 2 == 0 && k == n / 2 && order % 2 == 1 {
            *ck = Complex64::new(0.0, 0.0);
            continue;
        }
        *ck *= Complex64::new(0.0, TAU * kappa as f64).powu(order);
    }
    synthesize(&c)
}

/// Samples of the interpolant at `t_j + theta`.
pub fn shift(values: &[f64], theta: f64) -> Vec<f64> {
    let n = values.len();
    let mut c = coefficients(values);
    for (k, ck) in c.iter_mut().enumerate() {
        if n % 2 == 0 && k == n / 2 {
            *ck *= (std::f64::consts::PI * n as f64 * theta).cos();
        } else {
            *ck *= Complex64::from_polar(1.0, TAU * wavenumber(k, n) as f64 * theta);
        }
    }
    synthesize(&c)
}

/// Value of the interpolant with coefficients `c` at an arbitrary `t`.
pub fn evaluate(c: &[Complex64], t: f64) -> f64 {
    let n = c.len();
    let mut acc = c[0].re;
    let half = n / 2;
    let upper = if n % 2 == 0 { half } else { half + 1 };
    for (k, ck) in c.iter().enumerate().take(upper).skip(1) {
        // conjugate pair k and n−k
        let e = Complex64::from_polar(1.0, TAU * k as f64 * t);
        acc += 2.0 * (ck * e).re;
    }
    if n % 2 == 0 {
        acc += c[half].re * (std::f64::consts::PI * n as f64 * t).cos();
    }
    acc
}

/// Antiderivative `∫_0^t` of the interpolant, at an arbitrary `t`.
pub fn integral(c: &[Complex64], t: f64) -> f64 {
    let n = c.len();
    let mut acc = c[0].re * t;
    let half = n / 2;
    let upper = if n % 2 == 0 { half } else { half + 1 };
    for (k, ck) in c.iter().enumerate().take(upper).skip(1) {
        let w = TAU * k as f64;
        let e = Complex64::from_polar(1.0, w * t) - 1.0;
        acc += 2.0 * (ck * e / Complex64::new(0.0, w)).re;
    }
    if n % 2 == 0 {
        let w = std::f64::consts::PI * n as f64;
        acc += c[half].re * (w * t).sin() / w;
    }
    acc
}

/// Interpolant resampled on a grid of `m` points (zero padding or
/// truncation of the spectrum).
pub fn resample(values: &[f64], m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| j as f64 / m as f64)
        .scan(coefficients(values), |c, t| Some(evaluate(c, t)))
        .collect()
}

/// Dense matrix of the `order`-th spectral derivative on `n` points.
pub fn differentiation_matrix(n: usize, order: u32) -> DMatrix<f64> {
    let mut unit = vec![0.0; n];
    unit[0] = 1.0;
    let col0 = derivative(&unit, order);
    // circulant: D[i][j] = col0[(i − j) mod n]
    DMatrix::from_fn(n, n, |i, j| col0[(i + n - j) % n])
}
