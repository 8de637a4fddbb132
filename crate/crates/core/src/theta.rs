//! Shifted Jacobi theta function on the hexagonal modulus and helpers.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

/// Default truncation: `n` runs over `[-THETA_TERMS, THETA_TERMS - 1]`.
pub const THETA_TERMS: i32 = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThetaError {
    #[error("nodes {i} and {j} coincide within 1e-9")]
    DuplicateNodes { i: usize, j: usize },
}

/// `ω = e^{2πi/3}`.
pub fn omega() -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI / 3.0)
}

/// `θ(z|τ) = -Σ_n q^{(n+1/2)^2} e^{2πi(n+1/2)(z+1/2)}`, `q = e^{iπτ}`.
pub fn theta(z: Complex64, tau: Complex64) -> Complex64 {
    theta_truncated(z, tau, THETA_TERMS)
}

pub fn theta_truncated(z: Complex64, tau: Complex64, terms: i32) -> Complex64 {
    let i = Complex64::i();
    let mut acc = Complex64::new(0.0, 0.0);
    for n in -terms..terms {
        let h = n as f64 + 0.5;
        acc += (i * PI * tau * h * h + 2.0 * PI * i * h * (z + 0.5)).exp();
    }
    -acc
}

pub fn theta_omega(z: Complex64) -> Complex64 {
    theta(z, omega())
}

/// Overall sign of the `|θ|^2` expansion below, fixed by [`resolve_norm_sq_sign`].
pub const NORM_SQ_SIGN: f64 = -1.0;

/// Fourier-type expansion of `|θ(z|ω)|^2`:
/// `sign · Σ_m θ(2i Im z + ωm − 1/2 | 2i Im ω) q^{m^2} e^{2πim(z+1/2)}`.
pub fn theta_norm_sq_expansion_signed(z: Complex64, sign: f64) -> Complex64 {
    let w = omega();
    let i = Complex64::i();
    let tau2 = Complex64::new(0.0, 2.0 * w.im);
    let terms = 2 * THETA_TERMS;
    let mut acc = Complex64::new(0.0, 0.0);
    for m in -terms..=terms {
        let mf = m as f64;
        let arg = Complex64::new(-0.5, 2.0 * z.im) + w * mf;
        let outer = i * PI * w * mf * mf + 2.0 * PI * i * mf * (z + 0.5);
        // inner theta expanded in place so large and small factors share one exponent
        for n in -terms..terms {
            let h = n as f64 + 0.5;
            acc -= (i * PI * tau2 * h * h + 2.0 * PI * i * h * (arg + 0.5) + outer).exp();
        }
    }
    acc * sign
}

pub fn theta_norm_sq_expansion(z: Complex64) -> Complex64 {
    theta_norm_sq_expansion_signed(z, NORM_SQ_SIGN)
}

/// Decide the expansion sign by comparing both choices against `|θ|^2` at sample points.
///
/// Returns `(sign, worst error for that sign, worst error for the other sign)`.
pub fn resolve_norm_sq_sign(points: &[Complex64]) -> (f64, f64, f64) {
    let err = |s: f64| {
        points
            .iter()
            .map(|&z| (theta_norm_sq_expansion_signed(z, s) - theta_omega(z).norm_sqr()).norm())
            .fold(0.0, f64::max)
    };
    let (plus, minus) = (err(1.0), err(-1.0));
    if minus <= plus {
        (-1.0, minus, plus)
    } else {
        (1.0, plus, minus)
    }
}

/// Numerical rank of `[e^{2πi m (α_n − d)}]` for `m = 1..N`, rows equilibrated.
pub fn vandermonde_rank(alphas: &[f64], d: Complex64) -> Result<usize, ThetaError> {
    let n = alphas.len();
    for a in 0..n {
        for b in a + 1..n {
            if (alphas[a] - alphas[b]).abs() < 1e-9 {
                return Err(ThetaError::DuplicateNodes { i: a, j: b });
            }
        }
    }
    let i = Complex64::i();
    let mut mat = DMatrix::from_fn(n, n, |r, c| {
        let m = (r + 1) as f64;
        (2.0 * PI * i * m * (alphas[c] - d)).exp()
    });
    // row m carries the common factor e^{-2πi m d}; equilibrate so Im d does not swamp the cut
    for mut row in mat.row_iter_mut() {
        let s = row.norm();
        row /= Complex64::new(s, 0.0);
    }
    Ok(crate::linalg::rank(&mat, 1e-10))
}
