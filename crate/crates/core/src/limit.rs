//! Infinite-width NTK kernels for Gaussian hidden weights.
//!
//! For unit vectors with inner product `γ`:
//!
//! ```text
//! f_w(γ) = E[γ σ'(⟨w,x⟩) σ'(⟨w,x'⟩)] = γ (1/2 − arccos(γ)/(2π))
//! f_z(γ) = E[σ(⟨w,x⟩) σ(⟨w,x'⟩)]     = (γ (π − arccos γ) + sqrt(1 − γ²)) / (2π)
//! ```
//!
//! Both have power series with nonnegative coefficients around 0; the series
//! here are generated from the arcsine and `sqrt(1 − x)` recurrences.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tensor::{gram, Matrix, Vector};

const GAMMA_SLACK: f64 = 1e-12;
const SERIES_LIMIT: f64 = 0.99;
const MAX_TERMS: usize = 500;

fn clamp_gamma(gamma: f64) -> Result<f64> {
    if !(gamma.abs() <= 1.0 + GAMMA_SLACK) {
        return Err(Error::InvalidArgument(format!(
            "inner product {gamma} outside [-1, 1]"
        )));
    }
    Ok(gamma.clamp(-1.0, 1.0))
}

/// `arccos` that stays accurate near ±1 via the half-angle identities.
fn stable_acos(gamma: f64) -> f64 {
    if gamma > 0.999 {
        2.0 * ((0.5 * (1.0 - gamma)).sqrt()).asin()
    } else if gamma < -0.999 {
        PI - 2.0 * ((0.5 * (1.0 + gamma)).sqrt()).asin()
    } else {
        gamma.acos()
    }
}

pub fn fw(gamma: f64) -> Result<f64> {
    let g = clamp_gamma(gamma)?;
    Ok(g * (0.5 - stable_acos(g) / (2.0 * PI)))
}

pub fn fz(gamma: f64) -> Result<f64> {
    let g = clamp_gamma(gamma)?;
    let root = ((1.0 - g) * (1.0 + g)).max(0.0).sqrt();
    Ok((g * (PI - stable_acos(g)) + root) / (2.0 * PI))
}

/// Coefficients `c_k` of `arcsin x = Σ c_k x^(2k+1)`,
/// `c_k = (2k)! / (4^k (k!)² (2k+1))`.
fn arcsin_coefficients() -> impl Iterator<Item = f64> {
    // central binomial ratio b_k = (2k)!/(4^k (k!)^2): b_{k+1} = b_k (2k+1)/(2k+2)
    (0..).scan(1.0f64, |b, k: usize| {
        let c = *b / (2 * k + 1) as f64;
        *b *= (2 * k + 1) as f64 / (2 * k + 2) as f64;
        Some(c)
    })
}

/// Coefficients `d_k` of `sqrt(1 − x) = Σ d_k x^k`.
fn sqrt_one_minus_coefficients() -> impl Iterator<Item = f64> {
    // d_0 = 1, d_{k+1} = d_k (k − 1/2)/(k + 1)
    (0..).scan(1.0f64, |d, k: usize| {
        let out = *d;
        *d *= (k as f64 - 0.5) / (k as f64 + 1.0);
        Some(out)
    })
}

fn check_series_args(gamma: f64, tol: f64) -> Result<()> {
    if !(gamma.abs() <= SERIES_LIMIT) {
        return Err(Error::InvalidArgument(format!(
            "series evaluation needs |γ| <= {SERIES_LIMIT}, got {gamma}; use the closed form"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(())
}

/// `f_w(γ) = γ/4 + (1/2π) Σ c_k γ^(2k+2)`.
pub fn fw_series(gamma: f64, tol: f64) -> Result<f64> {
    check_series_args(gamma, tol)?;
    let g2 = gamma * gamma;
    let mut sum = 0.25 * gamma;
    let mut power = g2;
    for c in arcsin_coefficients().take(MAX_TERMS) {
        let term = c * power / (2.0 * PI);
        sum += term;
        if term.abs() < tol {
            break;
        }
        power *= g2;
    }
    Ok(sum)
}

/// `f_z(γ) = γ/4 + (1/2π) (γ arcsin γ + sqrt(1 − γ²))`, expanded in `γ²`:
/// the `γ^(2k)` coefficient is `(c_{k−1} + d_k)/(2π)` with `c_{−1} = 0`.
pub fn fz_series(gamma: f64, tol: f64) -> Result<f64> {
    check_series_args(gamma, tol)?;
    let g2 = gamma * gamma;
    let mut sum = 0.25 * gamma;
    let mut power = 1.0;
    let arcsin = std::iter::once(0.0).chain(arcsin_coefficients());
    for (c, d) in arcsin.zip(sqrt_one_minus_coefficients()).take(MAX_TERMS) {
        let term = (c + d) * power / (2.0 * PI);
        sum += term;
        if term.abs() < tol {
            break;
        }
        power *= g2;
    }
    Ok(sum)
}

/// `H^w(X)` and `H^z(X)`: the kernels applied entrywise to `XᵀX`.
pub fn limit_matrices(x: &Matrix) -> Result<(Matrix, Matrix)> {
    for (j, c) in x.column_iter().enumerate() {
        if (c.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("column {j} is not unit norm")));
        }
    }
    let xtx = gram(x);
    let m = xtx.nrows();
    let mut hw = Matrix::zeros(m, m);
    let mut hz = Matrix::zeros(m, m);
    for j in 0..m {
        hw[(j, j)] = 0.5;
        hz[(j, j)] = 0.5;
        for k in (j + 1)..m {
            let g = xtx[(j, k)];
            let (a, b) = (fw(g)?, fz(g)?);
            hw[(j, k)] = a;
            hw[(k, j)] = a;
            hz[(j, k)] = b;
            hz[(k, j)] = b;
        }
    }
    Ok((hw, hz))
}

/// Monte Carlo estimates of `f_w(⟨x,x'⟩)` and `f_z(⟨x,x'⟩)` with full
/// `n`-dimensional Gaussian weight draws.
pub fn mc_kernel(x: &Vector, xp: &Vector, num_samples: usize, seed: u64) -> Result<(f64, f64)> {
    if x.len() != xp.len() {
        return Err(Error::Shape("vectors differ in length".into()));
    }
    if (x.norm() - 1.0).abs() > 1e-10 || (xp.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument("inputs must be unit vectors".into()));
    }
    if num_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let gamma = x.dot(xp);
    let mut rng = stream_rng(seed, Stream::MonteCarlo);
    let (mut sw, mut sz) = (0.0, 0.0);
    for _ in 0..num_samples {
        let (mut a, mut b) = (0.0, 0.0);
        for (xi, xpi) in x.iter().zip(xp.iter()) {
            let w: f64 = rng.sample(StandardNormal);
            a += w * xi;
            b += w * xpi;
        }
        if a > 0.0 && b > 0.0 {
            sw += gamma;
            sz += a * b;
        }
    }
    let n = num_samples as f64;
    Ok((sw / n, sz / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_anchor_values() {
        assert_eq!(fw(0.0).unwrap(), 0.0);
        assert!((fw(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((fw(0.5).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((fz(0.0).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((fz(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(fz(-1.0).unwrap().abs() < 1e-15);
        // (0.5·2π/3 + √0.75)/(2π)
        let expect = (0.5 * 2.0 * PI / 3.0 + 0.75f64.sqrt()) / (2.0 * PI);
        assert!((fz(0.5).unwrap() - expect).abs() < 1e-15);
        assert!((fz(0.5).unwrap() - 0.30450).abs() < 1e-5);
    }

    #[test]
    fn domain_checks() {
        assert!(fw(1.0 + 1e-13).is_ok());
        assert!(fw(1.0 + 1e-9).is_err());
        assert!(fz(f64::NAN).is_err());
        assert!(fw_series(0.995, 1e-12).is_err());
        assert!(fz_series(0.5, 0.0).is_err());
    }

    #[test]
    fn near_one_is_accurate() {
        // reference evaluated from φ directly, sidestepping acos
        for &phi in &[1e-6f64, 1e-4, 1e-3] {
            let g = phi.cos();
            let expect = (g * (PI - phi) + phi.sin()) / (2.0 * PI);
            assert!((fz(g).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn series_match_closed_forms() {
        assert!((fz_series(0.0, 1e-12).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-16);
        assert!((fz_series(0.5, 1e-12).unwrap() - fz(0.5).unwrap()).abs() < 1e-11);
        assert!((fw_series(0.9, 1e-12).unwrap() - fw(0.9).unwrap()).abs() < 1e-11);
        for i in -9..=9 {
            let g = i as f64 / 10.0;
            assert!((fw_series(g, 1e-13).unwrap() - fw(g).unwrap()).abs() <= 1e-10, "fw {g}");
            assert!((fz_series(g, 1e-13).unwrap() - fz(g).unwrap()).abs() <= 1e-10, "fz {g}");
        }
    }

    #[test]
    fn low_order_coefficients() {
        // γ² coefficient of f_z is 1/(4π), γ⁴ is 1/(48π)
        let c: Vec<f64> = std::iter::once(0.0)
            .chain(arcsin_coefficients())
            .zip(sqrt_one_minus_coefficients())
            .map(|(a, b)| a + b)
            .take(3)
            .collect();
        assert!((c[0] - 1.0).abs() < 1e-15);
        assert!((c[1] / (2.0 * PI) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        assert!((c[2] / (2.0 * PI) - 1.0 / (48.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn shape_on_grid() {
        let grid: Vec<f64> = (0..=2000).map(|i| -1.0 + i as f64 / 1000.0).collect();
        let mut prev_z = -1.0;
        for &g in &grid {
            let z = fz(g).unwrap();
            assert!(z >= 0.0);
            assert!(z >= prev_z - 1e-15);
            prev_z = z;
        }
        let mut prev_w = 0.0;
        for &g in grid.iter().filter(|g| **g >= 0.0) {
            let w = fw(g).unwrap();
            assert!(w >= prev_w - 1e-15);
            prev_w = w;
        }
    }

    #[test]
    fn limit_matrix_diagonals() {
        let x = Matrix::identity(3, 3);
        let (hw, hz) = limit_matrices(&x).unwrap();
        assert_eq!(hw, Matrix::identity(3, 3) * 0.5);
        assert!((hz[(0, 1)] - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(hz[(2, 2)], 0.5);
        let (hw1, hz1) = limit_matrices(&Matrix::from_column_slice(2, 1, &[0.6, 0.8])).unwrap();
        assert_eq!((hw1[(0, 0)], hz1[(0, 0)]), (0.5, 0.5));
    }

    #[test]
    fn mc_orthogonal_and_equal() {
        let x = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let xp = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let n = 40_000;
        let tol = 3.0 / (n as f64).sqrt();
        let (ew, _) = mc_kernel(&x, &xp, n, 1).unwrap();
        assert!(ew.abs() < tol);
        let (ew, ez) = mc_kernel(&x, &x, n, 2).unwrap();
        assert!((ew - 0.5).abs() < tol);
        assert!((ez - 0.5).abs() < tol);
    }
}
