//! Nine-point central differences on a uniform grid, with zero padding
//! beyond the first and last sample.

use std::ops::{Add, Mul};

use crate::banded::BandMatrix;

/// Offsets −4..=4 of the first-derivative stencil, in units of 1/d.
pub const FIRST: [f64; 9] = [
    1.0 / 280.0,
    -4.0 / 105.0,
    1.0 / 5.0,
    -4.0 / 5.0,
    0.0,
    4.0 / 5.0,
    -1.0 / 5.0,
    4.0 / 105.0,
    -1.0 / 280.0,
];

/// Offsets −4..=4 of the second-derivative stencil, in units of 1/d².
pub const SECOND: [f64; 9] = [
    -1.0 / 560.0,
    8.0 / 315.0,
    -1.0 / 5.0,
    8.0 / 5.0,
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
];

pub const HALF_WIDTH: usize = 4;

/// The derivative pair for one set of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSet {
    pub first: [f64; 9],
    pub second: [f64; 9],
}

impl Default for StencilSet {
    fn default() -> Self {
        Self {
            first: FIRST,
            second: SECOND,
        }
    }
}

fn convolve<T>(coeffs: &[f64; 9], scale: f64, f: &[T], out: &mut [T])
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = f.len();
    assert_eq!(out.len(), n);
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::default();
        for (k, &w) in coeffs.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let j = i as isize + k as isize - HALF_WIDTH as isize;
            if j >= 0 && (j as usize) < n {
                acc = acc + f[j as usize] * w;
            }
        }
        *o = acc * scale;
    }
}

/// ∂f/∂x with spacing `d`.
pub fn first_derivative<T>(f: &[T], d: f64, out: &mut [T])
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    convolve(&FIRST, 1.0 / d, f, out);
}

/// ∂²f/∂x² with spacing `d`.
pub fn second_derivative<T>(f: &[T], d: f64, out: &mut [T])
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    convolve(&SECOND, 1.0 / (d * d), f, out);
}

/// Both derivatives at once.
pub fn apply_derivatives<T>(f: &[T], d: f64) -> (Vec<T>, Vec<T>)
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut a = vec![T::default(); f.len()];
    let mut b = vec![T::default(); f.len()];
    first_derivative(f, d, &mut a);
    second_derivative(f, d, &mut b);
    (a, b)
}

/// The second-derivative operator as a band matrix.
pub fn second_derivative_matrix(n: usize, d: f64) -> BandMatrix<f64> {
    BandMatrix::from_fn(n, HALF_WIDTH, |i, j| {
        SECOND[(j as isize - i as isize + HALF_WIDTH as isize) as usize] / (d * d)
    })
}

/// The first-derivative operator as a band matrix (antisymmetric).
pub fn first_derivative_matrix(n: usize, d: f64) -> BandMatrix<f64> {
    BandMatrix::from_fn(n, HALF_WIDTH, |i, j| {
        FIRST[(j as isize - i as isize + HALF_WIDTH as isize) as usize] / d
    })
}

/// Fourier symbol of the first-derivative stencil divided by i:
/// the stencil maps e^{ikx} to i·k_eff·e^{ikx}.
pub fn first_derivative_symbol(k: f64, d: f64) -> f64 {
    let mut s = 0.0;
    for m in 1..=4 {
        s += 2.0 * FIRST[HALF_WIDTH + m] * (k * d * m as f64).sin();
    }
    s / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn coefficients_sum_to_zero() {
        assert!(FIRST.iter().sum::<f64>().abs() < 1e-15);
        assert!(SECOND.iter().sum::<f64>().abs() < 1e-14);
    }

    #[test]
    fn quartic_second_derivative_exact() {
        let d = 0.1;
        let xs: Vec<f64> = (0..161).map(|j| -8.0 + d * j as f64).collect();
        let f: Vec<f64> = xs.iter().map(|x| x.powi(4)).collect();
        let (_, dd) = apply_derivatives(&f, d);
        for j in 4..157 {
            assert!((dd[j] - 12.0 * xs[j] * xs[j]).abs() < 1e-9, "x={}", xs[j]);
        }
    }

    #[test]
    fn matrix_matches_convolution() {
        let d = 0.3;
        let f: Vec<Complex64> = (0..20).map(|j| Complex64::new((j as f64).sin(), j as f64)).collect();
        let (a, b) = apply_derivatives(&f, d);
        let mut ma = vec![Complex64::default(); 20];
        let mut mb = vec![Complex64::default(); 20];
        first_derivative_matrix(20, d).apply(&f, &mut ma);
        second_derivative_matrix(20, d).apply(&f, &mut mb);
        for j in 0..20 {
            assert!((a[j] - ma[j]).norm() < 1e-12);
            assert!((b[j] - mb[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_first_derivative() {
        let d = 0.1;
        let k = 0.4;
        let f: Vec<Complex64> = (0..161)
            .map(|j| Complex64::from_polar(1.0, k * (-8.0 + d * j as f64)))
            .collect();
        let (df, _) = apply_derivatives(&f, d);
        // (kd)^9 / 630 bounds the truncation error of the eighth-order stencil.
        let bound = (k * d).powi(9) / d;
        for j in 4..157 {
            let want = Complex64::new(0.0, k) * f[j];
            assert!((df[j] - want).norm() <= bound.max(1e-13));
        }
        assert!((first_derivative_symbol(k, d) - k).abs() < 1e-12);
    }
}
