//! Square band matrices with equal lower and upper bandwidth.
//!
//! Both quadratic-potential operators (pentadiagonal in the number basis) and
//! grid Hamiltonians (9-point stencils) fit this layout, so one storage type
//! and one unpivoted LU cover every implicit solve in the crate.

use std::ops::{AddAssign, Mul};

use num_complex::Complex64;

use crate::error::NumericError;

/// Row-major band storage: entry (i, j) with |i − j| ≤ `half` lives at
/// `data[i * width + (j + half − i)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix<T> {
    n: usize,
    half: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> BandMatrix<T> {
    pub fn zeros(n: usize, half: usize) -> Self {
        Self {
            n,
            half,
            data: vec![T::default(); n * (2 * half + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || i.abs_diff(j) > self.half {
            return None;
        }
        Some(i * (2 * self.half + 1) + j + self.half - i)
    }

    /// Entry (i, j); zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or_else(T::default, |s| self.data[s])
    }

    /// Sets (i, j). Panics when the position lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        let s = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("({i}, {j}) outside band of half-width {}", self.half));
        self.data[s] = value;
    }

    /// Builds a matrix of half-width `half` entry by entry.
    pub fn from_fn(n: usize, half: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n, half);
        for i in 0..n {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            for j in lo..=hi {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Elementwise map into another scalar type, keeping the band shape.
    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> BandMatrix<U> {
        BandMatrix {
            n: self.n,
            half: self.half,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// y = A x for complex vectors.
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64])
    where
        Complex64: Mul<T, Output = Complex64>,
    {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let w = 2 * self.half + 1;
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.half);
            let hi = (i + self.half).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                acc += x[j] * row[j + self.half - i];
            }
            *yi = acc;
        }
    }

    /// y += s · A x.
    pub fn apply_add(&self, s: Complex64, x: &[Complex64], y: &mut [Complex64])
    where
        Complex64: Mul<T, Output = Complex64>,
    {
        let w = 2 * self.half + 1;
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.half);
            let hi = (i + self.half).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                acc += x[j] * row[j + self.half - i];
            }
            *yi += <Complex64 as Mul<Complex64>>::mul(s, acc);
        }
    }
}

impl<T: Copy + Default + AddAssign> BandMatrix<T> {
    /// Adds `value` at (i, j).
    pub fn add(&mut self, i: usize, j: usize, value: T) {
        let s = self.slot(i, j).expect("position outside band");
        self.data[s] += value;
    }
}

impl BandMatrix<f64> {
    /// Dense copy, used for diagonalization and test oracles.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Product restricted to this band shape; entries that fall outside the
    /// band are dropped, so pick `half` large enough for the result.
    pub fn mul_banded(&self, other: &BandMatrix<f64>, half: usize) -> BandMatrix<f64> {
        let n = self.n;
        BandMatrix::from_fn(n, half, |i, j| {
            let lo = i.saturating_sub(self.half).max(j.saturating_sub(other.half));
            let hi = (i + self.half).min(j + other.half).min(n - 1);
            (lo..=hi).map(|k| self.get(i, k) * other.get(k, j)).sum()
        })
    }
}

/// Unpivoted LU factorization of a complex band matrix.
///
/// Safe for matrices whose Hermitian part is definite, e.g. `I + i·s·H`
/// with H Hermitian, which is the only way the simulators use it.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    half: usize,
    data: Vec<Complex64>,
}

impl BandLu {
    pub fn factor(a: &BandMatrix<Complex64>) -> Result<Self, NumericError> {
        let n = a.n;
        let half = a.half;
        let w = 2 * half + 1;
        let mut d = a.data.clone();
        let idx = |i: usize, j: usize| i * w + j + half - i;
        for k in 0..n {
            let pivot = d[idx(k, k)];
            if !(pivot.norm() > 1e-300) || !pivot.re.is_finite() || !pivot.im.is_finite() {
                return Err(NumericError::Singular { index: k });
            }
            let end = (k + half + 1).min(n);
            for i in k + 1..end {
                let l = d[idx(i, k)] / pivot;
                d[idx(i, k)] = l;
                for j in k + 1..end {
                    let u = d[idx(k, j)];
                    d[idx(i, j)] -= l * u;
                }
            }
        }
        Ok(Self { n, half, data: d })
    }

    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        assert_eq!(b.len(), self.n);
        let w = 2 * self.half + 1;
        let half = self.half;
        let idx = |i: usize, j: usize| i * w + j + half - i;
        for i in 0..self.n {
            let lo = i.saturating_sub(half);
            let mut acc = b[i];
            for j in lo..i {
                acc -= self.data[idx(i, j)] * b[j];
            }
            b[i] = acc;
        }
        for i in (0..self.n).rev() {
            let hi = (i + half).min(self.n - 1);
            let mut acc = b[i];
            for j in i + 1..=hi {
                acc -= self.data[idx(i, j)] * b[j];
            }
            b[i] = acc / self.data[idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn get_outside_band_is_zero() {
        let m = BandMatrix::from_fn(5, 1, |i, j| (i * 10 + j) as f64);
        assert_eq!(m.get(0, 3), 0.0);
        assert_eq!(m.get(2, 3), 23.0);
    }

    #[test]
    fn apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = BandMatrix::from_fn(9, 2, |_, _| rng.random_range(-1.0..1.0));
        let x: Vec<Complex64> = (0..9).map(|i| c(i as f64, 1.0 - i as f64)).collect();
        let mut y = vec![c(0.0, 0.0); 9];
        m.apply(&x, &mut y);
        let d = m.to_dense();
        for i in 0..9 {
            let want: Complex64 = (0..9).map(|j| x[j] * d[(i, j)]).sum();
            assert!((want - y[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn lu_solves_shifted_hermitian_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let h = {
            let mut h = BandMatrix::<f64>::zeros(n, 4);
            for i in 0..n {
                for j in i..(i + 5).min(n) {
                    let v = rng.random_range(-3.0..3.0);
                    h.set(i, j, v);
                    h.set(j, i, v);
                }
            }
            h
        };
        let a = BandMatrix::from_fn(n, 4, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            c(id, 0.7 * h.get(i, j))
        });
        let lu = BandLu::factor(&a).unwrap();
        let x: Vec<Complex64> = (0..n).map(|i| c((i as f64).sin(), (i as f64).cos())).collect();
        let mut b = vec![c(0.0, 0.0); n];
        a.apply(&x, &mut b);
        lu.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).norm() < 1e-10, "row {i}");
        }
    }

    #[test]
    fn singular_matrix_reported() {
        let a = BandMatrix::from_fn(3, 1, |_, _| c(0.0, 0.0));
        assert!(matches!(BandLu::factor(&a), Err(NumericError::Singular { index: 0 })));
    }

    #[test]
    fn banded_product_matches_dense() {
        let a = BandMatrix::from_fn(8, 1, |i, j| (i + 2 * j) as f64);
        let p = a.mul_banded(&a, 2);
        let d = a.to_dense() * a.to_dense();
        for i in 0..8 {
            for j in 0..8 {
                assert!((p.get(i, j) - d[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
