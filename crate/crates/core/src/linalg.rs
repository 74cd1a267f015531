//! Dense complex matrices and an LU solver with partial pivoting.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{Error, Result};

const PIVOT_FLOOR: f64 = 1.0e-300;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Rejects non-finite entries and inconsistent lengths.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        let m = Self { rows, cols, data };
        m.ensure_finite()?;
        Ok(m)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if let Some(pos) = self.data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                pos / self.cols.max(1),
                pos % self.cols.max(1)
            )));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Result<Complex64> {
        if !self.is_square() {
            return Err(Error::Shape(format!("trace of a {}x{} matrix", self.rows, self.cols)));
        }
        Ok((0..self.rows).map(|i| self[(i, i)]).sum())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * factor).collect() }
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        Ok(self.sub(rhs)?.max_abs())
    }

    /// Central `size x size` block (centered on the middle index).
    pub fn central_block(&self, size: usize) -> Result<Self> {
        if size > self.rows || size > self.cols || (self.rows - size) % 2 != 0 || (self.cols - size) % 2 != 0 {
            return Err(Error::Shape(format!("central {size} block of {}x{}", self.rows, self.cols)));
        }
        let (r0, c0) = ((self.rows - size) / 2, (self.cols - size) / 2);
        Ok(Self::from_fn(size, size, |i, j| self[(r0 + i, c0 + j)]))
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }

    fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Packed LU factors of `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: ComplexMatrix,
    perm: Vec<usize>,
    a_one_norm: f64,
}

impl LuFactors {
    pub fn factor(a: &ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Shape(format!("LU of a {}x{} matrix", a.rows, a.cols)));
        }
        a.ensure_finite()?;
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot < PIVOT_FLOOR {
                return Err(Error::Singular { column: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = lu[(k, k)].inv();
            let (head, tail) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            for row in tail.chunks_mut(n) {
                let factor = row[k] * inv;
                row[k] = factor;
                if factor.re == 0.0 && factor.im == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    row[j] -= factor * pivot_row[j];
                }
            }
        }
        Ok(Self { lu, perm, a_one_norm: a.one_norm() })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    fn solve_in_place(&self, x: &mut [Complex64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in 0..i {
                acc -= row[j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
    }

    /// Solves `A^H x = b` using the same factors.
    fn solve_adjoint_in_place(&self, x: &mut [Complex64]) {
        let n = self.dim();
        // U^H z = b
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(j, i)].conj() * x[j];
            }
            x[i] = acc / self.lu[(i, i)].conj();
        }
        // L^H w = z
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(j, i)].conj() * x[j];
            }
            x[i] = acc;
        }
        // x = P^T w
        let w = x.to_vec();
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
    }

    pub fn solve(&self, b: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = self.dim();
        if b.rows != n {
            return Err(Error::Shape(format!("right-hand side has {} rows, system has {n}", b.rows)));
        }
        let mut out = ComplexMatrix::zeros(n, b.cols);
        let mut work = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..b.cols {
            for (i, w) in work.iter_mut().enumerate() {
                *w = b[(self.perm[i], j)];
            }
            self.solve_in_place(&mut work);
            for (i, w) in work.iter().enumerate() {
                out[(i, j)] = *w;
            }
        }
        out.ensure_finite()?;
        Ok(out)
    }

    fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let mut work: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        self.solve_in_place(&mut work);
        work
    }

    /// Reciprocal 1-norm condition estimate (Hager/Higham power iteration
    /// on `||A^-1||_1`).
    pub fn rcond(&self) -> f64 {
        let n = self.dim();
        if n == 0 || self.a_one_norm == 0.0 {
            return 0.0;
        }
        let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
        let mut estimate = 0.0;
        let mut last_index = usize::MAX;
        for _ in 0..5 {
            let y = self.solve_vec(&x);
            let norm: f64 = y.iter().map(|z| z.norm()).sum();
            if norm <= estimate {
                break;
            }
            estimate = norm;
            let mut xi: Vec<Complex64> =
                y.iter().map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) }).collect();
            self.solve_adjoint_in_place(&mut xi);
            let (j, _) = xi
                .iter()
                .enumerate()
                .map(|(i, z)| (i, z.norm()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if j == last_index {
                break;
            }
            last_index = j;
            x = vec![Complex64::new(0.0, 0.0); n];
            x[j] = Complex64::new(1.0, 0.0);
        }
        if estimate == 0.0 || !estimate.is_finite() {
            return 0.0;
        }
        1.0 / (estimate * self.a_one_norm)
    }
}

/// Solution of `A X = B` with the reciprocal condition estimate of `A`.
#[derive(Debug, Clone)]
pub struct Solved {
    pub x: ComplexMatrix,
    pub rcond: f64,
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Solved> {
    if !a.is_square() {
        return Err(Error::Shape(format!("solve needs a square matrix, got {}x{}", a.rows, a.cols)));
    }
    if b.rows != a.rows {
        return Err(Error::Shape(format!("right-hand side has {} rows, system has {}", b.rows, a.rows)));
    }
    let lu = LuFactors::factor(a)?;
    let x = lu.solve(b)?;
    Ok(Solved { x, rcond: lu.rcond() })
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.matmul(b)
}

pub fn adjoint(a: &ComplexMatrix) -> ComplexMatrix {
    a.adjoint()
}

pub fn trace(a: &ComplexMatrix) -> Result<Complex64> {
    a.trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::SplitMix64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    /// Random matrix nudged toward the diagonal so cond stays modest.
    fn well_conditioned(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
        let mut a = random_matrix(rng, n, n);
        for i in 0..n {
            a[(i, i)] += c(n as f64 * 0.5, 0.0);
        }
        a
    }

    #[test]
    fn identity_system() {
        let mut rng = SplitMix64::seed_from_u64(1);
        let b = random_matrix(&mut rng, 4, 3);
        let solved = solve(&ComplexMatrix::identity(4), &b).unwrap();
        assert_eq!(solved.x, b);
        assert!((solved.rcond - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_system() {
        let a = ComplexMatrix::diagonal(&[c(2.0, 0.0), c(0.0, 1.0)]);
        let b = ComplexMatrix::from_row_major(2, 1, vec![c(2.0, 0.0), c(0.0, 1.0)]).unwrap();
        let x = solve(&a, &b).unwrap().x;
        assert!((x[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[(1, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn recovers_known_solution() {
        let mut rng = SplitMix64::seed_from_u64(8);
        let a = random_matrix(&mut rng, 8, 8);
        let x0 = random_matrix(&mut rng, 8, 2);
        let b = a.matmul(&x0).unwrap();
        let x = solve(&a, &b).unwrap().x;
        assert!(x.max_abs_diff(&x0).unwrap() < 1e-10);
    }

    #[test]
    fn inverse_round_trip() {
        let mut rng = SplitMix64::seed_from_u64(16);
        let a = well_conditioned(&mut rng, 16);
        let inv = solve(&a, &ComplexMatrix::identity(16)).unwrap().x;
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.max_abs_diff(&ComplexMatrix::identity(16)).unwrap() < 1e-9);
    }

    #[test]
    fn singular_rejected() {
        let a = ComplexMatrix::from_row_major(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)])
            .unwrap();
        assert!(matches!(
            solve(&a, &ComplexMatrix::identity(2)),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn condition_estimate_tracks_scaling() {
        let a = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(1e-8, 0.0), c(1.0, 0.0)]);
        let rcond = LuFactors::factor(&a).unwrap().rcond();
        assert!((rcond - 1e-8).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(a.trace().is_err());
        assert!(a.matmul(&ComplexMatrix::zeros(2, 2)).is_err());
        assert!(solve(&ComplexMatrix::identity(3), &ComplexMatrix::zeros(2, 1)).is_err());
        assert!(ComplexMatrix::from_row_major(2, 2, vec![c(0.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::from_row_major(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn trace_and_adjoint_basics() {
        assert_eq!(ComplexMatrix::identity(5).trace().unwrap(), c(5.0, 0.0));
        let mut rng = SplitMix64::seed_from_u64(3);
        let a = random_matrix(&mut rng, 3, 5);
        assert_eq!(a.adjoint().adjoint(), a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn residual_bounded(seed in any::<u64>(), n in 2usize..24) {
            let mut rng = SplitMix64::seed_from_u64(seed);
            let a = well_conditioned(&mut rng, n);
            let b = random_matrix(&mut rng, n, 3);
            let solved = solve(&a, &b).unwrap();
            prop_assume!(solved.rcond > 1e-6);
            let residual = a.matmul(&solved.x).unwrap().max_abs_diff(&b).unwrap();
            prop_assert!(residual <= 1e-10 * a.max_abs() * solved.x.max_abs().max(1.0));
        }

        #[test]
        fn adjoint_reverses_products(seed in any::<u64>(), n in 1usize..10, k in 1usize..10, p in 1usize..10) {
            let mut rng = SplitMix64::seed_from_u64(seed);
            let a = random_matrix(&mut rng, n, k);
            let b = random_matrix(&mut rng, k, p);
            let lhs = a.matmul(&b).unwrap().adjoint();
            let rhs = b.adjoint().matmul(&a.adjoint()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-13);
        }
    }
}
