//! Dense matrices of order at most three.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMat {
    dim: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl SmallMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "matrix order must be 1..=3");
        SmallMat {
            dim,
            a: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn scalar(x: f64) -> Self {
        let mut m = Self::zeros(1);
        m.a[0][0] = x;
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (k, v) in d.iter().enumerate() {
            m.a[k][k] = *v;
        }
        m
    }

    /// Row-major `dim * dim` entries.
    pub fn from_row_major(dim: usize, entries: &[f64]) -> Self {
        let mut m = Self::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                m.a[r][c] = entries[r * dim + c];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.a[r][c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.a[r][c] = v;
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * self.dim);
        for r in 0..self.dim {
            out.extend_from_slice(&self.a[r][..self.dim]);
        }
        out
    }

    pub fn add(&self, other: &SmallMat) -> SmallMat {
        let mut m = *self;
        for r in 0..self.dim {
            for c in 0..self.dim {
                m.a[r][c] += other.a[r][c];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> SmallMat {
        let mut m = *self;
        for r in 0..self.dim {
            for c in 0..self.dim {
                m.a[r][c] *= s;
            }
        }
        m
    }

    pub fn mul(&self, other: &SmallMat) -> SmallMat {
        let mut m = SmallMat::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                m.a[r][c] = (0..self.dim).map(|k| self.a[r][k] * other.a[k][c]).sum();
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..self.dim).map(|c| self.a[r][c] * v[c]).sum();
        }
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|r| (0..self.dim).all(|c| r == c || self.a[r][c] == 0.0))
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| (0..self.dim).map(|c| self.a[r][c].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        let mut m = f64::INFINITY;
        for r in 0..self.dim {
            for c in 0..self.dim {
                m = m.min(self.a[r][c]);
            }
        }
        m
    }

    /// Matrix exponential.
    ///
    /// The diagonal is shifted so the series operates on an entrywise
    /// nonnegative matrix whenever the input is Metzler; the result is then
    /// nonnegative up to rounding. Scaling and squaring with a degree-14 Taylor
    /// polynomial after reducing the norm below 1/2.
    pub fn exp(&self) -> SmallMat {
        if self.is_diagonal() {
            let d: Vec<f64> = (0..self.dim).map(|k| self.a[k][k].exp()).collect();
            return SmallMat::diagonal(&d);
        }
        let shift = (0..self.dim)
            .map(|k| self.a[k][k])
            .fold(f64::INFINITY, f64::min)
            .min(0.0);
        let shifted = self.add(&SmallMat::identity(self.dim).scale(-shift));
        let norm = shifted.inf_norm();
        let mut squarings = 0u32;
        if norm > 0.5 {
            squarings = (norm / 0.5).log2().ceil() as u32;
        }
        let x = shifted.scale(0.5f64.powi(squarings as i32));
        let mut term = SmallMat::identity(self.dim);
        let mut sum = term;
        for k in 1..=14 {
            term = term.mul(&x).scale(1.0 / k as f64);
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        sum.scale(shift.exp())
    }

    /// Solves `self * x = b` by Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim;
        let mut m = self.a;
        let mut x: Vec<f64> = b[..n].to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap_or(col);
            if m[pivot][col].abs() < 1e-300 {
                return Err(Error::Precondition("singular boundary system".into()));
            }
            m.swap(col, pivot);
            x.swap(col, pivot);
            for r in col + 1..n {
                let f = m[r][col] / m[col][col];
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                x[r] -= f * x[col];
            }
        }
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
            x[r] = (x[r] - s) / m[r][r];
        }
        Ok(x)
    }
}
