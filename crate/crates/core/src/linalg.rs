//! Symmetric positive definite banded systems and their one-row borderings.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix: `data[i * (kd + 1) + (i - j)]` holds
/// `A[i][j]` for `i - kd ≤ j ≤ i`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    kd: usize,
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self {
            n,
            kd,
            data: vec![0.0; n * (kd + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(r - c <= self.kd, "entry ({r}, {c}) outside band {}", self.kd);
        self.data[r * (self.kd + 1) + (r - c)] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.kd {
            0.0
        } else {
            self.data[r * (self.kd + 1) + (r - c)]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kd);
            for j in lo..=i {
                let a = self.data[i * (self.kd + 1) + (i - j)];
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// In-place Cholesky factorization `A = L Lᵀ`.
    pub fn factor(mut self) -> Result<BandedCholesky> {
        let w = self.kd + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kd);
            for j in lo..=i {
                let mut s = self.data[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(self.kd));
                for k in klo..j {
                    s -= self.data[i * w + (i - k)] * self.data[j * w + (j - k)];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Linear(format!(
                            "matrix not positive definite at row {i} (pivot {s:e})"
                        )));
                    }
                    self.data[i * w] = s.sqrt();
                } else {
                    self.data[i * w + (i - j)] = s / self.data[j * w];
                }
            }
        }
        Ok(BandedCholesky {
            n: self.n,
            kd: self.kd,
            l: self.data,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let w = self.kd + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kd);
            let mut s = b[i];
            for k in lo..i {
                s -= self.l[i * w + (i - k)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let hi = (i + self.kd).min(self.n - 1);
            let mut s = b[i];
            for k in i + 1..=hi {
                s -= self.l[k * w + (k - i)] * b[k];
            }
            b[i] = s / self.l[i * w];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Solves `[[A, c], [cᵀ, d]] [x; y] = [f; g]` by the Schur complement on the
/// trailing scalar. Returns `(x, y)`.
pub fn solve_bordered(
    a: BandedSpd,
    c: &[f64],
    d: f64,
    f: &[f64],
    g: f64,
) -> Result<(Vec<f64>, f64)> {
    let chol = a.factor()?;
    let mut x = f.to_vec();
    chol.solve_in_place(&mut x);
    let z = chol.solve(c);
    let cz: f64 = c.iter().zip(&z).map(|(u, v)| u * v).sum();
    let cx: f64 = c.iter().zip(&x).map(|(u, v)| u * v).sum();
    let schur = d - cz;
    if !(schur.abs() > 1e-14 * d.abs().max(cz.abs())) || !schur.is_finite() {
        return Err(Error::Linear(format!(
            "bordered system is singular (Schur complement {schur:e})"
        )));
    }
    let y = (g - cx) / schur;
    for (xi, zi) in x.iter_mut().zip(&z) {
        *xi -= y * zi;
    }
    Ok((x, y))
}
