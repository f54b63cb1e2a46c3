//! Direct solvers for the narrow-band systems that appear in the wave
//! collocation and the Crank–Nicolson diffusion step.

use crate::error::{Error, Result};

/// Pre-factored tridiagonal matrix (Thomas algorithm without pivoting).
///
/// Only suitable for diagonally dominant matrices such as `I - k·Δ_h`.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    // modified super-diagonal and inverse pivots from the forward sweep
    upper_mod: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    /// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused),
    /// `upper[i]` multiplies `x[i+1]` in row `i` (`upper[n-1]` unused).
    pub fn factor(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n || n == 0 {
            return Err(Error::Config(
                "tridiagonal bands must share a non-zero length".into(),
            ));
        }
        let mut upper_mod = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = if i == 0 {
                diag[0]
            } else {
                diag[i] - lower[i] * prev_upper
            };
            if pivot.abs() < 1e-300 {
                return Err(Error::Domain(format!("zero pivot in tridiagonal row {i}")));
            }
            inv_pivot[i] = 1.0 / pivot;
            upper_mod[i] = upper[i] * inv_pivot[i];
            prev_upper = upper_mod[i];
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper_mod,
            inv_pivot,
        })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solves in place: `rhs` is overwritten with the solution.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_mod[i] * rhs[i + 1];
        }
    }
}

/// General band matrix with `kl` sub- and `ku` super-diagonals, factored by
/// Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-compact storage, width kl + ku + 1; entry (i, j) lives at [i][kl + j - i]
    upper: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            upper: vec![0.0; n * (kl + ku + 1)],
        }
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    /// Adds `value` to entry `(row, col)`. Panics if the entry is outside the band.
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        assert!(
            col + self.kl >= row && col <= row + self.ku,
            "entry ({row}, {col}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let w = self.width();
        self.upper[row * w + self.kl + col - row] += value;
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if col + self.kl < row || col > row + self.ku {
            return 0.0;
        }
        self.upper[row * self.width() + self.kl + col - row]
    }

    /// Matrix-vector product, used to check solves in tests.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                *yi += self.get(i, j) * xj;
            }
        }
        y
    }

    /// LU factorisation with row interchanges.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let m1 = self.kl;
        let mm = self.width();
        let a = &mut self.upper;
        // left-justify the first m1 rows
        let mut l = m1;
        for i in 0..m1.min(n) {
            for j in (m1 - i)..mm {
                a[i * mm + j - l] = a[i * mm + j];
            }
            l -= 1;
            for j in (mm - l - 1)..mm {
                a[i * mm + j] = 0.0;
            }
        }
        let mut lower = vec![0.0; n * m1.max(1)];
        let mut pivots = vec![0usize; n];
        let mut l = m1;
        for k in 0..n {
            let mut dum = a[k * mm];
            let mut piv = k;
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l {
                if a[j * mm].abs() > dum.abs() {
                    dum = a[j * mm];
                    piv = j;
                }
            }
            pivots[k] = piv;
            if dum == 0.0 {
                return Err(Error::Domain(format!("singular band matrix at column {k}")));
            }
            if piv != k {
                for j in 0..mm {
                    a.swap(k * mm + j, piv * mm + j);
                }
            }
            for i in (k + 1)..l {
                let factor = a[i * mm] / a[k * mm];
                lower[k * m1.max(1) + i - k - 1] = factor;
                for j in 1..mm {
                    a[i * mm + j - 1] = a[i * mm + j] - factor * a[k * mm + j];
                }
                a[i * mm + mm - 1] = 0.0;
            }
        }
        Ok(BandLu {
            n,
            m1,
            mm,
            upper: self.upper,
            lower,
            pivots,
        })
    }
}

/// Factored band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    m1: usize,
    mm: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, m1, mm) = (self.n, self.m1, self.mm);
        let lw = m1.max(1);
        let mut x = rhs.to_vec();
        let mut l = m1;
        for k in 0..n {
            let j = self.pivots[k];
            if j != k {
                x.swap(k, j);
            }
            if l < n {
                l += 1;
            }
            for j in (k + 1)..l {
                x[j] -= self.lower[k * lw + j - k - 1] * x[k];
            }
        }
        let mut l = 1;
        for i in (0..n).rev() {
            let mut dum = x[i];
            for k in 1..l {
                dum -= self.upper[i * mm + k] * x[k + i];
            }
            x[i] = dum / self.upper[i * mm];
            if l < mm {
                l += 1;
            }
        }
        x
    }
}
