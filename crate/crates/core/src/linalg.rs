//! Small dense complex matrices: partial-pivot LU solves with a 1-norm
//! condition estimate, and eigenvalues through a complex Schur form.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solves whose 1-norm condition number exceeds this are reported singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexSquareMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl ComplexSquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if the length is not a square.
    pub fn from_row_major(n: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), n * n, "expected {} entries", n * n);
        Self { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Exact complex symmetry, `A[j][k] == A[k][j]` bitwise.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    /// LU factorization with partial (row) pivoting.
    pub fn lu(&self) -> Lu {
        let n = self.n;
        let mut a = self.entries.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut zero_pivot = false;
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, a[i * n + k].norm()))
                    .fold(
                        (k, -1.0),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pmax == 0.0 {
                zero_pivot = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                for j in (k + 1)..n {
                    let u = a[k * n + j];
                    a[i * n + j] -= factor * u;
                }
            }
        }
        Lu {
            n,
            factors: a,
            perm,
            zero_pivot,
            norm_one: self.norm_one(),
        }
    }

    /// Solves `A x = b`, rejecting numerically singular systems.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let lu = self.lu();
        let condition = lu.condition_estimate();
        if !(condition <= SINGULAR_CONDITION) {
            return Err(Error::SingularResponse { condition });
        }
        Ok(lu.solve(b))
    }

    /// Eigenvalues in the order produced by the Schur form (unsorted).
    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let m = DMatrix::from_row_slice(self.n, self.n, &self.entries);
        let failure = || Error::EigenFailure {
            matrix: format!("{self:?}"),
        };
        let schur =
            nalgebra::linalg::Schur::try_new(m, SCHUR_EPS, SCHUR_MAX_ITER).ok_or_else(failure)?;
        let values = schur.eigenvalues().ok_or_else(failure)?;
        if values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(failure());
        }
        Ok(values.iter().copied().collect())
    }
}

impl std::ops::Index<(usize, usize)> for ComplexSquareMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexSquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[i * self.n + j]
    }
}

impl fmt::Debug for ComplexSquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                if j > 0 {
                    write!(f, ", ")?;
                }
                let z = self[(i, j)];
                write!(f, "{}{:+}i", z.re, z.im)?;
            }
        }
        write!(f, "]")
    }
}

/// Packed LU factors: unit-lower `L` below the diagonal, `U` on and above.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    factors: Vec<Complex64>,
    perm: Vec<usize>,
    zero_pivot: bool,
    norm_one: f64,
}

impl Lu {
    pub fn is_singular(&self) -> bool {
        self.zero_pivot
    }

    /// Forward/back substitution. The result is meaningless when a zero pivot was hit.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.factors[i * n + j];
                let xj = x[j];
                x[i] -= l * xj;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let u = self.factors[i * n + j];
                let xj = x[j];
                x[i] -= u * xj;
            }
            x[i] /= self.factors[i * n + i];
        }
        x
    }

    /// `||A||_1 * ||A^-1||_1`, with the inverse norm taken column by column
    /// from unit-vector solves. Infinite for an exactly singular factorization.
    pub fn condition_estimate(&self) -> f64 {
        if self.zero_pivot {
            return f64::INFINITY;
        }
        let n = self.n;
        let mut inv_norm: f64 = 0.0;
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            e.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e);
            inv_norm = inv_norm.max(col.iter().map(|z| z.norm()).sum());
        }
        if !inv_norm.is_finite() {
            return f64::INFINITY;
        }
        self.norm_one * inv_norm
    }
}
