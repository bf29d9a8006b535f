use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseMatrix;

/// LU factorization of a banded complex matrix with partial pivoting.
///
/// Storage follows the LAPACK band layout: entry `(i, j)` lives at
/// `ab[j * ld + (ku_work + i - j)]` where `ku_work = kl + ku` absorbs the
/// fill-in caused by row swaps. Factorization cost is `O(n * kl * ku)`, each
/// solve is `O(n * (kl + ku))`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku_work: usize,
    ld: usize,
    ab: Vec<Complex64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factors a square sparse matrix, treating its full bandwidth as the band.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                got: a.n_cols(),
            });
        }
        let n = a.n_rows();
        if n == 0 {
            return Err(Error::invalid("cannot factor an empty matrix"));
        }
        let mut kl = 0usize;
        let mut ku = 0usize;
        for (i, j, _) in a.entries() {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let ku_work = kl + ku;
        let ld = kl + ku_work + 1;
        let mut ab = vec![Complex64::new(0.0, 0.0); ld * n];
        for (i, j, v) in a.entries() {
            ab[j * ld + (ku_work + i - j)] = v;
        }

        let mut lu = BandedLu {
            n,
            kl,
            ku_work,
            ld,
            ab,
            pivots: vec![0; n],
        };
        lu.factorize()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && i + self.ku_work >= j);
        j * self.ld + (self.ku_work + i - j)
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.n;
        for j in 0..n {
            let row_end = (j + self.kl).min(n - 1);
            let mut jp = j;
            let mut best = self.ab[self.idx(j, j)].norm();
            for i in (j + 1)..=row_end {
                let mag = self.ab[self.idx(i, j)].norm();
                if mag > best {
                    best = mag;
                    jp = i;
                }
            }
            self.pivots[j] = jp;
            if best < 1e-300 {
                return Err(Error::SolverFailure {
                    residual: f64::INFINITY,
                    shift: None,
                });
            }
            let col_end = (j + self.ku_work).min(n - 1);
            if jp != j {
                for col in j..=col_end {
                    let a = self.idx(j, col);
                    let b = self.idx(jp, col);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.idx(j, j)];
            for i in (j + 1)..=row_end {
                let at_ij = self.idx(i, j);
                let m = self.ab[at_ij] / pivot;
                self.ab[at_ij] = m;
                if m.norm_sqr() != 0.0 {
                    for col in (j + 1)..=col_end {
                        let upper = self.ab[self.idx(j, col)];
                        let at_icol = self.idx(i, col);
                        self.ab[at_icol] -= m * upper;
                    }
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` using the stored factorization.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let n = self.n;
        let mut x = b.to_vec();
        for j in 0..n {
            let jp = self.pivots[j];
            if jp != j {
                x.swap(j, jp);
            }
            let xj = x[j];
            if xj.norm_sqr() != 0.0 {
                let row_end = (j + self.kl).min(n - 1);
                for i in (j + 1)..=row_end {
                    let m = self.ab[self.idx(i, j)];
                    x[i] -= m * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let xj = x[j] / self.ab[self.idx(j, j)];
            x[j] = xj;
            if xj.norm_sqr() != 0.0 {
                let i_lo = j.saturating_sub(self.ku_work);
                for i in i_lo..j {
                    let u = self.ab[self.idx(i, j)];
                    x[i] -= u * xj;
                }
            }
        }
        Ok(x)
    }
}

/// Cholesky factorization `A = L L*` of a banded Hermitian positive-definite
/// matrix, stored as the lower-triangular band `L`.
///
/// Entry `(i, j)` of `L` (for `j <= i <= j + kl`) lives at
/// `lfac[j * (kl + 1) + (i - j)]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kl: usize,
    lfac: Vec<Complex64>,
}

impl BandedCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: a.n_rows(),
                got: a.n_cols(),
            });
        }
        let n = a.n_rows();
        if n == 0 {
            return Err(Error::invalid("cannot factor an empty matrix"));
        }
        let mut kl = 0usize;
        for (i, j, _) in a.entries() {
            if i > j {
                kl = kl.max(i - j);
            }
        }
        let ld = kl + 1;
        let mut lfac = vec![Complex64::new(0.0, 0.0); ld * n];
        // Seed with the lower triangle of A; the upper triangle is implied.
        for (i, j, v) in a.entries() {
            if i >= j && i - j <= kl {
                lfac[j * ld + (i - j)] = v;
            }
        }
        for j in 0..n {
            let mut diag = lfac[j * ld];
            let k_lo = j.saturating_sub(kl);
            for k in k_lo..j {
                let ljk = lfac[k * ld + (j - k)];
                diag -= ljk * ljk.conj();
            }
            if !(diag.re > 0.0) || diag.im.abs() > 1e-10 * diag.re.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::SolverFailure {
                    residual: diag.norm(),
                    shift: None,
                });
            }
            let ljj = diag.re.sqrt();
            lfac[j * ld] = Complex64::new(ljj, 0.0);
            let row_end = (j + kl).min(n - 1);
            for i in (j + 1)..=row_end {
                let mut v = lfac[j * ld + (i - j)];
                let k_lo = i.saturating_sub(kl);
                for k in k_lo..j {
                    let lik = lfac[k * ld + (i - k)];
                    let ljk = lfac[k * ld + (j - k)];
                    v -= lik * ljk.conj();
                }
                lfac[j * ld + (i - j)] = v / ljj;
            }
        }
        Ok(BandedCholesky { n, kl, lfac })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `L* v`, whose Euclidean norm equals the `A`-energy norm of `v`.
    pub fn adjoint_apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let ld = self.kl + 1;
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for j in 0..self.n {
            let row_end = (j + self.kl).min(self.n - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in j..=row_end {
                acc += self.lfac[j * ld + (i - j)].conj() * v[i];
            }
            out[j] = acc;
        }
        Ok(out)
    }
}
