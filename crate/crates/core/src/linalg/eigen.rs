use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense Hermitian matrix, row-major. Hermitian symmetry is validated on
/// construction to `1e-12` relative to the largest entry.
#[derive(Debug, Clone)]
pub struct DenseHermitian {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseHermitian {
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        let scale = data.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in i..n {
                let diff = (data[i * n + j] - data[j * n + i].conj()).norm();
                if diff > tol {
                    return Err(Error::invalid(format!(
                        "matrix is not Hermitian: entry ({i}, {j}) asymmetry {diff:.3e}"
                    )));
                }
            }
        }
        Ok(DenseHermitian { n, data })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> Complex64) -> Result<Self> {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        Self::new(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `v* G v` for a coefficient vector `v`.
    pub fn quadratic_form(&self, v: &[Complex64]) -> Result<Complex64> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                acc += v[i].conj() * self.get(i, j) * v[j];
            }
        }
        Ok(acc)
    }
}

/// Full spectrum of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<Complex64>>,
}

/// Smallest eigenpair plus the gap to the next eigenvalue.
#[derive(Debug, Clone)]
pub struct SmallestEigpair {
    pub value: f64,
    pub vector: Vec<Complex64>,
    /// `values[1] - values[0]`; infinite for 1x1 input.
    pub gap: f64,
}

/// Cyclic Jacobi diagonalization for complex Hermitian matrices.
///
/// Matrices here are small (denominator degree plus one), so quadratic sweeps
/// are cheap; iteration stops once the off-diagonal Frobenius norm falls below
/// `1e-14` of the matrix norm.
pub fn eigh(g: &DenseHermitian) -> HermitianEigen {
    let n = g.n;
    let mut a = g.data.clone();
    // Work on the exactly Hermitian average to keep diagonals real.
    for i in 0..n {
        for j in 0..n {
            let sym = 0.5 * (a[i * n + j] + a[j * n + i].conj());
            a[i * n + j] = sym;
            a[j * n + i] = sym.conj();
        }
        a[i * n + i] = Complex64::new(a[i * n + i].re, 0.0);
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let fro = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let target = 1e-14 * fro;

    let off_norm = |a: &[Complex64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    if fro > 0.0 {
        for _sweep in 0..60 {
            if off_norm(&a) <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let h = a[p * n + q];
                    let habs = h.norm();
                    if habs == 0.0 {
                        continue;
                    }
                    let phase = h / habs;
                    let app = a[p * n + p].re;
                    let aqq = a[q * n + q].re;
                    let tau = (app - aqq) / (2.0 * habs);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let s_back = s * phase.conj();
                    let s_fwd = s * phase;

                    // Right multiplication by the rotation: mix columns p, q.
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp + s_back * akq;
                        a[k * n + q] = -s_fwd * akp + c * akq;
                    }
                    // Left multiplication by its adjoint: mix rows p, q.
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk + s_fwd * aqk;
                        a[q * n + k] = -s_back * apk + c * aqk;
                    }
                    a[p * n + q] = Complex64::new(0.0, 0.0);
                    a[q * n + p] = Complex64::new(0.0, 0.0);
                    a[p * n + p] = Complex64::new(a[p * n + p].re, 0.0);
                    a[q * n + q] = Complex64::new(a[q * n + q].re, 0.0);

                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp + s_back * vkq;
                        v[k * n + q] = -s_fwd * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    HermitianEigen { values, vectors }
}

/// Rotates a vector's global phase so its first largest-magnitude component
/// is real and non-negative.
pub fn fix_phase(v: &mut [Complex64]) {
    let mut k = 0;
    let mut best = 0.0f64;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best {
            best = m;
            k = i;
        }
    }
    if best == 0.0 {
        return;
    }
    let phase = v[k] / best;
    let rot = phase.conj();
    for z in v.iter_mut() {
        *z *= rot;
    }
    v[k] = Complex64::new(v[k].norm(), 0.0);
}

/// Smallest eigenpair of a Hermitian matrix with the spectral gap attached;
/// the eigenvector phase follows [`fix_phase`].
pub fn hermitian_smallest_eigpair(g: &DenseHermitian) -> SmallestEigpair {
    let eig = eigh(g);
    let mut vector = eig.vectors[0].clone();
    fix_phase(&mut vector);
    let gap = if eig.values.len() > 1 {
        eig.values[1] - eig.values[0]
    } else {
        f64::INFINITY
    };
    SmallestEigpair {
        value: eig.values[0],
        vector,
        gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let g = DenseHermitian::from_fn(2, |i, j| {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap();
        let pair = hermitian_smallest_eigpair(&g);
        assert!((pair.value - 1.0).abs() < 1e-15);
        let norm: f64 = pair.vector.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_selects_smallest() {
        let g = DenseHermitian::new(
            2,
            vec![c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let pair = hermitian_smallest_eigpair(&g);
        assert!(pair.value.abs() < 1e-15);
        assert!((pair.vector[1].re - 1.0).abs() < 1e-14);
        assert!(pair.vector[0].norm() < 1e-14);
        assert!((pair.gap - 2.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_complex_pair() {
        // [[2, i], [-i, 2]] has eigenvalues {1, 3}; the small one carries
        // eigenvector (-i, 1)/sqrt(2) up to phase.
        let g = DenseHermitian::new(
            2,
            vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)],
        )
        .unwrap();
        let pair = hermitian_smallest_eigpair(&g);
        assert!((pair.value - 1.0).abs() < 1e-13);
        // Check the eigen-equation instead of a fixed phase.
        let gv0 = g.get(0, 0) * pair.vector[0] + g.get(0, 1) * pair.vector[1];
        let gv1 = g.get(1, 0) * pair.vector[0] + g.get(1, 1) * pair.vector[1];
        assert!((gv0 - pair.vector[0]).norm() < 1e-13);
        assert!((gv1 - pair.vector[1]).norm() < 1e-13);
        // Phase convention: first largest-magnitude entry real non-negative.
        assert!(pair.vector[0].im.abs() < 1e-14);
        assert!(pair.vector[0].re >= 0.0);
    }

    #[test]
    fn residual_meets_quality_bound() {
        // Deterministic dense Hermitian of moderate size.
        let n = 8;
        let mut state = 1234567u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let mut data = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            data[i * n + i] = c(next() * 4.0, 0.0);
            for j in (i + 1)..n {
                let z = c(next(), next());
                data[i * n + j] = z;
                data[j * n + i] = z.conj();
            }
        }
        let g = DenseHermitian::new(n, data).unwrap();
        let eig = eigh(&g);
        let fro = g.frobenius_norm();
        for (val, vec) in eig.values.iter().zip(&eig.vectors) {
            let mut res = 0.0f64;
            for i in 0..n {
                let mut gv = c(0.0, 0.0);
                for j in 0..n {
                    gv += g.get(i, j) * vec[j];
                }
                res += (gv - val * vec[i]).norm_sqr();
            }
            assert!(res.sqrt() <= 1e-12 * fro, "residual {res:.3e} too large");
        }
        // Eigenvalues ascending.
        for w in eig.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn rejects_non_hermitian() {
        let r = DenseHermitian::new(
            2,
            vec![c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn one_by_one_matrix() {
        let g = DenseHermitian::new(1, vec![c(3.5, 0.0)]).unwrap();
        let pair = hermitian_smallest_eigpair(&g);
        assert_eq!(pair.value, 3.5);
        assert_eq!(pair.vector[0], c(1.0, 0.0));
        assert!(pair.gap.is_infinite());
    }

    #[test]
    fn smallest_eigpair_minimizes_the_rayleigh_quotient() {
        let n = 5usize;
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        // Random Gram matrix A* A, Hermitian positive semidefinite.
        let mut a = vec![c(0.0, 0.0); n * n];
        for entry in a.iter_mut() {
            *entry = c(next(), next());
        }
        let mut data = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = c(0.0, 0.0);
                for k in 0..n {
                    s += a[k * n + i].conj() * a[k * n + j];
                }
                data[i * n + j] = s;
            }
        }
        for i in 0..n {
            for j in 0..i {
                let sym = 0.5 * (data[i * n + j] + data[j * n + i].conj());
                data[i * n + j] = sym;
                data[j * n + i] = sym.conj();
            }
            let d = data[i * n + i];
            data[i * n + i] = c(d.re, 0.0);
        }
        let g = DenseHermitian::new(n, data).unwrap();
        let pair = hermitian_smallest_eigpair(&g);
        let rayleigh = g.quadratic_form(&pair.vector).unwrap().re;
        let scale = g.frobenius_norm().max(1e-300);
        assert!((rayleigh - pair.value).abs() <= 1e-12 * scale);
        for trial in 0..100 {
            let mut v: Vec<Complex64> = (0..n).map(|_| c(next(), next())).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in &mut v {
                *z /= norm;
            }
            let quad = g.quadratic_form(&v).unwrap().re;
            assert!(
                pair.value <= quad + 1e-12 * scale,
                "trial {trial}: quotient {quad:.6e} beat the reported minimum {:.6e}",
                pair.value
            );
        }
    }
}
