use num_complex::Complex64;

use crate::error::{Error, Result};

/// Polynomial in the shifted variable `w = z - center`:
/// `q(z) = sum_k coeffs[k] * (z - center)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedPolynomial {
    center: Complex64,
    coeffs: Vec<Complex64>,
}

impl ShiftedPolynomial {
    pub fn new(center: Complex64, coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "polynomial needs at least one coefficient");
        ShiftedPolynomial { center, coeffs }
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Nominal degree (length - 1), ignoring trailing zeros.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation at a global point `z`.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let w = z - self.center;
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc
    }

    /// Value and derivative at local coordinate `w`.
    fn eval_local_with_derivative(&self, w: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * w + p;
            p = p * w + c;
        }
        (p, dp)
    }
}

/// All roots of `q`, found by Aberth–Ehrlich simultaneous iteration in the
/// shifted variable, returned in global coordinates sorted by distance from
/// the center.
///
/// Trailing coefficients at or below `1e-14` of the largest magnitude are
/// treated as zero; the effective degree after trimming must be at least one.
pub fn poly_roots(q: &ShiftedPolynomial) -> Result<Vec<Complex64>> {
    let max_mag = q.max_coeff_norm();
    if max_mag == 0.0 {
        return Err(Error::DegeneratePolynomial);
    }
    let trim = 1e-14 * max_mag;
    let mut coeffs = q.coeffs().to_vec();
    while coeffs.len() > 1 && coeffs.last().unwrap().norm() <= trim {
        coeffs.pop();
    }
    let d = coeffs.len() - 1;
    if d == 0 {
        return Err(Error::DegeneratePolynomial);
    }

    let trimmed = ShiftedPolynomial::new(q.center(), coeffs.clone());
    let mut roots_local = if d == 1 {
        vec![-coeffs[0] / coeffs[1]]
    } else {
        aberth(&trimmed, &coeffs)
    };

    // Residual safety net: every root must evaluate to numerical zero on the
    // scale of the coefficients.
    let mut worst = 0.0f64;
    for &w in &roots_local {
        let (p, _) = trimmed.eval_local_with_derivative(w);
        let scale: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm() * w.norm().max(1.0).powi(k as i32))
            .sum();
        worst = worst.max(p.norm() / scale);
    }
    if worst > 1e-10 {
        return Err(Error::SolverFailure {
            residual: worst,
            shift: None,
        });
    }

    roots_local.sort_by(|a, b| {
        a.norm()
            .total_cmp(&b.norm())
            .then(a.arg().total_cmp(&b.arg()))
    });
    Ok(roots_local.iter().map(|&w| q.center() + w).collect())
}

fn aberth(poly: &ShiftedPolynomial, coeffs: &[Complex64]) -> Vec<Complex64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d].norm();
    let balance = coeffs[..d]
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(k, c)| (c.norm() / lead).powf(1.0 / (d - k) as f64))
        .fold(0.0f64, f64::max);
    let radius = balance.max(1.0);

    let mut w: Vec<Complex64> = (0..d)
        .map(|j| {
            let angle = 2.0 * std::f64::consts::PI * j as f64 / d as f64 + 0.4;
            radius * Complex64::new(angle.cos(), angle.sin())
        })
        .collect();

    for _iter in 0..200 {
        let mut max_step = 0.0f64;
        for k in 0..d {
            let (p, dp) = poly.eval_local_with_derivative(w[k]);
            if p.norm() == 0.0 {
                continue;
            }
            if dp.norm() == 0.0 {
                // Stationary point: nudge off it deterministically.
                w[k] += Complex64::new(1e-6 * radius, 1e-6 * radius);
                max_step = f64::INFINITY;
                continue;
            }
            let newton = p / dp;
            let mut repulsion = Complex64::new(0.0, 0.0);
            for j in 0..d {
                if j != k {
                    let diff = w[k] - w[j];
                    if diff.norm() == 0.0 {
                        continue;
                    }
                    repulsion += Complex64::new(1.0, 0.0) / diff;
                }
            }
            let denom = Complex64::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() < 1e-300 {
                newton
            } else {
                newton / denom
            };
            w[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + w[k].norm()));
        }
        if max_step <= 1e-12 {
            break;
        }
    }

    // A short Newton polish tightens residuals after the collective phase.
    for wk in w.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = poly.eval_local_with_derivative(*wk);
            if p.norm() == 0.0 || dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            let candidate = *wk - step;
            let (p_new, _) = poly.eval_local_with_derivative(candidate);
            if p_new.norm() < p.norm() {
                *wk = candidate;
            } else {
                break;
            }
        }
    }
    w
}
