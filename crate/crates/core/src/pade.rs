//! Least-squares rational surrogate of a frequency-response map.
//!
//! From Taylor coefficients `S_0..S_E` of the map at `z0`, the builder
//! assembles the weighted Gramian of shifted coefficients, takes its
//! smallest eigenvector as the unit-norm denominator, convolves it with the
//! Taylor data to get the vector-valued numerator, and exposes evaluation,
//! pole extraction, and the residual functional used by the fit.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    fix_phase, hermitian_smallest_eigpair, poly_roots, DenseHermitian, ShiftedPolynomial,
};
use crate::response::ResponseMap;
use crate::space::{fresh_space_id, SpaceVector, WeightedSpace};

/// Relative threshold below which an evaluated denominator counts as a
/// surrogate pole.
const POLE_THRESHOLD: f64 = 1e-13;

/// Relative spectral-gap threshold below which the denominator choice is
/// reported as degenerate.
const DEGENERATE_GAP: f64 = 1e-12;

/// Degrees, data budget, and weighting of one surrogate build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PadeConfig {
    /// Numerator degree M.
    pub numerator_degree: usize,
    /// Denominator degree N.
    pub denominator_degree: usize,
    /// Highest Taylor order E entering the fit.
    pub budget: usize,
    /// Radius rho weighting the residual terms.
    pub radius: f64,
    /// Expansion center z0.
    pub center: Complex64,
}

impl PadeConfig {
    pub fn new(
        numerator_degree: usize,
        denominator_degree: usize,
        budget: usize,
        radius: f64,
        center: Complex64,
    ) -> Result<Self> {
        if budget < numerator_degree + denominator_degree {
            return Err(Error::invalid(format!(
                "Taylor budget {budget} is below M + N = {}",
                numerator_degree + denominator_degree
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        if !(center.re > 0.0) || !center.re.is_finite() || !center.im.is_finite() {
            return Err(Error::invalid(format!(
                "expansion center must have positive finite real part, got {center}"
            )));
        }
        Ok(PadeConfig {
            numerator_degree,
            denominator_degree,
            budget,
            radius,
            center,
        })
    }

    /// Budget fixed at its minimum E = M + N.
    pub fn with_minimal_budget(
        numerator_degree: usize,
        denominator_degree: usize,
        radius: f64,
        center: Complex64,
    ) -> Result<Self> {
        Self::new(
            numerator_degree,
            denominator_degree,
            numerator_degree + denominator_degree,
            radius,
            center,
        )
    }
}

/// Smallest radius whose disk around `z0` covers the wavenumber interval.
pub fn default_radius(z0: Complex64, k2_min: f64, k2_max: f64) -> f64 {
    (z0 - k2_min).norm().max((z0 - k2_max).norm())
}

/// Taylor coefficients of a response map together with their pairwise
/// weighted inner products, computed once and reused across degree sweeps.
#[derive(Debug, Clone)]
pub struct TaylorTable {
    space: Arc<WeightedSpace>,
    center: Complex64,
    coefficients: Vec<SpaceVector>,
    /// `products[a][b]` = inner(S_a, S_b) for b <= a; the upper triangle
    /// follows by conjugation.
    products: Vec<Vec<Complex64>>,
}

impl TaylorTable {
    pub fn from_map(map: &dyn ResponseMap, budget: usize) -> Result<Self> {
        let coefficients: Vec<SpaceVector> = (0..=budget)
            .map(|beta| map.taylor(beta))
            .collect::<Result<_>>()?;
        Self::new(map.space().clone(), map.center(), coefficients)
    }

    pub fn new(
        space: Arc<WeightedSpace>,
        center: Complex64,
        coefficients: Vec<SpaceVector>,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("a Taylor table needs at least order zero"));
        }
        let mut products = Vec::with_capacity(coefficients.len());
        for a in 0..coefficients.len() {
            let mut row = Vec::with_capacity(a + 1);
            for b in 0..=a {
                row.push(space.inner(&coefficients[a], &coefficients[b])?);
            }
            products.push(row);
        }
        Ok(TaylorTable {
            space,
            center,
            coefficients,
            products,
        })
    }

    pub fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    /// Highest available Taylor order.
    pub fn budget(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[SpaceVector] {
        &self.coefficients
    }

    pub fn coefficient(&self, beta: usize) -> Result<&SpaceVector> {
        self.coefficients.get(beta).ok_or(Error::DimensionMismatch {
            expected: self.coefficients.len(),
            got: beta,
        })
    }

    /// Weighted inner product of coefficients `a` and `b`.
    fn product(&self, a: usize, b: usize) -> Complex64 {
        if b <= a {
            self.products[a][b]
        } else {
            self.products[b][a].conj()
        }
    }

    /// Degree-`m` Taylor partial sum evaluated at `z` by Horner recursion.
    pub fn partial_sum(&self, z: Complex64, m: usize) -> Result<SpaceVector> {
        if m > self.budget() {
            return Err(Error::DimensionMismatch {
                expected: self.budget(),
                got: m,
            });
        }
        Ok(horner(&self.coefficients[..=m], z - self.center))
    }

    fn check_config(&self, cfg: &PadeConfig) -> Result<()> {
        if cfg.budget > self.budget() {
            return Err(Error::DimensionMismatch {
                expected: cfg.budget,
                got: self.budget(),
            });
        }
        if cfg.center != self.center {
            return Err(Error::invalid(format!(
                "configured center {} differs from the table center {}",
                cfg.center, self.center
            )));
        }
        Ok(())
    }
}

fn horner(coefficients: &[SpaceVector], w: Complex64) -> SpaceVector {
    let last = coefficients.len() - 1;
    let mut acc = coefficients[last].clone();
    for c in coefficients[..last].iter().rev() {
        acc.scale(w);
        acc.axpy(Complex64::new(1.0, 0.0), c);
    }
    acc
}

/// Weighted Gramian of shifted Taylor coefficients:
/// entry (i, j) is the sum over orders `alpha = M+1..E` of
/// `inner(S_{alpha-j}, S_{alpha-i}) rho^(2 alpha)`, with `S_gamma = 0` for
/// negative `gamma`. The result is symmetrized to machine-Hermitian.
pub fn build_gramian(table: &TaylorTable, cfg: &PadeConfig) -> Result<DenseHermitian> {
    table.check_config(cfg)?;
    let m = cfg.numerator_degree;
    let e = cfg.budget;
    if e < m + 1 {
        return Err(Error::EmptyGramianSum { m, e });
    }
    let n = cfg.denominator_degree;
    let rho_sq = cfg.radius * cfg.radius;
    let mut data = vec![Complex64::new(0.0, 0.0); (n + 1) * (n + 1)];
    for alpha in (m + 1)..=e {
        let weight = rho_sq.powi(alpha as i32);
        for i in 0..=n {
            if alpha < i {
                continue;
            }
            for j in 0..=n {
                if alpha < j {
                    continue;
                }
                data[i * (n + 1) + j] += table.product(alpha - j, alpha - i) * weight;
            }
        }
    }
    for i in 0..=n {
        for j in 0..i {
            let sym = 0.5 * (data[i * (n + 1) + j] + data[j * (n + 1) + i].conj());
            data[i * (n + 1) + j] = sym;
            data[j * (n + 1) + i] = sym.conj();
        }
        let d = data[i * (n + 1) + i];
        data[i * (n + 1) + i] = Complex64::new(d.re, 0.0);
    }
    DenseHermitian::new(n + 1, data)
}

/// Spectral context of the denominator choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenominatorDiagnostics {
    /// Smallest Gramian eigenvalue (the minimal squared residual).
    pub lambda_min: f64,
    /// Gap to the next eigenvalue; infinite when there is no next one.
    #[serde(with = "extended_real")]
    pub spectral_gap: f64,
    /// Frobenius norm of the Gramian, the scale the gap is judged against.
    pub gramian_norm: f64,
    /// Set when the gap falls below 1e-12 of the Gramian norm, signalling
    /// a near-tie between candidate denominators.
    pub degenerate: bool,
}

/// Serializes a nonnegative float that may be infinite; JSON has no
/// infinity literal, so the infinite case becomes `null`.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_some(x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Unit-norm denominator from the smallest Gramian eigenpair, with the
/// phase convention fixed by the eigensolver.
pub fn compute_denominator(
    gramian: &DenseHermitian,
    center: Complex64,
) -> Result<(ShiftedPolynomial, DenominatorDiagnostics)> {
    let pair = hermitian_smallest_eigpair(gramian);
    let gramian_norm = gramian.frobenius_norm();
    let diagnostics = DenominatorDiagnostics {
        lambda_min: pair.value,
        spectral_gap: pair.gap,
        gramian_norm,
        degenerate: pair.gap < DEGENERATE_GAP * gramian_norm,
    };
    Ok((ShiftedPolynomial::new(center, pair.vector), diagnostics))
}

/// Unit-norm denominator from a square-root factorization of the Gramian:
/// the coordinate images of `rho^alpha S_{alpha-n}` are stacked into a tall
/// matrix `X` with one column per denominator coefficient, so that
/// `X* X` equals the Gramian, and the denominator is the right singular
/// vector of the smallest singular value of `X`. The minimizer agrees with
/// [`compute_denominator`] in exact arithmetic, but small singular values
/// of `X` remain resolvable in floating point where the corresponding
/// Gramian eigenvalues drown in roundoff from the squared dynamic range.
pub fn denominator_from_snapshots(
    table: &TaylorTable,
    cfg: &PadeConfig,
) -> Result<(ShiftedPolynomial, DenominatorDiagnostics)> {
    table.check_config(cfg)?;
    let m = cfg.numerator_degree;
    let e = cfg.budget;
    if e < m + 1 {
        return Err(Error::EmptyGramianSum { m, e });
    }
    let n = cfg.denominator_degree;
    let space = table.space();
    let dim = space.dim();
    let rows = (e - m) * dim;
    let mut coords: Vec<Option<Vec<Complex64>>> = vec![None; e + 1];
    let mut columns = vec![vec![Complex64::new(0.0, 0.0); rows]; n + 1];
    for (block, alpha) in ((m + 1)..=e).enumerate() {
        let weight = cfg.radius.powi(alpha as i32);
        for (col, column) in columns.iter_mut().enumerate() {
            if col > alpha {
                continue;
            }
            let order = alpha - col;
            if coords[order].is_none() {
                coords[order] = Some(space.norm_coordinates(table.coefficient(order)?)?);
            }
            let src = coords[order].as_ref().unwrap();
            for (dst, y) in column[block * dim..(block + 1) * dim].iter_mut().zip(src) {
                *dst = *y * weight;
            }
        }
    }
    let (sigmas, basis) = orthogonalize_columns(&mut columns);
    let mut order: Vec<usize> = (0..sigmas.len()).collect();
    order.sort_by(|&a, &b| sigmas[a].total_cmp(&sigmas[b]));
    let smallest = order[0];
    let lambda_min = sigmas[smallest] * sigmas[smallest];
    let spectral_gap = if sigmas.len() == 1 {
        f64::INFINITY
    } else {
        sigmas[order[1]] * sigmas[order[1]] - lambda_min
    };
    let gramian_norm = sigmas.iter().map(|s| s.powi(4)).sum::<f64>().sqrt();
    let diagnostics = DenominatorDiagnostics {
        lambda_min,
        spectral_gap,
        gramian_norm,
        degenerate: spectral_gap < DEGENERATE_GAP * gramian_norm,
    };
    let mut q = basis[smallest].clone();
    let scale = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if scale > 0.0 {
        for z in &mut q {
            *z /= scale;
        }
    }
    fix_phase(&mut q);
    Ok((ShiftedPolynomial::new(cfg.center, q), diagnostics))
}

/// One-sided Jacobi orthogonalization of the given columns, accumulating
/// the applied rotations. Returns the final column norms (the singular
/// values, unsorted) and the accumulated right-hand basis whose `k`-th
/// entry is the unit right singular vector paired with the `k`-th norm.
fn orthogonalize_columns(columns: &mut [Vec<Complex64>]) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    const MAX_SWEEPS: usize = 60;
    let k = columns.len();
    let mut basis: Vec<Vec<Complex64>> = (0..k)
        .map(|j| {
            let mut e = vec![Complex64::new(0.0, 0.0); k];
            e[j] = Complex64::new(1.0, 0.0);
            e
        })
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = Complex64::new(0.0, 0.0);
                for (xp, xq) in columns[p].iter().zip(columns[q].iter()) {
                    app += xp.norm_sqr();
                    aqq += xq.norm_sqr();
                    apq += xp.conj() * *xq;
                }
                let mag = apq.norm();
                if mag <= 1e-15 * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = apq / mag;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_fwd = phase * (c * t);
                let (left, right) = columns.split_at_mut(q);
                rotate_pair(&mut left[p], &mut right[0], c, s_fwd);
                let (bleft, bright) = basis.split_at_mut(q);
                rotate_pair(&mut bleft[p], &mut bright[0], c, s_fwd);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigmas: Vec<f64> = columns
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    (sigmas, basis)
}

/// Applies the unitary column rotation `[c, s; -conj(s), c]` to the pair
/// `(x, y)`, chosen by the caller to annihilate their mutual inner product.
fn rotate_pair(x: &mut [Complex64], y: &mut [Complex64], c: f64, s: Complex64) {
    let s_conj = s.conj();
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let new_x = *xi * c - *yi * s_conj;
        let new_y = *xi * s + *yi * c;
        *xi = new_x;
        *yi = new_y;
    }
}

/// Numerator coefficients `p_alpha = sum_n q_n S_{alpha-n}` for
/// `alpha = 0..M`, the convolution that matches the surrogate's Taylor
/// expansion to the data through order M.
pub fn compute_numerator(
    table: &TaylorTable,
    q: &ShiftedPolynomial,
    cfg: &PadeConfig,
) -> Result<Vec<SpaceVector>> {
    table.check_config(cfg)?;
    if q.coeffs().len() != cfg.denominator_degree + 1 {
        return Err(Error::DimensionMismatch {
            expected: cfg.denominator_degree + 1,
            got: q.coeffs().len(),
        });
    }
    let mut numerator = Vec::with_capacity(cfg.numerator_degree + 1);
    for alpha in 0..=cfg.numerator_degree {
        let mut p = table.space.zero_vector();
        for (n, &qn) in q.coeffs().iter().enumerate().take(alpha + 1) {
            p.axpy(qn, &table.coefficients[alpha - n]);
        }
        numerator.push(p);
    }
    Ok(numerator)
}

/// Residual functional of a candidate denominator, computed directly as
/// `(sum_{alpha=M+1..E} norm(sum_n q_n S_{alpha-n})^2 rho^(2 alpha))^(1/2)`
/// without going through the Gramian.
pub fn jbar(table: &TaylorTable, q: &ShiftedPolynomial, cfg: &PadeConfig) -> Result<f64> {
    table.check_config(cfg)?;
    let rho_sq = cfg.radius * cfg.radius;
    let mut sum = 0.0;
    for alpha in (cfg.numerator_degree + 1)..=cfg.budget {
        let mut v = table.space.zero_vector();
        for (n, &qn) in q.coeffs().iter().enumerate() {
            if n > alpha {
                break;
            }
            v.axpy(qn, &table.coefficients[alpha - n]);
        }
        let norm = table.space.norm(&v)?;
        sum += norm * norm * rho_sq.powi(alpha as i32);
    }
    Ok(sum.sqrt())
}

/// Heuristic convergence-rate predictor
/// `(|z - z0| / |z0 - lambda_(N+1)|)^(M+1)` where `lambda_(N+1)` is the
/// (N+1)-th pole by distance from the center; used for plot reference
/// slopes only.
pub fn heuristic_rate(
    z: Complex64,
    z0: Complex64,
    poles: &[f64],
    m: usize,
    n: usize,
) -> Result<f64> {
    if poles.len() < n + 1 {
        return Err(Error::invalid(format!(
            "rate heuristic needs at least {} poles, got {}",
            n + 1,
            poles.len()
        )));
    }
    let mut distances: Vec<f64> = poles.iter().map(|&p| (z0 - p).norm()).collect();
    distances.sort_by(f64::total_cmp);
    let reference = distances[n];
    if reference == 0.0 {
        return Err(Error::PoleAtCenter { pole: f64::NAN });
    }
    Ok(((z - z0).norm() / reference).powi(m as i32 + 1))
}

/// Rational surrogate `P(z) / Q(z)` with vector numerator coefficients and
/// a unit-norm scalar denominator, both in powers of `z - z0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PadeApproximant {
    config: PadeConfig,
    numerator: Vec<SpaceVector>,
    denominator: ShiftedPolynomial,
    diagnostics: DenominatorDiagnostics,
    jbar_value: f64,
}

impl PadeApproximant {
    pub fn from_map(map: &dyn ResponseMap, cfg: &PadeConfig) -> Result<Self> {
        let table = TaylorTable::from_map(map, cfg.budget)?;
        Self::from_table(&table, cfg)
    }

    pub fn from_table(table: &TaylorTable, cfg: &PadeConfig) -> Result<Self> {
        table.check_config(cfg)?;
        let (denominator, diagnostics) = if cfg.denominator_degree == 0
            && cfg.budget == cfg.numerator_degree
        {
            // No residual orders exist, so any unimodular constant is
            // optimal; pick exactly one for reproducibility.
            let q = ShiftedPolynomial::new(cfg.center, vec![Complex64::new(1.0, 0.0)]);
            let diagnostics = DenominatorDiagnostics {
                lambda_min: 0.0,
                spectral_gap: f64::INFINITY,
                gramian_norm: 0.0,
                degenerate: false,
            };
            (q, diagnostics)
        } else {
            denominator_from_snapshots(table, cfg)?
        };
        let numerator = compute_numerator(table, &denominator, cfg)?;
        let jbar_value = jbar(table, &denominator, cfg)?;
        Ok(PadeApproximant {
            config: *cfg,
            numerator,
            denominator,
            diagnostics,
            jbar_value,
        })
    }

    pub fn config(&self) -> &PadeConfig {
        &self.config
    }

    pub fn center(&self) -> Complex64 {
        self.config.center
    }

    pub fn numerator(&self) -> &[SpaceVector] {
        &self.numerator
    }

    pub fn denominator(&self) -> &ShiftedPolynomial {
        &self.denominator
    }

    pub fn diagnostics(&self) -> &DenominatorDiagnostics {
        &self.diagnostics
    }

    /// Value of the residual functional at the chosen denominator.
    pub fn residual(&self) -> f64 {
        self.jbar_value
    }

    /// Rational evaluation `P(z) / Q(z)` by Horner recursion in `z - z0`.
    pub fn evaluate(&self, z: Complex64) -> Result<SpaceVector> {
        let qz = self.denominator.eval(z);
        if qz.norm() <= POLE_THRESHOLD * self.denominator.max_coeff_norm() {
            return Err(Error::NearPole { qmag: qz.norm() });
        }
        let mut acc = horner(&self.numerator, z - self.center());
        acc.scale(Complex64::new(1.0, 0.0) / qz);
        Ok(acc)
    }

    /// All denominator roots, sorted by distance from the center. An
    /// effectively constant denominator has none.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        match poly_roots(&self.denominator) {
            Ok(roots) => Ok(roots),
            Err(Error::DegeneratePolynomial) if self.leading_coeffs_vanish() => Ok(Vec::new()),
            Err(e) => Err(e),
        }
    }

    fn leading_coeffs_vanish(&self) -> bool {
        let scale = self.denominator.max_coeff_norm();
        self.denominator
            .coeffs()
            .iter()
            .skip(1)
            .all(|c| c.norm() <= 1e-14 * scale)
    }

    /// Roots plausible as physical resonances for an interval of interest:
    /// imaginary part at most 1 and real part inside the interval dilated
    /// to twice its width about its midpoint.
    pub fn physical_poles(&self, k2_min: f64, k2_max: f64) -> Result<Vec<Complex64>> {
        let mid = 0.5 * (k2_min + k2_max);
        let half = k2_max - k2_min;
        Ok(self
            .poles()?
            .into_iter()
            .filter(|r| r.im.abs() <= 1.0 && (r.re - mid).abs() <= half)
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PadeDocument::from(self);
        serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::invalid(format!("serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PadeDocument =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("bad document: {e}")))?;
        doc.try_into()
    }
}

/// Stable on-disk form: plain coefficient arrays, no session-local state.
#[derive(Serialize, Deserialize)]
struct PadeDocument {
    schema: u32,
    config: PadeConfig,
    numerator: Vec<Vec<Complex64>>,
    denominator: Vec<Complex64>,
    diagnostics: DenominatorDiagnostics,
    residual: f64,
}

const PADE_SCHEMA: u32 = 1;

impl From<&PadeApproximant> for PadeDocument {
    fn from(a: &PadeApproximant) -> Self {
        PadeDocument {
            schema: PADE_SCHEMA,
            config: a.config,
            numerator: a
                .numerator
                .iter()
                .map(|p| p.values().to_vec())
                .collect(),
            denominator: a.denominator.coeffs().to_vec(),
            diagnostics: a.diagnostics,
            residual: a.jbar_value,
        }
    }
}

impl TryFrom<PadeDocument> for PadeApproximant {
    type Error = Error;

    fn try_from(doc: PadeDocument) -> Result<Self> {
        if doc.schema != PADE_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported document schema {}",
                doc.schema
            )));
        }
        if doc.numerator.len() != doc.config.numerator_degree + 1 {
            return Err(Error::DimensionMismatch {
                expected: doc.config.numerator_degree + 1,
                got: doc.numerator.len(),
            });
        }
        if doc.denominator.len() != doc.config.denominator_degree + 1 {
            return Err(Error::DimensionMismatch {
                expected: doc.config.denominator_degree + 1,
                got: doc.denominator.len(),
            });
        }
        let dim = doc.numerator.first().map(Vec::len).unwrap_or(0);
        if doc.numerator.iter().any(|p| p.len() != dim) {
            return Err(Error::invalid("numerator coefficients differ in length"));
        }
        let space_id = fresh_space_id();
        Ok(PadeApproximant {
            config: doc.config,
            numerator: doc
                .numerator
                .into_iter()
                .map(|values| SpaceVector::from_raw(space_id, values))
                .collect(),
            denominator: ShiftedPolynomial::new(doc.config.center, doc.denominator),
            diagnostics: doc.diagnostics,
            jbar_value: doc.residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::response::modal::{ModalResponseMap, ModalTerm};
    use crate::space::WeightedSpace;
    use crate::stochastic::CounterRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_space(dim: usize) -> Arc<WeightedSpace> {
        WeightedSpace::dirichlet_interval(0.0, 1.0, dim + 1, 1.0).unwrap()
    }

    fn basis(space: &Arc<WeightedSpace>, k: usize) -> SpaceVector {
        let mut values = vec![c(0.0, 0.0); space.dim()];
        values[k] = c(1.0, 0.0);
        space.vector(values).unwrap()
    }

    fn modal_map(
        space: &Arc<WeightedSpace>,
        z0: Complex64,
        data: &[(f64, Complex64)],
    ) -> ModalResponseMap {
        let terms = data
            .iter()
            .enumerate()
            .map(|(k, &(pole, coefficient))| ModalTerm {
                pole,
                coefficient,
                mode: basis(space, k),
            })
            .collect();
        ModalResponseMap::new_load(space.clone(), z0, terms).unwrap()
    }

    fn random_unit_q(rng: &CounterRng, base: u64, len: usize) -> Vec<Complex64> {
        let mut q: Vec<Complex64> = (0..len)
            .map(|k| {
                c(
                    2.0 * rng.uniform_at(base + 2 * k as u64) - 1.0,
                    2.0 * rng.uniform_at(base + 2 * k as u64 + 1) - 1.0,
                )
            })
            .collect();
        let norm = q.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for v in &mut q {
            *v /= norm;
        }
        q
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let z0 = c(10.0, 0.5);
        assert!(PadeConfig::new(3, 2, 4, 1.0, z0).is_err());
        assert!(PadeConfig::new(3, 2, 5, 0.0, z0).is_err());
        assert!(PadeConfig::new(3, 2, 5, 1.0, c(-1.0, 0.5)).is_err());
        assert!(PadeConfig::new(3, 2, 5, 1.0, z0).is_ok());
    }

    #[test]
    fn gramian_matches_single_pole_closed_form() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let lambda = 13.0;
        let map = modal_map(&space, z0, &[(lambda, c(1.0, 0.0))]);
        let cfg = PadeConfig::new(2, 2, 6, 1.5, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let gramian = build_gramian(&table, &cfg).unwrap();

        let phi = basis(&space, 0);
        let phi_sq = {
            let n = space.norm(&phi).unwrap();
            n * n
        };
        let cdist = lambda - z0;
        let rho_sq = cfg.radius * cfg.radius;
        let mut max_entry = 0.0f64;
        let mut max_err = 0.0f64;
        for i in 0..=2usize {
            for j in 0..=2usize {
                let mut expect = c(0.0, 0.0);
                for alpha in 3..=6usize {
                    let a = cdist.powi(-(alpha as i32 - j as i32 + 1));
                    let b = cdist.conj().powi(-(alpha as i32 - i as i32 + 1));
                    expect += rho_sq.powi(alpha as i32) * a * b * phi_sq;
                }
                max_entry = max_entry.max(expect.norm());
                max_err = max_err.max((gramian.get(i, j) - expect).norm());
            }
        }
        assert!(max_err <= 1e-12 * max_entry, "{max_err:.3e} vs {max_entry:.3e}");
    }

    #[test]
    fn gramian_with_single_column_is_the_weighted_norm_sum() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let map = modal_map(&space, z0, &[(13.0, c(2.0, -1.0)), (8.0, c(0.5, 0.25))]);
        let cfg = PadeConfig::new(2, 0, 5, 1.2, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let gramian = build_gramian(&table, &cfg).unwrap();
        let mut expect = 0.0;
        for alpha in 3..=5usize {
            let norm = space.norm(table.coefficient(alpha).unwrap()).unwrap();
            expect += norm * norm * (cfg.radius * cfg.radius).powi(alpha as i32);
        }
        assert_eq!(gramian.n(), 1);
        assert!((gramian.get(0, 0).re - expect).abs() <= 1e-14 * expect);
        assert!(gramian.get(0, 0).im == 0.0);
    }

    #[test]
    fn zero_map_gives_zero_gramian_and_zero_residual() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = modal_map(&space, z0, &[(13.0, c(0.0, 0.0))]);
        let cfg = PadeConfig::new(2, 1, 4, 1.0, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let gramian = build_gramian(&table, &cfg).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(gramian.get(i, j), c(0.0, 0.0));
            }
        }
        let q = ShiftedPolynomial::new(z0, vec![c(0.6, 0.0), c(0.0, 0.8)]);
        assert_eq!(jbar(&table, &q, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn empty_residual_range_is_rejected_by_the_gramian() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = modal_map(&space, z0, &[(13.0, c(1.0, 0.0))]);
        let cfg = PadeConfig::new(4, 0, 4, 1.0, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        match build_gramian(&table, &cfg) {
            Err(Error::EmptyGramianSum { m: 4, e: 4 }) => {}
            other => panic!("expected empty-sum rejection, got {other:?}"),
        }
    }

    #[test]
    fn single_pole_denominator_has_exact_root_and_tiny_residual() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let lambda = 13.0;
        let map = modal_map(&space, z0, &[(lambda, c(1.0, 0.0))]);
        let rho = 0.3 * (lambda - z0).norm();
        let cfg = PadeConfig::new(2, 1, 3, rho, z0).unwrap();
        let approx = PadeApproximant::from_map(&map, &cfg).unwrap();

        let roots = approx.poles().unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - lambda).norm() <= 1e-12);
        assert!(approx.denominator().eval(c(lambda, 0.0)).norm() <= 1e-12);
        assert!(approx.residual() <= 1e-14);
        assert!(
            approx.diagnostics().lambda_min
                <= 1e-14 * approx.diagnostics().gramian_norm.max(f64::MIN_POSITIVE)
        );

        // Numerator coefficients beyond order zero vanish by cancellation.
        for p in &approx.numerator()[1..] {
            assert!(p.max_abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_gramian_reports_a_zero_gap_tie() {
        let gramian = DenseHermitian::from_fn(4, |i, j| {
            if i == j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap();
        let (q, diag) = compute_denominator(&gramian, c(5.0, 0.5)).unwrap();
        let norm_sq: f64 = q.coeffs().iter().map(|v| v.norm_sqr()).sum();
        assert!((norm_sq - 1.0).abs() <= 1e-12);
        assert_eq!(diag.spectral_gap, 0.0);
        assert!(diag.degenerate);
    }

    #[test]
    fn three_pole_roots_are_recovered_and_ordered() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let poles = [8.0, 10.0, 13.0];
        let map = modal_map(
            &space,
            z0,
            &[(8.0, c(1.0, 0.0)), (10.0, c(1.0, 0.0)), (13.0, c(1.0, 0.0))],
        );
        let cfg = PadeConfig::new(10, 3, 13, 3.5, z0).unwrap();
        let approx = PadeApproximant::from_map(&map, &cfg).unwrap();
        let roots = approx.poles().unwrap();
        assert_eq!(roots.len(), 3);
        for r in &roots {
            let best = poles.iter().map(|&p| (r - p).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-6, "root {r} off by {best:.3e}");
        }
        for pair in roots.windows(2) {
            assert!((pair[0] - z0).norm() <= (pair[1] - z0).norm() + 1e-12);
        }
    }

    #[test]
    fn residual_squared_equals_the_gramian_quadratic_form() {
        let space = unit_space(4);
        let z0 = c(10.0, 0.5);
        let map = modal_map(
            &space,
            z0,
            &[
                (8.0, c(1.0, 0.5)),
                (10.0, c(-0.3, 1.0)),
                (13.0, c(2.0, 0.0)),
                (17.0, c(0.1, -0.4)),
            ],
        );
        let cfg = PadeConfig::new(4, 3, 9, 3.5, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let gramian = build_gramian(&table, &cfg).unwrap();
        let rng = CounterRng::new(91);
        for trial in 0..50u64 {
            let q = random_unit_q(&rng, trial * 64, 4);
            let quad = gramian.quadratic_form(&q).unwrap();
            let poly = ShiftedPolynomial::new(z0, q);
            let direct = jbar(&table, &poly, &cfg).unwrap();
            let err = (direct * direct - quad.re).abs();
            assert!(
                err <= 1e-10 * quad.re.abs().max(1e-300),
                "trial {trial}: {err:.3e} vs {:.3e}",
                quad.re
            );
            assert!(quad.im.abs() <= 1e-10 * quad.re.abs());
        }
    }

    #[test]
    fn chosen_denominator_minimizes_the_residual() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let map = modal_map(
            &space,
            z0,
            &[(8.0, c(1.0, 0.0)), (10.0, c(0.7, 0.2)), (13.0, c(1.3, -0.6))],
        );
        let cfg = PadeConfig::new(5, 2, 8, 2.0, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let approx = PadeApproximant::from_table(&table, &cfg).unwrap();
        let best = approx.residual();
        let rng = CounterRng::new(17);
        for trial in 0..100u64 {
            let q = random_unit_q(&rng, trial * 64, 3);
            let poly = ShiftedPolynomial::new(z0, q);
            let candidate = jbar(&table, &poly, &cfg).unwrap();
            assert!(
                best <= candidate * (1.0 + 1e-12),
                "trial {trial}: {best:.6e} > {candidate:.6e}"
            );
        }
    }

    #[test]
    fn numerator_matches_the_convolution_directly() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let map = modal_map(
            &space,
            z0,
            &[(8.0, c(1.0, 0.0)), (11.0, c(0.0, 1.0)), (13.0, c(-0.5, 0.5))],
        );
        let cfg = PadeConfig::new(4, 2, 7, 2.0, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let approx = PadeApproximant::from_table(&table, &cfg).unwrap();
        let q = approx.denominator().coeffs();
        for (alpha, p) in approx.numerator().iter().enumerate() {
            let mut expect = table.space().zero_vector();
            for (n, &qn) in q.iter().enumerate() {
                if n > alpha {
                    break;
                }
                expect.axpy(qn, table.coefficient(alpha - n).unwrap());
            }
            let scale = expect.max_abs().max(1e-300);
            assert!(p.sub(&expect).max_abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn constant_denominator_passes_taylor_through() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = modal_map(&space, z0, &[(13.0, c(1.0, -2.0)), (8.0, c(0.3, 0.0))]);
        let cfg = PadeConfig::new(3, 2, 5, 1.0, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let q = ShiftedPolynomial::new(z0, vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let numerator = compute_numerator(&table, &q, &cfg).unwrap();
        for (alpha, p) in numerator.iter().enumerate() {
            assert_eq!(p.values(), table.coefficient(alpha).unwrap().values());
        }
    }

    #[test]
    fn evaluation_at_the_center_is_the_constant_term_ratio() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = modal_map(&space, z0, &[(13.0, c(1.0, 0.0)), (8.0, c(0.0, 2.0))]);
        let cfg = PadeConfig::new(3, 1, 4, 2.0, z0).unwrap();
        let approx = PadeApproximant::from_map(&map, &cfg).unwrap();
        let at_center = approx.evaluate(z0).unwrap();
        let q0 = approx.denominator().coeffs()[0];
        let expect = approx.numerator()[0].scaled(c(1.0, 0.0) / q0);
        assert!(at_center.sub(&expect).max_abs() <= 1e-15 * expect.max_abs());
    }

    #[test]
    fn modal_evaluation_reaches_expected_accuracy_off_center() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let map = modal_map(
            &space,
            z0,
            &[(8.0, c(1.0, 0.0)), (10.0, c(1.0, 0.0)), (13.0, c(1.0, 0.0))],
        );
        let cfg = PadeConfig::new(10, 3, 13, 3.5, z0).unwrap();
        let approx = PadeApproximant::from_map(&map, &cfg).unwrap();
        let z = c(12.0, 0.0);
        let exact = map.evaluate(z).unwrap();
        let err = approx.evaluate(z).unwrap().sub(&exact).max_abs();
        assert!(err <= 1e-4 * exact.max_abs(), "relative error {err:.3e}");
    }

    #[test]
    fn degree_zero_surrogate_is_exactly_the_partial_sum()
    {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let map = modal_map(
            &space,
            z0,
            &[(8.0, c(1.0, 0.3)), (13.0, c(-0.2, 1.1)), (17.0, c(0.4, 0.0))],
        );
        let m = 5;
        let cfg = PadeConfig::with_minimal_budget(m, 0, 2.5, z0).unwrap();
        let table = TaylorTable::from_map(&map, cfg.budget).unwrap();
        let approx = PadeApproximant::from_table(&table, &cfg).unwrap();
        assert_eq!(approx.denominator().coeffs(), &[c(1.0, 0.0)]);
        assert!(approx.poles().unwrap().is_empty());
        let rng = CounterRng::new(5);
        for k in 0..20u64 {
            let z = z0
                + c(
                    4.0 * rng.uniform_at(2 * k) - 2.0,
                    4.0 * rng.uniform_at(2 * k + 1) - 2.0,
                );
            let via_surrogate = approx.evaluate(z).unwrap();
            let via_taylor = table.partial_sum(z, m).unwrap();
            assert_eq!(via_surrogate, via_taylor);
        }
    }

    #[test]
    fn scaling_the_data_leaves_roots_in_place_and_scales_the_residual() {
        let space = unit_space(3);
        let z0 = c(10.5, 2.0);
        let data = [(8.0, c(1.0, 0.5)), (10.0, c(0.4, -0.2)), (13.0, c(1.5, 0.0))];
        let scale = c(2.0, -3.0);
        let scaled: Vec<(f64, Complex64)> =
            data.iter().map(|&(p, coef)| (p, coef * scale)).collect();
        // Degree 2 against three poles: the minimum is a strict compromise
        // with a positive residual and a clear spectral gap.
        let cfg = PadeConfig::new(6, 2, 8, 3.0, z0).unwrap();
        let ta = TaylorTable::from_map(&modal_map(&space, z0, &data), cfg.budget).unwrap();
        let tb = TaylorTable::from_map(&modal_map(&space, z0, &scaled), cfg.budget).unwrap();
        let ga = build_gramian(&ta, &cfg).unwrap();
        let gb = build_gramian(&tb, &cfg).unwrap();
        let s2 = scale.norm_sqr();
        for i in 0..ga.n() {
            for j in 0..ga.n() {
                let want = ga.get(i, j) * s2;
                let tol = 1e-12 * s2 * ga.frobenius_norm();
                assert!((gb.get(i, j) - want).norm() <= tol);
            }
        }
        let a = PadeApproximant::from_table(&ta, &cfg).unwrap();
        let b = PadeApproximant::from_table(&tb, &cfg).unwrap();
        let ra = a.poles().unwrap();
        let rb = b.poles().unwrap();
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().zip(&rb) {
            assert!((x - y).norm() <= 1e-10);
        }
        let ratio = b.residual() / a.residual();
        assert!((ratio - scale.norm()).abs() <= 1e-12 * scale.norm());
    }

    #[test]
    fn near_pole_evaluation_is_refused() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let lambda = 13.0;
        let map = modal_map(&space, z0, &[(lambda, c(1.0, 0.0))]);
        let cfg = PadeConfig::new(2, 1, 3, 1.0, z0).unwrap();
        let approx = PadeApproximant::from_map(&map, &cfg).unwrap();
        let root = approx.poles().unwrap()[0];
        match approx.evaluate(root) {
            Err(Error::NearPole { .. }) => {}
            other => panic!("expected pole-proximity refusal, got {other:?}"),
        }
        assert!(approx.evaluate(c(12.0, 0.0)).is_ok());
    }

    #[test]
    fn rate_heuristic_handles_its_reference_cases() {
        let z0 = c(10.0, 0.5);
        let poles = [13.0, 8.0, 10.0];
        assert_eq!(heuristic_rate(z0, z0, &poles, 4, 1).unwrap(), 0.0);
        let mut distances: Vec<f64> = poles.iter().map(|&p| (z0 - p).norm()).collect();
        distances.sort_by(f64::total_cmp);
        let z = z0 + c(distances[1], 0.0);
        let rate = heuristic_rate(z, z0, &poles, 7, 1).unwrap();
        assert!((rate - 1.0).abs() <= 1e-12);
        assert!(heuristic_rate(z0, z0, &poles[..1], 4, 1).is_err());
    }

    #[test]
    fn serialized_surrogate_reproduces_evaluations_bitwise() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let map = modal_map(
            &space,
            z0,
            &[(8.0, c(1.0, 0.5)), (10.0, c(0.4, -0.2)), (13.0, c(1.5, 0.0))],
        );
        let cfg = PadeConfig::new(6, 3, 9, 3.0, z0).unwrap();
        let approx = PadeApproximant::from_map(&map, &cfg).unwrap();
        let text = approx.to_json().unwrap();
        let loaded = PadeApproximant::from_json(&text).unwrap();
        assert_eq!(loaded.to_json().unwrap(), text);
        for &z in &[c(9.0, 0.0), c(12.0, 0.1), c(11.5, -0.7)] {
            let a = approx.evaluate(z).unwrap();
            let b = loaded.evaluate(z).unwrap();
            assert_eq!(a.values(), b.values());
        }
        assert_eq!(loaded.diagnostics(), approx.diagnostics());
        assert_eq!(loaded.residual(), approx.residual());
    }

    #[test]
    fn degree_zero_surrogate_survives_the_round_trip_with_its_infinite_gap() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = modal_map(&space, z0, &[(13.0, c(1.0, 0.0)), (8.0, c(0.5, 0.5))]);
        let cfg = PadeConfig::with_minimal_budget(4, 0, 2.0, z0).unwrap();
        let approx = PadeApproximant::from_map(&map, &cfg).unwrap();
        assert!(approx.diagnostics().spectral_gap.is_infinite());
        let loaded = PadeApproximant::from_json(&approx.to_json().unwrap()).unwrap();
        assert!(loaded.diagnostics().spectral_gap.is_infinite());
    }

    #[test]
    fn partial_sum_rejects_orders_beyond_the_budget() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = modal_map(&space, z0, &[(13.0, c(1.0, 0.0))]);
        let table = TaylorTable::from_map(&map, 4).unwrap();
        assert!(table.partial_sum(c(11.0, 0.0), 5).is_err());
        assert!(table.partial_sum(c(11.0, 0.0), 4).is_ok());
    }
}
