//! Random wavenumber sampling and characteristic-function statistics.
//!
//! Sampling is counter-based: draw `i` of a stream is a pure function of
//! `(seed, i)`, so runs are reproducible regardless of evaluation order and
//! a failed sample can be excluded without shifting later draws. The same
//! draws feed the true map and its surrogate, so their characteristic
//! functions differ only through the surrogate error.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pade::PadeApproximant;
use crate::response::ResponseMap;
use crate::space::{SpaceVector, WeightedSpace};

/// Samples whose wavenumber lands within this distance of a known pole are
/// excluded before solving.
const POLE_EXCLUSION: f64 = 1e-8;

/// Counter-based generator: the value at counter `i` mixes `seed + (i+1) * phi`
/// through a 64-bit finalizer, where `phi` is the golden-ratio increment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw 64-bit word at the given counter.
    pub fn u64_at(&self, counter: u64) -> u64 {
        let mut z = self
            .seed
            .wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E3779B97F4A7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / 9007199254740992.0)
    }
}

/// Marginal law of the squared wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Uniform,
}

/// Random squared wavenumber supported on `[k2_min, k2_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomWavenumber {
    pub k2_min: f64,
    pub k2_max: f64,
    pub density: Density,
    pub seed: u64,
}

impl RandomWavenumber {
    pub fn new(k2_min: f64, k2_max: f64, density: Density, seed: u64) -> Result<Self> {
        if !(k2_min < k2_max) || !k2_min.is_finite() || !k2_max.is_finite() {
            return Err(Error::invalid(format!(
                "wavenumber interval must satisfy k2_min < k2_max with finite ends, \
                 got [{k2_min}, {k2_max}]"
            )));
        }
        Ok(RandomWavenumber {
            k2_min,
            k2_max,
            density,
            seed,
        })
    }

    /// First `count` draws of the stream.
    pub fn draw_samples(&self, count: usize) -> Vec<f64> {
        let rng = CounterRng::new(self.seed);
        let width = self.k2_max - self.k2_min;
        (0..count)
            .map(|i| self.k2_min + width * rng.uniform_at(i as u64))
            .collect()
    }
}

/// Scalar functional of a response-map value.
pub enum QuantityOfInterest {
    /// Norm of the solution in its weighted space.
    WeightedNorm,
    Custom {
        name: String,
        /// Lipschitz constant with respect to the weighted norm of the
        /// argument, used to transfer surrogate error bounds.
        lipschitz: f64,
        f: Box<dyn Fn(&Arc<WeightedSpace>, &SpaceVector) -> f64>,
    },
}

impl fmt::Debug for QuantityOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantityOfInterest::WeightedNorm => write!(f, "WeightedNorm"),
            QuantityOfInterest::Custom { name, lipschitz, .. } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("lipschitz", lipschitz)
                .finish_non_exhaustive(),
        }
    }
}

impl QuantityOfInterest {
    pub fn name(&self) -> &str {
        match self {
            QuantityOfInterest::WeightedNorm => "weighted_norm",
            QuantityOfInterest::Custom { name, .. } => name,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            QuantityOfInterest::WeightedNorm => 1.0,
            QuantityOfInterest::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn apply(&self, space: &Arc<WeightedSpace>, v: &SpaceVector) -> Result<f64> {
        match self {
            QuantityOfInterest::WeightedNorm => space.norm(v),
            QuantityOfInterest::Custom { f, .. } => Ok(f(space, v)),
        }
    }
}

/// What to evaluate at each sampled wavenumber.
pub enum QoiTarget<'a> {
    Map(&'a dyn ResponseMap),
    Surrogate {
        approximant: &'a PadeApproximant,
        /// Space whose norm scores the surrogate values; must be the space
        /// the surrogate's coefficients live in.
        space: &'a Arc<WeightedSpace>,
    },
}

/// Quantity of interest at each draw; `None` marks a sample excluded for
/// pole proximity. Genuine solver failures propagate as errors.
pub fn evaluate_qoi(
    draws: &[f64],
    target: &QoiTarget<'_>,
    qoi: &QuantityOfInterest,
) -> Result<Vec<Option<f64>>> {
    let known_poles = match target {
        QoiTarget::Map(map) => map.poles(),
        QoiTarget::Surrogate { .. } => None,
    };
    let mut out = Vec::with_capacity(draws.len());
    for &k2 in draws {
        if let Some(poles) = &known_poles {
            if poles.iter().any(|&p| (k2 - p).abs() < POLE_EXCLUSION) {
                out.push(None);
                continue;
            }
        }
        let z = Complex64::new(k2, 0.0);
        let value = match target {
            QoiTarget::Map(map) => match map.evaluate(z) {
                Ok(v) => Some(qoi.apply(map.space(), &v)?),
                Err(Error::NearPole { .. }) => None,
                Err(e) => return Err(e),
            },
            QoiTarget::Surrogate { approximant, space } => match approximant.evaluate(z) {
                Ok(v) => Some(qoi.apply(space, &v)?),
                Err(Error::NearPole { .. }) => None,
                Err(e) => return Err(e),
            },
        };
        out.push(value);
    }
    Ok(out)
}

/// Paired quantity-of-interest samples under common random numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// Retained draws, in stream order.
    pub draws: Vec<f64>,
    /// Quantity of interest through the true map, aligned with `draws`.
    pub x: Vec<f64>,
    /// Quantity of interest through the surrogate, aligned with `draws`.
    pub x_p: Vec<f64>,
    pub seed: u64,
    /// Draws requested before exclusions.
    pub requested: usize,
    /// Draws dropped because either evaluation sat on a pole.
    pub excluded: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// `|phi_X(t) - phi_X_P(t)|` over a grid of transform points.
    pub fn err_curve(&self, t_grid: &[f64]) -> Vec<f64> {
        t_grid
            .iter()
            .map(|&t| (characteristic_fn(&self.x, t) - characteristic_fn(&self.x_p, t)).norm())
            .collect()
    }
}

/// Draws `count` wavenumbers and evaluates the quantity of interest through
/// both the true map and the surrogate on the same draws, dropping any draw
/// either side excludes. The surrogate is scored in the map's space.
pub fn sample_set(
    rw: &RandomWavenumber,
    count: usize,
    map: &dyn ResponseMap,
    surrogate: &PadeApproximant,
    qoi: &QuantityOfInterest,
) -> Result<SampleSet> {
    let draws = rw.draw_samples(count);
    let through_map = evaluate_qoi(&draws, &QoiTarget::Map(map), qoi)?;
    let through_surrogate = evaluate_qoi(
        &draws,
        &QoiTarget::Surrogate {
            approximant: surrogate,
            space: map.space(),
        },
        qoi,
    )?;
    let mut kept_draws = Vec::with_capacity(count);
    let mut x = Vec::with_capacity(count);
    let mut x_p = Vec::with_capacity(count);
    for ((&d, a), b) in draws.iter().zip(&through_map).zip(&through_surrogate) {
        if let (Some(xa), Some(xb)) = (a, b) {
            kept_draws.push(d);
            x.push(*xa);
            x_p.push(*xb);
        }
    }
    let excluded = count - kept_draws.len();
    Ok(SampleSet {
        draws: kept_draws,
        x,
        x_p,
        seed: rw.seed,
        requested: count,
        excluded,
    })
}

/// Empirical characteristic function `(1/n) sum_k exp(i t x_k)` by pairwise
/// summation, which keeps rounding growth logarithmic in `n`.
pub fn characteristic_fn(values: &[f64], t: f64) -> Complex64 {
    if values.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let terms: Vec<Complex64> = values
        .iter()
        .map(|&x| {
            let y = t * x;
            Complex64::new(y.cos(), y.sin())
        })
        .collect();
    pairwise_sum(&terms) / values.len() as f64
}

fn pairwise_sum(terms: &[Complex64]) -> Complex64 {
    if terms.len() <= 32 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in terms {
            acc += *t;
        }
        acc
    } else {
        let mid = terms.len() / 2;
        pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
    }
}

/// Monte Carlo resolution limit for a characteristic-function difference
/// estimated from `n` paired samples.
pub fn mc_noise_floor(n: usize) -> f64 {
    8.0 / (n as f64).sqrt()
}

/// Least-squares decay rate of error against numerator degree.
#[derive(Debug, Clone)]
pub struct RateFit {
    /// Slope of `ln(err)` versus `M`; NaN when unresolvable.
    pub slope: f64,
    /// Standard error of the slope estimate; NaN when unresolvable.
    pub stderr: f64,
    /// Reference rate `ln(rho / r_cap) / 4`.
    pub theoretical: f64,
    /// False when fewer than three points rise above the noise floor.
    pub resolvable: bool,
    /// `slope <= theoretical + 2 stderr`; false when unresolvable.
    pub bound_satisfied: bool,
    /// Points that entered the fit.
    pub used: Vec<(usize, f64)>,
}

/// Fits `ln(err) ~ a + slope * M` over the points whose error exceeds
/// `noise_floor` and compares the slope against the reference decay rate
/// for weighting radius `rho` and pole distance `r_cap`.
pub fn fit_rate(points: &[(usize, f64)], rho: f64, r_cap: f64, noise_floor: f64) -> RateFit {
    let theoretical = 0.25 * (rho / r_cap).ln();
    let used: Vec<(usize, f64)> = points
        .iter()
        .copied()
        .filter(|&(_, err)| err > noise_floor && err.is_finite())
        .collect();
    if used.len() < 3 {
        return RateFit {
            slope: f64::NAN,
            stderr: f64::NAN,
            theoretical,
            resolvable: false,
            bound_satisfied: false,
            used,
        };
    }
    let n = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|&(m, _)| m as f64).collect();
    let ys: Vec<f64> = used.iter().map(|&(_, e)| e.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    RateFit {
        slope,
        stderr,
        theoretical,
        resolvable: true,
        bound_satisfied: slope <= theoretical + 2.0 * stderr,
        used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pade::PadeConfig;
    use crate::response::modal::{ModalResponseMap, ModalTerm};

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

    #[test]
    fn uniform_draws_have_the_right_mean_and_support() {
        let rw = RandomWavenumber::new(7.0, 14.0, Density::Uniform, 42).unwrap();
        let draws = rw.draw_samples(100_000);
        assert!(draws.iter().all(|&x| (7.0..14.0).contains(&x)));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 10.5).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn draws_are_reproducible_and_seed_sensitive() {
        let a = RandomWavenumber::new(0.0, 1.0, Density::Uniform, 7).unwrap();
        let b = RandomWavenumber::new(0.0, 1.0, Density::Uniform, 7).unwrap();
        let c_ = RandomWavenumber::new(0.0, 1.0, Density::Uniform, 8).unwrap();
        assert_eq!(a.draw_samples(50), b.draw_samples(50));
        assert_ne!(a.draw_samples(50), c_.draw_samples(50));
        // A longer run starts with the shorter one: counter-based draws do
        // not depend on how many are requested.
        let long = a.draw_samples(60);
        assert_eq!(&long[..50], &a.draw_samples(50)[..]);
    }

    #[test]
    fn degenerate_intervals_are_rejected() {
        assert!(RandomWavenumber::new(2.0, 2.0, Density::Uniform, 1).is_err());
        assert!(RandomWavenumber::new(3.0, 2.0, Density::Uniform, 1).is_err());
        assert!(RandomWavenumber::new(0.0, f64::INFINITY, Density::Uniform, 1).is_err());
    }

    #[test]
    fn characteristic_function_of_uniform_matches_the_closed_form() {
        let rw = RandomWavenumber::new(0.0, 1.0, Density::Uniform, 11).unwrap();
        let draws = rw.draw_samples(10_000);
        let got = characteristic_fn(&draws, 1.0);
        // For U(0, 1) the transform at t = 1 is (e^i - 1) / i.
        let expect = c(1.0f64.sin(), 1.0 - 1.0f64.cos());
        assert!((got - expect).norm() < 0.04, "got {got}, expected {expect}");
    }

    #[test]
    fn characteristic_function_invariants_hold_exactly() {
        let rw = RandomWavenumber::new(7.0, 14.0, Density::Uniform, 3).unwrap();
        let draws = rw.draw_samples(1_000);
        // Unit value at t = 0, with no imaginary residue.
        assert_eq!(characteristic_fn(&draws, 0.0), c(1.0, 0.0));
        // Hermitian symmetry is exact in floating point: negating t negates
        // every angle bitwise and the summation tree is shape-identical.
        for &t in &[0.5, 1.0, 3.25, 5.0] {
            let plus = characteristic_fn(&draws, t);
            let minus = characteristic_fn(&draws, -t);
            assert_eq!(minus.re, plus.re);
            assert_eq!(minus.im, -plus.im);
        }
        // A point mass gives a pure phase.
        let constant = vec![9.5; 777];
        for &t in &[0.0, 1.0, 2.5] {
            let got = characteristic_fn(&constant, t);
            let y = t * 9.5;
            assert!((got.re - y.cos()).abs() <= 1e-15);
            assert!((got.im - y.sin()).abs() <= 1e-15);
        }
    }

    #[test]
    fn characteristic_function_is_stable_under_permutation() {
        let rw = RandomWavenumber::new(7.0, 14.0, Density::Uniform, 19).unwrap();
        let draws = rw.draw_samples(5_000);
        let mut reversed = draws.clone();
        reversed.reverse();
        for &t in &[0.3, 1.7, 4.9] {
            let a = characteristic_fn(&draws, t);
            let b = characteristic_fn(&reversed, t);
            assert!((a - b).norm() <= 1e-13);
        }
    }

    #[test]
    fn paired_sampling_tracks_an_accurate_surrogate() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = ModalResponseMap::new_load(
            space.clone(),
            z0,
            vec![ModalTerm {
                pole: 13.0,
                coefficient: c(1.0, 0.0),
                mode: basis(&space, 0),
            }],
        )
        .unwrap();
        let cfg = PadeConfig::new(2, 1, 3, 1.0, z0).unwrap();
        let surrogate = PadeApproximant::from_map(&map, &cfg).unwrap();
        let rw = RandomWavenumber::new(7.0, 14.0, Density::Uniform, 5).unwrap();
        let set = sample_set(&rw, 100, &map, &surrogate, &QuantityOfInterest::WeightedNorm)
            .unwrap();
        assert_eq!(set.requested, 100);
        assert_eq!(set.len() + set.excluded, 100);
        assert!(set.excluded <= 1);
        // A type-(2, 1) surrogate of a one-pole map is exact up to rounding,
        // so paired values agree to many digits even near the pole.
        for (xa, xb) in set.x.iter().zip(&set.x_p) {
            assert!((xa - xb).abs() <= 1e-7 * xa.abs(), "{xa} vs {xb}");
        }
        let errs = set.err_curve(&[-5.0, -1.0, 0.0, 1.0, 5.0]);
        assert!(errs.iter().all(|&e| e <= 1e-7), "{errs:?}");
        // Bit-identical repetition.
        let again = sample_set(&rw, 100, &map, &surrogate, &QuantityOfInterest::WeightedNorm)
            .unwrap();
        assert_eq!(set, again);
    }

    #[test]
    fn samples_on_a_known_pole_are_excluded() {
        let space = unit_space(2);
        let z0 = c(10.0, 0.5);
        let map = ModalResponseMap::new_load(
            space.clone(),
            z0,
            vec![ModalTerm {
                pole: 13.0,
                coefficient: c(1.0, 0.0),
                mode: basis(&space, 0),
            }],
        )
        .unwrap();
        let qoi = QuantityOfInterest::WeightedNorm;
        let draws = vec![9.0, 13.0 + 1e-9, 12.0];
        let values = evaluate_qoi(&draws, &QoiTarget::Map(&map), &qoi).unwrap();
        assert!(values[0].is_some());
        assert!(values[1].is_none());
        assert!(values[2].is_some());
    }

    #[test]
    fn synthetic_geometric_decay_is_fit_exactly() {
        let rho = 4.0f64;
        let r_cap = 5.0;
        let rate = 0.25 * (rho / r_cap).ln();
        let points: Vec<(usize, f64)> = (2..=10)
            .step_by(2)
            .map(|m| (m, 0.3 * (rate * (m as f64 + 1.0)).exp()))
            .collect();
        let fit = fit_rate(&points, rho, r_cap, 1e-12);
        assert!(fit.resolvable);
        assert_eq!(fit.used.len(), points.len());
        assert!((fit.slope - rate).abs() <= 1e-12 * rate.abs());
        assert!(fit.stderr <= 1e-12);
        assert!(fit.bound_satisfied);
        assert!((fit.theoretical - rate).abs() <= 1e-15);
    }

    #[test]
    fn flat_error_curves_fail_the_rate_bound() {
        let points: Vec<(usize, f64)> = (2..=10).map(|m| (m, 0.5)).collect();
        let fit = fit_rate(&points, 4.0, 5.0, 1e-6);
        assert!(fit.resolvable);
        assert!(fit.slope.abs() <= 1e-14);
        assert!(!fit.bound_satisfied);
    }

    #[test]
    fn fits_below_the_noise_floor_are_unresolvable() {
        let points: Vec<(usize, f64)> = (2..=10).map(|m| (m, 1e-9)).collect();
        let fit = fit_rate(&points, 4.0, 5.0, 1e-6);
        assert!(!fit.resolvable);
        assert!(!fit.bound_satisfied);
        assert!(fit.slope.is_nan());
        assert!(fit.used.is_empty());
        // Two points above the floor are still too few.
        let sparse = vec![(2, 1e-3), (4, 1e-4), (6, 1e-9)];
        assert!(!fit_rate(&sparse, 4.0, 5.0, 1e-6).resolvable);
    }

    #[test]
    fn weighted_norm_respects_its_lipschitz_constant() {
        let space = unit_space(5);
        let qoi = QuantityOfInterest::WeightedNorm;
        assert_eq!(qoi.lipschitz(), 1.0);
        assert_eq!(qoi.name(), "weighted_norm");
        let rng = CounterRng::new(31);
        for trial in 0..100u64 {
            let base = trial * 32;
            let u = space
                .vector(
                    (0..5)
                        .map(|k| {
                            c(
                                2.0 * rng.uniform_at(base + 2 * k) - 1.0,
                                2.0 * rng.uniform_at(base + 2 * k + 1) - 1.0,
                            )
                        })
                        .collect(),
                )
                .unwrap();
            let v = space
                .vector(
                    (0..5)
                        .map(|k| {
                            c(
                                2.0 * rng.uniform_at(base + 10 + 2 * k) - 1.0,
                                2.0 * rng.uniform_at(base + 10 + 2 * k + 1) - 1.0,
                            )
                        })
                        .collect(),
                )
                .unwrap();
            let qu = qoi.apply(&space, &u).unwrap();
            let qv = qoi.apply(&space, &v).unwrap();
            let dist = space.norm(&u.sub(&v)).unwrap();
            assert!((qu - qv).abs() <= qoi.lipschitz() * dist * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn noise_floor_scales_with_the_sample_count() {
        assert_eq!(mc_noise_floor(100), 0.8);
        assert!((mc_noise_floor(100_000) - 8.0 / 316.22776601683796).abs() < 1e-15);
    }
}
