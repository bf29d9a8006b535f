//! Response maps given by an explicit partial-fraction expansion.
//!
//! These serve as analytically known references: every pole, residue, and
//! Taylor coefficient is available in closed form, so surrogate error and
//! root convergence can be measured against exact values.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::response::ResponseMap;
use crate::space::{SpaceVector, WeightedSpace};

/// One pole of a modal expansion: `coefficient / (pole - z) * mode` for a
/// load-driven map, `z * coefficient / (pole - z) * mode` for a
/// lifting-driven one.
#[derive(Debug, Clone)]
pub struct ModalTerm {
    pub pole: f64,
    pub coefficient: Complex64,
    pub mode: SpaceVector,
}

#[derive(Debug, Clone)]
enum Drive {
    /// `S(z) = sum_j c_j / (lambda_j - z) phi_j`.
    Load,
    /// `S(z) = sum_j z c_j / (lambda_j - z) phi_j + offset`, the shape of a
    /// Dirichlet-lifted solution with lift `offset`.
    Lifting { offset: SpaceVector },
}

/// Partial-fraction response map with simple real poles.
#[derive(Debug)]
pub struct ModalResponseMap {
    space: Arc<WeightedSpace>,
    center: Complex64,
    terms: Vec<ModalTerm>,
    drive: Drive,
    cache: RefCell<Vec<SpaceVector>>,
}

/// Evaluation refuses points within this distance of a pole.
const POLE_DISTANCE_GUARD: f64 = 1e-8;

impl ModalResponseMap {
    pub fn new_load(
        space: Arc<WeightedSpace>,
        center: Complex64,
        terms: Vec<ModalTerm>,
    ) -> Result<Self> {
        Self::build(space, center, terms, Drive::Load)
    }

    pub fn new_lifting(
        space: Arc<WeightedSpace>,
        center: Complex64,
        terms: Vec<ModalTerm>,
        offset: SpaceVector,
    ) -> Result<Self> {
        if offset.space_id() != space.id() {
            return Err(Error::SpaceMismatch);
        }
        Self::build(space, center, terms, Drive::Lifting { offset })
    }

    fn build(
        space: Arc<WeightedSpace>,
        center: Complex64,
        mut terms: Vec<ModalTerm>,
        drive: Drive,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("modal map needs at least one term"));
        }
        for t in &terms {
            if t.mode.space_id() != space.id() {
                return Err(Error::SpaceMismatch);
            }
            if !t.pole.is_finite() {
                return Err(Error::invalid("modal pole must be finite"));
            }
            if (t.pole - center).norm() < 1e-12 * t.pole.abs().max(1.0) {
                return Err(Error::PoleAtCenter { pole: t.pole });
            }
        }
        terms.sort_by(|a, b| a.pole.total_cmp(&b.pole));
        for pair in terms.windows(2) {
            if pair[0].pole == pair[1].pole {
                return Err(Error::invalid(format!(
                    "modal poles must be distinct; {} appears twice (merge \
                     multiplicities into one term)",
                    pair[0].pole
                )));
            }
        }
        Ok(ModalResponseMap {
            space,
            center,
            terms,
            drive,
            cache: RefCell::new(Vec::new()),
        })
    }

    pub fn terms(&self) -> &[ModalTerm] {
        &self.terms
    }

    /// Largest deviation of `<phi_i, phi_j>` from the identity, a check that
    /// the supplied modes are orthonormal in the space inner product.
    pub fn orthonormality_defect(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, ti) in self.terms.iter().enumerate() {
            for (j, tj) in self.terms.iter().enumerate().skip(i) {
                let ip = self.space.inner(&ti.mode, &tj.mode)?;
                let target = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                worst = worst.max((ip - target).norm());
            }
        }
        Ok(worst)
    }

    fn taylor_at(&self, beta: usize) -> SpaceVector {
        let mut out = self.space.zero_vector();
        match &self.drive {
            Drive::Load => {
                for t in &self.terms {
                    let inv = (Complex64::new(t.pole, 0.0) - self.center).inv();
                    out.axpy(t.coefficient * inv.powu(beta as u32 + 1), &t.mode);
                }
            }
            Drive::Lifting { offset } => {
                for t in &self.terms {
                    let inv = (Complex64::new(t.pole, 0.0) - self.center).inv();
                    let factor = if beta == 0 {
                        self.center * inv
                    } else {
                        t.pole * inv.powu(beta as u32 + 1)
                    };
                    out.axpy(t.coefficient * factor, &t.mode);
                }
                if beta == 0 {
                    out.axpy(Complex64::new(1.0, 0.0), offset);
                }
            }
        }
        out
    }
}

impl ResponseMap for ModalResponseMap {
    fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    fn center(&self) -> Complex64 {
        self.center
    }

    fn taylor(&self, beta: usize) -> Result<SpaceVector> {
        let mut cache = self.cache.borrow_mut();
        while cache.len() <= beta {
            let next = self.taylor_at(cache.len());
            cache.push(next);
        }
        Ok(cache[beta].clone())
    }

    fn evaluate(&self, z: Complex64) -> Result<SpaceVector> {
        for t in &self.terms {
            let dist = (Complex64::new(t.pole, 0.0) - z).norm();
            if dist < POLE_DISTANCE_GUARD {
                return Err(Error::NearPole { qmag: dist });
            }
        }
        let mut out = self.space.zero_vector();
        match &self.drive {
            Drive::Load => {
                for t in &self.terms {
                    let inv = (Complex64::new(t.pole, 0.0) - z).inv();
                    out.axpy(t.coefficient * inv, &t.mode);
                }
            }
            Drive::Lifting { offset } => {
                for t in &self.terms {
                    let inv = (Complex64::new(t.pole, 0.0) - z).inv();
                    out.axpy(t.coefficient * z * inv, &t.mode);
                }
                out.axpy(Complex64::new(1.0, 0.0), offset);
            }
        }
        Ok(out)
    }

    fn poles(&self) -> Option<Vec<f64>> {
        Some(self.terms.iter().map(|t| t.pole).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_space(dim: usize) -> Arc<WeightedSpace> {
        // Interval space whose DOF count equals `dim`; only used as a vector
        // container with a genuine inner product.
        WeightedSpace::dirichlet_interval(0.0, 1.0, dim + 1, 1.0).unwrap()
    }

    fn basis(space: &Arc<WeightedSpace>, k: usize) -> SpaceVector {
        let mut vals = vec![c(0.0, 0.0); space.dim()];
        vals[k] = c(1.0, 0.0);
        space.vector(vals).unwrap()
    }

    #[test]
    fn load_taylor_matches_closed_form() {
        let space = unit_space(3);
        let z0 = c(10.0, 0.5);
        let map = ModalResponseMap::new_load(
            space.clone(),
            z0,
            vec![ModalTerm {
                pole: 13.0,
                coefficient: c(2.0, 0.0),
                mode: basis(&space, 1),
            }],
        )
        .unwrap();
        for beta in 0..6 {
            let s = map.taylor(beta).unwrap();
            let expect = c(2.0, 0.0) * (c(13.0, 0.0) - z0).inv().powu(beta as u32 + 1);
            assert!((s.values()[1] - expect).norm() < 1e-15 * expect.norm());
            assert_eq!(s.values()[0], c(0.0, 0.0));
        }
    }

    #[test]
    fn taylor_one_matches_difference_quotient() {
        let space = unit_space(4);
        let z0 = c(10.0, 0.5);
        let map = ModalResponseMap::new_load(
            space.clone(),
            z0,
            vec![
                ModalTerm {
                    pole: 13.0,
                    coefficient: c(1.5, 0.0),
                    mode: basis(&space, 0),
                },
                ModalTerm {
                    pole: 17.0,
                    coefficient: c(-0.7, 0.0),
                    mode: basis(&space, 2),
                },
            ],
        )
        .unwrap();
        let d = 1e-4;
        let plus = map.evaluate(z0 + c(d, 0.0)).unwrap();
        let minus = map.evaluate(z0 - c(d, 0.0)).unwrap();
        let fd = plus.sub(&minus).scaled(c(1.0 / (2.0 * d), 0.0));
        let s1 = map.taylor(1).unwrap();
        let err = fd.sub(&s1).max_abs();
        assert!(err < 1e-6 * s1.max_abs(), "difference quotient off by {err:.3e}");
    }

    #[test]
    fn lifting_taylor_and_evaluate_agree_at_center() {
        let space = unit_space(4);
        let z0 = c(7.5, 0.5);
        let offset = basis(&space, 3);
        let map = ModalResponseMap::new_lifting(
            space.clone(),
            z0,
            vec![ModalTerm {
                pole: 11.0,
                coefficient: c(0.9, 0.1),
                mode: basis(&space, 1),
            }],
            offset,
        )
        .unwrap();
        let s0 = map.taylor(0).unwrap();
        let ev = map.evaluate(z0).unwrap();
        assert!(s0.sub(&ev).max_abs() < 1e-14);
        // Away from the center the lifted closed form still holds.
        let z = c(8.5, 0.0);
        let got = map.evaluate(z).unwrap();
        let expect1 = z * c(0.9, 0.1) / (c(11.0, 0.0) - z);
        assert!((got.values()[1] - expect1).norm() < 1e-14 * expect1.norm());
        assert_eq!(got.values()[3], c(1.0, 0.0));
    }

    #[test]
    fn lifting_higher_taylor_carries_pole_factor() {
        let space = unit_space(3);
        let z0 = c(7.5, 0.5);
        let lam = 11.0;
        let map = ModalResponseMap::new_lifting(
            space.clone(),
            z0,
            vec![ModalTerm {
                pole: lam,
                coefficient: c(1.0, 0.0),
                mode: basis(&space, 0),
            }],
            space.zero_vector(),
        )
        .unwrap();
        for beta in 1..5 {
            let s = map.taylor(beta).unwrap();
            let expect = lam * (c(lam, 0.0) - z0).inv().powu(beta as u32 + 1);
            assert!((s.values()[0] - expect).norm() < 1e-14 * expect.norm());
        }
    }

    #[test]
    fn real_data_gives_conjugate_symmetry() {
        let space = unit_space(3);
        let map = ModalResponseMap::new_load(
            space.clone(),
            c(5.0, 0.5),
            vec![ModalTerm {
                pole: 8.0,
                coefficient: c(1.25, 0.0),
                mode: basis(&space, 2),
            }],
        )
        .unwrap();
        let z = c(6.0, 0.7);
        let at_z = map.evaluate(z).unwrap();
        let at_conj = map.evaluate(z.conj()).unwrap();
        for (a, b) in at_z.values().iter().zip(at_conj.values()) {
            assert!((a.conj() - b).norm() < 1e-15);
        }
    }

    #[test]
    fn rejects_duplicate_poles_and_center_collision() {
        let space = unit_space(2);
        let dup = ModalResponseMap::new_load(
            space.clone(),
            c(1.0, 0.5),
            vec![
                ModalTerm {
                    pole: 4.0,
                    coefficient: c(1.0, 0.0),
                    mode: basis(&space, 0),
                },
                ModalTerm {
                    pole: 4.0,
                    coefficient: c(2.0, 0.0),
                    mode: basis(&space, 1),
                },
            ],
        );
        assert!(matches!(dup, Err(Error::InvalidArgument(_))));
        let collide = ModalResponseMap::new_load(
            space.clone(),
            c(4.0, 0.0),
            vec![ModalTerm {
                pole: 4.0,
                coefficient: c(1.0, 0.0),
                mode: basis(&space, 0),
            }],
        );
        assert!(matches!(collide, Err(Error::PoleAtCenter { .. })));
    }

    #[test]
    fn evaluate_near_pole_is_refused() {
        let space = unit_space(2);
        let map = ModalResponseMap::new_load(
            space.clone(),
            c(1.0, 0.5),
            vec![ModalTerm {
                pole: 4.0,
                coefficient: c(1.0, 0.0),
                mode: basis(&space, 0),
            }],
        )
        .unwrap();
        assert!(matches!(
            map.evaluate(c(4.0 + 1e-10, 0.0)),
            Err(Error::NearPole { .. })
        ));
        assert!(map.evaluate(c(4.0 + 1e-6, 0.0)).is_ok());
    }

    #[test]
    fn poles_are_ascending() {
        let space = unit_space(3);
        let map = ModalResponseMap::new_load(
            space.clone(),
            c(1.0, 0.5),
            vec![
                ModalTerm {
                    pole: 9.0,
                    coefficient: c(1.0, 0.0),
                    mode: basis(&space, 0),
                },
                ModalTerm {
                    pole: 4.0,
                    coefficient: c(1.0, 0.0),
                    mode: basis(&space, 1),
                },
            ],
        )
        .unwrap();
        assert_eq!(map.poles().unwrap(), vec![4.0, 9.0]);
    }
}
