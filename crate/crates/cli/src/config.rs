//! Experiment configuration: the JSON schema accepted by `run` and
//! `validate`, its validation rules, and the config hash stamped into
//! every output file.
//!
//! The full field-by-field schema is documented in `docs/config-schema.md`.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One experiment: a problem backend plus surrogate and sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Problem backend and its physical parameters.
    pub problem: ProblemKind,
    /// Cells per side of the finite-difference grid.
    pub grid: usize,
    /// Interval of interest `[k2_min, k2_max]` on the squared-wavenumber
    /// axis.
    pub interval: [f64; 2],
    /// Expansion center `z0` as `[re, im]`; `re > 0` and `im != 0`.
    pub center: [f64; 2],
    /// Surrogate degree pairs `[M, N]`, one surrogate per entry.
    pub degrees: Vec<[usize; 2]>,
    /// Taylor budget rule: `"sum"` for `E = M + N`, or `{"fixed": E}`.
    #[serde(default)]
    pub budget: BudgetRule,
    /// Residual weight radius: `"auto"` for the widest distance from the
    /// center to an interval endpoint, or `{"explicit": rho}`.
    #[serde(default)]
    pub radius: RadiusRule,
    /// Number of uniform subintervals in norm sweeps over the interval.
    #[serde(default = "default_sweep_subintervals")]
    pub sweep_subintervals: usize,
    /// Base seed for random draws.
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Also render SVG line plots next to the CSV files.
    #[serde(default)]
    pub emit_svg: bool,
}

fn default_sweep_subintervals() -> usize {
    100
}

/// Problem backend selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemKind {
    /// Interior Dirichlet problem on `(0, pi)^2` driven by a plane-wave
    /// bubble load with squared wavenumber `nu_sq` and the given travel
    /// direction; `eval` is the point used for the error-vs-degree study
    /// (defaults to `nu_sq`).
    Model {
        nu_sq: f64,
        direction_degrees: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eval: Option<f64>,
    },
    /// Two-layer slab on `(-1, 1)^2` with Dirichlet data interpolated from
    /// the exact reflected/refracted plane-wave field; `eval` as above
    /// (defaults to the interval midpoint).
    Transmission {
        n1: f64,
        n2: f64,
        kappa: f64,
        theta_degrees: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eval: Option<f64>,
    },
    /// Exterior scattering of a plane wave by a square obstacle inside an
    /// impedance border; one surrogate is fit per evaluation point with
    /// the residual radius `|z - z0|` unless an explicit radius is set.
    Scattering {
        direction_degrees: f64,
        eval_points: Vec<f64>,
    },
    /// Random-wavenumber study against a modal truth assembled from the
    /// discrete interior eigenvalues near the interval.
    Stochastic {
        /// Monte Carlo draws for the characteristic-function estimates.
        samples: usize,
        /// Paired draws written to `samples.csv` for inspection.
        #[serde(default = "default_display_samples")]
        display_samples: usize,
        /// The characteristic function is tabulated on
        /// `t in [-t_max, t_max]`.
        t_max: f64,
        t_points: usize,
    },
}

fn default_display_samples() -> usize {
    100
}

/// Taylor budget rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRule {
    /// `E = M + N` per degree pair.
    #[default]
    Sum,
    /// The same fixed `E` for every pair.
    Fixed(usize),
}

/// Residual weight radius rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiusRule {
    /// Widest distance from the center to an interval endpoint.
    #[default]
    Auto,
    /// A fixed positive radius.
    Explicit(f64),
}

/// A configuration problem, reported with the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn center_complex(&self) -> Complex64 {
        Complex64::new(self.center[0], self.center[1])
    }

    /// Budget for one degree pair.
    pub fn budget_for(&self, m: usize, n: usize) -> usize {
        match self.budget {
            BudgetRule::Sum => m + n,
            BudgetRule::Fixed(e) => e,
        }
    }

    /// Largest budget over the configured degree pairs.
    pub fn max_budget(&self) -> usize {
        self.degrees
            .iter()
            .map(|&[m, n]| self.budget_for(m, n))
            .max()
            .unwrap_or(0)
    }

    /// Radius resolved against the interval; scattering resolves its own
    /// per-point radius and ignores the `Auto` value.
    pub fn resolved_radius(&self) -> f64 {
        match self.radius {
            RadiusRule::Auto => pade_mor::pade::default_radius(
                self.center_complex(),
                self.interval[0],
                self.interval[1],
            ),
            RadiusRule::Explicit(rho) => rho,
        }
    }

    /// Field-level validation; everything checked here fails before any
    /// solve starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let [kmin, kmax] = self.interval;
        if !kmin.is_finite() || !kmax.is_finite() || kmin <= 0.0 || kmin >= kmax {
            return Err(bad(
                "interval",
                format!("needs 0 < k2_min < k2_max, got [{kmin}, {kmax}]"),
            ));
        }
        let [re, im] = self.center;
        if !re.is_finite() || !im.is_finite() || re <= 0.0 {
            return Err(bad(
                "center",
                format!("needs a finite center with re > 0, got {re} + {im}i"),
            ));
        }
        if im == 0.0 {
            return Err(bad(
                "center",
                "the center must be off the real axis (im != 0)",
            ));
        }
        if self.degrees.is_empty() {
            return Err(bad("degrees", "at least one [M, N] pair is required"));
        }
        for &[m, n] in &self.degrees {
            let e = self.budget_for(m, n);
            if e < m + n {
                return Err(bad(
                    "budget",
                    format!("budget {e} is below M + N = {} for degrees [{m}, {n}]", m + n),
                ));
            }
        }
        if let RadiusRule::Explicit(rho) = self.radius {
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(bad("radius", format!("needs a positive radius, got {rho}")));
            }
        }
        if self.sweep_subintervals == 0 {
            return Err(bad("sweep_subintervals", "must be at least 1"));
        }
        match &self.problem {
            ProblemKind::Model { nu_sq, .. } => {
                if self.grid < 2 {
                    return Err(bad("grid", "the interior grid needs at least 2 cells"));
                }
                if !(nu_sq.is_finite()) || *nu_sq <= 0.0 {
                    return Err(bad("problem.nu_sq", "must be positive and finite"));
                }
            }
            ProblemKind::Transmission {
                n1,
                n2,
                kappa,
                theta_degrees,
                ..
            } => {
                if self.grid < 4 || self.grid % 2 != 0 {
                    return Err(bad(
                        "grid",
                        "two-layer grids need an even cell count of at least 4",
                    ));
                }
                for (name, v) in [("n1", n1), ("n2", n2), ("kappa", kappa)] {
                    if !v.is_finite() || *v <= 0.0 {
                        return Err(bad(
                            &format!("problem.{name}"),
                            "must be positive and finite",
                        ));
                    }
                }
                if !theta_degrees.is_finite() || !(0.0..90.0).contains(theta_degrees) {
                    return Err(bad(
                        "problem.theta_degrees",
                        format!("the incidence angle must lie in [0, 90), got {theta_degrees}"),
                    ));
                }
            }
            ProblemKind::Scattering { eval_points, .. } => {
                if self.grid < 8 || self.grid % 8 != 0 {
                    return Err(bad(
                        "grid",
                        "obstacle grids need a cell count divisible by 8, at least 8",
                    ));
                }
                if eval_points.is_empty() {
                    return Err(bad("problem.eval_points", "at least one point is required"));
                }
                for &z in eval_points {
                    if !z.is_finite() || z <= 0.0 {
                        return Err(bad(
                            "problem.eval_points",
                            format!("points must be positive and finite, got {z}"),
                        ));
                    }
                    if (Complex64::new(z, 0.0) - self.center_complex()).norm() < 1e-6 {
                        return Err(bad(
                            "problem.eval_points",
                            format!("point {z} coincides with the expansion center"),
                        ));
                    }
                }
            }
            ProblemKind::Stochastic {
                samples,
                display_samples,
                t_max,
                t_points,
            } => {
                if self.grid < 4 {
                    return Err(bad("grid", "the modal truth needs at least 4 cells"));
                }
                if *samples == 0 {
                    return Err(bad("problem.samples", "must be at least 1"));
                }
                if *display_samples == 0 {
                    return Err(bad("problem.display_samples", "must be at least 1"));
                }
                if !(t_max.is_finite()) || *t_max <= 0.0 {
                    return Err(bad("problem.t_max", "must be positive and finite"));
                }
                if *t_points < 2 {
                    return Err(bad("problem.t_points", "needs at least 2 grid points"));
                }
            }
        }
        Ok(())
    }

    /// Hash over every field that influences computed numbers; the output
    /// directory and the plot switch are excluded so that re-runs into a
    /// different directory stamp the same hash.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        canonical.emit_svg = false;
        let text = serde_json::to_string(&canonical).expect("config serializes");
        format!("fnv1a:{:016x}", fnv1a(text.as_bytes()))
    }
}

/// 64-bit FNV-1a over a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// On-disk record of a finished run; `run` accepts a manifest anywhere a
/// config is accepted, so any output directory can reproduce itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub resolved: ResolvedSettings,
}

/// Derived quantities recorded for the reader; everything here follows
/// deterministically from `config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedSettings {
    /// Radius used by interval-wide experiments; scattering records the
    /// per-point radii in its CSV instead.
    pub radius: f64,
    /// `[m, n, budget]` per configured degree pair.
    pub budgets: Vec<[usize; 3]>,
    /// Norm weight of the problem's solution space.
    pub weight: f64,
}

/// Parses either a bare config or a manifest (recognized by its `config`
/// field), returning the config.
pub fn parse_config_text(text: &str) -> Result<ExperimentConfig, String> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("not valid JSON: {e}"))?;
    if let Some(inner) = value.get("config") {
        serde_json::from_value(inner.clone())
            .map_err(|e| format!("manifest `config` field: {e}"))
    } else {
        serde_json::from_value(value).map_err(|e| format!("{e}"))
    }
}
