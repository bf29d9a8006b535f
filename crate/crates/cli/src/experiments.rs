//! Experiment drivers: build the configured problem, fit every requested
//! surrogate from one shared Taylor table, and write the CSV records.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;

use pade_mor::grid::{assemble_2d, Grid2d, NodeClass};
use pade_mor::pade::{heuristic_rate, PadeApproximant, PadeConfig, TaylorTable};
use pade_mor::response::helmholtz::plane_wave_bubble_load;
use pade_mor::response::{
    fd_eigenvalue, BoundaryCondition, HelmholtzResponseMap, ModalResponseMap, ModalTerm,
    ResponseMap, ScatteringResponseMap, TransmissionGeometry,
};
use pade_mor::space::{SpaceVector, WeightedSpace};
use pade_mor::stochastic::{
    characteristic_fn, fit_rate, mc_noise_floor, sample_set, Density, QuantityOfInterest,
    RandomWavenumber,
};
use pade_mor::Error as CoreError;

use crate::config::{ExperimentConfig, Manifest, ProblemKind, RadiusRule, ResolvedSettings};
use crate::svg::{line_plot, Series};
use crate::table::{format_float, Cell, Table};

/// A failure after the configuration was accepted: solver trouble or an
/// unwritable output location.
#[derive(Debug)]
pub struct RunError(pub String);

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for RunError {}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        RunError(format!("solver: {e}"))
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError(format!("io: {e}"))
    }
}

type RResult<T> = Result<T, RunError>;

/// Norm weight used by the backend the config selects.
pub fn norm_weight(cfg: &ExperimentConfig) -> f64 {
    match cfg.problem {
        ProblemKind::Scattering { .. } => cfg.center[0],
        _ => cfg.center[0].sqrt(),
    }
}

/// Runs the configured experiment into `out_dir`, returning every file
/// written (the manifest first).
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> RResult<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();

    let manifest = Manifest {
        schema: 1,
        tool: "pade-mor".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.content_hash(),
        config: cfg.clone(),
        resolved: ResolvedSettings {
            radius: cfg.resolved_radius(),
            budgets: cfg
                .degrees
                .iter()
                .map(|&[m, n]| [m, n, cfg.budget_for(m, n)])
                .collect(),
            weight: norm_weight(cfg),
        },
    };
    let manifest_path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunError(format!("manifest: {e}")))?;
    fs::write(&manifest_path, text + "\n")?;
    files.push(manifest_path);

    match &cfg.problem {
        ProblemKind::Model {
            nu_sq,
            direction_degrees,
            eval,
        } => {
            let angle = direction_degrees.to_radians();
            let grid = Grid2d::from_box(0.0, PI, 0.0, PI, cfg.grid, cfg.grid)?;
            let load = plane_wave_bubble_load(nu_sq.sqrt(), (angle.cos(), angle.sin()));
            let map = HelmholtzResponseMap::base(
                &grid,
                [BoundaryCondition::Dirichlet; 4],
                cfg.center_complex(),
                &load,
            )?;
            interval_experiments(cfg, out_dir, &map, eval.unwrap_or(*nu_sq), &mut files)?;
        }
        ProblemKind::Transmission {
            n1,
            n2,
            kappa,
            theta_degrees,
            eval,
        } => {
            let geom = TransmissionGeometry::new(*n1, *n2, *kappa, theta_degrees.to_radians())?;
            let map = HelmholtzResponseMap::transmission(cfg.grid, &geom, cfg.center_complex())?;
            let midpoint = 0.5 * (cfg.interval[0] + cfg.interval[1]);
            interval_experiments(cfg, out_dir, &map, eval.unwrap_or(midpoint), &mut files)?;
        }
        ProblemKind::Scattering {
            direction_degrees,
            eval_points,
        } => {
            scattering_experiments(
                cfg,
                out_dir,
                direction_degrees.to_radians(),
                eval_points,
                &mut files,
            )?;
        }
        ProblemKind::Stochastic {
            samples,
            display_samples,
            t_max,
            t_points,
        } => {
            stochastic_experiments(
                cfg,
                out_dir,
                *samples,
                *display_samples,
                *t_max,
                *t_points,
                &mut files,
            )?;
        }
    }
    Ok(files)
}

fn stamp(table: &mut Table, cfg: &ExperimentConfig) {
    table
        .meta("config", cfg.content_hash())
        .meta("seed", cfg.seed.to_string())
        .meta("norm_weight", format_float(norm_weight(cfg)));
}

/// Truth evaluation that tolerates resonant points: a near-pole refusal or
/// a solver breakdown at a (nearly) singular shift yields `None` instead of
/// aborting the sweep.
fn try_truth(map: &dyn ResponseMap, z: Complex64) -> RResult<Option<(SpaceVector, f64)>> {
    match map.evaluate(z) {
        Ok(v) => {
            let norm = map.space().norm(&v)?;
            Ok(Some((v, norm)))
        }
        Err(CoreError::NearPole { .. }) | Err(CoreError::SolverFailure { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn try_surrogate(fit: &PadeApproximant, z: Complex64) -> RResult<Option<SpaceVector>> {
    match fit.evaluate(z) {
        Ok(v) => Ok(Some(v)),
        Err(CoreError::NearPole { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Fits one surrogate per configured degree pair from a shared table.
fn fit_all(
    cfg: &ExperimentConfig,
    table: &TaylorTable,
    radius: f64,
) -> RResult<Vec<(usize, usize, usize, PadeApproximant)>> {
    let z0 = cfg.center_complex();
    let mut fits = Vec::with_capacity(cfg.degrees.len());
    for &[m, n] in &cfg.degrees {
        let pcfg = PadeConfig::new(m, n, cfg.budget_for(m, n), radius, z0)?;
        let fit = PadeApproximant::from_table(table, &pcfg)?;
        fits.push((m, n, pcfg.budget, fit));
    }
    Ok(fits)
}

/// Norm sweep, error-versus-degree study, root table, and denominator
/// diagnostics for an interval-wide problem (interior or two-layer).
fn interval_experiments(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    map: &dyn ResponseMap,
    eval_at: f64,
    files: &mut Vec<PathBuf>,
) -> RResult<()> {
    let z0 = cfg.center_complex();
    let radius = cfg.resolved_radius();
    let [kmin, kmax] = cfg.interval;
    let table = TaylorTable::from_map(map, cfg.max_budget())?;
    let fits = fit_all(cfg, &table, radius)?;
    let poles = map.poles();

    // Norm sweep over the interval.
    let mut columns: Vec<String> = vec!["z".to_string(), "truth_norm".to_string()];
    for &(m, n, _, _) in &fits {
        columns.push(format!("pade_norm_{m}_{n}"));
        columns.push(format!("rel_err_{m}_{n}"));
    }
    columns.push("note".to_string());
    let column_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let mut sweep = Table::new("sweep", &column_refs);
    stamp(&mut sweep, cfg);
    sweep.meta("radius", format_float(radius));

    let mut truth_series = Series {
        label: "truth".to_string(),
        points: Vec::new(),
    };
    let mut fit_series: Vec<Series> = fits
        .iter()
        .map(|&(m, n, _, _)| Series {
            label: format!("pade ({m}, {n})"),
            points: Vec::new(),
        })
        .collect();

    for i in 0..=cfg.sweep_subintervals {
        let mut zr = kmin + (kmax - kmin) * i as f64 / cfg.sweep_subintervals as f64;
        if let Some(ps) = &poles {
            // Step off exact resonances so the row records a large finite
            // response instead of a refused solve.
            for &p in ps {
                if (zr - p).abs() < 1e-9 * p.abs().max(1.0) {
                    zr = p + 1e-9 * p.abs().max(1.0);
                }
            }
        }
        let z = Complex64::new(zr, 0.0);
        let truth = try_truth(map, z)?;
        let mut near_pole = truth.is_none();
        let mut row: Vec<Cell> = vec![zr.into()];
        match &truth {
            Some((_, norm)) => {
                row.push((*norm).into());
                truth_series.points.push((zr, *norm));
            }
            None => row.push(f64::NAN.into()),
        }
        for (series, &(_, _, _, ref fit)) in fit_series.iter_mut().zip(&fits) {
            match try_surrogate(fit, z)? {
                Some(v) => {
                    let norm = map.space().norm(&v)?;
                    series.points.push((zr, norm));
                    row.push(norm.into());
                    match &truth {
                        Some((tv, tnorm)) => {
                            row.push((map.space().norm(&v.sub(tv))? / tnorm).into());
                        }
                        None => row.push(f64::NAN.into()),
                    }
                }
                None => {
                    near_pole = true;
                    row.push(f64::NAN.into());
                    row.push(f64::NAN.into());
                }
            }
        }
        row.push(if near_pole { "near_pole" } else { "" }.to_string().into());
        sweep.push_row(row);
    }
    let sweep_path = out_dir.join("sweep.csv");
    sweep.write(&sweep_path)?;
    files.push(sweep_path);

    // Error against degree at one evaluation point, with the same-budget
    // Taylor partial sum and the pole-distance rate prediction alongside.
    let mut error = Table::new(
        "error-vs-degree",
        &["m", "n", "budget", "rel_err", "taylor_rel_err", "rate_estimate"],
    );
    stamp(&mut error, cfg);
    error.meta("radius", format_float(radius));
    error.meta("eval_point", format_float(eval_at));
    let z_eval = Complex64::new(eval_at, 0.0);
    let truth_eval = try_truth(map, z_eval)?;
    for &(m, n, budget, ref fit) in &fits {
        let (rel, tay) = match &truth_eval {
            Some((tv, tnorm)) => {
                let rel = match try_surrogate(fit, z_eval)? {
                    Some(v) => map.space().norm(&v.sub(tv))? / tnorm,
                    None => f64::NAN,
                };
                let tay_v = table.partial_sum(z_eval, budget)?;
                (rel, map.space().norm(&tay_v.sub(tv))? / tnorm)
            }
            None => (f64::NAN, f64::NAN),
        };
        let rate = match &poles {
            Some(ps) if ps.len() > n => heuristic_rate(z_eval, z0, ps, m, n)?,
            _ => f64::NAN,
        };
        error.push_row(vec![
            m.into(),
            n.into(),
            budget.into(),
            rel.into(),
            tay.into(),
            rate.into(),
        ]);
    }
    let error_path = out_dir.join("error.csv");
    error.write(&error_path)?;
    files.push(error_path);

    // Denominator roots matched greedily against the known spectrum inside
    // the interval; spurious roots stay unmatched.
    let mut roots = Table::new(
        "roots",
        &["m", "n", "root_re", "root_im", "physical", "matched_pole", "distance"],
    );
    stamp(&mut roots, cfg);
    let window_poles: Vec<f64> = poles
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .copied()
        .filter(|&p| (kmin..=kmax).contains(&p))
        .collect();
    for &(m, n, _, ref fit) in &fits {
        let all_roots = fit.poles()?;
        let physical: Vec<bool> = all_roots
            .iter()
            .map(|r| {
                let mid = 0.5 * (kmin + kmax);
                r.im.abs() <= 1.0 && (r.re - mid).abs() <= kmax - kmin
            })
            .collect();
        let mut used = vec![false; window_poles.len()];
        for (root, &is_physical) in all_roots.iter().zip(&physical) {
            let mut matched = f64::NAN;
            let mut distance = f64::NAN;
            if is_physical {
                let best = window_poles
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| !used[j])
                    .map(|(j, &p)| (j, (root - p).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((j, d)) = best {
                    used[j] = true;
                    matched = window_poles[j];
                    distance = d;
                }
            }
            roots.push_row(vec![
                m.into(),
                n.into(),
                root.re.into(),
                root.im.into(),
                is_physical.into(),
                matched.into(),
                distance.into(),
            ]);
        }
    }
    let roots_path = out_dir.join("roots.csv");
    roots.write(&roots_path)?;
    files.push(roots_path);

    write_diagnostics(cfg, out_dir, &fits, radius, files)?;

    if cfg.emit_svg {
        let mut series = vec![truth_series];
        series.extend(fit_series);
        let svg = line_plot("response norm over the interval", "z", "norm", true, &series);
        let path = out_dir.join("sweep.svg");
        fs::write(&path, svg)?;
        files.push(path);

        let mut by_n: Vec<(usize, Series, Series)> = Vec::new();
        for &(m, n, budget, _) in &fits {
            let idx = match by_n.iter().position(|&(nn, _, _)| nn == n) {
                Some(i) => i,
                None => {
                    by_n.push((
                        n,
                        Series {
                            label: format!("pade n={n}"),
                            points: Vec::new(),
                        },
                        Series {
                            label: format!("taylor (n={n} budgets)"),
                            points: Vec::new(),
                        },
                    ));
                    by_n.len() - 1
                }
            };
            // Reuse the rows already computed for error.csv.
            let row = error_row(&error, m, n);
            if let Some((rel, tay)) = row {
                by_n[idx].1.points.push((m as f64, rel));
                by_n[idx].2.points.push((budget as f64, tay));
            }
        }
        let mut err_series = Vec::new();
        for (_, a, b) in by_n {
            err_series.push(a);
            err_series.push(b);
        }
        let svg = line_plot("relative error against degree", "M", "relative error", true, &err_series);
        let path = out_dir.join("error.svg");
        fs::write(&path, svg)?;
        files.push(path);
    }
    Ok(())
}

/// Looks a computed error row back up by its degree pair.
fn error_row(table: &Table, m: usize, n: usize) -> Option<(f64, f64)> {
    table.rows().iter().find_map(|row| {
        match (&row[0], &row[1], &row[3], &row[4]) {
            (Cell::Int(rm), Cell::Int(rn), Cell::Float(rel), Cell::Float(tay))
                if *rm == m as i64 && *rn == n as i64 =>
            {
                Some((*rel, *tay))
            }
            _ => None,
        }
    })
}

fn write_diagnostics(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    fits: &[(usize, usize, usize, PadeApproximant)],
    radius: f64,
    files: &mut Vec<PathBuf>,
) -> RResult<()> {
    let mut diag = Table::new(
        "diagnostics",
        &[
            "m",
            "n",
            "budget",
            "radius",
            "residual",
            "lambda_min",
            "spectral_gap",
            "gramian_norm",
            "degenerate",
        ],
    );
    stamp(&mut diag, cfg);
    for &(m, n, budget, ref fit) in fits {
        let d = fit.diagnostics();
        diag.push_row(vec![
            m.into(),
            n.into(),
            budget.into(),
            radius.into(),
            fit.residual().into(),
            d.lambda_min.into(),
            d.spectral_gap.into(),
            d.gramian_norm.into(),
            d.degenerate.into(),
        ]);
    }
    let path = out_dir.join("diagnostics.csv");
    diag.write(&path)?;
    files.push(path);
    Ok(())
}

/// File-name fragment for an evaluation point: `2` -> "2", `2.5` -> "2p5".
fn float_slug(x: f64) -> String {
    format!("{x}").replace('.', "p").replace('-', "m")
}

/// Scattering study: one surrogate family per evaluation point (the
/// residual radius tracks the point unless fixed), with relative errors
/// against a direct solve and full-field tables for the first degree pair.
fn scattering_experiments(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    direction: f64,
    eval_points: &[f64],
    files: &mut Vec<PathBuf>,
) -> RResult<()> {
    let z0 = cfg.center_complex();
    let map = ScatteringResponseMap::new(cfg.grid, direction, z0)?;
    let table = TaylorTable::from_map(&map, cfg.max_budget())?;
    let space = map.space().clone();
    let first_pair = cfg.degrees[0];

    let mut errors = Table::new(
        "scattering-errors",
        &["z", "m", "n", "budget", "radius", "truth_norm", "pade_rel_err", "taylor_rel_err"],
    );
    stamp(&mut errors, cfg);

    for &zr in eval_points {
        let z = Complex64::new(zr, 0.0);
        let radius = match cfg.radius {
            RadiusRule::Auto => (z - z0).norm(),
            RadiusRule::Explicit(rho) => rho,
        };
        let truth = map.evaluate(z)?;
        let truth_norm = space.norm(&truth)?;
        let mut field_fit = None;
        for &[m, n] in &cfg.degrees {
            let pcfg = PadeConfig::new(m, n, cfg.budget_for(m, n), radius, z0)?;
            let fit = PadeApproximant::from_table(&table, &pcfg)?;
            let pade = fit.evaluate(z)?;
            let pade_err = space.norm(&pade.sub(&truth))? / truth_norm;
            let tay = table.partial_sum(z, pcfg.budget)?;
            let tay_err = space.norm(&tay.sub(&truth))? / truth_norm;
            errors.push_row(vec![
                zr.into(),
                m.into(),
                n.into(),
                pcfg.budget.into(),
                radius.into(),
                truth_norm.into(),
                pade_err.into(),
                tay_err.into(),
            ]);
            if [m, n] == first_pair {
                field_fit = Some(fit);
            }
        }

        let fit = field_fit.expect("degree list is validated nonempty");
        let pade_full = map.full_field(&fit.evaluate(z)?);
        let budget = cfg.budget_for(first_pair[0], first_pair[1]);
        let tay_full = map.full_field(&table.partial_sum(z, budget)?);
        let truth_full = map.full_field(&truth);
        let mut field = Table::new(
            "scattering-field",
            &["node", "x", "y", "truth_re", "truth_im", "pade_re", "pade_im", "taylor_re", "taylor_im"],
        );
        stamp(&mut field, cfg);
        field.meta("z", format_float(zr));
        field.meta("degrees", format!("{} {}", first_pair[0], first_pair[1]));
        let grid = map.grid();
        for node in 0..grid.node_count() {
            let (ix, iy) = grid.node_coords(node);
            let (x, y) = grid.node_xy(ix, iy);
            field.push_row(vec![
                node.into(),
                x.into(),
                y.into(),
                truth_full[node].re.into(),
                truth_full[node].im.into(),
                pade_full[node].re.into(),
                pade_full[node].im.into(),
                tay_full[node].re.into(),
                tay_full[node].im.into(),
            ]);
        }
        let path = out_dir.join(format!("field_z{}.csv", float_slug(zr)));
        field.write(&path)?;
        files.push(path);
    }
    let errors_path = out_dir.join("errors.csv");
    errors.write(&errors_path)?;
    files.push(errors_path);
    Ok(())
}

/// Modal truth for the random-wavenumber study: every distinct discrete
/// interior eigenvalue within one interval-width of the interval becomes a
/// simple pole carrying its (combined, normalized) eigenvector, with a
/// residue magnitude equal to the pole's distance from the expansion
/// center.
pub fn modal_truth(cfg: &ExperimentConfig) -> RResult<(ModalResponseMap, Arc<WeightedSpace>)> {
    let z0 = cfg.center_complex();
    let [kmin, kmax] = cfg.interval;
    let grid = Grid2d::from_box(0.0, PI, 0.0, PI, cfg.grid, cfg.grid)?;
    let classify = move |ix: usize, iy: usize| {
        if grid.on_outer_boundary(ix, iy) {
            NodeClass::Fixed
        } else {
            NodeClass::Dof
        }
    };
    let asm = assemble_2d(&grid, &classify, &|_, _| true)?;
    let dof_map = asm.dof_map;
    let space = WeightedSpace::new(asm.stiffness, asm.mass, None, z0.re.sqrt())?;

    let width = kmax - kmin;
    let lo = (kmin - width).max(0.0);
    let hi = kmax + width;
    let mode_values = |m: usize, n: usize| -> Vec<Complex64> {
        (0..space.dim())
            .map(|dof| {
                let (ix, iy) = grid.node_coords(dof_map.node_of_dof(dof));
                let (x, y) = grid.node_xy(ix, iy);
                Complex64::new((m as f64 * x).sin() * (n as f64 * y).sin(), 0.0)
            })
            .collect()
    };

    let mut candidates: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for m in 1..cfg.grid {
        for n in m..cfg.grid {
            let lam = fd_eigenvalue(m, n, grid.h);
            if !(lo..=hi).contains(&lam) {
                continue;
            }
            let mut values = mode_values(m, n);
            if n != m {
                // The swapped index pair shares this eigenvalue exactly;
                // a simple-pole expansion needs the pair as one term.
                for (v, w) in values.iter_mut().zip(mode_values(n, m)) {
                    *v += w;
                }
            }
            candidates.push((lam, values));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for (lam, values) in candidates {
        match merged.last_mut() {
            Some((prev, acc)) if (lam - *prev).abs() <= 1e-12 * lam.abs().max(1.0) => {
                for (a, b) in acc.iter_mut().zip(values) {
                    *a += b;
                }
            }
            _ => merged.push((lam, values)),
        }
    }
    if merged.is_empty() {
        return Err(RunError(format!(
            "no discrete eigenvalue falls in [{lo}, {hi}] at grid {}; refine the grid \
             or widen the interval",
            cfg.grid
        )));
    }
    let mut terms = Vec::with_capacity(merged.len());
    for (lam, values) in merged {
        let mut mode = space.vector(values)?;
        let norm = space.norm(&mode)?;
        mode.scale(Complex64::new(1.0 / norm, 0.0));
        terms.push(ModalTerm {
            pole: lam,
            coefficient: Complex64::new((z0 - lam).norm(), 0.0),
            mode,
        });
    }
    let map = ModalResponseMap::new_load(space.clone(), z0, terms)?;
    Ok((map, space))
}

/// Random-wavenumber study: paired samples, characteristic-function error
/// curves, and the fitted decay rate per denominator degree.
fn stochastic_experiments(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    samples: usize,
    display_samples: usize,
    t_max: f64,
    t_points: usize,
    files: &mut Vec<PathBuf>,
) -> RResult<()> {
    let z0 = cfg.center_complex();
    let radius = cfg.resolved_radius();
    let [kmin, kmax] = cfg.interval;
    let (map, _space) = modal_truth(cfg)?;
    let table = TaylorTable::from_map(&map, cfg.max_budget())?;
    let fits = fit_all(cfg, &table, radius)?;
    let rw = RandomWavenumber::new(kmin, kmax, Density::Uniform, cfg.seed)?;
    let qoi = QuantityOfInterest::WeightedNorm;
    let t_grid: Vec<f64> = (0..t_points)
        .map(|i| -t_max + 2.0 * t_max * i as f64 / (t_points - 1) as f64)
        .collect();

    let mut samples_table = Table::new(
        "stochastic-samples",
        &["m", "n", "sample", "k2", "qoi_truth", "qoi_surrogate"],
    );
    let mut chf = Table::new(
        "characteristic-function",
        &[
            "m",
            "n",
            "t",
            "phi_truth_re",
            "phi_truth_im",
            "phi_surrogate_re",
            "phi_surrogate_im",
            "abs_err",
        ],
    );
    let mut rates = Table::new(
        "stochastic-rates",
        &[
            "m",
            "n",
            "samples_used",
            "max_err",
            "noise_floor",
            "fitted_slope",
            "fit_stderr",
            "theoretical_slope",
            "resolvable",
            "bound_satisfied",
        ],
    );
    for t in [&mut samples_table, &mut chf, &mut rates] {
        stamp(t, cfg);
        t.meta("radius", format_float(radius));
        t.meta("truth_poles", map.poles().map_or(0, |p| p.len()).to_string());
    }

    struct PairOutcome {
        m: usize,
        n: usize,
        used: usize,
        max_err: f64,
    }
    let mut outcomes = Vec::with_capacity(fits.len());
    let mut err_series = Vec::new();
    for &(m, n, _, ref fit) in &fits {
        // The display set is a prefix of the main stream: counter-based
        // draws make the first draws of both runs identical.
        let disp = sample_set(&rw, display_samples, &map, fit, &qoi)?;
        for (i, ((&k2, &xt), &xp)) in disp.draws.iter().zip(&disp.x).zip(&disp.x_p).enumerate() {
            samples_table.push_row(vec![
                m.into(),
                n.into(),
                i.into(),
                k2.into(),
                xt.into(),
                xp.into(),
            ]);
        }
        let big = sample_set(&rw, samples, &map, fit, &qoi)?;
        let mut max_err = 0.0f64;
        let mut series = Series {
            label: format!("({m}, {n})"),
            points: Vec::new(),
        };
        for &t in &t_grid {
            let phi_truth = characteristic_fn(&big.x, t);
            let phi_surr = characteristic_fn(&big.x_p, t);
            let err = (phi_truth - phi_surr).norm();
            max_err = max_err.max(err);
            series.points.push((t, err));
            chf.push_row(vec![
                m.into(),
                n.into(),
                t.into(),
                phi_truth.re.into(),
                phi_truth.im.into(),
                phi_surr.re.into(),
                phi_surr.im.into(),
                err.into(),
            ]);
        }
        err_series.push(series);
        outcomes.push(PairOutcome {
            m,
            n,
            used: big.len(),
            max_err,
        });
    }

    // One rate fit per distinct denominator degree, over that family's
    // numerator degrees.
    let floor = mc_noise_floor(samples);
    let truth_poles = map.poles().expect("modal maps expose their spectrum");
    let mut distances: Vec<f64> = truth_poles.iter().map(|&p| (z0 - p).norm()).collect();
    distances.sort_by(f64::total_cmp);
    let mut fits_by_n: Vec<(usize, pade_mor::stochastic::RateFit)> = Vec::new();
    for outcome in &outcomes {
        if fits_by_n.iter().any(|&(n, _)| n == outcome.n) {
            continue;
        }
        let points: Vec<(usize, f64)> = outcomes
            .iter()
            .filter(|o| o.n == outcome.n)
            .map(|o| (o.m, o.max_err))
            .collect();
        let r_cap = distances
            .get(outcome.n)
            .copied()
            .unwrap_or_else(|| *distances.last().expect("nonempty spectrum"));
        fits_by_n.push((outcome.n, fit_rate(&points, radius, r_cap, floor)));
    }
    for outcome in &outcomes {
        let (_, rate_fit) = fits_by_n
            .iter()
            .find(|&&(n, _)| n == outcome.n)
            .expect("every degree pair was fitted");
        rates.push_row(vec![
            outcome.m.into(),
            outcome.n.into(),
            outcome.used.into(),
            outcome.max_err.into(),
            floor.into(),
            rate_fit.slope.into(),
            rate_fit.stderr.into(),
            rate_fit.theoretical.into(),
            rate_fit.resolvable.into(),
            rate_fit.bound_satisfied.into(),
        ]);
    }

    for (name, table) in [
        ("samples.csv", &samples_table),
        ("chf.csv", &chf),
        ("rates.csv", &rates),
    ] {
        let path = out_dir.join(name);
        table.write(&path)?;
        files.push(path);
    }
    if cfg.emit_svg {
        let svg = line_plot(
            "characteristic-function error",
            "t",
            "absolute error",
            true,
            &err_series,
        );
        let path = out_dir.join("chf.svg");
        fs::write(&path, svg)?;
        files.push(path);
    }
    Ok(())
}
