//! The `det`, `xi`, `scan`, `check` and `decompose` subcommands.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use ssf_core::convergence::{rank_one_gap, scan_infinite_volume};
use ssf_core::decomposition::{xi_direct_sum, xi_split_correction, SplitGeometry};
use ssf_core::determinants::{det_nystrom, det_nystrom_extrapolated, det_wronskian, DeterminantMethod};
use ssf_core::geometry::Geometry;
use ssf_core::greens::{krein_residual, KreinIdentity};
use ssf_core::report::{csv, fmt_f64, grid_csv, grid_metadata_json, scan_csv, to_json, write_text};
use ssf_core::solutions::SpectralParameter;
use ssf_core::ssf::{
    halfline_eigenvalues, lambda_grid, lower_bound, trace_formula_residual, xi, xi_finite, xi_halfline_phase,
    xi_sign_split, SpectralShiftGrid,
};
use ssf_core::SsfError;

use crate::config::Resolved;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Det,
    Xi,
    Scan,
    Check,
    Decompose,
}

pub struct Context<'a> {
    pub cfg: &'a Resolved,
    pub out: PathBuf,
    pub verbose: bool,
}

impl Context<'_> {
    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("{msg}");
        }
    }

    fn write(&self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        write_text(&path, text)?;
        self.log(&format!("wrote {}", path.display()));
        Ok(())
    }

    fn geometries(&self) -> Vec<Geometry> {
        let c = self.cfg;
        let mut g: Vec<Geometry> = c
            .config
            .geometry
            .r_values
            .iter()
            .map(|&r| Geometry::Interval {
                length: r,
                alpha: c.alpha,
                beta: c.beta,
            })
            .collect();
        if c.config.geometry.halfline {
            g.push(Geometry::halfline(c.alpha));
        }
        g
    }

    /// λ-grid shared by the ξ outputs: refined near 0 and near half-line eigenvalues.
    fn lambda_grid(&self) -> Result<Vec<f64>, CliError> {
        let c = self.cfg;
        let l = &c.config.lambda;
        let lo = match l.min {
            Some(m) => m,
            None => self
                .geometries()
                .iter()
                .map(|g| lower_bound(&c.potential, g))
                .fold(f64::INFINITY, f64::min)
                .min(0.0)
                - 1.0,
        };
        let mut dense = vec![0.0];
        if !c.potential.is_zero() {
            dense.extend(halfline_eigenvalues(&c.potential, c.alpha, c.opts.tail_tol)?);
        }
        Ok(lambda_grid(lo, l.max, l.step, l.fine_step, 0.02, &dense))
    }
}

/// Runs a subcommand; the resolved config is echoed to the output directory first.
pub fn run(cmd: Command, ctx: &Context) -> Result<(), CliError> {
    ctx.write("config.resolved.toml", &ctx.cfg.echo()?)?;
    match cmd {
        Command::Det => det(ctx),
        Command::Xi => xi_cmd(ctx),
        Command::Scan => scan(ctx),
        Command::Check => check(ctx),
        Command::Decompose => decompose(ctx),
    }
}

fn geometry_label(g: &Geometry) -> (String, f64) {
    match *g {
        Geometry::Interval { length, .. } => ("interval".into(), length),
        Geometry::HalfLine { .. } => ("half-line".into(), f64::INFINITY),
    }
}

#[derive(Debug, Serialize)]
struct DetRow {
    geometry: String,
    r: f64,
    z: [f64; 2],
    method: DeterminantMethod,
    nodes: Option<usize>,
    value: Option<Complex64>,
    error: Option<String>,
}

fn det(ctx: &Context) -> Result<(), CliError> {
    let c = ctx.cfg;
    let mut tasks = Vec::new();
    for g in ctx.geometries() {
        for z in &c.config.determinant.z {
            for m in [
                DeterminantMethod::Wronskian,
                DeterminantMethod::Nystrom,
                DeterminantMethod::NystromExtrapolated,
            ] {
                tasks.push((g, *z, m));
            }
        }
    }
    let n = c.config.determinant.nystrom_nodes;
    let rows: Vec<DetRow> = tasks
        .par_iter()
        .map(|&(g, z, method)| {
            let res = SpectralParameter::from_parts(z[0], z[1]).and_then(|sp| match method {
                DeterminantMethod::Wronskian => det_wronskian(&g, &c.potential, &sp, &c.opts),
                DeterminantMethod::Nystrom => det_nystrom(&g, &c.potential, &sp, n),
                DeterminantMethod::NystromExtrapolated => det_nystrom_extrapolated(&g, &c.potential, &sp, n),
            });
            let (geometry, r) = geometry_label(&g);
            let nodes = (method != DeterminantMethod::Wronskian).then_some(n);
            match res {
                Ok(v) => DetRow {
                    geometry,
                    r,
                    z,
                    method,
                    nodes: v.node_count.or(nodes),
                    value: Some(v.value),
                    error: None,
                },
                Err(e) => DetRow {
                    geometry,
                    r,
                    z,
                    method,
                    nodes,
                    value: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let table = csv(
        &["geometry", "R", "z_re", "z_im", "method", "nodes", "value_re", "value_im", "error"],
        rows.iter().map(|r| {
            let (re, im) = r.value.map_or((String::new(), String::new()), |v| (fmt_f64(v.re), fmt_f64(v.im)));
            vec![
                r.geometry.clone(),
                fmt_f64(r.r),
                fmt_f64(r.z[0]),
                fmt_f64(r.z[1]),
                r.method.label().to_string(),
                r.nodes.map_or(String::new(), |n| n.to_string()),
                re,
                im,
                r.error.clone().unwrap_or_default(),
            ]
        }),
    );
    ctx.write("det.csv", &table)?;
    ctx.write("det.json", &to_json(&rows)?)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        return Err(CliError::TasksFailed(failed));
    }
    Ok(())
}

fn grid_name(g: &Geometry) -> String {
    match *g {
        Geometry::Interval { length, .. } => format!("xi_R{length}"),
        Geometry::HalfLine { .. } => "xi_halfline".into(),
    }
}

fn write_grid(ctx: &Context, stem: &str, grid: &SpectralShiftGrid) -> Result<(), CliError> {
    ctx.write(&format!("{stem}.csv"), &grid_csv(grid))?;
    ctx.write(&format!("{stem}.json"), &grid_metadata_json(grid)?)
}

fn xi_cmd(ctx: &Context) -> Result<(), CliError> {
    let c = ctx.cfg;
    let grid = ctx.lambda_grid()?;
    ctx.log(&format!("lambda grid: {} points", grid.len()));
    let geoms = ctx.geometries();
    let results: Vec<Result<SpectralShiftGrid, SsfError>> =
        geoms.par_iter().map(|g| xi(&c.potential, g, &grid, c.eps, &c.opts)).collect();
    let mut failed = Vec::new();
    for (g, r) in geoms.iter().zip(results) {
        match r {
            Ok(grid) => write_grid(ctx, &grid_name(g), &grid)?,
            Err(e) => failed.push(vec![grid_name(g), e.to_string()]),
        }
    }
    if !failed.is_empty() {
        let n = failed.len();
        ctx.write("xi_errors.csv", &csv(&["grid", "error"], failed))?;
        return Err(CliError::TasksFailed(n));
    }
    Ok(())
}

fn scan(ctx: &Context) -> Result<(), CliError> {
    let c = ctx.cfg;
    let report = scan_infinite_volume(
        &c.potential,
        c.alpha,
        c.beta,
        &c.config.geometry.r_values,
        &c.scan_settings(),
        &c.opts,
    )?;
    ctx.write("scan.json", &to_json(&report)?)?;
    ctx.write("scan.csv", &scan_csv(&report))?;
    let failed = report.entries.iter().filter(|e| e.error.is_some()).count();
    if failed > 0 {
        return Err(CliError::TasksFailed(failed));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn measured(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            status: if value <= tolerance { Status::Pass } else { Status::Fail },
            value,
            tolerance,
            detail,
        }
    }

    fn skip(name: &str, detail: &str) -> Self {
        CheckResult {
            name: name.into(),
            status: Status::Skip,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: detail.into(),
        }
    }

    fn failed(name: &str, err: SsfError) -> Self {
        CheckResult {
            name: name.into(),
            status: Status::Fail,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: err.to_string(),
        }
    }
}

type CheckFn<'a> = Box<dyn Fn() -> Result<CheckResult, SsfError> + Send + Sync + 'a>;

/// The invariant suite, in a fixed order.
pub fn run_checks(ctx: &Context) -> Result<Vec<CheckResult>, CliError> {
    let c = ctx.cfg;
    let pot = &c.potential;
    let Some(&r_max) = c.config.geometry.r_values.last() else {
        return Err(CliError::Config(vec!["geometry.r_values: check needs at least one R".into()]));
    };
    let interval = Geometry::Interval {
        length: r_max,
        alpha: c.alpha,
        beta: c.beta,
    };
    let half = Geometry::halfline(c.alpha);
    let halfline = c.config.geometry.halfline;
    let low = lower_bound(pot, &interval).min(lower_bound(pot, &half));
    let coarse: Vec<f64> = {
        let top = c.config.lambda.max.min(20.0);
        let n = ((top - (low - 1.0)) / 0.05).ceil() as usize;
        (0..=n).map(|k| low - 1.0 + (top - low + 1.0) * k as f64 / n as f64).collect()
    };
    let eigen = if pot.is_zero() || !halfline {
        Vec::new()
    } else {
        halfline_eigenvalues(pot, c.alpha, c.opts.tail_tol)?
    };

    let full_grid = if halfline { ctx.lambda_grid()? } else { Vec::new() };

    let mut checks: Vec<(&str, CheckFn)> = Vec::new();

    checks.push((
        "determinant-methods-agree",
        Box::new(|| {
            let n = c.config.determinant.nystrom_nodes;
            let mut worst: f64 = 0.0;
            let mut used = 0;
            let geoms: Vec<Geometry> = if halfline { vec![interval, half] } else { vec![interval] };
            for g in geoms {
                for z in &c.config.determinant.z {
                    let sp = SpectralParameter::from_parts(z[0], z[1])?;
                    let (a, b) = (
                        det_wronskian(&g, pot, &sp, &c.opts),
                        det_nystrom_extrapolated(&g, pot, &sp, n),
                    );
                    if let (Ok(a), Ok(b)) = (a, b) {
                        worst = worst.max((a.value - b.value).norm() / a.value.norm().max(1e-300));
                        used += 1;
                    }
                }
            }
            if used == 0 {
                return Ok(CheckResult::skip("determinant-methods-agree", "no z evaluable by both methods"));
            }
            Ok(CheckResult::measured(
                "determinant-methods-agree",
                worst,
                c.config.check.det_tolerance,
                format!("max relative difference over {used} (geometry, z) pairs, extrapolated Nyström with n = {n}"),
            ))
        }),
    ));

    checks.push((
        "xi-normalization",
        Box::new(|| {
            let anchor = low - 1.0;
            let mut v = xi_finite(pot, c.alpha, c.beta, r_max, &[anchor])?.values[0].abs();
            if halfline {
                v = v.max(xi_halfline_phase(pot, c.alpha, &[anchor], c.eps, &c.opts)?.values[0].abs());
            }
            Ok(CheckResult::measured("xi-normalization", v, 1e-8, format!("|xi| at the anchor {anchor}")))
        }),
    ));

    checks.push((
        "xi-sign-definite",
        Box::new(|| {
            let (nonneg, nonpos) = pot.sign_definite();
            if !(nonneg || nonpos) {
                return Ok(CheckResult::skip("xi-sign-definite", "potential changes sign"));
            }
            let g = xi_finite(pot, c.alpha, c.beta, r_max, &coarse)?;
            let bad = g
                .values
                .iter()
                .filter(|&&v| (nonneg && v < 0.0) || (nonpos && v > 0.0))
                .count();
            Ok(CheckResult::measured(
                "xi-sign-definite",
                bad as f64,
                0.0,
                format!("grid points of the wrong sign out of {}", coarse.len()),
            ))
        }),
    ));

    checks.push((
        "sign-split-identity",
        Box::new(|| {
            let g = xi_finite(pot, c.alpha, c.beta, r_max, &coarse)?;
            let (p, m) = xi_sign_split(pot, &interval, &coarse, c.eps, &c.opts)?;
            let worst = g
                .values
                .iter()
                .zip(p.values.iter().zip(&m.values))
                .map(|(v, (a, b))| (v - (a - b)).abs())
                .fold(0.0, f64::max);
            let neg = p.values.iter().chain(&m.values).any(|&v| v < 0.0);
            Ok(CheckResult {
                status: if worst == 0.0 && !neg { Status::Pass } else { Status::Fail },
                name: "sign-split-identity".into(),
                value: worst,
                tolerance: 0.0,
                detail: format!("xi = xi+ - xi- on {} points, parts nonnegative: {}", coarse.len(), !neg),
            })
        }),
    ));

    checks.push((
        "counting-vs-phase",
        Box::new(|| {
            if !halfline {
                return Ok(CheckResult::skip("counting-vs-phase", "half-line disabled"));
            }
            let neg: Vec<f64> = coarse
                .iter()
                .copied()
                .filter(|&l| l < -1e-2 && eigen.iter().all(|e| (e - l).abs() >= 1e-2))
                .collect();
            if neg.is_empty() {
                return Ok(CheckResult::skip("counting-vs-phase", "no negative lambda away from eigenvalues"));
            }
            let a = xi_finite(pot, c.alpha, c.beta, r_max, &neg)?;
            let b = xi_halfline_phase(pot, c.alpha, &neg, c.eps, &c.opts)?;
            let bad = a.values.iter().zip(&b.values).filter(|(x, y)| **x != y.round()).count();
            Ok(CheckResult::measured(
                "counting-vs-phase",
                bad as f64,
                0.0,
                format!("mismatches at R = {r_max} over {} negative lambda", neg.len()),
            ))
        }),
    ));

    checks.push((
        "trace-formula",
        Box::new(|| {
            if !halfline {
                return Ok(CheckResult::skip("trace-formula", "half-line disabled"));
            }
            let z = c.config.check.trace_z.unwrap_or(low - 4.0);
            let g = xi_halfline_phase(pot, c.alpha, &full_grid, c.eps, &c.opts)?;
            let t = trace_formula_residual(pot, &half, Complex64::new(z, 0.0), &g, 1, &c.opts)?;
            let rel = if t.rhs.norm() == 0.0 { t.residual } else { t.relative() };
            Ok(CheckResult::measured(
                "trace-formula",
                rel,
                1e-3,
                format!("n = 1 at z = {z}, relative to |rhs| = {:e}", t.rhs.norm()),
            ))
        }),
    ));

    checks.push((
        "krein-interval-vs-halfline",
        Box::new(|| {
            if !halfline {
                return Ok(CheckResult::skip("krein-interval-vs-halfline", "half-line disabled"));
            }
            let sp = SpectralParameter::from_parts(low - 1.0, 0.5)?;
            let id = KreinIdentity::IntervalVsHalfline {
                alpha: c.alpha,
                beta: c.beta,
                r: r_max,
            };
            let mut worst: f64 = 0.0;
            for (x, xp) in [(0.25, 0.5), (0.5, 0.5), (0.3, 0.9), (0.75, 0.4)] {
                worst = worst.max(krein_residual(pot, id, &sp, x * r_max, xp * r_max, &c.opts)?);
            }
            Ok(CheckResult::measured(
                "krein-interval-vs-halfline",
                worst,
                1e-7,
                format!("relative residual at 4 points, z = {}", sp.z),
            ))
        }),
    ));

    checks.push((
        "rank-one-gap",
        Box::new(|| {
            let v = rank_one_gap(c.config.check.rank_one_dim, c.config.check.rank_one_trials, c.config.seed)?;
            Ok(CheckResult::measured(
                "rank-one-gap",
                v.max(0.0),
                1e-12,
                format!("max (trace norm - bound), raw {v:e}"),
            ))
        }),
    ));

    let results = checks
        .par_iter()
        .map(|(name, f)| {
            let r = f().unwrap_or_else(|e| CheckResult::failed(name, e));
            ctx.log(&format!("{:<28} {:?}", r.name, r.status));
            r
        })
        .collect();
    Ok(results)
}

fn check(ctx: &Context) -> Result<(), CliError> {
    let results = run_checks(ctx)?;
    let table = csv(
        &["check", "status", "value", "tolerance", "detail"],
        results.iter().map(|r| {
            vec![
                r.name.clone(),
                format!("{:?}", r.status).to_lowercase(),
                fmt_f64(r.value),
                fmt_f64(r.tolerance),
                r.detail.clone(),
            ]
        }),
    );
    ctx.write("check.csv", &table)?;
    ctx.write("check.json", &to_json(&results)?)?;
    for r in &results {
        println!("{:<28} {:<5} {}", r.name, format!("{:?}", r.status).to_uppercase(), r.detail);
    }
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    if failed > 0 {
        return Err(CliError::TasksFailed(failed));
    }
    Ok(())
}

fn decompose(ctx: &Context) -> Result<(), CliError> {
    let c = ctx.cfg;
    let Some([r1, r2]) = c.config.geometry.split else {
        return Err(CliError::Config(vec!["geometry.split: required by decompose".into()]));
    };
    let split = SplitGeometry::new(r1, r2)?;
    let grid = ctx.lambda_grid()?;
    let d = ssf_core::solutions::BoundaryCondition::DIRICHLET;
    let (full, (direct, corr)) = rayon::join(
        || xi_finite(&c.potential, d, d, r2, &grid),
        || {
            rayon::join(
                || xi_direct_sum(&c.potential, split, &grid),
                || xi_split_correction(&c.potential, split, &grid),
            )
        },
    );
    write_grid(ctx, "decompose_full", &full?)?;
    write_grid(ctx, "decompose_direct_sum", &direct?)?;
    write_grid(ctx, "decompose_correction", &corr?)?;
    Ok(())
}

/// Output directory: the flag wins over the config entry.
pub fn output_dir(flag: Option<&Path>, cfg: &Resolved) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.config.output.clone())
        .unwrap_or_else(|| PathBuf::from("ssf-out"))
}
