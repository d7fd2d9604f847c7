//! Infinite-volume limits of spectral shift data: weighted integrals, interval
//! masses, distribution functions, determinant gaps and Cesàro means of the
//! finite-interval ξ_R against the half-line ξ.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinants::{det_wronskian_finite, det_wronskian_halfline};
use crate::error::{Result, SsfError};
use crate::geometry::Geometry;
use crate::numerics::quad::{integrate_to_infinity, QuadTol};
use crate::potential::Potential;
use crate::solutions::{BoundaryCondition, SolverOptions, SpectralParameter};
use crate::ssf::{
    count_states, halfline_eigenvalues, lambda_grid, lower_bound, xi_finite, xi_halfline_phase, EpsilonPolicy,
    SpectralShiftGrid,
};

/// Bounded test functions on ℝ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// 1 / (1 + ((λ − center)/width)²)
    Rational { center: f64, width: f64 },
    /// exp(−((λ − center)/width)²)
    Gaussian { center: f64, width: f64 },
    /// 1 / (1 + exp(−(λ − center)/width))
    Sigmoid { center: f64, width: f64 },
    Indicator { lo: f64, hi: f64 },
    /// ½[tanh((λ − lo)/width) − tanh((λ − hi)/width)]
    MollifiedIndicator { lo: f64, hi: f64, width: f64 },
}

impl TestFunction {
    pub fn one() -> Self {
        TestFunction::Constant { value: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TestFunction::Constant { value } => value.is_finite(),
            TestFunction::Rational { center, width }
            | TestFunction::Gaussian { center, width }
            | TestFunction::Sigmoid { center, width } => center.is_finite() && width > 0.0 && width.is_finite(),
            TestFunction::Indicator { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            TestFunction::MollifiedIndicator { lo, hi, width } => {
                lo.is_finite() && hi.is_finite() && lo < hi && width > 0.0 && width.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SsfError::domain(format!("invalid test function {self}")))
        }
    }

    pub fn eval(&self, l: f64) -> f64 {
        match *self {
            TestFunction::Constant { value } => value,
            TestFunction::Rational { center, width } => 1.0 / (1.0 + ((l - center) / width).powi(2)),
            TestFunction::Gaussian { center, width } => (-((l - center) / width).powi(2)).exp(),
            TestFunction::Sigmoid { center, width } => 1.0 / (1.0 + (-(l - center) / width).exp()),
            TestFunction::Indicator { lo, hi } => {
                if l >= lo && l <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::MollifiedIndicator { lo, hi, width } => {
                0.5 * (((l - lo) / width).tanh() - ((l - hi) / width).tanh())
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match *self {
            TestFunction::Constant { value } => value.abs(),
            _ => 1.0,
        }
    }

    /// Points where f is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            TestFunction::Indicator { lo, hi } => vec![lo, hi],
            _ => Vec::new(),
        }
    }

    /// Interval outside of which f vanishes.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            TestFunction::Indicator { lo, hi } => Some((lo, hi)),
            _ => None,
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TestFunction::Constant { value } => write!(f, "constant({value})"),
            TestFunction::Rational { center, width } => write!(f, "rational({center},{width})"),
            TestFunction::Gaussian { center, width } => write!(f, "gaussian({center},{width})"),
            TestFunction::Sigmoid { center, width } => write!(f, "sigmoid({center},{width})"),
            TestFunction::Indicator { lo, hi } => write!(f, "indicator[{lo},{hi}]"),
            TestFunction::MollifiedIndicator { lo, hi, width } => write!(f, "mollified-indicator[{lo},{hi};{width}]"),
        }
    }
}

/// Default tolerance on the certified tail of a weighted integral.
pub const TAIL_TOL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedIntegral {
    pub value: f64,
    /// Bound on the neglected contribution beyond the grid end.
    pub tail_bound: f64,
}

/// Largest |ξ| over the last tenth of the grid.
fn end_plateau(xi: &SpectralShiftGrid) -> f64 {
    let hi = xi.lambda_max();
    let start = hi - 0.1 * (hi - xi.lambda_min());
    xi.lambdas
        .iter()
        .zip(&xi.values)
        .filter(|(l, _)| **l >= start)
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

fn lower_limit(xi: &SpectralShiftGrid) -> f64 {
    xi.normalization_anchor.min(xi.lambda_min())
}

/// ∫ ξ(λ) f(λ) dλ / (1 + λ²) with a certified tail bound.
pub fn weighted_integral(xi: &SpectralShiftGrid, f: &TestFunction, tail_tol: f64) -> Result<WeightedIntegral> {
    f.validate()?;
    let lo = lower_limit(xi);
    let hi = xi.lambda_max();
    let (a, b, tail_bound) = match f.support() {
        Some((s, t)) if t <= hi => (s.max(lo), t, 0.0),
        _ => {
            let bound = end_plateau(xi) * f.sup_abs() * (PI / 2.0 - hi.atan());
            if bound > tail_tol {
                return Err(SsfError::Tail {
                    tol: tail_tol,
                    reason: format!("tail bound {bound:e} beyond lambda = {hi}"),
                });
            }
            (lo, hi, bound)
        }
    };
    if b <= a {
        return Ok(WeightedIntegral { value: 0.0, tail_bound });
    }
    let v = xi.integrate_with_cuts(|l| Complex64::new(f.eval(l) / (1.0 + l * l), 0.0), a, b, &f.kinks())?;
    Ok(WeightedIntegral {
        value: v.re,
        tail_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentIntegral {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// ∫ ξ(λ) dλ / ((λ − a)(λ − z)ⁿ).
pub fn moment_integral(
    xi: &SpectralShiftGrid,
    a: Complex64,
    z: Complex64,
    n: u32,
    tail_tol: f64,
) -> Result<MomentIntegral> {
    if n == 0 {
        return Err(SsfError::domain("moment power must be at least 1"));
    }
    let lo = lower_limit(xi);
    let hi = xi.lambda_max();
    for p in [a, z] {
        if p.im == 0.0 && p.re >= lo {
            return Err(SsfError::domain(format!(
                "moment point {p} lies on the real axis above the grid start {lo}"
            )));
        }
    }
    let kernel = |l: f64| {
        let lc = Complex64::new(l, 0.0);
        1.0 / ((lc - a) * (lc - z).powi(n as i32))
    };
    let plateau = end_plateau(xi);
    let tail_bound = if plateau == 0.0 {
        0.0
    } else {
        let (m, _) = integrate_to_infinity(|l| kernel(l).norm(), hi, QuadTol::default())?;
        plateau * m
    };
    if tail_bound > tail_tol {
        return Err(SsfError::Tail {
            tol: tail_tol,
            reason: format!("moment tail bound {tail_bound:e} beyond lambda = {hi}"),
        });
    }
    Ok(MomentIntegral {
        value: xi.integrate(kernel, lo, hi)?,
        tail_bound,
    })
}

/// ∫_{E₁}^{E₂} ξ(λ) dλ.
pub fn interval_mass(xi: &SpectralShiftGrid, e1: f64, e2: f64) -> Result<f64> {
    if !(e1 < e2) {
        return Err(SsfError::domain(format!("interval [{e1}, {e2}] is empty")));
    }
    let lo = lower_limit(xi);
    if e1 < lo || e2 > xi.lambda_max() {
        return Err(SsfError::domain(format!(
            "interval [{e1}, {e2}] outside the grid [{lo}, {}]",
            xi.lambda_max()
        )));
    }
    Ok(xi.integrate(|_| Complex64::new(1.0, 0.0), e1, e2)?.re)
}

/// σ(λ) = ∫_{(−∞, λ)} ξ(λ′) dλ′ / (1 + λ′²) for a nonnegative sign-split grid.
/// `λ = +∞` stands for the grid end.
pub fn distribution_function(xi_pm: &SpectralShiftGrid, lambda: f64) -> Result<f64> {
    if let Some((l, v)) = xi_pm
        .lambdas
        .iter()
        .zip(&xi_pm.values)
        .find(|(_, v)| **v < -1e-9)
    {
        return Err(SsfError::SignSplit { lambda: *l, value: *v });
    }
    let lo = lower_limit(xi_pm);
    let hi = xi_pm.lambda_max();
    let top = if lambda == f64::INFINITY { hi } else { lambda };
    if top > hi {
        return Err(SsfError::domain(format!("lambda {lambda} beyond the grid end {hi}")));
    }
    if top <= lo {
        return Ok(0.0);
    }
    Ok(xi_pm.integrate(|l| Complex64::new(1.0 / (1.0 + l * l), 0.0), lo, top)?.re)
}

// ---------------------------------------------------------------------------
// Scans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSettings {
    pub test_functions: Vec<TestFunction>,
    pub mass_intervals: Vec<[f64; 2]>,
    pub sup_window: [f64; 2],
    pub z_ref: f64,
    pub lambda_max: f64,
    pub coarse_step: f64,
    pub fine_step: f64,
    pub epsilon: EpsilonPolicy,
    pub tail_tol: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            test_functions: vec![TestFunction::one()],
            mass_intervals: vec![[-1.0, 0.0], [0.0, 2.0]],
            sup_window: [0.5, 4.0],
            z_ref: -1.0,
            lambda_max: 200.0,
            coarse_step: 0.05,
            fine_step: 1e-3,
            epsilon: EpsilonPolicy::default(),
            tail_tol: TAIL_TOL,
        }
    }
}

/// Half-line values shared by every R of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReference {
    pub weighted: Vec<f64>,
    pub masses: Vec<f64>,
    pub det: Complex64,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanEntry {
    pub r: f64,
    pub weighted: Vec<f64>,
    pub weighted_error: Vec<f64>,
    pub masses: Vec<f64>,
    pub mass_error: Vec<f64>,
    pub det: Complex64,
    pub det_gap: f64,
    pub sup_gap: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneFlag {
    pub quantity: String,
    pub decreasing: bool,
}

/// One row of the long-format scan table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub r: f64,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub potential: String,
    pub alpha: f64,
    pub beta: f64,
    pub r_values: Vec<f64>,
    pub test_functions: Vec<String>,
    pub mass_intervals: Vec<[f64; 2]>,
    pub sup_window: [f64; 2],
    pub z_ref: f64,
    pub lambda_count: usize,
    pub reference: ScanReference,
    pub entries: Vec<ScanEntry>,
    pub monotone: Vec<MonotoneFlag>,
    /// All tolerances used by the checks are empirical choices.
    pub tolerances: &'static str,
}

impl ScanReport {
    /// Long-format rows: (R, quantity, value, reference, error).
    pub fn rows(&self) -> Vec<ScanRow> {
        let mut rows = Vec::new();
        for e in self.entries.iter().filter(|e| e.error.is_none()) {
            for (k, name) in self.test_functions.iter().enumerate() {
                rows.push(ScanRow {
                    r: e.r,
                    quantity: format!("weighted:{name}"),
                    value: e.weighted[k],
                    reference: self.reference.weighted[k],
                    error: e.weighted_error[k],
                });
            }
            for (k, iv) in self.mass_intervals.iter().enumerate() {
                rows.push(ScanRow {
                    r: e.r,
                    quantity: format!("mass:[{},{}]", iv[0], iv[1]),
                    value: e.masses[k],
                    reference: self.reference.masses[k],
                    error: e.mass_error[k],
                });
            }
            rows.push(ScanRow {
                r: e.r,
                quantity: "det:re".into(),
                value: e.det.re,
                reference: self.reference.det.re,
                error: e.det_gap,
            });
            rows.push(ScanRow {
                r: e.r,
                quantity: "sup-gap".into(),
                value: e.sup_gap,
                reference: 0.0,
                error: e.sup_gap,
            });
        }
        rows
    }
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|p| p[1] < p[0]) || xs.iter().all(|&x| x == 0.0)
}

/// sup over the window of |ξ_R − ξ_∞|, evaluated on the grid and just above every jump of ξ_R.
fn sup_gap(finite: &SpectralShiftGrid, reference: &SpectralShiftGrid, window: [f64; 2]) -> f64 {
    let probes = finite
        .lambdas
        .iter()
        .copied()
        .chain(finite.jumps.iter().map(|j| j.at + 1e-9 * (1.0 + j.at.abs())))
        .filter(|&l| l >= window[0] && l <= window[1]);
    probes
        .map(|l| (finite.value_at(l) - reference.value_at(l)).abs())
        .fold(0.0, f64::max)
}

/// Compares ξ_R on (0, R) with the half-line ξ for every R in `r_values`.
pub fn scan_infinite_volume(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r_values: &[f64],
    settings: &ScanSettings,
    opts: &SolverOptions,
) -> Result<ScanReport> {
    if r_values.windows(2).any(|p| !(p[1] > p[0])) || r_values.first().is_some_and(|&r| !(r > 0.0)) {
        return Err(SsfError::domain("R values must be positive and strictly increasing"));
    }
    for f in &settings.test_functions {
        f.validate()?;
    }
    let half = Geometry::halfline(alpha);
    let lo = r_values
        .iter()
        .map(|&r| Geometry::interval(r, alpha, beta).map(|g| lower_bound(pot, &g)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(lower_bound(pot, &half), f64::min)
        - 1.0;
    let eigen = if pot.is_zero() {
        Vec::new()
    } else {
        halfline_eigenvalues(pot, alpha, opts.tail_tol)?
    };
    let mut dense = eigen.clone();
    dense.push(0.0);
    dense.extend(settings.mass_intervals.iter().flatten());
    dense.extend(settings.test_functions.iter().flat_map(|f| f.kinks()));
    let grid = lambda_grid(lo, settings.lambda_max, settings.coarse_step, settings.fine_step, 0.02, &dense);

    let reference = xi_halfline_phase(pot, alpha, &grid, settings.epsilon, opts)?;
    let zref = SpectralParameter::real(settings.z_ref)?;
    let det_inf = det_wronskian_halfline(pot, alpha, &zref, opts)?.value;
    let weighted_ref = settings
        .test_functions
        .iter()
        .map(|f| weighted_integral(&reference, f, settings.tail_tol).map(|w| w.value))
        .collect::<Result<Vec<_>>>()?;
    let mass_ref = settings
        .mass_intervals
        .iter()
        .map(|iv| interval_mass(&reference, iv[0], iv[1]))
        .collect::<Result<Vec<_>>>()?;

    let entry = |r: f64| -> Result<ScanEntry> {
        let xi_r = xi_finite(pot, alpha, beta, r, &grid)?;
        let weighted = settings
            .test_functions
            .iter()
            .map(|f| weighted_integral(&xi_r, f, settings.tail_tol).map(|w| w.value))
            .collect::<Result<Vec<_>>>()?;
        let masses = settings
            .mass_intervals
            .iter()
            .map(|iv| interval_mass(&xi_r, iv[0], iv[1]))
            .collect::<Result<Vec<_>>>()?;
        let det = det_wronskian_finite(pot, alpha, beta, r, &zref, opts)?.value;
        Ok(ScanEntry {
            r,
            weighted_error: weighted.iter().zip(&weighted_ref).map(|(a, b)| (a - b).abs()).collect(),
            weighted,
            mass_error: masses.iter().zip(&mass_ref).map(|(a, b)| (a - b).abs()).collect(),
            masses,
            det,
            det_gap: (det - det_inf).norm(),
            sup_gap: sup_gap(&xi_r, &reference, settings.sup_window),
            error: None,
        })
    };
    let entries: Vec<ScanEntry> = r_values
        .par_iter()
        .map(|&r| {
            entry(r).unwrap_or_else(|e| ScanEntry {
                r,
                weighted: Vec::new(),
                weighted_error: Vec::new(),
                masses: Vec::new(),
                mass_error: Vec::new(),
                det: Complex64::new(f64::NAN, f64::NAN),
                det_gap: f64::NAN,
                sup_gap: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect();

    let names: Vec<String> = settings.test_functions.iter().map(|f| f.to_string()).collect();
    let ok: Vec<&ScanEntry> = entries.iter().filter(|e| e.error.is_none()).collect();
    let mut monotone = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let seq: Vec<f64> = ok.iter().map(|e| e.weighted_error[k]).collect();
        monotone.push(MonotoneFlag {
            quantity: format!("weighted:{name}"),
            decreasing: strictly_decreasing(&seq),
        });
    }
    let seq: Vec<f64> = ok.iter().map(|e| e.det_gap).collect();
    monotone.push(MonotoneFlag {
        quantity: "det-gap".into(),
        decreasing: strictly_decreasing(&seq),
    });

    Ok(ScanReport {
        potential: pot.describe(),
        alpha: alpha.angle(),
        beta: beta.angle(),
        r_values: r_values.to_vec(),
        test_functions: names,
        mass_intervals: settings.mass_intervals.clone(),
        sup_window: settings.sup_window,
        z_ref: settings.z_ref,
        lambda_count: grid.len(),
        reference: ScanReference {
            weighted: weighted_ref,
            masses: mass_ref,
            det: det_inf,
            eigenvalues: eigen,
        },
        entries,
        monotone,
        tolerances: "empirical",
    })
}

/// |det_R(z) − det_∞(z)| for each R.
pub fn determinant_gaps(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r_values: &[f64],
    z: f64,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let sp = SpectralParameter::real(z)?;
    let inf = det_wronskian_halfline(pot, alpha, &sp, opts)?.value;
    r_values
        .par_iter()
        .map(|&r| Ok((det_wronskian_finite(pot, alpha, beta, r, &sp, opts)?.value - inf).norm()))
        .collect()
}

/// Half-width of the excluded neighbourhood of half-line eigenvalues.
pub const CESARO_EXCLUSION: f64 = 1e-3;

/// (1/R) ∫₀^R ξ(λ; H_r, H⁰_r) dr by the midpoint rule with m nodes.
pub fn cesaro_mean(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    lambda: f64,
    r: f64,
    m: usize,
    opts: &SolverOptions,
) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return Err(SsfError::domain("the Cesàro mean excludes lambda = 0"));
    }
    if m == 0 || !(r > 0.0) {
        return Err(SsfError::domain("need m ≥ 1 and R > 0"));
    }
    if lambda < 0.0 && !pot.is_zero() {
        for e in halfline_eigenvalues(pot, alpha, opts.tail_tol)? {
            if (e - lambda).abs() < CESARO_EXCLUSION {
                return Err(SsfError::ExclusionZone {
                    lambda,
                    eigenvalue: e,
                    radius: CESARO_EXCLUSION,
                });
            }
        }
    }
    let zero = Potential::zero();
    let sum = (0..m)
        .into_par_iter()
        .map(|k| {
            let rk = r * (k as f64 + 0.5) / m as f64;
            let n0 = count_states(&zero, alpha, beta, rk, lambda)? as f64;
            let n = count_states(pot, alpha, beta, rk, lambda)? as f64;
            Ok(n0 - n)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .sum::<f64>();
    Ok(sum / m as f64)
}

/// Trace norm of f gᵀ − (P f)(P g)ᵀ, P the projection on the first n coordinates.
pub fn rank_one_trace_gap(f: &[f64], g: &[f64], n: usize) -> (f64, f64) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let n = n.min(f.len());
    let (pf, qf) = f.split_at(n);
    let qg = &g[n..];
    // difference = A Bᵀ with A = [Qf, Pf] (orthogonal columns) and B = [g, Qg];
    // its singular values are the square roots of the eigenvalues of (AᵀA)(BᵀB)
    let a11 = dot(qf, qf);
    let a22 = dot(pf, pf);
    let b11 = dot(g, g);
    let b12 = dot(qg, qg);
    let (m11, m12, m21, m22) = (a11 * b11, a11 * b12, a22 * b12, a22 * b12);
    let det = (m11 * m22 - m12 * m21).max(0.0);
    let norm = (m11 + m22 + 2.0 * det.sqrt()).max(0.0).sqrt();
    let bound = a11.sqrt() * b11.sqrt() + a22.sqrt() * b12.sqrt();
    (norm, bound)
}

/// Largest (trace norm − bound) over random rank-one trials.
pub fn rank_one_gap(dim: usize, trials: usize, seed: u64) -> Result<f64> {
    if dim < 2 {
        return Err(SsfError::domain("dimension must be at least 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let f: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = rng.random_range(0..=dim);
        let (norm, bound) = rank_one_trace_gap(&f, &g, n);
        worst = worst.max(norm - bound);
    }
    Ok(worst)
}
