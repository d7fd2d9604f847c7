//! Spectral shift functions: eigenvalue counting on finite intervals, the
//! boundary-value phase of the Fredholm determinant on the half-line, sign
//! splitting and the resolvent trace formula.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinants::det_wronskian;
use crate::error::{Result, SsfError};
use crate::geometry::Geometry;
use crate::numerics::ode::Dopri5;
use crate::numerics::quad::{gauss_legendre, integrate_complex, QuadTol};
use crate::potential::Potential;
use crate::solutions::{BoundaryCondition, SolverOptions, SpectralParameter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiMethod {
    Counting,
    Phase,
}

/// A unit jump of ξ at an eigenvalue: −1 for the perturbed operator, +1 for the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub at: f64,
    pub delta: i32,
}

/// ξ sampled on a sorted λ-grid.
///
/// The function is represented as a step part (sum of `jumps` at or below λ)
/// plus a continuous remainder interpolated by local cubics through the samples. For
/// counting grids the remainder vanishes and the step part is exact up to the
/// last grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GridData")]
pub struct SpectralShiftGrid {
    pub lambdas: Vec<f64>,
    pub values: Vec<f64>,
    pub method: XiMethod,
    pub geometry: Geometry,
    /// Relative iε used by the phase method (ε = epsilon·(1 + |λ|)).
    pub epsilon: Option<f64>,
    /// Point below all spectra where ξ = 0.
    pub normalization_anchor: f64,
    pub jumps: Vec<Jump>,
    /// Samples used for the continuous remainder (phase grids only).
    #[serde(skip_serializing)]
    remainder: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct GridData {
    lambdas: Vec<f64>,
    values: Vec<f64>,
    method: XiMethod,
    geometry: Geometry,
    epsilon: Option<f64>,
    normalization_anchor: f64,
    jumps: Vec<Jump>,
}

impl From<GridData> for SpectralShiftGrid {
    fn from(d: GridData) -> Self {
        SpectralShiftGrid::new(
            d.lambdas,
            d.values,
            d.method,
            d.geometry,
            d.epsilon,
            d.normalization_anchor,
            d.jumps,
        )
    }
}

impl SpectralShiftGrid {
    pub(crate) fn new(
        lambdas: Vec<f64>,
        values: Vec<f64>,
        method: XiMethod,
        geometry: Geometry,
        epsilon: Option<f64>,
        anchor: f64,
        mut jumps: Vec<Jump>,
    ) -> Self {
        jumps.sort_by(|a, b| a.at.total_cmp(&b.at));
        let mut g = SpectralShiftGrid {
            lambdas,
            values,
            method,
            geometry,
            epsilon,
            normalization_anchor: anchor,
            jumps,
            remainder: Vec::new(),
        };
        g.rebuild_remainder();
        g
    }

    /// Recomputes the interpolated remainder after deserialization or edits.
    pub fn rebuild_remainder(&mut self) {
        self.remainder.clear();
        if self.method == XiMethod::Counting {
            return;
        }
        let eps = self.epsilon.unwrap_or(0.0);
        for (&l, &v) in self.lambdas.iter().zip(&self.values) {
            // samples next to an eigenvalue carry the iε-smoothed jump; skip them
            // the threshold λ = 0 is smoothed the same way
            let guard = 50.0 * eps * (1.0 + l.abs());
            if l.abs() <= guard || self.jumps.iter().any(|j| (j.at - l).abs() <= guard) {
                continue;
            }
            self.remainder.push((l, v - self.step_part(l)));
        }
    }

    /// Σ of jumps at or below λ.
    pub fn step_part(&self, lambda: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.at <= lambda);
        self.jumps[..k].iter().map(|j| j.delta as f64).sum()
    }

    /// Local cubic Lagrange interpolation of the remainder samples in the
    /// variable s = sign(λ)·|λ|^{1/2}, with stencils not crossing λ = 0.
    fn remainder_at(&self, lambda: f64) -> f64 {
        let r = &self.remainder;
        if r.is_empty() || lambda < r[0].0 {
            return 0.0;
        }
        let last = r.len() - 1;
        if lambda >= r[last].0 {
            return r[last].1;
        }
        // samples on the same side of the threshold as λ
        let split = r.partition_point(|p| p.0 <= 0.0);
        let (side_lo, side_hi) = if lambda <= 0.0 { (0, split) } else { (split, r.len()) };
        let width = (side_hi - side_lo).min(4);
        if width == 0 {
            return 0.0;
        }
        if width == 1 {
            return r[side_lo].1;
        }
        let k = r.partition_point(|p| p.0 <= lambda);
        let start = k.saturating_sub(2).max(side_lo).min(side_hi - width);
        let pts = &r[start..start + width];
        let sv = |l: f64| l.signum() * l.abs().sqrt();
        let x = sv(lambda);
        let mut sum = 0.0;
        for (i, pi) in pts.iter().enumerate() {
            let mut w = 1.0;
            for (m, pm) in pts.iter().enumerate() {
                if m != i {
                    w *= (x - sv(pm.0)) / (sv(pi.0) - sv(pm.0));
                }
            }
            sum += w * pi.1;
        }
        sum
    }

    /// ξ(λ) from the representation.
    pub fn value_at(&self, lambda: f64) -> f64 {
        self.step_part(lambda) + self.remainder_at(lambda)
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.lambdas.last().unwrap()
    }

    /// ∫_lo^hi ξ(λ) g(λ) dλ: cells split at grid points and jumps, 10-point Gauss per cell.
    pub fn integrate<G: Fn(f64) -> Complex64>(&self, g: G, lo: f64, hi: f64) -> Result<Complex64> {
        self.integrate_with_cuts(g, lo, hi, &[])
    }

    /// As [`integrate`](Self::integrate), also splitting cells at the kinks of g in `extra_cuts`.
    pub fn integrate_with_cuts<G: Fn(f64) -> Complex64>(
        &self,
        g: G,
        lo: f64,
        hi: f64,
        extra_cuts: &[f64],
    ) -> Result<Complex64> {
        if !(lo <= hi) {
            return Err(SsfError::domain(format!("integration range [{lo}, {hi}] is empty")));
        }
        if hi > self.lambda_max() * (1.0 + 1e-14) + 1e-14 {
            return Err(SsfError::domain(format!(
                "upper limit {hi} beyond the grid end {}",
                self.lambda_max()
            )));
        }
        let mut cuts: Vec<f64> = self
            .lambdas
            .iter()
            .copied()
            .chain(self.jumps.iter().map(|j| j.at))
            .chain(self.remainder.iter().map(|p| p.0))
            .chain(extra_cuts.iter().copied())
            .chain(std::iter::once(0.0))
            .filter(|&l| l > lo && l < hi)
            .collect();
        cuts.push(lo);
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let (nodes, weights) = gauss_legendre(10);
        let mut total = Complex64::new(0.0, 0.0);
        for c in cuts.windows(2) {
            let (a, b) = (c[0], c[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let step = self.step_part(mid);
            let mut cell = Complex64::new(0.0, 0.0);
            for (t, w) in nodes.iter().zip(&weights) {
                let l = mid + half * t;
                let xi = step + self.remainder_at(l);
                if xi != 0.0 {
                    cell += g(l) * (w * xi);
                }
            }
            total += cell * half;
        }
        Ok(total)
    }
}

// ---------------------------------------------------------------------------
// Lower bounds
// ---------------------------------------------------------------------------

/// Lower bound for the spectra of both H⁰ and H = H⁰ + V in the given geometry.
pub fn lower_bound(pot: &Potential, geometry: &Geometry) -> f64 {
    let neg = |b: BoundaryCondition, positive_side: bool| {
        // coefficient of |ψ(endpoint)|² in the quadratic form, when negative
        let a = b.angle();
        if a == 0.0 || a == PI / 2.0 {
            return 0.0;
        }
        let cot = a.cos() / a.sin();
        if positive_side {
            cot.max(0.0)
        } else {
            (-cot).max(0.0)
        }
    };
    let free = match *geometry {
        Geometry::HalfLine { alpha } => {
            let a = neg(alpha, true);
            -a * a
        }
        Geometry::Interval { length, alpha, beta } => {
            let s = neg(alpha, true) + neg(beta, false);
            -(4.0 * s * s).max(2.0 * s / length)
        }
    };
    free - pot.sup_negative()
}

// ---------------------------------------------------------------------------
// Prüfer counting
// ---------------------------------------------------------------------------

fn prufer_scale(lambda: f64) -> f64 {
    lambda.abs().sqrt().max(1.0)
}

/// Prüfer angle of ψ_{0,α} with ψ = ρ sin θ, ψ′ = kρ cos θ, θ(0) ∈ [0, π).
fn prufer_angle(pot: &Potential, alpha: BoundaryCondition, lambda: f64, k: f64, x_end: f64, ode: &Dopri5) -> Result<f64> {
    let mut theta = (-k * alpha.sin()).atan2(alpha.cos());
    if theta < 0.0 {
        theta += PI;
    }
    let free_from = if pot.is_zero() {
        0.0
    } else {
        pot.support_end().unwrap_or(f64::INFINITY).min(x_end)
    };
    let mut knots = vec![0.0];
    knots.extend(pot.breakpoints(0.0, free_from.min(x_end)));
    knots.push(free_from.min(x_end));
    knots.dedup();
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let span = b - a;
        let rhs = |x: f64, y: &[f64; 1]| {
            let t = ((x - a) / span).clamp(1e-12, 1.0 - 1e-12);
            let q = lambda - pot.value(a + t * span);
            let (s, c) = y[0].sin_cos();
            [k * c * c + q / k * s * s]
        };
        theta = ode
            .integrate(rhs, a, [theta], b)
            .map_err(|f| SsfError::Integration {
                x: f.x,
                reason: "Prüfer angle integration failed".into(),
            })?[0];
    }
    if x_end > free_from {
        let span = x_end - free_from;
        if lambda > 0.0 && (k * k - lambda).abs() <= 1e-15 * lambda {
            theta += k * span;
        } else {
            let rhs = |_: f64, y: &[f64; 1]| {
                let (s, c) = y[0].sin_cos();
                [k * c * c + lambda / k * s * s]
            };
            theta = ode
                .integrate(rhs, free_from, [theta], x_end)
                .map_err(|f| SsfError::Integration {
                    x: f.x,
                    reason: "Prüfer angle integration failed".into(),
                })?[0];
        }
    }
    Ok(theta)
}

fn prufer_k(lambda: f64) -> f64 {
    if lambda >= 1.0 {
        lambda.sqrt()
    } else {
        prufer_scale(lambda)
    }
}

fn prufer_ode() -> Dopri5 {
    Dopri5::default().with_rtol(1e-11)
}

/// Number of eigenvalues ≤ λ of H_{(0,R),α,β} = −d²/dx² + V.
pub fn count_states(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    lambda: f64,
) -> Result<usize> {
    if !(r > 0.0) {
        return Err(SsfError::domain(format!("interval length R = {r} must be positive")));
    }
    if !lambda.is_finite() {
        return Err(SsfError::domain("lambda must be finite"));
    }
    let geom = Geometry::interval(r, alpha, beta)?;
    if lambda < lower_bound(pot, &geom) {
        return Ok(0);
    }
    let k = prufer_k(lambda);
    let theta = prufer_angle(pot, alpha, lambda, k, r, &prufer_ode())?;
    let target = (k * beta.sin()).atan2(-beta.cos());
    if theta < target {
        return Ok(0);
    }
    Ok(((theta - target) / PI).floor() as usize + 1)
}

/// Number of eigenvalues < λ (λ < 0) of the half-line operator, via the zeros of ψ_{0,α}.
pub fn count_states_halfline(pot: &Potential, alpha: BoundaryCondition, lambda: f64, tail_tol: f64) -> Result<usize> {
    if !(lambda < 0.0) {
        return Err(SsfError::domain("half-line counting is only defined below the essential spectrum"));
    }
    if lambda < lower_bound(pot, &Geometry::halfline(alpha)) {
        return Ok(0);
    }
    let x = pot.tail_cutoff(tail_tol)?;
    let k = prufer_scale(lambda);
    let kappa = (-lambda).sqrt();
    let theta = prufer_angle(pot, alpha, lambda, k, x, &prufer_ode())?;
    let m = (theta / PI).floor();
    let rest = theta - m * PI;
    // one more zero beyond x when the free continuation turns through ψ = 0
    let extra = rest > PI - (k / kappa).atan();
    Ok(m as usize + usize::from(extra))
}

/// Bisects an integer-valued nondecreasing counting function to isolate and
/// locate every jump in (lo, hi].
fn locate_jumps<F>(count: &F, lo: f64, hi: f64, n_lo: usize, n_hi: usize, out: &mut Vec<f64>) -> Result<()>
where
    F: Fn(f64) -> Result<usize> + Sync,
{
    if n_hi <= n_lo {
        return Ok(());
    }
    let tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
    if hi - lo <= tol {
        out.extend(std::iter::repeat_n(0.5 * (lo + hi), n_hi - n_lo));
        return Ok(());
    }
    let mid = 0.5 * (lo + hi);
    let n_mid = count(mid)?;
    if n_hi - n_lo == 1 && n_mid == n_lo {
        return locate_jumps(count, mid, hi, n_mid, n_hi, out);
    }
    if n_hi - n_lo == 1 {
        return locate_jumps(count, lo, mid, n_lo, n_mid, out);
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    let (a, b) = rayon::join(
        || locate_jumps(count, lo, mid, n_lo, n_mid, &mut left),
        || locate_jumps(count, mid, hi, n_mid, n_hi, &mut right),
    );
    a?;
    b?;
    out.extend(left);
    out.extend(right);
    Ok(())
}

/// Eigenvalues of H_{(0,R),α,β} in (lo, hi], ascending.
pub fn eigenvalues(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    lo: f64,
    hi: f64,
) -> Result<Vec<f64>> {
    let count = |l: f64| count_states(pot, alpha, beta, r, l);
    let mut out = Vec::new();
    let (n_lo, n_hi) = (count(lo)?, count(hi)?);
    locate_jumps(&count, lo, hi, n_lo, n_hi, &mut out)?;
    Ok(out)
}

/// Discrete eigenvalues of the half-line operator (all below 0).
pub fn halfline_eigenvalues(pot: &Potential, alpha: BoundaryCondition, tail_tol: f64) -> Result<Vec<f64>> {
    let lo = lower_bound(pot, &Geometry::halfline(alpha)) - 1.0;
    let hi = -1e-9;
    let count = |l: f64| count_states_halfline(pot, alpha, l, tail_tol);
    let mut out = Vec::new();
    let (n_lo, n_hi) = (count(lo)?, count(hi)?);
    locate_jumps(&count, lo, hi, n_lo, n_hi, &mut out)?;
    Ok(out)
}

/// Eigenvalue of the free half-line operator, present for α ∈ (0, π/2).
pub fn free_halfline_eigenvalue(alpha: BoundaryCondition) -> Option<f64> {
    let a = alpha.angle();
    (a > 0.0 && a < PI / 2.0).then(|| {
        let cot = a.cos() / a.sin();
        -cot * cot
    })
}

fn check_sorted(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(SsfError::domain("empty lambda grid"));
    }
    if lambdas.windows(2).any(|p| !(p[1] > p[0])) || lambdas.iter().any(|l| !l.is_finite()) {
        return Err(SsfError::domain("lambda grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// ξ(λ; H, H⁰) = N(λ; H⁰) − N(λ; H) on the interval (0, R).
pub fn xi_finite(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    lambdas: &[f64],
) -> Result<SpectralShiftGrid> {
    xi_finite_relative(pot, &Potential::zero(), alpha, beta, r, lambdas)
}

/// ξ(λ; H⁰ + V, H⁰ + V_ref) on (0, R) by counting.
pub fn xi_finite_relative(
    pot: &Potential,
    reference: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    lambdas: &[f64],
) -> Result<SpectralShiftGrid> {
    check_sorted(lambdas)?;
    let geometry = Geometry::interval(r, alpha, beta)?;
    let anchor = lower_bound(pot, &geometry).min(lower_bound(reference, &geometry)) - 1.0;
    let hi = *lambdas.last().unwrap();
    if pot == reference || (pot.is_zero() && reference.is_zero()) {
        let values = vec![0.0; lambdas.len()];
        return Ok(SpectralShiftGrid::new(
            lambdas.to_vec(),
            values,
            XiMethod::Counting,
            geometry,
            None,
            anchor,
            Vec::new(),
        ));
    }
    let values = lambdas
        .par_iter()
        .map(|&l| {
            let n0 = count_states(reference, alpha, beta, r, l)? as f64;
            let n = count_states(pot, alpha, beta, r, l)? as f64;
            Ok(n0 - n)
        })
        .collect::<Result<Vec<f64>>>()?;
    let lo = anchor.min(lambdas[0]);
    let (pert, free) = rayon::join(
        || eigenvalues(pot, alpha, beta, r, lo, hi),
        || eigenvalues(reference, alpha, beta, r, lo, hi),
    );
    let jumps = cancel_jumps(pert?, free?);
    Ok(SpectralShiftGrid::new(
        lambdas.to_vec(),
        values,
        XiMethod::Counting,
        geometry,
        None,
        anchor,
        jumps,
    ))
}

/// −1 at each perturbed eigenvalue, +1 at each reference eigenvalue; coincident
/// pairs (bitwise equal) cancel.
pub(crate) fn cancel_jumps(pert: Vec<f64>, reference: Vec<f64>) -> Vec<Jump> {
    let mut jumps: Vec<Jump> = pert
        .into_iter()
        .map(|at| Jump { at, delta: -1 })
        .chain(reference.into_iter().map(|at| Jump { at, delta: 1 }))
        .collect();
    jumps.sort_by(|a, b| a.at.total_cmp(&b.at).then(a.delta.cmp(&b.delta)));
    let mut out: Vec<Jump> = Vec::with_capacity(jumps.len());
    for j in jumps {
        if let Some(last) = out.last_mut() {
            if last.at == j.at {
                last.delta += j.delta;
                if last.delta == 0 {
                    out.pop();
                }
                continue;
            }
        }
        out.push(j);
    }
    out
}

// ---------------------------------------------------------------------------
// Phase method
// ---------------------------------------------------------------------------

/// iε policy for boundary values: ε(λ) = factor·(1 + |λ|), optionally
/// extrapolated from ε and ε/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPolicy {
    pub factor: f64,
    pub richardson: bool,
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy {
            factor: 1e-4,
            richardson: true,
        }
    }
}

/// Largest |Δ arg| accepted between neighbouring λ before bisecting.
const MAX_PHASE_STEP: f64 = PI / 2.0;
const MAX_REFINE_DEPTH: u32 = 12;
/// Spacing of the path from the anchor to the first requested λ.
const PATH_STEP: f64 = 0.05;

fn unwrap_segment<F>(det: &F, a: f64, da: Complex64, b: f64, db: Complex64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let step = (db / da).arg();
    if step.abs() < MAX_PHASE_STEP {
        return Ok(step);
    }
    if depth >= MAX_REFINE_DEPTH {
        return Err(SsfError::GridRefinement { lo: a, hi: b, depth });
    }
    let m = 0.5 * (a + b);
    let dm = det(m)?;
    Ok(unwrap_segment(det, a, da, m, dm, depth + 1)? + unwrap_segment(det, m, dm, b, db, depth + 1)?)
}

/// Continuous arg of `det(λ)` along the path, starting from its principal value at path[0].
fn unwrapped_phase<F>(det: &F, path: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Complex64> + Sync,
{
    let values = path.par_iter().map(|&l| det(l)).collect::<Result<Vec<_>>>()?;
    let steps = (0..path.len() - 1)
        .into_par_iter()
        .map(|j| unwrap_segment(det, path[j], values[j], path[j + 1], values[j + 1], 0))
        .collect::<Result<Vec<f64>>>()?;
    let mut phase = Vec::with_capacity(path.len());
    phase.push(values[0].arg());
    for s in steps {
        let last = *phase.last().unwrap();
        phase.push(last + s);
    }
    Ok(phase)
}

/// π⁻¹ lim_{ε↓0} arg D(λ + iε) on the grid, anchored at `anchor` where the phase is 0.
pub(crate) fn phase_xi<F>(det: F, anchor: f64, lambdas: &[f64], eps: EpsilonPolicy) -> Result<Vec<f64>>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let mut path = vec![anchor];
    let first = lambdas[0];
    if first > anchor {
        let n = ((first - anchor) / PATH_STEP).ceil() as usize;
        for i in 1..n {
            path.push(anchor + (first - anchor) * i as f64 / n as f64);
        }
    }
    let offset = path.len();
    path.extend(lambdas.iter().copied().filter(|&l| l > anchor));
    let skipped = lambdas.len() - (path.len() - offset);

    let det = &det;
    let at = |scale: f64| {
        move |l: f64| det(Complex64::new(l, scale * eps.factor * (1.0 + l.abs())))
    };
    let (p1, p2) = if eps.richardson {
        let (a, b) = rayon::join(|| unwrapped_phase(&at(1.0), &path), || unwrapped_phase(&at(0.5), &path));
        (a?, Some(b?))
    } else {
        (unwrapped_phase(&at(1.0), &path)?, None)
    };
    let mut out = vec![0.0; skipped];
    for j in offset..path.len() {
        let ph = match &p2 {
            Some(p2) => 2.0 * p2[j] - p1[j],
            None => p1[j],
        };
        out.push(ph / PI);
    }
    Ok(out)
}

/// ξ(λ; H, H⁰) on the half-line from the phase of the Jost-function determinant.
pub fn xi_halfline_phase(
    pot: &Potential,
    alpha: BoundaryCondition,
    lambdas: &[f64],
    eps: EpsilonPolicy,
    opts: &SolverOptions,
) -> Result<SpectralShiftGrid> {
    xi_halfline_phase_relative(pot, &Potential::zero(), alpha, lambdas, eps, opts)
}

/// ξ(λ; H⁰ + V, H⁰ + V_ref) on the half-line from the phase of D_V / D_{V_ref}.
pub fn xi_halfline_phase_relative(
    pot: &Potential,
    reference: &Potential,
    alpha: BoundaryCondition,
    lambdas: &[f64],
    eps: EpsilonPolicy,
    opts: &SolverOptions,
) -> Result<SpectralShiftGrid> {
    check_sorted(lambdas)?;
    if !(eps.factor > 0.0) {
        return Err(SsfError::domain("epsilon must be positive"));
    }
    let geometry = Geometry::halfline(alpha);
    let anchor = lower_bound(pot, &geometry).min(lower_bound(reference, &geometry)) - 1.0;
    if pot == reference || (pot.is_zero() && reference.is_zero()) {
        return Ok(SpectralShiftGrid::new(
            lambdas.to_vec(),
            vec![0.0; lambdas.len()],
            XiMethod::Phase,
            geometry,
            Some(eps.factor),
            anchor,
            Vec::new(),
        ));
    }
    let det = |z: Complex64| {
        let sp = SpectralParameter::new(z)?;
        let d = det_wronskian(&geometry, pot, &sp, opts)?.value;
        if reference.is_zero() {
            Ok(d)
        } else {
            Ok(d / det_wronskian(&geometry, reference, &sp, opts)?.value)
        }
    };
    let values = phase_xi(det, anchor, lambdas, eps)?;
    let (pert, refe) = rayon::join(
        || halfline_eigenvalues(pot, alpha, opts.tail_tol),
        || halfline_eigenvalues(reference, alpha, opts.tail_tol),
    );
    let mut free = refe?;
    if reference.is_zero() {
        free.extend(free_halfline_eigenvalue(alpha));
    }
    let mut pert = pert?;
    if !reference.is_zero() {
        // both determinants share the free pole, which cancels in the ratio
    } else if pot.is_zero() {
        pert.clear();
    }
    let jumps = cancel_jumps(pert, free);
    Ok(SpectralShiftGrid::new(
        lambdas.to_vec(),
        values,
        XiMethod::Phase,
        geometry,
        Some(eps.factor),
        anchor,
        jumps,
    ))
}

/// ξ for the geometry with the natural method (counting on intervals, phase on the half-line).
pub fn xi(
    pot: &Potential,
    geometry: &Geometry,
    lambdas: &[f64],
    eps: EpsilonPolicy,
    opts: &SolverOptions,
) -> Result<SpectralShiftGrid> {
    xi_relative(pot, &Potential::zero(), geometry, lambdas, eps, opts)
}

fn xi_relative(
    pot: &Potential,
    reference: &Potential,
    geometry: &Geometry,
    lambdas: &[f64],
    eps: EpsilonPolicy,
    opts: &SolverOptions,
) -> Result<SpectralShiftGrid> {
    match *geometry {
        Geometry::Interval { length, alpha, beta } => xi_finite_relative(pot, reference, alpha, beta, length, lambdas),
        Geometry::HalfLine { alpha } => xi_halfline_phase_relative(pot, reference, alpha, lambdas, eps, opts),
    }
}

/// (ξ₊, ξ₋) with ξ₊ = ξ(·; H⁰ + V₊, H⁰) ≥ 0 and ξ₋ = −ξ(·; H, H⁰ + V₊) ≥ 0, so ξ = ξ₊ − ξ₋.
pub fn xi_sign_split(
    pot: &Potential,
    geometry: &Geometry,
    lambdas: &[f64],
    eps: EpsilonPolicy,
    opts: &SolverOptions,
) -> Result<(SpectralShiftGrid, SpectralShiftGrid)> {
    let vp = pot.positive_part();
    // H = H⁰ + V₊ − V₋; V₊ − V₋ has the same values as V
    let (plus, upper) = rayon::join(
        || xi_relative(&vp, &Potential::zero(), geometry, lambdas, eps, opts),
        || xi_relative(pot, &vp, geometry, lambdas, eps, opts),
    );
    let plus = plus?;
    let mut minus = upper?;
    for v in minus.values.iter_mut() {
        *v = -*v;
    }
    for j in minus.jumps.iter_mut() {
        j.delta = -j.delta;
    }
    minus.rebuild_remainder();
    Ok((plus, minus))
}

// ---------------------------------------------------------------------------
// Trace formula
// ---------------------------------------------------------------------------

/// Both sides of dⁿ/dzⁿ ln det(z) = n! ∫ ξ(λ) dλ / (λ − z)^{n+1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceFormulaCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// |lhs − rhs|
    pub residual: f64,
    /// Magnitude of the modelled contribution beyond the grid.
    pub tail: f64,
}

impl TraceFormulaCheck {
    pub fn relative(&self) -> f64 {
        self.residual / self.rhs.norm().max(f64::MIN_POSITIVE)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// n-th derivative of ln det at z from a Cauchy integral on a circle of radius ρ.
fn log_det_derivative<F>(det: &F, z: Complex64, rho: f64, n: u32, points: usize) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    let thetas: Vec<f64> = (0..points).map(|k| 2.0 * PI * k as f64 / points as f64).collect();
    let vals = thetas
        .par_iter()
        .map(|&t| det(z + Complex64::from_polar(rho, t)))
        .collect::<Result<Vec<_>>>()?;
    // continuous branch of ln det around the circle
    let mut logs = Vec::with_capacity(points);
    let mut phase = vals[0].arg();
    logs.push(Complex64::new(vals[0].norm().ln(), phase));
    for k in 1..points {
        phase += (vals[k] / vals[k - 1]).arg();
        logs.push(Complex64::new(vals[k].norm().ln(), phase));
    }
    let closing = phase + (vals[0] / vals[points - 1]).arg() - vals[0].arg();
    if closing.abs() > 1e-6 {
        return Err(SsfError::NearEigenvalue {
            z_re: z.re,
            z_im: z.im,
            what: "determinant has a zero or pole inside the contour",
            magnitude: closing.abs(),
        });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, l) in logs.iter().enumerate() {
        sum += l * Complex64::from_polar(1.0, -(n as f64) * thetas[k]);
    }
    Ok(sum * factorial(n) / (points as f64 * rho.powi(n as i32)))
}

/// Checks the resolvent trace formula at z using the given ξ grid.
///
/// Beyond the grid end Λ the tail is modelled as ξ ≈ c/√λ with c fitted on the
/// last tenth of the grid; a grid whose end values are not small is rejected.
pub fn trace_formula_residual(
    pot: &Potential,
    geometry: &Geometry,
    z: Complex64,
    xi: &SpectralShiftGrid,
    n: u32,
    opts: &SolverOptions,
) -> Result<TraceFormulaCheck> {
    if n == 0 {
        return Err(SsfError::domain("trace formula power must be at least 1"));
    }
    let c = lower_bound(pot, geometry);
    let dist = if z.im != 0.0 {
        z.im.abs().min(((z.re - c).max(0.0)).hypot(z.im))
    } else if z.re < c {
        c - z.re
    } else {
        return Err(SsfError::domain("z must be off the real axis or below the spectrum"));
    };
    let lo = xi.normalization_anchor.min(xi.lambda_min());
    let hi = xi.lambda_max();
    let zero = Complex64::new(0.0, 0.0);
    if pot.is_zero() {
        return Ok(TraceFormulaCheck {
            lhs: zero,
            rhs: zero,
            residual: 0.0,
            tail: 0.0,
        });
    }
    let det = |zz: Complex64| Ok(det_wronskian(geometry, pot, &SpectralParameter::new(zz)?, opts)?.value);
    let rho = (0.5 * dist).min(1.0);
    let lhs = log_det_derivative(&det, z, rho, n, 64)?;

    let kernel = |l: f64| Complex64::new(l, 0.0) - z;
    let nf = factorial(n);
    let body = xi.integrate(|l| kernel(l).powi(-(n as i32 + 1)), lo, hi)? * nf;

    // tail model fitted on the last tenth of the grid
    let start = hi - 0.1 * (hi - lo.max(0.0));
    let fit: Vec<f64> = xi
        .lambdas
        .iter()
        .filter(|&&l| l >= start && l > 0.0)
        .map(|&l| xi.value_at(l) * l.sqrt())
        .collect();
    let end_value = xi.value_at(hi).abs();
    if end_value > 0.05 {
        return Err(SsfError::Tail {
            tol: 0.05,
            reason: format!("|xi| = {end_value} at the grid end {hi}; extend the grid"),
        });
    }
    let coef = if fit.is_empty() {
        0.0
    } else {
        fit.iter().sum::<f64>() / fit.len() as f64
    };
    let tail = if coef == 0.0 {
        zero
    } else {
        // λ = hi + s/(1−s)
        let q = integrate_complex(
            |s| {
                let w = 1.0 - s;
                let l = hi + s / w;
                kernel(l).powi(-(n as i32 + 1)) * (coef / l.sqrt() / (w * w))
            },
            0.0,
            1.0,
            &[],
            QuadTol::default(),
        )?;
        q.value * nf
    };
    let rhs = body + tail;
    Ok(TraceFormulaCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
        tail: tail.norm(),
    })
}

/// Nonuniform λ-grid: step `coarse` on [lo, hi], step `fine` within `halo` of each
/// point in `dense_near`, graded geometrically down to 1e-9 next to those points.
pub fn lambda_grid(lo: f64, hi: f64, coarse: f64, fine: f64, halo: f64, dense_near: &[f64]) -> Vec<f64> {
    let mut pts = Vec::new();
    let n = ((hi - lo) / coarse).ceil().max(1.0) as usize;
    for i in 0..=n {
        pts.push(lo + (hi - lo) * i as f64 / n as f64);
    }
    for &c in dense_near {
        let a = (c - halo).max(lo);
        let b = (c + halo).min(hi);
        if b <= a {
            continue;
        }
        let m = ((b - a) / fine).ceil() as usize;
        for i in 0..=m {
            pts.push(a + (b - a) * i as f64 / m as f64);
        }
        // geometric grading toward the point itself
        let mut h = fine;
        while h > 1e-9 * (1.0 + c.abs()) {
            h *= 0.5;
            pts.extend([c - h, c + h].into_iter().filter(|&p| p >= lo && p <= hi));
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: BoundaryCondition = BoundaryCondition::DIRICHLET;

    #[test]
    fn free_dirichlet_counts() {
        let z = Potential::zero();
        assert_eq!(count_states(&z, D, D, PI, 1.5).unwrap(), 1);
        assert_eq!(count_states(&z, D, D, PI, 0.5).unwrap(), 0);
        assert_eq!(count_states(&z, D, D, PI, 4.5).unwrap(), 2);
        assert_eq!(count_states(&z, D, D, PI, -3.0).unwrap(), 0);
    }

    #[test]
    fn free_neumann_counts() {
        // Neumann–Neumann on (0, π): eigenvalues n², n ≥ 0
        let z = Potential::zero();
        let n = BoundaryCondition::NEUMANN;
        assert_eq!(count_states(&z, n, n, PI, -0.1).unwrap(), 0);
        assert_eq!(count_states(&z, n, n, PI, 0.5).unwrap(), 1);
        assert_eq!(count_states(&z, n, n, PI, 1.5).unwrap(), 2);
        // Dirichlet–Neumann: (n + 1/2)²
        assert_eq!(count_states(&z, D, n, PI, 0.2).unwrap(), 0);
        assert_eq!(count_states(&z, D, n, PI, 0.3).unwrap(), 1);
        assert_eq!(count_states(&z, D, n, PI, 2.3).unwrap(), 2);
    }

    #[test]
    fn eigenvalues_match_dirichlet_ladder() {
        let ev = eigenvalues(&Potential::zero(), D, D, 2.0, -1.0, 30.0).unwrap();
        let expected: Vec<f64> = (1..).map(|n| (n as f64 * PI / 2.0).powi(2)).take_while(|&e| e <= 30.0).collect();
        assert_eq!(ev.len(), expected.len());
        for (a, b) in ev.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn robin_free_halfline_eigenvalue() {
        let a = BoundaryCondition::new(PI / 4.0).unwrap();
        assert!((free_halfline_eigenvalue(a).unwrap() + 1.0).abs() < 1e-14);
        assert!(free_halfline_eigenvalue(BoundaryCondition::new(2.0).unwrap()).is_none());
    }

    #[test]
    fn xi_finite_zero_and_sign() {
        let l: Vec<f64> = (0..50).map(|k| -2.0 + 0.3 * k as f64).collect();
        let g = xi_finite(&Potential::zero(), D, D, 5.0, &l).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        let bump = Potential::gaussian_bump(2.0, 1.5, 0.5).unwrap();
        let g = xi_finite(&bump, D, D, 5.0, &l).unwrap();
        assert!(g.values.iter().all(|&v| v >= 0.0));
        for (&lam, &v) in g.lambdas.iter().zip(&g.values) {
            assert_eq!(g.value_at(lam), v, "at {lam}");
        }
    }

    #[test]
    fn phase_of_free_problem_is_zero() {
        let g = xi_halfline_phase(&Potential::zero(), D, &[-1.0, 0.5, 2.0], EpsilonPolicy::default(), &SolverOptions::default()).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deep_well_bound_state_from_phase() {
        let pot = Potential::square_well(-4.0, 1.0).unwrap();
        let opts = SolverOptions::default();
        let ev = halfline_eigenvalues(&pot, D, opts.tail_tol).unwrap();
        assert_eq!(ev.len(), 1);
        let e = ev[0];
        let g = xi_halfline_phase(&pot, D, &[e - 0.1, e + 0.1, 1.0], EpsilonPolicy::default(), &opts).unwrap();
        assert!(g.values[0].abs() < 1e-3, "{:?}", g.values);
        assert!((g.values[1] + 1.0).abs() < 1e-3, "{:?}", g.values);
    }

    #[test]
    fn grid_representation_integrates_plateau_exactly() {
        let g = SpectralShiftGrid::new(
            vec![-2.0, 0.0, 2.0],
            vec![0.0, -1.0, 0.0],
            XiMethod::Counting,
            Geometry::halfline(D),
            None,
            -3.0,
            vec![Jump { at: -0.5, delta: -1 }, Jump { at: 0.7, delta: 1 }],
        );
        let v = g.integrate(|_| Complex64::new(1.0, 0.0), -2.0, 2.0).unwrap();
        assert!((v.re + 1.2).abs() < 1e-14);
    }
}
