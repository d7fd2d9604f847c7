//! Fredholm determinants det(I + u(H⁰ − z)⁻¹v) via Wronskian quotients and,
//! independently, via Nyström discretization of the Birman–Schwinger kernel.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SsfError};
use crate::geometry::Geometry;
use crate::greens::{free_green_finite, free_green_halfline, NEAR_EIGENVALUE_THRESHOLD};
use crate::numerics::quad::gauss_legendre_on;
use crate::potential::Potential;
use crate::solutions::{
    free_wronskian_finite, free_wronskian_halfline, jost_at, weyl_left_at, weyl_right_at,
    BoundaryCondition, SolverOptions, SpectralParameter,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeterminantMethod {
    Wronskian,
    Nystrom,
    /// Richardson combination of Nyström determinants with n and n/2 nodes.
    NystromExtrapolated,
}

impl DeterminantMethod {
    pub fn label(&self) -> &'static str {
        match self {
            DeterminantMethod::Wronskian => "wronskian",
            DeterminantMethod::Nystrom => "nystrom",
            DeterminantMethod::NystromExtrapolated => "nystrom-extrapolated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeterminantValue {
    pub z: SpectralParameter,
    pub value: Complex64,
    pub method: DeterminantMethod,
    pub geometry: Geometry,
    pub node_count: Option<usize>,
}

/// Nyström truncation tolerance for half-line potentials without compact support.
pub const NYSTROM_TAIL_TOL: f64 = 1e-8;

fn one(sp: &SpectralParameter, geometry: Geometry, method: DeterminantMethod, n: Option<usize>) -> DeterminantValue {
    DeterminantValue {
        z: *sp,
        value: Complex64::new(1.0, 0.0),
        method,
        geometry,
        node_count: n,
    }
}

/// Denominator of the finite-interval quotient with a near-zero guard.
fn free_denominator_finite(
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
) -> Result<Complex64> {
    let d = free_wronskian_finite(alpha, beta, r, sp);
    let w = sp.w;
    let scale = ((w * r).sin() / w).norm() + (w * r).cos().norm() + (w * (w * r).sin()).norm();
    if d.norm() < NEAR_EIGENVALUE_THRESHOLD * scale.max(1.0) {
        return Err(SsfError::NearEigenvalue {
            z_re: sp.z.re,
            z_im: sp.z.im,
            what: "free finite-interval operator",
            magnitude: d.norm(),
        });
    }
    Ok(d)
}

fn free_denominator_halfline(alpha: BoundaryCondition, sp: &SpectralParameter) -> Result<Complex64> {
    let d = free_wronskian_halfline(alpha, sp);
    if d.norm() < NEAR_EIGENVALUE_THRESHOLD * (1.0 + sp.w.norm()) {
        return Err(SsfError::NearEigenvalue {
            z_re: sp.z.re,
            z_im: sp.z.im,
            what: "free half-line operator",
            magnitude: d.norm(),
        });
    }
    Ok(d)
}

/// [sin β ψ′_{0,α}(z,R) + cos β ψ_{0,α}(z,R)] over the free Wronskian.
pub fn det_wronskian_finite(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
    opts: &SolverOptions,
) -> Result<DeterminantValue> {
    let geometry = Geometry::interval(r, alpha, beta)?;
    let den = free_denominator_finite(alpha, beta, r, sp)?;
    if pot.is_zero() {
        return Ok(one(sp, geometry, DeterminantMethod::Wronskian, None));
    }
    let left = weyl_left_at(pot, alpha, sp, r, opts)?;
    Ok(DeterminantValue {
        z: *sp,
        value: beta.apply(&left) / den,
        method: DeterminantMethod::Wronskian,
        geometry,
        node_count: None,
    })
}

/// Same determinant from the right Weyl solution at x = 0:
/// [sin α ψ′_{R,β}(z,0) + cos α ψ_{R,β}(z,0)] over the free Wronskian.
pub fn det_wronskian_finite_at_origin(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
    opts: &SolverOptions,
) -> Result<DeterminantValue> {
    let geometry = Geometry::interval(r, alpha, beta)?;
    let den = free_denominator_finite(alpha, beta, r, sp)?;
    if pot.is_zero() {
        return Ok(one(sp, geometry, DeterminantMethod::Wronskian, None));
    }
    let right = weyl_right_at(pot, beta, r, sp, 0.0, opts)?;
    Ok(DeterminantValue {
        z: *sp,
        value: alpha.apply(&right) / den,
        method: DeterminantMethod::Wronskian,
        geometry,
        node_count: None,
    })
}

/// [sin α ψ₊′(z,0) + cos α ψ₊(z,0)] / (cos α + i z^{1/2} sin α).
pub fn det_wronskian_halfline(
    pot: &Potential,
    alpha: BoundaryCondition,
    sp: &SpectralParameter,
    opts: &SolverOptions,
) -> Result<DeterminantValue> {
    let geometry = Geometry::halfline(alpha);
    if pot.is_zero() {
        return Ok(one(sp, geometry, DeterminantMethod::Wronskian, None));
    }
    let den = free_denominator_halfline(alpha, sp)?;
    let jost = jost_at(pot, sp, 0.0, opts)?;
    Ok(DeterminantValue {
        z: *sp,
        value: alpha.apply(&jost) / den,
        method: DeterminantMethod::Wronskian,
        geometry,
        node_count: None,
    })
}

/// Wronskian-quotient determinant for either geometry.
pub fn det_wronskian(
    geometry: &Geometry,
    pot: &Potential,
    sp: &SpectralParameter,
    opts: &SolverOptions,
) -> Result<DeterminantValue> {
    match *geometry {
        Geometry::Interval { length, alpha, beta } => det_wronskian_finite(pot, alpha, beta, length, sp, opts),
        Geometry::HalfLine { alpha } => det_wronskian_halfline(pot, alpha, sp, opts),
    }
}

/// Nodes per Gauss–Legendre panel in the Nyström discretization.
const PANEL_NODES: usize = 16;

struct NystromGrid {
    xs: Vec<f64>,
    ws: Vec<f64>,
}

/// Quadrature nodes and weights over the part of the geometry where V is nonzero.
///
/// Panels respect the potential's breakpoints and are otherwise placed at equal
/// quantiles of |V|^{1/2}, which balances the kernel's diagonal kink against the
/// size of V.
fn nystrom_nodes(geometry: &Geometry, pot: &Potential, n: usize) -> Result<NystromGrid> {
    let end = match geometry {
        Geometry::Interval { length, .. } => pot.support_end().map_or(*length, |e| e.min(*length)),
        Geometry::HalfLine { .. } => pot.tail_cutoff(NYSTROM_TAIL_TOL)?,
    };
    let panels = (n / PANEL_NODES).max(1);
    // cumulative density on a fine grid
    let fine = 4096;
    let h = end / fine as f64;
    let mut cum = vec![0.0; fine + 1];
    for i in 0..fine {
        let x = (i as f64 + 0.5) * h;
        cum[i + 1] = cum[i] + pot.value(x).abs().sqrt() * h;
    }
    let total = cum[fine];
    let mut edges = vec![0.0, end];
    edges.extend(pot.breakpoints(0.0, end));
    if total > 0.0 {
        for p in 1..panels {
            let target = total * p as f64 / panels as f64;
            let i = cum.partition_point(|&c| c < target).clamp(1, fine);
            let t = (target - cum[i - 1]) / (cum[i] - cum[i - 1]).max(f64::MIN_POSITIVE);
            edges.push((i as f64 - 1.0 + t.clamp(0.0, 1.0)) * h);
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * end);
    let count = edges.len() - 1;
    // spread n nodes as evenly as possible over the panels
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for (k, p) in edges.windows(2).enumerate() {
        let m = (n / count + usize::from(k < n % count)).max(4);
        let (x, w) = gauss_legendre_on(m, p[0], p[1]);
        xs.extend(x);
        ws.extend(w);
    }
    Ok(NystromGrid { xs, ws })
}

fn free_kernel(geometry: &Geometry, sp: &SpectralParameter, x: f64, xp: f64) -> Result<Complex64> {
    match *geometry {
        Geometry::Interval { length, alpha, beta } => free_green_finite(alpha, beta, length, sp, x, xp),
        Geometry::HalfLine { alpha } => free_green_halfline(alpha, sp, x, xp),
    }
}

/// √w_j a(x_j) G⁰(z; x_j, x_k) b(x_k) √w_k on the Nyström nodes.
fn kernel_matrix<A, B>(
    geometry: &Geometry,
    sp: &SpectralParameter,
    xs: &[f64],
    ws: &[f64],
    left: A,
    right: B,
) -> Result<DMatrix<Complex64>>
where
    A: Fn(f64) -> f64 + Sync,
    B: Fn(f64) -> f64 + Sync,
{
    let n = xs.len();
    let lw: Vec<f64> = xs.iter().zip(ws).map(|(&x, &w)| w.sqrt() * left(x)).collect();
    let rw: Vec<f64> = xs.iter().zip(ws).map(|(&x, &w)| w.sqrt() * right(x)).collect();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            (0..n)
                .map(|k| {
                    if lw[j] == 0.0 || rw[k] == 0.0 {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    Ok(free_kernel(geometry, sp, xs[j], xs[k])? * (lw[j] * rw[k]))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |j, k| rows[j][k]))
}

/// det(I + M) for the Nyström matrix M of u(H⁰ − z)⁻¹v with `n` Gauss–Legendre nodes.
pub fn det_nystrom(
    geometry: &Geometry,
    pot: &Potential,
    sp: &SpectralParameter,
    n: usize,
) -> Result<DeterminantValue> {
    if n < 16 {
        return Err(SsfError::domain(format!("Nyström needs at least 16 nodes, got {n}")));
    }
    if let Geometry::Interval { length, alpha, beta } = *geometry {
        free_denominator_finite(alpha, beta, length, sp)?;
    }
    if pot.is_zero() {
        return Ok(one(sp, *geometry, DeterminantMethod::Nystrom, Some(n)));
    }
    let grid = nystrom_nodes(geometry, pot, n)?;
    let fac = pot.factorize();
    let mut m = kernel_matrix(geometry, sp, &grid.xs, &grid.ws, |x| fac.u(x), |x| fac.v(x))?;
    for j in 0..m.nrows() {
        m[(j, j)] += Complex64::new(1.0, 0.0);
    }
    let lu = m.lu();
    let u = lu.u();
    let pivots: Vec<f64> = u.diagonal().iter().map(|p| p.norm()).collect();
    let pmax = pivots.iter().cloned().fold(0.0, f64::max);
    let pmin = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    if pmax == 0.0 || pmin / pmax < 1e-14 {
        return Err(SsfError::Conditioning {
            ratio: if pmax == 0.0 { 0.0 } else { pmin / pmax },
        });
    }
    Ok(DeterminantValue {
        z: *sp,
        value: lu.determinant(),
        method: DeterminantMethod::Nystrom,
        geometry: *geometry,
        node_count: Some(grid.xs.len()),
    })
}

/// (4·D(n) − D(n/2))/3 with D the Nyström determinant.
///
/// The kernel's derivative jump on the diagonal makes the plain Nyström error
/// O(n⁻²); the combination removes the leading term.
pub fn det_nystrom_extrapolated(
    geometry: &Geometry,
    pot: &Potential,
    sp: &SpectralParameter,
    n: usize,
) -> Result<DeterminantValue> {
    if n < 32 {
        return Err(SsfError::domain(format!("extrapolated Nyström needs at least 32 nodes, got {n}")));
    }
    // an even number of panels, so the coarse grid has exactly half of them
    let half = n / (2 * PANEL_NODES) * PANEL_NODES;
    let (fine, coarse) = rayon::join(
        || det_nystrom(geometry, pot, sp, 2 * half),
        || det_nystrom(geometry, pot, sp, half),
    );
    let (fine, coarse) = (fine?, coarse?);
    Ok(DeterminantValue {
        value: (4.0 * fine.value - coarse.value) / 3.0,
        method: DeterminantMethod::NystromExtrapolated,
        ..fine
    })
}

/// Trace norm of the Nyström matrix of v(H⁰ − z)⁻¹v (sum of singular values).
pub fn trace_norm_bs(geometry: &Geometry, pot: &Potential, sp: &SpectralParameter, n: usize) -> Result<f64> {
    if n < 16 {
        return Err(SsfError::domain(format!("Nyström needs at least 16 nodes, got {n}")));
    }
    if pot.is_zero() {
        return Ok(0.0);
    }
    let grid = nystrom_nodes(geometry, pot, n)?;
    let fac = pot.factorize();
    let m = kernel_matrix(geometry, sp, &grid.xs, &grid.ws, |x| fac.v(x), |x| fac.v(x))?;
    let sv = m.singular_values();
    Ok(sv.iter().sum())
}
