//! Green's functions from Weyl and Jost solutions, Krein-type comparison
//! identities, and kernels of fractional powers of the free Dirichlet resolvent.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::numerics::bessel::bessel_k0;
use crate::numerics::quad::{integrate, integrate_to_infinity, QuadTol};
use crate::potential::Potential;
use crate::solutions::{
    free_solution, free_wronskian_finite, free_wronskian_halfline, solve_jost, solve_weyl_left,
    solve_weyl_right, wronskian, wronskian_scale, BoundaryCondition, FreeSolution, SolutionSample,
    SolverOptions, SpectralParameter,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative size below which a Wronskian is treated as vanishing.
pub const NEAR_EIGENVALUE_THRESHOLD: f64 = 1e-12;

fn ordered(x: f64, xp: f64) -> (f64, f64) {
    if x <= xp {
        (x, xp)
    } else {
        (xp, x)
    }
}

fn guard_wronskian(
    w: Complex64,
    a: &SolutionSample,
    b: &SolutionSample,
    sp: &SpectralParameter,
    what: &'static str,
) -> Result<Complex64> {
    let scale = wronskian_scale(a, b);
    if w.norm() < NEAR_EIGENVALUE_THRESHOLD * scale.max(1.0) {
        return Err(SsfError::NearEigenvalue {
            z_re: sp.z.re,
            z_im: sp.z.im,
            what,
            magnitude: w.norm(),
        });
    }
    Ok(w)
}

fn check_points(x: f64, xp: f64, r: f64) -> Result<()> {
    if !(x >= 0.0 && xp >= 0.0 && x <= r && xp <= r) {
        return Err(SsfError::domain(format!("points ({x}, {xp}) outside [0, {r}]")));
    }
    Ok(())
}

/// G_{(0,R),α,β}(z; x, x′) = −ψ_{0,α}(x<)ψ_{R,β}(x>)/W(ψ_{0,α}, ψ_{R,β}).
#[allow(clippy::too_many_arguments)]
pub fn green_finite(
    pot: &Potential,
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
    x: f64,
    xp: f64,
    opts: &SolverOptions,
) -> Result<Complex64> {
    check_points(x, xp, r)?;
    let (lo, hi) = ordered(x, xp);
    let left = solve_weyl_left(pot, alpha, sp, &[lo], opts)?[0];
    let right = solve_weyl_right(pot, beta, r, sp, &[lo, hi], opts)?;
    let w = guard_wronskian(wronskian(&left, &right[0])?, &left, &right[0], sp, "finite-interval operator")?;
    Ok(-left.psi * right[1].psi / w)
}

/// G_{(0,∞),α}(z; x, x′) = −ψ_{0,α}(x<)ψ₊(x>)/W(ψ_{0,α}, ψ₊).
pub fn green_halfline(
    pot: &Potential,
    alpha: BoundaryCondition,
    sp: &SpectralParameter,
    x: f64,
    xp: f64,
    opts: &SolverOptions,
) -> Result<Complex64> {
    check_points(x, xp, f64::INFINITY)?;
    let (lo, hi) = ordered(x, xp);
    let left = solve_weyl_left(pot, alpha, sp, &[lo], opts)?[0];
    let (jost, _) = solve_jost(pot, sp, &[lo, hi], opts)?;
    let w = guard_wronskian(wronskian(&left, &jost[0])?, &left, &jost[0], sp, "half-line operator")?;
    Ok(-left.psi * jost[1].psi / w)
}

/// Free finite-interval kernel from the closed-form free solutions.
pub fn free_green_finite(
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
    x: f64,
    xp: f64,
) -> Result<Complex64> {
    let (lo, hi) = ordered(x, xp);
    let w = free_wronskian_finite(alpha, beta, r, sp);
    let l = free_solution(FreeSolution::Left(alpha), sp, lo)?;
    let rr = free_solution(FreeSolution::Right(beta, r), sp, hi)?;
    if w.norm() < NEAR_EIGENVALUE_THRESHOLD * (1.0 + sp.w.norm()) {
        return Err(SsfError::NearEigenvalue {
            z_re: sp.z.re,
            z_im: sp.z.im,
            what: "free finite-interval operator",
            magnitude: w.norm(),
        });
    }
    // W(ψ_0, ψ_R) = −W(ψ_R, ψ_0)
    Ok(l.psi * rr.psi / w)
}

/// Free half-line kernel −ψ_{0,α}⁽⁰⁾(x<)e^{iwx>}/W(ψ_{0,α}⁽⁰⁾, e^{iw·}).
pub fn free_green_halfline(alpha: BoundaryCondition, sp: &SpectralParameter, x: f64, xp: f64) -> Result<Complex64> {
    let (lo, hi) = ordered(x, xp);
    let w = free_wronskian_halfline(alpha, sp);
    if w.norm() < NEAR_EIGENVALUE_THRESHOLD * (1.0 + sp.w.norm()) {
        return Err(SsfError::NearEigenvalue {
            z_re: sp.z.re,
            z_im: sp.z.im,
            what: "free half-line operator",
            magnitude: w.norm(),
        });
    }
    let l = free_solution(FreeSolution::Left(alpha), sp, lo)?;
    Ok(l.psi * (I * sp.w * hi).exp() / w)
}

/// Robin half-line free kernel rebuilt from the Dirichlet one:
/// G_α = G_0 − sin α · e^{iwx}e^{iwx′}/(cos α + iw sin α).
pub fn free_green_halfline_from_dirichlet(
    alpha: BoundaryCondition,
    sp: &SpectralParameter,
    x: f64,
    xp: f64,
) -> Result<Complex64> {
    let g0 = free_green_halfline(BoundaryCondition::DIRICHLET, sp, x, xp)?;
    let d = free_wronskian_halfline(alpha, sp);
    Ok(g0 - alpha.sin() * (I * sp.w * (x + xp)).exp() / d)
}

/// Which Krein-type comparison to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KreinIdentity {
    /// G_{(0,R),α,β} against G_{(0,∞),α} plus the rank-one term built from ψ₊ and ψ_{0,α}.
    IntervalVsHalfline {
        alpha: BoundaryCondition,
        beta: BoundaryCondition,
        r: f64,
    },
    /// Two half-line kernels with boundary angles α and α̃.
    HalflineAngles {
        alpha: BoundaryCondition,
        alpha_tilde: BoundaryCondition,
    },
}

/// |LHS − RHS| of the selected comparison identity at (z, x, x′).
pub fn krein_residual(
    pot: &Potential,
    identity: KreinIdentity,
    sp: &SpectralParameter,
    x: f64,
    xp: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let (lo, hi) = ordered(x, xp);
    match identity {
        KreinIdentity::IntervalVsHalfline { alpha, beta, r } => {
            check_points(x, xp, r)?;
            let lhs = green_finite(pot, alpha, beta, r, sp, x, xp, opts)?;
            let g_inf = green_halfline(pot, alpha, sp, x, xp, opts)?;
            let left = solve_weyl_left(pot, alpha, sp, &[lo, hi, r], opts)?;
            let (jost, _) = solve_jost(pot, sp, &[lo, r], opts)?;
            let w0p = guard_wronskian(wronskian(&left[0], &jost[0])?, &left[0], &jost[0], sp, "half-line operator")?;
            let num = beta.apply(&jost[1]);
            let den = beta.apply(&left[2]);
            if den.norm() < NEAR_EIGENVALUE_THRESHOLD * wronskian_scale(&left[2], &left[2]).sqrt().max(1.0) {
                return Err(SsfError::NearEigenvalue {
                    z_re: sp.z.re,
                    z_im: sp.z.im,
                    what: "finite-interval operator",
                    magnitude: den.norm(),
                });
            }
            let rhs = g_inf + num * left[0].psi * left[1].psi / (den * w0p);
            Ok((lhs - rhs).norm())
        }
        KreinIdentity::HalflineAngles { alpha, alpha_tilde } => {
            let lhs = green_halfline(pot, alpha_tilde, sp, x, xp, opts)?;
            let g_alpha = green_halfline(pot, alpha, sp, x, xp, opts)?;
            let left0 = solve_weyl_left(pot, alpha, sp, &[0.0], opts)?[0];
            let (jost, _) = solve_jost(pot, sp, &[0.0, lo, hi], opts)?;
            let w0p = guard_wronskian(wronskian(&left0, &jost[0])?, &left0, &jost[0], sp, "half-line operator")?;
            let num = alpha_tilde.apply(&left0);
            let den = alpha_tilde.apply(&jost[0]);
            if num == Complex64::new(0.0, 0.0) {
                return Ok((lhs - g_alpha).norm());
            }
            let rhs = g_alpha + num * jost[1].psi * jost[2].psi / (w0p * den);
            Ok((lhs - rhs).norm())
        }
    }
}

/// Geometry of the free Dirichlet operator whose fractional resolvent power is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelGeometry {
    Interval(f64),
    HalfLine,
}

fn frac_tol() -> QuadTol {
    QuadTol {
        abs: 1e-14,
        rel: 1e-11,
        max_intervals: 4000,
    }
}

/// sinh(a)·sinh(b)/sinh(c) for 0 ≤ a, b and a + b ≤ c, without overflow.
fn sinh_ratio(a: f64, b: f64, c: f64) -> f64 {
    let num = (-(-2.0 * a).exp_m1()) * (-(-2.0 * b).exp_m1());
    (a + b - c).exp() * num / (-2.0 * (-2.0 * c).exp_m1())
}

/// Free Dirichlet kernel at z = −s², divided by nothing: s·G⁰(−s²; x, x′).
fn s_times_free_dirichlet(geom: KernelGeometry, s: f64, lo: f64, hi: f64) -> f64 {
    match geom {
        KernelGeometry::Interval(r) => sinh_ratio(s * lo, s * (r - hi), s * r),
        KernelGeometry::HalfLine => 0.5 * (s * (lo - hi)).exp() * (-(-2.0 * s * lo).exp_m1()),
    }
}

/// Kernel of (H⁰ + E)^{−q} for the free Dirichlet operator.
///
/// On the diagonal the kernel is finite only for q > 1/2; for q ≤ 1/2 the
/// diagonal value is +∞ (use [`frac_power_kernel_gap`] for comparisons there).
pub fn frac_power_kernel(geom: KernelGeometry, e: f64, q: f64, x: f64, xp: f64) -> Result<f64> {
    check_frac_args(geom, e, q, x, xp)?;
    let (lo, hi) = ordered(x, xp);
    if lo == 0.0 {
        return Ok(0.0);
    }
    if let KernelGeometry::Interval(r) = geom {
        if hi == r {
            return Ok(0.0);
        }
    }
    if lo == hi && q <= 0.5 {
        return Ok(f64::INFINITY);
    }
    let se = e.sqrt();
    if q == 0.5 {
        return Ok(match geom {
            KernelGeometry::HalfLine => (bessel_k0(se * (hi - lo)) - bessel_k0(se * (hi + lo))) / PI,
            KernelGeometry::Interval(_) => {
                // s = √E cosh u removes the 1/√(s² − E) endpoint singularity
                let d = hi - lo;
                let u_max = (750.0 / (se * d)).max(1.0).acosh() + 1.0;
                let (v, _) = integrate(
                    |u| s_times_free_dirichlet(geom, se * u.cosh(), lo, hi),
                    0.0,
                    u_max,
                    &[],
                    frac_tol(),
                )?;
                2.0 / PI * v
            }
        });
    }
    frac_power_general(geom, e, q, |s| s_times_free_dirichlet(geom, s, lo, hi) / s)
}

/// sin(πq)/π ∫₀^∞ t^{−q} g(√(E + t)) dt, with t = τ^p, p = 1/(1 − q).
fn frac_power_general<F: Fn(f64) -> f64>(_geom: KernelGeometry, e: f64, q: f64, g: F) -> Result<f64> {
    let p = 1.0 / (1.0 - q);
    let (v, _) = integrate_to_infinity(
        |tau| {
            let t = tau.powf(p);
            p * g((e + t).sqrt())
        },
        0.0,
        frac_tol(),
    )?;
    Ok((PI * q).sin() / PI * v)
}

/// Half-line kernel minus interval kernel of (H⁰ + E)^{−q}, both Dirichlet;
/// finite everywhere, including the diagonal.
pub fn frac_power_kernel_gap(r: f64, e: f64, q: f64, x: f64, xp: f64) -> Result<f64> {
    check_frac_args(KernelGeometry::Interval(r), e, q, x, xp)?;
    let (lo, hi) = ordered(x, xp);
    if lo == 0.0 {
        return Ok(0.0);
    }
    // G_∞ − G_R = sinh(s x<) sinh(s x>) · 2e^{−2sR} / (s (1 − e^{−2sR}))
    let g = |s: f64| {
        let a = s * lo;
        let b = s * hi;
        let c = s * r;
        let shl = 0.5 * (-(-2.0 * a).exp_m1());
        let shh = 0.5 * (-(-2.0 * b).exp_m1());
        2.0 * shl * shh * (a + b - 2.0 * c).exp() / (-(-2.0 * c).exp_m1()) / s
    };
    frac_power_general(KernelGeometry::Interval(r), e, q, g)
}

fn check_frac_args(geom: KernelGeometry, e: f64, q: f64, x: f64, xp: f64) -> Result<()> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(SsfError::domain(format!("E = {e} must be positive")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(SsfError::domain(format!("power q = {q} outside (0, 1)")));
    }
    let r = match geom {
        KernelGeometry::Interval(r) => {
            if !(r > 0.0) {
                return Err(SsfError::domain(format!("interval length {r} must be positive")));
            }
            r
        }
        KernelGeometry::HalfLine => f64::INFINITY,
    };
    check_points(x, xp, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    const D: BoundaryCondition = BoundaryCondition::DIRICHLET;

    #[test]
    fn free_kernel_values() {
        let sp = SpectralParameter::real(-1.0).unwrap();
        let opts = SolverOptions::default();
        let pot = Potential::zero();
        let g = green_finite(&pot, D, D, 1.0, &sp, 0.5, 0.5, &opts).unwrap();
        assert!((g.re - 0.231_058_578_630_004_9).abs() < 1e-12);
        let g = green_halfline(&pot, D, &sp, 0.5, 0.5, &opts).unwrap();
        assert!((g.re - 0.316_060_279_414_278_8).abs() < 1e-12);
        let c = free_green_finite(D, D, 1.0, &sp, 0.5, 0.5).unwrap();
        assert!((c.re - 0.231_058_578_630_004_9).abs() < 1e-14);
        assert_eq!(green_finite(&pot, D, D, 1.0, &sp, 0.0, 0.4, &opts).unwrap().norm(), 0.0);
    }

    #[test]
    fn symmetry_is_exact() {
        let sp = SpectralParameter::from_parts(1.0, 0.3).unwrap();
        let pot = Potential::square_well(-1.0, 1.0).unwrap();
        let opts = SolverOptions::default();
        let a = BoundaryCondition::new(0.4).unwrap();
        let g1 = green_finite(&pot, a, D, 2.0, &sp, 0.3, 0.7, &opts).unwrap();
        let g2 = green_finite(&pot, a, D, 2.0, &sp, 0.7, 0.3, &opts).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn robin_rebuild_from_dirichlet() {
        let sp = SpectralParameter::from_parts(-2.0, 0.5).unwrap();
        for angle in [0.3, 1.0, 2.5] {
            let a = BoundaryCondition::new(angle).unwrap();
            let direct = free_green_halfline(a, &sp, 0.4, 1.3).unwrap();
            let rebuilt = free_green_halfline_from_dirichlet(a, &sp, 0.4, 1.3).unwrap();
            assert!((direct - rebuilt).norm() < 1e-14 * direct.norm());
        }
    }

    #[test]
    fn krein_identities() {
        let opts = SolverOptions::default();
        let sp = SpectralParameter::real(-1.0).unwrap();
        let id = KreinIdentity::IntervalVsHalfline {
            alpha: D,
            beta: D,
            r: 1.0,
        };
        assert!(krein_residual(&Potential::zero(), id, &sp, 0.25, 0.75, &opts).unwrap() <= 1e-9);
        let well = Potential::square_well(-1.0, 1.0).unwrap();
        let sp3 = SpectralParameter::real(-3.0).unwrap();
        let id = KreinIdentity::HalflineAngles {
            alpha: D,
            alpha_tilde: BoundaryCondition::new(PI / 4.0).unwrap(),
        };
        assert!(krein_residual(&well, id, &sp3, 0.5, 0.5, &opts).unwrap() <= 1e-7);
        let same = KreinIdentity::HalflineAngles {
            alpha: D,
            alpha_tilde: D,
        };
        assert_eq!(krein_residual(&well, same, &sp3, 0.5, 0.5, &opts).unwrap(), 0.0);
    }

    #[test]
    fn frac_kernel_half_line_diagonal_is_infinite() {
        let k = frac_power_kernel(KernelGeometry::HalfLine, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(k.is_infinite());
        let gap = frac_power_kernel_gap(2.0, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(gap.is_finite() && gap > 0.0);
    }

    #[test]
    fn frac_kernel_general_q_matches_half_power_forms() {
        for geom in [KernelGeometry::HalfLine, KernelGeometry::Interval(2.0)] {
            let special = frac_power_kernel(geom, 1.0, 0.5, 0.3, 0.6).unwrap();
            let general = frac_power_general(geom, 1.0, 0.5, |s| s_times_free_dirichlet(geom, s, 0.3, 0.6) / s).unwrap();
            assert!((special - general).abs() < 1e-6 * special, "{special} {general}");
        }
    }

    #[test]
    fn frac_kernel_rejects_bad_input() {
        assert!(frac_power_kernel(KernelGeometry::HalfLine, 0.0, 0.5, 0.1, 0.2).is_err());
        assert!(frac_power_kernel(KernelGeometry::HalfLine, 1.0, 1.0, 0.1, 0.2).is_err());
    }

    #[test]
    fn interval_kernel_matches_eigenfunction_series() {
        let (r, e, q, x, xp) = (2.0, 1.0, 0.75, 0.5, 1.5);
        let k = frac_power_kernel(KernelGeometry::Interval(r), e, q, x, xp).unwrap();
        let mut series = 0.0;
        for n in 1..400_000 {
            let kn = n as f64 * PI / r;
            series += 2.0 / r * (kn * x).sin() * (kn * xp).sin() * (kn * kn + e).powf(-q);
        }
        assert!((k - series).abs() < 1e-6, "{k} {series}");
    }
}
