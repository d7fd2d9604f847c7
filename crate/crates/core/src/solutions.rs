//! Free and perturbed solutions of −ψ″ + Vψ = zψ: the Weyl solutions fixed by a
//! boundary condition at 0 or at R, and the Jost solution ψ₊ ~ e^{iwx}.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsfError};
use crate::numerics::ode::Dopri5;
use crate::potential::Potential;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Complex energy z with its root w = z^{1/2}, Im w ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter {
    pub z: Complex64,
    pub w: Complex64,
}

impl SpectralParameter {
    pub fn new(z: Complex64) -> Result<Self> {
        if z == Complex64::new(0.0, 0.0) {
            return Err(SsfError::Branch);
        }
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(SsfError::domain(format!("spectral parameter {z} is not finite")));
        }
        let mut w = z.sqrt();
        if w.im < 0.0 || (w.im == 0.0 && w.re < 0.0) {
            w = -w;
        }
        Ok(SpectralParameter { z, w })
    }

    pub fn real(lambda: f64) -> Result<Self> {
        Self::new(Complex64::new(lambda, 0.0))
    }

    pub fn from_parts(re: f64, im: f64) -> Result<Self> {
        Self::new(Complex64::new(re, im))
    }
}

/// Separated boundary condition sin(angle)·ψ′ + cos(angle)·ψ = 0, angle ∈ [0, π).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    angle: f64,
}

impl BoundaryCondition {
    pub const DIRICHLET: BoundaryCondition = BoundaryCondition { angle: 0.0 };
    pub const NEUMANN: BoundaryCondition = BoundaryCondition { angle: PI / 2.0 };

    pub fn new(angle: f64) -> Result<Self> {
        if !(0.0..PI).contains(&angle) {
            return Err(SsfError::domain(format!(
                "boundary angle {angle} outside [0, pi)"
            )));
        }
        Ok(BoundaryCondition { angle })
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn sin(&self) -> f64 {
        self.angle.sin()
    }

    pub fn cos(&self) -> f64 {
        self.angle.cos()
    }

    pub fn is_dirichlet(&self) -> bool {
        self.angle == 0.0
    }

    /// sin(angle)·ψ′ + cos(angle)·ψ.
    pub fn apply(&self, s: &SolutionSample) -> Complex64 {
        s.dpsi * self.sin() + s.psi * self.cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionSample {
    pub x: f64,
    pub psi: Complex64,
    pub dpsi: Complex64,
}

impl SolutionSample {
    pub fn new(x: f64, psi: Complex64, dpsi: Complex64) -> Self {
        SolutionSample { x, psi, dpsi }
    }

    fn scale(&self) -> f64 {
        self.psi.norm().max(self.dpsi.norm())
    }
}

/// Which closed-form free solution to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreeSolution {
    /// Satisfies the α-condition at 0.
    Left(BoundaryCondition),
    /// Satisfies the β-condition at R.
    Right(BoundaryCondition, f64),
    Jost,
}

/// sin(wx)/w, continuous through w = 0.
fn sinc_w(w: Complex64, x: f64) -> Complex64 {
    if w.norm() * x.abs() < 1e-8 {
        Complex64::new(x, 0.0) * (1.0 - w * w * x * x / 6.0)
    } else {
        (w * x).sin() / w
    }
}

pub fn free_solution(which: FreeSolution, sp: &SpectralParameter, x: f64) -> Result<SolutionSample> {
    let w = sp.w;
    let s = match which {
        FreeSolution::Left(a) => {
            let (sa, ca) = (a.sin(), a.cos());
            let psi = sinc_w(w, x) * ca - (w * x).cos() * sa;
            let dpsi = (w * x).cos() * ca + w * (w * x).sin() * sa;
            SolutionSample::new(x, psi, dpsi)
        }
        FreeSolution::Right(b, r) => {
            let (sb, cb) = (b.sin(), b.cos());
            let d = r - x;
            let psi = sinc_w(w, d) * cb + (w * d).cos() * sb;
            let dpsi = -(w * d).cos() * cb + w * (w * d).sin() * sb;
            SolutionSample::new(x, psi, dpsi)
        }
        FreeSolution::Jost => {
            let e = (I * w * x).exp();
            SolutionSample::new(x, e, I * w * e)
        }
    };
    Ok(s)
}

/// W(ψ_{R,β}⁽⁰⁾, ψ_{0,α}⁽⁰⁾) in closed form.
pub fn free_wronskian_finite(
    alpha: BoundaryCondition,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
) -> Complex64 {
    let w = sp.w;
    sinc_w(w, r) * (alpha.cos() * beta.cos())
        + (w * r).cos() * (beta.angle() - alpha.angle()).sin()
        + w * (w * r).sin() * (alpha.sin() * beta.sin())
}

/// W(ψ₊⁽⁰⁾, ψ_{0,α}⁽⁰⁾) = cos α + i w sin α.
pub fn free_wronskian_halfline(alpha: BoundaryCondition, sp: &SpectralParameter) -> Complex64 {
    Complex64::new(alpha.cos(), 0.0) + I * sp.w * alpha.sin()
}

/// f·g′ − f′·g at a common point.
pub fn wronskian(a: &SolutionSample, b: &SolutionSample) -> Result<Complex64> {
    if (a.x - b.x).abs() > 1e-12 * (1.0 + a.x.abs()) {
        return Err(SsfError::domain(format!(
            "Wronskian of samples at different points {} and {}",
            a.x, b.x
        )));
    }
    Ok(a.psi * b.dpsi - a.dpsi * b.psi)
}

/// Integration settings shared by the solution solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub ode: Dopri5,
    /// Tail tolerance for Jost seeding: ∫_X^∞ |V| ≤ tail_tol.
    pub tail_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            ode: Dopri5::default(),
            tail_tol: 1e-10,
        }
    }
}

/// Exact propagation of (ψ, ψ′) through a stretch where V ≡ 0.
fn free_transfer(w: Complex64, psi: Complex64, dpsi: Complex64, h: f64) -> (Complex64, Complex64) {
    let c = (w * h).cos();
    let s = (w * h).sin();
    (psi * c + dpsi * sinc_w(w, h), -psi * w * s + dpsi * c)
}

fn rk_segment(
    pot: &Potential,
    z: Complex64,
    ode: &Dopri5,
    x0: f64,
    state: (Complex64, Complex64),
    x1: f64,
) -> Result<(Complex64, Complex64)> {
    let y0 = [state.0.re, state.0.im, state.1.re, state.1.im];
    // evaluate V strictly inside the segment so that jumps at the ends do not leak in
    let (lo, hi) = (x0.min(x1), x0.max(x1));
    let span = hi - lo;
    let rhs = |x: f64, y: &[f64; 4]| {
        let t = ((x - lo) / span).clamp(1e-12, 1.0 - 1e-12);
        let vv = pot.value(lo + t * span);
        let (ar, ai) = (vv - z.re, -z.im);
        [y[2], y[3], ar * y[0] - ai * y[1], ar * y[1] + ai * y[0]]
    };
    let y = ode.integrate(rhs, x0, y0, x1).map_err(|f| SsfError::Integration {
        x: f.x,
        reason: if f.underflow {
            "step size underflow".into()
        } else {
            "step limit or non-finite state".into()
        },
    })?;
    Ok((Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])))
}

/// Propagates (ψ, ψ′) from x0 to x1 (either direction).
pub(crate) fn propagate(
    pot: &Potential,
    sp: &SpectralParameter,
    ode: &Dopri5,
    x0: f64,
    state: (Complex64, Complex64),
    x1: f64,
) -> Result<(Complex64, Complex64)> {
    if x0 == x1 {
        return Ok(state);
    }
    let (lo, hi) = (x0.min(x1), x0.max(x1));
    let free_from = if pot.is_zero() {
        0.0
    } else {
        pot.support_end().unwrap_or(f64::INFINITY)
    };
    let mut knots = vec![lo];
    knots.extend(pot.breakpoints(lo, hi));
    if free_from > lo && free_from < hi {
        knots.push(free_from);
    }
    knots.push(hi);
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    if x1 < x0 {
        knots.reverse();
    }
    // the equation is linear: integrate a unit-size state so that the absolute
    // tolerance stays meaningful, and carry the size separately
    let mut size = state.0.norm().max(state.1.norm());
    if size == 0.0 {
        return Ok(state);
    }
    let mut st = (state.0 / size, state.1 / size);
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if a.min(b) >= free_from {
            st = free_transfer(sp.w, st.0, st.1, b - a);
        } else {
            st = rk_segment(pot, sp.z, ode, a, st, b)?;
        }
        let n = st.0.norm().max(st.1.norm());
        if n > 0.0 && n.is_finite() {
            st = (st.0 / n, st.1 / n);
            size *= n;
        }
        if !(st.0.re.is_finite() && st.0.im.is_finite() && st.1.re.is_finite() && st.1.im.is_finite()) {
            return Err(SsfError::Integration {
                x: b,
                reason: "solution overflowed".into(),
            });
        }
    }
    Ok((st.0 * size, st.1 * size))
}

fn check_grid(xs: &[f64], lo: f64, hi: f64) -> Result<()> {
    if xs.is_empty() {
        return Err(SsfError::domain("empty sample grid"));
    }
    if xs.windows(2).any(|p| !(p[1] >= p[0])) {
        return Err(SsfError::domain("sample grid must be ascending"));
    }
    if xs[0] < lo || *xs.last().unwrap() > hi || xs.iter().any(|x| x.is_nan()) {
        return Err(SsfError::domain(format!("sample grid must lie in [{lo}, {hi}]")));
    }
    Ok(())
}

fn march(
    pot: &Potential,
    sp: &SpectralParameter,
    ode: &Dopri5,
    start: f64,
    init: (Complex64, Complex64),
    xs: &[f64],
    backward: bool,
) -> Result<Vec<SolutionSample>> {
    let mut out = vec![SolutionSample::new(0.0, init.0, init.1); xs.len()];
    let mut x = start;
    let mut st = init;
    let order: Box<dyn Iterator<Item = usize>> = if backward {
        Box::new((0..xs.len()).rev())
    } else {
        Box::new(0..xs.len())
    };
    for j in order {
        st = propagate(pot, sp, ode, x, st, xs[j])?;
        x = xs[j];
        out[j] = SolutionSample::new(x, st.0, st.1);
    }
    Ok(out)
}

/// ψ_{0,α}: ψ(0) = −sin α, ψ′(0) = cos α, sampled on ascending `xs`.
pub fn solve_weyl_left(
    pot: &Potential,
    alpha: BoundaryCondition,
    sp: &SpectralParameter,
    xs: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SolutionSample>> {
    check_grid(xs, 0.0, f64::INFINITY)?;
    let init = (Complex64::new(-alpha.sin(), 0.0), Complex64::new(alpha.cos(), 0.0));
    march(pot, sp, &opts.ode, 0.0, init, xs, false)
}

/// ψ_{R,β}: ψ(R) = sin β, ψ′(R) = −cos β, sampled on ascending `xs` ⊂ [0, R].
pub fn solve_weyl_right(
    pot: &Potential,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
    xs: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<SolutionSample>> {
    if !(r > 0.0) {
        return Err(SsfError::domain(format!("interval length R = {r} must be positive")));
    }
    check_grid(xs, 0.0, r)?;
    let init = (Complex64::new(beta.sin(), 0.0), Complex64::new(-beta.cos(), 0.0));
    march(pot, sp, &opts.ode, r, init, xs, true)
}

/// Jost solution seeded with e^{iwX} at the tail cutoff X and integrated back.
/// Returns the samples and the seeding point actually used.
pub fn solve_jost(
    pot: &Potential,
    sp: &SpectralParameter,
    xs: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<SolutionSample>, f64)> {
    if !(sp.w.im > 0.0) {
        return Err(SsfError::domain(
            "Jost solution needs Im z^(1/2) > 0; approach the real axis through lambda + i epsilon",
        ));
    }
    check_grid(xs, 0.0, f64::INFINITY)?;
    let cutoff = pot.tail_cutoff(opts.tail_tol)?;
    let start = cutoff.max(*xs.last().unwrap());
    let seed = free_solution(FreeSolution::Jost, sp, start)?;
    let out = march(pot, sp, &opts.ode, start, (seed.psi, seed.dpsi), xs, true)?;
    Ok((out, start))
}

pub fn weyl_left_at(
    pot: &Potential,
    alpha: BoundaryCondition,
    sp: &SpectralParameter,
    x: f64,
    opts: &SolverOptions,
) -> Result<SolutionSample> {
    Ok(solve_weyl_left(pot, alpha, sp, &[x], opts)?[0])
}

pub fn weyl_right_at(
    pot: &Potential,
    beta: BoundaryCondition,
    r: f64,
    sp: &SpectralParameter,
    x: f64,
    opts: &SolverOptions,
) -> Result<SolutionSample> {
    Ok(solve_weyl_right(pot, beta, r, sp, &[x], opts)?[0])
}

pub fn jost_at(pot: &Potential, sp: &SpectralParameter, x: f64, opts: &SolverOptions) -> Result<SolutionSample> {
    Ok(solve_jost(pot, sp, &[x], opts)?.0[0])
}

/// Relative size of a Wronskian against the solutions it was built from,
/// for near-eigenvalue detection.
pub(crate) fn wronskian_scale(a: &SolutionSample, b: &SolutionSample) -> f64 {
    a.scale() * b.scale()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1e-300)
    }

    #[test]
    fn branch_convention() {
        let sp = SpectralParameter::real(-1.0).unwrap();
        assert_eq!(sp.w, I);
        let sp = SpectralParameter::new(Complex64::new(-4.0, -0.0)).unwrap();
        assert!((sp.w - 2.0 * I).norm() < 1e-15);
        let sp = SpectralParameter::real(4.0).unwrap();
        assert_eq!(sp.w, Complex64::new(2.0, 0.0));
        assert_eq!(SpectralParameter::real(0.0), Err(SsfError::Branch));
        let sp = SpectralParameter::from_parts(2.0, 0.5).unwrap();
        assert!(sp.w.im >= 0.0 && close(sp.w * sp.w, sp.z, 1e-15));
    }

    #[test]
    fn boundary_angles_validated() {
        assert!(BoundaryCondition::new(3.5).is_err());
        assert!(BoundaryCondition::new(-0.1).is_err());
        assert!(BoundaryCondition::new(PI).is_err());
        assert!(BoundaryCondition::new(0.0).is_ok());
    }

    #[test]
    fn free_values() {
        let sp = SpectralParameter::real(-1.0).unwrap();
        let s = free_solution(FreeSolution::Left(BoundaryCondition::DIRICHLET), &sp, 1.0).unwrap();
        assert!(close(s.psi, Complex64::new(1.175_201_193_643_801_4, 0.0), 1e-15));
        assert!(close(s.dpsi, Complex64::new(1.543_080_634_815_243_7, 0.0), 1e-15));
        let s = free_solution(FreeSolution::Left(BoundaryCondition::NEUMANN), &sp, 0.0).unwrap();
        assert!((s.psi + 1.0).norm() < 1e-15 && s.dpsi.norm() < 1e-15);
        let s = free_solution(FreeSolution::Right(BoundaryCondition::DIRICHLET, 1.0), &sp, 1.0).unwrap();
        assert!(s.psi.norm() < 1e-15 && (s.dpsi + 1.0).norm() < 1e-15);
    }

    #[test]
    fn free_wronskians() {
        let sp = SpectralParameter::real(-1.0).unwrap();
        let d = BoundaryCondition::DIRICHLET;
        let r = free_solution(FreeSolution::Right(d, 1.0), &sp, 0.4).unwrap();
        let l = free_solution(FreeSolution::Left(d), &sp, 0.4).unwrap();
        assert!(close(wronskian(&r, &l).unwrap(), Complex64::new(1.175_201_193_643_801_4, 0.0), 1e-14));
        assert_eq!(wronskian(&l, &l).unwrap(), Complex64::new(0.0, 0.0));
        let j = free_solution(FreeSolution::Jost, &sp, 0.4).unwrap();
        assert!(close(wronskian(&j, &l).unwrap(), Complex64::new(1.0, 0.0), 1e-14));
        let other = free_solution(FreeSolution::Jost, &sp, 0.5).unwrap();
        assert!(wronskian(&j, &other).is_err());
    }

    #[test]
    fn zero_potential_reproduces_free_solutions() {
        let pot = Potential::zero();
        let opts = SolverOptions::default();
        let xs: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
        let a = BoundaryCondition::new(0.7).unwrap();
        for z in [Complex64::new(-1.0, 0.0), Complex64::new(-4.0, 0.0), Complex64::new(2.0, 0.5)] {
            let sp = SpectralParameter::new(z).unwrap();
            let left = solve_weyl_left(&pot, a, &sp, &xs, &opts).unwrap();
            let right = solve_weyl_right(&pot, a, 5.0, &sp, &xs, &opts).unwrap();
            let (jost, _) = solve_jost(&pot, &sp, &xs, &opts).unwrap();
            for (k, &x) in xs.iter().enumerate() {
                let fl = free_solution(FreeSolution::Left(a), &sp, x).unwrap();
                let fr = free_solution(FreeSolution::Right(a, 5.0), &sp, x).unwrap();
                let fj = free_solution(FreeSolution::Jost, &sp, x).unwrap();
                assert!(close(left[k].psi, fl.psi, 1e-9));
                assert!(close(right[k].dpsi, fr.dpsi, 1e-9));
                assert!(close(jost[k].psi, fj.psi, 1e-9));
            }
        }
    }

    #[test]
    fn square_well_left_solution_matches_piecewise_form() {
        // inside: −ψ″ = (z − V)ψ = −ψ with z = −2, V = −1, so ψ = sinh x
        let pot = Potential::square_well(-1.0, 1.0).unwrap();
        let sp = SpectralParameter::real(-2.0).unwrap();
        let xs = [0.5, 1.0, 2.0];
        let s = solve_weyl_left(&pot, BoundaryCondition::DIRICHLET, &sp, &xs, &SolverOptions::default()).unwrap();
        assert!((s[0].psi.re - 0.5f64.sinh()).abs() < 1e-11);
        let (p1, d1) = (1f64.sinh(), 1f64.cosh());
        let k = 2f64.sqrt();
        let p2 = p1 * k.cosh() + d1 * k.sinh() / k;
        assert!((s[2].psi.re - p2).abs() < 1e-10 * p2);
        assert!(s[2].psi.im.abs() < 1e-14);
    }

    #[test]
    fn wronskian_is_constant_for_perturbed_solutions() {
        let pot = Potential::exponential(-2.0, 1.0).unwrap();
        let sp = SpectralParameter::from_parts(1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..=8).map(|k| k as f64).collect();
        let opts = SolverOptions::default();
        let a = solve_weyl_left(&pot, BoundaryCondition::DIRICHLET, &sp, &xs, &opts).unwrap();
        let b = solve_weyl_left(&pot, BoundaryCondition::NEUMANN, &sp, &xs, &opts).unwrap();
        let w0 = wronskian(&a[0], &b[0]).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!(close(wronskian(p, q).unwrap(), w0, 1e-8));
        }
    }

    #[test]
    fn jost_through_square_well() {
        // for x ≥ 1, ψ₊ = e^{−x}; inside V − z = 0, so ψ is linear
        let pot = Potential::square_well(-1.0, 1.0).unwrap();
        let sp = SpectralParameter::real(-1.0).unwrap();
        let (s, cutoff) = solve_jost(&pot, &sp, &[0.0, 1.0], &SolverOptions::default()).unwrap();
        assert_eq!(cutoff, 1.0);
        let e = (-1f64).exp();
        assert!((s[1].psi.re - e).abs() < 1e-14);
        // ψ(x) = e^{−1}(1 − (x − 1)) → ψ(0) = 2/e
        assert!((s[0].psi.re - 2.0 * e).abs() < 1e-12);
        assert!((s[0].dpsi.re + e).abs() < 1e-12);
    }

    #[test]
    fn jost_rejects_real_axis() {
        let sp = SpectralParameter::real(2.0).unwrap();
        assert!(solve_jost(&Potential::zero(), &sp, &[0.0], &SolverOptions::default()).is_err());
    }
}
