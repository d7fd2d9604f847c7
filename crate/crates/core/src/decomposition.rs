//! Splitting (0, R₂) by a Dirichlet condition at R₁: spectral shift of the
//! decoupled operator as a sum over the pieces, and the correction term that
//! restores the coupled interval.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsfError};
use crate::geometry::Geometry;
use crate::greens::green_finite;
use crate::potential::Potential;
use crate::solutions::{BoundaryCondition, SolverOptions, SpectralParameter};
use crate::ssf::{
    cancel_jumps, eigenvalues, lower_bound, phase_xi, xi_finite, EpsilonPolicy, Jump, SpectralShiftGrid, XiMethod,
};

const D: BoundaryCondition = BoundaryCondition::DIRICHLET;

/// 0 < R₁ < R₂; Dirichlet conditions at 0, R₁ and R₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitGeometry {
    pub r1: f64,
    pub r2: f64,
}

impl SplitGeometry {
    pub fn new(r1: f64, r2: f64) -> Result<Self> {
        if !(r1 > 0.0 && r2 > r1 && r2.is_finite()) {
            return Err(SsfError::domain(format!("need 0 < R1 < R2, got R1 = {r1}, R2 = {r2}")));
        }
        Ok(SplitGeometry { r1, r2 })
    }

    /// Potential of the right piece, moved to (0, R₂ − R₁).
    pub fn right_piece(&self, pot: &Potential) -> Result<Potential> {
        pot.translate(self.r1)
    }

    fn geometry(&self) -> Geometry {
        Geometry::Interval {
            length: self.r2,
            alpha: D,
            beta: D,
        }
    }
}

fn flip(jumps: &[Jump]) -> (Vec<f64>, Vec<f64>) {
    // (positions of −1 jumps, positions of +1 jumps)
    let neg = jumps.iter().filter(|j| j.delta < 0).flat_map(|j| std::iter::repeat_n(j.at, (-j.delta) as usize));
    let pos = jumps.iter().filter(|j| j.delta > 0).flat_map(|j| std::iter::repeat_n(j.at, j.delta as usize));
    (neg.collect(), pos.collect())
}

/// ξ of the decoupled operator: ξ on (0, R₁) plus ξ on (R₁, R₂), the latter
/// computed after translating the potential to (0, R₂ − R₁).
pub fn xi_direct_sum(pot: &Potential, split: SplitGeometry, lambdas: &[f64]) -> Result<SpectralShiftGrid> {
    let left = pot.truncate(split.r1)?;
    let right = split.right_piece(pot)?;
    let (a, b) = rayon::join(
        || xi_finite(&left, D, D, split.r1, lambdas),
        || xi_finite(&right, D, D, split.r2 - split.r1, lambdas),
    );
    let (a, b) = (a?, b?);
    let values = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
    let (mut neg, mut pos) = flip(&a.jumps);
    let (n2, p2) = flip(&b.jumps);
    neg.extend(n2);
    pos.extend(p2);
    Ok(SpectralShiftGrid::new(
        lambdas.to_vec(),
        values,
        XiMethod::Counting,
        split.geometry(),
        None,
        a.normalization_anchor.min(b.normalization_anchor),
        cancel_jumps(neg, pos),
    ))
}

/// ξ on (0, R₂) minus the decoupled ξ, by subtracting counting functions.
pub fn xi_split_correction(pot: &Potential, split: SplitGeometry, lambdas: &[f64]) -> Result<SpectralShiftGrid> {
    let (full, direct) = rayon::join(
        || xi_finite(pot, D, D, split.r2, lambdas),
        || xi_direct_sum(pot, split, lambdas),
    );
    let (full, direct) = (full?, direct?);
    let values = full.values.iter().zip(&direct.values).map(|(x, y)| x - y).collect();
    let (mut neg, mut pos) = flip(&full.jumps);
    let (dn, dp) = flip(&direct.jumps);
    neg.extend(dp);
    pos.extend(dn);
    Ok(SpectralShiftGrid::new(
        lambdas.to_vec(),
        values,
        XiMethod::Counting,
        split.geometry(),
        None,
        full.normalization_anchor.min(direct.normalization_anchor),
        cancel_jumps(neg, pos),
    ))
}

/// S(z) = G⁰(R₁, R₁; z) / G(R₁, R₁; z) on (0, R₂), which equals the ratio of the
/// coupled to the decoupled perturbation determinants.
pub fn split_determinant_ratio(
    pot: &Potential,
    split: SplitGeometry,
    sp: &SpectralParameter,
    opts: &SolverOptions,
) -> Result<Complex64> {
    let (r1, r2) = (split.r1, split.r2);
    let g0 = green_finite(&Potential::zero(), D, D, r2, sp, r1, r1, opts)?;
    let g = green_finite(pot, D, D, r2, sp, r1, r1, opts)?;
    Ok(g0 / g)
}

/// The correction term as π⁻¹ lim arg S(λ + iε), unwrapped from below the spectrum.
pub fn xi_split_correction_phase(
    pot: &Potential,
    split: SplitGeometry,
    lambdas: &[f64],
    eps: EpsilonPolicy,
    opts: &SolverOptions,
) -> Result<SpectralShiftGrid> {
    let anchor = lower_bound(pot, &split.geometry()) - 1.0;
    let values = phase_xi(
        |z| split_determinant_ratio(pot, split, &SpectralParameter::new(z)?, opts),
        anchor,
        lambdas,
        eps,
    )?;
    let hi = *lambdas.last().unwrap();
    let zero = Potential::zero();
    let left = pot.truncate(split.r1)?;
    let right = split.right_piece(pot)?;
    let lists = [
        eigenvalues(pot, D, D, split.r2, anchor, hi)?,
        eigenvalues(&zero, D, D, split.r2, anchor, hi)?,
        eigenvalues(&left, D, D, split.r1, anchor, hi)?,
        eigenvalues(&right, D, D, split.r2 - split.r1, anchor, hi)?,
        eigenvalues(&zero, D, D, split.r1, anchor, hi)?,
        eigenvalues(&zero, D, D, split.r2 - split.r1, anchor, hi)?,
    ];
    let [full_v, full_0, left_v, right_v, left_0, right_0] = lists;
    let neg: Vec<f64> = full_v.into_iter().chain(left_0).chain(right_0).collect();
    let pos: Vec<f64> = full_0.into_iter().chain(left_v).chain(right_v).collect();
    Ok(SpectralShiftGrid::new(
        lambdas.to_vec(),
        values,
        XiMethod::Phase,
        split.geometry(),
        Some(eps.factor),
        anchor,
        cancel_jumps(neg, pos),
    ))
}

/// Green kernel of the decoupled operator on (0, R₁) ⊕ (R₁, R₂).
pub fn decoupled_green(
    pot: &Potential,
    split: SplitGeometry,
    sp: &SpectralParameter,
    x: f64,
    xp: f64,
    opts: &SolverOptions,
) -> Result<Complex64> {
    let (r1, r2) = (split.r1, split.r2);
    for p in [x, xp] {
        if !(0.0..=r2).contains(&p) {
            return Err(SsfError::domain(format!("point {p} outside [0, {r2}]")));
        }
    }
    let zero = Complex64::new(0.0, 0.0);
    match (x <= r1, xp <= r1) {
        (true, true) => green_finite(&pot.truncate(r1)?, D, D, r1, sp, x, xp, opts),
        (false, false) => green_finite(&split.right_piece(pot)?, D, D, r2 - r1, sp, x - r1, xp - r1, opts),
        _ => Ok(zero),
    }
}

/// Relative residual of G_{(0,R₂)} − G_dec = G(x, R₁) G(R₁, x′) / G(R₁, R₁).
pub fn krein_split_residual(
    pot: &Potential,
    split: SplitGeometry,
    sp: &SpectralParameter,
    x: f64,
    xp: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let (r1, r2) = (split.r1, split.r2);
    let g = |a: f64, b: f64| green_finite(pot, D, D, r2, sp, a, b, opts);
    let full = g(x, xp)?;
    let dec = decoupled_green(pot, split, sp, x, xp, opts)?;
    let rank_one = g(x, r1)? * g(r1, xp)? / g(r1, r1)?;
    let scale = full.norm().max(dec.norm()).max(rank_one.norm()).max(f64::MIN_POSITIVE);
    Ok((full - dec - rank_one).norm() / scale)
}
