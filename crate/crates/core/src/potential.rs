//! Real potentials on [0, ∞): closed-form models and sampled grids, with
//! truncation, translation, sign splitting and the factorization V = u·v.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Result, SsfError};
use crate::numerics::quad::{integrate, integrate_to_infinity, QuadTol};

/// How a sampled potential is evaluated between abscissae.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Zero,
    /// `depth` on [0, width), zero beyond.
    SquareWell { depth: f64, width: f64 },
    /// `amplitude · exp(−rate·x)`.
    Exponential { amplitude: f64, rate: f64 },
    /// `height · exp(−((x − center)/width)²)`, cut off where it drops below 1e-35 relative.
    GaussianBump { height: f64, center: f64, width: f64 },
    Sampled {
        xs: Vec<f64>,
        vs: Vec<f64>,
        interpolation: Interpolation,
        /// Zero beyond this point; without it the last sample value is held.
        support_hint: Option<f64>,
    },
}

const GAUSS_CUT: f64 = 9.0;

impl Shape {
    fn value(&self, x: f64) -> f64 {
        match self {
            Shape::Zero => 0.0,
            Shape::SquareWell { depth, width } => {
                if x < *width {
                    *depth
                } else {
                    0.0
                }
            }
            Shape::Exponential { amplitude, rate } => amplitude * (-rate * x).exp(),
            Shape::GaussianBump {
                height,
                center,
                width,
            } => {
                let t = (x - center) / width;
                if t.abs() >= GAUSS_CUT {
                    0.0
                } else {
                    height * (-t * t).exp()
                }
            }
            Shape::Sampled {
                xs,
                vs,
                interpolation,
                support_hint,
            } => {
                if let Some(s) = support_hint {
                    if x >= *s {
                        return 0.0;
                    }
                }
                let n = xs.len();
                if x <= xs[0] {
                    return vs[0];
                }
                if x >= xs[n - 1] {
                    return vs[n - 1];
                }
                let j = xs.partition_point(|&a| a <= x);
                let (x0, x1) = (xs[j - 1], xs[j]);
                match interpolation {
                    Interpolation::Constant => vs[j - 1],
                    Interpolation::Linear => {
                        let t = (x - x0) / (x1 - x0);
                        vs[j - 1] + t * (vs[j] - vs[j - 1])
                    }
                }
            }
        }
    }

    /// Point beyond which the shape vanishes identically.
    fn support_end(&self) -> Option<f64> {
        match self {
            Shape::Zero => Some(0.0),
            Shape::SquareWell { width, .. } => Some(width.max(0.0)),
            Shape::Exponential { amplitude, .. } => (*amplitude == 0.0).then_some(0.0),
            Shape::GaussianBump { center, width, .. } => Some((center + GAUSS_CUT * width).max(0.0)),
            Shape::Sampled {
                xs,
                vs,
                support_hint,
                ..
            } => match support_hint {
                Some(s) => Some(*s),
                None if *vs.last().unwrap() == 0.0 => Some(*xs.last().unwrap()),
                None => None,
            },
        }
    }

    /// Whether the shape takes (positive, negative) values anywhere.
    fn signs(&self) -> (bool, bool) {
        let of = |a: f64| (a > 0.0, a < 0.0);
        match self {
            Shape::Zero => (false, false),
            Shape::SquareWell { depth, width } => {
                if *width > 0.0 {
                    of(*depth)
                } else {
                    (false, false)
                }
            }
            Shape::Exponential { amplitude, .. } => of(*amplitude),
            Shape::GaussianBump { height, .. } => of(*height),
            Shape::Sampled { vs, .. } => (
                vs.iter().any(|&v| v > 0.0),
                vs.iter().any(|&v| v < 0.0),
            ),
        }
    }

    fn sup_abs(&self, sign: f64, from: f64) -> f64 {
        match self {
            Shape::Zero => 0.0,
            Shape::SquareWell { depth, width } => {
                if from < *width {
                    (sign * depth).max(0.0)
                } else {
                    0.0
                }
            }
            Shape::Exponential { amplitude, rate } => {
                (sign * amplitude).max(0.0) * (-rate * from).exp()
            }
            Shape::GaussianBump { height, .. } => (sign * height).max(0.0),
            Shape::Sampled { vs, .. } => vs.iter().map(|v| (sign * v).max(0.0)).fold(0.0, f64::max),
        }
    }

    fn discontinuities(&self) -> Vec<f64> {
        match self {
            Shape::SquareWell { width, .. } => vec![*width],
            Shape::Sampled {
                xs, support_hint, ..
            } => {
                let mut v = xs.clone();
                if let Some(s) = support_hint {
                    v.push(*s);
                }
                v
            }
            Shape::GaussianBump { center, width, .. } => {
                vec![center - GAUSS_CUT * width, center + GAUSS_CUT * width]
            }
            _ => Vec::new(),
        }
    }
}

/// Which sign part of the underlying shape a potential represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Full,
    /// max(V, 0)
    Positive,
    /// max(−V, 0), so that V = V₊ − V₋
    Negative,
}

/// An immutable potential `x ↦ part(shape(x + offset))` for `x < cutoff`, zero beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    shape: Arc<Shape>,
    offset: f64,
    cutoff: f64,
    part: Part,
}

impl Potential {
    pub fn new(shape: Shape) -> Result<Self> {
        validate_shape(&shape)?;
        Ok(Potential {
            shape: Arc::new(shape),
            offset: 0.0,
            cutoff: f64::INFINITY,
            part: Part::Full,
        })
    }

    pub fn zero() -> Self {
        Potential::new(Shape::Zero).expect("zero shape is valid")
    }

    pub fn square_well(depth: f64, width: f64) -> Result<Self> {
        Potential::new(Shape::SquareWell { depth, width })
    }

    pub fn exponential(amplitude: f64, rate: f64) -> Result<Self> {
        Potential::new(Shape::Exponential { amplitude, rate })
    }

    pub fn gaussian_bump(height: f64, center: f64, width: f64) -> Result<Self> {
        Potential::new(Shape::GaussianBump {
            height,
            center,
            width,
        })
    }

    pub fn sampled(
        xs: Vec<f64>,
        vs: Vec<f64>,
        interpolation: Interpolation,
        support_hint: Option<f64>,
    ) -> Result<Self> {
        Potential::new(Shape::Sampled {
            xs,
            vs,
            interpolation,
            support_hint,
        })
    }

    /// Reads a two-column `x,V(x)` CSV; a non-numeric first line is treated as a header.
    pub fn from_csv_reader<R: BufRead>(
        reader: R,
        interpolation: Interpolation,
        support_hint: Option<f64>,
    ) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let row = i + 1;
            let line = line.map_err(|e| SsfError::domain(format!("row {row}: {e}")))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<(f64, f64)> = match cols.as_slice() {
                [a, b] => a.parse().ok().zip(b.parse().ok()),
                _ => None,
            };
            let Some((x, v)) = parsed else {
                if row == 1 {
                    continue;
                }
                return Err(SsfError::domain(format!(
                    "row {row}: expected two numeric columns, got '{line}'"
                )));
            };
            if !x.is_finite() || !v.is_finite() || x < 0.0 {
                return Err(SsfError::domain(format!(
                    "row {row}: values must be finite with x >= 0"
                )));
            }
            if let Some(&prev) = xs.last() {
                if x <= prev {
                    return Err(SsfError::domain(format!(
                        "row {row}: x = {x} is not strictly increasing (previous {prev})"
                    )));
                }
            }
            xs.push(x);
            vs.push(v);
        }
        Potential::sampled(xs, vs, interpolation, support_hint)
    }

    pub fn from_csv_path(
        path: &Path,
        interpolation: Interpolation,
        support_hint: Option<f64>,
    ) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| SsfError::io(path, e))?;
        Potential::from_csv_reader(std::io::BufReader::new(file), interpolation, support_hint)
            .map_err(|e| match e {
                SsfError::Domain(m) => SsfError::Domain(format!("{}: {m}", path.display())),
                other => other,
            })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn part(&self) -> Part {
        self.part
    }

    /// V(x); rejects negative x.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(SsfError::domain(format!("potential evaluated at x = {x} < 0")));
        }
        Ok(self.value(x))
    }

    /// V(x) without the domain check; callers guarantee x ≥ 0.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        if x >= self.cutoff {
            return 0.0;
        }
        let v = self.shape.value(x + self.offset);
        match self.part {
            Part::Full => v,
            Part::Positive => v.max(0.0),
            Part::Negative => (-v).max(0.0),
        }
    }

    pub fn factorize(&self) -> Factorization {
        Factorization { pot: self.clone() }
    }

    /// V restricted to (0, R), zero beyond.
    pub fn truncate(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) || r.is_nan() {
            return Err(SsfError::domain(format!("truncation radius R = {r} must be positive")));
        }
        let mut p = self.clone();
        p.cutoff = p.cutoff.min(r);
        Ok(p)
    }

    /// x ↦ V(x + shift).
    pub fn translate(&self, shift: f64) -> Result<Self> {
        if !(shift >= 0.0) {
            return Err(SsfError::domain(format!("translation {shift} must be nonnegative")));
        }
        let mut p = self.clone();
        p.offset += shift;
        p.cutoff = (p.cutoff - shift).max(0.0);
        Ok(p)
    }

    pub fn positive_part(&self) -> Self {
        self.with_part(Part::Positive)
    }

    pub fn negative_part(&self) -> Self {
        self.with_part(Part::Negative)
    }

    fn with_part(&self, part: Part) -> Self {
        let new = match (self.part, part) {
            (Part::Full, p) => p,
            (Part::Positive, Part::Positive) | (Part::Negative, Part::Negative) => self.part,
            (p, Part::Full) => p,
            // positive part of a nonnegative function's negation, etc.: identically zero
            _ => return Potential::zero(),
        };
        let mut p = self.clone();
        p.part = new;
        p
    }

    /// (V_R, V₊, V₋).
    pub fn truncate_and_split(&self, r: f64) -> Result<(Self, Self, Self)> {
        let vr = self.truncate(r)?;
        Ok((vr, self.positive_part(), self.negative_part()))
    }

    /// Whether V vanishes identically, decided structurally.
    pub fn is_zero(&self) -> bool {
        if self.cutoff <= 0.0 {
            return true;
        }
        if let Some(end) = self.support_end() {
            if end <= 0.0 {
                return true;
            }
        }
        let (pos, neg) = self.shape.signs();
        match self.part {
            Part::Full => !pos && !neg,
            Part::Positive => !pos,
            Part::Negative => !neg,
        }
    }

    /// (V ≥ 0 everywhere, V ≤ 0 everywhere).
    pub fn sign_definite(&self) -> (bool, bool) {
        let (pos, neg) = self.shape.signs();
        match self.part {
            Part::Full => (!neg, !pos),
            Part::Positive => (true, !pos),
            Part::Negative => (true, !neg),
        }
    }

    /// Point beyond which V ≡ 0, if there is one.
    pub fn support_end(&self) -> Option<f64> {
        let shape_end = self.shape.support_end().map(|e| (e - self.offset).max(0.0));
        match shape_end {
            Some(e) => Some(e.min(self.cutoff)),
            None if self.cutoff.is_finite() => Some(self.cutoff),
            None => None,
        }
    }

    /// Upper bound for sup V₋ = sup max(−V, 0).
    pub fn sup_negative(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        match self.part {
            Part::Full => self.shape.sup_abs(-1.0, self.offset),
            Part::Positive => 0.0,
            Part::Negative => 0.0,
        }
    }

    /// Upper bound for sup |V|.
    pub fn sup_abs(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let p = self.shape.sup_abs(1.0, self.offset);
        let n = self.shape.sup_abs(-1.0, self.offset);
        match self.part {
            Part::Full => p.max(n),
            Part::Positive => p,
            Part::Negative => n,
        }
    }

    /// Points in (a, b) where V is discontinuous or not smooth.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .shape
            .discontinuities()
            .into_iter()
            .map(|p| p - self.offset)
            .collect();
        pts.push(self.cutoff);
        pts.retain(|&p| p > a && p < b);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// ∫_a^∞ |V(x)| dx.
    pub fn l1_tail(&self, a: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return Err(SsfError::domain(format!("l1_tail lower limit {a} < 0")));
        }
        if self.is_zero() {
            return Ok(0.0);
        }
        let end = self.support_end();
        if let Some(e) = end {
            if a >= e {
                return Ok(0.0);
            }
        }
        let keeps = {
            let (pos, neg) = self.shape.signs();
            match self.part {
                Part::Full => true,
                Part::Positive => !neg,
                Part::Negative => !pos,
            }
        };
        if keeps {
            match *self.shape {
                Shape::SquareWell { depth, width } => {
                    let hi = (width - self.offset).min(self.cutoff);
                    return Ok(depth.abs() * (hi - a).max(0.0));
                }
                Shape::Exponential { amplitude, rate } if rate > 0.0 => {
                    let c = amplitude.abs() / rate * (-rate * self.offset).exp();
                    let upper = if self.cutoff.is_finite() {
                        (-rate * self.cutoff).exp()
                    } else {
                        0.0
                    };
                    return Ok(c * ((-rate * a).exp() - upper).max(0.0));
                }
                _ => {}
            }
        }
        if let Shape::Sampled {
            vs, support_hint: None, ..
        } = &*self.shape
        {
            if end.is_none() && *vs.last().unwrap() != 0.0 {
                return Ok(f64::INFINITY);
            }
        }
        let tol = QuadTol::default();
        let f = |x: f64| self.value(x).abs();
        let (v, _) = match end {
            Some(e) => integrate(f, a, e, &self.breakpoints(a, e), tol)?,
            None => {
                let brk = self.breakpoints(a, f64::INFINITY);
                let mut total = 0.0;
                let mut lo = a;
                for &p in &brk {
                    total += integrate(f, lo, p, &[], tol)?.0;
                    lo = p;
                }
                (total + integrate_to_infinity(f, lo, tol)?.0, 0.0)
            }
        };
        Ok(v)
    }

    /// Smallest X with ∫_X^∞ |V| ≤ `tail_tol`, used to seed Jost solutions.
    pub fn tail_cutoff(&self, tail_tol: f64) -> Result<f64> {
        if !(tail_tol > 0.0) {
            return Err(SsfError::domain(format!("tail tolerance {tail_tol} must be positive")));
        }
        if let Some(e) = self.support_end() {
            return Ok(e);
        }
        if self.l1_tail(0.0)? <= tail_tol {
            return Ok(0.0);
        }
        let mut hi = 1.0;
        loop {
            let t = self.l1_tail(hi)?;
            if t <= tail_tol {
                break;
            }
            if hi > 1e6 || !t.is_finite() {
                return Err(SsfError::Tail {
                    tol: tail_tol,
                    reason: "potential has no declared support end and its L1 tail does not decay; \
                             provide a support hint"
                        .into(),
                });
            }
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.l1_tail(mid)? <= tail_tol {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-6 * hi {
                break;
            }
        }
        Ok(hi)
    }

    /// Short human-readable description for report metadata.
    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.shape {
            Shape::Zero => write!(f, "zero")?,
            Shape::SquareWell { depth, width } => write!(f, "square-well(depth={depth}, width={width})")?,
            Shape::Exponential { amplitude, rate } => {
                write!(f, "exponential(amplitude={amplitude}, rate={rate})")?
            }
            Shape::GaussianBump {
                height,
                center,
                width,
            } => write!(f, "gaussian-bump(height={height}, center={center}, width={width})")?,
            Shape::Sampled {
                xs, interpolation, ..
            } => write!(f, "grid-sampled(n={}, {:?})", xs.len(), interpolation)?,
        }
        if self.offset != 0.0 {
            write!(f, " shifted by {}", self.offset)?;
        }
        if self.cutoff.is_finite() {
            write!(f, " on (0,{})", self.cutoff)?;
        }
        match self.part {
            Part::Full => Ok(()),
            Part::Positive => write!(f, " [positive part]"),
            Part::Negative => write!(f, " [negative part]"),
        }
    }
}

fn validate_shape(shape: &Shape) -> Result<()> {
    let finite = |name: &str, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(SsfError::domain(format!("{name} must be finite")))
        }
    };
    match shape {
        Shape::Zero => Ok(()),
        Shape::SquareWell { depth, width } => {
            finite("depth", *depth)?;
            if !(*width > 0.0) || !width.is_finite() {
                return Err(SsfError::domain("square-well width must be positive"));
            }
            Ok(())
        }
        Shape::Exponential { amplitude, rate } => {
            finite("amplitude", *amplitude)?;
            if !(*rate > 0.0) || !rate.is_finite() {
                return Err(SsfError::domain("exponential rate must be positive"));
            }
            Ok(())
        }
        Shape::GaussianBump {
            height,
            center,
            width,
        } => {
            finite("height", *height)?;
            finite("center", *center)?;
            if !(*width > 0.0) || !width.is_finite() {
                return Err(SsfError::domain("gaussian-bump width must be positive"));
            }
            Ok(())
        }
        Shape::Sampled {
            xs,
            vs,
            support_hint,
            ..
        } => {
            if xs.is_empty() || xs.len() != vs.len() {
                return Err(SsfError::domain("sampled potential needs equally many x and V values"));
            }
            for (i, w) in xs.windows(2).enumerate() {
                if !(w[1] > w[0]) {
                    return Err(SsfError::domain(format!(
                        "row {}: x = {} is not strictly increasing",
                        i + 2,
                        w[1]
                    )));
                }
            }
            if xs[0] < 0.0 || xs.iter().chain(vs).any(|v| !v.is_finite()) {
                return Err(SsfError::domain("sampled values must be finite with x >= 0"));
            }
            if let Some(s) = support_hint {
                if !(*s > 0.0) || !s.is_finite() {
                    return Err(SsfError::domain("support hint must be positive"));
                }
            }
            Ok(())
        }
    }
}

/// V = u·v with v = |V|^{1/2} and u = v·sgn V, sgn 0 = +1.
#[derive(Debug, Clone)]
pub struct Factorization {
    pot: Potential,
}

impl Factorization {
    #[inline]
    pub fn u(&self, x: f64) -> f64 {
        let v = self.pot.value(x);
        if v < 0.0 {
            -(-v).sqrt()
        } else {
            v.sqrt()
        }
    }

    #[inline]
    pub fn v(&self, x: f64) -> f64 {
        self.pot.value(x).abs().sqrt()
    }

    pub fn potential(&self) -> &Potential {
        &self.pot
    }
}
