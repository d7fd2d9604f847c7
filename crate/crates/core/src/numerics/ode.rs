//! Dormand–Prince 5(4) integrator for small fixed-size real systems.
//!
//! Complex ODEs are integrated by splitting real and imaginary parts into the
//! state array. Integration runs in either direction; the caller is responsible
//! for splitting the range at discontinuities of the right-hand side.

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; `None` lets the controller grow freely.
    pub h_max: Option<f64>,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Dopri5 {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 2_000_000,
            h_max: None,
        }
    }
}

/// Where and why a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeFailure {
    pub x: f64,
    pub underflow: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        let hc = h * c;
        for i in 0..N {
            out[i] += hc * k[i];
        }
    }
    out
}

impl Dopri5 {
    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = Some(h_max);
        self
    }

    /// Integrates `y' = f(x, y)` from `x0` to `x1` and returns `y(x1)`.
    pub fn integrate<const N: usize, F>(
        &self,
        mut f: F,
        x0: f64,
        y0: [f64; N],
        x1: f64,
    ) -> Result<[f64; N], OdeFailure>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        let span = x1 - x0;
        if span == 0.0 {
            return Ok(y0);
        }
        let dir = span.signum();
        let h_cap = self.h_max.unwrap_or(f64::INFINITY).min(span.abs());

        let mut x = x0;
        let mut y = y0;
        let mut k1 = f(x, &y);
        let mut h = self.initial_step(&k1, &y, span.abs()).min(h_cap);
        let h_floor = 1e-14 * (x0.abs().max(x1.abs()).max(1.0));

        for _ in 0..self.max_steps {
            let remaining = (x1 - x) * dir;
            if remaining <= 0.0 {
                return Ok(y);
            }
            let mut last = false;
            if h >= remaining {
                h = remaining;
                last = true;
            }
            let hs = h * dir;

            let k2 = f(x + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
            let k3 = f(x + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                x + C4 * hs,
                &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                x + C5 * hs,
                &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                x + hs,
                &axpy(
                    &y,
                    hs,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = axpy(
                &y,
                hs,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = f(x + hs, &y_new);

            let mut err = 0.0;
            for i in 0..N {
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                return Err(OdeFailure { x, underflow: false });
            }

            if err <= 1.0 {
                x = if last { x1 } else { x + hs };
                y = y_new;
                k1 = k7;
                if last {
                    return Ok(y);
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                h = (h * fac).min(h_cap);
            } else {
                h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                if h < h_floor {
                    return Err(OdeFailure { x, underflow: true });
                }
            }
        }
        Err(OdeFailure { x, underflow: false })
    }

    fn initial_step<const N: usize>(&self, k1: &[f64; N], y: &[f64; N], span: f64) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h.min(0.1 * span).max(1e-12 * span)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_one_period() {
        let sol = Dopri5::default()
            .integrate(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [0.0, 1.0], 2.0 * std::f64::consts::PI)
            .unwrap();
        assert!(sol[0].abs() < 1e-10, "{sol:?}");
        assert!((sol[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn backward_integration_of_exponential() {
        let sol = Dopri5::default()
            .integrate(|_, y: &[f64; 1]| [y[0]], 3.0, [1.0], 0.0)
            .unwrap();
        assert!((sol[0] - (-3.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn zero_span_returns_input() {
        let y = Dopri5::default()
            .integrate(|_, _: &[f64; 1]| [1.0], 1.0, [4.0], 1.0)
            .unwrap();
        assert_eq!(y, [4.0]);
    }

    #[test]
    fn blow_up_reports_failure_position() {
        // y' = y^2, y(0) = 1 explodes at x = 1
        let res = Dopri5::default().integrate(|_, y: &[f64; 1]| [y[0] * y[0]], 0.0, [1.0], 2.0);
        let fail = res.unwrap_err();
        assert!(fail.x > 0.9 && fail.x <= 1.0, "{fail:?}");
    }
}
