//! Dormand–Prince 5(4) with FSAL and standard step-size control.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: 1e-3,
            min_step: 1e-14,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOutcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    /// true when the step callback asked to stop before `t_end`
    pub stopped: bool,
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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates the autonomous-in-form system `y' = f(t, y)` from `t0` towards
/// `t_end` (which may be infinite).
///
/// `f` returns `None` when the state is outside the domain of the right-hand
/// side; the step is then rejected and retried with a smaller size.
/// `on_step` sees every accepted `(t, y)` and may break to stop early.
pub fn integrate<const N: usize, F, C>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &OdeOptions,
    mut on_step: C,
) -> Result<OdeOutcome<N>>
where
    F: Fn(f64, &[f64; N]) -> Option<[f64; N]>,
    C: FnMut(f64, &[f64; N]) -> ControlFlow<()>,
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y).ok_or(Error::StepFailure { at: t })?;
    let mut h = opts.initial_step.min(opts.max_step);
    let mut accepted = 0;
    let mut rejected = 0;
    while t < t_end {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::StepFailure { at: t });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let stages = (|| {
            let k2 = f(t + C2 * h, &combine(&y, h, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(
                t + C4 * h,
                &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = f(
                t + C5 * h,
                &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + h,
                &combine(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let y_new = combine(
                &y,
                h,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = f(t + h, &y_new)?;
            Some((k3, k4, k5, k6, k7, y_new))
        })();
        let Some((k3, k4, k5, k6, k7, y_new)) = stages else {
            rejected += 1;
            h *= 0.25;
            if h < opts.min_step {
                return Err(Error::StepFailure { at: t });
            }
            continue;
        };
        let mut err2 = 0.0;
        for i in 0..N {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err2 += (e / scale).powi(2);
        }
        let err = (err2 / N as f64).sqrt();
        if !err.is_finite() {
            rejected += 1;
            h *= 0.25;
            if h < opts.min_step {
                return Err(Error::StepFailure { at: t });
            }
            continue;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k1 = k7;
            accepted += 1;
            if on_step(t, &y).is_break() {
                return Ok(OdeOutcome {
                    t,
                    y,
                    accepted,
                    rejected,
                    stopped: true,
                });
            }
            h = (h * factor).min(opts.max_step);
        } else {
            rejected += 1;
            h *= factor.min(1.0);
            if h < opts.min_step {
                return Err(Error::StepFailure { at: t });
            }
        }
    }
    Ok(OdeOutcome {
        t,
        y,
        accepted,
        rejected,
        stopped: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let out = integrate(
            |_, y: &[f64; 2]| Some([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            10.0,
            &OdeOptions::default(),
            |_, _| ControlFlow::Continue(()),
        )
        .unwrap();
        assert_eq!(out.t, 10.0);
        assert!((out.y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((out.y[1] + 10f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn fifth_order_convergence_on_fixed_steps() {
        // with huge tolerances the controller never rejects, so compare step sizes
        let run = |h: f64| {
            let opts = OdeOptions {
                rtol: 1e3,
                atol: 1e3,
                initial_step: h,
                max_step: h,
                ..OdeOptions::default()
            };
            let out = integrate(
                |t, y: &[f64; 1]| Some([y[0] * t.cos()]),
                0.0,
                [1.0],
                2.0,
                &opts,
                |_, _| ControlFlow::Continue(()),
            )
            .unwrap();
            (out.y[0] - 2f64.sin().exp()).abs()
        };
        let (e1, e2) = (run(0.1), run(0.05));
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order}");
    }

    #[test]
    fn callback_stops_early() {
        let out = integrate(
            |_, _y: &[f64; 1]| Some([1.0]),
            0.0,
            [0.0],
            f64::INFINITY,
            &OdeOptions::default(),
            |_, y| {
                if y[0] > 3.0 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        )
        .unwrap();
        assert!(out.stopped && out.y[0] > 3.0);
    }

    #[test]
    fn domain_exit_shrinks_then_fails() {
        // y' = 1 with the right-hand side undefined beyond y = 1
        let r = integrate(
            |_, y: &[f64; 1]| (y[0] < 1.0).then_some([1.0]),
            0.0,
            [0.0],
            5.0,
            &OdeOptions::default(),
            |_, _| ControlFlow::Continue(()),
        );
        assert!(matches!(r, Err(Error::StepFailure { .. })));
    }
}
