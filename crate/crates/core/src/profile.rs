//! Catenary-cylinder profiles: the even solution of
//! `u'' = phi'(u) (1 + u'^2)`, `u(0) = h`, `u'(0) = 0`.
//!
//! The profile is integrated in arc length with the tangent angle
//! `theta = atan(u')` as unknown,
//!
//! ```text
//! x' = cos(theta),  u' = sin(theta),  theta' = phi'(u) cos(theta),
//! ```
//!
//! which stays bounded while the slope blows up at `x = +-Lambda_h`. The
//! separated first integral `u'^2 = exp(2 (phi(u) - phi(h))) - 1` gives the
//! half-width as a one-dimensional improper integral, used both for the
//! closed-form width and to certify how much `x` is left once the ODE run has
//! turned (numerically) vertical.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::quadrature::{self, Tolerance};
use crate::weight::{tail_verdict, Jet, TailVerdict, WeightSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileOptions {
    pub rtol: f64,
    pub atol: f64,
    /// tolerance on the certified remaining width
    pub tol: f64,
    pub x_cap: f64,
    /// cap on `|u - h|`; `None` means `1e6 (|h| + 1)`
    pub height_cap: Option<f64>,
    /// `cos(theta)` below which the run is considered vertical
    pub vertical_cos: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            tol: 1e-10,
            x_cap: 1e3,
            height_cap: None,
            vertical_cos: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedXCap,
    ReachedHeightCap,
    WidthConverged,
    /// a decreasing weight drove the height onto the domain end `a`
    ReachedDomainEdge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub x: f64,
    pub u: f64,
    pub u_prime: f64,
}

#[derive(Clone, Debug)]
pub struct ProfileSolution {
    spec: WeightSpec,
    pub h: f64,
    /// samples on `x >= 0`, starting with `(0, h, 0)`
    pub samples: Vec<ProfileSample>,
    angles: Vec<f64>,
    pub lambda_estimate: f64,
    pub slope_limit: f64,
    pub termination: Termination,
}

impl ProfileSolution {
    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    pub fn x_end(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.x)
    }

    /// Samples on the full interval, mirrored through `x = 0`.
    pub fn mirrored(&self) -> Vec<ProfileSample> {
        let left = self.samples[1..].iter().rev().map(|s| ProfileSample {
            x: -s.x,
            u: s.u,
            u_prime: -s.u_prime,
        });
        left.chain(self.samples.iter().copied()).collect()
    }

    /// Profile value and slope at any `|x| <= x_end`, by re-integrating from the
    /// nearest stored sample in the `x` parametrization.
    pub fn evaluate(&self, x: f64) -> Result<ProfileSample> {
        let ax = x.abs();
        let x_end = self.x_end();
        if !(ax <= x_end) {
            return Err(Error::OutOfRange { x, max: x_end });
        }
        let k = match self.samples.binary_search_by(|s| s.x.total_cmp(&ax)) {
            Ok(k) => {
                let s = self.samples[k];
                return Ok(ProfileSample {
                    x,
                    u: s.u,
                    u_prime: if x < 0.0 { -s.u_prime } else { s.u_prime },
                });
            }
            Err(k) => k - 1,
        };
        let start = self.samples[k];
        let spec = &self.spec;
        let opts = OdeOptions {
            initial_step: (ax - start.x) / 4.0,
            rtol: 1e-12,
            atol: 1e-14,
            ..OdeOptions::default()
        };
        let out = ode::integrate(
            |_, y: &[f64; 2]| {
                spec.contains(y[0])
                    .then(|| [y[1].tan(), spec.eval_unchecked(y[0]).first])
            },
            start.x,
            [start.u, self.angles[k]],
            ax,
            &opts,
            |_, _| ControlFlow::Continue(()),
        )?;
        let slope = out.y[1].tan();
        Ok(ProfileSample {
            x,
            u: out.y[0],
            u_prime: if x < 0.0 { -slope } else { slope },
        })
    }
}

/// Value of the half-width integral together with how it was decided.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfWidth {
    #[serde(with = "crate::extended")]
    pub value: f64,
    /// false when the quadrature converged but the tail of `exp(-phi)` could
    /// not be certified integrable
    pub certified: bool,
}

/// Width integral in the direction of motion of the profile:
/// `g(s) = phi(h + sigma s) - phi(h)` with `sigma = sign(phi'(h))`, so `g` is
/// increasing on `[0, s_max)` and
/// `Lambda_h = int_0^s_max ds / sqrt(exp(2 g(s)) - 1)`.
struct WidthIntegrand<'a> {
    spec: &'a WeightSpec,
    h: f64,
    base: Jet,
    sigma: f64,
    s_max: f64,
}

impl<'a> WidthIntegrand<'a> {
    fn new(spec: &'a WeightSpec, h: f64) -> Result<Self> {
        let base = spec.eval(h)?;
        let sigma = if base.first > 0.0 { 1.0 } else { -1.0 };
        let s_max = if sigma > 0.0 {
            f64::INFINITY
        } else {
            h - spec.domain_start()
        };
        Ok(Self {
            spec,
            h,
            base,
            sigma,
            s_max,
        })
    }

    fn g(&self, s: f64) -> Jet {
        let jet = self.spec.eval_unchecked(self.h + self.sigma * s);
        Jet {
            value: jet.value - self.base.value,
            first: self.sigma * jet.first,
            second: jet.second,
        }
    }

    fn g_value(&self, s: f64) -> f64 {
        // second-order Taylor avoids cancellation in phi(h + s) - phi(h)
        if s < 1e-7 * (1.0 + self.h.abs()) {
            self.sigma * self.base.first * s + 0.5 * self.base.second * s * s
        } else {
            self.g(s).value
        }
    }

    fn integrand(&self, s: f64) -> f64 {
        inv_sqrt_expm1(self.g_value(s))
    }

    fn tail(&self) -> TailVerdict {
        if self.s_max.is_finite() {
            // bounded interval, bounded integrand away from s = 0
            return TailVerdict::Convergent {
                cutoff: self.s_max,
                bound: 0.0,
            };
        }
        let (_, c) = self.spec.range();
        let sup = c.is_finite().then(|| c - self.base.value);
        tail_verdict(&|s| self.g(s), 0.0, sup)
    }

    /// `int_{s_from}^{s_max}` of the width integrand.
    fn integrate(&self, s_from: f64, tol: f64) -> Result<(f64, bool)> {
        let certified = match self.tail() {
            TailVerdict::DivergentFloor { .. } | TailVerdict::DivergentRate => {
                return Ok((f64::INFINITY, true));
            }
            TailVerdict::Convergent { .. } => true,
            TailVerdict::Unknown => false,
        };
        let qtol = Tolerance {
            abs: 0.1 * tol,
            rel: 1e-13,
            max_intervals: 20_000,
        };
        let mut value = 0.0;
        let mut error = 0.0;
        let mut converged = true;
        let mut lower = s_from;
        if s_from == 0.0 {
            // s = t^2 removes the 1/sqrt(s) singularity at the turning point
            let s1 = (0.5 * self.s_max).min(1.0);
            let r =
                quadrature::integrate(|t| 2.0 * t * self.integrand(t * t), 0.0, s1.sqrt(), qtol);
            value += r.value;
            error += r.error;
            converged &= r.converged;
            lower = s1;
        }
        if lower < self.s_max {
            let r = if self.s_max.is_finite() {
                quadrature::integrate(|s| self.integrand(s), lower, self.s_max, qtol)
            } else {
                quadrature::integrate_to_infinity(|s| self.integrand(s), lower, qtol)
            };
            value += r.value;
            error += r.error;
            converged &= r.converged;
        }
        if !converged || !value.is_finite() {
            if certified {
                return Err(Error::Quadrature {
                    estimate: value,
                    error,
                });
            }
            return Err(Error::Inconclusive(format!(
                "width quadrature for h = {} did not converge and the tail is uncertified",
                self.h
            )));
        }
        Ok((value, certified))
    }
}

/// `1 / sqrt(exp(2g) - 1)` without overflow or cancellation.
fn inv_sqrt_expm1(g: f64) -> f64 {
    if g > 20.0 {
        let e = (-g).exp();
        e / (1.0 - e * e).sqrt()
    } else if g > 0.0 {
        1.0 / (2.0 * g).exp_m1().sqrt()
    } else {
        f64::INFINITY
    }
}

/// Half-width `Lambda_h` of the catenary profile starting at height `h`.
pub fn half_width(spec: &WeightSpec, h: f64, tol: f64) -> Result<HalfWidth> {
    if !(tol > 0.0) {
        return Err(Error::InvalidWeight(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let integrand = WidthIntegrand::new(spec, h)?;
    let (value, certified) = integrand.integrate(0.0, tol)?;
    Ok(HalfWidth { value, certified })
}

/// Width still to be covered once the profile has reached height `u`.
pub fn width_remainder(spec: &WeightSpec, h: f64, u: f64, tol: f64) -> Result<f64> {
    spec.check_domain(u)?;
    let integrand = WidthIntegrand::new(spec, h)?;
    let s = integrand.sigma * (u - h);
    if s < 0.0 {
        return Err(Error::Domain { x: u, a: h });
    }
    Ok(integrand.integrate(s, tol)?.0)
}

/// Slope `|u'|` of the profile through `h` at height `lambda`, from the first
/// integral `u'^2 = exp(2 (phi(lambda) - phi(h))) - 1`.
///
/// `lambda` must lie on the side of `h` the profile moves to (above `h` for an
/// increasing weight). Overflow yields `+inf`.
pub fn first_integral_slope(spec: &WeightSpec, h: f64, lambda: f64) -> Result<f64> {
    let base = spec.eval(h)?;
    let at = spec.eval(lambda)?;
    let moving_up = base.first > 0.0;
    if (moving_up && lambda < h) || (!moving_up && lambda > h) {
        return Err(Error::Domain { x: lambda, a: h });
    }
    let delta = at.value - base.value;
    let v = (2.0 * delta).exp_m1();
    Ok(if v.is_finite() {
        v.max(0.0).sqrt()
    } else {
        f64::INFINITY
    })
}

/// `lim u'` along the profile through `h`: `sqrt(exp(2 (c - phi(h))) - 1)` for a
/// bounded range, `+inf` otherwise. Decreasing weights give the negative limit.
pub fn asymptotic_slope(spec: &WeightSpec, h: f64) -> Result<f64> {
    let base = spec.eval(h)?;
    let (_, c) = spec.range();
    let sign = if base.first > 0.0 { 1.0 } else { -1.0 };
    if c.is_finite() {
        Ok(sign * (2.0 * (c - base.value)).exp_m1().max(0.0).sqrt())
    } else {
        Ok(sign * f64::INFINITY)
    }
}

/// Integrates the catenary profile through height `h`.
pub fn integrate_profile(
    spec: &WeightSpec,
    h: f64,
    opts: &ProfileOptions,
) -> Result<ProfileSolution> {
    let base = spec.eval(h)?;
    let a = spec.domain_start();
    let height_cap = opts.height_cap.unwrap_or(1e6 * (h.abs() + 1.0));
    let edge_margin = 1e-9 * (1.0 + a.abs());

    let mut samples = vec![ProfileSample {
        x: 0.0,
        u: h,
        u_prime: 0.0,
    }];
    let mut angles = vec![0.0];
    let mut termination = None;
    let mut remainder = None;
    let mut callback_error = None;

    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        initial_step: 1e-3 / (1.0 + base.first.abs()),
        ..OdeOptions::default()
    };
    let result = ode::integrate(
        |_, y: &[f64; 3]| {
            if !spec.contains(y[1]) {
                return None;
            }
            let (sin, cos) = y[2].sin_cos();
            Some([cos, sin, spec.eval_unchecked(y[1]).first * cos])
        },
        0.0,
        [0.0, h, 0.0],
        f64::INFINITY,
        &ode_opts,
        |_, y| {
            let (x, u, theta) = (y[0], y[1], y[2]);
            samples.push(ProfileSample {
                x,
                u,
                u_prime: theta.tan(),
            });
            angles.push(theta);
            if theta.cos() < opts.vertical_cos {
                match width_remainder(spec, h, u, opts.tol) {
                    Ok(r) if r <= opts.tol => {
                        remainder = Some(r);
                        termination = Some(Termination::WidthConverged);
                        return ControlFlow::Break(());
                    }
                    Ok(_) => {}
                    Err(e) => {
                        callback_error = Some(e);
                        return ControlFlow::Break(());
                    }
                }
            }
            if x >= opts.x_cap {
                termination = Some(Termination::ReachedXCap);
                return ControlFlow::Break(());
            }
            if (u - h).abs() >= height_cap {
                termination = Some(Termination::ReachedHeightCap);
                return ControlFlow::Break(());
            }
            if a.is_finite() && u - a <= edge_margin {
                termination = Some(Termination::ReachedDomainEdge);
                return ControlFlow::Break(());
            }
            ControlFlow::Continue(())
        },
    );
    if let Some(e) = callback_error {
        return Err(e);
    }
    let termination = match (result, termination) {
        (Ok(_), Some(t)) => t,
        (Ok(_), None) => unreachable!("integration to +inf only ends through the callback"),
        // approaching a finite domain end the step size collapses
        (Err(Error::StepFailure { .. }), _)
            if a.is_finite()
                && samples
                    .last()
                    .is_some_and(|s| s.u - a < 1e-6 * (1.0 + a.abs())) =>
        {
            Termination::ReachedDomainEdge
        }
        (Err(e), _) => return Err(e),
    };

    let last = *samples.last().expect("at least the initial sample");
    let remaining = match (termination, remainder) {
        (_, Some(r)) => r,
        (Termination::ReachedDomainEdge, None) => 0.0,
        _ => width_remainder(spec, h, last.u, opts.tol)?,
    };
    Ok(ProfileSolution {
        spec: spec.clone(),
        h,
        lambda_estimate: last.x + remaining,
        slope_limit: asymptotic_slope(spec, h)?,
        termination,
        samples,
        angles,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthTrend {
    Constant,
    Decreasing,
    Increasing,
    NonIncreasing,
    NonDecreasing,
    Mixed,
    Unknown,
}

impl WidthTrend {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Decreasing => "decreasing",
            Self::Increasing => "increasing",
            Self::NonIncreasing => "nonincreasing",
            Self::NonDecreasing => "nondecreasing",
            Self::Mixed => "mixed",
            Self::Unknown => "unknown",
        }
    }

    /// Whether an observed trend is compatible with a predicted one.
    pub fn compatible_with(self, predicted: WidthTrend) -> bool {
        use WidthTrend::*;
        match predicted {
            Constant => self == Constant,
            Decreasing => matches!(self, Decreasing | NonIncreasing | Constant),
            Increasing => matches!(self, Increasing | NonDecreasing | Constant),
            _ => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub h: f64,
    #[serde(with = "crate::extended")]
    pub lambda: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthTable {
    pub rows: Vec<WidthRow>,
    /// direction implied by `phi'` being nondecreasing / nonincreasing
    pub predicted: WidthTrend,
    /// direction seen in the computed widths (ties within `tie_tol`)
    pub observed: WidthTrend,
    pub tie_tol: f64,
    /// adjacent pairs whose widths agree within `tie_tol`
    pub ties: usize,
}

pub const WIDTH_TIE_TOL: f64 = 1e-9;

/// Half-widths for a list of starting heights, sorted by height.
pub fn width_table(spec: &WeightSpec, heights: &[f64], tol: f64) -> Result<WidthTable> {
    let mut heights = heights.to_vec();
    heights.sort_by(f64::total_cmp);
    heights.dedup();
    let rows = heights
        .par_iter()
        .map(|&h| {
            half_width(spec, h, tol).map(|w| WidthRow {
                h,
                lambda: w.value,
                certified: w.certified,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let predicted = match spec.slope_trend() {
        Some(_) if spec.is_convex() && spec.reflect().is_convex() => WidthTrend::Constant,
        Some(true) => WidthTrend::Decreasing,
        Some(false) => WidthTrend::Increasing,
        None => WidthTrend::Unknown,
    };
    let tie_tol = WIDTH_TIE_TOL;
    let (mut up, mut down, mut ties) = (0, 0, 0);
    for w in rows.windows(2) {
        let d = w[1].lambda - w[0].lambda;
        if d.abs() <= tie_tol || (w[0].lambda.is_infinite() && w[1].lambda.is_infinite()) {
            ties += 1;
        } else if d > 0.0 {
            up += 1;
        } else {
            down += 1;
        }
    }
    let observed = match (up, down, ties) {
        (0, 0, _) if rows.len() < 2 => predicted,
        (0, 0, _) => WidthTrend::Constant,
        (_, 0, 0) => WidthTrend::Increasing,
        (0, _, 0) => WidthTrend::Decreasing,
        (_, 0, _) => WidthTrend::NonDecreasing,
        (0, _, _) => WidthTrend::NonIncreasing,
        _ => WidthTrend::Mixed,
    };
    Ok(WidthTable {
        rows,
        predicted,
        observed,
        tie_tol,
        ties,
    })
}
