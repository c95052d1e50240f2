//! Height weights `phi(x3)` and the hypotheses the catenary and uniqueness
//! results are stated under.
//!
//! A [`WeightSpec`] is a strictly monotone function on `]a, +inf[` with range
//! `]b, c[`. Built-in families carry exact derivatives; tabulated weights are
//! interpolated by a natural cubic spline, which is `C^2` and extends linearly
//! (with zero curvature) beyond the last knot.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Value and first two derivatives of a weight at one height.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

impl Jet {
    fn negated(self) -> Self {
        Self {
            value: -self.value,
            first: -self.first,
            second: -self.second,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Identity,
    Linear {
        k: f64,
    },
    /// `x^2 / 2` on `]0, +inf[`.
    Quadratic,
    /// `alpha * ln(x)` on `]0, +inf[`.
    AlphaLog {
        alpha: f64,
    },
    Arctan,
    UserTable {
        points: Vec<[f64; 2]>,
    },
}

/// JSON form of a weight, e.g. `{"family":"alpha_log","alpha":2.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reflected: bool,
}

#[derive(Clone, Debug)]
pub struct WeightSpec {
    family: Family,
    reflected: bool,
    table: Option<Arc<NaturalSpline>>,
}

impl PartialEq for WeightSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.reflected == other.reflected
    }
}

impl WeightSpec {
    pub fn new(family: Family) -> Result<Self> {
        let table = match &family {
            Family::Identity | Family::Quadratic | Family::Arctan => None,
            Family::Linear { k } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::InvalidWeight(format!(
                        "linear slope must be > 0, got {k}"
                    )));
                }
                None
            }
            Family::AlphaLog { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidWeight(format!(
                        "alpha must be > 0, got {alpha}"
                    )));
                }
                None
            }
            Family::UserTable { points } => Some(Arc::new(NaturalSpline::new(points)?)),
        };
        Ok(Self {
            family,
            reflected: false,
            table,
        })
    }

    pub fn from_config(config: WeightConfig) -> Result<Self> {
        let spec = Self::new(config.family)?;
        Ok(if config.reflected {
            spec.reflect()
        } else {
            spec
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: WeightConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidWeight(format!("bad weight JSON: {e}")))?;
        Self::from_config(config)
    }

    pub fn config(&self) -> WeightConfig {
        WeightConfig {
            family: self.family.clone(),
            reflected: self.reflected,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.config()).expect("weight config serializes")
    }

    pub fn identity() -> Self {
        Self::new(Family::Identity).expect("valid")
    }

    pub fn linear(k: f64) -> Result<Self> {
        Self::new(Family::Linear { k })
    }

    pub fn quadratic() -> Self {
        Self::new(Family::Quadratic).expect("valid")
    }

    pub fn alpha_log(alpha: f64) -> Result<Self> {
        Self::new(Family::AlphaLog { alpha })
    }

    pub fn arctan() -> Self {
        Self::new(Family::Arctan).expect("valid")
    }

    pub fn user_table(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(Family::UserTable { points })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    /// The weight `-phi`, with range `]-c, -b[`.
    pub fn reflect(&self) -> Self {
        Self {
            reflected: !self.reflected,
            ..self.clone()
        }
    }

    /// Lower end `a` of the domain `]a, +inf[`.
    pub fn domain_start(&self) -> f64 {
        match &self.family {
            Family::Identity | Family::Linear { .. } | Family::Arctan => f64::NEG_INFINITY,
            Family::Quadratic | Family::AlphaLog { .. } => 0.0,
            Family::UserTable { .. } => self.spline().xs[0],
        }
    }

    /// Range endpoints `(b, c)`.
    pub fn range(&self) -> (f64, f64) {
        let (b, c) = match &self.family {
            Family::Identity | Family::Linear { .. } | Family::AlphaLog { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            Family::Quadratic => (0.0, f64::INFINITY),
            Family::Arctan => (-FRAC_PI_2, FRAC_PI_2),
            Family::UserTable { .. } => (self.spline().ys[0], f64::INFINITY),
        };
        if self.reflected {
            (-c, -b)
        } else {
            (b, c)
        }
    }

    pub fn is_increasing(&self) -> bool {
        !self.reflected
    }

    pub fn contains(&self, x3: f64) -> bool {
        x3.is_finite() && x3 > self.domain_start()
    }

    pub fn check_domain(&self, x3: f64) -> Result<()> {
        if self.contains(x3) {
            Ok(())
        } else {
            Err(Error::Domain {
                x: x3,
                a: self.domain_start(),
            })
        }
    }

    /// `(phi, phi', phi'')` at `x3`.
    pub fn eval(&self, x3: f64) -> Result<Jet> {
        self.check_domain(x3)?;
        let jet = self.eval_unchecked(x3);
        if jet.value.is_finite() && jet.first.is_finite() && jet.second.is_finite() {
            Ok(jet)
        } else {
            Err(Error::NonFinite("weight"))
        }
    }

    /// Evaluation without the domain check; callers guarantee `x3 > a`.
    pub(crate) fn eval_unchecked(&self, x: f64) -> Jet {
        let jet = match &self.family {
            Family::Identity => Jet {
                value: x,
                first: 1.0,
                second: 0.0,
            },
            Family::Linear { k } => Jet {
                value: k * x,
                first: *k,
                second: 0.0,
            },
            Family::Quadratic => Jet {
                value: 0.5 * x * x,
                first: x,
                second: 1.0,
            },
            Family::AlphaLog { alpha } => Jet {
                value: alpha * x.ln(),
                first: alpha / x,
                second: -alpha / (x * x),
            },
            Family::Arctan => {
                let q = 1.0 + x * x;
                Jet {
                    value: x.atan(),
                    first: 1.0 / q,
                    second: -2.0 * x / (q * q),
                }
            }
            Family::UserTable { .. } => self.spline().eval(x),
        };
        if self.reflected {
            jet.negated()
        } else {
            jet
        }
    }

    fn spline(&self) -> &NaturalSpline {
        self.table
            .as_deref()
            .expect("user_table weights carry a spline")
    }

    /// Exact curvature sign of the unreflected family: `(convex, concave)`.
    fn base_curvature_sign(&self) -> (bool, bool) {
        match &self.family {
            Family::Identity | Family::Linear { .. } => (true, true),
            Family::Quadratic => (true, false),
            Family::AlphaLog { .. } => (false, true),
            Family::Arctan => (false, false),
            Family::UserTable { .. } => {
                // spline curvature is piecewise linear between knot values
                let m = &self.spline().m;
                (m.iter().all(|&v| v >= 0.0), m.iter().all(|&v| v <= 0.0))
            }
        }
    }

    pub fn is_convex(&self) -> bool {
        let (convex, concave) = self.base_curvature_sign();
        if self.reflected {
            concave
        } else {
            convex
        }
    }

    /// Whether `phi'` is nondecreasing (`Some(true)`), nonincreasing
    /// (`Some(false)`), or neither on the whole domain.
    pub fn slope_trend(&self) -> Option<bool> {
        let (convex, concave) = if self.reflected {
            let (cx, cc) = self.base_curvature_sign();
            (cc, cx)
        } else {
            self.base_curvature_sign()
        };
        match (convex, concave) {
            (true, _) => Some(true),
            (false, true) => Some(false),
            (false, false) => None,
        }
    }
}

/// Natural cubic spline through strictly increasing samples.
#[derive(Debug)]
struct NaturalSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// second derivatives at the knots (zero at both ends)
    m: Vec<f64>,
}

impl NaturalSpline {
    fn new(points: &[[f64; 2]]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidWeight(
                "user_table needs at least two points".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeight(
                "user_table contains non-finite values".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1][0] > w[0][0] && w[1][1] > w[0][1]) {
                return Err(Error::InvalidWeight(
                    "user_table points must be strictly increasing in x and phi".into(),
                ));
            }
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior curvatures (Thomas algorithm)
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = xs[i + 1] - xs[i];
                let h1 = xs[i + 2] - xs[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h1 - (ys[i + 1] - ys[i]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - upper[i] * m[i + 2]) / diag[i];
            }
        }
        let spline = Self { xs, ys, m };
        for i in 0..n - 1 {
            if spline.segment_min_slope(i) <= 0.0 {
                return Err(Error::InvalidWeight(format!(
                    "interpolant of user_table is not strictly increasing on [{}, {}]",
                    spline.xs[i],
                    spline.xs[i + 1]
                )));
            }
        }
        Ok(spline)
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|probe| probe.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    fn eval_segment(&self, i: usize, x: f64) -> Jet {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = x1 - x0;
        let a = x1 - x;
        let b = x - x0;
        let c0 = y0 / h - m0 * h / 6.0;
        let c1 = y1 / h - m1 * h / 6.0;
        Jet {
            value: (m0 * a * a * a + m1 * b * b * b) / (6.0 * h) + c0 * a + c1 * b,
            first: (-m0 * a * a + m1 * b * b) / (2.0 * h) - c0 + c1,
            second: (m0 * a + m1 * b) / h,
        }
    }

    fn segment_min_slope(&self, i: usize) -> f64 {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let mut min = self
            .eval_segment(i, x0)
            .first
            .min(self.eval_segment(i, x1).first);
        if m0 != m1 {
            let t = m0 / (m0 - m1);
            if (0.0..=1.0).contains(&t) {
                min = min.min(self.eval_segment(i, x0 + t * (x1 - x0)).first);
            }
        }
        min
    }

    fn eval(&self, x: f64) -> Jet {
        let last = self.xs.len() - 1;
        if x > self.xs[last] {
            let end = self.eval_segment(last - 1, self.xs[last]);
            return Jet {
                value: end.value + end.first * (x - self.xs[last]),
                first: end.first,
                second: 0.0,
            };
        }
        self.eval_segment(self.segment(x), x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Finite,
    Infinite,
    Inconclusive,
}

/// How the tail of `int exp(-g)` was decided.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum TailVerdict {
    /// `exp(-g) >= floor > 0` on the whole tail.
    DivergentFloor {
        floor: f64,
    },
    /// `lambda * g'(lambda) <= 1` on the sampled tail, so `exp(-g)` decays no
    /// faster than `1 / lambda`.
    DivergentRate,
    /// `int_cutoff^inf exp(-g) <= bound`.
    Convergent {
        cutoff: f64,
        bound: f64,
    },
    Unknown,
}

const RATE_EPS: f64 = 1e-9;
const TAIL_DOUBLINGS: usize = 40;
// a log-rate divergence witness must hold over at least this many doublings
const WITNESS_SPAN: usize = 20;

/// Decides whether `int_start^inf exp(-g)` is finite for a function `g`
/// supplied with its first two derivatives.
///
/// `sup_value`, when known and finite, is an upper bound of `g` on the tail and
/// immediately yields a divergence witness. Otherwise `g` is sampled on the
/// geometric sequence `T_k = T_0 2^k` up to `T_0 2^40`.
pub(crate) fn tail_verdict(
    g: &dyn Fn(f64) -> Jet,
    start: f64,
    sup_value: Option<f64>,
) -> TailVerdict {
    if let Some(sup) = sup_value.filter(|s| s.is_finite()) {
        return TailVerdict::DivergentFloor {
            floor: (-sup).exp(),
        };
    }
    let t0 = start.max(0.0) + 1.0;
    let samples: Vec<(f64, Jet)> = (0..=TAIL_DOUBLINGS)
        .map(|k| {
            let t = t0 * 2f64.powi(k as i32);
            (t, g(t))
        })
        .collect();
    if samples
        .iter()
        .any(|(_, j)| !(j.value.is_finite() || j.value == f64::INFINITY) || j.first.is_nan())
    {
        return TailVerdict::Unknown;
    }
    let rates: Vec<f64> = samples.iter().map(|(t, j)| t * j.first).collect();

    // smallest index from which every sampled rate stays <= 1
    let witness_from = (0..rates.len())
        .rev()
        .take_while(|&k| rates[k] <= 1.0 + RATE_EPS)
        .last();
    if let Some(k) = witness_from {
        if rates.len() - k > WITNESS_SPAN {
            return TailVerdict::DivergentRate;
        }
    }

    let mut best: Option<(f64, f64)> = None;
    for k in 0..samples.len() {
        let (t, jet) = samples[k];
        let decay = (-jet.value).exp();
        let mut bounds = Vec::with_capacity(2);
        let slope_nondecreasing = samples[k..]
            .windows(2)
            .all(|w| w[1].1.first >= w[0].1.first * (1.0 - 1e-12));
        if slope_nondecreasing && jet.first > 0.0 {
            bounds.push(decay / jet.first);
        }
        let p = rates[k..].iter().copied().fold(f64::INFINITY, f64::min);
        if p > 1.0 + RATE_EPS {
            bounds.push(decay * t / (p - 1.0));
        }
        if let Some(bound) = bounds.into_iter().reduce(f64::min) {
            if best.map_or(true, |(_, b)| bound < b) {
                best = Some((t, bound));
            }
            if bound <= 1e-14 {
                break;
            }
        }
    }
    match best {
        Some((cutoff, bound)) => TailVerdict::Convergent { cutoff, bound },
        None => TailVerdict::Unknown,
    }
}

fn tail_for_weight(spec: &WeightSpec, h: f64) -> Result<TailVerdict> {
    let start_jet = spec.eval(h)?;
    let sup = if spec.is_increasing() {
        Some(spec.range().1)
    } else {
        Some(start_jet.value)
    };
    let g = |x: f64| spec.eval_unchecked(x);
    Ok(tail_verdict(&g, h, sup))
}

/// Classifies `int_h^inf exp(-phi)` as finite, infinite or inconclusive.
pub fn classify_integrability(spec: &WeightSpec, h: f64) -> Result<Integrability> {
    Ok(match tail_for_weight(spec, h)? {
        TailVerdict::DivergentFloor { .. } | TailVerdict::DivergentRate => Integrability::Infinite,
        TailVerdict::Convergent { .. } => Integrability::Finite,
        TailVerdict::Unknown => Integrability::Inconclusive,
    })
}

/// A certified value of `int_h^inf exp(-phi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailIntegral {
    pub value: f64,
    /// quadrature error estimate on `[h, cutoff]` plus the certified tail bound
    pub error_bound: f64,
    pub cutoff: f64,
}

/// Evaluates `int_h^inf exp(-phi)` when it can be certified finite.
pub fn integrate_exp_neg_phi(spec: &WeightSpec, h: f64) -> Result<TailIntegral> {
    match tail_for_weight(spec, h)? {
        TailVerdict::Convergent { cutoff, bound } => {
            let f = |x: f64| (-spec.eval_unchecked(x).value).exp();
            // split [h, cutoff] geometrically so each piece is well scaled
            let mut value = 0.0;
            let mut error = 0.0;
            let mut lo = h;
            let mut hi = h.max(0.0) + 1.0;
            while lo < cutoff {
                let top = hi.min(cutoff);
                let r = quadrature::integrate(f, lo, top, Tolerance::default());
                value += r.value;
                error += r.error;
                lo = top;
                hi *= 2.0;
            }
            Ok(TailIntegral {
                value,
                error_bound: error + bound,
                cutoff,
            })
        }
        TailVerdict::DivergentFloor { .. } | TailVerdict::DivergentRate => Err(
            Error::Inconclusive(format!("exp(-phi) is not integrable on ]{h}, +inf[")),
        ),
        TailVerdict::Unknown => Err(Error::Inconclusive(format!(
            "no tail certificate for exp(-phi) on ]{h}, +inf["
        ))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub increasing: bool,
    pub convex: bool,
    /// sampled supremum of `phi'' / phi'` over `quotient_interval`
    #[serde(with = "crate::extended")]
    pub quotient_bound: f64,
    pub quotient_interval: [f64; 2],
    pub integrable_exp_neg_phi: Integrability,
    /// height `h` used for the integrability test
    pub integrability_height: f64,
    pub range_finite_top: bool,
}

impl HypothesisReport {
    /// Conditions under which the profile solutions are unique: strictly increasing convex weight
    /// with `exp(-phi)` integrable and bounded `phi''/phi'`.
    pub fn uniqueness_hypotheses_hold(&self) -> bool {
        self.increasing
            && self.convex
            && self.integrable_exp_neg_phi == Integrability::Finite
            && self.quotient_bound.is_finite()
    }
}

const QUOTIENT_SAMPLES: usize = 4001;

/// Default sampling window for the `phi''/phi'` bound: `[a + 0.01, a + 100]`
/// for a finite domain end, `[-100, 100]` otherwise.
pub fn default_quotient_interval(spec: &WeightSpec) -> [f64; 2] {
    let a = spec.domain_start();
    if a.is_finite() {
        [a + 0.01, a + 100.0]
    } else {
        [-100.0, 100.0]
    }
}

pub fn check_hypotheses(spec: &WeightSpec) -> HypothesisReport {
    check_hypotheses_on(spec, default_quotient_interval(spec))
}

pub fn check_hypotheses_on(spec: &WeightSpec, interval: [f64; 2]) -> HypothesisReport {
    let [lo, hi] = interval;
    let lo = if spec.contains(lo) {
        lo
    } else {
        default_quotient_interval(spec)[0]
    };
    let hi = hi.max(lo);
    let mut quotient_bound = f64::NEG_INFINITY;
    for k in 0..QUOTIENT_SAMPLES {
        let x = lo + (hi - lo) * k as f64 / (QUOTIENT_SAMPLES - 1) as f64;
        match spec.eval(x) {
            Ok(j) if j.first != 0.0 => {
                let q = j.second / j.first;
                quotient_bound = if q.is_finite() {
                    quotient_bound.max(q)
                } else {
                    f64::INFINITY
                };
            }
            _ => quotient_bound = f64::INFINITY,
        }
    }
    let a = spec.domain_start();
    let h = if a.is_finite() { a + 1.0 } else { 0.0 };
    let integrable = classify_integrability(spec, h).unwrap_or(Integrability::Inconclusive);
    HypothesisReport {
        increasing: spec.is_increasing(),
        convex: spec.is_convex(),
        quotient_bound,
        quotient_interval: [lo, hi],
        integrable_exp_neg_phi: integrable,
        integrability_height: h,
        range_finite_top: spec.range().1.is_finite(),
    }
}
