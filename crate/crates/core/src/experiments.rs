//! Checks of the structural facts behind the uniqueness argument: normal
//! graphs over catenary cylinders, the closed formula for `eta_2 / eta_3`,
//! the decay estimate near the slab edge, reflection across vertical planes
//! and the maximum principle for `eta_2 / eta_3`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{interior_residual_norm, surface_fields, GraphPatch, Grid};
use crate::profile::ProfileSolution;
use crate::weight::WeightSpec;

/// Value and analytic partials of a normal-graph height `ubar(x1, x2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UbarJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

/// Built-in analytic families, written in terms of the distance `d = L - x1`
/// to the anchor `L` (the half-width, or the strip end when the width is
/// infinite).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UbarFamily {
    Zero,
    /// `eps`
    Constant {
        eps: f64,
    },
    /// `eps sin(x2) d^2`
    SinQuadratic {
        eps: f64,
    },
    /// `eps cos(x2) d^3`
    CosCubic {
        eps: f64,
    },
    /// `eps d sin(k x2 + phase)`
    Wave {
        eps: f64,
        k: f64,
        phase: f64,
    },
}

impl UbarFamily {
    pub fn eval(&self, anchor: f64, x1: f64, x2: f64) -> UbarJet {
        let d = anchor - x1;
        match *self {
            UbarFamily::Zero => UbarJet::default(),
            UbarFamily::Constant { eps } => UbarJet {
                value: eps,
                ..UbarJet::default()
            },
            UbarFamily::SinQuadratic { eps } => {
                let (s, c) = x2.sin_cos();
                UbarJet {
                    value: eps * s * d * d,
                    d1: -2.0 * eps * s * d,
                    d2: eps * c * d * d,
                    d12: -2.0 * eps * c * d,
                }
            }
            UbarFamily::CosCubic { eps } => {
                let (s, c) = x2.sin_cos();
                UbarJet {
                    value: eps * c * d * d * d,
                    d1: -3.0 * eps * c * d * d,
                    d2: -eps * s * d * d * d,
                    d12: 3.0 * eps * s * d * d,
                }
            }
            UbarFamily::Wave { eps, k, phase } => {
                let (s, c) = (k * x2 + phase).sin_cos();
                UbarJet {
                    value: eps * d * s,
                    d1: -eps * s,
                    d2: eps * k * d * c,
                    d12: -eps * k * c,
                }
            }
        }
    }

    /// Whether `ubar_{x2}` vanishes as `x1` approaches the anchor.
    pub fn decays_at_edge(&self) -> bool {
        !matches!(self, UbarFamily::Constant { .. })
    }
}

/// Rectangle `]x_lo, x_hi[ x ]y_lo, y_hi[` in the parameter plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

/// One node of a perturbed cylinder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderSample {
    pub x1: f64,
    pub x2: f64,
    pub u: f64,
    pub u_prime: f64,
    pub ubar: UbarJet,
    /// `F + ubar N_F`
    pub point: [f64; 3],
}

/// Normal graph `F + ubar N_F` over a catenary cylinder, sampled on a grid of
/// the strip.
#[derive(Clone, Debug)]
pub struct PerturbedCylinder {
    pub base_profile: ProfileSolution,
    pub ubar: UbarFamily,
    pub strip: Strip,
    pub grid: Grid,
    /// `L` in the family formulas
    pub anchor: f64,
    pub samples: Vec<CylinderSample>,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Downward unit normal of the cylinder over a profile point of slope `p`.
fn cylinder_normal(p: f64) -> [f64; 3] {
    let w = (1.0 + p * p).sqrt();
    [p / w, 0.0, -1.0 / w]
}

pub fn perturbed_cylinder_build(
    profile: &ProfileSolution,
    ubar: UbarFamily,
    strip: Strip,
    nx: usize,
    ny: usize,
) -> Result<PerturbedCylinder> {
    let extent = profile.x_end().min(profile.lambda_estimate);
    let ok = [strip.x_lo, strip.x_hi, strip.y_lo, strip.y_hi]
        .iter()
        .all(|v| v.is_finite())
        && strip.x_lo < strip.x_hi
        && strip.y_lo < strip.y_hi
        && strip.x_lo > -extent
        && strip.x_hi < extent;
    if !ok {
        return Err(Error::StripViolation(format!(
            "strip [{}, {}] x [{}, {}] must lie inside ]-{extent}, {extent}[ x R",
            strip.x_lo, strip.x_hi, strip.y_lo, strip.y_hi
        )));
    }
    let grid = Grid::new([strip.x_lo, strip.x_hi], [strip.y_lo, strip.y_hi], nx, ny)?;
    let anchor = if profile.lambda_estimate.is_finite() {
        profile.lambda_estimate
    } else {
        strip.x_hi
    };
    let columns: Vec<_> = (0..nx)
        .map(|i| profile.evaluate(grid.x(i)))
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(grid.len());
    for j in 0..ny {
        for (i, col) in columns.iter().enumerate() {
            let (x1, x2) = (grid.x(i), grid.y(j));
            let jet = ubar.eval(anchor, x1, x2);
            let n = cylinder_normal(col.u_prime);
            samples.push(CylinderSample {
                x1,
                x2,
                u: col.u,
                u_prime: col.u_prime,
                ubar: jet,
                point: [x1 + jet.value * n[0], x2, col.u + jet.value * n[2]],
            });
        }
    }
    Ok(PerturbedCylinder {
        base_profile: profile.clone(),
        ubar,
        strip,
        grid,
        anchor,
        samples,
    })
}

impl PerturbedCylinder {
    /// Tangent vectors `dF~/dx1`, `dF~/dx2` from the analytic partials.
    pub fn tangents(&self, s: &CylinderSample, spec: &WeightSpec) -> ([f64; 3], [f64; 3]) {
        let dphi = spec.eval_unchecked(s.u).first;
        let w = (1.0 + s.u_prime * s.u_prime).sqrt();
        let n = cylinder_normal(s.u_prime);
        // dN_F/dx1 = phi' E_1 = (phi' / W) dF/dx1
        let stretch = 1.0 + s.ubar.value * dphi / w;
        let t1 = [
            stretch + s.ubar.d1 * n[0],
            0.0,
            stretch * s.u_prime + s.ubar.d1 * n[2],
        ];
        let t2 = [s.ubar.d2 * n[0], 1.0, s.ubar.d2 * n[2]];
        (t1, t2)
    }

    /// Smallest `|e3 . (dF~/dx1 x dF~/dx2)|` over the grid, and whether its
    /// sign is constant (so `F~` is a graph over the `(x1, x2)` plane).
    pub fn graph_check(&self, spec: &WeightSpec) -> (f64, bool) {
        let mut min_abs = f64::INFINITY;
        let (mut pos, mut neg) = (false, false);
        for s in &self.samples {
            let (t1, t2) = self.tangents(s, spec);
            let c = cross(t1, t2)[2];
            min_abs = min_abs.min(c.abs());
            pos |= c > 0.0;
            neg |= c < 0.0;
        }
        (min_abs, min_abs > 0.0 && !(pos && neg))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub max_discrepancy: f64,
    pub max_abs_quotient: f64,
    /// smallest denominator of the closed formula on the strip
    pub min_denominator: f64,
    pub denominator_ok: bool,
    pub is_graph: bool,
    pub nodes: usize,
}

/// Denominators of the closed formula below this are outside the regime in
/// which the check is asserted.
pub const MIN_DENOMINATOR: f64 = 0.5;

/// Computes `eta_2 / eta_3` of `F~` from the cross product of its tangent
/// vectors and from the closed formula
/// `ubar_2 W (1 + ubar phi'/W) / (1 + ubar_1 u'/W + ubar phi'/W)`,
/// and reports their largest difference.
pub fn quotient_formula_check(pc: &PerturbedCylinder, spec: &WeightSpec) -> Result<QuotientReport> {
    let mut max_discrepancy: f64 = 0.0;
    let mut max_abs_quotient: f64 = 0.0;
    let mut min_denominator = f64::INFINITY;
    for s in &pc.samples {
        let dphi = spec.eval(s.u)?.first;
        let (t1, t2) = pc.tangents(s, spec);
        let n = cross(t1, t2);
        let direct = n[1] / n[2];
        let w = (1.0 + s.u_prime * s.u_prime).sqrt();
        let lift = 1.0 + s.ubar.value * dphi / w;
        let denominator = lift + s.ubar.d1 * s.u_prime / w;
        let formula = s.ubar.d2 * w * lift / denominator;
        max_discrepancy = max_discrepancy.max((direct - formula).abs());
        max_abs_quotient = max_abs_quotient.max(formula.abs());
        min_denominator = min_denominator.min(denominator);
    }
    if max_discrepancy.is_nan() {
        return Err(Error::NonFinite("quotient formula"));
    }
    Ok(QuotientReport {
        max_discrepancy,
        max_abs_quotient,
        min_denominator,
        denominator_ok: min_denominator >= MIN_DENOMINATOR,
        is_graph: pc.graph_check(spec).1,
        nodes: pc.samples.len(),
    })
}

/// Behaviour of a profile quantity as `x1` approaches the half-width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeLimit {
    /// `(Lambda - x1, value)` pairs at decreasing distances
    pub trail: Vec<[f64; 2]>,
    /// value at the smallest distance
    pub estimate: f64,
    /// the last change is below `1e-3 (1 + |estimate|)`, or every change is
    /// at most 0.9 times the previous one
    pub settled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub nodes: usize,
    pub violations: usize,
    /// smallest `bound / |ubar_{x2}|` over nodes with nonzero `ubar_{x2}`
    pub min_slack: f64,
    pub max_excess: f64,
    pub family_decays: bool,
    /// `phi' / sqrt(1 + u'^2)`; absent when the width is infinite
    pub slope_weight_limit: Option<EdgeLimit>,
    /// `(Lambda - x1) sqrt(1 + u'^2)`
    pub distance_stretch_limit: Option<EdgeLimit>,
    pub passed: bool,
}

const DECAY_TOL: f64 = 1e-12;
const EXTRA_SUP_SAMPLES: usize = 64;

const SETTLE_TOL: f64 = 1e-3;
const SETTLE_CONTRACTION: f64 = 0.9;

fn edge_limit(profile: &ProfileSolution, f: impl Fn(f64, f64, f64) -> f64) -> EdgeLimit {
    let lambda = profile.lambda_estimate;
    let mut trail = vec![];
    for k in 1..=4 {
        let target = 10f64.powi(-k);
        let nearest = profile.samples.iter().min_by(|a, b| {
            ((lambda - a.x) - target)
                .abs()
                .total_cmp(&((lambda - b.x) - target).abs())
        });
        if let Some(s) = nearest {
            let d = lambda - s.x;
            if d > 0.0 && (d - target).abs() <= 0.5 * target {
                trail.push([d, f(d, s.u, s.u_prime)]);
            }
        }
    }
    let estimate = trail.last().map_or(f64::NAN, |p| p[1]);
    // The distances shrink geometrically, so a quantity with a limit moves by
    // contracting amounts (by 10^-p for an O(d^p) approach); a divergent one
    // moves by growing amounts.
    let steps: Vec<f64> = trail
        .windows(2)
        .map(|w| (w[1][1] - w[0][1]).abs())
        .collect();
    let settled = trail.len() >= 3
        && estimate.is_finite()
        && (steps[steps.len() - 1] <= SETTLE_TOL * (1.0 + estimate.abs())
            || steps.windows(2).all(|s| s[1] <= SETTLE_CONTRACTION * s[0]));
    EdgeLimit {
        trail,
        estimate,
        settled,
    }
}

/// Checks `|ubar_{x2}(x1, x2)| <= (L - x1) sup_{s >= x1} |ubar_{x1 x2}(s, x2)|`
/// on the strip and tracks the two profile limits used alongside it.
pub fn decay_bound_check(pc: &PerturbedCylinder) -> Result<DecayReport> {
    let g = &pc.grid;
    let spec = pc.base_profile.spec();
    let anchor = pc.anchor;
    // sup over [x1, anchor] at each node: grid columns to the right plus
    // extra samples between the strip end and the anchor
    let tail: Vec<f64> = (0..=EXTRA_SUP_SAMPLES)
        .map(|k| g.x1 + (anchor - g.x1) * k as f64 / EXTRA_SUP_SAMPLES as f64)
        .collect();
    let mut violations = 0;
    let mut min_slack = f64::INFINITY;
    let mut max_excess = f64::NEG_INFINITY;
    for j in 0..g.ny {
        let x2 = g.y(j);
        let mut running = tail
            .iter()
            .map(|&s| pc.ubar.eval(anchor, s, x2).d12.abs())
            .fold(0.0f64, f64::max);
        for i in (0..g.nx).rev() {
            let s = &pc.samples[g.idx(i, j)];
            running = running.max(s.ubar.d12.abs());
            let bound = (anchor - s.x1) * running;
            let lhs = s.ubar.d2.abs();
            max_excess = max_excess.max(lhs - bound);
            if lhs > bound + DECAY_TOL {
                violations += 1;
            }
            if lhs > 0.0 {
                min_slack = min_slack.min(bound / lhs);
            }
        }
    }
    let finite_width = pc.base_profile.lambda_estimate.is_finite();
    let slope_weight_limit = finite_width.then(|| {
        edge_limit(&pc.base_profile, |_, u, p| {
            spec.eval_unchecked(u).first / (1.0 + p * p).sqrt()
        })
    });
    let distance_stretch_limit =
        finite_width.then(|| edge_limit(&pc.base_profile, |d, _, p| d * (1.0 + p * p).sqrt()));
    let limits_ok = [&slope_weight_limit, &distance_stretch_limit]
        .iter()
        .all(|l| l.as_ref().map_or(true, |l| l.settled));
    Ok(DecayReport {
        nodes: g.len(),
        violations,
        min_slack,
        max_excess,
        family_decays: pc.ubar.decays_at_edge(),
        passed: violations == 0 && limits_ok,
        slope_weight_limit,
        distance_stretch_limit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub t: f64,
    /// nodes with `x1 <= t` whose mirror image `2t - x1` lies in the patch
    pub nodes: usize,
    pub min_gap: f64,
    pub max_gap: f64,
    pub max_abs_gap: f64,
    /// `u(2t - x1) - u(x1)` on the grid, `NaN` off the overlap
    pub gaps: Vec<f64>,
}

/// Four-point Lagrange interpolation of a uniformly sampled row.
fn cubic_interpolate(row: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = row.len();
    let s = (x - x0) / h;
    let base = (s.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (s - (base + b) as f64) / (a as f64 - b as f64);
            }
        }
        acc += w * row[base + a];
    }
    acc
}

/// Compares the patch with its mirror image across the plane `x1 = t`.
///
/// The gap `u(2t - x1) - u(x1)` is evaluated on the side `x1 <= t`, i.e. the
/// reflected right part minus the left part; the mirrored heights are
/// interpolated with cubics along `x1`.
pub fn moving_plane_check(patch: &GraphPatch, t: f64) -> Result<GapReport> {
    let g = &patch.grid;
    if g.nx < 4 {
        return Err(Error::GridTooSmall { nx: g.nx, ny: g.ny });
    }
    let (dx, slack) = (g.dx(), 1e-12 * (g.x1 - g.x0));
    let mut gaps = vec![f64::NAN; g.len()];
    let mut nodes = 0;
    let (mut lo, mut hi, mut abs) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for j in 0..g.ny {
        let row = &patch.values[g.idx(0, j)..g.idx(0, j) + g.nx];
        for i in 0..g.nx {
            let x = g.x(i);
            let mirror = 2.0 * t - x;
            if x > t + slack || mirror < g.x0 - slack || mirror > g.x1 + slack {
                continue;
            }
            let gap = cubic_interpolate(row, g.x0, dx, mirror.clamp(g.x0, g.x1)) - row[i];
            gaps[g.idx(i, j)] = gap;
            nodes += 1;
            lo = lo.min(gap);
            hi = hi.max(gap);
            abs = abs.max(gap.abs());
        }
    }
    if nodes == 0 {
        return Err(Error::EmptyOverlap);
    }
    Ok(GapReport {
        t,
        nodes,
        min_gap: lo,
        max_gap: hi,
        max_abs_gap: abs,
        gaps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremumReport {
    pub residual: f64,
    pub boundary_max: f64,
    pub boundary_min: f64,
    pub interior_max: f64,
    pub interior_min: f64,
    pub boundary_sup_abs: f64,
    pub interior_sup_abs: f64,
    /// `phi'' < 0` somewhere on the patch heights
    pub hypothesis_violation: bool,
    pub tol: f64,
    pub passed: bool,
    /// `eta_2 / eta_3` on the grid
    pub quotient: Vec<f64>,
}

/// Checks that `eta_2 / eta_3` has no interior extremum beyond its boundary
/// values (up to `tol`) on a phi-minimal patch.
pub fn eta_quotient_extremum_check(
    patch: &GraphPatch,
    spec: &WeightSpec,
    tol: f64,
) -> Result<ExtremumReport> {
    let residual = interior_residual_norm(patch, spec)?;
    if !(residual <= tol) {
        return Err(Error::NotMinimal { residual, tol });
    }
    let fields = surface_fields(patch)?;
    let quotient: Vec<f64> = fields.normal.iter().map(|n| n[1] / n[2]).collect();
    let g = &patch.grid;
    let (mut bmax, mut bmin, mut imax, mut imin) = (
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
    );
    for j in 0..g.ny {
        for i in 0..g.nx {
            let q = quotient[g.idx(i, j)];
            if g.is_boundary(i, j) {
                bmax = bmax.max(q);
                bmin = bmin.min(q);
            } else {
                imax = imax.max(q);
                imin = imin.min(q);
            }
        }
    }
    let hypothesis_violation = patch
        .values
        .iter()
        .any(|&u| spec.eval_unchecked(u).second < 0.0);
    Ok(ExtremumReport {
        residual,
        boundary_max: bmax,
        boundary_min: bmin,
        interior_max: imax,
        interior_min: imin,
        boundary_sup_abs: bmax.abs().max(bmin.abs()),
        interior_sup_abs: imax.abs().max(imin.abs()),
        hypothesis_violation,
        tol,
        passed: imax <= bmax + tol && imin >= bmin - tol,
        quotient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{integrate_profile, ProfileOptions};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn grim_reaper() -> ProfileSolution {
        integrate_profile(&WeightSpec::identity(), 0.0, &ProfileOptions::default()).unwrap()
    }

    fn strip() -> Strip {
        Strip {
            x_lo: 0.6,
            x_hi: 1.5,
            y_lo: 0.0,
            y_hi: 2.0 * PI,
        }
    }

    #[test]
    fn family_partials_match_finite_differences() {
        let families = [
            UbarFamily::SinQuadratic { eps: 0.3 },
            UbarFamily::CosCubic { eps: 0.2 },
            UbarFamily::Wave {
                eps: 0.1,
                k: 2.0,
                phase: 0.4,
            },
        ];
        let h = 1e-5;
        for f in families {
            for &(x, y) in &[(0.3, 0.7), (1.1, -2.0)] {
                let j = f.eval(1.5, x, y);
                let d1 = (f.eval(1.5, x + h, y).value - f.eval(1.5, x - h, y).value) / (2.0 * h);
                let d2 = (f.eval(1.5, x, y + h).value - f.eval(1.5, x, y - h).value) / (2.0 * h);
                let d12 = (f.eval(1.5, x, y + h).d1 - f.eval(1.5, x, y - h).d1) / (2.0 * h);
                assert!(
                    (j.d1 - d1).abs() < 1e-8
                        && (j.d2 - d2).abs() < 1e-8
                        && (j.d12 - d12).abs() < 1e-8
                );
            }
        }
    }

    #[test]
    fn zero_and_constant_offsets() {
        let p = grim_reaper();
        let pc = perturbed_cylinder_build(&p, UbarFamily::Zero, strip(), 9, 7).unwrap();
        for s in &pc.samples {
            assert_eq!(s.point, [s.x1, s.x2, s.u]);
        }
        let eps = 0.01;
        let pc = perturbed_cylinder_build(&p, UbarFamily::Constant { eps }, strip(), 9, 7).unwrap();
        for s in &pc.samples {
            let n = cylinder_normal(s.u_prime);
            let offset = [s.point[0] - s.x1, s.point[1] - s.x2, s.point[2] - s.u];
            for c in 0..3 {
                assert!((offset[c] - eps * n[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn strip_outside_profile_is_rejected() {
        let p = grim_reaper();
        let wide = Strip {
            x_hi: 1.6,
            ..strip()
        };
        assert!(matches!(
            perturbed_cylinder_build(&p, UbarFamily::Zero, wide, 5, 5),
            Err(Error::StripViolation(_))
        ));
    }

    #[test]
    fn quotient_vanishes_without_x2_dependence() {
        let p = grim_reaper();
        let id = WeightSpec::identity();
        for f in [UbarFamily::Zero, UbarFamily::Constant { eps: 0.01 }] {
            let pc = perturbed_cylinder_build(&p, f, strip(), 17, 9).unwrap();
            let r = quotient_formula_check(&pc, &id).unwrap();
            assert_eq!(r.max_abs_quotient, 0.0);
            assert!(r.max_discrepancy == 0.0);
        }
    }

    #[test]
    fn quotient_routes_agree_on_grim_reaper() {
        let p = grim_reaper();
        let id = WeightSpec::identity();
        let pc =
            perturbed_cylinder_build(&p, UbarFamily::SinQuadratic { eps: 0.01 }, strip(), 33, 33)
                .unwrap();
        let r = quotient_formula_check(&pc, &id).unwrap();
        assert!(r.max_discrepancy <= 1e-12, "{r:?}");
        assert!(r.max_abs_quotient > 1e-4);
        assert!(r.denominator_ok && r.is_graph);
    }

    #[test]
    fn decay_bound_with_slack_two() {
        let p = grim_reaper();
        let pc =
            perturbed_cylinder_build(&p, UbarFamily::SinQuadratic { eps: 0.01 }, strip(), 33, 17)
                .unwrap();
        let r = decay_bound_check(&pc).unwrap();
        assert_eq!(r.violations, 0);
        assert!((r.min_slack - 2.0).abs() < 1e-9, "{}", r.min_slack);
        let stretch = r.distance_stretch_limit.unwrap();
        assert!(
            stretch.settled && (stretch.estimate - 1.0).abs() < 1e-6,
            "{stretch:?}"
        );
        let slope = r.slope_weight_limit.unwrap();
        assert!(slope.settled && slope.estimate.abs() < 2e-4, "{slope:?}");
        // cos x against the closed form along the trail
        for [d, v] in slope.trail {
            assert!((v - (FRAC_PI_2 - d).cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn edge_limits_of_a_steeper_reaper_settle() {
        // phi = 2 x3: u = -ln cos(2 x) / 2 on ]-pi/4, pi/4[, so
        // (pi/4 - x) sec 2x -> 1/2 and 2 cos 2x -> 0 (linearly, slope 4)
        let spec = WeightSpec::linear(2.0).unwrap();
        let p = integrate_profile(&spec, 0.0, &ProfileOptions::default()).unwrap();
        let lambda = p.lambda_estimate;
        let s = Strip {
            x_lo: 0.5 * lambda,
            x_hi: 0.95 * lambda,
            y_lo: 0.0,
            y_hi: 1.0,
        };
        let pc = perturbed_cylinder_build(&p, UbarFamily::CosCubic { eps: 0.01 }, s, 9, 9).unwrap();
        let r = decay_bound_check(&pc).unwrap();
        assert!(r.passed, "{r:?}");
        let stretch = r.distance_stretch_limit.unwrap();
        assert!((stretch.estimate - 0.5).abs() < 1e-6);
        let slope = r.slope_weight_limit.unwrap();
        for [d, v] in &slope.trail {
            assert!((v - 2.0 * (2.0 * (FRAC_PI_4 - d)).cos()).abs() < 1e-6);
        }
    }

    #[test]
    fn divergent_edge_limit_is_not_settled() {
        // alpha_log is concave: (L - x1) sqrt(1 + u'^2) grows without bound
        let spec = WeightSpec::alpha_log(2.0).unwrap();
        let p = integrate_profile(&spec, 1.0, &ProfileOptions::default()).unwrap();
        let lambda = p.lambda_estimate;
        let s = Strip {
            x_lo: 0.5 * lambda,
            x_hi: 0.95 * lambda,
            y_lo: 0.0,
            y_hi: 1.0,
        };
        let pc = perturbed_cylinder_build(&p, UbarFamily::CosCubic { eps: 0.01 }, s, 9, 9).unwrap();
        let r = decay_bound_check(&pc).unwrap();
        assert_eq!(r.violations, 0);
        let stretch = r.distance_stretch_limit.unwrap();
        assert!(!stretch.settled && !r.passed);
        assert!(stretch.trail.windows(2).all(|w| w[1][1] > 5.0 * w[0][1]));
    }

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let row: Vec<f64> = (0..10).map(|i| f(i as f64 * 0.1)).collect();
        for x in [0.0, 0.03, 0.47, 0.88, 0.9] {
            assert!((cubic_interpolate(&row, 0.0, 0.1, x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn moving_plane_on_even_patch_and_grim_reaper() {
        let g = Grid::new([-1.2, 1.2], [-1.0, 1.0], 49, 9).unwrap();
        let even = GraphPatch::from_fn(g, |x, y| x * x * (1.0 + y * y) + x.powi(4)).unwrap();
        let r = moving_plane_check(&even, 0.0).unwrap();
        assert!(r.max_abs_gap < 1e-12);
        let reaper = GraphPatch::from_fn(g, |x, _| -x.cos().ln()).unwrap();
        let r = moving_plane_check(&reaper, 0.3).unwrap();
        assert!(r.min_gap >= 0.0 && r.max_gap > 0.0);
        // direct evaluation at one node
        let k = g.idx(20, 4);
        let x = g.x(20);
        let expected = -(0.6 - x).cos().ln() + x.cos().ln();
        assert!((r.gaps[k] - expected).abs() < 1e-6);
        assert!(matches!(
            moving_plane_check(&reaper, -5.0),
            Err(Error::EmptyOverlap)
        ));
    }

    #[test]
    fn extremum_rejects_non_solutions() {
        let g = Grid::new([-0.5, 0.5], [-0.5, 0.5], 9, 9).unwrap();
        let p = GraphPatch::from_fn(g, |x, y| 0.5 * x * y).unwrap();
        assert!(matches!(
            eta_quotient_extremum_check(&p, &WeightSpec::identity(), 1e-6),
            Err(Error::NotMinimal { .. })
        ));
    }
}
