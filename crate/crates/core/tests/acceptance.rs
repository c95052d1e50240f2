//! End-to-end acceptance suite. Runs every criterion, prints one line per
//! criterion and fails the test binary if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use phimin_core::experiments::{
    moving_plane_check, perturbed_cylinder_build, quotient_formula_check, Strip, UbarFamily,
};
use phimin_core::geometry::{first_variation, identity_residuals_inside, GraphPatch, Grid};
use phimin_core::pde::{
    make_boundary_from_profile, solve_graph_equation, uniqueness_experiment, BoundaryData,
    BoundaryPerturbation, SolveOptions,
};
use phimin_core::profile::{half_width, integrate_profile, ProfileOptions};
use phimin_core::weight::{classify_integrability, Integrability, WeightSpec};

const HALF_WIDTH_TOL: f64 = 1e-6;
const HALF_WIDTH_BUDGET: Duration = Duration::from_secs(1);
const FIRST_INTEGRAL_TOL: f64 = 1e-7;
const FIRST_INTEGRAL_BUDGET: Duration = Duration::from_secs(1);
/// samples within this fraction of the half-width count as interior heights
const INTERIOR_FRACTION: f64 = 0.95;
const SLOPE_TOL: f64 = 1e-3;
const SLOPE_MIN_X: f64 = 50.0;
const SLOPE_X_CAP: f64 = 1e4;
const ALPHAS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
const WIDTH_HEIGHTS: [f64; 3] = [1.0, 2.0, 3.0];
const WIDTH_CONSTANT_TOL: f64 = 1e-9;
const WIDTH_TOL: f64 = 1e-11;
const PDE_ERROR_TOL: f64 = 1e-3;
const MIN_ORDER: f64 = 1.8;
const PDE_BUDGET: Duration = Duration::from_secs(60);
const MESHES: [usize; 3] = [33, 65, 129];
const COORDINATE_RESIDUAL_TOL: f64 = 1e-4;
/// residuals at or below this on every mesh vanish identically (e.g. eta_2 on a
/// y-invariant patch) and are not subject to the order test
const IDENTICALLY_ZERO: f64 = 1e-12;
const QUOTIENT_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;
const UNIQUENESS_TOL: f64 = 1e-8;
const UNIQUENESS_GRID: usize = 65;
const UNIQUENESS_AMPLITUDES: [f64; 3] = [0.0, 0.05, 0.2];
const FIRST_VARIATION_TOL: f64 = 1e-4;
const FIRST_VARIATION_GRID: usize = 129;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn reaper_grid(n: usize) -> Grid {
    Grid::new([-1.2, 1.2], [-1.0, 1.0], n, n).unwrap()
}

fn reaper(x: f64) -> f64 {
    -x.cos().ln()
}

struct ReaperSolve {
    patch: GraphPatch,
    error: f64,
    elapsed: Duration,
}

fn reaper_solves() -> &'static Vec<ReaperSolve> {
    static SOLVES: OnceLock<Vec<ReaperSolve>> = OnceLock::new();
    SOLVES.get_or_init(|| {
        MESHES
            .iter()
            .map(|&n| {
                let start = Instant::now();
                let grid = reaper_grid(n);
                let data = BoundaryData::from_fn(grid, |x, _| reaper(x)).unwrap();
                let (patch, report) = solve_graph_equation(
                    &WeightSpec::identity(),
                    &data,
                    None,
                    &SolveOptions::default(),
                )
                .unwrap();
                assert!(report.converged);
                let exact = grid.sample(|x, _| reaper(x));
                ReaperSolve {
                    error: max_abs_diff(&patch.values, &exact),
                    patch,
                    elapsed: start.elapsed(),
                }
            })
            .collect()
    })
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn grim_reaper_half_width() -> Outcome {
    let start = Instant::now();
    let w = half_width(&WeightSpec::identity(), 0.0, 1e-10).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let err = (w.value - FRAC_PI_2).abs();
    check(
        err <= HALF_WIDTH_TOL && elapsed < HALF_WIDTH_BUDGET,
        format!("|Lambda_0 - pi/2| = {err:.2e}, {elapsed:?}"),
    )
}

fn first_integral_consistency() -> Outcome {
    let start = Instant::now();
    let p = integrate_profile(&WeightSpec::identity(), 0.0, &ProfileOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let limit = INTERIOR_FRACTION * FRAC_PI_2;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for s in p.samples.iter().filter(|s| s.x <= limit) {
        worst = worst.max((s.u_prime - (2.0 * s.u).exp_m1().sqrt()).abs());
        count += 1;
    }
    check(
        worst <= FIRST_INTEGRAL_TOL && count > 10 && elapsed < FIRST_INTEGRAL_BUDGET,
        format!("max |u' - sqrt(e^(2u) - 1)| = {worst:.2e} over {count} samples, {elapsed:?}"),
    )
}

fn asymptotic_slope_bounded_range() -> Outcome {
    let opts = ProfileOptions {
        x_cap: SLOPE_X_CAP,
        ..ProfileOptions::default()
    };
    let p = integrate_profile(&WeightSpec::arctan(), 0.0, &opts).map_err(|e| e.to_string())?;
    let last = p.samples.last().unwrap();
    let expected = PI.exp_m1().sqrt();
    let err = (last.u_prime - expected).abs();
    check(
        last.x >= SLOPE_MIN_X && err <= SLOPE_TOL,
        format!(
            "u'({:.0}) = {:.6}, limit {expected:.6}, error {err:.2e}",
            last.x, last.u_prime
        ),
    )
}

fn integrability_classification() -> Outcome {
    let mut got = vec![];
    let mut ok = true;
    for alpha in ALPHAS {
        let spec = WeightSpec::alpha_log(alpha).unwrap();
        let class = classify_integrability(&spec, 1.0).map_err(|e| e.to_string())?;
        let expected = if alpha > 1.0 {
            Integrability::Finite
        } else {
            Integrability::Infinite
        };
        ok &= class == expected;
        got.push(format!("{alpha}:{class:?}"));
    }
    check(ok, got.join(" "))
}

fn widths(spec: &WeightSpec) -> Result<Vec<f64>, String> {
    WIDTH_HEIGHTS
        .iter()
        .map(|&h| {
            half_width(spec, h, WIDTH_TOL)
                .map(|w| w.value)
                .map_err(|e| e.to_string())
        })
        .collect()
}

fn width_monotonicity() -> Outcome {
    let quad = widths(&WeightSpec::quadratic())?;
    let alog = widths(&WeightSpec::alpha_log(2.0).unwrap())?;
    let ident = widths(&WeightSpec::identity())?;
    let decreasing = quad.windows(2).all(|w| w[1] < w[0]);
    let increasing = alog.windows(2).all(|w| w[1] > w[0]);
    let spread = ident
        .iter()
        .fold(0.0f64, |m, w| m.max((w - ident[0]).abs()));
    check(
        decreasing && increasing && spread <= WIDTH_CONSTANT_TOL,
        format!("quadratic {quad:.6?}, alpha_log(2) {alog:.6?}, identity spread {spread:.1e}"),
    )
}

fn pde_oracle_match() -> Outcome {
    let solves = reaper_solves();
    let errors: Vec<f64> = solves.iter().map(|s| s.error).collect();
    let elapsed: Duration = solves.iter().map(|s| s.elapsed).sum();
    let orders = [order(errors[0], errors[1]), order(errors[1], errors[2])];
    check(
        errors[2] <= PDE_ERROR_TOL
            && orders.iter().all(|&o| o >= MIN_ORDER)
            && elapsed < PDE_BUDGET,
        format!("errors {}, orders {orders:.2?}, {elapsed:?}", sci(&errors)),
    )
}

fn fundamental_equation_residuals() -> Outcome {
    let spec = WeightSpec::identity();
    // every mesh is measured on the same region: two spacings of the coarsest
    // grid away from the edges
    let coarse = reaper_grid(MESHES[0]);
    let inset = [2.0 * coarse.dx(), 2.0 * coarse.dy()];
    let mut levels = vec![];
    for n in MESHES {
        let patch = GraphPatch::from_fn(reaper_grid(n), |x, _| reaper(x)).unwrap();
        let r = identity_residuals_inside(&patch, &spec, 1.0, inset).map_err(|e| e.to_string())?;
        let mut named = r.fundamental().to_vec();
        named.push(("mean_curvature", r.mean_curvature));
        levels.push(named);
    }
    let mut ok = levels[2][0].1 <= COORDINATE_RESIDUAL_TOL;
    let mut parts = vec![];
    for (idx, (name, _)) in levels[0].iter().enumerate() {
        let values: Vec<f64> = levels.iter().map(|l| l[idx].1).collect();
        if values.iter().all(|&v| v <= IDENTICALLY_ZERO) {
            parts.push(format!("{name} ~0"));
            continue;
        }
        let o = order(values[0], values[1]).min(order(values[1], values[2]));
        ok &= o >= MIN_ORDER;
        parts.push(format!("{name} {:.1e} (order {o:.2})", values[2]));
    }
    check(ok, parts.join(", "))
}

fn quotient_formula_cross_check() -> Outcome {
    let families = [
        UbarFamily::SinQuadratic { eps: 0.01 },
        UbarFamily::CosCubic { eps: 0.01 },
        UbarFamily::Wave {
            eps: 0.01,
            k: 2.0,
            phase: 0.3,
        },
    ];
    let cases = [
        (WeightSpec::identity(), 0.0),
        (WeightSpec::alpha_log(2.0).unwrap(), 1.0),
    ];
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (spec, h) in &cases {
        let profile =
            integrate_profile(spec, *h, &ProfileOptions::default()).map_err(|e| e.to_string())?;
        let lambda = profile.lambda_estimate;
        let strip = Strip {
            x_lo: 0.5 * lambda,
            x_hi: 0.95 * lambda,
            y_lo: 0.0,
            y_hi: 2.0 * PI,
        };
        for family in families {
            let pc = perturbed_cylinder_build(&profile, family, strip, 41, 41)
                .map_err(|e| e.to_string())?;
            let r = quotient_formula_check(&pc, spec).map_err(|e| e.to_string())?;
            ok &= r.denominator_ok && r.is_graph && r.max_discrepancy <= QUOTIENT_TOL;
            worst = worst.max(r.max_discrepancy);
        }
    }
    check(
        ok,
        format!("max discrepancy {worst:.2e} over 3 families x 2 weights"),
    )
}

fn reflection_symmetry() -> Outcome {
    let spec = WeightSpec::identity();
    let profile =
        integrate_profile(&spec, 0.0, &ProfileOptions::default()).map_err(|e| e.to_string())?;
    let grid = reaper_grid(65);
    let perturbation = BoundaryPerturbation {
        amplitude: 0.05,
        period: 1.0,
        length: 1.0,
    };
    let mut defects = vec![reaper_solves()[2].patch.clone()]
        .into_iter()
        .map(|p| moving_plane_check(&p, 0.0).map(|r| r.max_abs_gap))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let data = make_boundary_from_profile(&profile, grid, Some(&perturbation))
        .map_err(|e| e.to_string())?;
    let (patch, _) = solve_graph_equation(&spec, &data, None, &SolveOptions::default())
        .map_err(|e| e.to_string())?;
    defects.push(
        moving_plane_check(&patch, 0.0)
            .map_err(|e| e.to_string())?
            .max_abs_gap,
    );
    let worst = defects.iter().fold(0.0f64, |m, &d| m.max(d));
    check(
        worst <= SYMMETRY_TOL,
        format!("symmetry defects {}", sci(&defects)),
    )
}

fn uniqueness() -> Outcome {
    let r = uniqueness_experiment(
        &WeightSpec::identity(),
        0.0,
        UNIQUENESS_GRID,
        &UNIQUENESS_AMPLITUDES,
        &SolveOptions::default(),
        UNIQUENESS_TOL,
    )
    .map_err(|e| e.to_string())?;
    check(
        r.pairwise_agreement <= UNIQUENESS_TOL && r.max_abs_eta2 <= UNIQUENESS_TOL,
        format!(
            "pairwise {:.2e}, max |eta_2| {:.2e}, y-variation {:.2e}, fitted h {:.2e}",
            r.pairwise_agreement, r.max_abs_eta2, r.max_y_variation, r.fitted_h
        ),
    )
}

fn first_variation_criticality() -> Outcome {
    let solve = reaper_solves()
        .iter()
        .find(|s| s.patch.grid.nx == FIRST_VARIATION_GRID)
        .unwrap();
    let grid = solve.patch.grid;
    let bump = |cx: f64, cy: f64, r: f64| {
        grid.sample(move |x, y| {
            let q = ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
            if q < 1.0 {
                (1.0 - q).powi(3)
            } else {
                0.0
            }
        })
    };
    let speeds = [
        bump(0.0, 0.0, 0.5),
        bump(0.6, -0.3, 0.4),
        bump(-0.8, 0.5, 0.3),
    ];
    let mut values = vec![];
    for v in &speeds {
        values.push(
            first_variation(&solve.patch, &WeightSpec::identity(), v).map_err(|e| e.to_string())?,
        );
    }
    check(
        values.iter().all(|v| v.abs() <= FIRST_VARIATION_TOL),
        format!("first variations {}", sci(&values)),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("grim-reaper half-width", grim_reaper_half_width),
        ("first-integral consistency", first_integral_consistency),
        (
            "asymptotic slope, bounded range",
            asymptotic_slope_bounded_range,
        ),
        ("integrability classification", integrability_classification),
        ("width monotonicity", width_monotonicity),
        ("PDE oracle match", pde_oracle_match),
        (
            "fundamental-equation residuals",
            fundamental_equation_residuals,
        ),
        ("quotient-formula cross-check", quotient_formula_cross_check),
        ("reflection symmetry", reflection_symmetry),
        ("uniqueness experiment", uniqueness),
        ("first-variation criticality", first_variation_criticality),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("acceptance {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("acceptance {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
