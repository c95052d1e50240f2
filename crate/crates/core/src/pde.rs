//! Dirichlet problem for the phi-minimal graph equation
//!
//! ```text
//! (1 + u_x^2) u_yy + (1 + u_y^2) u_xx - 2 u_x u_y u_xy = phi'(u) (1 + |Du|^2)
//! ```
//!
//! on a rectangle, discretized with centred differences and solved by damped
//! Newton iteration with the exact Jacobian of the discrete residual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::geometry::{surface_fields, GraphPatch, Grid};
use crate::profile::{integrate_profile, ProfileOptions, ProfileSolution};
use crate::weight::{check_hypotheses, WeightSpec};

/// Dirichlet heights on the four edges of a grid. `south`/`north` run along
/// `x` at `y = y0`/`y1`; `west`/`east` run along `y` at `x = x0`/`x1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub grid: Grid,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
    pub west: Vec<f64>,
    pub east: Vec<f64>,
}

impl BoundaryData {
    /// Traces of `f(x, y)` on the grid boundary.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        grid.validate()?;
        let data = Self {
            grid,
            south: (0..grid.nx).map(|i| f(grid.x(i), grid.y0)).collect(),
            north: (0..grid.nx).map(|i| f(grid.x(i), grid.y1)).collect(),
            west: (0..grid.ny).map(|j| f(grid.x0, grid.y(j))).collect(),
            east: (0..grid.ny).map(|j| f(grid.x1, grid.y(j))).collect(),
        };
        data.validate()?;
        Ok(data)
    }

    /// The same heights `line[i]` on every grid row.
    pub fn y_invariant(grid: Grid, line: &[f64]) -> Result<Self> {
        grid.validate()?;
        if line.len() != grid.nx {
            return Err(Error::ShapeMismatch {
                expected: grid.nx,
                got: line.len(),
            });
        }
        let data = Self {
            grid,
            south: line.to_vec(),
            north: line.to_vec(),
            west: vec![line[0]; grid.ny],
            east: vec![line[grid.nx - 1]; grid.ny],
        };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        for (len, want) in [
            (self.south.len(), g.nx),
            (self.north.len(), g.nx),
            (self.west.len(), g.ny),
            (self.east.len(), g.ny),
        ] {
            if len != want {
                return Err(Error::ShapeMismatch {
                    expected: want,
                    got: len,
                });
            }
        }
        let corners = [
            (self.south[0], self.west[0]),
            (self.south[g.nx - 1], self.east[0]),
            (self.north[0], self.west[g.ny - 1]),
            (self.north[g.nx - 1], self.east[g.ny - 1]),
        ];
        if corners.iter().any(|(a, b)| a != b) {
            return Err(Error::InvalidGrid(
                "boundary traces disagree at a corner".into(),
            ));
        }
        let all = self
            .south
            .iter()
            .chain(&self.north)
            .chain(&self.west)
            .chain(&self.east);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary data"));
        }
        Ok(())
    }

    fn check_domain(&self, spec: &WeightSpec) -> Result<()> {
        let all = self
            .south
            .iter()
            .chain(&self.north)
            .chain(&self.west)
            .chain(&self.east);
        for &v in all {
            spec.check_domain(v)?;
        }
        Ok(())
    }

    /// Writes the boundary heights into a full grid-shaped field.
    pub fn apply(&self, values: &mut [f64]) {
        let g = &self.grid;
        for i in 0..g.nx {
            values[g.idx(i, 0)] = self.south[i];
            values[g.idx(i, g.ny - 1)] = self.north[i];
        }
        for j in 0..g.ny {
            values[g.idx(0, j)] = self.west[j];
            values[g.idx(g.nx - 1, j)] = self.east[j];
        }
    }

    /// Transfinite (Coons) blend of the four edge traces.
    pub fn blend(&self) -> Vec<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut out = vec![0.0; g.len()];
        for j in 0..ny {
            let t = j as f64 / (ny - 1) as f64;
            for i in 0..nx {
                let s = i as f64 / (nx - 1) as f64;
                let edges = (1.0 - s) * self.west[j]
                    + s * self.east[j]
                    + (1.0 - t) * self.south[i]
                    + t * self.north[i];
                let corners = (1.0 - s) * (1.0 - t) * self.south[0]
                    + s * (1.0 - t) * self.south[nx - 1]
                    + (1.0 - s) * t * self.north[0]
                    + s * t * self.north[nx - 1];
                out[g.idx(i, j)] = edges - corners;
            }
        }
        self.apply(&mut out);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// max-norm of the discrete residual at convergence
    pub tol: f64,
    pub max_iterations: usize,
    pub damping_floor: f64,
    /// sufficient-decrease constant of the backtracking line search
    pub armijo: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 60,
            damping_floor: 2f64.powi(-20),
            armijo: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// accepted step length of every Newton iteration
    pub damping_history: Vec<f64>,
    /// max-norm residual before the first and after every iteration
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub tol: f64,
}

/// Residual of the discrete equation at interior nodes (boundary entries 0).
fn discrete_residual(grid: &Grid, spec: &WeightSpec, u: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (dx, dy) = (grid.dx(), grid.dy());
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = grid.coords(k);
            if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
                return 0.0;
            }
            let c = Stencil::at(u, k, nx, dx, dy);
            let dphi = spec.eval_unchecked(u[k]).first;
            c.operator() - dphi * (1.0 + c.p * c.p + c.q * c.q)
        })
        .collect()
}

struct Stencil {
    p: f64,
    q: f64,
    r: f64,
    s: f64,
    t: f64,
}

impl Stencil {
    fn at(u: &[f64], k: usize, nx: usize, dx: f64, dy: f64) -> Self {
        Self {
            p: (u[k + 1] - u[k - 1]) / (2.0 * dx),
            q: (u[k + nx] - u[k - nx]) / (2.0 * dy),
            r: (u[k + 1] - 2.0 * u[k] + u[k - 1]) / (dx * dx),
            t: (u[k + nx] - 2.0 * u[k] + u[k - nx]) / (dy * dy),
            s: (u[k + nx + 1] - u[k + nx - 1] - u[k - nx + 1] + u[k - nx - 1]) / (4.0 * dx * dy),
        }
    }

    fn operator(&self) -> f64 {
        (1.0 + self.p * self.p) * self.t + (1.0 + self.q * self.q) * self.r
            - 2.0 * self.p * self.q * self.s
    }
}

fn interior_norms(grid: &Grid, r: &[f64]) -> (f64, f64) {
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let v = r[grid.idx(i, j)];
            max = if v.is_nan() || max.is_nan() {
                f64::NAN
            } else {
                max.max(v.abs())
            };
            sum += v * v;
        }
    }
    (max, sum.sqrt())
}

/// Jacobian of the discrete residual with respect to the interior unknowns,
/// numbered `(j - 1) (nx - 2) + (i - 1)`.
fn jacobian(grid: &Grid, spec: &WeightSpec, u: &[f64]) -> BandMatrix {
    let (nx, ny) = (grid.nx, grid.ny);
    let m = nx - 2;
    let n = m * (ny - 2);
    let (dx, dy) = (grid.dx(), grid.dy());
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|row| {
            let (ii, jj) = (row % m, row / m);
            let (i, j) = (ii + 1, jj + 1);
            let k = grid.idx(i, j);
            let c = Stencil::at(u, k, nx, dx, dy);
            let jet = spec.eval_unchecked(u[k]);
            let (p, q) = (c.p, c.q);
            let d_p = 2.0 * p * c.t - 2.0 * q * c.s - 2.0 * jet.first * p;
            let d_q = 2.0 * q * c.r - 2.0 * p * c.s - 2.0 * jet.first * q;
            let d_r = 1.0 + q * q;
            let d_t = 1.0 + p * p;
            let d_s = -2.0 * p * q;
            let (hx2, hy2, hxy) = (dx * dx, dy * dy, 4.0 * dx * dy);
            let center = -2.0 * d_r / hx2 - 2.0 * d_t / hy2 - jet.second * (1.0 + p * p + q * q);
            let entries = [
                (0isize, 0isize, center),
                (1, 0, d_p / (2.0 * dx) + d_r / hx2),
                (-1, 0, -d_p / (2.0 * dx) + d_r / hx2),
                (0, 1, d_q / (2.0 * dy) + d_t / hy2),
                (0, -1, -d_q / (2.0 * dy) + d_t / hy2),
                (1, 1, d_s / hxy),
                (-1, 1, -d_s / hxy),
                (1, -1, -d_s / hxy),
                (-1, -1, d_s / hxy),
            ];
            entries
                .iter()
                .filter_map(|&(di, dj, v)| {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    let interior =
                        ni >= 1 && nj >= 1 && ni <= m as isize && nj <= (ny - 2) as isize;
                    interior.then(|| ((nj as usize - 1) * m + ni as usize - 1, v))
                })
                .collect()
        })
        .collect();
    let mut jac = BandMatrix::zeros(n, m + 1, m + 1);
    for (row, entries) in rows.into_iter().enumerate() {
        for (col, v) in entries {
            jac.add(row, col, v);
        }
    }
    jac
}

/// Solves the Dirichlet problem on `boundary.grid`.
///
/// `init` supplies starting heights on the full grid (its boundary entries are
/// overwritten); `None` uses the blend of the boundary traces. On failure to
/// converge the best iterate and its report travel inside
/// [`Error::NoConvergence`].
pub fn solve_graph_equation(
    spec: &WeightSpec,
    boundary: &BoundaryData,
    init: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(GraphPatch, SolveReport)> {
    let grid = boundary.grid;
    grid.validate()?;
    boundary.validate()?;
    boundary.check_domain(spec)?;
    let mut u = match init {
        Some(v) => {
            grid.same_shape(v)?;
            v.to_vec()
        }
        None => boundary.blend(),
    };
    boundary.apply(&mut u);
    for &v in &u {
        spec.check_domain(v)?;
    }

    let mut residual = discrete_residual(&grid, spec, &u);
    let (mut rmax, mut r2) = interior_norms(&grid, &residual);
    let mut report = SolveReport {
        iterations: 0,
        final_residual_norm: rmax,
        damping_history: vec![],
        residual_history: vec![rmax],
        converged: rmax <= opts.tol,
        tol: opts.tol,
    };
    let m = grid.nx - 2;
    let unknown = |row: usize| grid.idx(row % m + 1, row / m + 1);

    while !report.converged && report.iterations < opts.max_iterations {
        let lu = jacobian(&grid, spec, &u).factorize()?;
        let mut step: Vec<f64> = (0..m * (grid.ny - 2))
            .map(|row| -residual[unknown(row)])
            .collect();
        lu.solve(&mut step);

        let mut alpha = 1.0;
        let mut accepted = None;
        let mut left_domain = false;
        loop {
            let mut trial = u.clone();
            for (row, d) in step.iter().enumerate() {
                trial[unknown(row)] += alpha * d;
            }
            if trial.iter().all(|&v| spec.contains(v)) {
                let r = discrete_residual(&grid, spec, &trial);
                let (tmax, t2) = interior_norms(&grid, &r);
                let at_floor = alpha <= opts.damping_floor;
                if t2 <= (1.0 - opts.armijo * alpha) * r2 || (at_floor && t2 < r2) {
                    accepted = Some((trial, r, tmax, t2));
                    break;
                }
            } else {
                left_domain = true;
            }
            if alpha <= opts.damping_floor {
                break;
            }
            alpha = (alpha * 0.5).max(opts.damping_floor);
        }
        let Some((trial, r, tmax, t2)) = accepted else {
            if left_domain {
                return Err(Error::DomainViolation);
            }
            break;
        };
        u = trial;
        residual = r;
        rmax = tmax;
        r2 = t2;
        report.iterations += 1;
        report.damping_history.push(alpha);
        report.residual_history.push(rmax);
        report.final_residual_norm = rmax;
        report.converged = rmax <= opts.tol;
    }

    let patch = GraphPatch { grid, values: u };
    if report.converged {
        Ok((patch, report))
    } else {
        Err(Error::NoConvergence(Box::new((patch, report))))
    }
}

/// Default slab margin, as a fraction of the half-width.
pub const SLAB_MARGIN: f64 = 0.05;

/// Scalar perturbation `eps cos(pi x2 / M) (1 - (x1 / L)^2)` added to
/// boundary traces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPerturbation {
    pub amplitude: f64,
    pub period: f64,
    pub length: f64,
}

impl BoundaryPerturbation {
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let r = x1 / self.length;
        self.amplitude * (std::f64::consts::PI * x2 / self.period).cos() * (1.0 - r * r)
    }
}

/// Largest `|x1|` admitted on a grid carrying data from `profile`.
pub fn slab_limit(profile: &ProfileSolution) -> f64 {
    if profile.lambda_estimate.is_finite() {
        (1.0 - SLAB_MARGIN) * profile.lambda_estimate
    } else {
        profile.x_end()
    }
}

/// Default half-extent in `x1` of experiment domains: `0.75 L` for a finite
/// half-width `L`. Infinite widths have no natural scale, so `L` is replaced
/// by the first `x` where `|u'|` reaches `min(1, slope_limit / 2)`; the whole
/// computed extent would give patches hundreds of units wide whose rounding
/// floor (`eps |u| / dy^2`) exceeds solver tolerances.
pub fn default_half_extent(profile: &ProfileSolution) -> f64 {
    if profile.lambda_estimate.is_finite() {
        return 0.75 * profile.lambda_estimate;
    }
    let target = (0.5 * profile.slope_limit.abs()).min(1.0);
    let scale = profile
        .samples
        .iter()
        .find(|s| target > 0.0 && s.u_prime.abs() >= target)
        .map_or(profile.x_end(), |s| s.x);
    0.75 * scale.min(profile.x_end())
}

/// Dirichlet data from the (mirrored) profile, `u(x1) + perturbation(x1, x2)`.
pub fn make_boundary_from_profile(
    profile: &ProfileSolution,
    grid: Grid,
    perturbation: Option<&BoundaryPerturbation>,
) -> Result<BoundaryData> {
    grid.validate()?;
    let limit = slab_limit(profile);
    for x in [grid.x0, grid.x1] {
        if !(x.abs() <= limit) {
            return Err(Error::SlabViolation { x, limit });
        }
    }
    let heights: Vec<f64> = (0..grid.nx)
        .map(|i| profile.evaluate(grid.x(i)).map(|s| s.u))
        .collect::<Result<_>>()?;
    let bump = |i: usize, y: f64| perturbation.map_or(0.0, |p| p.eval(grid.x(i), y));
    let data = BoundaryData {
        grid,
        south: (0..grid.nx)
            .map(|i| heights[i] + bump(i, grid.y0))
            .collect(),
        north: (0..grid.nx)
            .map(|i| heights[i] + bump(i, grid.y1))
            .collect(),
        west: (0..grid.ny)
            .map(|j| heights[0] + bump(0, grid.y(j)))
            .collect(),
        east: (0..grid.ny)
            .map(|j| heights[grid.nx - 1] + bump(grid.nx - 1, grid.y(j)))
            .collect(),
    };
    data.validate()?;
    data.check_domain(profile.spec())?;
    Ok(data)
}

/// Discrete one-dimensional profile: solves `u'' = phi'(u) (1 + u'^2)` with
/// the same centred stencils as the surface solver, on the nodes of `grid`
/// along `x`, with end values `left` and `right`.
///
/// Extending the result in `y` gives an exact solution of the discrete
/// surface equation, which isolates solver behaviour from discretization
/// error in y-invariance tests.
pub fn solve_discrete_profile(
    spec: &WeightSpec,
    grid: &Grid,
    left: f64,
    right: f64,
    opts: &SolveOptions,
) -> Result<Vec<f64>> {
    let nx = grid.nx;
    let dx = grid.dx();
    let mut line: Vec<f64> = (0..nx)
        .map(|i| {
            let s = i as f64 / (nx - 1) as f64;
            (1.0 - s) * left + s * right
        })
        .collect();
    let mut rmax = f64::INFINITY;
    for _ in 0..=opts.max_iterations {
        let mut jac = BandMatrix::zeros(nx - 2, 1, 1);
        let mut step = vec![0.0; nx - 2];
        rmax = 0.0;
        for i in 1..nx - 1 {
            let p = (line[i + 1] - line[i - 1]) / (2.0 * dx);
            let r = (line[i + 1] - 2.0 * line[i] + line[i - 1]) / (dx * dx);
            let jet = spec.eval(line[i])?;
            let res = r - jet.first * (1.0 + p * p);
            rmax = rmax.max(res.abs());
            step[i - 1] = -res;
            let d_p = -2.0 * jet.first * p;
            jac.add(i - 1, i - 1, -2.0 / (dx * dx) - jet.second * (1.0 + p * p));
            if i > 1 {
                jac.add(i - 1, i - 2, 1.0 / (dx * dx) - d_p / (2.0 * dx));
            }
            if i < nx - 2 {
                jac.add(i - 1, i, 1.0 / (dx * dx) + d_p / (2.0 * dx));
            }
        }
        if rmax <= opts.tol {
            return Ok(line);
        }
        jac.factorize()?.solve(&mut step);
        for i in 1..nx - 1 {
            line[i] += step[i - 1];
        }
    }
    Err(Error::Inconclusive(format!(
        "discrete profile did not converge (residual {rmax:e})"
    )))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRun {
    pub amplitude: f64,
    pub iterations: usize,
    pub final_residual_norm: f64,
    /// max over columns of `max_y u - min_y u`
    pub y_variation: f64,
    pub max_abs_eta2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub h: f64,
    pub domain: [f64; 4],
    pub grid: usize,
    pub runs: Vec<UniquenessRun>,
    pub max_y_variation: f64,
    pub max_abs_eta2: f64,
    /// max over pairs of runs of the max-norm difference of the solutions
    pub pairwise_agreement: f64,
    /// least-squares height of the catenary cylinder closest to the
    /// y-averaged columns
    pub fitted_h: f64,
    pub hypotheses_hold: bool,
    pub threshold: f64,
    pub passed: bool,
    pub solver_tol: f64,
}

/// Interior initial bump `sin(pi s) sin(pi t)` in normalized coordinates.
fn interior_bump(grid: &Grid, amplitude: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    let (nx, ny) = (grid.nx, grid.ny);
    (0..grid.len())
        .map(|k| {
            let (i, j) = grid.coords(k);
            let s = i as f64 / (nx - 1) as f64;
            let t = j as f64 / (ny - 1) as f64;
            amplitude * (PI * s).sin() * (PI * t).sin()
        })
        .collect()
}

/// Solves with y-invariant catenary data from several perturbed initial
/// iterates and measures how far the results are from one y-invariant
/// solution.
///
/// The domain is `[-d, d] x [-1, 1]` with `d` from [`default_half_extent`].
pub fn uniqueness_experiment(
    spec: &WeightSpec,
    h: f64,
    n: usize,
    amplitudes: &[f64],
    opts: &SolveOptions,
    threshold: f64,
) -> Result<UniquenessReport> {
    let profile = integrate_profile(spec, h, &ProfileOptions::default())?;
    let half = default_half_extent(&profile);
    let grid = Grid::new([-half, half], [-1.0, 1.0], n, n)?;
    let edge = profile.evaluate(half)?.u;
    let line = solve_discrete_profile(spec, &grid, edge, edge, opts)?;
    let boundary = BoundaryData::y_invariant(grid, &line)?;
    let base = boundary.blend();

    let mut runs = vec![];
    let mut solutions: Vec<Vec<f64>> = vec![];
    for &amplitude in amplitudes {
        let bump = interior_bump(&grid, amplitude);
        let init: Vec<f64> = base.iter().zip(&bump).map(|(b, d)| b + d).collect();
        let (patch, report) = solve_graph_equation(spec, &boundary, Some(&init), opts)?;
        let mut y_variation: f64 = 0.0;
        for i in 0..grid.nx {
            let column = (0..grid.ny).map(|j| patch.at(i, j));
            let (lo, hi) = column.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            y_variation = y_variation.max(hi - lo);
        }
        let fields = surface_fields(&patch)?;
        let max_abs_eta2 = fields.normal.iter().fold(0.0f64, |m, n| m.max(n[1].abs()));
        runs.push(UniquenessRun {
            amplitude,
            iterations: report.iterations,
            final_residual_norm: report.final_residual_norm,
            y_variation,
            max_abs_eta2,
        });
        solutions.push(patch.values);
    }

    let mut pairwise_agreement: f64 = 0.0;
    for a in 0..solutions.len() {
        for b in a + 1..solutions.len() {
            let d = solutions[a]
                .iter()
                .zip(&solutions[b])
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            pairwise_agreement = pairwise_agreement.max(d);
        }
    }
    let max_y_variation = runs.iter().fold(0.0f64, |m, r| m.max(r.y_variation));
    let max_abs_eta2 = runs.iter().fold(0.0f64, |m, r| m.max(r.max_abs_eta2));
    let fitted_h = match solutions.first() {
        Some(u) => fit_height(spec, h, &grid, u),
        None => f64::NAN,
    };
    Ok(UniquenessReport {
        h,
        domain: [grid.x0, grid.x1, grid.y0, grid.y1],
        grid: n,
        passed: max_y_variation <= threshold
            && max_abs_eta2 <= threshold
            && pairwise_agreement <= threshold,
        runs,
        max_y_variation,
        max_abs_eta2,
        pairwise_agreement,
        fitted_h,
        hypotheses_hold: check_hypotheses(spec).uniqueness_hypotheses_hold(),
        threshold,
        solver_tol: opts.tol,
    })
}

/// Golden-section least-squares fit of the profile height to the y-averaged
/// columns of `u`.
fn fit_height(spec: &WeightSpec, h: f64, grid: &Grid, u: &[f64]) -> f64 {
    let columns: Vec<(f64, f64)> = (0..grid.nx)
        .map(|i| {
            let mean = (0..grid.ny).map(|j| u[grid.idx(i, j)]).sum::<f64>() / grid.ny as f64;
            (grid.x(i), mean)
        })
        .collect();
    let misfit = |c: f64| -> f64 {
        let Ok(p) = integrate_profile(spec, c, &ProfileOptions::default()) else {
            return f64::INFINITY;
        };
        let mut total = 0.0;
        for &(x, mean) in &columns {
            match p.evaluate(x) {
                Ok(s) => total += (s.u - mean).powi(2),
                Err(_) => return f64::INFINITY,
            }
        }
        total
    };
    let width = 0.25 * (1.0 + h.abs());
    let mut lo = h - width;
    if !spec.contains(lo) {
        lo = 0.5 * (h + spec.domain_start());
    }
    let mut hi = h + width;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (misfit(a), misfit(b));
    for _ in 0..60 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = misfit(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = misfit(b);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grim_reaper_data(n: usize) -> BoundaryData {
        let g = Grid::new([-1.2, 1.2], [-1.0, 1.0], n, n).unwrap();
        BoundaryData::from_fn(g, |x, _| -x.cos().ln()).unwrap()
    }

    #[test]
    fn corner_mismatch_is_rejected() {
        let mut d = grim_reaper_data(5);
        d.west[0] += 1.0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn blend_reproduces_bilinear_functions() {
        let g = Grid::new([0.0, 1.0], [0.0, 2.0], 6, 7).unwrap();
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - y + 0.5 * x * y;
        let d = BoundaryData::from_fn(g, f).unwrap();
        for (v, e) in d.blend().iter().zip(g.sample(f)) {
            assert!((v - e).abs() < 1e-13);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = Grid::new([0.0, 1.0], [0.0, 1.0], 6, 5).unwrap();
        let spec = WeightSpec::quadratic();
        let u = g.sample(|x, y| 1.0 + 0.3 * x * x + 0.2 * x * y + 0.1 * (3.0 * y).sin());
        let jac = jacobian(&g, &spec, &u);
        let m = g.nx - 2;
        let n = m * (g.ny - 2);
        let h = 1e-6;
        for col in 0..n {
            let k = g.idx(col % m + 1, col / m + 1);
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[k] += h;
            dn[k] -= h;
            let (ru, rd) = (
                discrete_residual(&g, &spec, &up),
                discrete_residual(&g, &spec, &dn),
            );
            for row in 0..n {
                let kr = g.idx(row % m + 1, row / m + 1);
                let fd = (ru[kr] - rd[kr]) / (2.0 * h);
                assert!(
                    (jac.get(row, col) - fd).abs() < 1e-5 * (1.0 + fd.abs()),
                    "({row},{col})"
                );
            }
        }
    }

    #[test]
    fn grim_reaper_solve_is_second_order() {
        let spec = WeightSpec::identity();
        let mut errors = vec![];
        for n in [17, 33] {
            let data = grim_reaper_data(n);
            let (patch, report) =
                solve_graph_equation(&spec, &data, None, &SolveOptions::default()).unwrap();
            assert!(report.converged && report.final_residual_norm <= 1e-10);
            let exact = data.grid.sample(|x, _| -x.cos().ln());
            errors.push(
                patch
                    .values
                    .iter()
                    .zip(&exact)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
            );
        }
        assert!((errors[0] / errors[1]).log2() > 1.8, "{errors:?}");
    }

    #[test]
    fn constant_boundary_dips_below() {
        let g = Grid::new([-0.5, 0.5], [-0.5, 0.5], 17, 17).unwrap();
        let kappa = 0.2;
        let data = BoundaryData::from_fn(g, |_, _| kappa).unwrap();
        let (patch, _) = solve_graph_equation(
            &WeightSpec::identity(),
            &data,
            None,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(patch.at(8, 8) < kappa - 1e-3);
        assert!(patch.values.iter().all(|&v| v <= kappa));
    }

    #[test]
    fn boundary_below_domain_is_rejected() {
        let g = Grid::new([0.0, 1.0], [0.0, 1.0], 5, 5).unwrap();
        let data = BoundaryData::from_fn(g, |_, _| -1.0).unwrap();
        let r = solve_graph_equation(
            &WeightSpec::quadratic(),
            &data,
            None,
            &SolveOptions::default(),
        );
        assert!(matches!(r, Err(Error::Domain { .. })));
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let data = grim_reaper_data(9);
        let opts = SolveOptions {
            max_iterations: 0,
            ..SolveOptions::default()
        };
        let init = data.grid.sample(|_, _| 1.5);
        match solve_graph_equation(&WeightSpec::identity(), &data, Some(&init), &opts) {
            Err(Error::NoConvergence(b)) => {
                assert!(!b.1.converged);
                assert_eq!(b.0.values.len(), 81);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn perturbation_examples() {
        let p = BoundaryPerturbation {
            amplitude: 0.01,
            period: 1.0,
            length: 1.0,
        };
        assert!((p.eval(0.0, 1.0) + 0.01).abs() < 1e-15);
        assert!((p.eval(0.0, -1.0) + 0.01).abs() < 1e-15);
        assert_eq!(p.eval(1.0, 0.3), 0.0);
        let zero = BoundaryPerturbation {
            amplitude: 0.0,
            ..p
        };
        assert_eq!(zero.eval(0.2, 0.4), 0.0);
    }

    #[test]
    fn profile_boundary_and_slab() {
        let spec = WeightSpec::identity();
        let profile = integrate_profile(&spec, 0.0, &ProfileOptions::default()).unwrap();
        let g = Grid::new([-1.2, 1.2], [-1.0, 1.0], 25, 9).unwrap();
        let plain = make_boundary_from_profile(&profile, g, None).unwrap();
        assert_eq!(plain.south, plain.north);
        for (i, v) in plain.south.iter().enumerate() {
            assert!((v + g.x(i).cos().ln()).abs() < 1e-9);
        }
        let zero = BoundaryPerturbation {
            amplitude: 0.0,
            period: 1.0,
            length: 1.0,
        };
        assert_eq!(
            make_boundary_from_profile(&profile, g, Some(&zero)).unwrap(),
            plain
        );
        let bumped = BoundaryPerturbation {
            amplitude: 0.01,
            ..zero
        };
        let d = make_boundary_from_profile(&profile, g, Some(&bumped)).unwrap();
        let dev = d
            .south
            .iter()
            .zip(&plain.south)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!((dev - 0.01).abs() < 1e-12);
        assert!((d.south[12] - plain.south[12] + 0.01).abs() < 1e-12);

        let wide = Grid::new([-1.5, 1.5], [-1.0, 1.0], 5, 5).unwrap();
        assert!(matches!(
            make_boundary_from_profile(&profile, wide, None),
            Err(Error::SlabViolation { .. })
        ));
    }

    #[test]
    fn discrete_profile_extends_to_exact_discrete_solution() {
        let spec = WeightSpec::identity();
        let g = Grid::new([-1.0, 1.0], [-1.0, 1.0], 21, 11).unwrap();
        let edge = -1f64.cos().ln();
        let opts = SolveOptions::default();
        let line = solve_discrete_profile(&spec, &g, edge, edge, &opts).unwrap();
        let data = BoundaryData::y_invariant(g, &line).unwrap();
        let r = discrete_residual(&g, &spec, &data.blend());
        assert!(interior_norms(&g, &r).0 <= 1e-10);
    }

    #[test]
    fn default_half_extent_uses_the_width_or_the_unit_slope_point() {
        let opts = ProfileOptions::default();
        let reaper = integrate_profile(&WeightSpec::identity(), 0.0, &opts).unwrap();
        assert!((default_half_extent(&reaper) - 0.75 * std::f64::consts::FRAC_PI_2).abs() < 1e-8);

        // arctan from h = 0: slope 1 where exp(2 atan u) = 2, i.e. u = tan(ln 2 / 2)
        let arctan = integrate_profile(&WeightSpec::arctan(), 0.0, &opts).unwrap();
        let d = default_half_extent(&arctan);
        let u = arctan.evaluate(d / 0.75).unwrap().u;
        assert!(d > 0.0 && d < 5.0);
        assert!(u >= (0.5 * std::f64::consts::LN_2).tan() - 1e-9);
    }
}
