//! Discrete differential geometry of height graphs `x3 = u(x1, x2)` on a
//! rectangular tensor grid.
//!
//! All derivatives are second-order finite differences: centred in the
//! interior, one-sided at the boundary. The unit normal is the downward one,
//! `N = (u_x, u_y, -1) / W` with `W = sqrt(1 + |Du|^2)`, so `eta_3 < 0`
//! everywhere and the mean curvature `H = div(Du / W)` satisfies the
//! phi-minimal condition `H = -phi'(u) eta_3`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weight::WeightSpec;

/// Rectangle `[x0, x1] x [y0, y1]` sampled with `nx * ny` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x_range: [f64; 2], y_range: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        let grid = Self {
            x0: x_range[0],
            x1: x_range[1],
            y0: y_range[0],
            y1: y_range[1],
            nx,
            ny,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::GridTooSmall {
                nx: self.nx,
                ny: self.ny,
            });
        }
        let ok = [self.x0, self.x1, self.y0, self.y1]
            .iter()
            .all(|v| v.is_finite())
            && self.x1 > self.x0
            && self.y1 > self.y0;
        if !ok {
            return Err(Error::InvalidGrid(format!(
                "ranges [{}, {}] x [{}, {}] must be finite and increasing",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dx(&self) -> f64 {
        (self.x1 - self.x0) / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y1 - self.y0) / (self.ny - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx - 1 {
            self.x1
        } else {
            self.x0 + i as f64 * self.dx()
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        if j == self.ny - 1 {
            self.y1
        } else {
            self.y0 + j as f64 * self.dy()
        }
    }

    /// Row-major index: `x` varies fastest.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    /// Distance (in nodes) to the nearest boundary edge.
    pub fn ring(&self, i: usize, j: usize) -> usize {
        i.min(j).min(self.nx - 1 - i).min(self.ny - 1 - j)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        self.ring(i, j) == 0
    }

    pub fn same_shape(&self, field: &[f64]) -> Result<()> {
        if field.len() == self.len() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.len(),
                got: field.len(),
            })
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let (i, j) = self.coords(k);
                f(self.x(i), self.y(j))
            })
            .collect()
    }

    /// Max of `|field|` over nodes at least `ring` nodes away from the boundary.
    pub fn max_abs_from_ring(&self, field: &[f64], ring: usize) -> f64 {
        self.max_abs_inside(field, ring, [0.0, 0.0])
    }

    /// Max of `|field|` over nodes at least `ring` nodes and at least
    /// `inset = [dx, dy]` (physical distance) away from the boundary.
    pub fn max_abs_inside(&self, field: &[f64], ring: usize, inset: [f64; 2]) -> f64 {
        let slack = 1e-9 * (self.dx().min(self.dy()));
        let inside_x = |x: f64| x >= self.x0 + inset[0] - slack && x <= self.x1 - inset[0] + slack;
        let inside_y = |y: f64| y >= self.y0 + inset[1] - slack && y <= self.y1 - inset[1] + slack;
        let mut m: f64 = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.ring(i, j) >= ring && inside_x(self.x(i)) && inside_y(self.y(j)) {
                    let v = field[self.idx(i, j)].abs();
                    m = if v.is_nan() || m.is_nan() {
                        f64::NAN
                    } else {
                        m.max(v)
                    };
                }
            }
        }
        m
    }

    pub fn max_abs_boundary(&self, field: &[f64]) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.is_boundary(i, j) {
                    m = m.max(field[self.idx(i, j)].abs());
                }
            }
        }
        m
    }

    /// `d/dx` with second-order stencils everywhere.
    pub fn diff_x(&self, f: &[f64]) -> Vec<f64> {
        let h = self.dx();
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; f.len()];
        for j in 0..ny {
            let row = &f[j * nx..(j + 1) * nx];
            let o = &mut out[j * nx..(j + 1) * nx];
            first_derivative_line(row, 1, h, o, 1);
        }
        out
    }

    pub fn diff_y(&self, f: &[f64]) -> Vec<f64> {
        let h = self.dy();
        let nx = self.nx;
        let mut out = vec![0.0; f.len()];
        for i in 0..nx {
            let col: Vec<f64> = (0..self.ny).map(|j| f[j * nx + i]).collect();
            let mut o = vec![0.0; self.ny];
            first_derivative_line(&col, 1, h, &mut o, 1);
            for j in 0..self.ny {
                out[j * nx + i] = o[j];
            }
        }
        out
    }

    /// `d/dx` with fourth-order centred stencils where five nodes fit, the
    /// second-order ones elsewhere.
    pub fn diff_x4(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.diff_x(f);
        let (nx, h) = (self.nx, self.dx());
        for j in 0..self.ny {
            let row = &f[j * nx..(j + 1) * nx];
            for i in 2..nx.saturating_sub(2) {
                out[j * nx + i] = fourth_order(row[i - 2], row[i - 1], row[i + 1], row[i + 2], h);
            }
        }
        out
    }

    pub fn diff_y4(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.diff_y(f);
        let (nx, h) = (self.nx, self.dy());
        for j in 2..self.ny.saturating_sub(2) {
            for i in 0..nx {
                let k = j * nx + i;
                out[k] = fourth_order(f[k - 2 * nx], f[k - nx], f[k + nx], f[k + 2 * nx], h);
            }
        }
        out
    }

    pub fn diff_xx(&self, f: &[f64]) -> Vec<f64> {
        let h = self.dx();
        let nx = self.nx;
        let mut out = vec![0.0; f.len()];
        for j in 0..self.ny {
            second_derivative_line(&f[j * nx..(j + 1) * nx], h, &mut out[j * nx..(j + 1) * nx]);
        }
        out
    }

    pub fn diff_yy(&self, f: &[f64]) -> Vec<f64> {
        let h = self.dy();
        let nx = self.nx;
        let mut out = vec![0.0; f.len()];
        for i in 0..nx {
            let col: Vec<f64> = (0..self.ny).map(|j| f[j * nx + i]).collect();
            let mut o = vec![0.0; self.ny];
            second_derivative_line(&col, h, &mut o);
            for j in 0..self.ny {
                out[j * nx + i] = o[j];
            }
        }
        out
    }

    /// Trapezoidal rule over the rectangle.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let mut total = 0.0;
        for j in 0..self.ny {
            let wy = if j == 0 || j == self.ny - 1 { 0.5 } else { 1.0 };
            let mut row = 0.0;
            for i in 0..self.nx {
                let wx = if i == 0 || i == self.nx - 1 { 0.5 } else { 1.0 };
                row += wx * f[self.idx(i, j)];
            }
            total += wy * row;
        }
        total * self.dx() * self.dy()
    }
}

fn first_derivative_line(f: &[f64], _stride: usize, h: f64, out: &mut [f64], _ostride: usize) {
    let n = f.len();
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
}

fn fourth_order(m2: f64, m1: f64, p1: f64, p2: f64, h: f64) -> f64 {
    (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
}

fn second_derivative_line(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let h2 = h * h;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    if n >= 4 {
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    } else {
        out[0] = out[1];
        out[n - 1] = out[1];
    }
}

/// Heights `u(x1, x2)` on a grid. Serializes as
/// `{x0, x1, y0, y1, nx, ny, values}` with `values` row-major (`x` fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphPatch {
    #[serde(flatten)]
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GraphPatch {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        grid.same_shape(&values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("patch heights"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid.sample(f);
        Self::new(grid, values)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let patch: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidGrid(format!("bad patch JSON: {e}")))?;
        Self::new(patch.grid, patch.values)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn derivatives(&self) -> Derivatives {
        let g = &self.grid;
        let ux = g.diff_x(&self.values);
        let uy = g.diff_y(&self.values);
        let uxy = g.diff_y(&ux);
        Derivatives {
            uxx: g.diff_xx(&self.values),
            uyy: g.diff_yy(&self.values),
            ux,
            uy,
            uxy,
        }
    }

    fn check_heights(&self, spec: &WeightSpec) -> Result<()> {
        match self.values.iter().find(|&&u| !spec.contains(u)) {
            Some(&u) => Err(Error::Domain {
                x: u,
                a: spec.domain_start(),
            }),
            None => Ok(()),
        }
    }
}

/// Node-wise first and second partial derivatives of the height.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivatives {
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub uxx: Vec<f64>,
    pub uxy: Vec<f64>,
    pub uyy: Vec<f64>,
}

/// Per-node geometry of a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFields {
    /// downward unit normal; its components are the angle functions `eta_i`
    pub normal: Vec<[f64; 3]>,
    pub mean_curvature: Vec<f64>,
    /// squared norm of the shape operator
    pub shape_norm2: Vec<f64>,
    pub gauss_curvature: Vec<f64>,
    /// `|grad x3|^2 = 1 - eta_3^2` in the induced metric
    pub grad_x3_norm2: Vec<f64>,
}

impl SurfaceFields {
    pub fn eta(&self, component: usize) -> Vec<f64> {
        self.normal.iter().map(|n| n[component]).collect()
    }
}

/// Normal, curvatures and angle functions at every node.
pub fn surface_fields(patch: &GraphPatch) -> Result<SurfaceFields> {
    patch.grid.validate()?;
    let d = patch.derivatives();
    let per_node: Vec<([f64; 3], f64, f64, f64, f64)> = (0..patch.grid.len())
        .into_par_iter()
        .map(|k| {
            let (p, q) = (d.ux[k], d.uy[k]);
            let (r, s, t) = (d.uxx[k], d.uxy[k], d.uyy[k]);
            let grad2 = p * p + q * q;
            let w2 = 1.0 + grad2;
            let w = w2.sqrt();
            let normal = [p / w, q / w, -1.0 / w];
            let h = ((1.0 + q * q) * r - 2.0 * p * q * s + (1.0 + p * p) * t) / (w2 * w);
            let k_gauss = (r * t - s * s) / (w2 * w2);
            // k1^2 + k2^2 = H^2 - 2K
            let s2 = (h * h - 2.0 * k_gauss).max(0.0);
            (normal, h, s2, k_gauss, grad2 / w2)
        })
        .collect();
    let mut fields = SurfaceFields {
        normal: Vec::with_capacity(per_node.len()),
        mean_curvature: Vec::with_capacity(per_node.len()),
        shape_norm2: Vec::with_capacity(per_node.len()),
        gauss_curvature: Vec::with_capacity(per_node.len()),
        grad_x3_norm2: Vec::with_capacity(per_node.len()),
    };
    for (n, h, s2, k, g) in per_node {
        fields.normal.push(n);
        fields.mean_curvature.push(h);
        fields.shape_norm2.push(s2);
        fields.gauss_curvature.push(k);
        fields.grad_x3_norm2.push(g);
    }
    Ok(fields)
}

/// `(1+u_x^2) u_yy + (1+u_y^2) u_xx - 2 u_x u_y u_xy - phi'(u) (1 + |Du|^2)`.
pub fn phi_minimal_residual(patch: &GraphPatch, spec: &WeightSpec) -> Result<Vec<f64>> {
    patch.check_heights(spec)?;
    let d = patch.derivatives();
    Ok((0..patch.grid.len())
        .into_par_iter()
        .map(|k| {
            let (p, q) = (d.ux[k], d.uy[k]);
            let dphi = spec.eval_unchecked(patch.values[k]).first;
            (1.0 + p * p) * d.uyy[k] + (1.0 + q * q) * d.uxx[k]
                - 2.0 * p * q * d.uxy[k]
                - dphi * (1.0 + p * p + q * q)
        })
        .collect())
}

/// Max-norm of the phi-minimal residual over interior nodes.
pub fn interior_residual_norm(patch: &GraphPatch, spec: &WeightSpec) -> Result<f64> {
    let r = phi_minimal_residual(patch, spec)?;
    Ok(patch.grid.max_abs_from_ring(&r, 1))
}

/// Drift Laplacian `Delta f + phi'(u) <grad x3, grad f>` of a node field in
/// the induced metric.
///
/// The Laplace–Beltrami part is discretized in divergence form, differencing
/// the fluxes `sqrt(g) g^{ij} d_j f` at half-nodes. Boundary entries are `NaN`.
pub fn drift_laplacian(patch: &GraphPatch, spec: &WeightSpec, f: &[f64]) -> Result<Vec<f64>> {
    let g = &patch.grid;
    g.validate()?;
    g.same_shape(f)?;
    patch.check_heights(spec)?;
    let u = &patch.values;
    let (dx, dy) = (g.dx(), g.dy());
    let ux = g.diff_x(u);
    let uy = g.diff_y(u);
    let fx = g.diff_x(f);
    let fy = g.diff_y(f);
    let nx = g.nx;

    // sqrt(g) g^{ij} f_j = ((1 + |Du|^2) f_i - u_i (Du . Df)) / W
    let flux = |p: f64, q: f64, a: f64, b: f64| -> [f64; 2] {
        let w = (1.0 + p * p + q * q).sqrt();
        [
            ((1.0 + q * q) * a - p * q * b) / w,
            ((1.0 + p * p) * b - p * q * a) / w,
        ]
    };

    Ok((0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = g.coords(k);
            if g.is_boundary(i, j) {
                return f64::NAN;
            }
            let east = {
                let p = (u[k + 1] - u[k]) / dx;
                let q = 0.5 * (uy[k] + uy[k + 1]);
                flux(p, q, (f[k + 1] - f[k]) / dx, 0.5 * (fy[k] + fy[k + 1]))[0]
            };
            let west = {
                let p = (u[k] - u[k - 1]) / dx;
                let q = 0.5 * (uy[k] + uy[k - 1]);
                flux(p, q, (f[k] - f[k - 1]) / dx, 0.5 * (fy[k] + fy[k - 1]))[0]
            };
            let north = {
                let p = 0.5 * (ux[k] + ux[k + nx]);
                let q = (u[k + nx] - u[k]) / dy;
                flux(p, q, 0.5 * (fx[k] + fx[k + nx]), (f[k + nx] - f[k]) / dy)[1]
            };
            let south = {
                let p = 0.5 * (ux[k] + ux[k - nx]);
                let q = (u[k] - u[k - nx]) / dy;
                flux(p, q, 0.5 * (fx[k] + fx[k - nx]), (f[k] - f[k - nx]) / dy)[1]
            };
            let (p, q) = (ux[k], uy[k]);
            let w2 = 1.0 + p * p + q * q;
            let laplace = ((east - west) / dx + (north - south) / dy) / w2.sqrt();
            let dphi = spec.eval_unchecked(u[k]).first;
            laplace + dphi * (p * fx[k] + q * fy[k]) / w2
        })
        .collect())
}

/// `<grad a, grad b>` in the induced metric, from centred node derivatives.
fn metric_inner(patch: &GraphPatch, a: &[f64], b: &[f64]) -> Vec<f64> {
    let g = &patch.grid;
    let ux = g.diff_x(&patch.values);
    let uy = g.diff_y(&patch.values);
    let (ax, ay) = (g.diff_x(a), g.diff_y(a));
    let (bx, by) = (g.diff_x(b), g.diff_y(b));
    (0..g.len())
        .map(|k| {
            let (p, q) = (ux[k], uy[k]);
            let w2 = 1.0 + p * p + q * q;
            ax[k] * bx[k] + ay[k] * by[k] - (p * ax[k] + q * ay[k]) * (p * bx[k] + q * by[k]) / w2
        })
        .collect()
}

/// Max-norms of the fundamental equations of a phi-minimal graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `Delta^phi x_i = 0`, max over `i = 1, 2`
    pub coordinate: f64,
    /// `Delta^phi x_3 = phi'`
    pub height: f64,
    /// `Delta^phi eta_i + |S|^2 eta_i = phi'' eta_i eta_3^2`, max over `i = 1, 2`
    pub eta_horizontal: f64,
    /// `Delta^phi eta_3 + |S|^2 eta_3 = -phi'' eta_3 |grad x3|^2`
    pub eta_vertical: f64,
    /// `Delta^phi q + 2 <grad q, grad eta_3> / eta_3 = phi'' q`, `q = eta_2 / eta_3`
    pub quotient: f64,
    /// `H + phi' eta_3`
    pub mean_curvature: f64,
    /// max-norm of the graph-equation residual that was checked against `tol`
    pub minimal_residual: f64,
}

impl IdentityResiduals {
    /// The five fundamental-equation residuals in a fixed order.
    pub fn fundamental(&self) -> [(&'static str, f64); 5] {
        [
            ("coordinate", self.coordinate),
            ("height", self.height),
            ("eta_horizontal", self.eta_horizontal),
            ("eta_vertical", self.eta_vertical),
            ("quotient", self.quotient),
        ]
    }
}

/// Nodes this close to the boundary are left out of identity norms: the
/// identities differentiate the angle functions twice, and those carry
/// one-sided stencils on the boundary ring.
pub const IDENTITY_RING: usize = 2;

/// Evaluates the fundamental equations on a (nearly) phi-minimal patch.
///
/// Fails with [`Error::NotMinimal`] when the interior graph-equation residual
/// exceeds `tol`, since the identities only hold on solutions.
pub fn identity_residuals(
    patch: &GraphPatch,
    spec: &WeightSpec,
    tol: f64,
) -> Result<IdentityResiduals> {
    identity_residuals_inside(patch, spec, tol, [0.0, 0.0])
}

/// [`identity_residuals`] with norms restricted to nodes at least
/// `inset = [dx, dy]` away from the edges as well.
///
/// Refinement studies should fix the inset physically (e.g. two spacings of
/// the coarsest grid) so every mesh is measured on the same region; a ring of
/// a fixed node count drifts towards the edge as the mesh is refined.
pub fn identity_residuals_inside(
    patch: &GraphPatch,
    spec: &WeightSpec,
    tol: f64,
    inset: [f64; 2],
) -> Result<IdentityResiduals> {
    let g = &patch.grid;
    if g.nx < 2 * IDENTITY_RING + 1 || g.ny < 2 * IDENTITY_RING + 1 {
        return Err(Error::GridTooSmall { nx: g.nx, ny: g.ny });
    }
    let minimal_residual = interior_residual_norm(patch, spec)?;
    if !(minimal_residual <= tol) {
        return Err(Error::NotMinimal {
            residual: minimal_residual,
            tol,
        });
    }
    let fields = surface_fields(patch)?;
    let jets: Vec<_> = patch
        .values
        .iter()
        .map(|&u| spec.eval_unchecked(u))
        .collect();
    let eta: Vec<Vec<f64>> = (0..3).map(|c| fields.eta(c)).collect();
    let x1 = g.sample(|x, _| x);
    let x2 = g.sample(|_, y| y);
    let norm = |v: &[f64]| g.max_abs_inside(v, IDENTITY_RING, inset);

    let lx1 = drift_laplacian(patch, spec, &x1)?;
    let lx2 = drift_laplacian(patch, spec, &x2)?;
    let coordinate = norm(&lx1).max(norm(&lx2));

    let lx3 = drift_laplacian(patch, spec, &patch.values)?;
    let height_res: Vec<f64> = lx3.iter().zip(&jets).map(|(l, j)| l - j.first).collect();

    let mut eta_horizontal: f64 = 0.0;
    for c in 0..2 {
        let l = drift_laplacian(patch, spec, &eta[c])?;
        let res: Vec<f64> = (0..g.len())
            .map(|k| {
                let e3 = eta[2][k];
                l[k] + fields.shape_norm2[k] * eta[c][k] - jets[k].second * eta[c][k] * e3 * e3
            })
            .collect();
        eta_horizontal = eta_horizontal.max(norm(&res));
    }

    let l3 = drift_laplacian(patch, spec, &eta[2])?;
    let eta3_res: Vec<f64> = (0..g.len())
        .map(|k| {
            let e3 = eta[2][k];
            l3[k] + fields.shape_norm2[k] * e3 + jets[k].second * e3 * fields.grad_x3_norm2[k]
        })
        .collect();

    let quotient_field: Vec<f64> = eta[1].iter().zip(&eta[2]).map(|(a, b)| a / b).collect();
    let lq = drift_laplacian(patch, spec, &quotient_field)?;
    let cross = metric_inner(patch, &quotient_field, &eta[2]);
    let quotient_res: Vec<f64> = (0..g.len())
        .map(|k| lq[k] + 2.0 * cross[k] / eta[2][k] - jets[k].second * quotient_field[k])
        .collect();

    let mean_res: Vec<f64> = (0..g.len())
        .map(|k| fields.mean_curvature[k] + jets[k].first * eta[2][k])
        .collect();

    Ok(IdentityResiduals {
        coordinate,
        height: norm(&height_res),
        eta_horizontal,
        eta_vertical: norm(&eta3_res),
        quotient: norm(&quotient_res),
        mean_curvature: g.max_abs_inside(&mean_res, 1, inset),
        minimal_residual,
    })
}

/// `int e^{phi(u)} sqrt(1 + |Du|^2) dx dy` by the trapezoidal rule.
///
/// The gradient uses fourth-order stencils away from the edges: the
/// trapezoidal sum of a compactly supported variation is then accurate to
/// that order, which keeps [`first_variation`] well below the second-order
/// error of the graph solver.
pub fn weighted_area(patch: &GraphPatch, spec: &WeightSpec) -> Result<f64> {
    patch.check_heights(spec)?;
    let g = &patch.grid;
    let ux = g.diff_x4(&patch.values);
    let uy = g.diff_y4(&patch.values);
    let density: Vec<f64> = (0..g.len())
        .map(|k| {
            spec.eval_unchecked(patch.values[k]).value.exp()
                * (1.0 + ux[k] * ux[k] + uy[k] * uy[k]).sqrt()
        })
        .collect();
    let area = g.integrate(&density);
    if area.is_finite() {
        Ok(area)
    } else {
        Err(Error::NonFinite("weighted area"))
    }
}

/// Heights of the graph `F + eps v N` re-projected onto the grid abscissae,
/// correct to second order in `eps`.
fn normal_offset(patch: &GraphPatch, v: &[f64], eps: f64) -> Vec<f64> {
    let g = &patch.grid;
    let u = &patch.values;
    let d = patch.derivatives();
    let n = g.len();
    let (mut vn1, mut vn2, mut vn3) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let w = (1.0 + d.ux[k] * d.ux[k] + d.uy[k] * d.uy[k]).sqrt();
        vn1[k] = v[k] * d.ux[k] / w;
        vn2[k] = v[k] * d.uy[k] / w;
        vn3[k] = -v[k] / w;
    }
    let (a_x, a_y) = (g.diff_x(&vn1), g.diff_y(&vn1));
    let (b_x, b_y) = (g.diff_x(&vn2), g.diff_y(&vn2));
    let (c_x, c_y) = (g.diff_x(&vn3), g.diff_y(&vn3));
    (0..n)
        .map(|k| {
            // source abscissa p = x - delta(p), delta = eps v (N1, N2)
            let (d1, d2) = (eps * vn1[k], eps * vn2[k]);
            let e1 = -d1 + eps * (a_x[k] * d1 + a_y[k] * d2);
            let e2 = -d2 + eps * (b_x[k] * d1 + b_y[k] * d2);
            let u_p = u[k]
                + d.ux[k] * e1
                + d.uy[k] * e2
                + 0.5 * (d.uxx[k] * e1 * e1 + 2.0 * d.uxy[k] * e1 * e2 + d.uyy[k] * e2 * e2);
            let lift = eps * (vn3[k] + c_x[k] * e1 + c_y[k] * e2);
            u_p + lift
        })
        .collect()
}

/// Derivative of [`weighted_area`] along the normal variation with speed `v`,
/// by Richardson-extrapolated central differences.
pub fn first_variation(patch: &GraphPatch, spec: &WeightSpec, v: &[f64]) -> Result<f64> {
    let g = &patch.grid;
    g.same_shape(v)?;
    let boundary = g.max_abs_boundary(v);
    if boundary > 0.0 {
        return Err(Error::BoundarySupport(boundary));
    }
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if vmax == 0.0 {
        return Ok(0.0);
    }
    let area_at = |eps: f64| -> Result<f64> {
        let moved = GraphPatch {
            grid: patch.grid,
            values: normal_offset(patch, v, eps),
        };
        weighted_area(&moved, spec)
    };
    let central = |eps: f64| -> Result<f64> { Ok((area_at(eps)? - area_at(-eps)?) / (2.0 * eps)) };
    let eps = 1e-3 / vmax;
    let coarse = central(eps)?;
    let fine = central(0.5 * eps)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
