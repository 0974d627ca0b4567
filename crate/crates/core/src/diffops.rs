//! Finite-difference operators on the box grid and on the plate face.
//!
//! Two boundary closures are available for first derivatives:
//! [`Closure::SecondOrder`] uses one-sided three-point formulas and is the
//! accurate choice for pointwise evaluation; [`Closure::Summation`] uses the
//! two-point closure that, together with trapezoidal weights `H`, satisfies
//! `H D + (H D)ᵀ = diag(-1, 0, .., 0, 1)` and is used wherever discrete energy
//! balances must hold exactly.
//!
//! Velocity vectors of length `3N` are stored component-major:
//! `[u1 (N) | u2 (N) | u3 (N)]`.

use serde::Serialize;

use crate::ambient::AmbientFlow;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FluidParams {
    pub nu: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl FluidParams {
    pub fn new(nu: f64, lambda: f64, eta: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::Config(format!("nu must be positive, got {nu}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        Ok(Self { nu, lambda, eta })
    }
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            nu: 1.0,
            lambda: 0.5,
            eta: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Closure {
    SecondOrder,
    Summation,
}

pub type VectorField = [Vec<f64>; 3];
pub type Tensor = [[f64; 3]; 3];

/// First-derivative matrix on `n` equispaced points.
pub fn first_derivative_1d(n: usize, h: f64, closure: Closure) -> CsrMatrix {
    let mut b = TripletBuilder::new(n, n);
    for i in 1..n - 1 {
        b.push(i, i + 1, 0.5 / h);
        b.push(i, i - 1, -0.5 / h);
    }
    match closure {
        Closure::SecondOrder => {
            for (c, off) in [(-1.5, 0), (2.0, 1), (-0.5, 2)] {
                b.push(0, off, c / h);
                b.push(n - 1, n - 1 - off, -c / h);
            }
        }
        Closure::Summation => {
            b.push(0, 0, -1.0 / h);
            b.push(0, 1, 1.0 / h);
            b.push(n - 1, n - 1, 1.0 / h);
            b.push(n - 1, n - 2, -1.0 / h);
        }
    }
    b.build()
}

/// Second-derivative matrix with second-order one-sided boundary rows.
pub fn second_derivative_1d(n: usize, h: f64) -> CsrMatrix {
    let mut b = TripletBuilder::new(n, n);
    let s = 1.0 / (h * h);
    for i in 1..n - 1 {
        b.push(i, i - 1, s);
        b.push(i, i, -2.0 * s);
        b.push(i, i + 1, s);
    }
    for (c, off) in [(2.0, 0), (-5.0, 1), (4.0, 2), (-1.0, 3)] {
        b.push(0, off, c * s);
        b.push(n - 1, n - 1 - off, c * s);
    }
    b.build()
}

/// Lifts a 1-D operator acting along `axis` to the 3-D grid.
fn lift(grid: &Grid, op: &CsrMatrix, axis: usize) -> CsrMatrix {
    let n = grid.num_nodes();
    let mut b = TripletBuilder::new(n, n);
    for row in 0..n {
        let (i, j, k) = grid.ijk(row);
        let (pos, stride) = match axis {
            0 => (i, 1),
            1 => (j, grid.nx),
            _ => (k, grid.nx * grid.ny),
        };
        let base = row - pos * stride;
        for (c, v) in op.row(pos) {
            b.push(row, base + c * stride, v);
        }
    }
    b.build()
}

/// Partial derivative matrices on the 3-D grid.
#[derive(Clone, Debug)]
pub struct Derivatives {
    pub closure: Closure,
    pub d: [CsrMatrix; 3],
    /// Pure second derivatives along each axis.
    pub dd: [CsrMatrix; 3],
}

impl Derivatives {
    pub fn new(grid: &Grid, closure: Closure) -> Self {
        let counts = grid.counts();
        let h = grid.spacing();
        let d =
            std::array::from_fn(|a| lift(grid, &first_derivative_1d(counts[a], h[a], closure), a));
        let dd = std::array::from_fn(|a| lift(grid, &second_derivative_1d(counts[a], h[a]), a));
        Self { closure, d, dd }
    }

    pub fn grad(&self, f: &[f64]) -> VectorField {
        std::array::from_fn(|a| self.d[a].matvec(f))
    }

    pub fn div(&self, u: &VectorField) -> Vec<f64> {
        let mut out = self.d[0].matvec(&u[0]);
        self.d[1].matvec_acc(&u[1], 1.0, &mut out);
        self.d[2].matvec_acc(&u[2], 1.0, &mut out);
        out
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.dd[0].matvec(f);
        self.dd[1].matvec_acc(f, 1.0, &mut out);
        self.dd[2].matvec_acc(f, 1.0, &mut out);
        out
    }

    /// `b · ∇f` for a nodal vector field `b`.
    pub fn advect(&self, b: &VectorField, f: &[f64]) -> Vec<f64> {
        let g = self.grad(f);
        (0..f.len())
            .map(|n| b[0][n] * g[0][n] + b[1][n] * g[1][n] + b[2][n] * g[2][n])
            .collect()
    }

    /// `(b · ∇) u` componentwise.
    pub fn advect_vector(&self, b: &VectorField, u: &VectorField) -> VectorField {
        std::array::from_fn(|c| self.advect(b, &u[c]))
    }

    /// Nodal velocity gradient `g[i][j] = d_j u_i`.
    pub fn velocity_gradient(&self, u: &VectorField) -> Vec<Tensor> {
        let parts: [[Vec<f64>; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| self.d[j].matvec(&u[i])));
        (0..u[0].len())
            .map(|n| std::array::from_fn(|i| std::array::from_fn(|j| parts[i][j][n])))
            .collect()
    }

    pub fn strain(&self, u: &VectorField) -> Vec<Tensor> {
        self.velocity_gradient(u)
            .into_iter()
            .map(|g| strain_of(&g))
            .collect()
    }

    pub fn stress(&self, u: &VectorField, params: &FluidParams) -> Vec<Tensor> {
        self.strain(u)
            .into_iter()
            .map(|e| stress_of(&e, params))
            .collect()
    }

    /// `div σ(u)`, differentiating the nodal stress tensor.
    pub fn div_stress(&self, u: &VectorField, params: &FluidParams) -> VectorField {
        let sigma = self.stress(u, params);
        std::array::from_fn(|i| {
            let mut out = vec![0.0; u[0].len()];
            for j in 0..3 {
                let col: Vec<f64> = sigma.iter().map(|s| s[i][j]).collect();
                self.d[j].matvec_acc(&col, 1.0, &mut out);
            }
            out
        })
    }
}

pub fn strain_of(g: &Tensor) -> Tensor {
    std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (g[i][j] + g[j][i])))
}

pub fn stress_of(e: &Tensor, params: &FluidParams) -> Tensor {
    let tr = e[0][0] + e[1][1] + e[2][2];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            2.0 * params.nu * e[i][j] + if i == j { params.lambda * tr } else { 0.0 }
        })
    })
}

pub fn tensor_contract(a: &Tensor, b: &Tensor) -> f64 {
    (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| a[i][j] * b[i][j])
        .sum()
}

/// Samples a closed-form scalar on every node.
pub fn sample_scalar(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
    (0..grid.num_nodes()).map(|n| f(grid.position(n))).collect()
}

/// Samples a closed-form vector field on every node.
pub fn sample_vector(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> VectorField {
    let vals: Vec<[f64; 3]> = (0..grid.num_nodes()).map(|n| f(grid.position(n))).collect();
    std::array::from_fn(|c| vals.iter().map(|v| v[c]).collect())
}

pub fn ambient_field(grid: &Grid, flow: &AmbientFlow) -> VectorField {
    sample_vector(grid, |x| flow.velocity(x))
}

pub fn flatten(u: &VectorField) -> Vec<f64> {
    u.iter().flat_map(|c| c.iter().copied()).collect()
}

pub fn unflatten(v: &[f64]) -> VectorField {
    let n = v.len() / 3;
    std::array::from_fn(|c| v[c * n..(c + 1) * n].to_vec())
}

// ---- trilinear finite-element forms ----

/// Integrals over one cell of products of trilinear basis derivatives:
/// `table[a][b][p][q] = ∫ d_p N_a d_q N_b`, local nodes ordered `x` fastest.
fn cell_gradient_table(h: [f64; 3]) -> Vec<[[f64; 3]; 3]> {
    let gauss = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let vol = h[0] * h[1] * h[2];
    let mut table = vec![[[0.0; 3]; 3]; 64];
    for &gx in &gauss {
        for &gy in &gauss {
            for &gz in &gauss {
                let g = [gx, gy, gz];
                let grads: Vec<[f64; 3]> = (0..8)
                    .map(|a| {
                        let bits = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
                        let val = |ax: usize| if bits[ax] == 1 { g[ax] } else { 1.0 - g[ax] };
                        let dval = |ax: usize| if bits[ax] == 1 { 1.0 } else { -1.0 } / h[ax];
                        [
                            dval(0) * val(1) * val(2),
                            val(0) * dval(1) * val(2),
                            val(0) * val(1) * dval(2),
                        ]
                    })
                    .collect();
                for a in 0..8 {
                    for b in 0..8 {
                        for p in 0..3 {
                            for q in 0..3 {
                                table[a * 8 + b][p][q] += 0.125 * vol * grads[a][p] * grads[b][q];
                            }
                        }
                    }
                }
            }
        }
    }
    table
}

fn cell_nodes(grid: &Grid, i: usize, j: usize, k: usize) -> [usize; 8] {
    std::array::from_fn(|a| grid.index(i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1)))
}

/// Stiffness of `∫ ∇f·∇g` for trilinear interpolants (N x N).
pub fn laplace_stiffness(grid: &Grid) -> CsrMatrix {
    let n = grid.num_nodes();
    let table = cell_gradient_table(grid.spacing());
    let mut b = TripletBuilder::new(n, n);
    for k in 0..grid.nz - 1 {
        for j in 0..grid.ny - 1 {
            for i in 0..grid.nx - 1 {
                let nodes = cell_nodes(grid, i, j, k);
                for a in 0..8 {
                    for c in 0..8 {
                        let t = &table[a * 8 + c];
                        b.push(nodes[a], nodes[c], t[0][0] + t[1][1] + t[2][2]);
                    }
                }
            }
        }
    }
    b.build()
}

/// Stiffness of `∫ 2ν ε(u):ε(φ) + λ div u div φ` for trilinear velocity
/// interpolants (3N x 3N, component-major).
pub fn viscous_stiffness(grid: &Grid, params: &FluidParams) -> CsrMatrix {
    let n = grid.num_nodes();
    let table = cell_gradient_table(grid.spacing());
    let (nu, lam) = (params.nu, params.lambda);
    let mut b = TripletBuilder::new(3 * n, 3 * n);
    for k in 0..grid.nz - 1 {
        for j in 0..grid.ny - 1 {
            for i in 0..grid.nx - 1 {
                let nodes = cell_nodes(grid, i, j, k);
                for a in 0..8 {
                    for bb in 0..8 {
                        // row (a, c) is the test function, column (bb, d) the trial function.
                        let t = &table[a * 8 + bb];
                        let lap = t[0][0] + t[1][1] + t[2][2];
                        for c in 0..3 {
                            for d in 0..3 {
                                let mut v = nu * t[d][c] + lam * t[c][d];
                                if c == d {
                                    v += nu * lap;
                                }
                                b.push(c * n + nodes[a], d * n + nodes[bb], v);
                            }
                        }
                    }
                }
            }
        }
    }
    b.build()
}

/// Discrete `H¹` norm: trapezoidal `L²` plus trilinear gradient energy of each component.
pub fn h1_norm(grid: &Grid, lap: &CsrMatrix, u: &VectorField) -> f64 {
    let mut s = 0.0;
    for c in u {
        let l2 = grid.l2_norm(c);
        s += l2 * l2 + crate::linalg::dot(c, &lap.matvec(c));
    }
    s.max(0.0).sqrt()
}

// ---- traces ----

/// Values of a nodal field at the plate degrees of freedom.
pub fn restrict_to_omega(grid: &Grid, f: &[f64]) -> Vec<f64> {
    (0..grid.omega_count())
        .map(|m| f[grid.omega_to_node(m)])
        .collect()
}

/// Values of a nodal field on the full top face.
pub fn restrict_to_top(grid: &Grid, f: &[f64]) -> Vec<f64> {
    (0..grid.top_count())
        .map(|t| f[grid.top_to_node(t)])
        .collect()
}

/// `(node, u·n)` at every boundary node with a unique outward normal.
pub fn normal_trace(grid: &Grid, u: &VectorField) -> Vec<(usize, f64)> {
    grid.boundary_nodes()
        .into_iter()
        .filter_map(|n| {
            grid.tag(n)
                .outward_normal()
                .map(|nv| (n, u[0][n] * nv[0] + u[1][n] * nv[1] + u[2][n] * nv[2]))
        })
        .collect()
}

// ---- plate operators ----

/// Derivatives of clamped plate fields, mapping plate degrees of freedom
/// (interior top-face points) to values on the full top face.
///
/// The clamped condition is imposed by even reflection across the rim, so
/// first derivatives and tangential second derivatives vanish on the rim and
/// the normal second derivative there is `2 w_1 / h²`.
#[derive(Clone, Debug)]
pub struct PlateOperators {
    pub d1: CsrMatrix,
    pub d2: CsrMatrix,
    pub d11: CsrMatrix,
    pub d22: CsrMatrix,
    pub d12: CsrMatrix,
    /// Clamped Laplacian, top face x plate dofs.
    pub laplacian: CsrMatrix,
    /// Biharmonic on plate dofs: `H_Ω⁻¹ Lᵀ W L` with trapezoidal top weights `W`.
    pub biharmonic: CsrMatrix,
    /// Centered in-plane gradient restricted to plate dofs.
    pub grad: [CsrMatrix; 2],
    /// Top-face x plate-dof embedding.
    pub embed: CsrMatrix,
}

impl PlateOperators {
    pub fn new(grid: &Grid) -> Self {
        let (nt, nw) = (grid.top_count(), grid.omega_count());
        let (hx, hy) = (grid.hx, grid.hy);
        let dof = |i: isize, j: isize| -> Option<usize> {
            if i <= 0 || j <= 0 || i >= grid.nx as isize - 1 || j >= grid.ny as isize - 1 {
                None
            } else {
                grid.top_to_omega(grid.top_index(i as usize, j as usize))
            }
        };
        let mut d1 = TripletBuilder::new(nt, nw);
        let mut d2 = TripletBuilder::new(nt, nw);
        let mut d11 = TripletBuilder::new(nt, nw);
        let mut d22 = TripletBuilder::new(nt, nw);
        let mut d12 = TripletBuilder::new(nt, nw);
        let mut embed = TripletBuilder::new(nt, nw);
        for t in 0..nt {
            let (i, j) = grid.top_ij(t);
            let (i, j) = (i as isize, j as isize);
            let x_rim = i == 0 || i == grid.nx as isize - 1;
            let y_rim = j == 0 || j == grid.ny as isize - 1;
            if x_rim && y_rim {
                continue;
            }
            if x_rim {
                let inward = if i == 0 { 1 } else { i - 1 };
                if let Some(m) = dof(inward, j) {
                    d11.push(t, m, 2.0 / (hx * hx));
                }
                continue;
            }
            if y_rim {
                let inward = if j == 0 { 1 } else { j - 1 };
                if let Some(m) = dof(i, inward) {
                    d22.push(t, m, 2.0 / (hy * hy));
                }
                continue;
            }
            let push = |b: &mut TripletBuilder, ii: isize, jj: isize, v: f64| {
                if let Some(m) = dof(ii, jj) {
                    b.push(t, m, v);
                }
            };
            push(&mut embed, i, j, 1.0);
            push(&mut d1, i + 1, j, 0.5 / hx);
            push(&mut d1, i - 1, j, -0.5 / hx);
            push(&mut d2, i, j + 1, 0.5 / hy);
            push(&mut d2, i, j - 1, -0.5 / hy);
            push(&mut d11, i + 1, j, 1.0 / (hx * hx));
            push(&mut d11, i, j, -2.0 / (hx * hx));
            push(&mut d11, i - 1, j, 1.0 / (hx * hx));
            push(&mut d22, i, j + 1, 1.0 / (hy * hy));
            push(&mut d22, i, j, -2.0 / (hy * hy));
            push(&mut d22, i, j - 1, 1.0 / (hy * hy));
            let c = 0.25 / (hx * hy);
            push(&mut d12, i + 1, j + 1, c);
            push(&mut d12, i - 1, j - 1, c);
            push(&mut d12, i + 1, j - 1, -c);
            push(&mut d12, i - 1, j + 1, -c);
        }
        let (d1, d2, d11, d22, d12, embed) = (
            d1.build(),
            d2.build(),
            d11.build(),
            d22.build(),
            d12.build(),
            embed.build(),
        );
        let laplacian = d11.add(&d22);
        let w = grid.top_weights();
        let biharmonic = laplacian
            .transpose()
            .scale_cols(&w)
            .matmul(&laplacian)
            .scaled(1.0 / grid.omega_weight());
        let restrict = embed.transpose();
        let grad = [restrict.matmul(&d1), restrict.matmul(&d2)];
        Self {
            d1,
            d2,
            d11,
            d22,
            d12,
            laplacian,
            biharmonic,
            grad,
            embed,
        }
    }

    /// `b1 ∂1 + b2 ∂2` on plate dofs for nodal coefficients on the plate dofs.
    pub fn directional(&self, b: [&[f64]; 2]) -> CsrMatrix {
        self.grad[0]
            .scale_rows(b[0])
            .add(&self.grad[1].scale_rows(b[1]))
    }
}

/// Five-point Laplacian on the full top face for arbitrary (not necessarily
/// clamped) data; rim rows are left empty.
pub fn face_laplacian(grid: &Grid) -> CsrMatrix {
    let nt = grid.top_count();
    let mut b = TripletBuilder::new(nt, nt);
    let (sx, sy) = (1.0 / (grid.hx * grid.hx), 1.0 / (grid.hy * grid.hy));
    for t in 0..nt {
        if grid.is_rim(t) {
            continue;
        }
        b.push(t, t - 1, sx);
        b.push(t, t + 1, sx);
        b.push(t, t - grid.nx, sy);
        b.push(t, t + grid.nx, sy);
        b.push(t, t, -2.0 * (sx + sy));
    }
    b.build()
}

/// Centered first derivatives on the full top face; rim rows are left empty.
pub fn face_gradient(grid: &Grid) -> [CsrMatrix; 2] {
    let nt = grid.top_count();
    let mut bx = TripletBuilder::new(nt, nt);
    let mut by = TripletBuilder::new(nt, nt);
    for t in 0..nt {
        if grid.is_rim(t) {
            continue;
        }
        bx.push(t, t + 1, 0.5 / grid.hx);
        bx.push(t, t - 1, -0.5 / grid.hx);
        by.push(t, t + grid.nx, 0.5 / grid.hy);
        by.push(t, t - grid.nx, -0.5 / grid.hy);
    }
    [bx.build(), by.build()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxDomain;
    use faer::Side;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid {
        Grid::cube(n).unwrap()
    }

    #[test]
    fn gradient_of_linear_is_exact() {
        let g = grid(9);
        for closure in [Closure::SecondOrder, Closure::Summation] {
            let d = Derivatives::new(&g, closure);
            let f = sample_scalar(&g, |x| x[0]);
            let gr = d.grad(&f);
            assert!(gr[0].iter().all(|v| (v - 1.0).abs() < 1e-13));
            assert!(gr[1].iter().chain(&gr[2]).all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn divergence_of_position_is_three() {
        let g = grid(9);
        let d = Derivatives::new(&g, Closure::SecondOrder);
        let u = sample_vector(&g, |x| x);
        assert!(d.div(&u).iter().all(|v| (v - 3.0).abs() < 1e-13));
    }

    #[test]
    fn second_order_closure_is_exact_on_quadratics() {
        let g = grid(7);
        let d = Derivatives::new(&g, Closure::SecondOrder);
        let f = sample_scalar(&g, |x| x[0] * x[0] + 2.0 * x[1] * x[2]);
        let gr = d.grad(&f);
        for n in 0..g.num_nodes() {
            let x = g.position(n);
            assert!((gr[0][n] - 2.0 * x[0]).abs() < 1e-12);
            assert!((gr[1][n] - 2.0 * x[2]).abs() < 1e-12);
        }
        assert!(d.laplacian(&f).iter().all(|v| (v - 2.0).abs() < 1e-10));
    }

    #[test]
    fn advection_converges_at_second_order() {
        let err = |n: usize| {
            let g = grid(n);
            let d = Derivatives::new(&g, Closure::SecondOrder);
            let b = sample_vector(&g, |_| [1.0, 0.0, 0.0]);
            let f = sample_scalar(&g, |x| (2.0 * x[0]).sin());
            let a = d.advect(&b, &f);
            (0..g.num_nodes())
                .map(|k| (a[k] - 2.0 * (2.0 * g.position(k)[0]).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(17) / err(33);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn summation_by_parts_holds_exactly_in_one_dimension() {
        let n = 9;
        let h = 0.125;
        let d = first_derivative_1d(n, h, Closure::Summation);
        let w: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .collect();
        let q = d.scale_rows(&w);
        let s = q.add(&q.transpose());
        for i in 0..n {
            for j in 0..n {
                let expected = match (i, j) {
                    (0, 0) => -1.0,
                    (a, b) if a == n - 1 && b == n - 1 => 1.0,
                    _ => 0.0,
                };
                assert!((s.get(i, j) - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn summation_by_parts_defect_vanishes_for_compact_fields() {
        let defect = |n: usize| {
            let g = grid(n);
            let d = Derivatives::new(&g, Closure::SecondOrder);
            let bump = |x: [f64; 3]| {
                (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2) * (PI * x[2]).sin().powi(2)
            };
            let f = sample_scalar(&g, |x| bump(x) * (1.0 + x[0]));
            let u = sample_vector(&g, |x| {
                let b = bump(x);
                [b * x[1], b * (x[2] + 2.0), b]
            });
            let gr = d.grad(&f);
            let dv = d.div(&u);
            let w = g.volume_weights();
            (0..g.num_nodes())
                .map(|k| {
                    w[k] * (gr[0][k] * u[0][k]
                        + gr[1][k] * u[1][k]
                        + gr[2][k] * u[2][k]
                        + f[k] * dv[k])
                })
                .sum::<f64>()
                .abs()
        };
        // Centered differences are exactly skew under uniform weights, so the
        // defect for fields vanishing near the boundary is at roundoff level.
        assert!(defect(9) < 1e-12);
        assert!(defect(17) < 1e-12);
    }

    #[test]
    fn shear_strain_and_stress() {
        let g = grid(5);
        let d = Derivatives::new(&g, Closure::SecondOrder);
        let p = FluidParams::new(0.7, 0.3, 1.0).unwrap();
        let u = sample_vector(&g, |x| [x[1], x[0], 0.0]);
        for (e, s) in d.strain(&u).iter().zip(d.stress(&u, &p)) {
            for i in 0..3 {
                for j in 0..3 {
                    let exp = if (i, j) == (0, 1) || (i, j) == (1, 0) {
                        1.0
                    } else {
                        0.0
                    };
                    assert!((e[i][j] - exp).abs() < 1e-12);
                    assert!((s[i][j] - 2.0 * 0.7 * exp).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identity_strain_stress() {
        let g = grid(5);
        let d = Derivatives::new(&g, Closure::SecondOrder);
        let p = FluidParams::new(0.7, 0.3, 1.0).unwrap();
        let u = sample_vector(&g, |x| x);
        for s in d.stress(&u, &p) {
            for i in 0..3 {
                for j in 0..3 {
                    let exp = if i == j { 2.0 * 0.7 + 3.0 * 0.3 } else { 0.0 };
                    assert!((s[i][j] - exp).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn divergence_of_stress_matches_lame_form() {
        let p = FluidParams::new(0.8, 0.4, 1.0).unwrap();
        let field = |x: [f64; 3]| {
            [
                (x[0] + 2.0 * x[1]).sin(),
                (x[1] * x[2]).cos(),
                (x[0] - x[2]).sin(),
            ]
        };
        let err = |n: usize| {
            let g = grid(n);
            let d = Derivatives::new(&g, Closure::SecondOrder);
            let u = sample_vector(&g, field);
            let a = d.div_stress(&u, &p);
            let lap: VectorField = std::array::from_fn(|c| d.laplacian(&u[c]));
            let gd = d.grad(&d.div(&u));
            (0..g.num_nodes())
                .filter(|&k| {
                    let (i, j, l) = g.ijk(k);
                    [i, j, l].iter().all(|&c| c >= 2 && c + 2 < n)
                })
                .map(|k| {
                    (0..3)
                        .map(|c| {
                            (a[c][k] - (p.nu * lap[c][k] + (p.nu + p.lambda) * gd[c][k])).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(9), err(17));
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.5, "{e1} -> {e2}");
    }

    #[test]
    fn viscous_stiffness_is_symmetric_and_reproduces_energy() {
        let g = Grid::new(BoxDomain::new(1.0, 0.8, 0.6).unwrap(), [5, 6, 5]).unwrap();
        let p = FluidParams::new(0.9, 0.2, 1.0).unwrap();
        let k = viscous_stiffness(&g, &p);
        assert!(k.sub(&k.transpose()).max_abs() < 1e-12);
        // Linear fields are interpolated exactly, so the energy is exact.
        let grad = [[0.3, -0.2, 0.5], [0.1, 0.4, -0.7], [0.6, 0.2, -0.1]];
        let u = sample_vector(&g, |x| {
            std::array::from_fn(|i| (0..3).map(|j| grad[i][j] * x[j]).sum())
        });
        let v = flatten(&u);
        let e = strain_of(&grad);
        let exact = tensor_contract(&stress_of(&e, &p), &e) * 1.0 * 0.8 * 0.6;
        let disc = crate::linalg::dot(&v, &k.matvec(&v));
        assert!((disc - exact).abs() < 1e-12 * exact.abs().max(1.0));
    }

    #[test]
    fn rigid_motions_are_in_the_viscous_kernel_when_lambda_vanishes() {
        let g = grid(5);
        let p = FluidParams::new(1.0, 0.0, 1.0).unwrap();
        let k = viscous_stiffness(&g, &p);
        let v = flatten(&sample_vector(&g, |x| [-x[1], x[0], 1.0]));
        assert!(k.matvec(&v).iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn biharmonic_matches_thirteen_point_stencil() {
        let g = Grid::new(BoxDomain::unit(), [9, 9, 5]).unwrap();
        let ops = PlateOperators::new(&g);
        let h4 = g.hx.powi(4);
        // First interior point: 7 on the diagonal in 1-D per axis, 20 in 2-D plus the ghost.
        let m = g.top_to_omega(g.top_index(3, 3)).unwrap();
        let row: Vec<(usize, f64)> = ops.biharmonic.row(m).collect();
        assert_eq!(row.len(), 13);
        assert!((ops.biharmonic.get(m, m) * h4 - 20.0).abs() < 1e-9);
        let corner = g.top_to_omega(g.top_index(1, 1)).unwrap();
        assert!((ops.biharmonic.get(corner, corner) * h4 - 22.0).abs() < 1e-9);
        let edge = g.top_to_omega(g.top_index(1, 4)).unwrap();
        assert!((ops.biharmonic.get(edge, edge) * h4 - 21.0).abs() < 1e-9);
    }

    #[test]
    fn biharmonic_is_spd_on_nine_by_nine() {
        let g = Grid::new(BoxDomain::unit(), [9, 9, 5]).unwrap();
        let ops = PlateOperators::new(&g);
        let b = ops.biharmonic.to_dense();
        assert!(ops.biharmonic.sub(&ops.biharmonic.transpose()).max_abs() < 1e-8);
        let ev = b.self_adjoint_eigenvalues(Side::Lower).unwrap();
        assert!(ev.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn zero_plate_field_maps_to_zero() {
        let g = grid(7);
        let ops = PlateOperators::new(&g);
        assert!(ops
            .biharmonic
            .matvec(&vec![0.0; g.omega_count()])
            .iter()
            .all(|v| *v == 0.0));
    }

    fn clamped_bump(x: [f64; 2]) -> (f64, f64) {
        let (s, c) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        let w = s * s * c * c;
        // Δ²(sin²(πx) sin²(πy)) in closed form.
        let (cx, cy) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        let fx = 0.5 * (1.0 - cx);
        let fy = 0.5 * (1.0 - cy);
        let k = 2.0 * PI;
        let fx2 = 0.5 * k * k * cx;
        let fy2 = 0.5 * k * k * cy;
        let fx4 = -0.5 * k.powi(4) * cx;
        let fy4 = -0.5 * k.powi(4) * cy;
        (w, fx4 * fy + 2.0 * fx2 * fy2 + fx * fy4)
    }

    #[test]
    fn biharmonic_converges_at_second_order() {
        let err = |n: usize| {
            let g = Grid::new(BoxDomain::unit(), [n, n, 5]).unwrap();
            let ops = PlateOperators::new(&g);
            let w: Vec<f64> = (0..g.omega_count())
                .map(|m| clamped_bump(g.omega_position(m)).0)
                .collect();
            let bw = ops.biharmonic.matvec(&w);
            (0..g.omega_count())
                .map(|m| (bw[m] - clamped_bump(g.omega_position(m)).1).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(17) / err(33);
        assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
    }

    #[test]
    fn traces_select_known_values() {
        let g = grid(7);
        let f = sample_scalar(&g, |x| x[0] + 2.0 * x[1] + 3.0 * x[2]);
        let om = restrict_to_omega(&g, &f);
        for (m, v) in om.iter().enumerate() {
            let p = g.omega_position(m);
            assert!((v - (p[0] + 2.0 * p[1])).abs() < 1e-14);
        }
        let u = sample_vector(&g, |x| [x[0], x[1], x[2] + 1.0]);
        for (n, un) in normal_trace(&g, &u) {
            let x = g.position(n);
            let nv = g.tag(n).outward_normal().unwrap();
            let exp = x[0] * nv[0] + x[1] * nv[1] + (x[2] + 1.0) * nv[2];
            assert!((un - exp).abs() < 1e-14);
        }
        let ops = PlateOperators::new(&g);
        let w: Vec<f64> = (0..g.omega_count())
            .map(|m| clamped_bump(g.omega_position(m)).0)
            .collect();
        let gx = ops.grad[0].matvec(&w);
        let m = g.top_to_omega(g.top_index(3, 3)).unwrap();
        let (wp, wm) = (w[m + 1], w[m - 1]);
        assert!((gx[m] - (wp - wm) / (2.0 * g.hx)).abs() < 1e-14);
    }

    #[test]
    fn invalid_params_name_the_field() {
        assert!(FluidParams::new(-1.0, 0.0, 1.0)
            .unwrap_err()
            .to_string()
            .contains("nu"));
        assert!(FluidParams::new(1.0, -0.1, 1.0)
            .unwrap_err()
            .to_string()
            .contains("lambda"));
        assert!(FluidParams::new(1.0, 0.0, 0.0)
            .unwrap_err()
            .to_string()
            .contains("eta"));
    }
}
