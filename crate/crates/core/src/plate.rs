//! Plate-face geometry: the extended edge normal, the flux field built from
//! the ambient flow, the commutator `[Δ, h·∇]` and the flux-multiplier
//! identity for clamped plate displacements.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ambient::{AmbientFlow, SurfaceJet};
use crate::diffops::{face_gradient, face_laplacian, PlateOperators};
use crate::error::{Error, Result};
use crate::grid::{BoxDomain, Grid};
use crate::linalg;

/// Smooth extension of the rim normal: `g = (-cos(pi x/lx), -cos(pi y/ly))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormalExtension {
    pub lx: f64,
    pub ly: f64,
}

impl NormalExtension {
    pub fn new(domain: &BoxDomain) -> Self {
        Self {
            lx: domain.lx,
            ly: domain.ly,
        }
    }
}

impl PlaneField for NormalExtension {
    fn jet(&self, x: [f64; 2]) -> SurfaceJet {
        let (kx, ky) = (PI / self.lx, PI / self.ly);
        let (sx, cx) = (kx * x[0]).sin_cos();
        let (sy, cy) = (ky * x[1]).sin_cos();
        let mut j = SurfaceJet::default();
        j.value = [-cx, -cy];
        j.grad[0][0] = kx * sx;
        j.grad[1][1] = ky * sy;
        j.hess[0][0][0] = kx * kx * cx;
        j.hess[1][1][1] = ky * ky * cy;
        j
    }
}

/// In-plane vector field with analytic first and second derivatives.
pub trait PlaneField {
    fn jet(&self, x: [f64; 2]) -> SurfaceJet;

    fn value(&self, x: [f64; 2]) -> [f64; 2] {
        self.jet(x).value
    }
}

impl<F: Fn([f64; 2]) -> SurfaceJet> PlaneField for F {
    fn jet(&self, x: [f64; 2]) -> SurfaceJet {
        self(x)
    }
}

/// `h = U|_Ω - α g` with analytic derivatives.
#[derive(Clone, Copy, Debug)]
pub struct FluxField {
    pub flow: AmbientFlow,
    pub g: NormalExtension,
    pub alpha: f64,
}

impl FluxField {
    pub fn new(flow: AmbientFlow, alpha: f64) -> Self {
        Self {
            g: NormalExtension::new(&flow.domain),
            flow,
            alpha,
        }
    }

    /// Nodal components on the plate dofs.
    pub fn on_plate(&self, grid: &Grid) -> [Vec<f64>; 2] {
        on_plate(self, grid)
    }

    /// Largest `h·ν` over the rim, corners excluded.
    pub fn max_boundary_flux(&self, grid: &Grid) -> f64 {
        grid.rim_quadrature()
            .iter()
            .map(|r| {
                let h = self.value(grid.top_position(r.top));
                h[0] * r.normal[0] + h[1] * r.normal[1]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl PlaneField for FluxField {
    fn jet(&self, x: [f64; 2]) -> SurfaceJet {
        let u = self.flow.surface_jet(x);
        let g = self.g.jet(x);
        let a = self.alpha;
        let mut h = u;
        for i in 0..2 {
            h.value[i] -= a * g.value[i];
            for j in 0..2 {
                h.grad[i][j] -= a * g.grad[i][j];
                for k in 0..2 {
                    h.hess[i][j][k] -= a * g.hess[i][j][k];
                }
            }
        }
        h
    }
}

/// Nodal components of a plane field on the plate dofs.
pub fn on_plate(h: &impl PlaneField, grid: &Grid) -> [Vec<f64>; 2] {
    let vals: Vec<[f64; 2]> = (0..grid.omega_count())
        .map(|m| h.value(grid.omega_position(m)))
        .collect();
    [
        vals.iter().map(|v| v[0]).collect(),
        vals.iter().map(|v| v[1]).collect(),
    ]
}

/// Values below this are treated as zero when computing the α threshold.
const ALPHA_SNAP: f64 = 1e-12;

/// Smallest `α ≥ 0` with `U·ν - α g·ν ≤ 0` on every non-corner rim node.
pub fn alpha_min(flow: &AmbientFlow, g: &NormalExtension, grid: &Grid) -> Result<f64> {
    let mut alpha = 0.0f64;
    for r in grid.rim_quadrature() {
        let x = grid.top_position(r.top);
        let gv = g.value(x);
        let gn = gv[0] * r.normal[0] + gv[1] * r.normal[1];
        if gn <= 0.0 {
            return Err(Error::Construction(format!(
                "g·ν = {gn:.3e} at rim point ({:.4}, {:.4})",
                x[0], x[1]
            )));
        }
        let u = flow.surface_jet(x).value;
        alpha = alpha.max((u[0] * r.normal[0] + u[1] * r.normal[1]) / gn);
    }
    Ok(if alpha < ALPHA_SNAP { 0.0 } else { alpha })
}

/// `Δh·∇w + 2 ∂1h1 ∂11w + 2 ∂2h2 ∂22w + 2 (∂2h1 + ∂1h2) ∂12w` on the full
/// top face, for `w` on the plate dofs.
pub fn commutator_apply(
    h: &impl PlaneField,
    ops: &PlateOperators,
    grid: &Grid,
    w: &[f64],
) -> Vec<f64> {
    let (d1, d2) = (ops.d1.matvec(w), ops.d2.matvec(w));
    let (d11, d22, d12) = (ops.d11.matvec(w), ops.d22.matvec(w), ops.d12.matvec(w));
    (0..grid.top_count())
        .map(|t| {
            let j = h.jet(grid.top_position(t));
            let lap = j.laplacian();
            lap[0] * d1[t]
                + lap[1] * d2[t]
                + 2.0 * j.grad[0][0] * d11[t]
                + 2.0 * j.grad[1][1] * d22[t]
                + 2.0 * (j.grad[0][1] + j.grad[1][0]) * d12[t]
        })
        .collect()
}

/// Finite-difference commutator `Δ_h(h·∇_h w) - h·∇_h(Δ_h w)` on the top
/// face. Meaningful at nodes two or more cells from the rim.
pub fn commutator_two_route(
    h: &impl PlaneField,
    ops: &PlateOperators,
    grid: &Grid,
    w: &[f64],
) -> Vec<f64> {
    let lap = face_laplacian(grid);
    let [gx, gy] = face_gradient(grid);
    let hv: Vec<[f64; 2]> = (0..grid.top_count())
        .map(|t| h.value(grid.top_position(t)))
        .collect();
    let we = ops.embed.matvec(w);
    let (wx, wy) = (gx.matvec(&we), gy.matvec(&we));
    let flux: Vec<f64> = (0..hv.len())
        .map(|t| hv[t][0] * wx[t] + hv[t][1] * wy[t])
        .collect();
    let first = lap.matvec(&flux);
    let lw = ops.laplacian.matvec(w);
    let (lx, ly) = (gx.matvec(&lw), gy.matvec(&lw));
    (0..hv.len())
        .map(|t| first[t] - hv[t][0] * lx[t] - hv[t][1] * ly[t])
        .collect()
}

/// Fourth-order two-route commutator `Δ(h·∇w) - h·∇(Δw)` with central
/// five-point stencils. `w` is continued evenly across the rim. Values are
/// returned on the top face; nodes closer than two cells to the rim are zero.
pub fn commutator_two_route_fourth_order(h: &impl PlaneField, grid: &Grid, w: &[f64]) -> Vec<f64> {
    const PAD: isize = 4;
    let (nx, ny) = (grid.nx as isize, grid.ny as isize);
    let (px, py) = (nx + 2 * PAD, ny + 2 * PAD);
    let reflect = |i: isize, n: isize| -> isize {
        let last = n - 1;
        if i < 0 {
            -i
        } else if i > last {
            2 * last - i
        } else {
            i
        }
    };
    let at = |i: isize, j: isize| ((i + PAD) + px * (j + PAD)) as usize;
    let mut wp = vec![0.0; (px * py) as usize];
    for j in -PAD..ny + PAD {
        for i in -PAD..nx + PAD {
            let (ri, rj) = (reflect(i, nx), reflect(j, ny));
            if let Some(m) = grid.top_to_omega(grid.top_index(ri as usize, rj as usize)) {
                wp[at(i, j)] = w[m];
            }
        }
    }
    let (hx, hy) = (grid.hx, grid.hy);
    let d1 = |f: &[f64], i: isize, j: isize| {
        (-f[at(i + 2, j)] + 8.0 * f[at(i + 1, j)] - 8.0 * f[at(i - 1, j)] + f[at(i - 2, j)])
            / (12.0 * hx)
    };
    let d2 = |f: &[f64], i: isize, j: isize| {
        (-f[at(i, j + 2)] + 8.0 * f[at(i, j + 1)] - 8.0 * f[at(i, j - 1)] + f[at(i, j - 2)])
            / (12.0 * hy)
    };
    let lap = |f: &[f64], i: isize, j: isize| {
        let c = -30.0 * f[at(i, j)];
        (-f[at(i + 2, j)] + 16.0 * f[at(i + 1, j)] + c + 16.0 * f[at(i - 1, j)] - f[at(i - 2, j)])
            / (12.0 * hx * hx)
            + (-f[at(i, j + 2)] + 16.0 * f[at(i, j + 1)] + c + 16.0 * f[at(i, j - 1)]
                - f[at(i, j - 2)])
                / (12.0 * hy * hy)
    };
    let pos = |i: isize, j: isize| [i as f64 * hx, j as f64 * hy];
    let mut flux = vec![0.0; wp.len()];
    let mut lw = vec![0.0; wp.len()];
    for j in -2..ny + 2 {
        for i in -2..nx + 2 {
            let hv = h.value(pos(i, j));
            flux[at(i, j)] = hv[0] * d1(&wp, i, j) + hv[1] * d2(&wp, i, j);
            lw[at(i, j)] = lap(&wp, i, j);
        }
    }
    let mut out = vec![0.0; grid.top_count()];
    for j in 2..ny - 2 {
        for i in 2..nx - 2 {
            let hv = h.value(pos(i, j));
            out[grid.top_index(i as usize, j as usize)] =
                lap(&flux, i, j) - hv[0] * d1(&lw, i, j) - hv[1] * d2(&lw, i, j);
        }
    }
    out
}

/// Top-face nodes at least `depth` cells away from the rim.
pub fn deep_nodes(grid: &Grid, depth: usize) -> Vec<usize> {
    (0..grid.top_count())
        .filter(|&t| {
            let (i, j) = grid.top_ij(t);
            i >= depth && j >= depth && i + depth < grid.nx && j + depth < grid.ny
        })
        .collect()
}

/// `max |explicit - oracle| / max |oracle|` over nodes two cells from the
/// rim, against the fourth-order two-route oracle.
pub fn commutator_oracle_error(
    h: &impl PlaneField,
    ops: &PlateOperators,
    grid: &Grid,
    w: &[f64],
) -> f64 {
    let a = commutator_apply(h, ops, grid, w);
    let b = commutator_two_route_fourth_order(h, grid, w);
    relative_deep_error(grid, &a, &b)
}

fn relative_deep_error(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let nodes = deep_nodes(grid, 2);
    let diff = nodes
        .iter()
        .map(|&t| (a[t] - b[t]).abs())
        .fold(0.0, f64::max);
    let scale = nodes.iter().map(|&t| b[t].abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Clamped plate profile `sin²(pi x/lx) sin²(pi y/ly) cos(k pi x/lx) cos(l pi y/ly)`,
/// even about every edge, sampled on the plate dofs.
pub fn clamped_mode(grid: &Grid, k: usize, l: usize) -> Vec<f64> {
    let BoxDomain { lx, ly, .. } = grid.domain;
    (0..grid.omega_count())
        .map(|m| {
            let [x, y] = grid.omega_position(m);
            let (px, py) = (PI * x / lx, PI * y / ly);
            (px.sin() * py.sin()).powi(2) * (k as f64 * px).cos() * (l as f64 * py).cos()
        })
        .collect()
}

/// Random combination of clamped modes with `k, l < 4`.
pub fn random_clamped(grid: &Grid, rng: &mut impl Rng) -> Vec<f64> {
    let mut w = vec![0.0; grid.omega_count()];
    for k in 0..4 {
        for l in 0..4 {
            let c: f64 = rng.random_range(-1.0..1.0);
            for (a, b) in w.iter_mut().zip(clamped_mode(grid, k, l)) {
                *a += c * b;
            }
        }
    }
    w
}

/// Individual terms of the flux-multiplier identity
/// `-(Δ²w, h·∇w) = -(Δw, [Δ,h·∇]w) - ½∫_∂(h·ν)|Δw|² + ½∫ div h |Δw|² + ∫_∂(h·ν)|Δw|²`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct MultiplierTerms {
    pub lhs: f64,
    pub commutator: f64,
    pub divergence: f64,
    /// `∫_∂Ω (h·ν)|Δw|²`.
    pub rim_flux: f64,
    pub residual: f64,
}

impl MultiplierTerms {
    pub fn rhs(&self) -> f64 {
        -self.commutator + 0.5 * self.divergence + 0.5 * self.rim_flux
    }

    /// The `-½∫(h·ν)|Δw|²` contribution.
    pub fn half_boundary_term(&self) -> f64 {
        0.5 * self.rim_flux
    }
}

pub fn multiplier_identity(
    h: &impl PlaneField,
    ops: &PlateOperators,
    grid: &Grid,
    w: &[f64],
) -> MultiplierTerms {
    let hw = grid.omega_weight();
    let [h1, h2] = on_plate(h, grid);
    let flux: Vec<f64> = ops.directional([&h1, &h2]).matvec(w);
    let lhs = -hw * linalg::dot(&ops.biharmonic.matvec(w), &flux);
    let lw = ops.laplacian.matvec(w);
    let comm = commutator_apply(h, ops, grid, w);
    let tw = grid.top_weights();
    let mut commutator = 0.0;
    let mut divergence = 0.0;
    for t in 0..grid.top_count() {
        commutator += tw[t] * lw[t] * comm[t];
        divergence += tw[t] * h.jet(grid.top_position(t)).divergence() * lw[t] * lw[t];
    }
    let rim_flux = grid
        .rim_quadrature()
        .iter()
        .map(|r| {
            let hv = h.value(grid.top_position(r.top));
            r.weight * (hv[0] * r.normal[0] + hv[1] * r.normal[1]) * lw[r.top] * lw[r.top]
        })
        .sum();
    let mut terms = MultiplierTerms {
        lhs,
        commutator,
        divergence,
        rim_flux,
        residual: 0.0,
    };
    terms.residual = (terms.lhs - terms.rhs()).abs();
    terms
}

/// Largest `‖[Δ,h·∇]w‖ / ‖Δw‖` over random clamped samples.
pub fn commutator_bound_constant(
    h: &impl PlaneField,
    grid: &Grid,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples < 20 {
        return Err(Error::Precondition(format!(
            "{samples} samples given, at least 20 required"
        )));
    }
    let ops = PlateOperators::new(grid);
    let tw = grid.top_weights();
    let norm = |f: &[f64]| {
        f.iter()
            .zip(&tw)
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let w = random_clamped(grid, &mut rng);
        let d = norm(&ops.laplacian.matvec(&w));
        if d > 0.0 {
            best = best.max(norm(&commutator_apply(h, &ops, grid, &w)) / d);
        }
    }
    Ok(best)
}

/// Grid with `n × n` top-face nodes and the minimum vertical depth.
pub fn plate_grid(domain: BoxDomain, n: usize) -> Result<Grid> {
    Grid::new(domain, [n, n, crate::grid::MIN_NODES])
}
