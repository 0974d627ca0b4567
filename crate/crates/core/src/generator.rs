//! Discrete semigroup generator, its shifted form, the weighted Gram matrix
//! and the ε calibration.
//!
//! Reduced unknowns are `[p | u_free | w | v]`. Normal velocity components on
//! the rigid walls are eliminated (set to zero) and the vertical velocity on
//! the top face is eliminated through the kinematic condition
//! `u3 = v + U·∇w` on plate nodes (zero on the rim). The eliminated top-face
//! components carry no quadrature weight, so the discrete energy balance is
//! exact.

use std::ops::Range;

use faer::Mat;
use serde::Serialize;

use crate::ambient::AmbientFlow;
use crate::diffops::{
    ambient_field, viscous_stiffness, Closure, Derivatives, FluidParams, PlateOperators,
    VectorField,
};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harmonic::DirichletSolver;
use crate::linalg::{self, sparse_cholesky_succeeds};
use crate::plate::{alpha_min, on_plate, FluxField, NormalExtension};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GeneratorOptions {
    /// Add `-(div U) p` to the pressure row and `-(∇U) u - (U·∇U) p` to the velocity row.
    pub include_lower_order: bool,
}

/// Block offsets of the reduced state vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Layout {
    pub n_p: usize,
    pub n_u: usize,
    pub n_w: usize,
}

impl Layout {
    pub fn dim(&self) -> usize {
        self.n_p + self.n_u + 2 * self.n_w
    }

    pub fn p(&self) -> Range<usize> {
        0..self.n_p
    }

    pub fn u(&self) -> Range<usize> {
        self.n_p..self.n_p + self.n_u
    }

    pub fn w(&self) -> Range<usize> {
        let s = self.n_p + self.n_u;
        s..s + self.n_w
    }

    pub fn v(&self) -> Range<usize> {
        let s = self.n_p + self.n_u + self.n_w;
        s..s + self.n_w
    }
}

/// Fluid-side building blocks shared by the generator, the Gram matrix and
/// the resolvent.
#[derive(Clone, Debug)]
pub struct FluidBlocks {
    /// Viscous stiffness on full velocities (3N x 3N, component-major).
    pub kv: CsrMatrix,
    /// Summation-by-parts divergence (N x 3N).
    pub div: CsrMatrix,
    /// Scalar advection `U·∇` (N x N).
    pub adv: CsrMatrix,
    /// Component-wise advection on full velocities (3N x 3N).
    pub adv3: CsrMatrix,
    /// Volume weights per node.
    pub hn: Vec<f64>,
    /// Volume weights per free velocity unknown.
    pub hf: Vec<f64>,
    /// Free velocity unknowns into full velocities (3N x Nf).
    pub pf: CsrMatrix,
    /// Top-face vertical velocity datum on plate dofs into full velocities (3N x NΩ).
    pub pc: CsrMatrix,
    /// `U1 ∂1 + U2 ∂2` on plate dofs.
    pub cw: CsrMatrix,
    /// Nodal `div U`.
    pub div_u: Vec<f64>,
    /// `(∇U) u` on full velocities.
    pub low_u: CsrMatrix,
    /// `(U·∇U) p` from pressure into full velocities.
    pub low_p: CsrMatrix,
    /// Plate quadrature weight.
    pub h_omega: f64,
}

#[derive(Clone, Debug)]
pub struct Generator {
    pub grid: Grid,
    pub flow: AmbientFlow,
    pub params: FluidParams,
    pub options: GeneratorOptions,
    pub layout: Layout,
    /// Flattened (component-major) indices of the free velocity unknowns.
    pub free: Vec<usize>,
    pub blocks: FluidBlocks,
    pub plate: PlateOperators,
    /// Full velocity as a function of the reduced state (3N x dim).
    pub velocity_map: CsrMatrix,
    pub a: CsrMatrix,
}

fn is_eliminated(grid: &Grid, comp: usize, node: usize) -> bool {
    let (i, j, k) = grid.ijk(node);
    match comp {
        0 => i == 0 || i == grid.nx - 1,
        1 => j == 0 || j == grid.ny - 1,
        _ => k == 0 || k == grid.nz - 1,
    }
}

impl Generator {
    pub fn assemble(
        grid: &Grid,
        flow: &AmbientFlow,
        params: &FluidParams,
        options: GeneratorOptions,
    ) -> Result<Self> {
        if flow.domain != grid.domain {
            return Err(Error::GridMismatch(
                "ambient flow and grid use different boxes".into(),
            ));
        }
        let n = grid.num_nodes();
        let nw = grid.omega_count();
        let free: Vec<usize> = (0..3 * n)
            .filter(|&f| !is_eliminated(grid, f / n, f % n))
            .collect();
        let nf = free.len();
        let layout = Layout {
            n_p: n,
            n_u: nf,
            n_w: nw,
        };

        let ders = Derivatives::new(grid, Closure::Summation);
        let hn = grid.volume_weights().to_vec();
        let hf: Vec<f64> = free.iter().map(|&f| hn[f % n]).collect();
        if hf.iter().any(|&w| w <= 0.0) {
            return Err(Error::Assembly(
                "non-positive quadrature weight on a free velocity unknown".into(),
            ));
        }
        let pf = CsrMatrix::selection(&free, 3 * n).transpose();
        let mut pc = TripletBuilder::new(3 * n, nw);
        for m in 0..nw {
            pc.push(2 * n + grid.omega_to_node(m), m, 1.0);
        }
        let pc = pc.build();

        let plate = PlateOperators::new(grid);
        let us = ambient_field(grid, flow);
        let trace = on_plate(&FluxField::new(*flow, 0.0), grid);
        let cw = plate.directional([&trace[0], &trace[1]]);

        let adv = ders.d[0]
            .scale_rows(&us[0])
            .add(&ders.d[1].scale_rows(&us[1]))
            .add(&ders.d[2].scale_rows(&us[2]));
        let mut adv3 = TripletBuilder::new(3 * n, 3 * n);
        let mut div = TripletBuilder::new(n, 3 * n);
        for c in 0..3 {
            adv3.push_block(c * n, c * n, &adv, 1.0);
            div.push_block(0, c * n, &ders.d[c], 1.0);
        }
        let (adv3, div) = (adv3.build(), div.build());

        let positions: Vec<[f64; 3]> = (0..n).map(|k| grid.position(k)).collect();
        let div_u: Vec<f64> = positions.iter().map(|&x| flow.divergence(x)).collect();
        let mut low_u = TripletBuilder::new(3 * n, 3 * n);
        let mut low_p = TripletBuilder::new(3 * n, n);
        for (k, &x) in positions.iter().enumerate() {
            let g = flow.gradient(x);
            let s = flow.self_advection(x);
            for i in 0..3 {
                for j in 0..3 {
                    low_u.push(i * n + k, j * n + k, g[i][j]);
                }
                low_p.push(i * n + k, k, s[i]);
            }
        }

        let blocks = FluidBlocks {
            kv: viscous_stiffness(grid, params),
            div,
            adv,
            adv3,
            hn,
            hf,
            pf,
            pc,
            cw,
            div_u,
            low_u: low_u.build(),
            low_p: low_p.build(),
            h_omega: grid.omega_weight(),
        };

        let velocity_map = {
            let mut b = TripletBuilder::new(3 * n, layout.dim());
            b.push_block(0, layout.u().start, &blocks.pf, 1.0);
            b.push_block(0, layout.w().start, &blocks.pc.matmul(&blocks.cw), 1.0);
            b.push_block(0, layout.v().start, &blocks.pc, 1.0);
            b.build()
        };
        let mut gen = Self {
            grid: grid.clone(),
            flow: *flow,
            params: *params,
            options,
            layout,
            free,
            blocks,
            plate,
            velocity_map,
            a: CsrMatrix::zeros(0, 0),
        };
        gen.a = gen.build_a();
        Ok(gen)
    }

    /// Pressure selector (N x dim).
    pub fn pressure_map(&self) -> CsrMatrix {
        let l = self.layout;
        CsrMatrix::selection(&l.p().collect::<Vec<_>>(), l.dim())
    }

    /// `-K u + Divᵀ H p` as a map from the reduced state to full velocity forces.
    pub fn force_map(&self) -> CsrMatrix {
        let b = &self.blocks;
        let grad_t = b.div.transpose().scale_cols(&b.hn);
        b.kv.matmul(&self.velocity_map)
            .scaled(-1.0)
            .add(&grad_t.matmul(&self.pressure_map()))
    }

    fn build_a(&self) -> CsrMatrix {
        let l = self.layout;
        let b = &self.blocks;
        let (n, nw) = (l.n_p, l.n_w);
        let sp = self.pressure_map();
        let uy = &self.velocity_map;
        let force = self.force_map();
        let free_rows = b.pf.transpose();

        let mut p_row = b.adv.matmul(&sp).add(&b.div.matmul(uy)).scaled(-1.0);
        let inv_hf: Vec<f64> = b.hf.iter().map(|w| 1.0 / w).collect();
        let mut u_row = free_rows
            .matmul(&force)
            .scale_rows(&inv_hf)
            .sub(&free_rows.matmul(&b.adv3).matmul(uy));
        if self.options.include_lower_order {
            p_row = p_row.sub(&sp.scale_rows(&b.div_u));
            let low = b.low_u.matmul(uy).add(&b.low_p.matmul(&sp));
            u_row = u_row.sub(&free_rows.matmul(&low));
        }
        let v_row = b.pc.transpose().matmul(&force).scaled(1.0 / b.h_omega);

        let mut t = TripletBuilder::new(l.dim(), l.dim());
        t.push_block(0, 0, &p_row, 1.0);
        t.push_block(n, 0, &u_row, 1.0);
        for k in 0..l.n_u {
            t.push(n + k, n + k, -self.params.eta);
        }
        for m in 0..nw {
            t.push(l.w().start + m, l.v().start + m, 1.0);
        }
        t.push_block(l.v().start, 0, &v_row, 1.0);
        t.push_block(l.v().start, l.w().start, &self.plate.biharmonic, -1.0);
        t.build()
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Diagonal of `A - Â(ε)`: `½ div U + ε` on pressure and velocity, `ε` on the plate.
    pub fn shift_diagonal(&self, eps: f64) -> Vec<f64> {
        let l = self.layout;
        let n = l.n_p;
        let mut d = vec![eps; l.dim()];
        for k in 0..n {
            d[k] += 0.5 * self.blocks.div_u[k];
        }
        for (k, &f) in self.free.iter().enumerate() {
            d[n + k] += 0.5 * self.blocks.div_u[f % n];
        }
        d
    }

    /// Shifted generator `Â(ε)`.
    pub fn ahat(&self, eps: f64) -> CsrMatrix {
        self.a.sub(&CsrMatrix::diagonal(&self.shift_diagonal(eps)))
    }

    /// Full velocity field of a reduced state.
    pub fn velocity(&self, y: &[f64]) -> VectorField {
        let u = self.velocity_map.matvec(y);
        let n = self.layout.n_p;
        [u[..n].to_vec(), u[n..2 * n].to_vec(), u[2 * n..].to_vec()]
    }

    /// `‖u3|_Ω - v - U·∇w‖` in the plate `L²` norm and the plate norm of `u3|_Ω`,
    /// with `U·∇w` recomputed from the ambient samples.
    pub fn coupling_residual(&self, y: &[f64]) -> (f64, f64) {
        let l = self.layout;
        let u = self.velocity(y);
        let (w, v) = (&y[l.w()], &y[l.v()]);
        let gx = self.plate.grad[0].matvec(w);
        let gy = self.plate.grad[1].matvec(w);
        let hw = self.blocks.h_omega;
        let (mut r, mut s) = (0.0, 0.0);
        for m in 0..l.n_w {
            let [x1, x2] = self.grid.omega_position(m);
            let ub = self.flow.velocity([x1, x2, 0.0]);
            let u3 = u[2][self.grid.omega_to_node(m)];
            let e = u3 - v[m] - ub[0] * gx[m] - ub[1] * gy[m];
            r += hw * e * e;
            s += hw * u3 * u3;
        }
        (r.sqrt(), s.sqrt())
    }

    /// Reduced state from full fields; the velocity must satisfy the wall and
    /// coupling conditions.
    pub fn reduce(&self, p: &[f64], u: &VectorField, w: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout;
        let n = l.n_p;
        if p.len() != n || u.iter().any(|c| c.len() != n) || w.len() != l.n_w || v.len() != l.n_w {
            return Err(Error::GridMismatch(
                "state fields do not match the grid".into(),
            ));
        }
        let mut y = vec![0.0; l.dim()];
        y[l.p()].copy_from_slice(p);
        for (k, &f) in self.free.iter().enumerate() {
            y[n + k] = u[f / n][f % n];
        }
        y[l.w()].copy_from_slice(w);
        y[l.v()].copy_from_slice(v);
        let back = self.velocity(&y);
        let scale = u.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
        let err = (0..3)
            .flat_map(|c| (0..n).map(move |k| (c, k)))
            .map(|(c, k)| (back[c][k] - u[c][k]).abs())
            .fold(0.0, f64::max);
        if err > 1e-10 * scale {
            return Err(Error::Precondition(format!(
                "velocity violates the wall or coupling conditions (max defect {err:.3e})"
            )));
        }
        Ok(y)
    }

    /// Plate-face traction `HΩ⁻¹ P_cᵀ(-K u + Divᵀ H p)` for full fields.
    pub fn plate_traction(&self, p: &[f64], u: &VectorField) -> Vec<f64> {
        let b = &self.blocks;
        let uf = crate::diffops::flatten(u);
        let mut f = b.kv.matvec(&uf);
        f.iter_mut().for_each(|x| *x = -*x);
        let hp: Vec<f64> = p.iter().zip(&b.hn).map(|(a, w)| a * w).collect();
        b.div.transpose().matvec_acc(&hp, 1.0, &mut f);
        b.pc.transpose()
            .matvec(&f)
            .iter()
            .map(|x| x / b.h_omega)
            .collect()
    }
}

/// Weighted inner product `yᵀ M y` with `M = Tᵀ Q T`.
#[derive(Clone, Debug)]
pub struct Gram {
    pub alpha: f64,
    pub m: CsrMatrix,
    pub t: CsrMatrix,
    pub q: Vec<f64>,
}

impl Gram {
    pub fn norm(&self, y: &[f64]) -> f64 {
        linalg::m_norm(&self.m, y)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        linalg::dot(a, &self.m.matvec(b))
    }
}

fn gram_from_map(t: CsrMatrix, q: Vec<f64>, alpha: f64) -> Result<Gram> {
    let m = t.transpose().scale_cols(&q).matmul(&t).symmetric_part();
    if !sparse_cholesky_succeeds(&m)? {
        let detail = if m.nrows() <= DENSE_LIMIT {
            let ev = linalg::sym_eigenvalues(&m.to_dense())?;
            format!("smallest eigenvalue {:.3e}", ev[0])
        } else {
            "Cholesky factorization failed".to_string()
        };
        return Err(Error::Assembly(format!(
            "Gram matrix is not positive definite: {detail}"
        )));
    }
    Ok(Gram { alpha, m, t, q })
}

/// Gram matrix of `(p, p) + (u - αD(g·∇w)e3, ·) + (Δw, Δw) + (v + h_α·∇w, ·)`.
pub fn assemble_gram(
    gen: &Generator,
    alpha: f64,
    dirichlet: Option<&DirichletSolver>,
) -> Result<Gram> {
    let ext = NormalExtension::new(&gen.grid.domain);
    let floor = alpha_min(&gen.flow, &ext, &gen.grid)?;
    if alpha < floor {
        return Err(Error::Precondition(format!(
            "α = {alpha} is below the threshold {floor}"
        )));
    }
    let l = gen.layout;
    let grid = &gen.grid;
    let (n, nw, nt) = (l.n_p, l.n_w, grid.top_count());
    let ops = &gen.plate;
    let flux = FluxField::new(gen.flow, alpha);
    let h = on_plate(&flux, grid);
    let ch = ops.directional([&h[0], &h[1]]);

    let rows = n + l.n_u + nt + nw;
    let mut t = TripletBuilder::new(rows, l.dim());
    for k in 0..n {
        t.push(k, k, 1.0);
    }
    for k in 0..l.n_u {
        t.push(n + k, n + k, 1.0);
    }
    if alpha > 0.0 {
        let solver = dirichlet
            .ok_or_else(|| Error::Precondition("α > 0 requires a Dirichlet solver".into()))?;
        if !solver.grid().same_shape(grid) {
            return Err(Error::GridMismatch(
                "Dirichlet solver grid differs from the generator grid".into(),
            ));
        }
        let g = on_plate(&ext, grid);
        let cg = ops.directional([&g[0], &g[1]]).to_dense();
        let dcg: Mat<f64> = &solver.extension_matrix()? * &cg;
        for (k, &f) in gen.free.iter().enumerate() {
            if f / n == 2 {
                for m in 0..nw {
                    let val = dcg[(f % n, m)];
                    if val != 0.0 {
                        t.push(n + k, l.w().start + m, -alpha * val);
                    }
                }
            }
        }
    }
    let r0 = n + l.n_u;
    t.push_block(r0, l.w().start, &ops.laplacian, 1.0);
    let r1 = r0 + nt;
    for m in 0..nw {
        t.push(r1 + m, l.v().start + m, 1.0);
    }
    t.push_block(r1, l.w().start, &ch, 1.0);

    let mut q = gen.blocks.hn.clone();
    q.extend_from_slice(&gen.blocks.hf);
    q.extend(grid.top_weights());
    q.extend(std::iter::repeat_n(gen.blocks.h_omega, nw));
    gram_from_map(t.build(), q, alpha)
}

/// Gram matrix of the standard norm `‖p‖² + ‖u‖² + ‖Δw‖² + ‖v‖²`.
pub fn standard_gram(gen: &Generator) -> Result<Gram> {
    let l = gen.layout;
    let grid = &gen.grid;
    let (n, nw, nt) = (l.n_p, l.n_w, grid.top_count());
    let mut t = TripletBuilder::new(n + l.n_u + nt + nw, l.dim());
    for k in 0..n + l.n_u {
        t.push(k, k, 1.0);
    }
    t.push_block(n + l.n_u, l.w().start, &gen.plate.laplacian, 1.0);
    for m in 0..nw {
        t.push(n + l.n_u + nt + m, l.v().start + m, 1.0);
    }
    let mut q = gen.blocks.hn.clone();
    q.extend_from_slice(&gen.blocks.hf);
    q.extend(grid.top_weights());
    q.extend(std::iter::repeat_n(gen.blocks.h_omega, nw));
    gram_from_map(t.build(), q, 0.0)
}

/// `yᵀ M Â(ε) y`.
pub fn dissipation_rate(gen: &Generator, gram: &Gram, eps: f64, y: &[f64]) -> f64 {
    let ay = gen.ahat(eps).matvec(y);
    gram.inner(y, &ay)
}

/// Symmetric part of `M Â(0)`.
pub fn symmetric_rate_matrix(gen: &Generator, gram: &Gram) -> CsrMatrix {
    gram.m.matmul(&gen.ahat(0.0)).symmetric_part()
}

/// Largest system size handled with dense eigen-decompositions.
pub const DENSE_LIMIT: usize = 3000;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CalibrationOptions {
    pub cap: f64,
    pub resolution: f64,
    /// Relative tolerance multiplying the matrix scale.
    pub relative_tol: f64,
    pub dense_limit: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            cap: 1e6,
            resolution: 1e-3,
            relative_tol: 1e-10,
            dense_limit: DENSE_LIMIT,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    /// Generalized symmetric eigenvalues of `(sym(M Â), M)`.
    Eigenvalue,
    /// Sparse Cholesky of `(ε + tol) M - sym(M Â(0))`.
    Cholesky,
}

#[derive(Clone, Debug, Serialize)]
pub struct Calibration {
    pub epsilon: f64,
    pub kind: CertificateKind,
    /// `‖diag(M)^{-1/2} sym(M Â(0)) diag(M)^{-1/2}‖∞`.
    pub scale: f64,
    pub tol: f64,
    /// M-relative spectral abscissa at ε = 0 (eigenvalue certificates only).
    pub abscissa_at_zero: Option<f64>,
    /// M-relative spectral abscissa at the calibrated ε (eigenvalue certificates only).
    pub abscissa: Option<f64>,
    /// `(ε, passes)` for every probe of the search.
    pub probes: Vec<(f64, bool)>,
}

impl Calibration {
    /// `(ε, abscissa)` samples; the abscissa is `λ(0) - ε` exactly because
    /// `sym(M Â(ε)) = sym(M Â(0)) - ε M`.
    pub fn curve(&self, eps: &[f64]) -> Option<Vec<(f64, f64)>> {
        self.abscissa_at_zero
            .map(|l0| eps.iter().map(|&e| (e, l0 - e)).collect())
    }
}

fn matrix_scale(s0: &CsrMatrix, m: &CsrMatrix) -> f64 {
    let d: Vec<f64> = (0..m.nrows()).map(|i| 1.0 / m.get(i, i).sqrt()).collect();
    s0.scale_rows(&d).scale_cols(&d).norm_inf()
}

/// M-relative spectral abscissa `λmax(sym(M Â(ε)), M)` by dense eigensolve.
pub fn spectral_abscissa(gen: &Generator, gram: &Gram, eps: f64) -> Result<f64> {
    let s = gram.m.matmul(&gen.ahat(eps)).symmetric_part();
    let ev = linalg::generalized_eigenvalues(&s.to_dense(), &gram.m.to_dense())?;
    Ok(*ev.last().unwrap_or(&0.0))
}

/// Smallest ε (to `resolution`) with M-relative spectral abscissa `≤ tol`.
pub fn calibrate_epsilon(
    gen: &Generator,
    gram: &Gram,
    opts: &CalibrationOptions,
) -> Result<Calibration> {
    let s0 = symmetric_rate_matrix(gen, gram);
    let scale = matrix_scale(&s0, &gram.m);
    let tol = opts.relative_tol * scale;
    let dense = gen.dim() <= opts.dense_limit;
    let l0 = if dense {
        Some(
            *linalg::generalized_eigenvalues(&s0.to_dense(), &gram.m.to_dense())?
                .last()
                .unwrap_or(&0.0),
        )
    } else {
        None
    };
    let passes = |eps: f64| -> Result<bool> {
        match l0 {
            Some(l) => Ok(l - eps <= tol),
            None => sparse_cholesky_succeeds(&gram.m.scaled(eps + tol).sub(&s0)),
        }
    };
    let mut probes = Vec::new();
    let check = |eps: f64, probes: &mut Vec<(f64, bool)>| -> Result<bool> {
        let ok = passes(eps)?;
        probes.push((eps, ok));
        Ok(ok)
    };
    let epsilon = if check(0.0, &mut probes)? {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = opts.resolution.max(1e-3);
        while !check(hi, &mut probes)? {
            lo = hi;
            hi *= 2.0;
            if hi > opts.cap {
                return Err(Error::Calibration(format!(
                    "no ε ≤ {:.1e} makes the generator dissipative; abscissa at 0 = {}",
                    opts.cap,
                    l0.map_or("unknown".into(), |l| format!("{l:.6e}"))
                )));
            }
        }
        while hi - lo > opts.resolution {
            let mid = 0.5 * (lo + hi);
            if check(mid, &mut probes)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    Ok(Calibration {
        epsilon,
        kind: if dense {
            CertificateKind::Eigenvalue
        } else {
            CertificateKind::Cholesky
        },
        scale,
        tol,
        abscissa_at_zero: l0,
        abscissa: l0.map(|l| l - epsilon),
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::VerticalProfile;
    use crate::diffops::{sample_vector, strain_of, stress_of, tensor_contract};
    use crate::grid::BoxDomain;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn build(n: usize, flow: AmbientFlow, lower: bool) -> Generator {
        let g = Grid::cube(n).unwrap();
        Generator::assemble(
            &g,
            &flow,
            &FluidParams::default(),
            GeneratorOptions {
                include_lower_order: lower,
            },
        )
        .unwrap()
    }

    fn random_state(gen: &Generator, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..gen.dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect()
    }

    #[test]
    fn layout_counts() {
        let gen = build(6, AmbientFlow::zero(BoxDomain::unit()), false);
        let n = 216;
        // u1 and u2 lose two faces of 36 nodes each, u3 loses top and bottom.
        assert_eq!(gen.layout.n_u, 3 * n - 3 * 72);
        assert_eq!(gen.dim(), n + gen.layout.n_u + 2 * 16);
    }

    #[test]
    fn elimination_reproduces_coupling_exactly() {
        let d = BoxDomain::unit();
        let gen = build(
            7,
            AmbientFlow::swirl(d, 1.3, VerticalProfile::Cosine),
            false,
        );
        for seed in 0..5 {
            let y = random_state(&gen, seed);
            let (r, s) = gen.coupling_residual(&y);
            assert!(r <= 1e-14 * s.max(1.0), "{r} {s}");
        }
    }

    #[test]
    fn wall_normal_velocity_vanishes() {
        let gen = build(6, AmbientFlow::channel(BoxDomain::unit(), 1.0), false);
        let u = gen.velocity(&random_state(&gen, 4));
        for node in gen.grid.boundary_nodes() {
            for f in gen.grid.faces_of(node) {
                if f != crate::grid::Face::Top {
                    assert_eq!(u[f.axis()][node], 0.0);
                }
            }
        }
        // Rim nodes carry no vertical velocity.
        for t in 0..gen.grid.top_count() {
            if gen.grid.is_rim(t) {
                assert_eq!(u[2][gen.grid.top_to_node(t)], 0.0);
            }
        }
    }

    #[test]
    fn lower_order_toggle_is_inert_without_flow() {
        let d = BoxDomain::unit();
        let a = build(6, AmbientFlow::zero(d), false);
        let b = build(6, AmbientFlow::zero(d), true);
        assert_eq!(a.a.sub(&b.a).max_abs(), 0.0);
        let c = build(6, AmbientFlow::channel(d, 1.0), false);
        let e = build(6, AmbientFlow::channel(d, 1.0), true);
        assert!(c.a.sub(&e.a).max_abs() > 0.0);
    }

    #[test]
    fn plate_rows_reproduce_biharmonic() {
        let gen = build(7, AmbientFlow::zero(BoxDomain::unit()), false);
        let l = gen.layout;
        let mut y = vec![0.0; l.dim()];
        let w = crate::plate::clamped_mode(&gen.grid, 1, 0);
        y[l.w()].copy_from_slice(&w);
        let ay = gen.a.matvec(&y);
        let bw = gen.plate.biharmonic.matvec(&w);
        let aay = gen.a.matvec(&ay);
        for m in 0..l.n_w {
            assert!((ay[l.v().start + m] + bw[m]).abs() < 1e-9 * bw[m].abs().max(1.0));
            assert!((aay[l.w().start + m] + bw[m]).abs() < 1e-9 * bw[m].abs().max(1.0));
        }
        assert!(ay[..l.w().start].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn perturbation_is_block_diagonal() {
        let d = BoxDomain::unit();
        let gen = build(6, AmbientFlow::channel(d, 1.0), true);
        let eps = 0.37;
        let diff = gen.a.sub(&gen.ahat(eps));
        let l = gen.layout;
        for (i, j, v) in diff.iter().filter(|e| e.2 != 0.0) {
            assert_eq!(i, j);
            if l.w().contains(&i) || l.v().contains(&i) {
                assert!((v - eps).abs() < 1e-15);
            } else {
                let node = if i < l.n_p {
                    i
                } else {
                    gen.free[i - l.n_p] % l.n_p
                };
                assert!((v - eps - 0.5 * gen.blocks.div_u[node]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn traction_row_is_consistent() {
        let d = BoxDomain::unit();
        let params = FluidParams::default();
        let err = |n: usize| {
            let g = Grid::cube(n).unwrap();
            let gen = Generator::assemble(
                &g,
                &AmbientFlow::zero(d),
                &params,
                GeneratorOptions::default(),
            )
            .unwrap();
            let p: Vec<f64> = (0..g.num_nodes())
                .map(|k| {
                    let x = g.position(k);
                    (PI * x[0]).cos() * (PI * x[1]).cos() + x[2]
                })
                .collect();
            let u = sample_vector(&g, |x| {
                [
                    (PI * x[0]).sin() * x[2],
                    (PI * x[1]).sin() * x[2] * x[2],
                    x[2] * (x[2] + 1.0),
                ]
            });
            let tr = gen.plate_traction(&p, &u);
            (0..g.omega_count())
                .map(|m| {
                    let [x, y] = g.omega_position(m);
                    // p - 2ν ∂3u3 - λ div u at x3 = 0, where ∂3u3 = div u = 1.
                    let exact = (PI * x).cos() * (PI * y).cos() - 2.0 * params.nu - params.lambda;
                    (tr[m] - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (a, b) = (err(9), err(17));
        assert!(a / b >= 1.8, "{a} {b}");
    }

    #[test]
    fn gram_reduces_to_standard_without_flow() {
        let gen = build(6, AmbientFlow::zero(BoxDomain::unit()), false);
        let m = assemble_gram(&gen, 0.0, None).unwrap();
        let s = standard_gram(&gen).unwrap();
        assert!(m.m.sub(&s.m).max_abs() <= 1e-14 * s.m.max_abs());
    }

    #[test]
    fn gram_without_plate_displacement_is_plain_energy() {
        let d = BoxDomain::unit();
        let gen = build(6, AmbientFlow::channel(d, 1.0), false);
        let solver = DirichletSolver::new(&gen.grid).unwrap();
        let gram = assemble_gram(&gen, 0.6, Some(&solver)).unwrap();
        let l = gen.layout;
        let mut y = random_state(&gen, 9);
        y[l.w()].iter_mut().for_each(|v| *v = 0.0);
        let (p, u, v) = (&y[l.p()], &y[l.u()], &y[l.v()]);
        let e: f64 = p
            .iter()
            .zip(&gen.blocks.hn)
            .map(|(a, w)| w * a * a)
            .sum::<f64>()
            + u.iter()
                .zip(&gen.blocks.hf)
                .map(|(a, w)| w * a * a)
                .sum::<f64>()
            + v.iter().map(|a| gen.blocks.h_omega * a * a).sum::<f64>();
        assert!((gram.norm(&y).powi(2) - e).abs() < 1e-12 * e);
    }

    #[test]
    fn modified_norm_is_equivalent_to_standard_norm() {
        let d = BoxDomain::unit();
        let gen = build(7, AmbientFlow::channel(d, 1.0), false);
        let solver = DirichletSolver::new(&gen.grid).unwrap();
        let gram = assemble_gram(&gen, 0.5, Some(&solver)).unwrap();
        let std = standard_gram(&gen).unwrap();
        let ev = linalg::generalized_eigenvalues(&gram.m.to_dense(), &std.m.to_dense()).unwrap();
        let (lo, hi) = (ev[0], *ev.last().unwrap());
        assert!(lo > 0.0 && hi.is_finite());
        for seed in 0..100 {
            let y = random_state(&gen, seed);
            let r = gram.norm(&y).powi(2) / std.norm(&y).powi(2);
            assert!(r >= lo * (1.0 - 1e-10) && r <= hi * (1.0 + 1e-10));
        }
        assert!(gram.m.sub(&gram.m.transpose()).max_abs() == 0.0);
    }

    #[test]
    fn gram_rejects_alpha_below_threshold_and_missing_solver() {
        let gen = build(6, AmbientFlow::zero(BoxDomain::unit()), false);
        assert!(matches!(
            assemble_gram(&gen, -0.1, None),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            assemble_gram(&gen, 0.5, None),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn plate_block_is_conservative() {
        let gen = build(6, AmbientFlow::zero(BoxDomain::unit()), false);
        let gram = assemble_gram(&gen, 0.0, None).unwrap();
        let l = gen.layout;
        let mut y = vec![0.0; l.dim()];
        let z = random_state(&gen, 2);
        y[l.w()].copy_from_slice(&z[l.w()]);
        let scale = gram.norm(&y).powi(2) * gen.a.max_abs();
        // v = 0 keeps the fluid at rest, so the rate is exactly the skew plate pairing.
        assert!(dissipation_rate(&gen, &gram, 0.0, &y).abs() <= 1e-12 * scale);
    }

    #[test]
    fn fluid_dissipation_matches_stress_form() {
        let d = BoxDomain::unit();
        let params = FluidParams::default();
        let rate = |n: usize| {
            let g = Grid::cube(n).unwrap();
            let gen = Generator::assemble(
                &g,
                &AmbientFlow::zero(d),
                &params,
                GeneratorOptions::default(),
            )
            .unwrap();
            let gram = assemble_gram(&gen, 0.0, None).unwrap();
            let field = |x: [f64; 3]| -> [f64; 3] {
                [
                    (PI * x[0]).sin() * (PI * x[2]).cos(),
                    0.5 * (PI * x[1]).sin() * x[0],
                    (PI * x[2]).sin() * x[1],
                ]
            };
            let u = sample_vector(&g, field);
            let y = gen
                .reduce(
                    &vec![0.0; g.num_nodes()],
                    &u,
                    &vec![0.0; g.omega_count()],
                    &vec![0.0; g.omega_count()],
                )
                .unwrap();
            let r = dissipation_rate(&gen, &gram, 0.0, &y);
            let uf = crate::diffops::flatten(&u);
            let exact_discrete = -linalg::dot(&uf, &gen.blocks.kv.matvec(&uf))
                - params.eta
                    * y[gen.layout.u()]
                        .iter()
                        .zip(&gen.blocks.hf)
                        .map(|(a, w)| w * a * a)
                        .sum::<f64>();
            assert!((r - exact_discrete).abs() <= 1e-10 * r.abs());
            // Quadrature of the continuous form with analytic gradients.
            let grad = |x: [f64; 3]| -> [[f64; 3]; 3] {
                let (s0, c0) = (PI * x[0]).sin_cos();
                let (s1, c1) = (PI * x[1]).sin_cos();
                let (s2, c2) = (PI * x[2]).sin_cos();
                [
                    [PI * c0 * c2, 0.0, -PI * s0 * s2],
                    [0.5 * s1, 0.5 * PI * c1 * x[0], 0.0],
                    [0.0, s2, PI * c2 * x[1]],
                ]
            };
            let cont: f64 = (0..g.num_nodes())
                .map(|k| {
                    let x = g.position(k);
                    let e = strain_of(&grad(x));
                    let f = field(x);
                    g.volume_weights()[k]
                        * (tensor_contract(&stress_of(&e, &params), &e)
                            + params.eta * (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]))
                })
                .sum();
            (r + cont).abs() / cont
        };
        let (a, b) = (rate(9), rate(17));
        assert!(b < 2e-2 && a / b > 1.8, "{a} {b}");
    }

    #[test]
    fn rate_matches_exponential_differencing() {
        let d = BoxDomain::unit();
        let gen = build(5, AmbientFlow::channel(d, 0.5), false);
        let gram = assemble_gram(&gen, 0.0, None).unwrap();
        let eps = 0.2;
        let ah = gen.ahat(eps).to_dense();
        let m = gram.m.to_dense();
        let l = gen.layout;
        // Smooth state: low-frequency content keeps the differencing error small.
        let mut y = vec![0.0; l.dim()];
        for k in 0..l.n_p {
            let x = gen.grid.position(k);
            y[k] = (PI * x[0]).cos() * (PI * x[2]).cos();
        }
        y[l.w()].copy_from_slice(&crate::plate::clamped_mode(&gen.grid, 0, 0));
        let yv = linalg::vec_to_col(&y);
        let energy = |t: f64| -> f64 {
            let e = linalg::expm(&linalg::scaled(&ah, t)).unwrap();
            let z = &e * &yv;
            (z.transpose() * &m * &z)[(0, 0)] * 0.5
        };
        let dt = 1e-6;
        let fd = (energy(dt) - energy(-dt)) / (2.0 * dt);
        let r = dissipation_rate(&gen, &gram, eps, &y);
        assert!((fd - r).abs() <= 1e-6 * r.abs(), "{fd} {r}");
    }

    #[test]
    fn pressure_velocity_coupling_is_skew() {
        let gen = build(6, AmbientFlow::channel(BoxDomain::unit(), 1.0), false);
        let gram = assemble_gram(&gen, 0.0, None).unwrap();
        let s = symmetric_rate_matrix(&gen, &gram);
        let l = gen.layout;
        let pu = s.block(l.p(), l.u());
        assert!(pu.max_abs() <= 1e-13 * s.max_abs(), "{}", pu.max_abs());
    }

    #[test]
    fn calibration_without_flow_is_zero() {
        let gen = build(6, AmbientFlow::zero(BoxDomain::unit()), false);
        let gram = assemble_gram(&gen, 0.0, None).unwrap();
        let c = calibrate_epsilon(&gen, &gram, &CalibrationOptions::default()).unwrap();
        assert!(c.epsilon <= 1e-6);
        assert!(c.abscissa.unwrap() <= c.tol);
        let sparse = calibrate_epsilon(
            &gen,
            &gram,
            &CalibrationOptions {
                dense_limit: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(sparse.kind, CertificateKind::Cholesky);
        assert!(sparse.epsilon <= 1e-6);
    }

    #[test]
    fn calibrated_shift_is_dissipative_and_tight() {
        let d = BoxDomain::unit();
        let gen = build(6, AmbientFlow::channel(d, 1.0), false);
        let gram = assemble_gram(&gen, 0.0, None).unwrap();
        let c = calibrate_epsilon(&gen, &gram, &CalibrationOptions::default()).unwrap();
        assert!(c.epsilon > 0.0 && c.epsilon < 1e6);
        assert!(spectral_abscissa(&gen, &gram, c.epsilon).unwrap() <= c.tol);
        assert!(spectral_abscissa(&gen, &gram, c.epsilon - 2e-3).unwrap() > 0.0);
        // Shift relation of the curve.
        let l0 = c.abscissa_at_zero.unwrap();
        assert!(
            (spectral_abscissa(&gen, &gram, 0.5).unwrap() - (l0 - 0.5)).abs()
                < 1e-8 * (1.0 + l0.abs())
        );
        let sparse = calibrate_epsilon(
            &gen,
            &gram,
            &CalibrationOptions {
                dense_limit: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((sparse.epsilon - c.epsilon).abs() <= 2e-3);
    }

    #[test]
    fn calibrated_shift_trends() {
        let d = BoxDomain::unit();
        let g = Grid::cube(5).unwrap();
        let eps = |amp: f64, nu: f64, eta: f64| {
            let gen = Generator::assemble(
                &g,
                &AmbientFlow::channel(d, amp),
                &FluidParams::new(nu, 0.5, eta).unwrap(),
                GeneratorOptions::default(),
            )
            .unwrap();
            let gram = assemble_gram(&gen, 0.0, None).unwrap();
            calibrate_epsilon(&gen, &gram, &CalibrationOptions::default())
                .unwrap()
                .epsilon
        };
        let base = eps(1.0, 1.0, 1.0);
        assert!(eps(1.0, 2.0, 1.0) <= base + 1e-3);
        assert!(eps(1.0, 1.0, 2.0) <= base + 1e-3);
        let sweep: Vec<f64> = [1.0, 0.5, 0.25, 0.0]
            .iter()
            .map(|&a| eps(a, 1.0, 1.0))
            .collect();
        assert!(sweep.windows(2).all(|w| w[1] <= w[0] + 1e-3), "{sweep:?}");
        assert!(sweep[3] <= 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn gram_is_positive_on_random_states(seed in 0u64..10_000) {
            let d = BoxDomain::unit();
            let gen = build(5, AmbientFlow::swirl(d, 1.0, VerticalProfile::Uniform), false);
            let gram = assemble_gram(&gen, 0.0, None).unwrap();
            let y = random_state(&gen, seed);
            prop_assert!(gram.norm(&y) > 0.0);
        }

        #[test]
        fn coupling_holds_for_random_states(seed in 0u64..10_000, amp in -2.0f64..2.0) {
            let gen = build(5, AmbientFlow::channel(BoxDomain::unit(), amp), false);
            let y = random_state(&gen, seed);
            let (r, s) = gen.coupling_residual(&y);
            prop_assert!(r <= 1e-13 * s.max(1.0));
        }
    }
}
