//! Resolvent `(ξ − Â(ε))⁻¹` built in stages: a fluid boundary-value solve for
//! given plate-face normal velocity, the plate bilinear form obtained by
//! eliminating the fluid, and reconstruction of the fluid from the plate.
//! A monolithic sparse solve serves as the reference.

use faer::linalg::solvers::Solve;
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::diffops::{h1_norm, laplace_stiffness, VectorField};
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::linalg::{self, col_to_vec, csr_times_dense, vec_to_col, SparseLu};
use crate::plate::random_clamped;
use crate::sparse::CsrMatrix;

/// Relative residual accepted from the fluid and monolithic sparse solves.
pub const SOLVE_TOL: f64 = 1e-10;
/// Relative residual accepted from the staged solve.
pub const STAGED_TOL: f64 = 1e-8;

/// Right-hand side of `(ξ − Â(ε)) y = data`, split by block.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolventData {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl ResolventData {
    pub fn zeros(gen: &Generator) -> Self {
        let l = gen.layout;
        Self {
            p: vec![0.0; l.n_p],
            u: vec![0.0; l.n_u],
            w: vec![0.0; l.n_w],
            v: vec![0.0; l.n_w],
        }
    }

    pub fn from_vec(gen: &Generator, y: &[f64]) -> Self {
        let l = gen.layout;
        Self {
            p: y[l.p()].to_vec(),
            u: y[l.u()].to_vec(),
            w: y[l.w()].to_vec(),
            v: y[l.v()].to_vec(),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        [&self.p[..], &self.u, &self.w, &self.v].concat()
    }

    /// Independent standard normal entries in every block.
    pub fn random(gen: &Generator, rng: &mut ChaCha8Rng) -> Self {
        let y: Vec<f64> = (0..gen.dim()).map(|_| StandardNormal.sample(rng)).collect();
        Self::from_vec(gen, &y)
    }

    pub fn seeded(gen: &Generator, seed: u64) -> Self {
        Self::random(gen, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// `ξ I − Â(ε)` as a sparse matrix.
pub fn shifted_operator(gen: &Generator, xi: f64, eps: f64) -> CsrMatrix {
    CsrMatrix::identity(gen.dim())
        .scaled(xi)
        .sub(&gen.ahat(eps))
}

fn singular_error(what: &str, xi: f64, eps: f64, detail: String) -> Error {
    Error::Numerical(format!(
        "{what} is singular or ill-conditioned at xi = {xi}, eps = {eps}: {detail}"
    ))
}

/// Lower bound `‖K‖∞ ‖K⁻¹ b‖∞ / ‖b‖∞` on the condition number from one probe.
fn condition_probe(k: &CsrMatrix, lu: &SparseLu) -> f64 {
    let b: Vec<f64> = (0..k.nrows())
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    match lu.solve(&b) {
        Ok(x) => k.norm_inf() * x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Err(_) => f64::INFINITY,
    }
}

/// Pressure and free velocity of a fluid solve together with the prescribed
/// plate-face normal velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidSolution {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub normal_velocity: Vec<f64>,
}

impl FluidSolution {
    /// Full nodal velocity field.
    pub fn velocity(&self, gen: &Generator) -> VectorField {
        let b = &gen.blocks;
        let mut full = b.pf.matvec(&self.u);
        b.pc.matvec_acc(&self.normal_velocity, 1.0, &mut full);
        crate::diffops::unflatten(&full)
    }
}

/// Factorized fluid block of `ξ − Â(ε)` with the injection of the plate-face
/// normal velocity.
pub struct FluidBvpSolver<'a> {
    gen: &'a Generator,
    xi: f64,
    eps: f64,
    fluid: CsrMatrix,
    /// Dependence of the fluid rows on the plate-face normal velocity.
    injection: CsrMatrix,
    lu: SparseLu,
}

impl<'a> FluidBvpSolver<'a> {
    pub fn new(gen: &'a Generator, xi: f64, eps: f64) -> Result<Self> {
        if !(xi + eps > 0.0) {
            return Err(Error::Precondition(format!(
                "xi + eps must be positive, got {}",
                xi + eps
            )));
        }
        let l = gen.layout;
        let k = shifted_operator(gen, xi, eps);
        let nf = l.n_p + l.n_u;
        let fluid = k.block(0..nf, 0..nf);
        let injection = k.block(0..nf, l.v());
        let lu = SparseLu::new(&fluid)
            .map_err(|e| singular_error("fluid system", xi, eps, e.to_string()))?;
        Ok(Self {
            gen,
            xi,
            eps,
            fluid,
            injection,
            lu,
        })
    }

    pub fn generator(&self) -> &Generator {
        self.gen
    }

    pub fn shift(&self) -> f64 {
        self.xi + self.eps
    }

    /// Solves the fluid equations with forcing `(p*, u*)` and plate-face normal velocity `g`.
    pub fn solve(&self, p_star: &[f64], u_star: &[f64], g: &[f64]) -> Result<FluidSolution> {
        let l = self.gen.layout;
        if p_star.len() != l.n_p || u_star.len() != l.n_u || g.len() != l.n_w {
            return Err(Error::GridMismatch(
                "fluid data does not match the generator layout".into(),
            ));
        }
        let mut rhs = [p_star, u_star].concat();
        self.injection.matvec_acc(g, -1.0, &mut rhs);
        let x = self.lu.solve(&rhs)?;
        let res = self.lu.relative_residual(&x, &rhs);
        if res > SOLVE_TOL {
            return Err(singular_error(
                "fluid system",
                self.xi,
                self.eps,
                format!(
                    "residual {res:.3e}, condition estimate {:.3e}",
                    condition_probe(&self.fluid, &self.lu)
                ),
            ));
        }
        Ok(FluidSolution {
            p: x[..l.n_p].to_vec(),
            u: x[l.n_p..].to_vec(),
            normal_velocity: g.to_vec(),
        })
    }

    /// Fluid response to each unit plate-face normal velocity with zero forcing,
    /// as columns `[pressure; free velocity]`.
    pub fn homogeneous_map(&self) -> Result<Mat<f64>> {
        let rhs = self.injection.to_dense();
        let rhs = Mat::from_fn(rhs.nrows(), rhs.ncols(), |i, j| -rhs[(i, j)]);
        let x = self.lu.solve_many(&rhs)?;
        let ax = csr_times_dense(&self.fluid, &x);
        let (mut r, mut b) = (0.0f64, 0.0f64);
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                r = r.max((ax[(i, j)] - rhs[(i, j)]).abs());
                b = b.max(rhs[(i, j)].abs());
            }
        }
        if r > SOLVE_TOL * b {
            return Err(singular_error(
                "fluid system",
                self.xi,
                self.eps,
                format!("residual {:.3e}", r / b),
            ));
        }
        Ok(x)
    }
}

/// Convenience wrapper around [`FluidBvpSolver`].
pub fn solve_fluid_bvp(
    gen: &Generator,
    xi: f64,
    eps: f64,
    p_star: &[f64],
    u_star: &[f64],
    g: &[f64],
) -> Result<FluidSolution> {
    FluidBvpSolver::new(gen, xi, eps)?.solve(p_star, u_star, g)
}

fn scale_rows(d: &[f64], m: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)])
}

fn rows(m: &Mat<f64>, r: std::ops::Range<usize>) -> Mat<f64> {
    m.subrows(r.start, r.len()).to_owned()
}

/// Fluid states stacked as columns.
struct FluidColumns {
    p: Mat<f64>,
    free: Mat<f64>,
    full: Mat<f64>,
}

/// Plate bilinear form obtained by eliminating the fluid through the
/// homogeneous fluid map, assembled from its individual terms.
#[derive(Clone, Debug)]
pub struct PlateBForm {
    pub xi: f64,
    pub eps: f64,
    /// Sum of all terms, `⟨B e_j, e_i⟩` at entry `(i, j)`.
    pub matrix: Mat<f64>,
    pub terms: Vec<(&'static str, Mat<f64>)>,
    /// The same form assembled from the plate-face traction of the fluid response.
    pub traction_form: Mat<f64>,
    /// Gram matrix of `‖Δw‖²`.
    pub bending_gram: Mat<f64>,
    map: Mat<f64>,
}

impl PlateBForm {
    pub fn assemble(solver: &FluidBvpSolver) -> Result<Self> {
        let gen = solver.generator();
        let l = gen.layout;
        let b = &gen.blocks;
        let s = solver.shift();
        let nw = l.n_w;
        let map = solver.homogeneous_map()?;
        let lift = Mat::from_fn(nw, nw, |i, j| {
            let c = b.cw.get(i, j);
            if i == j {
                c + s
            } else {
                c
            }
        });
        let response = Self::columns(gen, &(&map * &lift), &lift);

        let lap = gen.plate.laplacian.to_dense();
        let tw = gen.grid.top_weights();
        let bending_gram = lap.transpose() * scale_rows(&tw, &lap);
        let mass = Mat::from_fn(nw, nw, |i, j| if i == j { b.h_omega * s * s } else { 0.0 });
        let mut terms = vec![
            ("plate_inertia", mass.clone()),
            ("bending", bending_gram.clone()),
        ];
        terms.extend(Self::fluid_terms(solver, &map, &response));
        let matrix = terms
            .iter()
            .skip(1)
            .fold(terms[0].1.clone(), |acc, (_, t)| acc + t);

        let force = csr_times_dense(&b.kv, &response.full) * (-1.0)
            + csr_times_dense(&b.div.transpose(), &scale_rows(&b.hn, &response.p));
        let traction = csr_times_dense(&b.pc.transpose(), &force);
        let traction_form = mass + &bending_gram - traction;
        Ok(Self {
            xi: solver.xi,
            eps: solver.eps,
            matrix,
            terms,
            traction_form,
            bending_gram,
            map,
        })
    }

    /// Splits stacked `[pressure; free velocity]` columns and adds the plate-face normal velocity.
    fn columns(gen: &Generator, state: &Mat<f64>, normal: &Mat<f64>) -> FluidColumns {
        let l = gen.layout;
        let b = &gen.blocks;
        let p = rows(state, 0..l.n_p);
        let free = rows(state, l.n_p..l.n_p + l.n_u);
        let full = csr_times_dense(&b.pf, &free) + csr_times_dense(&b.pc, normal);
        FluidColumns { p, free, full }
    }

    /// Test-lift columns: the homogeneous fluid response to each unit datum.
    fn test_columns(gen: &Generator, map: &Mat<f64>) -> FluidColumns {
        let id = linalg::identity(gen.layout.n_w);
        Self::columns(gen, map, &id)
    }

    /// Fluid contributions `E(s, z)` for each state column `s` against every test lift `z`.
    fn fluid_terms(
        solver: &FluidBvpSolver,
        map: &Mat<f64>,
        s: &FluidColumns,
    ) -> Vec<(&'static str, Mat<f64>)> {
        let gen = solver.generator();
        let b = &gen.blocks;
        let z = Self::test_columns(gen, map);
        let n = gen.layout.n_p;
        let free_div: Vec<f64> = gen.free.iter().map(|&f| 0.5 * b.div_u[f % n]).collect();
        let hz = scale_rows(&b.hf, &z.free).transpose().to_owned();
        let free_rows = b.pf.transpose();

        let mut out = vec![
            (
                "viscous",
                z.full.transpose() * csr_times_dense(&b.kv, &s.full),
            ),
            (
                "pressure",
                (csr_times_dense(&b.div, &z.full).transpose() * scale_rows(&b.hn, &s.p)) * (-1.0),
            ),
            ("fluid_inertia", &hz * &s.free * solver.shift()),
            ("damping", &hz * &s.free * gen.params.eta),
            ("divergence", &hz * scale_rows(&free_div, &s.free)),
            (
                "advection",
                &hz * csr_times_dense(&free_rows.matmul(&b.adv3), &s.full),
            ),
        ];
        if gen.options.include_lower_order {
            let low = csr_times_dense(&b.low_u, &s.full) + csr_times_dense(&b.low_p, &s.p);
            out.push(("lower_order", &hz * csr_times_dense(&free_rows, &low)));
        }
        out
    }

    /// `Σ_terms E(s, ·)` for a single fluid state.
    fn fluid_functional(solver: &FluidBvpSolver, map: &Mat<f64>, sol: &FluidSolution) -> Vec<f64> {
        let gen = solver.generator();
        let cols = Self::columns(
            gen,
            &vec_to_col(&[&sol.p[..], &sol.u].concat()),
            &vec_to_col(&sol.normal_velocity),
        );
        let terms = Self::fluid_terms(solver, map, &cols);
        (0..gen.layout.n_w)
            .map(|i| terms.iter().map(|(_, t)| t[(i, 0)]).sum())
            .collect()
    }

    /// Right-hand side `F(z)` for every plate basis function `z`, given the
    /// fluid solve with the data forcing and zero plate-face velocity.
    pub fn functional(
        &self,
        solver: &FluidBvpSolver,
        data: &ResolventData,
        bar: &FluidSolution,
    ) -> Result<Vec<f64>> {
        let gen = solver.generator();
        let b = &gen.blocks;
        let s = solver.shift();
        let lifted = {
            let x = &self.map * vec_to_col(&data.w);
            let l = gen.layout;
            let x = col_to_vec(&x, 0);
            FluidSolution {
                p: x[..l.n_p].to_vec(),
                u: x[l.n_p..].to_vec(),
                normal_velocity: data.w.clone(),
            }
        };
        let z = Self::test_columns(gen, &self.map);
        let forcing: Vec<f64> = data.u.iter().zip(&b.hf).map(|(u, h)| u * h).collect();
        let forcing = col_to_vec(&(z.free.transpose() * vec_to_col(&forcing)), 0);
        let from_lift = Self::fluid_functional(solver, &self.map, &lifted);
        let from_bar = Self::fluid_functional(solver, &self.map, bar);
        Ok((0..gen.layout.n_w)
            .map(|i| {
                b.h_omega * (data.v[i] + s * data.w[i]) + forcing[i] + from_lift[i] - from_bar[i]
            })
            .collect())
    }

    /// Largest entry of the difference between the two assemblies relative to the largest entry.
    pub fn route_gap(&self) -> f64 {
        let scale = linalg::max_abs(&self.matrix);
        linalg::max_abs(&(&self.matrix - &self.traction_form)) / scale
    }

    /// Smallest eigenvalue of the symmetric part relative to the `‖Δw‖²` Gram.
    pub fn coercivity(&self) -> Result<f64> {
        let ev =
            linalg::generalized_eigenvalues(&linalg::symmetrize(&self.matrix), &self.bending_gram)?;
        Ok(ev[0])
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        col_to_vec(&(&self.matrix * vec_to_col(w)), 0)
    }
}

fn check_residual(k: &CsrMatrix, y: &[f64], rhs: &[f64]) -> f64 {
    let ky = k.matvec(y);
    let r = ky
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let nb = linalg::norm2(rhs);
    if nb == 0.0 {
        r
    } else {
        r / nb
    }
}

/// Reference solve of `(ξ − Â(ε)) y = data` with one sparse LU.
pub fn solve_resolvent_monolithic(
    gen: &Generator,
    xi: f64,
    eps: f64,
    data: &ResolventData,
) -> Result<Vec<f64>> {
    if !(xi + eps > 0.0) {
        return Err(Error::Precondition(format!(
            "xi + eps must be positive, got {}",
            xi + eps
        )));
    }
    let k = shifted_operator(gen, xi, eps);
    let lu = SparseLu::new(&k)
        .map_err(|e| singular_error("resolvent system", xi, eps, e.to_string()))?;
    let rhs = data.to_vec();
    let y = lu.solve(&rhs)?;
    let res = check_residual(&k, &y, &rhs);
    if res > SOLVE_TOL {
        return Err(singular_error(
            "resolvent system",
            xi,
            eps,
            format!(
                "residual {res:.3e}, condition estimate {:.3e}",
                condition_probe(&k, &lu)
            ),
        ));
    }
    Ok(y)
}

/// Staged resolvent solve with its intermediate products.
#[derive(Clone, Debug)]
pub struct StagedSolution {
    pub y: Vec<f64>,
    pub residual: f64,
    pub coupling_residual: f64,
}

/// Resolvent solve through the fluid data solve, the plate variational
/// equation and the reconstruction of the fluid from the plate.
pub fn solve_resolvent_staged(
    gen: &Generator,
    xi: f64,
    eps: f64,
    data: &ResolventData,
) -> Result<StagedSolution> {
    let solver = FluidBvpSolver::new(gen, xi, eps)?;
    let bform = PlateBForm::assemble(&solver)?;
    solve_staged_with(&solver, &bform, data)
}

/// Staged solve reusing a factorized fluid solver and an assembled plate form.
pub fn solve_staged_with(
    solver: &FluidBvpSolver,
    bform: &PlateBForm,
    data: &ResolventData,
) -> Result<StagedSolution> {
    let gen = solver.generator();
    let l = gen.layout;
    let s = solver.shift();
    let bar = solver.solve(&data.p, &data.u, &vec![0.0; l.n_w])?;
    let rhs = bform.functional(solver, data, &bar)?;
    let w = col_to_vec(&bform.matrix.partial_piv_lu().solve(&vec_to_col(&rhs)), 0);
    if w.iter().any(|x| !x.is_finite()) {
        let c = bform.coercivity().unwrap_or(f64::NAN);
        return Err(Error::Numerical(format!(
            "plate form is not invertible at xi = {}: coercivity constant {c:.3e}",
            solver.xi
        )));
    }
    let v: Vec<f64> = w.iter().zip(&data.w).map(|(a, b)| s * a - b).collect();
    let mut normal = gen.blocks.cw.matvec(&w);
    normal.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
    let fluid = col_to_vec(&(&bform.map * vec_to_col(&normal)), 0);
    let mut y = Vec::with_capacity(l.dim());
    y.extend(bar.p.iter().zip(&fluid[..l.n_p]).map(|(a, b)| a + b));
    y.extend(bar.u.iter().zip(&fluid[l.n_p..]).map(|(a, b)| a + b));
    y.extend_from_slice(&w);
    y.extend_from_slice(&v);

    let k = shifted_operator(gen, solver.xi, solver.eps);
    let residual = check_residual(&k, &y, &data.to_vec());
    let (c, scale) = gen.coupling_residual(&y);
    let coupling_residual = if scale > 0.0 { c / scale } else { c };
    if residual > STAGED_TOL {
        return Err(Error::Numerical(format!(
            "staged solve residual {residual:.3e} exceeds {STAGED_TOL:.0e} at xi = {}",
            solver.xi
        )));
    }
    Ok(StagedSolution {
        y,
        residual,
        coupling_residual,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EllipticityRow {
    pub xi: f64,
    pub coercivity: f64,
    pub route_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EllipticityTable {
    pub eps: f64,
    pub floor: f64,
    pub rows: Vec<EllipticityRow>,
    /// Smallest listed ξ from which the constant stays above `floor` and does not decrease.
    pub xi_min: Option<f64>,
}

/// Coercivity floor used to define the ellipticity threshold.
pub const COERCIVITY_FLOOR: f64 = 0.5;

/// Coercivity of the plate form relative to `‖Δw‖²` over an ascending list of ξ.
pub fn check_b_ellipticity(gen: &Generator, xi_list: &[f64], eps: f64) -> Result<EllipticityTable> {
    if xi_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "xi list must be strictly ascending".into(),
        ));
    }
    let rows: Vec<EllipticityRow> = xi_list
        .iter()
        .map(|&xi| {
            let solver = FluidBvpSolver::new(gen, xi, eps)?;
            let b = PlateBForm::assemble(&solver)?;
            Ok(EllipticityRow {
                xi,
                coercivity: b.coercivity()?,
                route_gap: b.route_gap(),
            })
        })
        .collect::<Result<_>>()?;
    let stable_from = |i: usize| {
        rows[i..].iter().all(|r| r.coercivity >= COERCIVITY_FLOOR)
            && rows[i..]
                .windows(2)
                .all(|w| w[1].coercivity >= w[0].coercivity * (1.0 - 1e-9))
    };
    let xi_min = (0..rows.len())
        .find(|&i| stable_from(i))
        .map(|i| rows[i].xi);
    Ok(EllipticityTable {
        eps,
        floor: COERCIVITY_FLOOR,
        rows,
        xi_min,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LargeShiftRow {
    pub xi: f64,
    pub pressure_norm: f64,
    pub velocity_h1: f64,
    pub data_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LargeShiftTable {
    pub rows: Vec<LargeShiftRow>,
}

impl LargeShiftTable {
    /// Least-squares slope of `log ‖p‖` against `log ξ` over `lo ≤ ξ ≤ hi`.
    pub fn pressure_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.xi >= lo && r.xi <= hi && r.pressure_norm > 0.0)
            .map(|r| (r.xi.ln(), r.pressure_norm.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (mx, my) = (
            pts.iter().map(|p| p.0).sum::<f64>() / n,
            pts.iter().map(|p| p.1).sum::<f64>() / n,
        );
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }

    /// Ratio of the largest to the smallest discrete `H¹` velocity norm.
    pub fn velocity_spread(&self) -> f64 {
        let (lo, hi) = self.rows.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| {
            (a.min(r.velocity_h1), b.max(r.velocity_h1))
        });
        if hi == 0.0 {
            1.0
        } else {
            hi / lo
        }
    }
}

/// Fluid data for the ξ sweep: normal pressure and velocity forcing and a
/// random clamped plate-face velocity.
pub fn large_shift_data(gen: &Generator, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = gen.layout;
    let p: Vec<f64> = (0..l.n_p)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let u: Vec<f64> = (0..l.n_u)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let g = random_clamped(&gen.grid, &mut rng);
    (p, u, g)
}

/// Norms of the fluid solve with fixed data over a sweep of ξ (no ε shift).
pub fn verify_large_shift_estimates(
    gen: &Generator,
    xi_sweep: &[f64],
    data: (&[f64], &[f64], &[f64]),
) -> Result<LargeShiftTable> {
    let (p_star, u_star, g) = data;
    let grid = &gen.grid;
    let lap = laplace_stiffness(grid);
    let b = &gen.blocks;
    let weighted = |x: &[f64], w: &[f64]| x.iter().zip(w).map(|(a, h)| h * a * a).sum::<f64>();
    let data_norm =
        (weighted(p_star, &b.hn) + weighted(u_star, &b.hf) + b.h_omega * linalg::dot(g, g)).sqrt();
    let rows = xi_sweep
        .iter()
        .map(|&xi| {
            let sol = solve_fluid_bvp(gen, xi, 0.0, p_star, u_star, g)?;
            Ok(LargeShiftRow {
                xi,
                pressure_norm: weighted(&sol.p, &b.hn).sqrt(),
                velocity_h1: h1_norm(grid, &lap, &sol.velocity(gen)),
                data_norm,
            })
        })
        .collect::<Result<_>>()?;
    Ok(LargeShiftTable { rows })
}
