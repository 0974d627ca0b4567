//! Discrete harmonic extension of plate-face data and spectral fractional
//! norms on the plate.

use std::f64::consts::PI;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BoxDomain, Grid};
use crate::linalg::{self, SparseLu};
use crate::sparse::TripletBuilder;

/// Harmonic extension: data on the plate dofs, zero on the rest of the
/// boundary, seven-point discrete Laplace equation inside.
pub struct DirichletSolver {
    grid: Grid,
    interior: Vec<usize>,
    /// Position of each node among the interior unknowns.
    slot: Vec<Option<usize>>,
    lu: SparseLu,
    /// For each plate dof, the interior unknowns it couples to and the weight.
    coupling: Vec<Vec<(usize, f64)>>,
}

impl DirichletSolver {
    pub fn new(grid: &Grid) -> Result<Self> {
        let interior = grid.interior_nodes();
        let mut slot = vec![None; grid.num_nodes()];
        for (k, &n) in interior.iter().enumerate() {
            slot[n] = Some(k);
        }
        let inv = [
            1.0 / (grid.hx * grid.hx),
            1.0 / (grid.hy * grid.hy),
            1.0 / (grid.hz * grid.hz),
        ];
        let strides = [1, grid.nx, grid.nx * grid.ny];
        let mut b = TripletBuilder::new(interior.len(), interior.len());
        let mut coupling = vec![Vec::new(); grid.omega_count()];
        let mut plate_slot = vec![None; grid.num_nodes()];
        for m in 0..grid.omega_count() {
            plate_slot[grid.omega_to_node(m)] = Some(m);
        }
        for (row, &n) in interior.iter().enumerate() {
            b.push(row, row, 2.0 * (inv[0] + inv[1] + inv[2]));
            for a in 0..3 {
                for nb in [n - strides[a], n + strides[a]] {
                    if let Some(c) = slot[nb] {
                        b.push(row, c, -inv[a]);
                    } else if let Some(m) = plate_slot[nb] {
                        coupling[m].push((row, inv[a]));
                    }
                }
            }
        }
        let lu = SparseLu::new(&b.build())?;
        Ok(Self {
            grid: grid.clone(),
            interior,
            slot,
            lu,
            coupling,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn rhs(&self, phi: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.interior.len()];
        for (m, c) in self.coupling.iter().enumerate() {
            for &(row, w) in c {
                r[row] += w * phi[m];
            }
        }
        r
    }

    fn assemble(&self, phi: &[f64], inner: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.grid.num_nodes()];
        for (k, &n) in self.interior.iter().enumerate() {
            f[n] = inner[k];
        }
        for (m, &v) in phi.iter().enumerate() {
            f[self.grid.omega_to_node(m)] = v;
        }
        f
    }

    /// Harmonic extension of `phi` (one value per plate dof) to every node.
    pub fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.grid.omega_count() {
            return Err(Error::GridMismatch(format!(
                "plate data has {} values, expected {}",
                phi.len(),
                self.grid.omega_count()
            )));
        }
        let rhs = self.rhs(phi);
        let inner = self.lu.solve(&rhs)?;
        let res = self.lu.relative_residual(&inner, &rhs);
        if res > 1e-10 {
            return Err(Error::Numerical(format!(
                "harmonic extension residual {res:.3e}"
            )));
        }
        Ok(self.assemble(phi, &inner))
    }

    /// Dense extension matrix (nodes x plate dofs), one column per unit datum.
    pub fn extension_matrix(&self) -> Result<Mat<f64>> {
        let nw = self.grid.omega_count();
        let rhs = Mat::from_fn(self.interior.len(), nw, |row, m| {
            self.coupling[m]
                .iter()
                .filter(|(r, _)| *r == row)
                .map(|(_, w)| *w)
                .sum()
        });
        let inner = self.lu.solve_many(&rhs)?;
        let mut d = Mat::from_fn(self.grid.num_nodes(), nw, |n, m| match self.slot[n] {
            Some(k) => inner[(k, m)],
            None => 0.0,
        });
        for m in 0..nw {
            d[(self.grid.omega_to_node(m), m)] = 1.0;
        }
        Ok(d)
    }
}

/// Spectral data of the five-point Dirichlet Laplacian on the plate dofs.
///
/// Eigenvectors are discrete sine modes normalized in the trapezoidal `L²`
/// inner product; eigenvalues are sorted ascending.
#[derive(Clone, Debug)]
pub struct FractionalBoundaryNorm {
    dims: (usize, usize),
    cell_area: f64,
    eigenvalues: Vec<f64>,
    /// Mode indices `(k, l)` in the same order as `eigenvalues`.
    modes: Vec<(usize, usize)>,
    sx: Mat<f64>,
    sy: Mat<f64>,
}

impl FractionalBoundaryNorm {
    pub fn new(grid: &Grid) -> Self {
        let (mx, my) = grid.omega_dims();
        let BoxDomain { lx, ly, .. } = grid.domain;
        let (ex, ey) = ((grid.nx - 1) as f64, (grid.ny - 1) as f64);
        let lam_x: Vec<f64> = (1..=mx)
            .map(|k| 4.0 / (grid.hx * grid.hx) * (k as f64 * PI / (2.0 * ex)).sin().powi(2))
            .collect();
        let lam_y: Vec<f64> = (1..=my)
            .map(|l| 4.0 / (grid.hy * grid.hy) * (l as f64 * PI / (2.0 * ey)).sin().powi(2))
            .collect();
        let mut modes: Vec<(usize, usize)> =
            (0..my).flat_map(|l| (0..mx).map(move |k| (k, l))).collect();
        modes.sort_by(|a, b| (lam_x[a.0] + lam_y[a.1]).total_cmp(&(lam_x[b.0] + lam_y[b.1])));
        let eigenvalues = modes.iter().map(|&(k, l)| lam_x[k] + lam_y[l]).collect();
        // 1-D modes normalized so that h Σ s_k(i)² = 1 on each axis.
        let sx = Mat::from_fn(mx, mx, |k, i| {
            (2.0 / lx).sqrt() * ((k + 1) as f64 * PI * (i + 1) as f64 / ex).sin()
        });
        let sy = Mat::from_fn(my, my, |l, j| {
            (2.0 / ly).sqrt() * ((l + 1) as f64 * PI * (j + 1) as f64 / ey).sin()
        });
        Self {
            dims: (mx, my),
            cell_area: grid.omega_weight(),
            eigenvalues,
            modes,
            sx,
            sy,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `L²`-normalized eigenvector number `idx` (ascending eigenvalue order).
    pub fn eigenvector(&self, idx: usize) -> Vec<f64> {
        let (k, l) = self.modes[idx];
        let (mx, my) = self.dims;
        (0..mx * my)
            .map(|m| self.sx[(k, m % mx)] * self.sy[(l, m / mx)])
            .collect()
    }

    /// Coefficients `(φ, e_k)` in eigenvalue order.
    pub fn coefficients(&self, phi: &[f64]) -> Vec<f64> {
        let (mx, my) = self.dims;
        let grid_phi = Mat::from_fn(mx, my, |i, j| phi[i + mx * j]);
        let c = &(&self.sx * &grid_phi) * self.sy.transpose();
        self.modes
            .iter()
            .map(|&(k, l)| self.cell_area * c[(k, l)])
            .collect()
    }

    /// `(Σ λ_k^s |φ̂_k|²)^{1/2}`
    pub fn norm(&self, phi: &[f64], s: f64) -> f64 {
        self.coefficients(phi)
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| l.powf(s) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_minus_half(&self, phi: &[f64]) -> f64 {
        self.norm(phi, -0.5)
    }

    pub fn norm_plus_half(&self, phi: &[f64]) -> f64 {
        self.norm(phi, 0.5)
    }

    pub fn l2_norm(&self, phi: &[f64]) -> f64 {
        (self.cell_area * linalg::dot(phi, phi)).sqrt()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletRatioRow {
    pub n: usize,
    pub plate_dofs: usize,
    /// Largest probe ratio `‖Dφ‖ / ‖φ‖_{-1/2}`.
    pub sup_ratio: f64,
    /// Ratio for the highest-frequency eigenvector.
    pub top_mode_ratio: f64,
    /// Ratio for the lowest eigenvector.
    pub first_mode_ratio: f64,
    pub probes: usize,
}

/// `‖Dφ‖_{L²(box)} / ‖φ‖_{H^{-1/2}}` for one probe.
pub fn dirichlet_ratio(
    solver: &DirichletSolver,
    frac: &FractionalBoundaryNorm,
    phi: &[f64],
) -> Result<f64> {
    let denom = frac.norm_minus_half(phi);
    if denom == 0.0 {
        return Err(Error::Precondition("zero probe has no ratio".into()));
    }
    let f = solver.apply(phi)?;
    Ok(solver.grid().l2_norm(&f) / denom)
}

/// Sup of the Dirichlet-map ratio over random and eigenvector probes, per
/// cubic resolution.
pub fn estimate_dirichlet_norm(
    domain: BoxDomain,
    resolutions: &[usize],
    random_probes: usize,
    seed: u64,
) -> Result<Vec<DirichletRatioRow>> {
    if resolutions.len() < 2 {
        return Err(Error::Precondition(
            "at least two resolutions are required".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in resolutions {
        let grid = Grid::new(domain, [n, n, n])?;
        let solver = DirichletSolver::new(&grid)?;
        let frac = FractionalBoundaryNorm::new(&grid);
        let nw = grid.omega_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let mut sup = 0.0f64;
        let mut count = 0;
        for _ in 0..random_probes {
            let phi: Vec<f64> = (0..nw).map(|_| StandardNormal.sample(&mut rng)).collect();
            sup = sup.max(dirichlet_ratio(&solver, &frac, &phi)?);
            count += 1;
        }
        let high: Vec<usize> = (nw.saturating_sub(5)..nw).collect();
        let mut top_mode_ratio = 0.0;
        for &k in &high {
            let r = dirichlet_ratio(&solver, &frac, &frac.eigenvector(k))?;
            if k == nw - 1 {
                top_mode_ratio = r;
            }
            sup = sup.max(r);
            count += 1;
        }
        let first_mode_ratio = dirichlet_ratio(&solver, &frac, &frac.eigenvector(0))?;
        sup = sup.max(first_mode_ratio);
        count += 1;
        rows.push(DirichletRatioRow {
            n,
            plate_dofs: nw,
            sup_ratio: sup,
            top_mode_ratio,
            first_mode_ratio,
            probes: count,
        });
    }
    Ok(rows)
}

/// Ratio of the largest to the smallest sup ratio across the table.
pub fn ratio_drift(rows: &[DirichletRatioRow]) -> f64 {
    let max = rows.iter().map(|r| r.sup_ratio).fold(0.0, f64::max);
    let min = rows
        .iter()
        .map(|r| r.sup_ratio)
        .fold(f64::INFINITY, f64::min);
    max / min
}
