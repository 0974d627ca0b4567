//! Time stepping of `y' = A y` (or the shifted generator) and dense checks of
//! the semigroup growth bound on small systems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{Generator, Gram};
use crate::linalg::{self, cholesky_lower, expm, m_operator_norm, SparseLu};
use crate::sparse::CsrMatrix;

/// Relative residual accepted from each step's linear solve.
pub const STEP_TOL: f64 = 1e-10;
/// Largest reduced system handled by the dense exponential checks.
pub const DENSE_EXPM_CAP: usize = 2000;

/// Which operator drives the evolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Dynamics {
    Generator,
    /// `Â(ε)`.
    Shifted(f64),
}

impl Dynamics {
    pub fn operator(self, gen: &Generator) -> CsrMatrix {
        match self {
            Dynamics::Generator => gen.a.clone(),
            Dynamics::Shifted(eps) => gen.ahat(eps),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scheme {
    ImplicitEuler,
    Trapezoid,
}

/// Factorized one-step map for a fixed time step.
pub struct Stepper {
    op: CsrMatrix,
    lhs: CsrMatrix,
    lu: SparseLu,
    scheme: Scheme,
    dt: f64,
}

impl Stepper {
    pub fn new(gen: &Generator, dynamics: Dynamics, scheme: Scheme, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Precondition(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let op = dynamics.operator(gen);
        let theta = match scheme {
            Scheme::ImplicitEuler => 1.0,
            Scheme::Trapezoid => 0.5,
        };
        let lhs = CsrMatrix::identity(op.nrows()).sub(&op.scaled(theta * dt));
        let lu = SparseLu::new(&lhs).map_err(|e| {
            Error::Numerical(format!("step matrix not factorizable at dt = {dt}: {e}"))
        })?;
        Ok(Self {
            op,
            lhs,
            lu,
            scheme,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, y: &[f64]) -> Result<Vec<f64>> {
        let rhs = match self.scheme {
            Scheme::ImplicitEuler => y.to_vec(),
            Scheme::Trapezoid => {
                let mut r = y.to_vec();
                self.op.matvec_acc(y, 0.5 * self.dt, &mut r);
                r
            }
        };
        let next = self.lu.solve(&rhs)?;
        let res = self.lu.relative_residual(&next, &rhs);
        if res > STEP_TOL {
            let cond = self.lhs.norm_inf() * next.iter().fold(0.0f64, |m, v| m.max(v.abs()))
                / rhs.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
            return Err(Error::Numerical(format!(
                "step solve residual {res:.3e} at dt = {}, condition estimate {cond:.3e}",
                self.dt
            )));
        }
        Ok(next)
    }
}

/// Reduced state with independent standard normal entries.
pub fn random_state(gen: &Generator, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..gen.dim())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect()
}

/// One implicit Euler step `(I - dt A)⁻¹ y`.
pub fn step_implicit_euler(
    gen: &Generator,
    dynamics: Dynamics,
    y: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    Stepper::new(gen, dynamics, Scheme::ImplicitEuler, dt)?.step(y)
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// States at every `keep_every`-th step, with their times.
    pub states: Vec<(f64, Vec<f64>)>,
    pub energy: Vec<f64>,
    pub standard_norm: Vec<f64>,
    /// Relative coupling defect `‖u3|_Ω - v - U·∇w‖ / ‖u3|_Ω‖`.
    pub coupling_residual: Vec<f64>,
}

impl Trajectory {
    pub fn max_coupling_residual(&self) -> f64 {
        self.coupling_residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn energy_non_increasing(&self, tol: f64) -> bool {
        self.energy.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol))
    }
}

fn relative_coupling(gen: &Generator, y: &[f64]) -> f64 {
    let (r, s) = gen.coupling_residual(y);
    if s > 0.0 {
        r / s
    } else {
        r
    }
}

/// Integrates from `y0` over `[0, t_final]` with the stepper's fixed step.
pub fn simulate(
    gen: &Generator,
    stepper: &Stepper,
    energy: &Gram,
    standard: &Gram,
    y0: &[f64],
    t_final: f64,
    keep_every: usize,
) -> Result<Trajectory> {
    if y0.len() != gen.dim() {
        return Err(Error::GridMismatch(format!(
            "initial state has {} entries, expected {}",
            y0.len(),
            gen.dim()
        )));
    }
    let steps = (t_final / stepper.dt()).round();
    if !(steps >= 1.0) || (steps * stepper.dt() - t_final).abs() > 1e-9 * t_final {
        return Err(Error::Precondition(format!(
            "final time {t_final} is not a positive multiple of dt = {}",
            stepper.dt()
        )));
    }
    let keep = keep_every.max(1);
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        standard_norm: Vec::new(),
        coupling_residual: Vec::new(),
    };
    let mut y = y0.to_vec();
    for k in 0..=steps as usize {
        let t = k as f64 * stepper.dt();
        if k > 0 {
            y = stepper.step(&y)?;
        }
        traj.times.push(t);
        traj.energy.push(energy.norm(&y));
        traj.standard_norm.push(standard.norm(&y));
        traj.coupling_residual.push(relative_coupling(gen, &y));
        if k % keep == 0 {
            traj.states.push((t, y.clone()));
        }
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    /// `‖e^{At}‖_M`.
    pub norm: f64,
    /// `e^{Kt}`.
    pub bound: f64,
    pub margin: f64,
    /// `‖e^{Â(ε)t}‖_M`.
    pub shifted_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub dim: usize,
    pub epsilon: f64,
    /// `½ max |div U| + ε` over the grid nodes.
    pub rate: f64,
    pub rows: Vec<GrowthRow>,
}

/// Tolerances of the growth-bound and contraction checks.
pub const GROWTH_TOL: f64 = 1e-6;
pub const CONTRACTION_TOL: f64 = 1e-8;

impl GrowthReport {
    pub fn bound_holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.norm <= r.bound * (1.0 + GROWTH_TOL))
    }

    pub fn contraction_holds(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.shifted_norm <= 1.0 + CONTRACTION_TOL)
    }

    pub fn pass(&self) -> bool {
        self.bound_holds() && self.contraction_holds()
    }
}

fn refuse_above_cap(gen: &Generator) -> Result<()> {
    if gen.dim() > DENSE_EXPM_CAP {
        return Err(Error::Refused(format!(
            "reduced system has {} unknowns, above the dense exponential cap of {DENSE_EXPM_CAP}",
            gen.dim()
        )));
    }
    Ok(())
}

/// `‖e^{Bt}‖_M` for each `t`, by dense exponentials.
pub fn exponential_norms(
    gen: &Generator,
    gram: &Gram,
    dynamics: Dynamics,
    times: &[f64],
) -> Result<Vec<f64>> {
    refuse_above_cap(gen)?;
    let b = dynamics.operator(gen).to_dense();
    let l = cholesky_lower(&gram.m.to_dense())?;
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                Ok(1.0)
            } else {
                m_operator_norm(&expm(&linalg::scaled(&b, t))?, &l)
            }
        })
        .collect()
}

/// Compares `‖e^{At}‖_M` with `e^{Kt}`, `K = ½ max |div U| + ε`, and checks
/// that `e^{Â(ε)t}` is a contraction.
pub fn growth_bound_check(
    gen: &Generator,
    gram: &Gram,
    epsilon: f64,
    times: &[f64],
) -> Result<GrowthReport> {
    refuse_above_cap(gen)?;
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Precondition(
            "sample times must be non-negative".into(),
        ));
    }
    let rate = 0.5 * gen.blocks.div_u.iter().fold(0.0f64, |m, d| m.max(d.abs())) + epsilon;
    let norms = exponential_norms(gen, gram, Dynamics::Generator, times)?;
    let shifted = exponential_norms(gen, gram, Dynamics::Shifted(epsilon), times)?;
    let rows = times
        .iter()
        .zip(norms.iter().zip(&shifted))
        .map(|(&t, (&norm, &shifted_norm))| {
            let bound = (rate * t).exp();
            GrowthRow {
                t,
                norm,
                bound,
                margin: bound - norm,
                shifted_norm,
            }
        })
        .collect();
    Ok(GrowthReport {
        dim: gen.dim(),
        epsilon,
        rate,
        rows,
    })
}
