//! The experiment behind each subcommand.

use std::f64::consts::PI;

use flowplate::ambient::SurfaceJet;
use flowplate::diffops::PlateOperators;
use flowplate::evolve::{growth_bound_check, random_state, simulate, Dynamics, Stepper};
use flowplate::generator::{
    assemble_gram, calibrate_epsilon, standard_gram, CalibrationOptions, CertificateKind,
    Generator, GeneratorOptions, Gram,
};
use flowplate::grid::Grid;
use flowplate::harmonic::{estimate_dirichlet_norm, ratio_drift, DirichletSolver};
use flowplate::identities::{
    dissipativity_identity_residual, flux_multiplier_identity, green_pressure_identity,
    green_velocity_identity, random_trig_fields, BlendedState, IdentityReport,
};
use flowplate::plate::{
    alpha_min, clamped_mode, commutator_apply, commutator_oracle_error, plate_grid, FluxField,
    NormalExtension,
};
use flowplate::resolvent::{
    check_b_ellipticity, large_shift_data, solve_resolvent_monolithic, solve_staged_with,
    verify_large_shift_estimates, FluidBvpSolver, PlateBForm, ResolventData, STAGED_TOL,
};
use flowplate::Result;

use crate::config::{ExperimentConfig, Family, Setting};
use crate::report::{num, Report};

type Rows = Vec<Vec<String>>;

fn generator(cfg: &ExperimentConfig, n: usize) -> Result<Generator> {
    let grid = Grid::new(cfg.domain, [n, n, n])?;
    let opts = GeneratorOptions {
        include_lower_order: cfg.include_lower_order,
    };
    Generator::assemble(&grid, &cfg.flow(), &cfg.params, opts)
}

fn alpha(cfg: &ExperimentConfig, grid: &Grid) -> Result<f64> {
    match cfg.alpha {
        Setting::Value(a) => Ok(a),
        Setting::Auto => alpha_min(&cfg.flow(), &NormalExtension::new(&cfg.domain), grid),
    }
}

fn gram(gen: &Generator, alpha: f64) -> Result<Gram> {
    if alpha > 0.0 {
        let solver = DirichletSolver::new(&gen.grid)?;
        assemble_gram(gen, alpha, Some(&solver))
    } else {
        assemble_gram(gen, alpha, None)
    }
}

fn epsilon(cfg: &ExperimentConfig, gen: &Generator, gram: &Gram) -> Result<f64> {
    match cfg.epsilon {
        Setting::Value(e) => Ok(e),
        Setting::Auto => Ok(calibrate_epsilon(gen, gram, &CalibrationOptions::default())?.epsilon),
    }
}

fn max_abs_div(gen: &Generator) -> f64 {
    gen.blocks.div_u.iter().fold(0.0f64, |m, d| m.max(d.abs()))
}

fn identity_rows(rows: &mut Rows, r: &IdentityReport) {
    for (k, (&n, &res)) in r.resolutions.iter().zip(&r.residuals).enumerate() {
        let ratio = if k == 0 {
            String::new()
        } else {
            num(r.ratios[k - 1])
        };
        rows.push(vec![
            r.name.clone(),
            n.to_string(),
            num(res),
            ratio,
            r.pass.to_string(),
        ]);
    }
}

fn identity_detail(r: &IdentityReport) -> String {
    if r.is_exact() {
        "exact to roundoff".into()
    } else {
        let ratios: Vec<String> = r.ratios.iter().map(|x| format!("{x:.3}")).collect();
        format!("ratios [{}]", ratios.join(", "))
    }
}

pub fn check_identities(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let flow = cfg.flow();
    let res = &cfg.identity_resolutions;
    let finest = plate_grid(cfg.domain, *res.last().expect("non-empty"))?;
    let a = alpha(cfg, &finest)?;
    let (p, u) = random_trig_fields(&cfg.domain, cfg.seed);
    let (lx, ly) = (cfg.domain.lx, cfg.domain.ly);
    let w = move |x: [f64; 2]| {
        let (s, t) = ((PI * x[0] / lx).sin(), (PI * x[1] / ly).sin());
        s * s * t * t * (1.0 + 0.5 * (PI * x[0] / lx).cos())
    };
    let diss = dissipativity_identity_residual(&BlendedState::new(flow), &cfg.params, a, res)?;
    let reports = [
        green_pressure_identity(&flow, |x| p.value(x), res)?,
        green_velocity_identity(&flow, |x| std::array::from_fn(|c| u[c].value(x)), res)?,
        flux_multiplier_identity(
            &FluxField::new(flow, a),
            w,
            cfg.domain,
            &cfg.plate_resolutions,
        )?,
        diss.identity.clone(),
        diss.i2_forms.clone(),
    ];
    let mut rows = Vec::new();
    for r in &reports {
        identity_rows(&mut rows, r);
        rep.check(&r.name, r.pass, identity_detail(r));
    }
    rep.csv(
        "identities.csv",
        &["identity", "resolution", "residual", "ratio", "pass"],
        &rows,
    )?;
    rep.check(
        "flux_boundary_sign",
        diss.boundary_sign_ok(),
        format!("alpha = {a:.6e}, boundary flux terms nonpositive"),
    );
    commutator(cfg, a, rep)
}

fn commutator(cfg: &ExperimentConfig, a: f64, rep: &mut Report) -> Result<()> {
    let h = FluxField::new(cfg.flow(), a);
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &n in &cfg.commutator_resolutions {
        let g = plate_grid(cfg.domain, n)?;
        let e = commutator_oracle_error(&h, &PlateOperators::new(&g), &g, &clamped_mode(&g, 0, 0));
        let ratio = errors
            .last()
            .map(|prev: &f64| num(prev / e))
            .unwrap_or_default();
        rows.push(vec![n.to_string(), num(e), ratio]);
        errors.push(e);
    }
    rep.csv(
        "commutator.csv",
        &["resolution", "relative_error", "ratio"],
        &rows,
    )?;
    let finest = *errors.last().expect("non-empty");
    let exact = errors.iter().all(|e| *e <= 1e-14);
    let decays = errors.windows(2).all(|w| w[0] / w[1] >= 3.0);
    rep.check(
        "commutator_accuracy",
        finest <= 5e-3,
        format!("relative error {finest:.3e} at the finest grid"),
    );
    rep.check(
        "commutator_order",
        exact || decays,
        "second-order decay between grids",
    );

    let g = plate_grid(
        cfg.domain,
        *cfg.commutator_resolutions.last().expect("non-empty"),
    )?;
    let ops = PlateOperators::new(&g);
    let w = clamped_mode(&g, 2, 1);
    let euler = |x: [f64; 2]| SurfaceJet {
        value: x,
        grad: [[1.0, 0.0], [0.0, 1.0]],
        ..Default::default()
    };
    let comm = commutator_apply(&euler, &ops, &g, &w);
    let lw = ops.laplacian.matvec(&w);
    let scale = lw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = comm
        .iter()
        .zip(&lw)
        .fold(0.0f64, |m, (c, l)| m.max((c - 2.0 * l).abs()))
        / scale;
    rep.check(
        "commutator_euler_field",
        gap <= 1e-12,
        format!("max |[Δ, x·∇]w - 2Δw| / max |Δw| = {gap:.3e}"),
    );
    Ok(())
}

pub fn dirichlet_norm(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let rows = estimate_dirichlet_norm(
        cfg.domain,
        &cfg.dirichlet_resolutions,
        cfg.dirichlet_probes,
        cfg.seed,
    )?;
    let csv: Rows = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.plate_dofs.to_string(),
                num(r.sup_ratio),
                num(r.top_mode_ratio),
                num(r.first_mode_ratio),
                r.probes.to_string(),
            ]
        })
        .collect();
    rep.csv(
        "dirichlet.csv",
        &[
            "resolution",
            "plate_dofs",
            "sup_ratio",
            "top_mode_ratio",
            "first_mode_ratio",
            "probes",
        ],
        &csv,
    )?;
    let drift = ratio_drift(&rows);
    rep.check(
        "dirichlet_ratio_drift",
        drift < 2.0,
        format!("max/min sup ratio {drift:.4}"),
    );
    Ok(())
}

pub fn calibrate(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let gen = generator(cfg, cfg.grid_n)?;
    let a = alpha(cfg, &gen.grid)?;
    let gm = gram(&gen, a)?;
    let c = calibrate_epsilon(&gen, &gm, &CalibrationOptions::default())?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let kind = match c.kind {
        CertificateKind::Eigenvalue => "eigenvalue",
        CertificateKind::Cholesky => "cholesky",
    };
    rep.csv(
        "calibration.csv",
        &[
            "dofs",
            "alpha",
            "epsilon",
            "certificate",
            "scale",
            "tol",
            "abscissa_at_zero",
            "abscissa",
        ],
        &[vec![
            gen.dim().to_string(),
            num(a),
            num(c.epsilon),
            kind.into(),
            num(c.scale),
            num(c.tol),
            opt(c.abscissa_at_zero),
            opt(c.abscissa),
        ]],
    )?;
    let probes: Rows = c
        .probes
        .iter()
        .map(|(e, ok)| vec![num(*e), ok.to_string()])
        .collect();
    rep.csv("calibration_probes.csv", &["epsilon", "certified"], &probes)?;
    let top = (2.0 * c.epsilon).max(1.0);
    let grid: Vec<f64> = (0..=20).map(|k| top * k as f64 / 20.0).collect();
    if let Some(curve) = c.curve(&grid) {
        let rows: Rows = curve.iter().map(|(e, s)| vec![num(*e), num(*s)]).collect();
        rep.csv("abscissa_curve.csv", &["epsilon", "abscissa"], &rows)?;
    }
    let certified = match c.abscissa {
        Some(s) => s <= c.tol,
        None => c.probes.iter().any(|(e, ok)| *ok && *e == c.epsilon),
    };
    rep.check(
        "dissipativity_certificate",
        certified,
        format!(
            "epsilon* = {:.6e} ({kind}), tol = {:.3e}, dofs = {}",
            c.epsilon,
            c.tol,
            gen.dim()
        ),
    );
    if cfg.family == Family::Zero && a == 0.0 {
        rep.check(
            "no_flow_epsilon",
            c.epsilon <= 1e-6,
            format!("epsilon* = {:.3e}", c.epsilon),
        );
    }
    Ok(())
}

pub fn dissipativity(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let finest = plate_grid(
        cfg.domain,
        *cfg.identity_resolutions.last().expect("non-empty"),
    )?;
    let a = alpha(cfg, &finest)?;
    let r = dissipativity_identity_residual(
        &BlendedState::new(cfg.flow()),
        &cfg.params,
        a,
        &cfg.identity_resolutions,
    )?;
    let rows: Rows = r
        .terms
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let ratio = if k == 0 {
                String::new()
            } else {
                num(r.identity.ratios[k - 1])
            };
            vec![
                t.n.to_string(),
                num(t.lhs),
                num(t.rhs),
                num(t.residual),
                ratio,
                num(t.strain_energy),
                num(t.damping),
                num(t.divergence),
                num(t.i1),
                num(t.i1_boundary),
                num(t.i2),
                num(t.i2_green),
                num(t.i3),
                num(t.c1),
                num(t.c2),
                num(t.c3),
            ]
        })
        .collect();
    rep.csv(
        "dissipativity.csv",
        &[
            "resolution",
            "lhs",
            "rhs",
            "residual",
            "ratio",
            "strain_energy",
            "damping",
            "divergence",
            "i1",
            "i1_boundary",
            "i2",
            "i2_green",
            "i3",
            "c1",
            "c2",
            "c3",
        ],
        &rows,
    )?;
    rep.check(
        "dissipativity_identity",
        r.identity.pass,
        identity_detail(&r.identity),
    );
    rep.check(
        "i2_green_form",
        r.i2_forms.pass,
        identity_detail(&r.i2_forms),
    );
    rep.check(
        "flux_boundary_sign",
        r.boundary_sign_ok(),
        format!("alpha = {a:.6e}"),
    );
    rep.check(
        "c1_stable",
        r.c1_drift() < 0.1,
        format!(
            "relative change {:.3e} between the finest grids",
            r.c1_drift()
        ),
    );
    Ok(())
}

pub fn resolvent_verify(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let gen = generator(cfg, cfg.grid_n)?;
    let a = alpha(cfg, &gen.grid)?;
    let gm = gram(&gen, a)?;
    let eps = epsilon(cfg, &gen, &gm)?;
    let table = check_b_ellipticity(&gen, &cfg.xi, eps)?;
    let above = table.xi_min.is_some_and(|m| m <= cfg.xi[0]);
    rep.check(
        "xi_above_threshold",
        above,
        format!("xi_min = {:?} over {:?}", table.xi_min, cfg.xi),
    );

    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (k, &xi) in cfg.xi.iter().enumerate() {
        let solver = FluidBvpSolver::new(&gen, xi, eps)?;
        let bform = PlateBForm::assemble(&solver)?;
        for s in 0..cfg.resolvent_samples {
            let data =
                ResolventData::seeded(&gen, cfg.seed.wrapping_add((k * 1_000_003 + s) as u64));
            let staged = solve_staged_with(&solver, &bform, &data)?;
            let mono = solve_resolvent_monolithic(&gen, xi, eps, &data)?;
            let diff: Vec<f64> = staged.y.iter().zip(&mono).map(|(x, y)| x - y).collect();
            let rel = gm.norm(&diff) / gm.norm(&mono);
            worst = worst.max(rel);
            rows.push(vec![
                num(xi),
                s.to_string(),
                num(rel),
                num(staged.residual),
                num(staged.coupling_residual),
                num(bform.route_gap()),
            ]);
        }
    }
    rep.csv(
        "resolvent.csv",
        &[
            "xi",
            "sample",
            "relative_difference",
            "staged_residual",
            "coupling_residual",
            "route_gap",
        ],
        &rows,
    )?;
    rep.check(
        "staged_vs_monolithic",
        worst <= STAGED_TOL,
        format!("max relative M-norm difference {worst:.3e}"),
    );

    let (p, u, g) = large_shift_data(&gen, cfg.seed);
    let sweep = verify_large_shift_estimates(&gen, &cfg.lemma_xi, (&p, &u, &g))?;
    let rows: Rows = sweep
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.xi),
                num(r.pressure_norm),
                num(r.velocity_h1),
                num(r.data_norm),
            ]
        })
        .collect();
    rep.csv(
        "lemma.csv",
        &["xi", "pressure_norm", "velocity_h1", "data_norm"],
        &rows,
    )?;
    let top = *cfg.lemma_xi.last().expect("non-empty");
    let slope = sweep.pressure_slope(top / 100.0, top);
    rep.check(
        "pressure_decay_slope",
        slope.is_some_and(|s| (s + 1.0).abs() <= 0.15),
        format!("slope {slope:?} over [{:.1e}, {top:.1e}]", top / 100.0),
    );
    let spread = sweep.velocity_spread();
    rep.check(
        "velocity_bounded",
        spread < 2.0,
        format!("max/min H1 norm {spread:.4}"),
    );
    Ok(())
}

pub fn ellipticity(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let gen = generator(cfg, cfg.grid_n)?;
    let eps = match cfg.epsilon {
        Setting::Value(e) => e,
        Setting::Auto => {
            let a = alpha(cfg, &gen.grid)?;
            epsilon(cfg, &gen, &gram(&gen, a)?)?
        }
    };
    let t = check_b_ellipticity(&gen, &cfg.ellipticity_xi, eps)?;
    let rows: Rows = t
        .rows
        .iter()
        .map(|r| vec![num(r.xi), num(r.coercivity), num(r.route_gap)])
        .collect();
    rep.csv("ellipticity.csv", &["xi", "coercivity", "route_gap"], &rows)?;
    let gap = t.rows.iter().map(|r| r.route_gap).fold(0.0, f64::max);
    rep.check(
        "bform_routes_agree",
        gap <= 1e-12,
        format!("max relative route gap {gap:.3e}"),
    );
    rep.check(
        "coercivity_threshold",
        t.xi_min.is_some(),
        format!(
            "xi_min = {:?}, floor {}, epsilon = {eps:.6e}",
            t.xi_min, t.floor
        ),
    );
    Ok(())
}

pub fn growth_bound(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let gen = generator(cfg, cfg.growth_n)?;
    let a = alpha(cfg, &gen.grid)?;
    let gm = gram(&gen, a)?;
    let eps = epsilon(cfg, &gen, &gm)?;
    let r = growth_bound_check(&gen, &gm, eps, &cfg.growth_times)?;
    let rows: Rows = r
        .rows
        .iter()
        .map(|x| {
            vec![
                num(x.t),
                num(x.norm),
                num(x.bound),
                num(x.margin),
                num(x.shifted_norm),
            ]
        })
        .collect();
    rep.csv(
        "growth.csv",
        &["t", "operator_norm", "exp_kt", "margin", "shifted_norm"],
        &rows,
    )?;
    rep.check(
        "growth_bound",
        r.bound_holds(),
        format!("K = {:.6e}, dofs = {}", r.rate, r.dim),
    );
    let worst = r.rows.iter().map(|x| x.shifted_norm).fold(0.0, f64::max);
    rep.check(
        "shifted_contraction",
        r.contraction_holds(),
        format!("max shifted norm {worst:.12}"),
    );
    Ok(())
}

pub fn simulate_run(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let gen = generator(cfg, cfg.grid_n)?;
    let a = alpha(cfg, &gen.grid)?;
    let gm = gram(&gen, a)?;
    let std = standard_gram(&gen)?;
    let eps = epsilon(cfg, &gen, &gm)?;
    let stepper = Stepper::new(&gen, Dynamics::Generator, cfg.scheme, cfg.dt)?;
    let y0 = random_state(&gen, cfg.seed);
    let traj = simulate(&gen, &stepper, &gm, &std, &y0, cfg.t_final, usize::MAX)?;
    let rows: Rows = (0..traj.times.len())
        .map(|k| {
            vec![
                num(traj.times[k]),
                num(traj.energy[k]),
                num(traj.standard_norm[k]),
                num(traj.coupling_residual[k]),
            ]
        })
        .collect();
    rep.csv(
        "trajectory.csv",
        &["t", "m_norm", "standard_norm", "coupling_residual"],
        &rows,
    )?;
    let coupling = traj.max_coupling_residual();
    rep.check(
        "coupling_fidelity",
        coupling <= 1e-10,
        format!("max relative coupling defect {coupling:.3e}"),
    );
    let k = 0.5 * max_abs_div(&gen) + eps;
    let e0 = traj.energy[0];
    let within = traj
        .times
        .iter()
        .zip(&traj.energy)
        .all(|(t, e)| *e <= (k * t).exp() * e0 * (1.0 + 1e-8));
    rep.check(
        "energy_growth",
        within,
        format!("‖y(t)‖_M ≤ e^(Kt)‖y0‖_M with K = {k:.6e}"),
    );
    Ok(())
}
