//! Acceptance checks at their stated tolerances. Prints one PASS/FAIL line
//! per criterion and exits non-zero when any fails.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use flowplate::ambient::{AmbientFlow, SurfaceJet};
use flowplate::diffops::{FluidParams, PlateOperators};
use flowplate::evolve::{growth_bound_check, random_state, simulate, Dynamics, Scheme, Stepper};
use flowplate::generator::{
    assemble_gram, calibrate_epsilon, spectral_abscissa, standard_gram, CalibrationOptions,
    CertificateKind, Generator, GeneratorOptions,
};
use flowplate::grid::{BoxDomain, Grid};
use flowplate::harmonic::{estimate_dirichlet_norm, ratio_drift};
use flowplate::identities::{
    dissipativity_identity_residual, flux_multiplier_identity, green_pressure_identity,
    green_velocity_identity, random_trig_fields, BlendedState, IdentityReport,
};
use flowplate::plate::{
    clamped_mode, commutator_apply, commutator_oracle_error, plate_grid, FluxField,
};
use flowplate::resolvent::{
    check_b_ellipticity, large_shift_data, solve_resolvent_monolithic, solve_staged_with,
    verify_large_shift_estimates, FluidBvpSolver, PlateBForm, ResolventData, COERCIVITY_FLOOR,
};
use flowplate::Result;

type Outcome = Result<(bool, String)>;

fn unit() -> BoxDomain {
    BoxDomain::unit()
}

fn params() -> FluidParams {
    FluidParams::new(1.0, 0.5, 0.1).expect("valid parameters")
}

fn channel() -> AmbientFlow {
    AmbientFlow::channel(unit(), 1.0)
}

fn generator(flow: &AmbientFlow, n: usize) -> Result<Generator> {
    Generator::assemble(
        &Grid::new(unit(), [n, n, n])?,
        flow,
        &params(),
        GeneratorOptions::default(),
    )
}

fn ratios(r: &IdentityReport) -> String {
    let v: Vec<String> = r.ratios.iter().map(|x| format!("{x:.2}")).collect();
    format!("{} [{}]", r.name, v.join(", "))
}

fn identity_suite() -> Outcome {
    let flow = channel();
    let levels = [9, 17, 33];
    let (p, u) = random_trig_fields(&unit(), 0);
    let w = |x: [f64; 2]| {
        let (a, b) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        a * a * b * b * (1.0 + 0.5 * (PI * x[0]).cos())
    };
    let reports = [
        green_pressure_identity(&flow, |x| p.value(x), &levels)?,
        green_velocity_identity(&flow, |x| std::array::from_fn(|c| u[c].value(x)), &levels)?,
        flux_multiplier_identity(&FluxField::new(flow, 0.5), w, unit(), &[17, 33, 65])?,
        dissipativity_identity_residual(&BlendedState::new(flow), &params(), 0.0, &levels)?
            .identity,
    ];
    let pass = reports.iter().all(|r| r.pass && !r.is_exact());
    Ok((
        pass,
        reports.iter().map(ratios).collect::<Vec<_>>().join("; "),
    ))
}

fn commutator() -> Outcome {
    let h = FluxField::new(channel(), 0.5);
    let err = |n: usize| -> Result<f64> {
        let g = plate_grid(unit(), n)?;
        Ok(commutator_oracle_error(
            &h,
            &PlateOperators::new(&g),
            &g,
            &clamped_mode(&g, 0, 0),
        ))
    };
    let (coarse, fine) = (err(17)?, err(33)?);
    let g = plate_grid(unit(), 33)?;
    let ops = PlateOperators::new(&g);
    let w = clamped_mode(&g, 2, 1);
    let euler = |x: [f64; 2]| SurfaceJet {
        value: x,
        grad: [[1.0, 0.0], [0.0, 1.0]],
        ..Default::default()
    };
    let lw = ops.laplacian.matvec(&w);
    let scale = lw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = commutator_apply(&euler, &ops, &g, &w)
        .iter()
        .zip(&lw)
        .fold(0.0f64, |m, (c, l)| m.max((c - 2.0 * l).abs()))
        / scale;
    let order = coarse / fine;
    Ok((
        fine <= 5e-3 && order >= 3.0 && gap <= 1e-12,
        format!("error {fine:.3e} at 33², ratio 17→33 {order:.2}, Euler field gap {gap:.1e}"),
    ))
}

fn dissipativity_certificate() -> Outcome {
    let dense_gen = generator(&channel(), 9)?;
    let gram = assemble_gram(&dense_gen, 0.0, None)?;
    let dense = calibrate_epsilon(&dense_gen, &gram, &CalibrationOptions::default())?;
    let abscissa = spectral_abscissa(&dense_gen, &gram, dense.epsilon)?;
    let dense_ok = dense.kind == CertificateKind::Eigenvalue && abscissa <= dense.tol;

    let large = generator(&channel(), 14)?;
    let gram = assemble_gram(&large, 0.0, None)?;
    let sparse = calibrate_epsilon(&large, &gram, &CalibrationOptions::default())?;
    let sparse_ok = sparse.kind == CertificateKind::Cholesky
        && sparse
            .probes
            .iter()
            .any(|(e, ok)| *ok && *e == sparse.epsilon);

    let still = generator(&AmbientFlow::zero(unit()), 14)?;
    let gram = assemble_gram(&still, 0.0, None)?;
    let zero = calibrate_epsilon(&still, &gram, &CalibrationOptions::default())?;
    Ok((
        dense_ok && sparse_ok && zero.epsilon <= 1e-6,
        format!(
            "{} dofs: abscissa {abscissa:.2e} ≤ {:.2e} at ε* = {:.4}; {} dofs: Cholesky certificate at ε* = {:.4}; U = 0: ε* = {:.1e}",
            dense_gen.dim(),
            dense.tol,
            dense.epsilon,
            large.dim(),
            sparse.epsilon,
            zero.epsilon
        ),
    ))
}

fn staged_vs_monolithic() -> Outcome {
    let gen = generator(&channel(), 9)?;
    let gram = assemble_gram(&gen, 0.0, None)?;
    let eps = calibrate_epsilon(&gen, &gram, &CalibrationOptions::default())?.epsilon;
    let table = check_b_ellipticity(&gen, &[0.1, 1.0, 10.0, 100.0, 1000.0], eps)?;
    let Some(xi_min) = table.xi_min else {
        return Ok((false, "no ellipticity threshold found".into()));
    };
    let xis: Vec<f64> = [10.0, 100.0, 1000.0]
        .into_iter()
        .filter(|x| *x >= xi_min)
        .collect();
    let mut worst = 0.0f64;
    for (k, &xi) in xis.iter().enumerate() {
        let solver = FluidBvpSolver::new(&gen, xi, eps)?;
        let bform = PlateBForm::assemble(&solver)?;
        for s in 0..20 {
            let data = ResolventData::seeded(&gen, (100 * k + s) as u64);
            let staged = solve_staged_with(&solver, &bform, &data)?;
            let mono = solve_resolvent_monolithic(&gen, xi, eps, &data)?;
            let diff: Vec<f64> = staged.y.iter().zip(&mono).map(|(a, b)| a - b).collect();
            worst = worst.max(gram.norm(&diff) / gram.norm(&mono));
        }
    }
    Ok((
        xis.len() == 3 && worst <= 1e-8,
        format!("ξ_min = {xi_min}, ξ = {xis:?}, 20 data each, max relative M-norm gap {worst:.2e}"),
    ))
}

fn large_shift_estimates() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, flow) in [("U = 0", AmbientFlow::zero(unit())), ("channel", channel())] {
        let gen = generator(&flow, 9)?;
        let (p, u, g) = large_shift_data(&gen, 8);
        let t = verify_large_shift_estimates(&gen, &[10.0, 100.0, 1000.0, 10000.0], (&p, &u, &g))?;
        let slope = t.pressure_slope(100.0, 10000.0).unwrap_or(f64::NAN);
        let spread = t.velocity_spread();
        pass &= (slope + 1.0).abs() <= 0.15 && spread < 2.0;
        detail.push(format!("{name}: slope {slope:.3}, H1 spread {spread:.3}"));
    }
    Ok((pass, detail.join("; ")))
}

fn ellipticity() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, flow) in [("U = 0", AmbientFlow::zero(unit())), ("channel", channel())] {
        let gen = generator(&flow, 9)?;
        let t = check_b_ellipticity(&gen, &[0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0], 0.0)?;
        let ok = t.xi_min.is_some_and(|m| {
            let beyond: Vec<f64> = t
                .rows
                .iter()
                .filter(|r| r.xi >= m)
                .map(|r| r.coercivity)
                .collect();
            beyond.iter().all(|c| *c >= COERCIVITY_FLOOR) && beyond.windows(2).all(|w| w[1] >= w[0])
        });
        pass &= ok;
        let smallest = t
            .rows
            .iter()
            .map(|r| r.coercivity)
            .fold(f64::INFINITY, f64::min);
        detail.push(format!(
            "{name}: ξ_min = {:?}, smallest constant {smallest:.4}",
            t.xi_min
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn growth_bound() -> Outcome {
    let gen = generator(&channel(), 8)?;
    let gram = assemble_gram(&gen, 0.0, None)?;
    let eps = calibrate_epsilon(&gen, &gram, &CalibrationOptions::default())?.epsilon;
    let r = growth_bound_check(&gen, &gram, eps, &[0.25, 0.5, 1.0, 2.0, 5.0])?;
    let worst = r.rows.iter().map(|x| x.norm / x.bound).fold(0.0, f64::max);
    let shifted = r.rows.iter().map(|x| x.shifted_norm).fold(0.0, f64::max);
    Ok((
        r.pass(),
        format!(
            "{} dofs, K = {:.4}: max ‖e^(At)‖/e^(Kt) = {worst:.4}, max ‖e^(Ât)‖ = {shifted:.6}",
            r.dim, r.rate
        ),
    ))
}

fn dirichlet_map() -> Outcome {
    let rows = estimate_dirichlet_norm(unit(), &[9, 17, 25], 20, 0)?;
    let drift = ratio_drift(&rows);
    let sups: Vec<String> = rows
        .iter()
        .map(|r| format!("{}³: {:.4}", r.n, r.sup_ratio))
        .collect();
    Ok((
        drift < 2.0,
        format!("sup ratios {}; drift {drift:.3}", sups.join(", ")),
    ))
}

fn coupling_fidelity() -> Outcome {
    let mut worst = 0.0f64;
    for flow in [AmbientFlow::zero(unit()), channel()] {
        let gen = generator(&flow, 7)?;
        let gram = assemble_gram(&gen, 0.0, None)?;
        let std = standard_gram(&gen)?;
        for scheme in [Scheme::ImplicitEuler, Scheme::Trapezoid] {
            let stepper = Stepper::new(&gen, Dynamics::Generator, scheme, 0.01)?;
            let t = simulate(
                &gen,
                &stepper,
                &gram,
                &std,
                &random_state(&gen, 5),
                0.5,
                usize::MAX,
            )?;
            worst = worst.max(t.max_coupling_residual());
        }
    }
    Ok((
        worst <= 1e-10,
        format!("max relative coupling defect {worst:.2e} over 4 trajectories"),
    ))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
                .map(|e| {
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        fs::read(e.path()).unwrap_or_default(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir()?;
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "grid.n = 7\nsimulate.dt = 0.01\nsimulate.t_final = 0.2\nscheme.xi = 10, 100\nresolvent.samples = 3\n")?;
    let mut compared = 0;
    for sub in ["simulate", "resolvent-verify", "dirichlet-norm"] {
        let mut runs = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{sub}-{k}"));
            let status = Command::new(env!("CARGO_BIN_EXE_flowplate"))
                .args([sub, "--deterministic", "--seed", "42", "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .output()?
                .status;
            if status.code() != Some(0) {
                return Ok((false, format!("{sub} exited with {status}")));
            }
            runs.push(csv_files(&out));
        }
        if runs[0].is_empty() || runs[0] != runs[1] {
            return Ok((false, format!("{sub} CSVs differ between runs")));
        }
        compared += runs[0].len();
    }
    Ok((
        true,
        format!("{compared} CSV files byte-identical across two runs"),
    ))
}

type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (
            "identity suite",
            identity_suite,
            Some(Duration::from_secs(120)),
        ),
        ("commutator formula", commutator, None),
        ("dissipativity certificate", dissipativity_certificate, None),
        (
            "staged vs monolithic resolvent",
            staged_vs_monolithic,
            Some(Duration::from_secs(300)),
        ),
        ("large-shift fluid estimates", large_shift_estimates, None),
        ("plate form ellipticity", ellipticity, None),
        (
            "semigroup growth bound",
            growth_bound,
            Some(Duration::from_secs(180)),
        ),
        ("Dirichlet map norm", dirichlet_map, None),
        ("coupling fidelity", coupling_fidelity, None),
        ("CSV determinism", determinism, None),
    ];
    let mut failures = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => match budget {
                Some(b) if elapsed > *b => (
                    false,
                    format!("{detail}; over the {} s budget", b.as_secs()),
                ),
                _ => (pass, detail),
            },
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} [{:>2}] {name}: {detail} ({:.1} s)",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            elapsed.as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
