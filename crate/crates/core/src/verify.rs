//! Verification suites: each check pins a measured quantity against a fixed
//! threshold and reports one row. The CLI `verify` command and the
//! acceptance test target both run these, so the gate is a single
//! implementation.
//!
//! Everything here is double precision; thresholds are part of the contract
//! and are not configurable.

use ndarray::Array2;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fixed_point::{
    bootstrap_diagnostic, bump_start, measure_contraction, solve_nonlinear,
    spectral_derivative_norm, standard_contraction_pairs, verify_uniqueness, ContractionEngine,
    SolveOptions,
};
use crate::grid::TorusGrid;
use crate::holder::{parabolic_norm_total, verify_interpolation, HolderConfig, HolderExponent};
use crate::linear::{
    check_garding, garding_min_constant, gronwall_check, schauder_ratio, solve_linear,
    solve_principal, LinearProblem, StepperConfig,
};
use crate::linop::{check_strong_ellipticity, CoeffField, LinearOperatorSpec};
use crate::multi_index::MultiIndex;
use crate::operator::linearize;
use crate::problems::{by_name, random_linear_problem, random_space_time};
use crate::section::SpaceTimeSection;
use crate::transport::{parallel_transport, ChristoffelSpec, Curve};

/// One verification row: a named measurement against its threshold.
#[derive(Debug, Clone)]
pub struct CheckRow {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub threshold: String,
    pub pass: bool,
}

impl CheckRow {
    fn new(
        suite: &'static str,
        name: impl Into<String>,
        measured: f64,
        threshold: impl Into<String>,
        pass: bool,
    ) -> Self {
        Self {
            suite,
            name: name.into(),
            measured,
            threshold: threshold.into(),
            pass,
        }
    }
}

fn alpha(v: f64) -> HolderExponent<f64> {
    HolderExponent::new(v).unwrap()
}

fn max_error_vs_exact(
    solution: &SpaceTimeSection<f64>,
    card: &crate::problems::ProblemCard<f64>,
    grid: &TorusGrid,
) -> f64 {
    let mut err: f64 = 0.0;
    for (m, &t) in solution.times().iter().enumerate() {
        let exact = card.exact_on(grid, t).expect("card has exact solution");
        for node in 0..grid.num_nodes() {
            for c in 0..solution.rank() {
                err = err.max((solution.values()[[m, node, c]] - exact[[node, c]]).abs());
            }
        }
    }
    err
}

/// Heat decay: the model solver reproduces the analytic decay to 1e-10 and
/// the fixed-point route to 1e-3.
pub fn heat_decay_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "solve";
    let card = by_name::<f64>("heat")?;
    let grid = TorusGrid::new(1, 64)?;
    let horizon = 0.1;
    let steps = 1000; // dt = 1e-4
    let u0 = card.initial_on(&grid)?;

    let f = SpaceTimeSection::zeros(&grid, 1, horizon, steps)?;
    let principal = solve_principal(&grid, 2, &f, u0.view(), horizon, steps)?;
    let principal_err = max_error_vs_exact(&principal, &card, &grid);

    let opts = SolveOptions::new(horizon, 1e-4, alpha(0.5)).with_tol(1e-9);
    let result = solve_nonlinear(&card.spec, &grid, u0.view(), &opts)?;
    let fixed_point_err = max_error_vs_exact(&result.solution, &card, &grid);

    Ok(vec![
        CheckRow::new(
            SUITE,
            "heat principal max error",
            principal_err,
            "<= 1e-10",
            principal_err <= 1e-10,
        ),
        CheckRow::new(
            SUITE,
            "heat fixed-point max error",
            fixed_point_err,
            "<= 1e-3",
            fixed_point_err <= 1e-3,
        ),
    ])
}

/// Biharmonic decay through the model solver.
pub fn biharmonic_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "solve";
    let card = by_name::<f64>("biharmonic")?;
    let grid = TorusGrid::new(1, 64)?;
    let horizon = 0.05;
    let steps = 500; // dt = 1e-4
    let u0 = card.initial_on(&grid)?;
    let f = SpaceTimeSection::zeros(&grid, 1, horizon, steps)?;
    let principal = solve_principal(&grid, 4, &f, u0.view(), horizon, steps)?;
    let err = max_error_vs_exact(&principal, &card, &grid);
    Ok(vec![CheckRow::new(
        SUITE,
        "biharmonic principal max error",
        err,
        "<= 1e-10",
        err <= 1e-10,
    )])
}

/// Fully nonlinear convergence on the manufactured card, with the
/// first-order step-refinement ratio.
pub fn nonlinear_convergence_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "solve";
    let card = by_name::<f64>("arctan")?;
    let grid = TorusGrid::new(1, 64)?;
    let delta = 0.05;
    let u0 = card.initial_on(&grid)?;

    let run = |dt: f64| -> Result<f64> {
        let opts = SolveOptions::new(delta, dt, alpha(0.5)).with_tol(1e-9);
        let result = solve_nonlinear(&card.spec, &grid, u0.view(), &opts)?;
        if (result.trace.final_delta - delta).abs() > 1e-12 {
            return Err(Error::Invalid(format!(
                "horizon was halved to {}",
                result.trace.final_delta
            )));
        }
        Ok(max_error_vs_exact(&result.solution, &card, &grid))
    };
    let coarse = run(1e-4)?;
    let fine = run(5e-5)?;
    let ratio = coarse / fine;

    Ok(vec![
        CheckRow::new(
            SUITE,
            "arctan manufactured max error (dt = 1e-4)",
            coarse,
            "<= 1e-3",
            coarse <= 1e-3,
        ),
        CheckRow::new(
            SUITE,
            "arctan error ratio dt vs dt/2",
            ratio,
            "in [1.6, 2.4]",
            (1.6..=2.4).contains(&ratio),
        ),
    ])
}

/// Contraction scaling on the semilinear card: log-log slope of the measured
/// factor against the horizon, and smallness of the factor at the shortest
/// horizon.
pub fn contraction_scaling_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "contraction";
    let card = by_name::<f64>("semilinear")?;
    let grid = TorusGrid::new(1, 64)?;
    let u0 = card.initial_on(&grid)?;
    let a = alpha(0.5);
    let config = HolderConfig::default();
    let deltas = [0.04, 0.02, 0.01, 0.005];
    let dt = 2.5e-4;

    let pairs =
        standard_contraction_pairs(&card.spec, &grid, u0.view(), a, &deltas, dt, 4, 2024, &config)?;
    let scaling =
        measure_contraction(&card.spec, &grid, u0.view(), a, &pairs, &deltas, &config)?;

    let slope = scaling.slope;
    let smallest = *scaling.factors.last().unwrap();
    let monotone = scaling
        .factors
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    Ok(vec![
        CheckRow::new(
            SUITE,
            "semilinear factor slope vs horizon",
            slope,
            "in [0.175, 0.325]",
            (0.175..=0.325).contains(&slope),
        ),
        CheckRow::new(
            SUITE,
            "factor at shortest horizon",
            smallest,
            "<= 0.5",
            smallest <= 0.5,
        ),
        CheckRow::new(
            SUITE,
            "factor nonincreasing under horizon halving",
            if monotone { 1.0 } else { 0.0 },
            "monotone",
            monotone,
        ),
    ])
}

/// Start-independence of the fixed point on the fully nonlinear card.
pub fn uniqueness_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "uniqueness";
    let card = by_name::<f64>("arctan")?;
    let grid = TorusGrid::new(1, 64)?;
    let u0 = card.initial_on(&grid)?;
    let a = alpha(0.5);
    let config = HolderConfig::default();
    let delta = 0.02;
    let dt = 1e-4;
    let steps = 200;

    // size the perturbation to sit inside the measured ball
    let engine = ContractionEngine::new(&card.spec, &grid, u0.view(), delta, steps)?;
    let start = engine.initial_iterate()?;
    let (first, _) = engine.apply(&start)?;
    let radius = 4.0 * parabolic_norm_total(&first.difference(&start)?, 2, a, &config)?;
    let raw_bump = bump_start(&grid, u0.view(), delta, steps, 1.0)?;
    let raw_norm = parabolic_norm_total(&raw_bump.difference(&start)?, 2, a, &config)?;
    let amplitude = (0.5 * radius / raw_norm).min(0.01);
    let bumped = bump_start(&grid, u0.view(), delta, steps, amplitude)?;

    let report = verify_uniqueness(
        &card.spec,
        &grid,
        u0.view(),
        delta,
        dt,
        1e-9,
        80,
        a,
        &config,
        (&start, &bumped),
    )?;
    Ok(vec![CheckRow::new(
        SUITE,
        "fixed-point distance between two starts",
        report.distance,
        "<= 1e-8",
        report.distance <= 1e-8,
    )])
}

/// Ellipticity constants of the catalog's flagship operators.
pub fn ellipticity_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "ellipticity";
    let grid = TorusGrid::new(1, 64)?;
    let mut rows = Vec::new();
    for (name, expect) in [("heat", 1.0), ("biharmonic", 1.0)] {
        let card = by_name::<f64>(name)?;
        let u0 = card.initial_on(&grid)?;
        let linop = linearize(&card.spec, &grid, u0.view(), 0.0)?;
        let report = check_strong_ellipticity(&linop, &grid, 0.0, 64, 8)?;
        let gap = (report.lambda - expect).abs();
        rows.push(CheckRow::new(
            SUITE,
            format!("lambda({name}) vs analytic"),
            gap,
            "<= 1e-12",
            gap <= 1e-12,
        ));
    }
    let card = by_name::<f64>("backward-heat")?;
    let u0 = card.initial_on(&grid)?;
    let linop = linearize(&card.spec, &grid, u0.view(), 0.0)?;
    let report = check_strong_ellipticity(&linop, &grid, 0.0, 64, 8)?;
    rows.push(CheckRow::new(
        SUITE,
        "backward heat reported non-elliptic",
        report.lambda,
        "lambda < 0",
        !report.elliptic && report.lambda < 0.0,
    ));
    Ok(rows)
}

/// Coercivity: the per-mode bound with the minimized constant, and the
/// integral inequality over seeded random sections.
pub fn garding_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "garding";
    let mut rows = Vec::new();

    for order in [2usize, 4] {
        let c = garding_min_constant::<f64>(order, 128);
        // worst margin of |k|^r + C - (1+|k|^2)^{r/2}/2 over all modes
        let mut margin = f64::INFINITY;
        for msq in 0..=(128 * 128) {
            let m = msq as f64;
            let value = m.powi((order / 2) as i32) + c - 0.5 * (1.0 + m).powi((order / 2) as i32);
            margin = margin.min(value);
        }
        rows.push(CheckRow::new(
            SUITE,
            format!("per-mode margin (order {order}, C = {c})"),
            margin,
            ">= 0",
            margin >= 0.0,
        ));
        if order == 2 {
            rows.push(CheckRow::new(
                SUITE,
                "minimized constant at order 2",
                c,
                "= 0.5",
                (c - 0.5).abs() <= 1e-14,
            ));
        }
    }

    let grid = TorusGrid::new(1, 64)?;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for order in [2usize, 4] {
        let c = garding_min_constant::<f64>(order, 128);
        let mut worst = f64::INFINITY;
        for _ in 0..100 {
            let psi = crate::problems::random_band_limited::<f64>(&grid, 1, 10, 1.0, &mut rng);
            let report = check_garding(&grid, order, psi.view())?;
            let margin = report.lhs - (0.5 * report.sobolev_half - c * report.l2);
            worst = worst.min(margin);
        }
        rows.push(CheckRow::new(
            SUITE,
            format!("integral inequality margin over 100 sections (order {order})"),
            worst,
            ">= -1e-10",
            worst >= -1e-10,
        ));
    }
    Ok(rows)
}

/// Gronwall energy fit on the shifted manufactured problem: finiteness,
/// stability under step halving, monotone growth over nested horizons.
pub fn gronwall_suite() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "gronwall";
    let grid = TorusGrid::new(1, 64)?;
    let a = alpha(0.5);
    let config = HolderConfig::default();
    let horizon = 0.2;

    // w = u - u0 solves dw/dt = L w + f_w with w(0) = 0, where
    // L = (2 + sin x) d_xx, u* = e^{-t} cos x, and
    // f_w = e^{-t} cos x (1 + sin x) - cos x (2 + sin x).
    let build = |steps: usize| -> Result<LinearProblem<f64>> {
        let nodes = grid.num_nodes();
        let mut linop = LinearOperatorSpec::new(1, 2, 1)?;
        let mut coeff = ndarray::Array3::zeros((nodes, 1, 1));
        for j in 0..nodes {
            coeff[[j, 0, 0]] = 2.0 + grid.node_position::<f64>(j)[0].sin();
        }
        linop.set_term(MultiIndex::new(&[0, 0]), CoeffField::Static(coeff))?;
        let f = SpaceTimeSection::from_fn(&grid, 1, horizon, steps, |x: &[f64], t: f64| {
            vec![
                (-t).exp() * x[0].cos() * (1.0 + x[0].sin()) - x[0].cos() * (2.0 + x[0].sin()),
            ]
        })?;
        LinearProblem::new(linop, f, Array2::zeros((nodes, 1)), horizon, steps)
    };

    let fitted_on = |steps: usize, keep: usize| -> Result<f64> {
        let problem = build(steps)?;
        let solution = solve_linear(&problem, &StepperConfig::auto(&problem.linop, 0.0))?;
        let u = solution.section.restrict_steps(keep)?;
        let f = problem.f.restrict_steps(keep)?;
        Ok(gronwall_check(&u, &f, 2, a, &config)?.fitted_c)
    };

    let steps = 1000; // dt = 2e-4
    let c_t1 = fitted_on(steps, 250)?; // T = 0.05
    let c_t2 = fitted_on(steps, 500)?; // T = 0.1
    let c_t3 = fitted_on(steps, 1000)?; // T = 0.2
    let c_half = fitted_on(2 * steps, 2 * 1000)?;
    let drift = (c_half - c_t3).abs() / c_t3;

    Ok(vec![
        CheckRow::new(
            SUITE,
            "fitted constant finite (T = 0.2)",
            c_t3,
            "finite",
            c_t3.is_finite() && c_t3 > 0.0,
        ),
        CheckRow::new(
            SUITE,
            "fitted constant drift under dt halving",
            drift,
            "< 0.1",
            drift < 0.1,
        ),
        CheckRow::new(
            SUITE,
            "nondecreasing over nested horizons",
            if c_t1 <= c_t2 && c_t2 <= c_t3 { 1.0 } else { 0.0 },
            "C(0.05) <= C(0.1) <= C(0.2)",
            c_t1 <= c_t2 && c_t2 <= c_t3,
        ),
    ])
}

/// Schauder-ratio boundedness over a seeded batch of random linear problems,
/// plus refinement stability on the heat card.
pub fn schauder_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "schauder";
    let a = alpha(0.5);
    let config = HolderConfig::default();

    let grid = TorusGrid::new(1, 32)?;
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let problem = random_linear_problem::<f64>(&grid, 0.05, 5000, seed)?;
        let solution = solve_linear(&problem, &StepperConfig::auto(&problem.linop, 0.0))?;
        let ratio = schauder_ratio(&problem, &solution.section, 2, a, &config)?;
        ratios.push(ratio);
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let median = 0.5 * (sorted[9] + sorted[10]);
    let max = *sorted.last().unwrap();

    // refinement stability on the heat card
    let heat_ratio = |n: usize, steps: usize| -> Result<f64> {
        let grid = TorusGrid::new(1, n)?;
        let card = by_name::<f64>("heat")?;
        let u0 = card.initial_on(&grid)?;
        let linop = linearize(&card.spec, &grid, u0.view(), 0.0)?;
        let f = SpaceTimeSection::zeros(&grid, 1, 0.1, steps)?;
        let problem = LinearProblem::new(linop, f, u0, 0.1, steps)?;
        let solution = solve_linear(&problem, &StepperConfig::auto(&problem.linop, 0.0))?;
        schauder_ratio(&problem, &solution.section, 2, a, &config)
    };
    let coarse = heat_ratio(64, 10_000)?;
    let fine = heat_ratio(128, 20_000)?;
    let change = if fine > coarse { fine / coarse } else { coarse / fine };

    Ok(vec![
        CheckRow::new(
            SUITE,
            format!("batch max / median (median = {median:.3})"),
            max / median,
            "<= 10",
            max <= 10.0 * median,
        ),
        CheckRow::new(
            SUITE,
            "heat ratio change under one refinement doubling",
            change,
            "< 2",
            change < 2.0,
        ),
    ])
}

/// Interpolation inequality over a seeded random batch with grid-doubling
/// stability of the fitted constants.
pub fn interpolation_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "interpolation";
    let a = alpha(0.5);
    let config = HolderConfig::default();

    let batch_max = |n: usize, eps: f64| -> Result<f64> {
        use rand::SeedableRng;
        let grid = TorusGrid::new(1, n)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let u = random_space_time::<f64>(&grid, 1, 0.5, 4, 5, 2, &mut rng)?;
            let report = verify_interpolation(&u, 2, a, eps, &config)?;
            if !report.constant.is_finite() {
                return Err(Error::Invalid("non-finite fitted constant".into()));
            }
            worst = worst.max(report.constant);
        }
        Ok(worst)
    };

    let mut rows = Vec::new();
    for eps in [0.1, 0.01] {
        let coarse = batch_max(32, eps)?;
        let fine = batch_max(64, eps)?;
        let change = if fine > coarse {
            fine / coarse
        } else {
            coarse / fine
        };
        rows.push(CheckRow::new(
            SUITE,
            format!("batch fitted C(eps = {eps}) finite"),
            coarse,
            "finite",
            coarse.is_finite(),
        ));
        rows.push(CheckRow::new(
            SUITE,
            format!("C(eps = {eps}) stability under grid doubling"),
            change,
            "< 2",
            change < 2.0,
        ));
    }

    // catalog solutions stay within 1.5x the batch constant
    let batch = batch_max(64, 0.1)?;
    let grid = TorusGrid::new(1, 64)?;
    let mut catalog_worst: f64 = 0.0;
    for name in ["heat", "arctan"] {
        let card = by_name::<f64>(name)?;
        let u = card.exact_section(&grid, 0.1, 50).unwrap()?;
        let report = verify_interpolation(&u, 2, a, 0.1, &config)?;
        catalog_worst = catalog_worst.max(report.constant);
    }
    rows.push(CheckRow::new(
        SUITE,
        "catalog solutions vs batch constant",
        catalog_worst / batch,
        "<= 1.5",
        catalog_worst <= 1.5 * batch,
    ));
    Ok(rows)
}

/// Parallel transport: rotation closed form and norm preservation.
pub fn transport_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "transport";
    let spec = ChristoffelSpec::new(
        2,
        Arc::new(|_x: f64| ndarray::array![[0.0, 1.0], [-1.0, 0.0]]),
    )?;
    let s_max = 1.0f64;
    let curve = Curve::unit_speed(s_max);
    let out = parallel_transport(&spec, &curve, &[1.0, 0.0], 1000)?;
    let v = out.final_value();
    let closed_form_err = ((v[0] - s_max.cos()).abs()).max((v[1] - s_max.sin()).abs());

    let wobble = ChristoffelSpec::new(
        2,
        Arc::new(|x: f64| {
            let w = 1.0 + 0.5 * x.sin();
            ndarray::array![[0.0, w], [-w, 0.0]]
        }),
    )?;
    let out2 = parallel_transport(&wobble, &Curve::unit_speed(2.0), &[0.6, 0.8], 2000)?;

    Ok(vec![
        CheckRow::new(
            SUITE,
            "rotation connection vs closed form",
            closed_form_err,
            "<= 1e-8",
            closed_form_err <= 1e-8,
        ),
        CheckRow::new(
            SUITE,
            "norm drift under compatible connection",
            out2.max_norm_drift,
            "<= 1e-8",
            out2.max_norm_drift <= 1e-8,
        ),
    ])
}

/// Difference-quotient norms: bounded and settling on the smooth card,
/// bounded by the spectral-derivative norm on the nonlinear card.
pub fn bootstrap_check() -> Result<Vec<CheckRow>> {
    const SUITE: &str = "bootstrap";
    let a = alpha(0.5);
    let config = HolderConfig::default();
    let grid = TorusGrid::new(1, 64)?;
    let dx = grid.spacing::<f64>();
    let offsets = [4.0 * dx, 2.0 * dx, dx];

    // smooth reference section e^{-t} sin x
    let smooth = SpaceTimeSection::from_fn(&grid, 1, 0.1, 20, |x: &[f64], t: f64| {
        vec![(-t).exp() * x[0].sin()]
    })?;
    let rows_smooth = bootstrap_diagnostic(&smooth, 2, a, &offsets, &config)?;
    let mut max_drift: f64 = 0.0;
    for w in rows_smooth.windows(2) {
        max_drift = max_drift.max((w[1].norm - w[0].norm).abs() / w[0].norm);
    }

    // fully nonlinear solution
    let card = by_name::<f64>("arctan")?;
    let u0 = card.initial_on(&grid)?;
    let opts = SolveOptions::new(0.05, 5e-4, alpha(0.5)).with_tol(1e-7);
    let solution = solve_nonlinear(&card.spec, &grid, u0.view(), &opts)?.solution;
    let rows_nl = bootstrap_diagnostic(&solution, 2, a, &offsets, &config)?;
    let reference = spectral_derivative_norm(&solution, 0, 2, a, &config)?;
    let max_quotient = rows_nl.iter().map(|r| r.norm).fold(0.0f64, f64::max);

    Ok(vec![
        CheckRow::new(
            SUITE,
            "smooth card quotient-norm drift",
            max_drift,
            "<= 0.05",
            max_drift <= 0.05,
        ),
        CheckRow::new(
            SUITE,
            "nonlinear card quotient norms vs spectral derivative",
            max_quotient / reference,
            "<= 3",
            max_quotient <= 3.0 * reference,
        ),
    ])
}

/// Named suites for the CLI; `all` appends the solve checks.
pub const SUITE_NAMES: [&str; 10] = [
    "ellipticity",
    "interpolation",
    "garding",
    "gronwall",
    "schauder",
    "contraction",
    "uniqueness",
    "bootstrap",
    "transport",
    "all",
];

/// Run one named suite (or every check for `all`).
pub fn run_suite(name: &str) -> Result<Vec<CheckRow>> {
    match name {
        "ellipticity" => ellipticity_check(),
        "interpolation" => interpolation_check(),
        "garding" => garding_check(),
        "gronwall" => gronwall_suite(),
        "schauder" => schauder_check(),
        "contraction" => contraction_scaling_check(),
        "uniqueness" => uniqueness_check(),
        "bootstrap" => bootstrap_check(),
        "transport" => transport_check(),
        "all" => {
            let mut rows = Vec::new();
            rows.extend(heat_decay_check()?);
            rows.extend(biharmonic_check()?);
            rows.extend(nonlinear_convergence_check()?);
            rows.extend(contraction_scaling_check()?);
            rows.extend(uniqueness_check()?);
            rows.extend(ellipticity_check()?);
            rows.extend(garding_check()?);
            rows.extend(gronwall_suite()?);
            rows.extend(schauder_check()?);
            rows.extend(interpolation_check()?);
            rows.extend(transport_check()?);
            rows.extend(bootstrap_check()?);
            Ok(rows)
        }
        other => Err(Error::Invalid(format!("unknown suite '{other}'"))),
    }
}
