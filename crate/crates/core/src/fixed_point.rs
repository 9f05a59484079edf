//! The contraction-map engine for the fully nonlinear Cauchy problem
//! `du/dt = P_t(u)`, `u(.,0) = u0`.
//!
//! One application of the map solves the linear system with the
//! linearization frozen at the initial section,
//!
//! ```text
//! dw/dt = L0 w + [F(., t, jets of u) - L0 u],   w(.,0) = u0,
//! ```
//!
//! and the solution of the nonlinear problem is its fixed point. The driver
//! iterates inside the ball `Y = { u | u(.,0) = u0, |u - u0| <= R }` of the
//! parabolic Hoelder norm, measures the contraction conditions instead of
//! assuming them (tube containment, factor at most one half, first-step
//! bound), and shrinks the horizon until they hold.

use ndarray::{Array2, Array3, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::holder::{parabolic_holder_norm, parabolic_norm_total, HolderConfig, HolderExponent, HolderNormReport};
use crate::jet::spectral_jet_with;
use crate::linear::{solve_linear, LinearProblem, StepperConfig};
use crate::linop::{check_strong_ellipticity, LinearOperatorSpec};
use crate::multi_index::MultiIndex;
use crate::operator::{evaluate_on_jets, linearize, NonlinearOperatorSpec, Tube};
use crate::scalar::{diag, lit, Scalar};
use crate::section::SpaceTimeSection;
use crate::spectral::SpectralEngine;

/// The iteration ball `Y`.
#[derive(Debug, Clone)]
pub struct BallSpec<T> {
    /// Initial section; every member agrees with it at `t = 0`.
    pub u0: Array2<T>,
    /// Ball radius in the parabolic Hoelder norm (`infinity` disables the
    /// norm test, used while the radius is being measured).
    pub radius: T,
    /// Time horizon.
    pub delta: T,
    /// Tube radius of the operator domain.
    pub tube_radius: T,
}

impl<T: Scalar> BallSpec<T> {
    /// Membership test: initial level agreement and norm distance from the
    /// constant-in-time extension of `u0`.
    pub fn check_membership(
        &self,
        u: &SpaceTimeSection<T>,
        order: usize,
        alpha: HolderExponent<T>,
        config: &HolderConfig,
    ) -> Result<()> {
        let nodes = u.grid().num_nodes();
        if self.u0.nrows() != nodes || self.u0.ncols() != u.rank() {
            return Err(Error::NotInBall {
                reason: "initial section shape mismatch".into(),
            });
        }
        if (u.horizon() - self.delta).abs() > lit::<T>(1e-9) * (T::one() + self.delta) {
            return Err(Error::NotInBall {
                reason: format!(
                    "horizon {} differs from ball horizon {}",
                    u.horizon(),
                    self.delta
                ),
            });
        }
        let mut initial_gap = T::zero();
        for node in 0..nodes {
            for c in 0..u.rank() {
                let d = (u.values()[[0, node, c]] - self.u0[[node, c]]).abs();
                if d > initial_gap {
                    initial_gap = d;
                }
            }
        }
        if initial_gap > lit(1e-10) {
            return Err(Error::NotInBall {
                reason: format!("initial level deviates by {initial_gap:e}"),
            });
        }
        if self.radius.is_finite() {
            let extension =
                SpaceTimeSection::constant_extension(u.grid(), self.u0.view(), u.horizon(), u.steps())?;
            let distance = parabolic_norm_total(&u.difference(&extension)?, order, alpha, config)?;
            let slack = self.radius * lit::<T>(1e-9) + lit::<T>(1e-12);
            if distance > self.radius + slack {
                return Err(Error::NotInBall {
                    reason: format!("norm distance {distance:e} exceeds radius {:e}", self.radius),
                });
            }
        }
        Ok(())
    }
}

/// One fixed-point iteration record.
#[derive(Debug, Clone)]
pub struct IterationRecord<T> {
    pub iter: usize,
    /// `d_k = |u_{k+1} - u_k|` in the parabolic norm.
    pub distance: T,
    /// `q_k = d_k / d_{k-1}`; absent on the first application.
    pub factor: Option<T>,
    /// Worst tube margin over the time levels of the input iterate.
    pub tube_margin: T,
    /// Nonlinear residual of the produced iterate.
    pub residual: T,
    /// Tube containment and ball membership held.
    pub cond31: bool,
    /// Measured factor at most one half.
    pub cond33: bool,
    /// `R/2` at least the measured first-correction norm.
    pub cond37: bool,
    pub delta: T,
}

/// Full iteration history, across horizon halvings.
#[derive(Debug, Clone)]
pub struct ContractionTrace<T> {
    pub records: Vec<IterationRecord<T>>,
    pub final_delta: T,
    pub final_radius: T,
    pub halvings: u32,
}

impl<T: Scalar> ContractionTrace<T> {
    fn empty() -> Self {
        Self {
            records: Vec::new(),
            final_delta: T::zero(),
            final_radius: T::zero(),
            halvings: 0,
        }
    }
}

/// Converged solve output.
pub struct SolveResult<T> {
    pub solution: SpaceTimeSection<T>,
    pub trace: ContractionTrace<T>,
    /// `sup |d_t u - P_t(u)|` over interior time levels.
    pub residual: T,
    pub norm_report: HolderNormReport<T>,
}

/// Driver knobs.
#[derive(Debug, Clone)]
pub struct SolveOptions<T> {
    pub delta_init: T,
    /// Target time step; the level count per attempt is `round(delta/dt)`.
    pub dt: T,
    pub alpha: HolderExponent<T>,
    /// Fixed-point distance tolerance.
    pub tol: T,
    pub max_iter: usize,
    pub max_halvings: u32,
    pub holder: HolderConfig,
}

impl<T: Scalar> SolveOptions<T> {
    pub fn new(delta_init: T, dt: T, alpha: HolderExponent<T>) -> Self {
        Self {
            delta_init,
            dt,
            alpha,
            tol: lit(1e-8),
            max_iter: 60,
            max_halvings: 12,
            holder: HolderConfig::default(),
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }
}

/// `sup` over interior time levels of `|d_t u - F(., t, jets of u)|`.
pub fn nonlinear_residual<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    u: &SpaceTimeSection<T>,
) -> Result<T> {
    let engine = SpectralEngine::new(u.grid());
    let du_dt = u.time_derivative()?;
    let mut residual = T::zero();
    for m in 1..u.levels() - 1 {
        let jets = spectral_jet_with(&engine, u.level(m), spec.order(), u.times()[m])?;
        let fu = evaluate_on_jets(spec, &jets)?;
        for node in 0..u.grid().num_nodes() {
            for c in 0..u.rank() {
                let defect = (du_dt.values()[[m, node, c]] - fu[[node, c]]).abs();
                if defect > residual {
                    residual = defect;
                }
            }
        }
    }
    Ok(residual)
}

/// The contraction map with its frozen ingredients: linearization at the
/// initial section, tube, and stepper. Reused across iterations and scans.
pub struct ContractionEngine<'a, T: Scalar> {
    spec: &'a NonlinearOperatorSpec<T>,
    grid: &'a TorusGrid,
    u0: Array2<T>,
    delta: T,
    steps: usize,
    frozen: LinearOperatorSpec<T>,
    tube: Tube<T>,
    stepper: StepperConfig<T>,
    lambda: T,
    engine: SpectralEngine<T>,
}

impl<'a, T: Scalar> ContractionEngine<'a, T> {
    /// Linearize at `u0`, check strong ellipticity (rejecting `lambda <= 0`),
    /// and freeze the tube and stepper.
    pub fn new(
        spec: &'a NonlinearOperatorSpec<T>,
        grid: &'a TorusGrid,
        u0: ArrayView2<T>,
        delta: T,
        steps: usize,
    ) -> Result<Self> {
        if steps < 2 {
            return Err(Error::TooFewTimeLevels);
        }
        let frozen = linearize(spec, grid, u0, T::zero())?;
        let report = check_strong_ellipticity(&frozen, grid, T::zero(), 32, 8)?;
        if !report.elliptic {
            return Err(Error::NotElliptic {
                lambda: diag(report.lambda),
            });
        }
        let tube = Tube::new(spec, grid, u0)?;
        let stepper = StepperConfig::auto(&frozen, T::zero());
        Ok(Self {
            spec,
            grid,
            u0: u0.to_owned(),
            delta,
            steps,
            frozen,
            tube,
            stepper,
            lambda: report.lambda,
            engine: SpectralEngine::new(grid),
        })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn frozen_linop(&self) -> &LinearOperatorSpec<T> {
        &self.frozen
    }

    /// The canonical starting iterate: `u0` extended constantly in time.
    pub fn initial_iterate(&self) -> Result<SpaceTimeSection<T>> {
        SpaceTimeSection::constant_extension(self.grid, self.u0.view(), self.delta, self.steps)
    }

    /// Apply the map: returns `G(u)` and the worst tube margin of `u`.
    ///
    /// Errors with a tube violation when some level of `u` leaves the
    /// operator domain (the measurable face of the horizon condition).
    pub fn apply(&self, u: &SpaceTimeSection<T>) -> Result<(SpaceTimeSection<T>, T)> {
        if u.steps() != self.steps
            || (u.horizon() - self.delta).abs() > lit::<T>(1e-9) * (T::one() + self.delta)
        {
            return Err(Error::ShapeMismatch {
                context: "contraction map input".into(),
                expected: format!("{} steps over horizon {}", self.steps, self.delta),
                got: format!("{} steps over horizon {}", u.steps(), u.horizon()),
            });
        }
        let nodes = self.grid.num_nodes();
        let rank = self.spec.rank();
        let mut margin = T::infinity();
        let mut source = Array3::zeros((u.levels(), nodes, rank));
        for m in 0..u.levels() {
            let t = u.times()[m];
            let jets = spectral_jet_with(&self.engine, u.level(m), self.spec.order(), t)?;
            let level_margin = self.tube.check(&jets)?;
            if level_margin < margin {
                margin = level_margin;
            }
            let fu = evaluate_on_jets(self.spec, &jets)?;
            let lu = self.frozen.apply_to_jets(&jets, T::zero())?;
            for node in 0..nodes {
                for c in 0..rank {
                    source[[m, node, c]] = fu[[node, c]] - lu[[node, c]];
                }
            }
        }
        let f = SpaceTimeSection::new(self.grid.clone(), u.times().to_vec(), source)?;
        let problem = LinearProblem::new(
            self.frozen.clone(),
            f,
            self.u0.clone(),
            self.delta,
            self.steps,
        )?;
        let solution = solve_linear(&problem, &self.stepper)?;
        Ok((solution.section, margin))
    }
}

/// One application of the contraction map on a checked ball member.
pub fn contraction_map<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    ball: &BallSpec<T>,
    u: &SpaceTimeSection<T>,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<SpaceTimeSection<T>> {
    ball.check_membership(u, spec.order(), alpha, config)?;
    let engine = ContractionEngine::new(spec, grid, ball.u0.view(), ball.delta, u.steps())?;
    Ok(engine.apply(u)?.0)
}

enum AttemptOutcome<T> {
    Converged(Box<SolveResult<T>>),
    Restart,
}

/// Solve the nonlinear Cauchy problem by fixed-point iteration with measured
/// contraction conditions and adaptive horizon halving.
pub fn solve_nonlinear<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    u0: ArrayView2<T>,
    opts: &SolveOptions<T>,
) -> Result<SolveResult<T>> {
    let mut trace = ContractionTrace::empty();
    let mut delta = opts.delta_init;
    for halving in 0..=opts.max_halvings {
        let steps = steps_for(delta, opts.dt);
        // a non-elliptic linearization cannot be cured by a shorter horizon
        let engine = ContractionEngine::new(spec, grid, u0, delta, steps)?;
        match run_attempt(&engine, opts, delta, &mut trace)? {
            AttemptOutcome::Converged(mut result) => {
                result.trace.records = trace.records;
                result.trace.halvings = halving;
                result.trace.final_delta = delta;
                return Ok(*result);
            }
            AttemptOutcome::Restart => {
                trace.halvings = halving;
                delta = delta / lit::<T>(2.0);
            }
        }
    }
    Err(Error::NoContractionHorizon {
        halvings: opts.max_halvings,
        delta: diag(delta),
    })
}

fn steps_for<T: Scalar>(delta: T, dt: T) -> usize {
    let raw = (delta / dt).round().to_f64().unwrap_or(2.0) as usize;
    raw.max(2)
}

fn run_attempt<T: Scalar>(
    engine: &ContractionEngine<'_, T>,
    opts: &SolveOptions<T>,
    delta: T,
    trace: &mut ContractionTrace<T>,
) -> Result<AttemptOutcome<T>> {
    let spec_order = engine.spec.order();
    let start = engine.initial_iterate()?;
    let (first, margin) = match engine.apply(&start) {
        Ok(pair) => pair,
        Err(Error::TubeViolation { .. }) => return Ok(AttemptOutcome::Restart),
        Err(e) => return Err(e),
    };
    let d0 = parabolic_norm_total(
        &first.difference(&start)?,
        spec_order,
        opts.alpha,
        &opts.holder,
    )?;
    // first-step bound with a factor-two margin
    let radius = lit::<T>(4.0) * d0;
    let cond37 = radius / lit::<T>(2.0) >= d0;
    let extension = start.clone();

    let residual0 = nonlinear_residual(engine.spec, &first)?;
    trace.records.push(IterationRecord {
        iter: 0,
        distance: d0,
        factor: None,
        tube_margin: margin,
        residual: residual0,
        cond31: true,
        cond33: true,
        cond37,
        delta,
    });
    if d0 <= opts.tol {
        return converged(engine, first, trace, radius, opts);
    }

    let mut current = first;
    let mut prev_distance = d0;
    for k in 1..opts.max_iter {
        let (next, margin) = match engine.apply(&current) {
            Ok(pair) => pair,
            Err(Error::TubeViolation { .. }) => return Ok(AttemptOutcome::Restart),
            Err(e) => return Err(e),
        };
        let distance = parabolic_norm_total(
            &next.difference(&current)?,
            spec_order,
            opts.alpha,
            &opts.holder,
        )?;
        let factor = distance / prev_distance;
        let membership = parabolic_norm_total(
            &next.difference(&extension)?,
            spec_order,
            opts.alpha,
            &opts.holder,
        )? <= radius * (T::one() + lit(1e-9));
        let residual = nonlinear_residual(engine.spec, &next)?;
        trace.records.push(IterationRecord {
            iter: k,
            distance,
            factor: Some(factor),
            tube_margin: margin,
            residual,
            cond31: membership,
            cond33: factor <= lit(0.5),
            cond37,
            delta,
        });

        if distance <= opts.tol {
            return converged(engine, next, trace, radius, opts);
        }
        if !membership {
            return Ok(AttemptOutcome::Restart);
        }
        if factor >= T::one() {
            return Ok(AttemptOutcome::Restart);
        }
        if k >= 3 && factor > lit(0.5) {
            return Ok(AttemptOutcome::Restart);
        }
        prev_distance = distance;
        current = next;
    }
    Ok(AttemptOutcome::Restart)
}

fn converged<T: Scalar>(
    engine: &ContractionEngine<'_, T>,
    solution: SpaceTimeSection<T>,
    trace: &ContractionTrace<T>,
    radius: T,
    opts: &SolveOptions<T>,
) -> Result<AttemptOutcome<T>> {
    let residual = nonlinear_residual(engine.spec, &solution)?;
    let norm_report =
        parabolic_holder_norm(&solution, engine.spec.order(), opts.alpha, &opts.holder)?;
    Ok(AttemptOutcome::Converged(Box::new(SolveResult {
        solution,
        trace: ContractionTrace {
            records: Vec::new(),
            final_delta: trace
                .records
                .last()
                .map(|r| r.delta)
                .unwrap_or(engine.delta()),
            final_radius: radius,
            halvings: 0,
        },
        residual,
        norm_report,
    })))
}

/// Empirical Lipschitz factors of the map over supplied ball-member pairs,
/// at each horizon in `deltas`, with the log-log slope of factor vs horizon.
#[derive(Debug, Clone)]
pub struct ContractionScaling<T> {
    pub deltas: Vec<T>,
    pub factors: Vec<T>,
    /// Least-squares slope of `ln factor` against `ln delta`; NaN when fewer
    /// than two positive factors exist (identically linear operators).
    pub slope: T,
    pub intercept: T,
    pub skipped_pairs: usize,
}

/// Measure `max |G(u) - G(v)| / |u - v|` over pairs restricted to each
/// horizon. Pairs live on the longest horizon and are truncated per delta,
/// so the same underlying sections are compared across scales; every member
/// must belong to the measured ball at every delta. Pairs with `u = v` are
/// skipped and counted.
pub fn measure_contraction<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    u0: ArrayView2<T>,
    alpha: HolderExponent<T>,
    pairs: &[(SpaceTimeSection<T>, SpaceTimeSection<T>)],
    deltas: &[T],
    config: &HolderConfig,
) -> Result<ContractionScaling<T>> {
    if deltas.len() < 2 {
        return Err(Error::Invalid(
            "contraction scaling needs at least two horizons".into(),
        ));
    }
    if pairs.is_empty() {
        return Err(Error::Invalid("no pairs supplied".into()));
    }
    let dt = pairs[0].0.dt();
    let order = spec.order();
    let mut factors = Vec::with_capacity(deltas.len());
    let mut skipped = 0usize;

    for &delta in deltas {
        let steps = steps_for(delta, dt);
        if ((lit::<T>(steps as f64) * dt) - delta).abs() > lit::<T>(1e-9) * (T::one() + delta) {
            return Err(Error::Invalid(format!(
                "horizon {delta} is not a multiple of the pair time step {dt}"
            )));
        }
        let engine = ContractionEngine::new(spec, grid, u0, delta, steps)?;
        let start = engine.initial_iterate()?;
        let (first, _) = engine.apply(&start)?;
        let radius = lit::<T>(4.0)
            * parabolic_norm_total(&first.difference(&start)?, order, alpha, config)?;
        let ball = BallSpec {
            u0: u0.to_owned(),
            radius,
            delta,
            tube_radius: spec.tube_radius(),
        };

        let mut factor = T::zero();
        for (u_full, v_full) in pairs {
            let u = u_full.restrict_steps(steps)?;
            let v = v_full.restrict_steps(steps)?;
            ball.check_membership(&u, order, alpha, config)?;
            ball.check_membership(&v, order, alpha, config)?;
            let denom = parabolic_norm_total(&u.difference(&v)?, order, alpha, config)?;
            if denom == T::zero() {
                skipped += 1;
                continue;
            }
            let (gu, _) = engine.apply(&u)?;
            let (gv, _) = engine.apply(&v)?;
            let num = parabolic_norm_total(&gu.difference(&gv)?, order, alpha, config)?;
            let ratio = num / denom;
            if ratio > factor {
                factor = ratio;
            }
        }
        factors.push(factor);
    }

    let (slope, intercept) = log_log_fit(deltas, &factors);
    Ok(ContractionScaling {
        deltas: deltas.to_vec(),
        factors,
        slope,
        intercept,
        skipped_pairs: skipped,
    })
}

fn log_log_fit<T: Scalar>(x: &[T], y: &[T]) -> (T, T) {
    let points: Vec<(T, T)> = x
        .iter()
        .zip(y)
        .filter(|(_, &yv)| yv > T::zero())
        .map(|(&xv, &yv)| (xv.ln(), yv.ln()))
        .collect();
    if points.len() < 2 {
        return (T::nan(), T::nan());
    }
    let n = lit::<T>(points.len() as f64);
    let mean_x = points.iter().map(|p| p.0).sum::<T>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (px, py) in &points {
        sxx += (*px - mean_x) * (*px - mean_x);
        sxy += (*px - mean_x) * (*py - mean_y);
    }
    let slope = sxy / sxx;
    (slope, mean_y - slope * mean_x)
}

/// Build ball-member pairs for the scaling measurement: bumps
/// `a sin(m x + phase) (t / t_ref)^{alpha/r}` added to the constant
/// extension of `u0`. The fractional time profile saturates the top-order
/// time-Hoelder budget at every scale, so restrictions stay comparable
/// across horizons; amplitudes are normalized to fit inside the measured
/// ball at every delta.
pub fn standard_contraction_pairs<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    u0: ArrayView2<T>,
    alpha: HolderExponent<T>,
    deltas: &[T],
    dt: T,
    count: usize,
    seed: u64,
    config: &HolderConfig,
) -> Result<Vec<(SpaceTimeSection<T>, SpaceTimeSection<T>)>> {
    if count == 0 {
        return Err(Error::Invalid("pair count must be positive".into()));
    }
    let order = spec.order();
    let horizon = deltas
        .iter()
        .copied()
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let steps = steps_for(horizon, dt);
    let extension = SpaceTimeSection::constant_extension(grid, u0, horizon, steps)?;
    let exponent = alpha.value() / lit(order as f64);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bumps: Vec<SpaceTimeSection<T>> = Vec::with_capacity(count);
    for _ in 0..count {
        let mode = rng.random_range(1..=2) as f64;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let amp = rng.random_range(0.5..1.0);
        let component = rng.random_range(0..spec.rank());
        let bump = SpaceTimeSection::from_fn(grid, spec.rank(), horizon, steps, |x, t| {
            let profile = if t > T::zero() {
                (t / horizon).powf(exponent)
            } else {
                T::zero()
            };
            let spatial = lit::<T>(amp)
                * (lit::<T>(mode) * x[0] + lit::<T>(phase)).sin();
            let mut v = vec![T::zero(); spec.rank()];
            v[component] = spatial * profile;
            v
        })?;
        bumps.push(bump);
    }

    // scale all bumps to sit inside the measured ball at every horizon
    let mut scale = T::infinity();
    for &delta in deltas {
        let steps_d = steps_for(delta, dt);
        let engine = ContractionEngine::new(spec, grid, u0, delta, steps_d)?;
        let start = engine.initial_iterate()?;
        let (first, _) = engine.apply(&start)?;
        let radius = lit::<T>(4.0)
            * parabolic_norm_total(&first.difference(&start)?, order, alpha, config)?;
        for bump in &bumps {
            let norm = parabolic_norm_total(
                &bump.restrict_steps(steps_d)?,
                order,
                alpha,
                config,
            )?;
            if norm > T::zero() {
                let s = lit::<T>(0.8) * radius / norm;
                if s < scale {
                    scale = s;
                }
            }
        }
    }
    if !scale.is_finite() {
        return Err(Error::Invalid("degenerate bump normalization".into()));
    }

    let mut pairs = Vec::with_capacity(count);
    for bump in bumps {
        let member = extension.sum(&bump.scale(scale))?;
        pairs.push((member, extension.clone()));
    }
    Ok(pairs)
}

/// Start-independence probe: iterate to the fixed point from two distinct
/// ball members over a fixed horizon and report the distance between the
/// two limits.
#[derive(Debug, Clone)]
pub struct UniquenessReport<T> {
    pub distance: T,
    pub iterations: (usize, usize),
    pub residuals: (T, T),
}

pub fn verify_uniqueness<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    u0: ArrayView2<T>,
    delta: T,
    dt: T,
    tol: T,
    max_iter: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
    starts: (&SpaceTimeSection<T>, &SpaceTimeSection<T>),
) -> Result<UniquenessReport<T>> {
    let order = spec.order();
    let steps = steps_for(delta, dt);
    let engine = ContractionEngine::new(spec, grid, u0, delta, steps)?;
    let start0 = engine.initial_iterate()?;
    let (first, _) = engine.apply(&start0)?;
    let radius =
        lit::<T>(4.0) * parabolic_norm_total(&first.difference(&start0)?, order, alpha, config)?;
    let ball = BallSpec {
        u0: u0.to_owned(),
        radius,
        delta,
        tube_radius: spec.tube_radius(),
    };
    ball.check_membership(starts.0, order, alpha, config)?;
    ball.check_membership(starts.1, order, alpha, config)?;

    let run = |start: &SpaceTimeSection<T>| -> Result<(SpaceTimeSection<T>, usize)> {
        let mut current = start.clone();
        for k in 0..max_iter {
            let (next, _) = engine.apply(&current)?;
            let distance =
                parabolic_norm_total(&next.difference(&current)?, order, alpha, config)?;
            if distance <= tol {
                return Ok((next, k + 1));
            }
            current = next;
        }
        Err(Error::NoContractionHorizon {
            halvings: 0,
            delta: diag(delta),
        })
    };

    let (fix1, it1) = run(starts.0)?;
    let (fix2, it2) = run(starts.1)?;
    let distance = parabolic_norm_total(&fix1.difference(&fix2)?, order, alpha, config)?;
    let res1 = nonlinear_residual(spec, &fix1)?;
    let res2 = nonlinear_residual(spec, &fix2)?;
    Ok(UniquenessReport {
        distance,
        iterations: (it1, it2),
        residuals: (res1, res2),
    })
}

/// The canonical second start for uniqueness probes:
/// `u0` extended plus `amplitude * sin(x + ..) * t (delta - t)`, which
/// vanishes at `t = 0` and so lies in the ball once scaled inside `R`.
pub fn bump_start<T: Scalar>(
    grid: &TorusGrid,
    u0: ArrayView2<T>,
    delta: T,
    steps: usize,
    amplitude: T,
) -> Result<SpaceTimeSection<T>> {
    let rank = u0.ncols();
    let extension = SpaceTimeSection::constant_extension(grid, u0, delta, steps)?;
    let bump = SpaceTimeSection::from_fn(grid, rank, delta, steps, |x, t| {
        let mut v = vec![T::zero(); rank];
        v[0] = amplitude * x[0].sin() * t * (delta - t);
        v
    })?;
    extension.sum(&bump)
}

/// Difference-quotient regularity probe: for each spatial direction and each
/// offset `h` (an integer multiple of the grid spacing), form
/// `u_h(x,t) = (u(x + h e_i, t) - u(x, t)) / h` on the torus and report its
/// full parabolic Hoelder norm.
#[derive(Debug, Clone)]
pub struct BootstrapRow<T> {
    pub direction: usize,
    pub h: T,
    pub offset_nodes: usize,
    pub norm: T,
}

pub fn bootstrap_diagnostic<T: Scalar>(
    u: &SpaceTimeSection<T>,
    order: usize,
    alpha: HolderExponent<T>,
    offsets: &[T],
    config: &HolderConfig,
) -> Result<Vec<BootstrapRow<T>>> {
    let grid = u.grid();
    let dx = grid.spacing::<T>();
    let mut rows = Vec::new();
    for &h in offsets {
        let ratio = h / dx;
        let nearest = ratio.round();
        if (ratio - nearest).abs() > lit(1e-9) || nearest < T::one() {
            return Err(Error::NotGridMultiple {
                h: diag(h),
                dx: diag(dx),
            });
        }
        let offset = nearest.to_f64().unwrap() as usize;
        for dir in 0..grid.dim() {
            let mut values = Array3::zeros(u.values().dim());
            for m in 0..u.levels() {
                for node in 0..grid.num_nodes() {
                    let shifted = grid.shifted_node(node, dir, offset as isize);
                    for c in 0..u.rank() {
                        values[[m, node, c]] = (u.values()[[m, shifted, c]]
                            - u.values()[[m, node, c]])
                            / h;
                    }
                }
            }
            let quotient = SpaceTimeSection::new(grid.clone(), u.times().to_vec(), values)?;
            let norm = parabolic_norm_total(&quotient, order, alpha, config)?;
            rows.push(BootstrapRow {
                direction: dir,
                h,
                offset_nodes: offset,
                norm,
            });
        }
    }
    Ok(rows)
}

/// Spectral-derivative comparison norm for the bootstrap diagnostic: the
/// parabolic norm of `d_{x_dir} u` computed by Fourier differentiation.
pub fn spectral_derivative_norm<T: Scalar>(
    u: &SpaceTimeSection<T>,
    dir: usize,
    order: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<T> {
    let derivative = u.spatial_derivative(&MultiIndex::new(&[dir]))?;
    parabolic_norm_total(&derivative, order, alpha, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    fn alpha(v: f64) -> HolderExponent<f64> {
        HolderExponent::new(v).unwrap()
    }

    fn heat_spec() -> NonlinearOperatorSpec<f64> {
        NonlinearOperatorSpec::new(
            1,
            2,
            1,
            100.0,
            Arc::new(|jet: &crate::jet::Jet<f64>| vec![jet.deriv(&[0, 0], 0)]),
        )
        .unwrap()
        .with_derivative(Arc::new(|jet: &crate::jet::Jet<f64>| {
            let mut d = Array2::zeros((1, jet.layout().len()));
            d[[0, 2]] = 1.0;
            d
        }))
    }

    fn sine_section(grid: &TorusGrid, k: f64) -> Array2<f64> {
        let mut s = Array2::zeros((grid.num_nodes(), 1));
        for j in 0..grid.num_nodes() {
            s[[j, 0]] = (k * grid.node_position::<f64>(j)[0]).sin();
        }
        s
    }

    #[test]
    fn linear_operator_makes_constant_map() {
        // for linear F the u-dependence of the source cancels: G(u) = G(v)
        let g = grid(32);
        let spec = heat_spec();
        let u0 = sine_section(&g, 1.0);
        let delta = 0.05;
        let steps = 50;
        let engine = ContractionEngine::new(&spec, &g, u0.view(), delta, steps).unwrap();
        let start = engine.initial_iterate().unwrap();
        let bumped = bump_start(&g, u0.view(), delta, steps, 0.05).unwrap();
        let (gu, _) = engine.apply(&start).unwrap();
        let (gv, _) = engine.apply(&bumped).unwrap();
        let gap = gu.difference(&gv).unwrap().max_abs();
        assert!(gap <= 1e-12, "constant map gap {gap}");
    }

    #[test]
    fn first_iterate_agrees_with_direct_shifted_solve() {
        // w - u0 must solve dv/dt = L0 v + F(jets of u0), v(0) = 0; check the
        // two assembly routes against each other
        let g = grid(32);
        let spec = NonlinearOperatorSpec::new(
            1,
            2,
            1,
            100.0,
            Arc::new(|jet: &crate::jet::Jet<f64>| {
                vec![jet.deriv(&[0, 0], 0) + jet.value(0).powi(2)]
            }),
        )
        .unwrap();
        let u0 = sine_section(&g, 1.0);
        let delta = 0.02;
        let steps = 40;
        let engine = ContractionEngine::new(&spec, &g, u0.view(), delta, steps).unwrap();
        let start = engine.initial_iterate().unwrap();
        let (w, _) = engine.apply(&start).unwrap();

        // independent route: source F(jets of u0) constant in time, zero init
        let jets = crate::jet::spectral_jet(u0.view(), &g, 2, 0.0).unwrap();
        let fu0 = evaluate_on_jets(&spec, &jets).unwrap();
        let dt = delta / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|m| dt * m as f64).collect();
        let mut f_values = Array3::zeros((steps + 1, g.num_nodes(), 1));
        for m in 0..=steps {
            for node in 0..g.num_nodes() {
                f_values[[m, node, 0]] = fu0[[node, 0]];
            }
        }
        let f = SpaceTimeSection::new(g.clone(), times, f_values).unwrap();
        let problem = LinearProblem::new(
            engine.frozen_linop().clone(),
            f,
            Array2::zeros((g.num_nodes(), 1)),
            delta,
            steps,
        )
        .unwrap();
        let v_hat = solve_linear(&problem, &StepperConfig::auto(engine.frozen_linop(), 0.0))
            .unwrap()
            .section;

        let w_minus_u0 = w.difference(&start).unwrap();
        let gap = w_minus_u0.difference(&v_hat).unwrap().max_abs();
        assert!(gap <= 1e-8, "two-route discrepancy {gap}");
    }

    #[test]
    fn heat_solve_converges_in_two_iterations() {
        let g = grid(64);
        let spec = heat_spec();
        let u0 = sine_section(&g, 3.0);
        let opts = SolveOptions::new(0.1, 1e-4, alpha(0.5)).with_tol(1e-9);
        let result = solve_nonlinear(&spec, &g, u0.view(), &opts).unwrap();
        assert!(result.trace.records.len() <= 2);
        let mut err: f64 = 0.0;
        for (m, &t) in result.solution.times().iter().enumerate() {
            for j in 0..g.num_nodes() {
                let x = g.node_position::<f64>(j)[0];
                let expect = (-9.0 * t).exp() * (3.0 * x).sin();
                err = err.max((result.solution.values()[[m, j, 0]] - expect).abs());
            }
        }
        assert!(err <= 1e-3, "heat error {err}");
    }

    #[test]
    fn non_elliptic_rejected_up_front() {
        let g = grid(16);
        let backward = NonlinearOperatorSpec::new(
            1,
            2,
            1,
            100.0,
            Arc::new(|jet: &crate::jet::Jet<f64>| vec![-jet.deriv(&[0, 0], 0)]),
        )
        .unwrap();
        let u0 = sine_section(&g, 1.0);
        let opts = SolveOptions::new(0.05, 1e-3, alpha(0.5));
        assert!(matches!(
            solve_nonlinear(&backward, &g, u0.view(), &opts),
            Err(Error::NotElliptic { .. })
        ));
    }

    #[test]
    fn identical_starts_reach_identical_fixed_points() {
        let g = grid(32);
        let spec = heat_spec();
        let u0 = sine_section(&g, 2.0);
        let delta = 0.02;
        let steps = 40;
        let start = SpaceTimeSection::constant_extension(&g, u0.view(), delta, steps).unwrap();
        let report = verify_uniqueness(
            &spec,
            &g,
            u0.view(),
            delta,
            delta / steps as f64,
            1e-10,
            30,
            alpha(0.5),
            &HolderConfig::default(),
            (&start, &start),
        )
        .unwrap();
        assert_eq!(report.distance, 0.0);
    }

    #[test]
    fn bootstrap_quotients_of_constant_section_vanish() {
        let g = grid(16);
        let u = SpaceTimeSection::<f64>::from_fn(&g, 1, 0.1, 4, |_, _| vec![2.0]).unwrap();
        let dx = g.spacing::<f64>();
        let rows = bootstrap_diagnostic(
            &u,
            2,
            alpha(0.5),
            &[4.0 * dx, 2.0 * dx, dx],
            &HolderConfig::default(),
        )
        .unwrap();
        for row in rows {
            assert!(row.norm <= 1e-12);
        }
    }

    #[test]
    fn bootstrap_rejects_non_multiple_offset() {
        let g = grid(16);
        let u = SpaceTimeSection::<f64>::from_fn(&g, 1, 0.1, 4, |x, _| vec![x[0].sin()]).unwrap();
        let dx = g.spacing::<f64>();
        assert!(matches!(
            bootstrap_diagnostic(&u, 2, alpha(0.5), &[1.5 * dx], &HolderConfig::default()),
            Err(Error::NotGridMultiple { .. })
        ));
    }

    #[test]
    fn bootstrap_quotients_approach_spectral_derivative() {
        let g = grid(64);
        let u = SpaceTimeSection::<f64>::from_fn(&g, 1, 0.1, 10, |x, t| {
            vec![(-t).exp() * x[0].sin()]
        })
        .unwrap();
        let a = alpha(0.5);
        let config = HolderConfig::default();
        let dx = g.spacing::<f64>();
        let rows =
            bootstrap_diagnostic(&u, 2, a, &[4.0 * dx, 2.0 * dx, dx], &config).unwrap();
        let reference = spectral_derivative_norm(&u, 0, 2, a, &config).unwrap();
        let mut previous_gap = f64::INFINITY;
        for row in &rows {
            let gap = (row.norm - reference).abs();
            assert!(gap <= previous_gap * 1.05 + 1e-12);
            previous_gap = gap;
            assert!(row.norm <= 3.0 * reference);
        }
        // drift between successive offsets at most 5%
        for w in rows.windows(2) {
            let drift = (w[1].norm - w[0].norm).abs() / w[0].norm;
            assert!(drift <= 0.05, "drift {drift}");
        }
    }

    #[test]
    fn measured_factors_vanish_for_linear_operator() {
        let g = grid(32);
        let spec = heat_spec();
        let u0 = sine_section(&g, 1.0);
        let a = alpha(0.5);
        let config = HolderConfig::default();
        let deltas = [0.02, 0.01];
        let pairs = standard_contraction_pairs(
            &spec,
            &g,
            u0.view(),
            a,
            &deltas,
            5e-4,
            3,
            11,
            &config,
        )
        .unwrap();
        let scaling =
            measure_contraction(&spec, &g, u0.view(), a, &pairs, &deltas, &config).unwrap();
        for f in scaling.factors {
            assert!(f <= 1e-10, "linear factor {f}");
        }
        assert!(scaling.slope.is_nan());
    }
}
