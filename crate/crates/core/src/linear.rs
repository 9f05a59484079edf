//! Linear strongly parabolic systems on torus x time interval.
//!
//! Two solvers live here. `solve_principal` integrates the model system
//! `du/dt = (-1)^{r/2-1} Laplacian^{r/2} u + f` exactly per Fourier mode.
//! `solve_linear` handles variable coefficients with a first-order stabilized
//! split: the stiff shift `c * (-1)^{r/2-1} Laplacian^{r/2}` is propagated
//! exactly in Fourier space while the remainder `L_t u - shift + f` enters
//! through the first-order source weight.
//!
//! The module also carries the numerical certificates attached to the linear
//! theory: the coercivity (Garding) quantities, the energy/Gronwall fit, and
//! the Schauder ratio.

use ndarray::{Array2, ArrayView2};
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::holder::{
    parabolic_alpha_norm, parabolic_holder_norm, spatial_holder_norm, HolderConfig,
    HolderExponent,
};
use crate::jet::spectral_jet_with;
use crate::linop::{check_strong_ellipticity, LinearOperatorSpec};
use crate::scalar::{diag, lit, Scalar};
use crate::section::SpaceTimeSection;
use crate::spectral::SpectralEngine;

/// Residual bound below which a trajectory counts as solving its problem.
pub const SOLUTION_RESIDUAL_TOL: f64 = 1e-3;

/// A linear Cauchy problem `du/dt = L_t u + f`, `u(.,0) = u0`.
pub struct LinearProblem<T> {
    pub linop: LinearOperatorSpec<T>,
    pub f: SpaceTimeSection<T>,
    pub u0: Array2<T>,
    pub horizon: T,
    pub steps: usize,
}

impl<T: Scalar> LinearProblem<T> {
    pub fn new(
        linop: LinearOperatorSpec<T>,
        f: SpaceTimeSection<T>,
        u0: Array2<T>,
        horizon: T,
        steps: usize,
    ) -> Result<Self> {
        if f.steps() != steps || (f.horizon() - horizon).abs() > lit(1e-12) {
            return Err(Error::ShapeMismatch {
                context: "linear problem source".into(),
                expected: format!("{steps} steps over horizon {horizon}"),
                got: format!("{} steps over horizon {}", f.steps(), f.horizon()),
            });
        }
        if u0.nrows() != f.grid().num_nodes() || u0.ncols() != linop.rank() {
            return Err(Error::ShapeMismatch {
                context: "linear problem initial value".into(),
                expected: format!("({}, {})", f.grid().num_nodes(), linop.rank()),
                got: format!("{:?}", u0.dim()),
            });
        }
        Ok(Self {
            linop,
            f,
            u0,
            horizon,
            steps,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.f.grid()
    }
}

/// Stepper knobs for the stabilized split.
#[derive(Debug, Clone)]
pub struct StepperConfig<T> {
    /// Strength `c` of the Fourier-diagonal stabilizing shift; must dominate
    /// the top-order coefficient magnitudes.
    pub shift: T,
    /// Blow-up is declared when the sup norm passes this threshold.
    pub blowup_threshold: T,
    /// Automatic dt halvings before giving up.
    pub max_halvings: u32,
}

impl<T: Scalar> StepperConfig<T> {
    /// Shift from the measured top-coefficient sup norm (floor 1).
    pub fn auto(linop: &LinearOperatorSpec<T>, t: T) -> Self {
        let sup = linop.top_coefficient_sup(t);
        Self {
            shift: if sup > T::one() { sup } else { T::one() },
            blowup_threshold: lit(1e8),
            max_halvings: 10,
        }
    }
}

/// Trajectory plus solution diagnostics.
pub struct LinearSolution<T> {
    pub section: SpaceTimeSection<T>,
    /// `sup |d_t u - L_t u - f|` over interior time levels.
    pub residual: T,
    pub dt_used: T,
    pub halvings: u32,
}

#[inline]
fn phi1<T: Scalar>(z: T) -> T {
    if z == T::zero() {
        T::one()
    } else {
        z.exp_m1() / z
    }
}

/// Exact per-mode integration of the model system
/// `du/dt = (-1)^{r/2-1} Laplacian^{r/2} u + f` (Fourier multiplier `-|k|^r`):
/// over one step, `u_k <- e^z u_k + dt phi1(z) f_k(t_m)` with `z = -|k|^r dt`,
/// exact whenever `f` is constant in time.
pub fn solve_principal<T: Scalar>(
    grid: &TorusGrid,
    order: usize,
    f: &SpaceTimeSection<T>,
    u0: ArrayView2<T>,
    horizon: T,
    steps: usize,
) -> Result<SpaceTimeSection<T>> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::Invalid(format!(
            "model operator order must be even and positive, got {order}"
        )));
    }
    if f.steps() != steps || (f.horizon() - horizon).abs() > lit(1e-12) || f.grid() != grid {
        return Err(Error::ShapeMismatch {
            context: "principal solver source".into(),
            expected: format!("{steps} steps over horizon {horizon}"),
            got: format!("{} steps over horizon {}", f.steps(), f.horizon()),
        });
    }
    let rank = u0.ncols();
    if f.rank() != rank || u0.nrows() != grid.num_nodes() {
        return Err(Error::ShapeMismatch {
            context: "principal solver initial value".into(),
            expected: format!("({}, {rank})", grid.num_nodes()),
            got: format!("{:?}", u0.dim()),
        });
    }

    let engine: SpectralEngine<T> = SpectralEngine::new(grid);
    let nodes = grid.num_nodes();
    let dt = horizon / lit(steps as f64);
    let half_order = (order / 2) as i32;

    // per-mode propagator and source weight
    let mut decay = vec![T::zero(); nodes];
    let mut weight = vec![T::zero(); nodes];
    for node in 0..nodes {
        let z = -engine.wavenumber_sq(node).powi(half_order) * dt;
        decay[node] = z.exp();
        weight[node] = dt * phi1(z);
    }

    let mut spectra: Vec<Vec<Complex<T>>> = (0..rank)
        .map(|c| engine.forward(u0.column(c)))
        .collect::<Result<_>>()?;

    let times: Vec<T> = (0..=steps).map(|m| dt * lit(m as f64)).collect();
    let mut values = ndarray::Array3::zeros((steps + 1, nodes, rank));
    for c in 0..rank {
        let real = engine.inverse(&spectra[c]);
        for node in 0..nodes {
            values[[0, node, c]] = real[node];
        }
    }

    for m in 0..steps {
        for c in 0..rank {
            let f_hat = engine.forward(f.level(m).column(c))?;
            for node in 0..nodes {
                spectra[c][node] =
                    spectra[c][node] * decay[node] + f_hat[node] * weight[node];
            }
            let real = engine.inverse(&spectra[c]);
            for node in 0..nodes {
                values[[m + 1, node, c]] = real[node];
            }
        }
    }

    SpaceTimeSection::new(grid.clone(), times, values)
}

/// Model-operator multiplier `-|k|^r` applied spectrally to one level.
fn model_term<T: Scalar>(
    engine: &SpectralEngine<T>,
    level: ArrayView2<T>,
    order: usize,
) -> Result<Array2<T>> {
    let nodes = level.nrows();
    let rank = level.ncols();
    let half_order = (order / 2) as i32;
    let mut out = Array2::zeros((nodes, rank));
    for c in 0..rank {
        let mut spectrum = engine.forward(level.column(c))?;
        for (node, v) in spectrum.iter_mut().enumerate() {
            let a = -engine.wavenumber_sq(node).powi(half_order);
            *v = *v * a;
        }
        let real = engine.inverse(&spectrum);
        for node in 0..nodes {
            out[[node, c]] = real[node];
        }
    }
    Ok(out)
}

/// `sup` over interior time levels of `|d_t u - L_t u - f|`, the defect of a
/// trajectory as a solution of the linear problem.
pub fn linear_residual<T: Scalar>(
    linop: &LinearOperatorSpec<T>,
    u: &SpaceTimeSection<T>,
    f: &SpaceTimeSection<T>,
) -> Result<T> {
    let engine = SpectralEngine::new(u.grid());
    let du_dt = u.time_derivative()?;
    let mut residual = T::zero();
    for m in 1..u.levels() - 1 {
        let t = u.times()[m];
        let jets = spectral_jet_with(&engine, u.level(m), linop.order(), t)?;
        let lu = linop.apply_to_jets(&jets, t)?;
        for node in 0..u.grid().num_nodes() {
            for c in 0..u.rank() {
                let defect =
                    (du_dt.values()[[m, node, c]] - lu[[node, c]] - f.values()[[m, node, c]]).abs();
                if defect > residual {
                    residual = defect;
                }
            }
        }
    }
    Ok(residual)
}

/// Solve `du/dt = L_t u + f`, `u(.,0) = u0` by the stabilized split stepper.
///
/// Rejects operators that fail the ellipticity check. On blow-up the step is
/// halved (the source is refined by linear interpolation) and the run
/// restarts, up to `max_halvings`; the returned trajectory is always sampled
/// on the originally requested time nodes.
pub fn solve_linear<T: Scalar>(
    problem: &LinearProblem<T>,
    config: &StepperConfig<T>,
) -> Result<LinearSolution<T>> {
    let grid = problem.grid();
    let report = check_strong_ellipticity(&problem.linop, grid, T::zero(), 32, 8)?;
    if !report.elliptic {
        return Err(Error::NotElliptic {
            lambda: diag(report.lambda),
        });
    }

    let engine: SpectralEngine<T> = SpectralEngine::new(grid);
    let nodes = grid.num_nodes();
    let rank = problem.linop.rank();
    let order = problem.linop.order();
    let half_order = (order / 2) as i32;
    let c_shift = config.shift;

    let mut f_eff = problem.f.clone();
    let mut halvings = 0u32;
    'attempts: loop {
        let steps = problem.steps << halvings;
        let dt = problem.horizon / lit(steps as f64);
        if !(dt > T::zero()) {
            return Err(Error::StepUnderflow { dt: diag(dt) });
        }

        let mut decay = vec![T::zero(); nodes];
        let mut weight = vec![T::zero(); nodes];
        for node in 0..nodes {
            let z = -c_shift * engine.wavenumber_sq(node).powi(half_order) * dt;
            decay[node] = z.exp();
            weight[node] = dt * phi1(z);
        }

        let times: Vec<T> = (0..=steps).map(|m| dt * lit(m as f64)).collect();
        let mut values = ndarray::Array3::zeros((steps + 1, nodes, rank));
        let mut current = problem.u0.clone();
        for node in 0..nodes {
            for c in 0..rank {
                values[[0, node, c]] = current[[node, c]];
            }
        }

        for m in 0..steps {
            let t = times[m];
            let jets = spectral_jet_with(&engine, current.view(), order, t)?;
            let lu = problem.linop.apply_to_jets(&jets, t)?;
            let shift_term = model_term(&engine, current.view(), order)?;
            let mut explicit = Array2::zeros((nodes, rank));
            for node in 0..nodes {
                for c in 0..rank {
                    explicit[[node, c]] = lu[[node, c]] - c_shift * shift_term[[node, c]]
                        + f_eff.values()[[m, node, c]];
                }
            }

            let mut blew_up = false;
            let mut next = Array2::zeros((nodes, rank));
            for c in 0..rank {
                let u_hat = engine.forward(current.column(c))?;
                let n_hat = engine.forward(explicit.column(c))?;
                let mut new_hat = u_hat;
                for node in 0..nodes {
                    new_hat[node] = new_hat[node] * decay[node] + n_hat[node] * weight[node];
                }
                let real = engine.inverse(&new_hat);
                for node in 0..nodes {
                    let v = real[node];
                    if !v.is_finite() || v.abs() > config.blowup_threshold {
                        blew_up = true;
                    }
                    next[[node, c]] = v;
                }
            }
            if blew_up {
                if halvings >= config.max_halvings {
                    return Err(Error::Instability {
                        dt: diag(dt),
                        halvings,
                    });
                }
                halvings += 1;
                f_eff = f_eff.refine_time_linear()?;
                continue 'attempts;
            }

            current = next;
            for node in 0..nodes {
                for c in 0..rank {
                    values[[m + 1, node, c]] = current[[node, c]];
                }
            }
        }

        let fine = SpaceTimeSection::new(grid.clone(), times, values)?;
        let section = if halvings > 0 {
            fine.downsample_time(1 << halvings)?
        } else {
            fine
        };
        let residual = linear_residual(&problem.linop, &section, &problem.f)?;
        return Ok(LinearSolution {
            section,
            residual,
            dt_used: dt,
            halvings,
        });
    }
}

/// Spectral coercivity quantities of one section: with the trig-coefficient
/// convention, `lhs = sum |k|^r |psi_k|^2`, `sobolev_half = sum
/// (1+|k|^2)^{r/2} |psi_k|^2`, `l2 = sum |psi_k|^2`. Callers check
/// `lhs >= sobolev_half / 2 - C * l2`.
#[derive(Debug, Clone)]
pub struct GardingReport<T> {
    pub lhs: T,
    pub sobolev_half: T,
    pub l2: T,
}

pub fn check_garding<T: Scalar>(
    grid: &TorusGrid,
    order: usize,
    psi: ArrayView2<T>,
) -> Result<GardingReport<T>> {
    let engine = SpectralEngine::new(grid);
    let half_order = (order / 2) as i32;
    let mut lhs = T::zero();
    let mut sobolev_half = T::zero();
    let mut l2 = T::zero();
    for c in 0..psi.ncols() {
        let spectrum = engine.forward(psi.column(c))?;
        for (node, v) in spectrum.iter().enumerate() {
            let ksq = engine.wavenumber_sq(node);
            let e = v.norm_sqr();
            lhs += ksq.powi(half_order) * e;
            sobolev_half += (T::one() + ksq).powi(half_order) * e;
            l2 += e;
        }
    }
    Ok(GardingReport {
        lhs,
        sobolev_half,
        l2,
    })
}

/// Smallest constant making the per-mode bound
/// `|k|^r >= (1+|k|^2)^{r/2} / 2 - C` hold for every integer `|k|^2` up to
/// `max_mode^2`.
pub fn garding_min_constant<T: Scalar>(order: usize, max_mode: usize) -> T {
    let half_order = (order / 2) as i32;
    let half = lit::<T>(0.5);
    let mut c = T::zero();
    for msq in 0..=(max_mode * max_mode) {
        let m = lit::<T>(msq as f64);
        let gap = half * (T::one() + m).powi(half_order) - m.powi(half_order);
        if gap > c {
            c = gap;
        }
    }
    c
}

/// Energy trace and Gronwall-style fit for a trajectory with vanishing
/// initial value.
#[derive(Debug, Clone)]
pub struct GronwallReport<T> {
    /// `v(s_m) = integral |u(., s_m)|^2` at every time level.
    pub v: Vec<T>,
    pub max_v: T,
    /// Does `v(s) <= s^2 vol |d_t u|_0^2` hold at every level (small slack)?
    pub intermediate_ok: bool,
    pub max_intermediate_excess: T,
    /// Smallest `C` with `v(s) <= C |f|^2_{C^{alpha,alpha/r}(E_s)}` over all
    /// levels, using the source norm restricted to `[0, s]`.
    pub fitted_c: T,
    /// Source norm over the full horizon.
    pub f_norm: T,
}

pub fn gronwall_check<T: Scalar>(
    u: &SpaceTimeSection<T>,
    f: &SpaceTimeSection<T>,
    order: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<GronwallReport<T>> {
    u.compatible(f)?;
    let initial_sup = u
        .level(0)
        .iter()
        .fold(T::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc });
    if initial_sup > lit(1e-10) {
        return Err(Error::NonzeroInitial {
            norm: diag(initial_sup),
        });
    }

    let grid = u.grid();
    let vol = grid.volume::<T>();
    let nodes = lit::<T>(grid.num_nodes() as f64);
    let v: Vec<T> = (0..u.levels())
        .map(|m| {
            let mut sum = T::zero();
            for value in u.level(m).iter() {
                sum += *value * *value;
            }
            vol * sum / nodes
        })
        .collect();
    let max_v = v.iter().fold(T::zero(), |a, &b| if b > a { b } else { a });

    let dt_sup = u.time_derivative()?.max_abs();
    let mut max_excess = T::zero();
    for (m, &vm) in v.iter().enumerate() {
        let s = u.times()[m];
        let bound = s * s * vol * dt_sup * dt_sup;
        let excess = vm - bound;
        if excess > max_excess {
            max_excess = excess;
        }
    }
    let intermediate_ok = max_excess <= lit::<T>(1e-6) * (T::one() + max_v);

    let mut fitted_c = T::zero();
    for m in 1..u.levels() {
        let f_m = f.restrict_steps(m)?;
        let norm = parabolic_alpha_norm(&f_m, order, alpha, config)?.total;
        let c = if norm > T::zero() {
            v[m] / (norm * norm)
        } else if v[m] > lit(1e-20) {
            T::infinity()
        } else {
            T::zero()
        };
        if c > fitted_c {
            fitted_c = c;
        }
    }
    let f_norm = parabolic_alpha_norm(f, order, alpha, config)?.total;

    Ok(GronwallReport {
        v,
        max_v,
        intermediate_ok,
        max_intermediate_excess: max_excess,
        fitted_c,
        f_norm,
    })
}

/// Ratio `|u|_{C^{r+alpha,1+alpha/r}} / (|f|_{C^{alpha,alpha/r}} +
/// |u0|_{C^{r+alpha}})` for a verified solution of the problem.
///
/// A trajectory whose residual exceeds [`SOLUTION_RESIDUAL_TOL`] is rejected;
/// when both denominator terms vanish the solution is identically zero and
/// the ratio is defined as zero.
pub fn schauder_ratio<T: Scalar>(
    problem: &LinearProblem<T>,
    solution: &SpaceTimeSection<T>,
    order: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<T> {
    let residual = linear_residual(&problem.linop, solution, &problem.f)?;
    if residual > lit(SOLUTION_RESIDUAL_TOL) {
        return Err(Error::ResidualTooLarge {
            residual: diag(residual),
            tol: SOLUTION_RESIDUAL_TOL,
        });
    }
    let numerator = parabolic_holder_norm(solution, order, alpha, config)?.total;
    let f_norm = parabolic_alpha_norm(&problem.f, order, alpha, config)?.total;
    let u0_norm = spatial_holder_norm(problem.u0.view(), problem.grid(), order, alpha, config)?;
    let denominator = f_norm + u0_norm;
    if denominator <= lit(1e-14) {
        return Ok(T::zero());
    }
    Ok(numerator / denominator)
}
