//! Catalog of concrete Cauchy problems: operator specs, initial data,
//! exact or manufactured solutions, and the random generators used by the
//! verification suites.
//!
//! Every card with an exact solution is checked at registration: the
//! identity `d_t u* = F(., t, jets of u*)` must hold on a reference grid
//! (forcing terms are folded into `F`, so the identity is exact).

use std::sync::Arc;

use ndarray::{Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::jet::{Jet, JetLayout};
use crate::linear::LinearProblem;
use crate::linop::{CoeffField, LinearOperatorSpec};
use crate::multi_index::MultiIndex;
use crate::operator::{evaluate_operator, NonlinearOperatorSpec};
use crate::scalar::{lit, Scalar};
use crate::section::SpaceTimeSection;
use crate::spectral::SpectralEngine;

type SectionFn<T> = Arc<dyn Fn(&TorusGrid) -> Array2<T> + Send + Sync>;
type TimeSectionFn<T> = Arc<dyn Fn(&TorusGrid, T) -> Array2<T> + Send + Sync>;

/// A named problem: operator, initial data, and (when known) the exact
/// solution with its time derivative.
#[derive(Clone)]
pub struct ProblemCard<T> {
    pub name: &'static str,
    pub description: &'static str,
    pub dim: usize,
    pub spec: NonlinearOperatorSpec<T>,
    initial: SectionFn<T>,
    exact: Option<(TimeSectionFn<T>, TimeSectionFn<T>)>,
    /// Ellipticity constant of the linearization at `u0`, where analytic.
    pub analytic_lambda: Option<T>,
    /// `false` marks deliberately non-parabolic debug cards.
    pub expect_elliptic: bool,
}

impl<T: Scalar> ProblemCard<T> {
    pub fn initial_on(&self, grid: &TorusGrid) -> Result<Array2<T>> {
        if grid.dim() != self.dim {
            return Err(Error::BadDimension(grid.dim()));
        }
        Ok((self.initial)(grid))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact_on(&self, grid: &TorusGrid, t: T) -> Option<Array2<T>> {
        self.exact.as_ref().map(|(value, _)| value(grid, t))
    }

    pub fn exact_dt_on(&self, grid: &TorusGrid, t: T) -> Option<Array2<T>> {
        self.exact.as_ref().map(|(_, dt)| dt(grid, t))
    }

    /// Exact solution sampled as a space-time section.
    pub fn exact_section(
        &self,
        grid: &TorusGrid,
        horizon: T,
        steps: usize,
    ) -> Option<Result<SpaceTimeSection<T>>> {
        let (value, _) = self.exact.as_ref()?;
        let nodes = grid.num_nodes();
        let rank = self.spec.rank();
        let dt = horizon / lit(steps as f64);
        let times: Vec<T> = (0..=steps).map(|m| dt * lit(m as f64)).collect();
        let mut values = Array3::zeros((steps + 1, nodes, rank));
        for (m, &t) in times.iter().enumerate() {
            let level = value(grid, t);
            for node in 0..nodes {
                for c in 0..rank {
                    values[[m, node, c]] = level[[node, c]];
                }
            }
        }
        Some(SpaceTimeSection::new(grid.clone(), times, values))
    }

    /// Max defect of `d_t u* - F(jets of u*)` over the given times.
    pub fn registration_defect(&self, grid: &TorusGrid, times: &[T]) -> Result<T> {
        let (value, value_dt) = match &self.exact {
            Some(pair) => pair,
            None => return Ok(T::zero()),
        };
        let mut defect = T::zero();
        for &t in times {
            let u = value(grid, t);
            let du = value_dt(grid, t);
            let fu = evaluate_operator(&self.spec, grid, u.view(), t, None)?;
            for node in 0..grid.num_nodes() {
                for c in 0..self.spec.rank() {
                    let d = (du[[node, c]] - fu[[node, c]]).abs();
                    if d > defect {
                        defect = d;
                    }
                }
            }
        }
        Ok(defect)
    }
}

fn grid_section<T: Scalar, F>(grid: &TorusGrid, rank: usize, f: F) -> Array2<T>
where
    F: Fn(&[T]) -> Vec<T>,
{
    let mut out = Array2::zeros((grid.num_nodes(), rank));
    for node in 0..grid.num_nodes() {
        let x = grid.node_position::<T>(node);
        let v = f(&x);
        for (c, &vc) in v.iter().enumerate() {
            out[[node, c]] = vc;
        }
    }
    out
}

fn heat_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(1, 2, 1);
    let uxx = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    let spec = NonlinearOperatorSpec::new(
        1,
        2,
        1,
        lit(50.0),
        Arc::new(move |jet: &Jet<T>| vec![jet.components()[uxx]]),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((1, jet.layout().len()));
        d[[0, uxx]] = T::one();
        d
    }));
    ProblemCard {
        name: "heat",
        description: "heat equation, u_t = u_xx, decaying third harmonic",
        dim: 1,
        spec,
        initial: Arc::new(|g| grid_section(g, 1, |x: &[T]| vec![(lit::<T>(3.0) * x[0]).sin()])),
        exact: Some((
            Arc::new(|g, t| {
                grid_section(g, 1, |x: &[T]| {
                    vec![(-lit::<T>(9.0) * t).exp() * (lit::<T>(3.0) * x[0]).sin()]
                })
            }),
            Arc::new(|g, t| {
                grid_section(g, 1, |x: &[T]| {
                    vec![
                        -lit::<T>(9.0)
                            * (-lit::<T>(9.0) * t).exp()
                            * (lit::<T>(3.0) * x[0]).sin(),
                    ]
                })
            }),
        )),
        analytic_lambda: Some(T::one()),
        expect_elliptic: true,
    }
}

fn heat_2d_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(2, 2, 1);
    let uxx = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    let uyy = layout.position(&MultiIndex::new(&[1, 1])).unwrap();
    let spec = NonlinearOperatorSpec::new(
        2,
        2,
        1,
        lit(50.0),
        Arc::new(move |jet: &Jet<T>| vec![jet.components()[uxx] + jet.components()[uyy]]),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((1, jet.layout().len()));
        d[[0, uxx]] = T::one();
        d[[0, uyy]] = T::one();
        d
    }));
    ProblemCard {
        name: "heat-2d",
        description: "heat equation on the square torus, u_t = Laplacian u",
        dim: 2,
        spec,
        initial: Arc::new(|g| grid_section(g, 1, |x: &[T]| vec![x[0].sin() * x[1].cos()])),
        exact: Some((
            Arc::new(|g, t| {
                grid_section(g, 1, |x: &[T]| {
                    vec![(-lit::<T>(2.0) * t).exp() * x[0].sin() * x[1].cos()]
                })
            }),
            Arc::new(|g, t| {
                grid_section(g, 1, |x: &[T]| {
                    vec![
                        -lit::<T>(2.0) * (-lit::<T>(2.0) * t).exp() * x[0].sin() * x[1].cos(),
                    ]
                })
            }),
        )),
        analytic_lambda: Some(T::one()),
        expect_elliptic: true,
    }
}

fn biharmonic_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(1, 4, 1);
    let u4 = layout.position(&MultiIndex::new(&[0, 0, 0, 0])).unwrap();
    let spec = NonlinearOperatorSpec::new(
        1,
        4,
        1,
        lit(100.0),
        Arc::new(move |jet: &Jet<T>| vec![-jet.components()[u4]]),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((1, jet.layout().len()));
        d[[0, u4]] = -T::one();
        d
    }));
    ProblemCard {
        name: "biharmonic",
        description: "fourth-order diffusion, u_t = -u_xxxx",
        dim: 1,
        spec,
        initial: Arc::new(|g| grid_section(g, 1, |x: &[T]| vec![(lit::<T>(2.0) * x[0]).sin()])),
        exact: Some((
            Arc::new(|g, t| {
                grid_section(g, 1, |x: &[T]| {
                    vec![(-lit::<T>(16.0) * t).exp() * (lit::<T>(2.0) * x[0]).sin()]
                })
            }),
            Arc::new(|g, t| {
                grid_section(g, 1, |x: &[T]| {
                    vec![
                        -lit::<T>(16.0)
                            * (-lit::<T>(16.0) * t).exp()
                            * (lit::<T>(2.0) * x[0]).sin(),
                    ]
                })
            }),
        )),
        analytic_lambda: Some(T::one()),
        expect_elliptic: true,
    }
}

fn semilinear_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(1, 2, 1);
    let uxx = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    let spec = NonlinearOperatorSpec::new(
        1,
        2,
        1,
        lit(10.0),
        Arc::new(move |jet: &Jet<T>| {
            let u = jet.value(0);
            vec![jet.components()[uxx] + u * u]
        }),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((1, jet.layout().len()));
        d[[0, 0]] = lit::<T>(2.0) * jet.value(0);
        d[[0, uxx]] = T::one();
        d
    }));
    ProblemCard {
        name: "semilinear",
        description: "semilinear reaction-diffusion, u_t = u_xx + u^2",
        dim: 1,
        spec,
        initial: Arc::new(|g| grid_section(g, 1, |x: &[T]| vec![lit::<T>(0.5) * x[0].sin()])),
        exact: None,
        analytic_lambda: Some(T::one()),
        expect_elliptic: true,
    }
}

fn semilinear_2d_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(2, 2, 1);
    let uxx = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    let uyy = layout.position(&MultiIndex::new(&[1, 1])).unwrap();
    let spec = NonlinearOperatorSpec::new(
        2,
        2,
        1,
        lit(10.0),
        Arc::new(move |jet: &Jet<T>| {
            let u = jet.value(0);
            vec![jet.components()[uxx] + jet.components()[uyy] + u * u]
        }),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((1, jet.layout().len()));
        d[[0, 0]] = lit::<T>(2.0) * jet.value(0);
        d[[0, uxx]] = T::one();
        d[[0, uyy]] = T::one();
        d
    }));
    ProblemCard {
        name: "semilinear-2d",
        description: "semilinear reaction-diffusion on the square torus",
        dim: 2,
        spec,
        initial: Arc::new(|g| {
            grid_section(g, 1, |x: &[T]| vec![lit::<T>(0.25) * x[0].sin() * x[1].cos()])
        }),
        exact: None,
        analytic_lambda: Some(T::one()),
        expect_elliptic: true,
    }
}

fn arctan_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(1, 2, 1);
    let uxx = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    // forcing that manufactures u* = e^{-t} cos x:
    // g(x,t) = -e^{-t} cos x + arctan(e^{-t} cos x)
    let spec = NonlinearOperatorSpec::new(
        1,
        2,
        1,
        lit(10.0),
        Arc::new(move |jet: &Jet<T>| {
            let q = jet.components()[uxx];
            let w = (-jet.time()).exp() * jet.position()[0].cos();
            vec![q.atan() + (-w + w.atan())]
        }),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((1, jet.layout().len()));
        let q = jet.components()[uxx];
        d[[0, uxx]] = T::one() / (T::one() + q * q);
        d
    }));
    ProblemCard {
        name: "arctan",
        description: "fully nonlinear u_t = arctan(u_xx) + g with manufactured solution",
        dim: 1,
        spec,
        initial: Arc::new(|g| grid_section(g, 1, |x: &[T]| vec![x[0].cos()])),
        exact: Some((
            Arc::new(|g, t| grid_section(g, 1, |x: &[T]| vec![(-t).exp() * x[0].cos()])),
            Arc::new(|g, t| grid_section(g, 1, |x: &[T]| vec![-(-t).exp() * x[0].cos()])),
        )),
        analytic_lambda: Some(lit(0.5)),
        expect_elliptic: true,
    }
}

fn coupled_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(1, 2, 2);
    let pos2 = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    let uxx = layout.component(pos2, 0);
    let vxx = layout.component(pos2, 1);
    let spec = NonlinearOperatorSpec::new(
        1,
        2,
        2,
        lit(10.0),
        Arc::new(move |jet: &Jet<T>| {
            let u = jet.value(0);
            let v = jet.value(1);
            let half = lit::<T>(0.5);
            vec![
                jet.components()[uxx] + half * jet.components()[vxx] + v * v,
                -half * jet.components()[uxx] + jet.components()[vxx] + u * v,
            ]
        }),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((2, jet.layout().len()));
        let half = lit::<T>(0.5);
        d[[0, uxx]] = T::one();
        d[[0, vxx]] = half;
        d[[0, 1]] = lit::<T>(2.0) * jet.value(1);
        d[[1, uxx]] = -half;
        d[[1, vxx]] = T::one();
        d[[1, 0]] = jet.value(1);
        d[[1, 1]] = jet.value(0);
        d
    }));
    ProblemCard {
        name: "coupled",
        description: "two-component system with skew cross-diffusion and quadratic coupling",
        dim: 1,
        spec,
        initial: Arc::new(|g| {
            grid_section(g, 2, |x: &[T]| {
                vec![lit::<T>(0.2) * x[0].sin(), lit::<T>(0.2) * x[0].cos()]
            })
        }),
        exact: None,
        analytic_lambda: Some(T::one()),
        expect_elliptic: true,
    }
}

fn system_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(1, 2, 2);
    let pos2 = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    let uxx = layout.component(pos2, 0);
    let vxx = layout.component(pos2, 1);
    let spec = NonlinearOperatorSpec::new(
        1,
        2,
        2,
        lit(10.0),
        Arc::new(move |jet: &Jet<T>| {
            let u = jet.value(0);
            let v = jet.value(1);
            vec![jet.components()[uxx] + v * v, jet.components()[vxx] + u * v]
        }),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((2, jet.layout().len()));
        d[[0, uxx]] = T::one();
        d[[0, 1]] = lit::<T>(2.0) * jet.value(1);
        d[[1, vxx]] = T::one();
        d[[1, 0]] = jet.value(1);
        d[[1, 1]] = jet.value(0);
        d
    }));
    ProblemCard {
        name: "system",
        description: "semilinear system u_t = u_xx + v^2, v_t = v_xx + u v",
        dim: 1,
        spec,
        initial: Arc::new(|g| {
            grid_section(g, 2, |x: &[T]| {
                vec![lit::<T>(0.3) * x[0].sin(), lit::<T>(0.3) * x[0].cos()]
            })
        }),
        exact: None,
        analytic_lambda: Some(T::one()),
        expect_elliptic: true,
    }
}

fn backward_heat_card<T: Scalar>() -> ProblemCard<T> {
    let layout = JetLayout::new(1, 2, 1);
    let uxx = layout.position(&MultiIndex::new(&[0, 0])).unwrap();
    let spec = NonlinearOperatorSpec::new(
        1,
        2,
        1,
        lit(10.0),
        Arc::new(move |jet: &Jet<T>| vec![-jet.components()[uxx]]),
    )
    .unwrap()
    .with_derivative(Arc::new(move |jet: &Jet<T>| {
        let mut d = Array2::zeros((1, jet.layout().len()));
        d[[0, uxx]] = -T::one();
        d
    }));
    ProblemCard {
        name: "backward-heat",
        description: "debug card: u_t = -u_xx, deliberately not parabolic",
        dim: 1,
        spec,
        initial: Arc::new(|g| grid_section(g, 1, |x: &[T]| vec![x[0].sin()])),
        exact: None,
        analytic_lambda: Some(-T::one()),
        expect_elliptic: false,
    }
}

/// The full problem catalog. Cards carrying an exact solution are verified
/// at registration on a reference grid; a defect is a programming error.
pub fn catalog<T: Scalar>() -> Vec<ProblemCard<T>> {
    let cards = vec![
        heat_card(),
        heat_2d_card(),
        biharmonic_card(),
        semilinear_card(),
        semilinear_2d_card(),
        arctan_card(),
        coupled_card(),
        system_card(),
        backward_heat_card(),
    ];
    let tol = lit::<T>(1e-8).max(T::epsilon() * lit(1e4));
    for card in &cards {
        if card.has_exact() {
            let n = if card.dim == 1 { 32 } else { 16 };
            let grid = TorusGrid::new(card.dim, n).expect("reference grid");
            let times = [T::zero(), lit(0.03), lit(0.07)];
            let defect = card
                .registration_defect(&grid, &times)
                .expect("registration check");
            assert!(
                defect <= tol,
                "card '{}' fails its registration identity: defect {defect:e}",
                card.name
            );
        }
    }
    cards
}

/// Look up a catalog card by name.
pub fn by_name<T: Scalar>(name: &str) -> Result<ProblemCard<T>> {
    catalog()
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

/// Manufacture the forcing `g(x,t) = d_t u*(x,t) - F(jets of u*(.,t))(x)`
/// for a base operator and a closed-form target solution. The target must be
/// resolvable on the grid; energy in the top Fourier band trips an aliasing
/// error.
pub fn manufacture<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    horizon: T,
    steps: usize,
    ustar: &dyn Fn(&TorusGrid, T) -> Array2<T>,
    ustar_dt: &dyn Fn(&TorusGrid, T) -> Array2<T>,
) -> Result<SpaceTimeSection<T>> {
    let engine: SpectralEngine<T> = SpectralEngine::new(grid);
    let nodes = grid.num_nodes();
    let rank = spec.rank();
    let dt = horizon / lit(steps as f64);
    let times: Vec<T> = (0..=steps).map(|m| dt * lit(m as f64)).collect();
    let mut values = Array3::zeros((steps + 1, nodes, rank));
    for (m, &t) in times.iter().enumerate() {
        let u = ustar(grid, t);
        for c in 0..rank {
            let energy = engine.high_mode_energy_fraction(u.column(c))?;
            if energy > lit(1e-10) {
                return Err(Error::Aliased {
                    energy: energy.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let du = ustar_dt(grid, t);
        let fu = evaluate_operator(spec, grid, u.view(), t, None)?;
        for node in 0..nodes {
            for c in 0..rank {
                values[[m, node, c]] = du[[node, c]] - fu[[node, c]];
            }
        }
    }
    SpaceTimeSection::new(grid.clone(), times, values)
}

/// Random band-limited grid section: harmonics up to `max_mode` per
/// dimension with seeded uniform coefficients in `[-amplitude, amplitude]`.
pub fn random_band_limited<T: Scalar>(
    grid: &TorusGrid,
    rank: usize,
    max_mode: usize,
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<T> {
    let mut coeffs = Vec::new();
    for _ in 0..rank {
        let mut per_component = Vec::new();
        for _ in 0..max_mode {
            per_component.push((
                rng.random_range(-amplitude..amplitude),
                rng.random_range(-amplitude..amplitude),
                rng.random_range(-amplitude..amplitude),
                rng.random_range(-amplitude..amplitude),
            ));
        }
        coeffs.push(per_component);
    }
    grid_section(grid, rank, |x| {
        (0..rank)
            .map(|c| {
                let mut v = T::zero();
                for (k, &(a, b, cc, d)) in coeffs[c].iter().enumerate() {
                    let kx = lit::<T>((k + 1) as f64) * x[0];
                    v += lit::<T>(a) * kx.sin() + lit::<T>(b) * kx.cos();
                    if x.len() > 1 {
                        let ky = lit::<T>((k + 1) as f64) * x[1];
                        v += lit::<T>(cc) * ky.sin() * kx.cos() + lit::<T>(d) * ky.cos();
                    }
                }
                v
            })
            .collect()
    })
}

/// Random space-time section: band-limited harmonics modulated by
/// per-harmonic time polynomials of the given degree.
pub fn random_space_time<T: Scalar>(
    grid: &TorusGrid,
    rank: usize,
    horizon: T,
    steps: usize,
    max_mode: usize,
    poly_degree: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SpaceTimeSection<T>> {
    struct Harmonic {
        mode: f64,
        sin_amp: f64,
        cos_amp: f64,
        poly: Vec<f64>,
    }
    let mut harmonics: Vec<Vec<Harmonic>> = Vec::new();
    for _ in 0..rank {
        let mut per_component = Vec::new();
        for k in 1..=max_mode {
            per_component.push(Harmonic {
                mode: k as f64,
                sin_amp: rng.random_range(-1.0..1.0),
                cos_amp: rng.random_range(-1.0..1.0),
                poly: (0..=poly_degree).map(|_| rng.random_range(-1.0..1.0)).collect(),
            });
        }
        harmonics.push(per_component);
    }
    SpaceTimeSection::from_fn(grid, rank, horizon, steps, |x, t| {
        (0..rank)
            .map(|c| {
                let mut v = T::zero();
                for h in &harmonics[c] {
                    let kx = lit::<T>(h.mode) * x[0];
                    let mut p = T::zero();
                    let mut tp = T::one();
                    for &coef in &h.poly {
                        p += lit::<T>(coef) * tp;
                        tp = tp * t;
                    }
                    v += (lit::<T>(h.sin_amp) * kx.sin() + lit::<T>(h.cos_amp) * kx.cos()) * p;
                }
                v
            })
            .collect()
    })
}

/// Seeded random scalar linear problem on `T^1` with ellipticity constant in
/// a fixed window: `L u = (1 + 0.3 b2(x)) u_xx + 0.3 b1(x) u_x + 0.3 b0(x) u`
/// with band-limited `b_i`, plus band-limited initial data and source.
pub fn random_linear_problem<T: Scalar>(
    grid: &TorusGrid,
    horizon: T,
    steps: usize,
    seed: u64,
) -> Result<LinearProblem<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = grid.num_nodes();
    let b2 = random_band_limited::<T>(grid, 1, 2, 1.0, &mut rng);
    let b1 = random_band_limited::<T>(grid, 1, 2, 1.0, &mut rng);
    let b0 = random_band_limited::<T>(grid, 1, 2, 1.0, &mut rng);

    let mut linop = LinearOperatorSpec::new(1, 2, 1)?;
    let scale = lit::<T>(0.3);
    let normalize = |b: &Array2<T>| {
        let sup = b
            .iter()
            .fold(T::zero(), |a, &v| if v.abs() > a { v.abs() } else { a });
        if sup > T::one() {
            sup
        } else {
            T::one()
        }
    };
    let (n2, n1, n0) = (normalize(&b2), normalize(&b1), normalize(&b0));
    let mut a2 = Array3::zeros((nodes, 1, 1));
    let mut a1 = Array3::zeros((nodes, 1, 1));
    let mut a0 = Array3::zeros((nodes, 1, 1));
    for node in 0..nodes {
        a2[[node, 0, 0]] = T::one() + scale * b2[[node, 0]] / n2;
        a1[[node, 0, 0]] = scale * b1[[node, 0]] / n1;
        a0[[node, 0, 0]] = scale * b0[[node, 0]] / n0;
    }
    linop.set_term(MultiIndex::new(&[0, 0]), CoeffField::Static(a2))?;
    linop.set_term(MultiIndex::new(&[0]), CoeffField::Static(a1))?;
    linop.set_term(MultiIndex::identity(), CoeffField::Static(a0))?;

    let u0 = random_band_limited::<T>(grid, 1, 3, 1.0, &mut rng);
    let f = random_space_time::<T>(grid, 1, horizon, steps, 3, 1, &mut rng)?;
    LinearProblem::new(linop, f, u0, horizon, steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::check_strong_ellipticity;
    use crate::operator::linearize;

    #[test]
    fn catalog_registers_and_finds_cards() {
        let cards = catalog::<f64>();
        assert!(cards.len() >= 6);
        assert!(by_name::<f64>("heat").is_ok());
        assert!(by_name::<f64>("nonexistent").is_err());
    }

    #[test]
    fn registration_identity_holds_at_two_resolutions() {
        for card in catalog::<f64>() {
            if !card.has_exact() {
                continue;
            }
            for n in [32, 64] {
                let n = if card.dim == 2 { n / 2 } else { n };
                let grid = TorusGrid::new(card.dim, n).unwrap();
                let defect = card
                    .registration_defect(&grid, &[0.0, 0.05, 0.1])
                    .unwrap();
                assert!(
                    defect <= 1e-8,
                    "card {} defect {defect:e} at n = {n}",
                    card.name
                );
            }
        }
    }

    #[test]
    fn elliptic_cards_have_lambda_above_threshold() {
        for card in catalog::<f64>() {
            let n = if card.dim == 1 { 32 } else { 16 };
            let grid = TorusGrid::new(card.dim, n).unwrap();
            let u0 = card.initial_on(&grid).unwrap();
            let linop = linearize(&card.spec, &grid, u0.view(), 0.0).unwrap();
            let report = check_strong_ellipticity(&linop, &grid, 0.0, 32, 8).unwrap();
            if card.expect_elliptic {
                assert!(
                    report.lambda >= 0.1,
                    "card {} lambda {}",
                    card.name,
                    report.lambda
                );
                if let Some(expected) = card.analytic_lambda {
                    assert!(
                        (report.lambda - expected).abs() <= 1e-9,
                        "card {} lambda {} vs analytic {}",
                        card.name,
                        report.lambda,
                        expected
                    );
                }
            } else {
                assert!(report.lambda < 0.0, "debug card {} unexpectedly elliptic", card.name);
            }
        }
    }

    #[test]
    fn manufacture_recovers_zero_forcing_for_exact_heat() {
        let card = by_name::<f64>("heat").unwrap();
        let grid = TorusGrid::new(1, 32).unwrap();
        let g = manufacture(
            &card.spec,
            &grid,
            0.1,
            10,
            &|grid, t| card.exact_on(grid, t).unwrap(),
            &|grid, t| card.exact_dt_on(grid, t).unwrap(),
        )
        .unwrap();
        assert!(g.max_abs() <= 1e-10);
    }

    #[test]
    fn manufacture_for_zero_target_returns_minus_f_of_zero() {
        let card = by_name::<f64>("semilinear").unwrap();
        let grid = TorusGrid::new(1, 16).unwrap();
        let zero = |grid: &TorusGrid, _t: f64| Array2::zeros((grid.num_nodes(), 1));
        let g = manufacture(&card.spec, &grid, 0.1, 4, &zero, &zero).unwrap();
        // F(zero jet) = 0 + 0^2 = 0
        assert!(g.max_abs() <= 1e-14);
    }

    #[test]
    fn manufacture_detects_aliasing() {
        let card = by_name::<f64>("heat").unwrap();
        let grid = TorusGrid::new(1, 16).unwrap();
        let rough = |grid: &TorusGrid, _t: f64| {
            let mut s = Array2::zeros((grid.num_nodes(), 1));
            for j in 0..grid.num_nodes() {
                s[[j, 0]] = (7.0 * grid.node_position::<f64>(j)[0]).sin();
            }
            s
        };
        assert!(matches!(
            manufacture(&card.spec, &grid, 0.1, 4, &rough, &rough),
            Err(Error::Aliased { .. })
        ));
    }

    #[test]
    fn random_linear_problems_are_uniformly_elliptic() {
        let grid = TorusGrid::new(1, 32).unwrap();
        for seed in 0..5 {
            let problem = random_linear_problem::<f64>(&grid, 0.05, 100, seed).unwrap();
            let report = check_strong_ellipticity(&problem.linop, &grid, 0.0, 8, 4).unwrap();
            assert!(report.lambda >= 0.69, "seed {seed}: lambda {}", report.lambda);
            assert!(report.lambda <= 1.31);
        }
    }
}
