//! Discrete parabolic Hoelder norms and the interpolation inequality.
//!
//! The declared norm of a section `u` on `grid x [0, delta]` is
//!
//! ```text
//! sum_{j=0..r} |d_x^j u|_0  +  |d_t u|_0  +  [d_x^r u]_{alpha;Q}  +  [d_t u]_{alpha;Q}
//! ```
//!
//! with the parabolic distance `d((x,t),(y,s)) = |x-y|_per + |t-s|^{1/r}`,
//! seminorms `[w]_{alpha;Q} = sup |w(x,t)-w(y,s)| / d^alpha`, spatial
//! derivatives spectral, and the time derivative by second-order finite
//! differences. Sup norms run over every canonical derivative component.
//!
//! Seminorm suprema are taken over all spatially and temporally adjacent
//! grid pairs plus a seeded random subsample capped at the pair budget;
//! grids small enough to enumerate are swept exhaustively.

use ndarray::{Array3, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::jet::spectral_jet_with;
use crate::scalar::{lit, Scalar};
use crate::section::SpaceTimeSection;
use crate::spectral::SpectralEngine;

/// Hoelder exponent in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderExponent<T>(T);

impl<T: Scalar> HolderExponent<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha > T::zero() && alpha < T::one() {
            Ok(Self(alpha))
        } else {
            Err(Error::Invalid(format!(
                "Hoelder exponent must lie in (0,1), got {alpha}"
            )))
        }
    }

    pub fn value(&self) -> T {
        self.0
    }
}

/// Pair-sampling parameters for the seminorm suprema.
#[derive(Debug, Clone)]
pub struct HolderConfig {
    pub pair_budget: usize,
    pub seed: u64,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            pair_budget: 32_768,
            seed: 42,
        }
    }
}

/// Decomposed parabolic Hoelder norm.
#[derive(Debug, Clone)]
pub struct HolderNormReport<T> {
    /// `|d_x^j u|_0` for `j = 0..=r`.
    pub space_sup: Vec<T>,
    /// `|d_t u|_0`.
    pub time_sup: T,
    /// `[d_x^r u]_{alpha;Q}`.
    pub space_seminorm: T,
    /// `[d_t u]_{alpha;Q}`.
    pub time_seminorm: T,
    /// Sum of all the above.
    pub total: T,
    /// Point pairs examined by the seminorm supremum.
    pub pairs_examined: usize,
}

impl<T: Scalar> HolderNormReport<T> {
    /// Flat key-value export for report files.
    pub fn records(&self) -> Vec<(String, T)> {
        let mut out: Vec<(String, T)> = self
            .space_sup
            .iter()
            .enumerate()
            .map(|(j, &v)| (format!("sup_dx{j}"), v))
            .collect();
        out.push(("sup_dt".into(), self.time_sup));
        out.push(("seminorm_space".into(), self.space_seminorm));
        out.push(("seminorm_time".into(), self.time_seminorm));
        out.push(("total".into(), self.total));
        out
    }
}

/// `C^{alpha, alpha/r}` norm pieces of a section (no derivatives).
#[derive(Debug, Clone)]
pub struct AlphaNormReport<T> {
    pub sup: T,
    pub seminorm: T,
    pub total: T,
}

/// Both sides of the interpolation inequality together with the smallest
/// constant that makes it hold for this section.
#[derive(Debug, Clone)]
pub struct InterpolationReport<T> {
    pub lhs: T,
    pub rhs: T,
    pub constant: T,
}

/// A space-time point pair: `((level, node), (level, node))`.
type Pair = ((usize, usize), (usize, usize));

fn sample_pairs(grid: &TorusGrid, levels: usize, config: &HolderConfig) -> Vec<Pair> {
    let nodes = grid.num_nodes();
    let points = levels * nodes;
    let all = points * (points - 1) / 2;
    let mut pairs = Vec::new();

    if all <= config.pair_budget {
        for p in 0..points {
            for q in (p + 1)..points {
                pairs.push(((p / nodes, p % nodes), (q / nodes, q % nodes)));
            }
        }
        return pairs;
    }

    // all spatially adjacent pairs at each level
    for m in 0..levels {
        for node in 0..nodes {
            for dir in 0..grid.dim() {
                let neighbor = grid.shifted_node(node, dir, 1);
                pairs.push(((m, node), (m, neighbor)));
            }
        }
    }
    // all temporally adjacent pairs at each node
    for m in 0..levels - 1 {
        for node in 0..nodes {
            pairs.push(((m, node), (m + 1, node)));
        }
    }
    // seeded random fill up to the budget
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    while pairs.len() < config.pair_budget {
        let p = rng.random_range(0..points);
        let q = rng.random_range(0..points);
        if p == q {
            continue;
        }
        pairs.push(((p / nodes, p % nodes), (q / nodes, q % nodes)));
    }
    pairs
}

fn parabolic_distance<T: Scalar>(
    grid: &TorusGrid,
    times: &[T],
    order: usize,
    a: (usize, usize),
    b: (usize, usize),
) -> T {
    let spatial = grid.node_distance::<T>(a.1, b.1);
    let dt = (times[a.0] - times[b.0]).abs();
    let temporal = if dt == T::zero() {
        T::zero()
    } else {
        dt.powf(T::one() / lit(order as f64))
    };
    spatial + temporal
}

/// Seminorm of a multi-component field over precomputed pairs:
/// `max` over components and pairs of `|w(p) - w(q)| / d(p,q)^alpha`.
fn seminorm_on_pairs<T: Scalar>(
    field: &Array3<T>,
    grid: &TorusGrid,
    times: &[T],
    order: usize,
    alpha: T,
    pairs: &[Pair],
) -> T {
    let components = field.dim().2;
    let mut sup = T::zero();
    for &(p, q) in pairs {
        let dist = parabolic_distance(grid, times, order, p, q);
        if dist <= T::zero() {
            continue;
        }
        let weight = dist.powf(alpha);
        for c in 0..components {
            let num = (field[[p.0, p.1, c]] - field[[q.0, q.1, c]]).abs();
            let ratio = num / weight;
            if ratio > sup {
                sup = ratio;
            }
        }
    }
    sup
}

fn sup_abs<T: Scalar>(field: &Array3<T>) -> T {
    field
        .iter()
        .fold(T::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc })
}

/// All spatial-derivative fields of `u`, grouped by order: entry `j` has
/// shape `(levels, nodes, components-of-order-j)`.
fn derivative_fields<T: Scalar>(
    u: &SpaceTimeSection<T>,
    order: usize,
) -> Result<Vec<Array3<T>>> {
    let grid = u.grid();
    let engine = SpectralEngine::new(grid);
    let levels = u.levels();
    let nodes = grid.num_nodes();
    let rank = u.rank();

    let mut per_order: Vec<Vec<usize>> = vec![Vec::new(); order + 1];
    let layout = crate::jet::JetLayout::new(grid.dim(), order, rank);
    for (pos, idx) in layout.indices().iter().enumerate() {
        for b in 0..rank {
            per_order[idx.order()].push(layout.component(pos, b));
        }
    }

    let mut fields: Vec<Array3<T>> = per_order
        .iter()
        .map(|comps| Array3::zeros((levels, nodes, comps.len())))
        .collect();

    for m in 0..levels {
        let jets = spectral_jet_with(&engine, u.level(m), order, u.times()[m])?;
        let data = jets.data();
        for (j, comps) in per_order.iter().enumerate() {
            for (slot, &comp) in comps.iter().enumerate() {
                for node in 0..nodes {
                    fields[j][[m, node, slot]] = data[[node, comp]];
                }
            }
        }
    }
    Ok(fields)
}

/// The full decomposed parabolic Hoelder norm of a section.
pub fn parabolic_holder_norm<T: Scalar>(
    u: &SpaceTimeSection<T>,
    order: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<HolderNormReport<T>> {
    if u.levels() < 2 {
        return Err(Error::TooFewTimeLevels);
    }
    let fields = derivative_fields(u, order)?;
    let space_sup: Vec<T> = fields.iter().map(sup_abs).collect();

    let du_dt = u.time_derivative()?;
    let time_sup = du_dt.max_abs();

    let pairs = sample_pairs(u.grid(), u.levels(), config);
    let space_seminorm = seminorm_on_pairs(
        &fields[order],
        u.grid(),
        u.times(),
        order,
        alpha.value(),
        &pairs,
    );
    let time_seminorm = seminorm_on_pairs(
        du_dt.values(),
        u.grid(),
        u.times(),
        order,
        alpha.value(),
        &pairs,
    );

    let total = space_sup.iter().copied().sum::<T>() + time_sup + space_seminorm + time_seminorm;
    Ok(HolderNormReport {
        space_sup,
        time_sup,
        space_seminorm,
        time_seminorm,
        total,
        pairs_examined: pairs.len(),
    })
}

/// Convenience: just the norm total.
pub fn parabolic_norm_total<T: Scalar>(
    u: &SpaceTimeSection<T>,
    order: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<T> {
    Ok(parabolic_holder_norm(u, order, alpha, config)?.total)
}

/// The `C^{alpha, alpha/r}` norm of a section itself (no derivatives); the
/// operator order only sets the time-distance exponent.
pub fn parabolic_alpha_norm<T: Scalar>(
    u: &SpaceTimeSection<T>,
    order: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<AlphaNormReport<T>> {
    if u.levels() < 2 {
        return Err(Error::TooFewTimeLevels);
    }
    let pairs = sample_pairs(u.grid(), u.levels(), config);
    let sup = u.max_abs();
    let seminorm = seminorm_on_pairs(
        u.values(),
        u.grid(),
        u.times(),
        order,
        alpha.value(),
        &pairs,
    );
    Ok(AlphaNormReport {
        sup,
        seminorm,
        total: sup + seminorm,
    })
}

/// Spatial `C^{r+alpha}` norm of a single grid section:
/// `sum_j sup |d^j u| + [d^r u]_alpha` over spatial pairs.
pub fn spatial_holder_norm<T: Scalar>(
    section: ArrayView2<T>,
    grid: &TorusGrid,
    order: usize,
    alpha: HolderExponent<T>,
    config: &HolderConfig,
) -> Result<T> {
    let engine = SpectralEngine::new(grid);
    let jets = spectral_jet_with(&engine, section, order, T::zero())?;
    let layout = jets.layout().clone();
    let data = jets.data();
    let nodes = grid.num_nodes();
    let rank = layout.rank();

    let mut total = T::zero();
    for j in 0..=order {
        let mut sup = T::zero();
        for (pos, idx) in layout.indices().iter().enumerate() {
            if idx.order() != j {
                continue;
            }
            for b in 0..rank {
                let c = layout.component(pos, b);
                for node in 0..nodes {
                    let v = data[[node, c]].abs();
                    if v > sup {
                        sup = v;
                    }
                }
            }
        }
        total += sup;
    }

    // top-order spatial seminorm over sampled node pairs
    let all = nodes * (nodes - 1) / 2;
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    if all <= config.pair_budget {
        for i in 0..nodes {
            for j in (i + 1)..nodes {
                pairs.push((i, j));
            }
        }
    } else {
        for node in 0..nodes {
            for dir in 0..grid.dim() {
                pairs.push((node, grid.shifted_node(node, dir, 1)));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        while pairs.len() < config.pair_budget {
            let i = rng.random_range(0..nodes);
            let j = rng.random_range(0..nodes);
            if i != j {
                pairs.push((i, j));
            }
        }
    }
    let mut semi = T::zero();
    for &(i, j) in &pairs {
        let dist = grid.node_distance::<T>(i, j);
        if dist <= T::zero() {
            continue;
        }
        let weight = dist.powf(alpha.value());
        for (pos, idx) in layout.indices().iter().enumerate() {
            if idx.order() != order {
                continue;
            }
            for b in 0..rank {
                let c = layout.component(pos, b);
                let q = (data[[i, c]] - data[[j, c]]).abs() / weight;
                if q > semi {
                    semi = q;
                }
            }
        }
    }
    Ok(total + semi)
}

/// Evaluate the interpolation inequality on a section: the left side collects
/// every intermediate sup norm and seminorm,
///
/// ```text
/// |d_x^r u|_0 + sum_{j=1..r-1} (|d_x^j u|_0 + [d_x^j u]_{alpha;Q}) + [u]_{alpha;Q}
/// ```
///
/// and the right side is `eps [d_x^r u]_{alpha;Q} + eps [d_t u]_{alpha;Q} +
/// C |u|_0` with the smallest admissible `C`.
pub fn verify_interpolation<T: Scalar>(
    u: &SpaceTimeSection<T>,
    order: usize,
    alpha: HolderExponent<T>,
    eps: T,
    config: &HolderConfig,
) -> Result<InterpolationReport<T>> {
    if !(eps > T::zero()) {
        return Err(Error::Invalid("eps must be positive".into()));
    }
    let fields = derivative_fields(u, order)?;
    let pairs = sample_pairs(u.grid(), u.levels(), config);
    let a = alpha.value();

    let seminorm =
        |field: &Array3<T>| seminorm_on_pairs(field, u.grid(), u.times(), order, a, &pairs);

    let mut lhs = sup_abs(&fields[order]);
    for j in 1..order {
        lhs += sup_abs(&fields[j]) + seminorm(&fields[j]);
    }
    lhs += seminorm(&fields[0]);

    let du_dt = u.time_derivative()?;
    let top = seminorm(&fields[order]) + seminorm(du_dt.values());
    let u_sup = sup_abs(&fields[0]);

    let constant = if u_sup > T::zero() {
        let c = (lhs - eps * top) / u_sup;
        if c > T::zero() {
            c
        } else {
            T::zero()
        }
    } else {
        T::zero()
    };
    let rhs = eps * top + constant * u_sup;
    Ok(InterpolationReport { lhs, rhs, constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::section::SpaceTimeSection;

    fn alpha(v: f64) -> HolderExponent<f64> {
        HolderExponent::new(v).unwrap()
    }

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(1, n).unwrap()
    }

    #[test]
    fn exponent_validation() {
        assert!(HolderExponent::new(0.5).is_ok());
        assert!(HolderExponent::new(0.0).is_err());
        assert!(HolderExponent::new(1.0).is_err());
        assert!(HolderExponent::new(1.5).is_err());
    }

    #[test]
    fn constant_section_norm_is_its_value() {
        let u = SpaceTimeSection::<f64>::from_fn(&grid(16), 1, 1.0, 4, |_, _| vec![-2.5]).unwrap();
        let report = parabolic_holder_norm(&u, 2, alpha(0.5), &HolderConfig::default()).unwrap();
        assert!((report.total - 2.5).abs() <= 1e-12);
        assert!(report.space_seminorm.abs() <= 1e-12);
        assert!(report.time_seminorm.abs() <= 1e-12);
        assert!(report.time_sup.abs() <= 1e-12);
    }

    #[test]
    fn time_linear_section() {
        // u = t: d_t u = 1 with zero seminorm
        let u = SpaceTimeSection::<f64>::from_fn(&grid(16), 1, 1.0, 4, |_, t| vec![t]).unwrap();
        let report = parabolic_holder_norm(&u, 2, alpha(0.5), &HolderConfig::default()).unwrap();
        assert!((report.time_sup - 1.0).abs() <= 1e-12);
        assert!(report.time_seminorm.abs() <= 1e-12);
        assert!((report.space_sup[0] - 1.0).abs() <= 1e-12);
    }

    /// Independent brute force over every space-time pair.
    fn exhaustive_seminorm(
        u: &SpaceTimeSection<f64>,
        field: &Array3<f64>,
        order: usize,
        a: f64,
    ) -> f64 {
        let grid = u.grid();
        let nodes = grid.num_nodes();
        let levels = u.levels();
        let mut sup: f64 = 0.0;
        for m1 in 0..levels {
            for n1 in 0..nodes {
                for m2 in 0..levels {
                    for n2 in 0..nodes {
                        if (m1, n1) >= (m2, n2) {
                            continue;
                        }
                        let dx: f64 = grid.node_distance(n1, n2);
                        let dt = (u.times()[m1] - u.times()[m2]).abs();
                        let d = dx + if dt > 0.0 { dt.powf(1.0 / order as f64) } else { 0.0 };
                        for c in 0..field.dim().2 {
                            let num = (field[[m1, n1, c]] - field[[m2, n2, c]]).abs();
                            sup = sup.max(num / d.powf(a));
                        }
                    }
                }
            }
        }
        sup
    }

    #[test]
    fn subsampled_seminorm_matches_exhaustive_oracle_on_small_grid() {
        // frozen oracle: [u_xx]_{alpha;Q} for u = sin(x) on N=16, M=4
        let u = SpaceTimeSection::<f64>::from_fn(&grid(16), 1, 0.5, 4, |x, _| vec![x[0].sin()])
            .unwrap();
        let fields = derivative_fields(&u, 2).unwrap();
        let oracle = exhaustive_seminorm(&u, &fields[2], 2, 0.5);
        let report = parabolic_holder_norm(&u, 2, alpha(0.5), &HolderConfig::default()).unwrap();
        assert!(report.space_seminorm <= oracle + 1e-12);
        assert!(report.space_seminorm >= 0.95 * oracle);
    }

    #[test]
    fn subsampled_never_exceeds_and_tracks_exhaustive_on_larger_grid() {
        // genuine subsampling: (levels * nodes)^2 pairs exceed the budget
        let u = SpaceTimeSection::<f64>::from_fn(&grid(64), 1, 0.5, 9, |x, t| {
            vec![(2.0 * x[0]).sin() * (1.0 + t) + (3.0 * x[0]).cos()]
        })
        .unwrap();
        let fields = derivative_fields(&u, 2).unwrap();
        let oracle = exhaustive_seminorm(&u, &fields[2], 2, 0.5);
        let config = HolderConfig::default();
        let report = parabolic_holder_norm(&u, 2, alpha(0.5), &config).unwrap();
        assert!(report.space_seminorm <= oracle + 1e-12);
        assert!(report.space_seminorm >= 0.9 * oracle);
    }

    #[test]
    fn norm_axioms_on_random_sections() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = grid(16);
        let config = HolderConfig::default();
        let a = alpha(0.3);
        for _ in 0..50 {
            let coeffs: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let more: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = SpaceTimeSection::<f64>::from_fn(&g, 1, 0.5, 3, |x, t| {
                vec![
                    coeffs[0]
                        + coeffs[1] * x[0].sin()
                        + coeffs[2] * (2.0 * x[0]).cos()
                        + t * (coeffs[3] + coeffs[4] * x[0].sin())
                        + coeffs[5] * t * t,
                ]
            })
            .unwrap();
            let v = SpaceTimeSection::<f64>::from_fn(&g, 1, 0.5, 3, |x, t| {
                vec![
                    more[0]
                        + more[1] * x[0].cos()
                        + more[2] * (3.0 * x[0]).sin()
                        + t * (more[3] + more[4] * x[0].cos())
                        + more[5] * t * t,
                ]
            })
            .unwrap();
            let nu = parabolic_norm_total(&u, 2, a, &config).unwrap();
            let nv = parabolic_norm_total(&v, 2, a, &config).unwrap();
            let scaled = parabolic_norm_total(&u.scale(-3.0), 2, a, &config).unwrap();
            assert!((scaled - 3.0 * nu).abs() <= 1e-10 * (1.0 + nu));
            let nsum = parabolic_norm_total(&u.sum(&v).unwrap(), 2, a, &config).unwrap();
            assert!(nsum <= nu + nv + 1e-10);
        }
    }

    #[test]
    fn seminorm_vanishes_iff_field_constant() {
        let g = grid(16);
        let config = HolderConfig::default();
        // constant in space and time: top field identically zero
        let c = SpaceTimeSection::<f64>::from_fn(&g, 1, 1.0, 3, |_, _| vec![4.0]).unwrap();
        let r = parabolic_holder_norm(&c, 2, alpha(0.5), &config).unwrap();
        assert!(r.space_seminorm <= 1e-12);
        // non-constant top field: strictly positive seminorm
        let u = SpaceTimeSection::<f64>::from_fn(&g, 1, 1.0, 3, |x, _| vec![x[0].sin()]).unwrap();
        let r = parabolic_holder_norm(&u, 2, alpha(0.5), &config).unwrap();
        assert!(r.space_seminorm > 1e-3);
    }

    #[test]
    fn interpolation_trivial_and_steady_cases() {
        let g = grid(16);
        let config = HolderConfig::default();
        let c = SpaceTimeSection::<f64>::from_fn(&g, 1, 1.0, 3, |_, _| vec![2.0]).unwrap();
        let rep = verify_interpolation(&c, 2, alpha(0.5), 0.1, &config).unwrap();
        assert!(rep.lhs <= 1e-12);
        assert!(rep.constant <= 1e-12);

        let u = SpaceTimeSection::<f64>::from_fn(&g, 1, 1.0, 3, |x, _| vec![x[0].sin()]).unwrap();
        for eps in [0.1, 0.01] {
            let rep = verify_interpolation(&u, 2, alpha(0.5), eps, &config).unwrap();
            assert!(rep.constant.is_finite());
            assert!(rep.lhs <= rep.rhs + 1e-12);
        }
    }

    #[test]
    fn alpha_norm_of_constant() {
        let g = grid(16);
        let u = SpaceTimeSection::<f64>::from_fn(&g, 1, 1.0, 3, |_, _| vec![-1.5]).unwrap();
        let rep = parabolic_alpha_norm(&u, 2, alpha(0.5), &HolderConfig::default()).unwrap();
        assert!((rep.total - 1.5).abs() <= 1e-12);
        assert!(rep.seminorm <= 1e-12);
    }

    #[test]
    fn spatial_norm_of_sine() {
        let g = grid(32);
        let mut section = ndarray::Array2::<f64>::zeros((32, 1));
        for j in 0..32 {
            section[[j, 0]] = g.node_position::<f64>(j)[0].sin();
        }
        let n = spatial_holder_norm(
            section.view(),
            &g,
            2,
            alpha(0.5),
            &HolderConfig::default(),
        )
        .unwrap();
        // sup|u| + sup|u_x| + sup|u_xx| = 3 plus a positive seminorm
        assert!(n > 3.0);
        assert!(n < 3.0 + 2.5);
    }
}
