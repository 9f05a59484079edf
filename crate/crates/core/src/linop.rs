//! Linear operators `(L_t u)^a = sum_I A^{aI}_b(x,t) d_I u^b`, their
//! principal symbols, and the Legendre-Hadamard ellipticity check.

use std::collections::BTreeMap;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::jet::{spectral_jet_with, JetField};
use crate::multi_index::MultiIndex;
use crate::scalar::{lit, Scalar};
use crate::spectral::SpectralEngine;

/// One coefficient field `A^I(x, t)`, shape `(nodes, rank, rank)` with
/// entries `A[node, a, b]`.
#[derive(Clone)]
pub enum CoeffField<T> {
    Static(Array3<T>),
    TimeVarying(Arc<dyn Fn(T) -> Array3<T> + Send + Sync>),
}

impl<T: Scalar> CoeffField<T> {
    fn shape_ok(&self, nodes: usize, rank: usize, t: T) -> bool {
        match self {
            CoeffField::Static(a) => a.dim() == (nodes, rank, rank),
            CoeffField::TimeVarying(f) => f(t).dim() == (nodes, rank, rank),
        }
    }
}

enum CoeffAt<'a, T> {
    Borrowed(&'a Array3<T>),
    Owned(Array3<T>),
}

impl<T> std::ops::Deref for CoeffAt<'_, T> {
    type Target = Array3<T>;
    fn deref(&self) -> &Array3<T> {
        match self {
            CoeffAt::Borrowed(a) => a,
            CoeffAt::Owned(a) => a,
        }
    }
}

/// A linear operator of even order `order` on rank-`rank` sections; only the
/// canonical multi-indices present in `terms` contribute.
#[derive(Clone)]
pub struct LinearOperatorSpec<T> {
    dim: usize,
    order: usize,
    rank: usize,
    terms: BTreeMap<MultiIndex, CoeffField<T>>,
}

impl<T: Scalar> LinearOperatorSpec<T> {
    pub fn new(dim: usize, order: usize, rank: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadDimension(dim));
        }
        if order == 0 || order % 2 != 0 {
            return Err(Error::Invalid(format!(
                "operator order must be even and positive, got {order}"
            )));
        }
        if rank == 0 {
            return Err(Error::Invalid("operator rank must be positive".into()));
        }
        Ok(Self {
            dim,
            order,
            rank,
            terms: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Insert or replace the coefficient field of one canonical index.
    pub fn set_term(&mut self, index: MultiIndex, field: CoeffField<T>) -> Result<()> {
        if index.order() > self.order {
            return Err(Error::Invalid(format!(
                "multi-index {index} exceeds operator order {}",
                self.order
            )));
        }
        if index.max_dir().map_or(false, |d| d >= self.dim) {
            return Err(Error::Invalid(format!(
                "multi-index {index} references a direction outside dimension {}",
                self.dim
            )));
        }
        self.terms.insert(index, field);
        Ok(())
    }

    /// Convenience: a spatially constant coefficient matrix.
    pub fn set_constant_term(
        &mut self,
        index: MultiIndex,
        matrix: ArrayView2<T>,
        nodes: usize,
    ) -> Result<()> {
        if matrix.dim() != (self.rank, self.rank) {
            return Err(Error::ShapeMismatch {
                context: "constant coefficient".into(),
                expected: format!("({0}, {0})", self.rank),
                got: format!("{:?}", matrix.dim()),
            });
        }
        let mut field = Array3::zeros((nodes, self.rank, self.rank));
        for node in 0..nodes {
            for a in 0..self.rank {
                for b in 0..self.rank {
                    field[[node, a, b]] = matrix[[a, b]];
                }
            }
        }
        self.set_term(index, CoeffField::Static(field))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CoeffField<T>)> {
        self.terms.iter()
    }

    /// Static coefficient array of an index, if present and static.
    pub fn static_term(&self, index: &MultiIndex) -> Option<&Array3<T>> {
        match self.terms.get(index) {
            Some(CoeffField::Static(a)) => Some(a),
            _ => None,
        }
    }

    fn coeff_at<'a>(&self, field: &'a CoeffField<T>, t: T) -> CoeffAt<'a, T> {
        match field {
            CoeffField::Static(a) => CoeffAt::Borrowed(a),
            CoeffField::TimeVarying(f) => CoeffAt::Owned(f(t)),
        }
    }

    /// Validate all coefficient shapes against a grid.
    pub fn validate(&self, grid: &TorusGrid, t: T) -> Result<()> {
        let nodes = grid.num_nodes();
        for (index, field) in &self.terms {
            if !field.shape_ok(nodes, self.rank, t) {
                return Err(Error::ShapeMismatch {
                    context: format!("coefficient {index}"),
                    expected: format!("({nodes}, {0}, {0})", self.rank),
                    got: "other".into(),
                });
            }
        }
        Ok(())
    }

    /// Apply `L_t` to precomputed jets of a section.
    pub fn apply_to_jets(&self, jets: &JetField<T>, t: T) -> Result<Array2<T>> {
        let layout = jets.layout();
        if layout.order() < self.order || layout.rank() != self.rank {
            return Err(Error::ShapeMismatch {
                context: "linear operator application".into(),
                expected: format!("jets of order >= {} rank {}", self.order, self.rank),
                got: format!("order {} rank {}", layout.order(), layout.rank()),
            });
        }
        let nodes = jets.grid().num_nodes();
        let data = jets.data();
        let mut out = Array2::zeros((nodes, self.rank));
        for (index, field) in &self.terms {
            let pos = layout
                .position(index)
                .expect("canonical index present in layout");
            let coeff = self.coeff_at(field, t);
            for node in 0..nodes {
                for a in 0..self.rank {
                    let mut acc = T::zero();
                    for b in 0..self.rank {
                        acc += coeff[[node, a, b]] * data[[node, layout.component(pos, b)]];
                    }
                    out[[node, a]] += acc;
                }
            }
        }
        Ok(out)
    }

    /// Apply `L_t` to a grid section, computing its jets spectrally.
    pub fn apply(&self, grid: &TorusGrid, section: ArrayView2<T>, t: T) -> Result<Array2<T>> {
        let engine = SpectralEngine::new(grid);
        let jets = spectral_jet_with(&engine, section, self.order, t)?;
        self.apply_to_jets(&jets, t)
    }

    /// Sup over nodes and entries of the order-`order` coefficient magnitudes,
    /// used to size the stabilizing shift of the time stepper.
    pub fn top_coefficient_sup(&self, t: T) -> T {
        let mut sup = T::zero();
        for (index, field) in &self.terms {
            if index.order() != self.order {
                continue;
            }
            let coeff = self.coeff_at(field, t);
            for v in coeff.iter() {
                if v.abs() > sup {
                    sup = v.abs();
                }
            }
        }
        sup
    }

    /// Principal symbol `sigma(x, xi) = sum_{|I| = order} A^I(x, t) xi_I`
    /// as a `rank x rank` matrix. Only the top-order part contributes.
    pub fn principal_symbol(&self, node: usize, t: T, xi: &[T]) -> Result<Array2<T>> {
        if xi.len() != self.dim {
            return Err(Error::ShapeMismatch {
                context: "principal symbol covector".into(),
                expected: format!("{} components", self.dim),
                got: format!("{}", xi.len()),
            });
        }
        if xi.iter().all(|&c| c == T::zero()) {
            return Err(Error::ZeroCovector);
        }
        let mut symbol = Array2::zeros((self.rank, self.rank));
        for (index, field) in &self.terms {
            if index.order() != self.order {
                continue;
            }
            let mut xi_pow = T::one();
            for &d in index.dirs() {
                xi_pow = xi_pow * xi[d];
            }
            let coeff = self.coeff_at(field, t);
            for a in 0..self.rank {
                for b in 0..self.rank {
                    symbol[[a, b]] += coeff[[node, a, b]] * xi_pow;
                }
            }
        }
        Ok(symbol)
    }

    /// Sum over present indices of `sup |A^I| + alpha-Hoelder seminorm` of the
    /// static coefficient entries; a discrete stand-in for the coefficient
    /// norm budget. Time-varying fields are sampled at `t`.
    pub fn coefficient_norm(&self, grid: &TorusGrid, t: T, alpha: T) -> T {
        let nodes = grid.num_nodes();
        let mut total = T::zero();
        for (_, field) in &self.terms {
            let coeff = self.coeff_at(field, t);
            let mut sup = T::zero();
            let mut semi = T::zero();
            for a in 0..self.rank {
                for b in 0..self.rank {
                    for i in 0..nodes {
                        let v = coeff[[i, a, b]].abs();
                        if v > sup {
                            sup = v;
                        }
                        for j in (i + 1)..nodes {
                            let d = grid.node_distance::<T>(i, j);
                            let q = (coeff[[i, a, b]] - coeff[[j, a, b]]).abs() / d.powf(alpha);
                            if q > semi {
                                semi = q;
                            }
                        }
                    }
                }
            }
            total += sup + semi;
        }
        total
    }
}

/// Outcome of the Legendre-Hadamard scan.
#[derive(Debug, Clone)]
pub struct EllipticityReport<T> {
    /// Estimated constant: min over nodes, unit covectors, unit fiber vectors
    /// of `(-1)^{order/2 - 1} <sigma(x, xi) v, v>`.
    pub lambda: T,
    pub elliptic: bool,
    pub worst_node: usize,
    pub worst_x: Vec<T>,
    pub worst_xi: Vec<T>,
    pub worst_v: Vec<T>,
    /// Covector and fiber-vector sample counts actually examined.
    pub n_xi: usize,
    pub n_v: usize,
}

/// Scan the Legendre-Hadamard quantity over all nodes, `n_xi` deterministic
/// unit covectors, and the exact minimum over fiber vectors.
///
/// The quadratic form of a symbol equals that of its symmetrization, so the
/// fiber minimum is the smallest eigenvalue of the symmetrized signed symbol
/// and is computed exactly; `n_v` extra unit-vector samples are folded in for
/// asymmetric multi-component symbols (they can only confirm the minimum).
pub fn check_strong_ellipticity<T: Scalar>(
    linop: &LinearOperatorSpec<T>,
    grid: &TorusGrid,
    t: T,
    n_xi: usize,
    n_v: usize,
) -> Result<EllipticityReport<T>> {
    linop.validate(grid, t)?;
    let rank = linop.rank();
    let sign = if (linop.order() / 2).wrapping_sub(1) % 2 == 0 {
        T::one()
    } else {
        -T::one()
    };
    let xis: Vec<Vec<T>> = if linop.dim() == 1 {
        vec![vec![T::one()]]
    } else {
        // uniform half-circle; the symbol is even in xi for even order
        let m = n_xi.max(1);
        (0..m)
            .map(|j| {
                let theta = T::PI() * lit::<T>(j as f64) / lit(m as f64);
                vec![theta.cos(), theta.sin()]
            })
            .collect()
    };

    let v_samples: Vec<Vec<T>> = if rank > 1 && n_v > 0 {
        deterministic_unit_vectors(rank, n_v)
    } else {
        Vec::new()
    };

    let mut best: Option<(T, usize, Vec<T>, Vec<T>)> = None;
    for node in 0..grid.num_nodes() {
        for xi in &xis {
            let symbol = linop.principal_symbol(node, t, xi)?;
            // symmetrized signed form
            let mut m = Array2::zeros((rank, rank));
            for a in 0..rank {
                for b in 0..rank {
                    m[[a, b]] = sign * (symbol[[a, b]] + symbol[[b, a]]) / lit::<T>(2.0);
                }
            }
            let (mut min_val, mut min_vec) = smallest_eigenpair(&m);
            for v in &v_samples {
                let mut quad = T::zero();
                for a in 0..rank {
                    for b in 0..rank {
                        quad += m[[a, b]] * v[a] * v[b];
                    }
                }
                if quad < min_val {
                    min_val = quad;
                    min_vec = v.clone();
                }
            }
            let better = match &best {
                None => true,
                Some((current, ..)) => min_val < *current,
            };
            if better {
                best = Some((min_val, node, xi.clone(), min_vec));
            }
        }
    }

    let (lambda, worst_node, worst_xi, worst_v) = best.expect("at least one sample");
    Ok(EllipticityReport {
        lambda,
        elliptic: lambda > T::zero(),
        worst_node,
        worst_x: grid.node_position(worst_node),
        worst_xi,
        worst_v,
        n_xi: xis.len(),
        n_v: v_samples.len(),
    })
}

/// Deterministic unit vectors in `R^rank`: a fixed splitmix64 stream mapped
/// to the sphere, so doubling the count refines a nested sample set.
fn deterministic_unit_vectors<T: Scalar>(rank: usize, count: usize) -> Vec<Vec<T>> {
    let mut state: u64 = 0x243f6a8885a308d3; // fixed seed
    let mut next = move || {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        // Box-Muller onto the sphere
        let mut v: Vec<T> = Vec::with_capacity(rank);
        while v.len() < rank {
            let u1 = (next() as f64 + 1.0) / (u64::MAX as f64 + 2.0);
            let u2 = (next() as f64 + 1.0) / (u64::MAX as f64 + 2.0);
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(lit::<T>(r * (2.0 * std::f64::consts::PI * u2).cos()));
            if v.len() < rank {
                v.push(lit::<T>(r * (2.0 * std::f64::consts::PI * u2).sin()));
            }
        }
        let norm = v.iter().map(|&c| c * c).sum::<T>().sqrt();
        if norm > lit(1e-12) {
            out.push(v.into_iter().map(|c| c / norm).collect());
        }
    }
    out
}

/// Smallest eigenvalue and eigenvector of a small symmetric matrix.
/// Closed forms for ranks 1 and 2, cyclic Jacobi otherwise.
fn smallest_eigenpair<T: Scalar>(m: &Array2<T>) -> (T, Vec<T>) {
    let n = m.nrows();
    match n {
        1 => (m[[0, 0]], vec![T::one()]),
        2 => {
            let a = m[[0, 0]];
            let b = m[[0, 1]];
            let d = m[[1, 1]];
            let half_diff = (a - d) / lit::<T>(2.0);
            let disc = (half_diff * half_diff + b * b).sqrt();
            let lambda = (a + d) / lit::<T>(2.0) - disc;
            let mut v = if b.abs() > lit(1e-30) {
                vec![b, lambda - a]
            } else if a <= d {
                vec![T::one(), T::zero()]
            } else {
                vec![T::zero(), T::one()]
            };
            let norm = v.iter().map(|&c| c * c).sum::<T>().sqrt();
            if norm > T::zero() {
                for c in v.iter_mut() {
                    *c = *c / norm;
                }
            }
            (lambda, v)
        }
        _ => jacobi_smallest(m),
    }
}

fn jacobi_smallest<T: Scalar>(m: &Array2<T>) -> (T, Vec<T>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = Array2::from_shape_fn((n, n), |(i, j)| if i == j { T::one() } else { T::zero() });
    for _ in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        if off <= lit(1e-30) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[[p, q]].abs() <= lit(1e-30) {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (lit::<T>(2.0) * a[[p, q]]);
                let t_val = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t_val * t_val + T::one()).sqrt();
                let s = t_val * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut min_i = 0;
    for i in 1..n {
        if a[[i, i]] < a[[min_i, min_i]] {
            min_i = i;
        }
    }
    (a[[min_i, min_i]], (0..n).map(|k| v[[k, min_i]]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn constant_op_1d(order: usize, value: f64, index_dirs: &[usize], nodes: usize) -> LinearOperatorSpec<f64> {
        let mut op = LinearOperatorSpec::new(1, order, 1).unwrap();
        op.set_constant_term(
            MultiIndex::new(index_dirs),
            array![[value]].view(),
            nodes,
        )
        .unwrap();
        op
    }

    #[test]
    fn laplacian_symbol_on_t2() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let mut op = LinearOperatorSpec::<f64>::new(2, 2, 1).unwrap();
        op.set_constant_term(MultiIndex::new(&[0, 0]), array![[1.0]].view(), 64)
            .unwrap();
        op.set_constant_term(MultiIndex::new(&[1, 1]), array![[1.0]].view(), 64)
            .unwrap();
        let s = op.principal_symbol(0, 0.0, &[1.0, 0.0]).unwrap();
        assert_eq!(s[[0, 0]], 1.0);
        let s = op.principal_symbol(3, 0.0, &[0.6, 0.8]).unwrap();
        assert!((s[[0, 0]] - 1.0).abs() <= 1e-15);
        let _ = grid;
    }

    #[test]
    fn biharmonic_symbol_value() {
        // L = -Laplacian^2 in 1d, xi = 2 -> symbol -16
        let op = constant_op_1d(4, -1.0, &[0, 0, 0, 0], 8);
        let s = op.principal_symbol(0, 0.0, &[2.0]).unwrap();
        assert_eq!(s[[0, 0]], -16.0);
    }

    #[test]
    fn matrix_symbol_comes_back_verbatim() {
        let mut op = LinearOperatorSpec::new(1, 2, 2).unwrap();
        op.set_constant_term(
            MultiIndex::new(&[0, 0]),
            array![[1.0, 0.5], [-0.5, 1.0]].view(),
            8,
        )
        .unwrap();
        let s = op.principal_symbol(0, 0.0, &[1.0]).unwrap();
        assert_eq!(s, array![[1.0, 0.5], [-0.5, 1.0]]);
    }

    #[test]
    fn zero_covector_rejected() {
        let op = constant_op_1d(2, 1.0, &[0, 0], 8);
        assert!(matches!(
            op.principal_symbol(0, 0.0, &[0.0]),
            Err(Error::ZeroCovector)
        ));
    }

    #[test]
    fn heat_and_backward_heat_lambda() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let heat = constant_op_1d(2, 1.0, &[0, 0], 8);
        let report = check_strong_ellipticity(&heat, &grid, 0.0, 16, 0).unwrap();
        assert_eq!(report.lambda, 1.0);
        assert!(report.elliptic);

        let backward = constant_op_1d(2, -1.0, &[0, 0], 8);
        let report = check_strong_ellipticity(&backward, &grid, 0.0, 16, 0).unwrap();
        assert_eq!(report.lambda, -1.0);
        assert!(!report.elliptic);
    }

    #[test]
    fn biharmonic_lambda_is_one() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let op = constant_op_1d(4, -1.0, &[0, 0, 0, 0], 8);
        let report = check_strong_ellipticity(&op, &grid, 0.0, 16, 0).unwrap();
        assert_eq!(report.lambda, 1.0);
        assert!(report.elliptic);
    }

    #[test]
    fn skew_block_has_unit_lambda() {
        // symmetrization of [[1, .5], [-.5, 1]] is the identity
        let grid = TorusGrid::new(1, 8).unwrap();
        let mut op = LinearOperatorSpec::<f64>::new(1, 2, 2).unwrap();
        op.set_constant_term(
            MultiIndex::new(&[0, 0]),
            array![[1.0, 0.5], [-0.5, 1.0]].view(),
            8,
        )
        .unwrap();
        let report = check_strong_ellipticity(&op, &grid, 0.0, 4, 8).unwrap();
        assert!((report.lambda - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn refinement_never_increases_lambda() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let mut op = LinearOperatorSpec::new(2, 2, 2).unwrap();
        op.set_constant_term(
            MultiIndex::new(&[0, 0]),
            array![[2.0, 0.3], [0.1, 1.0]].view(),
            64,
        )
        .unwrap();
        op.set_constant_term(
            MultiIndex::new(&[1, 1]),
            array![[1.0, -0.2], [0.4, 3.0]].view(),
            64,
        )
        .unwrap();
        let coarse = check_strong_ellipticity(&op, &grid, 0.0, 8, 4).unwrap();
        let fine = check_strong_ellipticity(&op, &grid, 0.0, 16, 8).unwrap();
        assert!(fine.lambda <= coarse.lambda + 1e-15);
    }

    #[test]
    fn jacobi_matches_closed_form() {
        let m = array![[2.0f64, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 1.0]];
        let (lambda, v) = jacobi_smallest(&m);
        // residual check: M v = lambda v
        for i in 0..3 {
            let mut mv = 0.0;
            for j in 0..3 {
                mv += m[[i, j]] * v[j];
            }
            assert!((mv - lambda * v[i]).abs() <= 1e-10);
        }
        assert!(lambda < 1.0); // strictly below the smallest diagonal entry
    }
}
