//! Jets: the value-and-derivatives tuple a nonlinear operator acts on.
//!
//! A jet of order `r` at a point collects the section value and all spatial
//! derivatives up to order `r`, with symmetric mixed partials stored once per
//! canonical multi-index. Component layout: canonical indices grouped by
//! order then lexicographic, and within one index the `rank` fiber
//! components are contiguous — `component(pos, b) = pos * rank + b`.

use std::collections::HashMap;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::multi_index::{canonical_indices_up_to, MultiIndex};
use crate::scalar::Scalar;
use crate::spectral::SpectralEngine;

/// Component bookkeeping for jets of a given `(dim, order, rank)`.
#[derive(Debug)]
pub struct JetLayout {
    dim: usize,
    order: usize,
    rank: usize,
    indices: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

impl JetLayout {
    pub fn new(dim: usize, order: usize, rank: usize) -> Arc<Self> {
        let indices = canonical_indices_up_to(dim, order);
        let positions = indices
            .iter()
            .enumerate()
            .map(|(i, idx)| (idx.clone(), i))
            .collect();
        Arc::new(Self {
            dim,
            order,
            rank,
            indices,
            positions,
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

    /// Canonical multi-indices, grouped by order then lexicographic.
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Position of a canonical multi-index in the `indices` ordering.
    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    /// Flat component index of `(multi-index position, fiber component)`.
    pub fn component(&self, pos: usize, b: usize) -> usize {
        debug_assert!(b < self.rank);
        pos * self.rank + b
    }

    /// Total number of jet components: `rank * (number of canonical indices)`.
    pub fn len(&self) -> usize {
        self.indices.len() * self.rank
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A single jet: point, time, and the component vector.
#[derive(Debug, Clone)]
pub struct Jet<T> {
    layout: Arc<JetLayout>,
    x: Vec<T>,
    t: T,
    components: Vec<T>,
}

impl<T: Scalar> Jet<T> {
    pub fn new(layout: Arc<JetLayout>, x: Vec<T>, t: T, components: Vec<T>) -> Self {
        debug_assert_eq!(components.len(), layout.len());
        debug_assert_eq!(x.len(), layout.dim());
        Self {
            layout,
            x,
            t,
            components,
        }
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn position(&self) -> &[T] {
        &self.x
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn components(&self) -> &[T] {
        &self.components
    }

    /// Section value `u^b`.
    pub fn value(&self, b: usize) -> T {
        self.components[b]
    }

    /// Derivative component `d_I u^b`; `dirs` need not be sorted.
    pub fn deriv(&self, dirs: &[usize], b: usize) -> T {
        let idx = MultiIndex::new(dirs);
        let pos = self
            .layout
            .position(&idx)
            .expect("multi-index within jet order");
        self.components[self.layout.component(pos, b)]
    }
}

/// Jets of a whole grid section at one time: rows are nodes, columns follow
/// the [`JetLayout`] component order.
#[derive(Debug, Clone)]
pub struct JetField<T> {
    layout: Arc<JetLayout>,
    grid: TorusGrid,
    t: T,
    data: Array2<T>,
}

impl<T: Scalar> JetField<T> {
    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn time(&self) -> T {
        self.t
    }

    pub fn data(&self) -> ArrayView2<'_, T> {
        self.data.view()
    }

    pub fn jet_at(&self, node: usize) -> Jet<T> {
        Jet::new(
            self.layout.clone(),
            self.grid.node_position(node),
            self.t,
            self.data.row(node).to_vec(),
        )
    }

    /// Max over nodes of `|component|` for every component of `order`.
    pub fn order_sup_deviation(&self, other: &JetField<T>, order: usize) -> T {
        let mut sup = T::zero();
        for (pos, idx) in self.layout.indices().iter().enumerate() {
            if idx.order() != order {
                continue;
            }
            for b in 0..self.layout.rank() {
                let c = self.layout.component(pos, b);
                for node in 0..self.grid.num_nodes() {
                    let d = (self.data[[node, c]] - other.data[[node, c]]).abs();
                    if d > sup {
                        sup = d;
                    }
                }
            }
        }
        sup
    }

    /// Per-node total deviation across all orders, used to locate the worst
    /// offender for diagnostics.
    pub fn node_deviation(&self, other: &JetField<T>, node: usize) -> T {
        let mut sum = T::zero();
        for order in 0..=self.layout.order() {
            let mut sup = T::zero();
            for (pos, idx) in self.layout.indices().iter().enumerate() {
                if idx.order() != order {
                    continue;
                }
                for b in 0..self.layout.rank() {
                    let c = self.layout.component(pos, b);
                    let d = (self.data[[node, c]] - other.data[[node, c]]).abs();
                    if d > sup {
                        sup = d;
                    }
                }
            }
            sum += sup;
        }
        sum
    }
}

/// Compute all canonical spatial derivatives up to `order` of a grid section
/// by Fourier differentiation. `section` has shape `(nodes, rank)`.
pub fn spectral_jet<T: Scalar>(
    section: ArrayView2<T>,
    grid: &TorusGrid,
    order: usize,
    t: T,
) -> Result<JetField<T>> {
    let engine = SpectralEngine::new(grid);
    spectral_jet_with(&engine, section, order, t)
}

/// As [`spectral_jet`], reusing a caller-held engine (per-step solver loops).
pub fn spectral_jet_with<T: Scalar>(
    engine: &SpectralEngine<T>,
    section: ArrayView2<T>,
    order: usize,
    t: T,
) -> Result<JetField<T>> {
    let grid = engine.grid();
    let nodes = grid.num_nodes();
    if section.nrows() != nodes {
        return Err(Error::ShapeMismatch {
            context: "spectral_jet".into(),
            expected: format!("{nodes} nodes"),
            got: format!("{}", section.nrows()),
        });
    }
    let rank = section.ncols();
    let layout = JetLayout::new(grid.dim(), order, rank);
    let mut data = Array2::zeros((nodes, layout.len()));

    for b in 0..rank {
        let column = section.column(b);
        if column.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("section component {b}"),
            });
        }
        let spectrum = engine.forward(column)?;
        for (pos, idx) in layout.indices().iter().enumerate() {
            let c = layout.component(pos, b);
            if idx.order() == 0 {
                // identity: copy the input values bit-exactly
                for node in 0..nodes {
                    data[[node, c]] = column[node];
                }
            } else {
                let mut deriv = spectrum.clone();
                for (node, v) in deriv.iter_mut().enumerate() {
                    *v = *v * engine.derivative_multiplier(idx, node);
                }
                let real = engine.inverse(&deriv);
                for node in 0..nodes {
                    data[[node, c]] = real[node];
                }
            }
        }
    }

    Ok(JetField {
        layout,
        grid: grid.clone(),
        t,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn section_1d<F: Fn(f64) -> f64>(grid: &TorusGrid, f: F) -> Array2<f64> {
        let mut s = Array2::zeros((grid.num_nodes(), 1));
        for j in 0..grid.num_nodes() {
            s[[j, 0]] = f(grid.node_position::<f64>(j)[0]);
        }
        s
    }

    #[test]
    fn layout_component_count() {
        // component count = rank * sum of canonical index counts
        let layout = JetLayout::new(2, 4, 3);
        assert_eq!(layout.len(), 3 * 15);
        let layout = JetLayout::new(1, 2, 1);
        assert_eq!(layout.len(), 3);
    }

    #[test]
    fn jet_of_sine() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let s = section_1d(&grid, |x| x.sin());
        let jets = spectral_jet(s.view(), &grid, 2, 0.0).unwrap();
        for node in 0..grid.num_nodes() {
            let x = grid.node_position::<f64>(node)[0];
            let jet = jets.jet_at(node);
            assert!((jet.value(0) - x.sin()).abs() <= 1e-14);
            assert!((jet.deriv(&[0], 0) - x.cos()).abs() <= 1e-10);
            assert!((jet.deriv(&[0, 0], 0) + x.sin()).abs() <= 1e-10);
        }
    }

    #[test]
    fn constant_section_has_zero_derivatives() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let s = Array2::from_elem((16, 1), 3.0f64);
        let jets = spectral_jet(s.view(), &grid, 4, 0.0).unwrap();
        for node in 0..16 {
            let jet = jets.jet_at(node);
            assert_eq!(jet.value(0), 3.0);
            for ord in 1..=4usize {
                let dirs = vec![0usize; ord];
                assert!(jet.deriv(&dirs, 0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_finite_section() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let mut s = Array2::zeros((8, 1));
        s[[2, 0]] = f64::INFINITY;
        assert!(spectral_jet(s.view(), &grid, 2, 0.0).is_err());
    }
}
