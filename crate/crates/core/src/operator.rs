//! Nonlinear differential operators `P_t(u) = F(x, t, jet of u)` and their
//! linearization along a base section.

use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::jet::{spectral_jet, Jet, JetField};
use crate::linop::{CoeffField, LinearOperatorSpec};
use crate::scalar::{diag, lit, Scalar};

/// Pointwise evaluation callback: jet in, `R^rank` out.
pub type EvalFn<T> = dyn Fn(&Jet<T>) -> Vec<T> + Send + Sync;

/// All first derivatives of `F` in the jet variables: rows are output
/// components `a`, columns follow the jet component layout.
pub type JetDerivFn<T> = dyn Fn(&Jet<T>) -> Array2<T> + Send + Sync;

/// A fully nonlinear operator of even order acting on rank-`rank` sections.
#[derive(Clone)]
pub struct NonlinearOperatorSpec<T> {
    dim: usize,
    order: usize,
    rank: usize,
    tube_radius: T,
    eval: Arc<EvalFn<T>>,
    d_eval: Option<Arc<JetDerivFn<T>>>,
    lipschitz: Option<(T, T)>,
}

impl<T: Scalar> NonlinearOperatorSpec<T> {
    pub fn new(
        dim: usize,
        order: usize,
        rank: usize,
        tube_radius: T,
        eval: Arc<EvalFn<T>>,
    ) -> Result<Self> {
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
        if !(tube_radius > T::zero()) {
            return Err(Error::Invalid("tube radius must be positive".into()));
        }
        Ok(Self {
            dim,
            order,
            rank,
            tube_radius,
            eval,
            d_eval: None,
            lipschitz: None,
        })
    }

    /// Attach analytic jet-derivatives of `F`.
    pub fn with_derivative(mut self, d_eval: Arc<JetDerivFn<T>>) -> Self {
        self.d_eval = Some(d_eval);
        self
    }

    /// Record known Lipschitz constants of `F` and `DF` on the tube.
    pub fn with_lipschitz(mut self, k1: T, k2: T) -> Self {
        self.lipschitz = Some((k1, k2));
        self
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

    pub fn tube_radius(&self) -> T {
        self.tube_radius
    }

    pub fn lipschitz(&self) -> Option<(T, T)> {
        self.lipschitz
    }

    /// Evaluate `F` at one jet.
    pub fn eval(&self, jet: &Jet<T>) -> Vec<T> {
        (self.eval)(jet)
    }

    /// First derivatives of `F` in the jet variables, analytic when supplied,
    /// otherwise central finite differences with step `1e-6 * (1 + |c|)`.
    pub fn jet_derivatives(&self, jet: &Jet<T>) -> Array2<T> {
        if let Some(d) = &self.d_eval {
            return d(jet);
        }
        let ncomp = jet.layout().len();
        let mut out = Array2::zeros((self.rank, ncomp));
        let mut comps = jet.components().to_vec();
        for c in 0..ncomp {
            let base = comps[c];
            let h = lit::<T>(1e-6) * (T::one() + base.abs());
            comps[c] = base + h;
            let fp = (self.eval)(&self.perturbed(jet, &comps));
            comps[c] = base - h;
            let fm = (self.eval)(&self.perturbed(jet, &comps));
            comps[c] = base;
            for a in 0..self.rank {
                out[[a, c]] = (fp[a] - fm[a]) / (lit::<T>(2.0) * h);
            }
        }
        out
    }

    fn perturbed(&self, jet: &Jet<T>, comps: &[T]) -> Jet<T> {
        Jet::new(
            jet.layout().clone(),
            jet.position().to_vec(),
            jet.time(),
            comps.to_vec(),
        )
    }
}

/// The domain tube `B`: jets within summed-sup distance `radius` of the
/// initial jet. The per-order distance is the sup over nodes and components
/// of that order, and orders are summed.
pub struct Tube<T> {
    base: JetField<T>,
    radius: T,
}

impl<T: Scalar> Tube<T> {
    pub fn new(
        spec: &NonlinearOperatorSpec<T>,
        grid: &TorusGrid,
        u0: ArrayView2<T>,
    ) -> Result<Self> {
        let base = spectral_jet(u0, grid, spec.order(), T::zero())?;
        Ok(Self {
            base,
            radius: spec.tube_radius(),
        })
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    /// Distance of a jet field from the tube center.
    pub fn deviation(&self, jets: &JetField<T>) -> T {
        let mut sum = T::zero();
        for order in 0..=self.base.layout().order() {
            sum += jets.order_sup_deviation(&self.base, order);
        }
        sum
    }

    /// Margin `radius - deviation`, or a tube-violation error naming the
    /// worst node.
    pub fn check(&self, jets: &JetField<T>) -> Result<T> {
        let deviation = self.deviation(jets);
        if deviation <= self.radius {
            return Ok(self.radius - deviation);
        }
        let nodes = self.base.grid().num_nodes();
        let worst = (0..nodes)
            .max_by(|&a, &b| {
                let da = jets.node_deviation(&self.base, a);
                let db = jets.node_deviation(&self.base, b);
                da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(0);
        Err(Error::TubeViolation {
            node: worst,
            deviation: diag(deviation),
            radius: diag(self.radius),
        })
    }
}

/// Apply `F` pointwise to the spectral jets of `section` at time `t`.
///
/// When a tube is supplied the jets are checked against it first, mirroring
/// the operator's domain restriction.
pub fn evaluate_operator<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    section: ArrayView2<T>,
    t: T,
    tube: Option<&Tube<T>>,
) -> Result<Array2<T>> {
    let jets = spectral_jet(section, grid, spec.order(), t)?;
    if let Some(tube) = tube {
        tube.check(&jets)?;
    }
    evaluate_on_jets(spec, &jets)
}

/// Apply `F` pointwise to precomputed jets.
pub fn evaluate_on_jets<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    jets: &JetField<T>,
) -> Result<Array2<T>> {
    let nodes = jets.grid().num_nodes();
    let mut out = Array2::zeros((nodes, spec.rank()));
    for node in 0..nodes {
        let jet = jets.jet_at(node);
        let values = spec.eval(&jet);
        if values.len() != spec.rank() {
            return Err(Error::ShapeMismatch {
                context: "operator evaluation".into(),
                expected: format!("{} components", spec.rank()),
                got: format!("{}", values.len()),
            });
        }
        for (a, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("operator value at node {node}"),
                });
            }
            out[[node, a]] = *v;
        }
    }
    Ok(out)
}

/// Freeze the linearization of `F` along the jets of `base` at time `t`:
/// the coefficient of the canonical index `I` is
/// `A^{aI}_b(x) = dF^a/d(jet component (I, b))` evaluated on the base jet.
pub fn linearize<T: Scalar>(
    spec: &NonlinearOperatorSpec<T>,
    grid: &TorusGrid,
    base: ArrayView2<T>,
    t: T,
) -> Result<LinearOperatorSpec<T>> {
    let jets = spectral_jet(base, grid, spec.order(), t)?;
    let layout = jets.layout().clone();
    let nodes = grid.num_nodes();
    let rank = spec.rank();

    let mut fields: Vec<Array3<T>> = layout
        .indices()
        .iter()
        .map(|_| Array3::zeros((nodes, rank, rank)))
        .collect();

    for node in 0..nodes {
        let jet = jets.jet_at(node);
        let deriv = spec.jet_derivatives(&jet);
        if deriv.iter().any(|v| !v.is_finite()) {
            return Err(Error::DerivativeFallback { node });
        }
        for (pos, _) in layout.indices().iter().enumerate() {
            for a in 0..rank {
                for b in 0..rank {
                    fields[pos][[node, a, b]] = deriv[[a, layout.component(pos, b)]];
                }
            }
        }
    }

    let mut linop = LinearOperatorSpec::new(spec.dim(), spec.order(), spec.rank())?;
    for (pos, index) in layout.indices().iter().enumerate() {
        linop.set_term(index.clone(), CoeffField::Static(fields[pos].clone()))?;
    }
    Ok(linop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_index::MultiIndex;
    use ndarray::Array2;

    fn section_1d<F: Fn(f64) -> f64>(grid: &TorusGrid, f: F) -> Array2<f64> {
        let mut s = Array2::zeros((grid.num_nodes(), 1));
        for j in 0..grid.num_nodes() {
            s[[j, 0]] = f(grid.node_position::<f64>(j)[0]);
        }
        s
    }

    fn uxx_spec() -> NonlinearOperatorSpec<f64> {
        NonlinearOperatorSpec::new(1, 2, 1, 10.0, Arc::new(|jet| vec![jet.deriv(&[0, 0], 0)]))
            .unwrap()
    }

    #[test]
    fn evaluates_second_derivative() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let u = section_1d(&grid, |x| x.sin());
        let out = evaluate_operator(&uxx_spec(), &grid, u.view(), 0.0, None).unwrap();
        for j in 0..32 {
            let x = grid.node_position::<f64>(j)[0];
            assert!((out[[j, 0]] + x.sin()).abs() <= 1e-10);
        }
    }

    #[test]
    fn evaluates_semilinear_and_arctan() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let u = section_1d(&grid, |x| x.sin());
        let semi = NonlinearOperatorSpec::new(
            1,
            2,
            1,
            10.0,
            Arc::new(|jet: &Jet<f64>| vec![jet.deriv(&[0, 0], 0) + jet.value(0).powi(2)]),
        )
        .unwrap();
        let out = evaluate_operator(&semi, &grid, u.view(), 0.0, None).unwrap();
        for j in 0..32 {
            let x = grid.node_position::<f64>(j)[0];
            assert!((out[[j, 0]] - (-x.sin() + x.sin().powi(2))).abs() <= 1e-10);
        }

        let v = section_1d(&grid, |x| x.cos());
        let atan = NonlinearOperatorSpec::new(
            1,
            2,
            1,
            10.0,
            Arc::new(|jet: &Jet<f64>| vec![jet.deriv(&[0, 0], 0).atan()]),
        )
        .unwrap();
        let out = evaluate_operator(&atan, &grid, v.view(), 0.0, None).unwrap();
        for j in 0..32 {
            let x = grid.node_position::<f64>(j)[0];
            assert!((out[[j, 0]] - (-x.cos()).atan()).abs() <= 1e-10);
        }
    }

    #[test]
    fn tube_violation_names_worst_node() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let spec = NonlinearOperatorSpec::new(
            1,
            2,
            1,
            0.5,
            Arc::new(|jet: &Jet<f64>| vec![jet.deriv(&[0, 0], 0)]),
        )
        .unwrap();
        let u0 = Array2::zeros((16, 1));
        let tube = Tube::new(&spec, &grid, u0.view()).unwrap();
        let mut far = Array2::zeros((16, 1));
        far[[5, 0]] = 2.0; // single-node spike
        let jets = spectral_jet(far.view(), &grid, 2, 0.0).unwrap();
        match tube.check(&jets) {
            Err(Error::TubeViolation { node, .. }) => assert_eq!(node, 5),
            other => panic!("expected tube violation, got {other:?}"),
        }
    }

    #[test]
    fn linearize_heat_gives_unit_top_coefficient() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let u0 = section_1d(&grid, |x| x.sin());
        let linop = linearize(&uxx_spec(), &grid, u0.view(), 0.0).unwrap();
        let top = linop.static_term(&MultiIndex::new(&[0, 0])).unwrap();
        let zero = linop.static_term(&MultiIndex::identity()).unwrap();
        let first = linop.static_term(&MultiIndex::new(&[0])).unwrap();
        // finite-difference fallback: rounding-limited, not truncation-limited
        for node in 0..16 {
            assert!((top[[node, 0, 0]] - 1.0).abs() <= 1e-9);
            assert!(zero[[node, 0, 0]].abs() <= 1e-9);
            assert!(first[[node, 0, 0]].abs() <= 1e-9);
        }
    }

    #[test]
    fn linearize_gradient_square_by_chain_rule() {
        // F = (u_x)^2 linearized at sin(x): first-order coefficient 2 cos(x)
        let grid = TorusGrid::new(1, 32).unwrap();
        let spec = NonlinearOperatorSpec::new(
            1,
            2,
            1,
            10.0,
            Arc::new(|jet: &Jet<f64>| vec![jet.deriv(&[0], 0).powi(2)]),
        )
        .unwrap();
        let u0 = section_1d(&grid, |x| x.sin());
        let linop = linearize(&spec, &grid, u0.view(), 0.0).unwrap();
        let first = linop.static_term(&MultiIndex::new(&[0])).unwrap();
        let zero = linop.static_term(&MultiIndex::identity()).unwrap();
        for node in 0..32 {
            let x = grid.node_position::<f64>(node)[0];
            // finite-difference fallback: expect ~1e-9 accuracy
            assert!((first[[node, 0, 0]] - 2.0 * x.cos()).abs() <= 1e-8);
            assert!(zero[[node, 0, 0]].abs() <= 1e-8);
        }
    }
}
