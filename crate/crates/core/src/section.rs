//! Gridded space-time sections `u(x, t)` over torus x time interval.

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::multi_index::MultiIndex;
use crate::scalar::{lit, Scalar};
use crate::spectral::SpectralEngine;

/// Values of a rank-`l` section on `grid x {t_0..t_M}`, shape
/// `(levels, nodes, components)` with uniform time nodes.
#[derive(Debug, Clone)]
pub struct SpaceTimeSection<T> {
    grid: TorusGrid,
    times: Vec<T>,
    values: Array3<T>,
}

impl<T: Scalar> SpaceTimeSection<T> {
    pub fn new(grid: TorusGrid, times: Vec<T>, values: Array3<T>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::TooFewTimeLevels);
        }
        if values.dim().0 != times.len() || values.dim().1 != grid.num_nodes() {
            return Err(Error::ShapeMismatch {
                context: "space-time section".into(),
                expected: format!("({}, {}, l)", times.len(), grid.num_nodes()),
                got: format!("{:?}", values.dim()),
            });
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Invalid("time nodes must strictly increase".into()));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "space-time section values".into(),
            });
        }
        Ok(Self {
            grid,
            times,
            values,
        })
    }

    /// Sample a closure `f(position, t) -> component vector`.
    pub fn from_fn<F>(grid: &TorusGrid, rank: usize, horizon: T, steps: usize, f: F) -> Result<Self>
    where
        F: Fn(&[T], T) -> Vec<T>,
    {
        if steps == 0 {
            return Err(Error::TooFewTimeLevels);
        }
        let nodes = grid.num_nodes();
        let dt = horizon / lit(steps as f64);
        let times: Vec<T> = (0..=steps).map(|m| dt * lit(m as f64)).collect();
        let mut values = Array3::zeros((steps + 1, nodes, rank));
        for (m, &t) in times.iter().enumerate() {
            for node in 0..nodes {
                let x = grid.node_position::<T>(node);
                let v = f(&x, t);
                debug_assert_eq!(v.len(), rank);
                for (c, &vc) in v.iter().enumerate() {
                    values[[m, node, c]] = vc;
                }
            }
        }
        Self::new(grid.clone(), times, values)
    }

    /// Constant-in-time extension of an initial section.
    pub fn constant_extension(
        grid: &TorusGrid,
        u0: ArrayView2<T>,
        horizon: T,
        steps: usize,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::TooFewTimeLevels);
        }
        let nodes = grid.num_nodes();
        if u0.nrows() != nodes {
            return Err(Error::ShapeMismatch {
                context: "constant extension".into(),
                expected: format!("{nodes} nodes"),
                got: format!("{}", u0.nrows()),
            });
        }
        let rank = u0.ncols();
        let dt = horizon / lit(steps as f64);
        let times: Vec<T> = (0..=steps).map(|m| dt * lit(m as f64)).collect();
        let mut values = Array3::zeros((steps + 1, nodes, rank));
        for m in 0..=steps {
            for node in 0..nodes {
                for c in 0..rank {
                    values[[m, node, c]] = u0[[node, c]];
                }
            }
        }
        Self::new(grid.clone(), times, values)
    }

    /// All-zero section.
    pub fn zeros(grid: &TorusGrid, rank: usize, horizon: T, steps: usize) -> Result<Self> {
        Self::constant_extension(grid, Array2::zeros((grid.num_nodes(), rank)).view(), horizon, steps)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn levels(&self) -> usize {
        self.times.len()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn rank(&self) -> usize {
        self.values.dim().2
    }

    pub fn horizon(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn dt(&self) -> T {
        self.times[1] - self.times[0]
    }

    pub fn values(&self) -> &Array3<T> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array3<T> {
        &mut self.values
    }

    /// One time level as a `(nodes, components)` view.
    pub fn level(&self, m: usize) -> ArrayView2<'_, T> {
        self.values.index_axis(ndarray::Axis(0), m)
    }

    pub fn level_owned(&self, m: usize) -> Array2<T> {
        self.level(m).to_owned()
    }

    /// Keep the first `steps + 1` levels.
    pub fn restrict_steps(&self, steps: usize) -> Result<Self> {
        if steps + 1 > self.levels() || steps == 0 {
            return Err(Error::Invalid(format!(
                "cannot restrict a {}-step section to {steps} steps",
                self.steps()
            )));
        }
        let times = self.times[..=steps].to_vec();
        let values = self
            .values
            .slice(ndarray::s![..=steps, .., ..])
            .to_owned();
        Self::new(self.grid.clone(), times, values)
    }

    /// Double the number of steps by inserting linearly interpolated
    /// midpoint levels.
    pub fn refine_time_linear(&self) -> Result<Self> {
        let steps = self.steps();
        let (_, nodes, rank) = self.values.dim();
        let mut values = Array3::zeros((2 * steps + 1, nodes, rank));
        let mut times = Vec::with_capacity(2 * steps + 1);
        let half = lit::<T>(0.5);
        for m in 0..steps {
            times.push(self.times[m]);
            times.push((self.times[m] + self.times[m + 1]) * half);
            for node in 0..nodes {
                for c in 0..rank {
                    let a = self.values[[m, node, c]];
                    let b = self.values[[m + 1, node, c]];
                    values[[2 * m, node, c]] = a;
                    values[[2 * m + 1, node, c]] = (a + b) * half;
                }
            }
        }
        times.push(self.times[steps]);
        for node in 0..nodes {
            for c in 0..rank {
                values[[2 * steps, node, c]] = self.values[[steps, node, c]];
            }
        }
        Self::new(self.grid.clone(), times, values)
    }

    /// Keep every `stride`-th level (the step count must divide evenly).
    pub fn downsample_time(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.steps() % stride != 0 {
            return Err(Error::Invalid(format!(
                "stride {stride} does not divide {} steps",
                self.steps()
            )));
        }
        let times: Vec<T> = self.times.iter().copied().step_by(stride).collect();
        let values = self
            .values
            .slice(ndarray::s![..;stride, .., ..])
            .to_owned();
        Self::new(self.grid.clone(), times, values)
    }

    /// Pointwise difference; shapes and time grids must match.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        Self::new(
            self.grid.clone(),
            self.times.clone(),
            &self.values - &other.values,
        )
    }

    /// Pointwise sum; shapes and time grids must match.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        Self::new(
            self.grid.clone(),
            self.times.clone(),
            &self.values + &other.values,
        )
    }

    pub fn scale(&self, factor: T) -> Self {
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            values: self.values.mapv(|v| v * factor),
        }
    }

    pub fn compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid
            || self.values.dim() != other.values.dim()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(&a, &b)| (a - b).abs() > lit(1e-12))
        {
            return Err(Error::ShapeMismatch {
                context: "section pair".into(),
                expected: format!("{:?}", self.values.dim()),
                got: format!("{:?}", other.values.dim()),
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc })
    }

    /// Second-order finite-difference time derivative: centered in the
    /// interior, one-sided at the endpoints (two-point when only two levels).
    pub fn time_derivative(&self) -> Result<Self> {
        let levels = self.levels();
        if levels < 2 {
            return Err(Error::TooFewTimeLevels);
        }
        let (_, nodes, rank) = self.values.dim();
        let dt = self.dt();
        let mut out = Array3::zeros(self.values.dim());
        let two = lit::<T>(2.0);
        for node in 0..nodes {
            for c in 0..rank {
                if levels == 2 {
                    let d = (self.values[[1, node, c]] - self.values[[0, node, c]]) / dt;
                    out[[0, node, c]] = d;
                    out[[1, node, c]] = d;
                    continue;
                }
                for m in 1..levels - 1 {
                    out[[m, node, c]] =
                        (self.values[[m + 1, node, c]] - self.values[[m - 1, node, c]]) / (two * dt);
                }
                out[[0, node, c]] = (-lit::<T>(3.0) * self.values[[0, node, c]]
                    + lit::<T>(4.0) * self.values[[1, node, c]]
                    - self.values[[2, node, c]])
                    / (two * dt);
                let last = levels - 1;
                out[[last, node, c]] = (lit::<T>(3.0) * self.values[[last, node, c]]
                    - lit::<T>(4.0) * self.values[[last - 1, node, c]]
                    + self.values[[last - 2, node, c]])
                    / (two * dt);
            }
        }
        Self::new(self.grid.clone(), self.times.clone(), out)
    }

    /// Spatial derivative `d_I u` applied level by level, spectrally.
    pub fn spatial_derivative(&self, index: &MultiIndex) -> Result<Self> {
        let engine = SpectralEngine::new(&self.grid);
        let (levels, nodes, rank) = self.values.dim();
        let mut out = Array3::zeros(self.values.dim());
        for m in 0..levels {
            for c in 0..rank {
                let column = self.level(m).column(c).to_owned();
                let deriv = engine.derivative(column.view(), index)?;
                for node in 0..nodes {
                    out[[m, node, c]] = deriv[node];
                }
            }
        }
        Self::new(self.grid.clone(), self.times.clone(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 16).unwrap()
    }

    #[test]
    fn builders_and_views() {
        let s = SpaceTimeSection::<f64>::from_fn(&grid(), 1, 1.0, 4, |x, t| vec![x[0].sin() + t])
            .unwrap();
        assert_eq!(s.levels(), 5);
        assert_eq!(s.steps(), 4);
        assert!((s.dt() - 0.25).abs() <= 1e-15);
        assert_eq!(s.level(0).dim(), (16, 1));
    }

    #[test]
    fn time_derivative_of_linear_ramp_is_exact() {
        let s =
            SpaceTimeSection::<f64>::from_fn(&grid(), 1, 1.0, 4, |_, t| vec![3.0 * t]).unwrap();
        let dt = s.time_derivative().unwrap();
        for v in dt.values().iter() {
            assert!((v - 3.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn time_derivative_second_order_at_ends() {
        // quadratic in t is differentiated exactly by the 3-point stencils
        let s = SpaceTimeSection::<f64>::from_fn(&grid(), 1, 1.0, 4, |_, t| vec![t * t]).unwrap();
        let d = s.time_derivative().unwrap();
        for (m, &t) in s.times().iter().enumerate() {
            assert!((d.values()[[m, 0, 0]] - 2.0 * t).abs() <= 1e-12);
        }
    }

    #[test]
    fn restrict_and_refine_round_trip() {
        let s = SpaceTimeSection::<f64>::from_fn(&grid(), 1, 1.0, 4, |x, t| {
            vec![x[0].cos() * (1.0 + t)]
        })
        .unwrap();
        let r = s.restrict_steps(2).unwrap();
        assert_eq!(r.steps(), 2);
        assert_eq!(r.level(2), s.level(2));
        let f = s.refine_time_linear().unwrap();
        assert_eq!(f.steps(), 8);
        assert_eq!(f.level(2), s.level(1));
        let back = f.downsample_time(2).unwrap();
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn rejects_single_level() {
        let values = Array3::<f64>::zeros((1, 16, 1));
        assert!(SpaceTimeSection::new(grid(), vec![0.0], values).is_err());
    }
}
