//! Uniform periodic grids on the flat torus, period `2*pi` per dimension.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Uniform grid on `T^1` or `T^2`. Nodes are `x_j = 2*pi*j/N` per dimension,
/// flattened row-major: node index `j = jx + N*jy`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    points_per_dim: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, points_per_dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadDimension(dim));
        }
        if points_per_dim < 8 || points_per_dim % 2 != 0 {
            return Err(Error::BadGrid(points_per_dim));
        }
        Ok(Self {
            dim,
            points_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn num_nodes(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    /// Node spacing `2*pi/N`, the same in every dimension.
    pub fn spacing<T: Scalar>(&self) -> T {
        lit::<T>(2.0) * T::PI() / lit(self.points_per_dim as f64)
    }

    /// Torus volume `(2*pi)^dim`.
    pub fn volume<T: Scalar>(&self) -> T {
        (lit::<T>(2.0) * T::PI()).powi(self.dim as i32)
    }

    /// Per-dimension integer indices of a flattened node.
    pub fn node_indices(&self, node: usize) -> [usize; 2] {
        debug_assert!(node < self.num_nodes());
        let n = self.points_per_dim;
        [node % n, if self.dim == 2 { node / n } else { 0 }]
    }

    /// Coordinates of a node, length `dim`.
    pub fn node_position<T: Scalar>(&self, node: usize) -> Vec<T> {
        let dx = self.spacing::<T>();
        let idx = self.node_indices(node);
        (0..self.dim).map(|d| dx * lit(idx[d] as f64)).collect()
    }

    /// Neighbor of `node` shifted by `offset` grid points along `dir`, with wrap.
    pub fn shifted_node(&self, node: usize, dir: usize, offset: isize) -> usize {
        debug_assert!(dir < self.dim);
        let n = self.points_per_dim as isize;
        let mut idx = self.node_indices(node);
        let moved = (idx[dir] as isize + offset).rem_euclid(n) as usize;
        idx[dir] = moved;
        idx[0] + if self.dim == 2 {
            self.points_per_dim * idx[1]
        } else {
            0
        }
    }

    /// Periodic Euclidean distance between two nodes.
    pub fn node_distance<T: Scalar>(&self, a: usize, b: usize) -> T {
        let period = lit::<T>(2.0) * T::PI();
        let pa = self.node_position::<T>(a);
        let pb = self.node_position::<T>(b);
        let mut sum = T::zero();
        for d in 0..self.dim {
            let mut diff = (pa[d] - pb[d]).abs();
            if diff > period - diff {
                diff = period - diff;
            }
            sum = sum + diff * diff;
        }
        sum.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_shapes() {
        assert!(TorusGrid::new(3, 16).is_err());
        assert!(TorusGrid::new(1, 7).is_err());
        assert!(TorusGrid::new(1, 6).is_err());
        assert!(TorusGrid::new(2, 16).is_ok());
    }

    #[test]
    fn node_layout_2d() {
        let g = TorusGrid::new(2, 8).unwrap();
        assert_eq!(g.num_nodes(), 64);
        assert_eq!(g.node_indices(10), [2, 1]);
        let p = g.node_position::<f64>(10);
        assert_abs_diff_eq!(p[0], 2.0 * std::f64::consts::PI * 2.0 / 8.0);
        assert_abs_diff_eq!(p[1], 2.0 * std::f64::consts::PI / 8.0);
        assert_eq!(g.shifted_node(7, 0, 1), 0); // wraps in x
        assert_eq!(g.shifted_node(0, 1, -1), 56); // wraps in y
    }

    #[test]
    fn periodic_distance_wraps() {
        let g = TorusGrid::new(1, 8).unwrap();
        // nodes 0 and 7 are one spacing apart through the seam
        let d: f64 = g.node_distance(0, 7);
        assert_abs_diff_eq!(d, g.spacing::<f64>(), epsilon = 1e-14);
    }
}
