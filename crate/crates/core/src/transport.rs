//! Parallel transport of fiber vectors along curves in a one-dimensional
//! base circle: the linear ODE `dV^a/ds + Gamma^a_b(gamma(s)) gamma'(s) V^b = 0`
//! integrated with classical fourth-order Runge-Kutta.
//!
//! For a connection compatible with the Euclidean fiber metric (antisymmetric
//! `Gamma`) the transported vector keeps its length; the result reports the
//! largest deviation observed.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::{diag, lit, Scalar};

/// Connection coefficients on a rank-`rank` bundle over the circle:
/// `gamma(x)` returns the matrix `Gamma^a_b(x)` for the single base direction.
#[derive(Clone)]
pub struct ChristoffelSpec<T> {
    rank: usize,
    gamma: Arc<dyn Fn(T) -> Array2<T> + Send + Sync>,
}

impl<T: Scalar> ChristoffelSpec<T> {
    pub fn new(rank: usize, gamma: Arc<dyn Fn(T) -> Array2<T> + Send + Sync>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Invalid("bundle rank must be positive".into()));
        }
        Ok(Self { rank, gamma })
    }

    /// The flat connection.
    pub fn flat(rank: usize) -> Self {
        Self {
            rank,
            gamma: Arc::new(move |_| Array2::zeros((rank, rank))),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gamma_at(&self, x: T) -> Array2<T> {
        (self.gamma)(x)
    }
}

/// A parametrized curve `s -> gamma(s)` with its velocity.
#[derive(Clone)]
pub struct Curve<T> {
    pub position: Arc<dyn Fn(T) -> T + Send + Sync>,
    pub velocity: Arc<dyn Fn(T) -> T + Send + Sync>,
    pub s_max: T,
}

impl<T: Scalar> Curve<T> {
    /// The unit-speed curve `gamma(s) = s`.
    pub fn unit_speed(s_max: T) -> Self {
        Self {
            position: Arc::new(|s| s),
            velocity: Arc::new(|_| T::one()),
            s_max,
        }
    }
}

/// Transported vector sampled along the curve.
#[derive(Debug, Clone)]
pub struct TransportResult<T> {
    pub s: Vec<T>,
    /// Row `m` is `V(s_m)`.
    pub values: Array2<T>,
    /// `max_s | |V(s)| - |V(0)| |`.
    pub max_norm_drift: T,
}

impl<T: Scalar> TransportResult<T> {
    pub fn final_value(&self) -> Vec<T> {
        self.values.row(self.values.nrows() - 1).to_vec()
    }
}

fn rhs<T: Scalar>(spec: &ChristoffelSpec<T>, curve: &Curve<T>, s: T, v: &[T]) -> Vec<T> {
    let x = (curve.position)(s);
    let speed = (curve.velocity)(s);
    let gamma = spec.gamma_at(x);
    let rank = spec.rank();
    let mut out = vec![T::zero(); rank];
    for a in 0..rank {
        let mut acc = T::zero();
        for b in 0..rank {
            acc += gamma[[a, b]] * v[b];
        }
        out[a] = -speed * acc;
    }
    out
}

/// Integrate the transport ODE from `V(0) = v0` over `[0, s_max]` in `steps`
/// RK4 steps.
pub fn parallel_transport<T: Scalar>(
    spec: &ChristoffelSpec<T>,
    curve: &Curve<T>,
    v0: &[T],
    steps: usize,
) -> Result<TransportResult<T>> {
    if v0.len() != spec.rank() {
        return Err(Error::ShapeMismatch {
            context: "transport initial vector".into(),
            expected: format!("{} components", spec.rank()),
            got: format!("{}", v0.len()),
        });
    }
    if steps == 0 {
        return Err(Error::StepUnderflow { dt: 0.0 });
    }
    let h = curve.s_max / lit(steps as f64);
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::StepUnderflow { dt: diag(h) });
    }

    let rank = spec.rank();
    let norm0 = v0.iter().map(|&c| c * c).sum::<T>().sqrt();
    let mut values = Array2::zeros((steps + 1, rank));
    let mut s_nodes = Vec::with_capacity(steps + 1);
    let mut v = v0.to_vec();
    let mut drift = T::zero();
    let half = lit::<T>(0.5);
    let sixth = T::one() / lit::<T>(6.0);

    for m in 0..=steps {
        let s = h * lit(m as f64);
        s_nodes.push(s);
        for (a, &c) in v.iter().enumerate() {
            values[[m, a]] = c;
        }
        let norm = v.iter().map(|&c| c * c).sum::<T>().sqrt();
        let dev = (norm - norm0).abs();
        if dev > drift {
            drift = dev;
        }
        if m == steps {
            break;
        }

        let k1 = rhs(spec, curve, s, &v);
        let v2: Vec<T> = v.iter().zip(&k1).map(|(&x, &k)| x + half * h * k).collect();
        let k2 = rhs(spec, curve, s + half * h, &v2);
        let v3: Vec<T> = v.iter().zip(&k2).map(|(&x, &k)| x + half * h * k).collect();
        let k3 = rhs(spec, curve, s + half * h, &v3);
        let v4: Vec<T> = v.iter().zip(&k3).map(|(&x, &k)| x + h * k).collect();
        let k4 = rhs(spec, curve, s + h, &v4);
        for a in 0..rank {
            v[a] += h * sixth * (k1[a] + lit::<T>(2.0) * (k2[a] + k3[a]) + k4[a]);
        }
    }

    Ok(TransportResult {
        s: s_nodes,
        values,
        max_norm_drift: drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn flat_connection_keeps_vector() {
        let spec = ChristoffelSpec::<f64>::flat(3);
        let curve = Curve::unit_speed(2.0);
        let out = parallel_transport(&spec, &curve, &[1.0, -2.0, 0.5], 100).unwrap();
        assert_eq!(out.final_value(), vec![1.0, -2.0, 0.5]);
        assert_eq!(out.max_norm_drift, 0.0);
    }

    #[test]
    fn rotation_connection_matches_closed_form() {
        // Gamma = [[0, 1], [-1, 0]]: dV/ds = [[0,-1],[1,0]] V, rotation by +s
        let spec = ChristoffelSpec::<f64>::new(
            2,
            Arc::new(|_x| array![[0.0, 1.0], [-1.0, 0.0]]),
        )
        .unwrap();
        let s_max = 1.0f64;
        let curve = Curve::unit_speed(s_max);
        let v0 = [1.0, 0.0];
        let out = parallel_transport(&spec, &curve, &v0, 1000).unwrap();
        let v = out.final_value();
        let expect = [s_max.cos(), s_max.sin()];
        assert!((v[0] - expect[0]).abs() <= 1e-8);
        assert!((v[1] - expect[1]).abs() <= 1e-8);
        assert!(out.max_norm_drift <= 1e-8);
    }

    #[test]
    fn antisymmetric_connection_preserves_norm() {
        // position-dependent antisymmetric connection
        let spec = ChristoffelSpec::new(
            2,
            Arc::new(|x: f64| {
                let w = 1.0 + 0.5 * x.sin();
                array![[0.0, w], [-w, 0.0]]
            }),
        )
        .unwrap();
        let curve = Curve {
            position: Arc::new(|s: f64| 2.0 * s),
            velocity: Arc::new(|_| 2.0),
            s_max: 3.0,
        };
        let out = parallel_transport(&spec, &curve, &[0.6, 0.8], 3000).unwrap();
        assert!(out.max_norm_drift <= 1e-8);
    }

    #[test]
    fn zero_steps_is_underflow() {
        let spec = ChristoffelSpec::<f64>::flat(1);
        let curve = Curve::unit_speed(1.0);
        assert!(matches!(
            parallel_transport(&spec, &curve, &[1.0], 0),
            Err(Error::StepUnderflow { .. })
        ));
    }
}
