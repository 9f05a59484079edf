//! Fourier differentiation on the torus grid.
//!
//! Derivatives are computed by `u -> F^-1[(ik)^I F[u]]`, exact to rounding
//! for every mode resolvable on the grid. Spectra are stored flattened with
//! the same node layout as the grid and normalized so that entry `k` is the
//! trigonometric coefficient of `e^{i k.x}`.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;
use crate::multi_index::MultiIndex;
use crate::scalar::{lit, Scalar};

pub struct SpectralEngine<T: Scalar> {
    grid: TorusGrid,
    forward_plan: Arc<dyn Fft<T>>,
    inverse_plan: Arc<dyn Fft<T>>,
    /// Signed wavenumber per 1-d spectral index: `0,1,..,N/2,-N/2+1,..,-1`.
    wavenumbers: Vec<i64>,
}

impl<T: Scalar> SpectralEngine<T> {
    pub fn new(grid: &TorusGrid) -> Self {
        let n = grid.points_per_dim();
        let mut planner = FftPlanner::<T>::new();
        let forward_plan = planner.plan_fft_forward(n);
        let inverse_plan = planner.plan_fft_inverse(n);
        let wavenumbers = (0..n)
            .map(|j| {
                if j <= n / 2 {
                    j as i64
                } else {
                    j as i64 - n as i64
                }
            })
            .collect();
        Self {
            grid: grid.clone(),
            forward_plan,
            inverse_plan,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Signed wavenumber vector of a flattened spectral index.
    pub fn wavenumber(&self, spectral_node: usize) -> [i64; 2] {
        let idx = self.grid.node_indices(spectral_node);
        let mut k = [0i64; 2];
        for d in 0..self.grid.dim() {
            k[d] = self.wavenumbers[idx[d]];
        }
        k
    }

    /// `|k|^2` of a flattened spectral index.
    pub fn wavenumber_sq(&self, spectral_node: usize) -> T {
        let k = self.wavenumber(spectral_node);
        lit((k[0] * k[0] + k[1] * k[1]) as f64)
    }

    /// Normalized forward transform of one scalar grid function.
    pub fn forward(&self, values: ArrayView1<T>) -> Result<Vec<Complex<T>>> {
        if values.len() != self.grid.num_nodes() {
            return Err(Error::ShapeMismatch {
                context: "forward transform".into(),
                expected: format!("{} nodes", self.grid.num_nodes()),
                got: format!("{}", values.len()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "forward transform input".into(),
            });
        }
        let mut buf: Vec<Complex<T>> = values
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        self.transform(&mut buf, true);
        let scale = T::one() / lit(self.grid.num_nodes() as f64);
        for c in buf.iter_mut() {
            *c = *c * scale;
        }
        Ok(buf)
    }

    /// Inverse transform; returns the real part (inputs are spectra of real
    /// grid functions, the imaginary part is rounding noise).
    pub fn inverse(&self, spectrum: &[Complex<T>]) -> Array1<T> {
        let mut buf = spectrum.to_vec();
        self.transform(&mut buf, false);
        Array1::from_iter(buf.iter().map(|c| c.re))
    }

    fn transform(&self, buf: &mut [Complex<T>], forward: bool) {
        let n = self.grid.points_per_dim();
        let plan = if forward {
            &self.forward_plan
        } else {
            &self.inverse_plan
        };
        match self.grid.dim() {
            1 => plan.process(buf),
            2 => {
                // rows (x), then columns (y)
                for row in buf.chunks_exact_mut(n) {
                    plan.process(row);
                }
                let mut col = vec![Complex::new(T::zero(), T::zero()); n];
                for x in 0..n {
                    for y in 0..n {
                        col[y] = buf[x + n * y];
                    }
                    plan.process(&mut col);
                    for y in 0..n {
                        buf[x + n * y] = col[y];
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Multiplier of `(ik)^I` at a spectral node. Odd derivative orders at
    /// the Nyquist index are zeroed to keep real outputs real.
    pub fn derivative_multiplier(&self, index: &MultiIndex, spectral_node: usize) -> Complex<T> {
        let nyquist = (self.grid.points_per_dim() / 2) as i64;
        let k = self.wavenumber(spectral_node);
        let mut result = Complex::new(T::one(), T::zero());
        for d in 0..self.grid.dim() {
            let m = index.count(d);
            if m == 0 {
                continue;
            }
            if k[d].abs() == nyquist && m % 2 == 1 {
                return Complex::new(T::zero(), T::zero());
            }
            let kp = lit::<T>(k[d] as f64).powi(m as i32);
            // i^m cycle
            let f = match m % 4 {
                0 => Complex::new(kp, T::zero()),
                1 => Complex::new(T::zero(), kp),
                2 => Complex::new(-kp, T::zero()),
                _ => Complex::new(T::zero(), -kp),
            };
            result = result * f;
        }
        result
    }

    /// Spatial derivative `d_I u` of one scalar grid function.
    pub fn derivative(&self, values: ArrayView1<T>, index: &MultiIndex) -> Result<Array1<T>> {
        let mut spectrum = self.forward(values)?;
        for (node, c) in spectrum.iter_mut().enumerate() {
            *c = *c * self.derivative_multiplier(index, node);
        }
        Ok(self.inverse(&spectrum))
    }

    /// Fraction of spectral energy sitting in the top mode band
    /// (`|k|_inf >= N/2 - 1`); `0` for the zero function.
    pub fn high_mode_energy_fraction(&self, values: ArrayView1<T>) -> Result<T> {
        let spectrum = self.forward(values)?;
        let cutoff = (self.grid.points_per_dim() / 2 - 1) as i64;
        let mut total = T::zero();
        let mut top = T::zero();
        for (node, c) in spectrum.iter().enumerate() {
            let k = self.wavenumber(node);
            let e = c.norm_sqr();
            total += e;
            if k[0].abs() >= cutoff || k[1].abs() >= cutoff {
                top += e;
            }
        }
        if total == T::zero() {
            Ok(T::zero())
        } else {
            Ok(top / total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_index::MultiIndex;
    use ndarray::Array1;

    fn grid_fn<F: Fn(f64, f64) -> f64>(grid: &TorusGrid, f: F) -> Array1<f64> {
        Array1::from_iter((0..grid.num_nodes()).map(|j| {
            let p = grid.node_position::<f64>(j);
            f(p[0], *p.get(1).unwrap_or(&0.0))
        }))
    }

    #[test]
    fn sine_derivatives_are_exact() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let eng = SpectralEngine::<f64>::new(&grid);
        let u = grid_fn(&grid, |x, _| x.sin());
        let ux = eng.derivative(u.view(), &MultiIndex::new(&[0])).unwrap();
        let uxx = eng.derivative(u.view(), &MultiIndex::new(&[0, 0])).unwrap();
        for j in 0..grid.num_nodes() {
            let x = grid.node_position::<f64>(j)[0];
            assert!((ux[j] - x.cos()).abs() <= 1e-10);
            assert!((uxx[j] + x.sin()).abs() <= 1e-10);
        }
    }

    #[test]
    fn constants_have_zero_derivatives() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let eng = SpectralEngine::<f64>::new(&grid);
        let u = Array1::from_elem(16, 3.0);
        let ux = eng.derivative(u.view(), &MultiIndex::new(&[0])).unwrap();
        assert!(ux.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn mixed_derivative_2d() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let eng = SpectralEngine::<f64>::new(&grid);
        let u = grid_fn(&grid, |x, y| (2.0 * x).sin() * y.cos());
        let uxy = eng.derivative(u.view(), &MultiIndex::new(&[0, 1])).unwrap();
        for j in 0..grid.num_nodes() {
            let p = grid.node_position::<f64>(j);
            let expect = -2.0 * (2.0 * p[0]).cos() * p[1].sin();
            assert!((uxy[j] - expect).abs() <= 1e-10);
        }
    }

    #[test]
    fn all_resolvable_modes_are_exact() {
        let n = 16;
        let grid = TorusGrid::new(1, n).unwrap();
        let eng = SpectralEngine::<f64>::new(&grid);
        for k in 1..(n / 2) as i64 {
            let u = grid_fn(&grid, |x, _| (k as f64 * x).sin());
            let ux = eng.derivative(u.view(), &MultiIndex::new(&[0])).unwrap();
            for j in 0..grid.num_nodes() {
                let x = grid.node_position::<f64>(j)[0];
                let expect = k as f64 * (k as f64 * x).cos();
                assert!(
                    (ux[j] - expect).abs() <= 1e-10,
                    "mode {k} node {j}: {} vs {expect}",
                    ux[j]
                );
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let eng = SpectralEngine::<f32>::new(&grid);
        let u = Array1::from_iter((0..32).map(|j| {
            let x = grid.node_position::<f32>(j)[0];
            x.sin()
        }));
        let ux = eng.derivative(u.view(), &MultiIndex::new(&[0])).unwrap();
        for j in 0..32 {
            let x = grid.node_position::<f32>(j)[0];
            assert!((ux[j] - x.cos()).abs() <= 1e-4);
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let eng = SpectralEngine::<f64>::new(&grid);
        let mut u = Array1::zeros(8);
        u[3] = f64::NAN;
        assert!(eng.forward(u.view()).is_err());
    }

    #[test]
    fn high_mode_energy_detects_aliasing_risk() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let eng = SpectralEngine::<f64>::new(&grid);
        let smooth = grid_fn(&grid, |x, _| x.sin());
        assert!(eng.high_mode_energy_fraction(smooth.view()).unwrap() <= 1e-12);
        let rough = grid_fn(&grid, |x, _| (7.0 * x).sin());
        assert!(eng.high_mode_energy_fraction(rough.view()).unwrap() > 0.5);
    }
}
