//! Observables sampled on a uniform circle grid.

use alloc::vec::Vec;

use crate::circle::wrap;

/// A function sampled at the points x_i = i/N, interpolated piecewise
/// linearly around the circle. Evaluation at a grid point returns the stored
/// value exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        assert!(values.len() >= 2, "grid needs at least two points");
        GridFunction { values }
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        assert!(n >= 2);
        GridFunction {
            values: (0..n).map(|i| f(i as f64 / n as f64)).collect(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        GridFunction::new(alloc::vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid point x_i = i/N.
    pub fn point(&self, i: usize) -> f64 {
        i as f64 / self.values.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Piecewise-linear evaluation on the circle. Node positions that are
    /// only off by arithmetic rounding (x = i/N need not multiply back to i
    /// exactly) snap to the stored value.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let t = wrap(x) * n as f64;
        let nearest = libm::round(t);
        if libm::fabs(t - nearest) < 1e-9 {
            return self.values[(nearest as usize) % n];
        }
        let mut i = t as usize;
        if i >= n {
            i = n - 1;
        }
        let frac = t - i as f64;
        let a = self.values[i];
        let b = self.values[(i + 1) % n];
        a + frac * (b - a)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0_f64, |m, &v| m.max(libm::fabs(v)))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Sup-norm distance to another grid function on the same grid.
    pub fn sup_diff(&self, other: &GridFunction) -> f64 {
        assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (&a, &b)| m.max(libm::fabs(a - b)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::new(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        assert_eq!(self.len(), other.len());
        GridFunction::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// Hoelder seminorm estimate over grid pairs at circle distance in
    /// (0, delta]: the largest |g(x) - g(y)| / d(x, y)^alpha.
    pub fn holder_seminorm(&self, alpha: f64, delta: f64) -> f64 {
        let n = self.values.len();
        let max_gap = ((delta * n as f64) as usize).min(n / 2);
        let mut worst = 0.0_f64;
        for gap in 1..=max_gap {
            let d = gap as f64 / n as f64;
            if d > delta {
                break;
            }
            let dpow = libm::pow(d, alpha);
            for i in 0..n {
                let j = (i + gap) % n;
                let diff = libm::fabs(self.values[i] - self.values[j]);
                let ratio = diff / dpow;
                if ratio > worst {
                    worst = ratio;
                }
            }
        }
        worst
    }

    /// Lipschitz estimate from adjacent grid differences.
    pub fn grid_lipschitz(&self) -> f64 {
        let n = self.values.len();
        let mut worst = 0.0_f64;
        for i in 0..n {
            let j = (i + 1) % n;
            let slope = libm::fabs(self.values[j] - self.values[i]) * n as f64;
            if slope > worst {
                worst = slope;
            }
        }
        worst
    }
}
