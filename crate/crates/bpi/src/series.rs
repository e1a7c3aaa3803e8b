//! Truncated power-series arithmetic over the complex numbers.
//!
//! Used by the stationary-law extractor: the scale-type integral `S(0; u)`
//! is analytic on the open unit disk, so its Taylor series (built from the
//! mechanism tail sums by division, exponentiation and integration of
//! series) evaluates the probability generating function on the sampling
//! circle |u| = r without any complex-path quadrature.

use num_complex::Complex64;

/// Coefficients `c[k]` of `Σ c[k] u^k`, truncated at a fixed length.
#[derive(Debug, Clone)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Series of `num / den` with `den[0] != 0`, to the shorter length.
    pub fn divide(num: &Series, den: &Series) -> Series {
        let n = num.len().min(den.len());
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut acc = num.0[k];
            for j in 1..=k {
                acc -= den.0[j] * out[k - j];
            }
            out[k] = acc / den.0[0];
        }
        Series(out)
    }

    /// Termwise antiderivative with zero constant term.
    pub fn integrate(&self) -> Series {
        let mut out = vec![0.0; self.len() + 1];
        for (k, &c) in self.0.iter().enumerate() {
            out[k + 1] = c / (k + 1) as f64;
        }
        Series(out)
    }

    /// `exp` of the series via `e' = s' e` (requires `s[0] = 0` handled by caller scaling).
    pub fn exp(&self) -> Series {
        let n = self.len();
        let mut out = vec![0.0; n];
        out[0] = self.0[0].exp();
        for k in 1..n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.0[j] * out[k - j];
            }
            out[k] = acc / k as f64;
        }
        Series(out)
    }

    /// Horner evaluation at a complex point.
    pub fn eval_complex(&self, u: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.0.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    /// Horner evaluation at a real point.
    pub fn eval(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.0.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_linear_series_is_exponential() {
        let mut c = vec![0.0; 24];
        c[1] = 1.0;
        let e = Series(c).exp();
        for (k, &v) in e.0.iter().enumerate() {
            let fact: f64 = (1..=k).map(|i| i as f64).product();
            assert!((v - 1.0 / fact).abs() < 1e-12);
        }
    }

    #[test]
    fn divide_against_geometric() {
        // 1 / (1 - u) = Σ u^k
        let num = Series(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let den = Series(vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
        let q = Series::divide(&num, &den);
        for &c in &q.0 {
            assert!((c - 1.0).abs() < 1e-14);
        }
    }
}
