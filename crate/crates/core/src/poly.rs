//! Polynomials with complex coefficients, constant term first.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly {
    /// coeffs[j] multiplies X^j
    pub coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![Complex64::new(c, 0.0)] }
    }

    /// Degree ignoring trailing zero coefficients; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| c.norm() > 0.0)
            .unwrap_or(0)
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, x: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// Evaluate at i*m, the form every frequency-side symbol uses.
    pub fn eval_im(&self, m: f64) -> Complex64 {
        self.eval(Complex64::new(0.0, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_degree() {
        let p = Poly::new(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(3.0, 0.0),
        ]);
        assert_eq!(p.degree(), 2);
        let v = p.eval(Complex64::new(1.0, 1.0));
        // 1 + 2i(1+i) + 3(1+i)^2 = 1 + 2i - 2 + 3*2i = -1 + 8i
        assert!((v - Complex64::new(-1.0, 8.0)).norm() < 1e-14);
    }

    #[test]
    fn trailing_zeros_do_not_raise_degree() {
        let p = Poly::new(vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)]);
        assert_eq!(p.degree(), 0);
    }
}
