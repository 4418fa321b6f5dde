//! Two-variable first-order dual numbers over the complex field.
//!
//! `v + a e1 + b e2 + c e1 e2` with nilpotent units (`e1^2 = e2^2 = 0`)
//! propagates exact mixed first derivatives through arithmetic and `exp`,
//! which is how the solution map is differentiated in the residual checks:
//! a nilpotent step never subtracts nearly equal quantities, so there is no
//! step-size/cancellation trade-off.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual2 {
    pub v: Complex64,
    pub d1: Complex64,
    pub d2: Complex64,
    pub d12: Complex64,
}

#[allow(clippy::should_implement_trait)]
impl Dual2 {
    pub fn constant(v: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Dual2 { v, d1: z, d2: z, d12: z }
    }

    /// Seed the first variable: value v, d/dx1 = 1.
    pub fn var1(v: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Dual2 { v, d1: Complex64::new(1.0, 0.0), d2: z, d12: z }
    }

    /// Seed the second variable: value v, d/dx2 = 1.
    pub fn var2(v: Complex64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Dual2 { v, d1: z, d2: Complex64::new(1.0, 0.0), d12: z }
    }

    pub fn add(self, o: Dual2) -> Self {
        Dual2 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2, d12: self.d12 + o.d12 }
    }

    pub fn neg(self) -> Self {
        Dual2 { v: -self.v, d1: -self.d1, d2: -self.d2, d12: -self.d12 }
    }

    pub fn mul(self, o: Dual2) -> Self {
        Dual2 {
            v: self.v * o.v,
            d1: self.v * o.d1 + self.d1 * o.v,
            d2: self.v * o.d2 + self.d2 * o.v,
            d12: self.v * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.v,
        }
    }

    pub fn scale(self, c: Complex64) -> Self {
        Dual2 { v: self.v * c, d1: self.d1 * c, d2: self.d2 * c, d12: self.d12 * c }
    }

    pub fn recip(self) -> Self {
        let iv = Complex64::new(1.0, 0.0) / self.v;
        let iv2 = iv * iv;
        Dual2 {
            v: iv,
            d1: -self.d1 * iv2,
            d2: -self.d2 * iv2,
            d12: -self.d12 * iv2 + 2.0 * self.d1 * self.d2 * iv2 * iv,
        }
    }

    pub fn powu(self, n: u32) -> Self {
        let mut acc = Dual2::constant(Complex64::new(1.0, 0.0));
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        Dual2 {
            v: e,
            d1: e * self.d1,
            d2: e * self.d2,
            d12: e * (self.d12 + self.d1 * self.d2),
        }
    }
}
