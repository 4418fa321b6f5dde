//! Complex values carried as mantissa * exp(ln_scale), for integrals whose
//! magnitudes leave the f64 range (deep exponential-flatness measurements).

use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct ScaledComplex {
    /// mantissa, kept with norm in roughly [1e-8, 1e8] when normalized
    pub mantissa: Complex64,
    /// natural log of the carried scale factor
    pub ln_scale: f64,
}

impl ScaledComplex {
    pub fn zero() -> Self {
        ScaledComplex { mantissa: Complex64::new(0.0, 0.0), ln_scale: f64::NEG_INFINITY }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z.norm() == 0.0 {
            return Self::zero();
        }
        let ln = z.norm().ln();
        ScaledComplex { mantissa: z * (-ln).exp(), ln_scale: ln }
    }

    /// value = phase_part * exp(ln_mag); phase_part need not be unit length.
    pub fn from_parts(phase_part: Complex64, ln_mag: f64) -> Self {
        if phase_part.norm() == 0.0 || ln_mag == f64::NEG_INFINITY {
            return Self::zero();
        }
        ScaledComplex { mantissa: phase_part, ln_scale: ln_mag }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.norm() == 0.0 || self.ln_scale == f64::NEG_INFINITY
    }

    /// ln |value|
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.ln_scale + self.mantissa.norm().ln()
        }
    }

    /// Collapse to a plain complex; underflows to 0 and overflows to inf as f64 does.
    pub fn to_complex(&self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.mantissa * self.ln_scale.exp()
    }

    pub fn scale_by(&self, c: Complex64) -> Self {
        if c.norm() == 0.0 || self.is_zero() {
            return Self::zero();
        }
        ScaledComplex { mantissa: self.mantissa * c, ln_scale: self.ln_scale }.normalized()
    }

    pub fn mul_exp(&self, ln_factor: f64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        ScaledComplex { mantissa: self.mantissa, ln_scale: self.ln_scale + ln_factor }
    }

    pub fn add(&self, other: &ScaledComplex) -> Self {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.ln_scale >= other.ln_scale { (self, other) } else { (other, self) };
        let shift = (lo.ln_scale - hi.ln_scale).exp(); // <= 1
        ScaledComplex { mantissa: hi.mantissa + lo.mantissa * shift, ln_scale: hi.ln_scale }.normalized()
    }

    pub fn sub(&self, other: &ScaledComplex) -> Self {
        self.add(&other.scale_by(Complex64::new(-1.0, 0.0)))
    }

    fn normalized(self) -> Self {
        let n = self.mantissa.norm();
        if n == 0.0 {
            return Self::zero();
        }
        if (1e-8..=1e8).contains(&n) {
            return self;
        }
        let ln = n.ln();
        ScaledComplex { mantissa: self.mantissa / n, ln_scale: self.ln_scale + ln }
    }
}

/// Sum a list of scaled values stably (factor out the max scale).
pub fn scaled_sum(values: &[ScaledComplex]) -> ScaledComplex {
    let max_ln = values
        .iter()
        .filter(|v| !v.is_zero())
        .map(|v| v.ln_abs())
        .fold(f64::NEG_INFINITY, f64::max);
    if max_ln == f64::NEG_INFINITY {
        return ScaledComplex::zero();
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for v in values {
        if !v.is_zero() {
            acc += v.mantissa * (v.ln_scale - max_ln).exp();
        }
    }
    ScaledComplex::from_parts(acc, max_ln)
}
