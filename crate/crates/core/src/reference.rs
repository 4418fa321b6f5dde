//! The built-in test problem: a fully validated parameter set with one
//! lower-order coupling term, Gaussian frequency profiles, and a linear
//! Borel-plane forcing.
//!
//! Orders: k1 = 2, k2 = 5, k' = 3, lambda1 = 4, lambda2 = 2, mu2 = 3,
//! delta_D1 = delta_D2 = 1, so the merged denominator has 7 roots of modulus
//! (|Q|/10)^{1/7} and the two flatness orders are 8 and 10.

use crate::poly::Poly;
use crate::spec::{
    Annulus, CoeffProfile, CoefficientFamily, ForcingProfile, ForcingSpec, ProblemSpec,
};
use num_complex::Complex64;

/// Peak of (1+|m|)^mu e^{beta |m|} e^{-m^2/(2 w^2)} for mu = 3, beta = w = 1;
/// attained at m = 2 with value 27.
const GAUSSIAN_WEIGHT_PEAK: f64 = 27.0;

pub fn reference_spec() -> ProblemSpec {
    ProblemSpec {
        k1: 2,
        k2: 5,
        k_prime: 3,
        d1: 2,
        d2: 2,
        lambda1: 4,
        lambda2: 2,
        mu2: 3,
        delta_d1: 1,
        delta_d2: 1,
        delta_l1: vec![0],
        delta_l2: vec![0],
        delta_exp_top: 18,
        delta_exp: vec![vec![1]],
        q_poly: Poly::constant(2.0),
        r_d1d2: Poly::constant(1.0),
        r_lower: vec![vec![Poly::constant(1.0)]],
        beta: 1.0,
        mu: 3.0,
        nu: 0.1,
        epsilon0: 0.25,
        annulus: Annulus {
            r1: 1.0,
            r2: 4.0,
            alpha: -std::f64::consts::FRAC_PI_8,
            beta_angle: std::f64::consts::FRAC_PI_8,
        },
        rho_disc: 0.35,
    }
}

/// Coupling coefficients C_11(m, eps) with amplitude `c` and certified bound.
pub fn reference_coefficients(c: f64) -> CoefficientFamily {
    let eps_slope = 0.3;
    CoefficientFamily {
        profiles: vec![vec![CoeffProfile::Gaussian { amplitude: c, width: 1.0, eps_slope }]],
        bounds: vec![vec![c * (1.0 + eps_slope) * GAUSSIAN_WEIGHT_PEAK * 1.0000001]],
    }
}

/// Linear-in-tau forcing with amplitude `c_f` and certified bound constant.
pub fn reference_forcing(c_f: f64) -> ForcingSpec {
    let eps_slope = 0.2;
    ForcingSpec {
        profile: ForcingProfile::LinearGaussian { amplitude: c_f, width: 1.0, eps_slope },
        c_psi: c_f * (1.0 + eps_slope) * GAUSSIAN_WEIGHT_PEAK * 1.0000001,
        nu_f: 0.0,
    }
}

/// A forcing with genuine exponential growth of order k' in the Borel plane,
/// used where the tail-control machinery should be exercised.
pub fn growing_forcing(c_f: f64, nu0: f64) -> ForcingSpec {
    ForcingSpec {
        profile: ForcingProfile::ExpGaussian { amplitude: c_f, width: 1.0, nu0 },
        c_psi: c_f * GAUSSIAN_WEIGHT_PEAK * 1.0000001,
        nu_f: nu0,
    }
}

/// A spec variant whose ratio Q/R sweeps a genuine arc of the annulus, for
/// root-locus tests with m-dependent root arguments.
pub fn swept_ratio_spec() -> ProblemSpec {
    let mut spec = reference_spec();
    // Q(im) = 2 + 0.05 i m, R(im) = 1 + 0.002 m^2: the ratio keeps modulus in
    // [1.6, 2.1] and argument within +-17 degrees on |m| <= 12
    spec.q_poly = Poly::new(vec![Complex64::new(2.0, 0.0), Complex64::new(0.05, 0.0)]);
    spec.r_d1d2 = Poly::new(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(-0.002, 0.0),
    ]);
    spec
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::FrequencyGrid;
    use crate::spec::validate_spec;

    #[test]
    fn swept_ratio_spec_stays_in_annulus() {
        let spec = swept_ratio_spec();
        let grid = FrequencyGrid::symmetric(12.0, 48);
        let report = validate_spec(&spec, &grid).unwrap();
        assert!(report.all_pass(), "failures: {:?}", report.failed());
    }
}
