//! Problem data for the two-time singularly perturbed equation and the
//! hypothesis checks imposed on it.

use crate::error::{Error, Result};
use crate::grids::FrequencyGrid;
use crate::poly::Poly;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Sectorial annulus r1 <= |z| <= r2, arg(z) in (alpha, beta_angle).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Annulus {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub beta_angle: f64,
}

impl Annulus {
    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        let a = z.arg();
        r >= self.r1 && r <= self.r2 && a > self.alpha && a < self.beta_angle
    }
}

/// All discrete and continuous parameters of the main equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub k1: u32,
    pub k2: u32,
    pub k_prime: u32,
    pub d1: usize,
    pub d2: usize,
    pub lambda1: u32,
    pub lambda2: u32,
    pub mu2: u32,
    pub delta_d1: u32,
    pub delta_d2: u32,
    /// delta_{l1} for l1 = 1..D1-1
    pub delta_l1: Vec<u32>,
    /// delta_{l2} for l2 = 1..D2-1
    pub delta_l2: Vec<u32>,
    /// Delta_{D1 D2}, the epsilon power on the leading operator
    pub delta_exp_top: u32,
    /// Delta_{l1 l2} for the lower pairs, indexed [l1-1][l2-1]
    pub delta_exp: Vec<Vec<u32>>,
    pub q_poly: Poly,
    pub r_d1d2: Poly,
    /// R_{l1 l2}, indexed [l1-1][l2-1]
    pub r_lower: Vec<Vec<Poly>>,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
    pub epsilon0: f64,
    pub annulus: Annulus,
    /// Requested Borel-plane disc radius rho
    pub rho_disc: f64,
}

impl ProblemSpec {
    pub fn lambda1k1(&self) -> u32 {
        self.lambda1 * self.k1
    }

    pub fn lambda2k2(&self) -> u32 {
        self.lambda2 * self.k2
    }

    /// Root count k1*delta_D1 + k2*delta_D2 of the merged denominator polynomial.
    pub fn root_count(&self) -> u32 {
        self.k1 * self.delta_d1 + self.k2 * self.delta_d2
    }

    /// k1^{delta_D1} * k2^{delta_D2}
    pub fn leading_factor(&self) -> f64 {
        (self.k1 as f64).powi(self.delta_d1 as i32) * (self.k2 as f64).powi(self.delta_d2 as i32)
    }

    /// Iterate lower index pairs (l1, l2) with 1-based values.
    pub fn lower_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let d1 = self.d1;
        let d2 = self.d2;
        (1..d1).flat_map(move |l1| (1..d2).map(move |l2| (l1, l2)))
    }

    pub fn max_lower_degree(&self) -> usize {
        self.r_lower
            .iter()
            .flat_map(|row| row.iter().map(|p| p.degree()))
            .max()
            .unwrap_or(0)
    }
}

/// One validated hypothesis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRow {
    pub check_name: String,
    pub pass: bool,
    pub detail: String,
}

/// Outcome of `validate_spec`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<CheckRow>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failed(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    fn push(&mut self, name: &str, pass: bool, detail: String) {
        self.rows.push(CheckRow { check_name: name.to_string(), pass, detail });
    }
}

/// Check every hypothesis on the problem data. The annulus condition is
/// evaluated on the supplied frequency grid; a vanishing leading polynomial
/// at a grid node is a hard error.
pub fn validate_spec(spec: &ProblemSpec, m_grid: &FrequencyGrid) -> Result<ValidationReport> {
    if m_grid.is_empty() {
        return Err(Error::Validation("empty frequency grid".into()));
    }
    m_grid.validate()?;
    let mut report = ValidationReport { rows: Vec::new() };

    report.push(
        "orders_k1_lt_k2",
        spec.k1 >= 1 && spec.k1 < spec.k2,
        format!("k1 = {}, k2 = {}", spec.k1, spec.k2),
    );
    report.push(
        "kprime_strictly_between",
        spec.k_prime > spec.k1 && spec.k_prime < spec.k2,
        format!("k' = {} must satisfy {} < k' < {}", spec.k_prime, spec.k1, spec.k2),
    );
    report.push(
        "dimensions_at_least_two",
        spec.d1 >= 2 && spec.d2 >= 2,
        format!("D1 = {}, D2 = {}", spec.d1, spec.d2),
    );
    report.push(
        "mu2_exceeds_lambda2",
        spec.mu2 > spec.lambda2,
        format!("mu2 = {}, lambda2 = {}", spec.mu2, spec.lambda2),
    );

    // leading epsilon power ties to the dilation weights
    let expected_top = spec.lambda1k1() * spec.delta_d1 + spec.lambda2k2() * spec.delta_d2;
    report.push(
        "leading_epsilon_power",
        spec.delta_exp_top == expected_top,
        format!("Delta_D1D2 = {}, lambda1 k1 dD1 + lambda2 k2 dD2 = {expected_top}", spec.delta_exp_top),
    );
    report.push(
        "weight_ordering",
        spec.lambda2k2() > spec.lambda1k1(),
        format!("lambda2 k2 = {}, lambda1 k1 = {}", spec.lambda2k2(), spec.lambda1k1()),
    );

    // lower-order operators: strict epsilon dominance and derivative ordering
    let mut lower_ok = true;
    let mut lower_detail = String::new();
    for (l1, l2) in spec.lower_pairs() {
        let delta = spec.delta_exp[l1 - 1][l2 - 1];
        let floor = spec.lambda1k1() * spec.delta_l1[l1 - 1] + spec.lambda2k2() * spec.delta_l2[l2 - 1];
        let ord = spec.k1 * spec.delta_d1 + spec.k2 * spec.delta_d2
            >= spec.k1 * spec.delta_l1[l1 - 1] + spec.k2 * spec.delta_l2[l2 - 1];
        if delta <= floor || !ord {
            lower_ok = false;
            lower_detail = format!("pair ({l1},{l2}): Delta = {delta}, floor = {floor}, ordering = {ord}");
            break;
        }
    }
    report.push(
        "lower_order_dominance",
        lower_ok,
        if lower_ok { "strict epsilon dominance and derivative ordering hold".into() } else { lower_detail },
    );

    // degree comparison
    let deg_top = spec.r_d1d2.degree();
    let deg_ok = spec.lower_pairs().all(|(l1, l2)| spec.r_lower[l1 - 1][l2 - 1].degree() <= deg_top);
    report.push(
        "lower_degrees_bounded",
        deg_ok,
        format!("deg R_D1D2 = {deg_top}, max lower = {}", spec.max_lower_degree()),
    );

    report.push(
        "mu_exceeds_one_plus_degree",
        spec.mu > 1.0 + spec.max_lower_degree() as f64,
        format!("mu = {}, 1 + max deg = {}", spec.mu, 1 + spec.max_lower_degree()),
    );

    // annulus membership of Q(im)/R_D1D2(im) across the grid
    let mut min_mod = f64::INFINITY;
    let mut max_mod: f64 = 0.0;
    let mut min_arg = f64::INFINITY;
    let mut max_arg = f64::NEG_INFINITY;
    let mut inside = true;
    for &m in &m_grid.nodes {
        let r = spec.r_d1d2.eval_im(m);
        if r.norm() == 0.0 {
            return Err(Error::PolynomialEvaluation { m });
        }
        let ratio = spec.q_poly.eval_im(m) / r;
        min_mod = min_mod.min(ratio.norm());
        max_mod = max_mod.max(ratio.norm());
        min_arg = min_arg.min(ratio.arg());
        max_arg = max_arg.max(ratio.arg());
        if !spec.annulus.contains(ratio) {
            inside = false;
        }
    }
    report.push(
        "ratio_in_sectorial_annulus",
        inside,
        format!(
            "|Q/R| in [{min_mod:.6}, {max_mod:.6}], arg in [{min_arg:.6}, {max_arg:.6}]; annulus [{}, {}] x ({}, {})",
            spec.annulus.r1, spec.annulus.r2, spec.annulus.alpha, spec.annulus.beta_angle
        ),
    );

    report.push(
        "leading_poly_nonvanishing",
        true,
        "R_D1D2(im) nonzero at every grid node".into(),
    );

    // inner-rescaling exponent inequality
    let lhs = spec.lambda1k1() as f64;
    let rhs = (spec.mu2 - spec.lambda2) as f64 / (1.0 / spec.k_prime as f64 - 1.0 / spec.k2 as f64);
    report.push(
        "inner_rescaling_margin",
        lhs > rhs,
        format!("lambda1 k1 = {lhs}, (mu2 - lambda2)/(1/k' - 1/k2) = {rhs:.6}"),
    );

    report.push(
        "positive_continuous_parameters",
        spec.beta > 0.0 && spec.mu > 1.0 && spec.nu > 0.0 && spec.epsilon0 > 0.0 && spec.rho_disc > 0.0,
        format!(
            "beta = {}, mu = {}, nu = {}, eps0 = {}, rho = {}",
            spec.beta, spec.mu, spec.nu, spec.epsilon0, spec.rho_disc
        ),
    );

    Ok(report)
}

/// Frequency-side coefficient profile, analytic in eps on the eps0 disc.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CoeffProfile {
    Zero,
    /// amplitude * exp(-m^2 / (2 width^2)) * (1 + eps_slope * eps / eps0)
    Gaussian { amplitude: f64, width: f64, eps_slope: f64 },
}

impl CoeffProfile {
    pub fn eval(&self, m: f64, eps: Complex64, eps0: f64) -> Complex64 {
        match self {
            CoeffProfile::Zero => Complex64::new(0.0, 0.0),
            CoeffProfile::Gaussian { amplitude, width, eps_slope } => {
                let radial = (-0.5 * (m / width) * (m / width)).exp();
                (Complex64::new(1.0, 0.0) + eps * (*eps_slope / eps0)) * (*amplitude * radial)
            }
        }
    }
}

/// The convolution coefficients C_{l1 l2}(m, eps) and their certified bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientFamily {
    /// indexed [l1-1][l2-1]
    pub profiles: Vec<Vec<CoeffProfile>>,
    /// certified bound constants, same indexing
    pub bounds: Vec<Vec<f64>>,
}

impl CoefficientFamily {
    pub fn eval(&self, l1: usize, l2: usize, m: f64, eps: Complex64, eps0: f64) -> Complex64 {
        self.profiles[l1 - 1][l2 - 1].eval(m, eps, eps0)
    }

    /// Check (1+|m|)^mu e^{beta |m|} |C(m, eps)| <= bound on sampled (m, eps).
    pub fn check_bounds(&self, spec: &ProblemSpec, m_grid: &FrequencyGrid) -> Result<()> {
        let eps_samples = [
            Complex64::new(0.95 * spec.epsilon0, 0.0),
            Complex64::new(0.0, 0.9 * spec.epsilon0),
            Complex64::new(-0.6 * spec.epsilon0, 0.5 * spec.epsilon0),
            Complex64::new(0.0, 0.0),
        ];
        for (l1, l2) in spec.lower_pairs() {
            let bound = self.bounds[l1 - 1][l2 - 1];
            for &m in &m_grid.nodes {
                let w = (1.0 + m.abs()).powf(spec.mu) * (spec.beta * m.abs()).exp();
                for &eps in &eps_samples {
                    let v = self.eval(l1, l2, m, eps, spec.epsilon0).norm();
                    if w * v > bound * (1.0 + 1e-12) {
                        return Err(Error::Validation(format!(
                            "coefficient bound violated for pair ({l1},{l2}) at m = {m}: {} > {bound}",
                            w * v
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Forcing profile in the Borel plane, entire in tau.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ForcingProfile {
    /// amplitude * tau * exp(-m^2/(2 width^2)) * (1 + eps_slope * eps / eps0)
    LinearGaussian { amplitude: f64, width: f64, eps_slope: f64 },
    /// amplitude * tau * exp(nu0 * tau^{kprime}) * exp(-m^2/(2 width^2))
    ExpGaussian { amplitude: f64, width: f64, nu0: f64 },
}

/// The Borel-plane forcing together with the constants of its certified bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcingSpec {
    pub profile: ForcingProfile,
    /// bound constant C_psi
    pub c_psi: f64,
    /// growth rate used in the bound (must not exceed the space's nu)
    pub nu_f: f64,
}

impl ForcingSpec {
    pub fn eval(&self, tau: Complex64, m: f64, eps: Complex64, spec: &ProblemSpec) -> Complex64 {
        match &self.profile {
            ForcingProfile::LinearGaussian { amplitude, width, eps_slope } => {
                let radial = (-0.5 * (m / width) * (m / width)).exp();
                tau * (Complex64::new(1.0, 0.0) + eps * (*eps_slope / spec.epsilon0)) * (*amplitude * radial)
            }
            ForcingProfile::ExpGaussian { amplitude, width, nu0 } => {
                let radial = (-0.5 * (m / width) * (m / width)).exp();
                let growth = (tau.powu(spec.k_prime) * *nu0).exp();
                tau * growth * (*amplitude * radial)
            }
        }
    }

    /// Check |psi| <= C_psi (1+|m|)^{-mu} e^{-beta|m|} e^{nu |tau|^{k'}} |tau| on samples.
    pub fn check_bound(&self, spec: &ProblemSpec, m_grid: &FrequencyGrid, tau_samples: &[Complex64]) -> Result<()> {
        let eps_samples = [
            Complex64::new(0.9 * spec.epsilon0, 0.0),
            Complex64::new(0.0, 0.8 * spec.epsilon0),
            Complex64::new(0.0, 0.0),
        ];
        for &tau in tau_samples {
            if tau.norm() == 0.0 {
                continue;
            }
            for &m in &m_grid.nodes {
                let envelope = self.c_psi
                    * (1.0 + m.abs()).powf(-spec.mu)
                    * (-spec.beta * m.abs()).exp()
                    * (spec.nu * tau.norm().powi(spec.k_prime as i32)).exp()
                    * tau.norm();
                for &eps in &eps_samples {
                    let v = self.eval(tau, m, eps, spec).norm();
                    if v > envelope * (1.0 + 1e-12) {
                        return Err(Error::Validation(format!(
                            "forcing bound violated at tau = {tau}, m = {m}: {v} > {envelope}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    #[test]
    fn reference_spec_passes_all_checks() {
        let spec = reference::reference_spec();
        let grid = FrequencyGrid::symmetric(16.0, 64);
        let report = validate_spec(&spec, &grid).unwrap();
        assert!(report.all_pass(), "failures: {:?}", report.failed());
    }

    #[test]
    fn lambda1_one_fails_inner_margin() {
        // lambda1 = 1 gives lambda1 k1 = 2 < (mu2 - lambda2)/(1/k' - 1/k2) = 7.5
        let mut spec = reference::reference_spec();
        spec.lambda1 = 1;
        spec.delta_exp_top = spec.lambda1k1() * spec.delta_d1 + spec.lambda2k2() * spec.delta_d2;
        let grid = FrequencyGrid::symmetric(16.0, 64);
        let report = validate_spec(&spec, &grid).unwrap();
        let row = report.rows.iter().find(|r| r.check_name == "inner_rescaling_margin").unwrap();
        assert!(!row.pass);
    }

    #[test]
    fn wrong_top_power_fails_equality() {
        let mut spec = reference::reference_spec();
        spec.delta_exp_top = 17;
        let grid = FrequencyGrid::symmetric(16.0, 64);
        let report = validate_spec(&spec, &grid).unwrap();
        let row = report.rows.iter().find(|r| r.check_name == "leading_epsilon_power").unwrap();
        assert!(!row.pass);
    }

    #[test]
    fn vanishing_leading_polynomial_is_an_error() {
        let mut spec = reference::reference_spec();
        // R(X) = X vanishes at m = 0
        spec.r_d1d2 = Poly::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        let grid = FrequencyGrid::symmetric(16.0, 64);
        match validate_spec(&spec, &grid) {
            Err(Error::PolynomialEvaluation { m }) => assert!(m.abs() < 1e-12),
            other => panic!("expected polynomial evaluation failure, got {other:?}"),
        }
    }

    #[test]
    fn validation_is_pure() {
        let spec = reference::reference_spec();
        let grid = FrequencyGrid::symmetric(16.0, 64);
        let a = validate_spec(&spec, &grid).unwrap();
        let b = validate_spec(&spec, &grid).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.pass, y.pass);
            assert_eq!(x.detail, y.detail);
        }
    }

    #[test]
    fn reference_coefficient_and_forcing_bounds_hold() {
        let spec = reference::reference_spec();
        let grid = FrequencyGrid::symmetric(16.0, 64);
        let coeffs = reference::reference_coefficients(0.01);
        coeffs.check_bounds(&spec, &grid).unwrap();
        let forcing = reference::reference_forcing(0.05);
        let taus: Vec<Complex64> = (1..20)
            .map(|i| Complex64::from_polar(0.05 * i as f64, 0.3 * i as f64))
            .collect();
        forcing.check_bound(&spec, &grid, &taus).unwrap();
    }
}
