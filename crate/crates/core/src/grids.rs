//! Discretizations: the frequency grid on the real line, radial ray grids in
//! the Borel plane, and truncated power series.

use crate::error::{Error, Result};
use crate::quad::{graded_boundaries, trapezoid_weights, PanelRule};
use num_complex::Complex64;

/// Truncated power series f_1 t + ... + f_N t^N (no constant term).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    /// coeffs[n-1] multiplies t^n
    pub coeffs: Vec<Complex64>,
}

impl TruncatedSeries {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "truncation order must be at least 1");
        TruncatedSeries { coeffs }
    }

    pub fn zeros(n: usize) -> Self {
        TruncatedSeries::new(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, n: usize) -> Complex64 {
        assert!(n >= 1);
        self.coeffs.get(n - 1).copied().unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, t: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = (acc + c) * t;
        }
        acc
    }

    /// The series of t^{k+1} d/dt applied to this series:
    /// t^{k+1} d/dt (f_n t^n) = n f_n t^{n+k}.
    pub fn t_pow_kp1_dt(&self, k: usize) -> TruncatedSeries {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + k];
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let n = idx + 1;
            out[n + k - 1] = c * n as f64;
        }
        TruncatedSeries::new(out)
    }

    /// Multiply by c * t^k.
    pub fn shift_mul(&self, k: usize, c: Complex64) -> TruncatedSeries {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + k];
        for (idx, &v) in self.coeffs.iter().enumerate() {
            out[idx + k] = v * c;
        }
        TruncatedSeries::new(out)
    }
}

/// Uniform symmetric grid in the Fourier variable m.
#[derive(Debug, Clone)]
pub struct FrequencyGrid {
    pub nodes: Vec<f64>,
    pub spacing: f64,
    pub cutoff: f64,
    pub weights: Vec<f64>,
}

impl FrequencyGrid {
    /// Symmetric grid with `2*half + 1` nodes spanning [-cutoff, cutoff].
    pub fn symmetric(cutoff: f64, half: usize) -> Self {
        assert!(cutoff > 0.0 && half >= 1);
        let n = 2 * half + 1;
        let h = cutoff / half as f64;
        let nodes: Vec<f64> = (0..n).map(|i| -cutoff + i as f64 * h).collect();
        let weights = trapezoid_weights(n, h);
        FrequencyGrid { nodes, spacing: h, cutoff, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Validate symmetry and uniformity to relative tolerance 1e-12.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < 3 || n % 2 == 0 {
            return Err(Error::Validation("frequency grid must have an odd node count >= 3".into()));
        }
        for i in 0..n {
            let sym = self.nodes[i] + self.nodes[n - 1 - i];
            if sym.abs() > 1e-12 * self.cutoff.max(1.0) {
                return Err(Error::Validation(format!("grid not symmetric at index {i}")));
            }
            if i + 1 < n {
                let d = self.nodes[i + 1] - self.nodes[i];
                if ((d - self.spacing) / self.spacing).abs() > 1e-12 {
                    return Err(Error::Validation(format!("grid spacing not uniform at index {i}")));
                }
            }
        }
        Ok(())
    }

    pub fn same_as(&self, other: &FrequencyGrid) -> bool {
        self.len() == other.len()
            && (self.cutoff - other.cutoff).abs() <= 1e-12 * self.cutoff
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
    }
}

/// Radial quadrature grid along one ray of direction `xi`: graded
/// Gauss-Legendre panels from r_min to r_max, denser near the origin.
#[derive(Debug, Clone)]
pub struct RayGrid {
    pub direction: f64,
    pub rule: PanelRule,
    pub r_min: f64,
    pub r_max: f64,
}

impl RayGrid {
    /// Build a graded grid. `marks` are radii (root moduli) where panels are
    /// refined so nearby integrand structure stays resolved.
    pub fn graded(direction: f64, r_min: f64, r_max: f64, ratio: f64, order: usize, marks: &[f64]) -> Self {
        Self::graded_with_splits(direction, r_min, r_max, ratio, order, marks, &[])
    }

    /// Like `graded`, with exact extra panel boundaries (e.g. at rho/2 so the
    /// outer-path subrange starts on a panel edge).
    pub fn graded_with_splits(
        direction: f64,
        r_min: f64,
        r_max: f64,
        ratio: f64,
        order: usize,
        marks: &[f64],
        must_include: &[f64],
    ) -> Self {
        let bs = graded_boundaries(r_min, r_max, ratio, marks, must_include);
        let rule = PanelRule::from_boundaries(&bs, order);
        RayGrid { direction, rule, r_min, r_max }
    }

    pub fn radii(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    /// Complex point of node i.
    pub fn point(&self, i: usize) -> Complex64 {
        Complex64::from_polar(self.rule.nodes[i], self.direction)
    }

    /// Index of the first node with radius >= r.
    pub fn first_node_at_or_above(&self, r: f64) -> usize {
        self.rule.nodes.partition_point(|&x| x < r)
    }
}
