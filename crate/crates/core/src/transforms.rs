//! The transform layer: coefficientwise Borel transform, ray-quadrature
//! Laplace transform, inverse Fourier transform on the weighted frequency
//! space, and frequency convolution.

use crate::error::{Error, Result};
use crate::gamma::gamma;
use crate::geometry::normalize_angle;
use crate::grids::{FrequencyGrid, RayGrid, TruncatedSeries};
use num_complex::Complex64;

/// Value of a quadrature together with its reported error budget.
#[derive(Debug, Clone, Copy)]
pub struct QuadValue {
    pub value: Complex64,
    /// bound on the discarded tails (upper truncation + untreated (0, r_min])
    pub tail_estimate: f64,
    /// rounding/discretization allowance for the retained sum
    pub disc_estimate: f64,
}

impl QuadValue {
    pub fn budget(&self) -> f64 {
        self.tail_estimate + self.disc_estimate
    }

    /// Truncation warning when the reported budget exceeds a requested tolerance.
    pub fn tail_warning(&self, tol: f64) -> Option<String> {
        if self.budget() > tol {
            Some(format!(
                "estimated tail {:.3e} + discretization {:.3e} exceeds requested tolerance {tol:.3e}",
                self.tail_estimate, self.disc_estimate
            ))
        } else {
            None
        }
    }
}

/// Coefficientwise Borel transform of order k: divides coefficient n by Gamma(n/k).
pub fn formal_borel_mk(series: &TruncatedSeries, k: u32) -> TruncatedSeries {
    assert!(k >= 1);
    let coeffs = series
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, &c)| c / gamma((idx + 1) as f64 / k as f64))
        .collect();
    TruncatedSeries::new(coeffs)
}

/// Pick a truncation radius R so that the damping exceeds any kernel growth
/// by ~40 e-folds: delta1 (R/|t|)^k - nu R^{k'} >= 40.
pub fn suggest_r_max(k: u32, t_abs: f64, delta1: f64, nu: f64, k_prime: u32) -> f64 {
    let plain = t_abs * (40.0 / delta1).powf(1.0 / k as f64);
    if nu <= 0.0 {
        return plain;
    }
    let g = |r: f64| delta1 * (r / t_abs).powi(k as i32) - nu * r.powi(k_prime as i32) - 40.0;
    // search upward from the growth-free radius
    let mut lo = plain;
    let mut hi = plain;
    for _ in 0..200 {
        if g(hi) > 0.0 {
            break;
        }
        lo = hi;
        hi *= 1.5;
    }
    if g(hi) <= 0.0 {
        // damping never wins (k <= k' with growth); fall back to the plain radius
        return plain;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Ray-quadrature Laplace transform of order k in the grid's direction:
/// k * integral over L_xi of f(u) exp(-(u/t)^k) du/u.
///
/// The path must be admissible: cos(k (xi - arg t)) >= delta1.
pub fn laplace_mk_ray(
    grid: &RayGrid,
    f: impl Fn(Complex64) -> Complex64,
    k: u32,
    t: Complex64,
    delta1: f64,
) -> Result<QuadValue> {
    let cosine = (k as f64 * normalize_angle(grid.direction - t.arg())).cos();
    if cosine < delta1 {
        return Err(Error::InadmissibleDirection { k, cosine, delta1 });
    }
    let phase = Complex64::from_polar(1.0, grid.direction);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut last_g = 0.0;
    let mut first_g = 0.0;
    for (i, (&r, &w)) in grid.rule.nodes.iter().zip(&grid.rule.weights).enumerate() {
        let u = phase * r;
        let kernel = (-(u / t).powu(k)).exp();
        let g = f(u) * kernel / r;
        acc += g * w;
        abs_sum += g.norm() * w;
        if i == 0 {
            first_g = g.norm();
        }
        last_g = g.norm();
    }
    let value = acc * k as f64;
    // decay length of exp(-c (r/|t|)^k) at the outer truncation radius
    let r_n = grid.r_max;
    let decay_length = t.norm().powi(k as i32) / (k as f64 * cosine * r_n.powi(k as i32 - 1));
    let tail_upper = k as f64 * last_g * decay_length;
    let tail_lower = k as f64 * first_g * grid.r_min;
    Ok(QuadValue {
        value,
        tail_estimate: tail_upper + tail_lower,
        disc_estimate: 5e-14 * k as f64 * abs_sum,
    })
}

/// Inverse Fourier transform of grid values at a strip point z:
/// (1/sqrt(2 pi)) * integral f(m) e^{izm} dm by the trapezoid rule.
pub fn inverse_fourier(
    grid: &FrequencyGrid,
    values: &[Complex64],
    z: Complex64,
    beta: f64,
) -> Result<QuadValue> {
    if values.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if z.im.abs() >= beta {
        return Err(Error::StripViolation { imz: z.im.abs(), beta });
    }
    let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    for ((&m, &w), &v) in grid.nodes.iter().zip(&grid.weights).zip(values) {
        let ker = (Complex64::new(0.0, 1.0) * z * m).exp();
        acc += v * ker * w;
        abs_sum += v.norm() * ker.norm() * w;
    }
    // boundary values set the prefactor; decay rate beta assumed beyond the cutoff
    let edge = values[0].norm().max(values[grid.len() - 1].norm());
    let margin = beta - z.im.abs();
    let tail = 2.0 * norm * edge * (z.im.abs() * grid.cutoff).exp() / margin;
    Ok(QuadValue {
        value: acc * norm,
        tail_estimate: tail,
        disc_estimate: 5e-14 * norm * abs_sum,
    })
}

/// Linear interpolation of grid values at x, exact at the nodes; zero outside
/// the cutoff (the tail of the weighted space).
pub fn interp_linear(grid: &FrequencyGrid, values: &[Complex64], x: f64) -> Complex64 {
    if x < grid.nodes[0] || x > grid.nodes[grid.len() - 1] {
        return Complex64::new(0.0, 0.0);
    }
    let pos = (x - grid.nodes[0]) / grid.spacing;
    let i = (pos.floor() as usize).min(grid.len() - 2);
    let frac = pos - i as f64;
    if frac.abs() < 1e-12 {
        return values[i];
    }
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Frequency convolution psi(m) = (1/sqrt(2 pi)) * integral f(m - m1) g(m1) dm1
/// on a shared grid; f is linearly interpolated at off-grid arguments.
pub fn convolve_frequency(
    grid_f: &FrequencyGrid,
    f: &[Complex64],
    grid_g: &FrequencyGrid,
    g: &[Complex64],
) -> Result<Vec<Complex64>> {
    if !grid_f.same_as(grid_g) || f.len() != grid_f.len() || g.len() != grid_g.len() {
        return Err(Error::GridMismatch);
    }
    let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
    let grid = grid_f;
    let out = grid
        .nodes
        .iter()
        .map(|&m| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((&m1, &w), &gv) in grid.nodes.iter().zip(&grid.weights).zip(g) {
                acc += interp_linear(grid, f, m - m1) * gv * w;
            }
            acc * norm
        })
        .collect();
    Ok(out)
}
