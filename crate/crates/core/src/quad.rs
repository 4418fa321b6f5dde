//! Quadrature building blocks: Gauss-Legendre panel rules and the uniform
//! trapezoid weights used for frequency-space integrals.

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
///
/// Newton iteration on the Legendre recurrence; n up to a few hundred is fine.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x)
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// A fixed composite quadrature rule on a 1-D interval: concatenated
/// Gauss-Legendre panels. Nodes are strictly increasing.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PanelRule {
    /// Build a rule from explicit panel boundaries (strictly increasing) with
    /// `order` Gauss-Legendre points per panel.
    pub fn from_boundaries(boundaries: &[f64], order: usize) -> Self {
        assert!(boundaries.len() >= 2);
        let (gx, gw) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * (boundaries.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for win in boundaries.windows(2) {
            let (a, b) = (win[0], win[1]);
            assert!(b > a, "panel boundaries must be strictly increasing");
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(c + h * x);
                weights.push(h * w);
            }
        }
        PanelRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate a scalar function over the rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Geometric panel boundaries from `a` to `b` with ratio about `ratio`,
/// optionally splitting around marked radii so local features land on panel
/// edges rather than interiors. `must_include` values become exact boundaries.
pub fn graded_boundaries(a: f64, b: f64, ratio: f64, marks: &[f64], must_include: &[f64]) -> Vec<f64> {
    assert!(a > 0.0 && b > a && ratio > 1.0);
    let n = ((b / a).ln() / ratio.ln()).ceil().max(1.0) as usize;
    let q = (b / a).powf(1.0 / n as f64);
    let mut bs: Vec<f64> = (0..=n).map(|i| a * q.powi(i as i32)).collect();
    for &m in marks {
        for f in [0.80, 0.90, 0.97, 1.03, 1.10, 1.25] {
            let x = m * f;
            if x > a * 1.000001 && x < b * 0.999999 {
                bs.push(x);
            }
        }
    }
    for &x in must_include {
        if x > a * 1.000001 && x < b * 0.999999 {
            bs.push(x);
        }
    }
    bs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    bs.dedup_by(|x, y| (*x - *y).abs() < 1e-14 * y.abs());
    bs
}

/// Uniform trapezoid weights for a grid of `n` equispaced nodes with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl5_reference_nodes() {
        let (x, w) = gauss_legendre(5);
        // classical 5-point values
        assert_relative_eq!(x[4], 0.906_179_845_938_664, max_relative = 1e-12);
        assert_relative_eq!(w[2], 0.568_888_888_888_889, max_relative = 1e-12);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-13);
    }

    #[test]
    fn panels_integrate_polynomials_exactly() {
        let rule = PanelRule::from_boundaries(&[0.0, 0.3, 1.0, 2.0], 8);
        let val = rule.integrate(|x| 5.0 * x.powi(4));
        assert_relative_eq!(val, 32.0, max_relative = 1e-13);
    }

    #[test]
    fn graded_rule_handles_scale_separated_integrand() {
        // integral of sqrt(x) exp(-x) over (0, inf) = Gamma(3/2) = sqrt(pi)/2
        let bs = graded_boundaries(1e-14, 60.0, 1.8, &[], &[]);
        let rule = PanelRule::from_boundaries(&bs, 24);
        let val = rule.integrate(|x| x.sqrt() * (-x).exp());
        assert_relative_eq!(val, 0.5 * std::f64::consts::PI.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn trapezoid_gaussian_is_spectrally_accurate() {
        let n = 257;
        let h = 32.0 / (n - 1) as f64;
        let w = trapezoid_weights(n, h);
        let sum: f64 = (0..n)
            .map(|i| {
                let m = -16.0 + i as f64 * h;
                w[i] * (-0.5 * m * m).exp()
            })
            .sum();
        assert_relative_eq!(sum, (2.0 * std::f64::consts::PI).sqrt(), max_relative = 1e-12);
    }
}
