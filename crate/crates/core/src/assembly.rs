//! Assembly of the time-domain solutions: the merged Laplace kernel, the
//! forcing integral, per-tuple direction selection, sector geometry planning,
//! inner/outer solution samples, and the deformed-path difference of two
//! consecutive solutions.

use crate::borel::{
    exp_norm, fixed_point_solve, root_gaps, root_set, ArcGrid, GridFunction, StartGuess, TauGrid,
};
use crate::dual::Dual2;
use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, AngleWindows, GoodCovering, Sector};
use crate::grids::{FrequencyGrid, RayGrid};
use crate::scaled::{scaled_sum, ScaledComplex};
use crate::spec::{CoefficientFamily, ForcingSpec, ProblemSpec};
use crate::transforms::QuadValue;
use num_complex::Complex64;

/// exp(-(u/T1)^{k1} - (u/T2)^{k2})
pub fn kernel_omega(u: Complex64, t1: Complex64, t2: Complex64, k1: u32, k2: u32) -> Complex64 {
    kernel_exponent(u, t1, t2, k1, k2).exp()
}

/// The kernel's complex exponent -(u/T1)^{k1} - (u/T2)^{k2}.
pub fn kernel_exponent(u: Complex64, t1: Complex64, t2: Complex64, k1: u32, k2: u32) -> Complex64 {
    -(u / t1).powu(k1) - (u / t2).powu(k2)
}

/// Kernel with both time arguments carried as dual numbers, so mixed first
/// derivatives in (T1, T2) come out of the arithmetic itself rather than a
/// hand-derived formula.
pub fn kernel_omega_dual(u: Complex64, t1: Dual2, t2: Dual2, k1: u32, k2: u32) -> Dual2 {
    let a = t1.recip().powu(k1).scale(u.powu(k1));
    let b = t2.recip().powu(k2).scale(u.powu(k2));
    a.add(b).neg().exp()
}

/// Kernel orders threaded through solution evaluations.
#[derive(Debug, Clone, Copy)]
pub struct KernelOrders {
    pub k1: u32,
    pub k2: u32,
}

/// Annular sector in the rescaled inner variable x2.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AnnularSector {
    pub r_min: f64,
    pub r_max: f64,
    pub arg_min: f64,
    pub arg_max: f64,
}

impl AnnularSector {
    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        let a = z.arg();
        r > self.r_min && r < self.r_max && a > self.arg_min && a < self.arg_max
    }

    pub fn arg_center(&self) -> f64 {
        0.5 * (self.arg_min + self.arg_max)
    }
}

/// The sectorial scaffolding every solution evaluation runs inside.
#[derive(Debug, Clone)]
pub struct AdmissibleSet {
    pub t1: Sector,
    pub t2: Sector,
    pub covering: GoodCovering,
    /// Borel-plane sector per covering sector
    pub borel_sectors: Vec<Sector>,
    /// cone margin delta
    pub delta: f64,
}

/// Inner-solution domain: the x2 annular sector and the per-sector rotation.
#[derive(Debug, Clone)]
pub struct InnerDomain {
    pub chi2: AnnularSector,
    pub theta: Vec<f64>,
    pub mu2: u32,
}

impl InnerDomain {
    /// t2 = x2 eps^{-mu2} e^{i theta_h}
    pub fn t2_of(&self, x2: Complex64, eps: Complex64, h: usize) -> Complex64 {
        x2 * eps.powu(self.mu2).finv() * Complex64::from_polar(1.0, self.theta[h])
    }
}

/// Midpoint of the feasible xi interval for one evaluation tuple.
pub fn select_xi(
    spec: &ProblemSpec,
    t1: Complex64,
    t2: Complex64,
    eps: Complex64,
    s_d: &Sector,
    delta: f64,
) -> Result<f64> {
    let arg_t1_eff = (eps.powu(spec.lambda1) * t1).arg();
    let arg_t2_eff = (eps.powu(spec.lambda2) * t2).arg();
    let w1 = AngleWindows::from_cone(spec.k1, arg_t1_eff, delta);
    let w2 = AngleWindows::from_cone(spec.k2, arg_t2_eff, delta);
    let ws = AngleWindows::from_sector(s_d);
    let all = w1.intersect(&w2).intersect(&ws);
    match all.widest() {
        Some((lo, hi)) => Ok(normalize_angle(0.5 * (lo + hi))),
        None => Err(Error::InfeasibleCone(format!(
            "k1 cone {:?}, k2 cone {:?}, sector {:?} have empty intersection",
            w1.intervals, w2.intervals, ws.intervals
        ))),
    }
}

/// Cosine margins of a specific direction for a tuple.
pub fn xi_margins(
    spec: &ProblemSpec,
    xi: f64,
    t1: Complex64,
    t2: Complex64,
    eps: Complex64,
) -> (f64, f64) {
    let arg_t1_eff = (eps.powu(spec.lambda1) * t1).arg();
    let arg_t2_eff = (eps.powu(spec.lambda2) * t2).arg();
    let c1 = (spec.k1 as f64 * normalize_angle(xi - arg_t1_eff)).cos();
    let c2 = (spec.k2 as f64 * normalize_angle(xi - arg_t2_eff)).cos();
    (c1, c2)
}

/// A matched pair of directions for a consecutive-sector difference: one in
/// each Borel sector, with the whole swept arc between them inside a single
/// k1-cone window (and, when `arc_k2` is set, a single k2-cone window, which
/// the outer regime needs because its k2 kernel is huge at the arc radius).
#[derive(Debug, Clone, Copy)]
pub struct PairedDirections {
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub margin: f64,
}

/// Best matched direction pair for given cone centers and two gap sectors.
/// Returns a negative-margin placeholder rather than an error so planners can
/// score infeasible combinations.
pub fn paired_directions_for_centers(
    spec: &ProblemSpec,
    c1_center: f64,
    c2_center: f64,
    delta: f64,
    gap_lo: (f64, f64),
    gap_hi: (f64, f64),
    arc_k2: bool,
) -> PairedDirections {
    let w1 = AngleWindows::from_cone(spec.k1, c1_center, delta);
    let w2 = AngleWindows::from_cone(spec.k2, c2_center, delta);
    let g_lo = AngleWindows { intervals: vec![gap_lo] };
    let g_hi = AngleWindows { intervals: vec![gap_hi] };
    let full_lo = w1.intersect(&w2).intersect(&g_lo);
    let full_hi = w1.intersect(&w2).intersect(&g_hi);
    let mut best = PairedDirections { xi_lo: f64::NAN, xi_hi: f64::NAN, margin: f64::NEG_INFINITY };
    let mut consider = |shared: &AngleWindows| {
        let lo = full_lo.intersect(shared);
        let hi = full_hi.intersect(shared);
        let m = lo.margin().min(hi.margin());
        if m > best.margin {
            let (a0, a1) = lo.widest().unwrap_or((f64::NAN, f64::NAN));
            let (b0, b1) = hi.widest().unwrap_or((f64::NAN, f64::NAN));
            best = PairedDirections {
                xi_lo: normalize_angle(0.5 * (a0 + a1)),
                xi_hi: normalize_angle(0.5 * (b0 + b1)),
                margin: m,
            };
        }
    };
    for &i1 in &w1.intervals {
        let base = AngleWindows { intervals: vec![i1] };
        if arc_k2 {
            for &i2 in &w2.intervals {
                consider(&base.intersect(&AngleWindows { intervals: vec![i2] }));
            }
        } else {
            consider(&base);
        }
    }
    best
}

/// Matched direction pair for one evaluation tuple.
#[allow(clippy::too_many_arguments)]
pub fn select_xi_pair(
    spec: &ProblemSpec,
    t1: Complex64,
    t2: Complex64,
    eps: Complex64,
    s_lo: &Sector,
    s_hi: &Sector,
    delta: f64,
    arc_k2: bool,
) -> Result<PairedDirections> {
    let c1 = (eps.powu(spec.lambda1) * t1).arg();
    let c2 = (eps.powu(spec.lambda2) * t2).arg();
    let pd = paired_directions_for_centers(
        spec,
        c1,
        c2,
        delta,
        s_lo.angular_interval(),
        s_hi.angular_interval(),
        arc_k2,
    );
    if pd.margin <= 0.0 {
        return Err(Error::InfeasibleCone(format!(
            "no shared cone window joins sectors at {:.4} and {:.4} for arg T1 = {c1:.4}, arg T2 = {c2:.4}",
            s_lo.direction, s_hi.direction
        )));
    }
    Ok(pd)
}

/// Truncation radius where the combined kernel damping beats the growth of
/// the Borel-plane data by ~45 e-folds.
pub fn suggest_r_max_joint(
    spec: &ProblemSpec,
    t1_abs: f64,
    t2_abs: f64,
    c1: f64,
    c2: f64,
    nu: f64,
) -> f64 {
    let g = |r: f64| {
        c1 * (r / t1_abs).powi(spec.k1 as i32) + c2 * (r / t2_abs).powi(spec.k2 as i32)
            - nu * r.powi(spec.k_prime as i32)
            - 45.0
    };
    let mut lo = t1_abs.min(t2_abs) * 1e-3;
    let mut hi = lo;
    for _ in 0..400 {
        if g(hi) > 0.0 {
            break;
        }
        lo = hi;
        hi *= 1.3;
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

/// Forcing integral over a ray of direction gamma:
/// integral psi(u, m, eps) Omega(u, T1, T2) du/u. Both kernels must damp
/// along the ray; the error suggests a rotated admissible direction.
#[allow(clippy::too_many_arguments)]
pub fn forcing_f(
    forcing: &ForcingSpec,
    spec: &ProblemSpec,
    t1_eff: Complex64,
    t2_eff: Complex64,
    m: f64,
    eps: Complex64,
    gamma: f64,
    delta1: f64,
    order: usize,
) -> Result<QuadValue> {
    let c1 = (spec.k1 as f64 * normalize_angle(gamma - t1_eff.arg())).cos();
    let c2 = (spec.k2 as f64 * normalize_angle(gamma - t2_eff.arg())).cos();
    if c1 < delta1 || c2 < delta1 {
        let w1 = AngleWindows::from_cone(spec.k1, t1_eff.arg(), delta1.asin());
        let w2 = AngleWindows::from_cone(spec.k2, t2_eff.arg(), delta1.asin());
        let joint = w1.intersect(&w2);
        let hint = joint
            .widest()
            .map(|(lo, hi)| format!("; admissible e.g. gamma = {:.6}", normalize_angle(0.5 * (lo + hi))))
            .unwrap_or_default();
        return Err(Error::InfeasibleCone(format!(
            "direction {gamma:.6} has cosine margins ({c1:.4}, {c2:.4}) below {delta1}{hint}"
        )));
    }
    let scale = t1_eff.norm().min(t2_eff.norm());
    let r_max = suggest_r_max_joint(spec, t1_eff.norm(), t2_eff.norm(), c1, c2, forcing.nu_f);
    let grid = RayGrid::graded(gamma, 1e-10 * scale, r_max, 1.6, order, &[]);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut last = 0.0;
    for (i, (&r, &w)) in grid.rule.nodes.iter().zip(&grid.rule.weights).enumerate() {
        let u = Complex64::from_polar(r, gamma);
        let g = forcing.eval(u, m, eps, spec) * kernel_omega(u, t1_eff, t2_eff, spec.k1, spec.k2) / r;
        acc += g * w;
        abs_sum += g.norm() * w;
        if i + 1 == grid.rule.len() {
            last = g.norm();
        }
    }
    let decay_len = t1_eff.norm().powi(spec.k1 as i32)
        / (spec.k1 as f64 * c1 * r_max.powi(spec.k1 as i32 - 1));
    Ok(QuadValue { value: acc, tail_estimate: last * decay_len, disc_estimate: 5e-14 * abs_sum })
}

/// Numerical knobs for a solution run.
#[derive(Debug, Clone)]
pub struct RunParams {
    /// lower truncation radius as a multiple of the smallest kernel scale
    pub r_min_factor: f64,
    pub ratio: f64,
    pub gl_order: usize,
    pub fp_tol: f64,
    /// minimum cosine margin required of the shared ray at every tuple
    pub cos_floor: f64,
}

impl Default for RunParams {
    fn default() -> Self {
        RunParams { r_min_factor: 1e-10, ratio: 1.6, gl_order: 20, fp_tol: 1e-10, cos_floor: 0.12 }
    }
}

/// U(T1, T2, m_j) for every frequency node, as a radial quadrature of
/// omega Omega du/u along ray `ray_idx` of the solution grid.
pub fn solution_u_row(
    omega: &GridFunction,
    orders: KernelOrders,
    ray_idx: usize,
    t1_eff: Complex64,
    t2_eff: Complex64,
) -> Vec<Complex64> {
    let ray = &omega.grid.rays[ray_idx];
    let offset = omega.grid.ray_offset(ray_idx);
    let n_m = omega.m_grid.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n_m];
    for (i, (&r, &w)) in ray.rule.nodes.iter().zip(&ray.rule.weights).enumerate() {
        let u = ray.point(i);
        let kernel = kernel_omega(u, t1_eff, t2_eff, orders.k1, orders.k2);
        let factor = w / r;
        let row = omega.row(offset + i);
        for j in 0..n_m {
            out[j] += row[j] * kernel * factor;
        }
    }
    out
}

/// U carried as a dual number in (T1, T2): value, both first derivatives and
/// the mixed one, per frequency node.
pub fn solution_u_row_dual(
    omega: &GridFunction,
    orders: KernelOrders,
    ray_idx: usize,
    t1_eff: Complex64,
    t2_eff: Complex64,
) -> Vec<Dual2> {
    let ray = &omega.grid.rays[ray_idx];
    let offset = omega.grid.ray_offset(ray_idx);
    let n_m = omega.m_grid.len();
    let mut out = vec![Dual2::constant(Complex64::new(0.0, 0.0)); n_m];
    let t1d = Dual2::var1(t1_eff);
    let t2d = Dual2::var2(t2_eff);
    for (i, (&r, &w)) in ray.rule.nodes.iter().zip(&ray.rule.weights).enumerate() {
        let u = ray.point(i);
        let kernel = kernel_omega_dual(u, t1d, t2d, orders.k1, orders.k2);
        let factor = w / r;
        let row = omega.row(offset + i);
        for j in 0..n_m {
            out[j] = out[j].add(kernel.scale(row[j] * factor));
        }
    }
    out
}

/// One evaluated solution point.
#[derive(Debug, Clone)]
pub struct SamplePoint {
    pub t1: Complex64,
    pub t2: Complex64,
    pub z: Complex64,
    pub u: Complex64,
}

/// Solution values over a tuple grid for one sector index and one eps.
#[derive(Debug, Clone)]
pub struct SolutionSample {
    pub sector_index: usize,
    pub eps: Complex64,
    pub points: Vec<SamplePoint>,
    pub sup_abs: f64,
    /// per-point failures (tuple description, error text); the run continues
    pub failures: Vec<(String, String)>,
    pub omega_norm: f64,
}

/// Shared state of one solution run: the Borel fixed point on the rays every
/// evaluation will use.
pub struct SolveRun {
    pub omega: GridFunction,
    pub orders: KernelOrders,
    pub iterations: usize,
    pub contraction: f64,
}

/// Solve the Borel fixed point on the union of the given full rays plus an
/// optional arc (radius, from, to).
#[allow(clippy::too_many_arguments)]
pub fn solve_on_rays(
    spec: &ProblemSpec,
    coeffs: &CoefficientFamily,
    forcing: &ForcingSpec,
    eps: Complex64,
    directions: &[f64],
    arc: Option<(f64, f64, f64)>,
    m_grid: &FrequencyGrid,
    scale_min: f64,
    r_max: f64,
    rho_half: f64,
    params: &RunParams,
) -> Result<SolveRun> {
    let rs = root_set(spec, m_grid)?;
    let marks = [rs.min_modulus, rs.max_modulus];
    let rays: Vec<RayGrid> = directions
        .iter()
        .map(|&xi| {
            RayGrid::graded_with_splits(
                xi,
                params.r_min_factor * scale_min,
                r_max,
                params.ratio,
                params.gl_order,
                &marks,
                &[rho_half],
            )
        })
        .collect();
    let arcs = match arc {
        Some((radius, from, to)) => vec![ArcGrid::new(radius, from, to, params.gl_order)],
        None => Vec::new(),
    };
    let grid = TauGrid { rays, arcs };
    let out = fixed_point_solve(
        spec,
        coeffs,
        forcing,
        eps,
        &grid,
        m_grid,
        params.fp_tol,
        StartGuess::ForcingOverPm,
    )?;
    Ok(SolveRun {
        omega: out.omega,
        orders: KernelOrders { k1: spec.k1, k2: spec.k2 },
        iterations: out.iterations,
        contraction: out.contraction_factor,
    })
}

fn fourier_point(m_grid: &FrequencyGrid, row: &[Complex64], z: Complex64) -> Complex64 {
    let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
    let mut acc = Complex64::new(0.0, 0.0);
    for ((&m, &w), &v) in m_grid.nodes.iter().zip(&m_grid.weights).zip(row) {
        acc += v * (Complex64::new(0.0, 1.0) * z * m).exp() * w;
    }
    acc * norm
}

/// Evaluate u = F^{-1}(U)(z) over tuples (t1, t2) x z using a shared ray.
#[allow(clippy::too_many_arguments)]
fn evaluate_sample(
    spec: &ProblemSpec,
    run: &SolveRun,
    ray_idx: usize,
    xi: f64,
    sector_index: usize,
    eps: Complex64,
    tuples: &[(Complex64, Complex64)],
    zs: &[Complex64],
    beta_prime: f64,
    cos_floor: f64,
) -> SolutionSample {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    let mut sup: f64 = 0.0;
    for &(t1, t2) in tuples {
        let (c1, c2) = xi_margins(spec, xi, t1, t2, eps);
        if c1 < cos_floor || c2 < cos_floor {
            failures.push((
                format!("t1={t1}, t2={t2}"),
                format!("shared ray xi={xi:.4} has cosine margins ({c1:.3}, {c2:.3}) below {cos_floor}"),
            ));
            continue;
        }
        let t1_eff = eps.powu(spec.lambda1) * t1;
        let t2_eff = eps.powu(spec.lambda2) * t2;
        let row = solution_u_row(&run.omega, run.orders, ray_idx, t1_eff, t2_eff);
        for &z in zs {
            if z.im.abs() >= beta_prime {
                failures.push((format!("z={z}"), format!("|Im z| >= beta' = {beta_prime}")));
                continue;
            }
            let u = fourier_point(&run.omega.m_grid, &row, z);
            sup = sup.max(u.norm());
            points.push(SamplePoint { t1, t2, z, u });
        }
    }
    SolutionSample {
        sector_index,
        eps,
        points,
        sup_abs: sup,
        failures,
        omega_norm: exp_norm(&run.omega),
    }
}

/// Geometry produced by the planner for one covering.
#[derive(Debug, Clone)]
pub struct GeometryPlan {
    pub borel_sectors: Vec<Sector>,
    /// free angle attached to overlap (h, h+1): theta_h for inner runs, the
    /// t2 sample argument for outer runs
    pub overlap_angle: Vec<f64>,
    /// chosen root gap per sector, for reporting
    pub gap_of_sector: Vec<usize>,
    /// worst feasibility margin across all overlaps (radians)
    pub margin: f64,
}

/// How the per-overlap free angle enters the second cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanMode {
    /// inner runs: t2 = x2 eps^{-mu2} e^{i theta}; the free angle is theta
    Inner { mu2: u32, x2_args: (f64, f64) },
    /// outer runs: the free angle is arg(t2) of the sample direction
    Outer,
}

/// Choose a Borel sector (root gap) per covering sector and the free angle
/// per overlap so that both kernel cones admit directions at every overlap
/// measurement angle, maximizing the worst feasibility margin. Consecutive
/// sectors are forced into distinct gaps so consecutive solutions genuinely
/// differ.
pub fn plan_geometry(
    spec: &ProblemSpec,
    m_grid: &FrequencyGrid,
    covering: &GoodCovering,
    t1: &Sector,
    t2: &Sector,
    delta: f64,
    safety: f64,
    mode: PlanMode,
) -> Result<GeometryPlan> {
    let rs = root_set(spec, m_grid)?;
    let gaps = root_gaps(&rs, safety)?;
    let n_gaps = gaps.len();
    let iota = covering.iota();
    let t1_args = [
        t1.direction - t1.half_opening * 0.9,
        t1.direction,
        t1.direction + t1.half_opening * 0.9,
    ];
    let (t2_lo, t2_hi) = t2.angular_interval();

    let arc_k2 = matches!(mode, PlanMode::Outer);
    // worst paired-direction margin over the sample-argument extremes, also
    // requiring the constructed t2 to stay inside the unbounded time sector
    let pair_score = |g_lo: (f64, f64), g_hi: (f64, f64), a: f64, phi: f64| -> f64 {
        let mut worst = f64::INFINITY;
        let x2_extremes: Vec<f64> = match mode {
            PlanMode::Inner { x2_args, .. } => vec![x2_args.0, x2_args.1],
            PlanMode::Outer => vec![0.0],
        };
        for &b1 in &t1_args {
            for &bx in &x2_extremes {
                let c1 = spec.lambda1 as f64 * a + b1;
                let c2 = match mode {
                    PlanMode::Inner { mu2, .. } => (spec.lambda2 as f64 - mu2 as f64) * a + phi + bx,
                    PlanMode::Outer => spec.lambda2 as f64 * a + phi,
                };
                let pd = paired_directions_for_centers(spec, c1, c2, delta, g_lo, g_hi, arc_k2);
                worst = worst.min(pd.margin);
                if worst == f64::NEG_INFINITY {
                    return worst;
                }
            }
        }
        let t2_margin = {
            let args: Vec<f64> = match mode {
                PlanMode::Inner { mu2, x2_args } => vec![
                    -(mu2 as f64) * a + phi + x2_args.0,
                    -(mu2 as f64) * a + phi + x2_args.1,
                ],
                PlanMode::Outer => vec![phi],
            };
            args.iter()
                .map(|&arg| {
                    let d = normalize_angle(arg - 0.5 * (t2_lo + t2_hi)).abs();
                    0.5 * (t2_hi - t2_lo) - d
                })
                .fold(f64::INFINITY, f64::min)
        };
        worst.min(t2_margin)
    };

    let n_phi = 720;
    let neg = f64::NEG_INFINITY;
    let mut best_phi = vec![vec![vec![f64::NAN; n_gaps]; n_gaps]; iota];
    let mut best_score = vec![vec![vec![neg; n_gaps]; n_gaps]; iota];
    for h in 0..iota {
        let a = covering.overlap_bisector(h);
        for g_lo in 0..n_gaps {
            for g_hi in 0..n_gaps {
                if g_lo == g_hi {
                    continue;
                }
                for i in 0..n_phi {
                    let phi = -std::f64::consts::PI
                        + 2.0 * std::f64::consts::PI * i as f64 / n_phi as f64;
                    let s = pair_score(gaps[g_lo], gaps[g_hi], a, phi);
                    if s > best_score[h][g_lo][g_hi] {
                        best_score[h][g_lo][g_hi] = s;
                        best_phi[h][g_lo][g_hi] = phi;
                    }
                }
            }
        }
    }

    // cyclic gap assignment maximizing the worst overlap score
    let mut best_assign: Option<(f64, Vec<usize>)> = None;
    for g0 in 0..n_gaps {
        let mut dp = vec![vec![neg; n_gaps]; iota];
        let mut back = vec![vec![usize::MAX; n_gaps]; iota];
        dp[0][g0] = f64::INFINITY;
        for h in 1..iota {
            for g in 0..n_gaps {
                for gp in 0..n_gaps {
                    if dp[h - 1][gp] == neg {
                        continue;
                    }
                    let s = dp[h - 1][gp].min(best_score[h - 1][gp][g]);
                    if s > dp[h][g] {
                        dp[h][g] = s;
                        back[h][g] = gp;
                    }
                }
            }
        }
        for g_last in 0..n_gaps {
            if dp[iota - 1][g_last] == neg {
                continue;
            }
            let total = dp[iota - 1][g_last].min(best_score[iota - 1][g_last][g0]);
            if total > best_assign.as_ref().map(|(s, _)| *s).unwrap_or(neg) {
                let mut gs = vec![0usize; iota];
                gs[iota - 1] = g_last;
                for h in (1..iota).rev() {
                    gs[h - 1] = back[h][gs[h]];
                }
                gs[0] = g0;
                best_assign = Some((total, gs));
            }
        }
    }
    let (score, gap_of_sector) =
        best_assign.ok_or_else(|| Error::InfeasibleCone("no gap assignment exists".into()))?;
    if score <= 0.0 {
        return Err(Error::InfeasibleCone(format!(
            "no positive-margin geometry: best worst-case margin {score:.4}"
        )));
    }
    let overlap_angle: Vec<f64> = (0..iota)
        .map(|h| best_phi[h][gap_of_sector[h]][gap_of_sector[(h + 1) % iota]])
        .collect();
    let borel_sectors: Vec<Sector> = gap_of_sector
        .iter()
        .map(|&g| {
            let (lo, hi) = gaps[g];
            Sector::unbounded(normalize_angle(0.5 * (lo + hi)), 0.5 * (hi - lo))
        })
        .collect();
    Ok(GeometryPlan { borel_sectors, overlap_angle, gap_of_sector, margin: score })
}

/// Validate an admissible set on sampled tuples: a feasible direction must
/// exist for every sampled (t1, t2, eps) in every sector.
pub fn validate_admissible(
    adm: &AdmissibleSet,
    spec: &ProblemSpec,
    tuples_per_sector: &[Vec<(Complex64, Complex64, Complex64)>],
) -> Result<()> {
    for (h, tuples) in tuples_per_sector.iter().enumerate() {
        for &(t1, t2, eps) in tuples {
            select_xi(spec, t1, t2, eps, &adm.borel_sectors[h], adm.delta).map_err(|e| {
                Error::InfeasibleCone(format!("sector {h}, t1={t1}, t2={t2}, eps={eps}: {e}"))
            })?;
        }
    }
    Ok(())
}

/// Everything a solution evaluation run needs.
pub struct PipelineContext<'a> {
    pub spec: &'a ProblemSpec,
    pub coeffs: &'a CoefficientFamily,
    pub forcing: &'a ForcingSpec,
    pub adm: &'a AdmissibleSet,
    pub m_grid: &'a FrequencyGrid,
    pub params: &'a RunParams,
    /// root-free disc radius
    pub rho: f64,
    pub beta_prime: f64,
}

impl<'a> PipelineContext<'a> {
    fn kernel_scales(
        &self,
        eps: Complex64,
        tuples: &[(Complex64, Complex64)],
    ) -> (f64, f64) {
        let spec = self.spec;
        let mut scale_min = f64::INFINITY;
        let mut r_max: f64 = 0.0;
        for &(t1, t2) in tuples {
            let a1 = (eps.powu(spec.lambda1) * t1).norm();
            let a2 = (eps.powu(spec.lambda2) * t2).norm();
            scale_min = scale_min.min(a1.min(a2));
            r_max = r_max.max(suggest_r_max_joint(
                spec,
                a1,
                a2,
                self.params.cos_floor,
                self.params.cos_floor,
                spec.nu,
            ));
        }
        (scale_min, r_max)
    }
}

/// Inner solution sample for sector h at one eps (eps must lie in sector h).
pub fn inner_solution(
    ctx: &PipelineContext,
    dom: &InnerDomain,
    h: usize,
    eps: Complex64,
    t1s: &[Complex64],
    x2s: &[Complex64],
    zs: &[Complex64],
) -> Result<SolutionSample> {
    let spec = ctx.spec;
    if !ctx.adm.covering.sectors[h].contains(eps.arg(), eps.norm().min(spec.epsilon0 * 0.999)) {
        return Err(Error::Validation(format!("eps = {eps} not in covering sector {h}")));
    }
    let mut tuples = Vec::new();
    for &t1 in t1s {
        for &x2 in x2s {
            if !dom.chi2.contains(x2) {
                return Err(Error::Validation(format!("x2 = {x2} outside the annular sector")));
            }
            let t2 = dom.t2_of(x2, eps, h);
            if !ctx.adm.t2.contains_point(t2) {
                return Err(Error::DomainViolation { arg: t2.arg() });
            }
            tuples.push((t1, t2));
        }
    }
    let (rep_t1, rep_t2) = tuples[tuples.len() / 2];
    let xi = select_xi(spec, rep_t1, rep_t2, eps, &ctx.adm.borel_sectors[h], ctx.adm.delta)?;
    let (scale_min, r_max) = ctx.kernel_scales(eps, &tuples);
    let run = solve_on_rays(
        spec,
        ctx.coeffs,
        ctx.forcing,
        eps,
        &[xi],
        None,
        ctx.m_grid,
        scale_min,
        r_max,
        0.5 * ctx.rho,
        ctx.params,
    )?;
    Ok(evaluate_sample(spec, &run, 0, xi, h, eps, &tuples, zs, ctx.beta_prime, ctx.params.cos_floor))
}

/// Outer solution sample for sector h: t2 samples live in the unbounded
/// sector intersected with the disc of radius rho2.
#[allow(clippy::too_many_arguments)]
pub fn outer_solution(
    ctx: &PipelineContext,
    h: usize,
    eps: Complex64,
    t1s: &[Complex64],
    t2s: &[Complex64],
    rho2: f64,
    zs: &[Complex64],
) -> Result<SolutionSample> {
    let spec = ctx.spec;
    if !ctx.adm.covering.sectors[h].contains(eps.arg(), eps.norm().min(spec.epsilon0 * 0.999)) {
        return Err(Error::Validation(format!("eps = {eps} not in covering sector {h}")));
    }
    let mut tuples = Vec::new();
    for &t1 in t1s {
        for &t2 in t2s {
            if t2.norm() >= rho2 * (1.0 + 1e-12) {
                return Err(Error::Validation(format!("t2 = {t2} outside the disc of radius {rho2}")));
            }
            if !ctx.adm.t2.contains_point(t2) {
                return Err(Error::DomainViolation { arg: t2.arg() });
            }
            tuples.push((t1, t2));
        }
    }
    let (rep_t1, rep_t2) = tuples[tuples.len() / 2];
    let xi = select_xi(spec, rep_t1, rep_t2, eps, &ctx.adm.borel_sectors[h], ctx.adm.delta)?;
    let (scale_min, r_max) = ctx.kernel_scales(eps, &tuples);
    let run = solve_on_rays(
        spec,
        ctx.coeffs,
        ctx.forcing,
        eps,
        &[xi],
        None,
        ctx.m_grid,
        scale_min,
        r_max,
        0.5 * ctx.rho,
        ctx.params,
    )?;
    Ok(evaluate_sample(spec, &run, 0, xi, h, eps, &tuples, zs, ctx.beta_prime, ctx.params.cos_floor))
}

/// The deformed-path decomposition of the difference of two consecutive
/// solutions at one tuple.
#[derive(Debug, Clone)]
pub struct DeformedDifference {
    /// u_{h+1} - u_h via the two full rays
    pub direct: Complex64,
    pub e1: Complex64,
    pub e2: Complex64,
    pub e3: Complex64,
    /// E1 - E2 + E3 carried in scaled arithmetic
    pub delta: ScaledComplex,
}

/// Shared Borel data for one overlap pair at one eps: omega on both full
/// rays plus the connecting arc at rho/2.
pub struct PairRun {
    pub run: SolveRun,
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub rho_half: f64,
    pub split_lo: usize,
    pub split_hi: usize,
}

/// Solve omega for the overlap pair (h, h+1): a matched direction pair chosen
/// at a representative tuple, one full ray per sector, plus the arc at rho/2.
/// `arc_k2` demands the k2 cone along the whole arc (outer regime).
pub fn pair_run(
    ctx: &PipelineContext,
    h: usize,
    eps: Complex64,
    rep: (Complex64, Complex64),
    tuples: &[(Complex64, Complex64)],
    arc_k2: bool,
) -> Result<PairRun> {
    let spec = ctx.spec;
    let iota = ctx.adm.covering.iota();
    let h_next = (h + 1) % iota;
    let ov = ctx.adm.covering.sectors[h].half_opening
        + ctx.adm.covering.sectors[h_next].half_opening
        - crate::geometry::arg_distance(
            ctx.adm.covering.sectors[h].direction,
            ctx.adm.covering.sectors[h_next].direction,
        );
    if ov <= 0.0 {
        return Err(Error::OverlapEmpty { h, h_next });
    }
    let pd = select_xi_pair(
        spec,
        rep.0,
        rep.1,
        eps,
        &ctx.adm.borel_sectors[h],
        &ctx.adm.borel_sectors[h_next],
        ctx.adm.delta,
        arc_k2,
    )?;
    let (xi_lo, xi_hi) = (pd.xi_lo, pd.xi_hi);
    let rho_half = 0.5 * ctx.rho;
    // oriented arc from xi_lo to xi_hi along the short way
    let to = xi_lo + normalize_angle(xi_hi - xi_lo);
    let (scale_min, r_max) = ctx.kernel_scales(eps, tuples);
    let run = solve_on_rays(
        spec,
        ctx.coeffs,
        ctx.forcing,
        eps,
        &[xi_lo, to],
        Some((rho_half, xi_lo, to)),
        ctx.m_grid,
        scale_min,
        r_max,
        rho_half,
        ctx.params,
    )?;
    let split_lo = run.omega.grid.rays[0].first_node_at_or_above(rho_half);
    let split_hi = run.omega.grid.rays[1].first_node_at_or_above(rho_half);
    Ok(PairRun { run, xi_lo, xi_hi: to, rho_half, split_lo, split_hi })
}

/// Per-frequency profile of the deformed difference at one (t1, t2, eps)
/// tuple; the strip point enters only through the final Fourier factor, so
/// one profile serves every z.
pub struct DifferenceProfile {
    pub direct_m: Vec<Complex64>,
    pub e1_m: Vec<Complex64>,
    pub e2_m: Vec<Complex64>,
    pub e3_m: Vec<Complex64>,
    pub delta_m: Vec<ScaledComplex>,
    m_nodes: Vec<f64>,
    m_weights: Vec<f64>,
}

struct NodeKernels {
    /// quadrature factor times exp(kernel exponent), plain arithmetic
    plain: Vec<Complex64>,
    /// quadrature factor times the unit phase of the kernel
    phase: Vec<Complex64>,
    /// real part of the kernel exponent
    ln_mag: Vec<f64>,
}

fn ray_kernels(
    omega: &GridFunction,
    orders: KernelOrders,
    ray_idx: usize,
    t1_eff: Complex64,
    t2_eff: Complex64,
) -> NodeKernels {
    let ray = &omega.grid.rays[ray_idx];
    let n = ray.len();
    let mut plain = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    let mut ln_mag = Vec::with_capacity(n);
    for (i, (&r, &w)) in ray.rule.nodes.iter().zip(&ray.rule.weights).enumerate() {
        let u = ray.point(i);
        let expo = kernel_exponent(u, t1_eff, t2_eff, orders.k1, orders.k2);
        let factor = Complex64::new(w / r, 0.0);
        plain.push(factor * expo.exp());
        phase.push(factor * Complex64::from_polar(1.0, expo.im));
        ln_mag.push(expo.re);
    }
    NodeKernels { plain, phase, ln_mag }
}

fn arc_kernels(
    omega: &GridFunction,
    orders: KernelOrders,
    arc_idx: usize,
    t1_eff: Complex64,
    t2_eff: Complex64,
) -> NodeKernels {
    let arc = &omega.grid.arcs[arc_idx];
    let span = arc.to - arc.from;
    let n = arc.len();
    let mut plain = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    let mut ln_mag = Vec::with_capacity(n);
    for i in 0..n {
        let u = arc.point(i);
        // the rule lives on [0, 1]; du/u = i dphi along the arc
        let w = arc.rule.weights[i] * span;
        let expo = kernel_exponent(u, t1_eff, t2_eff, orders.k1, orders.k2);
        let factor = Complex64::new(0.0, w);
        plain.push(factor * expo.exp());
        phase.push(factor * Complex64::from_polar(1.0, expo.im));
        ln_mag.push(expo.re);
    }
    NodeKernels { plain, phase, ln_mag }
}

/// Build the per-frequency difference profile for one tuple.
pub fn difference_profile(
    pair: &PairRun,
    spec: &ProblemSpec,
    eps: Complex64,
    t1: Complex64,
    t2: Complex64,
) -> DifferenceProfile {
    let orders = pair.run.orders;
    let omega = &pair.run.omega;
    let t1_eff = eps.powu(spec.lambda1) * t1;
    let t2_eff = eps.powu(spec.lambda2) * t2;
    let m_grid = &omega.m_grid;
    let n_m = m_grid.len();

    let k_lo = ray_kernels(omega, orders, 0, t1_eff, t2_eff);
    let k_hi = ray_kernels(omega, orders, 1, t1_eff, t2_eff);
    let k_arc = arc_kernels(omega, orders, 0, t1_eff, t2_eff);
    let off_lo = omega.grid.ray_offset(0);
    let off_hi = omega.grid.ray_offset(1);
    let off_arc = omega.grid.arc_offset(0);

    let mut direct_m = vec![Complex64::new(0.0, 0.0); n_m];
    let mut e1_m = vec![Complex64::new(0.0, 0.0); n_m];
    let mut e2_m = vec![Complex64::new(0.0, 0.0); n_m];
    let mut e3_m = vec![Complex64::new(0.0, 0.0); n_m];
    let mut delta_m = Vec::with_capacity(n_m);

    let mut terms: Vec<ScaledComplex> = Vec::new();
    for j in 0..n_m {
        let mut in_lo = Complex64::new(0.0, 0.0);
        let mut out_lo = Complex64::new(0.0, 0.0);
        let mut in_hi = Complex64::new(0.0, 0.0);
        let mut out_hi = Complex64::new(0.0, 0.0);
        let mut arc_plain = Complex64::new(0.0, 0.0);
        terms.clear();
        for i in 0..k_lo.plain.len() {
            let v = omega.value(off_lo + i, j);
            if i < pair.split_lo {
                in_lo += v * k_lo.plain[i];
            } else {
                out_lo += v * k_lo.plain[i];
                terms.push(
                    ScaledComplex::from_parts(-v * k_lo.phase[i], k_lo.ln_mag[i]),
                );
            }
        }
        for i in 0..k_hi.plain.len() {
            let v = omega.value(off_hi + i, j);
            if i < pair.split_hi {
                in_hi += v * k_hi.plain[i];
            } else {
                out_hi += v * k_hi.plain[i];
                terms.push(ScaledComplex::from_parts(v * k_hi.phase[i], k_hi.ln_mag[i]));
            }
        }
        for i in 0..k_arc.plain.len() {
            let v = omega.value(off_arc + i, j);
            arc_plain += v * k_arc.plain[i];
            terms.push(ScaledComplex::from_parts(v * k_arc.phase[i], k_arc.ln_mag[i]));
        }
        direct_m[j] = (in_hi + out_hi) - (in_lo + out_lo);
        e1_m[j] = out_hi;
        e2_m[j] = out_lo;
        e3_m[j] = arc_plain;
        delta_m.push(scaled_sum(&terms));
    }
    DifferenceProfile {
        direct_m,
        e1_m,
        e2_m,
        e3_m,
        delta_m,
        m_nodes: m_grid.nodes.clone(),
        m_weights: m_grid.weights.clone(),
    }
}

impl DifferenceProfile {
    /// Assemble the difference at a strip point.
    pub fn at_z(&self, z: Complex64) -> DeformedDifference {
        let norm = (2.0 * std::f64::consts::PI).sqrt().recip();
        let mut direct = Complex64::new(0.0, 0.0);
        let mut e1 = Complex64::new(0.0, 0.0);
        let mut e2 = Complex64::new(0.0, 0.0);
        let mut e3 = Complex64::new(0.0, 0.0);
        let mut delta_terms = Vec::with_capacity(self.m_nodes.len());
        for j in 0..self.m_nodes.len() {
            let fk = (Complex64::new(0.0, 1.0) * z * self.m_nodes[j]).exp()
                * self.m_weights[j]
                * norm;
            direct += self.direct_m[j] * fk;
            e1 += self.e1_m[j] * fk;
            e2 += self.e2_m[j] * fk;
            e3 += self.e3_m[j] * fk;
            delta_terms.push(self.delta_m[j].scale_by(fk));
        }
        DeformedDifference { direct, e1, e2, e3, delta: scaled_sum(&delta_terms) }
    }
}

/// Convenience wrapper: profile plus evaluation at one strip point.
pub fn difference_at(
    pair: &PairRun,
    spec: &ProblemSpec,
    eps: Complex64,
    t1: Complex64,
    t2: Complex64,
    z: Complex64,
) -> DeformedDifference {
    difference_profile(pair, spec, eps, t1, t2).at_z(z)
}
