//! End-to-end orchestration: builds the sector geometry from a configuration,
//! runs solution/difference/flatness measurements, and exposes the residual
//! checks. The command-line runner and the verification suites share this.

use crate::assembly::{
    difference_profile, forcing_f, inner_solution, outer_solution, pair_run, plan_geometry,
    select_xi, solution_u_row, solution_u_row_dual, AdmissibleSet, DifferenceProfile, InnerDomain,
    KernelOrders, PairRun, PipelineContext, PlanMode, RunParams, SolutionSample,
};
use crate::asymptotics::{flatness_fit_log, FitResult};
use crate::borel::{
    fixed_point_solve, select_direction, ArcGrid, FixedPointOutcome, StartGuess, TauGrid,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::{build_good_covering, CoveringKind, GoodCovering};
use crate::grids::{FrequencyGrid, RayGrid};
use crate::spec::{CoefficientFamily, ForcingSpec, ProblemSpec, ValidationReport};
use num_complex::Complex64;

/// A solved overlap pair: the parameter point, the shared Borel data, and
/// the evaluation tuples.
pub type SolvedPair = (Complex64, PairRun, Vec<(Complex64, Complex64)>);

/// Geometry and data assembled once per configuration.
pub struct Workbench {
    pub cfg: ExperimentConfig,
    pub spec: ProblemSpec,
    pub coeffs: CoefficientFamily,
    pub forcing: ForcingSpec,
    pub m_grid: FrequencyGrid,
    /// root-free disc radius certified by direction selection
    pub rho: f64,
    /// canonical unbounded direction (largest root gap)
    pub main_direction: f64,
    pub params: RunParams,
    pub inner_covering: GoodCovering,
    pub inner_adm: AdmissibleSet,
    pub inner_dom: InnerDomain,
    pub outer_covering: GoodCovering,
    pub outer_adm: AdmissibleSet,
    /// planner-chosen t2 sample argument per outer overlap
    pub outer_t2_args: Vec<f64>,
}

impl Workbench {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let spec = cfg.problem_spec();
        let m_grid = FrequencyGrid::symmetric(cfg.grids.m_cutoff, cfg.grids.n_m);
        let report = crate::spec::validate_spec(&spec, &m_grid)?;
        if !report.all_pass() {
            let names: Vec<&str> =
                report.failed().iter().map(|r| r.check_name.as_str()).collect();
            return Err(Error::Validation(format!("hypotheses failed: {names:?}")));
        }
        let coeffs = cfg.coefficient_family(&spec);
        let forcing = cfg.forcing_spec(&spec);
        coeffs.check_bounds(&spec, &m_grid)?;
        let sel = select_direction(&spec, &m_grid, cfg.geometry.gap_safety, cfg.seed)?;
        let t1 = cfg.t1_sector();
        let t2 = cfg.t2_sector();

        let inner_covering = build_good_covering(
            cfg.coverings.iota2,
            cfg.coverings.min_opening2,
            CoveringKind::Plain,
            spec.lambda2k2(),
        )?;
        let chi = &cfg.geometry.chi2;
        let inner_plan = plan_geometry(
            &spec,
            &m_grid,
            &inner_covering,
            &t1,
            &t2,
            cfg.geometry.delta,
            cfg.geometry.gap_safety,
            PlanMode::Inner { mu2: spec.mu2, x2_args: (chi.arg_min, chi.arg_max) },
        )?;
        let inner_adm = AdmissibleSet {
            t1: t1.clone(),
            t2: t2.clone(),
            covering: inner_covering.clone(),
            borel_sectors: inner_plan.borel_sectors.clone(),
            delta: cfg.geometry.delta,
        };
        let inner_dom = InnerDomain {
            chi2: chi.clone(),
            theta: inner_plan.overlap_angle.clone(),
            mu2: spec.mu2,
        };

        let outer_covering = build_good_covering(
            cfg.coverings.iota1,
            cfg.coverings.min_opening1,
            CoveringKind::OpeningConstrained,
            spec.lambda2k2(),
        )?;
        let outer_plan = plan_geometry(
            &spec,
            &m_grid,
            &outer_covering,
            &t1,
            &t2,
            cfg.geometry.delta,
            cfg.geometry.gap_safety,
            PlanMode::Outer,
        )?;
        let outer_adm = AdmissibleSet {
            t1,
            t2,
            covering: outer_covering.clone(),
            borel_sectors: outer_plan.borel_sectors.clone(),
            delta: cfg.geometry.delta,
        };

        let params = RunParams {
            r_min_factor: 1e-10,
            ratio: cfg.grids.ratio,
            gl_order: cfg.grids.n_ray,
            fp_tol: cfg.tolerances.fp_tol,
            cos_floor: 0.12,
        };
        Ok(Workbench {
            cfg: cfg.clone(),
            spec,
            coeffs,
            forcing,
            m_grid,
            rho: sel.rho,
            main_direction: sel.sector.direction,
            params,
            inner_covering,
            inner_adm,
            inner_dom,
            outer_covering,
            outer_adm,
            outer_t2_args: outer_plan.overlap_angle,
        })
    }

    pub fn validation_report(&self) -> Result<ValidationReport> {
        crate::spec::validate_spec(&self.spec, &self.m_grid)
    }

    fn inner_ctx(&self) -> PipelineContext<'_> {
        PipelineContext {
            spec: &self.spec,
            coeffs: &self.coeffs,
            forcing: &self.forcing,
            adm: &self.inner_adm,
            m_grid: &self.m_grid,
            params: &self.params,
            rho: self.rho,
            beta_prime: self.cfg.geometry.beta_prime,
        }
    }

    fn outer_ctx(&self) -> PipelineContext<'_> {
        PipelineContext {
            spec: &self.spec,
            coeffs: &self.coeffs,
            forcing: &self.forcing,
            adm: &self.outer_adm,
            m_grid: &self.m_grid,
            params: &self.params,
            rho: self.rho,
            beta_prime: self.cfg.geometry.beta_prime,
        }
    }

    /// Inner evaluation tuples for sector h at one eps.
    pub fn inner_tuples(&self, h: usize, eps: Complex64) -> Vec<(Complex64, Complex64)> {
        let mut tuples = Vec::new();
        for &t1 in &self.cfg.t1_samples() {
            for &x2 in &self.cfg.x2_samples() {
                tuples.push((t1, self.inner_dom.t2_of(x2, eps, h)));
            }
        }
        tuples
    }

    /// Inner solution sample for sector h; eps placed on one of the sector's
    /// overlap bisectors by modulus.
    pub fn inner_sample(&self, h: usize, eps_abs: f64) -> Result<SolutionSample> {
        let eps = Complex64::from_polar(eps_abs, self.inner_covering.overlap_bisector(h));
        inner_solution(
            &self.inner_ctx(),
            &self.inner_dom,
            h,
            eps,
            &self.cfg.t1_samples(),
            &self.cfg.x2_samples(),
            &self.cfg.z_samples(),
        )
    }

    /// Outer solution sample for sector h at the planner's t2 argument.
    pub fn outer_sample(&self, h: usize, eps_abs: f64) -> Result<SolutionSample> {
        let eps = Complex64::from_polar(eps_abs, self.outer_covering.overlap_bisector(h));
        outer_solution(
            &self.outer_ctx(),
            h,
            eps,
            &self.cfg.t1_samples(),
            &self.cfg.t2_outer_samples(self.outer_t2_args[h]),
            self.cfg.geometry.rho2,
            &self.cfg.z_samples(),
        )
    }

    /// Solve the pair run for inner overlap (h, h+1) at modulus eps_abs.
    pub fn inner_pair(&self, h: usize, eps_abs: f64) -> Result<SolvedPair> {
        let a = self.inner_covering.overlap_bisector(h);
        let eps = Complex64::from_polar(eps_abs, a);
        let tuples = self.inner_tuples(h, eps);
        let rep = tuples[tuples.len() / 2];
        let run = pair_run(&self.inner_ctx(), h, eps, rep, &tuples, false)?;
        Ok((eps, run, tuples))
    }

    /// Solve the pair run for outer overlap (h, h+1) at modulus eps_abs.
    pub fn outer_pair(&self, h: usize, eps_abs: f64) -> Result<SolvedPair> {
        let a = self.outer_covering.overlap_bisector(h);
        let eps = Complex64::from_polar(eps_abs, a);
        let t1s = self.cfg.t1_samples();
        let t2s = self.cfg.t2_outer_samples(self.outer_t2_args[h]);
        let mut tuples = Vec::new();
        for &t1 in &t1s {
            for &t2 in &t2s {
                tuples.push((t1, t2));
            }
        }
        let rep = tuples[tuples.len() / 2];
        let run = pair_run(&self.outer_ctx(), h, eps, rep, &tuples, true)?;
        Ok((eps, run, tuples))
    }

    /// Sup over the tuple grid of ln |E1 - E2 + E3| plus the worst
    /// |direct - (E1 - E2 + E3)| across tuples and strip points.
    pub fn pair_difference_sup(
        &self,
        run: &PairRun,
        eps: Complex64,
        tuples: &[(Complex64, Complex64)],
    ) -> (f64, f64) {
        let zs = self.cfg.z_samples();
        let mut ln_sup = f64::NEG_INFINITY;
        let mut worst_id: f64 = 0.0;
        for &(t1, t2) in tuples {
            let profile: DifferenceProfile = difference_profile(run, &self.spec, eps, t1, t2);
            for &z in &zs {
                let d = profile.at_z(z);
                ln_sup = ln_sup.max(d.delta.ln_abs());
                worst_id = worst_id.max((d.direct - (d.e1 - d.e2 + d.e3)).norm());
            }
        }
        (ln_sup, worst_id)
    }

    /// Flatness fit for one overlap of the inner family over the configured ladder.
    pub fn inner_flatness(&self, h: usize) -> Result<(FitResult, f64)> {
        let mut samples = Vec::new();
        let mut worst_id: f64 = 0.0;
        for &eps_abs in &self.cfg.eps.flatness_ladder_inner {
            let (eps, run, tuples) = self.inner_pair(h, eps_abs)?;
            let (ln_sup, id) = self.pair_difference_sup(&run, eps, &tuples);
            worst_id = worst_id.max(id);
            samples.push((eps_abs, ln_sup));
        }
        let fit = flatness_fit_log(&samples, &[4.0, 6.0, 8.0, 10.0, 12.0, 14.0])?;
        Ok((fit, worst_id))
    }

    /// Flatness fit for one overlap of the outer family.
    pub fn outer_flatness(&self, h: usize) -> Result<(FitResult, f64)> {
        let mut samples = Vec::new();
        let mut worst_id: f64 = 0.0;
        for &eps_abs in &self.cfg.eps.flatness_ladder_outer {
            let (eps, run, tuples) = self.outer_pair(h, eps_abs)?;
            let (ln_sup, id) = self.pair_difference_sup(&run, eps, &tuples);
            worst_id = worst_id.max(id);
            samples.push((eps_abs, ln_sup));
        }
        let fit = flatness_fit_log(&samples, &[4.0, 6.0, 8.0, 10.0, 12.0, 14.0])?;
        Ok((fit, worst_id))
    }

    /// Canonical solution grid for serialization: the main unbounded ray plus
    /// disc rays at every root-gap midpoint, plus the arc at rho/2.
    pub fn canonical_solve(&self, eps: Complex64) -> Result<FixedPointOutcome> {
        // inspection-grade resolution: every node still converges to fp_tol,
        // the grid is just coarse enough to keep serialized output reasonable
        let rs = crate::borel::root_set(&self.spec, &self.m_grid)?;
        let gaps = crate::borel::root_gaps(&rs, self.cfg.geometry.gap_safety)?;
        let marks = [rs.min_modulus, rs.max_modulus];
        let mut rays = vec![RayGrid::graded_with_splits(
            self.main_direction,
            1e-8,
            self.cfg.grids.r_max.min(8.0),
            2.2,
            8,
            &marks,
            &[0.5 * self.rho],
        )];
        for (lo, hi) in &gaps {
            let mid = crate::geometry::normalize_angle(0.5 * (lo + hi));
            if (mid - self.main_direction).abs() < 1e-9 {
                continue;
            }
            rays.push(RayGrid::graded(mid, 1e-8, self.rho, 2.2, 4, &[]));
        }
        let grid = TauGrid {
            rays,
            arcs: vec![ArcGrid::new(
                0.5 * self.rho,
                -std::f64::consts::PI,
                std::f64::consts::PI,
                4,
            )],
        };
        fixed_point_solve(
            &self.spec,
            &self.coeffs,
            &self.forcing,
            eps,
            &grid,
            &self.m_grid,
            self.params.fp_tol,
            StartGuess::ForcingOverPm,
        )
    }

    /// Residual of the frequency-space equation at sample points, with the
    /// time-derivative side produced by dual-number differentiation of the
    /// solution map. Returns relative residuals. Requires first-order leading
    /// operators (delta_D1 = delta_D2 = 1) and derivative-free lower terms.
    pub fn pde_residual(&self, h: usize, eps_abs: f64, m_indices: &[usize]) -> Result<Vec<f64>> {
        let spec = &self.spec;
        assert!(
            spec.delta_d1 == 1 && spec.delta_d2 == 1,
            "residual checker drives first-order leading operators"
        );
        assert!(
            spec.lower_pairs().all(|(l1, l2)| {
                spec.delta_l1[l1 - 1] == 0 && spec.delta_l2[l2 - 1] == 0
            }),
            "residual checker drives derivative-free lower operators"
        );
        let a = self.outer_covering.overlap_bisector(h);
        let eps = Complex64::from_polar(eps_abs, a);
        let t1s = self.cfg.t1_samples();
        let t2s = self.cfg.t2_outer_samples(self.outer_t2_args[h]);
        let mut tuples = Vec::new();
        for &t1 in &t1s {
            for &t2 in &t2s {
                tuples.push((t1, t2));
            }
        }
        let rep = tuples[tuples.len() / 2];
        let xi = select_xi(spec, rep.0, rep.1, eps, &self.outer_adm.borel_sectors[h], self.outer_adm.delta)?;
        let (scale_min, r_max) = {
            let mut s = f64::INFINITY;
            let mut r: f64 = 0.0;
            for &(t1, t2) in &tuples {
                let a1 = (eps.powu(spec.lambda1) * t1).norm();
                let a2 = (eps.powu(spec.lambda2) * t2).norm();
                s = s.min(a1.min(a2));
                r = r.max(crate::assembly::suggest_r_max_joint(
                    spec,
                    a1,
                    a2,
                    self.params.cos_floor,
                    self.params.cos_floor,
                    spec.nu,
                ));
            }
            (s, r)
        };
        let run = crate::assembly::solve_on_rays(
            spec,
            &self.coeffs,
            &self.forcing,
            eps,
            &[xi],
            None,
            &self.m_grid,
            scale_min,
            r_max,
            0.5 * self.rho,
            &self.params,
        )?;
        let orders = KernelOrders { k1: spec.k1, k2: spec.k2 };
        let norm_c = (2.0 * std::f64::consts::PI).sqrt().recip();
        let mut residuals = Vec::new();
        for &(t1, t2) in &[tuples[0], tuples[tuples.len() / 2], tuples[tuples.len() - 1]] {
            let t1_eff = eps.powu(spec.lambda1) * t1;
            let t2_eff = eps.powu(spec.lambda2) * t2;
            let u_row = solution_u_row(&run.omega, orders, 0, t1_eff, t2_eff);
            let dual_row = solution_u_row_dual(&run.omega, orders, 0, t1_eff, t2_eff);
            for &jm in m_indices {
                let m = self.m_grid.nodes[jm];
                let lhs = spec.q_poly.eval_im(m) * u_row[jm];
                // leading operator by the mixed dual derivative
                let lead = spec.r_d1d2.eval_im(m)
                    * t1_eff.powu(spec.k1 + 1)
                    * t2_eff.powu(spec.k2 + 1)
                    * dual_row[jm].d12;
                let mut coupling = Complex64::new(0.0, 0.0);
                for (l1, l2) in spec.lower_pairs() {
                    let power = spec.delta_exp[l1 - 1][l2 - 1];
                    let mut conv = Complex64::new(0.0, 0.0);
                    for (jp, (&m1, &w)) in
                        self.m_grid.nodes.iter().zip(&self.m_grid.weights).enumerate()
                    {
                        conv += self.coeffs.eval(l1, l2, m - m1, eps, spec.epsilon0)
                            * spec.r_lower[l1 - 1][l2 - 1].eval_im(m1)
                            * u_row[jp]
                            * w;
                    }
                    coupling += eps.powu(power) * conv * norm_c;
                }
                let f_val = forcing_f(
                    &self.forcing,
                    spec,
                    t1_eff,
                    t2_eff,
                    m,
                    eps,
                    xi,
                    self.params.cos_floor,
                    self.params.gl_order,
                )?
                .value;
                let rhs = lead + coupling + f_val;
                let scale = lhs.norm().max(f_val.norm()).max(lead.norm()).max(1e-300);
                residuals.push((lhs - rhs).norm() / scale);
            }
        }
        Ok(residuals)
    }
}
