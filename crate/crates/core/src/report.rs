//! CSV emission. Every file starts with a comment line carrying the config
//! hash, then a header row.

pub use writers::*;

mod writers {
    use crate::assembly::SolutionSample;
    use crate::asymptotics::{BoundReport, FitResult};
    use crate::borel::{DemoReport, GridFunction};
    use crate::spec::ValidationReport;
    use std::io::Write;
    use std::path::Path;

    fn open(path: &Path, config_hash: u64, header: &str) -> std::io::Result<std::io::BufWriter<std::fs::File>> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "# config_hash={config_hash:016x}")?;
        writeln!(w, "{header}")?;
        Ok(w)
    }

    pub fn write_validation(path: &Path, hash: u64, report: &ValidationReport) -> std::io::Result<()> {
        let mut w = open(path, hash, "check_name,pass,detail")?;
        for row in &report.rows {
            writeln!(w, "{},{},\"{}\"", row.check_name, row.pass, row.detail.replace('"', "'"))?;
        }
        Ok(())
    }

    pub fn write_omega(path: &Path, hash: u64, omega: &GridFunction) -> std::io::Result<()> {
        let mut w = open(path, hash, "ray_id,r,m,re,im")?;
        let n_m = omega.m_grid.len();
        let mut idx = 0usize;
        for (ray_id, ray) in omega.grid.rays.iter().enumerate() {
            for i in 0..ray.len() {
                for (j, &m) in omega.m_grid.nodes.iter().enumerate() {
                    let v = omega.values[(idx + i) * n_m + j];
                    writeln!(w, "{ray_id},{:.12e},{m:.6},{:.12e},{:.12e}", ray.rule.nodes[i], v.re, v.im)?;
                }
            }
            idx += ray.len();
        }
        for (arc_id, arc) in omega.grid.arcs.iter().enumerate() {
            for i in 0..arc.len() {
                for (j, &m) in omega.m_grid.nodes.iter().enumerate() {
                    let v = omega.values[(idx + i) * n_m + j];
                    writeln!(
                        w,
                        "{},{:.12e},{m:.6},{:.12e},{:.12e}",
                        1000 + arc_id,
                        arc.radius,
                        v.re,
                        v.im
                    )?;
                }
            }
            idx += arc.len();
        }
        Ok(())
    }

    pub fn write_demo(path: &Path, hash: u64, demo: &DemoReport) -> std::io::Result<()> {
        let mut w = open(path, hash, "m,threshold_tau2,max_abs_tau1")?;
        for row in &demo.rows {
            writeln!(w, "{:.6},{:.12e},{:.12e}", row.m, row.threshold_tau2, row.max_abs_tau1)?;
        }
        Ok(())
    }

    pub fn write_sample(path: &Path, hash: u64, s: &SolutionSample) -> std::io::Result<()> {
        let mut w = open(
            path,
            hash,
            "h,eps_re,eps_im,t1_re,t1_im,t2_re,t2_im,z_re,z_im,u_re,u_im",
        )?;
        for p in &s.points {
            writeln!(
                w,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                s.sector_index, s.eps.re, s.eps.im, p.t1.re, p.t1.im, p.t2.re, p.t2.im, p.z.re, p.z.im,
                p.u.re, p.u.im
            )?;
        }
        Ok(())
    }

    pub fn write_fit(path: &Path, hash: u64, which: &str, overlap: usize, fit: &FitResult) -> std::io::Result<()> {
        let mut w = open(
            path,
            hash,
            "which,overlap,order_estimate,constant_estimate,prefactor,r_squared,eps_abs,delta_abs,ln_delta_abs",
        )?;
        for s in &fit.samples {
            writeln!(
                w,
                "{which},{overlap},{:.9},{:.9e},{:.9e},{:.9},{:.6},{:.9e},{:.9}",
                fit.order_estimate,
                fit.constant_estimate,
                fit.prefactor,
                fit.r_squared,
                s.eps_abs,
                s.delta_abs,
                s.ln_delta_abs
            )?;
        }
        Ok(())
    }

    /// Plot data: abscissa 1/|eps|^{k_hat} against ln |Delta|.
    pub fn write_fit_plot(path: &Path, hash: u64, fit: &FitResult) -> std::io::Result<()> {
        let mut w = open(path, hash, "inv_eps_pow_khat,ln_delta_abs")?;
        for s in &fit.samples {
            writeln!(w, "{:.9e},{:.9}", s.eps_abs.powf(-fit.order_estimate), s.ln_delta_abs)?;
        }
        Ok(())
    }

    pub fn write_bound_report(path: &Path, hash: u64, r: &BoundReport) -> std::io::Result<()> {
        let mut w = open(path, hash, "case,t1_abs,t2_abs,ln_l2,ln_envelope,ln_fitted_constant")?;
        writeln!(w, "head,,,,,{:.9e}", r.c1_fitted.ln())?;
        for row in &r.rows_2a {
            writeln!(w, "2a,{:.6},{:.6},{:.9e},{:.9e},{:.9e}", row.t1_abs, row.t2_abs, row.ln_l2, row.ln_envelope, r.ln_c2a)?;
        }
        for row in &r.rows_2b {
            writeln!(w, "2b,{:.6},{:.6},{:.9e},{:.9e},{:.9e}", row.t1_abs, row.t2_abs, row.ln_l2, row.ln_envelope, r.ln_c2b)?;
        }
        Ok(())
    }

    /// Transform-level grid values: radial coordinate, optional frequency.
    pub fn write_grid_values(
        path: &Path,
        hash: u64,
        rows: &[(f64, Option<f64>, num_complex::Complex64)],
    ) -> std::io::Result<()> {
        let mut w = open(path, hash, "r,m_or_blank,re,im")?;
        for &(r, m, v) in rows {
            match m {
                Some(m) => writeln!(w, "{r:.12e},{m:.6},{:.12e},{:.12e}", v.re, v.im)?,
                None => writeln!(w, "{r:.12e},,{:.12e},{:.12e}", v.re, v.im)?,
            }
        }
        Ok(())
    }

    pub fn write_difference_rows(
        path: &Path,
        hash: u64,
        rows: &[(usize, f64, f64, f64, f64, f64)],
    ) -> std::io::Result<()> {
        let mut w = open(path, hash, "h,eps_abs,direct_abs,e1_abs,e2_abs,e3_abs")?;
        for &(h, eps_abs, direct, e1, e2, e3) in rows {
            writeln!(w, "{h},{eps_abs:.6},{direct:.9e},{e1:.9e},{e2:.9e},{e3:.9e}")?;
        }
        Ok(())
    }
}
