//! Experiment runner: validates problem data, solves the Borel-plane fixed
//! point, evaluates inner/outer solutions, measures flatness orders, and runs
//! the demonstration checks, emitting CSV artifacts throughout.
//!
//! Exit codes: 0 success, 1 domain/convergence failure, 2 usage/parse failure.

use asymptolab::asymptotics::{lemma3_check, mittag_leffler, script_l, wiman_constant};
use asymptolab::borel::small_divisor_demo;
use asymptolab::config::ExperimentConfig;
use asymptolab::geometry::{build_good_covering, check_covering, CoveringKind};
use asymptolab::grids::FrequencyGrid;
use asymptolab::pipeline::Workbench;
use asymptolab::report;
use asymptolab::Complex64;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "asymptolab", version, about = "Borel-plane construction and verification runner")]
struct Cli {
    /// experiment configuration (TOML); the built-in reference when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory (overrides the config; ASYMPTOLAB_OUT overrides this)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads for per-(sector, eps) jobs
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// sampling seed (overrides the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// refuse to run stages whose solve artifacts are missing
    #[arg(long, global = true)]
    no_solve: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// check every hypothesis on the problem data and the covering axioms
    Validate,
    /// solve the Borel-plane fixed point per (sector, eps) and emit omega grids
    Solve,
    /// evaluate inner solutions over the sample grids
    Inner,
    /// evaluate outer solutions over the sample grids
    Outer,
    /// measure exponential-flatness orders of consecutive differences
    Flatness {
        #[arg(long, value_enum)]
        which: Family,
    },
    /// root-collapse, kernel-envelope and special-function demonstrations
    Demos,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Inner,
    Outer,
}

enum RunError {
    Usage(String),
    Domain(String),
}

impl From<asymptolab::Error> for RunError {
    fn from(e: asymptolab::Error) -> Self {
        match e {
            asymptolab::Error::Config(_) => RunError::Usage(e.to_string()),
            other => RunError::Domain(other.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Domain(format!("io: {e}"))
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(RunError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(RunError::Domain(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text).map_err(|e| RunError::Usage(e.to_string()))?
        }
        None => ExperimentConfig::reference(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Ok(env_out) = std::env::var("ASYMPTOLAB_OUT") {
        if !env_out.is_empty() {
            cfg.output_dir = env_out;
        }
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(&cfg.output_dir)
}

fn install_pool(jobs: Option<usize>) {
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn require_solve_artifacts(dir: &Path, no_solve: bool) -> Result<(), RunError> {
    if !no_solve {
        return Ok(());
    }
    let log = dir.join("solve_log.csv");
    if !log.exists() {
        return Err(RunError::Domain(format!(
            "--no-solve: missing solve artifacts ({} not found); run `asymptolab solve` first",
            log.display()
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), RunError> {
    let cfg = load_config(&cli)?;
    install_pool(cli.jobs);
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    let hash = cfg.hash();
    match cli.cmd {
        Cmd::Validate => cmd_validate(&cfg, &dir, hash),
        Cmd::Solve => cmd_solve(&cfg, &dir, hash),
        Cmd::Inner => {
            require_solve_artifacts(&dir, cli.no_solve)?;
            cmd_samples(&cfg, &dir, hash, Family::Inner)
        }
        Cmd::Outer => {
            require_solve_artifacts(&dir, cli.no_solve)?;
            cmd_samples(&cfg, &dir, hash, Family::Outer)
        }
        Cmd::Flatness { which } => cmd_flatness(&cfg, &dir, hash, which),
        Cmd::Demos => cmd_demos(&cfg, &dir, hash),
    }
}

fn cmd_validate(cfg: &ExperimentConfig, dir: &Path, hash: u64) -> Result<(), RunError> {
    let spec = cfg.problem_spec();
    let m_grid = FrequencyGrid::symmetric(cfg.grids.m_cutoff, cfg.grids.n_m);
    let report = asymptolab::spec::validate_spec(&spec, &m_grid)?;
    report::write_validation(&dir.join("validation.csv"), hash, &report)?;
    let mut ok = report.all_pass();
    for row in report.rows.iter().filter(|r| !r.pass) {
        eprintln!("check failed: {} ({})", row.check_name, row.detail);
    }
    for (label, iota, min_opening, kind) in [
        ("outer", cfg.coverings.iota1, cfg.coverings.min_opening1, CoveringKind::OpeningConstrained),
        ("inner", cfg.coverings.iota2, cfg.coverings.min_opening2, CoveringKind::Plain),
    ] {
        match build_good_covering(iota, min_opening, kind, spec.lambda2k2()) {
            Ok(cov) => {
                if let Err(msg) = check_covering(&cov, 10_000, spec.lambda2k2()) {
                    eprintln!("{label} covering check failed: {msg}");
                    ok = false;
                }
            }
            Err(e) => {
                eprintln!("{label} covering infeasible: {e}");
                ok = false;
            }
        }
    }
    if let Err(e) = cfg.coefficient_family(&spec).check_bounds(&spec, &m_grid) {
        eprintln!("coefficient bound check failed: {e}");
        ok = false;
    }
    let taus: Vec<Complex64> =
        (1..24).map(|i| Complex64::from_polar(0.08 * i as f64, 0.37 * i as f64)).collect();
    if let Err(e) = cfg.forcing_spec(&spec).check_bound(&spec, &m_grid, &taus) {
        eprintln!("forcing bound check failed: {e}");
        ok = false;
    }
    if ok {
        println!("validation: all checks passed; report at {}", dir.join("validation.csv").display());
        Ok(())
    } else {
        Err(RunError::Domain("validation failed; see report".into()))
    }
}

fn cmd_solve(cfg: &ExperimentConfig, dir: &Path, hash: u64) -> Result<(), RunError> {
    let wb = Workbench::from_config(cfg)?;
    let ladder = cfg.eps_ladder();
    let mut jobs = Vec::new();
    for h in 0..wb.inner_covering.iota() {
        for (i, eps) in ladder.iter().enumerate() {
            let dir_eps =
                Complex64::from_polar(eps.norm(), wb.inner_covering.overlap_bisector(h));
            jobs.push((h, i, dir_eps));
        }
    }
    let results: Vec<Result<(usize, usize, usize, f64, f64), String>> = jobs
        .par_iter()
        .map(|&(h, i, eps)| {
            let out = wb.canonical_solve(eps).map_err(|e| format!("sector {h}, eps {eps}: {e}"))?;
            let path = dir.join(format!("omega_h{h}_eps{i}.csv"));
            report::write_omega(&path, hash, &out.omega).map_err(|e| e.to_string())?;
            Ok((h, i, out.iterations, out.contraction_factor, out.final_change))
        })
        .collect();
    let mut log = std::io::BufWriter::new(std::fs::File::create(dir.join("solve_log.csv"))?);
    writeln!(log, "# config_hash={hash:016x}")?;
    writeln!(log, "# delta1={}", cfg.tolerances.delta1)?;
    writeln!(log, "sector,eps_index,iterations,contraction_factor,final_change")?;
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok((h, i, iters, contraction, change)) => {
                writeln!(log, "{h},{i},{iters},{contraction:.6e},{change:.6e}")?;
            }
            Err(msg) => failed.push(msg),
        }
    }
    drop(log);
    if failed.is_empty() {
        println!("solve: {} omega grids written to {}", jobs.len(), dir.display());
        Ok(())
    } else {
        for msg in &failed {
            eprintln!("solve failure: {msg}");
        }
        Err(RunError::Domain(format!("{} solve jobs failed", failed.len())))
    }
}

fn cmd_samples(cfg: &ExperimentConfig, dir: &Path, hash: u64, family: Family) -> Result<(), RunError> {
    let wb = Workbench::from_config(cfg)?;
    let ladder = cfg.eps_ladder();
    let iota = match family {
        Family::Inner => wb.inner_covering.iota(),
        Family::Outer => wb.outer_covering.iota(),
    };
    let label = match family {
        Family::Inner => "inner",
        Family::Outer => "outer",
    };
    if ladder.is_empty() {
        println!("{label}: empty ladder, nothing to do");
        return Ok(());
    }
    let mut jobs = Vec::new();
    for h in 0..iota {
        for (i, eps) in ladder.iter().enumerate() {
            jobs.push((h, i, eps.norm()));
        }
    }
    let results: Vec<Result<(usize, usize, usize, usize), String>> = jobs
        .par_iter()
        .map(|&(h, i, eps_abs)| {
            let sample = match family {
                Family::Inner => wb.inner_sample(h, eps_abs),
                Family::Outer => wb.outer_sample(h, eps_abs),
            }
            .map_err(|e| format!("sector {h}, |eps| {eps_abs}: {e}"))?;
            let path = dir.join(format!("{label}_h{h}_eps{i}.csv"));
            report::write_sample(&path, hash, &sample).map_err(|e| e.to_string())?;
            for (tuple, err) in &sample.failures {
                eprintln!("{label} sector {h} |eps| {eps_abs}: skipped {tuple}: {err}");
            }
            Ok((h, i, sample.points.len(), sample.failures.len()))
        })
        .collect();
    let mut hard = Vec::new();
    let mut written = 0usize;
    for r in results {
        match r {
            Ok(_) => written += 1,
            Err(msg) => hard.push(msg),
        }
    }
    if hard.is_empty() {
        println!("{label}: {written} sample files written to {}", dir.display());
        Ok(())
    } else {
        for msg in &hard {
            eprintln!("{label} failure: {msg}");
        }
        Err(RunError::Domain(format!("{} {label} jobs failed", hard.len())))
    }
}

fn cmd_flatness(cfg: &ExperimentConfig, dir: &Path, hash: u64, which: Family) -> Result<(), RunError> {
    let wb = Workbench::from_config(cfg)?;
    let (label, iota, target) = match which {
        Family::Inner => ("inner", wb.inner_covering.iota(), wb.spec.lambda1k1() as f64),
        Family::Outer => ("outer", wb.outer_covering.iota(), wb.spec.lambda2k2() as f64),
    };
    let ladder = match which {
        Family::Inner => cfg.eps.flatness_ladder_inner.clone(),
        Family::Outer => cfg.eps.flatness_ladder_outer.clone(),
    };
    if ladder.len() < 4 {
        return Err(RunError::Domain(format!(
            "flatness needs at least 4 ladder rungs, found {}",
            ladder.len()
        )));
    }
    for h in 0..iota {
        let (fit, worst_id) = match which {
            Family::Inner => wb.inner_flatness(h),
            Family::Outer => wb.outer_flatness(h),
        }?;
        report::write_fit(&dir.join(format!("flatness_{label}_h{h}.csv")), hash, label, h, &fit)?;
        report::write_fit_plot(&dir.join(format!("flatness_{label}_h{h}_plot.csv")), hash, &fit)?;
        // per-rung magnitudes of the deformed decomposition at a central tuple
        let mut rows = Vec::new();
        for &eps_abs in &ladder {
            let (eps, run, tuples) = match which {
                Family::Inner => wb.inner_pair(h, eps_abs),
                Family::Outer => wb.outer_pair(h, eps_abs),
            }?;
            let (t1, t2) = tuples[tuples.len() / 2];
            let d = asymptolab::assembly::difference_at(&run, &wb.spec, eps, t1, t2, cfg.z_samples()[0]);
            rows.push((h, eps_abs, d.direct.norm(), d.e1.norm(), d.e2.norm(), d.e3.norm()));
        }
        report::write_difference_rows(&dir.join(format!("difference_{label}_h{h}.csv")), hash, &rows)?;
        println!(
            "flatness {label} overlap {h}: k = {:.4} (target {target}), A = {:.4e}, R^2 = {:.6}, \
             worst identity error {worst_id:.2e}",
            fit.order_estimate, fit.constant_estimate, fit.r_squared
        );
    }
    Ok(())
}

fn cmd_demos(cfg: &ExperimentConfig, dir: &Path, hash: u64) -> Result<(), RunError> {
    let spec = cfg.problem_spec();
    // root collapse
    let ms: Vec<f64> = (0..21).map(|i| -10.0 + i as f64).collect();
    let demo = small_divisor_demo(&spec, 0.1, &ms);
    report::write_demo(&dir.join("root_collapse.csv"), hash, &demo)?;
    if demo.applicable && !demo.all_inside_half_disc() {
        return Err(RunError::Domain("root collapse demo found roots outside the half disc".into()));
    }
    // kernel decay envelopes
    let d = cfg.geometry.delta.sin();
    let report_l3 = lemma3_check(&spec, spec.rho_disc, d, d, 0.5, 10.0, 0.5, 4)?;
    report::write_bound_report(&dir.join("kernel_envelopes.csv"), hash, &report_l3)?;
    if !report_l3.constants_stable() {
        return Err(RunError::Domain("kernel envelope constants unstable".into()));
    }
    // auxiliary integral: series against quadrature
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("aux_integral.csv"))?);
    writeln!(w, "# config_hash={hash:016x}")?;
    writeln!(w, "x,series,quadrature,terms")?;
    for &x in &[0.5, 1.0, 5.0, 20.0] {
        let v = script_l(x, spec.nu, spec.k_prime, spec.k2, 2000);
        writeln!(w, "{x},{:.12e},{:.12e},{}", v.series, v.quadrature, v.terms_used)?;
        if (v.series - v.quadrature).abs() > 1e-6 * v.series {
            return Err(RunError::Domain(format!("auxiliary integral mismatch at x = {x}")));
        }
    }
    drop(w);
    // Wiman envelope for the appendix parameters
    let alpha = 1.0 - spec.k_prime as f64 / spec.k2 as f64;
    let beta = 1.0 - 1.0 / spec.k2 as f64;
    let zs: Vec<f64> = (0..25).map(|i| 1.0 + 99.0 * i as f64 / 24.0).collect();
    let c2 = wiman_constant(alpha, beta, &zs);
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("wiman.csv"))?);
    writeln!(w, "# config_hash={hash:016x}")?;
    writeln!(w, "z,ln_value,ln_envelope_with_c2")?;
    for &z in &zs {
        let e = mittag_leffler(alpha, beta, z, 100_000);
        let ln_env = (1.0 - beta) / alpha * z.ln() + z.powf(1.0 / alpha) + c2.ln();
        writeln!(w, "{z},{:.9e},{:.9e}", e.ln_value, ln_env)?;
    }
    drop(w);
    // Borel-plane forcing profile on the main ray, transform-level schema
    let wb = Workbench::from_config(cfg)?;
    let forcing = cfg.forcing_spec(&spec);
    let mut rows = Vec::new();
    let eps0 = Complex64::new(0.5 * spec.epsilon0, 0.0);
    for i in 0..40 {
        let r = 1e-3 * (6.0f64 / 1e-3).powf(i as f64 / 39.0);
        let tau = Complex64::from_polar(r, wb.main_direction);
        rows.push((r, None, forcing.eval(tau, 0.0, eps0, &spec)));
        for &m in &[1.0, 3.0] {
            rows.push((r, Some(m), forcing.eval(tau, m, eps0, &spec)));
        }
    }
    report::write_grid_values(&dir.join("forcing_borel_profile.csv"), hash, &rows)?;
    println!("demos: reports written to {}", dir.display());
    Ok(())
}
