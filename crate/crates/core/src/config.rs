//! Experiment configuration: a TOML file drives the whole pipeline.

use crate::assembly::AnnularSector;
use crate::error::{Error, Result};
use crate::geometry::Sector;
use crate::poly::Poly;
use crate::spec::{
    Annulus, CoeffProfile, CoefficientFamily, ForcingProfile, ForcingSpec, ProblemSpec,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

fn c(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecConfig {
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
    pub delta_l1: Vec<u32>,
    pub delta_l2: Vec<u32>,
    pub delta_exp_top: u32,
    pub delta_exp: Vec<Vec<u32>>,
    /// polynomial coefficients, constant term first, complex as [re, im]
    pub q: Vec<[f64; 2]>,
    pub r_d1d2: Vec<[f64; 2]>,
    /// r_lower[l1-1][l2-1] is a coefficient list
    pub r_lower: Vec<Vec<Vec<[f64; 2]>>>,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
    pub epsilon0: f64,
    pub annulus: AnnulusConfig,
    pub rho_disc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnulusConfig {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub beta_angle: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForcingConfig {
    /// "linear_gaussian" or "exp_gaussian"
    pub kind: String,
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub eps_slope: f64,
    #[serde(default)]
    pub nu0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub amplitude: f64,
    pub width: f64,
    pub eps_slope: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringsConfig {
    pub iota1: usize,
    pub iota2: usize,
    #[serde(default)]
    pub min_opening1: f64,
    #[serde(default)]
    pub min_opening2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridsConfig {
    /// Gauss-Legendre points per radial panel
    pub n_ray: usize,
    /// cap on the radial truncation radius
    pub r_max: f64,
    /// geometric panel ratio
    pub ratio: f64,
    /// half node count of the frequency grid (2 n_m + 1 nodes)
    pub n_m: usize,
    /// frequency cutoff
    pub m_cutoff: f64,
}

fn default_delta1() -> f64 {
    0.25
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TolerancesConfig {
    pub quad_tol: f64,
    pub fourier_tol: f64,
    pub fp_tol: f64,
    /// cosine floor of the Laplace path-admissibility condition
    #[serde(default = "default_delta1")]
    pub delta1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorConfig {
    pub direction: f64,
    pub half_opening: f64,
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub t1: SectorConfig,
    pub t2: SectorConfig,
    pub chi2: AnnularSector,
    /// outer t2-disc radius
    pub rho2: f64,
    /// evaluation strip half-width (must be < beta)
    pub beta_prime: f64,
    /// cone margin delta
    pub delta: f64,
    /// angular safety margin carving root gaps
    pub gap_safety: f64,
    pub t1_abs: Vec<f64>,
    pub t1_args: Vec<f64>,
    pub x2_abs: Vec<f64>,
    pub x2_args: Vec<f64>,
    pub t2_abs_outer: Vec<f64>,
    pub z_samples: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsConfig {
    /// general ladder, complex values as [re, im]
    pub ladder: Vec<[f64; 2]>,
    /// moduli for inner flatness runs (directions come from overlap bisectors)
    pub flatness_ladder_inner: Vec<f64>,
    pub flatness_ladder_outer: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: String,
    pub spec: SpecConfig,
    pub forcing: ForcingConfig,
    pub coupling: CouplingConfig,
    pub coverings: CoveringsConfig,
    pub grids: GridsConfig,
    pub tolerances: TolerancesConfig,
    pub geometry: GeometryConfig,
    pub eps: EpsConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse failure: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.grids.n_ray < 4 || self.grids.n_m < 4 {
            return Err(Error::Config("grid counts must be at least 4".into()));
        }
        let samples = [
            self.geometry.t1_abs.len() * self.geometry.t1_args.len(),
            self.geometry.x2_abs.len() * self.geometry.x2_args.len(),
            self.geometry.z_samples.len(),
        ];
        if samples.iter().any(|&n| n < 4) {
            return Err(Error::Config("sample grids must have at least 4 points".into()));
        }
        let mut prev = f64::INFINITY;
        for &pair in &self.eps.ladder {
            let a = c(pair).norm();
            if a >= self.spec.epsilon0 {
                return Err(Error::Config(format!(
                    "eps ladder entry |{a}| not below epsilon0 = {}",
                    self.spec.epsilon0
                )));
            }
            if a >= prev {
                return Err(Error::Config("eps ladder moduli must be strictly decreasing".into()));
            }
            prev = a;
        }
        for ladder in [&self.eps.flatness_ladder_inner, &self.eps.flatness_ladder_outer] {
            let mut prev = f64::INFINITY;
            for &a in ladder {
                if a >= self.spec.epsilon0 || a >= prev {
                    return Err(Error::Config("flatness ladder must be strictly decreasing below epsilon0".into()));
                }
                prev = a;
            }
        }
        if self.geometry.beta_prime >= self.spec.beta {
            return Err(Error::Config("beta_prime must be below beta".into()));
        }
        match self.forcing.kind.as_str() {
            "linear_gaussian" | "exp_gaussian" => {}
            other => return Err(Error::Config(format!("unknown forcing kind {other}"))),
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        let s = &self.spec;
        ProblemSpec {
            k1: s.k1,
            k2: s.k2,
            k_prime: s.k_prime,
            d1: s.d1,
            d2: s.d2,
            lambda1: s.lambda1,
            lambda2: s.lambda2,
            mu2: s.mu2,
            delta_d1: s.delta_d1,
            delta_d2: s.delta_d2,
            delta_l1: s.delta_l1.clone(),
            delta_l2: s.delta_l2.clone(),
            delta_exp_top: s.delta_exp_top,
            delta_exp: s.delta_exp.clone(),
            q_poly: Poly::new(s.q.iter().map(|&p| c(p)).collect()),
            r_d1d2: Poly::new(s.r_d1d2.iter().map(|&p| c(p)).collect()),
            r_lower: s
                .r_lower
                .iter()
                .map(|row| row.iter().map(|cs| Poly::new(cs.iter().map(|&p| c(p)).collect())).collect())
                .collect(),
            beta: s.beta,
            mu: s.mu,
            nu: s.nu,
            epsilon0: s.epsilon0,
            annulus: Annulus {
                r1: s.annulus.r1,
                r2: s.annulus.r2,
                alpha: s.annulus.alpha,
                beta_angle: s.annulus.beta_angle,
            },
            rho_disc: s.rho_disc,
        }
    }

    pub fn coefficient_family(&self, spec: &ProblemSpec) -> CoefficientFamily {
        // the Gaussian profile's weighted peak depends on (mu, beta, width);
        // locate it numerically for the certified bound
        let peak = |width: f64| -> f64 {
            let mut best: f64 = 0.0;
            for i in 0..4000 {
                let m = i as f64 * 0.01;
                let v = (1.0 + m).powf(spec.mu) * (spec.beta * m).exp()
                    * (-0.5 * (m / width) * (m / width)).exp();
                best = best.max(v);
            }
            best
        };
        let cc = &self.coupling;
        let bound = cc.amplitude * (1.0 + cc.eps_slope.abs()) * peak(cc.width) * 1.0000001;
        let mut profiles = Vec::new();
        let mut bounds = Vec::new();
        for l1 in 1..self.spec.d1 {
            let mut prow = Vec::new();
            let mut brow = Vec::new();
            for _l2 in 1..self.spec.d2 {
                let _ = l1;
                prow.push(CoeffProfile::Gaussian {
                    amplitude: cc.amplitude,
                    width: cc.width,
                    eps_slope: cc.eps_slope,
                });
                brow.push(bound);
            }
            profiles.push(prow);
            bounds.push(brow);
        }
        CoefficientFamily { profiles, bounds }
    }

    pub fn forcing_spec(&self, spec: &ProblemSpec) -> ForcingSpec {
        let f = &self.forcing;
        let peak = {
            let mut best: f64 = 0.0;
            for i in 0..4000 {
                let m = i as f64 * 0.01;
                let v = (1.0 + m).powf(spec.mu) * (spec.beta * m).exp()
                    * (-0.5 * (m / f.width) * (m / f.width)).exp();
                best = best.max(v);
            }
            best
        };
        match f.kind.as_str() {
            "linear_gaussian" => ForcingSpec {
                profile: ForcingProfile::LinearGaussian {
                    amplitude: f.amplitude,
                    width: f.width,
                    eps_slope: f.eps_slope,
                },
                c_psi: f.amplitude * (1.0 + f.eps_slope.abs()) * peak * 1.0000001,
                nu_f: 0.0,
            },
            "exp_gaussian" => ForcingSpec {
                profile: ForcingProfile::ExpGaussian {
                    amplitude: f.amplitude,
                    width: f.width,
                    nu0: f.nu0,
                },
                c_psi: f.amplitude * peak * 1.0000001,
                nu_f: f.nu0,
            },
            _ => unreachable!("validated"),
        }
    }

    pub fn t1_sector(&self) -> Sector {
        Sector {
            direction: self.geometry.t1.direction,
            half_opening: self.geometry.t1.half_opening,
            radius: self.geometry.t1.radius,
            inner_radius: 0.0,
        }
    }

    pub fn t2_sector(&self) -> Sector {
        Sector {
            direction: self.geometry.t2.direction,
            half_opening: self.geometry.t2.half_opening,
            radius: self.geometry.t2.radius,
            inner_radius: 0.0,
        }
    }

    pub fn t1_samples(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        for &r in &self.geometry.t1_abs {
            for &a in &self.geometry.t1_args {
                out.push(Complex64::from_polar(r, self.geometry.t1.direction + a));
            }
        }
        out
    }

    pub fn x2_samples(&self) -> Vec<Complex64> {
        let mut out = Vec::new();
        let center = self.geometry.chi2.arg_center();
        for &r in &self.geometry.x2_abs {
            for &a in &self.geometry.x2_args {
                out.push(Complex64::from_polar(r, center + a));
            }
        }
        out
    }

    /// Outer t2 samples at a planner-chosen argument.
    pub fn t2_outer_samples(&self, arg: f64) -> Vec<Complex64> {
        self.geometry
            .t2_abs_outer
            .iter()
            .map(|&r| Complex64::from_polar(r, arg))
            .collect()
    }

    pub fn z_samples(&self) -> Vec<Complex64> {
        self.geometry.z_samples.iter().map(|&p| c(p)).collect()
    }

    pub fn eps_ladder(&self) -> Vec<Complex64> {
        self.eps.ladder.iter().map(|&p| c(p)).collect()
    }

    /// FNV-1a over the canonical TOML text, with the output location blanked
    /// so the hash identifies the experiment, not where it lands; recorded in
    /// every emitted CSV.
    pub fn hash(&self) -> u64 {
        let mut canonical = self.clone();
        canonical.output_dir = String::new();
        let text = canonical.to_toml();
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    /// The built-in reference experiment.
    pub fn reference() -> Self {
        let deg = |d: f64| d.to_radians();
        ExperimentConfig {
            seed: 42,
            output_dir: "out".into(),
            spec: SpecConfig {
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
                q: vec![[2.0, 0.0]],
                r_d1d2: vec![[1.0, 0.0]],
                r_lower: vec![vec![vec![[1.0, 0.0]]]],
                beta: 1.0,
                mu: 3.0,
                nu: 0.1,
                epsilon0: 0.25,
                annulus: AnnulusConfig {
                    r1: 1.0,
                    r2: 4.0,
                    alpha: -std::f64::consts::FRAC_PI_8,
                    beta_angle: std::f64::consts::FRAC_PI_8,
                },
                rho_disc: 0.35,
            },
            forcing: ForcingConfig {
                kind: "linear_gaussian".into(),
                amplitude: 0.05,
                width: 1.0,
                eps_slope: 0.2,
                nu0: 0.0,
            },
            coupling: CouplingConfig { amplitude: 0.01, width: 1.0, eps_slope: 0.3 },
            coverings: CoveringsConfig {
                iota1: 2,
                iota2: 2,
                min_opening1: 0.0,
                min_opening2: 0.0,
            },
            grids: GridsConfig { n_ray: 20, r_max: 40.0, ratio: 1.6, n_m: 48, m_cutoff: 12.0 },
            tolerances: TolerancesConfig { quad_tol: 1e-10, fourier_tol: 1e-10, fp_tol: 1e-10, delta1: 0.25 },
            geometry: GeometryConfig {
                t1: SectorConfig { direction: 0.0, half_opening: deg(2.0), radius: Some(360.0) },
                t2: SectorConfig { direction: 0.0, half_opening: deg(150.0), radius: None },
                chi2: AnnularSector {
                    r_min: 0.75,
                    r_max: 1.25,
                    arg_min: deg(-3.0),
                    arg_max: deg(3.0),
                },
                rho2: 1.0,
                beta_prime: 0.5,
                delta: std::f64::consts::PI / 12.0,
                gap_safety: deg(3.0),
                t1_abs: vec![175.0, 349.0],
                t1_args: vec![deg(-1.5), 0.0, deg(1.5)],
                x2_abs: vec![0.85, 1.1],
                x2_args: vec![deg(-2.0), deg(2.0)],
                t2_abs_outer: vec![0.55, 1.0],
                z_samples: vec![[0.0, 0.0], [0.6, 0.3], [-0.45, -0.35], [1.1, 0.0]],
            },
            eps: EpsConfig {
                ladder: vec![[0.2, 0.0], [0.14, 0.0], [0.1, 0.0], [0.07, 0.0], [0.05, 0.0]],
                flatness_ladder_inner: vec![0.2, 0.185, 0.171, 0.158, 0.146],
                flatness_ladder_outer: vec![0.2, 0.19, 0.181, 0.172, 0.163],
            },
        }
    }
}
