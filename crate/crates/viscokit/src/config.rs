//! Run configuration files (TOML, or JSON when the text starts with `{`).
//!
//! ```toml
//! seed = 7
//!
//! [material]
//! formulation = "gibbs"          # or "helmholtz"
//! density = 1000.0
//! volumetric = { type = "incompressible" }   # or { type = "ln2" | "quad", kappa = ... }
//!
//! [[material.equilibrium]]
//! mu = 4.225e5
//! strain = "CR:m=1.2,n=1.4"
//!
//! [[material.maxwell]]
//! mu = 4.225e5
//! tau = 0.5                       # or eta = ...
//! strain = "CR:m=1.2,n=1.4"
//! viscous_strain = "CR:m=1.2,n=1.4"   # defaults to strain
//!
//! [program]
//! t_end = 200.0
//! dt = 0.05
//!
//! [program.load]
//! mode = "stress_control_uniaxial"
//! traction = { type = "ramp_hold", peak = 1.737e6, ramp_time = 1.0 }
//!
//! [solver]                        # all keys optional
//! tol_relative = 1e-10
//! tangent = "frozen"
//!
//! [output]
//! csv = "creep.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::calibrate::FitTemplate;
use crate::driver::{DriverSettings, GlobalTangent, LoadProgram, ProgramMode};
use crate::hyperelastic::{EquilibriumBranch, Volumetric};
use crate::strains::ScaleFunction;
use crate::viscoelastic::{Formulation, Material, MaxwellBranch, Viscosity};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Syntax(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub material: Option<MaterialConfig>,
    #[serde(default)]
    pub program: Option<ProgramConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub fit: Option<FitTemplate>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default)]
    pub formulation: Formulation,
    #[serde(default = "unit")]
    pub density: f64,
    pub volumetric: Volumetric,
    #[serde(default)]
    pub equilibrium: Vec<EquilibriumConfig>,
    #[serde(default)]
    pub maxwell: Vec<MaxwellConfig>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    pub mu: f64,
    pub strain: String,
    #[serde(default)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaxwellConfig {
    pub mu: f64,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    pub strain: String,
    #[serde(default)]
    pub viscous_strain: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramConfig {
    pub t_end: f64,
    pub dt: f64,
    pub load: ProgramMode,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol_relative: Option<f64>,
    pub tol_absolute: Option<f64>,
    pub max_iterations: Option<usize>,
    pub local_tol_relative: Option<f64>,
    pub local_tol_absolute: Option<f64>,
    pub local_max_iterations: Option<usize>,
    pub tangent: Option<GlobalTangent>,
    pub max_cuts: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

fn parse_strain(key: &str, text: &str) -> Result<ScaleFunction, ConfigError> {
    text.parse().map_err(|e: crate::Error| invalid(key, e.to_string()))
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Syntax(format!("JSON error: {e}")))
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string().trim_end().to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Syntax(m) => ConfigError::Syntax(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn material(&self) -> Result<Material, ConfigError> {
        let table = self.material.as_ref().ok_or_else(|| invalid("material", "section is missing"))?;
        let density = positive("material.density", table.density)?;
        if let Some(k) = table.volumetric.kappa() {
            positive("material.volumetric.kappa", k)?;
        }
        if table.equilibrium.is_empty() && table.maxwell.is_empty() {
            return Err(invalid("material", "at least one equilibrium or maxwell branch is required"));
        }
        let mut equilibrium = Vec::new();
        for (k, b) in table.equilibrium.iter().enumerate() {
            let key = format!("material.equilibrium[{k}]");
            let mu = positive(&format!("{key}.mu"), b.mu)?;
            let strain = parse_strain(&format!("{key}.strain"), &b.strain)?;
            let mut branch = EquilibriumBranch::new(mu, strain);
            if let Some(kappa) = b.kappa {
                branch.kappa = Some(positive(&format!("{key}.kappa"), kappa)?);
            }
            equilibrium.push(branch);
        }
        let mut maxwell = Vec::new();
        for (k, b) in table.maxwell.iter().enumerate() {
            let key = format!("material.maxwell[{k}]");
            let mu = positive(&format!("{key}.mu"), b.mu)?;
            let eta = match (b.tau, b.eta) {
                (Some(tau), None) => positive(&format!("{key}.tau"), tau)? * mu,
                (None, Some(eta)) => positive(&format!("{key}.eta"), eta)?,
                _ => return Err(invalid(&key, "exactly one of tau and eta is required")),
            };
            let strain = parse_strain(&format!("{key}.strain"), &b.strain)?;
            let viscous_strain = match &b.viscous_strain {
                Some(s) => parse_strain(&format!("{key}.viscous_strain"), s)?,
                None => strain,
            };
            maxwell.push(MaxwellBranch {
                mu,
                viscosity: Viscosity::Isotropic(eta),
                strain,
                viscous_strain,
            });
        }
        let material = Material {
            formulation: table.formulation,
            volumetric: table.volumetric,
            equilibrium,
            maxwell,
            density,
        };
        material.validate().map_err(|e| invalid("material", e.to_string()))?;
        Ok(material)
    }

    pub fn program(&self) -> Result<LoadProgram, ConfigError> {
        let table = self.program.as_ref().ok_or_else(|| invalid("program", "section is missing"))?;
        let program = LoadProgram {
            mode: table.load.clone(),
            t_end: positive("program.t_end", table.t_end)?,
            dt: positive("program.dt", table.dt)?,
        };
        program.validate().map_err(|e| invalid("program.load", e.to_string()))?;
        Ok(program)
    }

    pub fn settings(&self) -> Result<DriverSettings, ConfigError> {
        let s = &self.solver;
        let mut d = DriverSettings::default();
        let tol = |key: &str, v: Option<f64>, slot: &mut f64| -> Result<(), ConfigError> {
            if let Some(v) = v {
                *slot = positive(&format!("solver.{key}"), v)?;
            }
            Ok(())
        };
        tol("tol_relative", s.tol_relative, &mut d.tol_relative)?;
        tol("tol_absolute", s.tol_absolute, &mut d.tol_absolute)?;
        tol("local_tol_relative", s.local_tol_relative, &mut d.local.tol_relative)?;
        tol("local_tol_absolute", s.local_tol_absolute, &mut d.local.tol_absolute)?;
        for (key, v, slot) in [
            ("max_iterations", s.max_iterations, &mut d.max_iterations),
            ("local_max_iterations", s.local_max_iterations, &mut d.local.max_iterations),
        ] {
            if let Some(v) = v {
                if v == 0 {
                    return Err(invalid(format!("solver.{key}"), "must be at least 1"));
                }
                *slot = v;
            }
        }
        if let Some(t) = s.tangent {
            d.tangent = t;
        }
        if let Some(c) = s.max_cuts {
            d.max_cuts = c;
        }
        Ok(d)
    }

    pub fn fit_template(&self) -> Result<Option<FitTemplate>, ConfigError> {
        match &self.fit {
            None => Ok(None),
            Some(t) => {
                let mut t = t.clone();
                if let Some(seed) = self.seed {
                    t.seed = seed;
                }
                t.validate().map_err(|e| invalid("fit", e.to_string()))?;
                Ok(Some(t))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CREEP: &str = r#"
[material]
density = 1000.0
volumetric = { type = "incompressible" }

[[material.equilibrium]]
mu = 4.225e5
strain = "CR:m=1.2,n=1.4"

[[material.maxwell]]
mu = 4.225e5
tau = 0.5
strain = "CR:m=1.2,n=1.4"

[program]
t_end = 200.0
dt = 0.05

[program.load]
mode = "stress_control_uniaxial"
traction = { type = "ramp_hold", peak = 1.737e6, ramp_time = 1.0 }
"#;

    #[test]
    fn parses_creep() {
        let c = RunConfig::parse(CREEP).unwrap();
        let m = c.material().unwrap();
        assert_eq!(m.maxwell[0].tau(), Some(0.5));
        assert!(m.volumetric.is_incompressible());
        let p = c.program().unwrap();
        assert_eq!(p.times().len(), 4000);
        assert_eq!(c.settings().unwrap(), DriverSettings::default());
    }

    #[test]
    fn negative_mu_names_key() {
        let text = CREEP.replace("mu = 4.225e5\ntau", "mu = -4.225e5\ntau");
        let err = RunConfig::parse(&text).unwrap().material().unwrap_err();
        assert!(err.to_string().starts_with("material.maxwell[0].mu:"), "{err}");
    }

    #[test]
    fn bad_strain_names_key() {
        let text = CREEP.replacen("CR:m=1.2,n=1.4", "SH:m=0,n=1", 1);
        let err = RunConfig::parse(&text).unwrap().material().unwrap_err();
        assert!(err.to_string().starts_with("material.equilibrium[0].strain:"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected_with_line() {
        let text = CREEP.replace("density = 1000.0", "density = 1000.0\ncolour = 3");
        let err = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("colour") && err.contains("line 4"), "{err}");
        let text = CREEP.replace("ramp_time = 1.0 }", "ramp_time = 1.0, slope = 2 }");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn json_accepted() {
        let json = r#"{"material": {"volumetric": {"type": "quad", "kappa": 1e6},
            "equilibrium": [{"mu": 1.0, "strain": "hencky"}]},
            "program": {"t_end": 1.0, "dt": 0.1,
            "load": {"mode": "cyclic_shear", "amplitude": 0.1, "omega": 0.3}}}"#;
        let c = RunConfig::parse(json).unwrap();
        assert!(c.material().unwrap().equilibrium[0].strain.is_hencky());
        assert_eq!(c.program().unwrap().times().len(), 10);
    }
}
