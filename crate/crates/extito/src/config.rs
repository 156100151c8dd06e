//! TOML experiment configuration.
//!
//! Four sections, all optional, every key typed and checked:
//!
//! ```toml
//! [process]
//! kind = "brownian"        # brownian | truncated_stable | compound_poisson
//!                          # | brownian_plus_jumps | diffusion_2d
//! sigma2 = 1.0
//!
//! [experiment]
//! horizon = 1.0
//! dt = [1e-2, 1e-3]
//! paths = 100
//! seed_base = 0
//!
//! [functions]
//! u = "identity"
//! f = "square"
//!
//! [tolerances]
//! residual_mean_abs = 0.05
//! ```
//!
//! Unknown keys are rejected. `EXTITO_SEED_BASE` overrides `seed_base`.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use extito_core::harness::{ExperimentConfig, Tolerances};
use extito_core::mc::StartProtocol;
use extito_core::quad::QuadConfig;
use extito_core::{JumpLaw, ProcessSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::parse::{parse_function, parse_function2};

pub const SEED_ENV: &str = "EXTITO_SEED_BASE";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub process: ProcessSection,
    pub experiment: ExperimentSection,
    pub functions: FunctionsSection,
    pub tolerances: TolerancesSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessSection {
    pub kind: String,
    pub sigma2: Option<f64>,
    pub alpha: Option<f64>,
    pub scale: Option<f64>,
    pub delta: Option<f64>,
    pub rate: Option<f64>,
    /// `two_point`, `uniform` or `normal`.
    pub jump_law: Option<String>,
    /// Size, half-width or standard deviation of the jump law.
    pub jump_param: Option<f64>,
    pub a_matrix: Option<[[f64; 2]; 2]>,
    pub start: Option<Vec<f64>>,
}

impl Default for ProcessSection {
    fn default() -> Self {
        ProcessSection {
            kind: "brownian".into(),
            sigma2: None,
            alpha: None,
            scale: None,
            delta: None,
            rate: None,
            jump_law: None,
            jump_param: None,
            a_matrix: None,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub horizon: f64,
    pub dt: Vec<f64>,
    pub paths: usize,
    pub seed_base: u64,
    pub level_cells: usize,
    pub eval_points: Option<usize>,
    pub checkpoints: Vec<f64>,
    /// `fixed` or `stationary`.
    pub start_protocol: String,
    pub burn_in: Option<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let d = ExperimentConfig::default();
        ExperimentSection {
            horizon: d.horizon,
            dt: d.dts,
            paths: d.n_paths,
            seed_base: d.seed_base,
            level_cells: d.level_cells,
            eval_points: None,
            checkpoints: d.checkpoints,
            start_protocol: "fixed".into(),
            burn_in: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionsSection {
    pub u: String,
    pub f: String,
    pub f2: String,
    pub occupation_f: String,
    pub level: f64,
    pub bandwidth: f64,
}

impl Default for FunctionsSection {
    fn default() -> Self {
        FunctionsSection {
            u: "identity".into(),
            f: "square".into(),
            f2: "product".into(),
            occupation_f: "indicator(-1, 1)".into(),
            level: 0.0,
            bandwidth: 0.02,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolerancesSection {
    pub exact: Option<f64>,
    pub residual_mean_abs: Option<f64>,
    pub relative: Option<f64>,
    pub kernel_relative: Option<f64>,
    pub z_threshold: Option<f64>,
    pub min_samples: Option<usize>,
    pub trend_floor: Option<f64>,
}

/// Command-line overrides, applied after the file and the environment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Vec<f64>,
}

/// A parsed config with the digest of the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub file: ConfigFile,
    pub hash: String,
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| anyhow!("{}", e.message().trim()))?;
    Ok(LoadedConfig { file, hash: hex::encode(Sha256::digest(text.as_bytes())) })
}

/// Reads `path`, or the built-in defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<LoadedConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("in {}", p.display()))
        }
        None => parse_config(""),
    }
}

fn process_spec(p: &ProcessSection) -> Result<ProcessSpec> {
    let get = |v: Option<f64>, name: &str| v.ok_or_else(|| anyhow!("[process] kind `{}` needs `{name}`", p.kind));
    let mut spec = match p.kind.as_str() {
        "brownian" => ProcessSpec::brownian(p.sigma2.unwrap_or(1.0)),
        "truncated_stable" => {
            ProcessSpec::truncated_stable(get(p.alpha, "alpha")?, p.scale.unwrap_or(1.0), get(p.delta, "delta")?)
        }
        "brownian_plus_jumps" => ProcessSpec::brownian_plus_jumps(
            p.sigma2.unwrap_or(1.0),
            get(p.alpha, "alpha")?,
            p.scale.unwrap_or(1.0),
            get(p.delta, "delta")?,
        ),
        "compound_poisson" => {
            let param = get(p.jump_param, "jump_param")?;
            let law = match p.jump_law.as_deref().unwrap_or("normal") {
                "two_point" => JumpLaw::TwoPoint { size: param },
                "uniform" => JumpLaw::Uniform { half_width: param },
                "normal" => JumpLaw::Normal { sd: param },
                other => bail!("[process] unknown jump_law `{other}`"),
            };
            ProcessSpec::compound_poisson(get(p.rate, "rate")?, law)
        }
        "diffusion_2d" => ProcessSpec::diffusion_2d(p.a_matrix.unwrap_or([[1.0, 0.0], [0.0, 1.0]])),
        other => bail!("[process] unknown kind `{other}`"),
    };
    if p.kind != "brownian" && p.kind != "brownian_plus_jumps" && p.sigma2.is_some() {
        bail!("[process] `sigma2` does not apply to kind `{}`", p.kind);
    }
    if let Some(start) = &p.start {
        if start.len() != spec.dim() {
            bail!("[process] `start` needs {} value(s)", spec.dim());
        }
        spec.start[..start.len()].copy_from_slice(start);
    }
    spec.validate()?;
    Ok(spec)
}

/// Builds the experiment, applying `EXTITO_SEED_BASE` and then `overrides`.
pub fn experiment_config(cfg: &LoadedConfig, overrides: &Overrides) -> Result<ExperimentConfig> {
    let f = &cfg.file;
    let e = &f.experiment;
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| anyhow!("{SEED_ENV}=`{v}` is not an unsigned integer"))?),
        Err(_) => None,
    };
    let start = match e.start_protocol.as_str() {
        "fixed" => StartProtocol::Fixed,
        "stationary" => match e.burn_in {
            Some(b) => StartProtocol::Stationary { burn_in: b },
            None => StartProtocol::stationary_for(e.horizon),
        },
        other => bail!("[experiment] unknown start_protocol `{other}`"),
    };
    let d = Tolerances::default();
    let t = &f.tolerances;
    let out = ExperimentConfig {
        spec: process_spec(&f.process)?,
        u: parse_function(&f.functions.u)?,
        f: parse_function(&f.functions.f)?,
        f2: parse_function2(&f.functions.f2)?,
        occupation_f: parse_function(&f.functions.occupation_f)?,
        level: f.functions.level,
        bandwidth: f.functions.bandwidth,
        horizon: e.horizon,
        dts: if overrides.dt.is_empty() { e.dt.clone() } else { overrides.dt.clone() },
        n_paths: overrides.paths.unwrap_or(e.paths),
        seed_base: overrides.seed.or(env_seed).unwrap_or(e.seed_base),
        level_cells: e.level_cells,
        eval_points: e.eval_points,
        checkpoints: e.checkpoints.clone(),
        start,
        tolerances: Tolerances {
            exact: t.exact.unwrap_or(d.exact),
            residual_mean_abs: t.residual_mean_abs.unwrap_or(d.residual_mean_abs),
            relative: t.relative.unwrap_or(d.relative),
            kernel_relative: t.kernel_relative.unwrap_or(d.kernel_relative),
            z_threshold: t.z_threshold.unwrap_or(d.z_threshold),
            min_samples: t.min_samples.unwrap_or(d.min_samples),
            trend_floor: t.trend_floor.unwrap_or(d.trend_floor),
        },
        quad: QuadConfig::default(),
    };
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = parse_config("").unwrap();
        let e = experiment_config(&c, &Overrides::default()).unwrap();
        assert_eq!(e.spec, ProcessSpec::brownian(1.0));
        assert_eq!(e.dts, vec![1e-2, 1e-3]);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("[process]\nkind = \"brownian\"\nsigma = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
        let err = parse_config("[bogus]\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_win() {
        let c = parse_config("[experiment]\nseed_base = 5\npaths = 40\n").unwrap();
        let o = Overrides { seed: Some(9), paths: Some(50), dt: vec![0.1, 0.05] };
        let e = experiment_config(&c, &o).unwrap();
        assert_eq!((e.seed_base, e.n_paths, e.dts.clone()), (9, 50, vec![0.1, 0.05]));
    }

    #[test]
    fn stable_needs_its_parameters() {
        let c = parse_config("[process]\nkind = \"truncated_stable\"\nalpha = 1.2\n").unwrap();
        let err = experiment_config(&c, &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("delta"));
    }
}
