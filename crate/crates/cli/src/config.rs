//! Run configuration: a single JSON document, every field optional except the grid.

use flatband_core::fock::Variant;
use flatband_core::formfactor::{ModelKind, DEFAULT_RANK_TOL};
use flatband_core::hamiltonian::{KernelParams, DEFAULT_QCUT_FACTOR};
use flatband_core::kernelsolve::DEFAULT_EIG_TOL;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const MAX_MODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    GridCheck,
    FormfactorCertify,
    KernelDirect,
    KernelCharacterize,
    SlaterSpan,
    ReptheoryAudit,
    IdentitySuite,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::GridCheck,
        Task::FormfactorCertify,
        Task::KernelDirect,
        Task::KernelCharacterize,
        Task::SlaterSpan,
        Task::ReptheoryAudit,
        Task::IdentitySuite,
    ];

    /// Tasks that must run first.
    pub fn requires(&self) -> &'static [Task] {
        match self {
            Task::GridCheck => &[],
            Task::FormfactorCertify => &[Task::GridCheck],
            Task::KernelDirect | Task::KernelCharacterize => {
                &[Task::GridCheck, Task::FormfactorCertify]
            }
            Task::SlaterSpan => &[Task::GridCheck],
            Task::ReptheoryAudit => &[],
            Task::IdentitySuite => &[Task::GridCheck],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Magnetic length squared; `null` means one flux quantum per cell.
    #[serde(default)]
    pub ell2: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples_per_axis: usize,
}

fn default_samples() -> usize {
    64
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Lll,
            ell2: None,
            samples_per_axis: default_samples(),
        }
    }
}

/// `"LLL"` or `{"kind": "LLL", ...}`.
#[derive(Deserialize)]
#[serde(untagged)]
enum ModelInput {
    Name(ModelKind),
    Full(ModelConfig),
}

fn model_from_input<'de, D: serde::Deserializer<'de>>(d: D) -> Result<ModelConfig, D::Error> {
    Ok(match ModelInput::deserialize(d)? {
        ModelInput::Name(kind) => ModelConfig {
            kind,
            ..ModelConfig::default()
        },
        ModelInput::Full(m) => m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_eig")]
    pub eig: f64,
    #[serde(default = "default_residual")]
    pub residual: f64,
    #[serde(default = "default_rank")]
    pub rank: f64,
}

fn default_eig() -> f64 {
    DEFAULT_EIG_TOL
}
fn default_residual() -> f64 {
    1e-8
}
fn default_rank() -> f64 {
    DEFAULT_RANK_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eig: default_eig(),
            residual: default_residual(),
            rank: default_rank(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    #[serde(with = "variant_name")]
    pub variant: Variant,
    pub nkx: usize,
    pub nky: usize,
    #[serde(default, deserialize_with = "model_from_input")]
    pub model: ModelConfig,
    #[serde(default = "default_qcut")]
    pub qcut_factor: f64,
    #[serde(default)]
    pub kernel: KernelParams,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_tasks")]
    pub tasks: Vec<Task>,
}

fn default_qcut() -> f64 {
    DEFAULT_QCUT_FACTOR
}

fn all_tasks() -> Vec<Task> {
    Task::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Short and long variant names.
pub fn parse_variant(s: &str) -> Result<Variant, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "spinless" | "spinless-valleyless" | "spinlessvalleyless" => {
            Ok(Variant::SpinlessValleyless)
        }
        "valleyful" | "spinless-valleyful" | "spinlessvalleyful" => Ok(Variant::SpinlessValleyful),
        "spinful" | "spinful-valleyful" | "spinfulvalleyful" => Ok(Variant::SpinfulValleyful),
        _ => err(format!(
            "unknown variant '{s}' (expected spinless, valleyful or spinful)"
        )),
    }
}

pub fn short_name(v: Variant) -> &'static str {
    match v {
        Variant::SpinlessValleyless => "spinless",
        Variant::SpinlessValleyful => "valleyful",
        Variant::SpinfulValleyful => "spinful",
    }
}

mod variant_name {
    use super::*;

    pub fn serialize<S: serde::Serializer>(v: &Variant, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(short_name(*v))
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Variant, D::Error> {
        let s = String::deserialize(d)?;
        parse_variant(&s).map_err(serde::de::Error::custom)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn nk(&self) -> usize {
        self.nkx * self.nky
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nkx == 0 || self.nky == 0 {
            return err(format!(
                "invalid grid: nkx = {}, nky = {} (both must be ≥ 1)",
                self.nkx, self.nky
            ));
        }
        let modes = 2 * self.variant.nocc() * self.nk();
        if modes > MAX_MODES {
            return err(format!("{modes} modes exceed the limit of {MAX_MODES}"));
        }
        let t = &self.tolerances;
        for (name, v) in [("eig", t.eig), ("residual", t.residual), ("rank", t.rank)] {
            if !(v > 0.0 && v.is_finite()) {
                return err(format!("tolerance {name} = {v} must be positive"));
            }
        }
        if !(self.qcut_factor > 0.0 && self.qcut_factor.is_finite()) {
            return err(format!(
                "qcutFactor = {} must be positive",
                self.qcut_factor
            ));
        }
        if !(self.kernel.epsilon > 0.0 && self.kernel.d_gate > 0.0) {
            return err("kernel epsilon and dGate must be positive");
        }
        if let Some(l) = self.model.ell2 {
            if !(l > 0.0 && l.is_finite()) {
                return err(format!("ell2 = {l} must be positive"));
            }
        }
        if self.tasks.is_empty() {
            return err("no tasks requested");
        }
        Ok(())
    }

    /// Requested tasks plus their prerequisites, in execution order.
    pub fn schedule(&self) -> Vec<Task> {
        let mut want: Vec<Task> = Vec::new();
        for t in &self.tasks {
            for r in t.requires() {
                want.push(*r);
            }
            want.push(*t);
        }
        want.sort();
        want.dedup();
        want
    }
}
