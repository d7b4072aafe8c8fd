//! JSON run configuration. Every block is optional except `model`; missing keys
//! take the documented defaults and the resolved tree is embedded in each report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curvature::{SWEEP_DIMS, SWEEP_KAPPAS};
use crate::error::{Error, Result};
use crate::geometry::{ClosedFactorData, ModelSpace, ScalBound, WarpingProfile};
use crate::green::{required_truncation, ShellSpec};
use crate::spectra::{parse_spectrum_text, EigenvalueEntry};
use crate::yamabe::SchoenConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileChoice {
    #[default]
    SinhC,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    /// Round `S^n` of this radius unless `spectrum` or `spectrum_file` is given.
    #[serde(default = "one")]
    pub sphere_radius: f64,
    /// Two-column `eigenvalue multiplicity` file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Vec<EigenvalueEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scal_inf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scal_sup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    pub k: usize,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub profile: ProfileChoice,
    #[serde(default)]
    pub a: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpace> {
        let factor = match &self.spectrum {
            None => ClosedFactorData::round_sphere(self.n, self.sphere_radius)?,
            Some(entries) => {
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| {
                        Error::Config(format!(
                            "model.{name} is required with an explicit spectrum"
                        ))
                    })
                };
                let scal_inf = need(self.scal_inf, "scal_inf")?;
                ClosedFactorData::explicit(
                    self.n,
                    scal_inf,
                    self.scal_sup.unwrap_or(scal_inf),
                    need(self.lambda_n, "lambda_n")?,
                    need(self.volume, "volume")?,
                    entries.clone(),
                )?
            }
        };
        let profile = match self.profile {
            ProfileChoice::SinhC => WarpingProfile::sinh_c(self.c, self.a)?,
            ProfileChoice::Linear => WarpingProfile::linear(self.a)?,
        };
        ModelSpace::new(factor, self.k, profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundChoice {
    #[default]
    Inf,
    Sup,
}

impl From<BoundChoice> for ScalBound {
    fn from(b: BoundChoice) -> Self {
        match b {
            BoundChoice::Inf => ScalBound::Inf,
            BoundChoice::Sup => ScalBound::Sup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsConfig {
    /// Slack `epsilon` in the decay exponents.
    pub epsilon: f64,
    /// Random models drawn to cross-check `a_m d` against the `cond_main_1` margin.
    pub random_draws: usize,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            random_draws: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeConfig {
    pub t_far: f64,
    /// Fit window; `[0.5, 0.9] t_far` when absent.
    pub window: Option<(f64, f64)>,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Scalar modes use the lowest `modes` distinct eigenvalues of `N`.
    pub modes: usize,
    /// Dirac modes; `[lambda_N]` when absent.
    pub dirac_lambdas: Option<Vec<f64>>,
    pub deviation_bound: f64,
    pub scal_bound: BoundChoice,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            t_far: 40.0,
            window: None,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            modes: 3,
            dirac_lambdas: None,
            deviation_bound: 1e-2,
            scal_bound: BoundChoice::Inf,
        }
    }
}

/// Mode-sum truncation: a number, or `"auto"` for `ceil(40 R / r_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truncation {
    Fixed(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto(AutoTag::Auto)
    }
}

impl Truncation {
    pub fn resolve(&self, model: &ModelSpace, r_min: f64) -> usize {
        match self {
            Truncation::Fixed(l) => *l,
            Truncation::Auto(_) => required_truncation(model, r_min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenConfig {
    pub truncation: Truncation,
    pub shell: ShellSpec,
    pub tail_tolerance: f64,
    /// Angles on `S^n` for the exported field.
    pub thetas: Vec<f64>,
    /// Fiber distances for the exported field.
    pub radii: Vec<f64>,
    /// Grid stored in the exported mode table; `[lo, hi, count]`, geometric.
    pub table_grid: (f64, f64, usize),
    /// Recompute the mass with twice the truncation.
    pub check_doubling: bool,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self {
            truncation: Truncation::default(),
            shell: ShellSpec::default(),
            tail_tolerance: crate::green::DEFAULT_TAIL_TOLERANCE,
            thetas: vec![0.0, 0.5, 1.5],
            radii: vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0],
            table_grid: (0.02, 2.0, 9),
            check_doubling: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YamabeConfig {
    /// Bubble scales; `2^-j` for `j = 3..=12` when absent.
    pub epsilons: Option<Vec<f64>>,
    pub schoen: SchoenConfig,
    /// Relative gap below `Q*(S^m)` required for a strict verdict.
    pub margin: f64,
    pub truncation: Truncation,
    /// Shell for the mass estimate that must be positive.
    pub shell: ShellSpec,
}

impl Default for YamabeConfig {
    fn default() -> Self {
        Self {
            epsilons: None,
            schoen: SchoenConfig::default(),
            margin: 0.0,
            truncation: Truncation::default(),
            shell: ShellSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatnessConfig {
    pub kappas: Vec<f64>,
    pub dims: Vec<(usize, usize)>,
}

impl Default for FlatnessConfig {
    fn default() -> Self {
        Self {
            kappas: SWEEP_KAPPAS.to_vec(),
            dims: SWEEP_DIMS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct OutputConfig {
    /// Not embedded in reports, so that identical configs give identical bytes anywhere.
    #[serde(skip_serializing)]
    pub directory: Option<String>,
    pub plot_data: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional for `flatness`, required otherwise.
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub conditions: ConditionsConfig,
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default)]
    pub green: GreenConfig,
    #[serde(default)]
    pub yamabe: YamabeConfig,
    #[serde(default)]
    pub flatness: FlatnessConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads the file and inlines a referenced spectrum file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(model) = &mut cfg.model {
            if let Some(file) = &model.spectrum_file {
                if model.spectrum.is_some() {
                    return Err(Error::Config(
                        "give either model.spectrum or model.spectrum_file".into(),
                    ));
                }
                let base = path
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| PathBuf::from("."));
                let spec_path = base.join(file);
                let body = std::fs::read_to_string(&spec_path)
                    .map_err(|e| Error::Config(format!("{}: {e}", spec_path.display())))?;
                model.spectrum = Some(parse_spectrum_text(&body)?);
            }
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<ModelSpace> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("missing `model` block".into()))?
            .build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_truncation() {
        let cfg = RunConfig::parse(r#"{"model": {"n": 2, "k": 1, "c": 0.5}}"#).unwrap();
        assert_eq!(cfg.green.truncation, Truncation::Auto(AutoTag::Auto));
        let model = cfg.model().unwrap();
        assert_eq!(model.m(), 4);
        assert_eq!(cfg.green.truncation.resolve(&model, 0.02), 2000);
        let fixed = RunConfig::parse(r#"{"model": {"n": 2, "k": 1}, "green": {"truncation": 64}}"#)
            .unwrap();
        assert_eq!(fixed.green.truncation, Truncation::Fixed(64));
        assert!(RunConfig::parse(r#"{"model": {"n": 2, "k": 1, "bogus": 1}}"#).is_err());
        assert!(RunConfig::parse(
            r#"{"model": {"n": 2, "k": 1}, "green": {"truncation": "some"}}"#
        )
        .is_err());
    }

    #[test]
    fn explicit_spectrum_needs_bounds() {
        let cfg = RunConfig::parse(
            r#"{"model": {"n": 2, "k": 1, "spectrum": [{"value": 0.0, "multiplicity": 1}], "scal_inf": 2.0}}"#,
        )
        .unwrap();
        assert!(matches!(cfg.model(), Err(Error::Config(_))));
    }
}
