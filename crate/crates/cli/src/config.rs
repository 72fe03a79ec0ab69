//! Plain-text experiment configuration: TOML with one section per module.
//!
//! Unknown keys are hard errors, so a misspelled parameter can never fall
//! back to a silent default. Semantic validation happens when the sections
//! are turned into core objects; every violated invariant is named.

use std::path::PathBuf;

use serde::Deserialize;

use platoon_core::disturbance::{FtlInit, FtlParams, ModelKind, SweepConfig, SweepGrid};
use platoon_core::lyapunov::LyapunovConfig;
use platoon_core::macroscopic::{
    BridgeConfig, BumpProfile, ConstantProfile, GridConfig, MacroParams, SmoothProfile,
};
use platoon_core::micro::{
    sample_decoupled_state, sample_state, seeded_rng, IntegratorConfig, MicroState,
};
use platoon_core::model::ModelParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<String>),
}

fn invalid<T>(errors: Vec<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(errors))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MicroSim,
    ClosedFormCheck,
    LyapunovAudit,
    AmplificationSweep,
    MacroChars,
    MacroFd,
    MicroMacroBridge,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::MicroSim => "micro-sim",
            ExperimentKind::ClosedFormCheck => "closed-form-check",
            ExperimentKind::LyapunovAudit => "lyapunov-audit",
            ExperimentKind::AmplificationSweep => "amplification-sweep",
            ExperimentKind::MacroChars => "macro-chars",
            ExperimentKind::MacroFd => "macro-fd",
            ExperimentKind::MicroMacroBridge => "micro-macro-bridge",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    pub model: Option<ModelSection>,
    pub initial: Option<InitialSection>,
    pub integrator: Option<IntegratorSection>,
    pub lyapunov: Option<LyapunovSection>,
    pub disturbance: Option<DisturbanceSection>,
    pub ftl: Option<FtlSection>,
    #[serde(rename = "macro")]
    pub macro_model: Option<MacroSection>,
    pub profiles: Option<ProfilesSection>,
    pub chars_grid: Option<CharsGridSection>,
    pub macro_grid: Option<MacroGridSection>,
    pub bridge: Option<BridgeSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mu: f64,
    pub v_star: f64,
    pub v_max: f64,
    pub cap_l: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub n: usize,
}

impl ModelSection {
    pub fn build(&self) -> Result<ModelParams<f64>, ConfigError> {
        ModelParams::new(
            self.mu, self.v_star, self.v_max, self.cap_l, self.lambda, self.epsilon, self.n,
        )
        .map_err(|e| ConfigError::Invalid(vec![format!("[model] {e}")]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Equilibrium,
    SeededIntervals,
    SeededCompliant,
    Explicit,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    pub spacing_range: Option<[f64; 2]>,
    pub speed_range: Option<[f64; 2]>,
    pub slack_range: Option<[f64; 2]>,
    pub spacings: Option<Vec<f64>>,
    pub speeds: Option<Vec<f64>>,
}

impl InitialSection {
    pub fn build(
        &self,
        params: &ModelParams<f64>,
        seed: u64,
    ) -> Result<MicroState<f64>, ConfigError> {
        let mut rng = seeded_rng(seed);
        match self.kind {
            InitialKind::Equilibrium => {
                MicroState::uniform(params.lambda, params.v_star, params.n)
                    .map_err(|e| ConfigError::Invalid(vec![format!("[initial] {e}")]))
            }
            InitialKind::SeededIntervals => {
                let s = self.spacing_range.ok_or_else(|| {
                    ConfigError::Invalid(vec!["[initial] spacing_range required".into()])
                })?;
                let v = self.speed_range.ok_or_else(|| {
                    ConfigError::Invalid(vec!["[initial] speed_range required".into()])
                })?;
                Ok(sample_state(params.n, (s[0], s[1]), (v[0], v[1]), &mut rng))
            }
            InitialKind::SeededCompliant => {
                let v = self.speed_range.ok_or_else(|| {
                    ConfigError::Invalid(vec!["[initial] speed_range required".into()])
                })?;
                let slack = self.slack_range.unwrap_or([0.0, 4.0]);
                Ok(sample_decoupled_state(
                    &params.platoon(),
                    (v[0], v[1]),
                    (slack[0], slack[1]),
                    &mut rng,
                ))
            }
            InitialKind::Explicit => {
                let s = self.spacings.clone().ok_or_else(|| {
                    ConfigError::Invalid(vec!["[initial] spacings required".into()])
                })?;
                let v = self.speeds.clone().ok_or_else(|| {
                    ConfigError::Invalid(vec!["[initial] speeds required".into()])
                })?;
                MicroState::new(s, v)
                    .map_err(|e| ConfigError::Invalid(vec![format!("[initial] {e}")]))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt: Option<f64>,
    pub horizon: f64,
    pub record_stride: Option<usize>,
}

impl IntegratorSection {
    pub fn build(&self) -> Result<IntegratorConfig<f64>, ConfigError> {
        IntegratorConfig::new(
            self.dt.unwrap_or(1e-3),
            self.horizon,
            self.record_stride.unwrap_or(1),
        )
        .map_err(|e| ConfigError::Invalid(vec![format!("[integrator] {e}")]))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    pub beta: f64,
    pub fd_dt: Option<f64>,
    pub envelope_samples: Option<usize>,
    pub tol_rel: Option<f64>,
    pub tol_abs: Option<f64>,
}

impl LyapunovSection {
    pub fn build(&self) -> Result<LyapunovConfig<f64>, ConfigError> {
        let mut config = LyapunovConfig::new(self.beta);
        if let Some(fd) = self.fd_dt {
            config.fd_dt = fd;
        }
        if let Some(samples) = self.envelope_samples {
            config.envelope_samples = samples;
        }
        config
            .validate()
            .map_err(|e| ConfigError::Invalid(vec![format!("[lyapunov] {e}")]))?;
        Ok(config)
    }

    pub fn tolerances(&self) -> (f64, f64) {
        (self.tol_rel.unwrap_or(1e-3), self.tol_abs.unwrap_or(1e-6))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub alpha: f64,
    pub omega_bars: Vec<f64>,
    pub sizes: Vec<usize>,
    pub models: Vec<String>,
    pub dt: Option<f64>,
    pub horizon_floor: Option<f64>,
    pub periods: Option<f64>,
    pub ftl_init: Option<String>,
}

impl DisturbanceSection {
    pub fn build(&self) -> Result<(SweepGrid<f64>, SweepConfig<f64>), ConfigError> {
        let mut errors = Vec::new();
        let mut models = Vec::new();
        for m in &self.models {
            match m.as_str() {
                "inviscid" => models.push(ModelKind::Inviscid),
                "ftl" => models.push(ModelKind::FollowTheLeader),
                other => errors.push(format!(
                    "[disturbance] unknown model {other:?} (expected \"inviscid\" or \"ftl\")"
                )),
            }
        }
        if self.omega_bars.is_empty() {
            errors.push("[disturbance] omega_bars must be non-empty".into());
        }
        if self.sizes.is_empty() {
            errors.push("[disturbance] sizes must be non-empty".into());
        }
        let mut config = SweepConfig::new(self.alpha);
        if let Some(dt) = self.dt {
            if dt <= 0.0 {
                errors.push("[disturbance] dt > 0".into());
            }
            config.dt = dt;
        }
        if let Some(floor) = self.horizon_floor {
            config.horizon_floor = floor;
        }
        if let Some(periods) = self.periods {
            config.periods = periods;
        }
        match self.ftl_init.as_deref() {
            None | Some("interaction-range") => {}
            Some("cruise-equilibrium") => config.ftl_init = FtlInit::AtCruiseEquilibrium,
            Some(other) => errors.push(format!(
                "[disturbance] unknown ftl_init {other:?} (expected \"interaction-range\" or \"cruise-equilibrium\")"
            )),
        }
        if !errors.is_empty() {
            return invalid(errors);
        }
        let grid = SweepGrid {
            omega_bars: self.omega_bars.clone(),
            sizes: self.sizes.clone(),
            models,
        };
        Ok((grid, config))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FtlSection {
    pub a: f64,
    pub k: f64,
    pub beta: f64,
    pub zeta: f64,
    pub g_max: f64,
    pub b: Option<f64>,
}

impl FtlSection {
    pub fn build(&self) -> Result<FtlParams<f64>, ConfigError> {
        let result = match self.b {
            Some(b) => FtlParams::with_offset(self.a, self.k, self.beta, self.zeta, self.g_max, b),
            None => FtlParams::new(self.a, self.k, self.beta, self.zeta, self.g_max),
        };
        result.map_err(|e| ConfigError::Invalid(vec![format!("[ftl] {e}")]))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroSection {
    pub omega: f64,
    pub v_star: f64,
    pub v_max: f64,
    pub rho_bar: f64,
    pub rho_max: f64,
    pub phi_scale: f64,
    pub m_total: f64,
    pub epsilon: f64,
}

impl MacroSection {
    pub fn build(&self) -> Result<MacroParams<f64>, ConfigError> {
        MacroParams::new(
            self.omega,
            self.v_star,
            self.v_max,
            self.rho_bar,
            self.rho_max,
            self.phi_scale,
            self.m_total,
            self.epsilon,
        )
        .map_err(|e| ConfigError::Invalid(vec![format!("[macro] {e}")]))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum ProfileSpec {
    Constant { level: f64 },
    Bump { base: f64, amp: f64, power: u32 },
}

impl ProfileSpec {
    pub fn build(&self, which: &str) -> Result<Box<dyn SmoothProfile<f64>>, ConfigError> {
        match self {
            ProfileSpec::Constant { level } => Ok(Box::new(ConstantProfile { level: *level })),
            ProfileSpec::Bump { base, amp, power } => BumpProfile::new(*base, *amp, *power)
                .map(|b| Box::new(b) as Box<dyn SmoothProfile<f64>>)
                .map_err(|e| ConfigError::Invalid(vec![format!("[profiles.{which}] {e}")])),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesSection {
    pub rho0: ProfileSpec,
    pub v0: ProfileSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharsGridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub times: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacroGridSection {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub cfl: Option<f64>,
    pub output_times: Vec<f64>,
}

impl MacroGridSection {
    pub fn build(&self) -> Result<GridConfig<f64>, ConfigError> {
        let grid = GridConfig {
            x_min: self.x_min,
            x_max: self.x_max,
            points: self.points,
            cfl: self.cfl.unwrap_or(0.9),
            output_times: self.output_times.clone(),
        };
        grid.validate()
            .map_err(|e| ConfigError::Invalid(vec![format!("[macro_grid] {e}")]))?;
        Ok(grid)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeSection {
    pub n_values: Vec<usize>,
    pub window: [f64; 2],
    pub compare_window: [f64; 2],
    pub times: Vec<f64>,
    pub grid_points: usize,
    pub dt: Option<f64>,
}

impl BridgeSection {
    pub fn build(&self) -> Result<BridgeConfig<f64>, ConfigError> {
        let config = BridgeConfig {
            n_values: self.n_values.clone(),
            window: (self.window[0], self.window[1]),
            compare_window: (self.compare_window[0], self.compare_window[1]),
            times: self.times.clone(),
            grid_points: self.grid_points,
            dt: self.dt.unwrap_or(1e-3),
        };
        config
            .validate()
            .map_err(|e| ConfigError::Invalid(vec![format!("[bridge] {e}")]))?;
        Ok(config)
    }
}

/// Parses the document and checks that the sections the experiment kind
/// needs are present; per-section invariants are validated at build time.
pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let config: ConfigFile = toml::from_str(text)?;
    let mut missing = Vec::new();
    let kind = config.experiment.kind;
    let need = |present: bool, section: &str, missing: &mut Vec<String>| {
        if !present {
            missing.push(format!("[{section}] section required for {}", kind.as_str()));
        }
    };
    match kind {
        ExperimentKind::MicroSim | ExperimentKind::ClosedFormCheck => {
            need(config.model.is_some(), "model", &mut missing);
            need(config.initial.is_some(), "initial", &mut missing);
            need(config.integrator.is_some(), "integrator", &mut missing);
        }
        ExperimentKind::LyapunovAudit => {
            need(config.model.is_some(), "model", &mut missing);
            need(config.initial.is_some(), "initial", &mut missing);
            need(config.integrator.is_some(), "integrator", &mut missing);
            need(config.lyapunov.is_some(), "lyapunov", &mut missing);
        }
        ExperimentKind::AmplificationSweep => {
            need(config.model.is_some(), "model", &mut missing);
            need(config.disturbance.is_some(), "disturbance", &mut missing);
            if let Some(d) = &config.disturbance {
                if d.models.iter().any(|m| m == "ftl") {
                    need(config.ftl.is_some(), "ftl", &mut missing);
                }
            }
        }
        ExperimentKind::MacroChars => {
            need(config.macro_model.is_some(), "macro", &mut missing);
            need(config.profiles.is_some(), "profiles", &mut missing);
            need(config.chars_grid.is_some(), "chars_grid", &mut missing);
        }
        ExperimentKind::MacroFd => {
            need(config.macro_model.is_some(), "macro", &mut missing);
            need(config.profiles.is_some(), "profiles", &mut missing);
            need(config.macro_grid.is_some(), "macro_grid", &mut missing);
        }
        ExperimentKind::MicroMacroBridge => {
            need(config.macro_model.is_some(), "macro", &mut missing);
            need(config.profiles.is_some(), "profiles", &mut missing);
            need(config.bridge.is_some(), "bridge", &mut missing);
        }
    }
    if missing.is_empty() {
        Ok(config)
    } else {
        invalid(missing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_minimal_micro_sim_config() {
        let text = r#"
            [experiment]
            kind = "micro-sim"
            seed = 3

            [model]
            mu = 0.5
            v_star = 30.0
            v_max = 35.0
            cap_l = 5.0
            lambda = 20.0
            epsilon = 0.2
            n = 6

            [initial]
            kind = "seeded-intervals"
            spacing_range = [16.0, 24.0]
            speed_range = [27.0, 34.0]

            [integrator]
            horizon = 1.0
        "#;
        let config = parse_config(text).unwrap();
        let params = config.model.as_ref().unwrap().build().unwrap();
        assert_eq!(params.n, 6);
        let init = config.initial.as_ref().unwrap().build(&params, 3).unwrap();
        assert_eq!(init.n(), 6);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = r#"
            [experiment]
            kind = "micro-sim"

            [model]
            mu_typo = 0.5
            v_star = 30.0
            v_max = 35.0
            cap_l = 5.0
            lambda = 20.0
            epsilon = 0.2
            n = 6

            [initial]
            kind = "equilibrium"

            [integrator]
            horizon = 1.0
        "#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("mu_typo"), "{err}");
    }

    #[test]
    fn invariant_violations_name_the_rule() {
        let text = r#"
            [experiment]
            kind = "micro-sim"

            [model]
            mu = 0.5
            v_star = 30.0
            v_max = 35.0
            cap_l = 5.0
            lambda = 4.0
            epsilon = 0.2
            n = 6

            [initial]
            kind = "equilibrium"

            [integrator]
            horizon = 1.0
        "#;
        let config = parse_config(text).unwrap();
        let err = config.model.as_ref().unwrap().build().unwrap_err();
        assert!(err.to_string().contains("lambda > cap_l"), "{err}");
    }

    #[test]
    fn missing_sections_are_reported_per_kind() {
        let text = r#"
            [experiment]
            kind = "macro-chars"
        "#;
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[macro]") && msg.contains("[profiles]") && msg.contains("[chars_grid]"));
    }
}
