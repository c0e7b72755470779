//! Scenario configuration: a JSON document with a versioned `schema` key.
//!
//! Every section is optional except `schema`. Missing values fall back to
//! the built-in defaults of the selected plant; command-line flags override
//! both.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ffnt_core::controller::{ControllerGains, EstimatorSetup};
use ffnt_core::mathkit::{FourierBasis, SwitchRegion};
use ffnt_core::plant::terms::{PlantDef, StepDef};
use ffnt_core::plant::{by_name, Reference, Scenario, REGISTERED_PLANTS};
use ffnt_core::sim::{ClosedLoopSetup, RunConfig, Variant};

use crate::CliError;

pub const SCHEMA: &str = "ffnt-scenario/1";

/// Built-in configuration, identical to `configs/pendulum.json`.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/pendulum.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    #[serde(default = "default_plant")]
    pub plant: PlantSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default = "default_variant")]
    pub variant: String,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Log every n-th integration step.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Start of the steady-state window used by `compare`; defaults to
    /// `t_final / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_from: Option<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_plots")]
    pub plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<ControllerGains>,
    /// One entry per plant step; `null` on steps without an uncertainty
    /// channel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<Option<EstimatorConfig>>>,
}

fn default_plant() -> PlantSpec {
    PlantSpec::Named("pendulum".into())
}
fn default_variant() -> String {
    Variant::Developed.tag().into()
}
fn default_dt() -> f64 {
    1e-3
}
fn default_t_final() -> f64 {
    20.0
}
fn default_log_every() -> usize {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_plots() -> bool {
    true
}

/// A registered plant name or an inline definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PlantSpec {
    Named(String),
    Inline(InlinePlant),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlinePlant {
    pub name: String,
    pub gain_bounds: (f64, f64),
    pub steps: Vec<StepDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Sine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        offset: f64,
    },
    Constant(f64),
}

impl ReferenceSpec {
    fn build(&self) -> Result<Reference, CliError> {
        match *self {
            ReferenceSpec::Sine {
                amplitude,
                omega,
                offset,
            } => {
                if ![amplitude, omega, offset].iter().all(|v| v.is_finite()) {
                    return Err(CliError::invalid("reference.sine: values must be finite"));
                }
                Ok(Reference::sine(amplitude, omega, offset))
            }
            ReferenceSpec::Constant(v) if v.is_finite() => Ok(Reference::constant(v)),
            ReferenceSpec::Constant(_) => Err(CliError::invalid(
                "reference.constant: value must be finite",
            )),
        }
    }
}

/// Grid network and switching regions of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Centres per input axis.
    pub per_dim: usize,
    /// Grid half-width on the state axes; also the inner switch bound `c1`.
    pub state_edge: f64,
    /// Grid half-width on the parameter axes; also their `c1`.
    pub param_edge: f64,
    /// Outer switch bounds `c2`; default `1.5 c1`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_outer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub param_outer: Option<f64>,
    pub width: f64,
    pub fourier_terms: usize,
    /// Fourier period; defaults to the channel's period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    pub smooth_order: u32,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            per_dim: 6,
            state_edge: 1.5,
            param_edge: 3.0,
            state_outer: None,
            param_outer: None,
            width: 2.0,
            fourier_terms: 7,
            period: None,
            smooth_order: 2,
        }
    }
}

impl EstimatorConfig {
    fn build(
        &self,
        step: usize,
        param_dim: usize,
        channel_period: f64,
    ) -> Result<EstimatorSetup, CliError> {
        let ctx = |e: ffnt_core::Error| CliError::invalid(format!("estimators[{step}]: {e}"));
        if self.per_dim < 2 {
            return Err(CliError::invalid(format!(
                "estimators[{step}].per_dim: must be >= 2"
            )));
        }
        let basis = FourierBasis::new(self.fourier_terms, self.period.unwrap_or(channel_period))
            .map_err(ctx)?;
        let mut setup = EstimatorSetup::grid(
            step,
            param_dim,
            self.per_dim,
            self.state_edge,
            self.param_edge,
            self.width,
            basis,
            self.smooth_order,
        )
        .map_err(ctx)?;
        if let Some(outer) = self.state_outer {
            let r = SwitchRegion::new(self.state_edge, outer, self.smooth_order).map_err(ctx)?;
            setup.state_regions = vec![r; step];
        }
        if let Some(outer) = self.param_outer {
            let r = SwitchRegion::new(self.param_edge, outer, self.smooth_order).map_err(ctx)?;
            setup.param_regions = vec![r; param_dim];
        }
        Ok(setup)
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub variant: Option<String>,
    pub no_plots: bool,
}

/// Fully resolved run description.
#[derive(Clone)]
pub struct Resolved {
    pub setup: ClosedLoopSetup,
    pub variant: Variant,
    pub run: RunConfig,
    pub steady_window: (f64, f64),
    pub out_dir: PathBuf,
    pub plots: bool,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::invalid(format!("config: {e}")))?;
        if cfg.schema != SCHEMA {
            return Err(CliError::invalid(format!(
                "config.schema: expected \"{SCHEMA}\", got \"{}\"",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Self::parse(DEFAULT_CONFIG),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::invalid(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text)
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dt) = o.dt {
            self.dt = dt;
        }
        if let Some(t) = o.t_final {
            self.t_final = t;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(v) = &o.variant {
            self.variant = v.clone();
        }
        if o.no_plots {
            self.plots = false;
        }
    }

    /// Builds the scenario and controller inputs, checking every constraint
    /// before anything runs.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let variant: Variant = self.variant.parse().map_err(CliError::from_core)?;
        let mut scenario = match &self.plant {
            PlantSpec::Named(name) => by_name(name).ok_or_else(|| {
                CliError::invalid(format!(
                    "plant: unknown plant \"{name}\"; registered: {}",
                    REGISTERED_PLANTS.join(", ")
                ))
            })?,
            PlantSpec::Inline(p) => Scenario {
                model: PlantDef {
                    steps: p.steps.clone(),
                    gain_bounds: p.gain_bounds,
                }
                .build(&p.name)
                .map_err(CliError::from_core)?,
                reference: Reference::sine(1.0, 1.0, 0.0),
                initial_state: Vec::new(),
            },
        };
        let n = scenario.model.order();
        if let Some(r) = &self.reference {
            scenario.reference = r.build()?;
        }
        match &self.initial_state {
            Some(x0) => scenario.initial_state = x0.clone(),
            None if scenario.initial_state.is_empty() => scenario.initial_state = vec![0.0; n],
            None => {}
        }
        if scenario.initial_state.len() != n {
            return Err(CliError::invalid(format!(
                "initial_state: expected {n} entries, got {}",
                scenario.initial_state.len()
            )));
        }
        if scenario.initial_state.iter().any(|v| !v.is_finite()) {
            return Err(CliError::invalid("initial_state: values must be finite"));
        }

        let gains = match (&self.gains, &self.plant) {
            (Some(g), _) => g.clone(),
            (None, PlantSpec::Named(name)) if name == "pendulum" => ControllerGains::pendulum(),
            (None, _) => ControllerGains::defaults(n),
        };
        if gains.order() != n {
            return Err(CliError::invalid(format!(
                "gains.steps: expected {n} steps, got {}",
                gains.order()
            )));
        }

        let est_cfgs: Vec<Option<EstimatorConfig>> = match &self.estimators {
            Some(e) => e.clone(),
            None => scenario
                .model
                .steps
                .iter()
                .map(|s| s.channel.as_ref().map(|_| EstimatorConfig::default()))
                .collect(),
        };
        if est_cfgs.len() != n {
            return Err(CliError::invalid(format!(
                "estimators: expected {n} entries, got {}",
                est_cfgs.len()
            )));
        }
        let mut estimators = Vec::with_capacity(n);
        for (i, (cfg, step)) in est_cfgs.iter().zip(&scenario.model.steps).enumerate() {
            estimators.push(match (cfg, &step.channel) {
                (Some(c), Some(ch)) => Some(c.build(i + 1, ch.param_dim, ch.period)?),
                (None, None) => None,
                (Some(_), None) => {
                    return Err(CliError::invalid(format!(
                        "estimators[{}]: step has no uncertainty channel; use null",
                        i + 1
                    )))
                }
                (None, Some(_)) => {
                    return Err(CliError::invalid(format!(
                        "estimators[{}]: step has an uncertainty channel and needs an estimator",
                        i + 1
                    )))
                }
            });
        }

        let run = RunConfig {
            dt: self.dt,
            t_final: self.t_final,
            decimation: self.log_every,
        };
        run.validate().map_err(CliError::from_core)?;
        let steady_from = self.steady_from.unwrap_or(self.t_final / 2.0);
        if !(steady_from >= 0.0 && steady_from < self.t_final) {
            return Err(CliError::invalid(format!(
                "steady_from: must lie in [0, t_final), got {steady_from}"
            )));
        }

        let setup = ClosedLoopSetup {
            scenario,
            gains,
            estimators,
        };
        // full gain and placement validation happens here
        setup.controller(variant).map_err(CliError::from_core)?;

        Ok(Resolved {
            setup,
            variant,
            run,
            steady_window: (steady_from, self.t_final),
            out_dir: self.out_dir.clone(),
            plots: self.plots,
        })
    }
}
