//! Term-list grammar for plants defined in configuration files.
//!
//! A scalar function is a sum of terms; each term is a coefficient times a
//! product of factors. State indices are 1-based and, for step `i`, may only
//! refer to `η_1 … η_i`.
//!
//! ```json
//! { "coef": 2.5, "factors": [ { "state": { "index": 2, "power": 1 } },
//!                             { "abs_cos_time": { "omega": 1.0 } } ] }
//! ```
//!
//! Factor kinds: `state {index, power}`, `sin_state {index}`,
//! `cos_state {index}`, `sin_time {omega}`, `cos_time {omega}`,
//! `abs_sin_time {omega}`, `abs_cos_time {omega}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ParamFn, PeriodicChannel, PlantModel, StateTimeFn, StepModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Factor {
    State { index: usize, power: i32 },
    SinState { index: usize },
    CosState { index: usize },
    SinTime { omega: f64 },
    CosTime { omega: f64 },
    AbsSinTime { omega: f64 },
    AbsCosTime { omega: f64 },
}

impl Factor {
    fn state_index(&self) -> Option<usize> {
        match self {
            Factor::State { index, .. }
            | Factor::SinState { index }
            | Factor::CosState { index } => Some(*index),
            _ => None,
        }
    }

    fn eval(&self, eta: &[f64], t: f64) -> f64 {
        match *self {
            Factor::State { index, power } => eta[index - 1].powi(power),
            Factor::SinState { index } => eta[index - 1].sin(),
            Factor::CosState { index } => eta[index - 1].cos(),
            Factor::SinTime { omega } => (omega * t).sin(),
            Factor::CosTime { omega } => (omega * t).cos(),
            Factor::AbsSinTime { omega } => (omega * t).sin().abs(),
            Factor::AbsCosTime { omega } => (omega * t).cos().abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub factors: Vec<Factor>,
}

impl Term {
    pub fn constant(coef: f64) -> Self {
        Self {
            coef,
            factors: vec![],
        }
    }

    fn eval(&self, eta: &[f64], t: f64) -> f64 {
        self.factors
            .iter()
            .fold(self.coef, |acc, f| acc * f.eval(eta, t))
    }
}

/// Checks indices against the step and compiles the list to a closure.
pub fn compile(terms: &[Term], step: usize, what: &str) -> Result<StateTimeFn> {
    for term in terms {
        for f in &term.factors {
            if let Some(idx) = f.state_index() {
                if idx == 0 || idx > step {
                    return Err(Error::invalid(
                        format!("plant.steps[{step}].{what}"),
                        format!("state index {idx} outside 1..={step} (strict-feedback form)"),
                    ));
                }
            }
        }
    }
    let terms = terms.to_vec();
    Ok(Arc::new(move |eta, t| {
        terms.iter().map(|term| term.eval(eta, t)).sum()
    }))
}

fn compile_time_only(components: &[Vec<Term>], step: usize) -> Result<ParamFn> {
    for term in components.iter().flatten() {
        if term.factors.iter().any(|f| f.state_index().is_some()) {
            return Err(Error::invalid(
                format!("plant.steps[{step}].true_param"),
                "periodic parameters may only depend on time",
            ));
        }
    }
    let components = components.to_vec();
    Ok(Arc::new(move |t| {
        components
            .iter()
            .map(|c| c.iter().map(|term| term.eval(&[], t)).sum())
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelDef {
    pub period: f64,
    /// One term list per parameter component; its length fixes `q_i`.
    pub true_param: Vec<Vec<Term>>,
    /// Bound function `F̄_i`; defaults to `1 + η_i²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<Vec<Term>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDef {
    #[serde(default)]
    pub uncertainty: Vec<Term>,
    pub gain: Vec<Term>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantDef {
    pub steps: Vec<StepDef>,
    pub gain_bounds: (f64, f64),
}

impl PlantDef {
    pub fn build(&self, name: &str) -> Result<PlantModel> {
        let mut steps = Vec::with_capacity(self.steps.len());
        for (i, def) in self.steps.iter().enumerate() {
            let step = i + 1;
            if def.channel.is_none() && !def.uncertainty.is_empty() {
                return Err(Error::invalid(
                    format!("plant.steps[{step}].uncertainty"),
                    "a step with nonzero uncertainty needs a channel",
                ));
            }
            let channel = match &def.channel {
                None => None,
                Some(ch) => {
                    if ch.true_param.is_empty() {
                        return Err(Error::invalid(
                            format!("plant.steps[{step}].true_param"),
                            "at least one parameter component is required",
                        ));
                    }
                    let bound = match &ch.bound {
                        Some(b) => compile(b, step, "bound")?,
                        None => compile(
                            &[
                                Term::constant(1.0),
                                Term {
                                    coef: 1.0,
                                    factors: vec![Factor::State {
                                        index: step,
                                        power: 2,
                                    }],
                                },
                            ],
                            step,
                            "bound",
                        )?,
                    };
                    Some(PeriodicChannel {
                        period: ch.period,
                        param_dim: ch.true_param.len(),
                        true_param: compile_time_only(&ch.true_param, step)?,
                        bound,
                    })
                }
            };
            steps.push(StepModel {
                uncertainty: compile(&def.uncertainty, step, "uncertainty")?,
                gain: compile(&def.gain, step, "gain")?,
                channel,
            });
        }
        PlantModel::new(name, steps, self.gain_bounds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{pendulum_example, plant_deriv};

    fn pendulum_def() -> PlantDef {
        let json = r#"{
            "gain_bounds": [0.5, 3.0],
            "steps": [
                { "gain": [ { "coef": 1.0 } ] },
                {
                    "uncertainty": [
                        { "coef": 2.5, "factors": [ { "state": { "index": 2, "power": 1 } },
                                                    { "abs_cos_time": { "omega": 1.0 } } ] },
                        { "coef": -19.6, "factors": [ { "sin_state": { "index": 1 } } ] }
                    ],
                    "gain": [ { "coef": 2.0 } ],
                    "channel": {
                        "period": 3.141592653589793,
                        "true_param": [ [ { "coef": 1.0, "factors": [ { "abs_cos_time": { "omega": 1.0 } } ] } ] ]
                    }
                }
            ]
        }"#;
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn inline_pendulum_matches_builtin() {
        let inline = pendulum_def().build("inline").unwrap();
        let builtin = pendulum_example().model;
        for (eta, u, t) in [
            ([0.3, -0.2], 1.0, 0.4),
            ([1.2, 0.7], -3.0, 2.9),
            ([0.0, 0.0], 0.0, 0.0),
        ] {
            let a = plant_deriv(&inline, &eta, u, t).unwrap();
            let b = plant_deriv(&builtin, &eta, u, t).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        }
        let ch = inline.steps[1].channel.as_ref().unwrap();
        assert_eq!((ch.bound)(&[0.0, 2.0], 0.0), 5.0);
        assert_eq!((ch.true_param)(0.0), vec![1.0]);
    }

    #[test]
    fn rejects_non_causal_index() {
        let mut def = pendulum_def();
        def.steps[0].gain[0]
            .factors
            .push(Factor::CosState { index: 2 });
        assert!(def.build("bad").is_err());
    }

    #[test]
    fn rejects_unknown_factor() {
        let r: std::result::Result<Factor, _> =
            serde_json::from_str(r#"{ "exp_state": { "index": 1 } }"#);
        assert!(r.is_err());
    }
}
