//! Strict-feedback plants `η̇_i = F_i(η̄_i, t) + G_i(η̄_i) η_{i+1}`,
//! `η̇_n = F_n + G_n u`, and the reference trajectories they track.

pub mod terms;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `(η̄_i, t) ↦ value`; `η̄_i` is the prefix of the state up to step `i`.
pub type StateTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
/// `t ↦ p(t)`.
pub type ParamFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Periodic uncertainty attached to one step: the estimator on that step
/// models `F_i` through a Fourier expansion of a `param_dim`-dimensional
/// parameter with period `period`.
#[derive(Clone)]
pub struct PeriodicChannel {
    pub period: f64,
    pub param_dim: usize,
    /// Ground-truth parameter, for logging only; controllers never read it.
    pub true_param: ParamFn,
    /// Known positive bound function `F̄_i` with `|F_i| ≤ μ_i F̄_i`.
    pub bound: StateTimeFn,
}

#[derive(Clone)]
pub struct StepModel {
    pub uncertainty: StateTimeFn,
    pub gain: StateTimeFn,
    /// `None` for steps without an uncertainty channel (`F_i ≡ 0` by design).
    pub channel: Option<PeriodicChannel>,
}

#[derive(Clone)]
pub struct PlantModel {
    pub name: String,
    pub steps: Vec<StepModel>,
    /// `(G̲, Ḡ)` with `G̲ < G_i(·) < Ḡ` for every step.
    pub gain_bounds: (f64, f64),
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("name", &self.name)
            .field("order", &self.order())
            .field(
                "channels",
                &self
                    .steps
                    .iter()
                    .map(|s| s.channel.is_some())
                    .collect::<Vec<_>>(),
            )
            .field("gain_bounds", &self.gain_bounds)
            .finish()
    }
}

impl PlantModel {
    pub fn new(
        name: impl Into<String>,
        steps: Vec<StepModel>,
        gain_bounds: (f64, f64),
    ) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid(
                "plant.order",
                "at least one step is required",
            ));
        }
        let (lo, hi) = gain_bounds;
        if !(lo > 0.0 && lo < hi) {
            return Err(Error::invalid(
                "plant.gain_bounds",
                format!("requires 0 < G_lower < G_upper, got ({lo}, {hi})"),
            ));
        }
        for (i, s) in steps.iter().enumerate() {
            if let Some(ch) = &s.channel {
                if !(ch.period.is_finite() && ch.period > 0.0) {
                    return Err(Error::invalid(
                        format!("plant.steps[{}].period", i + 1),
                        "must be positive",
                    ));
                }
                if ch.param_dim == 0 {
                    return Err(Error::invalid(
                        format!("plant.steps[{}].param_dim", i + 1),
                        "must be positive",
                    ));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            steps,
            gain_bounds,
        })
    }

    pub fn order(&self) -> usize {
        self.steps.len()
    }

    /// `G_i(η̄_i)` for 1-based `step`, checked against the configured bounds.
    pub fn gain(&self, step: usize, eta: &[f64], t: f64) -> Result<f64> {
        let g = (self.steps[step - 1].gain)(&eta[..step], t);
        let (lo, hi) = self.gain_bounds;
        if !(g > lo && g < hi) {
            return Err(Error::Domain {
                what: format!("G_{step} = {g} outside ({lo}, {hi})"),
                t,
            });
        }
        Ok(g)
    }

    pub fn uncertainty(&self, step: usize, eta: &[f64], t: f64) -> f64 {
        (self.steps[step - 1].uncertainty)(&eta[..step], t)
    }
}

/// Right-hand side of the plant.
pub fn plant_deriv(model: &PlantModel, eta: &[f64], u: f64, t: f64) -> Result<Vec<f64>> {
    let n = model.order();
    if eta.len() != n {
        return Err(Error::Dimension {
            context: "plant state",
            expected: n,
            got: eta.len(),
        });
    }
    Ok((1..=n)
        .map(|i| {
            let s = &model.steps[i - 1];
            let drive = if i < n { eta[i] } else { u };
            (s.uncertainty)(&eta[..i], t) + (s.gain)(&eta[..i], t) * drive
        })
        .collect())
}

/// Desired output `y_d` and its derivative.
#[derive(Clone)]
pub struct Reference {
    pub y_d: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub y_d_dot: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Reference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Reference { .. }")
    }
}

impl Reference {
    /// `y_d = a sin(ωt) + offset`.
    pub fn sine(amplitude: f64, omega: f64, offset: f64) -> Self {
        Self {
            y_d: Arc::new(move |t| amplitude * (omega * t).sin() + offset),
            y_d_dot: Arc::new(move |t| amplitude * omega * (omega * t).cos()),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            y_d: Arc::new(move |_| value),
            y_d_dot: Arc::new(|_| 0.0),
        }
    }
}

pub fn reference_eval(reference: &Reference, t: f64) -> (f64, f64) {
    ((reference.y_d)(t), (reference.y_d_dot)(t))
}

/// Pendulum constants: mass, gravity, length, inertia.
pub const PENDULUM_M: f64 = 2.0;
pub const PENDULUM_G: f64 = 9.8;
pub const PENDULUM_L: f64 = 1.0;
pub const PENDULUM_J: f64 = 0.5;
/// `μ₂` witnessing `|F₂| ≤ μ₂ (1 + η₂²)`.
pub const PENDULUM_BOUND_SCALE: f64 = 20.85;

/// A fully built scenario: model, reference and initial plant state.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: PlantModel,
    pub reference: Reference,
    pub initial_state: Vec<f64>,
}

/// Pendulum with periodic damping:
/// `η̇₁ = η₂`, `η̇₂ = 2.5 η₂ |cos t| − (0.5 M g L / J) sin η₁ + u / J`,
/// tracking `y_d = sin t` from `η(0) = (0.5, 0)`.
pub fn pendulum_example() -> Scenario {
    let gravity = 0.5 * PENDULUM_M * PENDULUM_G * PENDULUM_L / PENDULUM_J;
    let step1 = StepModel {
        uncertainty: Arc::new(|_, _| 0.0),
        gain: Arc::new(|_, _| 1.0),
        channel: None,
    };
    let step2 = StepModel {
        uncertainty: Arc::new(move |eta, t| 2.5 * eta[1] * t.cos().abs() - gravity * eta[0].sin()),
        gain: Arc::new(|_, _| 1.0 / PENDULUM_J),
        channel: Some(PeriodicChannel {
            period: std::f64::consts::PI,
            param_dim: 1,
            true_param: Arc::new(|t| vec![t.cos().abs()]),
            bound: Arc::new(|eta, _| 1.0 + eta[1] * eta[1]),
        }),
    };
    Scenario {
        model: PlantModel::new("pendulum", vec![step1, step2], (0.5, 3.0))
            .expect("static pendulum model is valid"),
        reference: Reference::sine(1.0, 1.0, 0.0),
        initial_state: vec![0.5, 0.0],
    }
}

/// Pure double integrator `η̇₁ = η₂`, `η̇₂ = u` with no uncertainty channel.
pub fn chain_example() -> Scenario {
    let unit = || StepModel {
        uncertainty: Arc::new(|_, _| 0.0),
        gain: Arc::new(|_, _| 1.0),
        channel: None,
    };
    Scenario {
        model: PlantModel::new("chain", vec![unit(), unit()], (0.5, 3.0))
            .expect("static chain model is valid"),
        reference: Reference::sine(1.0, 1.0, 0.0),
        initial_state: vec![0.5, 0.0],
    }
}

pub const REGISTERED_PLANTS: [&str; 2] = ["pendulum", "chain"];

/// Built-in scenarios selectable by name.
pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "pendulum" => Some(pendulum_example()),
        "chain" => Some(chain_example()),
        _ => None,
    }
}
