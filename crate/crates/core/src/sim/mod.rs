//! Closed-loop simulation: fixed-step RK4 over the augmented state, trace
//! logging, metrics and concurrent variant comparison.

mod integrate;
mod metrics;
mod state;
mod trace;

pub use integrate::{rk4_step, rk4_step_from};
pub use metrics::{metrics, Metrics, SETTLE_THRESHOLD};
pub use state::{AdaptiveState, AugmentedState, StateLayout};
pub use trace::{StepTrace, Trace, TraceSample};

use std::fmt;
use std::str::FromStr;

use crate::controller::{Controller, ControllerGains, EstimatorSetup, PipelineOutput};
use crate::error::{Error, Result};
use crate::plant::{plant_deriv, reference_eval, Scenario};

/// Any augmented-state entry beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Controller variants sharing one plant, network and gain set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Full composite controller.
    Developed,
    /// Same controller with the prediction error removed from the adaptive
    /// laws (`γ_s = 0`).
    DevelopedWithoutComposite,
    /// Plain command-filtered backstepping: no fractional-power terms, no
    /// composite learning, linear command filter.
    FseRbfnnCfb,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::Developed,
        Variant::DevelopedWithoutComposite,
        Variant::FseRbfnnCfb,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Developed => "developed",
            Variant::DevelopedWithoutComposite => "developed-without-composite",
            Variant::FseRbfnnCfb => "fse-rbfnn-cfb",
        }
    }

    /// Gains of this variant derived from the developed tuning.
    pub fn apply(self, base: &ControllerGains) -> ControllerGains {
        let mut g = base.clone();
        match self {
            Variant::Developed => {}
            Variant::DevelopedWithoutComposite => {
                for s in &mut g.steps {
                    s.gamma_s = 0.0;
                }
            }
            Variant::FseRbfnnCfb => {
                for s in &mut g.steps {
                    s.n = 0.0;
                    s.r = 0.0;
                    s.gamma3 = 0.0;
                    s.gamma_n3 = 0.0;
                    s.upsilon2 = 0.0;
                    s.gamma_s = 0.0;
                    s.filter.a2 = 0.0;
                    s.filter.b2 = 0.0;
                }
            }
        }
        g
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == s)
            .ok_or_else(|| {
                Error::invalid(
                    "variant",
                    format!(
                        "unknown variant `{s}`; expected one of {}",
                        Variant::ALL.map(Variant::tag).join(", ")
                    ),
                )
            })
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Log every `decimation`-th step (the final state is always logged).
    pub decimation: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 20.0,
            decimation: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(
                "dt",
                format!("must be > 0, got {}", self.dt),
            ));
        }
        if !self.t_final.is_finite() || self.t_final < 10.0 * self.dt {
            return Err(Error::invalid(
                "t_final",
                format!(
                    "must be at least 10 dt = {}, got {}",
                    10.0 * self.dt,
                    self.t_final
                ),
            ));
        }
        if self.decimation == 0 {
            return Err(Error::invalid("decimation", "must be >= 1"));
        }
        Ok(())
    }

    fn step_count(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Everything needed to build a controller for any variant.
#[derive(Clone)]
pub struct ClosedLoopSetup {
    pub scenario: Scenario,
    pub gains: ControllerGains,
    pub estimators: Vec<Option<EstimatorSetup>>,
}

impl ClosedLoopSetup {
    /// Pendulum scenario with its tuning and network.
    pub fn pendulum() -> Self {
        Self {
            scenario: crate::plant::pendulum_example(),
            gains: ControllerGains::pendulum(),
            estimators: vec![None, Some(EstimatorSetup::pendulum())],
        }
    }

    /// The developed variant is fully validated; the baselines zero some
    /// gains on purpose and only get structural checks.
    pub fn controller(&self, variant: Variant) -> Result<Controller> {
        let model = &self.scenario.model;
        match variant {
            Variant::Developed => {
                Controller::new(model, self.gains.clone(), self.estimators.clone())
            }
            v => {
                Controller::new(model, self.gains.clone(), self.estimators.clone())?;
                Controller::new_unchecked(model, v.apply(&self.gains), self.estimators.clone())
            }
        }
    }

    pub fn run(&self, variant: Variant, cfg: &RunConfig) -> Result<Trace> {
        simulate(&self.scenario, &self.controller(variant)?, cfg)
    }
}

fn derivative(
    scenario: &Scenario,
    controller: &Controller,
    aug: &AugmentedState,
    t: f64,
) -> Result<(PipelineOutput, Vec<f64>)> {
    let out = controller.control_pipeline(aug, &scenario.model, &scenario.reference, t)?;
    let mut d = out.derivative.clone();
    d.eta = plant_deriv(&scenario.model, &aug.eta, out.u, t)?;
    Ok((out, d.flatten()))
}

/// Initial augmented state: zero estimates, predictor at the plant state and
/// each filter output seeded with the virtual control it tracks.
pub fn initial_state(scenario: &Scenario, controller: &Controller) -> Result<AugmentedState> {
    let mut aug = AugmentedState::initial(controller, &scenario.initial_state)?;
    for i in 0..aug.filters.len() {
        let out = controller.control_pipeline(&aug, &scenario.model, &scenario.reference, 0.0)?;
        aug.filters[i].eta_c = out.diagnostics[i].alpha;
    }
    Ok(aug)
}

fn sample(scenario: &Scenario, aug: &AugmentedState, out: &PipelineOutput, t: f64) -> TraceSample {
    let (y_d, _) = reference_eval(&scenario.reference, t);
    let steps = aug
        .adaptive
        .iter()
        .enumerate()
        .filter_map(|(i, a)| a.as_ref().map(|a| (i, a)))
        .map(|(i, a)| {
            let diag = &out.diagnostics[i];
            let channel = scenario.model.steps[i].channel.as_ref();
            StepTrace {
                w: diag.w,
                p_hat: diag.p_hat.clone(),
                p_true: channel.map_or_else(Vec::new, |c| (c.true_param)(t)),
                e_f: scenario.model.uncertainty(i + 1, &aug.eta, t) - diag.w * diag.omega_h,
                s_n: out.errors.s_n[i],
                omega_norm: a.omega_hat.norm(),
                mu_hat: a.mu_hat,
            }
        })
        .collect();
    TraceSample {
        t,
        eta: aug.eta.clone(),
        y_d,
        xi: out.errors.xi.clone(),
        sigma: out.errors.sigma.clone(),
        delta: aug.delta.clone(),
        u: out.u,
        steps,
    }
}

/// Runs the closed loop from `t = 0` to `cfg.t_final`.
///
/// The state is logged at `t = 0` and after every `decimation` steps.
/// Leaving the `DIVERGENCE_LIMIT` box returns [`Error::Diverged`] carrying
/// the samples logged so far.
pub fn simulate(scenario: &Scenario, controller: &Controller, cfg: &RunConfig) -> Result<Trace> {
    cfg.validate()?;
    let layout = StateLayout::of(controller);
    let est_steps: Vec<usize> = (0..layout.order)
        .filter(|&i| layout.adaptive[i].is_some())
        .collect();
    let mut trace = Trace::new(
        layout.order,
        est_steps.iter().map(|i| i + 1).collect(),
        est_steps
            .iter()
            .map(|&i| layout.adaptive[i].map_or(0, |d| d.2))
            .collect(),
    );

    let aug0 = initial_state(scenario, controller)?;
    let mut y = aug0.flatten();
    let steps = cfg.step_count();
    trace.samples.reserve(steps / cfg.decimation + 2);

    for i in 0..=steps {
        let t = i as f64 * cfg.dt;
        let aug = layout.unflatten(&y)?;
        let (out, k1) = derivative(scenario, controller, &aug, t)?;
        if i % cfg.decimation == 0 || i == steps {
            trace.samples.push(sample(scenario, &aug, &out, t));
        }
        if i == steps {
            break;
        }
        y = rk4_step_from(&y, t, cfg.dt, k1, |ts, ys| {
            let a = layout.unflatten(ys)?;
            derivative(scenario, controller, &a, ts).map(|(_, d)| d)
        })?;
        if let Some(idx) = y.iter().position(|v| v.abs() > DIVERGENCE_LIMIT) {
            return Err(Error::Diverged {
                t: (i + 1) as f64 * cfg.dt,
                quantity: layout.name(idx),
                limit: DIVERGENCE_LIMIT,
                trace: Box::new(trace),
            });
        }
    }
    Ok(trace)
}

/// Metrics of one variant over the whole run and over the steady window.
#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub whole: Metrics,
    pub steady: Metrics,
    pub trace: Trace,
}

#[derive(Debug)]
pub struct ComparisonRow {
    pub variant: Variant,
    pub outcome: Result<VariantOutcome>,
}

/// Runs every variant on its own thread. Rows come back in input order; a
/// failing variant is reported in its row without stopping the others.
///
/// `steady_window` defaults to `[t_final / 2, t_final]`.
pub fn compare_variants(
    setup: &ClosedLoopSetup,
    variants: &[Variant],
    cfg: &RunConfig,
    steady_window: Option<(f64, f64)>,
) -> Result<Vec<ComparisonRow>> {
    if variants.len() < 2 {
        return Err(Error::invalid(
            "variants",
            format!(
                "comparison needs at least 2 variants, got {}",
                variants.len()
            ),
        ));
    }
    cfg.validate()?;
    let steady = steady_window.unwrap_or((cfg.t_final / 2.0, cfg.t_final));
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = variants
            .iter()
            .map(|&v| {
                scope.spawn(move || -> Result<VariantOutcome> {
                    let trace = setup.run(v, cfg)?;
                    Ok(VariantOutcome {
                        whole: metrics(&trace, (0.0, cfg.t_final), SETTLE_THRESHOLD)?,
                        steady: metrics(&trace, steady, SETTLE_THRESHOLD)?,
                        trace,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .zip(variants)
            .map(|(h, &variant)| ComparisonRow {
                variant,
                outcome: h.join().unwrap_or_else(|_| {
                    Err(Error::invalid(variant.tag(), "simulation thread panicked"))
                }),
            })
            .collect()
    });
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags_roundtrip() {
        for v in Variant::ALL {
            assert_eq!(v.tag().parse::<Variant>().unwrap(), v);
        }
        assert!("pid".parse::<Variant>().is_err());
    }

    #[test]
    fn baseline_gains() {
        let base = ControllerGains::pendulum();
        let nc = Variant::DevelopedWithoutComposite.apply(&base);
        assert!(nc.steps.iter().all(|s| s.gamma_s == 0.0));
        assert_eq!(nc.steps[0].k, base.steps[0].k);
        let cfb = Variant::FseRbfnnCfb.apply(&base);
        for s in &cfb.steps {
            assert_eq!(
                (s.n, s.r, s.gamma3, s.gamma_n3, s.upsilon2, s.gamma_s),
                (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
            );
            assert_eq!((s.filter.a2, s.filter.b2), (0.0, 0.0));
            assert_eq!(s.filter.a1, 4.0);
        }
        assert_eq!(Variant::Developed.apply(&base), base);
    }

    #[test]
    fn run_config_checks() {
        assert!(RunConfig {
            dt: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            t_final: 0.005,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig {
            decimation: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn filters_start_on_their_command() {
        let setup = ClosedLoopSetup::pendulum();
        let c = setup.controller(Variant::Developed).unwrap();
        let aug = initial_state(&setup.scenario, &c).unwrap();
        // α₁ = (−k₁ ξ₁ + ẏ_d − n ψ(σ₁)) / G₁ with ξ₁ = σ₁ = 0.5, ẏ_d = 1
        let psi = crate::mathkit::psi(0.5, 0.6, 0.01, 0.01);
        assert!((aug.filters[0].eta_c - (-8.0 * 0.5 + 1.0 - 0.5 * psi)).abs() < 1e-12);
        assert_eq!(aug.filters[0].eta_d, 0.0);
    }

    #[test]
    fn compare_needs_two_variants() {
        let setup = ClosedLoopSetup::pendulum();
        assert!(
            compare_variants(&setup, &[Variant::Developed], &RunConfig::default(), None).is_err()
        );
    }
}
