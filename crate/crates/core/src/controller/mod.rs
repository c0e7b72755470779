//! Control stack: command filter, compensation system, virtual and actual
//! control laws, composite adaptive laws and the serial-parallel predictor.
//!
//! Every law is a derivative evaluation over explicit state. Time stepping
//! belongs to [`crate::sim`].

mod gains;

pub use gains::{ControllerGains, FilterGains, GainMatrix, OddRatio, StepGains};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mathkit::{
    fse_basis, fse_eval, grid_centers, psi, sig_pow, switch_indicator, FourierBasis,
    FseRbfEstimator, SwitchRegion,
};
use crate::plant::{reference_eval, PlantModel, Reference};
use crate::sim::{AdaptiveState, AugmentedState};

/// Filtered virtual control `η_{i,c}` and its derivative state `η_{i,d}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FilterState {
    pub eta_c: f64,
    pub eta_d: f64,
}

/// `ξ` tracking errors, `δ` compensation states, `σ = ξ − δ`, and the
/// prediction errors `s_n = η − η̂` (zero on steps without an estimator).
#[derive(Debug, Clone, PartialEq)]
pub struct LoopErrors {
    pub xi: Vec<f64>,
    pub delta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub s_n: Vec<f64>,
}

/// Network and switching regions attached to one step.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSetup {
    pub network: FseRbfEstimator,
    pub state_regions: Vec<SwitchRegion>,
    pub param_regions: Vec<SwitchRegion>,
}

impl EstimatorSetup {
    /// Grid network over `[−state_edge, state_edge]^i × [−param_edge, param_edge]^q`
    /// with `per_dim` centres per axis and uniform `width`; switching regions
    /// use `c1` equal to the grid edge and `c2 = 1.5 c1`.
    pub fn grid(
        state_dim: usize,
        param_dim: usize,
        per_dim: usize,
        state_edge: f64,
        param_edge: f64,
        width: f64,
        basis: FourierBasis,
        smooth_order: u32,
    ) -> Result<Self> {
        let ranges: Vec<(f64, f64)> = std::iter::repeat_n((-state_edge, state_edge), state_dim)
            .chain(std::iter::repeat_n((-param_edge, param_edge), param_dim))
            .collect();
        let centers = grid_centers(&ranges, per_dim)?;
        let network =
            FseRbfEstimator::with_uniform_width(centers, width, basis, state_dim, param_dim)?;
        let sr = SwitchRegion::new(state_edge, 1.5 * state_edge, smooth_order)?;
        let pr = SwitchRegion::new(param_edge, 1.5 * param_edge, smooth_order)?;
        Ok(Self {
            network,
            state_regions: vec![sr; state_dim],
            param_regions: vec![pr; param_dim],
        })
    }

    /// 216-node network on `[−1.5, 1.5]² × [−3, 3]`, width 2, seven Fourier
    /// terms of period `π`, smooth order 2.
    pub fn pendulum() -> Self {
        let basis = FourierBasis::new(7, std::f64::consts::PI).expect("static basis");
        Self::grid(2, 1, 6, 1.5, 3.0, 2.0, basis, 2).expect("static estimator")
    }

    /// `(k, m, q)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.network.node_count(),
            self.network.fourier().term_count(),
            self.network.param_dim(),
        )
    }
}

/// Raw estimator signals at one evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOutputs<'a> {
    pub h: &'a DVector<f64>,
    /// `k × q`
    pub h_grad: &'a DMatrix<f64>,
    /// `m × q`
    pub l_hat: &'a DMatrix<f64>,
    pub omega_hat: &'a DVector<f64>,
    pub rho: &'a DVector<f64>,
}

/// Products shared by the control law, the adaptive laws and the predictor.
#[derive(Debug, Clone)]
pub struct NeuralProducts {
    /// `Ω̂ᵀĤ`
    pub omega_h: f64,
    /// `Ω̂ᵀĤ′` (length `q`)
    pub omega_hgrad: DVector<f64>,
    /// `‖ρ Ω̂ᵀĤ′‖²_F`
    pub frob_sq: f64,
    /// `Ĥ′ l̂ᵀ ρ` (length `k`)
    pub hgrad_p: DVector<f64>,
    /// `‖Ĥ′ l̂ᵀ ρ‖²`
    pub hgrad_p_sq: f64,
}

impl NeuralProducts {
    pub fn new(out: &EstimatorOutputs<'_>) -> Self {
        let omega_h = out.omega_hat.dot(out.h);
        let omega_hgrad = out.h_grad.tr_mul(out.omega_hat);
        let frob_sq = out.rho.norm_squared() * omega_hgrad.norm_squared();
        let p_hat = out.l_hat.tr_mul(out.rho);
        let hgrad_p = out.h_grad * p_hat;
        let hgrad_p_sq = hgrad_p.norm_squared();
        Self {
            omega_h,
            omega_hgrad,
            frob_sq,
            hgrad_p,
            hgrad_p_sq,
        }
    }
}

/// Rapid finite-time command filter: returns `(η̇_{i,c}, η̇_{i,d})`.
pub fn command_filter_deriv(fs: &FilterState, alpha_prev: f64, g: &FilterGains) -> (f64, f64) {
    let e = fs.eta_c - alpha_prev;
    let scaled = g.eps_c * fs.eta_d;
    let acc = -g.a1 * e - g.a2 * sig_pow(e, g.m_ic) - g.b1 * scaled - g.b2 * sig_pow(scaled, g.m_d);
    (fs.eta_d, acc / (g.eps_c * g.eps_c))
}

/// Compensation dynamics `δ̇`.
///
/// `g` holds `G_1 … G_n`; `eta_c_next[i]` and `alphas[i]` hold `η_{i+2,c}`
/// and `α_{i+1}` (0-based), i.e. one entry per step `1 … n−1`.
pub fn compensation_deriv(
    delta: &[f64],
    g: &[f64],
    eta_c_next: &[f64],
    alphas: &[f64],
    gains: &ControllerGains,
) -> Result<Vec<f64>> {
    let n = delta.len();
    if g.len() != n || gains.order() != n {
        return Err(Error::Dimension {
            context: "compensation_deriv step count",
            expected: n,
            got: g.len().min(gains.order()),
        });
    }
    let links = n.saturating_sub(1);
    if eta_c_next.len() < links || alphas.len() < links {
        return Err(Error::Dimension {
            context: "compensation_deriv filter outputs",
            expected: links,
            got: eta_c_next.len().min(alphas.len()),
        });
    }
    let m_c = gains.m_c();
    Ok((0..n)
        .map(|i| {
            let s = &gains.steps[i];
            let mut d = -s.k * delta[i] - s.r * sig_pow(delta[i], m_c);
            if i + 1 < n {
                d += g[i] * (eta_c_next[i] - alphas[i]) + g[i] * delta[i + 1];
            }
            if i > 0 {
                d -= g[i - 1] * delta[i - 1];
            }
            d
        })
        .collect())
}

/// Scalar signals entering the control law of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSignals {
    pub xi: f64,
    pub sigma: f64,
    /// Switch indicator `w_i ∈ [0, 1]`.
    pub w: f64,
    pub mu_hat: f64,
    /// `F̄_i(η̄_i, t)`
    pub bound: f64,
    /// `ẏ_d` on step 1, `η_{i,d}` otherwise.
    pub feedforward: f64,
    pub g: f64,
    /// `(G_{i−1}, ξ_{i−1})` for steps `i ≥ 2`.
    pub prev: Option<(f64, f64)>,
}

/// Virtual control `α_i` (or `u` on the last step).
///
/// `neural` is `None` for steps without an estimator; those steps contribute
/// neither neural nor robust terms.
pub fn virtual_control(
    gains: &StepGains,
    m_c: f64,
    sig: &StepSignals,
    neural: Option<&NeuralProducts>,
) -> std::result::Result<f64, String> {
    if sig.g == 0.0 || !sig.g.is_finite() {
        return Err(format!("control gain G = {} (must be nonzero)", sig.g));
    }
    let mut bracket = -gains.k * sig.xi + sig.feedforward
        - gains.n * psi(sig.sigma, m_c, gains.tau_sigma, gains.eps_sigma);
    if let Some(nn) = neural {
        let robust =
            (1.0 - sig.w) * sig.mu_hat * sig.bound * (sig.bound * sig.sigma / gains.kappa).tanh();
        let learned = nn.omega_h + 0.5 * sig.sigma * nn.frob_sq + 0.5 * sig.sigma * nn.hgrad_p_sq;
        bracket -= robust + sig.w * learned;
    }
    let mut alpha = bracket / sig.g;
    if let Some((g_prev, xi_prev)) = sig.prev {
        alpha -= g_prev / sig.g * xi_prev;
    }
    Ok(alpha)
}

/// Composite adaptive laws: `(dΩ̂/dt, dl̂/dt, dμ̂/dt)`.
#[allow(clippy::too_many_arguments)]
pub fn adaptive_derivs(
    gains: &StepGains,
    m_c: f64,
    sigma: f64,
    s_n: f64,
    w: f64,
    out: &EstimatorOutputs<'_>,
    nn: &NeuralProducts,
    mu_hat: f64,
    bound: f64,
) -> (DVector<f64>, DMatrix<f64>, f64) {
    let drive = w * (sigma + gains.gamma_s * s_n);
    let omega_inner = (out.h - &nn.hgrad_p) * drive - out.omega_hat * gains.gamma_decay;
    let d_omega = gains.gamma_omega.apply(&omega_inner);
    let l_inner = out.rho * nn.omega_hgrad.transpose() * drive - out.l_hat * gains.gamma_decay;
    let d_l = gains.gamma_l.apply_mat(&l_inner);
    let fs = bound * sigma;
    let d_mu = gains.gamma1 * (1.0 - w) * fs * (fs / gains.kappa).tanh()
        - gains.gamma2 * mu_hat
        - gains.gamma3 * sig_pow(mu_hat, m_c);
    (d_omega, d_l, d_mu)
}

/// Serial-parallel predictor `dη̂_i/dt`; `eta_next` is `η_{i+1}`, or `u` on
/// the last step.
#[allow(clippy::too_many_arguments)]
pub fn predictor_deriv(
    gains: &StepGains,
    m_c: f64,
    eta: f64,
    eta_pred: f64,
    w: f64,
    nn: &NeuralProducts,
    g: f64,
    eta_next: f64,
    mu_n_hat: f64,
    bound: f64,
) -> f64 {
    let s = eta - eta_pred;
    w * (nn.omega_h + 0.5 * s * nn.frob_sq + 0.5 * s * nn.hgrad_p_sq)
        + g * eta_next
        + gains.upsilon1 * s
        + gains.upsilon2 * sig_pow(s, m_c)
        + (1.0 - w) * mu_n_hat * bound * (bound * s / gains.kappa_n).tanh()
}

/// Robust gain law for the predictor, `dμ̂_n/dt`.
pub fn mu_n_deriv(gains: &StepGains, m_c: f64, s_n: f64, w: f64, mu_n_hat: f64, bound: f64) -> f64 {
    let fs = bound * s_n;
    gains.gamma_n1 * (1.0 - w) * s_n * bound * (fs / gains.kappa_n).tanh()
        - gains.gamma_n2 * mu_n_hat
        - gains.gamma_n3 * sig_pow(mu_n_hat, m_c)
}

/// Per-step quantities exposed for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub alpha: f64,
    pub w: f64,
    pub p_hat: Vec<f64>,
    /// `Ω̂ᵀĤ`, the network's estimate of `F_i`.
    pub omega_h: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub u: f64,
    /// Time derivative of every controller-side state. The `eta` block is
    /// left at zero; the plant fills it.
    pub derivative: AugmentedState,
    pub errors: LoopErrors,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Gains plus the estimator configuration of every step.
#[derive(Debug, Clone)]
pub struct Controller {
    pub gains: ControllerGains,
    pub estimators: Vec<Option<EstimatorSetup>>,
}

fn finite(v: f64, quantity: impl FnOnce() -> String, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            quantity: quantity(),
            t,
        })
    }
}

impl Controller {
    /// Validates gains and estimator placement against the plant: a step
    /// carries an estimator exactly when the plant gives it a periodic
    /// channel, with matching input dimensions.
    pub fn new(
        model: &PlantModel,
        gains: ControllerGains,
        estimators: Vec<Option<EstimatorSetup>>,
    ) -> Result<Self> {
        let this = Self::new_unchecked(model, gains, estimators)?;
        let dims: Vec<_> = this
            .estimators
            .iter()
            .map(|e| e.as_ref().map(|e| (e.dims().0, e.dims().1)))
            .collect();
        this.gains.validate(&dims)?;
        Ok(this)
    }

    /// Structural checks only; scalar gains are not range-checked. Used for
    /// baseline variants that deliberately zero some gains.
    pub fn new_unchecked(
        model: &PlantModel,
        gains: ControllerGains,
        estimators: Vec<Option<EstimatorSetup>>,
    ) -> Result<Self> {
        let n = model.order();
        if estimators.len() != n || gains.order() != n {
            return Err(Error::Dimension {
                context: "controller steps vs plant order",
                expected: n,
                got: if estimators.len() != n {
                    estimators.len()
                } else {
                    gains.order()
                },
            });
        }
        for (i, (est, step)) in estimators.iter().zip(&model.steps).enumerate() {
            let idx = i + 1;
            match (est, &step.channel) {
                (None, None) => {}
                (Some(e), Some(ch)) => {
                    if e.network.state_dim() != idx || e.state_regions.len() != idx {
                        return Err(Error::invalid(
                            format!("estimator[{idx}]"),
                            format!("state input dimension must equal the step index {idx}"),
                        ));
                    }
                    if e.network.param_dim() != ch.param_dim
                        || e.param_regions.len() != ch.param_dim
                    {
                        return Err(Error::invalid(
                            format!("estimator[{idx}]"),
                            format!(
                                "parameter dimension must equal the channel's q = {}",
                                ch.param_dim
                            ),
                        ));
                    }
                }
                (Some(_), None) => {
                    return Err(Error::invalid(
                        format!("estimator[{idx}]"),
                        "step has no uncertainty channel",
                    ))
                }
                (None, Some(_)) => {
                    return Err(Error::invalid(
                        format!("estimator[{idx}]"),
                        "step has an uncertainty channel but no estimator",
                    ))
                }
            }
        }
        Ok(Self { gains, estimators })
    }

    /// Pendulum controller with the pendulum gains.
    pub fn pendulum(model: &PlantModel) -> Result<Self> {
        Self::new(
            model,
            ControllerGains::pendulum(),
            vec![None, Some(EstimatorSetup::pendulum())],
        )
    }

    pub fn order(&self) -> usize {
        self.gains.order()
    }

    /// Computes `u`, every controller-side derivative, the loop errors and
    /// per-step diagnostics at `(aug, t)`.
    pub fn control_pipeline(
        &self,
        aug: &AugmentedState,
        model: &PlantModel,
        reference: &Reference,
        t: f64,
    ) -> Result<PipelineOutput> {
        let n = self.order();
        aug.check_shape(self)?;
        let m_c = self.gains.m_c();
        let (y_d, y_d_dot) = reference_eval(reference, t);

        // errors, network signals, control laws, then derivatives
        let mut xi = Vec::with_capacity(n);
        for i in 0..n {
            let target = if i == 0 {
                y_d
            } else {
                aug.filters[i - 1].eta_c
            };
            xi.push(aug.eta[i] - target);
        }
        let sigma: Vec<f64> = xi.iter().zip(&aug.delta).map(|(x, d)| x - d).collect();
        let g: Vec<f64> = (1..=n)
            .map(|i| model.gain(i, &aug.eta, t))
            .collect::<Result<_>>()?;

        struct Net {
            rho: DVector<f64>,
            p_hat: DVector<f64>,
            h: DVector<f64>,
            h_grad: DMatrix<f64>,
            w: f64,
            bound: f64,
            products: NeuralProducts,
        }
        let mut nets: Vec<Option<Net>> = Vec::with_capacity(n);
        for i in 0..n {
            let (Some(est), Some(ad)) = (&self.estimators[i], &aug.adaptive[i]) else {
                nets.push(None);
                continue;
            };
            let channel = model.steps[i]
                .channel
                .as_ref()
                .expect("checked at construction");
            let states = &aug.eta[..=i];
            let rho = fse_basis(t, est.network.fourier());
            let p_hat = fse_eval(&ad.l_hat, &rho)?;
            let (h, h_grad) = est.network.eval_with_grad(states, p_hat.as_slice())?;
            let w = switch_indicator(
                states,
                p_hat.as_slice(),
                &est.state_regions,
                &est.param_regions,
            )?;
            let bound = (channel.bound)(states, t);
            let products = NeuralProducts::new(&EstimatorOutputs {
                h: &h,
                h_grad: &h_grad,
                l_hat: &ad.l_hat,
                omega_hat: &ad.omega_hat,
                rho: &rho,
            });
            nets.push(Some(Net {
                rho,
                p_hat,
                h,
                h_grad,
                w,
                bound,
                products,
            }));
        }

        let mut alphas = Vec::with_capacity(n);
        for i in 0..n {
            let net = nets[i].as_ref();
            let sig = StepSignals {
                xi: xi[i],
                sigma: sigma[i],
                w: net.map_or(1.0, |x| x.w),
                mu_hat: aug.adaptive[i].as_ref().map_or(0.0, |a| a.mu_hat),
                bound: net.map_or(0.0, |x| x.bound),
                feedforward: if i == 0 {
                    y_d_dot
                } else {
                    aug.filters[i - 1].eta_d
                },
                g: g[i],
                prev: (i > 0).then(|| (g[i - 1], xi[i - 1])),
            };
            let alpha = virtual_control(&self.gains.steps[i], m_c, &sig, net.map(|x| &x.products))
                .map_err(|what| Error::Domain { what, t })?;
            alphas.push(finite(alpha, || format!("alpha_{}", i + 1), t)?);
        }
        let u = alphas[n - 1];

        let mut deriv = AugmentedState::zeros_like(aug);
        for i in 1..n {
            let (dc, dd) = command_filter_deriv(
                &aug.filters[i - 1],
                alphas[i - 1],
                &self.gains.steps[i].filter,
            );
            deriv.filters[i - 1] = FilterState {
                eta_c: finite(dc, || format!("d eta_{},c", i + 1), t)?,
                eta_d: finite(dd, || format!("d eta_{},d", i + 1), t)?,
            };
        }
        let eta_c_next: Vec<f64> = aug.filters.iter().map(|f| f.eta_c).collect();
        deriv.delta = compensation_deriv(&aug.delta, &g, &eta_c_next, &alphas, &self.gains)?;
        for (i, d) in deriv.delta.iter().enumerate() {
            finite(*d, || format!("d delta_{}", i + 1), t)?;
        }

        let mut s_n = vec![0.0; n];
        let mut diagnostics = Vec::with_capacity(n);
        for i in 0..n {
            let Some(net) = nets[i].as_ref() else {
                diagnostics.push(StepDiagnostics {
                    alpha: alphas[i],
                    w: 1.0,
                    p_hat: vec![],
                    omega_h: 0.0,
                });
                continue;
            };
            let ad = aug.adaptive[i].as_ref().expect("paired with net");
            let sg = &self.gains.steps[i];
            s_n[i] = aug.eta[i] - ad.eta_pred;
            let out = EstimatorOutputs {
                h: &net.h,
                h_grad: &net.h_grad,
                l_hat: &ad.l_hat,
                omega_hat: &ad.omega_hat,
                rho: &net.rho,
            };
            let (d_omega, d_l, d_mu) = adaptive_derivs(
                sg,
                m_c,
                sigma[i],
                s_n[i],
                net.w,
                &out,
                &net.products,
                ad.mu_hat,
                net.bound,
            );
            let eta_next = if i + 1 < n { aug.eta[i + 1] } else { u };
            let d_pred = predictor_deriv(
                sg,
                m_c,
                aug.eta[i],
                ad.eta_pred,
                net.w,
                &net.products,
                g[i],
                eta_next,
                ad.mu_n_hat,
                net.bound,
            );
            let d_mu_n = mu_n_deriv(sg, m_c, s_n[i], net.w, ad.mu_n_hat, net.bound);
            let step = i + 1;
            if d_omega.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    quantity: format!("d omega_hat_{step}"),
                    t,
                });
            }
            if d_l.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    quantity: format!("d l_hat_{step}"),
                    t,
                });
            }
            deriv.adaptive[i] = Some(AdaptiveState {
                omega_hat: d_omega,
                l_hat: d_l,
                mu_hat: finite(d_mu, || format!("d mu_hat_{step}"), t)?,
                mu_n_hat: finite(d_mu_n, || format!("d mu_n_hat_{step}"), t)?,
                eta_pred: finite(d_pred, || format!("d eta_pred_{step}"), t)?,
            });
            diagnostics.push(StepDiagnostics {
                alpha: alphas[i],
                w: net.w,
                p_hat: net.p_hat.iter().copied().collect(),
                omega_h: net.products.omega_h,
            });
        }

        Ok(PipelineOutput {
            u,
            derivative: deriv,
            errors: LoopErrors {
                xi,
                delta: aug.delta.clone(),
                sigma,
                s_n,
            },
            diagnostics,
        })
    }
}
