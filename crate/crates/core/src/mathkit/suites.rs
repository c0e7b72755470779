//! Randomized verification suites over the inequality oracles and the
//! network gradient.
//!
//! Each suite draws its samples from a fixed-seed ChaCha stream, so a report
//! is reproducible for a given `(seed, samples)` pair.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    fse_basis, grid_centers, lemma2_tanh_gap, lemma3_power_sum_check, lemma4_check, psi, rbf_eval,
    rbf_grad_p, FourierBasis, FseRbfEstimator, INEQUALITY_SLACK, TANH_GAP_CONSTANT,
};

/// Odd-ratio exponents exercised by the odd-power suite, as `(m_c1, m_c2)`.
pub const ODD_RATIO_EXPONENTS: [(u32, u32); 3] = [(5, 3), (7, 5), (9, 7)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub samples: usize,
    pub seed: u64,
    /// Absolute slack for the inequality suites.
    pub slack: f64,
    /// Relative-error threshold for the gradient suite.
    pub grad_rel_tol: f64,
    pub fd_step: f64,
    /// Number of random inputs for the gradient suite.
    pub grad_samples: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0x5EED_F5E0,
            slack: INEQUALITY_SLACK,
            grad_rel_tol: 1e-6,
            fd_step: 1e-5,
            grad_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub samples: usize,
    pub failures: usize,
    pub first_counterexample: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{status}] {:<22} {}/{} samples ok",
            self.name,
            self.samples - self.failures,
            self.samples
        )?;
        if let Some(c) = &self.first_counterexample {
            write!(f, "; first counterexample: {c}")?;
        }
        Ok(())
    }
}

struct Tally {
    name: &'static str,
    samples: usize,
    failures: usize,
    first: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            samples: 0,
            failures: 0,
            first: None,
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.samples += 1;
        if !ok {
            self.failures += 1;
            if self.first.is_none() {
                self.first = Some(describe());
            }
        }
    }

    fn finish(self) -> SuiteReport {
        SuiteReport {
            name: self.name,
            samples: self.samples,
            failures: self.failures,
            first_counterexample: self.first,
        }
    }
}

fn rng_for(opts: &SuiteOptions, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(stream);
    rng
}

/// Signed magnitude spread over several decades, plus a uniform core.
fn wide_sample(rng: &mut ChaCha8Rng, decades: (f64, f64), core: f64) -> f64 {
    if rng.gen_bool(0.5) {
        rng.gen_range(-core..core)
    } else {
        let mag = 10f64.powf(rng.gen_range(decades.0..decades.1));
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    }
}

pub fn tanh_gap_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 1);
    let mut tally = Tally::new("tanh-gap");
    for _ in 0..opts.samples {
        let sigma = wide_sample(&mut rng, (-4.0, 3.0), 5.0);
        let kappa = 10f64.powf(rng.gen_range(-3.0..2.0));
        let gap = lemma2_tanh_gap(sigma, kappa);
        let ok = gap >= -opts.slack && gap <= TANH_GAP_CONSTANT * kappa + opts.slack;
        tally.record(ok, || {
            format!(
                "sigma = {sigma:e}, kappa = {kappa:e}, gap = {gap:e}, bound = {:e}",
                TANH_GAP_CONSTANT * kappa
            )
        });
    }
    tally.finish()
}

/// `0 ≤ |s| − σψ(σ) < τε/√(τ²+ε²)` with `s = sig(σ)^{1+m_c}`.
pub fn psi_bound_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 2);
    let mut tally = Tally::new("psi-bound");
    for _ in 0..opts.samples {
        let (d, n) = ODD_RATIO_EXPONENTS[rng.gen_range(0..ODD_RATIO_EXPONENTS.len())];
        let m_c = n as f64 / d as f64;
        let sigma = wide_sample(&mut rng, (-5.0, 1.0), 10.0);
        let tau = 10f64.powf(rng.gen_range(-3.0..0.5));
        let eps = 10f64.powf(rng.gen_range(-3.0..0.5));
        let s_abs = sigma.abs().powf(1.0 + m_c);
        let product = sigma * psi(sigma, m_c, tau, eps);
        let gap = s_abs - product;
        let bound = tau * eps / (tau * tau + eps * eps).sqrt();
        let ok = gap >= -opts.slack && gap <= bound + opts.slack;
        tally.record(ok, || {
            format!("sigma = {sigma:e}, m_c = {m_c}, tau = {tau:e}, eps = {eps:e}, gap = {gap:e}, bound = {bound:e}")
        });
    }
    tally.finish()
}

pub fn power_sum_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 3);
    let mut tally = Tally::new("power-sum");
    for i in 0..opts.samples {
        let len = rng.gen_range(1..=8);
        let z: Vec<f64> = (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let beta = if i % 50 == 0 {
            1.0
        } else {
            rng.gen_range(1e-3..1.0)
        };
        let ok = lemma3_power_sum_check(&z, beta, opts.slack);
        tally.record(ok, || format!("z = {z:?}, beta = {beta}"));
    }
    tally.finish()
}

pub fn odd_power_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 4);
    let mut tally = Tally::new("odd-power");
    for i in 0..opts.samples {
        let (d, n) = ODD_RATIO_EXPONENTS[i % ODD_RATIO_EXPONENTS.len()];
        let chi_tilde = rng.gen_range(-10.0..10.0);
        let chi = rng.gen_range(-10.0..10.0);
        let ok = lemma4_check(chi_tilde, chi, d, n, opts.slack).unwrap_or(false);
        tally.record(ok, || {
            format!("chi_tilde = {chi_tilde}, chi = {chi}, m_c = {n}/{d}")
        });
    }
    tally.finish()
}

/// The 216-node network of the pendulum scenario: centres on a 6×6×6 grid
/// over `[−1.5, 1.5]² × [−3, 3]`, widths 2, seven Fourier terms.
pub fn reference_network() -> FseRbfEstimator {
    let centers =
        grid_centers(&[(-1.5, 1.5), (-1.5, 1.5), (-3.0, 3.0)], 6).expect("static grid is valid");
    let basis = FourierBasis::new(7, PI).expect("static basis is valid");
    FseRbfEstimator::with_uniform_width(centers, 2.0, basis, 2, 1).expect("static network is valid")
}

/// Central finite differences of `Ĥ` with respect to every parameter input.
pub fn finite_difference_grad(
    est: &FseRbfEstimator,
    state: &[f64],
    p_hat: &[f64],
    h: f64,
) -> nalgebra::DMatrix<f64> {
    let q = p_hat.len();
    let mut out = nalgebra::DMatrix::zeros(est.node_count(), q);
    let mut p = p_hat.to_vec();
    for l in 0..q {
        p[l] = p_hat[l] + h;
        let plus = rbf_eval(est, state, &p).expect("dims checked by caller");
        p[l] = p_hat[l] - h;
        let minus = rbf_eval(est, state, &p).expect("dims checked by caller");
        p[l] = p_hat[l];
        out.set_column(l, &((plus - minus) / (2.0 * h)));
    }
    out
}

/// Relative Frobenius error `‖Ĥ′ − FD‖ / ‖Ĥ′‖` on random inputs spanning
/// the switching region of the reference network.
pub fn gradient_suite(opts: &SuiteOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 5);
    let est = reference_network();
    let basis = *est.fourier();
    let mut tally = Tally::new("rbf-gradient-fd");
    for _ in 0..opts.grad_samples {
        let state = [rng.gen_range(-2.25..2.25), rng.gen_range(-2.25..2.25)];
        // route the parameter through l̂ᵀρ(t) so the inputs look like run-time ones
        let t = rng.gen_range(0.0..20.0);
        let rho = fse_basis(t, &basis);
        let l: Vec<f64> = (0..rho.len()).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let p = [l.iter().zip(rho.iter()).map(|(a, b)| a * b).sum::<f64>()];
        let analytic = rbf_grad_p(&est, &state, &p).expect("static dims");
        let fd = finite_difference_grad(&est, &state, &p, opts.fd_step);
        let rel = (&analytic - &fd).norm() / analytic.norm().max(f64::MIN_POSITIVE);
        tally.record(rel < opts.grad_rel_tol, || {
            format!("state = {state:?}, p_hat = {p:?}, rel_err = {rel:e}")
        });
    }
    tally.finish()
}

/// Every suite, in a fixed order.
pub fn run_all(opts: &SuiteOptions) -> Vec<SuiteReport> {
    vec![
        tanh_gap_suite(opts),
        psi_bound_suite(opts),
        power_sum_suite(opts),
        odd_power_suite(opts),
        gradient_suite(opts),
    ]
}
