//! Inequality oracles and finite-time bound calculators.

use super::sig_pow;

/// Absolute slack applied when testing inequalities in floating point.
pub const INEQUALITY_SLACK: f64 = 1e-12;

/// Upper bound coefficient of `|σ| − σ tanh(σ/κ) ≤ 0.2785 κ`.
pub const TANH_GAP_CONSTANT: f64 = 0.2785;

/// `|σ| − σ tanh(σ/κ)`, which lies in `[0, 0.2785 κ]`.
pub fn lemma2_tanh_gap(sigma: f64, kappa: f64) -> f64 {
    sigma.abs() - sigma * (sigma / kappa).tanh()
}

/// Checks `(Σ|z|)^β ≤ Σ|z|^β ≤ M^{1−β} (Σ|z|)^β` with absolute slack `slack`.
pub fn lemma3_power_sum_check(z: &[f64], beta: f64, slack: f64) -> bool {
    if z.is_empty() {
        return false;
    }
    let sum_abs: f64 = z.iter().map(|v| v.abs()).sum();
    let lhs = sum_abs.powf(beta);
    let mid: f64 = z.iter().map(|v| v.abs().powf(beta)).sum();
    let rhs = (z.len() as f64).powf(1.0 - beta) * lhs;
    lhs <= mid + slack && mid <= rhs + slack
}

/// `(β₁, β₂)` for the exponent `m_c = m_c2 / m_c1`.
pub fn lemma4_coefficients(m_c: f64) -> (f64, f64) {
    let a = 1.0 / (1.0 + m_c);
    let b1 = a * (2f64.powf(m_c - 1.0) - 2f64.powf((m_c - 1.0) * (m_c + 1.0)));
    let b2 = a
        * ((2.0 * m_c + 1.0) / (m_c + 1.0)
            + 2f64.powf(-(m_c - 1.0).powi(2) * (m_c + 1.0)) / (m_c + 1.0)
            - 2f64.powf(m_c - 1.0));
    (b1, b2)
}

/// Checks `χ̃ (χ − χ̃)^{m} ≤ −β₁ χ̃^{1+m} + β₂ χ^{1+m}` for `m = m_c2 / m_c1`.
///
/// With odd `m_c1`, `m_c2` the power `m` is odd (signed) and `1 + m` has an
/// even numerator, so `x^{1+m} = |x|^{1+m}`. Returns `None` when the
/// exponent pair is not admissible.
pub fn lemma4_check(chi_tilde: f64, chi: f64, m_c1: u32, m_c2: u32, slack: f64) -> Option<bool> {
    if m_c1.is_multiple_of(2) || m_c2.is_multiple_of(2) || m_c2 == 0 || m_c2 >= m_c1 {
        return None;
    }
    let m = m_c2 as f64 / m_c1 as f64;
    let (b1, b2) = lemma4_coefficients(m);
    let lhs = chi_tilde * sig_pow(chi - chi_tilde, m);
    let rhs = -b1 * chi_tilde.abs().powf(1.0 + m) + b2 * chi.abs().powf(1.0 + m);
    Some(lhs <= rhs + slack)
}

/// Settling-time bound of a practically fast finite-time stable system with
/// `V̇ ≤ −ϑ₁V − ϑ₂V^m + ϑ₃`, started from `V(0) = v0`.
pub fn settling_time_bound(v1: f64, v2: f64, m: f64, nu: f64, v0: f64) -> f64 {
    let vm = v0.powf(1.0 - m);
    let first = 1.0 / (nu * v1 * (1.0 - m)) * ((nu * v1 * vm + v2) / v2).ln();
    let second = 1.0 / (v1 * (1.0 - m)) * ((v1 * vm + nu * v2) / (nu * v2)).ln();
    first.max(second)
}

/// Radius (in `V`) of the residual set reached in finite time.
pub fn residual_bound(v1: f64, v2: f64, v3: f64, m: f64, nu: f64) -> f64 {
    let a = v3 / ((1.0 - nu) * v1);
    let b = (v3 / ((1.0 - nu) * v2)).powf(1.0 / m);
    a.min(b)
}
