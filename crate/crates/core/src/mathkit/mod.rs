//! Stateless kernels shared by the controller, the predictor and the
//! verification suites.
//!
//! Everything here is a pure function of its arguments. Vectors are plain
//! `nalgebra` dynamic types so that the estimator dimensions can be chosen
//! at configuration time.

mod inequalities;
pub mod suites;

pub use inequalities::{
    lemma2_tanh_gap, lemma3_power_sum_check, lemma4_check, lemma4_coefficients, residual_bound,
    settling_time_bound, INEQUALITY_SLACK, TANH_GAP_CONSTANT,
};

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated Fourier basis `ρ(t) = [1, √2 sin(2πt/T), √2 cos(2πt/T), …]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierBasis {
    term_count: usize,
    period: f64,
}

impl FourierBasis {
    pub fn new(term_count: usize, period: f64) -> Result<Self> {
        if term_count == 0 || term_count.is_multiple_of(2) {
            return Err(Error::invalid(
                "fourier.term_count",
                format!("must be an odd positive integer, got {term_count}"),
            ));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::invalid(
                "fourier.period",
                format!("must be a finite positive number of seconds, got {period}"),
            ));
        }
        Ok(Self { term_count, period })
    }

    pub fn term_count(&self) -> usize {
        self.term_count
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// Evaluates the Fourier basis at time `t`.
///
/// The phase is reduced modulo the period before the trigonometric calls so
/// that `ρ(t) = ρ(t + T)` holds to round-off even for large `t`.
pub fn fse_basis(t: f64, basis: &FourierBasis) -> DVector<f64> {
    let m = basis.term_count;
    let mut rho = DVector::zeros(m);
    rho[0] = 1.0;
    let phase = t.rem_euclid(basis.period) / basis.period;
    for r in 1..=(m - 1) / 2 {
        let arg = 2.0 * PI * r as f64 * phase;
        let (s, c) = arg.sin_cos();
        rho[2 * r - 1] = SQRT_2 * s;
        rho[2 * r] = SQRT_2 * c;
    }
    rho
}

/// `p̂ = l̂ᵀ ρ` for an `m × q` coefficient matrix.
pub fn fse_eval(l_hat: &DMatrix<f64>, rho: &DVector<f64>) -> Result<DVector<f64>> {
    if l_hat.nrows() != rho.len() {
        return Err(Error::Dimension {
            context: "fse_eval (rows of l_hat vs basis length)",
            expected: rho.len(),
            got: l_hat.nrows(),
        });
    }
    Ok(l_hat.tr_mul(rho))
}

/// Gaussian RBF network whose inputs are `[state; p̂]`.
///
/// Node `j` evaluates `exp(−‖x − c_j‖² / w_j²)`. Centres are stored row-major
/// in a flat buffer of `node_count × (state_dim + param_dim)` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FseRbfEstimator {
    centers: Vec<f64>,
    widths: Vec<f64>,
    fourier: FourierBasis,
    state_dim: usize,
    param_dim: usize,
}

impl FseRbfEstimator {
    pub fn new(
        centers: Vec<Vec<f64>>,
        widths: Vec<f64>,
        fourier: FourierBasis,
        state_dim: usize,
        param_dim: usize,
    ) -> Result<Self> {
        if state_dim == 0 || param_dim == 0 {
            return Err(Error::invalid(
                "estimator.dims",
                "state and parameter dimensions must be positive",
            ));
        }
        if centers.is_empty() {
            return Err(Error::invalid(
                "estimator.centers",
                "at least one node is required",
            ));
        }
        if widths.len() != centers.len() {
            return Err(Error::Dimension {
                context: "estimator widths vs centers",
                expected: centers.len(),
                got: widths.len(),
            });
        }
        if let Some(w) = widths.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::invalid(
                "estimator.widths",
                format!("every width must be positive, got {w}"),
            ));
        }
        let dim = state_dim + param_dim;
        let mut flat = Vec::with_capacity(centers.len() * dim);
        for c in &centers {
            if c.len() != dim {
                return Err(Error::Dimension {
                    context: "estimator center dimension",
                    expected: dim,
                    got: c.len(),
                });
            }
            flat.extend_from_slice(c);
        }
        Ok(Self {
            centers: flat,
            widths,
            fourier,
            state_dim,
            param_dim,
        })
    }

    /// Uniform width for every node.
    pub fn with_uniform_width(
        centers: Vec<Vec<f64>>,
        width: f64,
        fourier: FourierBasis,
        state_dim: usize,
        param_dim: usize,
    ) -> Result<Self> {
        let widths = vec![width; centers.len()];
        Self::new(centers, widths, fourier, state_dim, param_dim)
    }

    pub fn node_count(&self) -> usize {
        self.widths.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn fourier(&self) -> &FourierBasis {
        &self.fourier
    }

    pub fn center(&self, j: usize) -> &[f64] {
        let dim = self.state_dim + self.param_dim;
        &self.centers[j * dim..(j + 1) * dim]
    }

    pub fn width(&self, j: usize) -> f64 {
        self.widths[j]
    }

    fn check_inputs(&self, state: &[f64], p_hat: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::Dimension {
                context: "rbf state input",
                expected: self.state_dim,
                got: state.len(),
            });
        }
        if p_hat.len() != self.param_dim {
            return Err(Error::Dimension {
                context: "rbf parameter input",
                expected: self.param_dim,
                got: p_hat.len(),
            });
        }
        Ok(())
    }

    fn input_iter<'a>(&self, state: &'a [f64], p_hat: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        state.iter().chain(p_hat.iter()).copied()
    }

    /// Gaussian outputs `Ĥ` and the `k × q` parameter gradient `Ĥ′` from a
    /// single pass over the nodes.
    pub fn eval_with_grad(
        &self,
        state: &[f64],
        p_hat: &[f64],
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_inputs(state, p_hat)?;
        let k = self.node_count();
        let q = self.param_dim;
        let dim = self.state_dim + q;
        let mut h = DVector::zeros(k);
        let mut grad = DMatrix::zeros(k, q);
        for j in 0..k {
            let c = &self.centers[j * dim..(j + 1) * dim];
            let w2 = self.widths[j] * self.widths[j];
            let dist2: f64 = self
                .input_iter(state, p_hat)
                .zip(c)
                .map(|(x, c)| (x - c) * (x - c))
                .sum();
            let hj = (-dist2 / w2).exp();
            h[j] = hj;
            for l in 0..q {
                grad[(j, l)] = -2.0 * (p_hat[l] - c[self.state_dim + l]) / w2 * hj;
            }
        }
        Ok((h, grad))
    }
}

/// Node outputs `Ĥ_j = exp(−‖[state; p̂] − c_j‖² / w_j²)`.
pub fn rbf_eval(est: &FseRbfEstimator, state: &[f64], p_hat: &[f64]) -> Result<DVector<f64>> {
    est.check_inputs(state, p_hat)?;
    let dim = est.state_dim + est.param_dim;
    Ok(DVector::from_iterator(
        est.node_count(),
        (0..est.node_count()).map(|j| {
            let c = &est.centers[j * dim..(j + 1) * dim];
            let dist2: f64 = est
                .input_iter(state, p_hat)
                .zip(c)
                .map(|(x, c)| (x - c) * (x - c))
                .sum();
            (-dist2 / (est.widths[j] * est.widths[j])).exp()
        }),
    ))
}

/// Analytic `∂Ĥ/∂p` as a `k × q` matrix.
pub fn rbf_grad_p(est: &FseRbfEstimator, state: &[f64], p_hat: &[f64]) -> Result<DMatrix<f64>> {
    est.eval_with_grad(state, p_hat).map(|(_, g)| g)
}

/// `sig(x)^m = |x|^m sgn(x)`, with `sig(0)^m = 0`.
#[inline]
pub fn sig_pow(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(m).copysign(x)
    }
}

/// Valid region of one network input: full trust inside `inner`, none
/// beyond `outer`, `order`-times differentiable blend in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchRegion {
    inner: f64,
    outer: f64,
    order: u32,
}

impl SwitchRegion {
    pub fn new(inner: f64, outer: f64, order: u32) -> Result<Self> {
        if !(inner.is_finite() && outer.is_finite() && inner > 0.0 && inner < outer) {
            return Err(Error::invalid(
                "switch.c1_c2",
                format!("requires 0 < c1 < c2, got c1 = {inner}, c2 = {outer}"),
            ));
        }
        if order == 0 {
            return Err(Error::invalid(
                "switch.order",
                "smooth order must be positive",
            ));
        }
        Ok(Self {
            inner,
            outer,
            order,
        })
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn order(&self) -> u32 {
        self.order
    }
}

/// Smooth switch `ϖ(x)`: 1 on `|x| ≤ c1`, 0 on `|x| ≥ c2`,
/// `cosⁿ((π/2)·sinⁿ((π/2)·(x² − c1²)/(c2² − c1²)))` between.
pub fn smooth_switch(x: f64, region: &SwitchRegion) -> f64 {
    let ax = x.abs();
    if ax <= region.inner {
        return 1.0;
    }
    if ax >= region.outer {
        return 0.0;
    }
    let c1 = region.inner * region.inner;
    let c2 = region.outer * region.outer;
    let frac = (x * x - c1) / (c2 - c1);
    let n = region.order as i32;
    let inner = (FRAC_PI_2 * frac).sin().powi(n);
    (FRAC_PI_2 * inner).cos().powi(n)
}

/// Product of [`smooth_switch`] over every state input and every estimated
/// parameter input of a network.
pub fn switch_indicator(
    states: &[f64],
    p_hat: &[f64],
    state_regions: &[SwitchRegion],
    param_regions: &[SwitchRegion],
) -> Result<f64> {
    if states.len() != state_regions.len() {
        return Err(Error::Dimension {
            context: "switch_indicator state regions",
            expected: states.len(),
            got: state_regions.len(),
        });
    }
    if p_hat.len() != param_regions.len() {
        return Err(Error::Dimension {
            context: "switch_indicator parameter regions",
            expected: p_hat.len(),
            got: param_regions.len(),
        });
    }
    Ok(states
        .iter()
        .zip(state_regions)
        .chain(p_hat.iter().zip(param_regions))
        .map(|(x, r)| smooth_switch(*x, r))
        .product())
}

/// Singularity-free finite-time shaping term
/// `σ^{1+2m_c} √((σ^{2+2m_c} + τ² + ε²) / ((σ^{2+2m_c} + τ²)(σ^{2+2m_c} + ε²)))`.
///
/// For `|σ| ≫ τ, ε` it behaves like `sig(σ)^{m_c}`, and it vanishes smoothly
/// at the origin.
pub fn psi(sigma: f64, m_c: f64, tau: f64, eps: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let a = sigma.abs().powf(2.0 + 2.0 * m_c);
    let (t2, e2) = (tau * tau, eps * eps);
    let radical = ((a + t2 + e2) / ((a + t2) * (a + e2))).sqrt();
    sig_pow(sigma, 1.0 + 2.0 * m_c) * radical
}

/// Tensor-product grid with `per_dim` evenly spaced values (endpoints
/// included) along every range. The last dimension varies fastest.
pub fn grid_centers(ranges: &[(f64, f64)], per_dim: usize) -> Result<Vec<Vec<f64>>> {
    if per_dim == 0 {
        return Err(Error::invalid("grid.per_dim", "must be positive"));
    }
    if ranges.is_empty() {
        return Err(Error::invalid(
            "grid.ranges",
            "at least one dimension is required",
        ));
    }
    if let Some((lo, hi)) = ranges.iter().find(|(lo, hi)| !(lo < hi)) {
        return Err(Error::invalid(
            "grid.ranges",
            format!("each range needs low < high, got [{lo}, {hi}]"),
        ));
    }
    let axes: Vec<Vec<f64>> = ranges
        .iter()
        .map(|&(lo, hi)| {
            if per_dim == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                let step = (hi - lo) / (per_dim - 1) as f64;
                (0..per_dim)
                    .map(|i| {
                        if i == per_dim - 1 {
                            hi
                        } else {
                            lo + step * i as f64
                        }
                    })
                    .collect()
            }
        })
        .collect();

    let total = per_dim.pow(ranges.len() as u32);
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; ranges.len()];
    for _ in 0..total {
        out.push(idx.iter().enumerate().map(|(d, &i)| axes[d][i]).collect());
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < per_dim {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single_node(width: f64) -> FseRbfEstimator {
        let fb = FourierBasis::new(3, 2.0 * PI).unwrap();
        FseRbfEstimator::with_uniform_width(vec![vec![0.0, 0.0]], width, fb, 1, 1).unwrap()
    }

    #[test]
    fn fourier_basis_values() {
        let fb3 = FourierBasis::new(3, 2.0 * PI).unwrap();
        let r = fse_basis(0.0, &fb3);
        assert_abs_diff_eq!(r.as_slice(), [1.0, 0.0, SQRT_2].as_slice(), epsilon = 1e-15);
        let r = fse_basis(PI / 2.0, &fb3);
        assert_abs_diff_eq!(r.as_slice(), [1.0, SQRT_2, 0.0].as_slice(), epsilon = 1e-15);

        // r = 1: √2 sin(π/4) = √2 cos(π/4) = 1; r = 2: √2 sin(π/2), √2 cos(π/2)
        let fb5 = FourierBasis::new(5, 2.0 * PI).unwrap();
        let r = fse_basis(PI / 4.0, &fb5);
        assert_abs_diff_eq!(
            r.as_slice(),
            [1.0, 1.0, 1.0, SQRT_2, 0.0].as_slice(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn fourier_basis_rejects_even_or_nonpositive() {
        assert!(FourierBasis::new(4, 1.0).is_err());
        assert!(FourierBasis::new(0, 1.0).is_err());
        assert!(FourierBasis::new(3, 0.0).is_err());
        assert!(FourierBasis::new(3, -1.0).is_err());
    }

    #[test]
    fn fourier_basis_is_periodic() {
        let fb = FourierBasis::new(7, PI).unwrap();
        for i in 0..1000 {
            let t = i as f64 * 0.0031 * PI;
            for k in 1..=10 {
                let a = fse_basis(t, &fb);
                let b = fse_basis(t + k as f64 * PI, &fb);
                assert!((a - b).amax() < 1e-9, "t = {t}, k = {k}");
            }
        }
    }

    #[test]
    fn fse_eval_cases() {
        let fb = FourierBasis::new(5, 1.3).unwrap();
        let rho = fse_basis(0.77, &fb);
        let zero = DMatrix::zeros(5, 2);
        assert_eq!(fse_eval(&zero, &rho).unwrap(), DVector::zeros(2));

        let mut pick = DMatrix::zeros(5, 1);
        pick[(0, 0)] = 1.0;
        for t in [0.0, 0.3, 11.7] {
            let rho = fse_basis(t, &fb);
            assert_eq!(fse_eval(&pick, &rho).unwrap()[0], 1.0);
        }

        assert!(matches!(
            fse_eval(&DMatrix::zeros(3, 1), &rho),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn fse_eval_matches_double_loop() {
        let fb = FourierBasis::new(7, 2.0).unwrap();
        let l = DMatrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64 * 0.37).sin() * 2.0);
        for t in [0.0, 0.41, 1.9, 7.3] {
            let rho = fse_basis(t, &fb);
            let got = fse_eval(&l, &rho).unwrap();
            for j in 0..3 {
                let mut acc = 0.0;
                for i in 0..7 {
                    acc += l[(i, j)] * rho[i];
                }
                assert_abs_diff_eq!(got[j], acc, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn rbf_values() {
        let est = single_node(2.0);
        assert_eq!(rbf_eval(&est, &[0.0], &[0.0]).unwrap()[0], 1.0);
        // ‖x‖ = 2, w = 2
        let h = rbf_eval(&est, &[2.0_f64.sqrt()], &[2.0_f64.sqrt()]).unwrap();
        assert_abs_diff_eq!(h[0], (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(h[0], 0.367879, epsilon = 1e-6);
        let far = rbf_eval(&est, &[20.0], &[0.0]).unwrap();
        assert!(far[0] < 1e-10);
    }

    #[test]
    fn rbf_gradient_hand_values() {
        let est = single_node(2.0);
        let g = rbf_grad_p(&est, &[0.0], &[0.0]).unwrap();
        assert_eq!(g[(0, 0)], 0.0);
        let g = rbf_grad_p(&est, &[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(g[(0, 0)], -0.5 * (-0.25f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn rbf_rejects_wrong_dims() {
        let est = single_node(1.0);
        assert!(rbf_eval(&est, &[0.0, 1.0], &[0.0]).is_err());
        assert!(rbf_grad_p(&est, &[0.0], &[]).is_err());
    }

    #[test]
    fn sig_pow_cases() {
        assert_eq!(sig_pow(0.0, 0.6), 0.0);
        assert_abs_diff_eq!(sig_pow(-8.0, 1.0 / 3.0), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sig_pow(4.0, 0.5), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn smooth_switch_cases() {
        let r = SwitchRegion::new(1.0, 2.0, 2).unwrap();
        assert_eq!(smooth_switch(0.5, &r), 1.0);
        assert_eq!(smooth_switch(2.5, &r), 0.0);
        assert_abs_diff_eq!(smooth_switch(2.5f64.sqrt(), &r), 0.5, epsilon = 1e-12);
        assert!(SwitchRegion::new(2.0, 1.0, 2).is_err());
        assert!(SwitchRegion::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn smooth_switch_derivatives_vanish_at_knots() {
        let h = 1e-4;
        for order in [2u32, 3, 4] {
            let r = SwitchRegion::new(1.5, 2.25, order).unwrap();
            let f = |x: f64| smooth_switch(x, &r);
            for knot in [1.5, -1.5, 2.25, -2.25] {
                let d1 = (f(knot + h) - f(knot - h)) / (2.0 * h);
                assert!(d1.abs() < 1e-4, "order {order} knot {knot}: d1 = {d1}");
                if order >= 3 {
                    let d2 = (f(knot + h) - 2.0 * f(knot) + f(knot - h)) / (h * h);
                    assert!(d2.abs() < 1e-4, "order {order} knot {knot}: d2 = {d2}");
                }
            }
        }
    }

    #[test]
    fn switch_indicator_cases() {
        let r = SwitchRegion::new(1.0, 2.0, 2).unwrap();
        let mid = 2.5f64.sqrt();
        assert_eq!(
            switch_indicator(&[0.1, -0.9], &[0.5], &[r, r], &[r]).unwrap(),
            1.0
        );
        assert_eq!(
            switch_indicator(&[0.1, 2.1], &[0.5], &[r, r], &[r]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            switch_indicator(&[mid], &[-mid], &[r], &[r]).unwrap(),
            0.25,
            epsilon = 1e-12
        );
        assert!(switch_indicator(&[0.0], &[0.0], &[r, r], &[r]).is_err());
    }

    #[test]
    fn psi_cases() {
        assert_eq!(psi(0.0, 0.6, 0.01, 0.01), 0.0);
        let v = psi(1.0, 0.6, 0.01, 0.01);
        assert!((v - 1.0).abs() < 5e-6, "{v}");
        assert_abs_diff_eq!(psi(-0.3, 0.6, 0.01, 0.02), -psi(0.3, 0.6, 0.01, 0.02));
    }

    #[test]
    fn grid_cases() {
        let g = grid_centers(&[(-1.5, 1.5), (-1.5, 1.5), (-3.0, 3.0)], 6).unwrap();
        assert_eq!(g.len(), 216);
        assert!(g.iter().all(|c| c.len() == 3));
        assert_eq!(g[0], vec![-1.5, -1.5, -3.0]);
        assert_eq!(g[215], vec![1.5, 1.5, 3.0]);
        assert_eq!(
            grid_centers(&[(0.0, 1.0)], 2).unwrap(),
            vec![vec![0.0], vec![1.0]]
        );
        assert_eq!(
            grid_centers(&[(0.0, 1.0)], 3).unwrap(),
            vec![vec![0.0], vec![0.5], vec![1.0]]
        );
        assert!(grid_centers(&[(1.0, 1.0)], 3).is_err());
    }

    proptest! {
        #[test]
        fn sig_pow_is_odd_monotone(x in -1e3..1e3f64, y in -1e3..1e3f64, m in 0.05..=1.0f64) {
            prop_assert_eq!(sig_pow(-x, m), -sig_pow(x, m));
            prop_assert!(sig_pow(x, m) * x >= 0.0);
            if x < y {
                prop_assert!(sig_pow(x, m) <= sig_pow(y, m));
            }
        }

        #[test]
        fn smooth_switch_even_and_bounded(x in -5.0..5.0f64, c1 in 0.1..2.0f64, gap in 0.1..2.0f64, n in 1u32..5) {
            let r = SwitchRegion::new(c1, c1 + gap, n).unwrap();
            let v = smooth_switch(x, &r);
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(v, smooth_switch(-x, &r));
        }

        #[test]
        fn rbf_outputs_in_unit_interval(a in -4.0..4.0f64, b in -4.0..4.0f64, p in -6.0..6.0f64) {
            let fb = FourierBasis::new(7, PI).unwrap();
            let centers = grid_centers(&[(-1.5, 1.5), (-1.5, 1.5), (-3.0, 3.0)], 3).unwrap();
            let est = FseRbfEstimator::with_uniform_width(centers, 2.0, fb, 2, 1).unwrap();
            let h = rbf_eval(&est, &[a, b], &[p]).unwrap();
            prop_assert!(h.iter().all(|v| *v > 0.0 && *v <= 1.0));
        }
    }
}
