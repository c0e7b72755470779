use nalgebra::{DMatrix, DVector};

use crate::controller::{Controller, FilterState};
use crate::error::{Error, Result};

/// Adaptive variables of one estimator-bearing step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveState {
    pub omega_hat: DVector<f64>,
    /// `m × q` Fourier coefficients.
    pub l_hat: DMatrix<f64>,
    pub mu_hat: f64,
    pub mu_n_hat: f64,
    /// Predictor state `η̂_i`.
    pub eta_pred: f64,
}

impl AdaptiveState {
    pub fn zeros(k: usize, m: usize, q: usize) -> Self {
        Self {
            omega_hat: DVector::zeros(k),
            l_hat: DMatrix::zeros(m, q),
            mu_hat: 0.0,
            mu_n_hat: 0.0,
            eta_pred: 0.0,
        }
    }
}

/// Complete closed-loop state.
///
/// Flattened layout, in order:
/// `η_1 … η_n`, then `(η_{i,c}, η_{i,d})` for `i = 2 … n`, then
/// `δ_1 … δ_n`, then for every estimator step in ascending order
/// `Ω̂` (`k`), `l̂` column-major (`m·q`), `μ̂`, `μ̂_n`, `η̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub eta: Vec<f64>,
    /// Entry `j` belongs to step `j + 2`.
    pub filters: Vec<FilterState>,
    pub delta: Vec<f64>,
    /// Indexed by step; `None` on steps without an estimator.
    pub adaptive: Vec<Option<AdaptiveState>>,
}

/// Shape information needed to rebuild an [`AugmentedState`] from a flat
/// vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    pub order: usize,
    /// `(k, m, q)` per step.
    pub adaptive: Vec<Option<(usize, usize, usize)>>,
}

impl StateLayout {
    pub fn of(controller: &Controller) -> Self {
        Self {
            order: controller.order(),
            adaptive: controller
                .estimators
                .iter()
                .map(|e| e.as_ref().map(|e| e.dims()))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        let n = self.order;
        n + 2 * n.saturating_sub(1)
            + n
            + self
                .adaptive
                .iter()
                .flatten()
                .map(|(k, m, q)| k + m * q + 3)
                .sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn unflatten(&self, flat: &[f64]) -> Result<AugmentedState> {
        if flat.len() != self.len() {
            return Err(Error::Dimension {
                context: "flattened augmented state",
                expected: self.len(),
                got: flat.len(),
            });
        }
        let n = self.order;
        let mut it = flat.iter().copied();
        let mut take = |count: usize| -> Vec<f64> { it.by_ref().take(count).collect() };
        let eta = take(n);
        let filters = take(2 * n.saturating_sub(1))
            .chunks(2)
            .map(|c| FilterState {
                eta_c: c[0],
                eta_d: c[1],
            })
            .collect();
        let delta = take(n);
        let adaptive = self
            .adaptive
            .iter()
            .map(|dims| {
                dims.map(|(k, m, q)| {
                    let omega_hat = DVector::from_vec(take(k));
                    let l_hat = DMatrix::from_vec(m, q, take(m * q));
                    let tail = take(3);
                    AdaptiveState {
                        omega_hat,
                        l_hat,
                        mu_hat: tail[0],
                        mu_n_hat: tail[1],
                        eta_pred: tail[2],
                    }
                })
            })
            .collect();
        Ok(AugmentedState {
            eta,
            filters,
            delta,
            adaptive,
        })
    }

    /// Human-readable name of flat index `idx`, for divergence reports.
    pub fn name(&self, idx: usize) -> String {
        let n = self.order;
        if idx < n {
            return format!("eta_{}", idx + 1);
        }
        let mut base = n;
        let nf = 2 * n.saturating_sub(1);
        if idx < base + nf {
            let j = idx - base;
            return format!(
                "eta_{},{}",
                j / 2 + 2,
                if j.is_multiple_of(2) { "c" } else { "d" }
            );
        }
        base += nf;
        if idx < base + n {
            return format!("delta_{}", idx - base + 1);
        }
        base += n;
        for (i, dims) in self.adaptive.iter().enumerate() {
            let Some((k, m, q)) = dims else { continue };
            let step = i + 1;
            let len = k + m * q + 3;
            if idx < base + len {
                let j = idx - base;
                return if j < *k {
                    format!("omega_hat_{step}[{j}]")
                } else if j < k + m * q {
                    format!("l_hat_{step}[{}]", j - k)
                } else {
                    ["mu_hat", "mu_n_hat", "eta_pred"][j - k - m * q].to_string()
                        + &format!("_{step}")
                };
            }
            base += len;
        }
        format!("state[{idx}]")
    }
}

impl AugmentedState {
    /// Zero controller state with the predictor started at the plant state.
    pub fn initial(controller: &Controller, eta0: &[f64]) -> Result<Self> {
        let layout = StateLayout::of(controller);
        if eta0.len() != layout.order {
            return Err(Error::Dimension {
                context: "initial plant state",
                expected: layout.order,
                got: eta0.len(),
            });
        }
        let n = layout.order;
        Ok(Self {
            eta: eta0.to_vec(),
            filters: vec![FilterState::default(); n.saturating_sub(1)],
            delta: vec![0.0; n],
            adaptive: layout
                .adaptive
                .iter()
                .enumerate()
                .map(|(i, d)| {
                    d.map(|(k, m, q)| AdaptiveState {
                        eta_pred: eta0[i],
                        ..AdaptiveState::zeros(k, m, q)
                    })
                })
                .collect(),
        })
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self {
            eta: vec![0.0; other.eta.len()],
            filters: vec![FilterState::default(); other.filters.len()],
            delta: vec![0.0; other.delta.len()],
            adaptive: other
                .adaptive
                .iter()
                .map(|a| {
                    a.as_ref().map(|a| {
                        AdaptiveState::zeros(a.omega_hat.len(), a.l_hat.nrows(), a.l_hat.ncols())
                    })
                })
                .collect(),
        }
    }

    pub fn layout(&self) -> StateLayout {
        StateLayout {
            order: self.eta.len(),
            adaptive: self
                .adaptive
                .iter()
                .map(|a| {
                    a.as_ref()
                        .map(|a| (a.omega_hat.len(), a.l_hat.nrows(), a.l_hat.ncols()))
                })
                .collect(),
        }
    }

    pub fn check_shape(&self, controller: &Controller) -> Result<()> {
        let expected = StateLayout::of(controller);
        let got = self.layout();
        if expected != got
            || self.filters.len() != expected.order.saturating_sub(1)
            || self.delta.len() != expected.order
        {
            return Err(Error::Dimension {
                context: "augmented state vs controller layout",
                expected: expected.len(),
                got: got.len(),
            });
        }
        Ok(())
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.layout().len());
        out.extend_from_slice(&self.eta);
        for f in &self.filters {
            out.push(f.eta_c);
            out.push(f.eta_d);
        }
        out.extend_from_slice(&self.delta);
        for a in self.adaptive.iter().flatten() {
            out.extend(a.omega_hat.iter());
            out.extend(a.l_hat.iter());
            out.extend([a.mu_hat, a.mu_n_hat, a.eta_pred]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::pendulum_example;
    use proptest::prelude::*;

    fn layout() -> StateLayout {
        StateLayout {
            order: 3,
            adaptive: vec![None, Some((4, 3, 2)), Some((2, 1, 1))],
        }
    }

    #[test]
    fn pendulum_layout_length() {
        let s = pendulum_example();
        let c = Controller::pendulum(&s.model).unwrap();
        let st = AugmentedState::initial(&c, &s.initial_state).unwrap();
        // 2 + 2 + 2 + (216 + 7 + 3)
        assert_eq!(st.flatten().len(), 232);
        assert_eq!(StateLayout::of(&c).len(), 232);
        assert_eq!(st.adaptive[1].as_ref().unwrap().eta_pred, 0.0);
        assert_eq!(StateLayout::of(&c).name(231), "eta_pred_2");
        assert_eq!(StateLayout::of(&c).name(2), "eta_2,c");
        assert_eq!(StateLayout::of(&c).name(6), "omega_hat_2[0]");
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(layout().unflatten(&[0.0; 3]).is_err());
    }

    proptest! {
        #[test]
        fn flatten_roundtrip(values in proptest::collection::vec(-1e3..1e3f64, 3 + 4 + 3 + (4 + 6 + 3) + (2 + 1 + 3))) {
            let l = layout();
            prop_assert_eq!(l.len(), values.len());
            let st = l.unflatten(&values).unwrap();
            prop_assert_eq!(st.flatten(), values);
            prop_assert_eq!(st.layout(), l);
        }
    }
}
