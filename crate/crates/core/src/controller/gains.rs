use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent `m_c = num / den` with both integers odd and `0.5 < m_c < 1`.
///
/// Serialized as `"num/den"`; also accepts `{"num": 3, "den": 5}` or a plain
/// number such as `0.6`, which is matched to the odd ratio it equals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OddRatioRepr", into = "String")]
pub struct OddRatio {
    pub num: u32,
    pub den: u32,
}

impl OddRatio {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        let r = Self { num, den };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.value();
        if !(v > 0.5 && v < 1.0) {
            return Err(interval_error(v));
        }
        if self.num.is_multiple_of(2) || self.den.is_multiple_of(2) {
            return Err(Error::invalid(
                "m_c",
                format!(
                    "numerator and denominator must both be odd, got {}/{}",
                    self.num, self.den
                ),
            ));
        }
        Ok(())
    }

    /// Odd ratio with denominator below 100 equal to `v` (within 1e-12).
    pub fn from_value(v: f64) -> Result<Self> {
        if !(v > 0.5 && v < 1.0) {
            return Err(interval_error(v));
        }
        (1..100u32)
            .step_by(2)
            .flat_map(|den| (1..den).step_by(2).map(move |num| Self { num, den }))
            .find(|r| (r.value() - v).abs() < 1e-12)
            .ok_or_else(|| Error::invalid("m_c", format!("{v} is not a ratio of odd integers")))
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn interval_error(v: f64) -> Error {
    Error::invalid(
        "m_c",
        format!("must lie in the open interval (0.5, 1), got {v}"),
    )
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OddRatioRepr {
    Value(f64),
    Text(String),
    Parts(RatioParts),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RatioParts {
    num: u32,
    den: u32,
}

impl TryFrom<OddRatioRepr> for OddRatio {
    type Error = Error;

    fn try_from(r: OddRatioRepr) -> Result<Self> {
        match r {
            OddRatioRepr::Value(v) => Self::from_value(v),
            OddRatioRepr::Parts(p) => Self::new(p.num, p.den),
            OddRatioRepr::Text(s) => {
                let parsed = s
                    .split_once('/')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                match parsed {
                    Some((num, den)) if den > 0 => Self::new(num, den),
                    _ => Err(Error::invalid(
                        "m_c",
                        format!("expected \"num/den\", got {s:?}"),
                    )),
                }
            }
        }
    }
}

impl From<OddRatio> for String {
    fn from(r: OddRatio) -> Self {
        format!("{}/{}", r.num, r.den)
    }
}

impl Default for OddRatio {
    fn default() -> Self {
        Self { num: 3, den: 5 }
    }
}

/// Symmetric positive-definite adaptation gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainMatrix {
    /// `c · I`
    Scaled(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl GainMatrix {
    pub fn validate(&self, name: &str, dim: usize) -> Result<()> {
        match self {
            GainMatrix::Scaled(c) => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(Error::invalid(
                        name,
                        format!("must be positive definite, got {c}·I"),
                    ));
                }
            }
            GainMatrix::Diagonal(d) => {
                if d.len() != dim {
                    return Err(Error::invalid(
                        name,
                        format!("expected {dim} diagonal entries, got {}", d.len()),
                    ));
                }
                if d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::invalid(name, "diagonal entries must be positive"));
                }
            }
            GainMatrix::Full(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::invalid(
                        name,
                        format!("expected a {dim}×{dim} matrix"),
                    ));
                }
                let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
                if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
                    return Err(Error::invalid(name, "matrix must be symmetric"));
                }
                if m.cholesky().is_none() {
                    return Err(Error::invalid(name, "matrix must be positive definite"));
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            GainMatrix::Scaled(c) => v * *c,
            GainMatrix::Diagonal(d) => {
                DVector::from_iterator(v.len(), v.iter().zip(d).map(|(a, b)| a * b))
            }
            GainMatrix::Full(rows) => DVector::from_iterator(
                v.len(),
                rows.iter()
                    .map(|r| r.iter().zip(v.iter()).map(|(a, b)| a * b).sum()),
            ),
        }
    }

    /// Left-multiplies every column of `m`.
    pub fn apply_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            GainMatrix::Scaled(c) => m * *c,
            _ => {
                let mut out = m.clone();
                for (j, col) in m.column_iter().enumerate() {
                    out.set_column(j, &self.apply(&col.into_owned()));
                }
                out
            }
        }
    }
}

/// Rapid finite-time command filter tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterGains {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub eps_c: f64,
    pub m_d: f64,
    pub m_ic: f64,
}

impl Default for FilterGains {
    fn default() -> Self {
        Self {
            a1: 4.0,
            a2: 4.0,
            b1: 4.0,
            b2: 4.0,
            eps_c: 0.05,
            m_d: 0.6,
            m_ic: 0.7,
        }
    }
}

impl FilterGains {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        for (name, v) in [
            ("a1", self.a1),
            ("a2", self.a2),
            ("b1", self.b1),
            ("b2", self.b2),
            ("eps_c", self.eps_c),
        ] {
            positive(&format!("{prefix}.{name}"), v)?;
        }
        if !(self.m_d > 0.0 && self.m_d < 1.0) {
            return Err(Error::invalid(
                format!("{prefix}.m_d"),
                format!("must lie in (0, 1), got {}", self.m_d),
            ));
        }
        let lo = self.m_d / (2.0 - self.m_d);
        if !(self.m_ic > lo && self.m_ic < 1.0) {
            return Err(Error::invalid(
                format!("{prefix}.m_ic"),
                format!(
                    "must lie in (m_d/(2 - m_d), 1) = ({lo}, 1), got {}",
                    self.m_ic
                ),
            ));
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be > 0, got {v}")))
    }
}

/// Tuning of one backstepping step.
///
/// `filter` parameterizes the command filter that produces `η_{i,c}` from
/// `α_{i−1}`; it is unused on step 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepGains {
    pub k: f64,
    pub r: f64,
    pub n: f64,
    pub kappa: f64,
    pub kappa_n: f64,
    pub tau_sigma: f64,
    pub eps_sigma: f64,
    pub gamma_omega: GainMatrix,
    pub gamma_l: GainMatrix,
    /// Weight on the prediction error in the composite laws.
    pub gamma_s: f64,
    /// σ-modification decay shared by `Ω̂` and `l̂`.
    pub gamma_decay: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma_n1: f64,
    pub gamma_n2: f64,
    pub gamma_n3: f64,
    pub upsilon1: f64,
    pub upsilon2: f64,
    pub filter: FilterGains,
}

impl Default for StepGains {
    fn default() -> Self {
        Self {
            k: 5.0,
            r: 1.0,
            n: 0.5,
            kappa: 0.1,
            kappa_n: 0.1,
            tau_sigma: 0.01,
            eps_sigma: 0.01,
            gamma_omega: GainMatrix::Scaled(10.0),
            gamma_l: GainMatrix::Scaled(15.0),
            gamma_s: 5.0,
            gamma_decay: 0.001,
            gamma1: 15.0,
            gamma2: 0.001,
            gamma3: 0.001,
            gamma_n1: 15.0,
            gamma_n2: 0.001,
            gamma_n3: 0.001,
            upsilon1: 10.0,
            upsilon2: 1.0,
            filter: FilterGains::default(),
        }
    }
}

impl StepGains {
    /// Checks every scalar constraint; matrix sizes are checked against the
    /// estimator separately (`estimator_dims = (k, m)`).
    pub fn validate(&self, step: usize, estimator_dims: Option<(usize, usize)>) -> Result<()> {
        let p = format!("steps[{step}]");
        for (name, v) in [
            ("k", self.k),
            ("r", self.r),
            ("n", self.n),
            ("kappa", self.kappa),
            ("kappa_n", self.kappa_n),
            ("tau_sigma", self.tau_sigma),
            ("eps_sigma", self.eps_sigma),
            ("gamma_s", self.gamma_s),
            ("gamma_decay", self.gamma_decay),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma_n1", self.gamma_n1),
            ("gamma_n2", self.gamma_n2),
            ("gamma_n3", self.gamma_n3),
            ("upsilon1", self.upsilon1),
            ("upsilon2", self.upsilon2),
        ] {
            positive(&format!("{p}.{name}"), v)?;
        }
        if step >= 2 {
            self.filter.validate(&format!("{p}.filter"))?;
        }
        if let Some((k, m)) = estimator_dims {
            self.gamma_omega.validate(&format!("{p}.gamma_omega"), k)?;
            self.gamma_l.validate(&format!("{p}.gamma_l"), m)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    #[serde(default)]
    pub m_c: OddRatio,
    pub steps: Vec<StepGains>,
}

impl ControllerGains {
    /// Defaults for an `order`-step plant.
    pub fn defaults(order: usize) -> Self {
        Self {
            m_c: OddRatio::default(),
            steps: vec![StepGains::default(); order],
        }
    }

    /// Pendulum tuning: `k₁ = 8`, `k₂ = 5`, `r = 1`, `n = 0.5`, `m_c = 0.6`,
    /// `Γ_Ω = 10I`, `Γ_l = 15I`, `γ_s = 5`, `γ₁ = γ_n1 = 15`,
    /// `γ₂ = γ_n2 = 0.001`; every other gain at its default.
    pub fn pendulum() -> Self {
        let mut g = Self::defaults(2);
        g.steps[0].k = 8.0;
        g.steps[1].k = 5.0;
        g
    }

    pub fn order(&self) -> usize {
        self.steps.len()
    }

    pub fn m_c(&self) -> f64 {
        self.m_c.value()
    }

    pub fn validate(&self, estimator_dims: &[Option<(usize, usize)>]) -> Result<()> {
        self.m_c.validate()?;
        if estimator_dims.len() != self.steps.len() {
            return Err(Error::Dimension {
                context: "gain steps vs plant order",
                expected: estimator_dims.len(),
                got: self.steps.len(),
            });
        }
        for (i, (s, dims)) in self.steps.iter().zip(estimator_dims).enumerate() {
            s.validate(i + 1, *dims)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_ratio_bounds() {
        assert!(OddRatio::new(3, 5).is_ok());
        assert!(OddRatio::new(7, 9).is_ok());
        let e = OddRatio::new(1, 2).unwrap_err().to_string();
        assert!(e.contains("(0.5, 1)"), "{e}");
        let e = OddRatio::new(2, 3).unwrap_err().to_string();
        assert!(e.contains("odd"));
        // 0.5 itself is excluded; 3/3 too
        assert!(OddRatio::new(3, 3).is_err());
        let e = OddRatio::new(1, 3).unwrap_err().to_string();
        assert!(e.contains("(0.5, 1)"), "{e}");
    }

    #[test]
    fn odd_ratio_forms() {
        let parse = |s: &str| serde_json::from_str::<OddRatio>(s);
        assert_eq!(parse("0.6").unwrap(), OddRatio::new(3, 5).unwrap());
        assert_eq!(parse(r#""5/7""#).unwrap(), OddRatio::new(5, 7).unwrap());
        assert_eq!(
            parse(r#"{"num": 7, "den": 9}"#).unwrap(),
            OddRatio::new(7, 9).unwrap()
        );
        assert!(parse("0.5").unwrap_err().to_string().contains("(0.5, 1)"));
        assert!(parse("0.75").is_err());
        assert!(parse(r#""3/""#).is_err());
        assert_eq!(
            serde_json::to_string(&OddRatio::default()).unwrap(),
            r#""3/5""#
        );
    }

    #[test]
    fn default_filter_interval() {
        let f = FilterGains::default();
        f.validate("f").unwrap();
        let bad = FilterGains { m_ic: 0.4, ..f };
        assert!(bad.validate("f").unwrap_err().to_string().contains("m_ic"));
    }

    #[test]
    fn gain_matrix_checks() {
        assert!(GainMatrix::Scaled(-1.0).validate("g", 3).is_err());
        assert!(GainMatrix::Diagonal(vec![1.0, 2.0])
            .validate("g", 3)
            .is_err());
        assert!(GainMatrix::Full(vec![vec![1.0, 2.0], vec![2.0, 1.0]])
            .validate("g", 2)
            .is_err());
        GainMatrix::Full(vec![vec![2.0, 1.0], vec![1.0, 2.0]])
            .validate("g", 2)
            .unwrap();
        let v = DVector::from_vec(vec![1.0, -1.0]);
        let full = GainMatrix::Full(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert_eq!(full.apply(&v), DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(
            GainMatrix::Diagonal(vec![3.0, 4.0]).apply(&v),
            DVector::from_vec(vec![3.0, -4.0])
        );
    }

    #[test]
    fn pendulum_gains_validate() {
        let g = ControllerGains::pendulum();
        g.validate(&[None, Some((216, 7))]).unwrap();
        let mut bad = g.clone();
        bad.steps[1].gamma_s = 0.0;
        assert!(bad
            .validate(&[None, Some((216, 7))])
            .unwrap_err()
            .to_string()
            .contains("gamma_s"));
    }
}
