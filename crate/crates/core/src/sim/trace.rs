use std::io::Write;

use crate::error::Result;

/// Logged quantities of one estimator-bearing step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub w: f64,
    pub p_hat: Vec<f64>,
    /// Ground-truth periodic parameter, for comparison only.
    pub p_true: Vec<f64>,
    /// `F_i(true) − w_i Ω̂ᵀĤ`
    pub e_f: f64,
    pub s_n: f64,
    pub omega_norm: f64,
    pub mu_hat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub eta: Vec<f64>,
    pub y_d: f64,
    pub xi: Vec<f64>,
    pub sigma: Vec<f64>,
    pub delta: Vec<f64>,
    pub u: f64,
    /// One entry per estimator step, in [`Trace::estimator_steps`] order.
    pub steps: Vec<StepTrace>,
}

/// Uniformly sampled record of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub order: usize,
    /// 1-based indices of the steps carrying an estimator.
    pub estimator_steps: Vec<usize>,
    /// Parameter dimension of each estimator step.
    pub param_dims: Vec<usize>,
    pub samples: Vec<TraceSample>,
}

impl Trace {
    pub fn new(order: usize, estimator_steps: Vec<usize>, param_dims: Vec<usize>) -> Self {
        Self {
            order,
            estimator_steps,
            param_dims,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// CSV header. For a second-order plant with one estimator on step 2 it
    /// reads `t,eta1,eta2,y_d,xi1,u,w2,p_hat2,e_F2,s_n2,delta1,delta2,omega_norm2`.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=self.order).map(|i| format!("eta{i}")));
        h.extend(["y_d", "xi1", "u"].map(String::from));
        for (&i, &q) in self.estimator_steps.iter().zip(&self.param_dims) {
            h.push(format!("w{i}"));
            if q == 1 {
                h.push(format!("p_hat{i}"));
            } else {
                h.extend((1..=q).map(|j| format!("p_hat{i}_{j}")));
            }
            h.push(format!("e_F{i}"));
            h.push(format!("s_n{i}"));
        }
        h.extend((1..=self.order).map(|i| format!("delta{i}")));
        h.extend(
            self.estimator_steps
                .iter()
                .map(|i| format!("omega_norm{i}")),
        );
        h
    }

    /// Writes the trace as CSV: header row, LF line endings, every value in
    /// scientific notation with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(self.csv_header())?;
        let fmt = |v: f64| format!("{v:.16e}");
        for s in &self.samples {
            let mut row = vec![fmt(s.t)];
            row.extend(s.eta.iter().map(|v| fmt(*v)));
            row.extend([fmt(s.y_d), fmt(s.xi[0]), fmt(s.u)]);
            for st in &s.steps {
                row.push(fmt(st.w));
                row.extend(st.p_hat.iter().map(|v| fmt(*v)));
                row.push(fmt(st.e_f));
                row.push(fmt(st.s_n));
            }
            row.extend(s.delta.iter().map(|v| fmt(*v)));
            row.extend(s.steps.iter().map(|st| fmt(st.omega_norm)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> TraceSample {
        TraceSample {
            t,
            eta: vec![0.5, -0.25],
            y_d: 0.0,
            xi: vec![0.5, 0.1],
            sigma: vec![0.5, 0.1],
            delta: vec![0.0, 0.0],
            u: -1.0 / 3.0,
            steps: vec![StepTrace {
                w: 1.0,
                p_hat: vec![0.0],
                p_true: vec![1.0],
                e_f: 2.0,
                s_n: 0.0,
                omega_norm: 0.0,
                mu_hat: 0.0,
            }],
        }
    }

    #[test]
    fn header_matches_documented_order() {
        let tr = Trace::new(2, vec![2], vec![1]);
        assert_eq!(
            tr.csv_header().join(","),
            "t,eta1,eta2,y_d,xi1,u,w2,p_hat2,e_F2,s_n2,delta1,delta2,omega_norm2"
        );
    }

    #[test]
    fn csv_rows_are_lf_terminated_full_precision() {
        let mut tr = Trace::new(2, vec![2], vec![1]);
        tr.samples.push(sample(0.0));
        tr.samples.push(sample(0.001));
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(fields[5], "-3.3333333333333331e-1");
        let back: f64 = fields[5].parse().unwrap();
        assert_eq!(back, -1.0 / 3.0);
    }
}
