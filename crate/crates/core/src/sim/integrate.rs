use crate::error::{Error, Result};

fn check_stage(k: &[f64], stage: usize, t: f64) -> Result<()> {
    if k.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteStage { stage, t })
    }
}

/// One classical RK4 step of `ẏ = f(t, y)`.
pub fn rk4_step<F>(y: &[f64], t: f64, dt: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let k1 = f(t, y)?;
    rk4_step_from(y, t, dt, k1, f)
}

/// RK4 step with a precomputed first stage `k1 = f(t, y)`.
pub fn rk4_step_from<F>(y: &[f64], t: f64, dt: f64, k1: Vec<f64>, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    check_stage(&k1, 1, t)?;
    let axpy =
        |k: &[f64], h: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + h * b).collect() };

    let k2 = f(t + 0.5 * dt, &axpy(&k1, 0.5 * dt))?;
    check_stage(&k2, 2, t)?;
    let k3 = f(t + 0.5 * dt, &axpy(&k2, 0.5 * dt))?;
    check_stage(&k3, 3, t)?;
    let k4 = f(t + dt, &axpy(&k3, dt))?;
    check_stage(&k4, 4, t)?;

    Ok(y.iter()
        .enumerate()
        .map(|(i, v)| v + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}
