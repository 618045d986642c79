//! The two comparison predictors: error-correction (Léchappé) and
//! disturbance-forecast (Sanz).
//!
//! Both build on the disturbance-free prediction
//! `x_p(t) = Φ(T)x(t) + ∫ e^{A(t+T−s)}B_u u(s−h) ds`, with the input
//! integral computed exactly per ZOH segment through `Γ_u`.

use nalgebra::DVector;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::matseries::{self, SeriesOptions};
use crate::model::{ControlSchedule, LtiModel};
use crate::predictor::control_convolution;

/// Ring buffer of uniformly spaced `(time, vector)` samples with
/// nearest-sample lookup.
#[derive(Debug, Clone)]
pub struct SampleHistory {
    samples: VecDeque<(f64, DVector<f64>)>,
    spacing: f64,
    capacity: usize,
}

/// History of `x_p` values for the error-correction predictor.
pub type XpHistory = SampleHistory;
/// History of `ω̄` values for the disturbance-forecast predictor.
pub type OmegaBarHistory = SampleHistory;

impl SampleHistory {
    /// `span` is the minimum time window the buffer must retain; samples are
    /// expected every `spacing` seconds.
    pub fn new(span: f64, spacing: f64) -> Self {
        let capacity = (span / spacing).round() as usize + 2;
        Self {
            samples: VecDeque::with_capacity(capacity),
            spacing,
            capacity,
        }
    }

    pub fn push(&mut self, t: f64, value: DVector<f64>) {
        if let Some(&(last, _)) = self.samples.back() {
            debug_assert!(t > last, "history timestamps must be monotone");
        }
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back((t, value));
    }

    /// Nearest stored sample within half a spacing of `t`.
    pub fn lookup(&self, t: f64) -> Result<&DVector<f64>> {
        let tol = self.spacing / 2.0 * (1.0 + 1e-9);
        self.samples
            .iter()
            .filter(|(ts, _)| (ts - t).abs() <= tol)
            .min_by(|(a, _), (b, _)| {
                (a - t).abs().partial_cmp(&(b - t).abs()).unwrap()
            })
            .map(|(_, v)| v)
            .ok_or_else(|| {
                Error::HistoryUnderflow(format!(
                    "no sample within {} of t = {t}",
                    self.spacing / 2.0
                ))
            })
    }
}

/// Disturbance-free prediction `x_p(t) = Φ(T)x(t) + Γ_u(·)u_{0..N}`.
pub fn x_p(
    model: &LtiModel,
    x: &DVector<f64>,
    sched: &ControlSchedule,
    t: f64,
    horizon: f64,
    opts: &SeriesOptions,
) -> Result<DVector<f64>> {
    let phi = matseries::phi(&model.a, horizon, opts)?;
    Ok(phi * x + control_convolution(model, sched, t, horizon, opts)?)
}

/// Error-correction predictor: `x̂(t+T) = x_p(t) + x(t) − x_p(t−T)`.
pub fn lechappe_predict(
    x_p_now: &DVector<f64>,
    x_now: &DVector<f64>,
    x_p_past: &DVector<f64>,
) -> DVector<f64> {
    x_p_now + x_now - x_p_past
}

/// Taylor forecast `ω̄(t) = Σ_{i=0}^{r} (T^i/i!)·ω̂^{(i)}(t)` of the
/// disturbance at `t+T` from the estimated derivative stack.
pub fn omega_bar_forecast(omega_r_hat: &DVector<f64>, q: usize, horizon: f64) -> DVector<f64> {
    let r = omega_r_hat.len() / q - 1;
    let mut omega_bar = DVector::zeros(q);
    let mut coeff = 1.0;
    for i in 0..=r {
        omega_bar += omega_r_hat.rows(i * q, q) * coeff;
        coeff *= horizon / (i as f64 + 1.0);
    }
    omega_bar
}

/// Disturbance-forecast predictor.
///
/// Forms the Taylor forecast `ω̄(t) = Σ_{i=0}^{r} (T^i/i!)·ω̂^{(i)}(t)` from
/// the observer's disturbance block, appends it to `history`, and returns
/// `x_p(t) + ∫_{t−T}^{t} e^{A(t−s)}B_ω ω̄(s) ds` with the integral solved by
/// the trapezoidal rule on `n_trapz` intervals (nodes resampled from the
/// history by nearest-sample lookup).
#[allow(clippy::too_many_arguments)]
pub fn sanz_predict(
    model: &LtiModel,
    x_now: &DVector<f64>,
    omega_r_hat: &DVector<f64>,
    sched: &ControlSchedule,
    t: f64,
    horizon: f64,
    history: &mut OmegaBarHistory,
    n_trapz: usize,
    opts: &SeriesOptions,
) -> Result<DVector<f64>> {
    if n_trapz < 1 {
        return Err(Error::InvalidArgument("n_trapz must be >= 1".into()));
    }
    history.push(t, omega_bar_forecast(omega_r_hat, model.q(), horizon));

    let base = x_p(model, x_now, sched, t, horizon, opts)?;
    let dt_node = horizon / n_trapz as f64;
    let mut integral = DVector::zeros(model.n());
    for j in 0..=n_trapz {
        let s = t - horizon + j as f64 * dt_node;
        let omega_s = history.lookup(s)?;
        let phi = matseries::phi(&model.a, horizon - j as f64 * dt_node, opts)?;
        let weight = if j == 0 || j == n_trapz { 0.5 } else { 1.0 };
        integral += phi * &model.b_omega * omega_s * (weight * dt_node);
    }
    Ok(base + integral)
}
