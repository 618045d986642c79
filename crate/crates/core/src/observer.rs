//! Runtime integration of the augmented Luenberger observer
//! `η̂̇ = (Ā−LC̄)η̂ + B̄_u u(t−h) + L y(t)` and its prediction output
//! `ξ(t) = K(T)η̂(t)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matseries::SeriesOptions;
use crate::model::{k_of_t, AugmentedModel, LtiModel};

/// Observer state `η̂` at a given time.
#[derive(Debug, Clone)]
pub struct ObserverState {
    pub eta_hat: DVector<f64>,
    pub time: f64,
}

/// Observer gain and stepping parameters.
#[derive(Debug, Clone)]
pub struct ObserverConfig {
    /// Gain `L` (l × p).
    pub l_gain: DMatrix<f64>,
    /// Prediction horizon `T`.
    pub horizon: f64,
    /// Fixed integration step; must divide the ZOH period.
    pub dt: f64,
}

impl ObserverConfig {
    pub fn validate(&self, aug: &AugmentedModel, zoh_period: f64) -> Result<()> {
        if self.l_gain.nrows() != aug.l() || self.l_gain.ncols() != aug.c_bar.nrows() {
            return Err(Error::Dimension(format!(
                "gain must be {}x{}, got {}x{}",
                aug.l(),
                aug.c_bar.nrows(),
                self.l_gain.nrows(),
                self.l_gain.ncols()
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("dt must be > 0".into()));
        }
        let ratio = zoh_period / self.dt;
        if (ratio - ratio.round()).abs() > 1e-12 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "dt = {} must divide the ZOH period {}",
                self.dt, zoh_period
            )));
        }
        Ok(())
    }
}

/// One fixed-step 4th-order integration step of the observer with `u` and
/// `y` held constant over the step.
pub fn observer_step(
    state: &ObserverState,
    cfg: &ObserverConfig,
    aug: &AugmentedModel,
    u_delayed: &DVector<f64>,
    y: &DVector<f64>,
    dt: f64,
) -> Result<ObserverState> {
    if u_delayed.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("observer inputs"));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be > 0".into()));
    }
    let a_cl = &aug.a_bar - &cfg.l_gain * &aug.c_bar;
    let forcing = &aug.b_bar_u * u_delayed + &cfg.l_gain * y;
    let f = |eta: &DVector<f64>| &a_cl * eta + &forcing;

    let k1 = f(&state.eta_hat);
    let k2 = f(&(&state.eta_hat + (dt / 2.0) * &k1));
    let k3 = f(&(&state.eta_hat + (dt / 2.0) * &k2));
    let k4 = f(&(&state.eta_hat + dt * &k3));
    let eta_hat = &state.eta_hat + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ok(ObserverState {
        eta_hat,
        time: state.time + dt,
    })
}

/// Observer prediction output `ξ(t) = K(T)η̂(t)`.
pub fn xi(
    state: &ObserverState,
    aug: &AugmentedModel,
    model: &LtiModel,
    horizon: f64,
    opts: &SeriesOptions,
) -> Result<DVector<f64>> {
    let k = k_of_t(aug, model, horizon, opts)?;
    Ok(k * &state.eta_hat)
}

/// Observation-induced prediction error `O_e(t) = K(T)(η − η̂)`; needs the
/// ground-truth `η`, so this is a simulation-side diagnostic.
pub fn o_e_now(
    eta: &DVector<f64>,
    eta_hat: &DVector<f64>,
    aug: &AugmentedModel,
    model: &LtiModel,
    horizon: f64,
    opts: &SeriesOptions,
) -> Result<DVector<f64>> {
    let k = k_of_t(aug, model, horizon, opts)?;
    Ok(k * (eta - eta_hat))
}
