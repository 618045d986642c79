//! The prediction formula and its a-priori error bounds.
//!
//! `x̂(t+T) = Φ(T)x̂(t) + Γ_ω(T)ω̂_r(t) + Γ_u(·)u_{0..N}` with the prediction
//! error split into the remainder term `O_r` (future-disturbance ignorance,
//! bounded by `T^{r+2}/(r+2)!·μ·ε_r`) and the observation term `O_e`
//! (ultimately bounded by `ε_r·√(1/(2αδ))` for a certified gain).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matseries::{self, SeriesOptions};
use crate::model::{AugmentedModel, ControlSchedule, LtiModel};

/// A future-state prediction made at `made_at` for `target_time`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub made_at: f64,
    pub horizon: f64,
    pub target_time: f64,
    pub xhat_future: DVector<f64>,
}

/// The two a-priori error bounds and their sum.
#[derive(Debug, Clone, Copy)]
pub struct ErrorBudget {
    pub o_r_bound: f64,
    pub o_e_bound: f64,
    pub total: f64,
}

/// Known-input convolution `∫_t^{t+T} e^{A(t+T−s)} B_u u(s−h) ds`, split per
/// constant segment of the schedule and evaluated through the `Γ_u` series.
pub fn control_convolution(
    model: &LtiModel,
    sched: &ControlSchedule,
    t: f64,
    horizon: f64,
    opts: &SeriesOptions,
) -> Result<DVector<f64>> {
    sched.check_window(t, horizon, model.h)?;
    let end = t + horizon;
    // segment boundaries in the s coordinate (input time + h)
    let mut start = t;
    let mut value = &sched.u0;
    let mut acc = DVector::zeros(model.n());
    for (bp, v) in sched.breakpoints.iter().zip(&sched.values) {
        let stop = bp + model.h;
        let g = matseries::gamma_u(&model.a, &model.b_u, end - start, end - stop, opts)?;
        acc += g * value;
        start = stop;
        value = v;
    }
    let g = matseries::gamma_u(&model.a, &model.b_u, end - start, 0.0, opts)?;
    acc += g * value;
    Ok(acc)
}

/// The observer-free prediction formula: `Φ(T)x̂ + Γ_ω(T)ω̂_r + Γ_u(·)u`.
#[allow(clippy::too_many_arguments)]
pub fn predict(
    model: &LtiModel,
    aug: &AugmentedModel,
    xhat: &DVector<f64>,
    omega_r_hat: &DVector<f64>,
    sched: &ControlSchedule,
    t: f64,
    horizon: f64,
    opts: &SeriesOptions,
) -> Result<Prediction> {
    if xhat.len() != model.n() {
        return Err(Error::Dimension("xhat must have length n".into()));
    }
    if omega_r_hat.len() != (aug.r + 1) * model.q() {
        return Err(Error::Dimension("omega_r_hat must have length (r+1)q".into()));
    }
    let phi = matseries::phi(&model.a, horizon, opts)?;
    let gamma = matseries::big_gamma_omega(&model.a, &model.b_omega, horizon, aug.r, opts)?;
    let conv = control_convolution(model, sched, t, horizon, opts)?;
    let xhat_future = &phi * xhat + gamma.to_matrix() * omega_r_hat + conv;
    Ok(Prediction {
        made_at: t,
        horizon,
        target_time: t + horizon,
        xhat_future,
    })
}

/// Remainder bound `‖O_r‖ ≤ T^{r+2}/(r+2)! · μ · ε_r`.
pub fn o_r_bound(
    model: &LtiModel,
    horizon: f64,
    r: usize,
    epsilon_r: f64,
    grid_points: usize,
    opts: &SeriesOptions,
) -> Result<f64> {
    if epsilon_r < 0.0 {
        return Err(Error::InvalidArgument("epsilon_r must be >= 0".into()));
    }
    if epsilon_r == 0.0 {
        return Ok(0.0);
    }
    let mu = matseries::mu_constant(&model.a, &model.b_omega, horizon, r, grid_points, opts)?;
    let mut coeff = 1.0;
    for k in 1..=(r + 2) {
        coeff *= horizon / k as f64;
    }
    Ok(coeff * mu * epsilon_r)
}

/// Ultimate bound of the observation-error term: `ε_r·√(1/(2αδ))`.
pub fn o_e_ultimate_bound(alpha: f64, delta: f64, epsilon_r: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha and delta must be positive, got alpha={alpha}, delta={delta}"
        )));
    }
    if epsilon_r < 0.0 {
        return Err(Error::InvalidArgument("epsilon_r must be >= 0".into()));
    }
    Ok(epsilon_r * (1.0 / (2.0 * alpha * delta)).sqrt())
}

/// Total a-priori budget: remainder plus ultimate observation bound.
#[allow(clippy::too_many_arguments)]
pub fn total_error_budget(
    model: &LtiModel,
    horizon: f64,
    r: usize,
    epsilon_r: f64,
    grid_points: usize,
    alpha: f64,
    delta: f64,
    opts: &SeriesOptions,
) -> Result<ErrorBudget> {
    let o_r = o_r_bound(model, horizon, r, epsilon_r, grid_points, opts)?;
    let o_e = o_e_ultimate_bound(alpha, delta, epsilon_r)?;
    Ok(ErrorBudget {
        o_r_bound: o_r,
        o_e_bound: o_e,
        total: o_r + o_e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_augmented;
    use nalgebra::{dvector, DMatrix};

    fn opts() -> SeriesOptions {
        SeriesOptions::default()
    }

    #[test]
    fn convolution_zero_inputs() {
        let model = LtiModel::benchmark_plant(0.5);
        let sched = ControlSchedule::new(
            dvector![0.0],
            vec![0.1, 0.2],
            vec![dvector![0.0], dvector![0.0]],
        )
        .unwrap();
        let v = control_convolution(&model, &sched, 0.3, 0.5, &opts()).unwrap();
        assert_eq!(v, DVector::zeros(2));
    }

    #[test]
    fn convolution_constant_input_zero_dynamics() {
        let model = LtiModel::new(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, 2.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            0.0,
        )
        .unwrap();
        let sched = ControlSchedule::constant(dvector![3.0]);
        let t_h = 0.4;
        let v = control_convolution(&model, &sched, 1.0, t_h, &opts()).unwrap();
        // T·B_u·u0
        assert!((v - dvector![1.2, 2.4]).norm() < 1e-14);
    }

    #[test]
    fn convolution_rejects_out_of_window_breakpoints() {
        let model = LtiModel::benchmark_plant(0.5);
        let sched =
            ControlSchedule::new(dvector![0.0], vec![5.0], vec![dvector![1.0]]).unwrap();
        assert!(control_convolution(&model, &sched, 0.0, 0.5, &opts()).is_err());
    }

    #[test]
    fn predict_zero_horizon_returns_state() {
        let model = LtiModel::benchmark_plant(0.5);
        let aug = build_augmented(&model, 3).unwrap();
        let xhat = dvector![1.0, -2.0];
        let omega_r = DVector::zeros(4);
        let sched = ControlSchedule::constant(dvector![0.7]);
        let p = predict(&model, &aug, &xhat, &omega_r, &sched, 1.0, 0.0, &opts()).unwrap();
        assert_eq!(p.target_time, 1.0);
        assert!((p.xhat_future - xhat).norm() < 1e-14);
    }

    #[test]
    fn o_r_bound_zero_epsilon() {
        let model = LtiModel::benchmark_plant(0.5);
        assert_eq!(o_r_bound(&model, 0.5, 3, 0.0, 100, &opts()).unwrap(), 0.0);
        assert!(o_r_bound(&model, 0.5, 3, -1.0, 100, &opts()).is_err());
    }

    #[test]
    fn o_r_bound_closed_form_zero_dynamics() {
        // A = 0, B_ω = 1 → μ = 1; r = 0, T = 1, ε = 2 → 1/2!·1·2 = 1
        let model = LtiModel::new(
            DMatrix::zeros(1, 1),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            0.0,
        )
        .unwrap();
        let b = o_r_bound(&model, 1.0, 0, 2.0, 10, &opts()).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn o_e_bound_arithmetic() {
        assert_eq!(o_e_ultimate_bound(0.5, 1.0, 0.0).unwrap(), 0.0);
        assert!((o_e_ultimate_bound(0.5, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(o_e_ultimate_bound(0.0, 1.0, 1.0).is_err());
        assert!(o_e_ultimate_bound(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn o_e_bound_published_design_value() {
        // αδ = 6.87e5, ε_r = 3Ω⁴ → ≈ 2.56e-3·Ω⁴
        let omega: f64 = 2.0;
        let eps = 3.0 * omega.powi(4);
        let b = o_e_ultimate_bound(6.87e5, 1.0, eps).unwrap();
        assert!((b / omega.powi(4) - 2.559e-3).abs() < 5e-6);
    }

    #[test]
    fn budget_sums() {
        let model = LtiModel::benchmark_plant(0.5);
        let b = total_error_budget(&model, 0.5, 3, 3.0 * 16.0, 1000, 6.87e5, 1.0, &opts()).unwrap();
        assert!((b.total - (b.o_r_bound + b.o_e_bound)).abs() < 1e-15);
        let z = total_error_budget(&model, 0.5, 3, 0.0, 1000, 1.0, 1.0, &opts()).unwrap();
        assert_eq!((z.o_r_bound, z.o_e_bound, z.total), (0.0, 0.0, 0.0));
    }
}
