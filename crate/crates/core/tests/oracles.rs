//! Independent numerical oracles for the series evaluations: RK4 ODE
//! propagation for the state-transition matrix and composite Simpson
//! quadrature (10⁴ panels) for the convolution blocks.

mod common;

use common::*;
use nalgebra::{dvector, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statepred::matseries::{self, SeriesOptions};
use statepred::model::{build_augmented, k_of_t};
use statepred::LtiModel;

fn opts() -> SeriesOptions {
    SeriesOptions::default()
}

#[test]
fn phi_matches_ode_oracle() {
    let o = opts();
    // benchmark plant dynamics
    let model = LtiModel::benchmark_plant(0.5);
    let oracle = expm_ode(&model.a, 0.5, 20_000);
    let p = matseries::phi(&model.a, 0.5, &o).unwrap();
    assert!(rel_err(&p, &oracle) < 1e-11);

    // randomized stable systems
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let n = rand::Rng::random_range(&mut rng, 2..=5);
        let a = random_stable_matrix(&mut rng, n, 10.0);
        let t = rand::Rng::random_range(&mut rng, 0.05..1.0);
        let oracle = expm_ode(&a, t, 20_000);
        let p = matseries::phi(&a, t, &o).unwrap();
        assert!(
            rel_err(&p, &oracle) < 1e-10,
            "phi oracle mismatch: {:.3e}",
            rel_err(&p, &oracle)
        );
    }
}

#[test]
fn gamma_u_matches_simpson_quadrature() {
    // Γ_u(a, b) = ∫_b^a e^{Aτ}B_u dτ = e^{Ab}·∫_0^{a−b} e^{Aσ}dσ·B_u;
    // the shifted integral comes from 10⁴-panel Simpson over RK4-propagated
    // exponential samples, the prefactor from a separate high-resolution
    // RK4 run.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let o = opts();
    for _ in 0..5 {
        let n = rand::Rng::random_range(&mut rng, 2..=4);
        let a_mat = random_stable_matrix(&mut rng, n, 8.0);
        let b_u = random_matrix(&mut rng, n, 2);
        let b = rand::Rng::random_range(&mut rng, 0.0..0.5);
        let a = b + rand::Rng::random_range(&mut rng, 0.1..0.6);

        let grid = expm_grid(&a_mat, a - b, 10_000, 1);
        let integral = simpson_from_grid(&grid, a - b, |_| 1.0);
        let oracle = expm_ode(&a_mat, b, 10_000) * integral * &b_u;

        let g = matseries::gamma_u(&a_mat, &b_u, a, b, &o).unwrap();
        assert!(
            rel_err(&g, &oracle) < 1e-10,
            "gamma_u oracle mismatch: {:.3e}",
            rel_err(&g, &oracle)
        );
    }
}

#[test]
fn gamma_omega_blocks_match_simpson_quadrature() {
    // block i of Γ_ω(T) equals ∫_0^T e^{A(T−s)}B_ω s^i/i! ds; with
    // τ = T−s this is ∫_0^T e^{Aτ}(T−τ)^i/i! dτ.
    let o = opts();
    let t = 0.5;
    let r = 3;
    for (a_mat, b_omega) in [
        (
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -9.0, 3.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        ),
        {
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            (
                random_stable_matrix(&mut rng, 4, 6.0),
                random_matrix(&mut rng, 4, 2),
            )
        },
    ] {
        let grid = expm_grid(&a_mat, t, 10_000, 1);
        let row = matseries::big_gamma_omega(&a_mat, &b_omega, t, r, &o).unwrap();
        let mut factorial = 1.0;
        for (i, block) in row.blocks().iter().enumerate() {
            if i > 0 {
                factorial *= i as f64;
            }
            let oracle =
                simpson_from_grid(&grid, t, |tau| (t - tau).powi(i as i32) / factorial) * &b_omega;
            assert!(
                rel_err(block, &oracle) < 1e-10,
                "block {i} oracle mismatch: {:.3e}",
                rel_err(block, &oracle)
            );

            // the bare series factor carries the T^{i+1}/(i+1)! coefficient
            let g = matseries::gamma_omega_i(&a_mat, t, i, &o).unwrap();
            let coeff = t.powi(i as i32 + 1) / (factorial * (i as f64 + 1.0));
            assert!(rel_err(&(coeff * g * &b_omega), &oracle) < 1e-10);
        }
    }
}

#[test]
fn control_convolution_matches_simpson_quadrature() {
    // benchmark plant, T = h = 0.5, ten ZOH segments of 0.05 s with random
    // levels. With τ = t+T−s the convolution is
    // Σ_j e^{A·0.05j}·(∫_0^{0.05} e^{Aσ}dσ)·B_u·v_{9−j}.
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let model = LtiModel::benchmark_plant(0.5);
    let o = opts();
    let t = 1.0;
    let seg = 0.05;
    let values: Vec<DVector<f64>> = (0..10)
        .map(|_| dvector![rand::Rng::random_range(&mut rng, -2.0..2.0)])
        .collect();
    let sched = statepred::ControlSchedule::new(
        values[0].clone(),
        (1..10).map(|k| 0.5 + seg * k as f64).collect(),
        values[1..].to_vec(),
    )
    .unwrap();

    let grid = expm_grid(&model.a, seg, 10_000, 1);
    let seg_integral = simpson_from_grid(&grid, seg, |_| 1.0);
    let mut oracle = DVector::zeros(2);
    for j in 0..10 {
        let prefactor = expm_ode(&model.a, seg * j as f64, 4_000);
        oracle += prefactor * &seg_integral * &model.b_u * &values[9 - j];
    }

    let conv = statepred::predictor::control_convolution(&model, &sched, t, 0.5, &o).unwrap();
    assert!(
        (conv.clone() - &oracle).norm() / oracle.norm().max(1.0) < 1e-10,
        "convolution oracle mismatch: {:.3e}",
        (conv - oracle).norm()
    );
}

#[test]
fn prediction_map_matches_disturbance_quadrature_for_cubic() {
    // degree-3 disturbance is represented exactly by the r = 3 stack, so
    // K(T)η(t) must reproduce Φ(T)x + ∫_0^T e^{A(T−σ)}B_ω ω(t+σ)dσ.
    let model = LtiModel::benchmark_plant(0.5);
    let aug = build_augmented(&model, 3).unwrap();
    let o = opts();
    let (t, horizon) = (0.7, 0.5);
    let coeffs = [1.3, -0.8, 0.5, 2.1];
    let omega = |s: f64| coeffs[0] + coeffs[1] * s + coeffs[2] * s * s + coeffs[3] * s * s * s;

    let x = dvector![0.4, -1.2];
    let dist = statepred::DisturbanceSignal::Polynomial {
        coeffs: coeffs.iter().map(|&c| dvector![c]).collect(),
    };
    let eta = statepred::model::AugmentedState::new(&x, &dist.omega_r_stack(t, 3)).eta;

    let grid = expm_grid(&model.a, horizon, 10_000, 1);
    // node k sits at τ = k·dτ with e^{Aτ} = grid[k]; the integrand weight is
    // ω(t + T − τ)
    let integral = simpson_from_grid(&grid, horizon, |tau| omega(t + horizon - tau)) * &model.b_omega;
    let oracle = matseries::phi(&model.a, horizon, &o).unwrap() * &x + integral;

    let k = k_of_t(&aug, &model, horizon, &o).unwrap();
    let predicted = k * eta;
    assert!((predicted - oracle).norm() < 1e-8);
}

#[test]
fn mu_estimate_stable_under_grid_refinement() {
    let o = opts();
    let model = LtiModel::benchmark_plant(0.5);
    let coarse = matseries::mu_constant(&model.a, &model.b_omega, 0.5, 3, 1_000, &o).unwrap();
    let fine = matseries::mu_constant(&model.a, &model.b_omega, 0.5, 3, 10_000, &o).unwrap();
    assert!((coarse - fine).abs() / fine < 1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let a = random_stable_matrix(&mut rng, 3, 5.0);
    let b = random_matrix(&mut rng, 3, 1);
    let coarse = matseries::mu_constant(&a, &b, 0.8, 2, 1_000, &o).unwrap();
    let fine = matseries::mu_constant(&a, &b, 0.8, 2, 10_000, &o).unwrap();
    assert!((coarse - fine).abs() / fine < 1e-4);
}
