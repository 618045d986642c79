//! Implementations of the five subcommands.

use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};
use statepred::gain::{
    alpha_for, riccati_p_for_fixed_gain, spectrum, synthesize_gain, verify_lmi_with_k,
    CertificateReport, GainDesign,
};
use statepred::model::{build_augmented, k_of_t, observability_check};
use statepred::predictor::total_error_budget;
use statepred::simlab::{
    frequency_sweep, max_prediction_error, published_benchmark_gain, run_closed_loop, GainSource,
    Method,
};
use statepred::SeriesOptions;

use crate::config::{benchmark_config, matrix_from_rows, matrix_to_rows, parse_config, ConfigFile};
use crate::manifest::{write_output, RunManifest};
use crate::CliError;

const RANK_TOL: f64 = 1e-9;

fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Python companion script for plotting the per-method error columns of
/// `trace.csv` over time.
const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot the prediction-error columns of trace.csv."""
import csv
import sys
from pathlib import Path

import matplotlib.pyplot as plt

path = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "trace.csv")
with path.open() as fh:
    rows = list(csv.DictReader(fh))

t = [float(r["t"]) for r in rows]
fig, ax = plt.subplots(figsize=(8, 4))
for key in rows[0]:
    if key.startswith("err_"):
        ax.plot(t, [float(r[key]) for r in rows], label=key.removeprefix("err_"))
ax.set_xlabel("t [s]")
ax.set_ylabel("prediction error norm")
ax.legend()
fig.tight_layout()
out = path.with_name("errors.png")
fig.savefig(out, dpi=150)
print(f"wrote {out}")
"#;

pub fn cmd_simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let file = read_config(config)?;
    let cfg = file.experiment(seed)?;
    info!(
        "simulating {:.1} s at dt = {} with methods {:?}",
        cfg.t_end,
        cfg.dt,
        cfg.methods.iter().map(|m| m.name()).collect::<Vec<_>>()
    );
    let trace = run_closed_loop(&cfg).map_err(CliError::from_core)?;

    let mut manifest = RunManifest::new("simulate", cfg.seed, file);
    for method in &cfg.methods {
        let max = max_prediction_error(&trace, *method).map_err(CliError::from_core)?;
        println!("max prediction error ({}): {max:.6e}", method.name());
        manifest
            .metrics
            .insert(format!("max_err_{}", method.name()), max);
    }
    if let Some(design) = &trace.design {
        println!(
            "synthesized gain: alpha = {:.6e}, delta = {:.6e}, alpha*delta = {:.6e}",
            design.alpha,
            design.delta,
            design.alpha_delta()
        );
        manifest.metrics.insert("alpha".into(), design.alpha);
        manifest.metrics.insert("delta".into(), design.delta);
    }

    write_output(out, "trace.csv", &trace.to_csv())?;
    write_output(out, "plot_errors.py", PLOT_SCRIPT)?;
    manifest.outputs = vec!["trace.csv".into(), "plot_errors.py".into()];
    manifest.write(out)?;
    println!("wrote {}", out.join("trace.csv").display());
    Ok(())
}

pub fn cmd_reproduce_table2(out: &Path) -> Result<(), CliError> {
    // published per-method maxima, keyed by (omega, method)
    let reference = [
        (0.5, Method::Proposed, 1.7e-4),
        (0.5, Method::Lechappe, 0.60),
        (0.5, Method::Sanz, 8.9e-4),
        (2.0, Method::Proposed, 0.043),
        (2.0, Method::Lechappe, 2.23),
        (2.0, Method::Sanz, 0.21),
        (4.0, Method::Proposed, 0.66),
        (4.0, Method::Lechappe, 3.47),
        (4.0, Method::Sanz, 2.82),
    ];
    info!("running the benchmark sweep at omega in {{0.5, 2, 4}}");
    let gain = GainSource::Explicit(published_benchmark_gain());
    let rows = frequency_sweep(&[0.5, 2.0, 4.0], &gain).map_err(CliError::from_core)?;

    let mut csv = String::from("omega_rad_s,method,max_err\n");
    for row in &rows {
        csv.push_str(&format!("{},{},{:.6e}\n", row.omega, row.method.name(), row.max_err));
    }
    write_output(out, "table2.csv", &csv)?;

    println!("{:>10} {:>10} {:>12} {:>12} {:>8}", "omega", "method", "max_err", "reference", "ratio");
    let mut manifest = RunManifest::new("reproduce table2", 0, benchmark_config(0.5));
    for row in &rows {
        let reference = reference
            .iter()
            .find(|(o, m, _)| *o == row.omega && *m == row.method)
            .map(|(_, _, v)| *v)
            .unwrap_or(f64::NAN);
        println!(
            "{:>10} {:>10} {:>12.4e} {:>12.4e} {:>8.3}",
            row.omega,
            row.method.name(),
            row.max_err,
            reference,
            row.max_err / reference
        );
        manifest.metrics.insert(
            format!("max_err_{}_omega_{}", row.method.name(), row.omega),
            row.max_err,
        );
    }
    manifest.outputs = vec!["table2.csv".into()];
    manifest.write(out)?;
    println!("wrote {}", out.join("table2.csv").display());
    Ok(())
}

fn print_report(report: &CertificateReport) {
    for (name, verdict) in [
        ("stability/decay", report.cond_decay),
        ("prediction-gain", report.cond_gain),
        ("eigenvalue region", report.cond_region),
        ("P positive definite", report.p_positive),
    ] {
        println!(
            "  {name:<22} {}  (margin {:+.3e})",
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.margin
        );
    }
}

fn print_spectrum(design_spectrum: &[nalgebra::Complex<f64>]) {
    let formatted: Vec<String> = design_spectrum
        .iter()
        .map(|z| format!("{:.4}{:+.4}i", z.re, z.im))
        .collect();
    println!("closed-loop eigenvalues: [{}]", formatted.join(", "));
}

/// Machine-readable form of a certified design.
#[derive(Debug, Serialize, Deserialize)]
struct CertificateFile {
    gain: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    alpha: f64,
    delta: f64,
    alpha_delta: f64,
    certified: bool,
    eigenvalues: Vec<[f64; 2]>,
}

pub fn cmd_design(config: &Path, out: &Path) -> Result<(), CliError> {
    let file = read_config(config)?;
    let model = file.model()?;
    let aug = build_augmented(&model, file.observer.r).map_err(CliError::from_core)?;
    let (observable, rank) = observability_check(&aug, RANK_TOL);
    if !observable {
        return Err(CliError::Validation(format!(
            "the augmented pair (A, C) must be observable for observer design; \
             numeric rank {rank} of {}",
            aug.l()
        )));
    }
    let horizon = file
        .simulation
        .as_ref()
        .map_or(model.h, |s| s.horizon);
    let region = file.region()?;
    let search = file.search_config(None);

    info!("searching {} candidate spectra", search.n_candidates);
    let design: GainDesign =
        synthesize_gain(&aug, &model, horizon, &region, &search).map_err(CliError::from_core)?;

    println!("gain L ({}x{}):", design.l_gain.nrows(), design.l_gain.ncols());
    for row in matrix_to_rows(&design.l_gain) {
        println!("  {row:?}");
    }
    println!(
        "alpha = {:.6e}, delta = {:.6e}, alpha*delta = {:.6e}",
        design.alpha,
        design.delta,
        design.alpha_delta()
    );
    let a_c = &aug.a_bar - &design.l_gain * &aug.c_bar;
    let eigs = spectrum(&a_c);
    print_spectrum(&eigs);
    print_report(&design.report);

    let epsilon_r = file.epsilon_r()?;
    if epsilon_r.is_finite() {
        let budget = total_error_budget(
            &model,
            horizon,
            file.observer.r,
            epsilon_r,
            1000,
            design.alpha,
            design.delta,
            &SeriesOptions::default(),
        )
        .map_err(CliError::from_core)?;
        println!(
            "error budget for epsilon_r = {epsilon_r:.4e}: remainder {:.6e} + observation {:.6e} = {:.6e}",
            budget.o_r_bound, budget.o_e_bound, budget.total
        );
    }

    let certificate = CertificateFile {
        gain: matrix_to_rows(&design.l_gain),
        p: matrix_to_rows(&design.p),
        y: matrix_to_rows(&design.y),
        alpha: design.alpha,
        delta: design.delta,
        alpha_delta: design.alpha_delta(),
        certified: design.certified,
        eigenvalues: eigs.iter().map(|z| [z.re, z.im]).collect(),
    };
    let body = serde_json::to_string_pretty(&certificate)
        .map_err(|e| CliError::Runtime(format!("certificate serialization failed: {e}")))?;
    write_output(out, "certificate.json", &body)?;

    let mut manifest = RunManifest::new("design", search.seed, file);
    manifest.metrics.insert("alpha".into(), design.alpha);
    manifest.metrics.insert("delta".into(), design.delta);
    manifest
        .metrics
        .insert("alpha_delta".into(), design.alpha_delta());
    manifest.outputs = vec!["certificate.json".into()];
    manifest.write(out)?;
    println!("wrote {}", out.join("certificate.json").display());
    Ok(())
}

/// Gain file consumed by `verify-gain`: the gain itself plus an optional
/// explicit certificate.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainFile {
    l: Vec<Vec<f64>>,
    #[serde(default)]
    p: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    delta: Option<f64>,
}

pub fn cmd_verify_gain(config: &Path, gain_path: &Path) -> Result<(), CliError> {
    let file = read_config(config)?;
    let text = std::fs::read_to_string(gain_path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", gain_path.display())))?;
    let gain_file: GainFile =
        toml::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    if gain_file.l.is_empty() || gain_file.l.iter().any(Vec::is_empty) {
        return Err(CliError::Parse("gain file holds an empty matrix".into()));
    }

    let model = file.model()?;
    let aug = build_augmented(&model, file.observer.r).map_err(CliError::from_core)?;
    let l_gain = matrix_from_rows(&gain_file.l, "gain file l")?;
    if l_gain.nrows() != aug.l() || l_gain.ncols() != aug.c_bar.nrows() {
        return Err(CliError::Validation(format!(
            "gain must be {}x{}, got {}x{}",
            aug.l(),
            aug.c_bar.nrows(),
            l_gain.nrows(),
            l_gain.ncols()
        )));
    }

    let a_c = &aug.a_bar - &l_gain * &aug.c_bar;
    let eigs = spectrum(&a_c);
    print_spectrum(&eigs);
    let stability_margin = -eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    println!("stability margin: {stability_margin:+.4e}");
    if file.design.is_some() {
        let region = file.region()?;
        let inside = eigs.iter().all(|z| region.contains(*z));
        println!(
            "eigenvalues inside configured region: {}",
            if inside { "yes" } else { "no" }
        );
    }

    let horizon = file.simulation.as_ref().map_or(model.h, |s| s.horizon);
    let design_section = file.design.as_ref();
    let delta = gain_file
        .delta
        .or(design_section.and_then(|d| d.delta))
        .unwrap_or_else(|| (stability_margin / 2.0).max(1e-3));
    println!("verifying at delta = {delta:.4e}");

    let k = k_of_t(&aug, &model, horizon, &SeriesOptions::default())
        .map_err(CliError::from_core)?;
    let (p, p_source) = match &gain_file.p {
        Some(rows) => (matrix_from_rows(rows, "gain file p")?, "gain file"),
        None => match riccati_p_for_fixed_gain(&aug, &l_gain, delta, 1e-8) {
            Ok(p) => (p, "recovered from the fixed-gain Riccati equation"),
            Err(e) => {
                println!(
                    "no P > 0 can certify this gain at delta = {delta:.4e}: {e}; \
                     reporting margins against P = I"
                );
                (nalgebra::DMatrix::identity(aug.l(), aug.l()), "identity fallback")
            }
        },
    };
    println!("P source: {p_source}");
    let alpha = gain_file
        .alpha
        .or(design_section.and_then(|d| d.alpha))
        .or_else(|| alpha_for(&p, &k).map(|a| 0.98 * a))
        .unwrap_or(1.0);
    println!("verifying at alpha = {alpha:.4e}");

    let y = &p * &l_gain;
    let region = if file.design.is_some() {
        file.region()?
    } else {
        statepred::gain::DRegion::left_half_plane(0.0)
    };
    let report = verify_lmi_with_k(&aug, &p, &y, delta, alpha, &k, &region, 1e-7)
        .map_err(CliError::from_core)?;
    print_report(&report);
    println!(
        "overall: {}",
        if report.all_pass() { "CERTIFIED" } else { "NOT CERTIFIED" }
    );
    Ok(())
}

pub fn cmd_bounds(config: &Path) -> Result<(), CliError> {
    let file = read_config(config)?;
    let model = file.model()?;
    let horizon = file.simulation.as_ref().map_or(model.h, |s| s.horizon);
    let epsilon_r = file.epsilon_r()?;
    if !epsilon_r.is_finite() {
        return Err(CliError::Validation(
            "the disturbance has no finite derivative bound at this order; \
             raise r above the polynomial degree"
                .into(),
        ));
    }

    let (alpha, delta) = match file.design.as_ref().and_then(|d| d.alpha.zip(d.delta)) {
        Some(pair) => pair,
        None => {
            info!("no explicit (alpha, delta); synthesizing a certified gain");
            let aug = build_augmented(&model, file.observer.r).map_err(CliError::from_core)?;
            let (observable, rank) = observability_check(&aug, RANK_TOL);
            if !observable {
                return Err(CliError::Validation(format!(
                    "the augmented pair (A, C) must be observable for observer design; \
                     numeric rank {rank} of {}",
                    aug.l()
                )));
            }
            let design = synthesize_gain(
                &aug,
                &model,
                horizon,
                &file.region()?,
                &file.search_config(None),
            )
            .map_err(CliError::from_core)?;
            println!(
                "synthesized alpha = {:.6e}, delta = {:.6e}",
                design.alpha, design.delta
            );
            (design.alpha, design.delta)
        }
    };

    let budget = total_error_budget(
        &model,
        horizon,
        file.observer.r,
        epsilon_r,
        1000,
        alpha,
        delta,
        &SeriesOptions::default(),
    )
    .map_err(CliError::from_core)?;
    println!("epsilon_r                      = {epsilon_r:.6e}");
    println!("remainder bound (future dist.) = {:.6e}", budget.o_r_bound);
    println!("observation ultimate bound     = {:.6e}", budget.o_e_bound);
    println!("total budget                   = {:.6e}", budget.total);
    Ok(())
}
