//! TOML experiment description and its conversion into library types.
//!
//! The schema mirrors the in-memory configuration one-to-one: `[model]`
//! holds the plant matrices (row-major nested arrays), `[disturbance]` the
//! signal, `[observer]` the smoothness order and optional explicit gain,
//! `[design]` the eigenvalue region and search parameters, `[simulation]`
//! the closed-loop run. Unknown keys are rejected so typos fail loudly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statepred::gain::{DRegion, SearchConfig};
use statepred::simlab::{ExperimentConfig, GainSource, Method};
use statepred::{DisturbanceSignal, LtiModel};

use crate::CliError;

pub const SUPPORTED_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Schema version; only version 1 exists.
    pub version: u32,
    pub model: ModelSection,
    pub disturbance: DisturbanceSection,
    pub observer: ObserverSection,
    #[serde(default)]
    pub design: Option<DesignSection>,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a: Vec<Vec<f64>>,
    pub b_u: Vec<Vec<f64>>,
    pub b_omega: Vec<Vec<f64>>,
    pub c_x: Vec<Vec<f64>>,
    pub d_omega: Vec<Vec<f64>>,
    /// Input delay in seconds.
    pub delay: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DisturbanceSection {
    Zero { channels: usize },
    Sinusoid { amplitude: f64, freq: f64 },
    /// `coeffs[j]` is the q-vector multiplying `t^j`.
    Polynomial { coeffs: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    /// Disturbance smoothness order `r`.
    pub r: usize,
    /// Explicit observer gain, `(n + (r+1)q) x p` row-major. When absent the
    /// gain is synthesized from `[design]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub region: RegionSection,
    #[serde(default = "default_candidates")]
    pub n_candidates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Explicit certificate pair; when both are present `bounds` and
    /// `verify-gain` use them instead of re-deriving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn default_candidates() -> usize {
    SearchConfig::default().n_candidates
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSection {
    /// Disk centered at `(center, 0)`.
    Disk { center: f64, radius: f64 },
    /// `Re(z) < -sigma`, sampled inside an optional
    /// `[re_min, re_max, im_min, im_max]` window.
    HalfPlane {
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bounding_box: Option<[f64; 4]>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: f64,
    pub zoh_period: f64,
    pub dt: f64,
    pub t_end: f64,
    pub k_fb: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.name().to_string()).collect()
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    let cfg: ConfigFile = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    if cfg.version != SUPPORTED_VERSION {
        return Err(CliError::Parse(format!(
            "unsupported config version {}, expected {SUPPORTED_VERSION}",
            cfg.version
        )));
    }
    Ok(cfg)
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(CliError::Validation(format!("{what} must be non-empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Validation(format!("{what} has ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Matrix back to the row-major nested-array form used by the config and
/// certificate files.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ConfigFile {
    pub fn model(&self) -> Result<LtiModel, CliError> {
        LtiModel::new(
            matrix_from_rows(&self.model.a, "[model] a")?,
            matrix_from_rows(&self.model.b_u, "[model] b_u")?,
            matrix_from_rows(&self.model.b_omega, "[model] b_omega")?,
            matrix_from_rows(&self.model.c_x, "[model] c_x")?,
            matrix_from_rows(&self.model.d_omega, "[model] d_omega")?,
            self.model.delay,
        )
        .map_err(CliError::from_core)
    }

    pub fn disturbance(&self) -> Result<DisturbanceSignal, CliError> {
        Ok(match &self.disturbance {
            DisturbanceSection::Zero { channels } => DisturbanceSignal::Zero { q: *channels },
            DisturbanceSection::Sinusoid { amplitude, freq } => DisturbanceSignal::Sinusoid {
                amplitude: *amplitude,
                freq: *freq,
            },
            DisturbanceSection::Polynomial { coeffs } => DisturbanceSignal::Polynomial {
                coeffs: coeffs
                    .iter()
                    .map(|c| DVector::from_column_slice(c))
                    .collect(),
            },
        })
    }

    pub fn region(&self) -> Result<DRegion, CliError> {
        let design = self.design.as_ref().ok_or_else(|| {
            CliError::Validation("[design] section is required for this command".into())
        })?;
        Ok(match &design.region {
            RegionSection::Disk { center, radius } => DRegion::disk(*center, *radius),
            RegionSection::HalfPlane { sigma, bounding_box } => {
                let mut region = DRegion::left_half_plane(*sigma);
                if let Some(bbox) = bounding_box {
                    region = region.with_bounding_box(*bbox);
                }
                region
            }
        })
    }

    pub fn search_config(&self, seed_override: Option<u64>) -> SearchConfig {
        let mut search = SearchConfig::default();
        if let Some(design) = &self.design {
            search.n_candidates = design.n_candidates;
            search.seed = design.seed;
        }
        if let Some(seed) = seed_override {
            search.seed = seed;
        }
        search
    }

    pub fn explicit_gain(&self) -> Result<Option<DMatrix<f64>>, CliError> {
        self.observer
            .gain
            .as_ref()
            .map(|rows| matrix_from_rows(rows, "[observer] gain"))
            .transpose()
    }

    pub fn gain_source(&self, seed_override: Option<u64>) -> Result<GainSource, CliError> {
        if let Some(gain) = self.explicit_gain()? {
            return Ok(GainSource::Explicit(gain));
        }
        Ok(GainSource::Synthesized {
            region: self.region()?,
            search: self.search_config(seed_override),
        })
    }

    pub fn experiment(&self, seed_override: Option<u64>) -> Result<ExperimentConfig, CliError> {
        let sim = self.simulation.as_ref().ok_or_else(|| {
            CliError::Validation("[simulation] section is required for this command".into())
        })?;
        let methods = sim
            .methods
            .iter()
            .map(|name| {
                Method::ALL
                    .into_iter()
                    .find(|m| m.name() == name)
                    .ok_or_else(|| {
                        CliError::Validation(format!("unknown method {name:?} in [simulation]"))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = ExperimentConfig {
            model: self.model()?,
            r: self.observer.r,
            horizon: sim.horizon,
            zoh_period: sim.zoh_period,
            dt: sim.dt,
            t_end: sim.t_end,
            disturbance: self.disturbance()?,
            k_fb: matrix_from_rows(&sim.k_fb, "[simulation] k_fb")?,
            gain: self.gain_source(seed_override)?,
            x0: DVector::from_column_slice(&sim.x0),
            eta0_hat: None,
            methods,
            seed: seed_override.unwrap_or(sim.seed),
            series: Default::default(),
            n_trapz: 100,
            mu_grid_points: 1000,
        };
        cfg.validate().map_err(CliError::from_core)?;
        Ok(cfg)
    }

    /// The epsilon bound used by the error-budget reports.
    pub fn epsilon_r(&self) -> Result<f64, CliError> {
        Ok(self.disturbance()?.epsilon_r(self.observer.r))
    }
}

/// The built-in benchmark preset as a config document, so every implicit
/// choice is printable.
pub fn benchmark_config(omega: f64) -> ConfigFile {
    ConfigFile {
        version: SUPPORTED_VERSION,
        model: ModelSection {
            a: vec![vec![0.0, 1.0], vec![-9.0, 3.0]],
            b_u: vec![vec![0.0], vec![1.0]],
            b_omega: vec![vec![0.0], vec![1.0]],
            c_x: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            d_omega: vec![vec![0.0], vec![0.0]],
            delay: 0.5,
        },
        disturbance: DisturbanceSection::Sinusoid {
            amplitude: 3.0,
            freq: omega,
        },
        observer: ObserverSection { r: 3, gain: None },
        design: Some(DesignSection {
            region: RegionSection::Disk {
                center: 0.0,
                radius: 40.0,
            },
            n_candidates: default_candidates(),
            seed: 0,
            alpha: None,
            delta: None,
        }),
        simulation: Some(SimulationSection {
            horizon: 0.5,
            zoh_period: 0.05,
            dt: 1e-3,
            t_end: 20.0,
            k_fb: vec![vec![45.0, 18.0]],
            x0: vec![0.0, 0.0],
            methods: default_methods(),
            seed: 0,
        }),
    }
}
