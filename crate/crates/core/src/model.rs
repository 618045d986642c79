//! Plant, disturbance, control-schedule and augmented-system types.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matseries::{self, SeriesOptions};

/// The disturbed LTI plant
/// `ẋ = Ax + B_u u(t−h) + B_ω ω(t)`, `y = C_x x + D_ω ω`.
#[derive(Debug, Clone)]
pub struct LtiModel {
    pub a: DMatrix<f64>,
    pub b_u: DMatrix<f64>,
    pub b_omega: DMatrix<f64>,
    pub c_x: DMatrix<f64>,
    pub d_omega: DMatrix<f64>,
    /// Input delay in seconds.
    pub h: f64,
}

impl LtiModel {
    pub fn new(
        a: DMatrix<f64>,
        b_u: DMatrix<f64>,
        b_omega: DMatrix<f64>,
        c_x: DMatrix<f64>,
        d_omega: DMatrix<f64>,
        h: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("A must be square".into()));
        }
        if b_u.nrows() != n || b_omega.nrows() != n {
            return Err(Error::Dimension("B_u and B_omega must have n rows".into()));
        }
        if c_x.ncols() != n {
            return Err(Error::Dimension("C_x must have n columns".into()));
        }
        if d_omega.nrows() != c_x.nrows() || d_omega.ncols() != b_omega.ncols() {
            return Err(Error::Dimension("D_omega must be p x q".into()));
        }
        if !(h >= 0.0) {
            return Err(Error::InvalidArgument(format!("delay h must be >= 0, got {h}")));
        }
        let model = Self {
            a,
            b_u,
            b_omega,
            c_x,
            d_omega,
            h,
        };
        for (m, name) in [
            (&model.a, "A"),
            (&model.b_u, "B_u"),
            (&model.b_omega, "B_omega"),
            (&model.c_x, "C_x"),
            (&model.d_omega, "D_omega"),
        ] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b_u.ncols()
    }

    pub fn q(&self) -> usize {
        self.b_omega.ncols()
    }

    pub fn p(&self) -> usize {
        self.c_x.nrows()
    }

    /// The benchmark plant `A = [[0,1],[−9,3]]`, `B_u = B_ω = [0;1]` with
    /// full state measurement and delay `h`.
    pub fn benchmark_plant(h: f64) -> Self {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -9.0, 3.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            h,
        )
        .expect("benchmark plant dimensions are consistent")
    }
}

/// Piecewise-constant control record over the prediction window.
///
/// `u(φ) = u0` on `[t−h, t_1)`, `u_k` on `[t_k, t_{k+1})` and `u_N` on
/// `[t_N, t+T−h]`; breakpoints are absolute times in the input coordinate
/// and must be strictly increasing.
#[derive(Debug, Clone)]
pub struct ControlSchedule {
    pub u0: DVector<f64>,
    pub breakpoints: Vec<f64>,
    pub values: Vec<DVector<f64>>,
}

impl ControlSchedule {
    pub fn new(u0: DVector<f64>, breakpoints: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if breakpoints.len() != values.len() {
            return Err(Error::Dimension(
                "breakpoints and values must have equal length".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::ScheduleCoverage(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let m = u0.len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::Dimension("all control values must have length m".into()));
        }
        Ok(Self {
            u0,
            breakpoints,
            values,
        })
    }

    /// Constant input over the whole window (`N = 0`).
    pub fn constant(u0: DVector<f64>) -> Self {
        Self {
            u0,
            breakpoints: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Validates the Def.-1 window constraints for a prediction made at `t`
    /// with horizon `T` under delay `h`: every breakpoint must lie strictly
    /// inside `(t−h, t+T−h)`.
    pub fn check_window(&self, t: f64, horizon: f64, h: f64) -> Result<()> {
        let lo = t - h;
        let hi = t + horizon - h;
        if let (Some(&first), Some(&last)) = (self.breakpoints.first(), self.breakpoints.last()) {
            if first <= lo || last >= hi {
                return Err(Error::ScheduleCoverage(format!(
                    "breakpoints [{first}, {last}] must lie strictly inside ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Disturbance signal with analytic derivatives up to order `r+1`.
#[derive(Debug, Clone)]
pub enum DisturbanceSignal {
    /// No disturbance, `q` channels.
    Zero { q: usize },
    /// Scalar `ω(t) = a·sin(Ωt)` with exact derivative formulas and
    /// `ε_r = a·Ω^{r+1}`.
    Sinusoid { amplitude: f64, freq: f64 },
    /// Vector polynomial `ω(t) = Σ_j c_j t^j`; `ε_r = 0` whenever the
    /// degree is at most `r`.
    Polynomial { coeffs: Vec<DVector<f64>> },
}

impl DisturbanceSignal {
    pub fn q(&self) -> usize {
        match self {
            Self::Zero { q } => *q,
            Self::Sinusoid { .. } => 1,
            Self::Polynomial { coeffs } => coeffs.first().map_or(0, |c| c.len()),
        }
    }

    /// `ω^{(i)}(t)` as a q-vector.
    pub fn derivative(&self, i: usize, t: f64) -> DVector<f64> {
        match self {
            Self::Zero { q } => DVector::zeros(*q),
            Self::Sinusoid { amplitude, freq } => {
                // d^i/dt^i sin(Ωt) = Ω^i sin(Ωt + i π/2)
                let v = amplitude * freq.powi(i as i32) * (freq * t + i as f64 * std::f64::consts::FRAC_PI_2).sin();
                DVector::from_element(1, v)
            }
            Self::Polynomial { coeffs } => {
                let q = self.q();
                let mut out = DVector::zeros(q);
                let mut tpow = 1.0;
                for (j, c) in coeffs.iter().enumerate().skip(i) {
                    // falling factorial j(j-1)...(j-i+1)
                    let mut fall = 1.0;
                    for k in 0..i {
                        fall *= (j - k) as f64;
                    }
                    out += c * (fall * tpow);
                    tpow *= t;
                }
                out
            }
        }
    }

    /// Uniform bound `ε_r` on `‖ω^{(r+1)}(t)‖`.
    pub fn epsilon_r(&self, r: usize) -> f64 {
        match self {
            Self::Zero { .. } => 0.0,
            Self::Sinusoid { amplitude, freq } => amplitude.abs() * freq.abs().powi(r as i32 + 1),
            Self::Polynomial { coeffs } => {
                if coeffs.len() <= r + 1 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// The stacked disturbance state `ω_r(t) = [ω; ω̇; …; ω^{(r)}]`.
    pub fn omega_r_stack(&self, t: f64, r: usize) -> DVector<f64> {
        let q = self.q();
        let mut out = DVector::zeros((r + 1) * q);
        for i in 0..=r {
            out.rows_mut(i * q, q).copy_from(&self.derivative(i, t));
        }
        out
    }
}

/// The augmented system `η = [x; ω_r]` of the high-order observer:
/// `Ā = [[A, B_ωΠ],[0, Ψ]]`, `B̄_u = [B_u; 0]`, `B̄_ω = [0; …; I_q]`,
/// `C̄ = [C_x, D_ω, 0]`.
#[derive(Debug, Clone)]
pub struct AugmentedModel {
    pub a_bar: DMatrix<f64>,
    pub b_bar_u: DMatrix<f64>,
    pub b_bar_omega: DMatrix<f64>,
    pub c_bar: DMatrix<f64>,
    /// Nilpotent shift block `Ψ` of size `(r+1)q`.
    pub psi: DMatrix<f64>,
    /// Selector `Π = [I_q, 0]`.
    pub pi: DMatrix<f64>,
    pub r: usize,
    n: usize,
    q: usize,
}

impl AugmentedModel {
    /// Augmented state dimension `l = n + (r+1)q`.
    pub fn l(&self) -> usize {
        self.a_bar.nrows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }
}

/// Stacked state `η = [xᵀ, ω_rᵀ]ᵀ`.
#[derive(Debug, Clone)]
pub struct AugmentedState {
    pub eta: DVector<f64>,
}

impl AugmentedState {
    pub fn new(x: &DVector<f64>, omega_r: &DVector<f64>) -> Self {
        let mut eta = DVector::zeros(x.len() + omega_r.len());
        eta.rows_mut(0, x.len()).copy_from(x);
        eta.rows_mut(x.len(), omega_r.len()).copy_from(omega_r);
        Self { eta }
    }

    pub fn x_part(&self, n: usize) -> DVector<f64> {
        self.eta.rows(0, n).into_owned()
    }

    pub fn omega_part(&self, n: usize) -> DVector<f64> {
        self.eta.rows(n, self.eta.len() - n).into_owned()
    }
}

/// Build the augmented model for smoothness order `r`.
pub fn build_augmented(model: &LtiModel, r: usize) -> Result<AugmentedModel> {
    let (n, q, p, m) = (model.n(), model.q(), model.p(), model.m());
    let d = (r + 1) * q;
    let l = n + d;

    // Ψ = [[0_{rq×q}, I_{rq}],[0, 0]]: shifts ω^{(i)} -> ω^{(i+1)}
    let mut psi = DMatrix::zeros(d, d);
    for i in 0..r * q {
        psi[(i, i + q)] = 1.0;
    }
    let mut pi = DMatrix::zeros(q, d);
    for i in 0..q {
        pi[(i, i)] = 1.0;
    }

    let mut a_bar = DMatrix::zeros(l, l);
    a_bar.view_mut((0, 0), (n, n)).copy_from(&model.a);
    a_bar
        .view_mut((0, n), (n, d))
        .copy_from(&(&model.b_omega * &pi));
    a_bar.view_mut((n, n), (d, d)).copy_from(&psi);

    let mut b_bar_u = DMatrix::zeros(l, m);
    b_bar_u.view_mut((0, 0), (n, m)).copy_from(&model.b_u);

    let mut b_bar_omega = DMatrix::zeros(l, q);
    for i in 0..q {
        b_bar_omega[(l - q + i, i)] = 1.0;
    }

    let mut c_bar = DMatrix::zeros(p, l);
    c_bar.view_mut((0, 0), (p, n)).copy_from(&model.c_x);
    c_bar.view_mut((0, n), (p, q)).copy_from(&model.d_omega);

    Ok(AugmentedModel {
        a_bar,
        b_bar_u,
        b_bar_omega,
        c_bar,
        psi,
        pi,
        r,
        n,
        q,
    })
}

/// The prediction map `K(T) = [Φ(T), Γ_ω(T)]` (n × l).
pub fn k_of_t(
    aug: &AugmentedModel,
    model: &LtiModel,
    horizon: f64,
    opts: &SeriesOptions,
) -> Result<DMatrix<f64>> {
    let n = model.n();
    let l = aug.l();
    let phi = matseries::phi(&model.a, horizon, opts)?;
    let gamma = matseries::big_gamma_omega(&model.a, &model.b_omega, horizon, aug.r, opts)?;
    let mut k = DMatrix::zeros(n, l);
    k.view_mut((0, 0), (n, n)).copy_from(&phi);
    k.view_mut((0, n), (n, l - n)).copy_from(&gamma.to_matrix());
    Ok(k)
}

/// Numeric observability test of `(Ā, C̄)`.
///
/// Returns `(observable, numeric_rank)`; the rank is the count of singular
/// values of the stacked observability matrix above `rank_tol` times the
/// largest.
pub fn observability_check(aug: &AugmentedModel, rank_tol: f64) -> (bool, usize) {
    let l = aug.l();
    let p = aug.c_bar.nrows();
    let mut obs = DMatrix::zeros(l * p, l);
    let mut block = aug.c_bar.clone();
    for i in 0..l {
        obs.view_mut((i * p, 0), (p, l)).copy_from(&block);
        block = &block * &aug.a_bar;
    }
    let sv = obs.singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let rank = if max == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > rank_tol * max).count()
    };
    (rank == l, rank)
}
