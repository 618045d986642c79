//! Matrix power series used by the predictor.
//!
//! Everything here is a truncated series evaluation: the state-transition
//! matrix `Φ(T) = e^{AT}`, the input-convolution blocks `Γ_u(a, b)`, the
//! disturbance blocks `Γ_ω,i(T)` together with their stacked row `Γ_ω(T)`,
//! and the remainder constant `μ`. All evaluations avoid forming `A⁻¹`, so
//! singular `A` is handled without special cases.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Truncation control for the series evaluations.
#[derive(Debug, Clone, Copy)]
pub struct SeriesOptions {
    /// Relative tolerance: a term is negligible once its Frobenius norm
    /// drops below `rel_tol` times the norm of the accumulated sum.
    pub rel_tol: f64,
    /// Hard cap on the number of series terms before the divergence guard
    /// trips.
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            max_terms: 200,
        }
    }
}

impl SeriesOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be > 0".into()));
        }
        if self.max_terms < 2 {
            return Err(Error::InvalidArgument("max_terms must be >= 2".into()));
        }
        Ok(())
    }
}

/// A row of horizontally stacked blocks sharing a row count.
///
/// Holds `Γ_ω(T) = [T Γ_ω,0(T)B_ω, …, T^{r+1}/(r+1)! Γ_ω,r(T)B_ω]`.
#[derive(Debug, Clone)]
pub struct MatrixBlockRow {
    blocks: Vec<DMatrix<f64>>,
}

impl MatrixBlockRow {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            let n = first.nrows();
            if blocks.iter().any(|b| b.nrows() != n) {
                return Err(Error::Dimension(
                    "all blocks in a row must share a row count".into(),
                ));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn nrows(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn ncols(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    /// Concatenate the blocks into a single dense matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.nrows();
        let mut out = DMatrix::zeros(n, self.ncols());
        let mut col = 0;
        for b in &self.blocks {
            out.view_mut((0, col), (n, b.ncols())).copy_from(b);
            col += b.ncols();
        }
        out
    }
}

fn check_finite(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name));
    }
    Ok(())
}

/// Sum a matrix series given its first term and a map producing term `k+1`
/// from term `k`. Stops once two consecutive terms are negligible relative
/// to the accumulated sum; errors when `max_terms` is hit first.
fn sum_series<F>(first: DMatrix<f64>, mut next: F, opts: &SeriesOptions) -> Result<DMatrix<f64>>
where
    F: FnMut(&DMatrix<f64>, usize) -> DMatrix<f64>,
{
    opts.validate()?;
    let mut sum = first.clone();
    let mut term = first;
    let mut small_streak = 0usize;
    let mut last_rel = f64::INFINITY;
    for k in 0..opts.max_terms {
        term = next(&term, k);
        sum += &term;
        let denom = sum.norm().max(f64::MIN_POSITIVE);
        last_rel = term.norm() / denom;
        if last_rel < opts.rel_tol {
            small_streak += 1;
            // two consecutive negligible terms guard alternating-sign stalls
            if small_streak >= 2 {
                return Ok(sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::SeriesDivergence {
        max_terms: opts.max_terms,
        last_rel,
    })
}

/// State-transition matrix `Φ(T) = e^{AT}` by scaling-and-squaring of the
/// truncated exponential series.
pub fn phi(a: &DMatrix<f64>, t: f64, opts: &SeriesOptions) -> Result<DMatrix<f64>> {
    check_finite(a, "A")?;
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "A must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("T must be >= 0, got {t}")));
    }
    let n = a.nrows();
    let at = a * t;
    // scale so that ||AT / 2^s|| <= 0.5, then square back up
    let norm = at.norm();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = &at / 2f64.powi(s as i32);
    let mut exp = sum_series(
        DMatrix::identity(n, n),
        |term, k| (&scaled * term) / (k as f64 + 1.0),
        opts,
    )?;
    for _ in 0..s {
        exp = &exp * &exp;
    }
    Ok(exp)
}

/// Input-convolution block
/// `Γ_u = Σ_{j≥1} (a^j − b^j)/j! · A^{j−1} B_u`, which equals
/// `∫ e^{Aτ} B_u dτ` over `[b, a]`. Valid for singular `A`.
pub fn gamma_u(
    a_mat: &DMatrix<f64>,
    b_u: &DMatrix<f64>,
    a: f64,
    b: f64,
    opts: &SeriesOptions,
) -> Result<DMatrix<f64>> {
    check_finite(a_mat, "A")?;
    check_finite(b_u, "B_u")?;
    if a_mat.nrows() != a_mat.ncols() || a_mat.ncols() != b_u.nrows() {
        return Err(Error::Dimension(format!(
            "incompatible A ({}x{}) and B_u ({}x{})",
            a_mat.nrows(),
            a_mat.ncols(),
            b_u.nrows(),
            b_u.ncols()
        )));
    }
    if !(a.is_finite() && b.is_finite()) || b < 0.0 || a < b {
        return Err(Error::InvalidArgument(format!(
            "gamma_u requires a >= b >= 0, got a={a}, b={b}"
        )));
    }
    if a == b {
        return Ok(DMatrix::zeros(b_u.nrows(), b_u.ncols()));
    }
    // term_j = (a^j - b^j)/j! A^{j-1} B_u; carried as (powers, A^{j-1} B_u)
    let mut apow = a;
    let mut bpow = b;
    let mut factorial = 1.0;
    let mut mat = b_u.clone();
    let first = (a - b) * &mat;
    sum_series(
        first,
        |_, k| {
            let j = k as f64 + 2.0; // next term index
            apow *= a;
            bpow *= b;
            factorial *= j;
            mat = a_mat * &mat;
            ((apow - bpow) / factorial) * &mat
        },
        opts,
    )
}

/// Disturbance series block
/// `Γ_ω,i(T) = Σ_{j≥0} (i+1)!/(i+1+j)! · A^j T^j`; identity at `T = 0` or
/// `A = 0`.
pub fn gamma_omega_i(
    a: &DMatrix<f64>,
    t: f64,
    i: usize,
    opts: &SeriesOptions,
) -> Result<DMatrix<f64>> {
    check_finite(a, "A")?;
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension("A must be square".into()));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("T must be >= 0, got {t}")));
    }
    let n = a.nrows();
    let at = a * t;
    // term_{j+1} = term_j * AT / (i+1+j+1)
    sum_series(
        DMatrix::identity(n, n),
        |term, k| (&at * term) / ((i + 1 + k + 1) as f64),
        opts,
    )
}

/// Stacked disturbance row
/// `Γ_ω(T) = [T Γ_ω,0(T)B_ω, …, T^{r+1}/(r+1)! Γ_ω,r(T)B_ω]`.
pub fn big_gamma_omega(
    a: &DMatrix<f64>,
    b_omega: &DMatrix<f64>,
    t: f64,
    r: usize,
    opts: &SeriesOptions,
) -> Result<MatrixBlockRow> {
    check_finite(b_omega, "B_omega")?;
    if a.nrows() != b_omega.nrows() {
        return Err(Error::Dimension(format!(
            "A has {} rows but B_omega has {}",
            a.nrows(),
            b_omega.nrows()
        )));
    }
    let mut blocks = Vec::with_capacity(r + 1);
    let mut coeff = 1.0; // T^{i+1}/(i+1)!
    for i in 0..=r {
        coeff *= t / (i as f64 + 1.0);
        let g = gamma_omega_i(a, t, i, opts)?;
        blocks.push(coeff * &g * b_omega);
    }
    MatrixBlockRow::new(blocks)
}

/// Remainder constant `μ = max_{τ∈[0,T]} ‖Γ_ω,r(τ) B_ω‖₂`, estimated on a
/// uniform grid.
pub fn mu_constant(
    a: &DMatrix<f64>,
    b_omega: &DMatrix<f64>,
    t: f64,
    r: usize,
    grid_points: usize,
    opts: &SeriesOptions,
) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(
            "mu_constant needs grid_points >= 2".into(),
        ));
    }
    let mut mu: f64 = 0.0;
    for k in 0..grid_points {
        let tau = t * k as f64 / (grid_points - 1) as f64;
        let g = gamma_omega_i(a, tau, r, opts)? * b_omega;
        mu = mu.max(spectral_norm(&g));
    }
    Ok(mu)
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}
