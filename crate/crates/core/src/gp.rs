//! Stationary Matérn (ν = 1) Gaussian-process fields on a grid and the
//! penalised-complexity prior on their standard deviation and range.
//!
//! The range convention is `ρ = √8 / κ`, so the correlation at distance ρ
//! is `√8·K₁(√8) ≈ 0.139`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bessel::{k0_scaled, k1_scaled};
use crate::error::{Error, Result};
use crate::spatial::{RasterGrid, RasterLayer};

/// Relative diagonal jitter: `jitter = DEFAULT_REL_JITTER · σ²`.
pub const DEFAULT_REL_JITTER: f64 = 1e-8;
pub const MAX_JITTER_ESCALATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpHyper {
    pub sigma: f64,
    pub rho: f64,
    pub group: usize,
}

impl GpHyper {
    pub fn new(sigma: f64, rho: f64, group: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("GP needs sigma > 0 and rho > 0, got sigma={sigma}, rho={rho}")));
        }
        Ok(Self { sigma, rho, group })
    }

    pub fn kappa(&self) -> f64 {
        8f64.sqrt() / self.rho
    }

    pub fn default_jitter(&self) -> f64 {
        DEFAULT_REL_JITTER * self.sigma * self.sigma
    }
}

/// Matérn ν = 1 correlation `(κd)·K₁(κd)` for unit variance.
pub fn matern_corr(d: f64, rho: f64) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    let u = 8f64.sqrt() / rho * d;
    u * (-u).exp() * k1_scaled(u)
}

/// Derivative of [`matern_corr`] with respect to `log ρ`: `u²·K₀(u)`.
pub fn matern_corr_dlog_rho(d: f64, rho: f64) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let u = 8f64.sqrt() / rho * d;
    u * u * (-u).exp() * k0_scaled(u)
}

pub fn matern_cov(d: f64, hyper: &GpHyper) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::Domain(format!("distance must be non-negative, got {d}")));
    }
    Ok(hyper.sigma * hyper.sigma * matern_corr(d, hyper.rho))
}

/// Stationary kernel values indexed by absolute grid offset `(|Δcol|, |Δrow|)`.
/// Grid distances only take `n_cols · n_rows` distinct values, so kernels are
/// evaluated once per offset.
pub(crate) struct OffsetTable {
    n_cols: usize,
    values: Vec<f64>,
}

impl OffsetTable {
    pub(crate) fn new(grid: &RasterGrid, f: impl Fn(f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for dr in 0..grid.n_rows {
            for dc in 0..grid.n_cols {
                let d = grid.cell_size * ((dc * dc + dr * dr) as f64).sqrt();
                values.push(f(d));
            }
        }
        Self { n_cols: grid.n_cols, values }
    }

    pub(crate) fn matrix(&self, grid: &RasterGrid, cells: &[usize]) -> DMatrix<f64> {
        let n = cells.len();
        let pos: Vec<(usize, usize)> = cells.iter().map(|&c| grid.col_row(c)).collect();
        DMatrix::from_fn(n, n, |i, j| {
            let (ci, ri) = pos[i];
            let (cj, rj) = pos[j];
            self.values[ri.abs_diff(rj) * self.n_cols + ci.abs_diff(cj)]
        })
    }
}

/// Covariance over a set of cells with its Cholesky factor.
pub struct CovarianceMatrix {
    pub matrix: DMatrix<f64>,
    pub cholesky: Cholesky<f64, Dyn>,
    /// Jitter actually added to the diagonal after any escalation.
    pub jitter: f64,
}

/// Adds `jitter` to the diagonal and factorizes, escalating ×10 up to
/// [`MAX_JITTER_ESCALATIONS`] times.
pub(crate) fn factorize_with_jitter(base: &DMatrix<f64>, jitter: f64) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>, f64)> {
    let mut j = jitter;
    for attempt in 0..=MAX_JITTER_ESCALATIONS {
        if attempt > 0 {
            j *= 10.0;
        }
        let mut m = base.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += j;
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok((m, chol, j));
        }
    }
    Err(Error::Factorization { jitter: j })
}

/// Matérn covariance over `cells` of `grid`, plus `jitter` on the diagonal.
pub fn build_cov_matrix(grid: &RasterGrid, cells: &[usize], hyper: &GpHyper, jitter: f64) -> Result<CovarianceMatrix> {
    if cells.is_empty() {
        return Err(Error::Domain("covariance needs at least one active cell".into()));
    }
    if !(jitter > 0.0) {
        return Err(Error::Domain(format!("jitter must be positive, got {jitter}")));
    }
    let s2 = hyper.sigma * hyper.sigma;
    let table = OffsetTable::new(grid, |d| s2 * matern_corr(d, hyper.rho));
    let base = table.matrix(grid, cells);
    let (matrix, cholesky, jitter) = factorize_with_jitter(&base, jitter)?;
    Ok(CovarianceMatrix { matrix, cholesky, jitter })
}

/// Covariance over every cell of `grid` with the default jitter.
pub fn build_grid_cov_matrix(grid: &RasterGrid, hyper: &GpHyper) -> Result<CovarianceMatrix> {
    let cells: Vec<usize> = (0..grid.n_cells()).collect();
    build_cov_matrix(grid, &cells, hyper, hyper.default_jitter())
}

pub(crate) fn standard_normal_vector(rng: &mut impl rand::Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)))
}

/// Draws `L·ε` over `cells`; cells outside `cells` are masked in the result.
pub fn sample_gp_cells(grid: &RasterGrid, cells: &[usize], hyper: &GpHyper, seed: u64, jitter: f64) -> Result<RasterLayer> {
    let cov = build_cov_matrix(grid, cells, hyper, jitter)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let eps = standard_normal_vector(&mut rng, cells.len());
    let field = cov.cholesky.l() * eps;
    let mut values = vec![0.0; grid.n_cells()];
    let mut nodata = vec![true; grid.n_cells()];
    for (k, &c) in cells.iter().enumerate() {
        values[c] = field[k];
        nodata[c] = false;
    }
    RasterLayer::new(*grid, values, nodata)
}

pub fn sample_gp(grid: &RasterGrid, hyper: &GpHyper, seed: u64) -> Result<RasterLayer> {
    let cells: Vec<usize> = (0..grid.n_cells()).collect();
    sample_gp_cells(grid, &cells, hyper, seed, hyper.default_jitter())
}

/// Tail-probability calibration of the PC prior: `P(ρ < rho0) = alpha_rho`,
/// `P(σ > sigma0) = alpha_sigma`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct PcPriorSpec {
    pub rho0: f64,
    pub alpha_rho: f64,
    pub sigma0: f64,
    pub alpha_sigma: f64,
}

impl Default for PcPriorSpec {
    fn default() -> Self {
        Self {
            rho0: 50.0,
            alpha_rho: 0.5,
            sigma0: 0.5,
            alpha_sigma: 0.01,
        }
    }
}

impl PcPriorSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |a: f64| a > 0.0 && a < 1.0;
        if !(self.rho0 > 0.0 && self.sigma0 > 0.0 && prob(self.alpha_rho) && prob(self.alpha_sigma)) {
            return Err(Error::Domain(format!("invalid PC prior {self:?}")));
        }
        Ok(())
    }

    /// Rate of the range component: `−ln(α_ρ)·ρ₀`.
    pub fn lambda_rho(&self) -> f64 {
        -self.alpha_rho.ln() * self.rho0
    }

    /// Rate of the standard-deviation component: `−ln(α_σ)/σ₀`.
    pub fn lambda_sigma(&self) -> f64 {
        -self.alpha_sigma.ln() / self.sigma0
    }

    pub fn rho_log_density(&self, rho: f64) -> f64 {
        let l = self.lambda_rho();
        l.ln() - 2.0 * rho.ln() - l / rho
    }

    pub fn sigma_log_density(&self, sigma: f64) -> f64 {
        let l = self.lambda_sigma();
        l.ln() - l * sigma
    }

    /// Median of the range marginal.
    pub fn rho_median(&self) -> f64 {
        self.lambda_rho() / std::f64::consts::LN_2
    }

    pub fn sigma_median(&self) -> f64 {
        std::f64::consts::LN_2 / self.lambda_sigma()
    }
}

/// Joint PC log-density `log π(ρ, σ)` for a two-dimensional field.
pub fn pc_prior_logdensity(hyper: &GpHyper, spec: &PcPriorSpec) -> Result<f64> {
    if !(hyper.sigma > 0.0 && hyper.rho > 0.0) {
        return Err(Error::Domain(format!("PC prior needs positive sigma and rho, got {hyper:?}")));
    }
    spec.validate()?;
    Ok(spec.rho_log_density(hyper.rho) + spec.sigma_log_density(hyper.sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(sigma: f64, rho: f64) -> GpHyper {
        GpHyper::new(sigma, rho, 1).unwrap()
    }

    #[test]
    fn variance_at_zero_lag() {
        assert_eq!(matern_cov(0.0, &hyper(2.0, 5.0)).unwrap(), 4.0);
        assert!(matern_cov(-1.0, &hyper(2.0, 5.0)).is_err());
    }

    #[test]
    fn correlation_at_range_and_decay() {
        let h = hyper(1.0, 3.0);
        let c = matern_cov(3.0, &h).unwrap();
        assert!((c - 0.139).abs() < 0.01, "{c}");
        assert!(matern_cov(30.0, &h).unwrap() < 1e-6);
    }

    #[test]
    fn monotone_on_distance_ladder() {
        let h = hyper(1.3, 7.0);
        let vals: Vec<f64> = (0..100).map(|k| matern_cov(k as f64 * 0.5, &h).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        assert!(vals.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn dlog_rho_matches_finite_difference() {
        for &d in &[0.3, 1.0, 4.0, 12.0] {
            let rho = 5.0;
            let e: f64 = 1e-6;
            let fd = (matern_corr(d, rho * e.exp()) - matern_corr(d, rho * (-e).exp())) / (2.0 * e);
            let an = matern_corr_dlog_rho(d, rho);
            assert!((fd - an).abs() < 1e-8, "{d}: {fd} vs {an}");
        }
    }

    #[test]
    fn single_cell_matrix() {
        let g = RasterGrid::new(0.0, 0.0, 1, 1, 1.0).unwrap();
        let cov = build_cov_matrix(&g, &[0], &hyper(2.0, 3.0), 1e-6).unwrap();
        assert_eq!(cov.matrix[(0, 0)], 4.0 + 1e-6);
    }

    #[test]
    fn two_cell_off_diagonal() {
        let g = RasterGrid::new(0.0, 0.0, 2, 1, 1.5).unwrap();
        let h = hyper(1.0, 3.0);
        let cov = build_cov_matrix(&g, &[0, 1], &h, 1e-8).unwrap();
        assert_eq!(cov.matrix[(0, 1)], matern_cov(1.5, &h).unwrap());
        assert_eq!(cov.matrix[(1, 0)], cov.matrix[(0, 1)]);
    }

    #[test]
    fn sixteen_cells_match_brute_force() {
        let g = RasterGrid::new(2.0, -1.0, 4, 4, 0.7).unwrap();
        let h = hyper(0.8, 2.0);
        let cells: Vec<usize> = (0..16).collect();
        let cov = build_cov_matrix(&g, &cells, &h, 1e-9).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let (xi, yi) = g.center(i);
                let (xj, yj) = g.center(j);
                let d = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
                let expect = matern_cov(d, &h).unwrap() + if i == j { 1e-9 } else { 0.0 };
                assert!((cov.matrix[(i, j)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn jitter_escalation_reports_final_value() {
        // indefinite matrix cannot be rescued by tiny jitter
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match factorize_with_jitter(&m, 1e-8) {
            Err(Error::Factorization { jitter }) => assert!((jitter - 1e-5).abs() < 1e-18),
            other => panic!("{:?}", other.map(|r| r.2)),
        }
    }

    #[test]
    fn degenerate_and_deterministic_samples() {
        let g = RasterGrid::new(0.0, 0.0, 5, 4, 1.0).unwrap();
        let tiny = sample_gp(&g, &hyper(1e-8, 3.0), 9).unwrap();
        assert!(tiny.values().iter().all(|v| v.abs() < 1e-6));
        let h = hyper(1.0, 3.0);
        assert_eq!(sample_gp(&g, &h, 4).unwrap(), sample_gp(&g, &h, 4).unwrap());
        assert_ne!(sample_gp(&g, &h, 4).unwrap(), sample_gp(&g, &h, 5).unwrap());
    }

    #[test]
    fn monte_carlo_moments_at_a_cell() {
        let g = RasterGrid::new(0.0, 0.0, 3, 3, 1.0).unwrap();
        let h = hyper(1.5, 2.0);
        let n = 1000;
        let vals: Vec<f64> = (0..n).map(|s| sample_gp(&g, &h, s).unwrap().values()[4]).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * h.sigma / (n as f64).sqrt(), "{mean}");
        assert!((var / (h.sigma * h.sigma) - 1.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn pc_rates_match_closed_form() {
        let s = PcPriorSpec::default();
        assert!((s.lambda_rho() - 34.657).abs() < 1e-3);
        assert!((s.lambda_sigma() - 9.2103).abs() < 1e-3);
        assert!((s.rho_median() - 50.0).abs() < 1e-9);
        assert!(pc_prior_logdensity(&GpHyper { sigma: 0.0, rho: 1.0, group: 1 }, &s).is_err());
    }
}
