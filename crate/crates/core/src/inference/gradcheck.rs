//! Analytic gradients against central finite differences.
//!
//! The error of one coordinate is `|g − g_fd| / max(1, |g|, |g_fd|)`:
//! relative for large components, absolute near zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;
use crate::util::derive_seed;

use super::joint::ThinnedLgcp;
use super::model::{ParamLayout, ParamVector};

pub const FD_STEP: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;
const SEED_TRIALS: u64 = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateError {
    pub trial: usize,
    pub coordinate: String,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub trials: usize,
    pub tolerance: f64,
    pub max_error: f64,
    /// Worst coordinate per parameter block, in flat order of the blocks.
    pub worst_by_block: Vec<(String, CoordinateError)>,
    pub worst: Option<CoordinateError>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }

    pub fn is_vacuous(&self) -> bool {
        self.trials == 0
    }
}

pub fn coordinate_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

fn block_of(name: &str) -> &str {
    name.split('[').next().unwrap_or(name)
}

/// Checks `grad` against central differences of `value` at each point.
pub fn gradcheck_points(
    points: &[Vec<f64>],
    value: impl Fn(&[f64]) -> Result<f64>,
    grad: impl Fn(&[f64]) -> Result<Vec<f64>>,
    name: impl Fn(usize) -> String,
    step: f64,
    tolerance: f64,
) -> Result<GradcheckReport> {
    let mut worst_by_block: Vec<(String, CoordinateError)> = Vec::new();
    let mut worst: Option<CoordinateError> = None;
    for (trial, x) in points.iter().enumerate() {
        let g = grad(x)?;
        let mut probe = x.clone();
        for i in 0..x.len() {
            probe[i] = x[i] + step;
            let up = value(&probe)?;
            probe[i] = x[i] - step;
            let dn = value(&probe)?;
            probe[i] = x[i];
            let numeric = (up - dn) / (2.0 * step);
            let err = coordinate_error(g[i], numeric);
            let coordinate = name(i);
            let entry = CoordinateError { trial, coordinate: coordinate.clone(), analytic: g[i], numeric, error: err };
            let block = block_of(&coordinate).to_string();
            match worst_by_block.iter_mut().find(|(b, _)| *b == block) {
                Some((_, e)) if e.error >= err => {}
                Some((_, e)) => *e = entry.clone(),
                None => worst_by_block.push((block, entry.clone())),
            }
            // NaN errors must surface as the worst case
            if worst.as_ref().map_or(true, |w| !(err <= w.error)) {
                worst = Some(entry);
            }
        }
    }
    let max_error = worst.as_ref().map_or(0.0, |w| if w.error.is_nan() { f64::INFINITY } else { w.error });
    Ok(GradcheckReport {
        trials: points.len(),
        tolerance,
        max_error,
        worst_by_block,
        worst,
    })
}

/// A random parameter point: intercepts near the observed rate, small
/// latent values, hyperparameters across a plausible range for the grid.
pub fn random_point(model: &ThinnedLgcp, rng: &mut impl Rng) -> ParamVector {
    let l: ParamLayout = model.layout();
    let data = model.data();
    let mut p = ParamVector::zeros(&l);
    let area = data.active_area();
    for (mu, c) in p.mu.iter_mut().zip(&data.campaigns) {
        *mu = (c.total().max(1.0) / area).ln() + rng.random_range(-0.5..0.5);
    }
    for b in p.beta.iter_mut() {
        *b = rng.random_range(-1.0..1.0);
    }
    for w in p.w.iter_mut().flatten() {
        *w = rng.random_range(-0.5..0.5);
    }
    let cell = data.grid.cell_size;
    for g in 0..l.n_groups {
        p.log_sigma[g] = rng.random_range(0.2f64.ln()..1.5f64.ln());
        p.log_rho[g] = rng.random_range((2.0 * cell).ln()..(10.0 * cell).ln());
    }
    for t in p.log_tau.iter_mut() {
        *t = rng.random_range(0.5f64.ln()..2f64.ln());
    }
    p
}

/// Gradient check of the model's log joint at `n_trials` random points.
pub fn gradcheck_model(model: &ThinnedLgcp, n_trials: usize, seed: u64) -> Result<GradcheckReport> {
    let layout = model.layout();
    let points: Vec<Vec<f64>> = (0..n_trials)
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, SEED_TRIALS, k as u64));
            random_point(model, &mut rng).to_flat()
        })
        .collect();
    let covariates = model.spec().covariates.clone();
    gradcheck_points(
        &points,
        |x| model.log_joint(&ParamVector::from_flat(&layout, x)?),
        |x| model.grad_log_joint(&ParamVector::from_flat(&layout, x)?),
        |i| layout.coordinate_name(i, &covariates),
        FD_STEP,
        GRADCHECK_TOL,
    )
}
