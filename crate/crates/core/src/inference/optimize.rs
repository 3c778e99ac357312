//! Mode finding over the latent block with the hyperparameters fixed.
//!
//! The conditional log-density is strictly concave in (μ, β, w), so damped
//! Newton steps with a backtracking line search converge from any finite
//! start. The convergence measure is the Newton decrement `√(gᵀH⁻¹g)`,
//! i.e. the gradient norm in the metric of the negative Hessian.

use nalgebra::{Cholesky, DVector, Dyn};

use crate::error::{Error, Result};

use super::joint::ThinnedLgcp;
use super::model::ParamVector;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub grad_tol: f64,
    pub rel_obj_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            grad_tol: 1e-5,
            rel_obj_tol: 1e-9,
            max_iter: 2000,
        }
    }
}

pub struct MapFit {
    pub params: ParamVector,
    /// Log joint at `params`.
    pub objective: f64,
    pub iterations: usize,
    /// Newton decrement at `params`.
    pub grad_norm: f64,
    /// Cholesky factor of the negative latent Hessian at `params`.
    pub neg_hessian: Cholesky<f64, Dyn>,
}

/// Maximizes the log joint over (μ, β, w) starting from `init`; the
/// hyperparameters of `init` stay fixed.
pub fn fit_map(model: &ThinnedLgcp, init: &ParamVector, tol: &Tolerances) -> Result<MapFit> {
    if !init.is_finite() {
        return Err(Error::Domain("initial parameters must be finite".into()));
    }
    let cond = model.conditional(init)?;
    let mut x = DVector::from_vec(init.latent());
    let mut stalled = false;
    for iteration in 0..=tol.max_iter {
        let (f, g, h) = cond.value_grad_neg_hessian(x.as_slice());
        if !f.is_finite() {
            return Err(Error::Numerical(format!("log joint is {f} at iteration {iteration}")));
        }
        let chol = Cholesky::new(h).ok_or(Error::IndefiniteHessian)?;
        let step = chol.solve(&g);
        let dec2 = g.dot(&step).max(0.0);
        let grad_norm = dec2.sqrt();
        if grad_norm < tol.grad_tol || stalled {
            let mut params = init.clone();
            params.set_latent(x.as_slice());
            return Ok(MapFit {
                params,
                objective: f,
                iterations: iteration,
                grad_norm,
                neg_hessian: chol,
            });
        }
        if iteration == tol.max_iter {
            let mut best = init.clone();
            best.set_latent(x.as_slice());
            return Err(Error::NonConvergence {
                iterations: iteration,
                grad_norm,
                best: Box::new(best),
            });
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = &x + &step * t;
            let fc = cond.value(cand.as_slice());
            if fc.is_finite() && fc >= f + ARMIJO * t * dec2 {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                stalled = (fc - f).abs() <= tol.rel_obj_tol * f.abs().max(1.0);
                x = cand;
            }
            // no ascent possible at machine precision
            None => stalled = true,
        }
    }
    unreachable!("the loop returns at the iteration cap")
}
