use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

use super::joint::ThinnedLgcp;
use super::model::ParamVector;

/// Inverse negative Hessian of the log joint over (μ, β, w) at `map`,
/// symmetrized.
pub fn laplace_cov(model: &ThinnedLgcp, map: &ParamVector) -> Result<DMatrix<f64>> {
    let cond = model.conditional(map)?;
    let (_, _, h) = cond.value_grad_neg_hessian(&map.latent());
    let chol = Cholesky::new(h).ok_or(Error::IndefiniteHessian)?;
    Ok(covariance_from_factor(&chol))
}

pub(crate) fn covariance_from_factor(chol: &Cholesky<f64, Dyn>) -> DMatrix<f64> {
    let inv = chol.inverse();
    (&inv + inv.transpose()) * 0.5
}

pub(crate) fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Laplace approximation of `log p(data, θ)` from the log joint at the
/// conditional mode and the factor of the negative Hessian there.
pub fn laplace_log_marginal(log_joint_at_mode: f64, neg_hessian: &Cholesky<f64, Dyn>) -> f64 {
    let d = neg_hessian.l_dirty().nrows() as f64;
    log_joint_at_mode - 0.5 * log_det(neg_hessian) + 0.5 * d * (2.0 * PI).ln()
}
