//! Joint log-posterior of the thinned LGCP and its derivatives.
//!
//! Linear predictor of campaign `t` in active cell `i`:
//! `η = μ_t + x_iᵀβ + w_{l(t),i} + log p_ti` with
//! `log p_ti = −Σ_k z_kti² / (2τ_k²)`. The likelihood is the cell-count
//! Poisson form `Σ n (η + ln a) − a·exp(η)`.
//!
//! The GP covariance of group `l` is `σ_l² (R(ρ_l) + εI)` where `ε` is the
//! relative jitter, so one correlation factor per range serves every σ.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{factorize_with_jitter, matern_corr, matern_corr_dlog_rho, OffsetTable};

use super::data::FitData;
use super::model::{HyperPoint, ModelSpec, ParamLayout, ParamVector};

const CACHE_CAPACITY: usize = 6;

/// Inverse and log-determinant of a jittered correlation matrix.
pub(crate) struct CorrFactor {
    pub inv: DMatrix<f64>,
    pub logdet: f64,
}

/// The model bound to one data set.
pub struct ThinnedLgcp<'a> {
    data: &'a FitData,
    spec: &'a ModelSpec,
    layout: ParamLayout,
    cache: Mutex<Vec<(u64, Arc<CorrFactor>)>>,
}

impl<'a> ThinnedLgcp<'a> {
    pub fn new(data: &'a FitData, spec: &'a ModelSpec) -> Result<Self> {
        spec.validate()?;
        if spec.groups.len() != data.n_campaigns() {
            return Err(Error::Config(format!(
                "model '{}': grouping map covers {} of {} campaigns",
                spec.name,
                spec.groups.len(),
                data.n_campaigns()
            )));
        }
        if spec.covariates != data.covariate_names {
            return Err(Error::Config(format!(
                "model '{}' expects covariates {:?}, data carries {:?}",
                spec.name, spec.covariates, data.covariate_names
            )));
        }
        if spec.detection.len() != data.n_detection() {
            return Err(Error::Config(format!(
                "model '{}' has {} detection components, data carries {}",
                spec.name,
                spec.detection.len(),
                data.n_detection()
            )));
        }
        let layout = ParamLayout {
            n_campaigns: data.n_campaigns(),
            n_covariates: spec.covariates.len(),
            n_groups: spec.n_groups(),
            n_cells: data.n_cells(),
            n_detection: spec.detection.len(),
        };
        Ok(Self {
            data,
            spec,
            layout,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn layout(&self) -> ParamLayout {
        self.layout
    }

    pub fn data(&self) -> &FitData {
        self.data
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    /// Observed-rate intercepts, zero β and w, hyperparameters from `hyper`.
    pub fn initial_params(&self, hyper: &HyperPoint) -> Result<ParamVector> {
        hyper.validate(&self.layout)?;
        let mut p = ParamVector::zeros(&self.layout);
        let area = self.data.active_area();
        for (mu, c) in p.mu.iter_mut().zip(&self.data.campaigns) {
            *mu = (c.total().max(0.5) / area).ln();
        }
        p.set_hyper(hyper);
        Ok(p)
    }

    pub(crate) fn corr_factor(&self, rho: f64) -> Result<Arc<CorrFactor>> {
        let key = rho.to_bits();
        if let Some((_, f)) = self.cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(Arc::clone(f));
        }
        let grid = &self.data.grid;
        let base = OffsetTable::new(grid, |d| matern_corr(d, rho)).matrix(grid, &self.data.active);
        let (_, chol, _) = factorize_with_jitter(&base, self.spec.rel_jitter)?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inv = chol.inverse();
        let f = Arc::new(CorrFactor { inv, logdet });
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= CACHE_CAPACITY {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&f)));
        Ok(f)
    }

    /// Model with the hyperparameters of `params` fixed.
    pub(crate) fn conditional(&self, params: &ParamVector) -> Result<Conditional<'_, 'a>> {
        Conditional::new(self, params)
    }

    /// Observed intensity `λ* = λ_pot·p` per campaign and active cell.
    pub fn observed_intensity(&self, params: &ParamVector) -> Result<Vec<Vec<f64>>> {
        if !params.fits(&self.layout) {
            return Err(Error::Shape(format!("parameter shape {:?} does not match model {:?}", params.layout(), self.layout)));
        }
        let tau: Vec<f64> = params.log_tau.iter().map(|v| v.exp()).collect();
        let logp = log_detection(self.data, &tau);
        let etas = predictor(self.data, self.spec, &self.layout, &params.latent(), &logp);
        Ok(etas.into_iter().map(|e| e.into_iter().map(f64::exp).collect()).collect())
    }

    /// Poisson log-likelihood only.
    pub fn log_likelihood(&self, params: &ParamVector) -> Result<f64> {
        let c = self.conditional(params)?;
        let x = params.latent();
        let etas = c.etas(&x);
        Ok(c.likelihood(&etas))
    }

    pub fn log_joint(&self, params: &ParamVector) -> Result<f64> {
        let c = self.conditional(params)?;
        Ok(c.value(&params.latent()))
    }

    /// Gradient over every unconstrained coordinate, in flat order.
    pub fn grad_log_joint(&self, params: &ParamVector) -> Result<Vec<f64>> {
        let c = self.conditional(params)?;
        let x = params.latent();
        let etas = c.etas(&x);
        let (g_lat, qw) = c.latent_gradient(&x, &etas);
        let mut g: Vec<f64> = g_lat.iter().copied().collect();
        let l = &self.layout;
        let n = l.n_cells as f64;
        let grid = &self.data.grid;

        let mut g_sigma = vec![0.0; l.n_groups];
        let mut g_rho = vec![0.0; l.n_groups];
        for grp in 0..l.n_groups {
            let (sigma, rho) = (c.sigma[grp], c.rho[grp]);
            let s2 = sigma * sigma;
            let w = &params.w[grp];
            // qw = R⁻¹w/σ²
            let v = &qw[grp] * s2;
            let quad: f64 = w.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            let pc = self.spec.priors.pc_for(grp + 1);
            g_sigma[grp] = quad / s2 - n - pc.lambda_sigma() * sigma + 1.0;

            let d = OffsetTable::new(grid, |dist| matern_corr_dlog_rho(dist, rho)).matrix(grid, &self.data.active);
            let dv = &d * &v;
            let vdv = v.dot(&dv);
            let inv = &c.factors[grp].inv;
            let trace: f64 = inv.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
            g_rho[grp] = 0.5 * vdv / s2 - 0.5 * trace + pc.lambda_rho() / rho - 2.0 + 1.0;
        }

        let mut g_tau = vec![0.0; l.n_detection];
        let a = self.data.cell_area();
        for (t, camp) in self.data.campaigns.iter().enumerate() {
            for (i, (&count, &eta)) in camp.counts.iter().zip(&etas[t]).enumerate() {
                let r = count - a * eta.exp();
                for (k, gk) in g_tau.iter_mut().enumerate() {
                    let z = camp.z[k][i];
                    *gk += r * z * z / (c.tau[k] * c.tau[k]);
                }
            }
        }
        let sd2 = self.spec.priors.log_tau_sd.powi(2);
        for (gk, lt) in g_tau.iter_mut().zip(&params.log_tau) {
            *gk -= lt / sd2;
        }
        g.extend(g_sigma);
        g.extend(g_rho);
        g.extend(g_tau);
        Ok(g)
    }
}

/// `log p` per campaign and active cell.
fn log_detection(data: &FitData, tau: &[f64]) -> Vec<Vec<f64>> {
    data.campaigns
        .iter()
        .map(|c| {
            (0..data.n_cells())
                .map(|i| c.z.iter().zip(tau).map(|(z, t)| -z[i] * z[i] / (2.0 * t * t)).sum())
                .collect()
        })
        .collect()
}

/// Linear predictor per campaign and active cell for the latent block `x`.
fn predictor(data: &FitData, spec: &ModelSpec, l: &ParamLayout, x: &[f64], logp: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let beta = &x[l.beta_offset()..l.beta_offset() + l.n_covariates];
    let mut base = vec![0.0; l.n_cells];
    for (b, cov) in beta.iter().zip(&data.covariates) {
        for (v, c) in base.iter_mut().zip(cov) {
            *v += b * c;
        }
    }
    (0..l.n_campaigns)
        .map(|t| {
            let mu = x[t];
            let g = spec.groups[t];
            let w = (g > 0).then(|| &x[l.w_offset(g)..l.w_offset(g) + l.n_cells]);
            (0..l.n_cells)
                .map(|i| mu + base[i] + w.map_or(0.0, |w| w[i]) + logp[t][i])
                .collect()
        })
        .collect()
}

/// The joint density as a function of the latent block (μ, β, w) with the
/// hyperparameters held fixed.
pub(crate) struct Conditional<'m, 'a> {
    model: &'m ThinnedLgcp<'a>,
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
    pub factors: Vec<Arc<CorrFactor>>,
    /// `log p` per campaign and active cell.
    logp: Vec<Vec<f64>>,
    /// Every term that does not depend on the latent block.
    constant: f64,
}

impl<'m, 'a> Conditional<'m, 'a> {
    fn new(model: &'m ThinnedLgcp<'a>, params: &ParamVector) -> Result<Self> {
        let layout = model.layout;
        if !params.fits(&layout) {
            return Err(Error::Shape(format!("parameter shape {:?} does not match model {layout:?}", params.layout())));
        }
        if !params.is_finite() {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        let hyper = params.hyper();
        hyper.validate(&layout)?;
        let data = model.data;
        let priors = &model.spec.priors;

        let factors = hyper.rho.iter().map(|&r| model.corr_factor(r)).collect::<Result<Vec<_>>>()?;

        let logp = log_detection(data, &hyper.tau);

        let n = layout.n_cells as f64;
        let ln2pi = (2.0 * PI).ln();
        let prec = priors.fixed_precision;
        let mut constant = 0.5 * (layout.n_campaigns + layout.n_covariates) as f64 * (prec.ln() - ln2pi);
        for g in 0..layout.n_groups {
            let (sigma, rho) = (hyper.sigma[g], hyper.rho[g]);
            constant += -n * sigma.ln() - 0.5 * factors[g].logdet - 0.5 * n * ln2pi;
            let pc = priors.pc_for(g + 1);
            // the log-scale Jacobian turns the PC density into one over (log σ, log ρ)
            constant += pc.rho_log_density(rho) + pc.sigma_log_density(sigma) + sigma.ln() + rho.ln();
        }
        let sd = priors.log_tau_sd;
        for lt in &params.log_tau {
            constant += -0.5 * (lt / sd).powi(2) - sd.ln() - 0.5 * ln2pi;
        }

        Ok(Self {
            model,
            sigma: hyper.sigma,
            rho: hyper.rho,
            tau: hyper.tau,
            factors,
            logp,
            constant,
        })
    }

    fn layout(&self) -> &ParamLayout {
        &self.model.layout
    }

    fn group(&self, t: usize) -> usize {
        self.model.spec.groups[t]
    }

    /// Linear predictor per campaign and active cell.
    pub fn etas(&self, x: &[f64]) -> Vec<Vec<f64>> {
        predictor(self.model.data, self.model.spec, self.layout(), x, &self.logp)
    }

    pub fn likelihood(&self, etas: &[Vec<f64>]) -> f64 {
        let data = self.model.data;
        let a = data.cell_area();
        let ln_a = a.ln();
        let mut ll = 0.0;
        for (camp, eta) in data.campaigns.iter().zip(etas) {
            for (&n, &e) in camp.counts.iter().zip(eta) {
                ll += n * (e + ln_a) - a * e.exp();
            }
        }
        ll
    }

    fn w_slice<'x>(&self, x: &'x [f64], g: usize) -> &'x [f64] {
        let l = self.layout();
        &x[l.w_offset(g)..l.w_offset(g) + l.n_cells]
    }

    /// `Q_l w_l = R_l⁻¹ w_l / σ_l²` per group.
    fn precision_times_w(&self, x: &[f64]) -> Vec<DVector<f64>> {
        (0..self.layout().n_groups)
            .map(|g| {
                let w = DVector::from_column_slice(self.w_slice(x, g + 1));
                (&self.factors[g].inv * w) / (self.sigma[g] * self.sigma[g])
            })
            .collect()
    }

    fn value_with(&self, x: &[f64], etas: &[Vec<f64>], qw: &[DVector<f64>]) -> f64 {
        let l = self.layout();
        let prec = self.model.spec.priors.fixed_precision;
        let fixed: f64 = x[..l.n_campaigns + l.n_covariates].iter().map(|v| v * v).sum();
        let mut total = self.likelihood(etas) - 0.5 * prec * fixed + self.constant;
        for (g, q) in qw.iter().enumerate() {
            let w = self.w_slice(x, g + 1);
            total -= 0.5 * w.iter().zip(q.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        total
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let etas = self.etas(x);
        let qw = self.precision_times_w(x);
        self.value_with(x, &etas, &qw)
    }

    /// Latent gradient and the `Q_l w_l` products it used.
    fn latent_gradient(&self, x: &[f64], etas: &[Vec<f64>]) -> (DVector<f64>, Vec<DVector<f64>>) {
        let l = *self.layout();
        let data = self.model.data;
        let a = data.cell_area();
        let prec = self.model.spec.priors.fixed_precision;
        let qw = self.precision_times_w(x);
        let mut g = DVector::zeros(l.latent_dim());
        for (t, (camp, eta)) in data.campaigns.iter().zip(etas).enumerate() {
            let grp = self.group(t);
            for i in 0..l.n_cells {
                let r = camp.counts[i] - a * eta[i].exp();
                g[t] += r;
                for j in 0..l.n_covariates {
                    g[l.beta_offset() + j] += r * data.covariates[j][i];
                }
                if grp > 0 {
                    g[l.w_offset(grp) + i] += r;
                }
            }
        }
        for j in 0..l.n_campaigns + l.n_covariates {
            g[j] -= prec * x[j];
        }
        for (grp, q) in qw.iter().enumerate() {
            let o = l.w_offset(grp + 1);
            for i in 0..l.n_cells {
                g[o + i] -= q[i];
            }
        }
        (g, qw)
    }

    /// Value, gradient and negative Hessian over the latent block.
    pub fn value_grad_neg_hessian(&self, x: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let l = *self.layout();
        let data = self.model.data;
        let a = data.cell_area();
        let prec = self.model.spec.priors.fixed_precision;
        let etas = self.etas(x);
        let (g, qw) = self.latent_gradient(x, &etas);
        let f = self.value_with(x, &etas, &qw);

        let dim = l.latent_dim();
        let mut h = DMatrix::zeros(dim, dim);
        for grp in 0..l.n_groups {
            let o = l.w_offset(grp + 1);
            let s2 = self.sigma[grp] * self.sigma[grp];
            let inv = &self.factors[grp].inv;
            for j in 0..l.n_cells {
                for i in 0..l.n_cells {
                    h[(o + i, o + j)] = inv[(i, j)] / s2;
                }
            }
        }
        let bo = l.beta_offset();
        for (t, eta) in etas.iter().enumerate() {
            let grp = self.group(t);
            for i in 0..l.n_cells {
                let m = a * eta[i].exp();
                h[(t, t)] += m;
                for j in 0..l.n_covariates {
                    let xj = data.covariates[j][i];
                    h[(t, bo + j)] += m * xj;
                    for k in 0..l.n_covariates {
                        h[(bo + j, bo + k)] += m * xj * data.covariates[k][i];
                    }
                }
                if grp > 0 {
                    let wi = l.w_offset(grp) + i;
                    h[(t, wi)] += m;
                    h[(wi, wi)] += m;
                    for j in 0..l.n_covariates {
                        h[(bo + j, wi)] += m * data.covariates[j][i];
                    }
                }
            }
        }
        for j in 0..l.n_campaigns + l.n_covariates {
            h[(j, j)] += prec;
        }
        // the μ and β rows were filled right of the ββ block only
        for r in 0..bo + l.n_covariates {
            let from = if r < bo { r + 1 } else { bo + l.n_covariates };
            for c in from..dim {
                h[(c, r)] = h[(r, c)];
            }
        }
        (f, g, h)
    }
}
