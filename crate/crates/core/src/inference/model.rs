use crate::detection::DetectionComponent;
use crate::error::{Error, Result};
use crate::gp::{PcPriorSpec, DEFAULT_REL_JITTER};

/// Prior hyperparameters of the thinned LGCP.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// Precision of the zero-mean Gaussian priors on every μ_t and β_j.
    pub fixed_precision: f64,
    /// PC prior per GP group; a single entry applies to every group.
    pub pc: Vec<PcPriorSpec>,
    /// Standard deviation of the zero-mean Gaussian prior on each log τ_k.
    pub log_tau_sd: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            fixed_precision: 1e-3,
            pc: vec![PcPriorSpec::default()],
            log_tau_sd: 2.0,
        }
    }
}

impl PriorSpec {
    pub fn pc_for(&self, group: usize) -> &PcPriorSpec {
        if self.pc.len() == 1 {
            &self.pc[0]
        } else {
            &self.pc[group - 1]
        }
    }
}

/// Everything that defines one model variant: intensity covariates,
/// thinning components, GP grouping and priors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub covariates: Vec<String>,
    /// Thinning components; empty for an unthinned model.
    pub detection: Vec<DetectionComponent>,
    /// GP group per campaign (in campaign order), 1-based; 0 means the
    /// campaign has no spatial field.
    pub groups: Vec<usize>,
    pub priors: PriorSpec,
    /// Diagonal jitter relative to σ² added to GP covariances.
    pub rel_jitter: f64,
}

impl ModelSpec {
    pub fn new(name: &str, covariates: Vec<String>, detection: Vec<DetectionComponent>, groups: Vec<usize>) -> Self {
        Self {
            name: name.to_string(),
            covariates,
            detection,
            groups,
            priors: PriorSpec::default(),
            rel_jitter: DEFAULT_REL_JITTER,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.groups.iter().copied().max().unwrap_or(0)
    }

    pub fn is_thinned(&self) -> bool {
        !self.detection.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.priors.fixed_precision > 0.0 && self.priors.log_tau_sd > 0.0) {
            return Err(Error::Config(format!("model '{}': prior precisions must be positive", self.name)));
        }
        let l = self.n_groups();
        for g in 1..=l {
            if !self.groups.contains(&g) {
                return Err(Error::Config(format!("model '{}': GP group {g} has no campaigns", self.name)));
            }
        }
        if self.priors.pc.len() != 1 && self.priors.pc.len() != l {
            return Err(Error::Config(format!(
                "model '{}': {} PC priors for {l} groups",
                self.name,
                self.priors.pc.len()
            )));
        }
        for pc in &self.priors.pc {
            pc.validate()?;
        }
        if !(self.rel_jitter > 0.0) {
            return Err(Error::Config(format!("model '{}': jitter must be positive", self.name)));
        }
        Ok(())
    }
}

/// Dimensions of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_campaigns: usize,
    pub n_covariates: usize,
    pub n_groups: usize,
    pub n_cells: usize,
    pub n_detection: usize,
}

impl ParamLayout {
    /// Size of the Gaussian block (μ, β, w).
    pub fn latent_dim(&self) -> usize {
        self.n_campaigns + self.n_covariates + self.n_groups * self.n_cells
    }

    pub fn hyper_dim(&self) -> usize {
        2 * self.n_groups + self.n_detection
    }

    pub fn dim(&self) -> usize {
        self.latent_dim() + self.hyper_dim()
    }

    pub fn beta_offset(&self) -> usize {
        self.n_campaigns
    }

    pub fn w_offset(&self, group: usize) -> usize {
        self.n_campaigns + self.n_covariates + (group - 1) * self.n_cells
    }

    /// Human-readable name of flat coordinate `i`.
    pub fn coordinate_name(&self, i: usize, covariates: &[String]) -> String {
        let (t, p, l, n) = (self.n_campaigns, self.n_covariates, self.n_groups, self.n_cells);
        if i < t {
            format!("mu[{}]", i + 1)
        } else if i < t + p {
            covariates
                .get(i - t)
                .map(|c| format!("beta[{c}]"))
                .unwrap_or_else(|| format!("beta[{}]", i - t + 1))
        } else if i < t + p + l * n {
            let j = i - t - p;
            format!("w[{}][{}]", j / n + 1, j % n)
        } else if i < t + p + l * n + l {
            format!("log_sigma[{}]", i - t - p - l * n + 1)
        } else if i < t + p + l * n + 2 * l {
            format!("log_rho[{}]", i - t - p - l * n - l + 1)
        } else {
            format!("log_tau[{}]", i - t - p - l * n - 2 * l + 1)
        }
    }
}

/// Hyperparameter values on the natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperPoint {
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub tau: Vec<f64>,
}

impl HyperPoint {
    pub fn validate(&self, layout: &ParamLayout) -> Result<()> {
        if self.sigma.len() != layout.n_groups || self.rho.len() != layout.n_groups || self.tau.len() != layout.n_detection {
            return Err(Error::Shape(format!(
                "hyperparameter point has {}/{}/{} entries, model needs {}/{}/{}",
                self.sigma.len(),
                self.rho.len(),
                self.tau.len(),
                layout.n_groups,
                layout.n_groups,
                layout.n_detection
            )));
        }
        if self.sigma.iter().chain(&self.rho).chain(&self.tau).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("hyperparameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// All model parameters, positive ones on the log scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    /// One field per GP group over the active cells.
    pub w: Vec<Vec<f64>>,
    pub log_sigma: Vec<f64>,
    pub log_rho: Vec<f64>,
    pub log_tau: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(layout: &ParamLayout) -> Self {
        Self {
            mu: vec![0.0; layout.n_campaigns],
            beta: vec![0.0; layout.n_covariates],
            w: vec![vec![0.0; layout.n_cells]; layout.n_groups],
            log_sigma: vec![0.0; layout.n_groups],
            log_rho: vec![0.0; layout.n_groups],
            log_tau: vec![0.0; layout.n_detection],
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_campaigns: self.mu.len(),
            n_covariates: self.beta.len(),
            n_groups: self.w.len(),
            n_cells: self.w.first().map_or(0, Vec::len),
            n_detection: self.log_tau.len(),
        }
    }

    /// Whether the vector has the shape `layout` prescribes.
    pub fn fits(&self, layout: &ParamLayout) -> bool {
        self.mu.len() == layout.n_campaigns
            && self.beta.len() == layout.n_covariates
            && self.w.len() == layout.n_groups
            && self.w.iter().all(|w| w.len() == layout.n_cells)
            && self.log_sigma.len() == layout.n_groups
            && self.log_rho.len() == layout.n_groups
            && self.log_tau.len() == layout.n_detection
    }

    pub fn hyper(&self) -> HyperPoint {
        HyperPoint {
            sigma: self.log_sigma.iter().map(|v| v.exp()).collect(),
            rho: self.log_rho.iter().map(|v| v.exp()).collect(),
            tau: self.log_tau.iter().map(|v| v.exp()).collect(),
        }
    }

    pub fn set_hyper(&mut self, hyper: &HyperPoint) {
        self.log_sigma = hyper.sigma.iter().map(|v| v.ln()).collect();
        self.log_rho = hyper.rho.iter().map(|v| v.ln()).collect();
        self.log_tau = hyper.tau.iter().map(|v| v.ln()).collect();
    }

    /// Flat order: μ, β, w (group-major), log σ, log ρ, log τ.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.latent();
        v.extend(&self.log_sigma);
        v.extend(&self.log_rho);
        v.extend(&self.log_tau);
        v
    }

    pub fn latent(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.layout().latent_dim());
        v.extend(&self.mu);
        v.extend(&self.beta);
        for w in &self.w {
            v.extend(w);
        }
        v
    }

    pub fn set_latent(&mut self, x: &[f64]) {
        let l = self.layout();
        debug_assert_eq!(x.len(), l.latent_dim());
        self.mu.copy_from_slice(&x[..l.n_campaigns]);
        self.beta.copy_from_slice(&x[l.n_campaigns..l.n_campaigns + l.n_covariates]);
        for g in 0..l.n_groups {
            let o = l.w_offset(g + 1);
            self.w[g].copy_from_slice(&x[o..o + l.n_cells]);
        }
    }

    pub fn from_flat(layout: &ParamLayout, flat: &[f64]) -> Result<Self> {
        if flat.len() != layout.dim() {
            return Err(Error::Shape(format!("flat vector has {} entries, layout needs {}", flat.len(), layout.dim())));
        }
        let mut p = Self::zeros(layout);
        p.set_latent(&flat[..layout.latent_dim()]);
        let mut o = layout.latent_dim();
        let l = layout.n_groups;
        p.log_sigma.copy_from_slice(&flat[o..o + l]);
        o += l;
        p.log_rho.copy_from_slice(&flat[o..o + l]);
        o += l;
        p.log_tau.copy_from_slice(&flat[o..o + layout.n_detection]);
        Ok(p)
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> ParamLayout {
        ParamLayout {
            n_campaigns: 2,
            n_covariates: 3,
            n_groups: 2,
            n_cells: 4,
            n_detection: 1,
        }
    }

    #[test]
    fn flat_round_trip_and_names() {
        let l = layout();
        let flat: Vec<f64> = (0..l.dim()).map(|i| i as f64).collect();
        let p = ParamVector::from_flat(&l, &flat).unwrap();
        assert_eq!(p.to_flat(), flat);
        assert_eq!(p.w[1][0], 9.0);
        assert_eq!(p.log_tau, vec![17.0]);
        let names = ["a".to_string(), "b".into(), "c".into()];
        assert_eq!(l.coordinate_name(0, &names), "mu[1]");
        assert_eq!(l.coordinate_name(3, &names), "beta[b]");
        assert_eq!(l.coordinate_name(10, &names), "w[2][1]");
        assert_eq!(l.coordinate_name(14, &names), "log_sigma[2]");
        assert_eq!(l.coordinate_name(16, &names), "log_rho[2]");
        assert_eq!(l.coordinate_name(17, &names), "log_tau[1]");
        assert!(ParamVector::from_flat(&l, &flat[1..]).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = ModelSpec::new("m", vec![], vec![], vec![1, 1, 3]);
        assert!(s.validate().is_err());
        s.groups = vec![1, 2, 2];
        assert!(s.validate().is_ok());
        s.priors.pc = vec![PcPriorSpec::default(); 3];
        assert!(s.validate().is_err());
    }
}
