//! Mixture-of-Laplace posterior: hyperparameter profile weights times a
//! Gaussian over (μ, β, w) per retained grid point.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::standard_normal_vector;
use crate::util::{derive_seed, quantile_sorted};

use super::joint::ThinnedLgcp;
use super::laplace::covariance_from_factor;
use super::model::{HyperPoint, ParamVector};
use super::optimize::Tolerances;
use super::profile::{profile_with, HyperGrid, HyperProfile};

/// Components below this normalized weight are dropped before sampling.
pub const PRUNE_WEIGHT: f64 = 1e-9;
const SEED_DRAWS: u64 = 11;

/// Gaussian approximation at one hyperparameter point.
pub struct LaplaceComponent {
    pub weight: f64,
    pub hyper: HyperPoint,
    pub mode: ParamVector,
    /// Cholesky factor of the negative latent Hessian at the mode.
    pub neg_hessian: Cholesky<f64, Dyn>,
}

impl LaplaceComponent {
    /// Marginal standard deviation of latent coordinate `index`.
    pub fn latent_sd(&self, index: usize) -> f64 {
        let n = self.neg_hessian.l_dirty().nrows();
        let mut e = DVector::zeros(n);
        e[index] = 1.0;
        let y = self.neg_hessian.l_dirty().solve_lower_triangular(&e).expect("factor has a positive diagonal");
        y.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    /// Newton iterations at the modal grid point.
    pub iterations: usize,
    /// Newton decrement at the modal grid point.
    pub grad_norm: f64,
    pub grid_points: usize,
    pub failed_points: usize,
    /// Components dropped for negligible weight.
    pub pruned: usize,
}

pub struct PosteriorFit {
    /// Mode at the highest-weight grid point.
    pub map: ParamVector,
    pub hyper_profile: HyperProfile,
    pub components: Vec<LaplaceComponent>,
    pub samples: Vec<ParamVector>,
    pub diagnostics: FitDiagnostics,
}

impl PosteriorFit {
    fn modal_component(&self) -> &LaplaceComponent {
        let mut best = &self.components[0];
        for c in &self.components[1..] {
            if c.weight > best.weight {
                best = c;
            }
        }
        best
    }

    /// Laplace covariance of (μ, β, w) at the modal hyperparameters.
    pub fn laplace_cov(&self) -> DMatrix<f64> {
        covariance_from_factor(&self.modal_component().neg_hessian)
    }

    /// Exact mixture marginal of latent coordinate `index`.
    pub fn latent_marginal(&self, index: usize) -> NormalMixture {
        NormalMixture {
            weights: self.components.iter().map(|c| c.weight).collect(),
            means: self.components.iter().map(|c| c.mode.latent()[index]).collect(),
            sds: self.components.iter().map(|c| c.latent_sd(index)).collect(),
        }
    }
}

/// Runs the profile over `grid`, keeps the components with non-negligible
/// weight and draws `m` posterior samples.
pub fn fit_posterior(model: &ThinnedLgcp, grid: &HyperGrid, tol: &Tolerances, m: usize, seed: u64) -> Result<PosteriorFit> {
    if m == 0 {
        return Err(Error::Domain("at least one posterior sample is required".into()));
    }
    let profile = profile_with(model, grid, tol, |_, _| {})?;
    let retained: Vec<usize> = (0..profile.points.len())
        .filter(|&i| profile.points[i].weight >= PRUNE_WEIGHT)
        .collect();
    let kept_mass: f64 = retained.iter().map(|&i| profile.points[i].weight).sum();
    let mut components = Vec::with_capacity(retained.len());
    for &i in &retained {
        let p = &profile.points[i];
        let cond = model.conditional(&p.map)?;
        let (_, _, h) = cond.value_grad_neg_hessian(&p.map.latent());
        let neg_hessian = Cholesky::new(h).ok_or(Error::IndefiniteHessian)?;
        components.push(LaplaceComponent {
            weight: p.weight / kept_mass,
            hyper: p.hyper.clone(),
            mode: p.map.clone(),
            neg_hessian,
        });
    }
    let samples = sample_posterior(&components, m, seed)?;
    let modal = &profile.points[profile.modal_index()];
    let diagnostics = FitDiagnostics {
        iterations: modal.iterations,
        grad_norm: modal.grad_norm,
        grid_points: grid.len(),
        failed_points: profile.failures.len(),
        pruned: profile.points.len() - retained.len(),
    };
    Ok(PosteriorFit {
        map: modal.map.clone(),
        hyper_profile: profile,
        components,
        samples,
        diagnostics,
    })
}

/// Draws θ by weight, then the latent block from that component's
/// Gaussian. Draw `j` uses its own derived seed, so the set does not
/// depend on the thread count.
pub fn sample_posterior(components: &[LaplaceComponent], m: usize, seed: u64) -> Result<Vec<ParamVector>> {
    if components.is_empty() {
        return Err(Error::Domain("posterior has no components".into()));
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if !((total - 1.0).abs() < 1e-9) {
        return Err(Error::Domain(format!("component weights sum to {total}")));
    }
    let draws = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, SEED_DRAWS, j as u64));
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = components.len() - 1;
            for (k, c) in components.iter().enumerate() {
                acc += c.weight;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            let c = &components[pick];
            let eps = standard_normal_vector(&mut rng, c.neg_hessian.l_dirty().nrows());
            // x = mode + L⁻ᵀε has covariance (LLᵀ)⁻¹
            let dx = c.neg_hessian.l_dirty().tr_solve_lower_triangular(&eps).expect("factor has a positive diagonal");
            let mut x = c.mode.latent();
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi += d;
            }
            let mut p = c.mode.clone();
            p.set_latent(&x);
            p
        })
        .collect();
    Ok(draws)
}

/// Finite mixture of univariate normals.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMixture {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

impl NormalMixture {
    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    pub fn sd(&self) -> f64 {
        let mean = self.mean();
        let second: f64 = self
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(w, (m, s))| w * (s * s + m * m))
            .sum();
        (second - mean * mean).max(0.0).sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(w, (m, s))| w * normal_cdf((x - m) / s))
            .sum()
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, q: f64) -> f64 {
        let lo_start = self.means.iter().zip(&self.sds).map(|(m, s)| m - 40.0 * s).fold(f64::INFINITY, f64::min);
        let hi_start = self.means.iter().zip(&self.sds).map(|(m, s)| m + 40.0 * s).fold(f64::NEG_INFINITY, f64::max);
        let (mut lo, mut hi) = (lo_start, hi_start);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

impl ParamSummary {
    pub fn from_samples(name: String, values: &[f64]) -> Self {
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            name,
            mean,
            sd: var.sqrt(),
            q025: quantile_sorted(&sorted, 0.025),
            q975: quantile_sorted(&sorted, 0.975),
        }
    }
}

/// Sample summaries of μ, β, σ, ρ and τ (natural scale for the latter).
pub fn summarize(samples: &[ParamVector], covariates: &[String]) -> Vec<ParamSummary> {
    let first = &samples[0];
    let col = |f: &dyn Fn(&ParamVector) -> f64| samples.iter().map(f).collect::<Vec<_>>();
    let mut out = Vec::new();
    for t in 0..first.mu.len() {
        out.push(ParamSummary::from_samples(format!("mu[{}]", t + 1), &col(&|p| p.mu[t])));
    }
    for (j, name) in covariates.iter().enumerate() {
        out.push(ParamSummary::from_samples(format!("beta[{name}]"), &col(&|p| p.beta[j])));
    }
    for g in 0..first.log_sigma.len() {
        out.push(ParamSummary::from_samples(format!("sigma[{}]", g + 1), &col(&|p| p.log_sigma[g].exp())));
        out.push(ParamSummary::from_samples(format!("rho[{}]", g + 1), &col(&|p| p.log_rho[g].exp())));
    }
    for k in 0..first.log_tau.len() {
        out.push(ParamSummary::from_samples(format!("tau[{}]", k + 1), &col(&|p| p.log_tau[k].exp())));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::data::FitData;
    use crate::inference::model::ModelSpec;
    use crate::spatial::{MarkedPointPattern, Point, RasterGrid, RasterLayer};

    fn model_data() -> (FitData, ModelSpec) {
        let grid = RasterGrid::new(0.0, 0.0, 4, 3, 1.0).unwrap();
        let cov = RasterLayer::from_fn(grid, |x, _| x / 4.0 - 0.5).unwrap();
        let pts = (0..40).map(|k| Point::new((k * 5 % 16) as f64 / 4.0, (k * 7 % 12) as f64 / 4.0)).collect();
        let data = FitData::new(grid, vec![("x".into(), cov)], &[MarkedPointPattern::new(1, pts)], vec![vec![]]).unwrap();
        (data, ModelSpec::new("p", vec!["x".into()], vec![], vec![1]))
    }

    #[test]
    fn mixture_quantiles_invert_the_cdf() {
        let mix = NormalMixture { weights: vec![0.3, 0.7], means: vec![-1.0, 2.0], sds: vec![0.5, 1.5] };
        for q in [0.025, 0.3, 0.5, 0.975] {
            assert!((mix.cdf(mix.quantile(q)) - q).abs() < 1e-10);
        }
        assert!((mix.mean() - 1.1).abs() < 1e-12);
        let single = NormalMixture { weights: vec![1.0], means: vec![0.0], sds: vec![1.0] };
        assert!((single.quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_deterministic_and_centred() {
        let (data, spec) = model_data();
        let model = ThinnedLgcp::new(&data, &spec).unwrap();
        let grid = HyperGrid::product(&[vec![0.2, 0.6]], &[vec![1.5]], &[]).unwrap();
        let fit = fit_posterior(&model, &grid, &Tolerances::default(), 5000, 17).unwrap();
        let again = fit_posterior(&model, &grid, &Tolerances::default(), 5000, 17).unwrap();
        assert_eq!(fit.samples, again.samples);
        assert!((fit.hyper_profile.points.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-12);

        let mix = fit.latent_marginal(0);
        let m = fit.samples.len() as f64;
        let mean = fit.samples.iter().map(|p| p.mu[0]).sum::<f64>() / m;
        assert!((mean - mix.mean()).abs() < 4.0 * mix.sd() / m.sqrt());
        let cov = fit.laplace_cov();
        assert!(cov.clone().cholesky().is_some());
    }

    #[test]
    fn one_draw_on_one_point() {
        let (data, spec) = model_data();
        let model = ThinnedLgcp::new(&data, &spec).unwrap();
        let grid = HyperGrid::product(&[vec![0.3]], &[vec![1.5]], &[]).unwrap();
        let fit = fit_posterior(&model, &grid, &Tolerances::default(), 1, 3).unwrap();
        assert_eq!(fit.samples.len(), 1);
        assert_eq!(fit.samples[0].hyper(), fit.map.hyper());
        assert_ne!(fit.samples[0].mu, fit.map.mu);
        assert!(fit_posterior(&model, &grid, &Tolerances::default(), 0, 3).is_err());
    }

    #[test]
    fn summaries_of_known_samples() {
        let s = ParamSummary::from_samples("a".into(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.mean, 3.0);
        assert!((s.sd - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((s.q025 - 1.1).abs() < 1e-12 && (s.q975 - 4.9).abs() < 1e-12);
    }
}
