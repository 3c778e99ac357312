//! Discrete integration over the hyperparameters.

use crate::error::{Error, Result};

use super::joint::ThinnedLgcp;
use super::laplace::laplace_log_marginal;
use super::model::{HyperPoint, ModelSpec, ParamLayout, ParamVector};
use super::optimize::{fit_map, MapFit, Tolerances};

/// Grid points are fitted in the listed order.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    points: Vec<HyperPoint>,
}

impl HyperGrid {
    pub fn new(points: Vec<HyperPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("hyperparameter grid is empty".into()));
        }
        Ok(Self { points })
    }

    /// Cartesian product of per-group σ and ρ values and per-component τ
    /// values; the last τ varies fastest.
    pub fn product(sigma: &[Vec<f64>], rho: &[Vec<f64>], tau: &[Vec<f64>]) -> Result<Self> {
        if sigma.len() != rho.len() {
            return Err(Error::Config(format!("{} σ axes but {} ρ axes", sigma.len(), rho.len())));
        }
        let mut axes: Vec<&[f64]> = Vec::new();
        axes.extend(sigma.iter().map(Vec::as_slice));
        axes.extend(rho.iter().map(Vec::as_slice));
        axes.extend(tau.iter().map(Vec::as_slice));
        if axes.iter().any(|a| a.is_empty()) {
            return Err(Error::Config("every hyperparameter axis needs at least one value".into()));
        }
        let l = sigma.len();
        let mut points = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let v: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a[i]).collect();
            points.push(HyperPoint {
                sigma: v[..l].to_vec(),
                rho: v[l..2 * l].to_vec(),
                tau: v[2 * l..].to_vec(),
            });
            let mut k = axes.len();
            loop {
                if k == 0 {
                    return Self::new(points);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Five log-spaced values per hyperparameter, a factor of two apart and
    /// centred on the prior median (τ: centred on 1).
    pub fn default_for(spec: &ModelSpec) -> Result<Self> {
        let around = |m: f64| [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * m).collect::<Vec<_>>();
        let l = spec.n_groups();
        let sigma = (1..=l).map(|g| around(spec.priors.pc_for(g).sigma_median())).collect::<Vec<_>>();
        let rho = (1..=l).map(|g| around(spec.priors.pc_for(g).rho_median())).collect::<Vec<_>>();
        let tau = spec.detection.iter().map(|_| around(1.0)).collect::<Vec<_>>();
        Self::product(&sigma, &rho, &tau)
    }

    pub fn points(&self) -> &[HyperPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self, layout: &ParamLayout) -> Result<()> {
        self.points.iter().try_for_each(|p| p.validate(layout))
    }
}

#[derive(Debug, Clone)]
pub struct ProfilePoint {
    pub hyper: HyperPoint,
    pub log_marginal: f64,
    /// Normalized weight; the weights of all points sum to one.
    pub weight: f64,
    pub map: ParamVector,
    pub iterations: usize,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct HyperProfile {
    pub points: Vec<ProfilePoint>,
    /// Grid points whose fit failed, with the reason.
    pub failures: Vec<(HyperPoint, String)>,
}

impl HyperProfile {
    /// Index of the highest-weight point (first on ties).
    pub fn modal_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if p.weight > self.points[best].weight {
                best = i;
            }
        }
        best
    }

    /// Weighted mean of each hyperparameter.
    pub fn mean(&self) -> HyperPoint {
        let first = &self.points[0].hyper;
        let mut m = HyperPoint {
            sigma: vec![0.0; first.sigma.len()],
            rho: vec![0.0; first.rho.len()],
            tau: vec![0.0; first.tau.len()],
        };
        for p in &self.points {
            let add = |acc: &mut Vec<f64>, v: &[f64]| acc.iter_mut().zip(v).for_each(|(a, b)| *a += p.weight * b);
            add(&mut m.sigma, &p.hyper.sigma);
            add(&mut m.rho, &p.hyper.rho);
            add(&mut m.tau, &p.hyper.tau);
        }
        m
    }
}

/// Max-shifted normalized exponentials.
pub fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Fits every grid point and weights it by its Laplace-approximate
/// marginal. Points are fitted in order, each starting from the previous
/// mode, so the result does not depend on scheduling.
pub fn profile_hyperparams(model: &ThinnedLgcp, grid: &HyperGrid, tol: &Tolerances) -> Result<HyperProfile> {
    profile_with(model, grid, tol, |_, _| {})
}

pub(crate) fn profile_with(
    model: &ThinnedLgcp,
    grid: &HyperGrid,
    tol: &Tolerances,
    mut on_fit: impl FnMut(usize, &MapFit),
) -> Result<HyperProfile> {
    grid.validate(&model.layout())?;
    let mut warm: Option<Vec<f64>> = None;
    let mut fitted = Vec::new();
    let mut failures = Vec::new();
    for (k, hyper) in grid.points().iter().enumerate() {
        let mut init = model.initial_params(hyper)?;
        if let Some(x) = &warm {
            init.set_latent(x);
        }
        match fit_map(model, &init, tol) {
            Ok(fit) => {
                on_fit(k, &fit);
                let lm = laplace_log_marginal(fit.objective, &fit.neg_hessian);
                warm = Some(fit.params.latent());
                fitted.push(ProfilePoint {
                    hyper: hyper.clone(),
                    log_marginal: lm,
                    weight: 0.0,
                    map: fit.params,
                    iterations: fit.iterations,
                    grad_norm: fit.grad_norm,
                });
            }
            Err(e) => failures.push((hyper.clone(), e.to_string())),
        }
    }
    if fitted.is_empty() {
        let first = failures.first().map(|(_, e)| e.clone()).unwrap_or_default();
        return Err(Error::ProfileFailed { first });
    }
    let logs: Vec<f64> = fitted.iter().map(|p| p.log_marginal).collect();
    for (p, w) in fitted.iter_mut().zip(normalize_log_weights(&logs)) {
        p.weight = w;
    }
    Ok(HyperProfile { points: fitted, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::data::FitData;
    use crate::spatial::{MarkedPointPattern, Point, RasterGrid};

    fn small() -> (FitData, ModelSpec) {
        let grid = RasterGrid::new(0.0, 0.0, 4, 4, 1.0).unwrap();
        let pts = (0..25).map(|k| Point::new((k * 7 % 16) as f64 / 4.0, (k * 3 % 16) as f64 / 4.0)).collect();
        let data = FitData::new(grid, vec![], &[MarkedPointPattern::new(1, pts)], vec![vec![]]).unwrap();
        (data, ModelSpec::new("s", vec![], vec![], vec![1]))
    }

    #[test]
    fn product_order_and_size() {
        let g = HyperGrid::product(&[vec![1.0, 2.0]], &[vec![5.0]], &[vec![0.5, 1.0, 2.0]]).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.points()[1].tau, vec![1.0]);
        assert_eq!(g.points()[3].sigma, vec![2.0]);
        assert!(HyperGrid::product(&[vec![]], &[vec![1.0]], &[]).is_err());
        assert!(HyperGrid::new(vec![]).is_err());
    }

    #[test]
    fn default_grid_brackets_prior_medians() {
        let spec = ModelSpec::new("d", vec![], vec![], vec![1]);
        let g = HyperGrid::default_for(&spec).unwrap();
        assert_eq!(g.len(), 25);
        let med = spec.priors.pc[0].rho_median();
        assert!(g.points().iter().any(|p| (p.rho[0] - med).abs() < 1e-12));
    }

    #[test]
    fn single_and_duplicated_points() {
        let (data, spec) = small();
        let model = ThinnedLgcp::new(&data, &spec).unwrap();
        let h = HyperPoint { sigma: vec![0.4], rho: vec![2.0], tau: vec![] };
        let one = profile_hyperparams(&model, &HyperGrid::new(vec![h.clone()]).unwrap(), &Tolerances::default()).unwrap();
        assert_eq!(one.points[0].weight, 1.0);
        let two = profile_hyperparams(&model, &HyperGrid::new(vec![h.clone(), h]).unwrap(), &Tolerances::default()).unwrap();
        assert!((two.points[0].weight - 0.5).abs() < 1e-9);
        assert!((two.points[1].weight - 0.5).abs() < 1e-9);
    }

    #[test]
    fn weights_normalize() {
        let w = normalize_log_weights(&[-1000.0, -1001.0, -2000.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[0] / w[1] - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn all_failures_are_aggregated() {
        let (data, spec) = small();
        let model = ThinnedLgcp::new(&data, &spec).unwrap();
        let h = HyperPoint { sigma: vec![0.4], rho: vec![2.0], tau: vec![] };
        let tol = Tolerances { max_iter: 0, grad_tol: 0.0, ..Default::default() };
        let err = profile_hyperparams(&model, &HyperGrid::new(vec![h]).unwrap(), &tol).unwrap_err();
        assert!(matches!(err, Error::ProfileFailed { .. }));
    }
}
