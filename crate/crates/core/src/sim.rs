//! Grid-level simulation of the potential LGCP and its thinned observation.
//!
//! Counts are Poisson per cell with locations uniform inside the cell, which
//! is the same discretization the likelihood uses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Poisson};

use crate::detection::DetectionComponent;
use crate::error::{Error, Result};
use crate::gp::{sample_gp_cells, GpHyper};
use crate::spatial::{MarkedPointPattern, Point, RasterGrid, RasterLayer};
use crate::util::derive_seed;

const SEED_GP: u64 = 1;
const SEED_PATTERN: u64 = 2;
const SEED_THIN: u64 = 3;

/// A detection component of the simulator: the raw mark field per campaign
/// (e.g. confidence scores) and the true half-normal scale.
#[derive(Debug, Clone)]
pub struct SimDetection {
    pub component: DetectionComponent,
    pub tau: f64,
    pub mark_layers: Vec<RasterLayer>,
}

#[derive(Debug, Clone)]
pub struct SimScenario {
    pub grid: RasterGrid,
    /// Campaign intercepts μ_t; campaign `t` is `intercepts[t - 1]`.
    pub intercepts: Vec<f64>,
    pub beta: Vec<f64>,
    pub covariates: Vec<RasterLayer>,
    /// GP group of each campaign, 1-based.
    pub groups: Vec<usize>,
    /// GP hyperparameters of group `l` at `gp[l - 1]`.
    pub gp: Vec<GpHyper>,
    pub detection: Vec<SimDetection>,
    pub seed: u64,
}

/// Everything drawn for one scenario.
#[derive(Debug, Clone)]
pub struct Realization {
    pub gp_fields: Vec<RasterLayer>,
    pub potential: Vec<RasterLayer>,
    pub detection: Vec<RasterLayer>,
    pub true_patterns: Vec<MarkedPointPattern>,
    pub observed_patterns: Vec<MarkedPointPattern>,
}

impl SimScenario {
    pub fn n_campaigns(&self) -> usize {
        self.intercepts.len()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.n_campaigns();
        if t == 0 {
            return Err(Error::Config("scenario needs at least one campaign".into()));
        }
        if self.groups.len() != t {
            return Err(Error::Config(format!("grouping map covers {} of {t} campaigns", self.groups.len())));
        }
        if let Some(&g) = self.groups.iter().find(|&&g| g == 0 || g > self.gp.len()) {
            return Err(Error::Config(format!("group {g} has no GP hyperparameters")));
        }
        if self.covariates.len() != self.beta.len() {
            return Err(Error::Config(format!(
                "{} covariate layers for {} coefficients",
                self.covariates.len(),
                self.beta.len()
            )));
        }
        for layer in &self.covariates {
            layer.grid().ensure_same(&self.grid)?;
        }
        for d in &self.detection {
            if !(d.tau > 0.0) {
                return Err(Error::Config(format!("detection scale for '{}' must be positive", d.component.mark)));
            }
            if d.mark_layers.len() != t {
                return Err(Error::Config(format!(
                    "detection mark '{}' needs one layer per campaign",
                    d.component.mark
                )));
            }
            for layer in &d.mark_layers {
                layer.grid().ensure_same(&self.grid)?;
            }
        }
        Ok(())
    }

    /// Cells where every covariate is defined.
    pub fn active_cells(&self) -> Vec<usize> {
        (0..self.grid.n_cells())
            .filter(|&i| self.covariates.iter().all(|c| !c.is_nodata(i)))
            .collect()
    }

    /// One field per GP group, shared by all campaigns in the group.
    pub fn gp_fields(&self) -> Result<Vec<RasterLayer>> {
        let cells = self.active_cells();
        self.gp
            .iter()
            .enumerate()
            .map(|(l, h)| sample_gp_cells(&self.grid, &cells, h, derive_seed(self.seed, SEED_GP, l as u64), h.default_jitter()))
            .collect()
    }

    fn potential_from_fields(&self, campaign: usize, fields: &[RasterLayer]) -> Result<RasterLayer> {
        let w = &fields[self.groups[campaign - 1] - 1];
        let mu = self.intercepts[campaign - 1];
        let n = self.grid.n_cells();
        let mut values = vec![0.0; n];
        let mut nodata = vec![true; n];
        for i in self.active_cells() {
            let eta = mu
                + self
                    .covariates
                    .iter()
                    .zip(&self.beta)
                    .map(|(x, b)| x.values()[i] * b)
                    .sum::<f64>()
                + w.values()[i];
            let lambda = eta.exp();
            if !lambda.is_finite() {
                return Err(Error::Numerical(format!("potential intensity overflows in cell {i} (log-intensity {eta})")));
            }
            values[i] = lambda;
            nodata[i] = false;
        }
        RasterLayer::new(self.grid, values, nodata)
    }

    /// Detection probability field for a campaign (1-based).
    pub fn detection_probability(&self, campaign: usize) -> Result<RasterLayer> {
        let n = self.grid.n_cells();
        let mut values = vec![1.0; n];
        for d in &self.detection {
            let layer = &d.mark_layers[campaign - 1];
            for (i, v) in values.iter_mut().enumerate() {
                let Some(mark) = layer.value(i) else { continue };
                let z = d.component.transform.apply(mark).ok_or_else(|| {
                    Error::validation(None, format!("mark '{}' = {mark} invalid for its transform in cell {i}", d.component.mark))
                })?;
                *v *= (-z * z / (2.0 * d.tau * d.tau)).exp();
            }
        }
        RasterLayer::from_values(self.grid, values)
    }

    pub fn realize(&self) -> Result<Realization> {
        self.validate()?;
        let gp_fields = self.gp_fields()?;
        let mut potential = Vec::new();
        let mut detection = Vec::new();
        let mut true_patterns = Vec::new();
        let mut observed_patterns = Vec::new();
        for t in 1..=self.n_campaigns() {
            let lambda = self.potential_from_fields(t, &gp_fields)?;
            let p = self.detection_probability(t)?;
            let mut pattern = simulate_pattern(&lambda, t as u32, derive_seed(self.seed, SEED_PATTERN, t as u64))?;
            for d in &self.detection {
                pattern.attach_mark_from_layer(&d.component.mark, &d.mark_layers[t - 1])?;
            }
            let observed = thin_pattern(&pattern, &p, derive_seed(self.seed, SEED_THIN, t as u64))?;
            potential.push(lambda);
            detection.push(p);
            true_patterns.push(pattern);
            observed_patterns.push(observed);
        }
        Ok(Realization {
            gp_fields,
            potential,
            detection,
            true_patterns,
            observed_patterns,
        })
    }
}

/// Potential intensity `exp(μ_t + xᵀβ + w_l)` of campaign `t` (1-based).
pub fn potential_intensity(scenario: &SimScenario, campaign: usize) -> Result<RasterLayer> {
    scenario.validate()?;
    if campaign == 0 || campaign > scenario.n_campaigns() {
        return Err(Error::Domain(format!("campaign {campaign} outside 1..={}", scenario.n_campaigns())));
    }
    let fields = scenario.gp_fields()?;
    scenario.potential_from_fields(campaign, &fields)
}

/// Poisson counts per cell, uniform locations inside each cell. Masked cells
/// receive no points.
pub fn simulate_pattern(lambda: &RasterLayer, campaign: u32, seed: u64) -> Result<MarkedPointPattern> {
    let grid = lambda.grid();
    let area = grid.cell_area();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for i in 0..grid.n_cells() {
        let Some(l) = lambda.value(i) else { continue };
        let mean = l * area;
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(Error::Numerical(format!("invalid intensity {l} in cell {i}")));
        }
        if mean == 0.0 {
            continue;
        }
        let count = Poisson::new(mean)
            .map_err(|e| Error::Numerical(format!("Poisson mean {mean} in cell {i}: {e}")))?
            .sample(&mut rng) as u64;
        let (col, row) = grid.col_row(i);
        let x0 = grid.origin_x + col as f64 * grid.cell_size;
        let y0 = grid.origin_y + row as f64 * grid.cell_size;
        for _ in 0..count {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            points.push(Point::new(x0 + u * grid.cell_size, y0 + v * grid.cell_size));
        }
    }
    Ok(MarkedPointPattern::new(campaign, points))
}

/// Retains each point independently with the probability of its cell.
pub fn thin_pattern(pattern: &MarkedPointPattern, p_field: &RasterLayer, seed: u64) -> Result<MarkedPointPattern> {
    let grid = p_field.grid();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut keep = Vec::with_capacity(pattern.len());
    for (index, cell) in pattern.cell_indices(grid)?.into_iter().enumerate() {
        let p = p_field.value(cell).unwrap_or(0.0);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(Some(index), format!("detection probability {p} outside [0, 1]")));
        }
        let u: f64 = rng.random();
        keep.push(u < p);
    }
    Ok(pattern.retain_mask(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::TransformKind;
    use crate::spatial::cell_counts;

    fn unit_grid(n: usize) -> RasterGrid {
        RasterGrid::new(0.0, 0.0, n, n, 1.0 / n as f64).unwrap()
    }

    fn flat_scenario(mu: f64) -> SimScenario {
        let grid = RasterGrid::new(0.0, 0.0, 4, 4, 1.0).unwrap();
        SimScenario {
            grid,
            intercepts: vec![mu, mu],
            beta: vec![],
            covariates: vec![],
            groups: vec![1, 1],
            gp: vec![GpHyper::new(1e-8, 2.0, 1).unwrap()],
            detection: vec![],
            seed: 3,
        }
    }

    #[test]
    fn homogeneous_limit() {
        let s = flat_scenario(3f64.ln());
        let l = potential_intensity(&s, 1).unwrap();
        assert!(l.values().iter().all(|v| (v - 3.0).abs() < 1e-6));
    }

    #[test]
    fn unit_covariate_gives_e() {
        let mut s = flat_scenario(0.0);
        s.beta = vec![1.0];
        s.covariates = vec![RasterLayer::constant(s.grid, 1.0).unwrap()];
        let l = potential_intensity(&s, 2).unwrap();
        assert!(l.values().iter().all(|v| (v - std::f64::consts::E).abs() < 1e-6));
    }

    #[test]
    fn grouped_campaigns_share_the_field() {
        let mut s = flat_scenario(0.0);
        s.intercepts = vec![0.0, 0.0, 0.0];
        s.groups = vec![1, 1, 2];
        s.gp = vec![GpHyper::new(1.0, 2.0, 1).unwrap(), GpHyper::new(1.0, 2.0, 2).unwrap()];
        let a = potential_intensity(&s, 1).unwrap();
        let b = potential_intensity(&s, 2).unwrap();
        let c = potential_intensity(&s, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn overflow_is_reported() {
        let s = flat_scenario(800.0);
        assert!(matches!(potential_intensity(&s, 1), Err(Error::Numerical(_))));
    }

    #[test]
    fn zero_intensity_is_empty() {
        let g = unit_grid(3);
        let p = simulate_pattern(&RasterLayer::constant(g, 0.0).unwrap(), 1, 1).unwrap();
        assert!(p.is_empty());
    }

    #[test]
    fn simulated_points_stay_in_their_cells() {
        let g = RasterGrid::new(5.0, -2.0, 3, 2, 0.5).unwrap();
        let lambda = RasterLayer::from_fn(g, |x, _| 20.0 * (x - 4.0)).unwrap();
        let p = simulate_pattern(&lambda, 1, 11).unwrap();
        assert!(!p.is_empty());
        assert_eq!(cell_counts(&p, &g).unwrap().total(), p.len() as u64);
        assert_eq!(p, simulate_pattern(&lambda, 1, 11).unwrap());
    }

    #[test]
    fn mean_count_within_three_standard_errors() {
        let g = unit_grid(4);
        let c = 40.0;
        let lambda = RasterLayer::constant(g, c).unwrap();
        let n = 1000;
        let mean = (0..n).map(|s| simulate_pattern(&lambda, 1, s).unwrap().len() as f64).sum::<f64>() / n as f64;
        assert!((mean - c).abs() < 3.0 * (c / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn disjoint_halves_are_uncorrelated() {
        let g = RasterGrid::new(0.0, 0.0, 2, 1, 1.0).unwrap();
        let lambda = RasterLayer::constant(g, 10.0).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for s in 0..1000 {
            let c = cell_counts(&simulate_pattern(&lambda, 1, s).unwrap(), &g).unwrap();
            a.push(f64::from(c.counts[0]));
            b.push(f64::from(c.counts[1]));
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        assert!((cov / (va * vb).sqrt()).abs() < 0.1);
    }

    #[test]
    fn thinning_extremes_and_binomial_band() {
        let g = unit_grid(2);
        let pts: Vec<Point> = (0..1000).map(|i| Point::new((i % 97) as f64 / 97.0, (i % 89) as f64 / 89.0)).collect();
        let pattern = MarkedPointPattern::new(1, pts);
        let ones = RasterLayer::constant(g, 1.0).unwrap();
        let zeros = RasterLayer::constant(g, 0.0).unwrap();
        assert_eq!(thin_pattern(&pattern, &ones, 5).unwrap(), pattern);
        assert!(thin_pattern(&pattern, &zeros, 5).unwrap().is_empty());

        let half = RasterLayer::constant(g, 0.5).unwrap();
        let band = 3.0 * 250f64.sqrt();
        let inside = (0..200)
            .filter(|&s| {
                let n = thin_pattern(&pattern, &half, s).unwrap().len() as f64;
                (n - 500.0).abs() <= band
            })
            .count();
        assert!(inside as f64 >= 0.99 * 200.0, "{inside}");
        assert!(thin_pattern(&pattern, &RasterLayer::constant(g, 1.5).unwrap(), 1).is_err());
    }

    #[test]
    fn realization_is_deterministic_and_marks_survive_thinning() {
        let mut s = flat_scenario(2.0);
        let marks = RasterLayer::from_fn(s.grid, |x, y| ((x + y) / 8.0).min(1.0)).unwrap();
        s.detection = vec![SimDetection {
            component: DetectionComponent::new(crate::spatial::CONFIDENCE, TransformKind::ComplementToOne),
            tau: 0.4,
            mark_layers: vec![marks.clone(), marks],
        }];
        let a = s.realize().unwrap();
        let b = s.realize().unwrap();
        assert_eq!(a.true_patterns, b.true_patterns);
        assert_eq!(a.observed_patterns, b.observed_patterns);
        let obs = &a.observed_patterns[0];
        assert!(obs.len() < a.true_patterns[0].len());
        assert_eq!(obs.mark(crate::spatial::CONFIDENCE).unwrap().len(), obs.len());
    }
}
