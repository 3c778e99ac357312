//! Detection covariates and the half-normal detection function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{MarkedPointPattern, RasterLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `z = 1 − v`, for marks in [0, 1].
    ComplementToOne,
    /// `z = 1 / v`, for marks ≥ 1.
    Reciprocal,
    Identity,
}

impl TransformKind {
    pub fn apply(self, v: f64) -> Option<f64> {
        match self {
            TransformKind::ComplementToOne => (0.0..=1.0).contains(&v).then(|| 1.0 - v),
            TransformKind::Reciprocal => (v >= 1.0).then(|| 1.0 / v),
            TransformKind::Identity => v.is_finite().then_some(v),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::ComplementToOne => "complement_to_one",
            TransformKind::Reciprocal => "reciprocal",
            TransformKind::Identity => "identity",
        }
    }
}

/// One thinning covariate: a point mark and the transform turning it into `z`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionComponent {
    pub mark: String,
    pub transform: TransformKind,
}

impl DetectionComponent {
    pub fn new(mark: &str, transform: TransformKind) -> Self {
        Self {
            mark: mark.to_string(),
            transform,
        }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.mark, self.transform.name())
    }
}

/// `K` detection components with their half-normal scales. `K = 0` means no
/// thinning.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCovariateSpec {
    pub components: Vec<DetectionComponent>,
    pub taus: Vec<f64>,
}

impl DetectionCovariateSpec {
    pub fn new(components: Vec<DetectionComponent>, taus: Vec<f64>) -> Result<Self> {
        if components.len() != taus.len() {
            return Err(Error::Shape(format!("{} components but {} scales", components.len(), taus.len())));
        }
        if let Some(t) = taus.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Domain(format!("detection scale must be positive, got {t}")));
        }
        Ok(Self { components, taus })
    }

    pub fn none() -> Self {
        Self {
            components: Vec::new(),
            taus: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }
}

/// Self-inclusive neighbour count within radius `r` for every point.
pub fn local_frequency(pattern: &MarkedPointPattern, r: f64) -> Result<Vec<f64>> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let pts = pattern.points();
    let r2 = r * r;
    let mut counts = vec![0u32; pts.len()];
    for i in 0..pts.len() {
        counts[i] += 1;
        for j in (i + 1)..pts.len() {
            if pts[i].dist2(&pts[j]) <= r2 {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
    }
    Ok(counts.into_iter().map(f64::from).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusSelection {
    pub radius: f64,
    /// Fraction of points with at least one other point within `radius`.
    pub coverage: f64,
    /// Set when no candidate met the target and the largest was returned.
    pub fallback: bool,
}

fn nearest_neighbour_distances(pattern: &MarkedPointPattern) -> Vec<f64> {
    let pts = pattern.points();
    (0..pts.len())
        .map(|i| {
            (0..pts.len())
                .filter(|&j| j != i)
                .map(|j| pts[i].dist2(&pts[j]))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect()
}

fn select_from_nn(nn: &[f64], candidates: &[f64], coverage_target: f64) -> Result<RadiusSelection> {
    if candidates.is_empty() || candidates.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("candidate radii must be non-empty and strictly ascending".into()));
    }
    if !(coverage_target > 0.0 && coverage_target < 1.0) {
        return Err(Error::Domain(format!("coverage target must lie in (0, 1), got {coverage_target}")));
    }
    let coverage = |r: f64| nn.iter().filter(|&&d| d <= r).count() as f64 / nn.len() as f64;
    for &r in candidates {
        let c = coverage(r);
        if c >= coverage_target {
            return Ok(RadiusSelection { radius: r, coverage: c, fallback: false });
        }
    }
    let r = *candidates.last().unwrap();
    Ok(RadiusSelection { radius: r, coverage: coverage(r), fallback: true })
}

/// Smallest candidate radius at which the share of points having another
/// point within reach meets `coverage_target`.
pub fn select_radius(pattern: &MarkedPointPattern, candidates: &[f64], coverage_target: f64) -> Result<RadiusSelection> {
    select_radius_pooled(std::slice::from_ref(pattern), candidates, coverage_target)
}

/// [`select_radius`] with the coverage pooled over several campaigns;
/// neighbours are only sought within a campaign.
pub fn select_radius_pooled(patterns: &[MarkedPointPattern], candidates: &[f64], coverage_target: f64) -> Result<RadiusSelection> {
    let n: usize = patterns.iter().map(MarkedPointPattern::len).sum();
    if n < 2 {
        return Err(Error::EmptyPattern("radius selection needs at least two points".into()));
    }
    let nn: Vec<f64> = patterns.iter().flat_map(nearest_neighbour_distances).collect();
    select_from_nn(&nn, candidates, coverage_target)
}

/// 0.25 m steps from 0.25 to 5.
pub fn default_candidate_radii() -> Vec<f64> {
    (1..=20).map(|k| 0.25 * k as f64).collect()
}

pub fn transform_covariate(values: &[f64], kind: TransformKind) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            kind.apply(v)
                .ok_or_else(|| Error::validation(Some(i), format!("{} undefined for {v}", kind.name())))
        })
        .collect()
}

/// `log p = −Σ z_k² / (2τ_k²)`.
pub fn log_detection_prob(z: &[f64], taus: &[f64]) -> Result<f64> {
    if z.len() != taus.len() {
        return Err(Error::Shape(format!("{} covariates but {} scales", z.len(), taus.len())));
    }
    Ok(z.iter().zip(taus).map(|(z, t)| -z * z / (2.0 * t * t)).sum())
}

pub fn detection_prob(z: &[f64], taus: &[f64]) -> Result<f64> {
    Ok(log_detection_prob(z, taus)?.exp())
}

/// Cell-wise detection probability from `K` covariate layers.
pub fn detection_field(z_layers: &[RasterLayer], taus: &[f64], grid: &crate::spatial::RasterGrid) -> Result<RasterLayer> {
    if z_layers.len() != taus.len() {
        return Err(Error::Shape(format!("{} layers but {} scales", z_layers.len(), taus.len())));
    }
    for layer in z_layers {
        layer.grid().ensure_same(grid)?;
        if layer.has_nodata() {
            return Err(Error::validation(None, "detection covariate layers must not contain nodata"));
        }
    }
    let mut z = vec![0.0; z_layers.len()];
    let values = (0..grid.n_cells())
        .map(|i| {
            for (k, layer) in z_layers.iter().enumerate() {
                z[k] = layer.values()[i];
            }
            detection_prob(&z, taus)
        })
        .collect::<Result<Vec<f64>>>()?;
    RasterLayer::from_values(*grid, values)
}
