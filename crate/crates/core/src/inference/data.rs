use std::collections::BTreeMap;

use crate::detection::{local_frequency, transform_covariate, DetectionComponent};
use crate::error::{Error, Result};
use crate::spatial::{rasterize_marks, MarkedPointPattern, RasterGrid, RasterLayer, LOCAL_FREQUENCY};

use super::model::ModelSpec;

/// One campaign restricted to the active cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignData {
    pub campaign: u32,
    /// Point count per active cell.
    pub counts: Vec<f64>,
    /// Detection covariate `z_k` per active cell, one vector per component.
    pub z: Vec<Vec<f64>>,
}

impl CampaignData {
    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

/// Gridded data as seen by the likelihood. Cells where any intensity
/// covariate is nodata are inactive and excluded everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct FitData {
    pub grid: RasterGrid,
    /// Grid indices of the active cells, ascending.
    pub active: Vec<usize>,
    pub covariate_names: Vec<String>,
    /// Covariate `j` over the active cells.
    pub covariates: Vec<Vec<f64>>,
    pub campaigns: Vec<CampaignData>,
    /// Points that fell into inactive cells and were ignored.
    pub dropped_points: usize,
}

impl FitData {
    /// Builds the data from patterns and detection-covariate layers
    /// (`z_layers[t][k]`, already on the `z` scale).
    pub fn new(
        grid: RasterGrid,
        covariates: Vec<(String, RasterLayer)>,
        patterns: &[MarkedPointPattern],
        z_layers: Vec<Vec<RasterLayer>>,
    ) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::EmptyPattern("no campaigns supplied".into()));
        }
        if z_layers.len() != patterns.len() {
            return Err(Error::Shape(format!(
                "{} detection layer sets for {} campaigns",
                z_layers.len(),
                patterns.len()
            )));
        }
        let k = z_layers[0].len();
        if z_layers.iter().any(|z| z.len() != k) {
            return Err(Error::Shape("campaigns disagree on the number of detection layers".into()));
        }
        for (_, layer) in &covariates {
            layer.grid().ensure_same(&grid)?;
        }
        for layer in z_layers.iter().flatten() {
            layer.grid().ensure_same(&grid)?;
        }
        let active: Vec<usize> = (0..grid.n_cells())
            .filter(|&i| covariates.iter().all(|(_, c)| !c.is_nodata(i)))
            .collect();
        if active.is_empty() {
            return Err(Error::validation(None, "no cell has every covariate defined"));
        }
        let mut position = vec![usize::MAX; grid.n_cells()];
        for (k, &c) in active.iter().enumerate() {
            position[c] = k;
        }

        let mut dropped_points = 0;
        let mut campaigns = Vec::with_capacity(patterns.len());
        for (pattern, zs) in patterns.iter().zip(&z_layers) {
            let mut counts = vec![0.0; active.len()];
            for cell in pattern.cell_indices(&grid)? {
                match position[cell] {
                    usize::MAX => dropped_points += 1,
                    k => counts[k] += 1.0,
                }
            }
            let z = zs
                .iter()
                .map(|layer| {
                    active
                        .iter()
                        .map(|&c| {
                            layer.value(c).ok_or_else(|| {
                                Error::validation(None, format!("detection covariate missing in active cell {c}"))
                            })
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            campaigns.push(CampaignData {
                campaign: pattern.campaign,
                counts,
                z,
            });
        }
        let (covariate_names, covariates): (Vec<String>, Vec<Vec<f64>>) = covariates
            .into_iter()
            .map(|(name, layer)| {
                let v = active.iter().map(|&c| layer.values()[c]).collect();
                (name, v)
            })
            .unzip();
        Ok(Self {
            grid,
            active,
            covariate_names,
            covariates,
            campaigns,
            dropped_points,
        })
    }

    /// Builds the data for `spec` from a covariate library and marked
    /// patterns. Detection covariates are transformed per point and then
    /// rasterized; `lf_radius` is needed when a component uses the local
    /// frequency mark, which is computed here.
    pub fn for_model(
        spec: &ModelSpec,
        grid: RasterGrid,
        library: &BTreeMap<String, RasterLayer>,
        patterns: &[MarkedPointPattern],
        lf_radius: Option<f64>,
    ) -> Result<Self> {
        let covariates = spec
            .covariates
            .iter()
            .map(|name| {
                library
                    .get(name)
                    .cloned()
                    .map(|l| (name.clone(), l))
                    .ok_or_else(|| Error::Config(format!("model '{}': covariate '{name}' has no raster", spec.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let z_layers = patterns
            .iter()
            .map(|p| detection_layers(p, &spec.detection, &grid, lf_radius))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, covariates, patterns, z_layers)
    }

    pub fn n_cells(&self) -> usize {
        self.active.len()
    }

    pub fn n_campaigns(&self) -> usize {
        self.campaigns.len()
    }

    pub fn cell_area(&self) -> f64 {
        self.grid.cell_area()
    }

    /// Total area of the active cells.
    pub fn active_area(&self) -> f64 {
        self.n_cells() as f64 * self.cell_area()
    }

    pub fn n_detection(&self) -> usize {
        self.campaigns.first().map_or(0, |c| c.z.len())
    }
}

/// `z` layers of one campaign. An empty campaign carries no information on
/// its marks and gets `z ≡ 0`.
fn detection_layers(
    pattern: &MarkedPointPattern,
    components: &[DetectionComponent],
    grid: &RasterGrid,
    lf_radius: Option<f64>,
) -> Result<Vec<RasterLayer>> {
    components
        .iter()
        .map(|c| {
            if pattern.is_empty() {
                return RasterLayer::constant(*grid, 0.0);
            }
            let marks = if c.mark == LOCAL_FREQUENCY && pattern.mark(LOCAL_FREQUENCY).is_none() {
                let r = lf_radius.ok_or_else(|| {
                    Error::Config(format!("component '{}' needs a local-frequency radius", c.label()))
                })?;
                local_frequency(pattern, r)?
            } else {
                pattern
                    .mark(&c.mark)
                    .ok_or_else(|| {
                        Error::validation(None, format!("mark '{}' missing from campaign {}", c.mark, pattern.campaign))
                    })?
                    .to_vec()
            };
            let z = transform_covariate(&marks, c.transform)?;
            let mut tmp = MarkedPointPattern::new(pattern.campaign, pattern.points().to_vec());
            let name = format!("z:{}", c.label());
            tmp.set_mark(&name, z)?;
            rasterize_marks(&tmp, &name, grid)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::TransformKind;
    use crate::spatial::{Point, CONFIDENCE};

    fn grid() -> RasterGrid {
        RasterGrid::new(0.0, 0.0, 3, 2, 1.0).unwrap()
    }

    #[test]
    fn counts_and_dropped_points() {
        let g = grid();
        let mut vals = vec![1.0; 6];
        vals[5] = 0.0;
        let mut mask = vec![false; 6];
        mask[5] = true;
        let cov = RasterLayer::new(g, vals, mask).unwrap();
        let pts = vec![Point::new(0.5, 0.5), Point::new(0.6, 0.4), Point::new(2.5, 1.5), Point::new(1.5, 1.5)];
        let p = MarkedPointPattern::new(1, pts);
        let d = FitData::new(g, vec![("x".into(), cov)], &[p], vec![vec![]]).unwrap();
        assert_eq!(d.active, vec![0, 1, 2, 3, 4]);
        assert_eq!(d.campaigns[0].counts, vec![2.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(d.dropped_points, 1);
        assert_eq!(d.active_area(), 5.0);
    }

    #[test]
    fn model_data_transforms_marks() {
        let g = grid();
        let mut p = MarkedPointPattern::new(1, vec![Point::new(0.5, 0.5), Point::new(2.5, 1.5)]);
        p.set_mark(CONFIDENCE, vec![0.9, 0.3]).unwrap();
        let spec = ModelSpec::new(
            "m",
            vec![],
            vec![DetectionComponent::new(CONFIDENCE, TransformKind::ComplementToOne)],
            vec![0],
        );
        let d = FitData::for_model(&spec, g, &BTreeMap::new(), &[p.clone()], None).unwrap();
        let z = &d.campaigns[0].z[0];
        assert!((z[0] - 0.1).abs() < 1e-12 && (z[5] - 0.7).abs() < 1e-12);

        let spec = ModelSpec::new("m", vec!["slope".into()], vec![], vec![0]);
        let err = FitData::for_model(&spec, g, &BTreeMap::new(), &[p], None).unwrap_err();
        assert!(err.to_string().contains("slope"));
    }
}
