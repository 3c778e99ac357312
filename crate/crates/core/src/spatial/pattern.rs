use std::collections::BTreeMap;

use super::grid::{CountRaster, RasterGrid, RasterLayer};
use crate::error::{Error, Result};

pub const CONFIDENCE: &str = "confidence";
pub const DIAG: &str = "diag";
pub const LOCAL_FREQUENCY: &str = "local_frequency";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Point locations of one campaign with per-point named marks.
///
/// Every mark column has one value per point.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkedPointPattern {
    pub campaign: u32,
    points: Vec<Point>,
    marks: BTreeMap<String, Vec<f64>>,
}

impl MarkedPointPattern {
    pub fn new(campaign: u32, points: Vec<Point>) -> Self {
        Self {
            campaign,
            points,
            marks: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn marks(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.marks
    }

    pub fn mark(&self, name: &str) -> Option<&[f64]> {
        self.marks.get(name).map(Vec::as_slice)
    }

    /// Sets a mark column, validating the bounds of the known detector marks.
    pub fn set_mark(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.points.len() {
            return Err(Error::Shape(format!(
                "mark '{name}' has {} values for {} points",
                values.len(),
                self.points.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            let ok = match name {
                CONFIDENCE | DIAG => (0.0..=1.0).contains(&v),
                LOCAL_FREQUENCY => v >= 1.0,
                _ => v.is_finite(),
            };
            if !ok {
                return Err(Error::validation(
                    Some(i),
                    format!("mark '{name}' value {v} out of range"),
                ));
            }
        }
        self.marks.insert(name.to_string(), values);
        Ok(())
    }

    /// Keeps the points whose flag is set, carrying marks along.
    pub fn retain_mask(&self, keep: &[bool]) -> Self {
        debug_assert_eq!(keep.len(), self.points.len());
        let pick = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(keep).filter(|(_, &k)| k).map(|(&x, _)| x).collect()
        };
        Self {
            campaign: self.campaign,
            points: self
                .points
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&p, _)| p)
                .collect(),
            marks: self.marks.iter().map(|(k, v)| (k.clone(), pick(v))).collect(),
        }
    }

    /// Attaches a mark by looking up each point's cell in `layer`.
    pub fn attach_mark_from_layer(&mut self, name: &str, layer: &RasterLayer) -> Result<()> {
        let grid = layer.grid();
        let mut values = Vec::with_capacity(self.len());
        for (index, p) in self.points.iter().enumerate() {
            let cell = grid.locate(p.x, p.y).ok_or(Error::OutOfDomain { index, x: p.x, y: p.y })?;
            let v = layer
                .value(cell)
                .ok_or_else(|| Error::validation(Some(index), format!("point falls in nodata cell {cell}")))?;
            values.push(v);
        }
        self.set_mark(name, values)
    }

    pub fn cell_indices(&self, grid: &RasterGrid) -> Result<Vec<usize>> {
        self.points
            .iter()
            .enumerate()
            .map(|(index, p)| grid.locate(p.x, p.y).ok_or(Error::OutOfDomain { index, x: p.x, y: p.y }))
            .collect()
    }
}

/// Number of points per grid cell.
pub fn cell_counts(pattern: &MarkedPointPattern, grid: &RasterGrid) -> Result<CountRaster> {
    let mut counts = vec![0u32; grid.n_cells()];
    for cell in pattern.cell_indices(grid)? {
        counts[cell] += 1;
    }
    Ok(CountRaster { grid: *grid, counts })
}

/// Rasterizes a mark: cell mean where points exist, nearest non-empty cell
/// center elsewhere (ties to the lowest cell index).
pub fn rasterize_marks(pattern: &MarkedPointPattern, mark_name: &str, grid: &RasterGrid) -> Result<RasterLayer> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern(format!(
            "campaign {} has no points to rasterize '{mark_name}' from",
            pattern.campaign
        )));
    }
    let marks = pattern
        .mark(mark_name)
        .ok_or_else(|| Error::validation(None, format!("mark '{mark_name}' missing from campaign {}", pattern.campaign)))?;
    let cells = pattern.cell_indices(grid)?;

    let n = grid.n_cells();
    let mut sum = vec![0.0; n];
    let mut count = vec![0u32; n];
    for (&cell, &v) in cells.iter().zip(marks) {
        sum[cell] += v;
        count[cell] += 1;
    }
    let sources: Vec<usize> = (0..n).filter(|&i| count[i] > 0).collect();
    let mut values = vec![0.0; n];
    for &i in &sources {
        values[i] = sum[i] / f64::from(count[i]);
    }
    for i in 0..n {
        if count[i] > 0 {
            continue;
        }
        let (x, y) = grid.center(i);
        let mut best = (f64::INFINITY, usize::MAX);
        // sources are ascending, so strict comparison keeps the lowest index on ties
        for &s in &sources {
            let (sx, sy) = grid.center(s);
            let d2 = (sx - x).powi(2) + (sy - y).powi(2);
            if d2 < best.0 {
                best = (d2, s);
            }
        }
        values[i] = values[best.1];
    }
    RasterLayer::from_values(*grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(nc: usize, nr: usize) -> RasterGrid {
        RasterGrid::new(0.0, 0.0, nc, nr, 1.0).unwrap()
    }

    fn pattern(points: &[(f64, f64)]) -> MarkedPointPattern {
        MarkedPointPattern::new(1, points.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    #[test]
    fn counts_empty_and_single_cell() {
        let g = grid(2, 2);
        assert_eq!(cell_counts(&pattern(&[]), &g).unwrap().counts, vec![0; 4]);
        let p = pattern(&[(0.1, 0.1), (0.5, 0.5), (0.9, 0.2)]);
        assert_eq!(cell_counts(&p, &g).unwrap().counts, vec![3, 0, 0, 0]);
    }

    #[test]
    fn counts_internal_boundary_goes_right() {
        let g = grid(2, 2);
        let c = cell_counts(&pattern(&[(1.0, 0.5)]), &g).unwrap();
        assert_eq!(c.counts, vec![0, 1, 0, 0]);
    }

    #[test]
    fn counts_out_of_domain_names_point() {
        let g = grid(2, 2);
        let err = cell_counts(&pattern(&[(0.5, 0.5), (3.0, 0.5)]), &g).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { index: 1, .. }));
    }

    #[test]
    fn rasterize_mean_in_cell() {
        let g = grid(2, 2);
        let mut p = pattern(&[(0.2, 0.2), (0.7, 0.7)]);
        p.set_mark(CONFIDENCE, vec![0.4, 0.6]).unwrap();
        let layer = rasterize_marks(&p, CONFIDENCE, &g).unwrap();
        assert!((layer.values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rasterize_single_point_fills_everything() {
        let g = grid(4, 3);
        let mut p = pattern(&[(2.5, 1.5)]);
        p.set_mark(DIAG, vec![0.3]).unwrap();
        let layer = rasterize_marks(&p, DIAG, &g).unwrap();
        assert!(layer.values().iter().all(|&v| v == 0.3));
        assert!(!layer.has_nodata());
    }

    #[test]
    fn rasterize_one_point_per_cell() {
        let g = grid(2, 1);
        let mut p = pattern(&[(0.5, 0.5), (1.5, 0.5)]);
        p.set_mark(CONFIDENCE, vec![0.2, 0.8]).unwrap();
        let layer = rasterize_marks(&p, CONFIDENCE, &g).unwrap();
        assert_eq!(layer.values(), &[0.2, 0.8]);
    }

    #[test]
    fn rasterize_tie_breaks_to_lowest_index() {
        // cell 1 is equidistant from cells 0 and 2
        let g = grid(3, 1);
        let mut p = pattern(&[(0.5, 0.5), (2.5, 0.5)]);
        p.set_mark(CONFIDENCE, vec![0.1, 0.9]).unwrap();
        let layer = rasterize_marks(&p, CONFIDENCE, &g).unwrap();
        assert_eq!(layer.values(), &[0.1, 0.1, 0.9]);
    }

    #[test]
    fn rasterize_empty_pattern_errors() {
        let g = grid(2, 2);
        let p = pattern(&[]);
        assert!(matches!(rasterize_marks(&p, CONFIDENCE, &g), Err(Error::EmptyPattern(_))));
    }

    #[test]
    fn mark_bounds_checked() {
        let mut p = pattern(&[(0.5, 0.5)]);
        assert!(p.set_mark(CONFIDENCE, vec![1.3]).is_err());
        assert!(p.set_mark(LOCAL_FREQUENCY, vec![0.0]).is_err());
        assert!(p.set_mark(DIAG, vec![1.0]).is_ok());
    }

    proptest! {
        #[test]
        fn counts_partition_the_pattern(
            pts in proptest::collection::vec((0.0f64..=5.0, 0.0f64..=3.0), 0..200)
        ) {
            let g = RasterGrid::new(0.0, 0.0, 5, 3, 1.0).unwrap();
            let c = cell_counts(&pattern(&pts), &g).unwrap();
            prop_assert_eq!(c.total(), pts.len() as u64);
        }

        #[test]
        fn rasterize_is_order_invariant_and_idempotent(
            pts in proptest::collection::vec((0.0f64..4.0, 0.0f64..4.0, 0.0f64..=1.0), 1..40),
            seed in any::<u64>()
        ) {
            let g = grid(4, 4);
            let mut p = pattern(&pts.iter().map(|&(x, y, _)| (x, y)).collect::<Vec<_>>());
            p.set_mark(CONFIDENCE, pts.iter().map(|t| t.2).collect()).unwrap();
            let a = rasterize_marks(&p, CONFIDENCE, &g).unwrap();
            let b = rasterize_marks(&p, CONFIDENCE, &g).unwrap();
            prop_assert_eq!(&a, &b);

            // reversed order: identical up to summation rounding
            let mut idx: Vec<usize> = (0..pts.len()).collect();
            idx.rotate_left((seed as usize) % pts.len());
            idx.reverse();
            let mut q = pattern(&idx.iter().map(|&i| (pts[i].0, pts[i].1)).collect::<Vec<_>>());
            q.set_mark(CONFIDENCE, idx.iter().map(|&i| pts[i].2).collect()).unwrap();
            let c = rasterize_marks(&q, CONFIDENCE, &g).unwrap();
            for (u, v) in a.values().iter().zip(c.values()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
