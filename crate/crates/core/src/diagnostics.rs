//! Innovation residuals on spatial blocks and their CRPS against zero.
//!
//! Integrals use the midpoint rule on the model grid (cell centers, cell
//! areas), which is exact for the piecewise-constant intensity the
//! likelihood assumes.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::{PosteriorFit, ThinnedLgcp};
use crate::spatial::{CountRaster, RasterGrid, RasterLayer};

/// Axis-aligned blocks tiling the grid extent; each cell belongs to the
/// block containing its center.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    grid: RasterGrid,
    n_rows: usize,
    n_cols: usize,
    block_of: Vec<usize>,
    cells: Vec<Vec<usize>>,
}

impl BlockPartition {
    /// `n_rows × n_cols` equal blocks; block index is `row · n_cols + col`
    /// with row 0 at the south edge.
    pub fn new(grid: RasterGrid, n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Domain(format!("block partition needs positive dimensions, got {n_rows}x{n_cols}")));
        }
        let bw = grid.n_cols as f64 * grid.cell_size / n_cols as f64;
        let bh = grid.n_rows as f64 * grid.cell_size / n_rows as f64;
        let mut cells = vec![Vec::new(); n_rows * n_cols];
        let mut block_of = Vec::with_capacity(grid.n_cells());
        for i in 0..grid.n_cells() {
            let (x, y) = grid.center(i);
            let c = (((x - grid.origin_x) / bw).floor() as usize).min(n_cols - 1);
            let r = (((y - grid.origin_y) / bh).floor() as usize).min(n_rows - 1);
            let b = r * n_cols + c;
            block_of.push(b);
            cells[b].push(i);
        }
        Ok(Self { grid, n_rows, n_cols, block_of, cells })
    }

    /// The 18 × 18 default.
    pub fn default_for(grid: RasterGrid) -> Result<Self> {
        Self::new(grid, 18, 18)
    }

    pub fn grid(&self) -> &RasterGrid {
        &self.grid
    }

    pub fn n_blocks(&self) -> usize {
        self.cells.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn block_of(&self, cell: usize) -> usize {
        self.block_of[cell]
    }

    pub fn cells(&self, block: usize) -> &[usize] {
        &self.cells[block]
    }

    /// `(x_min, y_min, x_max, y_max)` of a block.
    pub fn rect(&self, block: usize) -> (f64, f64, f64, f64) {
        let g = &self.grid;
        let bw = g.n_cols as f64 * g.cell_size / self.n_cols as f64;
        let bh = g.n_rows as f64 * g.cell_size / self.n_rows as f64;
        let (r, c) = (block / self.n_cols, block % self.n_cols);
        (
            g.origin_x + c as f64 * bw,
            g.origin_y + r as f64 * bh,
            g.origin_x + (c + 1) as f64 * bw,
            g.origin_y + (r + 1) as f64 * bh,
        )
    }
}

/// `Σ a_i f(c_i)` over the unmasked cells of each block.
pub fn mc_quadrature(field: &RasterLayer, blocks: &BlockPartition) -> Result<Vec<f64>> {
    field.grid().ensure_same(blocks.grid())?;
    let a = field.grid().cell_area();
    Ok((0..blocks.n_blocks())
        .map(|b| blocks.cells(b).iter().filter_map(|&i| field.value(i)).map(|v| a * v).sum())
        .collect())
}

/// Points per block, counting only cells where `lambda` is defined.
fn block_count(counts: &CountRaster, lambda: &RasterLayer, blocks: &BlockPartition, block: usize) -> f64 {
    blocks
        .cells(block)
        .iter()
        .filter(|&&i| !lambda.is_nodata(i))
        .map(|&i| f64::from(counts.counts[i]))
        .sum()
}

/// `N(B) − ∫_B λ`. Points in masked cells are ignored.
pub fn raw_residual(counts: &CountRaster, lambda: &RasterLayer, blocks: &BlockPartition, block: usize) -> Result<f64> {
    lambda.grid().ensure_same(&counts.grid)?;
    lambda.grid().ensure_same(blocks.grid())?;
    let a = lambda.grid().cell_area();
    let integral: f64 = blocks.cells(block).iter().filter_map(|&i| lambda.value(i)).map(|v| a * v).sum();
    Ok(block_count(counts, lambda, blocks, block) - integral)
}

/// `Σ_u 1/√λ(u) − ∫_B √λ`, with λ evaluated in the cell holding `u`.
pub fn pearson_residual(counts: &CountRaster, lambda: &RasterLayer, blocks: &BlockPartition, block: usize) -> Result<f64> {
    lambda.grid().ensure_same(&counts.grid)?;
    lambda.grid().ensure_same(blocks.grid())?;
    let a = lambda.grid().cell_area();
    let mut total = 0.0;
    for &i in blocks.cells(block) {
        let Some(l) = lambda.value(i) else { continue };
        let n = f64::from(counts.counts[i]);
        if n > 0.0 {
            if !(l > 0.0) {
                return Err(Error::DegenerateIntensity { cell: i });
            }
            total += n / l.sqrt();
        }
        total -= a * l.sqrt();
    }
    Ok(total)
}

/// CRPS of the empirical distribution of `samples` at the observation 0:
/// `(1/M) Σ|x_i| − (1/2M²) Σ_ij |x_i − x_j|`.
pub fn crps_at_zero(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Domain("CRPS needs at least one sample".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("CRPS samples must be finite".into()));
    }
    let m = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let abs_mean = sorted.iter().map(|v| v.abs()).sum::<f64>() / m;
    // Σ_ij |x_i − x_j| = 2 Σ_k (2k − M − 1) x_(k) with 1-based k
    let pair: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, v)| (2.0 * (k + 1) as f64 - m - 1.0) * v)
        .sum::<f64>()
        * 2.0;
    Ok((abs_mean - pair / (2.0 * m * m)).max(0.0))
}

/// Residual samples of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockResiduals {
    pub block: usize,
    pub raw: Vec<f64>,
    pub pearson: Vec<f64>,
    pub crps_raw: f64,
    pub crps_pearson: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResiduals {
    pub campaign: u32,
    /// Blocks with at least one active cell.
    pub blocks: Vec<BlockResiduals>,
    pub mean_crps_raw: f64,
    pub mean_crps_pearson: f64,
}

/// Scores intensity samples against observed counts. `cells` are grid
/// indices of the model's active cells; `counts` and every sample of
/// `lambda_samples` are indexed like `cells`.
pub fn score_campaign(
    campaign: u32,
    counts: &[f64],
    cells: &[usize],
    lambda_samples: &[Vec<f64>],
    blocks: &BlockPartition,
) -> Result<CampaignResiduals> {
    if lambda_samples.is_empty() {
        return Err(Error::Domain("residuals need at least one intensity sample".into()));
    }
    let a = blocks.grid().cell_area();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); blocks.n_blocks()];
    for (k, &c) in cells.iter().enumerate() {
        members[blocks.block_of(c)].push(k);
    }
    let used: Vec<usize> = (0..blocks.n_blocks()).filter(|&b| !members[b].is_empty()).collect();
    if used.is_empty() {
        return Err(Error::Domain("no block contains an active cell".into()));
    }

    // one residual pair per (sample, used block)
    let per_sample: Vec<Vec<(f64, f64)>> = lambda_samples
        .par_iter()
        .map(|lambda| {
            used.iter()
                .map(|&b| {
                    let (mut raw, mut pearson) = (0.0, 0.0);
                    for &k in &members[b] {
                        let (n, l) = (counts[k], lambda[k]);
                        if n > 0.0 {
                            if !(l > 0.0) {
                                return Err(Error::DegenerateIntensity { cell: cells[k] });
                            }
                            pearson += n / l.sqrt();
                        }
                        raw += n - a * l;
                        pearson -= a * l.sqrt();
                    }
                    Ok((raw, pearson))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let blocks_out = used
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let raw: Vec<f64> = per_sample.iter().map(|s| s[j].0).collect();
            let pearson: Vec<f64> = per_sample.iter().map(|s| s[j].1).collect();
            Ok(BlockResiduals {
                block: b,
                crps_raw: crps_at_zero(&raw)?,
                crps_pearson: crps_at_zero(&pearson)?,
                raw,
                pearson,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let nb = blocks_out.len() as f64;
    Ok(CampaignResiduals {
        campaign,
        mean_crps_raw: blocks_out.iter().map(|b| b.crps_raw).sum::<f64>() / nb,
        mean_crps_pearson: blocks_out.iter().map(|b| b.crps_pearson).sum::<f64>() / nb,
        blocks: blocks_out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResiduals {
    pub model: String,
    pub thinned: bool,
    pub campaigns: Vec<CampaignResiduals>,
    pub average_raw: f64,
    pub average_pearson: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    Raw,
    Pearson,
}

impl ResidualKind {
    pub fn label(self) -> &'static str {
        match self {
            ResidualKind::Raw => "raw",
            ResidualKind::Pearson => "pearson",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub models: Vec<ModelResiduals>,
}

/// A fitted model to score against the data it was fitted to.
pub struct ScoredModel<'a, 'b> {
    pub model: &'b ThinnedLgcp<'a>,
    pub fit: &'b PosteriorFit,
}

/// Scores every model's posterior samples of `λ* = λ_pot·p` against its
/// own data. Unthinned models have `p ≡ 1` through their empty detection
/// specification.
pub fn residual_crps_table(models: &[ScoredModel], blocks: &BlockPartition) -> Result<ResidualReport> {
    let mut out = Vec::with_capacity(models.len());
    for m in models {
        let data = m.model.data();
        data.grid.ensure_same(blocks.grid())?;
        let intensities = m
            .fit
            .samples
            .iter()
            .map(|s| m.model.observed_intensity(s))
            .collect::<Result<Vec<_>>>()?;
        let mut campaigns = Vec::with_capacity(data.n_campaigns());
        for (t, camp) in data.campaigns.iter().enumerate() {
            let samples: Vec<Vec<f64>> = intensities.iter().map(|s| s[t].clone()).collect();
            campaigns.push(score_campaign(camp.campaign, &camp.counts, &data.active, &samples, blocks)?);
        }
        let nt = campaigns.len() as f64;
        out.push(ModelResiduals {
            model: m.model.spec().name.clone(),
            thinned: m.model.spec().is_thinned(),
            average_raw: campaigns.iter().map(|c| c.mean_crps_raw).sum::<f64>() / nt,
            average_pearson: campaigns.iter().map(|c| c.mean_crps_pearson).sum::<f64>() / nt,
            campaigns,
        });
    }
    Ok(ResidualReport { models: out })
}

impl ModelResiduals {
    pub fn average(&self, kind: ResidualKind) -> f64 {
        match kind {
            ResidualKind::Raw => self.average_raw,
            ResidualKind::Pearson => self.average_pearson,
        }
    }

    pub fn campaign_score(&self, index: usize, kind: ResidualKind) -> f64 {
        let c = &self.campaigns[index];
        match kind {
            ResidualKind::Raw => c.mean_crps_raw,
            ResidualKind::Pearson => c.mean_crps_pearson,
        }
    }
}

impl ResidualReport {
    /// Model indices by ascending average; ties keep input order.
    pub fn ranking(&self, kind: ResidualKind) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.models.len()).collect();
        idx.sort_by(|&a, &b| self.models[a].average(kind).total_cmp(&self.models[b].average(kind)));
        idx
    }

    /// Columns `model,campaign,residual_type,mean_crps`; the `average`
    /// row closes each model.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,campaign,residual_type,mean_crps\n");
        for kind in [ResidualKind::Raw, ResidualKind::Pearson] {
            for i in self.ranking(kind) {
                let m = &self.models[i];
                for (t, c) in m.campaigns.iter().enumerate() {
                    let _ = writeln!(s, "{},{},{},{}", m.model, c.campaign, kind.label(), m.campaign_score(t, kind));
                }
                let _ = writeln!(s, "{},average,{},{}", m.model, kind.label(), m.average(kind));
            }
        }
        s
    }

    /// Two stacked tables, one per residual type, campaigns as columns and
    /// the average last.
    pub fn to_text(&self) -> String {
        let Some(first) = self.models.first() else {
            return String::new();
        };
        let name_w = self.models.iter().map(|m| m.model.len()).max().unwrap_or(5).max(5);
        let headers: Vec<String> = first
            .campaigns
            .iter()
            .map(|c| format!("Campaign {}", c.campaign))
            .chain(std::iter::once("Average".to_string()))
            .collect();
        let col_w = headers.iter().map(String::len).max().unwrap_or(7).max(8);
        let mut s = String::new();
        for (n, kind) in [ResidualKind::Raw, ResidualKind::Pearson].into_iter().enumerate() {
            if n > 0 {
                s.push('\n');
            }
            let title = match kind {
                ResidualKind::Raw => "Raw residuals: mean CRPS",
                ResidualKind::Pearson => "Pearson residuals: mean CRPS",
            };
            let _ = writeln!(s, "{title}");
            let _ = write!(s, "{:<name_w$}", "Model");
            for h in &headers {
                let _ = write!(s, "  {h:>col_w$}");
            }
            s.push('\n');
            for i in self.ranking(kind) {
                let m = &self.models[i];
                let _ = write!(s, "{:<name_w$}", m.model);
                for t in 0..m.campaigns.len() {
                    let _ = write!(s, "  {:>col_w$.3}", m.campaign_score(t, kind));
                }
                let _ = writeln!(s, "  {:>col_w$.3}", m.average(kind));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::simulate_pattern;
    use crate::spatial::{cell_counts, MarkedPointPattern, Point};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn unit(n: usize) -> RasterGrid {
        RasterGrid::new(0.0, 0.0, n, n, 1.0 / n as f64).unwrap()
    }

    #[test]
    fn partition_tiles_the_grid() {
        let g = RasterGrid::new(0.0, 0.0, 7, 5, 1.0).unwrap();
        let b = BlockPartition::new(g, 2, 3).unwrap();
        let mut seen = vec![0; g.n_cells()];
        for k in 0..b.n_blocks() {
            for &c in b.cells(k) {
                seen[c] += 1;
                let (x, y) = g.center(c);
                let (x0, y0, x1, y1) = b.rect(k);
                assert!(x >= x0 && x < x1 && y >= y0 && y < y1);
            }
        }
        assert!(seen.iter().all(|&s| s == 1));
        assert!(BlockPartition::new(g, 0, 3).is_err());
    }

    #[test]
    fn quadrature_cases() {
        let g = unit(8);
        let blocks = BlockPartition::new(g, 2, 2).unwrap();
        let c = RasterLayer::constant(g, 3.0).unwrap();
        let q = mc_quadrature(&c, &blocks).unwrap();
        assert!(q.iter().all(|v| (v - 0.75).abs() < 1e-14));

        let g = unit(64);
        let whole = BlockPartition::new(g, 1, 1).unwrap();
        let quarters = BlockPartition::new(g, 4, 4).unwrap();
        let f = RasterLayer::from_fn(g, |x, _| x).unwrap();
        let total = mc_quadrature(&f, &whole).unwrap()[0];
        assert!((total - 0.5).abs() < 1e-3);
        let parts: f64 = mc_quadrature(&f, &quarters).unwrap().iter().sum();
        assert!((parts - total).abs() < 1e-12);
    }

    fn counts_with(g: RasterGrid, pts: Vec<Point>) -> CountRaster {
        cell_counts(&MarkedPointPattern::new(1, pts), &g).unwrap()
    }

    #[test]
    fn residual_examples() {
        let g = RasterGrid::new(0.0, 0.0, 1, 1, 1.0).unwrap();
        let blocks = BlockPartition::new(g, 1, 1).unwrap();
        let five = counts_with(g, vec![Point::new(0.5, 0.5); 5]);
        let three = RasterLayer::constant(g, 3.0).unwrap();
        assert_eq!(raw_residual(&five, &three, &blocks, 0).unwrap(), 2.0);
        let empty = counts_with(g, vec![]);
        assert_eq!(raw_residual(&empty, &three, &blocks, 0).unwrap(), -3.0);
        let four_pts = counts_with(g, vec![Point::new(0.5, 0.5); 4]);
        let four = RasterLayer::constant(g, 4.0).unwrap();
        assert_eq!(raw_residual(&four_pts, &four, &blocks, 0).unwrap(), 0.0);
        assert_eq!(pearson_residual(&four_pts, &four, &blocks, 0).unwrap(), 0.0);
        assert_eq!(pearson_residual(&empty, &four, &blocks, 0).unwrap(), -2.0);
        let one = RasterLayer::constant(g, 1.0).unwrap();
        assert_eq!(
            pearson_residual(&five, &one, &blocks, 0).unwrap(),
            raw_residual(&five, &one, &blocks, 0).unwrap()
        );
        let zero = RasterLayer::constant(g, 0.0).unwrap();
        assert!(matches!(pearson_residual(&five, &zero, &blocks, 0), Err(Error::DegenerateIntensity { cell: 0 })));
    }

    #[test]
    fn crps_examples() {
        assert_eq!(crps_at_zero(&[2.0]).unwrap(), 2.0);
        assert!((crps_at_zero(&[-1.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(crps_at_zero(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(crps_at_zero(&[]).is_err());
        assert!(crps_at_zero(&[f64::NAN]).is_err());
    }

    /// Direct integration of (F(x) − 1{x ≥ 0})² for the empirical CDF,
    /// exact on each piece between consecutive breakpoints.
    pub(crate) fn crps_by_integration(samples: &[f64]) -> f64 {
        let m = samples.len() as f64;
        let mut pts: Vec<f64> = samples.to_vec();
        pts.push(0.0);
        pts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let f = samples.iter().filter(|&&s| s <= mid).count() as f64 / m;
            let h = if mid >= 0.0 { 1.0 } else { 0.0 };
            total += (f - h).powi(2) * (b - a);
        }
        total
    }

    #[test]
    fn crps_identity_matches_integration() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(1..=200);
            let shift = rng.random_range(-2.0..2.0);
            let s: Vec<f64> = (0..n).map(|_| shift + 3.0 * (rng.random::<f64>() - 0.5)).collect();
            assert!((crps_at_zero(&s).unwrap() - crps_by_integration(&s)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn crps_is_non_negative(s in proptest::collection::vec(-50.0f64..50.0, 1..60)) {
            let c = crps_at_zero(&s).unwrap();
            prop_assert!(c >= 0.0);
            prop_assert_eq!(c == 0.0, s.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn self_consistent_intensity_beats_doubled_one() {
        let g = unit(12);
        let blocks = BlockPartition::new(g, 3, 3).unwrap();
        let lambda = RasterLayer::from_fn(g, |x, y| 200.0 * (1.0 + x + y)).unwrap();
        let cells: Vec<usize> = (0..g.n_cells()).collect();
        let truth = vec![lambda.values().to_vec(); 400];
        let doubled = vec![lambda.values().iter().map(|v| 2.0 * v).collect::<Vec<_>>(); 400];
        let mut wins = 0;
        for seed in 0..10 {
            let p = simulate_pattern(&lambda, 1, seed).unwrap();
            let counts: Vec<f64> = cell_counts(&p, &g).unwrap().counts.iter().map(|&c| f64::from(c)).collect();
            let good = score_campaign(1, &counts, &cells, &truth, &blocks).unwrap();
            let bad = score_campaign(1, &counts, &cells, &doubled, &blocks).unwrap();
            if good.mean_crps_raw < bad.mean_crps_raw && good.mean_crps_pearson < bad.mean_crps_pearson {
                wins += 1;
            }
        }
        assert_eq!(wins, 10);
    }

    #[test]
    fn raw_residual_is_unbiased_under_the_true_intensity() {
        let g = unit(6);
        let blocks = BlockPartition::new(g, 2, 2).unwrap();
        let lambda = RasterLayer::from_fn(g, |x, _| 30.0 + 40.0 * x).unwrap();
        let reps = 500;
        let mut sums = vec![0.0; blocks.n_blocks()];
        let mut sq = vec![0.0; blocks.n_blocks()];
        for seed in 0..reps {
            let c = cell_counts(&simulate_pattern(&lambda, 1, seed).unwrap(), &g).unwrap();
            for b in 0..blocks.n_blocks() {
                let r = raw_residual(&c, &lambda, &blocks, b).unwrap();
                sums[b] += r;
                sq[b] += r * r;
            }
        }
        for b in 0..blocks.n_blocks() {
            let mean = sums[b] / reps as f64;
            let sd = (sq[b] / reps as f64 - mean * mean).sqrt();
            assert!(mean.abs() < 3.0 * sd / (reps as f64).sqrt(), "block {b}: {mean}");
        }
    }

    #[test]
    fn masked_blocks_are_dropped() {
        let g = RasterGrid::new(0.0, 0.0, 4, 2, 1.0).unwrap();
        let blocks = BlockPartition::new(g, 1, 2).unwrap();
        let cells = vec![0, 1, 4, 5];
        let r = score_campaign(1, &[1.0, 0.0, 2.0, 1.0], &cells, &[vec![1.0; 4], vec![1.5; 4]], &blocks).unwrap();
        assert_eq!(r.blocks.len(), 1);
        assert_eq!(r.blocks[0].raw, vec![0.0, -2.0]);
    }

    fn fake_report(order: &[(&str, f64, f64)]) -> ResidualReport {
        ResidualReport {
            models: order
                .iter()
                .map(|&(name, raw, pearson)| ModelResiduals {
                    model: name.into(),
                    thinned: false,
                    campaigns: vec![CampaignResiduals { campaign: 1, blocks: vec![], mean_crps_raw: raw, mean_crps_pearson: pearson }],
                    average_raw: raw,
                    average_pearson: pearson,
                })
                .collect(),
        }
    }

    #[test]
    fn report_sorts_each_table() {
        let r = fake_report(&[("m2", 6.694, 2.092), ("m1", 3.990, 1.5), ("m3", 6.15, 2.5)]);
        assert_eq!(r.ranking(ResidualKind::Raw), vec![1, 2, 0]);
        assert_eq!(r.ranking(ResidualKind::Pearson), vec![1, 0, 2]);
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "model,campaign,residual_type,mean_crps");
        assert_eq!(lines[1], "m1,1,raw,3.99");
        assert_eq!(lines[2], "m1,average,raw,3.99");
        let text = r.to_text();
        assert!(text.starts_with("Raw residuals: mean CRPS\nModel"));
        assert!(text.contains("Pearson residuals: mean CRPS"));
        let m1 = text.lines().nth(2).unwrap();
        assert!(m1.starts_with("m1") && m1.ends_with("3.990"));
    }
}
