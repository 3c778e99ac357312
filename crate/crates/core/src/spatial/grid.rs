use crate::error::{Error, Result};

/// Regular grid over a planar study domain. Row 0 is the southernmost row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterGrid {
    pub origin_x: f64,
    pub origin_y: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub cell_size: f64,
}

impl RasterGrid {
    pub fn new(origin_x: f64, origin_y: f64, n_cols: usize, n_rows: usize, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::Domain(format!("cell_size must be positive, got {cell_size}")));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::Domain(format!("grid must have at least one cell, got {n_cols}x{n_rows}")));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::Domain("grid origin must be finite".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            n_cols,
            n_rows,
            cell_size,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.n_cols, index / self.n_cols)
    }

    pub fn center(&self, index: usize) -> (f64, f64) {
        let (col, row) = self.col_row(index);
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn max_x(&self) -> f64 {
        self.origin_x + self.n_cols as f64 * self.cell_size
    }

    pub fn max_y(&self) -> f64 {
        self.origin_y + self.n_rows as f64 * self.cell_size
    }

    pub fn area(&self) -> f64 {
        self.n_cells() as f64 * self.cell_area()
    }

    fn axis_index(coord: f64, origin: f64, cell_size: f64, n: usize) -> Option<usize> {
        let max = origin + n as f64 * cell_size;
        if !(coord >= origin && coord <= max) {
            return None;
        }
        let k = ((coord - origin) / cell_size).floor();
        // closed on the global max edge
        Some((k as usize).min(n - 1))
    }

    /// Cell index containing `(x, y)`; cells are half-open except on the
    /// global max edges.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let col = Self::axis_index(x, self.origin_x, self.cell_size, self.n_cols)?;
        let row = Self::axis_index(y, self.origin_y, self.cell_size, self.n_rows)?;
        Some(self.index(col, row))
    }

    pub fn ensure_same(&self, other: &RasterGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Real-valued field on a [`RasterGrid`], with a no-data mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterLayer {
    grid: RasterGrid,
    values: Vec<f64>,
    nodata: Vec<bool>,
}

impl RasterLayer {
    pub fn new(grid: RasterGrid, values: Vec<f64>, nodata: Vec<bool>) -> Result<Self> {
        if values.len() != grid.n_cells() || nodata.len() != grid.n_cells() {
            return Err(Error::Shape(format!(
                "expected {} cells, got {} values and {} mask entries",
                grid.n_cells(),
                values.len(),
                nodata.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .zip(&nodata)
            .position(|(v, &masked)| !masked && !v.is_finite())
        {
            return Err(Error::validation(None, format!("non-finite value in unmasked cell {i}")));
        }
        Ok(Self { grid, values, nodata })
    }

    /// Layer with every cell valid.
    pub fn from_values(grid: RasterGrid, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(grid, values, vec![false; n])
    }

    pub fn constant(grid: RasterGrid, value: f64) -> Result<Self> {
        Self::from_values(grid, vec![value; grid.n_cells()])
    }

    pub fn from_fn(grid: RasterGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let values = (0..grid.n_cells())
            .map(|i| {
                let (x, y) = grid.center(i);
                f(x, y)
            })
            .collect();
        Self::from_values(grid, values)
    }

    pub fn grid(&self) -> &RasterGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn nodata_mask(&self) -> &[bool] {
        &self.nodata
    }

    pub fn is_nodata(&self, index: usize) -> bool {
        self.nodata[index]
    }

    pub fn has_nodata(&self) -> bool {
        self.nodata.iter().any(|&m| m)
    }

    pub fn value(&self, index: usize) -> Option<f64> {
        (!self.nodata[index]).then(|| self.values[index])
    }

    pub fn value_at(&self, x: f64, y: f64) -> Option<f64> {
        self.grid.locate(x, y).and_then(|i| self.value(i))
    }

    /// Applies `f` to every valid cell; masked cells stay masked.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let values = self
            .values
            .iter()
            .zip(&self.nodata)
            .map(|(&v, &m)| if m { v } else { f(v) })
            .collect();
        Self::new(self.grid, values, self.nodata.clone())
    }
}

/// Integer count per grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRaster {
    pub grid: RasterGrid,
    pub counts: Vec<u32>,
}

impl CountRaster {
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }
}
