//! Point-pattern CSV and ESRI ASCII grid readers/writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write followed by a load reproduces every value bit-for-bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::grid::{RasterGrid, RasterLayer};
use super::pattern::{MarkedPointPattern, Point, CONFIDENCE, DIAG};
use crate::error::{Error, Result};
use crate::util::write_atomic;

pub const PATTERN_HEADER: [&str; 5] = ["campaign", "x", "y", "confidence", "diag"];
const DEFAULT_NODATA: f64 = -9999.0;

pub fn load_point_pattern(path: impl AsRef<Path>) -> Result<Vec<MarkedPointPattern>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_point_pattern(&text)
}

#[derive(Default)]
struct CampaignRows {
    points: Vec<Point>,
    confidence: Vec<Option<f64>>,
    diag: Vec<Option<f64>>,
    rows: Vec<usize>,
}

/// Parses the point-pattern CSV. Row numbers in errors are 1-based data
/// rows (the header is not counted).
pub fn parse_point_pattern(text: &str) -> Result<Vec<MarkedPointPattern>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != PATTERN_HEADER {
        return Err(Error::Schema(format!(
            "expected header '{}', found '{}'",
            PATTERN_HEADER.join(","),
            names.join(",")
        )));
    }

    let mut by_campaign: BTreeMap<u32, CampaignRows> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, msg: e.to_string() })?;
        if record.len() != PATTERN_HEADER.len() {
            return Err(Error::Schema(format!(
                "row {row} has {} fields, expected {}",
                record.len(),
                PATTERN_HEADER.len()
            )));
        }
        let campaign: u32 = record[0].parse().map_err(|_| Error::Parse {
            row,
            msg: format!("campaign '{}' is not a positive integer", &record[0]),
        })?;
        if campaign == 0 {
            return Err(Error::validation(Some(row), "campaign ids start at 1"));
        }
        let num = |field: usize| -> Result<f64> {
            let v: f64 = record[field].parse().map_err(|_| Error::Parse {
                row,
                msg: format!("{} '{}' is not a number", PATTERN_HEADER[field], &record[field]),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    row,
                    msg: format!("{} is not finite", PATTERN_HEADER[field]),
                })
            }
        };
        let unit_mark = |field: usize| -> Result<Option<f64>> {
            if record[field].is_empty() {
                return Ok(None);
            }
            let v = num(field)?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(
                    Some(row),
                    format!("{} = {v} outside [0, 1]", PATTERN_HEADER[field]),
                ));
            }
            Ok(Some(v))
        };
        let (x, y) = (num(1)?, num(2)?);
        let (cs, dl) = (unit_mark(3)?, unit_mark(4)?);
        let entry = by_campaign.entry(campaign).or_default();
        entry.points.push(Point::new(x, y));
        entry.confidence.push(cs);
        entry.diag.push(dl);
        entry.rows.push(row);
    }

    by_campaign
        .into_iter()
        .map(|(campaign, rows)| {
            let mut pattern = MarkedPointPattern::new(campaign, rows.points);
            for (name, column) in [(CONFIDENCE, rows.confidence), (DIAG, rows.diag)] {
                if column.iter().all(Option::is_some) && !column.is_empty() {
                    pattern.set_mark(name, column.into_iter().flatten().collect())?;
                } else if let Some(k) = column.iter().position(Option::is_some) {
                    // a column is either complete or empty within a campaign
                    let missing = column.iter().position(Option::is_none).unwrap_or(k);
                    return Err(Error::validation(
                        Some(rows.rows[missing]),
                        format!("campaign {campaign} has '{name}' on some rows but not others"),
                    ));
                }
            }
            Ok(pattern)
        })
        .collect()
}

pub fn format_point_pattern(patterns: &[MarkedPointPattern]) -> String {
    let mut out = PATTERN_HEADER.join(",");
    out.push('\n');
    for p in patterns {
        let cs = p.mark(CONFIDENCE);
        let dl = p.mark(DIAG);
        for (i, pt) in p.points().iter().enumerate() {
            let fmt_opt = |m: Option<&[f64]>| m.map(|v| format!("{}", v[i])).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", p.campaign, pt.x, pt.y, fmt_opt(cs), fmt_opt(dl));
        }
    }
    out
}

pub fn write_point_pattern(path: impl AsRef<Path>, patterns: &[MarkedPointPattern]) -> Result<()> {
    write_atomic(path.as_ref(), format_point_pattern(patterns).as_bytes())
}

pub fn load_raster(path: impl AsRef<Path>) -> Result<RasterLayer> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_raster(&text)
}

/// Parses an ESRI ASCII grid. `xllcenter`/`yllcenter` are accepted and
/// converted to corner coordinates.
pub fn parse_raster(text: &str) -> Result<RasterLayer> {
    let mut header: BTreeMap<String, f64> = BTreeMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(lineno, line)) = lines.peek() {
        let mut tokens = line.split_whitespace();
        let Some(key) = tokens.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        let value = tokens.next().and_then(|v| v.parse::<f64>().ok()).ok_or(Error::Parse {
            row: lineno + 1,
            msg: format!("malformed header line '{line}'"),
        })?;
        header.insert(key.to_ascii_lowercase(), value);
        lines.next();
    }

    let get = |key: &str| -> Result<f64> {
        header
            .get(key)
            .copied()
            .ok_or_else(|| Error::Parse { row: 0, msg: format!("missing header field '{key}'") })
    };
    let dim = |key: &str| -> Result<usize> {
        let v = get(key)?;
        if v >= 1.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::Parse { row: 0, msg: format!("{key} must be a positive integer, got {v}") })
        }
    };
    let n_cols = dim("ncols")?;
    let n_rows = dim("nrows")?;
    let cell_size = get("cellsize")?;
    let corner = |corner_key: &str, center_key: &str| -> Result<f64> {
        match (header.get(corner_key), header.get(center_key)) {
            (Some(&v), _) => Ok(v),
            (None, Some(&v)) => Ok(v - 0.5 * cell_size),
            _ => Err(Error::Parse { row: 0, msg: format!("missing header field '{corner_key}'") }),
        }
    };
    let origin_x = corner("xllcorner", "xllcenter")?;
    let origin_y = corner("yllcorner", "yllcenter")?;
    let nodata_value = header.get("nodata_value").copied().unwrap_or(DEFAULT_NODATA);
    let grid = RasterGrid::new(origin_x, origin_y, n_cols, n_rows, cell_size)
        .map_err(|e| Error::Parse { row: 0, msg: e.to_string() })?;

    let mut file_values = Vec::with_capacity(grid.n_cells());
    for (lineno, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                row: lineno + 1,
                msg: format!("'{tok}' is not a number"),
            })?;
            file_values.push(v);
        }
    }
    if file_values.len() != grid.n_cells() {
        return Err(Error::Shape(format!(
            "raster declares {n_cols}x{n_rows} = {} cells but has {} values",
            grid.n_cells(),
            file_values.len()
        )));
    }

    // file rows run north to south; grid row 0 is the south row
    let mut values = vec![0.0; grid.n_cells()];
    let mut nodata = vec![false; grid.n_cells()];
    for file_row in 0..n_rows {
        let row = n_rows - 1 - file_row;
        for col in 0..n_cols {
            let v = file_values[file_row * n_cols + col];
            let idx = grid.index(col, row);
            values[idx] = v;
            nodata[idx] = v == nodata_value || !v.is_finite();
        }
    }
    RasterLayer::new(grid, values, nodata)
}

pub fn format_raster(layer: &RasterLayer) -> String {
    let g = layer.grid();
    let mut sentinel = DEFAULT_NODATA;
    while layer
        .values()
        .iter()
        .zip(layer.nodata_mask())
        .any(|(&v, &m)| !m && v == sentinel)
    {
        sentinel = sentinel * 10.0 - 9.0;
    }
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", g.n_cols);
    let _ = writeln!(out, "nrows {}", g.n_rows);
    let _ = writeln!(out, "xllcorner {}", g.origin_x);
    let _ = writeln!(out, "yllcorner {}", g.origin_y);
    let _ = writeln!(out, "cellsize {}", g.cell_size);
    let _ = writeln!(out, "NODATA_value {sentinel}");
    for row in (0..g.n_rows).rev() {
        let line: Vec<String> = (0..g.n_cols)
            .map(|col| {
                let i = g.index(col, row);
                match layer.value(i) {
                    Some(v) => format!("{v}"),
                    None => format!("{sentinel}"),
                }
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_raster(path: impl AsRef<Path>, layer: &RasterLayer) -> Result<()> {
    write_atomic(path.as_ref(), format_raster(layer).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn groups_by_campaign_preserving_order() {
        let text = "campaign,x,y,confidence,diag\n2,5,5,0.5,0.1\n1,1,2,0.9,0.2\n1,3,4,0.8,0.3\n";
        let pats = parse_point_pattern(text).unwrap();
        assert_eq!(pats.len(), 2);
        assert_eq!((pats[0].campaign, pats[0].len()), (1, 2));
        assert_eq!((pats[1].campaign, pats[1].len()), (2, 1));
        assert_eq!(pats[0].points()[1], Point::new(3.0, 4.0));
        assert_eq!(pats[0].mark(CONFIDENCE).unwrap(), &[0.9, 0.8]);
    }

    #[test]
    fn confidence_out_of_range_names_row() {
        let text = "campaign,x,y,confidence,diag\n1,0,0,0.5,0.5\n1,0,0,0.5,0.5\n1,0,0,0.5,0.5\n1,0,0,1.3,0.5\n";
        match parse_point_pattern(text).unwrap_err() {
            Error::Validation { row: Some(4), msg } => assert!(msg.contains("confidence")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_and_parse_errors() {
        assert!(matches!(parse_point_pattern("campaign,x,y\n1,0,0\n"), Err(Error::Schema(_))));
        assert!(matches!(
            parse_point_pattern("campaign,x,y,confidence,diag,extra\n"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_point_pattern("campaign,x,y,confidence,diag\n1,abc,0,,\n"),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn manual_annotations_may_omit_marks() {
        let pats = parse_point_pattern("campaign,x,y,confidence,diag\n1,0.5,0.5,,\n1,1.5,0.5,,\n").unwrap();
        assert!(pats[0].mark(CONFIDENCE).is_none());
        assert!(parse_point_pattern("campaign,x,y,confidence,diag\n1,0.5,0.5,0.3,\n1,1.5,0.5,,\n").is_err());
    }

    #[test]
    fn raster_basic_and_orientation() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n";
        let layer = parse_raster(text).unwrap();
        // first file row is the north row
        assert_eq!(layer.value_at(0.5, 1.5), Some(1.0));
        assert_eq!(layer.value_at(1.5, 0.5), Some(4.0));
        assert!(!layer.has_nodata());
    }

    #[test]
    fn raster_nodata_and_shape_errors() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 -9999\n3 4\n";
        let layer = parse_raster(text).unwrap();
        assert!(layer.is_nodata(layer.grid().index(1, 1)));
        let short = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n";
        assert!(matches!(parse_raster(short), Err(Error::Shape(_))));
        let bad = "ncols two\nnrows 2\n";
        assert!(matches!(parse_raster(bad), Err(Error::Parse { .. })));
    }

    #[test]
    fn raster_geometry_mismatch_detected() {
        let a = parse_raster("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3 4\n").unwrap();
        let b = parse_raster("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 2\n1 2 3 4\n").unwrap();
        assert!(matches!(a.grid().ensure_same(b.grid()), Err(Error::GeometryMismatch(_))));
    }

    proptest! {
        #[test]
        fn pattern_round_trip_is_bit_exact(
            rows in proptest::collection::vec((1u32..4, -1e6f64..1e6, -1e6f64..1e6, 0.0f64..=1.0, 0.0f64..=1.0), 1..50)
        ) {
            let mut by: BTreeMap<u32, Vec<(f64, f64, f64, f64)>> = BTreeMap::new();
            for &(c, x, y, cs, dl) in &rows {
                by.entry(c).or_default().push((x, y, cs, dl));
            }
            let pats: Vec<MarkedPointPattern> = by.into_iter().map(|(c, v)| {
                let mut p = MarkedPointPattern::new(c, v.iter().map(|t| Point::new(t.0, t.1)).collect());
                p.set_mark(CONFIDENCE, v.iter().map(|t| t.2).collect()).unwrap();
                p.set_mark(DIAG, v.iter().map(|t| t.3).collect()).unwrap();
                p
            }).collect();
            let back = parse_point_pattern(&format_point_pattern(&pats)).unwrap();
            prop_assert_eq!(back, pats);
        }

        #[test]
        fn raster_round_trip_is_bit_exact(
            vals in proptest::collection::vec(proptest::option::weighted(0.9, -1e9f64..1e9), 12),
            ox in -1e5f64..1e5, cs in 1e-3f64..1e3
        ) {
            let g = RasterGrid::new(ox, -ox, 4, 3, cs).unwrap();
            let layer = RasterLayer::new(
                g,
                vals.iter().map(|v| v.unwrap_or(0.0)).collect(),
                vals.iter().map(Option::is_none).collect(),
            ).unwrap();
            let back = parse_raster(&format_raster(&layer)).unwrap();
            prop_assert_eq!(back.grid(), layer.grid());
            prop_assert_eq!(back.nodata_mask(), layer.nodata_mask());
            for i in 0..12 {
                prop_assert_eq!(back.value(i).map(f64::to_bits), layer.value(i).map(f64::to_bits));
            }
        }
    }
}
