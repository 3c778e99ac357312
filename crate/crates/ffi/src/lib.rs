//! C interface to coxthin.
//!
//! Every fallible function returns a [`CoxthinStatus`] and writes its result
//! through an out-pointer. On failure, [`coxthin_last_error`] describes the
//! most recent error on the calling thread.
//!
//! Rasters and pattern sets are opaque handles created by `*_load` or
//! `*_new` functions and released with the matching `*_free`.
//!
//! # Safety
//!
//! Pointers must be valid for the stated lengths; strings are
//! NUL-terminated UTF-8. Handles must not be used after they are freed.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use coxthin::config::RunConfig;
use coxthin::detection;
use coxthin::diagnostics::crps_at_zero;
use coxthin::gp::{matern_cov, pc_prior_logdensity, GpHyper, PcPriorSpec};
use coxthin::spatial::{load_point_pattern, load_raster, MarkedPointPattern, RasterGrid, RasterLayer};
use coxthin::workflow::{self, Options};
use coxthin::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoxthinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    NonConvergence = 5,
    Numerical = 6,
    GradcheckFailed = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A raster layer.
pub struct CoxthinRaster(RasterLayer);

/// Marked point patterns, one per campaign in ascending campaign order.
pub struct CoxthinPatterns(Vec<MarkedPointPattern>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> CoxthinStatus {
    match workflow::exit_code(err) {
        workflow::EXIT_CONFIG => match err {
            Error::Domain(_) => CoxthinStatus::InvalidArgument,
            _ => CoxthinStatus::Config,
        },
        workflow::EXIT_DATA => CoxthinStatus::Data,
        workflow::EXIT_NONCONVERGENCE => CoxthinStatus::NonConvergence,
        _ => CoxthinStatus::Numerical,
    }
}

enum Fail {
    Null(&'static str),
    Arg(String),
    Small(usize),
    Lib(Error),
    Gradcheck,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CoxthinStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CoxthinStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            CoxthinStatus::NullPointer
        }
        Ok(Err(Fail::Arg(msg))) => {
            set_error(msg);
            CoxthinStatus::InvalidArgument
        }
        Ok(Err(Fail::Small(needed))) => {
            set_error(format!("output buffer too small; {needed} elements needed"));
            CoxthinStatus::BufferTooSmall
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Gradcheck)) => {
            set_error("gradient check failed");
            CoxthinStatus::GradcheckFailed
        }
        Err(_) => {
            set_error("internal panic");
            CoxthinStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Arg(format!("{what} is not valid UTF-8")))
}

unsafe fn opt_string(p: *const c_char, what: &'static str) -> Result<Option<String>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        string(p, what).map(Some)
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn coxthin_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn coxthin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Matérn (ν = 1) covariance at distance `d`.
#[no_mangle]
pub unsafe extern "C" fn coxthin_matern_cov(d: f64, sigma: f64, rho: f64, result: *mut f64) -> CoxthinStatus {
    guard(|| {
        let r = out(result, "result")?;
        *r = matern_cov(d, &GpHyper::new(sigma, rho, 1)?)?;
        Ok(())
    })
}

/// Half-normal detection probability of `k` covariate values with scales `taus`.
#[no_mangle]
pub unsafe extern "C" fn coxthin_detection_prob(z: *const f64, taus: *const f64, k: usize, result: *mut f64) -> CoxthinStatus {
    guard(|| {
        let z = slice(z, k, "z")?;
        let taus = slice(taus, k, "taus")?;
        *out(result, "result")? = detection::detection_prob(z, taus)?;
        Ok(())
    })
}

/// CRPS of the empirical distribution of `n` samples against zero.
#[no_mangle]
pub unsafe extern "C" fn coxthin_crps_at_zero(samples: *const f64, n: usize, result: *mut f64) -> CoxthinStatus {
    guard(|| {
        let s = slice(samples, n, "samples")?;
        *out(result, "result")? = crps_at_zero(s)?;
        Ok(())
    })
}

/// Joint PC-prior log density of (σ, ρ) calibrated by
/// P(ρ < rho0) = alpha_rho and P(σ > sigma0) = alpha_sigma.
#[no_mangle]
pub unsafe extern "C" fn coxthin_pc_prior_logdensity(
    sigma: f64,
    rho: f64,
    rho0: f64,
    alpha_rho: f64,
    sigma0: f64,
    alpha_sigma: f64,
    result: *mut f64,
) -> CoxthinStatus {
    guard(|| {
        let spec = PcPriorSpec { rho0, alpha_rho, sigma0, alpha_sigma };
        spec.validate()?;
        *out(result, "result")? = pc_prior_logdensity(&GpHyper::new(sigma, rho, 1)?, &spec)?;
        Ok(())
    })
}

/// Loads an ESRI ASCII grid.
#[no_mangle]
pub unsafe extern "C" fn coxthin_raster_load(path: *const c_char, raster: *mut *mut CoxthinRaster) -> CoxthinStatus {
    guard(|| {
        let slot = out(raster, "raster")?;
        let layer = load_raster(PathBuf::from(string(path, "path")?))?;
        *slot = Box::into_raw(Box::new(CoxthinRaster(layer)));
        Ok(())
    })
}

/// A raster from `n_cols * n_rows` values in row-major order, row 0 at
/// the bottom (south). NaN marks nodata.
#[no_mangle]
pub unsafe extern "C" fn coxthin_raster_new(
    origin_x: f64,
    origin_y: f64,
    n_cols: usize,
    n_rows: usize,
    cell_size: f64,
    values: *const f64,
    raster: *mut *mut CoxthinRaster,
) -> CoxthinStatus {
    guard(|| {
        let slot = out(raster, "raster")?;
        let grid = RasterGrid::new(origin_x, origin_y, n_cols, n_rows, cell_size)?;
        let v = slice(values, grid.n_cells(), "values")?;
        let nodata: Vec<bool> = v.iter().map(|x| x.is_nan()).collect();
        let vals = v.iter().map(|x| if x.is_nan() { 0.0 } else { *x }).collect();
        *slot = Box::into_raw(Box::new(CoxthinRaster(RasterLayer::new(grid, vals, nodata)?)));
        Ok(())
    })
}

/// Grid dimensions of a raster.
#[no_mangle]
pub unsafe extern "C" fn coxthin_raster_dims(raster: *const CoxthinRaster, n_cols: *mut usize, n_rows: *mut usize) -> CoxthinStatus {
    guard(|| {
        let r = raster.as_ref().ok_or(Fail::Null("raster"))?;
        *out(n_cols, "n_cols")? = r.0.grid().n_cols;
        *out(n_rows, "n_rows")? = r.0.grid().n_rows;
        Ok(())
    })
}

/// Copies the cell values (NaN for nodata) into `buf` of length `len`.
#[no_mangle]
pub unsafe extern "C" fn coxthin_raster_values(raster: *const CoxthinRaster, buf: *mut f64, len: usize) -> CoxthinStatus {
    guard(|| {
        let r = raster.as_ref().ok_or(Fail::Null("raster"))?;
        let n = r.0.grid().n_cells();
        if len < n {
            return Err(Fail::Small(n));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, n);
        for (i, d) in dst.iter_mut().enumerate() {
            *d = r.0.value(i).unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn coxthin_raster_free(raster: *mut CoxthinRaster) {
    if !raster.is_null() {
        drop(Box::from_raw(raster));
    }
}

/// Loads a point-pattern CSV (`campaign,x,y,confidence,diag`).
#[no_mangle]
pub unsafe extern "C" fn coxthin_patterns_load(path: *const c_char, patterns: *mut *mut CoxthinPatterns) -> CoxthinStatus {
    guard(|| {
        let slot = out(patterns, "patterns")?;
        let p = load_point_pattern(PathBuf::from(string(path, "path")?))?;
        *slot = Box::into_raw(Box::new(CoxthinPatterns(p)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn coxthin_patterns_count(patterns: *const CoxthinPatterns, n_campaigns: *mut usize) -> CoxthinStatus {
    guard(|| {
        let p = patterns.as_ref().ok_or(Fail::Null("patterns"))?;
        *out(n_campaigns, "n_campaigns")? = p.0.len();
        Ok(())
    })
}

fn campaign(p: &CoxthinPatterns, index: usize) -> Result<&MarkedPointPattern, Fail> {
    p.0.get(index)
        .ok_or_else(|| Fail::Arg(format!("campaign index {index} out of range (0..{})", p.0.len())))
}

/// Campaign label and point count of the pattern at `index` (0-based).
#[no_mangle]
pub unsafe extern "C" fn coxthin_patterns_campaign(
    patterns: *const CoxthinPatterns,
    index: usize,
    campaign_id: *mut u32,
    n_points: *mut usize,
) -> CoxthinStatus {
    guard(|| {
        let p = campaign(patterns.as_ref().ok_or(Fail::Null("patterns"))?, index)?;
        *out(campaign_id, "campaign_id")? = p.campaign;
        *out(n_points, "n_points")? = p.len();
        Ok(())
    })
}

/// Local frequency (points within `radius`, itself included) of each point of the
/// pattern at `index`, written to `buf` of length `len`.
#[no_mangle]
pub unsafe extern "C" fn coxthin_local_frequency(
    patterns: *const CoxthinPatterns,
    index: usize,
    radius: f64,
    buf: *mut f64,
    len: usize,
) -> CoxthinStatus {
    guard(|| {
        let p = campaign(patterns.as_ref().ok_or(Fail::Null("patterns"))?, index)?;
        if len < p.len() {
            return Err(Fail::Small(p.len()));
        }
        let f = detection::local_frequency(p, radius)?;
        if !f.is_empty() {
            if buf.is_null() {
                return Err(Fail::Null("buf"));
            }
            std::slice::from_raw_parts_mut(buf, f.len()).copy_from_slice(&f);
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn coxthin_patterns_free(patterns: *mut CoxthinPatterns) {
    if !patterns.is_null() {
        drop(Box::from_raw(patterns));
    }
}

/// Runs a CLI command (`simulate`, `fit`, `compare` or `gradcheck`) on a
/// configuration file. `model` and `out_dir` may be null; `seed` overrides
/// the configured seed when `use_seed` is nonzero.
#[no_mangle]
pub unsafe extern "C" fn coxthin_run(
    command: *const c_char,
    config_path: *const c_char,
    model: *const c_char,
    out_dir: *const c_char,
    use_seed: c_int,
    seed: u64,
    no_timestamp: c_int,
) -> CoxthinStatus {
    guard(|| {
        let command = string(command, "command")?;
        let cfg = RunConfig::load(&PathBuf::from(string(config_path, "config_path")?))?;
        let opts = Options {
            seed: (use_seed != 0).then_some(seed),
            out: opt_string(out_dir, "out_dir")?.map(PathBuf::from),
            no_timestamp: no_timestamp != 0,
            models: opt_string(model, "model")?.into_iter().collect(),
            trials: None,
        };
        let outcome = match command.as_str() {
            "simulate" => workflow::cmd_simulate(&cfg, &opts)?,
            "fit" => workflow::cmd_fit(&cfg, &opts)?,
            "compare" => workflow::cmd_compare(&cfg, &opts)?,
            "gradcheck" => workflow::cmd_gradcheck(&cfg, &opts)?,
            other => return Err(Fail::Arg(format!("unknown command '{other}'"))),
        };
        if outcome.failed {
            return Err(Fail::Gradcheck);
        }
        Ok(())
    })
}
