//! The batch workflows behind the `coxthin` binary.
//!
//! Each command is a function of the configuration, the options and the
//! seed. Files are written atomically; a report differs between runs only in
//! its `generated_unix` line, which `no_timestamp` suppresses.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::config::{LayerSource, ModelBlock, RunConfig, ScenarioBlock};
use crate::detection::{select_radius_pooled, DetectionComponent};
use crate::diagnostics::{residual_crps_table, BlockPartition, ResidualReport, ScoredModel};
use crate::error::{Error, Result};
use crate::gp::GpHyper;
use crate::inference::gradcheck::{gradcheck_model, GradcheckReport};
use crate::inference::{fit_posterior, summarize, FitData, ModelSpec, PosteriorFit, ThinnedLgcp};
use crate::sim::{SimDetection, SimScenario};
use crate::spatial::{load_point_pattern, load_raster, MarkedPointPattern, RasterGrid, RasterLayer, LOCAL_FREQUENCY, CONFIDENCE, DIAG};
use crate::spatial::io::{format_point_pattern, format_raster};
use crate::util::{derive_seed, sha256_hex, write_atomic};

const SEED_LAYERS: u64 = 41;
const SEED_FIT: u64 = 42;
const SEED_GRADCHECK: u64 = 43;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;
pub const EXIT_GRADCHECK: i32 = 5;

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) => EXIT_CONFIG,
        Error::Io { .. }
        | Error::Schema(_)
        | Error::Parse { .. }
        | Error::Validation { .. }
        | Error::Shape(_)
        | Error::GeometryMismatch(_)
        | Error::OutOfDomain { .. }
        | Error::EmptyPattern(_)
        | Error::DegenerateIntensity { .. } => EXIT_DATA,
        Error::NonConvergence { .. } | Error::IndefiniteHessian | Error::ProfileFailed { .. } => EXIT_NONCONVERGENCE,
        Error::Factorization { .. } | Error::Numerical(_) => EXIT_OTHER,
    }
}

/// Command-line overrides shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub no_timestamp: bool,
    /// Models to act on; empty means every model in the configuration.
    pub models: Vec<String>,
    pub trials: Option<usize>,
}

/// What a command wrote.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Set by `gradcheck` when a model fails.
    pub failed: bool,
    /// Non-fatal notes for the user.
    pub warnings: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    seed: u64,
    out: PathBuf,
    opts: &'a Options,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig, opts: &'a Options) -> Result<Self> {
        let out = opts.out.clone().unwrap_or_else(|| cfg.output_path());
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self { cfg, seed: opts.seed.unwrap_or(cfg.seed), out, opts })
    }

    fn write(&self, outcome: &mut Outcome, name: &str, text: &str) -> Result<()> {
        let path = self.out.join(name);
        write_atomic(&path, text.as_bytes())?;
        outcome.files.push(path);
        Ok(())
    }

    fn selected_models(&self) -> Result<Vec<&'a ModelBlock>> {
        if self.opts.models.is_empty() {
            if self.cfg.models.is_empty() {
                return Err(Error::Config("the configuration defines no models".into()));
            }
            return Ok(self.cfg.models.iter().collect());
        }
        self.opts.models.iter().map(|m| self.cfg.model(m)).collect()
    }

    fn header(&self, command: &str) -> String {
        let mut s = format!("# coxthin {command}\nseed = {}\n", self.seed);
        if !self.opts.no_timestamp {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let _ = writeln!(s, "generated_unix = {now}");
        }
        s
    }
}

fn load_layer(cfg: &RunConfig, src: &LayerSource, grid: &RasterGrid, what: &str, seed: u64) -> Result<RasterLayer> {
    match (&src.path, src.uniform, src.constant) {
        (Some(p), None, None) => {
            let layer = load_raster(cfg.resolve(p))?;
            layer.grid().ensure_same(grid)?;
            Ok(layer)
        }
        (None, Some([lo, hi]), None) => {
            if !(lo < hi) {
                return Err(Error::Config(format!("{what}: uniform range needs lo < hi")));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let values = (0..grid.n_cells()).map(|_| rng.random_range(lo..hi)).collect();
            RasterLayer::from_values(*grid, values)
        }
        (None, None, Some(c)) => RasterLayer::constant(*grid, c),
        _ => Err(Error::Config(format!("{what}: give exactly one of path, uniform or constant"))),
    }
}

/// Builds the simulator scenario from the config's `[scenario]` block.
pub fn build_scenario(cfg: &RunConfig, sc: &ScenarioBlock, seed: u64) -> Result<(SimScenario, Vec<String>)> {
    let grid = sc.grid.to_grid()?;
    let t = sc.intercepts.len();
    let mut names = Vec::new();
    let mut covariates = Vec::new();
    for (j, c) in sc.covariates.iter().enumerate() {
        let s = derive_seed(seed, SEED_LAYERS, j as u64);
        covariates.push(load_layer(cfg, &c.source, &grid, &format!("covariate '{}'", c.name), s)?);
        names.push(c.name.clone());
    }
    let mut detection = Vec::new();
    for (k, d) in sc.detection.iter().enumerate() {
        if d.mark != CONFIDENCE && d.mark != DIAG {
            return Err(Error::Config(format!(
                "simulated mark '{}' cannot be written; use '{CONFIDENCE}' or '{DIAG}'",
                d.mark
            )));
        }
        let mut layers = Vec::new();
        for c in 0..t {
            let src = match d.layers.len() {
                1 => &d.layers[0],
                n if n == t => &d.layers[c],
                n => return Err(Error::Config(format!("mark '{}': {n} layers for {t} campaigns", d.mark))),
            };
            let s = derive_seed(seed, SEED_LAYERS, 1000 + (k * t + c) as u64);
            layers.push(load_layer(cfg, src, &grid, &format!("mark '{}'", d.mark), s)?);
        }
        detection.push(SimDetection {
            component: DetectionComponent::new(&d.mark, d.transform),
            tau: d.tau,
            mark_layers: layers,
        });
    }
    let gp = sc
        .gp
        .iter()
        .enumerate()
        .map(|(l, g)| GpHyper::new(g.sigma, g.rho, l + 1))
        .collect::<Result<Vec<_>>>()?;
    let scenario = SimScenario {
        grid,
        intercepts: sc.intercepts.clone(),
        beta: sc.beta.clone(),
        covariates,
        groups: sc.groups.clone().unwrap_or_else(|| vec![1; t]),
        gp,
        detection,
        seed,
    };
    scenario.validate()?;
    Ok((scenario, names))
}

/// Draws the scenario and writes the true and observed patterns, the
/// intensity, detection, covariate and mark rasters, and a manifest of
/// SHA-256 checksums.
pub fn cmd_simulate(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let ctx = Ctx::new(cfg, opts)?;
    let sc = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| Error::Config("simulate needs a [scenario] block".into()))?;
    let (scenario, names) = build_scenario(cfg, sc, ctx.seed)?;
    let real = scenario.realize()?;

    let mut artifacts: Vec<(String, String)> = vec![
        ("true_patterns.csv".into(), format_point_pattern(&real.true_patterns)),
        ("observed_patterns.csv".into(), format_point_pattern(&real.observed_patterns)),
    ];
    for (t, (lam, p)) in real.potential.iter().zip(&real.detection).enumerate() {
        artifacts.push((format!("lambda_t{}.asc", t + 1), format_raster(lam)));
        artifacts.push((format!("p_t{}.asc", t + 1), format_raster(p)));
    }
    for (name, layer) in names.iter().zip(&scenario.covariates) {
        artifacts.push((format!("covariate_{name}.asc"), format_raster(layer)));
    }
    for d in &scenario.detection {
        for (t, layer) in d.mark_layers.iter().enumerate() {
            artifacts.push((format!("mark_{}_t{}.asc", d.component.mark, t + 1), format_raster(layer)));
        }
    }

    let mut outcome = Outcome::default();
    let mut manifest = String::new();
    for (name, text) in &artifacts {
        ctx.write(&mut outcome, name, text)?;
        let _ = writeln!(manifest, "{}  {name}", sha256_hex(text.as_bytes()));
    }
    ctx.write(&mut outcome, "manifest.sha256", &manifest)?;
    Ok(outcome)
}

/// A model block turned into data and specification.
pub struct PreparedModel {
    pub spec: ModelSpec,
    pub data: FitData,
    /// Local-frequency radius, when the model uses that mark.
    pub lf_radius: Option<f64>,
}

fn data_grid(cfg: &RunConfig, library: &BTreeMap<String, RasterLayer>) -> Result<RasterGrid> {
    if let Some(layer) = library.values().next() {
        return Ok(*layer.grid());
    }
    if let Some(g) = &cfg.data.grid {
        return g.to_grid();
    }
    if let Some(sc) = &cfg.scenario {
        return sc.grid.to_grid();
    }
    Err(Error::Config("no grid: give [data.grid], a covariate raster or a [scenario] grid".into()))
}

pub fn prepare_model(cfg: &RunConfig, block: &ModelBlock) -> Result<PreparedModel> {
    let mut library = BTreeMap::new();
    for name in &block.covariates {
        let path = cfg.resolve(&cfg.data.covariates[name]);
        if !path.exists() {
            return Err(Error::Config(format!(
                "model '{}': raster for covariate '{name}' not found at {}",
                block.name,
                path.display()
            )));
        }
        library.insert(name.clone(), load_raster(&path)?);
    }
    let grid = data_grid(cfg, &library)?;
    let pattern_path = cfg.resolve(&cfg.data.patterns[&block.patterns]);
    if !pattern_path.exists() {
        return Err(Error::Config(format!(
            "model '{}': pattern file '{}' not found at {}",
            block.name,
            block.patterns,
            pattern_path.display()
        )));
    }
    let patterns: Vec<MarkedPointPattern> = load_point_pattern(&pattern_path)?;
    let spec = block.to_spec(patterns.len())?;
    let lf_radius = if spec.detection.iter().any(|c| c.mark == LOCAL_FREQUENCY) {
        match block.lf_radius {
            Some(r) => Some(r),
            None => Some(select_radius_pooled(&patterns, &cfg.run.candidate_radii, cfg.run.coverage_target)?.radius),
        }
    } else {
        None
    };
    let data = FitData::for_model(&spec, grid, &library, &patterns, lf_radius)?;
    Ok(PreparedModel { spec, data, lf_radius })
}

/// Fits a prepared model with the configured grid, tolerances and samples.
pub fn fit_prepared(cfg: &RunConfig, block: &ModelBlock, prepared: &PreparedModel, seed: u64) -> Result<PosteriorFit> {
    let model = ThinnedLgcp::new(&prepared.data, &prepared.spec)?;
    let grid = block.hyper_grid(&prepared.spec)?;
    fit_posterior(&model, &grid, &cfg.run.tolerances, cfg.run.samples, derive_seed(seed, SEED_FIT, 0))
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6e}")
}

/// Key/value header, the hyperparameter profile and the parameter summary.
pub fn format_fit_report(head: &str, block: &ModelBlock, prepared: &PreparedModel, fit: &PosteriorFit) -> String {
    let spec = &prepared.spec;
    let data = &prepared.data;
    let d = &fit.diagnostics;
    let mut s = String::from(head);
    let _ = writeln!(s, "model = {}", spec.name);
    let _ = writeln!(s, "label = {}", if spec.is_thinned() { "thinned" } else { "unthinned" });
    let _ = writeln!(s, "patterns = {}", block.patterns);
    let _ = writeln!(s, "covariates = {}", spec.covariates.join(" "));
    let comps: Vec<String> = spec.detection.iter().map(DetectionComponent::label).collect();
    let _ = writeln!(s, "detection = {}", comps.join(" "));
    let groups: Vec<String> = spec.groups.iter().map(usize::to_string).collect();
    let _ = writeln!(s, "groups = {}", groups.join(" "));
    if let Some(r) = prepared.lf_radius {
        let _ = writeln!(s, "lf_radius = {r}");
    }
    let _ = writeln!(s, "campaigns = {}", data.n_campaigns());
    let _ = writeln!(s, "active_cells = {}", data.n_cells());
    let _ = writeln!(s, "points = {}", data.campaigns.iter().map(|c| c.total()).sum::<f64>());
    let _ = writeln!(s, "dropped_points = {}", data.dropped_points);
    let _ = writeln!(s, "samples = {}", fit.samples.len());
    let _ = writeln!(s, "grid_points = {}", d.grid_points);
    let _ = writeln!(s, "failed_points = {}", d.failed_points);
    let _ = writeln!(s, "pruned_points = {}", d.pruned);
    let _ = writeln!(s, "modal_iterations = {}", d.iterations);
    let _ = writeln!(s, "modal_newton_decrement = {}", fmt_f(d.grad_norm));
    let _ = writeln!(s, "converged = true");

    s.push_str("\n[profile]\n");
    let l = spec.n_groups();
    let mut cols: Vec<String> = Vec::new();
    for g in 1..=l {
        cols.push(format!("sigma[{g}]"));
    }
    for g in 1..=l {
        cols.push(format!("rho[{g}]"));
    }
    for k in 1..=spec.detection.len() {
        cols.push(format!("tau[{k}]"));
    }
    cols.extend(["log_marginal", "weight", "iterations"].map(String::from));
    let _ = writeln!(s, "{}", cols.join(","));
    for p in &fit.hyper_profile.points {
        let h = &p.hyper;
        let vals: Vec<String> = h.sigma.iter().chain(&h.rho).chain(&h.tau).map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{},{},{},{}", vals.join(","), fmt_f(p.log_marginal), fmt_f(p.weight), p.iterations);
    }
    for (h, e) in &fit.hyper_profile.failures {
        let vals: Vec<String> = h.sigma.iter().chain(&h.rho).chain(&h.tau).map(|v| v.to_string()).collect();
        let _ = writeln!(s, "# failed {}: {e}", vals.join(","));
    }

    s.push_str("\n[parameters]\nparameter,mean,sd,q025,q975\n");
    for p in summarize(&fit.samples, &spec.covariates) {
        let _ = writeln!(s, "{},{},{},{},{}", p.name, fmt_f(p.mean), fmt_f(p.sd), fmt_f(p.q025), fmt_f(p.q975));
    }
    s
}

/// Fits each selected model and writes `fit_<model>.txt`.
pub fn cmd_fit(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let ctx = Ctx::new(cfg, opts)?;
    let mut outcome = Outcome::default();
    for block in ctx.selected_models()? {
        let prepared = prepare_model(cfg, block)?;
        let fit = fit_prepared(cfg, block, &prepared, ctx.seed)?;
        if fit.diagnostics.failed_points > 0 {
            outcome.warnings.push(format!(
                "model '{}': {} of {} grid points failed to fit and were skipped",
                block.name, fit.diagnostics.failed_points, fit.diagnostics.grid_points
            ));
        }
        let report = format_fit_report(&ctx.header("fit"), block, &prepared, &fit);
        ctx.write(&mut outcome, &format!("fit_{}.txt", block.name), &report)?;
    }
    Ok(outcome)
}

/// Fits and scores the selected models against their own data.
pub fn compare_models(cfg: &RunConfig, blocks_cfg: &[&ModelBlock], seed: u64) -> Result<ResidualReport> {
    let prepared = blocks_cfg.iter().map(|b| prepare_model(cfg, b)).collect::<Result<Vec<_>>>()?;
    let grid = prepared[0].data.grid;
    for p in &prepared[1..] {
        p.data.grid.ensure_same(&grid)?;
    }
    let fits = blocks_cfg
        .iter()
        .zip(&prepared)
        .map(|(b, p)| fit_prepared(cfg, b, p, seed))
        .collect::<Result<Vec<_>>>()?;
    let models = prepared
        .iter()
        .map(|p| ThinnedLgcp::new(&p.data, &p.spec))
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<ScoredModel> = models.iter().zip(&fits).map(|(model, fit)| ScoredModel { model, fit }).collect();
    let [rows, cols] = cfg.run.blocks;
    let partition = BlockPartition::new(grid, rows, cols)?;
    residual_crps_table(&scored, &partition)
}

/// Writes `compare.csv` and `compare.txt`.
pub fn cmd_compare(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let ctx = Ctx::new(cfg, opts)?;
    let blocks = ctx.selected_models()?;
    let report = compare_models(cfg, &blocks, ctx.seed)?;
    let mut outcome = Outcome::default();
    ctx.write(&mut outcome, "compare.csv", &report.to_csv())?;
    let text = format!("{}\n{}", ctx.header("compare"), report.to_text());
    ctx.write(&mut outcome, "compare.txt", &text)?;
    Ok(outcome)
}

pub const DEFAULT_TRIALS: usize = 20;

fn format_gradcheck(s: &mut String, model: &str, r: &GradcheckReport) {
    let status = if r.passed() { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "\n[{model}]");
    let _ = writeln!(s, "status = {status}");
    let _ = writeln!(s, "trials = {}", r.trials);
    let _ = writeln!(s, "tolerance = {}", r.tolerance);
    let _ = writeln!(s, "max_error = {}", fmt_f(r.max_error));
    if let Some(w) = &r.worst {
        let _ = writeln!(s, "worst = {} (trial {}, analytic {}, numeric {})", w.coordinate, w.trial, fmt_f(w.analytic), fmt_f(w.numeric));
    }
    if !r.worst_by_block.is_empty() {
        s.push_str("block,coordinate,trial,analytic,numeric,error\n");
        for (b, e) in &r.worst_by_block {
            let _ = writeln!(s, "{b},{},{},{},{},{}", e.coordinate, e.trial, fmt_f(e.analytic), fmt_f(e.numeric), fmt_f(e.error));
        }
    }
}

/// Gradient check of each selected model; writes `gradcheck.txt`.
pub fn cmd_gradcheck(cfg: &RunConfig, opts: &Options) -> Result<Outcome> {
    let ctx = Ctx::new(cfg, opts)?;
    let trials = opts.trials.unwrap_or(DEFAULT_TRIALS);
    let mut outcome = Outcome::default();
    if trials == 0 {
        outcome.warnings.push("no trials requested; the gradient check passes vacuously".into());
    }
    let mut s = ctx.header("gradcheck");
    for (i, block) in ctx.selected_models()?.into_iter().enumerate() {
        let prepared = prepare_model(cfg, block)?;
        let model = ThinnedLgcp::new(&prepared.data, &prepared.spec)?;
        let report = gradcheck_model(&model, trials, derive_seed(ctx.seed, SEED_GRADCHECK, i as u64))?;
        outcome.failed |= !report.passed();
        format_gradcheck(&mut s, &block.name, &report);
    }
    ctx.write(&mut outcome, "gradcheck.txt", &s)?;
    Ok(outcome)
}
