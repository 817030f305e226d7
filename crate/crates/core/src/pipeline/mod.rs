//! Staged experiment: classical spectrum, eigenmodes, matrix elements,
//! statistics, a summary report and the oracle suites.

mod config;
pub mod csv;
pub mod store;
pub mod verify;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::*;
use csv::{num, parse_num, Table};
pub use store::{covered_ranges, list_eigenmode_files, load_catalog, EigenmodeFile};

use crate::dynamics::{accumulate_periodograms, merge_batches, PowerSpectrum};
use crate::elements::{diagonal_elements, offdiagonal_block, DiagonalElement, ElementBlock};
use crate::error::{Error, Result};
use crate::geometry::{build_test_region, BilliardDomain, TestRegion};
use crate::scaling::{scan_spectrum, weyl_check, weyl_count, DEFAULT_WEYL_HALF_WIDTH};
use crate::stats::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Classical,
    Solve,
    Elements,
    Stats,
    Report,
    Verify,
}

/// Reference values the report compares against.
pub mod reference {
    pub const GAMMA_BF: (f64, f64) = (0.479, 0.009);
    pub const GAMMA_CONJECTURED: f64 = 0.5;
    pub const A_BF: f64 = 0.334;
    pub const A_RW: (f64, f64) = (0.5995, 0.001);
    pub const A_FP: (f64, f64) = (0.3550, 0.0004);
    pub const G: f64 = 2.0;
    pub const BAND_DEVIATION: f64 = 0.03;
    pub const EXCEEDANCE_BOUND: f64 = 3e-5;
}

/// Overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub kmin: Option<f64>,
    pub kmax: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        match (self.kmin, self.kmax) {
            (Some(lo), Some(hi)) => cfg.solver.ranges = vec![[lo, hi]],
            (None, None) => {}
            _ => return Err(Error::Config("--kmin and --kmax must be given together".into())),
        }
        cfg.validate()
    }
}

pub struct Paths {
    root: PathBuf,
}

impl Paths {
    pub fn new(root: &Path) -> Self {
        Paths { root: root.to_path_buf() }
    }
    pub fn classical(&self, f: &str) -> PathBuf {
        self.root.join("classical").join(f)
    }
    pub fn eigenmodes(&self) -> PathBuf {
        self.root.join("eigenmodes")
    }
    pub fn solve(&self, f: &str) -> PathBuf {
        self.root.join("solve").join(f)
    }
    pub fn elements(&self, f: &str) -> PathBuf {
        self.root.join("elements").join(f)
    }
    pub fn stats(&self, f: &str) -> PathBuf {
        self.root.join("stats").join(f)
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.csv")
    }
    pub fn verify(&self) -> PathBuf {
        self.root.join("verify.csv")
    }
}

fn block_name(lo: f64, hi: f64) -> String {
    format!("block_{lo}_{hi}.csv")
}

/// Result of a stage: files written and lines for the terminal.
#[derive(Debug, Default)]
pub struct StageOutput {
    pub artifacts: Vec<PathBuf>,
    pub summary: Vec<String>,
    /// False when a verification check failed.
    pub passed: bool,
}

pub fn run(cfg: &PipelineConfig, stage: Stage) -> Result<StageOutput> {
    cfg.validate()?;
    match stage {
        Stage::Classical => run_classical(cfg),
        Stage::Solve => run_solve(cfg),
        Stage::Elements => run_elements(cfg),
        Stage::Stats => run_stats(cfg),
        Stage::Report => run_report(cfg),
        Stage::Verify => run_verify(cfg),
    }
}

fn region_for(cfg: &PipelineConfig, domain: &BilliardDomain) -> Result<TestRegion> {
    build_test_region(domain, cfg.region.unit_normal(), cfg.region.fraction)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact { path: path.to_path_buf(), what: what.into() },
        _ => Error::Io(e),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })
}

/// Key-value table for scalar summaries.
fn summary_table(hash: &str, rows: &[(&str, f64)]) -> Table {
    let mut t = Table::new(hash, &["quantity", "value"]);
    for (k, v) in rows {
        t.push(vec![k.to_string(), num(*v)]);
    }
    t
}

/// Summary of the classical stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSummary {
    pub spectrum: PowerSpectrum,
    /// `C~(0)` of each batch.
    pub batch_c0: Vec<f64>,
    /// Relative error of `C~(0)` implied by the batch scatter.
    pub batch_rel_error: f64,
}

pub fn run_classical(cfg: &PipelineConfig) -> Result<StageOutput> {
    let hash = cfg.hash()?;
    let paths = Paths::new(&cfg.output_dir);
    let domain = cfg.build_domain()?;
    let region = region_for(cfg, &domain)?;
    let c = &cfg.classical;
    let batches = accumulate_periodograms(&domain, &region, c.seed, c.realizations, c.batches, c.duration, c.dt)?;
    let spectrum = merge_batches(&batches)?.finish(c.omega_sm, Some(c.omega_limit))?;
    let batch_c0: Vec<f64> = if c.batches > 1 {
        batches.iter().map(|b| b.finish(c.omega_sm, Some(0.0)).map(|s| s.values[0])).collect::<Result<_>>()?
    } else {
        vec![]
    };
    let batch_rel_error = if batch_c0.len() > 1 {
        let n = batch_c0.len() as f64;
        let m = batch_c0.iter().sum::<f64>() / n;
        let sd = (batch_c0.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        sd / n.sqrt() / m
    } else {
        f64::NAN
    };
    let mut out = StageOutput { passed: true, ..Default::default() };

    let mut t = Table::new(&hash, &["omega", "c", "err"]).meta("omega_sm", c.omega_sm).meta("realizations", spectrum.n_r);
    for (w, v) in spectrum.omega.iter().zip(&spectrum.values) {
        t.push(vec![num(*w), num(*v), num(v * spectrum.rel_error)]);
    }
    let p = paths.classical("spectrum.csv");
    t.write(&p)?;
    out.artifacts.push(p);

    let mut t = Table::new(&hash, &["batch", "c0"]);
    for (i, v) in batch_c0.iter().enumerate() {
        t.push(vec![i.to_string(), num(*v)]);
    }
    let p = paths.classical("batches.csv");
    t.write(&p)?;
    out.artifacts.push(p);

    let c0 = spectrum.values[spectrum.values.len() / 2];
    let (a_fp, a_fp_err) = fp_prefactor(&spectrum, &domain)?;
    let rows = [
        ("mean", spectrum.mean),
        ("variance", spectrum.variance),
        ("expected_variance", region.area_fraction * (1.0 - region.area_fraction)),
        ("parseval", spectrum.parseval),
        ("rel_error", spectrum.rel_error),
        ("batch_rel_error", batch_rel_error),
        ("c0", c0),
        ("t_corr", spectrum.t_corr),
        ("a_fp", a_fp),
        ("a_fp_err", a_fp_err),
    ];
    let p = paths.classical("summary.csv");
    summary_table(&hash, &rows).write(&p)?;
    out.artifacts.push(p);
    let p = paths.classical("spectrum.json");
    write_json(&p, &ClassicalSummary { spectrum, batch_c0, batch_rel_error })?;
    out.artifacts.push(p);
    out.summary = rows.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    Ok(out)
}

/// Chunks of at most `width` covering `[lo, hi)`.
pub fn chunks(lo: f64, hi: f64, width: f64) -> Vec<(f64, f64)> {
    let n = ((hi - lo) / width - 1e-9).ceil().max(1.0) as usize;
    (0..n).map(|i| (lo + i as f64 * width, if i + 1 == n { hi } else { lo + (i + 1) as f64 * width })).collect()
}

pub fn run_solve(cfg: &PipelineConfig) -> Result<StageOutput> {
    let hash = cfg.hash()?;
    let paths = Paths::new(&cfg.output_dir);
    let domain = cfg.build_domain()?;
    let dhash = domain_hash(&cfg.domain);
    let params = cfg.solver.params();
    std::fs::create_dir_all(paths.eigenmodes())?;
    let mut out = StageOutput { passed: true, ..Default::default() };
    let mut ks = Vec::new();
    let mut t = Table::new(&hash, &["k_lo", "k_hi", "modes", "weyl_estimate", "merged"]);
    for [lo, hi] in cfg.solver.normalized_ranges()? {
        for (a, b) in chunks(lo, hi, cfg.solver.chunk_width) {
            let catalog = scan_spectrum(&domain, a, b, &params)?;
            let file = EigenmodeFile::from_catalog(&catalog, dhash, params.kd, params.basis_factor);
            let p = paths.eigenmodes().join(format!("modes_{a}_{b}.{}", store::EXTENSION));
            file.write(&p)?;
            out.artifacts.push(p);
            let expected = weyl_count(&domain, b * b) - weyl_count(&domain, a * a);
            t.push(vec![num(a), num(b), catalog.modes.len().to_string(), num(expected), catalog.merged.to_string()]);
            ks.extend(catalog.wavenumbers());
        }
    }
    let p = paths.solve("chunks.csv");
    t.write(&p)?;
    out.artifacts.push(p);
    out.summary.push(format!("{} modes", ks.len()));
    match weyl_check(&ks, &domain, DEFAULT_WEYL_HALF_WIDTH) {
        Ok(w) => {
            let mut t = Table::new(&hash, &["energy", "delta", "running_mean"])
                .meta("largest_drop", w.largest_drop)
                .meta("largest_rise", w.largest_rise)
                .meta("max_level_deviation", w.max_level_deviation);
            for i in 0..w.energies.len() {
                t.push(vec![num(w.energies[i]), num(w.delta[i]), num(w.running_mean[i])]);
            }
            let p = paths.solve("weyl.csv");
            t.write(&p)?;
            out.artifacts.push(p);
            out.summary.push(format!("weyl: largest drop {:.3}, largest rise {:.3}", w.largest_drop, w.largest_rise));
        }
        Err(e) => out.summary.push(format!("weyl check skipped: {e}")),
    }
    Ok(out)
}

fn covered(ranges: &[(f64, f64)], lo: f64, hi: f64) -> bool {
    ranges.iter().any(|r| r.0 <= lo && hi <= r.1)
}

pub fn run_elements(cfg: &PipelineConfig) -> Result<StageOutput> {
    let hash = cfg.hash()?;
    let paths = Paths::new(&cfg.output_dir);
    let domain = cfg.build_domain()?;
    let region = region_for(cfg, &domain)?;
    let dhash = domain_hash(&cfg.domain);
    let files = list_eigenmode_files(&paths.eigenmodes())?;
    let ranges = covered_ranges(&files, &dhash)?;
    for [lo, hi] in normalize_ranges(&cfg.elements.blocks)? {
        if !covered(&ranges, lo, hi) {
            return Err(Error::MissingArtifact {
                path: paths.eigenmodes(),
                what: format!("block [{lo}, {hi}) is not covered by solved ranges {ranges:?}"),
            });
        }
    }
    let catalog = load_catalog(&files, &dhash, cfg.solver.dedupe_rel_tol)?;
    let ppw = cfg.elements.pts_per_wavelength;
    let diag = diagonal_elements(&catalog, &region, ppw)?;
    let coverage: Vec<String> = ranges.iter().map(|r| format!("{}:{}", r.0, r.1)).collect();
    let mut t = Table::new(&hash, &["index", "k", "energy", "value"]).meta("mean", region.area_fraction).meta("covered", coverage.join(";"));
    for d in &diag {
        t.push(vec![d.index.to_string(), num(d.k), num(d.k * d.k), num(d.value)]);
    }
    let mut out = StageOutput { passed: true, ..Default::default() };
    let p = paths.elements("diagonal.csv");
    t.write(&p)?;
    out.artifacts.push(p);
    out.summary.push(format!("{} diagonal elements", diag.len()));
    for [lo, hi] in normalize_ranges(&cfg.elements.blocks)? {
        let block = offdiagonal_block(&catalog, &region, lo, hi, ppw)?;
        let p = paths.elements(&block_name(lo, hi));
        write_block(&block, &hash, &p)?;
        out.summary.push(format!("block [{lo}, {hi}): {} modes", block.len()));
        out.artifacts.push(p);
    }
    Ok(out)
}

fn write_block(block: &ElementBlock, hash: &str, path: &Path) -> Result<()> {
    let mut t = Table::new(hash, &["n", "m", "k_n", "k_m", "value"]).meta("mean", block.mean);
    for a in 0..block.len() {
        for b in a..block.len() {
            t.push(vec![block.indices[a].to_string(), block.indices[b].to_string(), num(block.k[a]), num(block.k[b]), num(block.values[(a, b)])]);
        }
    }
    t.write(path)
}

fn read_block(path: &Path) -> Result<ElementBlock> {
    let t = Table::read(path, "off-diagonal block; run `bque elements` with this block configured")?;
    let (cn, cm, ckn, ckm, cv) = (t.column("n", path)?, t.column("m", path)?, t.column("k_n", path)?, t.column("k_m", path)?, t.column("value", path)?);
    let bad = |r: &str| Error::Format { path: path.to_path_buf(), reason: r.into() };
    let mut index: Vec<(usize, f64)> = Vec::new();
    for r in &t.rows {
        if r[cn] == r[cm] {
            index.push((r[cn].parse().map_err(|_| bad("bad index"))?, parse_num(&r[ckn], path)?));
        }
    }
    let pos = |i: usize| index.iter().position(|x| x.0 == i).ok_or_else(|| bad("off-diagonal entry without a diagonal"));
    let n = index.len();
    let mut values = nalgebra::DMatrix::zeros(n, n);
    for r in &t.rows {
        let a = pos(r[cn].parse().map_err(|_| bad("bad index"))?)?;
        let b = pos(r[cm].parse().map_err(|_| bad("bad index"))?)?;
        let v = parse_num(&r[cv], path)?;
        values[(a, b)] = v;
        values[(b, a)] = v;
        let _ = parse_num(&r[ckm], path)?;
    }
    let mean = t.get_meta("mean").map(|m| parse_num(m, path)).transpose()?.unwrap_or(f64::NAN);
    Ok(ElementBlock { indices: index.iter().map(|x| x.0).collect(), k: index.iter().map(|x| x.1).collect(), values, mean })
}

type DiagonalFile = (Vec<DiagonalElement>, f64, Vec<(f64, f64)>);

fn read_diagonal(path: &Path) -> Result<DiagonalFile> {
    let t = Table::read(path, "diagonal elements; run `bque elements` first")?;
    let (ci, ck, cv) = (t.column("index", path)?, t.column("k", path)?, t.column("value", path)?);
    let mut diag = Vec::with_capacity(t.rows.len());
    for r in &t.rows {
        diag.push(DiagonalElement {
            index: r[ci].parse().map_err(|_| Error::Format { path: path.to_path_buf(), reason: "bad index".into() })?,
            k: parse_num(&r[ck], path)?,
            value: parse_num(&r[cv], path)?,
        });
    }
    let mean = parse_num(t.get_meta("mean").unwrap_or("nan"), path)?;
    let mut ranges = Vec::new();
    for part in t.get_meta("covered").unwrap_or("").split(';').filter(|s| !s.is_empty()) {
        let (a, b) = part.split_once(':').ok_or_else(|| Error::Format { path: path.to_path_buf(), reason: "bad coverage".into() })?;
        ranges.push((parse_num(a, path)?, parse_num(b, path)?));
    }
    Ok((diag, mean, ranges))
}

/// Everything the report needs from the statistics stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub levels: usize,
    pub points: Vec<VariancePoint>,
    /// Absent with fewer than four windows.
    pub fit: Option<PowerLawFit>,
    pub e_min_stable: bool,
    /// `a` with the exponent fixed to one half.
    pub a_half: Option<(f64, f64)>,
    pub corrected: Option<CorrectedFit>,
    pub rw: RwPrefactor,
    pub a_fp: (f64, f64),
    pub symmetry_factor: Option<(f64, f64)>,
    /// Largest `|V_q / V_cl - 1|` over bins with `|omega| <= 3` and at least 200 pairs.
    pub band_max_deviation: Option<f64>,
    pub band_bins_used: usize,
    pub que: Option<QueSummary>,
}

/// Extremes and Gaussianity, which need the fitted variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueSummary {
    pub exceedance_density: f64,
    pub exceedances: usize,
    pub extremes_at_low_e: bool,
    pub largest_rank: f64,
    pub ks_p_value: f64,
    pub ks_levels: usize,
}

/// Bins entering the band comparison.
pub const BAND_MIN_PAIRS: usize = 200;
pub const BAND_OMEGA: f64 = 3.0;

pub fn band_deviation(profile: &BandProfile) -> (Option<f64>, usize) {
    let used: Vec<f64> = profile
        .bins
        .iter()
        .filter(|b| b.omega.abs() <= BAND_OMEGA + 1e-9 && b.pairs >= BAND_MIN_PAIRS)
        .map(|b| b.deviation.abs())
        .collect();
    (used.iter().cloned().reduce(f64::max), used.len())
}

pub fn run_stats(cfg: &PipelineConfig) -> Result<StageOutput> {
    let hash = cfg.hash()?;
    let paths = Paths::new(&cfg.output_dir);
    let domain = cfg.build_domain()?;
    let region = region_for(cfg, &domain)?;
    let s = &cfg.stats;
    let (diag, mean, coverage) = read_diagonal(&paths.elements("diagonal.csv"))?;
    if diag.is_empty() {
        return Err(Error::InvalidInput("no diagonal elements".into()));
    }
    let classical: ClassicalSummary = read_json(&paths.classical("spectrum.json"), "classical spectrum; run `bque classical` first")?;
    let spectrum = classical.spectrum;
    if let WindowPlan::ByEnergy { edges } = s.window_plan() {
        for (lo, hi) in edges {
            if !covered(&coverage, lo.sqrt(), hi.sqrt()) {
                return Err(Error::InvalidInput(format!("window E in [{lo}, {hi}) is only partly covered by solved ranges {coverage:?}")));
            }
        }
    }
    let points = variance_series(&diag, mean, &s.window_plan())?;
    if points.is_empty() {
        return Err(Error::InvalidInput(format!("no complete variance window among {} levels", diag.len())));
    }
    let fitted = match s.e_min {
        Some(e) => Some((fit_power_law(&points, e)?, true)),
        None => match stable_e_min(&points) {
            Ok(f) => Some((f, true)),
            Err(_) => fit_power_law(&points, 0.0).ok().map(|f| (f, false)),
        },
    };
    let a_fp = fp_prefactor(&spectrum, &domain)?;
    let corrected = fit_corrected(&points, a_fp.0).ok();
    let rw = rw_prefactor(region.chain(), &domain, G_TRI, s.coulomb_samples, s.coulomb_seed)?;
    let mut out = StageOutput { passed: true, ..Default::default() };

    let mut t = Table::new(&hash, &["e_lo", "e_hi", "e_center", "m", "v", "rel_error", "jackknife_rel_error"]).meta("mean", mean);
    for p in &points {
        t.push(vec![num(p.e_lo), num(p.e_hi), num(p.e_center), p.m.to_string(), num(p.v), num(p.rel_error), num(p.jackknife_rel_error)]);
    }
    let p = paths.stats("variance_series.csv");
    t.write(&p)?;
    out.artifacts.push(p);

    let mut blocks = Vec::new();
    for [lo, hi] in normalize_ranges(&cfg.elements.blocks)? {
        blocks.push(read_block(&paths.elements(&block_name(lo, hi)))?);
    }
    let (mut symmetry, mut band_max, mut band_used) = (None, None, 0);
    if !blocks.is_empty() {
        let profile = band_profile(&blocks, Some(&spectrum), &domain, s.bin_width, 0.5 * s.bin_width, s.band_omega_max)?;
        let mut t = Table::new(&hash, &["omega", "pairs", "v_q", "err_q", "v_cl", "err_cl", "ratio", "v_literal"])
            .meta("e_ref", profile.e_ref)
            .meta("levels", profile.n_levels);
        for b in &profile.bins {
            t.push(vec![
                num(b.omega),
                b.pairs.to_string(),
                num(b.v_pairs),
                num(b.err_pairs),
                num(b.v_classical),
                num(b.err_classical),
                num(b.v_pairs / b.v_classical),
                num(b.v_literal),
            ]);
        }
        let p = paths.stats("band_profile.csv");
        t.write(&p)?;
        out.artifacts.push(p);
        (band_max, band_used) = band_deviation(&profile);
        let in_blocks: Vec<DiagonalElement> = diag.iter().filter(|d| blocks.iter().any(|b| b.indices.contains(&d.index))).cloned().collect();
        symmetry = scaled_diagonal_variance(&in_blocks, mean, profile.e_ref).and_then(|v| symmetry_factor(v, &profile)).ok();
    }

    let mut sorted = diag.clone();
    sorted.sort_by(|a, b| a.k.total_cmp(&b.k));
    let mut qe = None;
    if let Some((fit, _)) = &fitted {
        let extremes = extreme_scan(&diag, mean, fit, s.low_fraction)?;
        let mut t = Table::new(&hash, &["kind", "index", "k", "value_or_z"]).meta("exceedance_density", extremes.density).meta("largest_rank", extremes.largest_rank);
        t.push(vec!["max".into(), extremes.max.index.to_string(), num(extremes.max.k), num(extremes.max.value)]);
        t.push(vec!["min".into(), extremes.min.index.to_string(), num(extremes.min.k), num(extremes.min.value)]);
        for (i, k, z) in &extremes.exceedances {
            t.push(vec!["exceedance".into(), i.to_string(), num(*k), num(*z)]);
        }
        let p = paths.stats("extremes.csv");
        t.write(&p)?;
        out.artifacts.push(p);

        let high = &sorted[(s.ks_from_fraction * sorted.len() as f64) as usize..];
        let hist = deviation_histogram(high, mean, fit, s.histogram_bins, s.z_max)?;
        let mut t = Table::new(&hash, &["z_lo", "z_hi", "count", "gaussian"])
            .meta("ks_statistic", hist.ks_statistic)
            .meta("ks_p_value", hist.ks_p_value)
            .meta("z_mean", hist.mean)
            .meta("z_variance", hist.variance);
        for i in 0..hist.counts.len() {
            t.push(vec![num(hist.edges[i]), num(hist.edges[i + 1]), hist.counts[i].to_string(), num(hist.reference[i])]);
        }
        let p = paths.stats("histogram.csv");
        t.write(&p)?;
        out.artifacts.push(p);
        qe = Some(QueSummary {
            exceedance_density: extremes.density,
            exceedances: extremes.exceedances.len(),
            extremes_at_low_e: extremes.extremes_at_low_e,
            largest_rank: extremes.largest_rank,
            ks_p_value: hist.ks_p_value,
            ks_levels: high.len(),
        });
    }

    if let Ok(m) = moment_sums(&diag, mean, 2.0, &domain, sorted[0].k) {
        let mut t = Table::new(&hash, &["energy", "s2"]);
        for (e, v) in m {
            t.push(vec![num(e), num(v)]);
        }
        let p = paths.stats("moments.csv");
        t.write(&p)?;
        out.artifacts.push(p);
    }

    let mut t = Table::new(&hash, &["quantity", "value", "error"]);
    let mut row = |k: &str, v: f64, e: f64| t.push(vec![k.into(), num(v), num(e)]);
    let a_half = match &fitted {
        Some((fit, _)) => {
            row("gamma", fit.gamma, fit.sigma_gamma);
            row("a", fit.a, fit.sigma_a);
            row("e_min", fit.e_min, 0.0);
            row("log_likelihood", fit.log_likelihood, 0.0);
            let a = fit_prefactor(&points, 0.5, fit.e_min)?;
            row("a_half", a.0, a.1);
            Some(a)
        }
        None => None,
    };
    row("a_rw", rw.a_rw, rw.monte_carlo_stderr);
    row("a_fp", a_fp.0, a_fp.1);
    if let Some(c) = &corrected {
        row("corrected_b", c.b, c.sigma_b);
        row("corrected_beta", c.beta, 0.5 * (c.beta_interval.1 - c.beta_interval.0));
    }
    let p = paths.stats("fit.csv");
    t.write(&p)?;
    out.artifacts.push(p);

    let summary = StatsSummary {
        levels: diag.len(),
        points,
        e_min_stable: fitted.as_ref().is_some_and(|f| f.1),
        fit: fitted.map(|f| f.0),
        a_half,
        corrected,
        rw,
        a_fp,
        symmetry_factor: symmetry,
        band_max_deviation: band_max,
        band_bins_used: band_used,
        que: qe,
    };
    let p = paths.stats("summary.json");
    write_json(&p, &summary)?;
    out.artifacts.push(p);
    out.summary.push(format!("{} levels in {} windows", summary.levels, summary.points.len()));
    match &summary.fit {
        Some(f) => out.summary.push(format!("gamma = {:.4} +- {:.4}, E_min = {}", f.gamma, f.sigma_gamma, f.e_min)),
        None => out.summary.push("too few windows for a power-law fit".into()),
    }
    Ok(out)
}

/// Rows of the summary table: quantity, measured, error, reference, reference error.
pub fn report_rows(s: &StatsSummary) -> Vec<(String, f64, f64, f64, f64)> {
    use reference::*;
    let mut r = Vec::new();
    if let Some(f) = &s.fit {
        r.push(("gamma_bf".to_string(), f.gamma, f.sigma_gamma, GAMMA_BF.0, GAMMA_BF.1));
        r.push(("gamma_conjectured".into(), f.gamma, f.sigma_gamma, GAMMA_CONJECTURED, 0.0));
    }
    if let Some(a) = s.a_half {
        r.push(("a_bf".into(), a.0, a.1, A_BF, f64::NAN));
    }
    r.push(("a_rw".into(), s.rw.a_rw, s.rw.monte_carlo_stderr, A_RW.0, A_RW.1));
    r.push(("a_fp".into(), s.a_fp.0, s.a_fp.1, A_FP.0, A_FP.1));
    if let Some(q) = &s.que {
        r.push(("exceedance_density".into(), q.exceedance_density, 0.0, EXCEEDANCE_BOUND, f64::NAN));
    }
    if let Some(g) = s.symmetry_factor {
        r.push(("symmetry_factor".into(), g.0, g.1, G, 0.0));
    }
    if let Some(d) = s.band_max_deviation {
        r.push(("band_max_deviation".into(), d, f64::NAN, BAND_DEVIATION, f64::NAN));
    }
    r
}

pub fn run_report(cfg: &PipelineConfig) -> Result<StageOutput> {
    let hash = cfg.hash()?;
    let paths = Paths::new(&cfg.output_dir);
    let s: StatsSummary = read_json(&paths.stats("summary.json"), "no statistics to report (empty inputs); run `bque stats` first")?;
    let rows = report_rows(&s);
    let mut t = Table::new(&hash, &["quantity", "measured", "error", "reference", "reference_error"]);
    let mut out = StageOutput { passed: true, ..Default::default() };
    out.summary.push(format!("{:<22} {:>12} {:>10} {:>10}", "quantity", "measured", "error", "reference"));
    for (q, m, e, r, re) in rows {
        out.summary.push(format!("{q:<22} {m:>12.5} {e:>10.2e} {r:>10.4}"));
        t.push(vec![q, num(m), num(e), num(r), num(re)]);
    }
    let p = paths.report();
    t.write(&p)?;
    out.artifacts.push(p);
    Ok(out)
}

pub fn run_verify(cfg: &PipelineConfig) -> Result<StageOutput> {
    let hash = cfg.hash()?;
    let checks = verify::run_all(&cfg.solver.params())?;
    let mut t = Table::new(&hash, &["check", "value", "limit", "passed", "detail"]);
    let mut out = StageOutput { passed: checks.iter().all(|c| c.passed), ..Default::default() };
    for c in &checks {
        out.summary.push(format!("{} {} = {:.3e} (limit {:.1e}) {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.limit, c.detail));
        t.push(vec![c.name.clone(), num(c.value), num(c.limit), c.passed.to_string(), c.detail.replace(',', ";")]);
    }
    let p = Paths::new(&cfg.output_dir).verify();
    t.write(&p)?;
    out.artifacts.push(p);
    Ok(out)
}
