//! TOML configuration of a full run, one table per stage.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{DEFAULT_BASIS_FACTOR, DEFAULT_KD};
use crate::error::{Error, Result};
use crate::geometry::{BilliardDomain, DomainShape, Vec2};
use crate::scaling::SolverParams;
use crate::stats::{WindowPlan, MIN_WINDOW_MODES};

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses one per core.
    pub workers: usize,
    pub domain: DomainShape,
    pub region: RegionConfig,
    pub classical: ClassicalConfig,
    pub solver: SolverConfig,
    pub elements: ElementsConfig,
    pub stats: StatsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output_dir: PathBuf::from("bque-out"),
            workers: 0,
            domain: DomainShape::Sinai { theta1: 0.4, theta2: 0.7 },
            region: RegionConfig::default(),
            classical: ClassicalConfig::default(),
            solver: SolverConfig::default(),
            elements: ElementsConfig::default(),
            stats: StatsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    /// Normal of the dividing line; need not be normalized.
    pub normal: [f64; 2],
    /// Area fraction of the side containing the origin.
    pub fraction: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig { normal: [1.0, 2.0], fraction: 0.55 }
    }
}

impl RegionConfig {
    pub fn unit_normal(&self) -> Vec2 {
        Vec2::new(self.normal[0], self.normal[1]).normalize()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub duration: f64,
    pub dt: f64,
    pub realizations: usize,
    pub omega_sm: f64,
    pub seed: u64,
    /// Realizations are split into this many batches for the scatter check.
    pub batches: usize,
    /// Largest `|omega|` kept in the spectrum file.
    pub omega_limit: f64,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig { duration: 1e4, dt: 0.02, realizations: 6000, omega_sm: 0.03, seed: 1, batches: 10, omega_limit: 8.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Wavenumber intervals `[lo, hi)` to solve.
    pub ranges: Vec<[f64; 2]>,
    /// Each range is solved and stored in chunks of this width in `k`.
    pub chunk_width: f64,
    pub basis_factor: f64,
    pub kd: f64,
    pub pts_per_wavelength: f64,
    pub truncation_tol: f64,
    pub spurious_tol: f64,
    pub omega_max: Option<f64>,
    pub step: Option<f64>,
    pub dedupe_rel_tol: f64,
    pub refine: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = SolverParams::default();
        SolverConfig {
            ranges: vec![[40.0, 160.0]],
            chunk_width: 5.0,
            basis_factor: DEFAULT_BASIS_FACTOR,
            kd: DEFAULT_KD,
            pts_per_wavelength: p.pts_per_wavelength,
            truncation_tol: p.truncation_tol,
            spurious_tol: p.spurious_tol,
            omega_max: p.omega_max,
            step: p.step,
            dedupe_rel_tol: p.dedupe_rel_tol,
            refine: p.refine,
        }
    }
}

impl SolverConfig {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            basis_factor: self.basis_factor,
            kd: self.kd,
            pts_per_wavelength: self.pts_per_wavelength,
            truncation_tol: self.truncation_tol,
            spurious_tol: self.spurious_tol,
            omega_max: self.omega_max,
            step: self.step,
            dedupe_rel_tol: self.dedupe_rel_tol,
            refine: self.refine,
        }
    }

    /// Ranges sorted by lower end; overlapping or empty ranges are an error.
    pub fn normalized_ranges(&self) -> Result<Vec<[f64; 2]>> {
        normalize_ranges(&self.ranges)
    }
}

pub fn normalize_ranges(ranges: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
    let mut r = ranges.to_vec();
    for [lo, hi] in &r {
        if !(*lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(config_error(format!("k range [{lo}, {hi}] must satisfy 0 < lo < hi")));
        }
    }
    r.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for w in r.windows(2) {
        if w[1][0] < w[0][1] {
            return Err(config_error(format!("k ranges [{}, {}] and [{}, {}] overlap", w[0][0], w[0][1], w[1][0], w[1][1])));
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElementsConfig {
    pub pts_per_wavelength: f64,
    /// Wavenumber intervals whose full off-diagonal blocks are computed.
    pub blocks: Vec<[f64; 2]>,
}

impl Default for ElementsConfig {
    fn default() -> Self {
        ElementsConfig { pts_per_wavelength: 10.0, blocks: vec![[75.0, 125.0]] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatsConfig {
    /// Levels per variance window when `window_edges` is empty.
    pub window_size: usize,
    /// Explicit energy windows `[lo, hi)`; overrides `window_size`.
    pub window_edges: Vec<[f64; 2]>,
    /// Fixed fit cut; `None` applies the stability rule.
    pub e_min: Option<f64>,
    pub bin_width: f64,
    pub band_omega_max: f64,
    pub coulomb_samples: usize,
    pub coulomb_seed: u64,
    pub histogram_bins: usize,
    pub z_max: f64,
    /// Fraction of lowest levels where the largest deviation is expected.
    pub low_fraction: f64,
    /// The Gaussianity test uses levels above this fraction of the catalog.
    pub ks_from_fraction: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            window_size: 200,
            window_edges: vec![],
            e_min: None,
            bin_width: 0.1,
            band_omega_max: 3.0,
            coulomb_samples: 4_000_000,
            coulomb_seed: 1,
            histogram_bins: 40,
            z_max: 5.0,
            low_fraction: 0.1,
            ks_from_fraction: 0.5,
        }
    }
}

impl StatsConfig {
    pub fn window_plan(&self) -> WindowPlan {
        if self.window_edges.is_empty() {
            WindowPlan::ByCount { size: self.window_size }
        } else {
            WindowPlan::ByEnergy { edges: self.window_edges.iter().map(|e| (e[0], e[1])).collect() }
        }
    }
}

pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_toml(cfg: &PipelineConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| config_error(e.to_string()))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("region.fraction", self.region.fraction),
            ("classical.duration", self.classical.duration),
            ("classical.dt", self.classical.dt),
            ("classical.omega_sm", self.classical.omega_sm),
            ("classical.omega_limit", self.classical.omega_limit),
            ("solver.chunk_width", self.solver.chunk_width),
            ("elements.pts_per_wavelength", self.elements.pts_per_wavelength),
            ("stats.bin_width", self.stats.bin_width),
            ("stats.band_omega_max", self.stats.band_omega_max),
            ("stats.z_max", self.stats.z_max),
            ("stats.low_fraction", self.stats.low_fraction),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_error(format!("{name} must be positive, got {v}")));
            }
        }
        if self.region.fraction >= 1.0 {
            return Err(config_error("region.fraction must lie in (0, 1)"));
        }
        let n = self.region.normal;
        if !(n[0].hypot(n[1]) > 0.0) {
            return Err(config_error("region.normal must be nonzero"));
        }
        if let DomainShape::Sinai { theta1, theta2 } = self.domain {
            if !(theta1 > 0.0 && theta2 > 0.0) {
                return Err(config_error("domain angles must be positive"));
            }
        }
        for (name, v) in [
            ("classical.realizations", self.classical.realizations),
            ("classical.batches", self.classical.batches),
            ("stats.coulomb_samples", self.stats.coulomb_samples),
            ("stats.histogram_bins", self.stats.histogram_bins),
        ] {
            if v == 0 {
                return Err(config_error(format!("{name} must be positive")));
            }
        }
        if self.classical.batches > self.classical.realizations {
            return Err(config_error("classical.batches exceeds classical.realizations"));
        }
        if self.stats.window_edges.is_empty() && self.stats.window_size < MIN_WINDOW_MODES {
            return Err(config_error(format!("stats.window_size must be at least {MIN_WINDOW_MODES}")));
        }
        if let Some(e) = self.stats.e_min {
            if !(e >= 0.0) {
                return Err(config_error("stats.e_min must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.stats.ks_from_fraction) {
            return Err(config_error("stats.ks_from_fraction must lie in [0, 1)"));
        }
        self.solver.params().validate().map_err(|e| config_error(e.to_string()))?;
        self.solver.normalized_ranges()?;
        normalize_ranges(&self.elements.blocks)?;
        normalize_ranges(&self.stats.window_edges)?;
        Ok(())
    }

    pub fn build_domain(&self) -> Result<BilliardDomain> {
        BilliardDomain::from_shape(self.domain)
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(to_toml(self)?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}

/// SHA-256 over the shape parameters' bit patterns.
pub fn domain_hash(shape: &DomainShape) -> [u8; 32] {
    let mut h = Sha256::new();
    match shape {
        DomainShape::Sinai { theta1, theta2 } => {
            h.update(b"sinai");
            h.update(theta1.to_le_bytes());
            h.update(theta2.to_le_bytes());
        }
        DomainShape::QuarterDisk => h.update(b"quarter_disk"),
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.solver.ranges = vec![[50.0, 60.0], [100.0, 102.0]];
        cfg.stats.e_min = Some(3000.0);
        cfg.domain = DomainShape::QuarterDisk;
        assert_eq!(parse_config(&to_toml(&cfg).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        assert!(matches!(parse_config("[classical]\nduration = -1.0\n"), Err(Error::Config(_))));
        assert!(parse_config("[classical]\nlength = 3.0\n").is_err());
        assert!(parse_config("colour = 1\n").is_err());
        assert!(parse_config("[domain]\nshape = \"sinai\"\ntheta1 = 0.4\ntheta2 = 0.7\ntheta3 = 1.0\n").is_err());
        assert!(parse_config("[solver]\nranges = [[40.0, 60.0], [50.0, 70.0]]\n").is_err());
    }
}
