//! Statistics of matrix elements: variance decay, power-law fits, prefactors,
//! band profile, extremes and the distribution of rescaled deviations.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{spectrum_value, PowerSpectrum};
use crate::elements::{DiagonalElement, ElementBlock};
use crate::error::{invalid, numerical, Result};
use crate::geometry::{BilliardDomain, ClosedChain, PolarRule, SegmentKind, Vec2};
use crate::scaling::weyl_count;

/// Windows with fewer modes are refused.
pub const MIN_WINDOW_MODES: usize = 50;
/// Symmetry factor for time-reversal-invariant flows.
pub const G_TRI: f64 = 2.0;
/// Deviations beyond this many standard deviations count as exceedances.
pub const EXCEEDANCE_SIGMAS: f64 = 5.0;

/// `V_A` over one window of consecutive levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub e_lo: f64,
    pub e_hi: f64,
    /// Mean energy of the window's levels.
    pub e_center: f64,
    pub m: usize,
    pub v: f64,
    /// `sqrt(2 / M)`
    pub rel_error: f64,
    /// Delete-one jackknife relative error.
    pub jackknife_rel_error: f64,
}

/// How levels are grouped into windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPlan {
    /// Consecutive runs of `size` levels; a trailing run shorter than
    /// [`MIN_WINDOW_MODES`] is dropped.
    ByCount { size: usize },
    /// Explicit energy windows `[lo, hi)`.
    ByEnergy { edges: Vec<(f64, f64)> },
}

fn variance_point(es: &[f64], devs: &[f64], e_lo: f64, e_hi: f64) -> Result<VariancePoint> {
    let m = devs.len();
    if m < MIN_WINDOW_MODES {
        return Err(invalid(format!("window [{e_lo}, {e_hi}) holds {m} modes; need at least {MIN_WINDOW_MODES}")));
    }
    let sq: Vec<f64> = devs.iter().map(|d| d * d).collect();
    let total: f64 = sq.iter().sum();
    let v = total / m as f64;
    let mf = m as f64;
    let jk_var = sq.iter().map(|s| ((total - s) / (mf - 1.0) - v).powi(2)).sum::<f64>() * (mf - 1.0) / mf;
    Ok(VariancePoint {
        e_lo,
        e_hi,
        e_center: es.iter().sum::<f64>() / mf,
        m,
        v,
        rel_error: (2.0 / mf).sqrt(),
        jackknife_rel_error: if v > 0.0 { jk_var.sqrt() / v } else { 0.0 },
    })
}

/// `V_A = M^{-1} sum |A_nn - mean|^2` per window.
pub fn variance_series(diag: &[DiagonalElement], mean: f64, plan: &WindowPlan) -> Result<Vec<VariancePoint>> {
    let mut sorted = diag.to_vec();
    sorted.sort_by(|a, b| a.k.total_cmp(&b.k));
    let energies: Vec<f64> = sorted.iter().map(|d| d.k * d.k).collect();
    let devs: Vec<f64> = sorted.iter().map(|d| d.value - mean).collect();
    let mut out = Vec::new();
    match plan {
        WindowPlan::ByCount { size } => {
            if *size < MIN_WINDOW_MODES {
                return Err(invalid(format!("window size {size} below the minimum {MIN_WINDOW_MODES}")));
            }
            let mut i = 0;
            while i + MIN_WINDOW_MODES <= sorted.len() {
                let j = (i + size).min(sorted.len());
                let hi = if j < sorted.len() { energies[j] } else { energies[j - 1] };
                out.push(variance_point(&energies[i..j], &devs[i..j], energies[i], hi)?);
                i = j;
            }
        }
        WindowPlan::ByEnergy { edges } => {
            for &(lo, hi) in edges {
                let idx: Vec<usize> = (0..sorted.len()).filter(|&i| energies[i] >= lo && energies[i] < hi).collect();
                let es: Vec<f64> = idx.iter().map(|&i| energies[i]).collect();
                let ds: Vec<f64> = idx.iter().map(|&i| devs[i]).collect();
                out.push(variance_point(&es, &ds, lo, hi)?);
            }
        }
    }
    Ok(out)
}

/// `V = a E^{-gamma}` fitted by weighted least squares in `log V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub gamma: f64,
    pub sigma_gamma: f64,
    pub a: f64,
    pub sigma_a: f64,
    pub e_min: f64,
    pub points: usize,
    pub chi2: f64,
    pub log_likelihood: f64,
}

impl PowerLawFit {
    pub fn variance_at(&self, e: f64) -> f64 {
        self.a * e.powf(-self.gamma)
    }
}

/// Weighted straight-line fit of `y = c + s x` with standard deviations `sigma`.
/// Returns `(c, s, cov)` with `cov = [var c, cov cs, var s]`.
fn weighted_line(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<(f64, f64, [f64; 3])> {
    let (mut s0, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let w = 1.0 / (sigma[i] * sigma[i]);
        s0 += w;
        sx += w * x[i];
        sxx += w * x[i] * x[i];
        sy += w * y[i];
        sxy += w * x[i] * y[i];
    }
    let det = s0 * sxx - sx * sx;
    if !(det > 1e-12 * s0 * sxx) {
        return Err(invalid("degenerate design: all points at the same energy"));
    }
    let s = (s0 * sxy - sx * sy) / det;
    let c = (sxx * sy - sx * sxy) / det;
    Ok((c, s, [sxx / det, -sx / det, s0 / det]))
}

/// Gaussian likelihood in `log V` with `sigma = sqrt(2/M)`, flat priors on
/// `(log a, gamma)`. The model is linear, so marginalizing over `log a` leaves
/// a Gaussian in `gamma` with the profile width.
pub fn fit_power_law(points: &[VariancePoint], e_min: f64) -> Result<PowerLawFit> {
    let used: Vec<&VariancePoint> = points.iter().filter(|p| p.e_lo >= e_min).collect();
    if used.len() < 4 {
        return Err(invalid(format!("need at least 4 points above E_min = {e_min}, have {}", used.len())));
    }
    if used.iter().any(|p| !(p.v > 0.0)) {
        return Err(invalid("variance points must be positive to fit in log space"));
    }
    let x: Vec<f64> = used.iter().map(|p| p.e_center.ln()).collect();
    let y: Vec<f64> = used.iter().map(|p| p.v.ln()).collect();
    let sig: Vec<f64> = used.iter().map(|p| p.rel_error).collect();
    let (c, s, cov) = weighted_line(&x, &y, &sig)?;
    let chi2: f64 = (0..x.len()).map(|i| ((y[i] - c - s * x[i]) / sig[i]).powi(2)).sum();
    let norm: f64 = sig.iter().map(|s| (TAU * s * s).ln()).sum();
    let a = c.exp();
    Ok(PowerLawFit {
        gamma: -s,
        sigma_gamma: cov[2].sqrt(),
        a,
        sigma_a: a * cov[0].sqrt(),
        e_min,
        points: used.len(),
        chi2,
        log_likelihood: -0.5 * (chi2 + norm),
    })
}

/// Prefactor of `V = a E^{-gamma}` with `gamma` held fixed: `(a, sigma_a)`.
pub fn fit_prefactor(points: &[VariancePoint], gamma: f64, e_min: f64) -> Result<(f64, f64)> {
    let used: Vec<&VariancePoint> = points.iter().filter(|p| p.e_lo >= e_min && p.v > 0.0).collect();
    if used.is_empty() {
        return Err(invalid("no positive variance points above E_min"));
    }
    let (mut sw, mut swy) = (0.0, 0.0);
    for p in used {
        let w = 1.0 / (p.rel_error * p.rel_error);
        sw += w;
        swy += w * (p.v.ln() + gamma * p.e_center.ln());
    }
    let a = (swy / sw).exp();
    Ok((a, a / sw.sqrt()))
}

/// Smallest candidate `E_min` (window lower edges) for which `gamma` moves by
/// less than one standard deviation when `E_min` is halved.
pub fn stable_e_min(points: &[VariancePoint]) -> Result<PowerLawFit> {
    let mut candidates: Vec<f64> = points.iter().map(|p| p.e_lo).collect();
    candidates.sort_by(|a, b| a.total_cmp(b));
    for &e in &candidates {
        let Ok(fit) = fit_power_law(points, e) else { break };
        let Ok(half) = fit_power_law(points, e / 2.0) else { continue };
        if (fit.gamma - half.gamma).abs() < fit.sigma_gamma {
            return Ok(fit);
        }
    }
    Err(numerical("no E_min gives a stable exponent"))
}

/// Fit of `V = a E^{-1/2} (1 - b E^{-beta})` with `a` held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedFit {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub sigma_b: f64,
    /// `beta` values whose profile `-2 log L` is within 1 of the minimum.
    pub beta_interval: (f64, f64),
    /// `(beta, b at the profile optimum, chi2)` on the scanned grid.
    pub surface: Vec<(f64, f64, f64)>,
    /// `b` is consistent with zero, so `beta` carries no information.
    pub beta_unidentified: bool,
    pub converged: bool,
}

fn corrected_chi2(points: &[VariancePoint], a: f64, b: f64, beta: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let f = 1.0 - b * p.e_center.powf(-beta);
            if f <= 0.0 {
                return f64::INFINITY;
            }
            let model = (a * p.e_center.powf(-0.5) * f).ln();
            ((p.v.ln() - model) / p.rel_error).powi(2)
        })
        .sum()
}

/// Golden-section minimum of `f` on `[lo, hi]`.
fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
        if (hi - lo).abs() < 1e-12 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Profile-likelihood scan over `beta` in `[0.02, 1.5]`, minimizing over `b` at each.
pub fn fit_corrected(points: &[VariancePoint], a: f64) -> Result<CorrectedFit> {
    if points.len() < 3 {
        return Err(invalid("corrected fit needs at least 3 points"));
    }
    if !(a > 0.0) {
        return Err(invalid("fixed prefactor must be positive"));
    }
    let e_min = points.iter().map(|p| p.e_center).fold(f64::INFINITY, f64::min);
    let mut surface = Vec::new();
    for i in 1..=75 {
        let beta = 0.02 * i as f64;
        let b_max = 0.999 * e_min.powf(beta);
        let b = golden(|b| corrected_chi2(points, a, b, beta), -10.0 * b_max, b_max);
        surface.push((beta, b, corrected_chi2(points, a, b, beta)));
    }
    let best = surface.iter().cloned().min_by(|x, y| x.2.total_cmp(&y.2)).unwrap();
    let converged = best.2.is_finite();
    let inside: Vec<f64> = surface.iter().filter(|s| s.2 <= best.2 + 1.0).map(|s| s.0).collect();
    let beta_interval = (inside.iter().cloned().fold(f64::INFINITY, f64::min), inside.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let (_, b, _) = best;
    let beta = best.0;
    let h = 1e-4 * b.abs().max(1.0);
    let c0 = corrected_chi2(points, a, b, beta);
    let curv = (corrected_chi2(points, a, b + h, beta) - 2.0 * c0 + corrected_chi2(points, a, b - h, beta)) / (h * h);
    // chi2 = -2 log L, so var b = 2 / chi2''
    let sigma_b = if curv > 0.0 { (2.0 / curv).sqrt() } else { f64::INFINITY };
    Ok(CorrectedFit {
        a,
        b,
        beta,
        sigma_b,
        beta_interval,
        surface,
        beta_unidentified: !(b.abs() > 2.0 * sigma_b),
        converged,
    })
}

/// Random-wave prefactor from two independent estimates of the Coulomb energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwPrefactor {
    pub a_rw: f64,
    pub monte_carlo: f64,
    pub monte_carlo_stderr: f64,
    pub quadrature: f64,
    /// `|mc - quad| / quad`
    pub disagreement: f64,
}

/// Largest allowed relative disagreement between the two Coulomb estimates.
pub const COULOMB_AGREEMENT: f64 = 5e-3;

fn chain_box(chain: &ClosedChain) -> (Vec2, Vec2) {
    let mut lo = Vec2::repeat(f64::INFINITY);
    let mut hi = Vec2::repeat(f64::NEG_INFINITY);
    for seg in chain.segments() {
        for j in 0..=256 {
            let p = seg.point(j as f64 / 256.0);
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
    }
    (lo, hi)
}

/// `int int 1/|r1 - r2|` over the chain's interior by Monte Carlo: `r1`
/// uniform in the region, `r2 = r1 + rho (cos t, sin t)` with `t` uniform and
/// `rho` uniform on `[0, rho_max]`. The `rho` Jacobian cancels the Coulomb
/// singularity, so the estimator is bounded. Returns `(mean, stderr)`.
pub fn coulomb_monte_carlo(chain: &ClosedChain, samples: usize, seed: u64) -> Result<(f64, f64)> {
    const CHUNK: usize = 1 << 16;
    if samples < 2 {
        return Err(invalid("Monte Carlo needs at least 2 samples"));
    }
    let (lo, hi) = chain_box(chain);
    let rho_max = (hi - lo).norm();
    let area = chain.area();
    let scale = area * TAU * rho_max;
    let chunks = samples.div_ceil(CHUNK);
    let hits: Vec<(usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let n = CHUNK.min(samples - c * CHUNK);
            let mut hit = 0;
            let mut drawn = 0;
            while drawn < n {
                let p = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
                if !chain.contains(p) {
                    continue;
                }
                drawn += 1;
                let t = rng.random_range(0.0..TAU);
                let rho = rng.random_range(0.0..rho_max);
                if chain.contains(p + rho * Vec2::new(t.cos(), t.sin())) {
                    hit += 1;
                }
            }
            (hit, n)
        })
        .collect();
    let (hit, n) = hits.iter().fold((0, 0), |acc, h| (acc.0 + h.0, acc.1 + h.1));
    let p = hit as f64 / n as f64;
    Ok((scale * p, scale * (p * (1.0 - p) / n as f64).sqrt()))
}

/// Total length of the ray from `p` at angle `theta` that lies inside the chain.
fn ray_length(chain: &ClosedChain, p: Vec2, theta: f64) -> f64 {
    chain.ray_inside_intervals(p, Vec2::new(theta.cos(), theta.sin())).iter().map(|(a, b)| b - a).sum()
}

/// Angles from `p` at which the ray's exit piece can change: vertex
/// directions and tangents to arc circles.
fn ray_breaks(chain: &ClosedChain, p: Vec2) -> Vec<f64> {
    let mut out = vec![0.0, TAU];
    let mut push = |a: f64| out.push(a.rem_euclid(TAU));
    for v in chain.vertices() {
        let d = v - p;
        if d.norm() > 1e-14 {
            push(d.y.atan2(d.x));
        }
    }
    for seg in chain.segments() {
        if let SegmentKind::Arc { center, radius, .. } = &seg.kind {
            let d = center - p;
            let dist = d.norm();
            if dist > *radius {
                let a = d.y.atan2(d.x);
                let half = (radius / dist).asin();
                push(a + half);
                push(a - half);
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    out
}

/// `int int 1/|r1 - r2|` in polar coordinates about each `r1`: the inner
/// integral is `int_0^{2pi} L(r1, t) dt` with `L` the ray length inside the
/// region, which removes the singularity exactly. The outer integral uses
/// the polar rule about `center` over `[theta_lo, theta_hi]`.
pub fn coulomb_quadrature(chain: &ClosedChain, center: Vec2, theta_lo: f64, theta_hi: f64, rule: PolarRule, inner_nodes: usize) -> f64 {
    let outer = chain.polar_quadrature(center, theta_lo, theta_hi, rule);
    let gl = crate::quadrature::gauss(inner_nodes);
    let terms: Vec<f64> = outer
        .par_iter()
        .map(|(p, w)| {
            let breaks = ray_breaks(chain, *p);
            let mut inner = 0.0;
            for b in breaks.windows(2) {
                if b[1] - b[0] < 1e-14 {
                    continue;
                }
                for (t, wt) in gl.mapped(b[0], b[1]) {
                    inner += wt * ray_length(chain, *p, t);
                }
            }
            w * inner
        })
        .collect();
    terms.iter().sum()
}

/// `a_RW = g / (pi vol) int int A(r1) A(r2) / |r1 - r2|`, where the region's
/// boundary chain has a corner at the origin and lies in the first quadrant.
pub fn rw_prefactor(region: &ClosedChain, domain: &BilliardDomain, g: f64, samples: usize, seed: u64) -> Result<RwPrefactor> {
    let (mc, se) = coulomb_monte_carlo(region, samples, seed)?;
    let quad = coulomb_quadrature(region, Vec2::zeros(), 0.0, std::f64::consts::FRAC_PI_2, PolarRule::new(20.0, 8.0), 24);
    let disagreement = (mc - quad).abs() / quad;
    if disagreement > COULOMB_AGREEMENT {
        return Err(numerical(format!("Coulomb estimates disagree: Monte Carlo {mc} vs quadrature {quad}")));
    }
    let pre = g / (PI * domain.area);
    Ok(RwPrefactor { a_rw: pre * quad, monte_carlo: pre * mc, monte_carlo_stderr: pre * se, quadrature: pre * quad, disagreement })
}

/// `int int 1/|r1 - r2|` over a disk of radius `r`: `16 pi r^3 / 3`.
pub fn disk_coulomb_energy(r: f64) -> f64 {
    16.0 * PI * r.powi(3) / 3.0
}

/// `a_FP = 2 C~(0) / vol` with its error.
pub fn fp_prefactor(spectrum: &PowerSpectrum, domain: &BilliardDomain) -> Result<(f64, f64)> {
    let (c0, err) = spectrum_value(spectrum, 0.0)?;
    Ok((2.0 * c0 / domain.area, 2.0 * err / domain.area))
}

/// Mean level spacing in wavenumber, `2 pi / (sqrt(E) vol)`.
pub fn level_spacing_k(e: f64, area: f64) -> f64 {
    TAU / (e.sqrt() * area)
}

/// One `omega` bin of the band profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandBin {
    pub omega: f64,
    pub pairs: usize,
    /// `Delta_k / (2 eps N_L) sum |A_nm|^2` over the block, at the block's mean energy.
    pub v_literal: f64,
    /// Mean over pairs of `|A_nm|^2 (E_nm / E_ref)^{1/2}`, with `E_nm = k_n k_m`.
    pub v_pairs: f64,
    pub err_pairs: f64,
    /// `C~(omega) / vol * E_ref^{-1/2}`
    pub v_classical: f64,
    pub err_classical: f64,
    /// `v_pairs / v_classical - 1`
    pub deviation: f64,
}

/// Off-diagonal variance against `omega = k_m - k_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProfile {
    pub e_ref: f64,
    pub delta_k: f64,
    pub n_levels: usize,
    pub bin_width: f64,
    pub eps: f64,
    pub bins: Vec<BandBin>,
    /// Sum of `|A_nm|^2` over all off-diagonal pairs in the blocks.
    pub total_weight: f64,
}

impl BandProfile {
    pub fn bin(&self, omega: f64) -> Option<&BandBin> {
        self.bins.iter().find(|b| (b.omega - omega).abs() < 0.5 * self.bin_width)
    }
}

/// Bins off-diagonal pairs of every block by `k_m - k_n` into bins of
/// `bin_width` centred on multiples of `bin_width`, out to `|omega| <= omega_max`.
/// `eps` is the bin half-width and must equal `bin_width / 2`.
pub fn band_profile(
    blocks: &[ElementBlock],
    spectrum: Option<&PowerSpectrum>,
    domain: &BilliardDomain,
    bin_width: f64,
    eps: f64,
    omega_max: f64,
) -> Result<BandProfile> {
    if (2.0 * eps - bin_width).abs() > 1e-12 {
        return Err(invalid("bin half-width must be half the bin width so bins tile"));
    }
    let nbin = (omega_max / bin_width).round() as i64;
    let count = (2 * nbin + 1) as usize;
    let mut sum = vec![0.0; count];
    let mut sum_scaled = vec![0.0; count];
    let mut sum_scaled_sq = vec![0.0; count];
    let mut pairs = vec![0usize; count];
    let mut energies = Vec::new();
    let mut total_weight = 0.0;
    for block in blocks {
        energies.extend(block.k.iter().map(|k| k * k));
    }
    if energies.is_empty() {
        return Err(invalid("no blocks"));
    }
    let e_ref = energies.iter().sum::<f64>() / energies.len() as f64;
    for block in blocks {
        for n in 0..block.len() {
            for m in 0..block.len() {
                if n == m {
                    continue;
                }
                let a2 = block.values[(n, m)].powi(2);
                total_weight += a2;
                let w = block.k[m] - block.k[n];
                let b = (w / bin_width).round() as i64;
                if b.abs() > nbin {
                    continue;
                }
                let i = (b + nbin) as usize;
                let scaled = a2 * (block.k[n] * block.k[m] / e_ref).sqrt();
                sum[i] += a2;
                sum_scaled[i] += scaled;
                sum_scaled_sq[i] += scaled * scaled;
                pairs[i] += 1;
            }
        }
    }
    let n_levels = energies.len();
    let delta_k = level_spacing_k(e_ref, domain.area);
    let mut bins = Vec::with_capacity(count);
    for i in 0..count {
        let omega = (i as i64 - nbin) as f64 * bin_width;
        let np = pairs[i];
        let v_pairs = if np > 0 { sum_scaled[i] / np as f64 } else { 0.0 };
        let err_pairs = if np > 1 {
            ((sum_scaled_sq[i] / np as f64 - v_pairs * v_pairs).max(0.0) / (np as f64 - 1.0)).sqrt()
        } else {
            f64::INFINITY
        };
        let (v_classical, err_classical) = match spectrum {
            Some(s) => {
                let (c, e) = spectrum_value(s, omega)?;
                (c / domain.area / e_ref.sqrt(), e / domain.area / e_ref.sqrt())
            }
            None => (f64::NAN, f64::NAN),
        };
        bins.push(BandBin {
            omega,
            pairs: np,
            v_literal: delta_k / (2.0 * eps * n_levels as f64) * sum[i],
            v_pairs,
            err_pairs,
            v_classical,
            err_classical,
            deviation: v_pairs / v_classical - 1.0,
        });
    }
    Ok(BandProfile { e_ref, delta_k, n_levels, bin_width, eps, bins, total_weight })
}

/// Diagonal variance over the profile's levels, rescaled to its reference energy.
pub fn scaled_diagonal_variance(diag: &[DiagonalElement], mean: f64, e_ref: f64) -> Result<(f64, f64)> {
    if diag.len() < 2 {
        return Err(invalid("need at least two diagonal elements"));
    }
    let v: Vec<f64> = diag.iter().map(|d| (d.value - mean).powi(2) * (d.k * d.k / e_ref).sqrt()).collect();
    let m = v.len() as f64;
    let mean_v = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean_v).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((mean_v, (var / m).sqrt()))
}

/// `g = V_A(E) / V_A(E; 0)` with a propagated error.
pub fn symmetry_factor(diag_variance: (f64, f64), profile: &BandProfile) -> Result<(f64, f64)> {
    let b = profile.bin(0.0).ok_or_else(|| invalid("profile has no omega = 0 bin"))?;
    if b.pairs < 2 || !(b.v_pairs > 0.0) {
        return Err(numerical("omega = 0 bin is empty"));
    }
    let g = diag_variance.0 / b.v_pairs;
    let rel = ((diag_variance.1 / diag_variance.0).powi(2) + (b.err_pairs / b.v_pairs).powi(2)).sqrt();
    Ok((g, g * rel))
}

/// Outcome of the search for non-equidistributing modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeReport {
    pub max: DiagonalElement,
    pub min: DiagonalElement,
    /// Levels whose deviation exceeds `5 V_A(E)^{1/2}`: `(catalog index, k, z)`.
    pub exceedances: Vec<(usize, f64, f64)>,
    pub density: f64,
    /// Rank of the largest `|A_nn - mean|` by energy, as a fraction of the levels.
    pub largest_rank: f64,
    /// The largest deviation lies in the lowest `low_fraction` of levels.
    pub extremes_at_low_e: bool,
}

pub fn extreme_scan(diag: &[DiagonalElement], mean: f64, fit: &PowerLawFit, low_fraction: f64) -> Result<ExtremeReport> {
    if diag.is_empty() {
        return Err(invalid("no diagonal elements"));
    }
    let mut sorted = diag.to_vec();
    sorted.sort_by(|a, b| a.k.total_cmp(&b.k));
    let max = *sorted.iter().max_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
    let min = *sorted.iter().min_by(|a, b| a.value.total_cmp(&b.value)).unwrap();
    let (rank, _) = sorted
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1.value - mean).abs().total_cmp(&(b.1.value - mean).abs()))
        .unwrap();
    let exceedances: Vec<(usize, f64, f64)> = sorted
        .iter()
        .map(|d| (d.index, d.k, (d.value - mean) / fit.variance_at(d.k * d.k).sqrt()))
        .filter(|(_, _, z)| z.abs() > EXCEEDANCE_SIGMAS)
        .collect();
    let largest_rank = rank as f64 / sorted.len() as f64;
    Ok(ExtremeReport {
        max,
        min,
        density: exceedances.len() as f64 / sorted.len() as f64,
        exceedances,
        largest_rank,
        extremes_at_low_e: largest_rank < low_fraction,
    })
}

/// Rescaled deviations `z_n` against a unit Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationHistogram {
    pub z: Vec<f64>,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Expected counts under a unit Gaussian.
    pub reference: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    /// All deviations equal: no meaningful shape.
    pub degenerate: bool,
}

/// Asymptotic Kolmogorov tail `Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        s += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sided one-sample KS test against the standard normal: `(D, p)`.
pub fn ks_normal(z: &[f64]) -> (f64, f64) {
    let n = z.len();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut s = z.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let d = s
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal.cdf(*x);
            (f - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - f)
        })
        .fold(0.0, f64::max);
    let sn = (n as f64).sqrt();
    (d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d))
}

pub fn deviation_histogram(diag: &[DiagonalElement], mean: f64, fit: &PowerLawFit, bins: usize, z_max: f64) -> Result<DeviationHistogram> {
    if diag.len() < 2 || bins == 0 {
        return Err(invalid("histogram needs at least two elements and one bin"));
    }
    let z: Vec<f64> = diag.iter().map(|d| (d.value - mean) / fit.variance_at(d.k * d.k).sqrt()).collect();
    let n = z.len() as f64;
    let zm = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|x| (x - zm).powi(2)).sum::<f64>() / (n - 1.0);
    let degenerate = !(var > 1e-300);
    let width = 2.0 * z_max / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| -z_max + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for x in &z {
        let i = ((x + z_max) / width).floor();
        if i >= 0.0 && (i as usize) < bins {
            counts[i as usize] += 1;
        }
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let reference = edges.windows(2).map(|e| n * (normal.cdf(e[1]) - normal.cdf(e[0]))).collect();
    let (ks_statistic, ks_p_value) = if degenerate { (1.0, 0.0) } else { ks_normal(&z) };
    Ok(DeviationHistogram { z, edges, counts, reference, mean: zm, variance: var, ks_statistic, ks_p_value, degenerate })
}

/// Cumulative `S_p(E) = N(E)^{-1} sum_{E_j <= E} |A_jj - mean|^p`, as `(E, S_p)`.
/// The elements must start at the ground state: `k_start`, the lower end of
/// the scanned range, may not exceed the first Weyl level.
pub fn moment_sums(diag: &[DiagonalElement], mean: f64, p: f64, domain: &BilliardDomain, k_start: f64) -> Result<Vec<(f64, f64)>> {
    if weyl_count(domain, k_start * k_start) > 0.5 {
        return Err(invalid(format!("spectrum starts at k = {k_start}; moment sums need every level from the ground state")));
    }
    let mut sorted = diag.to_vec();
    sorted.sort_by(|a, b| a.k.total_cmp(&b.k));
    let mut acc = 0.0;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, d)| {
            acc += (d.value - mean).abs().powf(p);
            (d.k * d.k, acc / (i + 1) as f64)
        })
        .collect())
}
