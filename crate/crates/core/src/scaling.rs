//! Scaling-method eigensolver.
//!
//! For a window centred at `k`, two boundary forms weighted by `1/(r.n)` are
//! filled on the desymmetrized boundary and diagonalized together. Each large
//! generalized eigenvalue `mu` gives a Dirichlet eigenvalue `k - 2/mu` and a
//! coefficient vector for the rescaled eigenfunction.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis_with, ScalingBasis, DEFAULT_BASIS_FACTOR, DEFAULT_KD};
use crate::error::{geometry, invalid, numerical, Result};
use crate::geometry::{BilliardDomain, BoundaryNode, Vec2};

/// Window half-width in units of `1/R_max`.
pub const WINDOW_RULE: f64 = 0.2;

/// Tunable solver parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub basis_factor: f64,
    pub kd: f64,
    pub pts_per_wavelength: f64,
    /// Relative cutoff on eigenvalues of `F`.
    pub truncation_tol: f64,
    /// Maximum accepted `|rellich_norm - 1|`.
    pub spurious_tol: f64,
    /// Largest accepted `|omega|`; `None` means `0.2 / R_max`.
    pub omega_max: Option<f64>,
    /// Distance between window centers; `None` means `omega_max`.
    pub step: Option<f64>,
    /// Modes from different windows closer than `dedupe_rel_tol * k` are merged.
    pub dedupe_rel_tol: f64,
    /// Re-solve each discovered mode in a window centred on it.
    pub refine: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            basis_factor: DEFAULT_BASIS_FACTOR,
            kd: DEFAULT_KD,
            pts_per_wavelength: 10.0,
            truncation_tol: 1e-12,
            spurious_tol: 1e-2,
            omega_max: None,
            step: None,
            dedupe_rel_tol: 1e-6,
            refine: true,
        }
    }
}

impl SolverParams {
    pub fn omega_max_for(&self, domain: &BilliardDomain) -> f64 {
        self.omega_max.unwrap_or(WINDOW_RULE / domain.r_max)
    }

    pub fn step_for(&self, domain: &BilliardDomain) -> f64 {
        self.step.unwrap_or_else(|| self.omega_max_for(domain))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("basis_factor", self.basis_factor),
            ("kd", self.kd),
            ("truncation_tol", self.truncation_tol),
            ("spurious_tol", self.spurious_tol),
            ("dedupe_rel_tol", self.dedupe_rel_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if self.pts_per_wavelength < 4.0 {
            return Err(invalid("solver.pts_per_wavelength must be at least 4"));
        }
        for (name, v) in [("omega_max", self.omega_max), ("step", self.step)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(invalid(format!("solver.{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Boundary forms `f` and `g` as dense matrices.
#[derive(Debug, Clone)]
pub struct FormMatrices {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub k: f64,
    pub node_count: usize,
}

/// Basis values and `r . grad` at each node, pre-weighted by `sqrt(w / r_n)`.
fn weighted_samples(basis: &ScalingBasis, nodes: &[BoundaryNode], scale: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = basis.len();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = nodes
        .par_iter()
        .map(|node| {
            if node.rn <= 0.0 {
                return Err(geometry(format!(
                    "form node at ({}, {}) has r.n = {:e}",
                    node.position.x, node.position.y, node.rn
                )));
            }
            let p = scale * node.position;
            let mut v = vec![0.0; n];
            let mut g = vec![Vec2::zeros(); n];
            basis.eval_into(p, &mut v, &mut g)?;
            let s = (node.weight / node.rn).sqrt();
            let rg = g.iter().map(|gl| s * p.dot(gl)).collect();
            v.iter_mut().for_each(|x| *x *= s);
            Ok((v, rg))
        })
        .collect::<Result<_>>()?;
    let a = DMatrix::from_fn(nodes.len(), n, |i, l| rows[i].0[l]);
    let b = DMatrix::from_fn(nodes.len(), n, |i, l| rows[i].1[l]);
    Ok((a, b))
}

/// `F_lm = sum w/r_n xi_l xi_m`, `G_lm = (1/k) sum w/r_n (xi_l r.grad xi_m + xi_m r.grad xi_l)`.
///
/// `nodes` must lie on the walls, where `r_n > 0`.
pub fn fill_forms(basis: &ScalingBasis, nodes: &[BoundaryNode]) -> Result<FormMatrices> {
    fill_forms_scaled(basis, nodes, 1.0)
}

/// Forms of the basis dilated by `scale`, i.e. evaluated at `scale * r`.
pub fn fill_forms_scaled(basis: &ScalingBasis, nodes: &[BoundaryNode], scale: f64) -> Result<FormMatrices> {
    if nodes.is_empty() {
        return Err(invalid("no quadrature nodes for the boundary forms"));
    }
    let (a, b) = weighted_samples(basis, nodes, scale)?;
    let f = a.tr_mul(&a);
    let ab = a.tr_mul(&b);
    let mut g = &ab + ab.transpose();
    g /= basis.k;
    let f = symmetrize(f);
    let g = symmetrize(g);
    Ok(FormMatrices { f, g, k: basis.k, node_count: nodes.len() })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Solution of the truncated generalized problem `G y = mu F y`.
#[derive(Debug, Clone)]
pub struct GeneralizedSolution {
    /// Sorted by decreasing `|mu|`.
    pub mu: Vec<f64>,
    /// Column `i` pairs with `mu[i]`; `Y^T F Y = I`.
    pub y: DMatrix<f64>,
    /// Dimension of the retained subspace of `F`.
    pub retained: usize,
}

pub fn solve_generalized(forms: &FormMatrices, truncation_tol: f64) -> Result<GeneralizedSolution> {
    let n = forms.f.nrows();
    if n == 0 || forms.f.ncols() != n || forms.g.shape() != (n, n) {
        return Err(invalid("form matrices must be square and of equal size"));
    }
    let fe = SymmetricEigen::new(forms.f.clone());
    let lmax = fe.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lmax > 0.0) {
        return Err(numerical("F has no positive eigenvalues"));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| fe.eigenvalues[i] > truncation_tol * lmax).collect();
    if keep.is_empty() {
        return Err(numerical("every eigenvalue of F was truncated"));
    }
    let r = keep.len();
    let b = DMatrix::from_fn(n, r, |i, j| fe.eigenvectors[(i, keep[j])] / fe.eigenvalues[keep[j]].sqrt());
    let h = symmetrize(b.tr_mul(&(&forms.g * &b)));
    let he = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| he.eigenvalues[j].abs().total_cmp(&he.eigenvalues[i].abs()));
    let w = DMatrix::from_fn(r, r, |i, j| he.eigenvectors[(i, order[j])]);
    Ok(GeneralizedSolution { mu: order.iter().map(|&i| he.eigenvalues[i]).collect(), y: &b * w, retained: r })
}

/// One Dirichlet eigenfunction found by a window.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    pub k: f64,
    /// `k_center - k`
    pub omega: f64,
    pub mu: f64,
    /// Boundary estimate of the norm before normalization; near 1 for genuine modes.
    pub rellich_norm: f64,
    /// Coefficients of the rescaled eigenfunction in the window basis, scaled
    /// so the eigenfunction has unit norm in the domain.
    pub coefficients: Vec<f64>,
    pub window: usize,
}

impl EigenMode {
    pub fn energy(&self) -> f64 {
        self.k * self.k
    }

    /// Dilation applied to points before evaluating the window basis.
    pub fn scale(&self, basis: &ScalingBasis) -> f64 {
        self.k / basis.k
    }

    /// Value and gradient of the eigenfunction at `p`.
    pub fn eval(&self, basis: &ScalingBasis, p: Vec2) -> Result<(f64, Vec2)> {
        let mut v = vec![0.0; basis.len()];
        let mut g = vec![Vec2::zeros(); basis.len()];
        self.eval_with(basis, p, &mut v, &mut g)
    }

    /// As [`eval`](Self::eval) with scratch buffers of basis length.
    pub fn eval_with(&self, basis: &ScalingBasis, p: Vec2, v: &mut [f64], g: &mut [Vec2]) -> Result<(f64, Vec2)> {
        let s = self.scale(basis);
        basis.eval_into(s * p, v, g)?;
        Ok(combine(&self.coefficients, v, g, s))
    }
}

fn combine(c: &[f64], v: &[f64], g: &[Vec2], scale: f64) -> (f64, Vec2) {
    let mut u = 0.0;
    let mut grad = Vec2::zeros();
    for ((cl, vl), gl) in c.iter().zip(v).zip(g) {
        u += cl * vl;
        grad += *cl * gl;
    }
    (u, scale * grad)
}

/// Boundary integrals of one candidate over the walls: the Rellich estimate
/// `(1/2E) sum w r_n (d_n u)^2` and the exact interior norm `(1/2E) sum w [r_n (E u^2 - |grad u|^2) + 2 (r.grad u)(d_n u)]`.
fn wall_norms(basis: &ScalingBasis, coeffs: &[f64], k_i: f64, nodes: &[BoundaryNode]) -> Result<(f64, f64)> {
    let s = k_i / basis.k;
    let e = k_i * k_i;
    let (rel, full) = nodes
        .par_iter()
        .map(|node| {
            let mut v = vec![0.0; basis.len()];
            let mut g = vec![Vec2::zeros(); basis.len()];
            basis.eval_into(s * node.position, &mut v, &mut g)?;
            let (u, grad) = combine(coeffs, &v, &g, s);
            let un = node.normal.dot(&grad);
            let ur = node.position.dot(&grad);
            let rel = node.weight * node.rn * un * un;
            let full = node.weight * (node.rn * (e * u * u - grad.norm_squared()) + 2.0 * ur * un);
            Ok((rel, full))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok((rel / (2.0 * e), full / (2.0 * e)))
}

/// Turns the largest generalized eigenvalues into modes.
///
/// A `Y` column has unit `f`-norm while the dilated unit-norm eigenfunction
/// has `f = 2 w^2 (1 - w/k_i)`, which fixes the coefficient scale. Candidates
/// whose Rellich estimate is off by more than `spurious_tol` are dropped and
/// the rest are rescaled to unit interior norm.
pub fn extract_modes(
    solution: &GeneralizedSolution,
    basis: &ScalingBasis,
    nodes: &[BoundaryNode],
    omega_max: f64,
    spurious_tol: f64,
    window: usize,
) -> Result<Vec<EigenMode>> {
    extract_selected(solution, basis, nodes, Selection::Within(omega_max), spurious_tol, window)
}

/// Which candidates of a window are worth normalizing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// All with `|omega|` up to the bound.
    Within(f64),
    /// Only the candidate closest to this wavenumber, if within the bound.
    Nearest { k: f64, omega_max: f64 },
}

fn extract_selected(
    solution: &GeneralizedSolution,
    basis: &ScalingBasis,
    nodes: &[BoundaryNode],
    selection: Selection,
    spurious_tol: f64,
    window: usize,
) -> Result<Vec<EigenMode>> {
    let omega_max = match selection {
        Selection::Within(w) | Selection::Nearest { omega_max: w, .. } => w,
    };
    let mut picked: Vec<(usize, f64)> = solution
        .mu
        .iter()
        .enumerate()
        .take_while(|(_, &mu)| (2.0 / mu).abs() <= omega_max)
        .map(|(i, &mu)| (i, shift_from_mu(mu, basis.k)))
        .collect();
    if let Selection::Nearest { k, .. } = selection {
        let dist = |w: f64| (basis.k - w - k).abs();
        picked = picked.into_iter().min_by(|a, b| dist(a.1).total_cmp(&dist(b.1))).into_iter().collect();
    }
    let mut modes = Vec::new();
    for (i, omega) in picked {
        let mu = solution.mu[i];
        let k_i = basis.k - omega;
        let amp = (2.0 * omega * omega * (1.0 - omega / k_i)).sqrt();
        let mut coefficients: Vec<f64> = solution.y.column(i).iter().map(|y| amp * y).collect();
        let (rellich_norm, norm2) = wall_norms(basis, &coefficients, k_i, nodes)?;
        if !((rellich_norm - 1.0).abs() <= spurious_tol) || !(norm2 > 0.0) {
            continue;
        }
        let inv = norm2.sqrt().recip();
        coefficients.iter_mut().for_each(|c| *c *= inv);
        modes.push(EigenMode { k: k_i, omega, mu, rellich_norm, coefficients, window });
    }
    modes.sort_by(|a, b| a.k.total_cmp(&b.k));
    Ok(modes)
}

/// Wavenumber shift `k - k_i` from a generalized eigenvalue.
///
/// For a dilated eigenfunction the boundary form behaves as
/// `f = 2E (w/k_i)^2 (1 - w/k_i + O(w^2))`, so `2/mu` overshoots the shift
/// `w` by `w^2 / 2k_i`; that term is removed here.
pub fn shift_from_mu(mu: f64, k_center: f64) -> f64 {
    let a = 2.0 / mu;
    a - a * a / (2.0 * (k_center - a))
}

/// A solved window: its basis and accepted modes.
#[derive(Debug, Clone)]
pub struct WindowSolution {
    pub id: usize,
    pub basis: Arc<ScalingBasis>,
    pub modes: Vec<EigenMode>,
    pub retained: usize,
}

/// Full scaling-method solve at one center wavenumber.
pub fn solve_window(domain: &BilliardDomain, k_center: f64, params: &SolverParams, id: usize) -> Result<WindowSolution> {
    solve_window_selecting(domain, k_center, params, id, Selection::Within(params.omega_max_for(domain)))
}

pub fn solve_window_selecting(
    domain: &BilliardDomain,
    k_center: f64,
    params: &SolverParams,
    id: usize,
    selection: Selection,
) -> Result<WindowSolution> {
    params.validate()?;
    let basis = build_basis_with(domain, k_center, params.basis_factor, params.kd)?;
    let nodes = domain.quadrature(k_center, params.pts_per_wavelength, false);
    let forms = fill_forms(&basis, &nodes)?;
    let sol = solve_generalized(&forms, params.truncation_tol)?;
    let modes = extract_selected(&sol, &basis, &nodes, selection, params.spurious_tol, id)?;
    Ok(WindowSolution { id, basis: Arc::new(basis), modes, retained: sol.retained })
}

/// Merged, deduplicated modes over a wavenumber interval.
#[derive(Debug, Clone)]
pub struct SpectrumCatalog {
    pub k_lo: f64,
    pub k_hi: f64,
    /// Indexed by `EigenMode::window`.
    pub windows: Vec<WindowSolution>,
    /// Strictly increasing in `k`.
    pub modes: Vec<EigenMode>,
    /// Candidates merged into a better-centred duplicate.
    pub merged: usize,
}

impl SpectrumCatalog {
    pub fn basis_of(&self, mode: &EigenMode) -> &ScalingBasis {
        &self.windows[mode.window].basis
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.k).collect()
    }
}

/// Window centers `k_lo, k_lo + step, ...` up to the first one at or past `k_hi`.
pub fn window_centers(k_lo: f64, k_hi: f64, step: f64) -> Vec<f64> {
    let count = ((k_hi - k_lo) / step).ceil().max(0.0) as usize + 1;
    (0..count).map(|j| k_lo + j as f64 * step).collect()
}

/// Keeps the candidate with smallest `|omega|` among those closer than `tol * k`.
pub fn dedupe_modes(mut candidates: Vec<EigenMode>, rel_tol: f64) -> (Vec<EigenMode>, usize) {
    candidates.sort_by(|a, b| a.k.total_cmp(&b.k));
    let mut out: Vec<EigenMode> = Vec::with_capacity(candidates.len());
    let mut merged = 0;
    for m in candidates {
        if let Some(last) = out.last_mut() {
            if m.window != last.window && (m.k - last.k).abs() < rel_tol * m.k {
                merged += 1;
                if m.omega.abs() < last.omega.abs() {
                    *last = m;
                }
                continue;
            }
        }
        out.push(m);
    }
    (out, merged)
}

/// Re-solves in a window centred `offset` above the mode, repeating while
/// the estimate moves by more than `offset`.
///
/// Shifts much smaller than `offset` are avoided on purpose: as `omega -> 0`
/// the mode falls into the truncated null space of `F` and its coefficients
/// lose accuracy.
pub fn refine_mode(
    domain: &BilliardDomain,
    mode: &EigenMode,
    params: &SolverParams,
    offset: f64,
    id: usize,
) -> Result<Option<WindowSolution>> {
    let mut k = mode.k;
    for _ in 0..MAX_REFINE_STEPS {
        let selection = Selection::Nearest { k, omega_max: params.omega_max_for(domain) };
        let mut w = solve_window_selecting(domain, k + offset, params, id, selection)?;
        let Some(best) = w.modes.first().cloned() else {
            return Ok(None);
        };
        if (best.k - k).abs() <= offset {
            w.modes = vec![best];
            return Ok(Some(w));
        }
        k = best.k;
    }
    Ok(None)
}

const MAX_REFINE_STEPS: usize = 4;

/// Solves windows covering `[k_lo, k_hi]` and merges their modes; modes are
/// restricted to `k_lo <= k < k_hi`.
///
/// With `params.refine`, each window seeds the modes within slightly more
/// than half a step of its center, plus farther ones no other window seeded.
/// Every seed is then re-solved in a window centred on it.
pub fn scan_spectrum(domain: &BilliardDomain, k_lo: f64, k_hi: f64, params: &SolverParams) -> Result<SpectrumCatalog> {
    params.validate()?;
    if !(k_lo > 0.0 && k_hi > k_lo) {
        return Err(invalid(format!("bad wavenumber range [{k_lo}, {k_hi}]")));
    }
    let omega_max = params.omega_max_for(domain);
    let step = params.step_for(domain);
    if step > 1.5 * omega_max {
        return Err(invalid(format!("window step {step} exceeds 1.5 omega_max = {}", 1.5 * omega_max)));
    }
    let centers = window_centers(k_lo, k_hi, step);
    let margin = OWNERSHIP_MARGIN * step;
    let owned_reach = omega_max.min(0.5 * step + margin);
    let selection = if params.refine {
        Selection::Within(DISCOVERY_REACH * omega_max)
    } else {
        Selection::Within(omega_max)
    };
    let mut windows: Vec<WindowSolution> = centers
        .par_iter()
        .enumerate()
        .map(|(id, &kc)| solve_window_selecting(domain, kc, params, id, selection))
        .collect::<Result<_>>()?;
    let in_range = |m: &EigenMode| m.k >= k_lo - margin && m.k < k_hi + margin;
    let candidates: Vec<EigenMode> = if params.refine {
        let mut owned: Vec<EigenMode> = windows
            .iter()
            .flat_map(|w| w.modes.iter().filter(|m| in_range(m) && m.omega.abs() <= owned_reach).cloned())
            .collect();
        // A level sitting on a window centre is lost there; its neighbours
        // then see it beyond their own half-step.
        let match_tol = REFINE_OFFSET * omega_max;
        let strays: Vec<EigenMode> = windows
            .iter()
            .flat_map(|w| w.modes.iter().filter(|m| in_range(m) && m.omega.abs() > owned_reach))
            .filter(|m| !owned.iter().any(|o| (o.k - m.k).abs() < match_tol))
            .cloned()
            .collect();
        owned.extend(strays);
        let first = windows.len();
        let offset = REFINE_OFFSET * omega_max;
        let refined: Vec<Option<WindowSolution>> = owned
            .par_iter()
            .enumerate()
            .map(|(j, m)| refine_mode(domain, m, params, offset, first + j))
            .collect::<Result<_>>()?;
        let mut out = Vec::new();
        for w in refined.into_iter().flatten() {
            let mut w = w;
            w.id = windows.len();
            for m in &mut w.modes {
                m.window = w.id;
            }
            out.extend(w.modes.iter().cloned());
            windows.push(w);
        }
        out
    } else {
        windows.iter().flat_map(|w| w.modes.iter().cloned()).collect()
    };
    let candidates = candidates.into_iter().filter(|m| m.k >= k_lo && m.k < k_hi).collect();
    let (modes, merged) = dedupe_modes(candidates, params.dedupe_rel_tol);
    Ok(SpectrumCatalog { k_lo, k_hi, windows, modes, merged })
}

/// Extra fraction of a step beyond the half-step a window owns.
const OWNERSHIP_MARGIN: f64 = 0.15;
/// Discovery windows report candidates out to this multiple of `omega_max`,
/// so every level is seen by two windows.
const DISCOVERY_REACH: f64 = 1.2;
/// Shift of refinement windows as a fraction of `omega_max`.
const REFINE_OFFSET: f64 = 0.05;

/// Two-term Weyl estimate `(A/4pi) E - (L/4pi) sqrt(E)` with the full perimeter.
pub fn weyl_count(domain: &BilliardDomain, e: f64) -> f64 {
    let four_pi = 4.0 * std::f64::consts::PI;
    domain.area / four_pi * e - domain.perimeter_full / four_pi * e.sqrt()
}

/// Weyl fluctuation analysis of a catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylReport {
    pub energies: Vec<f64>,
    /// `N(E) - N_Weyl(E)` just above each level, up to an additive constant.
    pub delta: Vec<f64>,
    /// Centered mean of `delta` over `2 half_width + 1` levels.
    pub running_mean: Vec<f64>,
    /// Largest single-level `|delta - running_mean|`.
    pub max_level_deviation: f64,
    /// Extreme changes between the mean of `delta` over `half_width` levels
    /// after a point and over `half_width` levels before it. A missing level
    /// shows up as a drop near -1, an extra one as a rise near +1.
    pub largest_drop: f64,
    pub largest_rise: f64,
    pub half_width: usize,
}

impl WeylReport {
    pub fn max_jump(&self) -> f64 {
        self.largest_rise.max(-self.largest_drop)
    }

    /// True when no sustained jump reaches `threshold`.
    pub fn is_complete(&self, threshold: f64) -> bool {
        self.max_jump() < threshold
    }
}

/// Levels averaged on each side when looking for sustained jumps.
pub const DEFAULT_WEYL_HALF_WIDTH: usize = 25;

/// Level count along the catalog minus the Weyl estimate. Counts start at the
/// first catalog level, so only the fluctuations are meaningful.
pub fn weyl_check(wavenumbers: &[f64], domain: &BilliardDomain, half_width: usize) -> Result<WeylReport> {
    let n = wavenumbers.len();
    if half_width == 0 || n < 2 * half_width + 1 {
        return Err(invalid(format!("weyl check needs at least {} levels, got {n}", 2 * half_width + 1)));
    }
    let energies: Vec<f64> = wavenumbers.iter().map(|k| k * k).collect();
    let delta: Vec<f64> = energies.iter().enumerate().map(|(i, &e)| (i + 1) as f64 - weyl_count(domain, e)).collect();
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(delta.iter().scan(0.0, |s, d| {
            *s += d;
            Some(*s)
        }))
        .collect();
    let mean = |a: usize, b: usize| (prefix[b] - prefix[a]) / (b - a) as f64;
    let running_mean: Vec<f64> = (0..n)
        .map(|i| mean(i.saturating_sub(half_width), (i + half_width + 1).min(n)))
        .collect();
    let max_level_deviation = delta.iter().zip(&running_mean).map(|(d, m)| (d - m).abs()).fold(0.0, f64::max);
    let mut largest_drop: f64 = 0.0;
    let mut largest_rise: f64 = 0.0;
    for i in half_width..=n - half_width {
        let step = mean(i, i + half_width) - mean(i - half_width, i);
        largest_drop = largest_drop.min(step);
        largest_rise = largest_rise.max(step);
    }
    Ok(WeylReport { energies, delta, running_mean, max_level_deviation, largest_drop, largest_rise, half_width })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_quarter_disk;

    #[test]
    fn identity_f_gives_g_eigenvalues() {
        let d = [3.0, -7.0, 0.5];
        let forms = FormMatrices {
            f: DMatrix::identity(3, 3),
            g: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&d)),
            k: 1.0,
            node_count: 0,
        };
        let sol = solve_generalized(&forms, 1e-12).unwrap();
        assert_eq!(sol.mu, vec![-7.0, 3.0, 0.5]);
        let yty = sol.y.tr_mul(&sol.y);
        assert!((yty - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn all_truncated_is_an_error() {
        let forms = FormMatrices { f: DMatrix::zeros(2, 2), g: DMatrix::identity(2, 2), k: 1.0, node_count: 0 };
        assert!(solve_generalized(&forms, 1e-12).is_err());
    }

    #[test]
    fn window_centers_cover_the_range() {
        let c = window_centers(5.0, 6.0, 0.3);
        assert_eq!(c.len(), 5);
        assert!(*c.last().unwrap() >= 6.0);
    }

    #[test]
    fn weyl_of_quarter_disk_matches_formula() {
        let d = build_quarter_disk();
        let e = 400.0;
        let expect = (std::f64::consts::PI / 4.0) / (4.0 * std::f64::consts::PI) * e
            - (2.0 + std::f64::consts::PI / 2.0) / (4.0 * std::f64::consts::PI) * 20.0;
        assert!((weyl_count(&d, e) - expect).abs() < 1e-12);
    }

    #[test]
    fn forms_reject_axis_nodes() {
        let d = build_quarter_disk();
        let b = crate::basis::build_basis(&d, 10.0, 1.5).unwrap();
        let nodes = d.quadrature(10.0, 10.0, true);
        assert!(fill_forms(&b, &nodes).is_err());
    }
}
