//! Matrix elements of a region indicator from boundary data alone.
//!
//! For Helmholtz solutions `u`, `v` the overlap over a region equals a
//! boundary integral over the region's boundary (equal energies: a
//! Rellich-type formula; distinct energies: Green's second identity), so
//! eigenfunctions are only ever evaluated on curves.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{region_interface_quadrature, BilliardDomain, BoundaryNode, ClosedChain, PolarRule, TestRegion, Vec2};
use crate::scaling::{EigenMode, SpectrumCatalog};
use crate::basis::ScalingBasis;

/// Pairs with `|k_u - k_v|` below this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Accepted wall residual of a trace, relative to `max |grad u| / k`.
pub const TRACE_TOL: f64 = 1e-4;

/// Quadrature nodes shared by several traces.
pub type Curve = Arc<Vec<BoundaryNode>>;

/// Values and gradients of one mode at the nodes of a curve.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub curve: Curve,
    pub k: f64,
    pub values: Vec<f64>,
    pub grads: Vec<Vec2>,
}

impl BoundaryTrace {
    pub fn energy(&self) -> f64 {
        self.k * self.k
    }

    /// Largest violation of `u = 0` and `grad u || n` on wall nodes, as
    /// `max(k |u|, |t . grad u|) / max |grad u|`.
    pub fn dirichlet_residual(&self) -> f64 {
        let scale = self.max_gradient();
        if scale == 0.0 {
            return 0.0;
        }
        self.curve
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.on_interface())
            .map(|(i, n)| {
                let tangent = Vec2::new(-n.normal.y, n.normal.x);
                (self.k * self.values[i].abs()).max(tangent.dot(&self.grads[i]).abs())
            })
            .fold(0.0, f64::max)
            / scale
    }

    pub fn max_gradient(&self) -> f64 {
        self.grads.iter().map(|g| g.norm()).fold(0.0, f64::max)
    }
}

pub fn boundary_trace(mode: &EigenMode, basis: &ScalingBasis, curve: &Curve) -> Result<BoundaryTrace> {
    if mode.coefficients.len() != basis.len() {
        return Err(invalid(format!(
            "mode has {} coefficients but the basis has {} functions",
            mode.coefficients.len(),
            basis.len()
        )));
    }
    let mut v = vec![0.0; basis.len()];
    let mut g = vec![Vec2::zeros(); basis.len()];
    let mut values = Vec::with_capacity(curve.len());
    let mut grads = Vec::with_capacity(curve.len());
    for node in curve.iter() {
        let (u, gu) = mode.eval_with(basis, node.position, &mut v, &mut g)?;
        values.push(u);
        grads.push(gu);
    }
    Ok(BoundaryTrace { curve: Arc::clone(curve), k: mode.k, values, grads })
}

fn same_curve(u: &BoundaryTrace, v: &BoundaryTrace) -> Result<()> {
    if Arc::ptr_eq(&u.curve, &v.curve) || *u.curve == *v.curve {
        Ok(())
    } else {
        Err(invalid("traces live on different curves"))
    }
}

/// `<u, v>` over the region enclosed by the curve, for `u`, `v` at the same energy `e`.
pub fn overlap_equal_energy(u: &BoundaryTrace, v: &BoundaryTrace, e: f64) -> Result<f64> {
    same_curve(u, v)?;
    if !(e > 0.0) {
        return Err(invalid(format!("energy must be positive, got {e}")));
    }
    let mut sum = 0.0;
    for (i, node) in u.curve.iter().enumerate() {
        let (gu, gv) = (u.grads[i], v.grads[i]);
        let n = node.normal;
        let r = node.position;
        let integrand = node.rn * (e * u.values[i] * v.values[i] - gu.dot(&gv)) + r.dot(&gu) * n.dot(&gv) + r.dot(&gv) * n.dot(&gu);
        sum += node.weight * integrand;
    }
    Ok(sum / (2.0 * e))
}

/// `<u, v>` over the region enclosed by the curve, for distinct energies.
pub fn overlap_distinct_energy(u: &BoundaryTrace, eu: f64, v: &BoundaryTrace, ev: f64) -> Result<f64> {
    same_curve(u, v)?;
    if (u.k - v.k).abs() < DEGENERACY_TOL || eu == ev {
        return Err(invalid("near-degenerate pair: use the equal-energy overlap"));
    }
    let sum: f64 = u
        .curve
        .iter()
        .enumerate()
        .map(|(i, node)| node.weight * (u.values[i] * node.normal.dot(&v.grads[i]) - v.values[i] * node.normal.dot(&u.grads[i])))
        .sum();
    Ok(sum / (eu - ev))
}

/// Overlap of two modes on a shared curve, choosing the identity by energy gap.
pub fn overlap(u: &BoundaryTrace, v: &BoundaryTrace) -> Result<f64> {
    if (u.k - v.k).abs() < DEGENERACY_TOL {
        overlap_equal_energy(u, v, u.k * v.k)
    } else {
        overlap_distinct_energy(u, u.energy(), v, v.energy())
    }
}

/// `Q_uv = sum w r_n (d_n u)(d_n v)` over the curve.
pub fn quasi_orthogonality(u: &BoundaryTrace, v: &BoundaryTrace) -> Result<f64> {
    same_curve(u, v)?;
    Ok(u.curve
        .iter()
        .enumerate()
        .map(|(i, node)| node.weight * node.rn * node.normal.dot(&u.grads[i]) * node.normal.dot(&v.grads[i]))
        .sum())
}

/// Boundary side of the general two-energy identity in two dimensions:
/// `(e^2/4) int r^2 u v = oint (E/e - e r^2/4)(u_n v - v_n u) + r_n (E uv/2 - grad u . grad v) + u_r v_n + v_r u_n`
/// with `e = E_u - E_v` and `E = E_u + E_v`.
pub fn diffgen_boundary(u: &BoundaryTrace, eu: f64, v: &BoundaryTrace, ev: f64) -> Result<f64> {
    same_curve(u, v)?;
    let eps = eu - ev;
    if eps == 0.0 {
        return Err(invalid("the two-energy identity needs distinct energies"));
    }
    let big = eu + ev;
    let mut sum = 0.0;
    for (i, node) in u.curve.iter().enumerate() {
        let r = node.position;
        let n = node.normal;
        let (uu, vv) = (u.values[i], v.values[i]);
        let (gu, gv) = (u.grads[i], v.grads[i]);
        let (un, vn) = (n.dot(&gu), n.dot(&gv));
        let integrand = (big / eps - eps * r.norm_squared() / 4.0) * (un * vv - vn * uu)
            + node.rn * (big * uu * vv / 2.0 - gu.dot(&gv))
            + r.dot(&gu) * vn
            + r.dot(&gv) * un;
        sum += node.weight * integrand;
    }
    Ok(sum)
}

/// Mismatch between `(e^2/4) int r^2 u v` (from `interior_r2_uv`, an
/// independent area integral) and its boundary form, relative to
/// `(e^2/4) max r^2`, which bounds the left side for unit-norm modes.
/// Pairs whose overlap vanishes by symmetry make a plain relative error
/// meaningless.
pub fn verify_diffgen_identity(u: &BoundaryTrace, eu: f64, v: &BoundaryTrace, ev: f64, interior_r2_uv: f64) -> Result<f64> {
    let rhs = diffgen_boundary(u, eu, v, ev)?;
    let scale = (eu - ev).powi(2) / 4.0;
    let r2 = u.curve.iter().map(|n| n.position.norm_squared()).fold(0.0, f64::max);
    Ok((scale * interior_r2_uv - rhs).abs() / (scale * r2))
}

/// Area integral of `f` over a chain by polar Gauss quadrature about the origin.
pub fn area_integral(chain: &ClosedChain, rule: PolarRule, f: impl Fn(Vec2) -> f64 + Sync) -> f64 {
    let nodes = chain.polar_quadrature(Vec2::zeros(), 0.0, std::f64::consts::FRAC_PI_2, rule);
    let terms: Vec<f64> = nodes.par_iter().map(|(p, w)| w * f(*p)).collect();
    terms.iter().sum()
}

/// Region boundary nodes fine enough for wavenumber `k`.
pub fn region_curve(region: &TestRegion, k: f64, pts_per_wavelength: f64) -> Result<Curve> {
    Ok(Arc::new(region_interface_quadrature(region, k, pts_per_wavelength)?))
}

/// Full-boundary nodes of the billiard.
pub fn domain_curve(domain: &BilliardDomain, k: f64, pts_per_wavelength: f64) -> Curve {
    Arc::new(domain.quadrature(k, pts_per_wavelength, true))
}

/// One diagonal element `<phi_n, 1_A phi_n>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalElement {
    /// Position in the catalog.
    pub index: usize,
    pub k: f64,
    pub value: f64,
}

/// Wavenumber span of modes sharing one region curve.
const CURVE_CHUNK: f64 = 5.0;

fn traces_for(catalog: &SpectrumCatalog, indices: &[usize], curve: &Curve) -> Result<Vec<BoundaryTrace>> {
    indices
        .par_iter()
        .map(|&i| {
            let m = &catalog.modes[i];
            boundary_trace(m, catalog.basis_of(m), curve)
        })
        .collect()
}

/// Diagonal elements of the region indicator for every catalog mode.
pub fn diagonal_elements(catalog: &SpectrumCatalog, region: &TestRegion, pts_per_wavelength: f64) -> Result<Vec<DiagonalElement>> {
    let mut out = Vec::with_capacity(catalog.modes.len());
    let mut start = 0;
    while start < catalog.modes.len() {
        let k0 = catalog.modes[start].k;
        let end = catalog.modes[start..].iter().position(|m| m.k >= k0 + CURVE_CHUNK).map_or(catalog.modes.len(), |p| start + p);
        let indices: Vec<usize> = (start..end).collect();
        let curve = region_curve(region, catalog.modes[end - 1].k, pts_per_wavelength)?;
        let traces = traces_for(catalog, &indices, &curve)?;
        for (&i, t) in indices.iter().zip(&traces) {
            let value = overlap_equal_energy(t, t, t.energy())?;
            out.push(DiagonalElement { index: i, k: t.k, value });
        }
        start = end;
    }
    Ok(out)
}

/// Dense block of matrix elements among a contiguous run of modes.
#[derive(Debug, Clone)]
pub struct ElementBlock {
    /// Catalog indices of the rows (and columns).
    pub indices: Vec<usize>,
    pub k: Vec<f64>,
    pub values: DMatrix<f64>,
    /// Area fraction of the region, the classical mean.
    pub mean: f64,
}

impl ElementBlock {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest `|A_nm - A_mn|`.
    pub fn asymmetry(&self) -> f64 {
        (&self.values - self.values.transpose()).amax()
    }
}

/// All elements among catalog modes with `k_lo <= k < k_hi`.
pub fn offdiagonal_block(
    catalog: &SpectrumCatalog,
    region: &TestRegion,
    k_lo: f64,
    k_hi: f64,
    pts_per_wavelength: f64,
) -> Result<ElementBlock> {
    let indices: Vec<usize> = (0..catalog.modes.len()).filter(|&i| (k_lo..k_hi).contains(&catalog.modes[i].k)).collect();
    if indices.is_empty() {
        return Err(invalid(format!("no modes in [{k_lo}, {k_hi})")));
    }
    let curve = region_curve(region, catalog.modes[*indices.last().unwrap()].k, pts_per_wavelength)?;
    let traces = traces_for(catalog, &indices, &curve)?;
    let n = indices.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| match a.cmp(&b) {
                    std::cmp::Ordering::Equal => overlap_equal_energy(&traces[a], &traces[a], traces[a].energy()),
                    std::cmp::Ordering::Less => overlap(&traces[a], &traces[b]),
                    std::cmp::Ordering::Greater => Ok(0.0),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut values = DMatrix::from_fn(n, n, |a, b| rows[a][b]);
    for a in 0..n {
        for b in 0..a {
            values[(a, b)] = values[(b, a)];
        }
    }
    Ok(ElementBlock { k: indices.iter().map(|&i| catalog.modes[i].k).collect(), indices, values, mean: region.area_fraction })
}
