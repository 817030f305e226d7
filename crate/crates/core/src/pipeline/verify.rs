//! Oracle suites run by `bque verify`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elements::{
    boundary_trace, diagonal_elements, domain_curve, overlap_distinct_energy, quasi_orthogonality, region_curve, verify_diffgen_identity, BoundaryTrace,
};
use crate::error::Result;
use crate::geometry::{build_quarter_disk, build_sinai_domain, build_test_region, BilliardDomain, ClosedChain, PolarRule, TestRegion, Vec2};
use crate::scaling::{scan_spectrum, SolverParams, SpectrumCatalog};
use crate::special::bessel_jn;

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn below(name: &str, value: f64, limit: f64, detail: String) -> Self {
        Check { name: name.into(), value, limit, passed: value < limit, detail }
    }
}

/// Zeros of `J_n` in `[lo, hi)` by scanning and bisection.
pub fn bessel_zeros(n: i32, lo: f64, hi: f64) -> Vec<f64> {
    let step = 0.05;
    let mut out = Vec::new();
    let mut x = lo.max(1e-6);
    let mut fx = bessel_jn(n, x);
    while x < hi {
        let y = (x + step).min(hi);
        let fy = bessel_jn(n, y);
        if fx * fy < 0.0 {
            let (mut a, mut b, mut fa) = (x, y, fx);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = bessel_jn(n, m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
        x = y;
        fx = fy;
    }
    out
}

/// Odd-odd quarter disk levels in `[lo, hi)`: zeros of `J_{2m}`, `m >= 1`.
pub fn quarter_disk_levels(lo: f64, hi: f64) -> Vec<f64> {
    let mut all: Vec<f64> = (1..)
        .map(|m| 2 * m)
        .take_while(|&n| (n as f64) < hi)
        .flat_map(|n| bessel_zeros(n, lo, hi))
        .filter(|z| *z >= lo && *z < hi)
        .collect();
    all.sort_by(|a, b| a.total_cmp(b));
    all
}

/// Compares a catalog with known levels: `(max relative error, count mismatch)`.
pub fn match_levels(found: &[f64], exact: &[f64]) -> (f64, usize) {
    let mismatch = found.len().abs_diff(exact.len());
    let err = exact
        .iter()
        .map(|z| found.iter().map(|k| ((k - z) / z).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    (err, mismatch)
}

pub fn quarter_disk_suite(params: &SolverParams) -> Result<Vec<Check>> {
    let domain = build_quarter_disk();
    let catalog = scan_spectrum(&domain, 5.0, 30.0, params)?;
    let exact = quarter_disk_levels(5.0, 30.0);
    let (err, mismatch) = match_levels(&catalog.wavenumbers(), &exact);
    Ok(vec![
        Check::below("quarter_disk.level_count", mismatch as f64, 0.5, format!("{} found, {} exact", catalog.modes.len(), exact.len())),
        Check::below("quarter_disk.level_error", err, 1e-6, "max relative error against J_2m zeros".into()),
    ])
}

struct Case {
    name: &'static str,
    domain: BilliardDomain,
    region: TestRegion,
    catalog: SpectrumCatalog,
}

fn values_at(case: &Case, nodes: &[(Vec2, f64)]) -> Result<Vec<Vec<f64>>> {
    case.catalog
        .modes
        .par_iter()
        .map(|m| {
            let b = case.catalog.basis_of(m);
            nodes.iter().map(|(p, _)| m.eval(b, *p).map(|v| v.0)).collect()
        })
        .collect()
}

fn area_nodes(chain: &ClosedChain, k: f64) -> Vec<(Vec2, f64)> {
    chain.polar_quadrature(Vec2::zeros(), 0.0, std::f64::consts::FRAC_PI_2, PolarRule::new(k, 14.0))
}

fn identity_checks(case: &Case, params: &SolverParams) -> Result<Vec<Check>> {
    let modes = &case.catalog.modes;
    let k_max = modes.last().map_or(1.0, |m| m.k);
    let tag = |s: &str| format!("{}.{s}", case.name);
    let mut out = Vec::new();

    let rellich = modes.iter().map(|m| (m.rellich_norm - 1.0).abs()).fold(0.0, f64::max);
    out.push(Check::below(&tag("rellich"), rellich, 1e-3, format!("{} modes", modes.len())));

    let region_nodes = area_nodes(case.region.chain(), k_max);
    let rv = values_at(case, &region_nodes)?;
    let integrate = |f: &dyn Fn(usize) -> f64| region_nodes.iter().enumerate().map(|(i, (_, w))| w * f(i)).sum::<f64>();
    let diag = diagonal_elements(&case.catalog, &case.region, params.pts_per_wavelength)?;
    let equal_energy = diag.iter().map(|d| (d.value - integrate(&|i| rv[d.index][i] * rv[d.index][i])).abs()).fold(0.0, f64::max);
    out.push(Check::below(&tag("equal_energy_identity"), equal_energy, 1e-5, "diagonal elements vs area quadrature".into()));

    let rcurve = region_curve(&case.region, k_max, params.pts_per_wavelength)?;
    let rt: Vec<BoundaryTrace> = modes.iter().map(|m| boundary_trace(m, case.catalog.basis_of(m), &rcurve)).collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..modes.len()).flat_map(|a| [a + 1, a + 3].into_iter().filter(|&b| b < modes.len()).map(move |b| (a, b))).collect();
    let mut distinct_energy: f64 = 0.0;
    for &(a, b) in &pairs {
        let bnd = overlap_distinct_energy(&rt[a], rt[a].energy(), &rt[b], rt[b].energy())?;
        distinct_energy = distinct_energy.max((bnd - integrate(&|i| rv[a][i] * rv[b][i])).abs());
    }
    out.push(Check::below(&tag("distinct_energy_identity"), distinct_energy, 1e-5, format!("{} pairs", pairs.len())));

    let whole = area_nodes(case.domain.chain(), k_max);
    let wv = values_at(case, &whole)?;
    let dcurve = domain_curve(&case.domain, k_max, params.pts_per_wavelength);
    let dt: Vec<BoundaryTrace> = modes.iter().map(|m| boundary_trace(m, case.catalog.basis_of(m), &dcurve)).collect::<Result<_>>()?;
    let mut diffgen: f64 = 0.0;
    for &(a, b) in &pairs {
        let interior: f64 = whole.iter().enumerate().map(|(i, (p, w))| w * p.norm_squared() * wv[a][i] * wv[b][i]).sum();
        diffgen = diffgen.max(verify_diffgen_identity(&dt[a], dt[a].energy(), &dt[b], dt[b].energy(), interior)?);
    }
    out.push(Check::below(&tag("two_energy_identity"), diffgen, 1e-5, format!("{} pairs", pairs.len())));

    let wall = std::sync::Arc::new(case.domain.quadrature(k_max, params.pts_per_wavelength, false));
    let qt: Vec<BoundaryTrace> = modes.iter().map(|m| boundary_trace(m, case.catalog.basis_of(m), &wall)).collect::<Result<_>>()?;
    let r2 = case.domain.r_max * case.domain.r_max;
    let mut worst: f64 = 0.0;
    for a in 0..qt.len() {
        for b in a + 1..qt.len() {
            let bound = (qt[a].energy() - qt[b].energy()).powi(2) * r2 / 4.0;
            worst = worst.max(quasi_orthogonality(&qt[a], &qt[b])?.abs() / bound);
        }
    }
    out.push(Check::below(&tag("quasi_orthogonality"), worst, 1.05, "largest |Q_ij| / bound".into()));
    Ok(out)
}

pub fn identity_suite(params: &SolverParams) -> Result<Vec<Check>> {
    let nu = Vec2::new(1.0, 2.0).normalize();
    let qd = build_quarter_disk();
    let sinai = build_sinai_domain(0.4, 0.7)?;
    let cases = [
        Case { name: "quarter_disk", region: build_test_region(&qd, nu, 0.5)?, catalog: scan_spectrum(&qd, 5.0, 25.0, params)?, domain: qd },
        Case { name: "sinai", region: build_test_region(&sinai, nu, 0.55)?, catalog: scan_spectrum(&sinai, 30.0, 40.0, params)?, domain: sinai },
    ];
    let mut out = Vec::new();
    for case in &cases {
        out.extend(identity_checks(case, params)?);
    }
    Ok(out)
}

/// Every oracle suite with the given solver parameters.
pub fn run_all(params: &SolverParams) -> Result<Vec<Check>> {
    let mut out = quarter_disk_suite(params)?;
    out.extend(identity_suite(params)?);
    Ok(out)
}
