mod common;

use std::sync::{Arc, OnceLock};

use bque::elements::*;
use bque::geometry::{BoundaryNode, build_quarter_disk, build_sinai_domain, build_test_region, BilliardDomain, TestRegion, Vec2};
use bque::scaling::{scan_spectrum, SolverParams, SpectrumCatalog};
use common::PolarRegion;
use rayon::prelude::*;

struct Case {
    domain: BilliardDomain,
    region: TestRegion,
    catalog: SpectrumCatalog,
    shape: PolarRegion,
}

fn nu() -> Vec2 {
    Vec2::new(1.0, 2.0) / 5f64.sqrt()
}

fn quarter_disk() -> &'static Case {
    static CASE: OnceLock<Case> = OnceLock::new();
    CASE.get_or_init(|| {
        let domain = build_quarter_disk();
        let region = build_test_region(&domain, nu(), 0.5).unwrap();
        let catalog = scan_spectrum(&domain, 5.0, 25.0, &SolverParams::default()).unwrap();
        Case { domain, region, catalog, shape: PolarRegion::quarter_disk() }
    })
}

fn sinai() -> &'static Case {
    static CASE: OnceLock<Case> = OnceLock::new();
    CASE.get_or_init(|| {
        let domain = build_sinai_domain(0.4, 0.7).unwrap();
        let region = build_test_region(&domain, nu(), 0.55).unwrap();
        let catalog = scan_spectrum(&domain, 30.0, 40.0, &SolverParams::default()).unwrap();
        Case { domain, region, catalog, shape: PolarRegion::sinai(0.4, 0.7) }
    })
}

/// Values of every catalog mode at the given points.
fn sample(case: &Case, pts: &[(Vec2, f64)]) -> Vec<Vec<f64>> {
    case.catalog
        .modes
        .par_iter()
        .map(|m| {
            let b = case.catalog.basis_of(m);
            pts.iter().map(|(p, _)| m.eval(b, *p).unwrap().0).collect()
        })
        .collect()
}

fn integrate(pts: &[(Vec2, f64)], f: impl Fn(usize, Vec2) -> f64) -> f64 {
    pts.iter().enumerate().map(|(i, (p, w))| w * f(i, *p)).sum()
}

fn traces(case: &Case, curve: &Curve) -> Vec<BoundaryTrace> {
    case.catalog.modes.iter().map(|m| boundary_trace(m, case.catalog.basis_of(m), curve).unwrap()).collect()
}

fn k_max(case: &Case) -> f64 {
    case.catalog.modes.last().unwrap().k
}

#[test]
fn catalogs_hold_enough_modes() {
    assert!(quarter_disk().catalog.modes.len() >= 20);
    assert!(sinai().catalog.modes.len() >= 20);
}

fn check_diagonal_against_oracle(case: &Case) {
    let kmax = k_max(case);
    let (nu, c) = (case.region.normal, case.region.offset);
    let inside = case.shape.clone().cut(nu, c, true).nodes(kmax, 16);
    let whole = case.shape.nodes(kmax, 16);
    let vin = sample(case, &inside);
    let vall = sample(case, &whole);
    let diag = diagonal_elements(&case.catalog, &case.region, 10.0).unwrap();
    let comp = case.region.complement(&case.domain).unwrap();
    let diag_c = diagonal_elements(&case.catalog, &comp, 10.0).unwrap();
    for (n, d) in diag.iter().enumerate() {
        let oracle = integrate(&inside, |i, _| vin[n][i] * vin[n][i]);
        let norm = integrate(&whole, |i, _| vall[n][i] * vall[n][i]);
        assert!((norm - 1.0).abs() < 1e-6, "k = {}: interior norm {norm}", d.k);
        assert!((d.value - oracle).abs() / oracle < 1e-6, "k = {}: {} vs {oracle}", d.k, d.value);
        assert!(d.value > 0.0 && d.value < 1.0);
        assert!((d.value + diag_c[n].value - 1.0).abs() < 1e-6, "partition at k = {}", d.k);
    }
}

#[test]
fn quarter_disk_diagonal_elements_match_area_quadrature() {
    check_diagonal_against_oracle(quarter_disk());
}

#[test]
fn sinai_diagonal_elements_match_area_quadrature() {
    check_diagonal_against_oracle(sinai());
}

fn check_offdiagonal_against_oracle(case: &Case) {
    let kmax = k_max(case);
    let inside = case.shape.clone().cut(case.region.normal, case.region.offset, true).nodes(kmax, 16);
    let vin = sample(case, &inside);
    let block = offdiagonal_block(&case.catalog, &case.region, 0.0, f64::INFINITY, 10.0).unwrap();
    assert!(block.asymmetry() < 1e-10);
    let n = block.len();
    for a in 0..n {
        for b in a + 1..(a + 4).min(n) {
            let oracle = integrate(&inside, |i, _| vin[a][i] * vin[b][i]);
            let got = block.values[(a, b)];
            assert!((got - oracle).abs() < 1e-6 * oracle.abs().max(1e-2), "({a},{b}): {got} vs {oracle}");
        }
    }
}

#[test]
fn quarter_disk_offdiagonal_elements_match_area_quadrature() {
    check_offdiagonal_against_oracle(quarter_disk());
}

#[test]
fn sinai_offdiagonal_elements_match_area_quadrature() {
    check_offdiagonal_against_oracle(sinai());
}

#[test]
fn distinct_modes_are_orthogonal_over_the_domain() {
    for case in [quarter_disk(), sinai()] {
        let curve = domain_curve(&case.domain, k_max(case), 10.0);
        let t = traces(case, &curve);
        for a in 0..t.len() {
            for b in a + 1..t.len() {
                let o = overlap(&t[a], &t[b]).unwrap();
                assert!(o.abs() < 1e-6, "({a},{b}) overlap {o}");
            }
            let r = overlap_equal_energy(&t[a], &t[a], t[a].energy()).unwrap();
            assert!((r - 1.0).abs() < 1e-9, "norm {r}");
        }
    }
}

#[test]
fn two_energy_identity_holds_for_computed_modes() {
    for case in [quarter_disk(), sinai()] {
        let whole = case.shape.nodes(k_max(case), 16);
        let v = sample(case, &whole);
        let curve = domain_curve(&case.domain, k_max(case), 10.0);
        let t = traces(case, &curve);
        for a in 0..t.len() {
            for b in [a + 1, a + 3, a + 7].into_iter().filter(|&b| b < t.len()) {
                let interior = integrate(&whole, |i, p| p.norm_squared() * v[a][i] * v[b][i]);
                let res = verify_diffgen_identity(&t[a], t[a].energy(), &t[b], t[b].energy(), interior).unwrap();
                assert!(res < 1e-5, "({a},{b}) residual {res}");
            }
        }
    }
}

#[test]
fn two_energy_residual_falls_under_quadrature_refinement() {
    let case = sinai();
    let whole = case.shape.nodes(k_max(case), 16);
    let v = sample(case, &whole);
    let (a, b) = (2, 5);
    let interior = integrate(&whole, |i, p| p.norm_squared() * v[a][i] * v[b][i]);
    let mut last = f64::INFINITY;
    for n in [12, 24, 48] {
        let curve = gauss_curve(&case.domain, n);
        let t = traces(case, &curve);
        let res = verify_diffgen_identity(&t[a], t[a].energy(), &t[b], t[b].energy(), interior).unwrap();
        assert!(res < last / 10.0 || res < 1e-9, "residual {res} after {last}");
        last = res;
    }
}

/// `n` Gauss nodes on every boundary segment.
fn gauss_curve(domain: &BilliardDomain, n: usize) -> Curve {
    let rule = bque::quadrature::gauss(n);
    let mut nodes = Vec::new();
    for (i, seg) in domain.segments().iter().enumerate() {
        for (t, w) in rule.mapped(0.0, 1.0) {
            let position = seg.point(t);
            let normal = seg.normal(t);
            nodes.push(BoundaryNode { position, normal, rn: position.dot(&normal), weight: w * seg.length(), segment: i, role: seg.role });
        }
    }
    Arc::new(nodes)
}

#[test]
fn quasi_orthogonality_obeys_its_bound() {
    for case in [quarter_disk(), sinai()] {
        let curve = Arc::new(case.domain.quadrature(k_max(case), 10.0, false));
        let t = traces(case, &curve);
        let r2 = case.domain.r_max * case.domain.r_max;
        for a in 0..t.len() {
            let qaa = quasi_orthogonality(&t[a], &t[a]).unwrap();
            assert!((qaa / (2.0 * t[a].energy()) - 1.0).abs() < 1e-3);
            for b in a + 1..t.len() {
                let q = quasi_orthogonality(&t[a], &t[b]).unwrap();
                let bound = (t[a].energy() - t[b].energy()).powi(2) / 4.0 * r2 * 1.05;
                assert!(q.abs() <= bound, "({a},{b}): {q} > {bound}");
            }
        }
    }
}

#[test]
fn traces_vanish_on_walls_and_reproduce_direct_evaluation() {
    for case in [quarter_disk(), sinai()] {
        let curve = region_curve(&case.region, k_max(case), 10.0).unwrap();
        for m in &case.catalog.modes {
            let basis = case.catalog.basis_of(m);
            let t = boundary_trace(m, basis, &curve).unwrap();
            assert!(t.dirichlet_residual() < TRACE_TOL, "k = {}: {}", t.k, t.dirichlet_residual());
            for (i, node) in curve.iter().enumerate().filter(|(_, n)| n.on_interface()).step_by(7) {
                let (u, g) = m.eval(basis, node.position).unwrap();
                assert_eq!(u.to_bits(), t.values[i].to_bits());
                let h = 1e-5 / m.k;
                let fd = |d: Vec2| (m.eval(basis, node.position + d).unwrap().0 - m.eval(basis, node.position - d).unwrap().0) / (2.0 * h);
                let gfd = Vec2::new(fd(Vec2::new(h, 0.0)), fd(Vec2::new(0.0, h)));
                assert!((gfd - g).norm() < 1e-6 * t.max_gradient());
            }
        }
    }
}

#[test]
fn chord_only_rellich_form_misses_the_arc_contribution() {
    let case = sinai();
    let curve = region_curve(&case.region, k_max(case), 10.0).unwrap();
    let chord: Curve = Arc::new(curve.iter().filter(|n| n.on_interface() || n.rn.abs() < 1e-12).copied().collect());
    let full = diagonal_elements(&case.catalog, &case.region, 10.0).unwrap();
    let mut worst = 0.0f64;
    for (m, d) in case.catalog.modes.iter().zip(&full) {
        let t = boundary_trace(m, case.catalog.basis_of(m), &chord).unwrap();
        let partial = overlap_equal_energy(&t, &t, t.energy()).unwrap();
        worst = worst.max((partial - d.value).abs());
    }
    // the region's boundary includes arc pieces, where r_n (d_n u)^2 > 0
    assert!(worst > 1e-2, "chord-only and full forms agree to {worst}");
}

#[test]
fn row_sums_approach_the_diagonal_element() {
    let case = quarter_disk();
    let wide = scan_spectrum(&case.domain, 5.0, 45.0, &SolverParams::default()).unwrap();
    let block = offdiagonal_block(&wide, &case.region, 0.0, f64::INFINITY, 10.0).unwrap();
    for (n, &k) in block.k.iter().enumerate().filter(|(_, k)| (12.0..18.0).contains(*k)) {
        let row: f64 = (0..block.len()).map(|m| block.values[(n, m)].powi(2)).sum();
        let a = block.values[(n, n)];
        assert!((row - a).abs() < 0.1 * a, "k = {k}: {row} vs {a}");
    }
}

/// Values, gradients and Hessians (by differencing gradients) of one basis function.
struct Jet {
    u: f64,
    g: Vec2,
    h: nalgebra::Matrix2<f64>,
}

fn jet(basis: &bque::basis::ScalingBasis, l: usize, p: Vec2) -> Jet {
    let (v, g) = basis.eval(p).unwrap();
    let d = 1e-6;
    let gx = (basis.eval(p + Vec2::new(d, 0.0)).unwrap().1[l] - basis.eval(p - Vec2::new(d, 0.0)).unwrap().1[l]) / (2.0 * d);
    let gy = (basis.eval(p + Vec2::new(0.0, d)).unwrap().1[l] - basis.eval(p - Vec2::new(0.0, d)).unwrap().1[l]) / (2.0 * d);
    Jet { u: v[l], g: g[l], h: nalgebra::Matrix2::from_columns(&[gx, gy]) }
}

#[test]
fn divergence_identities_hold_pointwise() {
    let domain = build_sinai_domain(0.4, 0.7).unwrap();
    let bu = bque::basis::build_basis(&domain, 11.0, 1.5).unwrap();
    let bv = bque::basis::build_basis(&domain, 14.0, 1.5).unwrap();
    let (eu, ev) = (bu.k * bu.k, bv.k * bv.k);
    let (lu, lv) = (2, 5);
    let at = |p: Vec2| (jet(&bu, lu, p), jet(&bv, lv, p));
    type Field = fn(&Jet, &Jet, Vec2, f64, f64) -> (Vec2, f64);
    let fields: [(&str, Field); 5] = [
        ("v grad u", |u, v, _, eu, _| (v.u * u.g, -eu * u.u * v.u + u.g.dot(&v.g))),
        ("r u v", |u, v, r, _, _| (u.u * v.u * r, 2.0 * u.u * v.u + u.u * r.dot(&v.g) + v.u * r.dot(&u.g))),
        ("r grad u . grad v", |u, v, r, _, _| (u.g.dot(&v.g) * r, 2.0 * u.g.dot(&v.g) + u.g.dot(&(v.h * r)) + v.g.dot(&(u.h * r)))),
        ("(r . grad u) grad v", |u, v, r, _, ev| (r.dot(&u.g) * v.g, u.g.dot(&v.g) - ev * v.u * r.dot(&u.g) + v.g.dot(&(u.h * r)))),
        ("r^2 v grad u", |u, v, r, eu, _| (r.norm_squared() * v.u * u.g, 2.0 * v.u * r.dot(&u.g) - eu * r.norm_squared() * u.u * v.u + r.norm_squared() * u.g.dot(&v.g))),
    ];
    for p in [Vec2::new(0.3, 0.4), Vec2::new(0.55, 0.2), Vec2::new(0.15, 0.6)] {
        for (name, f) in &fields {
            let h = 1e-4;
            let flux = |q: Vec2| {
                let (u, v) = at(q);
                f(&u, &v, q, eu, ev).0
            };
            let div = (flux(p + Vec2::new(h, 0.0)).x - flux(p - Vec2::new(h, 0.0)).x) / (2.0 * h)
                + (flux(p + Vec2::new(0.0, h)).y - flux(p - Vec2::new(0.0, h)).y) / (2.0 * h);
            let (u, v) = at(p);
            let rhs = f(&u, &v, p, eu, ev).1;
            let scale = eu.max(ev) * (u.u.abs() + u.g.norm() / bu.k) * (v.u.abs() + v.g.norm() / bv.k);
            assert!((div - rhs).abs() < 1e-4 * scale, "{name} at {p:?}: {div} vs {rhs}");
        }
    }
}
