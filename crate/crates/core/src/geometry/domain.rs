use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::chain::{BoundaryNode, ClosedChain};
use super::segment::{BoundarySegment, SegmentKind, SegmentRole};
use super::Vec2;
use crate::error::{geometry, invalid, Result};

/// Parameters that determine a billiard shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainShape {
    /// Quarter generalized Sinai billiard: two circular arcs meeting at (1, 1),
    /// at angle `theta1` to the horizontal and `theta2` to the vertical.
    Sinai { theta1: f64, theta2: f64 },
    /// Unit quarter disk.
    QuarterDisk,
}

/// Desymmetrized billiard in the first quadrant. Both axes are symmetry lines
/// of the unfolded shape; the remaining boundary is `Gamma_desym`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilliardDomain {
    pub shape: DomainShape,
    chain: ClosedChain,
    pub area: f64,
    pub perimeter_full: f64,
    pub perimeter_desym: f64,
    pub r_max: f64,
}

/// Samples per segment used to verify strict star-shapedness at construction.
const STAR_CHECK_SAMPLES: usize = 2000;

impl BilliardDomain {
    fn from_segments(shape: DomainShape, segments: Vec<BoundarySegment>) -> Result<Self> {
        let chain = ClosedChain::new(segments)?;
        let mut r_max: f64 = 0.0;
        for seg in chain.segments() {
            for j in 0..=STAR_CHECK_SAMPLES {
                let t = j as f64 / STAR_CHECK_SAMPLES as f64;
                let p = seg.point(t);
                r_max = r_max.max(p.norm());
                let rn = p.dot(&seg.normal(t));
                if seg.is_symmetry_line() {
                    if rn.abs() > 1e-12 {
                        return Err(geometry(format!("symmetry line does not pass through the origin (r.n = {rn:e})")));
                    }
                } else if rn <= 0.0 {
                    return Err(geometry(format!(
                        "domain is not strictly star-shaped about the origin: r.n = {rn:e} at ({}, {})",
                        p.x, p.y
                    )));
                }
            }
        }
        let area = chain.area();
        Ok(BilliardDomain {
            shape,
            perimeter_full: chain.perimeter(true),
            perimeter_desym: chain.perimeter(false),
            area,
            r_max,
            chain,
        })
    }

    pub fn from_shape(shape: DomainShape) -> Result<Self> {
        match shape {
            DomainShape::Sinai { theta1, theta2 } => build_sinai_domain(theta1, theta2),
            DomainShape::QuarterDisk => Ok(build_quarter_disk()),
        }
    }

    pub fn chain(&self) -> &ClosedChain {
        &self.chain
    }

    pub fn segments(&self) -> &[BoundarySegment] {
        self.chain.segments()
    }

    /// Interior test; points within ~1e-12 of the boundary may go either way.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x > 0.0 && p.y > 0.0 && self.chain.contains(p) && self.chain.distance(p) > 1e-12
    }

    /// See [`boundary_quadrature`].
    pub fn quadrature(&self, k: f64, pts_per_wavelength: f64, include_symmetry_lines: bool) -> Vec<BoundaryNode> {
        boundary_quadrature(self, k, pts_per_wavelength, include_symmetry_lines)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for seg in self.segments() {
            for j in 0..=256 {
                let p = seg.point(j as f64 / 256.0);
                lo = lo.inf(&p);
                hi = hi.sup(&p);
            }
        }
        (lo, hi)
    }

    /// Circles carrying the wall arcs, as `(center, radius)`.
    pub fn wall_circles(&self) -> Vec<(Vec2, f64)> {
        self.segments()
            .iter()
            .filter_map(|s| match s.kind {
                SegmentKind::Arc { center, radius, .. } => Some((center, radius)),
                _ => None,
            })
            .collect()
    }
}

/// Quarter Sinai-type billiard of the given arc angles.
///
/// The arc tangent to angle `theta1` at (1, 1) has its center on the y-axis and
/// meets that axis perpendicularly; the other arc's center is on the x-axis.
/// This is the only assignment for which `r . n > 0` on both arcs.
pub fn build_sinai_domain(theta1: f64, theta2: f64) -> Result<BilliardDomain> {
    for (name, th) in [("theta1", theta1), ("theta2", theta2)] {
        if !(th > 0.0 && th < FRAC_PI_2) {
            return Err(invalid(format!("{name} = {th} must lie in (0, pi/2)")));
        }
    }
    let corner = Vec2::new(1.0, 1.0);
    // arc meeting the x-axis: tangent makes angle theta2 with the vertical
    let cx = Vec2::new(1.0 + 1.0 / theta2.tan(), 0.0);
    let rx = 1.0 / theta2.sin();
    let foot_x = Vec2::new(cx.x - rx, 0.0);
    let ax_end = (corner - cx).y.atan2((corner - cx).x);
    // arc meeting the y-axis: tangent makes angle theta1 with the horizontal
    let cy = Vec2::new(0.0, 1.0 + 1.0 / theta1.tan());
    let ry = 1.0 / theta1.sin();
    let foot_y = Vec2::new(0.0, cy.y - ry);
    let ay_start = (corner - cy).y.atan2((corner - cy).x);

    if foot_x.x <= 0.0 || foot_y.y <= 0.0 {
        return Err(geometry("arcs do not meet the axes in the first quadrant"));
    }
    let segments = vec![
        BoundarySegment::line(Vec2::zeros(), foot_x, SegmentRole::SymmetryLine),
        BoundarySegment::arc(cx, rx, PI, ax_end, SegmentRole::Wall),
        BoundarySegment::arc(cy, ry, ay_start, -FRAC_PI_2, SegmentRole::Wall),
        BoundarySegment::line(foot_y, Vec2::zeros(), SegmentRole::SymmetryLine),
    ];
    BilliardDomain::from_segments(DomainShape::Sinai { theta1, theta2 }, segments)
}

/// Unit quarter disk: both axes plus the 90 degree arc.
pub fn build_quarter_disk() -> BilliardDomain {
    let segments = vec![
        BoundarySegment::line(Vec2::zeros(), Vec2::new(1.0, 0.0), SegmentRole::SymmetryLine),
        BoundarySegment::arc(Vec2::zeros(), 1.0, 0.0, FRAC_PI_2, SegmentRole::Wall),
        BoundarySegment::line(Vec2::new(0.0, 1.0), Vec2::zeros(), SegmentRole::SymmetryLine),
    ];
    BilliardDomain::from_segments(DomainShape::QuarterDisk, segments).expect("quarter disk is a valid domain")
}

/// Panel-wise Gauss-Legendre nodes on the domain boundary.
///
/// Panels are no longer than four wavelengths and carry at least
/// `pts_per_wavelength * k / 2pi` nodes per unit length. Symmetry lines are
/// skipped unless requested.
pub fn boundary_quadrature(
    domain: &BilliardDomain,
    k: f64,
    pts_per_wavelength: f64,
    include_symmetry_lines: bool,
) -> Vec<BoundaryNode> {
    assert!(k > 0.0, "wavenumber must be positive");
    assert!(pts_per_wavelength >= 4.0, "need at least 4 points per wavelength");
    domain.chain.quadrature(k, pts_per_wavelength, include_symmetry_lines)
}

/// The opposite reading of the arc angles: the arc at `theta1` to the
/// horizontal centered on the x-axis, the one at `theta2` to the vertical on
/// the y-axis. Only used to demonstrate the star-shapedness rejection.
#[cfg(test)]
fn sinai_opposite_assignment(theta1: f64, theta2: f64) -> Result<BilliardDomain> {
    let corner = Vec2::new(1.0, 1.0);
    let cx = Vec2::new(1.0 + theta1.tan(), 0.0);
    let rx = 1.0 / theta1.cos();
    let cy = Vec2::new(0.0, 1.0 + theta2.tan());
    let ry = 1.0 / theta2.cos();
    let segments = vec![
        BoundarySegment::line(Vec2::zeros(), Vec2::new(cx.x - rx, 0.0), SegmentRole::SymmetryLine),
        BoundarySegment::arc(cx, rx, PI, (corner - cx).y.atan2((corner - cx).x), SegmentRole::Wall),
        BoundarySegment::arc(cy, ry, (corner - cy).y.atan2((corner - cy).x), -FRAC_PI_2, SegmentRole::Wall),
        BoundarySegment::line(Vec2::new(0.0, cy.y - ry), Vec2::zeros(), SegmentRole::SymmetryLine),
    ];
    BilliardDomain::from_segments(DomainShape::Sinai { theta1, theta2 }, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinai() -> BilliardDomain {
        build_sinai_domain(0.4, 0.7).unwrap()
    }

    #[test]
    fn sinai_arc_centers_radii_and_feet() {
        let d = sinai();
        let circles = d.wall_circles();
        let (cx, rx) = circles[0];
        let (cy, ry) = circles[1];
        assert!((cy.y - 3.36522).abs() < 1e-5 && cy.x == 0.0);
        assert!((ry - 2.56793).abs() < 1e-5);
        assert!((cx.x - 2.18724).abs() < 1e-5 && cx.y == 0.0);
        assert!((rx - 1.552270).abs() < 1e-6);
        let segs = d.segments();
        assert!((segs[0].end_point().x - 0.634972).abs() < 1e-6);
        assert!((segs[3].start_point().y - 0.797290).abs() < 1e-6);
    }

    #[test]
    fn sinai_arcs_meet_at_corner_with_requested_tangent_angles() {
        let d = sinai();
        let segs = d.segments();
        let corner = Vec2::new(1.0, 1.0);
        assert!((segs[1].end_point() - corner).norm() < 1e-12);
        assert!((segs[2].start_point() - corner).norm() < 1e-12);
        // y-axis arc: tangent at (1,1) makes angle 0.4 with the horizontal
        let ty = segs[2].tangent(0.0);
        assert!(((ty.y / ty.x).atan().abs() - 0.4).abs() < 1e-12);
        // x-axis arc: tangent at (1,1) makes angle 0.7 with the vertical
        let tx = segs[1].tangent(1.0);
        let to_vertical = tx.x.abs().atan2(tx.y.abs());
        assert!((to_vertical - 0.7).abs() < 1e-12);
        // arcs meet their axes perpendicularly
        assert!(segs[1].tangent(0.0).x.abs() < 1e-12);
        assert!(segs[2].tangent(1.0).y.abs() < 1e-12);
    }

    #[test]
    fn sinai_perimeter_area_and_weyl_count() {
        let d = sinai();
        assert!((d.perimeter_desym - (0.4 * 1.0 / 0.4f64.sin() + 0.7 / 0.7f64.sin())).abs() < 1e-12);
        // independent polar-integration reference: 2.113762, area 0.614037
        assert!((d.perimeter_desym - 2.113762).abs() < 1e-6);
        assert!((d.area - 0.614_036_598).abs() < 1e-8);
        assert!((d.r_max - 2f64.sqrt()).abs() < 1e-12);
        let weyl = d.area / (4.0 * PI) * 1e6 - d.perimeter_full / (4.0 * PI) * 1e3;
        assert!((weyl - 4.9e4).abs() < 0.1e4);
        // diagonal spans ~225 wavelengths at k = 1000
        let waves = 2f64.sqrt() / (2.0 * PI / 1000.0);
        assert!((waves - 225.0).abs() < 1.0);
    }

    #[test]
    fn swapped_arc_assignment_is_rejected() {
        assert!(matches!(sinai_opposite_assignment(0.4, 0.7), Err(crate::Error::Geometry(_))));
    }

    #[test]
    fn angles_out_of_range_rejected() {
        assert!(build_sinai_domain(0.0, 0.7).is_err());
        assert!(build_sinai_domain(0.4, 1.6).is_err());
    }

    #[test]
    fn quarter_disk_basics() {
        let d = build_quarter_disk();
        assert!((d.area - PI / 4.0).abs() < 1e-14);
        assert!((d.perimeter_desym - PI / 2.0).abs() < 1e-14);
        for n in d.quadrature(10.0, 10.0, false) {
            assert!((n.rn - 1.0).abs() < 1e-14);
        }
        let arc_nodes = d.quadrature(10.0, 10.0, false).len();
        assert!(arc_nodes >= 25);
    }

    #[test]
    fn contains_matches_circle_tests() {
        let d = sinai();
        assert!(d.contains(Vec2::new(0.1, 0.1)));
        assert!(!d.contains(Vec2::new(1.0, 1.0)));
        assert!(!d.contains(Vec2::new(1.5, 1.5)));
        assert!(!d.contains(Vec2::new(-0.1, 0.1)));
        let circles = d.wall_circles();
        for &(x, y) in &[(0.9, 0.9), (0.5, 0.5), (0.62, 0.05), (0.05, 0.78), (0.7, 0.3), (0.3, 0.75)] {
            let p = Vec2::new(x, y);
            let outside_both = circles.iter().all(|(c, r)| (p - c).norm() > *r);
            assert_eq!(d.contains(p), outside_both, "({x}, {y})");
        }
    }

    #[test]
    fn quadrature_weights_and_star_shapedness() {
        let d = sinai();
        for k in [1.0, 37.0, 100.0, 400.0] {
            let nodes = d.quadrature(k, 10.0, false);
            let total: f64 = nodes.iter().map(|n| n.weight).sum();
            assert!((total - 2.113762).abs() < 1e-6);
            assert!((total - d.perimeter_desym).abs() < 1e-12);
            assert!(nodes.iter().all(|n| n.rn > 0.0 && n.weight > 0.0));
            assert!(nodes.iter().all(|n| (n.normal.norm() - 1.0).abs() < 1e-14));
        }
        let all = d.quadrature(100.0, 10.0, true);
        for n in all.iter().filter(|n| n.role == SegmentRole::SymmetryLine) {
            assert!(n.rn.abs() < 1e-14);
        }
    }

    #[test]
    fn green_area_from_nodes_matches_closed_form() {
        for d in [sinai(), build_quarter_disk()] {
            let nodes = d.quadrature(50.0, 10.0, true);
            let a: f64 = nodes.iter().map(|n| 0.5 * n.rn * n.weight).sum();
            assert!(((a - d.area) / d.area).abs() < 1e-8);
        }
    }
}
