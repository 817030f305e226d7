use super::chain::{BoundaryNode, ClosedChain};
use super::domain::BilliardDomain;
use super::segment::{BoundarySegment, SegmentRole};
use super::Vec2;
use crate::error::{geometry, invalid, Result};

/// Largest |cos| between the interface and a symmetry line treated as a right angle.
const RIGHT_ANGLE_TOL: f64 = 1e-6;

/// Half-plane test region `{nu . r <= c}` intersected with the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRegion {
    pub normal: Vec2,
    pub offset: f64,
    pub area: f64,
    pub area_fraction: f64,
    /// Boundary of the region: pieces of the domain boundary plus the interface chord.
    chain: ClosedChain,
    /// Interface chord endpoints, in boundary order.
    pub chord: (Vec2, Vec2),
}

/// Indicator observable on the domain.
pub trait Indicator: Sync {
    fn indicator(&self, p: Vec2) -> bool;
}

impl Indicator for TestRegion {
    #[inline]
    fn indicator(&self, p: Vec2) -> bool {
        self.normal.dot(&p) <= self.offset
    }
}

/// The whole domain; the indicator is identically one.
#[derive(Debug, Clone, Copy, Default)]
pub struct WholeDomain;

impl Indicator for WholeDomain {
    #[inline]
    fn indicator(&self, _p: Vec2) -> bool {
        true
    }
}

enum Clip {
    Empty,
    Full,
    Cut { chain: Vec<BoundarySegment>, chord: (Vec2, Vec2) },
}

fn clip(domain: &BilliardDomain, nu: Vec2, c: f64) -> Result<Clip> {
    // split every segment at its crossings and label the pieces
    let mut pieces: Vec<(BoundarySegment, bool)> = Vec::new();
    for seg in domain.segments() {
        let mut ts = vec![0.0];
        ts.extend(seg.line_crossings(nu, c));
        ts.push(1.0);
        for w in ts.windows(2) {
            let piece = seg.sub(w[0], w[1]);
            if piece.length() < 1e-14 {
                continue;
            }
            let inside = nu.dot(&piece.point(0.5)) <= c;
            pieces.push((piece, inside));
        }
    }
    if pieces.iter().all(|p| p.1) {
        return Ok(Clip::Full);
    }
    if pieces.iter().all(|p| !p.1) {
        return Ok(Clip::Empty);
    }
    // rotate so we start on an inside piece that follows an outside one
    let n = pieces.len();
    let start = (0..n)
        .find(|&i| pieces[i].1 && !pieces[(i + n - 1) % n].1)
        .ok_or_else(|| geometry("could not locate region entry point"))?;
    pieces.rotate_left(start);

    let mut chain = Vec::new();
    let mut chords = Vec::new();
    let mut exit: Option<Vec2> = None;
    for (piece, inside) in &pieces {
        if *inside {
            if let Some(e) = exit.take() {
                let entry = piece.start_point();
                chords.push((e, entry));
                chain.push(BoundarySegment::line(e, entry, SegmentRole::Interface));
            }
            chain.push(piece.clone());
        } else if exit.is_none() && chain.last().is_some_and(|s: &BoundarySegment| s.role != SegmentRole::Interface) {
            exit = Some(chain.last().unwrap().end_point());
        }
    }
    if let Some(e) = exit {
        let entry = chain[0].start_point();
        chords.push((e, entry));
        chain.push(BoundarySegment::line(e, entry, SegmentRole::Interface));
    }
    if chords.len() != 1 {
        return Err(geometry(format!("dividing line cuts the domain into {} chords; need exactly one", chords.len())));
    }
    Ok(Clip::Cut { chain, chord: chords[0] })
}

fn clipped_area(domain: &BilliardDomain, nu: Vec2, c: f64) -> Result<f64> {
    Ok(match clip(domain, nu, c)? {
        Clip::Empty => 0.0,
        Clip::Full => domain.area,
        Clip::Cut { chain, .. } => chain.iter().map(BoundarySegment::green_area).sum(),
    })
}

/// Region on the `nu . r <= c` side of a line, with `c` tuned by bisection so
/// the region holds `target_fraction` of the domain area.
pub fn build_test_region(domain: &BilliardDomain, nu: Vec2, target_fraction: f64) -> Result<TestRegion> {
    build_test_region_with(domain, nu, target_fraction, InterfacePolicy::RejectRightAngles)
}

/// Whether an interface meeting a symmetry line at a right angle is acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfacePolicy {
    RejectRightAngles,
    AllowRightAngles,
}

pub fn build_test_region_with(
    domain: &BilliardDomain,
    nu: Vec2,
    target_fraction: f64,
    policy: InterfacePolicy,
) -> Result<TestRegion> {
    if !(target_fraction > 0.0 && target_fraction < 1.0) {
        return Err(invalid(format!("target fraction {target_fraction} must lie in (0, 1)")));
    }
    if !(nu.norm() > 0.0) {
        return Err(invalid("dividing-line normal must be nonzero"));
    }
    let nu = nu.normalize();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for seg in domain.segments() {
        for j in 0..=4096 {
            let v = nu.dot(&seg.point(j as f64 / 4096.0));
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let target = target_fraction * domain.area;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clipped_area(domain, nu, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    region_at_offset_with(domain, nu, 0.5 * (lo + hi), policy)
}

/// Region `{nu . r <= offset}` for a given offset.
pub fn region_at_offset(domain: &BilliardDomain, nu: Vec2, offset: f64) -> Result<TestRegion> {
    region_at_offset_with(domain, nu, offset, InterfacePolicy::RejectRightAngles)
}

fn region_at_offset_with(domain: &BilliardDomain, nu: Vec2, offset: f64, policy: InterfacePolicy) -> Result<TestRegion> {
    let nu = nu.normalize();
    let (segments, chord) = match clip(domain, nu, offset)? {
        Clip::Cut { chain, chord } => (chain, chord),
        Clip::Empty | Clip::Full => return Err(geometry("dividing line does not cut the domain")),
    };
    let dir = Vec2::new(-nu.y, nu.x);
    for end in [chord.0, chord.1] {
        for seg in domain.segments().iter().filter(|s| s.is_symmetry_line()) {
            if seg.distance(end) < 1e-10 {
                let axis = (seg.end_point() - seg.start_point()).normalize();
                if policy == InterfacePolicy::RejectRightAngles && dir.dot(&axis).abs() < RIGHT_ANGLE_TOL {
                    return Err(geometry("interface meets a symmetry line at a right angle"));
                }
            }
        }
    }
    let chain = ClosedChain::new(segments)?;
    let area = chain.area();
    Ok(TestRegion { normal: nu, offset, area, area_fraction: area / domain.area, chain, chord })
}

impl TestRegion {
    pub fn chain(&self) -> &ClosedChain {
        &self.chain
    }

    pub fn chord_length(&self) -> f64 {
        (self.chord.1 - self.chord.0).norm()
    }

    /// The complementary region `{nu . r >= c}`.
    pub fn complement(&self, domain: &BilliardDomain) -> Result<TestRegion> {
        region_at_offset_with(domain, -self.normal, -self.offset, InterfacePolicy::AllowRightAngles)
    }
}

/// Gauss-Legendre nodes on the whole region boundary (chord and wall
/// portions), with normals outward from the region.
pub fn region_interface_quadrature(region: &TestRegion, k: f64, pts_per_wavelength: f64) -> Result<Vec<BoundaryNode>> {
    if region.chord_length() <= 0.0 {
        return Err(geometry("test region has an empty interface"));
    }
    Ok(region.chain.quadrature(k, pts_per_wavelength, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_quarter_disk, build_sinai_domain};
    use std::f64::consts::PI;

    fn default_nu() -> Vec2 {
        Vec2::new(1.0, 2.0) / 5f64.sqrt()
    }

    #[test]
    fn sinai_region_hits_fraction() {
        let d = build_sinai_domain(0.4, 0.7).unwrap();
        let r = build_test_region(&d, default_nu(), 0.55).unwrap();
        assert!((r.area_fraction - 0.55).abs() < 1e-9);
        assert!(r.indicator(Vec2::new(0.01, 0.01)));
    }

    #[test]
    fn complementary_regions_partition() {
        let d = build_sinai_domain(0.4, 0.7).unwrap();
        let a = build_test_region(&d, default_nu(), 0.5).unwrap();
        let b = build_test_region(&d, -default_nu(), 0.5).unwrap();
        assert!((a.area_fraction + b.area_fraction - 1.0).abs() < 1e-9);
        assert!((a.offset + b.offset).abs() < 1e-9);
        let c = a.complement(&d).unwrap();
        assert!((a.area + c.area - d.area).abs() < 1e-12);
    }

    #[test]
    fn quarter_disk_half_region_is_circular_segment() {
        let d = build_quarter_disk();
        assert!(build_test_region(&d, Vec2::new(1.0, 0.0), 0.5).is_err());
        let r = build_test_region_with(&d, Vec2::new(1.0, 0.0), 0.5, InterfacePolicy::AllowRightAngles).unwrap();
        // quarter disk to the right of x = c has area (acos c - c sqrt(1-c^2)) / 2
        let seg = |c: f64| 0.5 * (c.acos() - c * (1.0 - c * c).sqrt());
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if seg(m) > PI / 8.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert!((r.offset - lo).abs() < 1e-9, "{} vs {}", r.offset, lo);
    }

    #[test]
    fn interface_nodes_lie_on_line_and_close_area() {
        let d = build_sinai_domain(0.4, 0.7).unwrap();
        let r = build_test_region(&d, default_nu(), 0.55).unwrap();
        let nodes = region_interface_quadrature(&r, 60.0, 10.0).unwrap();
        for n in nodes.iter().filter(|n| n.on_interface()) {
            assert!((r.normal.dot(&n.position) - r.offset).abs() < 1e-12);
            assert!((n.normal - r.normal).norm() < 1e-12);
        }
        let area: f64 = nodes.iter().map(|n| 0.5 * n.rn * n.weight).sum();
        assert!((area - 0.55 * d.area).abs() < 1e-6);
        for e in [r.chord.0, r.chord.1] {
            assert!(d.chain().distance(e) < 1e-10);
        }
    }

    #[test]
    fn fraction_is_monotone_in_offset() {
        let d = build_sinai_domain(0.4, 0.7).unwrap();
        let nu = default_nu();
        let mut prev = 0.0;
        for j in 1..40 {
            let c = 0.02 + j as f64 * 0.03;
            let a = clipped_area(&d, nu, c).unwrap();
            assert!(a > prev);
            prev = a;
        }
    }

    #[test]
    fn right_angle_interface_rejected() {
        let d = build_sinai_domain(0.4, 0.7).unwrap();
        assert!(build_test_region(&d, Vec2::new(1.0, 0.0), 0.3).is_err());
    }

    #[test]
    fn bad_fraction_rejected() {
        let d = build_quarter_disk();
        assert!(build_test_region(&d, Vec2::new(1.0, 1.0), 1.0).is_err());
        assert!(build_test_region(&d, Vec2::new(1.0, 1.0), 0.0).is_err());
    }
}
