//! Irregular Bessel (Neumann) charge basis for the scaling method.
//!
//! Each basis function is `Y0(k|r - q|)` antisymmetrized over reflections in
//! both axes, so it vanishes identically on the symmetry lines and solves the
//! Helmholtz equation inside the billiard.

use std::f64::consts::TAU;

use crate::error::{geometry, invalid, Result};
use crate::geometry::{BilliardDomain, BoundarySegment, SegmentKind, SegmentRole, Vec2};
use crate::special::{bessel_y0, bessel_y1};

/// Charge offset in wavelengths-per-radian units: `k * D`.
pub const DEFAULT_KD: f64 = 7.0;
/// Default ratio of basis size to the semiclassical size. At 1.5 a few
/// modes near k = 50 on the Sinai shape are lost.
pub const DEFAULT_BASIS_FACTOR: f64 = 2.0;
/// Evaluation refuses points closer than this to a charge or image.
const MIN_CHARGE_DISTANCE: f64 = 1e-10;

/// Neumann-charge basis at a fixed center wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingBasis {
    pub k: f64,
    /// Distance of the charge curve from the boundary.
    pub offset: f64,
    pub factor: f64,
    pub charges: Vec<Vec2>,
}

/// `k |Gamma_desym| / pi`
pub fn semiclassical_size(domain: &BilliardDomain, k: f64) -> f64 {
    k * domain.perimeter_desym / std::f64::consts::PI
}

pub fn basis_size(domain: &BilliardDomain, k: f64, factor: f64) -> usize {
    (factor * semiclassical_size(domain, k)).round().max(1.0) as usize
}

/// Pieces of the exterior curve at distance `d` from `Gamma_desym`.
fn offset_pieces(domain: &BilliardDomain, d: f64) -> Result<Vec<BoundarySegment>> {
    let walls: Vec<&BoundarySegment> = domain.segments().iter().filter(|s| !s.is_symmetry_line()).collect();
    let mut pieces = Vec::new();
    for (i, seg) in walls.iter().enumerate() {
        let piece = match seg.kind {
            SegmentKind::Line { p0, p1 } => {
                let n = seg.normal(0.0);
                BoundarySegment::line(p0 + d * n, p1 + d * n, SegmentRole::Wall)
            }
            SegmentKind::Arc { center, radius, start, end } => {
                let p = seg.point(0.5);
                let dispersing = seg.normal(0.5).dot(&(center - p)) > 0.0;
                let r = if dispersing {
                    if d >= radius {
                        return Err(geometry(format!("charge offset {d} exceeds arc radius {radius}")));
                    }
                    radius - d
                } else {
                    radius + d
                };
                BoundarySegment::arc(center, r, start, end, SegmentRole::Wall)
            }
        };
        pieces.push(piece);
        if let Some(next) = walls.get(i + 1) {
            let corner = seg.end_point();
            if (next.start_point() - corner).norm() > 1e-9 {
                return Err(geometry("wall segments are not contiguous"));
            }
            let a0 = seg.normal(1.0).y.atan2(seg.normal(1.0).x);
            let mut a1 = next.normal(0.0).y.atan2(next.normal(0.0).x);
            let mut turn = a1 - a0;
            turn -= TAU * (turn / TAU).round();
            if turn < -1e-12 {
                return Err(geometry("re-entrant corner: charge curve cannot be offset"));
            }
            if turn > 1e-12 {
                a1 = a0 + turn;
                pieces.push(BoundarySegment::arc(corner, d, a0, a1, SegmentRole::Wall));
            }
        }
    }
    Ok(pieces)
}

/// `n` points at equal arclength intervals along the curve at distance `d`
/// outside `Gamma_desym`, placed at interval midpoints. Convex corners are
/// rounded by radius-`d` arcs about the corner.
pub fn build_offset_curve(domain: &BilliardDomain, d: f64, n: usize) -> Result<Vec<Vec2>> {
    if !(d > 0.0) {
        return Err(invalid(format!("charge offset must be positive, got {d}")));
    }
    if n == 0 {
        return Err(invalid("offset curve needs at least one point"));
    }
    let pieces = offset_pieces(domain, d)?;
    let lengths: Vec<f64> = pieces.iter().map(|p| p.length()).collect();
    let total: f64 = lengths.iter().sum();
    let mut points = Vec::with_capacity(n);
    let mut piece = 0;
    let mut start = 0.0;
    for j in 0..n {
        let s = (j as f64 + 0.5) * total / n as f64;
        while piece + 1 < pieces.len() && s > start + lengths[piece] {
            start += lengths[piece];
            piece += 1;
        }
        let t = ((s - start) / lengths[piece]).clamp(0.0, 1.0);
        points.push(pieces[piece].point(t));
    }
    Ok(points)
}

/// Basis at wavenumber `k` with `kD` fixed to [`DEFAULT_KD`].
pub fn build_basis(domain: &BilliardDomain, k: f64, factor: f64) -> Result<ScalingBasis> {
    build_basis_with(domain, k, factor, DEFAULT_KD)
}

pub fn build_basis_with(domain: &BilliardDomain, k: f64, factor: f64, kd: f64) -> Result<ScalingBasis> {
    if !(k > 0.0) || !(factor > 0.0) || !(kd > 0.0) {
        return Err(invalid(format!("basis needs k, factor, kD > 0 (got {k}, {factor}, {kd})")));
    }
    let offset = kd / k;
    let charges = build_offset_curve(domain, offset, basis_size(domain, k, factor))?;
    Ok(ScalingBasis { k, offset, factor, charges })
}

impl ScalingBasis {
    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    /// Values and gradients of every basis function at `p`.
    pub fn eval(&self, p: Vec2) -> Result<(Vec<f64>, Vec<Vec2>)> {
        let mut values = vec![0.0; self.len()];
        let mut grads = vec![Vec2::zeros(); self.len()];
        self.eval_into(p, &mut values, &mut grads)?;
        Ok((values, grads))
    }

    /// Like [`eval`](Self::eval) but writes into caller-owned buffers.
    pub fn eval_into(&self, p: Vec2, values: &mut [f64], grads: &mut [Vec2]) -> Result<()> {
        let k = self.k;
        for ((q, v), g) in self.charges.iter().zip(values.iter_mut()).zip(grads.iter_mut()) {
            let mut val = 0.0;
            let mut grad = Vec2::zeros();
            for (img, sign) in [
                (Vec2::new(q.x, q.y), 1.0),
                (Vec2::new(q.x, -q.y), -1.0),
                (Vec2::new(-q.x, q.y), -1.0),
                (Vec2::new(-q.x, -q.y), 1.0),
            ] {
                let diff = p - img;
                let dist = diff.norm();
                if dist < MIN_CHARGE_DISTANCE {
                    return Err(invalid(format!("evaluation point ({}, {}) coincides with a charge", p.x, p.y)));
                }
                let x = k * dist;
                val += sign * bessel_y0(x);
                grad -= (sign * k * bessel_y1(x) / dist) * diff;
            }
            *v = val;
            *g = grad;
        }
        Ok(())
    }

    /// Values only.
    pub fn values(&self, p: Vec2) -> Result<Vec<f64>> {
        Ok(self.eval(p)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_quarter_disk, build_sinai_domain};

    fn sinai() -> BilliardDomain {
        build_sinai_domain(0.4, 0.7).unwrap()
    }

    #[test]
    fn size_rule_matches_worked_values() {
        let d = sinai();
        assert!((semiclassical_size(&d, 100.0) - 67.283).abs() < 1e-3);
        assert_eq!(basis_size(&d, 100.0, 1.5), 101);
        assert_eq!(basis_size(&build_quarter_disk(), 20.0, 1.5), 15);
        let n4000 = basis_size(&d, 4000.0, 1.3);
        assert!((2600..=4100).contains(&n4000));
    }

    #[test]
    fn quarter_disk_offset_is_a_larger_quarter_circle() {
        let pts = build_offset_curve(&build_quarter_disk(), 0.1, 40).unwrap();
        assert_eq!(pts.len(), 40);
        for p in &pts {
            assert!((p.norm() - 1.1).abs() < 1e-12);
            assert!(p.x > 0.0 && p.y > 0.0);
        }
    }

    #[test]
    fn sinai_charges_sit_at_the_offset_distance_outside() {
        let d = sinai();
        let b = build_basis(&d, 100.0, 1.5).unwrap();
        assert_eq!(b.len(), 101);
        assert!((b.offset - 0.07).abs() < 1e-15);
        for q in &b.charges {
            let dist = d
                .segments()
                .iter()
                .filter(|s| !s.is_symmetry_line())
                .map(|s| s.distance(*q))
                .fold(f64::INFINITY, f64::min);
            assert!((dist - 0.07).abs() < 1e-6, "distance {dist}");
            assert!(!d.contains(*q));
        }
    }

    #[test]
    fn offset_larger_than_arc_radius_is_rejected() {
        assert!(build_offset_curve(&sinai(), 2.0, 10).is_err());
    }

    #[test]
    fn basis_vanishes_on_both_axes() {
        let b = build_basis(&sinai(), 30.0, 1.5).unwrap();
        for t in [0.05, 0.2, 0.4, 0.6] {
            for p in [Vec2::new(t, 0.0), Vec2::new(0.0, t)] {
                let (v, _) = b.eval(p).unwrap();
                assert!(v.iter().all(|x| x.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let b = build_basis(&sinai(), 40.0, 1.5).unwrap();
        let p = Vec2::new(0.3, 0.45);
        let h = 1e-6 / b.k;
        let (_, g) = b.eval(p).unwrap();
        let vx = |dx: f64, dy: f64| b.values(p + Vec2::new(dx, dy)).unwrap();
        let (xp, xm, yp, ym) = (vx(h, 0.0), vx(-h, 0.0), vx(0.0, h), vx(0.0, -h));
        for l in 0..b.len() {
            let fd = Vec2::new((xp[l] - xm[l]) / (2.0 * h), (yp[l] - ym[l]) / (2.0 * h));
            assert!((fd - g[l]).norm() / g[l].norm() < 1e-6, "l = {l}");
        }
    }

    #[test]
    fn basis_functions_solve_helmholtz() {
        let b = build_basis(&sinai(), 25.0, 1.5).unwrap();
        let p = Vec2::new(0.35, 0.3);
        let h = 2e-3 / b.k;
        let c = b.values(p).unwrap();
        let s: Vec<Vec<f64>> = [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)]
            .iter()
            .map(|&(dx, dy)| b.values(p + Vec2::new(dx, dy)).unwrap())
            .collect();
        for l in 0..b.len() {
            let lap = (s[0][l] + s[1][l] + s[2][l] + s[3][l] - 4.0 * c[l]) / (h * h);
            let scale = b.k * b.k * c[l].abs().max(1e-3);
            assert!((lap + b.k * b.k * c[l]).abs() / scale < 1e-4, "l = {l}");
        }
    }

    #[test]
    fn evaluation_at_a_charge_is_an_error() {
        let b = build_basis(&build_quarter_disk(), 10.0, 1.5).unwrap();
        assert!(b.eval(b.charges[0]).is_err());
    }
}
