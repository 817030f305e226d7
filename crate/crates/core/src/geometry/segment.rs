use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::Vec2;

/// What a piece of boundary is: a hard wall, a desymmetrization axis, or the
/// straight interface that cuts a test region out of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentRole {
    Wall,
    SymmetryLine,
    Interface,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    Line { p0: Vec2, p1: Vec2 },
    /// Circular arc traversed from angle `start` to angle `end`; the sign of
    /// `end - start` is the orientation.
    Arc { center: Vec2, radius: f64, start: f64, end: f64 },
}

/// One smooth piece of a closed boundary chain, parametrized by `t` in `[0, 1]`
/// proportional to arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySegment {
    pub kind: SegmentKind,
    pub role: SegmentRole,
}

const ANGLE_TOL: f64 = 1e-12;

impl BoundarySegment {
    pub fn line(p0: Vec2, p1: Vec2, role: SegmentRole) -> Self {
        BoundarySegment { kind: SegmentKind::Line { p0, p1 }, role }
    }

    pub fn arc(center: Vec2, radius: f64, start: f64, end: f64, role: SegmentRole) -> Self {
        BoundarySegment { kind: SegmentKind::Arc { center, radius, start, end }, role }
    }

    pub fn is_symmetry_line(&self) -> bool {
        self.role == SegmentRole::SymmetryLine
    }

    pub fn point(&self, t: f64) -> Vec2 {
        match self.kind {
            SegmentKind::Line { p0, p1 } => p0 + (p1 - p0) * t,
            SegmentKind::Arc { center, radius, start, end } => {
                let th = start + (end - start) * t;
                center + Vec2::new(th.cos(), th.sin()) * radius
            }
        }
    }

    pub fn start_point(&self) -> Vec2 {
        self.point(0.0)
    }

    pub fn end_point(&self) -> Vec2 {
        self.point(1.0)
    }

    pub fn length(&self) -> f64 {
        match self.kind {
            SegmentKind::Line { p0, p1 } => (p1 - p0).norm(),
            SegmentKind::Arc { radius, start, end, .. } => radius * (end - start).abs(),
        }
    }

    /// Unit tangent in the direction of increasing `t`.
    pub fn tangent(&self, t: f64) -> Vec2 {
        match self.kind {
            SegmentKind::Line { p0, p1 } => (p1 - p0).normalize(),
            SegmentKind::Arc { start, end, .. } => {
                let th = start + (end - start) * t;
                Vec2::new(-th.sin(), th.cos()) * (end - start).signum()
            }
        }
    }

    /// Unit normal to the right of the direction of travel; outward for a
    /// positively oriented chain.
    pub fn normal(&self, t: f64) -> Vec2 {
        let tg = self.tangent(t);
        Vec2::new(tg.y, -tg.x)
    }

    /// Contribution of this piece to the Green's-theorem area integral
    /// `1/2 * int (x dy - y dx)`.
    pub fn green_area(&self) -> f64 {
        match self.kind {
            SegmentKind::Line { p0, p1 } => 0.5 * (p0.x * p1.y - p1.x * p0.y),
            SegmentKind::Arc { center, radius, start, end } => {
                0.5 * (radius * center.x * (end.sin() - start.sin())
                    - radius * center.y * (end.cos() - start.cos())
                    + radius * radius * (end - start))
            }
        }
    }

    /// Arc parameter of an angle on the supporting circle, if it lies on the arc.
    fn arc_param(start: f64, end: f64, theta: f64) -> Option<f64> {
        let sweep = (end - start).abs();
        let mut delta = if end >= start { theta - start } else { start - theta };
        delta = delta.rem_euclid(TAU);
        if delta > TAU - ANGLE_TOL {
            delta -= TAU;
        }
        let t = delta / sweep;
        if (-ANGLE_TOL..=1.0 + ANGLE_TOL).contains(&t) {
            Some(t.clamp(0.0, 1.0))
        } else {
            None
        }
    }

    /// Calls `f(s, t)` for every intersection of the ray `origin + s * dir`
    /// (`s > s_min`) with this segment, `t` being the segment parameter.
    pub fn for_each_ray_hit(&self, origin: Vec2, dir: Vec2, s_min: f64, mut f: impl FnMut(f64, f64)) {
        match self.kind {
            SegmentKind::Line { p0, p1 } => {
                let e = p1 - p0;
                let denom = dir.x * (-e.y) + dir.y * e.x;
                // parallel rays never register a hit (grazing along a wall)
                if denom.abs() < 1e-300 {
                    return;
                }
                let w = p0 - origin;
                let s = (w.x * (-e.y) + w.y * e.x) / denom;
                let t = (dir.x * w.y - dir.y * w.x) / denom;
                if s > s_min && (-1e-14..=1.0 + 1e-14).contains(&t) {
                    f(s, t.clamp(0.0, 1.0));
                }
            }
            SegmentKind::Arc { center, radius, start, end } => {
                let a = dir.norm_squared();
                let oc = origin - center;
                let b = dir.dot(&oc);
                let cc = oc.norm_squared() - radius * radius;
                let disc = b * b - a * cc;
                if disc < 0.0 {
                    return;
                }
                let sq = disc.sqrt();
                // stable quadratic roots
                let q = -(b + b.signum() * sq);
                let (r1, r2) = if q != 0.0 { (q / a, cc / q) } else { (0.0, 0.0) };
                let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
                for s in [lo, hi] {
                    if s > s_min {
                        let p = oc + dir * s;
                        if let Some(t) = Self::arc_param(start, end, p.y.atan2(p.x)) {
                            f(s, t);
                        }
                    }
                }
            }
        }
    }

    /// Parameters in the open interval `(0, 1)` where the segment crosses the
    /// line `nu . r = c`, sorted.
    pub fn line_crossings(&self, nu: Vec2, c: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.kind {
            SegmentKind::Line { p0, p1 } => {
                let d = nu.dot(&(p1 - p0));
                if d.abs() > 1e-300 {
                    let t = (c - nu.dot(&p0)) / d;
                    if t > 1e-14 && t < 1.0 - 1e-14 {
                        out.push(t);
                    }
                }
            }
            SegmentKind::Arc { center, radius, start, end } => {
                let rhs = (c - nu.dot(&center)) / (radius * nu.norm());
                if rhs.abs() <= 1.0 {
                    let alpha = nu.y.atan2(nu.x);
                    let acos = rhs.acos();
                    for th in [alpha + acos, alpha - acos] {
                        if let Some(t) = Self::arc_param(start, end, th) {
                            if t > 1e-14 && t < 1.0 - 1e-14 {
                                out.push(t);
                            }
                        }
                    }
                }
            }
        }
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        out
    }

    /// The piece between parameters `t0 < t1`.
    pub fn sub(&self, t0: f64, t1: f64) -> BoundarySegment {
        let kind = match self.kind {
            SegmentKind::Line { .. } => SegmentKind::Line { p0: self.point(t0), p1: self.point(t1) },
            SegmentKind::Arc { center, radius, start, end } => SegmentKind::Arc {
                center,
                radius,
                start: start + (end - start) * t0,
                end: start + (end - start) * t1,
            },
        };
        BoundarySegment { kind, role: self.role }
    }

    /// Euclidean distance from `p` to the nearest point of the segment.
    pub fn distance(&self, p: Vec2) -> f64 {
        match self.kind {
            SegmentKind::Line { p0, p1 } => {
                let e = p1 - p0;
                let t = ((p - p0).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                (p - (p0 + e * t)).norm()
            }
            SegmentKind::Arc { center, radius, start, end } => {
                let d = p - center;
                match Self::arc_param(start, end, d.y.atan2(d.x)) {
                    Some(_) => (d.norm() - radius).abs(),
                    None => (p - self.start_point()).norm().min((p - self.end_point()).norm()),
                }
            }
        }
    }

    /// Distance from `p` to the segment's supporting curve (line or circle).
    pub fn on_curve_residual(&self, p: Vec2) -> f64 {
        match self.kind {
            SegmentKind::Line { p0, p1 } => {
                let e = (p1 - p0).normalize();
                let w = p - p0;
                (w.x * e.y - w.y * e.x).abs()
            }
            SegmentKind::Arc { center, radius, .. } => ((p - center).norm() - radius).abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn arc_normal_points_away_for_ccw_and_inward_for_cw() {
        let ccw = BoundarySegment::arc(Vec2::zeros(), 1.0, 0.0, FRAC_PI_2, SegmentRole::Wall);
        let n = ccw.normal(0.5);
        assert!((n - ccw.point(0.5)).norm() < 1e-14);
        let cw = BoundarySegment::arc(Vec2::new(2.0, 0.0), 1.0, PI, 0.5 * PI, SegmentRole::Wall);
        let p = cw.point(0.3);
        let n = cw.normal(0.3);
        assert!((n - (Vec2::new(2.0, 0.0) - p)).norm() < 1e-14);
    }

    #[test]
    fn ray_hits_on_arc_respect_angular_range() {
        let arc = BoundarySegment::arc(Vec2::zeros(), 1.0, 0.0, FRAC_PI_2, SegmentRole::Wall);
        let mut hits = vec![];
        arc.for_each_ray_hit(Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0), 1e-12, |s, t| hits.push((s, t)));
        assert_eq!(hits.len(), 1);
        assert!((hits[0].0 - 0.5).abs() < 1e-14 && hits[0].1.abs() < 1e-12);
        hits.clear();
        arc.for_each_ray_hit(Vec2::new(0.5, 0.0), Vec2::new(-1.0, 0.0), 1e-12, |s, t| hits.push((s, t)));
        assert!(hits.is_empty());
    }

    #[test]
    fn line_crossings_on_arc() {
        let arc = BoundarySegment::arc(Vec2::zeros(), 1.0, 0.0, FRAC_PI_2, SegmentRole::Wall);
        let t = arc.line_crossings(Vec2::new(1.0, 0.0), 0.5);
        assert_eq!(t.len(), 1);
        let p = arc.point(t[0]);
        assert!((p.x - 0.5).abs() < 1e-14);
    }

    #[test]
    fn green_area_of_full_circle() {
        let c = BoundarySegment::arc(Vec2::new(0.3, -0.2), 2.0, 0.1, 0.1 + TAU, SegmentRole::Wall);
        assert!((c.green_area() - 4.0 * PI).abs() < 1e-13);
    }
}
