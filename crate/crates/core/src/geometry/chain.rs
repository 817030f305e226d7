use std::f64::consts::TAU;

use super::segment::{BoundarySegment, SegmentRole};
use super::Vec2;
use crate::error::{geometry, Result};
use crate::quadrature::gauss;

/// Panels are at most this many wavelengths long.
pub const PANEL_WAVELENGTHS: f64 = 4.0;
/// Floor on Gauss nodes per panel, so coarse panels still resolve the geometry.
pub const MIN_PANEL_NODES: usize = 12;

/// A quadrature node on a boundary curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub position: Vec2,
    /// Outward unit normal.
    pub normal: Vec2,
    /// `r . n`
    pub rn: f64,
    /// Arclength weight.
    pub weight: f64,
    pub segment: usize,
    pub role: SegmentRole,
}

impl BoundaryNode {
    pub fn on_interface(&self) -> bool {
        self.role == SegmentRole::Interface
    }
}

/// A closed, positively oriented chain of boundary segments.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedChain {
    segments: Vec<BoundarySegment>,
}

impl ClosedChain {
    pub fn new(segments: Vec<BoundarySegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(geometry("empty boundary chain"));
        }
        let scale = segments.iter().map(|s| s.length()).sum::<f64>().max(1.0);
        for (i, seg) in segments.iter().enumerate() {
            let next = &segments[(i + 1) % segments.len()];
            let gap = (seg.end_point() - next.start_point()).norm();
            if gap > 1e-10 * scale {
                return Err(geometry(format!("chain not closed between segments {i} and next (gap {gap:e})")));
            }
        }
        let chain = ClosedChain { segments };
        if chain.area() <= 0.0 {
            return Err(geometry("chain is not positively oriented"));
        }
        Ok(chain)
    }

    pub fn segments(&self) -> &[BoundarySegment] {
        &self.segments
    }

    /// Enclosed area by Green's theorem, evaluated in closed form per segment.
    pub fn area(&self) -> f64 {
        self.segments.iter().map(BoundarySegment::green_area).sum()
    }

    pub fn perimeter(&self, include_symmetry_lines: bool) -> f64 {
        self.segments
            .iter()
            .filter(|s| include_symmetry_lines || !s.is_symmetry_line())
            .map(BoundarySegment::length)
            .sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.segments.iter().map(BoundarySegment::start_point)
    }

    /// Crossing-parity point-in-region test. Points within ~1e-12 of the
    /// boundary may go either way.
    pub fn contains(&self, p: Vec2) -> bool {
        // An irrational direction avoids passing exactly through vertices.
        let dir = Vec2::new(0.612_372_435_695_794_5, 0.790_569_415_042_094_8);
        let mut count = 0usize;
        for seg in &self.segments {
            seg.for_each_ray_hit(p, dir, 0.0, |_, _| count += 1);
        }
        count % 2 == 1
    }

    /// Distance from `p` to the nearest point of the chain.
    pub fn distance(&self, p: Vec2) -> f64 {
        self.segments.iter().map(|s| s.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Earliest hit of the ray `origin + s * dir` with `s > s_min`:
    /// `(s, segment index, segment parameter)`.
    pub fn first_hit(&self, origin: Vec2, dir: Vec2, s_min: f64) -> Option<(f64, usize, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for (i, seg) in self.segments.iter().enumerate() {
            seg.for_each_ray_hit(origin, dir, s_min, |s, t| {
                if best.is_none_or(|b| s < b.0) {
                    best = Some((s, i, t));
                }
            });
        }
        best
    }

    /// Sorted distances along the ray at which it crosses the chain.
    pub fn ray_crossings(&self, origin: Vec2, dir: Vec2, s_min: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for seg in &self.segments {
            seg.for_each_ray_hit(origin, dir, s_min, |s, _| out.push(s));
        }
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        out
    }

    /// Maximal intervals `[s0, s1]` of the ray lying inside the region.
    pub fn ray_inside_intervals(&self, origin: Vec2, dir: Vec2) -> Vec<(f64, f64)> {
        let cuts = self.ray_crossings(origin, dir, 1e-14);
        let mut out = Vec::new();
        let mut prev = 0.0;
        for &s in &cuts {
            let mid = origin + dir * (0.5 * (prev + s));
            if s - prev > 1e-14 && self.contains(mid) {
                out.push((prev, s));
            }
            prev = s;
        }
        out
    }

    /// Composite Gauss-Legendre nodes along the chain with at least
    /// `pts_per_wavelength * k / 2pi` nodes per unit length.
    pub fn quadrature(&self, k: f64, pts_per_wavelength: f64, include_symmetry_lines: bool) -> Vec<BoundaryNode> {
        let wavelength = TAU / k;
        let mut nodes = Vec::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if seg.is_symmetry_line() && !include_symmetry_lines {
                continue;
            }
            let len = seg.length();
            if len <= 0.0 {
                continue;
            }
            let panels = (len / (PANEL_WAVELENGTHS * wavelength)).ceil().max(1.0) as usize;
            let plen = len / panels as f64;
            let per_panel = ((pts_per_wavelength * plen / wavelength).ceil() as usize).max(MIN_PANEL_NODES);
            let rule = gauss(per_panel);
            for p in 0..panels {
                let t0 = p as f64 / panels as f64;
                let t1 = (p + 1) as f64 / panels as f64;
                for (t, w) in rule.mapped(t0, t1) {
                    let position = seg.point(t);
                    let normal = seg.normal(t);
                    nodes.push(BoundaryNode {
                        position,
                        normal,
                        rn: position.dot(&normal),
                        weight: w * len,
                        segment: i,
                        role: seg.role,
                    });
                }
            }
        }
        nodes
    }

    /// Area quadrature in polar coordinates about `center`, over angles
    /// `[theta_lo, theta_hi]`. Angular panels break at every vertex direction;
    /// radial panels follow the crossings of each ray with the chain.
    pub fn polar_quadrature(&self, center: Vec2, theta_lo: f64, theta_hi: f64, rule: PolarRule) -> Vec<(Vec2, f64)> {
        let mut breaks = vec![theta_lo, theta_hi];
        for v in self.vertices() {
            let d = v - center;
            if d.norm() < 1e-12 {
                continue;
            }
            let mut a = d.y.atan2(d.x);
            while a < theta_lo {
                a += TAU;
            }
            if a > theta_lo + 1e-12 && a < theta_hi - 1e-12 {
                breaks.push(a);
            }
        }
        breaks.sort_by(|a, b| a.total_cmp(b));
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let wavelength = TAU / rule.k;
        let reach = self.vertices().map(|v| (v - center).norm()).fold(0.0, f64::max).max(
            self.segments.iter().map(|s| (s.point(0.5) - center).norm()).fold(0.0, f64::max),
        );
        let mut out = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let arc_len = reach * (b - a);
            let panels = (arc_len / (PANEL_WAVELENGTHS * wavelength)).ceil().max(1.0) as usize;
            let per = ((rule.pts_per_wavelength * arc_len / panels as f64 / wavelength).ceil() as usize)
                .max(rule.min_nodes);
            for p in 0..panels {
                let ta = a + (b - a) * p as f64 / panels as f64;
                let tb = a + (b - a) * (p + 1) as f64 / panels as f64;
                for (th, wth) in gauss(per).mapped(ta, tb) {
                    let dir = Vec2::new(th.cos(), th.sin());
                    for (s0, s1) in self.ray_inside_intervals(center, dir) {
                        let len = s1 - s0;
                        let rp = (len / (PANEL_WAVELENGTHS * wavelength)).ceil().max(1.0) as usize;
                        let rn = ((rule.pts_per_wavelength * len / rp as f64 / wavelength).ceil() as usize)
                            .max(rule.min_nodes);
                        for q in 0..rp {
                            let ra = s0 + len * q as f64 / rp as f64;
                            let rb = s0 + len * (q + 1) as f64 / rp as f64;
                            for (rho, wr) in gauss(rn).mapped(ra, rb) {
                                out.push((center + dir * rho, wth * wr * rho));
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Resolution of a polar area quadrature.
#[derive(Debug, Clone, Copy)]
pub struct PolarRule {
    pub k: f64,
    pub pts_per_wavelength: f64,
    pub min_nodes: usize,
}

impl PolarRule {
    pub fn new(k: f64, pts_per_wavelength: f64) -> Self {
        PolarRule { k, pts_per_wavelength, min_nodes: MIN_PANEL_NODES }
    }
}
