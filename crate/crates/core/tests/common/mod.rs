//! Shared oracles for the integration suites.
#![allow(dead_code)]

use bque::geometry::Vec2;
use bque::quadrature::gauss;

/// Polar description of a region: rays from the origin leave a disk of
/// radius `disk`, or enter one of `obstacles`; an optional line `nu . r = c`
/// keeps the `<=` side (`keep_below`) or the `>=` side.
#[derive(Debug, Clone)]
pub struct PolarRegion {
    pub disk: Option<f64>,
    pub obstacles: Vec<(Vec2, f64)>,
    pub line: Option<(Vec2, f64, bool)>,
}

impl PolarRegion {
    pub fn quarter_disk() -> Self {
        PolarRegion { disk: Some(1.0), obstacles: vec![], line: None }
    }

    /// Desymmetrized Sinai shape from its two arc circles, written out from
    /// the construction: one circle centred on each axis, tangent to the
    /// given angles at (1, 1).
    pub fn sinai(theta1: f64, theta2: f64) -> Self {
        let cy = Vec2::new(0.0, 1.0 + 1.0 / theta1.tan());
        let cx = Vec2::new(1.0 + 1.0 / theta2.tan(), 0.0);
        PolarRegion { disk: None, obstacles: vec![(cy, 1.0 / theta1.sin()), (cx, 1.0 / theta2.sin())], line: None }
    }

    pub fn cut(mut self, nu: Vec2, c: f64, keep_below: bool) -> Self {
        self.line = Some((nu, c, keep_below));
        self
    }

    fn wall(&self, d: Vec2) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        if let Some(r) = self.disk {
            best = (r, 0);
        }
        for (i, (c, r)) in self.obstacles.iter().enumerate() {
            let b = d.dot(c);
            let disc = b * b - (c.norm_squared() - r * r);
            if disc >= 0.0 {
                let t = b - disc.sqrt();
                if t > 0.0 && t < best.0 {
                    best = (t, i + 1);
                }
            }
        }
        best
    }

    /// Radial interval at angle `theta` and a label of which pieces bound it.
    fn interval(&self, theta: f64) -> (f64, f64, usize) {
        let d = Vec2::new(theta.cos(), theta.sin());
        let (w, wi) = self.wall(d);
        let (mut lo, mut hi) = (0.0, w);
        let mut label = wi * 4;
        if let Some((nu, c, below)) = self.line {
            let nd = nu.dot(&d);
            let t = if nd > 0.0 { c / nd } else { f64::INFINITY };
            if below {
                if t < hi {
                    hi = t;
                    label += 1;
                }
            } else if t < hi {
                lo = t;
                label += 2;
            } else {
                lo = hi;
                label += 3;
            }
        }
        (lo, hi, label)
    }

    /// Angles in `(0, pi/2)` where the bounding pieces change.
    fn kinks(&self) -> Vec<f64> {
        let n = 4000;
        let h = std::f64::consts::FRAC_PI_2 / n as f64;
        let mut out = vec![0.0];
        for i in 0..n {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let (la, lb) = (self.interval(a + 1e-14).2, self.interval(b - 1e-14).2);
            if la != lb {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..80 {
                    let m = 0.5 * (lo + hi);
                    if self.interval(m).2 == la {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
        }
        out.push(std::f64::consts::FRAC_PI_2);
        out
    }

    /// Tensor Gauss nodes in `(theta, rho)` resolving wavenumber `k`.
    pub fn nodes(&self, k: f64, order: usize) -> Vec<(Vec2, f64)> {
        let rule = gauss(order);
        let panel = (std::f64::consts::TAU / k).min(0.25);
        let kinks = self.kinks();
        let mut out = Vec::new();
        for w in kinks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let np = ((b - a) * 1.5 / panel).ceil().max(1.0) as usize;
            for p in 0..np {
                let ta = a + (b - a) * p as f64 / np as f64;
                let tb = a + (b - a) * (p + 1) as f64 / np as f64;
                for (th, wt) in rule.mapped(ta, tb) {
                    let (lo, hi, _) = self.interval(th);
                    if hi <= lo {
                        continue;
                    }
                    let d = Vec2::new(th.cos(), th.sin());
                    let nr = ((hi - lo) / panel).ceil().max(1.0) as usize;
                    for q in 0..nr {
                        let ra = lo + (hi - lo) * q as f64 / nr as f64;
                        let rb = lo + (hi - lo) * (q + 1) as f64 / nr as f64;
                        for (rho, wr) in rule.mapped(ra, rb) {
                            out.push((d * rho, wt * wr * rho));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Zeros of `J_n` in `[lo, hi]` by bracketing and bisection, with `J_n`
/// from its integral representation `(1/pi) int_0^pi cos(n t - x sin t) dt`.
pub fn bessel_j_zeros(n: u32, lo: f64, hi: f64) -> Vec<f64> {
    let j = |x: f64| {
        let rule = gauss(80);
        let panels = 8;
        let mut s = 0.0;
        for p in 0..panels {
            let a = std::f64::consts::PI * p as f64 / panels as f64;
            let b = std::f64::consts::PI * (p + 1) as f64 / panels as f64;
            for (t, w) in rule.mapped(a, b) {
                s += w * (n as f64 * t - x * t.sin()).cos();
            }
        }
        s / std::f64::consts::PI
    };
    let step = 0.05;
    let mut out = Vec::new();
    // j_{n,1} > n; below that the quadrature only sees round-off
    let mut x = lo.max(n as f64).max(1e-3);
    let mut fx = j(x);
    while x < hi {
        let y = (x + step).min(hi);
        let fy = j(y);
        if fx * fy < 0.0 {
            let (mut a, mut b, mut fa) = (x, y, fx);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                let fm = j(m);
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

/// Dirichlet eigenvalues of the odd-odd quarter disk in `[lo, hi)`: zeros of
/// `J_{2m}`, `m >= 1`.
pub fn quarter_disk_oracle(lo: f64, hi: f64) -> Vec<f64> {
    let mut all = Vec::new();
    let mut m = 1;
    loop {
        if (2 * m) as f64 >= hi {
            break;
        }
        all.extend(bessel_j_zeros(2 * m, lo, hi).into_iter().filter(|z| *z >= lo && *z < hi));
        m += 1;
    }
    all.sort_by(|a, b| a.total_cmp(b));
    all
}
