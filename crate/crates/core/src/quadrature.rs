//! Gauss-Legendre rules on `[-1, 1]` and composite rules on intervals.

use std::f64::consts::PI;
use std::sync::OnceLock;

const MAX_CACHED: usize = 160;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Shared rule for `n` points; rules up to 160 points are computed once.
pub fn gauss(n: usize) -> std::borrow::Cow<'static, GaussRule> {
    static CACHE: OnceLock<Vec<GaussRule>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (1..=MAX_CACHED).map(GaussRule::new).collect());
    if (1..=MAX_CACHED).contains(&n) {
        std::borrow::Cow::Borrowed(&cache[n - 1])
    } else {
        std::borrow::Cow::Owned(GaussRule::new(n))
    }
}

/// Composite rule on `[a, b]` with `panels` equal panels of `per_panel` nodes each.
pub fn composite(a: f64, b: f64, panels: usize, per_panel: usize) -> Vec<(f64, f64)> {
    let rule = gauss(per_panel);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let lo = a + h * p as f64;
        out.extend(rule.mapped(lo, lo + h));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 16, 40, 101] {
            let rule = gauss(n);
            for deg in 0..(2 * n) {
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((s - exact).abs() < 1e-13, "n={n} deg={deg} got {s}");
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let pts = composite(0.5, 3.0, 7, 12);
        let s: f64 = pts.iter().map(|p| p.1).sum();
        assert!((s - 2.5).abs() < 1e-14);
        let osc: f64 = composite(0.0, 10.0, 10, 20).iter().map(|(x, w)| w * (3.0 * x).cos()).sum();
        assert!((osc - (30.0f64).sin() / 3.0).abs() < 1e-13);
    }
}
