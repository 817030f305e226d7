//! Bessel functions used by the basis and the oracles.
//!
//! Values come from the fdlibm-derived routines in `libm`, which are accurate
//! to a few ulp for the argument range used here.

/// Y0(x) for x > 0.
#[inline]
pub fn bessel_y0(x: f64) -> f64 {
    libm::y0(x)
}

/// Y1(x) for x > 0.
#[inline]
pub fn bessel_y1(x: f64) -> f64 {
    libm::y1(x)
}

#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

#[inline]
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// J_n(x) for integer order.
#[inline]
pub fn bessel_jn(n: i32, x: f64) -> f64 {
    libm::jn(n, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from Abramowitz & Stegun tables.
    #[test]
    fn tabulated_values() {
        assert!((bessel_y0(1.0) - 0.088_256_964_215_677).abs() < 1e-14);
        assert!((bessel_y1(1.0) + 0.781_212_821_300_289).abs() < 1e-14);
        assert!((bessel_j0(2.404_825_557_695_773)).abs() < 1e-15);
        assert!((bessel_jn(2, 5.135_622_301_840_683)).abs() < 1e-14);
    }

    #[test]
    fn wronskian_holds_over_range() {
        // J1 Y0 - J0 Y1 = 2 / (pi x)
        let mut x = 1e-3;
        while x < 1e5 {
            let w = bessel_j1(x) * bessel_y0(x) - bessel_j0(x) * bessel_y1(x);
            let exact = 2.0 / (std::f64::consts::PI * x);
            assert!(((w - exact) / exact).abs() < 1e-12, "x={x} w={w}");
            x *= 1.37;
        }
    }
}
