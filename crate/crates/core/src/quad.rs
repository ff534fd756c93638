//! Gauss–Legendre rules and composite panels.

use std::f64::consts::PI;

/// Nodes and weights of the `m`-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..(m + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=m {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * pm - pm1) / (z * z - 1.0);
            let dz = pm / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite rule with `panels` equal panels of `order` points on [a, b].
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut xs = Vec::with_capacity(panels * order);
    let mut ws = Vec::with_capacity(panels * order);
    let len = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * len;
        for (x, w) in gx.iter().zip(&gw) {
            xs.push(lo + 0.5 * len * (x + 1.0));
            ws.push(0.5 * len * w);
        }
    }
    (xs, ws)
}

/// Composite rule over consecutive breakpoints, each piece split into panels no wider than `max_panel`.
pub fn composite_breaks(breaks: &[f64], max_panel: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b <= a {
            continue;
        }
        let panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
        let (x, w) = composite(a, b, panels, order);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials() {
        for m in 1..12 {
            let (x, w) = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "m={m} deg={deg}");
            }
        }
    }

    #[test]
    fn composite_integrates_exp() {
        let (x, w) = composite(0.0, 2.0, 5, 8);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.exp()).sum();
        assert!((q - (2f64.exp() - 1.0)).abs() < 1e-13);
    }
}
