//! Gauss-Legendre rules and wall-graded composite quadrature on [0,1].

use std::f64::consts::PI;

/// Nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n == 1 {
        x[0] = 0.0;
        w[0] = 2.0;
    }
    (x, w)
}

/// Composite rule on [0,1]: nodes and weights.
#[derive(Debug, Clone)]
pub struct ZRule {
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

impl ZRule {
    /// Single Gauss-Legendre panel on [0,1].
    pub fn gauss(n: usize) -> Self {
        Self::from_breaks(&[0.0, 1.0], n)
    }

    /// Uniform panels.
    pub fn uniform(panels: usize, n: usize) -> Self {
        let b: Vec<f64> = (0..=panels).map(|i| i as f64 / panels as f64).collect();
        Self::from_breaks(&b, n)
    }

    /// Panels shrinking geometrically toward both walls down to `min_width`,
    /// resolving exponential layers of any thickness above it.
    pub fn layered(min_width: f64, n: usize) -> Self {
        let mut half = vec![0.0];
        let mut h = min_width.clamp(1e-300, 0.05);
        let mut z = 0.0;
        while z + h < 0.5 {
            z += h;
            half.push(z);
            h *= 1.6;
        }
        half.push(0.5);
        // mirror nodes and weights so top panels keep exact widths
        let lower = Self::from_breaks(&half, n);
        let mut z = lower.z.clone();
        let mut w = lower.w.clone();
        for (zz, ww) in lower.z.iter().zip(&lower.w).rev() {
            z.push(1.0 - zz);
            w.push(*ww);
        }
        ZRule { z, w }
    }

    pub fn from_breaks(b: &[f64], n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut zz = Vec::with_capacity(n * (b.len() - 1));
        let mut ww = Vec::with_capacity(n * (b.len() - 1));
        for p in b.windows(2) {
            let (a, c) = (p[0], p[1]);
            let half = 0.5 * (c - a);
            for i in 0..n {
                zz.push(a + half * (x[i] + 1.0));
                ww.push(half * w[i]);
            }
        }
        ZRule { z: zz, w: ww }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.z.iter().zip(&self.w).map(|(&z, &w)| w * f(z)).sum()
    }
}

/// Composite Gauss-Legendre over [a,b] with `panels` equal pieces.
pub fn integrate_complex(
    a: f64,
    b: f64,
    panels: usize,
    n: usize,
    f: impl Fn(f64) -> num_complex::Complex64,
) -> num_complex::Complex64 {
    let (x, w) = gauss_legendre(n);
    let h = (b - a) / panels as f64;
    let mut s = num_complex::Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a0 = a + p as f64 * h;
        let mut ps = num_complex::Complex64::new(0.0, 0.0);
        for i in 0..n {
            ps += f(a0 + 0.5 * h * (x[i] + 1.0)) * w[i];
        }
        s += ps * (0.5 * h);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exact_for_polynomials() {
        for n in [1usize, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn layered_rule_resolves_thin_exponentials() {
        let r = ZRule::layered(1e-10, 16);
        for d in [1e-1, 1e-4, 1e-8] {
            let q = r.integrate(|z| (-z / d).exp());
            let exact = d * (1.0 - (-1.0 / d).exp());
            assert!((q / exact - 1.0).abs() < 1e-12, "d={d}");
            let q1 = r.integrate(|z| (-(1.0 - z) / d).exp());
            // 1 - z carries an absolute rounding error of one ulp
            assert!((q1 / exact - 1.0).abs() < 1e-12 + 1e-15 / d, "d={d}");
        }
    }
}
