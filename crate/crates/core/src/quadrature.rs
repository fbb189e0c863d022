//! Composite Gauss-Legendre quadrature.

/// Points per panel used by [`composite`].
pub const POINTS_PER_PANEL: usize = 4;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

/// Composite rule: `panels` equal panels on `[a, b]`, [`POINTS_PER_PANEL`] nodes each.
#[derive(Debug, Clone)]
pub struct Composite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Composite {
    pub fn new(points_per_panel: usize) -> Self {
        let (nodes, weights) = gauss_legendre(points_per_panel);
        Self { nodes, weights }
    }

    pub fn integrate<F>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64
    where
        F: FnMut(f64) -> f64,
    {
        if b == a {
            return 0.0;
        }
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for k in 0..panels {
            let left = a + h * k as f64;
            let mid = left + 0.5 * h;
            let mut s = 0.0;
            for (t, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * t);
            }
            total += 0.5 * h * s;
        }
        total
    }
}

impl Default for Composite {
    fn default() -> Self {
        Self::new(POINTS_PER_PANEL)
    }
}

pub fn composite<F>(f: F, a: f64, b: f64, panels: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    Composite::default().integrate(f, a, b, panels)
}
