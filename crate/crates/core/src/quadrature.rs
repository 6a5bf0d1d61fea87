//! Composite Gauss-Lobatto panels: nodes, weights, differentiation and
//! cumulative integration on a 1D interval.

use crate::error::{Error, Result};

/// Legendre polynomial `P_n(x)` and its derivative.
pub fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let dp = if (x * x - 1.0).abs() < 1e-300 {
        0.5 * (n * (n + 1)) as f64 * x.powi(n as i32 + 1)
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss-Lobatto nodes and weights of degree `n` (`n + 1` points) on `[-1, 1]`.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x: Vec<f64> = (0..=n).map(|j| -(std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
    for xj in x.iter_mut().take(n).skip(1) {
        for _ in 0..100 {
            let (p, _) = legendre(n, *xj);
            let (pm, _) = legendre(n - 1, *xj);
            let dx = (*xj * p - pm) / ((n + 1) as f64 * p);
            *xj -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
    }
    x[0] = -1.0;
    x[n] = 1.0;
    let w = x
        .iter()
        .map(|&xj| {
            let (p, _) = legendre(n, xj);
            2.0 / ((n * (n + 1)) as f64 * p * p)
        })
        .collect();
    (x, w)
}

/// Reference-element operators for one panel.
#[derive(Debug, Clone)]
struct Reference {
    x: Vec<f64>,
    w: Vec<f64>,
    /// `d[k][j] = l_j'(x_k)`.
    d: Vec<Vec<f64>>,
    /// `s[k][j] = int_{-1}^{x_k} l_j`.
    s: Vec<Vec<f64>>,
    bary: Vec<f64>,
}

impl Reference {
    fn new(n: usize) -> Self {
        let (x, w) = gauss_lobatto(n);
        let m = n + 1;
        let bary: Vec<f64> = (0..m)
            .map(|j| 1.0 / (0..m).filter(|&k| k != j).map(|k| x[j] - x[k]).product::<f64>())
            .collect();
        let mut d = vec![vec![0.0; m]; m];
        for k in 0..m {
            let mut diag = 0.0;
            for j in 0..m {
                if j != k {
                    d[k][j] = bary[j] / bary[k] / (x[k] - x[j]);
                    diag -= d[k][j];
                }
            }
            d[k][k] = diag;
        }
        let (gx, gw) = gauss_legendre(m);
        let mut s = vec![vec![0.0; m]; m];
        let mut r = Reference { x: x.clone(), w, d, s: Vec::new(), bary };
        for k in 1..m {
            let (a, b) = (-1.0, x[k]);
            for (q, wq) in gx.iter().zip(&gw) {
                let t = 0.5 * (a + b) + 0.5 * (b - a) * q;
                let l = r.lagrange(t);
                for j in 0..m {
                    s[k][j] += 0.5 * (b - a) * wq * l[j];
                }
            }
        }
        r.s = s;
        r
    }

    /// Values of all Lagrange basis polynomials at `t`.
    fn lagrange(&self, t: f64) -> Vec<f64> {
        let m = self.x.len();
        if let Some(j) = self.x.iter().position(|&xj| xj == t) {
            let mut out = vec![0.0; m];
            out[j] = 1.0;
            return out;
        }
        let terms: Vec<f64> = (0..m).map(|j| self.bary[j] / (t - self.x[j])).collect();
        let sum: f64 = terms.iter().sum();
        terms.iter().map(|v| v / sum).collect()
    }
}

/// Piecewise Gauss-Lobatto grid on `[a, b]`.
#[derive(Debug, Clone)]
pub struct PanelAxis {
    pub degree: usize,
    pub edges: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    reference: Reference,
}

impl PanelAxis {
    /// Build from strictly increasing panel edges.
    pub fn new(edges: Vec<f64>, degree: usize) -> Result<Self> {
        if edges.len() < 2 || degree < 2 {
            return Err(Error::Parameter("an axis needs at least one panel of degree >= 2".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter(format!("panel edges must increase strictly: {edges:?}")));
        }
        let reference = Reference::new(degree);
        let mut nodes = vec![edges[0]];
        let mut weights = vec![0.0];
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = 0.5 * (b - a);
            let base = nodes.len() - 1;
            for (k, (&x, &wt)) in reference.x.iter().zip(&reference.w).enumerate() {
                if k == 0 {
                    weights[base] += h * wt;
                    continue;
                }
                nodes.push(if k == degree { b } else { a + h * (x + 1.0) });
                weights.push(h * wt);
            }
        }
        Ok(PanelAxis { degree, edges, nodes, weights, reference })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    /// Quadrature of sampled values over the whole axis.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, b)| a * b).sum()
    }

    /// `int_{a}^{x_k} f` at every node.
    pub fn cumulative(&self, f: &[f64]) -> Vec<f64> {
        let n = self.degree;
        let mut out = vec![0.0; self.len()];
        for p in 0..self.panels() {
            let h = 0.5 * (self.edges[p + 1] - self.edges[p]);
            let base = p * n;
            for k in 1..=n {
                let s: f64 = (0..=n).map(|j| self.reference.s[k][j] * f[base + j]).sum();
                out[base + k] = out[base] + h * s;
            }
        }
        out
    }

    /// `int_{x_k}^{b} f` at every node.
    pub fn tail(&self, f: &[f64]) -> Vec<f64> {
        let c = self.cumulative(f);
        let total = c[c.len() - 1];
        c.iter().map(|v| total - v).collect()
    }

    /// Panel-wise polynomial derivative; shared nodes average both sides.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        let n = self.degree;
        let mut out = vec![0.0; self.len()];
        let mut count = vec![0u8; self.len()];
        for p in 0..self.panels() {
            let h = 0.5 * (self.edges[p + 1] - self.edges[p]);
            let base = p * n;
            for k in 0..=n {
                let s: f64 = (0..=n).map(|j| self.reference.d[k][j] * f[base + j]).sum();
                out[base + k] += s / h;
                count[base + k] += 1;
            }
        }
        out.iter().zip(&count).map(|(v, c)| v / *c as f64).collect()
    }

    /// Index of the panel containing `x` (clamped).
    pub fn panel_of(&self, x: f64) -> usize {
        match self.edges.iter().position(|&e| e > x) {
            Some(0) => 0,
            Some(p) => (p - 1).min(self.panels() - 1),
            None => self.panels() - 1,
        }
    }

    /// Interpolate sampled values at `x`.
    pub fn interpolate(&self, f: &[f64], x: f64) -> f64 {
        let p = self.panel_of(x);
        let (a, b) = (self.edges[p], self.edges[p + 1]);
        let t = (2.0 * (x - a) / (b - a) - 1.0).clamp(-1.0, 1.0);
        let l = self.reference.lagrange(t);
        (0..=self.degree).map(|j| l[j] * f[p * self.degree + j]).sum()
    }
}

/// `n` panel edges on `[0, len]` clustered towards 0: `len (e^{beta k/n} - 1) / (e^beta - 1)`.
pub fn geometric_edges(len: f64, n: usize, beta: f64) -> Vec<f64> {
    let den = beta.exp() - 1.0;
    (0..=n)
        .map(|k| if k == n { len } else { len * ((beta * k as f64 / n as f64).exp() - 1.0) / den })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lobatto_weights_sum_to_two() {
        let (x, w) = gauss_lobatto(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn integrates_and_differentiates_polynomials() {
        let ax = PanelAxis::new(vec![0.0, 0.3, 1.0, 2.0], 8).unwrap();
        let f: Vec<f64> = ax.nodes.iter().map(|x| x.powi(7) - 3.0 * x * x).collect();
        let exact = 2f64.powi(8) / 8.0 - 8.0;
        assert!((ax.integrate(&f) - exact).abs() < 1e-12);
        let c = ax.cumulative(&f);
        for (x, v) in ax.nodes.iter().zip(&c) {
            assert!((v - (x.powi(8) / 8.0 - x.powi(3))).abs() < 1e-12);
        }
        let d = ax.derivative(&f);
        for (x, v) in ax.nodes.iter().zip(&d) {
            assert!((v - (7.0 * x.powi(6) - 6.0 * x)).abs() < 1e-9);
        }
        assert!((ax.interpolate(&f, 0.77) - (0.77f64.powi(7) - 3.0 * 0.77 * 0.77)).abs() < 1e-12);
    }
}
