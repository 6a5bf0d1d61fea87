//! Layer fields in closed form.
//!
//! A field is the real part of `sum_t C_t(x, y) xi^{p_t} exp(-lambda_t xi)`
//! with `lambda` one of the two decaying roots `(1 +- i) / sqrt(2)` and
//! complex coefficient fields on the horizontal grid.

use num_complex::Complex64 as C;

use crate::spectral::Spectral;

/// Decaying exponential rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Root {
    /// `sqrt(i) = (1 + i) / sqrt(2)`.
    Plus,
    /// `sqrt(-i) = (1 - i) / sqrt(2)`.
    Minus,
}

impl Root {
    pub fn value(self) -> C {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Root::Plus => C::new(h, h),
            Root::Minus => C::new(h, -h),
        }
    }

    pub fn conj(self) -> Root {
        match self {
            Root::Plus => Root::Minus,
            Root::Minus => Root::Plus,
        }
    }
}

/// One term `C(x, y) xi^p exp(-lambda xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub p: usize,
    pub root: Root,
    pub c: Vec<C>,
}

/// Sum of terms; the physical field is its real part.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpPoly {
    pub n: usize,
    pub terms: Vec<Term>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

impl ExpPoly {
    pub fn zero(n: usize) -> Self {
        ExpPoly { n, terms: Vec::new() }
    }

    pub fn single(p: usize, root: Root, c: Vec<C>) -> Self {
        let mut e = ExpPoly::zero(c.len());
        e.push(p, root, c);
        e
    }

    /// Add `c xi^p exp(-root xi)`, merging with an existing term.
    pub fn push(&mut self, p: usize, root: Root, c: Vec<C>) {
        debug_assert_eq!(c.len(), self.n);
        if let Some(t) = self.terms.iter_mut().find(|t| t.p == p && t.root == root) {
            t.c.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
        } else {
            self.terms.push(Term { p, root, c });
            self.terms.sort_by_key(|t| (t.root, t.p));
        }
    }

    /// Same real part with coefficients split evenly between each term and its conjugate.
    pub fn realified(&self) -> ExpPoly {
        let mut out = ExpPoly::zero(self.n);
        for t in &self.terms {
            out.push(t.p, t.root, t.c.iter().map(|v| v * 0.5).collect());
            out.push(t.p, t.root.conj(), t.c.iter().map(|v| v.conj() * 0.5).collect());
        }
        out
    }

    pub fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.p).max().unwrap_or(0)
    }

    pub fn add(&self, other: &ExpPoly) -> ExpPoly {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.p, t.root, t.c.clone());
        }
        out
    }

    pub fn sub(&self, other: &ExpPoly) -> ExpPoly {
        self.add(&other.scale_const(C::new(-1.0, 0.0)))
    }

    pub fn add_all(n: usize, parts: &[&ExpPoly]) -> ExpPoly {
        let mut out = ExpPoly::zero(n);
        for p in parts {
            for t in &p.terms {
                out.push(t.p, t.root, t.c.clone());
            }
        }
        out
    }

    pub fn map_coeffs(&self, f: impl Fn(&[C]) -> Vec<C>) -> ExpPoly {
        ExpPoly { n: self.n, terms: self.terms.iter().map(|t| Term { p: t.p, root: t.root, c: f(&t.c) }).collect() }
    }

    pub fn scale_const(&self, s: C) -> ExpPoly {
        self.map_coeffs(|c| c.iter().map(|v| v * s).collect())
    }

    /// Multiply by a real field of `(x, y)`.
    pub fn scale(&self, f: &[f64]) -> ExpPoly {
        self.map_coeffs(|c| c.iter().zip(f).map(|(v, w)| v * w).collect())
    }

    /// Multiply by a complex field of `(x, y)`.
    pub fn scale_c(&self, f: &[C]) -> ExpPoly {
        self.map_coeffs(|c| c.iter().zip(f).map(|(v, w)| v * w).collect())
    }

    pub fn mul_xi(&self) -> ExpPoly {
        ExpPoly { n: self.n, terms: self.terms.iter().map(|t| Term { p: t.p + 1, root: t.root, c: t.c.clone() }).collect() }
    }

    pub fn d_xi(&self) -> ExpPoly {
        let mut out = ExpPoly::zero(self.n);
        for t in &self.terms {
            let lam = t.root.value();
            out.push(t.p, t.root, t.c.iter().map(|v| -lam * v).collect());
            if t.p > 0 {
                let k = t.p as f64;
                out.push(t.p - 1, t.root, t.c.iter().map(|v| v * k).collect());
            }
        }
        out
    }

    /// `int_xi^infinity f`.
    pub fn tail(&self) -> ExpPoly {
        let mut out = ExpPoly::zero(self.n);
        for t in &self.terms {
            let lam = t.root.value();
            let pf = factorial(t.p);
            for k in 0..=t.p {
                let s = pf / factorial(k) / lam.powu((t.p - k + 1) as u32);
                out.push(k, t.root, t.c.iter().map(|v| v * s).collect());
            }
        }
        out
    }

    /// Complex coefficient field of the value at `xi = 0`.
    pub fn at0(&self) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); self.n];
        for t in self.terms.iter().filter(|t| t.p == 0) {
            out.iter_mut().zip(&t.c).for_each(|(a, b)| *a += b);
        }
        out
    }

    pub fn at0_re(&self) -> Vec<f64> {
        self.at0().iter().map(|v| v.re).collect()
    }

    /// `int_0^infinity f` as a real field.
    pub fn integral(&self) -> Vec<f64> {
        self.tail().at0_re()
    }

    pub fn dx(&self, spec: &Spectral) -> ExpPoly {
        self.map_coeffs(|c| spec.dx_c(c))
    }

    pub fn dy(&self, spec: &Spectral) -> ExpPoly {
        self.map_coeffs(|c| spec.dy_c(c))
    }

    pub fn laplacian(&self, spec: &Spectral) -> ExpPoly {
        self.map_coeffs(|c| spec.laplacian_c(c))
    }

    /// Real value at grid point `n` and layer coordinate `xi`.
    pub fn eval(&self, n: usize, xi: f64) -> f64 {
        let mut s = 0.0;
        for t in &self.terms {
            s += (t.c[n] * (-t.root.value() * xi).exp()).re * xi.powi(t.p as i32);
        }
        s
    }

    /// Value and first two `xi` derivatives at grid point `n`, given `e = [exp(-lambda+ xi), exp(-lambda- xi)]`.
    pub fn eval3(&self, n: usize, xi: f64, e: [C; 2]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for t in &self.terms {
            let lam = t.root.value();
            let ex = match t.root {
                Root::Plus => e[0],
                Root::Minus => e[1],
            } * t.c[n];
            let p = t.p as i32;
            let pf = t.p as f64;
            let x0 = xi.powi(p);
            let x1 = if p >= 1 { pf * xi.powi(p - 1) } else { 0.0 };
            let x2 = if p >= 2 { pf * (pf - 1.0) * xi.powi(p - 2) } else { 0.0 };
            out[0] += (ex * x0).re;
            out[1] += (ex * (x1 - lam * x0)).re;
            out[2] += (ex * (x2 - 2.0 * lam * x1 + lam * lam * x0)).re;
        }
        out
    }

    /// Upper bound of `|f|` at `xi` over all grid points.
    pub fn envelope(&self, xi: f64) -> f64 {
        let mut best = 0.0_f64;
        for n in 0..self.n {
            let s: f64 = self
                .terms
                .iter()
                .map(|t| t.c[n].norm() * xi.powi(t.p as i32) * (-t.root.value().re * xi).exp())
                .sum();
            best = best.max(s);
        }
        best
    }

    /// Particular solution of `W'' + mu W = G` whose homogeneous decaying root is `r` (`r^2 = -mu`).
    pub fn solve_second(&self, r: Root) -> ExpPoly {
        let rv = r.value();
        let mut out = ExpPoly::zero(self.n);
        for t in &self.terms {
            let lam = t.root.value();
            let p = t.p;
            // W = exp(-lam xi) P(xi) with P'' - 2 lam P' + (lam^2 - r^2) P = xi^p.
            let q: Vec<C> = if t.root != r {
                let a = lam * lam - rv * rv;
                let mut q = vec![C::new(0.0, 0.0); p + 3];
                for k in (0..=p).rev() {
                    let rhs = if k == p { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
                    let kf = k as f64;
                    q[k] = (rhs - (kf + 2.0) * (kf + 1.0) * q[k + 2] + 2.0 * lam * (kf + 1.0) * q[k + 1]) / a;
                }
                q.truncate(p + 1);
                q
            } else {
                // Resonant: Q = P' solves Q' - 2 lam Q = xi^p.
                let mut qq = vec![C::new(0.0, 0.0); p + 2];
                for k in (0..=p).rev() {
                    let rhs = if k == p { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
                    qq[k] = ((k as f64 + 1.0) * qq[k + 1] - rhs) / (2.0 * lam);
                }
                let mut q = vec![C::new(0.0, 0.0); p + 2];
                for k in 0..=p {
                    q[k + 1] = qq[k] / (k as f64 + 1.0);
                }
                q
            };
            for (k, qk) in q.iter().enumerate() {
                if *qk != C::new(0.0, 0.0) {
                    out.push(k, t.root, t.c.iter().map(|v| v * qk).collect());
                }
            }
        }
        out
    }

    /// Particular solution of `W' + r W = G`.
    pub fn solve_first(&self, r: Root) -> ExpPoly {
        let rv = r.value();
        let mut out = ExpPoly::zero(self.n);
        for t in &self.terms {
            let lam = t.root.value();
            let p = t.p;
            // W = exp(-lam xi) P(xi) with P' + (r - lam) P = xi^p.
            let q: Vec<C> = if t.root != r {
                let b = rv - lam;
                let mut q = vec![C::new(0.0, 0.0); p + 2];
                for k in (0..=p).rev() {
                    let rhs = if k == p { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) };
                    q[k] = (rhs - (k as f64 + 1.0) * q[k + 1]) / b;
                }
                q.truncate(p + 1);
                q
            } else {
                let mut q = vec![C::new(0.0, 0.0); p + 2];
                q[p + 1] = C::new(1.0 / (p as f64 + 1.0), 0.0);
                q
            };
            for (k, qk) in q.iter().enumerate() {
                if *qk != C::new(0.0, 0.0) {
                    out.push(k, t.root, t.c.iter().map(|v| v * qk).collect());
                }
            }
        }
        out
    }
}

/// Per-point 2x2 complex mix `out_i = sum_j m[n][i][j] v_j`.
pub fn mix2(m: &[[[C; 2]; 2]], v: &[ExpPoly; 2]) -> [ExpPoly; 2] {
    let col = |i: usize, j: usize| -> Vec<C> { m.iter().map(|a| a[i][j]).collect() };
    let a = v[0].scale_c(&col(0, 0)).add(&v[1].scale_c(&col(0, 1)));
    let b = v[0].scale_c(&col(1, 0)).add(&v[1].scale_c(&col(1, 1)));
    [a, b]
}

/// Per-point real 2x2 mix.
pub fn mix2_real(m: &[[f64; 4]], v: &[ExpPoly; 2]) -> [ExpPoly; 2] {
    let col = |k: usize| -> Vec<f64> { m.iter().map(|a| a[k]).collect() };
    let a = v[0].scale(&col(0)).add(&v[1].scale(&col(1)));
    let b = v[0].scale(&col(2)).add(&v[1].scale(&col(3)));
    [a, b]
}

/// Real dot product with a horizontal vector field.
pub fn dot2(g: (&[f64], &[f64]), v: &[ExpPoly; 2]) -> ExpPoly {
    v[0].scale(g.0).add(&v[1].scale(g.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num_d(f: &ExpPoly, xi: f64) -> f64 {
        let h = 1e-5;
        (f.eval(0, xi + h) - f.eval(0, xi - h)) / (2.0 * h)
    }

    fn sample() -> ExpPoly {
        let mut f = ExpPoly::zero(1);
        f.push(0, Root::Plus, vec![C::new(0.3, -1.2)]);
        f.push(2, Root::Minus, vec![C::new(-0.7, 0.4)]);
        f.push(1, Root::Plus, vec![C::new(0.1, 0.9)]);
        f
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let f = sample();
        let d = f.d_xi();
        for xi in [0.1, 1.0, 3.7] {
            assert!((d.eval(0, xi) - num_d(&f, xi)).abs() < 1e-8);
        }
    }

    #[test]
    fn eval3_matches_derivatives() {
        let f = sample();
        let xi = 1.3;
        let e = [(-Root::Plus.value() * xi).exp(), (-Root::Minus.value() * xi).exp()];
        let v = f.eval3(0, xi, e);
        assert!((v[0] - f.eval(0, xi)).abs() < 1e-14);
        assert!((v[1] - f.d_xi().eval(0, xi)).abs() < 1e-14);
        assert!((v[2] - f.d_xi().d_xi().eval(0, xi)).abs() < 1e-14);
    }

    #[test]
    fn tail_is_antiderivative() {
        let f = sample();
        let t = f.tail();
        for xi in [0.0, 0.5, 2.0, 6.0] {
            assert!((t.d_xi().eval(0, xi) + f.eval(0, xi)).abs() < 1e-13);
        }
        assert!(t.eval(0, 80.0).abs() < 1e-20);
    }

    #[test]
    fn second_order_solve_both_roots() {
        let f = sample();
        for (mu, r) in [(C::new(0.0, 1.0), Root::Minus), (C::new(0.0, -1.0), Root::Plus)] {
            assert!((r.value() * r.value() + mu).norm() < 1e-15);
            let w = f.solve_second(r);
            let res = w.d_xi().d_xi().add(&w.scale_const(mu)).sub(&f);
            for xi in [0.0, 0.3, 1.7, 5.0] {
                // complex residual: check both the real part and the i-rotated real part
                assert!(res.eval(0, xi).abs() < 1e-12, "{xi}");
                assert!(res.scale_const(C::new(0.0, 1.0)).eval(0, xi).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn first_order_solve() {
        let f = sample();
        for r in [Root::Plus, Root::Minus] {
            let w = f.solve_first(r);
            let res = w.d_xi().add(&w.scale_const(r.value())).sub(&f);
            for xi in [0.0, 1.1, 4.0] {
                assert!(res.eval(0, xi).abs() < 1e-12);
            }
        }
    }
}
