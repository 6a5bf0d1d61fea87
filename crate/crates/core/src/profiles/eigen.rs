//! Diagonalization of the order-1 layer operator `cos^-1 g H0^-1 E1`.

use std::fmt;

use num_complex::Complex64 as C;

use super::exppoly::Root;
use crate::geometry::GeometryBundle;

pub type M2 = [[C; 2]; 2];

const I: C = C::new(0.0, 1.0);

fn zero() -> C {
    C::new(0.0, 0.0)
}

pub fn mat_mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_inv(a: &M2) -> M2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

fn max_abs(a: &M2) -> f64 {
    a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.norm()))
}

fn real(a: [[f64; 2]; 2]) -> M2 {
    [[a[0][0].into(), a[0][1].into()], [a[1][0].into(), a[1][1].into()]]
}

/// `M = cos^-1 g H0^-1 E1 = cos g [[Bx By, 1 + By^2], [-(1 + Bx^2), -Bx By]]`.
pub fn layer_operator(c: f64, bx: f64, by: f64) -> [[f64; 2]; 2] {
    [[c * bx * by, c * (1.0 + by * by)], [-c * (1.0 + bx * bx), -c * bx * by]]
}

/// Eigenvectors of `m` for eigenvalues `i` and `-i`, as columns.
pub fn eigenvectors(m: [[f64; 2]; 2]) -> M2 {
    let mut q = [[zero(); 2]; 2];
    for (k, mu) in [I, -I].into_iter().enumerate() {
        let v = if m[0][1].abs() >= m[1][0].abs() {
            [C::from(m[0][1]), mu - m[0][0]]
        } else {
            [mu - m[1][1], C::from(m[1][0])]
        };
        let s = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        q[0][k] = v[0] / s;
        q[1][k] = v[1] / s;
    }
    q
}

/// The closed-form pair printed with the layer equations.
pub fn printed_pair(c: f64, bx: f64, by: f64) -> (M2, M2) {
    let a = c * (1.0 + by * by);
    let m = c * bx * by;
    let q = [[C::from(a), C::from(a)], [I - m, -I - m]];
    let f = -I / (2.0 * a);
    let qi = [[f * (I + m), f * a], [f * (I - m), f * (-a)]];
    (q, qi)
}

/// Residuals `|Q Q^-1 - I|` and `|Q^-1 M Q - diag(i, -i)|` (max entry).
pub fn pair_residuals(q: &M2, qi: &M2, m: [[f64; 2]; 2]) -> (f64, f64) {
    let mut id = mat_mul(q, qi);
    id[0][0] -= 1.0;
    id[1][1] -= 1.0;
    let mut d = mat_mul(&mat_mul(qi, &real(m)), q);
    d[0][0] -= I;
    d[1][1] += I;
    (max_abs(&id), max_abs(&d))
}

/// Per-point eigen-pack used by the order-1 layer solve.
#[derive(Debug, Clone)]
pub struct DiagonalizationPack {
    pub q: Vec<M2>,
    pub q_inv: Vec<M2>,
    /// Eigenvalues of `M` in column order.
    pub mu: [C; 2],
    /// Decaying homogeneous roots `r` with `r^2 = -mu`.
    pub roots: [Root; 2],
    pub inverse_residual: Vec<f64>,
    pub diagonal_residual: Vec<f64>,
}

impl DiagonalizationPack {
    pub fn new(g: &GeometryBundle) -> Self {
        let n = g.grid.len();
        let mut pack = DiagonalizationPack {
            q: Vec::with_capacity(n),
            q_inv: Vec::with_capacity(n),
            mu: [I, -I],
            roots: [Root::Minus, Root::Plus],
            inverse_residual: Vec::with_capacity(n),
            diagonal_residual: Vec::with_capacity(n),
        };
        for p in 0..n {
            let m = layer_operator(g.cos_gamma[p], g.bx[p], g.by[p]);
            let q = eigenvectors(m);
            let qi = mat_inv(&q);
            let (ri, rd) = pair_residuals(&q, &qi, m);
            pack.q.push(q);
            pack.q_inv.push(qi);
            pack.inverse_residual.push(ri);
            pack.diagonal_residual.push(rd);
        }
        pack
    }

    pub fn max_residual(&self) -> f64 {
        self.inverse_residual.iter().chain(&self.diagonal_residual).cloned().fold(0.0, f64::max)
    }
}

/// Comparison of the computed eigen-pack with the printed formulas at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditPoint {
    pub at: (usize, usize),
    pub computed_inverse: f64,
    pub computed_diagonal: f64,
    pub printed_inverse: f64,
    pub printed_diagonal: f64,
    /// `|r^2 + mu|` for the roots paired with `i, -i` by the printed convolution.
    pub printed_root_pairing: f64,
    /// Same for the computed pairing.
    pub computed_root_pairing: f64,
    /// Residual of the second-order layer equation for the printed first-order kernel on a test forcing.
    pub printed_kernel_residual: f64,
}

/// Full audit over the grid.
#[derive(Debug, Clone)]
pub struct AuditReport {
    pub max_computed_inverse: f64,
    pub max_computed_diagonal: f64,
    pub max_printed_inverse: f64,
    pub max_printed_diagonal: f64,
    pub worst: AuditPoint,
    pub discrepancies: Vec<String>,
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "computed eigen-pack: |QQ^-1 - I| = {:.3e}, |Q^-1MQ - diag| = {:.3e}", self.max_computed_inverse, self.max_computed_diagonal)?;
        writeln!(f, "printed pair:        |QQ^-1 - I| = {:.3e}, |Q^-1MQ - diag| = {:.3e}", self.max_printed_inverse, self.max_printed_diagonal)?;
        for d in &self.discrepancies {
            writeln!(f, "discrepancy: {d}")?;
        }
        Ok(())
    }
}

/// Residual of `W'' + mu W = G` at sample points when `W` solves the printed
/// first-order convolution `W' + r W = G`, `W(0) = 0`, for `G = exp(-lambda+ xi)`.
fn printed_kernel_residual(mu: C, r: Root) -> f64 {
    use super::exppoly::ExpPoly;
    let g = ExpPoly::single(0, Root::Plus, vec![C::new(1.0, 0.0)]);
    let mut w = g.solve_first(r);
    let w0 = w.at0();
    w.push(0, r, w0.iter().map(|v| -v).collect());
    let res = w.d_xi().d_xi().add(&w.scale_const(mu)).sub(&g);
    [0.0, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&xi| res.eval(0, xi).abs().max(res.scale_const(I).eval(0, xi).abs()))
        .fold(0.0, f64::max)
}

pub fn audit(g: &GeometryBundle, pack: &DiagonalizationPack) -> AuditReport {
    let grid = g.grid;
    let printed_roots = [Root::Plus, Root::Minus];
    let pairing = |roots: [Root; 2]| -> f64 {
        (0..2).map(|k| (roots[k].value().powu(2) + pack.mu[k]).norm()).fold(0.0, f64::max)
    };
    let kernel = (0..2).map(|k| printed_kernel_residual(pack.mu[k], printed_roots[k])).fold(0.0, f64::max);
    let mut rep = AuditReport {
        max_computed_inverse: 0.0,
        max_computed_diagonal: 0.0,
        max_printed_inverse: 0.0,
        max_printed_diagonal: 0.0,
        worst: AuditPoint {
            at: (0, 0),
            computed_inverse: 0.0,
            computed_diagonal: 0.0,
            printed_inverse: 0.0,
            printed_diagonal: 0.0,
            printed_root_pairing: pairing(printed_roots),
            computed_root_pairing: pairing(pack.roots),
            printed_kernel_residual: kernel,
        },
        discrepancies: Vec::new(),
    };
    let mut worst_score = -1.0;
    for p in 0..grid.len() {
        let (c, bx, by) = (g.cos_gamma[p], g.bx[p], g.by[p]);
        let m = layer_operator(c, bx, by);
        let (q, qi) = printed_pair(c, bx, by);
        let (pi, pd) = pair_residuals(&q, &qi, m);
        rep.max_computed_inverse = rep.max_computed_inverse.max(pack.inverse_residual[p]);
        rep.max_computed_diagonal = rep.max_computed_diagonal.max(pack.diagonal_residual[p]);
        rep.max_printed_inverse = rep.max_printed_inverse.max(pi);
        rep.max_printed_diagonal = rep.max_printed_diagonal.max(pd);
        let score = bx.abs() + by.abs();
        if score > worst_score {
            worst_score = score;
            rep.worst.at = (p / grid.ny, p % grid.ny);
            rep.worst.computed_inverse = pack.inverse_residual[p];
            rep.worst.computed_diagonal = pack.diagonal_residual[p];
            rep.worst.printed_inverse = pi;
            rep.worst.printed_diagonal = pd;
        }
    }
    let (i, j) = rep.worst.at;
    if rep.max_printed_inverse > 1e-10 || rep.max_printed_diagonal > 1e-10 {
        rep.discrepancies.push(format!(
            "printed Q / Q^-1 fail the diagonalization identity (inverse {:.3e}, diagonal {:.3e})",
            rep.max_printed_inverse, rep.max_printed_diagonal
        ));
    }
    if rep.worst.printed_root_pairing > 1e-10 {
        rep.discrepancies.push(format!(
            "printed convolution pairs sqrt(i) with eigenvalue i and sqrt(-i) with -i: |r^2 + mu| = {:.3e} at ({i}, {j})",
            rep.worst.printed_root_pairing
        ));
    }
    if rep.worst.printed_kernel_residual > 1e-10 {
        rep.discrepancies.push(format!(
            "printed first-order convolution leaves a second-order equation residual {:.3e} at ({i}, {j})",
            rep.worst.printed_kernel_residual
        ));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn computed_pack_diagonalizes() {
        for (bx, by) in [(0.0, 0.0), (0.3, -0.2), (-0.1, 0.25), (0.0, 0.3)] {
            let c = 1.0 / (1.0_f64 + bx * bx + by * by).sqrt();
            let m = layer_operator(c, bx, by);
            let q = eigenvectors(m);
            let (ri, rd) = pair_residuals(&q, &mat_inv(&q), m);
            assert!(ri < 1e-12 && rd < 1e-12, "{bx} {by}: {ri} {rd}");
        }
    }

    #[test]
    fn printed_pair_is_consistent_but_roots_are_swapped() {
        let (bx, by) = (0.3, -0.2);
        let c = 1.0 / (1.0_f64 + bx * bx + by * by).sqrt();
        let (q, qi) = printed_pair(c, bx, by);
        let (ri, rd) = pair_residuals(&q, &qi, layer_operator(c, bx, by));
        assert!(ri < 1e-12 && rd < 1e-12);
        assert!((Root::Plus.value().powu(2) + I).norm() > 1.0);
        assert!(printed_kernel_residual(I, Root::Plus) > 0.1);
    }
}
