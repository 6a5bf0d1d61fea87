//! Assembly of the 3D approximate solution on the terrain-following grid
//! `(x, y, zeta = z - B)`, `zeta in [0, 2]`.
//!
//! `U_app = u + delta U1_int + (1 - chi) L_b + chi L_t + delta^2 [(1 - chi) U2_int,b + chi U2_int,t] e3 + V`
//! where `L` are the layer stacks `U0 + delta U1 + delta^2 U2_3 e3` and `V`
//! removes the divergence created by the blending.

use num_complex::Complex64 as C;

use crate::error::{Error, Result};
use crate::geometry::GeometryBundle;
use crate::limit2d::{LimitModel, LimitState, Pressure};
use crate::profiles::{build_profiles, ExpPoly, LayerContext, LayerProfileSet, Profiles, Root, Side};
use crate::quadrature::{geometric_edges, PanelAxis};
use crate::spectral::{Grid, Spectral};

/// Layer contributions are dropped beyond this stretched distance.
pub const XI_CUT: f64 = 90.0;

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Polynomial smoothstep blending bottom and top corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffProfile {
    pub order: usize,
    /// Coefficients of `S(t)` in powers of `t = zeta - 1/2`.
    coeffs: Vec<f64>,
}

pub fn make_cutoff(order: usize) -> Result<CutoffProfile> {
    if order < 2 {
        return Err(Error::Parameter(format!("cutoff order must be >= 2, got {order}")));
    }
    let n = order;
    let mut coeffs = vec![0.0; 2 * n + 2];
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[n + 1 + k] = sign * binom(n + k, k) * binom(2 * n + 1, n - k);
    }
    Ok(CutoffProfile { order, coeffs })
}

impl CutoffProfile {
    /// `[chi, chi', chi'', chi''']` at `zeta`.
    pub fn jet(&self, zeta: f64) -> [f64; 4] {
        let t = zeta - 0.5;
        if t <= 0.0 {
            return [0.0; 4];
        }
        if t >= 1.0 {
            return [1.0, 0.0, 0.0, 0.0];
        }
        let mut out = [0.0; 4];
        for (p, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            for (d, o) in out.iter_mut().enumerate() {
                if p >= d {
                    let fall: f64 = (0..d).map(|i| (p - i) as f64).product();
                    *o += c * fall * t.powi((p - d) as i32);
                }
            }
        }
        out
    }

    pub fn value(&self, zeta: f64) -> f64 {
        self.jet(zeta)[0]
    }
}

/// Boundary-refined vertical grid on `[0, 2]`.
#[derive(Debug, Clone)]
pub struct ZetaGrid {
    pub axis: PanelAxis,
    /// Thickness of each refined wall zone.
    pub wall_zone: f64,
    pub nzeta: usize,
}

impl ZetaGrid {
    /// `nzeta` intervals (a multiple of 32) in degree-8 panels; a quarter of the
    /// panels cover the interior, the rest cluster geometrically towards each wall
    /// over `min(0.45, 50 delta_max)`.
    pub fn new(nzeta: usize, delta_max: f64, tol: f64) -> Result<Self> {
        const DEGREE: usize = 8;
        if nzeta < 32 || !nzeta.is_multiple_of(32) {
            return Err(Error::Parameter(format!("nzeta must be a positive multiple of 32, got {nzeta}")));
        }
        let panels = nzeta / DEGREE;
        let side = (panels - panels / 4) / 2;
        let inner = panels - 2 * side;
        let zl = (50.0 * delta_max).min(0.45);
        let tail = (-zl / delta_max / std::f64::consts::SQRT_2).exp();
        if tail > tol {
            return Err(Error::Tail { z_max: zl / delta_max, tail, tol });
        }
        let wall = geometric_edges(zl, side, 3.0);
        let mut edges: Vec<f64> = wall.clone();
        let seg = |a: f64, b: f64, m: usize| -> Vec<f64> { (1..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect() };
        if inner >= 3 {
            let m1 = (inner / 4).max(1);
            edges.extend(seg(zl, 0.5, m1));
            edges.extend(seg(0.5, 1.5, inner - 2 * m1));
            edges.extend(seg(1.5, 2.0 - zl, m1));
        } else {
            edges.extend(seg(zl, 2.0 - zl, inner));
        }
        edges.extend(wall.iter().rev().skip(1).map(|e| 2.0 - e));
        Ok(ZetaGrid { axis: PanelAxis::new(edges, DEGREE)?, wall_zone: zl, nzeta })
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.axis.nodes
    }
}

/// Value, Cartesian gradient and Laplacian of a scalar at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScalarJet {
    pub v: f64,
    pub g: [f64; 3],
    pub lap: f64,
}

impl ScalarJet {
    pub fn add(&mut self, o: &ScalarJet) {
        self.v += o.v;
        for k in 0..3 {
            self.g[k] += o.g[k];
        }
        self.lap += o.lap;
    }

    pub fn product(a: &ScalarJet, b: &ScalarJet) -> ScalarJet {
        ScalarJet {
            v: a.v * b.v,
            g: std::array::from_fn(|k| a.v * b.g[k] + b.v * a.g[k]),
            lap: a.v * b.lap + b.v * a.lap + 2.0 * (0..3).map(|k| a.g[k] * b.g[k]).sum::<f64>(),
        }
    }
}

pub type VecJet = [ScalarJet; 3];

pub fn add_vec(a: &mut VecJet, b: &VecJet) {
    for k in 0..3 {
        a[k].add(&b[k]);
    }
}

/// A 2D field with its horizontal derivatives.
#[derive(Debug, Clone)]
pub struct Field2 {
    pub f: Vec<f64>,
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub lap: Vec<f64>,
}

impl Field2 {
    pub fn new(spec: &Spectral, f: Vec<f64>) -> Self {
        Field2 { fx: spec.dx(&f), fy: spec.dy(&f), lap: spec.laplacian(&f), f }
    }

    pub fn zero(n: usize) -> Self {
        Field2 { f: vec![0.0; n], fx: vec![0.0; n], fy: vec![0.0; n], lap: vec![0.0; n] }
    }
}

/// Shared terrain-following derivative kernel.
#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub bx: f64,
    pub by: f64,
    pub lap_b: f64,
    pub delta: f64,
    pub kappa: [f64; 2],
    pub div_kappa: f64,
}

impl Column {
    pub fn new(g: &GeometryBundle, n: usize) -> Self {
        Column {
            bx: g.bx[n],
            by: g.by[n],
            lap_b: g.lap_b[n],
            delta: g.delta[n],
            kappa: [g.kappa_x[n], g.kappa_y[n]],
            div_kappa: g.div_kappa[n],
        }
    }

    /// Jet of `phi(z - B) F(x, y)` from `phi = [phi, phi', phi'']`.
    pub fn separable(&self, phi: [f64; 3], f: &Field2, n: usize) -> ScalarJet {
        let (v, fx, fy, fl) = (f.f[n], f.fx[n], f.fy[n], f.lap[n]);
        let s = 1.0 + self.bx * self.bx + self.by * self.by;
        ScalarJet {
            v: phi[0] * v,
            g: [phi[0] * fx - self.bx * phi[1] * v, phi[0] * fy - self.by * phi[1] * v, phi[1] * v],
            lap: phi[0] * fl - 2.0 * phi[1] * (self.bx * fx + self.by * fy) - phi[1] * self.lap_b * v + phi[2] * s * v,
        }
    }

    /// Jet of a function of `zeta` alone.
    pub fn vertical(&self, phi: [f64; 3]) -> ScalarJet {
        let s = 1.0 + self.bx * self.bx + self.by * self.by;
        ScalarJet {
            v: phi[0],
            g: [-self.bx * phi[1], -self.by * phi[1], phi[1]],
            lap: phi[2] * s - phi[1] * self.lap_b,
        }
    }

    /// `a = sigma grad B / delta + xi kappa` and `div~ a`.
    fn stretch(&self, sigma: f64, xi: f64) -> ([f64; 2], f64) {
        let a = [sigma * self.bx / self.delta + xi * self.kappa[0], sigma * self.by / self.delta + xi * self.kappa[1]];
        let gk = self.bx * self.kappa[0] + self.by * self.kappa[1];
        let div = sigma * (self.lap_b - gk) / self.delta + xi * self.div_kappa;
        (a, div)
    }

    /// Jet of a layer field `F(x, y, xi)` with `xi = sigma (zeta - zeta_wall) / delta`.
    pub fn layer(&self, sigma: f64, xi: f64, f: [[f64; 3]; 4]) -> ScalarJet {
        let [fv, fx, fy, fl] = f;
        let (a, div) = self.stretch(sigma, xi);
        let ak = a[0] * self.kappa[0] + a[1] * self.kappa[1];
        let aa = a[0] * a[0] + a[1] * a[1] + 1.0 / (self.delta * self.delta);
        ScalarJet {
            v: fv[0],
            g: [fx[0] - a[0] * fv[1], fy[0] - a[1] * fv[1], sigma * fv[1] / self.delta],
            lap: fl[0] - div * fv[1] - 2.0 * (a[0] * fx[1] + a[1] * fy[1]) + ak * fv[1] + aa * fv[2],
        }
    }

    /// Gradient of a layer scalar from `[F, F_x~, F_y~]` evaluations.
    pub fn layer_gradient(&self, sigma: f64, xi: f64, f: [[f64; 3]; 3]) -> [f64; 3] {
        let (a, _) = self.stretch(sigma, xi);
        [f[1][0] - a[0] * f[0][1], f[2][0] - a[1] * f[0][1], sigma * f[0][1] / self.delta]
    }
}

/// One layer stack with `delta` folded into the coefficients.
#[derive(Debug, Clone)]
pub struct LayerStack {
    pub side: Side,
    /// Velocity components `[U0_h + delta U1_h, U0_3 + delta U1_3 + delta^2 U2_3]`.
    pub v: [ExpPoly; 3],
    /// Pressure `delta P1 + delta^2 P2`.
    pub p: ExpPoly,
    /// Horizontal coefficient derivatives `[x, y, laplacian]` of each velocity component.
    pub dv: Option<[[ExpPoly; 3]; 3]>,
    pub dp: Option<[ExpPoly; 2]>,
}

impl LayerStack {
    pub fn new(set: &LayerProfileSet, delta: &[f64], spec: &Spectral, derivs: bool) -> Self {
        let d2: Vec<f64> = delta.iter().map(|d| d * d).collect();
        let v = [
            set.o0.uh[0].add(&set.o1.uh[0].scale(delta)),
            set.o0.uh[1].add(&set.o1.uh[1].scale(delta)),
            ExpPoly::add_all(set.o0.u3.n, &[&set.o0.u3, &set.o1.u3.scale(delta), &set.o2.u3.scale(&d2)]),
        ];
        let p = set.o0.p1.scale(delta).add(&set.o1.p2.scale(&d2));
        let (dv, dp) = if derivs {
            (
                Some(std::array::from_fn(|k| [v[k].dx(spec), v[k].dy(spec), v[k].laplacian(spec)])),
                Some([p.dx(spec), p.dy(spec)]),
            )
        } else {
            (None, None)
        };
        LayerStack { side: set.side, v, p, dv, dp }
    }

    pub fn wall(&self) -> f64 {
        match self.side {
            Side::Bottom => 0.0,
            Side::Top => 2.0,
        }
    }

    pub fn xi(&self, zeta: f64, delta: f64) -> f64 {
        self.side.sigma() * (zeta - self.wall()) / delta
    }

    /// Largest `|L|` bound at the edge of the blending zone, over the grid.
    pub fn leak(&self, delta: &[f64]) -> f64 {
        let mut m = 0.0_f64;
        for (n, d) in delta.iter().enumerate() {
            let xi = 0.5 / d;
            for f in &self.v {
                let s: f64 = f
                    .terms
                    .iter()
                    .map(|t| t.c[n].norm() * xi.powi(t.p as i32) * (-t.root.value().re * xi).exp())
                    .sum();
                m = m.max(s);
            }
        }
        m
    }
}

fn exps(xi: f64) -> [C; 2] {
    [(-Root::Plus.value() * xi).exp(), (-Root::Minus.value() * xi).exp()]
}

/// All pieces of `U_app` that are linear in `(u, u_t)`.
#[derive(Debug, Clone)]
pub struct Stack {
    pub profiles: Profiles,
    pub ubar: [Field2; 3],
    /// `delta U1_int,h`.
    pub int1_h: [Field2; 2],
    /// `delta U1_int,3 = a - zeta s`: `[a, s]`.
    pub int1_v: [Field2; 2],
    /// `delta^2 U2_int` at bottom and top.
    pub int2: [Field2; 2],
    /// Corrector amplitude `Psi`, with `V = chi'(zeta) Psi`.
    pub psi: [Field2; 3],
    /// Mean of the blending defect removed before inversion.
    pub defect_mean: f64,
    pub layers: [LayerStack; 2],
}

impl Stack {
    pub fn new(ctx: &LayerContext, g: &GeometryBundle, u: (&[f64], &[f64]), ut: (&[f64], &[f64]), derivs: bool) -> Self {
        let spec = &ctx.spec;
        let n = g.grid.len();
        let profiles = build_profiles(ctx, u, ut);
        let d = &g.delta;
        let f2 = |f: Vec<f64>| -> Field2 {
            if derivs {
                Field2::new(spec, f)
            } else {
                Field2 { fx: Vec::new(), fy: Vec::new(), lap: Vec::new(), f }
            }
        };
        let u3: Vec<f64> = (0..n).map(|p| g.bx[p] * u.0[p] + g.by[p] * u.1[p]).collect();
        let ubar = [f2(u.0.to_vec()), f2(u.1.to_vec()), f2(u3)];
        let it = &profiles.interior;
        let int1_h = [
            f2((0..n).map(|p| d[p] * it.uh[0][p]).collect()),
            f2((0..n).map(|p| d[p] * it.uh[1][p]).collect()),
        ];
        let int1_v = [
            f2((0..n).map(|p| d[p] * (it.base[p] + it.slope[p])).collect()),
            f2((0..n).map(|p| d[p] * it.slope[p]).collect()),
        ];
        let i2b: Vec<f64> = (0..n).map(|p| d[p] * d[p] * profiles.bottom.o2.interior[p]).collect();
        let i2t: Vec<f64> = (0..n).map(|p| d[p] * d[p] * profiles.top.o2.interior[p]).collect();
        let mut w: Vec<f64> = (0..n).map(|p| i2t[p] - i2b[p]).collect();
        let defect_mean = g.grid.mean(&w);
        w.iter_mut().for_each(|x| *x -= defect_mean);
        let phi = spec.inv_laplacian(&w);
        let px: Vec<f64> = spec.dx(&phi).into_iter().map(|x| -x).collect();
        let py: Vec<f64> = spec.dy(&phi).into_iter().map(|x| -x).collect();
        let p3: Vec<f64> = (0..n).map(|p| g.bx[p] * px[p] + g.by[p] * py[p]).collect();
        let psi = [f2(px), f2(py), f2(p3)];
        let layers = [
            LayerStack::new(&profiles.bottom, d, spec, derivs),
            LayerStack::new(&profiles.top, d, spec, derivs),
        ];
        Stack { profiles, ubar, int1_h, int1_v, int2: [f2(i2b), f2(i2t)], psi, defect_mean, layers }
    }

    /// Split evaluation `(limit, rest, corrector)` at grid point `n`, height `zeta`.
    /// Without derivatives only the values are filled.
    pub fn eval(&self, col: &Column, cut: &CutoffProfile, n: usize, zeta: f64, derivs: bool) -> (VecJet, VecJet, VecJet) {
        let chi = cut.jet(zeta);
        let one = [1.0, 0.0, 0.0];
        let sep = |phi: [f64; 3], f: &Field2| -> ScalarJet {
            if derivs {
                col.separable(phi, f, n)
            } else {
                ScalarJet { v: phi[0] * f.f[n], ..Default::default() }
            }
        };
        let limit: VecJet = std::array::from_fn(|k| sep(one, &self.ubar[k]));
        let mut rest: VecJet = Default::default();
        for k in 0..2 {
            rest[k].add(&sep(one, &self.int1_h[k]));
        }
        rest[2].add(&sep(one, &self.int1_v[0]));
        rest[2].add(&sep([-zeta, -1.0, 0.0], &self.int1_v[1]));
        rest[2].add(&sep([1.0 - chi[0], -chi[1], -chi[2]], &self.int2[0]));
        rest[2].add(&sep([chi[0], chi[1], chi[2]], &self.int2[1]));
        for (layer, wphi) in self.layers.iter().zip([[1.0 - chi[0], -chi[1], -chi[2]], [chi[0], chi[1], chi[2]]]) {
            if wphi[0] == 0.0 && wphi[1] == 0.0 {
                continue;
            }
            let xi = layer.xi(zeta, col.delta);
            if xi > XI_CUT {
                continue;
            }
            let e = exps(xi);
            let wj = if derivs { col.vertical(wphi) } else { ScalarJet { v: wphi[0], ..Default::default() } };
            for k in 0..3 {
                let lj = match (&layer.dv, derivs) {
                    (Some(dv), true) => col.layer(
                        layer.side.sigma(),
                        xi,
                        [layer.v[k].eval3(n, xi, e), dv[k][0].eval3(n, xi, e), dv[k][1].eval3(n, xi, e), dv[k][2].eval3(n, xi, e)],
                    ),
                    _ => ScalarJet { v: layer.v[k].eval3(n, xi, e)[0], ..Default::default() },
                };
                rest[k].add(&if derivs { ScalarJet::product(&wj, &lj) } else { ScalarJet { v: wj.v * lj.v, ..Default::default() } });
            }
        }
        let cphi = [chi[1], chi[2], chi[3]];
        let corr: VecJet = std::array::from_fn(|k| if chi[1] == 0.0 && chi[2] == 0.0 { ScalarJet::default() } else { sep(cphi, &self.psi[k]) });
        (limit, rest, corr)
    }

    /// Gradient of the blended layer pressure.
    pub fn layer_pressure_gradient(&self, col: &Column, cut: &CutoffProfile, n: usize, zeta: f64) -> [f64; 3] {
        let chi = cut.jet(zeta);
        let mut out = [0.0; 3];
        for (layer, wphi) in self.layers.iter().zip([[1.0 - chi[0], -chi[1], -chi[2]], [chi[0], chi[1], chi[2]]]) {
            let xi = layer.xi(zeta, col.delta);
            if xi > XI_CUT || (wphi[0] == 0.0 && wphi[1] == 0.0) {
                continue;
            }
            let dp = layer.dp.as_ref().expect("pressure derivatives requested");
            let e = exps(xi);
            let pv = layer.p.eval3(n, xi, e);
            let gp = col.layer_gradient(layer.side.sigma(), xi, [pv, dp[0].eval3(n, xi, e), dp[1].eval3(n, xi, e)]);
            let wj = col.vertical(wphi);
            for k in 0..3 {
                out[k] += wj.v * gp[k] + pv[0] * wj.g[k];
            }
        }
        out
    }
}

/// Options of the assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub nzeta: usize,
    pub cutoff_order: usize,
    pub tail_tol: f64,
    /// Largest tolerated layer leak into the blending zone, relative to `|u|_inf`.
    pub leak_tol: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { nzeta: 128, cutoff_order: 3, tail_tol: 1e-8, leak_tol: 1e-10 }
    }
}

/// The assembled approximate solution and its construction diagnostics.
#[derive(Debug, Clone)]
pub struct ApproxSolution {
    pub grid: Grid,
    pub zeta: ZetaGrid,
    pub eps: f64,
    pub nu: f64,
    pub time: f64,
    pub cutoff: CutoffProfile,
    pub geom: GeometryBundle,
    pub state: LimitState,
    /// Limit tendency `du/dt` and its derivative along it.
    pub u_t: (Vec<f64>, Vec<f64>),
    pub u_tt: (Vec<f64>, Vec<f64>),
    pub pressure: Pressure,
    pub stack: Stack,
    pub stack_t: Stack,
    /// Sampled `U_app`, index `n * nz + k`.
    pub u: [Vec<f64>; 3],
    /// Sampled corrector.
    pub v: [Vec<f64>; 3],
    /// Sampled `U_app - (u, u3)`.
    pub deviation: [Vec<f64>; 3],
    /// L2 norm of the blending divergence removed by `V`.
    pub defect_norm: f64,
    /// Uncorrected layer leak into the blending zone.
    pub leak: f64,
}

impl ApproxSolution {
    pub fn nz(&self) -> usize {
        self.zeta.len()
    }

    pub fn index(&self, n: usize, k: usize) -> usize {
        n * self.nz() + k
    }

    /// Volume quadrature weights (cell area times vertical weight), index `k`.
    pub fn volume_weight(&self, k: usize) -> f64 {
        self.grid.cell_area() * self.zeta.axis.weights[k]
    }

    /// L2 norm over the domain of sampled components.
    pub fn l2(&self, comps: &[&[f64]]) -> f64 {
        let nz = self.nz();
        let mut s = 0.0;
        for n in 0..self.grid.len() {
            for k in 0..nz {
                let w = self.volume_weight(k);
                s += comps.iter().map(|c| c[n * nz + k].powi(2)).sum::<f64>() * w;
            }
        }
        s.sqrt()
    }

    /// `|| U_app - u ||_L2`.
    pub fn deviation_l2(&self) -> f64 {
        self.l2(&[&self.deviation[0], &self.deviation[1], &self.deviation[2]])
    }

    pub fn corrector_l2(&self) -> f64 {
        self.l2(&[&self.v[0], &self.v[1], &self.v[2]])
    }

    /// `|| u_h ||_L2` over the domain (height 2).
    pub fn limit_l2(&self) -> f64 {
        (2.0_f64).sqrt() * self.grid.l2_vec(&[&self.state.u, &self.state.v])
    }

    /// Largest `|U_app|` on either wall.
    pub fn boundary_max(&self) -> f64 {
        let nz = self.nz();
        let mut m = 0.0_f64;
        for n in 0..self.grid.len() {
            for k in [0, nz - 1] {
                for c in &self.u {
                    m = m.max(c[n * nz + k].abs());
                }
            }
        }
        m
    }

    /// Full jets of `U_app` split as `(limit, rest, corrector)`.
    pub fn jets(&self, n: usize, k: usize) -> (VecJet, VecJet, VecJet) {
        let col = Column::new(&self.geom, n);
        self.stack.eval(&col, &self.cutoff, n, self.zeta.nodes()[k], true)
    }

    /// Time derivatives `(limit, rest, corrector)` values.
    pub fn time_derivative(&self, n: usize, k: usize) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let col = Column::new(&self.geom, n);
        let (a, b, c) = self.stack_t.eval(&col, &self.cutoff, n, self.zeta.nodes()[k], false);
        (a.map(|j| j.v), b.map(|j| j.v), c.map(|j| j.v))
    }

    /// `grad P_app = grad P0_int + eps grad p + grad[(1 - chi) Pi_b + chi Pi_t]`.
    pub fn pressure_gradient(&self, spec_grad: &PressureGradients, n: usize, k: usize) -> [f64; 3] {
        let col = Column::new(&self.geom, n);
        let lp = self.stack.layer_pressure_gradient(&col, &self.cutoff, n, self.zeta.nodes()[k]);
        [
            spec_grad.p0[0][n] + self.eps * spec_grad.pbar[0][n] + lp[0],
            spec_grad.p0[1][n] + self.eps * spec_grad.pbar[1][n] + lp[1],
            lp[2],
        ]
    }

    /// Horizontal gradients of the interior pressures.
    pub fn pressure_gradients(&self) -> PressureGradients {
        let spec = Spectral::new(self.grid);
        let pr = &self.pressure;
        let p0x: Vec<f64> = spec.dx(&pr.p0_int).into_iter().map(|v| v + pr.p0_mean_grad[0]).collect();
        let p0y: Vec<f64> = spec.dy(&pr.p0_int).into_iter().map(|v| v + pr.p0_mean_grad[1]).collect();
        PressureGradients { p0: [p0x, p0y], pbar: [spec.dx(&pr.p_bar), spec.dy(&pr.p_bar)] }
    }

    /// Divergence from the analytic jets relative to `|| grad U ||_L2`.
    pub fn divergence_relative(&self) -> (f64, f64) {
        let nz = self.nz();
        let (mut sd, mut sg) = (0.0, 0.0);
        for n in 0..self.grid.len() {
            for k in 0..nz {
                let (a, b, c) = self.jets(n, k);
                let w = self.volume_weight(k);
                let mut div = 0.0;
                for i in 0..3 {
                    let gi: [f64; 3] = std::array::from_fn(|j| a[i].g[j] + b[i].g[j] + c[i].g[j]);
                    div += gi[i];
                    sg += gi.iter().map(|x| x * x).sum::<f64>() * w;
                }
                sd += div * div * w;
            }
        }
        let rel = if sg > 0.0 { (sd / sg).sqrt() } else { 0.0 };
        (rel, sd.sqrt())
    }

    /// Divergence of the sampled field: spectral in `(x, y)` at fixed `zeta`,
    /// panel derivatives in `zeta`; relative to the analytic `|| grad U ||_L2`.
    pub fn divergence_numeric(&self) -> f64 {
        let spec = Spectral::new(self.grid);
        let nz = self.nz();
        let npts = self.grid.len();
        let g = &self.geom;
        let mut div = vec![0.0; npts * nz];
        for k in 0..nz {
            let s0: Vec<f64> = (0..npts).map(|n| self.u[0][n * nz + k]).collect();
            let s1: Vec<f64> = (0..npts).map(|n| self.u[1][n * nz + k]).collect();
            let d = spec.divergence(&s0, &s1);
            for n in 0..npts {
                div[n * nz + k] = d[n];
            }
        }
        for n in 0..npts {
            let w: Vec<f64> = (0..nz)
                .map(|k| {
                    let i = n * nz + k;
                    self.u[2][i] - g.bx[n] * self.u[0][i] - g.by[n] * self.u[1][i]
                })
                .collect();
            let dw = self.zeta.axis.derivative(&w);
            for k in 0..nz {
                div[n * nz + k] += dw[k];
            }
        }
        let mut sg = 0.0;
        for n in 0..npts {
            for k in 0..nz {
                let (a, b, c) = self.jets(n, k);
                let w = self.volume_weight(k);
                for i in 0..3 {
                    sg += (0..3).map(|j| (a[i].g[j] + b[i].g[j] + c[i].g[j]).powi(2)).sum::<f64>() * w;
                }
            }
        }
        let sd = self.l2(&[&div]);
        if sg > 0.0 {
            sd / sg.sqrt()
        } else {
            0.0
        }
    }
}

/// Horizontal gradients of `P0_int` and `p`.
#[derive(Debug, Clone)]
pub struct PressureGradients {
    pub p0: [Vec<f64>; 2],
    pub pbar: [Vec<f64>; 2],
}

/// The blended field without the corrector and its divergence defect `-div`.
#[derive(Debug, Clone)]
pub struct Uncorrected {
    pub u: [Vec<f64>; 3],
    pub defect: Vec<f64>,
}

/// Sample the blended field `U_app - V` and its exact divergence defect on the grid.
pub fn assemble_uncorrected(stack: &Stack, g: &GeometryBundle, zeta: &ZetaGrid, cut: &CutoffProfile) -> Result<Uncorrected> {
    let npts = g.grid.len();
    if stack.ubar[0].f.len() != npts {
        return Err(Error::Mismatch(format!("stack has {} points, geometry {npts}", stack.ubar[0].f.len())));
    }
    let nz = zeta.len();
    let mut u = [vec![0.0; npts * nz], vec![0.0; npts * nz], vec![0.0; npts * nz]];
    let mut defect = vec![0.0; npts * nz];
    for n in 0..npts {
        let col = Column::new(g, n);
        for (k, &z) in zeta.nodes().iter().enumerate() {
            let (a, b, _) = stack.eval(&col, cut, n, z, false);
            for c in 0..3 {
                u[c][n * nz + k] = a[c].v + b[c].v;
            }
            let chi1 = cut.jet(z)[1];
            if chi1 != 0.0 {
                // -chi' [N . (L_t - L_b) + delta^2 (U2_t - U2_b)]
                let mut jump = stack.int2[1].f[n] - stack.int2[0].f[n];
                for (layer, sgn) in stack.layers.iter().zip([-1.0, 1.0]) {
                    let xi = layer.xi(z, col.delta);
                    if xi > XI_CUT {
                        continue;
                    }
                    let e = exps(xi);
                    let l: [f64; 3] = std::array::from_fn(|c| layer.v[c].eval3(n, xi, e)[0]);
                    jump += sgn * (l[2] - col.bx * l[0] - col.by * l[1]);
                }
                defect[n * nz + k] = -chi1 * jump;
            }
        }
    }
    Ok(Uncorrected { u, defect })
}

/// A numerically constructed divergence corrector.
#[derive(Debug, Clone)]
pub struct Corrector {
    pub v: [Vec<f64>; 3],
    /// Mean of the column-integrated defect removed before the horizontal inversion.
    pub mean_removed: f64,
}

/// Build `V` with `div V = defect` and `V = 0` on both walls.
///
/// With a bump `eta(zeta)` of unit integral, `V_h = eta Phi`, `Phi = grad lap^-1 D`,
/// `D = int_0^2 defect`, and `V_3 = grad B . V_h + int_0^zeta (defect - eta div Phi)`.
pub fn divergence_corrector(
    defect: &[f64],
    g: &GeometryBundle,
    zeta: &ZetaGrid,
    eta: impl Fn(f64) -> f64,
) -> Result<Corrector> {
    let npts = g.grid.len();
    let nz = zeta.len();
    if defect.len() != npts * nz {
        return Err(Error::Mismatch(format!("defect has {} values, grid {}", defect.len(), npts * nz)));
    }
    let scale = defect.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    for (k, &z) in zeta.nodes().iter().enumerate() {
        if (0.25..=1.75).contains(&z) {
            continue;
        }
        let worst = (0..npts).map(|n| defect[n * nz + k].abs()).fold(0.0, f64::max);
        if worst > 1e-12 * scale.max(1e-300) && worst > 0.0 {
            return Err(Error::DefectSupport(z));
        }
    }
    let spec = Spectral::new(g.grid);
    let eta_n: Vec<f64> = zeta.nodes().iter().map(|&z| eta(z)).collect();
    let eta_int = zeta.axis.integrate(&eta_n);
    let mut dcol = vec![0.0; npts];
    for (n, d) in dcol.iter_mut().enumerate() {
        *d = zeta.axis.integrate(&defect[n * nz..(n + 1) * nz]) / eta_int;
    }
    let mean_removed = g.grid.mean(&dcol);
    dcol.iter_mut().for_each(|x| *x -= mean_removed);
    let phi = spec.inv_laplacian(&dcol);
    let (fx, fy) = (spec.dx(&phi), spec.dy(&phi));
    let divphi = spec.divergence(&fx, &fy);
    let mut v = [vec![0.0; npts * nz], vec![0.0; npts * nz], vec![0.0; npts * nz]];
    for n in 0..npts {
        let src: Vec<f64> = (0..nz).map(|k| defect[n * nz + k] - eta_n[k] * divphi[n]).collect();
        let w3 = zeta.axis.cumulative(&src);
        for k in 0..nz {
            let i = n * nz + k;
            v[0][i] = eta_n[k] * fx[n];
            v[1][i] = eta_n[k] * fy[n];
            v[2][i] = g.bx[n] * v[0][i] + g.by[n] * v[1][i] + w3[k];
        }
    }
    Ok(Corrector { v, mean_removed })
}

/// Assemble `U_app` and `P_app` for a limit state.
pub fn assemble_approx(
    model: &LimitModel,
    ctx: &LayerContext,
    state: &LimitState,
    eps: f64,
    opts: AssemblyOptions,
) -> Result<ApproxSolution> {
    let g = &model.geom;
    if (g.eps - eps).abs() > 1e-15 * eps {
        return Err(Error::Mismatch(format!("geometry built for eps = {}, assembly asked for {eps}", g.eps)));
    }
    if state.u.len() != g.grid.len() {
        return Err(Error::Mismatch(format!("state has {} points, grid {}", state.u.len(), g.grid.len())));
    }
    let cutoff = make_cutoff(opts.cutoff_order)?;
    let zeta = ZetaGrid::new(opts.nzeta, g.max_delta(), opts.tail_tol)?;
    let u_t = model.limit_rhs(state)?;
    let u_tt = model.tendency_derivative((&state.u, &state.v), (&u_t.0, &u_t.1));
    let stack = Stack::new(ctx, g, (&state.u, &state.v), (&u_t.0, &u_t.1), true);
    let stack_t = Stack::new(ctx, g, (&u_t.0, &u_t.1), (&u_tt.0, &u_tt.1), false);
    let scale = state.max_speed().max(1e-300);
    let leak = stack.layers.iter().map(|l| l.leak(&g.delta)).fold(0.0, f64::max);
    if leak > opts.leak_tol * scale && state.max_speed() > 0.0 {
        return Err(Error::DefectSupport(0.5));
    }
    let npts = g.grid.len();
    let nz = zeta.len();
    let mut u = [vec![0.0; npts * nz], vec![0.0; npts * nz], vec![0.0; npts * nz]];
    let mut v = u.clone();
    let mut deviation = u.clone();
    for n in 0..npts {
        let col = Column::new(g, n);
        for (k, &z) in zeta.nodes().iter().enumerate() {
            let (a, b, c) = stack.eval(&col, &cutoff, n, z, false);
            let i = n * nz + k;
            for m in 0..3 {
                u[m][i] = a[m].v + b[m].v + c[m].v;
                v[m][i] = c[m].v;
                deviation[m][i] = b[m].v + c[m].v;
            }
        }
    }
    let chi1: Vec<f64> = zeta.nodes().iter().map(|&z| cutoff.jet(z)[1]).collect();
    let mut defect_sq = 0.0;
    for n in 0..npts {
        let w = stack.int2[1].f[n] - stack.int2[0].f[n];
        for k in 0..nz {
            defect_sq += (chi1[k] * w).powi(2) * g.grid.cell_area() * zeta.axis.weights[k];
        }
    }
    Ok(ApproxSolution {
        grid: g.grid,
        zeta,
        eps,
        nu: model.nu,
        time: state.t,
        cutoff,
        geom: g.clone(),
        state: state.clone(),
        pressure: model.pressure(&state.u, &state.v),
        u_t,
        u_tt,
        stack,
        stack_t,
        u,
        v,
        deviation,
        defect_norm: defect_sq.sqrt(),
        leak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_plateaus_and_symmetry() {
        for order in [2, 3, 4] {
            let c = make_cutoff(order).unwrap();
            assert_eq!(c.value(0.25), 0.0);
            assert_eq!(c.value(1.75), 1.0);
            assert!((c.value(1.0) - 0.5).abs() < 1e-14);
            for d in 1..order.min(3) + 1 {
                assert!(c.jet(0.5 + 1e-9)[d].abs() < 1e-6);
                assert!(c.jet(1.5 - 1e-9)[d].abs() < 1e-6);
            }
        }
        assert!(make_cutoff(1).is_err());
    }

    #[test]
    fn cutoff_derivative_integrates_to_one() {
        let c = make_cutoff(3).unwrap();
        let z = ZetaGrid::new(128, 1e-3, 1e-8).unwrap();
        let f: Vec<f64> = z.nodes().iter().map(|&x| c.jet(x)[1]).collect();
        assert!((z.axis.integrate(&f) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_grid_layout() {
        let z = ZetaGrid::new(128, 1e-3, 1e-8).unwrap();
        assert_eq!(z.len(), 129);
        assert_eq!(z.nodes()[0], 0.0);
        assert_eq!(*z.nodes().last().unwrap(), 2.0);
        assert!((z.wall_zone - 0.05).abs() < 1e-15);
        assert!(ZetaGrid::new(100, 1e-3, 1e-8).is_err());
        assert!(matches!(ZetaGrid::new(128, 0.05, 1e-8), Err(Error::Tail { .. })));
    }

    #[test]
    fn separable_jet_matches_finite_differences() {
        // phi(z - B) F(x, y) with B = 0.1 sin x cos y, F = cos(x) + sin(2y), phi = zeta^2
        let col = Column { bx: 0.07, by: -0.03, lap_b: 0.2, delta: 1.0, kappa: [0.0; 2], div_kappa: 0.0 };
        let f = Field2 { f: vec![1.3], fx: vec![0.4], fy: vec![-0.2], lap: vec![0.9] };
        let j = col.separable([0.25, 1.0, 2.0], &f, 0);
        assert!((j.v - 0.325).abs() < 1e-15);
        assert!((j.g[2] - 1.3).abs() < 1e-15);
        let lap = 0.25 * 0.9 - 2.0 * (0.07 * 0.4 + 0.03 * 0.2) - 0.2 * 1.3 + 2.0 * (1.0 + 0.0049 + 0.0009) * 1.3;
        assert!((j.lap - lap).abs() < 1e-14);
    }
}
