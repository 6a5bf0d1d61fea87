//! Boundary-layer and interior corrections at orders 0, 1 and 2.
//!
//! Layer fields are functions of the horizontal position and the stretched
//! wall distance `xi = sigma (z - z_wall) / delta(x, y)` (`sigma = +1` at the
//! bottom `z = B`, `-1` at the top `z = B + 2`). They are held in closed form
//! as [`ExpPoly`] sums and sampled on a [`StretchedAxis`] when needed.

pub mod eigen;
pub mod exppoly;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C;

pub use eigen::{audit, AuditReport, DiagonalizationPack};
pub use exppoly::{ExpPoly, Root};

use exppoly::{dot2, mix2, mix2_real};

use crate::error::{Error, Result};
use crate::geometry::GeometryBundle;
use crate::quadrature::PanelAxis;
use crate::spectral::Spectral;

/// Wall a layer is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Top,
}

impl Side {
    pub fn sigma(self) -> f64 {
        match self {
            Side::Bottom => 1.0,
            Side::Top => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

/// Kernel of the order-1 horizontal layer solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order1Kernel {
    /// Exact decaying solution of the second-order system.
    Exact,
    /// The printed first-order convolution `int_0^xi exp(-r (xi - tau)) G(tau) dtau` with `r = sqrt(+-i)`.
    Printed,
}

impl FromStr for Order1Kernel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Order1Kernel::Exact),
            "printed" => Ok(Order1Kernel::Printed),
            _ => Err(Error::Parameter(format!("unknown order-1 kernel `{s}` (expected exact|printed)"))),
        }
    }
}

impl fmt::Display for Order1Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Order1Kernel::Exact => "exact",
            Order1Kernel::Printed => "printed",
        })
    }
}

/// Formula for the order-2 layer pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P2Variant {
    /// Tail integral of the vertical order-1 momentum balance.
    Integrated,
    /// The printed tail formulas with their sign conventions.
    Printed,
}

impl FromStr for P2Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integrated" => Ok(P2Variant::Integrated),
            "printed" => Ok(P2Variant::Printed),
            _ => Err(Error::Parameter(format!("unknown pressure variant `{s}` (expected integrated|printed)"))),
        }
    }
}

impl fmt::Display for P2Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            P2Variant::Integrated => "integrated",
            P2Variant::Printed => "printed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileOptions {
    pub kernel: Order1Kernel,
    pub p2: P2Variant,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions { kernel: Order1Kernel::Exact, p2: P2Variant::Integrated }
    }
}

/// Sampling axis in the layer coordinate.
#[derive(Debug, Clone)]
pub struct StretchedAxis {
    pub axis: PanelAxis,
    pub z_max: f64,
    pub tol: f64,
}

impl StretchedAxis {
    pub fn new(z_max: f64, panels: usize, degree: usize, tol: f64) -> Result<Self> {
        let tail = (-z_max / std::f64::consts::SQRT_2).exp();
        if !(tail < tol) {
            return Err(Error::Tail { z_max, tail, tol });
        }
        let edges = crate::quadrature::geometric_edges(z_max, panels, 1.0);
        Ok(StretchedAxis { axis: PanelAxis::new(edges, degree)?, z_max, tol })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.axis.nodes
    }

    /// Values of `f` at grid point `n` on every node.
    pub fn sample(&self, f: &ExpPoly, n: usize) -> Vec<f64> {
        self.axis.nodes.iter().map(|&x| f.eval(n, x)).collect()
    }

    /// Relative size of `f` at `z_max`; errors when above tolerance.
    pub fn check_tail(&self, f: &ExpPoly) -> Result<f64> {
        let scale = f.envelope(0.0).max(1e-300);
        let rel = f.envelope(self.z_max) / scale;
        if f.envelope(0.0) > 0.0 && rel > self.tol {
            return Err(Error::Tail { z_max: self.z_max, tail: rel, tol: self.tol });
        }
        Ok(rel)
    }
}

impl Default for StretchedAxis {
    fn default() -> Self {
        StretchedAxis::new(40.0, 32, 8, 1e-8).expect("default axis is valid")
    }
}

/// Per-point coefficients shared by all layer constructions.
#[derive(Debug, Clone)]
pub struct LayerCoefficients {
    pub c: Vec<f64>,
    pub bx: Vec<f64>,
    pub by: Vec<f64>,
    pub lap_b: Vec<f64>,
    pub kappa_x: Vec<f64>,
    pub kappa_y: Vec<f64>,
    /// `3 cos^2 g grad B^T H grad B`.
    pub q3: Vec<f64>,
    /// `A = cos g E1 H0` row-major.
    pub a: Vec<[f64; 4]>,
    pub h0_inv: Vec<[f64; 4]>,
    /// `sqrt(cos g / nu)`.
    pub time_scale: Vec<f64>,
}

impl LayerCoefficients {
    pub fn new(g: &GeometryBundle, nu: f64) -> Self {
        let n = g.grid.len();
        let mut out = LayerCoefficients {
            c: g.cos_gamma.clone(),
            bx: g.bx.clone(),
            by: g.by.clone(),
            lap_b: g.lap_b.clone(),
            kappa_x: g.kappa_x.clone(),
            kappa_y: g.kappa_y.clone(),
            q3: vec![0.0; n],
            a: vec![[0.0; 4]; n],
            h0_inv: vec![[0.0; 4]; n],
            time_scale: vec![0.0; n],
        };
        for p in 0..n {
            let c = g.cos_gamma[p];
            let (bx, by) = (g.bx[p], g.by[p]);
            let ghg = g.bxx[p] * bx * bx + 2.0 * g.bxy[p] * bx * by + g.byy[p] * by * by;
            out.q3[p] = 3.0 * c * c * ghg;
            let [h11, h12, h22] = g.h0[p];
            out.a[p] = [c * h12, c * h22, -c * h11, -c * h12];
            let det = h11 * h22 - h12 * h12;
            out.h0_inv[p] = [h22 / det, -h12 / det, -h12 / det, h11 / det];
            out.time_scale[p] = (c / nu).sqrt();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// `L1 X = 3 c^2 g^T H g (X' + xi X'') - lap B X' - 2 grad B . grad~ X'`.
    pub fn l1(&self, x: &ExpPoly, spec: &Spectral) -> ExpPoly {
        let d = x.d_xi();
        let dd = d.d_xi();
        let a = d.add(&dd.mul_xi()).scale(&self.q3);
        let b = d.scale(&self.lap_b);
        let cx = d.dx(spec).scale(&self.bx.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        let cy = d.dy(spec).scale(&self.by.iter().map(|v| 2.0 * v).collect::<Vec<_>>());
        a.sub(&b).sub(&cx).sub(&cy)
    }

    fn kappa(&self) -> (&[f64], &[f64]) {
        (&self.kappa_x, &self.kappa_y)
    }

    fn grad_b(&self) -> (&[f64], &[f64]) {
        (&self.bx, &self.by)
    }

    /// `grad~ . V + kappa . V - xi kappa . V'` for a horizontal layer field carrying a factor `delta`.
    fn scaled_divergence(&self, v: &[ExpPoly; 2], spec: &Spectral) -> ExpPoly {
        let dv = [v[0].d_xi(), v[1].d_xi()];
        v[0].dx(spec).add(&v[1].dy(spec)).add(&dot2(self.kappa(), v)).sub(&dot2(self.kappa(), &dv).mul_xi())
    }
}

/// Order-0 layer fields and the order-1 layer pressure.
#[derive(Debug, Clone)]
pub struct Order0 {
    pub uh: [ExpPoly; 2],
    pub u3: ExpPoly,
    pub p1: ExpPoly,
}

pub fn profile_order0(coef: &LayerCoefficients, u: (&[f64], &[f64]), side: Side) -> Order0 {
    let n = coef.len();
    let mut a0 = [vec![C::new(0.0, 0.0); n], vec![C::new(0.0, 0.0); n]];
    for p in 0..n {
        let a = coef.a[p];
        let (u1, u2) = (u.0[p], u.1[p]);
        a0[0][p] = -C::new(u1, a[0] * u1 + a[1] * u2);
        a0[1][p] = -C::new(u2, a[2] * u1 + a[3] * u2);
    }
    let [c0, c1] = a0;
    let uh = [ExpPoly::single(0, Root::Plus, c0), ExpPoly::single(0, Root::Plus, c1)];
    let u3 = dot2(coef.grad_b(), &uh);
    let sc: Vec<f64> = coef.c.iter().map(|c| side.sigma() * c).collect();
    let p1 = u3.d_xi().scale(&sc);
    Order0 { uh, u3, p1 }
}

/// Order-1 interior correction: `U1_h = (I + A) u / sqrt 2` and the affine
/// vertical component `U1_3(zeta) = grad B . U1_h + (1 - zeta) s`, with
/// `s = div U1_h + kappa . U1_h` and `zeta = z - B`.
#[derive(Debug, Clone)]
pub struct Interior1 {
    pub uh: [Vec<f64>; 2],
    pub slope: Vec<f64>,
    pub base: Vec<f64>,
}

impl Interior1 {
    pub fn u3(&self, n: usize, zeta: f64) -> f64 {
        self.base[n] + (1.0 - zeta) * self.slope[n]
    }
}

pub fn interior_order1(coef: &LayerCoefficients, spec: &Spectral, u: (&[f64], &[f64])) -> Interior1 {
    let n = coef.len();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut uh = [vec![0.0; n], vec![0.0; n]];
    for p in 0..n {
        let a = coef.a[p];
        let (u1, u2) = (u.0[p], u.1[p]);
        uh[0][p] = h * (u1 + a[0] * u1 + a[1] * u2);
        uh[1][p] = h * (u2 + a[2] * u1 + a[3] * u2);
    }
    let div = spec.divergence(&uh[0], &uh[1]);
    let slope: Vec<f64> = (0..n).map(|p| div[p] + coef.kappa_x[p] * uh[0][p] + coef.kappa_y[p] * uh[1][p]).collect();
    let base = (0..n).map(|p| coef.bx[p] * uh[0][p] + coef.by[p] * uh[1][p]).collect();
    Interior1 { uh, slope, base }
}

/// Order-1 forcing of the layer equations.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub fh: [ExpPoly; 2],
    pub f3: ExpPoly,
    pub f0: ExpPoly,
    /// `F_h + grad B F_3 + sigma grad B F_0'`.
    pub rhs: [ExpPoly; 2],
    /// Eigen-components `Q^-1 H0^-1 rhs`.
    pub g: [ExpPoly; 2],
    /// `tail(sqrt(c/nu) dt U0_3)`.
    pub tail_time: ExpPoly,
    /// `tail(c^2 L1 U0_3)`.
    pub tail_l1: ExpPoly,
}

pub fn forcing_terms(
    coef: &LayerCoefficients,
    spec: &Spectral,
    pack: &DiagonalizationPack,
    o0: &Order0,
    o0_t: &Order0,
    side: Side,
) -> Forcing {
    let s = side.sigma();
    let c2s: Vec<f64> = coef.c.iter().map(|c| s * c * c).collect();
    let c2: Vec<f64> = coef.c.iter().map(|c| c * c).collect();
    let cinv: Vec<f64> = coef.c.iter().map(|c| 1.0 / c).collect();
    let p1 = &o0.p1;
    let p1_corr = p1.sub(&p1.d_xi().mul_xi());
    let dp1 = [p1.dx(spec), p1.dy(spec)];
    let fh: [ExpPoly; 2] = std::array::from_fn(|j| {
        let k = if j == 0 { &coef.kappa_x } else { &coef.kappa_y };
        let pres = dp1[j].add(&p1_corr.scale(k)).scale(&cinv);
        o0_t.uh[j].scale(&coef.time_scale).sub(&coef.l1(&o0.uh[j], spec).scale(&c2s)).add(&pres)
    });
    let l1u3 = coef.l1(&o0.u3, spec);
    let time3 = o0_t.u3.scale(&coef.time_scale);
    let f3 = time3.sub(&l1u3.scale(&c2s));
    let duh = [o0.uh[0].d_xi(), o0.uh[1].d_xi()];
    let f0 = o0.uh[0].dx(spec).add(&o0.uh[1].dy(spec)).sub(&dot2(coef.kappa(), &duh).mul_xi());
    let df0 = f0.d_xi();
    let rhs: [ExpPoly; 2] = std::array::from_fn(|j| {
        let g = if j == 0 { &coef.bx } else { &coef.by };
        let gs: Vec<f64> = g.iter().map(|v| s * v).collect();
        fh[j].add(&f3.scale(g)).add(&df0.scale(&gs))
    });
    let real = [rhs[0].realified(), rhs[1].realified()];
    let g = mix2(&pack.q_inv, &mix2_real(&coef.h0_inv, &real));
    Forcing { fh, f3, f0, rhs, g, tail_time: time3.tail(), tail_l1: l1u3.scale(&c2).tail() }
}

/// Order-1 layer fields and the order-2 layer pressure.
#[derive(Debug, Clone)]
pub struct Order1 {
    pub uh: [ExpPoly; 2],
    pub u3: ExpPoly,
    pub p2: ExpPoly,
}

/// `-Re[exp(-lambda+ xi) (I + i A)] v`, the decaying homogeneous solution equal to `-v` at the wall.
fn homogeneous(coef: &LayerCoefficients, v: &[Vec<f64>; 2]) -> [ExpPoly; 2] {
    let n = coef.len();
    let mut c = [vec![C::new(0.0, 0.0); n], vec![C::new(0.0, 0.0); n]];
    for p in 0..n {
        let a = coef.a[p];
        c[0][p] = -C::new(v[0][p], a[0] * v[0][p] + a[1] * v[1][p]);
        c[1][p] = -C::new(v[1][p], a[2] * v[0][p] + a[3] * v[1][p]);
    }
    let [c0, c1] = c;
    [ExpPoly::single(0, Root::Plus, c0), ExpPoly::single(0, Root::Plus, c1)]
}

pub fn profile_order1(
    coef: &LayerCoefficients,
    pack: &DiagonalizationPack,
    forcing: &Forcing,
    interior: &Interior1,
    side: Side,
    opts: ProfileOptions,
) -> Order1 {
    let n = coef.len();
    let s = side.sigma();
    let uh = match opts.kernel {
        Order1Kernel::Exact => {
            let w: [ExpPoly; 2] = std::array::from_fn(|k| {
                let mut w = forcing.g[k].solve_second(pack.roots[k]);
                let w0 = w.at0();
                let target: Vec<C> = (0..n)
                    .map(|p| -(pack.q_inv[p][k][0] * interior.uh[0][p] + pack.q_inv[p][k][1] * interior.uh[1][p]))
                    .collect();
                w.push(0, pack.roots[k], target.iter().zip(&w0).map(|(t, v)| t - v).collect());
                w
            });
            mix2(&pack.q, &w)
        }
        Order1Kernel::Printed => {
            let printed_roots = [Root::Plus, Root::Minus];
            let w: [ExpPoly; 2] = std::array::from_fn(|k| {
                let mut w = forcing.g[k].solve_first(printed_roots[k]);
                let w0 = w.at0();
                w.push(0, printed_roots[k], w0.iter().map(|v| -v).collect());
                w
            });
            let conv = mix2(&pack.q, &w);
            let h = homogeneous(coef, &interior.uh);
            [h[0].add(&conv[0]), h[1].add(&conv[1])]
        }
    };
    let u3 = dot2(coef.grad_b(), &uh).add(&forcing.f0.tail().scale_const(C::new(s, 0.0)));
    let sc: Vec<f64> = coef.c.iter().map(|c| s * c).collect();
    let p2 = match opts.p2 {
        P2Variant::Integrated => u3.d_xi().add(&forcing.f3.tail()).scale(&sc),
        P2Variant::Printed => {
            let tails = forcing.tail_time.sub(&forcing.tail_l1).scale_const(C::new(s, 0.0));
            tails.sub(&u3.d_xi()).scale(&coef.c)
        }
    };
    Order1 { uh, u3, p2 }
}

/// Order-2 vertical layer velocity and its interior counterpart.
#[derive(Debug, Clone)]
pub struct Order2 {
    pub u3: ExpPoly,
    pub interior: Vec<f64>,
}

pub fn profile_order2(coef: &LayerCoefficients, spec: &Spectral, o1: &Order1, side: Side) -> Order2 {
    let u3 = coef.scaled_divergence(&o1.uh, spec).tail().scale_const(C::new(side.sigma(), 0.0));
    let interior = u3.at0_re().into_iter().map(|v| -v).collect();
    Order2 { u3, interior }
}

/// All layer fields attached to one wall.
#[derive(Debug, Clone)]
pub struct LayerProfileSet {
    pub side: Side,
    pub o0: Order0,
    pub forcing: Forcing,
    pub o1: Order1,
    pub o2: Order2,
}

/// Shared inputs of the layer construction.
#[derive(Debug, Clone)]
pub struct LayerContext {
    pub spec: Spectral,
    pub coef: LayerCoefficients,
    pub pack: DiagonalizationPack,
    pub opts: ProfileOptions,
}

impl LayerContext {
    pub fn new(g: &GeometryBundle, nu: f64, opts: ProfileOptions) -> Self {
        LayerContext {
            spec: Spectral::new(g.grid),
            coef: LayerCoefficients::new(g, nu),
            pack: DiagonalizationPack::new(g),
            opts,
        }
    }
}

/// Interior order-1 fields and both layer sets for one limit velocity and its time derivative.
#[derive(Debug, Clone)]
pub struct Profiles {
    pub interior: Interior1,
    pub bottom: LayerProfileSet,
    pub top: LayerProfileSet,
}

impl Profiles {
    pub fn side(&self, side: Side) -> &LayerProfileSet {
        match side {
            Side::Bottom => &self.bottom,
            Side::Top => &self.top,
        }
    }

    /// Largest mismatch `|U1_3,int + U1_3,layer|` at either wall.
    pub fn wall_mismatch(&self) -> f64 {
        let mut worst = 0.0_f64;
        for set in [&self.bottom, &self.top] {
            let zeta = if set.side == Side::Bottom { 0.0 } else { 2.0 };
            let w = set.o1.u3.at0_re();
            for (n, v) in w.iter().enumerate() {
                worst = worst.max((v + self.interior.u3(n, zeta)).abs());
            }
        }
        worst
    }
}

pub fn build_layer(
    ctx: &LayerContext,
    u: (&[f64], &[f64]),
    ut: (&[f64], &[f64]),
    interior: &Interior1,
    side: Side,
) -> LayerProfileSet {
    let o0 = profile_order0(&ctx.coef, u, side);
    let o0_t = profile_order0(&ctx.coef, ut, side);
    let forcing = forcing_terms(&ctx.coef, &ctx.spec, &ctx.pack, &o0, &o0_t, side);
    let o1 = profile_order1(&ctx.coef, &ctx.pack, &forcing, interior, side, ctx.opts);
    let o2 = profile_order2(&ctx.coef, &ctx.spec, &o1, side);
    LayerProfileSet { side, o0, forcing, o1, o2 }
}

pub fn build_profiles(ctx: &LayerContext, u: (&[f64], &[f64]), ut: (&[f64], &[f64])) -> Profiles {
    let interior = interior_order1(&ctx.coef, &ctx.spec, u);
    let bottom = build_layer(ctx, u, ut, &interior, Side::Bottom);
    let top = build_layer(ctx, u, ut, &interior, Side::Top);
    Profiles { interior, bottom, top }
}

/// Residuals of the layer equations sampled on an axis (max over grid and nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerResiduals {
    /// `H0 U1'' + c^-1 E1 U1 - rhs`.
    pub order1: f64,
    /// `U1_h(0) + U1_int,h`.
    pub wall: f64,
    /// `P2' - sigma c (U1_3'' - F3)`.
    pub pressure: f64,
    /// `U1_3' - grad B . U1_h' + sigma F0`.
    pub vertical: f64,
    /// Relative size of the layer fields at `z_max`.
    pub tail: f64,
}

impl fmt::Display for LayerResiduals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "order1 {:.3e}  wall {:.3e}  pressure {:.3e}  vertical {:.3e}  tail {:.3e}",
            self.order1, self.wall, self.pressure, self.vertical, self.tail
        )
    }
}

fn max_on_axis(f: &ExpPoly, axis: &StretchedAxis) -> f64 {
    let mut m = 0.0_f64;
    for n in 0..f.n {
        for &x in axis.nodes() {
            m = m.max(f.eval(n, x).abs());
        }
    }
    m
}

pub fn layer_residuals(
    ctx: &LayerContext,
    g: &GeometryBundle,
    set: &LayerProfileSet,
    interior: &Interior1,
    axis: &StretchedAxis,
) -> Result<LayerResiduals> {
    let coef = &ctx.coef;
    let s = set.side.sigma();
    let u = &set.o1.uh;
    let d2 = [u[0].d_xi().d_xi(), u[1].d_xi().d_xi()];
    let h = |k: usize| -> Vec<f64> { g.h0.iter().map(|m| m[k]).collect() };
    let ci: Vec<f64> = coef.c.iter().map(|c| 1.0 / c).collect();
    let mci: Vec<f64> = ci.iter().map(|v| -v).collect();
    // E1 U = (U2, -U1)
    let r0 = d2[0].scale(&h(0)).add(&d2[1].scale(&h(1))).add(&u[1].scale(&ci)).sub(&set.forcing.rhs[0]);
    let r1 = d2[0].scale(&h(1)).add(&d2[1].scale(&h(2))).add(&u[0].scale(&mci)).sub(&set.forcing.rhs[1]);
    let order1 = max_on_axis(&r0, axis).max(max_on_axis(&r1, axis));
    let w = [u[0].at0_re(), u[1].at0_re()];
    let wall = (0..coef.len())
        .map(|p| (w[0][p] + interior.uh[0][p]).abs().max((w[1][p] + interior.uh[1][p]).abs()))
        .fold(0.0, f64::max);
    let sc: Vec<f64> = coef.c.iter().map(|c| s * c).collect();
    let rp = set.o1.p2.d_xi().sub(&set.o1.u3.d_xi().d_xi().sub(&set.forcing.f3).scale(&sc));
    let du = [u[0].d_xi(), u[1].d_xi()];
    let rv = set.o1.u3.d_xi().sub(&dot2(coef.grad_b(), &du)).add(&set.forcing.f0.scale_const(C::new(s, 0.0)));
    let mut tail = 0.0_f64;
    for f in [&set.o0.uh[0], &set.o0.uh[1], &set.o0.p1, &set.o1.uh[0], &set.o1.uh[1], &set.o1.u3, &set.o1.p2, &set.o2.u3] {
        tail = tail.max(axis.check_tail(f)?);
    }
    Ok(LayerResiduals {
        order1,
        wall,
        pressure: max_on_axis(&rp, axis),
        vertical: max_on_axis(&rv, axis),
        tail,
    })
}

/// Pick the order-2 pressure variant with the smaller vertical-momentum residual.
pub fn select_p2_variant(
    ctx: &LayerContext,
    g: &GeometryBundle,
    u: (&[f64], &[f64]),
    ut: (&[f64], &[f64]),
    axis: &StretchedAxis,
) -> Result<(P2Variant, [f64; 2])> {
    let mut res = [0.0; 2];
    for (k, v) in [P2Variant::Integrated, P2Variant::Printed].into_iter().enumerate() {
        let mut c = ctx.clone();
        c.opts.p2 = v;
        let p = build_profiles(&c, u, ut);
        for set in [&p.bottom, &p.top] {
            res[k] = f64::max(res[k], layer_residuals(&c, g, set, &p.interior, axis)?.pressure);
        }
    }
    let pick = if res[1] < res[0] { P2Variant::Printed } else { P2Variant::Integrated };
    Ok((pick, res))
}

/// CSV dump of one layer set at grid point `n`.
pub fn profile_csv(set: &LayerProfileSet, n: usize, axis: &StretchedAxis) -> String {
    let header = ["xi", "u0_1", "u0_2", "u0_3", "p1", "u1_1", "u1_2", "u1_3", "p2", "u2_3"];
    let fields = [
        &set.o0.uh[0],
        &set.o0.uh[1],
        &set.o0.u3,
        &set.o0.p1,
        &set.o1.uh[0],
        &set.o1.uh[1],
        &set.o1.u3,
        &set.o1.p2,
        &set.o2.u3,
    ];
    let rows: Vec<Vec<f64>> = axis
        .nodes()
        .iter()
        .map(|&x| std::iter::once(x).chain(fields.iter().map(|f| f.eval(n, x))).collect())
        .collect();
    crate::io::csv_string(&header, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{derive_geometry, Preset, SurfaceField};
    use crate::spectral::Grid;

    fn setup(preset: &str, n: usize) -> (GeometryBundle, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let l = 2.0 * std::f64::consts::PI;
        let grid = Grid::new(n, n, l, l).unwrap();
        let s = SurfaceField::from_preset(Preset::parse(preset).unwrap(), grid).unwrap();
        let g = derive_geometry(&s, 1e-2, 0.1).unwrap();
        let u = grid.sample(|x, y| x.sin() * y.cos() + 0.3 * (2.0 * y).sin());
        let v = grid.sample(|x, y| -x.cos() * y.sin() + 0.2 * x.cos());
        let ut = grid.sample(|x, y| 0.1 * (x + y).cos());
        let vt = grid.sample(|x, y| -0.1 * (x + y).cos());
        (g, u, v, ut, vt)
    }

    #[test]
    fn flat_order0_is_the_ekman_spiral() {
        let (g, u, v, _, _) = setup("flat", 16);
        let coef = LayerCoefficients::new(&g, 0.1);
        let o0 = profile_order0(&coef, (&u, &v), Side::Bottom);
        let n = 37;
        for xi in [0.0, 0.4, 2.0] {
            let s = xi / std::f64::consts::SQRT_2;
            let e = (-s).exp();
            // E1 u = (v, -u)
            let x = -e * (s.cos() * u[n] + s.sin() * v[n]);
            let y = -e * (s.cos() * v[n] - s.sin() * u[n]);
            assert!((o0.uh[0].eval(n, xi) - x).abs() < 1e-14);
            assert!((o0.uh[1].eval(n, xi) - y).abs() < 1e-14);
            assert_eq!(o0.u3.eval(n, xi), 0.0);
            assert_eq!(o0.p1.eval(n, xi), 0.0);
        }
    }

    #[test]
    fn flat_interior_vertical_velocity() {
        let (g, u, v, ut, vt) = setup("flat", 16);
        let ctx = LayerContext::new(&g, 0.1, ProfileOptions::default());
        let p = build_profiles(&ctx, (&u, &v), (&ut, &vt));
        let omega = ctx.spec.curl(&u, &v);
        for n in [0, 50, 200] {
            for z in [0.0, 0.7, 2.0] {
                let want = (1.0 - z) * omega[n] / std::f64::consts::SQRT_2;
                assert!((p.interior.u3(n, z) - want).abs() < 1e-12);
            }
        }
        assert!(p.wall_mismatch() < 1e-12);
    }

    #[test]
    fn layer_equations_hold_on_eggcarton() {
        let (g, u, v, ut, vt) = setup("eggcarton(amp=0.05)", 32);
        let ctx = LayerContext::new(&g, 0.1, ProfileOptions::default());
        let axis = StretchedAxis::default();
        let p = build_profiles(&ctx, (&u, &v), (&ut, &vt));
        for set in [&p.bottom, &p.top] {
            let r = layer_residuals(&ctx, &g, set, &p.interior, &axis).unwrap();
            assert!(r.order1 < 1e-10, "{r}");
            assert!(r.wall < 1e-12, "{r}");
            assert!(r.pressure < 1e-10, "{r}");
            assert!(r.vertical < 1e-10, "{r}");
            assert!(r.tail < 1e-8, "{r}");
        }
        assert!(p.wall_mismatch() < 1e-10);
    }

    #[test]
    fn printed_variants_leave_residuals() {
        let (g, u, v, ut, vt) = setup("eggcarton(amp=0.05)", 16);
        let axis = StretchedAxis::default();
        let opts = ProfileOptions { kernel: Order1Kernel::Printed, p2: P2Variant::Printed };
        let ctx = LayerContext::new(&g, 0.1, opts);
        let p = build_profiles(&ctx, (&u, &v), (&ut, &vt));
        let r = layer_residuals(&ctx, &g, &p.bottom, &p.interior, &axis).unwrap();
        assert!(r.order1 > 1e-3 && r.pressure > 1e-3, "{r}");
        assert!(r.wall < 1e-12);
        let (pick, res) = select_p2_variant(&ctx, &g, (&u, &v), (&ut, &vt), &axis).unwrap();
        assert_eq!(pick, P2Variant::Integrated);
        assert!(res[0] < res[1]);
    }

    #[test]
    fn axis_rejects_short_truncation() {
        assert!(matches!(StretchedAxis::new(25.0, 32, 8, 1e-8), Err(Error::Tail { .. })));
        let ax = StretchedAxis::default();
        let f: Vec<f64> = ax.nodes().iter().map(|x| (-x / 2f64.sqrt()).exp() * (x / 2f64.sqrt()).cos()).collect();
        assert!((ax.axis.integrate(&f) - 1.0 / 2f64.sqrt()).abs() < 1e-10);
    }
}
