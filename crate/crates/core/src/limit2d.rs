//! The 2D damped rotational limit system and its vorticity formulation.
//!
//! The horizontal flow obeys
//! `u_t + (u . grad) u + k (H0 - E1 / cos g) u + grad p = 0`, `div u = 0`,
//! with `k = sqrt(nu / (2 cos g))` and `E1 = [[0, 1], [-1, 0]]`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::GeometryBundle;
use crate::spectral::{Grid, Spectral};

/// Horizontal velocity pair.
pub type Vel = (Vec<f64>, Vec<f64>);

/// Which vorticity right-hand side is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VorticityForm {
    /// Spectral curl of the velocity tendency.
    ExactCurl,
    /// Closed-form curvature and slope sources as printed.
    Printed,
}

impl std::str::FromStr for VorticityForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact-curl" => Ok(VorticityForm::ExactCurl),
            "printed" => Ok(VorticityForm::Printed),
            _ => Err(Error::Parameter(format!("unknown vorticity form `{s}` (exact | printed)"))),
        }
    }
}

/// Leray projection onto divergence-free fields.
pub fn leray_project(spec: &Spectral, u: &[f64], v: &[f64]) -> Vel {
    spec.leray(u, v)
}

/// Vertical vorticity `-dy u + dx v`.
pub fn vorticity(spec: &Spectral, u: &[f64], v: &[f64]) -> Vec<f64> {
    spec.curl(u, v)
}

/// Mean-free velocity with the given vorticity.
pub fn velocity_from_vorticity(spec: &Spectral, omega: &[f64]) -> Result<Vel> {
    let mean = spec.grid.mean(omega);
    let scale = spec.grid.linf(omega).max(1e-300);
    if mean.abs() > 1e-12 * scale && mean.abs() > 1e-300 {
        return Err(Error::NonzeroMean(mean));
    }
    let psi = spec.inv_laplacian(omega);
    let u: Vec<f64> = spec.dy(&psi).iter().map(|v| -v).collect();
    let v = spec.dx(&psi);
    Ok((u, v))
}

/// State of the limit flow.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl LimitState {
    pub fn zero(grid: &Grid) -> Self {
        LimitState { u: vec![0.0; grid.len()], v: vec![0.0; grid.len()], t: 0.0 }
    }

    pub fn max_speed(&self) -> f64 {
        self.u.iter().zip(&self.v).fold(0.0_f64, |m, (a, b)| m.max((a * a + b * b).sqrt()))
    }
}

/// Pressures associated with a limit state.
#[derive(Debug, Clone)]
pub struct Pressure {
    /// Order-one interior pressure, zero mean.
    pub p_bar: Vec<f64>,
    /// Leading pressure `inv_lap(omega)`.
    pub p0_int: Vec<f64>,
    /// Uniform part of `grad P0` balancing the rotation of the mean flow.
    pub p0_mean_grad: [f64; 2],
}

/// Geometry-dependent coefficients of the limit system.
#[derive(Debug, Clone)]
pub struct LimitModel {
    pub spec: Spectral,
    pub geom: GeometryBundle,
    pub nu: f64,
    /// `k = sqrt(nu / (2 cos g))`.
    pub k: Vec<f64>,
    /// Damping matrix `k (H0 - E1 / cos g)` as `[d11, d12, d21, d22]`.
    pub d: [Vec<f64>; 4],
    /// Advective Courant number used by the CFL guard.
    pub cfl: f64,
}

impl LimitModel {
    pub fn new(geom: &GeometryBundle, nu: f64) -> Self {
        let n = geom.grid.len();
        let mut k = vec![0.0; n];
        let mut d = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for p in 0..n {
            let c = geom.cos_gamma[p];
            let kk = (nu / (2.0 * c)).sqrt();
            let [h11, h12, h22] = geom.h0[p];
            k[p] = kk;
            d[0][p] = kk * h11;
            d[1][p] = kk * (h12 - 1.0 / c);
            d[2][p] = kk * (h12 + 1.0 / c);
            d[3][p] = kk * h22;
        }
        LimitModel { spec: Spectral::new(geom.grid), geom: geom.clone(), nu, k, d, cfl: 0.8 }
    }

    pub fn grid(&self) -> &Grid {
        &self.spec.grid
    }

    /// Pointwise damping-rotation product `D u`.
    pub fn damping(&self, u: &[f64], v: &[f64]) -> Vel {
        let d = &self.d;
        let a = (0..u.len()).map(|p| d[0][p] * u[p] + d[1][p] * v[p]).collect();
        let b = (0..u.len()).map(|p| d[2][p] * u[p] + d[3][p] * v[p]).collect();
        (a, b)
    }

    /// Rotational part `k E1 u / cos g` of the damping, pointwise.
    pub fn rotation_part(&self, u: &[f64], v: &[f64]) -> Vel {
        let g = &self.geom;
        let a = (0..u.len()).map(|p| -self.k[p] / g.cos_gamma[p] * v[p]).collect();
        let b = (0..u.len()).map(|p| self.k[p] / g.cos_gamma[p] * u[p]).collect();
        (a, b)
    }

    /// Pointwise `(a . grad) b` for horizontal fields.
    pub fn transport(&self, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> Vel {
        let s = &self.spec;
        let (bux, buy, bvx, bvy) = (s.dx(b.0), s.dy(b.0), s.dx(b.1), s.dy(b.1));
        let n = a.0.len();
        let x = (0..n).map(|p| a.0[p] * bux[p] + a.1[p] * buy[p]).collect();
        let y = (0..n).map(|p| a.0[p] * bvx[p] + a.1[p] * bvy[p]).collect();
        (x, y)
    }

    /// Unprojected force `(u . grad) u + D u`.
    pub fn force(&self, u: &[f64], v: &[f64]) -> Vel {
        let (ax, ay) = self.transport((u, v), (u, v));
        let (dx, dy) = self.damping(u, v);
        (ax.iter().zip(&dx).map(|(a, b)| a + b).collect(), ay.iter().zip(&dy).map(|(a, b)| a + b).collect())
    }

    /// Tendency `-P[(u . grad) u + D u]`, 2/3-dealiased.
    pub fn tendency(&self, u: &[f64], v: &[f64]) -> Vel {
        let (fx, fy) = self.force(u, v);
        let (px, py) = self.spec.leray_filtered(&fx, &fy, true);
        (px.into_iter().map(|x| -x).collect(), py.into_iter().map(|x| -x).collect())
    }

    /// Tendency of a state, rejecting non-finite values.
    pub fn limit_rhs(&self, st: &LimitState) -> Result<Vel> {
        let out = self.tendency(&st.u, &st.v);
        if out.0.iter().chain(&out.1).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "limit tendency at t = {} (max |u| = {:e})",
                st.t,
                st.max_speed()
            )));
        }
        Ok(out)
    }

    /// Directional derivative of the tendency at `u` along `du`.
    pub fn tendency_derivative(&self, u: (&[f64], &[f64]), du: (&[f64], &[f64])) -> Vel {
        let (a1, a2) = self.transport(du, u);
        let (b1, b2) = self.transport(u, du);
        let (d1, d2) = self.damping(du.0, du.1);
        let n = a1.len();
        let fx: Vec<f64> = (0..n).map(|p| a1[p] + b1[p] + d1[p]).collect();
        let fy: Vec<f64> = (0..n).map(|p| a2[p] + b2[p] + d2[p]).collect();
        let (px, py) = self.spec.leray_filtered(&fx, &fy, true);
        (px.into_iter().map(|x| -x).collect(), py.into_iter().map(|x| -x).collect())
    }

    /// Largest admissible step for the current state.
    pub fn max_dt(&self, st: &LimitState) -> f64 {
        let g = self.grid();
        let h = g.dx().min(g.dy());
        let speed = st.u.iter().chain(&st.v).fold(0.0_f64, |m, x| m.max(x.abs())) * 2.0;
        let damp = self.d.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs())) * 2.0;
        if speed == 0.0 {
            return f64::INFINITY;
        }
        let dmp = if damp > 0.0 { 2.5 / damp } else { f64::INFINITY };
        (self.cfl * h / speed).min(dmp)
    }

    /// One RK4 step.
    pub fn step(&self, st: &LimitState, dt: f64) -> Result<LimitState> {
        let required = self.max_dt(st);
        if dt > required {
            return Err(Error::Cfl { dt, required });
        }
        let axpy = |a: &[f64], h: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + h * y).collect() };
        let k1 = self.limit_rhs(st)?;
        let s2 = LimitState { u: axpy(&st.u, 0.5 * dt, &k1.0), v: axpy(&st.v, 0.5 * dt, &k1.1), t: st.t + 0.5 * dt };
        let k2 = self.limit_rhs(&s2)?;
        let s3 = LimitState { u: axpy(&st.u, 0.5 * dt, &k2.0), v: axpy(&st.v, 0.5 * dt, &k2.1), t: st.t + 0.5 * dt };
        let k3 = self.limit_rhs(&s3)?;
        let s4 = LimitState { u: axpy(&st.u, dt, &k3.0), v: axpy(&st.v, dt, &k3.1), t: st.t + dt };
        let k4 = self.limit_rhs(&s4)?;
        let n = st.u.len();
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        for p in 0..n {
            u[p] = st.u[p] + dt / 6.0 * (k1.0[p] + 2.0 * k2.0[p] + 2.0 * k3.0[p] + k4.0[p]);
            v[p] = st.v[p] + dt / 6.0 * (k1.1[p] + 2.0 * k2.1[p] + 2.0 * k3.1[p] + k4.1[p]);
        }
        let (u, v) = self.spec.leray_filtered(&u, &v, true);
        Ok(LimitState { u, v, t: st.t + dt })
    }

    /// Vertical component `u3 = grad B . u`.
    pub fn u3(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let g = &self.geom;
        (0..u.len()).map(|p| g.bx[p] * u[p] + g.by[p] * v[p]).collect()
    }

    /// Interior pressures of a state.
    pub fn pressure(&self, u: &[f64], v: &[f64]) -> Pressure {
        let s = &self.spec;
        let (fx, fy) = self.force(u, v);
        let fx = s.dealias(&fx);
        let fy = s.dealias(&fy);
        let div = s.divergence(&fx, &fy);
        let p_bar: Vec<f64> = s.inv_laplacian(&div).into_iter().map(|x| -x).collect();
        let omega = s.curl(u, v);
        let p0_int = s.inv_laplacian(&omega);
        let (mu, mv) = (s.grid.mean(u), s.grid.mean(v));
        Pressure { p_bar, p0_int, p0_mean_grad: [mv, -mu] }
    }

    /// Tendency of the mean velocity.
    pub fn mean_rhs(&self, u: &[f64], v: &[f64]) -> [f64; 2] {
        let (dx, dy) = self.damping(u, v);
        let (dx, dy) = (self.spec.dealias(&dx), self.spec.dealias(&dy));
        [-self.grid().mean(&dx), -self.grid().mean(&dy)]
    }

    /// Velocity with vorticity `omega` and mean `mean`.
    pub fn biot_savart(&self, omega: &[f64], mean: [f64; 2]) -> Result<Vel> {
        let (mut u, mut v) = velocity_from_vorticity(&self.spec, omega)?;
        u.iter_mut().for_each(|x| *x += mean[0]);
        v.iter_mut().for_each(|x| *x += mean[1]);
        Ok((u, v))
    }

    /// Vorticity tendency for the chosen formulation.
    pub fn vorticity_rhs(&self, omega: &[f64], mean: [f64; 2], form: VorticityForm) -> Result<Vec<f64>> {
        let s = &self.spec;
        let (u, v) = self.biot_savart(omega, mean)?;
        let n = u.len();
        let (wx, wy) = (s.dx(omega), s.dy(omega));
        let adv: Vec<f64> = (0..n).map(|p| u[p] * wx[p] + v[p] * wy[p]).collect();
        let out = match form {
            VorticityForm::ExactCurl => {
                let (dx, dy) = self.damping(&u, &v);
                let cd = s.curl(&dx, &dy);
                let tot: Vec<f64> = (0..n).map(|p| -adv[p] - cd[p]).collect();
                s.dealias(&tot)
            }
            VorticityForm::Printed => {
                let g = &self.geom;
                let (uy, vx, vy) = (s.dy(&u), s.dx(&v), s.dy(&v));
                let tot: Vec<f64> = (0..n)
                    .map(|p| {
                        let c = g.cos_gamma[p];
                        let k = self.k[p];
                        let (bx, by) = (g.bx[p], g.by[p]);
                        let h = [g.bxx[p], g.bxy[p], g.byy[p]];
                        let (u1, u2) = (u[p], v[p]);
                        // H u and E1 H u
                        let hu = [h[0] * u1 + h[1] * u2, h[1] * u1 + h[2] * u2];
                        let e1hu = [hu[1], -hu[0]];
                        let m = [
                            g.ka[p] * u1 - 1.5 * c * hu[0] - 1.5 * c * c * e1hu[0],
                            g.ka[p] * u2 - 1.5 * c * hu[1] - 1.5 * c * c * e1hu[1],
                        ];
                        // grad B^T E1 = (-By, Bx)
                        let curv = -by * m[0] + bx * m[1];
                        let slope = bx * bx * uy[p] + 2.0 * bx * by * vy[p] - by * by * vx[p];
                        -adv[p] - k * omega[p] - k / c * curv + k * slope
                    })
                    .collect();
                s.dealias(&tot)
            }
        };
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vorticity tendency".into()));
        }
        Ok(out)
    }

    /// Norms of a state.
    pub fn norms(&self, st: &LimitState) -> NormRow {
        let s = &self.spec;
        let g = self.grid();
        let omega = s.curl(&st.u, &st.v);
        let (ux, uy, vx, vy) = (s.dx(&st.u), s.dy(&st.u), s.dx(&st.v), s.dy(&st.v));
        let mut gmax = 0.0_f64;
        for p in 0..g.len() {
            gmax = gmax.max((ux[p] * ux[p] + uy[p] * uy[p] + vx[p] * vx[p] + vy[p] * vy[p]).sqrt());
        }
        let (rx, ry) = self.rotation_part(&st.u, &st.v);
        let work = g.dot(&st.u, &rx) + g.dot(&st.v, &ry);
        let scale = g.dot(&st.u, &st.u) + g.dot(&st.v, &st.v);
        NormRow {
            t: st.t,
            l2_u: g.l2_vec(&[&st.u, &st.v]),
            l2_omega: g.l2(&omega),
            linf_u: st.max_speed(),
            linf_grad_u: gmax,
            rotation_work: if scale > 0.0 { work.abs() / scale } else { 0.0 },
        }
    }
}

/// One row of the norm time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRow {
    pub t: f64,
    pub l2_u: f64,
    pub l2_omega: f64,
    pub linf_u: f64,
    pub linf_grad_u: f64,
    /// `|<u, k E1 u / cos g>| / |u|^2`, zero analytically.
    pub rotation_work: f64,
}

impl NormRow {
    pub const HEADER: [&'static str; 6] = ["t", "l2_u", "l2_omega", "linf_u", "linf_grad_u", "rotation_work"];

    pub fn values(&self) -> Vec<f64> {
        vec![self.t, self.l2_u, self.l2_omega, self.linf_u, self.linf_grad_u, self.rotation_work]
    }
}

/// Norm time series as CSV.
pub fn norms_csv(rows: &[NormRow]) -> String {
    let data: Vec<Vec<f64>> = rows.iter().map(NormRow::values).collect();
    crate::io::csv_string(&NormRow::HEADER, &data)
}

/// Stored snapshot.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: LimitState,
}

/// Norm series and snapshots of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<NormRow>,
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub max_divergence: f64,
}

impl Trajectory {
    pub fn last(&self) -> &LimitState {
        &self.snapshots.last().expect("trajectory holds at least the initial state").state
    }
}

/// Integrate the velocity form to `t_end` with uniform steps no larger than `dt`.
pub fn integrate(model: &LimitModel, state0: &LimitState, t_end: f64, dt: f64, stride: usize) -> Result<Trajectory> {
    if !(t_end >= 0.0 && dt > 0.0) {
        return Err(Error::Parameter(format!("need t_end >= 0 and dt > 0, got {t_end}, {dt}")));
    }
    let steps = ((t_end / dt).ceil() as usize).max(1);
    let h = t_end / steps as f64;
    let stride = stride.max(1);
    let mut st = state0.clone();
    let mut rows = vec![model.norms(&st)];
    let mut snaps = vec![Snapshot { state: st.clone() }];
    let mut max_div = 0.0_f64;
    for n in 1..=steps {
        st = model.step(&st, h)?;
        if n == steps {
            st.t = state0.t + t_end;
        }
        let div = model.spec.divergence(&st.u, &st.v);
        let rel = model.grid().l2(&div) / model.grid().l2_vec(&[&st.u, &st.v]).max(1e-300);
        max_div = max_div.max(rel);
        rows.push(model.norms(&st));
        if n % stride == 0 || n == steps {
            snaps.push(Snapshot { state: st.clone() });
        }
    }
    Ok(Trajectory { rows, snapshots: snaps, dt: h, max_divergence: max_div })
}

/// Integrate the vorticity form; returns the final vorticity and mean velocity.
pub fn integrate_vorticity(
    model: &LimitModel,
    state0: &LimitState,
    t_end: f64,
    dt: f64,
    form: VorticityForm,
) -> Result<(Vec<f64>, [f64; 2])> {
    let steps = ((t_end / dt).ceil() as usize).max(1);
    let h = t_end / steps as f64;
    let g = *model.grid();
    let mut w = model.spec.curl(&state0.u, &state0.v);
    let mut m = [g.mean(&state0.u), g.mean(&state0.v)];
    let rhs = |w: &[f64], m: [f64; 2]| -> Result<(Vec<f64>, [f64; 2])> {
        let dw = model.vorticity_rhs(w, m, form)?;
        let (u, v) = model.biot_savart(w, m)?;
        Ok((dw, model.mean_rhs(&u, &v)))
    };
    let add = |w: &[f64], m: [f64; 2], s: f64, k: &(Vec<f64>, [f64; 2])| -> (Vec<f64>, [f64; 2]) {
        (w.iter().zip(&k.0).map(|(a, b)| a + s * b).collect(), [m[0] + s * k.1[0], m[1] + s * k.1[1]])
    };
    for _ in 0..steps {
        let k1 = rhs(&w, m)?;
        let (w2, m2) = add(&w, m, 0.5 * h, &k1);
        let k2 = rhs(&w2, m2)?;
        let (w3, m3) = add(&w, m, 0.5 * h, &k2);
        let k3 = rhs(&w3, m3)?;
        let (w4, m4) = add(&w, m, h, &k3);
        let k4 = rhs(&w4, m4)?;
        for p in 0..w.len() {
            w[p] += h / 6.0 * (k1.0[p] + 2.0 * k2.0[p] + 2.0 * k3.0[p] + k4.0[p]);
        }
        for c in 0..2 {
            m[c] += h / 6.0 * (k1.1[c] + 2.0 * k2.1[c] + 2.0 * k3.1[c] + k4.1[c]);
        }
        let mean = g.mean(&w);
        w.iter_mut().for_each(|x| *x -= mean);
    }
    Ok((w, m))
}

/// Initial-data families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitPreset {
    TaylorGreen,
    Random { seed: u64 },
    Bump,
}

impl fmt::Display for InitPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitPreset::TaylorGreen => write!(f, "taylor-green"),
            InitPreset::Random { seed } => write!(f, "random(seed={seed})"),
            InitPreset::Bump => write!(f, "bump"),
        }
    }
}

/// Initial data request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub preset: InitPreset,
    /// Peak speed of the generated field.
    pub amplitude: f64,
    /// Rescale so that `|omega_0|_L2 = eps^sigma`.
    pub vorticity_scale: Option<f64>,
    /// Sobolev smoothness index, metadata only.
    pub smoothness: f64,
}

/// Facts about generated initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitReport {
    pub l2_omega: f64,
    pub linf_u: f64,
    pub divergence: f64,
}

/// Generate divergence-free, band-limited initial data.
pub fn initial_state(spec: &Spectral, data: &InitialData) -> Result<(LimitState, InitReport)> {
    let g = spec.grid;
    let (kx, ky) = (2.0 * PI / g.lx, 2.0 * PI / g.ly);
    let psi: Vec<f64> = match data.preset {
        InitPreset::TaylorGreen => g.sample(|x, y| -(kx * x).sin() * (ky * y).sin() / (kx * ky)),
        InitPreset::Bump => {
            let w = 0.15 * g.lx.min(g.ly);
            g.sample(|x, y| {
                let mut s = 0.0;
                // periodic images
                for a in -1..=1 {
                    for b in -1..=1 {
                        let dx = x - 0.5 * g.lx + a as f64 * g.lx;
                        let dy = y - 0.5 * g.ly + b as f64 * g.ly;
                        s += (-(dx * dx + dy * dy) / (w * w)).exp();
                    }
                }
                s
            })
        }
        InitPreset::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut modes = Vec::new();
            for m in -4i32..=4 {
                for n in -4i32..=4 {
                    let r2 = (m * m + n * n) as f64;
                    if r2 == 0.0 || r2 > 16.0 {
                        continue;
                    }
                    let a: f64 = rng.random_range(-1.0..1.0) * (-r2 / 8.0).exp() / r2;
                    let ph: f64 = rng.random_range(0.0..2.0 * PI);
                    modes.push((m as f64, n as f64, a, ph));
                }
            }
            g.sample(|x, y| modes.iter().map(|&(m, n, a, ph)| a * (m * kx * x + n * ky * y + ph).cos()).sum())
        }
    };
    let u0: Vec<f64> = spec.dy(&psi).iter().map(|v| -v).collect();
    let v0 = spec.dx(&psi);
    let (u0, v0) = spec.leray_filtered(&u0, &v0, true);
    let peak = u0.iter().zip(&v0).fold(0.0_f64, |m, (a, b)| m.max((a * a + b * b).sqrt()));
    if peak == 0.0 {
        return Err(Error::Parameter("initial data generator produced a zero field".into()));
    }
    let mut scale = data.amplitude / peak;
    if let Some(target) = data.vorticity_scale {
        let w = spec.curl(&u0, &v0);
        scale = target / g.l2(&w);
    }
    let u: Vec<f64> = u0.iter().map(|x| x * scale).collect();
    let v: Vec<f64> = v0.iter().map(|x| x * scale).collect();
    let omega = spec.curl(&u, &v);
    let div = spec.divergence(&u, &v);
    let st = LimitState { u, v, t: 0.0 };
    let report = InitReport {
        l2_omega: g.l2(&omega),
        linf_u: st.max_speed(),
        divergence: g.l2(&div) / g.l2_vec(&[&st.u, &st.v]),
    };
    Ok((st, report))
}

/// Least-squares exponential fit `norm ~ A exp(-rate t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub quantity: &'static str,
    pub rate: f64,
    pub log_intercept: f64,
    pub points: usize,
    /// Comparison bound for this quantity.
    pub bound: f64,
    pub bound_label: &'static str,
}

impl DecayFit {
    pub fn meets_bound(&self, tolerance: f64) -> bool {
        self.rate >= self.bound * tolerance
    }
}

/// Fitted decay rates of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub fits: Vec<DecayFit>,
    pub skipped: bool,
    pub nu: f64,
}

impl DecayReport {
    pub fn fit(&self, quantity: &str) -> Option<&DecayFit> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }
}

/// Ordinary least-squares line through `(x, y)`; returns (slope, intercept).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit decay rates after discarding the leading `discard` fraction of the horizon.
///
/// L2 rates are rates of squared norms; L-infinity rates are rates of the norms.
pub fn decay_diagnostics(rows: &[NormRow], nu: f64, discard: f64) -> Result<DecayReport> {
    if rows.len() < 10 {
        return Err(Error::Insufficient(format!("{} snapshots, need at least 10", rows.len())));
    }
    let t0 = rows[0].t;
    let t1 = rows[rows.len() - 1].t;
    let cut = t0 + discard * (t1 - t0);
    let used: Vec<&NormRow> = rows.iter().filter(|r| r.t >= cut).collect();
    let floor = 1e-14;
    let skipped = used.len() < 3
        || used.iter().any(|r| r.l2_u <= floor || r.l2_omega <= floor || r.linf_u <= floor || r.linf_grad_u <= floor);
    if skipped {
        return Ok(DecayReport { fits: Vec::new(), skipped: true, nu });
    }
    let t: Vec<f64> = used.iter().map(|r| r.t).collect();
    let bound = (2.0 * nu).sqrt() / 8.0;
    let grad = (nu / 2.0).sqrt();
    let specs: [(&'static str, fn(&NormRow) -> f64, f64, &'static str); 4] = [
        ("l2_u_sq", |r| 2.0 * r.l2_u.ln(), bound, "sqrt(2 nu)/8"),
        ("l2_omega_sq", |r| 2.0 * r.l2_omega.ln(), bound, "sqrt(2 nu)/8"),
        ("linf_u", |r| r.linf_u.ln(), bound, "sqrt(2 nu)/8"),
        ("linf_grad_u", |r| r.linf_grad_u.ln(), grad, "sqrt(nu/2)"),
    ];
    let fits = specs
        .iter()
        .map(|(name, f, bound, label)| {
            let y: Vec<f64> = used.iter().map(|r| f(r)).collect();
            let (slope, icpt) = linear_fit(&t, &y);
            DecayFit { quantity: name, rate: -slope, log_intercept: icpt, points: t.len(), bound: *bound, bound_label: label }
        })
        .collect();
    Ok(DecayReport { fits, skipped: false, nu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{derive_geometry, Preset, SurfaceField};

    fn model(preset: Preset, n: usize, nu: f64) -> LimitModel {
        let grid = Grid::new(n, n, 2.0 * PI, 2.0 * PI).unwrap();
        let s = SurfaceField::from_preset(preset, grid).unwrap();
        LimitModel::new(&derive_geometry(&s, 1e-2, nu).unwrap(), nu)
    }

    fn tg(m: &LimitModel) -> LimitState {
        let data = InitialData { preset: InitPreset::TaylorGreen, amplitude: 1.0, vorticity_scale: None, smoothness: 2.0 };
        initial_state(&m.spec, &data).unwrap().0
    }

    #[test]
    fn zero_state_has_zero_tendency() {
        let m = model(Preset::Eggcarton { amp: 0.02, kx: 1.0, ky: 1.0 }, 16, 0.1);
        let z = LimitState::zero(m.grid());
        let (a, b) = m.limit_rhs(&z).unwrap();
        assert!(a.iter().chain(&b).all(|x| *x == 0.0));
        let s = m.step(&z, 10.0).unwrap();
        assert!(s.u.iter().chain(&s.v).all(|x| *x == 0.0));
    }

    #[test]
    fn taylor_green_vorticity() {
        let m = model(Preset::Flat { c: 0.0 }, 16, 0.1);
        let st = tg(&m);
        let w = vorticity(&m.spec, &st.u, &st.v);
        let g = m.grid();
        for i in 0..g.nx {
            for j in 0..g.ny {
                let n = g.index(i, j);
                assert!((st.u[n] - g.x(i).sin() * g.y(j).cos()).abs() < 1e-12);
                assert!((w[n] - 2.0 * g.x(i).sin() * g.y(j).sin()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_taylor_green_energy_rate() {
        let m = model(Preset::Flat { c: 0.0 }, 16, 0.1);
        let st = tg(&m);
        let (du, dv) = m.limit_rhs(&st).unwrap();
        let g = m.grid();
        let rate = (g.dot(&st.u, &du) + g.dot(&st.v, &dv)) / (g.dot(&st.u, &st.u) + g.dot(&st.v, &st.v));
        assert!((rate + (0.05_f64).sqrt()).abs() < 1e-12, "{rate}");
    }

    #[test]
    fn nonzero_mean_vorticity_rejected() {
        let m = model(Preset::Flat { c: 0.0 }, 8, 0.1);
        let w = vec![1.0; 64];
        assert!(matches!(velocity_from_vorticity(&m.spec, &w), Err(Error::NonzeroMean(_))));
    }

    #[test]
    fn cfl_violation_names_step() {
        let m = model(Preset::Flat { c: 0.0 }, 16, 0.1);
        let st = tg(&m);
        match m.step(&st, 10.0) {
            Err(Error::Cfl { required, .. }) => assert!(required < 10.0),
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let (s, c) = linear_fit(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
    }
}
