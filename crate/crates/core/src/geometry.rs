//! Boundary surface, differential geometry and admissibility.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::spectral::{Grid, Spectral};

/// Analytic surface families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Flat { c: f64 },
    /// `B = a x`; not periodic, pointwise oracle only.
    Tilt { a: f64 },
    /// `B = c (x^2 + y^2) / 2`; not periodic, pointwise oracle only.
    Paraboloid { c: f64 },
    /// Gaussian bump centred in the box.
    Bump { amp: f64, width: f64 },
    /// `B = amp sin(2 pi kx x / Lx) sin(2 pi ky y / Ly)`.
    Eggcarton { amp: f64, kx: f64, ky: f64 },
}

/// Value, gradient and Hessian of `B` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub b: f64,
    pub bx: f64,
    pub by: f64,
    pub bxx: f64,
    pub bxy: f64,
    pub byy: f64,
}

impl Preset {
    /// Parse `name(key=value, ...)`, e.g. `eggcarton(amp=0.02, kx=1, ky=1)`.
    pub fn parse(spec: &str) -> Result<Preset> {
        let spec = spec.trim();
        let (name, args) = match spec.find('(') {
            Some(p) => {
                let inner = spec[p + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Parameter(format!("missing `)` in surface `{spec}`")))?;
                (&spec[..p], inner)
            }
            None => (spec, ""),
        };
        let mut kv = Vec::new();
        for part in args.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("expected key=value in `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("`{}` is not a number in `{part}`", v.trim())))?;
            kv.push((k.trim().to_string(), v));
        }
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            kv.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| Error::Parameter(format!("surface `{name}` needs `{key}`")))
        };
        let allowed: &[&str] = match name.trim() {
            "flat" => &["c"],
            "tilt" => &["a"],
            "paraboloid" => &["c"],
            "bump" => &["amp", "width"],
            "eggcarton" => &["amp", "kx", "ky"],
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        if let Some((k, _)) = kv.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            return Err(Error::Parameter(format!("surface `{name}` has no parameter `{k}`")));
        }
        Ok(match name.trim() {
            "flat" => Preset::Flat { c: get("c", Some(0.0))? },
            "tilt" => Preset::Tilt { a: get("a", None)? },
            "paraboloid" => Preset::Paraboloid { c: get("c", Some(1.0))? },
            "bump" => Preset::Bump { amp: get("amp", None)?, width: get("width", Some(0.5))? },
            _ => Preset::Eggcarton {
                amp: get("amp", None)?,
                kx: get("kx", Some(1.0))?,
                ky: get("ky", Some(1.0))?,
            },
        })
    }

    /// True for presets that are periodic on any box.
    pub fn is_periodic(&self) -> bool {
        !matches!(self, Preset::Tilt { .. } | Preset::Paraboloid { .. })
    }

    /// Exact jet at `(x, y)` on a box of size `lx x ly`.
    pub fn jet(&self, x: f64, y: f64, lx: f64, ly: f64) -> Jet {
        match *self {
            Preset::Flat { c } => Jet { b: c, ..Jet::default() },
            Preset::Tilt { a } => Jet { b: a * x, bx: a, ..Jet::default() },
            Preset::Paraboloid { c } => Jet {
                b: 0.5 * c * (x * x + y * y),
                bx: c * x,
                by: c * y,
                bxx: c,
                bxy: 0.0,
                byy: c,
            },
            Preset::Bump { amp, width } => {
                let (dx, dy) = (x - 0.5 * lx, y - 0.5 * ly);
                let w2 = width * width;
                let g = amp * (-(dx * dx + dy * dy) / w2).exp();
                let (gx, gy) = (-2.0 * dx / w2, -2.0 * dy / w2);
                Jet {
                    b: g,
                    bx: g * gx,
                    by: g * gy,
                    bxx: g * (gx * gx - 2.0 / w2),
                    bxy: g * gx * gy,
                    byy: g * (gy * gy - 2.0 / w2),
                }
            }
            Preset::Eggcarton { amp, kx, ky } => {
                let (ax, ay) = (2.0 * PI * kx / lx, 2.0 * PI * ky / ly);
                let (sx, cx) = (ax * x).sin_cos();
                let (sy, cy) = (ay * y).sin_cos();
                Jet {
                    b: amp * sx * sy,
                    bx: amp * ax * cx * sy,
                    by: amp * ay * sx * cy,
                    bxx: -amp * ax * ax * sx * sy,
                    bxy: amp * ax * ay * cx * cy,
                    byy: -amp * ay * ay * sx * sy,
                }
            }
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Flat { c } => write!(f, "flat(c={c})"),
            Preset::Tilt { a } => write!(f, "tilt(a={a})"),
            Preset::Paraboloid { c } => write!(f, "paraboloid(c={c})"),
            Preset::Bump { amp, width } => write!(f, "bump(amp={amp},width={width})"),
            Preset::Eggcarton { amp, kx, ky } => write!(f, "eggcarton(amp={amp},kx={kx},ky={ky})"),
        }
    }
}

/// Where the samples of a surface came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Preset(Preset),
    File(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Preset(p) => write!(f, "{p}"),
            Provenance::File(path) => write!(f, "file:{path}"),
        }
    }
}

/// Sampled boundary surface `B(x, y)` on a periodic grid.
#[derive(Debug, Clone)]
pub struct SurfaceField {
    pub grid: Grid,
    pub samples: Vec<f64>,
    pub provenance: Provenance,
}

/// Reject samples whose opposite edges do not join smoothly.
fn check_periodic(grid: &Grid, b: &[f64]) -> Result<()> {
    let (nx, ny) = (grid.nx, grid.ny);
    let at = |i: usize, j: usize| b[i * ny + j];
    let mut inc = 0.0_f64;
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            inc = inc.max((at(i + 1, j) - at(i, j)).abs()).max((at(i, j + 1) - at(i, j)).abs());
        }
    }
    let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 4.0 * inc + 1e-12 * (1.0 + scale);
    for j in 0..ny {
        let jump = (at(0, j) - at(nx - 1, j)).abs();
        if jump > tol {
            return Err(Error::NotPeriodic(format!(
                "x-edges differ by {jump:.3e} at row j = {j} (largest interior step {inc:.3e})"
            )));
        }
    }
    for i in 0..nx {
        let jump = (at(i, 0) - at(i, ny - 1)).abs();
        if jump > tol {
            return Err(Error::NotPeriodic(format!(
                "y-edges differ by {jump:.3e} at column i = {i} (largest interior step {inc:.3e})"
            )));
        }
    }
    Ok(())
}

impl SurfaceField {
    /// Sample an analytic preset on the grid.
    pub fn from_preset(preset: Preset, grid: Grid) -> Result<Self> {
        let samples = grid.sample(|x, y| preset.jet(x, y, grid.lx, grid.ly).b);
        check_periodic(&grid, &samples)?;
        Ok(SurfaceField { grid, samples, provenance: Provenance::Preset(preset) })
    }

    /// Wrap externally sampled data.
    pub fn from_samples(grid: Grid, samples: Vec<f64>, origin: &str) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Mismatch(format!("{} samples for a {}x{} grid", samples.len(), grid.nx, grid.ny)));
        }
        if let Some(n) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("surface sample {n}")));
        }
        check_periodic(&grid, &samples)?;
        Ok(SurfaceField { grid, samples, provenance: Provenance::File(origin.to_string()) })
    }

    pub fn preset(&self) -> Option<Preset> {
        match &self.provenance {
            Provenance::Preset(p) => Some(*p),
            Provenance::File(_) => None,
        }
    }

    /// Same surface with its height multiplied by `f`.
    pub fn scaled(&self, f: f64) -> SurfaceField {
        let provenance = match &self.provenance {
            Provenance::Preset(Preset::Eggcarton { amp, kx, ky }) => {
                Provenance::Preset(Preset::Eggcarton { amp: amp * f, kx: *kx, ky: *ky })
            }
            Provenance::Preset(Preset::Bump { amp, width }) => Provenance::Preset(Preset::Bump { amp: amp * f, width: *width }),
            Provenance::Preset(Preset::Flat { c }) => Provenance::Preset(Preset::Flat { c: c * f }),
            Provenance::Preset(p) => Provenance::File(format!("{p} scaled by {f}")),
            other => other.clone(),
        };
        SurfaceField { grid: self.grid, samples: self.samples.iter().map(|b| b * f).collect(), provenance }
    }

    /// Same surface shifted by a constant.
    pub fn shifted(&self, c: f64) -> SurfaceField {
        SurfaceField {
            grid: self.grid,
            samples: self.samples.iter().map(|b| b + c).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Build a surface from a preset or a sampled file.
pub fn build_surface(source: &str, grid: Grid) -> Result<SurfaceField> {
    if let Some(path) = source.strip_prefix("file:") {
        let s = crate::io::read_surface(std::path::Path::new(path))?;
        if s.grid.nx != grid.nx || s.grid.ny != grid.ny {
            return Err(Error::Mismatch(format!(
                "surface file is {}x{}, configuration asks for {}x{}",
                s.grid.nx, s.grid.ny, grid.nx, grid.ny
            )));
        }
        return Ok(s);
    }
    let preset = Preset::parse(source)?;
    SurfaceField::from_preset(preset, grid)
}

/// Every geometric quantity at a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub jet: Jet,
    pub cos_alpha: f64,
    pub cos_beta: f64,
    pub cos_gamma: f64,
    /// `H0 = I + grad B (x) grad B` as `[h11, h12, h22]`.
    pub h0: [f64; 3],
    pub det_h0: f64,
    pub kg: f64,
    pub ka: f64,
    pub lap_b: f64,
}

impl PointGeometry {
    pub fn from_jet(jet: Jet) -> Self {
        let Jet { bx, by, bxx, bxy, byy, .. } = jet;
        let s = (1.0 + bx * bx + by * by).sqrt();
        let det_h0 = 1.0 + bx * bx + by * by;
        let det_h = bxx * byy - bxy * bxy;
        PointGeometry {
            jet,
            cos_alpha: -bx / s,
            cos_beta: -by / s,
            cos_gamma: 1.0 / s,
            h0: [1.0 + bx * bx, bx * by, 1.0 + by * by],
            det_h0,
            kg: det_h / (det_h0 * det_h0),
            ka: 0.5 * det_h0.powf(-1.5) * (byy * (1.0 + bx * bx) - 2.0 * bxy * bx * by + bxx * (1.0 + by * by)),
            lap_b: bxx + byy,
        }
    }

    pub fn slope_sq(&self) -> f64 {
        self.jet.bx * self.jet.bx + self.jet.by * self.jet.by
    }

    /// Layer thickness along the normal, `sqrt(nu) eps cos^(-1/2) gamma`.
    pub fn delta_normal(&self, eps: f64, nu: f64) -> f64 {
        nu.sqrt() * eps / self.cos_gamma.sqrt()
    }

    /// Layer thickness along `z`, `sqrt(nu) eps cos^(-3/2) gamma`.
    pub fn delta(&self, eps: f64, nu: f64) -> f64 {
        nu.sqrt() * eps * self.cos_gamma.powf(-1.5)
    }

    /// Eigenvalues of `H0`, ascending.
    pub fn h0_eigenvalues(&self) -> [f64; 2] {
        sym_eigenvalues(self.h0)
    }

    /// Eigenvalues of `E1 H` as complex pairs `(re, im)`.
    pub fn e1h_eigenvalues(&self) -> [(f64, f64); 2] {
        let Jet { bxx, bxy, byy, .. } = self.jet;
        // E1 H = [[bxy, byy], [-bxx, -bxy]]: trace 0, det = det H.
        let det = bxx * byy - bxy * bxy;
        if det <= 0.0 {
            let r = (-det).sqrt();
            [(r, 0.0), (-r, 0.0)]
        } else {
            let r = det.sqrt();
            [(0.0, r), (0.0, -r)]
        }
    }

    /// Rotation taking the unit normal to `(0, 0, 1)`.
    pub fn local_frame(&self) -> [[f64; 3]; 3] {
        let (ca, cb, cg) = (self.cos_alpha, self.cos_beta, self.cos_gamma);
        let rho = (ca * ca + cg * cg).sqrt();
        let (cth, sth) = (cg / rho, -ca / rho);
        let (cph, sph) = (rho, -cb);
        [
            [cth, 0.0, sth],
            [-sth * sph, cph, cth * sph],
            [-sth * cph, -sph, cth * cph],
        ]
    }

    pub fn normal(&self) -> [f64; 3] {
        [self.cos_alpha, self.cos_beta, self.cos_gamma]
    }
}

/// Eigenvalues of a symmetric 2x2 matrix `[a11, a12, a22]`, ascending.
pub fn sym_eigenvalues(m: [f64; 3]) -> [f64; 2] {
    let [a, b, c] = m;
    let mean = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    [mean - r, mean + r]
}

/// How surface derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Spectral,
    /// Closed-form derivatives of the analytic preset.
    Analytic,
}

/// Per-grid-point geometry of a surface for given `eps` and `nu`.
#[derive(Debug, Clone)]
pub struct GeometryBundle {
    pub grid: Grid,
    pub eps: f64,
    pub nu: f64,
    pub flat: bool,
    pub b: Vec<f64>,
    pub bx: Vec<f64>,
    pub by: Vec<f64>,
    pub bxx: Vec<f64>,
    pub bxy: Vec<f64>,
    pub byy: Vec<f64>,
    pub lap_b: Vec<f64>,
    pub cos_alpha: Vec<f64>,
    pub cos_beta: Vec<f64>,
    pub cos_gamma: Vec<f64>,
    pub h0: Vec<[f64; 3]>,
    pub kg: Vec<f64>,
    pub ka: Vec<f64>,
    pub delta: Vec<f64>,
    /// `grad delta / delta = (3/2) cos^2 gamma H grad B`.
    pub kappa_x: Vec<f64>,
    pub kappa_y: Vec<f64>,
    pub div_kappa: Vec<f64>,
}

impl GeometryBundle {
    pub fn point(&self, n: usize) -> PointGeometry {
        PointGeometry::from_jet(self.jet(n))
    }

    pub fn jet(&self, n: usize) -> Jet {
        Jet {
            b: self.b[n],
            bx: self.bx[n],
            by: self.by[n],
            bxx: self.bxx[n],
            bxy: self.bxy[n],
            byy: self.byy[n],
        }
    }

    /// Rotation `R0` at grid point `(i, j)`.
    pub fn local_frame(&self, i: usize, j: usize) -> Result<[[f64; 3]; 3]> {
        if i >= self.grid.nx || j >= self.grid.ny {
            return Err(Error::Parameter(format!("point ({i}, {j}) outside the grid")));
        }
        Ok(self.point(self.grid.index(i, j)).local_frame())
    }

    pub fn sup_slope(&self) -> f64 {
        self.bx.iter().zip(&self.by).fold(0.0_f64, |m, (a, b)| m.max((a * a + b * b).sqrt()))
    }

    pub fn min_delta(&self) -> f64 {
        self.delta.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_delta(&self) -> f64 {
        self.delta.iter().cloned().fold(0.0, f64::max)
    }
}

/// Compute the geometry bundle of a surface.
pub fn derive_geometry(surface: &SurfaceField, eps: f64, nu: f64) -> Result<GeometryBundle> {
    derive_geometry_with(surface, eps, nu, DerivativeMode::Spectral)
}

pub fn derive_geometry_with(surface: &SurfaceField, eps: f64, nu: f64, mode: DerivativeMode) -> Result<GeometryBundle> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Parameter(format!("nu must be positive, got {nu}")));
    }
    let grid = surface.grid;
    let spec = Spectral::new(grid);
    let b = surface.samples.clone();
    let flat = b.iter().all(|v| *v == b[0]);
    let n = grid.len();
    let (bx, by, bxx, bxy, byy) = if flat {
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n])
    } else {
        match (mode, surface.preset()) {
            (DerivativeMode::Analytic, Some(p)) => {
                let jets: Vec<Jet> = (0..n)
                    .map(|k| p.jet(grid.x(k / grid.ny), grid.y(k % grid.ny), grid.lx, grid.ly))
                    .collect();
                (
                    jets.iter().map(|j| j.bx).collect(),
                    jets.iter().map(|j| j.by).collect(),
                    jets.iter().map(|j| j.bxx).collect(),
                    jets.iter().map(|j| j.bxy).collect(),
                    jets.iter().map(|j| j.byy).collect(),
                )
            }
            (DerivativeMode::Analytic, None) => {
                return Err(Error::Parameter("analytic derivatives need an analytic preset".into()))
            }
            (DerivativeMode::Spectral, _) => (spec.dx(&b), spec.dy(&b), spec.dxx(&b), spec.dxy(&b), spec.dyy(&b)),
        }
    };
    let mut g = GeometryBundle {
        grid,
        eps,
        nu,
        flat,
        lap_b: vec![0.0; n],
        cos_alpha: vec![0.0; n],
        cos_beta: vec![0.0; n],
        cos_gamma: vec![0.0; n],
        h0: vec![[0.0; 3]; n],
        kg: vec![0.0; n],
        ka: vec![0.0; n],
        delta: vec![0.0; n],
        kappa_x: vec![0.0; n],
        kappa_y: vec![0.0; n],
        div_kappa: vec![0.0; n],
        b,
        bx,
        by,
        bxx,
        bxy,
        byy,
    };
    for k in 0..n {
        let p = g.point(k);
        g.lap_b[k] = p.lap_b;
        g.cos_alpha[k] = p.cos_alpha;
        g.cos_beta[k] = p.cos_beta;
        g.cos_gamma[k] = p.cos_gamma;
        g.h0[k] = p.h0;
        g.kg[k] = p.kg;
        g.ka[k] = p.ka;
        g.delta[k] = p.delta(eps, nu);
        let c2 = 1.5 * p.cos_gamma * p.cos_gamma;
        g.kappa_x[k] = c2 * (g.bxx[k] * g.bx[k] + g.bxy[k] * g.by[k]);
        g.kappa_y[k] = c2 * (g.bxy[k] * g.bx[k] + g.byy[k] * g.by[k]);
    }
    if !flat {
        let dkx = spec.dx(&g.kappa_x);
        let dky = spec.dy(&g.kappa_y);
        g.div_kappa = dkx.iter().zip(&dky).map(|(a, b)| a + b).collect();
    }
    Ok(g)
}

/// Which set of smallness conditions is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmissibilityMode {
    Curved,
    NearFlat,
}

impl fmt::Display for AdmissibilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdmissibilityMode::Curved => write!(f, "curved"),
            AdmissibilityMode::NearFlat => write!(f, "near-flat"),
        }
    }
}

/// One supremum condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Grid index `(i, j)` and coordinates of the worst point.
    pub at: (usize, usize),
    pub xy: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub mode: AdmissibilityMode,
    pub conditions: Vec<Condition>,
    pub pass: bool,
}

impl AdmissibilityReport {
    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn offending(&self) -> Vec<&Condition> {
        self.conditions.iter().filter(|c| !c.pass).collect()
    }
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "admissibility ({}): {}", self.mode, if self.pass { "PASS" } else { "FAIL" })?;
        for c in &self.conditions {
            writeln!(
                f,
                "  {:<10} worst {:.6e} threshold {:.6e} {} at (i={}, j={}) = ({:.4}, {:.4})",
                c.name,
                c.worst,
                c.threshold,
                if c.pass { "ok" } else { "VIOLATED" },
                c.at.0,
                c.at.1,
                c.xy.0,
                c.xy.1
            )?;
        }
        Ok(())
    }
}

fn worst_of(g: &GeometryBundle, f: impl Fn(usize) -> f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..g.grid.len() {
        let v = f(k);
        if v > best.0 || v.is_nan() {
            best = (v, k);
        }
    }
    best
}

/// Check the surface hypotheses; `margin` shrinks every threshold by that fraction.
pub fn check_admissibility(
    g: &GeometryBundle,
    mode: AdmissibilityMode,
    sigma: f64,
    eps: f64,
    margin: f64,
) -> AdmissibilityReport {
    let mut specs: Vec<(&'static str, f64, Box<dyn Fn(usize) -> f64 + '_>)> = vec![
        ("height", 0.25, Box::new(|k| g.b[k].abs())),
        (
            "slope",
            0.125,
            Box::new(|k| {
                let (ca, cb, cg) = (g.cos_alpha[k], g.cos_beta[k], g.cos_gamma[k]);
                (ca * ca + cb * cb) / (cg * cg)
            }),
        ),
    ];
    match mode {
        AdmissibilityMode::Curved => {
            specs.push(("curvature", 8.0 / 27.0, Box::new(|k| 2.0 * g.ka[k].abs() + g.kg[k].abs().sqrt())))
        }
        AdmissibilityMode::NearFlat => specs.push((
            "smallness",
            eps.powf(sigma),
            Box::new(|k| g.ka[k].abs() + g.kg[k].abs().sqrt() + (g.bx[k].powi(2) + g.by[k].powi(2)).sqrt()),
        )),
    }
    let conditions: Vec<Condition> = specs
        .into_iter()
        .map(|(name, thr, f)| {
            let (worst, k) = worst_of(g, f);
            let threshold = thr * (1.0 - margin);
            let (i, j) = (k / g.grid.ny, k % g.grid.ny);
            Condition {
                name,
                worst,
                threshold,
                pass: worst < threshold,
                at: (i, j),
                xy: (g.grid.x(i), g.grid.y(j)),
            }
        })
        .collect();
    let pass = conditions.iter().all(|c| c.pass);
    AdmissibilityReport { mode, conditions, pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(n, n, 2.0 * PI, 2.0 * PI).unwrap()
    }

    #[test]
    fn parses_presets() {
        assert_eq!(
            Preset::parse("eggcarton(amp=0.05, kx=1, ky=2)").unwrap(),
            Preset::Eggcarton { amp: 0.05, kx: 1.0, ky: 2.0 }
        );
        assert_eq!(Preset::parse("flat").unwrap(), Preset::Flat { c: 0.0 });
        assert!(matches!(Preset::parse("volcano(amp=1)"), Err(Error::UnknownPreset(_))));
        assert!(Preset::parse("eggcarton(amp=0.1, q=2)").is_err());
    }

    #[test]
    fn tilt_is_rejected_on_periodic_grid() {
        let e = SurfaceField::from_preset(Preset::Tilt { a: 0.2 }, grid(16)).unwrap_err();
        assert!(matches!(e, Error::NotPeriodic(_)));
    }

    #[test]
    fn flat_geometry() {
        let s = SurfaceField::from_preset(Preset::Flat { c: 0.1 }, grid(16)).unwrap();
        let g = derive_geometry(&s, 1e-2, 0.1).unwrap();
        assert!(g.flat);
        for k in 0..g.grid.len() {
            assert_eq!(g.cos_gamma[k], 1.0);
            assert_eq!(g.kg[k], 0.0);
            assert_eq!(g.ka[k], 0.0);
            assert!((g.delta[k] - 0.1_f64.sqrt() * 1e-2).abs() < 1e-18);
        }
    }

    #[test]
    fn frame_maps_normal_to_vertical() {
        let p = PointGeometry::from_jet(Jet { bx: 0.3, by: -0.7, ..Jet::default() });
        let r = p.local_frame();
        let n = p.normal();
        let rn: Vec<f64> = (0..3).map(|a| (0..3).map(|b| r[a][b] * n[b]).sum()).collect();
        assert!(rn[0].abs() < 1e-14 && rn[1].abs() < 1e-14 && (rn[2] - 1.0).abs() < 1e-14);
    }
}
