//! Scenario configuration in a `key = value` text format.
//!
//! One assignment per line; `#` starts a comment. Numbers accept a `pi`
//! suffix (`2pi`, `pi`). `eps` takes a single value or a comma-separated list;
//! a list switches residual sweeps on. Later assignments override earlier ones.
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `surface` | `flat` | preset such as `eggcarton(amp=0.02)` or `file:<path>` |
//! | `nx`, `ny` | 64 | horizontal grid, powers of two >= 8 |
//! | `nzeta` | 128 | vertical nodes, multiple of 32 |
//! | `lx`, `ly` | `2pi` | box size |
//! | `nu` | 0.1 | viscosity |
//! | `eps` | `1e-3` | Rossby number or list |
//! | `sigma` | 0.5 | exponent of the smallness conditions |
//! | `admissibility` | `curved` | `curved` (curvature bound) or `near-flat` (eps^sigma smallness) |
//! | `margin` | 0 | relative safety margin on thresholds |
//! | `enforce_admissibility` | `true` | refuse inadmissible surfaces |
//! | `init` | `taylor-green` | `taylor-green`, `random` or `bump` |
//! | `amplitude` | 1 | initial amplitude |
//! | `seed` | 0 | seed of the random preset |
//! | `vorticity_scale` | unset | rescale `||omega_0||_L2` to this value |
//! | `smoothness` | 2 | spectral decay exponent of the random preset |
//! | `t_end` | 5 | final time |
//! | `dt` | 0.01 | time step |
//! | `stride` | 10 | steps between recorded rows and snapshots |
//! | `sweep_scaling` | `fixed` | `fixed`, `well-prepared` or `near-flat` |
//! | `kernel` | `exact` | order-1 layer kernel, `exact` or `printed` |
//! | `p2` | `integrated` | order-2 pressure variant |
//! | `cutoff_order` | 3 | smoothness of the cutoff |
//! | `tail_tol` | `1e-8` | layer tail tolerance |
//! | `leak_tol` | `1e-10` | tolerance on the blending leak |
//! | `decay_discard` | `0.3333333333333333` | transient fraction dropped by decay fits |
//! | `grad_tolerance` | 0.9 | factor on the gradient decay bound |
//! | `slope_target` | 0.5 | expected deviation slope |
//! | `slope_tolerance` | 0.1 | allowed distance from the target |
//! | `residual_slope_min` | 0.4 | minimal residual slope |
//! | `divergence_tol` | `1e-6` | relative divergence tolerance |
//! | `boundary_tol` | `1e-6` | relative wall value tolerance |
//! | `profile_point` | `0,0` | grid point `i,j` of profile dumps |
//! | `out` | `out` | output directory |

use std::fmt::Write as _;
use std::str::FromStr;

use crate::assembler::AssemblyOptions;
use crate::error::{Error, Result};
use crate::geometry::{AdmissibilityMode, Preset};
use crate::limit2d::{InitPreset, InitialData};
use crate::profiles::{Order1Kernel, P2Variant, ProfileOptions};
use crate::verify::SweepScaling;

/// Named initial-data presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    TaylorGreen,
    Random,
    Bump,
}

/// Named sweep scalings; parameters come from `sigma` and the first `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingKind {
    Fixed,
    WellPrepared,
    NearFlat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub surface: String,
    pub nx: usize,
    pub ny: usize,
    pub nzeta: usize,
    pub lx: f64,
    pub ly: f64,
    pub nu: f64,
    pub eps: Vec<f64>,
    pub sigma: f64,
    pub admissibility: AdmissibilityMode,
    pub margin: f64,
    pub enforce_admissibility: bool,
    pub init: InitKind,
    pub amplitude: f64,
    pub seed: u64,
    pub vorticity_scale: Option<f64>,
    pub smoothness: f64,
    pub t_end: f64,
    pub dt: f64,
    pub stride: usize,
    pub sweep_scaling: ScalingKind,
    pub kernel: Order1Kernel,
    pub p2: P2Variant,
    pub cutoff_order: usize,
    pub tail_tol: f64,
    pub leak_tol: f64,
    pub decay_discard: f64,
    pub grad_tolerance: f64,
    pub slope_target: f64,
    pub slope_tolerance: f64,
    pub residual_slope_min: f64,
    pub divergence_tol: f64,
    pub boundary_tol: f64,
    pub profile_point: (usize, usize),
    pub out: String,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        ScenarioConfig {
            surface: "flat".into(),
            nx: 64,
            ny: 64,
            nzeta: 128,
            lx: tau,
            ly: tau,
            nu: 0.1,
            eps: vec![1e-3],
            sigma: 0.5,
            admissibility: AdmissibilityMode::Curved,
            margin: 0.0,
            enforce_admissibility: true,
            init: InitKind::TaylorGreen,
            amplitude: 1.0,
            seed: 0,
            vorticity_scale: None,
            smoothness: 2.0,
            t_end: 5.0,
            dt: 0.01,
            stride: 10,
            sweep_scaling: ScalingKind::Fixed,
            kernel: Order1Kernel::Exact,
            p2: P2Variant::Integrated,
            cutoff_order: 3,
            tail_tol: 1e-8,
            leak_tol: 1e-10,
            decay_discard: 1.0 / 3.0,
            grad_tolerance: 0.9,
            slope_target: 0.5,
            slope_tolerance: 0.1,
            residual_slope_min: 0.4,
            divergence_tol: 1e-6,
            boundary_tol: 1e-6,
            profile_point: (0, 0),
            out: "out".into(),
        }
    }
}

const KEYS: [&str; 36] = [
    "surface",
    "nx",
    "ny",
    "nzeta",
    "lx",
    "ly",
    "nu",
    "eps",
    "sigma",
    "admissibility",
    "margin",
    "enforce_admissibility",
    "init",
    "amplitude",
    "seed",
    "vorticity_scale",
    "smoothness",
    "t_end",
    "dt",
    "stride",
    "sweep_scaling",
    "kernel",
    "p2",
    "cutoff_order",
    "tail_tol",
    "leak_tol",
    "decay_discard",
    "grad_tolerance",
    "slope_target",
    "slope_tolerance",
    "residual_slope_min",
    "divergence_tol",
    "boundary_tol",
    "profile_point",
    "out",
    "n",
];

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    let v = v.trim();
    let x = if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let m = if head.is_empty() { 1.0 } else { head.parse::<f64>().map_err(|_| format!("`{v}` is not a number"))? };
        m * std::f64::consts::PI
    } else {
        v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"))?
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.trim().parse::<usize>().map_err(|_| format!("`{}` is not a non-negative integer", v.trim()))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(format!("`{o}` is not a boolean")),
    }
}

impl FromStr for InitKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "taylor-green" => Ok(InitKind::TaylorGreen),
            "random" => Ok(InitKind::Random),
            "bump" => Ok(InitKind::Bump),
            o => Err(format!("unknown initial data `{o}` (taylor-green, random, bump)")),
        }
    }
}

impl FromStr for ScalingKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "fixed" => Ok(ScalingKind::Fixed),
            "well-prepared" => Ok(ScalingKind::WellPrepared),
            "near-flat" => Ok(ScalingKind::NearFlat),
            o => Err(format!("unknown sweep scaling `{o}` (fixed, well-prepared, near-flat)")),
        }
    }
}

fn parse_mode(s: &str) -> std::result::Result<AdmissibilityMode, String> {
    match s.trim() {
        "curved" => Ok(AdmissibilityMode::Curved),
        "near-flat" => Ok(AdmissibilityMode::NearFlat),
        o => Err(format!("unknown admissibility mode `{o}` (curved, near-flat)")),
    }
}

fn name_init(k: InitKind) -> &'static str {
    match k {
        InitKind::TaylorGreen => "taylor-green",
        InitKind::Random => "random",
        InitKind::Bump => "bump",
    }
}

fn name_scaling(k: ScalingKind) -> &'static str {
    match k {
        ScalingKind::Fixed => "fixed",
        ScalingKind::WellPrepared => "well-prepared",
        ScalingKind::NearFlat => "near-flat",
    }
}

impl ScenarioConfig {
    /// Assign one key; `n` sets both `nx` and `ny`.
    fn assign(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "surface" => {
                let v = value.trim();
                if !v.starts_with("file:") {
                    Preset::parse(v).map_err(|e| e.to_string())?;
                }
                self.surface = v.to_string();
            }
            "nx" => self.nx = parse_usize(value)?,
            "ny" => self.ny = parse_usize(value)?,
            "n" => {
                self.nx = parse_usize(value)?;
                self.ny = self.nx;
            }
            "nzeta" => self.nzeta = parse_usize(value)?,
            "lx" => self.lx = parse_f64(value)?,
            "ly" => self.ly = parse_f64(value)?,
            "nu" => self.nu = parse_f64(value)?,
            "eps" => {
                self.eps = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_f64)
                    .collect::<std::result::Result<_, _>>()?;
            }
            "sigma" => self.sigma = parse_f64(value)?,
            "admissibility" => self.admissibility = parse_mode(value)?,
            "margin" => self.margin = parse_f64(value)?,
            "enforce_admissibility" => self.enforce_admissibility = parse_bool(value)?,
            "init" => self.init = value.parse()?,
            "amplitude" => self.amplitude = parse_f64(value)?,
            "seed" => self.seed = value.trim().parse().map_err(|_| format!("`{}` is not a seed", value.trim()))?,
            "vorticity_scale" => {
                self.vorticity_scale = match value.trim() {
                    "" | "none" => None,
                    v => Some(parse_f64(v)?),
                }
            }
            "smoothness" => self.smoothness = parse_f64(value)?,
            "t_end" => self.t_end = parse_f64(value)?,
            "dt" => self.dt = parse_f64(value)?,
            "stride" => self.stride = parse_usize(value)?,
            "sweep_scaling" => self.sweep_scaling = value.parse()?,
            "kernel" => self.kernel = value.trim().parse().map_err(|e: Error| e.to_string())?,
            "p2" => self.p2 = value.trim().parse().map_err(|e: Error| e.to_string())?,
            "cutoff_order" => self.cutoff_order = parse_usize(value)?,
            "tail_tol" => self.tail_tol = parse_f64(value)?,
            "leak_tol" => self.leak_tol = parse_f64(value)?,
            "decay_discard" => self.decay_discard = parse_f64(value)?,
            "grad_tolerance" => self.grad_tolerance = parse_f64(value)?,
            "slope_target" => self.slope_target = parse_f64(value)?,
            "slope_tolerance" => self.slope_tolerance = parse_f64(value)?,
            "residual_slope_min" => self.residual_slope_min = parse_f64(value)?,
            "divergence_tol" => self.divergence_tol = parse_f64(value)?,
            "boundary_tol" => self.boundary_tol = parse_f64(value)?,
            "profile_point" => {
                let (i, j) = value.split_once(',').ok_or_else(|| format!("`{}` is not `i,j`", value.trim()))?;
                self.profile_point = (parse_usize(i)?, parse_usize(j)?);
            }
            "out" => self.out = value.trim().to_string(),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Range and consistency checks; every violation is reported.
    fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                e.push(msg);
            }
        };
        need(self.nx.is_power_of_two() && self.nx >= 8, format!("nx = {}: must be a power of two >= 8", self.nx));
        need(self.ny.is_power_of_two() && self.ny >= 8, format!("ny = {}: must be a power of two >= 8", self.ny));
        need(self.nzeta >= 32 && self.nzeta.is_multiple_of(32), format!("nzeta = {}: must be a positive multiple of 32", self.nzeta));
        need(self.lx > 0.0, format!("lx = {}: must be positive", self.lx));
        need(self.ly > 0.0, format!("ly = {}: must be positive", self.ly));
        need(self.nu > 0.0, format!("nu = {}: must be positive", self.nu));
        need(!self.eps.is_empty(), "eps: at least one value is required".into());
        for &x in &self.eps {
            need(x > 0.0 && x < 1.0, format!("eps = {x}: must lie in (0, 1)"));
        }
        if self.eps.len() > 1 {
            need(
                self.eps.windows(2).all(|w| w[1] < w[0]),
                "eps: a sweep list must be strictly decreasing".into(),
            );
        }
        need(self.sigma > 0.0, format!("sigma = {}: must be positive", self.sigma));
        need((0.0..1.0).contains(&self.margin), format!("margin = {}: must lie in [0, 1)", self.margin));
        need(self.amplitude >= 0.0, format!("amplitude = {}: must be non-negative", self.amplitude));
        if let Some(w) = self.vorticity_scale {
            need(w > 0.0, format!("vorticity_scale = {w}: must be positive"));
        }
        need(self.smoothness >= 0.0, format!("smoothness = {}: must be non-negative", self.smoothness));
        need(self.t_end >= 0.0, format!("t_end = {}: must be non-negative", self.t_end));
        need(self.dt > 0.0, format!("dt = {}: must be positive", self.dt));
        need(self.stride >= 1, "stride: must be at least 1".into());
        need(self.cutoff_order >= 2, format!("cutoff_order = {}: must be at least 2", self.cutoff_order));
        need(self.tail_tol > 0.0 && self.tail_tol < 1.0, format!("tail_tol = {}: must lie in (0, 1)", self.tail_tol));
        need(self.leak_tol > 0.0, format!("leak_tol = {}: must be positive", self.leak_tol));
        need(
            (0.0..1.0).contains(&self.decay_discard),
            format!("decay_discard = {}: must lie in [0, 1)", self.decay_discard),
        );
        need(
            self.grad_tolerance > 0.0 && self.grad_tolerance <= 1.0,
            format!("grad_tolerance = {}: must lie in (0, 1]", self.grad_tolerance),
        );
        need(self.slope_tolerance > 0.0, format!("slope_tolerance = {}: must be positive", self.slope_tolerance));
        need(self.divergence_tol > 0.0, format!("divergence_tol = {}: must be positive", self.divergence_tol));
        need(self.boundary_tol > 0.0, format!("boundary_tol = {}: must be positive", self.boundary_tol));
        need(
            self.profile_point.0 < self.nx && self.profile_point.1 < self.ny,
            format!("profile_point = {:?}: outside the {}x{} grid", self.profile_point, self.nx, self.ny),
        );
        need(!self.out.is_empty(), "out: must not be empty".into());
        e
    }

    /// True when `eps` holds more than one value.
    pub fn sweep_mode(&self) -> bool {
        self.eps.len() > 1
    }

    pub fn grid(&self) -> Result<crate::spectral::Grid> {
        crate::spectral::Grid::new(self.nx, self.ny, self.lx, self.ly)
    }

    pub fn initial_data(&self) -> InitialData {
        let preset = match self.init {
            InitKind::TaylorGreen => InitPreset::TaylorGreen,
            InitKind::Random => InitPreset::Random { seed: self.seed },
            InitKind::Bump => InitPreset::Bump,
        };
        InitialData { preset, amplitude: self.amplitude, vorticity_scale: self.vorticity_scale, smoothness: self.smoothness }
    }

    pub fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions { nzeta: self.nzeta, cutoff_order: self.cutoff_order, tail_tol: self.tail_tol, leak_tol: self.leak_tol }
    }

    pub fn profile(&self) -> ProfileOptions {
        ProfileOptions { kernel: self.kernel, p2: self.p2 }
    }

    pub fn scaling(&self) -> SweepScaling {
        match self.sweep_scaling {
            ScalingKind::Fixed => SweepScaling::Fixed,
            ScalingKind::WellPrepared => SweepScaling::WellPrepared { sigma: self.sigma },
            ScalingKind::NearFlat => SweepScaling::NearFlat { sigma: self.sigma, eps_ref: self.eps[0] },
        }
    }

    /// Canonical rendering: every key in fixed order, numbers in round-trip form.
    pub fn canonical(&self) -> String {
        let f = |x: f64| format!("{x:e}");
        let mut s = String::new();
        let eps: Vec<String> = self.eps.iter().map(|x| f(*x)).collect();
        let rows: Vec<(&str, String)> = vec![
            ("surface", self.surface.clone()),
            ("nx", self.nx.to_string()),
            ("ny", self.ny.to_string()),
            ("nzeta", self.nzeta.to_string()),
            ("lx", f(self.lx)),
            ("ly", f(self.ly)),
            ("nu", f(self.nu)),
            ("eps", eps.join(",")),
            ("sigma", f(self.sigma)),
            ("admissibility", self.admissibility.to_string()),
            ("margin", f(self.margin)),
            ("enforce_admissibility", self.enforce_admissibility.to_string()),
            ("init", name_init(self.init).into()),
            ("amplitude", f(self.amplitude)),
            ("seed", self.seed.to_string()),
            ("vorticity_scale", self.vorticity_scale.map_or("none".into(), f)),
            ("smoothness", f(self.smoothness)),
            ("t_end", f(self.t_end)),
            ("dt", f(self.dt)),
            ("stride", self.stride.to_string()),
            ("sweep_scaling", name_scaling(self.sweep_scaling).into()),
            ("kernel", self.kernel.to_string()),
            ("p2", self.p2.to_string()),
            ("cutoff_order", self.cutoff_order.to_string()),
            ("tail_tol", f(self.tail_tol)),
            ("leak_tol", f(self.leak_tol)),
            ("decay_discard", f(self.decay_discard)),
            ("grad_tolerance", f(self.grad_tolerance)),
            ("slope_target", f(self.slope_target)),
            ("slope_tolerance", f(self.slope_tolerance)),
            ("residual_slope_min", f(self.residual_slope_min)),
            ("divergence_tol", f(self.divergence_tol)),
            ("boundary_tol", f(self.boundary_tol)),
            ("profile_point", format!("{},{}", self.profile_point.0, self.profile_point.1)),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// SHA-256 of [`Self::canonical`]; the output directory is excluded.
    pub fn hash(&self) -> String {
        crate::io::sha256_hex(self.canonical().as_bytes())
    }
}

/// Parse a configuration; all errors are collected with their line numbers.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_config_with(text, &[])
}

/// Parse a configuration and apply `key=value` overrides after it.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    let mut errors = Vec::new();
    let lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (format!("line {}", n + 1), l.to_string()))
        .chain(overrides.iter().map(|o| (format!("override `{o}`"), o.clone())));
    for (place, raw) in lines {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("{place}: expected `key = value`, found `{line}`"));
            continue;
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            errors.push(format!("{place}: unknown key `{key}`"));
            continue;
        }
        if let Err(e) = cfg.assign(key, value) {
            errors.push(format!("{place}: key `{key}`: {e}"));
        }
    }
    errors.extend(cfg.validate());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config("surface = flat\n").unwrap();
        assert_eq!(c.admissibility, AdmissibilityMode::Curved);
        assert_eq!(c.nx, 64);
        assert!(!c.sweep_mode());
        assert_eq!(c, parse_config("").unwrap());
    }

    #[test]
    fn eps_list_enables_sweep() {
        let c = parse_config("eps = 1e-2,1e-3,1e-4").unwrap();
        assert!(c.sweep_mode());
        assert_eq!(c.eps, vec![1e-2, 1e-3, 1e-4]);
    }

    #[test]
    fn non_power_of_two_is_rejected() {
        let e = errors("nx = 100");
        assert_eq!(e.len(), 1);
        assert!(e[0].contains("nx = 100") && e[0].contains("power of two"));
    }

    #[test]
    fn all_errors_are_reported() {
        let e = errors("nu = abc\nfoo = 1\nnx = 100\nsurface = volcano(amp=1)\njunk");
        assert_eq!(e.len(), 5, "{e:?}");
        assert!(e[0].starts_with("line 1") && e[0].contains("nu"));
        assert!(e[1].starts_with("line 2") && e[1].contains("unknown key `foo`"));
        assert!(e[2].starts_with("line 4"));
        assert!(e[3].starts_with("line 5"));
        assert!(e[4].contains("power of two"));
    }

    #[test]
    fn overrides_and_pi() {
        let c = parse_config_with("lx = 2pi\nnu = 0.1", &["nu=0.05".into(), "n = 32".into()]).unwrap();
        assert_eq!(c.lx, 2.0 * std::f64::consts::PI);
        assert_eq!(c.nu, 0.05);
        assert_eq!((c.nx, c.ny), (32, 32));
    }

    #[test]
    fn hash_ignores_formatting_and_output() {
        let a = parse_config("nu = 0.1\nout = a").unwrap();
        let b = parse_config("# comment\n  nu=1e-1 \nout = b").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), parse_config("nu = 0.2").unwrap().hash());
    }
}
