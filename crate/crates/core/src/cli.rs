//! Command-line driver: configuration, scenario runs and artifact output.
//!
//! Every command writes into the configured output directory and finishes with
//! `manifest-<command>.json`, listing each artifact with its SHA-256.
//! Exit codes: 0 ok, 1 failed assertion (`--strict`) or numerical failure,
//! 2 usage, configuration or I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::assembler::{assemble_approx, ApproxSolution};
use crate::config::{parse_config_with, ScenarioConfig};
use crate::error::{Error, ErrorClass, Result};
use crate::geometry::{build_surface, check_admissibility, derive_geometry, AdmissibilityReport, GeometryBundle, SurfaceField};
use crate::io::{csv_string, num, ArtifactSet, FieldFile};
use crate::limit2d::{decay_diagnostics, initial_state, integrate, norms_csv, InitReport, LimitModel, LimitState, Trajectory};
use crate::plot;
use crate::profiles::{
    audit, build_profiles, layer_residuals, profile_csv, select_p2_variant, DiagonalizationPack, LayerContext, StretchedAxis,
};
use crate::verify::{convergence_sweep_detailed, decay_check, vertical_term_norms, SweepScenario, GROUPS};

#[derive(Debug, Clone, Parser)]
#[command(name = "ekman", version, about = "Ekman layers over curved bottoms: limit flow, layer reconstruction and checks")]
pub struct Cli {
    /// Configuration file in `key = value` format.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Surface preset or `file:<path>` (overrides `surface`).
    #[arg(long, global = true)]
    pub surface: Option<String>,
    /// Exit with code 1 when any check fails.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Override a configuration key, e.g. `--set nu=0.05`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Derive the surface geometry, check admissibility and audit the layer diagonalization.
    GeometryCheck,
    /// Integrate the limit system and record norms and snapshots.
    Simulate,
    /// Assemble the approximate 3D solution at the final time.
    Reconstruct,
    /// Sweep the eps list and fit convergence slopes.
    ResidualSweep,
    /// Fit decay rates of the limit flow against their bounds.
    DecayCheck,
    /// Render an SVG from an artifact in the output directory.
    Plot {
        /// One of `norms`, `profile`, `profile-top`, `sweep`, `field`, `geometry`.
        #[arg(long)]
        artifact: String,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GeometryCheck => "geometry-check",
            Command::Simulate => "simulate",
            Command::Reconstruct => "reconstruct",
            Command::ResidualSweep => "residual-sweep",
            Command::DecayCheck => "decay-check",
            Command::Plot { .. } => "plot",
        }
    }
}

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Human-readable report, also written as `<command>-report.txt` where applicable.
    pub summary: String,
    /// Failed checks; fatal only with `--strict`.
    pub failures: Vec<String>,
    pub manifest: String,
}

/// Entry point of the `ekman` binary.
pub fn main_entry() -> i32 {
    main_with(std::env::args_os())
}

/// Parse `args` (including the program name), run and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{}", out.summary);
            let level = if cli.strict { "error" } else { "warning" };
            for f in &out.failures {
                eprintln!("{level}[assertion]: {f}");
            }
            if cli.strict && !out.failures.is_empty() {
                1
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.tag());
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Assertion => 1,
        ErrorClass::Usage => 2,
    }
}

/// Load the configuration named by `cli`, apply flag overrides and run.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))?,
        None => String::new(),
    };
    let mut overrides = Vec::new();
    if let Some(s) = &cli.surface {
        overrides.push(format!("surface = {s}"));
    }
    if let Some(o) = &cli.out {
        overrides.push(format!("out = {}", o.display()));
    }
    overrides.extend(cli.set.iter().cloned());
    let cfg = parse_config_with(&text, &overrides)?;
    run(&cli.command, &cfg)
}

/// Run one command on a validated configuration.
pub fn run(cmd: &Command, cfg: &ScenarioConfig) -> Result<Outcome> {
    let mut art = ArtifactSet::new(Path::new(&cfg.out))?;
    let hash = cfg.hash();
    let (summary, failures) = match cmd {
        Command::GeometryCheck => geometry_check(cfg, &mut art)?,
        Command::Simulate => simulate(cfg, &mut art)?,
        Command::Reconstruct => reconstruct(cfg, &mut art)?,
        Command::ResidualSweep => residual_sweep(cfg, &mut art)?,
        Command::DecayCheck => decay(cfg, &mut art)?,
        Command::Plot { artifact } => plot_artifact(cfg, &mut art, artifact, &hash)?,
    };
    let mut text = summary;
    if !failures.is_empty() {
        text.push_str("\nfailed checks:\n");
        for f in &failures {
            let _ = writeln!(text, "  {f}");
        }
    }
    if !matches!(cmd, Command::Plot { .. }) {
        art.put(&format!("{}-report.txt", cmd.name()), text.as_bytes())?;
    }
    let manifest = art.finish(&hash, cmd.name())?;
    let _ = writeln!(text, "{} artifacts in {}", art.entries.len(), art.dir.display());
    Ok(Outcome { summary: text, failures, manifest })
}

type Report = (String, Vec<String>);

fn header(cfg: &ScenarioConfig, command: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "ekman {command}");
    let _ = writeln!(s, "config sha256 {}", cfg.hash());
    let _ = writeln!(
        s,
        "surface {}  grid {}x{} on {:.6} x {:.6}  nu {}  eps {:?}",
        cfg.surface, cfg.nx, cfg.ny, cfg.lx, cfg.ly, cfg.nu, cfg.eps
    );
    s
}

fn load_surface(cfg: &ScenarioConfig) -> Result<SurfaceField> {
    build_surface(&cfg.surface, cfg.grid()?)
}

fn admissibility(cfg: &ScenarioConfig, g: &GeometryBundle) -> AdmissibilityReport {
    check_admissibility(g, cfg.admissibility, cfg.sigma, g.eps, cfg.margin)
}

/// Geometry at the first `eps`, refusing inadmissible surfaces when enforcement is on.
fn admissible_geometry(cfg: &ScenarioConfig, s: &SurfaceField) -> Result<(GeometryBundle, AdmissibilityReport)> {
    let g = derive_geometry(s, cfg.eps[0], cfg.nu)?;
    let rep = admissibility(cfg, &g);
    if cfg.enforce_admissibility && !rep.pass {
        let names: Vec<String> = rep.offending().iter().map(|c| format!("{} ({:.4e} >= {:.4e})", c.name, c.worst, c.threshold)).collect();
        return Err(Error::Parameter(format!(
            "surface violates the {} hypotheses: {}; set enforce_admissibility = false to run anyway",
            rep.mode,
            names.join(", ")
        )));
    }
    Ok((g, rep))
}

fn run_limit(cfg: &ScenarioConfig, model: &LimitModel) -> Result<(InitReport, Trajectory)> {
    let (st0, init) = initial_state(&model.spec, &cfg.initial_data())?;
    let traj = if cfg.t_end > 0.0 {
        integrate(model, &st0, cfg.t_end, cfg.dt, cfg.stride)?
    } else {
        Trajectory {
            rows: vec![model.norms(&st0)],
            snapshots: vec![crate::limit2d::Snapshot { state: st0 }],
            dt: cfg.dt,
            max_divergence: 0.0,
        }
    };
    Ok((init, traj))
}

fn limit_field(model: &LimitModel, st: &LimitState, eps: f64) -> FieldFile {
    FieldFile {
        grid: *model.grid(),
        zeta: vec![0.0],
        eps,
        nu: model.nu,
        time: st.t,
        components: vec![st.u.clone(), st.v.clone(), model.u3(&st.u, &st.v)],
    }
}

fn geometry_check(cfg: &ScenarioConfig, art: &mut ArtifactSet) -> Result<Report> {
    let surface = load_surface(cfg)?;
    let g = derive_geometry(&surface, cfg.eps[0], cfg.nu)?;
    let adm = admissibility(cfg, &g);
    let pack = DiagonalizationPack::new(&g);
    let aud = audit(&g, &pack);
    let grid = g.grid;
    let mut det = 0.0_f64;
    let mut rows = Vec::with_capacity(grid.len());
    for n in 0..grid.len() {
        let h = g.h0[n];
        det = det.max(((h[0] * h[2] - h[1] * h[1]) * g.cos_gamma[n].powi(2) - 1.0).abs());
        rows.push(vec![
            grid.x(n / grid.ny),
            grid.y(n % grid.ny),
            g.b[n],
            g.bx[n],
            g.by[n],
            g.cos_gamma[n],
            g.kg[n],
            g.ka[n],
            g.delta[n],
        ]);
    }
    art.put("geometry.csv", csv_string(&["x", "y", "b", "bx", "by", "cos_gamma", "kg", "ka", "delta"], &rows).as_bytes())?;
    let mut s = header(cfg, "geometry-check");
    let _ = writeln!(s, "{adm}");
    let _ = writeln!(s, "sup |grad B| {:.6e}  delta in [{:.6e}, {:.6e}]", g.sup_slope(), g.min_delta(), g.max_delta());
    let _ = writeln!(s, "max |det(H0) cos^2 g - 1| {det:.3e}");
    let _ = write!(s, "{aud}");
    let mut fail = Vec::new();
    if !adm.pass {
        for c in adm.offending() {
            fail.push(format!("admissibility: {} worst {:.6e} >= {:.6e} at ({}, {})", c.name, c.worst, c.threshold, c.at.0, c.at.1));
        }
    }
    if pack.max_residual() > 1e-10 {
        fail.push(format!("eigen-pack residual {:.3e} exceeds 1e-10", pack.max_residual()));
    }
    if det > 1e-12 {
        fail.push(format!("det(H0) cos^2 g deviates from 1 by {det:.3e}"));
    }
    Ok((s, fail))
}

fn simulate(cfg: &ScenarioConfig, art: &mut ArtifactSet) -> Result<Report> {
    let surface = load_surface(cfg)?;
    let (g, _) = admissible_geometry(cfg, &surface)?;
    let model = LimitModel::new(&g, cfg.nu);
    let (init, traj) = run_limit(cfg, &model)?;
    art.put("norms.csv", norms_csv(&traj.rows).as_bytes())?;
    art.put("final.bin", &limit_field(&model, traj.last(), cfg.eps[0]).encode()?)?;
    for (k, snap) in traj.snapshots.iter().enumerate() {
        art.put(&format!("snapshots/snap_{k:05}.bin"), &limit_field(&model, &snap.state, cfg.eps[0]).encode()?)?;
    }
    let mut s = header(cfg, "simulate");
    let _ = writeln!(
        s,
        "initial data {}: |omega|_2 {:.6e}  |u|_inf {:.6e}  divergence {:.3e}",
        cfg.initial_data().preset,
        init.l2_omega,
        init.linf_u,
        init.divergence
    );
    let work = traj.rows.iter().map(|r| r.rotation_work).fold(0.0, f64::max);
    let _ = writeln!(s, "steps of {:.6e} to t = {:.6}, {} snapshots", traj.dt, traj.last().t, traj.snapshots.len());
    let _ = writeln!(s, "max relative divergence {:.3e}  max rotation work {:.3e}", traj.max_divergence, work);
    let mut fail = Vec::new();
    if work > 1e-12 {
        fail.push(format!("rotation term is not energy neutral: relative work {work:.3e}"));
    }
    match decay_diagnostics(&traj.rows, cfg.nu, 0.0) {
        Ok(rep) if !rep.skipped => {
            for f in &rep.fits {
                let _ = writeln!(s, "fitted rate {:<12} {:.6e}  (bound {} = {:.6e})", f.quantity, f.rate, f.bound_label, f.bound);
            }
            if g.flat {
                if let Some(f) = rep.fit("l2_u_sq") {
                    let exact = (2.0 * cfg.nu).sqrt();
                    let rel = (f.rate - exact).abs() / exact;
                    let _ = writeln!(s, "flat energy rate {:.6e} vs sqrt(2 nu) = {exact:.6e}: relative error {rel:.3e}", f.rate);
                    if rel > 0.01 {
                        fail.push(format!("flat energy rate {:.6e} differs from sqrt(2 nu) by {:.2}%", f.rate, 100.0 * rel));
                    }
                }
            }
        }
        Ok(_) => {
            let _ = writeln!(s, "decay fit skipped: norms reached round-off");
        }
        Err(e) => {
            let _ = writeln!(s, "decay fit skipped: {e}");
        }
    }
    Ok((s, fail))
}

fn field_of(sol: &ApproxSolution) -> FieldFile {
    let mut components: Vec<Vec<f64>> = sol.u.to_vec();
    components.extend(sol.v.iter().cloned());
    FieldFile { grid: sol.grid, zeta: sol.zeta.nodes().to_vec(), eps: sol.eps, nu: sol.nu, time: sol.time, components }
}

fn reconstruct(cfg: &ScenarioConfig, art: &mut ArtifactSet) -> Result<Report> {
    let surface = load_surface(cfg)?;
    let (g0, _) = admissible_geometry(cfg, &surface)?;
    let model0 = LimitModel::new(&g0, cfg.nu);
    let (_, traj) = run_limit(cfg, &model0)?;
    let st = traj.last().clone();
    let mut s = header(cfg, "reconstruct");
    let _ = writeln!(s, "limit state at t = {:.6}, |u|_inf {:.6e}", st.t, st.max_speed());
    let mut fail = Vec::new();
    let uinf = st.max_speed();
    let mut rows = Vec::new();
    for (k, &eps) in cfg.eps.iter().enumerate() {
        let g = derive_geometry(&surface, eps, cfg.nu)?;
        let model = LimitModel::new(&g, cfg.nu);
        let ctx = LayerContext::new(&g, cfg.nu, cfg.profile());
        let sol = assemble_approx(&model, &ctx, &st, eps, cfg.assembly())?;
        art.put(&format!("u_app_{k}.bin"), &field_of(&sol).encode()?)?;
        let (div, div_abs) = sol.divergence_relative();
        let div_num = sol.divergence_numeric();
        let wall = if uinf > 0.0 { sol.boundary_max() / uinf } else { 0.0 };
        let ul2 = sol.limit_l2();
        let corr = if ul2 > 0.0 { sol.corrector_l2() / ul2 } else { 0.0 };
        let _ = writeln!(
            s,
            "eps {eps:.3e}: |U-u| {:.6e}  div {div:.3e} (abs {div_abs:.3e}, numeric {div_num:.3e})  wall {wall:.3e}  |V|/|u| {corr:.3e}  leak {:.3e}  defect {:.3e}",
            sol.deviation_l2(),
            sol.leak,
            sol.defect_norm
        );
        rows.push(vec![eps, sol.deviation_l2(), div_num, wall, corr, sol.leak]);
        if div_num > cfg.divergence_tol {
            fail.push(format!("eps {eps:e}: relative divergence {div_num:.3e} above {:.1e}", cfg.divergence_tol));
        }
        if wall > cfg.boundary_tol {
            fail.push(format!("eps {eps:e}: wall value {wall:.3e} above {:.1e}", cfg.boundary_tol));
        }
        if k == 0 {
            let (ut, vt) = model.limit_rhs(&st)?;
            let prof = build_profiles(&ctx, (&st.u, &st.v), (&ut, &vt));
            let axis = StretchedAxis::default();
            let n = g.grid.index(cfg.profile_point.0, cfg.profile_point.1);
            art.put("profile_bottom.csv", profile_csv(&prof.bottom, n, &axis).as_bytes())?;
            art.put("profile_top.csv", profile_csv(&prof.top, n, &axis).as_bytes())?;
            let _ = writeln!(s, "interior/layer wall mismatch {:.3e}", prof.wall_mismatch());
            for set in [&prof.bottom, &prof.top] {
                let r = layer_residuals(&ctx, &g, set, &prof.interior, &axis)?;
                let _ = writeln!(s, "{} layer residuals: {r}", set.side.name());
                if r.order1 > 1e-8 * uinf.max(1.0) {
                    fail.push(format!("{} order-1 layer residual {:.3e}", set.side.name(), r.order1));
                }
            }
            let (pick, res) = select_p2_variant(&ctx, &g, (&st.u, &st.v), (&ut, &vt), &axis)?;
            let _ = writeln!(
                s,
                "order-2 pressure: integrated residual {:.3e}, printed residual {:.3e}, selected {pick}",
                res[0], res[1]
            );
        }
    }
    art.put(
        "construction.csv",
        csv_string(&["eps", "deviation_l2", "divergence_rel", "boundary_rel", "corrector_rel", "leak"], &rows).as_bytes(),
    )?;
    Ok((s, fail))
}

fn residual_sweep(cfg: &ScenarioConfig, art: &mut ArtifactSet) -> Result<Report> {
    if !cfg.sweep_mode() {
        return Err(Error::Parameter("residual-sweep needs an eps list, e.g. `eps = 1e-2,1e-3,1e-4`".into()));
    }
    let surface = load_surface(cfg)?;
    let (g, _) = admissible_geometry(cfg, &surface)?;
    let model = LimitModel::new(&g, cfg.nu);
    let (_, traj) = run_limit(cfg, &model)?;
    let sc = SweepScenario {
        surface,
        nu: cfg.nu,
        state: traj.last().clone(),
        assembly: cfg.assembly(),
        profile: cfg.profile(),
        residual: true,
        scaling: cfg.scaling(),
    };
    let (table, reports) = convergence_sweep_detailed(&sc, &cfg.eps)?;
    art.put("sweep.csv", table.csv().as_bytes())?;
    let mut header_cols = vec!["eps", "total", "horizontal", "vertical"];
    header_cols.extend(GROUPS);
    header_cols.extend(["consistency", "blowup_ratio"]);
    let rows: Vec<Vec<f64>> = reports
        .iter()
        .map(|r| {
            let mut v = vec![r.eps, r.total, r.horizontal, r.vertical];
            v.extend(r.groups);
            v.extend([r.consistency, r.blowup_ratio]);
            v
        })
        .collect();
    art.put("residuals.csv", csv_string(&header_cols, &rows).as_bytes())?;
    let mut s = header(cfg, "residual-sweep");
    let _ = writeln!(s, "sweep scaling {}  limit state at t = {:.6}", sc.scaling, sc.state.t);
    let _ = write!(s, "{table}");
    for r in &reports {
        let _ = write!(s, "{r}");
    }
    let mut fail = Vec::new();
    if let Some(f) = &table.failure {
        fail.push(f.clone());
    }
    let target = (cfg.slope_target, cfg.slope_tolerance);
    match table.deviation_slope {
        Some(sl) if (sl.slope - target.0).abs() <= target.1 => {}
        Some(sl) => fail.push(format!("deviation slope {:.4} outside {} +- {}", sl.slope, target.0, target.1)),
        None => fail.push("deviation slope unavailable".into()),
    }
    if !table.residual_decreasing() {
        fail.push("residual does not decrease strictly along the eps list".into());
    }
    match table.residual_slope {
        Some(sl) if sl.slope >= cfg.residual_slope_min => {}
        Some(sl) => fail.push(format!("residual slope {:.4} below {}", sl.slope, cfg.residual_slope_min)),
        None => fail.push("residual slope unavailable".into()),
    }
    for r in &table.rows {
        if r.divergence.max(r.divergence_numeric) > cfg.divergence_tol {
            fail.push(format!("eps {:e}: relative divergence {:.3e}", r.eps, r.divergence.max(r.divergence_numeric)));
        }
        if r.boundary > cfg.boundary_tol {
            fail.push(format!("eps {:e}: wall value {:.3e}", r.eps, r.boundary));
        }
    }
    if let Some(sl) = table.corrector_slope {
        let met = (sl.slope - target.0).abs() <= target.1;
        let _ = writeln!(
            s,
            "corrector slope {:.4} vs expected {} +- {}: {} (informational; the constructive corrector is O(eps^2))",
            sl.slope,
            target.0,
            target.1,
            if met { "met" } else { "not met" }
        );
    }
    Ok((s, fail))
}

fn decay(cfg: &ScenarioConfig, art: &mut ArtifactSet) -> Result<Report> {
    let surface = load_surface(cfg)?;
    let (g, _) = admissible_geometry(cfg, &surface)?;
    let model = LimitModel::new(&g, cfg.nu);
    let (_, traj) = run_limit(cfg, &model)?;
    let dc = decay_check(&traj.rows, cfg.nu, cfg.decay_discard, cfg.grad_tolerance)?;
    let norms = norms_csv(&traj.rows);
    art.put("norms.csv", norms.as_bytes())?;
    let mut csv = String::from("quantity,rate,bound,pass\n");
    for (q, rate, bound, pass) in &dc.verdicts {
        let _ = writeln!(csv, "{q},{},{},{}", num(*rate), num(*bound), pass);
    }
    art.put("decay.csv", csv.as_bytes())?;
    art.put("decay.svg", plot::decay_plot(&norms, cfg.nu, &format!("config sha256 {}", cfg.hash()))?.as_bytes())?;
    let mut s = header(cfg, "decay-check");
    let _ = writeln!(s, "horizon t = {:.3}, transient fraction {:.3} discarded", traj.last().t, cfg.decay_discard);
    for (q, rate, bound, pass) in &dc.verdicts {
        let _ = writeln!(s, "{q:<12} rate {rate:.6e}  required {bound:.6e}  {}", if *pass { "PASS" } else { "FAIL" });
    }
    let first = &traj.snapshots[0].state;
    for (label, st) in [("initial", first), ("final", traj.last())] {
        let vt = vertical_term_norms(&model, st)?;
        let _ = writeln!(
            s,
            "{label} vertical terms: |d_t u3| {:.3e}  |u^T H u| {:.3e}  |grad B.(u.grad)u| {:.3e}  material {:.3e}  bound {:.3e}",
            vt.dt_u3, vt.u_hess_u, vt.grad_b_advection, vt.material, vt.bound
        );
    }
    let fail = dc
        .verdicts
        .iter()
        .filter(|v| !v.3)
        .map(|(q, rate, bound, _)| format!("{q} decay rate {rate:.4e} below {bound:.4e}"))
        .collect();
    Ok((s, fail))
}

fn read_text(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    fs::read_to_string(&p).map_err(|e| Error::io(p.display().to_string(), e))
}

fn plot_artifact(cfg: &ScenarioConfig, art: &mut ArtifactSet, id: &str, hash: &str) -> Result<Report> {
    let dir = art.dir.clone();
    let footer = format!("config sha256 {hash}");
    let (name, svg) = match id {
        "norms" => ("decay.svg", plot::decay_plot(&read_text(&dir, "norms.csv")?, cfg.nu, &footer)?),
        "profile" | "profile-bottom" => ("hodograph_bottom.svg", plot::hodograph(&read_text(&dir, "profile_bottom.csv")?, &footer)?),
        "profile-top" => ("hodograph_top.svg", plot::hodograph(&read_text(&dir, "profile_top.csv")?, &footer)?),
        "sweep" => ("sweep.svg", plot::sweep_plot(&read_text(&dir, "sweep.csv")?, cfg.slope_target, &footer)?),
        "geometry" => {
            let (h, rows) = crate::io::parse_csv(&read_text(&dir, "geometry.csv")?)?;
            let k = h.iter().position(|c| c == "delta").ok_or_else(|| Error::Format("geometry.csv has no delta column".into()))?;
            let vals: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            let labels = plot::Labels {
                title: "layer thickness delta(x, y)".into(),
                x: "x index".into(),
                y: "y index".into(),
                footer,
            };
            ("geometry.svg", plot::heatmap(&labels, cfg.nx, cfg.ny, &vals)?)
        }
        "field" => {
            let f = FieldFile::read(&dir.join("u_app_0.bin"))?;
            ("field.svg", field_heatmap(&f, footer)?)
        }
        other => return Err(Error::UnknownArtifact(other.to_string())),
    };
    art.put(name, svg.as_bytes())?;
    Ok((format!("wrote {name}\n"), Vec::new()))
}

/// `|U_h|` on the slice closest to three layer thicknesses, relative to mid-channel.
fn field_heatmap(f: &FieldFile, footer: String) -> Result<String> {
    if f.components.len() < 2 || f.zeta.is_empty() {
        return Err(Error::Format("field file lacks horizontal velocity".into()));
    }
    let nearest = |z: f64| {
        (0..f.zeta.len())
            .min_by(|&a, &b| (f.zeta[a] - z).abs().total_cmp(&(f.zeta[b] - z).abs()))
            .unwrap_or(0)
    };
    let target = 3.0 * f.nu.sqrt() * f.eps;
    let (ks, km) = (nearest(target), nearest(1.0));
    let nz = f.zeta.len();
    let vals: Vec<f64> = (0..f.grid.len())
        .map(|n| {
            let mag = |k: usize| f.components[0][n * nz + k].hypot(f.components[1][n * nz + k]);
            let m = mag(km);
            if m > 0.0 {
                mag(ks) / m
            } else {
                0.0
            }
        })
        .collect();
    let labels = plot::Labels {
        title: format!("|U_h(zeta = {:.3e})| / |U_h(zeta = {:.3})|", f.zeta[ks], f.zeta[km]),
        x: "x index".into(),
        y: "y index".into(),
        footer,
    };
    plot::heatmap(&labels, f.grid.nx, f.grid.ny, &vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("ekman-cli-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn flat_geometry_check_passes_with_zero_worst_values() {
        let out = tmp("geom");
        let code = main_with(["ekman", "geometry-check", "--strict", "--set", "n=16", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        let rep = fs::read_to_string(out.join("geometry-check-report.txt")).unwrap();
        assert!(rep.contains("PASS"));
        assert!(rep.contains("worst 0.000000e0"));
        assert!(out.join("manifest-geometry-check.json").exists());
        let _ = fs::remove_dir_all(&out);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with(["ekman", "simulate", "--set", "nx=100"]), 2);
        assert_eq!(main_with(["ekman", "frobnicate"]), 2);
        let out = tmp("plot");
        assert_eq!(main_with(["ekman", "plot", "--artifact", "nonsense", "--out", out.to_str().unwrap()]), 2);
        let _ = fs::remove_dir_all(&out);
    }

    #[test]
    fn inadmissible_surface_fails_under_strict() {
        let out = tmp("bad");
        let args = ["ekman", "geometry-check", "--strict", "--surface", "eggcarton(amp=0.5)", "--set", "n=16", "--out", out.to_str().unwrap()];
        assert_eq!(main_with(args), 1);
        let _ = fs::remove_dir_all(&out);
    }
}
