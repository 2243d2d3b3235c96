//! Command implementations. Each returns the process exit code:
//! 0 when everything holds, 2 when something fails, 3 when something is
//! inconclusive and 1 on input errors.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use hbl_core::decay::{
    self, certify_decay, expand_large, expand_small, linear_times, AsymptoticExpansion, Regime,
};
use hbl_core::dissipativity::{check_all, check_jinxin, Tolerances};
use hbl_core::grid::{RadialGrid, SphereGrid};
use hbl_core::model::{fixtures, linearize, LinearSystem};
use hbl_core::{ConditionReport, Verdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::input::{self, InitKind, LoadedSystem, SimMode, System};
use crate::output::{self, write_json, Cell, Envelope, Table};
use crate::sim::{self, init, PeriodicGrid, SimError, SimOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FAILS: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

/// Directions examined by the per-direction diagnostics.
const MAX_DIAGNOSTIC_DIRECTIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "hbl", version, about = "Dissipativity checks and decay certificates for hyperbolic balance laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Sphere grid density (points on S^{d-1}).
    #[arg(long, global = true)]
    pub grid_sphere: Option<usize>,
    /// Radial grid: MIN MAX COUNT.
    #[arg(long, global = true, num_args = 3, value_names = ["MIN", "MAX", "COUNT"])]
    pub grid_radial: Option<Vec<f64>>,
    /// Overrides the compatibility, (D1) and (RH) tolerances.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Tolerance file (JSON, unknown keys rejected).
    #[arg(long, global = true)]
    pub tolerances: Option<PathBuf>,
    #[arg(long, global = true, default_value = "hbl-out")]
    pub out: PathBuf,
    /// `csv` additionally writes tabular exports next to the JSON reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Decide H, RH, K, D1, D2, D3 (and the reduced Jin-Xin conditions).
    Check {
        system: PathBuf,
        /// Conditions that determine the exit code; all six by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Certify `‖exp(𝓜(ξ)t)‖ ≤ C exp(−cρ(|ξ|)t)` on the grid.
    Certify {
        system: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        t_max: f64,
        #[arg(long, default_value_t = 40)]
        times: usize,
    },
    /// Small- and large-frequency eigenvalue expansions.
    Expand {
        system: PathBuf,
        #[arg(long, default_value_t = 1e-2)]
        h: f64,
        /// Direction ω (comma separated); the sphere grid when absent.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        omega: Option<Vec<f64>>,
    },
    /// Reduced conditions of the Jin-Xin family b = diag(κ₁, κ₂), F(u) = (u₁−u₂, u₂−u₁).
    SweepJinxin {
        #[arg(long, num_args = 3, value_names = ["MIN", "MAX", "STEP"], default_values_t = [0.5, 9.0, 0.25])]
        k1: Vec<f64>,
        #[arg(long, num_args = 3, value_names = ["MIN", "MAX", "STEP"], default_values_t = [0.5, 9.0, 0.25])]
        k2: Vec<f64>,
    },
    /// Run a simulation manifest.
    Simulate { manifest: PathBuf },
    /// Summarize the condition reports found in a directory.
    Report { dir: PathBuf },
}

/// Failure of a command before any verdict is reached.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl ToString) -> Self {
        Self { code: EXIT_INPUT, message: message.to_string() }
    }
}

impl From<input::InputError> for CliError {
    fn from(e: input::InputError) -> Self {
        Self::input(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::input(format!("{e:#}"))
    }
}

impl From<hbl_core::Error> for CliError {
    fn from(e: hbl_core::Error) -> Self {
        Self::input(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let code = if matches!(e, SimError::Cfl { .. }) { EXIT_FAILS } else { EXIT_INPUT };
        Self { code, message: e.to_string() }
    }
}

type CliResult = Result<i32, CliError>;

/// Exit code of a set of verdicts: any failure wins over inconclusive.
pub fn exit_code<I: IntoIterator<Item = Verdict>>(verdicts: I) -> i32 {
    let mut code = EXIT_OK;
    for v in verdicts {
        match v {
            Verdict::Fails => return EXIT_FAILS,
            Verdict::Inconclusive => code = EXIT_INCONCLUSIVE,
            Verdict::Holds => {}
        }
    }
    code
}

/// The configuration recorded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveConfig {
    pub tolerances: Tolerances,
    pub sphere_density: usize,
    pub sphere_points: usize,
    pub radial: (f64, f64, usize),
    pub format: Format,
    pub seed: Option<u64>,
    pub threads: usize,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub command: serde_json::Value,
}

pub struct Context<'a> {
    cli: &'a Cli,
    tol: Tolerances,
}

impl<'a> Context<'a> {
    pub fn new(cli: &'a Cli) -> Result<Self, CliError> {
        let mut tol = match &cli.tolerances {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}:{}:{}: {e}", p.display(), e.line(), e.column())))?
            }
            None => Tolerances::default(),
        };
        if let Some(t) = cli.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::input(format!("--tol must be positive, got {t}")));
            }
            tol.compat = t;
            tol.d1_rel = t;
            tol.rh = t;
        }
        Ok(Self { cli, tol })
    }

    fn sphere(&self, d: usize) -> Result<SphereGrid, CliError> {
        Ok(match self.cli.grid_sphere {
            Some(n) => SphereGrid::new(d, n)?,
            None => SphereGrid::default_for(d)?,
        })
    }

    fn radial(&self) -> Result<RadialGrid, CliError> {
        match &self.cli.grid_radial {
            Some(v) => {
                let count = v[2];
                if count.fract() != 0.0 || count < 2.0 {
                    return Err(CliError::input(format!("radial COUNT must be an integer >= 2, got {count}")));
                }
                Ok(RadialGrid::new(v[0], v[1], count as usize)?)
            }
            None => Ok(RadialGrid::default()),
        }
    }

    fn config(&self, sgrid: &SphereGrid, rgrid: &RadialGrid, command: serde_json::Value) -> EffectiveConfig {
        EffectiveConfig {
            tolerances: self.tol,
            sphere_density: sgrid.density,
            sphere_points: sgrid.len(),
            radial: (rgrid.min, rgrid.max, rgrid.count),
            format: self.cli.format,
            seed: self.cli.seed,
            threads: rayon::current_num_threads(),
            command,
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }
}

fn envelope<'a, C: Serialize, R: Serialize>(
    command: &'a str,
    loaded: Option<&'a LoadedSystem>,
    config: &'a C,
    result: &'a R,
) -> Envelope<'a, C, R> {
    Envelope {
        tool: "hbl",
        version: output::VERSION,
        command,
        input: loaded.and_then(|l| l.path.to_str()).unwrap_or(""),
        input_sha256: loaded.map(|l| l.sha256.as_str()).unwrap_or(""),
        config,
        result,
    }
}

pub fn run(cli: &Cli) -> CliResult {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Check { system, only } => cmd_check(&ctx, system, only),
        Command::Certify { system, t_max, times } => cmd_certify(&ctx, system, *t_max, *times),
        Command::Expand { system, h, omega } => cmd_expand(&ctx, system, *h, omega.as_deref()),
        Command::SweepJinxin { k1, k2 } => cmd_sweep_jinxin(&ctx, k1, k2),
        Command::Simulate { manifest } => cmd_simulate(&ctx, manifest),
        Command::Report { dir } => cmd_report(&ctx, dir),
    }
}

fn summary_table(reports: &[&ConditionReport]) -> Table {
    let mut t = Table::new(&["condition", "verdict", "margin", "witnesses", "notes"]);
    for r in reports {
        let notes = r.notes.join("; ");
        t.row(&[
            Cell::S(&r.condition),
            Cell::S(r.verdict.as_str()),
            Cell::F(r.margin),
            Cell::U(r.witnesses.len()),
            Cell::S(&notes),
        ]);
    }
    t
}

fn witness_table(r: &ConditionReport) -> Table {
    let mut t = Table::new(&["point", "eigenvalue_re", "eigenvalue_im", "margin", "detail"]);
    for w in &r.witnesses {
        let point = w.point.iter().map(|x| output::fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        let (re, im) = w.eigenvalue.map_or((f64::NAN, f64::NAN), |z| (z.re, z.im));
        t.row(&[Cell::S(&point), Cell::F(re), Cell::F(im), Cell::F(w.margin), Cell::S(&w.detail)]);
    }
    t
}

fn print_summary(reports: &[&ConditionReport]) {
    for r in reports {
        println!("{:<6} {:<13} margin {:>12.4e}", r.condition, r.verdict.as_str(), r.margin);
    }
}

fn balance_system(loaded: &LoadedSystem, command: &str) -> Result<LinearSystem, CliError> {
    match &loaded.system {
        System::Scalar(_) => Err(CliError::input(format!("{command} needs a balance law or a Jin-Xin system"))),
        other => Ok(linearize(&other.balance_law().expect("balance law"))?),
    }
}

pub fn cmd_check(ctx: &Context<'_>, path: &Path, only: &[String]) -> CliResult {
    let loaded = input::load_system(path)?;
    let spec = loaded
        .system
        .balance_law()
        .ok_or_else(|| CliError::input("check needs a balance law or a Jin-Xin system"))?;
    let sgrid = ctx.sphere(spec.d)?;
    let rgrid = ctx.radial()?;
    let mut reports = check_all(&spec, &rgrid, &sgrid, &ctx.tol)?;
    for r in reports.iter_mut() {
        match r.condition.as_str() {
            "D2" => r.note("governs the |ξ| → 0 regime"),
            "D3" => r.note("governs the |ξ| → ∞ regime"),
            _ => {}
        }
    }
    let mut extra = Vec::new();
    if let System::JinXin(jx) = &loaded.system {
        let jr = check_jinxin(jx, &rgrid, &sgrid, &ctx.tol)?;
        let mut list: Vec<ConditionReport> = jr.reports().into_iter().cloned().collect();
        for note in &jr.notes {
            list[0].note(note.clone());
        }
        extra = list;
    }
    let all: Vec<&ConditionReport> = reports.iter().chain(extra.iter()).collect();
    let known: Vec<&str> = all.iter().map(|r| r.condition.as_str()).collect();
    for name in only {
        if !known.contains(&name.as_str()) {
            return Err(CliError::input(format!("unknown condition {name}; available: {}", known.join(", "))));
        }
    }
    let config = ctx.config(&sgrid, &rgrid, serde_json::json!({ "only": only }));
    for r in &all {
        write_json(&ctx.out(&format!("{}.json", r.condition)), &envelope("check", Some(&loaded), &config, *r))?;
        if ctx.cli.format == Format::Csv {
            witness_table(r).write(&ctx.out(&format!("{}_witnesses.csv", r.condition)))?;
        }
    }
    if let Some(d1) = reports.iter().find(|r| r.condition == "D1") {
        let mut t = Table::new(&["radius", "max_re"]);
        for p in &d1.curve {
            t.row(&[Cell::F(p.radius), Cell::F(p.max_re)]);
        }
        t.write(&ctx.out("D1_curve.csv"))?;
    }
    summary_table(&all).write(&ctx.out("summary.csv"))?;
    print_summary(&all);
    let selected = all
        .iter()
        .filter(|r| if only.is_empty() { reports.iter().any(|x| x.condition == r.condition) } else { only.contains(&r.condition) })
        .map(|r| r.verdict);
    Ok(exit_code(selected))
}

#[derive(Debug, Clone, Serialize)]
struct SymmetrizerDiagnostic {
    radius: f64,
    omega: Vec<f64>,
    regime: Regime,
    certified_c: f64,
    lambda_min: f64,
    residual: f64,
    error: Option<String>,
}

fn symmetrizer_diagnostics(sys: &LinearSystem, rgrid: &RadialGrid, sgrid: &SphereGrid) -> Vec<SymmetrizerDiagnostic> {
    let dirs: Vec<&[f64]> = sgrid.iter().take(MAX_DIAGNOSTIC_DIRECTIONS).collect();
    let jobs: Vec<(f64, &[f64])> = rgrid.iter().flat_map(|r| dirs.iter().map(move |w| (r, *w))).collect();
    jobs.par_iter()
        .map(|&(r, omega)| {
            let xi: Vec<f64> = omega.iter().map(|x| x * r).collect();
            let regime = Regime::of_radius(r);
            let built = match regime {
                Regime::Small => decay::symmetrizer_small(sys, r, omega),
                Regime::Mid => decay::symmetrizer_mid(sys, &xi),
                Regime::Large => decay::symmetrizer_large(sys, &xi),
            };
            match built {
                Ok(s) => SymmetrizerDiagnostic {
                    radius: r,
                    omega: omega.to_vec(),
                    regime,
                    certified_c: s.certified_c,
                    lambda_min: s.lambda_min,
                    residual: s.verification_residual(&sys.symbol(&xi)),
                    error: None,
                },
                Err(e) => SymmetrizerDiagnostic {
                    radius: r,
                    omega: omega.to_vec(),
                    regime,
                    certified_c: f64::NAN,
                    lambda_min: f64::NAN,
                    residual: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn cmd_certify(ctx: &Context<'_>, path: &Path, t_max: f64, count: usize) -> CliResult {
    let loaded = input::load_system(path)?;
    let d = loaded.system.dim();
    let sgrid = ctx.sphere(d)?;
    let rgrid = ctx.radial()?;
    let times = linear_times(t_max, count);
    let (cert, diag) = match &loaded.system {
        System::Scalar(s) => (certify_decay(s, &rgrid, &sgrid, &times)?, Vec::new()),
        _ => {
            let sys = balance_system(&loaded, "certify")?;
            let cert = certify_decay(&sys, &rgrid, &sgrid, &times)?;
            (cert, symmetrizer_diagnostics(&sys, &rgrid, &sgrid))
        }
    };
    let config = ctx.config(&sgrid, &rgrid, serde_json::json!({ "t_max": t_max, "times": count }));
    write_json(&ctx.out("certificate.json"), &envelope("certify", Some(&loaded), &config, &cert))?;
    let mut t = Table::new(&["radius", "t", "max_norm", "max_ratio"]);
    for row in &cert.envelope {
        t.row(&[Cell::F(row.radius), Cell::F(row.t), Cell::F(row.norm), Cell::F(row.ratio)]);
    }
    t.write(&ctx.out("envelope.csv"))?;
    if !diag.is_empty() {
        let mut t = Table::new(&["radius", "omega", "regime", "certified_c", "lambda_min", "residual", "error"]);
        for r in &diag {
            let omega = r.omega.iter().map(|x| output::fmt_f64(*x)).collect::<Vec<_>>().join(" ");
            let regime = format!("{:?}", r.regime).to_lowercase();
            t.row(&[
                Cell::F(r.radius),
                Cell::S(&omega),
                Cell::S(&regime),
                Cell::F(r.certified_c),
                Cell::F(r.lambda_min),
                Cell::F(r.residual),
                Cell::S(r.error.as_deref().unwrap_or("")),
            ]);
        }
        t.write(&ctx.out("symmetrizers.csv"))?;
    }
    println!("pass {} c {:.6e} C {:.6e} rate source {}", cert.pass, cert.c, cert.big_c, cert.rate_source);
    if let Some(w) = &cert.witness {
        println!("witness {:?} at ξ = {:?}: max Re {:.3e}", w.regime, w.xi, w.max_re);
    }
    Ok(if cert.pass { EXIT_OK } else { EXIT_FAILS })
}

#[derive(Debug, Clone, Serialize)]
struct ExpansionRecord {
    omega: Vec<f64>,
    small: Result<AsymptoticExpansion, String>,
    large: Result<AsymptoticExpansion, String>,
}

/// Agreement threshold between the two expansion routes.
pub const EXPANSION_TOL: f64 = 1e-3;

pub fn cmd_expand(ctx: &Context<'_>, path: &Path, h: f64, omega: Option<&[f64]>) -> CliResult {
    let loaded = input::load_system(path)?;
    let sys = balance_system(&loaded, "expand")?;
    let sgrid = ctx.sphere(sys.d)?;
    let dirs: Vec<Vec<f64>> = match omega {
        Some(w) => {
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if w.len() != sys.d || !(n > 0.0) {
                return Err(CliError::input(format!("--omega needs {} components, not all zero", sys.d)));
            }
            vec![w.iter().map(|x| x / n).collect()]
        }
        None => sgrid.iter().take(MAX_DIAGNOSTIC_DIRECTIONS).map(|w| w.to_vec()).collect(),
    };
    let records: Vec<ExpansionRecord> = dirs
        .par_iter()
        .map(|w| ExpansionRecord {
            omega: w.clone(),
            small: expand_small(&sys, w, h).map_err(|e| e.to_string()),
            large: expand_large(&sys, w, h).map_err(|e| e.to_string()),
        })
        .collect();
    let rgrid = ctx.radial()?;
    let config = ctx.config(&sgrid, &rgrid, serde_json::json!({ "h": h }));
    write_json(&ctx.out("expansions.json"), &envelope("expand", Some(&loaded), &config, &records))?;
    let mut t = Table::new(&[
        "omega", "regime", "center_re", "center_im", "multiplicity", "projected_re", "projected_im", "fd_re", "fd_im",
        "relative_deviation",
    ]);
    let mut code = EXIT_OK;
    for rec in &records {
        let omega = rec.omega.iter().map(|x| output::fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        for (name, e) in [("small", &rec.small), ("large", &rec.large)] {
            match e {
                Ok(exp) => {
                    if exp.max_relative_deviation() > EXPANSION_TOL {
                        code = code.max(EXIT_INCONCLUSIVE);
                    }
                    for b in &exp.branches {
                        t.row(&[
                            Cell::S(&omega),
                            Cell::S(name),
                            Cell::F(b.center.re),
                            Cell::F(b.center.im),
                            Cell::U(b.multiplicity),
                            Cell::F(b.projected.re),
                            Cell::F(b.projected.im),
                            Cell::F(b.finite_difference.re),
                            Cell::F(b.finite_difference.im),
                            Cell::F(b.relative_deviation),
                        ]);
                    }
                }
                Err(msg) => {
                    eprintln!("{name} expansion at ω = [{omega}]: {msg}");
                    code = EXIT_FAILS;
                }
            }
        }
    }
    t.write(&ctx.out("expansions.csv"))?;
    Ok(code)
}

/// One point of the κ sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub k1: f64,
    pub k2: f64,
    pub d1: Verdict,
    pub d2: Verdict,
    pub d3: Verdict,
    pub disp2: Verdict,
}

fn axis(spec: &[f64]) -> Result<Vec<f64>, CliError> {
    let (lo, hi, step) = (spec[0], spec[1], spec[2]);
    if !(step > 0.0 && lo > 0.0 && hi >= lo) {
        return Err(CliError::input(format!("sweep range needs 0 < MIN <= MAX and STEP > 0, got {lo} {hi} {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

/// Reduced (D1)–(D3) verdicts on a κ grid, in row-major order.
pub fn sweep(k1: &[f64], k2: &[f64], rgrid: &RadialGrid, tol: &Tolerances) -> Result<Vec<SweepRow>, hbl_core::Error> {
    let sgrid = SphereGrid::default_for(1)?;
    let points: Vec<(f64, f64)> = k1.iter().flat_map(|&a| k2.iter().map(move |&b| (a, b))).collect();
    points
        .par_iter()
        .map(|&(a, b)| {
            let r = check_jinxin(&fixtures::kappa_jinxin(a, b), rgrid, &sgrid, tol)?;
            Ok(SweepRow { k1: a, k2: b, d1: r.d1.verdict, d2: r.d2.verdict, d3: r.d3.verdict, disp2: r.disp2.verdict })
        })
        .collect()
}

pub fn cmd_sweep_jinxin(ctx: &Context<'_>, k1: &[f64], k2: &[f64]) -> CliResult {
    let (a, b) = (axis(k1)?, axis(k2)?);
    let rgrid = ctx.radial()?;
    let rows = sweep(&a, &b, &rgrid, &ctx.tol)?;
    let mut t = Table::new(&["k1", "k2", "D1", "D2", "D3", "disp2"]);
    for r in &rows {
        t.row(&[
            Cell::F(r.k1),
            Cell::F(r.k2),
            Cell::S(r.d1.as_str()),
            Cell::S(r.d2.as_str()),
            Cell::S(r.d3.as_str()),
            Cell::S(r.disp2.as_str()),
        ]);
    }
    t.write(&ctx.out("sweep.csv"))?;
    let sgrid = SphereGrid::default_for(1)?;
    let config = ctx.config(&sgrid, &rgrid, serde_json::json!({ "k1": k1, "k2": k2 }));
    write_json(&ctx.out("sweep.json"), &envelope("sweep-jinxin", None, &config, &rows))?;
    println!("{} points written to {}", rows.len(), ctx.out("sweep.csv").display());
    Ok(EXIT_OK)
}

fn components(system: &System) -> usize {
    match system {
        System::Balance(s) => s.n,
        System::JinXin(j) => j.n(),
        System::Scalar(_) => 1,
    }
}

pub fn cmd_simulate(ctx: &Context<'_>, path: &Path) -> CliResult {
    let (man, man_hash) = input::load_manifest(path)?;
    let loaded = input::load_system(&man.system)?;
    let system = &loaded.system;
    let d = system.dim();
    let grid = PeriodicGrid::new(d, man.grid.points, man.grid.length)?;
    let ncomp = components(system);
    if let Some(c) = man.init.component {
        if c >= ncomp {
            return Err(CliError::input(format!("init.component {c} out of range (system has {ncomp})")));
        }
    }
    let seed = ctx.cli.seed.unwrap_or(man.init.seed);
    let u0 = match man.init.kind {
        InitKind::Gaussian => init::gaussian(&grid, ncomp, man.init.amplitude, man.init.width, man.init.component),
        InitKind::Noise => init::band_limited_noise(&grid, ncomp, man.init.amplitude, man.init.band, seed, man.init.component),
        InitKind::Mode => {
            let k = man.init.mode.clone().unwrap_or_else(|| vec![1; d]);
            if k.len() != d {
                return Err(CliError::input(format!("init.mode needs {d} wavenumbers")));
            }
            init::single_mode(&grid, ncomp, man.init.amplitude, &k, man.init.component)
        }
    };
    let opts = SimOptions {
        sobolev: man.outputs.sobolev.clone(),
        record_modes: man.outputs.envelope_check,
        record_fields: man.outputs.snapshots,
        dealias: man.dealias,
    };
    let speed = match system {
        System::JinXin(j) => j.max_speed(),
        _ => 1.0,
    };
    let dt_default = 0.25 * grid.dx() / speed;
    let dt = man.dt.unwrap_or(dt_default);
    let res = match (man.mode, system) {
        (SimMode::Linear, System::Scalar(s)) => {
            sim::simulate_linear(s, &grid, &u0, &sim::geometric_times(man.t_final, man.outputs.count, dt), &opts)?
        }
        (SimMode::Linear, _) => {
            let sys = balance_system(&loaded, "simulate")?;
            sim::simulate_linear(&sys, &grid, &u0, &sim::geometric_times(man.t_final, man.outputs.count, dt), &opts)?
        }
        (SimMode::Jinxin, System::JinXin(jx)) => {
            let times = sim::snap_times(&sim::geometric_times(man.t_final, man.outputs.count, dt), dt);
            sim::simulate_jinxin(jx, &grid, &u0, &times, dt, &opts)?
        }
        (SimMode::Jinxin, _) => return Err(CliError::input("mode jinxin needs a jinxin system file")),
    };
    let t_end = *res.times.last().unwrap_or(&0.0);
    let window = man.outputs.fit_window.unwrap_or((0.5 * t_end, t_end));
    let fits = sim::measure_decay(&res, window)?;

    let mut header = vec![String::from("t"), String::from("L2"), String::from("Linf")];
    header.extend(res.sobolev.iter().map(|s| format!("H^{}", s.s)));
    header.extend((0..ncomp).map(|i| format!("mean_{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header_refs);
    for (i, &time) in res.times.iter().enumerate() {
        let mut row = vec![Cell::F(time), Cell::F(res.l2[i]), Cell::F(res.linf[i])];
        row.extend(res.sobolev.iter().map(|s| Cell::F(s.values[i])));
        row.extend(res.mean[i].iter().map(|m| Cell::F(*m)));
        t.row(&row);
    }
    t.write(&ctx.out("timeseries.csv"))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        manifest: &'a input::Manifest,
        manifest_sha256: &'a str,
        seed: u64,
        integrator: &'a sim::Integrator,
        aborted: &'a Option<String>,
        fits: &'a sim::DecayFits,
    }
    let rgrid = ctx.radial()?;
    let sgrid = ctx.sphere(d)?;
    let config = ctx.config(&sgrid, &rgrid, serde_json::Value::Null);
    let summary = Summary { manifest: &man, manifest_sha256: &man_hash, seed, integrator: &res.integrator, aborted: &res.aborted, fits: &fits };
    write_json(&ctx.out("fit.json"), &envelope("simulate", Some(&loaded), &config, &summary))?;

    if man.outputs.snapshots {
        for (i, (field, &time)) in res.fields.iter().zip(&res.times).enumerate() {
            sim::snapshot::write(&ctx.out(&format!("snapshots/snap_{i:04}.hbl")), &grid, time, field)?;
        }
    }
    let mut code = EXIT_OK;
    if man.outputs.envelope_check {
        let mut cert_times = linear_times(t_end.max(1.0), 40);
        cert_times.extend_from_slice(&res.times);
        cert_times.sort_by(f64::total_cmp);
        cert_times.dedup();
        let cert = match system {
            System::Scalar(s) => certify_decay(s, &rgrid, &sgrid, &cert_times)?,
            _ => certify_decay(&balance_system(&loaded, "simulate")?, &rgrid, &sgrid, &cert_times)?,
        };
        let checks = sim::envelope_check(&res, cert.big_c, cert.c.max(0.0))?;
        let mut t = Table::new(&["k", "t", "amplitude", "bound", "ok"]);
        for c in &checks {
            let k = c.k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            t.row(&[Cell::S(&k), Cell::F(c.t), Cell::F(c.amplitude), Cell::F(c.bound), Cell::S(if c.ok { "true" } else { "false" })]);
        }
        t.write(&ctx.out("envelope_check.csv"))?;
        if !cert.pass || checks.iter().any(|c| !c.ok) {
            code = EXIT_FAILS;
        }
    }
    if let Some(msg) = &res.aborted {
        eprintln!("simulation aborted: {msg}");
        code = EXIT_FAILS;
    }
    for f in &fits.fits {
        println!(
            "{:<6} power slope {:>10.4} (rms {:.2e})  exp rate {:>10.4e} (rms {:.2e})",
            f.norm, f.power_slope, f.power_residual, f.exp_rate, f.exp_residual
        );
    }
    Ok(code)
}

pub fn cmd_report(ctx: &Context<'_>, dir: &Path) -> CliResult {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    let mut reports = Vec::new();
    for p in &entries {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}:{}:{}: {e}", p.display(), e.line(), e.column())))?;
        let result = value.get("result").cloned().unwrap_or(serde_json::Value::Null);
        if result.get("verdict").is_some() && result.get("condition").is_some() {
            let r: ConditionReport =
                serde_json::from_value(result).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            reports.push(r);
        }
    }
    if reports.is_empty() {
        return Err(CliError::input(format!("no condition reports in {}", dir.display())));
    }
    let refs: Vec<&ConditionReport> = reports.iter().collect();
    summary_table(&refs).write(&ctx.out("report.csv"))?;
    print_summary(&refs);
    Ok(exit_code(reports.iter().map(|r| r.verdict)))
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
