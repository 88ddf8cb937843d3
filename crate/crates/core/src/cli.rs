//! Batch front end: parameter sweeps, verification runs and table output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ed_oracle::{self, IsingRing, ModelBuilder, ModelKind, SpinModelSpec, ISING_MAX_SITES, ISING_MIN_SITES};
use crate::error::Error;
use crate::ising_ff;
use crate::numkernel::{eigh, HermitianMatrix};
use crate::quench_lab::{critical_tau_search, QuenchModel};
use crate::scaling::{self, ScalingFit, ScalingSample, MIN_FIT_SAMPLES, MIN_LOG_SAMPLES, MIN_LOG_SPAN};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Relative error allowed between exact diagonalization and the free-fermion formula.
pub const VERIFY_TOL: f64 = 1e-8;
/// Largest ring checked by `ed-verify`.
pub const VERIFY_MAX_SITES: usize = 10;
/// Dimension of the seeded random matrix used as an eigensolver smoke test.
pub const VERIFY_RANDOM_DIM: usize = 24;

const DEFAULT_VERIFY_SIZES: [usize; 4] = [4, 6, 8, 10];
const DEFAULT_VERIFY_FIELDS: [f64; 6] = [0.25, 0.5, 0.9, 1.0, 1.1, 2.0];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[from] Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Verification(_) => EXIT_VERIFY,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "adiabatic-lab", version, about = "Fidelity susceptibility and linear-quench experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: RawOptions,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Fidelity susceptibility over a grid of sizes and fields.
    ChiScan,
    /// Cross-check exact diagonalization against the free-fermion solution.
    EdVerify,
    /// Linear quench fidelities and duration-time searches.
    Quench,
    /// Power-law fit of a two-column (L, value) CSV file.
    ScalingFit,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ChiScan => "chi-scan",
            Command::EdVerify => "ed-verify",
            Command::Quench => "quench",
            Command::ScalingFit => "scaling-fit",
        }
    }
}

/// Flags as typed on the command line. Everything stays a string until it
/// has been merged with the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct RawOptions {
    #[arg(long, global = true, value_name = "ising|lmg")]
    pub model: Option<String>,
    /// Comma-separated system sizes.
    #[arg(long, global = true)]
    pub sizes: Option<String>,
    /// Comma-separated fields; `quench` reads them as `h_i,h_f`.
    #[arg(long, global = true)]
    pub fields: Option<String>,
    /// LMG anisotropy.
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    /// Comma-separated sweep durations.
    #[arg(long, global = true)]
    pub tau0: Option<String>,
    /// Target fidelity for the duration-time search.
    #[arg(long = "target-f", global = true)]
    pub target_f: Option<String>,
    #[arg(long, global = true)]
    pub dt: Option<String>,
    #[arg(long, global = true, value_name = "csv|json")]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub output: Option<String>,
    #[arg(long, global = true)]
    pub threads: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Input table for `scaling-fit`.
    #[arg(long, global = true)]
    pub input: Option<String>,
    /// key=value file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "inject-fault", global = true, hide = true)]
    pub inject_fault: bool,
}

const KNOWN_KEYS: [&str; 12] =
    ["model", "sizes", "fields", "gamma", "tau0", "target-f", "dt", "format", "output", "threads", "seed", "input"];

impl RawOptions {
    fn into_map(self) -> BTreeMap<&'static str, String> {
        let pairs = [
            ("model", self.model),
            ("sizes", self.sizes),
            ("fields", self.fields),
            ("gamma", self.gamma),
            ("tau0", self.tau0),
            ("target-f", self.target_f),
            ("dt", self.dt),
            ("format", self.format),
            ("output", self.output),
            ("threads", self.threads),
            ("seed", self.seed),
            ("input", self.input),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect()
    }
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// underscores in keys are accepted in place of dashes.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<&'static str, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| config_err(format!("config line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        let known = KNOWN_KEYS
            .iter()
            .find(|&&kk| kk == key)
            .ok_or_else(|| config_err(format!("config line {}: unknown key '{}'", i + 1, k.trim())))?;
        out.insert(*known, v.trim().to_string());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelKind,
    pub sizes: Vec<usize>,
    pub fields: Vec<f64>,
    pub gamma: f64,
    pub tau0: Vec<f64>,
    pub target_f: Option<f64>,
    pub dt: Option<f64>,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub inject_fault: bool,
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect();
    if items.is_empty() {
        return Err(config_err(format!("--{key} must not be empty")));
    }
    items.iter().map(|x| x.parse::<T>().map_err(|_| config_err(format!("--{key}: cannot parse '{x}'")))).collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, CliError> {
    s.trim().parse::<T>().map_err(|_| config_err(format!("--{key}: cannot parse '{s}'")))
}

fn finite_all(key: &str, xs: &[f64]) -> Result<(), CliError> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(config_err(format!("--{key}: non-finite value {x}"))),
        None => Ok(()),
    }
}

impl RunConfig {
    /// Merges flags over the config file and fills per-command defaults.
    pub fn resolve(command: Command, raw: RawOptions) -> Result<Self, CliError> {
        let inject_fault = raw.inject_fault;
        let mut map = match &raw.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        map.extend(raw.into_map());
        let get = |k: &str| map.get(k).map(String::as_str);

        let model = match get("model") {
            Some(s) => s.parse::<ModelKind>().map_err(|e| config_err(e.to_string()))?,
            None => ModelKind::Ising,
        };
        let format = match get("format").map(|s| s.trim().to_ascii_lowercase()) {
            None => Format::Csv,
            Some(s) if s == "csv" => Format::Csv,
            Some(s) if s == "json" => Format::Json,
            Some(s) => return Err(config_err(format!("--format must be csv or json, got '{s}'"))),
        };

        let sizes = match get("sizes") {
            Some(s) => parse_list::<usize>("sizes", s)?,
            None => match command {
                Command::ChiScan => vec![64, 128, 256, 512, 1024],
                Command::EdVerify => DEFAULT_VERIFY_SIZES.to_vec(),
                Command::Quench => vec![32, 64, 128],
                Command::ScalingFit => Vec::new(),
            },
        };
        let fields = match get("fields") {
            Some(s) => parse_list::<f64>("fields", s)?,
            None => match command {
                Command::EdVerify => DEFAULT_VERIFY_FIELDS.to_vec(),
                Command::Quench => vec![3.0, 0.0],
                _ => vec![1.0],
            },
        };
        finite_all("fields", &fields)?;
        let gamma = get("gamma").map(|s| parse_one::<f64>("gamma", s)).transpose()?.unwrap_or(0.0);
        let tau0 = match get("tau0") {
            Some(s) => parse_list::<f64>("tau0", s)?,
            None => vec![1.0, 10.0, 100.0],
        };
        finite_all("tau0", &tau0)?;
        if tau0.iter().any(|&t| t <= 0.0) {
            return Err(config_err("--tau0 values must be positive"));
        }
        let target_f = get("target-f").map(|s| parse_one::<f64>("target-f", s)).transpose()?;
        if let Some(f) = target_f {
            if !(0.0..1.0).contains(&f) {
                return Err(config_err(format!("--target-f must lie in [0, 1), got {f}")));
            }
        }
        let dt = get("dt").map(|s| parse_one::<f64>("dt", s)).transpose()?;
        if let Some(dt) = dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(config_err(format!("--dt must be positive, got {dt}")));
            }
        }
        let threads = get("threads").map(|s| parse_one::<usize>("threads", s)).transpose()?;
        if threads == Some(0) {
            return Err(config_err("--threads must be at least 1"));
        }
        let seed = get("seed").map(|s| parse_one::<u64>("seed", s)).transpose()?.unwrap_or(0);
        let output = get("output").map(PathBuf::from);
        let input = get("input").map(PathBuf::from);

        let cfg = RunConfig {
            command,
            model,
            sizes,
            fields,
            gamma,
            tau0,
            target_f,
            dt,
            format,
            output,
            threads,
            seed,
            input,
            inject_fault,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        match self.command {
            Command::ScalingFit => {
                if self.input.is_none() {
                    return Err(config_err("scaling-fit needs --input <file>"));
                }
            }
            Command::EdVerify => {
                if self.model != ModelKind::Ising {
                    return Err(config_err("ed-verify supports only the Ising model"));
                }
                check_sizes(ModelKind::Ising, &self.sizes)?;
            }
            Command::ChiScan => check_sizes(self.model, &self.sizes)?,
            Command::Quench => {
                check_sizes(self.model, &self.sizes)?;
                if self.fields.len() != 2 {
                    return Err(config_err("quench expects --fields h_i,h_f"));
                }
                if self.fields[0] == self.fields[1] {
                    return Err(config_err("quench needs h_i != h_f"));
                }
            }
        }
        if self.model == ModelKind::Lmg && !(0.0..1.0).contains(&self.gamma) {
            return Err(config_err(format!("--gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if self.model == ModelKind::Ising && self.fields.iter().any(|&h| h < 0.0) {
            return Err(config_err("Ising fields must be >= 0"));
        }
        Ok(())
    }

    pub fn ising_uses_ed(n: usize) -> bool {
        n <= ISING_MAX_SITES
    }
}

// Upper caps are left to the commands: ed-verify warns and skips, the
// others switch backend or fail numerically.
fn check_sizes(model: ModelKind, sizes: &[usize]) -> Result<(), CliError> {
    if sizes.is_empty() {
        return Err(config_err("size list must not be empty"));
    }
    for &n in sizes {
        match model {
            ModelKind::Ising => {
                if n % 2 == 1 {
                    return Err(config_err(format!("Ising sizes must be even, got {n}")));
                }
                if n < ISING_MIN_SITES {
                    return Err(config_err(format!("Ising sizes must be >= {ISING_MIN_SITES}, got {n}")));
                }
            }
            ModelKind::Lmg => {
                if n == 0 || n > ed_oracle::LMG_MAX_SITES {
                    return Err(config_err(format!("LMG sizes must lie in 1..={}, got {n}", ed_oracle::LMG_MAX_SITES)));
                }
            }
        }
    }
    Ok(())
}

/// A table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Str(String),
    Int(i64),
    Float(f64),
    Bool(bool),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Str(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Str(s)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

/// Fixed-width scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(n) => n.to_string(),
            Cell::Float(x) => format_float(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Str(s) => serde_json::to_string(s).expect("strings always serialize"),
            Cell::Int(n) => n.to_string(),
            Cell::Float(x) if x.is_finite() => format_float(*x),
            Cell::Float(_) | Cell::Empty => "null".into(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

/// Output of one command: metadata, a table and a human summary.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub meta: Vec<(String, Cell)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: String,
}

impl Report {
    fn meta(&mut self, key: &str, value: impl Into<Cell>) {
        self.meta.push((key.to_string(), value.into()));
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| config_err(format!("csv: {e}"));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        w.into_inner().map_err(|e| config_err(format!("csv: {e}")))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let key = |k: &str| serde_json::to_string(k).expect("strings always serialize");
        let mut s = String::from("{\"meta\":{");
        for (i, (k, v)) in self.meta.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}:{}", key(k), v.json());
        }
        s.push_str("},\"rows\":[");
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push('{');
            for (j, (c, v)) in self.columns.iter().zip(row).enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{}:{}", key(c), v.json());
            }
            s.push('}');
        }
        s.push_str("]}\n");
        s.into_bytes()
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

fn add_fit_meta(report: &mut Report, prefix: &str, fit: &ScalingFit) {
    report.meta(&format!("{prefix}d_a"), fit.d_a);
    report.meta(&format!("{prefix}kappa"), fit.kappa);
    report.meta(&format!("{prefix}r_squared"), fit.r_squared);
    report.meta(&format!("{prefix}log_correction"), fit.log_correction);
    report.meta(&format!("{prefix}samples_used"), fit.samples_used);
}

fn sorted_by_size_field<T>(rows: &mut [(usize, f64, T)]) {
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
}

/// Ground-state fidelity susceptibility at one grid point. Ising rings up to
/// the exact-diagonalization cap use the closed form too, since both agree.
pub fn chi_f_point(model: ModelKind, n: usize, h: f64, gamma: f64) -> crate::Result<f64> {
    match model {
        ModelKind::Ising => ising_ff::chi_f(n, h),
        ModelKind::Lmg => {
            let dec = eigh(&ed_oracle::build_lmg(n, h, gamma)?)?;
            ed_oracle::chi_f_perturbative(&dec, &ed_oracle::lmg_driving(n)?)
        }
    }
}

pub fn cmd_chi_scan(cfg: &RunConfig) -> Result<Report, CliError> {
    let grid: Vec<(usize, f64)> = cfg.sizes.iter().flat_map(|&n| cfg.fields.iter().map(move |&h| (n, h))).collect();
    let mut results: Vec<(usize, f64, f64)> = grid
        .par_iter()
        .map(|&(n, h)| chi_f_point(cfg.model, n, h, cfg.gamma).map(|chi| (n, h, chi)))
        .collect::<crate::Result<_>>()?;
    sorted_by_size_field(&mut results);

    let mut report = Report { columns: vec!["model", "N", "h", "chi_f", "chi_f_per_n"], ..Default::default() };
    report.meta("command", "chi-scan");
    report.meta("model", cfg.model.to_string());
    if cfg.model == ModelKind::Lmg {
        report.meta("gamma", cfg.gamma);
    }
    for &(n, h, chi) in &results {
        report.rows.push(vec![cfg.model.to_string().into(), n.into(), h.into(), chi.into(), (chi / n as f64).into()]);
    }
    let mut summary = format!("chi-scan: {} points ({} model)\n", results.len(), cfg.model);
    for &(n, h, chi) in &results {
        let _ = writeln!(
            summary,
            "  N={n:<6} h={h:<8} chi_f={} chi_f/N={}",
            format_float(chi),
            format_float(chi / n as f64)
        );
    }
    report.summary = summary;
    Ok(report)
}

fn random_hermitian(dim: usize, seed: u64) -> HermitianMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = HermitianMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let im = if i == j { 0.0 } else { rng.gen_range(-1.0..1.0) };
            m.add_hermitian(i, j, C64::new(rng.gen_range(-1.0..1.0), im));
        }
    }
    m
}

/// Largest `||H v - e v|| / ||H||` over all eigenpairs.
pub fn eigh_residual(h: &HermitianMatrix) -> crate::Result<f64> {
    let dec = eigh(h)?;
    let scale = h.norm_bound().max(f64::MIN_POSITIVE);
    let mut out = vec![C64::new(0.0, 0.0); h.dim()];
    let mut worst: f64 = 0.0;
    for n in 0..h.dim() {
        let v = dec.state(n);
        h.apply(v, &mut out);
        let r: f64 = out.iter().zip(v).map(|(a, b)| (a - b * dec.energy(n)).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(r / scale);
    }
    Ok(worst)
}

pub fn cmd_ed_verify(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut warnings = String::new();
    let mut sizes = Vec::new();
    for &n in &cfg.sizes {
        if n > VERIFY_MAX_SITES {
            let e = Error::SizeCap { size: n, min: ISING_MIN_SITES, max: VERIFY_MAX_SITES };
            let _ = writeln!(warnings, "warning: skipping N={n}: {e}");
        } else {
            sizes.push(n);
        }
    }
    eprint!("{warnings}");
    if sizes.is_empty() {
        return Err(config_err("no sizes left to verify"));
    }
    let sign = if cfg.inject_fault { -1.0 } else { 1.0 };
    let grid: Vec<(usize, f64)> = sizes.iter().flat_map(|&n| cfg.fields.iter().map(move |&h| (n, h))).collect();
    let mut results: Vec<(usize, f64, (f64, f64))> = grid
        .par_iter()
        .map(|&(n, h)| {
            let ring = IsingRing { n, boundary_sign: sign };
            let dec = eigh(&ring.build(h)?)?;
            let ed = ed_oracle::chi_f_perturbative(&dec, &ring.driving()?)?;
            Ok((n, h, (ed, ising_ff::chi_f(n, h)?)))
        })
        .collect::<crate::Result<_>>()?;
    sorted_by_size_field(&mut results);

    let residual = eigh_residual(&random_hermitian(VERIFY_RANDOM_DIM, cfg.seed))?;
    let residual_ok = residual < VERIFY_TOL;

    let mut report =
        Report { columns: vec!["N", "h", "chi_f_ed", "chi_f_exact", "rel_error", "pass"], ..Default::default() };
    let mut max_rel: f64 = 0.0;
    let mut failures = 0;
    for &(n, h, (ed, exact)) in &results {
        let rel = (ed - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        let ok = rel < VERIFY_TOL;
        max_rel = max_rel.max(rel);
        failures += usize::from(!ok);
        report.rows.push(vec![n.into(), h.into(), ed.into(), exact.into(), rel.into(), ok.into()]);
    }
    let pass = failures == 0 && residual_ok;
    report.meta("command", "ed-verify");
    report.meta("threshold", VERIFY_TOL);
    report.meta("max_rel_error", max_rel);
    report.meta("seed", Cell::Int(cfg.seed as i64));
    report.meta("eigh_residual", residual);
    report.meta("fault_injected", cfg.inject_fault);
    report.meta("pass", pass);
    report.summary = format!(
        "ed-verify: {} points, max relative error {}, random-matrix residual {} -> {}\n",
        results.len(),
        format_float(max_rel),
        format_float(residual),
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(report)
}

enum QuenchRow {
    Fidelity { n: usize, tau0: f64, fidelity: f64 },
    TauStar { n: usize, tau0: f64, fidelity: f64, at_lower_bound: bool },
}

fn quench_fidelity(cfg: &RunConfig, n: usize, tau0: f64) -> crate::Result<f64> {
    let (hi, hf) = (cfg.fields[0], cfg.fields[1]);
    with_quench_model(cfg, n, |m| m.final_fidelity(hi, hf, tau0, cfg.dt))
}

fn with_quench_model<T>(
    cfg: &RunConfig,
    n: usize,
    f: impl FnOnce(QuenchModel<'_>) -> crate::Result<T>,
) -> crate::Result<T> {
    match cfg.model {
        ModelKind::Ising if !RunConfig::ising_uses_ed(n) => f(QuenchModel::FreeFermion { n }),
        ModelKind::Ising => f(QuenchModel::Exact(&SpinModelSpec::ising(n, cfg.fields[0])?)),
        ModelKind::Lmg => f(QuenchModel::Exact(&SpinModelSpec::lmg(n, cfg.fields[0], cfg.gamma)?)),
    }
}

pub fn cmd_quench(cfg: &RunConfig) -> Result<Report, CliError> {
    let (hi, hf) = (cfg.fields[0], cfg.fields[1]);
    let grid: Vec<(usize, f64)> = cfg.sizes.iter().flat_map(|&n| cfg.tau0.iter().map(move |&t| (n, t))).collect();
    let mut fidelities: Vec<(usize, f64, f64)> =
        grid.par_iter().map(|&(n, t)| quench_fidelity(cfg, n, t).map(|f| (n, t, f))).collect::<crate::Result<_>>()?;
    sorted_by_size_field(&mut fidelities);
    let mut rows: Vec<QuenchRow> =
        fidelities.iter().map(|&(n, tau0, fidelity)| QuenchRow::Fidelity { n, tau0, fidelity }).collect();

    let mut fit = None;
    let mut slopes = Vec::new();
    if let Some(target) = cfg.target_f {
        let mut stars: Vec<(usize, f64, f64, bool)> = cfg
            .sizes
            .par_iter()
            .map(|&n| {
                with_quench_model(cfg, n, |m| critical_tau_search(m, hi, hf, target))
                    .map(|s| (n, s.tau0, s.fidelity, s.at_lower_bound))
            })
            .collect::<crate::Result<_>>()?;
        stars.sort_by_key(|s| s.0);
        stars.dedup_by_key(|s| s.0);
        let samples: Vec<ScalingSample> =
            stars.iter().map(|&(n, t, _, _)| ScalingSample::new(n as f64, t)).collect::<crate::Result<_>>()?;
        if samples.len() >= MIN_FIT_SAMPLES {
            fit = Some(scaling::fit_power_law(&samples)?);
        } else {
            slopes = scaling::local_slopes(&samples);
        }
        rows.extend(stars.into_iter().map(|(n, tau0, fidelity, at_lower_bound)| QuenchRow::TauStar {
            n,
            tau0,
            fidelity,
            at_lower_bound,
        }));
    }

    let mut report = Report { columns: vec!["kind", "N", "tau0", "fidelity", "note"], ..Default::default() };
    report.meta("command", "quench");
    report.meta("model", cfg.model.to_string());
    report.meta("h_i", hi);
    report.meta("h_f", hf);
    if let Some(t) = cfg.target_f {
        report.meta("target_f", t);
    }
    let mut summary = format!("quench {} -> {} ({} model)\n", hi, hf, cfg.model);
    for row in &rows {
        match *row {
            QuenchRow::Fidelity { n, tau0, fidelity } => {
                report.rows.push(vec!["fidelity".into(), n.into(), tau0.into(), fidelity.into(), Cell::Empty]);
                let _ = writeln!(summary, "  N={n:<6} tau0={} F={}", format_float(tau0), format_float(fidelity));
            }
            QuenchRow::TauStar { n, tau0, fidelity, at_lower_bound } => {
                let note = if at_lower_bound { Cell::from("lower_bound") } else { Cell::Empty };
                report.rows.push(vec!["tau_star".into(), n.into(), tau0.into(), fidelity.into(), note]);
                let _ = writeln!(summary, "  N={n:<6} tau0*={} F={}", format_float(tau0), format_float(fidelity));
            }
        }
    }
    if let Some(fit) = &fit {
        add_fit_meta(&mut report, "tau_star_fit_", fit);
        report.rows.push(vec![
            "fit_exponent".into(),
            fit.samples_used.into(),
            fit.kappa.into(),
            fit.d_a.into(),
            Cell::Empty,
        ]);
        let _ = writeln!(
            summary,
            "  tau0* ~ {} N^{} (r^2 = {})",
            format_float(fit.kappa),
            format_float(fit.d_a),
            format_float(fit.r_squared)
        );
    }
    for s in &slopes {
        report.rows.push(vec![
            "local_slope".into(),
            (s.from as usize).into(),
            s.to.into(),
            s.slope.into(),
            Cell::Empty,
        ]);
        let _ = writeln!(summary, "  slope {}..{}: {}", s.from, s.to, format_float(s.slope));
    }
    report.summary = summary;
    Ok(report)
}

/// Reads `(L, value)` pairs. A header naming `L`/`N` and `value`/`chi_f`
/// picks those columns; otherwise the first two numeric columns are used.
pub fn read_scaling_table(path: &Path) -> Result<Vec<ScalingSample>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let records: Vec<csv::StringRecord> =
        rdr.records().collect::<Result<_, _>>().map_err(|e| config_err(format!("malformed table: {e}")))?;
    let Some(first) = records.first() else {
        return Err(config_err("input table is empty"));
    };
    let is_header = first.iter().any(|f| f.parse::<f64>().is_err());
    let (size_col, value_col, body) = if is_header {
        let names: Vec<String> = first.iter().map(|f| f.to_ascii_lowercase()).collect();
        let find = |cands: &[&str]| names.iter().position(|n| cands.contains(&n.as_str()));
        let size = find(&["l", "n", "size"]).unwrap_or(0);
        let value = find(&["value", "chi_f", "chi", "tau0"]).unwrap_or(if size == 0 { 1 } else { 0 });
        (size, value, &records[1..])
    } else {
        (0, 1, &records[..])
    };
    let mut out = Vec::new();
    for (i, rec) in body.iter().enumerate() {
        let line = i + 1 + usize::from(is_header);
        let cell = |c: usize| -> Result<f64, CliError> {
            let raw = rec.get(c).ok_or_else(|| config_err(format!("line {line}: missing column {}", c + 1)))?;
            raw.parse::<f64>().map_err(|_| config_err(format!("line {line}: not a number: '{raw}'")))
        };
        let (l, v) = (cell(size_col)?, cell(value_col)?);
        out.push(ScalingSample::new(l, v).map_err(|e| config_err(format!("line {line}: {e}")))?);
    }
    Ok(out)
}

pub fn cmd_scaling_fit(cfg: &RunConfig) -> Result<Report, CliError> {
    let path = cfg.input.as_deref().ok_or_else(|| config_err("scaling-fit needs --input <file>"))?;
    let mut samples = read_scaling_table(path)?;
    samples.sort_by(|a, b| a.size.total_cmp(&b.size));
    let mut fit = scaling::fit_power_law(&samples).map_err(|e| match e {
        Error::TooFewSamples { .. } => config_err(e.to_string()),
        other => CliError::Numerical(other),
    })?;
    let span = samples.last().map_or(1.0, |s| s.size) / samples.first().map_or(1.0, |s| s.size);
    if samples.len() >= MIN_LOG_SAMPLES && span >= MIN_LOG_SPAN {
        fit.log_correction = scaling::detect_log_correction(&samples)?.log_correction;
    }

    let mut report = Report { columns: vec!["from", "to", "slope"], ..Default::default() };
    report.meta("command", "scaling-fit");
    report.meta("input", path.display().to_string());
    add_fit_meta(&mut report, "", &fit);
    for s in &fit.local_slopes {
        report.rows.push(vec![s.from.into(), s.to.into(), s.slope.into()]);
    }
    report.summary = format!(
        "scaling-fit: d_a = {}, kappa = {}, r^2 = {}, log_correction = {} ({} samples)\n",
        format_float(fit.d_a),
        format_float(fit.kappa),
        format_float(fit.r_squared),
        fit.log_correction,
        fit.samples_used
    );
    Ok(report)
}

pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let go = || match cfg.command {
        Command::ChiScan => cmd_chi_scan(cfg),
        Command::EdVerify => cmd_ed_verify(cfg),
        Command::Quench => cmd_quench(cfg),
        Command::ScalingFit => cmd_scaling_fit(cfg),
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| config_err(format!("thread pool: {e}")))?
            .install(go),
        None => go(),
    }
}

fn emit(cfg: &RunConfig, report: &Report) -> Result<(), CliError> {
    let data = report.render(cfg.format)?;
    match &cfg.output {
        Some(path) => {
            std::fs::write(path, &data).map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))?;
            print!("{}", report.summary);
            println!("wrote {} rows to {}", report.rows.len(), path.display());
        }
        None => {
            eprint!("{}", report.summary);
            std::io::stdout().write_all(&data).map_err(|e| config_err(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = RunConfig::resolve(cli.command, cli.opts).and_then(|cfg| {
        let report = execute(&cfg)?;
        emit(&cfg, &report)?;
        if cfg.command == Command::EdVerify && report.meta.iter().any(|(k, v)| k == "pass" && *v == Cell::Bool(false)) {
            return Err(CliError::Verification(format!("{} outside tolerance", cfg.command.name())));
        }
        Ok(())
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(command: Command, raw: RawOptions) -> Result<RunConfig, CliError> {
        RunConfig::resolve(command, raw)
    }

    #[test]
    fn float_format_is_fixed_width() {
        assert_eq!(format_float(0.375), "3.7500000000000000e-1");
        assert_eq!(format_float(1.0 / 3.0).len(), format_float(2.0 / 3.0).len());
    }

    #[test]
    fn config_file_and_flag_precedence() {
        let file = parse_config_file("# sweep\nmodel = lmg\nsizes=8,16\ntarget_f=0.5\n").unwrap();
        assert_eq!(file["model"], "lmg");
        assert_eq!(file["target-f"], "0.5");
        assert!(parse_config_file("nonsense").is_err());
        assert!(parse_config_file("colour=red").is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "model=lmg\nsizes=8,16\n").unwrap();
        let raw = RawOptions { config: Some(path), sizes: Some("32".into()), ..Default::default() };
        let c = cfg(Command::ChiScan, raw).unwrap();
        assert_eq!(c.model, ModelKind::Lmg);
        assert_eq!(c.sizes, vec![32]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = |raw: RawOptions| cfg(Command::ChiScan, raw).unwrap_err().exit_code();
        assert_eq!(bad(RawOptions { sizes: Some("".into()), ..Default::default() }), EXIT_CONFIG);
        assert_eq!(bad(RawOptions { sizes: Some("7".into()), ..Default::default() }), EXIT_CONFIG);
        assert_eq!(bad(RawOptions { format: Some("xml".into()), ..Default::default() }), EXIT_CONFIG);
        assert_eq!(bad(RawOptions { tau0: Some("-1".into()), ..Default::default() }), EXIT_CONFIG);
        assert_eq!(bad(RawOptions { threads: Some("0".into()), ..Default::default() }), EXIT_CONFIG);
        let q = RawOptions { fields: Some("1".into()), ..Default::default() };
        assert_eq!(cfg(Command::Quench, q).unwrap_err().exit_code(), EXIT_CONFIG);
    }

    #[test]
    fn chi_scan_rows_are_sorted() {
        let raw = RawOptions { sizes: Some("8,4".into()), fields: Some("2,1".into()), ..Default::default() };
        let r = cmd_chi_scan(&cfg(Command::ChiScan, raw).unwrap()).unwrap();
        let keys: Vec<(i64, f64)> = r
            .rows
            .iter()
            .map(|row| match (&row[1], &row[2]) {
                (Cell::Int(n), Cell::Float(h)) => (*n, *h),
                _ => panic!("unexpected cell types"),
            })
            .collect();
        assert_eq!(keys, vec![(4, 1.0), (4, 2.0), (8, 1.0), (8, 2.0)]);
        match r.rows[0][3] {
            Cell::Float(chi) => assert!((chi - 0.375).abs() < 1e-14),
            _ => panic!("chi_f cell is not a float"),
        }
    }

    #[test]
    fn json_layout() {
        let mut r = Report { columns: vec!["a", "b"], ..Default::default() };
        r.meta("command", "x");
        r.rows.push(vec![Cell::Float(0.5), Cell::Str("q\"".into())]);
        let s = String::from_utf8(r.to_json()).unwrap();
        assert_eq!(s, "{\"meta\":{\"command\":\"x\"},\"rows\":[{\"a\":5.0000000000000000e-1,\"b\":\"q\\\"\"}]}\n");
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["rows"][0]["a"], 0.5);
    }

    #[test]
    fn ed_verify_flags_fault() {
        let raw = RawOptions { sizes: Some("4,6".into()), fields: Some("0.5,1".into()), ..Default::default() };
        let good = cmd_ed_verify(&cfg(Command::EdVerify, raw.clone()).unwrap()).unwrap();
        assert!(good.meta.contains(&("pass".into(), Cell::Bool(true))));
        let raw = RawOptions { inject_fault: true, ..raw };
        let bad = cmd_ed_verify(&cfg(Command::EdVerify, raw).unwrap()).unwrap();
        assert!(bad.meta.contains(&("pass".into(), Cell::Bool(false))));
    }

    #[test]
    fn scaling_table_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "model,N,h,chi_f,chi_f_per_n\nising,4,1,2,0.5\nising,8,1,8,1\n").unwrap();
        let s = read_scaling_table(&p).unwrap();
        assert_eq!((s[1].size, s[1].value), (8.0, 8.0));
        std::fs::write(&p, "4 ,3\n8, 6\n").unwrap();
        assert_eq!(read_scaling_table(&p).unwrap()[1].value, 6.0);
        std::fs::write(&p, "L,value\n4,0\n").unwrap();
        assert!(read_scaling_table(&p).is_err());
    }
}
