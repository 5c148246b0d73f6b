//! Command-line front end: `estimate`, `simulate` and `calibrate-ca`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 malformed input or usage,
//! 3 dimension problems, 4 invalid calibration arguments.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::calibration::{compute_ca, DEFAULT_K0};
use crate::error::Error;
use crate::exec::{set_threads, Exec};
use crate::filter::{ggm_knockoff_filter, AcPair, Control, FilterConfig, GraphEstimate, Rule};
use crate::knockoff::Strategy;
use crate::recycling::{aggregate_splits, final_estimate, recycled_filter, split_and_select, HyperGrid};
use crate::seeds::{child, derive, rng_from, tags};
use crate::simgen::{baseline_bh_by, fdp_tpp, generate_precision, sample_gaussian, GraphKind, Mtp, PrecisionSpec};
use crate::stats::StatRecipe;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIMENSION: i32 = 3;
pub const EXIT_CALIBRATION: i32 = 4;

const SUBCOMMANDS: [&str; 3] = ["estimate", "simulate", "calibrate-ca"];

#[derive(Parser, Debug)]
#[command(name = "ggm-knockoff", version, about = "Gaussian graphical model estimation with knockoff FDR control")]
#[command(args_override_self = true)]
pub struct Cli {
    /// File of `key = value` lines read as flags; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true, env = "GGM_KNOCKOFF_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate a graph from a CSV data matrix (rows are samples).
    Estimate(EstimateArgs),
    /// Run a seeded simulation sweep and write per-replication results.
    Simulate(SimulateArgs),
    /// Print the c_a bound for a given a and walk-length cap k0.
    CalibrateCa(CalibrateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Fixed,
    Recycle,
    Aggregate,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridArg {
    /// All 880 combinations.
    Full,
    /// 16 combinations (entry-λ statistics at α = 1).
    Reduced,
}

impl GridArg {
    fn grid(self) -> HyperGrid {
        match self {
            GridArg::Full => HyperGrid::default(),
            GridArg::Reduced => HyperGrid::reduced(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            GridArg::Full => "full",
            GridArg::Reduced => "reduced",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyArg {
    Equi,
    Sdp,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleArg {
    And,
    Or,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphArg {
    Band,
    Block,
    Er,
    Cluster,
}

impl From<GraphArg> for GraphKind {
    fn from(g: GraphArg) -> Self {
        match g {
            GraphArg::Band => GraphKind::Band,
            GraphArg::Block => GraphKind::Block,
            GraphArg::Er => GraphKind::ErdosRenyi,
            GraphArg::Cluster => GraphKind::Cluster,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Recycled filter, FDR control.
    GkfRe,
    /// Selection on half the data, estimation on the other half only.
    GkfNore,
    /// Recycled filter, mFDR control.
    GkfReMfdr,
    /// Fixed hyperparameters on the full sample.
    GkfFixed,
    Bh,
    By,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::GkfRe => "gkf-re",
            Method::GkfNore => "gkf-nore",
            Method::GkfReMfdr => "gkf-re-mfdr",
            Method::GkfFixed => "gkf-fixed",
            Method::Bh => "bh",
            Method::By => "by",
        }
    }

    /// Smallest n accepted at dimension p.
    fn min_n(self, p: usize) -> usize {
        match self {
            Method::GkfRe | Method::GkfNore | Method::GkfReMfdr => 4 * p,
            Method::GkfFixed => 2 * p,
            Method::Bh | Method::By => p + 4,
        }
    }
}

/// Hyperparameters used when nothing is selected from a grid.
#[derive(Args, Debug, Clone)]
pub struct FixedArgs {
    /// The a of the (a, c_a) pair.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// c_a; defaults to 1.93 for a = 1, 102 for a = 0.01, otherwise calibrated with k0 = 10.
    #[arg(long)]
    pub ca: Option<f64>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Sdp)]
    pub strategy: StrategyArg,
    /// Statistic label such as `entry/diff/a1` or `coef/smax/a0.6/q0.3`.
    #[arg(long, default_value = "entry/diff/a1")]
    pub recipe: String,
    #[arg(long, value_enum, default_value_t = RuleArg::And)]
    pub rule: RuleArg,
}

struct Fixed {
    ac: AcPair,
    strategy: Strategy,
    recipe: StatRecipe,
    rule: Rule,
}

impl FixedArgs {
    fn resolve(&self) -> Result<Fixed, CliError> {
        let ac = match self.ca {
            Some(c) if c > 0.0 && self.a > 0.0 => AcPair::custom_unchecked(self.a, c),
            Some(_) => return Err(CliError::usage("a and c_a must be positive")),
            None if self.a == 1.0 => AcPair::ONE,
            None if self.a == 0.01 => AcPair::SMALL,
            None => AcPair::calibrated(self.a, DEFAULT_K0).map_err(|e| CliError::usage(e.to_string()))?,
        };
        let strategy = match self.strategy {
            StrategyArg::Equi => Strategy::Equi,
            StrategyArg::Sdp => Strategy::Sdp,
        };
        let rule = match self.rule {
            RuleArg::And => Rule::And,
            RuleArg::Or => Rule::Or,
        };
        let recipe = StatRecipe::parse(&self.recipe).map_err(|e| CliError::usage(e.to_string()))?;
        Ok(Fixed { ac, strategy, recipe, rule })
    }
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Input CSV, one sample per row; an optional header row is detected.
    #[arg(long)]
    pub input: PathBuf,
    /// Edge list CSV to write; a manifest goes to `<output>.manifest.json`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub q: f64,
    /// 1 for FDR control, 0 for mFDR.
    #[arg(long, default_value_t = 1)]
    pub delta: u8,
    #[arg(long, value_enum, default_value_t = Mode::Fixed)]
    pub mode: Mode,
    /// Required for recycle and aggregate; fixed mode defaults to 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = GridArg::Full)]
    pub grid: GridArg,
    /// Number of splits in aggregate mode.
    #[arg(long, default_value_t = 20)]
    pub splits: usize,
    #[command(flatten)]
    pub fixed: FixedArgs,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum, value_delimiter = ',', action = ArgAction::Set, default_values_t = [GraphArg::Band])]
    pub graph: Vec<GraphArg>,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [400usize])]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = [0.2])]
    pub q: Vec<f64>,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, allow_hyphen_values = true, default_values_t = [-0.6])]
    pub b: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, value_enum, value_delimiter = ',', action = ArgAction::Set,
          default_values_t = [Method::GkfRe, Method::GkfNore, Method::Bh, Method::By])]
    pub methods: Vec<Method>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = GridArg::Reduced)]
    pub grid: GridArg,
    /// Per-replication results CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-setting summary CSV (default: `<output stem>.aggregate.csv`).
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
    /// Write 0 for runtime_ms so that reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub fixed: FixedArgs,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = DEFAULT_K0 as i64, allow_hyphen_values = true)]
    pub k0: i64,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Display) -> Self {
        CliError { code, message: message.to_string() }
    }

    fn usage(message: impl Display) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InsufficientSamples { .. } | Error::InvalidSpec(_) => EXIT_DIMENSION,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e)
    }
}

/// Parse a numeric CSV matrix. Blank lines are skipped and a first row with
/// any non-numeric cell is taken as a header. Rows and columns in messages
/// are 1-based file positions.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::usage(format!("malformed CSV: {e}")))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line());
        let cells: Vec<Option<f64>> = rec.iter().map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite())).collect();
        if first {
            first = false;
            if cells.iter().any(Option::is_none) {
                width = Some(rec.len());
                continue;
            }
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(CliError::usage(format!("row {line}: expected {w} columns, found {}", rec.len())));
        }
        let mut row = Vec::with_capacity(w);
        for (c, v) in cells.iter().enumerate() {
            match v {
                Some(v) => row.push(*v),
                None => {
                    return Err(CliError::usage(format!(
                        "row {line}, column {}: cannot read '{}' as a number",
                        c + 1,
                        &rec[c]
                    )))
                }
            }
        }
        rows.push(row);
    }
    let p = width.unwrap_or(0);
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

/// Edge list as `i,j` lines (1-based, i < j) under a header.
pub fn edges_csv(est: &GraphEstimate) -> String {
    let mut out = String::from("i,j\n");
    for &(i, j) in &est.edges {
        out.push_str(&format!("{},{}\n", i + 1, j + 1));
    }
    out
}

/// Turn `key = value` lines into flags. `#` starts a comment; `true` makes
/// a bare switch and `false` drops the key.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::usage(format!("config line {}: expected key = value", k + 1)));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                let joined: Vec<&str> = v.split(',').map(str::trim).collect();
                out.push(joined.join(",").into());
            }
        }
    }
    Ok(out)
}

/// Splice config-file flags in right after the subcommand so that flags
/// given on the command line override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            path = it.next();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let flags = config_flags(&text)?;
    let at = rest.iter().position(|a| SUBCOMMANDS.iter().any(|s| a == *s)).map_or(rest.len(), |i| i + 1);
    rest.splice(at..at, flags);
    Ok(rest)
}

fn write(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Hyper {
    a: f64,
    c_a: f64,
    strategy: &'static str,
    recipe: String,
    rule: &'static str,
}

#[derive(Serialize)]
struct Manifest {
    input: String,
    mode: &'static str,
    q: f64,
    delta: u8,
    seed: Option<u64>,
    n: usize,
    p: usize,
    edges: usize,
    grid: Option<&'static str>,
    splits: Option<usize>,
    hyperparameters: Option<Hyper>,
}

fn hyper(ac: AcPair, strategy: Strategy, recipe: &StatRecipe, rule: Rule) -> Hyper {
    Hyper { a: ac.a, c_a: ac.c_a, strategy: strategy.name(), recipe: recipe.label(), rule: rule.name() }
}

fn cmd_estimate(args: &EstimateArgs, exec: Exec) -> Result<(), CliError> {
    let control = Control::from_delta(args.delta).map_err(|e| CliError::usage(e.to_string()))?;
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", args.input.display())))?;
    let data = parse_matrix(&text)?;
    let (n, p) = data.shape();
    if p < 2 || n == 0 {
        return Err(CliError::new(EXIT_DIMENSION, format!("need at least two columns and one row, got {n}×{p}")));
    }
    let need_seed = || args.seed.ok_or_else(|| CliError::usage("--seed is required in recycle and aggregate modes"));
    let (est, hyperparameters, grid, splits) = match args.mode {
        Mode::Fixed => {
            let f = args.fixed.resolve()?;
            let cfg = FilterConfig { q: args.q, control, ac: f.ac, rule: f.rule };
            let mut rng = rng_from(args.seed.unwrap_or(0));
            let est = ggm_knockoff_filter(&data, &cfg, &f.recipe, f.strategy, &mut rng, exec)?;
            (est, Some(hyper(f.ac, f.strategy, &f.recipe, f.rule)), None, None)
        }
        Mode::Recycle => {
            let out = recycled_filter(&data, args.q, control, &args.grid.grid(), &mut rng_from(need_seed()?), exec)?;
            let s = &out.selection;
            (out.estimate, Some(hyper(s.ac, s.strategy, &s.recipe, s.rule)), Some(args.grid.name()), None)
        }
        Mode::Aggregate => {
            let mut rng = rng_from(need_seed()?);
            let est = aggregate_splits(&data, args.q, control, &args.grid.grid(), args.splits, &mut rng, exec)?;
            (est, None, Some(args.grid.name()), Some(args.splits))
        }
    };
    write(&args.output, &edges_csv(&est))?;
    let manifest = Manifest {
        input: args.input.display().to_string(),
        mode: match args.mode {
            Mode::Fixed => "fixed",
            Mode::Recycle => "recycle",
            Mode::Aggregate => "aggregate",
        },
        q: args.q,
        delta: args.delta,
        seed: args.seed,
        n,
        p,
        edges: est.len(),
        grid,
        splits,
        hyperparameters,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::new(EXIT_FAILURE, e))?;
    let mut side = args.output.clone().into_os_string();
    side.push(".manifest.json");
    write(Path::new(&side), &(json + "\n"))
}

#[derive(Clone, Copy, Debug)]
struct Setting {
    graph: GraphArg,
    n: usize,
    b: f64,
    q: f64,
}

struct Row {
    setting: usize,
    method: Method,
    seed: u64,
    fdp: f64,
    tpp: f64,
    ms: u128,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (m, (ss / (v.len() - 1) as f64).sqrt())
}

fn cmd_simulate(args: &SimulateArgs, exec: Exec) -> Result<(), CliError> {
    if args.reps == 0 || args.methods.is_empty() {
        return Err(CliError::usage("need at least one replication and one method"));
    }
    let fixed = args.fixed.resolve()?;
    let grid = args.grid.grid();
    let mut settings = Vec::new();
    for &graph in &args.graph {
        for &n in &args.n {
            for &b in &args.b {
                for &q in &args.q {
                    settings.push(Setting { graph, n, b, q });
                }
            }
        }
    }
    let p = args.p;
    let mut models = Vec::with_capacity(settings.len());
    for s in &settings {
        for &m in &args.methods {
            if s.n < m.min_n(p) {
                return Err(CliError::new(
                    EXIT_DIMENSION,
                    format!("{} needs n ≥ {} at p = {p}, got n = {}", m.name(), m.min_n(p), s.n),
                ));
            }
        }
        let kind: GraphKind = s.graph.into();
        let spec = PrecisionSpec::new(kind, p, s.b, derive(args.seed, tags::GRAPH, s.graph as u64));
        models.push(generate_precision(&spec)?);
    }

    let tasks = settings.len() * args.reps;
    let rows = exec.try_map(tasks, |t| -> Result<Vec<Row>, CliError> {
        let (si, r) = (t / args.reps, t % args.reps);
        let s = settings[si];
        let (omega, truth) = &models[si];
        let rep_seed = derive(args.seed, tags::REP, r as u64);
        let data = sample_gaussian(omega, s.n, &mut child(rep_seed, tags::DATA, 0))?;
        let inner = Exec::Sequential;
        let mut out = Vec::with_capacity(args.methods.len());
        for &m in &args.methods {
            let start = Instant::now();
            let mut rng = child(rep_seed, tags::SPLIT, 0);
            let est = match m {
                Method::GkfRe | Method::GkfNore | Method::GkfReMfdr => {
                    let control = if m == Method::GkfReMfdr { Control::Mfdr } else { Control::Fdr };
                    let (split, sel) = split_and_select(&data, s.q, control, &grid, &mut rng, inner)?;
                    let seed = rand::Rng::random(&mut rng);
                    final_estimate(&data, &split, &sel, s.q, control, m != Method::GkfNore, seed, inner)?
                }
                Method::GkfFixed => {
                    let cfg = FilterConfig { q: s.q, control: Control::Fdr, ac: fixed.ac, rule: fixed.rule };
                    ggm_knockoff_filter(&data, &cfg, &fixed.recipe, fixed.strategy, &mut rng, inner)?
                }
                Method::Bh => baseline_bh_by(&data, s.q, Mtp::Bh)?,
                Method::By => baseline_bh_by(&data, s.q, Mtp::By)?,
            };
            let (fdp, tpp) = fdp_tpp(&est, truth);
            let ms = if args.no_timing { 0 } else { start.elapsed().as_millis() };
            out.push(Row { setting: si, method: m, seed: rep_seed, fdp, tpp, ms });
        }
        Ok(out)
    })?;
    let rows: Vec<Row> = rows.into_iter().flatten().collect();

    let head = |s: &Setting| format!("{},{},{},{},{}", GraphKind::from(s.graph).name(), p, s.n, s.b, s.q);
    let mut body = String::from("graph,p,n,b,q,method,seed,fdp,tpp,runtime_ms\n");
    for r in &rows {
        let s = &settings[r.setting];
        body.push_str(&format!("{},{},{},{},{},{}\n", head(s), r.method.name(), r.seed, r.fdp, r.tpp, r.ms));
    }
    write(&args.output, &body)?;

    let mut agg = String::from("graph,p,n,b,q,method,reps,mean_fdp,sd_fdp,mean_tpp,sd_tpp\n");
    for (si, s) in settings.iter().enumerate() {
        for &m in &args.methods {
            let sel: Vec<&Row> = rows.iter().filter(|r| r.setting == si && r.method == m).collect();
            let (mf, sf) = mean_sd(&sel.iter().map(|r| r.fdp).collect::<Vec<_>>());
            let (mt, st) = mean_sd(&sel.iter().map(|r| r.tpp).collect::<Vec<_>>());
            agg.push_str(&format!("{},{},{},{mf},{sf},{mt},{st}\n", head(s), m.name(), sel.len()));
        }
    }
    let agg_path = args.aggregate.clone().unwrap_or_else(|| args.output.with_extension("aggregate.csv"));
    write(&agg_path, &agg)
}

fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let k0 = u32::try_from(args.k0).map_err(|_| CliError::new(EXIT_CALIBRATION, "k0 must lie in 1..=20"))?;
    let bound = compute_ca(args.a, k0).map_err(|e| CliError::new(EXIT_CALIBRATION, e))?;
    println!("{},{},{}", args.a, k0, bound.value);
    Ok(())
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(t) = cli.threads {
        set_threads(t);
    }
    let exec = Exec::default();
    let res = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, exec),
        Command::Simulate(a) => cmd_simulate(a, exec),
        Command::CalibrateCa(a) => cmd_calibrate(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_skips_blank_lines_and_header() {
        let m = parse_matrix("x,y,z\n1,2,3\n4,5,6\n\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 2)], 6.0);
        let m = parse_matrix("1,2,3\n\n4,5,6\n").unwrap();
        assert_eq!(m.shape(), (2, 3));
    }

    #[test]
    fn parse_reports_row_and_column() {
        let text = "1,2\n3,4\n5,6\n7,8\n9,oops\n";
        let e = parse_matrix(text).unwrap_err();
        assert_eq!(e.code, EXIT_INPUT);
        assert!(e.message.contains("row 5, column 2"), "{}", e.message);
    }

    #[test]
    fn parse_rejects_ragged_rows() {
        let e = parse_matrix("1,2\n3\n").unwrap_err();
        assert!(e.message.contains("row 2"));
    }

    #[test]
    fn edges_are_one_based() {
        let mut est = GraphEstimate::empty(3);
        assert_eq!(edges_csv(&est), "i,j\n");
        est.edges.insert((0, 2));
        assert_eq!(edges_csv(&est), "i,j\n1,3\n");
        assert_eq!(parse_matrix(&edges_csv(&est)).unwrap()[(0, 1)], 3.0);
    }

    #[test]
    fn config_lines_become_flags() {
        let f = config_flags("# comment\nq = 0.1\nno_timing = true\nverbose = false\nn = 100, 200\n").unwrap();
        let f: Vec<String> = f.into_iter().map(|s| s.into_string().unwrap()).collect();
        assert_eq!(f, ["--q", "0.1", "--no-timing", "--n", "100,200"]);
        assert!(config_flags("oops").is_err());
    }

    #[test]
    fn later_flags_override_earlier() {
        let cli = Cli::try_parse_from(["x", "simulate", "--seed", "1", "--output", "o", "--n", "100", "--q", "0.1", "--n", "200", "--q", "0.3"])
            .unwrap();
        let Command::Simulate(s) = cli.command else { panic!() };
        assert_eq!(s.n, vec![200]);
        assert_eq!(s.q, vec![0.3]);
    }

    #[test]
    fn mean_sd_small_cases() {
        assert_eq!(mean_sd(&[0.5]), (0.5, 0.0));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn calibrate_rejects_bad_input() {
        assert_eq!(run(["x", "calibrate-ca", "--a", "-1"]), EXIT_CALIBRATION);
        assert_eq!(run(["x", "calibrate-ca", "--a", "1", "--k0", "0"]), EXIT_CALIBRATION);
        assert_eq!(run(["x", "calibrate-ca", "--a", "1", "--k0", "-3"]), EXIT_CALIBRATION);
    }
}
