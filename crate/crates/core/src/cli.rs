//! Command-line front end.
//!
//! Every command writes `#`-prefixed metadata lines followed by a CSV body
//! (or an aligned rendering of the same rows with `--format human`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{sample_gnm, sample_gnp, Graph, SeedSpec};
use crate::moments::{
    divisor_k_near_gamma, gamma_ln_base, rate_diagnostic, step_diagnostics, mu, mu_bruteforce,
    parse_fraction, total_pairs, typical_k, Density, MomentMode, MomentParams,
};
use crate::numerics::LogValue;
use crate::partitions::enumerate_equipartitions;
use crate::secondmoment::{constants, r1_sum_estimate, r3_count_bound, ratio_bruteforce, t_sequence, RatioMethod};
use crate::solver::{
    chromatic_colouring, equitable_chromatic_number, equitable_threshold, greedy_equitable_bound, ColoringWitness,
};
use crate::subsequence::{find_range, verify_nj, SubseqRow, THRESHOLD_LOG_BASE};

pub const THREADS_ENV: &str = "EQUICHROM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "equichrom", version, about = "Equitable colourings of dense random graphs")]
struct Cli {
    /// Output rendering.
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Write the table here instead of standard output.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Human,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// First moments mu_{n,k} and mu_bar_{n,k}.
    Moments(MomentsArgs),
    /// The n_j subsequence with verification columns.
    Subseq(SubseqArgs),
    /// Write seeded random graphs as DIMACS files.
    Sample(SampleArgs),
    /// Solve one graph file.
    Solve(SolveArgs),
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Debug, Args)]
struct DensityArg {
    /// Edge density as an exact fraction, e.g. 1/2.
    #[arg(long)]
    p: String,
    /// Accept any 0 < p < 1.
    #[arg(long)]
    allow_any_density: bool,
}

impl DensityArg {
    fn density(&self) -> Result<Density> {
        let ratio = parse_fraction(&self.p)?;
        if self.allow_any_density {
            Density::with_override(ratio)
        } else {
            Density::new(ratio)
        }
    }
}

#[derive(Debug, Args)]
struct MomentsArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    k: u64,
    #[command(flatten)]
    density: DensityArg,
    #[arg(long, default_value = "log")]
    mode: String,
}

#[derive(Debug, Args)]
struct SubseqArgs {
    #[command(flatten)]
    density: DensityArg,
    #[arg(long)]
    j_min: u64,
    #[arg(long)]
    j_max: u64,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    /// Exact edge count, G(n, m).
    #[arg(long, conflicts_with = "p", required_unless_present = "p")]
    m: Option<usize>,
    /// Edge probability, G(n, p).
    #[arg(long)]
    p: Option<String>,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for the graph files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMode {
    Chi,
    ChiEq,
    Threshold,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = SolveMode::ChiEq)]
    mode: SolveMode,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Witness CSV path; printed after the result row when absent.
    #[arg(long)]
    witness: Option<PathBuf>,
    #[arg(long)]
    no_timings: bool,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// chi, equitable chi and max degree over sampled G(n, m).
    Concentration(ConcentrationArgs),
}

#[derive(Debug, Args)]
struct ConcentrationArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    density: DensityArg,
    #[arg(long, default_value_t = 100)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds per sample.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Leave out the wall-clock column so output is byte-reproducible.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// Brute-force cross-checks; exits 1 on any mismatch.
    Oracles(OraclesArgs),
    /// Growth-rate and overlap diagnostics over a list of n.
    Lemmas(LemmasArgs),
}

#[derive(Debug, Args)]
struct OraclesArgs {
    #[arg(long, default_value_t = 10)]
    n_max: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random graphs for the solver check.
    #[arg(long, default_value_t = 100)]
    graphs: u64,
}

#[derive(Debug, Args)]
struct LemmasArgs {
    #[command(flatten)]
    density: DensityArg,
    #[arg(long, value_delimiter = ',', default_value = "10000,100000,1000000")]
    n_list: Vec<u64>,
}

struct Table {
    meta: Vec<(String, String)>,
    body: Vec<u8>,
    footer: Vec<String>,
}

impl Table {
    fn new(command: &str) -> Self {
        Table {
            meta: vec![
                ("equichrom".into(), env!("CARGO_PKG_VERSION").into()),
                ("command".into(), command.into()),
            ],
            body: Vec::new(),
            footer: Vec::new(),
        }
    }

    fn meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    fn rows<T: Serialize>(&mut self, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        self.body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(())
    }

    fn render(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        writeln!(out, "# generated_unix: {now}")?;
        match format {
            Format::Csv => out.write_all(&self.body)?,
            Format::Human => {
                let records: Vec<Vec<String>> = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .flexible(true)
                    .comment(Some(b'#'))
                    .from_reader(self.body.as_slice())
                    .records()
                    .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
                    .collect::<std::result::Result<_, _>>()?;
                let cols = records.iter().map(Vec::len).max().unwrap_or(0);
                let widths: Vec<usize> = (0..cols)
                    .map(|c| records.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0))
                    .collect();
                for r in &records {
                    let line: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
                    writeln!(out, "{}", line.join("  ").trim_end())?;
                }
            }
        }
        for line in &self.footer {
            writeln!(out, "# {line}")?;
        }
        Ok(())
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Timeout => EXIT_TIMEOUT,
        Error::Io(_) | Error::Csv(_) | Error::ZeroFirstMoment => EXIT_MISMATCH,
        _ => EXIT_USAGE,
    }
}

/// Runs the CLI with the process's standard streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with(argv, &mut io::stdout().lock(), &mut io::stderr().lock())
}

/// Runs the CLI writing the table to `out` and diagnostics to `err`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    configure_threads();
    match dispatch(&cli) {
        Ok((table, code)) => {
            let written = match &cli.output {
                Some(path) => fs::File::create(path)
                    .map_err(Error::from)
                    .and_then(|mut f| table.render(cli.format, &mut f)),
                None => table.render(cli.format, out),
            };
            match written {
                Ok(()) => code,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    exit_code(&e)
                }
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(Table, i32)> {
    match &cli.command {
        Command::Moments(a) => moments_cmd(a).map(|t| (t, EXIT_OK)),
        Command::Subseq(a) => subseq_cmd(a).map(|t| (t, EXIT_OK)),
        Command::Sample(a) => sample_cmd(a).map(|t| (t, EXIT_OK)),
        Command::Solve(a) => solve_cmd(a).map(|t| (t, EXIT_OK)),
        Command::Experiment(ExperimentCommand::Concentration(a)) => concentration_cmd(a).map(|t| (t, EXIT_OK)),
        Command::Verify(VerifyCommand::Oracles(a)) => oracles_cmd(a),
        Command::Verify(VerifyCommand::Lemmas(a)) => lemmas_cmd(a).map(|t| (t, EXIT_OK)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsRow {
    pub n: u64,
    pub k: u64,
    pub p: String,
    pub mode: String,
    pub m: u64,
    pub epsilon: String,
    pub f: u64,
    /// Exact fraction in exact mode, decimal otherwise.
    pub mu: String,
    pub mu_bar: String,
    pub ln_mu: f64,
    pub ln_mu_bar: f64,
}

fn decimal(v: &LogValue) -> String {
    let x = v.to_f64();
    if x.is_finite() && (x == 0.0 || x.abs() >= 1e-300) {
        format!("{x:e}")
    } else {
        format!("exp({})", v.ln())
    }
}

fn moments_cmd(a: &MomentsArgs) -> Result<Table> {
    let p = a.density.density()?;
    let mode: MomentMode = a.mode.parse()?;
    let params = MomentParams::new(a.n, a.k, &p)?;
    let r = mu(&params, mode)?;
    let (mu_s, mu_bar_s) = match &r.exact {
        Some((m, mb)) => (m.to_string(), mb.to_string()),
        None => (decimal(&r.mu), decimal(&r.mu_bar)),
    };
    let row = MomentsRow {
        n: a.n,
        k: a.k,
        p: p.to_string(),
        mode: mode.to_string(),
        m: params.m,
        epsilon: params.epsilon.to_string(),
        f: params.forbidden(),
        mu: mu_s,
        mu_bar: mu_bar_s,
        ln_mu: r.mu.ln(),
        ln_mu_bar: r.mu_bar.ln(),
    };
    let mut t = Table::new("moments");
    t.meta("params", format!("n={} k={} p={} mode={}", a.n, a.k, p, mode));
    t.meta("seed", "none");
    t.rows(&[row])?;
    Ok(t)
}

fn subseq_cmd(a: &SubseqArgs) -> Result<Table> {
    let p = a.density.density()?;
    if a.j_min < 3 || a.j_max < a.j_min {
        return Err(Error::InvalidRange(format!("need 3 <= j-min <= j-max, got {}..{}", a.j_min, a.j_max)));
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for (j, found) in find_range(a.j_min, a.j_max, &p) {
        match found {
            Ok(entry) => rows.push(SubseqRow::new(&entry, &verify_nj(&entry, &p)?)),
            Err(Error::NotFound(_)) => missing.push(j),
            Err(e) => return Err(e),
        }
    }
    let mut t = Table::new("subseq");
    t.meta("params", format!("p={} j_min={} j_max={}", p, a.j_min, a.j_max));
    t.meta("seed", "none");
    t.meta("threshold_log_base", THRESHOLD_LOG_BASE);
    t.meta(
        "not_found",
        if missing.is_empty() {
            "none".to_string()
        } else {
            missing.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        },
    );
    t.rows(&rows)?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: u64,
    pub file: String,
    pub n: usize,
    pub edges: usize,
}

fn sample_cmd(a: &SampleArgs) -> Result<Table> {
    fs::create_dir_all(&a.out)?;
    let p = a.p.as_deref().map(parse_fraction).transpose()?;
    let graphs: Vec<Graph> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let seed = SeedSpec::new(a.seed, i);
            match (&p, a.m) {
                (Some(p), _) => sample_gnp(a.n, p, seed),
                (None, Some(m)) => sample_gnm(a.n, m, seed),
                (None, None) => unreachable!("clap requires --m or --p"),
            }
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        let name = format!("graph_{i:05}.dimacs");
        g.write_dimacs(a.out.join(&name))?;
        rows.push(SampleRow {
            index: i as u64,
            file: name,
            n: g.n(),
            edges: g.edge_count(),
        });
    }
    let mut t = Table::new("sample");
    let model = match (&a.p, a.m) {
        (Some(p), _) => format!("G(n,p) p={p}"),
        (None, Some(m)) => format!("G(n,m) m={m}"),
        _ => unreachable!(),
    };
    t.meta("params", format!("n={} {} count={}", a.n, model, a.count));
    t.meta("seed", a.seed);
    t.rows(&rows)?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRow {
    pub input: String,
    pub n: usize,
    pub edges: usize,
    pub mode: String,
    pub value: usize,
    pub time_ms: Option<u64>,
}

fn solve_cmd(a: &SolveArgs) -> Result<Table> {
    let g = Graph::read_dimacs(&a.input)?;
    let limit = a.time_limit.map(Duration::from_secs_f64);
    let start = Instant::now();
    let (mode, value, witness) = match a.mode {
        SolveMode::Chi => {
            let (k, colouring) = chromatic_colouring(&g, limit)?;
            ("chi", k, Some(ColoringWitness { assignment: colouring, k }))
        }
        SolveMode::ChiEq => {
            let (k, w) = equitable_chromatic_number(&g, limit)?;
            ("chi-eq", k, Some(w))
        }
        SolveMode::Threshold => ("threshold", equitable_threshold(&g, limit)?, None),
    };
    let elapsed = start.elapsed().as_millis() as u64;
    let row = SolveRow {
        input: a.input.display().to_string(),
        n: g.n(),
        edges: g.edge_count(),
        mode: mode.into(),
        value,
        time_ms: (!a.no_timings).then_some(elapsed),
    };
    let mut t = Table::new("solve");
    t.meta("params", format!("input={} mode={}", a.input.display(), mode));
    t.meta("seed", "none");
    t.rows(&[row])?;
    if let Some(w) = witness {
        match &a.witness {
            Some(path) => w.write_csv(fs::File::create(path)?)?,
            None => {
                let mut buf = Vec::new();
                w.write_csv(&mut buf)?;
                t.body.extend_from_slice(b"# witness\n");
                t.body.extend_from_slice(&buf);
            }
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub sample: u64,
    pub n: usize,
    pub m: usize,
    pub max_degree: usize,
    pub chi: Option<usize>,
    pub chi_eq: Option<usize>,
    pub greedy_eq: usize,
    /// `ok` or `timeout`.
    pub status: String,
    /// `chi <= chi_eq <= max_degree + 1`; empty when censored.
    pub chain_holds: Option<bool>,
    pub time_ms: Option<u64>,
}

/// One sample of the concentration experiment.
pub fn concentration_sample(n: usize, m: usize, seed: SeedSpec, limit: Duration) -> Result<ConcentrationRow> {
    let g = sample_gnm(n, m, seed)?;
    let start = Instant::now();
    let deadline = start + limit;
    let remaining = || deadline.saturating_duration_since(Instant::now());
    let solved = chromatic_colouring(&g, Some(remaining()))
        .and_then(|(chi, _)| equitable_chromatic_number(&g, Some(remaining())).map(|(eq, _)| (chi, eq)));
    let (greedy, _) = greedy_equitable_bound(&g, seed);
    let delta = g.max_degree();
    let (chi, chi_eq, status) = match solved {
        Ok((c, e)) => (Some(c), Some(e), "ok"),
        Err(Error::Timeout) => (None, None, "timeout"),
        Err(e) => return Err(e),
    };
    Ok(ConcentrationRow {
        sample: seed.stream_index,
        n,
        m,
        max_degree: delta,
        chi,
        chi_eq,
        greedy_eq: greedy,
        status: status.into(),
        chain_holds: chi.zip(chi_eq).map(|(c, e)| c <= e && e <= delta + 1 && e <= greedy),
        time_ms: Some(start.elapsed().as_millis() as u64),
    })
}

fn concentration_cmd(a: &ConcentrationArgs) -> Result<Table> {
    let p = a.density.density()?;
    let m = p.edges(total_pairs(a.n as u64)) as usize;
    let limit = Duration::from_secs_f64(a.time_limit);
    let mut rows: Vec<ConcentrationRow> = (0..a.samples)
        .into_par_iter()
        .map(|i| concentration_sample(a.n, m, SeedSpec::new(a.seed, i), limit))
        .collect::<Result<_>>()?;
    if a.no_timings {
        for r in &mut rows {
            r.time_ms = None;
        }
    }
    let mut hist: BTreeMap<usize, u64> = BTreeMap::new();
    let mut timeouts = 0;
    for r in &rows {
        match r.chi_eq {
            Some(k) => *hist.entry(k).or_default() += 1,
            None => timeouts += 1,
        }
    }
    let mut t = Table::new("experiment concentration");
    t.meta("params", format!("n={} p={} m={} samples={}", a.n, p, m, a.samples));
    t.meta("seed", a.seed);
    t.rows(&rows)?;
    t.footer.push(format!(
        "histogram chi_eq: {}",
        hist.iter().map(|(k, c)| format!("{k}={c}")).collect::<Vec<_>>().join(" ")
    ));
    t.footer.push(format!("timeouts: {timeouts}"));
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub check: String,
    pub cases: u64,
    pub mismatches: u64,
}

/// Least `k` for which some enumerated equipartition is an independent
/// partition of `g`.
pub fn exhaustive_equitable_chromatic_number(g: &Graph) -> Result<usize> {
    for k in 1..=g.n() {
        let found = enumerate_equipartitions(g.n() as u64, k as u64)?
            .any(|part| part.parts().iter().all(|c| g.is_independent(c)));
        if found {
            return Ok(k);
        }
    }
    Err(Error::InvalidRange("graph has no vertices".into()))
}

fn oracles_cmd(a: &OraclesArgs) -> Result<(Table, i32)> {
    let densities: Vec<Density> = [(1, 4), (1, 2), (3, 4)]
        .iter()
        .map(|&(x, y)| Density::from_fraction(x, y))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();

    let (mut cases, mut bad, mut log_bad) = (0, 0, 0);
    for p in &densities {
        for n in 2..=a.n_max.min(10) {
            for k in 2..=n {
                let params = MomentParams::new(n, k, p)?;
                let exact = mu(&params, MomentMode::Exact)?.exact.expect("exact").0;
                cases += 1;
                if exact != mu_bruteforce(n, k, p)? {
                    bad += 1;
                }
                let lg = mu(&params, MomentMode::LogDomain)?.mu.ln();
                let ex = LogValue::from_rational(&exact).ln();
                if (lg - ex).abs() > 1e-9 * ex.abs().max(1.0) {
                    log_bad += 1;
                }
            }
        }
    }
    rows.push(OracleRow { check: "first_moment_exact_vs_enumeration".into(), cases, mismatches: bad });
    rows.push(OracleRow { check: "first_moment_log_vs_exact".into(), cases, mismatches: log_bad });

    let (mut cases, mut bad) = (0, 0);
    for p in &densities[..2] {
        for n in 2..=a.n_max.min(9) {
            for k in 2..=n {
                let pe = ratio_bruteforce(n, k, p, RatioMethod::PairEnum);
                let od = ratio_bruteforce(n, k, p, RatioMethod::OverlapDecomposition);
                match (pe, od) {
                    (Err(Error::ZeroFirstMoment), Err(Error::ZeroFirstMoment)) => {}
                    (Ok(x), Ok(y)) => {
                        cases += 1;
                        if x.ratio != y.ratio || x.ratio < BigRational::from_integer(1.into()) {
                            bad += 1;
                        }
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
            }
        }
    }
    rows.push(OracleRow { check: "second_moment_pair_enum_vs_overlap".into(), cases, mismatches: bad });

    let n_cap = a.n_max.clamp(1, 8) as usize;
    let (mut cases, mut bad) = (0, 0);
    for i in 0..a.graphs {
        let mut rng = SeedSpec::new(a.seed, 2 * i).rng();
        let n = rng.gen_range(1..=n_cap);
        let m = rng.gen_range(0..=n * (n - 1) / 2);
        let g = sample_gnm(n, m, SeedSpec::new(a.seed, 2 * i + 1))?;
        let (k, w) = equitable_chromatic_number(&g, None)?;
        let chi = chromatic_colouring(&g, None)?.0;
        cases += 1;
        if k != exhaustive_equitable_chromatic_number(&g)? || !w.validate(&g) || chi > k {
            bad += 1;
        }
    }
    rows.push(OracleRow { check: "solver_vs_exhaustive".into(), cases, mismatches: bad });

    let code = if rows.iter().any(|r| r.mismatches > 0) { EXIT_MISMATCH } else { EXIT_OK };
    let mut t = Table::new("verify oracles");
    t.meta("params", format!("n_max={} graphs={}", a.n_max, a.graphs));
    t.meta("seed", a.seed);
    t.rows(&rows)?;
    Ok((t, code))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRow {
    pub check: String,
    pub n: u64,
    pub k: Option<u64>,
    pub j: Option<u64>,
    /// `x` for mu_bar_rate, `rho` for overlap_terms, `R_3` for overlap_count_bound.
    pub param: Option<f64>,
    pub value: f64,
    pub reference: Option<f64>,
    pub gap: Option<f64>,
}

/// Number of `(r_3, .., r_j)` with nonnegative entries summing to `r3`,
/// counted one by one.
pub fn count_compositions(r3: u64, slots: u64) -> u64 {
    fn go(left: u64, slots: u64) -> u64 {
        match slots {
            0 => u64::from(left == 0),
            _ => (0..=left).map(|x| go(left - x, slots - 1)).sum(),
        }
    }
    go(r3, slots)
}

/// Smallest `n >= 3` with `gamma(n) >= j`.
pub fn first_n_with_gamma(j: u64, p: &Density) -> Result<u64> {
    let below = |n: u64| gamma_ln_base(n, p.ln_b()).map_or(true, |g| g < j as f64);
    let mut hi = 3;
    while below(hi) {
        hi *= 2;
        if hi > crate::moments::MAX_N {
            return Err(Error::ScanBudget(j));
        }
    }
    let mut lo = hi / 2;
    if !below(lo) {
        return Ok(lo.max(3));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// The diagnostic table behind `verify lemmas`.
pub fn lemma_rows(p: &Density, n_list: &[u64]) -> Result<Vec<LemmaRow>> {
    let consts = constants(p)?;
    let mut rows = Vec::new();
    for &n in n_list {
        for x in [-1.0, 0.0, 1.0] {
            let d = rate_diagnostic(n, x, p)?;
            rows.push(LemmaRow {
                check: "mu_bar_rate".into(),
                n,
                k: Some(d.k),
                j: None,
                param: Some(x),
                value: d.mu_bar_log_b_per_n,
                reference: Some(d.predicted),
                gap: Some(d.slack),
            });
        }
        let k = typical_k(n, p)?;
        let s = step_diagnostics(n, k, p)?;
        rows.push(LemmaRow {
            check: "mu_k_step".into(),
            n,
            k: Some(k),
            j: None,
            param: None,
            value: s.mu_step_ln,
            reference: Some(s.mu_step_bound_ln),
            gap: Some(s.mu_step_ln - s.mu_step_bound_ln),
        });
        rows.push(LemmaRow {
            check: "mu_bar_k_step".into(),
            n,
            k: Some(k),
            j: None,
            param: None,
            value: s.mu_bar_step_scaled,
            reference: None,
            gap: None,
        });
        rows.push(LemmaRow {
            check: "mu_n_step".into(),
            n,
            k: Some(k),
            j: None,
            param: None,
            value: s.vertex_step_ln,
            reference: Some(s.vertex_step_reference_ln),
            gap: Some(s.vertex_step_offset),
        });
        let kd = divisor_k_near_gamma(n, p)?;
        let params = MomentParams::new(n, kd, p)?;
        let ts = t_sequence(&params, consts.c)?;
        if let Some(v) = ts.max_log_n_from_3 {
            let reference = -consts.c_tilde + 0.1;
            rows.push(LemmaRow {
                check: "overlap_terms".into(),
                n,
                k: Some(kd),
                j: Some(ts.j),
                param: Some(consts.c),
                value: v,
                reference: Some(reference),
                gap: Some(v - reference),
            });
        }
        rows.push(LemmaRow {
            check: "small_overlap_sum".into(),
            n,
            k: Some(kd),
            j: Some(ts.j),
            param: None,
            value: r1_sum_estimate(&params)?,
            reference: None,
            gap: None,
        });
    }
    for j in 3..=8u64 {
        let n = first_n_with_gamma(j, p)?;
        for r3 in 0..=4u64 {
            let count = count_compositions(r3, j - 2);
            let bound = r3_count_bound(r3, n, p.b()).ln();
            let value = (count as f64).ln();
            rows.push(LemmaRow {
                check: "overlap_count_bound".into(),
                n,
                k: None,
                j: Some(j),
                param: Some(r3 as f64),
                value,
                reference: Some(bound),
                gap: Some(value - bound),
            });
        }
    }
    Ok(rows)
}

fn lemmas_cmd(a: &LemmasArgs) -> Result<Table> {
    let p = a.density.density()?;
    let rows = lemma_rows(&p, &a.n_list)?;
    let mut t = Table::new("verify lemmas");
    t.meta(
        "params",
        format!(
            "p={} n_list={}",
            p,
            a.n_list.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
        ),
    );
    t.meta("seed", "none");
    t.rows(&rows)?;
    Ok(t)
}
