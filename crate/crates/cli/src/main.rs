mod output;
mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bspline_copula::moments::{format_rational, gamma_moment_closed, to_f64};
use bspline_copula::table::max_correlation_table;
use bspline_copula::{
    BasisSystem, BsplineCopula, Copula, KnotVector, MaxCorrCopula, MomentQuery, ParameterMatrix,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use output::{format_g17, open_output, write_json};

#[derive(Parser)]
#[command(
    name = "bscopula",
    version,
    about = "B-spline copulas from the command line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximum-correlation table over n and degree.
    Table(TableArgs),
    /// Evaluate C and c on a (grid+1) x (grid+1) lattice.
    Eval(EvalArgs),
    /// Draw seeded samples.
    Sample(SampleArgs),
    /// Exact h-moment of a half-line B-spline.
    Moments(MomentArgs),
    /// Run a named verification suite.
    Verify(VerifyArgs),
    /// Maximum correlation for random non-uniform knots with shrinking mesh.
    Explore(ExploreArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CopulaKind {
    Maxcorr,
    Indep,
    File,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
    d: Vec<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long)]
    d: usize,
    /// Number of spans.
    #[arg(long)]
    m: Option<usize>,
    /// Number of basis functions, m + d.
    #[arg(long)]
    n: Option<usize>,
}

impl BasisArgs {
    fn spans(&self) -> Result<usize> {
        let m = match (self.m, self.n) {
            (Some(m), None) => m,
            (None, Some(n)) if n > self.d => n - self.d,
            (None, Some(n)) => bail!("--n {n} leaves no spans for degree {}", self.d),
            (Some(m), Some(n)) if m + self.d == n => m,
            (Some(m), Some(n)) => bail!("--m {m} and --n {n} disagree for degree {}", self.d),
            (None, None) => bail!("one of --m or --n is required"),
        };
        if m < 1 {
            bail!("--m must be at least 1");
        }
        Ok(m)
    }

    fn basis(&self) -> Result<BasisSystem> {
        Ok(BasisSystem::uniform(self.d, self.spans()?)?)
    }
}

#[derive(Args)]
struct CopulaArgs {
    #[command(flatten)]
    basis: BasisArgs,
    #[arg(long, value_enum)]
    copula: Option<CopulaKind>,
    /// Parameter matrix as CSV, n rows of n values.
    #[arg(long = "R", value_name = "PATH")]
    r_path: Option<PathBuf>,
}

enum AnyCopula {
    Max(MaxCorrCopula),
    General(Box<BsplineCopula>),
}

impl AnyCopula {
    fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        Ok(match self {
            AnyCopula::Max(c) => c.cdf(u, v)?,
            AnyCopula::General(c) => c.cdf(u, v)?,
        })
    }

    fn density(&self, u: f64, v: f64) -> Result<f64> {
        Ok(match self {
            AnyCopula::Max(c) => c.density(u, v)?,
            AnyCopula::General(c) => c.density(u, v)?,
        })
    }

    fn sample(&self, count: usize, seed: u64) -> Vec<(f64, f64)> {
        match self {
            AnyCopula::Max(c) => c.sample(count, seed),
            AnyCopula::General(c) => c.sample(count, seed),
        }
    }
}

impl CopulaArgs {
    fn build(&self) -> Result<AnyCopula> {
        let kind = match (self.copula, &self.r_path) {
            (Some(k), _) => k,
            (None, Some(_)) => CopulaKind::File,
            (None, None) => CopulaKind::Maxcorr,
        };
        let basis = self.basis.basis()?;
        Ok(match kind {
            CopulaKind::Maxcorr => AnyCopula::Max(MaxCorrCopula::new(basis)),
            CopulaKind::Indep => AnyCopula::General(Box::new(BsplineCopula::independence(basis)?)),
            CopulaKind::File => {
                let path = self
                    .r_path
                    .as_deref()
                    .context("--copula file needs --R <path>")?;
                let rows = read_matrix(path)?;
                let params = ParameterMatrix::from_rows(&rows, basis.weights())?;
                AnyCopula::General(Box::new(BsplineCopula::new(basis, params)?))
            }
        })
    }
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().with_context(|| {
                    format!(
                        "{}: row {}: not a number: {field:?}",
                        path.display(),
                        line + 1
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: empty matrix", path.display());
    }
    Ok(rows)
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    copula: CopulaArgs,
    #[arg(long, default_value_t = 10)]
    grid: usize,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    copula: CopulaArgs,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MomentArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, allow_hyphen_values = true)]
    i: i64,
    #[arg(long)]
    h: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Tp,
    FhConvergence,
    Identities,
    #[value(alias = "lemma31")]
    MomentVectors,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Degrees (tp: 0,1,2,3; fh-convergence: 0,1,2; moment-vectors: 0..=6).
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Span counts (tp: 1..=6; fh-convergence: 2,4,8,16,32; moment-vectors: up to 10).
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Largest TP order for C*, c* and the survival function.
    #[arg(long, default_value_t = 4)]
    r_max: usize,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    /// Random Bernstein minors compared in the identities suite.
    #[arg(long, default_value_t = 1000)]
    instances: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExploreArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32")]
    m: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest relative perturbation of the uniform interior knots.
    #[arg(long, default_value_t = 0.4)]
    jitter: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when a requested check fails.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Table(args) => cmd_table(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Moments(args) => cmd_moments(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Explore(args) => cmd_explore(args),
    }
}

fn cmd_table(args: TableArgs) -> Result<bool> {
    if args.n_max < 2 {
        bail!("--n-max must be at least 2");
    }
    let table = max_correlation_table(args.n_max, &args.d)?;
    let mut out = open_output(args.out.as_deref())?;
    match args.format {
        Format::Json => write_json(&mut out, &table)?,
        Format::Csv => {
            let mut header = vec!["n".to_string(), "bernstein".to_string()];
            header.extend(args.d.iter().map(|d| format!("d={d}")));
            writeln!(out, "{}", header.join(","))?;
            for row in &table.rows {
                let mut fields = vec![row.n.to_string(), row.bernstein.render()];
                fields.extend(row.cells.iter().map(|c| c.render()));
                writeln!(out, "{}", fields.join(","))?;
            }
        }
    }
    out.flush()?;
    Ok(true)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GridPoint {
    u: f64,
    v: f64,
    #[serde(rename = "C")]
    cdf: f64,
    #[serde(rename = "c")]
    density: f64,
}

fn cmd_eval(args: EvalArgs) -> Result<bool> {
    if args.grid < 2 {
        bail!("--grid must be at least 2");
    }
    let cop = args.copula.build()?;
    let g = args.grid as f64;
    let mut points = Vec::with_capacity((args.grid + 1) * (args.grid + 1));
    for i in 0..=args.grid {
        for j in 0..=args.grid {
            let (u, v) = (i as f64 / g, j as f64 / g);
            points.push(GridPoint {
                u,
                v,
                cdf: cop.cdf(u, v)?,
                density: cop.density(u, v)?,
            });
        }
    }
    let mut out = open_output(args.out.as_deref())?;
    match args.format {
        Format::Json => write_json(&mut out, &points)?,
        Format::Csv => {
            writeln!(out, "u,v,C,c")?;
            for p in &points {
                writeln!(
                    out,
                    "{},{},{},{}",
                    format_g17(p.u),
                    format_g17(p.v),
                    format_g17(p.cdf),
                    format_g17(p.density)
                )?;
            }
        }
    }
    out.flush()?;
    Ok(true)
}

fn cmd_sample(args: SampleArgs) -> Result<bool> {
    let cop = args.copula.build()?;
    let pairs = cop.sample(args.count, args.seed);
    let mut out = open_output(args.out.as_deref())?;
    match args.format {
        Format::Json => {
            let rows: Vec<[f64; 2]> = pairs.iter().map(|&(u, v)| [u, v]).collect();
            write_json(&mut out, &rows)?;
        }
        Format::Csv => {
            writeln!(out, "u,v")?;
            for (u, v) in pairs {
                writeln!(out, "{},{}", format_g17(u), format_g17(v))?;
            }
        }
    }
    out.flush()?;
    Ok(true)
}

#[derive(Serialize)]
struct MomentOutput {
    d: usize,
    i: i64,
    h: usize,
    exact: String,
    decimal: f64,
}

fn cmd_moments(args: MomentArgs) -> Result<bool> {
    let value = gamma_moment_closed(MomentQuery::new(args.d, args.i, args.h));
    let mut out = open_output(args.out.as_deref())?;
    write_json(
        &mut out,
        &MomentOutput {
            d: args.d,
            i: args.i,
            h: args.h,
            exact: format_rational(&value),
            decimal: to_f64(&value),
        },
    )?;
    out.flush()?;
    Ok(true)
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let mut out = open_output(args.out.as_deref())?;
    let pass = match args.suite {
        Suite::Tp => {
            let opts = verify::TpOptions {
                degrees: args.d.clone().unwrap_or_else(|| vec![0, 1, 2, 3]),
                spans: args.m.clone().unwrap_or_else(|| (1..=6).collect()),
                max_order: args.r_max,
                trials: args.trials,
                seed: args.seed,
            };
            let report = verify::tp_suite(&opts)?;
            write_json(&mut out, &report)?;
            report.pass
        }
        Suite::FhConvergence => {
            let degrees = args.d.clone().unwrap_or_else(|| vec![0, 1, 2]);
            let spans = args.m.clone().unwrap_or_else(|| vec![2, 4, 8, 16, 32]);
            let report = verify::fh_suite(&degrees, &spans, args.grid)?;
            write_json(&mut out, &report)?;
            report.pass
        }
        Suite::Identities => {
            let report = verify::identity_suite(args.n_max, args.instances, args.seed)?;
            write_json(&mut out, &report)?;
            report.pass
        }
        Suite::MomentVectors => {
            let d_max = args
                .d
                .as_ref()
                .and_then(|d| d.iter().max().copied())
                .unwrap_or(6);
            let m_max = args
                .m
                .as_ref()
                .and_then(|m| m.iter().max().copied())
                .unwrap_or(10);
            let report = verify::moment_vector_suite(d_max, m_max)?;
            write_json(&mut out, &report)?;
            report.pass
        }
    };
    out.flush()?;
    Ok(pass)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ExploreRow {
    m: usize,
    mesh: f64,
    interior: Vec<f64>,
    correlation: f64,
    uniform_correlation: f64,
}

/// Interior knots `i/m` moved by up to `jitter/(2m)`; reports the maximum
/// correlation next to the uniform-knot value. Makes no convergence claim.
fn cmd_explore(args: ExploreArgs) -> Result<bool> {
    if !(0.0..1.0).contains(&args.jitter) {
        bail!("--jitter must lie in [0, 1)");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut rows = Vec::new();
    for &m in &args.m {
        if m < 1 {
            bail!("--m values must be at least 1");
        }
        let step = 1.0 / m as f64;
        let interior: Vec<f64> = (1..m)
            .map(|i| i as f64 * step + args.jitter * step * (rng.gen::<f64>() - 0.5))
            .collect();
        let knots = KnotVector::new(args.d, interior.clone())?;
        let mesh = (0..knots.spans())
            .map(|s| knots.breakpoint(s + 1) - knots.breakpoint(s))
            .fold(0.0, f64::max);
        let cop = MaxCorrCopula::new(BasisSystem::new(knots));
        rows.push(ExploreRow {
            m,
            mesh,
            interior,
            correlation: cop.correlation(),
            uniform_correlation: MaxCorrCopula::uniform(args.d, m)?.correlation(),
        });
    }
    let mut out = open_output(args.out.as_deref())?;
    write_json(&mut out, &rows)?;
    out.flush()?;
    Ok(true)
}
