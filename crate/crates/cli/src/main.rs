use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ballnn::avd::{AvdIndex, AvdParams, Mode};
use ballnn::{normalize, Registry};
use ballnn_cli::audit::audit;
use ballnn_cli::bench::{run_cell, BenchConfig, BenchRow, RankRule};
use ballnn_cli::formats::{format_balls, parse_balls, parse_queries};
use ballnn_cli::gen::{generate, Profile};
use ballnn_cli::index::{self, Index};
use ballnn_cli::query::QueryRunner;
use ballnn_cli::{CliError, CliResult};
use clap::{Parser, Subcommand, ValueEnum};

/// Approximate k-th nearest ball queries: generation, indexing, querying,
/// auditing and benchmarks.
#[derive(Parser)]
#[command(name = "ballnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strict,
    Practical,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Strict => Mode::Strict,
            ModeArg::Practical => Mode::Practical,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a random disjoint ball set.
    Gen {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// uniform, clustered or nested-huge
        #[arg(long, default_value = "uniform")]
        profile: Profile,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a registry index, or an AVD when both --k and --eps are given.
    Build {
        balls: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, value_enum, default_value = "practical")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer a query file against an index.
    Query {
        index: PathBuf,
        queries: PathBuf,
        /// Rank for query lines without a k column.
        #[arg(long)]
        k: Option<usize>,
        /// Accuracy for query lines without an eps column.
        #[arg(long)]
        eps: Option<f64>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a ball set, and optionally an index, against brute force.
    Audit {
        balls: PathBuf,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Time builds and queries over a sweep of n; writes CSV.
    Bench {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048,4096")]
        n: Vec<usize>,
        /// An integer, sqrt, or n/<divisor>.
        #[arg(long, default_value = "n/16")]
        k: RankRule,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        eps: Vec<f64>,
        #[arg(long, value_enum, default_value = "practical")]
        mode: ModeArg,
        #[arg(long, default_value = "uniform")]
        profile: Profile,
        /// Queries timed per cell.
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn build(balls: &Path, k: Option<usize>, eps: Option<f64>, mode: Mode, out: &Path) -> CliResult<()> {
    let balls = parse_balls(&read_text(balls)?)?;
    if let Some((a, b)) = ballnn::oracle::check_disjoint(&balls) {
        return Err(CliError::Input(format!("balls {a} and {b} overlap")));
    }
    let start = Instant::now();
    let (index, stats) = match (k, eps) {
        (None, None) => {
            let reg = Registry::build(normalize(&balls, 0.5)?)?;
            let stats = format!(
                "kind registry\nballs {}\nball_tree_nodes {}\ncenters_tree_nodes {}\n",
                reg.len(),
                reg.ball_tree().len(),
                reg.centers_tree().len()
            );
            (Index::Registry(reg), stats)
        }
        (Some(k), Some(eps)) => {
            let reg = Registry::build(normalize(&balls, eps)?)?;
            if k <= 2 * reg.c_d() {
                return Err(CliError::Input(format!(
                    "k = {k} is at most 2 c_d = {}; the AVD needs larger k. Build a registry index \
                     (omit --k and --eps) and pass k per query instead",
                    2 * reg.c_d()
                )));
            }
            let avd = AvdIndex::build(&reg, &AvdParams::new(k, eps, mode))?;
            let s = avd.stats();
            let stats = format!(
                "kind avd\nballs {}\nk {k}\neps {eps}\nzeta1 {}\nclusters {}\ni_cubes {}\ns_cubes {}\n\
                 w_nodes {}\nw_cells {}\nrefined {}\nuncertified {}\n",
                reg.len(),
                avd.parts().zeta1,
                s.clusters,
                s.i_cubes,
                s.s_cubes,
                s.w_nodes,
                s.w_cells,
                s.refined,
                s.uncertified
            );
            let transform = reg.instance().transform.clone();
            (Index::Avd { avd, transform, c_d: reg.c_d() }, stats)
        }
        _ => return Err(CliError::Input("--k and --eps go together (both for an AVD, neither for a registry)".into())),
    };
    let elapsed = start.elapsed();
    let bytes = index::save(&index, out)?;
    print!("{stats}bytes {bytes}\nbuild_ms {:.3}\n", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Gen { dim, n, seed, profile, out } => {
            if dim == 0 || n == 0 {
                return Err(CliError::Input("--dim and --n must be positive".into()));
            }
            let balls = generate(seed, dim, n, profile)?;
            emit(out.as_deref(), &format_balls(&balls))
        }
        Command::Build { balls, k, eps, mode, out } => build(&balls, k, eps, mode.into(), &out),
        Command::Query { index, queries, k, eps, out } => {
            let index = index::load(&index)?;
            let lines = parse_queries(&read_text(&queries)?, index.dim());
            let mut runner = QueryRunner::new(&index);
            runner.default_k = k;
            runner.default_eps = eps;
            let mut text = String::new();
            for rec in runner.run(&lines) {
                text.push_str(&rec.to_string());
                text.push('\n');
            }
            emit(out.as_deref(), &text)
        }
        Command::Audit { balls, index, trials, seed } => {
            let balls = parse_balls(&read_text(&balls)?)?;
            let loaded = index.map(|p| index::load(&p));
            let report = audit(&balls, loaded, trials, seed)?;
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::AuditFailed)
            }
        }
        Command::Bench { dim, n, k, eps, mode, profile, trials, seed, out } => {
            let mut csv = String::from(BenchRow::CSV_HEADER);
            csv.push('\n');
            for &eps in &eps {
                for &n in &n {
                    let cfg = BenchConfig { dim, n, k: k.resolve(n), eps, mode: mode.into(), profile, queries: trials, seed };
                    csv.push_str(&run_cell(&cfg)?.csv());
                    csv.push('\n');
                }
            }
            emit(out.as_deref(), &csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::AuditFailed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
