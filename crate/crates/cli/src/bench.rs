//! Build and query timing sweeps, one CSV row per `(d, n, k, eps)`.

use std::str::FromStr;
use std::time::Instant;

use ballnn::avd::{AvdIndex, AvdParams, Mode};
use ballnn::{normalize, Registry};

use crate::error::CliResult;
use crate::gen::{generate, uniform_points, Profile};
use crate::index::{encode_avd, encode_registry};

/// How `k` is chosen for each `n` of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RankRule {
    Fixed(usize),
    /// `ceil(sqrt(n))`
    Sqrt,
    /// `n / divisor`, at least 1.
    Fraction(usize),
}

impl RankRule {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            RankRule::Fixed(k) => k,
            RankRule::Sqrt => (n as f64).sqrt().ceil() as usize,
            RankRule::Fraction(div) => (n / div).max(1),
        }
    }
}

impl FromStr for RankRule {
    type Err = String;

    /// `sqrt`, `n/<divisor>` or a plain integer.
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "sqrt" {
            return Ok(RankRule::Sqrt);
        }
        if let Some(div) = s.strip_prefix("n/") {
            return match div.parse() {
                Ok(d) if d >= 1 => Ok(RankRule::Fraction(d)),
                _ => Err(format!("bad divisor in {s:?}")),
            };
        }
        match s.parse() {
            Ok(k) if k >= 1 => Ok(RankRule::Fixed(k)),
            _ => Err(format!("k must be a positive integer, sqrt or n/<divisor>, got {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub mode: Mode,
    pub profile: Profile,
    pub queries: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub config: BenchConfig,
    pub registry_build_ns: u128,
    pub registry_bytes: usize,
    pub registry_median_ns: u128,
    pub avd_build_ns: u128,
    pub avd_bytes: usize,
    pub avd_nodes: usize,
    pub avd_cells: usize,
    pub avd_refined: usize,
    pub avd_median_ns: u128,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "d,n,k,eps,mode,registry_build_ms,registry_bytes,registry_median_ns,\
avd_build_ms,avd_bytes,avd_nodes,avd_cells,avd_refined,avd_median_ns,cells_per_n_over_k";

    /// `|W| / (n / k)`, the size constant of the AVD.
    pub fn size_constant(&self) -> f64 {
        self.avd_cells as f64 * self.config.k as f64 / self.config.n as f64
    }

    pub fn csv(&self) -> String {
        let c = &self.config;
        let mode = match c.mode {
            Mode::Strict => "strict",
            Mode::Practical => "practical",
        };
        format!(
            "{},{},{},{},{mode},{:.3},{},{},{:.3},{},{},{},{},{},{:.4}",
            c.dim,
            c.n,
            c.k,
            c.eps,
            self.registry_build_ns as f64 / 1e6,
            self.registry_bytes,
            self.registry_median_ns,
            self.avd_build_ns as f64 / 1e6,
            self.avd_bytes,
            self.avd_nodes,
            self.avd_cells,
            self.avd_refined,
            self.avd_median_ns,
            self.size_constant(),
        )
    }
}

fn median(mut v: Vec<u128>) -> u128 {
    v.sort_unstable();
    v.get(v.len() / 2).copied().unwrap_or(0)
}

/// Generates one instance, builds both structures over the same
/// normalization and times `queries` random queries on each. Timing excludes
/// generation and serialization.
pub fn run_cell(cfg: &BenchConfig) -> CliResult<BenchRow> {
    let balls = generate(cfg.seed, cfg.dim, cfg.n, cfg.profile)?;
    let inst = normalize(&balls, cfg.eps)?;
    let start = Instant::now();
    let reg = Registry::build(inst)?;
    let registry_build_ns = start.elapsed().as_nanos();
    let start = Instant::now();
    let avd = AvdIndex::build(&reg, &AvdParams::new(cfg.k, cfg.eps, cfg.mode))?;
    let avd_build_ns = start.elapsed().as_nanos();
    let delta = reg.instance().delta();
    let points = uniform_points(cfg.seed ^ 0x9e37_79b9, cfg.dim, cfg.queries, 0.5 - delta, 0.5 + delta);
    let mut reg_times = Vec::with_capacity(points.len());
    let mut avd_times = Vec::with_capacity(points.len());
    for q in &points {
        let start = Instant::now();
        std::hint::black_box(reg.knn(q, cfg.k, cfg.eps)?);
        reg_times.push(start.elapsed().as_nanos());
        let start = Instant::now();
        std::hint::black_box(avd.query(q)?);
        avd_times.push(start.elapsed().as_nanos());
    }
    let stats = avd.stats();
    Ok(BenchRow {
        config: cfg.clone(),
        registry_build_ns,
        registry_bytes: encode_registry(&reg).len(),
        registry_median_ns: median(reg_times),
        avd_build_ns,
        avd_bytes: encode_avd(&avd, &reg.instance().transform, reg.c_d()).len(),
        avd_nodes: stats.w_nodes,
        avd_cells: stats.w_cells,
        avd_refined: stats.refined,
        avd_median_ns: median(avd_times),
    })
}
