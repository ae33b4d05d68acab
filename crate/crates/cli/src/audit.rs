//! Oracle-backed audit of a ball set and, optionally, an index built from it.

use std::fmt;

use ballnn::avd::AvdIndex;
use ballnn::knn::constant_factor_kth;
use ballnn::oracle::{self, exact_counts, exact_kth_distance};
use ballnn::quorum::{ball_quorum, verify_quorum};
use ballnn::{normalize, Ball, NormalizedInstance, Registry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, CliResult};
use crate::index::Index;

/// Cells spot-checked by the AVD suite.
const AVD_CELL_SAMPLES: usize = 200;
/// Relative tolerance when matching an index's balls to the ball file.
const MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: usize,
    /// Suite-specific worst case, e.g. the largest relative error.
    pub worst: f64,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport { name, ..Default::default() }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.notes.len() < 5 {
                self.notes.push(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AuditReport {
    /// Set when the index file failed to load; no suite runs then.
    pub integrity_error: Option<String>,
    pub suites: Vec<SuiteReport>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.integrity_error.is_none() && self.suites.iter().all(SuiteReport::passed)
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(e) = &self.integrity_error {
            return writeln!(f, "integrity FAIL {e}");
        }
        for s in &self.suites {
            let verdict = if s.passed() { "PASS" } else { "FAIL" };
            writeln!(f, "{:<16} {verdict} {}/{} worst {:.6}", s.name, s.checks - s.failures, s.checks, s.worst)?;
            for n in &s.notes {
                writeln!(f, "  {n}")?;
            }
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        writeln!(f, "overall {verdict}")
    }
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Runs every suite. `index` is the outcome of loading an index file, if
/// one was given; a load failure is reported as an integrity failure.
pub fn audit(balls: &[Ball], index: Option<CliResult<Index>>, trials: usize, seed: u64) -> CliResult<AuditReport> {
    let mut report = AuditReport::default();
    let index = match index.transpose() {
        Ok(i) => i,
        Err(CliError::Integrity(e)) => {
            report.integrity_error = Some(e);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    if let Some(pair) = oracle::check_disjoint(balls) {
        return Err(CliError::Input(format!("balls {} and {} overlap", pair.0, pair.1)));
    }
    let reg = match &index {
        Some(Index::Registry(reg)) => reg.clone(),
        Some(Index::Avd { avd, transform, c_d }) => Registry::build(NormalizedInstance {
            balls: avd.balls().to_vec(),
            transform: transform.clone(),
            epsilon_floor: avd.eps(),
            dim: avd.dim(),
            c_d: *c_d,
        })?,
        None => Registry::build(normalize(balls, 0.5)?)?,
    };
    if let Some(index) = &index {
        report.suites.push(match_suite(balls, index));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    report.suites.push(count_suite(&reg, trials, &mut rng)?);
    let (cf, knn) = knn_suites(&reg, trials, &mut rng)?;
    report.suites.push(cf);
    report.suites.push(knn);
    report.suites.push(quorum_suite(&reg)?);
    if let Some(Index::Avd { avd, .. }) = &index {
        report.suites.push(avd_suite(avd, trials, &mut rng)?);
    }
    Ok(report)
}

fn match_suite(balls: &[Ball], index: &Index) -> SuiteReport {
    let mut s = SuiteReport::new("index-match");
    let stored = index.original_balls();
    s.record(stored.len() == balls.len(), || format!("index has {} balls, file {}", stored.len(), balls.len()));
    let extent = balls.iter().map(|b| b.radius + b.center.iter().map(|c| c.abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    for (i, (a, b)) in stored.iter().zip(balls).enumerate() {
        let err = a.center.iter().zip(&b.center).map(|(x, y)| (x - y).abs()).fold((a.radius - b.radius).abs(), f64::max);
        let rel = err / extent.max(f64::MIN_POSITIVE);
        s.worst = s.worst.max(rel);
        s.record(rel <= MATCH_TOL, || format!("ball {i} differs by {rel:e}"));
    }
    s
}

/// Query box: the unit cube's middle half, which holds every ball.
fn query_box(reg: &Registry) -> (f64, f64) {
    let d = reg.instance().delta();
    (0.5 - 2.0 * d, 0.5 + 2.0 * d)
}

fn count_suite(reg: &Registry, trials: usize, rng: &mut ChaCha8Rng) -> CliResult<SuiteReport> {
    let mut s = SuiteReport::new("registry-counts");
    let (lo, hi) = query_box(reg);
    for _ in 0..trials {
        let q = random_point(rng, reg.dim(), lo, hi);
        let x = rng.gen_range(0.0..(hi - lo));
        let delta = rng.gen_range(0.01..1.0);
        let est = reg.approx_ball_count(&q, delta, x)?;
        let (low, _) = exact_counts(reg.balls(), &q, x);
        let (high, _) = exact_counts(reg.balls(), &q, (1.0 + delta) * x);
        s.record(low <= est && est <= high, || format!("N({x}) = {low}, estimate {est}, N((1+{delta})x) = {high}"));
    }
    Ok(s)
}

fn knn_suites(reg: &Registry, trials: usize, rng: &mut ChaCha8Rng) -> CliResult<(SuiteReport, SuiteReport)> {
    let mut cf = SuiteReport::new("constant-factor");
    let mut knn = SuiteReport::new("knn");
    let (lo, hi) = query_box(reg);
    let n = reg.len();
    for _ in 0..trials {
        let q = random_point(rng, reg.dim(), lo, hi);
        let k = rng.gen_range(1..=n);
        let eps = [0.5, 0.2, 0.1][rng.gen_range(0..3)];
        let dk = exact_kth_distance(reg.balls(), &q, k)?.value;
        let x = constant_factor_kth(reg, &q, k)?.estimate;
        let ratio = if dk > 0.0 { (x / dk).max(dk / x) } else if x == 0.0 { 1.0 } else { f64::INFINITY };
        cf.worst = cf.worst.max(ratio);
        cf.record(x / 4.0 <= dk && dk <= 4.0 * x, || format!("k={k}: estimate {x}, d_k {dk}"));
        let a = reg.knn(&q, k, eps)?;
        let d = reg.ball(a.ball_id).distance(&q);
        if dk > 0.0 {
            knn.worst = knn.worst.max((d - dk).abs() / dk / eps);
        }
        knn.record((1.0 - eps) * dk <= d && d <= (1.0 + eps) * dk, || format!("k={k} eps={eps}: distance {d}, d_k {dk}"));
    }
    Ok((cf, knn))
}

/// Checks a quorum clustering at `k = max(2 c_d + 1, ceil(sqrt n))`; the
/// optimality part only runs within the oracle cap.
fn quorum_suite(reg: &Registry) -> CliResult<SuiteReport> {
    let mut s = SuiteReport::new("quorum");
    let n = reg.len();
    let k = (2 * reg.c_d() + 1).max((n as f64).sqrt().ceil() as usize);
    if k > n {
        s.notes.push(format!("skipped: n = {n} too small for k > 2 c_d"));
        return Ok(s);
    }
    let quorum = ball_quorum(reg, k)?;
    let rep = verify_quorum(reg, &quorum, oracle::DEFAULT_CAP)?;
    s.worst = rep.worst_ratio;
    let mut failures = rep.failures.iter();
    s.record(rep.passed(), || failures.next().cloned().unwrap_or_default());
    if rep.optimality_ok.is_none() {
        s.notes.push(format!("optimality not checked: n = {n} above the oracle cap"));
    }
    Ok(s)
}

fn avd_suite(avd: &AvdIndex, trials: usize, rng: &mut ChaCha8Rng) -> CliResult<SuiteReport> {
    let mut s = SuiteReport::new("avd");
    let delta = avd.eps() / 4.0;
    let queries: Vec<Vec<f64>> =
        (0..trials).map(|_| random_point(rng, avd.dim(), 0.5 - 2.0 * delta, 0.5 + 2.0 * delta)).collect();
    let a = avd.audit(&queries, AVD_CELL_SAMPLES)?;
    s.checks = a.queries + a.cells_checked;
    s.failures = (a.queries - a.correct - a.out_of_domain)
        + a.lambda_violations
        + a.small_cell_violations
        + a.cluster_violations
        + a.anchor_missing
        + a.site_violations
        + a.cell_violations;
    s.worst = a.worst_relative_error;
    s.notes.extend(a.failures.iter().take(5).cloned());
    if s.failures == 0 && !a.passed() {
        s.failures = 1;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{generate, Profile};
    use crate::index::decode;

    #[test]
    fn healthy_instance_passes() {
        let balls = generate(4, 2, 40, Profile::Clustered).unwrap();
        let rep = audit(&balls, None, 100, 1).unwrap();
        assert!(rep.passed(), "{rep}");
        assert_eq!(rep.suites.len(), 4);
    }

    #[test]
    fn truncated_index_stops_the_audit() {
        let balls = generate(4, 1, 30, Profile::Uniform).unwrap();
        let reg = Registry::build(normalize(&balls, 0.5).unwrap()).unwrap();
        let bytes = crate::index::encode_registry(&reg);
        let rep = audit(&balls, Some(decode(&bytes[..bytes.len() - 5])), 50, 1).unwrap();
        assert!(rep.integrity_error.is_some());
        assert!(rep.suites.is_empty());
        assert!(!rep.passed());
        let rep = audit(&balls, Some(decode(&bytes)), 50, 1).unwrap();
        assert!(rep.passed(), "{rep}");
    }

    #[test]
    fn mismatched_index_fails() {
        let balls = generate(4, 1, 30, Profile::Uniform).unwrap();
        let other = generate(5, 1, 30, Profile::Uniform).unwrap();
        let reg = Registry::build(normalize(&other, 0.5).unwrap()).unwrap();
        let rep = audit(&balls, Some(Ok(Index::Registry(reg))), 20, 1).unwrap();
        assert!(!rep.passed());
        assert!(!rep.suites[0].passed());
    }
}
