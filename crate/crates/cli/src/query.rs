//! Answering query files against a loaded index.

use std::fmt;
use std::time::Instant;

use ballnn::Ball;

use crate::formats::QueryLine;
use crate::index::Index;

#[derive(Clone, Debug, PartialEq)]
pub enum QueryOutcome {
    Answer {
        ball: usize,
        /// Distance in original units.
        distance: f64,
        time_ns: u128,
        out_of_domain: bool,
    },
    Error(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub index: usize,
    pub outcome: QueryOutcome,
}

impl fmt::Display for QueryRecord {
    /// `query_index ball_index distance time_ns`, with a trailing
    /// `out-of-domain` token when flagged, or `query_index error <message>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            QueryOutcome::Answer { ball, distance, time_ns, out_of_domain } => {
                write!(f, "{} {ball} {distance} {time_ns}", self.index)?;
                if *out_of_domain {
                    f.write_str(" out-of-domain")?;
                }
                Ok(())
            }
            QueryOutcome::Error(msg) => write!(f, "{} error {msg}", self.index),
        }
    }
}

/// Per-query `k` and `eps` fall back to `default_k` / `default_eps`. For an
/// AVD index they must agree with the build: the same `k` and an `eps` no
/// smaller than the built one.
pub struct QueryRunner<'a> {
    index: &'a Index,
    original: Vec<Ball>,
    pub default_k: Option<usize>,
    pub default_eps: Option<f64>,
}

impl<'a> QueryRunner<'a> {
    pub fn new(index: &'a Index) -> Self {
        QueryRunner { index, original: index.original_balls(), default_k: None, default_eps: None }
    }

    fn answer(&self, q: &QueryLine) -> Result<QueryOutcome, String> {
        let k = q.k.or(self.default_k);
        let eps = q.eps.or(self.default_eps);
        let unit = self.index.transform().apply_point(&q.point);
        let (result, elapsed) = match self.index {
            Index::Registry(reg) => {
                let k = k.ok_or("no k given (add a column or pass --k)")?;
                let eps = eps.ok_or("no eps given (add a column or pass --eps)")?;
                let start = Instant::now();
                let r = reg.knn(&unit, k, eps);
                (r, start.elapsed())
            }
            Index::Avd { avd, .. } => {
                if let Some(k) = k.filter(|&k| k != avd.k()) {
                    return Err(format!("index answers k = {} only, got {k}", avd.k()));
                }
                if let Some(e) = eps.filter(|&e| e < avd.eps()) {
                    return Err(format!("index was built for eps = {}, got {e}", avd.eps()));
                }
                let start = Instant::now();
                let r = avd.query(&unit);
                (r, start.elapsed())
            }
        };
        let a = result.map_err(|e| e.to_string())?;
        Ok(QueryOutcome::Answer {
            ball: a.ball_id,
            distance: self.original[a.ball_id].distance(&q.point),
            time_ns: elapsed.as_nanos(),
            out_of_domain: a.out_of_domain,
        })
    }

    /// Answers every line in order; malformed or failing lines become error
    /// records and the rest still run.
    pub fn run(&self, lines: &[Result<QueryLine, String>]) -> Vec<QueryRecord> {
        let dim = self.index.dim();
        lines
            .iter()
            .enumerate()
            .map(|(index, line)| {
                let outcome = match line {
                    Err(msg) => QueryOutcome::Error(msg.clone()),
                    Ok(q) if q.point.len() != dim => {
                        QueryOutcome::Error(format!("expected {dim} coordinates, found {}", q.point.len()))
                    }
                    Ok(q) => self.answer(q).unwrap_or_else(QueryOutcome::Error),
                };
                QueryRecord { index, outcome }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::parse_queries;
    use ballnn::avd::{AvdIndex, AvdParams, Mode};
    use ballnn::{normalize, Registry};

    fn balls() -> Vec<Ball> {
        (0..40).map(|i| Ball::new(vec![10.0 * i as f64, -3.0], 1.0 + (i % 3) as f64).unwrap()).collect()
    }

    #[test]
    fn registry_queries_in_original_units() {
        let balls = balls();
        let reg = Registry::build(normalize(&balls, 0.5).unwrap()).unwrap();
        let index = Index::Registry(reg);
        let mut runner = QueryRunner::new(&index);
        runner.default_eps = Some(0.1);
        let recs = runner.run(&parse_queries("0 -3 1\n200 -3 1 0.2\n5 -3\n1 2 3 4 5\n", 2));
        assert_eq!(recs.len(), 4);
        let QueryOutcome::Answer { ball, distance, .. } = recs[0].outcome else { panic!("{:?}", recs[0]) };
        assert_eq!((ball, distance), (0, 0.0));
        let QueryOutcome::Answer { distance, .. } = recs[1].outcome else { panic!("{:?}", recs[1]) };
        assert_eq!(distance, 0.0);
        assert!(matches!(recs[2].outcome, QueryOutcome::Error(_)));
        assert!(matches!(recs[3].outcome, QueryOutcome::Error(_)));
        assert!(recs[2].to_string().starts_with("2 error "));
    }

    #[test]
    fn avd_queries_check_parameters() {
        let balls = balls();
        let reg = Registry::build(normalize(&balls, 0.5).unwrap()).unwrap();
        let avd = AvdIndex::build(&reg, &AvdParams::new(20, 0.5, Mode::Practical)).unwrap();
        let index = Index::Avd { avd, transform: reg.instance().transform.clone(), c_d: reg.c_d() };
        let runner = QueryRunner::new(&index);
        let recs = runner.run(&parse_queries("100 -3\n100 -3 20 0.75\n100 -3 19\n100 -3 20 0.25\n1e6 1e6\n", 2));
        assert!(matches!(recs[0].outcome, QueryOutcome::Answer { out_of_domain: false, .. }));
        assert!(matches!(recs[1].outcome, QueryOutcome::Answer { .. }));
        assert!(matches!(recs[2].outcome, QueryOutcome::Error(_)));
        assert!(matches!(recs[3].outcome, QueryOutcome::Error(_)));
        assert!(matches!(recs[4].outcome, QueryOutcome::Answer { out_of_domain: true, .. }));
        assert!(recs[4].to_string().ends_with(" out-of-domain"));
    }
}
