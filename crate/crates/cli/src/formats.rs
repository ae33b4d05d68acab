//! Whitespace-separated text formats.
//!
//! A ball file starts with `d n` and then holds `n` lines of `d + 1` numbers
//! (center, radius). A query file holds one query per line:
//! `q_1 .. q_d [k [eps]]`. Blank lines and lines starting with `#` are
//! ignored in both.

use std::fmt::Write as _;

use ballnn::Ball;

use crate::error::{CliError, CliResult};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(tok: &str, line: usize) -> CliResult<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| CliError::Input(format!("line {line}: bad number {tok:?}")))?;
    if !v.is_finite() {
        return Err(CliError::Input(format!("line {line}: non-finite value {tok:?}")));
    }
    Ok(v)
}

pub fn parse_balls(text: &str) -> CliResult<Vec<Ball>> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| CliError::Input("empty ball file".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    let [d, n] = head[..] else {
        return Err(CliError::Input(format!("line {hl}: header must be \"d n\"")));
    };
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| CliError::Input(format!("line {hl}: bad header value {s:?}")))
    };
    let (d, n) = (parse_count(d)?, parse_count(n)?);
    if d == 0 {
        return Err(CliError::Input("dimension must be positive".into()));
    }
    let mut balls = Vec::with_capacity(n);
    for (ln, line) in lines {
        let vals = line
            .split_whitespace()
            .map(|t| parse_f64(t, ln))
            .collect::<CliResult<Vec<f64>>>()?;
        if vals.len() != d + 1 {
            return Err(CliError::Input(format!("line {ln}: expected {} numbers, found {}", d + 1, vals.len())));
        }
        let radius = vals[d];
        let ball = Ball::new(vals[..d].to_vec(), radius)
            .map_err(|e| CliError::Input(format!("line {ln}: {e}")))?;
        balls.push(ball);
    }
    if balls.len() != n {
        return Err(CliError::Input(format!("header says {n} balls, file has {}", balls.len())));
    }
    Ok(balls)
}

pub fn format_balls(balls: &[Ball]) -> String {
    let d = balls.first().map_or(0, Ball::dim);
    let mut s = format!("{d} {}\n", balls.len());
    for b in balls {
        for c in &b.center {
            let _ = write!(s, "{c} ");
        }
        let _ = writeln!(s, "{}", b.radius);
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryLine {
    pub point: Vec<f64>,
    pub k: Option<usize>,
    pub eps: Option<f64>,
}

/// Parses one query line for dimension `dim`. Errors are plain messages so
/// the caller can emit a per-line record and continue.
pub fn parse_query_line(line: &str, dim: usize) -> Result<QueryLine, String> {
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() < dim || toks.len() > dim + 2 {
        return Err(format!("expected {dim} to {} columns, found {}", dim + 2, toks.len()));
    }
    let mut point = Vec::with_capacity(dim);
    for t in &toks[..dim] {
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() => point.push(v),
            _ => return Err(format!("bad coordinate {t:?}")),
        }
    }
    let k = match toks.get(dim) {
        None => None,
        Some(t) => match t.parse::<usize>() {
            Ok(k) if k >= 1 => Some(k),
            _ => return Err(format!("bad rank {t:?}")),
        },
    };
    let eps = match toks.get(dim + 1) {
        None => None,
        Some(t) => match t.parse::<f64>() {
            Ok(e) if e > 0.0 && e < 1.0 => Some(e),
            _ => return Err(format!("eps {t:?} not in (0, 1)")),
        },
    };
    Ok(QueryLine { point, k, eps })
}

/// All query lines of a file, numbered from 0 in file order.
pub fn parse_queries(text: &str, dim: usize) -> Vec<Result<QueryLine, String>> {
    content_lines(text).map(|(_, l)| parse_query_line(l, dim)).collect()
}

pub fn format_queries(queries: &[QueryLine]) -> String {
    let mut s = String::new();
    for q in queries {
        let cols: Vec<String> = q
            .point
            .iter()
            .map(f64::to_string)
            .chain(q.k.map(|k| k.to_string()))
            .chain(q.eps.map(|e| e.to_string()))
            .collect();
        let _ = writeln!(s, "{}", cols.join(" "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_file_round_trip() {
        let balls = vec![
            Ball::new(vec![0.2, -1.5], 0.05).unwrap(),
            Ball::new(vec![3.0, 1e-7], 0.0).unwrap(),
        ];
        let text = format_balls(&balls);
        assert!(text.starts_with("2 2\n"));
        assert_eq!(parse_balls(&text).unwrap(), balls);
    }

    #[test]
    fn ball_file_errors() {
        assert!(parse_balls("").is_err());
        assert!(parse_balls("1 2\n0.1 0.01\n").is_err());
        assert!(parse_balls("1 1\n0.1\n").is_err());
        assert!(parse_balls("1 1\n0.1 -0.5\n").is_err());
        assert!(parse_balls("1 1\nnan 0.1\n").is_err());
        assert!(parse_balls("x 1\n0.1 0.1\n").is_err());
        assert_eq!(parse_balls("# points\n1 1\n\n0.1 0.1\n").unwrap().len(), 1);
    }

    #[test]
    fn query_lines() {
        assert_eq!(
            parse_query_line("0.5 0.25 3 0.1", 2).unwrap(),
            QueryLine { point: vec![0.5, 0.25], k: Some(3), eps: Some(0.1) }
        );
        assert_eq!(parse_query_line("0.5", 1).unwrap().k, None);
        assert!(parse_query_line("0.5", 2).is_err());
        assert!(parse_query_line("0.5 0 0.1", 1).is_err());
        assert!(parse_query_line("0.5 2 1.5", 1).is_err());
        assert!(parse_query_line("0.5 2 0.1 7", 1).is_err());
        let qs = parse_queries("0.1 1 0.5\nbad\n\n0.3\n", 1);
        assert_eq!(qs.len(), 3);
        assert!(qs[1].is_err());
    }
}
