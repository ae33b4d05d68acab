//! Seeded generators of interior-disjoint ball sets in `[0, 1]^d`.

use std::str::FromStr;

use ballnn::Ball;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CliError;

/// Placement attempts per ball before giving up.
const ATTEMPTS: usize = 2000;

/// Radius of the two huge balls in the nested-huge profile.
pub const HUGE_RADIUS: f64 = 0.2;
/// Gap between the probe point and each huge ball.
pub const HUGE_GAP: f64 = 0.02;
/// Small balls placed right next to the probe point.
pub const INNER_BALLS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Profile {
    Uniform,
    Clustered,
    /// Two huge balls on either side of a probe point, a few tiny balls next
    /// to the probe and the rest scattered well away from it. Around the
    /// probe, the k-th nearest center is far while the k-th nearest ball is
    /// close, for `k` just above the number of tiny balls.
    NestedHuge,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(Profile::Uniform),
            "clustered" => Ok(Profile::Clustered),
            "nested-huge" => Ok(Profile::NestedHuge),
            _ => Err(format!("unknown profile {s:?} (uniform, clustered, nested-huge)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("placed only {placed} of {requested} disjoint balls")]
pub struct Crowded {
    pub placed: usize,
    pub requested: usize,
}

impl From<Crowded> for CliError {
    fn from(e: Crowded) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Point next to which the nested-huge profile puts its tiny balls.
pub fn nested_probe(dim: usize) -> Vec<f64> {
    vec![0.5; dim]
}

/// Number of tiny balls around the probe for a nested-huge instance of size `n`.
pub fn nested_inner_count(n: usize) -> usize {
    INNER_BALLS.min(n.saturating_sub(2))
}

struct Placer {
    balls: Vec<Ball>,
}

impl Placer {
    fn fits(&self, b: &Ball) -> bool {
        self.balls.iter().all(|o| {
            let d2: f64 = o.center.iter().zip(&b.center).map(|(x, y)| (x - y) * (x - y)).sum();
            let r = o.radius + b.radius;
            d2 > r * r
        })
    }

    fn place(&mut self, mut draw: impl FnMut() -> Ball, requested: usize) -> Result<(), Crowded> {
        for _ in 0..ATTEMPTS {
            let b = draw();
            if self.fits(&b) {
                self.balls.push(b);
                return Ok(());
            }
        }
        Err(Crowded { placed: self.balls.len(), requested })
    }
}

fn unit_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen::<f64>()).collect()
}

pub fn generate(seed: u64, dim: usize, n: usize, profile: Profile) -> Result<Vec<Ball>, Crowded> {
    assert!(dim >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut placer = Placer { balls: Vec::with_capacity(n) };
    let scale = (n.max(1) as f64).powf(-1.0 / dim as f64);
    match profile {
        Profile::Uniform => {
            let rmax = 0.2 * scale;
            for _ in 0..n {
                placer.place(|| Ball { center: unit_point(&mut rng, dim), radius: rmax * rng.gen::<f64>() }, n)?;
            }
        }
        Profile::Clustered => {
            let m = ((n as f64).sqrt() / 2.0).ceil().max(1.0) as usize;
            let spread = 0.08;
            let hubs: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..dim).map(|_| rng.gen_range(spread..1.0 - spread)).collect())
                .collect();
            let rmax = 0.2 * spread * ((n as f64 / m as f64).max(1.0)).powf(-1.0 / dim as f64);
            for _ in 0..n {
                placer.place(
                    || {
                        let hub = &hubs[rng.gen_range(0..m)];
                        let center = hub.iter().map(|&h| h + rng.gen_range(-spread..spread)).collect();
                        Ball { center, radius: rmax * rng.gen::<f64>() }
                    },
                    n,
                )?;
            }
        }
        Profile::NestedHuge => {
            let probe = nested_probe(dim);
            for side in [-1.0, 1.0] {
                if placer.balls.len() == n {
                    break;
                }
                let mut center = probe.clone();
                center[0] += side * (HUGE_RADIUS + HUGE_GAP);
                placer.balls.push(Ball { center, radius: HUGE_RADIUS });
            }
            // Tiny balls between HUGE_GAP / 40 and HUGE_GAP / 20 from the probe.
            for _ in 0..nested_inner_count(n) {
                placer.place(
                    || {
                        let dir = random_direction(&mut rng, dim);
                        let t = rng.gen_range(HUGE_GAP / 40.0..HUGE_GAP / 20.0);
                        let center = probe.iter().zip(&dir).map(|(p, u)| p + t * u).collect();
                        Ball { center, radius: HUGE_GAP / 400.0 * rng.gen::<f64>() }
                    },
                    n,
                )?;
            }
            let rmax = 0.02 * scale;
            while placer.balls.len() < n {
                placer.place(
                    || loop {
                        let center = unit_point(&mut rng, dim);
                        let far = center.iter().zip(&probe).map(|(c, p)| (c - p) * (c - p)).sum::<f64>()
                            >= HUGE_RADIUS * HUGE_RADIUS;
                        if far {
                            return Ball { center, radius: rmax * rng.gen::<f64>() };
                        }
                    },
                    n,
                )?;
            }
        }
    }
    Ok(placer.balls)
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform query points in the axis box `[lo, hi]^d`.
pub fn uniform_points(seed: u64, dim: usize, count: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(lo..hi)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ballnn::oracle::check_disjoint;

    #[test]
    fn every_profile_is_disjoint() {
        for profile in [Profile::Uniform, Profile::Clustered, Profile::NestedHuge] {
            for dim in 1..=3 {
                for n in [1, 2, 3, 50, 300] {
                    let balls = generate(dim as u64 * 7 + n as u64, dim, n, profile).unwrap();
                    assert_eq!(balls.len(), n);
                    assert_eq!(check_disjoint(&balls), None, "{profile:?} d={dim} n={n}");
                    assert!(balls.iter().all(|b| b.dim() == dim));
                }
            }
        }
    }

    #[test]
    fn three_intervals() {
        let balls = generate(1, 1, 3, Profile::Uniform).unwrap();
        assert_eq!(balls.len(), 3);
        assert_eq!(check_disjoint(&balls), None);
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = generate(5, 2, 100, Profile::Clustered).unwrap();
        assert_eq!(a, generate(5, 2, 100, Profile::Clustered).unwrap());
        assert_ne!(a, generate(6, 2, 100, Profile::Clustered).unwrap());
    }

    #[test]
    fn crowding_reports_partial_count() {
        let mut placer = Placer { balls: vec![Ball { center: vec![0.5], radius: 2.0 }] };
        let err = placer.place(|| Ball { center: vec![0.3], radius: 0.01 }, 5).unwrap_err();
        assert_eq!((err.placed, err.requested), (1, 5));
    }

    #[test]
    fn nested_layout() {
        let balls = generate(3, 2, 40, Profile::NestedHuge).unwrap();
        let probe = nested_probe(2);
        let near = balls.iter().filter(|b| b.distance(&probe) < HUGE_GAP / 10.0).count();
        assert_eq!(near, nested_inner_count(40));
        let gap = balls.iter().filter(|b| (b.distance(&probe) - HUGE_GAP).abs() < 1e-12).count();
        assert_eq!(gap, 2);
    }
}
