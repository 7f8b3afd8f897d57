use argmin::core::CostFunction;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::gp::{nelder_mead, GpPosterior};

pub const SCAN_POINTS: usize = 4096;
pub const EXPLORATION: f64 = 0.01;
const REFINE_STARTS: usize = 3;
const REFINE_ITERATIONS: u64 = 40;

/// Expected improvement over `best` for a maximization problem, in the
/// posterior's standardized units.
pub fn expected_improvement(gp: &GpPosterior, p: [f64; 2], best: f64) -> f64 {
    let (mean, var) = gp.predict_standardized(p);
    let gain = mean - gp.standardized(best) - EXPLORATION;
    let sd = var.sqrt();
    if sd < 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let n = Normal::standard();
    gain * n.cdf(z) + sd * n.pdf(z)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// The first `n` points of the base-(2, 3) Halton sequence under a random
/// toroidal shift.
pub fn shifted_halton(n: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let shift: [f64; 2] = [rng.gen(), rng.gen()];
    (1..=n as u64)
        .map(|i| {
            [
                (radical_inverse(i, 2) + shift[0]).fract(),
                (radical_inverse(i, 3) + shift[1]).fract(),
            ]
        })
        .collect()
}

/// `n` points with exactly one point in each of the `n` slabs per axis.
pub fn latin_hypercube(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axes: [Vec<usize>; 2] = [(0..n).collect(), (0..n).collect()];
    for a in &mut axes {
        a.shuffle(&mut rng);
    }
    (0..n)
        .map(|i| {
            let u: [f64; 2] = [rng.gen(), rng.gen()];
            [
                (axes[0][i] as f64 + u[0]) / n as f64,
                (axes[1][i] as f64 + u[1]) / n as f64,
            ]
        })
        .collect()
}

fn clamp_unit(p: &[f64]) -> [f64; 2] {
    [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)]
}

struct NegativeEi<'a> {
    gp: &'a GpPosterior,
    best: f64,
}

impl CostFunction for NegativeEi<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(-expected_improvement(self.gp, clamp_unit(p), self.best))
    }
}

/// Candidates ordered by expected improvement, best first: the refined
/// optima of the top scan points followed by the whole scan.
pub(crate) fn ranked_candidates(gp: &GpPosterior, best: f64, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let mut scan: Vec<([f64; 2], f64)> = shifted_halton(SCAN_POINTS, rng)
        .into_iter()
        .map(|p| (p, expected_improvement(gp, p, best)))
        .collect();
    scan.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut refined: Vec<([f64; 2], f64)> = scan
        .iter()
        .take(REFINE_STARTS)
        .map(|(p, ei)| {
            let (q, cost) = nelder_mead(NegativeEi { gp, best }, p, 0.02, REFINE_ITERATIONS);
            if -cost > *ei {
                (clamp_unit(&q), -cost)
            } else {
                (*p, *ei)
            }
        })
        .collect();
    refined.sort_by(|a, b| b.1.total_cmp(&a.1));
    refined.into_iter().chain(scan).map(|(p, _)| p).collect()
}
