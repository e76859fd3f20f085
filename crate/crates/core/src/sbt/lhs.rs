//! Latin hypercube sampling over the unit cube.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::scenario::ScenarioParams;
use crate::sim::sitaw::stream_seed;

use super::space::ParameterSpace;

/// Stream tag for per-sample simulation seeds.
pub const SAMPLE_STREAM: u64 = 0x5A;

/// `n` points in `[0,1)^d`; in every dimension each of the `n` equal strata
/// holds exactly one point.
pub fn lhs_unit(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (i, p) in points.iter_mut().enumerate() {
            let u: f64 = rng.random();
            p[j] = (strata[i] as f64 + u) / n as f64;
        }
    }
    points
}

/// Seed for the simulation of sample `index` of a campaign.
pub fn sample_seed(master: u64, index: usize) -> u64 {
    stream_seed(master, index as u64, SAMPLE_STREAM)
}

pub fn sample_id(component: &str, index: usize) -> String {
    format!("{component}-s{index:04}")
}

/// Scenarios for an `n`-point Latin hypercube over `space`.
pub fn lhs_sample(space: &ParameterSpace, n: usize, seed: u64) -> Vec<ScenarioParams> {
    lhs_unit(n, space.dim(), seed)
        .into_iter()
        .enumerate()
        .map(|(i, u)| space.instantiate(&u, sample_id(&space.component, i), sample_seed(seed, i)))
        .collect()
}
