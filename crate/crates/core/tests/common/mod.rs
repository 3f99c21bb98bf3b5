#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use recombinator::dynamics::{ModelSpec, Trajectory};
use recombinator::matrix::SquareMatrix;
use recombinator::measure::Measure;
use recombinator::mutation::{MutationModel, SiteGenerator};
use recombinator::recombination::RecombinationRates;
use recombinator::selection::FitnessModel;
use recombinator::type_space::TypeSpace;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 2-4 sites, cardinalities 2 or 3.
pub fn random_space(rng: &mut ChaCha8Rng) -> TypeSpace {
    let n_sites = rng.random_range(2..=4usize);
    let cards: Vec<usize> = (0..n_sites).map(|_| rng.random_range(2..=3usize)).collect();
    TypeSpace::new(&cards).unwrap()
}

pub fn random_probability(space: &TypeSpace, rng: &mut ChaCha8Rng) -> Measure {
    let w: Vec<f64> = (0..space.total_size()).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = w.iter().sum();
    Measure::new(space.clone(), w.into_iter().map(|x| x / sum).collect()).unwrap()
}

pub fn random_positive(space: &TypeSpace, rng: &mut ChaCha8Rng) -> Measure {
    let w: Vec<f64> = (0..space.total_size()).map(|_| rng.random_range(0.05..1.0)).collect();
    Measure::new(space.clone(), w).unwrap()
}

pub fn random_rates(space: &TypeSpace, rng: &mut ChaCha8Rng) -> RecombinationRates {
    RecombinationRates::new(
        (0..space.n_links()).map(|_| rng.random_range(0.1..2.0)).collect(),
    )
    .unwrap()
}

/// Strictly positive off-diagonals make the generator irreducible.
pub fn random_generator(site: usize, dim: usize, rng: &mut ChaCha8Rng) -> SiteGenerator {
    let mut m = SquareMatrix::zeros(dim);
    for k in 0..dim {
        for l in 0..dim {
            if k != l {
                m.set(k, l, rng.random_range(0.2..1.0));
            }
        }
    }
    for l in 0..dim {
        let col: f64 = (0..dim).filter(|&k| k != l).map(|k| m.get(k, l)).sum();
        m.set(l, l, -col);
    }
    SiteGenerator::new(site, m, 1.0).unwrap()
}

pub fn random_mutation(space: &TypeSpace, rng: &mut ChaCha8Rng) -> MutationModel {
    let gens = (0..space.n_sites())
        .map(|i| random_generator(i, space.cardinality(i), rng))
        .collect();
    MutationModel::new(space, gens).unwrap()
}

pub fn random_fitness(space: &TypeSpace, rng: &mut ChaCha8Rng) -> FitnessModel {
    let r: Vec<Vec<f64>> = (0..space.n_sites())
        .map(|i| (0..space.cardinality(i)).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    FitnessModel::new(space, r).unwrap()
}

pub fn recombination_only(space: &TypeSpace, rng: &mut ChaCha8Rng) -> ModelSpec {
    let initial = random_probability(space, rng);
    ModelSpec::new(space.clone(), random_rates(space, rng), None, None, initial).unwrap()
}

pub fn max_state_deviation(a: &Trajectory, b: &Trajectory) -> f64 {
    assert_eq!(a.times, b.times);
    let mut max_dev = 0.0f64;
    for (sa, sb) in a.states.iter().zip(&b.states) {
        for (x, y) in sa.weights().iter().zip(sb.weights()) {
            max_dev = max_dev.max((x - y).abs());
        }
    }
    max_dev
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The standard comparison grid: 0, 0.1, 0.2, ..., 5.0.
pub fn tenth_grid_to(stop_tenths: usize) -> Vec<f64> {
    (0..=stop_tenths).map(|i| i as f64 * 0.1).collect()
}
