//! Run configuration: one JSON document fully determines a run.
//!
//! ```json
//! {
//!   "sites": [2, 2],
//!   "rho": [1.0],
//!   "mutation": {"mu": [1.0, 1.0], "matrices": [[[-1.0, 1.0], [1.0, -1.0]],
//!                                               [[-1.0, 1.0], [1.0, -1.0]]]},
//!   "fitness": {"r": [[0.0, 1.0], [0.0, 0.5]]},
//!   "initial": {"kind": "explicit", "weights": [0.5, 0.0, 0.0, 0.5]},
//!   "times": {"kind": "linear", "stop": 5.0, "points": 51},
//!   "dt": 0.001,
//!   "seed": 7,
//!   "discrete": {"probs": [0.5], "generations": 10}
//! }
//! ```
//!
//! `mutation` and `fitness` are optional (absent means no mutation / flat
//! fitness). Mutation matrix entry `[k][l]` is the rate from state `l` to
//! state `k`; columns must sum to zero. `discrete` is only consulted by the
//! `discrete` subcommand.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use recombinator::dynamics::{CrossoverProbs, ModelSpec};
use recombinator::matrix::SquareMatrix;
use recombinator::measure::{tensor_product_on, Measure, SignedMeasure};
use recombinator::mutation::{MutationModel, SiteGenerator};
use recombinator::recombination::RecombinationRates;
use recombinator::selection::FitnessModel;
use recombinator::type_space::TypeSpace;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sites: Vec<usize>,
    pub rho: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<MutationCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<FitnessCfg>,
    pub initial: InitialCfg,
    pub times: TimesCfg,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteCfg>,
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationCfg {
    /// Per-site scale factors multiplying the rate matrices.
    pub mu: Vec<f64>,
    /// Per-site rate matrices, row-major: `matrices[i][k][l]` is the rate
    /// from state `l` to state `k` at site `i`.
    pub matrices: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessCfg {
    /// Per-site additive fitness vectors.
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialCfg {
    Explicit { weights: Vec<f64> },
    Uniform,
    Product { factors: Vec<Vec<f64>> },
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TimesCfg {
    /// `points` evenly spaced times from 0 to `stop` inclusive.
    Linear { stop: f64, points: usize },
    /// 0 followed by `points` log-spaced times from `start` to `stop`.
    Log { start: f64, stop: f64, points: usize },
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteCfg {
    /// Per-generation crossover probabilities (may include zeros; their sum
    /// must not exceed one).
    pub probs: Vec<f64>,
    pub generations: usize,
}

/// Command-line overrides applied before validation and hashing.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub seed: Option<u64>,
}

/// A fully validated run: the canonical config, the model, and the grids.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub config: ConfigFile,
    pub model: ModelSpec,
    pub times: Vec<f64>,
    pub dt: f64,
    pub seed: u64,
    pub discrete: Option<(CrossoverProbs, usize)>,
    pub model_hash: String,
}

fn config_err(path: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {message}"))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str, overrides: Overrides) -> Result<RunConfig, CliError> {
    let mut config: ConfigFile =
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(dt) = overrides.dt {
        config.dt = dt;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    build(config)
}

/// Canonical serialization; `parse_config(emit(c))` reproduces `c`.
pub fn emit(config: &ConfigFile) -> String {
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    text
}

pub fn model_hash(config: &ConfigFile) -> String {
    let digest = Sha256::digest(emit(config).as_bytes());
    hex::encode(&digest[..6])
}

fn build(config: ConfigFile) -> Result<RunConfig, CliError> {
    let space = TypeSpace::new(&config.sites).map_err(|e| config_err("sites", e))?;
    let rates = RecombinationRates::new(config.rho.clone())
        .map_err(|e| config_err("rho", e))?;
    if rates.n_links() != space.n_links() {
        return Err(config_err(
            "rho",
            format!("{} rates given, space has {} links", rates.n_links(), space.n_links()),
        ));
    }

    let mutation = match &config.mutation {
        None => None,
        Some(m) => Some(build_mutation(&space, m)?),
    };
    let fitness = match &config.fitness {
        None => None,
        Some(f) => Some(
            FitnessModel::new(&space, f.r.clone()).map_err(|e| config_err("fitness.r", e))?,
        ),
    };
    let initial = build_initial(&space, &config.initial, config.seed)?;

    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(config_err("dt", format!("{} must be positive", config.dt)));
    }
    let times = build_times(&config.times)?;

    let discrete = match &config.discrete {
        None => None,
        Some(d) => {
            if d.probs.len() != space.n_links() {
                return Err(config_err(
                    "discrete.probs",
                    format!("{} probabilities given, space has {} links", d.probs.len(), space.n_links()),
                ));
            }
            if d.generations == 0 {
                return Err(config_err("discrete.generations", "must be at least 1"));
            }
            let probs = CrossoverProbs::new(d.probs.clone())
                .map_err(|e| config_err("discrete.probs", e))?;
            Some((probs, d.generations))
        }
    };

    let model = ModelSpec::new(space, rates, mutation, fitness, initial)
        .map_err(|e| config_err("model", e))?;
    let model_hash = model_hash(&config);
    Ok(RunConfig {
        times,
        dt: config.dt,
        seed: config.seed,
        discrete,
        model,
        model_hash,
        config,
    })
}

fn build_mutation(space: &TypeSpace, cfg: &MutationCfg) -> Result<MutationModel, CliError> {
    if cfg.mu.len() != space.n_sites() {
        return Err(config_err(
            "mutation.mu",
            format!("{} scales given, space has {} sites", cfg.mu.len(), space.n_sites()),
        ));
    }
    if cfg.matrices.len() != space.n_sites() {
        return Err(config_err(
            "mutation.matrices",
            format!("{} matrices given, space has {} sites", cfg.matrices.len(), space.n_sites()),
        ));
    }
    let mut generators = Vec::with_capacity(space.n_sites());
    for (i, rows) in cfg.matrices.iter().enumerate() {
        let path = format!("mutation.matrices[{i}]");
        let matrix = SquareMatrix::from_rows(rows).map_err(|e| config_err(&path, e))?;
        if matrix.dim() != space.cardinality(i) {
            return Err(config_err(
                &path,
                format!("dimension {} does not match site cardinality {}", matrix.dim(), space.cardinality(i)),
            ));
        }
        generators.push(
            SiteGenerator::new(i, matrix, cfg.mu[i]).map_err(|e| config_err(&path, e))?,
        );
    }
    MutationModel::new(space, generators).map_err(|e| config_err("mutation", e))
}

fn build_initial(
    space: &TypeSpace,
    cfg: &InitialCfg,
    seed: u64,
) -> Result<Measure, CliError> {
    match cfg {
        InitialCfg::Explicit { weights } => Measure::new(space.clone(), weights.clone())
            .map_err(|e| config_err("initial.weights", e)),
        InitialCfg::Uniform => Ok(Measure::uniform(space.clone())),
        InitialCfg::Product { factors } => {
            if factors.len() != space.n_sites() {
                return Err(config_err(
                    "initial.factors",
                    format!("{} factors given, space has {} sites", factors.len(), space.n_sites()),
                ));
            }
            let mut site_measures = Vec::with_capacity(factors.len());
            for (i, f) in factors.iter().enumerate() {
                let site_space = TypeSpace::new(&[space.cardinality(i)])
                    .map_err(|e| config_err(&format!("initial.factors[{i}]"), e))?;
                site_measures.push(
                    SignedMeasure::new(site_space, f.clone())
                        .map_err(|e| config_err(&format!("initial.factors[{i}]"), e))?,
                );
            }
            let refs: Vec<&SignedMeasure> = site_measures.iter().collect();
            let product = tensor_product_on(space, &refs)
                .map_err(|e| config_err("initial.factors", e))?;
            Measure::new(space.clone(), product.weights().to_vec())
                .map_err(|e| config_err("initial.factors", e))
        }
        InitialCfg::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> =
                (0..space.total_size()).map(|_| rng.random::<f64>()).collect();
            let sum: f64 = w.iter().sum();
            Measure::new(space.clone(), w.into_iter().map(|x| x / sum).collect())
                .map_err(|e| config_err("initial", e))
        }
    }
}

fn build_times(cfg: &TimesCfg) -> Result<Vec<f64>, CliError> {
    let times = match cfg {
        TimesCfg::Linear { stop, points } => {
            if !(stop.is_finite() && *stop > 0.0) {
                return Err(config_err("times.stop", format!("{stop} must be positive")));
            }
            if *points < 2 {
                return Err(config_err("times.points", "need at least two grid points"));
            }
            (0..*points).map(|i| stop * i as f64 / (*points - 1) as f64).collect()
        }
        TimesCfg::Log { start, stop, points } => {
            if !(start.is_finite() && *start > 0.0) {
                return Err(config_err("times.start", format!("{start} must be positive")));
            }
            if !(stop.is_finite() && stop > start) {
                return Err(config_err("times.stop", format!("{stop} must exceed start")));
            }
            if *points < 1 {
                return Err(config_err("times.points", "need at least one grid point"));
            }
            let mut times = vec![0.0];
            if *points == 1 {
                times.push(*start);
            } else {
                let ratio = (stop / start).powf(1.0 / (*points - 1) as f64);
                times.extend((0..*points).map(|i| start * ratio.powi(i as i32)));
            }
            times
        }
        TimesCfg::Explicit { values } => values.clone(),
    };
    if times.first() != Some(&0.0) {
        return Err(config_err("times", "grid must start at 0"));
    }
    for w in times.windows(2) {
        if w[1].is_nan() || w[1] <= w[0] {
            return Err(config_err("times", "grid must be strictly increasing"));
        }
    }
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "sites": [2, 2],
            "rho": [1.0],
            "initial": {"kind": "explicit", "weights": [0.5, 0.0, 0.0, 0.5]},
            "times": {"kind": "linear", "stop": 1.0, "points": 11}
        }"#
    }

    #[test]
    fn minimal_config_parses() {
        let run = parse_config(minimal(), Overrides::default()).unwrap();
        assert_eq!(run.model.space().cardinalities(), &[2, 2]);
        assert_eq!(run.times.len(), 11);
        assert_eq!(run.dt, 1e-3);
        assert_eq!(run.seed, 0);
        assert_eq!(run.model_hash.len(), 12);
    }

    #[test]
    fn zero_rate_rejected_with_merge_guidance() {
        let text = minimal().replace("[1.0]", "[0.0]");
        let err = parse_config(&text, Overrides::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rho"), "{msg}");
        assert!(msg.contains("merging"), "{msg}");
    }

    #[test]
    fn unbalanced_mutation_columns_rejected() {
        let text = r#"{
            "sites": [2, 2],
            "rho": [1.0],
            "mutation": {"mu": [1.0, 1.0],
                         "matrices": [[[-1.0, 1.0], [1.0, -1.0]],
                                      [[-1.0, 0.7], [1.0, -1.0]]]},
            "initial": {"kind": "uniform"},
            "times": {"kind": "linear", "stop": 1.0, "points": 2}
        }"#;
        let err = parse_config(text, Overrides::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mutation.matrices[1]"), "{msg}");
        assert!(msg.contains("column 1"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_named() {
        let text = minimal().replace("\"rho\"", "\"rh\"");
        let err = parse_config(&text, Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("rh"), "{err}");
    }

    #[test]
    fn round_trip_is_canonical() {
        let run = parse_config(minimal(), Overrides::default()).unwrap();
        let emitted = emit(&run.config);
        let reparsed = parse_config(&emitted, Overrides::default()).unwrap();
        assert_eq!(run.config, reparsed.config);
        assert_eq!(emit(&reparsed.config), emitted);
        assert_eq!(run.model_hash, reparsed.model_hash);
    }

    #[test]
    fn overrides_feed_the_hash() {
        let a = parse_config(minimal(), Overrides::default()).unwrap();
        let b = parse_config(minimal(), Overrides { dt: Some(1e-2), seed: None }).unwrap();
        assert_ne!(a.model_hash, b.model_hash);
        assert_eq!(b.dt, 1e-2);
    }

    #[test]
    fn random_initial_is_seed_reproducible() {
        let text = minimal().replace(
            r#"{"kind": "explicit", "weights": [0.5, 0.0, 0.0, 0.5]}"#,
            r#"{"kind": "random"}"#,
        );
        let a = parse_config(&text, Overrides { dt: None, seed: Some(9) }).unwrap();
        let b = parse_config(&text, Overrides { dt: None, seed: Some(9) }).unwrap();
        let c = parse_config(&text, Overrides { dt: None, seed: Some(10) }).unwrap();
        assert_eq!(a.model.initial().weights(), b.model.initial().weights());
        assert_ne!(a.model.initial().weights(), c.model.initial().weights());
        assert!((a.model.initial().mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_grid_starts_at_zero() {
        let text = minimal().replace(
            r#"{"kind": "linear", "stop": 1.0, "points": 11}"#,
            r#"{"kind": "log", "start": 0.01, "stop": 10.0, "points": 7}"#,
        );
        let run = parse_config(&text, Overrides::default()).unwrap();
        assert_eq!(run.times[0], 0.0);
        assert_eq!(run.times.len(), 8);
        assert!((run.times.last().unwrap() - 10.0).abs() < 1e-12);
        for w in run.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn product_initial_builds_the_tensor() {
        let text = minimal().replace(
            r#"{"kind": "explicit", "weights": [0.5, 0.0, 0.0, 0.5]}"#,
            r#"{"kind": "product", "factors": [[0.3, 0.7], [0.5, 0.5]]}"#,
        );
        let run = parse_config(&text, Overrides::default()).unwrap();
        let w = run.model.initial().weights();
        for (x, y) in w.iter().zip(&[0.15, 0.15, 0.35, 0.35]) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
