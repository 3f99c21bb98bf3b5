//! Exact trajectories of mutation-recombination-selection dynamics on finite
//! product type spaces.
//!
//! Types are sequences over finitely many sites; crossovers happen at the
//! links between adjacent sites, mutation acts per site through Markov
//! generators, and fitness is additive across sites. Under these assumptions
//! the nonlinear infinite-population dynamics has a closed-form solution:
//! the flow is a convex combination of composite recombinators with explicit
//! exponential coefficients, conjugated by the (linear) mutation-selection
//! semigroup and a final renormalization. Moebius inversion over the link
//! lattice turns the same data into a complete family of linkage
//! disequilibria, each decaying as a pure exponential.
//!
//! The crate provides the measure algebra ([`measure`]), the recombinator
//! calculus and its coefficient functions ([`recombination`]), per-site
//! Markov semigroups ([`mutation`]), additive selection ([`selection`]), the
//! assembled solvers with an independent fixed-step RK4 oracle
//! ([`dynamics`]), and the partition-lattice correlation transforms
//! ([`correlations`]). Everything is immutable after construction and safe
//! to share across threads.

pub mod correlations;
pub mod dynamics;
pub mod error;
pub mod matrix;
pub mod measure;
pub mod mutation;
pub mod recombination;
pub mod selection;
pub mod type_space;

pub use error::{Error, Result};
pub use matrix::SquareMatrix;
pub use measure::{
    tensor_product, tensor_product_on, Cylinder, Measure, SignedMeasure, NEGATIVE_TOLERANCE,
};
pub use mutation::{MutationModel, SiteGenerator};
pub use recombination::{
    coeff_a, coeff_b, decay_check, kpoint_function, ld_count, linkage_disequilibria,
    recombine_link, recombine_link_signed, recombine_set, solve_recombination, span_link_set,
    t_operator, CoefficientTable, LdTable, MarginalCache, RecombinationRates,
    RecombinationSolver,
};
pub use selection::{FitnessModel, MeanFitnessTrace};
pub use type_space::{moebius_subset, Limits, LinkSet, OrderedPartition, TypeSpace};

pub use correlations::{
    correlations_from_moments, cylinder_correlation, moebius_partition,
    moments_from_correlations, partitions_of, site_correlation, MomentTable, SetPartition,
};
pub use dynamics::{
    discrete_interference_step, equilibrium, full_rhs, integrate_rk4, integrate_rk4_at,
    solve_combined, t_decay_rate, CombinedSolver, CrossoverProbs, DecayReport,
    EquilibriumReport, ModelSpec, Trajectory,
};
