//! The assembled dynamics: full right-hand side, the closed-form combined
//! solver, an independent fixed-step RK4 oracle, decay-rate diagnostics,
//! asymptotic equilibria, and the discrete-time complete-interference map.
//!
//! The combined solver evaluates the tensor ansatz
//!
//! ```text
//! eta_t   = exp(tS) sum_G a_G(t) R_G(omega_0),      S = Q + P,
//! omega_t = (|omega_0| / |eta_t|) eta_t,
//! ```
//!
//! with `exp(tS)` applied axis-wise per site (the per-site operators
//! `s_i = mu_i q_i + diag(r_i)` commute across sites; within a site the sum
//! is exponentiated as one matrix, so no splitting error enters). The
//! ansatz is the exact solution whenever every `exp(t s_i)` is a positive
//! multiple of a Markov matrix — i.e. for pure recombination, for
//! mutation plus recombination, and for fitness that is constant within
//! each site — because only such factors commute with the recombinators.
//! With fitness that genuinely varies within a site the commutation fails
//! (a diagonal factor rescales one segment's marginal but not the other's)
//! and the ansatz deviates from the true flow at order of the fitness
//! spread times the linkage disequilibria; compare against the oracle
//! before trusting it in that regime. The RK4 integrator never touches
//! coefficient functions, marginal caches or matrix exponentials; it
//! drives the defining right-hand side directly and is the oracle
//! everything else is compared against.

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::measure::{Measure, SignedMeasure};
use crate::mutation::{markov_exp, MutationModel};
use crate::recombination::{
    recombine_link, CoefficientTable, MarginalCache, RecombinationRates,
};
use crate::selection::{FitnessModel, MeanFitnessTrace};
use crate::type_space::{LinkSet, TypeSpace};

/// Trajectory entries are clamped at this much negativity before being
/// re-wrapped as positive measures; anything worse aborts the integration.
const TRAJECTORY_TOLERANCE: f64 = 1e-10;
/// Mass drift allowed along a trajectory.
const MASS_TOLERANCE: f64 = 1e-9;

/// A complete model: type space, crossover rates, optional mutation and
/// fitness, and the initial measure.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    space: TypeSpace,
    rates: RecombinationRates,
    mutation: Option<MutationModel>,
    fitness: Option<FitnessModel>,
    initial: Measure,
}

impl ModelSpec {
    pub fn new(
        space: TypeSpace,
        rates: RecombinationRates,
        mutation: Option<MutationModel>,
        fitness: Option<FitnessModel>,
        initial: Measure,
    ) -> Result<Self> {
        if rates.n_links() != space.n_links() {
            return Err(Error::Validation(format!(
                "{} crossover rates given for a space with {} links",
                rates.n_links(),
                space.n_links()
            )));
        }
        if let Some(f) = &fitness {
            if f.space() != &space {
                return Err(Error::Validation(
                    "fitness model lives on a different space".into(),
                ));
            }
        }
        if initial.space() != &space {
            return Err(Error::Validation(
                "initial measure lives on a different space".into(),
            ));
        }
        if initial.mass() <= 0.0 {
            return Err(Error::Validation("initial measure must have positive mass".into()));
        }
        // Mutation dimensions are checked by MutationModel::new against the
        // same space; re-validate here in case it was built independently.
        if let Some(m) = &mutation {
            if m.generators().len() != space.n_sites() {
                return Err(Error::Validation(
                    "mutation model has the wrong number of sites".into(),
                ));
            }
            for (i, g) in m.generators().iter().enumerate() {
                if g.dim() != space.cardinality(i) {
                    return Err(Error::Validation(format!(
                        "mutation generator for site {i} has dimension {}, expected {}",
                        g.dim(),
                        space.cardinality(i)
                    )));
                }
            }
        }
        Ok(Self { space, rates, mutation, fitness, initial })
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn rates(&self) -> &RecombinationRates {
        &self.rates
    }

    pub fn mutation(&self) -> Option<&MutationModel> {
        self.mutation.as_ref()
    }

    pub fn fitness(&self) -> Option<&FitnessModel> {
        self.fitness.as_ref()
    }

    pub fn initial(&self) -> &Measure {
        &self.initial
    }

    pub fn with_initial(&self, initial: Measure) -> Result<Self> {
        Self::new(
            self.space.clone(),
            self.rates.clone(),
            self.mutation.clone(),
            self.fitness.clone(),
            initial,
        )
    }

    /// The combined per-site operator `s_i = mu_i q_i + diag(r_i)`, or `None`
    /// when the site has neither mutation nor fitness.
    pub fn site_operator(&self, site: usize) -> Option<SquareMatrix> {
        let dim = self.space.cardinality(site);
        let mut op = SquareMatrix::zeros(dim);
        let mut any = false;
        if let Some(m) = &self.mutation {
            let scaled = m.generator(site).scaled_matrix();
            if !scaled.is_zero() {
                op.add_assign(&scaled);
                any = true;
            }
        }
        if let Some(f) = &self.fitness {
            let r = &f.site_fitness()[site];
            if r.iter().any(|&v| v != 0.0) {
                op = op.add_diagonal(r);
                any = true;
            }
        }
        any.then_some(op)
    }

    fn site_operators(&self) -> Vec<Option<SquareMatrix>> {
        (0..self.space.n_sites()).map(|i| self.site_operator(i)).collect()
    }

    /// Mean fitness of a state under this model; zero when no fitness is set.
    pub fn mean_fitness(&self, omega: &Measure) -> Result<f64> {
        match &self.fitness {
            Some(f) => f.mean_fitness(omega),
            None => Ok(0.0),
        }
    }
}

/// The full right-hand side: mutation term plus `sum_a rho_a (R_a - 1)` plus
/// the selection term. Zero mass on the positive cone.
pub fn full_rhs(model: &ModelSpec, omega: &Measure) -> Result<SignedMeasure> {
    if omega.space() != model.space() {
        return Err(Error::InvalidArgument("state lives on a different space".into()));
    }
    let mut rhs = SignedMeasure::zero(model.space.clone());
    if let Some(m) = &model.mutation {
        rhs.add_scaled_assign(1.0, &m.rhs(omega.as_signed()));
    }
    for link in 0..model.space.n_links() {
        let rho = model.rates.get(link);
        let recombined = recombine_link(omega, link)?;
        rhs.add_scaled_assign(rho, recombined.as_signed());
        rhs.add_scaled_assign(-rho, omega.as_signed());
    }
    if let Some(f) = &model.fitness {
        rhs.add_scaled_assign(1.0, &f.rhs(omega)?);
    }
    Ok(rhs)
}

/// A sampled solution: states over a strictly increasing time grid starting
/// at zero, optionally with per-time coefficient tables and the mean-fitness
/// trace.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Measure>,
    pub coefficients: Option<Vec<CoefficientTable>>,
    pub mean_fitness: Option<MeanFitnessTrace>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Maximum mass drift relative to the initial state.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.states[0].mass();
        self.states.iter().map(|s| (s.mass() - m0).abs()).fold(0.0, f64::max)
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    for w in times.windows(2) {
        if w[1].is_nan() || w[1] <= w[0] {
            return Err(Error::InvalidArgument(
                "time grid must be strictly increasing".into(),
            ));
        }
    }
    Ok(())
}

/// Classical fixed-step RK4 on the full right-hand side, storing every step.
/// States are never renormalized; mass conservation is asserted, not
/// enforced.
pub fn integrate_rk4(model: &ModelSpec, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidArgument(format!("t_end {t_end} must be nonnegative")));
    }
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt {dt} must be positive")));
    }
    let steps = (t_end / dt).round() as usize;
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
    integrate_rk4_at(model, &times, dt)
}

/// RK4 as above, but storing only the requested sample times. Every sample
/// must lie on an integration step (a multiple of `dt`).
pub fn integrate_rk4_at(model: &ModelSpec, times: &[f64], dt: f64) -> Result<Trajectory> {
    check_grid(times)?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::InvalidArgument(format!("dt {dt} must be positive")));
    }
    let mut capture_steps = Vec::with_capacity(times.len());
    for &t in times {
        let k = (t / dt).round();
        if (t - k * dt).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "sample time {t} is not a multiple of dt = {dt}"
            )));
        }
        capture_steps.push(k as usize);
    }

    let mass0 = model.initial.mass();
    let mut state = model.initial.clone();
    let mut states = Vec::with_capacity(times.len());
    let mut capture = capture_steps.iter().peekable();
    let last = *capture_steps.last().expect("nonempty grid");

    for step in 0..=last {
        let t = step as f64 * dt;
        while capture.peek() == Some(&&step) {
            capture.next();
            if (state.mass() - mass0).abs() > MASS_TOLERANCE * mass0.max(1.0) {
                return Err(Error::Integration {
                    time: t,
                    message: format!(
                        "mass drifted from {mass0} to {} beyond tolerance",
                        state.mass()
                    ),
                });
            }
            states.push(state.clone());
        }
        if step == last {
            break;
        }
        state = rk4_step(model, &state, t, dt)?;
    }
    Ok(Trajectory { times: times.to_vec(), states, coefficients: None, mean_fitness: None })
}

fn rk4_step(model: &ModelSpec, state: &Measure, t: f64, dt: f64) -> Result<Measure> {
    let k1 = full_rhs(model, state)?;
    let y2 = offset_state(state, &k1, dt / 2.0, t)?;
    let k2 = full_rhs(model, &y2)?;
    let y3 = offset_state(state, &k2, dt / 2.0, t)?;
    let k3 = full_rhs(model, &y3)?;
    let y4 = offset_state(state, &k3, dt, t)?;
    let k4 = full_rhs(model, &y4)?;

    let mut update = k1;
    update.add_scaled_assign(2.0, &k2);
    update.add_scaled_assign(2.0, &k3);
    update.add_scaled_assign(1.0, &k4);
    offset_state(state, &update, dt / 6.0, t)
}

fn offset_state(state: &Measure, slope: &SignedMeasure, h: f64, t: f64) -> Result<Measure> {
    let w: Vec<f64> = state
        .weights()
        .iter()
        .zip(slope.weights())
        .map(|(x, k)| x + h * k)
        .collect();
    if let Some(bad) = w.iter().find(|x| !x.is_finite()) {
        return Err(Error::Integration {
            time: t,
            message: format!("state blew up to non-finite value {bad}"),
        });
    }
    Measure::with_tolerance(state.space().clone(), w, TRAJECTORY_TOLERANCE).map_err(|e| {
        Error::Integration { time: t, message: format!("state left the positive cone: {e}") }
    })
}

/// Closed-form solver for the combined dynamics, pointwise in `t`. One
/// marginal cache is built per initial measure and shared by all evaluation
/// times.
#[derive(Clone, Debug)]
pub struct CombinedSolver<'a> {
    model: &'a ModelSpec,
    cache: MarginalCache,
    site_ops: Vec<Option<SquareMatrix>>,
    has_site_ops: bool,
}

impl<'a> CombinedSolver<'a> {
    pub fn new(model: &'a ModelSpec) -> Result<Self> {
        let cache = MarginalCache::new(&model.initial);
        let site_ops = model.site_operators();
        let has_site_ops = site_ops.iter().any(|o| o.is_some());
        Ok(Self { model, cache, site_ops, has_site_ops })
    }

    /// The linearized state `eta_t = exp(tS) sum_G a_G(t) R_G(omega_0)`
    /// before renormalization; with no mutation and no fitness this is
    /// already the solution.
    pub fn eta_at(&self, t: f64) -> Result<Measure> {
        let table = CoefficientTable::at(t, self.model.rates())?;
        let mixed = self.cache.combination(table.a_values());
        if !self.has_site_ops {
            return Ok(Measure::from_nonnegative(
                self.model.space.clone(),
                mixed.into_weights().into_iter().map(|w| w.max(0.0)).collect(),
            ));
        }
        let mut current = mixed;
        for (site, op) in self.site_ops.iter().enumerate() {
            if let Some(s) = op {
                let semigroup = markov_exp(&s.scaled(t))?;
                current = current.apply_axis(site, &semigroup);
            }
        }
        // Nonnegative operators on a nonnegative tensor stay nonnegative.
        Ok(Measure::from_nonnegative(
            self.model.space.clone(),
            current.into_weights().into_iter().map(|w| w.max(0.0)).collect(),
        ))
    }

    /// The solution `omega_t = (|omega_0|/|eta_t|) eta_t`.
    pub fn state_at(&self, t: f64) -> Result<Measure> {
        let eta = self.eta_at(t)?;
        if !self.has_site_ops {
            return Ok(eta);
        }
        let norm = eta.mass();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::Numerical(format!(
                "linearized state has norm {norm} at t = {t}; cannot renormalize"
            )));
        }
        eta.scaled(self.cache.mass() / norm)
    }

    /// Evaluates the closed form on a grid, recording coefficient tables and
    /// (when fitness is present) the mean-fitness trace.
    pub fn solve(&self, times: &[f64]) -> Result<Trajectory> {
        check_grid(times)?;
        let mut states = Vec::with_capacity(times.len());
        let mut tables = Vec::with_capacity(times.len());
        for &t in times {
            states.push(self.state_at(t)?);
            tables.push(CoefficientTable::at(t, self.model.rates())?);
        }
        let mean_fitness = match self.model.fitness() {
            Some(f) => {
                let values: Vec<f64> =
                    states.iter().map(|s| f.mean_fitness(s)).collect::<Result<_>>()?;
                Some(MeanFitnessTrace::new(times.to_vec(), values)?)
            }
            None => None,
        };
        Ok(Trajectory {
            times: times.to_vec(),
            states,
            coefficients: Some(tables),
            mean_fitness,
        })
    }
}

/// One-shot closed-form solve over a time grid.
pub fn solve_combined(model: &ModelSpec, times: &[f64]) -> Result<Trajectory> {
    CombinedSolver::new(model)?.solve(times)
}

/// Residual report for the decoupled decay of `T_G` along a trajectory.
#[derive(Clone, Debug)]
pub struct DecayReport {
    /// Interior grid times where the finite difference was evaluated.
    pub times: Vec<f64>,
    /// Max-abs residual per interior time.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Compares the centered finite difference of `t -> T_G(omega_t)` against
/// the predicted generator `(S - L(t) - sum_{a not in G} rho_a) T_G(omega_t)`
/// (the mean-fitness term drops out when no fitness is present).
pub fn t_decay_rate(model: &ModelSpec, set: LinkSet, trajectory: &Trajectory) -> Result<DecayReport> {
    if trajectory.len() < 3 {
        return Err(Error::InvalidArgument(
            "decay-rate check needs at least three trajectory points".into(),
        ));
    }
    let site_ops = model.site_operators();
    let rho_out = model.rates.sum_over(set.complement());
    let t_of: Vec<SignedMeasure> = trajectory
        .states
        .iter()
        .map(|s| MarginalCache::new(s).t_operator(set))
        .collect();

    let mut times = Vec::with_capacity(trajectory.len() - 2);
    let mut residuals = Vec::with_capacity(trajectory.len() - 2);
    for i in 1..trajectory.len() - 1 {
        let dt = trajectory.times[i + 1] - trajectory.times[i - 1];
        let derivative = t_of[i + 1].sub(&t_of[i - 1]).scaled(1.0 / dt);

        let mut predicted = SignedMeasure::zero(model.space.clone());
        for (site, op) in site_ops.iter().enumerate() {
            if let Some(s) = op {
                predicted.add_scaled_assign(1.0, &t_of[i].apply_axis(site, s));
            }
        }
        let mean = model.mean_fitness(&trajectory.states[i])?;
        predicted.add_scaled_assign(-(mean + rho_out), &t_of[i]);

        let residual = derivative
            .sub(&predicted)
            .weights()
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        times.push(trajectory.times[i]);
        residuals.push(residual);
    }
    let max_residual = residuals.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(DecayReport { times, residuals, max_residual })
}

/// The asymptotic state and its diagnostics.
#[derive(Clone, Debug)]
pub struct EquilibriumReport {
    /// The complete product measure `(x)_i nu_i`, normalized to mass one.
    pub measure: Measure,
    /// Per-site dominant-eigenvector factors.
    pub site_factors: Vec<Vec<f64>>,
    /// Sites whose combined operator is reducible; for these the true limit
    /// may depend on the initial measure.
    pub reducible_sites: Vec<usize>,
    /// Variation norm of the full right-hand side at the product measure.
    pub rhs_residual: f64,
}

/// Computes the product-form equilibrium: per site the dominant eigenvector
/// of `exp(s_i)` by power iteration (tolerance 1e-12, at most `10^5`
/// iterations).
pub fn equilibrium(model: &ModelSpec) -> Result<EquilibriumReport> {
    let space = model.space();
    let mut site_factors = Vec::with_capacity(space.n_sites());
    let mut reducible_sites = Vec::new();
    for site in 0..space.n_sites() {
        let dim = space.cardinality(site);
        let (w, irreducible) = match model.site_operator(site) {
            Some(op) => {
                let irreducible = offdiagonal_strongly_connected(&op);
                (markov_exp(&op)?, irreducible)
            }
            None => (SquareMatrix::identity(dim), false),
        };
        if !irreducible {
            reducible_sites.push(site);
        }
        site_factors.push(power_iteration(&w)?);
    }

    let mut weights = vec![1.0];
    for factor in &site_factors {
        weights = crate::measure::kron_weights(&[&weights, factor]);
    }
    let measure = Measure::from_nonnegative(space.clone(), weights);
    let rhs_residual = full_rhs(model, &measure)?.variation_norm();
    Ok(EquilibriumReport { measure, site_factors, reducible_sites, rhs_residual })
}

fn offdiagonal_strongly_connected(m: &SquareMatrix) -> bool {
    let d = m.dim();
    let mut reach = vec![false; d * d];
    for k in 0..d {
        reach[k * d + k] = true;
        for l in 0..d {
            if k != l && m.get(k, l) > 0.0 {
                reach[l * d + k] = true;
            }
        }
    }
    for via in 0..d {
        for from in 0..d {
            if reach[from * d + via] {
                for to in 0..d {
                    if reach[via * d + to] {
                        reach[from * d + to] = true;
                    }
                }
            }
        }
    }
    reach.iter().all(|&r| r)
}

fn power_iteration(w: &SquareMatrix) -> Result<Vec<f64>> {
    let d = w.dim();
    let mut v = vec![1.0 / d as f64; d];
    for _ in 0..100_000 {
        let next = w.apply(&v);
        let sum: f64 = next.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::Numerical(
                "power iteration produced a non-positive vector".into(),
            ));
        }
        let next: Vec<f64> = next.iter().map(|x| (x / sum).max(0.0)).collect();
        let diff = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if diff < 1e-12 {
            return Ok(v);
        }
    }
    Err(Error::Numerical("power iteration did not converge within 100000 steps".into()))
}

/// Per-generation crossover probabilities for the discrete-time map with
/// complete interference. Unlike continuous rates these may vanish, but
/// together they must not exceed one.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossoverProbs {
    probs: Vec<f64>,
}

impl CrossoverProbs {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "crossover probability probs[{i}] = {p} must be nonnegative"
                )));
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "crossover probabilities sum to {total} > 1; at most one crossover \
                 can happen per generation"
            )));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// One generation of the discrete-time single-crossover map:
/// `omega' = sum_a p_a R_a(omega) + (1 - sum_a p_a) omega`. Mass and
/// positivity preserving.
pub fn discrete_interference_step(probs: &CrossoverProbs, omega: &Measure) -> Result<Measure> {
    if probs.probs.len() != omega.space().n_links() {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities given for a space with {} links",
            probs.probs.len(),
            omega.space().n_links()
        )));
    }
    let mut out = omega.as_signed().scaled(1.0 - probs.total());
    for (link, &p) in probs.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        out.add_scaled_assign(p, recombine_link(omega, link)?.as_signed());
    }
    Measure::new(omega.space().clone(), out.into_weights())
}
