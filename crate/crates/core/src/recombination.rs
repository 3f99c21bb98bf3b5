//! Recombinators, the closed-form solution of the pure single-crossover
//! dynamics, and linkage disequilibria.
//!
//! The elementary recombinator at link `alpha` replaces a measure by the
//! normalized product of its leading and trailing marginals cut at that
//! link. On the positive cone the recombinators are commuting idempotents,
//! so a composite recombinator `R_G` factorizes the measure over the blocks
//! of the ordered partition generated by the cut set `G`. The flow of
//!
//! ```text
//! d/dt omega = sum_alpha rho_alpha (R_alpha - 1)(omega)
//! ```
//!
//! is the convex combination `omega_t = sum_G a_G(t) R_G(omega_0)` with
//!
//! ```text
//! a_G(t) = exp(-sum_{a not in G} rho_a t) * prod_{b in G} (1 - exp(-rho_b t)),
//! ```
//!
//! i.e. `a_G(t)` is the probability that the links hit by at least one
//! crossover up to time `t` are exactly `G`. The alternating sums
//! `T_G = sum_{H superset G} (-1)^{|H-G|} R_H` decouple the dynamics: each
//! `T_G(omega_t)` decays as the pure exponential `b_G(t) =
//! exp(-sum_{a not in G} rho_a t)`, and evaluating them on cylinder sets
//! yields the linkage disequilibria.

use crate::error::{Error, Result};
use crate::measure::{kron_weights, marginal_range_weights, Cylinder, Measure, SignedMeasure};
use crate::type_space::{LinkSet, TypeSpace};

/// Per-link crossover rates, all strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct RecombinationRates {
    rho: Vec<f64>,
}

impl RecombinationRates {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        for (i, &r) in rho.iter().enumerate() {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::Validation(format!(
                    "rho[{i}] = {r} must be strictly positive; a zero-rate link should be \
                     removed by merging its two adjacent sites into one"
                )));
            }
        }
        Ok(Self { rho })
    }

    pub fn n_links(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn get(&self, link: usize) -> f64 {
        self.rho[link]
    }

    /// `sum_{alpha in set} rho_alpha`.
    pub fn sum_over(&self, set: LinkSet) -> f64 {
        debug_assert_eq!(set.width(), self.rho.len());
        set.links().map(|l| self.rho[l]).sum()
    }

    pub fn total(&self) -> f64 {
        self.rho.iter().sum()
    }

    fn check_space(&self, space: &TypeSpace) -> Result<()> {
        if self.rho.len() != space.n_links() {
            return Err(Error::InvalidArgument(format!(
                "{} rates given for a space with {} links",
                self.rho.len(),
                space.n_links()
            )));
        }
        Ok(())
    }
}

fn check_link(space: &TypeSpace, link: usize) -> Result<()> {
    if link >= space.n_links() {
        return Err(Error::Index(format!(
            "link {link} out of range (space has {} links)",
            space.n_links()
        )));
    }
    Ok(())
}

/// Elementary recombinator on the positive cone: cut at `link`, marginalize
/// both segments, and relink them as a product. Preserves the mass; maps the
/// zero measure to itself.
pub fn recombine_link(omega: &Measure, link: usize) -> Result<Measure> {
    check_link(omega.space(), link)?;
    let mass = omega.mass();
    if mass == 0.0 {
        return Ok(Measure::from_nonnegative(
            omega.space().clone(),
            vec![0.0; omega.space().total_size()],
        ));
    }
    let space = omega.space();
    let lead = marginal_range_weights(space, omega.weights(), 0, link + 1);
    let trail = marginal_range_weights(space, omega.weights(), link + 1, space.n_sites());
    let mut w = kron_weights(&[&lead, &trail]);
    for x in &mut w {
        *x /= mass;
    }
    Ok(Measure::from_nonnegative(space.clone(), w))
}

/// The same map extended to signed measures, normalizing by the variation
/// norm. Not linear, but globally Lipschitz.
pub fn recombine_link_signed(omega: &SignedMeasure, link: usize) -> Result<SignedMeasure> {
    check_link(omega.space(), link)?;
    let norm = omega.variation_norm();
    if norm == 0.0 {
        return Ok(SignedMeasure::zero(omega.space().clone()));
    }
    let space = omega.space();
    let lead = marginal_range_weights(space, omega.weights(), 0, link + 1);
    let trail = marginal_range_weights(space, omega.weights(), link + 1, space.n_sites());
    let mut w = kron_weights(&[&lead, &trail]);
    for x in &mut w {
        *x /= norm;
    }
    SignedMeasure::new(space.clone(), w)
}

/// Composite recombinator `R_G`: factorizes the measure over the blocks of
/// the ordered partition cut by `G`, computed directly as the block product
/// `(1/mass^{|G|}) (x)_B pi_B.omega`. `R_{}` is the identity.
pub fn recombine_set(omega: &Measure, set: LinkSet) -> Result<Measure> {
    if set.width() != omega.space().n_links() {
        return Err(Error::InvalidArgument(format!(
            "link set of width {} used with a space of {} links",
            set.width(),
            omega.space().n_links()
        )));
    }
    Ok(MarginalCache::new(omega).recombine(set))
}

/// Coefficient function of the closed-form flow:
/// `a_G(t) = exp(-sum_{a not in G} rho_a t) * prod_{b in G} (1 - exp(-rho_b t))`.
pub fn coeff_a(set: LinkSet, t: f64, rates: &RecombinationRates) -> Result<f64> {
    check_time(t)?;
    check_set_rates(set, rates)?;
    let decay = (-rates.sum_over(set.complement()) * t).exp();
    let mut hit = 1.0;
    for l in set.links() {
        // 1 - exp(-rho t) via expm1 for precision at small t.
        hit *= -(-rates.get(l) * t).exp_m1();
    }
    Ok(decay * hit)
}

/// Decay factor `b_K(t) = exp(-sum_{a not in K} rho_a t)`; satisfies
/// `b_K(t) = sum_{G subset K} a_G(t)`.
pub fn coeff_b(set: LinkSet, t: f64, rates: &RecombinationRates) -> Result<f64> {
    check_time(t)?;
    check_set_rates(set, rates)?;
    Ok((-rates.sum_over(set.complement()) * t).exp())
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("time {t} must be finite and nonnegative")));
    }
    Ok(())
}

fn check_set_rates(set: LinkSet, rates: &RecombinationRates) -> Result<()> {
    if set.width() != rates.n_links() {
        return Err(Error::InvalidArgument(format!(
            "link set of width {} used with {} rates",
            set.width(),
            rates.n_links()
        )));
    }
    Ok(())
}

/// All coefficients `a_G` and `b_G` at one instant, indexed by the bitmask
/// of `G`. By construction `sum_G a_G = b_L = 1` and `b_G(0) = 1`.
#[derive(Clone, Debug)]
pub struct CoefficientTable {
    t: f64,
    width: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl CoefficientTable {
    pub fn at(t: f64, rates: &RecombinationRates) -> Result<Self> {
        check_time(t)?;
        let width = rates.n_links();
        let full = LinkSet::full(width);
        let mut a = Vec::with_capacity(1usize << width);
        let mut b = Vec::with_capacity(1usize << width);
        for set in full.subsets() {
            a.push(coeff_a(set, t, rates)?);
            b.push(coeff_b(set, t, rates)?);
        }
        Ok(Self { t, width, a, b })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn a(&self, set: LinkSet) -> f64 {
        debug_assert_eq!(set.width(), self.width);
        self.a[set.bits() as usize]
    }

    pub fn b(&self, set: LinkSet) -> f64 {
        debug_assert_eq!(set.width(), self.width);
        self.b[set.bits() as usize]
    }

    /// Coefficients in ascending bitmask order.
    pub fn a_values(&self) -> &[f64] {
        &self.a
    }

    pub fn b_values(&self) -> &[f64] {
        &self.b
    }
}

/// Marginals of one positive measure over every contiguous site range.
///
/// Composite recombinators only ever need these block marginals, and they do
/// not change along a trajectory, so one cache per initial measure serves a
/// whole time sweep. Immutable after construction; share freely.
#[derive(Clone, Debug)]
pub struct MarginalCache {
    space: TypeSpace,
    mass: f64,
    // Marginal weights of the range start..end at index start*(n_sites+1)+end.
    blocks: Vec<Vec<f64>>,
}

impl MarginalCache {
    pub fn new(omega: &Measure) -> Self {
        let space = omega.space().clone();
        let n = space.n_sites();
        let mut blocks = vec![Vec::new(); (n + 1) * (n + 1)];
        for start in 0..n {
            for end in start + 1..=n {
                blocks[start * (n + 1) + end] =
                    marginal_range_weights(&space, omega.weights(), start, end);
            }
        }
        Self { space, mass: omega.mass(), blocks }
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Marginal weights of the contiguous site range `start..end`.
    pub fn block(&self, start: usize, end: usize) -> &[f64] {
        &self.blocks[start * (self.space.n_sites() + 1) + end]
    }

    /// Weights of `R_G(omega)`.
    pub fn recombined_weights(&self, set: LinkSet) -> Vec<f64> {
        if self.mass == 0.0 {
            return vec![0.0; self.space.total_size()];
        }
        let partition = self.space.partition_of(set);
        let factors: Vec<&[f64]> =
            partition.blocks().iter().map(|r| self.block(r.start, r.end)).collect();
        let mut w = kron_weights(&factors);
        let scale = self.mass.powi(set.len() as i32);
        if scale != 1.0 {
            for x in &mut w {
                *x /= scale;
            }
        }
        w
    }

    pub fn recombine(&self, set: LinkSet) -> Measure {
        Measure::from_nonnegative(self.space.clone(), self.recombined_weights(set))
    }

    /// `sum_G coeffs[G] * R_G(omega)` over all link subsets; `coeffs` is
    /// indexed by bitmask.
    pub fn combination(&self, coeffs: &[f64]) -> SignedMeasure {
        let full = LinkSet::full(self.space.n_links());
        assert_eq!(coeffs.len(), 1usize << full.width(), "coefficient table size mismatch");
        let mut out = vec![0.0; self.space.total_size()];
        for set in full.subsets() {
            let c = coeffs[set.bits() as usize];
            if c == 0.0 {
                continue;
            }
            let w = self.recombined_weights(set);
            for (o, x) in out.iter_mut().zip(&w) {
                *o += c * x;
            }
        }
        SignedMeasure::new(self.space.clone(), out).expect("finite combination")
    }

    /// Moebius-inverted recombinator `T_G(omega) = sum_{H superset G}
    /// (-1)^{|H-G|} R_H(omega)`.
    pub fn t_operator(&self, set: LinkSet) -> SignedMeasure {
        let mut out = vec![0.0; self.space.total_size()];
        for extra in set.complement().subsets() {
            let sign = if extra.len() % 2 == 0 { 1.0 } else { -1.0 };
            let w = self.recombined_weights(set.union(extra));
            for (o, x) in out.iter_mut().zip(&w) {
                *o += sign * x;
            }
        }
        SignedMeasure::new(self.space.clone(), out).expect("finite alternating sum")
    }
}

/// Closed-form solver for the pure recombination flow, reusing one marginal
/// cache across evaluation times.
#[derive(Clone, Debug)]
pub struct RecombinationSolver {
    cache: MarginalCache,
    rates: RecombinationRates,
}

impl RecombinationSolver {
    pub fn new(omega0: &Measure, rates: &RecombinationRates) -> Result<Self> {
        rates.check_space(omega0.space())?;
        Ok(Self { cache: MarginalCache::new(omega0), rates: rates.clone() })
    }

    pub fn cache(&self) -> &MarginalCache {
        &self.cache
    }

    /// `omega_t = sum_G a_G(t) R_G(omega_0)`.
    pub fn state_at(&self, t: f64) -> Result<Measure> {
        let table = CoefficientTable::at(t, &self.rates)?;
        let combo = self.cache.combination(table.a_values());
        // A convex combination of nonnegative tensors.
        Ok(Measure::from_nonnegative(
            self.cache.space().clone(),
            combo.into_weights().into_iter().map(|w| w.max(0.0)).collect(),
        ))
    }
}

/// One-shot evaluation of the recombination flow at time `t`.
pub fn solve_recombination(omega0: &Measure, t: f64, rates: &RecombinationRates) -> Result<Measure> {
    RecombinationSolver::new(omega0, rates)?.state_at(t)
}

/// `T_G(omega)`, the alternating superset sum of composite recombinators.
/// Has zero mass unless `G` is the full link set.
pub fn t_operator(omega: &Measure, set: LinkSet) -> Result<SignedMeasure> {
    if set.width() != omega.space().n_links() {
        return Err(Error::InvalidArgument(format!(
            "link set of width {} used with a space of {} links",
            set.width(),
            omega.space().n_links()
        )));
    }
    Ok(MarginalCache::new(omega).t_operator(set))
}

/// k-point function `F_G(j_1..j_k) = T_G(omega)(<j_1..j_k>)`.
pub fn kpoint_function(omega: &Measure, set: LinkSet, cylinder: &Cylinder) -> Result<f64> {
    Ok(t_operator(omega, set)?.cylinder_value(cylinder))
}

/// The unique link set for which the k-point functions of a site span can be
/// nonvanishing and independent: all links strictly left of `first` and
/// strictly right of `last`.
pub fn span_link_set(space: &TypeSpace, first: usize, last: usize) -> LinkSet {
    let links: Vec<usize> =
        (0..space.n_links()).filter(|&l| l < first || l >= last).collect();
    LinkSet::from_links(&links, space.n_links()).expect("links in range")
}

/// The linkage disequilibria of one contiguous site span: for each retained
/// value assignment, the value of `T_G` on the corresponding cylinder, with
/// `G` the complement of the span's interior links.
#[derive(Clone, Debug)]
pub struct LdTable {
    /// The (contiguous, ascending) sites of the span.
    pub sites: Vec<usize>,
    /// The link set the disequilibria decay with.
    pub links: LinkSet,
    /// `(values, F_G)` pairs in lexicographic value order. Value 0 is
    /// dropped at every site (it is the dependent choice under marginal
    /// summation), leaving `prod (M_i - 1)` entries.
    pub entries: Vec<(Vec<usize>, f64)>,
}

/// Computes the linkage disequilibria for a contiguous span of sites.
pub fn linkage_disequilibria(omega: &Measure, sites: &[usize]) -> Result<LdTable> {
    let space = omega.space();
    if sites.is_empty() {
        return Err(Error::InvalidArgument("empty site span".into()));
    }
    for w in sites.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::InvalidArgument(format!(
                "sites {:?} are not contiguous: only gap-free spans give nonvanishing, \
                 independent disequilibria for the span's canonical link set",
                sites
            )));
        }
    }
    let (first, last) = (sites[0], sites[sites.len() - 1]);
    if last >= space.n_sites() {
        return Err(Error::Index(format!(
            "site {last} out of range (space has {} sites)",
            space.n_sites()
        )));
    }
    let set = span_link_set(space, first, last);
    let t_g = t_operator(omega, set)?;

    let mut entries = Vec::new();
    let mut values: Vec<usize> = vec![1; sites.len()];
    loop {
        let assignments: Vec<(usize, usize)> =
            sites.iter().zip(&values).map(|(&s, &v)| (s, v)).collect();
        let cyl = Cylinder::new(space, &assignments)?;
        entries.push((values.clone(), t_g.cylinder_value(&cyl)));
        // Odometer over the retained values 1..M_i at each site.
        let mut done = true;
        for k in (0..sites.len()).rev() {
            values[k] += 1;
            if values[k] < space.cardinality(sites[k]) {
                done = false;
                break;
            }
            values[k] = 1;
        }
        if done {
            break;
        }
    }
    Ok(LdTable { sites: sites.to_vec(), links: set, entries })
}

/// Total number of linkage disequilibria over all site subsets,
/// `sum_D prod_{i in D} (M_i - 1)`; equals the number of states.
pub fn ld_count(space: &TypeSpace) -> usize {
    // prod_i (1 + (M_i - 1)) expanded over subsets.
    let mut count = 1usize;
    for d in 0..space.n_sites() {
        count *= space.cardinality(d); // 1 + (M_d - 1)
    }
    count
}

/// Returns the pair `(T_G(omega_t), b_G(t) T_G(omega_0))`; the two agree
/// along the recombination flow, which is exactly the decoupling property.
pub fn decay_check(
    omega0: &Measure,
    set: LinkSet,
    t: f64,
    rates: &RecombinationRates,
) -> Result<(SignedMeasure, SignedMeasure)> {
    let omega_t = solve_recombination(omega0, t, rates)?;
    let evolved = t_operator(&omega_t, set)?;
    let predicted = t_operator(omega0, set)?.scaled(coeff_b(set, t, rates)?);
    Ok((evolved, predicted))
}
