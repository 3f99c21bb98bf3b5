//! Dense tensor representation of finite signed and positive measures on a
//! product type space, with marginalization, tensor products, norms and
//! cylinder-set evaluation.
//!
//! Everything here has value semantics: operations allocate fresh arrays and
//! never alias their inputs, so measures can be shared read-only across
//! threads.

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::type_space::{Limits, TypeSpace};

/// Default tolerance for negative entries when constructing a positive
/// [`Measure`]: entries in `[-NEGATIVE_TOLERANCE, 0)` are clamped to zero,
/// anything more negative is rejected.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// A finite signed measure: one real weight per state.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedMeasure {
    space: TypeSpace,
    weights: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(space: TypeSpace, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.total_size() {
            return Err(Error::InvalidArgument(format!(
                "weight vector has length {}, space has {} states",
                weights.len(),
                space.total_size()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Validation(format!("non-finite weight at flat index {i}")));
        }
        Ok(Self { space, weights })
    }

    pub fn zero(space: TypeSpace) -> Self {
        let n = space.total_size();
        Self { space, weights: vec![0.0; n] }
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mass `omega(X)`, the plain sum of the entries.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Total variation norm: the sum of the absolute entries. Equals the mass
    /// for positive measures.
    pub fn variation_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Sums out every site not in `block`; the result lives on the sub-space
    /// formed by the selected sites in ascending order. Linear in the input,
    /// and mass preserving.
    pub fn marginal(&self, block: &[usize]) -> Result<SignedMeasure> {
        let sites = check_block(&self.space, block)?;
        let sub_cards: Vec<usize> = sites.iter().map(|&s| self.space.cardinality(s)).collect();
        let sub_space = TypeSpace::with_limits(&sub_cards, self.space.limits())?;

        // Contiguous blocks take the three-loop fast path.
        if sites.windows(2).all(|w| w[1] == w[0] + 1) {
            let weights = marginal_range_weights(
                &self.space,
                &self.weights,
                sites[0],
                sites[sites.len() - 1] + 1,
            );
            return SignedMeasure::new(sub_space, weights);
        }

        let n = self.space.n_sites();
        let cards = self.space.cardinalities();
        let mut sub_strides = vec![0usize; n];
        {
            let mut stride = 1usize;
            for &s in sites.iter().rev() {
                sub_strides[s] = stride;
                stride *= cards[s];
            }
        }
        let mut out = vec![0.0; sub_space.total_size()];
        let mut coords = vec![0usize; n];
        let mut sub_flat = 0usize;
        for &w in &self.weights {
            out[sub_flat] += w;
            // Odometer increment, keeping the projected index in sync.
            for i in (0..n).rev() {
                coords[i] += 1;
                sub_flat += sub_strides[i];
                if coords[i] < cards[i] {
                    break;
                }
                sub_flat -= sub_strides[i] * cards[i];
                coords[i] = 0;
            }
        }
        SignedMeasure::new(sub_space, out)
    }

    /// Sum of the entries over all states matching the cylinder's
    /// assignments; the empty cylinder gives the total mass.
    pub fn cylinder_value(&self, cylinder: &Cylinder) -> f64 {
        let cards = self.space.cardinalities();
        let strides = self.space.strides();
        let mut base = 0usize;
        let mut assigned = vec![false; cards.len()];
        for &(site, value) in cylinder.assignments() {
            assert!(site < cards.len(), "cylinder site {site} out of range");
            assert!(value < cards[site], "cylinder value {value} out of range at site {site}");
            assigned[site] = true;
            base += value * strides[site];
        }
        let free: Vec<(usize, usize)> = (0..cards.len())
            .filter(|&s| !assigned[s])
            .map(|s| (strides[s], cards[s]))
            .collect();
        if free.is_empty() {
            return self.weights[base];
        }
        let mut coords = vec![0usize; free.len()];
        let mut offset = base;
        let mut sum = 0.0;
        loop {
            sum += self.weights[offset];
            let mut done = true;
            for (k, &(stride, card)) in free.iter().enumerate().rev() {
                coords[k] += 1;
                offset += stride;
                if coords[k] < card {
                    done = false;
                    break;
                }
                coords[k] = 0;
                offset -= stride * card;
            }
            if done {
                break;
            }
        }
        sum
    }

    pub fn scaled(&self, c: f64) -> SignedMeasure {
        SignedMeasure {
            space: self.space.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
        }
    }

    pub fn add(&self, other: &SignedMeasure) -> SignedMeasure {
        assert_eq!(self.space, other.space, "measures live on different spaces");
        SignedMeasure {
            space: self.space.clone(),
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SignedMeasure) -> SignedMeasure {
        assert_eq!(self.space, other.space, "measures live on different spaces");
        SignedMeasure {
            space: self.space.clone(),
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a - b).collect(),
        }
    }

    pub(crate) fn add_scaled_assign(&mut self, coeff: f64, other: &SignedMeasure) {
        assert_eq!(self.space, other.space, "measures live on different spaces");
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += coeff * b;
        }
    }

    /// Applies a matrix along one tensor axis: the entry at coordinate `k` of
    /// `site` becomes `sum_l m[k][l] * w[.., l, ..]`.
    pub(crate) fn apply_axis(&self, site: usize, m: &SquareMatrix) -> SignedMeasure {
        let d = self.space.cardinality(site);
        assert_eq!(m.dim(), d, "matrix dimension does not match site cardinality");
        let stride = self.space.strides()[site];
        let total = self.space.total_size();
        let outer = total / (d * stride);
        let w = &self.weights;
        let mut out = vec![0.0; total];
        for o in 0..outer {
            let base_o = o * d * stride;
            for s in 0..stride {
                let base = base_o + s;
                for k in 0..d {
                    let mut acc = 0.0;
                    for l in 0..d {
                        acc += m.get(k, l) * w[base + l * stride];
                    }
                    out[base + k * stride] = acc;
                }
            }
        }
        SignedMeasure { space: self.space.clone(), weights: out }
    }

    pub(crate) fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

fn check_block(space: &TypeSpace, block: &[usize]) -> Result<Vec<usize>> {
    if block.is_empty() {
        return Err(Error::InvalidArgument("marginal over an empty site block".into()));
    }
    let mut sites = block.to_vec();
    sites.sort_unstable();
    for w in sites.windows(2) {
        if w[0] == w[1] {
            return Err(Error::InvalidArgument(format!("site {} repeated in block", w[0])));
        }
    }
    if let Some(&last) = sites.last() {
        if last >= space.n_sites() {
            return Err(Error::Index(format!(
                "site {last} out of range (space has {} sites)",
                space.n_sites()
            )));
        }
    }
    Ok(sites)
}

/// Marginal over the contiguous site range `start..end`, as raw weights.
pub(crate) fn marginal_range_weights(
    space: &TypeSpace,
    weights: &[f64],
    start: usize,
    end: usize,
) -> Vec<f64> {
    let cards = space.cardinalities();
    let lead: usize = cards[..start].iter().product();
    let mid: usize = cards[start..end].iter().product();
    let trail: usize = cards[end..].iter().product();
    let mut out = vec![0.0; mid];
    for l in 0..lead {
        let base_l = l * mid * trail;
        for (m, slot) in out.iter_mut().enumerate() {
            let base = base_l + m * trail;
            let mut acc = 0.0;
            for t in 0..trail {
                acc += weights[base + t];
            }
            *slot += acc;
        }
    }
    out
}

/// Kronecker product of weight blocks in order; with contiguous blocks this
/// is exactly the row-major tensor over the concatenated space.
pub(crate) fn kron_weights(blocks: &[&[f64]]) -> Vec<f64> {
    let mut acc = vec![1.0];
    for block in blocks {
        let mut next = Vec::with_capacity(acc.len() * block.len());
        for &x in &acc {
            for &y in *block {
                next.push(x * y);
            }
        }
        acc = next;
    }
    acc
}

/// Tensor product of measures on consecutive blocks; the result lives on the
/// concatenation of the factor spaces.
pub fn tensor_product(factors: &[&SignedMeasure]) -> Result<SignedMeasure> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("tensor product of no factors".into()));
    }
    let mut cards = Vec::new();
    let mut limits = Limits::default();
    for f in factors {
        cards.extend_from_slice(f.space().cardinalities());
        let l = f.space().limits();
        limits.max_links = limits.max_links.max(l.max_links);
        limits.max_states = limits.max_states.max(l.max_states);
    }
    let space = TypeSpace::with_limits(&cards, limits)?;
    let blocks: Vec<&[f64]> = factors.iter().map(|f| f.weights()).collect();
    SignedMeasure::new(space, kron_weights(&blocks))
}

/// Tensor product checked against an expected target space.
pub fn tensor_product_on(space: &TypeSpace, factors: &[&SignedMeasure]) -> Result<SignedMeasure> {
    let product = tensor_product(factors)?;
    if product.space() != space {
        return Err(Error::InvalidArgument(format!(
            "factor blocks {:?} do not tile the target space {:?}",
            product.space().cardinalities(),
            space.cardinalities()
        )));
    }
    Ok(product)
}

/// A positive measure: entries are clamped nonnegative at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Measure {
    inner: SignedMeasure,
}

impl Measure {
    /// Builds a positive measure with the default negative-entry tolerance
    /// [`NEGATIVE_TOLERANCE`].
    pub fn new(space: TypeSpace, weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(space, weights, NEGATIVE_TOLERANCE)
    }

    /// Entries in `[-tolerance, 0)` are clamped to zero; anything more
    /// negative is rejected.
    pub fn with_tolerance(space: TypeSpace, mut weights: Vec<f64>, tolerance: f64) -> Result<Self> {
        for (i, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() {
                return Err(Error::Validation(format!("non-finite weight at flat index {i}")));
            }
            if *w < 0.0 {
                if *w < -tolerance {
                    return Err(Error::Validation(format!(
                        "weight {w:e} at flat index {i} is below the negativity tolerance {tolerance:e}"
                    )));
                }
                *w = 0.0;
            }
        }
        Ok(Self { inner: SignedMeasure::new(space, weights)? })
    }

    /// Wraps weights already known to be nonnegative (e.g. products of
    /// nonnegative factors) without scanning.
    pub(crate) fn from_nonnegative(space: TypeSpace, weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|&w| w >= 0.0));
        Self { inner: SignedMeasure { space, weights } }
    }

    /// The uniform probability measure.
    pub fn uniform(space: TypeSpace) -> Self {
        let n = space.total_size();
        Self::from_nonnegative(space, vec![1.0 / n as f64; n])
    }

    /// Unit point mass at a coordinate tuple.
    pub fn point_mass(space: TypeSpace, coords: &[usize]) -> Result<Self> {
        let idx = space.flat_index(coords)?;
        let mut w = vec![0.0; space.total_size()];
        w[idx] = 1.0;
        Ok(Self::from_nonnegative(space, w))
    }

    pub fn as_signed(&self) -> &SignedMeasure {
        &self.inner
    }

    pub fn into_signed(self) -> SignedMeasure {
        self.inner
    }

    pub fn space(&self) -> &TypeSpace {
        self.inner.space()
    }

    pub fn weights(&self) -> &[f64] {
        self.inner.weights()
    }

    /// Total mass; for a positive measure this is also the variation norm.
    pub fn mass(&self) -> f64 {
        self.inner.mass()
    }

    pub fn is_zero(&self) -> bool {
        self.weights().iter().all(|&w| w == 0.0)
    }

    pub fn marginal(&self, block: &[usize]) -> Result<Measure> {
        let m = self.inner.marginal(block)?;
        Ok(Measure { inner: m })
    }

    pub fn cylinder_value(&self, cylinder: &Cylinder) -> f64 {
        self.inner.cylinder_value(cylinder)
    }

    pub fn scaled(&self, c: f64) -> Result<Measure> {
        if c.is_nan() || c < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "scaling a positive measure by {c} would leave the positive cone"
            )));
        }
        Ok(Measure { inner: self.inner.scaled(c) })
    }

    /// Rescales to unit mass.
    pub fn normalized(&self) -> Result<Measure> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(Error::InvalidArgument("cannot normalize the zero measure".into()));
        }
        self.scaled(1.0 / m)
    }
}

/// A cylinder set: fixed values at some sites, all other sites free. The
/// empty assignment denotes the whole space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cylinder {
    assignments: Vec<(usize, usize)>,
}

impl Cylinder {
    /// The full space (no site specified).
    pub fn full() -> Self {
        Self { assignments: Vec::new() }
    }

    pub fn new(space: &TypeSpace, assignments: &[(usize, usize)]) -> Result<Self> {
        let mut sorted = assignments.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "site {} assigned twice in cylinder",
                    w[0].0
                )));
            }
        }
        for &(site, value) in &sorted {
            if site >= space.n_sites() {
                return Err(Error::Index(format!(
                    "cylinder site {site} out of range (space has {} sites)",
                    space.n_sites()
                )));
            }
            if value >= space.cardinality(site) {
                return Err(Error::Index(format!(
                    "cylinder value {value} at site {site} exceeds cardinality {}",
                    space.cardinality(site)
                )));
            }
        }
        Ok(Self { assignments: sorted })
    }

    pub fn assignments(&self) -> &[(usize, usize)] {
        &self.assignments
    }

    pub fn sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignments.iter().map(|&(s, _)| s)
    }

    pub fn is_full_space(&self) -> bool {
        self.assignments.is_empty()
    }
}
