//! Set partitions, the partition-lattice Moebius function, and the
//! transforms between moment and correlation tables.
//!
//! Moments of a set of labels multiply over partition blocks; correlations
//! separate off every lower-order contribution. The two tables determine
//! each other through Moebius inversion on the partition lattice. For a
//! contiguous span of sites, the top correlation of the cylinder moments
//! coincides with the span's linkage disequilibrium, which is the
//! cross-module equality the acceptance suite certifies.

use crate::error::{Error, Result};
use crate::measure::{Cylinder, Measure, SignedMeasure};
use crate::recombination::{span_link_set, t_operator};

/// Partitions of more than this many elements are refused (Bell numbers grow
/// too fast past desk scale).
pub const MAX_PARTITION_SIZE: usize = 10;

/// An (unordered) partition of `{0, .., k-1}` into disjoint nonempty blocks.
/// Canonical form: elements ascending within blocks, blocks ascending by
/// their minimum.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SetPartition {
    ground: usize,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn from_blocks(ground: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; ground];
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::InvalidArgument("empty partition block".into()));
            }
            for &e in block {
                if e >= ground {
                    return Err(Error::Index(format!(
                        "element {e} out of range (ground set has {ground} elements)"
                    )));
                }
                if seen[e] {
                    return Err(Error::InvalidArgument(format!(
                        "element {e} appears in two blocks"
                    )));
                }
                seen[e] = true;
            }
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::InvalidArgument("blocks do not cover the ground set".into()));
        }
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort_by_key(|b| b[0]);
        Ok(Self { ground, blocks })
    }

    /// The one-block partition.
    pub fn trivial(ground: usize) -> Self {
        Self { ground, blocks: vec![(0..ground).collect()] }
    }

    /// The all-singletons partition.
    pub fn singletons(ground: usize) -> Self {
        Self { ground, blocks: (0..ground).map(|e| vec![e]).collect() }
    }

    pub fn ground_size(&self) -> usize {
        self.ground
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Label of the block containing each element.
    fn block_of(&self) -> Vec<usize> {
        let mut label = vec![0usize; self.ground];
        for (i, block) in self.blocks.iter().enumerate() {
            for &e in block {
                label[e] = i;
            }
        }
        label
    }

    /// `self` refines `other` when every block of `self` is contained in a
    /// block of `other`.
    pub fn is_refinement_of(&self, other: &Self) -> bool {
        if self.ground != other.ground {
            return false;
        }
        let coarse = other.block_of();
        self.blocks.iter().all(|block| {
            let target = coarse[block[0]];
            block.iter().all(|&e| coarse[e] == target)
        })
    }
}

/// Iterator over all partitions of `{0, .., k-1}` as restricted-growth
/// strings, yielding each partition exactly once in RGS order. The count is
/// the Bell number of `k`.
pub struct Partitions {
    k: usize,
    rgs: Vec<usize>,
    maxima: Vec<usize>,
    done: bool,
}

pub fn partitions_of(k: usize) -> Result<Partitions> {
    if !(1..=MAX_PARTITION_SIZE).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "partition enumeration supports 1..={MAX_PARTITION_SIZE} elements, got {k}"
        )));
    }
    Ok(Partitions { k, rgs: vec![0; k], maxima: vec![0; k], done: false })
}

impl Iterator for Partitions {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let n_blocks = self.rgs.iter().max().copied().unwrap_or(0) + 1;
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
        for (e, &b) in self.rgs.iter().enumerate() {
            blocks[b].push(e);
        }
        let current = SetPartition { ground: self.k, blocks };

        // Advance the restricted-growth string: rightmost position that can
        // still grow is incremented, everything after resets to zero.
        let mut i = self.k;
        loop {
            if i == 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] <= self.maxima[i - 1] {
                self.rgs[i] += 1;
                let m = self.maxima[i - 1].max(self.rgs[i]);
                self.maxima[i] = m;
                for j in i + 1..self.k {
                    self.rgs[j] = 0;
                    self.maxima[j] = m;
                }
                break;
            }
        }
        Some(current)
    }
}

/// Moebius function of the partition lattice: for `fine` refining `coarse`
/// it is `prod_i (-1)^(n_i - 1) (n_i - 1)!` with `n_i` the number of fine
/// blocks inside coarse block `i`; otherwise zero.
pub fn moebius_partition(fine: &SetPartition, coarse: &SetPartition) -> i64 {
    if !fine.is_refinement_of(coarse) {
        return 0;
    }
    let coarse_of = coarse.block_of();
    let mut counts = vec![0usize; coarse.n_blocks()];
    for block in fine.blocks() {
        counts[coarse_of[block[0]]] += 1;
    }
    let mut mu = 1i64;
    for n in counts {
        let mut factor = 1i64;
        for j in 1..n {
            factor *= j as i64;
        }
        if (n - 1) % 2 == 1 {
            factor = -factor;
        }
        mu *= factor;
    }
    mu
}

/// A real-valued table over the nonempty subsets of `{0, .., k-1}`, keyed by
/// bitmask.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    k: usize,
    values: Vec<f64>,
}

impl MomentTable {
    pub fn new(k: usize) -> Result<Self> {
        if !(1..=MAX_PARTITION_SIZE).contains(&k) {
            return Err(Error::InvalidArgument(format!(
                "moment tables support 1..={MAX_PARTITION_SIZE} labels, got {k}"
            )));
        }
        Ok(Self { k, values: vec![0.0; 1 << k] })
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(u32) -> f64) -> Result<Self> {
        let mut table = Self::new(k)?;
        for mask in 1..(1u32 << k) {
            table.values[mask as usize] = f(mask);
        }
        Ok(table)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, mask: u32) -> f64 {
        assert!(mask > 0 && (mask as usize) < (1 << self.k), "mask out of range");
        self.values[mask as usize]
    }

    pub fn set(&mut self, mask: u32, value: f64) {
        assert!(mask > 0 && (mask as usize) < (1 << self.k), "mask out of range");
        self.values[mask as usize] = value;
    }
}

fn elements_of(mask: u32) -> Vec<usize> {
    (0..32).filter(|&b| mask & (1 << b) != 0).collect()
}

/// Correlation of one label set from the moments of its subsets:
/// the Moebius-weighted sum over all partitions of the set, each partition
/// contributing the product of its blocks' moments.
fn correlation_of(moments: &MomentTable, mask: u32) -> Result<f64> {
    let elements = elements_of(mask);
    let mut total = 0.0;
    for partition in partitions_of(elements.len())? {
        let q = partition.n_blocks();
        // mu(B, {A}) = (-1)^(q-1) (q-1)!
        let mut coeff = 1i64;
        for j in 1..q {
            coeff *= j as i64;
        }
        if (q - 1) % 2 == 1 {
            coeff = -coeff;
        }
        let mut product = 1.0;
        for block in partition.blocks() {
            let block_mask: u32 = block.iter().map(|&e| 1u32 << elements[e]).sum();
            product *= moments.get(block_mask);
        }
        total += coeff as f64 * product;
    }
    Ok(total)
}

/// Turns a full moment table into the correlation table.
pub fn correlations_from_moments(moments: &MomentTable) -> Result<MomentTable> {
    let mut out = MomentTable::new(moments.k)?;
    for mask in 1..(1u32 << moments.k) {
        out.values[mask as usize] = correlation_of(moments, mask)?;
    }
    Ok(out)
}

/// Turns a full correlation table back into moments: for each set, sum over
/// its partitions of the product of block correlations. Exact inverse of
/// [`correlations_from_moments`].
pub fn moments_from_correlations(correlations: &MomentTable) -> Result<MomentTable> {
    let mut out = MomentTable::new(correlations.k)?;
    for mask in 1..(1u32 << correlations.k) {
        let elements = elements_of(mask);
        let mut total = 0.0;
        for partition in partitions_of(elements.len())? {
            let mut product = 1.0;
            for block in partition.blocks() {
                let block_mask: u32 = block.iter().map(|&e| 1u32 << elements[e]).sum();
                product *= correlations.get(block_mask);
            }
            total += product;
        }
        out.values[mask as usize] = total;
    }
    Ok(out)
}

/// The k-point correlation of prescribed values at a contiguous span of
/// sites, in the decoupling convention: the moment family over the subsets
/// of the span is the span's own k-point-function family
/// `F(S') = T_G(omega)(<S'>)` with `G` the complement of the span's interior
/// links, and the partition transform of that family is returned.
///
/// Every lower-order member of the family vanishes (its complement reaches
/// outside the sub-span), so the transform reproduces the top k-point
/// function: the linkage disequilibria carry no lower-order contributions
/// and are their own correlation functions. This equality is the
/// cross-module check the acceptance suite certifies.
pub fn site_correlation(omega: &Measure, sites: &[usize], values: &[usize]) -> Result<f64> {
    for w in sites.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(Error::InvalidArgument(format!(
                "sites {sites:?} are not contiguous; only gap-free spans carry the \
                 decoupling correlation (cylinder_correlation computes the plain \
                 moment correlation for any site set)"
            )));
        }
    }
    check_sites_values(sites, values)?;
    let space = omega.space();
    let (first, last) = (sites[0], sites[sites.len() - 1]);
    if last >= space.n_sites() {
        return Err(Error::Index(format!(
            "site {last} out of range (space has {} sites)",
            space.n_sites()
        )));
    }
    let set = span_link_set(space, first, last);
    let t_g = t_operator(omega, set)?;
    let moments = cylinder_moments(&t_g, sites, values)?;
    correlation_of(&moments, (1u32 << sites.len()) - 1)
}

/// The plain moment correlation of an arbitrary ascending site set: cylinder
/// probabilities `F(S') = omega(<S'>)` feed the partition transform
/// directly. For two gap-free sites this is the classical linkage
/// disequilibrium, but in general it mixes in corrections from gapped
/// sub-moments and carries no exponential-decoupling guarantee.
pub fn cylinder_correlation(
    omega: &SignedMeasure,
    sites: &[usize],
    values: &[usize],
) -> Result<f64> {
    check_sites_values(sites, values)?;
    let moments = cylinder_moments(omega, sites, values)?;
    correlation_of(&moments, (1u32 << sites.len()) - 1)
}

fn check_sites_values(sites: &[usize], values: &[usize]) -> Result<()> {
    if sites.is_empty() || sites.len() != values.len() {
        return Err(Error::InvalidArgument(
            "site and value lists must be nonempty and of equal length".into(),
        ));
    }
    for w in sites.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument("sites must be strictly ascending".into()));
        }
    }
    Ok(())
}

fn cylinder_moments(
    measure: &SignedMeasure,
    sites: &[usize],
    values: &[usize],
) -> Result<MomentTable> {
    let k = sites.len();
    let moments = MomentTable::from_fn(k, |mask| {
        let assignments: Vec<(usize, usize)> = elements_of(mask)
            .into_iter()
            .map(|i| (sites[i], values[i]))
            .collect();
        match Cylinder::new(measure.space(), &assignments) {
            Ok(cyl) => measure.cylinder_value(&cyl),
            Err(_) => f64::NAN,
        }
    })?;
    for mask in 1..(1u32 << k) {
        if moments.get(mask).is_nan() {
            return Err(Error::Index(format!(
                "values {values:?} do not fit the site cardinalities at {sites:?}"
            )));
        }
    }
    Ok(moments)
}
