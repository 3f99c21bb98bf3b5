//! Product structure of the type space: sites, links, ordered partitions and
//! the flat indexing scheme shared by every tensor in the crate.
//!
//! A sequence has sites `0..=n`, each carrying a finite state space of
//! cardinality `M_i >= 2`. Between adjacent sites `i` and `i+1` sits link `i`
//! (`n` links in total); crossovers happen at links. Subsets of the link set
//! are the index set for recombinators and their coefficient functions, and
//! they correspond one-to-one to ordered partitions of the sites into
//! contiguous blocks.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Construction caps for [`TypeSpace`]. Subset enumerations scale as
/// `2^n_links` and tensors as the number of states, so both are bounded to
/// keep everything desk-scale. Override via [`TypeSpace::with_limits`].
#[derive(Clone, Copy, Debug)]
pub struct Limits {
    /// Maximum number of links (hard ceiling 31, default 16).
    pub max_links: usize,
    /// Maximum total number of states (default `2^20`).
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { max_links: 16, max_states: 1 << 20 }
    }
}

/// The site cardinalities `(M_0, ..., M_n)` together with the mixed-radix
/// indexing of the product space.
///
/// Site 0 is the most significant digit of the flat index, so ascending flat
/// index order equals lexicographic order of coordinate tuples.
#[derive(Clone, Debug)]
pub struct TypeSpace {
    cards: Vec<usize>,
    strides: Vec<usize>,
    total: usize,
    limits: Limits,
}

impl PartialEq for TypeSpace {
    fn eq(&self, other: &Self) -> bool {
        self.cards == other.cards
    }
}

impl Eq for TypeSpace {}

impl TypeSpace {
    /// Builds a type space with the default [`Limits`].
    pub fn new(cardinalities: &[usize]) -> Result<Self> {
        Self::with_limits(cardinalities, Limits::default())
    }

    pub fn with_limits(cardinalities: &[usize], limits: Limits) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::Validation("a type space needs at least one site".into()));
        }
        if limits.max_links > 31 {
            return Err(Error::Validation("max_links cannot exceed 31".into()));
        }
        for (i, &m) in cardinalities.iter().enumerate() {
            if m < 2 {
                return Err(Error::Validation(format!(
                    "site {i} has cardinality {m}; a one-state site carries no information, remove it"
                )));
            }
        }
        let n_links = cardinalities.len() - 1;
        if n_links > limits.max_links {
            return Err(Error::Validation(format!(
                "{n_links} links exceeds the cap of {} (subset enumerations are 2^n_links)",
                limits.max_links
            )));
        }
        let mut total = 1usize;
        for &m in cardinalities {
            total = total
                .checked_mul(m)
                .filter(|&t| t <= limits.max_states)
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "total state count exceeds the cap of {}",
                        limits.max_states
                    ))
                })?;
        }
        let mut strides = vec![1usize; cardinalities.len()];
        for i in (0..cardinalities.len() - 1).rev() {
            strides[i] = strides[i + 1] * cardinalities[i + 1];
        }
        Ok(Self { cards: cardinalities.to_vec(), strides, total, limits })
    }

    pub fn n_sites(&self) -> usize {
        self.cards.len()
    }

    pub fn n_links(&self) -> usize {
        self.cards.len() - 1
    }

    /// Total number of states, `prod M_i`.
    pub fn total_size(&self) -> usize {
        self.total
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn cardinality(&self, site: usize) -> usize {
        self.cards[site]
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub(crate) fn limits(&self) -> Limits {
        self.limits
    }

    /// Mixed-radix rank of a coordinate tuple, site 0 most significant.
    pub fn flat_index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.cards.len() {
            return Err(Error::Index(format!(
                "coordinate tuple has {} entries, space has {} sites",
                coords.len(),
                self.cards.len()
            )));
        }
        let mut idx = 0usize;
        for (i, (&c, &m)) in coords.iter().zip(&self.cards).enumerate() {
            if c >= m {
                return Err(Error::Index(format!(
                    "coordinate {c} at site {i} exceeds cardinality {m}"
                )));
            }
            idx += c * self.strides[i];
        }
        Ok(idx)
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn coords(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total {
            return Err(Error::Index(format!(
                "flat index {index} exceeds total size {}",
                self.total
            )));
        }
        let mut rem = index;
        let coords = self
            .strides
            .iter()
            .map(|&s| {
                let c = rem / s;
                rem %= s;
                c
            })
            .collect();
        Ok(coords)
    }

    /// The ordered partition of the sites whose block boundaries are exactly
    /// the given cut links. The empty set yields one block, the full set all
    /// singletons.
    pub fn partition_of(&self, cuts: LinkSet) -> OrderedPartition {
        debug_assert_eq!(cuts.width(), self.n_links(), "link set width mismatch");
        let mut blocks = Vec::with_capacity(cuts.len() + 1);
        let mut start = 0usize;
        for link in cuts.links() {
            blocks.push(start..link + 1);
            start = link + 1;
        }
        blocks.push(start..self.n_sites());
        OrderedPartition { blocks }
    }

    pub fn empty_links(&self) -> LinkSet {
        LinkSet::empty(self.n_links())
    }

    pub fn full_links(&self) -> LinkSet {
        LinkSet::full(self.n_links())
    }

    pub fn link_set(&self, links: &[usize]) -> Result<LinkSet> {
        LinkSet::from_links(links, self.n_links())
    }

    /// All `2^n_links` link subsets in ascending bit-pattern order.
    pub fn all_link_sets(&self) -> Subsets {
        self.full_links().subsets()
    }
}

/// A subset `G` of the links, stored as a bitmask of width `n_links`.
/// Link `i` separates sites `i` and `i+1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkSet {
    bits: u32,
    width: u8,
}

impl LinkSet {
    pub fn empty(width: usize) -> Self {
        assert!(width <= 31, "link set width cannot exceed 31");
        Self { bits: 0, width: width as u8 }
    }

    pub fn full(width: usize) -> Self {
        assert!(width <= 31, "link set width cannot exceed 31");
        Self { bits: if width == 0 { 0 } else { (1u32 << width) - 1 }, width: width as u8 }
    }

    pub fn from_bits(bits: u32, width: usize) -> Result<Self> {
        if width > 31 {
            return Err(Error::Validation("link set width cannot exceed 31".into()));
        }
        let full = Self::full(width);
        if bits & !full.bits != 0 {
            return Err(Error::Validation(format!(
                "bit pattern {bits:#b} does not fit in {width} links"
            )));
        }
        Ok(Self { bits, width: width as u8 })
    }

    pub fn from_links(links: &[usize], width: usize) -> Result<Self> {
        let mut set = Self::empty(width);
        for &l in links {
            if l >= width {
                return Err(Error::Index(format!("link {l} out of range (width {width})")));
            }
            set.bits |= 1 << l;
        }
        Ok(set)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    /// Number of links in the set.
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        *self == Self::full(self.width())
    }

    pub fn contains(&self, link: usize) -> bool {
        link < self.width() && self.bits & (1 << link) != 0
    }

    fn check_width(&self, other: &Self) {
        assert_eq!(self.width, other.width, "link sets belong to different spaces");
    }

    pub fn union(&self, other: Self) -> Self {
        self.check_width(&other);
        Self { bits: self.bits | other.bits, width: self.width }
    }

    pub fn intersection(&self, other: Self) -> Self {
        self.check_width(&other);
        Self { bits: self.bits & other.bits, width: self.width }
    }

    pub fn minus(&self, other: Self) -> Self {
        self.check_width(&other);
        Self { bits: self.bits & !other.bits, width: self.width }
    }

    pub fn with_link(&self, link: usize) -> Self {
        assert!(link < self.width(), "link {link} out of range");
        Self { bits: self.bits | (1 << link), width: self.width }
    }

    /// The complement within the full link set.
    pub fn complement(&self) -> Self {
        Self { bits: Self::full(self.width()).bits ^ self.bits, width: self.width }
    }

    pub fn is_subset_of(&self, other: Self) -> bool {
        self.check_width(&other);
        self.bits & !other.bits == 0
    }

    /// Links in ascending order.
    pub fn links(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.bits;
        (0..self.width()).filter(move |l| bits & (1 << l) != 0)
    }

    /// All subsets of `self`, each exactly once, in ascending bit-pattern order.
    pub fn subsets(&self) -> Subsets {
        Subsets { mask: self.bits, width: self.width, next: Some(0) }
    }

    /// All supersets of `self` within the full link set, in ascending order
    /// of the added bits.
    pub fn supersets(&self) -> impl Iterator<Item = LinkSet> + '_ {
        let base = *self;
        self.complement().subsets().map(move |extra| base.union(extra))
    }
}

impl fmt::Debug for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinkSet{{")?;
        for (i, l) in self.links().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for LinkSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.links().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

/// Iterator over the submasks of a fixed mask in ascending bit-pattern order.
pub struct Subsets {
    mask: u32,
    width: u8,
    next: Option<u32>,
}

impl Iterator for Subsets {
    type Item = LinkSet;

    fn next(&mut self) -> Option<LinkSet> {
        let cur = self.next?;
        self.next = if cur == self.mask {
            None
        } else {
            // Standard submask step: adding the complement's carry walks the
            // submasks of `mask` in increasing numeric order.
            Some(cur.wrapping_sub(self.mask) & self.mask)
        };
        Some(LinkSet { bits: cur, width: self.width })
    }
}

/// Moebius function of the Boolean lattice of link sets:
/// `(-1)^{|A - B|}` for `B` a subset of `A`, and 0 otherwise.
pub fn moebius_subset(b: LinkSet, a: LinkSet) -> i64 {
    if !b.is_subset_of(a) {
        return 0;
    }
    if (a.len() - b.len()).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// An ordered partition of the sites into contiguous blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedPartition {
    blocks: Vec<Range<usize>>,
}

impl OrderedPartition {
    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// The cut links generating this partition (each block end except the last).
    pub fn cuts(&self) -> Vec<usize> {
        self.blocks[..self.blocks.len() - 1].iter().map(|b| b.end - 1).collect()
    }

    /// `self` refines `other` when every block of `self` lies inside a block
    /// of `other`; for contiguous ordered partitions this is exactly
    /// containment of the generating cut sets.
    pub fn is_refinement_of(&self, other: &Self) -> bool {
        let fine: std::collections::BTreeSet<usize> = self.cuts().into_iter().collect();
        other.cuts().iter().all(|c| fine.contains(c))
    }
}
