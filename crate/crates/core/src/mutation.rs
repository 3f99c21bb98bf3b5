//! Per-site Markov generators and their semigroups, acting site-wise on
//! measure tensors.
//!
//! A site generator is a rate matrix with nonnegative off-diagonal entries
//! and vanishing column sums (generators act on column probability vectors;
//! entry `(k, l)` is the rate from state `l` to state `k`). Mutation runs at
//! all sites in parallel, so the full generator is the sum of per-site
//! embeddings and its semigroup is the tensor product of the per-site ones.

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::measure::SignedMeasure;
use crate::type_space::TypeSpace;

/// Off-diagonal entries this slightly negative are treated as rounding noise
/// and clamped to zero during validation.
const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
/// Column sums must vanish to within this tolerance; the defect is folded
/// back onto the diagonal.
const COLUMN_SUM_TOLERANCE: f64 = 1e-10;

/// A validated Markov generator for one site, with a nonnegative scale
/// factor `mu` multiplying the standardized rate matrix.
#[derive(Clone, Debug)]
pub struct SiteGenerator {
    site: usize,
    matrix: SquareMatrix,
    scale: f64,
    irreducible: bool,
}

impl SiteGenerator {
    /// Validates a rate matrix: off-diagonals must be nonnegative (up to a
    /// clamped rounding tolerance) and every column sum must vanish (small
    /// defects are rebalanced onto the diagonal). Irreducibility is recorded
    /// but not required.
    pub fn new(site: usize, matrix: SquareMatrix, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::Validation(format!(
                "mutation scale {scale} at site {site} must be finite and nonnegative"
            )));
        }
        let d = matrix.dim();
        let mut m = matrix;
        for k in 0..d {
            for l in 0..d {
                let v = m.get(k, l);
                if !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite rate at ({k},{l}) in the generator for site {site}"
                    )));
                }
                if k != l && v < 0.0 {
                    if v < -OFF_DIAGONAL_TOLERANCE {
                        return Err(Error::Validation(format!(
                            "negative off-diagonal rate {v:e} at ({k},{l}) in column {l} of \
                             the generator for site {site}"
                        )));
                    }
                    m.set(k, l, 0.0);
                }
            }
        }
        for (l, sum) in m.column_sums().into_iter().enumerate() {
            if sum.abs() > COLUMN_SUM_TOLERANCE {
                return Err(Error::Validation(format!(
                    "column {l} of the generator for site {site} sums to {sum:e} (must vanish)"
                )));
            }
            let diag = m.get(l, l);
            m.set(l, l, diag - sum);
        }
        let irreducible = strongly_connected(&m);
        Ok(Self { site, matrix: m, scale, irreducible })
    }

    /// The zero generator (no mutation at this site).
    pub fn zero(site: usize, dim: usize) -> Self {
        Self { site, matrix: SquareMatrix::zeros(dim), scale: 0.0, irreducible: false }
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }

    /// `mu_i * q_i`, the effective generator.
    pub fn scaled_matrix(&self) -> SquareMatrix {
        self.matrix.scaled(self.scale)
    }

    /// The Markov semigroup element `exp(t mu q)`. Columns sum to one;
    /// rounding-level negative entries are clamped.
    pub fn semigroup(&self, t: f64) -> Result<SquareMatrix> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time {t} must be finite and nonnegative"
            )));
        }
        markov_exp(&self.scaled_matrix().scaled(t))
    }
}

/// Exponential of a generator, with the tiny negative entries of the result
/// clamped away so the output is usable as a positive operator.
pub(crate) fn markov_exp(generator: &SquareMatrix) -> Result<SquareMatrix> {
    let mut e = generator.expm()?;
    let d = e.dim();
    for k in 0..d {
        for l in 0..d {
            let v = e.get(k, l);
            if v < 0.0 {
                if v < -OFF_DIAGONAL_TOLERANCE {
                    return Err(Error::Numerical(format!(
                        "semigroup entry {v:e} at ({k},{l}) is negative beyond tolerance"
                    )));
                }
                e.set(k, l, 0.0);
            }
        }
    }
    Ok(e)
}

/// Strong connectivity of the positive-rate digraph (edge `l -> k` when the
/// off-diagonal entry `(k, l)` is positive).
fn strongly_connected(m: &SquareMatrix) -> bool {
    let d = m.dim();
    let mut reach = vec![false; d * d];
    for k in 0..d {
        reach[k * d + k] = true;
        for l in 0..d {
            if k != l && m.get(k, l) > 0.0 {
                // edge from l to k
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

/// One generator per site; sites without mutation carry the zero matrix.
#[derive(Clone, Debug)]
pub struct MutationModel {
    generators: Vec<SiteGenerator>,
}

impl MutationModel {
    pub fn new(space: &TypeSpace, generators: Vec<SiteGenerator>) -> Result<Self> {
        if generators.len() != space.n_sites() {
            return Err(Error::Validation(format!(
                "{} generators given for a space with {} sites",
                generators.len(),
                space.n_sites()
            )));
        }
        for (i, g) in generators.iter().enumerate() {
            if g.site() != i {
                return Err(Error::Validation(format!(
                    "generator at position {i} is labelled for site {}",
                    g.site()
                )));
            }
            if g.dim() != space.cardinality(i) {
                return Err(Error::Validation(format!(
                    "generator for site {i} has dimension {}, site cardinality is {}",
                    g.dim(),
                    space.cardinality(i)
                )));
            }
        }
        Ok(Self { generators })
    }

    /// No mutation anywhere.
    pub fn zero(space: &TypeSpace) -> Self {
        let generators = (0..space.n_sites())
            .map(|i| SiteGenerator::zero(i, space.cardinality(i)))
            .collect();
        Self { generators }
    }

    pub fn generators(&self) -> &[SiteGenerator] {
        &self.generators
    }

    pub fn generator(&self, site: usize) -> &SiteGenerator {
        &self.generators[site]
    }

    /// The full generator is irreducible exactly when every site is.
    pub fn is_irreducible(&self) -> bool {
        self.generators.iter().all(|g| g.is_irreducible())
    }

    /// Applies `exp(t mu_i q_i)` along every tensor axis. The per-site
    /// factors commute, so the order of axes is irrelevant; mass of positive
    /// measures is preserved.
    pub fn apply_semigroup(&self, t: f64, omega: &SignedMeasure) -> Result<SignedMeasure> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time {t} must be finite and nonnegative"
            )));
        }
        let mut current = omega.clone();
        for (i, g) in self.generators.iter().enumerate() {
            if g.scale == 0.0 || g.matrix.is_zero() {
                continue;
            }
            let e = g.semigroup(t)?;
            current = current.apply_axis(i, &e);
        }
        Ok(current)
    }

    /// The mutation term of the dynamics: `(sum_i mu_i Q_i) omega`, with each
    /// rate matrix acting along its own axis. Always has zero mass.
    pub fn rhs(&self, omega: &SignedMeasure) -> SignedMeasure {
        let mut out = SignedMeasure::zero(omega.space().clone());
        for (i, g) in self.generators.iter().enumerate() {
            if g.scale == 0.0 || g.matrix.is_zero() {
                continue;
            }
            out.add_scaled_assign(1.0, &omega.apply_axis(i, &g.scaled_matrix()));
        }
        out
    }
}
