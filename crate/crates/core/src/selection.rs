//! Additive selection: site-wise diagonal fitness, the norm-preserving
//! replicator term, the diploid form without dominance, and mean fitness.

use crate::error::{Error, Result};
use crate::measure::{Measure, SignedMeasure};
use crate::type_space::TypeSpace;

/// Additive fitness across sites: type `x` reproduces at rate
/// `sum_i r_i(x_i)`. Shifting every `r_i` by a constant leaves the flow
/// unchanged, so positivity is not required; strict positivity is recorded
/// because only then is mean fitness guaranteed to be a Lyapunov function.
#[derive(Clone, Debug)]
pub struct FitnessModel {
    space: TypeSpace,
    site_fitness: Vec<Vec<f64>>,
    /// Precomputed total fitness per state.
    totals: Vec<f64>,
    strictly_positive: bool,
}

impl FitnessModel {
    pub fn new(space: &TypeSpace, site_fitness: Vec<Vec<f64>>) -> Result<Self> {
        if site_fitness.len() != space.n_sites() {
            return Err(Error::Validation(format!(
                "{} fitness vectors given for a space with {} sites",
                site_fitness.len(),
                space.n_sites()
            )));
        }
        for (i, r) in site_fitness.iter().enumerate() {
            if r.len() != space.cardinality(i) {
                return Err(Error::Validation(format!(
                    "fitness vector for site {i} has length {}, site cardinality is {}",
                    r.len(),
                    space.cardinality(i)
                )));
            }
            if let Some(v) = r.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "non-finite fitness value {v} at site {i}"
                )));
            }
        }
        let strictly_positive =
            site_fitness.iter().all(|r| r.iter().all(|&v| v > 0.0));
        let mut totals = vec![0.0; space.total_size()];
        let cards = space.cardinalities();
        let n = cards.len();
        let mut coords = vec![0usize; n];
        for slot in totals.iter_mut() {
            *slot = coords.iter().enumerate().map(|(i, &c)| site_fitness[i][c]).sum();
            for i in (0..n).rev() {
                coords[i] += 1;
                if coords[i] < cards[i] {
                    break;
                }
                coords[i] = 0;
            }
        }
        Ok(Self { space: space.clone(), site_fitness, totals, strictly_positive })
    }

    pub fn space(&self) -> &TypeSpace {
        &self.space
    }

    pub fn site_fitness(&self) -> &[Vec<f64>] {
        &self.site_fitness
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    fn check_space(&self, other: &TypeSpace) -> Result<()> {
        if &self.space != other {
            return Err(Error::InvalidArgument(
                "fitness model and measure live on different spaces".into(),
            ));
        }
        Ok(())
    }

    /// `P omega`: each entry scaled by its state's total fitness.
    pub fn apply(&self, omega: &SignedMeasure) -> Result<SignedMeasure> {
        self.check_space(omega.space())?;
        let w: Vec<f64> =
            omega.weights().iter().zip(&self.totals).map(|(x, f)| x * f).collect();
        SignedMeasure::new(self.space.clone(), w)
    }

    /// The selection term `P omega - (P omega(X)/|omega|) omega`. Zero mass
    /// for every positive input; maps the zero measure to zero.
    pub fn rhs(&self, omega: &Measure) -> Result<SignedMeasure> {
        self.check_space(omega.space())?;
        let mass = omega.mass();
        if mass == 0.0 {
            return Ok(SignedMeasure::zero(self.space.clone()));
        }
        let p_omega = self.apply(omega.as_signed())?;
        let mean = p_omega.mass() / mass;
        Ok(p_omega.sub(&omega.as_signed().scaled(mean)))
    }

    /// The diploid form without dominance, written through the
    /// marginalization identity `M(mu (x) P nu) = P nu(X) mu`. On the
    /// positive cone it generates the same flow as [`rhs`](Self::rhs).
    pub fn diploid_rhs(&self, omega: &Measure) -> Result<SignedMeasure> {
        self.check_space(omega.space())?;
        let mass = omega.mass();
        if mass == 0.0 {
            return Err(Error::InvalidArgument(
                "the diploid right-hand side is undefined for the zero measure".into(),
            ));
        }
        let p_omega = self.apply(omega.as_signed())?;
        // M(omega (x) P omega + P omega (x) omega) = P omega(X) omega + omega(X) P omega
        let paired = omega
            .as_signed()
            .scaled(p_omega.mass())
            .add(&p_omega.scaled(omega.as_signed().mass()));
        let mean2 = paired.mass() / (mass * mass);
        Ok(paired.scaled(1.0 / mass).sub(&omega.as_signed().scaled(mean2)))
    }

    /// Mean fitness of the diploid equation, `2 omega(X) P omega(X) / |omega|^2`.
    pub fn diploid_mean_fitness(&self, omega: &Measure) -> Result<f64> {
        self.check_space(omega.space())?;
        let mass = omega.mass();
        if mass == 0.0 {
            return Err(Error::InvalidArgument(
                "mean fitness is undefined for the zero measure".into(),
            ));
        }
        let p_omega = self.apply(omega.as_signed())?;
        Ok(2.0 * omega.as_signed().mass() * p_omega.mass() / (mass * mass))
    }

    /// Mean fitness `P omega(X) / |omega|`.
    pub fn mean_fitness(&self, omega: &Measure) -> Result<f64> {
        self.check_space(omega.space())?;
        let mass = omega.mass();
        if mass == 0.0 {
            return Err(Error::InvalidArgument(
                "mean fitness is undefined for the zero measure".into(),
            ));
        }
        Ok(self.apply(omega.as_signed())?.mass() / mass)
    }

    /// Fitness variance of the normalized measure,
    /// `P^2(omega/|omega|)(X) - (P(omega/|omega|)(X))^2`; this is the time
    /// derivative of the mean fitness along the selection flow.
    pub fn variance(&self, omega: &Measure) -> Result<f64> {
        self.check_space(omega.space())?;
        let mass = omega.mass();
        if mass == 0.0 {
            return Err(Error::InvalidArgument(
                "fitness variance is undefined for the zero measure".into(),
            ));
        }
        let normalized = omega.as_signed().scaled(1.0 / mass);
        let p = self.apply(&normalized)?;
        let p2 = self.apply(&p)?;
        Ok(p2.mass() - p.mass() * p.mass())
    }

    /// Growth factor of the linearizing substitution: `theta(t) =
    /// exp((1/|omega_0|) Int_0^t P omega_tau(X) dtau)`, with the integral
    /// taken by the trapezoid rule on the stored grid.
    pub fn thompson_factor(&self, times: &[f64], states: &[Measure]) -> Result<f64> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidArgument(
                "thompson factor needs a nonempty trajectory with matching grids".into(),
            ));
        }
        let norm0 = states[0].mass();
        if norm0 == 0.0 {
            return Err(Error::InvalidArgument(
                "thompson factor is undefined for a zero initial measure".into(),
            ));
        }
        let growth: Vec<f64> = states
            .iter()
            .map(|s| self.apply(s.as_signed()).map(|p| p.mass()))
            .collect::<Result<_>>()?;
        let mut integral = 0.0;
        for i in 1..times.len() {
            let dt = times[i] - times[i - 1];
            if dt.is_nan() || dt <= 0.0 {
                return Err(Error::InvalidArgument(
                    "trajectory times must be strictly increasing".into(),
                ));
            }
            integral += 0.5 * (growth[i] + growth[i - 1]) * dt;
        }
        Ok((integral / norm0).exp())
    }
}

/// Sampled mean-fitness values along a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFitnessTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl MeanFitnessTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(
                "mean fitness trace grids have different lengths".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite mean fitness value {v}")));
        }
        Ok(Self { times, values })
    }

    /// True when the sampled values never drop by more than `slack`.
    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}
