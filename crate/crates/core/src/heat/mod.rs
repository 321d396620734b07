//! Two-point-measurement heat statistics.
//!
//! A protocol measures energy, then performs `M` projective measurements of a
//! basis separated by free evolution for waiting times `tau_i`, then measures
//! energy again. The heat `q = E_m - E_n` is the difference of the two energy
//! outcomes. This module samples that protocol ([`TrajectorySampler`]) and
//! evaluates its statistics exactly by enumeration ([`ExactEngine`]).

mod exact;
mod monte_carlo;

pub use exact::{
    characteristic_function, exact_distribution, moment, unitality_check, ExactEngine, MomentEstimate,
    DEFAULT_TERM_CAP,
};
pub use monte_carlo::{
    jarzynski_mc, run_trajectory, simulate, HeatRecord, HeatTally, JarzynskiEstimate, TrajectorySampler,
};

use num_complex::Complex;

use crate::disorder::WaitingTimeModel;
use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, HermitianOperator, MeasurementBasis};
use crate::scalar::{expi, Real};

/// Number of intermediate measurements, either given directly or induced by a
/// total protocol time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule<T> {
    Measurements(usize),
    /// Measurements continue while the elapsed time stays within `T`.
    TotalTime(T),
}

/// Everything that defines one protocol.
#[derive(Debug, Clone)]
pub struct ProtocolConfig<T: Real> {
    h: HermitianOperator<T>,
    basis: MeasurementBasis<T>,
    rho0: DensityMatrix<T>,
    schedule: Schedule<T>,
    model: WaitingTimeModel<T>,
    beta: T,
    seed: u64,
}

impl<T: Real> ProtocolConfig<T> {
    pub fn new(
        h: HermitianOperator<T>,
        basis: MeasurementBasis<T>,
        rho0: DensityMatrix<T>,
        schedule: Schedule<T>,
        model: WaitingTimeModel<T>,
        beta: T,
        seed: u64,
    ) -> Result<Self> {
        let config = Self { h, basis, rho0, schedule, model, beta, seed };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let d = self.h.dim();
        if self.basis.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.basis.dim() });
        }
        if self.rho0.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.rho0.dim() });
        }
        if !self.beta.is_finite() || self.beta < T::zero() {
            return Err(Error::param("beta", format!("{} must be finite and non-negative", self.beta)));
        }
        // Waiting times of zero are allowed for a fixed measurement count only.
        let shortest = self.model.min_waiting_time();
        if !shortest.is_finite() || shortest < T::zero() {
            return Err(Error::param("model", "waiting times must be finite and non-negative"));
        }
        match self.schedule {
            Schedule::Measurements(0) => {
                Err(Error::param("m_count", "at least one measurement is required"))
            }
            Schedule::Measurements(_) => Ok(()),
            Schedule::TotalTime(t) if !t.is_finite() || t <= T::zero() => {
                Err(Error::param("total_time", format!("{t} must be finite and positive")))
            }
            Schedule::TotalTime(_) if shortest <= T::zero() => {
                Err(Error::param("model", "a total-time schedule needs positive waiting times"))
            }
            Schedule::TotalTime(_) => Ok(()),
        }
    }

    pub fn h(&self) -> &HermitianOperator<T> {
        &self.h
    }

    pub fn basis(&self) -> &MeasurementBasis<T> {
        &self.basis
    }

    pub fn rho0(&self) -> &DensityMatrix<T> {
        &self.rho0
    }

    pub fn schedule(&self) -> Schedule<T> {
        self.schedule
    }

    /// `M` when the schedule fixes it.
    pub fn m_count(&self) -> Option<usize> {
        match self.schedule {
            Schedule::Measurements(m) => Some(m),
            Schedule::TotalTime(_) => None,
        }
    }

    pub fn model(&self) -> &WaitingTimeModel<T> {
        &self.model
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_beta(mut self, beta: T) -> Result<Self> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rho0(mut self, rho0: DensityMatrix<T>) -> Result<Self> {
        self.rho0 = rho0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_schedule(mut self, schedule: Schedule<T>) -> Result<Self> {
        self.schedule = schedule;
        self.validate()?;
        Ok(self)
    }

    pub fn with_model(mut self, model: WaitingTimeModel<T>) -> Result<Self> {
        self.model = model;
        self.validate()?;
        Ok(self)
    }

    /// `E_max - E_min`, the largest possible `|q|`.
    pub fn spectral_width(&self) -> T {
        let e = self.h.eigenvalues();
        e[e.len() - 1] - e[0]
    }
}

/// Absolute tolerance under which two heat values are the same atom.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistributionKind {
    Exact,
    Empirical { n_samples: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatAtom<T> {
    pub q: T,
    pub prob: T,
}

/// Discrete heat distribution, atoms sorted by ascending `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatDistribution<T> {
    atoms: Vec<HeatAtom<T>>,
    kind: DistributionKind,
}

/// Sorts `(q, weight)` pairs and merges neighbours closer than [`MERGE_TOL`];
/// each merged atom keeps the smallest `q` of its group.
fn merge_atoms<T: Real>(mut raw: Vec<(T, T)>) -> Vec<(T, T)> {
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite heat values"));
    let tol = T::lit(MERGE_TOL);
    let mut out: Vec<(T, T)> = Vec::with_capacity(raw.len());
    for (q, w) in raw {
        match out.last_mut() {
            Some(last) if q - last.0 <= tol => last.1 += w,
            _ => out.push((q, w)),
        }
    }
    out
}

impl<T: Real> HeatDistribution<T> {
    /// Builds the exact distribution from the joint law `p(n, m)` stored
    /// row-major as `joint[n * d + m]`.
    pub fn from_joint(energies: &[T], joint: &[T]) -> Self {
        let d = energies.len();
        assert_eq!(joint.len(), d * d, "joint law must be d x d");
        let raw = (0..d)
            .flat_map(|n| (0..d).map(move |m| (n, m)))
            .filter(|&(n, m)| joint[n * d + m] > T::zero())
            .map(|(n, m)| (energies[m] - energies[n], joint[n * d + m]))
            .collect();
        let atoms = merge_atoms(raw).into_iter().map(|(q, prob)| HeatAtom { q, prob }).collect();
        Self { atoms, kind: DistributionKind::Exact }
    }

    /// Builds the empirical distribution from per-`(n, m)` counts.
    pub fn from_counts(energies: &[T], counts: &[u64]) -> Self {
        let d = energies.len();
        assert_eq!(counts.len(), d * d, "counts must be d x d");
        let total: u64 = counts.iter().sum();
        let raw = (0..d)
            .flat_map(|n| (0..d).map(move |m| (n, m)))
            .filter(|&(n, m)| counts[n * d + m] > 0)
            .map(|(n, m)| (energies[m] - energies[n], T::lit(counts[n * d + m] as f64)))
            .collect();
        let scale = T::lit(total.max(1) as f64);
        let atoms = merge_atoms(raw)
            .into_iter()
            .map(|(q, c)| HeatAtom { q, prob: c / scale })
            .collect();
        Self { atoms, kind: DistributionKind::Empirical { n_samples: total } }
    }

    pub fn atoms(&self) -> &[HeatAtom<T>] {
        &self.atoms
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_probability(&self) -> T {
        self.expectation(|_| T::one())
    }

    /// Probability of the atom at `q` (zero when absent).
    pub fn prob_at(&self, q: T) -> T {
        let tol = T::lit(MERGE_TOL);
        self.atoms
            .iter()
            .filter(|a| (a.q - q).abs() <= tol)
            .fold(T::zero(), |acc, a| acc + a.prob)
    }

    pub fn expectation(&self, f: impl Fn(T) -> T) -> T {
        self.atoms.iter().fold(T::zero(), |acc, a| acc + a.prob * f(a.q))
    }

    /// `<q^order>`.
    pub fn moment(&self, order: u32) -> T {
        self.expectation(|q| q.powi(order as i32))
    }

    pub fn mean(&self) -> T {
        self.moment(1)
    }

    /// `sum prob e^{i u q}`.
    pub fn characteristic(&self, u: Complex<T>) -> Complex<T> {
        self.atoms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, a| acc + expi(u * a.q) * a.prob)
    }

    /// `<e^{-beta q}>`.
    pub fn jarzynski(&self, beta: T) -> T {
        self.expectation(|q| (-beta * q).exp())
    }

    /// Total-variation distance `1/2 sum |p - p'|` over the union of atoms.
    pub fn total_variation(&self, other: &Self) -> T {
        let raw = self
            .atoms
            .iter()
            .map(|a| (a.q, a.prob))
            .chain(other.atoms.iter().map(|a| (a.q, -a.prob)))
            .collect();
        merge_atoms(raw).into_iter().fold(T::zero(), |acc, (_, w)| acc + w.abs()) * T::lit(0.5)
    }
}

#[cfg(test)]
mod tests;
