//! Waiting-time disorder models: deterministic (fixed), quenched (one draw
//! per sequence) and annealed (independent draw per step), with samplers and
//! exact enumeration of the realizations of `p(tau_1, ..., tau_M)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default cap on the number of enumerated waiting-time realizations.
pub const DEFAULT_REALIZATION_CAP: u128 = 1_000_000;

/// Generator used for one trajectory.
pub type TrajectoryRng = ChaCha8Rng;

/// Generator for trajectory `index` of a run seeded with `master_seed`.
///
/// Each index selects an independent ChaCha stream, so the draws of a
/// trajectory do not depend on how indices are partitioned across workers.
pub fn trajectory_rng(master_seed: u64, index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw in `[0, 1)`.
pub(crate) fn uniform<T: Real, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::lit(rng.random::<f64>())
}

/// Index drawn from unnormalized non-negative `weights`; zero-weight entries
/// are never returned.
pub(crate) fn sample_index<T: Real, R: Rng + ?Sized>(weights: &[T], rng: &mut R) -> usize {
    let total = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    let target = uniform::<T, R>(rng) * total;
    let mut cumulative = T::zero();
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= T::zero() {
            continue;
        }
        last_positive = i;
        cumulative += w;
        if target < cumulative {
            return i;
        }
    }
    last_positive
}

/// Finite-support waiting-time law: `tau^(j)` with probability `p_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWaitingDist<T: Real> {
    values: Vec<T>,
    probs: Vec<T>,
}

impl<T: Real> DiscreteWaitingDist<T> {
    pub fn new(values: Vec<T>, probs: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("at least one waiting time is required".into()));
        }
        if values.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} waiting times but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v <= T::zero()) {
            return Err(Error::InvalidDistribution(format!("waiting time {v} must be finite and positive")));
        }
        for (i, a) in values.iter().enumerate() {
            if values[i + 1..].contains(a) {
                return Err(Error::InvalidDistribution(format!("waiting time {a} listed twice")));
            }
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < T::zero()) {
            return Err(Error::InvalidDistribution(format!("probability {p} must be finite and non-negative")));
        }
        let total = probs.iter().fold(T::zero(), |acc, &p| acc + p);
        if (total - T::one()).abs() > T::lit(T::INVARIANT_TOL) {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Self { values, probs })
    }

    /// Single atom at `tau`.
    pub fn single(tau: T) -> Result<Self> {
        Self::new(vec![tau], vec![T::one()])
    }

    /// Two atoms `tau1` (probability `p1`) and `tau2` (probability `1 - p1`).
    pub fn bimodal(tau1: T, tau2: T, p1: T) -> Result<Self> {
        Self::new(vec![tau1, tau2], vec![p1, T::one() - p1])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    /// Number of support points `d_tau`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Support points carrying non-zero probability, as `(tau, p)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied()).filter(|(_, p)| *p > T::zero())
    }

    pub fn mean(&self) -> T {
        mean_tau(self)
    }

    pub fn second_moment(&self) -> T {
        second_moment_tau(self)
    }

    pub fn variance(&self) -> T {
        (self.second_moment() - self.mean() * self.mean()).max(T::zero())
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(self.values[0], |a, b| a.min(b))
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(self.values[0], |a, b| a.max(b))
    }

    /// Same probabilities, every support point multiplied by `factor > 0`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| v * factor).collect(), self.probs.clone())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        self.values[sample_index(&self.probs, rng)]
    }
}

/// `sum_j p_j tau^(j)`.
pub fn mean_tau<T: Real>(dist: &DiscreteWaitingDist<T>) -> T {
    dist.values.iter().zip(&dist.probs).fold(T::zero(), |acc, (&v, &p)| acc + p * v)
}

/// `sum_j p_j (tau^(j))^2`.
pub fn second_moment_tau<T: Real>(dist: &DiscreteWaitingDist<T>) -> T {
    dist.values.iter().zip(&dist.probs).fold(T::zero(), |acc, (&v, &p)| acc + p * v * v)
}

/// How waiting times are drawn along a measurement sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum WaitingTimeModel<T: Real> {
    /// Every waiting time equals `tau_bar`.
    Fixed { tau_bar: T },
    /// One draw per sequence, repeated for all its steps.
    Quenched { dist: DiscreteWaitingDist<T> },
    /// Independent draws at every step.
    Annealed { dist: DiscreteWaitingDist<T> },
}

impl<T: Real> WaitingTimeModel<T> {
    pub fn fixed(tau_bar: T) -> Result<Self> {
        if !tau_bar.is_finite() || tau_bar <= T::zero() {
            return Err(Error::param("tau_bar", format!("{tau_bar} must be finite and positive")));
        }
        Ok(Self::Fixed { tau_bar })
    }

    pub fn dist(&self) -> Option<&DiscreteWaitingDist<T>> {
        match self {
            Self::Fixed { .. } => None,
            Self::Quenched { dist } | Self::Annealed { dist } => Some(dist),
        }
    }

    pub fn min_waiting_time(&self) -> T {
        match self {
            Self::Fixed { tau_bar } => *tau_bar,
            Self::Quenched { dist } | Self::Annealed { dist } => dist
                .atoms()
                .map(|(t, _)| t)
                .fold(dist.max_value(), |a, b| a.min(b)),
        }
    }

    /// Mean waiting time `<tau>`.
    pub fn mean_waiting_time(&self) -> T {
        match self {
            Self::Fixed { tau_bar } => *tau_bar,
            Self::Quenched { dist } | Self::Annealed { dist } => dist.mean(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Fixed { .. } => "fixed",
            Self::Quenched { .. } => "quenched",
            Self::Annealed { .. } => "annealed",
        }
    }

    /// Number of realizations `enumerate_realizations` would produce.
    pub fn realization_count(&self, m_count: usize) -> u128 {
        match self {
            Self::Fixed { .. } => 1,
            Self::Quenched { dist } => dist.atoms().count() as u128,
            Self::Annealed { dist } => {
                let atoms = dist.atoms().count() as u128;
                u32::try_from(m_count)
                    .ok()
                    .and_then(|m| atoms.checked_pow(m))
                    .unwrap_or(u128::MAX)
            }
        }
    }
}

/// One waiting-time vector and its probability under the model.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRealization<T: Real> {
    pub taus: Vec<T>,
    pub weight: T,
}

fn require_steps(m_count: usize) -> Result<()> {
    if m_count == 0 {
        return Err(Error::param("m_count", "at least one measurement is required"));
    }
    Ok(())
}

/// Draws `tau_1..tau_M` for one sequence.
pub fn sample_taus<T: Real, R: Rng + ?Sized>(
    model: &WaitingTimeModel<T>,
    m_count: usize,
    rng: &mut R,
) -> Result<Vec<T>> {
    require_steps(m_count)?;
    Ok(match model {
        WaitingTimeModel::Fixed { tau_bar } => vec![*tau_bar; m_count],
        WaitingTimeModel::Quenched { dist } => vec![dist.sample(rng); m_count],
        WaitingTimeModel::Annealed { dist } => (0..m_count).map(|_| dist.sample(rng)).collect(),
    })
}

/// Every waiting-time vector with non-zero probability, with its weight.
///
/// Annealed realizations are listed in mixed-radix order with `tau_1`
/// varying fastest.
pub fn enumerate_realizations<T: Real>(
    model: &WaitingTimeModel<T>,
    m_count: usize,
    cap: u128,
) -> Result<Vec<SequenceRealization<T>>> {
    require_steps(m_count)?;
    let required = model.realization_count(m_count);
    if required > cap {
        return Err(Error::EnumerationTooLarge { required, cap });
    }
    Ok(match model {
        WaitingTimeModel::Fixed { tau_bar } => {
            vec![SequenceRealization { taus: vec![*tau_bar; m_count], weight: T::one() }]
        }
        WaitingTimeModel::Quenched { dist } => dist
            .atoms()
            .map(|(tau, p)| SequenceRealization { taus: vec![tau; m_count], weight: p })
            .collect(),
        WaitingTimeModel::Annealed { dist } => {
            let atoms: Vec<(T, T)> = dist.atoms().collect();
            let radix = atoms.len();
            let mut digits = vec![0usize; m_count];
            let mut out = Vec::with_capacity(required as usize);
            loop {
                let taus = digits.iter().map(|&j| atoms[j].0).collect();
                let weight = digits.iter().fold(T::one(), |acc, &j| acc * atoms[j].1);
                out.push(SequenceRealization { taus, weight });
                // odometer increment
                let mut pos = 0;
                loop {
                    if pos == m_count {
                        return Ok(out);
                    }
                    digits[pos] += 1;
                    if digits[pos] < radix {
                        break;
                    }
                    digits[pos] = 0;
                    pos += 1;
                }
            }
        }
    })
}

/// Draws waiting times until the next one would push the elapsed time past
/// `total_time`, returning the retained prefix and its length.
///
/// A waiting time landing exactly on `total_time` is kept (a relative slack
/// of a few ulps absorbs accumulation error). The count may be zero.
pub fn sample_fixed_total_time<T: Real, R: Rng + ?Sized>(
    model: &WaitingTimeModel<T>,
    total_time: T,
    rng: &mut R,
) -> Result<(usize, Vec<T>)> {
    let limit = check_total_time(model, total_time)?;
    let quenched_tau = match model {
        WaitingTimeModel::Quenched { dist } => Some(dist.sample(rng)),
        _ => None,
    };
    let mut taus = Vec::new();
    let mut elapsed = T::zero();
    loop {
        let tau = match model {
            WaitingTimeModel::Fixed { tau_bar } => *tau_bar,
            WaitingTimeModel::Quenched { .. } => quenched_tau.expect("drawn above"),
            WaitingTimeModel::Annealed { dist } => dist.sample(rng),
        };
        if elapsed + tau > limit {
            break;
        }
        elapsed += tau;
        taus.push(tau);
    }
    Ok((taus.len(), taus))
}

fn check_total_time<T: Real>(model: &WaitingTimeModel<T>, total_time: T) -> Result<T> {
    if !total_time.is_finite() || total_time <= T::zero() {
        return Err(Error::param("total_time", format!("{total_time} must be finite and positive")));
    }
    if model.min_waiting_time() <= T::zero() {
        return Err(Error::param("model", "minimum waiting time must be positive"));
    }
    Ok(total_time * (T::one() + T::default_epsilon() * T::lit(64.0)))
}

/// Every prefix `sample_fixed_total_time` can return, with its probability.
///
/// A prefix is weighted by the probability of its draws times the
/// probability that the following draw overshoots the total time, so the
/// weights sum to one. Lengths vary between realizations and may be zero.
pub fn enumerate_fixed_total_time<T: Real>(
    model: &WaitingTimeModel<T>,
    total_time: T,
    cap: u128,
) -> Result<Vec<SequenceRealization<T>>> {
    let limit = check_total_time(model, total_time)?;
    let repeat = |tau: T, weight: T| {
        let mut taus = Vec::new();
        let mut elapsed = T::zero();
        while elapsed + tau <= limit {
            elapsed += tau;
            taus.push(tau);
        }
        SequenceRealization { taus, weight }
    };
    match model {
        WaitingTimeModel::Fixed { tau_bar } => Ok(vec![repeat(*tau_bar, T::one())]),
        WaitingTimeModel::Quenched { dist } => {
            let out: Vec<_> = dist.atoms().map(|(tau, p)| repeat(tau, p)).collect();
            if out.len() as u128 > cap {
                return Err(Error::EnumerationTooLarge { required: out.len() as u128, cap });
            }
            Ok(out)
        }
        WaitingTimeModel::Annealed { dist } => {
            let atoms: Vec<(T, T)> = dist.atoms().collect();
            let mut out = Vec::new();
            let mut prefix = Vec::new();
            annealed_prefixes(&atoms, limit, T::zero(), T::one(), &mut prefix, &mut out, cap)?;
            Ok(out)
        }
    }
}

fn annealed_prefixes<T: Real>(
    atoms: &[(T, T)],
    limit: T,
    elapsed: T,
    weight: T,
    prefix: &mut Vec<T>,
    out: &mut Vec<SequenceRealization<T>>,
    cap: u128,
) -> Result<()> {
    let mut stop = T::zero();
    for &(tau, p) in atoms {
        if elapsed + tau > limit {
            stop += p;
        } else {
            prefix.push(tau);
            annealed_prefixes(atoms, limit, elapsed + tau, weight * p, prefix, out, cap)?;
            prefix.pop();
        }
    }
    if stop > T::zero() {
        if out.len() as u128 >= cap {
            return Err(Error::EnumerationTooLarge { required: out.len() as u128 + 1, cap });
        }
        out.push(SequenceRealization { taus: prefix.clone(), weight: weight * stop });
    }
    Ok(())
}

/// Product weight of a waiting-time vector under the annealed law (test helper).
#[cfg(test)]
fn annealed_weight<T: Real>(dist: &DiscreteWaitingDist<T>, taus: &[T]) -> T {
    taus.iter().fold(T::one(), |acc, t| {
        let j = dist.values().iter().position(|v| v == t).unwrap();
        acc * dist.probs()[j]
    })
}
