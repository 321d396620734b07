use std::ops::Range;

use num_complex::Complex;
use rand::Rng;

use super::{HeatDistribution, ProtocolConfig, Schedule};
use crate::disorder::{sample_fixed_total_time, sample_index, sample_taus, trajectory_rng};
use crate::error::{Error, Result};
use crate::quantum::{first_measurement_probs, propagator, ComplexMatrix, ComplexVector};
use crate::scalar::{norm_sqr, Real};

/// Outcome record of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatRecord<T> {
    /// Initial energy index.
    pub n: usize,
    /// Intermediate measurement outcomes.
    pub ks: Vec<usize>,
    pub taus: Vec<T>,
    /// Final energy index.
    pub m: usize,
    /// `E_m - E_n`.
    pub q: T,
}

/// Samples protocol runs; propagators for every waiting time the model can
/// produce are computed once.
#[derive(Debug, Clone)]
pub struct TrajectorySampler<'a, T: Real> {
    config: &'a ProtocolConfig<T>,
    first_probs: Vec<T>,
    propagators: Vec<(T, ComplexMatrix<T>)>,
    basis_adj: ComplexMatrix<T>,
    energy_adj: ComplexMatrix<T>,
}

impl<'a, T: Real> TrajectorySampler<'a, T> {
    pub fn new(config: &'a ProtocolConfig<T>) -> Result<Self> {
        let h = config.h();
        let taus: Vec<T> = match config.model() {
            crate::disorder::WaitingTimeModel::Fixed { tau_bar } => vec![*tau_bar],
            model => model.dist().expect("random model has a distribution").atoms().map(|(t, _)| t).collect(),
        };
        Ok(Self {
            config,
            first_probs: first_measurement_probs(config.rho0(), h)?,
            propagators: taus.into_iter().map(|t| (t, propagator(h, t))).collect(),
            basis_adj: config.basis().vectors().adjoint(),
            energy_adj: h.eigenvectors().adjoint(),
        })
    }

    pub fn config(&self) -> &ProtocolConfig<T> {
        self.config
    }

    fn propagator(&self, tau: T) -> &ComplexMatrix<T> {
        &self.propagators.iter().find(|(t, _)| *t == tau).expect("waiting time drawn from the model").1
    }

    /// Runs the protocol once: energy measurement, `M` basis measurements
    /// separated by free evolution, final energy measurement.
    pub fn run_trajectory<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HeatRecord<T>> {
        let h = self.config.h();
        let n = sample_index(&self.first_probs, rng);
        let taus = match self.config.schedule() {
            Schedule::Measurements(m) => sample_taus(self.config.model(), m, rng)?,
            // The leftover time before the final energy measurement does not
            // change its statistics, so it is not evolved.
            Schedule::TotalTime(t) => sample_fixed_total_time(self.config.model(), t, rng)?.1,
        };
        let a = self.config.basis().vectors();
        let mut psi: ComplexVector<T> = h.eigenvectors().column(n).into_owned();
        let mut ks = Vec::with_capacity(taus.len());
        for &tau in &taus {
            let evolved = self.propagator(tau) * &psi;
            let amps = &self.basis_adj * evolved;
            let weights: Vec<T> = amps.iter().map(|&c| norm_sqr(c)).collect();
            let k = sample_index(&weights, rng);
            let phase = amps[k] / Complex::new(norm_sqr(amps[k]).sqrt(), T::zero());
            psi = a.column(k) * phase;
            ks.push(k);
        }
        let amps = &self.energy_adj * &psi;
        let weights: Vec<T> = amps.iter().map(|&c| norm_sqr(c)).collect();
        let m = sample_index(&weights, rng);
        let e = h.eigenvalues();
        Ok(HeatRecord { n, ks, taus, m, q: e[m] - e[n] })
    }

    /// Runs the trajectories with the given indices, each on its own RNG
    /// stream derived from the configured seed.
    pub fn run_indices(&self, indices: Range<u64>) -> Result<HeatTally<T>> {
        let mut tally = HeatTally::new(self.config.h().eigenvalues().to_vec());
        for index in indices {
            let mut rng = trajectory_rng(self.config.seed(), index);
            let record = self.run_trajectory(&mut rng)?;
            tally.record(record.n, record.m);
        }
        Ok(tally)
    }

    /// Runs trajectories `0..n_traj` split over `threads` workers. The result
    /// does not depend on `threads`.
    pub fn run(&self, n_traj: u64, threads: usize) -> Result<HeatTally<T>> {
        let threads = threads.max(1) as u64;
        let chunk = n_traj.div_ceil(threads).max(1);
        let ranges: Vec<Range<u64>> = (0..threads)
            .map(|i| (i * chunk).min(n_traj)..((i + 1) * chunk).min(n_traj))
            .filter(|r| !r.is_empty())
            .collect();
        if ranges.len() <= 1 {
            return self.run_indices(0..n_traj);
        }
        let parts: Vec<Result<HeatTally<T>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = ranges
                .into_iter()
                .map(|range| scope.spawn(move || self.run_indices(range)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("trajectory worker panicked")).collect()
        });
        let mut total = HeatTally::new(self.config.h().eigenvalues().to_vec());
        for part in parts {
            total.merge(&part?);
        }
        Ok(total)
    }
}

/// Counts of `(n, m)` energy-index pairs over many trajectories; merges by
/// summation.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatTally<T> {
    energies: Vec<T>,
    counts: Vec<u64>,
}

/// Monte Carlo estimate of `<e^{-beta q}>` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JarzynskiEstimate<T> {
    pub estimate: T,
    pub std_error: T,
}

impl<T: Real> HeatTally<T> {
    pub fn new(energies: Vec<T>) -> Self {
        let d = energies.len();
        Self { energies, counts: vec![0; d * d] }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn record(&mut self, n: usize, m: usize) {
        let d = self.dim();
        self.counts[n * d + m] += 1;
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.counts.len(), other.counts.len(), "tallies of different dimension");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Row-major counts `[n * d + m]`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_samples(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn distribution(&self) -> HeatDistribution<T> {
        HeatDistribution::from_counts(&self.energies, &self.counts)
    }

    /// Sample mean of `e^{-beta q}` and `sqrt(s^2 / N)` with the `N - 1`
    /// sample variance.
    pub fn jarzynski(&self, beta: T) -> JarzynskiEstimate<T> {
        let d = self.dim();
        let n_total = self.n_samples();
        let big_n = T::lit(n_total as f64);
        let terms: Vec<(T, T)> = (0..d * d)
            .filter(|&i| self.counts[i] > 0)
            .map(|i| {
                let q = self.energies[i % d] - self.energies[i / d];
                (T::lit(self.counts[i] as f64), (-beta * q).exp())
            })
            .collect();
        let estimate = terms.iter().fold(T::zero(), |acc, &(c, x)| acc + c * x) / big_n;
        let std_error = if n_total < 2 {
            T::zero()
        } else {
            let ss = terms.iter().fold(T::zero(), |acc, &(c, x)| acc + c * (x - estimate) * (x - estimate));
            (ss / (big_n - T::one()) / big_n).sqrt()
        };
        JarzynskiEstimate { estimate, std_error }
    }
}

/// One trajectory drawn with `rng`.
pub fn run_trajectory<T: Real, R: Rng + ?Sized>(config: &ProtocolConfig<T>, rng: &mut R) -> Result<HeatRecord<T>> {
    TrajectorySampler::new(config)?.run_trajectory(rng)
}

/// Trajectories `0..n_traj` on `threads` workers.
pub fn simulate<T: Real>(config: &ProtocolConfig<T>, n_traj: u64, threads: usize) -> Result<HeatTally<T>> {
    TrajectorySampler::new(config)?.run(n_traj, threads)
}

/// Monte Carlo Jarzynski estimate over `n_traj >= 2` trajectories, using all
/// available cores.
pub fn jarzynski_mc<T: Real>(config: &ProtocolConfig<T>, n_traj: u64) -> Result<JarzynskiEstimate<T>> {
    if n_traj < 2 {
        return Err(Error::param("n_traj", format!("{n_traj} is below the minimum of 2")));
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(simulate(config, n_traj, threads)?.jarzynski(config.beta()))
}
