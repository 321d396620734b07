use nalgebra::DMatrix;
use num_complex::Complex;

use super::{HeatDistribution, ProtocolConfig, Schedule};
use crate::disorder::{enumerate_fixed_total_time, enumerate_realizations, SequenceRealization};
use crate::error::{Error, Result};
use crate::numdiff::{derivative_at_zero, step_for_order};
use crate::quantum::{exp_iu_h, frobenius, propagator, ComplexMatrix, DensityMatrix};
use crate::scalar::{norm_sqr, Real};

/// Largest number of `(realization, outcome sequence)` terms enumerated.
pub const DEFAULT_TERM_CAP: u128 = 10_000_000;

/// Per-waiting-time quantities shared by every sequence using that time.
#[derive(Debug, Clone)]
struct Step<T: Real> {
    tau: T,
    /// `P_k U(tau)` for every outcome `k`.
    projected: Vec<ComplexMatrix<T>>,
    /// `<alpha_k| U(tau) |alpha_l>`.
    overlap: ComplexMatrix<T>,
    /// `|<alpha_k| U(tau) |E_n>|^2`.
    entry: DMatrix<T>,
    /// `U(tau)^dagger A`, columns are `U^dagger |alpha_k>`.
    pulled_back: ComplexMatrix<T>,
}

/// Exact statistics of a protocol by enumerating waiting-time realizations and
/// outcome sequences.
///
/// For one realization the sequence operator is
/// `V = c |alpha_{k_M}><alpha_{k_1}| U(tau_1)` with
/// `c = prod_{i>=2} <alpha_{k_i}| U(tau_i) |alpha_{k_{i-1}}>`, so each sequence
/// contributes `|c|^2` to a `K x K` table indexed by `(k_1, k_M)`. The table is
/// filled by a depth-first walk over all `K^M` sequences.
#[derive(Debug, Clone)]
pub struct ExactEngine<'a, T: Real> {
    config: &'a ProtocolConfig<T>,
    realizations: Vec<SequenceRealization<T>>,
    steps: Vec<Step<T>>,
    /// Sequence-mass tables, `None` for realizations with no measurement.
    masses: Vec<Option<DMatrix<T>>>,
    /// `|<E_m|alpha_k>|^2` indexed `(k, m)`.
    exit: DMatrix<T>,
    first_probs: Vec<T>,
    rho_dephased: DensityMatrix<T>,
    terms: u128,
}

fn saturating_pow(base: u128, exp: usize) -> u128 {
    u32::try_from(exp).ok().and_then(|e| base.checked_pow(e)).unwrap_or(u128::MAX)
}

impl<'a, T: Real> ExactEngine<'a, T> {
    pub fn new(config: &'a ProtocolConfig<T>) -> Result<Self> {
        Self::with_cap(config, DEFAULT_TERM_CAP)
    }

    pub fn with_cap(config: &'a ProtocolConfig<T>, cap: u128) -> Result<Self> {
        let k = config.basis().len() as u128;
        let realizations = match config.schedule() {
            Schedule::Measurements(m) => {
                let required = config.model().realization_count(m).saturating_mul(saturating_pow(k, m));
                if required > cap {
                    return Err(Error::EnumerationTooLarge { required, cap });
                }
                enumerate_realizations(config.model(), m, cap)?
            }
            Schedule::TotalTime(t) => enumerate_fixed_total_time(config.model(), t, cap)?,
        };
        let terms = realizations
            .iter()
            .fold(0u128, |acc, r| acc.saturating_add(saturating_pow(k, r.taus.len())));
        if terms > cap {
            return Err(Error::EnumerationTooLarge { required: terms, cap });
        }

        let h = config.h();
        let basis = config.basis();
        let a = basis.vectors();
        let a_adj = a.adjoint();
        let energy = h.eigenvectors();

        let mut taus: Vec<T> = Vec::new();
        for r in &realizations {
            for &t in &r.taus {
                if !taus.contains(&t) {
                    taus.push(t);
                }
            }
        }
        let steps = taus
            .into_iter()
            .map(|tau| {
                let u = propagator(h, tau);
                let projected = basis.projectors().iter().map(|p| p * &u).collect();
                let overlap = &a_adj * &u * a;
                let entry = (&a_adj * &u * energy).map(norm_sqr);
                let pulled_back = u.adjoint() * a;
                Step { tau, projected, overlap, entry, pulled_back }
            })
            .collect();
        let exit = (&a_adj * energy).map(norm_sqr);

        let mut engine = Self {
            config,
            realizations: Vec::new(),
            steps,
            masses: Vec::new(),
            exit,
            first_probs: crate::quantum::first_measurement_probs(config.rho0(), h)?,
            rho_dephased: config.rho0().dephased_in(h),
            terms,
        };
        engine.masses = realizations.iter().map(|r| engine.sequence_masses(&r.taus)).collect();
        engine.realizations = realizations;
        Ok(engine)
    }

    fn step(&self, tau: T) -> &Step<T> {
        self.steps.iter().find(|s| s.tau == tau).expect("every realized waiting time has a step")
    }

    fn sequence_masses(&self, taus: &[T]) -> Option<DMatrix<T>> {
        let k = self.config.basis().len();
        if taus.is_empty() {
            return None;
        }
        let overlaps: Vec<&ComplexMatrix<T>> = taus[1..].iter().map(|&t| &self.step(t).overlap).collect();
        let mut out = DMatrix::zeros(k, k);
        let one = Complex::new(T::one(), T::zero());
        for k1 in 0..k {
            descend_amplitudes(&overlaps, k1, k1, one, &mut out);
        }
        Some(out)
    }

    pub fn config(&self) -> &ProtocolConfig<T> {
        self.config
    }

    pub fn realizations(&self) -> &[SequenceRealization<T>] {
        &self.realizations
    }

    /// Number of `(realization, outcome sequence)` terms enumerated.
    pub fn term_count(&self) -> u128 {
        self.terms
    }

    /// Joint law `p(n, m)` of one realization, row-major `[n * d + m]`.
    pub fn realization_joint(&self, index: usize) -> Vec<T> {
        let d = self.config.dim();
        let mut joint = vec![T::zero(); d * d];
        self.accumulate_joint(index, T::one(), &mut joint);
        joint
    }

    fn accumulate_joint(&self, index: usize, weight: T, joint: &mut [T]) {
        let d = self.config.dim();
        let k = self.config.basis().len();
        let taus = &self.realizations[index].taus;
        let Some(masses) = &self.masses[index] else {
            for n in 0..d {
                joint[n * d + n] += weight * self.first_probs[n];
            }
            return;
        };
        let entry = &self.step(taus[0]).entry;
        for n in 0..d {
            let pn = weight * self.first_probs[n];
            if pn == T::zero() {
                continue;
            }
            for k1 in 0..k {
                let into = pn * entry[(k1, n)];
                for km in 0..k {
                    let t = into * masses[(k1, km)];
                    for m in 0..d {
                        joint[n * d + m] += t * self.exit[(km, m)];
                    }
                }
            }
        }
    }

    /// Joint law `p(n, m)` averaged over realizations, row-major `[n * d + m]`.
    pub fn joint(&self) -> Vec<T> {
        let d = self.config.dim();
        let mut joint = vec![T::zero(); d * d];
        for (i, r) in self.realizations.iter().enumerate() {
            self.accumulate_joint(i, r.weight, &mut joint);
        }
        joint
    }

    pub fn distribution(&self) -> HeatDistribution<T> {
        HeatDistribution::from_joint(self.config.h().eigenvalues(), &self.joint())
    }

    /// `G(u) = sum_r w_r sum_k Tr[e^{iuH} V e^{-iuH} rho V^dagger]` with `rho`
    /// the initial state dephased in the energy basis.
    pub fn characteristic(&self, u: Complex<T>) -> Complex<T> {
        let h = self.config.h();
        let a = self.config.basis().vectors();
        let k = self.config.basis().len();
        let forward = exp_iu_h(h, u);
        let backward_rho = exp_iu_h(h, -u) * self.rho_dephased.matrix();
        // f_k = <alpha_k| e^{iuH} |alpha_k>
        let f: Vec<Complex<T>> = (0..k)
            .map(|j| (a.column(j).adjoint() * &forward * a.column(j))[(0, 0)])
            .collect();
        let mut g_cache: Vec<(T, Vec<Complex<T>>)> = Vec::new();
        let mut total = Complex::new(T::zero(), T::zero());
        for (r, masses) in self.realizations.iter().zip(&self.masses) {
            let Some(masses) = masses else {
                total += Complex::new(r.weight, T::zero());
                continue;
            };
            let tau1 = r.taus[0];
            if !g_cache.iter().any(|(t, _)| *t == tau1) {
                // g_k = <phi_k| e^{-iuH} rho |phi_k>, |phi_k> = U^dagger |alpha_k>
                let phi = &self.step(tau1).pulled_back;
                let g = (0..k)
                    .map(|j| (phi.column(j).adjoint() * &backward_rho * phi.column(j))[(0, 0)])
                    .collect();
                g_cache.push((tau1, g));
            }
            let g = &g_cache.iter().find(|(t, _)| *t == tau1).expect("cached above").1;
            let mut sum = Complex::new(T::zero(), T::zero());
            for k1 in 0..k {
                for km in 0..k {
                    sum += f[km] * g[k1] * masses[(k1, km)];
                }
            }
            total += sum * r.weight;
        }
        total
    }

    /// `|| sum_r w_r sum_k V V^dagger - I ||_F`, from full operator products.
    pub fn unitality_residual(&self) -> T {
        let d = self.config.dim();
        let identity = ComplexMatrix::<T>::identity(d, d);
        let mut total = ComplexMatrix::<T>::zeros(d, d);
        for r in &self.realizations {
            let steps: Vec<&Step<T>> = r.taus.iter().map(|&t| self.step(t)).collect();
            let mut acc = ComplexMatrix::<T>::zeros(d, d);
            descend_operators(&steps, identity.clone(), &mut acc);
            total += acc * Complex::new(r.weight, T::zero());
        }
        frobenius(&(total - identity))
    }

    /// Heat moment of `order` in `1..=4` by both routes; see [`moment`].
    pub fn moment(&self, order: u32) -> Result<MomentEstimate<T>> {
        if !(1..=4).contains(&order) {
            return Err(Error::param("order", format!("{order} is not in 1..=4")));
        }
        let direct = self.distribution().moment(order);
        let h = T::lit(step_for_order(order, self.config.spectral_width().to_f64_lossy()));
        let d = derivative_at_zero(|u| Ok(self.characteristic(Complex::new(u, T::zero()))), order, h)?;
        // (-i)^n
        let phase = match order % 4 {
            0 => Complex::new(T::one(), T::zero()),
            1 => Complex::new(T::zero(), -T::one()),
            2 => Complex::new(-T::one(), T::zero()),
            _ => Complex::new(T::zero(), T::one()),
        };
        let finite_difference = (phase * d).re;
        let tol = T::lit(T::MOMENT_TOL) * direct.abs().max(T::one());
        if (direct - finite_difference).abs() > tol {
            return Err(Error::MomentMismatch {
                order,
                direct: direct.to_f64_lossy(),
                finite_difference: finite_difference.to_f64_lossy(),
            });
        }
        Ok(MomentEstimate { order, direct, finite_difference })
    }
}

fn descend_amplitudes<T: Real>(
    overlaps: &[&ComplexMatrix<T>],
    k1: usize,
    prev: usize,
    amp: Complex<T>,
    out: &mut DMatrix<T>,
) {
    match overlaps.split_first() {
        None => out[(k1, prev)] += norm_sqr(amp),
        Some((o, rest)) => {
            for k in 0..o.nrows() {
                descend_amplitudes(rest, k1, k, amp * o[(k, prev)], out);
            }
        }
    }
}

fn descend_operators<T: Real>(steps: &[&Step<T>], v: ComplexMatrix<T>, acc: &mut ComplexMatrix<T>) {
    match steps.split_first() {
        None => *acc += &v * v.adjoint(),
        Some((step, rest)) => {
            for p in &step.projected {
                descend_operators(rest, p * &v, acc);
            }
        }
    }
}

pub fn exact_distribution<T: Real>(config: &ProtocolConfig<T>) -> Result<HeatDistribution<T>> {
    Ok(ExactEngine::new(config)?.distribution())
}

pub fn characteristic_function<T: Real>(config: &ProtocolConfig<T>, u: Complex<T>) -> Result<Complex<T>> {
    Ok(ExactEngine::new(config)?.characteristic(u))
}

pub fn unitality_check<T: Real>(config: &ProtocolConfig<T>) -> Result<T> {
    Ok(ExactEngine::new(config)?.unitality_residual())
}

/// A heat moment computed from the distribution and from derivatives of `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate<T> {
    pub order: u32,
    /// `sum prob q^n`.
    pub direct: T,
    /// `(-i)^n d^n G / du^n` at `u = 0`.
    pub finite_difference: T,
}

impl<T: Real> MomentEstimate<T> {
    pub fn value(&self) -> T {
        self.direct
    }
}

/// Heat moment of `order` in `1..=4`, returning both routes; errors with
/// [`Error::MomentMismatch`] when they differ by more than
/// `1e-6 max(1, |moment|)` (scaled up for `f32`).
pub fn moment<T: Real>(config: &ProtocolConfig<T>, order: u32) -> Result<MomentEstimate<T>> {
    ExactEngine::new(config)?.moment(order)
}
