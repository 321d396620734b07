//! Closed forms for a two-level system.
//!
//! `H = diag(-E, E)` with `|E->` at index 0 and `|E+>` at index 1. The
//! measured basis is `alpha_1 = a|E+> - b|E->`, `alpha_2 = b|E+> + a|E->`
//! with real `a = sqrt(a2)`, `b = sqrt(1 - a2)`, and the initial state is
//! `c1 |E+><E+| + c2 |E-><E-|`.
//!
//! Between measurements the outcome label performs a Markov chain with the
//! symmetric transition matrix `L = [[1-nu, nu], [nu, 1-nu]]`, so every
//! characteristic function reduces to `f^T S g` where `S` is a symmetric
//! doubly stochastic matrix `1/2 [[1+s, 1-s], [1-s, 1+s]]` fixed by the single
//! number `s` (its non-trivial eigenvalue).

use num_complex::Complex;

use crate::disorder::{DiscreteWaitingDist, WaitingTimeModel};
use crate::error::{Error, Result};
use crate::heat::{ProtocolConfig, Schedule};
use crate::quantum::{propagator, ComplexMatrix, DensityMatrix, HermitianOperator, MeasurementBasis};
use crate::scalar::{binomial, cplx, expi, norm_sqr, powi, Real};

type C<T> = Complex<T>;

/// Parameters of the two-level protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsParams<T> {
    /// Half splitting; eigenvalues are `-e` and `e`.
    pub e: T,
    /// `|a|^2`.
    pub a2: T,
    /// Initial population of `|E+>`.
    pub c1: T,
    /// Number of intermediate measurements `M`.
    pub m_count: usize,
    pub beta: T,
}

fn unit_interval<T: Real>(name: &'static str, x: T) -> Result<()> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::param(name, format!("{x} is outside [0, 1]")));
    }
    Ok(())
}

/// `c1` of the thermal state at inverse temperature `beta`.
pub fn thermal_c1<T: Real>(e: T, beta: T) -> T {
    // e^{-bE} / (e^{-bE} + e^{bE}) = 1 / (1 + e^{2bE})
    T::one() / (T::one() + (T::lit(2.0) * beta * e).exp())
}

impl<T: Real> TlsParams<T> {
    pub fn new(e: T, a2: T, c1: T, m_count: usize, beta: T) -> Result<Self> {
        let p = Self { e, a2, c1, m_count, beta };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `c1` set to the thermal value at `beta`.
    pub fn thermal(e: T, a2: T, m_count: usize, beta: T) -> Result<Self> {
        Self::new(e, a2, thermal_c1(e, beta), m_count, beta)
    }

    fn validate(&self) -> Result<()> {
        if !self.e.is_finite() || self.e <= T::zero() {
            return Err(Error::param("e", format!("{} must be finite and positive", self.e)));
        }
        unit_interval("a2", self.a2)?;
        unit_interval("c1", self.c1)?;
        if self.m_count == 0 {
            return Err(Error::param("m_count", "at least one measurement is required"));
        }
        if !self.beta.is_finite() || self.beta < T::zero() {
            return Err(Error::param("beta", format!("{} must be finite and non-negative", self.beta)));
        }
        Ok(())
    }

    pub fn b2(&self) -> T {
        T::one() - self.a2
    }

    pub fn c2(&self) -> T {
        T::one() - self.c1
    }

    pub fn with_c1(self, c1: T) -> Result<Self> {
        Self::new(self.e, self.a2, c1, self.m_count, self.beta)
    }

    pub fn with_a2(self, a2: T) -> Result<Self> {
        Self::new(self.e, a2, self.c1, self.m_count, self.beta)
    }

    pub fn with_m_count(self, m_count: usize) -> Result<Self> {
        Self::new(self.e, self.a2, self.c1, m_count, self.beta)
    }

    pub fn hamiltonian(&self) -> HermitianOperator<T> {
        HermitianOperator::from_diagonal(&[-self.e, self.e]).expect("e > 0 gives a non-degenerate spectrum")
    }

    /// Columns `alpha_1`, `alpha_2` in the `(|E->, |E+>)` basis.
    pub fn basis(&self) -> MeasurementBasis<T> {
        let a = self.a2.sqrt();
        let b = self.b2().sqrt();
        let v = ComplexMatrix::from_row_slice(2, 2, &[cplx(-b), cplx(a), cplx(a), cplx(b)]);
        MeasurementBasis::from_vectors(v, vec![T::one(), -T::one()]).expect("real rotation is orthonormal")
    }

    pub fn rho0(&self) -> DensityMatrix<T> {
        DensityMatrix::diagonal_in(&self.hamiltonian(), &[self.c2(), self.c1]).expect("populations in [0, 1]")
    }

    /// Equivalent general protocol with `M = m_count` measurements.
    pub fn protocol_config(&self, model: WaitingTimeModel<T>, seed: u64) -> Result<ProtocolConfig<T>> {
        ProtocolConfig::new(
            self.hamiltonian(),
            self.basis(),
            self.rho0(),
            Schedule::Measurements(self.m_count),
            model,
            self.beta,
            seed,
        )
    }
}

/// `nu(tau) = |<alpha_2| U(tau) |alpha_1>|^2`, evaluated from the matrix
/// element; equals `4 a2 (1 - a2) sin^2(E tau)` and ranges over `[0, 1]`.
pub fn nu_of_tau<T: Real>(p: &TlsParams<T>, tau: T) -> Result<T> {
    if !tau.is_finite() || tau < T::zero() {
        return Err(Error::param("tau", format!("{tau} must be finite and non-negative")));
    }
    let basis = p.basis();
    let u = propagator(&p.hamiltonian(), tau);
    let amp = (basis.vector(1).adjoint() * u * basis.vector(0))[(0, 0)];
    Ok(norm_sqr(amp))
}

/// `L = [[1 - nu, nu], [nu, 1 - nu]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionMatrix2<T> {
    nu: T,
}

impl<T: Real> TransitionMatrix2<T> {
    pub fn new(nu: T) -> Result<Self> {
        unit_interval("nu", nu)?;
        Ok(Self { nu })
    }

    pub fn at(p: &TlsParams<T>, tau: T) -> Result<Self> {
        // round-off can push the matrix element a few ulps past 1
        Self::new(nu_of_tau(p, tau)?.min(T::one()))
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    /// Non-trivial eigenvalue `1 - 2 nu` (the other is 1).
    pub fn eigenvalue(&self) -> T {
        T::one() - T::lit(2.0) * self.nu
    }

    pub fn matrix(&self) -> [[T; 2]; 2] {
        let stay = T::one() - self.nu;
        [[stay, self.nu], [self.nu, stay]]
    }

    /// `L^n = 1/2 [[1 + l^n, 1 - l^n], [1 - l^n, 1 + l^n]]` with `l = 1 - 2 nu`.
    pub fn power(&self, n: usize) -> [[T; 2]; 2] {
        symmetric_stochastic(powi(self.eigenvalue(), n))
    }
}

fn symmetric_stochastic<T: Real>(s: T) -> [[T; 2]; 2] {
    let half = T::lit(0.5);
    let d = half * (T::one() + s);
    let o = half * (T::one() - s);
    [[d, o], [o, d]]
}

fn matmul<T: Real>(x: [[T; 2]; 2], y: [[T; 2]; 2]) -> [[T; 2]; 2] {
    let mut out = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

fn bilinear<T: Real>(f: [C<T>; 2], m: [[T; 2]; 2], g: [C<T>; 2]) -> C<T> {
    let mut out = C::new(T::zero(), T::zero());
    for i in 0..2 {
        for j in 0..2 {
            out += f[i] * g[j] * m[i][j];
        }
    }
    out
}

/// `f^T S(s) g` for `S(s) = 1/2 [[1+s, 1-s], [1-s, 1+s]]`.
fn contract<T: Real>(f: [C<T>; 2], s: T, g: [C<T>; 2]) -> C<T> {
    ((f[0] + f[1]) * (g[0] + g[1]) + (f[0] - f[1]) * (g[0] - g[1]) * s) * T::lit(0.5)
}

/// `k`-th derivative in `u` of `f_j(u) = <alpha_j| e^{iuH} |alpha_j>`.
pub fn f_derivative<T: Real>(p: &TlsParams<T>, u: C<T>, k: u32) -> [C<T>; 2] {
    let up = expi(u * p.e) * C::new(T::zero(), p.e).powu(k);
    let down = expi(-u * p.e) * C::new(T::zero(), -p.e).powu(k);
    [up * p.a2 + down * p.b2(), down * p.a2 + up * p.b2()]
}

/// `k`-th derivative in `u` of `g_j(u) = <alpha_j| e^{-iuH} rho0 |alpha_j>`.
pub fn g_derivative<T: Real>(p: &TlsParams<T>, u: C<T>, k: u32) -> [C<T>; 2] {
    let up = expi(u * p.e) * C::new(T::zero(), p.e).powu(k);
    let down = expi(-u * p.e) * C::new(T::zero(), -p.e).powu(k);
    let (a2, b2, c1, c2) = (p.a2, p.b2(), p.c1, p.c2());
    [down * (a2 * c1) + up * (b2 * c2), up * (a2 * c2) + down * (b2 * c1)]
}

/// `f(u) = (a2 e^{iuE} + b2 e^{-iuE}, a2 e^{-iuE} + b2 e^{iuE})`.
pub fn f_vector<T: Real>(p: &TlsParams<T>, u: C<T>) -> [C<T>; 2] {
    f_derivative(p, u, 0)
}

/// `g(u) = (a2 c1 e^{-iuE} + b2 c2 e^{iuE}, a2 c2 e^{iuE} + b2 c1 e^{-iuE})`.
pub fn g_vector<T: Real>(p: &TlsParams<T>, u: C<T>) -> [C<T>; 2] {
    g_derivative(p, u, 0)
}

fn eigenvalue_at<T: Real>(p: &TlsParams<T>, tau: T) -> Result<T> {
    Ok(TransitionMatrix2::at(p, tau)?.eigenvalue())
}

/// Model average `s` of the propagated chain: `S = E[L_{M-1} ... L_1]` is
/// symmetric doubly stochastic with non-trivial eigenvalue `s`.
pub fn chain_eigenvalue<T: Real>(p: &TlsParams<T>, model: &WaitingTimeModel<T>) -> Result<T> {
    let steps = p.m_count - 1;
    match model {
        WaitingTimeModel::Fixed { tau_bar } => Ok(powi(eigenvalue_at(p, *tau_bar)?, steps)),
        WaitingTimeModel::Quenched { dist } => dist.atoms().try_fold(T::zero(), |acc, (tau, w)| {
            Ok(acc + w * powi(eigenvalue_at(p, tau)?, steps))
        }),
        WaitingTimeModel::Annealed { dist } => {
            let zeta = mixed_nu(p, dist)?;
            Ok(powi(T::one() - T::lit(2.0) * zeta, steps))
        }
    }
}

/// `zeta = sum_j p_j nu_j`.
pub fn mixed_nu<T: Real>(p: &TlsParams<T>, dist: &DiscreteWaitingDist<T>) -> Result<T> {
    dist.atoms().try_fold(T::zero(), |acc, (tau, w)| Ok(acc + w * nu_of_tau(p, tau)?))
}

/// `G(u) = f^T L(nu(tau_bar))^{M-1} g`.
pub fn g_fixed<T: Real>(p: &TlsParams<T>, u: C<T>, tau_bar: T) -> Result<C<T>> {
    g_model(p, u, &WaitingTimeModel::Fixed { tau_bar })
}

/// `G(u) = f^T [sum_j p_j L_j^{M-1}] g`.
pub fn g_quenched<T: Real>(p: &TlsParams<T>, u: C<T>, dist: &DiscreteWaitingDist<T>) -> Result<C<T>> {
    g_model(p, u, &WaitingTimeModel::Quenched { dist: dist.clone() })
}

/// `G(u) = f^T [sum_j p_j L_j]^{M-1} g`.
pub fn g_annealed<T: Real>(p: &TlsParams<T>, u: C<T>, dist: &DiscreteWaitingDist<T>) -> Result<C<T>> {
    g_model(p, u, &WaitingTimeModel::Annealed { dist: dist.clone() })
}

/// Annealed `G(u)` expanded over step counts: the average of
/// `prod_j L_j^{n_j}` is a multinomial sum over compositions of `M - 1`.
pub fn g_annealed_multinomial<T: Real>(p: &TlsParams<T>, u: C<T>, dist: &DiscreteWaitingDist<T>) -> Result<C<T>> {
    let atoms: Vec<(T, TransitionMatrix2<T>)> = dist
        .atoms()
        .map(|(tau, w)| Ok((w, TransitionMatrix2::at(p, tau)?)))
        .collect::<Result<_>>()?;
    let mut total = [[T::zero(); 2]; 2];
    let identity = [[T::one(), T::zero()], [T::zero(), T::one()]];
    compositions(&atoms, p.m_count - 1, T::one(), identity, &mut total);
    Ok(bilinear(f_vector(p, u), total, g_vector(p, u)))
}

fn compositions<T: Real>(
    atoms: &[(T, TransitionMatrix2<T>)],
    remaining: usize,
    coefficient: T,
    product: [[T; 2]; 2],
    total: &mut [[T; 2]; 2],
) {
    let Some((&(w, l), rest)) = atoms.split_first() else {
        if remaining == 0 {
            for i in 0..2 {
                for j in 0..2 {
                    total[i][j] += coefficient * product[i][j];
                }
            }
        }
        return;
    };
    let counts: Vec<usize> = if rest.is_empty() { vec![remaining] } else { (0..=remaining).collect() };
    for n in counts {
        let c = coefficient * binomial::<T>(remaining, n) * powi(w, n);
        compositions(rest, remaining - n, c, matmul(product, l.power(n)), total);
    }
}

/// Characteristic function of the protocol under `model`.
pub fn g_model<T: Real>(p: &TlsParams<T>, u: C<T>, model: &WaitingTimeModel<T>) -> Result<C<T>> {
    Ok(contract(f_vector(p, u), chain_eigenvalue(p, model)?, g_vector(p, u)))
}

/// `d G(u) / d c1`; `G` is affine in `c1`.
pub fn c1_slope<T: Real>(p: &TlsParams<T>, u: C<T>, model: &WaitingTimeModel<T>) -> Result<C<T>> {
    Ok(g_model(&p.with_c1(T::one())?, u, model)? - g_model(&p.with_c1(T::zero())?, u, model)?)
}

/// `lambda = (1 - 2 a2)^2 s`.
pub fn lambda_avg<T: Real>(p: &TlsParams<T>, model: &WaitingTimeModel<T>) -> Result<T> {
    let prefactor = T::one() - T::lit(2.0) * p.a2;
    Ok(prefactor * prefactor * chain_eigenvalue(p, model)?)
}

/// `phi = E (1 - lambda)`, the mean heat at `c1 = 0`.
pub fn phi<T: Real>(p: &TlsParams<T>, model: &WaitingTimeModel<T>) -> Result<T> {
    Ok(p.e * (T::one() - lambda_avg(p, model)?))
}

/// `<Q> = -phi (2 c1 - 1)`.
pub fn mean_heat<T: Real>(p: &TlsParams<T>, model: &WaitingTimeModel<T>) -> Result<T> {
    Ok(-phi(p, model)? * (T::lit(2.0) * p.c1 - T::one()))
}

/// `G_inf(u) = (1 + e^{2iuE}) / 2 - c1 sinh(2iuE)`, the limit for
/// `0 < a2 < 1` and `|1 - 2 nu| < 1`.
pub fn g_infinity<T: Real>(p: &TlsParams<T>, u: C<T>) -> C<T> {
    let (up, down) = double_phases(p, u);
    (up + T::one()) * T::lit(0.5) - (up - down) * (T::lit(0.5) * p.c1)
}

/// `(e^{2iuE}, e^{-2iuE})`.
fn double_phases<T: Real>(p: &TlsParams<T>, u: C<T>) -> (C<T>, C<T>) {
    let x = u * (T::lit(2.0) * p.e);
    (expi(x), expi(-x))
}

/// `<Q>_inf = E (1 - 2 c1)`.
pub fn mean_heat_infinity<T: Real>(p: &TlsParams<T>) -> T {
    p.e * (T::one() - T::lit(2.0) * p.c1)
}

/// `1/2 [sinh(2iuE) <Q>_inf / E + cosh(2iuE) + 1]`, equal to [`g_infinity`].
pub fn g_infinity_from_mean<T: Real>(p: &TlsParams<T>, u: C<T>) -> C<T> {
    let (up, down) = double_phases(p, u);
    let half = T::lit(0.5);
    let sinh = (up - down) * half;
    let cosh = (up + down) * half;
    (sinh * (mean_heat_infinity(p) / p.e) + cosh + T::one()) * half
}

/// Measurement count for a total time at a given mean waiting time,
/// `max(1, round(T / <tau>))`.
pub fn measurement_count<T: Real>(total_time: T, mean_tau: T) -> usize {
    let m = (total_time / mean_tau).round().to_usize().unwrap_or(usize::MAX);
    m.max(1)
}

/// Two-point law on the first two support values of `dist` whose mean is
/// `target`.
pub fn matched_bimodal<T: Real>(dist: &DiscreteWaitingDist<T>, target: T) -> Result<DiscreteWaitingDist<T>> {
    if dist.len() != 2 {
        return Err(Error::InvalidDistribution(format!("need two support values, found {}", dist.len())));
    }
    let (t1, t2) = (dist.values()[0], dist.values()[1]);
    let (lo, hi) = (t1.min(t2), t1.max(t2));
    if !(target >= lo && target <= hi) {
        return Err(Error::UnreachableMean {
            target: target.to_f64_lossy(),
            min: lo.to_f64_lossy(),
            max: hi.to_f64_lossy(),
        });
    }
    let p1 = ((target - t2) / (t1 - t2)).max(T::zero()).min(T::one());
    DiscreteWaitingDist::bimodal(t1, t2, p1)
}

/// `lambda(fixed at tau_bar = target) - lambda(annealed)` with `p_1` chosen so
/// that `<tau> = target` and `M = max(1, round(T / target))`.
pub fn delta_lambda<T: Real>(
    p: &TlsParams<T>,
    dist: &DiscreteWaitingDist<T>,
    mean_tau_target: T,
    total_time: T,
) -> Result<T> {
    let matched = matched_bimodal(dist, mean_tau_target)?;
    let p = p.with_m_count(measurement_count(total_time, mean_tau_target))?;
    let fixed = lambda_avg(&p, &WaitingTimeModel::Fixed { tau_bar: mean_tau_target })?;
    let annealed = lambda_avg(&p, &WaitingTimeModel::Annealed { dist: matched })?;
    Ok(fixed - annealed)
}

/// Annealed `phi` after scaling the support so that `2 E <tau> =
/// mean_tau_scale`, with `M = max(1, round(T / <tau>))`.
pub fn max_mean_heat_annealed<T: Real>(
    p: &TlsParams<T>,
    dist: &DiscreteWaitingDist<T>,
    mean_tau_scale: T,
    total_time: T,
) -> Result<T> {
    if !mean_tau_scale.is_finite() || mean_tau_scale <= T::zero() {
        return Err(Error::param("mean_tau_scale", format!("{mean_tau_scale} must be finite and positive")));
    }
    let scaled = dist.scaled(mean_tau_scale / (T::lit(2.0) * p.e * dist.mean()))?;
    let p = p.with_m_count(measurement_count(total_time, scaled.mean()))?;
    phi(&p, &WaitingTimeModel::Annealed { dist: scaled })
}

/// `d^n G / du^n` by the Leibniz rule on the factors of `f^T S g`.
pub fn nth_derivative_g<T: Real>(p: &TlsParams<T>, model: &WaitingTimeModel<T>, n: u32, u: C<T>) -> Result<C<T>> {
    if !(1..=4).contains(&n) {
        return Err(Error::param("n", format!("{n} is not in 1..=4")));
    }
    let s = chain_eigenvalue(p, model)?;
    let mut total = C::new(T::zero(), T::zero());
    for k in 0..=n {
        let coefficient = binomial::<T>(n as usize, k as usize);
        total += contract(f_derivative(p, u, k), s, g_derivative(p, u, n - k)) * coefficient;
    }
    Ok(total)
}
