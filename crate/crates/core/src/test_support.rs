//! Fixtures shared by unit tests.

use num_complex::Complex;
use rand::Rng;

use crate::disorder::{DiscreteWaitingDist, WaitingTimeModel};
use crate::heat::{ProtocolConfig, Schedule};
use crate::quantum::{ComplexMatrix, ComplexVector, DensityMatrix, HermitianOperator, MeasurementBasis};

pub fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

pub fn random_unitary(d: usize, rng: &mut impl Rng) -> ComplexMatrix<f64> {
    let raw = ComplexMatrix::<f64>::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    raw.qr().q()
}

/// Hermitian operator with eigenvalues spread around `0..d` (gaps above 0.2).
pub fn random_hamiltonian(d: usize, rng: &mut impl Rng) -> HermitianOperator<f64> {
    let u = random_unitary(d, rng);
    let evals: Vec<f64> = (0..d).map(|i| i as f64 - (d as f64 - 1.0) / 2.0 + rng.random::<f64>() * 0.6 - 0.3).collect();
    let diag = ComplexVector::from_iterator(d, evals.iter().map(|&e| c(e, 0.0)));
    let m = &u * ComplexMatrix::from_diagonal(&diag) * u.adjoint();
    crate::quantum::spectral_decompose(&m).unwrap()
}

pub fn random_basis(d: usize, rng: &mut impl Rng) -> MeasurementBasis<f64> {
    MeasurementBasis::from_vectors(random_unitary(d, rng), (0..d).map(|k| k as f64).collect()).unwrap()
}

/// Full-rank state with coherences.
pub fn random_state(d: usize, rng: &mut impl Rng) -> DensityMatrix<f64> {
    let u = random_unitary(d, rng);
    let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let diag = ComplexVector::from_iterator(d, raw.iter().map(|&p| c(p / total, 0.0)));
    let m = &u * ComplexMatrix::from_diagonal(&diag) * u.adjoint();
    let m = (&m + m.adjoint()) * c(0.5, 0.0);
    DensityMatrix::new(m).unwrap()
}

pub fn random_dist(rng: &mut impl Rng, atoms: usize) -> DiscreteWaitingDist<f64> {
    let values: Vec<f64> = (0..atoms).map(|j| 0.1 + j as f64 * 0.9 + rng.random::<f64>() * 0.5).collect();
    let raw: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = raw.iter().sum();
    DiscreteWaitingDist::new(values, raw.iter().map(|p| p / total).collect()).unwrap()
}

pub fn random_model(kind: usize, rng: &mut impl Rng) -> WaitingTimeModel<f64> {
    match kind % 3 {
        0 => WaitingTimeModel::fixed(0.2 + rng.random::<f64>() * 2.0).unwrap(),
        1 => WaitingTimeModel::Quenched { dist: random_dist(rng, 2) },
        _ => WaitingTimeModel::Annealed { dist: random_dist(rng, 2) },
    }
}

/// `H = diag(-E, E)`; `|E->` is index 0 and `|E+>` index 1.
pub fn tls_hamiltonian(e: f64) -> HermitianOperator<f64> {
    HermitianOperator::from_diagonal(&[-e, e]).unwrap()
}

/// `alpha_1 = a|E+> - b|E->`, `alpha_2 = b|E+> + a|E->` with `a^2 = a2`.
pub fn tls_basis(a2: f64) -> MeasurementBasis<f64> {
    let a = a2.sqrt();
    let b = (1.0 - a2).sqrt();
    let v = ComplexMatrix::from_row_slice(2, 2, &[c(-b, 0.0), c(a, 0.0), c(a, 0.0), c(b, 0.0)]);
    MeasurementBasis::from_vectors(v, vec![1.0, -1.0]).unwrap()
}

/// Populations `(c1, 1 - c1)` on `(|E+>, |E->)`.
pub fn tls_state(h: &HermitianOperator<f64>, c1: f64) -> DensityMatrix<f64> {
    DensityMatrix::diagonal_in(h, &[1.0 - c1, c1]).unwrap()
}

pub fn tls_config(e: f64, a2: f64, c1: f64, m: usize, model: WaitingTimeModel<f64>) -> ProtocolConfig<f64> {
    let h = tls_hamiltonian(e);
    let rho = tls_state(&h, c1);
    ProtocolConfig::new(h, tls_basis(a2), rho, Schedule::Measurements(m), model, 1.0, 7).unwrap()
}

pub fn thermal_tls_config(e: f64, a2: f64, beta: f64, m: usize, model: WaitingTimeModel<f64>) -> ProtocolConfig<f64> {
    let h = tls_hamiltonian(e);
    let rho = DensityMatrix::thermal(&h, beta);
    ProtocolConfig::new(h, tls_basis(a2), rho, Schedule::Measurements(m), model, beta, 7).unwrap()
}
