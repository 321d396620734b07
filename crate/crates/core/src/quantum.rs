//! Dense finite-dimensional operator algebra: spectral decompositions,
//! propagators, projective measurement bases and the measurement-sequence
//! operator `V(k, tau) = Pi_{k_M} U(tau_M) ... Pi_{k_1} U(tau_1)`.
//!
//! Everything here is O(d^3) dense linear algebra and is intended for
//! small systems (d <= 16).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cplx, expi, norm_sqr, Real};

pub type ComplexMatrix<T> = DMatrix<Complex<T>>;
pub type ComplexVector<T> = DVector<Complex<T>>;

fn check_finite<T: Real>(m: &ComplexMatrix<T>) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows().max(1), found: m.ncols() });
    }
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Largest entry of `|m - m^dagger|`.
pub fn hermiticity_residual<T: Real>(m: &ComplexMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = m[(i, j)] - m[(j, i)].conj();
            worst = worst.max(norm_sqr(d).sqrt());
        }
    }
    worst
}

/// Frobenius norm of a complex matrix.
pub fn frobenius<T: Real>(m: &ComplexMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + norm_sqr(*z)).sqrt()
}

/// Rotates `v` so that its largest-magnitude component is real and positive.
/// Ties (within a relative 1e-8) resolve to the lowest index.
fn fix_phase<T: Real>(v: &mut ComplexVector<T>) {
    let max = v.iter().fold(T::zero(), |acc, z| acc.max(norm_sqr(*z)));
    if max == T::zero() {
        return;
    }
    let cutoff = max * (T::one() - T::lit(1e-8));
    let pivot = v.iter().position(|z| norm_sqr(*z) >= cutoff).unwrap_or(0);
    let z = v[pivot];
    let phase = z.conj() / cplx(norm_sqr(z).sqrt());
    for c in v.iter_mut() {
        *c *= phase;
    }
}

/// A Hermitian operator together with its (non-degenerate) spectral
/// decomposition; eigenvalues are stored ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator<T: Real> {
    matrix: ComplexMatrix<T>,
    eigenvalues: Vec<T>,
    eigenvectors: ComplexMatrix<T>,
}

/// Diagonalizes a Hermitian matrix.
///
/// Eigenvectors are phase-fixed (largest component real-positive) so the
/// result is deterministic. Spectra with a gap below `T::DEGENERACY_TOL` are
/// rejected.
pub fn spectral_decompose<T: Real>(m: &ComplexMatrix<T>) -> Result<HermitianOperator<T>> {
    check_finite(m)?;
    let residual = hermiticity_residual(m);
    if residual > T::lit(T::HERMITIAN_TOL) {
        return Err(Error::NotHermitian { residual: residual.to_f64_lossy() });
    }
    let sym = (m + m.adjoint()) * cplx(T::lit(0.5));
    let eig = SymmetricEigen::new(sym.clone());

    let d = m.nrows();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).expect("finite eigenvalues")
    });

    let eigenvalues: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    for (index, pair) in eigenvalues.windows(2).enumerate() {
        let gap = pair[1] - pair[0];
        if gap < T::lit(T::DEGENERACY_TOL) {
            return Err(Error::DegenerateSpectrum { index, gap: gap.to_f64_lossy() });
        }
    }

    let mut eigenvectors = ComplexMatrix::<T>::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        let mut v: ComplexVector<T> = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut v);
        eigenvectors.set_column(col, &v);
    }

    Ok(HermitianOperator { matrix: sym, eigenvalues, eigenvectors })
}

impl<T: Real> HermitianOperator<T> {
    /// Operator with the given real diagonal in the computational basis.
    pub fn from_diagonal(values: &[T]) -> Result<Self> {
        let diag = ComplexVector::<T>::from_iterator(values.len(), values.iter().map(|&v| cplx(v)));
        spectral_decompose(&ComplexMatrix::from_diagonal(&diag))
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.eigenvalues
    }

    /// Columns are the orthonormal eigenvectors, in eigenvalue order.
    pub fn eigenvectors(&self) -> &ComplexMatrix<T> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, n: usize) -> ComplexVector<T> {
        self.eigenvectors.column(n).into_owned()
    }

    /// `|E_n><E_n|`.
    pub fn eigenprojector(&self, n: usize) -> ComplexMatrix<T> {
        let v = self.eigenvector(n);
        &v * v.adjoint()
    }

    /// `V diag(f(E_n)) V^dagger`.
    pub fn map_spectrum(&self, f: impl Fn(T) -> Complex<T>) -> ComplexMatrix<T> {
        let d = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (n, &e) in self.eigenvalues.iter().enumerate() {
            let w = f(e);
            for r in 0..d {
                scaled[(r, n)] *= w;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }

    /// Reconstruction residual `||V diag(E) V^dagger - H||_F`.
    pub fn reconstruction_residual(&self) -> T {
        frobenius(&(self.map_spectrum(cplx) - &self.matrix))
    }
}

/// `U(t) = e^{-iHt}`.
pub fn propagator<T: Real>(h: &HermitianOperator<T>, t: T) -> ComplexMatrix<T> {
    h.map_spectrum(|e| expi(cplx(-e * t)))
}

/// `e^{iuH}` for complex `u`; unitary for real `u`, positive-definite for `u = i beta`.
pub fn exp_iu_h<T: Real>(h: &HermitianOperator<T>, u: Complex<T>) -> ComplexMatrix<T> {
    h.map_spectrum(|e| expi(u * cplx(e)))
}

/// Complete set of orthogonal rank-1 projectors `Pi_k = |alpha_k><alpha_k|`
/// with associated outcome values `o_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBasis<T: Real> {
    vectors: ComplexMatrix<T>,
    projectors: Vec<ComplexMatrix<T>>,
    outcomes: Vec<T>,
}

impl<T: Real> MeasurementBasis<T> {
    /// Builds the basis from orthonormal columns `|alpha_k>`.
    pub fn from_vectors(vectors: ComplexMatrix<T>, outcomes: Vec<T>) -> Result<Self> {
        check_finite(&vectors)?;
        let d = vectors.nrows();
        if outcomes.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: outcomes.len() });
        }
        let gram = vectors.adjoint() * &vectors;
        let err = frobenius(&(gram - ComplexMatrix::<T>::identity(d, d)));
        if err > T::lit(T::HERMITIAN_TOL) {
            return Err(Error::InvalidBasis(format!(
                "basis vectors are not orthonormal (residual {err})"
            )));
        }
        let projectors = (0..d)
            .map(|k| {
                let v = vectors.column(k);
                v * v.adjoint()
            })
            .collect();
        Ok(Self { vectors, projectors, outcomes })
    }

    /// Builds the basis from explicit projectors, checking Hermiticity,
    /// idempotence, unit trace, mutual orthogonality and completeness.
    pub fn from_projectors(projectors: Vec<ComplexMatrix<T>>, outcomes: Vec<T>) -> Result<Self> {
        let Some(first) = projectors.first() else {
            return Err(Error::InvalidBasis("no projectors given".into()));
        };
        let d = first.nrows();
        if projectors.len() != d {
            return Err(Error::InvalidBasis(format!(
                "{} rank-1 projectors cannot resolve the identity in dimension {d}",
                projectors.len()
            )));
        }
        if outcomes.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: outcomes.len() });
        }
        let tol = T::lit(T::HERMITIAN_TOL);
        let mut total = ComplexMatrix::<T>::zeros(d, d);
        for (k, p) in projectors.iter().enumerate() {
            check_finite(p)?;
            if p.nrows() != d {
                return Err(Error::DimensionMismatch { expected: d, found: p.nrows() });
            }
            if hermiticity_residual(p) > tol {
                return Err(Error::InvalidBasis(format!("projector {k} is not Hermitian")));
            }
            if frobenius(&(p * p - p)) > tol {
                return Err(Error::InvalidBasis(format!("projector {k} is not idempotent")));
            }
            if (p.trace().re - T::one()).abs() > tol {
                return Err(Error::InvalidBasis(format!("projector {k} does not have unit trace")));
            }
            for (l, q) in projectors.iter().enumerate().skip(k + 1) {
                if frobenius(&(p * q)) > tol {
                    return Err(Error::InvalidBasis(format!(
                        "projectors {k} and {l} are not orthogonal"
                    )));
                }
            }
            total += p;
        }
        if frobenius(&(total - ComplexMatrix::<T>::identity(d, d))) > tol {
            return Err(Error::InvalidBasis("projectors do not sum to the identity".into()));
        }

        // Recover |alpha_k> from the column of largest norm.
        let mut vectors = ComplexMatrix::<T>::zeros(d, d);
        for (k, p) in projectors.iter().enumerate() {
            let col = (0..d)
                .max_by(|&a, &b| {
                    p[(a, a)].re.partial_cmp(&p[(b, b)].re).expect("finite diagonal")
                })
                .expect("non-empty");
            let mut v: ComplexVector<T> = p.column(col).into_owned();
            let norm = v.iter().fold(T::zero(), |acc, z| acc + norm_sqr(*z)).sqrt();
            v /= cplx(norm);
            fix_phase(&mut v);
            vectors.set_column(k, &v);
        }
        Ok(Self { vectors, projectors, outcomes })
    }

    /// The eigenbasis of `h`; outcomes are its eigenvalues.
    pub fn energy_basis(h: &HermitianOperator<T>) -> Self {
        Self::of_observable(h)
    }

    /// The eigenbasis of a monitored observable `O = sum_k o_k Pi_k`.
    pub fn of_observable(o: &HermitianOperator<T>) -> Self {
        let vectors = o.eigenvectors().clone();
        let projectors = (0..o.dim()).map(|k| o.eigenprojector(k)).collect();
        Self { vectors, projectors, outcomes: o.eigenvalues().to_vec() }
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> &ComplexMatrix<T> {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> ComplexVector<T> {
        self.vectors.column(k).into_owned()
    }

    pub fn projector(&self, k: usize) -> &ComplexMatrix<T> {
        &self.projectors[k]
    }

    pub fn projectors(&self) -> &[ComplexMatrix<T>] {
        &self.projectors
    }

    pub fn outcomes(&self) -> &[T] {
        &self.outcomes
    }
}

/// A validated density matrix (Hermitian, unit trace, positive semi-definite).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    matrix: ComplexMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self> {
        check_finite(&matrix)?;
        let tol = T::lit(T::INVARIANT_TOL);
        let residual = hermiticity_residual(&matrix);
        if residual > tol {
            return Err(Error::InvalidState(format!("not Hermitian (residual {residual})")));
        }
        let trace = matrix.trace().re;
        if (trace - T::one()).abs() > tol {
            return Err(Error::InvalidState(format!("trace is {trace}, expected 1")));
        }
        let sym = (&matrix + matrix.adjoint()) * cplx(T::lit(0.5));
        let lowest = sym
            .symmetric_eigenvalues()
            .iter()
            .fold(T::max_value().expect("bounded real"), |acc, &e| acc.min(e));
        if lowest < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {lowest}")));
        }
        Ok(Self { matrix: sym })
    }

    /// `|psi><psi|` for a (not necessarily normalized) non-zero vector.
    pub fn pure(psi: &ComplexVector<T>) -> Result<Self> {
        let norm = psi.iter().fold(T::zero(), |acc, z| acc + norm_sqr(*z)).sqrt();
        if norm == T::zero() || !norm.is_finite() {
            return Err(Error::InvalidState("state vector has zero or non-finite norm".into()));
        }
        let v = psi / cplx(norm);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Self {
        let m = ComplexMatrix::<T>::identity(d, d) / cplx(T::from_count(d));
        Self { matrix: m }
    }

    /// Gibbs state `e^{-beta H} / Z`.
    pub fn thermal(h: &HermitianOperator<T>, beta: T) -> Self {
        let e0 = h.eigenvalues()[0];
        // Shift by the ground energy to keep the exponentials bounded.
        let weights: Vec<T> = h.eigenvalues().iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let z = weights.iter().fold(T::zero(), |acc, &w| acc + w);
        let populations: Vec<T> = weights.iter().map(|&w| w / z).collect();
        Self::diagonal_in(h, &populations).expect("Gibbs weights form a valid distribution")
    }

    /// `sum_n p_n |E_n><E_n|` in the eigenbasis of `h`.
    pub fn diagonal_in(h: &HermitianOperator<T>, populations: &[T]) -> Result<Self> {
        if populations.len() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: populations.len() });
        }
        let diag = ComplexVector::<T>::from_iterator(
            populations.len(),
            populations.iter().map(|&p| cplx(p)),
        );
        let v = h.eigenvectors();
        Self::new(v * ComplexMatrix::from_diagonal(&diag) * v.adjoint())
    }

    /// `sum_n Pi_n rho Pi_n`: the state after a non-selective energy measurement.
    pub fn dephased_in(&self, h: &HermitianOperator<T>) -> Self {
        let probs = first_measurement_probs(self, h).expect("dimensions checked by caller");
        Self::diagonal_in(h, &probs).expect("populations of a valid state")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }
}

/// Outcome indices `k_1..k_M` and waiting times `tau_1..tau_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSequence<T: Real> {
    ks: Vec<usize>,
    taus: Vec<T>,
}

impl<T: Real> OutcomeSequence<T> {
    pub fn new(ks: Vec<usize>, taus: Vec<T>) -> Result<Self> {
        if ks.len() != taus.len() {
            return Err(Error::InvalidSequence(format!(
                "{} outcomes but {} waiting times",
                ks.len(),
                taus.len()
            )));
        }
        if let Some(t) = taus.iter().find(|t| !t.is_finite() || **t < T::zero()) {
            return Err(Error::InvalidSequence(format!("waiting time {t} is not a finite non-negative value")));
        }
        Ok(Self { ks, taus })
    }

    pub fn ks(&self) -> &[usize] {
        &self.ks
    }

    pub fn taus(&self) -> &[T] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    /// Total protocol time `sum_i tau_i`.
    pub fn total_time(&self) -> T {
        self.taus.iter().fold(T::zero(), |acc, &t| acc + t)
    }

    fn validate(&self, basis: &MeasurementBasis<T>) -> Result<()> {
        match self.ks.iter().find(|&&k| k >= basis.len()) {
            Some(k) => Err(Error::InvalidSequence(format!(
                "outcome index {k} out of range for a basis of size {}",
                basis.len()
            ))),
            None => Ok(()),
        }
    }
}

/// `V(k, tau) = Pi_{k_M} U(tau_M) ... Pi_{k_1} U(tau_1)`; the rightmost factor acts first.
pub fn sequence_superop<T: Real>(
    basis: &MeasurementBasis<T>,
    h: &HermitianOperator<T>,
    seq: &OutcomeSequence<T>,
) -> Result<ComplexMatrix<T>> {
    if basis.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: basis.dim() });
    }
    seq.validate(basis)?;
    let d = h.dim();
    let mut v = ComplexMatrix::<T>::identity(d, d);
    for (&k, &tau) in seq.ks.iter().zip(&seq.taus) {
        v = basis.projector(k) * propagator(h, tau) * v;
    }
    Ok(v)
}

/// `p_{m|n}(k, tau) = |<E_m| V(k, tau) |E_n>|^2`.
pub fn conditioned_transition_prob<T: Real>(
    basis: &MeasurementBasis<T>,
    h: &HermitianOperator<T>,
    seq: &OutcomeSequence<T>,
    n: usize,
    m: usize,
) -> Result<T> {
    let d = h.dim();
    if n >= d || m >= d {
        return Err(Error::param("n/m", format!("energy indices ({n}, {m}) out of range for dimension {d}")));
    }
    let v = sequence_superop(basis, h, seq)?;
    let em = h.eigenvector(m);
    let en = h.eigenvector(n);
    let amp = (em.adjoint() * v * en)[(0, 0)];
    Ok(norm_sqr(amp))
}

/// Outcome probabilities `p_n = <E_n| rho |E_n>` of the initial energy measurement.
pub fn first_measurement_probs<T: Real>(rho0: &DensityMatrix<T>, h: &HermitianOperator<T>) -> Result<Vec<T>> {
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: rho0.dim() });
    }
    let v = h.eigenvectors();
    let rotated = v.adjoint() * rho0.matrix() * v;
    let raw: Vec<T> = (0..h.dim()).map(|n| rotated[(n, n)].re.max(T::zero())).collect();
    let total = raw.iter().fold(T::zero(), |acc, &p| acc + p);
    Ok(raw.into_iter().map(|p| p / total).collect())
}
