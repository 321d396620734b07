//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar (`f32` or `f64`).
///
/// The associated tolerances are the absolute thresholds used by input
/// validation; they are looser for `f32` because its round-off floor sits
/// well above the `f64` values.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Allowed asymmetry of a matrix accepted as Hermitian.
    const HERMITIAN_TOL: f64;
    /// Threshold for constructed-quantity invariants (orthonormality, traces).
    const INVARIANT_TOL: f64;
    /// Minimum eigenvalue gap before a spectrum is rejected as degenerate.
    const DEGENERACY_TOL: f64;
    /// Relative agreement required between the two moment routes.
    const MOMENT_TOL: f64;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts an index or count.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const HERMITIAN_TOL: f64 = 1e-10;
    const INVARIANT_TOL: f64 = 1e-12;
    const DEGENERACY_TOL: f64 = 1e-9;
    const MOMENT_TOL: f64 = 1e-6;
}

impl Real for f32 {
    const HERMITIAN_TOL: f64 = 1e-4;
    const INVARIANT_TOL: f64 = 1e-5;
    const DEGENERACY_TOL: f64 = 1e-4;
    const MOMENT_TOL: f64 = 5e-2;
}

/// `e^{i z}` for complex `z`.
#[inline]
pub fn expi<T: Real>(z: Complex<T>) -> Complex<T> {
    let damp = (-z.im).exp();
    Complex::new(damp * z.re.cos(), damp * z.re.sin())
}

/// `|z|^2`.
#[inline]
pub fn norm_sqr<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}

#[inline]
pub fn cplx<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// Binomial coefficient as a real number (exact for the small arguments used here).
pub fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_count(n - i) / T::from_count(i + 1);
    }
    acc
}

/// `base^exp` for a non-negative integer exponent, with `0^0 = 1`.
pub fn powi<T: Real>(base: T, exp: usize) -> T {
    let mut result = T::one();
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result *= b;
        }
        b = b * b;
        e >>= 1;
    }
    result
}

/// Compensated (Neumaier) summation accumulator.
#[derive(Debug, Clone, Copy)]
pub struct KahanSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> Default for KahanSum<T> {
    fn default() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }
}

impl<T: Real> KahanSum<T> {
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expi_matches_euler() {
        let z = Complex::new(0.3_f64, 0.2);
        let direct = (Complex::new(0.0, 1.0) * z).exp();
        let ours = expi(z);
        assert!((direct - ours).norm() < 1e-15);
    }

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial::<f64>(5, 2), 10.0);
        assert_eq!(binomial::<f64>(10, 0), 1.0);
        assert_eq!(binomial::<f64>(19, 9), 92378.0);
        assert_eq!(binomial::<f64>(3, 4), 0.0);
    }

    #[test]
    fn powi_edge_cases() {
        assert_eq!(powi(0.0_f64, 0), 1.0);
        assert_eq!(powi(-1.0_f64, 3), -1.0);
        assert!((powi(0.9_f64, 17) - 0.9_f64.powi(17)).abs() < 1e-15);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut acc = KahanSum::<f64>::default();
        acc.add(1.0);
        for _ in 0..10_000 {
            acc.add(1e-16);
        }
        assert!((acc.value() - (1.0 + 1e-12)).abs() < 1e-20);
    }
}
