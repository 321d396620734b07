//! Central finite differences with one Richardson extrapolation step, for
//! derivatives of orders 1 to 4 of complex-valued functions of a real variable.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cplx, Real};

/// Step used for derivative orders 1 to 3.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Step for order-4 stencils, scaled by the spectral width `w` of the
/// underlying generator (`q` values range over `[-w, w]`).
///
/// With `h = 1e-3` the fourth-order stencil loses about `16 eps / h^4 ~ 2e-3`
/// to round-off, so the step is widened to balance truncation and round-off.
pub fn fourth_order_step(width: f64) -> f64 {
    0.04 / width.max(1.0)
}

/// Recommended step for a derivative of `order`, given the spectral width.
pub fn step_for_order(order: u32, width: f64) -> f64 {
    if order >= 4 {
        fourth_order_step(width)
    } else {
        DEFAULT_STEP
    }
}

fn stencil<T: Real>(
    f: &mut impl FnMut(T) -> Result<Complex<T>>,
    order: u32,
    h: T,
) -> Result<Complex<T>> {
    let two = T::lit(2.0);
    Ok(match order {
        1 => (f(h)? - f(-h)?) / cplx(two * h),
        2 => (f(h)? - f(T::zero())? * cplx(two) + f(-h)?) / cplx(h * h),
        3 => {
            (f(two * h)? - f(h)? * cplx(two) + f(-h)? * cplx(two) - f(-two * h)?)
                / cplx(two * h * h * h)
        }
        4 => {
            (f(two * h)? - f(h)? * cplx(T::lit(4.0)) + f(T::zero())? * cplx(T::lit(6.0))
                - f(-h)? * cplx(T::lit(4.0))
                + f(-two * h)?)
                / cplx(h * h * h * h)
        }
        _ => return Err(Error::param("order", format!("{order} is not in 1..=4"))),
    })
}

/// `d^n f / du^n` at `u = 0` by central differences at steps `h` and `2h`
/// combined as `(4 D(h) - D(2h)) / 3`.
pub fn derivative_at_zero<T: Real>(
    mut f: impl FnMut(T) -> Result<Complex<T>>,
    order: u32,
    h: T,
) -> Result<Complex<T>> {
    let fine = stencil(&mut f, order, h)?;
    let coarse = stencil(&mut f, order, h * T::lit(2.0))?;
    Ok((fine * cplx(T::lit(4.0)) - coarse) / cplx(T::lit(3.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_exponential() {
        // f(u) = e^{i a u}: f^(n)(0) = (i a)^n
        let a = 1.7_f64;
        for order in 1..=4u32 {
            let h = step_for_order(order, a);
            let d = derivative_at_zero(|u: f64| Ok(Complex::new(0.0, a * u).exp()), order, h).unwrap();
            let exact = Complex::new(0.0, a).powu(order);
            assert!((d - exact).norm() < 1e-6 * exact.norm().max(1.0), "order {order}: {d} vs {exact}");
        }
    }

    #[test]
    fn rejects_unsupported_order() {
        assert!(derivative_at_zero(|_u: f64| Ok(Complex::new(1.0, 0.0)), 5, 1e-3).is_err());
    }
}
