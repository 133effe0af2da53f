//! Partial-fraction expansion for rational functions with simple poles.

use num_complex::Complex;

use super::poly::{min_root_separation, Polynomial};
use super::tf::{fmt_c, Domain, RationalTf};
use crate::error::{invalid, Error, Result};
use crate::scalar::{cabs, Real};

/// Default minimum separation below which two poles count as repeated.
pub const REPEATED_POLE_TOL: f64 = 1e-6;

/// `G(x) = sum_j r_j / (x - p_j) + k(x)` in the natural variable of the
/// source function.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleResidueForm<T> {
    pub terms: Vec<(Complex<T>, Complex<T>)>,
    /// Polynomial remainder, highest power first.
    pub direct: Polynomial<T>,
    pub domain: Domain<T>,
}

impl<T: Real> PoleResidueForm<T> {
    pub fn eval(&self, x: Complex<T>) -> Complex<T> {
        self.terms
            .iter()
            .fold(self.direct.eval_complex(x), |acc, (p, r)| {
                acc + *r / (x - *p)
            })
    }

    /// Residue attached to the pole closest to `pole`, if within `tol`.
    pub fn residue_at(&self, pole: Complex<T>, tol: T) -> Option<Complex<T>> {
        self.terms
            .iter()
            .map(|(p, r)| (cabs(*p - pole), *r))
            .filter(|(d, _)| *d <= tol)
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(_, r)| r)
    }
}

/// Expands with the default repeated-pole tolerance.
pub fn partial_fractions<T: Real>(tf: &RationalTf<T>) -> Result<PoleResidueForm<T>> {
    partial_fractions_with_tol(tf, T::lit(REPEATED_POLE_TOL))
}

/// Residues by `r_j = R(p_j) / D'(p_j)`, where `R` is the remainder of
/// `N / D`. Poles closer than `tol` are refused.
pub fn partial_fractions_with_tol<T: Real>(
    tf: &RationalTf<T>,
    tol: T,
) -> Result<PoleResidueForm<T>> {
    let (num, den) = tf.natural_pair();
    let den = den.trimmed();
    let num = num.trimmed();
    if den.degree() == 0 {
        let k = den.coeffs()[0];
        return Ok(PoleResidueForm {
            terms: Vec::new(),
            direct: num.scale(T::one() / k),
            domain: tf.domain(),
        });
    }
    let (direct, rem) = num.div_rem(&den)?;
    let poles = den.roots()?;
    if let Some((sep, at)) = min_root_separation(&poles) {
        if sep < tol {
            return Err(Error::RepeatedPole(fmt_c(at)));
        }
    }
    let dd = den.derivative();
    let mut terms = Vec::with_capacity(poles.len());
    for p in poles {
        let slope = dd.eval_complex(p);
        if cabs(slope) == T::zero() {
            return Err(invalid(format!("zero derivative at pole {}", fmt_c(p))));
        }
        terms.push((p, rem.eval_complex(p) / slope));
    }
    let direct = if direct.is_zero() {
        Polynomial::constant(T::zero())
    } else {
        direct
    };
    Ok(PoleResidueForm {
        terms,
        direct,
        domain: tf.domain(),
    })
}
