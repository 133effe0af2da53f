//! Discrete-time LQR by fixed-point iteration of the Riccati recursion.

use nalgebra::DMatrix;

use crate::error::{dim, invalid, Error, Result};
use crate::lti::StateSpace;
use crate::scalar::{cabs, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct DlqrDesign<T: Real> {
    /// State-feedback gain, `u = -K x`.
    pub gain: DMatrix<T>,
    /// Stabilizing Riccati solution.
    pub riccati: DMatrix<T>,
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
    pub iterations: usize,
    /// Relative fixed-point residual `|step(P) - P| / |P|` at the returned `P`.
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DlqrOptions<T> {
    pub tol: T,
    pub max_iters: usize,
}

impl<T: Real> Default for DlqrOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            max_iters: 10_000,
        }
    }
}

/// One backward step `P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA`.
///
/// Evaluated in the equivalent form `Q + K'RK + (A - BK)' P (A - BK)`,
/// which avoids the subtraction of two large terms.
pub fn riccati_step<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let k = lqr_gain(a, b, r, p)?;
    let acl = a - b * &k;
    let next = q + k.transpose() * r * &k + acl.transpose() * p * acl;
    Ok(symmetrize(&next))
}

/// `K = (R + B'PB)^-1 B'PA`.
pub fn lqr_gain<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    r: &DMatrix<T>,
    p: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    let bt = b.transpose();
    let s = r + &bt * p * b;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned("R + B'PB is singular".into()))?;
    Ok(s_inv * bt * p * a)
}

pub(crate) fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Spectral radius of a square matrix.
pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> T {
    if m.nrows() == 0 {
        return T::zero();
    }
    m.complex_eigenvalues()
        .iter()
        .fold(T::zero(), |acc, z| acc.max(cabs(*z)))
}

/// Relative fixed-point residual `|step(P) - P| / |P|`.
fn fixed_point_residual<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p: &DMatrix<T>,
) -> Result<T> {
    let change = (riccati_step(a, b, q, r, p)? - p).norm();
    let scale = p.norm();
    Ok(if scale > T::zero() { change / scale } else { change })
}

/// Solves `P = F' P F + W` through its Kronecker form.
fn discrete_lyapunov<T: Real>(f: &DMatrix<T>, w: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = f.nrows();
    let ft = f.transpose();
    let kron = ft.kronecker(&ft);
    let lhs = DMatrix::<T>::identity(n * n, n * n) - kron;
    let rhs = nalgebra::DVector::from_column_slice(w.as_slice());
    let x = lhs.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, n, x.as_slice()))
}

/// Newton (Hewer) steps on the fixed-point iterate, kept while they lower
/// the residual.
fn polish<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    mut p: DMatrix<T>,
) -> Result<(DMatrix<T>, T)> {
    let mut res = fixed_point_residual(a, b, q, r, &p)?;
    for _ in 0..3 {
        let k = lqr_gain(a, b, r, &p)?;
        let acl = a - b * &k;
        if !(spectral_radius(&acl) < T::one()) {
            break;
        }
        let w = q + k.transpose() * r * &k;
        let Some(next) = discrete_lyapunov(&acl, &w) else {
            break;
        };
        let next = symmetrize(&next);
        let next_res = fixed_point_residual(a, b, q, r, &next)?;
        if !(next_res < res) {
            break;
        }
        p = next;
        res = next_res;
    }
    Ok((p, res))
}

/// Infinite-horizon discrete LQR starting the recursion from `P = Q`.
///
/// Once the iteration meets `tol`, a few Newton steps polish `P` to the
/// roundoff floor.
pub fn dlqr<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    opts: DlqrOptions<T>,
) -> Result<DlqrDesign<T>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) {
        return Err(dim("dlqr needs square A, matching B rows and n x n Q"));
    }
    let m = b.ncols();
    if r.shape() != (m, m) {
        return Err(dim(format!("R must be {m}x{m}")));
    }
    if symmetrize(r).cholesky().is_none() {
        return Err(invalid("R must be symmetric positive definite"));
    }
    let mut p = symmetrize(q);
    let mut residual = T::zero();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let next = riccati_step(a, b, q, r, &p)?;
        let scale = next.norm();
        let change = (&next - &p).norm();
        residual = if scale > T::zero() {
            change / scale
        } else {
            change
        };
        p = next;
        if residual < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            residual: residual.as_f64(),
        });
    }
    let (p, residual) = polish(a, b, q, r, p)?;
    let gain = lqr_gain(a, b, r, &p)?;
    let rho = spectral_radius(&(a - b * &gain));
    if !(rho < T::one()) {
        return Err(Error::IllConditioned(format!(
            "closed loop A - BK has spectral radius {rho} (system not stabilizable with these weights)"
        )));
    }
    Ok(DlqrDesign {
        gain,
        riccati: p,
        q: q.clone(),
        r: r.clone(),
        iterations,
        residual,
    })
}

/// DLQR on a loop realization with `Q = C'C`, `R = rho I`.
pub fn dlqr_for_loop<T: Real>(realization: &StateSpace<T>, rho: T) -> Result<DlqrDesign<T>> {
    dlqr_for_loop_with(realization, rho, DlqrOptions::default())
}

/// [`dlqr_for_loop`] with explicit iteration settings.
pub fn dlqr_for_loop_with<T: Real>(
    realization: &StateSpace<T>,
    rho: T,
    opts: DlqrOptions<T>,
) -> Result<DlqrDesign<T>> {
    if !realization.domain().is_discrete() {
        return Err(invalid("loop realization must be discrete"));
    }
    if !(rho > T::zero()) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    let q = realization.c().transpose() * realization.c();
    let m = realization.inputs();
    let r = DMatrix::<T>::identity(m, m) * rho;
    dlqr(realization.a(), realization.b(), &q, &r, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_golden_ratio() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let d = dlqr(&one, &one, &one, &one, DlqrOptions::default()).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((d.riccati[(0, 0)] - phi).abs() < 1e-10);
        assert!((d.gain[(0, 0)] - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_dynamics_need_no_control() {
        let a = DMatrix::<f64>::zeros(2, 2);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_element(1, 1, 1.0);
        let d = dlqr(&a, &b, &q, &r, DlqrOptions::default()).unwrap();
        assert!(d.gain.iter().all(|k| *k == 0.0));
    }

    #[test]
    fn rejects_indefinite_r() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let r = DMatrix::from_element(1, 1, -1.0);
        assert!(dlqr(&one, &one, &one, &r, DlqrOptions::default()).is_err());
    }

    #[test]
    fn f32_scalar_case() {
        let one = DMatrix::from_element(1, 1, 1.0f32);
        let d = dlqr(
            &one,
            &one,
            &one,
            &one,
            DlqrOptions {
                tol: 1e-6,
                max_iters: 1000,
            },
        )
        .unwrap();
        assert!((d.riccati[(0, 0)] - 1.618034).abs() < 1e-5);
    }

    #[test]
    fn unstabilizable_reported() {
        // unstable mode not reachable from the input
        let a = DMatrix::from_row_slice(2, 2, &[1.2, 0.0, 0.0, 0.5]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = DMatrix::from_element(1, 1, 1.0);
        assert!(dlqr(&a, &b, &q, &r, DlqrOptions::default()).is_err());
    }
}
