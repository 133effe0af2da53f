//! Real-coefficient polynomials.
//!
//! A [`Polynomial`] stores its coefficients highest power first. Continuous
//! transfer functions use this directly in `s`. Discrete transfer functions
//! store coefficients in ascending powers of `z^-1`, which for numerator and
//! denominator padded to equal length is the same array read highest power
//! first in `z`, so the routines here serve both domains.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::{cabs, conj, creal, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    coeffs: Vec<T>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("polynomial needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial coefficients must be finite"));
        }
        Ok(Self { coeffs })
    }

    pub fn constant(c: T) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Nominal degree (storage length minus one, leading zeros included).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == T::zero())
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc + *c * *c)
            .sqrt()
    }

    /// Copy with exact leading zeros removed (keeps at least one coefficient).
    pub fn trimmed(&self) -> Self {
        let first = self
            .coeffs
            .iter()
            .position(|c| *c != T::zero())
            .unwrap_or(self.coeffs.len() - 1);
        Self {
            coeffs: self.coeffs[first..].to_vec(),
        }
    }

    /// Left-pads with zeros to `len` coefficients (no-op if already longer).
    pub fn padded(&self, len: usize) -> Self {
        if self.coeffs.len() >= len {
            return self.clone();
        }
        let mut coeffs = vec![T::zero(); len - self.coeffs.len()];
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    pub fn eval(&self, x: T) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, c| acc * x + *c)
    }

    pub fn eval_complex(&self, x: Complex<T>) -> Complex<T> {
        self.coeffs
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, c| {
                acc * x + creal(*c)
            })
    }

    pub fn derivative(&self) -> Self {
        let n = self.degree();
        if n == 0 {
            return Self::constant(T::zero());
        }
        let coeffs = self.coeffs[..n]
            .iter()
            .enumerate()
            .map(|(i, c)| *c * T::lit((n - i) as f64))
            .collect();
        Self { coeffs }
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| *c * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.len().max(other.len());
        let a = self.padded(len);
        let b = other.padded(len);
        Self {
            coeffs: a
                .coeffs
                .iter()
                .zip(&b.coeffs)
                .map(|(x, y)| *x + *y)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut coeffs = vec![T::zero(); self.len() + other.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += *a * *b;
            }
        }
        Self { coeffs }
    }

    /// Integer power by repeated multiplication.
    pub fn pow(&self, n: usize) -> Self {
        (0..n).fold(Self::constant(T::one()), |acc, _| acc.mul(self))
    }

    /// Polynomial long division: returns `(quotient, remainder)` with
    /// `deg(remainder) < deg(divisor)`.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self)> {
        let d = divisor.trimmed();
        if d.is_zero() {
            return Err(invalid("division by the zero polynomial"));
        }
        let num = self.trimmed();
        if num.len() < d.len() {
            return Ok((Self::constant(T::zero()), num));
        }
        let lead = d.coeffs[0];
        let mut rem = num.coeffs.clone();
        let q_len = num.len() - d.len() + 1;
        let mut quot = vec![T::zero(); q_len];
        for i in 0..q_len {
            let q = rem[i] / lead;
            quot[i] = q;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[i + j] -= q * *dc;
            }
        }
        let rem_coeffs = if d.len() == 1 {
            vec![T::zero()]
        } else {
            rem[q_len..].to_vec()
        };
        Ok((Self { coeffs: quot }, Self { coeffs: rem_coeffs }))
    }

    /// Monic polynomial with the given roots; imaginary parts of the
    /// expansion are dropped, so pass conjugate-closed root sets.
    pub fn from_roots(roots: &[Complex<T>]) -> Self {
        let mut acc = vec![creal(T::one())];
        for r in roots {
            let mut next = vec![creal(T::zero()); acc.len() + 1];
            for (i, c) in acc.iter().enumerate() {
                next[i] += *c;
                next[i + 1] -= *c * *r;
            }
            acc = next;
        }
        Self {
            coeffs: acc.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Roots via eigenvalues of the companion matrix, refined with a few
    /// Newton steps and made exactly conjugate-closed.
    pub fn roots(&self) -> Result<Vec<Complex<T>>> {
        let p = self.trimmed();
        if p.degree() == 0 {
            return Err(invalid("cannot take roots of a degree-0 polynomial"));
        }
        // zero roots from trailing zeros
        let nz = p
            .coeffs
            .iter()
            .rev()
            .take_while(|c| **c == T::zero())
            .count();
        let core = &p.coeffs[..p.len() - nz];
        let mut roots = vec![creal(T::zero()); nz];
        let n = core.len() - 1;
        if n > 0 {
            let lead = core[0];
            let mut comp = DMatrix::<T>::zeros(n, n);
            for j in 0..n {
                comp[(0, j)] = -core[j + 1] / lead;
            }
            for i in 1..n {
                comp[(i, i - 1)] = T::one();
            }
            let eig = comp.complex_eigenvalues();
            let core_poly = Self {
                coeffs: core.to_vec(),
            };
            let dpoly = core_poly.derivative();
            for z in eig.iter() {
                roots.push(newton_polish(&core_poly, &dpoly, *z));
            }
        }
        Ok(conjugate_close(roots))
    }
}

fn newton_polish<T: Real>(p: &Polynomial<T>, dp: &Polynomial<T>, z0: Complex<T>) -> Complex<T> {
    let mut z = z0;
    let mut fz = cabs(p.eval_complex(z));
    for _ in 0..4 {
        let d = dp.eval_complex(z);
        if cabs(d) == T::zero() {
            break;
        }
        let cand = z - p.eval_complex(z) / d;
        let fc = cabs(p.eval_complex(cand));
        if !(fc < fz) {
            break;
        }
        z = cand;
        fz = fc;
    }
    z
}

/// Pairs each root in the upper half plane with its nearest lower-half
/// partner and replaces both by an exact conjugate pair. Roots whose
/// imaginary part is negligible become exactly real.
pub fn conjugate_close<T: Real>(roots: Vec<Complex<T>>) -> Vec<Complex<T>> {
    let scale = roots.iter().fold(T::one(), |m, r| m.max(cabs(*r)));
    let real_tol = T::lit(1e-12) * scale;
    let mut out = Vec::with_capacity(roots.len());
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for r in roots {
        if r.im.abs() <= real_tol {
            out.push(creal(r.re));
        } else if r.im > T::zero() {
            upper.push(r);
        } else {
            lower.push(r);
        }
    }
    for u in upper {
        let target = conj(u);
        let best = lower
            .iter()
            .enumerate()
            .min_by(|a, b| {
                cabs(*a.1 - target)
                    .partial_cmp(&cabs(*b.1 - target))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                let l = lower.swap_remove(i);
                let avg = (u + conj(l)) * creal(T::lit(0.5));
                out.push(avg);
                out.push(conj(avg));
            }
            None => out.push(u),
        }
    }
    out.extend(lower);
    sort_roots(&mut out);
    out
}

/// Deterministic ordering: by real part, then imaginary part.
pub fn sort_roots<T: Real>(roots: &mut [Complex<T>]) {
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Smallest pairwise distance in a root set (`None` for fewer than two roots).
pub fn min_root_separation<T: Real>(roots: &[Complex<T>]) -> Option<(T, Complex<T>)> {
    let mut best: Option<(T, Complex<T>)> = None;
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            let d = cabs(roots[i] - roots[j]);
            if best.map_or(true, |(b, _)| d < b) {
                best = Some((d, roots[i]));
            }
        }
    }
    best
}
