//! Rational transfer functions and the bilinear (Tustin) domain maps.

use num_complex::Complex;

use super::poly::Polynomial;
use crate::error::{invalid, Error, Result};
use crate::scalar::{cabs, creal, Real};

/// Time domain of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    Continuous,
    Discrete { sample_time: T },
}

impl<T: Real> Domain<T> {
    pub fn discrete(sample_time: T) -> Result<Self> {
        if !(sample_time > T::zero()) || !sample_time.is_finite() {
            return Err(invalid(format!(
                "sample time must be positive, got {sample_time}"
            )));
        }
        Ok(Domain::Discrete { sample_time })
    }

    pub fn sample_time(&self) -> Option<T> {
        match self {
            Domain::Continuous => None,
            Domain::Discrete { sample_time } => Some(*sample_time),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Domain::Discrete { .. })
    }
}

/// Ratio of two real polynomials.
///
/// * continuous: coefficients in descending powers of `s`;
/// * discrete: coefficients in ascending powers of `z^-1`, with the
///   denominator normalized so its first coefficient is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTf<T> {
    num: Polynomial<T>,
    den: Polynomial<T>,
    domain: Domain<T>,
}

impl<T: Real> RationalTf<T> {
    pub fn continuous(num: Polynomial<T>, den: Polynomial<T>) -> Result<Self> {
        if den.is_zero() {
            return Err(invalid("denominator is identically zero"));
        }
        Ok(Self {
            num,
            den,
            domain: Domain::Continuous,
        })
    }

    /// Builds a discrete transfer function, dividing through by the
    /// constant denominator coefficient.
    pub fn discrete(num: Polynomial<T>, den: Polynomial<T>, sample_time: T) -> Result<Self> {
        let domain = Domain::discrete(sample_time)?;
        let d0 = den.coeffs()[0];
        if d0 == T::zero() {
            return Err(invalid(
                "discrete denominator must have a nonzero z^0 coefficient",
            ));
        }
        let inv = T::one() / d0;
        let mut den = den.scale(inv);
        let mut dc = den.clone().into_coeffs();
        dc[0] = T::one();
        den = Polynomial::new(dc)?;
        Ok(Self {
            num: num.scale(inv),
            den,
            domain,
        })
    }

    /// Constructor from raw coefficient slices in the domain's convention.
    pub fn from_coeffs(num: &[T], den: &[T], domain: Domain<T>) -> Result<Self> {
        let num = Polynomial::new(num.to_vec())?;
        let den = Polynomial::new(den.to_vec())?;
        match domain {
            Domain::Continuous => Self::continuous(num, den),
            Domain::Discrete { sample_time } => Self::discrete(num, den, sample_time),
        }
    }

    pub fn num(&self) -> &Polynomial<T> {
        &self.num
    }

    pub fn den(&self) -> &Polynomial<T> {
        &self.den
    }

    pub fn domain(&self) -> Domain<T> {
        self.domain
    }

    /// Numerator and denominator as polynomials in the natural variable
    /// (`s` or `z`), highest power first, padded to a common length.
    pub(crate) fn natural_pair(&self) -> (Polynomial<T>, Polynomial<T>) {
        match self.domain {
            Domain::Continuous => (self.num.clone(), self.den.clone()),
            Domain::Discrete { .. } => {
                let mut num = self.num.clone().into_coeffs();
                let mut den = self.den.clone().into_coeffs();
                let len = num.len().max(den.len());
                num.resize(len, T::zero());
                den.resize(len, T::zero());
                (
                    Polynomial::new(num).expect("nonempty"),
                    Polynomial::new(den).expect("nonempty"),
                )
            }
        }
    }

    /// Evaluates at a point of the natural variable (`s` or `z`).
    pub fn eval(&self, x: Complex<T>) -> Complex<T> {
        let (n, d) = self.natural_pair();
        n.eval_complex(x) / d.eval_complex(x)
    }

    /// Poles in the natural variable.
    pub fn poles(&self) -> Result<Vec<Complex<T>>> {
        let (_, d) = self.natural_pair();
        let d = d.trimmed();
        if d.degree() == 0 {
            return Ok(Vec::new());
        }
        d.roots()
    }
}

/// Maps a continuous pole to the discrete plane: `z = (1 + sT/2)/(1 - sT/2)`.
pub fn bilinear_pole_c2d<T: Real>(s: Complex<T>, sample_time: T) -> Complex<T> {
    let h = creal(sample_time * T::lit(0.5));
    (creal(T::one()) + s * h) / (creal(T::one()) - s * h)
}

/// Maps a discrete pole to the continuous plane: `s = (2/T)(z - 1)/(z + 1)`.
pub fn bilinear_pole_d2c<T: Real>(z: Complex<T>, sample_time: T) -> Result<Complex<T>> {
    let one = creal(T::one());
    let denom = z + one;
    if cabs(denom) <= T::default_epsilon() * T::lit(16.0) {
        return Err(Error::IllConditioned(format!(
            "pole {} maps to infinity under the bilinear transform (z = -1)",
            fmt_c(z)
        )));
    }
    Ok(creal(T::lit(2.0) / sample_time) * (z - one) / denom)
}

pub(crate) fn fmt_c<T: Real>(z: Complex<T>) -> String {
    if z.im >= T::zero() {
        format!("{}+{}i", z.re, z.im)
    } else {
        format!("{}{}i", z.re, z.im)
    }
}

/// Continuous to discrete by `s = 2(1 - z^-1) / (T (1 + z^-1))`.
///
/// Both polynomials are multiplied through by `(1 + z^-1)^N` with `N` the
/// larger of the two degrees, so the degree is preserved.
pub fn tustin_c2d<T: Real>(tf: &RationalTf<T>, sample_time: T) -> Result<RationalTf<T>> {
    if tf.domain().is_discrete() {
        return Err(invalid("tustin_c2d expects a continuous transfer function"));
    }
    Domain::discrete(sample_time)?;
    let num = tf.num().trimmed();
    let den = tf.den().trimmed();
    let order = num.degree().max(den.degree());
    let k = T::lit(2.0) / sample_time;
    let minus = Polynomial::new(vec![-T::one(), T::one()])?; // 1 - w, w = z^-1, highest first
    let plus = Polynomial::new(vec![T::one(), T::one()])?;
    let substitute = |p: &Polynomial<T>| -> Vec<T> {
        let deg = p.degree();
        let mut acc = Polynomial::constant(T::zero());
        for (idx, c) in p.coeffs().iter().enumerate() {
            let power = deg - idx;
            let term = minus
                .pow(power)
                .mul(&plus.pow(order - power))
                .scale(*c * k.powi(power as i32));
            acc = acc.add(&term);
        }
        // highest power of w first -> ascending w
        let mut v = acc.padded(order + 1).into_coeffs();
        v.reverse();
        v
    };
    let n = substitute(&num);
    let d = substitute(&den);
    // d[0] is the continuous denominator at s = 2/T
    let scale = den
        .coeffs()
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (idx, c)| {
            acc + c.abs() * k.powi((den.degree() - idx) as i32)
        });
    if d[0].abs() <= scale * T::lit(1e-12) {
        return Err(Error::IllConditioned(format!(
            "bilinear substitution gives a vanishing leading denominator coefficient \
             (continuous pole at s = 2/T = {})",
            k
        )));
    }
    RationalTf::discrete(Polynomial::new(n)?, Polynomial::new(d)?, sample_time)
}

/// Discrete to continuous by `z^-1 = (2 - sT)/(2 + sT)`, the exact inverse of
/// [`tustin_c2d`]. The result is normalized to a monic denominator.
pub fn tustin_d2c<T: Real>(tf: &RationalTf<T>) -> Result<RationalTf<T>> {
    let ts = tf
        .domain()
        .sample_time()
        .ok_or_else(|| invalid("tustin_d2c expects a discrete transfer function"))?;
    let len = tf.num().len().max(tf.den().len());
    let order = len - 1;
    let minus = Polynomial::new(vec![-ts, T::lit(2.0)])?; // 2 - sT, highest first
    let plus = Polynomial::new(vec![ts, T::lit(2.0)])?; // 2 + sT
    let substitute = |p: &Polynomial<T>| -> Polynomial<T> {
        let mut acc = Polynomial::constant(T::zero());
        for (j, c) in p.coeffs().iter().enumerate() {
            let term = minus.pow(j).mul(&plus.pow(order - j)).scale(*c);
            acc = acc.add(&term);
        }
        acc.padded(order + 1)
    };
    let n = substitute(tf.num());
    let d = substitute(tf.den());
    let lead = d.coeffs()[0];
    // lead is T^n times the discrete denominator at z = -1
    let at_minus_one = tf
        .den()
        .coeffs()
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (j, c)| if j % 2 == 0 { acc + *c } else { acc - *c });
    let scale = tf.den().coeffs().iter().fold(T::zero(), |acc, c| acc + c.abs());
    if at_minus_one.abs() <= scale * T::lit(1e-12) {
        let culprit = tf
            .poles()?
            .into_iter()
            .min_by(|a, b| {
                cabs(*a + creal(T::one()))
                    .partial_cmp(&cabs(*b + creal(T::one())))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or_else(|| creal(-T::one()));
        return Err(Error::IllConditioned(format!(
            "pole {} at z = -1 maps to infinity under the bilinear transform",
            fmt_c(culprit)
        )));
    }
    let inv = T::one() / lead;
    RationalTf::continuous(n.scale(inv), d.scale(inv))
}
