//! State-space models, conversions to and from transfer functions, and
//! discrete-time simulation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use super::poly::Polynomial;
use super::tf::{Domain, RationalTf};
use crate::error::{dim, invalid, Error, Result};
use crate::scalar::Real;
use crate::window::DataWindow;

/// `x' = A x + B u`, `y = C x + D u` (continuous) or the discrete
/// difference-equation counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace<T: Real> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    d: DMatrix<T>,
    domain: Domain<T>,
}

impl<T: Real> StateSpace<T> {
    pub fn new(
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DMatrix<T>,
        d: DMatrix<T>,
        domain: Domain<T>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(dim(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(dim(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(dim(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(dim(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        if let Domain::Discrete { sample_time } = domain {
            Domain::discrete(sample_time)?;
        }
        Ok(Self { a, b, c, d, domain })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<T> {
        &self.d
    }
    pub fn domain(&self) -> Domain<T> {
        self.domain
    }
    pub fn states(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Eigenvalues of `A`.
    pub fn poles(&self) -> Vec<Complex<T>> {
        if self.states() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    /// Same matrices with a different output map.
    pub fn with_output(&self, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c, d, self.domain)
    }

    /// Keeps only the listed input columns and output rows.
    pub fn select(&self, inputs: &[usize], outputs: &[usize]) -> Result<Self> {
        if inputs.iter().any(|&i| i >= self.inputs())
            || outputs.iter().any(|&o| o >= self.outputs())
        {
            return Err(dim("channel index out of range"));
        }
        let b = self.b.select_columns(inputs);
        let c = self.c.select_rows(outputs);
        let d = self.d.select_rows(outputs).select_columns(inputs);
        Self::new(self.a.clone(), b, c, d, self.domain)
    }

    /// Bilinear discretization, consistent with [`super::tustin_c2d`] on
    /// every input/output pair.
    pub fn tustin(&self, sample_time: T) -> Result<Self> {
        if self.domain.is_discrete() {
            return Err(invalid("model is already discrete"));
        }
        let domain = Domain::discrete(sample_time)?;
        let n = self.states();
        let h = sample_time * T::lit(0.5);
        let eye = DMatrix::<T>::identity(n, n);
        let m = &eye - &self.a * h;
        let m_inv = m.try_inverse().ok_or_else(|| {
            Error::IllConditioned("I - A T/2 is singular (pole at s = 2/T)".into())
        })?;
        let ad = &m_inv * (&eye + &self.a * h);
        let bd = &m_inv * &self.b * sample_time;
        let cd = &self.c * &m_inv;
        let dd = &self.d + &self.c * &m_inv * &self.b * h;
        Self::new(ad, bd, cd, dd, domain)
    }

    /// Zero-order-hold discretization via the matrix exponential of the
    /// augmented `[[A, B], [0, 0]]` block.
    pub fn zoh(&self, sample_time: T) -> Result<Self> {
        if self.domain.is_discrete() {
            return Err(invalid("model is already discrete"));
        }
        let domain = Domain::discrete(sample_time)?;
        let n = self.states();
        let p = self.inputs();
        let mut aug = DMatrix::<T>::zeros(n + p, n + p);
        aug.view_mut((0, 0), (n, n))
            .copy_from(&(&self.a * sample_time));
        aug.view_mut((0, n), (n, p))
            .copy_from(&(&self.b * sample_time));
        let e = aug.exp();
        let ad = e.view((0, 0), (n, n)).into_owned();
        let bd = e.view((0, n), (n, p)).into_owned();
        Self::new(ad, bd, self.c.clone(), self.d.clone(), domain)
    }
}

/// Characteristic polynomial of `A` and the adjugate coefficient matrices
/// `adj(xI - A) = sum_k M_k x^(n-1-k)` by the Faddeev-LeVerrier recursion.
fn faddeev_leverrier<T: Real>(a: &DMatrix<T>) -> (Vec<T>, Vec<DMatrix<T>>) {
    let n = a.nrows();
    let eye = DMatrix::<T>::identity(n, n);
    let mut coeffs = vec![T::one()];
    let mut mats = Vec::with_capacity(n);
    let mut m = eye.clone();
    for k in 1..=n {
        mats.push(m.clone());
        let am = a * &m;
        let ck = -am.trace() / T::lit(k as f64);
        coeffs.push(ck);
        m = am + &eye * ck;
    }
    (coeffs, mats)
}

/// Characteristic polynomial `det(xI - A)`, highest power first.
pub fn char_poly<T: Real>(a: &DMatrix<T>) -> Polynomial<T> {
    Polynomial::new(faddeev_leverrier(a).0).expect("nonempty")
}

/// Grid of transfer functions `C (xI - A)^-1 B + D`, row `i` = output `i`.
///
/// Every entry keeps `det(xI - A)` as its denominator; no pole/zero
/// cancellation is performed.
pub fn ss_to_tf<T: Real>(model: &StateSpace<T>) -> Result<Vec<Vec<RationalTf<T>>>> {
    let (den, mats) = faddeev_leverrier(model.a());
    let n = model.states();
    let cm: Vec<DMatrix<T>> = mats.iter().map(|m| model.c() * m * model.b()).collect();
    let den_poly = Polynomial::new(den.clone())?;
    let mut grid = Vec::with_capacity(model.outputs());
    for i in 0..model.outputs() {
        let mut row = Vec::with_capacity(model.inputs());
        for j in 0..model.inputs() {
            let dij = model.d()[(i, j)];
            let mut num = vec![T::zero(); n + 1];
            for (k, c) in den.iter().enumerate() {
                num[k] = dij * *c;
            }
            for (k, m) in cm.iter().enumerate() {
                num[k + 1] += m[(i, j)];
            }
            let tf = RationalTf::from_coeffs(&num, den_poly.coeffs(), model.domain())?;
            row.push(tf);
        }
        grid.push(row);
    }
    Ok(grid)
}

/// Controllable canonical form realization of a proper SISO transfer
/// function.
///
/// With `G = b0 + (c1 x^(k-1) + ... + ck) / (x^k + a1 x^(k-1) + ... + ak)`
/// the realization has `A[0,:] = [-a1 .. -ak]`, ones on the subdiagonal,
/// `B = e1`, `C = [c1 .. ck]`, `D = b0`.
pub fn tf_to_ss_controllable<T: Real>(tf: &RationalTf<T>) -> Result<StateSpace<T>> {
    let (num, den) = match tf.domain() {
        Domain::Discrete { .. } => {
            if tf.num().len() > tf.den().len() {
                return Err(invalid(format!(
                    "improper transfer function: numerator has {} z^-1 terms, denominator {}",
                    tf.num().len(),
                    tf.den().len()
                )));
            }
            let len = tf.den().len();
            let mut n = tf.num().clone().into_coeffs();
            n.resize(len, T::zero());
            (n, tf.den().clone().into_coeffs())
        }
        Domain::Continuous => {
            let den = tf.den().trimmed();
            let num = tf.num().trimmed();
            if num.degree() > den.degree() && !num.is_zero() {
                return Err(invalid("improper transfer function"));
            }
            let lead = den.coeffs()[0];
            let num = num.padded(den.len()).scale(T::one() / lead);
            (num.into_coeffs(), den.scale(T::one() / lead).into_coeffs())
        }
    };
    let k = den.len() - 1;
    let b0 = num[0];
    let mut a = DMatrix::<T>::zeros(k, k);
    let mut b = DMatrix::<T>::zeros(k, 1);
    let mut c = DMatrix::<T>::zeros(1, k);
    for j in 0..k {
        a[(0, j)] = -den[j + 1];
        c[(0, j)] = num[j + 1] - b0 * den[j + 1];
    }
    for i in 1..k {
        a[(i, i - 1)] = T::one();
    }
    if k > 0 {
        b[(0, 0)] = T::one();
    }
    let d = DMatrix::from_element(1, 1, b0);
    StateSpace::new(a, b, c, d, tf.domain())
}

/// Iterates `x[k+1] = A x[k] + B u[k]`, `y[k] = C x[k] + D u[k]`.
///
/// Input channels are taken in window order; outputs are named `y_1..y_m`.
pub fn simulate_dt<T: Real>(
    model: &StateSpace<T>,
    inputs: &DataWindow<T>,
    x0: &[T],
) -> Result<DataWindow<T>> {
    let ts = model
        .domain()
        .sample_time()
        .ok_or_else(|| invalid("simulate_dt needs a discrete model"))?;
    let tol = ts * T::lit(1e-9);
    if (inputs.sample_time() - ts).abs() > tol {
        return Err(invalid(format!(
            "sample time mismatch: model {} s, input window {} s",
            ts,
            inputs.sample_time()
        )));
    }
    if inputs.channel_count() != model.inputs() {
        return Err(dim(format!(
            "model has {} inputs, window has {} channels",
            model.inputs(),
            inputs.channel_count()
        )));
    }
    if x0.len() != model.states() {
        return Err(dim(format!(
            "initial state has length {}, model has {} states",
            x0.len(),
            model.states()
        )));
    }
    let len = inputs.len();
    let mut x = DVector::from_column_slice(x0);
    let mut out = vec![Vec::with_capacity(len); model.outputs()];
    let mut u = DVector::<T>::zeros(model.inputs());
    for k in 0..len {
        for (j, ch) in inputs.channels().iter().enumerate() {
            u[j] = ch[k];
        }
        let y = model.c() * &x + model.d() * &u;
        for (i, o) in out.iter_mut().enumerate() {
            o.push(y[i]);
        }
        x = model.a() * &x + model.b() * &u;
    }
    let names = (1..=model.outputs()).map(|i| format!("y_{i}")).collect();
    DataWindow::new(ts, inputs.start_time(), names, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(ts: f64) -> Domain<f64> {
        Domain::discrete(ts).unwrap()
    }

    #[test]
    fn pure_integrator() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let m = StateSpace::new(
            DMatrix::zeros(1, 1),
            one.clone(),
            one.clone(),
            DMatrix::zeros(1, 1),
            Domain::Continuous,
        )
        .unwrap();
        let g = &ss_to_tf(&m).unwrap()[0][0];
        assert_eq!(g.num().coeffs(), &[0.0, 1.0]);
        assert_eq!(g.den().coeffs(), &[1.0, 0.0]);
    }

    #[test]
    fn bad_dimensions_rejected() {
        let r = StateSpace::new(
            DMatrix::<f64>::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            Domain::Continuous,
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn first_order_realization() {
        let (b0, a1) = (0.7, -0.4);
        let g = RationalTf::from_coeffs(&[b0], &[1.0, a1], disc(0.1)).unwrap();
        let m = tf_to_ss_controllable(&g).unwrap();
        assert_eq!(m.a()[(0, 0)], -a1);
        assert_eq!(m.d()[(0, 0)], b0);
    }

    #[test]
    fn static_gain_realization() {
        let g = RationalTf::from_coeffs(&[1.0], &[1.0], disc(0.1)).unwrap();
        let m = tf_to_ss_controllable(&g).unwrap();
        assert_eq!(m.states(), 0);
        assert_eq!(m.d()[(0, 0)], 1.0);
    }

    #[test]
    fn improper_rejected() {
        let g = RationalTf::from_coeffs(&[1.0, 2.0, 3.0], &[1.0, 0.5], disc(0.1)).unwrap();
        assert!(tf_to_ss_controllable(&g).is_err());
    }

    #[test]
    fn hand_recursion() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let m = StateSpace::new(
            DMatrix::from_element(1, 1, 0.5),
            one.clone(),
            one,
            DMatrix::zeros(1, 1),
            disc(1.0),
        )
        .unwrap();
        let u =
            DataWindow::new(1.0, 0.0, vec!["u".into()], vec![vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        let y = simulate_dt(&m, &u, &[0.0]).unwrap();
        assert_eq!(y.channels()[0], vec![0.0, 1.0, 0.5, 0.25]);
    }

    #[test]
    fn zero_input_zero_output() {
        let m = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, -0.1, 0.9]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::zeros(1, 1),
            disc(0.1),
        )
        .unwrap();
        let u = DataWindow::new(0.1, 0.0, vec!["u".into()], vec![vec![0.0; 20]]).unwrap();
        let y = simulate_dt(&m, &u, &[0.0, 0.0]).unwrap();
        assert!(y.channels()[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn simulate_checks_sample_time_and_state() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let m = StateSpace::new(one.clone(), one.clone(), one.clone(), one, disc(0.1)).unwrap();
        let u = DataWindow::new(0.2, 0.0, vec!["u".into()], vec![vec![0.0; 3]]).unwrap();
        assert!(simulate_dt(&m, &u, &[0.0]).is_err());
        let u = DataWindow::new(0.1, 0.0, vec!["u".into()], vec![vec![0.0; 3]]).unwrap();
        assert!(matches!(
            simulate_dt(&m, &u, &[0.0, 1.0]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zoh_of_scalar_decay() {
        let m = StateSpace::new(
            DMatrix::from_element(1, 1, -2.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            Domain::Continuous,
        )
        .unwrap();
        let d = m.zoh(0.1).unwrap();
        let ad = (-0.2f64).exp();
        assert!((d.a()[(0, 0)] - ad).abs() < 1e-12);
        assert!((d.b()[(0, 0)] - (1.0 - ad) / 2.0).abs() < 1e-12);
    }
}
