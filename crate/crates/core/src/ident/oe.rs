//! Output-error refinement of a shared-denominator model.
//!
//! The criterion is `sum_h || y_h - B_h(q)/A(q) u_h ||^2` over all loops,
//! minimized by Levenberg-Marquardt with analytic sensitivities and the
//! constraint that every root of `A` stays within radius `1 - margin`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::lti::Polynomial;
use crate::scalar::cabs;

/// Filters `x` through `b(q) / (1 + a_1 q^-1 + .. )`, zero initial state.
pub fn filter(b: &[f64], a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for t in 0..x.len() {
        let mut acc = 0.0;
        for (j, bj) in b.iter().enumerate() {
            if j > t {
                break;
            }
            acc += bj * x[t - j];
        }
        for (i, ai) in a.iter().enumerate() {
            let lag = i + 1;
            if lag > t {
                break;
            }
            acc -= ai * y[t - lag];
        }
        y[t] = acc;
    }
    y
}

/// Input/output record of one loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopRecord {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

/// Output-error problem over `loops.len()` loops at a fixed order.
///
/// Parameter layout: `[b^1 (k+1); ..; b^L (k+1); a_1..a_k]`.
#[derive(Debug, Clone)]
pub struct OutputErrorProblem {
    pub order: usize,
    pub loops: Vec<LoopRecord>,
}

impl OutputErrorProblem {
    pub fn new(order: usize, loops: Vec<LoopRecord>) -> Result<Self> {
        if loops.is_empty() {
            return Err(invalid("output-error problem needs at least one loop"));
        }
        if let Some(l) = loops.iter().find(|l| l.input.len() != l.output.len()) {
            return Err(invalid(format!(
                "loop record has {} inputs and {} outputs",
                l.input.len(),
                l.output.len()
            )));
        }
        Ok(Self { order, loops })
    }

    pub fn params(&self) -> usize {
        self.loops.len() * (self.order + 1) + self.order
    }

    fn split<'a>(&self, theta: &'a [f64], h: usize) -> (&'a [f64], &'a [f64]) {
        let k = self.order;
        let l = self.loops.len();
        (
            &theta[h * (k + 1)..(h + 1) * (k + 1)],
            &theta[l * (k + 1)..],
        )
    }

    /// Simulated outputs per loop.
    pub fn simulate(&self, theta: &[f64]) -> Vec<Vec<f64>> {
        (0..self.loops.len())
            .map(|h| {
                let (b, a) = self.split(theta, h);
                filter(b, a, &self.loops[h].input)
            })
            .collect()
    }

    /// Sum of squared output errors per loop.
    pub fn loop_errors(&self, theta: &[f64]) -> Vec<f64> {
        self.simulate(theta)
            .iter()
            .zip(&self.loops)
            .map(|(yh, l)| {
                yh.iter()
                    .zip(&l.output)
                    .map(|(p, m)| (m - p) * (m - p))
                    .sum()
            })
            .collect()
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        self.loop_errors(theta).iter().sum()
    }

    /// Gauss-Newton pieces: `J^T J`, `J^T r` (with `J = d yhat / d theta`,
    /// `r = y - yhat`) and the objective.
    pub fn normal_equations(&self, theta: &[f64]) -> (DMatrix<f64>, DVector<f64>, f64) {
        let k = self.order;
        let l = self.loops.len();
        let np = self.params();
        let mut jtj = DMatrix::zeros(np, np);
        let mut jtr = DVector::zeros(np);
        let mut obj = 0.0;
        let a_off = l * (k + 1);
        for (h, rec) in self.loops.iter().enumerate() {
            let (b, a) = self.split(theta, h);
            let yhat = filter(b, a, &rec.input);
            let v = filter(&[1.0], a, &rec.input);
            let s = filter(&[1.0], a, &yhat);
            let len = rec.input.len();
            let b_off = h * (k + 1);
            // row t of J: [v(t-j) for j in 0..=k] then [-s(t-i) for i in 1..=k]
            let mut row = vec![0.0; 2 * k + 1];
            for t in 0..len {
                for j in 0..=k {
                    row[j] = if t >= j { v[t - j] } else { 0.0 };
                }
                for i in 1..=k {
                    row[k + i] = if t >= i { -s[t - i] } else { 0.0 };
                }
                let r = rec.output[t] - yhat[t];
                obj += r * r;
                for p in 0..(2 * k + 1) {
                    if row[p] == 0.0 {
                        continue;
                    }
                    let gp = if p <= k { b_off + p } else { a_off + p - k - 1 };
                    jtr[gp] += row[p] * r;
                    for q in 0..(2 * k + 1) {
                        let gq = if q <= k { b_off + q } else { a_off + q - k - 1 };
                        jtj[(gp, gq)] += row[p] * row[q];
                    }
                }
            }
        }
        (jtj, jtr, obj)
    }

    /// Gradient of [`Self::objective`].
    pub fn gradient(&self, theta: &[f64]) -> DVector<f64> {
        let (_, jtr, _) = self.normal_equations(theta);
        jtr * -2.0
    }

    pub fn denominator<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.loops.len() * (self.order + 1)..]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub max_iters: usize,
    /// Relative objective decrease below which the fit is converged.
    pub rel_tol: f64,
    /// Denominator roots must satisfy `|z| <= 1 - stability_margin`.
    pub stability_margin: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            rel_tol: 1e-10,
            stability_margin: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub theta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective_init: f64,
    pub objective: f64,
}

/// Largest root modulus of `1 + a_1 z^-1 + .. + a_k z^-k`.
pub fn spectral_radius(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let mut c = Vec::with_capacity(a.len() + 1);
    c.push(1.0);
    c.extend_from_slice(a);
    match Polynomial::new(c).and_then(|p| p.roots()) {
        Ok(r) => r.into_iter().map(cabs).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

/// Moves every root outside radius `limit` radially onto it.
pub fn project_stable(a: &[f64], limit: f64) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut c = vec![1.0];
    c.extend_from_slice(a);
    let roots = Polynomial::new(c)
        .and_then(|p| p.roots())
        .unwrap_or_default();
    let moved: Vec<Complex<f64>> = roots
        .into_iter()
        .map(|z| {
            let m = cabs(z);
            if m > limit {
                z * (limit / m)
            } else {
                z
            }
        })
        .collect();
    Polynomial::from_roots(&moved).coeffs()[1..].to_vec()
}

/// Levenberg-Marquardt on the output-error criterion.
pub fn refine_output_error(
    problem: &OutputErrorProblem,
    init: &[f64],
    opts: &RefineOptions,
) -> Result<RefineOutcome> {
    if init.len() != problem.params() {
        return Err(invalid(format!(
            "initial vector has {} entries, problem has {} parameters",
            init.len(),
            problem.params()
        )));
    }
    let limit = 1.0 - opts.stability_margin;
    let mut theta = init.to_vec();
    let a_off = problem.loops.len() * (problem.order + 1);
    if spectral_radius(&theta[a_off..]) > limit {
        let projected = project_stable(&theta[a_off..], limit);
        theta[a_off..].copy_from_slice(&projected);
    }
    let objective_init = problem.objective(&theta);
    let energy: f64 = problem
        .loops
        .iter()
        .map(|l| l.output.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let floor = 1e-28 * energy.max(f64::MIN_POSITIVE);
    let mut obj = objective_init;
    let mut lambda = 1e-3;
    let mut converged = obj <= floor;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let (jtj, jtr, _) = problem.normal_equations(&theta);
        let dmax = jtj.diagonal().max();
        let mut accepted = false;
        while lambda < 1e16 {
            let mut lhs = jtj.clone();
            for i in 0..lhs.nrows() {
                lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * dmax.max(1e-300));
            }
            let step = match lhs.cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => {
                    lambda *= 4.0;
                    continue;
                }
            };
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            if spectral_radius(&cand[a_off..]) <= limit {
                let cobj = problem.objective(&cand);
                if cobj < obj {
                    let rel = (obj - cobj) / obj;
                    theta = cand;
                    obj = cobj;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel < opts.rel_tol || obj <= floor {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at this point: local minimum
            converged = true;
        }
    }
    Ok(RefineOutcome {
        theta,
        iterations,
        converged,
        objective_init,
        objective: obj,
    })
}
