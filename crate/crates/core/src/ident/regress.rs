//! Equation-error regressors and the stacked least-squares initializer.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim, invalid, Error, Result};
use crate::DataWindow;

/// Regression block of one input/output loop:
/// `his = num * [b0..bk] + den * [a1..ak]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopBlock {
    pub output: String,
    pub input: String,
    pub order: usize,
    /// Row `t` holds `y(t)`.
    pub his: DVector<f64>,
    /// Row `t` holds `[u(t), u(t-1), .., u(t-k)]`.
    pub num: DMatrix<f64>,
    /// Row `t` holds `[-y(t-1), .., -y(t-k)]`.
    pub den: DMatrix<f64>,
}

impl LoopBlock {
    pub fn rows(&self) -> usize {
        self.his.len()
    }
}

/// Builds the loop block for `input -> output` at order `k`.
///
/// Sign convention: `y(t) = sum_j b_j u(t-j) - sum_j a_j y(t-j)`, which
/// pairs with the denominator `1 + a_1 z^-1 + .. + a_k z^-k`.
pub fn build_regressors(
    window: &DataWindow,
    input: &str,
    output: &str,
    k: usize,
) -> Result<LoopBlock> {
    let u = window.channel(input)?;
    let y = window.channel(output)?;
    let len = window.len();
    if len <= 2 * k + 1 {
        return Err(invalid(format!(
            "window of {len} samples is too short for order {k} (needs more than {})",
            2 * k + 1
        )));
    }
    let rows = len - k;
    let mut his = DVector::zeros(rows);
    let mut num = DMatrix::zeros(rows, k + 1);
    let mut den = DMatrix::zeros(rows, k);
    for r in 0..rows {
        let t = r + k;
        his[r] = y[t];
        for j in 0..=k {
            num[(r, j)] = u[t - j];
        }
        for j in 1..=k {
            den[(r, j - 1)] = -y[t - j];
        }
    }
    Ok(LoopBlock {
        output: output.to_string(),
        input: input.to_string(),
        order: k,
        his,
        num,
        den,
    })
}

/// All loop blocks stacked into one linear system with unknowns
/// `[b^1; b^2; ..; b^L; a]`.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    pub order: usize,
    /// `(output, input)` per loop, in unknown-vector order.
    pub loops: Vec<(String, String)>,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl StackedSystem {
    pub fn unknowns(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Numerator columns are block-diagonal per loop; the shared denominator
/// columns are stacked under each other.
pub fn stack_loops(blocks: &[LoopBlock]) -> Result<StackedSystem> {
    let first = blocks
        .first()
        .ok_or_else(|| invalid("no loop blocks to stack"))?;
    let k = first.order;
    let n = first.rows();
    if let Some(b) = blocks.iter().find(|b| b.order != k || b.rows() != n) {
        return Err(dim(format!(
            "loop {}->{} has order {} and {} rows, expected order {k} and {n} rows",
            b.input,
            b.output,
            b.order,
            b.rows()
        )));
    }
    let l = blocks.len();
    let cols = l * (k + 1) + k;
    let mut matrix = DMatrix::zeros(l * n, cols);
    let mut rhs = DVector::zeros(l * n);
    for (h, b) in blocks.iter().enumerate() {
        matrix
            .view_mut((h * n, h * (k + 1)), (n, k + 1))
            .copy_from(&b.num);
        if k > 0 {
            matrix
                .view_mut((h * n, l * (k + 1)), (n, k))
                .copy_from(&b.den);
        }
        rhs.rows_mut(h * n, n).copy_from(&b.his);
    }
    Ok(StackedSystem {
        order: k,
        loops: blocks
            .iter()
            .map(|b| (b.output.clone(), b.input.clone()))
            .collect(),
        matrix,
        rhs,
    })
}

/// Relative singular-value threshold for the rank test.
const RANK_TOL: f64 = 1e-11;

/// Least-squares solution of the stacked system, with its condition number.
///
/// Columns are scaled to unit norm before the SVD. Identically zero
/// columns (e.g. a silent output channel) carry no information and get a
/// zero coefficient; the remaining columns must have full rank.
pub fn ls_initialize(system: &StackedSystem) -> Result<(DVector<f64>, f64)> {
    let a = &system.matrix;
    let cols = a.ncols();
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let active: Vec<usize> = (0..cols).filter(|&j| norms[j] > 0.0).collect();
    let mut theta = DVector::zeros(cols);
    if active.is_empty() {
        return Ok((theta, 1.0));
    }
    let mut scaled = a.select_columns(&active);
    for (c, &j) in active.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / norms[j]);
    }
    let svd = scaled.svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if smin <= smax * RANK_TOL {
        let mut sorted: Vec<f64> = sv.iter().copied().collect();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        sorted.truncate(3);
        return Err(Error::RankDeficient {
            condition,
            smallest: sorted,
        });
    }
    let sol = svd
        .solve(&system.rhs, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    for (c, &j) in active.iter().enumerate() {
        theta[j] = sol[c] / norms[j];
    }
    Ok((theta, condition))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(u: Vec<f64>, y: Vec<f64>) -> DataWindow {
        DataWindow::new(0.1, 0.0, vec!["u".into(), "y".into()], vec![u, y]).unwrap()
    }

    #[test]
    fn first_order_recursion_recovered() {
        let u: Vec<f64> = (0..40).map(|t| ((t * 7919) % 13) as f64 - 6.0).collect();
        let mut y = vec![0.0; 40];
        for t in 1..40 {
            y[t] = 0.5 * y[t - 1] + u[t - 1];
        }
        let b = build_regressors(&window(u, y), "u", "y", 1).unwrap();
        let s = stack_loops(&[b]).unwrap();
        let (theta, _) = ls_initialize(&s).unwrap();
        assert!((theta[0] - 0.0).abs() < 1e-10);
        assert!((theta[1] - 1.0).abs() < 1e-10);
        assert!((theta[2] + 0.5).abs() < 1e-10);
    }

    #[test]
    fn zero_output_gives_zero_solution() {
        let u: Vec<f64> = (0..30).map(|t| ((t * 7919) % 13) as f64 - 6.0).collect();
        let b = build_regressors(&window(u, vec![0.0; 30]), "u", "y", 2).unwrap();
        assert!(b.his.iter().all(|v| *v == 0.0));
        let (theta, _) = ls_initialize(&stack_loops(&[b]).unwrap()).unwrap();
        assert!(theta.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn order_zero_is_static_gain() {
        let u: Vec<f64> = (0..20).map(|t| t as f64).collect();
        let y: Vec<f64> = u.iter().map(|v| 2.5 * v).collect();
        let b = build_regressors(&window(u, y), "u", "y", 0).unwrap();
        assert_eq!(b.den.ncols(), 0);
        let (theta, _) = ls_initialize(&stack_loops(&[b]).unwrap()).unwrap();
        assert_eq!(theta.len(), 1);
        assert!((theta[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn short_window_and_missing_channel() {
        let w = window(vec![0.0; 5], vec![0.0; 5]);
        assert!(build_regressors(&w, "u", "y", 2).is_err());
        assert!(build_regressors(&w, "u", "nope", 1).is_err());
    }

    #[test]
    fn inconsistent_blocks_rejected() {
        let w = window(vec![1.0; 30], vec![1.0; 30]);
        let a = build_regressors(&w, "u", "y", 1).unwrap();
        let b = build_regressors(&w, "u", "y", 2).unwrap();
        assert!(stack_loops(&[a, b]).is_err());
        assert!(stack_loops(&[]).is_err());
    }

    #[test]
    fn unknown_count_for_two_by_two() {
        let w = window(
            (0..50).map(|t| (t as f64 * 0.3).sin()).collect(),
            (0..50).map(|t| (t as f64 * 0.2).cos()).collect(),
        );
        let blocks: Vec<_> = (0..4)
            .map(|_| build_regressors(&w, "u", "y", 2).unwrap())
            .collect();
        let s = stack_loops(&blocks).unwrap();
        assert_eq!(s.unknowns(), 14);
    }
}
