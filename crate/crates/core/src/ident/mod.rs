//! Identification of a discrete MIMO transfer-function model whose loops
//! all share one denominator.
//!
//! The fit runs in two stages: an equation-error least-squares solve of the
//! stacked loop regressions provides the start point, and an output-error
//! refinement under a stability constraint polishes it.

mod oe;
mod regress;

pub use oe::{
    filter, project_stable, refine_output_error, spectral_radius, LoopRecord, OutputErrorProblem,
    RefineOptions, RefineOutcome,
};
pub use regress::{build_regressors, ls_initialize, stack_loops, LoopBlock, StackedSystem};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lti::Domain;
use crate::{DataWindow, Polynomial, RationalTf};

/// Shared-denominator MIMO model
/// `G_mp(z) = (b0 + b1 z^-1 + .. + bk z^-k) / (1 + a1 z^-1 + .. + ak z^-k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MimoTfModel {
    sample_time: f64,
    order: usize,
    denominator: Polynomial,
    /// `numerators[m][p]`, ascending powers of `z^-1`.
    numerators: Vec<Vec<Polynomial>>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl MimoTfModel {
    pub fn new(
        sample_time: f64,
        denominator: Polynomial,
        numerators: Vec<Vec<Polynomial>>,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Result<Self> {
        Domain::discrete(sample_time)?;
        if denominator.coeffs()[0] != 1.0 {
            return Err(invalid("shared denominator must start with 1"));
        }
        let order = denominator.degree();
        if numerators.len() != outputs.len() {
            return Err(invalid("one numerator row per output required"));
        }
        for row in &numerators {
            if row.len() != inputs.len() {
                return Err(invalid("one numerator per input required"));
            }
            if let Some(n) = row.iter().find(|n| n.len() > order + 1) {
                return Err(invalid(format!(
                    "numerator with {} coefficients exceeds order {order}",
                    n.len()
                )));
            }
        }
        Ok(Self {
            sample_time,
            order,
            denominator,
            numerators,
            inputs,
            outputs,
        })
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }
    pub fn numerator(&self, m: usize, p: usize) -> &Polynomial {
        &self.numerators[m][p]
    }
    pub fn numerators(&self) -> &[Vec<Polynomial>] {
        &self.numerators
    }
    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }
    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Discrete transfer function of loop `input p -> output m`.
    pub fn loop_tf(&self, m: usize, p: usize) -> Result<RationalTf> {
        RationalTf::discrete(
            self.numerators[m][p].clone(),
            self.denominator.clone(),
            self.sample_time,
        )
    }

    /// Roots of the shared denominator in the `z` plane.
    pub fn poles(&self) -> Result<Vec<num_complex::Complex<f64>>> {
        if self.order == 0 {
            return Ok(Vec::new());
        }
        self.denominator.roots()
    }

    pub fn to_record(&self) -> MimoTfRecord {
        MimoTfRecord {
            sample_time: self.sample_time,
            order: self.order,
            inputs: self.inputs.clone(),
            outputs: self.outputs.clone(),
            denominator: self.denominator.coeffs().to_vec(),
            numerators: self
                .numerators
                .iter()
                .map(|row| row.iter().map(|n| n.coeffs().to_vec()).collect())
                .collect(),
        }
    }

    pub fn from_record(rec: &MimoTfRecord) -> Result<Self> {
        let numerators = rec
            .numerators
            .iter()
            .map(|row| row.iter().map(|c| Polynomial::new(c.clone())).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Self::new(
            rec.sample_time,
            Polynomial::new(rec.denominator.clone())?,
            numerators,
            rec.inputs.clone(),
            rec.outputs.clone(),
        )
    }
}

/// Serializable form of [`MimoTfModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimoTfRecord {
    pub sample_time: f64,
    pub order: usize,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub denominator: Vec<f64>,
    pub numerators: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub order: usize,
    /// `||y - yhat||^2 / ||y||^2` per loop, `[m][p]`; excluded loops read 0.
    pub loop_errors: Vec<Vec<f64>>,
    /// Sum of squared output errors over all fitted loops divided by the
    /// total output energy.
    pub total_error: f64,
    pub condition: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_init: f64,
    pub objective: f64,
    /// Loops left out because their input carried no energy.
    pub excluded: Vec<(String, String)>,
}

/// Measurement windows for identification. Loop `p -> m` is fitted on the
/// window in which input `p` carries the most energy.
#[derive(Debug, Clone)]
pub struct IdentificationData {
    pub windows: Vec<DataWindow>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

struct LoopPlan {
    m: usize,
    p: usize,
    window: usize,
}

impl IdentificationData {
    pub fn new(
        windows: Vec<DataWindow>,
        inputs: Vec<String>,
        outputs: Vec<String>,
    ) -> Result<Self> {
        if windows.is_empty() || inputs.is_empty() || outputs.is_empty() {
            return Err(invalid("identification needs windows, inputs and outputs"));
        }
        let ts = windows[0].sample_time();
        let len = windows[0].len();
        for w in &windows {
            if (w.sample_time() - ts).abs() > 1e-9 * ts || w.len() != len {
                return Err(invalid(
                    "identification windows must share sample time and length",
                ));
            }
            for name in inputs.iter().chain(&outputs) {
                w.channel(name)?;
            }
        }
        Ok(Self {
            windows,
            inputs,
            outputs,
        })
    }

    pub fn sample_time(&self) -> f64 {
        self.windows[0].sample_time()
    }

    fn plan(&self) -> Result<(Vec<LoopPlan>, Vec<(String, String)>)> {
        let mut plan = Vec::new();
        let mut excluded = Vec::new();
        for (p, input) in self.inputs.iter().enumerate() {
            let mut best = None;
            let mut best_e = 0.0;
            for (wi, w) in self.windows.iter().enumerate() {
                let e = w.energy(input)?;
                if e > best_e {
                    best_e = e;
                    best = Some(wi);
                }
            }
            match best {
                Some(wi) => {
                    for m in 0..self.outputs.len() {
                        plan.push(LoopPlan { m, p, window: wi });
                    }
                }
                None => {
                    warn!(
                        "input '{input}' carries no energy; its loops are excluded and set to zero"
                    );
                    for o in &self.outputs {
                        excluded.push((o.clone(), input.clone()));
                    }
                }
            }
        }
        if plan.is_empty() {
            return Err(invalid("no input channel is excited"));
        }
        Ok((plan, excluded))
    }
}

/// Identification options.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentOptions {
    pub refine: RefineOptions,
    /// Skip the output-error stage and return the least-squares fit.
    pub skip_refine: bool,
}

impl Default for IdentOptions {
    fn default() -> Self {
        Self {
            refine: RefineOptions::default(),
            skip_refine: false,
        }
    }
}

/// Equation-error start point for all excited loops.
pub fn initial_estimate(data: &IdentificationData, k: usize) -> Result<(Vec<f64>, f64)> {
    let (plan, _) = data.plan()?;
    let blocks = plan
        .iter()
        .map(|l| {
            build_regressors(
                &data.windows[l.window],
                &data.inputs[l.p],
                &data.outputs[l.m],
                k,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let stacked = stack_loops(&blocks)?;
    let (theta, cond) = ls_initialize(&stacked)?;
    Ok((theta.iter().copied().collect(), cond))
}

/// Output-error refinement from `init` (layout as [`OutputErrorProblem`]
/// over the excited loops, inputs outermost).
pub fn refine(
    init: &[f64],
    data: &IdentificationData,
    k: usize,
    opts: &RefineOptions,
) -> Result<(MimoTfModel, FitReport)> {
    let (plan, excluded) = data.plan()?;
    let problem = output_error_problem(data, &plan, k)?;
    let out = refine_output_error(&problem, init, opts)?;
    assemble(data, &plan, excluded, k, &problem, &out, f64::NAN)
}

fn output_error_problem(
    data: &IdentificationData,
    plan: &[LoopPlan],
    k: usize,
) -> Result<OutputErrorProblem> {
    let loops = plan
        .iter()
        .map(|l| {
            let w = &data.windows[l.window];
            Ok(LoopRecord {
                input: w.channel(&data.inputs[l.p])?.to_vec(),
                output: w.channel(&data.outputs[l.m])?.to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    OutputErrorProblem::new(k, loops)
}

fn assemble(
    data: &IdentificationData,
    plan: &[LoopPlan],
    excluded: Vec<(String, String)>,
    k: usize,
    problem: &OutputErrorProblem,
    out: &RefineOutcome,
    condition: f64,
) -> Result<(MimoTfModel, FitReport)> {
    let theta = &out.theta;
    let mut den = vec![1.0];
    den.extend_from_slice(problem.denominator(theta));
    let zero = Polynomial::new(vec![0.0; k + 1])?;
    let mut numerators = vec![vec![zero; data.inputs.len()]; data.outputs.len()];
    let mut loop_errors = vec![vec![0.0; data.inputs.len()]; data.outputs.len()];
    let errs = problem.loop_errors(theta);
    let mut total_energy = 0.0;
    for (h, l) in plan.iter().enumerate() {
        numerators[l.m][l.p] = Polynomial::new(theta[h * (k + 1)..(h + 1) * (k + 1)].to_vec())?;
        let energy: f64 = problem.loops[h].output.iter().map(|v| v * v).sum();
        total_energy += energy;
        loop_errors[l.m][l.p] = if energy > 0.0 { errs[h] / energy } else { 0.0 };
    }
    let total_error = if total_energy > 0.0 {
        errs.iter().sum::<f64>() / total_energy
    } else {
        0.0
    };
    let model = MimoTfModel::new(
        data.sample_time(),
        Polynomial::new(den)?,
        numerators,
        data.inputs.clone(),
        data.outputs.clone(),
    )?;
    let report = FitReport {
        order: k,
        loop_errors,
        total_error,
        condition,
        iterations: out.iterations,
        converged: out.converged,
        objective_init: out.objective_init,
        objective: out.objective,
        excluded,
    };
    Ok((model, report))
}

/// Full two-stage fit at order `k`.
pub fn identify(
    data: &IdentificationData,
    k: usize,
    opts: &IdentOptions,
) -> Result<(MimoTfModel, FitReport)> {
    let (plan, excluded) = data.plan()?;
    let (init, cond) = initial_estimate(data, k)?;
    let problem = output_error_problem(data, &plan, k)?;
    let out = if opts.skip_refine {
        let obj = problem.objective(&init);
        RefineOutcome {
            theta: init,
            iterations: 0,
            converged: true,
            objective_init: obj,
            objective: obj,
        }
    } else {
        refine_output_error(&problem, &init, &opts.refine)?
    };
    assemble(data, &plan, excluded, k, &problem, &out, cond)
}

/// Relative improvement below which a higher order is not worth it.
pub const ORDER_ELBOW: f64 = 0.10;

/// Elbow rule over the candidate orders (sorted ascending): keeps the
/// first order whose successor improves the output error by less than 10%.
/// An order whose least-squares system is rank-deficient counts as no
/// improvement.
pub fn select_order(
    data: &IdentificationData,
    candidates: &[usize],
    opts: &IdentOptions,
) -> Result<(usize, Vec<FitReport>)> {
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(invalid("no candidate orders given"));
    }
    let mut reports: Vec<FitReport> = Vec::new();
    let mut prev: Option<(usize, f64)> = None;
    for &k in &ks {
        let err = match identify(data, k, opts) {
            Ok((_, rep)) => {
                let e = rep.total_error;
                reports.push(rep);
                Some(e)
            }
            Err(Error::RankDeficient { .. }) => None,
            Err(e) => return Err(e),
        };
        match (prev, err) {
            (None, Some(e)) => prev = Some((k, e)),
            (None, None) => {}
            (Some((pk, _)), None) => return Ok((pk, reports)),
            (Some((pk, pe)), Some(e)) => {
                if pe <= 1e-12 || (pe - e) / pe < ORDER_ELBOW {
                    return Ok((pk, reports));
                }
                prev = Some((k, e));
            }
        }
    }
    match prev {
        Some((k, _)) => Ok((k, reports)),
        None => Err(Error::RankDeficient {
            condition: f64::INFINITY,
            smallest: vec![],
        }),
    }
}
