//! End-to-end barycenter runs driven by a [`RunConfig`].

use std::path::PathBuf;
use std::time::Instant;

use crate::analysis::{make_report, CostReport};
use crate::error::{Error, Result};
use crate::io::{load_measure, save_measure, save_plan, write_json, MeasureFormat};
use crate::measure::{DiscreteMeasure, SimplexWeights};
use crate::mot::{greedy_algorithm, randomized_greedy, randomized_reference, reference_algorithm};
use crate::oracle::{exact_mot_lp, DEFAULT_SIZE_GUARD};
use crate::plan::{pushforward_mean, sparsity_bound, validate_plan, MultiMarginalPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Reference,
    Greedy,
    ReferenceRandom,
    GreedyRandom,
    Oracle,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reference" => Ok(Self::Reference),
            "greedy" => Ok(Self::Greedy),
            "reference-random" => Ok(Self::ReferenceRandom),
            "greedy-random" => Ok(Self::GreedyRandom),
            "oracle" => Ok(Self::Oracle),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm '{other}' (expected reference, greedy, reference-random, \
                 greedy-random or oracle)"
            ))),
        }
    }
}

impl Algorithm {
    pub fn run(
        self,
        measures: &[DiscreteMeasure],
        weights: &SimplexWeights,
        seed: u64,
        oracle_guard: usize,
    ) -> Result<MultiMarginalPlan> {
        match self {
            Self::Reference => reference_algorithm(measures, weights),
            Self::Greedy => greedy_algorithm(measures, weights),
            Self::ReferenceRandom => randomized_reference(measures, weights, seed),
            Self::GreedyRandom => randomized_greedy(measures, weights, seed),
            Self::Oracle => Ok(exact_mot_lp(measures, weights, oracle_guard)?.plan),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    Uniform,
    Explicit(Vec<f64>),
}

impl std::str::FromStr for LambdaSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "uniform" {
            return Ok(Self::Uniform);
        }
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidWeights(format!("cannot parse '{x}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()
            .map(Self::Explicit)
    }
}

impl LambdaSpec {
    pub fn resolve(&self, n: usize) -> Result<SimplexWeights> {
        match self {
            Self::Uniform => Ok(SimplexWeights::uniform(n)),
            Self::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::WeightLengthMismatch { expected: n, found: v.len() });
                }
                SimplexWeights::new(v.clone())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub lambda: LambdaSpec,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    /// `None` infers each input's format from its extension.
    pub input_format: Option<MeasureFormat>,
    pub plan_out: Option<PathBuf>,
    pub barycenter_out: Option<PathBuf>,
    pub barycenter_format: MeasureFormat,
    pub report_out: Option<PathBuf>,
    /// Also solve the exact LP for the report.
    pub with_oracle: bool,
    pub oracle_guard: usize,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, inputs: Vec<PathBuf>) -> Self {
        Self {
            algorithm,
            lambda: LambdaSpec::Uniform,
            seed: 0,
            inputs,
            input_format: None,
            plan_out: None,
            barycenter_out: None,
            barycenter_format: MeasureFormat::Json,
            report_out: None,
            with_oracle: false,
            oracle_guard: DEFAULT_SIZE_GUARD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub plan: MultiMarginalPlan,
    pub barycenter: DiscreteMeasure,
    pub report: CostReport,
    pub seconds: f64,
}

impl RunSummary {
    /// One-line summary; with an exact optimum it includes the relative
    /// barycenter error `|Ψ/Ψ̂ − 1|`.
    pub fn line(&self) -> String {
        let mut s = format!(
            "phi={:.10e} ratio_vs_lb={:.6} support={} time={:.3}s",
            self.report.phi,
            self.report.ratio_vs_lb,
            self.plan.len(),
            self.seconds
        );
        if let Some(exact) = self.report.phi_exact {
            let err = if exact > 0.0 { (self.report.psi / exact - 1.0).abs() } else { 0.0 };
            s.push_str(&format!(" phi_exact={exact:.10e} psi_error={err:.3e}"));
        }
        s
    }
}

/// Loads the inputs named by the config.
pub fn load_inputs(config: &RunConfig) -> Result<Vec<DiscreteMeasure>> {
    if config.inputs.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 input measures, got {}",
            config.inputs.len()
        )));
    }
    config.inputs.iter().map(|p| load_measure(p, config.input_format)).collect()
}

/// Computes the plan and barycenter, writes the requested artifacts and
/// returns the summary.
pub fn run_barycenter(config: &RunConfig) -> Result<RunSummary> {
    let measures = load_inputs(config)?;
    let weights = config.lambda.resolve(measures.len())?;
    let start = Instant::now();
    let plan = config.algorithm.run(&measures, &weights, config.seed, config.oracle_guard)?;
    let seconds = start.elapsed().as_secs_f64();

    let diag = validate_plan(&plan, &measures);
    if !diag.feasible || plan.len() > sparsity_bound(&measures) {
        return Err(Error::Invariant(format!(
            "solver returned an invalid plan (marginal error {:.3e}, {} atoms)",
            diag.max_marginal_error(),
            plan.len()
        )));
    }
    let barycenter = pushforward_mean(&plan, &measures, &weights)?;
    let guard = config.with_oracle.then_some(config.oracle_guard);
    let report = make_report(&plan, &measures, &weights, guard)?;

    if let Some(p) = &config.plan_out {
        save_plan(p, &plan)?;
    }
    if let Some(p) = &config.barycenter_out {
        save_measure(p, &barycenter, config.barycenter_format)?;
    }
    if let Some(p) = &config.report_out {
        write_json(p, &report)?;
    }
    Ok(RunSummary { plan, barycenter, report, seconds })
}
