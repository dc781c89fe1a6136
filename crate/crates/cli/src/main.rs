//! `motbary` command-line interface.
//!
//! Exit codes: 0 success, 1 failed `check`, 2 configuration or input
//! error, 3 solver failure, 4 oracle size guard exceeded.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use motbary::analysis::{phi_cost, phi_cost_pairwise};
use motbary::grid::{run_weight_grid, write_grid, GridMode};
use motbary::instances::{
    default_greedy_eps, gen_greedy_worst_case, gen_nested_ellipses, gen_neither_better,
    gen_random_clouds, gen_reference_worst_case,
};
use motbary::io::{load_plan, save_measure, save_plan, write_json, MeasureFormat};
use motbary::oracle::{exact_mot_lp, sorting_property_check, DEFAULT_SIZE_GUARD};
use motbary::pipeline::{load_inputs, run_barycenter, Algorithm, LambdaSpec, RunConfig};
use motbary::plan::{sparsity_bound, validate_plan};
use motbary::{DiscreteMeasure, Error, MultiMarginalPlan};

#[derive(Parser)]
#[command(name = "motbary", version, about = "Sparse multi-marginal optimal transport and W2 barycenters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an approximate barycenter of the input measures.
    Barycenter {
        #[command(flatten)]
        common: Common,
        /// Barycenter output file (.json or .csv).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the multi-marginal plan.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Compute a multi-marginal transport plan.
    Mot {
        #[command(flatten)]
        common: Common,
        /// Plan output file.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve the multi-marginal problem exactly (small inputs only).
    Oracle {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the exact barycenter.
        #[arg(long)]
        barycenter: Option<PathBuf>,
    },
    /// Generate instances.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        /// Output directory.
        #[arg(long, short)]
        out_dir: PathBuf,
        /// Number of measures.
        #[arg(long, short, default_value_t = 3)]
        n: usize,
        /// Atoms per measure (torus rings and clouds).
        #[arg(long, short, default_value_t = 128)]
        m: usize,
        /// Shift perturbation of the reference worst case.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Image resolution for ellipses.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
        /// Dimension of random clouds.
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = OutFormat::Json)]
        format: OutFormat,
    },
    /// Barycenters over a grid of weight vectors.
    Grid {
        inputs: Vec<PathBuf>,
        /// Grid points per axis.
        #[arg(long, short, default_value_t = 5)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Reuse)]
        mode: ModeArg,
        #[arg(long, short)]
        out_dir: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<InFormat>,
        #[arg(long, value_enum, default_value_t = OutFormat::Json)]
        out_format: OutFormat,
    },
    /// Check a plan file against its marginals.
    Check {
        plan: PathBuf,
        #[command(flatten)]
        input: InputArgs,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Input measures, in order.
    inputs: Vec<PathBuf>,
    /// `uniform` or comma-separated weights.
    #[arg(long, default_value = "uniform")]
    lambda: String,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<InFormat>,
    /// Maximum number of LP variables for the exact solver.
    #[arg(long, default_value_t = DEFAULT_SIZE_GUARD)]
    oracle_guard: usize,
    /// Write a JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = AlgoArg::Greedy)]
    algo: AlgoArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Include the exact optimum in the report.
    #[arg(long)]
    oracle: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Reference,
    Greedy,
    ReferenceRandom,
    GreedyRandom,
    Oracle,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Reference => Algorithm::Reference,
            AlgoArg::Greedy => Algorithm::Greedy,
            AlgoArg::ReferenceRandom => Algorithm::ReferenceRandom,
            AlgoArg::GreedyRandom => Algorithm::GreedyRandom,
            AlgoArg::Oracle => Algorithm::Oracle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InFormat {
    Json,
    Csv,
    Image,
}

impl From<InFormat> for MeasureFormat {
    fn from(f: InFormat) -> Self {
        match f {
            InFormat::Json => MeasureFormat::Json,
            InFormat::Csv => MeasureFormat::Csv,
            InFormat::Image => MeasureFormat::Image,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

impl From<OutFormat> for MeasureFormat {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Json => MeasureFormat::Json,
            OutFormat::Csv => MeasureFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Reuse,
    Recompute,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    ReferenceWorst,
    GreedyWorst,
    NeitherBetter,
    Ellipses,
    Clouds,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::SizeGuard { .. } => 4,
            Error::NonConvergence { .. } | Error::Lp(_) | Error::Invariant(_) | Error::MarginalMismatch(_) => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Barycenter { common, out, plan } => {
            let mut cfg = config(&common)?;
            cfg.barycenter_format = out_format(out.as_deref())?;
            cfg.barycenter_out = out;
            cfg.plan_out = plan;
            let summary = run_barycenter(&cfg)?;
            println!("{}", summary.line());
            Ok(())
        }
        Command::Mot { common, out } => {
            let mut cfg = config(&common)?;
            cfg.plan_out = out;
            let summary = run_barycenter(&cfg)?;
            println!("{}", summary.line());
            Ok(())
        }
        Command::Oracle { input, out, barycenter } => {
            let measures = load(&input)?;
            let weights = lambda(&input)?.resolve(measures.len())?;
            let exact = exact_mot_lp(&measures, &weights, input.oracle_guard)?;
            if let Some(p) = &out {
                save_plan(p, &exact.plan)?;
            }
            if let Some(p) = &barycenter {
                let nu = motbary::plan::pushforward_mean(&exact.plan, &measures, &weights)?;
                save_measure(p, &nu, out_format(Some(p))?)?;
            }
            if let Some(p) = &input.report {
                write_json(p, &exact.certificate)?;
            }
            println!(
                "phi_exact={:.10e} support={} duality_gap={:.3e} iterations={}",
                exact.phi,
                exact.plan.len(),
                exact.certificate.duality_gap,
                exact.certificate.iterations
            );
            Ok(())
        }
        Command::Gen { kind, out_dir, n, m, eps, resolution, dim, seed, format } => {
            generate(kind, &out_dir, n, m, eps, resolution, dim, seed, format.into())
        }
        Command::Grid { inputs, k, mode, out_dir, format, out_format } => {
            let mut cfg = RunConfig::new(Algorithm::Greedy, inputs);
            cfg.input_format = format.map(Into::into);
            let measures = load_inputs(&cfg)?;
            let mode = match mode {
                ModeArg::Reuse => GridMode::Reuse,
                ModeArg::Recompute => GridMode::Recompute,
            };
            let points = run_weight_grid(&measures, k, mode)?;
            let files = write_grid(&out_dir, &points, out_format.into())?;
            println!("wrote {} barycenters to {}", files.len(), out_dir.display());
            Ok(())
        }
        Command::Check { plan, input } => check(&plan, &input),
    }
}

fn lambda(input: &InputArgs) -> Result<LambdaSpec, Failure> {
    Ok(input.lambda.parse::<LambdaSpec>()?)
}

fn config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::new(common.algo.into(), common.input.inputs.clone());
    cfg.lambda = lambda(&common.input)?;
    cfg.seed = common.seed;
    cfg.input_format = common.input.format.map(Into::into);
    cfg.report_out = common.input.report.clone();
    cfg.with_oracle = common.oracle;
    cfg.oracle_guard = common.input.oracle_guard;
    Ok(cfg)
}

fn load(input: &InputArgs) -> Result<Vec<DiscreteMeasure>, Failure> {
    let mut cfg = RunConfig::new(Algorithm::Greedy, input.inputs.clone());
    cfg.input_format = input.format.map(Into::into);
    Ok(load_inputs(&cfg)?)
}

fn out_format(path: Option<&Path>) -> Result<MeasureFormat, Failure> {
    match path.map(|p| MeasureFormat::from_path(p)) {
        None => Ok(MeasureFormat::Json),
        Some(Some(f @ (MeasureFormat::Json | MeasureFormat::Csv))) => Ok(f),
        Some(_) => Err(Failure { code: 2, message: "output files must end in .json or .csv".into() }),
    }
}

#[allow(clippy::too_many_arguments)]
fn generate(
    kind: GenKind,
    dir: &Path,
    n: usize,
    m: usize,
    eps: f64,
    resolution: usize,
    dim: usize,
    seed: u64,
    format: MeasureFormat,
) -> CliResult {
    let (measures, competitor): (Vec<DiscreteMeasure>, Option<MultiMarginalPlan>) = match kind {
        GenKind::ReferenceWorst => {
            let wc = gen_reference_worst_case(n, m, eps)?;
            (wc.measures, Some(wc.competitor))
        }
        GenKind::GreedyWorst => {
            let wc = gen_greedy_worst_case(n, m, &default_greedy_eps(n))?;
            (wc.measures, Some(wc.competitor))
        }
        GenKind::NeitherBetter => {
            let nb = gen_neither_better();
            (nb.nu.to_vec(), None)
        }
        GenKind::Ellipses => (gen_nested_ellipses(n, resolution, seed)?, None),
        GenKind::Clouds => (gen_random_clouds(n, m, dim, seed)?, None),
    };
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::from(Error::Io { path: dir.display().to_string(), source: e }))?;
    let width = measures.len().to_string().len();
    for (i, mu) in measures.iter().enumerate() {
        let p = dir.join(format!("mu_{:0width$}.{}", i + 1, format.extension()));
        save_measure(&p, mu, format)?;
    }
    if let Some(plan) = competitor {
        save_plan(&dir.join("competitor.json"), &plan)?;
    }
    println!("wrote {} measures to {}", measures.len(), dir.display());
    Ok(())
}

fn check(plan_path: &Path, input: &InputArgs) -> CliResult {
    let plan = load_plan(plan_path)?;
    let measures = load(input)?;
    if plan.num_marginals() != measures.len() {
        return Err(Failure {
            code: 2,
            message: format!("plan has {} marginals but {} measures were given", plan.num_marginals(), measures.len()),
        });
    }
    let weights = lambda(input)?.resolve(measures.len())?;
    let diag = validate_plan(&plan, &measures);
    let bound = sparsity_bound(&measures);
    let phi = phi_cost(&plan, &measures, &weights)?;
    let phi_pairwise = phi_cost_pairwise(&plan, &measures, &weights)?;
    let sorted = if measures[0].dim() == 1 { Some(sorting_property_check(&plan, &measures)?) } else { None };
    let sparse = plan.len() <= bound;
    let consistent = (phi - phi_pairwise).abs() <= 1e-10 * phi.abs() + 1e-15;
    let report = serde_json::json!({
        "feasible": diag.feasible,
        "max_marginal_error": diag.max_marginal_error(),
        "total_mass_error": diag.total_mass_error,
        "duplicate_tuples": diag.duplicate_tuples,
        "support": plan.len(),
        "sparsity_bound": bound,
        "sparse": sparse,
        "phi": phi,
        "phi_pairwise": phi_pairwise,
        "sorting_property": sorted,
    });
    if let Some(p) = &input.report {
        write_json(p, &report)?;
    }
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    if diag.feasible && sparse && consistent {
        Ok(())
    } else {
        Err(Failure { code: 1, message: "plan check failed".into() })
    }
}
