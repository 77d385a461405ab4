//! `covar`: mean–CoVaR portfolio analysis from JSON scenario files.
//!
//! Exit status: 0 on success, 1 when the model has no minimizer (unbounded
//! or unattained infimum; the diagnosis is still printed), 2 for bad input,
//! 3 for numerical failure.

mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covar_core::closedform::{delta_sign, markowitz_frontier, uniform_grid};
use covar_core::{
    classify_efficiency, constrained_frontier, covar_portfolio, frontier, mc_covar, minimize_constrained, reduce,
    solve_critical, validate_model, ConstrainedProblem, ConstrainedSolution, CovarError, CriticalSolution,
    EfficiencyClass, FeasibleSet, FrontierMode, FrontierPoint, Gramian, McConfig, ModelWarning, Portfolio,
    ReducedModel, SolveStatus, ValidatedModel,
};
use serde::{Deserialize, Serialize};

use output::{csv_row, frontier_csv, frontier_text, json, list, num, pairs_csv, pairs_text, Format};
use scenario::{Scenario, Targets};

const CONSTRAINED_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "covar", version, about = "Mean-CoVaR portfolio selection for Gaussian returns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the reduced model: loadings, Gramian, Δ and the efficiency class.
    Describe(Common),
    /// Closed-form critical portfolio at one target return.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long = "E", allow_negative_numbers = true)]
        e: Option<f64>,
    },
    /// Critical set (or Markowitz curves) over a grid of target returns.
    Frontier {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        range: Range,
        #[arg(long, value_enum, default_value = "covar")]
        mode: Mode,
        /// Minimize under no short selling instead of using the closed form.
        #[arg(long)]
        non_negative: bool,
    },
    /// Minimum CoVaR without short selling, on a return slice or the whole simplex.
    Constrained {
        #[command(flatten)]
        common: Common,
        #[arg(long = "E", allow_negative_numbers = true)]
        e: Option<f64>,
    },
    /// Compare the closed-form CoVaR of a portfolio with a Monte-Carlo estimate.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Portfolio to check, comma separated. Defaults to the critical portfolio at `--E`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        weights: Option<Vec<f64>>,
        #[arg(long = "E", allow_negative_numbers = true)]
        e: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Half-width of the conditioning band in units of the conditioning asset's σ.
        #[arg(long, default_value_t = 0.05)]
        band_eps: f64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    /// CoVaR critical set.
    Covar,
    /// σ along Markowitz's critical line.
    Sigma,
    /// VaR along Markowitz's critical line.
    Var,
}

impl From<Mode> for FrontierMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Covar => FrontierMode::Covar,
            Mode::Sigma => FrontierMode::Sigma,
            Mode::Var => FrontierMode::Var,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct Range {
    #[arg(long = "E-min", allow_negative_numbers = true)]
    e_min: Option<f64>,
    #[arg(long = "E-max", allow_negative_numbers = true)]
    e_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<CovarError> for Failure {
    fn from(e: CovarError) -> Self {
        Self { code: if e.is_numerical() { 3 } else { 2 }, message: e.to_string() }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Describe(c) => describe(&c),
        Command::Solve { common, e } => solve(&common, e),
        Command::Frontier { common, range, mode, non_negative } => frontier_cmd(&common, &range, mode.into(), non_negative),
        Command::Constrained { common, e } => constrained(&common, e),
        Command::Validate { common, weights, e, seed, samples, band_eps } => {
            let cfg = McConfig { samples, seed, band_epsilon: Some(band_eps), ..McConfig::default() };
            validate(&common, weights, e, &cfg)
        }
    }
}

struct Loaded {
    scenario: Scenario,
    model: ValidatedModel,
    reduced: ReducedModel,
}

fn load(c: &Common) -> Result<Loaded, Failure> {
    let scenario = Scenario::load(&c.scenario).map_err(Failure::input)?;
    let model = validate_model(&scenario.model())?;
    let reduced = reduce(&model)?;
    if c.format == Format::Text {
        for w in model.warnings().iter().chain(&reduced.warnings) {
            eprintln!("warning: {}", describe_warning(w));
        }
    }
    Ok(Loaded { scenario, model, reduced })
}

fn describe_warning(w: &ModelWarning) -> String {
    match w {
        ModelWarning::ExtremeIntensity { name, value } => {
            format!("{name} = {value} implies a quantile level below 1e-15")
        }
        ModelWarning::NearlyDependent { score } => {
            format!("1, mu and q are nearly linearly dependent (score {score:e})")
        }
    }
}

fn single_target(l: &Loaded, flag: Option<f64>) -> Option<f64> {
    flag.or(match l.scenario.targets {
        Some(Targets::Single { e }) => Some(e),
        _ => None,
    })
}

fn regime(r: &ReducedModel) -> SolveStatus {
    if !r.independent {
        return SolveStatus::MarkowitzFallback;
    }
    match delta_sign(r) {
        1 => SolveStatus::Unique,
        0 => SolveStatus::InfimumNotAttained,
        _ => SolveStatus::UnboundedBelow,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DescribeReport {
    name: String,
    n: usize,
    conditioning_asset: usize,
    /// Original (1-based) asset index at each position of the reduced model.
    asset_order: Vec<usize>,
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    q: Vec<f64>,
    #[serde(rename = "Q_hat")]
    q_hat_matrix: Vec<Vec<f64>>,
    mu_hat: Vec<f64>,
    q_hat: Vec<f64>,
    #[serde(flatten)]
    gram: Gramian,
    #[serde(rename = "Delta")]
    delta: f64,
    independent: bool,
    independence_score: f64,
    regime: SolveStatus,
    efficiency: Option<EfficiencyClass>,
    warnings: Vec<String>,
}

fn describe(c: &Common) -> Outcome {
    let l = load(c)?;
    let (m, r) = (&l.model, &l.reduced);
    let n = m.n();
    let asset_order = (0..n).map(|k| m.original_index(k) + 1).collect();
    let regime = regime(r);
    let report = DescribeReport {
        name: l.scenario.name.clone(),
        n,
        conditioning_asset: l.scenario.conditioning_asset,
        asset_order,
        a: m.risk().a,
        b: m.risk().b,
        alpha: m.risk().alpha_level(),
        beta: m.risk().beta_level(),
        q: r.loading.iter().copied().collect(),
        q_hat_matrix: (0..n - 1).map(|i| r.residual_hat.row(i).iter().copied().collect()).collect(),
        mu_hat: r.mu_hat.iter().copied().collect(),
        q_hat: r.loading_hat.iter().copied().collect(),
        gram: r.gram,
        delta: r.delta,
        independent: r.independent,
        independence_score: r.independence_score,
        regime,
        efficiency: if regime == SolveStatus::Unique { classify_efficiency(r).ok() } else { None },
        warnings: m.warnings().iter().chain(&r.warnings).map(describe_warning).collect(),
    };
    let matrix = format!(
        "[{}]",
        report.q_hat_matrix.iter().map(|row| list(row)).collect::<Vec<_>>().join(", ")
    );
    let pairs = [
        ("name", report.name.clone()),
        ("n", report.n.to_string()),
        ("conditioning_asset", report.conditioning_asset.to_string()),
        ("asset_order", format!("{:?}", report.asset_order)),
        ("a", num(report.a)),
        ("b", num(report.b)),
        ("alpha", num(report.alpha)),
        ("beta", num(report.beta)),
        ("q", list(&report.q)),
        ("Q_hat", matrix),
        ("mu_hat", list(&report.mu_hat)),
        ("q_hat", list(&report.q_hat)),
        ("alpha_C", num(report.gram.alpha)),
        ("beta_C", num(report.gram.beta)),
        ("gamma_C", num(report.gram.gamma)),
        ("detG", num(report.gram.det)),
        ("Delta", num(report.delta)),
        ("independent", report.independent.to_string()),
        ("independence_score", num(report.independence_score)),
        ("regime", report.regime.as_str().to_string()),
        ("efficiency", report.efficiency.map_or("n/a".into(), |e| format!("{e:?}"))),
    ];
    print!(
        "{}",
        match c.format {
            Format::Json => json(&report),
            Format::Csv => pairs_csv(&pairs),
            Format::Text => pairs_text(&pairs),
        }
    );
    Ok(0)
}

fn solve(c: &Common, e: Option<f64>) -> Outcome {
    let l = load(c)?;
    let e = single_target(&l, e).ok_or_else(|| Failure::input("no target return: pass --E or set targets.E"))?;
    let s = solve_critical(&l.model, &l.reduced, e)?;
    let n = l.model.n();
    let efficient = s.efficiency.is_some_and(|class| class.is_efficient(s.e_hat));
    print!(
        "{}",
        match c.format {
            Format::Json => json(&s),
            Format::Csv => {
                let mut out = frontier_csv(&[], n);
                csv_row(&mut out, e, s.value, efficient, s.status.as_str(), s.weights.as_deref(), n);
                out
            }
            Format::Text => solve_text(&s),
        }
    );
    Ok(if s.status.is_solved() { 0 } else { 1 })
}

fn solve_text(s: &CriticalSolution) -> String {
    let mut pairs = vec![
        ("E", num(s.target)),
        ("E_hat", num(s.e_hat)),
        ("status", s.status.as_str().to_string()),
    ];
    if let Some(w) = &s.weights {
        pairs.push(("weights", list(w)));
    }
    match (s.status, s.value) {
        (SolveStatus::InfimumNotAttained, Some(v)) => pairs.push(("infimum", num(v))),
        (_, Some(v)) => pairs.push(("value", num(v))),
        _ => pairs.push(("value", "unbounded below".into())),
    }
    if let Some(class) = s.efficiency {
        pairs.push(("efficiency", format!("{class:?}")));
        pairs.push(("efficient", class.is_efficient(s.e_hat).to_string()));
    }
    if let Some(mult) = s.multipliers {
        pairs.push(("t_hat", num(mult.t_hat)));
        pairs.push(("lambda1", num(mult.lambda1)));
        pairs.push(("lambda2", num(mult.lambda2)));
    }
    if let Some(ray) = &s.witness {
        pairs.push(("witness_origin", list(&ray.origin)));
        pairs.push(("witness_direction", list(&ray.direction)));
        pairs.push(("witness_start_value", num(ray.start_value)));
        pairs.push(("witness_slope", num(ray.asymptotic_slope)));
        match ray.step_to_reach(ray.start_value - 1e3) {
            Some(tau) => pairs.push(("witness_tau_for_drop_1e3", num(tau))),
            None => pairs.push(("witness_limit", ray.limit.map_or("-inf".into(), num))),
        }
    }
    pairs_text(&pairs)
}

fn frontier_cmd(c: &Common, range: &Range, mode: FrontierMode, non_negative_flag: bool) -> Outcome {
    let l = load(c)?;
    let (m, r) = (&l.model, &l.reduced);
    let non_negative = non_negative_flag || l.scenario.constraints.non_negative;
    let from_file = match l.scenario.targets {
        Some(Targets::Range { e_min, e_max, steps }) => Some((e_min, e_max, steps)),
        _ => None,
    };
    let e_min = range.e_min.or(from_file.map(|t| t.0));
    let e_max = range.e_max.or(from_file.map(|t| t.1));
    let steps = range.steps.or(from_file.map(|t| t.2));
    let (Some(e_min), Some(e_max), Some(steps)) = (e_min, e_max, steps) else {
        return Err(Failure::input("frontier needs --E-min, --E-max and --steps (or targets in the scenario)"));
    };
    let points: Vec<FrontierPoint> = match (mode, non_negative) {
        (FrontierMode::Covar, true) => {
            let grid = uniform_grid(e_min, e_max, steps)?;
            constrained_frontier(m, r, &grid, CONSTRAINED_TOL)?
        }
        (FrontierMode::Covar, false) => {
            let status = regime(r);
            if matches!(status, SolveStatus::UnboundedBelow | SolveStatus::InfimumNotAttained) {
                eprintln!(
                    "no critical set: Delta = {} ({}); try --non-negative",
                    num(r.delta),
                    status.as_str()
                );
                return Ok(1);
            }
            frontier(m, r, e_min, e_max, steps)?
        }
        (_, true) => return Err(Failure::input("--non-negative applies to --mode covar only")),
        (mode, false) => markowitz_frontier(m, &uniform_grid(e_min, e_max, steps)?, mode)?,
    };
    print!(
        "{}",
        match c.format {
            Format::Json => json(&points),
            Format::Csv => frontier_csv(&points, m.n()),
            Format::Text => frontier_text(&points),
        }
    );
    Ok(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ConstrainedRecord {
    #[serde(rename = "E")]
    target: Option<f64>,
    #[serde(flatten)]
    solution: ConstrainedSolution,
}

fn constrained(c: &Common, e: Option<f64>) -> Outcome {
    let l = load(c)?;
    let target = single_target(&l, e);
    let feasible = target.map_or(FeasibleSet::Simplex, |t| FeasibleSet::SimplexSlice { target: t });
    let p = ConstrainedProblem::new(&l.model, &l.reduced, feasible)?;
    let s = minimize_constrained(&p, CONSTRAINED_TOL)?;
    let n = l.model.n();
    let e_out = target.unwrap_or_else(|| s.weights.iter().zip(l.model.mu_original()).map(|(w, m)| w * m).sum());
    let record = ConstrainedRecord { target, solution: s };
    print!(
        "{}",
        match c.format {
            Format::Json => json(&record),
            Format::Csv => {
                let mut out = frontier_csv(&[], n);
                let s = &record.solution;
                csv_row(&mut out, e_out, Some(s.value), true, "Constrained", Some(&s.weights), n);
                out
            }
            Format::Text => {
                let s = &record.solution;
                pairs_text(&[
                    ("E", num(e_out)),
                    ("weights", list(&s.weights)),
                    ("value", num(s.value)),
                    ("support", format!("{:?}", s.support.iter().map(|i| i + 1).collect::<Vec<_>>())),
                    ("kkt_residual", num(s.kkt_residual)),
                    ("at_conditioning_vertex", s.at_conditioning_vertex.to_string()),
                    ("degenerate", s.degenerate.to_string()),
                    ("iterations", s.iterations.to_string()),
                ])
            }
        }
    );
    Ok(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ValidateRecord {
    weights: Vec<f64>,
    covar: f64,
    mc_estimate: f64,
    std_error: f64,
    z_score: f64,
    within_3se: bool,
    band_estimate: Option<f64>,
    band_kept: usize,
    seed: u64,
    samples: usize,
    rng: String,
}

fn validate(c: &Common, weights: Option<Vec<f64>>, e: Option<f64>, cfg: &McConfig) -> Outcome {
    let l = load(c)?;
    let weights = match weights {
        Some(w) => w,
        None => {
            let e = single_target(&l, e)
                .ok_or_else(|| Failure::input("validate needs --weights, --E or targets.E"))?;
            let s = solve_critical(&l.model, &l.reduced, e)?;
            match s.weights {
                Some(w) => w,
                None => {
                    eprintln!("no critical portfolio at E = {} ({})", num(e), s.status.as_str());
                    return Ok(1);
                }
            }
        }
    };
    let x = Portfolio::new(weights)?;
    let exact = covar_portfolio(&l.model, &l.reduced, &x)?.covar;
    let est = mc_covar(&l.model, &x, cfg)?;
    let gap = est.estimate - exact;
    let z_score = if est.std_error > 0.0 {
        gap / est.std_error
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(gap)
    };
    let record = ValidateRecord {
        weights: x.into_inner(),
        covar: exact,
        mc_estimate: est.estimate,
        std_error: est.std_error,
        z_score,
        within_3se: z_score.abs() <= 3.0,
        band_estimate: est.band_estimate,
        band_kept: est.band_kept,
        seed: est.seed,
        samples: est.samples,
        rng: est.rng,
    };
    let pairs = [
        ("weights", list(&record.weights)),
        ("covar", num(record.covar)),
        ("mc_estimate", num(record.mc_estimate)),
        ("std_error", num(record.std_error)),
        ("z_score", num(record.z_score)),
        ("within_3se", record.within_3se.to_string()),
        ("band_estimate", record.band_estimate.map_or(String::new(), num)),
        ("band_kept", record.band_kept.to_string()),
        ("seed", record.seed.to_string()),
        ("samples", record.samples.to_string()),
        ("rng", record.rng.clone()),
    ];
    print!(
        "{}",
        match c.format {
            Format::Json => json(&record),
            Format::Csv => pairs_csv(&pairs),
            Format::Text => pairs_text(&pairs),
        }
    );
    Ok(0)
}
