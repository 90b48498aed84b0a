//! `rmg`: solve, evaluate and verify robust Markov games stored as `rmg-v1` JSON.
//!
//! Exit codes: 0 success, 1 input error, 2 the solver did not converge or a check failed (the
//! report is still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use rmg_core::game::{nominal_policy_eval, random_game, random_policy, Game, Policy, RandomGameConfig, ValueTable};
use rmg_core::io::{from_document, instance_from_json, instance_to_json, read_to_string, to_document, write_atomic, SCHEMA};
use rmg_core::linalg::NormOrder;
use rmg_core::oracles::{oracle_mc_eval, oracle_shapley};
use rmg_core::planner::{
    equivalence_check, rne_gap, robust_policy_eval, solve_small_general_sum_rmg, solve_tpzs_rmg, EquivalenceReport,
    GapReport, PlannerOptions, RmgInstance, SolveReport,
};
use rmg_core::reductions::{reduce, verify_reduction, Bimatrix, ReductionReport, Variant};
use rmg_core::reward::{Kernel, RewardSet};
use rmg_core::stage::SaddleOptions;
use rmg_core::transition::TransitionSet;
use rmg_core::{Error, Result};

#[derive(Parser)]
#[command(name = "rmg", version, about = "Planning and verification for finite-horizon robust Markov games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for per-state stage solves and sampling.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Record wall time in the report (reports are then no longer byte-reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a robust equilibrium and certify its gap.
    Solve {
        #[command(flatten)]
        io: GameOut,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Iteration cap for each stage solve.
        #[arg(long, default_value_t = 1_000_000)]
        max_iter: usize,
    },
    /// Robust and nominal values of a policy (uniform if omitted).
    Eval {
        #[command(flatten)]
        io: GameOut,
        /// Policy document or solve report.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Robust Nash gap of a policy at every player, step and state.
    Gap {
        #[command(flatten)]
        io: GameOut,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Build the robust zero-sum instance of a bimatrix game and verify its gap identity.
    Reduce {
        #[command(flatten)]
        io: GameOut,
        #[arg(long, value_enum, default_value_t = VariantArg::Reward)]
        variant: VariantArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare robust evaluation with the equivalent regularized evaluation on random policies.
    CheckEquivalence {
        #[command(flatten)]
        io: GameOut,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a random instance, bimatrix game or policy.
    Gen(GenArgs),
    /// Run an independent oracle against the library.
    Oracle {
        #[arg(value_enum)]
        kind: OracleKind,
        #[command(flatten)]
        io: GameOut,
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Rollouts for the Monte-Carlo oracle.
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct GameOut {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    #[arg(long)]
    out: PathBuf,
    /// Game to draw a policy for (`gen policy`).
    #[arg(long)]
    game: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    actions: usize,
    #[arg(long, default_value_t = 2)]
    horizon: usize,
    #[arg(long)]
    zero_sum: bool,
    #[arg(long, value_enum, default_value_t = RewardFamily::Singleton)]
    reward: RewardFamily,
    #[arg(long, default_value_t = 0.1)]
    reward_radius: f64,
    #[arg(long, value_enum, default_value_t = TransitionFamily::Singleton)]
    transition: TransitionFamily,
    #[arg(long, default_value_t = 0.1)]
    transition_radius: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Reward,
    Transition,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Instance,
    Bimatrix,
    Policy,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    /// Monte-Carlo rollouts of the nominal game against exact evaluation.
    Mc,
    /// Nominal Shapley recursion against the planner on a zero-sum game.
    Shapley,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum RewardFamily {
    Singleton,
    Interval,
    OpnormBall,
    PNorm,
    Shannon,
    Tsallis,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum TransitionFamily {
    Singleton,
    Ball,
    SaTv,
    SaKl,
    SaChi2,
    SaWasserstein,
}

/// Outcome of a command: exit status 0 or 2 after the report is written.
type Status = u8;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs == 0 {
        eprintln!("rmg: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    // The pool can only be configured once per process; a failure leaves rayon's default.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("rmg: error: {e}");
            ExitCode::from(1)
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter(format!("--eps must be positive, got {eps}")));
    }
    Ok(())
}

fn load_instance(path: &Path) -> Result<RmgInstance> {
    instance_from_json(&read_to_string(path)?)
}

/// Reads a policy document, or the policy inside a solve report.
fn load_policy(path: &Path, game: &Game) -> Result<Policy> {
    let text = read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text)?;
    let policy: Policy = if doc.get("kind").and_then(Value::as_str) == Some("solve_report") {
        let found = doc.get("schema").and_then(Value::as_str).unwrap_or("");
        if found != SCHEMA {
            return Err(Error::Schema { found: found.into(), expected: SCHEMA });
        }
        serde_json::from_value(doc["policy"].clone())?
    } else {
        from_document("policy", &text)?
    };
    policy.validate(game)?;
    Ok(policy)
}

#[derive(Serialize)]
struct Timed<T: Serialize> {
    #[serde(flatten)]
    body: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

fn write_report<T: Serialize>(cli: &Cli, out: &Path, kind: &str, body: T, start: Instant) -> Result<()> {
    let wall_time_s = cli.timing.then(|| start.elapsed().as_secs_f64());
    write_atomic(out, &to_document(kind, &Timed { body, wall_time_s })?)?;
    eprintln!("rmg: wrote {kind} to {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct SolveDoc {
    eps: f64,
    #[serde(flatten)]
    report: SolveReport,
}

#[derive(Serialize)]
struct EvalDoc {
    robust: ValueTable,
    nominal: ValueTable,
}

#[derive(Serialize)]
struct GapDoc {
    eps: f64,
    certified: bool,
    #[serde(flatten)]
    report: GapReport,
}

#[derive(Serialize)]
struct EquivalenceDoc {
    seed: u64,
    #[serde(flatten)]
    report: EquivalenceReport,
}

#[derive(Serialize)]
struct McDoc {
    rollouts: usize,
    seed: u64,
    mean: Vec<f64>,
    stderr: Vec<f64>,
    exact: Vec<f64>,
    within_three_sigma: bool,
}

#[derive(Serialize)]
struct ShapleyDoc {
    oracle_values: ValueTable,
    planner_values: ValueTable,
    max_abs_diff: f64,
    agrees: bool,
}

fn run(cli: &Cli) -> Result<Status> {
    let start = Instant::now();
    match &cli.command {
        Command::Solve { io, eps, max_iter } => {
            check_eps(*eps)?;
            let inst = load_instance(&io.game)?;
            let report = if inst.decomposable {
                eprintln!("rmg: zero-sum decomposable instance, backward induction over stage saddles");
                let opts = PlannerOptions { saddle: SaddleOptions { max_iter: *max_iter, ..SaddleOptions::default() } };
                solve_tpzs_rmg(&inst, *eps, &opts)?
            } else {
                eprintln!("rmg: general-sum instance, support enumeration per stage");
                solve_small_general_sum_rmg(&inst, *eps)?
            };
            let ok = report.converged && report.max_gap <= *eps;
            eprintln!("rmg: certified gap {:.3e} (eps {eps:.1e})", report.max_gap);
            write_report(cli, &io.out, "solve_report", SolveDoc { eps: *eps, report }, start)?;
            Ok(if ok { 0 } else { 2 })
        }
        Command::Eval { io, policy } => {
            let inst = load_instance(&io.game)?;
            let pol = match policy {
                Some(p) => load_policy(p, &inst.game)?,
                None => Policy::uniform(&inst.game),
            };
            let doc = EvalDoc { robust: robust_policy_eval(&inst, &pol)?, nominal: nominal_policy_eval(&inst.game, &pol)? };
            write_report(cli, &io.out, "eval_report", doc, start)?;
            Ok(0)
        }
        Command::Gap { io, policy, eps } => {
            check_eps(*eps)?;
            let inst = load_instance(&io.game)?;
            let pol = load_policy(policy, &inst.game)?;
            let report = rne_gap(&inst, &pol, *eps)?;
            eprintln!("rmg: max gap {:.3e}", report.max_gap);
            let doc = GapDoc { eps: *eps, certified: report.max_gap <= *eps, report };
            write_report(cli, &io.out, "gap_report", doc, start)?;
            Ok(0)
        }
        Command::Reduce { io, variant, trials, seed } => {
            let bm: Bimatrix = from_document("bimatrix", &read_to_string(&io.game)?)?;
            let (a, b) = bm.matrices()?;
            let variant = match variant {
                VariantArg::Reward => Variant::Reward,
                VariantArg::Transition => Variant::Transition,
            };
            let inst = reduce(&a, &b, variant)?;
            let verification = verify_reduction(&a, &b, variant, *trials, *seed)?;
            eprintln!("rmg: gap identity max deviation {:.3e} over {} profiles", verification.max_deviation, verification.trials);
            let passed = verification.passed;
            let mut doc: Value = serde_json::from_str(&instance_to_json(&inst)?)?;
            doc["kind"] = "instance".into();
            doc["verification"] = serde_json::to_value::<&ReductionReport>(&verification)?;
            if cli.timing {
                doc["wall_time_s"] = start.elapsed().as_secs_f64().into();
            }
            let mut text = serde_json::to_string_pretty(&doc)?;
            text.push('\n');
            write_atomic(&io.out, &text)?;
            eprintln!("rmg: wrote instance to {}", io.out.display());
            Ok(if passed { 0 } else { 2 })
        }
        Command::CheckEquivalence { io, trials, seed } => {
            let inst = load_instance(&io.game)?;
            let report = equivalence_check(&inst, *trials, *seed)?;
            eprintln!("rmg: max deviation {:.3e} (tolerance {:.0e})", report.max_deviation, report.tolerance);
            let passed = report.passed;
            write_report(cli, &io.out, "equivalence_report", EquivalenceDoc { seed: *seed, report }, start)?;
            Ok(if passed { 0 } else { 2 })
        }
        Command::Gen(args) => generate(args).map(|_| 0),
        Command::Oracle { kind, io, policy, trials, seed } => {
            let inst = load_instance(&io.game)?;
            match kind {
                OracleKind::Mc => {
                    let pol = match policy {
                        Some(p) => load_policy(p, &inst.game)?,
                        None => Policy::uniform(&inst.game),
                    };
                    let exact = nominal_policy_eval(&inst.game, &pol)?;
                    let mc = oracle_mc_eval(&inst.game, &pol, *trials, *seed)?;
                    let s0 = inst.game.initial_state;
                    let exact: Vec<f64> = exact.v.iter().map(|vi| vi[0][s0]).collect();
                    let within = mc.mean.iter().zip(&mc.stderr).zip(&exact).all(|((m, e), x)| (m - x).abs() <= 3.0 * e + 1e-12);
                    let doc = McDoc { rollouts: mc.rollouts, seed: *seed, mean: mc.mean, stderr: mc.stderr, exact, within_three_sigma: within };
                    write_report(cli, &io.out, "oracle_report", doc, start)?;
                    Ok(if within { 0 } else { 2 })
                }
                OracleKind::Shapley => {
                    let (oracle_values, _) = oracle_shapley(&inst.game)?;
                    let nominal = RmgInstance { decomposable: true, ..RmgInstance::nominal(inst.game.clone()) };
                    let planner_values = solve_tpzs_rmg(&nominal, 1e-12, &PlannerOptions::default())?.values;
                    let max_abs_diff = oracle_values.max_abs_diff(&planner_values);
                    let agrees = max_abs_diff <= 1e-10;
                    let doc = ShapleyDoc { oracle_values, planner_values, max_abs_diff, agrees };
                    write_report(cli, &io.out, "oracle_report", doc, start)?;
                    Ok(if agrees { 0 } else { 2 })
                }
            }
        }
    }
}

fn reward_set(family: RewardFamily, radius: f64, joint: usize) -> RewardSet {
    match family {
        RewardFamily::Singleton => RewardSet::Singleton,
        RewardFamily::Interval => RewardSet::Interval { lo: vec![-radius; joint], hi: vec![radius; joint] },
        RewardFamily::OpnormBall => RewardSet::OpnormBall { alpha: radius, p: NormOrder::TWO, q: NormOrder::TWO },
        RewardFamily::PNorm => RewardSet::OpnormBall { alpha: radius, p: NormOrder::TWO, q: NormOrder::ONE },
        RewardFamily::Shannon => RewardSet::KernelPolicyDependent { kernel: Kernel::Shannon, tau: radius },
        RewardFamily::Tsallis => RewardSet::KernelPolicyDependent { kernel: Kernel::Tsallis, tau: radius },
    }
}

fn transition_set(family: TransitionFamily, radius: f64, states: usize, joint: usize) -> TransitionSet {
    let beta = vec![radius; joint];
    match family {
        TransitionFamily::Singleton => TransitionSet::Singleton,
        TransitionFamily::Ball => TransitionSet::OpnormBall { beta: radius, p: NormOrder::TWO, q: NormOrder::TWO },
        TransitionFamily::SaTv => TransitionSet::SaTv { beta },
        TransitionFamily::SaKl => TransitionSet::SaKl { beta },
        TransitionFamily::SaChi2 => TransitionSet::SaChi2 { beta },
        TransitionFamily::SaWasserstein => {
            let metric = (0..states).map(|i| (0..states).map(|j| i.abs_diff(j) as f64).collect()).collect();
            TransitionSet::SaWasserstein { beta, metric }
        }
    }
}

fn generate(args: &GenArgs) -> Result<()> {
    let text = match args.kind {
        GenKind::Instance => {
            let cfg = RandomGameConfig::two_player(args.states, args.actions, args.horizon, args.zero_sum, args.seed);
            let game = random_game(&cfg)?;
            let joint = args.actions * args.actions;
            let mut inst = RmgInstance::nominal(game)
                .with_reward_sets(|_, _, _| reward_set(args.reward, args.reward_radius, joint))?
                .with_transition_sets(|_, _| transition_set(args.transition, args.transition_radius, args.states, joint))?;
            inst.decomposable = inst.check_decomposable().is_ok();
            eprintln!(
                "rmg: {} states, {}x{} actions, horizon {}, decomposable {}",
                args.states, args.actions, args.actions, args.horizon, inst.decomposable
            );
            instance_to_json(&inst)?
        }
        GenKind::Bimatrix => {
            let cfg = RandomGameConfig::two_player(1, args.actions, 1, false, args.seed);
            let g = random_game(&cfg)?;
            let rows = |flat: &[f64]| flat.chunks(args.actions).map(<[f64]>::to_vec).collect();
            let bm = Bimatrix { a: rows(&g.rewards[0][0][0]), b: rows(&g.rewards[1][0][0]) };
            to_document("bimatrix", &bm)?
        }
        GenKind::Policy => {
            let path = args.game.as_ref().ok_or_else(|| Error::InvalidParameter("gen policy needs --game".into()))?;
            let inst = load_instance(path)?;
            to_document("policy", &random_policy(&inst.game, args.seed, false))?
        }
    };
    write_atomic(&args.out, &text)?;
    eprintln!("rmg: wrote {}", args.out.display());
    Ok(())
}
