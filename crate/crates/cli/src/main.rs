//! `mvi`: validate, analyze, solve and certify tabular MDPs, generate
//! instances, and run experiments.
//!
//! Exit codes: 0 success, 1 invalid input or failed bound check, 2 usage
//! error, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mvi_core::bench::{self, ExperimentConfig};
use mvi_core::certify::{render_table, theorem_suite, SuiteConfig};
use mvi_core::complexity::complexity_report;
use mvi_core::generators::{self, Instance, MultichainParams};
use mvi_core::io::{load_mdp_with_warnings, load_policy, save_mdp, save_policy};
use mvi_core::oracle::{ground_truth, ground_truth_from_reference};
use mvi_core::solvers::{self, BellmanOptimality, SolveOptions};
use mvi_core::{bellman, chain, DiscountFactor, Error, Mdp, Policy};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mvi", version, about = "Value iteration toolkit for multichain average-reward MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an MDP file against the schema and validity rules.
    Validate { mdp: PathBuf },
    /// Chain analysis of a policy, or ground truth and complexity parameters.
    Analyze {
        mdp: PathBuf,
        /// Analyze this policy's Markov chain instead of the whole MDP.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Known gain-optimal policy; skips enumeration.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Also enumerate `B` and per-policy `T_drop`.
        #[arg(long)]
        enumerate: bool,
    },
    /// Run one solver and print its report.
    Solve {
        mdp: PathBuf,
        #[arg(long, value_enum)]
        alg: Alg,
        /// Iteration parameter (per phase for alg1, the base `n` for alg3).
        #[arg(long)]
        n: usize,
        /// Discount factor; required for alg2, selects the warm start for alg3.
        #[arg(long)]
        gamma: Option<f64>,
        /// Extra third-phase multiplier for alg3.
        #[arg(long)]
        extra_k: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every in-scope bound over a grid of budgets.
    Certify {
        mdp: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 5, 10, 50, 200])]
        n_grid: Vec<usize>,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Write the checks as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate an instance.
    Gen {
        #[command(subcommand)]
        family: Family,
        #[arg(long, default_value_t = 0, global = true)]
        seed: u64,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
        /// Also write the known optimal policy, when the family has one.
        #[arg(long, global = true)]
        reference_out: Option<PathBuf>,
    },
    /// Run an experiment described by a JSON config.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Alg {
    Vi,
    Alg1,
    Alg2,
    Alg3,
    Baseline,
}

#[derive(Subcommand)]
enum Family {
    /// The cycle-versus-trap family M(k, T) with gap eps.
    Mkt {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        eps: f64,
    },
    /// The four-state instance.
    FourState {
        #[arg(long)]
        eps: f64,
    },
    /// Random closed blocks plus a transient layer.
    Random {
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, default_value_t = 2)]
        states_per: usize,
        #[arg(long, default_value_t = 2)]
        actions_per: usize,
        #[arg(long, default_value_t = 2)]
        transient: usize,
        #[arg(long, default_value_t = 0.3)]
        leak_prob: f64,
    },
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: if e.is_numerical() { 3 } else { 1 }, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| Failure { code: 1, message: format!("{}: {e}", path.display()) })
}

fn load(path: &Path) -> Result<Mdp<f64>, Failure> {
    let (mdp, warnings) = load_mdp_with_warnings(&read(path)?)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(mdp)
}

fn load_pi(path: &Path, mdp: &Mdp<f64>) -> Result<Policy<f64>, Failure> {
    let pi = load_policy(&read(path)?)?;
    pi.validate(mdp)?;
    Ok(pi)
}

fn print_json(value: &impl serde::Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    println!("{text}");
    Ok(())
}

fn validate(path: &Path) -> Outcome {
    let mdp = load(path)?;
    let actions: usize = (0..mdp.n_states()).map(|s| mdp.num_actions(s)).sum();
    println!("valid: {} states, {actions} state-action pairs, {} deterministic policies", mdp.n_states(), mdp.policy_count());
    Ok(())
}

fn analyze(path: &Path, policy: Option<&Path>, reference: Option<&Path>, enumerate: bool) -> Outcome {
    let mdp = load(path)?;
    if let Some(p) = policy {
        let pi = load_pi(p, &mdp)?;
        return print_json(&chain::analyze(&mdp, &pi)?);
    }
    let truth = match reference {
        Some(p) => ground_truth_from_reference(&mdp, &load_pi(p, &mdp)?)?,
        None => ground_truth(&mdp)?,
    };
    let cx = complexity_report(&mdp, &truth.rho_star, enumerate)?;
    print_json(&json!({ "ground_truth": truth, "complexity": cx }))
}

fn solve(path: &Path, alg: Alg, n: usize, gamma: Option<f64>, extra_k: Option<f64>, out: Option<&Path>) -> Outcome {
    let mdp = load(path)?;
    let opts = SolveOptions::default();
    let zero = vec![0.0; mdp.n_states()];
    if extra_k.is_some() && !matches!(alg, Alg::Alg3) {
        return Err(usage("--extra-k only applies to alg3"));
    }
    let report = match alg {
        Alg::Vi => solvers::value_iteration(&mdp, &zero, n, &opts)?,
        Alg::Alg1 => solvers::approx_shifted_halpern(&mdp, &zero, n, &opts)?,
        Alg::Alg2 => {
            let g = DiscountFactor::new(gamma.ok_or_else(|| usage("alg2 needs --gamma"))?)?;
            let op = BellmanOptimality::new(&mdp, g);
            let mut r = solvers::halpern_then_picard(&op, &zero, n, &opts)?;
            r.output_policy = Some(bellman::greedy(&mdp, &r.output_value, g)?);
            r
        }
        Alg::Alg3 => match gamma {
            Some(g) if extra_k.is_some() => {
                return Err(usage(format!("--gamma {g} and --extra-k select different alg3 variants")))
            }
            Some(g) => solvers::warm_start_htp(&mdp, DiscountFactor::new(g)?, n, &opts)?,
            None => solvers::solve_multichain(&mdp, n, extra_k.unwrap_or(0.0), &opts)?,
        },
        Alg::Baseline => solvers::dmdp_baseline(&mdp, n, &opts)?,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    match out {
        Some(p) => {
            write(p, text.as_bytes())?;
            println!(
                "{}: {} residuals, final {:e}; report written to {}",
                report.algorithm,
                report.trace.residuals.len(),
                report.trace.final_residual(),
                p.display()
            );
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn certify(path: &Path, n_grid: Vec<usize>, reference: Option<&Path>, out: Option<&Path>) -> Outcome {
    let mdp = load(path)?;
    let truth = match reference {
        Some(p) => ground_truth_from_reference(&mdp, &load_pi(p, &mdp)?)?,
        None => ground_truth(&mdp)?,
    };
    let enumerate = mdp.policy_count() <= mvi_core::oracle::ENUMERATION_CAP;
    let cx = complexity_report(&mdp, &truth.rho_star, enumerate)?;
    let config = SuiteConfig { n_grid, ..SuiteConfig::default() };
    let checks = theorem_suite(&mdp, &truth, &cx, &config)?;
    print!("{}", render_table(&checks));
    if let Some(p) = out {
        let text = serde_json::to_vec_pretty(&checks).map_err(|e| Failure { code: 1, message: e.to_string() })?;
        write(p, &text)?;
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.pass).collect();
    if failed.is_empty() {
        println!("all {} checks passed", checks.len());
        return Ok(());
    }
    for c in &failed {
        eprintln!("FAILED {} n={:?} margin={:e}", c.label, c.n, c.margin);
    }
    Err(Failure { code: 1, message: format!("{} of {} checks failed", failed.len(), checks.len()) })
}

fn generate(family: Family, seed: u64, out: Option<&Path>, reference_out: Option<&Path>) -> Outcome {
    let inst: Instance = match family {
        Family::Mkt { k, t, eps } => generators::mkt(k, t, eps, seed)?,
        Family::FourState { eps } => generators::four_state(eps)?,
        Family::Random { components, states_per, actions_per, transient, leak_prob } => {
            let p = MultichainParams {
                n_components: components,
                states_per,
                actions_per,
                transient_states: transient,
                leak_prob,
            };
            generators::random_multichain(&p, seed)?
        }
    };
    let bytes = save_mdp(&inst.mdp);
    match out {
        Some(p) => write(p, &bytes)?,
        None => println!("{}", String::from_utf8_lossy(&bytes)),
    }
    if let Some(p) = reference_out {
        let pi = inst.reference.as_ref().ok_or_else(|| usage("this family has no known optimal policy"))?;
        write(p, &save_policy(pi))?;
    }
    Ok(())
}

fn run_bench(path: &Path) -> Outcome {
    let config = ExperimentConfig::from_json(&read(path)?)?;
    let index = bench::run_experiment(&config)?;
    for r in &index.runs {
        println!(
            "{:<8} seed {:<6} rows {:<6} final fpe {:<12.6e} min fpe {:.6e}",
            r.algorithm.name(),
            r.seed,
            r.rows,
            r.final_fpe,
            r.min_fpe
        );
    }
    println!("index written to {}", config.out_dir.join("index.json").display());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { mdp } => validate(&mdp),
        Command::Analyze { mdp, policy, reference, enumerate } => {
            analyze(&mdp, policy.as_deref(), reference.as_deref(), enumerate)
        }
        Command::Solve { mdp, alg, n, gamma, extra_k, out } => solve(&mdp, alg, n, gamma, extra_k, out.as_deref()),
        Command::Certify { mdp, n_grid, reference, out } => certify(&mdp, n_grid, reference.as_deref(), out.as_deref()),
        Command::Gen { family, seed, out, reference_out } => {
            generate(family, seed, out.as_deref(), reference_out.as_deref())
        }
        Command::Bench { config } => run_bench(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
