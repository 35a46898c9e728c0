//! Experiment runner: per-iteration traces of every solver on generated
//! instances, written as CSV, JSON reports, static SVG charts, and an index.
//!
//! Every algorithm gets the same total budget `n` of operator applications,
//! so each trace has `n + 1` rows. Algorithm 1 and the multichain solver run
//! two phases of `n/2` steps each and therefore need an even `n`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellman::{apply_optimality, greedy, DiscountFactor};
use crate::chain;
use crate::error::{Error, Result};
use crate::generators::{self, Instance, MultichainParams, RandomDenseParams};
use crate::model::{Mdp, Policy};
use crate::oracle::{self, ENUMERATION_CAP};
use crate::solvers::{self, BellmanOptimality, SolveOptions, SolveReport};
use crate::vector::ValueVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Undiscounted value iteration from zero.
    Vi,
    /// Approximately shifted Halpern iteration, `n/2` steps per phase.
    Alg1,
    /// Halpern-then-Picard on `T_γ` from zero with `γ = 1 − 2/n`.
    Alg2,
    /// The multichain solver with base `n/2` (so `γ = 1 − 2/n`, budget `n`).
    Alg3,
    /// The discounted baseline with `n` steps.
    Baseline,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] =
        [Algorithm::Vi, Algorithm::Alg1, Algorithm::Alg2, Algorithm::Alg3, Algorithm::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Vi => "vi",
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 => "alg3",
            Algorithm::Baseline => "baseline",
        }
    }

    /// Discount used for greedy extraction along the trace.
    fn extraction_gamma(self, n: usize) -> Result<DiscountFactor<f64>> {
        match self {
            Algorithm::Vi | Algorithm::Alg1 => Ok(DiscountFactor::undiscounted()),
            Algorithm::Alg2 | Algorithm::Alg3 => DiscountFactor::new(1.0 - 2.0 / n as f64),
            Algorithm::Baseline => DiscountFactor::new(solvers::baseline_gamma(n)),
        }
    }

    fn check_budget(self, n: usize) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidConfig(format!("{} with n = {n}: {why}", self.name())));
        match self {
            Algorithm::Vi => Ok(()),
            Algorithm::Alg1 if n % 2 != 0 => bad("needs an even budget"),
            Algorithm::Alg1 => Ok(()),
            Algorithm::Alg2 if n < 3 => bad("needs n >= 3 so that gamma = 1 - 2/n is positive"),
            Algorithm::Alg2 => Ok(()),
            Algorithm::Alg3 if n % 2 != 0 || n < 4 => bad("needs an even budget of at least 4"),
            Algorithm::Alg3 => Ok(()),
            Algorithm::Baseline if n < 4 => bad("needs n >= 4"),
            Algorithm::Baseline => Ok(()),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Instance family; seeded families draw a fresh instance per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Mkt { k: usize, t: f64, eps: f64 },
    FourState { eps: f64 },
    RandomMultichain(MultichainParams),
    RandomDense(RandomDenseParams),
    File { path: PathBuf },
}

impl InstanceSpec {
    pub fn generate(&self, seed: u64) -> Result<Instance> {
        match self {
            InstanceSpec::Mkt { k, t, eps } => generators::mkt(*k, *t, *eps, seed),
            InstanceSpec::FourState { eps } => generators::four_state(*eps),
            InstanceSpec::RandomMultichain(p) => generators::random_multichain(p, seed),
            InstanceSpec::RandomDense(p) => Ok(Instance { mdp: generators::random_dense(p, seed)?, reference: None }),
            InstanceSpec::File { path } => Ok(Instance { mdp: crate::io::read_mdp(path)?, reference: None }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: bool,
    pub svg: bool,
    pub json: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self { csv: true, svg: false, json: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Policy-count cap for computing `ρ*` by enumeration on instances
    /// without a known optimal policy.
    pub enumeration_cap: u128,
    /// Skip the per-iteration suboptimality and gain-preservation columns.
    pub skip_policy_metrics: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { enumeration_cap: ENUMERATION_CAP, skip_policy_metrics: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub algorithms: Vec<Algorithm>,
    /// Total operator applications per run.
    pub n: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("bench-out")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("no algorithms selected".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("no seeds given".into()));
        }
        if !(self.outputs.csv || self.outputs.svg || self.outputs.json) {
            return Err(Error::InvalidConfig("no outputs selected".into()));
        }
        for a in &self.algorithms {
            a.check_budget(self.n)?;
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_slice(bytes);
        let cfg: Self = serde_path_to_error::deserialize(&mut de)
            .map_err(|e| Error::ParseError { path: e.path().to_string(), message: e.inner().to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One CSV row. Missing metrics are `None` and written as empty cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    /// `‖T(h_t) − h_t − ρ*‖`.
    pub fpe: f64,
    /// `‖ρ^{π_t} − ρ*‖` for the greedy policy of the iterate.
    pub subopt: Option<f64>,
    /// `‖P_{π_t} ρ* − ρ*‖`.
    pub gain_pres: Option<f64>,
}

/// Runs `alg` with total budget `n`, keeping every iterate.
pub fn run_algorithm(mdp: &Mdp<f64>, alg: Algorithm, n: usize) -> Result<SolveReport<f64>> {
    alg.check_budget(n)?;
    let opts = SolveOptions::full();
    let zero = vec![0.0; mdp.n_states()];
    match alg {
        Algorithm::Vi => solvers::value_iteration(mdp, &zero, n, &opts),
        Algorithm::Alg1 => solvers::approx_shifted_halpern(mdp, &zero, n / 2, &opts),
        Algorithm::Alg2 => {
            let op = BellmanOptimality::new(mdp, alg.extraction_gamma(n)?);
            let mut r = solvers::halpern_then_picard(&op, &zero, n, &opts)?;
            r.output_policy = Some(greedy(mdp, &r.output_value, op.gamma)?);
            Ok(r)
        }
        Algorithm::Alg3 => solvers::solve_multichain(mdp, n / 2, 0.0, &opts),
        Algorithm::Baseline => solvers::dmdp_baseline(mdp, n, &opts),
    }
}

/// `ρ*` from the instance's reference policy, else by enumeration.
pub fn optimal_gain(inst: &Instance, cap: u128) -> Result<ValueVec<f64>> {
    match &inst.reference {
        Some(pi) => chain::gain(&inst.mdp, pi),
        None => Ok(oracle::optimal_gain_bruteforce_capped(&inst.mdp, cap)?.0),
    }
}

/// Per-iterate metrics of a fully retained report.
pub fn trace_rows(
    mdp: &Mdp<f64>,
    report: &SolveReport<f64>,
    extraction: DiscountFactor<f64>,
    rho_star: &[f64],
    policy_metrics: bool,
) -> Result<Vec<TraceRow>> {
    let iterates = report
        .trace
        .iterates
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("trace rows need full iterate retention".into()))?;
    let mut cache: HashMap<Vec<usize>, (f64, f64)> = HashMap::new();
    let mut rows = Vec::with_capacity(iterates.len());
    for (t, h) in iterates.iter().enumerate() {
        let th = apply_optimality(mdp, h, DiscountFactor::undiscounted())?;
        let fpe = (0..h.len()).map(|s| (th[s] - h[s] - rho_star[s]).abs()).fold(0.0, f64::max);
        let (subopt, gain_pres) = if policy_metrics {
            let pi = greedy(mdp, h, extraction)?;
            let key = pi.as_deterministic().expect("greedy is deterministic").to_vec();
            let entry = match cache.get(&key) {
                Some(v) => *v,
                None => {
                    let v = policy_metrics_for(mdp, &pi, rho_star)?;
                    cache.insert(key, v);
                    v
                }
            };
            (Some(entry.0), Some(entry.1))
        } else {
            (None, None)
        };
        rows.push(TraceRow { iter: t, fpe, subopt, gain_pres });
    }
    Ok(rows)
}

fn policy_metrics_for(mdp: &Mdp<f64>, pi: &Policy<f64>, rho: &[f64]) -> Result<(f64, f64)> {
    let g = chain::gain(mdp, pi)?;
    let subopt = g.sup_dist(rho)?;
    let p_rho = crate::bellman::policy_expect(mdp, pi, rho);
    Ok((subopt, p_rho.sup_dist(rho)?))
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv(rows: &[TraceRow], mut w: impl std::io::Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(&mut w);
    out.write_record(["iter", "fpe", "subopt", "gain_pres"])?;
    for r in rows {
        out.write_record([r.iter.to_string(), r.fpe.to_string(), cell(r.subopt), cell(r.gain_pres)])?;
    }
    out.flush()?;
    Ok(())
}

/// Static log-scale line chart of the fixed-point error, one line per run.
pub fn render_svg(title: &str, series: &[(String, Vec<TraceRow>)]) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const PAD: f64 = 60.0;
    const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
    let floor = 1e-16;
    let logs: Vec<Vec<(usize, f64)>> = series
        .iter()
        .map(|(_, rows)| rows.iter().map(|r| (r.iter, r.fpe.max(floor).log10())).collect())
        .collect();
    let all = logs.iter().flatten();
    let (mut lo, mut hi) = all.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, y)| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    lo = lo.floor();
    hi = hi.ceil().max(lo + 1.0);
    let max_t = all.map(|&(t, _)| t).max().unwrap_or(1).max(1) as f64;
    let x = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / max_t;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} L{PAD},{b} L{r},{b}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    let mut e = lo as i32;
    while e as f64 <= hi {
        let yy = y(e as f64);
        let _ = writeln!(s, r##"<line x1="{PAD}" y1="{yy:.2}" x2="{}" y2="{yy:.2}" stroke="#ddd"/>"##, W - PAD);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, PAD - 6.0, yy + 4.0);
        e += 1;
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">iteration (0..{})</text>"#, W / 2.0, H - 20.0, max_t);
    for (i, ((name, _), pts)) in series.iter().zip(&logs).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(t, v)| format!("{:.2},{:.2}", x(t), y(v))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        let ly = PAD + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - PAD - 100.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub rows: usize,
    pub final_fpe: f64,
    pub min_fpe: f64,
    pub final_subopt: Option<f64>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentIndex {
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub charts: Vec<PathBuf>,
}

/// Result of one (algorithm, seed) run, kept in memory.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub report: SolveReport<f64>,
    pub rows: Vec<TraceRow>,
}

/// Runs every (algorithm, seed) pair in parallel without touching the disk.
pub fn run_traces(config: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    config.validate()?;
    let instances: Vec<(u64, Instance, ValueVec<f64>)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = config.instance.generate(seed)?;
            let rho = optimal_gain(&inst, config.tolerances.enumeration_cap)?;
            Ok((seed, inst, rho))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, Algorithm)> =
        (0..instances.len()).flat_map(|i| config.algorithms.iter().map(move |&a| (i, a))).collect();
    jobs.par_iter()
        .map(|&(i, alg)| {
            let (seed, inst, rho) = &instances[i];
            let report = run_algorithm(&inst.mdp, alg, config.n)?;
            let rows = trace_rows(
                &inst.mdp,
                &report,
                alg.extraction_gamma(config.n)?,
                rho,
                !config.tolerances.skip_policy_metrics,
            )?;
            Ok(RunOutput { algorithm: alg, seed: *seed, report, rows })
        })
        .collect()
}

/// Runs the experiment and writes its artifacts under `config.out_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentIndex> {
    let runs = run_traces(config)?;
    let dir = &config.out_dir;
    fs::create_dir_all(dir)?;
    let summaries: Vec<RunSummary> = runs
        .par_iter()
        .map(|run| write_run(dir, config.outputs, run))
        .collect::<Result<_>>()?;
    let mut charts = Vec::new();
    if config.outputs.svg {
        for &seed in &config.seeds {
            let series: Vec<(String, Vec<TraceRow>)> = runs
                .iter()
                .filter(|r| r.seed == seed)
                .map(|r| (r.algorithm.name().to_string(), r.rows.clone()))
                .collect();
            let path = dir.join(format!("fpe_seed{seed}.svg"));
            fs::write(&path, render_svg(&format!("fixed-point error, seed {seed}"), &series))?;
            charts.push(path);
        }
    }
    let index = ExperimentIndex { config: config.clone(), runs: summaries, charts };
    let bytes = serde_json::to_vec_pretty(&index).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("index.json"), bytes)?;
    Ok(index)
}

fn write_run(dir: &Path, outputs: Outputs, run: &RunOutput) -> Result<RunSummary> {
    let stem = format!("{}_seed{}", run.algorithm.name(), run.seed);
    let csv = if outputs.csv {
        let path = dir.join(format!("{stem}.csv"));
        write_csv(&run.rows, fs::File::create(&path)?)?;
        Some(path)
    } else {
        None
    };
    let json = if outputs.json {
        let path = dir.join(format!("{stem}.json"));
        let bytes = serde_json::to_vec_pretty(&run.report).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(&path, bytes)?;
        Some(path)
    } else {
        None
    };
    let last = run.rows.last().expect("traces are nonempty");
    Ok(RunSummary {
        algorithm: run.algorithm,
        seed: run.seed,
        rows: run.rows.len(),
        final_fpe: last.fpe,
        min_fpe: run.rows.iter().map(|r| r.fpe).fold(f64::INFINITY, f64::min),
        final_subopt: last.subopt,
        csv,
        json,
    })
}
