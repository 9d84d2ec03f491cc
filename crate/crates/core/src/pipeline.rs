//! Wiring of the experimental modes, single-problem runs and directory sweeps.

use std::collections::HashMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cegis::{cegis, reverify, Outcome, SolveStats, Solver, SolverConfig, Verdict};
use crate::enumerate::{AStar, Engine, SearchLimits, TopDown, DEFAULT_FEEDBACK_INTERVAL, DEFAULT_MAX_DEPTH};
use crate::frontend::{anonymize, expand_inv_constraints, parse_problem, FrontendError, NameMap, SynthProblem};
use crate::grammar::{build_pcfg, weights_from_programs_with, WeightedGrammar, DEFAULT_GAMMA};
use crate::llm::{
    make_backend, standalone_solve, Backend, BackendConfig, Conversion, LlmError, StandaloneError, StandaloneResult,
    SyntacticFeedback, DEFAULT_ATTEMPTS,
};
use crate::par::Exec;
use crate::term::{FunDef, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    LlmOnly,
    EPcfg,
    AstarPcfg,
    LlmThenEPcfg,
    LlmThenAstarPcfg,
    EIllm,
    AstarIllm,
    EnumBaseline,
    AstarBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Search {
    TopDown,
    AStar,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::LlmOnly,
        Mode::EPcfg,
        Mode::AstarPcfg,
        Mode::LlmThenEPcfg,
        Mode::LlmThenAstarPcfg,
        Mode::EIllm,
        Mode::AstarIllm,
        Mode::EnumBaseline,
        Mode::AstarBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::LlmOnly => "llm-only",
            Mode::EPcfg => "e-pcfg",
            Mode::AstarPcfg => "astar-pcfg",
            Mode::LlmThenEPcfg => "llm-then-e-pcfg",
            Mode::LlmThenAstarPcfg => "llm-then-astar-pcfg",
            Mode::EIllm => "e-illm",
            Mode::AstarIllm => "astar-illm",
            Mode::EnumBaseline => "enum-baseline",
            Mode::AstarBaseline => "astar-baseline",
        }
    }

    fn search(self) -> Option<Search> {
        match self {
            Mode::LlmOnly => None,
            Mode::EPcfg | Mode::LlmThenEPcfg | Mode::EIllm | Mode::EnumBaseline => Some(Search::TopDown),
            Mode::AstarPcfg | Mode::LlmThenAstarPcfg | Mode::AstarIllm | Mode::AstarBaseline => Some(Search::AStar),
        }
    }

    fn is_pcfg(self) -> bool {
        matches!(self, Mode::EPcfg | Mode::AstarPcfg | Mode::LlmThenEPcfg | Mode::LlmThenAstarPcfg)
    }

    fn is_illm(self) -> bool {
        matches!(self, Mode::EIllm | Mode::AstarIllm)
    }

    /// Whether a valid stand-alone answer ends the run.
    fn llm_answer_wins(self) -> bool {
        matches!(self, Mode::LlmOnly | Mode::LlmThenEPcfg | Mode::LlmThenAstarPcfg)
    }

    pub fn needs_backend(self) -> bool {
        matches!(self, Mode::LlmOnly | Mode::EIllm | Mode::AstarIllm)
    }

    pub fn default_temperature(self) -> f64 {
        match self {
            Mode::AstarIllm => 0.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Mode, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub solver: SolverConfig,
    /// Language-model backend; modes that need one fail without it.
    pub llm: Option<BackendConfig>,
    pub seed: u64,
    pub timeout_s: f64,
    pub max_depth: usize,
    /// Feedback interval `n` of the integrated modes.
    pub feedback_interval: u64,
    pub gamma: f64,
    /// Smoothing exponent for the top-down sampler; unsmoothed when unset.
    pub topdown_smoothing: Option<f64>,
    pub repeats: usize,
    /// Stand-alone solving attempts.
    pub attempts: usize,
    pub conversion: Conversion,
    /// Rule weights for the pCFG modes, a JSON object keyed by rule text.
    /// Takes precedence over prompting.
    pub weights: Option<PathBuf>,
    pub candidate_budget: Option<u64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            solver: SolverConfig::default(),
            llm: None,
            seed: 0,
            timeout_s: 600.0,
            max_depth: DEFAULT_MAX_DEPTH,
            feedback_interval: DEFAULT_FEEDBACK_INTERVAL,
            gamma: DEFAULT_GAMMA,
            topdown_smoothing: None,
            repeats: 1,
            attempts: DEFAULT_ATTEMPTS,
            conversion: Conversion::Local,
            weights: None,
            candidate_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Solved,
    /// The stand-alone model ran out of attempts.
    Unsolved,
    Timeout,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub category: String,
    pub mode: Mode,
    pub seed: u64,
    pub solved: bool,
    pub status: Status,
    pub elapsed_s: f64,
    pub candidates: u64,
    pub verifier_calls: u64,
    pub llm_calls: u64,
    pub counterexamples: u64,
    /// `define-fun` of the solution in the original names.
    pub solution: Option<String>,
    pub error: Option<String>,
}

impl RunRecord {
    fn new(benchmark: &str, category: &str, mode: Mode, seed: u64) -> RunRecord {
        RunRecord {
            benchmark: benchmark.to_string(),
            category: category.to_string(),
            mode,
            seed,
            solved: false,
            status: Status::Error,
            elapsed_s: 0.0,
            candidates: 0,
            verifier_calls: 0,
            llm_calls: 0,
            counterexamples: 0,
            solution: None,
            error: None,
        }
    }

    /// The record with wall-clock time cleared, for run-to-run comparison.
    pub fn timing_free(&self) -> RunRecord {
        RunRecord {
            elapsed_s: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Frontend { path: String, source: FrontendError },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("configuration: {0}")]
    Config(String),
}

/// A finished run: the record plus the solution as a definition.
#[derive(Debug, Clone)]
pub struct Run {
    pub record: RunRecord,
    pub solution: Option<FunDef>,
}

pub fn load_problem(path: &Path) -> Result<SynthProblem, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|source| PipelineError::Frontend {
        path: path.display().to_string(),
        source,
    })
}

pub fn solve_file(path: &Path, mode: Mode, cfg: &Config) -> Result<Run, PipelineError> {
    let p = load_problem(path)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    solve_problem(&name, &p, mode, cfg, cfg.seed, Exec::auto())
}

fn backend_for(mode: Mode, cfg: &Config) -> Result<Option<Box<dyn Backend>>, PipelineError> {
    let Some(b) = &cfg.llm else {
        if mode.needs_backend() {
            return Err(PipelineError::Config(format!("mode {mode} needs an [llm] backend")));
        }
        return Ok(None);
    };
    let mut b = b.clone();
    b.temperature = Some(b.temperature.unwrap_or(mode.default_temperature()));
    Ok(Some(make_backend(&b)?))
}

/// Rule weights read from `path`, in the original grammar's rule texts.
/// Rules not listed get weight 0.
pub fn load_weights(path: &Path, original: &SynthProblem, anon: &SynthProblem) -> Result<WeightedGrammar, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let table: HashMap<String, f64> =
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    let g = &original.grammar;
    let mut weights = vec![0.0; g.rules().len()];
    for (rule, w) in table {
        let id = g
            .rule_by_text(&rule)
            .ok_or_else(|| PipelineError::Config(format!("{}: no rule `{rule}`", path.display())))?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(PipelineError::Config(format!("{}: bad weight {w} for `{rule}`", path.display())));
        }
        weights[id as usize] = w;
    }
    Ok(WeightedGrammar::new(anon.grammar.clone(), weights))
}

/// Stand-alone phase. Running out of scripted replies ends it quietly;
/// other backend errors are fatal only when `fatal` is set.
fn prompt_phase(
    anon: &SynthProblem,
    backend: &mut dyn Backend,
    solver: &mut Solver,
    cfg: &Config,
    fatal: bool,
) -> Result<StandaloneResult, PipelineError> {
    match standalone_solve(anon, backend, solver, cfg.attempts.max(1), cfg.conversion) {
        Ok(r) => Ok(r),
        Err(StandaloneError::Llm { error, partial }) => {
            if fatal && error != LlmError::ScriptExhausted {
                return Err(error.into());
            }
            log::warn!("prompting stopped: {error}");
            Ok(*partial)
        }
        Err(StandaloneError::Solver(e)) => Err(PipelineError::Io(format!("solver: {e}"))),
    }
}

fn engine_wg(mode: Mode, anon: &SynthProblem, original: &SynthProblem, cfg: &Config, learned: Option<&[Term]>) -> Result<WeightedGrammar, PipelineError> {
    let ones = || WeightedGrammar::uniform(anon.grammar.clone(), 1.0);
    if !mode.is_pcfg() {
        return Ok(ones());
    }
    if let Some(path) = &cfg.weights {
        if path.exists() {
            return load_weights(path, original, anon);
        }
        log::warn!("weights file {} not found, using all-ones weights", path.display());
        return Ok(ones());
    }
    match learned {
        Some(progs) if !progs.is_empty() => {
            let wg = weights_from_programs_with(&anon.grammar, progs, Exec::Sequential);
            if wg.weights.iter().all(|w| *w == 0.0) {
                log::warn!("no proposed program lies in the grammar, using all-ones weights");
                return Ok(ones());
            }
            Ok(wg)
        }
        Some(_) => {
            log::warn!("the model proposed no usable program, using all-ones weights");
            Ok(ones())
        }
        None => {
            log::warn!("no weights file and no backend, using all-ones weights");
            Ok(ones())
        }
    }
}

fn build_engine(
    search: Search,
    wg: WeightedGrammar,
    anon: &SynthProblem,
    cfg: &Config,
    seed: u64,
    hook: Option<SyntacticFeedback>,
    exec: Exec,
) -> Result<Box<dyn Engine>, String> {
    let limits = SearchLimits {
        max_depth: cfg.max_depth,
        feedback_interval: hook.as_ref().map(|_| cfg.feedback_interval.max(1)),
        candidate_budget: cfg.candidate_budget,
        wall_clock: None,
        seed,
    };
    Ok(match search {
        Search::TopDown => {
            let mut smoothing = cfg.topdown_smoothing;
            if smoothing.is_none() && build_pcfg(&wg).is_err() {
                log::warn!("weights leave a nonterminal without support, smoothing with gamma {}", cfg.gamma);
                smoothing = Some(cfg.gamma);
            }
            let mut e = TopDown::new(wg, anon, limits, smoothing).map_err(|e| e.to_string())?.with_exec(exec);
            if let Some(h) = hook {
                e = e.with_feedback(Box::new(h));
            }
            Box::new(e)
        }
        Search::AStar => {
            let mut e = AStar::new(wg, anon, limits, cfg.gamma).map_err(|e| e.to_string())?.with_exec(exec);
            if let Some(h) = hook {
                e = e.with_feedback(Box::new(h));
            }
            Box::new(e)
        }
    })
}

fn category(p: &SynthProblem) -> String {
    p.logic.to_string()
}

/// Runs one mode on one parsed problem. Problem-level failures (timeouts,
/// solver errors during search) are reported in the record; configuration
/// and backend setup errors are returned.
pub fn solve_problem(name: &str, original: &SynthProblem, mode: Mode, cfg: &Config, seed: u64, exec: Exec) -> Result<Run, PipelineError> {
    let start = Instant::now();
    let deadline = start + Duration::try_from_secs_f64(cfg.timeout_s.max(0.0)).unwrap_or(Duration::MAX / 4);
    let mut rec = RunRecord::new(name, &category(original), mode, seed);
    let prepared = if original.is_invariant() {
        expand_inv_constraints(original).map_err(|source| PipelineError::Frontend {
            path: name.to_string(),
            source,
        })?
    } else {
        original.clone()
    };
    let (anon, map) = anonymize(&prepared);
    let mut backend = backend_for(mode, cfg)?;
    let mut solver = Solver::new(cfg.solver.clone());
    let mut stats = SolveStats::default();

    let mut answer: Option<Term> = None;
    let mut learned: Option<Vec<Term>> = None;
    let prompts_first = mode == Mode::LlmOnly || (mode.is_pcfg() && cfg.weights.is_none());
    if let (true, Some(b)) = (prompts_first, backend.as_deref_mut()) {
        let r = prompt_phase(&anon, b, &mut solver, cfg, mode == Mode::LlmOnly)?;
        stats.llm_calls += r.llm_calls;
        stats.verifier_calls += r.verifier_calls;
        stats.llm_s += r.llm_s;
        stats.verify_s += r.verify_s;
        let mut progs = r.collected.clone();
        progs.extend(r.solution.iter().cloned());
        learned = Some(progs);
        answer = r.solution;
    }

    let outcome = if mode.llm_answer_wins() && answer.is_some() {
        Outcome::Solved(answer.take().expect("checked"))
    } else if let Some(search) = mode.search() {
        let wg = engine_wg(mode, &anon, &prepared, cfg, learned.as_deref())?;
        let hook = if mode.is_illm() {
            let b = backend.take().expect("integrated modes require a backend");
            Some(SyntacticFeedback::new(anon.clone(), b))
        } else {
            None
        };
        match build_engine(search, wg, &anon, cfg, seed, hook, exec) {
            Ok(mut engine) => {
                let r = cegis(engine.as_mut(), &anon, &mut solver, Some(deadline));
                stats.absorb(&r.stats);
                r.outcome
            }
            Err(e) => Outcome::Failed(e),
        }
    } else {
        rec.status = Status::Unsolved;
        Outcome::Failed(String::new())
    };

    rec.candidates = stats.candidates_enumerated;
    rec.verifier_calls = stats.verifier_calls;
    rec.llm_calls = stats.llm_calls;
    rec.counterexamples = stats.counterexamples;
    let mut solution = None;
    match outcome {
        Outcome::Solved(t) => {
            let def = restore(&prepared, &map, &t);
            match reverify(&def.body, &prepared, &cfg.solver) {
                Ok(Verdict::Valid) => {
                    rec.solved = true;
                    rec.status = Status::Solved;
                    rec.solution = Some(def.to_smtlib_line());
                    solution = Some(def);
                }
                other => {
                    rec.status = Status::Failed;
                    rec.error = Some(format!("re-verification rejected {}: {other:?}", def.to_smtlib_line()));
                }
            }
        }
        Outcome::TimedOut => rec.status = Status::Timeout,
        Outcome::Failed(reason) => {
            if rec.status != Status::Unsolved {
                rec.status = Status::Failed;
                rec.error = Some(reason);
            }
        }
    }
    rec.elapsed_s = start.elapsed().as_secs_f64();
    Ok(Run { record: rec, solution })
}

fn restore(prepared: &SynthProblem, map: &NameMap, t: &Term) -> FunDef {
    prepared.candidate(map.inverse().apply_term(t))
}

/// `.sl` files under `dir`, recursively, sorted.
pub fn benchmark_files(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = std::fs::read_dir(&d).map_err(|e| PipelineError::Io(format!("{}: {e}", d.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| PipelineError::Io(e.to_string()))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "sl") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn run_isolated(dir: &Path, path: &Path, mode: Mode, cfg: &Config, seed: u64) -> RunRecord {
    let name = path
        .strip_prefix(dir)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/");
    let start = Instant::now();
    let failed = |category: &str, msg: String| RunRecord {
        error: Some(msg),
        elapsed_s: start.elapsed().as_secs_f64(),
        ..RunRecord::new(&name, category, mode, seed)
    };
    let p = match load_problem(path) {
        Ok(p) => p,
        Err(e) => return failed("unknown", e.to_string()),
    };
    match catch_unwind(AssertUnwindSafe(|| solve_problem(&name, &p, mode, cfg, seed, Exec::Sequential))) {
        Ok(Ok(run)) => run.record,
        Ok(Err(e)) => failed(&category(&p), e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            failed(&category(&p), format!("crashed: {msg}"))
        }
    }
}

/// Runs every (benchmark, mode, repeat) triple; repeat `r` uses seed
/// `cfg.seed + r`. Records come back in benchmark, mode, repeat order.
pub fn bench(dir: &Path, modes: &[Mode], cfg: &Config, exec: Exec) -> Result<Vec<RunRecord>, PipelineError> {
    let files = benchmark_files(dir)?;
    let mut jobs = Vec::new();
    for f in &files {
        for &m in modes {
            for r in 0..cfg.repeats.max(1) {
                jobs.push((f.clone(), m, cfg.seed + r as u64));
            }
        }
    }
    Ok(exec.map(&jobs, |(f, m, seed)| run_isolated(dir, f, *m, cfg, *seed)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mode: Mode,
    pub category: String,
    pub runs: usize,
    pub solved: usize,
    /// Mean wall-clock time over solved runs only.
    pub mean_time_s: Option<f64>,
}

/// Solve counts and mean solved-run times per (mode, category), in first-seen order.
pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut rows: Vec<(Aggregate, f64)> = Vec::new();
    for r in records {
        let i = match rows.iter().position(|(a, _)| a.mode == r.mode && a.category == r.category) {
            Some(i) => i,
            None => {
                rows.push((
                    Aggregate {
                        mode: r.mode,
                        category: r.category.clone(),
                        runs: 0,
                        solved: 0,
                        mean_time_s: None,
                    },
                    0.0,
                ));
                rows.len() - 1
            }
        };
        let (a, total) = &mut rows[i];
        a.runs += 1;
        if r.solved {
            a.solved += 1;
            *total += r.elapsed_s;
        }
    }
    rows.into_iter()
        .map(|(mut a, total)| {
            if a.solved > 0 {
                a.mean_time_s = Some(total / a.solved as f64);
            }
            a
        })
        .collect()
}
