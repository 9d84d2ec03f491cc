//! Counterexample-guided loop around an [`Engine`] and an SMT verifier.

mod smt;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::enumerate::{EnumError, Engine};
use crate::frontend::SynthProblem;
use crate::interp::{check_cex, Counterexample};
use crate::term::Term;

pub use smt::{parse_model, Solver, SolverConfig, SolverError, Verdict, DEFAULT_QUERY_TIMEOUT};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub candidates_enumerated: u64,
    pub verifier_calls: u64,
    pub llm_calls: u64,
    pub counterexamples: u64,
    pub enumerate_s: f64,
    pub verify_s: f64,
    pub llm_s: f64,
}

impl SolveStats {
    pub fn absorb(&mut self, other: &SolveStats) {
        self.candidates_enumerated += other.candidates_enumerated;
        self.verifier_calls += other.verifier_calls;
        self.llm_calls += other.llm_calls;
        self.counterexamples += other.counterexamples;
        self.enumerate_s += other.enumerate_s;
        self.verify_s += other.verify_s;
        self.llm_s += other.llm_s;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Solved(Term),
    TimedOut,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub outcome: Outcome,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn solution(&self) -> Option<&Term> {
        match &self.outcome {
            Outcome::Solved(t) => Some(t),
            _ => None,
        }
    }
}

/// Runs CEGIS until a verified solution, the deadline, or an error.
pub fn cegis(engine: &mut dyn Engine, p: &SynthProblem, solver: &mut Solver, deadline: Option<Instant>) -> SolveResult {
    let mut stats = SolveStats::default();
    let mut cexs: Vec<Counterexample> = Vec::new();
    let outcome = loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break Outcome::TimedOut;
        }
        let t0 = Instant::now();
        let next = engine.next_candidate(&cexs, deadline);
        stats.enumerate_s += t0.elapsed().as_secs_f64();
        let candidate = match next {
            Ok(c) => c,
            Err(EnumError::BudgetExhausted) => break Outcome::TimedOut,
            Err(e) => break Outcome::Failed(e.to_string()),
        };
        match check_cex(&candidate, p, &cexs) {
            Ok(true) => {}
            Ok(false) => break Outcome::Failed(format!("enumerator returned {candidate}, which fails a stored counterexample")),
            Err(e) => break Outcome::Failed(e.to_string()),
        }
        let mut timeout = solver.config().query_timeout;
        if let Some(d) = deadline {
            timeout = timeout.min(d.saturating_duration_since(Instant::now()).max(Duration::from_millis(1)));
        }
        let t0 = Instant::now();
        let verdict = solver.verify_within(&candidate, p, timeout);
        stats.verify_s += t0.elapsed().as_secs_f64();
        stats.verifier_calls += 1;
        match verdict {
            Ok(Verdict::Valid) => break Outcome::Solved(candidate),
            Ok(Verdict::Invalid(c)) => {
                log::debug!("{candidate} fails on {c}");
                engine.note_failure(&candidate, Some(&c));
                if cexs.contains(&c) {
                    break Outcome::Failed(format!("counterexample {c} repeated"));
                }
                cexs.push(c);
            }
            Ok(Verdict::Unknown(reason)) => {
                log::warn!("verification of {candidate} inconclusive: {reason}");
                engine.note_failure(&candidate, None);
            }
            Err(e) => break Outcome::Failed(e.to_string()),
        }
    };
    stats.candidates_enumerated = engine.candidates();
    stats.llm_calls = engine.feedback_calls();
    stats.counterexamples = cexs.len() as u64;
    SolveResult { outcome, stats }
}

/// Verifies with a freshly started solver process.
pub fn reverify(candidate: &Term, p: &SynthProblem, cfg: &SolverConfig) -> Result<Verdict, SolverError> {
    Solver::new(cfg.clone()).verify(candidate, p)
}
