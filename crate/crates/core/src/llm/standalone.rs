use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::extract::{extract_program, lisp_to_smtlib, ConvertError, ExtractedFun};
use super::prompts::{render_prompt, PromptContext, PromptKind};
use super::{query, Backend, Conversation, LlmError};
use crate::cegis::{Solver, SolverError, Verdict};
use crate::frontend::SynthProblem;
use crate::term::{Dialect, Term};

pub const DEFAULT_ATTEMPTS: usize = 6;

/// How Lisp answers become SMT-LIB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conversion {
    /// Convert locally; ask the model only when an operator is unknown.
    #[default]
    Local,
    /// Always ask the model to convert.
    Model,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StandaloneError {
    /// The backend failed; `partial` holds what was gathered before.
    #[error("{error}")]
    Llm { error: LlmError, partial: Box<StandaloneResult> },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandaloneResult {
    pub solution: Option<Term>,
    /// Parsed programs that failed verification, in the order proposed.
    pub collected: Vec<Term>,
    pub attempts: usize,
    pub llm_calls: u64,
    pub verifier_calls: u64,
    pub llm_s: f64,
    pub verify_s: f64,
}

struct Session<'a> {
    backend: &'a mut dyn Backend,
    conv: Conversation,
    calls: u64,
    elapsed: f64,
}

impl Session<'_> {
    fn ask(&mut self, prompt: &str) -> Result<String, LlmError> {
        let t0 = Instant::now();
        self.calls += 1;
        let r = query(self.backend, &mut self.conv, prompt);
        self.elapsed += t0.elapsed().as_secs_f64();
        r
    }
}

fn convert(
    ex: &ExtractedFun,
    p: &SynthProblem,
    mode: Conversion,
    session: &mut Session<'_>,
) -> Result<Option<Term>, LlmError> {
    let local = lisp_to_smtlib(ex, p);
    let ask_model = ex.dialect == Dialect::Lisp
        && (mode == Conversion::Model || matches!(local, Err(ConvertError::UnsupportedOperator(_))));
    if !ask_model {
        return Ok(match local {
            Ok(f) => Some(f.body),
            Err(e) => {
                log::info!("discarding `{}`: {e}", ex.name);
                None
            }
        });
    }
    let ctx = PromptContext {
        lisp: Some(ex.text.clone()),
        ..PromptContext::default()
    };
    let reply = session.ask(&render_prompt(PromptKind::ConvertToSmtlib, p, &ctx).expect("Lisp text given"))?;
    Ok(extract_program(&reply)
        .ok()
        .filter(|f| f.dialect == Dialect::SmtLib)
        .and_then(|f| lisp_to_smtlib(&f, p).ok())
        .map(|f| f.body))
}

/// Prompts for complete solutions, verifying each, for at most
/// `max_attempts` replies. Invariant problems get one explanation prompt first.
pub fn standalone_solve(
    p: &SynthProblem,
    backend: &mut dyn Backend,
    solver: &mut Solver,
    max_attempts: usize,
    mode: Conversion,
) -> Result<StandaloneResult, StandaloneError> {
    assert!(max_attempts >= 1, "at least one attempt");
    let mut session = Session {
        backend,
        conv: Conversation::new(),
        calls: 0,
        elapsed: 0.0,
    };
    let mut out = StandaloneResult {
        solution: None,
        collected: Vec::new(),
        attempts: 0,
        llm_calls: 0,
        verifier_calls: 0,
        llm_s: 0.0,
        verify_s: 0.0,
    };
    let ctx = PromptContext::default();
    let result = loop {
        if p.is_invariant() && session.calls == 0 {
            let prompt = render_prompt(PromptKind::ExplainInvariant, p, &ctx).expect("no context needed");
            if let Err(e) = session.ask(&prompt) {
                break Err(Failure::Llm(e));
            }
        }
        if out.attempts == max_attempts {
            break Ok(());
        }
        let kind = if out.attempts == 0 {
            PromptKind::InitialSolve
        } else {
            PromptKind::Retry
        };
        out.attempts += 1;
        let reply = match session.ask(&render_prompt(kind, p, &ctx).expect("no context needed")) {
            Ok(r) => r,
            Err(e) => break Err(Failure::Llm(e)),
        };
        let ex = match extract_program(&reply) {
            Ok(ex) => ex,
            Err(e) => {
                log::info!("attempt {}: {e}", out.attempts);
                continue;
            }
        };
        let term = match convert(&ex, p, mode, &mut session) {
            Ok(Some(t)) => t,
            Ok(None) => continue,
            Err(e) => break Err(Failure::Llm(e)),
        };
        let t0 = Instant::now();
        let verdict = solver.verify(&term, p);
        out.verify_s += t0.elapsed().as_secs_f64();
        out.verifier_calls += 1;
        match verdict {
            Ok(Verdict::Valid) => {
                out.solution = Some(term);
                break Ok(());
            }
            Ok(_) => {
                if !out.collected.contains(&term) {
                    out.collected.push(term);
                }
            }
            Err(e) => break Err(Failure::Solver(e)),
        }
    };
    out.llm_calls = session.calls;
    out.llm_s = session.elapsed;
    match result {
        Ok(()) => Ok(out),
        Err(Failure::Llm(error)) => Err(StandaloneError::Llm {
            error,
            partial: Box::new(out),
        }),
        Err(Failure::Solver(e)) => Err(StandaloneError::Solver(e)),
    }
}

enum Failure {
    Llm(LlmError),
    Solver(SolverError),
}
