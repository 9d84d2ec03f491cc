use std::time::Instant;

use super::extract::{extract_all, helper_to_fundef};
use super::prompts::{render_prompt, PromptContext, PromptKind};
use super::{query, Backend, Conversation};
use crate::enumerate::{FeedbackHook, SententialForm};
use crate::frontend::SynthProblem;
use crate::grammar::{apply_weight_counts, augment, WeightedGrammar};
use crate::interp::Counterexample;
use crate::term::{FunDef, Term};

/// Asks the model for helper functions that could fill the holes of the
/// current partial program, then folds them into the grammar: their rule
/// counts are added first, then each helper becomes a new rule.
pub struct SyntacticFeedback {
    problem: SynthProblem,
    backend: Box<dyn Backend>,
    last_failed: Option<(Term, Option<Counterexample>)>,
    calls: u64,
    llm_s: f64,
    helpers_added: u64,
}

impl SyntacticFeedback {
    pub fn new(problem: SynthProblem, backend: Box<dyn Backend>) -> SyntacticFeedback {
        SyntacticFeedback {
            problem,
            backend,
            last_failed: None,
            calls: 0,
            llm_s: 0.0,
            helpers_added: 0,
        }
    }

    /// Seconds spent waiting on the backend.
    pub fn llm_seconds(&self) -> f64 {
        self.llm_s
    }

    pub fn helpers_added(&self) -> u64 {
        self.helpers_added
    }

    /// Grammar after folding in the helpers found in `reply`.
    pub fn fold_reply(&mut self, wg: &WeightedGrammar, reply: &str) -> WeightedGrammar {
        let mut helpers: Vec<FunDef> = Vec::new();
        for ex in extract_all(reply) {
            match helper_to_fundef(&ex, &helpers, &self.problem) {
                Ok(f) => helpers.push(f),
                Err(e) => log::info!("discarding helper `{}`: {e}", ex.name),
            }
        }
        if helpers.is_empty() {
            log::info!("feedback reply contained no usable helper");
            return wg.clone();
        }
        let mut out = apply_weight_counts(wg, &helpers);
        for h in &helpers {
            match augment(&out, h) {
                Ok(next) => {
                    self.helpers_added += 1;
                    out = next;
                }
                Err(e) => log::info!("{e}"),
            }
        }
        out
    }
}

impl FeedbackHook for SyntacticFeedback {
    fn feedback(&mut self, wg: &WeightedGrammar, partial: &SententialForm, _cexs: &[Counterexample]) -> WeightedGrammar {
        let ctx = PromptContext {
            partial: Some(partial.render_holes(&wg.grammar)),
            last_failed: self.last_failed.clone(),
            lisp: None,
        };
        let prompt = render_prompt(PromptKind::IntegratedHelper, &self.problem, &ctx).expect("partial program given");
        let mut conv = Conversation::new();
        self.calls += 1;
        let t0 = Instant::now();
        let reply = query(self.backend.as_mut(), &mut conv, &prompt);
        self.llm_s += t0.elapsed().as_secs_f64();
        match reply {
            Ok(r) => self.fold_reply(wg, &r),
            Err(e) => {
                log::warn!("feedback query failed, grammar unchanged: {e}");
                wg.clone()
            }
        }
    }

    fn note_failure(&mut self, candidate: &Term, cex: Option<&Counterexample>) {
        self.last_failed = Some((candidate.clone(), cex.cloned()));
    }

    fn calls(&self) -> u64 {
        self.calls
    }
}
