use std::collections::HashSet;
use std::time::Instant;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{past, EnumError, Engine, FeedbackHook, SearchLimits, SententialForm, TraceEvent, Tracer};
use crate::frontend::SynthProblem;
use crate::grammar::{build_pcfg, NtId, ProbGrammar, RuleId, Symbol, WeightedGrammar};
use crate::interp::{check_cex_with, Counterexample};
use crate::par::Exec;
use crate::term::Term;

type Categorical = Option<(Vec<RuleId>, WeightedIndex<f64>)>;

fn categorical(rules: Vec<RuleId>, weight: impl Fn(RuleId) -> f64) -> Categorical {
    let ws: Vec<f64> = rules.iter().map(|r| weight(*r)).collect();
    WeightedIndex::new(&ws).ok().map(|d| (rules, d))
}

/// Per-nonterminal categorical distributions over a pCFG's rules.
#[derive(Debug, Clone)]
pub struct RuleSampler {
    pg: ProbGrammar,
    full: Vec<Categorical>,
    terminal: Vec<Categorical>,
    /// Distribution used to close a form at the depth limit when a
    /// nonterminal has no terminal rule: rules of minimal closing rank.
    closing: Vec<Categorical>,
}

/// Closing rank: 0 for nonterminals with a positive-probability terminal
/// rule, otherwise one more than the best rule's worst hole.
fn closing_ranks(pg: &ProbGrammar) -> Vec<Option<u32>> {
    let g = &pg.grammar;
    let n = g.nonterminals().len();
    let mut rank: Vec<Option<u32>> = (0..n as NtId)
        .map(|nt| g.rules_for(nt).iter().any(|r| pg.p_terminal(*r) > 0.0).then_some(0))
        .collect();
    loop {
        let mut changed = false;
        for nt in 0..n as NtId {
            for &r in g.rules_for(nt) {
                if pg.p(r) <= 0.0 || g.rule(r).is_terminal() {
                    continue;
                }
                let worst = g
                    .rule(r)
                    .holes()
                    .map(|h| rank[h as usize])
                    .try_fold(0, |acc, x| x.map(|x| acc.max(x)));
                if let Some(w) = worst {
                    if rank[nt as usize].is_none_or(|cur| w + 1 < cur) {
                        rank[nt as usize] = Some(w + 1);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return rank;
        }
    }
}

impl RuleSampler {
    pub fn new(pg: ProbGrammar) -> RuleSampler {
        let g = &pg.grammar;
        let ranks = closing_ranks(&pg);
        let mut full = Vec::new();
        let mut terminal = Vec::new();
        let mut closing = Vec::new();
        for nt in 0..g.nonterminals().len() as NtId {
            let rules = g.rules_for(nt);
            full.push(categorical(
                rules.iter().copied().filter(|r| pg.p(*r) > 0.0).collect(),
                |r| pg.p(r),
            ));
            terminal.push(categorical(
                rules.iter().copied().filter(|r| pg.p_terminal(*r) > 0.0).collect(),
                |r| pg.p_terminal(r),
            ));
            closing.push(match ranks[nt as usize] {
                Some(k) if k > 0 => categorical(
                    rules
                        .iter()
                        .copied()
                        .filter(|r| {
                            pg.p(*r) > 0.0
                                && !g.rule(*r).is_terminal()
                                && g.rule(*r).holes().all(|h| ranks[h as usize].is_some_and(|x| x < k))
                        })
                        .collect(),
                    |r| pg.p(r),
                ),
                _ => None,
            });
        }
        RuleSampler {
            pg,
            full,
            terminal,
            closing,
        }
    }

    pub fn pcfg(&self) -> &ProbGrammar {
        &self.pg
    }

    fn draw(&self, table: &[Categorical], nt: NtId, rng: &mut ChaCha8Rng) -> Result<RuleId, EnumError> {
        match &table[nt as usize] {
            Some((rules, dist)) => Ok(rules[dist.sample(rng)]),
            None => Err(EnumError::EmptySupport(self.pg.grammar.nonterminal(nt).name.clone())),
        }
    }

    /// Rule drawn from `P` for `nt`.
    pub fn sample(&self, nt: NtId, rng: &mut ChaCha8Rng) -> Result<RuleId, EnumError> {
        self.draw(&self.full, nt, rng)
    }

    /// Terminal rule drawn from `P_Σ` for `nt`.
    pub fn sample_terminal(&self, nt: NtId, rng: &mut ChaCha8Rng) -> Result<RuleId, EnumError> {
        self.draw(&self.terminal, nt, rng)
    }

    fn sample_closing(&self, nt: NtId, rng: &mut ChaCha8Rng) -> Result<RuleId, EnumError> {
        if self.terminal[nt as usize].is_some() {
            return self.sample_terminal(nt, rng);
        }
        self.draw(&self.closing, nt, rng)
    }
}

fn expand_all(
    s: &SententialForm,
    sampler: &RuleSampler,
    rng: &mut ChaCha8Rng,
    pick: fn(&RuleSampler, NtId, &mut ChaCha8Rng) -> Result<RuleId, EnumError>,
) -> Result<SententialForm, EnumError> {
    let g = &sampler.pg.grammar;
    let mut symbols = Vec::with_capacity(s.symbols.len() * 2);
    let mut derivation = s.derivation.clone();
    for sym in &s.symbols {
        match sym {
            Symbol::Hole(nt) => {
                let r = pick(sampler, *nt, rng)?;
                symbols.extend_from_slice(&g.rule(r).rhs);
                derivation.0.push(r);
            }
            other => symbols.push(*other),
        }
    }
    Ok(SententialForm { symbols, derivation })
}

/// Expands every hole present on entry once, with a rule drawn from `P`.
pub fn replace_nonterminals(
    s: &SententialForm,
    sampler: &RuleSampler,
    rng: &mut ChaCha8Rng,
) -> Result<SententialForm, EnumError> {
    expand_all(s, sampler, rng, RuleSampler::sample)
}

/// Fills every hole with a terminal rule drawn from `P_Σ`.
pub fn complete_program(
    s: &SententialForm,
    sampler: &RuleSampler,
    rng: &mut ChaCha8Rng,
) -> Result<SententialForm, EnumError> {
    expand_all(s, sampler, rng, RuleSampler::sample_terminal)
}

/// Like [`complete_program`], but a hole without terminal rules is expanded
/// along its shortest route to terminals first.
fn close_program(s: &SententialForm, sampler: &RuleSampler, rng: &mut ChaCha8Rng) -> Result<SententialForm, EnumError> {
    let mut s = expand_all(s, sampler, rng, RuleSampler::sample_closing)?;
    while !s.is_complete() {
        s = expand_all(&s, sampler, rng, RuleSampler::sample_closing)?;
    }
    Ok(s)
}

/// Probabilistic top-down enumerator. State persists across calls so that a
/// CEGIS loop can resume it with more counterexamples.
pub struct TopDown {
    problem: SynthProblem,
    wg: WeightedGrammar,
    smoothing: Option<f64>,
    sampler: RuleSampler,
    limits: SearchLimits,
    rng: ChaCha8Rng,
    seen: HashSet<Vec<Symbol>>,
    form: SententialForm,
    depth: usize,
    iteration: u64,
    candidates: u64,
    feedback_calls: u64,
    hook: Option<Box<dyn FeedbackHook>>,
    tracer: Option<Tracer>,
    exec: Exec,
}

fn sampler_for(wg: &WeightedGrammar, smoothing: Option<f64>) -> Result<RuleSampler, EnumError> {
    let pg = match smoothing {
        Some(gamma) => build_pcfg(&wg.smooth(gamma))?,
        None => build_pcfg(wg)?,
    };
    Ok(RuleSampler::new(pg))
}

impl TopDown {
    /// `smoothing` selects whether weights are smoothed (with that gamma)
    /// before normalization.
    pub fn new(
        wg: WeightedGrammar,
        problem: &SynthProblem,
        limits: SearchLimits,
        smoothing: Option<f64>,
    ) -> Result<TopDown, EnumError> {
        let sampler = sampler_for(&wg, smoothing)?;
        Ok(TopDown {
            problem: problem.clone(),
            form: SententialForm::start(&wg.grammar),
            rng: ChaCha8Rng::seed_from_u64(limits.seed),
            wg,
            smoothing,
            sampler,
            limits,
            seen: HashSet::new(),
            depth: 0,
            iteration: 0,
            candidates: 0,
            feedback_calls: 0,
            hook: None,
            tracer: None,
            exec: Exec::Sequential,
        })
    }

    pub fn with_feedback(mut self, hook: Box<dyn FeedbackHook>) -> Self {
        self.hook = Some(hook);
        self
    }

    pub fn with_tracer(mut self, tracer: Tracer) -> Self {
        self.tracer = Some(tracer);
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn sampler(&self) -> &RuleSampler {
        &self.sampler
    }

    fn trace(&mut self, e: TraceEvent) {
        if let Some(t) = &mut self.tracer {
            t(&e);
        }
    }

    fn restart(&mut self, duplicate: bool) {
        self.form = SententialForm::start(&self.wg.grammar);
        self.depth = 0;
        if self.tracer.is_some() {
            self.trace(TraceEvent::Restart { duplicate });
        }
    }

    fn run_feedback(&mut self, cexs: &[Counterexample]) {
        let Some(hook) = self.hook.as_mut() else {
            return;
        };
        let before = self.wg.grammar.rules().len();
        let updated = hook.feedback(&self.wg, &self.form, cexs);
        self.feedback_calls += 1;
        match sampler_for(&updated, self.smoothing) {
            Ok(s) => {
                self.sampler = s;
                self.wg = updated;
            }
            Err(e) => log::warn!("ignoring feedback grammar: {e}"),
        }
        let after = self.wg.grammar.rules().len();
        let iteration = self.iteration;
        self.trace(TraceEvent::Feedback {
            iteration,
            rules_before: before,
            rules_after: after,
        });
    }
}

impl Engine for TopDown {
    fn next_candidate(&mut self, cexs: &[Counterexample], deadline: Option<Instant>) -> Result<Term, EnumError> {
        loop {
            if past(deadline) || self.limits.candidate_budget.is_some_and(|b| self.candidates >= b) {
                return Err(EnumError::BudgetExhausted);
            }
            if self.form.is_complete() {
                if self.seen.contains(&self.form.symbols) {
                    self.restart(true);
                } else {
                    self.seen.insert(self.form.symbols.clone());
                    let term = self.form.to_term(&self.wg.grammar)?;
                    let passed = check_cex_with(&term, &self.problem, cexs, self.exec)?;
                    self.candidates += 1;
                    if self.tracer.is_some() {
                        let index = self.candidates;
                        self.trace(TraceEvent::Candidate {
                            index,
                            program: term.to_string(),
                            passed,
                        });
                    }
                    self.restart(false);
                    if passed {
                        return Ok(term);
                    }
                }
            }
            if let Some(n) = self.limits.feedback_interval {
                if self.iteration % n == 0 {
                    self.run_feedback(cexs);
                }
            }
            self.form = replace_nonterminals(&self.form, &self.sampler, &mut self.rng)?;
            self.depth += 1;
            if self.depth >= self.limits.max_depth && !self.form.is_complete() {
                self.form = close_program(&self.form, &self.sampler, &mut self.rng)?;
            }
            self.iteration += 1;
        }
    }

    fn note_failure(&mut self, candidate: &Term, cex: Option<&Counterexample>) {
        if let Some(h) = self.hook.as_mut() {
            h.note_failure(candidate, cex);
        }
    }

    fn candidates(&self) -> u64 {
        self.candidates
    }

    fn feedback_calls(&self) -> u64 {
        self.feedback_calls
    }

    fn weighted_grammar(&self) -> &WeightedGrammar {
        &self.wg
    }
}

/// One-shot top-down search: the first program consistent with `cexs`.
pub fn topdown_enumerate(
    wg: &WeightedGrammar,
    p: &SynthProblem,
    cexs: &[Counterexample],
    limits: &SearchLimits,
    feedback: Option<Box<dyn FeedbackHook>>,
) -> Result<Term, EnumError> {
    let deadline = limits.wall_clock.map(|d| Instant::now() + d);
    let mut e = TopDown::new(wg.clone(), p, limits.clone(), None)?;
    if let Some(h) = feedback {
        e = e.with_feedback(h);
    }
    e.next_candidate(cexs, deadline)
}
