use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::time::Instant;

use super::{past, EnumError, Engine, FeedbackHook, SearchLimits, SententialForm, TraceEvent, Tracer};
use crate::frontend::SynthProblem;
use crate::grammar::{
    build_pcfg, heuristic_fixpoint, Derivation, HeuristicTable, ProbGrammar, Symbol, WeightedGrammar, DEFAULT_GAMMA,
};
use crate::interp::{check_cex_with, Counterexample};
use crate::par::Exec;
use crate::term::Term;

fn neg_log2(p: f64) -> f64 {
    if p > 0.0 {
        -p.log2()
    } else {
        f64::INFINITY
    }
}

/// `c(s)`: the sum of `-log2 P(r)` over the rules of the derivation.
pub fn astar_cost(d: &Derivation, pg: &ProbGrammar) -> f64 {
    d.0.iter().map(|r| neg_log2(pg.p(*r))).sum()
}

/// `g(s)`: the sum of `-log2 h(N)` over the holes of the form.
pub fn astar_heuristic(s: &SententialForm, h: &HeuristicTable) -> f64 {
    s.holes().map(|nt| neg_log2(h.get(nt))).sum()
}

#[derive(Debug, Clone)]
struct Entry {
    f: f64,
    c: f64,
    order: u64,
    form: SententialForm,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the lowest f, then the oldest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.order.cmp(&self.order))
    }
}

/// Weighted A* over sentential forms, expanding the left-most hole.
pub struct AStar {
    problem: SynthProblem,
    wg: WeightedGrammar,
    gamma: f64,
    pg: ProbGrammar,
    h: HeuristicTable,
    heap: BinaryHeap<Entry>,
    best: HashMap<Vec<Symbol>, f64>,
    closed: HashSet<Vec<Symbol>>,
    order: u64,
    iteration: u64,
    candidates: u64,
    feedback_calls: u64,
    limits: SearchLimits,
    hook: Option<Box<dyn FeedbackHook>>,
    tracer: Option<Tracer>,
    exec: Exec,
}

fn pcfg_for(wg: &WeightedGrammar, gamma: f64) -> Result<(ProbGrammar, HeuristicTable), EnumError> {
    let pg = build_pcfg(&wg.smooth(gamma))?;
    let h = heuristic_fixpoint(&pg);
    Ok((pg, h))
}

impl AStar {
    /// Weights are smoothed with `gamma` before normalization.
    pub fn new(wg: WeightedGrammar, problem: &SynthProblem, limits: SearchLimits, gamma: f64) -> Result<AStar, EnumError> {
        let (pg, h) = pcfg_for(&wg, gamma)?;
        let mut a = AStar {
            problem: problem.clone(),
            gamma,
            pg,
            h,
            heap: BinaryHeap::new(),
            best: HashMap::new(),
            closed: HashSet::new(),
            order: 0,
            iteration: 0,
            candidates: 0,
            feedback_calls: 0,
            limits,
            hook: None,
            tracer: None,
            exec: Exec::Sequential,
            wg,
        };
        let start = SententialForm::start(&a.wg.grammar);
        a.push(start, 0.0);
        Ok(a)
    }

    pub fn with_default_smoothing(wg: WeightedGrammar, problem: &SynthProblem, limits: SearchLimits) -> Result<AStar, EnumError> {
        AStar::new(wg, problem, limits, DEFAULT_GAMMA)
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

    pub fn pcfg(&self) -> &ProbGrammar {
        &self.pg
    }

    pub fn heuristic(&self) -> &HeuristicTable {
        &self.h
    }

    pub fn frontier_len(&self) -> usize {
        self.heap.len()
    }

    /// Frontier entries as `(f, c, form)`, in no particular order.
    pub fn frontier(&self) -> impl Iterator<Item = (f64, f64, &SententialForm)> {
        self.heap.iter().map(|e| (e.f, e.c, &e.form))
    }

    fn push(&mut self, form: SententialForm, c: f64) {
        if self.closed.contains(&form.symbols) {
            return;
        }
        let g = astar_heuristic(&form, &self.h);
        let f = c + g;
        if !f.is_finite() {
            return;
        }
        if self.best.get(&form.symbols).is_some_and(|b| *b <= c) {
            return;
        }
        self.best.insert(form.symbols.clone(), c);
        self.order += 1;
        self.heap.push(Entry {
            f,
            c,
            order: self.order,
            form,
        });
    }

    fn trace(&mut self, e: TraceEvent) {
        if let Some(t) = &mut self.tracer {
            t(&e);
        }
    }

    /// Runs the hook; on a new grammar, recomputes P and h and re-keys the frontier.
    fn run_feedback(&mut self, form: &SententialForm, cexs: &[Counterexample]) {
        let Some(hook) = self.hook.as_mut() else {
            return;
        };
        let before = self.wg.grammar.rules().len();
        let updated = hook.feedback(&self.wg, form, cexs);
        self.feedback_calls += 1;
        if updated != self.wg {
            match pcfg_for(&updated, self.gamma) {
                Ok((pg, h)) => {
                    self.wg = updated;
                    self.pg = pg;
                    self.h = h;
                    self.rekey();
                }
                Err(e) => log::warn!("ignoring feedback grammar: {e}"),
            }
        }
        let after = self.wg.grammar.rules().len();
        let iteration = self.iteration;
        self.trace(TraceEvent::Feedback {
            iteration,
            rules_before: before,
            rules_after: after,
        });
    }

    fn rekey(&mut self) {
        let old = std::mem::take(&mut self.heap);
        self.best.clear();
        let mut entries: Vec<Entry> = old.into_vec();
        entries.sort_by_key(|e| e.order);
        for e in entries {
            if self.closed.contains(&e.form.symbols) {
                continue;
            }
            let c = astar_cost(&e.form.derivation, &self.pg);
            let f = c + astar_heuristic(&e.form, &self.h);
            if !f.is_finite() {
                continue;
            }
            if self.best.get(&e.form.symbols).is_some_and(|b| *b <= c) {
                continue;
            }
            self.best.insert(e.form.symbols.clone(), c);
            self.heap.push(Entry { f, c, ..e });
        }
    }
}

impl Engine for AStar {
    fn next_candidate(&mut self, cexs: &[Counterexample], deadline: Option<Instant>) -> Result<Term, EnumError> {
        loop {
            if past(deadline) || self.limits.candidate_budget.is_some_and(|b| self.candidates >= b) {
                return Err(EnumError::BudgetExhausted);
            }
            let Some(entry) = self.heap.pop() else {
                return Err(EnumError::Exhausted);
            };
            if self.closed.contains(&entry.form.symbols)
                || self.best.get(&entry.form.symbols).is_some_and(|b| *b < entry.c)
            {
                continue;
            }
            self.closed.insert(entry.form.symbols.clone());
            let complete = entry.form.is_complete();
            if self.tracer.is_some() {
                let ev = TraceEvent::Pop {
                    iteration: self.iteration,
                    f: entry.f,
                    complete,
                    form: entry.form.render(&self.wg.grammar),
                };
                self.trace(ev);
            }
            if complete {
                let term = entry.form.to_term(&self.wg.grammar)?;
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
                if passed {
                    return Ok(term);
                }
            }
            if let Some(n) = self.limits.feedback_interval {
                if self.iteration % n == 0 {
                    self.run_feedback(&entry.form, cexs);
                }
            }
            if let Some((_, nt)) = entry.form.leftmost_hole() {
                // Costs are recomputed so entries stay consistent after feedback.
                let c = astar_cost(&entry.form.derivation, &self.pg);
                let rules: Vec<_> = self.wg.grammar.rules_for(nt).to_vec();
                for r in rules {
                    let p = self.pg.p(r);
                    if p <= 0.0 {
                        continue;
                    }
                    let child = entry.form.expand_leftmost(&self.wg.grammar, r);
                    self.push(child, c + neg_log2(p));
                }
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

/// One-shot A* search with default smoothing.
pub fn astar_enumerate(
    wg: &WeightedGrammar,
    p: &SynthProblem,
    cexs: &[Counterexample],
    limits: &SearchLimits,
    feedback: Option<Box<dyn FeedbackHook>>,
) -> Result<Term, EnumError> {
    let deadline = limits.wall_clock.map(|d| Instant::now() + d);
    let mut e = AStar::with_default_smoothing(wg.clone(), p, limits.clone())?;
    if let Some(h) = feedback {
        e = e.with_feedback(h);
    }
    e.next_candidate(cexs, deadline)
}
