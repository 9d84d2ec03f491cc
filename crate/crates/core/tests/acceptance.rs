//! Acceptance checks, one pass/fail line per criterion. Runs as a plain
//! binary (`harness = false`) so the lines come out in order.

mod common;

use std::collections::{HashMap, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use common::*;
use guidesyn::cegis::{cegis, reverify, Outcome, Solver, SolverConfig, Verdict};
use guidesyn::enumerate::{replace_nonterminals, AStar, Engine, RuleSampler, SearchLimits, SententialForm, TopDown, TraceEvent};
use guidesyn::frontend::{anonymize, parse_problem, SynthProblem};
use guidesyn::grammar::{
    build_pcfg, smooth_weight, weights_from_programs, Grammar, NonTerminal, NtId, Pattern, ProbGrammar, WeightedGrammar,
};
use guidesyn::interp::{eval, Counterexample};
use guidesyn::llm::{BackendConfig, BackendKind, MockBackend, SyntacticFeedback};
use guidesyn::par::Exec;
use guidesyn::pipeline::{load_problem, solve_problem, Config, Mode, Run};
use guidesyn::term::{Op, Sort, Term, Value};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::Rng;

type Check = Result<String, String>;

fn bench_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks").join(rel)
}

fn problem(rel: &str) -> SynthProblem {
    load_problem(&bench_path(rel)).expect("benchmark parses")
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ivar(n: &str) -> Term {
    Term::var(n, Sort::Int)
}

fn program1() -> Term {
    let ge = |a, b| Term::app(Op::Ge, vec![a, b]).unwrap();
    let ite = |c, a, b| Term::app(Op::Ite, vec![c, a, b]).unwrap();
    ite(
        ge(ivar("vr0"), ivar("vr1")),
        ite(ge(ivar("vr0"), ivar("vr2")), ivar("vr0"), ivar("vr2")),
        ite(ge(ivar("vr1"), ivar("vr2")), ivar("vr1"), ivar("vr2")),
    )
}

fn mock_config(script: &str) -> Config {
    Config {
        llm: Some(BackendConfig {
            kind: BackendKind::Mock,
            script: Some(bench_path(script)),
            ..BackendConfig::default()
        }),
        ..Config::default()
    }
}

fn run_mode(rel: &str, mode: Mode, cfg: &Config, seed: u64) -> Result<Run, String> {
    solve_problem(rel, &problem(rel), mode, cfg, seed, Exec::Sequential).map_err(|e| format!("{mode}: {e}"))
}

fn c1_worked_weights() -> Check {
    let p = problem("lia/max3_r5.sl");
    let progs = [program1()];
    weights_from_programs(&p.grammar, &progs);
    let t0 = Instant::now();
    let wg = weights_from_programs(&p.grammar, &progs);
    let dt = t0.elapsed();
    let expect = [
        ("Start -> (ite StartBool Start Start)", 3.0),
        ("Start -> vr0", 3.0),
        ("Start -> vr1", 3.0),
        ("Start -> vr2", 4.0),
        ("StartBool -> (>= Start Start)", 3.0),
    ];
    check(wg.weights.len() == 5, || format!("{} rules", wg.weights.len()))?;
    for (text, w) in expect {
        let r = p.grammar.rule_by_text(text).ok_or_else(|| format!("no rule {text}"))?;
        check(wg.weight(r) == w, || format!("{text}: {} != {w}", wg.weight(r)))?;
    }
    check(dt < Duration::from_millis(1), || format!("took {dt:?}"))?;
    Ok(format!("weights 3,3,3,4,3 in {dt:?}"))
}

/// `10 * ((w+1)/10)^(2/5)` equals the fifth root of `1000 (w+1)^2`; evaluated
/// with integers scaled by 10^30.
fn smooth_oracle(w: u64) -> f64 {
    let scale = BigUint::from(10u32).pow(150);
    let x = BigUint::from(1000u64 * (w + 1) * (w + 1)) * scale;
    let root = x.nth_root(5);
    let (q, r) = (&root / BigUint::from(10u32).pow(18), &root % BigUint::from(10u32).pow(18));
    q.to_f64().unwrap() / 1e12 + r.to_f64().unwrap() / 1e30
}

fn c2_smoothing() -> Check {
    let mut worst = 0.0f64;
    for w in 0..=50u64 {
        let got = smooth_weight(w as f64, 0.4);
        let want = smooth_oracle(w);
        let err = (got - want).abs();
        check(err <= 1e-9, || format!("w={w}: {got} vs {want}"))?;
        worst = worst.max(err);
    }
    Ok(format!("w=0..50, max abs error {worst:.1e}"))
}

fn c3_normalization() -> Check {
    let mut r = rng(3);
    for i in 0..200 {
        let g = random_grammar(&mut r);
        let n = g.rules().len();
        let wg = WeightedGrammar::new(g, random_weights(&mut r, n)).smooth(0.4);
        let pg = build_pcfg(&wg).map_err(|e| format!("grammar {i}: {e}"))?;
        for nt in 0..wg.grammar.nonterminals().len() as NtId {
            let ps: Vec<f64> = wg.grammar.rules_for(nt).iter().map(|&r| pg.p(r)).collect();
            let sum: f64 = ps.iter().sum();
            check((sum - 1.0).abs() <= 1e-9, || format!("grammar {i} nt {nt}: sum {sum}"))?;
            check(ps.iter().all(|p| *p > 0.0), || format!("grammar {i} nt {nt}: {ps:?}"))?;
        }
    }
    Ok("200 grammars".into())
}

fn c4_sampler() -> Check {
    let mut g = Grammar::new(vec![NonTerminal {
        name: "S".into(),
        sort: Sort::Int,
    }]);
    for v in ["a", "b", "c", "d"] {
        g.add_rule(0, &Pattern::Leaf(ivar(v))).unwrap();
    }
    let sampler = RuleSampler::new(build_pcfg(&WeightedGrammar::uniform(g.clone(), 1.0)).unwrap());
    let start = SententialForm::start(&g);
    let mut r = rng(4);
    let mut counts = [0u64; 4];
    let n = 100_000;
    let t0 = Instant::now();
    for _ in 0..n {
        let s = replace_nonterminals(&start, &sampler, &mut r).map_err(|e| e.to_string())?;
        counts[s.derivation.0[0] as usize] += 1;
    }
    let dt = t0.elapsed();
    let freqs: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
    check(freqs.iter().all(|f| (f - 0.25).abs() <= 0.01), || format!("{freqs:?}"))?;
    check(dt < Duration::from_secs(5), || format!("took {dt:?}"))?;
    Ok(format!("frequencies {freqs:.4?} in {dt:.2?}"))
}

fn unsat() -> (SynthProblem, Vec<Counterexample>) {
    let p = parse_problem(UNSAT_PROBLEM).unwrap();
    let cex = Counterexample {
        values: LIA_VARS.iter().map(|v| (v.to_string(), Value::int(0))).collect(),
    };
    (p, vec![cex])
}

fn limits(seed: u64, budget: u64) -> SearchLimits {
    SearchLimits {
        max_depth: 8,
        feedback_interval: None,
        candidate_budget: Some(budget),
        wall_clock: None,
        seed,
    }
}

fn c5_astar_order() -> Check {
    let (p, cexs) = unsat();
    let mut pops = 0;
    for seed in 0..50 {
        let mut r = rng(500 + seed);
        let g = branching_grammar(&mut r);
        let n = g.rules().len();
        let wg = WeightedGrammar::new(g, random_weights(&mut r, n));
        let events = Arc::new(Mutex::new(Vec::new()));
        let sink = events.clone();
        let mut a = AStar::new(wg, &p, limits(seed, 300), 0.4)
            .map_err(|e| e.to_string())?
            .with_tracer(Box::new(move |e| sink.lock().unwrap().push(e.clone())));
        check(a.next_candidate(&cexs, None).is_err(), || "unsatisfiable problem produced a candidate".into())?;
        let mut last = f64::NEG_INFINITY;
        let mut complete = HashSet::new();
        for e in events.lock().unwrap().iter() {
            if let TraceEvent::Pop { f, complete: c, form, .. } = e {
                pops += 1;
                check(*f + 1e-9 >= last, || format!("seed {seed}: f fell from {last} to {f} at {form}"))?;
                last = last.max(*f);
                if *c {
                    check(complete.insert(form.clone()), || format!("seed {seed}: {form} popped twice"))?;
                }
            }
        }
    }
    Ok(format!("50 runs, {pops} pops"))
}

fn neg_log2(p: f64) -> f64 {
    -p.log2()
}

/// Costs of every complete derivation tree from `nt` of depth at most `depth`.
fn completion_costs(pg: &ProbGrammar, nt: NtId, depth: usize) -> Vec<f64> {
    if depth == 0 {
        return Vec::new();
    }
    let g = &pg.grammar;
    let mut out = Vec::new();
    for &r in g.rules_for(nt) {
        let mut partial = vec![neg_log2(pg.p(r))];
        for child in g.rule(r).holes() {
            let sub = completion_costs(pg, child, depth - 1);
            partial = partial.iter().flat_map(|a| sub.iter().map(move |b| a + b)).collect();
        }
        out.extend(partial);
    }
    out
}

fn c6_admissibility() -> Check {
    let (p, cexs) = unsat();
    let mut forms_checked = 0;
    for seed in 0..30 {
        let mut r = rng(600 + seed);
        let g = chain_grammar(&mut r);
        let n = g.rules().len();
        let wg = WeightedGrammar::new(g.clone(), random_weights(&mut r, n));
        let mut a = AStar::new(wg, &p, limits(seed, 50), 0.4).map_err(|e| e.to_string())?;
        let _ = a.next_candidate(&cexs, None);
        let pg = a.pcfg().clone();
        let best: HashMap<NtId, f64> = (0..g.nonterminals().len() as NtId)
            .map(|nt| (nt, completion_costs(&pg, nt, 6).into_iter().fold(f64::INFINITY, f64::min)))
            .collect();

        let mut forms: Vec<SententialForm> = a.frontier().map(|(_, _, s)| s.clone()).collect();
        let mut queue = VecDeque::from([(SententialForm::start(&g), 0)]);
        while let Some((s, steps)) = queue.pop_front() {
            if steps < 5 {
                if let Some((_, nt)) = s.leftmost_hole() {
                    for &rule in g.rules_for(nt) {
                        queue.push_back((s.expand_leftmost(&g, rule), steps + 1));
                    }
                }
            }
            forms.push(s);
        }
        for s in &forms {
            let h = guidesyn::enumerate::astar_heuristic(s, a.heuristic());
            let truth: f64 = s.holes().map(|nt| best[&nt]).sum();
            check(h <= truth + 1e-9, || format!("seed {seed}: {} has g={h} > {truth}", s.render(&g)))?;
            forms_checked += 1;
        }
    }
    Ok(format!("{forms_checked} forms over 30 grammars"))
}

fn c7_interp_oracle() -> Check {
    let mut solver = Solver::new(SolverConfig::default());
    let mut r = rng(7);
    let mut mismatches = Vec::new();
    for i in 0..2000 {
        let (t, v) = if i < 1000 {
            let t = if r.gen_bool(0.5) { lia_int(&mut r, 4) } else { lia_bool(&mut r, 4) };
            (t, lia_valuation(&mut r))
        } else {
            let t = if r.gen_bool(0.5) { bv_term(&mut r, 4, 8) } else { bv_bool(&mut r, 4, 8) };
            (t, bv_valuation(&mut r, 8))
        };
        let mine = eval(&t, &v).map_err(|e| format!("{t}: {e}"))?;
        let theirs = solver.eval(&t, &v).map_err(|e| format!("{t}: {e}"))?;
        if mine != theirs {
            mismatches.push(format!("{t}: {mine} vs {theirs}"));
        }
    }
    check(mismatches.is_empty(), || format!("{} mismatches, first {}", mismatches.len(), mismatches[0]))?;
    Ok("1000 LIA + 1000 BV8 pairs, 0 mismatches".into())
}

fn c8_baselines() -> Check {
    let rel = "lia/max3_r5.sl";
    let cfg = Config::default();
    let mut detail = Vec::new();
    for mode in [Mode::EnumBaseline, Mode::AstarBaseline] {
        let run = run_mode(rel, mode, &cfg, 0)?;
        let rec = &run.record;
        check(rec.solved, || format!("{mode}: {:?} {:?}", rec.status, rec.error))?;
        check(rec.elapsed_s < 600.0, || format!("{mode}: {:.1}s", rec.elapsed_s))?;
        let def = run.solution.ok_or("no solution")?;
        let v = reverify(&def.body, &problem(rel), &cfg.solver).map_err(|e| e.to_string())?;
        check(v == Verdict::Valid, || format!("{mode}: re-verification {v:?}"))?;
        detail.push(format!("{mode} {:.2}s", rec.elapsed_s));
    }
    Ok(detail.join(", "))
}

fn c9_llm_only() -> Check {
    let run = run_mode("lia/max3_r5.sl", Mode::LlmOnly, &mock_config("mock/response1.jsonl"), 0)?;
    let rec = &run.record;
    check(rec.solved, || format!("{:?} {:?}", rec.status, rec.error))?;
    check(rec.candidates == 0, || format!("{} candidates", rec.candidates))?;
    check(rec.llm_calls >= 1, || "no LLM call".into())?;
    let body = run.solution.ok_or("no solution")?.body;
    check(body == program1(), || format!("solution {body}"))?;
    Ok(format!("{} LLM call(s), 0 candidates, Program 1", rec.llm_calls))
}

fn median(mut xs: Vec<u64>) -> f64 {
    xs.sort_unstable();
    let n = xs.len();
    (xs[(n - 1) / 2] + xs[n / 2]) as f64 / 2.0
}

fn c10_guidance() -> Check {
    const CAP: u64 = 50_000;
    let t0 = Instant::now();
    let rel = "lia/max3.sl";
    let mut guided = mock_config("mock/swapped.jsonl");
    guided.candidate_budget = Some(CAP);
    let unguided = Config {
        candidate_budget: Some(CAP),
        ..Config::default()
    };
    let seeds: Vec<u64> = (0..20).collect();
    let jobs: Vec<(Mode, &Config, u64)> = seeds
        .iter()
        .map(|s| (Mode::EPcfg, &guided, *s))
        .chain(seeds.iter().map(|s| (Mode::EnumBaseline, &unguided, *s)))
        .collect();
    let runs = Exec::auto().map(&jobs, |(mode, cfg, seed)| run_mode(rel, *mode, cfg, *seed));
    let mut counts: HashMap<Mode, Vec<u64>> = HashMap::new();
    let mut solved: HashMap<Mode, usize> = HashMap::new();
    for run in runs {
        let rec = run?.record;
        // capped runs count as the cap
        counts.entry(rec.mode).or_default().push(if rec.solved { rec.candidates } else { CAP.max(rec.candidates) });
        *solved.entry(rec.mode).or_default() += rec.solved as usize;
    }
    let g = median(counts.remove(&Mode::EPcfg).unwrap_or_default());
    let u = median(counts.remove(&Mode::EnumBaseline).unwrap_or_default());
    let dt = t0.elapsed();
    let detail = format!(
        "median candidates: swapped-program weights {g} ({}/20 solved), all-ones {u} ({}/20 solved, cap {CAP}), {:.1}s",
        solved.get(&Mode::EPcfg).unwrap_or(&0),
        solved.get(&Mode::EnumBaseline).unwrap_or(&0),
        dt.as_secs_f64()
    );
    check(u >= 2.0 * g, || detail.clone())?;
    check(dt < Duration::from_secs(600), || detail.clone())?;
    Ok(detail)
}

fn c11_integrated() -> Check {
    let rel = "lia/max3_r5.sl";
    let script = std::fs::read_to_string(bench_path("mock/max2_helper.jsonl")).unwrap();
    let (anon, _) = anonymize(&problem(rel));
    let n = 2000;
    let events = Arc::new(Mutex::new(Vec::new()));
    let sink = events.clone();
    let hook = SyntacticFeedback::new(anon.clone(), Box::new(MockBackend::parse(&script).map_err(|e| e.to_string())?));
    let lim = SearchLimits {
        feedback_interval: Some(n),
        seed: 0,
        ..SearchLimits::default()
    };
    let mut e = TopDown::new(WeightedGrammar::uniform(anon.grammar.clone(), 1.0), &anon, lim, None)
        .map_err(|e| e.to_string())?
        .with_feedback(Box::new(hook))
        .with_tracer(Box::new(move |e| {
            if let TraceEvent::Feedback { .. } = e {
                sink.lock().unwrap().push(e.clone());
            }
        }));
    let mut solver = Solver::new(SolverConfig::default());
    let r = cegis(&mut e, &anon, &mut solver, Some(Instant::now() + Duration::from_secs(600)));

    let fired: Vec<u64> = events
        .lock()
        .unwrap()
        .iter()
        .map(|e| match e {
            TraceEvent::Feedback { iteration, .. } => *iteration,
            _ => unreachable!(),
        })
        .collect();
    check(!fired.is_empty() && fired.iter().all(|i| i % n == 0), || format!("feedback at {fired:?}"))?;

    // Start weights after the helper's counts: ite 2, vr0..vr2 1 each
    let wg = e.weighted_grammar();
    let rule = wg
        .grammar
        .rule_by_text("Start -> (ite (>= Start Start) Start Start)")
        .ok_or("helper rule missing")?;
    check(wg.weight(rule) == 1.25, || format!("helper weight {}", wg.weight(rule)))?;
    check(matches!(r.outcome, Outcome::Solved(_)), || format!("{:?}", r.outcome))?;

    let cfg = mock_config("mock/max2_helper.jsonl");
    let a = run_mode(rel, Mode::EIllm, &cfg, 0)?.record;
    let b = run_mode(rel, Mode::EIllm, &cfg, 0)?.record;
    check(a.solved, || format!("pipeline e-illm: {:?}", a.status))?;
    check(a.timing_free() == b.timing_free(), || format!("{a:?} != {b:?}"))?;
    Ok(format!("feedback at {} iteration(s) {fired:?} (n={n}), helper weight 1.25, solved", fired.len()))
}

fn c12_reproducible() -> Check {
    let rel = "lia/max2.sl";
    let cfg = mock_config("mock/max2_helper.jsonl");
    for mode in Mode::ALL {
        let a = run_mode(rel, mode, &cfg, 3)?.record.timing_free().to_json_line();
        let b = run_mode(rel, mode, &cfg, 3)?.record.timing_free().to_json_line();
        check(a == b, || format!("{mode}:\n{a}\n{b}"))?;
    }
    Ok(format!("{} modes", Mode::ALL.len()))
}


fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("worked-example weights", c1_worked_weights),
        ("smoothing formula", c2_smoothing),
        ("pCFG normalization", c3_normalization),
        ("sampler statistics", c4_sampler),
        ("A* ordering", c5_astar_order),
        ("A* heuristic admissibility", c6_admissibility),
        ("interpreter vs SMT solver", c7_interp_oracle),
        ("baseline end-to-end solve", c8_baselines),
        ("mock llm-only pipeline", c9_llm_only),
        ("guidance effect", c10_guidance),
        ("integrated feedback", c11_integrated),
        ("reproducibility", c12_reproducible),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(d) => println!("criterion {n} ({name}): PASS, {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL, {d}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
