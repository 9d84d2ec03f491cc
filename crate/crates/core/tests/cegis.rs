use std::time::{Duration, Instant};

use guidesyn::cegis::{cegis, reverify, Outcome, Solver, SolverConfig, Verdict};
use guidesyn::enumerate::{AStar, Engine, SearchLimits, TopDown};
use guidesyn::frontend::parse_problem;
use guidesyn::grammar::WeightedGrammar;
use guidesyn::interp::Valuation;
use guidesyn::term::{Op, Sort, Term, Value};

const MAX3: &str = include_str!("../../../benchmarks/lia/max3.sl");
const MAX3_R5: &str = include_str!("../../../benchmarks/lia/max3_r5.sl");

fn var(n: &str) -> Term {
    Term::var(n, Sort::Int)
}

fn program1() -> Term {
    let ge = |a, b| Term::app(Op::Ge, vec![a, b]).unwrap();
    let ite = |c, a, b| Term::app(Op::Ite, vec![c, a, b]).unwrap();
    ite(
        ge(var("vr0"), var("vr1")),
        ite(ge(var("vr0"), var("vr2")), var("vr0"), var("vr2")),
        ite(ge(var("vr1"), var("vr2")), var("vr1"), var("vr2")),
    )
}

#[test]
fn program_one_is_valid() {
    let p = parse_problem(MAX3).unwrap();
    let mut s = Solver::new(SolverConfig::default());
    assert_eq!(s.verify(&program1(), &p).unwrap(), Verdict::Valid);
}

#[test]
fn projection_is_refuted_with_a_real_counterexample() {
    let p = parse_problem(MAX3).unwrap();
    let mut s = Solver::new(SolverConfig::default());
    let Verdict::Invalid(c) = s.verify(&var("vr0"), &p).unwrap() else {
        panic!("vr0 should not be valid");
    };
    let get = |n: &str| match &c.values[n] {
        Value::Int(i) => i.clone(),
        other => panic!("{other}"),
    };
    assert!(get("vr1") > get("vr0") || get("vr2") > get("vr0"));
}

#[test]
fn no_constraints_is_valid() {
    let mut p = parse_problem(MAX3).unwrap();
    p.constraints.clear();
    let mut s = Solver::new(SolverConfig::default());
    assert_eq!(s.verify(&Term::int(0), &p).unwrap(), Verdict::Valid);
}

#[test]
fn ground_tautology() {
    let mut s = Solver::new(SolverConfig::default());
    let t = Term::app(Op::Or, vec![Term::bool(true), Term::bool(false)]).unwrap();
    assert_eq!(s.is_valid(&t).unwrap(), Some(true));
    let f = Term::app(Op::Eq, vec![Term::int(1), Term::int(2)]).unwrap();
    assert_eq!(s.is_valid(&f).unwrap(), Some(false));
}

#[test]
fn solver_model_evaluation() {
    let mut s = Solver::new(SolverConfig::default());
    let t = Term::app(Op::Sub, vec![var("a"), Term::int(7)]).unwrap();
    let mut v = Valuation::new();
    v.insert("a".into(), Value::int(2));
    assert_eq!(s.eval(&t, &v).unwrap(), Value::int(-5));
}

#[test]
fn baselines_solve_max3() {
    let p = parse_problem(MAX3_R5).unwrap();
    let wg = WeightedGrammar::uniform(p.grammar.clone(), 1.0);
    let limits = SearchLimits { seed: 1, ..SearchLimits::default() };
    let engines: Vec<Box<dyn Engine>> = vec![
        Box::new(TopDown::new(wg.clone(), &p, limits.clone(), None).unwrap()),
        Box::new(AStar::with_default_smoothing(wg, &p, limits).unwrap()),
    ];
    for mut e in engines {
        let mut s = Solver::new(SolverConfig::default());
        let r = cegis(e.as_mut(), &p, &mut s, Some(Instant::now() + Duration::from_secs(600)));
        let Outcome::Solved(t) = &r.outcome else {
            panic!("unsolved: {:?}", r.outcome);
        };
        assert_eq!(reverify(t, &p, &SolverConfig::default()).unwrap(), Verdict::Valid);
        assert!(r.stats.verifier_calls >= 1);
    }
}

#[test]
fn zero_wall_clock_times_out_immediately() {
    let p = parse_problem(MAX3).unwrap();
    let wg = WeightedGrammar::uniform(p.grammar.clone(), 1.0);
    let mut e = TopDown::new(wg, &p, SearchLimits::default(), None).unwrap();
    let mut s = Solver::new(SolverConfig::default());
    let r = cegis(&mut e, &p, &mut s, Some(Instant::now()));
    assert_eq!(r.outcome, Outcome::TimedOut);
    assert_eq!(r.stats.verifier_calls, 0);
}
