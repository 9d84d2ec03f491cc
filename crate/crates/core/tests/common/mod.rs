//! Random generators shared by the property and acceptance suites.
#![allow(dead_code)]

use guidesyn::grammar::{Grammar, NonTerminal, Pattern};
use guidesyn::interp::Valuation;
use guidesyn::term::{Op, Sort, Term, Value};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const LIA_VARS: [&str; 3] = ["x", "y", "z"];
pub const BV_VARS: [&str; 3] = ["a", "b", "c"];

fn app(op: Op, args: Vec<Term>) -> Term {
    Term::app(op, args).expect("well-sorted by construction")
}

pub fn lia_int(r: &mut ChaCha8Rng, depth: u32) -> Term {
    if depth == 0 || r.gen_bool(0.25) {
        return if r.gen_bool(0.6) {
            Term::var(*LIA_VARS.choose(r).unwrap(), Sort::Int)
        } else {
            Term::int(r.gen_range(-20..=20))
        };
    }
    match r.gen_range(0..4) {
        0 => app(Op::Add, vec![lia_int(r, depth - 1), lia_int(r, depth - 1)]),
        1 => app(Op::Sub, vec![lia_int(r, depth - 1), lia_int(r, depth - 1)]),
        2 => app(Op::Mul, vec![lia_int(r, depth - 1), lia_int(r, depth - 1)]),
        _ => app(Op::Ite, vec![lia_bool(r, depth - 1), lia_int(r, depth - 1), lia_int(r, depth - 1)]),
    }
}

pub fn lia_bool(r: &mut ChaCha8Rng, depth: u32) -> Term {
    if depth == 0 || r.gen_bool(0.2) {
        return if r.gen_bool(0.5) { Term::var("p", Sort::Bool) } else { Term::bool(r.gen_bool(0.5)) };
    }
    let cmp = [Op::Eq, Op::Gt, Op::Ge, Op::Lt, Op::Le];
    match r.gen_range(0..4) {
        0 | 1 => app(*cmp.choose(r).unwrap(), vec![lia_int(r, depth - 1), lia_int(r, depth - 1)]),
        2 => app(Op::Not, vec![lia_bool(r, depth - 1)]),
        _ => {
            let op = *[Op::And, Op::Or, Op::Implies, Op::Xor].choose(r).unwrap();
            app(op, vec![lia_bool(r, depth - 1), lia_bool(r, depth - 1)])
        }
    }
}

pub fn bv_term(r: &mut ChaCha8Rng, depth: u32, w: u32) -> Term {
    if depth == 0 || r.gen_bool(0.25) {
        return if r.gen_bool(0.6) {
            Term::var(*BV_VARS.choose(r).unwrap(), Sort::BitVec(w))
        } else {
            Term::Lit(Value::bv(w, r.gen::<u128>()))
        };
    }
    let binary = [
        Op::BvAdd,
        Op::BvSub,
        Op::BvMul,
        Op::BvAnd,
        Op::BvOr,
        Op::BvXor,
        Op::BvShl,
        Op::BvLshr,
        Op::BvAshr,
    ];
    match r.gen_range(0..5) {
        0 => app(*[Op::BvNot, Op::BvNeg].choose(r).unwrap(), vec![bv_term(r, depth - 1, w)]),
        1 => app(Op::Ite, vec![bv_bool(r, depth - 1, w), bv_term(r, depth - 1, w), bv_term(r, depth - 1, w)]),
        _ => app(*binary.choose(r).unwrap(), vec![bv_term(r, depth - 1, w), bv_term(r, depth - 1, w)]),
    }
}

pub fn bv_bool(r: &mut ChaCha8Rng, depth: u32, w: u32) -> Term {
    let cmp = [
        Op::Eq,
        Op::BvUle,
        Op::BvUlt,
        Op::BvUge,
        Op::BvUgt,
        Op::BvSle,
        Op::BvSlt,
        Op::BvSge,
        Op::BvSgt,
    ];
    if depth == 0 || r.gen_bool(0.7) {
        let d = depth.saturating_sub(1);
        return app(*cmp.choose(r).unwrap(), vec![bv_term(r, d, w), bv_term(r, d, w)]);
    }
    match r.gen_range(0..2) {
        0 => app(Op::Not, vec![bv_bool(r, depth - 1, w)]),
        _ => app(*[Op::And, Op::Or].choose(r).unwrap(), vec![bv_bool(r, depth - 1, w), bv_bool(r, depth - 1, w)]),
    }
}

pub fn lia_valuation(r: &mut ChaCha8Rng) -> Valuation {
    let mut v = Valuation::new();
    for n in LIA_VARS {
        v.insert(n.into(), Value::int(r.gen_range(-50..=50)));
    }
    v.insert("p".into(), Value::Bool(r.gen_bool(0.5)));
    v
}

pub fn bv_valuation(r: &mut ChaCha8Rng, w: u32) -> Valuation {
    let mut v = Valuation::new();
    for n in BV_VARS {
        v.insert(n.into(), Value::bv(w, r.gen::<u128>()));
    }
    v
}

/// A grammar with 1 to 4 Int nonterminals, each with at least one leaf
/// rule and a few random operator rules over random nonterminals.
pub fn random_grammar(r: &mut ChaCha8Rng) -> Grammar {
    let k = r.gen_range(1..=4);
    let nts: Vec<NonTerminal> = (0..k)
        .map(|i| NonTerminal {
            name: format!("N{i}"),
            sort: Sort::Int,
        })
        .collect();
    let mut g = Grammar::new(nts);
    for nt in 0..k as u32 {
        let m = r.gen_range(1..=3);
        for v in LIA_VARS.choose_multiple(r, m) {
            g.add_rule(nt, &Pattern::Leaf(Term::var(*v, Sort::Int))).unwrap();
        }
        if r.gen_bool(0.5) {
            g.add_rule(nt, &Pattern::Leaf(Term::int(r.gen_range(0..3)))).unwrap();
        }
        for _ in 0..r.gen_range(0..=3) {
            let op = *[Op::Add, Op::Sub, Op::Mul].choose(r).unwrap();
            let a = r.gen_range(0..k as u32);
            let b = r.gen_range(0..k as u32);
            g.add_rule(nt, &Pattern::App(op, vec![Pattern::Hole(a), Pattern::Hole(b)])).unwrap();
        }
    }
    g
}

/// Grammars whose derivation trees can be listed exhaustively to depth 6:
/// `S` has 1 to 3 leaves and up to two chain rules `(op S B)`; `B` has 1 or 2 leaves.
pub fn chain_grammar(r: &mut ChaCha8Rng) -> Grammar {
    let mut g = Grammar::new(vec![
        NonTerminal {
            name: "S".into(),
            sort: Sort::Int,
        },
        NonTerminal {
            name: "B".into(),
            sort: Sort::Int,
        },
    ]);
    let m = r.gen_range(1..=3);
    for v in ["x", "y", "z"].choose_multiple(r, m) {
        g.add_rule(0, &Pattern::Leaf(Term::var(*v, Sort::Int))).unwrap();
    }
    let m = r.gen_range(1..=2);
    for op in [Op::Add, Op::Mul].choose_multiple(r, m) {
        g.add_rule(0, &Pattern::App(*op, vec![Pattern::Hole(0), Pattern::Hole(1)])).unwrap();
    }
    let m = r.gen_range(1..=2);
    for c in [0, 1].choose_multiple(r, m) {
        g.add_rule(1, &Pattern::Leaf(Term::int(*c))).unwrap();
    }
    g
}

/// Like [`chain_grammar`] but `S` may also branch, `(op S S)`; for search
/// properties that need no exhaustive listing.
pub fn branching_grammar(r: &mut ChaCha8Rng) -> Grammar {
    let mut g = chain_grammar(r);
    let op = *[Op::Add, Op::Sub, Op::Mul].choose(r).unwrap();
    g.add_rule(0, &Pattern::App(op, vec![Pattern::Hole(0), Pattern::Hole(0)])).unwrap();
    g
}

/// Random nonnegative weights, some zero.
pub fn random_weights(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if r.gen_bool(0.2) { 0.0 } else { r.gen_range(0..8) as f64 })
        .collect()
}

/// A problem over `f(x, y, z)` that no candidate can satisfy, so searches
/// run until their budget.
pub const UNSAT_PROBLEM: &str = "(set-logic LIA)
(synth-fun f ((x Int) (y Int) (z Int)) Int)
(declare-var x Int)
(declare-var y Int)
(declare-var z Int)
(constraint (and (= (f x y z) 0) (= (f x y z) 1)))
(check-synth)
";
