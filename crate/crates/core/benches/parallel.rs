use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use guidesyn::enumerate::{complete_program, replace_nonterminals, RuleSampler, SententialForm};
use guidesyn::frontend::parse_problem;
use guidesyn::grammar::{build_pcfg, count_rules, WeightedGrammar};
use guidesyn::interp::{check_defined, Counterexample};
use guidesyn::par::Exec;
use guidesyn::term::{Op, Sort, Term, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX3: &str = include_str!("../../../benchmarks/lia/max3.sl");

fn program1() -> Term {
    let v = |n: &str| Term::var(n, Sort::Int);
    let ge = |a, b| Term::app(Op::Ge, vec![a, b]).unwrap();
    let ite = |c, a, b| Term::app(Op::Ite, vec![c, a, b]).unwrap();
    ite(
        ge(v("vr0"), v("vr1")),
        ite(ge(v("vr0"), v("vr2")), v("vr0"), v("vr2")),
        ite(ge(v("vr1"), v("vr2")), v("vr1"), v("vr2")),
    )
}

fn strategies() -> [(&'static str, Exec); 2] {
    [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)]
}

fn bench_check_defined(c: &mut Criterion) {
    let p = parse_problem(MAX3).unwrap();
    let def = p.candidate(program1());
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let cexs: Vec<Counterexample> = (0..4096)
        .map(|_| Counterexample {
            values: ["vr0", "vr1", "vr2"]
                .iter()
                .map(|n| (n.to_string(), Value::int(r.gen_range(-1000..1000))))
                .collect(),
        })
        .collect();
    let mut group = c.benchmark_group("check_defined");
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::new(name, cexs.len()), &exec, |b, &exec| {
            b.iter(|| check_defined(black_box(&p.constraints), &def, &cexs, exec).unwrap())
        });
    }
    group.finish();
}

fn bench_count_rules(c: &mut Criterion) {
    let p = parse_problem(MAX3).unwrap();
    let g = p.grammar.clone();
    let sampler = RuleSampler::new(build_pcfg(&WeightedGrammar::uniform(g.clone(), 1.0)).unwrap());
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let programs: Vec<Term> = (0..2000)
        .map(|_| {
            let mut s = SententialForm::start(&g);
            for _ in 0..3 {
                s = replace_nonterminals(&s, &sampler, &mut r).unwrap();
            }
            complete_program(&s, &sampler, &mut r).unwrap().to_term(&g).unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("count_rules");
    for (name, exec) in strategies() {
        group.bench_with_input(BenchmarkId::new(name, programs.len()), &exec, |b, &exec| {
            b.iter(|| count_rules(&g, black_box(&programs), exec))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_check_defined, bench_count_rules);
criterion_main!(benches);
