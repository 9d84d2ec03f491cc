//! Concrete evaluation of terms under SMT-LIB semantics.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::frontend::SynthProblem;
use crate::par::Exec;
use crate::term::{bv_mask, FunDef, Op, Sort, Term, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("sort mismatch: {0}")]
    SortMismatch(String),
    #[error("call of undefined function `{0}`")]
    UndefinedFunction(String),
}

/// Variable assignment. Ordered so that equal valuations print identically.
pub type Valuation = BTreeMap<String, Value>;

/// An input on which a candidate violates the specification.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Counterexample {
    pub values: Valuation,
}

impl Counterexample {
    /// Completes a partial model with default values for missing universals.
    pub fn from_model(universals: &[(String, Sort)], mut model: Valuation) -> Counterexample {
        for (n, s) in universals {
            model.entry(n.clone()).or_insert_with(|| Value::default_for(*s));
        }
        Counterexample { values: model }
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

fn mismatch(op: Op, args: &[Value]) -> EvalError {
    let shown: Vec<String> = args.iter().map(|a| a.to_string()).collect();
    EvalError::SortMismatch(format!("{} applied to {}", op.name(), shown.join(" ")))
}

fn to_signed(bits: u128, width: u32) -> i128 {
    if width >= 128 {
        return bits as i128;
    }
    if bits >> (width - 1) & 1 == 1 {
        (bits as i128) - (1i128 << width)
    } else {
        bits as i128
    }
}

fn eval_bool(t: &Term, v: &Valuation, f: Option<&FunDef>) -> Result<bool, EvalError> {
    match ev(t, v, f)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::SortMismatch(format!("expected Bool, got {other}"))),
    }
}

/// Evaluates a closed-under-`v` term.
pub fn eval(t: &Term, v: &Valuation) -> Result<Value, EvalError> {
    ev(t, v, None)
}

/// Evaluates `t`, resolving calls of `f.name` with `f`'s body.
pub fn eval_with(t: &Term, v: &Valuation, f: &FunDef) -> Result<Value, EvalError> {
    ev(t, v, Some(f))
}

fn ev(t: &Term, v: &Valuation, f: Option<&FunDef>) -> Result<Value, EvalError> {
    match t {
        Term::Var { name, sort } => {
            let val = v.get(name).ok_or_else(|| EvalError::UnboundVariable(name.clone()))?;
            if val.sort() != *sort {
                return Err(EvalError::SortMismatch(format!("`{name}` bound to {val}, expected {sort}")));
            }
            Ok(val.clone())
        }
        Term::Lit(val) => Ok(val.clone()),
        Term::Call { func, args, .. } => match f {
            Some(def) if def.name == *func && def.params.len() == args.len() => {
                let mut frame = Valuation::new();
                for ((n, _), a) in def.params.iter().zip(args) {
                    frame.insert(n.clone(), ev(a, v, f)?);
                }
                ev(&def.body, &frame, f)
            }
            _ => Err(EvalError::UndefinedFunction(func.clone())),
        },
        Term::App { op, args, .. } => match op {
            Op::Ite => {
                if eval_bool(&args[0], v, f)? {
                    ev(&args[1], v, f)
                } else {
                    ev(&args[2], v, f)
                }
            }
            Op::And => {
                for a in args {
                    if !eval_bool(a, v, f)? {
                        return Ok(Value::Bool(false));
                    }
                }
                Ok(Value::Bool(true))
            }
            Op::Or => {
                for a in args {
                    if eval_bool(a, v, f)? {
                        return Ok(Value::Bool(true));
                    }
                }
                Ok(Value::Bool(false))
            }
            Op::Implies => {
                // Right-associative: a => (b => c).
                let (last, init) = args.split_last().expect("arity checked");
                for a in init {
                    if !eval_bool(a, v, f)? {
                        return Ok(Value::Bool(true));
                    }
                }
                ev(last, v, f)
            }
            _ => {
                let vals = args.iter().map(|a| ev(a, v, f)).collect::<Result<Vec<_>, _>>()?;
                apply(*op, &vals)
            }
        },
    }
}

fn apply(op: Op, vals: &[Value]) -> Result<Value, EvalError> {
    use Value::{BitVec, Bool, Int};
    let ints = || -> Result<Vec<&BigInt>, EvalError> {
        vals.iter()
            .map(|x| match x {
                Int(n) => Ok(n),
                _ => Err(mismatch(op, vals)),
            })
            .collect()
    };
    let bvs = || -> Result<(u32, Vec<u128>), EvalError> {
        let mut width = None;
        let mut out = Vec::with_capacity(vals.len());
        for x in vals {
            match x {
                BitVec { width: w, bits } if width.is_none_or(|w0| w0 == *w) => {
                    width = Some(*w);
                    out.push(*bits);
                }
                _ => return Err(mismatch(op, vals)),
            }
        }
        Ok((width.ok_or_else(|| mismatch(op, vals))?, out))
    };
    Ok(match op {
        Op::Add => Int(ints()?.into_iter().sum()),
        Op::Mul => Int(ints()?.into_iter().product()),
        Op::Sub => {
            let xs = ints()?;
            match xs.as_slice() {
                [x] => Int(-*x),
                [x, rest @ ..] => Int(rest.iter().fold((*x).clone(), |acc, y| acc - *y)),
                [] => return Err(mismatch(op, vals)),
            }
        }
        Op::Gt | Op::Ge | Op::Lt | Op::Le => {
            let xs = ints()?;
            let [a, b] = xs.as_slice() else {
                return Err(mismatch(op, vals));
            };
            Bool(match op {
                Op::Gt => a > b,
                Op::Ge => a >= b,
                Op::Lt => a < b,
                _ => a <= b,
            })
        }
        Op::Eq => match vals {
            [a, b] if a.sort() == b.sort() => Bool(a == b),
            _ => return Err(mismatch(op, vals)),
        },
        Op::Not => match vals {
            [Bool(b)] => Bool(!b),
            _ => return Err(mismatch(op, vals)),
        },
        Op::Xor => match vals {
            [Bool(a), Bool(b)] => Bool(a ^ b),
            _ => return Err(mismatch(op, vals)),
        },
        Op::Ite | Op::And | Op::Or | Op::Implies => unreachable!("evaluated lazily"),
        Op::BvNot | Op::BvNeg => {
            let (w, xs) = bvs()?;
            let [x] = xs.as_slice() else {
                return Err(mismatch(op, vals));
            };
            let r = if op == Op::BvNot { !x } else { x.wrapping_neg() };
            Value::bv(w, r)
        }
        _ => {
            let (w, xs) = bvs()?;
            let [a, b] = xs.as_slice() else {
                return Err(mismatch(op, vals));
            };
            let (a, b) = (*a, *b);
            let mask = bv_mask(w);
            match op {
                Op::BvAdd => Value::bv(w, a.wrapping_add(b)),
                Op::BvSub => Value::bv(w, a.wrapping_sub(b)),
                Op::BvMul => Value::bv(w, a.wrapping_mul(b)),
                Op::BvAnd => Value::bv(w, a & b),
                Op::BvOr => Value::bv(w, a | b),
                Op::BvXor => Value::bv(w, a ^ b),
                Op::BvShl => Value::bv(w, if b >= w as u128 { 0 } else { (a << b) & mask }),
                Op::BvLshr => Value::bv(w, if b >= w as u128 { 0 } else { a >> b }),
                Op::BvAshr => {
                    let s = to_signed(a, w);
                    let shift = b.min(w as u128 - 1) as u32;
                    Value::bv(w, (s >> shift) as u128)
                }
                Op::BvUle => Bool(a <= b),
                Op::BvUlt => Bool(a < b),
                Op::BvUge => Bool(a >= b),
                Op::BvUgt => Bool(a > b),
                Op::BvSle => Bool(to_signed(a, w) <= to_signed(b, w)),
                Op::BvSlt => Bool(to_signed(a, w) < to_signed(b, w)),
                Op::BvSge => Bool(to_signed(a, w) >= to_signed(b, w)),
                Op::BvSgt => Bool(to_signed(a, w) > to_signed(b, w)),
                _ => unreachable!("non-bit-vector operators handled above"),
            }
        }
    })
}

/// Whether every constraint, with the target replaced by `candidate`, holds
/// on every counterexample.
pub fn check_cex(candidate: &Term, p: &SynthProblem, cexs: &[Counterexample]) -> Result<bool, EvalError> {
    check_cex_with(candidate, p, cexs, Exec::Sequential)
}

pub fn check_cex_with(
    candidate: &Term,
    p: &SynthProblem,
    cexs: &[Counterexample],
    exec: Exec,
) -> Result<bool, EvalError> {
    if cexs.is_empty() {
        return Ok(true);
    }
    let def = p.candidate(candidate.clone());
    check_defined(&p.constraints, &def, cexs, exec)
}

/// Whether `constraints`, with calls resolved by `def`, hold on every counterexample.
pub fn check_defined(constraints: &[Term], def: &FunDef, cexs: &[Counterexample], exec: Exec) -> Result<bool, EvalError> {
    check_by(cexs, exec, |c| {
        for t in constraints {
            if !eval_bool(t, &c.values, Some(def))? {
                return Ok(false);
            }
        }
        Ok(true)
    })
}

/// [`check_cex`] for constraints that already have the candidate inlined.
pub fn check_instantiated(constraints: &[Term], cexs: &[Counterexample], exec: Exec) -> Result<bool, EvalError> {
    check_by(cexs, exec, |c| {
        for t in constraints {
            if !eval_bool(t, &c.values, None)? {
                return Ok(false);
            }
        }
        Ok(true)
    })
}

fn check_by<F>(cexs: &[Counterexample], exec: Exec, holds: F) -> Result<bool, EvalError>
where
    F: Fn(&Counterexample) -> Result<bool, EvalError> + Sync + Send,
{
    // Counterexamples most recently added are the likeliest to fail.
    let verdicts = match exec {
        Exec::Sequential => {
            for c in cexs.iter().rev() {
                if !holds(c)? {
                    return Ok(false);
                }
            }
            return Ok(true);
        }
        Exec::Parallel => exec.map(cexs, holds),
    };
    for v in verdicts {
        if !v? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_problem, testdata::MAX3};
    use crate::sexpr::parse_one;
    use crate::term::{TermReader, VarScope};

    fn read(src: &str, vars: &[(&str, Sort)]) -> Term {
        let scope = VarScope::new(vars.iter().map(|(n, s)| (n.to_string(), *s)));
        TermReader::smtlib().read(&parse_one(src).unwrap(), &scope).unwrap()
    }

    fn vals(pairs: &[(&str, i64)]) -> Valuation {
        pairs.iter().map(|(n, v)| (n.to_string(), Value::int(*v))).collect()
    }

    const INTS: [(&str, Sort); 3] = [("vr0", Sort::Int), ("vr1", Sort::Int), ("vr2", Sort::Int)];
    const PROGRAM1: &str = "(ite (>= vr0 vr1) (ite (>= vr0 vr2) vr0 vr2) (ite (>= vr1 vr2) vr1 vr2))";

    #[test]
    fn arithmetic() {
        assert_eq!(eval(&read("(+ 1 2)", &[]), &Valuation::new()).unwrap(), Value::int(3));
        assert_eq!(eval(&read("(- 5)", &[]), &Valuation::new()).unwrap(), Value::int(-5));
        assert_eq!(eval(&read("(- 10 3 2)", &[]), &Valuation::new()).unwrap(), Value::int(5));
    }

    #[test]
    fn program1_at_a_point() {
        let v = vals(&[("vr0", 1), ("vr1", 5), ("vr2", 3)]);
        assert_eq!(eval(&read(PROGRAM1, &INTS), &v).unwrap(), Value::int(5));
    }

    #[test]
    fn bit_vectors_wrap() {
        let v = Valuation::new();
        assert_eq!(eval(&read("(bvadd #x0F #x01)", &[]), &v).unwrap(), Value::bv(8, 0x10));
        assert_eq!(eval(&read("(bvadd #xFF #x01)", &[]), &v).unwrap(), Value::bv(8, 0));
        assert_eq!(eval(&read("(bvneg #x01)", &[]), &v).unwrap(), Value::bv(8, 0xFF));
        assert_eq!(eval(&read("(bvashr #x80 #x01)", &[]), &v).unwrap(), Value::bv(8, 0xC0));
        assert_eq!(eval(&read("(bvshl #x01 #x09)", &[]), &v).unwrap(), Value::bv(8, 0));
        assert_eq!(eval(&read("(bvslt #x80 #x00)", &[]), &v).unwrap(), Value::Bool(true));
    }

    #[test]
    fn ite_is_lazy() {
        // The untaken branch refers to an unbound variable.
        let t = read("(ite true 1 y)", &[("y", Sort::Int)]);
        assert_eq!(eval(&t, &Valuation::new()).unwrap(), Value::int(1));
        let t = read("(ite false 1 y)", &[("y", Sort::Int)]);
        assert_eq!(eval(&t, &Valuation::new()), Err(EvalError::UnboundVariable("y".into())));
    }

    #[test]
    fn check_cex_examples() {
        let p = parse_problem(MAX3).unwrap();
        let zero = Counterexample {
            values: vals(&[("vr0", 0), ("vr1", 0), ("vr2", 0)]),
        };
        assert!(check_cex(&read(PROGRAM1, &INTS), &p, &[zero]).unwrap());
        assert!(check_cex(&read("vr0", &INTS), &p, &[]).unwrap());
        let bad = Counterexample {
            values: vals(&[("vr0", 0), ("vr1", 1), ("vr2", 0)]),
        };
        assert!(!check_cex(&read("vr0", &INTS), &p, &[bad.clone()]).unwrap());
        assert!(!check_cex_with(&read("vr0", &INTS), &p, &[bad], Exec::Parallel).unwrap());
    }

    #[test]
    fn model_completion() {
        let c = Counterexample::from_model(&[("a".into(), Sort::Int), ("b".into(), Sort::Bool)], vals(&[("a", 4)]));
        assert_eq!(c.values["b"], Value::Bool(false));
        assert_eq!(c.to_string(), "(a=4, b=false)");
    }
}
