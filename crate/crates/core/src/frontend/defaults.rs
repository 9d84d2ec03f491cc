use super::parse::default_constants;
use super::{FrontendError, Logic};
use crate::grammar::{Grammar, NonTerminal, NtId, Pattern};
use crate::term::{Op, Sort, Term};

const LIA_ARITH: [Op; 3] = [Op::Add, Op::Sub, Op::Mul];
const LIA_CMP: [Op; 5] = [Op::Gt, Op::Eq, Op::Lt, Op::Ge, Op::Le];
const BV_BINARY: [Op; 8] = [
    Op::BvAdd,
    Op::BvSub,
    Op::BvAnd,
    Op::BvOr,
    Op::BvXor,
    Op::BvShl,
    Op::BvLshr,
    Op::BvAshr,
];
const BV_UNARY: [Op; 2] = [Op::BvNot, Op::BvNeg];
const BV_CMP: [Op; 5] = [Op::BvUle, Op::BvUlt, Op::BvUge, Op::BvUgt, Op::Eq];

fn app(op: Op, args: &[NtId]) -> Pattern {
    Pattern::App(op, args.iter().map(|a| Pattern::Hole(*a)).collect())
}

struct Builder<'a> {
    g: Grammar,
    params: &'a [(String, Sort)],
}

impl Builder<'_> {
    fn leaves(&mut self, nt: NtId, sort: Sort) -> Result<(), FrontendError> {
        for (n, s) in self.params.iter().filter(|(_, s)| *s == sort) {
            self.g.add_rule(nt, &Pattern::Leaf(Term::var(n.clone(), *s)))?;
        }
        for c in default_constants(sort) {
            self.g.add_rule(nt, &Pattern::Leaf(c))?;
        }
        Ok(())
    }

    fn lia(&mut self, int: NtId, boolean: NtId) -> Result<(), FrontendError> {
        self.leaves(int, Sort::Int)?;
        for op in LIA_ARITH {
            self.g.add_rule(int, &app(op, &[int, int]))?;
        }
        self.g.add_rule(int, &app(Op::Ite, &[boolean, int, int]))?;
        Ok(())
    }

    fn boolean(&mut self, boolean: NtId, operand: NtId, cmps: &[Op], connectives: bool) -> Result<(), FrontendError> {
        self.leaves(boolean, Sort::Bool)?;
        if connectives {
            self.g.add_rule(boolean, &app(Op::And, &[boolean, boolean]))?;
            self.g.add_rule(boolean, &app(Op::Or, &[boolean, boolean]))?;
            self.g.add_rule(boolean, &app(Op::Not, &[boolean]))?;
        }
        for op in cmps {
            self.g.add_rule(boolean, &app(*op, &[operand, operand]))?;
        }
        Ok(())
    }

    fn bv(&mut self, bv: NtId, boolean: NtId, width: u32) -> Result<(), FrontendError> {
        self.leaves(bv, Sort::BitVec(width))?;
        for op in BV_BINARY {
            self.g.add_rule(bv, &app(op, &[bv, bv]))?;
        }
        for op in BV_UNARY {
            self.g.add_rule(bv, &app(op, &[bv]))?;
        }
        self.g.add_rule(bv, &app(Op::Ite, &[boolean, bv, bv]))?;
        Ok(())
    }
}

fn nt(name: &str, sort: Sort) -> NonTerminal {
    NonTerminal {
        name: name.to_string(),
        sort,
    }
}

/// The full-theory grammar for a target signature: one nonterminal per sort,
/// every parameter and the constants of each sort as terminal rules, and the
/// operators of the theory.
pub fn default_grammar(logic: Logic, params: &[(String, Sort)], ret: Sort) -> Result<Grammar, FrontendError> {
    let ints = matches!(logic, Logic::Lia | Logic::LiaInv);
    let unsupported = || FrontendError::UnsupportedLogic(format!("{logic} with return sort {ret}"));
    let (nts, kind) = match (ints, ret) {
        (true, Sort::Int) => (vec![nt("Start", Sort::Int), nt("StartBool", Sort::Bool)], 0),
        (true, Sort::Bool) => (vec![nt("Start", Sort::Bool), nt("StartInt", Sort::Int)], 1),
        (false, Sort::BitVec(w)) => (vec![nt("Start", Sort::BitVec(w)), nt("StartBool", Sort::Bool)], 2),
        (false, Sort::Bool) => {
            let w = params
                .iter()
                .find_map(|(_, s)| match s {
                    Sort::BitVec(w) => Some(*w),
                    _ => None,
                })
                .ok_or_else(unsupported)?;
            (vec![nt("Start", Sort::Bool), nt("StartBv", Sort::BitVec(w))], 3)
        }
        _ => return Err(unsupported()),
    };
    let mut b = Builder {
        g: Grammar::new(nts),
        params,
    };
    match kind {
        0 => {
            b.lia(0, 1)?;
            b.boolean(1, 0, &LIA_CMP, true)?;
        }
        1 => {
            b.boolean(0, 1, &LIA_CMP, true)?;
            b.lia(1, 0)?;
        }
        2 => {
            let Sort::BitVec(w) = ret else { unreachable!() };
            b.bv(0, 1, w)?;
            b.boolean(1, 0, &BV_CMP, false)?;
        }
        _ => {
            let Sort::BitVec(w) = b.g.nonterminal(1).sort else { unreachable!() };
            b.boolean(0, 1, &BV_CMP, false)?;
            b.bv(1, 0, w)?;
        }
    }
    Ok(b.g)
}
