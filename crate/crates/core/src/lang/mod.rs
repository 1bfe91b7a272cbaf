//! Formulae and terms of the inequality language, with desugaring, renaming
//! of process constants and a canonical pretty-printer.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::prob::format_rational;

pub use parser::{parse_formula, parse_formula_sugared, parse_term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("unknown agent `{name}` at {pos}")]
    UnknownAgent { pos: usize, name: String },
    #[error("`{name}` at {pos} takes {expected} argument(s), got {got}")]
    Arity {
        pos: usize,
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("empty agent group at {pos}")]
    EmptyGroup { pos: usize },
    #[error("renaming is undefined on `{0}`")]
    Unmapped(String),
    #[error("function `{name}`: {message}")]
    BadFunction { name: String, message: String },
}

/// The built-in measurable functions a model may declare.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Function {
    Add { arity: usize },
    Sub,
    Mul { arity: usize },
    Min { arity: usize },
    Max { arity: usize },
    /// `x ↦ x + c`
    AddConst(BigRational),
    /// A named constant, arity 0.
    Const(BigRational),
}

impl Function {
    pub fn arity(&self) -> usize {
        match self {
            Function::Add { arity }
            | Function::Mul { arity }
            | Function::Min { arity }
            | Function::Max { arity } => *arity,
            Function::Sub => 2,
            Function::AddConst(_) => 1,
            Function::Const(_) => 0,
        }
    }

    /// Applies the function; `args.len()` must equal the arity.
    pub fn apply(&self, args: &[BigRational]) -> BigRational {
        debug_assert_eq!(args.len(), self.arity());
        match self {
            Function::Add { .. } => args.iter().cloned().sum(),
            Function::Sub => &args[0] - &args[1],
            Function::Mul { .. } => args.iter().cloned().product(),
            Function::Min { .. } => args.iter().min().cloned().expect("arity >= 1"),
            Function::Max { .. } => args.iter().max().cloned().expect("arity >= 1"),
            Function::AddConst(c) => &args[0] + c,
            Function::Const(c) => c.clone(),
        }
    }
}

/// Names a formula may refer to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Declarations {
    pub agents: Vec<String>,
    pub processes: BTreeSet<String>,
    pub functions: BTreeMap<String, Function>,
}

pub const KEYWORDS: [&str; 6] = ["K", "B", "CK", "CB", "now", "all"];

impl Declarations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn agent(mut self, name: &str) -> Self {
        self.agents.push(name.to_string());
        self
    }

    pub fn process(mut self, name: &str) -> Self {
        self.processes.insert(name.to_string());
        self
    }

    pub fn function(mut self, name: &str, f: Function) -> Self {
        self.functions.insert(name.to_string(), f);
        self
    }

    /// Rejects clashing or reserved names and functions of invalid arity.
    pub fn validate(&self) -> Result<(), LangError> {
        let bad = |name: &str, message: &str| LangError::BadFunction {
            name: name.to_string(),
            message: message.to_string(),
        };
        for (name, f) in &self.functions {
            if self.processes.contains(name) {
                return Err(bad(name, "also declared as a process"));
            }
            let variadic = matches!(
                f,
                Function::Add { .. } | Function::Mul { .. } | Function::Min { .. } | Function::Max { .. }
            );
            if variadic && f.arity() == 0 {
                return Err(bad(name, "arity must be at least 1"));
            }
        }
        for name in self.processes.iter().chain(self.functions.keys()).chain(&self.agents) {
            if KEYWORDS.contains(&name.as_str()) {
                return Err(bad(name, "is a reserved word"));
            }
        }
        Ok(())
    }
}

/// A term denoting a real-valued process.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(BigRational),
    /// The current time.
    Now,
    /// A process evaluated at the (possibly random) time given by the inner term.
    Proc(String, Box<Term>),
    Func(String, Vec<Term>),
}

impl Term {
    pub fn int(n: i64) -> Term {
        Term::Const(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn proc(name: &str, at: Term) -> Term {
        Term::Proc(name.to_string(), Box::new(at))
    }

    pub fn func(name: &str, args: Vec<Term>) -> Term {
        Term::Func(name.to_string(), args)
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> Result<Term, LangError> {
        Ok(match self {
            Term::Const(_) | Term::Now => self.clone(),
            Term::Proc(x, inner) => {
                let y = map.get(x).ok_or_else(|| LangError::Unmapped(x.clone()))?;
                Term::Proc(y.clone(), Box::new(inner.rename(map)?))
            }
            Term::Func(f, args) => Term::Func(
                f.clone(),
                args.iter().map(|a| a.rename(map)).collect::<Result<_, _>>()?,
            ),
        })
    }

    fn collect_processes<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Term::Const(_) | Term::Now => {}
            Term::Proc(x, inner) => {
                out.insert(x);
                inner.collect_processes(out);
            }
            Term::Func(_, args) => args.iter().for_each(|a| a.collect_processes(out)),
        }
    }
}

/// A non-empty set of agents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Group(BTreeSet<String>);

impl Group {
    pub fn new<I, S>(agents: I) -> Option<Group>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = agents.into_iter().map(Into::into).collect();
        (!set.is_empty()).then_some(Group(set))
    }

    pub fn members(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Comparisons other than `<=`, all of which are sugar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparison {
    Eq,
    Ne,
    Lt,
    Ge,
    Gt,
}

impl Comparison {
    fn symbol(self) -> &'static str {
        match self {
            Comparison::Eq => "=",
            Comparison::Ne => "!=",
            Comparison::Lt => "<",
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Leq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Knows(String, Box<Formula>),
    CommonKnowledge(Group, Box<Formula>),
    Believes(String, Box<Formula>),
    CommonBelief(Group, Box<Formula>),
    // sugar
    Compare(Comparison, Term, Term),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn leq(a: Term, b: Term) -> Formula {
        Formula::Leq(a, b)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(f: Formula, g: Formula) -> Formula {
        Formula::And(Box::new(f), Box::new(g))
    }

    pub fn or(f: Formula, g: Formula) -> Formula {
        Formula::Or(Box::new(f), Box::new(g))
    }

    pub fn implies(f: Formula, g: Formula) -> Formula {
        Formula::Implies(Box::new(f), Box::new(g))
    }

    pub fn iff(f: Formula, g: Formula) -> Formula {
        Formula::Iff(Box::new(f), Box::new(g))
    }

    pub fn knows(agent: &str, f: Formula) -> Formula {
        Formula::Knows(agent.to_string(), Box::new(f))
    }

    pub fn believes(agent: &str, f: Formula) -> Formula {
        Formula::Believes(agent.to_string(), Box::new(f))
    }

    pub fn common_knowledge(group: Group, f: Formula) -> Formula {
        Formula::CommonKnowledge(group, Box::new(f))
    }

    pub fn common_belief(group: Group, f: Formula) -> Formula {
        Formula::CommonBelief(group, Box::new(f))
    }

    /// A formula that is constantly true: `0 <= 0`.
    pub fn top() -> Formula {
        Formula::Leq(Term::Const(BigRational::zero()), Term::Const(BigRational::zero()))
    }

    /// Uses only `<=`, `!`, `&` and the four modalities.
    pub fn is_core(&self) -> bool {
        match self {
            Formula::Leq(..) => true,
            Formula::Not(f)
            | Formula::Knows(_, f)
            | Formula::Believes(_, f)
            | Formula::CommonKnowledge(_, f)
            | Formula::CommonBelief(_, f) => f.is_core(),
            Formula::And(f, g) => f.is_core() && g.is_core(),
            Formula::Compare(..) | Formula::Or(..) | Formula::Implies(..) | Formula::Iff(..) => false,
        }
    }

    /// Rewrites every abbreviation into the core connectives.
    pub fn desugar(&self) -> Formula {
        use Formula as F;
        let d = |f: &Formula| f.desugar();
        match self {
            F::Leq(..) => self.clone(),
            F::Not(f) => F::not(d(f)),
            F::And(f, g) => F::and(d(f), d(g)),
            F::Knows(i, f) => F::Knows(i.clone(), Box::new(d(f))),
            F::Believes(i, f) => F::Believes(i.clone(), Box::new(d(f))),
            F::CommonKnowledge(g, f) => F::CommonKnowledge(g.clone(), Box::new(d(f))),
            F::CommonBelief(g, f) => F::CommonBelief(g.clone(), Box::new(d(f))),
            F::Compare(op, a, b) => desugar_comparison(*op, a, b),
            // φ ∨ ψ ≡ ¬((¬φ) ∧ (¬ψ))
            F::Or(f, g) => F::not(F::and(F::not(d(f)), F::not(d(g)))),
            // φ → ψ ≡ (¬φ) ∨ ψ
            F::Implies(f, g) => F::or(F::not((**f).clone()), (**g).clone()).desugar(),
            // φ ↔ ψ ≡ (φ → ψ) ∧ (ψ → φ)
            F::Iff(f, g) => F::and(
                F::implies((**f).clone(), (**g).clone()),
                F::implies((**g).clone(), (**f).clone()),
            )
            .desugar(),
        }
    }

    /// Substitutes process constants through `map`.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Result<Formula, LangError> {
        use Formula as F;
        let r = |f: &Formula| f.rename(map).map(Box::new);
        Ok(match self {
            F::Leq(a, b) => F::Leq(a.rename(map)?, b.rename(map)?),
            F::Compare(op, a, b) => F::Compare(*op, a.rename(map)?, b.rename(map)?),
            F::Not(f) => F::Not(r(f)?),
            F::And(f, g) => F::And(r(f)?, r(g)?),
            F::Or(f, g) => F::Or(r(f)?, r(g)?),
            F::Implies(f, g) => F::Implies(r(f)?, r(g)?),
            F::Iff(f, g) => F::Iff(r(f)?, r(g)?),
            F::Knows(i, f) => F::Knows(i.clone(), r(f)?),
            F::Believes(i, f) => F::Believes(i.clone(), r(f)?),
            F::CommonKnowledge(g, f) => F::CommonKnowledge(g.clone(), r(f)?),
            F::CommonBelief(g, f) => F::CommonBelief(g.clone(), r(f)?),
        })
    }

    /// Process names occurring anywhere in the formula.
    pub fn processes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.visit_terms(&mut |t| t.collect_processes(&mut out));
        out
    }

    fn visit_terms<'a>(&'a self, visit: &mut impl FnMut(&'a Term)) {
        use Formula as F;
        match self {
            F::Leq(a, b) | F::Compare(_, a, b) => {
                visit(a);
                visit(b);
            }
            F::Not(f)
            | F::Knows(_, f)
            | F::Believes(_, f)
            | F::CommonKnowledge(_, f)
            | F::CommonBelief(_, f) => f.visit_terms(visit),
            F::And(f, g) | F::Or(f, g) | F::Implies(f, g) | F::Iff(f, g) => {
                f.visit_terms(visit);
                g.visit_terms(visit);
            }
        }
    }

    /// Nesting depth of connectives and modalities; atoms have depth 0.
    pub fn depth(&self) -> usize {
        use Formula as F;
        match self {
            F::Leq(..) | F::Compare(..) => 0,
            F::Not(f)
            | F::Knows(_, f)
            | F::Believes(_, f)
            | F::CommonKnowledge(_, f)
            | F::CommonBelief(_, f) => 1 + f.depth(),
            F::And(f, g) | F::Or(f, g) | F::Implies(f, g) | F::Iff(f, g) => 1 + f.depth().max(g.depth()),
        }
    }
}

fn desugar_comparison(op: Comparison, a: &Term, b: &Term) -> Formula {
    use Formula as F;
    let leq = |x: &Term, y: &Term| F::Leq(x.clone(), y.clone());
    match op {
        // m1 = m2 ≡ (m1 ≤ m2) ∧ (m2 ≤ m1)
        Comparison::Eq => F::and(leq(a, b), leq(b, a)),
        // m1 ≠ m2 ≡ ¬(m1 = m2)
        Comparison::Ne => F::not(desugar_comparison(Comparison::Eq, a, b)),
        // m1 < m2 ≡ (m1 ≤ m2) ∧ (m1 ≠ m2)
        Comparison::Lt => F::and(leq(a, b), desugar_comparison(Comparison::Ne, a, b)),
        // m1 ≥ m2 ≡ ¬(m1 < m2)
        Comparison::Ge => F::not(desugar_comparison(Comparison::Lt, a, b)),
        // m1 > m2 ≡ ¬(m1 ≤ m2)
        Comparison::Gt => F::not(leq(a, b)),
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(r) => f.write_str(&format_rational(r)),
            Term::Now => f.write_str("now"),
            Term::Proc(x, inner) => write!(f, "{x}({inner})"),
            Term::Func(name, args) if args.is_empty() => f.write_str(name),
            Term::Func(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().cloned().collect::<Vec<_>>().join(","))
    }
}

/// Fully parenthesised canonical form; parsing it back yields the same AST.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula as F;
        match self {
            F::Leq(a, b) => write!(f, "({a} <= {b})"),
            F::Compare(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            F::Not(g) => write!(f, "!{g}"),
            F::And(g, h) => write!(f, "({g} & {h})"),
            F::Or(g, h) => write!(f, "({g} | {h})"),
            F::Implies(g, h) => write!(f, "({g} -> {h})"),
            F::Iff(g, h) => write!(f, "({g} <-> {h})"),
            F::Knows(i, g) => write!(f, "K[{i}] {g}"),
            F::Believes(i, g) => write!(f, "B[{i}] {g}"),
            F::CommonKnowledge(grp, g) => write!(f, "CK[{grp}] {g}"),
            F::CommonBelief(grp, g) => write!(f, "CB[{grp}] {g}"),
        }
    }
}
