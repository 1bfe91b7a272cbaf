//! Term semantics, the recursive interpretation of formulae as truth processes,
//! the greatest-fixed-point solvers for common knowledge and belief, and
//! ε-validity.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::lang::{Formula, Group, Term};
use crate::model::{group_expect, Adaptedness, Model};
use crate::prob::{cond_exp_with, format_rational, null_blocks, Scalar, SigmaAlgebra};

pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Iteration cap for the exact solver, which only stops on an exact fixpoint.
pub const EXACT_MAX_ITER: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("unknown process `{0}`")]
    UnknownProcess(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("function `{name}` expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("time {0} is not declared")]
    UnknownTime(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("{process}: value {value} at state `{state}` is not a declared time")]
    NotATime {
        process: String,
        state: String,
        value: String,
    },
    #[error("group has measure zero")]
    NullGroup,
    #[error("ε = {0} is outside [0, 1]")]
    BadEpsilon(f64),
    #[error("formula contains sugar; desugar it first")]
    NotCore,
    #[error("model is {0}; evaluation needs an adapted model")]
    NotAdapted(Adaptedness),
    #[error("fixpoint not reached after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        trace: Box<FixpointTrace>,
    },
    #[error("no exact fixpoint within {0} iterations")]
    NotExact(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Accept pre-adapted models (with a warning).
    pub allow_pre_adapted: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            allow_pre_adapted: false,
        }
    }
}

/// Truth values indexed `[time][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthProcess<T = f64> {
    values: Vec<Vec<T>>,
}

impl<T> TruthProcess<T> {
    pub fn new(values: Vec<Vec<T>>) -> Self {
        TruthProcess { values }
    }

    pub fn at(&self, time: usize) -> &[T] {
        &self.values[time]
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.values
    }
}

/// Iterates `f_0 = 1, f_1, …` of a common-knowledge or common-belief solve at
/// one time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixpointTrace {
    pub iterates: Vec<Vec<f64>>,
    /// `residuals[n] = sup |f_{n+1} − f_n|`
    pub residuals: Vec<f64>,
    /// First `n` whose residual is within tolerance.
    pub converged_at: Option<usize>,
}

impl FixpointTrace {
    /// One CSV row per iteration: `n,sup_residual,min_value,max_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,sup_residual,min_value,max_value\n");
        for (n, r) in self.residuals.iter().enumerate() {
            let f = &self.iterates[n + 1];
            let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            out.push_str(&format!(
                "{},{},{},{}\n",
                n + 1,
                format_value(*r),
                format_value(min),
                format_value(max)
            ));
        }
        out
    }
}

/// Prints at 12 significant digits with trailing zeros removed.
pub fn format_value(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v.is_infinite() { format!("{v}") } else { "0".into() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("valid float");
    format!("{rounded}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Knowledge,
    Belief,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Knowledge => "knowledge",
            Modality::Belief => "belief",
        })
    }
}

fn sigma_of(model: &Model, agent: usize, time: usize, modality: Modality) -> &SigmaAlgebra {
    let p = model.point(agent, time);
    match modality {
        Modality::Knowledge => p.knowledge(),
        Modality::Belief => p.belief(),
    }
}

/// `⟦m⟧(t)` as a function on Ω.
pub fn eval_term(term: &Term, time: usize, model: &Model) -> Result<Vec<BigRational>, EvalError> {
    let n = model.omega().len();
    Ok(match term {
        Term::Const(c) => vec![c.clone(); n],
        Term::Now => vec![model.times()[time].clone(); n],
        Term::Proc(name, inner) => {
            let process = model
                .processes()
                .get(name)
                .ok_or_else(|| EvalError::UnknownProcess(name.clone()))?;
            let at = eval_term(inner, time, model)?;
            at.iter()
                .enumerate()
                .map(|(w, s)| {
                    let ti = model.time_index(s).ok_or_else(|| EvalError::NotATime {
                        process: name.clone(),
                        state: model.omega().name(w).to_string(),
                        value: format_rational(s),
                    })?;
                    Ok(process.at(ti)[w].clone())
                })
                .collect::<Result<_, EvalError>>()?
        }
        Term::Func(name, args) => {
            let f = model
                .functions()
                .get(name)
                .ok_or_else(|| EvalError::UnknownFunction(name.clone()))?;
            if f.arity() != args.len() {
                return Err(EvalError::Arity {
                    name: name.clone(),
                    expected: f.arity(),
                    got: args.len(),
                });
            }
            let cols = args
                .iter()
                .map(|a| eval_term(a, time, model))
                .collect::<Result<Vec<_>, _>>()?;
            (0..n)
                .map(|w| {
                    let xs: Vec<BigRational> = cols.iter().map(|c| c[w].clone()).collect();
                    f.apply(&xs)
                })
                .collect()
        }
    })
}

fn to_f64_vec<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(Scalar::to_f64).collect()
}

fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.to_f64() - y.to_f64()).abs())
        .fold(0.0, f64::max)
}

fn minimum<T: Scalar>(a: &T, b: &T) -> T {
    if a <= b {
        a.clone()
    } else {
        b.clone()
    }
}

/// One step `f ↦ 𝔼^ρ[ 𝔼_i[min(f, φ) | σ_i] , G ]` of the fixpoint equation.
fn common_step<T: Scalar>(
    model: &Model,
    members: &[usize],
    time: usize,
    modality: Modality,
    child: &[T],
    f: &[T],
) -> Result<Vec<T>, EvalError> {
    let meet: Vec<T> = f.iter().zip(child).map(|(a, b)| minimum(a, b)).collect();
    let per_agent: Vec<Vec<T>> = members
        .iter()
        .map(|&i| {
            let weights = model.point(i, time).measure().weights_as::<T>();
            cond_exp_with(&weights, sigma_of(model, i, time, modality), &meet)
        })
        .collect();
    (0..f.len())
        .map(|w| {
            let vals: Vec<T> = per_agent.iter().map(|e| e[w].clone()).collect();
            group_expect(model.agents(), members, &vals).map_err(|_| EvalError::NullGroup)
        })
        .collect()
}

fn group_members(model: &Model, group: &Group) -> Result<Vec<usize>, EvalError> {
    group
        .members()
        .map(|a| model.agents().index_of(a).map_err(|_| EvalError::UnknownAgent(a.to_string())))
        .collect()
}

/// Greatest fixed point of the common knowledge / belief equation at one time,
/// iterated down from the constant `1`.
pub fn solve_common<T: Scalar>(
    child: &[T],
    group: &Group,
    modality: Modality,
    model: &Model,
    time: usize,
    opts: &EvalOptions,
) -> Result<(Vec<T>, FixpointTrace), EvalError> {
    let members = group_members(model, group)?;
    let mass: BigRational = members.iter().map(|&i| model.agents().rho()[i].clone()).sum();
    if mass.is_zero() {
        return Err(EvalError::NullGroup);
    }
    let cap = if T::EXACT { opts.max_iter.min(EXACT_MAX_ITER) } else { opts.max_iter };
    let mut f: Vec<T> = vec![T::one(); child.len()];
    let mut trace = FixpointTrace {
        iterates: vec![to_f64_vec(&f)],
        ..FixpointTrace::default()
    };
    for n in 0..cap {
        let next = common_step(model, &members, time, modality, child, &f)?;
        let residual = sup_distance(&f, &next);
        let stable = next == f;
        trace.iterates.push(to_f64_vec(&next));
        trace.residuals.push(residual);
        let done = if T::EXACT { stable } else { residual <= opts.tol };
        if done {
            trace.converged_at = Some(n);
            let result = if T::EXACT {
                next
            } else {
                snap(model, &members, time, modality, child, next, opts.tol)?
            };
            return Ok((result, trace));
        }
        f = next;
    }
    if T::EXACT {
        return Err(EvalError::NotExact(cap));
    }
    Err(EvalError::NotConverged {
        iterations: cap,
        residual: trace.residuals.last().copied().unwrap_or(0.0),
        trace: Box::new(trace),
    })
}

/// Rounds values within `tol` of 0 or 1 when the rounded vector is still a
/// fixed point up to `tol`.
fn snap<T: Scalar>(
    model: &Model,
    members: &[usize],
    time: usize,
    modality: Modality,
    child: &[T],
    f: Vec<T>,
    tol: f64,
) -> Result<Vec<T>, EvalError> {
    let snapped: Vec<T> = f
        .iter()
        .map(|x| {
            let v = x.to_f64();
            if v.abs() <= tol {
                T::zero()
            } else if (1.0 - v).abs() <= tol {
                T::one()
            } else {
                x.clone()
            }
        })
        .collect();
    if snapped == f {
        return Ok(f);
    }
    let again = common_step(model, members, time, modality, child, &snapped)?;
    Ok(if sup_distance(&snapped, &again) <= tol { snapped } else { f })
}

pub fn solve_ck(child: &[f64], group: &Group, model: &Model, time: usize, opts: &EvalOptions) -> Result<(Vec<f64>, FixpointTrace), EvalError> {
    solve_common(child, group, Modality::Knowledge, model, time, opts)
}

pub fn solve_cb(child: &[f64], group: &Group, model: &Model, time: usize, opts: &EvalOptions) -> Result<(Vec<f64>, FixpointTrace), EvalError> {
    solve_common(child, group, Modality::Belief, model, time, opts)
}

/// Memoizing evaluator of core formulae, one time at a time.
pub struct Interpreter<'m, T: Scalar = f64> {
    model: &'m Model,
    opts: EvalOptions,
    memo: HashMap<(Formula, usize), Rc<Vec<T>>>,
    traces: Vec<(Formula, usize, FixpointTrace)>,
    warnings: BTreeSet<String>,
}

impl<'m, T: Scalar> Interpreter<'m, T> {
    pub fn new(model: &'m Model, opts: EvalOptions) -> Result<Self, EvalError> {
        let mut warnings = BTreeSet::new();
        match model.adaptedness() {
            Adaptedness::Adapted => {}
            Adaptedness::PreAdapted if opts.allow_pre_adapted => {
                warnings.insert("model is only pre-adapted; beliefs may use future information".to_string());
            }
            level => return Err(EvalError::NotAdapted(level)),
        }
        Ok(Interpreter {
            model,
            opts,
            memo: HashMap::new(),
            traces: Vec::new(),
            warnings,
        })
    }

    pub fn model(&self) -> &'m Model {
        self.model
    }

    /// Fixpoint traces of every CK/CB node solved so far.
    pub fn traces(&self) -> &[(Formula, usize, FixpointTrace)] {
        &self.traces
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.warnings.iter().map(String::as_str)
    }

    fn agent(&self, name: &str) -> Result<usize, EvalError> {
        self.model
            .agents()
            .index_of(name)
            .map_err(|_| EvalError::UnknownAgent(name.to_string()))
    }

    fn expect(&mut self, agent: usize, time: usize, modality: Modality, x: &[T]) -> Vec<T> {
        let point = self.model.point(agent, time);
        let sigma = sigma_of(self.model, agent, time, modality);
        if !null_blocks(point.measure(), sigma).is_empty() {
            self.warnings.insert(format!(
                "{} of `{}` at time {} has null blocks; conditional expectation is 0 there",
                modality,
                self.model.agents().agents()[agent],
                self.model.time_label(time)
            ));
        }
        cond_exp_with(&point.measure().weights_as::<T>(), sigma, x)
    }

    /// `⟦φ⟧(t)` for a core formula.
    pub fn eval_at(&mut self, phi: &Formula, time: usize) -> Result<Rc<Vec<T>>, EvalError> {
        if time >= self.model.times().len() {
            return Err(EvalError::UnknownTime(time.to_string()));
        }
        let key = (phi.clone(), time);
        if let Some(v) = self.memo.get(&key) {
            return Ok(Rc::clone(v));
        }
        let values: Vec<T> = match phi {
            Formula::Leq(a, b) => {
                let (x, y) = (eval_term(a, time, self.model)?, eval_term(b, time, self.model)?);
                x.iter()
                    .zip(&y)
                    .map(|(x, y)| if x <= y { T::one() } else { T::zero() })
                    .collect()
            }
            Formula::Not(f) => self.eval_at(f, time)?.iter().map(|v| T::one() - v.clone()).collect(),
            Formula::And(f, g) => {
                let (x, y) = (self.eval_at(f, time)?, self.eval_at(g, time)?);
                x.iter().zip(y.iter()).map(|(a, b)| minimum(a, b)).collect()
            }
            Formula::Knows(i, f) | Formula::Believes(i, f) => {
                let modality = if matches!(phi, Formula::Knows(..)) {
                    Modality::Knowledge
                } else {
                    Modality::Belief
                };
                let agent = self.agent(i)?;
                let x = self.eval_at(f, time)?;
                self.expect(agent, time, modality, &x)
            }
            Formula::CommonKnowledge(g, f) | Formula::CommonBelief(g, f) => {
                let modality = if matches!(phi, Formula::CommonKnowledge(..)) {
                    Modality::Knowledge
                } else {
                    Modality::Belief
                };
                let x = self.eval_at(f, time)?;
                for a in g.members() {
                    let i = self.agent(a)?;
                    let p = self.model.point(i, time);
                    if !null_blocks(p.measure(), sigma_of(self.model, i, time, modality)).is_empty() {
                        self.warnings.insert(format!(
                            "{} of `{a}` at time {} has null blocks; conditional expectation is 0 there",
                            modality,
                            self.model.time_label(time)
                        ));
                    }
                }
                let (v, trace) = solve_common(&x, g, modality, self.model, time, &self.opts)?;
                self.traces.push((phi.clone(), time, trace));
                v
            }
            _ => return Err(EvalError::NotCore),
        };
        let values = Rc::new(values);
        self.memo.insert(key, Rc::clone(&values));
        Ok(values)
    }

    /// `⟦φ⟧` at every time.
    pub fn eval(&mut self, phi: &Formula) -> Result<TruthProcess<T>, EvalError> {
        let rows = (0..self.model.times().len())
            .map(|t| self.eval_at(phi, t).map(|v| v.as_ref().clone()))
            .collect::<Result<_, _>>()?;
        Ok(TruthProcess::new(rows))
    }
}

/// `⟦φ⟧` for any formula; sugar is expanded first.
pub fn interpret(phi: &Formula, model: &Model, opts: &EvalOptions) -> Result<TruthProcess, EvalError> {
    Interpreter::<f64>::new(model, *opts)?.eval(&phi.desugar())
}

/// `⟦φ⟧(t)` at the time with index `time`.
pub fn interpret_at(phi: &Formula, model: &Model, time: usize, opts: &EvalOptions) -> Result<Vec<f64>, EvalError> {
    let v = Interpreter::<f64>::new(model, *opts)?.eval_at(&phi.desugar(), time)?;
    Ok(v.as_ref().clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validity<T = f64> {
    pub holds: bool,
    pub value: T,
    pub threshold: f64,
}

/// `i, ω, t ⊨_ε φ`: agent `i`'s expected truth of `φ` given its knowledge at
/// `(ω, t)` is at least `1 − ε`.
pub fn validity_with<T: Scalar>(
    interp: &mut Interpreter<'_, T>,
    agent: &str,
    state: &str,
    time: usize,
    eps: f64,
    phi: &Formula,
) -> Result<Validity<T>, EvalError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(EvalError::BadEpsilon(eps));
    }
    let model = interp.model();
    let i = interp.agent(agent)?;
    let w = model
        .omega()
        .index_of(state)
        .map_err(|_| EvalError::UnknownState(state.to_string()))?;
    if time >= model.times().len() {
        return Err(EvalError::UnknownTime(time.to_string()));
    }
    let x = interp.eval_at(&phi.desugar(), time)?;
    let value = interp.expect(i, time, Modality::Knowledge, &x)[w].clone();
    let threshold = 1.0 - eps;
    let holds = if T::EXACT {
        let eps = BigRational::from_float(eps).unwrap_or_else(BigRational::zero);
        value >= T::from_rational(&(BigRational::one() - eps))
    } else {
        value.to_f64() >= threshold
    };
    Ok(Validity { holds, value, threshold })
}

pub fn validity(
    agent: &str,
    state: &str,
    time: usize,
    eps: f64,
    phi: &Formula,
    model: &Model,
    opts: &EvalOptions,
) -> Result<Validity, EvalError> {
    let mut interp = Interpreter::<f64>::new(model, *opts)?;
    validity_with(&mut interp, agent, state, time, eps, phi)
}
