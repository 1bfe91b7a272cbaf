//! Command-line front end.

use std::ffi::OsString;
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;

use crate::boolalg::{enumerate_anchors, DEFAULT_ENUMERATION_LIMIT};
use crate::eval::{
    format_value, validity_with, EvalError, EvalOptions, FixpointTrace, Interpreter, DEFAULT_MAX_ITER,
    DEFAULT_TOLERANCE,
};
use crate::lang::{parse_formula_sugared, Formula, LangError};
use crate::model::{check_adapted, check_pre_adapted, parse_exact_number, Adaptedness, LoadOptions, Model, ModelError};
use crate::prob::{format_rational, Scalar};

pub const MAX_ATOMS_ENV: &str = "BELIEFLANG_MAX_ATOMS";

#[derive(Debug, Parser)]
#[command(name = "belieflang", version, about = "Evaluate knowledge and belief formulae on finite stochastic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Model file (JSON)
    #[arg(short = 'm', long = "model", value_name = "PATH")]
    model: PathBuf,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Sup-norm tolerance of the fixpoint iteration
    #[arg(long, value_name = "FLOAT", default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Iteration cap of the fixpoint iteration
    #[arg(long = "max-iter", value_name = "N", default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Accept models that are only pre-adapted
    #[arg(long = "pre-adapted")]
    pre_adapted: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a model file
    Check {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long = "pre-adapted")]
        pre_adapted: bool,
    },
    /// Print the truth value of a formula at every (time, state)
    Eval {
        #[command(flatten)]
        model: ModelArg,
        /// Formula; read from stdin when absent
        #[arg(short = 'f', long, value_name = "STR")]
        formula: Option<String>,
        #[arg(short = 't', long, value_name = "VALUE")]
        time: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write fixpoint traces to this file
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
        /// Compute in exact rationals
        #[arg(long)]
        exact: bool,
    },
    /// Decide i, ω, t ⊨_ε φ
    Validity {
        #[command(flatten)]
        model: ModelArg,
        #[arg(short = 'f', long, value_name = "STR")]
        formula: Option<String>,
        #[arg(short = 'i', long, value_name = "ID")]
        agent: String,
        #[arg(short = 'w', long, value_name = "ID")]
        state: String,
        #[arg(short = 't', long, value_name = "VALUE")]
        time: String,
        #[arg(short = 'e', long, value_name = "FLOAT", default_value_t = 0.0, allow_negative_numbers = true)]
        eps: f64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        exact: bool,
    },
    /// Print the iteration trace of a CK/CB formula as CSV
    Trace {
        #[command(flatten)]
        model: ModelArg,
        #[arg(short = 'f', long, value_name = "STR")]
        formula: Option<String>,
        #[arg(short = 't', long, value_name = "VALUE")]
        time: String,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Anchor count and knowledge/belief partitions of one agent at one time
    Anchors {
        #[command(flatten)]
        model: ModelArg,
        #[arg(short = 'i', long, value_name = "ID")]
        agent: String,
        #[arg(short = 't', long, value_name = "VALUE")]
        time: String,
    },
    /// Report pre-adaptedness and adaptedness of the history
    Adapted {
        #[command(flatten)]
        model: ModelArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Usage,
    Model,
    Formula,
    Eval,
    Convergence,
}

impl Kind {
    fn code(self) -> i32 {
        match self {
            Kind::Usage => 1,
            Kind::Model => 2,
            Kind::Formula => 3,
            Kind::Eval => 4,
            Kind::Convergence => 5,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Usage => "usage",
            Kind::Model => "model",
            Kind::Formula => "formula",
            Kind::Eval => "eval",
            Kind::Convergence => "convergence",
        })
    }
}

#[derive(Debug)]
struct Failure {
    kind: Kind,
    message: String,
}

impl Failure {
    fn new(kind: Kind, message: impl fmt::Display) -> Self {
        Failure {
            kind,
            message: message.to_string(),
        }
    }

    fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.kind, flat.join(" "))
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::new(Kind::Model, e)
    }
}

impl From<LangError> for Failure {
    fn from(e: LangError) -> Self {
        Failure::new(Kind::Formula, e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let kind = match e {
            EvalError::NotConverged { .. } => Kind::Convergence,
            _ => Kind::Eval,
        };
        Failure::new(kind, e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(Kind::Usage, e)
    }
}

struct Io<'a> {
    stdin: &'a mut dyn Read,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(err, "{}", Failure::new(Kind::Usage, first).line());
            return Kind::Usage.code();
        }
    };
    let mut io = Io { stdin, out, err };
    match dispatch(cli.command, &mut io) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(io.err, "{}", f.line());
            f.kind.code()
        }
    }
}

fn max_atoms() -> Result<usize, Failure> {
    match std::env::var(MAX_ATOMS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::new(Kind::Usage, format!("{MAX_ATOMS_ENV} must be a non-negative integer, got `{v}`"))),
        Err(_) => Ok(DEFAULT_ENUMERATION_LIMIT),
    }
}

fn load(path: &Path, require: Adaptedness) -> Result<Model, Failure> {
    let options = LoadOptions {
        require,
        max_atoms: max_atoms()?,
    };
    Ok(Model::load(path, options)?)
}

fn requirement(pre_adapted: bool) -> Adaptedness {
    if pre_adapted {
        Adaptedness::PreAdapted
    } else {
        Adaptedness::Adapted
    }
}

fn options(solver: &SolverArgs) -> Result<EvalOptions, Failure> {
    if !(solver.tol.is_finite() && solver.tol >= 0.0) {
        return Err(Failure::new(Kind::Usage, format!("--tol must be a non-negative number, got {}", solver.tol)));
    }
    Ok(EvalOptions {
        tol: solver.tol,
        max_iter: solver.max_iter,
        allow_pre_adapted: solver.pre_adapted,
    })
}

fn read_formula(model: &Model, flag: Option<String>, stdin: &mut dyn Read) -> Result<Formula, Failure> {
    let src = match flag {
        Some(s) => s,
        None => {
            let mut s = String::new();
            stdin.read_to_string(&mut s)?;
            s
        }
    };
    Ok(parse_formula_sugared(src.trim(), &model.declarations())?)
}

fn time_index(model: &Model, value: &str) -> Result<usize, Failure> {
    let t: BigRational =
        parse_exact_number(value).ok_or_else(|| Failure::new(Kind::Usage, format!("invalid time `{value}`")))?;
    model
        .time_index(&t)
        .ok_or_else(|| EvalError::UnknownTime(format_rational(&t)).into())
}

fn warn<T: Scalar>(io: &mut Io<'_>, interp: &Interpreter<'_, T>) -> Result<(), Failure> {
    for w in interp.warnings() {
        writeln!(io.err, "warning: {w}")?;
    }
    Ok(())
}

fn dispatch(command: Command, io: &mut Io<'_>) -> Result<i32, Failure> {
    match command {
        Command::Check { model, pre_adapted } => {
            let m = load(&model.model, requirement(pre_adapted))?;
            writeln!(
                io.out,
                "ok: {} states, {} times, {} agents, {} processes, {} functions",
                m.omega().len(),
                m.times().len(),
                m.agents().len(),
                m.processes().len(),
                m.functions().len()
            )?;
            writeln!(io.out, "history: {}", m.adaptedness())?;
            if m.is_strict() {
                writeln!(io.out, "strict: information arrows and absolute continuity verified")?;
            }
            Ok(0)
        }
        Command::Adapted { model } => {
            let m = load(&model.model, Adaptedness::None)?;
            writeln!(io.out, "pre-adapted: {}", check_pre_adapted(&m))?;
            writeln!(io.out, "adapted: {}", check_adapted(&m))?;
            Ok(0)
        }
        Command::Anchors { model, agent, time } => {
            let m = load(&model.model, Adaptedness::None)?;
            let t = time_index(&m, &time)?;
            let i = m
                .agents()
                .index_of(&agent)
                .map_err(|_| Failure::from(EvalError::UnknownAgent(agent.clone())))?;
            let point = m.point(i, t);
            let algebra = point.triple().algebra();
            let anchors = enumerate_anchors(algebra, max_atoms()?).map_err(|e| Failure::new(Kind::Model, e))?;
            writeln!(io.out, "agent: {agent}")?;
            writeln!(io.out, "time: {}", m.time_label(t))?;
            writeln!(io.out, "atoms: {}", algebra.atom_count())?;
            writeln!(io.out, "anchors: {}", anchors.len())?;
            writeln!(io.out, "knowledge: {}", point.knowledge().format_blocks())?;
            writeln!(io.out, "belief: {}", point.belief().format_blocks())?;
            Ok(0)
        }
        Command::Eval {
            model,
            formula,
            time,
            solver,
            trace,
            exact,
        } => {
            let opts = options(&solver)?;
            let m = load(&model.model, requirement(solver.pre_adapted))?;
            let phi = read_formula(&m, formula, io.stdin)?.desugar();
            let times: Vec<usize> = match &time {
                Some(t) => vec![time_index(&m, t)?],
                None => (0..m.times().len()).collect(),
            };
            if exact {
                match eval_table::<BigRational>(&m, &phi, &times, opts, time.is_some(), io, trace.as_deref()) {
                    Err(f) if f.message.starts_with("no exact fixpoint") => {
                        writeln!(io.err, "warning: {}; falling back to floating point", f.message)?;
                    }
                    other => return other,
                }
            }
            eval_table::<f64>(&m, &phi, &times, opts, time.is_some(), io, trace.as_deref())
        }
        Command::Validity {
            model,
            formula,
            agent,
            state,
            time,
            eps,
            solver,
            exact,
        } => {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Failure::new(Kind::Usage, format!("--eps must lie in [0, 1], got {eps}")));
            }
            let opts = options(&solver)?;
            let m = load(&model.model, requirement(solver.pre_adapted))?;
            let phi = read_formula(&m, formula, io.stdin)?.desugar();
            let t = time_index(&m, &time)?;
            if exact {
                let mut interp = Interpreter::<BigRational>::new(&m, opts)?;
                match validity_with(&mut interp, &agent, &state, t, eps, &phi) {
                    Ok(v) => {
                        warn(io, &interp)?;
                        let verdict = if v.holds { "HOLDS" } else { "FAILS" };
                        writeln!(
                            io.out,
                            "{verdict} v={} threshold={}",
                            format_rational(&v.value),
                            format_value(v.threshold)
                        )?;
                        return Ok(0);
                    }
                    Err(EvalError::NotExact(n)) => {
                        writeln!(
                            io.err,
                            "warning: {}; falling back to floating point",
                            EvalError::NotExact(n)
                        )?;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let mut interp = Interpreter::<f64>::new(&m, opts)?;
            let v = validity_with(&mut interp, &agent, &state, t, eps, &phi)?;
            warn(io, &interp)?;
            let verdict = if v.holds { "HOLDS" } else { "FAILS" };
            writeln!(io.out, "{verdict} v={} threshold={}", format_value(v.value), format_value(v.threshold))?;
            Ok(0)
        }
        Command::Trace {
            model,
            formula,
            time,
            solver,
        } => {
            let opts = options(&solver)?;
            let m = load(&model.model, requirement(solver.pre_adapted))?;
            let phi = read_formula(&m, formula, io.stdin)?.desugar();
            if !matches!(phi, Formula::CommonKnowledge(..) | Formula::CommonBelief(..)) {
                return Err(Failure::new(Kind::Formula, "trace needs a CK[...] or CB[...] formula"));
            }
            let t = time_index(&m, &time)?;
            let mut interp = Interpreter::<f64>::new(&m, opts)?;
            match interp.eval_at(&phi, t) {
                Ok(_) => {
                    warn(io, &interp)?;
                    let (_, _, trace) = interp
                        .traces()
                        .iter()
                        .rev()
                        .find(|(f, at, _)| *f == phi && *at == t)
                        .expect("top-level fixpoint was solved");
                    write!(io.out, "{}", trace.to_csv())?;
                    Ok(0)
                }
                Err(EvalError::NotConverged {
                    iterations,
                    residual,
                    trace,
                }) => {
                    write!(io.out, "{}", trace.to_csv())?;
                    Err(EvalError::NotConverged {
                        iterations,
                        residual,
                        trace,
                    }
                    .into())
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn render<T: Scalar + 'static>(v: &T) -> String {
    if T::EXACT {
        let any: &dyn std::any::Any = v;
        if let Some(r) = any.downcast_ref::<BigRational>() {
            return format_rational(r);
        }
    }
    format_value(v.to_f64())
}

/// Evaluates at each requested time and prints `time,state,value` rows. With
/// several times, a time that fails to evaluate becomes a comment line unless
/// every time fails.
fn eval_table<T: Scalar + 'static>(
    m: &Model,
    phi: &Formula,
    times: &[usize],
    opts: EvalOptions,
    single: bool,
    io: &mut Io<'_>,
    trace_path: Option<&Path>,
) -> Result<i32, Failure> {
    let mut interp = Interpreter::<T>::new(m, opts)?;
    let mut rows = Vec::new();
    let mut first_error = None;
    for &t in times {
        match interp.eval_at(phi, t) {
            Ok(values) => rows.push((t, Ok(values))),
            Err(e @ (EvalError::NotConverged { .. } | EvalError::NotExact(_))) => return Err(e.into()),
            Err(e) if single => return Err(e.into()),
            Err(e) => {
                first_error.get_or_insert_with(|| e.clone());
                rows.push((t, Err(e)));
            }
        }
    }
    if rows.iter().all(|(_, r)| r.is_err()) {
        if let Some(e) = first_error {
            return Err(e.into());
        }
    }
    warn(io, &interp)?;
    if let Some(path) = trace_path {
        write_traces(path, m, interp.traces())?;
    }
    writeln!(io.out, "time,state,value")?;
    for (t, r) in rows {
        let label = m.time_label(t);
        match r {
            Ok(values) => {
                for (w, v) in values.iter().enumerate() {
                    writeln!(io.out, "{label},{},{}", m.omega().name(w), render(v))?;
                }
            }
            Err(e) => writeln!(io.out, "# time {label}: {}", Failure::from(e).line())?,
        }
    }
    Ok(0)
}

fn write_traces(path: &Path, m: &Model, traces: &[(Formula, usize, FixpointTrace)]) -> Result<(), Failure> {
    let mut text = String::new();
    for (f, t, trace) in traces {
        text.push_str(&format!("# time {} {}\n", m.time_label(*t), f));
        text.push_str(&trace.to_csv());
    }
    std::fs::write(path, text).map_err(|e| Failure::new(Kind::Usage, format!("{}: {e}", path.display())))
}
