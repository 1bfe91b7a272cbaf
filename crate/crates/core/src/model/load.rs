use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::de::{self, Deserializer};
use serde::Deserialize;

use super::{AgentSpace, HistoryPoint, LoadOptions, Model, ModelError, ModelParts};
use crate::boolalg::{Anchor, Element, FiniteBooleanAlgebra};
use crate::infostruct::{BlurredFn, GeneralizedSigmaAlgebra, InfoTriple};
use crate::lang::Function;
use crate::prob::{Filtration, Omega, ProbabilityMeasure, Process, SigmaAlgebra};

/// Parses `-12`, `0.25`, `1e-3` or `1/3` into an exact rational.
pub fn parse_exact_number(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p = parse_exact_number(p)?;
        let q = parse_exact_number(q)?;
        return if q.is_zero() { None } else { Some(p / q) };
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

#[derive(Debug, Clone)]
struct Num(BigRational);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n.to_string(),
            serde_json::Value::String(s) => s,
            other => return Err(de::Error::custom(format!("expected a number, found {other}"))),
        };
        parse_exact_number(&text)
            .map(Num)
            .ok_or_else(|| de::Error::custom(format!("invalid number `{text}`")))
    }
}

type Partition = Vec<Vec<String>>;
type ElementNames = Vec<String>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    omega: Vec<String>,
    times: Vec<Num>,
    filtration: BTreeMap<String, Partition>,
    #[serde(default)]
    sigma: Option<Partition>,
    agents: RawAgents,
    history: BTreeMap<String, BTreeMap<String, RawPoint>>,
    processes: BTreeMap<String, BTreeMap<String, BTreeMap<String, Num>>>,
    #[serde(default)]
    functions: BTreeMap<String, RawFunction>,
    #[serde(default)]
    strict: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgents {
    list: Vec<String>,
    rho: BTreeMap<String, Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    algebra: Vec<String>,
    #[serde(default)]
    members: Option<Vec<Vec<ElementNames>>>,
    #[serde(default)]
    generators: Option<Vec<Vec<ElementNames>>>,
    #[serde(default)]
    partition: Option<Partition>,
    #[serde(default)]
    anchor: Option<RawAnchor>,
    #[serde(rename = "P")]
    p: BTreeMap<String, Num>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnchor {
    #[serde(default)]
    principal: Option<ElementNames>,
    #[serde(default)]
    upset: Option<Vec<ElementNames>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunction {
    kind: String,
    #[serde(default)]
    arity: Option<usize>,
    #[serde(default)]
    c: Option<Num>,
}

fn schema(msg: impl Into<String>) -> ModelError {
    ModelError::Schema(msg.into())
}

pub(super) fn from_json_str(src: &str, options: LoadOptions) -> Result<Model, ModelError> {
    let raw: RawModel = serde_json::from_str(src).map_err(|e| schema(e.to_string()))?;
    build(raw, options)
}

fn build(raw: RawModel, options: LoadOptions) -> Result<Model, ModelError> {
    let omega = Omega::new(raw.omega.iter())?;
    let times: Vec<BigRational> = raw.times.into_iter().map(|n| n.0).collect();
    let keyed = |what: &str, keys: Vec<&String>| -> Result<Vec<usize>, ModelError> {
        let mut seen = vec![false; times.len()];
        let mut order = Vec::with_capacity(keys.len());
        for k in keys {
            let t = parse_exact_number(k).ok_or_else(|| schema(format!("{what}: bad time key `{k}`")))?;
            let i = times
                .iter()
                .position(|x| *x == t)
                .ok_or_else(|| schema(format!("{what}: undeclared time `{k}`")))?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(schema(format!("{what}: time `{k}` given twice")));
            }
            order.push(i);
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(schema(format!("{what}: missing time {}", crate::prob::format_rational(&times[i]))));
        }
        Ok(order)
    };

    let mut stages: Vec<Option<SigmaAlgebra>> = vec![None; times.len()];
    let order = keyed("filtration", raw.filtration.keys().collect())?;
    for (i, part) in order.into_iter().zip(raw.filtration.values()) {
        stages[i] = Some(partition(&omega, part)?);
    }
    let filtration = Filtration::new(times.clone(), stages.into_iter().map(|s| s.expect("all times")).collect())?;
    let sigma = raw.sigma.as_ref().map(|p| partition(&omega, p)).transpose()?;

    let mut rho = vec![BigRational::zero(); raw.agents.list.len()];
    for (name, w) in &raw.agents.rho {
        let i = raw
            .agents
            .list
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| ModelError::UnknownAgent(name.clone()))?;
        rho[i] = w.0.clone();
    }
    let agents = AgentSpace::new(raw.agents.list.clone(), rho)?;

    if let Some(name) = raw.history.keys().find(|k| !agents.agents().contains(k)) {
        return Err(ModelError::UnknownAgent(name.clone()));
    }
    let mut history = Vec::with_capacity(agents.len());
    for name in agents.agents() {
        let points = raw
            .history
            .get(name)
            .ok_or_else(|| schema(format!("history: agent `{name}` missing")))?;
        let what = format!("history of `{name}`");
        let order = keyed(&what, points.keys().collect())?;
        let mut row: Vec<Option<HistoryPoint>> = vec![None; times.len()];
        for (i, point) in order.into_iter().zip(points.values()) {
            let p = history_point(&omega, point, options.max_atoms)
                .map_err(|e| match e {
                    ModelError::Schema(m) => schema(format!("{what} at time {}: {m}", crate::prob::format_rational(&times[i]))),
                    other => other,
                })?;
            row[i] = Some(p);
        }
        history.push(row.into_iter().map(|p| p.expect("all times")).collect());
    }

    let mut processes = BTreeMap::new();
    for (name, by_time) in &raw.processes {
        let what = format!("process `{name}`");
        let order = keyed(&what, by_time.keys().collect())?;
        let mut rows = vec![Vec::new(); times.len()];
        for (i, values) in order.into_iter().zip(by_time.values()) {
            rows[i] = state_vector(&omega, values, false).map_err(|m| schema(format!("{what}: {m}")))?;
        }
        processes.insert(name.clone(), Process::new(rows)?);
    }

    let mut functions = BTreeMap::new();
    for (name, f) in &raw.functions {
        functions.insert(name.clone(), function(f).map_err(|m| schema(format!("function `{name}`: {m}")))?);
    }

    Model::new(
        ModelParts {
            filtration,
            sigma,
            agents,
            history,
            processes,
            functions,
            strict: raw.strict,
        },
        options.require,
    )
}

fn partition(omega: &Omega, part: &Partition) -> Result<SigmaAlgebra, ModelError> {
    let blocks = part
        .iter()
        .map(|b| b.iter().map(|s| omega.index_of(s)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SigmaAlgebra::from_blocks(omega, blocks)?)
}

/// Values keyed by state. Missing states are zero when `sparse`, an error
/// otherwise.
fn state_vector(omega: &Omega, values: &BTreeMap<String, Num>, sparse: bool) -> Result<Vec<BigRational>, String> {
    let mut out: Vec<Option<BigRational>> = vec![None; omega.len()];
    for (state, v) in values {
        let i = omega.index_of(state).map_err(|e| e.to_string())?;
        out[i] = Some(v.0.clone());
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(v) => Ok(v),
            None if sparse => Ok(BigRational::zero()),
            None => Err(format!("no value for state `{}`", omega.name(i))),
        })
        .collect()
}

fn element(algebra: &FiniteBooleanAlgebra, names: &ElementNames) -> Result<Element, ModelError> {
    Ok(algebra.element_from_names(names)?)
}

fn blurred(omega: &Omega, algebra: &FiniteBooleanAlgebra, f: &[ElementNames]) -> Result<BlurredFn, ModelError> {
    if f.len() != omega.len() {
        return Err(schema(format!("function has {} values, Ω has {} states", f.len(), omega.len())));
    }
    Ok(BlurredFn(f.iter().map(|e| element(algebra, e)).collect::<Result<_, _>>()?))
}

fn history_point(omega: &Omega, raw: &RawPoint, max_atoms: usize) -> Result<HistoryPoint, ModelError> {
    let algebra = FiniteBooleanAlgebra::new(raw.algebra.iter())?;
    let given = [raw.members.is_some(), raw.generators.is_some(), raw.partition.is_some()];
    if given.iter().filter(|&&g| g).count() != 1 {
        return Err(schema("exactly one of `members`, `generators`, `partition` is required"));
    }
    let field = if let Some(members) = &raw.members {
        let fs = members.iter().map(|f| blurred(omega, &algebra, f)).collect::<Result<Vec<_>, _>>()?;
        GeneralizedSigmaAlgebra::from_members(omega, &algebra, fs)?
    } else if let Some(gens) = &raw.generators {
        let fs = gens.iter().map(|f| blurred(omega, &algebra, f)).collect::<Result<Vec<_>, _>>()?;
        GeneralizedSigmaAlgebra::close_under_ops(omega, &algebra, fs)?
    } else {
        let sigma = partition(omega, raw.partition.as_ref().expect("checked"))?;
        GeneralizedSigmaAlgebra::from_sigma(&algebra, &sigma)?
    };
    let anchor = match &raw.anchor {
        None if algebra.atom_count() == 1 => Anchor::principal(algebra.clone(), algebra.one())?,
        None => return Err(schema("`anchor` is required unless the algebra has a single atom")),
        Some(RawAnchor {
            principal: Some(p),
            upset: None,
        }) => Anchor::principal(algebra.clone(), element(&algebra, p)?)?,
        Some(RawAnchor {
            principal: None,
            upset: Some(u),
        }) => {
            let up = u.iter().map(|e| element(&algebra, e)).collect::<Result<Vec<_>, _>>()?;
            Anchor::from_upset(algebra.clone(), up)?
        }
        Some(_) => return Err(schema("anchor needs exactly one of `principal`, `upset`")),
    };
    let triple = InfoTriple::new(field, anchor)?;
    let weights = state_vector(omega, &raw.p, true).map_err(schema)?;
    let measure = ProbabilityMeasure::new(omega, weights)?;
    HistoryPoint::new(triple, measure, max_atoms)
}

fn function(raw: &RawFunction) -> Result<Function, String> {
    let c = || raw.c.as_ref().map(|n| n.0.clone()).ok_or_else(|| "missing `c`".to_string());
    let arity = |default: usize| raw.arity.unwrap_or(default);
    let f = match raw.kind.as_str() {
        "add" => Function::Add { arity: arity(2) },
        "sub" => Function::Sub,
        "mul" => Function::Mul { arity: arity(2) },
        "min" => Function::Min { arity: arity(2) },
        "max" => Function::Max { arity: arity(2) },
        "add_const" => Function::AddConst(c()?),
        "const" => Function::Const(c()?),
        other => return Err(format!("unknown kind `{other}`")),
    };
    if f.arity() != raw.arity.unwrap_or(f.arity()) {
        return Err(format!("kind `{}` has fixed arity {}", raw.kind, f.arity()));
    }
    if matches!(f, Function::Add { .. } | Function::Mul { .. } | Function::Min { .. } | Function::Max { .. })
        && f.arity() == 0
    {
        return Err("arity must be at least 1".into());
    }
    Ok(f)
}
