//! Agents, histories and the assembled model that formulae are evaluated on.

mod load;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed};
use thiserror::Error;

use crate::boolalg::{AlgebraError, DEFAULT_ENUMERATION_LIMIT};
use crate::infostruct::{belief, find_chi_arrow, knowledge, InfoError, InfoTriple};
use crate::lang::{Declarations, Function, LangError};
use crate::prob::{
    abs_continuous, format_rational, is_adapted, normalization_tolerance, rational_to_f64, Filtration,
    Omega, ProbError, ProbabilityMeasure, Process, Scalar, SigmaAlgebra,
};

pub use load::parse_exact_number;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Schema(String),
    #[error("cannot read model: {0}")]
    Io(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error("agent set is empty")]
    NoAgents,
    #[error("duplicate agent `{0}`")]
    DuplicateAgent(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("negative agent weight for `{0}`")]
    NegativeRho(String),
    #[error("agent weights sum to {0}, not 1")]
    RhoNotNormalized(String),
    #[error("agent group has measure zero")]
    NullGroup,
    #[error("process `{0}` is not adapted to the filtration")]
    ProcessNotAdapted(String),
    #[error("declared σ-algebra differs from the join of the filtration")]
    SigmaMismatch,
    #[error("history is not {level}: agent `{agent}` at time {time}")]
    HistoryNotAdapted {
        level: Adaptedness,
        agent: String,
        time: String,
    },
    #[error("strict mode: {0}")]
    Strict(String),
}

/// How far a history respects the filtration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Adaptedness {
    None,
    PreAdapted,
    Adapted,
}

impl fmt::Display for Adaptedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Adaptedness::None => "unadapted",
            Adaptedness::PreAdapted => "pre-adapted",
            Adaptedness::Adapted => "adapted",
        })
    }
}

/// The finite set of agents with a probability measure on it.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpace {
    agents: Vec<String>,
    rho: Vec<BigRational>,
}

impl AgentSpace {
    pub fn new(agents: Vec<String>, rho: Vec<BigRational>) -> Result<Self, ModelError> {
        if agents.is_empty() {
            return Err(ModelError::NoAgents);
        }
        if rho.len() != agents.len() {
            return Err(ModelError::Schema("one weight per agent required".into()));
        }
        for (i, a) in agents.iter().enumerate() {
            if agents[..i].contains(a) {
                return Err(ModelError::DuplicateAgent(a.clone()));
            }
            if rho[i].is_negative() {
                return Err(ModelError::NegativeRho(a.clone()));
            }
        }
        let total: BigRational = rho.iter().cloned().sum();
        if (&total - BigRational::one()).abs() > normalization_tolerance() {
            return Err(ModelError::RhoNotNormalized(format_rational(&total)));
        }
        Ok(AgentSpace { agents, rho })
    }

    pub fn uniform(agents: &[&str]) -> Self {
        let n = agents.len();
        let w = BigRational::new(1.into(), (n as i64).into());
        Self::new(agents.iter().map(|s| s.to_string()).collect(), vec![w; n]).expect("uniform")
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ModelError> {
        self.agents
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| ModelError::UnknownAgent(name.to_string()))
    }

    pub fn rho(&self) -> &[BigRational] {
        &self.rho
    }

    pub fn rho_f64(&self, agent: usize) -> f64 {
        rational_to_f64(&self.rho[agent])
    }
}

/// `𝔼^ρ[values | G]`: the ρ-weighted average of agent-indexed values over the
/// group.
pub fn group_expect<T: Scalar>(space: &AgentSpace, group: &[usize], values: &[T]) -> Result<T, ModelError> {
    debug_assert_eq!(group.len(), values.len());
    let mut mass = T::zero();
    let mut total = T::zero();
    for (&i, v) in group.iter().zip(values) {
        let w = T::from_rational(&space.rho[i]);
        mass = mass + w.clone();
        total = total + w * v.clone();
    }
    if mass > T::zero() {
        Ok(total / mass)
    } else {
        Err(ModelError::NullGroup)
    }
}

/// One agent at one time: information triple, probability, and the derived
/// knowledge and belief σ-algebras.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryPoint {
    triple: InfoTriple,
    measure: ProbabilityMeasure,
    knowledge: SigmaAlgebra,
    belief: SigmaAlgebra,
}

impl HistoryPoint {
    pub fn new(triple: InfoTriple, measure: ProbabilityMeasure, max_atoms: usize) -> Result<Self, ModelError> {
        if triple.omega().len() != measure.weights().len() {
            return Err(ProbError::OmegaMismatch.into());
        }
        let knowledge = knowledge(&triple, max_atoms)?;
        let belief = belief(&triple);
        Ok(HistoryPoint {
            triple,
            measure,
            knowledge,
            belief,
        })
    }

    pub fn triple(&self) -> &InfoTriple {
        &self.triple
    }

    pub fn measure(&self) -> &ProbabilityMeasure {
        &self.measure
    }

    pub fn knowledge(&self) -> &SigmaAlgebra {
        &self.knowledge
    }

    pub fn belief(&self) -> &SigmaAlgebra {
        &self.belief
    }
}

/// Everything needed to assemble a [`Model`] without going through JSON.
#[derive(Debug, Clone)]
pub struct ModelParts {
    pub filtration: Filtration,
    pub sigma: Option<SigmaAlgebra>,
    pub agents: AgentSpace,
    /// Indexed `[agent][time]`.
    pub history: Vec<Vec<HistoryPoint>>,
    pub processes: BTreeMap<String, Process>,
    pub functions: BTreeMap<String, Function>,
    pub strict: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub require: Adaptedness,
    pub max_atoms: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            require: Adaptedness::Adapted,
            max_atoms: DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    filtration: Filtration,
    sigma: SigmaAlgebra,
    agents: AgentSpace,
    history: Vec<Vec<HistoryPoint>>,
    processes: BTreeMap<String, Process>,
    functions: BTreeMap<String, Function>,
    adaptedness: Adaptedness,
    strict: bool,
}

impl Model {
    pub fn new(parts: ModelParts, require: Adaptedness) -> Result<Self, ModelError> {
        let ModelParts {
            filtration,
            sigma,
            agents,
            history,
            processes,
            functions,
            strict,
        } = parts;
        let omega = filtration.omega().clone();
        let join = filtration.join();
        let sigma = match sigma {
            Some(s) if s != join => return Err(ModelError::SigmaMismatch),
            Some(s) => s,
            None => join,
        };
        let times = filtration.times().len();
        if history.len() != agents.len() || history.iter().any(|row| row.len() != times) {
            return Err(ModelError::Schema("history must cover every agent and time".into()));
        }
        for row in &history {
            for p in row {
                if p.triple.omega() != &omega {
                    return Err(ProbError::OmegaMismatch.into());
                }
            }
        }
        for (name, process) in &processes {
            if process.rows().len() != times || process.rows().iter().any(|r| r.len() != omega.len()) {
                return Err(ModelError::Schema(format!("process `{name}` is not total on 𝒯 × Ω")));
            }
            if !is_adapted(process.rows(), &filtration) {
                return Err(ModelError::ProcessNotAdapted(name.clone()));
            }
        }
        let decls = Declarations {
            agents: agents.agents().to_vec(),
            processes: processes.keys().cloned().collect(),
            functions: functions.clone(),
        };
        decls.validate()?;

        let mut model = Model {
            filtration,
            sigma,
            agents,
            history,
            processes,
            functions,
            adaptedness: Adaptedness::None,
            strict,
        };
        model.adaptedness = if check_adapted(&model) {
            Adaptedness::Adapted
        } else if check_pre_adapted(&model) {
            Adaptedness::PreAdapted
        } else {
            Adaptedness::None
        };
        if model.adaptedness < require {
            let (agent, time) = model.first_violation(require).expect("some point violates");
            return Err(ModelError::HistoryNotAdapted {
                level: require,
                agent,
                time,
            });
        }
        if strict {
            model.check_strict()?;
        }
        Ok(model)
    }

    fn first_violation(&self, level: Adaptedness) -> Option<(String, String)> {
        for (i, row) in self.history.iter().enumerate() {
            for (t, p) in row.iter().enumerate() {
                let stage = self.filtration.stage(t);
                let ok = p.knowledge.is_sub_of(stage)
                    && (level < Adaptedness::Adapted || p.belief.is_sub_of(stage));
                if !ok {
                    return Some((self.agents.agents()[i].clone(), self.time_label(t)));
                }
            }
        }
        None
    }

    /// Information only grows along time (a χ_F arrow between consecutive
    /// points) and probabilities stay absolutely continuous.
    fn check_strict(&self) -> Result<(), ModelError> {
        for (i, row) in self.history.iter().enumerate() {
            for t in 1..row.len() {
                let (prev, next) = (&row[t - 1], &row[t]);
                let who = &self.agents.agents()[i];
                if find_chi_arrow(&prev.triple, &next.triple)?.is_none() {
                    return Err(ModelError::Strict(format!(
                        "no information arrow for `{who}` from time {} to {}",
                        self.time_label(t - 1),
                        self.time_label(t)
                    )));
                }
                if !abs_continuous(&prev.measure, &next.measure)? {
                    return Err(ModelError::Strict(format!(
                        "probability of `{who}` at time {} is not absolutely continuous w.r.t. time {}",
                        self.time_label(t),
                        self.time_label(t - 1)
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(src: &str, options: LoadOptions) -> Result<Self, ModelError> {
        load::from_json_str(src, options)
    }

    pub fn load(path: &std::path::Path, options: LoadOptions) -> Result<Self, ModelError> {
        let src = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&src, options)
    }

    pub fn omega(&self) -> &Omega {
        self.filtration.omega()
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn times(&self) -> &[BigRational] {
        self.filtration.times()
    }

    pub fn time_label(&self, index: usize) -> String {
        format_rational(&self.times()[index])
    }

    pub fn time_index(&self, t: &BigRational) -> Option<usize> {
        self.filtration.time_index(t)
    }

    pub fn sigma(&self) -> &SigmaAlgebra {
        &self.sigma
    }

    pub fn agents(&self) -> &AgentSpace {
        &self.agents
    }

    pub fn point(&self, agent: usize, time: usize) -> &HistoryPoint {
        &self.history[agent][time]
    }

    pub fn processes(&self) -> &BTreeMap<String, Process> {
        &self.processes
    }

    pub fn functions(&self) -> &BTreeMap<String, Function> {
        &self.functions
    }

    pub fn adaptedness(&self) -> Adaptedness {
        self.adaptedness
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn declarations(&self) -> Declarations {
        Declarations {
            agents: self.agents.agents().to_vec(),
            processes: self.processes.keys().cloned().collect(),
            functions: self.functions.clone(),
        }
    }
}

/// Every agent's knowledge at every time is contained in the filtration stage.
pub fn check_pre_adapted(model: &Model) -> bool {
    model.history.iter().all(|row| {
        row.iter()
            .zip(model.filtration.stages())
            .all(|(p, stage)| p.knowledge.is_sub_of(stage))
    })
}

/// Pre-adapted, and belief is contained in the filtration stage as well.
pub fn check_adapted(model: &Model) -> bool {
    check_pre_adapted(model)
        && model.history.iter().all(|row| {
            row.iter()
                .zip(model.filtration.stages())
                .all(|(p, stage)| p.belief.is_sub_of(stage))
        })
}
