//! Finite filtered probability spaces.
//!
//! On a finite state space a σ-algebra is determined by its atoms, so it is
//! kept as a partition of Ω. Conditional expectation is then the
//! probability-weighted block average.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbError {
    #[error("state space is empty")]
    EmptyOmega,
    #[error("duplicate state `{0}`")]
    DuplicateState(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("state index {0} out of range")]
    StateOutOfRange(usize),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("blocks do not partition Ω: {0}")]
    NotAPartition(String),
    #[error("times must be strictly ascending and start at 0")]
    BadTimes,
    #[error("filtration is not monotone: stage {later} does not refine stage {earlier}")]
    NotMonotone { earlier: String, later: String },
    #[error("negative probability {0} at state `{1}`")]
    NegativeWeight(String, String),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(String),
    #[error("objects live on different state spaces")]
    OmegaMismatch,
}

/// Tolerance used when checking that probability weights sum to one.
pub fn normalization_tolerance() -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(10u64.pow(12)))
}

/// Prints an exact rational as a terminating decimal when possible, else `p/q`.
pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let mut den = r.denom().clone();
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let digits = twos.max(fives);
    let scaled = (r * BigRational::from_integer(BigInt::from(10).pow(digits))).to_integer();
    let neg = scaled.is_negative();
    let s = scaled.abs().to_string();
    let s = format!("{:0>width$}", s, width = digits as usize + 1);
    let (int, frac) = s.split_at(s.len() - digits as usize);
    format!("{}{}.{}", if neg { "-" } else { "" }, int, frac)
}

/// Numbers that truth values and weights can be computed in: `f64` for the
/// usual path, `BigRational` when results must be exact.
pub trait Scalar:
    Clone
    + PartialOrd
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    const EXACT: bool;
    fn from_rational(r: &BigRational) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    ToPrimitive::to_f64(r).unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Named states of a finite sample space.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Omega(Arc<[String]>);

impl fmt::Debug for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ω{:?}", &self.0[..])
    }
}

impl Omega {
    pub fn new<I, S>(states: I) -> Result<Self, ProbError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        if states.is_empty() {
            return Err(ProbError::EmptyOmega);
        }
        for (i, s) in states.iter().enumerate() {
            if states[..i].contains(s) {
                return Err(ProbError::DuplicateState(s.clone()));
            }
        }
        Ok(Omega(states.into()))
    }

    /// States named `w1 … wn`.
    pub fn numbered(n: usize) -> Self {
        Omega::new((1..=n).map(|i| format!("w{i}"))).expect("n > 0")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &[String] {
        &self.0
    }

    pub fn name(&self, index: usize) -> &str {
        &self.0[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ProbError> {
        self.0
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| ProbError::UnknownState(name.to_string()))
    }
}

/// A σ-algebra on a finite Ω, kept as its partition into atoms. Blocks are
/// sorted internally and ordered by their least state, so equal σ-algebras
/// compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SigmaAlgebra {
    omega: Omega,
    blocks: Vec<Vec<usize>>,
    block_index: Vec<usize>,
}

impl SigmaAlgebra {
    pub fn trivial(omega: &Omega) -> Self {
        Self::from_labels(omega, &vec![0; omega.len()])
    }

    pub fn full(omega: &Omega) -> Self {
        let labels: Vec<usize> = (0..omega.len()).collect();
        Self::from_labels(omega, &labels)
    }

    /// Groups states with equal labels, numbering blocks by first appearance.
    fn from_labels<L: PartialEq>(omega: &Omega, labels: &[L]) -> Self {
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut reps: Vec<usize> = Vec::new();
        let mut block_index = vec![0; labels.len()];
        for (state, label) in labels.iter().enumerate() {
            match reps.iter().position(|&r| labels[r] == *label) {
                Some(b) => {
                    blocks[b].push(state);
                    block_index[state] = b;
                }
                None => {
                    reps.push(state);
                    block_index[state] = blocks.len();
                    blocks.push(vec![state]);
                }
            }
        }
        SigmaAlgebra {
            omega: omega.clone(),
            blocks,
            block_index,
        }
    }

    pub fn from_blocks(omega: &Omega, blocks: Vec<Vec<usize>>) -> Result<Self, ProbError> {
        let mut owner: Vec<Option<usize>> = vec![None; omega.len()];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(ProbError::NotAPartition("empty block".into()));
            }
            for &s in block {
                let slot = owner
                    .get_mut(s)
                    .ok_or(ProbError::StateOutOfRange(s))?;
                if slot.is_some() {
                    return Err(ProbError::NotAPartition(format!(
                        "state `{}` appears twice",
                        omega.name(s)
                    )));
                }
                *slot = Some(b);
            }
        }
        let labels = owner
            .into_iter()
            .enumerate()
            .map(|(s, o)| {
                o.ok_or_else(|| {
                    ProbError::NotAPartition(format!("state `{}` is in no block", omega.name(s)))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_labels(omega, &labels))
    }

    /// The σ-algebra generated by a family of events: two states share a block
    /// iff no generator separates them.
    pub fn generate<E: AsRef<[bool]>>(omega: &Omega, events: &[E]) -> Result<Self, ProbError> {
        for e in events {
            if e.as_ref().len() != omega.len() {
                return Err(ProbError::LengthMismatch {
                    expected: omega.len(),
                    got: e.as_ref().len(),
                });
            }
        }
        let signatures: Vec<Vec<bool>> = (0..omega.len())
            .map(|s| events.iter().map(|e| e.as_ref()[s]).collect())
            .collect();
        Ok(Self::from_labels(omega, &signatures))
    }

    pub fn omega(&self) -> &Omega {
        &self.omega
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_index(&self, state: usize) -> usize {
        self.block_index[state]
    }

    /// `[ω]`: the smallest event containing `state`.
    pub fn block_of(&self, state: usize) -> Result<&[usize], ProbError> {
        let b = self
            .block_index
            .get(state)
            .ok_or(ProbError::StateOutOfRange(state))?;
        Ok(&self.blocks[*b])
    }

    /// Block indicators, one event per block.
    pub fn block_events(&self) -> Vec<Vec<bool>> {
        self.blocks
            .iter()
            .map(|b| {
                let mut e = vec![false; self.omega.len()];
                b.iter().for_each(|&s| e[s] = true);
                e
            })
            .collect()
    }

    /// `self ⊆ other`: every block of `other` sits inside a block of `self`.
    pub fn is_sub_of(&self, other: &SigmaAlgebra) -> bool {
        self.omega == other.omega
            && other
                .blocks
                .iter()
                .all(|b| b.iter().all(|&s| self.block_index[s] == self.block_index[b[0]]))
    }

    /// Smallest σ-algebra containing both.
    pub fn join(&self, other: &SigmaAlgebra) -> Result<SigmaAlgebra, ProbError> {
        if self.omega != other.omega {
            return Err(ProbError::OmegaMismatch);
        }
        let labels: Vec<(usize, usize)> = (0..self.omega.len())
            .map(|s| (self.block_index[s], other.block_index[s]))
            .collect();
        Ok(Self::from_labels(&self.omega, &labels))
    }

    pub fn format_blocks(&self) -> String {
        self.blocks
            .iter()
            .map(|b| {
                let names: Vec<&str> = b.iter().map(|&s| self.omega.name(s)).collect();
                format!("{{{}}}", names.join(","))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// `x` is constant on every block of `sigma`.
pub fn is_measurable<T: PartialEq>(x: &[T], sigma: &SigmaAlgebra) -> bool {
    x.len() == sigma.omega.len()
        && sigma
            .blocks
            .iter()
            .all(|b| b.iter().all(|&s| x[s] == x[b[0]]))
}

/// A finite, strictly increasing time axis starting at 0 with one σ-algebra
/// per time, each refining the previous one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    times: Vec<BigRational>,
    stages: Vec<SigmaAlgebra>,
}

impl Filtration {
    pub fn new(times: Vec<BigRational>, stages: Vec<SigmaAlgebra>) -> Result<Self, ProbError> {
        if times.is_empty() || !times[0].is_zero() || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProbError::BadTimes);
        }
        if stages.len() != times.len() {
            return Err(ProbError::LengthMismatch {
                expected: times.len(),
                got: stages.len(),
            });
        }
        let omega = stages[0].omega();
        if stages.iter().any(|s| s.omega() != omega) {
            return Err(ProbError::OmegaMismatch);
        }
        for i in 1..stages.len() {
            if !stages[i - 1].is_sub_of(&stages[i]) {
                return Err(ProbError::NotMonotone {
                    earlier: format_rational(&times[i - 1]),
                    later: format_rational(&times[i]),
                });
            }
        }
        Ok(Filtration { times, stages })
    }

    pub fn times(&self) -> &[BigRational] {
        &self.times
    }

    pub fn stages(&self) -> &[SigmaAlgebra] {
        &self.stages
    }

    pub fn stage(&self, index: usize) -> &SigmaAlgebra {
        &self.stages[index]
    }

    pub fn omega(&self) -> &Omega {
        self.stages[0].omega()
    }

    pub fn time_index(&self, t: &BigRational) -> Option<usize> {
        self.times.iter().position(|s| s == t)
    }

    /// `⋁_t 𝒢_t`; with monotone stages this is the last stage.
    pub fn join(&self) -> SigmaAlgebra {
        self.stages
            .iter()
            .skip(1)
            .fold(self.stages[0].clone(), |acc, s| acc.join(s).expect("same Ω"))
    }
}

/// A probability measure on the states of Ω, held both exactly and as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMeasure {
    exact: Vec<BigRational>,
    weights: Vec<f64>,
}

impl ProbabilityMeasure {
    pub fn new(omega: &Omega, exact: Vec<BigRational>) -> Result<Self, ProbError> {
        if exact.len() != omega.len() {
            return Err(ProbError::LengthMismatch {
                expected: omega.len(),
                got: exact.len(),
            });
        }
        if let Some((s, w)) = exact.iter().enumerate().find(|(_, w)| w.is_negative()) {
            return Err(ProbError::NegativeWeight(
                format_rational(w),
                omega.name(s).to_string(),
            ));
        }
        let total: BigRational = exact.iter().cloned().sum();
        if (&total - BigRational::one()).abs() > normalization_tolerance() {
            return Err(ProbError::NotNormalized(format_rational(&total)));
        }
        let weights = exact.iter().map(rational_to_f64).collect();
        Ok(ProbabilityMeasure { exact, weights })
    }

    pub fn from_f64(omega: &Omega, weights: &[f64]) -> Result<Self, ProbError> {
        let exact = weights
            .iter()
            .map(|&w| BigRational::from_float(w).unwrap_or_else(BigRational::zero))
            .collect();
        Self::new(omega, exact)
    }

    pub fn uniform(omega: &Omega) -> Self {
        let w = BigRational::new(BigInt::one(), BigInt::from(omega.len()));
        Self::new(omega, vec![w; omega.len()]).expect("uniform weights sum to one")
    }

    pub fn point_mass(omega: &Omega, state: usize) -> Self {
        let exact = (0..omega.len())
            .map(|s| if s == state { BigRational::one() } else { BigRational::zero() })
            .collect();
        Self::new(omega, exact).expect("point mass sums to one")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exact_weights(&self) -> &[BigRational] {
        &self.exact
    }

    pub fn weights_as<T: Scalar>(&self) -> Vec<T> {
        self.exact.iter().map(T::from_rational).collect()
    }

    pub fn mass(&self, event: &[usize]) -> f64 {
        event.iter().map(|&s| self.weights[s]).sum()
    }
}

/// Conditional expectation given a partition: on each block of positive mass
/// the weighted average, on null blocks `0`.
pub fn cond_exp_with<T: Scalar>(weights: &[T], sigma: &SigmaAlgebra, x: &[T]) -> Vec<T> {
    debug_assert_eq!(weights.len(), x.len());
    let mut out = vec![T::zero(); x.len()];
    for block in sigma.blocks() {
        let mut mass = T::zero();
        let mut total = T::zero();
        for &s in block {
            mass = mass + weights[s].clone();
            total = total + weights[s].clone() * x[s].clone();
        }
        if mass > T::zero() {
            let avg = total / mass;
            for &s in block {
                out[s] = avg.clone();
            }
        }
    }
    out
}

pub fn cond_exp(p: &ProbabilityMeasure, sigma: &SigmaAlgebra, x: &[f64]) -> Vec<f64> {
    cond_exp_with(p.weights(), sigma, x)
}

pub fn cond_exp_exact(p: &ProbabilityMeasure, sigma: &SigmaAlgebra, x: &[BigRational]) -> Vec<BigRational> {
    cond_exp_with(&p.weights_as::<BigRational>(), sigma, x)
}

/// Indices of blocks carrying zero probability.
pub fn null_blocks(p: &ProbabilityMeasure, sigma: &SigmaAlgebra) -> Vec<usize> {
    sigma
        .blocks()
        .iter()
        .enumerate()
        .filter(|(_, b)| b.iter().all(|&s| p.exact[s].is_zero()))
        .map(|(i, _)| i)
        .collect()
}

/// `mu ≫ nu`: every `mu`-null state is `nu`-null.
pub fn abs_continuous(mu: &ProbabilityMeasure, nu: &ProbabilityMeasure) -> Result<bool, ProbError> {
    if mu.exact.len() != nu.exact.len() {
        return Err(ProbError::OmegaMismatch);
    }
    Ok(mu
        .exact
        .iter()
        .zip(&nu.exact)
        .all(|(m, n)| !m.is_zero() || n.is_zero()))
}

/// A real process on `𝒯 × Ω` with exact values, indexed `[time][state]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Process {
    values: Vec<Vec<BigRational>>,
}

impl Process {
    pub fn new(values: Vec<Vec<BigRational>>) -> Result<Self, ProbError> {
        if let Some(first) = values.first() {
            if let Some(row) = values.iter().find(|r| r.len() != first.len()) {
                return Err(ProbError::LengthMismatch {
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        Ok(Process { values })
    }

    pub fn constant(times: usize, states: usize, value: BigRational) -> Self {
        Process {
            values: vec![vec![value; states]; times],
        }
    }

    pub fn at(&self, time: usize) -> &[BigRational] {
        &self.values[time]
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.values
    }
}

/// Every time slice is measurable for the matching filtration stage.
pub fn is_adapted<T: PartialEq>(rows: &[Vec<T>], filtration: &Filtration) -> bool {
    rows.len() == filtration.stages().len()
        && rows
            .iter()
            .zip(filtration.stages())
            .all(|(row, stage)| is_measurable(row, stage))
}
