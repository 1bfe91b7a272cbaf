//! Blurred information: sub-algebras `ℱ ⊆ 𝔹^Ω`, their quotients under anchors,
//! and the knowledge and belief σ-algebras extracted from them.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::boolalg::{enumerate_anchors, enumerate_homs, AlgebraError, Anchor, BooleanHom, Element, FiniteBooleanAlgebra};
use crate::prob::{Omega, SigmaAlgebra};

/// Largest member set `close_under_ops` will build.
pub const MAX_MEMBERS: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InfoError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("function has {got} values but Ω has {expected} states")]
    WrongLength { expected: usize, got: usize },
    #[error("member set is not closed: {0}")]
    NotClosed(String),
    #[error("the anchor set must be non-empty")]
    EmptyAnchorSet,
    #[error("anchor and information live on different Boolean algebras")]
    AlgebraMismatch,
    #[error("objects live on different state spaces")]
    OmegaMismatch,
    #[error("closure exceeds {MAX_MEMBERS} members")]
    TooLarge,
}

/// A function `Ω → 𝔹`, one algebra element per state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlurredFn(pub Vec<Element>);

impl BlurredFn {
    pub fn constant(states: usize, value: Element) -> Self {
        BlurredFn(vec![value; states])
    }

    /// The crisp function taking `1_𝔹` on `event` and `0_𝔹` elsewhere.
    pub fn indicator(algebra: &FiniteBooleanAlgebra, event: &[bool]) -> Self {
        BlurredFn(
            event
                .iter()
                .map(|&b| if b { algebra.one() } else { algebra.zero() })
                .collect(),
        )
    }

    pub fn values(&self) -> &[Element] {
        &self.0
    }

    fn map(&self, f: impl Fn(Element) -> Element) -> BlurredFn {
        BlurredFn(self.0.iter().map(|&x| f(x)).collect())
    }

    fn zip(&self, other: &BlurredFn, f: impl Fn(Element, Element) -> Element) -> BlurredFn {
        BlurredFn(self.0.iter().zip(&other.0).map(|(&x, &y)| f(x, y)).collect())
    }
}

/// A sub-Boolean-algebra of `𝔹^Ω` under the pointwise operations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralizedSigmaAlgebra {
    omega: Omega,
    algebra: FiniteBooleanAlgebra,
    members: BTreeSet<BlurredFn>,
}

fn check_fn(omega: &Omega, algebra: &FiniteBooleanAlgebra, f: &BlurredFn) -> Result<(), InfoError> {
    if f.0.len() != omega.len() {
        return Err(InfoError::WrongLength {
            expected: omega.len(),
            got: f.0.len(),
        });
    }
    for &x in &f.0 {
        algebra.check(x)?;
    }
    Ok(())
}

impl GeneralizedSigmaAlgebra {
    /// Smallest member set containing the generators and both constants, closed
    /// under pointwise `¬`, `∧` and `∨`.
    pub fn close_under_ops<I>(omega: &Omega, algebra: &FiniteBooleanAlgebra, generators: I) -> Result<Self, InfoError>
    where
        I: IntoIterator<Item = BlurredFn>,
    {
        let n = omega.len();
        let mut members: BTreeSet<BlurredFn> = BTreeSet::new();
        let mut order: Vec<BlurredFn> = Vec::new();
        let mut queue: Vec<BlurredFn> = vec![
            BlurredFn::constant(n, algebra.zero()),
            BlurredFn::constant(n, algebra.one()),
        ];
        for g in generators {
            check_fn(omega, algebra, &g)?;
            queue.push(g);
        }
        while let Some(f) = queue.pop() {
            if !members.insert(f.clone()) {
                continue;
            }
            if members.len() > MAX_MEMBERS {
                return Err(InfoError::TooLarge);
            }
            let neg = f.map(|x| algebra.not(x));
            if !members.contains(&neg) {
                queue.push(neg);
            }
            for g in &order {
                for h in [f.zip(g, |x, y| algebra.and(x, y)), f.zip(g, |x, y| algebra.or(x, y))] {
                    if !members.contains(&h) {
                        queue.push(h);
                    }
                }
            }
            order.push(f);
        }
        Ok(GeneralizedSigmaAlgebra {
            omega: omega.clone(),
            algebra: algebra.clone(),
            members,
        })
    }

    /// Accepts an explicit member list, which must already be closed.
    pub fn from_members<I>(omega: &Omega, algebra: &FiniteBooleanAlgebra, members: I) -> Result<Self, InfoError>
    where
        I: IntoIterator<Item = BlurredFn>,
    {
        let members: BTreeSet<BlurredFn> = members.into_iter().collect();
        for f in &members {
            check_fn(omega, algebra, f)?;
        }
        let n = omega.len();
        for c in [algebra.zero(), algebra.one()] {
            if !members.contains(&BlurredFn::constant(n, c)) {
                return Err(InfoError::NotClosed(format!(
                    "constant {} missing",
                    algebra.display(c)
                )));
            }
        }
        for f in &members {
            if !members.contains(&f.map(|x| algebra.not(x))) {
                return Err(InfoError::NotClosed("complement missing".into()));
            }
            for g in &members {
                if !members.contains(&f.zip(g, |x, y| algebra.and(x, y))) {
                    return Err(InfoError::NotClosed("meet missing".into()));
                }
                if !members.contains(&f.zip(g, |x, y| algebra.or(x, y))) {
                    return Err(InfoError::NotClosed("join missing".into()));
                }
            }
        }
        Ok(GeneralizedSigmaAlgebra {
            omega: omega.clone(),
            algebra: algebra.clone(),
            members,
        })
    }

    /// The crisp information carried by an ordinary σ-algebra.
    pub fn from_sigma(algebra: &FiniteBooleanAlgebra, sigma: &SigmaAlgebra) -> Result<Self, InfoError> {
        let gens = sigma
            .block_events()
            .into_iter()
            .map(|e| BlurredFn::indicator(algebra, &e));
        Self::close_under_ops(sigma.omega(), algebra, gens)
    }

    pub fn omega(&self) -> &Omega {
        &self.omega
    }

    pub fn algebra(&self) -> &FiniteBooleanAlgebra {
        &self.algebra
    }

    pub fn members(&self) -> &BTreeSet<BlurredFn> {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, f: &BlurredFn) -> bool {
        self.members.contains(f)
    }
}

/// A χ_F object `(𝔹, ℱ, a)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoTriple {
    field: GeneralizedSigmaAlgebra,
    anchor: Anchor,
}

impl InfoTriple {
    pub fn new(field: GeneralizedSigmaAlgebra, anchor: Anchor) -> Result<Self, InfoError> {
        if field.algebra() != anchor.algebra() {
            return Err(InfoError::AlgebraMismatch);
        }
        Ok(InfoTriple { field, anchor })
    }

    pub fn algebra(&self) -> &FiniteBooleanAlgebra {
        self.field.algebra()
    }

    pub fn field(&self) -> &GeneralizedSigmaAlgebra {
        &self.field
    }

    pub fn anchor(&self) -> &Anchor {
        &self.anchor
    }

    pub fn omega(&self) -> &Omega {
        self.field.omega()
    }
}

fn compose(anchor: &Anchor, k: &BlurredFn) -> Vec<bool> {
    k.0.iter().map(|&x| anchor.apply(x)).collect()
}

/// `ℱ/A`: the crisp events `u` such that some member `k` has `u = a ∘ k` for
/// every anchor `a ∈ A` at once.
pub fn quotient(field: &GeneralizedSigmaAlgebra, anchors: &[Anchor]) -> Result<BTreeSet<Vec<bool>>, InfoError> {
    let (first, rest) = anchors.split_first().ok_or(InfoError::EmptyAnchorSet)?;
    if anchors.iter().any(|a| a.algebra() != field.algebra()) {
        return Err(InfoError::AlgebraMismatch);
    }
    Ok(field
        .members()
        .iter()
        .filter_map(|k| {
            let u = compose(first, k);
            rest.iter().all(|a| compose(a, k) == u).then_some(u)
        })
        .collect())
}

/// The events `{k = 1_𝔹}` for members `k` taking only the values `0_𝔹`, `1_𝔹`.
pub fn crisp_quotient(field: &GeneralizedSigmaAlgebra) -> BTreeSet<Vec<bool>> {
    let alg = field.algebra();
    field
        .members()
        .iter()
        .filter(|k| k.0.iter().all(|&x| x == alg.zero() || x == alg.one()))
        .map(|k| k.0.iter().map(|&x| x == alg.one()).collect())
        .collect()
}

/// `ℱ/𝒜_𝔹` over the full anchor set, read as a σ-algebra.
pub fn knowledge(triple: &InfoTriple, max_atoms: usize) -> Result<SigmaAlgebra, InfoError> {
    let anchors = enumerate_anchors(triple.algebra(), max_atoms)?;
    let events: Vec<Vec<bool>> = quotient(triple.field(), &anchors)?.into_iter().collect();
    Ok(SigmaAlgebra::generate(triple.omega(), &events).expect("events sized to Ω"))
}

/// `ℱ/a` for the triple's own anchor, read as a σ-algebra.
pub fn belief(triple: &InfoTriple) -> SigmaAlgebra {
    let events: Vec<Vec<bool>> = quotient(triple.field(), std::slice::from_ref(triple.anchor()))
        .expect("anchor matches its own triple")
        .into_iter()
        .collect();
    SigmaAlgebra::generate(triple.omega(), &events).expect("events sized to Ω")
}

/// Whether `u: 𝔹₁ → 𝔹₂` is a χ_F arrow `t1 → t2`: `uℱ₁ ⊆ ℱ₂` and `a₁ = a₂ ∘ u`.
pub fn check_chi_arrow(u: &BooleanHom, t1: &InfoTriple, t2: &InfoTriple) -> Result<bool, InfoError> {
    if t1.omega() != t2.omega() {
        return Err(InfoError::OmegaMismatch);
    }
    if u.source() != t1.algebra() || u.target() != t2.algebra() {
        return Err(InfoError::AlgebraMismatch);
    }
    let pushes_forward = t1
        .field()
        .members()
        .iter()
        .all(|f| t2.field().contains(&f.map(|x| u.apply_unchecked(x))));
    if !pushes_forward {
        return Ok(false);
    }
    Ok(t1
        .algebra()
        .elements()
        .all(|x| t1.anchor().apply(x) == t2.anchor().apply(u.apply_unchecked(x))))
}

/// Some χ_F arrow `t1 → t2`, trying the identity first when the algebras agree.
pub fn find_chi_arrow(t1: &InfoTriple, t2: &InfoTriple) -> Result<Option<BooleanHom>, InfoError> {
    if t1.algebra() == t2.algebra() {
        let id = BooleanHom::identity(t1.algebra());
        if check_chi_arrow(&id, t1, t2)? {
            return Ok(Some(id));
        }
    }
    for u in enumerate_homs(t1.algebra(), t2.algebra())? {
        if check_chi_arrow(&u, t1, t2)? {
            return Ok(Some(u));
        }
    }
    Ok(None)
}
