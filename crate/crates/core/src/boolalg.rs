//! Finite Boolean algebras, their homomorphisms and anchors.
//!
//! Every finite Boolean algebra is (isomorphic to) the powerset of its atoms,
//! so an element is stored as a bitmask over a declared atom list. This makes
//! arbitrary meets and joins trivially available, which is all that
//! σ-completeness asks for once the carrier is finite.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Largest number of atoms an algebra may declare (one bit per atom).
pub const MAX_ATOMS: usize = 64;

/// Default atom bound for operations that enumerate anchors or up-sets.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 5;

/// Upper bound on the number of candidate maps `enumerate_homs` will visit.
const HOM_SEARCH_LIMIT: u128 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("a Boolean algebra needs at least one atom (0 = 1 otherwise)")]
    Degenerate,
    #[error("{0} atoms declared, at most {MAX_ATOMS} are supported")]
    TooManyAtoms(usize),
    #[error("duplicate atom `{0}`")]
    DuplicateAtom(String),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("element {bits:#x} is not in an algebra with {atoms} atoms")]
    NotAnElement { bits: u64, atoms: usize },
    #[error("enumeration over {atoms} atoms exceeds the configured limit of {limit} atoms")]
    Capacity { atoms: usize, limit: usize },
    #[error("{source_atoms}^{target_atoms} candidate homs exceed the search limit")]
    HomSearch { source_atoms: usize, target_atoms: usize },
    #[error("not an anchor: {0}")]
    NotAnAnchor(String),
    #[error("not a Boolean homomorphism: {0}")]
    NotAHom(String),
    #[error("operands live in different algebras")]
    Mismatch,
}

/// An element of a finite Boolean algebra: the set of atoms below it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Element(u64);

impl Element {
    pub const fn from_bits(bits: u64) -> Self {
        Element(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// Number of atoms below this element.
    pub fn rank(self) -> u32 {
        self.0.count_ones()
    }

    fn meet(self, other: Element) -> Element {
        Element(self.0 & other.0)
    }

    fn join(self, other: Element) -> Element {
        Element(self.0 | other.0)
    }

    fn below(self, other: Element) -> bool {
        self.0 & !other.0 == 0
    }
}

/// A finite, non-degenerate Boolean algebra `2^atoms`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FiniteBooleanAlgebra {
    atoms: Arc<[String]>,
}

impl fmt::Debug for FiniteBooleanAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "2^{{{}}}", self.atoms.join(","))
    }
}

impl FiniteBooleanAlgebra {
    pub fn new<I, S>(atoms: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let atoms: Vec<String> = atoms.into_iter().map(Into::into).collect();
        if atoms.is_empty() {
            return Err(AlgebraError::Degenerate);
        }
        if atoms.len() > MAX_ATOMS {
            return Err(AlgebraError::TooManyAtoms(atoms.len()));
        }
        let mut seen = BTreeSet::new();
        for a in &atoms {
            if !seen.insert(a.as_str()) {
                return Err(AlgebraError::DuplicateAtom(a.clone()));
            }
        }
        Ok(FiniteBooleanAlgebra {
            atoms: atoms.into(),
        })
    }

    /// The two-element algebra `{0, 1}`, with a single atom named `1`.
    pub fn two() -> Self {
        FiniteBooleanAlgebra {
            atoms: Arc::from(vec!["1".to_string()]),
        }
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_two(&self) -> bool {
        self.atoms.len() == 1
    }

    fn mask(&self) -> u64 {
        if self.atoms.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.atoms.len()) - 1
        }
    }

    pub fn zero(&self) -> Element {
        Element(0)
    }

    pub fn one(&self) -> Element {
        Element(self.mask())
    }

    pub fn atom(&self, index: usize) -> Element {
        assert!(index < self.atoms.len(), "atom index out of range");
        Element(1 << index)
    }

    pub fn contains(&self, x: Element) -> bool {
        x.0 & !self.mask() == 0
    }

    pub fn check(&self, x: Element) -> Result<Element, AlgebraError> {
        if self.contains(x) {
            Ok(x)
        } else {
            Err(AlgebraError::NotAnElement {
                bits: x.0,
                atoms: self.atoms.len(),
            })
        }
    }

    pub fn meet(&self, x: Element, y: Element) -> Result<Element, AlgebraError> {
        Ok(self.check(x)?.meet(self.check(y)?))
    }

    pub fn join(&self, x: Element, y: Element) -> Result<Element, AlgebraError> {
        Ok(self.check(x)?.join(self.check(y)?))
    }

    pub fn complement(&self, x: Element) -> Result<Element, AlgebraError> {
        Ok(Element(!self.check(x)?.0 & self.mask()))
    }

    /// `x ≤ y`, i.e. `x ∧ y = x`.
    pub fn leq(&self, x: Element, y: Element) -> Result<bool, AlgebraError> {
        Ok(self.check(x)?.below(self.check(y)?))
    }

    /// Meet of an arbitrary family; the empty meet is `1`.
    pub fn meet_all<I>(&self, family: I) -> Result<Element, AlgebraError>
    where
        I: IntoIterator<Item = Element>,
    {
        family
            .into_iter()
            .try_fold(self.one(), |acc, x| self.meet(acc, x))
    }

    /// Join of an arbitrary family; the empty join is `0`.
    pub fn join_all<I>(&self, family: I) -> Result<Element, AlgebraError>
    where
        I: IntoIterator<Item = Element>,
    {
        family
            .into_iter()
            .try_fold(self.zero(), |acc, x| self.join(acc, x))
    }

    // Unchecked variants for callers that already hold validated elements.

    pub(crate) fn not(&self, x: Element) -> Element {
        Element(!x.0 & self.mask())
    }

    pub(crate) fn and(&self, x: Element, y: Element) -> Element {
        x.meet(y)
    }

    pub(crate) fn or(&self, x: Element, y: Element) -> Element {
        x.join(y)
    }

    /// All elements, in increasing bit order. Only sensible for small algebras.
    pub fn elements(&self) -> impl Iterator<Item = Element> + Clone {
        (0..=self.mask()).map(Element)
    }

    pub fn element_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Element, AlgebraError> {
        let mut bits = 0u64;
        for name in names {
            let name = name.as_ref();
            let idx = self
                .atoms
                .iter()
                .position(|a| a == name)
                .ok_or_else(|| AlgebraError::UnknownAtom(name.to_string()))?;
            bits |= 1 << idx;
        }
        Ok(Element(bits))
    }

    /// Atom names below `x`, in declaration order.
    pub fn names_of(&self, x: Element) -> Vec<&str> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| x.0 >> i & 1 == 1)
            .map(|(_, a)| a.as_str())
            .collect()
    }

    pub fn display(&self, x: Element) -> String {
        format!("{{{}}}", self.names_of(x).join(","))
    }

    fn check_set(&self, set: &BTreeSet<Element>) -> Result<(), AlgebraError> {
        set.iter().try_for_each(|&x| self.check(x).map(|_| ()))
    }

    fn guard(&self, limit: usize) -> Result<(), AlgebraError> {
        if self.atoms.len() > limit {
            Err(AlgebraError::Capacity {
                atoms: self.atoms.len(),
                limit,
            })
        } else {
            Ok(())
        }
    }

    /// Proper filter that contains exactly one of `x`, `¬x` for every `x`.
    pub fn is_ultrafilter(&self, set: &BTreeSet<Element>) -> Result<bool, AlgebraError> {
        self.check_set(set)?;
        if set.contains(&self.zero()) || !set.contains(&self.one()) {
            return Ok(false);
        }
        // up-closure: adding one atom at a time reaches every upper bound
        for &x in set {
            for i in 0..self.atoms.len() {
                if !set.contains(&x.join(self.atom(i))) {
                    return Ok(false);
                }
            }
        }
        for &x in set {
            for &y in set {
                if !set.contains(&x.meet(y)) {
                    return Ok(false);
                }
            }
        }
        Ok(self
            .elements()
            .all(|x| set.contains(&x) != set.contains(&self.not(x))))
    }

    /// Proper ideal that contains exactly one of `x`, `¬x` for every `x`.
    pub fn is_prime_ideal(&self, set: &BTreeSet<Element>) -> Result<bool, AlgebraError> {
        self.check_set(set)?;
        if set.contains(&self.one()) || !set.contains(&self.zero()) {
            return Ok(false);
        }
        for &x in set {
            for i in 0..self.atoms.len() {
                let lower = Element(x.0 & !(1 << i));
                if !set.contains(&lower) {
                    return Ok(false);
                }
            }
        }
        for &x in set {
            for &y in set {
                if !set.contains(&x.join(y)) {
                    return Ok(false);
                }
            }
        }
        Ok(self
            .elements()
            .all(|x| set.contains(&x) != set.contains(&self.not(x))))
    }
}

/// Checks the literal homomorphism conditions on a dense element table:
/// `f(0) = 0`, meets, joins (pairwise plus the empty family) and complement.
pub fn preserves_structure(
    source: &FiniteBooleanAlgebra,
    target: &FiniteBooleanAlgebra,
    table: &[Element],
) -> bool {
    let size = source.mask() as usize + 1;
    if table.len() != size || !table.iter().all(|&y| target.contains(y)) {
        return false;
    }
    let f = |x: Element| table[x.0 as usize];
    if f(source.zero()) != target.zero() || f(source.one()) != target.one() {
        return false;
    }
    for x in source.elements() {
        if f(source.not(x)) != target.not(f(x)) {
            return false;
        }
        for y in source.elements() {
            if f(x.meet(y)) != f(x).meet(f(y)) || f(x.join(y)) != f(x).join(f(y)) {
                return false;
            }
        }
    }
    true
}

/// A structure-preserving map between finite Boolean algebras, stored by the
/// images of the source atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BooleanHom {
    source: FiniteBooleanAlgebra,
    target: FiniteBooleanAlgebra,
    images: Vec<Element>,
}

impl BooleanHom {
    /// A hom out of a finite algebra is fixed by where the atoms go; the images
    /// must be pairwise disjoint and join to `1`.
    pub fn from_atom_images(
        source: FiniteBooleanAlgebra,
        target: FiniteBooleanAlgebra,
        images: Vec<Element>,
    ) -> Result<Self, AlgebraError> {
        if images.len() != source.atom_count() {
            return Err(AlgebraError::NotAHom(format!(
                "{} atom images given for {} atoms",
                images.len(),
                source.atom_count()
            )));
        }
        let mut seen = 0u64;
        for &img in &images {
            target.check(img)?;
            if seen & img.0 != 0 {
                return Err(AlgebraError::NotAHom(
                    "atom images overlap, so meets are not preserved".into(),
                ));
            }
            seen |= img.0;
        }
        if Element(seen) != target.one() {
            return Err(AlgebraError::NotAHom(
                "atom images do not cover 1, so complements are not preserved".into(),
            ));
        }
        Ok(BooleanHom {
            source,
            target,
            images,
        })
    }

    /// Builds a hom from a full element table after checking every condition
    /// literally.
    pub fn from_table(
        source: FiniteBooleanAlgebra,
        target: FiniteBooleanAlgebra,
        table: &[Element],
    ) -> Result<Self, AlgebraError> {
        if !preserves_structure(&source, &target, table) {
            return Err(AlgebraError::NotAHom(
                "table violates one of the preservation conditions".into(),
            ));
        }
        let images = (0..source.atom_count())
            .map(|i| table[1usize << i])
            .collect();
        Self::from_atom_images(source, target, images)
    }

    pub fn identity(algebra: &FiniteBooleanAlgebra) -> Self {
        BooleanHom {
            source: algebra.clone(),
            target: algebra.clone(),
            images: (0..algebra.atom_count()).map(|i| algebra.atom(i)).collect(),
        }
    }

    pub fn source(&self) -> &FiniteBooleanAlgebra {
        &self.source
    }

    pub fn target(&self) -> &FiniteBooleanAlgebra {
        &self.target
    }

    pub fn atom_images(&self) -> &[Element] {
        &self.images
    }

    pub fn apply(&self, x: Element) -> Result<Element, AlgebraError> {
        self.source.check(x)?;
        Ok(self.apply_unchecked(x))
    }

    pub(crate) fn apply_unchecked(&self, x: Element) -> Element {
        self.images
            .iter()
            .enumerate()
            .filter(|(i, _)| x.0 >> i & 1 == 1)
            .fold(Element(0), |acc, (_, &img)| acc.join(img))
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &BooleanHom) -> Result<BooleanHom, AlgebraError> {
        if self.target != next.source {
            return Err(AlgebraError::Mismatch);
        }
        Ok(BooleanHom {
            source: self.source.clone(),
            target: next.target.clone(),
            images: self.images.iter().map(|&x| next.apply_unchecked(x)).collect(),
        })
    }

    /// Dense table indexed by source element bits.
    pub fn table(&self) -> Vec<Element> {
        self.source.elements().map(|x| self.apply_unchecked(x)).collect()
    }
}

/// All homs `source → target`. Each one corresponds to a choice, for every
/// target atom, of the source atom whose image contains it.
pub fn enumerate_homs(
    source: &FiniteBooleanAlgebra,
    target: &FiniteBooleanAlgebra,
) -> Result<Vec<BooleanHom>, AlgebraError> {
    let m = source.atom_count() as u128;
    let n = target.atom_count() as u32;
    let total = m.checked_pow(n).filter(|&t| t <= HOM_SEARCH_LIMIT);
    let Some(total) = total else {
        return Err(AlgebraError::HomSearch {
            source_atoms: source.atom_count(),
            target_atoms: target.atom_count(),
        });
    };
    let mut homs = Vec::with_capacity(total as usize);
    for code in 0..total {
        let mut images = vec![Element(0); source.atom_count()];
        let mut c = code;
        for t in 0..n as usize {
            let s = (c % m) as usize;
            c /= m;
            images[s] = images[s].join(target.atom(t));
        }
        homs.push(BooleanHom {
            source: source.clone(),
            target: target.clone(),
            images,
        });
    }
    Ok(homs)
}

/// The homs `B → 2`; one per atom of `B`, sending that atom to `1`.
pub fn homs_to_two(algebra: &FiniteBooleanAlgebra) -> Vec<BooleanHom> {
    let two = FiniteBooleanAlgebra::two();
    (0..algebra.atom_count())
        .map(|k| BooleanHom {
            source: algebra.clone(),
            target: two.clone(),
            images: (0..algebra.atom_count())
                .map(|i| if i == k { two.one() } else { two.zero() })
                .collect(),
        })
        .collect()
}

/// Number of maps `2 → B` satisfying the hom conditions, found by trying
/// every element table.
pub fn count_homs_from_two(algebra: &FiniteBooleanAlgebra, limit: usize) -> Result<usize, AlgebraError> {
    algebra.guard(limit)?;
    let two = FiniteBooleanAlgebra::two();
    let mut count = 0;
    for lo in algebra.elements() {
        for hi in algebra.elements() {
            if preserves_structure(&two, algebra, &[lo, hi]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// The unique arrow `2 → B`.
pub fn initial_arrow(algebra: &FiniteBooleanAlgebra) -> BooleanHom {
    let hom = BooleanHom {
        source: FiniteBooleanAlgebra::two(),
        target: algebra.clone(),
        images: vec![algebra.one()],
    };
    if algebra.atom_count() <= DEFAULT_ENUMERATION_LIMIT {
        assert_eq!(
            count_homs_from_two(algebra, DEFAULT_ENUMERATION_LIMIT),
            Ok(1),
            "2 must be initial"
        );
    }
    hom
}

/// An order-preserving map `B → 2` with `0 ↦ 0` and `1 ↦ 1`, stored as the
/// up-set of elements sent to `1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Anchor {
    algebra: FiniteBooleanAlgebra,
    upset: BTreeSet<Element>,
}

impl PartialOrd for FiniteBooleanAlgebra {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FiniteBooleanAlgebra {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.atoms.cmp(&other.atoms)
    }
}

impl Anchor {
    pub fn from_upset<I>(algebra: FiniteBooleanAlgebra, upset: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = Element>,
    {
        let upset: BTreeSet<Element> = upset.into_iter().collect();
        algebra.check_set(&upset)?;
        if upset.contains(&algebra.zero()) {
            return Err(AlgebraError::NotAnAnchor("0 is sent to 1".into()));
        }
        if !upset.contains(&algebra.one()) {
            return Err(AlgebraError::NotAnAnchor("1 is sent to 0".into()));
        }
        for &x in &upset {
            for i in 0..algebra.atom_count() {
                let y = x.join(algebra.atom(i));
                if !upset.contains(&y) {
                    return Err(AlgebraError::NotAnAnchor(format!(
                        "not order-preserving: {} ↦ 1 but {} ↦ 0",
                        algebra.display(x),
                        algebra.display(y)
                    )));
                }
            }
        }
        Ok(Anchor { algebra, upset })
    }

    /// The anchor sending exactly the elements above `bottom` to `1`.
    pub fn principal(algebra: FiniteBooleanAlgebra, bottom: Element) -> Result<Self, AlgebraError> {
        algebra.check(bottom)?;
        if bottom == algebra.zero() {
            return Err(AlgebraError::NotAnAnchor("0 is sent to 1".into()));
        }
        let free = algebra.not(bottom);
        // enumerate subsets of the free atoms
        let mut upset = BTreeSet::new();
        let mut sub = free.0;
        loop {
            upset.insert(Element(bottom.0 | sub));
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free.0;
        }
        Ok(Anchor { algebra, upset })
    }

    /// Every hom into `2` is in particular an anchor.
    pub fn from_hom(hom: &BooleanHom) -> Result<Self, AlgebraError> {
        if !hom.target.is_two() {
            return Err(AlgebraError::Mismatch);
        }
        let upset = hom
            .source
            .elements()
            .filter(|&x| hom.apply_unchecked(x) != Element(0))
            .collect();
        Ok(Anchor {
            algebra: hom.source.clone(),
            upset,
        })
    }

    pub fn algebra(&self) -> &FiniteBooleanAlgebra {
        &self.algebra
    }

    pub fn upset(&self) -> &BTreeSet<Element> {
        &self.upset
    }

    pub fn apply(&self, x: Element) -> bool {
        self.upset.contains(&x)
    }

    /// Whether this anchor also preserves meets and complements.
    pub fn is_hom(&self) -> bool {
        let alg = &self.algebra;
        alg.elements().all(|x| {
            self.apply(alg.not(x)) != self.apply(x)
                && alg
                    .elements()
                    .all(|y| self.apply(x.meet(y)) == (self.apply(x) && self.apply(y)))
        })
    }
}

/// All anchors on `algebra`, in a deterministic order.
///
/// Walks elements from the top down; an element may join the up-set only if
/// every cover of it already has, so each branch is an up-set by construction.
pub fn enumerate_anchors(algebra: &FiniteBooleanAlgebra, limit: usize) -> Result<Vec<Anchor>, AlgebraError> {
    algebra.guard(limit)?;
    let n = algebra.atom_count();
    let mut order: Vec<Element> = algebra
        .elements()
        .filter(|&x| x != algebra.zero() && x != algebra.one())
        .collect();
    order.sort_by(|a, b| b.rank().cmp(&a.rank()).then(a.cmp(b)));

    let size = algebra.mask() as usize + 1;
    let mut member = vec![false; size];
    member[algebra.one().0 as usize] = true;
    let mut out = Vec::new();

    fn walk(
        idx: usize,
        order: &[Element],
        n: usize,
        member: &mut Vec<bool>,
        algebra: &FiniteBooleanAlgebra,
        out: &mut Vec<Anchor>,
    ) {
        if idx == order.len() {
            let upset = member
                .iter()
                .enumerate()
                .filter(|(_, &m)| m)
                .map(|(i, _)| Element(i as u64))
                .collect();
            out.push(Anchor {
                algebra: algebra.clone(),
                upset,
            });
            return;
        }
        let x = order[idx];
        walk(idx + 1, order, n, member, algebra, out);
        let covers_in = (0..n)
            .filter(|i| x.0 >> i & 1 == 0)
            .all(|i| member[(x.0 | 1 << i) as usize]);
        if covers_in {
            member[x.0 as usize] = true;
            walk(idx + 1, order, n, member, algebra, out);
            member[x.0 as usize] = false;
        }
    }

    walk(0, &order, n, &mut member, algebra, &mut out);
    Ok(out)
}
