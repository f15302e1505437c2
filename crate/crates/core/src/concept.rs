//! Finite concept classes and their combinatorial parameters.
//!
//! A concept is a subset of a finite domain `{0, .., n-1}` stored as a packed
//! bitset. A [`ConceptClass`] keeps its concepts deduplicated and sorted in the
//! canonical order (ascending by bit pattern, read as an unsigned integer with
//! bit `i` standing for point `i`). Every argmin in the crate breaks ties by
//! this order.
//!
//! VC dimension and claw number are computed by exhaustive search. Domains up
//! to roughly 24 points are practical.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

const WORD: usize = 64;

/// Domain `{0, .., size-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteDomain {
    size: usize,
}

impl FiniteDomain {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(LabError::Domain("domain size must be at least 1".into()));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn check(&self, x: usize) -> Result<()> {
        if x >= self.size {
            Err(LabError::Domain(format!(
                "index {x} outside domain of size {}",
                self.size
            )))
        } else {
            Ok(())
        }
    }
}

/// A subset of a finite domain.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Concept {
    words: Vec<u64>,
}

impl Concept {
    pub fn empty(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(WORD).max(1)],
        }
    }

    pub fn full(n: usize) -> Self {
        let mut c = Self::empty(n);
        for x in 0..n {
            c.insert(x);
        }
        c
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(n: usize, indices: I) -> Result<Self> {
        let mut c = Self::empty(n);
        for x in indices {
            if x >= n {
                return Err(LabError::Domain(format!(
                    "index {x} outside domain of size {n}"
                )));
            }
            c.insert(x);
        }
        Ok(c)
    }

    /// Builds a concept from the low bits of `mask`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let mut c = Self::empty(n);
        c.words[0] = if n >= WORD { mask } else { mask & ((1u64 << n) - 1) };
        c
    }

    pub fn contains(&self, x: usize) -> bool {
        self.words
            .get(x / WORD)
            .is_some_and(|w| (w >> (x % WORD)) & 1 == 1)
    }

    pub fn insert(&mut self, x: usize) {
        self.words[x / WORD] |= 1 << (x % WORD);
    }

    pub fn remove(&mut self, x: usize) {
        if let Some(w) = self.words.get_mut(x / WORD) {
            *w &= !(1 << (x % WORD));
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(i * WORD + t)
                }
            })
        })
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        let len = self.words.len().max(other.words.len());
        let words = (0..len)
            .map(|i| {
                f(
                    self.words.get(i).copied().unwrap_or(0),
                    other.words.get(i).copied().unwrap_or(0),
                )
            })
            .collect();
        Self { words }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn symmetric_difference(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a ^ b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(i, &w)| w & !other.words.get(i).copied().unwrap_or(0) == 0)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .any(|(a, b)| a & b != 0)
    }

    /// Bits of `self` at the positions listed in `points`, packed into the
    /// low bits of a `u64` (bit `j` ↔ `points[j]`).
    pub fn local_mask(&self, points: &[usize]) -> u64 {
        debug_assert!(points.len() <= WORD);
        points
            .iter()
            .enumerate()
            .fold(0u64, |m, (j, &x)| m | (u64::from(self.contains(x)) << j))
    }
}

impl Ord for Concept {
    fn cmp(&self, other: &Self) -> Ordering {
        let len = self.words.len().max(other.words.len());
        for i in (0..len).rev() {
            let a = self.words.get(i).copied().unwrap_or(0);
            let b = other.words.get(i).copied().unwrap_or(0);
            match a.cmp(&b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Concept {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A finite family of concepts over a [`FiniteDomain`], deduplicated and in
/// canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ClassRepr", into = "ClassRepr")]
pub struct ConceptClass {
    domain: FiniteDomain,
    concepts: Vec<Concept>,
}

#[derive(Serialize, Deserialize)]
struct ClassRepr {
    n: usize,
    concepts: Vec<Vec<usize>>,
}

impl TryFrom<ClassRepr> for ConceptClass {
    type Error = LabError;

    fn try_from(r: ClassRepr) -> Result<Self> {
        ConceptClass::from_index_lists(r.n, &r.concepts)
    }
}

impl From<ConceptClass> for ClassRepr {
    fn from(c: ConceptClass) -> Self {
        ClassRepr {
            n: c.domain.size(),
            concepts: c.concepts.iter().map(Concept::to_vec).collect(),
        }
    }
}

impl ConceptClass {
    pub fn new(n: usize, concepts: impl IntoIterator<Item = Concept>) -> Result<Self> {
        let domain = FiniteDomain::new(n)?;
        let full = Concept::full(n);
        let set: BTreeSet<Concept> = concepts.into_iter().collect();
        if let Some(bad) = set.iter().find(|c| !c.is_subset_of(&full)) {
            return Err(LabError::Domain(format!(
                "concept {bad:?} not contained in domain of size {n}"
            )));
        }
        Ok(Self {
            domain,
            concepts: set.into_iter().collect(),
        })
    }

    pub fn from_index_lists(n: usize, lists: &[Vec<usize>]) -> Result<Self> {
        let concepts = lists
            .iter()
            .map(|l| Concept::from_indices(n, l.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, concepts)
    }

    /// All `2^n` subsets.
    pub fn powerset(n: usize) -> Result<Self> {
        if n > 24 {
            return Err(LabError::Domain(format!(
                "powerset of {n} points is too large to enumerate"
            )));
        }
        Self::new(n, (0..1u64 << n).map(|m| Concept::from_mask(n, m)))
    }

    /// `{ X \ {x} : x ∈ X }`.
    pub fn co_singletons(n: usize) -> Result<Self> {
        let full = Concept::full(n);
        Self::new(
            n,
            (0..n).map(|x| {
                let mut c = full.clone();
                c.remove(x);
                c
            }),
        )
    }

    /// All subsets of size `n - h`.
    pub fn co_size(n: usize, h: usize) -> Result<Self> {
        if h > n {
            return Err(LabError::Parameter(format!("co-size {h} exceeds {n}")));
        }
        let full = Concept::full(n);
        Self::new(
            n,
            (0..n).combinations(h).map(|removed| {
                let mut c = full.clone();
                for x in removed {
                    c.remove(x);
                }
                c
            }),
        )
    }

    pub fn domain(&self) -> FiniteDomain {
        self.domain
    }

    pub fn n(&self) -> usize {
        self.domain.size()
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Concept> {
        self.concepts.get(index)
    }

    pub fn index_of(&self, c: &Concept) -> Option<usize> {
        self.concepts.binary_search(c).ok()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `C ∩ B`: the deduplicated restrictions `c ∩ B`, in canonical order.
pub fn project(class: &ConceptClass, b: &[usize]) -> Result<Vec<Concept>> {
    let n = class.n();
    let b = Concept::from_indices(n, b.iter().copied())?;
    let set: BTreeSet<Concept> = class
        .concepts()
        .iter()
        .map(|c| c.intersection(&b))
        .collect();
    Ok(set.into_iter().collect())
}

fn local_projection(class: &ConceptClass, points: &[usize]) -> HashSet<u64> {
    class
        .concepts()
        .iter()
        .map(|c| c.local_mask(points))
        .collect()
}

fn is_shattered(class: &ConceptClass, points: &[usize]) -> bool {
    let target = 1usize << points.len();
    if class.len() < target {
        return false;
    }
    let mut seen = vec![false; target];
    let mut distinct = 0;
    for c in class.concepts() {
        let m = c.local_mask(points) as usize;
        if !seen[m] {
            seen[m] = true;
            distinct += 1;
            if distinct == target {
                return true;
            }
        }
    }
    false
}

/// Largest `|B|` with `|C ∩ B| = 2^|B|`.
///
/// Subsets of a shattered set are shattered, so the search walks sizes upward
/// and stops at the first size with no shattered set.
pub fn vc_dimension(class: &ConceptClass) -> usize {
    let n = class.n();
    let mut best = 0;
    for s in 1..=n.min(WORD - 1) {
        if (1usize << s) > class.len() {
            break;
        }
        if (0..n).combinations(s).any(|b| is_shattered(class, &b)) {
            best = s;
        } else {
            break;
        }
    }
    best
}

/// A claw number together with the largest level `M` it was certified up to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClawCertificate {
    pub value: usize,
    pub max_level: usize,
}

impl fmt::Display for ClawCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (certified to M={})", self.value, self.max_level)
    }
}

/// Is there a `B` of size `m` whose restriction contains every subset of
/// size `m - h`?
fn claw_witness(class: &ConceptClass, h: usize, m: usize) -> bool {
    let needed = m - h;
    let required = (0..m).combinations(needed).count();
    (0..class.n()).combinations(m).any(|b| {
        let proj = local_projection(class, &b);
        proj.len() >= required
            && (0..m)
                .combinations(needed)
                .all(|o| proj.contains(&o.iter().fold(0u64, |acc, &j| acc | (1 << j))))
    })
}

/// The claw number, certified for every level `m` in `[h, max_level]`.
///
/// Returns 0 when no `h ≥ 1` qualifies. Candidates are capped at the VC
/// dimension: near `h = M` only a few levels are checked, and at `m = h` the
/// condition degenerates to `∅ ∈ C ∩ B`, which even `{∅}` satisfies. The true
/// claw number never exceeds the VC dimension, so the cap only removes such
/// vacuous certificates.
pub fn claw_number_certified(class: &ConceptClass, max_level: usize) -> Result<ClawCertificate> {
    if max_level > class.n() {
        return Err(LabError::Domain(format!(
            "max level {max_level} exceeds domain size {}",
            class.n()
        )));
    }
    if max_level >= WORD {
        return Err(LabError::Domain("max level must be below 64".into()));
    }
    let cap = max_level.min(vc_dimension(class));
    let value = (1..=cap)
        .rev()
        .find(|&h| (h..=max_level).all(|m| claw_witness(class, h, m)))
        .unwrap_or(0);
    Ok(ClawCertificate { value, max_level })
}

/// `C △ C = { c ⊕ c' }`, always containing ∅.
pub fn symmetric_difference_class(class: &ConceptClass) -> ConceptClass {
    let cs = class.concepts();
    let mut set = BTreeSet::new();
    for (i, a) in cs.iter().enumerate() {
        for b in &cs[i..] {
            set.insert(a.symmetric_difference(b));
        }
    }
    ConceptClass {
        domain: class.domain,
        concepts: set.into_iter().collect(),
    }
}

/// Closure under finite (nonempty) intersections.
pub fn intersection_closure(class: &ConceptClass) -> ConceptClass {
    let generators = class.concepts();
    let mut set: BTreeSet<Concept> = generators.iter().cloned().collect();
    let mut frontier: Vec<Concept> = generators.to_vec();
    while let Some(c) = frontier.pop() {
        for g in generators {
            let meet = c.intersection(g);
            if !set.contains(&meet) {
                set.insert(meet.clone());
                frontier.push(meet);
            }
        }
    }
    ConceptClass {
        domain: class.domain,
        concepts: set.into_iter().collect(),
    }
}
