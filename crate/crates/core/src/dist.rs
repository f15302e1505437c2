//! Discrete distributions over a finite domain and the quantities built on
//! them: class prior, conditionals, error rates, weight ratio, B-distance,
//! ε-net checks, and seeded sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concept::{Concept, ConceptClass};
use crate::error::{LabError, Result};
use crate::rng::rng_from_seed;

/// Normalization tolerance for probability vectors.
pub const MASS_TOLERANCE: f64 = 1e-12;

fn check_mass(ps: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for p in ps {
        if !p.is_finite() || p < 0.0 {
            return Err(LabError::InvalidDistribution(format!(
                "probability {p} is not a finite non-negative number"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(LabError::InvalidDistribution(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledAtom {
    pub x: usize,
    pub y: u8,
    pub p: f64,
}

/// A distribution over `X × {0,1}` with finitely many atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabeledRepr")]
pub struct LabeledDiscreteDistribution {
    atoms: Vec<LabeledAtom>,
}

#[derive(Deserialize)]
struct LabeledRepr {
    atoms: Vec<LabeledAtom>,
}

impl TryFrom<LabeledRepr> for LabeledDiscreteDistribution {
    type Error = LabError;
    fn try_from(r: LabeledRepr) -> Result<Self> {
        Self::new(r.atoms)
    }
}

impl LabeledDiscreteDistribution {
    /// Validates and sorts the atoms into canonical `(x, y)` order.
    pub fn new(mut atoms: Vec<LabeledAtom>) -> Result<Self> {
        if let Some(a) = atoms.iter().find(|a| a.y > 1) {
            return Err(LabError::InvalidDistribution(format!(
                "label {} at point {} is not 0 or 1",
                a.y, a.x
            )));
        }
        atoms.sort_by_key(|a| (a.x, a.y));
        if let Some(w) = atoms.windows(2).find(|w| (w[0].x, w[0].y) == (w[1].x, w[1].y)) {
            return Err(LabError::InvalidDistribution(format!(
                "duplicate atom ({}, {})",
                w[0].x, w[0].y
            )));
        }
        check_mass(atoms.iter().map(|a| a.p))?;
        Ok(Self { atoms })
    }

    pub fn from_triples(triples: &[(usize, u8, f64)]) -> Result<Self> {
        Self::new(
            triples
                .iter()
                .map(|&(x, y, p)| LabeledAtom { x, y, p })
                .collect(),
        )
    }

    pub fn atoms(&self) -> &[LabeledAtom] {
        &self.atoms
    }

    /// One past the largest point carrying an atom.
    pub fn support_bound(&self) -> usize {
        self.atoms.iter().map(|a| a.x + 1).max().unwrap_or(0)
    }

    pub fn alpha(&self) -> f64 {
        self.atoms.iter().filter(|a| a.y == 1).map(|a| a.p).sum()
    }

    pub fn marginal(&self) -> MarginalDistribution {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for a in &self.atoms {
            match out.last_mut() {
                Some((x, p)) if *x == a.x => *p += a.p,
                _ => out.push((a.x, a.p)),
            }
        }
        MarginalDistribution { atoms: out }
    }

    fn conditional(&self, label: u8) -> Option<MarginalDistribution> {
        let mass: f64 = self.atoms.iter().filter(|a| a.y == label).map(|a| a.p).sum();
        if mass <= 0.0 {
            return None;
        }
        Some(MarginalDistribution {
            atoms: self
                .atoms
                .iter()
                .filter(|a| a.y == label)
                .map(|a| (a.x, a.p / mass))
                .collect(),
        })
    }

    /// `l(x) = 1` for points carrying only positive mass. `None` when some
    /// point carries mass under both labels.
    pub fn deterministic_labels(&self) -> Option<Vec<(usize, u8)>> {
        let mut out: Vec<(usize, u8)> = Vec::new();
        for a in self.atoms.iter().filter(|a| a.p > 0.0) {
            match out.last() {
                Some(&(x, y)) if x == a.x => {
                    if y != a.y {
                        return None;
                    }
                }
                _ => out.push((a.x, a.y)),
            }
        }
        Some(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// A distribution over `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalDistribution {
    atoms: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct MarginalAtom {
    x: usize,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct MarginalRepr {
    atoms: Vec<MarginalAtom>,
}

impl Serialize for MarginalDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MarginalRepr {
            atoms: self.atoms.iter().map(|&(x, p)| MarginalAtom { x, p }).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MarginalDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MarginalRepr::deserialize(d)?;
        Self::new(r.atoms.into_iter().map(|a| (a.x, a.p)).collect()).map_err(serde::de::Error::custom)
    }
}

impl MarginalDistribution {
    pub fn new(mut atoms: Vec<(usize, f64)>) -> Result<Self> {
        atoms.sort_by_key(|a| a.0);
        if let Some(w) = atoms.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(LabError::InvalidDistribution(format!(
                "duplicate point {}",
                w[0].0
            )));
        }
        check_mass(atoms.iter().map(|a| a.1))?;
        Ok(Self { atoms })
    }

    pub fn point_mass(x: usize) -> Self {
        Self { atoms: vec![(x, 1.0)] }
    }

    pub fn uniform(points: &[usize]) -> Result<Self> {
        if points.is_empty() {
            return Err(LabError::InvalidDistribution("uniform over no points".into()));
        }
        let p = 1.0 / points.len() as f64;
        Self::new(points.iter().map(|&x| (x, p)).collect())
    }

    pub fn atoms(&self) -> &[(usize, f64)] {
        &self.atoms
    }

    pub fn prob(&self, x: usize) -> f64 {
        self.atoms
            .binary_search_by_key(&x, |a| a.0)
            .map(|i| self.atoms[i].1)
            .unwrap_or(0.0)
    }

    pub fn mass(&self, set: &Concept) -> f64 {
        self.atoms
            .iter()
            .filter(|a| set.contains(a.0))
            .map(|a| a.1)
            .sum()
    }

    pub fn support(&self) -> Vec<usize> {
        self.atoms.iter().filter(|a| a.1 > 0.0).map(|a| a.0).collect()
    }

    pub fn support_bound(&self) -> usize {
        self.atoms.iter().map(|a| a.0 + 1).max().unwrap_or(0)
    }

    /// `w·self + (1-w)·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        let mut atoms: Vec<(usize, f64)> = self.atoms.iter().map(|&(x, p)| (x, w * p)).collect();
        for &(x, p) in &other.atoms {
            match atoms.iter_mut().find(|a| a.0 == x) {
                Some(a) => a.1 += (1.0 - w) * p,
                None => atoms.push((x, (1.0 - w) * p)),
            }
        }
        Self::new(atoms)
    }
}

/// Class prior together with the conditional and marginal views of a
/// labeled distribution.
#[derive(Clone, Debug)]
pub struct Views {
    pub alpha: f64,
    pub marginal: MarginalDistribution,
    positive: Option<MarginalDistribution>,
    negative: Option<MarginalDistribution>,
}

impl Views {
    /// `D+`. Fails when the class prior is zero.
    pub fn positive(&self) -> Result<&MarginalDistribution> {
        self.positive
            .as_ref()
            .ok_or(LabError::ConditioningOnNull("D+ with alpha = 0"))
    }

    /// `D-`. Fails when the class prior is one.
    pub fn negative(&self) -> Result<&MarginalDistribution> {
        self.negative
            .as_ref()
            .ok_or(LabError::ConditioningOnNull("D- with alpha = 1"))
    }
}

pub fn derive_views(d: &LabeledDiscreteDistribution) -> Views {
    Views {
        alpha: d.alpha(),
        marginal: d.marginal(),
        positive: d.conditional(1),
        negative: d.conditional(0),
    }
}

/// Misclassified mass split by true label.
///
/// `err⁺` is `Pr_{D+}[f(x) ≠ 1]` and `err⁻` is `Pr_{D-}[f(x) ≠ 0]`; the
/// former is the quantity usually written `err⁺` even though it measures
/// misses on positives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics {
    pub err: f64,
    positive_mass: f64,
    negative_mass: f64,
    missed_positive: f64,
    false_alarm: f64,
}

impl ErrorMetrics {
    pub fn err_plus(&self) -> Result<f64> {
        if self.positive_mass <= 0.0 {
            return Err(LabError::ConditioningOnNull("err+ with alpha = 0"));
        }
        Ok(self.missed_positive / self.positive_mass)
    }

    pub fn err_minus(&self) -> Result<f64> {
        if self.negative_mass <= 0.0 {
            return Err(LabError::ConditioningOnNull("err- with alpha = 1"));
        }
        Ok(self.false_alarm / self.negative_mass)
    }

    pub fn alpha(&self) -> f64 {
        self.positive_mass
    }
}

pub fn error_metrics(d: &LabeledDiscreteDistribution, f: impl Fn(usize) -> bool) -> ErrorMetrics {
    let mut m = ErrorMetrics {
        err: 0.0,
        positive_mass: 0.0,
        negative_mass: 0.0,
        missed_positive: 0.0,
        false_alarm: 0.0,
    };
    for a in d.atoms() {
        let predicted = f(a.x);
        if a.y == 1 {
            m.positive_mass += a.p;
            if !predicted {
                m.missed_positive += a.p;
            }
        } else {
            m.negative_mass += a.p;
            if predicted {
                m.false_alarm += a.p;
            }
        }
    }
    m.err = m.missed_positive + m.false_alarm;
    m
}

/// `err_D(f)`.
pub fn error(d: &LabeledDiscreteDistribution, f: impl Fn(usize) -> bool) -> f64 {
    d.atoms()
        .iter()
        .filter(|a| f(a.x) != (a.y == 1))
        // fold from +0.0: an empty f64 sum is -0.0.
        .fold(0.0, |acc, a| acc + a.p)
}

/// Minimum error over a finite class and the first concept attaining it.
pub fn approximation_error(class: &ConceptClass, d: &LabeledDiscreteDistribution) -> (usize, f64) {
    class
        .concepts()
        .iter()
        .enumerate()
        .map(|(i, c)| (i, error(d, |x| c.contains(x))))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceMetrics {
    /// `Pr_{x∼P}[c(x) ≠ 1]` for each concept, in class order.
    pub err_p_one: Vec<f64>,
    /// `min_c err⁺(c) + err_P(c, 1)`.
    pub lambda_p: f64,
}

pub fn source_metrics(
    class: &ConceptClass,
    d: &LabeledDiscreteDistribution,
    p: &MarginalDistribution,
) -> Result<SourceMetrics> {
    let mut err_p_one = Vec::with_capacity(class.len());
    let mut lambda_p = f64::INFINITY;
    for c in class.concepts() {
        let miss: f64 = p
            .atoms()
            .iter()
            .filter(|a| !c.contains(a.0))
            .map(|a| a.1)
            .sum();
        let plus = error_metrics(d, |x| c.contains(x)).err_plus()?;
        lambda_p = lambda_p.min(plus + miss);
        err_p_one.push(miss);
    }
    Ok(SourceMetrics { err_p_one, lambda_p })
}

/// `R_B(Q1, Q2) = inf { Q1(A)/Q2(A) : A ∈ B, Q2(A) ≠ 0 }`.
pub fn weight_ratio(
    family: &[Concept],
    q1: &MarginalDistribution,
    q2: &MarginalDistribution,
) -> Result<f64> {
    family
        .iter()
        .filter_map(|a| {
            let den = q2.mass(a);
            (den > 0.0).then(|| q1.mass(a) / den)
        })
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |m| m.min(r))))
        .ok_or(LabError::UndefinedRatio)
}

/// `d_B(Q1, Q2) = 2 sup_{A∈B} |Q1(A) - Q2(A)|`.
pub fn b_distance(
    family: &[Concept],
    q1: &MarginalDistribution,
    q2: &MarginalDistribution,
) -> Result<f64> {
    if family.is_empty() {
        return Err(LabError::Precondition("B-distance over an empty collection".into()));
    }
    Ok(2.0
        * family
            .iter()
            .map(|a| (q1.mass(a) - q2.mass(a)).abs())
            .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetCheck {
    pub is_net: bool,
    /// Index into the collection of the first heavy set missed by the net.
    pub witness: Option<usize>,
}

/// Does `Domain(net)` hit every `A ∈ family` with `Q(A) ≥ eps`?
///
/// `eps = 0` is accepted and means every member must be hit.
pub fn is_eps_net(
    net: &[usize],
    family: &[Concept],
    q: &MarginalDistribution,
    eps: f64,
) -> Result<NetCheck> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(LabError::Precondition(format!("eps {eps} outside [0, 1]")));
    }
    let witness = family
        .iter()
        .position(|a| q.mass(a) >= eps && !net.iter().any(|&x| a.contains(x)));
    Ok(NetCheck {
        is_net: witness.is_none(),
        witness,
    })
}

/// Every subset of `{0, .., n-1}`.
pub fn all_subsets(n: usize) -> Result<Vec<Concept>> {
    Ok(ConceptClass::powerset(n)?.concepts().to_vec())
}

pub fn singletons(n: usize) -> Vec<Concept> {
    (0..n)
        .map(|x| Concept::from_indices(n, [x]).expect("in range"))
        .collect()
}

/// Inverse-CDF sampler over a fixed probability vector.
#[derive(Clone, Debug)]
pub struct InverseCdf {
    cumulative: Vec<f64>,
}

impl InverseCdf {
    pub fn new(probs: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .into_iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative }
    }

    /// Index of the first atom whose cumulative mass exceeds `u ∈ [0,1)`.
    /// Atoms of zero mass are never returned.
    pub fn index(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        if i < self.cumulative.len() {
            i
        } else {
            // Rounding left the total slightly below u; take the last atom
            // with positive mass.
            let last = self.cumulative.last().copied().unwrap_or(0.0);
            self.cumulative
                .iter()
                .position(|&c| c >= last)
                .unwrap_or(0)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index(rng.random::<f64>())
    }
}

/// An ordered multiset of domain points together with the seed that drew it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub items: Vec<usize>,
    pub seed: u64,
}

impl Sample {
    pub fn domain(&self, n: usize) -> Result<Concept> {
        Concept::from_indices(n, self.items.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub items: Vec<(usize, u8)>,
    pub seed: u64,
}

pub fn sample_marginal<R: Rng + ?Sized>(q: &MarginalDistribution, n: usize, rng: &mut R) -> Vec<usize> {
    let cdf = InverseCdf::new(q.atoms().iter().map(|a| a.1));
    (0..n).map(|_| q.atoms()[cdf.sample(rng)].0).collect()
}

/// `n` i.i.d. draws from `q`, reproducible from `(q, n, seed)`.
pub fn draw(q: &MarginalDistribution, n: usize, seed: u64) -> Sample {
    let mut rng = rng_from_seed(seed);
    Sample {
        items: sample_marginal(q, n, &mut rng),
        seed,
    }
}

pub fn draw_labeled(d: &LabeledDiscreteDistribution, n: usize, seed: u64) -> LabeledSample {
    let mut rng = rng_from_seed(seed);
    let cdf = InverseCdf::new(d.atoms().iter().map(|a| a.p));
    LabeledSample {
        items: (0..n)
            .map(|_| {
                let a = d.atoms()[cdf.sample(&mut rng)];
                (a.x, a.y)
            })
            .collect(),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(t: &[(usize, u8, f64)]) -> LabeledDiscreteDistribution {
        LabeledDiscreteDistribution::from_triples(t).unwrap()
    }

    #[test]
    fn validation() {
        assert!(LabeledDiscreteDistribution::from_triples(&[(0, 1, 0.5)]).is_err());
        assert!(LabeledDiscreteDistribution::from_triples(&[(0, 1, 0.5), (0, 1, 0.5)]).is_err());
        assert!(LabeledDiscreteDistribution::from_triples(&[(0, 2, 1.0)]).is_err());
        assert!(LabeledDiscreteDistribution::from_triples(&[(0, 1, 1.5), (1, 0, -0.5)]).is_err());
        assert!(MarginalDistribution::new(vec![(0, 0.3), (1, 0.7)]).is_ok());
        assert!(MarginalDistribution::new(vec![(0, 0.3), (0, 0.7)]).is_err());
    }

    #[test]
    fn views_point_mass() {
        let v = derive_views(&dist(&[(0, 1, 1.0)]));
        assert_eq!(v.alpha, 1.0);
        assert_eq!(v.positive().unwrap(), &MarginalDistribution::point_mass(0));
        assert!(matches!(v.negative(), Err(LabError::ConditioningOnNull(_))));
    }

    #[test]
    fn views_two_points() {
        let v = derive_views(&dist(&[(0, 1, 0.5), (1, 0, 0.5)]));
        assert_eq!(v.alpha, 0.5);
        assert_eq!(v.positive().unwrap(), &MarginalDistribution::point_mass(0));
        assert_eq!(v.negative().unwrap(), &MarginalDistribution::point_mass(1));
        assert_eq!(v.marginal.atoms(), &[(0, 0.5), (1, 0.5)]);
    }

    #[test]
    fn metrics_true_labels_and_all_ones() {
        let d = dist(&[(0, 1, 0.2), (1, 0, 0.5), (2, 1, 0.3)]);
        let truth = error_metrics(&d, |x| x != 1);
        assert_eq!((truth.err, truth.err_plus().unwrap(), truth.err_minus().unwrap()), (0.0, 0.0, 0.0));

        let ones = error_metrics(&d, |_| true);
        assert!((ones.err - (1.0 - d.alpha())).abs() < 1e-15);
        assert_eq!(ones.err_plus().unwrap(), 0.0);
        assert_eq!(ones.err_minus().unwrap(), 1.0);
    }

    #[test]
    fn metrics_null_conditioning() {
        let d = dist(&[(0, 0, 1.0)]);
        let m = error_metrics(&d, |_| true);
        assert_eq!(m.err, 1.0);
        assert!(m.err_plus().is_err());
    }

    #[test]
    fn source_metric_examples() {
        let c = ConceptClass::from_index_lists(2, &[vec![0]]).unwrap();
        let d = dist(&[(0, 1, 1.0)]);
        let s = source_metrics(&c, &d, &MarginalDistribution::point_mass(1)).unwrap();
        assert_eq!(s.err_p_one, vec![1.0]);

        let c = ConceptClass::from_index_lists(2, &[vec![0], vec![0, 1]]).unwrap();
        let d = dist(&[(0, 1, 0.5), (1, 1, 0.5)]);
        let s = source_metrics(&c, &d, &MarginalDistribution::point_mass(0)).unwrap();
        assert_eq!(s.lambda_p, 0.0);
    }

    #[test]
    fn weight_ratio_examples() {
        let u = MarginalDistribution::uniform(&[0, 1]).unwrap();
        let subsets = all_subsets(2).unwrap();
        assert_eq!(weight_ratio(&subsets, &u, &u).unwrap(), 1.0);
        let delta = MarginalDistribution::point_mass(0);
        assert_eq!(weight_ratio(&singletons(2), &delta, &u).unwrap(), 0.0);
        let only_empty = vec![Concept::empty(2)];
        assert!(matches!(weight_ratio(&only_empty, &u, &u), Err(LabError::UndefinedRatio)));
    }

    #[test]
    fn b_distance_examples() {
        let s = all_subsets(2).unwrap();
        let d0 = MarginalDistribution::point_mass(0);
        let d1 = MarginalDistribution::point_mass(1);
        assert_eq!(b_distance(&s, &d0, &d0).unwrap(), 0.0);
        assert_eq!(b_distance(&s, &d0, &d1).unwrap(), 2.0);
        let u = MarginalDistribution::uniform(&[0, 1]).unwrap();
        let skew = MarginalDistribution::new(vec![(0, 0.75), (1, 0.25)]).unwrap();
        assert_eq!(b_distance(&singletons(2), &u, &skew).unwrap(), 0.5);
        assert!(b_distance(&[], &u, &skew).is_err());
    }

    #[test]
    fn eps_net_examples() {
        let q = MarginalDistribution::uniform(&[0, 1, 2]).unwrap();
        let fam = all_subsets(3).unwrap();
        assert!(is_eps_net(&[0, 1, 2], &fam, &q, 0.01).unwrap().is_net);
        let miss = is_eps_net(&[], &fam, &q, 0.5).unwrap();
        assert!(!miss.is_net);
        let w = &fam[miss.witness.unwrap()];
        assert!(q.mass(w) >= 0.5);
        assert!(is_eps_net(&[], &fam, &q, 1.5).is_err());
    }

    #[test]
    fn draw_examples() {
        let u = MarginalDistribution::uniform(&[0, 1]).unwrap();
        assert!(draw(&u, 0, 1).is_empty());
        assert_eq!(draw(&MarginalDistribution::point_mass(3), 5, 9).items, vec![3; 5]);

        let s = draw(&u, 100_000, 42);
        let zeros = s.items.iter().filter(|&&x| x == 0).count() as f64 / 1e5;
        assert!((zeros - 0.5).abs() <= 0.01, "{zeros}");
        assert_eq!(s, draw(&u, 100_000, 42));
    }

    #[test]
    fn zero_mass_atoms_never_drawn() {
        let q = MarginalDistribution::new(vec![(0, 0.0), (1, 1.0), (2, 0.0)]).unwrap();
        assert!(draw(&q, 1000, 5).items.iter().all(|&x| x == 1));
        let cdf = InverseCdf::new([0.5, 0.5 - 1e-13]);
        assert_eq!(cdf.index(0.999_999_999_999_99), 1);
    }

    #[test]
    fn labeled_draw_follows_atoms() {
        let d = dist(&[(0, 1, 0.25), (0, 0, 0.75)]);
        let s = draw_labeled(&d, 20_000, 3);
        let pos = s.items.iter().filter(|a| a.1 == 1).count() as f64 / 2e4;
        assert!((pos - 0.25).abs() < 0.02);
    }
}
