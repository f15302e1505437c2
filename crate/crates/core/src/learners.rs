//! PU learners: the positive empirical risk minimizer over a finite class,
//! the Lagrangian-loss minimizer, the bounding-box PERM with its grid filter,
//! and the frequency learner for the weighted die.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::concept::{Concept, ConceptClass};
use crate::error::{LabError, Result};
use crate::geometry::{AxisBox, Geometry, GridPartition};

/// Relative tolerance under which two Lagrangian losses count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Hypothesis {
    Concept { index: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Const { value: u8 },
}

impl Hypothesis {
    pub const ZERO: Hypothesis = Hypothesis::Const { value: 0 };
    pub const ONE: Hypothesis = Hypothesis::Const { value: 1 };

    pub fn concept_index(&self) -> Option<usize> {
        match self {
            Hypothesis::Concept { index } => Some(*index),
            _ => None,
        }
    }

    pub fn from_box(b: AxisBox) -> Self {
        Hypothesis::Box { lo: b.lo, hi: b.hi }
    }

    /// The set of points of an `n`-point domain labeled 1.
    pub fn realize(
        &self,
        n: usize,
        class: Option<&ConceptClass>,
        geometry: Option<&Geometry>,
    ) -> Result<Concept> {
        match self {
            Hypothesis::Const { value: 0 } => Ok(Concept::empty(n)),
            Hypothesis::Const { value: 1 } => Ok(Concept::full(n)),
            Hypothesis::Const { value } => Err(LabError::Domain(format!(
                "constant hypothesis with value {value}"
            ))),
            Hypothesis::Concept { index } => {
                let class = class.ok_or_else(|| {
                    LabError::Usage("concept hypothesis needs a concept class".into())
                })?;
                class.get(*index).cloned().ok_or_else(|| {
                    LabError::Domain(format!(
                        "concept index {index} out of range for a class of {}",
                        class.len()
                    ))
                })
            }
            Hypothesis::Box { lo, hi } => {
                let g = geometry.ok_or_else(|| {
                    LabError::Usage("box hypothesis needs point coordinates".into())
                })?;
                let b = AxisBox::new(lo.clone(), hi.clone())?;
                if b.dim() != g.dim {
                    return Err(LabError::Domain(format!(
                        "box of dimension {} on a {}-dimensional instance",
                        b.dim(),
                        g.dim
                    )));
                }
                Ok(g.box_concept(&b))
            }
        }
    }
}

fn histogram(n: usize, sample: &[usize]) -> Result<Vec<u64>> {
    let mut h = vec![0u64; n];
    for &x in sample {
        *h.get_mut(x).ok_or_else(|| {
            LabError::Domain(format!("sample point {x} outside domain of size {n}"))
        })? += 1;
    }
    Ok(h)
}

fn hits(c: &Concept, counts: &[u64]) -> u64 {
    c.iter().map(|x| counts[x]).sum()
}

/// Among concepts containing every positive example, the one with the
/// fewest unlabeled hits (counted with multiplicity). Ties go to the
/// earliest concept in class order.
pub fn perm_finite(class: &ConceptClass, s_p: &[usize], s_u: &[usize]) -> Result<Hypothesis> {
    let n = class.n();
    let positives = Concept::from_indices(n, s_p.iter().copied())?;
    let counts = histogram(n, s_u)?;
    class
        .concepts()
        .iter()
        .enumerate()
        .filter(|(_, c)| positives.is_subset_of(c))
        .min_by_key(|&(i, c)| (hits(c, &counts), i))
        .map(|(index, _)| Hypothesis::Concept { index })
        .ok_or(LabError::Infeasible)
}

/// Lagrangian loss `|c ∩ S_U|/a + γ·(b - |c ∩ S_P|)/b` of every concept.
pub fn lagrangian_losses(
    class: &ConceptClass,
    s_p: &[usize],
    s_u: &[usize],
    gamma: f64,
) -> Result<Vec<f64>> {
    if s_p.is_empty() || s_u.is_empty() {
        return Err(LabError::Precondition(
            "Lagrangian loss needs nonempty positive and unlabeled samples".into(),
        ));
    }
    if gamma.is_nan() || gamma < 0.0 {
        return Err(LabError::Precondition(format!("gamma {gamma} must be non-negative")));
    }
    let n = class.n();
    let pos = histogram(n, s_p)?;
    let unl = histogram(n, s_u)?;
    let (a, b) = (s_u.len() as f64, s_p.len() as f64);
    Ok(class
        .concepts()
        .iter()
        .map(|c| hits(c, &unl) as f64 / a + gamma * (b - hits(c, &pos) as f64) / b)
        .collect())
}

/// First index whose loss is within [`TIE_TOLERANCE`] (relative) of the
/// minimum.
pub fn argmin_with_ties(losses: &[f64]) -> Option<usize> {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    let slack = TIE_TOLERANCE * min.abs();
    losses.iter().position(|&l| l <= min + slack)
}

pub fn lagrangian_finite(
    class: &ConceptClass,
    s_p: &[usize],
    s_u: &[usize],
    gamma: f64,
) -> Result<Hypothesis> {
    let losses = lagrangian_losses(class, s_p, s_u, gamma)?;
    argmin_with_ties(&losses)
        .map(|index| Hypothesis::Concept { index })
        .ok_or(LabError::Precondition("empty concept class".into()))
}

fn check_dims(points: &[&[f64]], dim: usize) -> Result<()> {
    match points.iter().find(|p| p.len() != dim) {
        Some(p) => Err(LabError::Domain(format!(
            "point of dimension {} in a {dim}-dimensional sample",
            p.len()
        ))),
        None => Ok(()),
    }
}

/// The bounding box of `S'`: contained in every box consistent with `S'`,
/// so it minimizes unlabeled hits. An empty `S'` gives the constant 0.
pub fn perm_box(s_prime: &[&[f64]], s_u: &[&[f64]], dim: usize) -> Result<Hypothesis> {
    check_dims(s_prime, dim)?;
    check_dims(s_u, dim)?;
    Ok(AxisBox::bounding(s_prime).map_or(Hypothesis::ZERO, Hypothesis::from_box))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDiagnostics {
    /// Grid cells containing at least one unlabeled point.
    pub boxes_hit: usize,
    /// Positive examples dropped because their cell holds no unlabeled point.
    pub filtered_count: usize,
}

/// Drops positives lying in grid cells that no unlabeled point reaches,
/// then returns the bounding-box PERM of what is left.
pub fn algorithm1(
    s_p: &[&[f64]],
    s_u: &[&[f64]],
    gamma: f64,
    dim: usize,
) -> Result<(Hypothesis, FilterDiagnostics)> {
    check_dims(s_p, dim)?;
    check_dims(s_u, dim)?;
    let grid = GridPartition::for_margin(dim, gamma)?;
    let hit: BTreeSet<usize> = s_u.iter().map(|p| grid.cell_of(p)).collect();
    let kept: Vec<&[f64]> = s_p
        .iter()
        .copied()
        .filter(|p| hit.contains(&grid.cell_of(p)))
        .collect();
    let diagnostics = FilterDiagnostics {
        boxes_hit: hit.len(),
        filtered_count: s_p.len() - kept.len(),
    };
    Ok((perm_box(&kept, s_u, dim)?, diagnostics))
}

/// Predicts face `j` (1-based) when its count strictly exceeds `m / k`.
pub fn die_learner_l0(rolls: &[usize], k: usize) -> Result<Vec<u8>> {
    if k < 2 {
        return Err(LabError::Precondition(format!("die needs k >= 2 faces, got {k}")));
    }
    if rolls.is_empty() {
        return Err(LabError::Precondition("no rolls".into()));
    }
    let mut counts = vec![0usize; k];
    for &r in rolls {
        if r == 0 || r > k {
            return Err(LabError::Domain(format!("face {r} outside 1..={k}")));
        }
        counts[r - 1] += 1;
    }
    let m = rolls.len();
    Ok(counts.iter().map(|&c| u8::from(c * k > m)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(n: usize, lists: &[&[usize]]) -> ConceptClass {
        let lists: Vec<Vec<usize>> = lists.iter().map(|l| l.to_vec()).collect();
        ConceptClass::from_index_lists(n, &lists).unwrap()
    }

    fn chosen(c: &ConceptClass, h: &Hypothesis) -> Vec<usize> {
        c.get(h.concept_index().unwrap()).unwrap().to_vec()
    }

    #[test]
    fn perm_examples() {
        let full = class(3, &[&[0, 1, 2]]);
        assert_eq!(chosen(&full, &perm_finite(&full, &[1], &[0, 2]).unwrap()), vec![0, 1, 2]);

        let chain = class(3, &[&[0], &[0, 1], &[0, 1, 2]]);
        assert_eq!(chosen(&chain, &perm_finite(&chain, &[0], &[1, 1, 2]).unwrap()), vec![0]);

        let two = class(2, &[&[0], &[1]]);
        assert_eq!(chosen(&two, &perm_finite(&two, &[], &[]).unwrap()), vec![0]);
    }

    #[test]
    fn perm_infeasible() {
        let c = class(3, &[&[0], &[1]]);
        assert!(matches!(perm_finite(&c, &[0, 1], &[]), Err(LabError::Infeasible)));
        assert!(perm_finite(&c, &[5], &[]).is_err());
    }

    #[test]
    fn lagrangian_examples() {
        let c = class(2, &[&[], &[0], &[0, 1]]);
        let losses = lagrangian_losses(&c, &[0, 1], &[0, 1], 0.7).unwrap();
        assert!((losses[0] - 0.7).abs() < 1e-15);
        assert!((losses[2] - 1.0).abs() < 1e-15);

        let c = class(2, &[&[0], &[0, 1]]);
        let h = lagrangian_finite(&c, &[0, 1], &[0, 1], 1.0).unwrap();
        assert_eq!(chosen(&c, &h), vec![0]);

        assert!(lagrangian_finite(&c, &[], &[0], 1.0).is_err());
        assert!(lagrangian_finite(&c, &[0], &[], 1.0).is_err());
    }

    #[test]
    fn lagrangian_zero_gamma_ignores_positives() {
        let c = class(3, &[&[0], &[1], &[0, 1]]);
        let h = lagrangian_finite(&c, &[0, 0, 0], &[0, 0, 2], 0.0).unwrap();
        assert_eq!(chosen(&c, &h), vec![1]);
    }

    #[test]
    fn ties_are_relative() {
        assert_eq!(argmin_with_ties(&[1.0 + 1e-14, 1.0]), Some(0));
        assert_eq!(argmin_with_ties(&[1.0 + 1e-9, 1.0]), Some(1));
        assert_eq!(argmin_with_ties(&[]), None);
    }

    #[test]
    fn perm_box_examples() {
        let h = perm_box(&[&[0.2, 0.3], &[0.5, 0.6]], &[], 2).unwrap();
        assert_eq!(h, Hypothesis::Box { lo: vec![0.2, 0.3], hi: vec![0.5, 0.6] });
        assert_eq!(perm_box(&[], &[], 2).unwrap(), Hypothesis::ZERO);
        assert!(perm_box(&[&[0.2]], &[], 2).is_err());

        let h = perm_box(&[&[0.4, 0.4]], &[], 2).unwrap();
        let b = match h {
            Hypothesis::Box { lo, hi } => AxisBox::new(lo, hi).unwrap(),
            _ => unreachable!(),
        };
        let su: [&[f64]; 3] = [&[0.4, 0.4], &[0.1, 0.4], &[0.4, 0.41]];
        assert_eq!(su.iter().filter(|p| b.contains(p)).count(), 1);
    }

    #[test]
    fn algorithm1_examples() {
        let (h, diag) = algorithm1(&[&[0.6], &[0.2]], &[&[0.1]], 0.5, 1).unwrap();
        assert_eq!(h, Hypothesis::Box { lo: vec![0.2], hi: vec![0.2] });
        assert_eq!(diag, FilterDiagnostics { boxes_hit: 1, filtered_count: 1 });

        let (h, _) = algorithm1(&[], &[&[0.1]], 0.5, 1).unwrap();
        assert_eq!(h, Hypothesis::ZERO);

        let (h, diag) = algorithm1(&[&[0.1], &[0.7]], &[&[0.2], &[0.9]], 0.5, 1).unwrap();
        assert_eq!(h, Hypothesis::Box { lo: vec![0.1], hi: vec![0.7] });
        assert_eq!(diag.filtered_count, 0);
    }

    #[test]
    fn algorithm1_everything_filtered() {
        let (h, diag) = algorithm1(&[&[0.9]], &[&[0.1]], 0.5, 1).unwrap();
        assert_eq!(h, Hypothesis::ZERO);
        assert_eq!(diag.filtered_count, 1);
    }

    #[test]
    fn l0_examples() {
        assert_eq!(die_learner_l0(&[1, 1, 1, 1], 2).unwrap(), vec![1, 0]);
        assert_eq!(die_learner_l0(&[1, 2, 3], 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(die_learner_l0(&[1, 1, 2, 3], 4).unwrap(), vec![1, 0, 0, 0]);
        assert!(die_learner_l0(&[0], 4).is_err());
        assert!(die_learner_l0(&[5], 4).is_err());
        assert!(die_learner_l0(&[], 4).is_err());
    }

    #[test]
    fn hypothesis_json() {
        let j = |h: &Hypothesis| serde_json::to_string(h).unwrap();
        assert_eq!(j(&Hypothesis::Concept { index: 3 }), r#"{"kind":"concept","index":3}"#);
        assert_eq!(
            j(&Hypothesis::Box { lo: vec![0.0], hi: vec![0.5] }),
            r#"{"kind":"box","lo":[0.0],"hi":[0.5]}"#
        );
        assert_eq!(j(&Hypothesis::ONE), r#"{"kind":"const","value":1}"#);
        let back: Hypothesis = serde_json::from_str(r#"{"kind":"const","value":0}"#).unwrap();
        assert_eq!(back, Hypothesis::ZERO);
    }

    #[test]
    fn realize() {
        let c = class(3, &[&[1]]);
        let g = Geometry::new(1, vec![vec![0.1], vec![0.5], vec![0.9]], 0.1, 0.0).unwrap();
        assert_eq!(Hypothesis::ONE.realize(3, None, None).unwrap().len(), 3);
        assert_eq!(Hypothesis::Concept { index: 0 }.realize(3, Some(&c), None).unwrap().to_vec(), vec![1]);
        assert!(Hypothesis::Concept { index: 1 }.realize(3, Some(&c), None).is_err());
        let b = Hypothesis::Box { lo: vec![0.4], hi: vec![1.0] };
        assert_eq!(b.realize(3, None, Some(&g)).unwrap().to_vec(), vec![1, 2]);
        assert!(b.realize(3, None, None).is_err());
    }
}
