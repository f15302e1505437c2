//! Embedding of a finite domain into `[0,1]^k`, axis-aligned boxes and the
//! grid used by the box-filter learner.

use serde::{Deserialize, Serialize};

use crate::concept::Concept;
use crate::dist::LabeledDiscreteDistribution;
use crate::error::{LabError, Result};

/// A closed axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(LabError::Domain(format!(
                "box corners have dimensions {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(LabError::Domain("box has lo > hi in some coordinate".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    /// Smallest box containing every point; `None` for no points.
    pub fn bounding(points: &[&[f64]]) -> Option<Self> {
        let first = points.first()?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in &points[1..] {
            for (j, &v) in p.iter().enumerate() {
                lo[j] = lo[j].min(v);
                hi[j] = hi[j].max(v);
            }
        }
        Some(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| l <= v && v <= h)
    }
}

/// `cells` equal half-open intervals per axis; the last one is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridPartition {
    pub dim: usize,
    pub cells: usize,
}

impl GridPartition {
    /// Cells of side at most `gamma / sqrt(dim)`, i.e. `⌈√dim / γ⌉` per axis.
    pub fn for_margin(dim: usize, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(LabError::Precondition(format!("gamma {gamma} outside (0, 1]")));
        }
        if dim == 0 {
            return Err(LabError::Domain("dimension must be positive".into()));
        }
        let raw = (dim as f64).sqrt() / gamma;
        // Absorb rounding like 2.0000000000000004 before taking the ceiling.
        let cells = if (raw - raw.round()).abs() < 1e-9 {
            raw.round()
        } else {
            raw.ceil()
        } as usize;
        Ok(Self {
            dim,
            cells: cells.max(1),
        })
    }

    fn axis_index(&self, v: f64) -> usize {
        ((v * self.cells as f64).floor().max(0.0) as usize).min(self.cells - 1)
    }

    /// Row-major index of the cell containing `p`.
    pub fn cell_of(&self, p: &[f64]) -> usize {
        p.iter()
            .fold(0, |acc, &v| acc * self.cells + self.axis_index(v))
    }

    pub fn cell_count(&self) -> usize {
        self.cells.pow(self.dim as u32)
    }
}

/// Coordinates for every domain point plus the declared margin and prior
/// bound of the instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub gamma: f64,
    pub pi: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl Geometry {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, gamma: f64, pi: f64) -> Result<Self> {
        if dim == 0 {
            return Err(LabError::Domain("dimension must be positive".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(LabError::Domain(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(LabError::Domain(format!("point {i} lies outside [0,1]^{dim}")));
            }
        }
        Ok(Self {
            dim,
            points,
            gamma,
            pi,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn coords(&self, x: usize) -> &[f64] {
        &self.points[x]
    }

    pub fn box_concept(&self, b: &AxisBox) -> Concept {
        let mut c = Concept::empty(self.n());
        for (i, p) in self.points.iter().enumerate() {
            if b.contains(p) {
                c.insert(i);
            }
        }
        c
    }

    /// Checks deterministic labels, the margin certificate (oppositely
    /// labeled support points more than `2γ` apart) and the prior bound.
    pub fn validate(&self, d: &LabeledDiscreteDistribution) -> Result<()> {
        if d.support_bound() > self.n() {
            return Err(LabError::Domain("distribution has atoms without coordinates".into()));
        }
        let labels = d.deterministic_labels().ok_or_else(|| {
            LabError::Parameter("geometric instances need deterministic labels".into())
        })?;
        for (i, &(x, y)) in labels.iter().enumerate() {
            for &(x2, y2) in &labels[i + 1..] {
                if y != y2 && distance(self.coords(x), self.coords(x2)) <= 2.0 * self.gamma {
                    return Err(LabError::Parameter(format!(
                        "points {x} and {x2} have opposite labels within 2*gamma"
                    )));
                }
            }
        }
        if d.alpha() < self.pi - 1e-12 {
            return Err(LabError::Parameter(format!(
                "positive mass {} is below the declared bound {}",
                d.alpha(),
                self.pi
            )));
        }
        Ok(())
    }

    /// Every distinct point set cut out by a box, the empty set included.
    /// Boxes with corners at point coordinates realize all of them.
    pub fn box_traces(&self) -> Vec<Concept> {
        let mut axes: Vec<Vec<f64>> = (0..self.dim)
            .map(|j| {
                let mut v: Vec<f64> = self.points.iter().map(|p| p[j]).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            })
            .collect();
        let mut traces = std::collections::BTreeSet::new();
        traces.insert(Concept::empty(self.n()));
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        self.enumerate_boxes(&mut axes, 0, &mut lo, &mut hi, &mut traces);
        traces.into_iter().collect()
    }

    fn enumerate_boxes(
        &self,
        axes: &mut [Vec<f64>],
        j: usize,
        lo: &mut Vec<f64>,
        hi: &mut Vec<f64>,
        out: &mut std::collections::BTreeSet<Concept>,
    ) {
        if j == self.dim {
            out.insert(self.box_concept(&AxisBox {
                lo: lo.clone(),
                hi: hi.clone(),
            }));
            return;
        }
        let vals = axes[j].clone();
        for (a, &l) in vals.iter().enumerate() {
            for &h in &vals[a..] {
                lo[j] = l;
                hi[j] = h;
                self.enumerate_boxes(axes, j + 1, lo, hi, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cells() {
        let g = GridPartition::for_margin(1, 0.5).unwrap();
        assert_eq!(g.cells, 2);
        assert_eq!(g.cell_of(&[0.49]), 0);
        assert_eq!(g.cell_of(&[0.5]), 1);
        assert_eq!(g.cell_of(&[1.0]), 1);
        assert_eq!(GridPartition::for_margin(2, 0.25).unwrap().cells, 6);
        assert_eq!(GridPartition::for_margin(4, 0.2).unwrap().cells, 10);
        assert!(GridPartition::for_margin(2, 0.0).is_err());
    }

    #[test]
    fn row_major_cells() {
        let g = GridPartition { dim: 2, cells: 3 };
        assert_eq!(g.cell_of(&[0.0, 0.0]), 0);
        assert_eq!(g.cell_of(&[0.0, 0.5]), 1);
        assert_eq!(g.cell_of(&[0.5, 0.0]), 3);
        assert_eq!(g.cell_of(&[1.0, 1.0]), 8);
        assert_eq!(g.cell_count(), 9);
    }

    #[test]
    fn bounding_box() {
        let b = AxisBox::bounding(&[&[0.2, 0.3], &[0.5, 0.6]]).unwrap();
        assert_eq!(b, AxisBox::new(vec![0.2, 0.3], vec![0.5, 0.6]).unwrap());
        assert!(b.contains(&[0.2, 0.6]));
        assert!(!b.contains(&[0.1, 0.4]));
        assert!(AxisBox::bounding(&[]).is_none());
    }

    #[test]
    fn margin_validation() {
        let d = LabeledDiscreteDistribution::from_triples(&[(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
        let far = Geometry::new(1, vec![vec![0.0], vec![1.0]], 0.25, 0.5).unwrap();
        assert!(far.validate(&d).is_ok());
        let near = Geometry::new(1, vec![vec![0.0], vec![0.4]], 0.25, 0.5).unwrap();
        assert!(near.validate(&d).is_err());
        let greedy = Geometry::new(1, vec![vec![0.0], vec![1.0]], 0.25, 0.6).unwrap();
        assert!(greedy.validate(&d).is_err());
        assert!(Geometry::new(1, vec![vec![1.5]], 0.25, 0.5).is_err());
    }

    #[test]
    fn traces_on_a_line() {
        let g = Geometry::new(1, vec![vec![0.1], vec![0.5], vec![0.9]], 0.1, 0.0).unwrap();
        // Intervals of 3 ordered points: empty, 3 singletons, 2 pairs, all.
        assert_eq!(g.box_traces().len(), 7);
    }
}
