//! Generators for the hard distribution families used in the lower-bound
//! constructions, each with exact closed forms for its key quantities.

use std::collections::BTreeSet;

use num_rational::Rational64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::concept::{Concept, ConceptClass};
use crate::dist::{
    approximation_error, derive_views, error, weight_ratio, LabeledAtom,
    LabeledDiscreteDistribution, MarginalDistribution, MASS_TOLERANCE,
};
use crate::error::{LabError, Result};
use crate::geometry::Geometry;
use crate::rng::{rng_from_seed, LabRng};

/// A float together with its exact rational value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exact {
    pub value: f64,
    pub exact: String,
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl From<Rational64> for Exact {
    fn from(r: Rational64) -> Self {
        Self {
            value: to_f64(r),
            exact: r.to_string(),
        }
    }
}

/// Exact rational for a user-supplied parameter such as `0.3`.
pub fn rational(x: f64, name: &str) -> Result<Rational64> {
    Rational64::approximate_float(x)
        .filter(|r| (to_f64(*r) - x).abs() <= 1e-15)
        .ok_or_else(|| LabError::Parameter(format!("{name} = {x} has no small exact rational form")))
}

fn open_unit(x: f64, name: &str) -> Result<Rational64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(LabError::Parameter(format!("{name} = {x} must lie in (0, 1)")));
    }
    rational(x, name)
}

fn ri(n: usize) -> Rational64 {
    Rational64::from_integer(n as i64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedForms {
    pub alpha: Exact,
    pub approx_error: Exact,
    pub total_mass: Exact,
    /// `R(P, D+)` over all subsets of the domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_ratio: Option<Exact>,
    /// Per-point cost of disagreeing with `optimal`: the excess risk of any
    /// hypothesis is the sum of the coefficients where it disagrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excess_coefficients: Option<Vec<Exact>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimal: Option<Vec<usize>>,
}

/// A pair `(P, D)` with the class it was built against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuInstance {
    pub family: String,
    pub params: Value,
    #[serde(rename = "D")]
    pub d: LabeledDiscreteDistribution,
    #[serde(rename = "P")]
    pub p: MarginalDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<ConceptClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    pub closed_forms: ClosedForms,
}

/// One declared closed form against its value recomputed from the atoms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FormCheck {
    pub name: String,
    pub declared: f64,
    pub recomputed: f64,
}

impl FormCheck {
    pub fn agrees(&self) -> bool {
        (self.declared - self.recomputed).abs() <= 1e-12
    }
}

impl PuInstance {
    /// Size of the domain.
    pub fn n(&self) -> usize {
        let declared = self
            .class
            .as_ref()
            .map(|c| c.n())
            .or(self.geometry.as_ref().map(|g| g.n()))
            .unwrap_or(0);
        declared
            .max(self.d.support_bound())
            .max(self.p.support_bound())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(s)?;
        if let Some(g) = &inst.geometry {
            if g.n() < inst.d.support_bound().max(inst.p.support_bound()) {
                return Err(LabError::Domain("atoms without coordinates".into()));
            }
        }
        if let Some(c) = &inst.class {
            if c.n() < inst.d.support_bound().max(inst.p.support_bound()) {
                return Err(LabError::Domain("atoms outside the class domain".into()));
            }
        }
        Ok(inst)
    }

    /// The hypotheses the instance is scored against: the class itself, or
    /// every set cut out by an axis-aligned box.
    pub fn comparison_sets(&self) -> Result<Vec<Concept>> {
        match (&self.class, &self.geometry) {
            (Some(c), _) => Ok(c.concepts().to_vec()),
            (None, Some(g)) => Ok(g.box_traces()),
            (None, None) => Err(LabError::Usage(
                "instance has neither a concept class nor coordinates".into(),
            )),
        }
    }

    pub fn approx_error(&self) -> Result<f64> {
        let sets = self.comparison_sets()?;
        Ok(sets
            .iter()
            .map(|c| error(&self.d, |x| c.contains(x)))
            .fold(f64::INFINITY, f64::min))
    }

    /// Recomputes every closed form from the atoms.
    pub fn check_closed_forms(&self) -> Result<Vec<FormCheck>> {
        let cf = &self.closed_forms;
        let views = derive_views(&self.d);
        let mut out = vec![
            FormCheck {
                name: "alpha".into(),
                declared: cf.alpha.value,
                recomputed: views.alpha,
            },
            FormCheck {
                name: "approx_error".into(),
                declared: cf.approx_error.value,
                recomputed: self.approx_error()?,
            },
            FormCheck {
                name: "total_mass".into(),
                declared: cf.total_mass.value,
                recomputed: self.d.atoms().iter().map(|a| a.p).sum(),
            },
            FormCheck {
                name: "P_total_mass".into(),
                declared: 1.0,
                recomputed: self.p.atoms().iter().map(|a| a.1).sum(),
            },
        ];
        if let Some(w) = &cf.weight_ratio {
            let support: Vec<usize> = (0..self.n()).collect();
            let sets = subsets_of(&support, self.n())?;
            out.push(FormCheck {
                name: "weight_ratio".into(),
                declared: w.value,
                recomputed: weight_ratio(&sets, &self.p, views.positive()?)?,
            });
        }
        if let (Some(coef), Some(opt)) = (&cf.excess_coefficients, &cf.optimal) {
            let n = self.n();
            let optimal = Concept::from_indices(n, opt.iter().copied())?;
            let best = error(&self.d, |x| optimal.contains(x));
            out.push(FormCheck {
                name: "optimal_error".into(),
                declared: cf.approx_error.value,
                recomputed: best,
            });
            for (x, c) in coef.iter().enumerate().take(n) {
                let mut flipped = optimal.clone();
                if flipped.contains(x) {
                    flipped.remove(x);
                } else {
                    flipped.insert(x);
                }
                out.push(FormCheck {
                    name: format!("excess_coefficient[{x}]"),
                    declared: c.value,
                    recomputed: error(&self.d, |y| flipped.contains(y)) - best,
                });
            }
        }
        Ok(out)
    }

    /// Excess risk of `h` from the closed-form coefficients, when present.
    pub fn closed_form_excess(&self, h: &Concept) -> Option<f64> {
        let coef = self.closed_forms.excess_coefficients.as_ref()?;
        let opt = self.closed_forms.optimal.as_ref()?;
        let optimal = Concept::from_indices(self.n(), opt.iter().copied()).ok()?;
        Some(
            (0..self.n())
                .filter(|&x| h.contains(x) != optimal.contains(x))
                .map(|x| coef[x].value)
                .sum(),
        )
    }
}

/// Every subset of `points` as a concept over an `n`-point domain.
pub fn subsets_of(points: &[usize], n: usize) -> Result<Vec<Concept>> {
    if points.len() > 20 {
        return Err(LabError::Precondition(format!(
            "refusing to enumerate 2^{} subsets",
            points.len()
        )));
    }
    (0u64..1 << points.len())
        .map(|mask| {
            Concept::from_indices(
                n,
                points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| mask >> j & 1 == 1)
                    .map(|(_, &x)| x),
            )
        })
        .collect()
}

fn labeled(atoms: &[(usize, u8, Rational64)]) -> Result<LabeledDiscreteDistribution> {
    let total: Rational64 = atoms.iter().map(|a| a.2).sum();
    if total != Rational64::from_integer(1) {
        return Err(LabError::InvalidDistribution(format!(
            "construction sums to {total}, not 1"
        )));
    }
    LabeledDiscreteDistribution::new(
        atoms
            .iter()
            .filter(|a| *a.2.numer() != 0)
            .map(|&(x, y, p)| LabeledAtom { x, y, p: to_f64(p) })
            .collect(),
    )
}

fn marginal(atoms: &[(usize, Rational64)]) -> Result<MarginalDistribution> {
    MarginalDistribution::new(
        atoms
            .iter()
            .filter(|a| *a.1.numer() != 0)
            .map(|&(x, p)| (x, to_f64(p)))
            .collect(),
    )
}

fn positive_part(atoms: &[(usize, u8, Rational64)]) -> (Rational64, Vec<(usize, Rational64)>) {
    let alpha: Rational64 = atoms.iter().filter(|a| a.1 == 1).map(|a| a.2).sum();
    let cond = atoms
        .iter()
        .filter(|a| a.1 == 1)
        .map(|a| (a.0, a.2 / alpha))
        .collect();
    (alpha, cond)
}

fn zero() -> Rational64 {
    Rational64::from_integer(0)
}

fn one() -> Rational64 {
    Rational64::from_integer(1)
}

fn sorted_set(o: &[usize]) -> BTreeSet<usize> {
    o.iter().copied().collect()
}

fn scar_atoms(d: usize, rho: Rational64, o: &BTreeSet<usize>) -> Vec<(usize, u8, Rational64)> {
    let mut atoms: Vec<(usize, u8, Rational64)> = (0..d - 1)
        .map(|i| (i, u8::from(o.contains(&i)), rho / ri(d - 1)))
        .collect();
    atoms.push((d - 1, 1, one() - rho));
    atoms
}

fn check_scar_params(d: usize, o: &BTreeSet<usize>) -> Result<()> {
    if d < 2 {
        return Err(LabError::Parameter(format!("d = {d} must be at least 2")));
    }
    if d > 24 {
        return Err(LabError::Parameter(format!("d = {d} exceeds the powerset limit of 24")));
    }
    if let Some(&x) = o.iter().find(|&&x| x >= d - 1) {
        return Err(LabError::Parameter(format!(
            "O may only contain points 0..={}, got {x}",
            d - 2
        )));
    }
    Ok(())
}

/// Mass `1-ρ` on `(x_{d-1}, 1)` and `ρ/(d-1)` on each other point, labeled
/// 1 exactly on `O`. Sampling is SCAR (`P = D+`); the class is the powerset.
pub fn scar_pos_instance(d: usize, rho: f64, o: &[usize]) -> Result<PuInstance> {
    let o = sorted_set(o);
    check_scar_params(d, &o)?;
    let rho_q = open_unit(rho, "rho")?;
    let atoms = scar_atoms(d, rho_q, &o);
    let (alpha, plus) = positive_part(&atoms);
    Ok(PuInstance {
        family: "scar_pos".into(),
        params: json!({"d": d, "rho": rho, "O": o}),
        d: labeled(&atoms)?,
        p: marginal(&plus)?,
        class: Some(ConceptClass::powerset(d)?),
        geometry: None,
        closed_forms: ClosedForms {
            alpha: alpha.into(),
            approx_error: zero().into(),
            total_mass: one().into(),
            weight_ratio: Some(one().into()),
            excess_coefficients: None,
            optimal: None,
        },
    })
}

/// Mass `eps` on `(x_1, z)` and `1-eps` on `(x_2, 1)`, over points 0 and 1.
pub fn two_point_instance(eps: f64, z: u8) -> Result<PuInstance> {
    if z > 1 {
        return Err(LabError::Parameter(format!("z = {z} must be 0 or 1")));
    }
    let e = open_unit(eps, "eps")?;
    let atoms = vec![(0, z, e), (1, 1, one() - e)];
    let (alpha, plus) = positive_part(&atoms);
    Ok(PuInstance {
        family: "two_point".into(),
        params: json!({"eps": eps, "z": z}),
        d: labeled(&atoms)?,
        p: marginal(&plus)?,
        class: Some(ConceptClass::powerset(2)?),
        geometry: None,
        closed_forms: ClosedForms {
            alpha: alpha.into(),
            approx_error: zero().into(),
            total_mass: one().into(),
            weight_ratio: Some(one().into()),
            excess_coefficients: None,
            optimal: None,
        },
    })
}

/// `ρ/h` on each point of `O` (label 0) and `(1-ρ)/(m-h)` on the rest
/// (label 1), against the class of all subsets missing exactly `h` points.
pub fn claw_instance(m: usize, h: usize, o: &[usize], rho: f64) -> Result<PuInstance> {
    if !(1 <= h && h < m) {
        return Err(LabError::Parameter(format!("need 1 <= h < m, got h = {h}, m = {m}")));
    }
    let o = sorted_set(o);
    if o.len() != h || o.iter().any(|&x| x >= m) {
        return Err(LabError::Parameter(format!(
            "O must be {h} distinct points of 0..{m}"
        )));
    }
    let rho_q = open_unit(rho, "rho")?;
    let atoms: Vec<(usize, u8, Rational64)> = (0..m)
        .map(|x| {
            if o.contains(&x) {
                (x, 0, rho_q / ri(h))
            } else {
                (x, 1, (one() - rho_q) / ri(m - h))
            }
        })
        .collect();
    let (alpha, plus) = positive_part(&atoms);
    Ok(PuInstance {
        family: "claw".into(),
        params: json!({"m": m, "h": h, "O": o, "rho": rho}),
        d: labeled(&atoms)?,
        p: marginal(&plus)?,
        class: Some(ConceptClass::co_size(m, h)?),
        geometry: None,
        closed_forms: ClosedForms {
            alpha: alpha.into(),
            approx_error: zero().into(),
            total_mass: one().into(),
            weight_ratio: Some(one().into()),
            excess_coefficients: None,
            optimal: None,
        },
    })
}

/// The SCAR family with positives drawn from `P(x) = r·D+(x)` on the first
/// `d-1` points and the remaining mass on `x_{d-1}`.
pub fn sar_instance(d: usize, rho: f64, r: f64, o: &[usize]) -> Result<PuInstance> {
    let o = sorted_set(o);
    check_scar_params(d, &o)?;
    let rho_q = open_unit(rho, "rho")?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(LabError::Parameter(format!("r = {r} must lie in (0, 1]")));
    }
    let r_q = rational(r, "r")?;
    let atoms = scar_atoms(d, rho_q, &o);
    let (alpha, plus) = positive_part(&atoms);
    let mut p: Vec<(usize, Rational64)> = plus
        .iter()
        .filter(|a| a.0 < d - 1)
        .map(|&(x, q)| (x, r_q * q))
        .collect();
    let rest = one() - p.iter().map(|a| a.1).sum::<Rational64>();
    if rest < zero() {
        return Err(LabError::Parameter("remainder on the last point is negative".into()));
    }
    p.push((d - 1, rest));
    let ratio = if o.is_empty() { one() } else { r_q };
    Ok(PuInstance {
        family: "sar".into(),
        params: json!({"d": d, "rho": rho, "r": r, "O": o}),
        d: labeled(&atoms)?,
        p: marginal(&p)?,
        class: Some(ConceptClass::powerset(d)?),
        geometry: None,
        closed_forms: ClosedForms {
            alpha: alpha.into(),
            approx_error: zero().into(),
            total_mass: one().into(),
            weight_ratio: Some(ratio.into()),
            excess_coefficients: None,
            optimal: None,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovSide {
    Pos,
    Neg,
}

impl std::str::FromStr for CovSide {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pos" => Ok(CovSide::Pos),
            "neg" => Ok(CovSide::Neg),
            _ => Err(LabError::Parameter(format!("side must be pos or neg, got {s}"))),
        }
    }
}

/// The two-concept class of the covariate-shift family: the first third
/// `Y` and the whole domain.
pub fn cov_class(n: usize) -> Result<ConceptClass> {
    ConceptClass::new(
        n,
        vec![Concept::from_indices(n, 0..n / 3)?, Concept::full(n)],
    )
}

/// Labels `Y ∪ J → 1`, `Z \ J → 0`; `D_X` uniform over `Y ∪ J` (pos) or
/// `Y ∪ (Z \ J)` (neg); `P` uniform over `Y ∪ J`.
pub fn cov_uni_instance(n: usize, j: &[usize], side: CovSide) -> Result<PuInstance> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(LabError::Parameter(format!("n = {n} must be a positive multiple of 3")));
    }
    let third = n / 3;
    let j = sorted_set(j);
    if j.len() != third || j.iter().any(|&x| x < third || x >= n) {
        return Err(LabError::Parameter(format!(
            "J must be {third} distinct points of {third}..{n}"
        )));
    }
    let support: Vec<(usize, u8)> = (0..n)
        .filter_map(|x| {
            let in_y = x < third;
            let in_j = j.contains(&x);
            match side {
                CovSide::Pos if in_y || in_j => Some((x, 1)),
                CovSide::Neg if in_y => Some((x, 1)),
                CovSide::Neg if !in_j => Some((x, 0)),
                _ => None,
            }
        })
        .collect();
    let mass = one() / ri(support.len());
    let atoms: Vec<(usize, u8, Rational64)> = support.iter().map(|&(x, y)| (x, y, mass)).collect();
    let (alpha, _) = positive_part(&atoms);
    let p_points: Vec<(usize, Rational64)> = (0..n)
        .filter(|x| *x < third || j.contains(x))
        .map(|x| (x, one() / ri(2 * third)))
        .collect();
    let ratio = match side {
        CovSide::Pos => one(),
        CovSide::Neg => Rational64::new(1, 2),
    };
    Ok(PuInstance {
        family: "cov_uni".into(),
        params: json!({"n": n, "J": j, "side": side}),
        d: labeled(&atoms)?,
        p: marginal(&p_points)?,
        class: Some(cov_class(n)?),
        geometry: None,
        closed_forms: ClosedForms {
            alpha: alpha.into(),
            approx_error: zero().into(),
            total_mass: one().into(),
            weight_ratio: Some(ratio.into()),
            excess_coefficients: None,
            optimal: None,
        },
    })
}

fn check_die_set(k: usize, o: &BTreeSet<usize>) -> Result<()> {
    if k < 2 {
        return Err(LabError::Parameter(format!("k = {k} must be at least 2")));
    }
    if o.is_empty() || o.len() >= k || o.iter().any(|&j| j == 0 || j > k) {
        return Err(LabError::Parameter(format!(
            "O must be a proper nonempty subset of 1..={k}"
        )));
    }
    Ok(())
}

/// `(w⁻, w⁺)` for a proper nonempty `O ⊆ {1..k}`.
pub fn die_weights(k: usize, o: &[usize]) -> Result<(Rational64, Rational64)> {
    let o = sorted_set(o);
    check_die_set(k, &o)?;
    let s = o.len();
    if 2 * s <= k {
        Ok((one(), Rational64::new(s as i64, (k - s) as i64)))
    } else {
        Ok((Rational64::new((k - s) as i64, s as i64), one()))
    }
}

/// `k` points `x^1_i = i-1` followed by `k` points `x^2_i = k+i-1`, with the
/// four-case table of the agnostic family; `O¹, O² ⊆ {1..k}`.
pub fn agno_instance(k: usize, rho: f64, o1: &[usize], o2: &[usize]) -> Result<PuInstance> {
    let (s1, s2) = (sorted_set(o1), sorted_set(o2));
    check_die_set(k, &s1)?;
    check_die_set(k, &s2)?;
    if 2 * k > 24 {
        return Err(LabError::Parameter(format!("2k = {} exceeds the powerset limit of 24", 2 * k)));
    }
    let rho_q = open_unit(rho, "rho")?;
    let (wm1, wp1) = die_weights(k, o1)?;
    let (wm2, wp2) = die_weights(k, o2)?;
    let base = one() / ri(4 * k);
    let half = Rational64::new(1, 2);
    let mut atoms = Vec::with_capacity(4 * k);
    let mut coef = Vec::with_capacity(2 * k);
    let mut optimal = Vec::new();
    for i in 1..=k {
        let x = i - 1;
        atoms.push((x, 1, base));
        if s1.contains(&i) {
            atoms.push((x, 0, base * (one() - wm1 * rho_q)));
            coef.push(base * rho_q * wm1);
            optimal.push(x);
        } else {
            atoms.push((x, 0, base * (one() + wp1 * rho_q)));
            coef.push(base * rho_q * wp1);
        }
    }
    for i in 1..=k {
        let x = k + i - 1;
        if s2.contains(&i) {
            atoms.push((x, 1, base * (one() - wm2 * rho_q * half)));
            atoms.push((x, 0, base * (one() + wm2 * rho_q * half)));
            coef.push(base * rho_q * wm2);
        } else {
            atoms.push((x, 1, base * (one() + wp2 * rho_q * half)));
            atoms.push((x, 0, base * (one() - wp2 * rho_q * half)));
            coef.push(base * rho_q * wp2);
            optimal.push(x);
        }
    }
    let (alpha, plus) = positive_part(&atoms);
    let opt_set: BTreeSet<usize> = optimal.iter().copied().collect();
    let approx: Rational64 = atoms
        .iter()
        .filter(|a| opt_set.contains(&a.0) != (a.1 == 1))
        .map(|a| a.2)
        .sum();
    Ok(PuInstance {
        family: "agno".into(),
        params: json!({"k": k, "rho": rho, "O1": s1, "O2": s2}),
        d: labeled(&atoms)?,
        p: marginal(&plus)?,
        class: Some(ConceptClass::powerset(2 * k)?),
        geometry: None,
        closed_forms: ClosedForms {
            alpha: alpha.into(),
            approx_error: approx.into(),
            total_mass: one().into(),
            weight_ratio: Some(one().into()),
            excess_coefficients: Some(coef.into_iter().map(Exact::from).collect()),
            optimal: Some(optimal),
        },
    })
}

/// `k`-faced die whose faces in `O` are down-weighted by `w⁻·eps` and the
/// rest up-weighted by `w⁺·eps`. Faces are `1..=k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DieInstance {
    pub k: usize,
    pub eps: f64,
    #[serde(rename = "O")]
    pub o: Vec<usize>,
    pub w_minus: Exact,
    pub w_plus: Exact,
    pub probabilities: Vec<Exact>,
}

pub fn die_instance(k: usize, eps: f64, o: &[usize]) -> Result<DieInstance> {
    let (wm, wp) = die_weights(k, o)?;
    let e = open_unit(eps, "eps")?;
    let set = sorted_set(o);
    let probs: Vec<Rational64> = (1..=k)
        .map(|j| {
            if set.contains(&j) {
                (one() - wm * e) / ri(k)
            } else {
                (one() + wp * e) / ri(k)
            }
        })
        .collect();
    debug_assert_eq!(probs.iter().sum::<Rational64>(), one());
    Ok(DieInstance {
        k,
        eps,
        o: set.into_iter().collect(),
        w_minus: wm.into(),
        w_plus: wp.into(),
        probabilities: probs.into_iter().map(Exact::from).collect(),
    })
}

impl DieInstance {
    pub fn exact_total(&self) -> Result<Rational64> {
        let (wm, wp) = die_weights(self.k, &self.o)?;
        let e = rational(self.eps, "eps")?;
        let s = ri(self.o.len());
        Ok((s * (one() - wm * e) + (ri(self.k) - s) * (one() + wp * e)) / ri(self.k))
    }

    /// `m` rolls, faces `1..=k`.
    pub fn roll(&self, m: usize, rng: &mut LabRng) -> Vec<usize> {
        let cdf = crate::dist::InverseCdf::new(self.probabilities.iter().map(|p| p.value));
        (0..m).map(|_| cdf.sample(rng) + 1).collect()
    }
}

/// `err(h) = (1/k)(Σ_{j∈O} h_j w⁻ + Σ_{j∉O} (1-h_j) w⁺)`.
pub fn die_error_exact(h: &[u8], k: usize, o: &[usize]) -> Result<Rational64> {
    if h.len() != k {
        return Err(LabError::Domain(format!("h has length {}, expected {k}", h.len())));
    }
    let (wm, wp) = die_weights(k, o)?;
    let set = sorted_set(o);
    let total: Rational64 = (1..=k)
        .map(|j| {
            let hj = h[j - 1] != 0;
            match (set.contains(&j), hj) {
                (true, true) => wm,
                (false, false) => wp,
                _ => zero(),
            }
        })
        .sum();
    Ok(total / ri(k))
}

pub fn die_error(h: &[u8], k: usize, o: &[usize]) -> Result<f64> {
    die_error_exact(h, k, o).map(to_f64)
}

/// Uniform draw from the proper nonempty subsets of `{1..k}`.
pub fn uniform_die_set(k: usize, rng: &mut LabRng) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(LabError::Parameter(format!("k = {k} must be at least 2")));
    }
    loop {
        let o: Vec<usize> = (1..=k).filter(|_| rng.random::<bool>()).collect();
        if !o.is_empty() && o.len() < k {
            return Ok(o);
        }
    }
}

/// A triple of the Left/Right family: disjoint halves `A`, `B` of
/// `{0..n-1}`, and whether `M` comes from `U_A`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeftRightTriple {
    pub n: usize,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub m_from_a: bool,
}

pub fn left_right_triple(n: usize, seed: u64) -> Result<LeftRightTriple> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(LabError::Parameter(format!("n = {n} must be even and positive")));
    }
    let mut rng = rng_from_seed(seed);
    let mut points: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        points.swap(i, j);
    }
    let mut a = points[..n / 2].to_vec();
    let mut b = points[n / 2..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok(LeftRightTriple {
        n,
        a,
        b,
        m_from_a: rng.random(),
    })
}

impl LeftRightTriple {
    /// Samples `(L, R, M)` of sizes `s`, `s`, `t + 1`.
    pub fn samples(&self, s: usize, t: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let mut rng = rng_from_seed(seed);
        let mut uniform = |set: &[usize], count: usize| -> Vec<usize> {
            (0..count).map(|_| set[rng.random_range(0..set.len())]).collect()
        };
        let l = uniform(&self.a, s);
        let r = uniform(&self.b, s);
        let m = uniform(if self.m_from_a { &self.a } else { &self.b }, t + 1);
        (l, r, m)
    }

    /// The covariate-shift instance the reduction's output is drawn from:
    /// original points shifted past a fresh block of `n/2` indices.
    pub fn pu_instance(&self) -> Result<PuInstance> {
        let shift = self.n / 2;
        let j: Vec<usize> = self.b.iter().map(|x| x + shift).collect();
        let side = if self.m_from_a { CovSide::Neg } else { CovSide::Pos };
        cov_uni_instance(3 * self.n / 2, &j, side)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// PU input built from a Left/Right instance. Points of the original
/// `n`-point domain appear shifted by `n/2`; indices below `n/2` form the
/// fresh block `Y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeftRightReduction {
    pub s_p: Vec<usize>,
    pub s_u: Vec<usize>,
    pub held_out: usize,
    pub tails_p: usize,
    pub tails_u: usize,
    pub domain_size: usize,
}

impl LeftRightReduction {
    /// Left iff the learned hypothesis labels the held-out point 0.
    pub fn decide(&self, label_at_held_out: bool) -> Side {
        if label_at_held_out {
            Side::Right
        } else {
            Side::Left
        }
    }
}

pub fn left_right_to_pu(
    l: &[usize],
    r: &[usize],
    m: &[usize],
    n: usize,
    seed: u64,
) -> Result<LeftRightReduction> {
    if l.len() != r.len() {
        return Err(LabError::Parameter(format!(
            "L and R must have equal sizes, got {} and {}",
            l.len(),
            r.len()
        )));
    }
    if m.is_empty() {
        return Err(LabError::Parameter("M must be nonempty".into()));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(LabError::Parameter(format!("n = {n} must be even and positive")));
    }
    if let Some(x) = l.iter().chain(r).chain(m).find(|&&x| x >= n) {
        return Err(LabError::Domain(format!("point {x} outside 0..{n}")));
    }
    let (s, t) = (r.len(), m.len() - 1);
    let shift = n / 2;
    let mut rng = rng_from_seed(seed);
    let padding = |heads: usize, rng: &mut LabRng| -> Vec<usize> {
        let mut out = Vec::new();
        let mut seen = 0;
        while seen < heads {
            if rng.random::<bool>() {
                seen += 1;
            } else {
                out.push(rng.random_range(0..shift));
            }
        }
        out
    };
    let i_u = padding(t, &mut rng);
    let i_p = padding(s, &mut rng);
    let pick = rng.random_range(0..m.len());
    let held_out = m[pick] + shift;
    let (tails_u, tails_p) = (i_u.len(), i_p.len());
    let mut s_u: Vec<usize> = m
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != pick)
        .map(|(_, &x)| x + shift)
        .collect();
    s_u.extend(i_u);
    let mut s_p: Vec<usize> = r.iter().map(|x| x + shift).collect();
    s_p.extend(i_p);
    Ok(LeftRightReduction {
        s_p,
        s_u,
        held_out,
        tails_p,
        tails_u,
        domain_size: n + shift,
    })
}

/// Named two-dimensional instances for the box-filter learner.
///
/// `alg1`: nine positives on a 3×3 lattice near the origin, three negatives
/// far away, margin 0.25 and positive mass 0.6; `P` puts half its mass on
/// one corner positive and otherwise follows `D+`, so `R(P, D+) = 1/2`.
///
/// `alg1_stray`: the same, with 0.2 of `P` moved onto a point that `D_X`
/// never produces.
pub fn geometric_preset(name: &str) -> Result<PuInstance> {
    let mut points: Vec<Vec<f64>> = Vec::new();
    for &u in &[0.1, 0.2, 0.3] {
        for &v in &[0.1, 0.2, 0.3] {
            points.push(vec![u, v]);
        }
    }
    points.extend([vec![0.75, 0.75], vec![0.9, 0.15], vec![0.15, 0.9]]);
    let mut atoms: Vec<(usize, u8, Rational64)> =
        (0..9).map(|x| (x, 1, Rational64::new(1, 15))).collect();
    atoms.extend((9..12).map(|x| (x, 0, Rational64::new(2, 15))));
    let half = Rational64::new(1, 2);
    let mut p: Vec<(usize, Rational64)> = (0..9).map(|x| (x, half / ri(9))).collect();
    p[0].1 += half;
    let (ratio, stray) = match name {
        "alg1" => (half, false),
        "alg1_stray" => (Rational64::new(2, 5), true),
        other => {
            return Err(LabError::Usage(format!(
                "unknown preset {other}; expected alg1 or alg1_stray"
            )))
        }
    };
    if stray {
        points.push(vec![0.95, 0.95]);
        for a in &mut p {
            a.1 *= Rational64::new(4, 5);
        }
        p.push((12, Rational64::new(1, 5)));
    }
    let alpha: Rational64 = atoms.iter().filter(|a| a.1 == 1).map(|a| a.2).sum();
    let d = labeled(&atoms)?;
    let geometry = Geometry::new(2, points, 0.25, 0.5)?;
    geometry.validate(&d)?;
    Ok(PuInstance {
        family: name.into(),
        params: json!({"gamma": 0.25, "pi": 0.5, "r": to_f64(ratio)}),
        d,
        p: marginal(&p)?,
        class: None,
        geometry: Some(geometry),
        closed_forms: ClosedForms {
            alpha: alpha.into(),
            approx_error: zero().into(),
            total_mass: one().into(),
            weight_ratio: None,
            excess_coefficients: None,
            optimal: None,
        },
    })
}

/// The `η` pair: `D₀` puts `η` on `(x,1)` and `1-η` on `(x,0)`; `D₁` swaps
/// the labels. Both use `P = δ_x`, so no sample distinguishes them.
pub fn no_alpha_pair(eta: f64) -> Result<(PuInstance, PuInstance)> {
    let e = open_unit(eta, "eta")?;
    let build = |pos: Rational64, tag: u8| -> Result<PuInstance> {
        let atoms = vec![(0, 1, pos), (0, 0, one() - pos)];
        let approx = if pos < one() - pos { pos } else { one() - pos };
        Ok(PuInstance {
            family: format!("no_alpha_{tag}"),
            params: json!({"eta": eta}),
            d: labeled(&atoms)?,
            p: MarginalDistribution::point_mass(0),
            class: Some(ConceptClass::powerset(1)?),
            geometry: None,
            closed_forms: ClosedForms {
                alpha: pos.into(),
                approx_error: approx.into(),
                total_mass: one().into(),
                weight_ratio: Some(one().into()),
                excess_coefficients: None,
                optimal: None,
            },
        })
    };
    Ok((build(e, 0)?, build(one() - e, 1)?))
}

/// Minimum error over the instance's class, with the first minimizer.
pub fn best_in_class(inst: &PuInstance) -> Result<(usize, f64)> {
    let class = inst
        .class
        .as_ref()
        .ok_or_else(|| LabError::Usage("instance has no concept class".into()))?;
    Ok(approximation_error(class, &inst.d))
}

/// Checks that `D` sums to one within tolerance; generators guarantee this
/// exactly, loaded JSON only approximately.
pub fn total_mass_ok(inst: &PuInstance) -> bool {
    (inst.d.atoms().iter().map(|a| a.p).sum::<f64>() - 1.0).abs() <= MASS_TOLERANCE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{b_distance, singletons};

    fn all_agree(inst: &PuInstance) {
        for c in inst.check_closed_forms().unwrap() {
            assert!(c.agrees(), "{}: {} vs {}", c.name, c.declared, c.recomputed);
        }
    }

    #[test]
    fn scar_small_example() {
        let inst = scar_pos_instance(3, 0.3, &[0]).unwrap();
        let atoms: Vec<(usize, u8)> = inst.d.atoms().iter().map(|a| (a.x, a.y)).collect();
        assert_eq!(atoms, vec![(0, 1), (1, 0), (2, 1)]);
        assert!((inst.d.atoms()[2].p - 0.7).abs() < 1e-15);
        assert!((inst.d.atoms()[0].p - 0.15).abs() < 1e-15);
        assert_eq!(inst.closed_forms.alpha.exact, "17/20");
        all_agree(&inst);
        assert!(scar_pos_instance(3, 0.3, &[2]).is_err());
        assert!(scar_pos_instance(1, 0.3, &[]).is_err());
        assert!(scar_pos_instance(3, 1.0, &[]).is_err());
    }

    #[test]
    fn scar_marginal_ignores_o() {
        let a = scar_pos_instance(6, 0.3, &[]).unwrap();
        let b = scar_pos_instance(6, 0.3, &[0, 1, 2, 3, 4]).unwrap();
        let (va, vb) = (derive_views(&a.d), derive_views(&b.d));
        assert_eq!(b_distance(&singletons(6), &va.marginal, &vb.marginal).unwrap(), 0.0);
    }

    #[test]
    fn two_point_conditionals() {
        let one = two_point_instance(0.1, 1).unwrap();
        assert_eq!(one.p.atoms().len(), 2);
        assert!((one.p.prob(0) - 0.1).abs() < 1e-15);
        let zero = two_point_instance(0.1, 0).unwrap();
        assert_eq!(zero.p, MarginalDistribution::point_mass(1));
        all_agree(&one);
        all_agree(&zero);
    }

    #[test]
    fn claw_family() {
        let inst = claw_instance(6, 2, &[0, 3], 0.4).unwrap();
        assert_eq!(inst.closed_forms.alpha.exact, "3/5");
        assert!((error(&inst.d, |_| true) - 0.4).abs() < 1e-15);
        all_agree(&inst);
        assert!(claw_instance(6, 2, &[0], 0.4).is_err());
    }

    #[test]
    fn sar_family() {
        let inst = sar_instance(3, 0.3, 0.5, &[0]).unwrap();
        assert!((inst.p.prob(0) - 0.5 * 0.15 / 0.85).abs() < 1e-15);
        assert!((inst.p.prob(2) - (1.0 - 0.5 * 0.15 / 0.85)).abs() < 1e-15);
        assert_eq!(sar_instance(4, 0.3, 1.0, &[1]).unwrap().p, scar_pos_instance(4, 0.3, &[1]).unwrap().p);
        all_agree(&inst);
    }

    #[test]
    fn cov_family() {
        let pos = cov_uni_instance(6, &[2, 4], CovSide::Pos).unwrap();
        let neg = cov_uni_instance(6, &[2, 4], CovSide::Neg).unwrap();
        assert_eq!(pos.closed_forms.alpha.exact, "1");
        assert_eq!(neg.closed_forms.alpha.exact, "1/2");
        all_agree(&pos);
        all_agree(&neg);
        assert!(cov_uni_instance(7, &[2, 4], CovSide::Pos).is_err());
        assert!(cov_uni_instance(6, &[0, 4], CovSide::Pos).is_err());
    }

    #[test]
    fn agno_family() {
        let inst = agno_instance(2, 0.2, &[1], &[1]).unwrap();
        assert_eq!(inst.closed_forms.alpha.exact, "1/2");
        all_agree(&inst);
        assert_eq!(inst.closed_forms.optimal, Some(vec![0, 3]));
        assert!(agno_instance(2, 0.2, &[], &[1]).is_err());
        assert!(agno_instance(2, 0.2, &[1, 2], &[1]).is_err());
    }

    #[test]
    fn die_weight_examples() {
        let r = |a, b| Rational64::new(a, b);
        assert_eq!(die_weights(4, &[1, 2]).unwrap(), (r(1, 1), r(1, 1)));
        assert_eq!(die_weights(4, &[1]).unwrap(), (r(1, 1), r(1, 3)));
        assert_eq!(die_weights(4, &[1, 2, 3]).unwrap(), (r(1, 3), r(1, 1)));
        assert!(die_weights(4, &[]).is_err());
        assert!(die_weights(4, &[1, 2, 3, 4]).is_err());
    }

    #[test]
    fn die_examples() {
        let die = die_instance(4, 0.2, &[1]).unwrap();
        assert_eq!(die.exact_total().unwrap(), one());
        assert_eq!(die_error(&[0, 1, 1, 1], 4, &[1]).unwrap(), 0.0);
        assert_eq!(die_error(&[1, 0, 0, 0], 4, &[1]).unwrap(), 0.5);
        assert_eq!(die_error_exact(&[1, 1, 1, 1], 4, &[1]).unwrap(), Rational64::new(1, 4));
        assert_eq!(die_error_exact(&[0, 0, 0, 0], 4, &[1]).unwrap(), Rational64::new(1, 4));
        assert!(die_error(&[1, 1], 4, &[1]).is_err());
    }

    #[test]
    fn left_right_sizes() {
        let triple = left_right_triple(8, 3).unwrap();
        let (l, r, m) = triple.samples(5, 7, 11);
        let red = left_right_to_pu(&l, &r, &m, 8, 99).unwrap();
        assert!(red.s_p.len() >= 5);
        assert!(red.s_u.len() >= 7);
        assert_eq!(red.s_p.len(), 5 + red.tails_p);
        assert_eq!(red.s_u.len(), 7 + red.tails_u);
        assert_eq!(red, left_right_to_pu(&l, &r, &m, 8, 99).unwrap());
        assert!(red.s_u.iter().chain(&red.s_p).all(|&x| x < 12));
    }

    #[test]
    fn left_right_single_m() {
        let red = left_right_to_pu(&[0], &[1], &[2], 4, 5).unwrap();
        assert_eq!(red.held_out, 4);
        assert!(red.s_u.iter().all(|&x| x < 2));
        assert!(left_right_to_pu(&[0], &[1, 1], &[2], 4, 5).is_err());
        assert_eq!(red.decide(false), Side::Left);
    }

    #[test]
    fn presets_validate() {
        let a = geometric_preset("alg1").unwrap();
        all_agree(&a);
        let s = geometric_preset("alg1_stray").unwrap();
        assert!((s.p.prob(12) - 0.2).abs() < 1e-15);
        assert!(geometric_preset("nope").is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = agno_instance(3, 0.2, &[1], &[1, 2]).unwrap();
        let back = PuInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back, inst);
        let v: Value = serde_json::from_str(&inst.to_json().unwrap()).unwrap();
        for key in ["family", "params", "D", "P", "class", "closed_forms"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
