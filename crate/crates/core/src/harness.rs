//! Seeded Monte Carlo engine: single trials, failure-rate estimates with
//! Wilson intervals, sample-size sweeps, threshold fitting and the bound
//! checks.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use num_rational::Rational64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::concept::{
    claw_number_certified, symmetric_difference_class, vc_dimension, Concept, ConceptClass,
};
use crate::dist::{
    b_distance, derive_views, draw, error, source_metrics, MarginalDistribution,
};
use crate::error::{LabError, Result};
use crate::instances::{
    agno_instance, claw_instance, cov_uni_instance, die_error, die_instance,
    geometric_preset, no_alpha_pair, rational, sar_instance, scar_pos_instance,
    two_point_instance, uniform_die_set, CovSide, PuInstance,
};
use crate::learners::{algorithm1, die_learner_l0, lagrangian_finite, perm_box, perm_finite, FilterDiagnostics, Hypothesis};
use crate::rng::{derive_seed, rng_from_seed, stream_seed, Stream};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Slack under which `excess ≥ eps` still counts as a failure, so that
/// exactly representable ties are not lost to rounding.
pub const FAILURE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InstanceSpec {
    ScarPos {
        d: usize,
        rho: f64,
        #[serde(rename = "O")]
        o: Vec<usize>,
    },
    TwoPoint {
        eps: f64,
        z: u8,
    },
    Claw {
        m: usize,
        h: usize,
        #[serde(rename = "O")]
        o: Vec<usize>,
        rho: f64,
    },
    Sar {
        d: usize,
        rho: f64,
        r: f64,
        #[serde(rename = "O")]
        o: Vec<usize>,
    },
    CovUni {
        n: usize,
        #[serde(rename = "J")]
        j: Vec<usize>,
        side: CovSide,
    },
    Agno {
        k: usize,
        rho: f64,
        #[serde(rename = "O1")]
        o1: Vec<usize>,
        #[serde(rename = "O2")]
        o2: Vec<usize>,
    },
    Geometric {
        preset: String,
    },
    File {
        path: PathBuf,
    },
}

impl InstanceSpec {
    pub fn build(&self) -> Result<PuInstance> {
        match self {
            InstanceSpec::ScarPos { d, rho, o } => scar_pos_instance(*d, *rho, o),
            InstanceSpec::TwoPoint { eps, z } => two_point_instance(*eps, *z),
            InstanceSpec::Claw { m, h, o, rho } => claw_instance(*m, *h, o, *rho),
            InstanceSpec::Sar { d, rho, r, o } => sar_instance(*d, *rho, *r, o),
            InstanceSpec::CovUni { n, j, side } => cov_uni_instance(*n, j, *side),
            InstanceSpec::Agno { k, rho, o1, o2 } => agno_instance(*k, *rho, o1, o2),
            InstanceSpec::Geometric { preset } => geometric_preset(preset),
            InstanceSpec::File { path } => PuInstance::from_json(&std::fs::read_to_string(path)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerSpec {
    Perm,
    Lagrangian { gamma: f64 },
    Algorithm1 { gamma: f64 },
}

impl LearnerSpec {
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Perm => "perm".into(),
            LearnerSpec::Lagrangian { gamma } => format!("lagrangian({gamma})"),
            LearnerSpec::Algorithm1 { gamma } => format!("algorithm1({gamma})"),
        }
    }
}

impl FromStr for LearnerSpec {
    type Err = LabError;

    /// `perm`, `lagrangian:<gamma>` or `algorithm1:<gamma>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let gamma = || -> Result<f64> {
            arg.ok_or_else(|| LabError::Usage(format!("learner {kind} needs :<gamma>")))?
                .parse()
                .map_err(|_| LabError::Usage(format!("bad gamma in learner {s}")))
        };
        match kind {
            "perm" if arg.is_none() => Ok(LearnerSpec::Perm),
            "lagrangian" => Ok(LearnerSpec::Lagrangian { gamma: gamma()? }),
            "algorithm1" => Ok(LearnerSpec::Algorithm1 { gamma: gamma()? }),
            _ => Err(LabError::Usage(format!(
                "unknown learner {s}; expected perm, lagrangian:<gamma> or algorithm1:<gamma>"
            ))),
        }
    }
}

/// An instance with the quantities every trial needs precomputed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub instance: PuInstance,
    pub n: usize,
    pub marginal: MarginalDistribution,
    pub approx_error: f64,
}

impl Prepared {
    pub fn new(instance: PuInstance) -> Result<Self> {
        let marginal = derive_views(&instance.d).marginal;
        let approx_error = instance.approx_error()?;
        Ok(Self {
            n: instance.n(),
            instance,
            marginal,
            approx_error,
        })
    }

    pub fn error_of(&self, h: &Hypothesis) -> Result<f64> {
        let set = h.realize(
            self.n,
            self.instance.class.as_ref(),
            self.instance.geometry.as_ref(),
        )?;
        Ok(error(&self.instance.d, |x| set.contains(x)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub b: usize,
    pub a: usize,
    pub seed: u64,
    pub err: f64,
    pub excess: f64,
    /// PERM found no concept containing the positive sample.
    pub infeasible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterDiagnostics>,
    #[serde(skip)]
    pub elapsed: Duration,
}

/// Wall-clock timer; reads zero on wasm32-unknown-unknown, where
/// `Instant::now` panics.
struct Stopwatch(#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            std::time::Instant::now(),
        )
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return self.0.elapsed();
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        Duration::ZERO
    }
}

/// Draws `S^P ~ P^b` and `S^U ~ D_X^a` from independent streams of `seed`,
/// runs the learner and scores its output exactly.
pub fn run_trial(
    prep: &Prepared,
    learner: LearnerSpec,
    b: usize,
    a: usize,
    seed: u64,
) -> Result<(TrialRecord, Hypothesis)> {
    let start = Stopwatch::start();
    let s_p = draw(&prep.instance.p, b, stream_seed(seed, Stream::Positive)).items;
    let s_u = draw(&prep.marginal, a, stream_seed(seed, Stream::Unlabeled)).items;
    let inst = &prep.instance;
    let mut filter = None;
    let outcome = match (learner, &inst.class, &inst.geometry) {
        (LearnerSpec::Perm, Some(class), _) => perm_finite(class, &s_p, &s_u),
        (LearnerSpec::Lagrangian { gamma }, Some(class), _) => {
            lagrangian_finite(class, &s_p, &s_u, gamma)
        }
        (LearnerSpec::Perm, None, Some(g)) => {
            let pts = |s: &[usize]| s.iter().map(|&x| g.coords(x)).collect::<Vec<_>>();
            perm_box(&pts(&s_p), &pts(&s_u), g.dim)
        }
        (LearnerSpec::Algorithm1 { gamma }, None, Some(g)) => {
            let pts = |s: &[usize]| s.iter().map(|&x| g.coords(x)).collect::<Vec<_>>();
            algorithm1(&pts(&s_p), &pts(&s_u), gamma, g.dim).map(|(h, diag)| {
                filter = Some(diag);
                h
            })
        }
        _ => {
            return Err(LabError::Usage(format!(
                "learner {} does not apply to instance family {}",
                learner.name(),
                inst.family
            )))
        }
    };
    let (hypothesis, err, infeasible) = match outcome {
        Ok(h) => {
            let err = prep.error_of(&h)?;
            (h, err, false)
        }
        Err(LabError::Infeasible) => (Hypothesis::ZERO, 1.0, true),
        Err(e) => return Err(e),
    };
    Ok((
        TrialRecord {
            b,
            a,
            seed,
            err,
            excess: err - prep.approx_error,
            infeasible,
            filter,
            elapsed: start.elapsed(),
        },
        hypothesis,
    ))
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The endpoints are exact at k = 0 and k = n; rounding would leave ~1e-19.
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// `P[X ≥ k]` for `X ~ Bin(n, p)`.
pub fn binomial_upper_tail(k: usize, n: usize, p: f64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    let bin = Binomial::new(p, n as u64)
        .map_err(|e| LabError::Parameter(format!("binomial({n}, {p}): {e}")))?;
    Ok(bin.sf(k as u64 - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTest {
    pub successes: usize,
    pub trials: usize,
    pub p0: f64,
    pub p_value: f64,
    pub pass: bool,
}

/// One-sided test of `H0: rate ≤ p0` at level 0.05; passes when rejected.
pub fn rate_exceeds(successes: usize, trials: usize, p0: f64) -> Result<RateTest> {
    let p_value = binomial_upper_tail(successes, trials, p0)?;
    Ok(RateTest {
        successes,
        trials,
        p0,
        p_value,
        pass: p_value <= 0.05,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub learner: LearnerSpec,
    pub b_grid: Vec<usize>,
    pub a_grid: Vec<usize>,
    /// Pair `b_grid[i]` with `a_grid[i]` instead of taking the product.
    #[serde(default)]
    pub paired: bool,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(LabError::Usage("trials must be at least 1".into()));
        }
        if self.b_grid.is_empty() || self.a_grid.is_empty() {
            return Err(LabError::Usage("sample-size grids must be nonempty".into()));
        }
        if self.paired && self.b_grid.len() != self.a_grid.len() {
            return Err(LabError::Usage("paired grids must have equal lengths".into()));
        }
        for (name, v) in [("eps", self.eps), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(LabError::Usage(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }

    /// Grid cells in `(b, a)` order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut cells: Vec<(usize, usize)> = if self.paired {
            self.b_grid.iter().copied().zip(self.a_grid.iter().copied()).collect()
        } else {
            self.b_grid
                .iter()
                .flat_map(|&b| self.a_grid.iter().map(move |&a| (b, a)))
                .collect()
        };
        cells.sort_unstable();
        cells.dedup();
        cells
    }
}

/// Cell key for seed derivation; depends only on the sample sizes, so a
/// cell's trials are the same whichever grid it appears in.
pub fn cell_key(b: usize, a: usize) -> u64 {
    ((b as u64) << 32) ^ a as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub family: String,
    pub learner: String,
    pub b: usize,
    pub a: usize,
    pub trials: usize,
    pub eps: f64,
    pub failure_rate: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub seed: u64,
}

/// Every trial of one cell, in index order.
pub fn cell_trials(
    prep: &Prepared,
    learner: LearnerSpec,
    b: usize,
    a: usize,
    trials: usize,
    master: u64,
) -> Result<Vec<TrialRecord>> {
    let key = cell_key(b, a);
    (0..trials as u64)
        .into_par_iter()
        .map(|i| run_trial(prep, learner, b, a, derive_seed(master, key, i)).map(|r| r.0))
        .collect()
}

pub fn is_failure(rec: &TrialRecord, eps: f64) -> bool {
    rec.excess >= eps - FAILURE_SLACK
}

pub fn summarize(
    prep: &Prepared,
    learner: LearnerSpec,
    records: &[TrialRecord],
    eps: f64,
    master: u64,
) -> CellResult {
    let failures = records.iter().filter(|r| is_failure(r, eps)).count();
    let n = records.len();
    let (lo, hi) = wilson_interval(failures, n, Z95);
    CellResult {
        family: prep.instance.family.clone(),
        learner: learner.name(),
        b: records.first().map_or(0, |r| r.b),
        a: records.first().map_or(0, |r| r.a),
        trials: n,
        eps,
        failure_rate: failures as f64 / n.max(1) as f64,
        wilson_lo: lo,
        wilson_hi: hi,
        seed: master,
    }
}

pub fn success_probability(
    prep: &Prepared,
    config: &ExperimentConfig,
    b: usize,
    a: usize,
) -> Result<CellResult> {
    config.validate()?;
    let records = cell_trials(prep, config.learner, b, a, config.trials, config.seed)?;
    Ok(summarize(prep, config.learner, &records, config.eps, config.seed))
}

pub fn sweep_sample_complexity(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    config.validate()?;
    let prep = Prepared::new(config.instance.build()?)?;
    config
        .cells()
        .into_iter()
        .map(|(b, a)| success_probability(&prep, config, b, a))
        .collect()
}

pub fn write_csv<W: std::io::Write>(rows: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CellResult>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(LabError::from))
        .collect()
}

/// Runs `f` on a pool of `jobs` threads (all cores when `None`).
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| LabError::Usage(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Pool-adjacent-violators fit of a non-increasing sequence.
pub fn isotonic_non_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (v2, w2, c2) = blocks[blocks.len() - 1];
            let (v1, w1, c1) = blocks[blocks.len() - 2];
            if v1 >= v2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().expect("two blocks") = ((v1 * w1 + v2 * w2) / w, w, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, _, c)| std::iter::repeat_n(v, c))
        .collect()
}

/// Smallest sample size at which the smoothed failure rate drops to
/// `delta`, interpolated linearly in `log m` between grid points.
pub fn fit_threshold(sizes: &[usize], rates: &[f64], weights: &[f64], delta: f64) -> Option<f64> {
    let smooth = isotonic_non_increasing(rates, weights);
    let i = smooth.iter().position(|&r| r <= delta)?;
    if i == 0 {
        return Some(sizes[0] as f64);
    }
    let (m0, m1) = ((sizes[i - 1] as f64).ln(), (sizes[i] as f64).ln());
    let (r0, r1) = (smooth[i - 1], smooth[i]);
    let t = (r0 - delta) / (r0 - r1);
    Some((m0 + t * (m1 - m0)).exp())
}

/// Threshold of a sweep along its positive-sample sizes.
pub fn threshold_of(rows: &[CellResult], delta: f64) -> Option<f64> {
    let sizes: Vec<usize> = rows.iter().map(|r| r.b).collect();
    let rates: Vec<f64> = rows.iter().map(|r| r.failure_rate).collect();
    let weights: Vec<f64> = rows.iter().map(|r| r.trials as f64).collect();
    fit_threshold(&sizes, &rates, &weights, delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub details: Value,
}

pub const BOUND_IDS: [&str; 11] = [
    "scar_perm_upper",
    "sar_perm_upper",
    "alg1_upper",
    "lagrangian_factor",
    "lagrangian_known_alpha",
    "apds_bound",
    "no_alpha_impossibility",
    "die_lower",
    "claw_vcd_remark",
    "cdc_vcd_corollary",
    "epsnet_transfer",
];

/// Overrides for the defaults of each bound check.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub eta: Option<f64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub trials: Option<usize>,
    pub b: Option<usize>,
    pub a: Option<usize>,
    pub r: Option<f64>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub instance: Option<InstanceSpec>,
}

impl BoundParams {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(crate::rng::DEFAULT_SEED)
    }
}

#[allow(clippy::too_many_arguments)]
/// Monte Carlo check that `holds(record)` occurs in more than `required`
/// of the trials.
fn fraction_check(
    bound_id: &str,
    prep: &Prepared,
    learner: LearnerSpec,
    b: usize,
    a: usize,
    trials: usize,
    seed: u64,
    required: f64,
    holds: impl Fn(&TrialRecord) -> bool + Sync,
    mut details: Value,
) -> Result<BoundReport> {
    let records = cell_trials(prep, learner, b, a, trials, seed)?;
    let good = records.iter().filter(|r| holds(r)).count();
    let test = rate_exceeds(good, trials, required)?;
    let worst = records.iter().map(|r| r.err).fold(0.0, f64::max);
    if let Value::Object(map) = &mut details {
        map.insert("family".into(), json!(prep.instance.family));
        map.insert("learner".into(), json!(learner.name()));
        map.insert("b".into(), json!(b));
        map.insert("a".into(), json!(a));
        map.insert("trials".into(), json!(trials));
        map.insert("holding".into(), json!(good));
        map.insert("p_value".into(), json!(test.p_value));
        map.insert("worst_err".into(), json!(worst));
        map.insert("min_err".into(), json!(prep.approx_error));
        map.insert("seed".into(), json!(seed));
    }
    Ok(BoundReport {
        bound_id: bound_id.into(),
        lhs: good as f64 / trials as f64,
        rhs: required,
        pass: test.pass,
        details,
    })
}

/// `max((γ-α)/α, α/(γ-α))`, defined for `γ > α`.
pub fn lagrangian_factor(gamma: f64, alpha: f64) -> Result<f64> {
    if !(gamma > alpha && alpha > 0.0) {
        return Err(LabError::Precondition(format!(
            "need gamma > alpha > 0, got gamma = {gamma}, alpha = {alpha}"
        )));
    }
    let g = gamma - alpha;
    Ok((g / alpha).max(alpha / g))
}

pub fn verify_bound(bound_id: &str, params: &BoundParams) -> Result<BoundReport> {
    match bound_id {
        "scar_perm_upper" => {
            let spec = params.instance.clone().unwrap_or(InstanceSpec::ScarPos {
                d: 10,
                rho: 0.3,
                o: (0..9).collect(),
            });
            let eps = params.eps.unwrap_or(0.1);
            let delta = params.delta.unwrap_or(0.1);
            let b = params.b.unwrap_or(400);
            let prep = Prepared::new(spec.build()?)?;
            fraction_check(
                bound_id,
                &prep,
                LearnerSpec::Perm,
                b,
                params.a.unwrap_or(b),
                params.trials.unwrap_or(200),
                params.seed(),
                1.0 - delta,
                |r| r.excess < eps - FAILURE_SLACK,
                json!({"eps": eps, "delta": delta}),
            )
        }
        "sar_perm_upper" => {
            let r = params.r.unwrap_or(0.5);
            let spec = params.instance.clone().unwrap_or(InstanceSpec::Sar {
                d: 10,
                rho: 0.3,
                r,
                o: (0..9).collect(),
            });
            let eps = params.eps.unwrap_or(0.1);
            let delta = params.delta.unwrap_or(0.1);
            let b = params.b.unwrap_or(800);
            let prep = Prepared::new(spec.build()?)?;
            fraction_check(
                bound_id,
                &prep,
                LearnerSpec::Perm,
                b,
                params.a.unwrap_or(b),
                params.trials.unwrap_or(200),
                params.seed(),
                1.0 - delta,
                |rec| rec.excess < eps - FAILURE_SLACK,
                json!({"eps": eps, "delta": delta, "r": r}),
            )
        }
        "alg1_upper" => alg1_check(params),
        "lagrangian_factor" => {
            let spec = params.instance.clone().unwrap_or(InstanceSpec::ScarPos {
                d: 10,
                rho: 0.75,
                o: vec![],
            });
            let gamma = params.gamma.unwrap_or(1.0);
            lagrangian_check(bound_id, spec, gamma, params, false)
        }
        "lagrangian_known_alpha" => {
            let spec = params.instance.clone().unwrap_or(InstanceSpec::Agno {
                k: 3,
                rho: 0.2,
                o1: vec![1],
                o2: vec![1, 2],
            });
            let alpha = derive_views(&spec.build()?.d).alpha;
            lagrangian_check(bound_id, spec, 2.0 * alpha, params, false)
        }
        "apds_bound" => {
            let r = params.r.unwrap_or(0.5);
            let spec = params.instance.clone().unwrap_or(InstanceSpec::Sar {
                d: 6,
                rho: 0.6,
                r,
                o: vec![0, 1],
            });
            let gamma = params.gamma.unwrap_or(1.0);
            lagrangian_check(bound_id, spec, gamma, params, true)
        }
        "no_alpha_impossibility" => no_alpha_check(params.eta.unwrap_or(0.3)),
        "die_lower" => die_check(params),
        "claw_vcd_remark" => combinatorics_check(bound_id, params, |c| {
            let vc = vc_dimension(c);
            let m = c.n().min(63);
            let claw = claw_number_certified(c, m)?.value;
            // Only meaningful with room for a witness of size 2h.
            Ok((m >= 2 * claw).then_some(claw as i64 - vc as i64))
        }),
        "cdc_vcd_corollary" => combinatorics_check(bound_id, params, |c| {
            let vc = vc_dimension(c) as i64;
            let vcd = vc_dimension(&symmetric_difference_class(c)) as i64;
            Ok(Some(vcd - 2 * vc - 1))
        }),
        "epsnet_transfer" => {
            let trials = params.trials.unwrap_or(1000);
            let seed = params.seed();
            let outcomes: Vec<TransferOutcome> = (0..trials as u64)
                .into_par_iter()
                .map(|i| epsnet_transfer_trial(derive_seed(seed, 0xE5, i)))
                .collect::<Result<_>>()?;
            let counter: usize = outcomes.iter().map(|o| o.counterexamples).sum();
            let nets: usize = outcomes.iter().map(|o| o.nets_checked).sum();
            Ok(BoundReport {
                bound_id: bound_id.into(),
                lhs: counter as f64,
                rhs: 0.0,
                pass: counter == 0,
                details: json!({"triples": trials, "nets_for_q1": nets, "seed": seed}),
            })
        }
        other => Err(LabError::Usage(format!(
            "unknown bound {other}; expected one of {}",
            BOUND_IDS.join(", ")
        ))),
    }
}

fn lagrangian_check(
    bound_id: &str,
    spec: InstanceSpec,
    gamma: f64,
    params: &BoundParams,
    shifted: bool,
) -> Result<BoundReport> {
    let eps = params.eps.unwrap_or(0.1);
    let delta = params.delta.unwrap_or(0.025);
    let b = params.b.unwrap_or(2000);
    let prep = Prepared::new(spec.build()?)?;
    let views = derive_views(&prep.instance.d);
    let alpha = views.alpha;
    let factor = lagrangian_factor(gamma, alpha)?;
    let mut extra = 0.0;
    let mut details = json!({"eps": eps, "delta": delta, "gamma": gamma, "alpha": alpha, "factor": factor});
    if shifted {
        let class = prep
            .instance
            .class
            .as_ref()
            .ok_or_else(|| LabError::Usage("apds_bound needs a finite class".into()))?;
        let lambda = source_metrics(class, &prep.instance.d, &prep.instance.p)?.lambda_p;
        let cdc = symmetric_difference_class(class);
        let dist = b_distance(cdc.concepts(), &prep.instance.p, views.positive()?)?;
        extra = 2.0 * gamma * (lambda + dist);
        details["lambda_p"] = json!(lambda);
        details["d_cdc"] = json!(dist);
    }
    let min_err = prep.approx_error;
    let rhs = factor * (min_err + 2.0 * (1.0 + gamma) * eps + extra);
    details["err_bound"] = json!(rhs);
    let learner = LearnerSpec::Lagrangian { gamma };
    fraction_check(
        bound_id,
        &prep,
        learner,
        b,
        params.a.unwrap_or(b),
        params.trials.unwrap_or(200),
        params.seed(),
        1.0 - 4.0 * delta,
        |r| r.err <= rhs + FAILURE_SLACK,
        details,
    )
}

fn alg1_check(params: &BoundParams) -> Result<BoundReport> {
    let gamma = params.gamma.unwrap_or(0.25);
    let eps = params.eps.unwrap_or(0.1);
    let delta = params.delta.unwrap_or(0.1);
    let prep = Prepared::new(geometric_preset("alg1")?)?;
    let mut report = fraction_check(
        "alg1_upper",
        &prep,
        LearnerSpec::Algorithm1 { gamma },
        params.b.unwrap_or(500),
        params.a.unwrap_or(2000),
        params.trials.unwrap_or(200),
        params.seed(),
        1.0 - delta,
        |r| r.excess <= eps + FAILURE_SLACK,
        json!({"eps": eps, "delta": delta, "gamma": gamma}),
    )?;
    let stray = Prepared::new(geometric_preset("alg1_stray")?)?;
    let (rec, _) = run_trial(&stray, LearnerSpec::Algorithm1 { gamma }, 500, 2000, params.seed())?;
    let removed = rec.filter.map_or(0, |f| f.filtered_count);
    report.details["stray_filtered"] = json!(removed);
    report.details["stray_err"] = json!(rec.err);
    report.pass &= removed >= 1;
    Ok(report)
}

fn no_alpha_check(eta: f64) -> Result<BoundReport> {
    let (d0, d1) = no_alpha_pair(eta)?;
    let e = rational(eta, "eta")?;
    let one = Rational64::from_integer(1);
    let (hi, lo) = if e > one - e { (e, one - e) } else { (one - e, e) };
    // (max/min)·min err, with min err = min(η, 1-η) on both distributions.
    let rhs = hi / lo * lo;
    let line = crate::geometry::Geometry::new(1, vec![vec![0.5]], 0.5, 0.0)?;
    let learners = [
        LearnerSpec::Perm,
        LearnerSpec::Lagrangian { gamma: 0.5 },
        LearnerSpec::Lagrangian { gamma: 1.0 },
        LearnerSpec::Lagrangian { gamma: 2.0 },
        LearnerSpec::Algorithm1 { gamma: 0.5 },
    ];
    let mut worst = Vec::new();
    let mut pass = true;
    let mut lhs = one;
    for learner in learners {
        let mut errs = Vec::new();
        for inst in [&d0, &d1] {
            let mut inst = inst.clone();
            if matches!(learner, LearnerSpec::Algorithm1 { .. }) {
                inst.class = None;
                inst.geometry = Some(line.clone());
            }
            let prep = Prepared::new(inst)?;
            let (_, h) = run_trial(&prep, learner, 10, 10, 0)?;
            let predicts_one = h.realize(1, prep.instance.class.as_ref(), prep.instance.geometry.as_ref())?.contains(0);
            // err of the constant prediction, exactly.
            let pos: Rational64 = prep.instance.closed_forms.alpha.exact.parse().map_err(|_| {
                LabError::Parameter("alpha has no exact form".into())
            })?;
            errs.push(if predicts_one { one - pos } else { pos });
        }
        let w = errs[0].max(errs[1]);
        pass &= w >= rhs && w == hi;
        lhs = lhs.min(w);
        worst.push(json!({"learner": learner.name(), "worse_err": w.to_string()}));
    }
    Ok(BoundReport {
        bound_id: "no_alpha_impossibility".into(),
        lhs: crate::instances::to_f64(lhs),
        rhs: crate::instances::to_f64(rhs),
        pass,
        details: json!({"eta": eta, "learners": worst, "rhs_exact": rhs.to_string()}),
    })
}

/// Outcome of the weighted-die experiment: how often `L₀` errs by at least
/// `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DieRun {
    pub k: usize,
    pub eps: f64,
    pub rolls: usize,
    pub trials: usize,
    pub threshold: f64,
    pub hits: usize,
}

pub fn die_experiment(k: usize, eps: f64, trials: usize, threshold: f64, seed: u64) -> Result<DieRun> {
    let rolls = k * (1.0 / (2.0 * eps * eps)).floor() as usize;
    let hits: Vec<bool> = (0..trials as u64)
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let s = derive_seed(seed, 0xD1E, i);
            let mut rng = rng_from_seed(stream_seed(s, Stream::Instance));
            let o = uniform_die_set(k, &mut rng)?;
            let die = die_instance(k, eps, &o)?;
            let mut roll_rng = rng_from_seed(stream_seed(s, Stream::Positive));
            let h = die_learner_l0(&die.roll(rolls, &mut roll_rng), k)?;
            Ok(die_error(&h, k, &o)? >= threshold - FAILURE_SLACK)
        })
        .collect::<Result<_>>()?;
    Ok(DieRun {
        k,
        eps,
        rolls,
        trials,
        threshold,
        hits: hits.into_iter().filter(|&h| h).count(),
    })
}

fn die_check(params: &BoundParams) -> Result<BoundReport> {
    let k = params.k.unwrap_or(32);
    let eps = params.eps.unwrap_or(0.2);
    let trials = params.trials.unwrap_or(10_000);
    let run = die_experiment(k, eps, trials, 1.0 / 160.0, params.seed())?;
    let test = rate_exceeds(run.hits, trials, 1.0 / 320.0)?;
    Ok(BoundReport {
        bound_id: "die_lower".into(),
        lhs: run.hits as f64 / trials as f64,
        rhs: 1.0 / 320.0,
        pass: test.pass,
        details: json!({"k": k, "eps": eps, "rolls": run.rolls, "trials": trials, "hits": run.hits, "p_value": test.p_value}),
    })
}

/// Random class over `n` points with `size` distinct concepts.
pub fn random_class(n: usize, size: usize, seed: u64) -> Result<ConceptClass> {
    let mut rng = rng_from_seed(seed);
    let size = size.min(1 << n);
    let mut set = std::collections::BTreeSet::new();
    while set.len() < size {
        let mask: u64 = rng.random::<u64>() & ((1u64 << n) - 1);
        set.insert(Concept::from_mask(n, mask));
    }
    ConceptClass::new(n, set)
}

fn combinatorics_check(
    bound_id: &str,
    params: &BoundParams,
    gap: impl Fn(&ConceptClass) -> Result<Option<i64>> + Sync,
) -> Result<BoundReport> {
    let trials = params.trials.unwrap_or(200);
    let seed = params.seed();
    let gaps: Vec<Option<i64>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let s = derive_seed(seed, 0xC0, i);
            let mut rng = rng_from_seed(s);
            let n = rng.random_range(2..=8);
            let size = rng.random_range(1..=24);
            gap(&random_class(n, size, s ^ 1)?)
        })
        .collect::<Result<_>>()?;
    let checked: Vec<i64> = gaps.into_iter().flatten().collect();
    let worst = checked.iter().copied().max().unwrap_or(i64::MIN);
    Ok(BoundReport {
        bound_id: bound_id.into(),
        lhs: worst as f64,
        rhs: 0.0,
        pass: worst <= 0,
        details: json!({"classes": trials, "checked": checked.len(), "seed": seed}),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub nets_checked: usize,
    pub counterexamples: usize,
}

fn random_weights(rng: &mut crate::rng::LabRng, n: usize) -> Vec<i64> {
    loop {
        let w: Vec<i64> = (0..n)
            .map(|_| if rng.random_bool(0.25) { 0 } else { rng.random_range(1..=20) })
            .collect();
        if w.iter().any(|&x| x > 0) {
            return w;
        }
    }
}

/// One random triple `(B, Q1, Q2)` over 8 points with rational masses:
/// every `R·ε`-net for `Q1` among sets of at most 6 points must be an
/// `ε`-net for `Q2`, where `R = R_B(Q1, Q2)`.
pub fn epsnet_transfer_trial(seed: u64) -> Result<TransferOutcome> {
    const N: usize = 8;
    let mut rng = rng_from_seed(seed);
    let w1 = random_weights(&mut rng, N);
    let w2 = random_weights(&mut rng, N);
    let (t1, t2): (i64, i64) = (w1.iter().sum(), w2.iter().sum());
    let family_size = rng.random_range(1..=12);
    let family: Vec<u64> = (0..family_size).map(|_| rng.random_range(1..1u64 << N)).collect();
    let mass = |w: &[i64], t: i64, a: u64| -> Rational64 {
        Rational64::new((0..N).filter(|&j| a >> j & 1 == 1).map(|j| w[j]).sum(), t)
    };
    let ratio = family
        .iter()
        .filter(|&&a| mass(&w2, t2, a) > Rational64::from_integer(0))
        .map(|&a| mass(&w1, t1, a) / mass(&w2, t2, a))
        .min();
    let Some(ratio) = ratio else {
        return Ok(TransferOutcome { nets_checked: 0, counterexamples: 0 });
    };
    let eps = Rational64::new(rng.random_range(1..=100), 100);
    let is_net = |net: u64, w: &[i64], t: i64, level: Rational64| {
        family
            .iter()
            .all(|&a| mass(w, t, a) < level || a & net != 0)
    };
    let mut out = TransferOutcome { nets_checked: 0, counterexamples: 0 };
    for net in 0u64..1 << N {
        if net.count_ones() > 6 {
            continue;
        }
        if is_net(net, &w1, t1, ratio * eps) {
            out.nets_checked += 1;
            if !is_net(net, &w2, t2, eps) {
                out.counterexamples += 1;
            }
        }
    }
    Ok(out)
}
