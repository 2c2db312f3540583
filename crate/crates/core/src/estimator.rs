//! Weighted circuit-instance estimation.
//!
//! Instead of sampling every injection site independently, instances are
//! grouped by their error count k. Each level receives a quota C(k) of
//! distinct instances drawn without replacement, and each shot of an
//! instance at level k carries weight P(k)/C(k), where P(k) is the binomial
//! probability of exactly k injected errors.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::decoder::DecoderError;
use crate::noise::{derive_seed, rng_from_seed, FaultConfig};
use crate::pauli::{Pauli, PauliMask};
use crate::sim::{ShotOutcome, Simulator};

pub const DEFAULT_MIN_FRAC: f64 = 0.01;

/// Instance-seed stream reserved for drawing; shot seeds use instance ids.
const DRAW_STREAM: u64 = 0x6472_6177;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("error probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("instance budget must be at least 1")]
    EmptyBudget,
    #[error("minimum fraction {0} outside [0, 1]")]
    InvalidFraction(f64),
    #[error("instance {instance} has {got} shots, expected {want}")]
    Incomplete { instance: usize, got: usize, want: usize },
    #[error("shot table has {got} instances, plan has {want}")]
    InstanceCount { got: usize, want: usize },
    #[error("no accepted shot at shot index {0}")]
    Starvation(usize),
    #[error("instance site {0} is not in the circuit")]
    UnknownSite(u32),
    #[error("shot table: {0}")]
    Table(String),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Binomial probabilities of exactly k errors among `n` sites at rate `rp`.
pub fn binomial_pmf(n: usize, rp: f64) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if rp == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let q = 1.0 - rp;
    let mut binom = 1.0f64;
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            binom = binom * (n + 1 - k) as f64 / k as f64;
        }
        *slot = binom * rp.powi(k as i32) * q.powi((n - k) as i32);
    }
    out
}

/// Distinct instances with exactly k errors: 3^k · C(n, k), saturating.
pub fn available_instances(n: usize, k: usize) -> u64 {
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    let mut v = c;
    for _ in 0..k {
        v = v.saturating_mul(3);
        if v > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    v.min(u64::MAX as u128) as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstancePlan {
    pub n_loc: usize,
    pub rp: f64,
    pub n_total: u64,
    pub min_frac: f64,
    /// Levels with a nonzero quota only.
    pub quotas: BTreeMap<usize, u64>,
    /// P(k) for every level 0..=n_loc.
    pub weights: Vec<f64>,
}

impl InstancePlan {
    pub fn instance_count(&self) -> u64 {
        self.quotas.values().sum()
    }

    pub fn quota(&self, k: usize) -> u64 {
        self.quotas.get(&k).copied().unwrap_or(0)
    }

    /// Probability mass of levels that received no instances.
    pub fn uncovered_mass(&self) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(k, _)| !self.quotas.contains_key(k))
            .map(|(_, p)| p)
            .sum()
    }

    /// Weight P(k)/C(k) carried by each shot-averaged instance at level k.
    pub fn instance_weight(&self, k: usize) -> f64 {
        match self.quotas.get(&k) {
            Some(&c) if c > 0 => self.weights[k] / c as f64,
            _ => 0.0,
        }
    }
}

/// Quotas per error count.
///
/// Every level with P(k) > 0 is first given a floor of ⌈min_frac·N⌉
/// instances (or all of its instances when fewer exist), visiting k upward
/// while the budget lasts. The rest of the budget is water-filled in
/// proportion to P(k) under each level's availability cap and rounded by
/// largest remainder. The total is min(N, instances available).
pub fn plan_instances(n_loc: usize, rp: f64, n_total: u64, min_frac: f64) -> Result<InstancePlan, EstimatorError> {
    if !(0.0..1.0).contains(&rp) {
        return Err(EstimatorError::InvalidProbability(rp));
    }
    if n_total == 0 {
        return Err(EstimatorError::EmptyBudget);
    }
    if !(0.0..=1.0).contains(&min_frac) {
        return Err(EstimatorError::InvalidFraction(min_frac));
    }
    let weights = binomial_pmf(n_loc, rp);
    let levels: Vec<usize> = (0..=n_loc).filter(|&k| weights[k] > 0.0).collect();
    let avail: Vec<u64> = (0..=n_loc).map(|k| available_instances(n_loc, k)).collect();
    let total_avail = levels.iter().fold(0u64, |s, &k| s.saturating_add(avail[k]));
    let budget = n_total.min(total_avail);

    let floor_n = ((min_frac * n_total as f64).ceil() as u64).max(1);
    let mut floor = vec![0u64; n_loc + 1];
    let mut left = budget;
    for &k in &levels {
        let f = floor_n.min(avail[k]).min(left);
        floor[k] = f;
        left -= f;
    }

    // Real-valued quotas min(avail, max(floor, λ·P(k))) with Σ = budget.
    let fill = |lambda: f64| -> Vec<f64> {
        (0..=n_loc)
            .map(|k| {
                if weights[k] == 0.0 {
                    0.0
                } else {
                    (lambda * weights[k]).max(floor[k] as f64).min(avail[k] as f64)
                }
            })
            .collect()
    };
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    let target = budget as f64;
    let mut real = fill(0.0);
    if sum(&real) < target {
        let (mut lo, mut hi) = (0.0f64, target);
        while sum(&fill(hi)) < target {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sum(&fill(mid)) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        real = fill(hi);
    }

    // Largest remainder, never below the floor or above availability.
    let mut quota: Vec<u64> = real.iter().map(|&x| x.floor() as u64).collect();
    for k in 0..=n_loc {
        quota[k] = quota[k].max(floor[k]);
    }
    let mut assigned: u64 = quota.iter().sum();
    let mut order: Vec<usize> = levels.clone();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (real[a] - real[a].floor(), real[b] - real[b].floor());
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    while assigned < budget {
        let before = assigned;
        for &k in &order {
            if assigned == budget {
                break;
            }
            if quota[k] < avail[k] {
                quota[k] += 1;
                assigned += 1;
            }
        }
        if assigned == before {
            break;
        }
    }
    // bisection slack can leave one unit too many; take it from the level
    // furthest above its floor
    while assigned > budget {
        let k = levels
            .iter()
            .copied()
            .max_by_key(|&k| (quota[k] - floor[k], std::cmp::Reverse(k)))
            .expect("non-empty levels");
        quota[k] -= 1;
        assigned -= 1;
    }

    let quotas = (0..=n_loc).filter(|&k| quota[k] > 0).map(|k| (k, quota[k])).collect();
    Ok(InstancePlan {
        n_loc,
        rp,
        n_total,
        min_frac,
        quotas,
        weights,
    })
}

/// A fixed Pauli assignment to `k` injection sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    pub k: usize,
    pub sites: Vec<u32>,
    /// One of `X`, `Y`, `Z` per site.
    pub paulis: String,
}

impl Instance {
    pub fn letters(&self) -> impl Iterator<Item = Pauli> + '_ {
        self.paulis.chars().map(|c| Pauli::from_letter(c).expect("validated letters"))
    }

    /// Forced faults as `(op index, mask)` pairs sorted by op.
    pub fn forced(&self, c: &Circuit) -> Result<Vec<(usize, PauliMask)>, EstimatorError> {
        let ops = c.site_ops();
        let mut out = Vec::with_capacity(self.k);
        for (&site, p) in self.sites.iter().zip(self.letters()) {
            let &op = ops.get(&site).ok_or(EstimatorError::UnknownSite(site))?;
            let q = c.ops[op].qubits()[0];
            out.push((op, PauliMask::single(q, p)));
        }
        out.sort_by_key(|&(op, _)| op);
        Ok(out)
    }

    pub fn fault_config(&self, c: &Circuit) -> Result<FaultConfig, EstimatorError> {
        let mut cfg = FaultConfig::default();
        for (op, m) in self.forced(c)? {
            cfg.assignment
                .insert(crate::circuit::Location { op }, m.to_term(c.n_qubits));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSet {
    pub instances: Vec<Instance>,
    pub shots_per_instance: u64,
}

/// Lexicographic rank → k-subset of 0..n.
fn unrank_subset(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for remaining in (1..=k).rev() {
        loop {
            // subsets that start with `next`
            let c = binom(n - next - 1, remaining - 1);
            if rank < c {
                out.push(next);
                next += 1;
                break;
            }
            rank -= c;
            next += 1;
        }
    }
    out
}

fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c.min(u64::MAX as u128) as u64
}

fn instance_from_index(sites: &[u32], k: usize, idx: u64) -> Instance {
    let pow3 = 3u64.pow(k as u32);
    let (subset_rank, mut letters) = (idx / pow3, idx % pow3);
    let subset = unrank_subset(sites.len(), k, subset_rank);
    let mut paulis = String::with_capacity(k);
    for _ in 0..k {
        paulis.push(Pauli::NON_IDENTITY[(letters % 3) as usize].letter());
        letters /= 3;
    }
    Instance {
        k,
        sites: subset.iter().map(|&i| sites[i]).collect(),
        paulis,
    }
}

/// Draws each level's quota uniformly without replacement from the
/// (site subset × Pauli letters) space; a level whose quota equals its
/// availability is enumerated in full. Deterministic per seed.
pub fn draw_instances(plan: &InstancePlan, sites: &[u32], shots: u64, seed: u64) -> InstanceSet {
    assert_eq!(sites.len(), plan.n_loc, "plan was made for another site count");
    let mut instances = Vec::with_capacity(plan.instance_count() as usize);
    for (&k, &quota) in &plan.quotas {
        let avail = available_instances(plan.n_loc, k);
        let mut picks: Vec<u64> = if quota >= avail {
            (0..avail).collect()
        } else {
            let mut rng = rng_from_seed(derive_seed(seed, DRAW_STREAM, k as u64));
            index::sample(&mut rng, avail as usize, quota as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect()
        };
        picks.sort_unstable();
        instances.extend(picks.into_iter().map(|i| instance_from_index(sites, k, i)));
    }
    InstanceSet {
        instances,
        shots_per_instance: shots,
    }
}

impl InstanceSet {
    /// True when no level repeats an instance.
    pub fn is_duplicate_free(&self) -> bool {
        let mut seen = HashSet::new();
        self.instances.iter().all(|i| seen.insert(i))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance sets serialize")
    }
}

/// Per instance, per shot: `Some(value)` if the shot was accepted.
pub type ShotTable = Vec<Vec<Option<f64>>>;

/// Raw outcomes of every instance, `shots_per_instance` each. Shot `s` of
/// instance `i` uses seed `derive_seed(seed, i, s)`.
pub fn simulate_outcomes(sim: &Simulator, set: &InstanceSet, seed: u64) -> Result<Vec<Vec<ShotOutcome>>, EstimatorError> {
    let forced: Vec<Vec<(usize, PauliMask)>> = set
        .instances
        .iter()
        .map(|inst| inst.forced(sim.circuit()))
        .collect::<Result<_, _>>()?;
    Ok(forced
        .par_iter()
        .enumerate()
        .map(|(i, f)| sim.shots(f, set.shots_per_instance, seed, i as u64))
        .collect())
}

/// Observable values of accepted shots.
pub fn outcome_table<F>(outcomes: &[Vec<ShotOutcome>], value: F) -> Result<ShotTable, EstimatorError>
where
    F: Fn(&ShotOutcome) -> Result<f64, DecoderError> + Sync,
{
    outcomes
        .par_iter()
        .map(|row| {
            row.iter()
                .map(|o| o.accepted.then(|| value(o)).transpose().map_err(EstimatorError::from))
                .collect()
        })
        .collect()
}

/// Runs every instance and evaluates `value` on accepted shots.
pub fn simulate_instances<F>(
    sim: &Simulator,
    set: &InstanceSet,
    seed: u64,
    value: F,
) -> Result<ShotTable, EstimatorError>
where
    F: Fn(&ShotOutcome) -> Result<f64, DecoderError> + Sync,
{
    outcome_table(&simulate_outcomes(sim, set, seed)?, value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Σ_k P(k) over levels with instances.
    pub covered_mass: f64,
    pub acceptance: f64,
}

/// Weighted mean (1/S)·Σ P(k)·O/C(k) and the spread of the per-shot-index
/// means Ō_s. With post-selection each Ō_s, and the mean, become ratios of
/// accepted-weighted sums, so the estimate is renormalized to the accepted
/// probability mass.
pub fn estimate_expectation(
    set: &InstanceSet,
    plan: &InstancePlan,
    table: &ShotTable,
    postselected: bool,
) -> Result<Estimate, EstimatorError> {
    if table.len() != set.instances.len() {
        return Err(EstimatorError::InstanceCount {
            got: table.len(),
            want: set.instances.len(),
        });
    }
    let s = set.shots_per_instance as usize;
    for (i, row) in table.iter().enumerate() {
        if row.len() != s {
            return Err(EstimatorError::Incomplete {
                instance: i,
                got: row.len(),
                want: s,
            });
        }
    }
    let mut num = vec![0.0; s];
    let mut den = vec![0.0; s];
    let mut accepted = 0usize;
    for (inst, row) in set.instances.iter().zip(table) {
        let w = plan.instance_weight(inst.k);
        for (j, v) in row.iter().enumerate() {
            if let Some(v) = v {
                num[j] += w * v;
                den[j] += w;
                accepted += 1;
            }
        }
    }
    let covered_mass = 1.0 - plan.uncovered_mass();
    let per_shot: Vec<f64> = if postselected {
        (0..s)
            .map(|j| {
                if den[j] > 0.0 {
                    Ok(num[j] / den[j])
                } else {
                    Err(EstimatorError::Starvation(j))
                }
            })
            .collect::<Result<_, _>>()?
    } else {
        num.clone()
    };
    let mean = if postselected {
        let d: f64 = den.iter().sum();
        if d == 0.0 {
            return Err(EstimatorError::Starvation(0));
        }
        num.iter().sum::<f64>() / d
    } else {
        num.iter().sum::<f64>() / s as f64
    };
    let stderr = if s > 1 {
        let avg = per_shot.iter().sum::<f64>() / s as f64;
        (per_shot.iter().map(|o| (o - avg).powi(2)).sum::<f64>() / (s * (s - 1)) as f64).sqrt()
    } else {
        0.0
    };
    let total = (s * set.instances.len()).max(1);
    Ok(Estimate {
        mean,
        stderr,
        covered_mass,
        acceptance: accepted as f64 / total as f64,
    })
}

/// Writes outcomes as `instance_id,shot_id,accepted,<record labels...>`.
pub fn write_shots_csv<W: Write>(
    w: W,
    c: &Circuit,
    rows: impl IntoIterator<Item = (u64, u64, ShotOutcome)>,
) -> Result<(), EstimatorError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["instance_id".to_string(), "shot_id".into(), "accepted".into()];
    header.extend(c.records.iter().cloned());
    out.write_record(&header)?;
    for (inst, shot, o) in rows {
        let mut rec = vec![inst.to_string(), shot.to_string(), u8::from(o.accepted).to_string()];
        rec.extend((0..c.n_records()).map(|r| u8::from(o.bit(r)).to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a shot CSV back into a table of observable values. Rows may come
/// in any order; every (instance, shot) pair must be present exactly once.
pub fn read_shots_csv<R: Read, F>(r: R, c: &Circuit, set: &InstanceSet, value: F) -> Result<ShotTable, EstimatorError>
where
    F: Fn(&ShotOutcome) -> Result<f64, DecoderError>,
{
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    let labels: Vec<&str> = header.iter().skip(3).collect();
    if header.len() < 3 || labels != c.records.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(EstimatorError::Table("header does not match the circuit records".into()));
    }
    let s = set.shots_per_instance as usize;
    let mut cells: Vec<Vec<Option<Option<f64>>>> = vec![vec![None; s]; set.instances.len()];
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<u64, EstimatorError> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| EstimatorError::Table(format!("bad field {i} in {:?}", rec)))
        };
        let (inst, shot) = (num(0)? as usize, num(1)? as usize);
        if inst >= cells.len() || shot >= s {
            return Err(EstimatorError::Table(format!("row ({inst}, {shot}) outside the instance set")));
        }
        let mut bits = 0u128;
        for r in 0..c.n_records() {
            if num(3 + r)? == 1 {
                bits |= 1 << r;
            }
        }
        let o = ShotOutcome {
            bits,
            accepted: num(2)? == 1,
        };
        let v = o.accepted.then(|| value(&o)).transpose()?;
        if cells[inst][shot].replace(v).is_some() {
            return Err(EstimatorError::Table(format!("duplicate row ({inst}, {shot})")));
        }
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let got = row.iter().filter(|c| c.is_some()).count();
            if got != s {
                return Err(EstimatorError::Incomplete {
                    instance: i,
                    got,
                    want: s,
                });
            }
            Ok(row.into_iter().map(Option::unwrap).collect())
        })
        .collect()
}
