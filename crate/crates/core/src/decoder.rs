//! Detector graphs and exact minimum-weight perfect matching.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::codes::{BuiltCode, MAX_DETECTORS};
use crate::noise::NoiseModel;
use crate::pauli::{Pauli, PauliMask};
use crate::sim::{SimError, Simulator};

/// Largest defect set the subset dynamic program accepts.
pub const MAX_DEFECTS: usize = 16;

/// Clusters above this size go to the blossom matcher, which is cheaper than
/// the 2^n program well before its cap.
pub const DP_CUTOFF: usize = 10;

/// Largest fault-pattern count an exhaustive distance check enumerates.
pub const MAX_PATTERNS: f64 = 1e9;

/// Fixed-point scale for blossom edge weights.
const BLOSSOM_SCALE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecoderError {
    #[error("fault at op {op} fires {fired} detectors; not matchable")]
    HyperEdge { op: usize, fired: usize },
    #[error("capacity: {got} defects, exact matcher limit {limit}")]
    TooManyDefects { got: usize, limit: usize },
    #[error("capacity: {got:.3e} fault patterns, limit {limit:.0e}")]
    TooManyPatterns { got: f64, limit: f64 },
    #[error("code has {0} detectors, limit {MAX_DETECTORS}")]
    TooManyDetectors(usize),
    #[error("defect {0} cannot reach any partner or the boundary")]
    Unmatchable(usize),
    #[error("detector {0} outside the graph")]
    UnknownDetector(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub a: usize,
    /// `None` is the boundary.
    pub b: Option<usize>,
    pub p: f64,
    pub weight: f64,
    pub flip: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorGraph {
    pub n_nodes: usize,
    pub edges: Vec<Edge>,
    /// All-pairs shortest distances over nodes plus the boundary (last index).
    dist: Vec<f64>,
    /// Logical flip along each shortest path.
    path_flip: Vec<bool>,
}

/// Detectors fired and logical parity flipped by a record-flip word.
fn signature(code: &BuiltCode, flips: u128) -> (u64, bool) {
    (code.syndrome_flips(flips), code.logical_parity(flips))
}

impl BuiltCode {
    /// Detectors whose parity changes under a record-flip word.
    pub fn syndrome_flips(&self, flips: u128) -> u64 {
        let mut s = 0u64;
        for (i, det) in self.detectors.iter().enumerate() {
            if det.records.iter().filter(|&&r| (flips >> r) & 1 == 1).count() & 1 == 1 {
                s |= 1 << i;
            }
        }
        s
    }
}

fn split_css(m: PauliMask) -> [PauliMask; 2] {
    [PauliMask { x: m.x, z: 0 }, PauliMask { x: 0, z: m.z }]
}

fn split_qubits(m: PauliMask) -> Vec<PauliMask> {
    let mut out = Vec::new();
    let support = m.x | m.z;
    for q in 0..64 {
        if (support >> q) & 1 == 1 {
            out.push(PauliMask::single(q, m.get(q)));
        }
    }
    out
}

/// Graph of single-fault mechanisms of `m` on `code`. X and Z components are
/// separated first; a component firing more than two detectors is further
/// split per qubit, and an irreducible one is a hyperedge error.
pub fn build_detector_graph(code: &BuiltCode, m: &NoiseModel) -> Result<DetectorGraph, DecoderError> {
    let n = code.detectors.len();
    if n > MAX_DETECTORS {
        return Err(DecoderError::TooManyDetectors(n));
    }
    let sim = Simulator::new(&code.circuit, m)?;
    let bound = sim.bound();
    // key (a, b) with b = n for the boundary
    let mut merged: BTreeMap<(usize, usize), (f64, bool)> = BTreeMap::new();
    // Terms of one channel are exclusive, so their probabilities add per
    // mechanism; distinct channels combine as independent events.
    for (op, ch) in bound.noisy_ops() {
        let scale = ch.factor(bound.r);
        let mut local: BTreeMap<(usize, usize, bool), f64> = BTreeMap::new();
        let mut add = |sig: u64, flip: bool, p: f64| {
            let mut it = (0..n).filter(|i| (sig >> i) & 1 == 1);
            let a = it.next().expect("non-empty signature");
            let b = it.next().unwrap_or(n);
            *local.entry((a, b, flip)).or_insert(0.0) += p;
        };
        for &(mask, p0) in &ch.terms {
            let p = p0 * scale;
            if p <= 0.0 {
                continue;
            }
            for part in split_css(mask) {
                if part.is_identity() {
                    continue;
                }
                let (sig, flip) = signature(code, sim.fault_flips(&[(op, part)])?);
                if sig.count_ones() <= 2 {
                    if sig != 0 {
                        add(sig, flip, p);
                    }
                    continue;
                }
                for piece in split_qubits(part) {
                    let (sig, flip) = signature(code, sim.fault_flips(&[(op, piece)])?);
                    if sig.count_ones() > 2 {
                        return Err(DecoderError::HyperEdge {
                            op,
                            fired: sig.count_ones() as usize,
                        });
                    }
                    if sig != 0 {
                        add(sig, flip, p);
                    }
                }
            }
        }
        for ((a, b, flip), p) in local {
            merged
                .entry((a, b))
                .and_modify(|(q, f)| {
                    if *f == flip {
                        *q = *q * (1.0 - p) + p * (1.0 - *q);
                    } else if p > *q {
                        *q = p;
                        *f = flip;
                    }
                })
                .or_insert((p, flip));
        }
    }
    let edges = merged
        .into_iter()
        .map(|((a, b), (p, flip))| Edge {
            a,
            b: (b < n).then_some(b),
            p,
            weight: -p.ln(),
            flip,
        })
        .collect();
    Ok(DetectorGraph::new(n, edges))
}

impl DetectorGraph {
    pub fn new(n_nodes: usize, edges: Vec<Edge>) -> Self {
        let v = n_nodes + 1;
        let mut dist = vec![f64::INFINITY; v * v];
        let mut path_flip = vec![false; v * v];
        for i in 0..v {
            dist[i * v + i] = 0.0;
        }
        for e in &edges {
            let b = e.b.unwrap_or(n_nodes);
            for (x, y) in [(e.a, b), (b, e.a)] {
                if e.weight < dist[x * v + y] {
                    dist[x * v + y] = e.weight;
                    path_flip[x * v + y] = e.flip;
                }
            }
        }
        for k in 0..v {
            for i in 0..v {
                let dik = dist[i * v + k];
                if !dik.is_finite() {
                    continue;
                }
                for j in 0..v {
                    let cand = dik + dist[k * v + j];
                    if cand < dist[i * v + j] {
                        dist[i * v + j] = cand;
                        path_flip[i * v + j] = path_flip[i * v + k] ^ path_flip[k * v + j];
                    }
                }
            }
        }
        DetectorGraph {
            n_nodes,
            edges,
            dist,
            path_flip,
        }
    }

    pub fn boundary(&self) -> usize {
        self.n_nodes
    }

    /// Shortest distance between two nodes; `boundary()` names the boundary.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a * (self.n_nodes + 1) + b]
    }

    pub fn path_flip(&self, a: usize, b: usize) -> bool {
        self.path_flip[a * (self.n_nodes + 1) + b]
    }

    /// `NODE <id>` and `EDGE <a> <b|BOUNDARY> w=<float> flip=<bit>` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n_nodes {
            writeln!(out, "NODE {i}").unwrap();
        }
        for e in &self.edges {
            let b = e.b.map_or("BOUNDARY".to_string(), |b| b.to_string());
            writeln!(
                out,
                "EDGE {} {} w={} flip={}",
                e.a,
                b,
                crate::circuit::format_sig12(e.weight),
                u8::from(e.flip)
            )
            .unwrap();
        }
        out
    }
}

/// Minimum-weight perfect matching of `defects` (each paired with another
/// defect or the boundary). Returns the total weight and the partner list,
/// `None` meaning the boundary. Equal-weight alternatives resolve to the
/// lexicographically first pairing.
///
/// Above [`DP_CUTOFF`] the defects are split into clusters first. Two
/// defects whose distance is not below their summed boundary distances never
/// need to be paired (equal cost goes to the boundary), so the connected
/// components of the remaining pairs are matched independently. A cluster
/// larger than the cutoff is matched by the blossom algorithm on fixed-point
/// weights, optimal to within 1e-12 per pair.
pub fn min_weight_matching(g: &DetectorGraph, defects: &[usize]) -> Result<(f64, Vec<(usize, Option<usize>)>), DecoderError> {
    if let Some(&d) = defects.iter().find(|&&d| d >= g.n_nodes) {
        return Err(DecoderError::UnknownDetector(d));
    }
    if defects.len() <= DP_CUTOFF {
        return match_exact(g, defects);
    }
    match_clustered(g, defects)
}

fn match_clustered(g: &DetectorGraph, defects: &[usize]) -> Result<(f64, Vec<(usize, Option<usize>)>), DecoderError> {
    let bnd = g.boundary();
    let n = defects.len();
    let mut comp: Vec<usize> = (0..n).collect();
    fn root(comp: &mut [usize], mut i: usize) -> usize {
        while comp[i] != i {
            comp[i] = comp[comp[i]];
            i = comp[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (defects[i], defects[j]);
            let apart = g.distance(a, bnd) + g.distance(b, bnd);
            // a path through the boundary costs exactly `apart`, so only a
            // strictly shorter one ties the two defects together
            if g.distance(a, b) < apart - 1e-12 * apart.abs().max(1.0) || !apart.is_finite() {
                let (ri, rj) = (root(&mut comp, i), root(&mut comp, j));
                comp[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = root(&mut comp, i);
        clusters.entry(r).or_default().push(defects[i]);
    }
    let mut total = 0.0;
    let mut pairs = Vec::with_capacity(n);
    for members in clusters.values() {
        let (w, p) = if members.len() <= DP_CUTOFF {
            match_exact(g, members)?
        } else {
            match_blossom(g, members)?
        };
        total += w;
        pairs.extend(p);
    }
    pairs.sort_by_key(|&(a, _)| a);
    Ok((total, pairs))
}

fn match_exact(g: &DetectorGraph, defects: &[usize]) -> Result<(f64, Vec<(usize, Option<usize>)>), DecoderError> {
    let n = defects.len();
    if n > MAX_DEFECTS {
        return Err(DecoderError::TooManyDefects {
            got: n,
            limit: MAX_DEFECTS,
        });
    }
    let bnd = g.boundary();
    let size = 1usize << n;
    let mut best = vec![f64::INFINITY; size];
    // partner index into `defects`, n for the boundary
    let mut choice = vec![u8::MAX; size];
    best[0] = 0.0;
    for mask in 1..size {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut b = f64::INFINITY;
        let mut c = u8::MAX;
        let mut consider = |cost: f64, who: usize| {
            if cost.is_finite() && (!b.is_finite() || cost < b - 1e-12 * b.abs().max(1.0)) {
                b = cost;
                c = who as u8;
            }
        };
        for j in i + 1..n {
            if rest & (1 << j) != 0 {
                consider(g.distance(defects[i], defects[j]) + best[rest & !(1 << j)], j);
            }
        }
        consider(g.distance(defects[i], bnd) + best[rest], n);
        best[mask] = b;
        choice[mask] = c;
    }
    let total = best[size - 1];
    if !total.is_finite() {
        let stuck = defects
            .iter()
            .copied()
            .find(|&d| g.distance(d, bnd).is_infinite() && defects.iter().all(|&e| e == d || g.distance(d, e).is_infinite()))
            .unwrap_or(defects[0]);
        return Err(DecoderError::Unmatchable(stuck));
    }
    let mut pairs = Vec::with_capacity(n);
    let mut mask = size - 1;
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let j = choice[mask] as usize;
        if j == n {
            pairs.push((defects[i], None));
            mask &= !(1 << i);
        } else {
            pairs.push((defects[i], Some(defects[j])));
            mask &= !((1 << i) | (1 << j));
        }
    }
    Ok((total, pairs))
}

/// Each defect i gets a boundary twin n+i joined to it at the boundary
/// distance; twins pair among themselves for free. A perfect matching of
/// maximum weight C − cost is then a minimum-weight boundary matching.
fn match_blossom(g: &DetectorGraph, defects: &[usize]) -> Result<(f64, Vec<(usize, Option<usize>)>), DecoderError> {
    let n = defects.len();
    let bnd = g.boundary();
    let mut costs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            costs.push((i, j, g.distance(defects[i], defects[j])));
        }
        costs.push((i, n + i, g.distance(defects[i], bnd)));
    }
    costs.retain(|c| c.2.is_finite());
    let top = costs.iter().map(|c| (c.2 * BLOSSOM_SCALE).round() as i64).max().unwrap_or(0) + 1;
    let mut edges: Vec<(usize, usize, i64)> = costs
        .iter()
        .map(|&(i, j, c)| (i, j, top - (c * BLOSSOM_SCALE).round() as i64))
        .collect();
    for i in n..2 * n {
        for j in i + 1..2 * n {
            edges.push((i, j, top));
        }
    }
    let mate = crate::blossom::max_weight_matching(2 * n, &edges, true);
    let mut total = 0.0;
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        match mate[i] {
            Some(j) if j == n + i => {
                total += g.distance(defects[i], bnd);
                pairs.push((defects[i], None));
            }
            Some(j) if j < n => {
                if i < j {
                    total += g.distance(defects[i], defects[j]);
                    pairs.push((defects[i], Some(defects[j])));
                }
            }
            _ => return Err(DecoderError::Unmatchable(defects[i])),
        }
    }
    Ok((total, pairs))
}

fn defects_of(syndrome: u64) -> Vec<usize> {
    (0..64).filter(|i| (syndrome >> i) & 1 == 1).collect()
}

/// Logical flip predicted by exact matching of the fired detectors.
pub fn decode_mwpm(g: &DetectorGraph, syndrome: u64) -> Result<bool, DecoderError> {
    if syndrome == 0 {
        return Ok(false);
    }
    let defects = defects_of(syndrome);
    let (_, pairs) = min_weight_matching(g, &defects)?;
    Ok(pairs
        .iter()
        .fold(false, |acc, &(a, b)| acc ^ g.path_flip(a, b.unwrap_or(g.boundary()))))
}

/// Syndrome table for small codes, filled by matching every syndrome that at
/// most two graph edges produce.
#[derive(Clone, Debug)]
pub struct LookupDecoder {
    table: HashMap<u64, bool>,
}

fn edge_syndrome(e: &Edge) -> u64 {
    (1u64 << e.a) ^ e.b.map_or(0, |b| 1u64 << b)
}

impl LookupDecoder {
    pub fn build(g: &DetectorGraph) -> Result<Self, DecoderError> {
        let sigs: Vec<u64> = g.edges.iter().map(edge_syndrome).collect();
        let mut table = HashMap::new();
        table.insert(0, false);
        for (i, &a) in sigs.iter().enumerate() {
            for &b in std::iter::once(&0).chain(&sigs[i..]) {
                let s = a ^ b;
                if let std::collections::hash_map::Entry::Vacant(e) = table.entry(s) {
                    e.insert(decode_mwpm(g, s)?);
                }
            }
        }
        Ok(LookupDecoder { table })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, syndrome: u64) -> Option<bool> {
        self.table.get(&syndrome).copied()
    }

    /// Table entry, or exact matching when the syndrome is not tabulated.
    pub fn decode(&self, g: &DetectorGraph, syndrome: u64) -> Result<bool, DecoderError> {
        match self.get(syndrome) {
            Some(f) => Ok(f),
            None => decode_mwpm(g, syndrome),
        }
    }
}

pub fn decode_lookup_d3(s: u64, table: &LookupDecoder, g: &DetectorGraph) -> Result<bool, DecoderError> {
    table.decode(g, s)
}

/// Decoded logical readout of a code: ±1 per shot after matching the fired
/// detectors, or the plain logical parity for codes that correct themselves.
#[derive(Clone, Debug)]
pub struct LogicalDecoder {
    code: BuiltCode,
    graph: Option<(DetectorGraph, LookupDecoder)>,
}

impl LogicalDecoder {
    /// Decoder for `code` with the graph of model `m`.
    pub fn new(code: &BuiltCode, m: &NoiseModel) -> Result<Self, DecoderError> {
        let graph = match code.logical.decoder {
            Some(_) => {
                let g = build_detector_graph(code, m)?;
                let t = LookupDecoder::build(&g)?;
                Some((g, t))
            }
            None => None,
        };
        Ok(LogicalDecoder {
            code: code.clone(),
            graph,
        })
    }

    pub fn graph(&self) -> Option<&DetectorGraph> {
        self.graph.as_ref().map(|(g, _)| g)
    }

    pub fn flip(&self, bits: u128) -> Result<bool, DecoderError> {
        let raw = self.code.logical_parity(bits);
        match &self.graph {
            Some((g, t)) => Ok(raw ^ t.decode(g, self.code.syndrome(bits))?),
            None => Ok(raw),
        }
    }

    pub fn value(&self, bits: u128) -> Result<f64, DecoderError> {
        Ok(if self.flip(bits)? { -1.0 } else { 1.0 })
    }
}

/// Panics on a capacity error; exact enumeration never produces one on the
/// small codes it can handle.
impl crate::sim::Observable for LogicalDecoder {
    fn eval(&self, bits: u128) -> f64 {
        self.value(bits).expect("decodable syndrome")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub t: usize,
    pub locations: usize,
    pub patterns: u64,
    pub failures: u64,
    /// Smallest weight ≤ t with a decoding failure.
    pub min_failing_weight: Option<usize>,
    /// Op/letter list of the first failing pattern.
    pub first_failure: Option<Vec<(usize, char)>>,
}

impl DistanceReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Decodes every pattern of at most `t` single-qubit Pauli faults on the
/// noisy locations of `m` and counts logical failures.
pub fn verify_distance(code: &BuiltCode, m: &NoiseModel, t: usize) -> Result<DistanceReport, DecoderError> {
    let g = build_detector_graph(code, m)?;
    let sim = Simulator::new(&code.circuit, m)?;
    // every non-identity single-qubit Pauli on each noisy qubit of a location
    let mut locations: Vec<(usize, Vec<PauliMask>)> = Vec::new();
    for (op, ch) in sim.bound().noisy_ops() {
        if ch.terms.iter().all(|&(_, p)| p == 0.0) {
            continue;
        }
        let qubits = code.circuit.ops[op].qubits();
        let mut letters = Vec::new();
        for &q in &qubits {
            for p in Pauli::NON_IDENTITY {
                letters.push(PauliMask::single(q, p));
            }
        }
        locations.push((op, letters));
    }
    // Σ over weights ≤ t of the elementary symmetric sums of letter counts
    let mut esym = vec![0.0f64; t + 1];
    esym[0] = 1.0;
    for (_, letters) in &locations {
        for w in (1..=t).rev() {
            esym[w] += esym[w - 1] * letters.len() as f64;
        }
    }
    let total: f64 = esym[1..].iter().sum();
    if total > MAX_PATTERNS {
        return Err(DecoderError::TooManyPatterns {
            got: total,
            limit: MAX_PATTERNS,
        });
    }
    let mut report = DistanceReport {
        t,
        locations: locations.len(),
        patterns: 0,
        failures: 0,
        min_failing_weight: None,
        first_failure: None,
    };
    for w in 1..=t.min(locations.len()) {
        let combos = combinations(locations.len(), w);
        let results: Vec<(u64, u64, Option<Vec<(usize, PauliMask)>>)> = combos
            .par_iter()
            .map(|combo| -> Result<_, DecoderError> {
                let mut patterns = 0u64;
                let mut failures = 0u64;
                let mut first = None;
                let mut idx = vec![0usize; w];
                loop {
                    let faults: Vec<(usize, PauliMask)> =
                        combo.iter().zip(&idx).map(|(&l, &k)| (locations[l].0, locations[l].1[k])).collect();
                    let flips = sim.fault_flips(&faults)?;
                    let (syn, logical) = signature(code, flips);
                    patterns += 1;
                    if decode_mwpm(&g, syn)? != logical {
                        failures += 1;
                        first.get_or_insert(faults);
                    }
                    // odometer over letter choices
                    let mut pos = 0;
                    loop {
                        if pos == w {
                            return Ok((patterns, failures, first));
                        }
                        idx[pos] += 1;
                        if idx[pos] < locations[combo[pos]].1.len() {
                            break;
                        }
                        idx[pos] = 0;
                        pos += 1;
                    }
                }
            })
            .collect::<Result<_, _>>()?;
        for (p, f, first) in results {
            report.patterns += p;
            report.failures += f;
            if f > 0 && report.min_failing_weight.is_none() {
                report.min_failing_weight = Some(w);
            }
            if report.first_failure.is_none() {
                if let Some(faults) = first {
                    report.first_failure = Some(
                        faults
                            .iter()
                            .map(|&(op, m)| {
                                let q = (0..64).find(|&q| m.get(q) != Pauli::I).unwrap_or(0);
                                (op, m.get(q).letter())
                            })
                            .collect(),
                    );
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize, w: f64) -> DetectorGraph {
        // boundary - 0 - 1 - ... - (n-1) - boundary; left boundary edge flips
        let mut edges = vec![Edge {
            a: 0,
            b: None,
            p: 0.1,
            weight: w,
            flip: true,
        }];
        for i in 0..n - 1 {
            edges.push(Edge {
                a: i,
                b: Some(i + 1),
                p: 0.1,
                weight: w,
                flip: false,
            });
        }
        edges.push(Edge {
            a: n - 1,
            b: None,
            p: 0.1,
            weight: w,
            flip: false,
        });
        DetectorGraph::new(n, edges)
    }

    #[test]
    fn empty_syndrome_no_flip() {
        let g = path_graph(4, 1.0);
        assert!(!decode_mwpm(&g, 0).unwrap());
    }

    #[test]
    fn single_defect_goes_to_nearest_boundary() {
        let g = path_graph(4, 1.0);
        assert!(decode_mwpm(&g, 0b0001).unwrap());
        assert!(!decode_mwpm(&g, 0b1000).unwrap());
        let (w, pairs) = min_weight_matching(&g, &[1, 2]).unwrap();
        assert_eq!(w, 1.0);
        assert_eq!(pairs, vec![(1, Some(2))]);
    }

    #[test]
    fn large_clusters_use_blossom() {
        let g = path_graph(20, 1.0);
        let defects: Vec<usize> = (0..17).collect();
        let (w, pairs) = min_weight_matching(&g, &defects).unwrap();
        // eight neighbour pairs and one boundary hop
        assert!((w - 9.0).abs() < 1e-9, "{w}");
        assert_eq!(pairs.len(), 9);
    }

    #[test]
    fn blossom_matches_exact() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.gen_range(2..16);
            let mut edges = Vec::new();
            for a in 0..n {
                if rng.gen_bool(0.7) {
                    edges.push(Edge {
                        a,
                        b: None,
                        p: 0.1,
                        weight: rng.gen_range(0.5..6.0),
                        flip: rng.gen(),
                    });
                }
                for _ in 0..3 {
                    let b = rng.gen_range(0..n);
                    if b != a {
                        edges.push(Edge {
                            a,
                            b: Some(b),
                            p: 0.1,
                            weight: rng.gen_range(0.5..6.0),
                            flip: rng.gen(),
                        });
                    }
                }
            }
            let g = DetectorGraph::new(n, edges);
            let defects: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
            match (match_exact(&g, &defects), match_blossom(&g, &defects)) {
                (Ok((we, _)), Ok((wb, pb))) => {
                    assert!((we - wb).abs() < 1e-6, "{we} vs {wb}");
                    let covered: usize = pb.iter().map(|p| if p.1.is_some() { 2 } else { 1 }).sum();
                    assert_eq!(covered, defects.len());
                }
                (Err(_), Err(_)) => {}
                (a, b) => panic!("{a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn clusters_split_large_syndromes() {
        // a line with a cheap boundary edge at every node
        let mut edges: Vec<Edge> = (0..99)
            .map(|i| Edge {
                a: i,
                b: Some(i + 1),
                p: 0.1,
                weight: 1.0,
                flip: false,
            })
            .collect();
        edges.extend((0..100).map(|i| Edge {
            a: i,
            b: None,
            p: 0.1,
            weight: 1.5,
            flip: i % 2 == 0,
        }));
        let g = DetectorGraph::new(100, edges);
        let defects: Vec<usize> = (0..10).flat_map(|c| [10 * c, 10 * c + 1]).collect();
        let (w, pairs) = min_weight_matching(&g, &defects).unwrap();
        assert_eq!(w, 10.0);
        assert_eq!(pairs.len(), 10);
        assert!(pairs.iter().all(|&(a, b)| b == Some(a + 1)));
    }

    #[test]
    fn clustering_matches_exact_on_small_sets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(2..14);
            let mut edges = Vec::new();
            for a in 0..n {
                edges.push(Edge {
                    a,
                    b: None,
                    p: 0.1,
                    weight: rng.gen_range(0.5..6.0),
                    flip: rng.gen(),
                });
                for _ in 0..2 {
                    let b = rng.gen_range(0..n);
                    if b != a {
                        edges.push(Edge {
                            a,
                            b: Some(b),
                            p: 0.1,
                            weight: rng.gen_range(0.5..6.0),
                            flip: rng.gen(),
                        });
                    }
                }
            }
            let g = DetectorGraph::new(n, edges);
            let defects: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
            let (we, _) = match_exact(&g, &defects).unwrap();
            let (wc, _) = match_clustered(&g, &defects).unwrap();
            assert!((we - wc).abs() < 1e-9, "{we} vs {wc}");
        }
    }

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(14, 2).len(), 91);
        assert_eq!(combinations(5, 0).len(), 1);
    }
}
