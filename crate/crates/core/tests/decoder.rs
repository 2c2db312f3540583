use std::collections::HashMap;

use proptest::prelude::*;
use qec_zne::codes::{build_repetition, build_surface_d3, LogicalStateSpec, SurfaceLayout};
use qec_zne::decoder::{
    build_detector_graph, decode_mwpm, min_weight_matching, verify_distance, DetectorGraph, Edge, LookupDecoder,
};
use qec_zne::noise::NoiseModel;
use qec_zne::pauli::{Pauli, PauliMask};
use qec_zne::sim::Simulator;

fn flips_of(code: &qec_zne::codes::BuiltCode, faults: &[(usize, PauliMask)]) -> (u64, bool) {
    let m = code.noise_model(&NoiseModel::ideal()).unwrap();
    let sim = Simulator::new(&code.circuit, &m).unwrap();
    let f = sim.fault_flips(faults).unwrap();
    (code.syndrome_flips(f), code.logical_parity(f))
}

#[test]
fn repetition_graph_is_a_path_per_layer() {
    let code = build_repetition(3, 1, 0.036).unwrap();
    let m = code.noise_model(&NoiseModel::ideal()).unwrap();
    let g = build_detector_graph(&code, &m).unwrap();
    assert_eq!(g.n_nodes, 4);
    // X on the first data qubit: boundary edges that flip the logical
    let flips: Vec<&Edge> = g.edges.iter().filter(|e| e.flip).collect();
    assert_eq!(flips.len(), 2);
    assert!(flips.iter().all(|e| e.b.is_none()));
    let w = -(0.036f64 * 2.0 / 3.0).ln();
    for e in &g.edges {
        assert!((e.weight - w).abs() < 1e-9, "{e:?}");
    }
}

#[test]
fn ideal_model_gives_empty_graph() {
    let code = build_repetition(5, 2, 0.036).unwrap();
    let g = build_detector_graph(&code, &NoiseModel::ideal()).unwrap();
    assert!(g.edges.is_empty());
    assert!(!decode_mwpm(&g, 0).unwrap());
}

#[test]
fn centre_x_fault_fires_adjacent_z_checks() {
    let code = build_surface_d3(&LogicalStateSpec::Zero, Pauli::Z, 0.036).unwrap();
    let op = code.injection_ops()[9]; // second layer, D4
    let (syn, logical) = flips_of(&code, &[(op, PauliMask::single(3, Pauli::X))]);
    assert!(logical);
    let lay = SurfaceLayout::get();
    let fired: Vec<usize> = (0..code.detectors.len()).filter(|i| (syn >> i) & 1 == 1).collect();
    assert_eq!(fired.len(), 2);
    // data detectors follow the eight round detectors in stabilizer order
    let z_names: Vec<&str> = lay.z_stabilizers().map(|s| s.name).collect();
    let names: Vec<&str> = fired.iter().map(|&i| z_names[i - 8]).collect();
    for n in &names {
        assert!(lay.stabilizer(n).support().contains(&3));
    }
}

#[test]
fn repetition_corrects_below_half_distance() {
    let code = build_repetition(5, 1, 0.036).unwrap();
    let m = code.noise_model(&NoiseModel::ideal()).unwrap();
    let g = build_detector_graph(&code, &m).unwrap();
    let ops = code.injection_ops();
    let x = |site: usize, q: usize| (ops[site], PauliMask::single(q, Pauli::X));
    let (s, l) = flips_of(&code, &[x(0, 0), x(7, 4)]);
    assert_eq!(decode_mwpm(&g, s).unwrap(), l);
    let d3 = build_repetition(3, 1, 0.036).unwrap();
    let g3 = build_detector_graph(&d3, &d3.noise_model(&NoiseModel::ideal()).unwrap()).unwrap();
    let ops = d3.injection_ops();
    let (s, l) = flips_of(&d3, &[(ops[3], PauliMask::single(0, Pauli::X)), (ops[4], PauliMask::single(2, Pauli::X))]);
    assert!(l);
    assert_ne!(decode_mwpm(&g3, s).unwrap(), l);
}

#[test]
fn repetition_distance_holds() {
    for d in [3, 5, 7] {
        for rounds in 1..=4 {
            let code = build_repetition(d, rounds, 0.036).unwrap();
            let m = code.noise_model(&NoiseModel::ideal()).unwrap();
            let t = (d - 1) / 2;
            let rep = verify_distance(&code, &m, t).unwrap();
            assert!(rep.passed(), "d={d} M={rounds}: {rep:?}");
            assert_eq!(rep.locations, d * (rounds + 1));
        }
    }
}

#[test]
fn repetition_d3_fails_at_weight_two() {
    let code = build_repetition(3, 1, 0.036).unwrap();
    let m = code.noise_model(&NoiseModel::ideal()).unwrap();
    let rep = verify_distance(&code, &m, 2).unwrap();
    assert_eq!(rep.min_failing_weight, Some(2));
}

#[test]
fn surface_distance_holds_in_both_bases() {
    for basis in [Pauli::Z, Pauli::X] {
        for spec in [LogicalStateSpec::Zero, LogicalStateSpec::psi()] {
            let code = build_surface_d3(&spec, basis, 0.036).unwrap();
            let m = code.noise_model(&NoiseModel::ideal()).unwrap();
            let rep = verify_distance(&code, &m, 1).unwrap();
            assert!(rep.passed(), "{}: {rep:?}", code.name);
            assert_eq!(rep.locations, 18);
            assert_eq!(rep.patterns, 54);
        }
    }
}

#[test]
fn surface_graph_accepts_background_noise() {
    let code = build_surface_d3(&LogicalStateSpec::Zero, Pauli::Z, 0.036).unwrap();
    let m = code.with_background(code.noise_model(&NoiseModel::ideal()).unwrap(), 0.05).unwrap();
    let g = build_detector_graph(&code, &m).unwrap();
    assert!(g.edges.len() > 10);
    assert!(verify_distance(&code, &m, 1).unwrap().locations == 35);
}

#[test]
fn lookup_agrees_with_matching_on_every_z_syndrome() {
    let code = build_surface_d3(&LogicalStateSpec::Zero, Pauli::Z, 0.036).unwrap();
    let g = build_detector_graph(&code, &code.noise_model(&NoiseModel::ideal()).unwrap()).unwrap();
    let table = LookupDecoder::build(&g).unwrap();
    assert!(!table.is_empty());
    // Z-type detectors: round detectors of z1..z4 and the four data detectors
    let z_dets: Vec<usize> = vec![4, 5, 6, 7, 8, 9, 10, 11];
    for bits in 0u32..256 {
        let s = z_dets
            .iter()
            .enumerate()
            .filter(|(k, _)| (bits >> k) & 1 == 1)
            .fold(0u64, |s, (_, &d)| s | 1 << d);
        assert_eq!(table.decode(&g, s).unwrap(), decode_mwpm(&g, s).unwrap(), "syndrome {s:#x}");
    }
}

#[test]
fn decoding_is_deterministic() {
    let code = build_repetition(7, 3, 0.036).unwrap();
    let g = build_detector_graph(&code, &code.noise_model(&NoiseModel::ideal()).unwrap()).unwrap();
    for s in [0b1011u64, 0x5a5a, 0xfff, 0x1_0001] {
        let s = s & ((1 << g.n_nodes) - 1);
        let a = min_weight_matching(&g, &(0..g.n_nodes).filter(|i| (s >> i) & 1 == 1).collect::<Vec<_>>()).unwrap();
        let b = min_weight_matching(&g, &(0..g.n_nodes).filter(|i| (s >> i) & 1 == 1).collect::<Vec<_>>()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn decoding_beats_raw_readout_on_samples() {
    let code = build_repetition(5, 2, 0.036).unwrap();
    let m = code.noise_model(&NoiseModel::ideal()).unwrap();
    let g = build_detector_graph(&code, &m).unwrap();
    let sim = Simulator::new(&code.circuit, &m).unwrap();
    let shots = sim.shots(&[], 20_000, 5, 0);
    // per-qubit flip rate of the raw readout vs decoded logical failures
    let raw: f64 = shots.iter().map(|o| (1.0 - code.raw_value(o.bits)) / 2.0).sum();
    let dec = shots
        .iter()
        .filter(|o| code.logical_parity(o.bits) ^ decode_mwpm(&g, code.syndrome(o.bits)).unwrap())
        .count();
    assert!(dec as f64 * 5.0 < raw, "decoded {dec} raw {raw}");
}

/// Shortest distances by Bellman-Ford relaxation, boundary at index n.
fn oracle_distances(n: usize, edges: &[Edge]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for _ in 0..=n {
        for e in edges {
            let b = e.b.unwrap_or(n);
            for s in 0..=n {
                let via_a = d[s][e.a] + e.weight;
                if via_a < d[s][b] {
                    d[s][b] = via_a;
                }
                let via_b = d[s][b] + e.weight;
                if via_b < d[s][e.a] {
                    d[s][e.a] = via_b;
                }
            }
        }
    }
    d
}

/// Minimum over every way to pair defects with each other or the boundary.
fn brute_force_matching(dist: &[Vec<f64>], defects: &[usize], boundary: usize) -> f64 {
    match defects.split_first() {
        None => 0.0,
        Some((&a, rest)) => {
            let mut best = dist[a][boundary] + brute_force_matching(dist, rest, boundary);
            for k in 0..rest.len() {
                let mut others = rest.to_vec();
                let b = others.remove(k);
                best = best.min(dist[a][b] + brute_force_matching(dist, &others, boundary));
            }
            best
        }
    }
}

/// The same minimum, memoised on the set of unpaired defects.
fn memo_matching(dist: &[Vec<f64>], defects: &[usize], boundary: usize) -> f64 {
    fn go(mask: u32, dist: &[Vec<f64>], defects: &[usize], boundary: usize, memo: &mut HashMap<u32, f64>) -> f64 {
        if mask == 0 {
            return 0.0;
        }
        if let Some(&v) = memo.get(&mask) {
            return v;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut best = dist[defects[i]][boundary] + go(rest, dist, defects, boundary, memo);
        for j in i + 1..defects.len() {
            if rest & (1 << j) != 0 {
                best = best.min(dist[defects[i]][defects[j]] + go(rest & !(1 << j), dist, defects, boundary, memo));
            }
        }
        memo.insert(mask, best);
        best
    }
    go((1u32 << defects.len()) - 1, dist, defects, boundary, &mut HashMap::new())
}

fn arb_graph() -> impl Strategy<Value = (usize, Vec<Edge>, Vec<usize>)> {
    arb_graph_sized(2..10, 20)
}

fn arb_graph_sized(nodes: std::ops::Range<usize>, max_edges: usize) -> impl Strategy<Value = (usize, Vec<Edge>, Vec<usize>)> {
    nodes.prop_flat_map(move |n| {
        let edge = (0..n, prop::option::of(0..n), 0.001f64..0.4, any::<bool>()).prop_map(|(a, b, p, flip)| Edge {
            a,
            b: b.filter(|&b| b != a),
            p,
            weight: -p.ln(),
            flip,
        });
        // every node gets a boundary edge so all syndromes are matchable
        let anchors = prop::collection::vec(0.001f64..0.4, n).prop_map(|ps| {
            ps.into_iter()
                .enumerate()
                .map(|(a, p)| Edge {
                    a,
                    b: None,
                    p,
                    weight: -p.ln(),
                    flip: false,
                })
                .collect::<Vec<_>>()
        });
        (
            Just(n),
            anchors,
            prop::collection::vec(edge, 0..max_edges),
            prop::sample::subsequence((0..n).collect::<Vec<_>>(), 0..=n),
        )
            .prop_map(|(n, mut a, e, d)| {
                a.extend(e);
                (n, a, d)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matching_is_minimum_weight((n, edges, defects) in arb_graph()) {
        let g = DetectorGraph::new(n, edges.clone());
        let dist = oracle_distances(n, &edges);
        let (w, pairs) = min_weight_matching(&g, &defects).unwrap();
        let want = brute_force_matching(&dist, &defects, n);
        prop_assert!((w - want).abs() < 1e-9 * want.max(1.0), "{} vs {}", w, want);
        // the pairing covers each defect exactly once and has the reported weight
        let mut seen: Vec<usize> = pairs.iter().flat_map(|&(a, b)| std::iter::once(a).chain(b)).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, defects.clone());
        let sum: f64 = pairs.iter().map(|&(a, b)| dist[a][b.unwrap_or(n)]).sum();
        prop_assert!((sum - w).abs() < 1e-9 * w.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn large_defect_sets_are_optimal((n, edges, defects) in arb_graph_sized(12..20, 40)) {
        let g = DetectorGraph::new(n, edges.clone());
        let dist = oracle_distances(n, &edges);
        let (w, pairs) = min_weight_matching(&g, &defects).unwrap();
        let want = memo_matching(&dist, &defects, n);
        prop_assert!((w - want).abs() < 1e-9 * want.max(1.0), "{} vs {}", w, want);
        let mut seen: Vec<usize> = pairs.iter().flat_map(|&(a, b)| std::iter::once(a).chain(b)).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, defects.clone());
    }
}
