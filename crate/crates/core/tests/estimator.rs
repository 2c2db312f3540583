use proptest::prelude::*;
use qec_zne::codes::{build_fig2_example, build_repetition, BuiltCode};
use qec_zne::decoder::LogicalDecoder;
use qec_zne::estimator::{
    available_instances, draw_instances, estimate_expectation, plan_instances, read_shots_csv, simulate_instances,
    write_shots_csv, InstanceSet, DEFAULT_MIN_FRAC,
};
use qec_zne::noise::{device_preset, scale_model, NoiseModel};
use qec_zne::sim::{Route, Simulator, DEFAULT_BUDGET};

const P: f64 = 0.036;

struct Pipeline {
    code: BuiltCode,
    decoder: LogicalDecoder,
    sim: Simulator,
    exact: f64,
}

fn repetition_pipeline(d: usize, rounds: usize, r: f64) -> Pipeline {
    let code = build_repetition(d, rounds, P).unwrap();
    let model = code.noise_model(&device_preset("processor1").unwrap()).unwrap();
    let decoder = LogicalDecoder::new(&code, &model).unwrap();
    let scaled = scale_model(&model, r).unwrap();
    let exact = Simulator::new(&code.circuit, &scaled)
        .unwrap()
        .exact(&decoder, &[], DEFAULT_BUDGET, Route::Auto)
        .unwrap();
    let sim = Simulator::new(&code.circuit, &scaled.without_injection()).unwrap();
    Pipeline {
        code,
        decoder,
        sim,
        exact,
    }
}

fn run(p: &Pipeline, r: f64, n_total: u64, shots: u64, seed: u64) -> (f64, f64) {
    let sites = p.code.injection_sites();
    let plan = plan_instances(sites.len(), r * P, n_total, DEFAULT_MIN_FRAC).unwrap();
    let set = draw_instances(&plan, &sites, shots, seed);
    let table = simulate_instances(&p.sim, &set, seed, |o| p.decoder.value(o.bits)).unwrap();
    let e = estimate_expectation(&set, &plan, &table, false).unwrap();
    (e.mean, e.stderr)
}

#[test]
fn empty_instance_fractions() {
    let d3 = plan_instances(6, P, 1000, DEFAULT_MIN_FRAC).unwrap();
    assert!((d3.weights[0] - 0.803).abs() < 0.002, "{}", d3.weights[0]);
    assert_eq!(d3.quota(0), 1);
    assert_eq!(d3.instance_count(), 1000);
    let d7 = plan_instances(14, P, 6000, DEFAULT_MIN_FRAC).unwrap();
    assert!((d7.weights[0] - 0.598).abs() < 0.002, "{}", d7.weights[0]);
}

#[test]
fn zero_rate_puts_everything_on_the_empty_instance() {
    let plan = plan_instances(6, 0.0, 1000, DEFAULT_MIN_FRAC).unwrap();
    assert_eq!(plan.quotas.len(), 1);
    assert_eq!(plan.quota(0), 1);
    assert!(plan_instances(6, 1.0, 10, DEFAULT_MIN_FRAC).is_err());
    assert!(plan_instances(6, 0.1, 0, DEFAULT_MIN_FRAC).is_err());
}

#[test]
fn exhausted_level_is_enumerated_once() {
    let plan = plan_instances(6, P, 1000, DEFAULT_MIN_FRAC).unwrap();
    assert_eq!(plan.quota(1), 18);
    let sites: Vec<u32> = (0..6).collect();
    let set = draw_instances(&plan, &sites, 1, 9);
    let ones: Vec<_> = set.instances.iter().filter(|i| i.k == 1).collect();
    assert_eq!(ones.len(), 18);
    let mut keys: Vec<(u32, String)> = ones.iter().map(|i| (i.sites[0], i.paulis.clone())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 18);
}

#[test]
fn seeds_change_draws_but_not_validity() {
    let plan = plan_instances(14, 0.2, 500, DEFAULT_MIN_FRAC).unwrap();
    let sites: Vec<u32> = (100..114).collect();
    let a = draw_instances(&plan, &sites, 1, 1);
    let b = draw_instances(&plan, &sites, 1, 2);
    let a2 = draw_instances(&plan, &sites, 1, 1);
    assert_eq!(a, a2);
    let level = |s: &InstanceSet, k| s.instances.iter().filter(|i| i.k == k).cloned().collect::<Vec<_>>();
    assert_ne!(level(&a, 2), level(&b, 2));
    for set in [&a, &b] {
        assert!(set.is_duplicate_free());
        for inst in &set.instances {
            assert_eq!(inst.sites.len(), inst.k);
            assert_eq!(inst.paulis.len(), inst.k);
            assert!(inst.sites.windows(2).all(|w| w[0] < w[1]));
            assert!(inst.sites.iter().all(|s| sites.contains(s)));
        }
    }
    let json = a.to_json();
    let back: InstanceSet = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
}

#[test]
fn constant_outcomes_give_unit_mean() {
    let plan = plan_instances(6, P, 5000, DEFAULT_MIN_FRAC).unwrap();
    assert_eq!(plan.uncovered_mass(), 0.0);
    let set = draw_instances(&plan, &(0..6).collect::<Vec<_>>(), 20, 4);
    let table = vec![vec![Some(1.0); 20]; set.instances.len()];
    let e = estimate_expectation(&set, &plan, &table, false).unwrap();
    assert!((e.mean - 1.0).abs() < 1e-12);
    assert!(e.stderr < 1e-12);
    let short = vec![vec![Some(1.0); 19]; set.instances.len()];
    assert!(estimate_expectation(&set, &plan, &short, false).is_err());
}

#[test]
fn exhaustive_coverage_reproduces_the_exact_value() {
    let p = repetition_pipeline(3, 1, 1.0);
    let sites = p.code.injection_sites();
    let plan = plan_instances(sites.len(), P, 4096, DEFAULT_MIN_FRAC).unwrap();
    assert_eq!(plan.instance_count(), 4096);
    let set = draw_instances(&plan, &sites, 1, 0);
    let table: Vec<Vec<Option<f64>>> = set
        .instances
        .iter()
        .map(|inst| {
            let forced = inst.forced(&p.code.circuit).unwrap();
            vec![Some(p.sim.exact(&p.decoder, &forced, DEFAULT_BUDGET, Route::Auto).unwrap())]
        })
        .collect();
    let e = estimate_expectation(&set, &plan, &table, false).unwrap();
    assert!((e.mean - p.exact).abs() < 1e-12, "{} vs {}", e.mean, p.exact);
}

#[test]
fn d3_pipeline_matches_exact_oracle() {
    let p = repetition_pipeline(3, 1, 1.0);
    let (mean, stderr) = run(&p, 1.0, 1000, 150, 7);
    assert!(stderr > 0.0);
    assert!((mean - p.exact).abs() < 3.0 * stderr, "{mean} ± {stderr} vs {}", p.exact);
}

#[test]
fn d3_pipeline_is_unbiased_over_replications() {
    let r = 2.0;
    let p = repetition_pipeline(3, 1, r);
    let means: Vec<f64> = (0..200).map(|seed| run(&p, r, 1000, 150, 1000 + seed).0).collect();
    let n = means.len() as f64;
    let avg = means.iter().sum::<f64>() / n;
    let sd = (means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    assert!((avg - p.exact).abs() < 4.0 * se, "{avg} vs {} (se {se})", p.exact);
}

#[test]
fn stderr_shrinks_as_inverse_root_of_shots() {
    let r = 3.0;
    let p = repetition_pipeline(3, 1, r);
    let avg_err = |s: u64| (0..8).map(|seed| run(&p, r, 1000, s, 50 + seed).1).sum::<f64>() / 8.0;
    let ratio = avg_err(150) / avg_err(600);
    assert!((ratio / 2.0 - 1.0).abs() < 0.15, "ratio {ratio}");
}

#[test]
fn shot_csv_round_trips() {
    let p = repetition_pipeline(3, 1, 1.0);
    let sites = p.code.injection_sites();
    let plan = plan_instances(sites.len(), P, 40, DEFAULT_MIN_FRAC).unwrap();
    let set = draw_instances(&plan, &sites, 5, 3);
    let mut rows = Vec::new();
    for (i, inst) in set.instances.iter().enumerate() {
        let forced = inst.forced(&p.code.circuit).unwrap();
        for (s, o) in p.sim.shots(&forced, 5, 3, i as u64).into_iter().enumerate() {
            rows.push((i as u64, s as u64, o));
        }
    }
    let mut buf = Vec::new();
    write_shots_csv(&mut buf, &p.code.circuit, rows.iter().rev().copied()).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("instance_id,shot_id,accepted,s0_0,s0_1,d0,d1,d2\n"));
    let table = read_shots_csv(&buf[..], &p.code.circuit, &set, |o| p.decoder.value(o.bits)).unwrap();
    let direct = simulate_instances(&p.sim, &set, 3, |o| p.decoder.value(o.bits)).unwrap();
    assert_eq!(table, direct);
    let truncated = text.lines().take(10).collect::<Vec<_>>().join("\n");
    assert!(read_shots_csv(truncated.as_bytes(), &p.code.circuit, &set, |o| p.decoder.value(o.bits)).is_err());
}

#[test]
fn fig2_postselected_estimate_matches_exact() {
    let theta = -0.4 * std::f64::consts::PI;
    let code = build_fig2_example(theta, 0.0, 0.0, 0.088).unwrap();
    let model = scale_model(&code.noise_model(&NoiseModel::ideal()).unwrap(), 2.0).unwrap();
    let decoder = LogicalDecoder::new(&code, &model).unwrap();
    let exact = Simulator::new(&code.circuit, &model)
        .unwrap()
        .exact(&decoder, &[], DEFAULT_BUDGET, Route::Auto)
        .unwrap();
    let sim = Simulator::new(&code.circuit, &model.without_injection()).unwrap();
    let sites = code.injection_sites();
    // all 4^3 instances
    let plan = plan_instances(3, 2.0 * 0.088, 64, DEFAULT_MIN_FRAC).unwrap();
    assert_eq!(plan.instance_count(), 64);
    let set = draw_instances(&plan, &sites, 400, 11);
    let table = simulate_instances(&sim, &set, 11, |o| decoder.value(o.bits)).unwrap();
    let e = estimate_expectation(&set, &plan, &table, true).unwrap();
    assert!(e.acceptance < 1.0 && e.acceptance > 0.3);
    assert!((e.mean - exact).abs() < 4.0 * e.stderr, "{} ± {} vs {exact}", e.mean, e.stderr);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn plans_respect_budget_caps_and_floors(n in 0usize..40, rp in 0.0f64..0.6, n_total in 1u64..8000, frac in 0.0f64..0.05) {
        let plan = plan_instances(n, rp, n_total, frac).unwrap();
        let s: f64 = plan.weights.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        let levels: Vec<usize> = (0..=n).filter(|&k| plan.weights[k] > 0.0).collect();
        let avail: u64 = levels.iter().fold(0u64, |a, &k| a.saturating_add(available_instances(n, k)));
        prop_assert_eq!(plan.instance_count(), n_total.min(avail));
        let floor = ((frac * n_total as f64).ceil() as u64).max(1);
        let mut covered = 0.0;
        for (&k, &c) in &plan.quotas {
            prop_assert!(c >= 1);
            prop_assert!(c <= available_instances(n, k));
            prop_assert!(plan.weights[k] > 0.0);
            covered += plan.weights[k];
        }
        prop_assert!(covered <= 1.0 + 1e-12);
        prop_assert!((covered + plan.uncovered_mass() - 1.0).abs() < 1e-12);
        // floors hold on every level the budget reached in upward order
        let mut left = n_total.min(avail);
        for &k in &levels {
            let f = floor.min(available_instances(n, k)).min(left);
            prop_assert!(plan.quota(k) >= f, "level {} has {} < {}", k, plan.quota(k), f);
            left -= f;
        }
    }
}
