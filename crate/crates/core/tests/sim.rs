use proptest::prelude::*;
use qec_zne::circuit::LocationPolicy;
use qec_zne::codes::{build_fig2_example, build_repetition, build_surface_d3, LogicalStateSpec};
use qec_zne::decoder::LogicalDecoder;
use qec_zne::noise::{device_preset, scale_model, NoiseModel};
use qec_zne::pauli::Pauli;
use qec_zne::sim::{RecordObservable, Route, Simulator, DEFAULT_BUDGET};

const P: f64 = 0.036;

#[test]
fn decoding_removes_low_orders_but_raw_readout_keeps_them() {
    for d in [3usize, 5] {
        let code = build_repetition(d, 1, P).unwrap();
        let m = code.noise_model(&NoiseModel::ideal()).unwrap();
        let sim = Simulator::new(&code.circuit, &m).unwrap();
        let dec = LogicalDecoder::new(&code, &m).unwrap();
        let e = d.div_ceil(2);
        let decoded = sim
            .polynomial(&dec, LocationPolicy::InjectionOnly, DEFAULT_BUDGET, Route::Auto)
            .unwrap()
            .coeffs();
        assert_eq!(decoded[0], 1.0);
        assert!(decoded[1..e].iter().all(|c| c.abs() < 1e-12), "d={d}: {decoded:?}");
        assert!(decoded[e] < -1e-6, "d={d}: {decoded:?}");
        // a single data-qubit readout already feels one error
        let raw = RecordObservable::parity(&code.logical.records[..1]);
        let first = sim
            .polynomial(&raw, LocationPolicy::InjectionOnly, DEFAULT_BUDGET, Route::Auto)
            .unwrap()
            .coeffs();
        assert!(first[1] < -1e-6, "d={d}: {first:?}");
    }
}

#[test]
fn frame_and_statevector_routes_agree() {
    let rep = build_repetition(3, 1, P).unwrap();
    let fig2 = build_fig2_example(-0.4 * std::f64::consts::PI, 0.0, 0.0, P).unwrap();
    // dense enumeration is only affordable with injection noise alone
    for code in [rep, fig2] {
        let m = code.noise_model(&NoiseModel::ideal()).unwrap();
        let sim = Simulator::new(&code.circuit, &m).unwrap();
        let dec = LogicalDecoder::new(&code, &m).unwrap();
        let a = sim.exact(&dec, &[], DEFAULT_BUDGET, Route::StateVector).unwrap();
        let b = sim.exact(&dec, &[], DEFAULT_BUDGET, Route::Frame).unwrap();
        assert!((a - b).abs() < 1e-12, "{}: {a} vs {b}", code.name);
    }
}

#[test]
fn sampled_shots_match_enumeration() {
    let code = build_repetition(3, 1, P).unwrap();
    let m = scale_model(&code.noise_model(&device_preset("processor1").unwrap()).unwrap(), 3.0).unwrap();
    let sim = Simulator::new(&code.circuit, &m).unwrap();
    let dec = LogicalDecoder::new(&code, &m).unwrap();
    let exact = sim.exact(&dec, &[], DEFAULT_BUDGET, Route::Auto).unwrap();
    let est = sim.estimate(&dec, &[], 40_000, 9, 0).unwrap();
    assert!((est.mean - exact).abs() < 4.0 * est.stderr, "{} ± {} vs {exact}", est.mean, est.stderr);
}

#[test]
fn logical_failure_falls_with_distance() {
    let fail = |d: usize| {
        let code = build_repetition(d, 1, P).unwrap();
        let m = scale_model(&code.noise_model(&NoiseModel::ideal()).unwrap(), 3.0).unwrap();
        let sim = Simulator::new(&code.circuit, &m).unwrap();
        let dec = LogicalDecoder::new(&code, &m).unwrap();
        (1.0 - sim.estimate(&dec, &[], 20_000, 4, 0).unwrap().mean) / 2.0
    };
    let rates: Vec<f64> = [3, 5, 7].iter().map(|&d| fail(d)).collect();
    assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
}

#[test]
fn surface_bloch_vectors_stay_in_the_ball() {
    for spec in [LogicalStateSpec::Zero, LogicalStateSpec::Plus, LogicalStateSpec::psi()] {
        let est = |basis| {
            let code = build_surface_d3(&spec, basis, P).unwrap();
            let m = code
                .with_background(code.noise_model(&NoiseModel::ideal()).unwrap(), 0.05)
                .unwrap();
            let sim = Simulator::new(&code.circuit, &m).unwrap();
            let dec = LogicalDecoder::new(&code, &m).unwrap();
            sim.estimate(&dec, &[], 4000, 21, 0).unwrap()
        };
        let (x, z) = (est(Pauli::X), est(Pauli::Z));
        let norm = x.mean.hypot(z.mean);
        let sigma = (x.mean * x.stderr).hypot(z.mean * z.stderr) / norm.max(1e-12);
        assert!(norm <= 1.0 + 3.0 * sigma, "{spec:?}: |v| = {norm} ± {sigma}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polynomial_evaluates_to_scaled_exact(r in 0.0f64..4.0) {
        let code = build_repetition(3, 1, P).unwrap();
        let m = code.noise_model(&NoiseModel::ideal()).unwrap();
        let dec = LogicalDecoder::new(&code, &m).unwrap();
        let poly = Simulator::new(&code.circuit, &m)
            .unwrap()
            .polynomial(&dec, LocationPolicy::InjectionOnly, DEFAULT_BUDGET, Route::Auto)
            .unwrap();
        let scaled = scale_model(&m, r).unwrap();
        let exact = Simulator::new(&code.circuit, &scaled).unwrap().exact(&dec, &[], DEFAULT_BUDGET, Route::Auto).unwrap();
        prop_assert!((poly.eval(r) - exact).abs() < 1e-12, "{} vs {}", poly.eval(r), exact);
    }

    #[test]
    fn exact_values_are_bounded_expectations(r in 0.0f64..5.0, rounds in 1usize..3) {
        let code = build_repetition(3, rounds, P).unwrap();
        let m = scale_model(&code.noise_model(&device_preset("processor1").unwrap()).unwrap(), r).unwrap();
        let dec = LogicalDecoder::new(&code, &m).unwrap();
        let v = Simulator::new(&code.circuit, &m).unwrap().exact(&dec, &[], DEFAULT_BUDGET, Route::Auto).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
    }
}
