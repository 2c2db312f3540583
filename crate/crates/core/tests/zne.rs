use proptest::prelude::*;
use qec_zne::zne::{
    design_matrix, extrap_coeffs, fit_powers, sampling_overhead, sampling_overhead_measured, scan_delta_eta,
    write_scan_csv, zne, DataPoint, ZneError,
};

/// Determinant by Laplace expansion along the first row.
fn laplace_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, &x)| x).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * m[0][j] * laplace_det(&minor)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum()
}

/// First row of V⁻¹ as cofactors C_{k,0} / det V.
fn adjugate_coeffs(rs: &[f64], d: usize, k: usize) -> Vec<f64> {
    let powers = fit_powers(d, k);
    let v: Vec<Vec<f64>> = rs.iter().map(|r| powers.iter().map(|&p| r.powi(p)).collect()).collect();
    let det = laplace_det(&v);
    (0..rs.len())
        .map(|row| {
            let minor: Vec<Vec<f64>> = v
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != row)
                .map(|(_, r)| r[1..].to_vec())
                .collect();
            let cof = if minor.is_empty() { 1.0 } else { laplace_det(&minor) };
            let sign = if row % 2 == 0 { 1.0 } else { -1.0 };
            sign * cof / det
        })
        .collect()
}

fn pt(r: f64, value: f64) -> DataPoint {
    DataPoint {
        r,
        value,
        stderr: 0.0,
        shots: 1,
    }
}

#[test]
fn worked_coefficients() {
    let cases: [(&[f64], usize, &[f64]); 3] = [
        (&[1.0, 2.0], 1, &[2.0, -1.0]),
        (&[1.0, 3.0], 3, &[9.0 / 8.0, -1.0 / 8.0]),
        (&[1.0, 2.0], 7, &[16.0 / 15.0, -1.0 / 15.0]),
    ];
    for (rs, d, want) in cases {
        let b = extrap_coeffs(rs, d, 1).unwrap();
        for (x, y) in b.iter().zip(want) {
            assert!((x - y).abs() < 1e-12, "{rs:?} d={d}: {b:?}");
        }
    }
}

#[test]
fn worked_overheads() {
    let eta = sampling_overhead(&[0.9, 0.8], &[2.0, -1.0], 1.0);
    assert!((eta - 11.684210526315789).abs() < 1e-12);
    assert!((sampling_overhead(&[0.0, 0.0], &[2.0, -1.0], 1.0) - 9.0).abs() < 1e-12);
}

#[test]
fn three_point_solve_matches_cofactors() {
    let rs = [1.0, 1.5, 2.5];
    for d in [1, 3, 5, 7] {
        let b = extrap_coeffs(&rs, d, 2).unwrap();
        let a = adjugate_coeffs(&rs, d, 2);
        for (x, y) in b.iter().zip(&a) {
            assert!((x - y).abs() < 1e-9 * y.abs().max(1.0), "d={d}: {b:?} vs {a:?}");
        }
    }
}

#[test]
fn extrapolation_needs_base_point() {
    assert_eq!(zne(&[pt(1.5, 0.9), pt(2.0, 0.8)], 3, 1, 1.0), Err(ZneError::MissingBase));
    assert!(matches!(
        zne(&[pt(1.0, 0.9), pt(1.0, 0.8)], 3, 1, 1.0),
        Err(ZneError::Degenerate(_))
    ));
}

#[test]
fn measured_overhead_matches_pauli_bound_for_binary_data() {
    let n = 10_000u64;
    let pts: Vec<DataPoint> = [(1.0, 0.9), (2.0, 0.8)]
        .iter()
        .map(|&(r, y)| DataPoint {
            r,
            value: y,
            stderr: ((1.0 - y * y) / n as f64).sqrt(),
            shots: n,
        })
        .collect();
    let b = extrap_coeffs(&[1.0, 2.0], 1, 1).unwrap();
    let want = sampling_overhead(&[0.9, 0.8], &b, 1.0);
    assert!((sampling_overhead_measured(&pts, &b) - want).abs() < 1e-9);
}

#[test]
fn scan_enumerates_subsets_and_writes_csv() {
    let grid: Vec<DataPoint> = [1.0, 1.5, 2.0, 2.5, 3.0]
        .iter()
        .map(|&r: &f64| pt(r, 1.0 - 0.01 * r.powi(2) - 0.001 * r.powi(3)))
        .collect();
    let rows = scan_delta_eta(&grid, 3, &[1, 2, 3], 1.0).unwrap();
    assert_eq!(rows.len(), 4 + 6 + 4);
    assert!(rows.iter().all(|r| (r.delta0 - 0.011).abs() < 1e-12));
    // K = 2 fits both orders present in the data exactly
    for r in rows.iter().filter(|r| r.k >= 2) {
        assert!(r.delta < 1e-10, "{r:?}");
    }
    let mut buf = Vec::new();
    write_scan_csv(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("d,K,r_subset,delta,eta,delta0"));
    assert!(lines.next().unwrap().starts_with("3,1,1.5,"));
    assert_eq!(text.lines().count(), 15);
    assert!(text.contains(",2,1.5;2,"));
}

fn distinct_grid(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.05f64..4.0, k).prop_filter("well separated", |v| {
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[1] - w[0] > 0.05)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn coefficients_sum_to_one(d in 1usize..8, k in 1usize..4, rest in (1usize..4).prop_flat_map(distinct_grid)) {
        let k = k.min(rest.len());
        let rs: Vec<f64> = std::iter::once(1.0).chain(rest.into_iter().take(k)).collect();
        let b = extrap_coeffs(&rs, d, k).unwrap();
        let s: f64 = b.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9, "{:?}", b);
    }

    #[test]
    fn exact_on_fitted_family(
        d in 1usize..8,
        rest in distinct_grid(3),
        k in 1usize..4,
        c in -1.0f64..1.0,
        a in prop::collection::vec(-0.2f64..0.2, 3),
    ) {
        let rs: Vec<f64> = std::iter::once(1.0).chain(rest.into_iter().take(k)).collect();
        let powers = fit_powers(d, k);
        let f = |r: f64| c + a.iter().zip(&powers[1..]).map(|(a, &p)| a * r.powi(p)).sum::<f64>();
        let pts: Vec<DataPoint> = rs.iter().map(|&r| pt(r, f(r))).collect();
        let res = zne(&pts, d, k, c).unwrap();
        let scale = 1.0 + a.iter().map(|x| x.abs()).sum::<f64>() * rs.iter().cloned().fold(1.0, f64::max).powi(*powers.last().unwrap());
        prop_assert!(res.bias < 1e-9 * scale, "bias {}", res.bias);
    }

    #[test]
    fn solve_matches_cofactor_oracle(d in 1usize..8, k in 1usize..4, rest in distinct_grid(3)) {
        let rs: Vec<f64> = std::iter::once(1.0).chain(rest.into_iter().take(k)).collect();
        let b = extrap_coeffs(&rs, d, k).unwrap();
        let a = adjugate_coeffs(&rs, d, k);
        let v = design_matrix(&rs, d, k);
        let cond = v.norm() * v.clone().try_inverse().unwrap().norm();
        for (x, y) in b.iter().zip(&a) {
            prop_assert!((x - y).abs() < 1e-12 * cond * y.abs().max(1.0), "{:?} vs {:?}", b, a);
        }
    }

    #[test]
    fn overhead_grows_as_second_point_nears_one(d in 1usize..8, r1 in 1.05f64..3.0, gap in 0.05f64..1.0, y0 in -0.95f64..0.95, y1 in -0.95f64..0.95) {
        let near = extrap_coeffs(&[1.0, r1], d, 1).unwrap();
        let far = extrap_coeffs(&[1.0, r1 + gap], d, 1).unwrap();
        let ys = [y0, y1];
        prop_assert!(sampling_overhead(&ys, &near, 1.0) >= sampling_overhead(&ys, &far, 1.0) - 1e-12);
    }

    #[test]
    fn overhead_ignores_total_shots(y0 in -0.95f64..0.95, y1 in -0.95f64..0.95, n in 1.0f64..1e7, r1 in 1.1f64..4.0) {
        let b = extrap_coeffs(&[1.0, r1], 3, 1).unwrap();
        let a = sampling_overhead(&[y0, y1], &b, 1.0);
        let c = sampling_overhead(&[y0, y1], &b, n);
        prop_assert!((a - c).abs() < 1e-9 * a);
    }
}
