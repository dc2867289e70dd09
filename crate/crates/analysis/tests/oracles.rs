//! Rank test and correlation checked against independent computations.

use proptest::prelude::*;
use serde::Deserialize;
use woz_analysis::{mann_whitney_u, mann_whitney_u_with, point_biserial_r, Alternative, MwuMethod};

/// P(U_a >= observed) by listing every way to split the pooled ranks.
fn brute_force_p(n: usize, m: usize, u_obs: f64) -> f64 {
    let total = n + m;
    let (mut hits, mut all) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        all += 1;
        // Ranks 1..=total; U_a = rank sum of a minus n(n+1)/2.
        let rank_sum: usize = (0..total).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).sum();
        let u = rank_sum as f64 - (n * (n + 1)) as f64 / 2.0;
        if u >= u_obs {
            hits += 1;
        }
    }
    hits as f64 / all as f64
}

#[test]
fn exact_matches_enumeration() {
    let mut checked = 0;
    for n in 1..=6usize {
        for m in 1..=10usize {
            // Every possible observed U, via interleavings a < b shifted.
            for shift in 0..=m {
                let a: Vec<f64> = (0..n).map(|i| (i + shift) as f64 * 2.0 + 1.0).collect();
                let b: Vec<f64> = (0..m).map(|j| j as f64 * 2.0).collect();
                for alt in [Alternative::Greater, Alternative::Less] {
                    let r = mann_whitney_u(&a, &b, alt).unwrap();
                    assert_eq!(r.method, MwuMethod::Exact);
                    let want = match alt {
                        Alternative::Greater => brute_force_p(n, m, r.u_a),
                        Alternative::Less => brute_force_p(m, n, r.u_b),
                    };
                    assert!((r.p - want).abs() < 1e-12, "n={n} m={m} shift={shift} {alt:?}: {} vs {want}", r.p);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500);
}

#[derive(Deserialize)]
struct Fixture {
    cases: Vec<Case>,
}

#[derive(Deserialize)]
struct Case {
    a: Vec<f64>,
    b: Vec<f64>,
    alternative: String,
    u_a: f64,
    p: f64,
    method: String,
}

#[test]
fn matches_reference_implementation() {
    let f: Fixture = serde_json::from_str(include_str!("fixtures/mwu_scipy.json")).unwrap();
    let (mut normal, mut exact) = (0, 0);
    for (i, c) in f.cases.iter().enumerate() {
        let alt = if c.alternative == "greater" { Alternative::Greater } else { Alternative::Less };
        let r = mann_whitney_u(&c.a, &c.b, alt).unwrap();
        assert_eq!(r.u_a, c.u_a, "case {i}");
        match c.method.as_str() {
            "normal" => {
                assert_eq!(r.method, MwuMethod::Normal, "case {i}");
                assert!((r.p - c.p).abs() < 1e-3, "case {i}: {} vs {}", r.p, c.p);
                normal += 1;
            }
            _ => {
                assert_eq!(r.method, MwuMethod::Exact, "case {i}");
                assert!((r.p - c.p).abs() < 1e-9, "case {i}: {} vs {}", r.p, c.p);
                exact += 1;
            }
        }
    }
    assert_eq!((normal, exact), (100, 50));
}

/// r from group means: (M1 - M0) / s * sqrt(p q), s the population SD.
fn closed_form(x: &[f64], y: &[u8]) -> f64 {
    let n = x.len() as f64;
    let ones: Vec<f64> = x.iter().zip(y).filter(|(_, s)| **s == 1).map(|(v, _)| *v).collect();
    let zeros: Vec<f64> = x.iter().zip(y).filter(|(_, s)| **s == 0).map(|(v, _)| *v).collect();
    let m1 = ones.iter().sum::<f64>() / ones.len() as f64;
    let m0 = zeros.iter().sum::<f64>() / zeros.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let s = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let p = ones.len() as f64 / n;
    (m1 - m0) / s * (p * (1.0 - p)).sqrt()
}

#[test]
fn point_biserial_matches_closed_form() {
    let cases: Vec<(Vec<f64>, Vec<u8>)> = vec![
        (vec![1.0, 2.0, 3.0, 4.0], vec![0, 0, 1, 1]),
        (vec![3.0, 1.0, 4.0, 1.0, 5.0], vec![1, 0, 1, 0, 1]),
        (vec![9.0, 2.0, 6.0, 5.0, 3.0, 5.0], vec![0, 0, 1, 1, 0, 1]),
        (vec![0.0, 0.0, 1.0], vec![0, 1, 1]),
        (vec![10.0, 12.0, 9.0, 15.0, 14.0, 8.0, 11.0], vec![0, 1, 0, 1, 1, 0, 0]),
        (vec![2.5, 3.5, 2.5, 1.5], vec![1, 1, 0, 0]),
        (vec![7.0, 7.0, 7.0, 8.0], vec![0, 0, 1, 1]),
        (vec![1.0, 5.0, 2.0, 8.0, 3.0, 9.0, 4.0, 7.0], vec![0, 1, 0, 1, 0, 1, 0, 1]),
        (vec![4.0, 3.0, 2.0, 1.0], vec![0, 0, 1, 1]),
        (vec![0.1, 0.4, 0.35, 0.8, 0.2], vec![0, 1, 0, 1, 0]),
        (vec![20.0, 25.0, 30.0, 35.0, 40.0, 45.0], vec![0, 0, 0, 0, 0, 1]),
        (vec![5.0, 6.0, 5.0, 6.0, 5.0, 6.0], vec![1, 0, 1, 0, 1, 0]),
        (vec![12.0, 3.0, 8.0], vec![1, 0, 0]),
        (vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0], vec![0, 1, 0, 1, 0, 1, 1]),
        (vec![100.0, 200.0, 150.0, 120.0, 180.0], vec![0, 1, 1, 0, 1]),
        (vec![-3.0, -1.0, 2.0, 0.0, 4.0], vec![0, 0, 1, 0, 1]),
        (vec![6.0, 2.0, 7.0, 3.0, 8.0, 1.0, 9.0, 4.0, 5.0], vec![1, 0, 1, 0, 1, 0, 1, 0, 0]),
        (vec![17.0, 23.0, 19.0, 31.0, 11.0, 29.0], vec![0, 1, 0, 1, 0, 1]),
        (vec![0.5, 0.25, 0.75, 1.0], vec![0, 0, 1, 1]),
        (vec![3.0, 3.0, 4.0, 9.0, 2.0, 6.0, 1.0, 8.0, 5.0, 7.0], vec![0, 0, 0, 1, 0, 1, 0, 1, 1, 1]),
    ];
    assert_eq!(cases.len(), 20);
    for (x, y) in &cases {
        let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
        let r = point_biserial_r(x, &yf).unwrap();
        let want = closed_form(x, y);
        assert!((r - want).abs() < 1e-9, "{x:?}: {r} vs {want}");
    }
    // Hand arithmetic: means 1.5 and 3.5, population SD sqrt(1.25), p = q = 1/2.
    let r = point_biserial_r(&[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]).unwrap();
    assert!((r - 2.0 / 1.25f64.sqrt() * 0.5).abs() < 1e-12);
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0i32..40).prop_map(|v| v as f64), 1..25)
}

proptest! {
    #[test]
    fn scale_invariant(a in sample(), b in sample(), k in 0.1f64..50.0) {
        for alt in [Alternative::Greater, Alternative::Less] {
            let r = mann_whitney_u(&a, &b, alt).unwrap();
            let sa: Vec<f64> = a.iter().map(|x| x * k).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * k).collect();
            let s = mann_whitney_u(&sa, &sb, alt).unwrap();
            prop_assert_eq!(r.u_a, s.u_a);
            prop_assert!((r.p - s.p).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_samples_and_direction_keeps_p(a in sample(), b in sample()) {
        for alt in [Alternative::Greater, Alternative::Less] {
            let r = mann_whitney_u(&a, &b, alt).unwrap();
            let s = mann_whitney_u(&b, &a, alt.flip()).unwrap();
            prop_assert!((r.p - s.p).abs() < 1e-12);
            prop_assert_eq!(r.u_a, s.u_b);
            prop_assert!((0.0..=1.0).contains(&r.p));
        }
    }

    #[test]
    fn normal_approximation_stays_near_exact(
        pool in Just((0..40).map(|v| v as f64).collect::<Vec<_>>()).prop_shuffle(),
        n in 3usize..=8,
        m in 3usize..=30,
    ) {
        let (a, b) = (&pool[..n], &pool[n..n + m]);
        for alt in [Alternative::Greater, Alternative::Less] {
            let e = mann_whitney_u_with(a, b, alt, Some(MwuMethod::Exact)).unwrap();
            let z = mann_whitney_u_with(a, b, alt, Some(MwuMethod::Normal)).unwrap();
            prop_assert!((e.p - z.p).abs() <= 0.05, "n={} m={}: exact {} normal {}", n, m, e.p, z.p);
        }
    }

    #[test]
    fn r_is_bounded(x in prop::collection::vec(-1e6f64..1e6, 3..40), seed in any::<u64>()) {
        let y: Vec<f64> = (0..x.len()).map(|i| ((seed >> (i % 64)) & 1) as f64).collect();
        if let Ok(r) = point_biserial_r(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }
}
