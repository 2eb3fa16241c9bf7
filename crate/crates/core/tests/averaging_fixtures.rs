use std::f64::consts::{PI, TAU};

use timeavg::averaging::*;
use timeavg::{ComplexPoly, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

fn fibonacci_upto(n: usize) -> Vec<usize> {
    let mut v = vec![1, 2];
    while *v.last().unwrap() <= n {
        let k = v.len();
        v.push(v[k - 1] + v[k - 2]);
    }
    v
}

fn siegel_quadratic() -> ComplexPoly {
    ComplexPoly::new(vec![
        c(0.0, 0.0),
        C64::from_polar(1.0, TAU * golden()),
        c(1.0, 0.0),
    ])
    .unwrap()
}

fn block_size(cert: &Certificate) -> usize {
    cert.witnesses.chain_set.len()
}

#[test]
fn basilica_interior_has_no_average() {
    let f = ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap();
    let cert = certify(&f, c(0.1, 0.0), 3, &CertifyOptions::default()).unwrap();
    assert_eq!(cert.rule, Some(Rule::MonodromyBlock), "{:?}", cert.verdict);
    assert_eq!(
        cert.verdict,
        Verdict::NoTimeAverage {
            forced_zero_prefix_length: 3
        }
    );
    assert_eq!(cert.witnesses.s0.len(), 4);
    assert_eq!(block_size(&cert), 8);
    assert_eq!(cert.witnesses.block, cert.witnesses.chain_set);
    assert!(replay_certificate(&cert).unwrap().all_ok());
}

#[test]
fn basilica_minus_one_component_at_odd_level() {
    let f = ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap();
    let z = c(-1.0, 0.05);
    let odd = certify(&f, z, 3, &CertifyOptions::default()).unwrap();
    // two fiber points in the component, block exactly d^{N-1}
    assert_eq!(odd.witnesses.s0.len(), 2);
    assert_eq!(odd.witnesses.block.len(), 4);
    assert!(matches!(odd.verdict, Verdict::Inconclusive { .. }));
    for n in [2, 4] {
        let cert = certify(&f, z, n, &CertifyOptions::default()).unwrap();
        assert_eq!(
            cert.verdict,
            Verdict::NoTimeAverage {
                forced_zero_prefix_length: n
            }
        );
    }
}

#[test]
fn quartic_block_is_half_the_fiber() {
    let f = ComplexPoly::from_real(&[0.0, 0.0, -2.0, 0.0, 1.0]).unwrap();
    let z = c(2f64.sqrt() + 0.01, 0.005);
    let cert = certify(&f, z, 2, &CertifyOptions::default()).unwrap();
    assert_eq!(cert.witnesses.s0.len(), 2, "{:?}", cert.verdict);
    assert_eq!(cert.witnesses.fiber.len(), 16);
    assert_eq!(block_size(&cert), 8);
    assert_eq!(
        cert.verdict,
        Verdict::NoTimeAverage {
            forced_zero_prefix_length: 2
        }
    );
    assert!(replay_certificate(&cert).unwrap().all_ok());
}

#[test]
fn attracting_fixed_point_basin() {
    let f = ComplexPoly::from_real(&[-0.7, 0.0, 1.0]).unwrap();
    let fixed = (1.0 - (1.0f64 + 2.8).sqrt()) / 2.0;
    assert!((2.0 * fixed).abs() < 1.0);
    for z in [c(fixed + 0.05, 0.02), c(0.1, 0.1)] {
        let cert = certify(&f, z, 3, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.rule, Some(Rule::MonodromyBlock));
        assert_eq!(
            cert.verdict,
            Verdict::NoTimeAverage {
                forced_zero_prefix_length: 3
            },
            "z = {z}"
        );
        assert!(block_size(&cert) > 4);
    }
}

#[test]
fn siegel_disk_has_average() {
    let f = siegel_quadratic();
    let cert = certify(&f, c(0.0, 0.0), 2, &CertifyOptions::default()).unwrap();
    assert_eq!(
        cert.rule,
        Some(Rule::SiegelConstruction),
        "{:?}",
        cert.verdict
    );
    let Verdict::TimeAverageExists { weights } = &cert.verdict else {
        panic!()
    };
    assert_eq!(weights.group_sizes.len(), 6);
    assert!(replay_certificate(&cert).unwrap().all_ok());
}

#[test]
fn golden_rotation_gaps() {
    let theta = golden();
    let f = ComplexPoly::new(vec![c(0.0, 0.0), C64::from_polar(1.0, TAU * theta)]).unwrap();
    let (w, t) = build_siegel_weights(&f, c(0.0, 0.0), 0.5, 8, &SiegelOptions::default()).unwrap();
    for e in &t.entries[1..] {
        assert!(e.sup_norm <= 0.5f64.powi(e.group as i32) + 1e-9, "{e:?}");
    }
    let fib = fibonacci_upto(1 << 22);
    let first_gap = w.entries[1].index - w.entries[0].index;
    assert!(fib.contains(&first_gap), "{first_gap}");
    let tol = 0.5 / 3f64.powi(7);
    // the first gap is the first return below tolerance
    let oracle = (1..)
        .find(|&g: &usize| (PI * g as f64 * theta).sin().abs() < tol)
        .unwrap();
    assert_eq!(first_gap, oracle);
    for pair in w.entries.windows(2) {
        let g = pair[1].index - pair[0].index;
        assert!(g > 0);
    }
}
