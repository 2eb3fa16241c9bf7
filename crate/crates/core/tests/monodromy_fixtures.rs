use std::f64::consts::PI;

use timeavg::monodromy::*;
use timeavg::permgroup::{restrict_to_level, PermGroup};
use timeavg::{ComplexPoly, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn z2p1() -> ComplexPoly {
    ComplexPoly::from_real(&[1.0, 0.0, 1.0]).unwrap()
}

fn fixtures() -> Vec<(&'static str, ComplexPoly, C64)> {
    vec![
        ("z^2+1", z2p1(), c(0.0, 0.0)),
        (
            "z^2-1",
            ComplexPoly::from_real(&[-1.0, 0.0, 1.0]).unwrap(),
            c(-0.9, 0.1),
        ),
        (
            "z^4-2z^2",
            ComplexPoly::from_real(&[0.0, 0.0, -2.0, 0.0, 1.0]).unwrap(),
            c(0.3, 0.2),
        ),
        (
            "cubic",
            ComplexPoly::new(vec![c(0.31, -0.2), c(0.4, 0.7), c(-0.55, 0.1), c(1.0, 0.0)]).unwrap(),
            c(0.05, 0.02),
        ),
    ]
}

fn arc(center: C64, r: f64, from: f64, sweep: f64, steps: usize) -> Vec<C64> {
    (0..=steps)
        .map(|k| center + C64::from_polar(r, from + sweep * k as f64 / steps as f64))
        .collect()
}

#[test]
fn z2p1_level_two_facts() {
    let f = z2p1();
    let m = monodromy_data(&f, 2, c(0.0, 0.0)).unwrap();
    assert_eq!(m.lifts.len(), 2);
    let group = PermGroup::new(4, m.generators()).unwrap();
    assert_eq!(group.order().to_string(), "8");

    let around_one = m
        .lollipops
        .iter()
        .position(
            |l| matches!(l.kind, LoopKind::Lollipop { value, .. } if (value - 1.0).norm() < 1e-9),
        )
        .unwrap();
    let g = &m.lifts[around_one].perm;
    assert!(!g.is_identity());
    assert!(g.then(g).is_identity());
}

#[test]
fn clockwise_detour_loop_swaps_preimages_of_i() {
    let f = z2p1();
    let tree = PreimageTree::new(&f, c(0.0, 0.0), 2).unwrap();
    let eps = 0.3;
    // 0 -> 1-eps, clockwise over the top of 1, on to 2-eps, one clockwise
    // turn around 2, then back the same way
    let mut stem = vec![c(0.0, 0.0)];
    stem.extend(arc(c(1.0, 0.0), eps, PI, -PI, 48));
    stem.push(c(2.0 - eps, 0.0));
    let mut pts = stem[1..].to_vec();
    pts.extend(arc(c(2.0, 0.0), eps, PI, -2.0 * PI, 96).into_iter().skip(1));
    pts.extend(stem.iter().rev().skip(1).take(stem.len() - 2).copied());
    let path = LoopPath::closed(c(0.0, 0.0), &pts);
    assert_eq!(path.winding_number(c(2.0, 0.0)), -1);
    assert_eq!(path.winding_number(c(1.0, 0.0)), 0);

    let lift = lift_loop(&f, 2, &tree, &path).unwrap();
    let level1 = tree.level(1);
    let level2 = tree.level(2);
    for (i, &w) in level2.iter().enumerate() {
        let parent = level1[tree.ancestor(2, i, 1)];
        let j = lift.perm.apply(i);
        if (parent - c(0.0, 1.0)).norm() < 1e-9 {
            assert_ne!(j, i, "preimage {w} of i should move");
            assert!((level2[j] + w).norm() < 1e-8);
        } else {
            assert_eq!(j, i, "preimage {w} of -i should stay");
        }
    }
}

#[test]
fn infinity_lift_is_full_cycle_and_planar_product() {
    for (name, f, p) in fixtures() {
        for n in 1..=3 {
            let m = monodromy_data(&f, n, p).unwrap_or_else(|e| panic!("{name} N={n}: {e}"));
            assert!(m.infinity_lift.perm.is_full_cycle(), "{name} N={n}");
            assert_eq!(m.planar_product(), m.infinity_lift.perm, "{name} N={n}");
            assert!(
                PermGroup::new(m.tree.level(n).len(), m.generators())
                    .unwrap()
                    .is_transitive(),
                "{name} N={n}"
            );
        }
    }
}

#[test]
fn restriction_matches_lower_level() {
    for (name, f, p) in fixtures() {
        let d = f.degree();
        let top = monodromy_data(&f, 3, p).unwrap();
        let lower = PreimageTree::new(&f, p, 2).unwrap();
        for (l, t) in top.lollipops.iter().zip(&top.lifts) {
            let direct = lift_loop(&f, 2, &lower, l).unwrap();
            let restricted = restrict_to_level(&t.perm, d, 3, 2).expect("tree compatible");
            assert_eq!(restricted, direct.perm, "{name}");
        }
    }
}

#[test]
fn small_perturbation_keeps_lifts() {
    for (name, f, p) in fixtures() {
        let m = monodromy_data(&f, 2, p).unwrap();
        for (k, (l, t)) in m.lollipops.iter().zip(&m.lifts).enumerate() {
            let moved = l.perturbed(0.2 * l.clearance, 11 + k as u64);
            let again = lift_loop(&f, 2, &m.tree, &moved).unwrap();
            assert_eq!(again.perm, t.perm, "{name} loop {k}");
        }
    }
}
