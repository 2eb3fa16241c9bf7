//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so that every criterion reports even when an earlier one fails.

use std::collections::{BTreeMap, HashSet};
use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timeavg::autos::{self, C2Class, Finiteness};
use timeavg::averaging::{
    build_siegel_weights, certify, refute_global, replay_certificate, rerun_certificate,
    Certificate, CertifyOptions, Rule, SiegelOptions, Verdict,
};
use timeavg::dynamics::green_value;
use timeavg::monodromy::{
    choose_base_point, infinity_cycle, lift_loop, monodromy_data, LoopKind, PreimageTree,
};
use timeavg::permgroup::{
    chain_closure, is_full_tree_aut, minimal_block, restrict_to_level, tree_aut_order,
    tree_compatible, Perm, PermGroup, DEFAULT_CLOSURE_CAP,
};
use timeavg::polycore::{critical_data, fiber, fixtures};
use timeavg::{ComplexPoly, C64};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn z2p1_facts() -> Check {
    let f = fixtures::z2p1();
    let m1 = monodromy_data(&f, 1, c(0.0, 0.0)).map_err(err)?;
    let pts = m1.tree.level(1);
    ensure!(pts.len() == 2, "level-1 fiber has {} points", pts.len());
    let is_pm_i = |z: C64| (z - c(0.0, 1.0)).norm() < 1e-12 || (z + c(0.0, 1.0)).norm() < 1e-12;
    ensure!(
        pts.iter().all(|&z| is_pm_i(z)) && (pts[0] - pts[1]).norm() > 1.0,
        "level-1 fiber {pts:?} is not {{i, -i}}"
    );
    ensure!(
        m1.lifts.len() == 1,
        "{} critical values at level 1",
        m1.lifts.len()
    );
    let swap = Perm::from_images(vec![1, 0]).unwrap();
    ensure!(
        m1.lifts[0].perm == swap,
        "level-1 lift {:?}",
        m1.lifts[0].perm
    );

    let m2 = monodromy_data(&f, 2, c(0.0, 0.0)).map_err(err)?;
    let group = PermGroup::new(4, m2.generators()).map_err(err)?;
    ensure!(
        group.order() == BigUint::from(8u32),
        "order {}",
        group.order()
    );
    ensure!(
        group.order() == tree_aut_order(2, 2),
        "not the full tree group"
    );
    let around_one = m2
        .lollipops
        .iter()
        .position(
            |l| matches!(l.kind, LoopKind::Lollipop { value, .. } if (value - 1.0).norm() < 1e-9),
        )
        .ok_or("no lollipop around 1")?;
    let g = &m2.lifts[around_one].perm;
    ensure!(!g.is_identity(), "level-2 lift around 1 is trivial");
    ensure!(
        g.then(g).is_identity(),
        "square of the lift around 1 is {g:?}^2"
    );
    Ok(format!(
        "lift1 = (i -i), |IMG_2| = 8, g^2 = id for g = {:?}",
        g.cycles()
    ))
}

fn random_cubics() -> Check {
    let mut qualified = 0;
    for seed in 0..10 {
        let f = fixtures::random_monic(3, seed);
        let cd = critical_data(&f, 2).map_err(err)?;
        if !cd.max_cardinality {
            continue;
        }
        qualified += 1;
        let base = choose_base_point(&f, 2, c(0.0, 0.0), 0.5, |_| true).map_err(err)?;
        let m = monodromy_data(&f, 2, base).map_err(|e| format!("seed {seed}: {e}"))?;
        let group = PermGroup::new(9, m.generators()).map_err(err)?;
        ensure!(
            is_full_tree_aut(&group, 3, 2).map_err(err)?,
            "seed {seed}: not full, order {}",
            group.order()
        );
        ensure!(
            group.order() == BigUint::from(1296u32),
            "seed {seed}: order {}",
            group.order()
        );
    }
    ensure!(qualified > 0, "no seed had 4 distinct critical values");
    Ok(format!(
        "{qualified}/10 seeds with 4 critical values, all of order 1296"
    ))
}

fn quartic_block() -> Check {
    let f = fixtures::quartic();
    let z = c(2f64.sqrt() + 0.01, 0.005);
    let cert = certify(&f, z, 2, &CertifyOptions::default()).map_err(err)?;
    let w = &cert.witnesses;
    ensure!(
        cert.rule == Some(Rule::MonodromyBlock),
        "rule {:?}: {:?}",
        cert.rule,
        cert.verdict
    );
    let base = w.base.ok_or("no base point")?;
    let mut p = base;
    for _ in 0..200 {
        p = f.eval(p);
    }
    ensure!(
        p.norm() < 1e-9,
        "base {base} does not lie in the basin of 0"
    );
    ensure!(w.fiber.len() == 16, "fiber {}", w.fiber.len());
    ensure!(w.s0.len() == 2, "|S0| = {}", w.s0.len());
    ensure!(w.block.len() == 8, "|block| = {}", w.block.len());
    ensure!(w.chain_set.len() == 8, "|chain| = {}", w.chain_set.len());
    ensure!(w.block.len() > 4, "block does not exceed d^(N-1)");
    ensure!(
        cert.verdict
            == Verdict::NoTimeAverage {
                forced_zero_prefix_length: 2
            },
        "{:?}",
        cert.verdict
    );
    Ok("|S0| = 2, |fiber| = 16, |block| = |chain| = 8 > 4".into())
}

fn infinity_cycles() -> Check {
    let cases = [
        ("z^2+1", fixtures::z2p1(), c(0.0, 0.0)),
        ("z^2-1", fixtures::basilica(), c(-0.9, 0.1)),
        ("z^4-2z^2", fixtures::quartic(), c(0.3, 0.2)),
        (
            "cubic",
            ComplexPoly::new(vec![c(0.31, -0.2), c(0.4, 0.7), c(-0.55, 0.1), c(1.0, 0.0)]).unwrap(),
            c(0.05, 0.02),
        ),
    ];
    let mut checked = 0;
    for (name, f, p) in cases {
        let d = f.degree();
        for n in 1..=3 {
            let tree = PreimageTree::new(&f, p, n).map_err(err)?;
            let lift = infinity_cycle(&f, n, &tree).map_err(|e| format!("{name} N={n}: {e}"))?;
            let len = d.pow(n as u32);
            ensure!(
                lift.perm.cycle_type() == vec![len],
                "{name} N={n}: cycle type {:?}",
                lift.perm.cycle_type()
            );
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} (polynomial, N) pairs give a single d^N-cycle"
    ))
}

fn fibonacci_upto(n: usize) -> Vec<usize> {
    let mut v = vec![1, 2];
    while *v.last().unwrap() <= n {
        let k = v.len();
        v.push(v[k - 1] + v[k - 2]);
    }
    v
}

fn zeckendorf_terms(mut n: usize, fib: &[usize]) -> usize {
    let mut terms = 0;
    for &x in fib.iter().rev() {
        if x <= n {
            n -= x;
            terms += 1;
        }
    }
    terms
}

fn siegel_construction() -> Check {
    let theta = fixtures::golden();
    let rotation = ComplexPoly::new(vec![c(0.0, 0.0), C64::from_polar(1.0, TAU * theta)]).unwrap();
    let (w, trace) =
        build_siegel_weights(&rotation, c(0.0, 0.0), 0.5, 8, &SiegelOptions::default())
            .map_err(err)?;
    for e in trace.entries.iter().filter(|e| e.group >= 1) {
        ensure!(
            e.sup_norm <= 0.5f64.powi(e.group as i32) + 1e-9,
            "rotation group {}: {:e}",
            e.group,
            e.sup_norm
        );
    }
    let tol = 0.5 / 3f64.powi(7);
    let oracle = (1..)
        .find(|&g: &usize| (PI * g as f64 * theta).sin().abs() < tol)
        .unwrap();
    let gaps: Vec<usize> = w
        .entries
        .iter()
        .filter_map(|e| e.partner.map(|p| e.index - p))
        .collect();
    let fib = fibonacci_upto(*gaps.iter().max().unwrap_or(&1));
    ensure!(
        gaps.first() == Some(&oracle),
        "first gap {:?}, oracle {oracle}",
        gaps.first()
    );
    ensure!(
        fib.contains(&oracle),
        "oracle return {oracle} is not Fibonacci"
    );
    for &g in &gaps {
        ensure!(
            (PI * g as f64 * theta).sin().abs() < tol,
            "gap {g} is not a return below {tol:e}"
        );
    }
    let mut terms: BTreeMap<usize, usize> = BTreeMap::new();
    for &g in &gaps {
        *terms.entry(zeckendorf_terms(g, &fib)).or_default() += 1;
    }
    let fibonacci = terms.get(&1).copied().unwrap_or(0);

    let quad = fixtures::siegel_quadratic();
    let (_, qtrace) = build_siegel_weights(&quad, c(0.0, 0.0), 1e-2, 5, &SiegelOptions::default())
        .map_err(err)?;
    for e in qtrace.entries.iter().filter(|e| e.group >= 1) {
        ensure!(
            e.sup_norm <= 0.5f64.powi(e.group as i32) + 1e-6,
            "quadratic group {}: {:e}",
            e.group,
            e.sup_norm
        );
    }
    let summary = format!(
        "norm bounds hold; first gap {oracle} = oracle; {fibonacci}/{} gaps Fibonacci, Zeckendorf terms {terms:?}",
        gaps.len()
    );
    ensure!(fibonacci == gaps.len(), "{summary}");
    Ok(summary)
}

fn global_rank() -> Check {
    let mut passed = 0;
    let mut skipped = 0;
    for i in 0..20u64 {
        let d = 2 + (i % 2) as usize;
        let n = 2 + ((i / 2) % 2) as usize;
        let f = fixtures::random_monic(d, 1000 + i);
        for s in 0..5 {
            let cert = match refute_global(&f, n, 1, 100 * i + s) {
                Ok(cert) => cert,
                Err(_) => {
                    skipped += 1;
                    continue;
                }
            };
            let want = d.pow(n as u32 - 1) + 1;
            let rank = cert.witnesses.vandermonde_rank;
            ensure!(
                cert.witnesses.fiber.len() == d.pow(n as u32),
                "poly {i}: fiber size"
            );
            ensure!(
                rank == Some(want),
                "poly {i} seed {s}: rank {rank:?}, want {want}"
            );
            ensure!(
                matches!(cert.verdict, Verdict::NoTimeAverage { .. }),
                "poly {i} seed {s}: {:?}",
                cert.verdict
            );
            passed += 1;
        }
    }
    Ok(format!(
        "{passed} simple fibers at full rank, {skipped} non-simple skipped"
    ))
}

fn degree_two_spot_check() -> Check {
    let fixed = (1.0 - 3.8f64.sqrt()) / 2.0;
    ensure!(
        (fixed * fixed - 0.7 - fixed).abs() < 1e-12 && (2.0 * fixed).abs() < 1.0,
        "fixed point"
    );
    let cases = [
        (fixtures::basilica(), c(0.1, 0.0)),
        (fixtures::basilica(), c(0.0, 0.3)),
        (fixtures::z2m07(), c(fixed + 0.05, 0.02)),
        (fixtures::z2m07(), c(0.1, 0.1)),
    ];
    for (f, z) in cases {
        let cert = certify(&f, z, 3, &CertifyOptions::default()).map_err(err)?;
        ensure!(
            cert.rule == Some(Rule::MonodromyBlock),
            "{f} at {z}: rule {:?}",
            cert.rule
        );
        ensure!(
            cert.verdict
                == Verdict::NoTimeAverage {
                    forced_zero_prefix_length: 3
                },
            "{f} at {z}: {:?}",
            cert.verdict
        );
    }
    Ok(format!(
        "4 interior points, fixed point {fixed:.4} with |2z| < 1"
    ))
}

fn automorphisms() -> Check {
    let degrees = autos::degree_growth(&autos::fixtures::henon(), 5).degrees;
    ensure!(
        degrees == vec![2, 4, 8, 16, 32],
        "Henon degrees {degrees:?}"
    );

    let elementary = autos::fixtures::elementary();
    let r = autos::locally_finite_relation(&elementary, 5, false).map_err(err)?;
    let one = |x: f64| c(x, 0.0);
    ensure!(
        r.verdict
            == Finiteness::LocallyFinite {
                coefficients: vec![one(1.0), one(-2.0), one(1.0)],
                includes_identity: false
            },
        "elementary: {:?}",
        r.verdict
    );
    let it = autos::iterates(&elementary, 3, autos::DEFAULT_MONOMIAL_CAP);
    let maps: Vec<&autos::MultiPolyMap> = it.maps.iter().collect();
    let exact = autos::relation_residual(&maps, &[one(1.0), one(-2.0), one(1.0)]);
    ensure!(exact == 0.0, "elementary relation residual {exact:e}");

    let nagata = autos::fixtures::nagata();
    let r = autos::locally_finite_relation(&nagata, 6, false).map_err(err)?;
    let Finiteness::LocallyFinite { coefficients, .. } = &r.verdict else {
        return Err(format!("Nagata: {:?}", r.verdict));
    };
    let it = autos::iterates(&nagata, coefficients.len(), autos::DEFAULT_MONOMIAL_CAP);
    let maps: Vec<&autos::MultiPolyMap> = it.maps.iter().collect();
    let exact = autos::relation_residual(&maps, coefficients);
    ensure!(exact == 0.0, "Nagata relation residual {exact:e}");

    let h = autos::classify_c2(
        &autos::fixtures::henon(),
        Some(&autos::fixtures::henon_inverse()),
    )
    .map_err(err)?;
    ensure!(
        h.class == C2Class::HenonLike
            && h.global_average == Some(false)
            && h.inverse_verified == Some(true),
        "Henon: {h:?}"
    );
    let expect = [
        ("henon-cubic", C2Class::HenonLike, Some(false)),
        ("elementary", C2Class::ElementaryLike, Some(true)),
        ("elementary-affine", C2Class::ElementaryLike, Some(true)),
        ("rotation", C2Class::Affine, Some(true)),
    ];
    for (name, class, average) in expect {
        let map = autos::fixtures::by_name(name).ok_or(format!("no fixture {name}"))?;
        let k = autos::classify_c2(&map, None).map_err(err)?;
        ensure!(
            k.class == class && k.global_average == average,
            "{name}: {k:?}"
        );
    }
    Ok(format!(
        "Henon degrees {degrees:?}, relations (1,-2,1) and Nagata {:?} exact",
        coefficients.iter().map(|a| a.re).collect::<Vec<_>>()
    ))
}

fn brute_elements(g: &PermGroup, limit: usize) -> Option<Vec<Perm>> {
    let id = Perm::identity(g.degree());
    let mut seen: HashSet<Perm> = HashSet::from([id.clone()]);
    let mut stack = vec![id];
    while let Some(x) = stack.pop() {
        for s in g.generators() {
            let y = x.then(s);
            if seen.insert(y.clone()) {
                if seen.len() > limit {
                    return None;
                }
                stack.push(y);
            }
        }
    }
    Some(seen.into_iter().collect())
}

fn brute_min_block(n: usize, seed: &[usize], elems: &[Perm]) -> Vec<usize> {
    let seed_mask: u32 = seed.iter().map(|&x| 1u32 << x).sum();
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << n) {
        if mask & seed_mask != seed_mask {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|&x| mask >> x & 1 == 1).collect();
        if best.as_ref().is_some_and(|b| b.len() <= set.len()) {
            continue;
        }
        let mine: HashSet<usize> = set.iter().copied().collect();
        let is_block = elems.iter().all(|e| {
            let hits = set.iter().filter(|&&x| mine.contains(&e.apply(x))).count();
            hits == 0 || hits == set.len()
        });
        if is_block {
            best = Some(set);
        }
    }
    best.unwrap()
}

/// Grows `s0` by `g(S)` for every element `g` with `g(S) ∩ S ≠ ∅` until stable.
fn brute_chain(n: usize, s0: &[usize], elems: &[Perm]) -> Vec<usize> {
    let mut cur = vec![false; n];
    s0.iter().for_each(|&x| cur[x] = true);
    loop {
        let members: Vec<usize> = (0..n).filter(|&x| cur[x]).collect();
        let mut grew = false;
        for e in elems {
            let img = e.image_of_set(&members);
            if img.iter().any(|&y| cur[y]) {
                for y in img {
                    grew |= !cur[y];
                    cur[y] = true;
                }
            }
        }
        if !grew {
            return (0..n).filter(|&x| cur[x]).collect();
        }
    }
}

fn property_suites() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let polys = vec![
        fixtures::z2p1(),
        fixtures::basilica(),
        fixtures::quartic(),
        fixtures::siegel_quadratic(),
        fixtures::random_monic(3, 5),
    ];

    for f in &polys {
        let d = f.degree() as f64;
        for _ in 0..1000 {
            let z = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let g = green_value(f, z, 1e-12).map_err(err)?.value;
            let gf = green_value(f, f.eval(z), 1e-12).map_err(err)?.value;
            ensure!(
                (gf - d * g).abs() <= 1e-8 * (1.0 + gf),
                "{f}: G(f(z)) = {gf}, d G(z) = {}",
                d * g
            );
        }
    }

    let mut fibers = 0;
    for f in &polys {
        for n in 1..=3 {
            for _ in 0..5 {
                let p = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let fib = fiber(f, p, n).map_err(err)?;
                ensure!(
                    fib.max_residual <= 1e-9,
                    "{f} N={n}: residual {:e}",
                    fib.max_residual
                );
                fibers += 1;
            }
        }
    }

    let mut lifted = 0;
    let mut groups: Vec<PermGroup> = Vec::new();
    let cases = [
        (fixtures::z2p1(), c(0.0, 0.0)),
        (fixtures::basilica(), c(-0.9, 0.1)),
        (fixtures::quartic(), c(0.3, 0.2)),
    ];
    for (f, p) in &cases {
        let d = f.degree();
        let n = if d == 2 { 3 } else { 2 };
        let m = monodromy_data(f, n, *p).map_err(err)?;
        for loop_path in m.lollipops.iter().chain(std::iter::once(&m.infinity)) {
            let top = lift_loop(f, n, &m.tree, loop_path).map_err(err)?;
            ensure!(
                tree_compatible(&top.perm, d, n),
                "{f}: lift not tree-compatible"
            );
            for k in 1..n {
                let low = lift_loop(f, k, &m.tree, loop_path).map_err(err)?;
                let restricted =
                    restrict_to_level(&top.perm, d, n, k).ok_or("restriction failed")?;
                ensure!(
                    restricted == low.perm,
                    "{f}: level {k} restriction differs from the level-{k} lift"
                );
            }
            lifted += 1;
        }
        groups.push(PermGroup::new(d.pow(n as u32), m.generators()).map_err(err)?);
    }

    let mut suite = 0;
    while suite < 40 {
        let n = rng.gen_range(2..=12);
        let gens: Vec<Perm> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let mut v: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    v.swap(i, rng.gen_range(0..=i));
                }
                Perm::from_images(v).unwrap()
            })
            .collect();
        let g = PermGroup::new(n, gens).map_err(err)?;
        if g.is_transitive() && brute_elements(&g, 5_000).is_some() {
            groups.push(g);
            suite += 1;
        }
    }
    let mut compared = 0;
    for g in &groups {
        let n = g.degree();
        let elems = brute_elements(g, 5_000).ok_or("monodromy group too large to enumerate")?;
        for _ in 0..6 {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let mut seed = vec![a, b];
            seed.sort_unstable();
            seed.dedup();
            let block = minimal_block(g, &seed).map_err(err)?;
            ensure!(
                block.points == brute_min_block(n, &seed, &elems),
                "block differs on degree {n}"
            );
            let cc = chain_closure(g, &seed, DEFAULT_CLOSURE_CAP).map_err(err)?;
            ensure!(
                cc.replay(g.generators(), n),
                "chain witness does not replay"
            );
            ensure!(
                cc.set == brute_chain(n, &seed, &elems),
                "chain differs on degree {n}"
            );
            compared += 1;
        }
    }

    let certs: Vec<Certificate> = vec![
        certify(
            &fixtures::basilica(),
            c(0.1, 0.0),
            3,
            &CertifyOptions::default(),
        )
        .map_err(err)?,
        certify(
            &fixtures::quartic(),
            c(2f64.sqrt() + 0.01, 0.005),
            2,
            &CertifyOptions::default(),
        )
        .map_err(err)?,
        certify(
            &fixtures::siegel_quadratic(),
            c(0.0, 0.0),
            2,
            &CertifyOptions::default(),
        )
        .map_err(err)?,
        certify(
            &fixtures::z2p1(),
            c(3.0, 0.0),
            2,
            &CertifyOptions::default(),
        )
        .map_err(err)?,
        refute_global(&fixtures::random_monic(3, 9), 2, 5, 31).map_err(err)?,
    ];
    for cert in &certs {
        let stored = serde_json::to_string(cert).map_err(err)?;
        let parsed: Certificate = serde_json::from_str(&stored).map_err(err)?;
        ensure!(
            serde_json::to_string(&parsed).map_err(err)? == stored,
            "serde round trip changes bytes"
        );
        let rerun = rerun_certificate(&parsed).map_err(err)?;
        ensure!(
            serde_json::to_string(&rerun).map_err(err)? == stored,
            "rerun of {:?} is not byte-identical",
            cert.rule
        );
        ensure!(
            replay_certificate(&parsed).map_err(err)?.all_ok(),
            "replay of {:?} fails",
            cert.rule
        );
    }
    Ok(format!(
        "5000 Green points, {fibers} fibers, {lifted} lifted loops, {compared} block/chain seeds on {} groups, {} certificates",
        groups.len(),
        certs.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, Option<Duration>); 9] = [
        (
            "z^2+1 monodromy facts",
            z2p1_facts,
            Some(Duration::from_secs(5)),
        ),
        (
            "random cubics have full IMG",
            random_cubics,
            Some(Duration::from_secs(60)),
        ),
        (
            "z^4-2z^2 block of half the fiber",
            quartic_block,
            Some(Duration::from_secs(30)),
        ),
        ("loop at infinity is a d^N-cycle", infinity_cycles, None),
        (
            "Siegel weight construction",
            siegel_construction,
            Some(Duration::from_secs(120)),
        ),
        ("global rank check", global_rank, None),
        ("degree-two basins", degree_two_spot_check, None),
        (
            "polynomial automorphisms",
            automorphisms,
            Some(Duration::from_secs(30)),
        ),
        ("property suites", property_suites, None),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if took > *l => Err(format!("took {took:.1?}, limit {l:?}")),
            (o, _) => o,
        };
        let (status, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failures += outcome.is_err() as usize;
        println!("criterion {} {status} [{took:.2?}] {name}: {detail}", i + 1);
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
