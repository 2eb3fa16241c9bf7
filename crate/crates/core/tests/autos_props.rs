use proptest::prelude::*;
use timeavg::autos::{compose, MultiPoly, MultiPolyMap};
use timeavg::C64;

fn small_map() -> impl Strategy<Value = MultiPolyMap> {
    let term = (0u32..3, 0u32..3, -2i32..3);
    let comp = prop::collection::vec(term, 1..4);
    (comp.clone(), comp).prop_map(|(a, b)| {
        let mk = |ts: Vec<(u32, u32, i32)>| {
            MultiPoly::from_terms(
                2,
                ts.into_iter()
                    .map(|(i, j, c)| (vec![i, j], C64::new(c as f64, 0.0))),
            )
            .unwrap()
        };
        MultiPolyMap::new(vec![mk(a), mk(b)]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn composition_matches_evaluation(f in small_map(), g in small_map(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let p = [C64::new(x, 0.3), C64::new(y, -0.2)];
        let lhs = compose(&f, &g).unwrap().eval(&p);
        let rhs = f.eval(&g.eval(&p));
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).norm() <= 1e-9 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn composition_is_associative(f in small_map(), g in small_map(), h in small_map()) {
        let left = compose(&compose(&f, &g).unwrap(), &h).unwrap();
        let right = compose(&f, &compose(&g, &h).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn literal_round_trip(f in small_map()) {
        let back: MultiPolyMap = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        prop_assert_eq!(back, f);
    }
}
