use alignpot::selection::{
    k_from_fraction, select_fraction, select_top_k, select_uniform, UNIFORM_RNG,
};
use alignpot::Error;
use proptest::prelude::*;

fn scores(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(id, s)| (id.to_string(), *s)).collect()
}

#[test]
fn top_k_examples() {
    let s = scores(&[("a", 3.0), ("b", 1.0), ("c", 2.0)]);
    let r = select_top_k(&s, 2).unwrap();
    assert_eq!(r.chosen_ids, ["a", "c"]);
    assert_eq!(r.tau_k, Some(2.0));

    let all = select_top_k(&s, 3).unwrap();
    assert_eq!(all.chosen_ids.len(), 3);
    assert_eq!(all.tau_k, Some(1.0));

    let tie = scores(&[("b", 1.0), ("a", 1.0), ("c", 0.0)]);
    assert_eq!(select_top_k(&tie, 1).unwrap().chosen_ids, ["a"]);
}

#[test]
fn top_k_errors() {
    let s = scores(&[("a", 3.0), ("b", 1.0)]);
    assert!(matches!(select_top_k(&s, 0), Err(Error::Argument(_))));
    assert!(matches!(select_top_k(&s, 3), Err(Error::Argument(_))));
    let dup = scores(&[("a", 3.0), ("a", 1.0)]);
    assert!(matches!(select_top_k(&dup, 1), Err(Error::DuplicateId(_))));
}

#[test]
fn fraction_rules() {
    assert_eq!(k_from_fraction(10, 0.4).unwrap(), 4);
    assert_eq!(k_from_fraction(3, 0.4).unwrap(), 1);
    assert_eq!(k_from_fraction(100, 0.4).unwrap(), 40);
    assert_eq!(k_from_fraction(7, 1.0).unwrap(), 7);
    assert!(k_from_fraction(10, 0.0).is_err());
    assert!(k_from_fraction(10, 1.01).is_err());
    let s: Vec<(String, f64)> = (0..10).map(|i| (format!("r{i}"), i as f64)).collect();
    assert_eq!(select_fraction(&s, 1.0).unwrap().k, 10);
}

#[test]
fn uniform_baseline() {
    let ids: Vec<String> = (0..1000).map(|i| format!("r{i:04}")).collect();
    let a = select_uniform(&ids, 0.4, 1).unwrap();
    let b = select_uniform(&ids, 0.4, 2).unwrap();
    assert_eq!(a, select_uniform(&ids, 0.4, 1).unwrap());
    assert_eq!(a.k, 400);
    assert_eq!(a.tau_k, None);
    assert_eq!(a.rng.as_deref(), Some(UNIFORM_RNG));
    let overlap = a
        .chosen_ids
        .iter()
        .filter(|id| b.chosen_ids.contains(id))
        .count();
    assert!((overlap as i64 - 160).abs() < 60, "overlap {overlap}");
    assert_eq!(select_uniform(&ids, 1.0, 99).unwrap().chosen_ids, ids);
}

#[test]
fn manifest_json_shape() {
    let s = scores(&[("a", 3.0), ("b", 1.0)]);
    let json = select_top_k(&s, 1)
        .unwrap()
        .with_metric("m_one")
        .to_manifest_json()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["metric"], "m_one");
    assert_eq!(v["k"], 1);
    assert_eq!(v["tau_k"], 3.0);
    assert!(v["seed"].is_null());
    assert_eq!(v["chosen_ids"][0], "a");
}

fn corpus() -> impl Strategy<Value = Vec<(String, f64)>> {
    prop::collection::vec(-20i32..20, 2..60).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, s)| (format!("id{i:03}"), s as f64 / 4.0))
            .collect()
    })
}

proptest! {
    #[test]
    fn chosen_ids_respect_threshold_and_order(s in corpus(), k_seed in any::<prop::sample::Index>()) {
        let k = k_seed.index(s.len()) + 1;
        let r = select_top_k(&s, k).unwrap();
        prop_assert_eq!(r.chosen_ids.len(), k);
        let tau = r.tau_k.unwrap();
        let score = |id: &str| s.iter().find(|p| p.0 == id).unwrap().1;
        for w in r.chosen_ids.windows(2) {
            let (a, b) = (score(&w[0]), score(&w[1]));
            prop_assert!(a > b || (a == b && w[0] < w[1]));
        }
        for (id, v) in &s {
            if r.chosen_ids.contains(id) {
                prop_assert!(*v >= tau);
            } else {
                prop_assert!(*v <= tau);
            }
        }
    }

    #[test]
    fn adding_a_record_below_threshold_is_harmless(s in corpus(), k_seed in any::<prop::sample::Index>()) {
        let k = k_seed.index(s.len()) + 1;
        let r = select_top_k(&s, k).unwrap();
        let mut more = s.clone();
        more.push(("zzz-new".to_string(), r.tau_k.unwrap() - 1.0));
        prop_assert_eq!(select_top_k(&more, k).unwrap().chosen_ids, r.chosen_ids);
    }

    #[test]
    fn top_k_mean_dominates(s in corpus(), k_seed in any::<prop::sample::Index>()) {
        let k = k_seed.index(s.len() - 1) + 1;
        let r = select_top_k(&s, k).unwrap();
        let all = s.iter().map(|p| p.1).sum::<f64>() / s.len() as f64;
        let chosen = s.iter().filter(|p| r.chosen_ids.contains(&p.0)).map(|p| p.1).sum::<f64>() / k as f64;
        prop_assert!(chosen >= all);
    }

    #[test]
    fn uniform_draws_distinct_ids(n in 1usize..200, f in 0.01f64..=1.0, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let r = select_uniform(&ids, f, seed).unwrap();
        prop_assert_eq!(r.k, k_from_fraction(n, f).unwrap());
        let mut sorted = r.chosen_ids.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), r.k);
        // input order is preserved
        let positions: Vec<usize> = r.chosen_ids.iter().map(|id| ids.iter().position(|x| x == id).unwrap()).collect();
        prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
    }
}
