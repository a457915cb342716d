mod support;

use facetprep::hierarchy::TermTree;
use facetprep::intervals::{IntervalLayout, IntervalSpec, IntervalSpecChain};
use facetprep::tabular::{parse_table, serialize_raw, Delimiter, RawTable};
use facetprep::transform::{apply, replay, LogEntry, Session};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use support::*;

fn cell(tab: bool) -> impl Strategy<Value = String> {
    if tab {
        "[a-zA-Z0-9 ,;\"'/é-]{0,8}".prop_map(|s| s.trim().to_string()).boxed()
    } else {
        "[a-zA-Z0-9 ,;\"'/é\t\n-]{0,8}".boxed()
    }
}

fn table(tab: bool) -> impl Strategy<Value = RawTable> {
    (1usize..5).prop_flat_map(move |cols| {
        let header = prop::collection::vec("[A-Za-z][A-Za-z0-9 ]{0,6}", cols);
        let rows = prop::collection::vec(prop::collection::vec(cell(tab), cols), 0..6);
        (header, rows).prop_map(move |(h, rows)| {
            let h = h.into_iter().enumerate().map(|(i, n)| format!("{n}{i}")).collect();
            let rows = rows.into_iter().filter(|r: &Vec<String>| r.iter().any(|c| !c.is_empty())).collect();
            RawTable::new(h, rows, if tab { Delimiter::Tab } else { Delimiter::Comma })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn csv_round_trip(t in table(false)) {
        let back = parse_table(&serialize_raw(&t, Delimiter::Comma), Delimiter::Comma).unwrap();
        prop_assert_eq!(back.header, t.header);
        prop_assert_eq!(back.rows, t.rows);
    }

    #[test]
    fn tsv_round_trip(t in table(true)) {
        let back = parse_table(&serialize_raw(&t, Delimiter::Tab), Delimiter::Tab).unwrap();
        prop_assert_eq!(back.header, t.header);
        prop_assert_eq!(back.rows, t.rows);
    }

    #[test]
    fn applied_steps_keep_invariants(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut d = dataset_from_raw(&random_table(&mut rng));
        for _ in 0..15 {
            let t = random_op(&mut rng, &d);
            if let Ok(next) = apply(&d, &t) {
                prop_assert!(next.validate().is_empty(), "{:?}: {:?}", t, next.validate());
                for f in &next.facets {
                    if let Some(tree) = &f.hierarchy {
                        prop_assert!(tree.check().is_ok());
                    }
                }
                d = next;
            }
        }
    }

    #[test]
    fn replay_is_deterministic(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let raw = random_table(&mut rng);
        let source = dataset_from_raw(&raw);
        let mut s = Session::new(source.clone());
        for _ in 0..12 {
            let t = random_op(&mut rng, s.dataset());
            let _ = s.apply(t);
        }
        let (a, oa) = replay(&source, s.log());
        prop_assert_eq!(&a, s.dataset());
        prop_assert!(oa.iter().all(|o| o.is_applied()));
        let (b, ob) = replay(&source, s.log());
        prop_assert_eq!(a, b);
        prop_assert_eq!(oa, ob);
        let perturbed = dataset_from_raw(&perturb(&mut rng, &raw));
        let (p, op) = replay(&perturbed, s.log());
        prop_assert_eq!(op.len(), s.log().len());
        prop_assert!(p.validate().is_empty());
    }

    #[test]
    fn undo_matches_prefix_replay(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let source = dataset_from_raw(&random_table(&mut rng));
        let mut s = Session::new(source.clone());
        let mut states = vec![source.clone()];
        for _ in 0..10 {
            let t = random_op(&mut rng, s.dataset());
            if s.apply(t).is_ok() {
                states.push(s.dataset().clone());
            }
        }
        while let Some(expected) = states.pop() {
            prop_assert_eq!(s.dataset(), &expected);
            if s.undo().is_err() {
                prop_assert!(states.is_empty());
            }
        }
        prop_assert_eq!(s.dataset(), &source);
    }

    #[test]
    fn linear_intervals_partition(min in -1e4f64..1e4, span in 0.5f64..1e4, width in 0.1f64..1e3, probe in 0.0f64..=1.0) {
        let layout = IntervalLayout::build(&IntervalSpecChain::single(IntervalSpec::Linear { min, max: min + span, width })).unwrap();
        let b = layout.finest();
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(b[0], min);
        prop_assert_eq!(*b.last().unwrap(), min + span);
        let v = min + span * probe;
        prop_assert_eq!(layout.terms(0).iter().filter(|t| t.contains(v)).count(), 1);
    }

    #[test]
    fn log_lines_round_trip(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let d = dataset_from_raw(&random_table(&mut rng));
        let e = LogEntry::new(7, random_op(&mut rng, &d));
        let line = serde_json::to_string(&e).unwrap();
        let back: LogEntry = serde_json::from_str(&line).unwrap();
        prop_assert_eq!(back, e);
    }
}

#[test]
fn term_tree_roots_have_no_parent() {
    let values = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let t = TermTree::new().add_parent(&["a".into(), "b".into()], "G", &values).unwrap();
    let t = t.add_parent(&["G".into()], "H", &values).unwrap();
    assert_eq!(t.roots(), ["H"]);
    assert_eq!(t.ancestors("a"), ["G", "H"]);
    assert!(t.move_term("H", Some("a"), &values).is_err());
}
