use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::model::ParseMode;

const PACKAGING: &str = include_str!("../../fixtures/packaging_net.json");

fn objs(v: &[(&str, &str)]) -> BTreeMap<ObjectId, TypeName> {
    v.iter().map(|(o, t)| ((*o).into(), (*t).into())).collect()
}

fn toks(v: &[(&str, &str)]) -> Vec<(PlaceId, ObjectId)> {
    v.iter().map(|(p, o)| ((*p).into(), (*o).into())).collect()
}

/// in (item) -> t -> out (item) with configurable input weight.
fn item_net(weight: u32) -> ObjectCentricPetriNet {
    let mut b = NetBuilder::new();
    b.place("in", "item")
        .place("out", "item")
        .transition("t", Some("take"))
        .arc("in", "t", weight)
        .arc("t", "out", weight);
    b.build().unwrap()
}

fn packaging_with(objects: &[(&str, &str)]) -> AcceptingNet {
    let parsed = parse_ocpn(PACKAGING.as_bytes(), ParseMode::Strict).unwrap();
    let init: Vec<(&str, &str)> = objects
        .iter()
        .map(|(o, t)| (if *t == "package" { "package_start" } else { "item_start" }, *o))
        .collect();
    let fin: Vec<(&str, &str)> = objects
        .iter()
        .map(|(o, t)| (if *t == "package" { "package_end" } else { "item_end" }, *o))
        .collect();
    AcceptingNet::new(parsed.net, &objs(objects), &toks(&init), &toks(&fin)).unwrap()
}

#[test]
fn degenerate_net_parses() {
    let raw = br#"{"places":[{"id":"p","type":"t"}],"transitions":[],"arcs":[],
        "initial_marking":[],"final_marking":[]}"#;
    let an = parse_ocpn(raw, ParseMode::Strict).unwrap();
    assert_eq!(an.net.places().len(), 1);
    assert!(an.net.transitions().is_empty());
    assert!(an.initial.is_empty() && an.final_marking.is_empty());
}

#[test]
fn variable_arc_outside_arcs_is_rejected() {
    let raw = br#"{"places":[{"id":"p","type":"t"}],"transitions":[{"id":"x","label":"a"}],
        "arcs":[],"variable_arcs":[{"source":"p","target":"x"}]}"#;
    assert_eq!(
        parse_ocpn(raw, ParseMode::Strict),
        Err(PetriError::VariableExceedsArc("p".into(), "x".into()))
    );
    assert!(PetriError::VariableExceedsArc("p".into(), "x".into())
        .to_string()
        .contains("F_var exceeds F"));
}

#[test]
fn parse_errors() {
    let dangling = br#"{"places":[],"transitions":[{"id":"x","label":null}],
        "arcs":[{"source":"nowhere","target":"x","weight":1,"variable":false}]}"#;
    assert_eq!(
        parse_ocpn(dangling, ParseMode::Strict),
        Err(PetriError::UnknownNode("nowhere".into()))
    );
    let bad_token = br#"{"places":[{"id":"a","type":"t"},{"id":"b","type":"u"}],"transitions":[],
        "initial_marking":[{"place":"a","object":"o"}],"final_marking":[{"place":"b","object":"o"}]}"#;
    assert!(matches!(
        parse_ocpn(bad_token, ParseMode::Strict),
        Err(PetriError::MismatchedTokenType { .. })
    ));
    assert!(matches!(
        parse_ocpn(b"[1,2]", ParseMode::Strict),
        Err(PetriError::Schema(_))
    ));
}

#[test]
fn packaging_net_shape() {
    let an = parse_ocpn(PACKAGING.as_bytes(), ParseMode::Strict).unwrap();
    assert_eq!(an.net.types().len(), 2);
    let with_var: Vec<&str> = an
        .net
        .transitions()
        .iter()
        .filter(|t| t.has_variable_arcs())
        .map(|t| t.id.as_str())
        .collect();
    assert_eq!(with_var, vec!["t_receive_sample", "t_receive_product"]);
    let t = an.net.transition_idx("t_receive_sample").unwrap();
    assert_eq!(an.net.tpl_var(t), [TypeName::from("item")].into());
    assert_eq!(an.net.tpl_nv(t), [TypeName::from("package")].into());
    assert!(check_well_formed(&an.net).is_ok());
    // Serialise and parse again.
    let again = serde_json::to_vec(&net_to_json(&an)).unwrap();
    assert_eq!(parse_ocpn(&again, ParseMode::Strict).unwrap(), an);
}

#[test]
fn well_formedness() {
    assert!(check_well_formed(&item_net(1)).is_ok());

    let mut b = NetBuilder::new();
    b.place("a", "item")
        .place("b", "item")
        .place("c", "item")
        .transition("t", Some("x"))
        .variable_arc("a", "t", 1)
        .arc("b", "t", 1)
        .arc("t", "c", 1);
    assert_eq!(check_well_formed(&b.build().unwrap()), Err(vec!["t".into()]));

    let mut b = NetBuilder::new();
    b.place("a", "item")
        .place("b", "package")
        .transition("t", Some("x"))
        .variable_arc("a", "t", 1)
        .arc("b", "t", 1);
    assert!(check_well_formed(&b.build().unwrap()).is_ok());
}

#[test]
fn enabled_bindings_choose_objects() {
    let an = AcceptingNet::new(
        item_net(1),
        &objs(&[("i1", "item"), ("i2", "item")]),
        &toks(&[("in", "i1"), ("in", "i2")]),
        &[],
    )
    .unwrap();
    let bs = an.enabled_bindings(&an.initial, 0, DEFAULT_BINDING_CAP).unwrap();
    assert_eq!(bs.len(), 2);
    assert_eq!(an.describe_binding(&bs[0]), "t(item:{i1})");
    assert_eq!(an.describe_binding(&bs[1]), "t(item:{i2})");
    assert!(an
        .enabled_bindings(&Marking::default(), 0, DEFAULT_BINDING_CAP)
        .unwrap()
        .is_empty());
}

#[test]
fn weight_two_arc_has_one_binding_by_subset_enumeration() {
    let an = AcceptingNet::new(
        item_net(2),
        &objs(&[("i1", "item"), ("i2", "item")]),
        &toks(&[("in", "i1"), ("in", "i2")]),
        &[],
    )
    .unwrap();
    // Oracle: every subset of {i1, i2} as a candidate object set.
    let universe = [ObjectId::from("i1"), ObjectId::from("i2")];
    let mut oracle = Vec::new();
    for mask in 0u32..4 {
        let subset: Vec<&ObjectId> = (0..2).filter(|i| mask & (1 << i) != 0).map(|i| &universe[i]).collect();
        if let Ok(b) = an.binding_from_ids("t", subset) {
            if an.is_enabled(&an.initial, &b) {
                oracle.push(b);
            }
        }
    }
    assert_eq!(oracle.len(), 1);
    let bs = an.enabled_bindings(&an.initial, 0, DEFAULT_BINDING_CAP).unwrap();
    assert_eq!(bs, oracle);
    assert_eq!(an.cons(&bs[0]).len(), 2);
}

#[test]
fn binding_cap_is_a_hard_error() {
    let names: Vec<String> = (0..20).map(|i| format!("i{i:02}")).collect();
    let objects: BTreeMap<ObjectId, TypeName> =
        names.iter().map(|n| (n.as_str().into(), "item".into())).collect();
    let init: Vec<(PlaceId, ObjectId)> = names.iter().map(|n| ("in".into(), n.as_str().into())).collect();
    let an = AcceptingNet::new(item_net(3), &objects, &init, &[]).unwrap();
    // C(20, 3) = 1140
    assert_eq!(an.enabled_bindings(&an.initial, 0, 2000).unwrap().len(), 1140);
    assert!(matches!(
        an.enabled_bindings(&an.initial, 0, 1000),
        Err(PetriError::BindingCap { count: 1140, .. })
    ));
}

#[test]
fn variable_arcs_require_preprocessing() {
    let an = packaging_with(&[("p1", "package"), ("i1", "item")]);
    let t = an.net.transition_idx("t_receive_sample").unwrap();
    assert_eq!(
        an.enabled_bindings(&an.initial, t, DEFAULT_BINDING_CAP),
        Err(PetriError::VariableArcs("t_receive_sample".into()))
    );
}

#[test]
fn fire_moves_tokens() {
    let an = AcceptingNet::new(
        item_net(1),
        &objs(&[("i1", "item")]),
        &toks(&[("in", "i1")]),
        &toks(&[("out", "i1")]),
    )
    .unwrap();
    let b = an.binding_from_ids("t", [&ObjectId::from("i1")]).unwrap();
    let cons = an.cons(&b);
    assert_eq!(an.fire(&cons, &b).unwrap(), an.prod(&b));
    assert_eq!(an.fire(&an.initial, &b).unwrap(), an.final_marking);
    assert_eq!(
        an.fire(&an.final_marking, &b),
        Err(PetriError::NotEnabled("t".into()))
    );
}

#[test]
fn silent_transition_moves_one_token() {
    let mut b = NetBuilder::new();
    b.place("p", "t")
        .place("q", "t")
        .transition("tau", None::<&str>)
        .arc("p", "tau", 1)
        .arc("tau", "q", 1);
    let an = AcceptingNet::new(
        b.build().unwrap(),
        &objs(&[("o", "t"), ("x", "t")]),
        &toks(&[("p", "o"), ("p", "x")]),
        &[],
    )
    .unwrap();
    assert!(an.net.transition(0).is_silent());
    let bind = an.binding_from_ids("tau", [&ObjectId::from("o")]).unwrap();
    let after = an.fire(&an.initial, &bind).unwrap();
    assert_eq!(an.describe_marking(&after), "[(p,x) (q,o)]");
}

#[test]
fn order_receipt_moves_three_tokens() {
    let an = packaging_with(&[("p1", "package"), ("i1", "item"), ("i2", "item")]);
    let ids: Vec<ObjectId> = vec!["p1".into(), "i1".into(), "i2".into()];
    let b = an.binding_from_ids("t_receive_sample", &ids).unwrap();
    let after = an.fire(&an.initial, &b).unwrap();
    assert_eq!(
        an.describe_marking(&after),
        "[(package_sample,p1) (item_sample,i1) (item_sample,i2)]"
    );
}

fn forward_search(an: &AcceptingNet, m: &Marking, depth: usize, path: &mut Vec<Binding>) -> bool {
    if *m == an.final_marking {
        return true;
    }
    if depth == 0 {
        return false;
    }
    for t in 0..an.net.transitions().len() {
        for b in an.enabled_bindings(m, t, DEFAULT_BINDING_CAP).unwrap() {
            let next = an.fire(m, &b).unwrap();
            path.push(b);
            if forward_search(an, &next, depth - 1, path) {
                return true;
            }
            path.pop();
        }
    }
    false
}

#[test]
fn replay_outcomes() {
    let an = AcceptingNet::new(item_net(1), &objs(&[("i1", "item")]), &toks(&[("in", "i1")]), &toks(&[("in", "i1")]))
        .unwrap();
    assert!(an.replay(&[]).is_accepted());

    let an = AcceptingNet::new(
        item_net(1),
        &objs(&[("i1", "item")]),
        &toks(&[("in", "i1")]),
        &toks(&[("out", "i1")]),
    )
    .unwrap();
    let b = an.binding_from_ids("t", [&ObjectId::from("i1")]).unwrap();
    assert!(an.replay(std::slice::from_ref(&b)).is_accepted());
    assert_eq!(an.replay(&[b.clone(), b]), ReplayOutcome::Failed { index: 1 });
}

#[test]
fn packaging_sequence_found_by_forward_search_replays() {
    // Hand-expanded variant: receive-sample with exactly two item arcs.
    let mut b = NetBuilder::new();
    let parsed = parse_ocpn(PACKAGING.as_bytes(), ParseMode::Strict).unwrap();
    for p in parsed.net.places() {
        b.place(p.id.clone(), p.ty.clone());
    }
    for t in parsed.net.transitions() {
        b.transition(t.id.clone(), t.label.clone());
        for a in &t.inputs {
            let w = if a.is_variable() { 2 } else { a.weight };
            b.arc(parsed.net.place(a.place).id.to_string(), t.id.to_string(), w);
        }
        for a in &t.outputs {
            let w = if a.is_variable() { 2 } else { a.weight };
            b.arc(t.id.to_string(), parsed.net.place(a.place).id.to_string(), w);
        }
    }
    let objects = objs(&[("p1", "package"), ("i1", "item"), ("i2", "item")]);
    let an = AcceptingNet::new(
        b.build().unwrap(),
        &objects,
        &toks(&[("package_start", "p1"), ("item_start", "i1"), ("item_start", "i2")]),
        &toks(&[("package_end", "p1"), ("item_end", "i1"), ("item_end", "i2")]),
    )
    .unwrap();
    let mut path = Vec::new();
    assert!(forward_search(&an, &an.initial.clone(), 8, &mut path));
    assert_eq!(path.len(), 7);
    assert!(an.replay(&path).is_accepted());
}

#[test]
fn combinations_are_lexicographic() {
    assert_eq!(combinations(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    assert_eq!(combinations(2, 0), vec![Vec::<usize>::new()]);
    assert!(combinations(1, 2).is_empty());
    for n in 0..7 {
        for k in 0..=n {
            assert_eq!(combinations(n, k).len() as u128, binomial(n, k));
        }
    }
}

fn two_type_net() -> AcceptingNet {
    let mut b = NetBuilder::new();
    b.place("a", "A")
        .place("b", "B")
        .place("c", "A")
        .place("d", "B")
        .transition("t1", Some("x"))
        .transition("t2", Some("y"))
        .transition("t3", None::<&str>)
        .arc("a", "t1", 1)
        .arc("b", "t1", 1)
        .arc("t1", "c", 1)
        .arc("t1", "d", 1)
        .arc("c", "t2", 2)
        .arc("t2", "a", 2)
        .arc("d", "t3", 1)
        .arc("t3", "b", 1);
    AcceptingNet::new(
        b.build().unwrap(),
        &objs(&[("a1", "A"), ("a2", "A"), ("b1", "B"), ("b2", "B")]),
        &[],
        &[],
    )
    .unwrap()
}

fn arb_marking_for(an: &AcceptingNet) -> impl Strategy<Value = Marking> {
    let places: Vec<(usize, Vec<u32>)> = (0..an.net.places().len())
        .map(|p| {
            let ty = an.net.place_type_idx(p);
            (p, an.objects.of_net_type(ty).to_vec())
        })
        .collect();
    prop::collection::vec((0..places.len(), 0usize..2), 0..10).prop_map(move |v| {
        Marking::from_tokens(
            v.into_iter()
                .map(|(p, o)| Token::new(places[p].0, places[p].1[o]))
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn firing_balances_tokens(m in arb_marking_for(&two_type_net())) {
        let an = two_type_net();
        for t in 0..an.net.transitions().len() {
            for b in an.enabled_bindings(&m, t, DEFAULT_BINDING_CAP).unwrap() {
                let next = an.fire(&m, &b).unwrap();
                prop_assert!(an.prod(&b).is_sub_multiset_of(&next));
                prop_assert_eq!(next.plus(&an.cons(&b)), m.plus(&an.prod(&b)));
                for tok in next.tokens() {
                    prop_assert_eq!(
                        an.objects.net_type(tok.object()),
                        Some(an.net.place_type_idx(tok.place()))
                    );
                }
            }
        }
    }

    #[test]
    fn enabled_bindings_monotone(m in arb_marking_for(&two_type_net()), extra in arb_marking_for(&two_type_net())) {
        let an = two_type_net();
        let bigger = m.plus(&extra);
        for t in 0..an.net.transitions().len() {
            let small = an.enabled_bindings(&m, t, DEFAULT_BINDING_CAP).unwrap();
            let large = an.enabled_bindings(&bigger, t, DEFAULT_BINDING_CAP).unwrap();
            for b in &small {
                prop_assert!(large.contains(b));
            }
        }
    }

    #[test]
    fn replay_is_fold_of_fire(choices in prop::collection::vec(0usize..16, 0..6)) {
        let base = two_type_net();
        let an = AcceptingNet::new(
            base.net.clone(),
            &base.objects.to_map(),
            &toks(&[("a", "a1"), ("a", "a2"), ("b", "b1"), ("b", "b2")]),
            &[],
        ).unwrap();
        let mut m = an.initial.clone();
        let mut seq = Vec::new();
        for c in choices {
            let all: Vec<Binding> = (0..an.net.transitions().len())
                .flat_map(|t| an.enabled_bindings(&m, t, DEFAULT_BINDING_CAP).unwrap())
                .collect();
            if all.is_empty() {
                break;
            }
            let b = all[c % all.len()].clone();
            m = an.fire(&m, &b).unwrap();
            seq.push(b);
        }
        match an.replay(&seq) {
            ReplayOutcome::Reached { marking, .. } => prop_assert_eq!(marking, m),
            ReplayOutcome::Failed { index } => prop_assert!(false, "failed at {}", index),
        }
    }
}
