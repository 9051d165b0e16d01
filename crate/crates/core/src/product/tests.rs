use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use super::*;
use crate::model::{extract_process_executions, parse_event_log, Event, EventLog, ParseMode};
use crate::petri::{parse_ocpn, ReplayOutcome, Token};
use crate::synth::{random_instance, SynthLimits};

fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn packaging() -> (ProcessExecution, AcceptingNet) {
    let log = parse_event_log(&fixture("packaging_log.json"), ParseMode::Strict).unwrap();
    let net = parse_ocpn(&fixture("packaging_net.json"), ParseMode::Strict).unwrap();
    (extract_process_executions(&log).remove(0), net)
}

fn execution(objects: &[(&str, &str)], events: &[(&str, &str, i64, &[&str])]) -> ProcessExecution {
    let objects = objects.iter().map(|(o, t)| (ObjectId::from(*o), TypeName::from(*t))).collect();
    let events = events
        .iter()
        .map(|(id, a, ts, objs)| {
            (
                EventId::from(*id),
                Event {
                    activity: (*a).into(),
                    timestamp: *ts,
                    objects: objs.iter().map(|o| ObjectId::from(*o)).collect(),
                },
            )
        })
        .collect();
    extract_process_executions(&EventLog::new(objects, events).unwrap()).remove(0)
}

fn empty_net() -> AcceptingNet {
    AcceptingNet::new(NetBuilder::new().build().unwrap(), &BTreeMap::new(), &[], &[]).unwrap()
}

#[test]
fn fresh_ids_round_trip() {
    let (px, net) = packaging();
    let maps = generate_fresh_ids(&px, &net);
    assert_eq!(maps.len(), 3);
    assert_eq!(maps.new_type.len(), 3);
    for (o, fresh) in &maps.new_obj {
        assert_eq!(&maps.orob[fresh], o);
        assert_eq!(&maps.orty[&maps.new_type[o]], &px.objects[o]);
        assert!(!px.objects.contains_key(fresh));
    }
    let fresh_types: BTreeSet<&TypeName> = maps.new_type.values().collect();
    assert_eq!(fresh_types.len(), 3);
    assert!(fresh_types.iter().all(|t| net.net.type_idx(t).is_none()));
}

#[test]
fn fresh_ids_for_empty_execution() {
    let maps = generate_fresh_ids(&ProcessExecution::default(), &empty_net());
    assert!(maps.is_empty());
    assert!(maps.orty.is_empty());
}

#[test]
fn fresh_ids_avoid_collisions() {
    let px = execution(
        &[("o", "t"), ("o#px", "t"), ("o#px-type", "t")],
        &[("e1", "a", 1, &["o", "o#px", "o#px-type"])],
    );
    let maps = generate_fresh_ids(&px, &empty_net());
    let mut all: HashSet<String> = px.objects.keys().map(|o| o.to_string()).collect();
    all.insert("t".into());
    let fresh: Vec<String> = maps
        .new_obj
        .values()
        .map(|o| o.to_string())
        .chain(maps.new_type.values().map(|t| t.to_string()))
        .collect();
    assert_eq!(fresh.len(), 6);
    assert_eq!(fresh.iter().collect::<HashSet<_>>().len(), 6);
    assert!(fresh.iter().all(|f| !all.contains(f)));
    assert_eq!(maps.new_obj[&ObjectId::from("o")].as_str(), "o#px2");
}

#[test]
fn px_net_single_event() {
    let px = execution(&[("o", "t")], &[("e1", "a", 1, &["o"])]);
    let maps = generate_fresh_ids(&px, &empty_net());
    let net = build_px_net(&px, &maps).unwrap();
    assert_eq!(net.net.places().len(), 2);
    assert_eq!(net.net.transitions().len(), 1);
    let arcs: usize = net.net.transitions().iter().map(|t| t.arcs().count()).sum();
    assert_eq!(arcs, 2);
    assert!(!net.net.has_variable_arcs());
}

#[test]
fn px_net_path_length() {
    let px = execution(
        &[("o", "t")],
        &[("e1", "a", 1, &["o"]), ("e2", "b", 2, &["o"]), ("e3", "c", 3, &["o"]), ("e4", "d", 4, &["o"])],
    );
    let maps = generate_fresh_ids(&px, &empty_net());
    let net = build_px_net(&px, &maps).unwrap();
    assert_eq!(net.net.places().len(), 5);
}

#[test]
fn px_net_of_running_example() {
    let (px, dj) = packaging();
    let maps = generate_fresh_ids(&px, &dj);
    let net = build_px_net(&px, &maps).unwrap();
    assert_eq!(net.net.transitions().len(), px.events.len());
    // (n - 1) + 2 places per object trace
    let expected: usize = px.traces.values().map(|t| t.len() + 1).sum();
    assert_eq!(net.net.places().len(), expected);
    assert_eq!(net.initial.len(), 3);
    assert_eq!(net.final_marking.len(), 3);
    let e1 = net.net.transition(net.net.transition_idx("px:e1").unwrap());
    assert_eq!(e1.inputs.len(), 3);
    assert_eq!(e1.label.as_ref().unwrap().as_str(), "receive sample order");
}

#[test]
fn px_net_rejects_empty_trace() {
    let mut px = execution(&[("o", "t")], &[("e1", "a", 1, &["o"])]);
    px.objects.insert("ghost".into(), "t".into());
    let maps = generate_fresh_ids(&px, &empty_net());
    assert_eq!(build_px_net(&px, &maps), Err(ProductError::EmptyTrace("ghost".into())));
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// A binding sequence of the execution net reaches its final marking
/// exactly when the event order is a topological order of the execution.
#[test]
fn px_net_language_is_linearizations() {
    let px = execution(
        &[("a", "x"), ("b", "y"), ("c", "y")],
        &[
            ("e1", "s", 1, &["a", "b"]),
            ("e2", "p", 2, &["b"]),
            ("e3", "q", 3, &["a"]),
            ("e4", "r", 4, &["a", "c"]),
            ("e5", "z", 5, &["c"]),
        ],
    );
    let maps = generate_fresh_ids(&px, &empty_net());
    let net = build_px_net(&px, &maps).unwrap();
    let events: Vec<&EventId> = px.events.keys().collect();
    let mut accepted = 0;
    for perm in permutations(events.len()) {
        let order: Vec<&EventId> = perm.iter().map(|&i| events[i]).collect();
        let pos: BTreeMap<&EventId, usize> = order.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        let topological = px.edges.iter().all(|(a, b)| pos[a] < pos[b]);
        let bindings: Vec<_> = order
            .iter()
            .map(|e| {
                let fresh: Vec<ObjectId> = px.events[*e].objects.iter().map(|o| maps.new_obj[o].clone()).collect();
                net.binding_from_ids(&format!("px:{e}"), &fresh).unwrap()
            })
            .collect();
        let replayed = net.replay(&bindings).is_accepted();
        assert_eq!(replayed, topological, "{order:?}");
        accepted += replayed as usize;
    }
    assert!(accepted > 1);
}

#[test]
fn expansion_of_receive_transitions() {
    let (px, net) = packaging();
    let expanded = expand_variable_arcs(&net, &px.objects, &ExpansionOptions::default()).unwrap();
    assert!(!expanded.net.has_variable_arcs());
    let ids: BTreeSet<&str> = expanded.net.transitions().iter().map(|t| t.id.as_str()).collect();
    for c in 0..=2 {
        assert!(ids.contains(format!("t_receive_sample[item={c}]").as_str()));
        let t = expanded.net.transition_idx(&format!("t_receive_product[item={c}]")).unwrap();
        let item_start = expanded.net.place_idx("item_start").unwrap();
        assert_eq!(expanded.net.weight(item_start, t, true), c);
    }
    assert!(ids.contains("t_add_sample"));
    assert_eq!(expanded.net.transitions().len(), net.net.transitions().len() + 4);
    assert_eq!(
        expanded.describe_marking(&expanded.initial),
        "[(package_start,p1) (item_start,i1) (item_start,i2)]"
    );
    assert_eq!(
        expanded.describe_marking(&expanded.final_marking),
        "[(package_end,p1) (item_end,i1) (item_end,i2)]"
    );

    let pruned = expand_variable_arcs(
        &net,
        &px.objects,
        &ExpansionOptions {
            min_variable_count: 1,
            ..ExpansionOptions::default()
        },
    )
    .unwrap();
    assert_eq!(pruned.net.transitions().len(), net.net.transitions().len() + 2);
}

#[test]
fn expansion_cap() {
    let (px, net) = packaging();
    let err = expand_variable_arcs(
        &net,
        &px.objects,
        &ExpansionOptions {
            copy_cap: 2,
            ..ExpansionOptions::default()
        },
    );
    assert!(matches!(err, Err(ProductError::ExpansionCap { copies: 3, .. })));
}

/// Reachable markings under the variable-arc semantics: a variable type may
/// bind any subset of its objects.
fn reach_with_variable_arcs(an: &AcceptingNet) -> BTreeSet<Vec<(PlaceId, ObjectId)>> {
    fn subsets(v: &[u32]) -> Vec<Vec<u32>> {
        (0..1u32 << v.len())
            .map(|mask| v.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, o)| *o).collect())
            .collect()
    }
    let net = &an.net;
    let mut seen: HashSet<Marking> = HashSet::from([an.initial.clone()]);
    let mut queue = VecDeque::from([an.initial.clone()]);
    while let Some(m) = queue.pop_front() {
        for t in 0..net.transitions().len() {
            let tr = net.transition(t);
            let types: BTreeSet<u32> = tr.arcs().map(|a| net.place_type_idx(a.place)).collect();
            let mut choices: Vec<(u32, Vec<Vec<u32>>)> = Vec::new();
            for ty in types {
                let objs = an.objects.of_net_type(ty).to_vec();
                let fixed = tr
                    .arcs()
                    .find(|a| net.place_type_idx(a.place) == ty && !a.is_variable())
                    .map(|a| a.weight as usize);
                let opts = subsets(&objs)
                    .into_iter()
                    .filter(|s| fixed.is_none_or(|k| s.len() == k))
                    .collect();
                choices.push((ty, opts));
            }
            let mut combos: Vec<Vec<(u32, Vec<u32>)>> = vec![vec![]];
            for (ty, opts) in &choices {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        opts.iter().map(move |o| {
                            let mut c = c.clone();
                            c.push((*ty, o.clone()));
                            c
                        })
                    })
                    .collect();
            }
            for objects in combos {
                let b = Binding { transition: t, objects };
                if let Some(next) = m.apply(&an.cons(&b), &an.prod(&b)) {
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    seen.iter()
        .map(|m| {
            let mut v = an.marking_to_ids(m);
            v.sort();
            v
        })
        .collect()
}

fn reach_plain(an: &AcceptingNet) -> BTreeSet<Vec<(PlaceId, ObjectId)>> {
    let mut seen: HashSet<Marking> = HashSet::from([an.initial.clone()]);
    let mut queue = VecDeque::from([an.initial.clone()]);
    while let Some(m) = queue.pop_front() {
        for t in 0..an.net.transitions().len() {
            for b in an.enabled_bindings(&m, t, 100_000).unwrap() {
                let next = an.fire(&m, &b).unwrap();
                if seen.insert(next.clone()) {
                    queue.push_back(next);
                }
            }
        }
    }
    seen.iter()
        .map(|m| {
            let mut v = an.marking_to_ids(m);
            v.sort();
            v
        })
        .collect()
}

#[test]
fn expansion_preserves_reachable_markings() {
    let mut with_variable = 0;
    for seed in 0..120 {
        let inst = random_instance(seed, &SynthLimits::default());
        let expanded = expand_variable_arcs(&inst.net, &inst.px.objects, &ExpansionOptions::default()).unwrap();
        let original = AcceptingNet::new(
            inst.net.net.clone(),
            &inst.px.objects,
            &expanded.marking_to_ids(&expanded.initial),
            &expanded.marking_to_ids(&expanded.final_marking),
        )
        .unwrap();
        with_variable += inst.net.net.has_variable_arcs() as usize;
        assert_eq!(reach_with_variable_arcs(&original), reach_plain(&expanded), "seed {seed}");
    }
    assert!(with_variable >= 10, "only {with_variable} instances with variable arcs");
}

fn single_net(label: &str, ty: &str) -> AcceptingNet {
    let mut b = NetBuilder::new();
    b.place("s", ty).place("e", ty).transition("t", Some(label)).arc("s", "t", 1).arc("t", "e", 1);
    AcceptingNet::new(b.build().unwrap(), &BTreeMap::new(), &[], &[]).unwrap()
}

fn product_of(px: &ProcessExecution, dj: &AcceptingNet) -> SyncProductNet {
    let maps = generate_fresh_ids(px, dj);
    let px_net = build_px_net(px, &maps).unwrap();
    let dj_net = expand_variable_arcs(dj, &px.objects, &ExpansionOptions::default()).unwrap();
    build_synchronous_product(&px_net, &dj_net, &maps).unwrap()
}

#[test]
fn minimal_product_has_three_transitions() {
    let px = execution(&[("o", "t")], &[("e1", "A", 1, &["o"])]);
    let sp = product_of(&px, &single_net("A", "t"));
    let ids: Vec<&str> = sp.underlying.net.transitions().iter().map(|t| t.id.as_str()).collect();
    assert_eq!(ids, vec!["log:e1", "model:t", "sync:e1|t"]);
    assert_eq!(
        (0..3).map(|t| sp.tag(t)).collect::<Vec<_>>(),
        vec![TransitionTag::Log, TransitionTag::Model, TransitionTag::Sync]
    );
    assert!(!sp.underlying.net.has_variable_arcs());
    // Both in-arcs of the synchronous transition share one variable.
    let vars: BTreeSet<&str> = sp.nu.iter().map(|n| n.var.as_str()).collect();
    assert_eq!(sp.nu.len(), 2);
    assert_eq!(vars, BTreeSet::from(["t"]));
}

#[test]
fn disjoint_labels_give_no_sync() {
    let px = execution(&[("o", "t")], &[("e1", "A", 1, &["o"])]);
    let sp = product_of(&px, &single_net("B", "t"));
    assert_eq!(sp.count(TransitionTag::Sync), 0);
    assert_eq!(sp.count(TransitionTag::Log), 1);
    assert_eq!(sp.count(TransitionTag::Model), 1);
}

#[test]
fn running_example_product() {
    let (px, dj) = packaging();
    let sp = product_of(&px, &dj);
    let dj_expanded = expand_variable_arcs(&dj, &px.objects, &ExpansionOptions::default()).unwrap();
    assert_eq!(sp.count(TransitionTag::Log), px.events.len());
    assert_eq!(sp.count(TransitionTag::Model), dj_expanded.net.transitions().len());
    let syncs: BTreeSet<&str> = sp
        .underlying
        .net
        .transitions()
        .iter()
        .filter(|t| t.id.as_str().starts_with("sync:"))
        .map(|t| t.id.as_str())
        .collect();
    // e1 only pairs with the two-item copy; the pack-item events pair with
    // both pack transitions; add sample twice; prepare/send product once.
    assert_eq!(
        syncs,
        BTreeSet::from([
            "sync:e1|t_receive_sample[item=2]",
            "sync:e2|t_prepare_product",
            "sync:e3|t_send_product",
            "sync:e4|t_pack_product_item",
            "sync:e4|t_pack_sample_item",
            "sync:e5|t_add_sample",
            "sync:e6|t_add_sample",
            "sync:e7|t_pack_product_item",
            "sync:e7|t_pack_sample_item",
        ])
    );
    for t in 0..sp.underlying.net.transitions().len() {
        assert!(sp.tag(t) != TransitionTag::Sync || !sp.underlying.net.transition(t).is_silent());
    }
}

fn fresh(sp: &SyncProductNet, o: &str) -> u32 {
    sp.underlying.objects.idx(&sp.maps.new_obj[&ObjectId::from(o)]).unwrap()
}

fn obj(sp: &SyncProductNet, o: &str) -> u32 {
    sp.underlying.objects.idx(&ObjectId::from(o)).unwrap()
}

fn marking(sp: &SyncProductNet, tokens: &[(&str, u32)]) -> Marking {
    Marking::from_tokens(
        tokens
            .iter()
            .map(|(p, o)| Token::new(sp.underlying.net.place_idx(p).unwrap(), *o))
            .collect(),
    )
}

fn generic_valid(sp: &SyncProductNet, m: &Marking, t: usize) -> Vec<Binding> {
    sp.underlying
        .enabled_bindings(m, t, 100_000)
        .unwrap()
        .into_iter()
        .filter(|b| nu_valid(sp, b))
        .collect()
}

#[test]
fn nu_matches_identical_objects() {
    let px = execution(&[("i1", "item"), ("i2", "item")], &[("e1", "A", 1, &["i1"]), ("e2", "B", 2, &["i1", "i2"])]);
    let sp = product_of(&px, &single_net("A", "item"));
    let t = sp.underlying.net.transition_idx("sync:e1|t").unwrap();
    let good = marking(&sp, &[("px:i1:s", fresh(&sp, "i1")), ("dj:s", obj(&sp, "i1"))]);
    assert_eq!(valid_bindings_sp(&sp, &good, t, 100).unwrap().len(), 1);
    assert_eq!(generic_valid(&sp, &good, t).len(), 1);
    let bad = marking(&sp, &[("px:i1:s", fresh(&sp, "i1")), ("dj:s", obj(&sp, "i2"))]);
    assert!(valid_bindings_sp(&sp, &bad, t, 100).unwrap().is_empty());
    assert!(generic_valid(&sp, &bad, t).is_empty());
    // Without ν the generic enumeration would accept the mismatched pair.
    assert_eq!(sp.underlying.enabled_bindings(&bad, t, 100).unwrap().len(), 1);
}

#[test]
fn order_receipt_sync_has_one_valid_binding() {
    let (px, dj) = packaging();
    let sp = product_of(&px, &dj);
    let t = sp.underlying.net.transition_idx("sync:e1|t_receive_sample[item=2]").unwrap();
    let m = sp.underlying.initial.clone();
    let direct = valid_bindings_sp(&sp, &m, t, 100).unwrap();
    assert_eq!(direct.len(), 1);
    assert_eq!(generic_valid(&sp, &m, t), direct);
    let consumed = sp.underlying.cons(&direct[0]);
    assert_eq!(consumed.len(), 6);
    // Brute force over every assignment of three de-jure objects.
    let all_dj: Vec<u32> = ["p1", "i1", "i2"].iter().map(|o| obj(&sp, o)).collect();
    let mut valid = BTreeSet::new();
    for p in &all_dj {
        for i in &all_dj {
            for j in &all_dj {
                let mut items = vec![*i, *j];
                items.sort();
                items.dedup();
                let mut objects = direct[0].objects.clone();
                for (ty, objs) in objects.iter_mut() {
                    match sp.underlying.net.types()[*ty as usize].as_str() {
                        "package" => *objs = vec![*p],
                        "item" => *objs = items.clone(),
                        _ => {}
                    }
                }
                let b = Binding { transition: t, objects };
                if sp.underlying.is_enabled(&m, &b) && nu_valid(&sp, &b) {
                    valid.insert(b);
                }
            }
        }
    }
    assert_eq!(valid.into_iter().collect::<Vec<_>>(), direct);
}

#[test]
fn sync_effect_is_px_then_dj() {
    let (px, dj) = packaging();
    let maps = generate_fresh_ids(&px, &dj);
    let px_net = build_px_net(&px, &maps).unwrap();
    let dj_net = expand_variable_arcs(&dj, &px.objects, &ExpansionOptions::default()).unwrap();
    let sp = build_synchronous_product(&px_net, &dj_net, &maps).unwrap();
    let t = sp.underlying.net.transition_idx("sync:e1|t_receive_sample[item=2]").unwrap();
    let b = valid_bindings_sp(&sp, &sp.underlying.initial, t, 100).unwrap().remove(0);
    let after = sp.underlying.fire(&sp.underlying.initial, &b).unwrap();
    let ids: BTreeSet<(PlaceId, ObjectId)> = sp.underlying.marking_to_ids(&after).into_iter().collect();

    let pb = px_net
        .binding_from_ids("px:e1", &maps.new_obj.values().cloned().collect::<Vec<_>>())
        .unwrap();
    let db = dj_net
        .binding_from_ids("t_receive_sample[item=2]", &px.objects.keys().cloned().collect::<Vec<_>>())
        .unwrap();
    let pm = px_net.fire(&px_net.initial, &pb).unwrap();
    let dm = dj_net.fire(&dj_net.initial, &db).unwrap();
    let mut expected: BTreeSet<(PlaceId, ObjectId)> = px_net.marking_to_ids(&pm).into_iter().collect();
    expected.extend(dj_net.marking_to_ids(&dm).into_iter().map(|(p, o)| (PlaceId::from(format!("dj:{p}")), o)));
    assert_eq!(ids, expected);

    // Log and model copies touch only their own side.
    for t in 0..sp.underlying.net.transitions().len() {
        let tr = sp.underlying.net.transition(t);
        match sp.tag(t) {
            TransitionTag::Log => assert!(tr.arcs().all(|a| sp.is_px_place(a.place))),
            TransitionTag::Model => assert!(tr.arcs().all(|a| !sp.is_px_place(a.place))),
            TransitionTag::Sync => {}
        }
    }
}

/// The direct construction of synchronous bindings agrees with generic
/// enumeration plus the ν filter on every reachable marking.
#[test]
fn direct_sync_bindings_match_filtered_enumeration() {
    let mut compared = 0;
    for seed in 0..80 {
        let inst = random_instance(seed, &SynthLimits::default());
        let sp = product_of(&inst.px, &inst.net);
        let an = &sp.underlying;
        let mut seen: HashSet<Marking> = HashSet::from([an.initial.clone()]);
        let mut queue = VecDeque::from([an.initial.clone()]);
        while let Some(m) = queue.pop_front() {
            if seen.len() > 5_000 {
                break;
            }
            for t in 0..an.net.transitions().len() {
                let direct = valid_bindings_sp(&sp, &m, t, 100_000).unwrap();
                if sp.tag(t) == TransitionTag::Sync {
                    assert_eq!(direct, generic_valid(&sp, &m, t), "seed {seed}");
                    compared += 1;
                }
                for b in direct {
                    let next = an.fire(&m, &b).unwrap();
                    if seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    assert!(compared > 100);
}

#[test]
fn product_json_has_tags_and_nu() {
    let px = execution(&[("o", "t")], &[("e1", "A", 1, &["o"])]);
    let sp = product_of(&px, &single_net("A", "t"));
    let raw = sp.to_json();
    let tags: Vec<&str> = raw.transitions.iter().map(|t| t.tag.as_deref().unwrap()).collect();
    assert_eq!(tags, vec!["log", "model", "sync"]);
    assert_eq!(raw.nu.len(), 2);
    let text = serde_json::to_string(&raw).unwrap();
    // The product itself parses back as a plain net.
    let back = parse_ocpn(text.as_bytes(), ParseMode::Strict).unwrap();
    assert_eq!(back.net.transitions().len(), 3);
    assert!(matches!(
        back.replay(&[]),
        ReplayOutcome::Reached { accepted: false, .. }
    ));
}
