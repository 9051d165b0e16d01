//! Flatten-and-align baseline: every object is aligned on its own against
//! the projection of the net to its type, and the per-object model parts are
//! compared for contradicting choices.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::alignment::{AlignmentGraph, Cost};
use crate::engine::{align_execution, AlignError, AlignOptions};
use crate::ids::{ActivityName, EventId, ObjectId, TypeName};
use crate::model::{extract_process_executions, Event, EventLog, ProcessExecution};
use crate::petri::{AcceptingNet, NetBuilder, PetriError};

/// The net restricted to the places of one type. Transitions without such
/// places disappear and variable arcs become weight-1 arcs.
pub fn project_net(an: &AcceptingNet, ty: &TypeName) -> Result<AcceptingNet, PetriError> {
    let net = &an.net;
    let mut b = NetBuilder::new();
    for p in net.places().iter().filter(|p| p.ty == *ty) {
        b.place(p.id.clone(), p.ty.clone());
    }
    for t in net.transitions() {
        let keep = |a: &&crate::petri::Arc| net.place(a.place).ty == *ty;
        if !t.arcs().any(|a| keep(&a)) {
            continue;
        }
        b.transition(t.id.clone(), t.label.clone());
        let w = |a: &crate::petri::Arc| if a.is_variable() { 1 } else { a.weight };
        for a in t.inputs.iter().filter(keep) {
            b.arc(net.place(a.place).id.to_string(), t.id.to_string(), w(a));
        }
        for a in t.outputs.iter().filter(keep) {
            b.arc(t.id.to_string(), net.place(a.place).id.to_string(), w(a));
        }
    }
    AcceptingNet::new(b.build()?, &BTreeMap::new(), &[], &[])
}

/// The single-object execution formed by the trace of `o`.
pub fn project_execution(px: &ProcessExecution, o: &ObjectId) -> Option<ProcessExecution> {
    let ty = px.objects.get(o)?.clone();
    let events: BTreeMap<EventId, Event> = px.traces.get(o)?
        .iter()
        .map(|e| {
            let ev = &px.events[e];
            (
                e.clone(),
                Event {
                    activity: ev.activity.clone(),
                    timestamp: ev.timestamp,
                    objects: BTreeSet::from([o.clone()]),
                },
            )
        })
        .collect();
    let log = EventLog::new(BTreeMap::from([(o.clone(), ty)]), events).ok()?;
    extract_process_executions(&log).into_iter().next()
}

/// Two objects sharing an event whose aligned model behaviour disagrees on a
/// label of a transition spanning several types.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Contradiction {
    pub label: ActivityName,
    /// Has `label` in its model part.
    pub object: ObjectId,
    /// Could have, but does not.
    pub other: ObjectId,
    pub event: EventId,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectAlignment {
    pub object: ObjectId,
    pub cost: Option<Cost>,
    pub model_labels: BTreeSet<ActivityName>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlattenReport {
    pub objects: Vec<ObjectAlignment>,
    pub flattened_cost: Cost,
    pub contradictions: Vec<Contradiction>,
}

/// Labels of transitions attached to at least two types.
pub fn shared_labels(an: &AcceptingNet) -> BTreeSet<ActivityName> {
    (0..an.net.transitions().len())
        .filter(|&t| an.net.tpl(t).len() >= 2)
        .filter_map(|t| an.net.transition(t).label.clone())
        .collect()
}

/// Model-part labels per object, given the labels each object could use.
/// A contradiction is reported when `o` and `o2` share an event, a shared
/// label occurs in the model part of `o` but not of `o2`, and the projected
/// net of `o2` offers that label.
pub fn find_contradictions(
    px: &ProcessExecution,
    model_labels: &BTreeMap<ObjectId, BTreeSet<ActivityName>>,
    available: &BTreeMap<ObjectId, BTreeSet<ActivityName>>,
    shared: &BTreeSet<ActivityName>,
) -> Vec<Contradiction> {
    let mut out = BTreeSet::new();
    for (e, ev) in &px.events {
        for o in &ev.objects {
            for o2 in &ev.objects {
                if o == o2 {
                    continue;
                }
                let (Some(mine), Some(theirs), Some(offer)) = (model_labels.get(o), model_labels.get(o2), available.get(o2))
                else {
                    continue;
                };
                for l in mine.intersection(shared) {
                    if !theirs.contains(l) && offer.contains(l) {
                        out.insert(Contradiction {
                            label: l.clone(),
                            object: o.clone(),
                            other: o2.clone(),
                            event: e.clone(),
                        });
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

fn labels_of(an: &AcceptingNet) -> BTreeSet<ActivityName> {
    an.net.transitions().iter().filter_map(|t| t.label.clone()).collect()
}

/// Labels of model-side moves that involve `o`.
pub fn object_model_labels(g: &AlignmentGraph, o: &ObjectId) -> BTreeSet<ActivityName> {
    g.moves()
        .iter()
        .filter(|m| m.model_objects().contains(o))
        .filter_map(|m| m.model_label().cloned())
        .collect()
}

/// Aligns every object separately against its projected net.
pub fn flatten_align(px: &ProcessExecution, an: &AcceptingNet, opts: &AlignOptions) -> Result<FlattenReport, AlignError> {
    let shared = shared_labels(an);
    let mut projections: BTreeMap<&TypeName, AcceptingNet> = BTreeMap::new();
    for ty in px.objects.values() {
        if !projections.contains_key(ty) {
            let p = project_net(an, ty).map_err(|e| AlignError::Product(e.into()))?;
            projections.insert(ty, p);
        }
    }
    let mut objects = Vec::new();
    let mut model_labels = BTreeMap::new();
    let mut available = BTreeMap::new();
    let mut total = Cost::ZERO;
    for (o, ty) in &px.objects {
        let net = &projections[ty];
        available.insert(o.clone(), labels_of(net));
        let single = project_execution(px, o).expect("objects of an execution have traces");
        match align_execution(&single, net, opts) {
            Ok(a) => {
                let labels = object_model_labels(&a.alignment, o);
                total += a.cost;
                model_labels.insert(o.clone(), labels.clone());
                objects.push(ObjectAlignment {
                    object: o.clone(),
                    cost: Some(a.cost),
                    model_labels: labels,
                    error: None,
                });
            }
            Err(e) if e.is_unalignable() => objects.push(ObjectAlignment {
                object: o.clone(),
                cost: None,
                model_labels: BTreeSet::new(),
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(e),
        }
    }
    let contradictions = find_contradictions(px, &model_labels, &available, &shared);
    Ok(FlattenReport {
        objects,
        flattened_cost: total,
        contradictions,
    })
}

/// The same contradiction check applied to per-object views of an
/// object-centric alignment.
pub fn object_centric_contradictions(px: &ProcessExecution, an: &AcceptingNet, g: &AlignmentGraph) -> Vec<Contradiction> {
    let shared = shared_labels(an);
    let mut model_labels = BTreeMap::new();
    let mut available = BTreeMap::new();
    for (o, ty) in &px.objects {
        model_labels.insert(o.clone(), object_model_labels(g, o));
        let offer = project_net(an, ty).map(|p| labels_of(&p)).unwrap_or_default();
        available.insert(o.clone(), offer);
    }
    find_contradictions(px, &model_labels, &available, &shared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::align_execution;
    use crate::model::{parse_event_log, ParseMode};
    use crate::petri::parse_ocpn;

    fn fixture(name: &str) -> Vec<u8> {
        std::fs::read(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
    }

    fn packaging() -> (ProcessExecution, AcceptingNet) {
        let log = parse_event_log(&fixture("packaging_log.json"), ParseMode::Strict).unwrap();
        let net = parse_ocpn(&fixture("packaging_net.json"), ParseMode::Strict).unwrap();
        (extract_process_executions(&log).remove(0), net)
    }

    #[test]
    fn projection_keeps_one_type() {
        let (_, net) = packaging();
        let items = project_net(&net, &"item".into()).unwrap();
        assert!(items.net.places().iter().all(|p| p.ty.as_str() == "item"));
        assert!(!items.net.has_variable_arcs());
        assert_eq!(items.net.transitions().len(), 6);
        let packages = project_net(&net, &"package".into()).unwrap();
        assert_eq!(packages.net.transitions().len(), 6);
    }

    #[test]
    fn flattened_objects_disagree_on_order_type() {
        let (px, net) = packaging();
        let report = flatten_align(&px, &net, &AlignOptions::default()).unwrap();
        let by_object: BTreeMap<&str, &ObjectAlignment> =
            report.objects.iter().map(|a| (a.object.as_str(), a)).collect();
        assert!(by_object["p1"].model_labels.contains(&ActivityName::from("receive product order")));
        assert!(by_object["i1"].model_labels.contains(&ActivityName::from("receive sample order")));
        assert!(!report.contradictions.is_empty());

        let oc = align_execution(&px, &net, &AlignOptions::default()).unwrap();
        assert!(object_centric_contradictions(&px, &net, &oc.alignment).is_empty());
    }
}
