//! Process-execution nets, variable-arc pre-processing and the synchronous
//! product net.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use log::warn;
use thiserror::Error;

use crate::ids::{ActivityName, EventId, ObjectId, PlaceId, TransitionId, TypeName};
use crate::model::ProcessExecution;
use crate::petri::{
    AcceptingNet, Binding, Marking, NetBuilder, ObjectCentricPetriNet, PetriError, RawNet, RawNu, net_to_json,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProductError {
    #[error("object {0} has an empty trace")]
    EmptyTrace(ObjectId),
    #[error("renaming maps do not cover object {0}")]
    MissingRenaming(ObjectId),
    #[error("expansion of {transition} needs {copies} copies, above the cap of {cap}")]
    ExpansionCap {
        transition: TransitionId,
        copies: u128,
        cap: usize,
    },
    #[error("net still has variable arcs at {0}")]
    VariableArcs(TransitionId),
    #[error("identifier collision in product: {0}")]
    IdCollision(String),
    #[error(transparent)]
    Petri(#[from] PetriError),
}

/// Fresh object and type names for the objects of one execution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenamingMaps {
    pub new_obj: BTreeMap<ObjectId, ObjectId>,
    pub new_type: BTreeMap<ObjectId, TypeName>,
    pub orob: BTreeMap<ObjectId, ObjectId>,
    pub orty: BTreeMap<TypeName, TypeName>,
}

impl RenamingMaps {
    pub fn len(&self) -> usize {
        self.new_obj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.new_obj.is_empty()
    }
}

const FRESH_OBJECT: &str = "#px";
const FRESH_TYPE: &str = "#px-type";

fn fresh_name(base: &str, marker: &str, taken: &mut HashSet<String>) -> String {
    let mut name = format!("{base}{marker}");
    let mut n = 2;
    while taken.contains(&name) {
        name = format!("{base}{marker}{n}");
        n += 1;
    }
    taken.insert(name.clone());
    name
}

/// Deterministic fresh names: a reserved suffix, disambiguated by a counter
/// when the plain name already occurs anywhere in `px` or `an`.
pub fn generate_fresh_ids(px: &ProcessExecution, an: &AcceptingNet) -> RenamingMaps {
    let mut taken: HashSet<String> = HashSet::new();
    for (o, ty) in &px.objects {
        taken.insert(o.to_string());
        taken.insert(ty.to_string());
    }
    for (e, ev) in &px.events {
        taken.insert(e.to_string());
        taken.insert(ev.activity.to_string());
        taken.extend(ev.objects.iter().map(|o| o.to_string()));
    }
    for (o, ty) in an.objects.iter() {
        taken.insert(o.to_string());
        taken.insert(ty.to_string());
    }
    taken.extend(an.net.types().iter().map(|t| t.to_string()));
    taken.extend(an.net.places().iter().map(|p| p.id.to_string()));
    for t in an.net.transitions() {
        taken.insert(t.id.to_string());
        if let Some(l) = &t.label {
            taken.insert(l.to_string());
        }
    }

    let mut maps = RenamingMaps::default();
    for (o, ty) in &px.objects {
        let obj = ObjectId::from(fresh_name(o.as_str(), FRESH_OBJECT, &mut taken));
        let fty = TypeName::from(fresh_name(o.as_str(), FRESH_TYPE, &mut taken));
        maps.orob.insert(obj.clone(), o.clone());
        maps.orty.insert(fty.clone(), ty.clone());
        maps.new_obj.insert(o.clone(), obj);
        maps.new_type.insert(o.clone(), fty);
    }
    maps
}

fn px_place(o: &ObjectId, pos: &str) -> String {
    format!("px:{o}:{pos}")
}

fn px_transition(e: &EventId) -> String {
    format!("px:{e}")
}

/// The net whose runs are exactly the linearizations of `px`: one
/// transition per event and one path of places per object.
pub fn build_px_net(px: &ProcessExecution, maps: &RenamingMaps) -> Result<AcceptingNet, ProductError> {
    let mut b = NetBuilder::new();
    let mut objects = BTreeMap::new();
    let mut initial = Vec::new();
    let mut final_marking = Vec::new();
    for (e, ev) in &px.events {
        b.transition(px_transition(e), Some(ev.activity.clone()));
    }
    for o in px.objects.keys() {
        let trace = px.traces.get(o).map(Vec::as_slice).unwrap_or_default();
        if trace.is_empty() {
            return Err(ProductError::EmptyTrace(o.clone()));
        }
        let fresh = maps.new_obj.get(o).ok_or_else(|| ProductError::MissingRenaming(o.clone()))?;
        let ty = maps.new_type.get(o).ok_or_else(|| ProductError::MissingRenaming(o.clone()))?;
        objects.insert(fresh.clone(), ty.clone());

        let start = px_place(o, "s");
        let end = px_place(o, "e");
        b.place(start.clone(), ty.clone());
        let mut prev = start.clone();
        for (i, e) in trace.iter().enumerate() {
            let t = px_transition(e);
            b.arc(prev, t.clone(), 1);
            let next = if i + 1 == trace.len() {
                end.clone()
            } else {
                px_place(o, &(i + 1).to_string())
            };
            b.place(next.clone(), ty.clone());
            b.arc(t, next.clone(), 1);
            prev = next;
        }
        initial.push((PlaceId::from(start), fresh.clone()));
        final_marking.push((PlaceId::from(end), fresh.clone()));
    }
    let net = b.build()?;
    Ok(AcceptingNet::new(net, &objects, &initial, &final_marking)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionOptions {
    /// Smallest per-type count for variable arcs; 0 follows the definition,
    /// 1 drops copies that bind no object of a variable type.
    pub min_variable_count: u32,
    /// Cap on the number of copies of a single transition.
    pub copy_cap: usize,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions {
            min_variable_count: 0,
            copy_cap: 100_000,
        }
    }
}

fn copy_id(t: &TransitionId, counts: &[(&TypeName, u32)]) -> String {
    let parts: Vec<String> = counts.iter().map(|(ty, c)| format!("{ty}={c}")).collect();
    format!("{t}[{}]", parts.join(","))
}

/// Replaces variable arcs by fixed-weight copies of each transition, one per
/// vector of per-type counts bounded by the objects of `objects`, and derives
/// the markings from source and sink places.
pub fn expand_variable_arcs(
    an: &AcceptingNet,
    objects: &BTreeMap<ObjectId, TypeName>,
    opts: &ExpansionOptions,
) -> Result<AcceptingNet, ProductError> {
    let net = &an.net;
    let mut per_type: BTreeMap<&TypeName, u32> = BTreeMap::new();
    for ty in objects.values() {
        *per_type.entry(ty).or_default() += 1;
    }

    let mut b = NetBuilder::new();
    for p in net.places() {
        b.place(p.id.clone(), p.ty.clone());
    }
    for (ti, t) in net.transitions().iter().enumerate() {
        let var_types: Vec<TypeName> = net.tpl_var(ti).into_iter().collect();
        if var_types.is_empty() {
            b.transition(t.id.clone(), t.label.clone());
            for a in &t.inputs {
                b.arc(net.place(a.place).id.to_string(), t.id.to_string(), a.weight);
            }
            for a in &t.outputs {
                b.arc(t.id.to_string(), net.place(a.place).id.to_string(), a.weight);
            }
            continue;
        }
        let ranges: Vec<(u32, u32)> = var_types
            .iter()
            .map(|ty| {
                let n = per_type.get(ty).copied().unwrap_or(0);
                (opts.min_variable_count.min(n), n)
            })
            .collect();
        let copies: u128 = ranges.iter().map(|(lo, hi)| (hi - lo + 1) as u128).product();
        if copies > opts.copy_cap as u128 {
            return Err(ProductError::ExpansionCap {
                transition: t.id.clone(),
                copies,
                cap: opts.copy_cap,
            });
        }
        let mut counts: Vec<u32> = ranges.iter().map(|r| r.0).collect();
        loop {
            let labelled: Vec<(&TypeName, u32)> = var_types.iter().zip(counts.iter().copied()).collect();
            let id = copy_id(&t.id, &labelled);
            b.transition(id.clone(), t.label.clone());
            let weight_of = |a: &crate::petri::Arc| -> u32 {
                if a.is_variable() {
                    let ty = &net.place(a.place).ty;
                    let i = var_types.iter().position(|v| v == ty).expect("variable type");
                    a.weight - a.variable + counts[i]
                } else {
                    a.weight
                }
            };
            for a in &t.inputs {
                let w = weight_of(a);
                if w > 0 {
                    b.arc(net.place(a.place).id.to_string(), id.clone(), w);
                }
            }
            for a in &t.outputs {
                let w = weight_of(a);
                if w > 0 {
                    b.arc(id.clone(), net.place(a.place).id.to_string(), w);
                }
            }
            let mut pos = counts.len();
            let exhausted = loop {
                if pos == 0 {
                    break true;
                }
                pos -= 1;
                counts[pos] += 1;
                if counts[pos] <= ranges[pos].1 {
                    break false;
                }
                counts[pos] = ranges[pos].0;
            };
            if exhausted {
                break;
            }
        }
    }
    let expanded = b.build()?;

    let structural = |places: BTreeSet<usize>| -> Vec<(PlaceId, ObjectId)> {
        let mut v = Vec::new();
        for p in places {
            let place = net.place(p);
            for (o, ty) in objects {
                if *ty == place.ty {
                    v.push((place.id.clone(), o.clone()));
                }
            }
        }
        v
    };
    let initial = structural(net.source_places());
    let final_marking = structural(net.sink_places());

    let declared = |m: &Marking| -> BTreeSet<(PlaceId, ObjectId)> { an.marking_to_ids(m).into_iter().collect() };
    let derived = |v: &[(PlaceId, ObjectId)]| -> BTreeSet<(PlaceId, ObjectId)> { v.iter().cloned().collect() };
    if !an.initial.is_empty() && declared(&an.initial) != derived(&initial) {
        warn!("declared initial marking differs from the one derived from source places; using the derived one");
    }
    if !an.final_marking.is_empty() && declared(&an.final_marking) != derived(&final_marking) {
        warn!("declared final marking differs from the one derived from sink places; using the derived one");
    }
    Ok(AcceptingNet::new(expanded, objects, &initial, &final_marking)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransitionTag {
    Log,
    Model,
    Sync,
}

impl TransitionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TransitionTag::Log => "log",
            TransitionTag::Model => "model",
            TransitionTag::Sync => "sync",
        }
    }
}

/// Where a product transition comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Origin {
    pub tag: TransitionTag,
    /// Source event of the process-execution side.
    pub event: Option<EventId>,
    /// Transition of the pre-processed de-jure net.
    pub dj_transition: Option<TransitionId>,
}

/// A ν annotation: the in-arc from `place` to the synchronous `transition`
/// carries variable `var`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NuEntry {
    pub transition: usize,
    pub place: usize,
    pub var: TypeName,
}

#[derive(Debug, Clone)]
pub struct SyncProductNet {
    pub underlying: AcceptingNet,
    pub origin: Vec<Origin>,
    pub nu: Vec<NuEntry>,
    pub maps: RenamingMaps,
    /// Places `0..px_places` belong to the process-execution side.
    pub px_places: BTreeSet<usize>,
    /// For each synchronous transition, the only binding that satisfies ν.
    sync_bindings: Vec<Option<Binding>>,
    px_objects: BTreeSet<u32>,
}

impl SyncProductNet {
    pub fn tag(&self, t: usize) -> TransitionTag {
        self.origin[t].tag
    }

    pub fn is_px_place(&self, p: usize) -> bool {
        self.px_places.contains(&p)
    }

    pub fn is_px_object(&self, o: u32) -> bool {
        self.px_objects.contains(&o)
    }

    pub fn count(&self, tag: TransitionTag) -> usize {
        self.origin.iter().filter(|o| o.tag == tag).count()
    }

    /// Net JSON with a tag per transition and the ν annotations.
    pub fn to_json(&self) -> RawNet {
        let mut raw = net_to_json(&self.underlying);
        for (t, rt) in raw.transitions.iter_mut().enumerate() {
            rt.tag = Some(self.origin[t].tag.as_str().to_string());
        }
        raw.nu = self
            .nu
            .iter()
            .map(|n| RawNu {
                transition: self.underlying.net.transition(n.transition).id.clone(),
                place: self.underlying.net.place(n.place).id.clone(),
                var: n.var.to_string(),
            })
            .collect();
        raw
    }
}

/// Per original type, the number of execution objects a process-execution
/// transition binds. `None` if some place type has no original type.
fn px_type_counts(px_net: &ObjectCentricPetriNet, t: usize, maps: &RenamingMaps) -> Option<BTreeMap<TypeName, u32>> {
    let mut counts = BTreeMap::new();
    for fresh in px_net.tpl(t) {
        let orig = maps.orty.get(&fresh)?;
        *counts.entry(orig.clone()).or_insert(0) += 1;
    }
    Some(counts)
}

/// Synchronisation condition: equal labels, the same original types on both
/// sides, and every de-jure arc of a type carrying exactly as many tokens as
/// the event has objects of that type, on presets and postsets alike.
fn synchronisable(
    px_net: &ObjectCentricPetriNet,
    tp: usize,
    dj_net: &ObjectCentricPetriNet,
    td: usize,
    maps: &RenamingMaps,
) -> bool {
    let (p, d) = (px_net.transition(tp), dj_net.transition(td));
    if p.label.is_none() || p.label != d.label {
        return false;
    }
    let Some(counts) = px_type_counts(px_net, tp, maps) else {
        return false;
    };
    if counts.keys().cloned().collect::<BTreeSet<_>>() != dj_net.tpl(td) {
        return false;
    }
    d.arcs().all(|a| {
        let ty = &dj_net.place(a.place).ty;
        !a.is_variable() && counts.get(ty) == Some(&a.weight)
    })
}

/// Builds the synchronous product of a process-execution net and a
/// variable-arc-free de-jure net.
pub fn build_synchronous_product(
    px_net: &AcceptingNet,
    dj_net: &AcceptingNet,
    maps: &RenamingMaps,
) -> Result<SyncProductNet, ProductError> {
    for net in [&px_net.net, &dj_net.net] {
        if let Some(t) = net.transitions().iter().find(|t| t.has_variable_arcs()) {
            return Err(ProductError::VariableArcs(t.id.clone()));
        }
    }
    let pxn = &px_net.net;
    let djn = &dj_net.net;
    let px_place = |p: usize| pxn.place(p).id.to_string();
    let dj_place = |p: usize| format!("dj:{}", djn.place(p).id);

    let mut b = NetBuilder::new();
    for p in pxn.places() {
        b.place(p.id.clone(), p.ty.clone());
    }
    for p in djn.places() {
        b.place(format!("dj:{}", p.id), p.ty.clone());
    }

    let event_of = |t: usize| -> EventId {
        let id = pxn.transition(t).id.as_str();
        EventId::from(id.strip_prefix("px:").unwrap_or(id))
    };
    let mut origin = Vec::new();
    let mut ids = HashSet::new();
    let mut add_transition = |b: &mut NetBuilder, id: String, label: Option<ActivityName>| -> Result<(), ProductError> {
        if !ids.insert(id.clone()) {
            return Err(ProductError::IdCollision(id));
        }
        b.transition(id, label);
        Ok(())
    };

    for (t, tr) in pxn.transitions().iter().enumerate() {
        let id = format!("log:{}", event_of(t));
        add_transition(&mut b, id.clone(), tr.label.clone())?;
        for a in &tr.inputs {
            b.arc(px_place(a.place), id.clone(), a.weight);
        }
        for a in &tr.outputs {
            b.arc(id.clone(), px_place(a.place), a.weight);
        }
        origin.push(Origin {
            tag: TransitionTag::Log,
            event: Some(event_of(t)),
            dj_transition: None,
        });
    }
    for tr in djn.transitions() {
        let id = format!("model:{}", tr.id);
        add_transition(&mut b, id.clone(), tr.label.clone())?;
        for a in &tr.inputs {
            b.arc(dj_place(a.place), id.clone(), a.weight);
        }
        for a in &tr.outputs {
            b.arc(id.clone(), dj_place(a.place), a.weight);
        }
        origin.push(Origin {
            tag: TransitionTag::Model,
            event: None,
            dj_transition: Some(tr.id.clone()),
        });
    }
    for tp in 0..pxn.transitions().len() {
        for td in 0..djn.transitions().len() {
            if !synchronisable(pxn, tp, djn, td, maps) {
                continue;
            }
            let (p, d) = (pxn.transition(tp), djn.transition(td));
            let id = format!("sync:{}|{}", event_of(tp), d.id);
            add_transition(&mut b, id.clone(), d.label.clone())?;
            for a in &p.inputs {
                b.arc(px_place(a.place), id.clone(), a.weight);
            }
            for a in &d.inputs {
                b.arc(dj_place(a.place), id.clone(), a.weight);
            }
            for a in &p.outputs {
                b.arc(id.clone(), px_place(a.place), a.weight);
            }
            for a in &d.outputs {
                b.arc(id.clone(), dj_place(a.place), a.weight);
            }
            origin.push(Origin {
                tag: TransitionTag::Sync,
                event: Some(event_of(tp)),
                dj_transition: Some(d.id.clone()),
            });
        }
    }
    let net = b.build().map_err(|e| match e {
        PetriError::DuplicateNode(id) => ProductError::IdCollision(id),
        other => ProductError::Petri(other),
    })?;

    let mut objects = px_net.objects.to_map();
    for (o, ty) in dj_net.objects.iter() {
        if objects.insert(o.clone(), ty.clone()).is_some() {
            return Err(ProductError::IdCollision(o.to_string()));
        }
    }
    let mut initial = px_net.marking_to_ids(&px_net.initial);
    let mut final_marking = px_net.marking_to_ids(&px_net.final_marking);
    let prefixed = |v: Vec<(PlaceId, ObjectId)>| {
        v.into_iter()
            .map(|(p, o)| (PlaceId::from(format!("dj:{p}")), o))
    };
    initial.extend(prefixed(dj_net.marking_to_ids(&dj_net.initial)));
    final_marking.extend(prefixed(dj_net.marking_to_ids(&dj_net.final_marking)));
    let underlying = AcceptingNet::new(net, &objects, &initial, &final_marking)?;

    let px_places: BTreeSet<usize> = (0..pxn.places().len()).collect();
    let px_objects: BTreeSet<u32> = px_net
        .objects
        .iter()
        .map(|(o, _)| underlying.objects.idx(o).expect("px object in product"))
        .collect();

    let mut nu = Vec::new();
    let mut sync_bindings = Vec::new();
    for (t, o) in origin.iter().enumerate() {
        if o.tag != TransitionTag::Sync {
            sync_bindings.push(None);
            continue;
        }
        let tr = underlying.net.transition(t);
        for a in &tr.inputs {
            let ty = &underlying.net.place(a.place).ty;
            let var = maps.orty.get(ty).unwrap_or(ty).clone();
            nu.push(NuEntry {
                transition: t,
                place: a.place,
                var,
            });
        }
        // The process-execution side fixes the objects: one fresh object per
        // fresh type, mirrored by its original on the de-jure side.
        let mut ids: Vec<ObjectId> = Vec::new();
        for ty in underlying.net.tpl(t) {
            if maps.orty.contains_key(&ty) {
                let fresh = underlying
                    .objects
                    .iter()
                    .find(|(_, oty)| **oty == ty)
                    .map(|(o, _)| o.clone())
                    .expect("fresh type has an object");
                ids.push(maps.orob[&fresh].clone());
                ids.push(fresh);
            }
        }
        let b = underlying.binding_from_ids(tr.id.as_str(), &ids).ok();
        sync_bindings.push(b);
    }

    Ok(SyncProductNet {
        underlying,
        origin,
        nu,
        maps: maps.clone(),
        px_places,
        sync_bindings,
        px_objects,
    })
}

/// ν validity of a binding of a synchronous transition: per original type,
/// the de-jure objects equal the originals of the process-execution objects.
pub fn nu_valid(sp: &SyncProductNet, b: &Binding) -> bool {
    if sp.tag(b.transition) != TransitionTag::Sync {
        return true;
    }
    let an = &sp.underlying;
    let mut sides: BTreeMap<&TypeName, (BTreeSet<&ObjectId>, BTreeSet<&ObjectId>)> = BTreeMap::new();
    for (ty, objs) in &b.objects {
        let ty = &an.net.types()[*ty as usize];
        match sp.maps.orty.get(ty) {
            Some(orig) => {
                let e = sides.entry(orig).or_default();
                for o in objs {
                    match sp.maps.orob.get(an.objects.id(*o)) {
                        Some(x) => {
                            e.0.insert(x);
                        }
                        None => return false,
                    }
                }
            }
            None => {
                sides.entry(ty).or_default().1.extend(objs.iter().map(|o| an.objects.id(*o)));
            }
        }
    }
    sides.values().all(|(px, dj)| px == dj)
}

/// Bindings of `t` enabled in `marking` that satisfy ν. Synchronous
/// transitions admit at most one such binding, which is built directly.
pub fn valid_bindings_sp(
    sp: &SyncProductNet,
    marking: &Marking,
    t: usize,
    cap: usize,
) -> Result<Vec<Binding>, PetriError> {
    match sp.tag(t) {
        TransitionTag::Sync => Ok(sp.sync_bindings[t]
            .as_ref()
            .filter(|b| sp.underlying.cons(b).is_sub_multiset_of(marking))
            .cloned()
            .into_iter()
            .collect()),
        _ => sp.underlying.enabled_bindings(marking, t, cap),
    }
}

#[cfg(test)]
mod tests;
