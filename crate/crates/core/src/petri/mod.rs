//! Object-centric Petri nets and their token game.
//!
//! Nodes are stored in vectors and addressed by index; identifiers are kept
//! alongside for I/O. Markings are canonical sorted token vectors so that
//! equality and hashing are structural.

mod json;
mod marking;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ids::{ActivityName, ObjectId, PlaceId, TransitionId, TypeName};

pub use json::{net_to_json, parse_ocpn, RawArc, RawNet, RawNu, RawPlace, RawToken, RawTransition, RawVariableArc};
pub use marking::{Marking, Token};

/// Default cap on the number of bindings enumerated for one transition.
pub const DEFAULT_BINDING_CAP: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PetriError {
    #[error("malformed net: {0}")]
    Schema(String),
    #[error("unknown field `{0}` in net")]
    UnknownField(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("arc references nonexistent node {0}")]
    UnknownNode(String),
    #[error("arc {0} -> {1} must connect a place and a transition")]
    ArcKind(String, String),
    #[error("arc {0} -> {1} has weight 0")]
    ZeroWeight(String, String),
    #[error("F_var exceeds F on arc {0} -> {1}")]
    VariableExceedsArc(String, String),
    #[error("token ({place}, {object}) in a place of mismatched type")]
    MismatchedTokenType { place: PlaceId, object: ObjectId },
    #[error("token references unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("net is not well-formed at transitions {0:?}")]
    NotWellFormed(Vec<TransitionId>),
    #[error("unknown transition {0}")]
    UnknownTransition(TransitionId),
    #[error("transition {0} has variable arcs; preprocess the net before enumerating bindings")]
    VariableArcs(TransitionId),
    #[error("transition {transition} admits {count} bindings, above the cap of {cap}")]
    BindingCap {
        transition: TransitionId,
        count: u128,
        cap: usize,
    },
    #[error("invalid binding for {transition}: {reason}")]
    InvalidBinding {
        transition: TransitionId,
        reason: String,
    },
    #[error("binding of {0} is not enabled")]
    NotEnabled(TransitionId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: PlaceId,
    pub ty: TypeName,
}

/// Arc between a transition and one place. `variable` is the variable share
/// of the multiplicity and never exceeds `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Arc {
    pub place: usize,
    pub weight: u32,
    pub variable: u32,
}

impl Arc {
    pub fn is_variable(&self) -> bool {
        self.variable > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: TransitionId,
    /// `None` is the silent label.
    pub label: Option<ActivityName>,
    pub inputs: Vec<Arc>,
    pub outputs: Vec<Arc>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }

    pub fn has_variable_arcs(&self) -> bool {
        self.inputs.iter().chain(&self.outputs).any(Arc::is_variable)
    }

    pub fn arcs(&self) -> impl Iterator<Item = &Arc> {
        self.inputs.iter().chain(&self.outputs)
    }
}

/// Per-type binding requirements of a transition.
#[derive(Debug, Clone, PartialEq, Eq)]
struct TypeGroup {
    ty: u32,
    /// Required cardinality from non-variable arcs; `None` when the type is
    /// only attached through variable arcs.
    count: Option<u32>,
    /// The non-variable arc weights disagree, so no binding exists.
    conflicting: bool,
    inputs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectCentricPetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    types: Vec<TypeName>,
    place_types: Vec<u32>,
    place_index: HashMap<PlaceId, usize>,
    transition_index: HashMap<TransitionId, usize>,
    groups: Vec<Vec<TypeGroup>>,
}

/// Incremental construction of a net from identifiers.
#[derive(Debug, Default, Clone)]
pub struct NetBuilder {
    places: Vec<Place>,
    transitions: Vec<(TransitionId, Option<ActivityName>)>,
    arcs: Vec<(String, String, u32, u32)>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, id: impl Into<PlaceId>, ty: impl Into<TypeName>) -> &mut Self {
        self.places.push(Place {
            id: id.into(),
            ty: ty.into(),
        });
        self
    }

    pub fn transition(
        &mut self,
        id: impl Into<TransitionId>,
        label: Option<impl Into<ActivityName>>,
    ) -> &mut Self {
        self.transitions.push((id.into(), label.map(Into::into)));
        self
    }

    pub fn arc(&mut self, source: impl Into<String>, target: impl Into<String>, weight: u32) -> &mut Self {
        self.arcs.push((source.into(), target.into(), weight, 0));
        self
    }

    pub fn variable_arc(
        &mut self,
        source: impl Into<String>,
        target: impl Into<String>,
        weight: u32,
    ) -> &mut Self {
        self.arcs.push((source.into(), target.into(), weight, weight));
        self
    }

    /// Adds `variable` to the variable share of an arc without touching its
    /// weight. Used to declare variable arcs separately from the arc list.
    pub fn mark_variable(
        &mut self,
        source: impl Into<String>,
        target: impl Into<String>,
        variable: u32,
    ) -> &mut Self {
        self.arcs.push((source.into(), target.into(), 0, variable));
        self
    }

    pub fn build(&self) -> Result<ObjectCentricPetriNet, PetriError> {
        let mut place_index = HashMap::new();
        for (i, p) in self.places.iter().enumerate() {
            if place_index.insert(p.id.clone(), i).is_some() {
                return Err(PetriError::DuplicateNode(p.id.to_string()));
            }
        }
        let mut transition_index = HashMap::new();
        for (i, (id, _)) in self.transitions.iter().enumerate() {
            if place_index.contains_key(id.as_str()) || transition_index.insert(id.clone(), i).is_some() {
                return Err(PetriError::DuplicateNode(id.to_string()));
            }
        }

        // (transition, place, is_input) -> (weight, variable)
        let mut acc: BTreeMap<(usize, usize, bool), (u32, u32)> = BTreeMap::new();
        for (src, dst, w, v) in &self.arcs {
            let key = match (
                place_index.get(src.as_str()),
                transition_index.get(src.as_str()),
                place_index.get(dst.as_str()),
                transition_index.get(dst.as_str()),
            ) {
                (Some(&p), _, _, Some(&t)) => (t, p, true),
                (_, Some(&t), Some(&p), _) => (t, p, false),
                (None, None, _, _) => return Err(PetriError::UnknownNode(src.clone())),
                (_, _, None, None) => return Err(PetriError::UnknownNode(dst.clone())),
                _ => return Err(PetriError::ArcKind(src.clone(), dst.clone())),
            };
            let e = acc.entry(key).or_insert((0, 0));
            e.0 += w;
            e.1 += v;
        }

        let mut transitions: Vec<Transition> = self
            .transitions
            .iter()
            .map(|(id, label)| Transition {
                id: id.clone(),
                label: label.clone(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            })
            .collect();
        for ((t, p, is_input), (weight, variable)) in acc {
            let (src, dst) = if is_input {
                (self.places[p].id.to_string(), transitions[t].id.to_string())
            } else {
                (transitions[t].id.to_string(), self.places[p].id.to_string())
            };
            if weight == 0 && variable == 0 {
                return Err(PetriError::ZeroWeight(src, dst));
            }
            if variable > weight {
                return Err(PetriError::VariableExceedsArc(src, dst));
            }
            let arc = Arc {
                place: p,
                weight,
                variable,
            };
            if is_input {
                transitions[t].inputs.push(arc);
            } else {
                transitions[t].outputs.push(arc);
            }
        }
        Ok(ObjectCentricPetriNet::assemble(
            self.places.clone(),
            transitions,
            place_index,
            transition_index,
        ))
    }
}

impl ObjectCentricPetriNet {
    fn assemble(
        places: Vec<Place>,
        transitions: Vec<Transition>,
        place_index: HashMap<PlaceId, usize>,
        transition_index: HashMap<TransitionId, usize>,
    ) -> Self {
        let types: Vec<TypeName> = places
            .iter()
            .map(|p| p.ty.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let place_types: Vec<u32> = places
            .iter()
            .map(|p| types.binary_search(&p.ty).unwrap() as u32)
            .collect();
        let groups = transitions
            .iter()
            .map(|t| {
                let mut by_type: BTreeMap<u32, TypeGroup> = BTreeMap::new();
                for (arc, is_input) in t
                    .inputs
                    .iter()
                    .map(|a| (a, true))
                    .chain(t.outputs.iter().map(|a| (a, false)))
                {
                    let ty = place_types[arc.place];
                    let g = by_type.entry(ty).or_insert(TypeGroup {
                        ty,
                        count: None,
                        conflicting: false,
                        inputs: Vec::new(),
                    });
                    if is_input {
                        g.inputs.push(arc.place as u32);
                    }
                    if !arc.is_variable() {
                        match g.count {
                            None => g.count = Some(arc.weight),
                            Some(c) if c != arc.weight => g.conflicting = true,
                            Some(_) => {}
                        }
                    }
                }
                by_type.into_values().collect()
            })
            .collect();
        Self {
            places,
            transitions,
            types,
            place_types,
            place_index,
            transition_index,
            groups,
        }
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn place(&self, idx: usize) -> &Place {
        &self.places[idx]
    }

    pub fn transition(&self, idx: usize) -> &Transition {
        &self.transitions[idx]
    }

    pub fn place_idx(&self, id: &str) -> Option<usize> {
        self.place_index.get(id).copied()
    }

    pub fn transition_idx(&self, id: &str) -> Option<usize> {
        self.transition_index.get(id).copied()
    }

    /// Sorted object types of all places.
    pub fn types(&self) -> &[TypeName] {
        &self.types
    }

    pub fn type_idx(&self, ty: &TypeName) -> Option<u32> {
        self.types.binary_search(ty).ok().map(|i| i as u32)
    }

    pub fn place_type_idx(&self, place: usize) -> u32 {
        self.place_types[place]
    }

    pub fn has_variable_arcs(&self) -> bool {
        self.transitions.iter().any(Transition::has_variable_arcs)
    }

    /// Places in the preset of `t`.
    pub fn preset(&self, t: usize) -> BTreeSet<usize> {
        self.transitions[t].inputs.iter().map(|a| a.place).collect()
    }

    pub fn postset(&self, t: usize) -> BTreeSet<usize> {
        self.transitions[t].outputs.iter().map(|a| a.place).collect()
    }

    /// Input and output places of `t`.
    pub fn pl(&self, t: usize) -> BTreeSet<usize> {
        self.transitions[t].arcs().map(|a| a.place).collect()
    }

    pub fn pl_var(&self, t: usize) -> BTreeSet<usize> {
        self.transitions[t]
            .arcs()
            .filter(|a| a.variable > 0)
            .map(|a| a.place)
            .collect()
    }

    pub fn pl_nv(&self, t: usize) -> BTreeSet<usize> {
        self.transitions[t]
            .arcs()
            .filter(|a| a.weight > a.variable)
            .map(|a| a.place)
            .collect()
    }

    fn types_of(&self, places: BTreeSet<usize>) -> BTreeSet<TypeName> {
        places.into_iter().map(|p| self.places[p].ty.clone()).collect()
    }

    pub fn tpl(&self, t: usize) -> BTreeSet<TypeName> {
        self.types_of(self.pl(t))
    }

    pub fn tpl_var(&self, t: usize) -> BTreeSet<TypeName> {
        self.types_of(self.pl_var(t))
    }

    pub fn tpl_nv(&self, t: usize) -> BTreeSet<TypeName> {
        self.types_of(self.pl_nv(t))
    }

    /// Source places: no transition produces into them.
    pub fn source_places(&self) -> BTreeSet<usize> {
        let fed: BTreeSet<usize> = self
            .transitions
            .iter()
            .flat_map(|t| t.outputs.iter().map(|a| a.place))
            .collect();
        (0..self.places.len()).filter(|p| !fed.contains(p)).collect()
    }

    /// Sink places: no transition consumes from them.
    pub fn sink_places(&self) -> BTreeSet<usize> {
        let drained: BTreeSet<usize> = self
            .transitions
            .iter()
            .flat_map(|t| t.inputs.iter().map(|a| a.place))
            .collect();
        (0..self.places.len()).filter(|p| !drained.contains(p)).collect()
    }

    pub fn weight(&self, place: usize, t: usize, input: bool) -> u32 {
        let arcs = if input {
            &self.transitions[t].inputs
        } else {
            &self.transitions[t].outputs
        };
        arcs.iter().find(|a| a.place == place).map_or(0, |a| a.weight)
    }
}

/// Transitions where one type is attached both through variable and
/// non-variable arcs.
pub fn check_well_formed(net: &ObjectCentricPetriNet) -> Result<(), Vec<TransitionId>> {
    let offenders: Vec<TransitionId> = (0..net.transitions.len())
        .filter(|&t| !net.tpl_var(t).is_disjoint(&net.tpl_nv(t)))
        .map(|t| net.transitions[t].id.clone())
        .collect();
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(offenders)
    }
}

/// The objects a net's markings range over, sorted by id so that index
/// order is lexicographic id order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObjectTable {
    ids: Vec<ObjectId>,
    types: Vec<TypeName>,
    /// Index into the net's type table, if the type occurs in the net.
    net_types: Vec<Option<u32>>,
    by_net_type: Vec<Vec<u32>>,
}

impl ObjectTable {
    fn new(net: &ObjectCentricPetriNet, objects: &BTreeMap<ObjectId, TypeName>) -> Self {
        let mut by_net_type = vec![Vec::new(); net.types.len()];
        let mut ids = Vec::with_capacity(objects.len());
        let mut types = Vec::with_capacity(objects.len());
        let mut net_types = Vec::with_capacity(objects.len());
        for (i, (o, ty)) in objects.iter().enumerate() {
            let nt = net.type_idx(ty);
            if let Some(nt) = nt {
                by_net_type[nt as usize].push(i as u32);
            }
            ids.push(o.clone());
            types.push(ty.clone());
            net_types.push(nt);
        }
        Self {
            ids,
            types,
            net_types,
            by_net_type,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, idx: u32) -> &ObjectId {
        &self.ids[idx as usize]
    }

    pub fn ty(&self, idx: u32) -> &TypeName {
        &self.types[idx as usize]
    }

    pub fn idx(&self, id: &ObjectId) -> Option<u32> {
        self.ids.binary_search(id).ok().map(|i| i as u32)
    }

    pub fn net_type(&self, idx: u32) -> Option<u32> {
        self.net_types[idx as usize]
    }

    pub fn of_net_type(&self, ty: u32) -> &[u32] {
        &self.by_net_type[ty as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ObjectId, &TypeName)> {
        self.ids.iter().zip(&self.types)
    }

    pub fn to_map(&self) -> BTreeMap<ObjectId, TypeName> {
        self.iter().map(|(o, t)| (o.clone(), t.clone())).collect()
    }
}

/// A well-formed net with its object universe and initial/final markings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcceptingNet {
    pub net: ObjectCentricPetriNet,
    pub objects: ObjectTable,
    pub initial: Marking,
    pub final_marking: Marking,
}

impl AcceptingNet {
    pub fn new(
        net: ObjectCentricPetriNet,
        objects: &BTreeMap<ObjectId, TypeName>,
        initial: &[(PlaceId, ObjectId)],
        final_marking: &[(PlaceId, ObjectId)],
    ) -> Result<Self, PetriError> {
        check_well_formed(&net).map_err(PetriError::NotWellFormed)?;
        let objects = ObjectTable::new(&net, objects);
        let mut an = Self {
            net,
            objects,
            initial: Marking::default(),
            final_marking: Marking::default(),
        };
        an.initial = an.marking_from_ids(initial)?;
        an.final_marking = an.marking_from_ids(final_marking)?;
        Ok(an)
    }

    /// Builds a type-checked marking from (place, object) identifier pairs.
    pub fn marking_from_ids(&self, tokens: &[(PlaceId, ObjectId)]) -> Result<Marking, PetriError> {
        tokens
            .iter()
            .map(|(p, o)| {
                let place = self
                    .net
                    .place_idx(p.as_str())
                    .ok_or_else(|| PetriError::UnknownNode(p.to_string()))?;
                let object = self
                    .objects
                    .idx(o)
                    .ok_or_else(|| PetriError::UnknownObject(o.clone()))?;
                if self.objects.net_type(object) != Some(self.net.place_type_idx(place)) {
                    return Err(PetriError::MismatchedTokenType {
                        place: p.clone(),
                        object: o.clone(),
                    });
                }
                Ok(Token::new(place, object))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Marking::from_tokens)
    }

    pub fn marking_to_ids(&self, m: &Marking) -> Vec<(PlaceId, ObjectId)> {
        m.tokens()
            .iter()
            .map(|t| {
                (
                    self.net.place(t.place()).id.clone(),
                    self.objects.id(t.object()).clone(),
                )
            })
            .collect()
    }

    pub fn describe_marking(&self, m: &Marking) -> String {
        let parts: Vec<String> = self
            .marking_to_ids(m)
            .into_iter()
            .map(|(p, o)| format!("({p},{o})"))
            .collect();
        format!("[{}]", parts.join(" "))
    }

    /// Builds a binding from object ids; types are taken from the object table.
    pub fn binding_from_ids<'a>(
        &self,
        transition: &str,
        objects: impl IntoIterator<Item = &'a ObjectId>,
    ) -> Result<Binding, PetriError> {
        let t = self
            .net
            .transition_idx(transition)
            .ok_or_else(|| PetriError::UnknownTransition(transition.into()))?;
        let mut groups: BTreeMap<u32, Vec<u32>> = self.net.groups[t]
            .iter()
            .map(|g| (g.ty, Vec::new()))
            .collect();
        for o in objects {
            let idx = self
                .objects
                .idx(o)
                .ok_or_else(|| PetriError::UnknownObject(o.clone()))?;
            let slot = self
                .objects
                .net_type(idx)
                .and_then(|ty| groups.get_mut(&ty))
                .ok_or_else(|| PetriError::InvalidBinding {
                    transition: self.net.transition(t).id.clone(),
                    reason: format!("object {o} has a type not attached to the transition"),
                })?;
            slot.push(idx);
        }
        let b = Binding {
            transition: t,
            objects: groups
                .into_iter()
                .map(|(ty, mut v)| {
                    v.sort_unstable();
                    v.dedup();
                    (ty, v)
                })
                .collect(),
        };
        self.check_binding(&b)?;
        Ok(b)
    }

    /// Checks the domain and cardinality conditions of a binding.
    pub fn check_binding(&self, b: &Binding) -> Result<(), PetriError> {
        let t = self
            .net
            .transitions
            .get(b.transition)
            .ok_or_else(|| PetriError::UnknownTransition(format!("#{}", b.transition).into()))?;
        let invalid = |reason: String| PetriError::InvalidBinding {
            transition: t.id.clone(),
            reason,
        };
        let groups = &self.net.groups[b.transition];
        if groups.len() != b.objects.len()
            || groups.iter().zip(&b.objects).any(|(g, (ty, _))| g.ty != *ty)
        {
            return Err(invalid("domain differs from the transition's place types".into()));
        }
        for (g, (ty, objs)) in groups.iter().zip(&b.objects) {
            if objs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid("object sets must be sorted and distinct".into()));
            }
            if let Some(o) = objs.iter().find(|o| self.objects.net_type(**o) != Some(*ty)) {
                return Err(invalid(format!("object {} has the wrong type", self.objects.id(*o))));
            }
            if g.conflicting {
                return Err(invalid("non-variable arc weights disagree".into()));
            }
            if let Some(c) = g.count {
                if objs.len() != c as usize {
                    return Err(invalid(format!(
                        "type {} needs {} objects, got {}",
                        self.net.types[*ty as usize],
                        c,
                        objs.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn objects_of<'a>(&self, b: &'a Binding, place: usize) -> &'a [u32] {
        let ty = self.net.place_type_idx(place);
        b.objects
            .iter()
            .find(|(t, _)| *t == ty)
            .map_or(&[][..], |(_, v)| v.as_slice())
    }

    /// Tokens consumed by a binding.
    pub fn cons(&self, b: &Binding) -> Marking {
        Marking::from_tokens(
            self.net.transitions[b.transition]
                .inputs
                .iter()
                .flat_map(|a| self.objects_of(b, a.place).iter().map(move |&o| Token::new(a.place, o)))
                .collect(),
        )
    }

    /// Tokens produced by a binding.
    pub fn prod(&self, b: &Binding) -> Marking {
        Marking::from_tokens(
            self.net.transitions[b.transition]
                .outputs
                .iter()
                .flat_map(|a| self.objects_of(b, a.place).iter().map(move |&o| Token::new(a.place, o)))
                .collect(),
        )
    }

    pub fn is_enabled(&self, marking: &Marking, b: &Binding) -> bool {
        self.check_binding(b).is_ok() && self.cons(b).is_sub_multiset_of(marking)
    }

    /// Number of bindings `enabled_bindings` would return, without
    /// materialising them.
    fn count_enabled(&self, marking: &Marking, t: usize) -> Result<u128, PetriError> {
        let mut total: u128 = 1;
        for g in &self.net.groups[t] {
            let k = match (g.conflicting, g.count) {
                (true, _) => return Ok(0),
                (false, Some(k)) => k as usize,
                (false, None) => {
                    return Err(PetriError::VariableArcs(self.net.transitions[t].id.clone()))
                }
            };
            let n = self.candidates(marking, g).len();
            total = total.saturating_mul(binomial(n, k));
            if total == 0 {
                break;
            }
        }
        Ok(total)
    }

    fn candidates(&self, marking: &Marking, g: &TypeGroup) -> Vec<u32> {
        match g.inputs.split_first() {
            None => self.objects.of_net_type(g.ty).to_vec(),
            Some((first, rest)) => {
                let mut c = marking.distinct_objects_in(*first as usize);
                for p in rest {
                    let other = marking.distinct_objects_in(*p as usize);
                    c.retain(|o| other.binary_search(o).is_ok());
                }
                c
            }
        }
    }

    /// All bindings of transition `t` enabled in `marking`, in lexicographic
    /// order of (type, object combination).
    pub fn enabled_bindings(
        &self,
        marking: &Marking,
        t: usize,
        cap: usize,
    ) -> Result<Vec<Binding>, PetriError> {
        let tr = &self.net.transitions[t];
        if tr.has_variable_arcs() {
            return Err(PetriError::VariableArcs(tr.id.clone()));
        }
        let count = self.count_enabled(marking, t)?;
        if count > cap as u128 {
            return Err(PetriError::BindingCap {
                transition: tr.id.clone(),
                count,
                cap,
            });
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let per_type: Vec<(u32, Vec<Vec<u32>>)> = self.net.groups[t]
            .iter()
            .map(|g| {
                let cands = self.candidates(marking, g);
                let k = g.count.expect("checked above") as usize;
                let combos = combinations(cands.len(), k)
                    .into_iter()
                    .map(|c| c.into_iter().map(|i| cands[i]).collect())
                    .collect();
                (g.ty, combos)
            })
            .collect();

        let mut out = Vec::with_capacity(count as usize);
        let mut cursor = vec![0usize; per_type.len()];
        loop {
            out.push(Binding {
                transition: t,
                objects: per_type
                    .iter()
                    .zip(&cursor)
                    .map(|((ty, combos), &i)| (*ty, combos[i].clone()))
                    .collect(),
            });
            // Odometer increment, last type fastest.
            let mut pos = per_type.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                cursor[pos] += 1;
                if cursor[pos] < per_type[pos].1.len() {
                    break;
                }
                cursor[pos] = 0;
            }
        }
    }

    /// Fires an enabled binding: `M - cons + prod`.
    pub fn fire(&self, marking: &Marking, b: &Binding) -> Result<Marking, PetriError> {
        self.check_binding(b)?;
        marking
            .apply(&self.cons(b), &self.prod(b))
            .ok_or_else(|| PetriError::NotEnabled(self.net.transitions[b.transition].id.clone()))
    }

    /// Replays a binding sequence from the initial marking.
    pub fn replay(&self, bindings: &[Binding]) -> ReplayOutcome {
        let mut m = self.initial.clone();
        for (i, b) in bindings.iter().enumerate() {
            match self.fire(&m, b) {
                Ok(next) => m = next,
                Err(_) => return ReplayOutcome::Failed { index: i },
            }
        }
        let accepted = m == self.final_marking;
        ReplayOutcome::Reached {
            marking: m,
            accepted,
        }
    }

    pub fn binding_objects(&self, b: &Binding) -> BTreeSet<ObjectId> {
        b.objects
            .iter()
            .flat_map(|(_, v)| v.iter().map(|o| self.objects.id(*o).clone()))
            .collect()
    }

    pub fn describe_binding(&self, b: &Binding) -> String {
        let groups: Vec<String> = b
            .objects
            .iter()
            .map(|(ty, objs)| {
                let names: Vec<&str> = objs.iter().map(|o| self.objects.id(*o).as_str()).collect();
                format!("{}:{{{}}}", self.net.types[*ty as usize], names.join(","))
            })
            .collect();
        format!("{}({})", self.net.transitions[b.transition].id, groups.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayOutcome {
    Reached { marking: Marking, accepted: bool },
    Failed { index: usize },
}

impl ReplayOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, ReplayOutcome::Reached { accepted: true, .. })
    }
}

/// A transition firing with the objects it binds per type.
///
/// `objects` is sorted by type index and covers exactly the types attached
/// to the transition; each object list is sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding {
    pub transition: usize,
    pub objects: Vec<(u32, Vec<u32>)>,
}

impl Binding {
    pub fn all_objects(&self) -> impl Iterator<Item = u32> + '_ {
        self.objects.iter().flat_map(|(_, v)| v.iter().copied())
    }

    pub fn is_empty(&self) -> bool {
        self.objects.iter().all(|(_, v)| v.is_empty())
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}{:?}", self.transition, self.objects)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// k-subsets of `0..n` in lexicographic order.
pub(crate) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests;
