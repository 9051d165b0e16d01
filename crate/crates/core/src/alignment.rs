//! Moves, alignment graphs, their log/model reductions, validity checking and
//! the standard cost function.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ActivityName, EventId, MoveId, ObjectId, TransitionId};
use crate::model::ProcessExecution;
use crate::petri::{AcceptingNet, Binding, Marking};
use crate::product;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignmentError {
    #[error("malformed move {id}: {reason}")]
    MalformedMove { id: MoveId, reason: String },
    #[error("duplicate move id {0}")]
    DuplicateMove(MoveId),
    #[error("edge references unknown move {0}")]
    UnknownMove(MoveId),
    #[error("alignment graph contains a cycle")]
    Cyclic,
    #[error("malformed alignment: {0}")]
    Schema(String),
}

/// Alignment cost. `silent` counts model moves on silent transitions and
/// only breaks ties between equal visible costs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cost {
    pub visible: u64,
    pub silent: u64,
}

impl Cost {
    pub const ZERO: Cost = Cost {
        visible: 0,
        silent: 0,
    };

    pub fn new(visible: u64, silent: u64) -> Self {
        Cost { visible, silent }
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost {
            visible: self.visible + rhs.visible,
            silent: self.silent + rhs.silent,
        }
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, Add::add)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}e", self.visible, self.silent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Log,
    Model,
    Sync,
}

/// One alignment step. Only well-formed moves can be constructed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Move {
    id: MoveId,
    kind: MoveKind,
    log_activity: Option<ActivityName>,
    log_objects: BTreeSet<ObjectId>,
    model_transition: Option<TransitionId>,
    model_label: Option<ActivityName>,
    model_objects: BTreeSet<ObjectId>,
}

impl Move {
    pub fn log(id: impl Into<MoveId>, activity: ActivityName, objects: BTreeSet<ObjectId>) -> Self {
        Move {
            id: id.into(),
            kind: MoveKind::Log,
            log_activity: Some(activity),
            log_objects: objects,
            model_transition: None,
            model_label: None,
            model_objects: BTreeSet::new(),
        }
    }

    /// A model move; `label` is `None` for silent transitions.
    pub fn model(
        id: impl Into<MoveId>,
        transition: TransitionId,
        label: Option<ActivityName>,
        objects: BTreeSet<ObjectId>,
    ) -> Self {
        Move {
            id: id.into(),
            kind: MoveKind::Model,
            log_activity: None,
            log_objects: BTreeSet::new(),
            model_transition: Some(transition),
            model_label: label,
            model_objects: objects,
        }
    }

    pub fn sync(
        id: impl Into<MoveId>,
        activity: ActivityName,
        objects: BTreeSet<ObjectId>,
        transition: TransitionId,
    ) -> Self {
        Move {
            id: id.into(),
            kind: MoveKind::Sync,
            log_activity: Some(activity.clone()),
            log_objects: objects.clone(),
            model_transition: Some(transition),
            model_label: Some(activity),
            model_objects: objects,
        }
    }

    /// Validating constructor over raw parts.
    #[allow(clippy::too_many_arguments)]
    pub fn try_new(
        id: MoveId,
        kind: MoveKind,
        log_activity: Option<ActivityName>,
        log_objects: BTreeSet<ObjectId>,
        model_transition: Option<TransitionId>,
        model_label: Option<ActivityName>,
        model_objects: BTreeSet<ObjectId>,
    ) -> Result<Self, AlignmentError> {
        let bad = |reason: &str| {
            Err(AlignmentError::MalformedMove {
                id: id.clone(),
                reason: reason.into(),
            })
        };
        match kind {
            MoveKind::Log => {
                if log_activity.is_none() {
                    return bad("log move without log activity");
                }
                if model_transition.is_some() || model_label.is_some() || !model_objects.is_empty() {
                    return bad("log move with a model part");
                }
            }
            MoveKind::Model => {
                if model_transition.is_none() {
                    return bad("model move without transition");
                }
                if log_activity.is_some() || !log_objects.is_empty() {
                    return bad("model move with a log part");
                }
            }
            MoveKind::Sync => {
                if model_transition.is_none() || log_activity.is_none() {
                    return bad("synchronous move missing a side");
                }
                if model_label.is_none() {
                    return bad("synchronous move on a silent transition");
                }
                if log_activity != model_label {
                    return bad("synchronous move with differing activities");
                }
                if log_objects != model_objects {
                    return bad("synchronous move with differing object sets");
                }
            }
        }
        Ok(Move {
            id,
            kind,
            log_activity,
            log_objects,
            model_transition,
            model_label,
            model_objects,
        })
    }

    pub fn id(&self) -> &MoveId {
        &self.id
    }

    pub fn kind(&self) -> MoveKind {
        self.kind
    }

    pub fn log_activity(&self) -> Option<&ActivityName> {
        self.log_activity.as_ref()
    }

    pub fn log_objects(&self) -> &BTreeSet<ObjectId> {
        &self.log_objects
    }

    pub fn model_transition(&self) -> Option<&TransitionId> {
        self.model_transition.as_ref()
    }

    pub fn model_label(&self) -> Option<&ActivityName> {
        self.model_label.as_ref()
    }

    pub fn model_objects(&self) -> &BTreeSet<ObjectId> {
        &self.model_objects
    }

    pub fn has_log_part(&self) -> bool {
        self.kind != MoveKind::Model
    }

    pub fn has_model_part(&self) -> bool {
        self.kind != MoveKind::Log
    }

    pub fn is_silent_model_move(&self) -> bool {
        self.kind == MoveKind::Model && self.model_label.is_none()
    }

    pub fn objects(&self) -> BTreeSet<&ObjectId> {
        self.log_objects.iter().chain(&self.model_objects).collect()
    }
}

/// Standard cost of a move: free when synchronous, one unit per object for
/// visible log or model moves, one silent unit for silent model moves.
pub fn move_cost(m: &Move) -> Cost {
    match m.kind {
        MoveKind::Sync => Cost::ZERO,
        MoveKind::Model if m.model_label.is_none() => Cost::new(0, 1),
        MoveKind::Log | MoveKind::Model => Cost::new(m.objects().len() as u64, 0),
    }
}

/// A directed acyclic graph of moves. Edges are pairs of indices into
/// `moves`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentGraph {
    moves: Vec<Move>,
    edges: BTreeSet<(usize, usize)>,
}

impl AlignmentGraph {
    pub fn new(moves: Vec<Move>, edges: BTreeSet<(usize, usize)>) -> Result<Self, AlignmentError> {
        let mut ids = HashSet::new();
        for m in &moves {
            if !ids.insert(&m.id) {
                return Err(AlignmentError::DuplicateMove(m.id.clone()));
            }
        }
        if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= moves.len() || *b >= moves.len()) {
            return Err(AlignmentError::UnknownMove(format!("#{}", a.max(b)).into()));
        }
        let g = AlignmentGraph { moves, edges };
        if g.topological_order().is_none() {
            return Err(AlignmentError::Cyclic);
        }
        Ok(g)
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.moves.len()];
        for &(a, b) in &self.edges {
            succ[a].push(b);
        }
        succ
    }

    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg = vec![0usize; self.moves.len()];
        for &(_, b) in &self.edges {
            indeg[b] += 1;
        }
        let succ = self.successors();
        let mut ready: BTreeSet<usize> = (0..self.moves.len()).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.moves.len());
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &s in &succ[i] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        (order.len() == self.moves.len()).then_some(order)
    }

    pub fn cost(&self) -> Cost {
        alignment_cost(self)
    }

    pub fn count(&self, kind: MoveKind) -> usize {
        self.moves.iter().filter(|m| m.kind == kind).count()
    }
}

/// Keeps the moves selected by `keep` and connects two kept moves whenever a
/// path between them runs only through dropped moves.
fn reduce(g: &AlignmentGraph, keep: impl Fn(&Move) -> bool) -> AlignmentGraph {
    let succ = g.successors();
    let kept: Vec<bool> = g.moves.iter().map(&keep).collect();
    let mut new_index = vec![usize::MAX; g.moves.len()];
    let mut moves = Vec::new();
    for (i, m) in g.moves.iter().enumerate() {
        if kept[i] {
            new_index[i] = moves.len();
            moves.push(m.clone());
        }
    }
    let mut edges = BTreeSet::new();
    for start in (0..g.moves.len()).filter(|&i| kept[i]) {
        let mut stack: Vec<usize> = succ[start].clone();
        let mut seen = vec![false; g.moves.len()];
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            if kept[n] {
                edges.insert((new_index[start], new_index[n]));
            } else {
                stack.extend(&succ[n]);
            }
        }
    }
    AlignmentGraph { moves, edges }
}

/// Synchronous and log moves, bridged over removed model moves.
pub fn reduce_log(g: &AlignmentGraph) -> AlignmentGraph {
    reduce(g, Move::has_log_part)
}

/// Synchronous and model moves, bridged over removed log moves.
pub fn reduce_model(g: &AlignmentGraph) -> AlignmentGraph {
    reduce(g, Move::has_model_part)
}

pub fn alignment_cost(g: &AlignmentGraph) -> Cost {
    g.moves.iter().map(move_cost).sum()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlignmentViolation {
    /// The log reduction is not isomorphic to the process execution.
    LogPartNotIsomorphic(String),
    /// No linearization of the model reduction replays to the final marking.
    ModelPartNotInLanguage(String),
    /// The linearization search hit its budget before deciding.
    ModelSearchExhausted(usize),
}

impl fmt::Display for AlignmentViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlignmentViolation::LogPartNotIsomorphic(d) => write!(f, "log part not isomorphic: {d}"),
            AlignmentViolation::ModelPartNotInLanguage(d) => write!(f, "model part not in language: {d}"),
            AlignmentViolation::ModelSearchExhausted(n) => {
                write!(f, "model part undecided after exploring {n} prefixes")
            }
        }
    }
}

/// Budget for the linearization search in [`validate_alignment`].
pub const DEFAULT_LINEARIZATION_BUDGET: usize = 1_000_000;

/// Checks both alignment clauses: the log reduction is isomorphic to `px`
/// under a label-preserving bijection, and some linearization of the model
/// reduction that respects its edges replays from the initial to the final
/// marking of `an`. Nets with variable arcs are preprocessed for the objects
/// of `px` first.
pub fn validate_alignment(
    px: &ProcessExecution,
    an: &AcceptingNet,
    g: &AlignmentGraph,
) -> Result<(), Vec<AlignmentViolation>> {
    let mut violations = Vec::new();
    if let Err(d) = check_log_part(px, &reduce_log(g)) {
        violations.push(AlignmentViolation::LogPartNotIsomorphic(d));
    }
    // Expansion also binds the execution's objects to the source and sink
    // places, which a net read from disk does not carry.
    let net = match product::expand_variable_arcs(an, &px.objects, &product::ExpansionOptions::default()) {
        Ok(x) => x,
        Err(e) => {
            violations.push(AlignmentViolation::ModelPartNotInLanguage(e.to_string()));
            return Err(violations);
        }
    };
    if let Err(v) = check_model_part(&net, &reduce_model(g), DEFAULT_LINEARIZATION_BUDGET) {
        violations.push(v);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

type Label<'a> = (Option<&'a ActivityName>, &'a BTreeSet<ObjectId>);

fn check_log_part(px: &ProcessExecution, log: &AlignmentGraph) -> Result<(), String> {
    if log.moves.len() != px.events.len() {
        return Err(format!(
            "{} log-visible moves for {} events",
            log.moves.len(),
            px.events.len()
        ));
    }
    if log.edges.len() != px.edges.len() {
        return Err(format!(
            "{} log edges for {} execution edges",
            log.edges.len(),
            px.edges.len()
        ));
    }
    let events: Vec<&EventId> = px.events.keys().collect();
    let event_pos: BTreeMap<&EventId, usize> = events.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let px_edges: HashSet<(usize, usize)> = px
        .edges
        .iter()
        .map(|(a, b)| (event_pos[a], event_pos[b]))
        .collect();

    let event_label = |i: usize| -> Label<'_> {
        let e = &px.events[events[i]];
        (Some(&e.activity), &e.objects)
    };
    let move_label = |j: usize| -> Label<'_> {
        let m = &log.moves[j];
        (m.log_activity.as_ref(), &m.log_objects)
    };

    let mut by_label: BTreeMap<Label<'_>, Vec<usize>> = BTreeMap::new();
    for j in 0..log.moves.len() {
        by_label.entry(move_label(j)).or_default().push(j);
    }
    for (i, e) in events.iter().enumerate() {
        if !by_label.contains_key(&event_label(i)) {
            let (a, o) = event_label(i);
            return Err(format!(
                "event {} ({}, {:?}) has no matching move",
                e,
                a.map_or("", |a| a.as_str()),
                o
            ));
        }
    }

    // Assign events in a fixed order by backtracking over same-label moves,
    // checking edges against all earlier assignments.
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by_key(|&i| (by_label[&event_label(i)].len(), i));
    let mut assignment = vec![usize::MAX; events.len()];
    let mut used = vec![false; log.moves.len()];

    fn assign(
        depth: usize,
        order: &[usize],
        candidates: &dyn Fn(usize) -> Vec<usize>,
        assignment: &mut Vec<usize>,
        used: &mut Vec<bool>,
        px_edges: &HashSet<(usize, usize)>,
        log_edges: &BTreeSet<(usize, usize)>,
    ) -> bool {
        let Some(&e) = order.get(depth) else {
            return true;
        };
        for m in candidates(e) {
            if used[m] {
                continue;
            }
            let consistent = order[..depth].iter().all(|&prev| {
                let pm = assignment[prev];
                px_edges.contains(&(prev, e)) == log_edges.contains(&(pm, m))
                    && px_edges.contains(&(e, prev)) == log_edges.contains(&(m, pm))
            });
            if !consistent {
                continue;
            }
            assignment[e] = m;
            used[m] = true;
            if assign(depth + 1, order, candidates, assignment, used, px_edges, log_edges) {
                return true;
            }
            used[m] = false;
        }
        false
    }

    let candidates = |i: usize| by_label[&event_label(i)].clone();
    if assign(0, &order, &candidates, &mut assignment, &mut used, &px_edges, &log.edges) {
        Ok(())
    } else {
        Err("no edge-preserving bijection between events and log-visible moves".into())
    }
}

fn check_model_part(an: &AcceptingNet, model: &AlignmentGraph, budget: usize) -> Result<(), AlignmentViolation> {
    let n = model.moves.len();
    let mut bindings: Vec<Binding> = Vec::with_capacity(n);
    for m in &model.moves {
        let t = m.model_transition.as_ref().expect("model reduction keeps model parts");
        let b = an
            .binding_from_ids(t.as_str(), &m.model_objects)
            .map_err(|e| AlignmentViolation::ModelPartNotInLanguage(format!("move {}: {e}", m.id)))?;
        let label = an.net.transition(b.transition).label.as_ref();
        if label != m.model_label.as_ref() {
            return Err(AlignmentViolation::ModelPartNotInLanguage(format!(
                "move {} carries label {:?} but {} is labelled {:?}",
                m.id, m.model_label, t, label
            )));
        }
        bindings.push(b);
    }
    let mut preds = vec![Vec::new(); n];
    for &(a, b) in &model.edges {
        preds[b].push(a);
    }

    struct Search<'a> {
        an: &'a AcceptingNet,
        bindings: &'a [Binding],
        preds: &'a [Vec<usize>],
        failed: HashSet<Vec<bool>>,
        explored: usize,
        budget: usize,
    }

    impl Search<'_> {
        /// Depth-first over ready moves; the marking after a set of fired
        /// bindings does not depend on their order, so failures are memoised
        /// by the set alone.
        fn run(&mut self, done: &mut Vec<bool>, marking: &Marking, remaining: usize) -> Option<bool> {
            if remaining == 0 {
                return Some(*marking == self.an.final_marking);
            }
            if self.failed.contains(done) {
                return Some(false);
            }
            self.explored += 1;
            if self.explored > self.budget {
                return None;
            }
            for i in 0..done.len() {
                if done[i] || self.preds[i].iter().any(|&p| !done[p]) {
                    continue;
                }
                let Ok(next) = self.an.fire(marking, &self.bindings[i]) else {
                    continue;
                };
                done[i] = true;
                let r = self.run(done, &next, remaining - 1);
                done[i] = false;
                match r {
                    Some(true) => return Some(true),
                    None => return None,
                    Some(false) => {}
                }
            }
            self.failed.insert(done.clone());
            Some(false)
        }
    }

    let mut search = Search {
        an,
        bindings: &bindings,
        preds: &preds,
        failed: HashSet::new(),
        explored: 0,
        budget,
    };
    match search.run(&mut vec![false; n], &an.initial, n) {
        Some(true) => Ok(()),
        Some(false) => Err(AlignmentViolation::ModelPartNotInLanguage(
            "no linearization replays to the final marking".into(),
        )),
        None => Err(AlignmentViolation::ModelSearchExhausted(search.explored)),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawMove {
    pub id: MoveId,
    pub kind: MoveKind,
    pub log_activity: Option<ActivityName>,
    #[serde(default)]
    pub log_objects: Vec<ObjectId>,
    pub model_transition: Option<TransitionId>,
    pub model_label: Option<ActivityName>,
    #[serde(default)]
    pub model_objects: Vec<ObjectId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawAlignment {
    pub moves: Vec<RawMove>,
    pub edges: Vec<(MoveId, MoveId)>,
    pub cost: Cost,
}

impl From<&AlignmentGraph> for RawAlignment {
    fn from(g: &AlignmentGraph) -> Self {
        RawAlignment {
            moves: g
                .moves
                .iter()
                .map(|m| RawMove {
                    id: m.id.clone(),
                    kind: m.kind,
                    log_activity: m.log_activity.clone(),
                    log_objects: m.log_objects.iter().cloned().collect(),
                    model_transition: m.model_transition.clone(),
                    model_label: m.model_label.clone(),
                    model_objects: m.model_objects.iter().cloned().collect(),
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|&(a, b)| (g.moves[a].id.clone(), g.moves[b].id.clone()))
                .collect(),
            cost: alignment_cost(g),
        }
    }
}

impl TryFrom<RawAlignment> for AlignmentGraph {
    type Error = AlignmentError;

    fn try_from(raw: RawAlignment) -> Result<Self, AlignmentError> {
        let mut moves = Vec::with_capacity(raw.moves.len());
        for m in raw.moves {
            let set = |v: Vec<ObjectId>, what: &str| -> Result<BTreeSet<ObjectId>, AlignmentError> {
                let n = v.len();
                let s: BTreeSet<ObjectId> = v.into_iter().collect();
                if s.len() != n {
                    return Err(AlignmentError::MalformedMove {
                        id: m.id.clone(),
                        reason: format!("repeated object in {what}"),
                    });
                }
                Ok(s)
            };
            let log_objects = set(m.log_objects.clone(), "log_objects")?;
            let model_objects = set(m.model_objects.clone(), "model_objects")?;
            moves.push(Move::try_new(
                m.id,
                m.kind,
                m.log_activity,
                log_objects,
                m.model_transition,
                m.model_label,
                model_objects,
            )?);
        }
        let index: BTreeMap<&MoveId, usize> = moves.iter().enumerate().map(|(i, m)| (&m.id, i)).collect();
        if index.len() != moves.len() {
            let mut seen = HashSet::new();
            let dup = moves.iter().find(|m| !seen.insert(&m.id)).unwrap();
            return Err(AlignmentError::DuplicateMove(dup.id.clone()));
        }
        let mut edges = BTreeSet::new();
        for (a, b) in &raw.edges {
            let ia = *index.get(a).ok_or_else(|| AlignmentError::UnknownMove(a.clone()))?;
            let ib = *index.get(b).ok_or_else(|| AlignmentError::UnknownMove(b.clone()))?;
            edges.insert((ia, ib));
        }
        drop(index);
        let g = AlignmentGraph::new(moves, edges)?;
        if g.cost() != raw.cost {
            return Err(AlignmentError::Schema(format!(
                "declared cost {} differs from computed cost {}",
                raw.cost,
                g.cost()
            )));
        }
        Ok(g)
    }
}

pub fn alignment_to_json(g: &AlignmentGraph) -> String {
    serde_json::to_string_pretty(&RawAlignment::from(g)).expect("alignment serialization is infallible")
}

pub fn parse_alignment(raw: &[u8]) -> Result<AlignmentGraph, AlignmentError> {
    let raw: RawAlignment = serde_json::from_slice(raw).map_err(|e| AlignmentError::Schema(e.to_string()))?;
    AlignmentGraph::try_from(raw)
}
