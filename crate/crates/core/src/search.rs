//! Uniform-cost search over the reachable markings of a synchronous product
//! net, and conversion of the cheapest binding sequence into an alignment.

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::alignment::{reduce_log, AlignmentGraph, Cost, Move};
use crate::ids::{EventId, MoveId, ObjectId};
use crate::model::ProcessExecution;
use crate::petri::{AcceptingNet, Binding, Marking, PetriError, Token, DEFAULT_BINDING_CAP};
use crate::product::{valid_bindings_sp, SyncProductNet, TransitionTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_states: usize,
    pub timeout: Duration,
    pub binding_cap: usize,
    /// Assert that settled costs never decrease.
    pub check_monotone: bool,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_states: 5_000_000,
            timeout: Duration::from_secs(600),
            binding_cap: DEFAULT_BINDING_CAP,
            check_monotone: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub expanded_states: usize,
    pub generated_bindings: usize,
    pub frontier_peak: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SearchError {
    #[error("no binding sequence reaches the final marking")]
    Unalignable { stats: SearchStats },
    #[error("state cap of {cap} expanded markings exceeded")]
    StateCap { cap: usize, stats: SearchStats },
    #[error("time cap of {0:?} exceeded")]
    Timeout(Duration, SearchStats),
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error("settled cost decreased from {previous} to {current}")]
    NonMonotone { previous: Cost, current: Cost },
}

impl SearchError {
    pub fn is_resource_cap(&self) -> bool {
        matches!(
            self,
            SearchError::StateCap { .. }
                | SearchError::Timeout(..)
                | SearchError::Petri(PetriError::BindingCap { .. })
        )
    }

    /// Work done before the search gave up.
    pub fn stats(&self) -> Option<&SearchStats> {
        match self {
            SearchError::Unalignable { stats } | SearchError::StateCap { stats, .. } | SearchError::Timeout(_, stats) => {
                Some(stats)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchResult {
    pub bindings: Vec<Binding>,
    pub cost: Cost,
    pub stats: SearchStats,
}

/// Weight of the step taken by a product binding.
pub fn binding_cost(sp: &SyncProductNet, b: &Binding) -> Cost {
    let objects = b.all_objects().count() as u64;
    match sp.tag(b.transition) {
        TransitionTag::Sync => Cost::ZERO,
        TransitionTag::Log => Cost::new(objects, 0),
        TransitionTag::Model if sp.underlying.net.transition(b.transition).is_silent() => Cost::new(0, 1),
        TransitionTag::Model => Cost::new(objects, 0),
    }
}

/// Quick structural filter: every input place must hold a token.
fn may_fire(an: &AcceptingNet, m: &Marking, t: usize) -> bool {
    an.net
        .transition(t)
        .inputs
        .iter()
        .all(|a| m.in_place(a.place).len() >= a.weight as usize)
}

/// Successors of `m` as (binding, next marking, step cost), skipping
/// bindings that leave the marking unchanged.
pub(crate) fn successors(
    sp: &SyncProductNet,
    m: &Marking,
    cap: usize,
) -> Result<Vec<(Binding, Marking, Cost)>, PetriError> {
    let an = &sp.underlying;
    let mut out = Vec::new();
    for t in 0..an.net.transitions().len() {
        if !may_fire(an, m, t) {
            continue;
        }
        for b in valid_bindings_sp(sp, m, t, cap)? {
            let next = m
                .apply(&an.cons(&b), &an.prod(&b))
                .expect("enabled binding fires");
            if next != *m {
                let c = binding_cost(sp, &b);
                out.push((b, next, c));
            }
        }
    }
    Ok(out)
}

struct Node {
    marking: Rc<Marking>,
    cost: Cost,
    parent: Option<(usize, Binding)>,
    closed: bool,
}

/// Dijkstra from the initial to the final marking of `sp`. Among equal-cost
/// frontier entries the smaller marking is settled first, and a node's
/// parent only changes on a strict improvement, which makes the result
/// reproducible.
pub fn search_optimal(sp: &SyncProductNet, limits: &SearchLimits) -> Result<SearchResult, SearchError> {
    let started = Instant::now();
    let an = &sp.underlying;
    let mut stats = SearchStats::default();
    let mut nodes: Vec<Node> = Vec::new();
    let mut index: HashMap<Rc<Marking>, usize> = HashMap::new();
    let mut heap: BinaryHeap<Reverse<(Cost, Rc<Marking>, usize)>> = BinaryHeap::new();

    let start = Rc::new(an.initial.clone());
    index.insert(start.clone(), 0);
    nodes.push(Node {
        marking: start.clone(),
        cost: Cost::ZERO,
        parent: None,
        closed: false,
    });
    heap.push(Reverse((Cost::ZERO, start, 0)));
    let mut last_settled = Cost::ZERO;

    while let Some(Reverse((cost, marking, id))) = heap.pop() {
        if nodes[id].closed || cost > nodes[id].cost {
            continue;
        }
        nodes[id].closed = true;
        if limits.check_monotone && cost < last_settled {
            return Err(SearchError::NonMonotone {
                previous: last_settled,
                current: cost,
            });
        }
        last_settled = cost;
        stats.expanded_states += 1;
        if *marking == an.final_marking {
            stats.elapsed = started.elapsed();
            let mut bindings = Vec::new();
            let mut cur = id;
            while let Some((p, b)) = nodes[cur].parent.take() {
                bindings.push(b);
                cur = p;
            }
            bindings.reverse();
            return Ok(SearchResult { bindings, cost, stats });
        }
        if stats.expanded_states > limits.max_states {
            stats.elapsed = started.elapsed();
            return Err(SearchError::StateCap {
                cap: limits.max_states,
                stats,
            });
        }
        if stats.expanded_states % 256 == 0 && started.elapsed() > limits.timeout {
            stats.elapsed = started.elapsed();
            return Err(SearchError::Timeout(limits.timeout, stats));
        }

        for (b, next, step) in successors(sp, &marking, limits.binding_cap)? {
            stats.generated_bindings += 1;
            let c = cost + step;
            let next = Rc::new(next);
            match index.entry(next.clone()) {
                Entry::Occupied(e) => {
                    let n = &mut nodes[*e.get()];
                    if !n.closed && c < n.cost {
                        n.cost = c;
                        n.parent = Some((id, b));
                        heap.push(Reverse((c, n.marking.clone(), *e.get())));
                    }
                }
                Entry::Vacant(e) => {
                    let nid = nodes.len();
                    e.insert(nid);
                    nodes.push(Node {
                        marking: next.clone(),
                        cost: c,
                        parent: Some((id, b)),
                        closed: false,
                    });
                    heap.push(Reverse((c, next, nid)));
                }
            }
        }
        stats.frontier_peak = stats.frontier_peak.max(heap.len());
    }
    stats.elapsed = started.elapsed();
    Err(SearchError::Unalignable { stats })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConversionError {
    #[error("binding {index} of the sequence is not enabled")]
    NotReplayable { index: usize },
    #[error("sequence ends outside the final marking")]
    NotAccepted,
}

/// Turns a binding sequence of the product into an alignment graph.
///
/// Edges are the execution's own edges carried over to its log and
/// synchronous moves, plus producer-to-consumer edges for tokens flowing
/// through the de-jure places. A token-flow edge is dropped when it would
/// alter the log reduction. All edges follow sequence order.
pub fn bindings_to_alignment(
    seq: &[Binding],
    sp: &SyncProductNet,
    px: &ProcessExecution,
) -> Result<AlignmentGraph, ConversionError> {
    let an = &sp.underlying;
    let mut marking = an.initial.clone();
    let mut moves = Vec::with_capacity(seq.len());
    let mut event_move: BTreeMap<EventId, usize> = BTreeMap::new();
    let mut producers: HashMap<Token, VecDeque<usize>> = HashMap::new();
    let mut flow: BTreeSet<(usize, usize)> = BTreeSet::new();

    for (i, b) in seq.iter().enumerate() {
        marking = an
            .fire(&marking, b)
            .map_err(|_| ConversionError::NotReplayable { index: i })?;
        let origin = &sp.origin[b.transition];
        let id = MoveId::from(format!("m{i}"));
        let dj_objects = || -> BTreeSet<ObjectId> {
            b.all_objects()
                .filter(|o| !sp.is_px_object(*o))
                .map(|o| an.objects.id(o).clone())
                .collect()
        };
        let dj_transition = || origin.dj_transition.clone().expect("model side has a transition");
        let label = an.net.transition(b.transition).label.clone();
        let m = match origin.tag {
            TransitionTag::Log => {
                let e = origin.event.as_ref().expect("log side has an event");
                let ev = &px.events[e];
                event_move.insert(e.clone(), i);
                Move::log(id, ev.activity.clone(), ev.objects.clone())
            }
            TransitionTag::Model => Move::model(id, dj_transition(), label, dj_objects()),
            TransitionTag::Sync => {
                let e = origin.event.as_ref().expect("sync side has an event");
                let ev = &px.events[e];
                event_move.insert(e.clone(), i);
                Move::sync(id, ev.activity.clone(), ev.objects.clone(), dj_transition())
            }
        };
        moves.push(m);

        if origin.tag != TransitionTag::Log {
            for tok in an.cons(b).tokens() {
                if sp.is_px_place(tok.place()) {
                    continue;
                }
                if let Some(p) = producers.get_mut(tok).and_then(VecDeque::pop_front) {
                    flow.insert((p, i));
                }
            }
            for tok in an.prod(b).tokens() {
                if !sp.is_px_place(tok.place()) {
                    producers.entry(*tok).or_default().push_back(i);
                }
            }
        }
    }
    if marking != an.final_marking {
        return Err(ConversionError::NotAccepted);
    }

    let mut edges: BTreeSet<(usize, usize)> = px
        .edges
        .iter()
        .map(|(a, b)| (event_move[a], event_move[b]))
        .collect();
    let graph = |edges: &BTreeSet<(usize, usize)>| AlignmentGraph::new(moves.clone(), edges.clone()).expect("forward edges");
    let target = reduce_log(&graph(&edges)).edges().clone();
    for e in flow {
        if edges.contains(&e) {
            continue;
        }
        edges.insert(e);
        if reduce_log(&graph(&edges)).edges() != &target {
            edges.remove(&e);
        }
    }
    Ok(graph(&edges))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReachError {
    #[error("more than {0} reachable markings")]
    CapExceeded(usize),
    #[error(transparent)]
    Petri(#[from] PetriError),
}

/// Number of markings reachable from the initial marking, by breadth-first
/// search over all enabled bindings.
pub fn count_reachable(an: &AcceptingNet, cap: usize) -> Result<usize, ReachError> {
    bfs_count(&an.initial, cap, |m| {
        let mut out = Vec::new();
        for t in 0..an.net.transitions().len() {
            for b in an.enabled_bindings(m, t, DEFAULT_BINDING_CAP)? {
                out.push(an.fire(m, &b)?);
            }
        }
        Ok(out)
    })
}

/// Reachable markings of a product net under ν-valid bindings.
pub fn count_reachable_product(sp: &SyncProductNet, cap: usize) -> Result<usize, ReachError> {
    bfs_count(&sp.underlying.initial, cap, |m| {
        Ok(successors(sp, m, DEFAULT_BINDING_CAP)?
            .into_iter()
            .map(|(_, next, _)| next)
            .collect())
    })
}

fn bfs_count(
    start: &Marking,
    cap: usize,
    mut next: impl FnMut(&Marking) -> Result<Vec<Marking>, PetriError>,
) -> Result<usize, ReachError> {
    let mut seen: HashSet<Marking> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(m) = queue.pop_front() {
        for n in next(&m)? {
            if seen.insert(n.clone()) {
                if seen.len() > cap {
                    return Err(ReachError::CapExceeded(cap));
                }
                queue.push_back(n);
            }
        }
    }
    Ok(seen.len())
}
