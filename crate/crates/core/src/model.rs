//! Object-centric event logs, the object graph and process executions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ids::{ActivityName, EventId, ObjectId, TypeName};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("malformed event log: {0}")]
    Schema(String),
    #[error("unknown field `{0}` in event log")]
    UnknownField(String),
    #[error("event without objects: {0}")]
    EventWithoutObjects(EventId),
    #[error("event {event} references object {object} which has no type")]
    UntypedObject { event: EventId, object: ObjectId },
    #[error("event {event} references object {object} more than once")]
    RepeatedObject { event: EventId, object: ObjectId },
    #[error("duplicate event id {0}")]
    DuplicateEvent(EventId),
    #[error("duplicate object id {0}")]
    DuplicateObject(ObjectId),
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
}

/// How unknown JSON fields are treated while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    Strict,
    #[default]
    Lenient,
}

impl ParseMode {
    /// Rejects or logs the unknown keys collected while deserializing.
    pub(crate) fn check_extra<'a, E>(
        self,
        context: &str,
        keys: impl IntoIterator<Item = &'a String>,
        err: impl Fn(String) -> E,
    ) -> Result<(), E> {
        for key in keys {
            match self {
                ParseMode::Strict => return Err(err(format!("{context}.{key}"))),
                ParseMode::Lenient => log::warn!("ignoring unknown field `{context}.{key}`"),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub activity: ActivityName,
    /// Milliseconds since the epoch.
    pub timestamp: i64,
    pub objects: BTreeSet<ObjectId>,
}

/// An object-centric event log.
///
/// Every event has one activity, one timestamp and at least one object, and
/// every referenced object carries exactly one type.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    objects: BTreeMap<ObjectId, TypeName>,
    events: BTreeMap<EventId, Event>,
}

impl EventLog {
    pub fn new(
        objects: BTreeMap<ObjectId, TypeName>,
        events: BTreeMap<EventId, Event>,
    ) -> Result<Self, LogError> {
        for (id, event) in &events {
            if event.objects.is_empty() {
                return Err(LogError::EventWithoutObjects(id.clone()));
            }
            if let Some(o) = event.objects.iter().find(|o| !objects.contains_key(*o)) {
                return Err(LogError::UntypedObject {
                    event: id.clone(),
                    object: o.clone(),
                });
            }
        }
        Ok(Self { objects, events })
    }

    pub fn objects(&self) -> &BTreeMap<ObjectId, TypeName> {
        &self.objects
    }

    pub fn events(&self) -> &BTreeMap<EventId, Event> {
        &self.events
    }

    pub fn object_type(&self, o: &ObjectId) -> Option<&TypeName> {
        self.objects.get(o)
    }

    pub fn object_types(&self) -> BTreeSet<TypeName> {
        self.objects.values().cloned().collect()
    }

    /// Per-object traces for every object, computed in one pass.
    pub fn traces(&self) -> BTreeMap<ObjectId, Vec<EventId>> {
        let mut traces: BTreeMap<ObjectId, Vec<(i64, EventId)>> = self
            .objects
            .keys()
            .map(|o| (o.clone(), Vec::new()))
            .collect();
        for (id, event) in &self.events {
            for o in &event.objects {
                traces
                    .get_mut(o)
                    .expect("objects are validated on construction")
                    .push((event.timestamp, id.clone()));
            }
        }
        traces
            .into_iter()
            .map(|(o, mut evs)| {
                evs.sort();
                (o, evs.into_iter().map(|(_, e)| e).collect())
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let raw = RawLog {
            objects: self
                .objects
                .iter()
                .map(|(id, ty)| RawObject {
                    id: id.clone(),
                    ty: ty.clone(),
                    extra: BTreeMap::new(),
                })
                .collect(),
            events: self
                .events
                .iter()
                .map(|(id, e)| RawEvent {
                    id: id.clone(),
                    activity: e.activity.clone(),
                    timestamp: e.timestamp,
                    objects: e.objects.iter().cloned().collect(),
                    extra: BTreeMap::new(),
                })
                .collect(),
            extra: BTreeMap::new(),
        };
        serde_json::to_string_pretty(&raw).expect("log serialization is infallible")
    }
}

#[derive(Serialize, Deserialize)]
struct RawLog {
    objects: Vec<RawObject>,
    events: Vec<RawEvent>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    id: ObjectId,
    #[serde(rename = "type")]
    ty: TypeName,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawEvent {
    id: EventId,
    activity: ActivityName,
    timestamp: i64,
    objects: Vec<ObjectId>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

/// Parses the JSON event-log format. Identifiers are kept verbatim.
pub fn parse_event_log(raw: &[u8], mode: ParseMode) -> Result<EventLog, LogError> {
    let raw: RawLog = serde_json::from_slice(raw).map_err(|e| LogError::Schema(e.to_string()))?;
    mode.check_extra("log", raw.extra.keys(), LogError::UnknownField)?;

    let mut objects = BTreeMap::new();
    for o in raw.objects {
        mode.check_extra("objects[]", o.extra.keys(), LogError::UnknownField)?;
        if objects.insert(o.id.clone(), o.ty).is_some() {
            return Err(LogError::DuplicateObject(o.id));
        }
    }

    let mut events = BTreeMap::new();
    for e in raw.events {
        mode.check_extra("events[]", e.extra.keys(), LogError::UnknownField)?;
        if events.contains_key(&e.id) {
            return Err(LogError::DuplicateEvent(e.id));
        }
        let mut objs = BTreeSet::new();
        for o in e.objects {
            if !objs.insert(o.clone()) {
                return Err(LogError::RepeatedObject {
                    event: e.id,
                    object: o,
                });
            }
        }
        events.insert(
            e.id,
            Event {
                activity: e.activity,
                timestamp: e.timestamp,
                objects: objs,
            },
        );
    }
    EventLog::new(objects, events)
}

/// Events of `o` ordered by timestamp, ties broken by ascending event id.
pub fn trace_of(log: &EventLog, o: &ObjectId) -> Result<Vec<EventId>, LogError> {
    if !log.objects.contains_key(o) {
        return Err(LogError::UnknownObject(o.clone()));
    }
    let mut evs: Vec<(i64, &EventId)> = log
        .events
        .iter()
        .filter(|(_, e)| e.objects.contains(o))
        .map(|(id, e)| (e.timestamp, id))
        .collect();
    evs.sort();
    Ok(evs.into_iter().map(|(_, id)| id.clone()).collect())
}

/// Objects as nodes, with an undirected edge between every pair of objects
/// that share an event. Edges are stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObjectGraph {
    pub nodes: BTreeSet<ObjectId>,
    pub edges: BTreeSet<(ObjectId, ObjectId)>,
}

impl ObjectGraph {
    pub fn neighbours(&self) -> BTreeMap<&ObjectId, BTreeSet<&ObjectId>> {
        let mut adj: BTreeMap<&ObjectId, BTreeSet<&ObjectId>> =
            self.nodes.iter().map(|n| (n, BTreeSet::new())).collect();
        for (a, b) in &self.edges {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        adj
    }

    /// Connected components, ordered by their smallest object id.
    pub fn components(&self) -> Vec<BTreeSet<ObjectId>> {
        let adj = self.neighbours();
        let mut seen: BTreeSet<&ObjectId> = BTreeSet::new();
        let mut out = Vec::new();
        for start in &self.nodes {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            while let Some(o) = queue.pop_front() {
                comp.insert(o.clone());
                for n in &adj[o] {
                    if seen.insert(n) {
                        queue.push_back(n);
                    }
                }
            }
            out.push(comp);
        }
        out
    }
}

pub fn build_object_graph(log: &EventLog) -> ObjectGraph {
    let mut edges = BTreeSet::new();
    for event in log.events.values() {
        let objs: Vec<&ObjectId> = event.objects.iter().collect();
        for (i, a) in objs.iter().enumerate() {
            for b in &objs[i + 1..] {
                edges.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    ObjectGraph {
        nodes: log.objects.keys().cloned().collect(),
        edges,
    }
}

/// One connected component of the object graph together with the partial
/// order its objects induce on their events.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProcessExecution {
    pub objects: BTreeMap<ObjectId, TypeName>,
    pub events: BTreeMap<EventId, Event>,
    pub edges: BTreeSet<(EventId, EventId)>,
    pub traces: BTreeMap<ObjectId, Vec<EventId>>,
}

impl ProcessExecution {
    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    /// The execution as a stand-alone event log.
    pub fn to_log(&self) -> EventLog {
        EventLog {
            objects: self.objects.clone(),
            events: self.events.clone(),
        }
    }

    pub fn predecessors(&self) -> BTreeMap<&EventId, Vec<&EventId>> {
        let mut pre: BTreeMap<&EventId, Vec<&EventId>> =
            self.events.keys().map(|e| (e, Vec::new())).collect();
        for (a, b) in &self.edges {
            pre.entry(b).or_default().push(a);
        }
        pre
    }
}

fn execution_for(
    log: &EventLog,
    component: &BTreeSet<ObjectId>,
    all_traces: &BTreeMap<ObjectId, Vec<EventId>>,
) -> ProcessExecution {
    let objects = component
        .iter()
        .map(|o| (o.clone(), log.objects[o].clone()))
        .collect();
    let mut events = BTreeMap::new();
    let mut edges = BTreeSet::new();
    let mut traces = BTreeMap::new();
    for o in component {
        let trace = all_traces[o].clone();
        for e in &trace {
            events
                .entry(e.clone())
                .or_insert_with(|| log.events[e].clone());
        }
        for pair in trace.windows(2) {
            edges.insert((pair[0].clone(), pair[1].clone()));
        }
        traces.insert(o.clone(), trace);
    }
    ProcessExecution {
        objects,
        events,
        edges,
        traces,
    }
}

/// One execution per connected component of the object graph, ordered by
/// the smallest object id of the component.
pub fn extract_process_executions(log: &EventLog) -> Vec<ProcessExecution> {
    let traces = log.traces();
    build_object_graph(log)
        .components()
        .iter()
        .map(|c| execution_for(log, c, &traces))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DagViolation {
    /// Events that remain after removing every event reachable in a
    /// topological sweep; each lies on or behind a cycle.
    Cycle(Vec<EventId>),
    UnjustifiedEdge(EventId, EventId),
    DanglingEdge(EventId, EventId),
    EventOutsideExecution(EventId),
}

pub fn validate_execution_dag(px: &ProcessExecution) -> Result<(), Vec<DagViolation>> {
    let mut violations = Vec::new();

    let justified: BTreeSet<(&EventId, &EventId)> = px
        .traces
        .values()
        .flat_map(|t| t.windows(2).map(|w| (&w[0], &w[1])))
        .collect();
    for (a, b) in &px.edges {
        if !px.events.contains_key(a) || !px.events.contains_key(b) {
            violations.push(DagViolation::DanglingEdge(a.clone(), b.clone()));
        } else if !justified.contains(&(a, b)) {
            violations.push(DagViolation::UnjustifiedEdge(a.clone(), b.clone()));
        }
    }

    for (id, e) in &px.events {
        if !e.objects.iter().any(|o| px.objects.contains_key(o)) {
            violations.push(DagViolation::EventOutsideExecution(id.clone()));
        }
    }

    // Kahn's algorithm over the in-range edges.
    let mut indegree: BTreeMap<&EventId, usize> = px.events.keys().map(|e| (e, 0)).collect();
    let mut succ: BTreeMap<&EventId, Vec<&EventId>> = BTreeMap::new();
    for (a, b) in &px.edges {
        if indegree.contains_key(a) && indegree.contains_key(b) {
            *indegree.get_mut(b).unwrap() += 1;
            succ.entry(a).or_default().push(b);
        }
    }
    let mut ready: Vec<&EventId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(e, _)| *e)
        .collect();
    let mut removed = 0;
    while let Some(e) = ready.pop() {
        removed += 1;
        for s in succ.get(e).into_iter().flatten() {
            let d = indegree.get_mut(s).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.push(s);
            }
        }
    }
    if removed < px.events.len() {
        let stuck = indegree
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(e, _)| e.clone())
            .collect();
        violations.push(DagViolation::Cycle(stuck));
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
