//! Seeded random instances: small nets built from per-type state machines
//! and process executions over at most three objects.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::generate::{apply_noise, random_run, NoiseSpec, Run};
use crate::ids::{ActivityName, EventId, ObjectId, TypeName};
use crate::model::{extract_process_executions, Event, EventLog, ProcessExecution};
use crate::petri::{AcceptingNet, NetBuilder};
use crate::product::{expand_variable_arcs, ExpansionOptions};

pub const ALPHABET: [&str; 4] = ["A", "B", "C", "D"];

#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub px: ProcessExecution,
    pub net: AcceptingNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthLimits {
    pub max_events: usize,
    pub max_objects: usize,
    pub max_transitions: usize,
}

impl Default for SynthLimits {
    fn default() -> Self {
        SynthLimits {
            max_events: 6,
            max_objects: 3,
            max_transitions: 8,
        }
    }
}

fn label(rng: &mut impl Rng) -> Option<&'static str> {
    if rng.gen_bool(0.15) {
        None
    } else {
        ALPHABET.choose(rng).copied()
    }
}

/// A net with one state machine per type. Each machine has a chain from its
/// source to its sink place plus random extra steps; some steps are shared
/// between two types, optionally through variable arcs.
pub fn random_net(rng: &mut impl Rng, max_transitions: usize) -> AcceptingNet {
    let types: Vec<&str> = if rng.gen_bool(0.5) { vec!["a"] } else { vec!["a", "b"] };
    let sizes: BTreeMap<&str, usize> = types.iter().map(|t| (*t, rng.gen_range(2..=3))).collect();
    let mut b = NetBuilder::new();
    for (ty, k) in &sizes {
        for i in 0..*k {
            b.place(format!("{ty}{i}"), *ty);
        }
    }
    // (type, from, to, variable) per transition
    let mut steps: Vec<Vec<(&str, usize, usize, bool)>> = Vec::new();
    let longest = sizes.values().copied().max().unwrap_or(2);
    for i in 0..longest - 1 {
        let chain: Vec<(&str, usize, usize, bool)> = sizes
            .iter()
            .filter(|(_, k)| i + 1 < **k)
            .map(|(ty, _)| (*ty, i, i + 1, false))
            .collect();
        if chain.len() == 2 && rng.gen_bool(0.5) {
            let var = rng.gen_bool(0.3);
            steps.push(vec![chain[0], (chain[1].0, chain[1].1, chain[1].2, var)]);
        } else {
            steps.extend(chain.into_iter().map(|s| vec![s]));
        }
    }
    let extra = rng.gen_range(0..=max_transitions.saturating_sub(steps.len()).min(4));
    for _ in 0..extra {
        if steps.len() >= max_transitions {
            break;
        }
        let arity = if types.len() == 2 && rng.gen_bool(0.4) { 2 } else { 1 };
        let mut chosen: Vec<&str> = types.clone();
        chosen.shuffle(rng);
        chosen.truncate(arity);
        chosen.sort();
        let step = chosen
            .iter()
            .enumerate()
            .map(|(n, ty)| {
                let k = sizes[ty];
                let from = rng.gen_range(0..k - 1);
                let to = rng.gen_range(1..k);
                (*ty, from, to, n == 1 && rng.gen_bool(0.3))
            })
            .collect();
        steps.push(step);
    }
    for (i, step) in steps.iter().enumerate() {
        let t = format!("t{i}");
        b.transition(t.clone(), label(rng));
        for (ty, from, to, var) in step {
            if *var {
                b.variable_arc(format!("{ty}{from}"), t.clone(), 1);
                b.variable_arc(t.clone(), format!("{ty}{to}"), 1);
            } else {
                b.arc(format!("{ty}{from}"), t.clone(), 1);
                b.arc(t.clone(), format!("{ty}{to}"), 1);
            }
        }
    }
    let net = b.build().expect("generated net is consistent");
    AcceptingNet::new(net, &BTreeMap::new(), &[], &[]).expect("generated net is well-formed")
}

fn random_objects(rng: &mut impl Rng, net: &AcceptingNet, max: usize) -> BTreeMap<ObjectId, TypeName> {
    let n = rng.gen_range(1..=max);
    (0..n)
        .map(|i| {
            let ty = net.net.types().choose(rng).expect("net has types").clone();
            (ObjectId::from(format!("{ty}{i}")), ty)
        })
        .collect()
}

fn random_events(rng: &mut impl Rng, objects: &BTreeMap<ObjectId, TypeName>, max_events: usize) -> Run {
    let ids: Vec<&ObjectId> = objects.keys().collect();
    let n = rng.gen_range(1..=max_events);
    (0..n)
        .map(|_| {
            let mut objs: BTreeSet<ObjectId> = ids.iter().filter(|_| rng.gen_bool(0.5)).map(|o| (*o).clone()).collect();
            if objs.is_empty() {
                objs.insert((*ids.choose(rng).unwrap()).clone());
            }
            (ActivityName::from(*ALPHABET.choose(rng).unwrap()), objs)
        })
        .collect()
}

/// The execution containing the smallest object of a run's log.
pub fn execution_of_run(objects: &BTreeMap<ObjectId, TypeName>, run: &Run) -> Option<ProcessExecution> {
    let events: BTreeMap<EventId, Event> = run
        .iter()
        .enumerate()
        .map(|(i, (a, o))| {
            (
                EventId::from(format!("e{i}")),
                Event {
                    activity: a.clone(),
                    timestamp: 10 * i as i64,
                    objects: o.clone(),
                },
            )
        })
        .collect();
    let used: BTreeSet<&ObjectId> = run.iter().flat_map(|(_, o)| o).collect();
    let objects = objects
        .iter()
        .filter(|(o, _)| used.contains(o))
        .map(|(o, t)| (o.clone(), t.clone()))
        .collect();
    let log = EventLog::new(objects, events).ok()?;
    extract_process_executions(&log).into_iter().next()
}

/// A reproducible instance: about half of the executions come from a walk
/// through the net with light noise, the rest are random event sequences.
pub fn random_instance(seed: u64, limits: &SynthLimits) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let net = random_net(&mut rng, limits.max_transitions);
        let objects = random_objects(&mut rng, &net, limits.max_objects);
        let mut run = None;
        if rng.gen_bool(0.5) {
            if let Ok(expanded) = expand_variable_arcs(&net, &objects, &ExpansionOptions::default()) {
                run = random_run(&expanded, &mut rng, 30);
            }
            if let Some(r) = run.take() {
                let noise = NoiseSpec {
                    remove: 0.05,
                    replace: 0.15,
                    insert: 0.1,
                };
                let labels: Vec<ActivityName> = ALPHABET.iter().map(|a| ActivityName::from(*a)).collect();
                run = Some(apply_noise(r, &noise, &labels, &mut rng));
            }
        }
        let mut run = run.unwrap_or_else(|| random_events(&mut rng, &objects, limits.max_events));
        run.truncate(limits.max_events);
        if let Some(px) = execution_of_run(&objects, &run) {
            return Instance { seed, px, net };
        }
    }
}

/// Executions of `net` obtained from noiseless walks, one per seed.
pub fn perfect_fit_instance(seed: u64, net: &AcceptingNet, objects: &BTreeMap<ObjectId, TypeName>) -> Option<ProcessExecution> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let expanded = expand_variable_arcs(net, objects, &ExpansionOptions::default()).ok()?;
    for _ in 0..50 {
        let Some(run) = random_run(&expanded, &mut rng, 100) else {
            continue;
        };
        if let Some(px) = execution_of_run(objects, &run) {
            if px.objects.len() == objects.len() && px.events.len() == run.len() {
                return Some(px);
            }
        }
    }
    None
}
