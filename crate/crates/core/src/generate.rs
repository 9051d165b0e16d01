//! Simulated process executions: random walks through an accepting net,
//! optionally perturbed by noise.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ids::{ActivityName, EventId, ObjectId, TypeName};
use crate::model::{extract_process_executions, Event, EventLog, LogError};
use crate::petri::{AcceptingNet, DEFAULT_BINDING_CAP};
use crate::product::{expand_variable_arcs, ExpansionOptions, ProductError};

/// Per-event perturbation probabilities.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoiseSpec {
    /// Drops an object from an event; events left without objects vanish.
    pub remove: f64,
    /// Replaces the activity by another label of the net.
    pub replace: f64,
    /// Inserts a copy of the event right after it.
    pub insert: f64,
}

impl NoiseSpec {
    pub fn is_zero(&self) -> bool {
        self.remove == 0.0 && self.replace == 0.0 && self.insert == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    /// Inclusive range of objects per type; every execution draws its own
    /// count.
    pub objects: BTreeMap<TypeName, RangeInclusive<usize>>,
    pub executions: usize,
    pub seed: u64,
    pub noise: NoiseSpec,
    pub max_steps: usize,
    pub attempts: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            objects: BTreeMap::new(),
            executions: 1,
            seed: 0,
            noise: NoiseSpec::default(),
            max_steps: 200,
            attempts: 50,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenerateError {
    #[error("no accepted run found for execution {execution} after {attempts} attempts")]
    NoRun { execution: usize, attempts: usize },
    #[error("type {0} does not occur in the net")]
    UnknownType(TypeName),
    #[error(transparent)]
    Product(#[from] ProductError),
    #[error(transparent)]
    Log(#[from] LogError),
}

/// One simulated run as (activity, objects) steps in firing order.
pub type Run = Vec<(ActivityName, BTreeSet<ObjectId>)>;

/// Walks the net from its initial to its final marking choosing uniformly
/// among enabled bindings that move at least one object. Silent firings
/// leave no event. Runs that get stuck or exceed `max_steps` are discarded.
pub fn random_run(an: &AcceptingNet, rng: &mut impl Rng, max_steps: usize) -> Option<Run> {
    let mut m = an.initial.clone();
    let mut run = Vec::new();
    for _ in 0..max_steps {
        if m == an.final_marking {
            return Some(run);
        }
        let mut options = Vec::new();
        for t in 0..an.net.transitions().len() {
            let Ok(bs) = an.enabled_bindings(&m, t, DEFAULT_BINDING_CAP) else {
                continue;
            };
            for b in bs {
                if b.is_empty() {
                    continue;
                }
                let next = an.fire(&m, &b).expect("enabled");
                if next != m {
                    options.push((b, next));
                }
            }
        }
        let (b, next) = options.choose(rng)?.clone();
        if let Some(label) = &an.net.transition(b.transition).label {
            run.push((label.clone(), an.binding_objects(&b)));
        }
        m = next;
    }
    (m == an.final_marking).then_some(run)
}

fn object_ids(
    spec: &BTreeMap<TypeName, RangeInclusive<usize>>,
    execution: usize,
    rng: &mut impl Rng,
) -> BTreeMap<ObjectId, TypeName> {
    let mut out = BTreeMap::new();
    for (ty, range) in spec {
        let n = if range.is_empty() { 0 } else { rng.gen_range(range.clone()) };
        for i in 0..n {
            out.insert(ObjectId::from(format!("x{execution}-{ty}{i}")), ty.clone());
        }
    }
    out
}

/// Generates a log of `spec.executions` connected executions, each with the
/// requested objects, spaced 10 ms apart per event.
pub fn generate_log(an: &AcceptingNet, spec: &GeneratorSpec) -> Result<EventLog, GenerateError> {
    for ty in spec.objects.keys() {
        if an.net.type_idx(ty).is_none() {
            return Err(GenerateError::UnknownType(ty.clone()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<ActivityName> = an
        .net
        .transitions()
        .iter()
        .filter_map(|t| t.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut all_objects = BTreeMap::new();
    let mut events = BTreeMap::new();
    let mut clock: i64 = 0;

    for x in 0..spec.executions {
        let objects = object_ids(&spec.objects, x, &mut rng);
        let expanded = expand_variable_arcs(an, &objects, &ExpansionOptions::default())?;
        let mut accepted = None;
        for _ in 0..spec.attempts {
            let Some(run) = random_run(&expanded, &mut rng, spec.max_steps) else {
                continue;
            };
            if is_connected(&objects, &run) {
                accepted = Some(run);
                break;
            }
        }
        let run = accepted.ok_or(GenerateError::NoRun {
            execution: x,
            attempts: spec.attempts,
        })?;
        let run = apply_noise(run, &spec.noise, &labels, &mut rng);
        let mut used = BTreeSet::new();
        for (i, (activity, objs)) in run.into_iter().enumerate() {
            clock += 10;
            used.extend(objs.iter().cloned());
            events.insert(
                EventId::from(format!("x{x}-e{i}")),
                Event {
                    activity,
                    timestamp: clock,
                    objects: objs,
                },
            );
        }
        for (o, ty) in objects {
            if used.contains(&o) {
                all_objects.insert(o, ty);
            } else {
                warn!("object {o} lost all its events to noise and is dropped");
            }
        }
    }
    Ok(EventLog::new(all_objects, events)?)
}

fn is_connected(objects: &BTreeMap<ObjectId, TypeName>, run: &Run) -> bool {
    let events = run
        .iter()
        .enumerate()
        .map(|(i, (a, o))| {
            (
                EventId::from(format!("e{i}")),
                Event {
                    activity: a.clone(),
                    timestamp: i as i64,
                    objects: o.clone(),
                },
            )
        })
        .collect();
    let Ok(log) = EventLog::new(objects.clone(), events) else {
        return false;
    };
    let pxs = extract_process_executions(&log);
    pxs.len() == 1 && pxs[0].objects.len() == objects.len()
}

/// Applies the noise model event by event.
pub fn apply_noise(run: Run, noise: &NoiseSpec, labels: &[ActivityName], rng: &mut impl Rng) -> Run {
    if noise.is_zero() {
        return run;
    }
    let mut out = Vec::with_capacity(run.len());
    for (mut activity, objects) in run {
        let objects: BTreeSet<ObjectId> = objects.into_iter().filter(|_| !rng.gen_bool(noise.remove)).collect();
        if objects.is_empty() {
            continue;
        }
        if rng.gen_bool(noise.replace) {
            let others: Vec<&ActivityName> = labels.iter().filter(|l| **l != activity).collect();
            if let Some(l) = others.choose(rng) {
                activity = (*l).clone();
            }
        }
        let duplicate = rng.gen_bool(noise.insert);
        out.push((activity.clone(), objects.clone()));
        if duplicate {
            out.push((activity, objects));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{extract_process_executions, ParseMode};
    use crate::petri::{parse_ocpn, ReplayOutcome};

    fn packaging_net() -> AcceptingNet {
        let raw = std::fs::read(format!("{}/fixtures/packaging_net.json", env!("CARGO_MANIFEST_DIR"))).unwrap();
        parse_ocpn(&raw, ParseMode::Strict).unwrap()
    }

    fn spec(seed: u64, noise: NoiseSpec) -> GeneratorSpec {
        GeneratorSpec {
            objects: [("package".into(), 1..=1), ("item".into(), 2..=2)].into(),
            executions: 4,
            seed,
            noise,
            ..GeneratorSpec::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let net = packaging_net();
        let a = generate_log(&net, &spec(7, NoiseSpec::default())).unwrap();
        let b = generate_log(&net, &spec(7, NoiseSpec::default())).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn noiseless_runs_are_connected_executions() {
        let net = packaging_net();
        let log = generate_log(&net, &spec(3, NoiseSpec::default())).unwrap();
        let pxs = extract_process_executions(&log);
        assert_eq!(pxs.len(), 4);
        for px in pxs {
            assert_eq!(px.objects.len(), 3);
        }
    }

    #[test]
    fn random_run_replays() {
        let net = packaging_net();
        let objects: BTreeMap<ObjectId, TypeName> =
            [("p".into(), "package".into()), ("i".into(), "item".into())].into();
        let expanded = expand_variable_arcs(&net, &objects, &ExpansionOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Walks can dead-end, e.g. after receiving an order with no items.
        let run = (0..50).find_map(|_| random_run(&expanded, &mut rng, 100)).unwrap();
        assert!(!run.is_empty());
        let labels: BTreeSet<&ActivityName> = net.net.transitions().iter().filter_map(|t| t.label.as_ref()).collect();
        assert!(run.iter().all(|(a, objs)| labels.contains(a) && !objs.is_empty()));
        assert!(matches!(expanded.replay(&[]), ReplayOutcome::Reached { accepted: false, .. }));
    }

    #[test]
    fn noise_changes_runs() {
        let run: Run = (0..50)
            .map(|i| (ActivityName::from(format!("a{}", i % 3)), BTreeSet::from([ObjectId::from("o")])))
            .collect();
        let labels: Vec<ActivityName> = vec!["a0".into(), "a1".into(), "a2".into()];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let removed = apply_noise(run.clone(), &NoiseSpec { remove: 1.0, ..NoiseSpec::default() }, &labels, &mut rng);
        assert!(removed.is_empty());
        let inserted = apply_noise(run.clone(), &NoiseSpec { insert: 1.0, ..NoiseSpec::default() }, &labels, &mut rng);
        assert_eq!(inserted.len(), 100);
        let replaced = apply_noise(run.clone(), &NoiseSpec { replace: 1.0, ..NoiseSpec::default() }, &labels, &mut rng);
        assert!(replaced.iter().zip(&run).all(|(a, b)| a.0 != b.0));
    }
}
