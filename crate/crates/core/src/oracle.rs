//! Exhaustive reference for optimal alignment costs on small instances.
//!
//! The whole reachable state graph is materialised first and shortest
//! distances are then obtained by repeated edge relaxation. Successors are
//! enumerated with the generic binding enumeration and filtered by ν, so no
//! code is shared with the search beyond the token game itself.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::alignment::Cost;
use crate::petri::{Binding, Marking, PetriError, ReplayOutcome};
use crate::product::{nu_valid, SyncProductNet, TransitionTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_states: usize,
    pub binding_cap: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_states: 200_000,
            binding_cap: 100_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("state graph exceeds {0} markings")]
    StateCap(usize),
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error("witness fails replay")]
    BrokenWitness,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    /// `None` when the final marking is unreachable.
    pub optimal_cost: Option<Cost>,
    pub witness: Option<Vec<Binding>>,
    pub explored: usize,
}

struct Edge {
    from: usize,
    to: usize,
    weight: Cost,
    binding: Binding,
}

fn step_weight(sp: &SyncProductNet, b: &Binding) -> Cost {
    let n = b.all_objects().count() as u64;
    match sp.tag(b.transition) {
        TransitionTag::Sync => Cost::ZERO,
        TransitionTag::Model if sp.underlying.net.transition(b.transition).label.is_none() => Cost::new(0, 1),
        _ => Cost::new(n, 0),
    }
}

pub fn brute_force_optimal(sp: &SyncProductNet, limits: &OracleLimits) -> Result<OracleResult, OracleError> {
    let an = &sp.underlying;
    let mut states: Vec<Marking> = vec![an.initial.clone()];
    let mut index: HashMap<Marking, usize> = HashMap::from([(an.initial.clone(), 0)]);
    let mut edges: Vec<Edge> = Vec::new();
    let mut queue = VecDeque::from([0usize]);

    while let Some(s) = queue.pop_front() {
        let m = states[s].clone();
        for t in 0..an.net.transitions().len() {
            for b in an.enabled_bindings(&m, t, limits.binding_cap)? {
                if !nu_valid(sp, &b) {
                    continue;
                }
                let next = an.fire(&m, &b)?;
                let to = match index.get(&next) {
                    Some(&i) => i,
                    None => {
                        if states.len() >= limits.max_states {
                            return Err(OracleError::StateCap(limits.max_states));
                        }
                        let i = states.len();
                        index.insert(next.clone(), i);
                        states.push(next);
                        queue.push_back(i);
                        i
                    }
                };
                edges.push(Edge {
                    from: s,
                    to,
                    weight: step_weight(sp, &b),
                    binding: b,
                });
            }
        }
    }

    let mut dist: Vec<Option<Cost>> = vec![None; states.len()];
    let mut pred: Vec<Option<usize>> = vec![None; states.len()];
    dist[0] = Some(Cost::ZERO);
    loop {
        let mut changed = false;
        for (i, e) in edges.iter().enumerate() {
            let Some(d) = dist[e.from] else { continue };
            let candidate = d + e.weight;
            if dist[e.to].is_none_or(|cur| candidate < cur) {
                dist[e.to] = Some(candidate);
                pred[e.to] = Some(i);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let explored = states.len();
    let Some(&goal) = index.get(&an.final_marking) else {
        return Ok(OracleResult {
            optimal_cost: None,
            witness: None,
            explored,
        });
    };
    let Some(cost) = dist[goal] else {
        return Ok(OracleResult {
            optimal_cost: None,
            witness: None,
            explored,
        });
    };
    let mut witness = Vec::new();
    let mut cur = goal;
    while cur != 0 {
        let e = &edges[pred[cur].expect("reached states have predecessors")];
        witness.push(e.binding.clone());
        cur = e.from;
    }
    witness.reverse();
    match an.replay(&witness) {
        ReplayOutcome::Reached { accepted: true, .. } => {}
        _ => return Err(OracleError::BrokenWitness),
    }
    let replayed: Cost = witness.iter().map(|b| step_weight(sp, b)).sum();
    if replayed != cost {
        return Err(OracleError::BrokenWitness);
    }
    Ok(OracleResult {
        optimal_cost: Some(cost),
        witness: Some(witness),
        explored,
    })
}
