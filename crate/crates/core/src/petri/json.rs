use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AcceptingNet, NetBuilder, PetriError};
use crate::ids::{ActivityName, ObjectId, PlaceId, TransitionId, TypeName};
use crate::model::ParseMode;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawNet {
    pub places: Vec<RawPlace>,
    pub transitions: Vec<RawTransition>,
    #[serde(default)]
    pub arcs: Vec<RawArc>,
    #[serde(default)]
    pub initial_marking: Vec<RawToken>,
    #[serde(default)]
    pub final_marking: Vec<RawToken>,
    /// Additional variable-arc declarations for arcs listed in `arcs`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variable_arcs: Vec<RawVariableArc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nu: Vec<RawNu>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPlace {
    pub id: PlaceId,
    #[serde(rename = "type")]
    pub ty: TypeName,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawTransition {
    pub id: TransitionId,
    #[serde(default)]
    pub label: Option<ActivityName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawArc {
    pub source: String,
    pub target: String,
    #[serde(default = "one")]
    pub weight: u32,
    #[serde(default)]
    pub variable: bool,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawVariableArc {
    pub source: String,
    pub target: String,
    #[serde(default = "one")]
    pub weight: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawToken {
    pub place: PlaceId,
    pub object: ObjectId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawNu {
    pub transition: TransitionId,
    pub place: PlaceId,
    pub var: String,
}

/// Parses the JSON net format into an accepting net. Object types are
/// inferred from the places that hold the marking tokens.
pub fn parse_ocpn(raw: &[u8], mode: ParseMode) -> Result<AcceptingNet, PetriError> {
    let raw: RawNet = serde_json::from_slice(raw).map_err(|e| PetriError::Schema(e.to_string()))?;
    let unknown = PetriError::UnknownField;
    mode.check_extra("net", raw.extra.keys(), unknown)?;

    let mut b = NetBuilder::new();
    for p in &raw.places {
        mode.check_extra("places[]", p.extra.keys(), unknown)?;
        b.place(p.id.clone(), p.ty.clone());
    }
    for t in &raw.transitions {
        mode.check_extra("transitions[]", t.extra.keys(), unknown)?;
        b.transition(t.id.clone(), t.label.clone());
    }
    for a in &raw.arcs {
        mode.check_extra("arcs[]", a.extra.keys(), unknown)?;
        if a.weight == 0 {
            return Err(PetriError::ZeroWeight(a.source.clone(), a.target.clone()));
        }
        if a.variable {
            b.variable_arc(a.source.clone(), a.target.clone(), a.weight);
        } else {
            b.arc(a.source.clone(), a.target.clone(), a.weight);
        }
    }
    for v in &raw.variable_arcs {
        b.mark_variable(v.source.clone(), v.target.clone(), v.weight);
    }
    let net = b.build()?;

    let mut objects: BTreeMap<ObjectId, TypeName> = BTreeMap::new();
    for tok in raw.initial_marking.iter().chain(&raw.final_marking) {
        let place = net
            .place_idx(tok.place.as_str())
            .ok_or_else(|| PetriError::UnknownNode(tok.place.to_string()))?;
        let ty = &net.place(place).ty;
        match objects.get(&tok.object) {
            Some(existing) if existing != ty => {
                return Err(PetriError::MismatchedTokenType {
                    place: tok.place.clone(),
                    object: tok.object.clone(),
                })
            }
            Some(_) => {}
            None => {
                objects.insert(tok.object.clone(), ty.clone());
            }
        }
    }
    let pairs = |v: &[RawToken]| -> Vec<(PlaceId, ObjectId)> {
        v.iter().map(|t| (t.place.clone(), t.object.clone())).collect()
    };
    AcceptingNet::new(
        net,
        &objects,
        &pairs(&raw.initial_marking),
        &pairs(&raw.final_marking),
    )
}

/// The JSON representation of an accepting net.
pub fn net_to_json(an: &AcceptingNet) -> RawNet {
    let net = &an.net;
    let mut arcs = Vec::new();
    for t in net.transitions() {
        for a in &t.inputs {
            push_arc(&mut arcs, net.place(a.place).id.to_string(), t.id.to_string(), a.weight, a.variable);
        }
        for a in &t.outputs {
            push_arc(&mut arcs, t.id.to_string(), net.place(a.place).id.to_string(), a.weight, a.variable);
        }
    }
    let tokens = |m| {
        an.marking_to_ids(m)
            .into_iter()
            .map(|(place, object)| RawToken { place, object })
            .collect()
    };
    RawNet {
        places: net
            .places()
            .iter()
            .map(|p| RawPlace {
                id: p.id.clone(),
                ty: p.ty.clone(),
                extra: BTreeMap::new(),
            })
            .collect(),
        transitions: net
            .transitions()
            .iter()
            .map(|t| RawTransition {
                id: t.id.clone(),
                label: t.label.clone(),
                tag: None,
                extra: BTreeMap::new(),
            })
            .collect(),
        arcs,
        initial_marking: tokens(&an.initial),
        final_marking: tokens(&an.final_marking),
        variable_arcs: Vec::new(),
        nu: Vec::new(),
        extra: BTreeMap::new(),
    }
}

fn push_arc(out: &mut Vec<RawArc>, source: String, target: String, weight: u32, variable: u32) {
    let fixed = weight - variable;
    if variable > 0 {
        out.push(RawArc {
            source: source.clone(),
            target: target.clone(),
            weight: variable,
            variable: true,
            extra: BTreeMap::new(),
        });
    }
    if fixed > 0 {
        out.push(RawArc {
            source,
            target,
            weight: fixed,
            variable: false,
            extra: BTreeMap::new(),
        });
    }
}
