//! Graphviz DOT rendering of alignments and nets.

use std::fmt::Write;

use crate::alignment::{AlignmentGraph, Move, MoveKind};
use crate::model::ProcessExecution;
use crate::petri::AcceptingNet;
use crate::product::{SyncProductNet, TransitionTag};

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' | '\\' | '{' | '}' | '|' | '<' | '>' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

fn objects(set: &std::collections::BTreeSet<crate::ids::ObjectId>) -> String {
    let v: Vec<&str> = set.iter().map(|o| o.as_str()).collect();
    v.join(",")
}

fn move_rows(m: &Move) -> (String, String) {
    let skip = "\u{226b}".to_string();
    let log = match m.log_activity() {
        Some(a) => format!("{} ({})", a, objects(m.log_objects())),
        None => skip.clone(),
    };
    let model = match (m.model_transition(), m.model_label()) {
        (Some(_), Some(l)) => format!("{} ({})", l, objects(m.model_objects())),
        (Some(t), None) => format!("\u{03c4}:{} ({})", t, objects(m.model_objects())),
        (None, _) => skip,
    };
    (log, model)
}

/// Moves as two-row records, log part above model part.
pub fn alignment_to_dot(g: &AlignmentGraph) -> String {
    let mut s = String::from("digraph alignment {\n  rankdir=LR;\n  node [shape=record, fontsize=10];\n");
    for m in g.moves() {
        let (log, model) = move_rows(m);
        let color = match m.kind() {
            MoveKind::Sync => "palegreen",
            MoveKind::Log => "lightyellow",
            MoveKind::Model => "lightblue",
        };
        let _ = writeln!(
            s,
            "  \"{}\" [label=\"{{{}|{}}}\", style=filled, fillcolor={}];",
            escape(m.id().as_str()),
            escape(&log),
            escape(&model),
            color
        );
    }
    for &(a, b) in g.edges() {
        let _ = writeln!(
            s,
            "  \"{}\" -> \"{}\";",
            escape(g.moves()[a].id().as_str()),
            escape(g.moves()[b].id().as_str())
        );
    }
    s.push_str("}\n");
    s
}

const PALETTE: [&str; 8] = [
    "#fbb4ae", "#b3cde3", "#ccebc5", "#decbe4", "#fed9a6", "#ffffcc", "#e5d8bd", "#fddaec",
];

/// Events as boxes, the directly-follows edges of the objects as arrows.
pub fn execution_to_dot(px: &ProcessExecution) -> String {
    let mut s = String::from("digraph execution {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n");
    for (id, ev) in &px.events {
        let label = format!("{}\n{}", ev.activity, objects(&ev.objects));
        let _ = writeln!(s, "  \"{}\" [label=\"{}\"];", escape(id.as_str()), escape(&label));
    }
    for (a, b) in &px.edges {
        let _ = writeln!(s, "  \"{}\" -> \"{}\";", escape(a.as_str()), escape(b.as_str()));
    }
    s.push_str("}\n");
    s
}

fn net_body(an: &AcceptingNet, s: &mut String, indent: &str, places: impl Fn(usize) -> bool, transitions: impl Fn(usize) -> bool) {
    let net = &an.net;
    for (i, p) in net.places().iter().enumerate().filter(|(i, _)| places(*i)) {
        let initial = an.initial.in_place(i).len();
        let label = if initial > 0 {
            format!("{}\\n{} [{}]", escape(p.id.as_str()), escape(p.ty.as_str()), initial)
        } else {
            format!("{}\\n{}", escape(p.id.as_str()), escape(p.ty.as_str()))
        };
        let color = PALETTE[net.place_type_idx(i) as usize % PALETTE.len()];
        let _ = writeln!(
            s,
            "{indent}\"{}\" [shape=circle, style=filled, fillcolor=\"{color}\", label=\"{}\"];",
            escape(p.id.as_str()),
            label
        );
    }
    for (_, t) in net.transitions().iter().enumerate().filter(|(i, _)| transitions(*i)) {
        let label = t.label.as_ref().map_or("\u{03c4}".to_string(), |l| escape(l.as_str()));
        let fill = if t.is_silent() { ", style=filled, fillcolor=black, fontcolor=white" } else { "" };
        let _ = writeln!(s, "{indent}\"{}\" [shape=box, label=\"{}\"{}];", escape(t.id.as_str()), label, fill);
    }
}

fn net_arcs(an: &AcceptingNet, s: &mut String) {
    let net = &an.net;
    for t in net.transitions() {
        let attrs = |a: &crate::petri::Arc| {
            let mut v = Vec::new();
            if a.weight > 1 {
                v.push(format!("label=\"{}\"", a.weight));
            }
            if a.is_variable() {
                v.push("style=bold, color=\"black:black\"".to_string());
            }
            if v.is_empty() {
                String::new()
            } else {
                format!(" [{}]", v.join(", "))
            }
        };
        for a in &t.inputs {
            let _ = writeln!(s, "  \"{}\" -> \"{}\"{};", escape(net.place(a.place).id.as_str()), escape(t.id.as_str()), attrs(a));
        }
        for a in &t.outputs {
            let _ = writeln!(s, "  \"{}\" -> \"{}\"{};", escape(t.id.as_str()), escape(net.place(a.place).id.as_str()), attrs(a));
        }
    }
}

pub fn net_to_dot(an: &AcceptingNet) -> String {
    let mut s = String::from("digraph net {\n  rankdir=LR;\n  node [fontsize=10];\n");
    net_body(an, &mut s, "  ", |_| true, |_| true);
    net_arcs(an, &mut s);
    s.push_str("}\n");
    s
}

/// Product net with log, model and synchronous regions as clusters.
pub fn product_to_dot(sp: &SyncProductNet) -> String {
    let an = &sp.underlying;
    let mut s = String::from("digraph product {\n  rankdir=LR;\n  node [fontsize=10];\n  compound=true;\n");
    let regions = [
        ("log", TransitionTag::Log, "lightyellow"),
        ("sync", TransitionTag::Sync, "palegreen"),
        ("model", TransitionTag::Model, "lightblue"),
    ];
    for (name, tag, color) in regions {
        let _ = writeln!(s, "  subgraph cluster_{name} {{\n    label=\"{name}\";\n    style=filled;\n    color={color};");
        let places = |p: usize| match tag {
            TransitionTag::Log => sp.is_px_place(p),
            TransitionTag::Model => !sp.is_px_place(p),
            TransitionTag::Sync => false,
        };
        net_body(an, &mut s, "    ", places, |t| sp.tag(t) == tag);
        s.push_str("  }\n");
    }
    net_arcs(an, &mut s);
    s.push_str("}\n");
    s
}
