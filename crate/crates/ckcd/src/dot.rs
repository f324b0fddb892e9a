//! Graphviz output for arenas, nets, fibrations and framed views.

use std::fmt::Write;

use crate::arena::{Arena, Label};
use crate::game::FramedView;
use crate::net::PartitionedArena;
use crate::skew::SkewMap;

fn glyph(l: &Label) -> String {
    match l {
        Label::Atom(a) => a.clone(),
        Label::Box => "□".into(),
        Label::Dia => "◇".into(),
    }
}

fn vertices(out: &mut String, a: &Arena, prefix: &str, indent: &str) {
    for v in 0..a.len() {
        let shape = if a.is_modal(v) { "box" } else { "plaintext" };
        let pol = if a.is_even(v) { "∘" } else { "•" };
        let _ = writeln!(
            out,
            "{indent}{prefix}{id} [label=\"{pol}{g}{id}\", shape={shape}];",
            id = a.id(v),
            g = glyph(a.label(v)),
        );
    }
}

fn edges(out: &mut String, a: &Arena, prefix: &str, indent: &str) {
    for (u, w) in a.iedges() {
        let _ = writeln!(out, "{indent}{prefix}{} -> {prefix}{};", a.id(u), a.id(w));
    }
    for (u, w) in a.medges() {
        let _ = writeln!(
            out,
            "{indent}{prefix}{} -> {prefix}{} [style=dashed];",
            a.id(u),
            a.id(w)
        );
    }
}

/// `⊸` solid, `↝` dashed, modal vertices boxed.
pub fn arena(a: &Arena) -> String {
    let mut out = String::from("digraph arena {\n");
    vertices(&mut out, a, "v", "  ");
    edges(&mut out, a, "v", "  ");
    out.push_str("}\n");
    out
}

/// The arena plus one dashed blue chain per class of `≈`.
pub fn net(p: &PartitionedArena) -> String {
    let a = &p.arena;
    let mut out = String::from("digraph net {\n");
    vertices(&mut out, a, "v", "  ");
    edges(&mut out, a, "v", "  ");
    for class in p.classes() {
        for pair in class.windows(2) {
            let _ = writeln!(
                out,
                "  v{} -> v{} [dir=none, style=dashed, color=blue, constraint=false];",
                a.id(pair[0]),
                a.id(pair[1])
            );
        }
    }
    out.push_str("}\n");
    out
}

/// Source and target as two clusters, the map as dotted arrows between them.
pub fn fibration(m: &SkewMap) -> String {
    let mut out = String::from("digraph fibration {\n");
    for (name, a, prefix) in [
        ("source", m.source.as_ref(), "s"),
        ("target", Some(&m.target), "t"),
    ] {
        let _ = writeln!(out, "  subgraph cluster_{name} {{\n    label=\"{name}\";");
        if let Some(a) = a {
            vertices(&mut out, a, prefix, "    ");
            edges(&mut out, a, prefix, "    ");
        }
        out.push_str("  }\n");
    }
    let Some(source) = &m.source else {
        out.push_str("}\n");
        return out;
    };
    for (v, &t) in m.assign.iter().enumerate() {
        let _ = writeln!(
            out,
            "  s{} -> t{} [style=dotted, color=gray, constraint=false];",
            source.id(v),
            m.target.id(t)
        );
    }
    out.push_str("}\n");
    out
}

/// A framed view as an HTML table: moves on the bottom row, addresses
/// stacked above.
pub fn framed_view(a: &Arena, fv: &FramedView) -> String {
    let mut out = String::from("digraph framed_view {\n  node [shape=plaintext];\n  grid [label=<\n    <table border=\"0\" cellborder=\"1\" cellspacing=\"0\">\n");
    for h in (0..=fv.height).rev() {
        out.push_str("      <tr>");
        for i in 0..fv.moves.len() {
            let cell = match fv.get(h, i) {
                Some(id) => {
                    let g = a
                        .index_of(id)
                        .map(|v| glyph(a.label(v)))
                        .unwrap_or_else(|| "?".into());
                    format!("{g}<sub>{id}</sub>")
                }
                None => "ε".into(),
            };
            let _ = write!(out, "<td>{cell}</td>");
        }
        out.push_str("</tr>\n");
    }
    out.push_str("    </table>>];\n}\n");
    out
}
