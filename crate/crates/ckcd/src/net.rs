//! Partitioned modal arenas, linking graphs and the CK/CD arena-net
//! correctness conditions.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{arena_of, Arena, Graph, GraphVertex, Label, Violation};
use crate::bits::Bits;
use crate::formula::{formula_tree, Formula};
use crate::sequent::{meq, msub, Derivation, Shape};
use crate::Logic;

/// A modal arena with a partition `≈` of its vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionedArena {
    pub arena: Arena,
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

/// JSON form: the arena schema plus `classes` (lists of vertex ids).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetGraph {
    pub vertices: Vec<GraphVertex>,
    pub iedges: Vec<(usize, usize)>,
    pub medges: Vec<(usize, usize)>,
    #[serde(default)]
    pub classes: Vec<Vec<usize>>,
}

impl NetGraph {
    pub fn graph(&self) -> Graph {
        Graph {
            vertices: self.vertices.clone(),
            iedges: self.iedges.clone(),
            medges: self.medges.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("arena: {0}")]
    Arena(#[from] Violation),
    #[error("class mentions unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("vertex {0} occurs in two classes")]
    Overlap(usize),
    #[error("precondition: {0}")]
    Precondition(String),
}

impl PartitionedArena {
    /// Classes are given as lists of vertex indices; uncovered vertices become
    /// singleton classes.
    pub fn new(arena: Arena, classes: Vec<Vec<usize>>) -> Result<PartitionedArena, NetError> {
        let n = arena.len();
        let mut class_of = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for c in classes {
            if c.is_empty() {
                continue;
            }
            let k = out.len();
            for &v in &c {
                if v >= n {
                    return Err(NetError::UnknownVertex(v));
                }
                if class_of[v] != usize::MAX {
                    return Err(NetError::Overlap(arena.id(v)));
                }
                class_of[v] = k;
            }
            let mut c = c;
            c.sort_unstable();
            out.push(c);
        }
        for v in 0..n {
            if class_of[v] == usize::MAX {
                class_of[v] = out.len();
                out.push(vec![v]);
            }
        }
        Ok(PartitionedArena {
            arena,
            classes: out,
            class_of,
        })
    }

    pub fn from_net_graph(g: &NetGraph) -> Result<PartitionedArena, NetError> {
        let arena = Arena::from_graph(&g.graph())?;
        let mut classes = Vec::new();
        for c in &g.classes {
            let mut cc = Vec::new();
            for &id in c {
                cc.push(arena.index_of(id).ok_or(NetError::UnknownVertex(id))?);
            }
            classes.push(cc);
        }
        PartitionedArena::new(arena, classes)
    }

    pub fn to_net_graph(&self) -> NetGraph {
        let g = self.arena.to_graph();
        NetGraph {
            vertices: g.vertices,
            iedges: g.iedges,
            medges: g.medges,
            classes: self
                .classes
                .iter()
                .map(|c| c.iter().map(|&v| self.arena.id(v)).collect())
                .collect(),
        }
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.class_of[v]
    }

    pub fn same_class(&self, a: usize, b: usize) -> bool {
        self.class_of[a] == self.class_of[b]
    }

    /// Canonical classes as sorted lists of external ids, sorted.
    pub fn canonical_classes(&self) -> Vec<Vec<usize>> {
        let mut cs: Vec<Vec<usize>> = self
            .classes
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.iter().map(|&x| self.arena.id(x)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        cs.sort();
        cs
    }

    fn linked_class(&self, c: &[usize]) -> Option<usize> {
        let evens: Vec<usize> = c
            .iter()
            .copied()
            .filter(|&v| self.arena.is_even(v))
            .collect();
        if evens.len() == 1 {
            Some(evens[0])
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Oedge,
    Omedge,
    Axlink,
}

/// The linking graph, with the kind of each edge. Vertices are arena indices.
#[derive(Clone, Debug)]
pub struct LinkingGraph {
    pub edges: Vec<(usize, usize, EdgeKind)>,
    succ: Vec<Vec<usize>>,
    /// Successors once axlinks out of vertices with non-empty cone are dropped.
    checked_succ: Vec<Vec<usize>>,
}

impl LinkingGraph {
    pub fn succ(&self, v: usize) -> &[usize] {
        &self.succ[v]
    }

    pub fn checked_succ(&self, v: usize) -> &[usize] {
        &self.checked_succ[v]
    }

    pub fn of_kind(&self, k: EdgeKind) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| e.2 == k)
            .map(|e| (e.0, e.1))
            .collect()
    }
}

/// `v ⊸ w` is a chord if some `u` has `v ⊸ u ↝ w` or `u ⊸ w` with `u ↝ v`.
pub fn is_chord(a: &Arena, v: usize, w: usize) -> bool {
    a.isucc(v).iter().any(|&u| a.medge(u, w)) || a.mpred(v).iter().any(|&u| a.iedge(u, w))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("not linked: class {class:?} has {evens} output vertices")]
pub struct NotLinked {
    pub class: Vec<usize>,
    pub evens: usize,
}

pub fn linking_graph(p: &PartitionedArena) -> Result<LinkingGraph, NotLinked> {
    let a = &p.arena;
    for c in &p.classes {
        let evens = c.iter().filter(|&&v| a.is_even(v)).count();
        if evens != 1 {
            return Err(NotLinked {
                class: c.iter().map(|&v| a.id(v)).collect(),
                evens,
            });
        }
    }
    Ok(build_linking_graph(p))
}

fn build_linking_graph(p: &PartitionedArena) -> LinkingGraph {
    let a = &p.arena;
    let n = a.len();
    let mut edges = Vec::new();
    for (v, w) in a.iedges() {
        if a.is_odd(w) && !is_chord(a, v, w) {
            edges.push((v, w, EdgeKind::Oedge));
        }
    }
    // only the roots of a modality's body, through its own `↝`
    for (m, v) in a.medges() {
        if a.pmv(v) != m {
            continue;
        }
        match (a.is_even(v), a.is_even(m)) {
            (true, true) => edges.push((v, m, EdgeKind::Omedge)),
            (false, false) => edges.push((m, v, EdgeKind::Omedge)),
            _ => {}
        }
    }
    for c in &p.classes {
        if let Some(w) = p.linked_class(c) {
            for &v in c {
                if v != w {
                    edges.push((v, w, EdgeKind::Axlink));
                }
            }
        }
    }
    edges.sort_unstable_by_key(|e| (e.0, e.1));
    edges.dedup_by_key(|e| (e.0, e.1));
    let mut succ = vec![Vec::new(); n];
    let mut checked_succ = vec![Vec::new(); n];
    for &(v, w, k) in &edges {
        succ[v].push(w);
        if !(k == EdgeKind::Axlink && !a.cone(v).is_empty()) {
            checked_succ[v].push(w);
        }
    }
    LinkingGraph {
        edges,
        succ,
        checked_succ,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetCondition {
    Empty,
    NotLinked,
    Partition,
    Acyclic,
    Functional,
    Functorial,
    NonEmptyModalities,
    CkCorrect,
    AllNonEmptyModalities,
    CdCorrect,
}

impl fmt::Display for NetCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NetCondition::Empty => "empty",
            NetCondition::NotLinked => "not-linked",
            NetCondition::Partition => "partition",
            NetCondition::Acyclic => "acyclic (1)",
            NetCondition::Functional => "functional (2)",
            NetCondition::Functorial => "functorial (3)",
            NetCondition::NonEmptyModalities => "non-empty modalities (4)",
            NetCondition::CkCorrect => "CK-correct (5)",
            NetCondition::AllNonEmptyModalities => "all non-empty modalities (6)",
            NetCondition::CdCorrect => "CD-correct (7)",
        };
        f.write_str(s)
    }
}

/// A rejected net: the first failing condition and witness vertex ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Error)]
#[error("{condition} at {witness:?}")]
pub struct NetFailure {
    pub condition: NetCondition,
    pub witness: Vec<usize>,
}

fn fail(a: &Arena, condition: NetCondition, w: &[usize]) -> NetFailure {
    NetFailure {
        condition,
        witness: w.iter().map(|&v| a.id(v)).collect(),
    }
}

/// Vertices that can reach a `⊸`-root that is also a `↝`-root along checked
/// edges, together with those targets.
fn checked_region(a: &Arena, lg: &LinkingGraph, removed: Option<&Bits>) -> Bits {
    let n = a.len();
    let mut pred = vec![Vec::new(); n];
    for v in 0..n {
        for &w in lg.checked_succ(v) {
            pred[w].push(v);
        }
    }
    let mut seen = Bits::new(n);
    let mut stack: Vec<usize> = (0..n)
        .filter(|&v| a.is_root(v) && a.is_mroot(v) && removed.is_none_or(|r| !r.contains(v)))
        .collect();
    for &v in &stack {
        seen.insert(v);
    }
    while let Some(v) = stack.pop() {
        for &u in &pred[v] {
            if removed.is_some_and(|r| r.contains(u)) || seen.contains(u) {
                continue;
            }
            seen.insert(u);
            stack.push(u);
        }
    }
    seen
}

fn find_cycle_within(lg: &LinkingGraph, region: &Bits, n: usize) -> Option<Vec<usize>> {
    let mut state = vec![0u8; n];
    let mut path: Vec<usize> = Vec::new();
    for s in region.iter() {
        if state[s] != 0 {
            continue;
        }
        // iterative DFS with explicit edge cursors
        let mut cursor: Vec<(usize, usize)> = vec![(s, 0)];
        state[s] = 1;
        path.push(s);
        while let Some(&mut (v, ref mut i)) = cursor.last_mut() {
            let succ = lg.checked_succ(v);
            if *i < succ.len() {
                let w = succ[*i];
                *i += 1;
                if !region.contains(w) {
                    continue;
                }
                if state[w] == 1 {
                    let start = path.iter().position(|&x| x == w).unwrap();
                    return Some(path[start..].to_vec());
                }
                if state[w] == 0 {
                    state[w] = 1;
                    path.push(w);
                    cursor.push((w, 0));
                }
            } else {
                state[v] = 2;
                path.pop();
                cursor.pop();
            }
        }
    }
    None
}

/// The class of the principal modal vertex of `v`, or `None` at top level.
fn frame_of(p: &PartitionedArena, v: usize) -> Option<usize> {
    let m = p.arena.pmv(v);
    (m != v).then(|| p.class_of(m))
}

/// Check the arena-net conditions for `logic`. The first failing condition
/// is reported.
pub fn check_net(p: &PartitionedArena, logic: Logic) -> Result<(), NetFailure> {
    let a = &p.arena;
    let n = a.len();
    if n == 0 {
        return Err(NetFailure {
            condition: NetCondition::Empty,
            witness: vec![],
        });
    }
    for c in &p.classes {
        let evens = c.iter().filter(|&&v| a.is_even(v)).count();
        let atomic = c.iter().any(|&v| a.is_atom(v));
        if evens != 1 || (atomic && c.len() != 2) {
            return Err(fail(a, NetCondition::NotLinked, c));
        }
        let modal = c.iter().any(|&v| a.is_modal(v));
        if atomic && (modal || a.label(c[0]) != a.label(c[1])) {
            return Err(fail(a, NetCondition::Partition, c));
        }
    }
    let lg = build_linking_graph(p);
    let region = checked_region(a, &lg, None);
    if let Some(cycle) = find_cycle_within(&lg, &region, n) {
        return Err(fail(a, NetCondition::Acyclic, &cycle));
    }
    for v in region.iter() {
        if !a.is_odd(v) {
            continue;
        }
        let mut removed = Bits::new(n);
        for &w in a.isucc(v) {
            removed.insert(w);
        }
        if checked_region(a, &lg, Some(&removed)).contains(v) {
            return Err(fail(a, NetCondition::Functional, &[v]));
        }
    }
    for c in &p.classes {
        let f0 = frame_of(p, c[0]);
        if let Some(&w) = c.iter().find(|&&w| frame_of(p, w) != f0) {
            return Err(fail(a, NetCondition::Functorial, &[c[0], w]));
        }
    }
    match logic {
        Logic::CK => {
            for v in 0..n {
                if a.is_modal(v) && a.msucc(v).is_empty() && *a.label(v) != Label::Dia {
                    return Err(fail(a, NetCondition::NonEmptyModalities, &[v]));
                }
            }
        }
        Logic::CD => {
            for v in 0..n {
                if a.is_modal(v) && a.msucc(v).is_empty() {
                    return Err(fail(a, NetCondition::AllNonEmptyModalities, &[v]));
                }
            }
        }
    }
    for c in &p.classes {
        if !a.is_modal(c[0]) {
            continue;
        }
        let w = p.linked_class(c).expect("linked");
        if c.iter().all(|&v| *a.label(v) == Label::Box) {
            continue;
        }
        let dias = c
            .iter()
            .filter(|&&v| v != w && *a.label(v) == Label::Dia)
            .count();
        let w_dia = *a.label(w) == Label::Dia;
        let ok = match logic {
            Logic::CK => w_dia && dias == 1,
            Logic::CD => w_dia && dias <= 1,
        };
        if !ok {
            let cond = match logic {
                Logic::CK => NetCondition::CkCorrect,
                Logic::CD => NetCondition::CdCorrect,
            };
            return Err(fail(a, cond, c));
        }
    }
    Ok(())
}

/// The modality-free net `∂G`, together with the in/out images of modal
/// vertices and the boundary edges joining hypothesis roots to conclusion
/// roots.
#[derive(Clone, Debug)]
pub struct Linearized {
    pub net: PartitionedArena,
    /// Edges produced by the five edge families, by external id.
    pub family_edges: Vec<(usize, usize)>,
    /// Extra edges from non-conclusion sinks to conclusion roots.
    pub boundary_edges: Vec<(usize, usize)>,
    /// Modal vertex id ↦ (in id, out id).
    pub in_out: BTreeMap<usize, (usize, usize)>,
}

pub fn linearize(p: &PartitionedArena) -> Result<Linearized, NetError> {
    check_net(p, Logic::CK).map_err(|e| NetError::Precondition(e.to_string()))?;
    let a = &p.arena;
    let n = a.len();
    let base = a.ids().iter().max().map_or(0, |m| m + 1);
    let mut in_out = BTreeMap::new();
    let mut vertices = Vec::new();
    for v in 0..n {
        if a.is_modal(v) {
            let (i, o) = (base + 2 * v, base + 2 * v + 1);
            in_out.insert(a.id(v), (i, o));
            let label = Label::Atom(format!("m{}", a.id(v)));
            vertices.push(GraphVertex {
                id: i,
                label: label.clone(),
            });
            vertices.push(GraphVertex { id: o, label });
        } else {
            vertices.push(GraphVertex {
                id: a.id(v),
                label: a.label(v).clone(),
            });
        }
    }
    let frame = |v: usize| frame_of(p, v);
    let outer = |v: usize| {
        if a.is_modal(v) {
            in_out[&a.id(v)].1
        } else {
            a.id(v)
        }
    };
    let mut edges = Vec::new();
    for (u, v) in a.iedges() {
        if frame(u) == frame(v) {
            edges.push((outer(u), outer(v)));
        }
    }
    for c in p.classes() {
        if !a.is_modal(c[0]) {
            continue;
        }
        let w = p.linked_class(c).expect("linked");
        for &l in c {
            if l != w {
                edges.push((in_out[&a.id(l)].1, in_out[&a.id(w)].1));
            }
        }
    }
    for m in 0..n {
        if !a.is_modal(m) {
            continue;
        }
        let inn = in_out[&a.id(m)].0;
        for &u in a.msucc(m) {
            if a.pmv(u) != m {
                continue;
            }
            if a.is_even(m) {
                edges.push((outer(u), inn));
            } else {
                edges.push((inn, outer(u)));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut has_out: HashMap<usize, bool> = vertices.iter().map(|v| (v.id, false)).collect();
    for &(x, _) in &edges {
        has_out.insert(x, true);
    }
    // a root whose image feeds an in-vertex is no longer a conclusion
    let conclusion: Vec<usize> = a
        .roots()
        .into_iter()
        .map(outer)
        .filter(|x| !has_out[x])
        .collect();
    let mut boundary = Vec::new();
    for v in &vertices {
        if !has_out[&v.id] && !conclusion.contains(&v.id) {
            for &r in &conclusion {
                boundary.push((v.id, r));
            }
        }
    }
    let mut all = edges.clone();
    all.extend(boundary.iter().copied());
    let graph = Graph {
        vertices,
        iedges: all,
        medges: vec![],
    };
    let arena = Arena::from_graph(&graph)?;
    let mut classes = Vec::new();
    for c in p.classes() {
        if a.is_modal(c[0]) {
            for &m in c {
                let (i, o) = in_out[&a.id(m)];
                classes.push(vec![arena.index_of(i).unwrap(), arena.index_of(o).unwrap()]);
            }
        } else {
            classes.push(
                c.iter()
                    .map(|&v| arena.index_of(a.id(v)).unwrap())
                    .collect(),
            );
        }
    }
    let net = PartitionedArena::new(arena, classes)?;
    Ok(Linearized {
        net,
        family_edges: edges,
        boundary_edges: boundary,
        in_out,
    })
}

/// An occurrence: a formula and the preorder id of its root in the end
/// sequent's formula.
type Occ = (Formula, usize);

/// Desequentialize a linear sequent proof (IMLL-CK or IMLL-CD, plain or
/// polarized rule names) into a partitioned arena over the arena of its end
/// sequent. Each modal rule contributes one class made of the modalities it
/// introduces.
pub fn net_of_proof(d: &Derivation) -> Result<PartitionedArena, NetError> {
    let s = &d.sequent;
    let arena = arena_of(&s.formula());
    let pool: Vec<Occ> = s
        .hyps
        .iter()
        .enumerate()
        .map(|(i, h)| (h.clone(), s.root_id(i)))
        .collect();
    let concl = (s.concl.clone(), s.root_id(s.hyps.len()));
    let mut classes = Vec::new();
    translate(d, pool, concl, &mut classes)?;
    let classes = classes
        .into_iter()
        .map(|c: Vec<usize>| {
            c.into_iter()
                .map(|id| arena.index_of(id).expect("vertex node"))
                .collect()
        })
        .collect();
    PartitionedArena::new(arena, classes)
}

fn take(pool: &mut Vec<Occ>, f: &Formula) -> Result<Occ, NetError> {
    let i = pool
        .iter()
        .position(|(g, _)| g == f)
        .ok_or_else(|| NetError::Precondition(format!("no occurrence of {f}")))?;
    Ok(pool.remove(i))
}

fn take_all(pool: &mut Vec<Occ>, fs: &[Formula]) -> Result<Vec<Occ>, NetError> {
    fs.iter().map(|f| take(pool, f)).collect()
}

fn translate(
    d: &Derivation,
    mut pool: Vec<Occ>,
    concl: Occ,
    out: &mut Vec<Vec<usize>>,
) -> Result<(), NetError> {
    let bad = |m: &str| NetError::Precondition(format!("{}: {m}", d.rule));
    let prem = |i: usize| d.premises.get(i).ok_or_else(|| bad("missing premise"));
    let (c, x) = concl;
    match d.rule.shape() {
        Shape::Ax => {
            let [(h, y)] = &pool[..] else {
                return Err(bad("axiom with several hypotheses"));
            };
            if *h != c {
                return Err(bad("axiom on different formulas"));
            }
            let tree = formula_tree(&c);
            for o in (0..tree.len()).filter(|&o| tree.kind(o).is_vertex()) {
                out.push(vec![y + o, x + o]);
            }
            Ok(())
        }
        Shape::ImpR => {
            let Formula::Implies(a, b) = &c else {
                return Err(bad("conclusion is not an implication"));
            };
            pool.push(((**a).clone(), x + 1));
            translate(prem(0)?, pool, ((**b).clone(), x + 1 + a.size()), out)
        }
        Shape::AndR => {
            let Formula::And(a, b) = &c else {
                return Err(bad("conclusion is not a conjunction"));
            };
            let (l, r) = (prem(0)?, prem(1)?);
            let left = take_all(&mut pool, &l.sequent.hyps)?;
            translate(l, left, ((**a).clone(), x + 1), out)?;
            translate(r, pool, ((**b).clone(), x + 1 + a.size()), out)
        }
        Shape::ImpL => {
            let (l, r) = (prem(0)?, prem(1)?);
            let forms: Vec<Formula> = pool.iter().map(|(f, _)| f.clone()).collect();
            let (h, a, b) = forms
                .iter()
                .find_map(|h| {
                    let Formula::Implies(a, b) = h else {
                        return None;
                    };
                    if **a != l.sequent.concl {
                        return None;
                    }
                    let rest = msub(&forms, std::slice::from_ref(h))?;
                    let mut want = msub(&rest, &l.sequent.hyps)?;
                    want.push((**b).clone());
                    meq(&want, &r.sequent.hyps).then(|| (h.clone(), (**a).clone(), (**b).clone()))
                })
                .ok_or_else(|| bad("no principal implication"))?;
            let (_, y) = take(&mut pool, &h)?;
            let left = take_all(&mut pool, &l.sequent.hyps)?;
            translate(l, left, (a.clone(), y + 1), out)?;
            pool.push((b, y + 1 + a.size()));
            translate(r, pool, (c, x), out)
        }
        Shape::AndL => {
            let p = prem(0)?;
            let forms: Vec<Formula> = pool.iter().map(|(f, _)| f.clone()).collect();
            let h = forms
                .iter()
                .find(|h| {
                    let Formula::And(a, b) = h else { return false };
                    let mut want = msub(&forms, std::slice::from_ref(*h)).expect("member");
                    want.push((**a).clone());
                    want.push((**b).clone());
                    meq(&want, &p.sequent.hyps)
                })
                .ok_or_else(|| bad("no principal conjunction"))?
                .clone();
            let Formula::And(a, b) = &h else {
                unreachable!()
            };
            let (_, y) = take(&mut pool, &h)?;
            pool.push(((**a).clone(), y + 1));
            pool.push(((**b).clone(), y + 1 + a.size()));
            translate(p, pool, (c, x), out)
        }
        Shape::KBox | Shape::KDia | Shape::KBot | Shape::D => {
            let p = prem(0)?;
            let body = match &c {
                Formula::Box(b) | Formula::Dia(b) => (**b).clone(),
                _ => return Err(bad("conclusion is not modal")),
            };
            let mut class = vec![x];
            let mut inner = Vec::new();
            for (f, y) in pool {
                class.push(y);
                match f {
                    Formula::Box(g) | Formula::Dia(g) => inner.push((*g, y + 1)),
                    Formula::DiaBot => {}
                    _ => return Err(bad("non-modal hypothesis")),
                }
            }
            class.sort_unstable();
            out.push(class);
            translate(p, inner, (body, x + 1), out)
        }
        _ => Err(bad("not a rule of a linear system")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;
    use crate::sequent::Rule;

    fn net(f: &str, classes: &[&[usize]]) -> PartitionedArena {
        let a = arena_of(&parse(f).unwrap());
        let cs = classes
            .iter()
            .map(|c| c.iter().map(|&id| a.index_of(id).unwrap()).collect())
            .collect();
        PartitionedArena::new(a, cs).unwrap()
    }

    // k1 = box(a3 -> b4) -> (box6 a7 -> box8 b9), box at 1
    fn k1() -> PartitionedArena {
        net(
            "box(a -> b) -> (box a -> box b)",
            &[&[3, 7], &[4, 9], &[1, 6, 8]],
        )
    }

    #[test]
    fn k1_linking_graph() {
        let p = k1();
        let lg = linking_graph(&p).unwrap();
        let ids = |k| {
            let mut v: Vec<(usize, usize)> = lg
                .of_kind(k)
                .into_iter()
                .map(|(x, y)| (p.arena.id(x), p.arena.id(y)))
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(ids(EdgeKind::Oedge), vec![(3, 4)]);
        assert_eq!(ids(EdgeKind::Omedge), vec![(1, 4), (6, 7), (9, 8)]);
        assert_eq!(ids(EdgeKind::Axlink), vec![(1, 8), (4, 9), (6, 8), (7, 3)]);
        assert_eq!(check_net(&p, Logic::CK), Ok(()));
        assert_eq!(check_net(&p, Logic::CD), Ok(()));
    }

    #[test]
    fn unpaired_atom_is_not_linked() {
        let p = net("a", &[]);
        assert_eq!(
            check_net(&p, Logic::CK).unwrap_err().condition,
            NetCondition::NotLinked
        );
        let p = net("a /\\ a", &[&[0 + 1, 2]]);
        assert!(linking_graph(&p).is_err());
        assert_eq!(
            check_net(&p, Logic::CK).unwrap_err().condition,
            NetCondition::NotLinked
        );
    }

    #[test]
    fn d_axiom_shape() {
        // box a -> dia a: class {box1, dia3}, {a2, a4}
        let p = net("box a -> dia a", &[&[1, 3], &[2, 4]]);
        assert_eq!(
            check_net(&p, Logic::CK).unwrap_err().condition,
            NetCondition::CkCorrect
        );
        assert_eq!(check_net(&p, Logic::CD), Ok(()));
    }

    #[test]
    fn box_a_implies_a_has_no_net() {
        let p = net("box a -> a", &[&[2, 3]]);
        assert!(check_net(&p, Logic::CK).is_err());
    }

    #[test]
    fn chords_never_in_oedge() {
        let p = k1();
        let lg = linking_graph(&p).unwrap();
        for (v, w) in lg.of_kind(EdgeKind::Oedge) {
            assert!(!is_chord(&p.arena, v, w));
        }
    }

    #[test]
    fn modality_free_linearize_is_identity() {
        let p = net("a -> a", &[&[1, 2]]);
        let l = linearize(&p).unwrap();
        assert_eq!(l.net.to_net_graph(), p.to_net_graph());
        assert!(l.boundary_edges.is_empty());
    }

    #[test]
    fn linearize_nested_box_example() {
        // (c2 /\ (((c6 -> box7 a8) -> box9 a10) -> b11)) -> b12
        let p = net(
            "(c /\\ (((c -> box a) -> box a) -> b)) -> b",
            &[&[2, 6], &[7, 9], &[8, 10], &[11, 12]],
        );
        assert_eq!(check_net(&p, Logic::CK), Ok(()));
        let l = linearize(&p).unwrap();
        let (i7, o7) = l.in_out[&7];
        let (i9, o9) = l.in_out[&9];
        let mut want = vec![
            (6, o7),
            (o7, o9),
            (o9, 11),
            (11, 12),
            (2, 12),
            (i7, 8),
            (8, 10),
            (10, i9),
        ];
        want.sort_unstable();
        assert_eq!(l.family_edges, want);
        assert_eq!(l.boundary_edges, vec![(i9, 12)]);
        assert_eq!(check_net(&l.net, Logic::CK), Ok(()));
        for v in [2, 6, 8, 10, 11, 12] {
            let (x, y) = (
                p.arena.index_of(v).unwrap(),
                l.net.arena.index_of(v).unwrap(),
            );
            assert_eq!(p.arena.depth(x) % 2, l.net.arena.depth(y) % 2);
        }
    }

    #[test]
    fn linearize_k1() {
        let l = linearize(&k1()).unwrap();
        let (i1, o1) = l.in_out[&1];
        let (i6, o6) = l.in_out[&6];
        let (i8, o8) = l.in_out[&8];
        let mut want = vec![
            (3, 4),
            (4, 9),
            (7, 9),
            (i1, 4),
            (i6, 7),
            (9, i8),
            (o1, o8),
            (o6, o8),
        ];
        want.sort_unstable();
        assert_eq!(l.family_edges, want);
        assert_eq!(l.boundary_edges, vec![(i8, o8)]);
        assert_eq!(check_net(&l.net, Logic::CK), Ok(()));
    }

    #[test]
    fn net_of_proof_reproduces_k1() {
        let d = crate::sequent::tests::k1_linear();
        let p = net_of_proof(&d).unwrap();
        assert_eq!(p.canonical_classes(), k1().canonical_classes());
        assert_eq!(net_of_proof(&d.polarized()).unwrap(), p);
    }

    #[test]
    fn net_of_axiom() {
        let s: crate::sequent::Sequent = "a |- a".parse().unwrap();
        let p = net_of_proof(&Derivation::new(Rule::Ax, s, vec![])).unwrap();
        assert_eq!(p.arena.len(), 2);
        assert_eq!(p.classes().len(), 1);
        assert_eq!(check_net(&p, Logic::CK), Ok(()));
    }

    #[test]
    fn net_of_proof_reproduces_nested_box_example() {
        let f = parse("(c /\\ (((c -> box a) -> box a) -> b)) -> b").unwrap();
        let s = crate::sequent::Sequent::goal(f);
        for sys in [
            crate::sequent::System::ImllCk,
            crate::sequent::System::ImllCd,
        ] {
            let d = crate::sequent::prove(&s, sys, crate::sequent::Bounds::for_sequent(&s))
                .proof()
                .unwrap();
            let p = net_of_proof(&d).unwrap();
            let want = net(
                "(c /\\ (((c -> box a) -> box a) -> b)) -> b",
                &[&[2, 6], &[7, 9], &[8, 10], &[11, 12]],
            );
            assert_eq!(p.canonical_classes(), want.canonical_classes());
        }
    }
}
