//! Arena homomorphisms and even/odd skew fibrations.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{arena_of, Arena, Graph, Label};
use crate::bits::Bits;
use crate::formula::{formula_tree, Formula};
use crate::sequent::{check_derivation, deep_chain, Derivation, Primed, Rule, Sequent, System};

/// A vertex map between two arenas. `source` is `None` for the empty map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkewMap {
    pub source: Option<Arena>,
    pub target: Arena,
    /// Target index of each source index.
    pub assign: Vec<usize>,
}

/// JSON form: arenas in the graph schema, `assign` as `[srcId, tgtId]` pairs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapGraph {
    pub source: Graph,
    pub target: Graph,
    pub assign: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("{side} arena: {violation}")]
    Arena {
        side: &'static str,
        violation: crate::arena::Violation,
    },
    #[error("source vertex {0} is not assigned")]
    Unassigned(usize),
    #[error("assignment mentions unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("source vertex {0} is assigned twice")]
    Duplicate(usize),
    #[error("middle arenas differ")]
    Mismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Even,
    Odd,
}

impl Kind {
    pub fn flip(self) -> Kind {
        match self {
            Kind::Even => Kind::Odd,
            Kind::Odd => Kind::Even,
        }
    }
}

impl SkewMap {
    pub fn new(source: Option<Arena>, target: Arena, assign: Vec<usize>) -> SkewMap {
        SkewMap {
            source,
            target,
            assign,
        }
    }

    pub fn identity(a: &Arena) -> SkewMap {
        SkewMap {
            source: Some(a.clone()),
            target: a.clone(),
            assign: (0..a.len()).collect(),
        }
    }

    pub fn empty(target: Arena) -> SkewMap {
        SkewMap {
            source: None,
            target,
            assign: vec![],
        }
    }

    /// The image of a source vertex id.
    pub fn image(&self, id: usize) -> Option<usize> {
        let s = self.source.as_ref()?;
        Some(self.target.id(self.assign[s.index_of(id)?]))
    }

    pub fn from_graph(g: &MapGraph) -> Result<SkewMap, MapError> {
        let target = Arena::from_graph(&g.target).map_err(|violation| MapError::Arena {
            side: "target",
            violation,
        })?;
        if g.source.vertices.is_empty() {
            return match g.assign.first() {
                Some(&(s, _)) => Err(MapError::UnknownVertex(s)),
                None => Ok(SkewMap::empty(target)),
            };
        }
        let source = Arena::from_graph(&g.source).map_err(|violation| MapError::Arena {
            side: "source",
            violation,
        })?;
        let mut assign = vec![usize::MAX; source.len()];
        for &(s, t) in &g.assign {
            let si = source.index_of(s).ok_or(MapError::UnknownVertex(s))?;
            let ti = target.index_of(t).ok_or(MapError::UnknownVertex(t))?;
            if assign[si] != usize::MAX {
                return Err(MapError::Duplicate(s));
            }
            assign[si] = ti;
        }
        if let Some(si) = assign.iter().position(|&t| t == usize::MAX) {
            return Err(MapError::Unassigned(source.id(si)));
        }
        Ok(SkewMap {
            source: Some(source),
            target,
            assign,
        })
    }

    pub fn to_graph(&self) -> MapGraph {
        let (source, assign) = match &self.source {
            Some(s) => (
                s.to_graph(),
                (0..s.len())
                    .map(|i| (s.id(i), self.target.id(self.assign[i])))
                    .collect(),
            ),
            None => (Graph::default(), vec![]),
        };
        MapGraph {
            source,
            target: self.target.to_graph(),
            assign,
        }
    }
}

impl Serialize for SkewMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_graph().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SkewMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<SkewMap, D::Error> {
        let g = MapGraph::deserialize(d)?;
        SkewMap::from_graph(&g).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    /// The empty map is only an odd fibration.
    EmptySource,
    Iedge,
    Medge,
    Depth,
    Label,
    Modal,
    Conjunct,
    Disjunct,
    Lifting,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Clause::EmptySource => "empty-source",
            Clause::Iedge => "iedge",
            Clause::Medge => "medge",
            Clause::Depth => "depth",
            Clause::Label => "label",
            Clause::Modal => "modal",
            Clause::Conjunct => "conjunct",
            Clause::Disjunct => "disjunct",
            Clause::Lifting => "lifting",
        };
        f.write_str(s)
    }
}

/// A failed clause. Witness ids are source ids, except where a target vertex
/// is needed, which comes last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Error)]
#[error("{clause} at {witness:?}")]
pub struct FibrationFailure {
    pub clause: Clause,
    pub witness: Vec<usize>,
}

/// Conjunct sets and their complements (disjunct sets) of an arena.
pub(crate) struct Relations {
    pub conj: Vec<Bits>,
    pub disj: Vec<Bits>,
}

impl Relations {
    pub fn of(a: &Arena) -> Relations {
        let conj = a.conjunct_sets();
        let n = a.len();
        let disj = conj
            .iter()
            .enumerate()
            .map(|(v, c)| {
                let mut d = Bits::new(n);
                for w in (0..n).filter(|&w| w != v && !c.contains(w)) {
                    d.insert(w);
                }
                d
            })
            .collect();
        Relations { conj, disj }
    }

    fn rel(&self, kind: Kind) -> &[Bits] {
        match kind {
            Kind::Even => &self.conj,
            Kind::Odd => &self.disj,
        }
    }
}

pub fn check_fibration(m: &SkewMap, kind: Kind) -> Result<(), FibrationFailure> {
    let Some(src) = &m.source else {
        return match kind {
            Kind::Odd => Ok(()),
            Kind::Even => Err(FibrationFailure {
                clause: Clause::EmptySource,
                witness: vec![],
            }),
        };
    };
    check_homomorphism(m, src)?;
    check_relations(m, src, kind, &Relations::of(src), &Relations::of(&m.target))
}

/// Edge, depth, label and modal clauses.
pub(crate) fn check_homomorphism(m: &SkewMap, src: &Arena) -> Result<(), FibrationFailure> {
    let tgt = &m.target;
    let f = &m.assign;
    let fail = |clause, witness: Vec<usize>| Err(FibrationFailure { clause, witness });
    for v in 0..src.len() {
        if src.label(v) != tgt.label(f[v]) {
            return fail(Clause::Label, vec![src.id(v), tgt.id(f[v])]);
        }
        if src.depth(v) != tgt.depth(f[v]) {
            return fail(Clause::Depth, vec![src.id(v), tgt.id(f[v])]);
        }
    }
    for (a, b) in src.iedges() {
        if !tgt.iedge(f[a], f[b]) {
            return fail(Clause::Iedge, vec![src.id(a), src.id(b)]);
        }
    }
    for (a, b) in src.medges() {
        if !tgt.medge(f[a], f[b]) {
            return fail(Clause::Medge, vec![src.id(a), src.id(b)]);
        }
    }
    // every modality above an image comes from a modality above the preimage
    for u in 0..src.len() {
        for &x in tgt.mpred(f[u]) {
            if !src.mpred(u).iter().any(|&w| f[w] == x) {
                return fail(Clause::Modal, vec![src.id(u), tgt.id(x)]);
            }
        }
    }
    Ok(())
}

pub(crate) fn check_relations(
    m: &SkewMap,
    src: &Arena,
    kind: Kind,
    hr: &Relations,
    gr: &Relations,
) -> Result<(), FibrationFailure> {
    let f = &m.assign;
    let (hrel, grel) = (hr.rel(kind), gr.rel(kind));
    let clause = match kind {
        Kind::Even => Clause::Conjunct,
        Kind::Odd => Clause::Disjunct,
    };
    for v in 0..src.len() {
        for w in hrel[v].iter().filter(|&w| w > v) {
            if !grel[f[v]].contains(f[w]) {
                return Err(FibrationFailure {
                    clause,
                    witness: vec![src.id(v), src.id(w)],
                });
            }
        }
    }
    // lifting: whenever f(v) R w there is u R v with f(u) not R w
    let tn = m.target.len();
    let mut pull = vec![Bits::new(src.len()); tn];
    for u in 0..src.len() {
        for w in grel[f[u]].iter() {
            pull[w].insert(u);
        }
    }
    for v in 0..src.len() {
        for w in grel[f[v]].iter() {
            if hrel[v].iter().all(|u| pull[w].contains(u)) {
                return Err(FibrationFailure {
                    clause: Clause::Lifting,
                    witness: vec![src.id(v), m.target.id(w)],
                });
            }
        }
    }
    Ok(())
}

/// `g ∘ f`.
pub fn compose(f: &SkewMap, g: &SkewMap) -> Result<SkewMap, MapError> {
    let mid = g.source.as_ref().ok_or(MapError::Mismatch)?;
    if f.target != *mid {
        return Err(MapError::Mismatch);
    }
    Ok(SkewMap {
        source: f.source.clone(),
        target: g.target.clone(),
        assign: f.assign.iter().map(|&x| g.assign[x]).collect(),
    })
}

/// The even skew fibration `⟦H′⟧ → ⟦H⟧` of a deep derivation from `H′` (its
/// open premise) to `H` (its conclusion). Arenas are those of the curried
/// sequent formulas.
pub fn fibration_of_derivation(d: &Derivation) -> Result<SkewMap, String> {
    check_derivation(d, System::DownLj).map_err(|e| e.to_string())?;
    let top = d.top().clone();
    let map = node_map(d)?;
    let (fs, ft) = (top.formula(), d.sequent.formula());
    let (ts, tt) = (formula_tree(&fs), formula_tree(&ft));
    let (src, tgt) = (arena_of(&fs), arena_of(&ft));
    let mut assign = Vec::with_capacity(src.len());
    for i in 0..src.len() {
        let node = src.id(i);
        let image = map[node];
        if !tt.kind(image).is_vertex() || !ts.kind(node).is_vertex() {
            return Err(format!("node {node} maps to non-vertex {image}"));
        }
        assign.push(tgt.index_of(image).expect("vertex node"));
    }
    Ok(SkewMap {
        source: Some(src),
        target: tgt,
        assign,
    })
}

/// Tree-node map from the open premise's sequent formula to the conclusion's.
fn node_map(d: &Derivation) -> Result<Vec<usize>, String> {
    if d.rule == Rule::Hyp {
        return Ok((0..d.sequent.formula().size()).collect());
    }
    let above = node_map(&d.premises[0])?;
    let step = step_map(
        &d.premises[0].sequent,
        &d.sequent,
        d.rule,
        d.context_path.as_deref().unwrap_or(&[]),
    )?;
    Ok(above.into_iter().map(|x| step[x]).collect())
}

/// One deep step: map the premise's nodes onto the conclusion's.
fn step_map(
    top: &Sequent,
    bottom: &Sequent,
    rule: Rule,
    path: &[usize],
) -> Result<Vec<usize>, String> {
    let (&pos, inner) = path.split_first().ok_or("empty path")?;
    let k = bottom.hyps.len();
    let at = bottom.at(pos).ok_or("bad position")?;
    let x_sub = crate::sequent::subformula(at, inner).ok_or("bad path")?;
    // the premise written in the conclusion's order
    let replaced_sub = match (rule, x_sub) {
        (Rule::DeepWTens, Formula::And(a, b)) => {
            // either conjunct may be the kept one
            let keep_left = contains_at(top, pos, k, bottom, inner, a);
            if keep_left {
                (**a).clone()
            } else {
                (**b).clone()
            }
        }
        (Rule::DeepWLimp, Formula::Implies(_, a)) => (**a).clone(),
        (Rule::DeepWDia, Formula::Dia(_)) => Formula::DiaBot,
        (Rule::DeepC, a) => Formula::and(a.clone(), a.clone()),
        _ => return Err("rule does not match the rewritten subformula".into()),
    };
    let whole = crate::sequent::replace_at(at, inner, replaced_sub.clone()).ok_or("bad path")?;
    let mut r_hyps = bottom.hyps.clone();
    let mut r_concl = bottom.concl.clone();
    if pos < k {
        r_hyps[pos] = whole;
    } else {
        r_concl = whole;
    }
    let r = Sequent {
        hyps: r_hyps,
        concl: r_concl,
    };
    // offsets of the rewritten subtree inside the conclusion formula
    let x = bottom.root_id(pos) + local_id(at, inner);
    let (ysize, xsize) = (replaced_sub.size(), x_sub.size());
    let inside = |o: usize| -> usize {
        match (rule, x_sub) {
            (Rule::DeepWTens, Formula::And(a, b)) => {
                if replaced_sub == **a && contains_at(top, pos, k, bottom, inner, a) {
                    x + 1 + o
                } else {
                    let _ = b;
                    x + 1 + a.size() + o
                }
            }
            (Rule::DeepWLimp, Formula::Implies(b, _)) => x + 1 + b.size() + o,
            (Rule::DeepWDia, _) => x,
            (Rule::DeepC, a) => {
                if o == 0 {
                    x
                } else if o <= a.size() {
                    x + o - 1
                } else {
                    x + o - 1 - a.size()
                }
            }
            _ => unreachable!(),
        }
    };
    let r_to_bottom = |id: usize| -> usize {
        if id < x {
            id
        } else if id < x + ysize {
            inside(id - x)
        } else {
            id + xsize - ysize
        }
    };
    // premise order -> conclusion order by matching equal formulas
    let mut used = vec![false; r.hyps.len()];
    let mut perm = vec![0; top.hyps.len()];
    for (i, h) in top.hyps.iter().enumerate() {
        let j = (0..r.hyps.len())
            .find(|&j| !used[j] && r.hyps[j] == *h)
            .ok_or("premise does not match")?;
        used[j] = true;
        perm[i] = j;
    }
    let n = top.formula().size();
    let mut out = vec![0; n];
    // spine nodes of the curried formula map to spine nodes
    let mut spine_top = Vec::new();
    for i in 0..=top.hyps.len() {
        let root = top.root_id(i);
        if i < top.hyps.len() {
            spine_top.push(root - 1);
        }
        let (rj, size) = if i < top.hyps.len() {
            (perm[i], top.hyps[i].size())
        } else {
            (r.hyps.len(), top.concl.size())
        };
        let rroot = r.root_id(rj);
        for o in 0..size {
            out[root + o] = r_to_bottom(rroot + o);
        }
    }
    for (i, s) in spine_top.into_iter().enumerate() {
        out[s] = r_to_bottom(r.root_id(i) - 1);
    }
    Ok(out)
}

/// Whether the kept conjunct of a `w̄⊗` step is the left one: the premise
/// must contain the left-kept rewrite.
fn contains_at(
    top: &Sequent,
    pos: usize,
    k: usize,
    bottom: &Sequent,
    inner: &[usize],
    left: &Formula,
) -> bool {
    let at = bottom.at(pos).expect("checked");
    let Some(cand) = crate::sequent::replace_at(at, inner, left.clone()) else {
        return false;
    };
    if pos < k {
        let mut hs = bottom.hyps.clone();
        hs[pos] = cand;
        crate::sequent::meq(&hs, &top.hyps)
    } else {
        cand == top.concl && crate::sequent::meq(&bottom.hyps, &top.hyps)
    }
}

/// Preorder offset of the subformula at `path`.
fn local_id(f: &Formula, path: &[usize]) -> usize {
    let mut off = 0;
    let mut cur = f;
    for &c in path {
        match (cur, c) {
            (Formula::Implies(a, _) | Formula::And(a, _), 0) => {
                off += 1;
                cur = a;
            }
            (Formula::Implies(a, b) | Formula::And(a, b), 1) => {
                off += 1 + a.size();
                cur = b;
            }
            (Formula::Box(a) | Formula::Dia(a), 0) => {
                off += 1;
                cur = a;
            }
            _ => panic!("path checked by the derivation checker"),
        }
    }
    off
}

/// Generators of skew fibrations. Vertex ids are those of the map's arenas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "op")]
pub enum GeneratorTree {
    /// `id_G` on a sub-arena, as `[srcId, tgtId]` pairs (`id_v` for one pair).
    Id { pairs: Vec<(usize, usize)> },
    /// `∅_G`.
    Empty { target: Vec<usize> },
    /// `f + g`.
    Sum {
        left: Box<GeneratorTree>,
        right: Box<GeneratorTree>,
    },
    /// `f ⊸ g`.
    Join {
        left: Box<GeneratorTree>,
        right: Box<GeneratorTree>,
    },
    /// `id_v ↝ g`.
    Prefix {
        source: usize,
        target: usize,
        body: Box<GeneratorTree>,
    },
    /// `⟨f, g⟩`.
    Pair {
        left: Box<GeneratorTree>,
        right: Box<GeneratorTree>,
    },
}

impl GeneratorTree {
    /// The vertex map it denotes, as `[srcId, tgtId]` pairs sorted by source.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out.sort();
        out
    }

    fn collect(&self, out: &mut Vec<(usize, usize)>) {
        match self {
            GeneratorTree::Id { pairs } => out.extend(pairs),
            GeneratorTree::Empty { .. } => {}
            GeneratorTree::Sum { left, right }
            | GeneratorTree::Join { left, right }
            | GeneratorTree::Pair { left, right } => {
                left.collect(out);
                right.collect(out);
            }
            GeneratorTree::Prefix {
                source,
                target,
                body,
            } => {
                out.push((*source, *target));
                body.collect(out);
            }
        }
    }

    /// Whether the tree follows the even (or odd) grammar.
    pub fn follows_grammar(&self, kind: Kind) -> bool {
        use GeneratorTree::*;
        match (self, kind) {
            (Id { .. }, _) => true,
            (Empty { .. }, k) => k == Kind::Odd,
            (Sum { left, right }, k) => left.follows_grammar(k) && right.follows_grammar(k),
            (Join { left, right }, k) => left.follows_grammar(k.flip()) && right.follows_grammar(k),
            (Prefix { body, .. }, k) => body.follows_grammar(k),
            (Pair { left, right }, k) => {
                k == Kind::Odd && left.follows_grammar(k) && right.follows_grammar(k)
            }
        }
    }

    pub fn count_pairs(&self) -> usize {
        use GeneratorTree::*;
        match self {
            Id { .. } => 0,
            Empty { .. } => 0,
            Sum { left, right } | Join { left, right } => left.count_pairs() + right.count_pairs(),
            Pair { left, right } => 1 + left.count_pairs() + right.count_pairs(),
            Prefix { body, .. } => body.count_pairs(),
        }
    }

    pub fn count_empty(&self) -> usize {
        use GeneratorTree::*;
        match self {
            Id { .. } => 0,
            Empty { .. } => 1,
            Sum { left, right } | Join { left, right } | Pair { left, right } => {
                left.count_empty() + right.count_empty()
            }
            Prefix { body, .. } => body.count_empty(),
        }
    }
}

/// The result of [`decompose_fibration`]: the generator tree, a deep
/// derivation read off it, and the renamings of the map's source and target
/// ids to preorder ids of the derivation's premise and conclusion formulas.
#[derive(Clone, Debug)]
pub struct FibrationDecomposition {
    pub tree: GeneratorTree,
    pub derivation: Derivation,
    pub source_ids: BTreeMap<usize, usize>,
    pub target_ids: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("not an even skew fibration: {0}")]
    Precondition(FibrationFailure),
    #[error("empty source")]
    EmptySource,
    #[error("no generator decomposition at target vertices {0:?}")]
    NonDecomposable(Vec<usize>),
}

/// Top-level shape of a sub-arena given by a sorted vertex set.
enum Split {
    Vertex(usize),
    Sum(Vec<Vec<usize>>),
    Join(Vec<usize>, Vec<usize>),
    Prefix(usize, Vec<usize>),
}

fn split(a: &Arena, set: &[usize]) -> Split {
    if set.len() == 1 {
        return Split::Vertex(set[0]);
    }
    let comps = components(a, set);
    if comps.len() > 1 {
        return Split::Sum(comps);
    }
    let inside = |v: usize| set.binary_search(&v).is_ok();
    let roots: Vec<usize> = set
        .iter()
        .copied()
        .filter(|&v| !a.isucc(v).iter().any(|&w| inside(w)))
        .collect();
    let mut right: Vec<usize> = roots.clone();
    for &r in &roots {
        if a.is_modal(r) {
            right.extend(a.cone(r).iter().filter(|&w| inside(w)));
            right.extend(a.msucc(r).iter().copied().filter(|&w| inside(w)));
        }
    }
    right.sort_unstable();
    right.dedup();
    if right.len() < set.len() {
        let left = set
            .iter()
            .copied()
            .filter(|v| right.binary_search(v).is_err())
            .collect();
        return Split::Join(left, right);
    }
    let top = *roots
        .iter()
        .find(|&&r| a.is_modal(r) && !a.mpred(r).iter().any(|&m| inside(m)))
        .expect("connected non-join arena has a modal root");
    Split::Prefix(top, set.iter().copied().filter(|&v| v != top).collect())
}

/// Connected components under both edge colours, sorted by least vertex.
fn components(a: &Arena, set: &[usize]) -> Vec<Vec<usize>> {
    let inside = |v: usize| set.binary_search(&v).is_ok();
    let mut comp: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &s in set {
        if comp.contains_key(&s) {
            continue;
        }
        let c = out.len();
        let mut stack = vec![s];
        let mut members = vec![];
        comp.insert(s, c);
        while let Some(v) = stack.pop() {
            members.push(v);
            let nbrs = a
                .isucc(v)
                .iter()
                .chain(a.ipred(v))
                .chain(a.msucc(v))
                .chain(a.mpred(v));
            for &w in nbrs {
                if inside(w) && !comp.contains_key(&w) {
                    comp.insert(w, c);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Decompose an even skew fibration into generators and read off a deep
/// derivation from the formula of its source to that of its target.
pub fn decompose_fibration(m: &SkewMap) -> Result<FibrationDecomposition, DecomposeError> {
    check_fibration(m, Kind::Even).map_err(DecomposeError::Precondition)?;
    let src = m.source.as_ref().ok_or(DecomposeError::EmptySource)?;
    let d = Decomposer { m, src };
    let all_s: Vec<usize> = (0..src.len()).collect();
    let all_t: Vec<usize> = (0..m.target.len()).collect();
    let tree = d.go(&all_s, &all_t, Kind::Even)?;
    let (primed, s_order, t_order) = d.read(&tree, &all_t);
    let derivation =
        deep_chain(&[], &primed).map_err(|_| DecomposeError::NonDecomposable(vec![]))?;
    let rename = |f: &Formula, order: &[usize], a: &Arena| -> BTreeMap<usize, usize> {
        let t = formula_tree(f);
        let nodes = (0..t.len()).filter(|&i| t.kind(i).is_vertex());
        order
            .iter()
            .zip(nodes)
            .map(|(&v, n)| (a.id(v), n))
            .collect()
    };
    let source_ids = rename(&primed.linear(), &s_order, src);
    let target_ids = rename(&primed.original(), &t_order, &m.target);
    let tree = d.ids(tree);
    Ok(FibrationDecomposition {
        tree,
        derivation,
        source_ids,
        target_ids,
    })
}

struct Decomposer<'a> {
    m: &'a SkewMap,
    src: &'a Arena,
}

impl Decomposer<'_> {
    fn fail<T>(&self, t: &[usize]) -> Result<T, DecomposeError> {
        Err(DecomposeError::NonDecomposable(
            t.iter().map(|&v| self.m.target.id(v)).collect(),
        ))
    }

    /// A tree over indices (converted to ids at the end).
    fn go(&self, s: &[usize], t: &[usize], kind: Kind) -> Result<GeneratorTree, DecomposeError> {
        let f = &self.m.assign;
        if s.is_empty() {
            return match kind {
                Kind::Odd => Ok(GeneratorTree::Empty { target: t.to_vec() }),
                Kind::Even => self.fail(t),
            };
        }
        if let Some(pairs) = self.identity(s, t) {
            return Ok(GeneratorTree::Id { pairs });
        }
        let pre = |part: &[usize]| -> Vec<usize> {
            s.iter()
                .copied()
                .filter(|&v| part.binary_search(&f[v]).is_ok())
                .collect()
        };
        match split(&self.m.target, t) {
            Split::Sum(comps) => {
                let mut acc: Option<GeneratorTree> = None;
                for c in comps {
                    let sub = self.go(&pre(&c), &c, kind)?;
                    acc = Some(match acc {
                        None => sub,
                        Some(l) => GeneratorTree::Sum {
                            left: Box::new(l),
                            right: Box::new(sub),
                        },
                    });
                }
                Ok(acc.expect("at least two components"))
            }
            _ if kind == Kind::Odd && components(self.src, s).len() > 1 => {
                let comps = components(self.src, s);
                let subs = comps
                    .iter()
                    .map(|c| self.go(c, t, kind))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(subs
                    .into_iter()
                    .rev()
                    .reduce(|r, l| GeneratorTree::Pair {
                        left: Box::new(l),
                        right: Box::new(r),
                    })
                    .expect("non-empty"))
            }
            Split::Vertex(_) => self.fail(t),
            Split::Join(l, r) => {
                let left = self.go(&pre(&l), &l, kind.flip())?;
                let right = self.go(&pre(&r), &r, kind)?;
                Ok(GeneratorTree::Join {
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
            Split::Prefix(top, rest) => {
                let tops: Vec<usize> = s.iter().copied().filter(|&v| f[v] == top).collect();
                let [w] = tops[..] else { return self.fail(t) };
                let others: Vec<usize> = s.iter().copied().filter(|&v| v != w).collect();
                let body = self.go(&others, &rest, kind)?;
                Ok(GeneratorTree::Prefix {
                    source: w,
                    target: top,
                    body: Box::new(body),
                })
            }
        }
    }

    /// `f` restricted to `s` is an isomorphism onto `t`.
    fn identity(&self, s: &[usize], t: &[usize]) -> Option<Vec<(usize, usize)>> {
        let f = &self.m.assign;
        if s.len() != t.len() {
            return None;
        }
        let mut img: Vec<usize> = s.iter().map(|&v| f[v]).collect();
        img.sort_unstable();
        if img != t {
            return None;
        }
        let (a, g) = (self.src, &self.m.target);
        for &u in s {
            for &v in s {
                if a.iedge(u, v) != g.iedge(f[u], f[v]) || a.medge(u, v) != g.medge(f[u], f[v]) {
                    return None;
                }
            }
        }
        Some(s.iter().map(|&v| (v, f[v])).collect())
    }

    fn ids(&self, t: GeneratorTree) -> GeneratorTree {
        use GeneratorTree::*;
        let (s, g) = (self.src, &self.m.target);
        let b = |x: Box<GeneratorTree>| Box::new(self.ids(*x));
        match t {
            Id { pairs } => Id {
                pairs: pairs.into_iter().map(|(u, v)| (s.id(u), g.id(v))).collect(),
            },
            Empty { target } => Empty {
                target: target.into_iter().map(|v| g.id(v)).collect(),
            },
            Sum { left, right } => Sum {
                left: b(left),
                right: b(right),
            },
            Join { left, right } => Join {
                left: b(left),
                right: b(right),
            },
            Pair { left, right } => Pair {
                left: b(left),
                right: b(right),
            },
            Prefix {
                source,
                target,
                body,
            } => Prefix {
                source: s.id(source),
                target: g.id(target),
                body: b(body),
            },
        }
    }

    /// Read the target sub-arena as a formula, listing its vertices in preorder.
    fn formula(&self, t: &[usize]) -> (Formula, Vec<usize>) {
        let g = &self.m.target;
        match split(g, t) {
            Split::Vertex(v) => match g.label(v) {
                Label::Atom(a) => (Formula::Atom(a.clone()), vec![v]),
                Label::Dia => (Formula::DiaBot, vec![v]),
                Label::Box => panic!("box vertex without body"),
            },
            Split::Sum(comps) => {
                let mut it = comps.iter().map(|c| self.formula(c));
                let first = it.next().expect("components");
                it.fold(first, |(f, mut o), (g, o2)| {
                    o.extend(o2);
                    (Formula::and(f, g), o)
                })
            }
            Split::Join(l, r) => {
                let ((a, mut o), (b, o2)) = (self.formula(&l), self.formula(&r));
                o.extend(o2);
                (Formula::implies(a, b), o)
            }
            Split::Prefix(top, rest) => {
                let (a, o2) = self.formula(&rest);
                let mut o = vec![top];
                o.extend(o2);
                let f = if *g.label(top) == Label::Box {
                    Formula::boxed(a)
                } else {
                    Formula::dia(a)
                };
                (f, o)
            }
        }
    }

    /// The primed form of a tree over target set `t`, with the source and
    /// target vertices in preorder of its linear and original formulas.
    fn read(&self, tree: &GeneratorTree, t: &[usize]) -> (Primed, Vec<usize>, Vec<usize>) {
        use GeneratorTree::*;
        let f = &self.m.assign;
        match tree {
            Id { pairs } => {
                let (fm, order) = self.formula(t);
                let back: BTreeMap<usize, usize> = pairs.iter().map(|&(s, t)| (t, s)).collect();
                let s_order = order.iter().map(|v| back[v]).collect();
                debug_assert!(pairs.iter().all(|&(s, tt)| f[s] == tt));
                (Primed::of(&fm), s_order, order)
            }
            Empty { .. } => unreachable!("weakenings are read by their parent"),
            Sum { left, right } => {
                // the target components covered by each side
                let (lt, rt) = self.sum_sides(t);
                let side = |x: &GeneratorTree, tt: &[usize]| -> Result<(Primed, Vec<usize>, Vec<usize>), (Formula, Vec<usize>)> {
                    match x {
                        Empty { .. } => Err(self.formula(tt)),
                        _ => Ok(self.read(x, tt)),
                    }
                };
                match (side(left, &lt), side(right, &rt)) {
                    (Ok((a, sa, ta)), Ok((b, sb, tb))) => (
                        Primed::And(Box::new(a), Box::new(b)),
                        [sa, sb].concat(),
                        [ta, tb].concat(),
                    ),
                    (Ok((a, sa, ta)), Err((b, tb))) => {
                        (Primed::KeepLeft(Box::new(a), b), sa, [ta, tb].concat())
                    }
                    (Err((a, ta)), Ok((b, sb, tb))) => {
                        (Primed::KeepRight(a, Box::new(b)), sb, [ta, tb].concat())
                    }
                    (Err(_), Err(_)) => unreachable!("an empty sum is one weakening"),
                }
            }
            Join { left, right } => {
                let Split::Join(l, r) = split(&self.m.target, t) else {
                    unreachable!()
                };
                let (rb, sb, tb) = self.read(right, &r);
                match &**left {
                    Empty { .. } => {
                        let (a, ta) = self.formula(&l);
                        (Primed::KeepHead(a, Box::new(rb)), sb, [ta, tb].concat())
                    }
                    _ => {
                        let (la, sa, ta) = self.read(left, &l);
                        (
                            Primed::Imp(Box::new(la), Box::new(rb)),
                            [sa, sb].concat(),
                            [ta, tb].concat(),
                        )
                    }
                }
            }
            Prefix {
                source,
                target,
                body,
            } => {
                let Split::Prefix(_, rest) = split(&self.m.target, t) else {
                    unreachable!()
                };
                let is_box = *self.m.target.label(*target) == Label::Box;
                match &**body {
                    Empty { .. } => {
                        let (a, ta) = self.formula(&rest);
                        (
                            Primed::Emptied(a),
                            vec![*source],
                            [vec![*target], ta].concat(),
                        )
                    }
                    _ => {
                        let (b, sb, tb) = self.read(body, &rest);
                        let p = if is_box {
                            Primed::Box(Box::new(b))
                        } else {
                            Primed::Dia(Box::new(b))
                        };
                        (
                            p,
                            [vec![*source], sb].concat(),
                            [vec![*target], tb].concat(),
                        )
                    }
                }
            }
            Pair { left, right } => {
                let (a, sa, ta) = self.read(left, t);
                let (b, sb, _) = self.read(right, t);
                (
                    Primed::Twice(Box::new(a), Box::new(b)),
                    [sa, sb].concat(),
                    ta,
                )
            }
        }
    }

    /// Target sets of the two sides of a sum node. Sums are left-nested, so
    /// the right side is the last component.
    fn sum_sides(&self, t: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let Split::Sum(comps) = split(&self.m.target, t) else {
            unreachable!("sum node over a sum")
        };
        let last = comps.last().expect("components").clone();
        let mut rest: Vec<usize> = comps[..comps.len() - 1].concat();
        rest.sort_unstable();
        (rest, last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn ar(s: &str) -> Arena {
        arena_of(&parse(s).unwrap())
    }

    fn map(src: &str, tgt: &str, pairs: &[(usize, usize)]) -> SkewMap {
        let (s, t) = (ar(src), ar(tgt));
        let mut assign = vec![0; s.len()];
        for &(a, b) in pairs {
            assign[s.index_of(a).unwrap()] = t.index_of(b).unwrap();
        }
        SkewMap::new(Some(s), t, assign)
    }

    #[test]
    fn identity_is_even_and_odd() {
        for f in [
            "a",
            "a /\\ b -> a",
            "box (a -> b) -> box a -> box b",
            "dia bot -> dia a",
        ] {
            let id = SkewMap::identity(&ar(f));
            assert_eq!(check_fibration(&id, Kind::Even), Ok(()));
            assert_eq!(check_fibration(&id, Kind::Odd), Ok(()));
        }
    }

    #[test]
    fn label_breaking_map_is_rejected() {
        let m = map("a -> b", "b -> b", &[(1, 1), (2, 2)]);
        assert_eq!(
            check_fibration(&m, Kind::Even).unwrap_err().clause,
            Clause::Label
        );
    }

    #[test]
    fn empty_map_is_only_odd() {
        let m = SkewMap::empty(ar("a"));
        assert_eq!(check_fibration(&m, Kind::Odd), Ok(()));
        assert_eq!(
            check_fibration(&m, Kind::Even).unwrap_err().clause,
            Clause::EmptySource
        );
    }

    #[test]
    fn contraction_collapse_composes() {
        // (a /\ a /\ a) -> b  onto (a /\ a) -> b onto a -> b
        let f = map(
            "((a /\\ a) /\\ a) -> b",
            "(a /\\ a) -> b",
            &[(3, 2), (4, 3), (5, 3), (6, 4)],
        );
        let g = map("(a /\\ a) -> b", "a -> b", &[(2, 1), (3, 1), (4, 2)]);
        assert_eq!(check_fibration(&f, Kind::Even), Ok(()));
        assert_eq!(check_fibration(&g, Kind::Even), Ok(()));
        let h = compose(&f, &g).unwrap();
        assert_eq!(check_fibration(&h, Kind::Even), Ok(()));
        assert_eq!(h.assign.iter().filter(|&&x| h.target.id(x) == 1).count(), 3);
        assert_eq!(
            compose(&SkewMap::identity(&f.source.clone().unwrap()), &f).unwrap(),
            f
        );
        assert_eq!(compose(&g, &f), Err(MapError::Mismatch));
    }

    #[test]
    fn collapsing_conjuncts_is_rejected() {
        // a /\ a as a conclusion cannot collapse
        let m = map("a -> a /\\ a", "a -> a", &[(1, 1), (3, 2), (4, 2)]);
        assert!(check_fibration(&m, Kind::Even).is_err());
    }

    #[test]
    fn modal_clause_blocks_missing_modalities() {
        // a -> a onto dia a -> a skips the diamond above the hypothesis
        let m = map("a -> a", "dia a -> a", &[(1, 2), (2, 3)]);
        assert_eq!(
            check_fibration(&m, Kind::Even).unwrap_err().clause,
            Clause::Modal
        );
    }

    fn seq(s: &str) -> Sequent {
        s.parse().unwrap()
    }

    #[test]
    fn derivation_maps() {
        // c on the hypothesis a /\ a
        let d = Derivation::deep(
            Rule::DeepC,
            seq("a |- b"),
            vec![0],
            Derivation::hyp(seq("a /\\ a |- b")),
        );
        let m = fibration_of_derivation(&d).unwrap();
        assert_eq!(check_fibration(&m, Kind::Even), Ok(()));
        assert_eq!(
            (m.image(2), m.image(3), m.image(4)),
            (Some(1), Some(1), Some(2))
        );
        // w tensor from a to a /\ b
        let d = Derivation::deep(
            Rule::DeepWTens,
            seq("a /\\ b |- c"),
            vec![0],
            Derivation::hyp(seq("a |- c")),
        );
        let m = fibration_of_derivation(&d).unwrap();
        assert_eq!(check_fibration(&m, Kind::Even), Ok(()));
        assert_eq!((m.image(1), m.image(2)), (Some(2), Some(4)));
        // empty derivation
        let d = Derivation::hyp(seq("a |- a"));
        let m = fibration_of_derivation(&d).unwrap();
        assert_eq!(m, SkewMap::identity(&m.target));
    }

    fn check_round_trip(d: &Derivation) -> FibrationDecomposition {
        let m = fibration_of_derivation(d).unwrap();
        assert_eq!(check_fibration(&m, Kind::Even), Ok(()));
        let out = decompose_fibration(&m).unwrap_or_else(|e| panic!("{e} for {d:?}"));
        assert!(out.tree.follows_grammar(Kind::Even));
        let g = m.to_graph();
        assert_eq!(out.tree.pairs(), {
            let mut p = g.assign.clone();
            p.sort();
            p
        });
        assert_eq!(check_derivation(&out.derivation, System::DownLj), Ok(()));
        let back = fibration_of_derivation(&out.derivation).unwrap();
        for (s, t) in g.assign {
            assert_eq!(back.image(out.source_ids[&s]), Some(out.target_ids[&t]));
        }
        out
    }

    #[test]
    fn decompose_identity_and_collapse() {
        let out = check_round_trip(&Derivation::hyp(seq("|- a -> a")));
        assert!(matches!(out.tree, GeneratorTree::Id { .. }));
        assert_eq!(out.derivation.rule, Rule::Hyp);
        let d = Derivation::deep(
            Rule::DeepC,
            seq("|- a -> b"),
            vec![0, 0],
            Derivation::hyp(seq("|- a /\\ a -> b")),
        );
        let out = check_round_trip(&d);
        assert_eq!(out.tree.count_pairs(), 1);
        assert_eq!(out.derivation.count(crate::sequent::Shape::DeepC), 1);
    }

    #[test]
    fn decompose_weakenings() {
        let d = Derivation::deep(
            Rule::DeepWLimp,
            seq("|- b -> a -> a"),
            vec![0],
            Derivation::hyp(seq("|- a -> a")),
        );
        assert_eq!(check_round_trip(&d).tree.count_empty(), 1);
        let d = Derivation::deep(
            Rule::DeepWDia,
            seq("|- box a -> dia c -> dia a"),
            vec![0, 1, 0],
            Derivation::hyp(seq("|- box a -> dia bot -> dia a")),
        );
        assert_eq!(check_round_trip(&d).tree.count_empty(), 1);
    }

    #[test]
    fn sample_fibration() {
        let f = parse("box((b -> b) -> a) -> dia c -> dia(a /\\ a)").unwrap();
        let s = Sequent::goal(f);
        let d = crate::sequent::prove(
            &s,
            System::full(crate::Logic::CK, true),
            crate::sequent::Bounds::for_sequent(&s),
        )
        .proof()
        .unwrap();
        let dec = crate::sequent::decompose(&d, crate::Logic::CK).unwrap();
        let out = check_round_trip(&dec.down);
        assert_eq!(out.tree.count_pairs(), 1);
        assert_eq!(out.tree.count_empty(), 1);
        assert_eq!(arena_of(&dec.down.top().formula()).len(), 11);
    }
}
