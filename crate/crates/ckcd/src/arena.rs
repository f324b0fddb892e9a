//! Modal arenas: two-coloured DAGs with implication edges (`⊸`) and modal
//! edges (`↝`), built from formulas or recognised from arbitrary graphs.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bits::Bits;
use crate::formula::{formula_tree, Formula, NodeKind, Polarity};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Atom(String),
    Box,
    Dia,
}

impl Label {
    pub fn is_modal(&self) -> bool {
        matches!(self, Label::Box | Label::Dia)
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, Label::Atom(_))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Atom(a) => f.write_str(a),
            Label::Box => f.write_str("box"),
            Label::Dia => f.write_str("dia"),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(match s.as_str() {
            "box" | "□" => Label::Box,
            "dia" | "◇" => Label::Dia,
            _ => Label::Atom(s),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphVertex {
    pub id: usize,
    pub label: Label,
}

/// A labelled two-coloured graph, not yet known to be an arena.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    pub vertices: Vec<GraphVertex>,
    pub iedges: Vec<(usize, usize)>,
    pub medges: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Empty,
    DuplicateVertex,
    UnknownVertex,
    SharedEdge,
    Cyclic,
    LShape,
    SigmaShape,
    ModalAxiom(u8),
    Labeling,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::Empty => f.write_str("empty"),
            ViolationKind::DuplicateVertex => f.write_str("duplicate-vertex"),
            ViolationKind::UnknownVertex => f.write_str("unknown-vertex"),
            ViolationKind::SharedEdge => f.write_str("shared-edge"),
            ViolationKind::Cyclic => f.write_str("cyclic"),
            ViolationKind::LShape => f.write_str("L-shape"),
            ViolationKind::SigmaShape => f.write_str("Σ-shape"),
            ViolationKind::ModalAxiom(i) => write!(f, "modal-axiom-{i}"),
            ViolationKind::Labeling => f.write_str("labeling"),
        }
    }
}

/// Why a graph is not a modal arena, with the vertex ids of a witness.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Error)]
#[error("{kind} at {witness:?}")]
pub struct Violation {
    pub kind: ViolationKind,
    pub witness: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ArenaError {
    #[error("not a modal arena: {0}")]
    Invalid(#[from] Violation),
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("meeting relation needs distinct vertices")]
    SameVertex,
}

/// A validated modal arena. Vertices are addressed by dense indices
/// `0..len()`, ordered by their external ids.
#[derive(Clone, Debug)]
pub struct Arena {
    ids: Vec<usize>,
    labels: Vec<Label>,
    index: HashMap<usize, usize>,
    isucc: Vec<Vec<usize>>,
    ipred: Vec<Vec<usize>>,
    msucc: Vec<Vec<usize>>,
    mpred: Vec<Vec<usize>>,
    iadj: Vec<Bits>,
    madj: Vec<Bits>,
    depth: Vec<usize>,
    reach: Vec<Bits>,
    cone: Vec<Bits>,
    pmv: Vec<usize>,
}

impl PartialEq for Arena {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
            && self.labels == other.labels
            && self.isucc == other.isucc
            && self.msucc == other.msucc
    }
}

impl Eq for Arena {}

/// Depth, parity, principal modal vertex and cone of one vertex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VertexInfo {
    pub depth: usize,
    pub parity: Polarity,
    pub principal_modal: usize,
    pub modal_cone: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Meeting {
    Conjunct,
    Disjunct,
}

impl Arena {
    /// Validate a graph and build the arena.
    pub fn from_graph(g: &Graph) -> Result<Arena, Violation> {
        let raw = RawArena::new(g)?;
        raw.validate()?;
        Ok(raw.finish())
    }

    /// Build without validation; for constructions that are arenas by design.
    pub(crate) fn from_graph_trusted(g: &Graph) -> Arena {
        let raw = RawArena::new(g).expect("trusted arena graph is well formed");
        debug_assert!(
            raw.validate().is_ok(),
            "trusted arena failed validation: {:?}",
            raw.validate()
        );
        raw.finish()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, v: usize) -> usize {
        self.ids[v]
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn label(&self, v: usize) -> &Label {
        &self.labels[v]
    }

    pub fn is_modal(&self, v: usize) -> bool {
        self.labels[v].is_modal()
    }

    pub fn is_atom(&self, v: usize) -> bool {
        self.labels[v].is_atom()
    }

    pub fn isucc(&self, v: usize) -> &[usize] {
        &self.isucc[v]
    }

    pub fn ipred(&self, v: usize) -> &[usize] {
        &self.ipred[v]
    }

    pub fn msucc(&self, v: usize) -> &[usize] {
        &self.msucc[v]
    }

    pub fn mpred(&self, v: usize) -> &[usize] {
        &self.mpred[v]
    }

    #[inline]
    pub fn iedge(&self, a: usize, b: usize) -> bool {
        self.iadj[a].contains(b)
    }

    #[inline]
    pub fn medge(&self, a: usize, b: usize) -> bool {
        self.madj[a].contains(b)
    }

    /// Reflexive-transitive `⊸*`.
    #[inline]
    pub fn reaches(&self, a: usize, b: usize) -> bool {
        self.reach[a].contains(b)
    }

    pub fn reach_set(&self, a: usize) -> &Bits {
        &self.reach[a]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn parity(&self, v: usize) -> Polarity {
        if self.depth[v] % 2 == 0 {
            Polarity::Out
        } else {
            Polarity::In
        }
    }

    pub fn is_even(&self, v: usize) -> bool {
        self.depth[v] % 2 == 0
    }

    pub fn is_odd(&self, v: usize) -> bool {
        self.depth[v] % 2 == 1
    }

    pub fn is_root(&self, v: usize) -> bool {
        self.isucc[v].is_empty()
    }

    /// No incoming modal edge.
    pub fn is_mroot(&self, v: usize) -> bool {
        self.mpred[v].is_empty()
    }

    pub fn roots(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.is_root(v)).collect()
    }

    pub fn cone(&self, v: usize) -> &Bits {
        &self.cone[v]
    }

    pub fn cone_vec(&self, v: usize) -> Vec<usize> {
        self.cone[v].iter().collect()
    }

    pub fn pmv(&self, v: usize) -> usize {
        self.pmv[v]
    }

    /// Enclosing modalities from the innermost outwards.
    pub fn address(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = v;
        loop {
            let m = self.pmv[cur];
            if m == cur {
                return out;
            }
            out.push(m);
            cur = m;
        }
    }

    pub fn iedges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.isucc
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
    }

    pub fn medges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.msucc
            .iter()
            .enumerate()
            .flat_map(|(a, s)| s.iter().map(move |&b| (a, b)))
    }

    /// The underlying graph with external ids.
    pub fn to_graph(&self) -> Graph {
        Graph {
            vertices: (0..self.len())
                .map(|v| GraphVertex {
                    id: self.ids[v],
                    label: self.labels[v].clone(),
                })
                .collect(),
            iedges: self
                .iedges()
                .map(|(a, b)| (self.ids[a], self.ids[b]))
                .collect(),
            medges: self
                .medges()
                .map(|(a, b)| (self.ids[a], self.ids[b]))
                .collect(),
        }
    }

    /// Minimum depth over minimal common `⊸*`-descendants, `-1` when none.
    pub fn meeting_depth(&self, u: usize, v: usize) -> i64 {
        let common = self.reach[u].and(&self.reach[v]);
        let mut below = Bits::new(self.len());
        for c in common.iter() {
            for &s in &self.isucc[c] {
                below.union_with(&self.reach[s]);
            }
        }
        self.min_depth_outside(&common, &below)
    }

    fn min_depth_outside(&self, common: &Bits, below: &Bits) -> i64 {
        common
            .iter()
            .filter(|&c| !below.contains(c))
            .map(|c| self.depth[c] as i64)
            .min()
            .unwrap_or(-1)
    }

    /// For every vertex, the set of vertices conjunct to it.
    pub fn conjunct_sets(&self) -> Vec<Bits> {
        let n = self.len();
        let strict: Vec<Bits> = (0..n)
            .map(|c| {
                let mut b = Bits::new(n);
                for &s in &self.isucc[c] {
                    b.union_with(&self.reach[s]);
                }
                b
            })
            .collect();
        let mut out = vec![Bits::new(n); n];
        for u in 0..n {
            for v in u + 1..n {
                let common = self.reach[u].and(&self.reach[v]);
                let mut below = Bits::new(n);
                for c in common.iter() {
                    below.union_with(&strict[c]);
                }
                if self.min_depth_outside(&common, &below).rem_euclid(2) == 1 {
                    out[u].insert(v);
                    out[v].insert(u);
                }
            }
        }
        out
    }

    pub fn meeting(&self, u: usize, v: usize) -> Meeting {
        if self.meeting_depth(u, v).rem_euclid(2) == 1 {
            Meeting::Conjunct
        } else {
            Meeting::Disjunct
        }
    }

    pub fn conjunct(&self, u: usize, v: usize) -> bool {
        u != v && self.meeting(u, v) == Meeting::Conjunct
    }

    pub fn disjunct(&self, u: usize, v: usize) -> bool {
        u != v && self.meeting(u, v) == Meeting::Disjunct
    }

    pub fn info(&self, v: usize) -> VertexInfo {
        VertexInfo {
            depth: self.depth[v],
            parity: self.parity(v),
            principal_modal: self.ids[self.pmv[v]],
            modal_cone: self.cone[v].iter().map(|w| self.ids[w]).collect(),
        }
    }
}

struct RawArena {
    ids: Vec<usize>,
    labels: Vec<Label>,
    index: HashMap<usize, usize>,
    isucc: Vec<Vec<usize>>,
    msucc: Vec<Vec<usize>>,
}

impl RawArena {
    fn new(g: &Graph) -> Result<RawArena, Violation> {
        let mut verts: Vec<&GraphVertex> = g.vertices.iter().collect();
        verts.sort_by_key(|v| v.id);
        for w in verts.windows(2) {
            if w[0].id == w[1].id {
                return Err(Violation {
                    kind: ViolationKind::DuplicateVertex,
                    witness: vec![w[0].id],
                });
            }
        }
        let ids: Vec<usize> = verts.iter().map(|v| v.id).collect();
        let labels: Vec<Label> = verts.iter().map(|v| v.label.clone()).collect();
        let index: HashMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let n = ids.len();
        let mut isucc = vec![Vec::new(); n];
        let mut msucc = vec![Vec::new(); n];
        let look = |id: usize| {
            index.get(&id).copied().ok_or(Violation {
                kind: ViolationKind::UnknownVertex,
                witness: vec![id],
            })
        };
        for &(a, b) in &g.iedges {
            isucc[look(a)?].push(look(b)?);
        }
        for &(a, b) in &g.medges {
            msucc[look(a)?].push(look(b)?);
        }
        for s in isucc.iter_mut().chain(msucc.iter_mut()) {
            s.sort_unstable();
            s.dedup();
        }
        Ok(RawArena {
            ids,
            labels,
            index,
            isucc,
            msucc,
        })
    }

    fn fail(&self, kind: ViolationKind, w: &[usize]) -> Violation {
        Violation {
            kind,
            witness: w.iter().map(|&v| self.ids[v]).collect(),
        }
    }

    fn validate(&self) -> Result<(), Violation> {
        let n = self.ids.len();
        if n == 0 {
            return Err(Violation {
                kind: ViolationKind::Empty,
                witness: vec![],
            });
        }
        let iadj = adjacency(n, &self.isucc);
        let madj = adjacency(n, &self.msucc);
        for a in 0..n {
            for &b in &self.isucc[a] {
                if madj[a].contains(b) {
                    return Err(self.fail(ViolationKind::SharedEdge, &[a, b]));
                }
            }
        }
        if let Some(cycle) = find_cycle(n, &self.isucc, &self.msucc) {
            return Err(self.fail(ViolationKind::Cyclic, &cycle));
        }
        // L-free: a ⊸ u, a ⊸ w ⊸ v  ⇒  u ⊸ v
        // (every two-step successor of `a` is a successor of each successor)
        for a in 0..n {
            let Some(&first) = self.isucc[a].first() else {
                continue;
            };
            let mut below = Bits::new(n);
            let mut common = iadj[first].clone();
            for &w in &self.isucc[a] {
                below.union_with(&iadj[w]);
                common = common.and(&iadj[w]);
            }
            if let Some(v) = below.minus(&common).first() {
                let w = *self.isucc[a]
                    .iter()
                    .find(|&&w| iadj[w].contains(v))
                    .unwrap();
                let u = *self.isucc[a]
                    .iter()
                    .find(|&&u| !iadj[u].contains(v))
                    .unwrap();
                return Err(self.fail(ViolationKind::LShape, &[a, u, w, v]));
            }
        }
        // Σ-free: a ⊸ v, a ⊸ w, b ⊸ w, b ⊸ u  ⇒  a ⊸ u or b ⊸ v, that is,
        // two vertices with a common successor have nested successor sets
        for a in 0..n {
            for b in a + 1..n {
                let Some(w) = iadj[a].and(&iadj[b]).first() else {
                    continue;
                };
                if let (Some(v), Some(u)) = (
                    iadj[a].minus(&iadj[b]).first(),
                    iadj[b].minus(&iadj[a]).first(),
                ) {
                    return Err(self.fail(ViolationKind::SigmaShape, &[a, v, w, b, u]));
                }
            }
        }
        let ipred = invert(n, &self.isucc);
        let mpred = invert(n, &self.msucc);
        for v in 0..n {
            for &w in &self.msucc[v] {
                for &u in &self.msucc[w] {
                    if !madj[v].contains(u) {
                        return Err(self.fail(ViolationKind::ModalAxiom(1), &[v, w, u]));
                    }
                }
            }
        }
        for w in 0..n {
            for &v in &mpred[w] {
                for &u in &mpred[w] {
                    if u < v && !madj[u].contains(v) && !madj[v].contains(u) {
                        return Err(self.fail(ViolationKind::ModalAxiom(2), &[v, u, w]));
                    }
                }
            }
        }
        for v in 0..n {
            for &w in &self.msucc[v] {
                for &u in &self.msucc[v] {
                    if iadj[u].contains(w) {
                        return Err(self.fail(ViolationKind::ModalAxiom(3), &[v, w, u]));
                    }
                }
            }
        }
        for v in 0..n {
            for &w in &self.msucc[v] {
                for &u in &ipred[v] {
                    if !iadj[u].contains(w) {
                        return Err(self.fail(ViolationKind::ModalAxiom(4), &[v, w, u]));
                    }
                }
                for &u in &self.isucc[v] {
                    if !iadj[w].contains(u) {
                        return Err(self.fail(ViolationKind::ModalAxiom(5), &[v, w, u]));
                    }
                }
                for &u in &self.isucc[w] {
                    if !iadj[v].contains(u) {
                        return Err(self.fail(ViolationKind::ModalAxiom(6), &[v, w, u]));
                    }
                }
            }
        }
        for v in 0..n {
            if !self.msucc[v].is_empty() && !self.labels[v].is_modal() {
                return Err(self.fail(ViolationKind::Labeling, &[v]));
            }
            if self.labels[v] == Label::Box && self.msucc[v].is_empty() {
                return Err(self.fail(ViolationKind::Labeling, &[v]));
            }
        }
        Ok(())
    }

    fn finish(self) -> Arena {
        let n = self.ids.len();
        let ipred = invert(n, &self.isucc);
        let mpred = invert(n, &self.msucc);
        let iadj = adjacency(n, &self.isucc);
        let madj = adjacency(n, &self.msucc);
        let order = topo_order(n, &self.isucc);
        let mut depth = vec![0usize; n];
        let mut reach: Vec<Bits> = (0..n).map(|_| Bits::new(n)).collect();
        // successors come later in `order`, so sweep backwards
        for &v in order.iter().rev() {
            let mut r = Bits::new(n);
            r.insert(v);
            let mut d = 0;
            for &s in &self.isucc[v] {
                r.union_with(&reach[s]);
                d = d.max(depth[s] + 1);
            }
            reach[v] = r;
            depth[v] = d;
        }
        let mut cone: Vec<Bits> = (0..n).map(|_| Bits::new(n)).collect();
        for v in 0..n {
            if self.msucc[v].is_empty() {
                continue;
            }
            for w in 0..n {
                if !reach[w].contains(v) && reach[w].intersects(&madj[v]) {
                    cone[v].insert(w);
                }
            }
        }
        let mut pmv: Vec<usize> = (0..n).collect();
        for v in 0..n {
            let holders: Vec<usize> = (0..n).filter(|&m| cone[m].contains(v)).collect();
            if let Some(&m) = holders
                .iter()
                .find(|&&m| holders.iter().all(|&m2| m2 == m || cone[m2].contains(m)))
            {
                pmv[v] = m;
            }
        }
        Arena {
            ids: self.ids,
            labels: self.labels,
            index: self.index,
            isucc: self.isucc,
            ipred,
            msucc: self.msucc,
            mpred,
            iadj,
            madj,
            depth,
            reach,
            cone,
            pmv,
        }
    }
}

fn adjacency(n: usize, succ: &[Vec<usize>]) -> Vec<Bits> {
    succ.iter()
        .map(|s| {
            let mut b = Bits::new(n);
            for &x in s {
                b.insert(x);
            }
            b
        })
        .collect()
}

fn invert(n: usize, succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); n];
    for (a, s) in succ.iter().enumerate() {
        for &b in s {
            pred[b].push(a);
        }
    }
    pred
}

fn topo_order(n: usize, succ: &[Vec<usize>]) -> Vec<usize> {
    let mut indeg = vec![0usize; n];
    for s in succ {
        for &b in s {
            indeg[b] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = stack.pop() {
        order.push(v);
        for &b in &succ[v] {
            indeg[b] -= 1;
            if indeg[b] == 0 {
                stack.push(b);
            }
        }
    }
    order
}

fn find_cycle(n: usize, a: &[Vec<usize>], b: &[Vec<usize>]) -> Option<Vec<usize>> {
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; n];
    let mut path = Vec::new();
    fn dfs(
        v: usize,
        a: &[Vec<usize>],
        b: &[Vec<usize>],
        state: &mut [u8],
        path: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        state[v] = 1;
        path.push(v);
        for &w in a[v].iter().chain(b[v].iter()) {
            if state[w] == 1 {
                let start = path.iter().position(|&x| x == w).unwrap();
                return Some(path[start..].to_vec());
            }
            if state[w] == 0 {
                if let Some(c) = dfs(w, a, b, state, path) {
                    return Some(c);
                }
            }
        }
        path.pop();
        state[v] = 2;
        None
    }
    for v in 0..n {
        if state[v] == 0 {
            if let Some(c) = dfs(v, a, b, &mut state, &mut path) {
                return Some(c);
            }
        }
    }
    None
}

/// The arena of a formula; vertex ids are formula-tree preorder indices.
pub fn arena_of(f: &Formula) -> Arena {
    Arena::from_graph_trusted(&graph_of(f))
}

pub fn graph_of(f: &Formula) -> Graph {
    let tree = formula_tree(f);
    let mut g = Graph::default();
    for (id, node) in tree.nodes.iter().enumerate() {
        let label = match &node.kind {
            NodeKind::Atom(a) => Label::Atom(a.clone()),
            NodeKind::Box => Label::Box,
            NodeKind::Dia => Label::Dia,
            _ => continue,
        };
        g.vertices.push(GraphVertex { id, label });
    }
    for (id, node) in tree.nodes.iter().enumerate() {
        match node.kind {
            NodeKind::Imp => {
                let left = tree.rightmost(node.children[0]);
                let right = tree.rightmost(node.children[1]);
                for &a in &left {
                    for &b in &right {
                        g.iedges.push((a, b));
                    }
                }
            }
            NodeKind::Box | NodeKind::Dia => {
                for b in tree.rightmost(node.children[0]) {
                    g.medges.push((id, b));
                }
            }
            _ => {}
        }
    }
    g
}

pub fn is_modal_arena(g: &Graph) -> Result<(), Violation> {
    let raw = RawArena::new(g)?;
    raw.validate()
}

pub fn vertex_info(a: &Arena) -> BTreeMap<usize, VertexInfo> {
    (0..a.len()).map(|v| (a.id(v), a.info(v))).collect()
}

/// Classify two distinct vertices (by external id).
pub fn meeting_relation(a: &Arena, u: usize, v: usize) -> Result<Meeting, ArenaError> {
    let iu = a.index_of(u).ok_or(ArenaError::UnknownVertex(u))?;
    let iv = a.index_of(v).ok_or(ArenaError::UnknownVertex(v))?;
    if iu == iv {
        return Err(ArenaError::SameVertex);
    }
    Ok(a.meeting(iu, iv))
}

/// Reconstruct a formula whose arena equals `a` up to renaming.
pub fn formula_of(a: &Arena) -> Formula {
    let all: Vec<usize> = (0..a.len()).collect();
    build_formula(a, &all)
}

fn restricted_reach(a: &Arena, set: &[usize]) -> HashMap<usize, Bits> {
    let n = a.len();
    let mut inside = Bits::new(n);
    for &v in set {
        inside.insert(v);
    }
    let mut memo: HashMap<usize, Bits> = HashMap::new();
    fn go(a: &Arena, v: usize, inside: &Bits, memo: &mut HashMap<usize, Bits>) -> Bits {
        if let Some(r) = memo.get(&v) {
            return r.clone();
        }
        let mut r = Bits::new(a.len());
        r.insert(v);
        for &s in a.isucc(v) {
            if inside.contains(s) {
                r.union_with(&go(a, s, inside, memo));
            }
        }
        memo.insert(v, r.clone());
        r
    }
    for &v in set {
        go(a, v, &inside, &mut memo);
    }
    memo
}

fn build_formula(a: &Arena, set: &[usize]) -> Formula {
    if set.len() == 1 {
        let v = set[0];
        return match a.label(v) {
            Label::Atom(x) => Formula::Atom(x.clone()),
            Label::Dia => Formula::DiaBot,
            Label::Box => panic!("formula_of: box vertex without body"),
        };
    }
    let comps = components(a, set);
    if comps.len() > 1 {
        let mut parts = comps.into_iter().map(|c| build_formula(a, &c));
        let first = parts.next().unwrap();
        return parts.fold(first, Formula::and);
    }
    let reach = restricted_reach(a, set);
    let in_set = |v: usize| set.contains(&v);
    let roots: Vec<usize> = set
        .iter()
        .copied()
        .filter(|&v| !a.isucc(v).iter().any(|&s| in_set(s)))
        .collect();
    for &m in &roots {
        if !a.is_modal(m) {
            continue;
        }
        let targets: Vec<usize> = a.msucc(m).iter().copied().filter(|&u| in_set(u)).collect();
        let prefix = set.iter().all(|&w| {
            w == m || (!reach[&w].contains(m) && targets.iter().any(|&u| reach[&w].contains(u)))
        });
        if prefix {
            let rest: Vec<usize> = set.iter().copied().filter(|&w| w != m).collect();
            let body = build_formula(a, &rest);
            return match a.label(m) {
                Label::Box => Formula::boxed(body),
                _ => Formula::dia(body),
            };
        }
    }
    let hyps: Vec<usize> = set
        .iter()
        .copied()
        .filter(|&x| !roots.contains(&x) && roots.iter().all(|&r| a.iedge(x, r)))
        .collect();
    assert!(
        !hyps.is_empty(),
        "formula_of: connected part is neither a prefix nor an implication"
    );
    let left: Vec<usize> = set
        .iter()
        .copied()
        .filter(|&y| hyps.iter().any(|&h| reach[&y].contains(h)))
        .collect();
    let right: Vec<usize> = set.iter().copied().filter(|y| !left.contains(y)).collect();
    Formula::implies(build_formula(a, &left), build_formula(a, &right))
}

/// Connected components of the induced subgraph (both colours, undirected),
/// ordered by smallest vertex.
fn components(a: &Arena, set: &[usize]) -> Vec<Vec<usize>> {
    let mut seen: HashMap<usize, bool> = set.iter().map(|&v| (v, false)).collect();
    let mut out = Vec::new();
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    for &s in &sorted {
        if seen[&s] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![s];
        seen.insert(s, true);
        while let Some(v) = stack.pop() {
            comp.push(v);
            let nbrs = a
                .isucc(v)
                .iter()
                .chain(a.ipred(v))
                .chain(a.msucc(v))
                .chain(a.mpred(v));
            for &w in nbrs {
                if let Some(false) = seen.get(&w) {
                    seen.insert(w, true);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}
