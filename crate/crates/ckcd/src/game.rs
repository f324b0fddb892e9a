//! Views and winning innocent strategies on modal arenas, their frames, and
//! the passage between strategies and combinatorial proofs.
//!
//! Views are sequences of vertex ids. On the arena of a formula these are
//! formula-tree preorder indices.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{arena_of, Arena, Label};
use crate::formula::{formula_tree, parse, Formula, FormulaTree, NodeKind, ParseError};
use crate::icp::{check_icp, CombinatorialProof};
use crate::net::{linking_graph, EdgeKind, PartitionedArena};
use crate::par::{self, Mode};
use crate::skew::SkewMap;
use crate::Logic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    UnknownVertex,
    Modal,
    Alternating,
    Play,
    Uniform,
    Shortsighted,
    Justified,
    PrefixClosed,
    OComplete,
    Deterministic,
    DiaComplete,
    WellFramed,
    Linked,
    Atomic,
    BoxFrame,
    CkDiaFrame,
    CdDiaFrame,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::UnknownVertex => "unknown vertex",
            Clause::Modal => "modal",
            Clause::Alternating => "alternating",
            Clause::Play => "play",
            Clause::Uniform => "bullet-uniform",
            Clause::Shortsighted => "circ-shortsighted",
            Clause::Justified => "justified",
            Clause::PrefixClosed => "prefix-closed",
            Clause::OComplete => "circ-complete",
            Clause::Deterministic => "deterministic and total",
            Clause::DiaComplete => "dia-complete",
            Clause::WellFramed => "well-framed",
            Clause::Linked => "linked",
            Clause::Atomic => "atomic",
            Clause::BoxFrame => "box frame (1)",
            Clause::CkDiaFrame => "CK diamond frame (2)",
            Clause::CdDiaFrame => "CD diamond frame (3)",
        })
    }
}

/// A rejected view or strategy: the clause, the offending view and witness
/// vertex ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Error)]
#[error("{clause} at view {view:?}, witness {witness:?}")]
pub struct GameFailure {
    pub clause: Clause,
    pub view: Vec<usize>,
    pub witness: Vec<usize>,
}

fn failure(clause: Clause, view: &[usize], witness: Vec<usize>) -> GameFailure {
    GameFailure {
        clause,
        view: view.to_vec(),
        witness,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("construction: {0}")]
    Construction(String),
}

/// Check the view clauses position by position. At each position the local
/// clauses (modal, alternation, play, uniformity) come before the pointer
/// clauses.
pub fn is_view(a: &Arena, seq: &[usize]) -> Result<(), GameFailure> {
    let fail = |clause, i: usize| Err(failure(clause, seq, vec![seq[i]]));
    let mut idx: Vec<usize> = Vec::with_capacity(seq.len());
    for (i, &id) in seq.iter().enumerate() {
        let Some(v) = a.index_of(id) else {
            return fail(Clause::UnknownVertex, i);
        };
        if !(a.is_atom(v) || *a.label(v) == Label::Dia) {
            return fail(Clause::Modal, i);
        }
        if a.is_even(v) != (i % 2 == 0) {
            return fail(Clause::Alternating, i);
        }
        if i == 0 {
            if !a.is_root(v) {
                return fail(Clause::Play, i);
            }
        } else {
            let prev = idx[i - 1];
            if i % 2 == 1 && a.label(v) != a.label(prev) {
                return fail(Clause::Uniform, i);
            }
            if i % 2 == 0 && !a.iedge(v, prev) {
                return fail(Clause::Shortsighted, i);
            }
            if !idx.iter().any(|&u| a.iedge(v, u)) {
                return fail(Clause::Justified, i);
            }
        }
        idx.push(v);
    }
    Ok(())
}

/// A set of views, always holding the empty view.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strategy {
    views: BTreeSet<Vec<usize>>,
}

impl Default for Strategy {
    fn default() -> Strategy {
        Strategy::new(Vec::new())
    }
}

impl Strategy {
    /// Exactly the given views (plus the empty one); no closure is applied.
    pub fn new(views: impl IntoIterator<Item = Vec<usize>>) -> Strategy {
        let mut views: BTreeSet<Vec<usize>> = views.into_iter().collect();
        views.insert(Vec::new());
        Strategy { views }
    }

    /// The prefix closure of `views`.
    pub fn from_maximal(views: impl IntoIterator<Item = Vec<usize>>) -> Strategy {
        let mut out = BTreeSet::new();
        for v in views {
            for k in 0..=v.len() {
                out.insert(v[..k].to_vec());
            }
        }
        out.insert(Vec::new());
        Strategy { views: out }
    }

    pub fn views(&self) -> impl Iterator<Item = &Vec<usize>> + '_ {
        self.views.iter()
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    /// Only the empty view.
    pub fn is_trivial(&self) -> bool {
        self.views.len() == 1
    }

    pub fn contains(&self, p: &[usize]) -> bool {
        self.views.contains(p)
    }

    /// Moves `x` with `p·x` in the strategy.
    pub fn successors(&self, p: &[usize]) -> Vec<usize> {
        self.views
            .range(p.to_vec()..)
            .take_while(|v| v.starts_with(p))
            .filter(|v| v.len() == p.len() + 1)
            .map(|v| v[p.len()])
            .collect()
    }

    pub fn maximal(&self) -> Vec<Vec<usize>> {
        let inner: HashSet<&[usize]> = self
            .views
            .iter()
            .filter(|v| !v.is_empty())
            .map(|v| &v[..v.len() - 1])
            .collect();
        self.views
            .iter()
            .filter(|v| !v.is_empty() && !inner.contains(v.as_slice()))
            .cloned()
            .collect()
    }

    pub fn is_atomic(&self, a: &Arena) -> bool {
        self.views
            .iter()
            .flatten()
            .all(|&id| a.index_of(id).is_some_and(|v| a.is_atom(v)))
    }

    pub fn to_file(&self, f: &Formula) -> StrategyFile {
        StrategyFile {
            arena: f.to_string(),
            maximal_views: self.maximal(),
        }
    }
}

/// Strategy JSON: the formula and the maximal views.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyFile {
    pub arena: String,
    pub maximal_views: Vec<Vec<usize>>,
}

impl StrategyFile {
    pub fn formula(&self) -> Result<Formula, ParseError> {
        parse(&self.arena)
    }

    pub fn strategy(&self) -> Strategy {
        Strategy::from_maximal(self.maximal_views.iter().cloned())
    }
}

/// Moves of the strategy together with the modalities in their addresses.
pub fn involved(a: &Arena, s: &Strategy) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &id in s.views().flatten() {
        out.insert(id);
        if let Some(v) = a.index_of(id) {
            out.extend(a.address(v).into_iter().map(|m| a.id(m)));
        }
    }
    out
}

/// Check the strategy clauses: every member is a view, prefix-closed,
/// complete on atomic `∘`-moves, deterministic and total, `◇`-complete.
pub fn check_wis(a: &Arena, s: &Strategy) -> Result<(), GameFailure> {
    check_wis_with(Mode::best(), a, s)
}

pub fn check_wis_with(mode: Mode, a: &Arena, s: &Strategy) -> Result<(), GameFailure> {
    let views: Vec<&Vec<usize>> = s.views().collect();
    if let Some(e) = par::find_first(mode, &views, |p| is_view(a, p).err()) {
        return Err(e);
    }
    for p in &views {
        if let Some((&last, init)) = p.split_last() {
            if !s.contains(init) {
                return Err(failure(Clause::PrefixClosed, p, vec![last]));
            }
        }
    }
    for p in &views {
        if p.len() % 2 == 0 {
            let candidates: Vec<usize> = match p.last() {
                None => a.roots(),
                Some(&last) => a.ipred(a.index_of(last).expect("checked")).to_vec(),
            };
            let mut ext = p.to_vec();
            ext.push(0);
            for x in candidates {
                if !a.is_atom(x) {
                    continue;
                }
                *ext.last_mut().expect("pushed") = a.id(x);
                if is_view(a, &ext).is_ok() && !s.contains(&ext) {
                    return Err(failure(Clause::OComplete, p, vec![a.id(x)]));
                }
            }
        } else {
            let succ = s.successors(p);
            if succ.len() != 1 {
                return Err(failure(Clause::Deterministic, p, succ));
            }
        }
    }
    let inv = involved(a, s);
    for p in &views {
        for &id in p.iter() {
            let v = a.index_of(id).expect("checked");
            if *a.label(v) != Label::Dia || !a.is_even(v) {
                continue;
            }
            if a.msucc(v).is_empty() {
                return Err(failure(Clause::DiaComplete, p, vec![id]));
            }
            if let Some(&w) = a.msucc(v).iter().find(|&&w| !inv.contains(&a.id(w))) {
                return Err(failure(Clause::DiaComplete, p, vec![id, a.id(w)]));
            }
        }
    }
    Ok(())
}

/// The framed view: column `i` holds the move at row 0 and its address
/// aligned so that the outermost modality sits in the top row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FramedView {
    pub moves: Vec<usize>,
    pub height: usize,
    /// `columns[i][h]`, `None` for the empty entry.
    pub columns: Vec<Vec<Option<usize>>>,
    /// The copy behind each entry, aligned with `columns`.
    #[serde(skip)]
    copies: Vec<Vec<Option<Cell>>>,
}

/// A copy of a vertex as seen from a view: its parity, the context that
/// opens it and its id. A move is its own copy; a modality in an address
/// is shared by every column that reaches the same copy.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Cell {
    even: bool,
    ctx: Vec<usize>,
    id: usize,
}

impl FramedView {
    /// Fails with `WellFramed` when a `∘`-move and its answer have addresses
    /// of different lengths.
    pub fn of(a: &Arena, p: &[usize]) -> Result<FramedView, GameFailure> {
        let mut addrs = Vec::with_capacity(p.len());
        for &id in p {
            let v = a
                .index_of(id)
                .ok_or_else(|| failure(Clause::UnknownVertex, p, vec![id]))?;
            addrs.push(
                a.address(v)
                    .into_iter()
                    .map(|m| a.id(m))
                    .collect::<Vec<usize>>(),
            );
        }
        for i in (0..p.len().saturating_sub(1)).step_by(2) {
            if addrs[i].len() != addrs[i + 1].len() {
                return Err(failure(Clause::WellFramed, p, vec![p[i], p[i + 1]]));
            }
        }
        let height = addrs.iter().map(Vec::len).max().unwrap_or(0);
        let columns: Vec<Vec<Option<usize>>> = p
            .iter()
            .zip(&addrs)
            .map(|(&m, add)| {
                let mut col = vec![None; height + 1];
                col[0] = Some(m);
                let base = height + 1 - add.len();
                for (k, &x) in add.iter().enumerate() {
                    col[base + k] = Some(x);
                }
                col
            })
            .collect();
        let depth = |id: usize| a.depth(a.index_of(id).expect("known"));
        let copies = columns
            .iter()
            .enumerate()
            .map(|(i, col)| {
                col.iter()
                    .map(|e| {
                        e.map(|x| {
                            let (even, ctx) = copy_context(a, p, i, depth(p[i]) - depth(x));
                            Cell { even, ctx, id: x }
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(FramedView {
            moves: p.to_vec(),
            height,
            columns,
            copies,
        })
    }

    pub fn get(&self, h: usize, i: usize) -> Option<usize> {
        self.columns
            .get(i)
            .and_then(|c| c.get(h).copied().flatten())
    }

    /// Generating pairs of `≈`: same row, columns `2k` and `2k+1`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in (0..self.moves.len().saturating_sub(1)).step_by(2) {
            for h in 0..=self.height {
                if let (Some(u), Some(w)) = (self.get(h, i), self.get(h, i + 1)) {
                    out.push((u, w));
                }
            }
        }
        out
    }

    /// Every vertex in the matrix.
    pub fn entries(&self) -> BTreeSet<usize> {
        self.columns.iter().flatten().flatten().copied().collect()
    }

    fn cell(&self, h: usize, i: usize) -> Option<&Cell> {
        self.copies
            .get(i)
            .and_then(|c| c.get(h))
            .and_then(Option::as_ref)
    }

    fn cells(&self) -> Vec<((usize, usize), &Cell)> {
        let mut out = Vec::new();
        for i in 0..self.moves.len() {
            for h in 0..=self.height {
                if let Some(c) = self.cell(h, i) {
                    out.push(((h, i), c));
                }
            }
        }
        out
    }

    fn closure(&self) -> Dsu<&Cell> {
        let keys: Vec<&Cell> = self
            .cells()
            .into_iter()
            .map(|(_, c)| c)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut dsu = Dsu::new(&keys);
        for i in (0..self.moves.len().saturating_sub(1)).step_by(2) {
            for h in 0..=self.height {
                if let (Some(u), Some(w)) = (self.cell(h, i), self.cell(h, i + 1)) {
                    dsu.union(u, w);
                }
            }
        }
        dsu
    }

    fn copy_classes(&self) -> Vec<Vec<&Cell>> {
        self.closure().classes()
    }

    /// The even member of the class of `m` as it appears in column `i`.
    fn frame_of(&self, i: usize, m: usize) -> Option<&Cell> {
        let at = (0..=self.height).find(|&h| self.get(h, i) == Some(m))?;
        let dsu = self.closure();
        let r = dsu.find(self.cell(at, i)?);
        self.cells()
            .into_iter()
            .map(|(_, c)| c)
            .find(|c| c.even && dsu.find(c) == r)
    }

    /// The classes of `≈`, each a sorted list of vertex ids.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .copy_classes()
            .into_iter()
            .map(|c| {
                let mut ids: Vec<usize> = c.into_iter().map(|k| k.id).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        out.sort();
        out
    }

    /// Whether related entries have related addresses, entry by entry.
    pub fn is_functorial(&self) -> bool {
        let dsu = self.closure();
        let mut pos: BTreeMap<&Cell, (usize, usize)> = BTreeMap::new();
        for (at, c) in self.cells() {
            pos.entry(c).or_insert(at);
        }
        let above = |(h, i): (usize, usize)| {
            (h + 1..=self.height)
                .map(|r| self.cell(r, i))
                .collect::<Vec<_>>()
        };
        pos.iter().all(|(u, &pu)| {
            pos.iter().all(|(w, &pw)| {
                if u == w || dsu.find(*u) != dsu.find(*w) {
                    return true;
                }
                let (au, aw) = (above(pu), above(pw));
                au.len() == aw.len()
                    && au.iter().zip(&aw).all(|(x, y)| match (x, y) {
                        (Some(x), Some(y)) => dsu.find(*x) == dsu.find(*y),
                        (None, None) => true,
                        _ => false,
                    })
            })
        })
    }
}

/// Union-find over a fixed set of keys.
struct Dsu<K = usize> {
    index: HashMap<K, usize>,
    keys: Vec<K>,
    parent: Vec<usize>,
}

impl<K: Copy + Eq + std::hash::Hash + Ord> Dsu<K> {
    fn new(keys: &[K]) -> Dsu<K> {
        Dsu {
            index: keys.iter().enumerate().map(|(i, &x)| (x, i)).collect(),
            keys: keys.to_vec(),
            parent: (0..keys.len()).collect(),
        }
    }

    fn root(&self, mut i: usize) -> usize {
        while self.parent[i] != i {
            i = self.parent[i];
        }
        i
    }

    fn find(&self, x: K) -> usize {
        self.root(self.index[&x])
    }

    fn union(&mut self, x: K, y: K) {
        let (a, b) = (self.find(x), self.find(y));
        if a != b {
            self.parent[a.max(b)] = a.min(b);
        }
    }

    fn classes(&self) -> Vec<Vec<K>> {
        let mut by: BTreeMap<usize, Vec<K>> = BTreeMap::new();
        for (i, &x) in self.keys.iter().enumerate() {
            by.entry(self.root(i)).or_default().push(x);
        }
        let mut out: Vec<Vec<K>> = by.into_values().collect();
        for c in &mut out {
            c.sort_unstable();
        }
        out.sort();
        out
    }
}

/// Where a copy of the vertex framed at column `j` of `view` lives: the
/// view before the move that opens it, after `crossings` hypothesis
/// boundaries upwards from the move at `j`. `true` for a positive copy.
fn copy_context(a: &Arena, view: &[usize], j: usize, crossings: usize) -> (bool, Vec<usize>) {
    let (mut pos, mut ctx) = if j % 2 == 0 {
        (true, view[..j].to_vec())
    } else {
        (false, view[..=j].to_vec())
    };
    for _ in 0..crossings {
        if !pos {
            ctx.truncate(justifier(a, &ctx).unwrap_or(0));
        }
        pos = !pos;
    }
    (pos, ctx)
}

/// The latest earlier move justifying the last move of a view.
fn justifier(a: &Arena, view: &[usize]) -> Option<usize> {
    let m = view.len().checked_sub(1)?;
    let idx = |id: usize| a.index_of(id).expect("vertex of the arena");
    let y = idx(view[m]);
    (0..m).rev().find(|&j| a.iedge(y, idx(view[j])))
}

/// A copy of an even vertex: the context that opens it and its id.
pub type FrameCopy = (Vec<usize>, usize);

/// The link relation `v ⊳ w` (odd `v` framed with even `w` in some view),
/// kept apart for each copy of `w`, or the first view that is not
/// well-framed or not linked. Copies of a hypothesis used in two contexts
/// are framed independently.
pub fn link_relation(
    a: &Arena,
    s: &Strategy,
) -> Result<BTreeMap<FrameCopy, BTreeSet<usize>>, GameFailure> {
    let mut links: BTreeMap<FrameCopy, BTreeSet<usize>> = BTreeMap::new();
    for p in s.views() {
        let fv = FramedView::of(a, p)?;
        for class in fv.copy_classes() {
            let evens: Vec<&Cell> = class.iter().copied().filter(|c| c.even).collect();
            if evens.len() != 1 {
                let mut ids: Vec<usize> = class.iter().map(|c| c.id).collect();
                ids.sort_unstable();
                return Err(failure(Clause::Linked, p, ids));
            }
            let w = evens[0];
            links
                .entry((w.ctx.clone(), w.id))
                .or_default()
                .extend(class.iter().filter(|c| !c.even).map(|c| c.id));
        }
    }
    Ok(links)
}

/// Check that a WIS is `logic`-framed: well-framed, linked, the modal frame
/// conditions on every even modality involved, and atomic for CD.
pub fn check_framed(a: &Arena, s: &Strategy, logic: Logic) -> Result<(), GameFailure> {
    let links = link_relation(a, s)?;
    if logic == Logic::CD {
        if let Some(p) = s.views().find(|p| {
            p.iter()
                .any(|&id| !a.is_atom(a.index_of(id).expect("known")))
        }) {
            let id = *p
                .iter()
                .find(|&&id| !a.is_atom(a.index_of(id).expect("known")))
                .expect("found");
            return Err(failure(Clause::Atomic, p, vec![id]));
        }
    }
    let label = |x: usize| a.label(a.index_of(x).expect("known")).clone();
    for ((ctx, w), linked) in &links {
        match label(*w) {
            Label::Box => {
                if let Some(&x) = linked.iter().find(|&&x| label(x) != Label::Box) {
                    return Err(failure(Clause::BoxFrame, ctx, vec![*w, x]));
                }
            }
            Label::Dia => {
                let dias: Vec<usize> = linked
                    .iter()
                    .copied()
                    .filter(|&x| label(x) == Label::Dia)
                    .collect();
                let (ok, clause) = match logic {
                    Logic::CK => (dias.len() == 1, Clause::CkDiaFrame),
                    Logic::CD => (dias.len() <= 1, Clause::CdDiaFrame),
                };
                if !ok {
                    return Err(failure(clause, ctx, [vec![*w], dias].concat()));
                }
            }
            Label::Atom(_) => {}
        }
    }
    Ok(())
}

/// The pre-view of a well-framed view: the path in the frame matrix that
/// climbs from each `•`-move to the row where it meets the next `∘`-move.
/// Rows are related through the strategy-wide closure of `≈`.
pub fn pre_view(a: &Arena, s: &Strategy, p: &[usize]) -> Result<Vec<usize>, GameFailure> {
    let fv = FramedView::of(a, p)?;
    let entries: Vec<usize> = involved(a, s)
        .into_iter()
        .chain(fv.entries())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut dsu = Dsu::new(&entries);
    for q in s.views() {
        for (u, w) in FramedView::of(a, q)?.pairs() {
            dsu.union(u, w);
        }
    }
    for (u, w) in fv.pairs() {
        dsu.union(u, w);
    }
    let rel = |x: Option<usize>, y: Option<usize>| matches!((x, y), (Some(x), Some(y)) if dsu.find(x) == dsu.find(y));
    let mut out = Vec::new();
    let mut push = |x: Option<usize>| out.extend(x);
    if p.is_empty() {
        return Ok(Vec::new());
    }
    for h in (0..=fv.height).rev() {
        push(fv.get(h, 0));
    }
    let n = p.len() - 1;
    let mut i = 1;
    while 2 * i <= n {
        let (o, e) = (2 * i - 1, 2 * i);
        let addr_rel = (1..=fv.height).all(|h| {
            let (x, y) = (fv.get(h, o), fv.get(h, e));
            x.is_none() && y.is_none() || rel(x, y)
        });
        let hi = if addr_rel {
            0
        } else {
            (0..=fv.height)
                .filter(|&h| rel(fv.get(h, o), fv.get(h, e)))
                .max()
                .unwrap_or(0)
        };
        for h in 0..=hi {
            push(fv.get(h, o));
        }
        for h in (0..=hi).rev() {
            push(fv.get(h, e));
        }
        i += 1;
    }
    if n % 2 == 1 {
        for h in 0..=fv.height {
            push(fv.get(h, n));
        }
    }
    Ok(out)
}

/// The strategy of a combinatorial proof: images of the abstract views,
/// which are read off the reverse checked paths of the linking graph.
pub fn wis_of_icp(c: &CombinatorialProof) -> Result<Strategy, GameError> {
    check_icp(c).map_err(|e| GameError::Precondition(e.to_string()))?;
    let g = &c.net.arena;
    let lg = linking_graph(&c.net).map_err(|e| GameError::Precondition(e.to_string()))?;
    let n = g.len();
    let mut pred = vec![Vec::new(); n];
    for v in 0..n {
        for &w in lg.checked_succ(v) {
            pred[w].push(v);
        }
    }
    let axlinks: HashSet<(usize, usize)> = lg.of_kind(EdgeKind::Axlink).into_iter().collect();
    let walker = Walker {
        g,
        pred: &pred,
        axlinks: &axlinks,
        map: &c.map,
    };
    let mut out = BTreeSet::new();
    for t in (0..n).filter(|&v| g.is_root(v) && g.is_mroot(v)) {
        let mut on = vec![false; n];
        on[t] = true;
        walker.walk(&mut vec![t], &mut on, &mut out);
    }
    Ok(Strategy::from_maximal(out))
}

struct Walker<'a> {
    g: &'a Arena,
    pred: &'a [Vec<usize>],
    axlinks: &'a HashSet<(usize, usize)>,
    map: &'a SkewMap,
}

impl Walker<'_> {
    fn walk(&self, path: &mut Vec<usize>, on: &mut [bool], out: &mut BTreeSet<Vec<usize>>) {
        let v = *path.last().expect("non-empty");
        let mut extended = false;
        for &u in &self.pred[v] {
            if on[u] {
                continue;
            }
            extended = true;
            on[u] = true;
            path.push(u);
            self.walk(path, on, out);
            path.pop();
            on[u] = false;
        }
        if !extended {
            out.insert(self.abstract_view(path));
        }
    }

    /// Drop modal vertices, keeping `◇` pairs joined by a traversed axlink.
    fn abstract_view(&self, path: &[usize]) -> Vec<usize> {
        let g = self.g;
        let dia = |v: usize| *g.label(v) == Label::Dia;
        let mut out = Vec::new();
        let mut i = 0;
        while i < path.len() {
            let v = path[i];
            if g.is_atom(v) {
                out.push(v);
            } else if i + 1 < path.len()
                && dia(v)
                && dia(path[i + 1])
                && self.axlinks.contains(&(path[i + 1], v))
            {
                out.push(v);
                out.push(path[i + 1]);
                i += 1;
            }
            i += 1;
        }
        out.into_iter()
            .map(|v| self.map.target.id(self.map.assign[v]))
            .collect()
    }
}

/// Build a combinatorial proof of `f` whose strategy is `s`.
///
/// The source arena is an unfolding of `f` along the strategy: positive
/// parts are copied once per context (the view ending in the `•`-move that
/// opens them), each use of a hypothesis gets its own copy, and negative
/// modalities are shared by the uses framed with the same `∘`-modality.
pub fn icp_of_wis(
    f: &Formula,
    s: &Strategy,
    logic: Logic,
) -> Result<CombinatorialProof, GameError> {
    if f.contains_diabot() {
        return Err(GameError::Precondition("formula contains dia bot".into()));
    }
    let target = arena_of(f);
    check_wis(&target, s).map_err(|e| GameError::Precondition(e.to_string()))?;
    check_framed(&target, s, logic).map_err(|e| GameError::Precondition(e.to_string()))?;
    let tree = formula_tree(f);
    // Inner hypotheses are unfolded before the sharing above them is known,
    // so repeat until the aliases settle.
    let mut alias = BTreeMap::new();
    let out = loop {
        let mut u = Unfold::new(&tree, &target, s, alias.clone())?;
        let out = u.pos(0, &[])?;
        if u.alias == alias {
            if u.consumed != u.uses.len() {
                return Err(GameError::Construction(
                    "some views lie outside the unfolding".into(),
                ));
            }
            break out;
        }
        if u.alias.len() > s.len() {
            return Err(GameError::Construction("sharing does not settle".into()));
        }
        alias = u.alias;
    };
    let mut tags = Vec::new();
    let mut next = 0;
    let source_formula = emit(&out, &mut next, &mut tags);
    let source = arena_of(&source_formula);
    let mut assign = vec![0; source.len()];
    let mut classes: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (id, phi, key) in tags {
        let v = source
            .index_of(id)
            .ok_or_else(|| GameError::Construction(format!("no vertex {id}")))?;
        assign[v] = target.index_of(phi).expect("target vertex");
        classes.entry(key).or_default().push(v);
    }
    let net = PartitionedArena::new(source.clone(), classes.into_values().collect())
        .map_err(|e| GameError::Construction(e.to_string()))?;
    let c = CombinatorialProof {
        net,
        conclusion: f.clone(),
        map: SkewMap::new(Some(source), target, assign),
        logic,
    };
    check_icp(&c).map_err(|e| GameError::Construction(e.to_string()))?;
    if wis_of_icp(&c)? != *s {
        return Err(GameError::Construction(
            "the unfolding does not reproduce the strategy".into(),
        ));
    }
    Ok(c)
}

/// Class key of a source vertex: the even-length view that pairs an atom
/// with its answer, or the context and id of the even modality it is framed
/// with.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    Atom(Vec<usize>),
    Frame(Vec<usize>, usize),
}

enum Out {
    Atom(String, usize, Key),
    Imp(Box<Out>, Box<Out>),
    And(Box<Out>, Box<Out>),
    Modal {
        dia: bool,
        phi: usize,
        key: Key,
        body: Option<Box<Out>>,
    },
}

fn emit(o: &Out, next: &mut usize, tags: &mut Vec<(usize, usize, Key)>) -> Formula {
    let id = *next;
    *next += 1;
    match o {
        Out::Atom(name, phi, key) => {
            tags.push((id, *phi, key.clone()));
            Formula::atom(name)
        }
        Out::Imp(a, b) => {
            let a = emit(a, next, tags);
            Formula::implies(a, emit(b, next, tags))
        }
        Out::And(a, b) => {
            let a = emit(a, next, tags);
            Formula::and(a, emit(b, next, tags))
        }
        Out::Modal {
            dia,
            phi,
            key,
            body,
        } => {
            tags.push((id, *phi, key.clone()));
            match (dia, body) {
                (true, None) => {
                    *next += 1;
                    Formula::DiaBot
                }
                (true, Some(b)) => Formula::dia(emit(b, next, tags)),
                (false, Some(b)) => Formula::boxed(emit(b, next, tags)),
                (false, None) => unreachable!("boxes always have bodies"),
            }
        }
    }
}

fn conj(parts: Vec<Out>) -> Option<Out> {
    parts
        .into_iter()
        .reduce(|a, b| Out::And(Box::new(a), Box::new(b)))
}

/// A `•`-move of the strategy seen as a use of the hypothesis holding it.
struct Use {
    view: Vec<usize>,
    y: usize,
    hyp: usize,
    /// Index of the justifying move; the view before it is the context of
    /// the hypothesis copy.
    just: usize,
}

struct Unfold<'a> {
    tree: &'a FormulaTree,
    arena: &'a Arena,
    s: &'a Strategy,
    uses: Vec<Use>,
    consumed: usize,
    /// Contexts of shared copies, each read as the context of the copy's
    /// first use.
    alias: BTreeMap<Vec<usize>, Vec<usize>>,
}

impl<'a> Unfold<'a> {
    fn new(
        tree: &'a FormulaTree,
        arena: &'a Arena,
        s: &'a Strategy,
        alias: BTreeMap<Vec<usize>, Vec<usize>>,
    ) -> Result<Unfold<'a>, GameError> {
        let mut u = Unfold {
            tree,
            arena,
            s,
            uses: Vec::new(),
            consumed: 0,
            alias,
        };
        for v in s.views() {
            if v.is_empty() || v.len() % 2 == 1 {
                continue;
            }
            let y = *v.last().expect("non-empty");
            let just = u.justifier(v);
            let mut h = y;
            loop {
                let Some(p) = tree.parent(h) else {
                    return Err(GameError::Construction(format!(
                        "answer {y} is not in a hypothesis"
                    )));
                };
                if tree.nodes[p].kind == NodeKind::Imp && tree.nodes[p].children[0] == h {
                    break;
                }
                h = p;
            }
            u.uses.push(Use {
                view: v.clone(),
                y,
                hyp: h,
                just,
            });
        }
        Ok(u)
    }

    fn justifier(&self, view: &[usize]) -> usize {
        justifier(self.arena, view).expect("justified view")
    }

    /// Rewrite the longest aliased proper prefix of a view, until none is
    /// left.
    fn canon(&self, view: &[usize]) -> Vec<usize> {
        self.rewrite(view, false)
    }

    /// The same for a context, which may itself be aliased.
    fn canon_ctx(&self, ctx: &[usize]) -> Vec<usize> {
        self.rewrite(ctx, true)
    }

    fn rewrite(&self, view: &[usize], whole: bool) -> Vec<usize> {
        let mut v = view.to_vec();
        for _ in 0..=self.alias.len() {
            let top = if whole {
                v.len()
            } else {
                v.len().saturating_sub(1)
            };
            let Some(k) = (0..=top).rev().find(|&k| self.alias.contains_key(&v[..k])) else {
                break;
            };
            v = [self.alias[&v[..k]].clone(), v[k..].to_vec()].concat();
        }
        v
    }

    fn pos(&mut self, node: usize, ctx: &[usize]) -> Result<Out, GameError> {
        let kids = self.tree.nodes[node].children.clone();
        match self.tree.kind(node).clone() {
            NodeKind::Atom(name) => {
                let mut v = ctx.to_vec();
                v.push(node);
                let succ = self.s.successors(&v);
                let [y] = succ[..] else {
                    return Err(GameError::Construction(format!(
                        "no unique answer after {v:?}"
                    )));
                };
                v.push(y);
                Ok(Out::Atom(name, node, Key::Atom(v)))
            }
            NodeKind::And => {
                let a = self.pos(kids[0], ctx)?;
                let b = self.pos(kids[1], ctx)?;
                Ok(Out::And(Box::new(a), Box::new(b)))
            }
            NodeKind::Imp => {
                let c = self.pos(kids[1], ctx)?;
                let uses: Vec<usize> = (0..self.uses.len())
                    .filter(|&i| {
                        self.uses[i].hyp == kids[0]
                            && self.canon_ctx(&self.uses[i].view[..self.uses[i].just]) == *ctx
                    })
                    .collect();
                Ok(match self.neg(kids[0], &uses)? {
                    Some(h) => Out::Imp(Box::new(h), Box::new(c)),
                    None => c,
                })
            }
            k @ (NodeKind::Box | NodeKind::Dia) => {
                let body = self.pos(kids[0], ctx)?;
                Ok(Out::Modal {
                    dia: k == NodeKind::Dia,
                    phi: node,
                    key: Key::Frame(ctx.to_vec(), node),
                    body: Some(Box::new(body)),
                })
            }
            NodeKind::Bot => Err(GameError::Precondition("formula contains dia bot".into())),
        }
    }

    fn neg(&mut self, node: usize, uses: &[usize]) -> Result<Option<Out>, GameError> {
        if uses.is_empty() {
            return Ok(None);
        }
        let kids = self.tree.nodes[node].children.clone();
        match self.tree.kind(node).clone() {
            NodeKind::Atom(name) => {
                self.consumed += uses.len();
                let keys: BTreeSet<Vec<usize>> = uses
                    .iter()
                    .map(|&i| self.canon(&self.uses[i].view))
                    .collect();
                Ok(conj(
                    keys.into_iter()
                        .map(|k| Out::Atom(name.clone(), node, Key::Atom(k)))
                        .collect(),
                ))
            }
            NodeKind::And => {
                let (l, r): (Vec<usize>, Vec<usize>) = uses
                    .iter()
                    .partition(|&&i| self.tree.is_ancestor(kids[0], self.uses[i].y));
                let parts: Vec<Out> = [self.neg(kids[0], &l)?, self.neg(kids[1], &r)?]
                    .into_iter()
                    .flatten()
                    .collect();
                Ok(conj(parts))
            }
            NodeKind::Imp => {
                // one copy per use, except that uses meeting in the same copy
                // of a `◇` share it
                let mut groups: BTreeMap<(Option<(Vec<usize>, usize)>, Vec<usize>), Vec<usize>> =
                    BTreeMap::new();
                for &i in uses {
                    let key = match self.outer_dia(kids[1], self.uses[i].y) {
                        Some(m) => (Some(self.instance(i, m)?), Vec::new()),
                        None => (None, self.canon(&self.uses[i].view)),
                    };
                    groups.entry(key).or_default().push(i);
                }
                let mut parts = Vec::new();
                for group in groups.into_values() {
                    let first = self.canon(&self.uses[group[0]].view);
                    for &i in &group[1..] {
                        let other = self.canon(&self.uses[i].view);
                        if other != first {
                            self.alias.insert(other, first.clone());
                        }
                    }
                    let d = self.pos(kids[0], &first)?;
                    let r = self.neg(kids[1], &group)?.expect("the uses lie below");
                    parts.push(Out::Imp(Box::new(d), Box::new(r)));
                }
                Ok(conj(parts))
            }
            k @ (NodeKind::Box | NodeKind::Dia) => {
                let mut groups: BTreeMap<(Vec<usize>, usize), Vec<usize>> = BTreeMap::new();
                for &i in uses {
                    groups.entry(self.instance(i, node)?).or_default().push(i);
                }
                let mut parts = Vec::new();
                for ((ctx, w), group) in groups {
                    let (moves, body): (Vec<usize>, Vec<usize>) =
                        group.into_iter().partition(|&i| self.uses[i].y == node);
                    self.consumed += moves.len();
                    let body = self.neg(kids[0], &body)?;
                    if k == NodeKind::Box && body.is_none() {
                        return Err(GameError::Construction(format!(
                            "box {node} without a body"
                        )));
                    }
                    parts.push(Out::Modal {
                        dia: k == NodeKind::Dia,
                        phi: node,
                        key: Key::Frame(ctx, w),
                        body: body.map(Box::new),
                    });
                }
                Ok(conj(parts))
            }
            NodeKind::Bot => Err(GameError::Precondition("formula contains dia bot".into())),
        }
    }

    /// The `◇` closest to `top` on the way down to `y`.
    fn outer_dia(&self, top: usize, y: usize) -> Option<usize> {
        let mut found = None;
        let mut cur = Some(y);
        while let Some(c) = cur {
            if self.tree.nodes[c].kind == NodeKind::Dia {
                found = Some(c);
            }
            if c == top {
                break;
            }
            cur = self.tree.parent(c);
        }
        found
    }

    /// The copy of the even modality framed with the negative modality `m`
    /// above the move of a use.
    fn instance(&self, i: usize, m: usize) -> Result<(Vec<usize>, usize), GameError> {
        let view = &self.uses[i].view;
        let fv =
            FramedView::of(self.arena, view).map_err(|e| GameError::Precondition(e.to_string()))?;
        let w = fv
            .frame_of(view.len() - 1, m)
            .ok_or_else(|| GameError::Construction(format!("modality {m} has no even frame")))?;
        Ok((self.canon_ctx(&w.ctx), w.id))
    }
}
