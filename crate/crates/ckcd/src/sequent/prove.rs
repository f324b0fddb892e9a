//! Bounded cut-free proof search.
//!
//! The full systems are searched in a contraction-absorbing calculus with set
//! contexts (the principal implication stays available in the left premise of
//! `⊃L`), and the proof found is translated back into the two-sided calculus
//! with explicit weakenings and contractions. Only hypotheses actually used
//! are carried, so structural rules appear exactly where needed. The linear
//! systems are searched exhaustively.

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use super::{msub, Derivation, Rule, Sequent, System};
use crate::formula::Formula;
use crate::Logic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Bounds {
    /// Maximum height of the search tree.
    pub depth: usize,
    /// How many times one implication may be reused as the principal formula
    /// of `⊃L` along a branch.
    pub contraction_budget: usize,
}

impl Bounds {
    pub fn for_sequent(s: &Sequent) -> Bounds {
        Bounds {
            depth: 2 * s.size(),
            contraction_budget: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Proved(Derivation),
    /// Nothing found within the bounds; not a disproof.
    Unproven,
    /// Exhaustive search of a linear system failed.
    Refuted,
}

impl Outcome {
    pub fn proof(self) -> Option<Derivation> {
        match self {
            Outcome::Proved(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_proved(&self) -> bool {
        matches!(self, Outcome::Proved(_))
    }
}

/// Search for a derivation of `s`. Polarized systems are searched through
/// their plain twins and the result renamed.
pub fn prove(s: &Sequent, system: System, bounds: Bounds) -> Outcome {
    let Some(logic) = system.logic() else {
        return Outcome::Unproven;
    };
    let out = if system.is_linear() {
        let mut l = Linear {
            logic,
            memo: HashMap::new(),
        };
        match l.search(&s.hyps, &s.concl) {
            Some(d) => Outcome::Proved(d),
            None => Outcome::Refuted,
        }
    } else {
        let mut g = Full {
            logic,
            bounds,
            found: HashMap::new(),
        };
        let ctx: BTreeSet<Formula> = s.hyps.iter().cloned().collect();
        match g.search(
            &ctx,
            &s.concl,
            bounds.depth,
            &HashMap::new(),
            &mut Vec::new(),
        ) {
            Some((d, used)) => {
                let extra = msub(&s.hyps, &used).expect("used hypotheses come from the context");
                let mut p = Proof { d, used };
                for h in extra {
                    p = p.weaken(h);
                }
                Outcome::Proved(p.d)
            }
            None => Outcome::Unproven,
        }
    };
    match (out, system.is_polarized()) {
        (Outcome::Proved(d), true) => Outcome::Proved(d.polarized()),
        (o, _) => o,
    }
}

/// A translated proof of `used ⊢ goal`.
struct Proof {
    d: Derivation,
    used: Vec<Formula>,
}

impl Proof {
    fn goal(&self) -> &Formula {
        &self.d.sequent.concl
    }

    fn weaken(self, f: Formula) -> Proof {
        let goal = self.goal().clone();
        let mut used = self.used;
        used.push(f);
        let s = Sequent::new(used.clone(), goal);
        Proof {
            d: Derivation::new(Rule::W, s, vec![self.d]),
            used: s_hyps(&used),
        }
    }

    /// Contract duplicate hypotheses one by one.
    fn contract_all(mut self) -> Proof {
        loop {
            let mut sorted = self.used.clone();
            sorted.sort();
            let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) else {
                return self;
            };
            let dup = w[0].clone();
            let used = msub(&self.used, std::slice::from_ref(&dup)).expect("duplicate");
            let s = Sequent::new(used.clone(), self.goal().clone());
            self = Proof {
                d: Derivation::new(Rule::C, s, vec![self.d]),
                used,
            };
        }
    }
}

fn s_hyps(v: &[Formula]) -> Vec<Formula> {
    let mut v = v.to_vec();
    v.sort();
    v
}

struct Full {
    logic: Logic,
    bounds: Bounds,
    found: HashMap<(BTreeSet<Formula>, Formula), (Derivation, Vec<Formula>)>,
}

type Uses = HashMap<Formula, usize>;

impl Full {
    fn search(
        &mut self,
        ctx: &BTreeSet<Formula>,
        goal: &Formula,
        depth: usize,
        uses: &Uses,
        hist: &mut Vec<(BTreeSet<Formula>, Formula)>,
    ) -> Option<(Derivation, Vec<Formula>)> {
        let key = (ctx.clone(), goal.clone());
        if let Some(r) = self.found.get(&key) {
            return Some(r.clone());
        }
        if depth == 0 || hist.contains(&key) {
            return None;
        }
        hist.push(key.clone());
        let r = self
            .step(ctx, goal, depth - 1, uses, hist)
            .map(|p| (p.d, p.used));
        hist.pop();
        if let Some(r) = &r {
            self.found.insert(key, r.clone());
        }
        r
    }

    fn sub(
        &mut self,
        ctx: &BTreeSet<Formula>,
        goal: &Formula,
        depth: usize,
        uses: &Uses,
        hist: &mut Vec<(BTreeSet<Formula>, Formula)>,
    ) -> Option<Proof> {
        self.search(ctx, goal, depth, uses, hist)
            .map(|(d, used)| Proof { d, used })
    }

    fn step(
        &mut self,
        ctx: &BTreeSet<Formula>,
        goal: &Formula,
        depth: usize,
        uses: &Uses,
        hist: &mut Vec<(BTreeSet<Formula>, Formula)>,
    ) -> Option<Proof> {
        // invertible rules first
        if let Some(h) = ctx.iter().find(|h| matches!(h, Formula::And(..))).cloned() {
            let Formula::And(a, b) = &h else {
                unreachable!()
            };
            let mut c = ctx.clone();
            c.remove(&h);
            c.insert((**a).clone());
            c.insert((**b).clone());
            let p = self.sub(&c, goal, depth, uses, hist)?;
            return Some(and_left(&h, p));
        }
        match goal {
            Formula::Implies(a, b) => {
                let mut c = ctx.clone();
                c.insert((**a).clone());
                let p = self.sub(&c, b, depth, uses, hist)?;
                return Some(imp_right(a, b, p));
            }
            Formula::And(a, b) => {
                let l = self.sub(ctx, a, depth, uses, hist)?;
                let r = self.sub(ctx, b, depth, uses, hist)?;
                let s = Sequent::new([l.used.clone(), r.used.clone()].concat(), goal.clone());
                let used = s.hyps.clone();
                return Some(
                    Proof {
                        d: Derivation::new(Rule::AndR, s, vec![l.d, r.d]),
                        used,
                    }
                    .contract_all(),
                );
            }
            Formula::Atom(_) if ctx.contains(goal) => {
                let s = Sequent::new(vec![goal.clone()], goal.clone());
                return Some(Proof {
                    d: Derivation::new(Rule::Ax, s, vec![]),
                    used: vec![goal.clone()],
                });
            }
            _ => {}
        }
        let bodies: BTreeSet<Formula> = ctx
            .iter()
            .filter_map(|h| match h {
                Formula::Box(x) => Some((**x).clone()),
                _ => None,
            })
            .collect();
        match goal {
            Formula::Box(a) => {
                if let Some(p) = self.sub(&bodies, a, depth, uses, hist) {
                    let hyps: Vec<Formula> =
                        p.used.iter().map(|x| Formula::boxed(x.clone())).collect();
                    let s = Sequent::new(hyps.clone(), goal.clone());
                    return Some(Proof {
                        d: Derivation::new(Rule::KBox, s, vec![p.d]),
                        used: s_hyps(&hyps),
                    });
                }
            }
            Formula::Dia(b) => {
                for h in ctx {
                    let Formula::Dia(a) = h else { continue };
                    let mut c = bodies.clone();
                    c.insert((**a).clone());
                    if let Some(mut p) = self.sub(&c, b, depth, uses, hist) {
                        if !p.used.contains(a) {
                            p = p.weaken((**a).clone());
                        }
                        let rest = msub(&p.used, std::slice::from_ref(&**a)).expect("present");
                        let mut hyps: Vec<Formula> =
                            rest.iter().map(|x| Formula::boxed(x.clone())).collect();
                        hyps.push(h.clone());
                        let s = Sequent::new(hyps.clone(), goal.clone());
                        return Some(Proof {
                            d: Derivation::new(Rule::KDia, s, vec![p.d]),
                            used: s_hyps(&hyps),
                        });
                    }
                }
                if self.logic == Logic::CD {
                    if let Some(p) = self.sub(&bodies, b, depth, uses, hist) {
                        let hyps: Vec<Formula> =
                            p.used.iter().map(|x| Formula::boxed(x.clone())).collect();
                        let s = Sequent::new(hyps.clone(), goal.clone());
                        return Some(Proof {
                            d: Derivation::new(Rule::D, s, vec![p.d]),
                            used: s_hyps(&hyps),
                        });
                    }
                }
            }
            _ => {}
        }
        for h in ctx {
            let Formula::Implies(a, b) = h else { continue };
            let n = uses.get(h).copied().unwrap_or(0);
            if n > self.bounds.contraction_budget {
                continue;
            }
            let mut lu = uses.clone();
            lu.insert(h.clone(), n + 1);
            let Some(l) = self.sub(ctx, a, depth, &lu, hist) else {
                continue;
            };
            let mut c = ctx.clone();
            c.remove(h);
            c.insert((**b).clone());
            let Some(r) = self.sub(&c, goal, depth, uses, hist) else {
                continue;
            };
            return Some(imp_left(h, b, l, r));
        }
        None
    }
}

fn imp_right(a: &Formula, b: &Formula, mut p: Proof) -> Proof {
    if !p.used.contains(a) {
        p = p.weaken(a.clone());
    }
    let used = msub(&p.used, std::slice::from_ref(a)).expect("present");
    let s = Sequent::new(used.clone(), Formula::implies(a.clone(), b.clone()));
    Proof {
        d: Derivation::new(Rule::ImpR, s, vec![p.d]),
        used: s_hyps(&used),
    }
}

fn and_left(h: &Formula, mut p: Proof) -> Proof {
    let Formula::And(a, b) = h else {
        unreachable!()
    };
    let (a, b) = ((**a).clone(), (**b).clone());
    if !p.used.contains(&a) && !p.used.contains(&b) {
        return p;
    }
    if !p.used.contains(&a) {
        p = p.weaken(a.clone());
    }
    if msub(&p.used, &[a.clone(), b.clone()]).is_none() {
        p = p.weaken(b.clone());
    }
    let mut used = msub(&p.used, &[a, b]).expect("present");
    used.push(h.clone());
    let s = Sequent::new(used.clone(), p.goal().clone());
    Proof {
        d: Derivation::new(Rule::AndL, s, vec![p.d]),
        used: s_hyps(&used),
    }
}

fn imp_left(h: &Formula, b: &Formula, l: Proof, r: Proof) -> Proof {
    if !r.used.contains(b) {
        return r;
    }
    let mut used = l.used.clone();
    used.extend(msub(&r.used, std::slice::from_ref(b)).expect("present"));
    used.push(h.clone());
    let s = Sequent::new(used.clone(), r.goal().clone());
    Proof {
        d: Derivation::new(Rule::ImpL, s, vec![l.d, r.d]),
        used: s_hyps(&used),
    }
    .contract_all()
}

/// Exhaustive search in the linear systems.
struct Linear {
    logic: Logic,
    memo: HashMap<(Vec<Formula>, Formula), Option<Derivation>>,
}

fn atom_balance(f: &Formula, sign: i32, acc: &mut HashMap<String, i32>) {
    match f {
        Formula::Atom(a) => *acc.entry(a.clone()).or_default() += sign,
        Formula::DiaBot => {}
        Formula::Implies(a, b) => {
            atom_balance(a, -sign, acc);
            atom_balance(b, sign, acc);
        }
        Formula::And(a, b) => {
            atom_balance(a, sign, acc);
            atom_balance(b, sign, acc);
        }
        Formula::Box(a) | Formula::Dia(a) => atom_balance(a, sign, acc),
    }
}

fn balanced(hyps: &[Formula], goal: &Formula) -> bool {
    let mut acc = HashMap::new();
    for h in hyps {
        atom_balance(h, -1, &mut acc);
    }
    atom_balance(goal, 1, &mut acc);
    acc.values().all(|&v| v == 0)
}

/// All ways to split a multiset in two, up to permutation of equal elements.
fn splits(xs: &[Formula]) -> Vec<(Vec<Formula>, Vec<Formula>)> {
    let mut groups: Vec<(Formula, usize)> = Vec::new();
    for x in xs {
        match groups.iter_mut().find(|(f, _)| f == x) {
            Some(g) => g.1 += 1,
            None => groups.push((x.clone(), 1)),
        }
    }
    let mut out = vec![(Vec::new(), Vec::new())];
    for (f, n) in groups {
        let mut next = Vec::new();
        for (l, r) in &out {
            for k in 0..=n {
                let mut l2: Vec<Formula> = l.clone();
                let mut r2: Vec<Formula> = r.clone();
                l2.extend(std::iter::repeat_n(f.clone(), k));
                r2.extend(std::iter::repeat_n(f.clone(), n - k));
                next.push((l2, r2));
            }
        }
        out = next;
    }
    out
}

impl Linear {
    fn search(&mut self, hyps: &[Formula], goal: &Formula) -> Option<Derivation> {
        let mut hs = hyps.to_vec();
        hs.sort();
        let key = (hs.clone(), goal.clone());
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        let r = if balanced(&hs, goal) {
            self.step(&hs, goal)
        } else {
            None
        };
        self.memo.insert(key, r.clone());
        r
    }

    fn step(&mut self, hyps: &[Formula], goal: &Formula) -> Option<Derivation> {
        let s = Sequent::new(hyps.to_vec(), goal.clone());
        if let Some(i) = hyps.iter().position(|h| matches!(h, Formula::And(..))) {
            let Formula::And(a, b) = &hyps[i] else {
                unreachable!()
            };
            let mut p = hyps.to_vec();
            p.remove(i);
            p.push((**a).clone());
            p.push((**b).clone());
            let d = self.search(&p, goal)?;
            return Some(Derivation::new(Rule::AndL, s, vec![d]));
        }
        match goal {
            Formula::Implies(a, b) => {
                let mut p = hyps.to_vec();
                p.push((**a).clone());
                let d = self.search(&p, b)?;
                return Some(Derivation::new(Rule::ImpR, s, vec![d]));
            }
            Formula::Atom(_) if hyps.len() == 1 && hyps[0] == *goal => {
                return Some(Derivation::new(Rule::Ax, s, vec![]));
            }
            Formula::And(a, b) => {
                for (l, r) in splits(hyps) {
                    let Some(dl) = self.search(&l, a) else {
                        continue;
                    };
                    let Some(dr) = self.search(&r, b) else {
                        continue;
                    };
                    return Some(Derivation::new(Rule::AndR, s, vec![dl, dr]));
                }
            }
            _ => {}
        }
        let all_boxed = |hs: &[Formula]| hs.iter().all(|h| matches!(h, Formula::Box(_)));
        let bodies = |hs: &[Formula]| -> Vec<Formula> {
            hs.iter()
                .filter_map(|h| match h {
                    Formula::Box(x) => Some((**x).clone()),
                    _ => None,
                })
                .collect()
        };
        match goal {
            Formula::Box(a) if all_boxed(hyps) => {
                if let Some(d) = self.search(&bodies(hyps), a) {
                    return Some(Derivation::new(Rule::KBox, s, vec![d]));
                }
            }
            Formula::Dia(b) => {
                let others: Vec<&Formula> = hyps
                    .iter()
                    .filter(|h| !matches!(h, Formula::Box(_)))
                    .collect();
                match others[..] {
                    [Formula::Dia(a)] => {
                        let mut p = bodies(hyps);
                        p.push((**a).clone());
                        if let Some(d) = self.search(&p, b) {
                            return Some(Derivation::new(Rule::KDia, s, vec![d]));
                        }
                    }
                    [Formula::DiaBot] if self.logic == Logic::CK => {
                        if let Some(d) = self.search(&bodies(hyps), b) {
                            return Some(Derivation::new(Rule::KBot, s, vec![d]));
                        }
                    }
                    [] if self.logic == Logic::CD => {
                        if let Some(d) = self.search(&bodies(hyps), b) {
                            return Some(Derivation::new(Rule::D, s, vec![d]));
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
        let mut tried: Vec<&Formula> = Vec::new();
        for (i, h) in hyps.iter().enumerate() {
            let Formula::Implies(a, b) = h else { continue };
            if tried.contains(&h) {
                continue;
            }
            tried.push(h);
            let mut rest = hyps.to_vec();
            rest.remove(i);
            for (l, mut r) in splits(&rest) {
                let Some(dl) = self.search(&l, a) else {
                    continue;
                };
                r.push((**b).clone());
                let Some(dr) = self.search(&r, goal) else {
                    continue;
                };
                return Some(Derivation::new(Rule::ImpL, s, vec![dl, dr]));
            }
        }
        None
    }
}
