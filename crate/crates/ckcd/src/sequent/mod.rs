//! Sequents, derivations and their checkers, the decomposition into a
//! linear part and a deep weakening/contraction part, and a bounded prover.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::formula::{parse, Formula, ParseError, Polarity};
use crate::Logic;

mod decompose;
mod prove;

pub use decompose::{decompose, permute, Decomposition};
pub(crate) use decompose::{deep_chain, Primed};

pub use prove::{prove, Bounds, Outcome};

/// `Γ ⊢ C`. In polarized systems the hypotheses are the `•` formulas and the
/// conclusion is the unique `∘` formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sequent {
    pub hyps: Vec<Formula>,
    pub concl: Formula,
}

impl Sequent {
    /// Hypotheses are kept sorted.
    pub fn new(mut hyps: Vec<Formula>, concl: Formula) -> Sequent {
        hyps.sort();
        Sequent { hyps, concl }
    }

    pub fn goal(concl: Formula) -> Sequent {
        Sequent {
            hyps: vec![],
            concl,
        }
    }

    /// The formula `Γ₁ ⊃ (Γ₂ ⊃ … ⊃ C)` whose arena is the sequent's arena.
    pub fn formula(&self) -> Formula {
        self.hyps.iter().rev().fold(self.concl.clone(), |acc, h| {
            Formula::implies(h.clone(), acc)
        })
    }

    /// Preorder id of the root of hypothesis `i` (or of the conclusion for
    /// `i == hyps.len()`) inside [`Sequent::formula`].
    pub fn root_id(&self, i: usize) -> usize {
        self.hyps[..i].iter().map(|h| 1 + h.size()).sum::<usize>()
            + usize::from(i < self.hyps.len())
    }

    /// Formula at position `i` (hypotheses first, then the conclusion).
    pub fn at(&self, i: usize) -> Option<&Formula> {
        if i < self.hyps.len() {
            self.hyps.get(i)
        } else if i == self.hyps.len() {
            Some(&self.concl)
        } else {
            None
        }
    }

    pub fn size(&self) -> usize {
        self.hyps.iter().map(Formula::size).sum::<usize>() + self.concl.size()
    }
}

impl fmt::Display for Sequent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.hyps.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{h}")?;
        }
        if self.hyps.is_empty() {
            write!(f, "|- {}", self.concl)
        } else {
            write!(f, " |- {}", self.concl)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SequentParseError {
    #[error("missing turnstile `|-`")]
    NoTurnstile,
    #[error("formula {index}: {source}")]
    Formula { index: usize, source: ParseError },
}

impl FromStr for Sequent {
    type Err = SequentParseError;

    fn from_str(s: &str) -> Result<Sequent, SequentParseError> {
        let (l, r) = s
            .split_once("|-")
            .or_else(|| s.split_once('⊢'))
            .ok_or(SequentParseError::NoTurnstile)?;
        let mut hyps = Vec::new();
        if !l.trim().is_empty() {
            for (index, part) in l.split(',').enumerate() {
                hyps.push(
                    parse(part).map_err(|source| SequentParseError::Formula { index, source })?,
                );
            }
        }
        let concl = parse(r).map_err(|source| SequentParseError::Formula {
            index: hyps.len(),
            source,
        })?;
        Ok(Sequent::new(hyps, concl))
    }
}

impl Serialize for Sequent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Sequent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Sequent, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Rule names. Plain rules are capitalised as in the two-sided calculus,
/// polarized ones are lower case, deep ones are prefixed with `deep-`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "AX")]
    Ax,
    #[serde(rename = "impR")]
    ImpR,
    #[serde(rename = "impL")]
    ImpL,
    #[serde(rename = "andR")]
    AndR,
    #[serde(rename = "andL")]
    AndL,
    #[serde(rename = "C")]
    C,
    #[serde(rename = "W")]
    W,
    #[serde(rename = "Kbox")]
    KBox,
    #[serde(rename = "Kdia")]
    KDia,
    #[serde(rename = "Kbot")]
    KBot,
    #[serde(rename = "D")]
    D,
    #[serde(rename = "ax")]
    PAx,
    #[serde(rename = "limp-out")]
    PLimpOut,
    #[serde(rename = "limp-in")]
    PLimpIn,
    #[serde(rename = "tens-out")]
    PTensOut,
    #[serde(rename = "tens-in")]
    PTensIn,
    #[serde(rename = "c")]
    PC,
    #[serde(rename = "w")]
    PW,
    #[serde(rename = "kbox")]
    PKBox,
    #[serde(rename = "kdia")]
    PKDia,
    #[serde(rename = "kbot")]
    PKBot,
    #[serde(rename = "d")]
    PD,
    #[serde(rename = "deep-w-dia")]
    DeepWDia,
    #[serde(rename = "deep-w-tens")]
    DeepWTens,
    #[serde(rename = "deep-w-limp")]
    DeepWLimp,
    #[serde(rename = "deep-c")]
    DeepC,
    /// An open premise: the top of a deep derivation.
    #[serde(rename = "hyp")]
    Hyp,
}

/// The logical shape shared by a plain rule and its polarized twin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Ax,
    ImpR,
    ImpL,
    AndR,
    AndL,
    C,
    W,
    KBox,
    KDia,
    KBot,
    D,
    DeepWDia,
    DeepWTens,
    DeepWLimp,
    DeepC,
    Hyp,
}

impl Rule {
    pub fn shape(self) -> Shape {
        use Rule::*;
        match self {
            Ax | PAx => Shape::Ax,
            ImpR | PLimpOut => Shape::ImpR,
            ImpL | PLimpIn => Shape::ImpL,
            AndR | PTensOut => Shape::AndR,
            AndL | PTensIn => Shape::AndL,
            C | PC => Shape::C,
            W | PW => Shape::W,
            KBox | PKBox => Shape::KBox,
            KDia | PKDia => Shape::KDia,
            KBot | PKBot => Shape::KBot,
            D | PD => Shape::D,
            DeepWDia => Shape::DeepWDia,
            DeepWTens => Shape::DeepWTens,
            DeepWLimp => Shape::DeepWLimp,
            DeepC => Shape::DeepC,
            Hyp => Shape::Hyp,
        }
    }

    pub fn is_polarized(self) -> bool {
        use Rule::*;
        matches!(
            self,
            PAx | PLimpOut | PLimpIn | PTensOut | PTensIn | PC | PW | PKBox | PKDia | PKBot | PD
        )
    }

    pub fn is_deep(self) -> bool {
        matches!(
            self.shape(),
            Shape::DeepWDia | Shape::DeepWTens | Shape::DeepWLimp | Shape::DeepC
        )
    }

    /// The polarized twin of a plain rule (identity on the others).
    pub fn polarized(self) -> Rule {
        use Rule::*;
        match self {
            Ax => PAx,
            ImpR => PLimpOut,
            ImpL => PLimpIn,
            AndR => PTensOut,
            AndL => PTensIn,
            C => PC,
            W => PW,
            KBox => PKBox,
            KDia => PKDia,
            KBot => PKBot,
            D => PD,
            r => r,
        }
    }

    /// The plain twin of a polarized rule (identity on the others).
    pub fn plain(self) -> Rule {
        use Rule::*;
        match self {
            PAx => Ax,
            PLimpOut => ImpR,
            PLimpIn => ImpL,
            PTensOut => AndR,
            PTensIn => AndL,
            PC => C,
            PW => W,
            PKBox => KBox,
            PKDia => KDia,
            PKBot => KBot,
            PD => D,
            r => r,
        }
    }

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum System {
    #[serde(rename = "LCK")]
    Lck,
    #[serde(rename = "LCD")]
    Lcd,
    #[serde(rename = "IMLL-CK")]
    ImllCk,
    #[serde(rename = "IMLL-CD")]
    ImllCd,
    #[serde(rename = "LJ-CK-pol")]
    LjCkPol,
    #[serde(rename = "LJ-CD-pol")]
    LjCdPol,
    #[serde(rename = "IMLL-CK-pol")]
    ImllCkPol,
    #[serde(rename = "IMLL-CD-pol")]
    ImllCdPol,
    #[serde(rename = "downLJ")]
    DownLj,
}

impl System {
    pub const ALL: [System; 9] = [
        System::Lck,
        System::Lcd,
        System::ImllCk,
        System::ImllCd,
        System::LjCkPol,
        System::LjCdPol,
        System::ImllCkPol,
        System::ImllCdPol,
        System::DownLj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::Lck => "LCK",
            System::Lcd => "LCD",
            System::ImllCk => "IMLL-CK",
            System::ImllCd => "IMLL-CD",
            System::LjCkPol => "LJ-CK-pol",
            System::LjCdPol => "LJ-CD-pol",
            System::ImllCkPol => "IMLL-CK-pol",
            System::ImllCdPol => "IMLL-CD-pol",
            System::DownLj => "downLJ",
        }
    }

    pub fn logic(self) -> Option<Logic> {
        match self {
            System::Lck | System::ImllCk | System::LjCkPol | System::ImllCkPol => Some(Logic::CK),
            System::Lcd | System::ImllCd | System::LjCdPol | System::ImllCdPol => Some(Logic::CD),
            System::DownLj => None,
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(
            self,
            System::ImllCk | System::ImllCd | System::ImllCkPol | System::ImllCdPol
        )
    }

    pub fn is_polarized(self) -> bool {
        matches!(
            self,
            System::LjCkPol | System::LjCdPol | System::ImllCkPol | System::ImllCdPol
        )
    }

    pub fn linear(logic: Logic, polarized: bool) -> System {
        match (logic, polarized) {
            (Logic::CK, false) => System::ImllCk,
            (Logic::CD, false) => System::ImllCd,
            (Logic::CK, true) => System::ImllCkPol,
            (Logic::CD, true) => System::ImllCdPol,
        }
    }

    pub fn full(logic: Logic, polarized: bool) -> System {
        match (logic, polarized) {
            (Logic::CK, false) => System::Lck,
            (Logic::CD, false) => System::Lcd,
            (Logic::CK, true) => System::LjCkPol,
            (Logic::CD, true) => System::LjCdPol,
        }
    }

    pub fn allows(self, r: Rule) -> bool {
        if self == System::DownLj {
            return r.is_deep() || r == Rule::Hyp;
        }
        if r.is_deep() || r == Rule::Hyp || r.is_polarized() != self.is_polarized() {
            return false;
        }
        let logic = self.logic().expect("sequent system");
        match r.shape() {
            Shape::Ax
            | Shape::ImpR
            | Shape::ImpL
            | Shape::AndR
            | Shape::AndL
            | Shape::KBox
            | Shape::KDia => true,
            Shape::C | Shape::W => !self.is_linear(),
            Shape::KBot => self.is_linear() && logic == Logic::CK,
            Shape::D => logic == Logic::CD,
            _ => false,
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = String;

    fn from_str(s: &str) -> Result<System, String> {
        System::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown system {s:?}"))
    }
}

/// A derivation tree. `sequent` is the conclusion of the node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub rule: Rule,
    pub sequent: Sequent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_path: Option<Vec<usize>>,
    #[serde(default)]
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn new(rule: Rule, sequent: Sequent, premises: Vec<Derivation>) -> Derivation {
        Derivation {
            rule,
            sequent,
            context_path: None,
            premises,
        }
    }

    pub fn deep(rule: Rule, sequent: Sequent, path: Vec<usize>, premise: Derivation) -> Derivation {
        Derivation {
            rule,
            sequent,
            context_path: Some(path),
            premises: vec![premise],
        }
    }

    pub fn hyp(sequent: Sequent) -> Derivation {
        Derivation::new(Rule::Hyp, sequent, vec![])
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    pub fn height(&self) -> usize {
        1 + self
            .premises
            .iter()
            .map(Derivation::height)
            .max()
            .unwrap_or(0)
    }

    /// Count nodes whose rule has the given shape.
    pub fn count(&self, shape: Shape) -> usize {
        usize::from(self.rule.shape() == shape)
            + self.premises.iter().map(|p| p.count(shape)).sum::<usize>()
    }

    /// Rename every rule to its polarized twin.
    pub fn polarized(&self) -> Derivation {
        self.map_rules(&Rule::polarized)
    }

    /// Rename every rule to its plain twin.
    pub fn plain(&self) -> Derivation {
        self.map_rules(&Rule::plain)
    }

    fn map_rules(&self, f: &dyn Fn(Rule) -> Rule) -> Derivation {
        Derivation {
            rule: f(self.rule),
            sequent: self.sequent.clone(),
            context_path: self.context_path.clone(),
            premises: self.premises.iter().map(|p| p.map_rules(f)).collect(),
        }
    }

    /// The sequent at the top of a linear chain (the open premise of a deep
    /// derivation).
    pub fn top(&self) -> &Sequent {
        let mut d = self;
        while let Some(p) = d.premises.first() {
            d = p;
        }
        &d.sequent
    }
}

/// Where and why a derivation fails to check.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize)]
#[error("at node {node:?} ({rule}): {message}")]
pub struct DerivationError {
    /// Premise indices from the root to the offending node.
    pub node: Vec<usize>,
    pub rule: String,
    pub message: String,
}

/// Multiset difference `a - b`, if `b ⊆ a`.
pub(crate) fn msub(a: &[Formula], b: &[Formula]) -> Option<Vec<Formula>> {
    let mut rest = a.to_vec();
    for f in b {
        let i = rest.iter().position(|g| g == f)?;
        rest.remove(i);
    }
    Some(rest)
}

pub(crate) fn meq(a: &[Formula], b: &[Formula]) -> bool {
    a.len() == b.len() && msub(a, b).is_some()
}

fn mplus(a: &[Formula], b: &[Formula]) -> Vec<Formula> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

/// Walk to the subformula at `path` (child indices) inside `f`.
pub fn subformula<'a>(f: &'a Formula, path: &[usize]) -> Option<&'a Formula> {
    let mut cur = f;
    for &k in path {
        cur = match (cur, k) {
            (Formula::Implies(a, _), 0) | (Formula::And(a, _), 0) => a,
            (Formula::Implies(_, b), 1) | (Formula::And(_, b), 1) => b,
            (Formula::Box(a), 0) | (Formula::Dia(a), 0) => a,
            _ => return None,
        };
    }
    Some(cur)
}

/// Replace the subformula at `path`.
pub fn replace_at(f: &Formula, path: &[usize], new: Formula) -> Option<Formula> {
    let Some((&k, rest)) = path.split_first() else {
        return Some(new);
    };
    Some(match (f, k) {
        (Formula::Implies(a, b), 0) => Formula::implies(replace_at(a, rest, new)?, (**b).clone()),
        (Formula::Implies(a, b), 1) => Formula::implies((**a).clone(), replace_at(b, rest, new)?),
        (Formula::And(a, b), 0) => Formula::and(replace_at(a, rest, new)?, (**b).clone()),
        (Formula::And(a, b), 1) => Formula::and((**a).clone(), replace_at(b, rest, new)?),
        (Formula::Box(a), 0) => Formula::boxed(replace_at(a, rest, new)?),
        (Formula::Dia(a), 0) => Formula::dia(replace_at(a, rest, new)?),
        _ => return None,
    })
}

/// Polarity of the subformula at `path` below a formula of polarity `root`.
pub fn polarity_at(f: &Formula, path: &[usize], root: Polarity) -> Option<Polarity> {
    let mut cur = f;
    let mut pol = root;
    for &k in path {
        if let Formula::Implies(..) = cur {
            if k == 0 {
                pol = pol.flip();
            }
        }
        cur = subformula(cur, &[k])?;
    }
    Some(pol)
}

/// A `◇⊥` occurring at an output position has no meaning in polarized
/// sequents.
fn diabot_at_output(f: &Formula, pol: Polarity) -> bool {
    match f {
        Formula::DiaBot => pol == Polarity::Out,
        Formula::Atom(_) => false,
        Formula::Implies(a, b) => diabot_at_output(a, pol.flip()) || diabot_at_output(b, pol),
        Formula::And(a, b) => diabot_at_output(a, pol) || diabot_at_output(b, pol),
        Formula::Box(a) | Formula::Dia(a) => diabot_at_output(a, pol),
    }
}

pub fn check_derivation(d: &Derivation, system: System) -> Result<(), DerivationError> {
    let mut node = Vec::new();
    check_node(
        d,
        &|r| system.allows(r),
        system.is_polarized() || system == System::DownLj,
        &mut node,
    )
}

/// Check a polarized fragment that may mix sequent rules of the logic with
/// deep rules and open premises.
pub fn check_fragment(d: &Derivation, logic: Logic) -> Result<(), DerivationError> {
    let full = System::full(logic, true);
    let lin = System::linear(logic, true);
    let ok = |r: Rule| full.allows(r) || lin.allows(r) || System::DownLj.allows(r);
    check_node(d, &ok, true, &mut Vec::new())
}

fn check_node(
    d: &Derivation,
    allows: &dyn Fn(Rule) -> bool,
    polarized: bool,
    node: &mut Vec<usize>,
) -> Result<(), DerivationError> {
    let err = |node: &Vec<usize>, message: String| DerivationError {
        node: node.clone(),
        rule: d.rule.name(),
        message,
    };
    if !allows(d.rule) {
        return Err(err(node, "rule not in the system".into()));
    }
    if polarized {
        let s = &d.sequent;
        if s.hyps.iter().any(|h| diabot_at_output(h, Polarity::In))
            || diabot_at_output(&s.concl, Polarity::Out)
        {
            return Err(err(node, "dia bot at an output position".into()));
        }
    }
    check_rule(d).map_err(|m| err(node, m))?;
    for (i, p) in d.premises.iter().enumerate() {
        node.push(i);
        check_node(p, allows, polarized, node)?;
        node.pop();
    }
    Ok(())
}

fn boxes(hs: &[Formula]) -> Option<Vec<Formula>> {
    hs.iter()
        .map(|h| match h {
            Formula::Box(a) => Some((**a).clone()),
            _ => None,
        })
        .collect()
}

/// Check the local shape of one rule instance.
pub fn check_rule(d: &Derivation) -> Result<(), String> {
    let s = &d.sequent;
    let ps: Vec<&Sequent> = d.premises.iter().map(|p| &p.sequent).collect();
    let arity = match d.rule.shape() {
        Shape::Ax | Shape::Hyp => 0,
        Shape::ImpL | Shape::AndR => 2,
        _ => 1,
    };
    if ps.len() != arity {
        return Err(format!("expected {arity} premises, found {}", ps.len()));
    }
    if !matches!(
        d.rule.shape(),
        Shape::DeepWDia | Shape::DeepWTens | Shape::DeepWLimp | Shape::DeepC
    ) && d.context_path.is_some()
    {
        return Err("context path on a shallow rule".into());
    }
    match d.rule.shape() {
        Shape::Hyp => Ok(()),
        Shape::Ax => match (&s.hyps[..], &s.concl) {
            ([Formula::Atom(x)], Formula::Atom(y)) if x == y => Ok(()),
            _ => Err("axiom must be a |- a".into()),
        },
        Shape::ImpR => {
            let Formula::Implies(a, b) = &s.concl else {
                return Err("conclusion is not an implication".into());
            };
            if ps[0].concl == **b && meq(&ps[0].hyps, &mplus(&s.hyps, &[(**a).clone()])) {
                Ok(())
            } else {
                Err("premise must be Γ, A |- B".into())
            }
        }
        Shape::ImpL => {
            let (l, r) = (ps[0], ps[1]);
            if r.concl != s.concl {
                return Err("right premise conclusion differs".into());
            }
            for h in &s.hyps {
                let Formula::Implies(a, b) = h else { continue };
                if **a != l.concl {
                    continue;
                }
                let Some(rest) = msub(&s.hyps, std::slice::from_ref(h)) else {
                    continue;
                };
                let Some(delta) = msub(&rest, &l.hyps) else {
                    continue;
                };
                if meq(&r.hyps, &mplus(&delta, &[(**b).clone()])) {
                    return Ok(());
                }
            }
            Err("no hypothesis A ⊃ B splits the context as Γ |- A and Δ, B |- C".into())
        }
        Shape::AndR => {
            let Formula::And(a, b) = &s.concl else {
                return Err("conclusion is not a conjunction".into());
            };
            if ps[0].concl == **a
                && ps[1].concl == **b
                && meq(&s.hyps, &mplus(&ps[0].hyps, &ps[1].hyps))
            {
                Ok(())
            } else {
                Err("premises must be Γ |- A and Δ |- B".into())
            }
        }
        Shape::AndL => {
            if ps[0].concl != s.concl {
                return Err("premise conclusion differs".into());
            }
            for h in &s.hyps {
                let Formula::And(a, b) = h else { continue };
                let rest = msub(&s.hyps, std::slice::from_ref(h)).expect("member");
                if meq(&ps[0].hyps, &mplus(&rest, &[(**a).clone(), (**b).clone()])) {
                    return Ok(());
                }
            }
            Err("premise must be Γ, A, B |- C".into())
        }
        Shape::C => {
            if ps[0].concl != s.concl {
                return Err("premise conclusion differs".into());
            }
            match msub(&ps[0].hyps, &s.hyps) {
                Some(extra) if extra.len() == 1 && s.hyps.contains(&extra[0]) => Ok(()),
                _ => Err("premise must be Γ, A, A |- B".into()),
            }
        }
        Shape::W => {
            if ps[0].concl != s.concl {
                return Err("premise conclusion differs".into());
            }
            match msub(&s.hyps, &ps[0].hyps) {
                Some(extra) if extra.len() == 1 => Ok(()),
                _ => Err("premise must be Γ |- B".into()),
            }
        }
        Shape::KBox => {
            let Formula::Box(a) = &s.concl else {
                return Err("conclusion is not a box".into());
            };
            let Some(g) = boxes(&s.hyps) else {
                return Err("all hypotheses must be boxed".into());
            };
            if ps[0].concl == **a && meq(&ps[0].hyps, &g) {
                Ok(())
            } else {
                Err("premise must be Γ |- A".into())
            }
        }
        Shape::KDia | Shape::KBot | Shape::D => {
            let Formula::Dia(b) = &s.concl else {
                return Err("conclusion is not a diamond".into());
            };
            let dias: Vec<&Formula> = s
                .hyps
                .iter()
                .filter(|h| !matches!(h, Formula::Box(_)))
                .collect();
            let (want_dia, want_bot) = match d.rule.shape() {
                Shape::KDia => (1, false),
                Shape::KBot => (1, true),
                _ => (0, false),
            };
            if dias.len() != want_dia {
                return Err(format!(
                    "expected {want_dia} non-boxed hypotheses, found {}",
                    dias.len()
                ));
            }
            let mut prem = Vec::new();
            if let Some(&x) = dias.first() {
                match (x, want_bot) {
                    (Formula::Dia(a), false) => prem.push((**a).clone()),
                    (Formula::DiaBot, true) => {}
                    _ => return Err("principal hypothesis has the wrong shape".into()),
                }
            }
            let boxed: Vec<Formula> = s
                .hyps
                .iter()
                .filter(|h| matches!(h, Formula::Box(_)))
                .cloned()
                .collect();
            prem.extend(boxes(&boxed).expect("boxed"));
            if ps[0].concl == **b && meq(&ps[0].hyps, &prem) {
                Ok(())
            } else {
                Err("premise does not match the rule".into())
            }
        }
        Shape::DeepWDia | Shape::DeepWTens | Shape::DeepWLimp | Shape::DeepC => check_deep(d),
    }
}

fn check_deep(d: &Derivation) -> Result<(), String> {
    let path = d
        .context_path
        .as_deref()
        .ok_or("deep rule without context path")?;
    let (&pos, inner) = path.split_first().ok_or("empty context path")?;
    let s = &d.sequent;
    let p = &d.premises[0].sequent;
    let whole = s.at(pos).ok_or("context path leaves the sequent")?;
    let root = if pos < s.hyps.len() {
        Polarity::In
    } else {
        Polarity::Out
    };
    let x = subformula(whole, inner).ok_or("context path leaves the formula")?;
    let pol = polarity_at(whole, inner, root).expect("valid path");
    let candidates: Vec<Formula> = match (d.rule.shape(), x) {
        (Shape::DeepWDia, Formula::Dia(_)) if pol == Polarity::In => vec![Formula::DiaBot],
        (Shape::DeepWTens, Formula::And(a, b)) if pol == Polarity::In => {
            vec![(**a).clone(), (**b).clone()]
        }
        (Shape::DeepWLimp, Formula::Implies(_, a)) if pol == Polarity::Out => vec![(**a).clone()],
        (Shape::DeepC, a) if pol == Polarity::In => vec![Formula::and(a.clone(), a.clone())],
        _ => return Err(format!("rule does not apply to {x} at {pol:?} polarity")),
    };
    for c in candidates {
        let new = replace_at(whole, inner, c).expect("valid path");
        let expect = if pos < s.hyps.len() {
            let mut hs = s.hyps.clone();
            hs[pos] = new;
            Sequent::new(hs, s.concl.clone())
        } else {
            Sequent::new(s.hyps.clone(), new)
        };
        if expect.concl == p.concl && meq(&expect.hyps, &p.hyps) {
            return Ok(());
        }
    }
    Err("premise is not the conclusion with one occurrence rewritten".into())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    fn seq(s: &str) -> Sequent {
        s.parse().unwrap()
    }

    fn node(rule: Rule, s: &str, ps: Vec<Derivation>) -> Derivation {
        Derivation::new(rule, seq(s), ps)
    }

    pub(crate) fn k1_linear() -> Derivation {
        use Rule::*;
        node(
            ImpR,
            "|- box(a -> b) -> box a -> box b",
            vec![node(
                ImpR,
                "box(a -> b) |- box a -> box b",
                vec![node(
                    KBox,
                    "box(a -> b), box a |- box b",
                    vec![node(
                        ImpL,
                        "a -> b, a |- b",
                        vec![node(Ax, "a |- a", vec![]), node(Ax, "b |- b", vec![])],
                    )],
                )],
            )],
        )
    }

    #[test]
    fn sequent_round_trip() {
        let s = seq("b, a -> b |- a /\\ b");
        // atoms sort before compound formulas
        assert_eq!(s.to_string(), "b, a -> b |- a /\\ b");
        assert_eq!(seq("|- a").hyps.len(), 0);
        assert_eq!(seq(&s.to_string()), s);
        assert!("a, b".parse::<Sequent>().is_err());
    }

    #[test]
    fn root_ids_follow_curried_formula() {
        let s = seq("a /\\ b, c |- d");
        // sorted to c, a /\ b; c -> ((a /\ b) -> d): 0 imp, 1 c, 2 imp, 3 and, 6 d
        assert_eq!(s.hyps[0], Formula::atom("c"));
        assert_eq!((s.root_id(0), s.root_id(1), s.root_id(2)), (1, 3, 6));
    }

    #[test]
    fn k1_checks_in_linear_systems() {
        let d = k1_linear();
        for sys in [System::ImllCk, System::ImllCd, System::Lck, System::Lcd] {
            assert_eq!(check_derivation(&d, sys), Ok(()), "{sys}");
        }
        assert_eq!(check_derivation(&d.polarized(), System::ImllCkPol), Ok(()));
        assert!(check_derivation(&d, System::ImllCkPol).is_err());
    }

    #[test]
    fn kdia_with_two_diamonds_rejected() {
        use Rule::*;
        let d = node(
            KDia,
            "dia a, dia b |- dia a",
            vec![node(Ax, "a |- a", vec![])],
        );
        let e = check_derivation(&d, System::Lck).unwrap_err();
        assert!(e.message.contains("non-boxed"));
        assert_eq!(e.node, Vec::<usize>::new());
    }

    #[test]
    fn structural_rules_only_outside_linear_systems() {
        use Rule::*;
        let d = node(W, "a, b |- a", vec![node(Ax, "a |- a", vec![])]);
        assert_eq!(check_derivation(&d, System::Lck), Ok(()));
        assert!(check_derivation(&d, System::ImllCk).is_err());
        let c = node(
            C,
            "a |- a /\\ a",
            vec![node(
                AndR,
                "a, a |- a /\\ a",
                vec![node(Ax, "a |- a", vec![]), node(Ax, "a |- a", vec![])],
            )],
        );
        assert_eq!(check_derivation(&c, System::Lcd), Ok(()));
    }

    #[test]
    fn d_and_kbot_membership() {
        use Rule::*;
        let d = node(D, "box a |- dia a", vec![node(Ax, "a |- a", vec![])]);
        assert!(check_derivation(&d, System::Lck).is_err());
        assert_eq!(check_derivation(&d, System::Lcd), Ok(()));
        let k = node(
            KBot,
            "dia bot, box a |- dia a",
            vec![node(Ax, "a |- a", vec![])],
        );
        assert_eq!(check_derivation(&k, System::ImllCk), Ok(()));
        assert!(check_derivation(&k, System::Lck).is_err());
        assert!(check_derivation(&k, System::ImllCd).is_err());
    }

    #[test]
    fn deep_rules() {
        use Rule::*;
        let top = Derivation::hyp(seq("|- a /\\ a -> a"));
        let c = Derivation::deep(DeepC, seq("|- a -> a"), vec![0, 0], top.clone());
        assert_eq!(check_derivation(&c, System::DownLj), Ok(()));
        // contraction at an output position is refused
        let bad = Derivation::deep(
            DeepC,
            seq("|- a -> a"),
            vec![0, 1],
            Derivation::hyp(seq("|- a -> a /\\ a")),
        );
        assert!(check_derivation(&bad, System::DownLj).is_err());
        let w = Derivation::deep(
            DeepWLimp,
            seq("|- b -> a -> a"),
            vec![0],
            Derivation::hyp(seq("|- a -> a")),
        );
        assert_eq!(check_derivation(&w, System::DownLj), Ok(()));
        let wd = Derivation::deep(
            DeepWDia,
            seq("|- dia c -> dia a"),
            vec![0, 0],
            Derivation::hyp(seq("|- dia bot -> dia a")),
        );
        assert_eq!(check_derivation(&wd, System::DownLj), Ok(()));
        let wt = Derivation::deep(
            DeepWTens,
            seq("|- a /\\ b -> a"),
            vec![0, 0],
            Derivation::hyp(seq("|- a -> a")),
        );
        assert_eq!(check_derivation(&wt, System::DownLj), Ok(()));
    }

    #[test]
    fn derivation_json_round_trip() {
        let d = k1_linear();
        let j = serde_json::to_string(&d).unwrap();
        assert!(j.contains("\"rule\":\"impR\""));
        assert!(j.contains(&format!(
            "\"sequent\":\"{}\"",
            seq("box (a -> b), box a |- box b")
        )));
        let back: Derivation = serde_json::from_str(&j).unwrap();
        assert_eq!(back, d);
    }
}
