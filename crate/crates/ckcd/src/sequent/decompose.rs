//! Factorising a polarized proof into a linear proof followed by deep
//! weakenings and contractions.
//!
//! Every formula occurrence of the input is tracked together with a shape
//! recording how its counterpart in the linear proof differs from it: parts
//! that were weakened away, and contractions turned into conjunctions. A
//! weakened hypothesis stays pending until some rule consumes it, at which
//! point it becomes a deep weakening. The deep part is then read off the
//! shapes bottom-up.

use serde::{Deserialize, Serialize};

use super::{msub, Derivation, Rule, Sequent, Shape};
use crate::formula::Formula;
use crate::Logic;

/// The linear-side counterpart of a formula occurrence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Primed {
    Atom(String),
    DiaBot,
    Imp(Box<Primed>, Box<Primed>),
    And(Box<Primed>, Box<Primed>),
    Box(Box<Primed>),
    Dia(Box<Primed>),
    /// `A ⊗ B` where only `A` survives.
    KeepLeft(Box<Primed>, Formula),
    /// `A ⊗ B` where only `B` survives.
    KeepRight(Formula, Box<Primed>),
    /// `B ⊸ A` where only `A` survives.
    KeepHead(Formula, Box<Primed>),
    /// `◇A` replaced by `◇⊥`.
    Emptied(Formula),
    /// One occurrence of `A` standing for the two copies `A₁ ⊗ A₂`.
    Twice(Box<Primed>, Box<Primed>),
}

impl Primed {
    pub(crate) fn of(f: &Formula) -> Primed {
        match f {
            Formula::Atom(a) => Primed::Atom(a.clone()),
            Formula::DiaBot => Primed::DiaBot,
            Formula::Implies(a, b) => Primed::Imp(Box::new(Primed::of(a)), Box::new(Primed::of(b))),
            Formula::And(a, b) => Primed::And(Box::new(Primed::of(a)), Box::new(Primed::of(b))),
            Formula::Box(a) => Primed::Box(Box::new(Primed::of(a))),
            Formula::Dia(a) => Primed::Dia(Box::new(Primed::of(a))),
        }
    }

    /// The formula seen by the linear proof.
    pub(crate) fn linear(&self) -> Formula {
        match self {
            Primed::Atom(a) => Formula::Atom(a.clone()),
            Primed::DiaBot | Primed::Emptied(_) => Formula::DiaBot,
            Primed::Imp(a, b) => Formula::implies(a.linear(), b.linear()),
            Primed::And(a, b) | Primed::Twice(a, b) => Formula::and(a.linear(), b.linear()),
            Primed::Box(a) => Formula::boxed(a.linear()),
            Primed::Dia(a) => Formula::dia(a.linear()),
            Primed::KeepLeft(a, _) | Primed::KeepRight(_, a) | Primed::KeepHead(_, a) => a.linear(),
        }
    }

    /// The original formula.
    pub(crate) fn original(&self) -> Formula {
        match self {
            Primed::Atom(a) => Formula::Atom(a.clone()),
            Primed::DiaBot => Formula::DiaBot,
            Primed::Imp(a, b) => Formula::implies(a.original(), b.original()),
            Primed::And(a, b) => Formula::and(a.original(), b.original()),
            Primed::Box(a) => Formula::boxed(a.original()),
            Primed::Dia(a) => Formula::dia(a.original()),
            Primed::KeepLeft(a, b) => Formula::and(a.original(), b.clone()),
            Primed::KeepRight(a, b) => Formula::and(a.clone(), b.original()),
            Primed::KeepHead(b, a) => Formula::implies(b.clone(), a.original()),
            Primed::Emptied(a) => Formula::dia(a.clone()),
            Primed::Twice(a, _) => a.original(),
        }
    }

    /// Emit the deep steps turning the linear form into the original, inner
    /// ones first. `path` is in the coordinates of the current formula.
    fn steps(&self, path: &mut Vec<usize>, out: &mut Vec<(Rule, Vec<usize>, Formula)>) {
        match self {
            Primed::Atom(_) | Primed::DiaBot => {}
            Primed::Imp(a, b) | Primed::And(a, b) => {
                path.push(0);
                a.steps(path, out);
                path.pop();
                path.push(1);
                b.steps(path, out);
                path.pop();
            }
            Primed::Box(a) | Primed::Dia(a) => {
                path.push(0);
                a.steps(path, out);
                path.pop();
            }
            Primed::KeepLeft(a, _) | Primed::KeepRight(_, a) => {
                a.steps(path, out);
                out.push((Rule::DeepWTens, path.clone(), self.original()));
            }
            Primed::KeepHead(_, a) => {
                a.steps(path, out);
                out.push((Rule::DeepWLimp, path.clone(), self.original()));
            }
            Primed::Emptied(_) => out.push((Rule::DeepWDia, path.clone(), self.original())),
            Primed::Twice(a, b) => {
                path.push(0);
                a.steps(path, out);
                path.pop();
                path.push(1);
                b.steps(path, out);
                path.pop();
                out.push((Rule::DeepC, path.clone(), self.original()));
            }
        }
    }
}

/// A hypothesis occurrence: `None` while its weakening is pending.
type Item = (Formula, Option<Primed>);

struct Part {
    linear: Option<Derivation>,
    hyps: Vec<Item>,
    concl: Primed,
}

/// `linear` proves `down.top()`; `down` is a deep derivation from there to
/// the input's end sequent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub linear: Derivation,
    pub down: Derivation,
}

fn take(items: &mut Vec<Item>, f: &Formula) -> Result<Option<Primed>, String> {
    let i = items
        .iter()
        .position(|(g, _)| g == f)
        .ok_or_else(|| format!("no occurrence of {f}"))?;
    Ok(items.remove(i).1)
}

fn present(items: &[Item]) -> Vec<Formula> {
    items
        .iter()
        .filter_map(|(_, p)| p.as_ref().map(Primed::linear))
        .collect()
}

fn node(rule: Rule, items: &[Item], concl: &Primed, premises: Vec<Derivation>) -> Derivation {
    Derivation::new(rule, Sequent::new(present(items), concl.linear()), premises)
}

/// Factorise a derivation of `LJ-CK-pol` or `LJ-CD-pol` (plain rule names
/// are accepted too). For CK an emptied diamond becomes `kbot` followed by a
/// deep `◇` weakening; for CD it becomes `d` with the diamond weakened.
pub fn decompose(d: &Derivation, logic: Logic) -> Result<Decomposition, String> {
    let part = go(d, logic)?;
    if part.hyps.iter().any(|(_, p)| p.is_none()) {
        return Err("a hypothesis of the end sequent is weakened".into());
    }
    let linear = part.linear.ok_or("empty linear part")?;
    let hyps: Vec<Primed> = part.hyps.into_iter().map(|(_, p)| p.unwrap()).collect();
    let down = deep_chain(&hyps, &part.concl)?;
    debug_assert_eq!(down.sequent.concl, d.sequent.concl);
    Ok(Decomposition { linear, down })
}

/// The deep derivation from the linear forms of a sequent's occurrences down
/// to their originals.
pub(crate) fn deep_chain(slots: &[Primed], concl: &Primed) -> Result<Derivation, String> {
    let mut hyps: Vec<Formula> = slots.iter().map(Primed::linear).collect();
    let mut cur = concl.linear();
    let mut down = Derivation::hyp(Sequent::new(hyps.clone(), cur.clone()));
    for (i, p) in slots.iter().chain(std::iter::once(concl)).enumerate() {
        let mut steps = Vec::new();
        p.steps(&mut Vec::new(), &mut steps);
        for (rule, inner, new) in steps {
            let whole = if i < hyps.len() {
                &mut hyps[i]
            } else {
                &mut cur
            };
            *whole = super::replace_at(whole, &inner, new).ok_or("bad path")?;
            let s = Sequent::new(hyps.clone(), cur.clone());
            let pos = if i < hyps.len() {
                s.hyps.iter().position(|h| *h == hyps[i]).expect("present")
            } else {
                s.hyps.len()
            };
            let mut path = vec![pos];
            path.extend(inner);
            down = Derivation::deep(rule, s, path, down);
        }
    }
    Ok(down)
}

fn go(d: &Derivation, logic: Logic) -> Result<Part, String> {
    let s = &d.sequent;
    let prem = |i: usize| go(&d.premises[i], logic);
    match d.rule.shape() {
        Shape::Ax => {
            let hyps = vec![(s.hyps[0].clone(), Some(Primed::of(&s.hyps[0])))];
            let concl = Primed::of(&s.concl);
            Ok(Part {
                linear: Some(node(Rule::PAx, &hyps, &concl, vec![])),
                hyps,
                concl,
            })
        }
        Shape::W => {
            let mut p = prem(0)?;
            let extra = msub(&s.hyps, &d.premises[0].sequent.hyps).ok_or("bad weakening")?;
            p.hyps.push((extra[0].clone(), None));
            Ok(p)
        }
        Shape::C => {
            let mut p = prem(0)?;
            let extra = msub(&d.premises[0].sequent.hyps, &s.hyps).ok_or("bad contraction")?;
            let a = &extra[0];
            let x = take(&mut p.hyps, a)?;
            let y = take(&mut p.hyps, a)?;
            let merged = match (x, y) {
                (Some(x), Some(y)) => {
                    let m = Primed::Twice(Box::new(x), Box::new(y));
                    let lin = p.linear.take().map(|l| {
                        let mut items = p.hyps.clone();
                        items.push((a.clone(), Some(m.clone())));
                        node(Rule::PTensIn, &items, &p.concl, vec![l])
                    });
                    p.linear = lin;
                    Some(m)
                }
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            };
            p.hyps.push((a.clone(), merged));
            Ok(p)
        }
        Shape::ImpR => {
            let Formula::Implies(a, _) = &s.concl else {
                return Err("impR shape".into());
            };
            let mut p = prem(0)?;
            let pa = take(&mut p.hyps, a)?;
            let pb = p.concl;
            match pa {
                Some(pa) => {
                    let concl = Primed::Imp(Box::new(pa), Box::new(pb));
                    let linear = p
                        .linear
                        .map(|l| node(Rule::PLimpOut, &p.hyps, &concl, vec![l]));
                    Ok(Part {
                        linear,
                        hyps: p.hyps,
                        concl,
                    })
                }
                None => Ok(Part {
                    linear: p.linear,
                    hyps: p.hyps,
                    concl: Primed::KeepHead((**a).clone(), Box::new(pb)),
                }),
            }
        }
        Shape::ImpL => {
            let (ls, rs) = (&d.premises[0].sequent, &d.premises[1].sequent);
            let (h, a, b) = s
                .hyps
                .iter()
                .find_map(|h| {
                    let Formula::Implies(a, b) = h else {
                        return None;
                    };
                    if **a != ls.concl {
                        return None;
                    }
                    let rest = msub(&s.hyps, std::slice::from_ref(h))?;
                    let delta = msub(&rest, &ls.hyps)?;
                    let mut want = delta;
                    want.push((**b).clone());
                    super::meq(&want, &rs.hyps).then(|| (h.clone(), (**a).clone(), (**b).clone()))
                })
                .ok_or("impL shape")?;
            let _ = a;
            let l = prem(0)?;
            let mut r = prem(1)?;
            let pb = take(&mut r.hyps, &b)?;
            match pb {
                Some(pb) => {
                    let princ = Primed::Imp(Box::new(l.concl), Box::new(pb));
                    let mut hyps = l.hyps;
                    hyps.extend(r.hyps);
                    hyps.push((h, Some(princ)));
                    let linear = match (l.linear, r.linear) {
                        (Some(x), Some(y)) => {
                            Some(node(Rule::PLimpIn, &hyps, &r.concl, vec![x, y]))
                        }
                        _ => None,
                    };
                    Ok(Part {
                        linear,
                        hyps,
                        concl: r.concl,
                    })
                }
                None => {
                    // the left subproof is cut away with everything it used
                    let mut hyps: Vec<Item> = l.hyps.into_iter().map(|(f, _)| (f, None)).collect();
                    hyps.extend(r.hyps);
                    hyps.push((h, None));
                    Ok(Part {
                        linear: r.linear,
                        hyps,
                        concl: r.concl,
                    })
                }
            }
        }
        Shape::AndR => {
            let l = prem(0)?;
            let r = prem(1)?;
            let concl = Primed::And(Box::new(l.concl), Box::new(r.concl));
            let mut hyps = l.hyps;
            hyps.extend(r.hyps);
            let linear = match (l.linear, r.linear) {
                (Some(x), Some(y)) => Some(node(Rule::PTensOut, &hyps, &concl, vec![x, y])),
                _ => None,
            };
            Ok(Part {
                linear,
                hyps,
                concl,
            })
        }
        Shape::AndL => {
            let ps = &d.premises[0].sequent;
            let h = s
                .hyps
                .iter()
                .find(|h| {
                    let Formula::And(a, b) = h else { return false };
                    let rest = msub(&s.hyps, std::slice::from_ref(*h)).expect("member");
                    let mut want = rest;
                    want.push((**a).clone());
                    want.push((**b).clone());
                    super::meq(&want, &ps.hyps)
                })
                .ok_or("andL shape")?
                .clone();
            let Formula::And(a, b) = &h else {
                unreachable!()
            };
            let mut p = prem(0)?;
            let pa = take(&mut p.hyps, a)?;
            let pb = take(&mut p.hyps, b)?;
            let (ann, rewrite) = match (pa, pb) {
                (Some(x), Some(y)) => (Some(Primed::And(Box::new(x), Box::new(y))), true),
                (Some(x), None) => (Some(Primed::KeepLeft(Box::new(x), (**b).clone())), false),
                (None, Some(y)) => (Some(Primed::KeepRight((**a).clone(), Box::new(y))), false),
                (None, None) => (None, false),
            };
            p.hyps.push((h.clone(), ann));
            if rewrite {
                p.linear = p
                    .linear
                    .map(|l| node(Rule::PTensIn, &p.hyps, &p.concl, vec![l]));
            }
            Ok(p)
        }
        Shape::KBox | Shape::D => {
            let p = prem(0)?;
            let hyps: Vec<Item> = p
                .hyps
                .into_iter()
                .map(|(f, x)| (Formula::boxed(f), x.map(|x| Primed::Box(Box::new(x)))))
                .collect();
            let (rule, concl) = if d.rule.shape() == Shape::KBox {
                (Rule::PKBox, Primed::Box(Box::new(p.concl)))
            } else {
                (Rule::PD, Primed::Dia(Box::new(p.concl)))
            };
            let linear = p.linear.map(|l| node(rule, &hyps, &concl, vec![l]));
            Ok(Part {
                linear,
                hyps,
                concl,
            })
        }
        Shape::KDia | Shape::KBot => {
            let p = prem(0)?;
            let mut pool = p.hyps;
            let princ = s
                .hyps
                .iter()
                .find(|h| !matches!(h, Formula::Box(_)))
                .ok_or("kdia shape")?
                .clone();
            let body_ann = match &princ {
                Formula::Dia(a) => Some(take(&mut pool, a)?),
                _ => None,
            };
            let mut hyps: Vec<Item> = pool
                .into_iter()
                .map(|(f, x)| (Formula::boxed(f), x.map(|x| Primed::Box(Box::new(x)))))
                .collect();
            let concl = Primed::Dia(Box::new(p.concl));
            let rule = match (body_ann, &princ) {
                (None, _) => {
                    hyps.push((princ.clone(), Some(Primed::DiaBot)));
                    Rule::PKBot
                }
                (Some(Some(x)), _) => {
                    hyps.push((princ.clone(), Some(Primed::Dia(Box::new(x)))));
                    Rule::PKDia
                }
                (Some(None), Formula::Dia(a)) => match logic {
                    Logic::CK => {
                        hyps.push((princ.clone(), Some(Primed::Emptied((**a).clone()))));
                        Rule::PKBot
                    }
                    Logic::CD => {
                        hyps.push((princ.clone(), None));
                        Rule::PD
                    }
                },
                _ => unreachable!(),
            };
            let linear = p.linear.map(|l| node(rule, &hyps, &concl, vec![l]));
            Ok(Part {
                linear,
                hyps,
                concl,
            })
        }
        Shape::Hyp | Shape::DeepWDia | Shape::DeepWTens | Shape::DeepWLimp | Shape::DeepC => {
            Err(format!("rule {} cannot be decomposed", d.rule))
        }
    }
}

/// One weakening permutation step. `d` is a rule instance whose premise (the
/// right one for `⊸•`) is a weakening of an open premise; the result derives
/// the same conclusion from the same open premise with the weakening moved
/// below the rule or turned into a deep weakening.
pub fn permute(d: &Derivation, logic: Logic) -> Result<Derivation, String> {
    let wi = if d.rule.shape() == Shape::ImpL { 1 } else { 0 };
    let w = d.premises.get(wi).ok_or("missing premise")?;
    if w.rule.shape() != Shape::W {
        return Err("premise is not a weakening".into());
    }
    let top = w
        .premises
        .first()
        .ok_or("weakening without premise")?
        .clone();
    let weakened = msub(&w.sequent.hyps, &top.sequent.hyps)
        .ok_or("bad weakening")?
        .remove(0);
    let s = d.sequent.clone();
    let wk = |s: Sequent, p: Derivation| Derivation::new(Rule::PW, s, vec![p]);
    let boxed_rest = |hs: &[Formula]| {
        hs.iter()
            .map(|h| Formula::boxed(h.clone()))
            .collect::<Vec<_>>()
    };
    match d.rule.shape() {
        Shape::KBox | Shape::D => {
            let rule = if d.rule.shape() == Shape::KBox {
                Rule::PKBox
            } else {
                Rule::PD
            };
            let mid = Sequent::new(boxed_rest(&top.sequent.hyps), s.concl.clone());
            Ok(wk(s, Derivation::new(rule, mid, vec![top])))
        }
        Shape::KDia => {
            let princ = s
                .hyps
                .iter()
                .find(|h| !matches!(h, Formula::Box(_)))
                .ok_or("kdia shape")?
                .clone();
            let Formula::Dia(a) = &princ else {
                return Err("kdia shape".into());
            };
            if **a == weakened {
                let rest = boxed_rest(&top.sequent.hyps);
                match logic {
                    Logic::CK => {
                        let mut hs = rest.clone();
                        hs.push(Formula::DiaBot);
                        let mid = Sequent::new(hs, s.concl.clone());
                        let pos = s.hyps.iter().position(|h| *h == princ).expect("member");
                        Ok(Derivation::deep(
                            Rule::DeepWDia,
                            s,
                            vec![pos],
                            Derivation::new(Rule::PKBot, mid, vec![top]),
                        ))
                    }
                    Logic::CD => {
                        let mid = Sequent::new(rest, s.concl.clone());
                        Ok(wk(s, Derivation::new(Rule::PD, mid, vec![top])))
                    }
                }
            } else {
                let mut hs =
                    msub(&top.sequent.hyps, std::slice::from_ref(&**a)).ok_or("kdia premise")?;
                hs = boxed_rest(&hs);
                hs.push(princ.clone());
                let mid = Sequent::new(hs, s.concl.clone());
                Ok(wk(s, Derivation::new(Rule::PKDia, mid, vec![top])))
            }
        }
        Shape::AndL => {
            let princ = s
                .hyps
                .iter()
                .find(|h| match h {
                    Formula::And(a, b) => {
                        let rest = msub(&s.hyps, std::slice::from_ref(*h)).expect("member");
                        super::meq(
                            &[rest, vec![(**a).clone(), (**b).clone()]].concat(),
                            &w.sequent.hyps,
                        )
                    }
                    _ => false,
                })
                .ok_or("andL shape")?
                .clone();
            let Formula::And(a, b) = &princ else {
                unreachable!()
            };
            if weakened == **a || weakened == **b {
                let pos = s.hyps.iter().position(|h| *h == princ).expect("member");
                Ok(Derivation::deep(Rule::DeepWTens, s, vec![pos], top))
            } else {
                let hs = msub(&s.hyps, std::slice::from_ref(&weakened)).ok_or("andL context")?;
                let mid = Sequent::new(hs, s.concl.clone());
                Ok(wk(s, Derivation::new(Rule::PTensIn, mid, vec![top])))
            }
        }
        Shape::ImpR => {
            let Formula::Implies(a, _) = &s.concl else {
                return Err("impR shape".into());
            };
            if **a == weakened {
                Ok(Derivation::deep(
                    Rule::DeepWLimp,
                    s.clone(),
                    vec![s.hyps.len()],
                    top,
                ))
            } else {
                let hs = msub(&s.hyps, std::slice::from_ref(&weakened)).ok_or("impR context")?;
                let mid = Sequent::new(hs, s.concl.clone());
                Ok(wk(s, Derivation::new(Rule::PLimpOut, mid, vec![top])))
            }
        }
        Shape::ImpL => {
            // weaken in everything the right premise did not use
            let extra = msub(&s.hyps, &top.sequent.hyps).ok_or("impL context")?;
            let mut cur = top;
            let mut hs = cur.sequent.hyps.clone();
            for f in extra {
                hs.push(f);
                cur = wk(Sequent::new(hs.clone(), s.concl.clone()), cur);
            }
            Ok(cur)
        }
        _ => Err(format!("no permutation for {} over a weakening", d.rule)),
    }
}
