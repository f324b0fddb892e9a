//! Shared generators: a seeded formula corpus and random deep derivations.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use ckcd::sequent::{polarity_at, replace_at, subformula, Derivation, Rule, Sequent};
use ckcd::{Formula, Polarity};

pub const ATOMS: [&str; 3] = ["a", "b", "c"];

pub fn within_limits(f: &Formula) -> bool {
    f.connectives() <= 12 && f.modalities() <= 3 && f.atoms().len() <= 3 && !f.contains_diabot()
}

/// A random formula with about `budget` connectives.
pub fn random_formula(rng: &mut StdRng, budget: usize) -> Formula {
    if budget == 0 {
        return Formula::atom(ATOMS[rng.gen_range(0..3)]);
    }
    match rng.gen_range(0..10) {
        0..=3 => {
            let l = rng.gen_range(0..budget);
            Formula::implies(random_formula(rng, l), random_formula(rng, budget - 1 - l))
        }
        4..=5 => {
            let l = rng.gen_range(0..budget);
            Formula::and(random_formula(rng, l), random_formula(rng, budget - 1 - l))
        }
        6..=7 => Formula::boxed(random_formula(rng, budget - 1)),
        _ => Formula::dia(random_formula(rng, budget - 1)),
    }
}

/// Instances of valid schemas, most of them theorems of CK, some only of CD.
fn schema(rng: &mut StdRng) -> Formula {
    let small = |rng: &mut StdRng| {
        let b = rng.gen_range(0..3);
        random_formula(rng, b)
    };
    let (a, b, c) = (small(rng), small(rng), small(rng));
    let imp = Formula::implies;
    let and = Formula::and;
    let bx = Formula::boxed;
    let di = Formula::dia;
    match rng.gen_range(0..14) {
        0 => imp(a.clone(), a),
        1 => imp(a.clone(), and(a.clone(), a)),
        2 => imp(and(a, b.clone()), b),
        3 => imp(bx(imp(a.clone(), b.clone())), imp(bx(a), bx(b))),
        4 => imp(bx(imp(a.clone(), b.clone())), imp(di(a), di(b))),
        5 => imp(bx(a.clone()), di(a)),
        6 => imp(a.clone(), imp(b, a)),
        7 => imp(imp(a.clone(), b.clone()), imp(imp(b, c.clone()), imp(a, c))),
        8 => imp(bx(a.clone()), bx(and(a.clone(), a))),
        9 => imp(di(a.clone()), di(and(a.clone(), a))),
        10 => imp(and(bx(a.clone()), bx(b.clone())), bx(and(a, b))),
        11 => imp(imp(imp(b.clone(), b), a.clone()), and(a.clone(), a)),
        12 => imp(
            bx(imp(a.clone(), b.clone())),
            imp(di(a.clone()), di(and(b.clone(), b))),
        ),
        _ => imp(a.clone(), imp(imp(a, b.clone()), b)),
    }
}

/// `n` distinct formulas within the corpus limits, half random and half
/// schema instances.
pub fn corpus(seed: u64, n: usize) -> Vec<Formula> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let f = if out.len() % 2 == 0 {
            let b = rng.gen_range(1..=9);
            random_formula(&mut rng, b)
        } else {
            schema(&mut rng)
        };
        if within_limits(&f) && seen.insert(f.to_string()) {
            out.push(f);
        }
    }
    out
}

/// Context paths of the end formula `|- f` (into position 0).
fn paths(f: &Formula) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    match f {
        Formula::Implies(a, b) | Formula::And(a, b) => {
            out.extend(paths(a).into_iter().map(|p| [vec![0], p].concat()));
            out.extend(paths(b).into_iter().map(|p| [vec![1], p].concat()));
        }
        Formula::Box(a) | Formula::Dia(a) => {
            out.extend(paths(a).into_iter().map(|p| [vec![0], p].concat()))
        }
        _ => {}
    }
    out
}

/// A deep derivation with premise `|- top` of up to `steps` contractions and
/// weakenings, built downwards. Returns it with its sequents, top first.
pub fn deep_chain(rng: &mut StdRng, top: &Formula, steps: usize) -> (Derivation, Vec<Sequent>) {
    let mut formulas = vec![top.clone()];
    let mut rules = Vec::new();
    for _ in 0..steps {
        let filler = Formula::atom(ATOMS[rng.gen_range(0..3)]);
        let cur = formulas.last().unwrap().clone();
        let Some((rule, path, next)) = step_down(rng, &cur, &filler) else {
            break;
        };
        rules.push((rule, path));
        formulas.push(next);
    }
    let seqs: Vec<Sequent> = formulas.iter().map(|f| Sequent::goal(f.clone())).collect();
    let mut d = Derivation::hyp(seqs[0].clone());
    for (i, (rule, path)) in rules.into_iter().enumerate() {
        d = Derivation::deep(rule, seqs[i + 1].clone(), [vec![0], path].concat(), d);
    }
    (d, seqs)
}

/// The conclusion of one deep rule with premise `|- f`: contract an input
/// `A ∧ A`, weaken an input `A` to `A ∧ x`, or an output `A` to `x ⊃ A`.
fn step_down(
    rng: &mut StdRng,
    f: &Formula,
    filler: &Formula,
) -> Option<(Rule, Vec<usize>, Formula)> {
    let ps = paths(f);
    let p = ps.choose(rng)?;
    let x = subformula(f, p)?.clone();
    let (rule, new) = match (&x, polarity_at(f, p, Polarity::Out)?) {
        (Formula::And(l, r), Polarity::In) if l == r => (Rule::DeepC, (**l).clone()),
        (_, Polarity::In) => (Rule::DeepWTens, Formula::and(x.clone(), filler.clone())),
        (_, Polarity::Out) => (Rule::DeepWLimp, Formula::implies(filler.clone(), x.clone())),
    };
    Some((rule, p.clone(), replace_at(f, p, new)?))
}

/// `f` with one input subformula `A` doubled to `A ∧ A`, so that a chain
/// starting there can contract.
pub fn double_input(rng: &mut StdRng, f: &Formula) -> Formula {
    let mut ps: Vec<Vec<usize>> = paths(f)
        .into_iter()
        .filter(|p| polarity_at(f, p, Polarity::Out) == Some(Polarity::In))
        .collect();
    ps.shuffle(rng);
    match ps.first() {
        Some(p) => {
            let x = subformula(f, p).unwrap().clone();
            replace_at(f, p, Formula::and(x.clone(), x)).unwrap()
        }
        None => f.clone(),
    }
}
