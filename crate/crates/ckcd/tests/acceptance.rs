//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any of them fails.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ckcd::arena::Arena;
use ckcd::game::{check_framed, check_wis, icp_of_wis, wis_of_icp, Clause, Strategy};
use ckcd::icp::{check_certificate, check_icp, icp_of_formula, CombinatorialProof};
use ckcd::oracle::run_corpus;
use ckcd::par::Mode;
use ckcd::sequent::{check_derivation, Bounds, Derivation, Rule, Sequent, System};
use ckcd::skew::{check_fibration, compose, fibration_of_derivation, Kind, SkewMap};
use ckcd::{arena_of, check_net, linearize, net_of_proof, parse, Formula, Logic, PartitionedArena};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn icp(f: &Formula, logic: Logic) -> Option<CombinatorialProof> {
    icp_of_formula(f, logic, Bounds::for_sequent(&Sequent::goal(f.clone()))).unwrap()
}

/// Every partition of `0..n`, as lists of classes.
fn partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = vec![vec![]];
    for v in 0..n {
        let mut next = Vec::new();
        for p in out {
            for i in 0..p.len() {
                let mut q: Vec<Vec<usize>> = p.clone();
                q[i].push(v);
                next.push(q);
            }
            let mut q = p;
            q.push(vec![v]);
            next.push(q);
        }
        out = next;
    }
    out
}

fn axioms() -> Outcome {
    let start = Instant::now();
    let f = |s: &str| parse(s).unwrap();
    let k1 = f("box(a -> b) -> box a -> box b");
    let k2 = f("box(a -> b) -> dia a -> dia b");
    let d = f("box a -> dia a");
    for logic in [Logic::CK, Logic::CD] {
        for (name, g) in [("k1", &k1), ("k2", &k2)] {
            let c = icp(g, logic).ok_or(format!("{name} unproved under {logic}"))?;
            check_icp(&c).map_err(|e| format!("{name} {logic}: {e}"))?;
            let s = wis_of_icp(&c).map_err(|e| e.to_string())?;
            check_framed(&arena_of(g), &s, logic).map_err(|e| format!("{name} {logic}: {e}"))?;
        }
    }
    let c = icp(&d, Logic::CD).ok_or("d unproved under CD")?;
    check_icp(&c).map_err(|e| e.to_string())?;
    let s = wis_of_icp(&c).map_err(|e| e.to_string())?;
    check_framed(&arena_of(&d), &s, Logic::CD).map_err(|e| e.to_string())?;
    ensure(icp(&d, Logic::CK).is_none(), || "d proved under CK".into())?;
    let ck = CombinatorialProof {
        logic: Logic::CK,
        ..c
    };
    ensure(check_icp(&ck).is_err(), || {
        "d accepted as a CK proof".into()
    })?;
    ensure(check_framed(&arena_of(&d), &s, Logic::CK).is_err(), || {
        "d framed under CK".into()
    })?;

    // the two non-theorems: no proof, no candidate net on the identity map,
    // and the one candidate strategy is refused for the expected reason
    let t = f("box a -> a");
    let conv = f("(box a -> box b) -> box(a -> b)");
    for (g, view, clause) in [
        (&t, vec![3, 2], Clause::WellFramed),
        (&conv, vec![9, 5, 3, 8], Clause::Linked),
    ] {
        let a = arena_of(g);
        for logic in [Logic::CK, Logic::CD] {
            ensure(icp(g, logic).is_none(), || {
                format!("{g} proved under {logic}")
            })?;
            for classes in partitions(a.len()) {
                let Ok(net) = PartitionedArena::new(a.clone(), classes) else {
                    continue;
                };
                let c = CombinatorialProof {
                    net,
                    conclusion: g.clone(),
                    map: SkewMap::identity(&a),
                    logic,
                };
                ensure(check_icp(&c).is_err(), || {
                    format!("{g}: accepted {:?}", c.net.canonical_classes())
                })?;
            }
            let s = Strategy::from_maximal([view.clone()]);
            check_wis(&a, &s).map_err(|e| e.to_string())?;
            let e = check_framed(&a, &s, logic)
                .err()
                .ok_or(format!("{g} framed under {logic}"))?;
            ensure(e.clause == clause, || format!("{g}: {e}"))?;
            if clause == Clause::Linked {
                let even_modal = e.witness.iter().filter(|&&id| {
                    let v = a.index_of(id).unwrap();
                    a.is_modal(v) && a.is_even(v)
                });
                ensure(even_modal.count() == 2, || {
                    format!("{g}: frame {:?}", e.witness)
                })?;
            }
        }
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("{took:.2?}"))
}

fn node(rule: Rule, s: &str, premises: Vec<Derivation>) -> Derivation {
    Derivation::new(rule, s.parse().unwrap(), premises)
}

fn sorted(mut v: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    v.sort_unstable();
    v
}

fn golden() -> Outcome {
    use Rule::*;
    let sample = parse("box((b -> b) -> a) -> dia c -> dia(a /\\ a)").unwrap();
    let c = icp(&sample, Logic::CK).ok_or("sample unproved")?;
    check_icp(&c).map_err(|e| e.to_string())?;
    let mut views = wis_of_icp(&c).map_err(|e| e.to_string())?.maximal();
    views.sort();
    ensure(
        views == vec![vec![10, 8], vec![12, 6, 5, 4], vec![13, 6, 5, 4]],
        || format!("sample views {views:?}"),
    )?;

    // c1 -> (((c6 -> box7 a8) -> box9 a10) -> b11) -> b12
    let nested_box = node(
        ImpL,
        "c, ((c -> box a) -> box a) -> b |- b",
        vec![
            node(
                ImpR,
                "c |- (c -> box a) -> box a",
                vec![node(
                    ImpL,
                    "c, c -> box a |- box a",
                    vec![
                        node(Ax, "c |- c", vec![]),
                        node(KBox, "box a |- box a", vec![node(Ax, "a |- a", vec![])]),
                    ],
                )],
            ),
            node(Ax, "b |- b", vec![]),
        ],
    );
    let lin = nested_box.polarized();
    check_derivation(&lin, System::ImllCkPol).map_err(|e| e.to_string())?;
    let names: BTreeSet<String> = collect_rules(&lin).into_iter().map(Rule::name).collect();
    ensure(
        names
            == ["ax", "kbox", "limp-in", "limp-out"]
                .map(String::from)
                .into(),
        || format!("nested box rules {names:?}"),
    )?;
    let p = net_of_proof(&lin).map_err(|e| e.to_string())?;
    ensure(
        p == net_of_proof(&nested_box).map_err(|e| e.to_string())?,
        || "nested box nets differ by rule names".into(),
    )?;
    let want = vec![vec![1, 6], vec![7, 9], vec![8, 10], vec![11, 12]];
    ensure(p.canonical_classes() == want, || {
        format!("nested box classes {:?}", p.canonical_classes())
    })?;
    for logic in [Logic::CK, Logic::CD] {
        check_net(&p, logic).map_err(|e| e.to_string())?;
    }
    let l = linearize(&p).map_err(|e| e.to_string())?;
    let (i7, o7) = l.in_out[&7];
    let (i9, o9) = l.in_out[&9];
    let family = sorted(vec![
        (6, o7),
        (o7, o9),
        (o9, 11),
        (11, 12),
        (1, 12),
        (i7, 8),
        (8, 10),
        (10, i9),
    ]);
    ensure(l.family_edges == family, || {
        format!("nested box family edges {:?}", l.family_edges)
    })?;
    ensure(l.boundary_edges == vec![(i9, 12)], || {
        format!("nested box boundary {:?}", l.boundary_edges)
    })?;
    check_net(&l.net, Logic::CK).map_err(|e| e.to_string())?;

    // box1 a2 -> box4(a6 -> b7) -> box8 b9, hypotheses in sequent order
    let k1 = node(
        KBox,
        "box(a -> b), box a |- box b",
        vec![node(
            ImpL,
            "a -> b, a |- b",
            vec![node(Ax, "a |- a", vec![]), node(Ax, "b |- b", vec![])],
        )],
    );
    check_derivation(&k1, System::ImllCk).map_err(|e| e.to_string())?;
    let p = net_of_proof(&k1).map_err(|e| e.to_string())?;
    ensure(
        p.arena == arena_of(&parse("box a -> box(a -> b) -> box b").unwrap()),
        || "k1 arena".into(),
    )?;
    let want = vec![vec![1, 4, 8], vec![2, 6], vec![7, 9]];
    ensure(p.canonical_classes() == want, || {
        format!("k1 classes {:?}", p.canonical_classes())
    })?;
    for logic in [Logic::CK, Logic::CD] {
        check_net(&p, logic).map_err(|e| e.to_string())?;
    }
    Ok("sample views, nested box net and linearization, k1 net".into())
}

fn collect_rules(d: &Derivation) -> Vec<Rule> {
    let mut out = vec![d.rule];
    for p in &d.premises {
        out.extend(collect_rules(p));
    }
    out
}

const CORPUS: usize = 600;

fn oracle() -> Outcome {
    let corpus = common::corpus(7, CORPUS);
    let mut proved = [0; 2];
    for (k, logic) in [Logic::CK, Logic::CD].into_iter().enumerate() {
        let verdicts = run_corpus(Mode::best(), &corpus, logic);
        for (f, v) in corpus.iter().zip(&verdicts) {
            ensure(v.agrees(), || format!("{logic} {f}: {v:?}"))?;
        }
        proved[k] = verdicts.iter().filter(|v| v.proved).count();
    }
    // a proof found only in CD must not pass as a CK proof
    let mut cd_only = 0;
    for f in &corpus {
        if icp(f, Logic::CK).is_none() {
            if let Some(c) = icp(f, Logic::CD) {
                cd_only += 1;
                let s = wis_of_icp(&c).map_err(|e| e.to_string())?;
                let ck = CombinatorialProof {
                    logic: Logic::CK,
                    ..c
                };
                ensure(check_icp(&ck).is_err(), || {
                    format!("{f}: CD proof accepted under CK")
                })?;
                ensure(check_framed(&arena_of(f), &s, Logic::CK).is_err(), || {
                    format!("{f}: CD strategy framed under CK")
                })?;
            }
        }
    }
    ensure(cd_only > 0, || "no CD-only formula in the corpus".into())?;
    Ok(format!(
        "{} formulas, proved CK {} CD {}, {} CD-only",
        corpus.len(),
        proved[0],
        proved[1],
        cd_only
    ))
}

fn round_trips() -> Outcome {
    let corpus = common::corpus(7, CORPUS);
    let mut n = 0;
    for logic in [Logic::CK, Logic::CD] {
        for (f, v) in corpus.iter().zip(run_corpus(Mode::best(), &corpus, logic)) {
            ensure(v.round_trips(), || format!("{logic} {f}: {v:?}"))?;
            if !v.proved {
                continue;
            }
            // the factorised proof's certificate re-checks after serialization
            let c = icp(f, logic).ok_or(format!("{f} lost its proof"))?;
            let json = serde_json::to_string(&c.to_certificate()).map_err(|e| e.to_string())?;
            let back = check_certificate(&serde_json::from_str(&json).map_err(|e| e.to_string())?)
                .map_err(|e| format!("{f}: {e}"))?;
            let s = wis_of_icp(&back).map_err(|e| e.to_string())?;
            let again = icp_of_wis(f, &s, logic).map_err(|e| format!("{f}: {e}"))?;
            check_icp(&again).map_err(|e| format!("{f}: {e}"))?;
            ensure(wis_of_icp(&again).map_err(|e| e.to_string())? == s, || {
                format!("{f}: strategy changed")
            })?;
            n += 1;
        }
    }
    Ok(format!("{n} proofs"))
}

/// `v ⊸ⁿ x` for every `n`, indexed `[v][n]`.
fn steps(a: &Arena) -> Vec<Vec<BTreeSet<usize>>> {
    (0..a.len())
        .map(|v| {
            let mut layers = vec![BTreeSet::from([v])];
            loop {
                let next: BTreeSet<usize> = layers
                    .last()
                    .unwrap()
                    .iter()
                    .flat_map(|&x| a.isucc(x).iter().copied())
                    .collect();
                if next.is_empty() {
                    break layers;
                }
                layers.push(next);
            }
        })
        .collect()
}

fn arena_laws(a: &Arena) -> Result<(), String> {
    let st = steps(a);
    let at = |v: usize, n: usize| st[v].get(n).cloned().unwrap_or_default();
    // cones: ⊸-cones reaching a common vertex are nested
    let cones: Vec<(usize, usize)> = (0..a.len())
        .flat_map(|v| (0..st[v].len()).map(move |n| (v, n)))
        .collect();
    for y in 0..a.len() {
        let above: Vec<&(usize, usize)> = cones
            .iter()
            .filter(|(v, n)| st[*v][*n].contains(&y))
            .collect();
        for (i, &&(v, n)) in above.iter().enumerate() {
            for &&(w, m) in &above[i + 1..] {
                let (c, d) = (&st[v][n], &st[w][m]);
                ensure(c.is_subset(d) || d.is_subset(c), || {
                    format!("cones ({v},{n}) ({w},{m}) at {y}")
                })?;
            }
        }
    }
    // modalities: v ↝ w share roots and forward steps, and inherit backward ones
    let depth = st.iter().map(Vec::len).max().unwrap_or(0);
    for (v, w) in a.medges() {
        ensure(a.isucc(v).is_empty() == a.isucc(w).is_empty(), || {
            format!("roots {v} {w}")
        })?;
        ensure(a.is_root(v) == a.is_root(w), || format!("is_root {v} {w}"))?;
        for n in 0..=depth {
            if n > 0 {
                ensure(at(v, n) == at(w, n), || format!("{v} ~> {w}: steps {n}"))?;
            }
            for u in 0..a.len() {
                if at(u, n).contains(&v) && n > 0 {
                    ensure(at(u, n).contains(&w), || {
                        format!("{u} -o^{n} {v} but not {w}")
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// Split a deep chain after its `k`-th rule from the top.
fn split(d: &Derivation, k: usize, len: usize) -> (Derivation, Derivation) {
    let mut nodes = Vec::new();
    let mut cur = d;
    while let Some(p) = cur.premises.first() {
        nodes.push(cur);
        cur = p;
    }
    nodes.reverse();
    // nodes[i] is the conclusion of rule i from the top
    debug_assert_eq!(nodes.len(), len);
    let mut upper = Derivation::hyp(cur.sequent.clone());
    for n in &nodes[..k] {
        upper = Derivation::deep(
            n.rule,
            n.sequent.clone(),
            n.context_path.clone().unwrap(),
            upper,
        );
    }
    let mut lower = Derivation::hyp(upper.sequent.clone());
    for n in &nodes[k..] {
        lower = Derivation::deep(
            n.rule,
            n.sequent.clone(),
            n.context_path.clone().unwrap(),
            lower,
        );
    }
    (upper, lower)
}

fn structural() -> Outcome {
    let mut rng = StdRng::seed_from_u64(11);
    let corpus = common::corpus(7, CORPUS);
    let mut pairs = 0;
    while pairs < 1000 {
        let base = &corpus[rng.gen_range(0..corpus.len())];
        let top = common::double_input(&mut rng, base);
        let steps = rng.gen_range(2..6);
        let (d, seqs) = common::deep_chain(&mut rng, &top, steps);
        let len = seqs.len() - 1;
        if len < 2 {
            continue;
        }
        let k = rng.gen_range(1..len);
        let (upper, lower) = split(&d, k, len);
        let f = fibration_of_derivation(&upper)?;
        let g = fibration_of_derivation(&lower)?;
        check_fibration(&f, Kind::Even).map_err(|e| format!("{}: {e}", upper.sequent))?;
        check_fibration(&g, Kind::Even).map_err(|e| format!("{}: {e}", lower.sequent))?;
        let gf = compose(&f, &g).map_err(|e| e.to_string())?;
        check_fibration(&gf, Kind::Even).map_err(|e| format!("composite at {}: {e}", d.sequent))?;
        ensure(gf == fibration_of_derivation(&d)?, || {
            format!("composite differs at {}", d.sequent)
        })?;
        pairs += 1;
    }

    let mut arenas = 0;
    let mut valid = Vec::new();
    for f in &corpus {
        arena_laws(&arena_of(f)).map_err(|e| format!("{f}: {e}"))?;
        arenas += 1;
        for logic in [Logic::CK, Logic::CD] {
            if let Some(c) = icp(f, logic) {
                arena_laws(&c.net.arena).map_err(|e| format!("net of {f}: {e}"))?;
                arenas += 1;
                valid.push(c.to_certificate());
            }
        }
    }

    let mut mutations = 0;
    let mut tried = HashSet::new();
    while mutations < 1000 {
        let mut c = valid[rng.gen_range(0..valid.len())].clone();
        let ids: Vec<usize> = c.vertices.iter().map(|v| v.id).collect();
        let pick = |rng: &mut StdRng| ids[rng.gen_range(0..ids.len())];
        let what = rng.gen_range(0..5);
        match what {
            0 if !c.iedges.is_empty() => {
                let i = rng.gen_range(0..c.iedges.len());
                c.iedges.remove(i);
            }
            1 if !c.medges.is_empty() => {
                let i = rng.gen_range(0..c.medges.len());
                c.medges.remove(i);
            }
            2 => {
                let e = (pick(&mut rng), pick(&mut rng));
                if c.iedges.contains(&e) {
                    continue;
                }
                c.iedges.push(e);
            }
            3 => {
                let e = (pick(&mut rng), pick(&mut rng));
                if c.medges.contains(&e) {
                    continue;
                }
                c.medges.push(e);
            }
            4 if !c.iedges.is_empty() => {
                let i = rng.gen_range(0..c.iedges.len());
                let e = c.iedges.remove(i);
                c.medges.push(e);
            }
            _ => continue,
        }
        if !tried.insert(serde_json::to_string(&c).unwrap()) {
            continue;
        }
        match check_certificate(&c) {
            Ok(_) => return Err(format!("mutation {what} of {} accepted", c.conclusion)),
            Err(e) => ensure(!e.layer.to_string().is_empty(), || "unnamed layer".into())?,
        }
        mutations += 1;
    }
    Ok(format!(
        "{pairs} composed pairs, {arenas} arenas, {mutations} mutations rejected"
    ))
}

fn identity_icp(n: usize) -> CombinatorialProof {
    let conj = || {
        (1..=n)
            .map(|i| Formula::atom(&format!("a{i}")))
            .reduce(Formula::and)
            .unwrap()
    };
    let f = Formula::implies(conj(), conj());
    let a = arena_of(&f);
    let atoms: Vec<usize> = (0..a.len()).filter(|&v| a.is_atom(v)).collect();
    let classes = (0..n).map(|i| vec![atoms[i], atoms[n + i]]).collect();
    let net = PartitionedArena::new(a.clone(), classes).unwrap();
    CombinatorialProof {
        net,
        conclusion: f,
        map: SkewMap::identity(&a),
        logic: Logic::CK,
    }
}

fn polynomial() -> Outcome {
    let mut cases = Vec::new();
    for n in (25..=200).step_by(25) {
        let c = identity_icp(n);
        let s = Instant::now();
        check_icp(&c).map_err(|e| format!("n={n}: {e}"))?;
        // batch small cases so every sample spans at least 20 ms
        let reps =
            (Duration::from_millis(20).as_nanos() / s.elapsed().as_nanos().max(1)).max(1) as u32;
        cases.push((n, c, reps, Duration::MAX));
    }
    // rounds over all sizes, so drift on a shared machine hits every size alike
    for _ in 0..7 {
        for (_, c, reps, best) in cases.iter_mut() {
            let s = Instant::now();
            for _ in 0..*reps {
                check_icp(c).unwrap();
            }
            *best = (*best).min(s.elapsed() / *reps);
        }
    }
    let points: Vec<(f64, Duration)> = cases.iter().map(|(n, _, _, t)| (*n as f64, *t)).collect();
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.as_secs_f64().ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = sxy * sxy / (sxx * syy);
    let last = points.last().unwrap().1;
    let times: Vec<String> = points.iter().map(|(n, t)| format!("{n}:{t:.1?}")).collect();
    let summary = format!(
        "exponent {slope:.2}, R² {r2:.3}, {last:.2?} at n=200 [{}]",
        times.join(" ")
    );
    ensure(
        slope <= 3.0 && r2 >= 0.98 && last <= Duration::from_secs(5),
        || summary.clone(),
    )?;
    Ok(summary)
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("axiom suite", axioms),
        ("golden examples", golden),
        ("oracle equivalence", oracle),
        ("round trips", round_trips),
        ("structural properties", structural),
        ("polynomial-time check", polynomial),
    ];
    // straight to stderr, so the lines survive output capture
    let mut out = std::io::stderr();
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let line = match run() {
            Ok(detail) => format!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed.push(*name);
                format!("FAIL {} {name}: {why}", i + 1)
            }
        };
        writeln!(out, "{line}").unwrap();
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
