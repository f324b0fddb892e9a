//! The end-to-end pipeline on one formula: search, factorise, build the
//! combinatorial proof, read off its strategy, and go back.

use crate::arena::arena_of;
use crate::formula::Formula;
use crate::game::{check_framed, icp_of_wis, wis_of_icp};
use crate::icp::{check_icp, icp_of_factorised_proof};
use crate::par::{self, Mode};
use crate::sequent::{decompose, prove, Bounds, Outcome, Sequent, System};
use crate::Logic;

/// What each stage said. Stages after a failure are `None`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub proved: bool,
    pub icp: Option<Result<(), String>>,
    pub framed: Option<Result<(), String>>,
    /// `icp_of_wis` re-checks and gives back the same strategy.
    pub round_trip: Option<Result<(), String>>,
}

impl Verdict {
    /// Search succeeds iff the proof is accepted iff its strategy is framed.
    pub fn agrees(&self) -> bool {
        let ok = |s: &Option<Result<(), String>>| matches!(s, Some(Ok(())));
        self.proved == ok(&self.icp) && self.proved == ok(&self.framed)
    }

    pub fn round_trips(&self) -> bool {
        !self.proved || matches!(self.round_trip, Some(Ok(())))
    }
}

pub fn run(f: &Formula, logic: Logic) -> Verdict {
    let s = Sequent::goal(f.clone());
    run_with(f, logic, Bounds::for_sequent(&s))
}

pub fn run_with(f: &Formula, logic: Logic, bounds: Bounds) -> Verdict {
    let s = Sequent::goal(f.clone());
    let mut v = Verdict {
        proved: false,
        icp: None,
        framed: None,
        round_trip: None,
    };
    let Outcome::Proved(d) = prove(&s, System::full(logic, true), bounds) else {
        return v;
    };
    v.proved = true;
    let c = decompose(&d, logic).and_then(|dec| {
        icp_of_factorised_proof(&dec.linear, &dec.down, logic).map_err(|e| e.to_string())
    });
    let c = match c {
        Ok(c) => c,
        Err(e) => {
            v.icp = Some(Err(e));
            return v;
        }
    };
    v.icp = Some(check_icp(&c).map_err(|e| e.to_string()));
    if v.icp != Some(Ok(())) {
        return v;
    }
    let w = match wis_of_icp(&c) {
        Ok(w) => w,
        Err(e) => {
            v.framed = Some(Err(e.to_string()));
            return v;
        }
    };
    v.framed = Some(check_framed(&arena_of(f), &w, logic).map_err(|e| e.to_string()));
    v.round_trip = Some(match icp_of_wis(f, &w, logic) {
        Ok(back) => match (check_icp(&back), wis_of_icp(&back)) {
            (Ok(()), Ok(w2)) if w2 == w => Ok(()),
            (Ok(()), Ok(_)) => Err("strategy changed".into()),
            (Err(e), _) => Err(e.to_string()),
            (_, Err(e)) => Err(e.to_string()),
        },
        Err(e) => Err(e.to_string()),
    });
    v
}

pub fn run_corpus(mode: Mode, corpus: &[Formula], logic: Logic) -> Vec<Verdict> {
    par::map(mode, corpus, |f| run(f, logic))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    #[test]
    fn axioms() {
        let k2 = parse("box(a -> b) -> dia a -> dia b").unwrap();
        for logic in [Logic::CK, Logic::CD] {
            let v = run(&k2, logic);
            assert!(v.proved && v.agrees() && v.round_trips(), "{v:?}");
        }
        let d = parse("box a -> dia a").unwrap();
        assert!(run(&d, Logic::CD).proved);
        let v = run(&d, Logic::CK);
        assert!(!v.proved && v.agrees());
    }
}
