//! Combinatorial proofs: a valid arena net with an even skew fibration onto
//! the arena of a formula.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::{arena_of, Arena, Graph, GraphVertex};
use crate::formula::{parse, Formula};
use crate::net::{check_net, net_of_proof, NetGraph, PartitionedArena};
use crate::sequent::{
    check_derivation, decompose, prove, Bounds, Derivation, Outcome, Sequent, System,
};
use crate::skew::{check_fibration, fibration_of_derivation, Kind, MapGraph, SkewMap};
use crate::Logic;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorialProof {
    pub net: PartitionedArena,
    pub conclusion: Formula,
    /// From `net.arena` to `arena_of(conclusion)`.
    pub map: SkewMap,
    pub logic: Logic,
}

/// Certificate JSON: the net schema, the target arena and assignment of the
/// map schema, the conclusion and the logic. `source` is optional; when
/// present it must equal the net's arena.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub vertices: Vec<GraphVertex>,
    pub iedges: Vec<(usize, usize)>,
    pub medges: Vec<(usize, usize)>,
    #[serde(default)]
    pub classes: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Graph>,
    pub target: Graph,
    pub assign: Vec<(usize, usize)>,
    pub conclusion: String,
    pub logic: Logic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Arena,
    Net,
    Fibration,
    Diabot,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Arena => "arena",
            Layer::Net => "net",
            Layer::Fibration => "fibration",
            Layer::Diabot => "diabot",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Error)]
#[error("{layer}: {reason} at {witness:?}")]
pub struct IcpFailure {
    pub layer: Layer,
    pub reason: String,
    pub witness: Vec<usize>,
}

impl IcpFailure {
    fn new(layer: Layer, reason: impl ToString, witness: Vec<usize>) -> IcpFailure {
        IcpFailure {
            layer,
            reason: reason.to_string(),
            witness,
        }
    }
}

impl CombinatorialProof {
    /// Assemble the layers of a certificate without checking validity beyond
    /// what parsing needs. Failures are arena-layer failures.
    pub fn from_certificate(c: &Certificate) -> Result<CombinatorialProof, IcpFailure> {
        let arena_err = |e: &dyn ToString| IcpFailure::new(Layer::Arena, e.to_string(), vec![]);
        let ng = NetGraph {
            vertices: c.vertices.clone(),
            iedges: c.iedges.clone(),
            medges: c.medges.clone(),
            classes: c.classes.clone(),
        };
        let net = PartitionedArena::from_net_graph(&ng).map_err(|e| arena_err(&e))?;
        let conclusion = parse(&c.conclusion).map_err(|e| arena_err(&e))?;
        let mg = MapGraph {
            source: ng.graph(),
            target: c.target.clone(),
            assign: c.assign.clone(),
        };
        if let Some(s) = &c.source {
            let sa = Arena::from_graph(s).map_err(|e| arena_err(&e))?;
            if sa != net.arena {
                return Err(IcpFailure::new(
                    Layer::Arena,
                    "map source differs from the net arena",
                    vec![],
                ));
            }
        }
        let map = SkewMap::from_graph(&mg).map_err(|e| arena_err(&e))?;
        Ok(CombinatorialProof {
            net,
            conclusion,
            map,
            logic: c.logic,
        })
    }

    pub fn to_certificate(&self) -> Certificate {
        let ng = self.net.to_net_graph();
        let mg = self.map.to_graph();
        Certificate {
            vertices: ng.vertices,
            iedges: ng.iedges,
            medges: ng.medges,
            classes: ng.classes,
            source: None,
            target: mg.target,
            assign: mg.assign,
            conclusion: self.conclusion.to_string(),
            logic: self.logic,
        }
    }
}

impl Serialize for CombinatorialProof {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_certificate().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CombinatorialProof {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<CombinatorialProof, D::Error> {
        let c = Certificate::deserialize(d)?;
        CombinatorialProof::from_certificate(&c).map_err(serde::de::Error::custom)
    }
}

/// Check all layers in order: arenas, `◇⊥`-freeness, net, fibration.
pub fn check_icp(c: &CombinatorialProof) -> Result<(), IcpFailure> {
    if c.map.source.as_ref() != Some(&c.net.arena) {
        return Err(IcpFailure::new(
            Layer::Arena,
            "map source differs from the net arena",
            vec![],
        ));
    }
    if c.map.target != arena_of(&c.conclusion) {
        return Err(IcpFailure::new(
            Layer::Arena,
            "map target is not the arena of the conclusion",
            vec![],
        ));
    }
    if c.conclusion.contains_diabot() {
        return Err(IcpFailure::new(
            Layer::Diabot,
            "conclusion contains dia bot",
            vec![],
        ));
    }
    check_net(&c.net, c.logic).map_err(|e| IcpFailure::new(Layer::Net, e.condition, e.witness))?;
    check_fibration(&c.map, Kind::Even)
        .map_err(|e| IcpFailure::new(Layer::Fibration, e.clause, e.witness))
}

/// Parse and check a certificate.
pub fn check_certificate(c: &Certificate) -> Result<CombinatorialProof, IcpFailure> {
    let p = CombinatorialProof::from_certificate(c)?;
    check_icp(&p)?;
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("precondition: {0}")]
pub struct Precondition(pub String);

/// The combinatorial proof of a factorised proof: the net of the linear part
/// and the fibration of the deep part.
pub fn icp_of_factorised_proof(
    linear: &Derivation,
    down: &Derivation,
    logic: Logic,
) -> Result<CombinatorialProof, Precondition> {
    let pre = |m: String| Precondition(m);
    let ok = [System::linear(logic, true), System::linear(logic, false)]
        .iter()
        .any(|&s| check_derivation(linear, s).is_ok());
    if !ok {
        let e = check_derivation(linear, System::linear(logic, linear.rule.is_polarized()))
            .unwrap_err();
        return Err(pre(format!("linear part: {e}")));
    }
    check_derivation(down, System::DownLj).map_err(|e| pre(format!("deep part: {e}")))?;
    if linear.sequent != *down.top() {
        return Err(pre(
            "the deep part does not start at the linear part's conclusion".into(),
        ));
    }
    let conclusion = down.sequent.formula();
    if conclusion.contains_diabot() {
        return Err(pre("conclusion contains dia bot".into()));
    }
    let net = net_of_proof(linear).map_err(|e| pre(e.to_string()))?;
    let map = fibration_of_derivation(down).map_err(pre)?;
    Ok(CombinatorialProof {
        net,
        conclusion,
        map,
        logic,
    })
}

/// Search for a proof of `f`, factorise it and build its combinatorial proof.
/// `None` when the search fails within bounds.
pub fn icp_of_formula(
    f: &Formula,
    logic: Logic,
    bounds: Bounds,
) -> Result<Option<CombinatorialProof>, Precondition> {
    let s = Sequent::goal(f.clone());
    match prove(&s, System::full(logic, true), bounds) {
        Outcome::Proved(d) => {
            let dec = decompose(&d, logic).map_err(Precondition)?;
            icp_of_factorised_proof(&dec.linear, &dec.down, logic).map(Some)
        }
        _ => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequent::Rule;

    fn icp(f: &str, logic: Logic) -> CombinatorialProof {
        let f = parse(f).unwrap();
        icp_of_formula(&f, logic, Bounds::for_sequent(&Sequent::goal(f.clone())))
            .unwrap()
            .unwrap()
    }

    #[test]
    fn sample_icp_is_accepted() {
        let c = icp("box((b -> b) -> a) -> dia c -> dia(a /\\ a)", Logic::CK);
        assert_eq!(check_icp(&c), Ok(()));
        assert_eq!(c.net.arena.len(), 11);
    }

    #[test]
    fn k1_with_identity_map() {
        let d = crate::sequent::tests::k1_linear();
        let c =
            icp_of_factorised_proof(&d, &Derivation::hyp(d.sequent.clone()), Logic::CK).unwrap();
        assert_eq!(c.map, SkewMap::identity(&c.net.arena));
        assert_eq!(check_icp(&c), Ok(()));
        assert_eq!(
            check_icp(&CombinatorialProof {
                logic: Logic::CD,
                ..c.clone()
            }),
            Ok(())
        );
        // split the modal class
        let mut classes: Vec<Vec<usize>> = c.net.classes().to_vec();
        let modal = classes.iter().position(|k| k.len() == 3).unwrap();
        let last = classes[modal].pop().unwrap();
        classes.push(vec![last]);
        let net = PartitionedArena::new(c.net.arena.clone(), classes).unwrap();
        let bad = CombinatorialProof { net, ..c };
        assert_eq!(check_icp(&bad).unwrap_err().layer, Layer::Net);
    }

    #[test]
    fn axiom_icp() {
        let s: Sequent = "a |- a".parse().unwrap();
        let ax = Derivation::new(Rule::PAx, s.clone(), vec![]);
        let c = icp_of_factorised_proof(&ax, &Derivation::hyp(s), Logic::CK).unwrap();
        assert_eq!(c.net.arena.len(), 2);
        assert_eq!(c.conclusion, parse("a -> a").unwrap());
        assert_eq!(check_icp(&c), Ok(()));
    }

    #[test]
    fn certificate_round_trip() {
        let c = icp("box(a -> b) -> dia a -> dia b", Logic::CK);
        let cert = c.to_certificate();
        assert_eq!(check_certificate(&cert).unwrap(), c);
        let mut broken = cert.clone();
        broken.conclusion = "box(a -> b) -> dia a -> dia c".into();
        assert_eq!(check_certificate(&broken).unwrap_err().layer, Layer::Arena);
        let mut diabot = cert;
        diabot.conclusion = "dia bot -> dia bot".into();
        diabot.target = arena_of(&parse("dia bot -> dia bot").unwrap()).to_graph();
        assert!(check_certificate(&diabot).is_err());
    }

    #[test]
    fn logic_tag_is_not_retried() {
        let c = icp("box a -> dia a", Logic::CD);
        assert_eq!(check_icp(&c), Ok(()));
        let ck = CombinatorialProof {
            logic: Logic::CK,
            ..c
        };
        assert_eq!(check_icp(&ck).unwrap_err().layer, Layer::Net);
    }
}
