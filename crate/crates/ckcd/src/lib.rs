//! Combinatorial proofs, arena nets and winning innocent strategies for the
//! constructive modal logics CK and CD.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub mod arena;
pub mod bits;
pub mod dot;
pub mod formula;
pub mod game;
pub mod icp;
pub mod net;
pub mod oracle;
pub mod par;
pub mod sequent;
pub mod skew;

pub use arena::{
    arena_of, formula_of, is_modal_arena, meeting_relation, vertex_info, Arena, Graph, Label,
};
pub use formula::{formula_tree, iso_equal, parse, polarize, Formula, Polarity};
pub use net::{
    check_net, linearize, linking_graph, net_of_proof, NetCondition, NetFailure, NetGraph,
    PartitionedArena,
};

/// The two modal logics handled throughout the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Logic {
    CK,
    CD,
}

impl fmt::Display for Logic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Logic::CK => "CK",
            Logic::CD => "CD",
        })
    }
}

impl FromStr for Logic {
    type Err = String;

    fn from_str(s: &str) -> Result<Logic, String> {
        match s {
            "CK" | "ck" => Ok(Logic::CK),
            "CD" | "cd" => Ok(Logic::CD),
            _ => Err(format!("unknown logic {s:?}, expected CK or CD")),
        }
    }
}
