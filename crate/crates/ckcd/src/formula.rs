//! Modal formulas: syntax, parsing, printing, polarities and formula trees.

use std::fmt;

use thiserror::Error;

/// A formula of constructive modal logic.
///
/// `DiaBot` is the `dia bot` placeholder produced by weakening a diamond
/// hypothesis; it is a leaf.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Atom(String),
    Implies(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Box(Box<Formula>),
    Dia(Box<Formula>),
    DiaBot,
}

impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(name.to_string())
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn boxed(a: Formula) -> Formula {
        Formula::Box(Box::new(a))
    }

    pub fn dia(a: Formula) -> Formula {
        Formula::Dia(Box::new(a))
    }

    /// Number of formula-tree nodes (a `dia bot` counts twice).
    pub fn size(&self) -> usize {
        match self {
            Formula::Atom(_) => 1,
            Formula::DiaBot => 2,
            Formula::Implies(a, b) | Formula::And(a, b) => 1 + a.size() + b.size(),
            Formula::Box(a) | Formula::Dia(a) => 1 + a.size(),
        }
    }

    /// Number of connectives and modalities.
    pub fn connectives(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::DiaBot => 1,
            Formula::Implies(a, b) | Formula::And(a, b) => 1 + a.connectives() + b.connectives(),
            Formula::Box(a) | Formula::Dia(a) => 1 + a.connectives(),
        }
    }

    pub fn modalities(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::DiaBot => 1,
            Formula::Implies(a, b) | Formula::And(a, b) => a.modalities() + b.modalities(),
            Formula::Box(a) | Formula::Dia(a) => 1 + a.modalities(),
        }
    }

    pub fn contains_diabot(&self) -> bool {
        match self {
            Formula::Atom(_) => false,
            Formula::DiaBot => true,
            Formula::Implies(a, b) | Formula::And(a, b) => {
                a.contains_diabot() || b.contains_diabot()
            }
            Formula::Box(a) | Formula::Dia(a) => a.contains_diabot(),
        }
    }

    /// Distinct atom names in order of first occurrence.
    pub fn atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<String>) {
        match self {
            Formula::Atom(a) => {
                if !out.contains(a) {
                    out.push(a.clone());
                }
            }
            Formula::DiaBot => {}
            Formula::Implies(a, b) | Formula::And(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Formula::Box(a) | Formula::Dia(a) => a.collect_atoms(out),
        }
    }

    /// Print with Unicode connectives.
    pub fn to_unicode(&self) -> String {
        let mut s = String::new();
        write_formula(self, &mut s, 0, true);
        s
    }
}

// Binding strength: implication 1, conjunction 2, prefixes and atoms 3.
fn level(f: &Formula) -> u8 {
    match f {
        Formula::Implies(..) => 1,
        Formula::And(..) => 2,
        _ => 3,
    }
}

fn write_formula(f: &Formula, out: &mut String, min: u8, unicode: bool) {
    let paren = level(f) < min;
    if paren {
        out.push('(');
    }
    match f {
        Formula::Atom(a) => out.push_str(a),
        Formula::DiaBot => out.push_str(if unicode { "◇⊥" } else { "dia bot" }),
        Formula::Implies(a, b) => {
            write_formula(a, out, 2, unicode);
            out.push_str(if unicode { " ⊃ " } else { " -> " });
            write_formula(b, out, 1, unicode);
        }
        Formula::And(a, b) => {
            write_formula(a, out, 2, unicode);
            out.push_str(if unicode { " ∧ " } else { " /\\ " });
            write_formula(b, out, 3, unicode);
        }
        Formula::Box(a) => {
            out.push_str(if unicode { "□" } else { "box " });
            write_formula(a, out, 3, unicode);
        }
        Formula::Dia(a) => {
            out.push_str(if unicode { "◇" } else { "dia " });
            write_formula(a, out, 3, unicode);
        }
    }
    if paren {
        out.push(')');
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_formula(self, &mut s, 0, false);
        f.write_str(&s)
    }
}

pub fn print(f: &Formula) -> String {
    f.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unbalanced parentheses at {pos}")]
    Unbalanced { pos: usize },
    #[error("unknown token {token:?} at {pos}")]
    UnknownToken { pos: usize, token: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Arrow,
    Wedge,
    BoxKw,
    DiaKw,
    Bot,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut toks = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                toks.push((pos, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((pos, Tok::RParen));
                i += 1;
            }
            '⊃' | '→' => {
                toks.push((pos, Tok::Arrow));
                i += 1;
            }
            '∧' => {
                toks.push((pos, Tok::Wedge));
                i += 1;
            }
            '□' => {
                toks.push((pos, Tok::BoxKw));
                i += 1;
            }
            '◇' => {
                toks.push((pos, Tok::DiaKw));
                i += 1;
            }
            '⊥' => {
                toks.push((pos, Tok::Bot));
                i += 1;
            }
            '-' if matches!(chars.get(i + 1), Some((_, '>'))) => {
                toks.push((pos, Tok::Arrow));
                i += 2;
            }
            '/' if matches!(chars.get(i + 1), Some((_, '\\'))) => {
                toks.push((pos, Tok::Wedge));
                i += 2;
            }
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                let tok = match word.as_str() {
                    "box" => Tok::BoxKw,
                    "dia" => Tok::DiaKw,
                    "bot" => Tok::Bot,
                    _ => Tok::Ident(word),
                };
                toks.push((pos, tok));
            }
            other => {
                return Err(ParseError::UnknownToken {
                    pos,
                    token: other.to_string(),
                });
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let left = self.conjunction()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.at += 1;
            let right = self.implication()?;
            return Ok(Formula::implies(left, right));
        }
        Ok(left)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut left = self.prefix()?;
        while self.peek() == Some(&Tok::Wedge) {
            self.at += 1;
            let right = self.prefix()?;
            left = Formula::and(left, right);
        }
        Ok(left)
    }

    fn prefix(&mut self) -> Result<Formula, ParseError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::BoxKw) => {
                self.at += 1;
                Ok(Formula::boxed(self.prefix()?))
            }
            Some(Tok::DiaKw) => {
                self.at += 1;
                if self.peek() == Some(&Tok::Bot) {
                    self.at += 1;
                    return Ok(Formula::DiaBot);
                }
                Ok(Formula::dia(self.prefix()?))
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                Ok(Formula::Atom(name))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.implication()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(ParseError::Unbalanced { pos });
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::Bot) => Err(ParseError::Syntax {
                pos,
                msg: "'bot' may only follow 'dia'".into(),
            }),
            Some(Tok::RParen) => Err(ParseError::Unbalanced { pos }),
            Some(t) => Err(ParseError::Syntax {
                pos,
                msg: format!("unexpected {t:?}"),
            }),
            None => Err(ParseError::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
    };
    let f = p.implication()?;
    if p.at < p.toks.len() {
        let pos = p.pos();
        return Err(match p.peek() {
            Some(Tok::RParen) => ParseError::Unbalanced { pos },
            Some(t) => ParseError::Syntax {
                pos,
                msg: format!("trailing {t:?}"),
            },
            None => unreachable!(),
        });
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Output (`∘`) or input (`•`) polarity.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Out,
    In,
}

impl Polarity {
    pub fn flip(self) -> Polarity {
        match self {
            Polarity::Out => Polarity::In,
            Polarity::In => Polarity::Out,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Polarity::Out => '∘',
            Polarity::In => '•',
        }
    }
}

/// A formula with the polarity of every occurrence, indexed by preorder id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarizedFormula {
    pub formula: Formula,
    pub polarities: Vec<Polarity>,
}

impl PolarizedFormula {
    pub fn root(&self) -> Polarity {
        self.polarities[0]
    }

    pub fn depolarize(&self) -> &Formula {
        &self.formula
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolarityError {
    #[error("dia bot at output polarity (occurrence {0})")]
    DiaBotAtOutput(usize),
}

/// Assign forced polarities: the left of an implication flips, all else keeps.
pub fn polarize(f: &Formula, root: Polarity) -> Result<PolarizedFormula, PolarityError> {
    fn go(f: &Formula, p: Polarity, out: &mut Vec<Polarity>) -> Result<(), PolarityError> {
        let id = out.len();
        out.push(p);
        match f {
            Formula::Atom(_) => Ok(()),
            Formula::DiaBot => {
                if p == Polarity::Out {
                    return Err(PolarityError::DiaBotAtOutput(id));
                }
                out.push(p);
                Ok(())
            }
            Formula::Implies(a, b) => {
                go(a, p.flip(), out)?;
                go(b, p, out)
            }
            Formula::And(a, b) => {
                go(a, p, out)?;
                go(b, p, out)
            }
            Formula::Box(a) | Formula::Dia(a) => go(a, p, out),
        }
    }
    let mut polarities = Vec::with_capacity(f.size());
    go(f, root, &mut polarities)?;
    Ok(PolarizedFormula {
        formula: f.clone(),
        polarities,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Imp,
    And,
    Atom(String),
    Box,
    Dia,
    Bot,
}

impl NodeKind {
    pub fn is_vertex(&self) -> bool {
        matches!(self, NodeKind::Atom(_) | NodeKind::Box | NodeKind::Dia)
    }

    pub fn is_modal(&self) -> bool {
        matches!(self, NodeKind::Box | NodeKind::Dia)
    }
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub kind: NodeKind,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// The formula tree; node ids are preorder indices.
#[derive(Clone, Debug)]
pub struct FormulaTree {
    pub nodes: Vec<TreeNode>,
}

pub fn formula_tree(f: &Formula) -> FormulaTree {
    fn go(f: &Formula, parent: Option<usize>, nodes: &mut Vec<TreeNode>) -> usize {
        let id = nodes.len();
        let kind = match f {
            Formula::Atom(a) => NodeKind::Atom(a.clone()),
            Formula::Implies(..) => NodeKind::Imp,
            Formula::And(..) => NodeKind::And,
            Formula::Box(_) => NodeKind::Box,
            Formula::Dia(_) | Formula::DiaBot => NodeKind::Dia,
        };
        nodes.push(TreeNode {
            kind,
            parent,
            children: Vec::new(),
        });
        let kids: Vec<usize> = match f {
            Formula::Atom(_) => vec![],
            Formula::DiaBot => {
                let b = nodes.len();
                nodes.push(TreeNode {
                    kind: NodeKind::Bot,
                    parent: Some(id),
                    children: vec![],
                });
                vec![b]
            }
            Formula::Implies(a, b) | Formula::And(a, b) => {
                let l = go(a, Some(id), nodes);
                let r = go(b, Some(id), nodes);
                vec![l, r]
            }
            Formula::Box(a) | Formula::Dia(a) => vec![go(a, Some(id), nodes)],
        };
        nodes[id].children = kids;
        id
    }
    let mut nodes = Vec::with_capacity(f.size());
    go(f, None, &mut nodes);
    FormulaTree { nodes }
}

impl FormulaTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn kind(&self, v: usize) -> &NodeKind {
        &self.nodes[v].kind
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.nodes[v].parent
    }

    /// Ancestors of `v`, nearest first, excluding `v`.
    pub fn ancestors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = self.nodes[v].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].parent;
        }
        out
    }

    pub fn is_ancestor(&self, a: usize, v: usize) -> bool {
        let mut cur = Some(v);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.nodes[c].parent;
        }
        false
    }

    pub fn lca(&self, a: usize, b: usize) -> usize {
        let mut cur = Some(a);
        while let Some(c) = cur {
            if self.is_ancestor(c, b) {
                return c;
            }
            cur = self.nodes[c].parent;
        }
        0
    }

    /// Rightmost descendants of `v`: walk right through implications, both ways
    /// through conjunctions, and into modal bodies (the modal node included).
    pub fn rightmost(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.rightmost_into(v, &mut out);
        out.sort_unstable();
        out
    }

    fn rightmost_into(&self, v: usize, out: &mut Vec<usize>) {
        let n = &self.nodes[v];
        match n.kind {
            NodeKind::Imp => self.rightmost_into(n.children[1], out),
            NodeKind::And => {
                self.rightmost_into(n.children[0], out);
                self.rightmost_into(n.children[1], out);
            }
            NodeKind::Atom(_) => out.push(v),
            NodeKind::Box | NodeKind::Dia => {
                out.push(v);
                self.rightmost_into(n.children[0], out);
            }
            NodeKind::Bot => {}
        }
    }

    /// For an implication node, the rightmost descendants of its left child.
    pub fn second_rightmost(&self, v: usize) -> Vec<usize> {
        match self.nodes[v].kind {
            NodeKind::Imp => self.rightmost(self.nodes[v].children[0]),
            _ => Vec::new(),
        }
    }

    /// Nearest modal ancestor (the innermost modality whose scope holds `v`).
    pub fn modal_parent(&self, v: usize) -> Option<usize> {
        self.ancestors(v)
            .into_iter()
            .find(|&a| self.nodes[a].kind.is_modal())
    }

    /// Count of ancestors `a` of `v` such that `v` sits under the left child
    /// of an implication `a`.
    pub fn left_count(&self, v: usize) -> usize {
        let mut count = 0;
        let mut child = v;
        while let Some(p) = self.nodes[child].parent {
            if self.nodes[p].kind == NodeKind::Imp && self.nodes[p].children[0] == child {
                count += 1;
            }
            child = p;
        }
        count
    }
}

/// Decide `f ~ g` (equal arenas up to renaming) through a normal form that
/// quotients associativity and commutativity of conjunction and currying.
pub fn iso_equal(f: &Formula, g: &Formula) -> bool {
    canonical_key(f) == canonical_key(g)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Comp {
    hyps: Vec<String>,
    head: String,
}

impl Comp {
    fn render(&self) -> String {
        if self.hyps.is_empty() {
            self.head.clone()
        } else {
            format!("{{{}}}>{}", self.hyps.join(","), self.head)
        }
    }
}

fn canon(f: &Formula) -> Vec<Comp> {
    let mut out = match f {
        Formula::Atom(a) => vec![Comp {
            hyps: vec![],
            head: format!("'{a}"),
        }],
        Formula::DiaBot => vec![Comp {
            hyps: vec![],
            head: "D[]".into(),
        }],
        Formula::Box(a) => vec![Comp {
            hyps: vec![],
            head: format!("B[{}]", render_conj(&canon(a))),
        }],
        Formula::Dia(a) => vec![Comp {
            hyps: vec![],
            head: format!("D[{}]", render_conj(&canon(a))),
        }],
        Formula::And(a, b) => {
            let mut v = canon(a);
            v.extend(canon(b));
            v
        }
        Formula::Implies(a, b) => {
            let hs: Vec<String> = canon(a).iter().map(Comp::render).collect();
            let body = canon(b);
            if body.len() == 1 {
                let mut hyps = hs;
                hyps.extend(body[0].hyps.iter().cloned());
                hyps.sort();
                vec![Comp {
                    hyps,
                    head: body[0].head.clone(),
                }]
            } else {
                let mut hyps = hs;
                hyps.sort();
                vec![Comp {
                    hyps,
                    head: format!("&[{}]", render_conj(&body)),
                }]
            }
        }
    };
    out.sort();
    out
}

fn render_conj(cs: &[Comp]) -> String {
    let mut v: Vec<String> = cs.iter().map(Comp::render).collect();
    v.sort();
    v.join(",")
}

/// Canonical string of the `~` class of `f`.
pub fn canonical_key(f: &Formula) -> String {
    render_conj(&canon(f))
}
