use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use ckcd::arena::{arena_of, Arena, Graph};
use ckcd::game::{
    check_framed, check_wis, icp_of_wis, wis_of_icp, FramedView, GameFailure, StrategyFile,
};
use ckcd::icp::{
    check_certificate, check_icp, icp_of_factorised_proof, Certificate, CombinatorialProof,
};
use ckcd::net::{check_net, NetGraph, PartitionedArena};
use ckcd::par::{self, Mode};
use ckcd::sequent::{
    check_derivation, decompose, prove, Bounds, Derivation, Outcome, Sequent, System,
};
use ckcd::skew::{MapGraph, SkewMap};
use ckcd::{dot, parse, Formula, Logic};

#[derive(Parser)]
#[command(
    name = "ckcd",
    version,
    about = "Check and convert combinatorial proofs and strategies for CK and CD"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Logic: CK or CD.
    #[arg(long, global = true)]
    logic: Option<Logic>,
    /// Sequent system, e.g. LCK, IMLL-CD, downLJ.
    #[arg(long, global = true)]
    system: Option<System>,
    /// Search depth for `prove`.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Reuses of one implication per branch for `prove`.
    #[arg(long, global = true)]
    contraction_budget: Option<usize>,
    /// Run the verb on every `.json` file of a directory.
    #[arg(long, global = true)]
    dir: Option<PathBuf>,
    /// Write the output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Indented JSON.
    #[arg(long, global = true)]
    pretty: bool,
}

#[derive(Subcommand)]
enum Verb {
    /// Check a certificate (`--logic` overrides its logic tag).
    CheckIcp { input: Option<String> },
    /// Check a strategy file; with `--logic` also check that it is framed.
    CheckWis { input: Option<String> },
    /// Check a net file under `--logic`.
    CheckNet { input: Option<String> },
    /// Check a derivation file in `--system`.
    CheckProof { input: Option<String> },
    /// The arena of a formula.
    ToArena { input: Option<String> },
    /// The strategy of a certificate.
    ToWis { input: Option<String> },
    /// A certificate from a strategy file, a derivation file or a formula.
    ToIcp { input: Option<String> },
    /// Factorise a polarized derivation into linear and deep parts.
    Decompose { input: Option<String> },
    /// Search for a derivation of a formula or sequent.
    Prove { input: Option<String> },
    /// Graphviz output for a formula or any of the JSON formats.
    EmitDot { input: Option<String> },
}

impl Verb {
    fn input(&self) -> Option<&str> {
        match self {
            Verb::CheckIcp { input }
            | Verb::CheckWis { input }
            | Verb::CheckNet { input }
            | Verb::CheckProof { input }
            | Verb::ToArena { input }
            | Verb::ToWis { input }
            | Verb::ToIcp { input }
            | Verb::Decompose { input }
            | Verb::Prove { input }
            | Verb::EmitDot { input } => input.as_deref(),
        }
    }
}

/// What a verb produced, and the exit code it stands for.
enum Report {
    Json(Value),
    Text(String),
    Rejected(Value),
    Error(String),
}

impl Report {
    fn code(&self) -> u8 {
        match self {
            Report::Json(_) | Report::Text(_) => 0,
            Report::Rejected(_) => 1,
            Report::Error(_) => 2,
        }
    }

    fn value(&self) -> Value {
        match self {
            Report::Json(v) | Report::Rejected(v) => v.clone(),
            Report::Text(t) => Value::String(t.clone()),
            Report::Error(e) => json!({"ok": false, "error": e}),
        }
    }

    fn render(&self, pretty: bool) -> String {
        match self {
            Report::Text(t) => t.clone(),
            _ if pretty => serde_json::to_string_pretty(&self.value()).expect("json") + "\n",
            _ => serde_json::to_string(&self.value()).expect("json") + "\n",
        }
    }
}

type Res<T> = Result<T, Report>;

fn io(e: impl ToString) -> Report {
    Report::Error(e.to_string())
}

fn reject(layer: &str, reason: impl ToString, witness: &[usize]) -> Report {
    Report::Rejected(
        json!({"ok": false, "layer": layer, "reason": reason.to_string(), "witness": witness}),
    )
}

fn game_reject(layer: &str, e: &GameFailure) -> Report {
    Report::Rejected(json!({
        "ok": false,
        "layer": layer,
        "clause": e.clause,
        "reason": e.clause.to_string(),
        "view": e.view,
        "witness": e.witness,
    }))
}

fn to_json<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

/// File contents when `input` names a file, else the text itself.
fn read(input: Option<&str>) -> Res<String> {
    let input = input.ok_or_else(|| io("missing input"))?;
    if Path::new(input).is_file() {
        fs::read_to_string(input).map_err(|e| io(format!("{input}: {e}")))
    } else if input.ends_with(".json") {
        Err(io(format!("{input}: no such file")))
    } else {
        Ok(input.to_string())
    }
}

fn json_of(text: &str) -> Res<Value> {
    serde_json::from_str(text).map_err(|e| io(format!("invalid JSON: {e}")))
}

fn from_value<T: serde::de::DeserializeOwned>(v: Value, what: &str) -> Res<T> {
    serde_json::from_value(v).map_err(|e| io(format!("not a {what}: {e}")))
}

fn formula(text: &str) -> Res<Formula> {
    parse(text.trim()).map_err(|e| io(format!("formula: {e}")))
}

fn strategy(v: Value) -> Res<(Formula, StrategyFile)> {
    let file: StrategyFile = from_value(v, "strategy file")?;
    let f = file
        .formula()
        .map_err(|e| io(format!("strategy arena: {e}")))?;
    Ok((f, file))
}

fn certificate(v: Value, logic: Option<Logic>) -> Res<Result<CombinatorialProof, Report>> {
    let mut cert: Certificate = from_value(v, "certificate")?;
    if let Some(l) = logic {
        cert.logic = l;
    }
    Ok(check_certificate(&cert).map_err(|e| reject(&e.layer.to_string(), &e.reason, &e.witness)))
}

enum Input {
    Formula(Formula),
    Arena(Graph),
    Net(NetGraph),
    Map(MapGraph),
    Certificate(Value),
    Strategy(Value),
    Derivation(Value),
}

/// Tell the JSON formats apart by their keys.
fn classify(text: &str) -> Res<Input> {
    if !text.trim_start().starts_with('{') {
        return formula(text).map(Input::Formula);
    }
    let v = json_of(text)?;
    let has = |k: &str| v.get(k).is_some();
    Ok(if has("maximal_views") {
        Input::Strategy(v)
    } else if has("conclusion") {
        Input::Certificate(v)
    } else if has("rule") {
        Input::Derivation(v)
    } else if has("assign") {
        Input::Map(from_value(v, "map")?)
    } else if has("classes") {
        Input::Net(from_value(v, "net")?)
    } else if has("vertices") {
        Input::Arena(from_value(v, "arena")?)
    } else {
        return Err(io("unrecognised JSON input"));
    })
}

fn ok() -> Report {
    Report::Json(json!({"ok": true}))
}

struct Ctx {
    logic: Option<Logic>,
    system: Option<System>,
    depth: Option<usize>,
    budget: Option<usize>,
}

impl Ctx {
    fn bounds(&self, s: &Sequent) -> Bounds {
        let mut b = Bounds::for_sequent(s);
        if let Some(d) = self.depth {
            b.depth = d;
        }
        if let Some(c) = self.budget {
            b.contraction_budget = c;
        }
        b
    }

    fn logic_or_ck(&self) -> Logic {
        self.logic.unwrap_or(Logic::CK)
    }
}

fn run(verb: &Verb, input: Option<&str>, cx: &Ctx) -> Report {
    match dispatch(verb, input, cx) {
        Ok(r) | Err(r) => r,
    }
}

fn dispatch(verb: &Verb, input: Option<&str>, cx: &Ctx) -> Res<Report> {
    let text = read(input)?;
    match verb {
        Verb::CheckIcp { .. } => {
            let c = certificate(json_of(&text)?, cx.logic)?;
            Ok(c.map(|_| ok()).unwrap_or_else(|r| r))
        }
        Verb::CheckWis { .. } => {
            let (f, file) = strategy(json_of(&text)?)?;
            let a = arena_of(&f);
            let s = file.strategy();
            if let Err(e) = check_wis(&a, &s) {
                return Ok(game_reject("wis", &e));
            }
            if let Some(l) = cx.logic {
                if let Err(e) = check_framed(&a, &s, l) {
                    return Ok(game_reject("framed", &e));
                }
            }
            Ok(ok())
        }
        Verb::CheckNet { .. } => {
            let ng: NetGraph = from_value(json_of(&text)?, "net")?;
            let p = PartitionedArena::from_net_graph(&ng).map_err(io)?;
            let logic = cx.logic.ok_or_else(|| io("check-net needs --logic"))?;
            Ok(match check_net(&p, logic) {
                Ok(()) => ok(),
                Err(e) => reject("net", e.condition, &e.witness),
            })
        }
        Verb::CheckProof { .. } => {
            let d: Derivation = from_value(json_of(&text)?, "derivation")?;
            let system = cx.system.ok_or_else(|| io("check-proof needs --system"))?;
            Ok(match check_derivation(&d, system) {
                Ok(()) => ok(),
                Err(e) => reject("derivation", &e, &e.node),
            })
        }
        Verb::ToArena { .. } => Ok(Report::Json(to_json(
            &arena_of(&formula(&text)?).to_graph(),
        ))),
        Verb::ToWis { .. } => {
            let c = match certificate(json_of(&text)?, cx.logic)? {
                Ok(c) => c,
                Err(r) => return Ok(r),
            };
            let s = wis_of_icp(&c).map_err(io)?;
            Ok(Report::Json(to_json(&s.to_file(&c.conclusion))))
        }
        Verb::ToIcp { .. } => to_icp(classify(&text)?, cx),
        Verb::Decompose { .. } => {
            let d: Derivation = from_value(json_of(&text)?, "derivation")?;
            Ok(match decompose(&d, cx.logic_or_ck()) {
                Ok(dec) => Report::Json(to_json(&dec)),
                Err(e) => reject("decompose", e, &[]),
            })
        }
        Verb::Prove { .. } => {
            let s = match text.parse::<Sequent>() {
                Ok(s) => s,
                Err(_) => Sequent::goal(formula(&text)?),
            };
            let system = cx
                .system
                .unwrap_or_else(|| System::full(cx.logic_or_ck(), false));
            let bounds = cx.bounds(&s);
            Ok(match prove(&s, system, bounds) {
                Outcome::Proved(d) => Report::Json(to_json(&d)),
                Outcome::Unproven => Report::Rejected(json!({
                    "ok": false,
                    "layer": "search",
                    "reason": "unproven at bounds",
                    "bounds": bounds,
                    "witness": [],
                })),
                Outcome::Refuted => reject("search", "refuted: the search space is exhausted", &[]),
            })
        }
        Verb::EmitDot { .. } => emit_dot(classify(&text)?),
    }
}

fn to_icp(input: Input, cx: &Ctx) -> Res<Report> {
    let logic = cx.logic_or_ck();
    let c = match input {
        Input::Strategy(v) => {
            let (f, file) = strategy(v)?;
            match icp_of_wis(&f, &file.strategy(), logic) {
                Ok(c) => c,
                Err(e) => return Ok(reject("strategy", e, &[])),
            }
        }
        Input::Derivation(v) => {
            let d: Derivation = from_value(v, "derivation")?;
            let dec = match decompose(&d, logic) {
                Ok(dec) => dec,
                Err(e) => return Ok(reject("decompose", e, &[])),
            };
            match icp_of_factorised_proof(&dec.linear, &dec.down, logic) {
                Ok(c) => c,
                Err(e) => return Ok(reject("proof", e, &[])),
            }
        }
        Input::Formula(f) => {
            let s = Sequent::goal(f.clone());
            match ckcd::icp::icp_of_formula(&f, logic, cx.bounds(&s)) {
                Ok(Some(c)) => c,
                Ok(None) => return Ok(reject("search", "unproven at bounds", &[])),
                Err(e) => return Ok(reject("proof", e, &[])),
            }
        }
        _ => {
            return Err(io(
                "to-icp reads a strategy file, a derivation file or a formula",
            ))
        }
    };
    Ok(match check_icp(&c) {
        Ok(()) => Report::Json(to_json(&c.to_certificate())),
        Err(e) => reject(&e.layer.to_string(), &e.reason, &e.witness),
    })
}

fn emit_dot(input: Input) -> Res<Report> {
    let arena = |g: &Graph| Arena::from_graph(g).map_err(io);
    Ok(Report::Text(match input {
        Input::Formula(f) => dot::arena(&arena_of(&f)),
        Input::Arena(g) => dot::arena(&arena(&g)?),
        Input::Net(ng) => dot::net(&PartitionedArena::from_net_graph(&ng).map_err(io)?),
        Input::Map(mg) => dot::fibration(&SkewMap::from_graph(&mg).map_err(io)?),
        Input::Certificate(v) => {
            let cert: Certificate = from_value(v, "certificate")?;
            let c = CombinatorialProof::from_certificate(&cert).map_err(io)?;
            dot::net(&c.net) + &dot::fibration(&c.map)
        }
        Input::Strategy(v) => {
            let (f, file) = strategy(v)?;
            let a = arena_of(&f);
            let mut out = String::new();
            for view in &file.maximal_views {
                match FramedView::of(&a, view) {
                    Ok(fv) => out.push_str(&dot::framed_view(&a, &fv)),
                    Err(e) => return Ok(game_reject("framed", &e)),
                }
            }
            out
        }
        Input::Derivation(_) => {
            return Err(io("emit-dot does not render derivations; use to-icp first"))
        }
    }))
}

/// Run over every `.json` file of `dir` in parallel, one report line each.
fn batch(verb: &Verb, dir: &Path, cx: &Ctx) -> (u8, String) {
    let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => {
            return (
                2,
                Report::Error(format!("{}: {e}", dir.display())).render(false),
            )
        }
    };
    files.sort();
    let reports = par::map(Mode::best(), &files, |p| run(verb, p.to_str(), cx));
    let code = reports.iter().map(Report::code).max().unwrap_or(0);
    let mut out = String::new();
    for (p, r) in files.iter().zip(&reports) {
        let line = json!({"file": p.display().to_string(), "exit": r.code(), "report": r.value()});
        out.push_str(&serde_json::to_string(&line).expect("json"));
        out.push('\n');
    }
    (code, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cx = Ctx {
        logic: cli.logic,
        system: cli.system,
        depth: cli.depth,
        budget: cli.contraction_budget,
    };
    let (code, text) = match &cli.dir {
        Some(dir) => batch(&cli.verb, dir, &cx),
        None => {
            let r = run(&cli.verb, cli.verb.input(), &cx);
            (r.code(), r.render(cli.pretty))
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("{}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code)
}
