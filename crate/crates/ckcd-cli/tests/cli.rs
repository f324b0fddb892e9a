use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

use ckcd::arena::arena_of;
use ckcd::game::{wis_of_icp, StrategyFile};
use ckcd::icp::{check_certificate, Certificate};
use ckcd::sequent::{decompose, Derivation};
use ckcd::{dot, parse, Logic};

fn data(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/data");
    p.push(name);
    p.to_str().unwrap().to_string()
}

fn ckcd(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ckcd"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn cert(name: &str) -> Certificate {
    serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap()
}

#[test]
fn check_icp_accepts_k1_under_both_logics() {
    for logic in ["CK", "CD"] {
        let (code, out) = ckcd(&["check-icp", &data("k1.icp.json"), "--logic", logic]);
        assert_eq!(code, 0, "{out}");
        assert_eq!(json(&out), json(r#"{"ok":true}"#));
    }
}

#[test]
fn check_icp_reports_layer() {
    let (code, out) = ckcd(&["check-icp", &data("d.icp.json"), "--logic", "CK"]);
    assert_eq!(code, 1);
    assert_eq!(out.lines().count(), 1);
    let v = json(&out);
    assert_eq!(v["ok"], false);
    assert_eq!(v["layer"], "net");
    assert!(v["witness"].is_array());
}

#[test]
fn to_wis_gives_the_three_views() {
    let (code, out) = ckcd(&["to-wis", &data("sample.icp.json")]);
    assert_eq!(code, 0);
    let file: StrategyFile = serde_json::from_str(&out).unwrap();
    assert_eq!(file.maximal_views.len(), 3);
    let c = check_certificate(&cert("sample.icp.json")).unwrap();
    let lib = wis_of_icp(&c).unwrap().to_file(&c.conclusion);
    assert_eq!(file, lib);
}

#[test]
fn prove_reports_unproven() {
    let (code, out) = ckcd(&["prove", "box a -> a", "--system", "LCK", "--depth", "10"]);
    assert_eq!(code, 1);
    let v = json(&out);
    assert_eq!(v["ok"], false);
    assert_eq!(v["reason"], "unproven at bounds");
}

#[test]
fn prove_emits_a_checked_derivation() {
    let (code, out) = ckcd(&["prove", "box(a -> b) -> dia a -> dia b", "--system", "LCK"]);
    assert_eq!(code, 0);
    let d: Derivation = serde_json::from_str(&out).unwrap();
    assert_eq!(d.sequent.to_string(), "|- box (a -> b) -> dia a -> dia b");
    std::fs::write(std::env::temp_dir().join("ckcd-k2.lck.json"), &out).unwrap();
    let path = std::env::temp_dir().join("ckcd-k2.lck.json");
    let (code, out) = ckcd(&["check-proof", path.to_str().unwrap(), "--system", "LCK"]);
    assert_eq!((code, json(&out)), (0, json(r#"{"ok":true}"#)));
    // contraction is not linear
    let (_, out) = ckcd(&["prove", "a -> a /\\ a", "--system", "LCK"]);
    std::fs::write(&path, &out).unwrap();
    assert_eq!(
        ckcd(&["check-proof", path.to_str().unwrap(), "--system", "LCK"]).0,
        0
    );
    let (code, out) = ckcd(&["check-proof", path.to_str().unwrap(), "--system", "IMLL-CK"]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["layer"], "derivation");
}

#[test]
fn check_wis_and_framing() {
    let (code, _) = ckcd(&["check-wis", &data("sample.wis.json"), "--logic", "CK"]);
    assert_eq!(code, 0);
    let (code, out) = ckcd(&["check-wis", &data("box-a-a.wis.json")]);
    assert_eq!(code, 0, "{out}");
    let (code, out) = ckcd(&["check-wis", &data("box-a-a.wis.json"), "--logic", "CK"]);
    assert_eq!(code, 1);
    assert_eq!(json(&out)["clause"], "well-framed");
    assert_eq!(
        ckcd(&["check-wis", &data("d.wis.json"), "--logic", "CD"]).0,
        0
    );
    assert_eq!(
        ckcd(&["check-wis", &data("d.wis.json"), "--logic", "CK"]).0,
        1
    );
}

#[test]
fn to_icp_from_strategy_round_trips() {
    let (code, out) = ckcd(&["to-icp", &data("sample.wis.json"), "--logic", "CK"]);
    assert_eq!(code, 0, "{out}");
    let path = std::env::temp_dir().join("ckcd-sample-back.icp.json");
    std::fs::write(&path, &out).unwrap();
    let (_, views) = ckcd(&["to-wis", path.to_str().unwrap()]);
    let original = std::fs::read_to_string(data("sample.wis.json")).unwrap();
    assert_eq!(json(&views), json(&original));
}

#[test]
fn check_net_reads_the_net_part() {
    let (code, _) = ckcd(&["check-net", &data("k1.icp.json"), "--logic", "CK"]);
    assert_eq!(code, 0);
    let (code, _) = ckcd(&["check-net", &data("k1.icp.json")]);
    assert_eq!(code, 2);
}

#[test]
fn decompose_matches_the_library() {
    let (code, out) = ckcd(&["decompose", &data("contract.lj.json"), "--logic", "CK"]);
    assert_eq!(code, 0);
    let d: Derivation =
        serde_json::from_str(&std::fs::read_to_string(data("contract.lj.json")).unwrap()).unwrap();
    let lib = serde_json::to_value(decompose(&d, Logic::CK).unwrap()).unwrap();
    assert_eq!(json(&out), lib);
}

#[test]
fn to_arena_and_dot() {
    let f = "box a -> dia a";
    let (code, out) = ckcd(&["to-arena", f]);
    assert_eq!(code, 0);
    assert_eq!(
        json(&out),
        serde_json::to_value(arena_of(&parse(f).unwrap()).to_graph()).unwrap()
    );
    let (code, out) = ckcd(&["emit-dot", f]);
    assert_eq!(code, 0);
    assert_eq!(out, dot::arena(&arena_of(&parse(f).unwrap())));
    let (code, out) = ckcd(&["emit-dot", &data("sample.wis.json")]);
    assert_eq!(code, 0);
    assert_eq!(out.matches("digraph framed_view").count(), 3);
    let (code, out) = ckcd(&["emit-dot", &data("sample.icp.json")]);
    assert_eq!(code, 0);
    assert!(out.contains("digraph net") && out.contains("cluster_source"));
}

#[test]
fn batch_over_a_directory() {
    let (code, out) = ckcd(&["check-icp", "--dir", &data("batch")]);
    assert_eq!(code, 1);
    let lines: Vec<Value> = out.lines().map(json).collect();
    assert_eq!(lines.len(), 5);
    let rejected: Vec<&Value> = lines.iter().filter(|l| l["exit"] == 1).collect();
    assert_eq!(rejected.len(), 1);
    assert!(rejected[0]["file"]
        .as_str()
        .unwrap()
        .ends_with("k1-split.icp.json"));
    assert_eq!(rejected[0]["report"]["layer"], "net");
}

#[test]
fn parse_errors_exit_2() {
    assert_eq!(ckcd(&["to-arena", "a -> "]).0, 2);
    assert_eq!(ckcd(&["check-icp", "missing.json"]).0, 2);
    assert_eq!(ckcd(&["check-proof", &data("k1.imll.json")]).0, 2);
}

#[test]
fn out_and_pretty() {
    let path = std::env::temp_dir().join("ckcd-out.json");
    let (code, stdout) = ckcd(&[
        "to-arena",
        "a -> a",
        "--out",
        path.to_str().unwrap(),
        "--pretty",
    ]);
    assert_eq!((code, stdout.as_str()), (0, ""));
    let written = std::fs::read_to_string(&path).unwrap();
    assert!(written.lines().count() > 1);
}
