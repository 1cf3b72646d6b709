use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;
use walrus_cli::format::{to_canonical_json, InstanceFile};
use walrus_cli::{parse_instance, parse_result, run, EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK};
use walrus_core::fixtures;
use walrus_core::MarketInstance;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn walrus(args: &[&str]) -> Output {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("walrus").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn write_instance(dir: &TempDir, name: &str, instance: &MarketInstance) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, to_canonical_json(&InstanceFile::from_instance(instance))).unwrap();
    path
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn combinatorial_solve_prices_the_unit_demand_market_at_one() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "a.json", &fixtures::instance_a());
    let out = dir.path().join("result.json");
    let run = walrus(&["solve", s(&inst), "--algorithm", "combinatorial", "-o", s(&out)]);
    assert_eq!(run.code, EXIT_OK, "{}", run.stderr);
    let result = json(&out);
    assert_eq!(result["prices"], serde_json::json!(["1/1", "1/1"]));
    assert_eq!(result["verified"], Value::Bool(true));
    assert_eq!(result["outcome"], "certified");
    assert!(result["oracle_calls"]["value"].as_u64().unwrap() > 0);

    let check = walrus(&["verify", s(&inst), s(&out)]);
    assert_eq!(check.code, EXIT_OK, "{}", check.stderr);
    assert!(check.stdout.starts_with("verified"));
}

#[test]
fn every_method_certifies_a_gross_substitutes_market() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "d.json", &fixtures::instance_d());
    for method in ["combinatorial", "ellipsoid-gs", "ellipsoid-gs-regularized", "ellipsoid-general"] {
        let out = dir.path().join(format!("{method}.json"));
        let solved = walrus(&["solve", s(&inst), "--algorithm", method, "-o", s(&out)]);
        assert_eq!(solved.code, EXIT_OK, "{method}: {}", solved.stderr);
        let checked = walrus(&["verify", s(&inst), s(&out)]);
        assert_eq!(checked.code, EXIT_OK, "{method}: {}", checked.stderr);
    }
}

#[test]
fn robust_prices_fail_on_a_tied_optimum() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "c.json", &fixtures::instance_c());
    let run = walrus(&["robust", s(&inst)]);
    assert_eq!(run.code, EXIT_NEGATIVE);
    let file: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(file["exists"], Value::Bool(false));
    let cycle = file["cycle"].as_array().unwrap();
    assert!(!cycle.is_empty());
    let total: i64 = cycle.iter().map(|arc| arc["weight"].as_i64().unwrap()).sum();
    assert_eq!(total, 0);
}

#[test]
fn robust_prices_exist_for_a_unique_optimum() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "d.json", &fixtures::instance_d());
    let run = walrus(&["robust", s(&inst)]);
    assert_eq!(run.code, EXIT_OK, "{}", run.stderr);
    let file: Value = serde_json::from_str(&run.stdout).unwrap();
    assert_eq!(file["exists"], Value::Bool(true));
    assert!(file["prices"].is_array());
}

#[test]
fn verify_rejects_a_tampered_allocation() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "a.json", &fixtures::instance_a());
    let out = dir.path().join("result.json");
    assert_eq!(walrus(&["solve", s(&inst), "-o", s(&out)]).code, EXIT_OK);
    let mut result = json(&out);
    result["allocation"] = serde_json::json!([[1, 2], [], []]);
    fs::write(&out, serde_json::to_string_pretty(&result).unwrap()).unwrap();
    let run = walrus(&["verify", s(&inst), s(&out)]);
    assert_eq!(run.code, EXIT_ERROR);
    assert!(run.stderr.contains("rejected"), "{}", run.stderr);
    assert!(run.stderr.contains("buyer 1"), "{}", run.stderr);
}

#[test]
fn verify_rejects_a_wrong_welfare() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "a.json", &fixtures::instance_a());
    let out = dir.path().join("result.json");
    assert_eq!(walrus(&["solve", s(&inst), "-o", s(&out)]).code, EXIT_OK);
    let mut result = json(&out);
    result["welfare"] = Value::String("7/1".into());
    fs::write(&out, serde_json::to_string_pretty(&result).unwrap()).unwrap();
    let run = walrus(&["verify", s(&inst), s(&out)]);
    assert_eq!(run.code, EXIT_ERROR);
    assert!(run.stderr.contains("welfare"), "{}", run.stderr);
}

#[test]
fn missing_equilibrium_is_reported_and_confirmed() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "x.json", &fixtures::complements_against_unit_demand());
    let out = dir.path().join("result.json");
    let solved = walrus(&["solve", s(&inst), "--algorithm", "ellipsoid-general", "-o", s(&out)]);
    assert_eq!(solved.code, EXIT_NEGATIVE, "{}", solved.stderr);
    let result = parse_result(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(result.prices.is_none() && result.allocation.is_none());
    let checked = walrus(&["verify", s(&inst), s(&out)]);
    assert_eq!(checked.code, EXIT_NEGATIVE, "{}", checked.stderr);
    assert!(checked.stdout.starts_with("confirmed"));
}

#[test]
fn a_false_no_equilibrium_claim_is_rejected() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "x.json", &fixtures::complements_against_unit_demand());
    let out = dir.path().join("result.json");
    walrus(&["solve", s(&inst), "--algorithm", "ellipsoid-general", "-o", s(&out)]);
    let pair = write_instance(&dir, "pair.json", &fixtures::complements_pair());
    let run = walrus(&["verify", s(&pair), s(&out)]);
    assert_eq!(run.code, EXIT_ERROR);
    assert!(run.stderr.contains("is Walrasian"), "{}", run.stderr);
}

#[test]
fn check_gs_flags_complements() {
    let dir = TempDir::new().unwrap();
    let gs = walrus(&["check-gs", s(&write_instance(&dir, "b.json", &fixtures::instance_b()))]);
    assert_eq!(gs.code, EXIT_OK, "{}", gs.stderr);
    assert!(gs.stdout.lines().all(|l| l.ends_with("gross substitutes")));
    let bad = walrus(&["check-gs", s(&write_instance(&dir, "p.json", &fixtures::complements_pair()))]);
    assert_eq!(bad.code, EXIT_NEGATIVE);
    assert!(bad.stdout.contains("exchange fails"));
}

#[test]
fn generated_files_round_trip_byte_for_byte() {
    for family in ["additive", "unit-demand", "matroid-mix", "general"] {
        for seed in ["0", "7"] {
            let gen = walrus(&["gen", "--family", family, "--items", "3", "--buyers", "3", "--max-supply", "2", "--seed", seed]);
            assert_eq!(gen.code, EXIT_OK, "{}", gen.stderr);
            let instance = parse_instance(&gen.stdout).unwrap();
            assert_eq!(to_canonical_json(&InstanceFile::from_instance(&instance)), gen.stdout, "{family} seed {seed}");
            let again = walrus(&["gen", "--family", family, "--items", "3", "--buyers", "3", "--max-supply", "2", "--seed", seed]);
            assert_eq!(again.stdout, gen.stdout);
        }
    }
}

#[test]
fn repeated_solves_write_identical_results() {
    let dir = TempDir::new().unwrap();
    let gen = walrus(&["gen", "--family", "general", "--items", "2", "--buyers", "2", "--max-value", "5", "--seed", "3"]);
    let inst = dir.path().join("g.json");
    fs::write(&inst, &gen.stdout).unwrap();
    let outputs: Vec<(i32, String, String)> = (0..2)
        .map(|k| {
            let out = dir.path().join(format!("r{k}.json"));
            let trace = dir.path().join(format!("t{k}.jsonl"));
            let run = walrus(&["solve", s(&inst), "--algorithm", "ellipsoid-general", "--seed", "9", "--trace", s(&trace), "-o", s(&out)]);
            let result = fs::read_to_string(&out).unwrap().replace(&format!("t{k}.jsonl"), "t.jsonl");
            (run.code, result, fs::read_to_string(&trace).unwrap())
        })
        .collect();
    assert_eq!(outputs[0], outputs[1]);
    assert!(!outputs[0].2.is_empty());
    for line in outputs[0].2.lines() {
        let row: Value = serde_json::from_str(line).unwrap();
        assert!(row["iteration"].is_u64());
    }
}

#[test]
fn combinatorial_trace_has_one_line_per_phase() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "b.json", &fixtures::instance_b());
    let trace = dir.path().join("trace.jsonl");
    let run = walrus(&["solve", s(&inst), "--trace", s(&trace)]);
    assert_eq!(run.code, EXIT_OK, "{}", run.stderr);
    let lines: Vec<Value> = fs::read_to_string(&trace).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), fixtures::instance_b().n());
    assert!(lines.iter().enumerate().all(|(k, row)| row["phase"] == k + 1));
}

#[test]
fn malformed_files_name_the_location() {
    let dir = TempDir::new().unwrap();
    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{\n  \"schema_version\": 1,\n  \"items\": 2,\n  \"supply\": [1, 1],\n  \"buyers\": [\n").unwrap();
    let run = walrus(&["solve", s(&broken)]);
    assert_eq!(run.code, EXIT_ERROR);
    assert!(run.stderr.contains("broken.json") && run.stderr.contains("line"), "{}", run.stderr);

    let wrong = dir.path().join("wrong.json");
    fs::write(&wrong, r#"{"schema_version":1,"items":2,"supply":[1,1],"buyers":[{"kind":"additive","weights":[1]}]}"#)
        .unwrap();
    let run = walrus(&["solve", s(&wrong)]);
    assert_eq!(run.code, EXIT_ERROR);
    assert!(run.stderr.contains("wrong.json") && run.stderr.contains("buyers[0]"), "{}", run.stderr);

    let missing = walrus(&["solve", s(&dir.path().join("absent.json"))]);
    assert_eq!(missing.code, EXIT_ERROR);
    assert!(missing.stderr.contains("absent.json"));
}

#[test]
fn bench_writes_sorted_csv_rows() {
    let run = walrus(&["bench", "--items", "2..3", "--buyers", "2", "--max-value", "10"]);
    assert_eq!(run.code, EXIT_OK, "{}", run.stderr);
    let mut lines = run.stdout.lines();
    assert_eq!(lines.next(), Some("family,items,buyers,seed,phase,value_calls"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2 + 3);
    assert!(rows.iter().all(|r| r[0] == "matroid-mix" && r[2] == "2" && r[3] == "1"));
    assert!(rows.iter().all(|r| r[5].parse::<u64>().unwrap() > 0));
    assert_eq!(walrus(&["bench", "--family", "general"]).code, EXIT_ERROR);
}

fn binary(args: &[&str], budget: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_walrus"));
    cmd.args(args);
    if let Some(b) = budget {
        cmd.env(walrus_cli::BUDGET_VAR, b);
    }
    cmd.output().unwrap()
}

#[test]
fn binary_exit_codes_match() {
    let dir = TempDir::new().unwrap();
    let c = write_instance(&dir, "c.json", &fixtures::instance_c());
    assert_eq!(binary(&["robust", s(&c)], None).status.code(), Some(EXIT_NEGATIVE));
    assert_eq!(binary(&["solve", s(&c)], None).status.code(), Some(EXIT_OK));
    assert_eq!(binary(&["frobnicate"], None).status.code(), Some(EXIT_ERROR));
}

#[test]
fn exceeding_the_budget_names_it() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "c.json", &fixtures::instance_c());
    let out = dir.path().join("result.json");
    assert!(binary(&["solve", s(&inst), "-o", s(&out)], None).status.success());
    let run = binary(&["verify", s(&inst), s(&out)], Some("1"));
    assert_eq!(run.status.code(), Some(EXIT_ERROR));
    let stderr = String::from_utf8(run.stderr).unwrap();
    assert!(stderr.contains("budget"), "{stderr}");
    let run = binary(&["verify", s(&inst), s(&out)], Some("lots"));
    assert_eq!(run.status.code(), Some(EXIT_ERROR));
    assert!(String::from_utf8(run.stderr).unwrap().contains(walrus_cli::BUDGET_VAR));
}
