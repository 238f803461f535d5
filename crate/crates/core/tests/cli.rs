use std::path::PathBuf;
use std::process::Command;

use jamin::cli::{self, Output, EXIT_OK, EXIT_USAGE, EXIT_VERDICT};
use serde_json::Value;

fn jamin(args: &[&str]) -> Output {
    cli::run(std::iter::once("jamin").chain(args.iter().copied()))
}

fn schema(name: &str) -> Value {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas");
    let text = std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Runs with `--json`, validates against the command's schema and returns
/// the report.
fn json_report(name: &str, args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = jamin(&all);
    let v: Value = serde_json::from_str(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}{}", out.stdout, out.stderr));
    let s = schema(name);
    let validator = jsonschema::validator_for(&s).unwrap();
    let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{v:#}");
    assert_eq!(v["schema_version"], 1);
    (out.code, v)
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("jamin-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

const LEAKY: &str = "
export fn lookup(reg u64 tab, reg u64 s) -> reg u64 {
    reg u64 x;
    s &= 15;
    x = [tab + 8 * s];
    return x;
}
";

#[test]
fn safety_reports_ranges() {
    let out = jamin(&[
        "safety",
        "corpus/poly1305_avx2.jz",
        "--pointer",
        "out,in,k",
        "--track",
        "inlen",
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out.stdout.contains("range(out) = out + [0; 16)\n"));
    assert!(out.stdout.contains("range(in) = in + [0; inlen)\n"));
    let (code, v) = json_report(
        "safety",
        &[
            "safety",
            "corpus/poly1305_ref.jz",
            "--pointer",
            "out,in,k",
            "--track",
            "inl",
        ],
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["verdict"], "safe");
    assert_eq!(v["ranges"][0]["line"], "range(out) = out + [0; 16)");
    assert_eq!(v["tracked"][0], "inlen");
}

#[test]
fn ct_accepts_aliases_and_agrees_with_json() {
    let args = [
        "ct",
        "corpus/poly1305_avx2.jz",
        "--entry",
        "poly1305",
        "--public",
        "out,inn,inl,k",
        "--trials",
        "20",
    ];
    let out = jamin(&args);
    assert_eq!(out.code, EXIT_OK, "{}{}", out.stdout, out.stderr);
    assert!(out.stdout.contains("verdict: secure"));
    let (code, v) = json_report("ct", &args);
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["verdict"], "secure");
    assert_eq!(v["admitted"], true);
}

#[test]
fn ct_finds_planted_leak_and_writes_witness() {
    let dir = scratch("ct");
    let file = dir.join("leaky.jz");
    std::fs::write(&file, LEAKY).unwrap();
    let wdir = dir.join("witness");
    let f = file.to_str().unwrap();
    let args = [
        "ct",
        f,
        "--public",
        "tab",
        "--public-region",
        "tab=0x1000:128",
        "--trials",
        "100",
        "--witness-dir",
        wdir.to_str().unwrap(),
    ];
    let out = jamin(&args);
    assert_eq!(out.code, EXIT_VERDICT, "{}{}", out.stdout, out.stderr);
    assert!(out.stdout.contains("static: not admitted"));
    assert!(out.stdout.contains("verdict: insecure"));
    for w in ["a.txt", "b.txt", "divergence.txt"] {
        assert!(wdir.join(w).exists(), "{w}");
    }
    let div = std::fs::read_to_string(wdir.join("divergence.txt")).unwrap();
    assert!(div.contains("position"));
    let (code, v) = json_report("ct", &args);
    assert_eq!(code, EXIT_VERDICT);
    assert_eq!(v["dynamic"]["status"], "insecure");
    assert!(v["inferred"].as_array().unwrap().iter().any(|x| x == "s"));
    // With `s` public the lookup is constant time.
    let args = [
        "ct",
        f,
        "--public",
        "tab,s",
        "--public-region",
        "tab=0x1000:128",
        "--trials",
        "50",
    ];
    assert_eq!(jamin(&args).code, EXIT_OK);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn run_round_trips_memory() {
    let dir = scratch("run");
    let dump = dir.join("m.hex");
    let d = dump.to_str().unwrap();
    let out = jamin(&[
        "run",
        "corpus/store2.jz",
        "--u64",
        "0x1000",
        "7",
        "9",
        "--region",
        "0x1000:16",
        "--trace",
        "--mem-out",
        d,
    ]);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    assert!(out
        .stdout
        .contains("LeakAddr [0]\nLeakAddr [4096]\nLeakAddr [1]\nLeakAddr [4104]\n"));
    let text = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(
        text,
        "0000000000001000: 07 00 00 00 00 00 00 00 09 00 00 00 00 00 00 00\n"
    );
    let (code, v) = json_report(
        "run",
        &[
            "run",
            "corpus/memcpy.jz",
            "--u64",
            "0x2000",
            "0x1000",
            "16",
            "--mem-in",
            d,
            "--region",
            "0x2000:16",
        ],
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["status"], "ok");
    let (code, v) = json_report(
        "run",
        &[
            "run",
            "corpus/store2.jz",
            "--u64",
            "0x1000",
            "1",
            "2",
            "--region",
            "0x1000:8",
        ],
    );
    assert_eq!(code, EXIT_VERDICT);
    assert_eq!(v["status"], "unsafe");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn difftest_chain_and_mismatch() {
    let (code, v) = json_report(
        "difftest",
        &[
            "difftest",
            "corpus/gimli_ref.jz",
            "corpus/gimli_sse.jz",
            "--runs",
            "5",
            "--seed",
            "3",
        ],
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["shape"], "gimli");
    assert_eq!(v["pairs"].as_array().unwrap().len(), 2);
    let dir = scratch("diff");
    let src = jamin::primitives::program_source("gimli_ref").unwrap();
    let bad = src.replacen("0x9e377900", "0x9e377901", 1);
    assert_ne!(bad, src);
    let file = dir.join("gimli_bad.jz");
    std::fs::write(&file, bad).unwrap();
    let (code, v) = json_report(
        "difftest",
        &[
            "difftest",
            file.to_str().unwrap(),
            "--shape",
            "gimli",
            "--runs",
            "5",
        ],
    );
    assert_eq!(code, EXIT_VERDICT);
    assert_eq!(v["verdict"], "mismatch");
    assert!(v["counterexample"].is_object());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn isa_listing() {
    let out = jamin(&["isa", "--list"]);
    assert_eq!(out.code, EXIT_OK);
    let n = jamin::isa::Registry::standard().len();
    assert_eq!(out.stdout.lines().count(), n);
    assert!(out.stdout.lines().any(|l| l.starts_with("x86_VPSHUFB_256")));
    let (_, v) = json_report("isa", &["isa", "--list"]);
    assert_eq!(v["instructions"].as_array().unwrap().len(), n);
    assert_eq!(jamin(&["isa"]).code, EXIT_USAGE);
    assert_eq!(jamin(&["isa", "NOPE"]).code, EXIT_USAGE);
}

#[test]
fn bench_rows() {
    let (code, v) = json_report(
        "bench",
        &[
            "bench",
            "chacha20_scalar",
            "chacha20_avx2_big",
            "--sizes",
            "0,4096",
        ],
    );
    assert_eq!(code, EXIT_OK);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["bytes"], 0);
    assert!(rows[0]["steps_per_byte"].is_null());
    assert!(rows.iter().all(|r| r["matches_spec"] == true));
    let spb = |i: usize| rows[i]["steps_per_byte"].as_f64().unwrap();
    assert!(spb(3) < spb(1));
    assert_eq!(jamin(&["bench", "nope"]).code, EXIT_USAGE);
    assert_eq!(jamin(&["bench", "store2"]).code, EXIT_USAGE);
}

#[test]
fn usage_errors_exit_two() {
    let out = jamin(&["ct", "does/not/exist.jz"]);
    assert_eq!(out.code, EXIT_USAGE);
    assert!(out.stderr.contains("does/not/exist.jz"));
    let (code, v) = json_report("error", &["safety", "missing.jz"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(v["error"].as_str().unwrap().contains("missing.jz"));
    assert_eq!(jamin(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(
        jamin(&["run", "corpus/store2.jz", "--u64", "1"]).code,
        EXIT_USAGE
    );
    assert_eq!(
        jamin(&["run", "corpus/store2.jz", "--entry", "nope"]).code,
        EXIT_USAGE
    );
    assert_eq!(
        jamin(&["ct", "corpus/store2.jz", "--public", "zzz"]).code,
        EXIT_USAGE
    );
    let dir = scratch("parse");
    let file = dir.join("bad.jz");
    std::fs::write(&file, "fn f( {").unwrap();
    assert_eq!(jamin(&["safety", file.to_str().unwrap()]).code, EXIT_USAGE);
    assert_eq!(
        jamin(&["run", "corpus/store2.jz", "--region", "12"]).code,
        EXIT_USAGE
    );
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_jamin");
    let st = Command::new(bin)
        .args(["safety", "corpus/store2.jz"])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&st.stdout).contains("range(p) = p + [0; 16)"));
    let st = Command::new(bin).args(["run", "nope.jz"]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_USAGE));
    let st = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_OK));
}

#[test]
fn corpus_override_from_environment() {
    let dir = scratch("env");
    let src = jamin::primitives::program_source("store2").unwrap();
    std::fs::write(dir.join("store2.jz"), src.replace("[p + 8]", "[p + 16]")).unwrap();
    let st = Command::new(env!("CARGO_BIN_EXE_jamin"))
        .env("JAMIN_CORPUS", &dir)
        .args(["safety", "store2"])
        .output()
        .unwrap();
    assert!(
        String::from_utf8_lossy(&st.stdout).contains("range(p) = p + [0; 24)"),
        "{}",
        String::from_utf8_lossy(&st.stdout)
    );
    std::fs::remove_dir_all(dir).unwrap();
}
