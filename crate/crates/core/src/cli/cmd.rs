//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::opts::{
    parse_bytes, parse_names, parse_range, parse_region, parse_u64, resolve_name, resolve_names,
};
use super::{
    load, BenchArgs, CliError, CtArgs, DiffArgs, IsaArgs, Report, RunArgs, SafetyArgs, EXIT_OK,
    EXIT_VERDICT, SCHEMA_VERSION,
};
use crate::interp::{ArrayBuf, Machine, Options, Val};
use crate::ir::VTy;
use crate::isa::{self, Descriptor, Registry};
use crate::leakage::{
    ct_check, infer_public, ArgGen, Harness, Inputs, PublicSpec, RegionGen, RegionLen, Verdict,
};
use crate::mem::Memory;
use crate::primitives::{
    hop_difftest, load_program, program_meta, vectors::to_hex, Hop, HopChain, PrimInput, Shape,
};
use crate::safety::{analyze, check_safety};
use crate::word::{Width, Word};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    }
}

fn code(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_VERDICT
    }
}

pub(super) fn run(a: RunArgs) -> Result<Report, CliError> {
    let l = load(&a.file)?;
    let entry = l.entry(a.entry.as_deref())?;
    let sig = &l.tp.info(&entry).expect("checked entry").sig;
    let want: usize = sig
        .params
        .iter()
        .map(|(_, _, ty)| match ty {
            VTy::Array(_, n) => *n,
            _ => 1,
        })
        .sum();
    if a.args.len() != want {
        return Err(usage(format!(
            "`{entry}` takes {want} values, got {}",
            a.args.len()
        )));
    }
    let fit = |name: &str, w: Width, v: u64| {
        if w.bits() < 64 && v >> w.bits() != 0 {
            Err(usage(format!(
                "{v:#x} does not fit the {}-bit `{name}`",
                w.bits()
            )))
        } else {
            Ok(Word::from_u64(w, v))
        }
    };
    let mut vals = a.args.iter().copied();
    let mut args = Vec::new();
    for (name, _, ty) in &sig.params {
        args.push(match ty {
            VTy::Word(w) => Val::Word(fit(name, *w, vals.next().expect("counted"))?),
            VTy::Bool => Val::Bool(vals.next().expect("counted") != 0),
            VTy::Array(w, n) => {
                let ws = vals
                    .by_ref()
                    .take(*n)
                    .map(|v| fit(name, *w, v))
                    .collect::<Result<Vec<_>, _>>()?;
                Val::Arr(Box::new(ArrayBuf::from_words(*w, &ws)))
            }
            VTy::Int => Val::Int(vals.next().expect("counted") as i128),
        });
    }
    let mut mem = match &a.mem_in {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Memory::from_hex_dump(&text).map_err(|e| CliError::Parse {
                path: p.display().to_string(),
                msg: e.to_string(),
            })?
        }
        None => Memory::new(),
    };
    for r in &a.region {
        let r = parse_region(r)?;
        let RegionLen::Fixed(len) = r.len else {
            return Err(usage("run regions need a numeric length"));
        };
        mem.add_region(r.base, len)
            .map_err(|e| usage(e.to_string()))?;
    }
    for b in &a.bytes {
        let (base, bytes) = parse_bytes(b)?;
        mem.add_region_bytes(base, &bytes)
            .map_err(|e| usage(e.to_string()))?;
    }
    let opts = Options {
        budget: a.budget,
        trace: a.trace,
        ..Options::default()
    };
    let m = Machine::new(&l.tp);
    let mut text = String::new();
    match m.run(&entry, args, mem, opts) {
        Ok(o) => {
            let results: Vec<String> = o.results.iter().map(|v| v.to_string()).collect();
            for (i, r) in results.iter().enumerate() {
                let _ = writeln!(text, "result[{i}] = {r}");
            }
            let _ = writeln!(text, "steps = {}", o.steps);
            let trace: Vec<String> = o.trace.iter().map(|e| e.to_string()).collect();
            for e in &trace {
                let _ = writeln!(text, "{e}");
            }
            if let Some(p) = &a.mem_out {
                std::fs::write(p, o.memory.to_hex_dump()).map_err(|e| io_err(p, e))?;
            }
            text.push_str("status: ok\n");
            Ok(Report {
                code: EXIT_OK,
                text,
                json: json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "run",
                    "file": l.path,
                    "entry": entry,
                    "status": "ok",
                    "results": results,
                    "steps": o.steps,
                    "trace": if a.trace { json!(trace) } else { Value::Null },
                }),
            })
        }
        Err(e) => {
            let _ = writeln!(text, "error: {e}");
            text.push_str("status: unsafe\n");
            Ok(Report {
                code: EXIT_VERDICT,
                text,
                json: json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": "run",
                    "file": l.path,
                    "entry": entry,
                    "status": "unsafe",
                    "error": e.to_string(),
                }),
            })
        }
    }
}

/// A harness from `--secret-region`, `--public-region` and `--range`.
fn custom_harness(
    a: &CtArgs,
    params: &[String],
    spec: &mut PublicSpec,
) -> Result<Harness, CliError> {
    let mut h = Harness::default();
    let all = a
        .secret_region
        .iter()
        .map(|s| (s, false))
        .chain(a.public_region.iter().map(|s| (s, true)));
    for (i, (s, public)) in all.enumerate() {
        let r = parse_region(s)?;
        let name = r
            .name
            .map_or_else(|| format!("r{i}"), |n| resolve_name(&n, params));
        let len = match r.len {
            RegionLen::Param { name, add } => RegionLen::Param {
                name: resolve_name(&name, params),
                add,
            },
            l => l,
        };
        if h.regions.iter().any(|x| x.name == name) {
            return Err(usage(format!("region `{name}` given twice")));
        }
        if public {
            spec.regions.insert(name.clone());
        }
        h.regions.push(RegionGen {
            name,
            base: r.base,
            len,
            init: true,
        });
    }
    let mut ranges = Vec::new();
    for s in &a.range {
        let (n, lo, hi) = parse_range(s)?;
        let n = resolve_name(&n, params);
        if !params.contains(&n) {
            return Err(usage(format!("`{n}` is not a parameter")));
        }
        ranges.push((n, lo, hi));
    }
    for p in params {
        let g = if h.regions.iter().any(|r| &r.name == p) {
            ArgGen::Region(p.clone())
        } else {
            match ranges.iter().find(|(n, _, _)| n == p) {
                Some((_, lo, hi)) if lo == hi => ArgGen::Const(*lo),
                Some((_, lo, hi)) => ArgGen::Range { lo: *lo, hi: *hi },
                None => ArgGen::Random,
            }
        };
        h.args.push((p.clone(), g));
    }
    Ok(h)
}

fn names_json(s: &BTreeSet<String>) -> Value {
    json!(s.iter().collect::<Vec<_>>())
}

fn write_witness(
    dir: &std::path::Path,
    a: &Inputs,
    b: &Inputs,
    text: &str,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (f, body) in [
        ("a.txt", a.to_string()),
        ("b.txt", b.to_string()),
        ("divergence.txt", text.to_string()),
    ] {
        let p = dir.join(f);
        std::fs::write(&p, body).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

pub(super) fn ct(a: CtArgs) -> Result<Report, CliError> {
    let l = load(&a.file)?;
    let entry = l.entry(a.entry.as_deref())?;
    let params = l.params(&entry);
    let sig = &l.tp.info(&entry).expect("checked entry").sig;
    let meta = l.meta_for(&entry);
    let custom = !a.secret_region.is_empty() || !a.public_region.is_empty() || !a.range.is_empty();
    let mut spec = PublicSpec::default();
    let harness = match meta {
        Some(m) if !custom => m.harness(a.max_len.unwrap_or_else(|| m.default_max_len())),
        _ => custom_harness(&a, &params, &mut spec)?,
    };
    let public = match (&a.public, meta) {
        (Some(p), _) => resolve_names(&parse_names(p), &params),
        (None, Some(m)) => m.public.iter().map(|s| s.to_string()).collect(),
        (None, None) => Vec::new(),
    };
    for n in public {
        let is_region = harness.regions.iter().any(|r| r.name == n);
        if params.contains(&n) {
            spec.params.insert(n.clone());
        }
        if is_region && !params.contains(&n) {
            spec.regions.insert(n.clone());
        }
        if !params.contains(&n) && !is_region {
            return Err(usage(format!("`{n}` is neither a parameter nor a region")));
        }
    }
    harness.validate(sig).map_err(|e| usage(e.to_string()))?;
    let inferred = infer_public(&l.tp, &entry).map_err(|e| usage(e.to_string()))?;
    let admitted = spec.admits(&inferred, &harness);
    let m = Machine::new(&l.tp);
    let verdict = ct_check(&m, &entry, &harness, &spec, a.trials, a.seed)
        .map_err(|e| usage(e.to_string()))?;
    let secure = admitted && verdict.is_secure();
    let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
    let mut text = String::new();
    let _ = writeln!(
        text,
        "ct {} entry {entry} seed {} trials {}",
        l.path, a.seed, a.trials
    );
    let _ = writeln!(text, "public: {}", join(&spec.params));
    if !spec.regions.is_empty() {
        let _ = writeln!(text, "public regions: {}", join(&spec.regions));
    }
    let _ = writeln!(text, "inferred: {}", join(&inferred));
    let _ = writeln!(
        text,
        "static: {}",
        if admitted { "admitted" } else { "not admitted" }
    );
    let dynamic = match &verdict {
        Verdict::Secure { trials } => {
            let _ = writeln!(text, "dynamic: no divergence in {trials} trials");
            json!({ "status": "secure", "trials": trials })
        }
        Verdict::Insecure(w) => {
            let show = |e: &Option<crate::leakage::LeakEvent>| {
                e.as_ref()
                    .map_or_else(|| "end of trace".into(), |e| e.to_string())
            };
            let div = format!(
                "trial {} position {}\nleft: {}\nright: {}\n",
                w.trial,
                w.position,
                show(&w.left),
                show(&w.right)
            );
            let _ = write!(text, "dynamic: leakage diverges at {div}");
            let _ = writeln!(text, "input a:\n{}input b:\n{}", w.a, w.b);
            if let Some(d) = &a.witness_dir {
                write_witness(d, &w.a, &w.b, &div)?;
            }
            json!({
                "status": "insecure",
                "trial": w.trial,
                "position": w.position,
                "left": show(&w.left),
                "right": show(&w.right),
                "a": w.a.to_string(),
                "b": w.b.to_string(),
            })
        }
        Verdict::Failed(f) => {
            let _ = writeln!(
                text,
                "dynamic: run failed at trial {}: {}",
                f.trial, f.error
            );
            let _ = writeln!(text, "input:\n{}", f.inputs);
            json!({
                "status": "failed",
                "trial": f.trial,
                "error": f.error.to_string(),
                "a": f.inputs.to_string(),
            })
        }
    };
    let v = if secure { "secure" } else { "insecure" };
    let _ = writeln!(text, "verdict: {v}");
    Ok(Report {
        code: code(secure),
        text,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "ct",
            "file": l.path,
            "entry": entry,
            "seed": a.seed,
            "trials": a.trials,
            "public": names_json(&spec.params),
            "public_regions": names_json(&spec.regions),
            "inferred": names_json(&inferred),
            "admitted": admitted,
            "dynamic": dynamic,
            "verdict": v,
        }),
    })
}

pub(super) fn safety(a: SafetyArgs) -> Result<Report, CliError> {
    let l = load(&a.file)?;
    let entry = l.entry(a.entry.as_deref())?;
    let params = l.params(&entry);
    let meta = l.meta_for(&entry);
    let pick = |given: &Option<String>, dflt: Option<&[&str]>| match given {
        Some(s) => resolve_names(&parse_names(s), &params),
        None => dflt
            .unwrap_or_default()
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let pointers = pick(&a.pointer, meta.map(|m| m.pointers));
    let tracked = pick(&a.track, meta.map(|m| m.tracked));
    let pr: Vec<&str> = pointers.iter().map(String::as_str).collect();
    let tr: Vec<&str> = tracked.iter().map(String::as_str).collect();
    let report = analyze(&l.tp, &entry, &pr, &tr).map_err(|e| usage(e.to_string()))?;
    let findings = check_safety(&l.tp, &entry, &pr, &tr).map_err(|e| usage(e.to_string()))?;
    let safe = findings.is_empty();
    let lines = report.lines();
    let mut text = String::new();
    for line in &lines {
        let _ = writeln!(text, "{line}");
    }
    for f in &findings {
        let _ = writeln!(text, "finding: {f}");
    }
    let v = if safe { "safe" } else { "unsafe" };
    let _ = writeln!(text, "verdict: {v}");
    let ranges: Vec<Value> = report
        .entries
        .iter()
        .zip(&lines)
        .map(|((n, r), line)| {
            let b = |x: Option<&crate::safety::domain::Lin>| x.map(|l| l.to_string());
            json!({
                "name": n,
                "empty": r.is_none(),
                "lo": r.as_ref().and_then(|r| b(r.lo.as_ref())),
                "hi": r.as_ref().and_then(|r| b(r.hi.as_ref())),
                "line": line,
            })
        })
        .collect();
    let findings: Vec<Value> = findings
        .iter()
        .map(|f| {
            json!({
                "kind": f.kind.to_string(),
                "func": f.func,
                "line": f.loc.line,
                "col": f.loc.col,
                "msg": f.msg,
            })
        })
        .collect();
    Ok(Report {
        code: code(safe),
        text,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "safety",
            "file": l.path,
            "entry": entry,
            "pointers": pointers,
            "tracked": tracked,
            "ranges": ranges,
            "findings": findings,
            "verdict": v,
        }),
    })
}

fn input_json(x: &PrimInput) -> Value {
    json!({
        "len": x.msg.len(),
        "msg": to_hex(&x.msg),
        "key": to_hex(&x.key),
        "nonce": to_hex(&x.nonce),
        "counter": x.counter,
        "in_place": x.in_place,
    })
}

pub(super) fn difftest(a: DiffArgs) -> Result<Report, CliError> {
    let loaded = a
        .files
        .iter()
        .map(|f| load(f))
        .collect::<Result<Vec<_>, _>>()?;
    let shape = match &a.shape {
        Some(s) => s.parse::<Shape>().map_err(|e| usage(e.to_string()))?,
        None => loaded
            .iter()
            .find_map(|l| l.meta.as_ref().and_then(|m| m.shape))
            .ok_or_else(|| usage("--shape is required for programs outside the corpus"))?,
    };
    let mut hops = Vec::new();
    if !a.no_spec {
        hops.push(Hop::spec());
    }
    for l in &loaded {
        let entry = match &a.entry {
            Some(e) => l.entry(Some(e))?,
            None => match l.meta.as_ref().filter(|m| m.shape == Some(shape)) {
                Some(m) => m.entry.to_string(),
                None => l.entry(Some(shape.name()))?,
            },
        };
        hops.push(Hop::dsl(&l.path, &l.tp, &entry));
    }
    if hops.len() < 2 {
        return Err(usage(
            "a difftest needs at least two programs, or one with the spec",
        ));
    }
    let chain = HopChain { shape, hops };
    let r = hop_difftest(&chain, a.runs, a.seed).map_err(|e| usage(e.to_string()))?;
    let ok = r.passed();
    let v = if ok { "agree" } else { "mismatch" };
    let text = format!("{r}\nverdict: {v}\n");
    let pairs: Vec<Value> = r
        .pairs
        .iter()
        .map(|p| json!({ "left": p.left, "right": p.right, "passed": p.passed }))
        .collect();
    let cex = match &r.counterexample {
        None => Value::Null,
        Some(c) => {
            let out = |x: &Result<Vec<u8>, String>| match x {
                Ok(b) => json!({ "output": to_hex(b) }),
                Err(e) => json!({ "error": e }),
            };
            json!({
                "run": c.run,
                "left": c.left,
                "right": c.right,
                "input": input_json(&c.input),
                "left_out": out(&c.left_out),
                "right_out": out(&c.right_out),
            })
        }
    };
    Ok(Report {
        code: code(ok),
        text,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "difftest",
            "shape": shape.name(),
            "seed": r.seed,
            "runs": r.runs,
            "pairs": pairs,
            "counterexample": cex,
            "verdict": v,
        }),
    })
}

fn descriptor_json(d: &Descriptor) -> Value {
    let locs = |v: &[isa::ArgLoc]| v.iter().map(|l| l.to_string()).collect::<Vec<_>>();
    json!({
        "name": d.name,
        "kind": if d.is_vector() { "vector" } else { "scalar" },
        "sources": locs(&d.sources),
        "dests": locs(&d.dests),
        "mnemonic": d.mnemonic,
    })
}

pub(super) fn isa(a: IsaArgs) -> Result<Report, CliError> {
    let reg = Registry::standard();
    let ds: Vec<&Descriptor> = match (&a.name, a.list) {
        (Some(n), _) => {
            let n = n.trim_start_matches('#');
            vec![reg
                .lookup(n)
                .ok_or_else(|| usage(format!("unknown instruction `{n}`")))?]
        }
        (None, true) => reg.iter().map(|d| &**d).collect(),
        (None, false) => return Err(usage("give an instruction name or --list")),
    };
    let mut text = String::new();
    for d in &ds {
        let _ = writeln!(text, "{}", d.summary());
    }
    Ok(Report {
        code: EXIT_OK,
        text,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "isa",
            "instructions": ds.iter().map(|d| descriptor_json(d)).collect::<Vec<_>>(),
        }),
    })
}

/// One measured input size.
struct Row {
    program: String,
    bytes: usize,
    steps: u64,
    micros: f64,
    matches_spec: bool,
}

fn bench_input(shape: Shape, size: usize, rng: &mut ChaCha8Rng) -> PrimInput {
    let mut bytes = |n: usize| (0..n).map(|_| rng.random()).collect::<Vec<u8>>();
    let msg = bytes(size);
    let key = bytes(32);
    let nonce = match shape {
        Shape::ChaCha20 => bytes(12),
        _ => Vec::new(),
    };
    PrimInput {
        msg,
        key,
        nonce,
        counter: 1,
        in_place: false,
    }
}

pub(super) fn bench(a: BenchArgs) -> Result<Report, CliError> {
    let sizes = parse_names(&a.sizes)
        .iter()
        .map(|s| parse_u64(s).map(|n| n as usize).map_err(usage))
        .collect::<Result<Vec<_>, _>>()?;
    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let mut rows = Vec::new();
    for name in &a.programs {
        let meta = program_meta(name).ok_or_else(|| usage(format!("unknown program `{name}`")))?;
        let shape = meta
            .shape
            .ok_or_else(|| usage(format!("`{name}` has no message interface to bench")))?;
        let tp = load_program(name).map_err(|e| usage(e.to_string()))?;
        let m = Machine::new(&tp);
        let sizes = match shape {
            Shape::Gimli => vec![48],
            _ => sizes.clone(),
        };
        for size in sizes {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let x = bench_input(shape, size, &mut rng);
            let want = shape.spec(&x).map_err(|e| usage(e.to_string()))?;
            let opts = Options {
                budget: u64::MAX / 2,
                ..Options::default()
            };
            let mut steps = 0;
            let mut got = Vec::new();
            let t = Instant::now();
            for _ in 0..a.reps {
                let (args, mem, base, len) = shape.layout(&x).map_err(|e| usage(e.to_string()))?;
                match m.run(meta.entry, args, mem, opts) {
                    Ok(o) => {
                        steps = o.steps;
                        got = o.memory.read_bytes(base, len).unwrap_or_default();
                    }
                    Err(e) => return Err(usage(format!("{name}: {e}"))),
                }
            }
            rows.push(Row {
                program: name.clone(),
                bytes: size,
                steps,
                micros: t.elapsed().as_secs_f64() * 1e6 / a.reps as f64,
                matches_spec: got == want,
            });
        }
    }
    let ok = rows.iter().all(|r| r.matches_spec);
    let mut text = format!(
        "# interpreter steps per byte (a proxy, not CPU cycles), seed {}\n",
        a.seed
    );
    let _ = writeln!(
        text,
        "{:<22} {:>7} {:>12} {:>11} {:>12}  spec",
        "program", "bytes", "steps", "steps/byte", "us/run"
    );
    let per_byte = |r: &Row| (r.bytes > 0).then(|| r.steps as f64 / r.bytes as f64);
    for r in &rows {
        let pb = per_byte(r).map_or_else(|| "-".into(), |x| format!("{x:.1}"));
        let _ = writeln!(
            text,
            "{:<22} {:>7} {:>12} {:>11} {:>12.0}  {}",
            r.program,
            r.bytes,
            r.steps,
            pb,
            r.micros,
            if r.matches_spec { "ok" } else { "MISMATCH" }
        );
    }
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "program": r.program,
                "bytes": r.bytes,
                "steps": r.steps,
                "steps_per_byte": per_byte(r),
                "micros_per_run": r.micros,
                "matches_spec": r.matches_spec,
            })
        })
        .collect();
    Ok(Report {
        code: code(ok),
        text,
        json: json!({
            "schema_version": SCHEMA_VERSION,
            "command": "bench",
            "metric": "interpreter steps per byte",
            "seed": a.seed,
            "reps": a.reps,
            "rows": json_rows,
        }),
    })
}
