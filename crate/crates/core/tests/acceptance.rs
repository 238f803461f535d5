//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jamin::interp::{ArrayBuf, LeakEvent, Machine, Options, Val};
use jamin::ir::compile;
use jamin::isa::{ops_opsv_agree, ArgTy, FlagValue, IValue, Registry};
use jamin::leakage::{ct_check, infer_public};
use jamin::mem::Memory;
use jamin::mplimb::{
    add, add_rep5_pack, convert, mul_schoolbook, p1305, reduce_p1305, BoundPred, LimbNum,
};
use jamin::primitives::difftest::run_hop;
use jamin::primitives::mutants::{DIFF_MUTANTS, LEAK_MUTANTS};
use jamin::primitives::{
    hop_difftest, load_program, program_meta, standard_chain, vectors, Hop, PrimInput, Shape,
    PROGRAMS,
};
use jamin::safety::analyze;
use jamin::word::{Width, Word};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn within(limit: Duration, t: Instant, what: &str) -> Result<(), String> {
    let e = t.elapsed();
    if e > limit {
        return Err(format!("{what} took {e:.1?}, limit {limit:?}"));
    }
    Ok(())
}

fn word_laws() -> Outcome {
    let t = Instant::now();
    let check = |x: &Word, i: u32| -> Result<(), String> {
        let k = x.width().bits();
        let a = x.shl(i).map_err(|e| e.to_string())?;
        let b = x.shr(k - i).map_err(|e| e.to_string())?;
        let r = x.rol(i).map_err(|e| e.to_string())?;
        if a.xor(&b) != r {
            return Err(format!("shl/shr/rol disagree at {x:?} << {i}"));
        }
        let native = match x.width() {
            Width::W8 => (x.low_u64() as u8).rotate_left(i) as u64,
            Width::W32 => (x.low_u64() as u32).rotate_left(i) as u64,
            _ => x.low_u64().rotate_left(i),
        };
        if r.low_u64() != native {
            return Err(format!("rol differs from native at {x:?} << {i}"));
        }
        Ok(())
    };
    let mut n = 0u64;
    for v in 0..256u64 {
        for i in 0..=8 {
            check(&Word::from_u64(Width::W8, v), i)?;
            n += 1;
        }
    }
    let mut g = rng(1);
    for c in 0..100_000u64 {
        let w = if c % 2 == 0 { Width::W32 } else { Width::W64 };
        let x = Word::from_u64(w, g.random());
        check(&x, g.random_range(0..=w.bits()))?;
        n += 1;
    }
    within(Duration::from_secs(5), t, "word laws")?;
    Ok(format!("{n} cases in {:.2?}", t.elapsed()))
}

fn memory_laws() -> Outcome {
    let base = 0x1000u64;
    let mut g = rng(2);
    let init: Vec<u8> = (0..64).map(|_| g.random()).collect();
    let mut mem = Memory::new();
    mem.add_region_bytes(base, &init)
        .map_err(|e| e.to_string())?;
    let mut known = init.clone();
    let mut reads = 0u64;
    for a in 0..64u64 {
        for v in 0..=255u8 {
            mem.store8(base + a, v).map_err(|e| e.to_string())?;
            known[a as usize] = v;
            for b in 0..64u64 {
                let got = mem.load8(base + b).map_err(|e| e.to_string())?;
                if got != known[b as usize] {
                    return Err(format!("store8 {a} {v} changed load8 {b}"));
                }
                reads += 1;
            }
        }
    }
    let bytes: Vec<u8> = (0..256).map(|_| g.random()).collect();
    let mut mem = Memory::new();
    mem.add_region_bytes(base, &bytes)
        .map_err(|e| e.to_string())?;
    for _ in 0..10_000 {
        let w = Width::ALL[g.random_range(0..Width::ALL.len())];
        let n = w.bytes();
        let off = g.random_range(0..=bytes.len() - n);
        let got = mem
            .load(base + off as u64, w)
            .map_err(|e| e.to_string())?
            .to_uint();
        let want = bytes[off..off + n]
            .iter()
            .rev()
            .fold(BigUint::zero(), |acc, b| (acc << 8u32) + *b);
        if got != want {
            return Err(format!("load {w} at offset {off}: {got:x} != {want:x}"));
        }
    }
    Ok(format!("{reads} frame reads, 10000 multi-width loads"))
}

fn random_word(w: Width, g: &mut ChaCha8Rng) -> Word {
    Word::from_limbs(w, [g.random(), g.random(), g.random(), g.random()])
}

fn ops_opsv() -> Outcome {
    let t = Instant::now();
    let mut g = rng(3);
    let mut count = 0;
    for d in Registry::standard().iter().filter(|d| d.is_vector()) {
        count += 1;
        for _ in 0..10_000 {
            let args: Vec<IValue> = d
                .src_types
                .iter()
                .map(|ty| match ty {
                    ArgTy::Bool => IValue::Flag(FlagValue::from(g.random::<bool>())),
                    ArgTy::Word(w) => IValue::Word(random_word(*w, &mut g)),
                })
                .collect();
            match ops_opsv_agree(d, &args) {
                Ok(true) => {}
                Ok(false) => return Err(format!("{} disagrees on {args:?}", d.name)),
                Err(e) => return Err(format!("{}: {e}", d.name)),
            }
        }
    }
    within(Duration::from_secs(30), t, "Ops/OpsV")?;
    Ok(format!(
        "{count} vector descriptors x 10000 inputs in {:.1?}",
        t.elapsed()
    ))
}

fn store2_trace() -> Outcome {
    let tp = load_program("store2").map_err(|e| e.to_string())?;
    let m = Machine::new(&tp);
    let mut g = rng(4);
    for _ in 0..100 {
        let p: u64 = g.random_range(0..u64::MAX / 2) & !7;
        let mut mem = Memory::new();
        mem.add_region(p, 16).map_err(|e| e.to_string())?;
        let xs = [
            random_word(Width::W64, &mut g),
            random_word(Width::W64, &mut g),
        ];
        let args = vec![
            Val::u64(p),
            Val::Arr(Box::new(ArrayBuf::from_words(Width::W64, &xs))),
        ];
        let out = m
            .run("store2", args, mem, Options::traced())
            .map_err(|e| e.to_string())?;
        let want = vec![
            LeakEvent::Addr(vec![0]),
            LeakEvent::Addr(vec![p]),
            LeakEvent::Addr(vec![1]),
            LeakEvent::Addr(vec![p + 8]),
        ];
        if out.trace != want {
            return Err(format!("p = {p:#x}: trace {:?}", out.trace));
        }
    }
    Ok("100 random bases".into())
}

fn constant_time() -> Outcome {
    let t = Instant::now();
    let mut lines = Vec::new();
    for (name, _) in PROGRAMS {
        let meta = program_meta(name).ok_or(format!("{name}: no metadata"))?;
        let tp = load_program(name).map_err(|e| e.to_string())?;
        let h = meta.harness(meta.default_max_len());
        let spec = meta.public_spec();
        let inferred = infer_public(&tp, meta.entry).map_err(|e| e.to_string())?;
        if !spec.admits(&inferred, &h) {
            return Err(format!("{name}: inferred {inferred:?} not admitted"));
        }
        let v = ct_check(&Machine::new(&tp), meta.entry, &h, &spec, 10_000, 5)
            .map_err(|e| e.to_string())?;
        if !v.is_secure() {
            return Err(format!("{name}: insecure: {v:?}"));
        }
        lines.push(*name);
    }
    for m in LEAK_MUTANTS {
        let meta = program_meta(m.program).ok_or(format!("{}: no metadata", m.name))?;
        let src = m.source().map_err(|e| e.to_string())?;
        let tp = compile(&src).map_err(|e| e.to_string())?;
        let h = meta.harness(meta.default_max_len());
        let spec = meta.public_spec();
        let inferred = infer_public(&tp, meta.entry).map_err(|e| e.to_string())?;
        if spec.admits(&inferred, &h) {
            return Err(format!("{}: admitted statically", m.name));
        }
        let v = ct_check(&Machine::new(&tp), meta.entry, &h, &spec, 1_000, 6)
            .map_err(|e| e.to_string())?;
        if v.is_secure() {
            return Err(format!("{}: no leak within 1000 trials", m.name));
        }
    }
    Ok(format!(
        "{} programs secure, {} leak mutants rejected, {:.0?}",
        lines.len(),
        LEAK_MUTANTS.len(),
        t.elapsed()
    ))
}

fn poly_ranges() -> Outcome {
    let meta = program_meta("poly1305_ref").ok_or("no metadata")?;
    let tp = load_program("poly1305_ref").map_err(|e| e.to_string())?;
    let r = analyze(&tp, meta.entry, meta.pointers, meta.tracked).map_err(|e| e.to_string())?;
    let want = [
        "range(out) = out + [0; 16)",
        "range(in) = in + [0; inlen)",
        "range(inlen) = empty",
        "range(k) = k + [0; 32)",
    ];
    let got = r.lines();
    if got != want {
        return Err(format!("got {got:?}"));
    }
    Ok(got.join(", "))
}

fn soundness() -> Outcome {
    let mut total = 0u64;
    for (name, _) in PROGRAMS {
        let meta = program_meta(name).ok_or(format!("{name}: no metadata"))?;
        let tp = load_program(name).map_err(|e| e.to_string())?;
        let report =
            analyze(&tp, meta.entry, meta.pointers, meta.tracked).map_err(|e| e.to_string())?;
        let sig = &tp.info(meta.entry).ok_or("no entry")?.sig;
        let h = meta.harness(meta.default_max_len());
        let m = Machine::new(&tp);
        let mut g = rng(7);
        for _ in 0..1000 {
            let x = h
                .sample(sig, &BTreeMap::new(), &mut g)
                .map_err(|e| e.to_string())?;
            let word = |n: &str| x.arg(n).and_then(Val::as_word).map(|w| w.low_u64());
            let env: BTreeMap<String, i128> = meta
                .tracked
                .iter()
                .filter_map(|n| Some((n.to_string(), word(n)? as i128)))
                .collect();
            let boxes: Vec<(i128, i128)> = meta
                .pointers
                .iter()
                .filter_map(|p| {
                    let base = word(p)? as i128;
                    let (lo, hi) = report.range(p)?.eval(&env);
                    Some((
                        base + lo.unwrap_or(i128::MIN / 2),
                        base + hi.unwrap_or(i128::MAX / 2),
                    ))
                })
                .collect();
            let opts = Options {
                log_memory: true,
                ..Options::default()
            };
            let out = m
                .run(
                    meta.entry,
                    x.args.clone(),
                    x.memory().map_err(|e| e.to_string())?,
                    opts,
                )
                .map_err(|e| format!("{name}: {e}"))?;
            for a in &out.accesses {
                let (s, e) = (a.addr as i128, a.addr as i128 + a.len as i128);
                if !boxes.iter().any(|(lo, hi)| *lo <= s && e <= *hi) {
                    return Err(format!(
                        "{name}: access {:#x}+{} outside {boxes:?}",
                        a.addr, a.len
                    ));
                }
                total += 1;
            }
        }
    }
    Ok(format!("{total} accesses inside the inferred ranges"))
}

fn value(limbs: &[u64], radix: u32) -> BigUint {
    let mut v = BigUint::zero();
    for (i, l) in limbs.iter().enumerate() {
        v += BigUint::from(*l) << (radix as usize * i);
    }
    v
}

fn limbs_of(g: &mut ChaCha8Rng, count: usize, bits: u32) -> Vec<u64> {
    (0..count)
        .map(|_| g.random::<u64>() >> (64 - bits))
        .collect()
}

fn mplimb() -> Outcome {
    let p = (BigUint::one() << 130u32) - 5u32;
    if p1305() != p {
        return Err("p1305 is not 2^130 - 5".into());
    }
    let mut g = rng(8);
    let reps: [(u32, usize, u32); 3] = [(26, 5, 27), (64, 3, 62), (26, 10, 26)];
    let err = |e: jamin::mplimb::LimbError| e.to_string();
    for (radix, count, bits) in reps {
        for _ in 0..10_000 {
            let la = limbs_of(&mut g, count, bits);
            let lb = limbs_of(&mut g, count, bits);
            let (va, vb) = (value(&la, radix), value(&lb, radix));
            let a = LimbNum::new(la, radix).map_err(err)?;
            let b = LimbNum::new(lb, radix).map_err(err)?;
            let s = add(&a, &b).map_err(err)?;
            if value(s.limbs(), s.radix()) != &va + &vb {
                return Err(format!("add at radix {radix}"));
            }
            let m = mul_schoolbook(&a, &b).map_err(err)?;
            if value(m.limbs(), m.radix()) != &va * &vb {
                return Err(format!("mul at radix {radix}"));
            }
            let r = reduce_p1305(&a).map_err(err)?;
            let vr = value(r.limbs(), r.radix());
            if vr != &va % &p {
                return Err(format!("reduce at radix {radix}"));
            }
            let (to, n) = if radix == 26 { (64, 5) } else { (26, 9) };
            let c = convert(&a, to, n).map_err(err)?;
            if value(c.limbs(), to) != va {
                return Err(format!("convert {radix} -> {to}"));
            }
            if c.limbs()[..n - 1].iter().any(|l| to < 64 && *l >> to != 0) {
                return Err(format!("convert {radix} -> {to}: limb over radix"));
            }
        }
    }
    let max = vec![(1u64 << 27) - 1; 5];
    let mut cases: Vec<[Vec<u64>; 4]> = vec![
        [max.clone(), max.clone(), max.clone(), max.clone()],
        [vec![0; 5], vec![0; 5], vec![0; 5], vec![0; 5]],
        [max.clone(), vec![0; 5], max.clone(), vec![0; 5]],
    ];
    for _ in 0..10_000 {
        cases.push(std::array::from_fn(|_| limbs_of(&mut g, 5, 27)));
    }
    for c in &cases {
        let h: Vec<LimbNum> = c
            .iter()
            .map(|l| LimbNum::with_bounds(l.clone(), 26, vec![27; 5]))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let out = add_rep5_pack([&h[0], &h[1], &h[2], &h[3]]).map_err(err)?;
        let sum: BigUint = c.iter().map(|l| value(l, 26)).sum();
        if out.limbs().len() != 3 || out.limbs()[2] >= 16 {
            return Err(format!("pack top limb {:?}", out.limbs()));
        }
        if !out.satisfies(BoundPred::UbW64 { limb: 2, k: 4 }) {
            return Err("pack bound certificate".into());
        }
        if value(out.limbs(), out.radix()) % &p != sum % &p {
            return Err(format!("pack not congruent for {c:?}"));
        }
    }
    Ok(format!(
        "3 representations x 10000 inputs, {} packs",
        cases.len()
    ))
}

fn vector_cases(shape: Shape) -> Result<Vec<(PrimInput, Vec<u8>)>, String> {
    let load = |n: &str| vectors::load(n).map_err(|e| e.to_string());
    let zeros = |n: usize| vec![0u8; n];
    Ok(match shape {
        Shape::Poly1305 => {
            let v = load("poly1305_tag")?;
            vec![(
                PrimInput {
                    msg: v["message"].clone(),
                    key: v["key"].clone(),
                    nonce: zeros(12),
                    counter: 0,
                    in_place: false,
                },
                v["tag"].clone(),
            )]
        }
        Shape::ChaCha20 => {
            let e = load("chacha20_encrypt")?;
            let b = load("chacha20_block")?;
            let ks = b["keystream"].clone();
            let ctr = u32::from_be_bytes(b["counter"][..4].try_into().map_err(|_| "counter")?);
            vec![
                (
                    PrimInput {
                        msg: e["plaintext"].clone(),
                        key: e["key"].clone(),
                        nonce: e["nonce"].clone(),
                        counter: 1,
                        in_place: false,
                    },
                    e["ciphertext"].clone(),
                ),
                (
                    PrimInput {
                        msg: zeros(ks.len()),
                        key: b["key"].clone(),
                        nonce: b["nonce"].clone(),
                        counter: ctr,
                        in_place: false,
                    },
                    ks,
                ),
            ]
        }
        Shape::Gimli => {
            let v = load("gimli")?;
            vec![(
                PrimInput {
                    msg: v["input"].clone(),
                    key: zeros(32),
                    nonce: zeros(12),
                    counter: 0,
                    in_place: false,
                },
                v["output"].clone(),
            )]
        }
    })
}

fn chains() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    for shape in Shape::ALL {
        let chain = standard_chain(shape).map_err(|e| e.to_string())?;
        for (x, want) in vector_cases(shape)? {
            for hop in &chain.hops {
                let got = run_hop(hop, shape, &x).map_err(|e| format!("{}: {e}", hop.name))?;
                if got.output != want {
                    return Err(format!("{}: published vector mismatch", hop.name));
                }
            }
        }
        let r = hop_difftest(&chain, 1011, 9).map_err(|e| e.to_string())?;
        if !r.passed() {
            return Err(format!("{}: {:?}", shape.name(), r.counterexample));
        }
        parts.push(format!("{} ({} hops)", shape.name(), chain.hops.len()));
    }
    within(Duration::from_secs(300), t, "difftest chains")?;
    Ok(format!(
        "{} x 1011 runs in {:.0?}",
        parts.join(", "),
        t.elapsed()
    ))
}

fn diff_mutants() -> Outcome {
    let mut worst = 0;
    for m in DIFF_MUTANTS {
        let meta = program_meta(m.program).ok_or(format!("{}: no metadata", m.name))?;
        let shape = meta.shape.ok_or(format!("{}: no shape", m.name))?;
        let tp = compile(&m.source().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let mut chain = standard_chain(shape).map_err(|e| e.to_string())?;
        let i = chain
            .hops
            .iter()
            .position(|h| h.name == m.program)
            .ok_or(format!("{}: hop missing", m.name))?;
        chain.hops[i] = Hop::dsl(m.name, &tp, meta.entry);
        let r = hop_difftest(&chain, 1000, 10).map_err(|e| e.to_string())?;
        match r.counterexample {
            Some(c) => worst = worst.max(c.run + 1),
            None => return Err(format!("{} survived 1000 runs", m.name)),
        }
    }
    Ok(format!(
        "{} mutants caught, slowest after {worst} runs",
        DIFF_MUTANTS.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("word shift and rotate laws", word_laws),
        ("memory frame and multi-width loads", memory_laws),
        ("vector Ops/OpsV agreement", ops_opsv),
        ("store2 leakage trace", store2_trace),
        ("constant-time corpus and leak mutants", constant_time),
        ("poly1305_ref memory ranges", poly_ranges),
        ("range soundness on executions", soundness),
        ("multi-limb arithmetic", mplimb),
        ("differential chains and published vectors", chains),
        ("differential mutants caught", diff_mutants),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("criterion {}: PASS {name}: {d}", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {e}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
