use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::interp::{Machine, Options, Val};
use crate::ir::compile;
use crate::mem::Memory;

const COPY: &str = "
fn copy(reg u64 dst, reg u64 src, reg u64 len) {
    reg u64 i;
    reg u8 t;
    i = 0;
    while i < len {
        t = (u8)[src + i];
        (u8)[dst + i] = t;
        i += 1;
    }
}
";

const BLOCKS: &str = "
fn blocks(reg u64 out, reg u64 in, reg u64 inlen, reg u64 k) {
    reg u64 i, j, a, b;
    stack u8[17] buf;
    a = [k + 0];
    b = [k + 24];
    i = 0;
    while i < inlen {
        j = 0;
        while j < 16 && i < inlen {
            buf.[j] = (u8)[in + i];
            i += 1;
            j += 1;
        }
        buf.[j] = 1;
    }
    [out + 0] = a;
    [out + 8] = b;
}
";

#[test]
fn byte_copy_ranges() {
    let tp = compile(COPY).unwrap();
    let r = analyze(&tp, "copy", &["dst", "src"], &["len"]).unwrap();
    assert_eq!(
        r.lines(),
        [
            "range(dst) = dst + [0; len)",
            "range(src) = src + [0; len)",
            "range(len) = empty"
        ]
    );
    assert!(r.failures.is_empty());
    assert!(check_safety(&tp, "copy", &["dst", "src"], &["len"])
        .unwrap()
        .is_empty());
}

#[test]
fn byte_copy_matches_dynamic_accesses() {
    let tp = compile(COPY).unwrap();
    let r = analyze(&tp, "copy", &["dst", "src"], &["len"]).unwrap();
    let m = Machine::new(&tp);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let len: u64 = rng.random_range(0..=64);
        let mut mem = Memory::new();
        mem.add_region_bytes(0x1000, &vec![7; len as usize])
            .unwrap();
        mem.add_region(0x8000, len).unwrap();
        let opts = Options {
            log_memory: true,
            ..Options::default()
        };
        let out = m
            .run(
                "copy",
                vec![Val::u64(0x8000), Val::u64(0x1000), Val::u64(len)],
                mem,
                opts,
            )
            .unwrap();
        let env: BTreeMap<String, i128> = [("len".to_string(), len as i128)].into();
        let mut seen = BTreeMap::new();
        for a in &out.accesses {
            let (name, base) = if a.write {
                ("dst", 0x8000)
            } else {
                ("src", 0x1000)
            };
            let (lo, hi) = r.range(name).unwrap().eval(&env);
            let off = a.addr as i128 - base;
            assert!(lo.unwrap() <= off && off + a.len as i128 <= hi.unwrap());
            *seen.entry(name).or_insert(0) += 1;
        }
        if len > 0 {
            assert_eq!(seen["src"], len);
        }
    }
}

#[test]
fn block_loop_ranges() {
    let tp = compile(BLOCKS).unwrap();
    let r = analyze(&tp, "blocks", &["out", "in", "k"], &["inlen"]).unwrap();
    assert_eq!(
        r.to_string(),
        "range(out) = out + [0; 16)\nrange(in) = in + [0; inlen)\nrange(inlen) = empty\nrange(k) = k + [0; 32)\n"
    );
    assert!(check_safety(&tp, "blocks", &["out", "in", "k"], &["inlen"])
        .unwrap()
        .is_empty());
}

#[test]
fn preanalysis_suggests_loop_bounds() {
    assert_eq!(
        preanalyze(&compile(COPY).unwrap(), "copy").unwrap(),
        ["len".to_string()].into()
    );
    assert_eq!(
        preanalyze(&compile(BLOCKS).unwrap(), "blocks").unwrap(),
        ["inlen".to_string()].into()
    );
    let straight = "fn f(reg u64 p, reg u64 x) { [p + 8] = x; }";
    assert!(preanalyze(&compile(straight).unwrap(), "f")
        .unwrap()
        .is_empty());
}

#[test]
fn no_memory_means_empty() {
    let tp = compile("fn f(reg u64 p, reg u64 n) -> reg u64 { p = p + n; return p; }").unwrap();
    let r = analyze(&tp, "f", &["p"], &["n"]).unwrap();
    assert_eq!(r.lines(), ["range(p) = empty", "range(n) = empty"]);
}

#[test]
fn untracked_length_is_unbounded() {
    let tp = compile(COPY).unwrap();
    let r = analyze(&tp, "copy", &["dst", "src"], &[]).unwrap();
    assert_eq!(r.lines()[0], "range(dst) = dst + [0; 18446744073709551615)");
    let r = analyze(&tp, "copy", &["dst"], &["len"]).unwrap();
    assert!(r
        .failures
        .iter()
        .any(|f| f.kind == FindingKind::UnknownBase));
}

#[test]
fn out_of_bounds_index() {
    let src =
        "fn f() -> reg u64 { stack u64[4] x; reg u64 y, i; i = 4; x[i] = 1; y = x[0]; return y; }";
    let fs = check_safety(&compile(src).unwrap(), "f", &[], &[]).unwrap();
    assert_eq!(fs.len(), 1);
    assert_eq!(fs[0].kind, FindingKind::ArrayBounds);
}

#[test]
fn divisor_range() {
    let bad = "fn f(reg u64 a, reg u64 b) -> reg u64 { reg u64 q; q = a / b; return q; }";
    let fs = check_safety(&compile(bad).unwrap(), "f", &[], &[]).unwrap();
    assert_eq!(fs[0].kind, FindingKind::DivByZero);
    let ok = "fn f(reg u64 a, reg u64 b) -> reg u64 { reg u64 q; q = 0; if b >= 1 && b <= 10 { q = a / b; } return q; }";
    assert!(check_safety(&compile(ok).unwrap(), "f", &[], &[])
        .unwrap()
        .is_empty());
    let intr = "fn f(reg u64 a) -> reg u64 { reg u64 z, d, q, r; z = 0; d = a & 7; _, _, _, _, _, q, r = #x86_DIV_64(z, a, d); return q; }";
    let fs = check_safety(&compile(intr).unwrap(), "f", &[], &[]).unwrap();
    assert_eq!(fs[0].kind, FindingKind::DivByZero);
}

#[test]
fn branch_only_initialization() {
    let src = "fn f(reg u64 a) -> reg u64 { reg u64 x; if a == 0 { x = 1; } return x; }";
    let fs = check_safety(&compile(src).unwrap(), "f", &[], &[]).unwrap();
    assert_eq!(fs.len(), 1);
    assert_eq!(fs[0].kind, FindingKind::Uninitialized);
    let both =
        "fn f(reg u64 a) -> reg u64 { reg u64 x; if a == 0 { x = 1; } else { x = 2; } return x; }";
    assert!(check_safety(&compile(both).unwrap(), "f", &[], &[])
        .unwrap()
        .is_empty());
}

#[test]
fn calls_propagate_pointers() {
    let src = "
    fn put(reg u64 p, reg u64 v) { [p + 8] = v; }
    fn f(reg u64 out, reg u64 n) {
        reg u64 q;
        q = out + n;
        put(q, n);
    }";
    let r = analyze(&compile(src).unwrap(), "f", &["out"], &["n"]).unwrap();
    assert_eq!(r.lines()[0], "range(out) = out + [n + 8; n + 16)");
}

#[test]
fn unknown_parameter_rejected() {
    let tp = compile(COPY).unwrap();
    assert!(matches!(
        analyze(&tp, "copy", &["nope"], &[]),
        Err(AnalysisError::NotParameter(..))
    ));
    assert!(matches!(
        analyze(&tp, "nope", &[], &[]),
        Err(AnalysisError::UnknownEntry(_))
    ));
}

#[test]
fn guarded_prefix_is_absorbed() {
    let src = "
    fn f(reg u64 p, reg u64 n) -> reg u64 {
        reg u64 i, x, y;
        x = 0;
        i = 0;
        if n > 64 {
            x = [p + 56];
            i = 64;
        }
        while i < n {
            y = (64u)(u8)[p + i];
            x += y;
            i += 1;
        }
        return x;
    }";
    let tp = compile(src).unwrap();
    let r = analyze(&tp, "f", &["p"], &["n"]).unwrap();
    assert_eq!(r.lines()[0], "range(p) = p + [0; n)");
}

#[test]
fn unguarded_prefix_is_kept() {
    let src = "
    fn f(reg u64 p, reg u64 n) -> reg u64 {
        reg u64 i, x, y;
        x = [p + 56];
        i = 0;
        while i < n {
            y = (64u)(u8)[p + i];
            x += y;
            i += 1;
        }
        return x;
    }";
    let tp = compile(src).unwrap();
    let r = analyze(&tp, "f", &["p"], &["n"]).unwrap();
    assert_eq!(r.lines()[0], "range(p) = p + [0; n + 64)");
}

#[test]
fn block_loop_tail_starts_at_zero() {
    let src = "
    fn f(reg u64 p, reg u64 n) -> reg u64 {
        reg u64 i, x, y;
        x = 0;
        i = 0;
        while i + 64 <= n {
            y = [p + i];
            x += y;
            i += 64;
        }
        while i < n {
            y = (64u)(u8)[p + i];
            x += y;
            i += 1;
        }
        return x;
    }";
    let tp = compile(src).unwrap();
    let r = analyze(&tp, "f", &["p"], &["n"]).unwrap();
    assert_eq!(r.lines()[0], "range(p) = p + [0; n)");
}
