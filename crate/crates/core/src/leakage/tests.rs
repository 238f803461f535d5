use std::collections::BTreeMap;

use super::*;
use crate::ir::{compile, load};

const STORE2: &str = "
fn store2(reg u64 p, reg u64[2] x) {
    [p + 0] = x[0];
    [p + 8] = x[1];
}
";

fn store2_harness() -> Harness {
    Harness {
        args: vec![
            ("p".into(), ArgGen::Region("out".into())),
            ("x".into(), ArgGen::Random),
        ],
        regions: vec![RegionGen {
            name: "out".into(),
            base: 0x1000,
            len: RegionLen::Fixed(16),
            init: false,
        }],
    }
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

#[test]
fn store2_infers_only_the_pointer() {
    let tp = load(STORE2).unwrap();
    assert_eq!(infer_public(&tp, "store2").unwrap(), set(&["p"]));
}

#[test]
fn store2_is_constant_time_in_x() {
    let m = Machine::new(&compile(STORE2).unwrap());
    let spec = PublicSpec::new(["p"], ["out"]);
    let v = ct_check(&m, "store2", &store2_harness(), &spec, 200, 1).unwrap();
    assert!(v.is_secure(), "{v:?}");
}

#[test]
fn secret_pointer_is_caught() {
    let m = Machine::new(&compile(STORE2).unwrap());
    let spec = PublicSpec::new(["x"], ["out"]);
    let Verdict::Insecure(w) = ct_check(&m, "store2", &store2_harness(), &spec, 100, 2).unwrap()
    else {
        panic!("expected a witness")
    };
    assert_eq!(w.position, 1);
    assert_ne!(w.a.arg("p"), w.b.arg("p"));
    assert_eq!(w.a.arg("x"), w.b.arg("x"));
}

const BRANCH: &str = "
fn f(reg u64 s, reg u64 t) -> reg u64 {
    reg u64 r;
    r = t;
    if s == 0 { r = 1; }
    return r;
}
";

#[test]
fn secret_branch() {
    let tp = compile(BRANCH).unwrap();
    assert_eq!(infer_public(&tp, "f").unwrap(), set(&["s"]));
    let h = Harness {
        args: vec![("s".into(), ArgGen::Random), ("t".into(), ArgGen::Random)],
        regions: vec![],
    };
    let m = Machine::new(&tp);
    let v = ct_check(&m, "f", &h, &PublicSpec::new(["t"], []), 1000, 3).unwrap();
    assert!(matches!(v, Verdict::Insecure(_)));
    let v = ct_check(&m, "f", &h, &PublicSpec::new(["s"], []), 1000, 3).unwrap();
    assert!(v.is_secure());
}

const TABLE: &str = "
fn lookup(reg u64 tab, reg u64 key) -> reg u8 {
    reg u8 b, v;
    stack u8[16] s;
    b = (u8)[key];
    s.[0] = b;
    v = (u8)[tab + (64u)(b & 15)];
    return v;
}
";

#[test]
fn memory_dependent_address() {
    let tp = compile(TABLE).unwrap();
    assert_eq!(
        infer_public(&tp, "lookup").unwrap(),
        set(&["@mem", "key", "tab"])
    );
    let h = Harness {
        args: vec![
            ("tab".into(), ArgGen::Region("tab".into())),
            ("key".into(), ArgGen::Region("key".into())),
        ],
        regions: vec![
            RegionGen {
                name: "tab".into(),
                base: 0x1000,
                len: RegionLen::Fixed(16),
                init: true,
            },
            RegionGen {
                name: "key".into(),
                base: 0x2000,
                len: RegionLen::Fixed(1),
                init: true,
            },
        ],
    };
    let spec = PublicSpec::new(["tab", "key"], ["tab"]);
    assert!(!spec.admits(&infer_public(&tp, "lookup").unwrap(), &h));
    let m = Machine::new(&tp);
    assert!(matches!(
        ct_check(&m, "lookup", &h, &spec, 1000, 4).unwrap(),
        Verdict::Insecure(_)
    ));
    let all = PublicSpec::new(["tab", "key"], ["tab", "key"]);
    assert!(all.admits(&infer_public(&tp, "lookup").unwrap(), &h));
    assert!(ct_check(&m, "lookup", &h, &all, 300, 4)
        .unwrap()
        .is_secure());
}

#[test]
fn stack_index_taint_is_per_element() {
    let src = "
    fn f(reg u64 a, reg u64 s) -> reg u64 {
        stack u64[2] t;
        reg u64 i, r;
        t[0] = a & 1;
        t[1] = s;
        i = t[0];
        r = t[i];
        return r;
    }";
    assert_eq!(
        infer_public(&compile(src).unwrap(), "f").unwrap(),
        set(&["a"])
    );
}

#[test]
fn implicit_flows_reach_memory() {
    let src = "
    fn f(reg u64 p, reg u64 s) {
        reg u64 x, y;
        x = 0;
        if s == 1 { x = 8; }
        y = [p + x];
    }";
    let r = infer_public(&compile(src).unwrap(), "f").unwrap();
    assert!(r.contains("s"));
    assert!(r.contains("p"));
}

#[test]
fn callee_results_carry_taint() {
    let src = "
    fn g(reg u64 x) -> reg u64 { x = x + 1; return x; }
    fn f(reg u64 p, reg u64 s, reg u64 k) {
        reg u64 y, z;
        y = g(s);
        z = g(k);
        [p + y] = z;
    }";
    assert_eq!(
        infer_public(&compile(src).unwrap(), "f").unwrap(),
        set(&["k", "p", "s"])
    );
}

#[test]
fn division_operands_leak() {
    let src = "fn f(reg u64 a, reg u64 b) -> reg u64 {
        reg u64 z, q, r;
        z = 0;
        _, _, _, _, _, q, r = #x86_DIV_64(z, a, b);
        return q;
    }";
    let tp = compile(src).unwrap();
    assert_eq!(infer_public(&tp, "f").unwrap(), set(&["a", "b"]));
    let h = Harness {
        args: vec![
            ("a".into(), ArgGen::Random),
            ("b".into(), ArgGen::Range { lo: 1, hi: 100 }),
        ],
        regions: vec![],
    };
    let v = ct_check(
        &Machine::new(&tp),
        "f",
        &h,
        &PublicSpec::new(["b"], []),
        100,
        5,
    )
    .unwrap();
    assert!(matches!(v, Verdict::Insecure(_)));
}

#[test]
fn safety_errors_are_reported_separately() {
    let src = "fn f(reg u64 p) -> reg u64 { reg u64 x; x = [p + 8]; return x; }";
    let h = Harness {
        args: vec![("p".into(), ArgGen::Region("r".into()))],
        regions: vec![RegionGen {
            name: "r".into(),
            base: 64,
            len: RegionLen::Fixed(8),
            init: true,
        }],
    };
    let m = Machine::new(&compile(src).unwrap());
    assert!(matches!(
        ct_check(&m, "f", &h, &PublicSpec::new(["p"], ["r"]), 10, 0).unwrap(),
        Verdict::Failed(_)
    ));
}

#[test]
fn harness_validation() {
    let tp = compile(STORE2).unwrap();
    let sig = &tp.info("store2").unwrap().sig;
    let mut h = store2_harness();
    h.args.pop();
    assert_eq!(h.validate(sig), Err(HarnessError::MissingParam("x".into())));
    let mut h = store2_harness();
    h.args[1].1 = ArgGen::Const(3);
    assert!(matches!(h.validate(sig), Err(HarnessError::BadType { .. })));
    let h = store2_harness();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let i = h.sample(sig, &BTreeMap::new(), &mut rng).unwrap();
    assert_eq!(i.arg("p"), Some(&Val::u64(0x1000)));
    assert_eq!(i.region("out").unwrap().bytes, None);
}

#[test]
fn instrumentation_is_transparent() {
    let m = Machine::new(&compile(STORE2).unwrap());
    let h = store2_harness();
    let sig = &m.program().info("store2").unwrap().sig;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..20 {
        let i = h.sample(sig, &BTreeMap::new(), &mut rng).unwrap();
        let (r, mem, _) =
            run_instrumented(&m, "store2", i.args.clone(), i.memory().unwrap()).unwrap();
        let plain = m
            .run(
                "store2",
                i.args.clone(),
                i.memory().unwrap(),
                Options::default(),
            )
            .unwrap();
        assert_eq!(r, plain.results);
        assert_eq!(mem, plain.memory);
    }
}
