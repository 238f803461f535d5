use super::*;
use crate::ir::{compile, load, parse_stmts};
use crate::word::{Width, Word};

const STORE2: &str = "
fn store2(reg u64 p, reg u64[2] x) {
    [p + 0] = x[0];
    [p + 8] = x[1];
}
";

fn w64(v: u64) -> Word {
    Word::from_u64(Width::W64, v)
}

fn arr64(vs: &[u64]) -> Val {
    let ws: Vec<Word> = vs.iter().map(|v| w64(*v)).collect();
    Val::Arr(Box::new(ArrayBuf::from_words(Width::W64, &ws)))
}

fn run(src: &str, entry: &str, args: Vec<Val>) -> Result<Outcome, SafetyError> {
    let m = Machine::new(&load(src).unwrap());
    m.run(entry, args, Memory::new(), Options::traced())
}

#[test]
fn store2_writes_little_endian_words() {
    let m = Machine::new(&compile(STORE2).unwrap());
    let mut mem = Memory::new();
    mem.add_region(100, 16).unwrap();
    let out = m
        .run(
            "store2",
            vec![Val::u64(100), arr64(&[7, 9])],
            mem,
            Options::traced(),
        )
        .unwrap();
    assert_eq!(
        out.memory.read_bytes(100, 16).unwrap(),
        [7, 0, 0, 0, 0, 0, 0, 0, 9, 0, 0, 0, 0, 0, 0, 0]
    );
    assert_eq!(
        out.trace,
        vec![
            LeakEvent::Addr(vec![0]),
            LeakEvent::Addr(vec![100]),
            LeakEvent::Addr(vec![1]),
            LeakEvent::Addr(vec![108])
        ]
    );
}

#[test]
fn division_by_zero_is_reported() {
    let src = "fn f(reg u64 a, reg u64 b) -> reg u64 {
        reg u64 z, q, r;
        z = 0;
        _, _, _, _, _, q, r = #x86_DIV_64(z, a, b);
        return q;
    }";
    let e = run(src, "f", vec![Val::u64(5), Val::u64(0)]).unwrap_err();
    assert_eq!(e.kind, SafetyErrorKind::DivByZero);
    assert_eq!(e.loc.line, 4);
    let ok = run(src, "f", vec![Val::u64(7), Val::u64(2)]).unwrap();
    assert_eq!(ok.results, vec![Val::u64(3)]);
}

#[test]
fn uninitialized_register_is_reported() {
    let src = "fn f() -> reg u64 { reg u64 a, b; b = a + 1; return b; }";
    let e = run(src, "f", vec![]).unwrap_err();
    assert_eq!(e.kind, SafetyErrorKind::UninitializedUse("a".into()));
}

#[test]
fn undefined_flag_is_poison() {
    let src = "fn f(reg u64 a) -> reg u64 {
        reg bool of, cf, sf, pf, zf;
        reg u64 hi, lo;
        of, cf, sf, pf, zf, hi, lo = #x86_MUL_64(a, a);
        if zf { lo = 0; }
        return lo;
    }";
    let e = run(src, "f", vec![Val::u64(3)]).unwrap_err();
    assert_eq!(e.kind, SafetyErrorKind::UninitializedUse("zf".into()));
}

#[test]
fn assignment_truncates() {
    let src = "fn f(reg u64 y) -> reg u32 { reg u32 x; x = y; return x; }";
    let out = run(src, "f", vec![Val::u64((1 << 32) + 1)]).unwrap();
    assert_eq!(out.results, vec![Val::Word(Word::from_u64(Width::W32, 1))]);
}

#[test]
fn stepping_statements() {
    let src = "fn f(reg u64 y) { stack u8[32] a; reg u8 b; reg u64 i; i = 0; }";
    let m = Machine::new(&load(src).unwrap());
    let mut st = m.state("f", vec![Val::u64(3)], Memory::new()).unwrap();
    let budget = st.budget;
    for s in parse_stmts("while false { y = 0; }").unwrap() {
        m.step(&mut st, &s).unwrap();
    }
    assert_eq!(st.get("y"), Some(&Val::u64(3)));
    assert_eq!(st.budget, budget - 1);
    for s in parse_stmts("b = 0xab; a.[17] = b;").unwrap() {
        m.step(&mut st, &s).unwrap();
    }
    let a = st.get("a").unwrap().as_array().unwrap();
    let touched: Vec<usize> = (0..32).filter(|i| a.init[*i]).collect();
    assert_eq!(touched, vec![17]);
    assert_eq!(a.bytes[17], 0xab);
}

#[test]
fn vector_mode_defaults_and_is_fixed_once_running() {
    let src = "fn f(reg u64 y) { reg u64 z; z = y; }";
    let m = Machine::new(&load(src).unwrap());
    let mut st = m.state("f", vec![Val::u64(3)], Memory::new()).unwrap();
    assert_eq!(st.mode(), VectorMode::OpsV);
    st.set_vector_mode(VectorMode::Ops).unwrap();
    m.step(&mut st, &parse_stmts("z = y;").unwrap()[0]).unwrap();
    let e = st.set_vector_mode(VectorMode::OpsV).unwrap_err();
    assert_eq!(e.kind, SafetyErrorKind::ModeSwitch);
}

#[test]
fn array_bounds_are_checked() {
    let src =
        "fn f(reg u64 i) -> reg u64 { stack u64[4] s; reg u64 x; s[i] = 1; x = s[i]; return x; }";
    assert_eq!(
        run(src, "f", vec![Val::u64(3)]).unwrap().results,
        vec![Val::u64(1)]
    );
    let e = run(src, "f", vec![Val::u64(4)]).unwrap_err();
    assert_eq!(
        e.kind,
        SafetyErrorKind::OutOfBoundsArray {
            var: "s".into(),
            index: 4
        }
    );
}

#[test]
fn memory_outside_regions_faults() {
    let src = "fn f(reg u64 p) -> reg u64 { reg u64 x; x = [p]; return x; }";
    let e = run(src, "f", vec![Val::u64(64)]).unwrap_err();
    assert_eq!(e.kind, SafetyErrorKind::OutOfRegion(64));
}

#[test]
fn budget_bounds_execution() {
    let src = "fn f() { reg u64 x; x = 0; while x == 0 { x = 0; } }";
    let m = Machine::new(&load(src).unwrap());
    let opts = Options {
        budget: 1000,
        ..Options::default()
    };
    let e = m.run("f", vec![], Memory::new(), opts).unwrap_err();
    assert_eq!(e.kind, SafetyErrorKind::BudgetExhausted);
}

#[test]
fn expanded_and_unexpanded_agree() {
    let src = "
    param int N = 4;
    inline fn sq(reg u64 x) -> reg u64 { x = x * x; return x; }
    fn f(reg u64 a) -> reg u64 {
        stack u64[N] s;
        inline int i;
        reg u64 acc, t;
        for i = 0 to N - 1 { s[i] = a + i; }
        acc = 0;
        for i = 0 to N - 1 { t = sq(s[i]); acc += t; }
        return acc;
    }";
    let a = Machine::new(&load(src).unwrap());
    let b = Machine::new(&compile(src).unwrap());
    for v in [0u64, 1, 77, u64::MAX] {
        let ra = a
            .run("f", vec![Val::u64(v)], Memory::new(), Options::default())
            .unwrap();
        let rb = b
            .run("f", vec![Val::u64(v)], Memory::new(), Options::default())
            .unwrap();
        assert_eq!(ra.results, rb.results);
    }
}

#[test]
fn lane_add_matches_in_both_modes() {
    let src = "fn f(reg u256 x, reg u256 z) -> reg u256 { x +4u64= z; return x; }";
    let m = Machine::new(&load(src).unwrap());
    let x = Word::from_limbs(Width::W256, [1, 2, 3, u64::MAX]);
    let z = Word::from_limbs(Width::W256, [10, 20, 30, 2]);
    for mode in [VectorMode::Ops, VectorMode::OpsV] {
        let opts = Options {
            mode,
            ..Options::default()
        };
        let out = m
            .run("f", vec![Val::Word(x), Val::Word(z)], Memory::new(), opts)
            .unwrap();
        assert_eq!(
            out.results,
            vec![Val::Word(Word::from_limbs(Width::W256, [11, 22, 33, 1]))]
        );
    }
}
