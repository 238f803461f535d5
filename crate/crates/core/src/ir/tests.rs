use super::*;
use crate::word::Width;

const SHUFFLE: &str = "
fn shuffle_state(reg u256[4] k) -> reg u256[4] {
    k[1] = #x86_VPSHUFD_256(k[1], (4u2)[ 0, 3, 2, 1]);
    k[2] = #x86_VPSHUFD_256(k[2], (4u2)[ 1, 0, 3, 2]);
    k[3] = #x86_VPSHUFD_256(k[3], (4u2)[ 2, 1, 0, 3]);
    return k;
}
";

const R4: &str = "
inline fn R4(reg u256 x, inline int r0, inline int r1, inline int r2, inline int r3) -> reg u256 {
    global u256 l, r;
    reg u256 a, b;
    l = (4u64)[r3, r2, r1, r0];
    r = (4u64)[64 - r3, 64 - r2, 64 - r1, 64 - r0];
    a = #x86_VPSLLV_4u64(x, l);
    b = #x86_VPSRLV_4u64(x, r);
    x = a ^ b;
    return x;
}

export fn twice(reg u256 x) -> reg u256 {
    x = R4(x, 1, 2, 3, 4);
    x = R4(x, 1, 2, 3, 4);
    x = R4(x, 5, 6, 7, 8);
    return x;
}
";

fn roundtrip(src: &str) {
    let p = parse_program(src).unwrap();
    let text = print_program(&p);
    let q = parse_program(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    assert_eq!(p, q, "{text}");
}

#[test]
fn minimal_function_parses() {
    let p = parse_program("fn f(reg u64 x) -> reg u64 { x = x; return x; }").unwrap();
    assert_eq!(p.functions().count(), 1);
    roundtrip("fn f(reg u64 x) -> reg u64 { x = x; return x; }");
}

#[test]
fn shuffle_state_parses_and_checks() {
    roundtrip(SHUFFLE);
    let tp = typecheck(&parse_program(SHUFFLE).unwrap()).unwrap();
    let f = tp.function("shuffle_state").unwrap();
    let StmtKind::Assign {
        rhs: Rhs::Intrinsic { name, args },
        ..
    } = &f.body[0].kind
    else {
        panic!()
    };
    assert_eq!(name, "x86_VPSHUFD_256");
    assert!(matches!(
        args[1],
        Expr::VecLit {
            lanes: 4,
            bits: 2,
            ..
        }
    ));
}

#[test]
fn lane_annotated_compound_add() {
    let s = parse_stmts("x +4u64= z;").unwrap();
    let StmtKind::Assign {
        lhs,
        rhs: Rhs::Expr(Expr::Binary { op, ann, .. }),
    } = &s[0].kind
    else {
        panic!()
    };
    assert_eq!(lhs[0], Lval::Var("x".into()));
    assert_eq!(*op, BinOp::Add);
    assert_eq!(
        *ann,
        Some(OpAnn::Vector {
            lanes: 4,
            lane: Width::W64
        })
    );
    let src = "fn f(reg u256 x, reg u256 z) -> reg u256 { x +4u64= z; return x; }";
    typecheck(&parse_program(src).unwrap()).unwrap();
}

#[test]
fn syntax_error_has_position() {
    let e = parse_program("fn f() {\n  x = ;\n}").unwrap_err();
    assert_eq!(e.loc.line, 2);
    assert!(parse_program("fn f() { x = #nope(1); }").is_err());
}

#[test]
fn truncating_assignment_inserts_cast() {
    let src = "fn f(reg u64 a) -> reg u32 { reg u32 b; b = a; return b; }";
    let tp = typecheck(&parse_program(src).unwrap()).unwrap();
    let StmtKind::Assign {
        rhs: Rhs::Expr(e), ..
    } = &tp.function("f").unwrap().body[1].kind
    else {
        panic!()
    };
    assert_eq!(*e, Expr::cast(Width::W32, Expr::var("a")));
    let widen = "fn f(reg u32 a) -> reg u64 { reg u64 b; b = a; return b; }";
    let err = typecheck(&parse_program(widen).unwrap()).unwrap_err();
    assert_eq!(err.kind, TypeErrorKind::WidthMismatch);
}

#[test]
fn register_array_needs_constant_index() {
    let bad = "fn f(reg u64 i) -> reg u64 { reg u64[4] r; reg u64 x; x = r[i]; return x; }";
    let err = typecheck(&parse_program(bad).unwrap()).unwrap_err();
    assert_eq!(err.kind, TypeErrorKind::RuntimeRegIndex);
    let ok = "fn f(reg u64 i) -> reg u8 { stack u64[4] s; reg u8 x; x = (u8)s.[i]; return x; }";
    typecheck(&parse_program(ok).unwrap()).unwrap();
}

#[test]
fn global_write_rejected() {
    let src = "global u64 g = 5; fn f() { g = 1; }";
    let err = typecheck(&parse_program(src).unwrap()).unwrap_err();
    assert_eq!(err.kind, TypeErrorKind::GlobalWrite);
}

#[test]
fn recursion_rejected() {
    let src = "fn f(reg u64 x) -> reg u64 { x = g(x); return x; } fn g(reg u64 x) -> reg u64 { x = f(x); return x; }";
    let err = typecheck(&parse_program(src).unwrap()).unwrap_err();
    assert_eq!(err.kind, TypeErrorKind::Recursion);
}

#[test]
fn unroll_produces_one_assignment_per_iteration() {
    let src = "fn f() -> reg u64 { stack u64[4] x; inline int i; reg u64 y; for i = 0 to 3 { x[i] = 0; } y = x[0]; return y; }";
    let tp = compile(src).unwrap();
    let f = tp.function("f").unwrap();
    let sets = f
        .body
        .iter()
        .filter(|s| matches!(&s.kind, StmtKind::Assign { lhs, .. } if matches!(lhs[0], Lval::Set { .. })))
        .count();
    assert_eq!(sets, 4);
    assert!(!f
        .body
        .iter()
        .any(|s| matches!(s.kind, StmtKind::For { .. })));
}

#[test]
fn parameter_array_length_substituted() {
    let src = "param int N = 2; fn f() -> reg u64 { stack u64[N] x; reg u64 y; x[N - 1] = 3; y = x[1]; return y; }";
    let tp = compile(src).unwrap();
    let f = tp.function("f").unwrap();
    let StmtKind::Decl(ds) = &f.body[0].kind else {
        panic!()
    };
    assert_eq!(ds[0].ty, Ty::Array(Width::W64, Box::new(Expr::Int(2))));
    assert!(!print_program(&tp.program).contains('N'));
}

#[test]
fn equal_globals_are_merged() {
    let tp = compile(R4).unwrap();
    let gs: Vec<_> = tp.program.globals().collect();
    // shift-left and shift-right counts for (1,2,3,4) and (5,6,7,8)
    assert_eq!(gs.len(), 4);
    assert!(tp.program.functions().all(|f| f.kind != FnKind::Inline));
}

#[test]
fn expand_is_idempotent() {
    for src in [R4, SHUFFLE] {
        let once = compile(src).unwrap();
        let twice = expand(&once).unwrap();
        assert_eq!(print_program(&once.program), print_program(&twice.program));
    }
}

#[test]
fn runtime_loop_bound_rejected() {
    let src = "fn f(reg u64 n) { inline int i; for i = 0 to n { } }";
    assert!(load(src).is_err());
}

#[test]
fn unroll_limit_enforced() {
    let src = "fn f() { inline int i; reg u64 x; for i = 0 to 70000 { x = 0; } }";
    assert!(compile(src).is_err());
}
