//! Scalar x86 instructions.

use std::sync::Arc;

use super::{
    fl, w, ArgLoc, ArgTy, Descriptor, Flag, IValue, IsaError, OperandKind, Reg, SemFn, UNDEF,
};
use crate::word::{Width, Word};

const SCALAR: [Width; 4] = [Width::W8, Width::W16, Width::W32, Width::W64];

fn flag_locs() -> Vec<ArgLoc> {
    Flag::ALL.iter().map(|f| ArgLoc::F(*f)).collect()
}

fn ty_of(loc: &ArgLoc) -> ArgTy {
    match loc {
        ArgLoc::F(_) | ArgLoc::C(_) => ArgTy::Bool,
        ArgLoc::R(_) => unreachable!("register types are given explicitly"),
        ArgLoc::E(w, _) => ArgTy::Word(*w),
    }
}

struct Spec {
    name: String,
    mnemonic: &'static str,
    sources: Vec<ArgLoc>,
    dests: Vec<ArgLoc>,
    operands: Vec<OperandKind>,
    width: Width,
    variable_time: bool,
}

impl Spec {
    fn build(self, sem: SemFn) -> Descriptor {
        let t = |l: &ArgLoc| match l {
            ArgLoc::R(_) => ArgTy::Word(self.width),
            other => ty_of(other),
        };
        Descriptor {
            src_types: self.sources.iter().map(t).collect(),
            dst_types: self.dests.iter().map(t).collect(),
            name: self.name,
            mnemonic: self.mnemonic.to_string(),
            sources: self.sources,
            dests: self.dests,
            operands: self.operands,
            semantics: sem,
            vector: None,
            reads_memory: false,
            writes_memory: false,
            variable_time: self.variable_time,
        }
    }
}

fn spec(
    base: &str,
    mnemonic: &'static str,
    width: Width,
    sources: Vec<ArgLoc>,
    dests: Vec<ArgLoc>,
    operands: Vec<OperandKind>,
) -> Spec {
    Spec {
        name: format!("x86_{base}_{}", width.bits()),
        mnemonic,
        sources,
        dests,
        operands,
        width,
        variable_time: false,
    }
}

/// OF, CF, then SF, PF and ZF computed from `r`.
fn arith_flags(of: IValue, cf: IValue, r: Word) -> Vec<IValue> {
    vec![
        of,
        cf,
        fl(r.msb()),
        fl(r.parity_low_byte()),
        fl(r.is_zero()),
        w(r),
    ]
}

fn with_flags(dests: Vec<ArgLoc>) -> Vec<ArgLoc> {
    let mut v = flag_locs();
    v.extend(dests);
    v
}

fn words(args: &[IValue]) -> Result<Vec<Word>, IsaError> {
    args.iter()
        .filter(|a| matches!(a, IValue::Word(_)))
        .map(|a| a.word())
        .collect()
}

fn masked_count(c: Word, width: Width) -> u32 {
    (c.low_u64() & (width.bits() as u64 - 1)) as u32
}

pub(super) fn descriptors() -> Vec<Descriptor> {
    use ArgLoc::E;
    use OperandKind::{Cond, Imm8, Oprd};
    let mut out = Vec::new();
    for wd in SCALAR {
        let e = |i| E(wd, i);
        out.push(
            spec("MOV", "MOV", wd, vec![e(1)], vec![e(0)], vec![Oprd, Oprd])
                .build(Arc::new(|a: &[IValue]| Ok(vec![a[0]]))),
        );

        for (base, sub) in [("ADD", false), ("SUB", true)] {
            out.push(
                spec(
                    base,
                    base,
                    wd,
                    vec![e(0), e(1)],
                    with_flags(vec![e(0)]),
                    vec![Oprd, Oprd],
                )
                .build(Arc::new(move |a: &[IValue]| {
                    let v = words(a)?;
                    Ok(add_sub(v[0], v[1], false, sub))
                })),
            );
        }
        for (base, sub) in [("ADC", false), ("SBB", true)] {
            out.push(
                spec(
                    base,
                    base,
                    wd,
                    vec![e(0), e(1), ArgLoc::F(Flag::CF)],
                    with_flags(vec![e(0)]),
                    vec![Oprd, Oprd],
                )
                .build(Arc::new(move |a: &[IValue]| {
                    let v = words(a)?;
                    Ok(add_sub(v[0], v[1], a[2].flag()?, sub))
                })),
            );
        }

        out.push(
            spec(
                "MUL",
                "MUL",
                wd,
                vec![ArgLoc::R(Reg::RAX), e(0)],
                with_flags(vec![ArgLoc::R(Reg::RDX), ArgLoc::R(Reg::RAX)]),
                vec![Oprd],
            )
            .build(Arc::new(|a: &[IValue]| {
                let v = words(a)?;
                let (hi, lo) = v[0].mul_wide(&v[1]);
                let of = fl(!hi.is_zero());
                Ok(vec![of, of, UNDEF, UNDEF, UNDEF, w(hi), w(lo)])
            })),
        );

        out.push(
            spec(
                "IMUL",
                "IMUL",
                wd,
                vec![e(0), e(1)],
                with_flags(vec![e(0)]),
                vec![Oprd, Oprd],
            )
            .build(Arc::new(|a: &[IValue]| {
                let v = words(a)?;
                let full = v[0].to_sint() * v[1].to_sint();
                let r = v[0].mul(&v[1]);
                let of = fl(r.to_sint() != full);
                Ok(vec![of, of, UNDEF, UNDEF, UNDEF, w(r)])
            })),
        );

        if wd >= Width::W32 {
            out.push(
                spec(
                    "MULX",
                    "MULX",
                    wd,
                    vec![ArgLoc::R(Reg::RDX), e(2)],
                    vec![e(0), e(1)],
                    vec![OperandKind::Reg, OperandKind::Reg, Oprd],
                )
                .build(Arc::new(|a: &[IValue]| {
                    let v = words(a)?;
                    let (hi, lo) = v[0].mul_wide(&v[1]);
                    Ok(vec![w(hi), w(lo)])
                })),
            );
        }

        let mut div = spec(
            "DIV",
            "DIV",
            wd,
            vec![ArgLoc::R(Reg::RDX), ArgLoc::R(Reg::RAX), e(0)],
            with_flags(vec![ArgLoc::R(Reg::RAX), ArgLoc::R(Reg::RDX)]),
            vec![Oprd],
        );
        div.variable_time = true;
        out.push(div.build(Arc::new(move |a: &[IValue]| {
            let v = words(a)?;
            if v[2].is_zero() {
                return Err(IsaError::DivByZero);
            }
            let bits = wd.bits();
            let num = (v[0].low_u64() as u128) << bits | v[1].low_u64() as u128;
            let d = v[2].low_u64() as u128;
            let q = num / d;
            if q >> bits != 0 {
                return Err(IsaError::DivOverflow);
            }
            let r = num % d;
            Ok(vec![
                UNDEF,
                UNDEF,
                UNDEF,
                UNDEF,
                UNDEF,
                w(Word::from_u64(wd, q as u64)),
                w(Word::from_u64(wd, r as u64)),
            ])
        })));

        type Bitop = fn(&Word, &Word) -> Word;
        let bitops: [(&str, Bitop); 3] = [("AND", Word::and), ("OR", Word::or), ("XOR", Word::xor)];
        for (base, f) in bitops {
            out.push(
                spec(
                    base,
                    base,
                    wd,
                    vec![e(0), e(1)],
                    with_flags(vec![e(0)]),
                    vec![Oprd, Oprd],
                )
                .build(Arc::new(move |a: &[IValue]| {
                    let v = words(a)?;
                    Ok(arith_flags(fl(false), fl(false), f(&v[0], &v[1])))
                })),
            );
        }

        out.push(
            spec("NOT", "NOT", wd, vec![e(0)], vec![e(0)], vec![Oprd])
                .build(Arc::new(|a: &[IValue]| Ok(vec![w(a[0].word()?.not())]))),
        );

        for base in ["SHL", "SHR", "SAR"] {
            out.push(
                spec(
                    base,
                    base,
                    wd,
                    vec![e(0), E(Width::W8, 1)],
                    with_flags(vec![e(0)]),
                    vec![Oprd, Imm8],
                )
                .build(Arc::new(move |a: &[IValue]| {
                    let v = words(a)?;
                    Ok(shift(base, v[0], masked_count(v[1], wd)))
                })),
            );
        }
        for base in ["ROL", "ROR"] {
            out.push(
                spec(
                    base,
                    base,
                    wd,
                    vec![e(0), E(Width::W8, 1)],
                    vec![ArgLoc::F(Flag::OF), ArgLoc::F(Flag::CF), e(0)],
                    vec![Oprd, Imm8],
                )
                .build(Arc::new(move |a: &[IValue]| {
                    let v = words(a)?;
                    Ok(rotate(base == "ROL", v[0], masked_count(v[1], wd)))
                })),
            );
        }

        out.push(
            spec(
                "CMOV",
                "CMOVcc",
                wd,
                vec![ArgLoc::C(0), e(1), e(2)],
                vec![e(2)],
                vec![Cond, Oprd, OperandKind::Reg],
            )
            .build(Arc::new(|a: &[IValue]| {
                Ok(vec![if a[0].flag()? { a[1] } else { a[2] }])
            })),
        );

        let mut set0 = spec(
            "set0",
            "XOR r r",
            wd,
            vec![],
            with_flags(vec![e(0)]),
            vec![OperandKind::Reg],
        );
        set0.name = format!("set0_{}", wd.bits());
        out.push(set0.build(Arc::new(move |_: &[IValue]| {
            Ok(arith_flags(fl(false), fl(false), Word::zero(wd)))
        })));
    }
    out
}

fn add_sub(a: Word, b: Word, cin: bool, sub: bool) -> Vec<IValue> {
    let (r, c) = if sub {
        a.sub_borrow(&b, cin)
    } else {
        a.add_carry(&b, cin)
    };
    let of = if sub {
        a.msb() != b.msb() && r.msb() != a.msb()
    } else {
        a.msb() == b.msb() && r.msb() != a.msb()
    };
    arith_flags(fl(of), fl(c), r)
}

fn shift(kind: &str, a: Word, n: u32) -> Vec<IValue> {
    if n == 0 {
        return vec![UNDEF, UNDEF, UNDEF, UNDEF, UNDEF, w(a)];
    }
    let bits = a.width().bits();
    let (r, cf) = match kind {
        "SHL" => (a.shl_wrapping(n), a.bit(bits - n)),
        "SHR" => (a.shr_wrapping(n), a.bit(n - 1)),
        _ => (a.sar(n).expect("count below width"), a.bit(n - 1)),
    };
    let of = if n != 1 {
        UNDEF
    } else {
        match kind {
            "SHL" => fl(r.msb() != cf),
            "SHR" => fl(a.msb()),
            _ => fl(false),
        }
    };
    arith_flags(of, fl(cf), r)
}

fn rotate(left: bool, a: Word, n: u32) -> Vec<IValue> {
    if n == 0 {
        return vec![UNDEF, UNDEF, w(a)];
    }
    let bits = a.width().bits();
    let r = if left { a.rol(n) } else { a.ror(n) }.expect("count below width");
    let cf = if left { r.bit(0) } else { r.msb() };
    let of = match (n, left) {
        (1, true) => fl(r.msb() != cf),
        (1, false) => fl(r.msb() != r.bit(bits - 2)),
        _ => UNDEF,
    };
    vec![of, fl(cf), w(r)]
}
