//! AVX/AVX2 instructions.
//!
//! `semantics` splits operands into lanes and works lane by lane.
//! `opsv` computes on whole 128/256-bit words with masks and shifts.

use std::sync::Arc;

use super::{w, ArgLoc, ArgTy, Descriptor, IValue, IsaError, OperandKind, SemFn, VectorSem};
use crate::word::{Width, Word};

use Width::{W128, W16, W256, W32, W64, W8};

fn lanes(x: Word, lw: Width) -> Vec<Word> {
    x.split(lw).expect("lane width divides word width")
}

fn join(v: &[Word]) -> Word {
    Word::join(v).expect("lanes form a word")
}

/// `v` repeated in every `lw`-bit lane of a `total`-bit word.
fn rep(total: Width, lw: Width, v: u64) -> Word {
    let mut acc = Word::zero(total);
    let lane = Word::from_u64(lw, v).zext(total);
    for i in 0..total.bits() / lw.bits() {
        acc = acc.or(&lane.shl_wrapping(i * lw.bits()));
    }
    acc
}

/// Mask selecting lane `i`.
fn lane_mask(total: Width, lw: Width, i: u32) -> Word {
    Word::ones(lw).zext(total).shl_wrapping(i * lw.bits())
}

/// The `i`-th `lw`-bit lane of `x`, as a low-aligned value.
fn get(x: Word, lw: Width, i: u32) -> Word {
    x.shr_wrapping(i * lw.bits()).zext(lw)
}

fn args2(a: &[IValue]) -> Result<(Word, Word), IsaError> {
    Ok((a[0].word()?, a[1].word()?))
}

struct Src {
    ty: Width,
    view: Option<Width>,
    kind: OperandKind,
}

fn vsrc(ty: Width, lw: Width) -> Src {
    Src {
        ty,
        view: Some(lw),
        kind: OperandKind::Oprd,
    }
}

fn imm() -> Src {
    Src {
        ty: W8,
        view: None,
        kind: OperandKind::Imm8,
    }
}

fn scalar_src(ty: Width) -> Src {
    Src {
        ty,
        view: None,
        kind: OperandKind::Oprd,
    }
}

fn vd(
    name: &str,
    mnemonic: &str,
    srcs: Vec<Src>,
    dst: Width,
    ops: SemFn,
    opsv: SemFn,
) -> Descriptor {
    let mut operands = vec![OperandKind::Reg];
    operands.extend(srcs.iter().map(|s| s.kind));
    Descriptor {
        name: format!("x86_{name}"),
        mnemonic: mnemonic.to_string(),
        sources: srcs
            .iter()
            .enumerate()
            .map(|(i, s)| ArgLoc::E(s.ty, i + 1))
            .collect(),
        dests: vec![ArgLoc::E(dst, 0)],
        src_types: srcs.iter().map(|s| ArgTy::Word(s.ty)).collect(),
        dst_types: vec![ArgTy::Word(dst)],
        operands,
        semantics: ops,
        vector: Some(VectorSem {
            lane_views: srcs.iter().map(|s| s.view).collect(),
            opsv,
        }),
        reads_memory: false,
        writes_memory: false,
        variable_time: false,
    }
}

fn suffix(total: Width, lw: Width) -> String {
    format!("{}u{}", total.bits() / lw.bits(), lw.bits())
}

/// Lane shapes of the packed integer instructions.
const SHAPES: [(Width, Width); 8] = [
    (W256, W8),
    (W256, W16),
    (W256, W32),
    (W256, W64),
    (W128, W8),
    (W128, W16),
    (W128, W32),
    (W128, W64),
];

type Lane2 = fn(&Word, &Word) -> Word;

fn lanewise2(lw: Width, f: Lane2) -> SemFn {
    Arc::new(move |a: &[IValue]| {
        let (x, y) = args2(a)?;
        let r: Vec<Word> = lanes(x, lw)
            .iter()
            .zip(lanes(y, lw))
            .map(|(p, q)| f(p, &q))
            .collect();
        Ok(vec![w(join(&r))])
    })
}

fn arith(out: &mut Vec<Descriptor>) {
    for (total, lw) in SHAPES {
        let sfx = suffix(total, lw);
        let h = rep(total, lw, 1 << (lw.bits() - 1));
        let nh = h.not();
        out.push(vd(
            &format!("VPADD_{sfx}"),
            "VPADD",
            vec![vsrc(total, lw), vsrc(total, lw)],
            total,
            lanewise2(lw, Word::add),
            Arc::new(move |a: &[IValue]| {
                let (x, y) = args2(a)?;
                let low = x.and(&nh).add(&y.and(&nh));
                Ok(vec![w(low.xor(&x.xor(&y).and(&h)))])
            }),
        ));
        out.push(vd(
            &format!("VPSUB_{sfx}"),
            "VPSUB",
            vec![vsrc(total, lw), vsrc(total, lw)],
            total,
            lanewise2(lw, Word::sub),
            Arc::new(move |a: &[IValue]| {
                let (x, y) = args2(a)?;
                let d = x.or(&h).sub(&y.and(&nh));
                Ok(vec![w(d.xor(&x.xor(&y.not()).and(&h)))])
            }),
        ));
    }
}

fn bitwise(out: &mut Vec<Descriptor>) {
    let ops: [(&str, Lane2); 4] = [
        ("VPAND", Word::and),
        ("VPOR", Word::or),
        ("VPXOR", Word::xor),
        ("VPANDN", |a, b| a.not().and(b)),
    ];
    for total in [W128, W256] {
        for (name, f) in ops {
            out.push(vd(
                &format!("{name}_{}", total.bits()),
                name,
                vec![vsrc(total, W64), vsrc(total, W64)],
                total,
                lanewise2(W64, f),
                Arc::new(move |a: &[IValue]| {
                    let (x, y) = args2(a)?;
                    Ok(vec![w(f(&x, &y))])
                }),
            ));
        }
    }
}

fn shifts(out: &mut Vec<Descriptor>) {
    for (total, lw) in SHAPES {
        if lw == W8 {
            continue;
        }
        let sfx = suffix(total, lw);
        for left in [true, false] {
            let name = if left { "VPSLL" } else { "VPSRL" };
            out.push(vd(
                &format!("{name}_{sfx}"),
                name,
                vec![vsrc(total, lw), imm()],
                total,
                Arc::new(move |a: &[IValue]| {
                    let (x, c) = args2(a)?;
                    let n = c.low_u64() as u32;
                    let r: Vec<Word> = lanes(x, lw)
                        .iter()
                        .map(|l| {
                            if left {
                                l.shl_wrapping(n)
                            } else {
                                l.shr_wrapping(n)
                            }
                        })
                        .collect();
                    Ok(vec![w(join(&r))])
                }),
                Arc::new(move |a: &[IValue]| {
                    let (x, c) = args2(a)?;
                    let n = c.low_u64() as u32;
                    if n >= lw.bits() {
                        return Ok(vec![w(Word::zero(total))]);
                    }
                    let ones = Word::ones(lw);
                    let r = if left {
                        x.shl_wrapping(n)
                            .and(&rep(total, lw, ones.shl_wrapping(n).low_u64()))
                    } else {
                        x.shr_wrapping(n)
                            .and(&rep(total, lw, ones.shr_wrapping(n).low_u64()))
                    };
                    Ok(vec![w(r)])
                }),
            ));
        }
    }
    for (total, lw) in [(W256, W64), (W256, W32), (W128, W64), (W128, W32)] {
        let sfx = suffix(total, lw);
        for left in [true, false] {
            let name = if left { "VPSLLV" } else { "VPSRLV" };
            out.push(vd(
                &format!("{name}_{sfx}"),
                name,
                vec![vsrc(total, lw), vsrc(total, lw)],
                total,
                lanewise2(lw, if left { shl_var } else { shr_var }),
                Arc::new(move |a: &[IValue]| {
                    let (x, c) = args2(a)?;
                    let mut acc = Word::zero(total);
                    for i in 0..total.bits() / lw.bits() {
                        let m = lane_mask(total, lw, i);
                        let n = get(c, lw, i).low_u64();
                        if n >= lw.bits() as u64 {
                            continue;
                        }
                        let s = x.and(&m);
                        let moved = if left {
                            s.shl_wrapping(n as u32)
                        } else {
                            s.shr_wrapping(n as u32)
                        };
                        acc = acc.or(&moved.and(&m));
                    }
                    Ok(vec![w(acc)])
                }),
            ));
        }
    }
}

fn shl_var(x: &Word, c: &Word) -> Word {
    let n = c.low_u64();
    if n >= x.width().bits() as u64 {
        Word::zero(x.width())
    } else {
        x.shl_wrapping(n as u32)
    }
}

fn shr_var(x: &Word, c: &Word) -> Word {
    let n = c.low_u64();
    if n >= x.width().bits() as u64 {
        Word::zero(x.width())
    } else {
        x.shr_wrapping(n as u32)
    }
}

fn mulu(out: &mut Vec<Descriptor>) {
    for total in [W128, W256] {
        out.push(vd(
            &format!("VPMULU_{}", total.bits()),
            "VPMULUDQ",
            vec![vsrc(total, W64), vsrc(total, W64)],
            total,
            lanewise2(W64, |a, b| {
                Word::from_u64(
                    W64,
                    (a.low_u64() & 0xffff_ffff) * (b.low_u64() & 0xffff_ffff),
                )
            }),
            Arc::new(move |a: &[IValue]| {
                let (x, y) = args2(a)?;
                let lo = rep(total, W64, 0xffff_ffff);
                let x = x.and(&lo);
                let mut acc = Word::zero(total);
                for i in 0..total.bits() / 64 {
                    let factor = Word::from_u64(total, get(y, W32, 2 * i).low_u64());
                    acc = acc.or(&x.and(&lane_mask(total, W64, i)).mul(&factor));
                }
                Ok(vec![w(acc)])
            }),
        ));
    }
}

fn shuffles(out: &mut Vec<Descriptor>) {
    for total in [W128, W256] {
        out.push(vd(
            &format!("VPSHUFD_{}", total.bits()),
            "VPSHUFD",
            vec![vsrc(total, W32), imm()],
            total,
            Arc::new(move |a: &[IValue]| {
                let (x, c) = args2(a)?;
                let imm = c.low_u64();
                let l = lanes(x, W32);
                let r: Vec<Word> = (0..l.len())
                    .map(|k| {
                        let sel = (imm >> (2 * (k % 4))) & 3;
                        l[(k / 4) * 4 + sel as usize]
                    })
                    .collect();
                Ok(vec![w(join(&r))])
            }),
            Arc::new(move |a: &[IValue]| {
                let (x, c) = args2(a)?;
                let imm = c.low_u64() as u32;
                let mut acc = Word::zero(total);
                for half in 0..total.bits() / 128 {
                    for k in 0..4 {
                        let sel = (imm >> (2 * k)) & 3;
                        let piece = x
                            .shr_wrapping(128 * half + 32 * sel)
                            .and(&lane_mask(total, W32, 0));
                        acc = acc.or(&piece.shl_wrapping(128 * half + 32 * k));
                    }
                }
                Ok(vec![w(acc)])
            }),
        ));
        out.push(vd(
            &format!("VPSHUFB_{}", total.bits()),
            "VPSHUFB",
            vec![vsrc(total, W8), vsrc(total, W8)],
            total,
            Arc::new(move |a: &[IValue]| {
                let (x, m) = args2(a)?;
                let xb = lanes(x, W8);
                let r: Vec<Word> = lanes(m, W8)
                    .iter()
                    .enumerate()
                    .map(|(k, sel)| {
                        let s = sel.low_u64();
                        if s & 0x80 != 0 {
                            Word::zero(W8)
                        } else {
                            xb[(k / 16) * 16 + (s & 15) as usize]
                        }
                    })
                    .collect();
                Ok(vec![w(join(&r))])
            }),
            Arc::new(move |a: &[IValue]| {
                let (x, m) = args2(a)?;
                let bytes = lane_mask(total, W8, 0);
                let mut acc = Word::zero(total);
                for k in 0..total.bits() / 8 {
                    let s = m.shr_wrapping(8 * k).low_u64() as u32 & 0xff;
                    if s & 0x80 == 0 {
                        let from = (k / 16) * 128 + 8 * (s & 15);
                        acc = acc.or(&x.shr_wrapping(from).and(&bytes).shl_wrapping(8 * k));
                    }
                }
                Ok(vec![w(acc)])
            }),
        ));
    }
}

fn broadcasts(out: &mut Vec<Descriptor>) {
    for (total, lw) in [
        (W256, W64),
        (W256, W32),
        (W256, W128),
        (W128, W64),
        (W128, W32),
        (W256, W8),
        (W128, W8),
    ] {
        out.push(vd(
            &format!("VPBROADCAST_{}", suffix(total, lw)),
            "VPBROADCAST",
            vec![scalar_src(lw)],
            total,
            Arc::new(move |a: &[IValue]| {
                let v = a[0].word()?;
                let n = (total.bits() / lw.bits()) as usize;
                Ok(vec![w(join(&vec![v; n]))])
            }),
            Arc::new(move |a: &[IValue]| {
                let v = a[0].word()?.zext(total);
                Ok(vec![w(v.mul(&rep(total, lw, 1)))])
            }),
        ));
    }
}

fn unpacks(out: &mut Vec<Descriptor>) {
    for total in [W128, W256] {
        for lw in [W32, W64] {
            for high in [false, true] {
                let kind = if high { "H" } else { "L" };
                let per = 128 / lw.bits();
                out.push(vd(
                    &format!("VPUNPCK{kind}_{}", suffix(total, lw)),
                    if lw == W64 {
                        "VPUNPCKxQDQ"
                    } else {
                        "VPUNPCKxDQ"
                    },
                    vec![vsrc(total, lw), vsrc(total, lw)],
                    total,
                    Arc::new(move |a: &[IValue]| {
                        let (x, y) = args2(a)?;
                        let (xl, yl) = (lanes(x, lw), lanes(y, lw));
                        let mut r = Vec::new();
                        for half in 0..(total.bits() / 128) as usize {
                            let base =
                                half * per as usize + if high { per as usize / 2 } else { 0 };
                            for i in 0..per as usize / 2 {
                                r.push(xl[base + i]);
                                r.push(yl[base + i]);
                            }
                        }
                        Ok(vec![w(join(&r))])
                    }),
                    Arc::new(move |a: &[IValue]| {
                        let (x, y) = args2(a)?;
                        let one = lane_mask(total, lw, 0);
                        let mut acc = Word::zero(total);
                        for half in 0..total.bits() / 128 {
                            for i in 0..per / 2 {
                                let src =
                                    128 * half + lw.bits() * (i + if high { per / 2 } else { 0 });
                                let dst = 128 * half + lw.bits() * 2 * i;
                                acc = acc.or(&x.shr_wrapping(src).and(&one).shl_wrapping(dst));
                                acc = acc.or(&y
                                    .shr_wrapping(src)
                                    .and(&one)
                                    .shl_wrapping(dst + lw.bits()));
                            }
                        }
                        Ok(vec![w(acc)])
                    }),
                ));
            }
        }
    }
}

fn lane_moves(out: &mut Vec<Descriptor>) {
    out.push(vd(
        "VPERM2I128",
        "VPERM2I128",
        vec![vsrc(W256, W128), vsrc(W256, W128), imm()],
        W256,
        Arc::new(|a: &[IValue]| {
            let (x, y) = args2(a)?;
            let imm = a[2].word()?.low_u64();
            let src = [lanes(x, W128), lanes(y, W128)].concat();
            let r: Vec<Word> = (0..2)
                .map(|h| {
                    let c = imm >> (4 * h);
                    if c & 8 != 0 {
                        Word::zero(W128)
                    } else {
                        src[(c & 3) as usize]
                    }
                })
                .collect();
            Ok(vec![w(join(&r))])
        }),
        Arc::new(|a: &[IValue]| {
            let (x, y) = args2(a)?;
            let imm = a[2].word()?.low_u64() as u32;
            let low = lane_mask(W256, W128, 0);
            let mut acc = Word::zero(W256);
            for h in 0..2 {
                let c = imm >> (4 * h);
                if c & 8 == 0 {
                    let s = if c & 2 == 0 { x } else { y };
                    let piece = s.shr_wrapping(128 * (c & 1)).and(&low);
                    acc = acc.or(&piece.shl_wrapping(128 * h));
                }
            }
            Ok(vec![w(acc)])
        }),
    ));
    out.push(vd(
        "VPERMQ",
        "VPERMQ",
        vec![vsrc(W256, W64), imm()],
        W256,
        Arc::new(|a: &[IValue]| {
            let (x, c) = args2(a)?;
            let imm = c.low_u64();
            let l = lanes(x, W64);
            let r: Vec<Word> = (0..4).map(|k| l[((imm >> (2 * k)) & 3) as usize]).collect();
            Ok(vec![w(join(&r))])
        }),
        Arc::new(|a: &[IValue]| {
            let (x, c) = args2(a)?;
            let imm = c.low_u64() as u32;
            let mut acc = Word::zero(W256);
            for k in 0..4 {
                let sel = (imm >> (2 * k)) & 3;
                acc = acc.or(&x
                    .shr_wrapping(64 * sel)
                    .and(&lane_mask(W256, W64, 0))
                    .shl_wrapping(64 * k));
            }
            Ok(vec![w(acc)])
        }),
    ));
    out.push(vd(
        "VEXTRACTI128",
        "VEXTRACTI128",
        vec![vsrc(W256, W128), imm()],
        W128,
        Arc::new(|a: &[IValue]| {
            let (x, c) = args2(a)?;
            Ok(vec![w(lanes(x, W128)[(c.low_u64() & 1) as usize])])
        }),
        Arc::new(|a: &[IValue]| {
            let (x, c) = args2(a)?;
            Ok(vec![w(x
                .shr_wrapping(128 * (c.low_u64() as u32 & 1))
                .zext(W128))])
        }),
    ));
    out.push(vd(
        "VINSERTI128",
        "VINSERTI128",
        vec![vsrc(W256, W128), scalar_src(W128), imm()],
        W256,
        Arc::new(|a: &[IValue]| {
            let (x, y) = args2(a)?;
            let mut l = lanes(x, W128);
            l[(a[2].word()?.low_u64() & 1) as usize] = y;
            Ok(vec![w(join(&l))])
        }),
        Arc::new(|a: &[IValue]| {
            let (x, y) = args2(a)?;
            let sh = 128 * (a[2].word()?.low_u64() as u32 & 1);
            let keep = lane_mask(W256, W128, 0).shl_wrapping(sh).not();
            Ok(vec![w(x.and(&keep).or(&y.zext(W256).shl_wrapping(sh)))])
        }),
    ));
    out.push(vd(
        "VPEXTR_64",
        "VPEXTRQ",
        vec![vsrc(W128, W64), imm()],
        W64,
        Arc::new(|a: &[IValue]| {
            let (x, c) = args2(a)?;
            Ok(vec![w(lanes(x, W64)[(c.low_u64() & 1) as usize])])
        }),
        Arc::new(|a: &[IValue]| {
            let (x, c) = args2(a)?;
            Ok(vec![w(x
                .shr_wrapping(64 * (c.low_u64() as u32 & 1))
                .zext(W64))])
        }),
    ));
}

pub(super) fn descriptors() -> Vec<Descriptor> {
    let mut out = Vec::new();
    arith(&mut out);
    bitwise(&mut out);
    shifts(&mut out);
    mulu(&mut out);
    shuffles(&mut out);
    broadcasts(&mut out);
    unpacks(&mut out);
    lane_moves(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{lookup, ops_opsv_agree};

    fn v256(l: [u64; 4]) -> IValue {
        w(Word::from_limbs(W256, l))
    }

    #[test]
    fn broadcast_4u64() {
        let d = lookup("x86_VPBROADCAST_4u64").unwrap();
        let x = w(Word::from_u64(W64, 0x1234));
        assert_eq!(d.exec(&[x]).unwrap(), vec![v256([0x1234; 4])]);
        assert!(ops_opsv_agree(d, &[x]).unwrap());
    }

    #[test]
    fn vpadd_wraps_per_lane() {
        let d = lookup("x86_VPADD_4u64").unwrap();
        let args = [v256([u64::MAX, 1, 2, 3]), v256([1, 1, 1, 1])];
        assert_eq!(d.exec(&args).unwrap(), vec![v256([0, 2, 3, 4])]);
        assert!(ops_opsv_agree(d, &args).unwrap());
    }

    #[test]
    fn pshufd_rotates_within_halves() {
        let d = lookup("x86_VPSHUFD_256").unwrap();
        let x = Word::join(&(0..8).map(|i| Word::from_u64(W32, i)).collect::<Vec<_>>()).unwrap();
        let out = d.exec(&[w(x), w(Word::from_u64(W8, 0x39))]).unwrap()[0]
            .word()
            .unwrap();
        let got: Vec<u64> = out
            .split(W32)
            .unwrap()
            .iter()
            .map(|l| l.low_u64())
            .collect();
        assert_eq!(got, vec![1, 2, 3, 0, 5, 6, 7, 4]);
    }
}
