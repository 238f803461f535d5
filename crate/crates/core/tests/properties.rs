use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::One;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jamin::interp::{Machine, Options};
use jamin::ir::{parse_program, print_program};
use jamin::isa::{lookup, IValue, VectorMode};
use jamin::mem::Memory;
use jamin::primitives::{load_program, program_meta, program_source, PROGRAMS};
use jamin::safety::analyze;
use jamin::word::{Width, Word};

fn width() -> impl Strategy<Value = Width> {
    prop::sample::select(Width::ALL.to_vec())
}

fn word() -> impl Strategy<Value = Word> {
    (width(), any::<[u64; 4]>()).prop_map(|(w, l)| Word::from_limbs(w, l))
}

fn modulus(w: Width) -> BigUint {
    BigUint::one() << w.bits()
}

proptest! {
    #[test]
    fn shl_multiplies(x in word(), i in 0u32..256) {
        let w = x.width();
        let i = i % w.bits();
        let got = x.shl(i).unwrap().to_uint();
        prop_assert_eq!(got, (x.to_uint() << i) % modulus(w));
    }

    #[test]
    fn arithmetic_matches_big_integers(x in word(), l in any::<[u64; 4]>()) {
        let w = x.width();
        let y = Word::from_limbs(w, l);
        let (a, b, m) = (x.to_uint(), y.to_uint(), modulus(w));
        prop_assert_eq!(x.add(&y).to_uint(), (&a + &b) % &m);
        prop_assert_eq!(x.sub(&y).to_uint(), (&a + &m - &b) % &m);
        prop_assert_eq!(x.mul(&y).to_uint(), (&a * &b) % &m);
        let (hi, lo) = x.mul_wide(&y);
        prop_assert_eq!((hi.to_uint() << w.bits()) + lo.to_uint(), &a * &b);
    }

    #[test]
    fn nested_split_regroups(l in any::<[u64; 4]>()) {
        let x = Word::from_limbs(Width::W256, l);
        let bytes = x.split(Width::W8).unwrap();
        let nested: Vec<Word> = x
            .split(Width::W64)
            .unwrap()
            .iter()
            .flat_map(|q| q.split(Width::W8).unwrap())
            .collect();
        prop_assert_eq!(&nested, &bytes);
        for p in Width::ALL {
            prop_assert_eq!(Word::join(&x.split(p).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn stores_serialize_little_endian(x in word(), off in 0u64..32) {
        let base = 0x4000;
        let mut m = Memory::new();
        m.add_region(base, 64).unwrap();
        m.store(base + off, &x).unwrap();
        let n = x.width().bytes();
        let mut want = x.to_uint().to_bytes_le();
        want.resize(n, 0);
        prop_assert_eq!(m.read_bytes(base + off, n).unwrap(), want);
        prop_assert_eq!(m.load(base + off, x.width()).unwrap(), x);
    }

    #[test]
    fn pshufd_swap_is_an_involution(l in any::<[u64; 4]>()) {
        for (name, w) in [("x86_VPSHUFD_128", Width::W128), ("x86_VPSHUFD_256", Width::W256)] {
            let d = lookup(name).unwrap();
            let imm = IValue::Word(Word::from_u64(Width::W8, 0xb1));
            let x = IValue::Word(Word::from_limbs(w, l));
            let once = d.exec(&[x, imm]).unwrap();
            let twice = d.exec(&[once[0], imm]).unwrap();
            prop_assert_eq!(twice[0], x);
        }
    }
}

#[test]
fn corpus_prints_and_parses_back() {
    for (name, _) in PROGRAMS {
        let p = parse_program(&program_source(name).unwrap()).unwrap();
        let text = print_program(&p);
        assert_eq!(parse_program(&text).unwrap(), p, "{name}");
    }
}

/// Runs every corpus program twice per vector mode on the same inputs.
#[test]
fn runs_are_deterministic_and_mode_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, _) in PROGRAMS {
        let meta = program_meta(name).unwrap();
        let tp = load_program(name).unwrap();
        let sig = &tp.info(meta.entry).unwrap().sig;
        let h = meta.harness(meta.default_max_len());
        let m = Machine::new(&tp);
        for _ in 0..8 {
            let x = h.sample(sig, &BTreeMap::new(), &mut rng).unwrap();
            let go = |mode| {
                let opts = Options {
                    mode,
                    ..Options::traced()
                };
                let o = m
                    .run(meta.entry, x.args.clone(), x.memory().unwrap(), opts)
                    .unwrap();
                (o.results, o.memory.to_hex_dump(), o.trace, o.steps)
            };
            let a = go(VectorMode::OpsV);
            assert_eq!(a, go(VectorMode::OpsV), "{name}");
            let b = go(VectorMode::Ops);
            assert_eq!((&a.0, &a.1, &a.2), (&b.0, &b.1, &b.2), "{name}");
        }
    }
}

/// Dropping the tracked scalars may only loosen the reported ranges.
#[test]
fn untracked_ranges_cover_tracked_ones() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (name, _) in PROGRAMS {
        let meta = program_meta(name).unwrap();
        if meta.tracked.is_empty() {
            continue;
        }
        let tp = load_program(name).unwrap();
        let tight = analyze(&tp, meta.entry, meta.pointers, meta.tracked).unwrap();
        let loose = analyze(&tp, meta.entry, meta.pointers, &[]).unwrap();
        let sig = &tp.info(meta.entry).unwrap().sig;
        let h = meta.harness(meta.default_max_len());
        for _ in 0..50 {
            let x = h.sample(sig, &BTreeMap::new(), &mut rng).unwrap();
            let env: BTreeMap<String, i128> = meta
                .tracked
                .iter()
                .map(|n| {
                    let v = x.arg(n).and_then(|v| v.as_word()).unwrap().low_u64();
                    (n.to_string(), v as i128)
                })
                .collect();
            for p in meta.pointers {
                let Some(t) = tight.range(p) else { continue };
                let (tl, th) = t.eval(&env);
                let (ll, lh) = loose.range(p).map_or((None, None), |r| r.eval(&env));
                assert!(ll.is_none() || ll <= tl, "{name} {p}");
                assert!(lh.is_none() || (th.is_some() && lh >= th), "{name} {p}");
            }
        }
    }
}
