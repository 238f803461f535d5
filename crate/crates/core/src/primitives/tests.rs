use num_bigint::BigUint;

use super::difftest::run_hop;
use super::mutants::{DIFF_MUTANTS, LEAK_MUTANTS};
use super::*;
use crate::ir::compile;

#[test]
fn corpus_compiles() {
    let c = load_dsl_corpus().unwrap();
    assert!(c.len() >= 7);
    for (name, tp) in &c {
        let meta = program_meta(name).unwrap();
        assert!(tp.info(meta.entry).is_some(), "{name}");
    }
}

#[test]
fn clamp_examples() {
    assert_eq!(clamp(&[0xff; 16]).unwrap(), BigUint::from(spec::CLAMP_MASK));
    assert_eq!(clamp(&[0; 16]).unwrap(), BigUint::ZERO);
    assert!(clamp(&[0; 15]).is_err());
    let r = clamp(&[0xff; 16]).unwrap().to_bytes_le();
    for i in [3, 7, 11, 15] {
        assert_eq!(r[i] & 0xf0, 0);
    }
    for i in [4, 8, 12] {
        assert_eq!(r[i] & 3, 0);
    }
}

#[test]
fn poly1305_spec_examples() {
    let s = BigUint::from(0x1234_5678u32);
    let mut tag = [0u8; 16];
    tag[..4].copy_from_slice(&0x1234_5678u32.to_le_bytes());
    assert_eq!(poly1305_spec(&BigUint::from(7u8), &s, b""), tag);
    assert_eq!(
        poly1305_spec(&BigUint::ZERO, &s, b"any message at all"),
        tag
    );
    let v = vectors::load("poly1305_tag").unwrap();
    assert_eq!(
        poly1305(&v["key"], &v["message"]).unwrap().to_vec(),
        v["tag"]
    );
}

#[test]
fn chacha20_spec_examples() {
    assert_eq!(qround(0, 0, 0, 0), (0, 0, 0, 0));
    let v = vectors::load("chacha20_block").unwrap();
    let key: [u8; 32] = v["key"][..].try_into().unwrap();
    let nonce: [u8; 12] = v["nonce"][..].try_into().unwrap();
    assert_eq!(chacha20_block(&key, &nonce, 1).to_vec(), v["keystream"]);
    let v = vectors::load("chacha20_encrypt").unwrap();
    let nonce: [u8; 12] = v["nonce"][..].try_into().unwrap();
    assert_eq!(
        chacha20_xor(&key, &nonce, 1, &v["plaintext"]),
        v["ciphertext"]
    );
}

#[test]
fn gimli_spec_examples() {
    let v = vectors::load("gimli").unwrap();
    let st = GimliState::from_bytes(v["input"][..].try_into().unwrap());
    assert_eq!(gimli(st).to_bytes().to_vec(), v["output"]);
    assert_eq!(spec::gimli_rounds(st, 24, 0), st);
    assert_ne!(gimli(GimliState([0; 12])), GimliState([0; 12]));
}

fn vector_input(shape: Shape) -> (PrimInput, Vec<u8>) {
    match shape {
        Shape::Poly1305 => {
            let v = vectors::load("poly1305_tag").unwrap();
            let x = PrimInput {
                msg: v["message"].clone(),
                key: v["key"].clone(),
                nonce: vec![0; 12],
                counter: 0,
                in_place: false,
            };
            (x, v["tag"].clone())
        }
        Shape::ChaCha20 => {
            let v = vectors::load("chacha20_encrypt").unwrap();
            let x = PrimInput {
                msg: v["plaintext"].clone(),
                key: v["key"].clone(),
                nonce: v["nonce"].clone(),
                counter: 1,
                in_place: false,
            };
            (x, v["ciphertext"].clone())
        }
        Shape::Gimli => {
            let v = vectors::load("gimli").unwrap();
            let x = PrimInput {
                msg: v["input"].clone(),
                key: vec![0; 32],
                nonce: vec![0; 12],
                counter: 0,
                in_place: false,
            };
            (x, v["output"].clone())
        }
    }
}

#[test]
fn corpus_programs_pass_published_vectors() {
    for shape in Shape::ALL {
        let chain = standard_chain(shape).unwrap();
        let (x, want) = vector_input(shape);
        for hop in &chain.hops {
            let got = run_hop(hop, shape, &x).unwrap_or_else(|e| panic!("{}: {e}", hop.name));
            assert_eq!(got.output, want, "{}", hop.name);
        }
    }
}

#[test]
fn chains_agree_on_boundary_lengths() {
    for shape in Shape::ALL {
        let chain = standard_chain(shape).unwrap();
        let r = hop_difftest(&chain, 24, 5).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.pairs.len(), chain.hops.len() - 1);
        assert!(r.pairs.iter().all(|p| p.passed == 24));
    }
}

#[test]
fn empty_message_gives_s() {
    let chain = standard_chain(Shape::Poly1305).unwrap();
    let mut x = vector_input(Shape::Poly1305).0;
    x.msg.clear();
    for hop in &chain.hops {
        assert_eq!(
            run_hop(hop, Shape::Poly1305, &x).unwrap().output,
            x.key[16..]
        );
    }
}

#[test]
fn long_poly1305_uses_vector_path() {
    let src = program_source("poly1305_avx2").unwrap();
    assert!(src.contains("if inlen > 256"));
    assert!(program_source("gimli_sse")
        .unwrap()
        .contains("#x86_VPSHUFB"));
}

#[test]
fn in_place_chacha_matches_copy() {
    let chain = standard_chain(Shape::ChaCha20).unwrap();
    let (mut x, want) = vector_input(Shape::ChaCha20);
    x.in_place = true;
    for hop in &chain.hops[1..] {
        assert_eq!(
            run_hop(hop, Shape::ChaCha20, &x).unwrap().output,
            want,
            "{}",
            hop.name
        );
    }
}

#[test]
fn mutants_are_well_formed() {
    for m in DIFF_MUTANTS {
        let src = m.source().unwrap();
        assert_ne!(src, program_source(m.program).unwrap());
        compile(&src).unwrap_or_else(|e| panic!("{}: {e}", m.name));
    }
    for m in LEAK_MUTANTS {
        compile(&m.source().unwrap()).unwrap_or_else(|e| panic!("{}: {e}", m.name));
    }
}

#[test]
fn unknown_names() {
    assert!(matches!(
        load_program("nope"),
        Err(PrimError::UnknownProgram(_))
    ));
    assert!("sha".parse::<Shape>().is_err());
    assert_eq!("gimli".parse::<Shape>().unwrap(), Shape::Gimli);
}
