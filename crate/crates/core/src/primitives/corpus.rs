//! The DSL corpus, embedded at build time. Setting `JAMIN_CORPUS` to a
//! directory makes the loader read `<name>.jz` files from there instead.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::difftest::Shape;
use super::PrimError;
use crate::ir::{compile, TypedProgram};
use crate::leakage::{ArgGen, Harness, PublicSpec, RegionGen, RegionLen};

pub const PROGRAMS: &[(&str, &str)] = &[
    ("poly1305_ref", include_str!("../../corpus/poly1305_ref.jz")),
    (
        "poly1305_avx2",
        include_str!("../../corpus/poly1305_avx2.jz"),
    ),
    (
        "chacha20_scalar",
        include_str!("../../corpus/chacha20_scalar.jz"),
    ),
    (
        "chacha20_avx2_small",
        include_str!("../../corpus/chacha20_avx2_small.jz"),
    ),
    (
        "chacha20_avx2_big",
        include_str!("../../corpus/chacha20_avx2_big.jz"),
    ),
    ("gimli_ref", include_str!("../../corpus/gimli_ref.jz")),
    ("gimli_sse", include_str!("../../corpus/gimli_sse.jz")),
    ("store2", include_str!("../../corpus/store2.jz")),
    ("memcpy", include_str!("../../corpus/memcpy.jz")),
];

pub const CORPUS_ENV: &str = "JAMIN_CORPUS";

pub fn corpus_dir() -> Option<PathBuf> {
    std::env::var_os(CORPUS_ENV).map(PathBuf::from)
}

pub fn program_source(name: &str) -> Result<String, PrimError> {
    let embedded = PROGRAMS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s);
    if let Some(dir) = corpus_dir() {
        let path = dir.join(format!("{name}.jz"));
        return std::fs::read_to_string(&path).map_err(|e| PrimError::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        });
    }
    embedded
        .map(String::from)
        .ok_or_else(|| PrimError::UnknownProgram(name.into()))
}

pub fn load_program(name: &str) -> Result<TypedProgram, PrimError> {
    let src = program_source(name)?;
    compile(&src).map_err(|err| PrimError::Corpus {
        name: name.into(),
        err,
    })
}

pub fn load_dsl_corpus() -> Result<BTreeMap<String, TypedProgram>, PrimError> {
    PROGRAMS
        .iter()
        .map(|(n, _)| Ok((n.to_string(), load_program(n)?)))
        .collect()
}

/// How a corpus program is called, analyzed and tested.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramMeta {
    pub name: &'static str,
    pub entry: &'static str,
    pub shape: Option<Shape>,
    /// Parameters holding region base addresses.
    pub pointers: &'static [&'static str],
    /// Scalar parameters the safety analysis keeps symbolic.
    pub tracked: &'static [&'static str],
    /// Public parameters; every region's contents are secret.
    pub public: &'static [&'static str],
}

const POLY: (&[&str], &[&str], &[&str]) = (
    &["out", "in", "k"],
    &["inlen"],
    &["out", "in", "inlen", "k"],
);
const CHACHA: (&[&str], &[&str], &[&str]) = (
    &["out", "plain", "key", "nonce"],
    &["len"],
    &["out", "plain", "len", "key", "nonce", "counter"],
);

pub fn program_meta(name: &str) -> Option<ProgramMeta> {
    let (entry, shape, (pointers, tracked, public)) = match name {
        "poly1305_ref" | "poly1305_avx2" => ("poly1305", Some(Shape::Poly1305), POLY),
        "chacha20_scalar" | "chacha20_avx2_small" | "chacha20_avx2_big" => {
            ("chacha20", Some(Shape::ChaCha20), CHACHA)
        }
        "gimli_ref" | "gimli_sse" => (
            "gimli",
            Some(Shape::Gimli),
            (&["state"][..], &[][..], &["state"][..]),
        ),
        "store2" => ("store2", None, (&["p"][..], &[][..], &["p"][..])),
        "memcpy" => (
            "memcpy",
            None,
            (
                &["dst", "src"][..],
                &["len"][..],
                &["dst", "src", "len"][..],
            ),
        ),
        _ => return None,
    };
    let name = PROGRAMS.iter().find(|(n, _)| *n == name)?.0;
    Some(ProgramMeta {
        name,
        entry,
        shape,
        pointers,
        tracked,
        public,
    })
}

fn region(name: &str, base: u64, len: RegionLen, init: bool) -> RegionGen {
    RegionGen {
        name: name.into(),
        base,
        len,
        init,
    }
}

fn param_len(name: &str) -> RegionLen {
    RegionLen::Param {
        name: name.into(),
        add: 0,
    }
}

impl ProgramMeta {
    pub fn public_spec(&self) -> PublicSpec {
        PublicSpec::new(self.public.iter().copied(), [])
    }

    /// Longest message the constant-time harness draws by default: long
    /// enough to reach every vectorized path.
    pub fn default_max_len(&self) -> u64 {
        match self.name {
            "poly1305_avx2" => 600,
            "chacha20_avx2_small" => 400,
            "chacha20_avx2_big" => 1100,
            _ => 300,
        }
    }

    /// Input generator with lengths up to `max_len`.
    pub fn harness(&self, max_len: u64) -> Harness {
        let reg = |p: &str| (p.to_string(), ArgGen::Region(p.to_string()));
        let len = |p: &str| (p.to_string(), ArgGen::Range { lo: 0, hi: max_len });
        match self.entry {
            "poly1305" => Harness {
                args: vec![reg("out"), reg("in"), len("inlen"), reg("k")],
                regions: vec![
                    region("out", 0x10_0000, RegionLen::Fixed(16), false),
                    region("in", 0x20_0000, param_len("inlen"), true),
                    region("k", 0x30_0000, RegionLen::Fixed(32), true),
                ],
            },
            "chacha20" => Harness {
                args: vec![
                    reg("out"),
                    reg("plain"),
                    len("len"),
                    reg("key"),
                    reg("nonce"),
                    ("counter".into(), ArgGen::Random),
                ],
                regions: vec![
                    region("out", 0x10_0000, param_len("len"), false),
                    region("plain", 0x20_0000, param_len("len"), true),
                    region("key", 0x30_0000, RegionLen::Fixed(32), true),
                    region("nonce", 0x40_0000, RegionLen::Fixed(12), true),
                ],
            },
            "gimli" => Harness {
                args: vec![reg("state")],
                regions: vec![region("state", 0x10_0000, RegionLen::Fixed(48), true)],
            },
            "store2" => Harness {
                args: vec![reg("p"), ("x".into(), ArgGen::Random)],
                regions: vec![region("p", 0x10_0000, RegionLen::Fixed(16), false)],
            },
            _ => Harness {
                args: vec![reg("dst"), reg("src"), len("len")],
                regions: vec![
                    region("dst", 0x10_0000, param_len("len"), false),
                    region("src", 0x20_0000, param_len("len"), true),
                ],
            },
        }
    }
}
