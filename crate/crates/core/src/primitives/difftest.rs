//! Differential testing along hop chains: a pure specification followed by
//! successively optimized DSL programs, run on identical inputs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::{load_program, program_meta};
use super::{spec, vectors::to_hex, PrimError};
use crate::interp::{Machine, Options, Val};
use crate::ir::TypedProgram;
use crate::mem::Memory;

pub const BOUNDARY_LENGTHS: [usize; 11] = [0, 1, 15, 16, 17, 63, 64, 65, 255, 256, 257];
pub const MAX_LEN: usize = 4096;

const OUT: u64 = 0x10_0000;
const IN: u64 = 0x20_0000;
const KEY: u64 = 0x30_0000;
const NONCE: u64 = 0x40_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Poly1305,
    ChaCha20,
    Gimli,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Poly1305, Shape::ChaCha20, Shape::Gimli];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Poly1305 => "poly1305",
            Shape::ChaCha20 => "chacha20",
            Shape::Gimli => "gimli",
        }
    }

    /// Corpus programs of the standard chain, from reference to most
    /// optimized.
    pub fn programs(self) -> &'static [&'static str] {
        match self {
            Shape::Poly1305 => &["poly1305_ref", "poly1305_avx2"],
            Shape::ChaCha20 => &[
                "chacha20_scalar",
                "chacha20_avx2_small",
                "chacha20_avx2_big",
            ],
            Shape::Gimli => &["gimli_ref", "gimli_sse"],
        }
    }

    /// Input number `run`: the boundary lengths first, then random lengths
    /// up to [`MAX_LEN`]. Gimli inputs are 48-byte states. One ChaCha20 run
    /// in four is in place.
    pub fn sample(self, run: u64, rng: &mut impl Rng) -> PrimInput {
        let mut bytes = |n: usize| {
            let mut v = vec![0u8; n];
            rng.fill(&mut v[..]);
            v
        };
        let len = match self {
            Shape::Gimli => 48,
            _ => match BOUNDARY_LENGTHS.get(run as usize) {
                Some(n) => *n,
                None => bytes(2).iter().fold(0usize, |a, b| a << 8 | *b as usize) % (MAX_LEN + 1),
            },
        };
        let msg = bytes(len);
        let key = bytes(32);
        let nonce = bytes(12);
        let c = bytes(4);
        PrimInput {
            msg,
            key,
            nonce,
            counter: u32::from_le_bytes([c[0], c[1], c[2], c[3]]),
            in_place: self == Shape::ChaCha20 && run % 4 == 3,
        }
    }

    pub fn spec(self, x: &PrimInput) -> Result<Vec<u8>, PrimError> {
        Ok(match self {
            Shape::Poly1305 => spec::poly1305(&x.key, &x.msg)?.to_vec(),
            Shape::ChaCha20 => {
                let key: &[u8; 32] = x.key[..].try_into().map_err(|_| PrimError::Length {
                    what: "chacha20 key",
                    want: 32,
                    got: x.key.len(),
                })?;
                let nonce: &[u8; 12] = x.nonce[..].try_into().map_err(|_| PrimError::Length {
                    what: "chacha20 nonce",
                    want: 12,
                    got: x.nonce.len(),
                })?;
                spec::chacha20_xor(key, nonce, x.counter, &x.msg)
            }
            Shape::Gimli => {
                let st: &[u8; 48] = x.msg[..].try_into().map_err(|_| PrimError::Length {
                    what: "gimli state",
                    want: 48,
                    got: x.msg.len(),
                })?;
                spec::gimli(spec::GimliState::from_bytes(st))
                    .to_bytes()
                    .to_vec()
            }
        })
    }

    /// Arguments and memory for the DSL entry point, and where the output
    /// lands.
    pub fn layout(self, x: &PrimInput) -> Result<(Vec<Val>, Memory, u64, usize), PrimError> {
        let mut m = Memory::new();
        Ok(match self {
            Shape::Poly1305 => {
                m.add_region(OUT, 16)?;
                m.add_region_bytes(IN, &x.msg)?;
                m.add_region_bytes(KEY, &x.key)?;
                let args = vec![
                    Val::u64(OUT),
                    Val::u64(IN),
                    Val::u64(x.msg.len() as u64),
                    Val::u64(KEY),
                ];
                (args, m, OUT, 16)
            }
            Shape::ChaCha20 => {
                let out = if x.in_place { IN } else { OUT };
                m.add_region(out, x.msg.len() as u64)?;
                m.add_region_bytes(IN, &x.msg)?;
                m.add_region_bytes(KEY, &x.key)?;
                m.add_region_bytes(NONCE, &x.nonce)?;
                let args = vec![
                    Val::u64(out),
                    Val::u64(IN),
                    Val::u64(x.msg.len() as u64),
                    Val::u64(KEY),
                    Val::u64(NONCE),
                    Val::Word(crate::word::Word::from_u64(
                        crate::word::Width::W32,
                        x.counter as u64,
                    )),
                ];
                (args, m, out, x.msg.len())
            }
            Shape::Gimli => {
                m.add_region_bytes(OUT, &x.msg)?;
                (vec![Val::u64(OUT)], m, OUT, 48)
            }
        })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = PrimError;

    fn from_str(s: &str) -> Result<Shape, PrimError> {
        Shape::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| PrimError::UnknownShape(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimInput {
    /// Message, plaintext, or the Gimli state.
    pub msg: Vec<u8>,
    pub key: Vec<u8>,
    pub nonce: Vec<u8>,
    pub counter: u32,
    pub in_place: bool,
}

impl fmt::Display for PrimInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "len: {}", self.msg.len())?;
        writeln!(f, "msg: {}", to_hex(&self.msg))?;
        writeln!(f, "key: {}", to_hex(&self.key))?;
        writeln!(f, "nonce: {}", to_hex(&self.nonce))?;
        writeln!(f, "counter: {:08x}", self.counter)?;
        write!(f, "in_place: {}", self.in_place)
    }
}

pub enum HopExec {
    Spec,
    Dsl {
        machine: Box<Machine>,
        entry: String,
    },
}

pub struct Hop {
    pub name: String,
    pub exec: HopExec,
}

impl Hop {
    pub fn spec() -> Hop {
        Hop {
            name: "spec".into(),
            exec: HopExec::Spec,
        }
    }

    pub fn dsl(name: &str, tp: &TypedProgram, entry: &str) -> Hop {
        Hop {
            name: name.into(),
            exec: HopExec::Dsl {
                machine: Box::new(Machine::new(tp)),
                entry: entry.into(),
            },
        }
    }
}

pub struct HopChain {
    pub shape: Shape,
    pub hops: Vec<Hop>,
}

/// The specification followed by the corpus programs of `shape`.
pub fn standard_chain(shape: Shape) -> Result<HopChain, PrimError> {
    let mut hops = vec![Hop::spec()];
    for name in shape.programs() {
        let entry = program_meta(name).expect("corpus program").entry;
        hops.push(Hop::dsl(name, &load_program(name)?, entry));
    }
    Ok(HopChain { shape, hops })
}

/// What one hop produced: the output bytes and, for DSL hops, the final
/// memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observed {
    pub output: Vec<u8>,
    pub memory: Option<String>,
}

const BUDGET: u64 = 200_000_000;

pub fn run_hop(hop: &Hop, shape: Shape, x: &PrimInput) -> Result<Observed, String> {
    match &hop.exec {
        HopExec::Spec => shape
            .spec(x)
            .map(|output| Observed {
                output,
                memory: None,
            })
            .map_err(|e| e.to_string()),
        HopExec::Dsl { machine, entry } => {
            let (args, mem, base, len) = shape.layout(x).map_err(|e| e.to_string())?;
            let opts = Options {
                budget: BUDGET,
                ..Options::default()
            };
            let o = machine
                .run(entry, args, mem, opts)
                .map_err(|e| e.to_string())?;
            let output = o.memory.read_bytes(base, len).map_err(|e| e.to_string())?;
            Ok(Observed {
                output,
                memory: Some(o.memory.to_hex_dump()),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairReport {
    pub left: String,
    pub right: String,
    pub passed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub run: u64,
    pub left: String,
    pub right: String,
    pub input: PrimInput,
    pub left_out: Result<Vec<u8>, String>,
    pub right_out: Result<Vec<u8>, String>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &Result<Vec<u8>, String>| match r {
            Ok(b) => to_hex(b),
            Err(e) => format!("error: {e}"),
        };
        writeln!(
            f,
            "run {}: {} and {} disagree",
            self.run, self.left, self.right
        )?;
        writeln!(f, "{}", self.input)?;
        writeln!(f, "{}: {}", self.left, show(&self.left_out))?;
        write!(f, "{}: {}", self.right, show(&self.right_out))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffReport {
    pub shape: Shape,
    pub runs: u64,
    pub seed: u64,
    pub pairs: Vec<PairReport>,
    pub counterexample: Option<Box<Counterexample>>,
}

impl DiffReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "shape {} seed {} runs {}",
            self.shape, self.seed, self.runs
        )?;
        for p in &self.pairs {
            writeln!(f, "  {} -> {}: {} passed", p.left, p.right, p.passed)?;
        }
        match &self.counterexample {
            None => write!(f, "all pairs agree"),
            Some(c) => write!(f, "{c}"),
        }
    }
}

/// Runs every hop on `runs` inputs and compares adjacent hops: outputs must
/// match, and two DSL hops must also leave identical memories. Stops at the
/// first disagreement.
pub fn hop_difftest(chain: &HopChain, runs: u64, seed: u64) -> Result<DiffReport, PrimError> {
    if chain.hops.is_empty() {
        return Err(PrimError::EmptyChain);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<PairReport> = chain
        .hops
        .windows(2)
        .map(|w| PairReport {
            left: w[0].name.clone(),
            right: w[1].name.clone(),
            passed: 0,
        })
        .collect();
    let mut counterexample = None;
    'runs: for run in 0..runs {
        let x = chain.shape.sample(run, &mut rng);
        let outs: Vec<Result<Observed, String>> = chain
            .hops
            .iter()
            .map(|h| run_hop(h, chain.shape, &x))
            .collect();
        for (i, p) in pairs.iter_mut().enumerate() {
            let agree = match (&outs[i], &outs[i + 1]) {
                (Ok(a), Ok(b)) => {
                    a.output == b.output
                        && (a.memory.is_none() || b.memory.is_none() || a.memory == b.memory)
                }
                _ => false,
            };
            if !agree {
                let out = |r: &Result<Observed, String>| r.clone().map(|o| o.output);
                counterexample = Some(Box::new(Counterexample {
                    run,
                    left: p.left.clone(),
                    right: p.right.clone(),
                    input: x,
                    left_out: out(&outs[i]),
                    right_out: out(&outs[i + 1]),
                }));
                break 'runs;
            }
            p.passed += 1;
        }
    }
    Ok(DiffReport {
        shape: chain.shape,
        runs,
        seed,
        pairs,
        counterexample,
    })
}
