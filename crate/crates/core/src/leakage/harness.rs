//! Input generation for entry functions: argument generators and the memory
//! regions they point into.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::interp::{ArrayBuf, Val};
use crate::ir::typecheck::Sig;
use crate::ir::VTy;
use crate::mem::{MemError, Memory};
use crate::word::{Width, Word};

use super::PublicSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("no generator for parameter `{0}`")]
    MissingParam(String),
    #[error("`{0}` is not a parameter of the entry function")]
    UnknownParam(String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("generator for `{param}` does not fit its type {ty}")]
    BadType { param: String, ty: VTy },
    #[error(transparent)]
    Memory(#[from] MemError),
}

/// How one entry argument is chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgGen {
    Const(u64),
    /// Uniform in `lo..=hi`.
    Range {
        lo: u64,
        hi: u64,
    },
    /// The base address of a region.
    Region(String),
    /// Uniform over the parameter's type.
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegionLen {
    Fixed(u64),
    /// The value of a scalar argument plus a constant.
    Param {
        name: String,
        add: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionGen {
    pub name: String,
    pub base: u64,
    pub len: RegionLen,
    /// Whether the region starts with random contents or uninitialized.
    pub init: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Harness {
    pub args: Vec<(String, ArgGen)>,
    pub regions: Vec<RegionGen>,
}

/// A concrete region of an input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionInst {
    pub name: String,
    pub base: u64,
    pub len: u64,
    /// Initial contents; `None` when uninitialized.
    pub bytes: Option<Vec<u8>>,
}

/// A concrete input: entry arguments and initial memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inputs {
    pub names: Vec<String>,
    pub args: Vec<Val>,
    pub regions: Vec<RegionInst>,
}

impl Inputs {
    pub fn memory(&self) -> Result<Memory, MemError> {
        let mut m = Memory::new();
        for r in &self.regions {
            match &r.bytes {
                Some(b) => m.add_region_bytes(r.base, b)?,
                None => m.add_region(r.base, r.len)?,
            }
        }
        Ok(m)
    }

    pub fn arg(&self, name: &str) -> Option<&Val> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.args[i])
    }

    pub fn region(&self, name: &str) -> Option<&RegionInst> {
        self.regions.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for Inputs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, v) in self.names.iter().zip(&self.args) {
            writeln!(f, "{n} = {v}")?;
        }
        for r in &self.regions {
            match &r.bytes {
                Some(b) => {
                    let hex: String = b.iter().map(|x| format!("{x:02x}")).collect();
                    writeln!(f, "region {} @ {:#x} [{}] = {hex}", r.name, r.base, r.len)?
                }
                None => writeln!(
                    f,
                    "region {} @ {:#x} [{}] uninitialized",
                    r.name, r.base, r.len
                )?,
            }
        }
        Ok(())
    }
}

/// Which value of a generator's range to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pick {
    Low,
    High,
    Uniform,
}

fn corner(rng: &mut impl Rng) -> Pick {
    match rng.random_range(0..3) {
        0 => Pick::Low,
        1 => Pick::High,
        _ => Pick::Uniform,
    }
}

fn random_word(w: Width, pick: Pick, rng: &mut impl Rng) -> Word {
    match pick {
        Pick::Low => Word::zero(w),
        Pick::High => Word::ones(w),
        Pick::Uniform => {
            Word::from_limbs(w, [rng.random(), rng.random(), rng.random(), rng.random()])
        }
    }
}

fn random_bytes(n: usize, pick: Pick, rng: &mut impl Rng) -> Vec<u8> {
    match pick {
        Pick::Low => vec![0; n],
        Pick::High => vec![0xff; n],
        Pick::Uniform => {
            let mut v = vec![0; n];
            rng.fill(&mut v[..]);
            v
        }
    }
}

const MAX_SHIFT: u64 = 15;

impl Harness {
    fn gen(&self, name: &str) -> Option<&ArgGen> {
        self.args.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    fn region_index(&self, name: &str) -> Result<usize, HarnessError> {
        self.regions
            .iter()
            .position(|r| r.name == name)
            .ok_or_else(|| HarnessError::UnknownRegion(name.into()))
    }

    /// Checks that generators cover exactly the parameters of `sig` with
    /// compatible types.
    pub fn validate(&self, sig: &Sig) -> Result<(), HarnessError> {
        for (n, _) in &self.args {
            if !sig.params.iter().any(|(p, _, _)| p == n) {
                return Err(HarnessError::UnknownParam(n.clone()));
            }
        }
        for (p, _, ty) in &sig.params {
            let g = self
                .gen(p)
                .ok_or_else(|| HarnessError::MissingParam(p.clone()))?;
            let ok = match g {
                ArgGen::Random => true,
                ArgGen::Region(r) => {
                    self.region_index(r)?;
                    matches!(ty, VTy::Word(Width::W64))
                }
                ArgGen::Const(_) | ArgGen::Range { .. } => matches!(ty, VTy::Word(_)),
            };
            if !ok {
                return Err(HarnessError::BadType {
                    param: p.clone(),
                    ty: *ty,
                });
            }
        }
        for r in &self.regions {
            if let RegionLen::Param { name, .. } = &r.len {
                match self.gen(name) {
                    Some(ArgGen::Const(_) | ArgGen::Range { .. }) => {}
                    _ => return Err(HarnessError::UnknownParam(name.clone())),
                }
            }
        }
        Ok(())
    }

    fn draw(&self, g: &ArgGen, ty: VTy, pick: Pick, rng: &mut impl Rng) -> Val {
        match (g, ty) {
            (ArgGen::Const(v), VTy::Word(w)) => Val::Word(Word::from_u64(w, *v)),
            (ArgGen::Range { lo, hi }, VTy::Word(w)) => Val::Word(Word::from_u64(
                w,
                match pick {
                    Pick::Low => *lo,
                    Pick::High => *hi,
                    Pick::Uniform => rng.random_range(*lo..=*hi),
                },
            )),
            (ArgGen::Region(r), _) => {
                let base = self
                    .regions
                    .iter()
                    .find(|x| &x.name == r)
                    .map_or(0, |x| x.base);
                Val::u64(base)
            }
            (_, VTy::Word(w)) => Val::Word(random_word(w, pick, rng)),
            (_, VTy::Bool) => Val::Bool(match pick {
                Pick::Low => false,
                Pick::High => true,
                Pick::Uniform => rng.random(),
            }),
            (_, VTy::Array(w, n)) => {
                let ws: Vec<Word> = (0..n).map(|_| random_word(w, pick, rng)).collect();
                Val::Arr(Box::new(ArrayBuf::from_words(w, &ws)))
            }
            (_, VTy::Int) => Val::Int(0),
        }
    }

    fn region_len(&self, r: &RegionGen, names: &[String], args: &[Val]) -> u64 {
        match &r.len {
            RegionLen::Fixed(n) => *n,
            RegionLen::Param { name, add } => {
                let i = names.iter().position(|n| n == name).expect("validated");
                args[i].as_word().map_or(0, |w| w.low_u64()) + add
            }
        }
    }

    /// Draws an input uniformly, forcing the given scalar arguments.
    pub fn sample(
        &self,
        sig: &Sig,
        overrides: &BTreeMap<String, u64>,
        rng: &mut impl Rng,
    ) -> Result<Inputs, HarnessError> {
        self.validate(sig)?;
        let names: Vec<String> = sig.params.iter().map(|(n, _, _)| n.clone()).collect();
        let mut args = Vec::new();
        for (n, _, ty) in &sig.params {
            let g = self.gen(n).expect("validated");
            args.push(match (overrides.get(n), ty) {
                (Some(v), VTy::Word(w)) => Val::Word(Word::from_u64(*w, *v)),
                _ => self.draw(g, *ty, Pick::Uniform, rng),
            });
        }
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let len = self.region_len(r, &names, &args);
                RegionInst {
                    name: r.name.clone(),
                    base: r.base,
                    len,
                    bytes: r
                        .init
                        .then(|| random_bytes(len as usize, Pick::Uniform, rng)),
                }
            })
            .collect();
        Ok(Inputs {
            names,
            args,
            regions,
        })
    }

    /// Draws two inputs that agree on everything `spec` declares public.
    /// Secret values are drawn independently, favouring extreme values;
    /// secret pointers move their region by a random multiple of 16 bytes.
    pub fn sample_pair(
        &self,
        sig: &Sig,
        spec: &PublicSpec,
        rng: &mut impl Rng,
    ) -> Result<(Inputs, Inputs), HarnessError> {
        self.validate(sig)?;
        let names: Vec<String> = sig.params.iter().map(|(n, _, _)| n.clone()).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut shift = [
            vec![0u64; self.regions.len()],
            vec![0u64; self.regions.len()],
        ];
        for (n, _, ty) in &sig.params {
            let g = self.gen(n).expect("validated");
            if spec.params.contains(n) {
                let v = self.draw(g, *ty, Pick::Uniform, rng);
                a.push(v.clone());
                b.push(v);
                continue;
            }
            for (k, out) in [&mut a, &mut b].into_iter().enumerate() {
                let pick = corner(rng);
                let mut v = self.draw(g, *ty, pick, rng);
                if let ArgGen::Region(r) = g {
                    let i = self.region_index(r)?;
                    let s = 16
                        * match pick {
                            Pick::Low => 0,
                            Pick::High => MAX_SHIFT,
                            Pick::Uniform => rng.random_range(0..=MAX_SHIFT),
                        };
                    shift[k][i] = s;
                    v = Val::u64(self.regions[i].base + s);
                }
                out.push(v);
            }
        }
        let mut ra = Vec::new();
        let mut rb = Vec::new();
        for (i, r) in self.regions.iter().enumerate() {
            let la = self.region_len(r, &names, &a);
            let lb = self.region_len(r, &names, &b);
            let (ba, bb) = if !r.init {
                (None, None)
            } else if spec.regions.contains(&r.name) {
                let shared = random_bytes(la.max(lb) as usize, Pick::Uniform, rng);
                (
                    Some(shared[..la as usize].to_vec()),
                    Some(shared[..lb as usize].to_vec()),
                )
            } else {
                let pa = corner(rng);
                let x = random_bytes(la as usize, pa, rng);
                let pb = corner(rng);
                (Some(x), Some(random_bytes(lb as usize, pb, rng)))
            };
            ra.push(RegionInst {
                name: r.name.clone(),
                base: r.base + shift[0][i],
                len: la,
                bytes: ba,
            });
            rb.push(RegionInst {
                name: r.name.clone(),
                base: r.base + shift[1][i],
                len: lb,
                bytes: bb,
            });
        }
        Ok((
            Inputs {
                names: names.clone(),
                args: a,
                regions: ra,
            },
            Inputs {
                names,
                args: b,
                regions: rb,
            },
        ))
    }
}
