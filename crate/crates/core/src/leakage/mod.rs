//! Leakage-instrumented execution, paired-run constant-time checking and
//! taint-based inference of the inputs that reach leakage.

mod harness;
mod taint;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::interp::{Machine, Options, SafetyError, Val};
use crate::mem::Memory;

pub use crate::interp::{LeakEvent, LeakTrace};
pub use harness::{ArgGen, Harness, HarnessError, Inputs, RegionGen, RegionInst, RegionLen};
pub use taint::{condition_inputs, infer_public, MEM_LABEL};

/// Runs `entry` recording every address, array index, branch outcome and
/// variable-time operand.
pub fn run_instrumented(
    m: &Machine,
    entry: &str,
    args: Vec<Val>,
    mem: Memory,
) -> Result<(Vec<Val>, Memory, LeakTrace), SafetyError> {
    let out = m.run(entry, args, mem, Options::traced())?;
    Ok((out.results, out.memory, out.trace))
}

/// The parts of the initial state an attacker may know: entry parameters
/// and harness regions by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PublicSpec {
    pub params: BTreeSet<String>,
    pub regions: BTreeSet<String>,
}

impl PublicSpec {
    pub fn new<'a>(
        params: impl IntoIterator<Item = &'a str>,
        regions: impl IntoIterator<Item = &'a str>,
    ) -> PublicSpec {
        PublicSpec {
            params: params.into_iter().map(String::from).collect(),
            regions: regions.into_iter().map(String::from).collect(),
        }
    }

    /// Whether every input reported by [`infer_public`] is public. Memory
    /// is public only when every region of `h` is.
    pub fn admits(&self, inferred: &BTreeSet<String>, h: &Harness) -> bool {
        inferred.iter().all(|x| {
            if x == MEM_LABEL {
                h.regions.iter().all(|r| self.regions.contains(&r.name))
            } else {
                self.params.contains(x)
            }
        })
    }
}

/// Two inputs, equal on public parts, with different leakage.
#[derive(Debug, Clone)]
pub struct Witness {
    pub trial: u64,
    pub a: Inputs,
    pub b: Inputs,
    /// Index of the first differing event.
    pub position: usize,
    pub left: Option<LeakEvent>,
    pub right: Option<LeakEvent>,
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub trial: u64,
    pub inputs: Inputs,
    pub error: SafetyError,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Secure {
        trials: u64,
    },
    Insecure(Box<Witness>),
    /// An execution failed a safety check.
    Failed(Box<Failure>),
}

impl Verdict {
    pub fn is_secure(&self) -> bool {
        matches!(self, Verdict::Secure { .. })
    }
}

fn first_divergence(a: &[LeakEvent], b: &[LeakEvent]) -> Option<usize> {
    let n = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    (n < a.len().max(b.len())).then_some(n)
}

/// Runs `trials` pairs of executions that agree on `spec` and compares
/// their leakage traces.
pub fn ct_check(
    m: &Machine,
    entry: &str,
    h: &Harness,
    spec: &PublicSpec,
    trials: u64,
    seed: u64,
) -> Result<Verdict, HarnessError> {
    let sig = &m
        .program()
        .info(entry)
        .ok_or_else(|| HarnessError::UnknownParam(entry.to_string()))?
        .sig;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let opts = Options::traced();
    for trial in 0..trials {
        let (a, b) = h.sample_pair(sig, spec, &mut rng)?;
        let mut traces = Vec::with_capacity(2);
        for x in [&a, &b] {
            match m.run(entry, x.args.clone(), x.memory()?, opts) {
                Ok(out) => traces.push(out.trace),
                Err(error) => {
                    return Ok(Verdict::Failed(Box::new(Failure {
                        trial,
                        inputs: x.clone(),
                        error,
                    })))
                }
            }
        }
        if let Some(position) = first_divergence(&traces[0], &traces[1]) {
            return Ok(Verdict::Insecure(Box::new(Witness {
                trial,
                left: traces[0].get(position).cloned(),
                right: traces[1].get(position).cloned(),
                a,
                b,
                position,
            })));
        }
    }
    Ok(Verdict::Secure { trials })
}

#[cfg(test)]
mod tests;
