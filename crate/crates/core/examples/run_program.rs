//! Compiles a small program, runs it on initialized memory and prints the
//! results, the step count and the leakage trace.

use jamin::interp::{Machine, Options, Val};
use jamin::ir::compile;
use jamin::mem::Memory;

const SRC: &str = "
export fn sum(reg u64 p, reg u64 n) -> reg u64 {
    reg u64 i, s, t;
    s = 0;
    i = 0;
    while i < n {
        t = (u64)[p + 8 * i];
        s += t;
        i += 1;
    }
    return s;
}
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tp = compile(SRC)?;
    let m = Machine::new(&tp);
    let words: Vec<u8> = (1..=4u64).flat_map(|v| v.to_le_bytes()).collect();
    let mut mem = Memory::new();
    mem.add_region_bytes(0x1000, &words)?;
    let out = m.run(
        "sum",
        vec![Val::u64(0x1000), Val::u64(4)],
        mem,
        Options::traced(),
    )?;
    for (i, r) in out.results.iter().enumerate() {
        println!("result[{i}] = {:?}", r.as_word().map(|w| w.low_u64()));
    }
    println!("steps = {}", out.steps);
    for e in &out.trace {
        println!("{e}");
    }
    Ok(())
}
