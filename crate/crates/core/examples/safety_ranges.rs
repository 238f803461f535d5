//! Infers the memory calling contract of every corpus program.

use jamin::primitives::{load_program, program_meta, PROGRAMS};
use jamin::safety::analyze;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (name, _) in PROGRAMS {
        let meta = program_meta(name).expect("corpus metadata");
        let tp = load_program(name)?;
        let r = analyze(&tp, meta.entry, meta.pointers, meta.tracked)?;
        println!("{name}:");
        for line in r.lines() {
            println!("  {line}");
        }
        for f in &r.failures {
            println!("  finding: {f}");
        }
    }
    Ok(())
}
