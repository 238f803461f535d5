//! Runs each chain of implementations against the pure specification, then
//! shows a planted one-token fault being caught.

use jamin::ir::compile;
use jamin::primitives::mutants::DIFF_MUTANTS;
use jamin::primitives::{hop_difftest, program_meta, standard_chain, Hop, Shape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for shape in Shape::ALL {
        let chain = standard_chain(shape)?;
        let names: Vec<&str> = chain.hops.iter().map(|h| h.name.as_str()).collect();
        let r = hop_difftest(&chain, 50, 1)?;
        println!(
            "{}: {} agree {}",
            shape.name(),
            names.join(" -> "),
            r.passed()
        );
    }
    let m = &DIFF_MUTANTS[0];
    let meta = program_meta(m.program).expect("corpus metadata");
    let mut chain = standard_chain(meta.shape.expect("primitive"))?;
    let i = chain
        .hops
        .iter()
        .position(|h| h.name == m.program)
        .expect("hop");
    chain.hops[i] = Hop::dsl(m.name, &compile(&m.source()?)?, meta.entry);
    let r = hop_difftest(&chain, 100, 1)?;
    match r.counterexample {
        Some(c) => println!("{}: caught at run {}\n{c}", m.name, c.run),
        None => println!("{}: not caught", m.name),
    }
    Ok(())
}
