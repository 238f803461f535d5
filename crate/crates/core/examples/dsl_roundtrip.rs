//! Parses a corpus program, prints it back, and shows that the printed
//! form parses to the same tree.

use jamin::ir::{parse_program, print_program, typecheck};
use jamin::primitives::program_source;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let src = program_source("memcpy")?;
    let p = parse_program(&src)?;
    let printed = print_program(&p);
    println!("{printed}");
    let again = parse_program(&printed)?;
    println!("round trip equal: {}", again == p);
    let tp = typecheck(&p)?;
    let sig = &tp.info("memcpy").expect("entry").sig;
    let params: Vec<&str> = sig.params.iter().map(|(n, _, _)| n.as_str()).collect();
    println!("memcpy({})", params.join(", "));
    Ok(())
}
