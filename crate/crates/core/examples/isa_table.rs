//! Lists the instruction descriptors and runs one vector instruction under
//! both semantics.

use jamin::isa::{lookup, ops_opsv_agree, IValue, Registry, VectorMode};
use jamin::word::{Width, Word};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reg = Registry::standard();
    let vector = reg.iter().filter(|d| d.is_vector()).count();
    println!("{} descriptors, {vector} vector", reg.len());
    for d in reg.iter().take(8) {
        println!("{}", d.summary());
    }
    let d = lookup("x86_VPADD_8u32").ok_or("no x86_VPADD_8u32")?;
    let a = Word::from_limbs(Width::W256, [u64::MAX, 1, 2, 3]);
    let b = Word::from_limbs(Width::W256, [1, 1, 1, 1]);
    let args = [IValue::Word(a), IValue::Word(b)];
    println!("Ops  {:?}", d.exec_mode(&args, VectorMode::Ops)?);
    println!("OpsV {:?}", d.exec_mode(&args, VectorMode::OpsV)?);
    println!("agree: {}", ops_opsv_agree(d, &args)?);
    Ok(())
}
