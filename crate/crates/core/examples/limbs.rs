//! Multi-limb arithmetic in the radix-2^26 Poly1305 representation.

use num_bigint::BigUint;

use jamin::mplimb::{add_rep5_pack, convert, mul_schoolbook, p1305, reduce_p1305, LimbNum};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = p1305();
    let x = (BigUint::from(1u32) << 129u32) + 12345u32;
    let a = LimbNum::from_uint(&x, 26, 5)?;
    println!("x      = {x}");
    println!("limbs  = {:?}", a.limbs());
    let sq = mul_schoolbook(&a, &a)?;
    println!("x^2    : {} limbs, bounds {:?}", sq.len(), sq.bounds());
    let r = reduce_p1305(&sq)?;
    println!("x^2 mod p = {} (check {})", r.repres(), (&x * &x) % &p);
    let w = convert(&a, 64, 3)?;
    println!("radix 2^64: {:?}", w.limbs());
    let top = LimbNum::with_bounds(vec![(1 << 27) - 1; 5], 26, vec![27; 5])?;
    let packed = add_rep5_pack([&top, &top, &top, &top])?;
    println!(
        "pack of four maximal values: {:?}, bounds {:?}",
        packed.limbs(),
        packed.bounds()
    );
    Ok(())
}
