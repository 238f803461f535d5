//! Counts interpreter steps per message byte for the ChaCha20 and Poly1305
//! implementations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jamin::interp::{Machine, Options};
use jamin::primitives::{load_program, program_meta, Shape};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for shape in [Shape::ChaCha20, Shape::Poly1305] {
        let mut x = shape.sample(0, &mut rng);
        x.msg = vec![0x5a; 4096];
        x.in_place = false;
        for name in shape.programs() {
            let meta = program_meta(name).expect("corpus metadata");
            let m = Machine::new(&load_program(name)?);
            let (args, mem, _, _) = shape.layout(&x)?;
            let out = m.run(meta.entry, args, mem, Options::default())?;
            println!(
                "{name:<20} {:>8.2} steps/byte",
                out.steps as f64 / x.msg.len() as f64
            );
        }
    }
    Ok(())
}
