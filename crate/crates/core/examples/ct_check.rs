//! Checks a table lookup for constant-time behaviour: the secret-indexed
//! version is caught with a witness, the public-indexed one passes.

use std::collections::BTreeSet;

use jamin::interp::Machine;
use jamin::ir::compile;
use jamin::leakage::{
    ct_check, infer_public, ArgGen, Harness, PublicSpec, RegionGen, RegionLen, Verdict,
};

const SRC: &str = "
export fn lookup(reg u64 tab, reg u64 s) -> reg u64 {
    reg u64 r;
    s &= 7;
    r = [tab + 8 * s];
    return r;
}
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tp = compile(SRC)?;
    let m = Machine::new(&tp);
    let h = Harness {
        args: vec![
            ("tab".into(), ArgGen::Region("tab".into())),
            ("s".into(), ArgGen::Random),
        ],
        regions: vec![RegionGen {
            name: "tab".into(),
            base: 0x1000,
            len: RegionLen::Fixed(64),
            init: true,
        }],
    };
    let inferred: BTreeSet<String> = infer_public(&tp, "lookup")?;
    println!("must be public: {inferred:?}");
    for public in [&["tab"][..], &["tab", "s"][..]] {
        let spec = PublicSpec::new(public.iter().copied(), ["tab"]);
        let admitted = spec.admits(&inferred, &h);
        match ct_check(&m, "lookup", &h, &spec, 500, 1)? {
            Verdict::Secure { trials } => {
                println!("public {public:?}: admitted {admitted}, secure over {trials} trials")
            }
            Verdict::Insecure(w) => println!(
                "public {public:?}: admitted {admitted}, insecure at event {}: {:?} vs {:?}",
                w.position, w.left, w.right
            ),
            Verdict::Failed(f) => println!("public {public:?}: run failed: {}", f.error),
        }
    }
    Ok(())
}
