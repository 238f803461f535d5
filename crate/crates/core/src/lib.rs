pub mod cli;
pub mod interp;
pub mod ir;
pub mod isa;
pub mod leakage;
pub mod mem;
pub mod mplimb;
pub mod primitives;
pub mod safety;
pub mod word;
