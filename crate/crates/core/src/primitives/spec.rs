//! Pure functional specifications.

use num_bigint::BigUint;

use super::PrimError;
use crate::mplimb::p1305;

pub const CLAMP_MASK: u128 = 0x0FFF_FFFC_0FFF_FFFC_0FFF_FFFC_0FFF_FFFF;

/// Poly1305 key as the pair (r, s).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly1305Key {
    pub r: BigUint,
    pub s: BigUint,
}

impl Poly1305Key {
    /// Clamps the first 16 bytes into r; the last 16 are s.
    pub fn from_bytes(k: &[u8]) -> Result<Poly1305Key, PrimError> {
        if k.len() != 32 {
            return Err(PrimError::Length {
                what: "poly1305 key",
                want: 32,
                got: k.len(),
            });
        }
        Ok(Poly1305Key {
            r: clamp(&k[..16])?,
            s: BigUint::from_bytes_le(&k[16..]),
        })
    }
}

/// Little-endian value of 16 bytes, masked.
pub fn clamp(bytes: &[u8]) -> Result<BigUint, PrimError> {
    let b: [u8; 16] = bytes.try_into().map_err(|_| PrimError::Length {
        what: "clamp input",
        want: 16,
        got: bytes.len(),
    })?;
    Ok(BigUint::from(u128::from_le_bytes(b) & CLAMP_MASK))
}

/// `fold (h + b_i) * r mod p`, then `(h + s) mod 2^128`.
pub fn poly1305_spec(r: &BigUint, s: &BigUint, msg: &[u8]) -> [u8; 16] {
    let p = p1305();
    let mut h = BigUint::ZERO;
    for block in msg.chunks(16) {
        let b = BigUint::from_bytes_le(block) + (BigUint::from(1u8) << (8 * block.len()));
        h = (h + b) * r % &p;
    }
    let t = (h + s) % (BigUint::from(1u8) << 128u32);
    let mut out = [0u8; 16];
    let bytes = t.to_bytes_le();
    out[..bytes.len()].copy_from_slice(&bytes);
    out
}

pub fn poly1305(key: &[u8], msg: &[u8]) -> Result<[u8; 16], PrimError> {
    let k = Poly1305Key::from_bytes(key)?;
    Ok(poly1305_spec(&k.r, &k.s, msg))
}

/// ChaCha20 state: constants, key, counter and nonce as a 4x4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChaChaState(pub [u32; 16]);

pub fn qround(mut a: u32, mut b: u32, mut c: u32, mut d: u32) -> (u32, u32, u32, u32) {
    a = a.wrapping_add(b);
    d = (d ^ a).rotate_left(16);
    c = c.wrapping_add(d);
    b = (b ^ c).rotate_left(12);
    a = a.wrapping_add(b);
    d = (d ^ a).rotate_left(8);
    c = c.wrapping_add(d);
    b = (b ^ c).rotate_left(7);
    (a, b, c, d)
}

const COLUMNS: [[usize; 4]; 4] = [[0, 4, 8, 12], [1, 5, 9, 13], [2, 6, 10, 14], [3, 7, 11, 15]];
const DIAGONALS: [[usize; 4]; 4] = [[0, 5, 10, 15], [1, 6, 11, 12], [2, 7, 8, 13], [3, 4, 9, 14]];

fn words<const N: usize>(b: &[u8]) -> [u32; N] {
    std::array::from_fn(|i| u32::from_le_bytes(b[4 * i..4 * i + 4].try_into().unwrap()))
}

impl ChaChaState {
    pub fn new(key: &[u8; 32], nonce: &[u8; 12], counter: u32) -> ChaChaState {
        let mut s = [0u32; 16];
        s[..4].copy_from_slice(&[0x6170_7865, 0x3320_646e, 0x7962_2d32, 0x6b20_6574]);
        s[4..12].copy_from_slice(&words::<8>(key));
        s[12] = counter;
        s[13..].copy_from_slice(&words::<3>(nonce));
        ChaChaState(s)
    }

    pub fn double_round(&mut self) {
        for sel in COLUMNS.iter().chain(&DIAGONALS) {
            let x = &mut self.0;
            let (a, b, c, d) = qround(x[sel[0]], x[sel[1]], x[sel[2]], x[sel[3]]);
            (x[sel[0]], x[sel[1]], x[sel[2]], x[sel[3]]) = (a, b, c, d);
        }
    }
}

pub fn chacha20_block(key: &[u8; 32], nonce: &[u8; 12], counter: u32) -> [u8; 64] {
    let init = ChaChaState::new(key, nonce, counter);
    let mut x = init;
    for _ in 0..10 {
        x.double_round();
    }
    let mut out = [0u8; 64];
    for i in 0..16 {
        let w = x.0[i].wrapping_add(init.0[i]);
        out[4 * i..4 * i + 4].copy_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn chacha20_xor(key: &[u8; 32], nonce: &[u8; 12], counter: u32, msg: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(msg.len());
    for (n, chunk) in msg.chunks(64).enumerate() {
        let ks = chacha20_block(key, nonce, counter.wrapping_add(n as u32));
        out.extend(chunk.iter().zip(ks).map(|(m, k)| m ^ k));
    }
    out
}

/// Gimli state: a 3x4 matrix of words, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GimliState(pub [u32; 12]);

impl GimliState {
    pub fn from_bytes(b: &[u8; 48]) -> GimliState {
        GimliState(words::<12>(b))
    }

    pub fn to_bytes(self) -> [u8; 48] {
        let mut out = [0u8; 48];
        for (i, w) in self.0.iter().enumerate() {
            out[4 * i..4 * i + 4].copy_from_slice(&w.to_le_bytes());
        }
        out
    }
}

/// Rounds `from` down to `from - count + 1`.
pub fn gimli_rounds(st: GimliState, from: u32, count: u32) -> GimliState {
    let mut s = st.0;
    for round in (from + 1 - count..=from).rev() {
        for j in 0..4 {
            let x = s[j].rotate_left(24);
            let y = s[4 + j].rotate_left(9);
            let z = s[8 + j];
            s[8 + j] = x ^ (z << 1) ^ ((y & z) << 2);
            s[4 + j] = y ^ x ^ ((x | z) << 1);
            s[j] = z ^ y ^ ((x & y) << 3);
        }
        match round & 3 {
            0 => {
                s.swap(0, 1);
                s.swap(2, 3);
                s[0] ^= 0x9e37_7900 ^ round;
            }
            2 => {
                s.swap(0, 2);
                s.swap(1, 3);
            }
            _ => {}
        }
    }
    GimliState(s)
}

pub fn gimli(st: GimliState) -> GimliState {
    gimli_rounds(st, 24, 24)
}
