//! Fixed-width machine words.
//!
//! A [`Word`] is an integer modulo `2^w` for one of the six machine widths.
//! Values are always kept reduced: bits above the width are zero.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::One;
use thiserror::Error;

/// The machine widths supported by the word model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Width {
    W8,
    W16,
    W32,
    W64,
    W128,
    W256,
}

impl Width {
    pub const ALL: [Width; 6] = [
        Width::W8,
        Width::W16,
        Width::W32,
        Width::W64,
        Width::W128,
        Width::W256,
    ];

    pub fn bits(self) -> u32 {
        match self {
            Width::W8 => 8,
            Width::W16 => 16,
            Width::W32 => 32,
            Width::W64 => 64,
            Width::W128 => 128,
            Width::W256 => 256,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    pub fn from_bits(bits: u32) -> Option<Width> {
        Width::ALL.into_iter().find(|w| w.bits() == bits)
    }

    /// Number of 64-bit limbs used to store a word of this width.
    pub fn limbs(self) -> usize {
        match self {
            Width::W128 => 2,
            Width::W256 => 4,
            _ => 1,
        }
    }

    /// Mask for the low limb when the width fits in one limb.
    fn low_mask(self) -> u64 {
        match self {
            Width::W8 => 0xff,
            Width::W16 => 0xffff,
            Width::W32 => 0xffff_ffff,
            _ => u64::MAX,
        }
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}", self.bits())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("shift count {count} out of range for width {width}")]
    ShiftOutOfRange { count: u32, width: u32 },
    #[error("division by zero")]
    DivByZero,
    #[error("width mismatch: {0} vs {1}")]
    WidthMismatch(Width, Width),
    #[error("cannot split a {whole}-bit word into {part}-bit parts")]
    BadSplit { whole: u32, part: u32 },
    #[error("cannot join {count} parts of {part} bits")]
    BadJoin { count: usize, part: u32 },
}

/// A `w`-bit machine word.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Word {
    width: Width,
    limbs: [u64; 4],
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self, self.width)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.width.limbs();
        let top = (0..n).rev().find(|&i| self.limbs[i] != 0).unwrap_or(0);
        write!(f, "0x{:x}", self.limbs[top])?;
        for i in (0..top).rev() {
            write!(f, "{:016x}", self.limbs[i])?;
        }
        Ok(())
    }
}

fn check_same(a: &Word, b: &Word) {
    debug_assert_eq!(a.width, b.width, "word width mismatch");
}

impl Word {
    pub fn zero(width: Width) -> Word {
        Word {
            width,
            limbs: [0; 4],
        }
    }

    pub fn ones(width: Width) -> Word {
        Word::zero(width).not()
    }

    pub fn from_u64(width: Width, v: u64) -> Word {
        let mut limbs = [0; 4];
        limbs[0] = v & width.low_mask();
        Word { width, limbs }
    }

    pub fn from_u128(width: Width, v: u128) -> Word {
        Word::from_limbs(width, [v as u64, (v >> 64) as u64, 0, 0])
    }

    /// Builds a word from little-endian limbs, discarding bits above the width.
    pub fn from_limbs(width: Width, mut limbs: [u64; 4]) -> Word {
        let n = width.limbs();
        for l in limbs.iter_mut().skip(n) {
            *l = 0;
        }
        limbs[0] &= if n == 1 { width.low_mask() } else { u64::MAX };
        Word { width, limbs }
    }

    /// Two's-complement conversion of a signed machine integer.
    pub fn from_i128(width: Width, v: i128) -> Word {
        let ext = if v < 0 { u64::MAX } else { 0 };
        Word::from_limbs(width, [v as u64, (v >> 64) as u64, ext, ext])
    }

    /// `of_int`: the residue of an arbitrary integer modulo `2^w`.
    pub fn of_int(width: Width, v: &BigInt) -> Word {
        let modulus = BigInt::one() << width.bits();
        let mut r = v % &modulus;
        if r.sign() == Sign::Minus {
            r += &modulus;
        }
        Word::of_uint(width, r.magnitude())
    }

    pub fn of_uint(width: Width, v: &BigUint) -> Word {
        let mut limbs = [0u64; 4];
        for (i, d) in v.iter_u64_digits().take(4).enumerate() {
            limbs[i] = d;
        }
        Word::from_limbs(width, limbs)
    }

    /// Little-endian bytes; `bytes.len()` must equal the width in bytes.
    pub fn from_le_bytes(width: Width, bytes: &[u8]) -> Word {
        assert_eq!(bytes.len(), width.bytes());
        let mut limbs = [0u64; 4];
        for (i, b) in bytes.iter().enumerate() {
            limbs[i / 8] |= (*b as u64) << (8 * (i % 8));
        }
        Word { width, limbs }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        (0..self.width.bytes())
            .map(|i| (self.limbs[i / 8] >> (8 * (i % 8))) as u8)
            .collect()
    }

    pub fn width(&self) -> Width {
        self.width
    }

    pub fn limbs(&self) -> [u64; 4] {
        self.limbs
    }

    /// The low 64 bits.
    pub fn low_u64(&self) -> u64 {
        self.limbs[0]
    }

    pub fn low_u128(&self) -> u128 {
        self.limbs[0] as u128 | (self.limbs[1] as u128) << 64
    }

    pub fn to_uint(&self) -> BigUint {
        let mut bytes = Vec::with_capacity(32);
        for l in &self.limbs[..self.width.limbs()] {
            bytes.extend_from_slice(&l.to_le_bytes());
        }
        BigUint::from_bytes_le(&bytes)
    }

    pub fn to_sint(&self) -> BigInt {
        let u = BigInt::from(self.to_uint());
        if self.msb() {
            u - (BigInt::one() << self.width.bits())
        } else {
            u
        }
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    pub fn bit(&self, i: u32) -> bool {
        (self.limbs[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    pub fn msb(&self) -> bool {
        self.bit(self.width.bits() - 1)
    }

    pub fn add(&self, other: &Word) -> Word {
        self.add_carry(other, false).0
    }

    /// Addition with carry in and carry out.
    pub fn add_carry(&self, other: &Word, cin: bool) -> (Word, bool) {
        check_same(self, other);
        let w = self.width;
        if w.limbs() == 1 {
            let s = self.limbs[0] as u128 + other.limbs[0] as u128 + cin as u128;
            let r = Word::from_u64(w, s as u64);
            return (r, s >> w.bits() != 0);
        }
        let mut out = [0u64; 4];
        let mut c = cin as u64;
        for (i, o) in out.iter_mut().enumerate().take(w.limbs()) {
            let s = self.limbs[i] as u128 + other.limbs[i] as u128 + c as u128;
            *o = s as u64;
            c = (s >> 64) as u64;
        }
        (
            Word {
                width: w,
                limbs: out,
            },
            c != 0,
        )
    }

    pub fn sub(&self, other: &Word) -> Word {
        self.sub_borrow(other, false).0
    }

    /// Subtraction with borrow in and borrow out.
    pub fn sub_borrow(&self, other: &Word, bin: bool) -> (Word, bool) {
        check_same(self, other);
        let (r, c) = self.add_carry(&other.not(), !bin);
        (r, !c)
    }

    pub fn neg(&self) -> Word {
        Word::zero(self.width).sub(self)
    }

    /// Low half of the product.
    pub fn mul(&self, other: &Word) -> Word {
        check_same(self, other);
        if self.width.limbs() == 1 {
            return Word::from_u64(self.width, self.limbs[0].wrapping_mul(other.limbs[0]));
        }
        self.mul_wide(other).1
    }

    /// Full product as `(high, low)`, both of the operand width.
    pub fn mul_wide(&self, other: &Word) -> (Word, Word) {
        check_same(self, other);
        let w = self.width;
        if w.limbs() == 1 {
            let p = self.limbs[0] as u128 * other.limbs[0] as u128;
            let bits = w.bits();
            return (
                Word::from_u64(w, (p >> bits) as u64),
                Word::from_u64(w, p as u64),
            );
        }
        let n = w.limbs();
        let mut prod = [0u64; 8];
        for i in 0..n {
            let mut carry = 0u128;
            for j in 0..n {
                let t =
                    self.limbs[i] as u128 * other.limbs[j] as u128 + prod[i + j] as u128 + carry;
                prod[i + j] = t as u64;
                carry = t >> 64;
            }
            prod[i + n] = carry as u64;
        }
        let mut lo = [0u64; 4];
        let mut hi = [0u64; 4];
        lo[..n].copy_from_slice(&prod[..n]);
        hi[..n].copy_from_slice(&prod[n..2 * n]);
        (
            Word {
                width: w,
                limbs: hi,
            },
            Word {
                width: w,
                limbs: lo,
            },
        )
    }

    /// Unsigned quotient and remainder.
    pub fn udivrem(&self, other: &Word) -> Result<(Word, Word), WordError> {
        check_same(self, other);
        if other.is_zero() {
            return Err(WordError::DivByZero);
        }
        let w = self.width;
        if w.limbs() <= 2 {
            let a = self.low_u128();
            let b = other.low_u128();
            return Ok((Word::from_u128(w, a / b), Word::from_u128(w, a % b)));
        }
        let (q, r) = (
            self.to_uint() / other.to_uint(),
            self.to_uint() % other.to_uint(),
        );
        Ok((Word::of_uint(w, &q), Word::of_uint(w, &r)))
    }

    pub fn udiv(&self, other: &Word) -> Result<Word, WordError> {
        Ok(self.udivrem(other)?.0)
    }

    pub fn urem(&self, other: &Word) -> Result<Word, WordError> {
        Ok(self.udivrem(other)?.1)
    }

    pub fn and(&self, other: &Word) -> Word {
        self.zip(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Word) -> Word {
        self.zip(other, |a, b| a | b)
    }

    pub fn xor(&self, other: &Word) -> Word {
        self.zip(other, |a, b| a ^ b)
    }

    pub fn not(&self) -> Word {
        let mut limbs = self.limbs;
        for l in limbs.iter_mut().take(self.width.limbs()) {
            *l = !*l;
        }
        Word::from_limbs(self.width, limbs)
    }

    fn zip(&self, other: &Word, f: impl Fn(u64, u64) -> u64) -> Word {
        check_same(self, other);
        let mut limbs = [0u64; 4];
        for (i, l) in limbs.iter_mut().enumerate().take(self.width.limbs()) {
            *l = f(self.limbs[i], other.limbs[i]);
        }
        Word {
            width: self.width,
            limbs,
        }
    }

    fn check_count(&self, n: u32) -> Result<(), WordError> {
        if n > self.width.bits() {
            Err(WordError::ShiftOutOfRange {
                count: n,
                width: self.width.bits(),
            })
        } else {
            Ok(())
        }
    }

    /// Logical left shift; `n` must lie in `[0, width]`.
    pub fn shl(&self, n: u32) -> Result<Word, WordError> {
        self.check_count(n)?;
        Ok(self.shl_wrapping(n))
    }

    /// Logical right shift; `n` must lie in `[0, width]`.
    pub fn shr(&self, n: u32) -> Result<Word, WordError> {
        self.check_count(n)?;
        Ok(self.shr_wrapping(n))
    }

    /// Arithmetic right shift; `n` must lie in `[0, width]`.
    pub fn sar(&self, n: u32) -> Result<Word, WordError> {
        self.check_count(n)?;
        let r = self.shr_wrapping(n);
        if !self.msb() || n == 0 {
            return Ok(r);
        }
        Ok(r.or(&Word::ones(self.width).shl_wrapping(self.width.bits() - n)))
    }

    pub fn rol(&self, n: u32) -> Result<Word, WordError> {
        self.check_count(n)?;
        let b = self.width.bits();
        Ok(self.shl_wrapping(n).or(&self.shr_wrapping(b - n)))
    }

    pub fn ror(&self, n: u32) -> Result<Word, WordError> {
        self.check_count(n)?;
        let b = self.width.bits();
        Ok(self.shr_wrapping(n).or(&self.shl_wrapping(b - n)))
    }

    /// Left shift where counts at or beyond the width give zero.
    pub fn shl_wrapping(&self, n: u32) -> Word {
        let w = self.width;
        if n >= w.bits() {
            return Word::zero(w);
        }
        if w.limbs() == 1 {
            return Word::from_u64(w, self.limbs[0] << n);
        }
        let (ls, bs) = ((n / 64) as usize, n % 64);
        let mut out = [0u64; 4];
        for i in (ls..w.limbs()).rev() {
            let mut v = self.limbs[i - ls] << bs;
            if bs != 0 && i > ls {
                v |= self.limbs[i - ls - 1] >> (64 - bs);
            }
            out[i] = v;
        }
        Word {
            width: w,
            limbs: out,
        }
    }

    /// Logical right shift where counts at or beyond the width give zero.
    pub fn shr_wrapping(&self, n: u32) -> Word {
        let w = self.width;
        if n >= w.bits() {
            return Word::zero(w);
        }
        if w.limbs() == 1 {
            return Word::from_u64(w, self.limbs[0] >> n);
        }
        let (ls, bs) = ((n / 64) as usize, n % 64);
        let n_l = w.limbs();
        let mut out = [0u64; 4];
        for (i, o) in out.iter_mut().enumerate().take(n_l - ls) {
            let mut v = self.limbs[i + ls] >> bs;
            if bs != 0 && i + ls + 1 < n_l {
                v |= self.limbs[i + ls + 1] << (64 - bs);
            }
            *o = v;
        }
        Word {
            width: w,
            limbs: out,
        }
    }

    pub fn ult(&self, other: &Word) -> bool {
        check_same(self, other);
        for i in (0..4).rev() {
            if self.limbs[i] != other.limbs[i] {
                return self.limbs[i] < other.limbs[i];
            }
        }
        false
    }

    pub fn ule(&self, other: &Word) -> bool {
        !other.ult(self)
    }

    pub fn slt(&self, other: &Word) -> bool {
        match (self.msb(), other.msb()) {
            (true, false) => true,
            (false, true) => false,
            _ => self.ult(other),
        }
    }

    pub fn sle(&self, other: &Word) -> bool {
        !other.slt(self)
    }

    /// Zero-extension or truncation to `width`.
    pub fn zext(&self, width: Width) -> Word {
        Word::from_limbs(width, self.limbs)
    }

    /// Sign-extension or truncation to `width`.
    pub fn sext(&self, width: Width) -> Word {
        if width <= self.width || !self.msb() {
            return self.zext(width);
        }
        let fill = Word::ones(width).shl_wrapping(self.width.bits());
        self.zext(width).or(&fill)
    }

    /// Little-endian split into parts of width `part`.
    pub fn split(&self, part: Width) -> Result<Vec<Word>, WordError> {
        if part > self.width {
            return Err(WordError::BadSplit {
                whole: self.width.bits(),
                part: part.bits(),
            });
        }
        let k = self.width.bits() / part.bits();
        Ok((0..k)
            .map(|i| self.shr_wrapping(i * part.bits()).zext(part))
            .collect())
    }

    /// Inverse of [`Word::split`]: `parts[0]` is the least significant.
    pub fn join(parts: &[Word]) -> Result<Word, WordError> {
        let first = parts
            .first()
            .ok_or(WordError::BadJoin { count: 0, part: 0 })?;
        let part = first.width;
        let total = part.bits() as usize * parts.len();
        let width =
            u32::try_from(total)
                .ok()
                .and_then(Width::from_bits)
                .ok_or(WordError::BadJoin {
                    count: parts.len(),
                    part: part.bits(),
                })?;
        let mut acc = Word::zero(width);
        for (i, p) in parts.iter().enumerate() {
            if p.width != part {
                return Err(WordError::WidthMismatch(part, p.width));
            }
            acc = acc.or(&p.zext(width).shl_wrapping(i as u32 * part.bits()));
        }
        Ok(acc)
    }

    /// Even parity of the low byte, as computed by the x86 PF flag.
    pub fn parity_low_byte(&self) -> bool {
        (self.limbs[0] as u8).count_ones().is_multiple_of(2)
    }
}

/// Parses a non-negative decimal or `0x` hexadecimal literal.
pub fn parse_uint(s: &str) -> Option<BigUint> {
    let s = s.replace('_', "");
    if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        if h.is_empty() {
            return None;
        }
        BigUint::parse_bytes(h.as_bytes(), 16)
    } else if s.is_empty() {
        None
    } else {
        BigUint::parse_bytes(s.as_bytes(), 10)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_w8_arith() {
        for a in 0u32..256 {
            for b in 0u32..256 {
                let x = Word::from_u64(Width::W8, a as u64);
                let y = Word::from_u64(Width::W8, b as u64);
                assert_eq!(x.add(&y).low_u64(), ((a + b) % 256) as u64);
                assert_eq!(x.sub(&y).low_u64(), ((a + 256 - b) % 256) as u64);
                assert_eq!(x.mul(&y).low_u64(), ((a * b) % 256) as u64);
                let (hi, lo) = x.mul_wide(&y);
                assert_eq!(hi.low_u64() * 256 + lo.low_u64(), (a * b) as u64);
                assert_eq!(x.add_carry(&y, true).1, a + b + 1 >= 256);
                assert_eq!(x.sub_borrow(&y, false).1, a < b);
                assert_eq!(x.ult(&y), a < b);
                assert_eq!(x.slt(&y), (a as u8 as i8) < (b as u8 as i8));
                if let Some(q) = a.checked_div(b) {
                    assert_eq!(x.udiv(&y).unwrap().low_u64(), q as u64);
                    assert_eq!(x.urem(&y).unwrap().low_u64(), (a % b) as u64);
                }
            }
            let x = Word::from_u64(Width::W8, a as u64);
            for n in 0..=8u32 {
                let shl = if n == 8 { 0 } else { (a << n) & 0xff };
                assert_eq!(x.shl(n).unwrap().low_u64(), shl as u64);
                assert_eq!(x.shr(n).unwrap().low_u64(), (a >> n) as u64);
                let sar = ((a as u8 as i8 as i32) >> n.min(7)) as u8;
                assert_eq!(x.sar(n).unwrap().low_u64(), sar as u64);
                assert_eq!(x.rol(n).unwrap().low_u64(), (a as u8).rotate_left(n) as u64);
                assert_eq!(
                    x.ror(n).unwrap().low_u64(),
                    (a as u8).rotate_right(n) as u64
                );
            }
            assert!(x.shl(9).is_err());
        }
    }

    #[test]
    fn of_int_reduces() {
        let w = Word::of_int(Width::W32, &BigInt::from(1u64 << 33 | 5));
        assert_eq!(w.low_u64(), 5);
        let m = Word::of_int(Width::W16, &BigInt::from(-1));
        assert_eq!(m.low_u64(), 0xffff);
        assert_eq!(m.to_sint(), BigInt::from(-1));
        assert_eq!(Word::from_i128(Width::W256, -1), Word::ones(Width::W256));
    }

    #[test]
    fn split_join_u256() {
        let w = Word::from_limbs(Width::W256, [1, 2, 3, 4]);
        let parts = w.split(Width::W64).unwrap();
        assert_eq!(
            parts.iter().map(|p| p.low_u64()).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
        assert_eq!(Word::join(&parts).unwrap(), w);
        assert!(Word::from_u64(Width::W8, 1).split(Width::W16).is_err());
    }

    #[test]
    fn display_hex() {
        let w = Word::from_limbs(Width::W128, [0xab, 1, 0, 0]);
        assert_eq!(w.to_string(), "0x100000000000000ab");
        assert_eq!(Word::zero(Width::W64).to_string(), "0x0");
    }
}
