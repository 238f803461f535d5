//! Multi-precision numbers as limbs with per-limb bit-bound certificates,
//! generic in limb count and radix, with the Poly1305 field 2^130 - 5.

use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LimbError {
    #[error("radix {0} is outside 1..=64")]
    BadRadix(u32),
    #[error("limb {index} = {value:#x} exceeds its bound of {bound} bits")]
    BoundViolated {
        index: usize,
        value: u64,
        bound: u32,
    },
    #[error("operands differ in radix or limb count")]
    Shape,
    #[error("limb bounds admit overflow: {0}")]
    Overflow(String),
    #[error("value does not fit {count} limbs of radix {radix}")]
    TooLarge { radix: u32, count: usize },
    #[error("precondition {0} does not hold")]
    Precondition(String),
}

/// Bound predicates over limb certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundPred {
    /// Every limb uses at most `k` bits.
    BRep(u32),
    /// Limb `limb` uses at most `k` bits.
    UbW64 { limb: usize, k: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LimbNum {
    limbs: Vec<u64>,
    radix: u32,
    bounds: Vec<u32>,
}

fn bits(v: u64) -> u32 {
    64 - v.leading_zeros()
}

fn ceil_log2(n: usize) -> u32 {
    usize::BITS - n.saturating_sub(1).leading_zeros()
}

impl LimbNum {
    /// Limbs with tight bounds.
    pub fn new(limbs: Vec<u64>, radix: u32) -> Result<LimbNum, LimbError> {
        let bounds = limbs.iter().map(|l| bits(*l)).collect();
        LimbNum::with_bounds(limbs, radix, bounds)
    }

    pub fn with_bounds(
        limbs: Vec<u64>,
        radix: u32,
        bounds: Vec<u32>,
    ) -> Result<LimbNum, LimbError> {
        if !(1..=64).contains(&radix) {
            return Err(LimbError::BadRadix(radix));
        }
        if limbs.len() != bounds.len() || limbs.is_empty() {
            return Err(LimbError::Shape);
        }
        let x = LimbNum {
            limbs,
            radix,
            bounds,
        };
        x.check()?;
        Ok(x)
    }

    /// The canonical `count`-limb representation of `v`; the top limb takes
    /// every remaining bit.
    pub fn from_uint(v: &BigUint, radix: u32, count: usize) -> Result<LimbNum, LimbError> {
        let d = v.to_u64_digits();
        let limbs = repack(&d, radix, count)?;
        LimbNum::new(limbs, radix)
    }

    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }

    pub fn radix(&self) -> u32 {
        self.radix
    }

    pub fn bounds(&self) -> &[u32] {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.limbs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.limbs.is_empty()
    }

    /// Every limb is below `2^bound`.
    pub fn check(&self) -> Result<(), LimbError> {
        for (i, (l, b)) in self.limbs.iter().zip(&self.bounds).enumerate() {
            if *b > 64 || bits(*l) > *b {
                return Err(LimbError::BoundViolated {
                    index: i,
                    value: *l,
                    bound: *b,
                });
            }
        }
        Ok(())
    }

    pub fn satisfies(&self, p: BoundPred) -> bool {
        match p {
            BoundPred::BRep(k) => self.bounds.iter().all(|b| *b <= k),
            BoundPred::UbW64 { limb, k } => self.bounds.get(limb).is_some_and(|b| *b <= k),
        }
    }

    /// `Σ limbs[i] · 2^(radix·i)`.
    pub fn repres(&self) -> BigUint {
        let mut acc = BigUint::ZERO;
        for l in self.limbs.iter().rev() {
            acc <<= self.radix;
            acc += *l;
        }
        acc
    }

    /// Largest bit length the certificates admit.
    fn max_bits(&self) -> u32 {
        let m = self
            .bounds
            .iter()
            .enumerate()
            .map(|(i, b)| b + self.radix * i as u32)
            .max()
            .unwrap_or(0);
        m + ceil_log2(self.limbs.len())
    }

    /// Exact value as radix-2^64 digits.
    fn digits(&self) -> Vec<u64> {
        let p = propagate(self);
        let mut out = Vec::new();
        let mut acc: u128 = 0;
        let mut n = 0u32;
        let last = p.limbs.len() - 1;
        for (i, l) in p.limbs.iter().enumerate() {
            let w = if i == last { 64 } else { p.radix };
            acc |= (*l as u128) << n;
            n += w;
            while n >= 64 {
                out.push(acc as u64);
                acc >>= 64;
                n -= 64;
            }
        }
        if n > 0 {
            out.push(acc as u64);
        }
        out
    }
}

impl fmt::Display for LimbNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .limbs
            .iter()
            .zip(&self.bounds)
            .map(|(l, b)| format!("{l:#x}/{b}"))
            .collect();
        write!(f, "[{}] radix 2^{}", parts.join(", "), self.radix)
    }
}

/// Splits radix-2^64 digits into `count` limbs of `radix` bits; the top limb
/// takes the remaining bits and must fit 64.
fn repack(d: &[u64], radix: u32, count: usize) -> Result<Vec<u64>, LimbError> {
    if !(1..=64).contains(&radix) {
        return Err(LimbError::BadRadix(radix));
    }
    let mask = if radix == 64 {
        u64::MAX
    } else {
        (1u64 << radix) - 1
    };
    let mut out = Vec::with_capacity(count);
    let mut acc: u128 = 0;
    let mut n = 0u32;
    let mut it = d.iter();
    for i in 0..count {
        let want = if i + 1 == count { 64 } else { radix };
        while n < want {
            match it.next() {
                Some(x) => {
                    acc |= (*x as u128) << n;
                    n += 64;
                }
                None => break,
            }
        }
        if i + 1 == count {
            out.push(acc as u64);
            acc = if n >= 64 { acc >> 64 } else { 0 };
            n = n.saturating_sub(64);
        } else {
            out.push(acc as u64 & mask);
            acc >>= radix;
            n = n.saturating_sub(radix);
        }
    }
    if acc != 0 || it.any(|x| *x != 0) || (n > 0 && acc != 0) {
        return Err(LimbError::TooLarge { radix, count });
    }
    Ok(out)
}

/// Limb-wise addition with delayed carries.
pub fn add(a: &LimbNum, b: &LimbNum) -> Result<LimbNum, LimbError> {
    if a.radix != b.radix || a.len() != b.len() {
        return Err(LimbError::Shape);
    }
    let mut limbs = Vec::with_capacity(a.len());
    let mut bounds = Vec::with_capacity(a.len());
    for i in 0..a.len() {
        let bound = a.bounds[i].max(b.bounds[i]) + 1;
        if bound > 64 {
            return Err(LimbError::Overflow(format!(
                "limb {i} would need {bound} bits"
            )));
        }
        limbs.push(a.limbs[i] + b.limbs[i]);
        bounds.push(bound);
    }
    LimbNum::with_bounds(limbs, a.radix, bounds)
}

/// Schoolbook product with 128-bit column accumulators, carried into
/// `a.len() + b.len()` limbs (more if the certificates require).
pub fn mul_schoolbook(a: &LimbNum, b: &LimbNum) -> Result<LimbNum, LimbError> {
    if a.radix != b.radix {
        return Err(LimbError::Shape);
    }
    let r = a.radix;
    let n = a.len() + b.len();
    let mut cols = vec![0u128; n - 1];
    let mut caps = vec![0u128; n - 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            let cap = ((1u128 << a.bounds[i]) - 1).checked_mul((1u128 << b.bounds[j]) - 1);
            let cap = cap
                .and_then(|c| caps[i + j].checked_add(c))
                .ok_or_else(|| LimbError::Overflow(format!("column {} exceeds 128 bits", i + j)))?;
            caps[i + j] = cap;
            cols[i + j] += a.limbs[i] as u128 * b.limbs[j] as u128;
        }
    }
    let mask: u128 = if r == 64 {
        u64::MAX as u128
    } else {
        (1u128 << r) - 1
    };
    let mut limbs = Vec::with_capacity(n);
    let mut carry: u128 = 0;
    for c in cols {
        let digit = (c & mask) + (carry & mask);
        limbs.push((digit & mask) as u64);
        carry = (c >> r) + (carry >> r) + (digit >> r);
    }
    loop {
        limbs.push((carry & mask) as u64);
        carry >>= r;
        if carry == 0 && limbs.len() >= n {
            break;
        }
    }
    let total = a.max_bits() + b.max_bits();
    let len = limbs.len();
    let mut bounds = vec![r; len];
    bounds[len - 1] = total.saturating_sub(r * (len as u32 - 1)).clamp(1, r);
    let mut out = LimbNum {
        limbs,
        radix: r,
        bounds,
    };
    for (i, l) in out.limbs.iter().enumerate() {
        out.bounds[i] = out.bounds[i].max(bits(*l));
    }
    out.check()?;
    Ok(out)
}

/// Carries every limb into the next so that all but the top limb use at
/// most `radix` bits. Appends limbs when the top carry needs room.
pub fn propagate(x: &LimbNum) -> LimbNum {
    let r = x.radix;
    if r == 64 {
        return x.clone();
    }
    let mask = (1u64 << r) - 1;
    let mut limbs = Vec::with_capacity(x.len() + 1);
    let mut bounds = Vec::with_capacity(x.len() + 1);
    let mut carry: u64 = 0;
    let mut cbits: u32 = 0;
    for (i, (l, b)) in x.limbs.iter().zip(&x.bounds).enumerate() {
        let v = *l as u128 + carry as u128;
        let vb = if cbits == 0 { *b } else { b.max(&cbits) + 1 };
        if i + 1 == x.len() && vb <= 64 {
            limbs.push(v as u64);
            bounds.push(vb);
            carry = 0;
            cbits = 0;
            break;
        }
        limbs.push(v as u64 & mask);
        bounds.push(vb.min(r));
        carry = (v >> r) as u64;
        cbits = vb.saturating_sub(r);
    }
    while cbits > 0 {
        limbs.push(carry & mask);
        bounds.push(cbits.min(r));
        carry >>= r;
        cbits = cbits.saturating_sub(r);
    }
    LimbNum {
        limbs,
        radix: r,
        bounds,
    }
}

/// Re-expresses `a` with `to_count` limbs of `to_radix` bits.
pub fn convert(a: &LimbNum, to_radix: u32, to_count: usize) -> Result<LimbNum, LimbError> {
    let limbs = repack(&a.digits(), to_radix, to_count)?;
    let top = a
        .max_bits()
        .saturating_sub(to_radix * (to_count as u32 - 1))
        .min(64);
    let mut bounds = vec![to_radix; to_count];
    bounds[to_count - 1] = top;
    for (i, l) in limbs.iter().enumerate() {
        bounds[i] = bounds[i].min(64).max(bits(*l));
    }
    LimbNum::with_bounds(limbs, to_radix, bounds)
}

const P_DIGITS: [u64; 3] = [0xFFFF_FFFF_FFFF_FFFB, u64::MAX, 3];

/// `2^130 - 5`.
pub fn p1305() -> BigUint {
    (BigUint::from(1u8) << 130u32) - 5u32
}

fn digit_add(a: &mut Vec<u64>, b: &[u64]) {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    let mut c = false;
    for (i, x) in a.iter_mut().enumerate() {
        let (s1, c1) = x.overflowing_add(b.get(i).copied().unwrap_or(0));
        let (s2, c2) = s1.overflowing_add(c as u64);
        *x = s2;
        c = c1 || c2;
    }
    if c {
        a.push(1);
    }
}

fn digit_geq(a: &[u64], b: &[u64]) -> bool {
    let n = a.len().max(b.len());
    for i in (0..n).rev() {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        if x != y {
            return x > y;
        }
    }
    true
}

fn digit_sub(a: &mut [u64], b: &[u64]) {
    let mut borrow = false;
    for (i, x) in a.iter_mut().enumerate() {
        let (d1, b1) = x.overflowing_sub(b.get(i).copied().unwrap_or(0));
        let (d2, b2) = d1.overflowing_sub(borrow as u64);
        *x = d2;
        borrow = b1 || b2;
    }
}

/// Splits digits at bit 130: returns (low 130 bits, high part).
fn split130(d: &[u64]) -> (Vec<u64>, Vec<u64>) {
    let mut lo = vec![0u64; 3];
    for (i, x) in d.iter().take(3).enumerate() {
        lo[i] = *x;
    }
    lo[2] &= 3;
    let mut hi = Vec::new();
    for i in 2..d.len() {
        let cur = d[i] >> 2;
        let next = d.get(i + 1).map_or(0, |x| x << 62);
        hi.push(cur | next);
    }
    while hi.last() == Some(&0) {
        hi.pop();
    }
    (lo, hi)
}

fn times5(d: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(d.len() + 1);
    let mut c: u128 = 0;
    for x in d {
        let v = *x as u128 * 5 + c;
        out.push(v as u64);
        c = v >> 64;
    }
    if c != 0 {
        out.push(c as u64);
    }
    out
}

/// Fully reduces modulo `2^130 - 5` by folding `2^130 ≡ 5`, returning the
/// canonical representation in the radix of `x` (5 limbs for radix 26,
/// 3 limbs for radix 64).
pub fn reduce_p1305(x: &LimbNum) -> Result<LimbNum, LimbError> {
    let mut d = x.digits();
    loop {
        let (mut lo, hi) = split130(&d);
        if hi.is_empty() {
            d = lo;
            break;
        }
        digit_add(&mut lo, &times5(&hi));
        d = lo;
    }
    if digit_geq(&d, &P_DIGITS) {
        digit_sub(&mut d, &P_DIGITS);
    }
    let count = 130usize.div_ceil(x.radix as usize);
    LimbNum::new(repack(&d, x.radix, count)?, x.radix)
}

/// Sums four radix-2^26 five-limb values into the packed three-limb form.
/// Bits above 2^130 are folded back with `2^130 ≡ 5`, so the result is
/// congruent to the sum modulo `2^130 - 5` (and equal when the sum is below
/// 2^130), and its top limb uses at most 4 bits.
pub fn add_rep5_pack(h: [&LimbNum; 4]) -> Result<LimbNum, LimbError> {
    for (i, x) in h.iter().enumerate() {
        if x.radix != 26 || x.len() != 5 || !x.satisfies(BoundPred::BRep(27)) {
            return Err(LimbError::Precondition(format!("bRep5 27 h{}", i + 1)));
        }
    }
    let s = add(&add(h[0], h[1])?, &add(h[2], h[3])?)?;
    let mut p = [0u64; 3];
    let mut acc: u128 = 0;
    let mut n = 0u32;
    let mut k = 0;
    for l in s.limbs() {
        acc += (*l as u128) << n;
        n += 26;
        if n >= 64 && k < 2 {
            p[k] = acc as u64;
            acc >>= 64;
            n -= 64;
            k += 1;
        }
    }
    p[2] = acc as u64;
    let c = p[2] >> 2;
    p[2] &= 3;
    let (l0, c0) = p[0].overflowing_add(c * 5);
    let (l1, c1) = p[1].overflowing_add(c0 as u64);
    p[0] = l0;
    p[1] = l1;
    p[2] += c1 as u64;
    LimbNum::with_bounds(p.to_vec(), 64, vec![64, 64, 4])
}

#[cfg(test)]
mod tests {
    use num_traits::One;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn oracle_repres(limbs: &[u64], radix: u32) -> BigUint {
        limbs
            .iter()
            .enumerate()
            .map(|(i, l)| BigUint::from(*l) << (radix as usize * i))
            .sum()
    }

    fn rand_limbs(rng: &mut impl Rng, n: usize, b: u32) -> Vec<u64> {
        (0..n).map(|_| rng.random::<u64>() >> (64 - b)).collect()
    }

    #[test]
    fn repres_examples() {
        assert_eq!(
            LimbNum::new(vec![1, 0, 0, 0, 0], 26).unwrap().repres(),
            BigUint::one()
        );
        assert_eq!(
            LimbNum::new(vec![0, 0, 1], 64).unwrap().repres(),
            BigUint::one() << 128u32
        );
        let x = LimbNum::new(vec![5, 3, 0, 0, 0], 26).unwrap();
        assert_eq!(x.repres(), BigUint::from(5u64 + 3 * (1 << 26)));
    }

    #[test]
    fn add_examples() {
        let one = LimbNum::with_bounds(vec![1, 0, 0], 64, vec![1, 1, 1]).unwrap();
        let s = add(&one, &one).unwrap();
        assert_eq!(s.limbs(), [2, 0, 0]);
        assert_eq!(s.bounds()[0], 2);
        let x = LimbNum::with_bounds(vec![0; 5], 26, vec![27; 5]).unwrap();
        let y = add(&add(&x, &x).unwrap(), &add(&x, &x).unwrap()).unwrap();
        assert!(y.satisfies(BoundPred::BRep(29)));
        assert!(!y.satisfies(BoundPred::BRep(28)));
        let big = LimbNum::with_bounds(vec![0; 3], 64, vec![64; 3]).unwrap();
        assert!(matches!(add(&big, &big), Err(LimbError::Overflow(_))));
    }

    #[test]
    fn bounds_are_checked() {
        assert!(matches!(
            LimbNum::with_bounds(vec![8], 26, vec![3]),
            Err(LimbError::BoundViolated { index: 0, .. })
        ));
        assert!(LimbNum::new(vec![1], 65).is_err());
    }

    #[test]
    fn mul_examples() {
        let one = LimbNum::new(vec![1, 0, 0, 0, 0], 26).unwrap();
        let b = LimbNum::new(vec![3, 1 << 25, 7, 0, 9], 26).unwrap();
        let p = mul_schoolbook(&one, &b).unwrap();
        assert_eq!(p.repres(), b.repres());
        let z = LimbNum::new(vec![0; 5], 26).unwrap();
        assert!(mul_schoolbook(&z, &z)
            .unwrap()
            .limbs()
            .iter()
            .all(|l| *l == 0));
        let max = LimbNum::with_bounds(vec![u64::MAX; 3], 64, vec![64; 3]).unwrap();
        assert!(matches!(
            mul_schoolbook(&max, &max),
            Err(LimbError::Overflow(_))
        ));
    }

    #[test]
    fn reduce_examples() {
        let two130 = LimbNum::new(vec![0, 0, 0, 0, 0, 1], 26).unwrap();
        assert_eq!(reduce_p1305(&two130).unwrap().repres(), BigUint::from(5u8));
        let small = LimbNum::new(vec![12345, 0, 3], 64).unwrap();
        assert_eq!(reduce_p1305(&small).unwrap().repres(), small.repres());
        let p = LimbNum::from_uint(&p1305(), 64, 3).unwrap();
        assert_eq!(reduce_p1305(&p).unwrap().repres(), BigUint::ZERO);
    }

    #[test]
    fn pack_examples() {
        let one = LimbNum::new(vec![1, 0, 0, 0, 0], 26).unwrap();
        let r = add_rep5_pack([&one, &one, &one, &one]).unwrap();
        assert_eq!(r.limbs(), [4, 0, 0]);
        let z = LimbNum::new(vec![0; 5], 26).unwrap();
        let a = LimbNum::new(vec![5, 6, 7, 8, 9], 26).unwrap();
        let b = LimbNum::new(vec![1 << 25, 0, 3, 0, 1], 26).unwrap();
        let c = LimbNum::new(vec![0, 0, 0, 0, (1 << 26) - 1], 26).unwrap();
        let r = add_rep5_pack([&a, &z, &b, &c]).unwrap();
        assert_eq!(
            r.repres() % p1305(),
            (a.repres() + b.repres() + c.repres()) % p1305()
        );
        let wide = LimbNum::new(vec![0, 0, 0, 0, 1 << 27], 26).unwrap();
        assert!(matches!(
            add_rep5_pack([&wide, &z, &z, &z]),
            Err(LimbError::Precondition(_))
        ));
    }

    #[test]
    fn pack_extremes_keep_top_limb_small() {
        let m = (1u64 << 27) - 1;
        let shapes: Vec<Vec<u64>> = (0..32u32)
            .map(|mask| {
                (0..5)
                    .map(|i| if mask >> i & 1 == 1 { m } else { 0 })
                    .collect()
            })
            .collect();
        let p = p1305();
        for s1 in &shapes {
            for s2 in [&shapes[0], &shapes[31], s1] {
                let a = LimbNum::new(s1.clone(), 26).unwrap();
                let b = LimbNum::new(s2.clone(), 26).unwrap();
                let r = add_rep5_pack([&a, &b, &a, &b]).unwrap();
                assert!(r.limbs()[2] < 16);
                let sum = (a.repres() + b.repres()) * 2u32;
                assert_eq!(r.repres() % &p, sum % &p);
            }
        }
    }

    #[test]
    fn oracles_across_limb_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, radix) in [(3, 64), (4, 64), (5, 26), (9, 26), (9, 64)] {
            for _ in 0..200 {
                let b = rng.random_range(1..=radix.min(62));
                let a = LimbNum::new(rand_limbs(&mut rng, n, b), radix).unwrap();
                let c = LimbNum::new(rand_limbs(&mut rng, n, b), radix).unwrap();
                let s = add(&a, &c).unwrap();
                assert_eq!(
                    s.repres(),
                    oracle_repres(a.limbs(), radix) + oracle_repres(c.limbs(), radix)
                );
                let m = mul_schoolbook(&a, &c).unwrap();
                assert_eq!(m.repres(), a.repres() * c.repres());
                m.check().unwrap();
                let r = reduce_p1305(&m).unwrap();
                assert_eq!(r.repres(), m.repres() % p1305());
                assert_eq!(reduce_p1305(&r).unwrap().repres(), r.repres());
            }
        }
    }

    proptest! {
        #[test]
        fn convert_roundtrips(limbs in prop::collection::vec(0u64..(1 << 26), 5)) {
            let a = LimbNum::new(limbs, 26).unwrap();
            let p = convert(&a, 64, 3).unwrap();
            prop_assert_eq!(p.repres(), a.repres());
            let back = convert(&p, 26, 5).unwrap();
            prop_assert_eq!(back.limbs(), a.limbs());
        }

        #[test]
        fn propagate_preserves_value(limbs in prop::collection::vec(any::<u64>(), 1..9), r in 8u32..64) {
            let a = LimbNum::new(limbs, r).unwrap();
            let p = propagate(&a);
            p.check().unwrap();
            prop_assert_eq!(p.repres(), a.repres());
            for (i, b) in p.bounds().iter().enumerate() {
                if i + 1 < p.len() {
                    prop_assert!(*b <= r);
                }
            }
        }
    }
}
