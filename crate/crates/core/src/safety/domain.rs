//! Intervals whose endpoints are affine forms over non-negative symbols.

use std::collections::BTreeMap;
use std::fmt;

/// `c + Σ k·v` over tracked inputs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lin {
    pub c: i128,
    pub terms: BTreeMap<String, i128>,
}

impl Lin {
    pub fn constant(c: i128) -> Lin {
        Lin {
            c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(v: &str) -> Lin {
        Lin {
            c: 0,
            terms: [(v.to_string(), 1)].into(),
        }
    }

    pub fn as_const(&self) -> Option<i128> {
        self.terms.is_empty().then_some(self.c)
    }

    fn combine(&self, o: &Lin, f: impl Fn(i128, i128) -> Option<i128>) -> Option<Lin> {
        let mut terms = BTreeMap::new();
        for k in self.terms.keys().chain(o.terms.keys()) {
            let a = self.terms.get(k).copied().unwrap_or(0);
            let b = o.terms.get(k).copied().unwrap_or(0);
            let v = f(a, b)?;
            if v != 0 {
                terms.insert(k.clone(), v);
            }
        }
        Some(Lin {
            c: f(self.c, o.c)?,
            terms,
        })
    }

    pub fn add(&self, o: &Lin) -> Option<Lin> {
        self.combine(o, |a, b| a.checked_add(b))
    }

    pub fn sub(&self, o: &Lin) -> Option<Lin> {
        self.combine(o, |a, b| a.checked_sub(b))
    }

    pub fn scale(&self, k: i128) -> Option<Lin> {
        self.combine(&Lin::default(), |a, _| a.checked_mul(k))
    }

    pub fn add_const(&self, k: i128) -> Option<Lin> {
        self.add(&Lin::constant(k))
    }

    /// Termwise minimum: a lower bound of both since symbols are
    /// non-negative.
    pub fn meet_lower(&self, o: &Lin) -> Lin {
        self.combine(o, |a, b| Some(a.min(b)))
            .expect("min cannot overflow")
    }

    /// Termwise maximum: an upper bound of both.
    pub fn join_upper(&self, o: &Lin) -> Lin {
        self.combine(o, |a, b| Some(a.max(b)))
            .expect("max cannot overflow")
    }

    /// Whether `self >= o` for every non-negative valuation.
    pub fn dominates(&self, o: &Lin) -> bool {
        match self.sub(o) {
            Some(d) => d.c >= 0 && d.terms.values().all(|k| *k >= 0),
            None => false,
        }
    }
}

impl fmt::Display for Lin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, k) in &self.terms {
            let (neg, a) = (*k < 0, k.unsigned_abs());
            match (first, neg) {
                (true, true) => write!(f, "-")?,
                (true, false) => {}
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
            }
            if a == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{a}*{v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.c)
        } else if self.c > 0 {
            write!(f, " + {}", self.c)
        } else if self.c < 0 {
            write!(f, " - {}", self.c.unsigned_abs())
        } else {
            Ok(())
        }
    }
}

/// Closed interval; `None` endpoints are infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Itv {
    pub lo: Option<Lin>,
    pub hi: Option<Lin>,
}

fn lift2(a: &Option<Lin>, b: &Option<Lin>, f: impl Fn(&Lin, &Lin) -> Option<Lin>) -> Option<Lin> {
    f(a.as_ref()?, b.as_ref()?)
}

impl Itv {
    pub fn point(l: Lin) -> Itv {
        Itv {
            lo: Some(l.clone()),
            hi: Some(l),
        }
    }

    pub fn consts(lo: i128, hi: i128) -> Itv {
        Itv {
            lo: Some(Lin::constant(lo)),
            hi: Some(Lin::constant(hi)),
        }
    }

    pub fn top() -> Itv {
        Itv { lo: None, hi: None }
    }

    pub fn const_bounds(&self) -> Option<(i128, i128)> {
        Some((self.lo.as_ref()?.as_const()?, self.hi.as_ref()?.as_const()?))
    }

    pub fn as_const(&self) -> Option<i128> {
        self.const_bounds().filter(|(a, b)| a == b).map(|(a, _)| a)
    }

    pub fn add(&self, o: &Itv) -> Itv {
        Itv {
            lo: lift2(&self.lo, &o.lo, Lin::add),
            hi: lift2(&self.hi, &o.hi, Lin::add),
        }
    }

    pub fn sub(&self, o: &Itv) -> Itv {
        Itv {
            lo: lift2(&self.lo, &o.hi, Lin::sub),
            hi: lift2(&self.hi, &o.lo, Lin::sub),
        }
    }

    pub fn add_const(&self, k: i128) -> Itv {
        self.add(&Itv::consts(k, k))
    }

    pub fn scale(&self, k: i128) -> Itv {
        let lo = self.lo.as_ref().and_then(|l| l.scale(k));
        let hi = self.hi.as_ref().and_then(|l| l.scale(k));
        match k.cmp(&0) {
            std::cmp::Ordering::Less => Itv { lo: hi, hi: lo },
            std::cmp::Ordering::Equal => Itv::consts(0, 0),
            std::cmp::Ordering::Greater => Itv { lo, hi },
        }
    }

    pub fn is_nonneg(&self) -> bool {
        self.lo
            .as_ref()
            .is_some_and(|l| l.dominates(&Lin::constant(0)))
    }

    pub fn join(&self, o: &Itv) -> Itv {
        Itv {
            lo: lift2(&self.lo, &o.lo, |a, b| Some(a.meet_lower(b))),
            hi: lift2(&self.hi, &o.hi, |a, b| Some(a.join_upper(b))),
        }
    }

    /// Endpoints that moved outwards become infinite.
    pub fn widen(&self, next: &Itv) -> Itv {
        let lo = match (&self.lo, &next.lo) {
            (Some(a), Some(b)) if b.dominates(a) => Some(a.clone()),
            _ => None,
        };
        let hi = match (&self.hi, &next.hi) {
            (Some(a), Some(b)) if a.dominates(b) => Some(a.clone()),
            _ => None,
        };
        Itv { lo, hi }
    }

    /// Tightens the upper endpoint with `b`, keeping the old one when it is
    /// provably smaller.
    pub fn cap_hi(&mut self, b: Option<Lin>) {
        let Some(b) = b else { return };
        match &self.hi {
            Some(h) if b.dominates(h) => {}
            _ => self.hi = Some(b),
        }
    }

    /// Tightens the lower endpoint with `b`. When neither bound dominates,
    /// a bound that can be negative loses to the old one.
    pub fn cap_lo(&mut self, b: Option<Lin>) {
        let Some(b) = b else { return };
        match &self.lo {
            Some(l) if l.dominates(&b) => {}
            Some(_) if b.c < 0 => {}
            _ => self.lo = Some(b),
        }
    }

    /// Provably empty.
    pub fn is_empty(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => l
                .sub(h)
                .is_some_and(|d| d.c > 0 && d.terms.values().all(|k| *k >= 0)),
            _ => false,
        }
    }

    /// Whether the interval provably lies inside `[lo, hi]`.
    pub fn within(&self, lo: i128, hi: i128) -> bool {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => l.dominates(&Lin::constant(lo)) && Lin::constant(hi).dominates(h),
            _ => false,
        }
    }
}

impl fmt::Display for Itv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            Some(l) => write!(f, "[{l}; ")?,
            None => write!(f, "[-inf; ")?,
        }
        match &self.hi {
            Some(h) => write!(f, "{h}]"),
            None => write!(f, "+inf]"),
        }
    }
}

/// Abstract value of a scalar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AVal {
    /// No value yet.
    Bot,
    Num(Itv),
    /// A pointer input plus an offset.
    Ptr(String, Itv),
    Top,
}

impl AVal {
    pub fn join(&self, o: &AVal) -> AVal {
        match (self, o) {
            (AVal::Bot, x) | (x, AVal::Bot) => x.clone(),
            (AVal::Num(a), AVal::Num(b)) => {
                let mut j = a.join(b);
                // Words are unsigned.
                if j.lo.as_ref().and_then(Lin::as_const).is_some_and(|c| c < 0) {
                    j.lo = Some(Lin::constant(0));
                }
                AVal::Num(j)
            }
            (AVal::Ptr(p, a), AVal::Ptr(q, b)) if p == q => AVal::Ptr(p.clone(), a.join(b)),
            _ => AVal::Top,
        }
    }

    pub fn widen(&self, next: &AVal) -> AVal {
        match (self, next) {
            (AVal::Num(a), AVal::Num(b)) => AVal::Num(a.widen(b)),
            (AVal::Ptr(p, a), AVal::Ptr(q, b)) if p == q => AVal::Ptr(p.clone(), a.widen(b)),
            (AVal::Bot, x) => x.clone(),
            _ => self.join(next),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n() -> Lin {
        Lin::var("n")
    }

    #[test]
    fn printing() {
        assert_eq!(Lin::constant(16).to_string(), "16");
        assert_eq!(n().to_string(), "n");
        assert_eq!(n().add_const(-16).unwrap().to_string(), "n - 16");
        assert_eq!(
            n().scale(2).unwrap().add_const(3).unwrap().to_string(),
            "2*n + 3"
        );
        assert_eq!(Lin::constant(0).sub(&n()).unwrap().to_string(), "-n");
    }

    #[test]
    fn joins_are_sound_for_nonnegative_symbols() {
        let a = Itv::consts(0, 0);
        let b = Itv::point(n().add_const(-16).unwrap());
        let j = a.join(&b);
        assert_eq!(j.lo, Some(Lin::constant(-16)));
        assert_eq!(j.hi, Some(n()));
        for v in 0..40 {
            for x in [0i128, v - 16] {
                assert!(-16 <= x && x <= v.max(0));
            }
        }
    }

    #[test]
    fn widening_and_capping() {
        let a = Itv::consts(0, 16);
        let b = Itv::consts(0, 32);
        let mut w = a.widen(&b);
        assert_eq!(
            w,
            Itv {
                lo: Some(Lin::constant(0)),
                hi: None
            }
        );
        w.cap_hi(n().add_const(-1));
        assert_eq!(w.hi, n().add_const(-1));
        w.cap_hi(Some(n()));
        assert_eq!(w.hi, n().add_const(-1));
    }

    #[test]
    fn emptiness() {
        assert!(Itv::consts(3, 2).is_empty());
        assert!(!Itv::consts(2, 2).is_empty());
        let x = Itv {
            lo: n().add_const(1),
            hi: Some(n()),
        };
        assert!(x.is_empty());
    }
}
