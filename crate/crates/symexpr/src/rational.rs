//! Arbitrary precision rationals with an inline fast path for machine-sized values.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An exact rational number.
///
/// Values whose numerator and denominator fit in an `i64` are stored inline;
/// everything else spills to a boxed [`BigRational`]. The representation is
/// canonical: a `Big` value never fits the small form, and the small form is
/// always reduced with a positive denominator.
#[derive(Clone)]
pub enum Q {
    Small(i64, i64),
    Big(Box<BigRational>),
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Q {
    pub const ZERO: Q = Q::Small(0, 1);
    pub const ONE: Q = Q::Small(1, 1);

    pub fn zero() -> Q {
        Q::ZERO
    }

    pub fn one() -> Q {
        Q::ONE
    }

    pub fn from_i64(v: i64) -> Q {
        Q::Small(v, 1)
    }

    /// Builds `n/d`. Panics if `d == 0`.
    pub fn new(n: i64, d: i64) -> Q {
        assert!(d != 0, "zero denominator");
        Q::from_i128(n as i128, d as i128)
    }

    fn from_i128(n: i128, d: i128) -> Q {
        debug_assert!(d != 0);
        if n == 0 {
            return Q::ZERO;
        }
        let g = gcd_u128(n.unsigned_abs(), d.unsigned_abs()) as i128;
        let (mut n, mut d) = (n / g, d / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(n), Ok(d)) => Q::Small(n, d),
            _ => Q::Big(Box::new(BigRational::new_raw(BigInt::from(n), BigInt::from(d)))),
        }
    }

    /// Canonicalizes a reduced big rational (demoting to the small form when it fits).
    pub fn from_big(r: BigRational) -> Q {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(n), Some(d)) => Q::Small(n, d),
            _ => Q::Big(Box::new(r)),
        }
    }

    pub fn from_bigint(v: BigInt) -> Q {
        Q::from_big(BigRational::from_integer(v))
    }

    pub fn to_big(&self) -> BigRational {
        match self {
            Q::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Q::Big(b) => (**b).clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match self {
            Q::Small(n, _) => BigInt::from(*n),
            Q::Big(b) => b.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match self {
            Q::Small(_, d) => BigInt::from(*d),
            Q::Big(b) => b.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Q::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Q::Small(1, 1))
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Q::Small(_, d) => *d == 1,
            Q::Big(b) => b.is_integer(),
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Q::Small(n, _) => n.signum() as i32,
            Q::Big(b) => {
                if b.is_negative() {
                    -1
                } else {
                    1
                }
            }
        }
    }

    pub fn abs(&self) -> Q {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Q {
        match self {
            Q::Small(0, _) => panic!("reciprocal of zero"),
            Q::Small(n, d) => Q::from_i128(*d as i128, *n as i128),
            Q::Big(b) => Q::from_big(b.recip()),
        }
    }

    pub fn pow(&self, e: i32) -> Q {
        if e < 0 {
            return self.recip().pow(-e);
        }
        let mut base = self.clone();
        let mut acc = Q::ONE;
        let mut e = e as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Q::Small(n, d) => *n as f64 / *d as f64,
            Q::Big(b) => {
                let n = b.numer();
                let d = b.denom();
                // scale to keep both within f64 range
                let nb = n.bits() as i64;
                let db = d.bits() as i64;
                let shift = (nb.max(db) - 1000).max(0);
                let n = n >> shift as usize;
                let d = d >> shift as usize;
                n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
            }
        }
    }

    /// Exact conversion of a finite binary64 value.
    pub fn from_f64(v: f64) -> Option<Q> {
        BigRational::from_float(v).map(Q::from_big)
    }

    /// Reduction modulo a prime `p < 2^63`; `None` when the denominator vanishes mod `p`.
    pub fn mod_p(&self, p: u64) -> Option<u64> {
        let (n, d) = match self {
            Q::Small(n, d) => {
                let pm = p as i128;
                (((*n as i128) % pm + pm) % pm, (*d as i128) % pm)
            }
            Q::Big(b) => {
                let pb = BigInt::from(p);
                let n = b.numer().mod_floor(&pb).to_i128().unwrap();
                let d = b.denom().mod_floor(&pb).to_i128().unwrap();
                (n, d)
            }
        };
        if d == 0 {
            return None;
        }
        let inv = crate::modp::inv(d as u64, p);
        Some(crate::modp::mul(n as u64, inv, p))
    }

    fn add_ref(&self, o: &Q) -> Q {
        match (self, o) {
            (Q::Small(a, b), Q::Small(c, d)) => {
                if *b == 1 && *d == 1 {
                    return match a.checked_add(*c) {
                        Some(s) => Q::Small(s, 1),
                        None => Q::from_i128(*a as i128 + *c as i128, 1),
                    };
                }
                let n = *a as i128 * *d as i128 + *c as i128 * *b as i128;
                let dd = *b as i128 * *d as i128;
                Q::from_i128(n, dd)
            }
            _ => Q::from_big(self.to_big() + o.to_big()),
        }
    }

    fn mul_ref(&self, o: &Q) -> Q {
        match (self, o) {
            (Q::Small(a, b), Q::Small(c, d)) => {
                if *b == 1 && *d == 1 {
                    return match a.checked_mul(*c) {
                        Some(s) => Q::Small(s, 1),
                        None => Q::from_i128(*a as i128 * *c as i128, 1),
                    };
                }
                Q::from_i128(*a as i128 * *c as i128, *b as i128 * *d as i128)
            }
            _ => Q::from_big(self.to_big() * o.to_big()),
        }
    }

    fn neg_ref(&self) -> Q {
        match self {
            Q::Small(n, d) => match n.checked_neg() {
                Some(m) => Q::Small(m, *d),
                None => Q::from_big(-self.to_big()),
            },
            Q::Big(b) => Q::from_big(-(**b).clone()),
        }
    }
}

impl Default for Q {
    fn default() -> Self {
        Q::ZERO
    }
}

impl From<i64> for Q {
    fn from(v: i64) -> Q {
        Q::Small(v, 1)
    }
}

impl From<i32> for Q {
    fn from(v: i32) -> Q {
        Q::Small(v as i64, 1)
    }
}

impl From<BigInt> for Q {
    fn from(v: BigInt) -> Q {
        Q::from_bigint(v)
    }
}

impl PartialEq for Q {
    fn eq(&self, o: &Q) -> bool {
        match (self, o) {
            (Q::Small(a, b), Q::Small(c, d)) => a == c && b == d,
            (Q::Big(a), Q::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Q {}

impl Hash for Q {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Q::Small(n, d) => {
                0u8.hash(state);
                n.hash(state);
                d.hash(state);
            }
            Q::Big(b) => {
                1u8.hash(state);
                b.hash(state);
            }
        }
    }
}

impl PartialOrd for Q {
    fn partial_cmp(&self, o: &Q) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Q {
    fn cmp(&self, o: &Q) -> Ordering {
        match (self, o) {
            (Q::Small(a, b), Q::Small(c, d)) => (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128)),
            _ => self.to_big().cmp(&o.to_big()),
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl $tr<&Q> for &Q {
            type Output = Q;
            fn $m(self, o: &Q) -> Q {
                self.$imp(o)
            }
        }
        impl $tr<Q> for Q {
            type Output = Q;
            fn $m(self, o: Q) -> Q {
                (&self).$imp(&o)
            }
        }
        impl $tr<&Q> for Q {
            type Output = Q;
            fn $m(self, o: &Q) -> Q {
                (&self).$imp(o)
            }
        }
    };
}

impl Q {
    fn sub_ref(&self, o: &Q) -> Q {
        self.add_ref(&o.neg_ref())
    }
    fn div_ref(&self, o: &Q) -> Q {
        self.mul_ref(&o.recip())
    }
}

forward_binop!(Add, add, add_ref);
forward_binop!(Sub, sub, sub_ref);
forward_binop!(Mul, mul, mul_ref);
forward_binop!(Div, div, div_ref);

impl Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        self.neg_ref()
    }
}

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        self.neg_ref()
    }
}

impl fmt::Display for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Q::Small(n, 1) => write!(f, "{n}"),
            Q::Small(n, d) => write!(f, "{n}/{d}"),
            Q::Big(b) => {
                if b.is_integer() {
                    write!(f, "{}", b.numer())
                } else {
                    write!(f, "{}/{}", b.numer(), b.denom())
                }
            }
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Integer gcd of two rationals' numerators paired with the lcm of their denominators,
/// i.e. the gcd in the sense of `Z`-content.
pub fn content_gcd(a: &Q, b: &Q) -> Q {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    match (a, b) {
        (Q::Small(n1, d1), Q::Small(n2, d2)) => {
            let g = gcd_u128(n1.unsigned_abs() as u128, n2.unsigned_abs() as u128) as i128;
            let l = (*d1 as i128 / gcd_u128(*d1 as u128, *d2 as u128) as i128) * *d2 as i128;
            Q::from_i128(g, l)
        }
        _ => {
            let g = a.numer().gcd(&b.numer());
            let l = a.denom().lcm(&b.denom());
            Q::from_big(BigRational::new(g, l))
        }
    }
}

impl Zero for Q {
    fn zero() -> Q {
        Q::ZERO
    }
    fn is_zero(&self) -> bool {
        Q::is_zero(self)
    }
}

impl One for Q {
    fn one() -> Q {
        Q::ONE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_arithmetic_reduces() {
        let a = Q::new(1, 2);
        let b = Q::new(1, 3);
        assert_eq!(&a + &b, Q::new(5, 6));
        assert_eq!(&a * &b, Q::new(1, 6));
        assert_eq!(&a / &b, Q::new(3, 2));
        assert_eq!(Q::new(2, -4), Q::new(-1, 2));
    }

    #[test]
    fn overflow_promotes_and_demotes() {
        let big = Q::from_i64(i64::MAX);
        let s = &big + &big;
        assert!(matches!(s, Q::Big(_)));
        let back = &s - &big;
        assert_eq!(back, Q::from_i64(i64::MAX));
        assert!(matches!(back, Q::Small(..)));
        let p = big.pow(3);
        assert_eq!(&(&p / &big) / &big, big);
    }

    #[test]
    fn mod_p_respects_inverse() {
        let p = 1_000_000_007u64;
        let q = Q::new(3, 7);
        let r = q.mod_p(p).unwrap();
        assert_eq!(crate::modp::mul(r, 7, p), 3);
    }

    #[test]
    fn content_gcd_of_fractions() {
        assert_eq!(content_gcd(&Q::new(4, 3), &Q::new(6, 5)), Q::new(2, 15));
    }

    #[test]
    fn float_round_trip() {
        let q = Q::from_f64(0.375).unwrap();
        assert_eq!(q, Q::new(3, 8));
        assert_eq!(q.to_f64(), 0.375);
    }
}
