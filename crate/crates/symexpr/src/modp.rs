//! Word-sized prime field arithmetic and dense univariate polynomials over it.
//!
//! Used only as a filter: modular images give rigorous upper bounds on gcd
//! degrees and rigorous non-divisibility certificates.

/// A 62-bit prime.
pub const PRIME: u64 = 4_611_686_018_427_387_847;
/// A second prime for independent images.
pub const PRIME2: u64 = 4_611_686_018_427_387_817;

#[inline]
pub fn mul(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

#[inline]
pub fn add(a: u64, b: u64, p: u64) -> u64 {
    let s = a as u128 + b as u128;
    (s % p as u128) as u64
}

#[inline]
pub fn sub(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        p - (b - a)
    }
}

pub fn pow(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul(r, a, p);
        }
        a = mul(a, a, p);
        e >>= 1;
    }
    r
}

pub fn inv(a: u64, p: u64) -> u64 {
    debug_assert!(!a.is_multiple_of(p));
    pow(a, p - 2, p)
}

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

/// Remainder of `a` by `b` (coefficients low to high). `b` must be nonzero after trimming.
pub fn rem(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut r = a.to_vec();
    trim(&mut r);
    let mut b = b.to_vec();
    trim(&mut b);
    assert!(!b.is_empty());
    let db = b.len() - 1;
    let lc_inv = inv(b[db], p);
    while r.len() > db {
        let top = r.len() - 1;
        let f = mul(r[top], lc_inv, p);
        let shift = top - db;
        for (i, bc) in b.iter().enumerate() {
            r[shift + i] = sub(r[shift + i], mul(f, *bc, p), p);
        }
        trim(&mut r);
    }
    r
}

/// Degree of `gcd(a, b)`; `None` if both are zero.
pub fn gcd_degree(a: &[u64], b: &[u64], p: u64) -> Option<usize> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    trim(&mut x);
    trim(&mut y);
    if x.is_empty() && y.is_empty() {
        return None;
    }
    while !y.is_empty() {
        let r = rem(&x, &y, p);
        x = y;
        y = r;
    }
    Some(x.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gcd_degree_of_shared_factor() {
        let p = PRIME;
        // (x+1)(x+2) and (x+1)(x+3)
        let a = [2, 3, 1];
        let b = [3, 4, 1];
        assert_eq!(gcd_degree(&a, &b, p), Some(1));
        assert_eq!(gcd_degree(&[1, 1], &[2, 1], p), Some(0));
    }

    #[test]
    fn inverse_is_inverse() {
        for p in [PRIME, PRIME2] {
            let a = 123_456_789u64;
            assert_eq!(mul(a, inv(a, p), p), 1);
        }
    }
}
