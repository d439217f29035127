//! Sparse monomials under graded lexicographic order.

use std::cmp::Ordering;
use std::fmt;

use smallvec::SmallVec;

use crate::sym::Sym;

/// A power product `x1^e1 * x2^e2 * ...` with variables sorted by id.
///
/// Ordering is graded lexicographic: total degree first, then the exponent of
/// the smallest variable id, and so on.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Mono {
    deg: u32,
    vars: SmallVec<[(Sym, u32); 4]>,
}

impl Mono {
    pub fn one() -> Mono {
        Mono::default()
    }

    pub fn var(s: Sym) -> Mono {
        Mono::var_pow(s, 1)
    }

    pub fn var_pow(s: Sym, e: u32) -> Mono {
        if e == 0 {
            return Mono::one();
        }
        let mut vars = SmallVec::new();
        vars.push((s, e));
        Mono { deg: e, vars }
    }

    /// Builds a monomial from unsorted `(var, exp)` pairs, merging duplicates.
    pub fn from_pairs(pairs: &[(Sym, u32)]) -> Mono {
        let mut v: Vec<(Sym, u32)> = pairs.iter().copied().filter(|&(_, e)| e > 0).collect();
        v.sort_by_key(|&(s, _)| s);
        let mut vars: SmallVec<[(Sym, u32); 4]> = SmallVec::new();
        for (s, e) in v {
            match vars.last_mut() {
                Some((t, f)) if *t == s => *f += e,
                _ => vars.push((s, e)),
            }
        }
        let deg = vars.iter().map(|&(_, e)| e).sum();
        Mono { deg, vars }
    }

    pub fn degree(&self) -> u32 {
        self.deg
    }

    pub fn is_one(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn vars(&self) -> &[(Sym, u32)] {
        &self.vars
    }

    pub fn exp(&self, s: Sym) -> u32 {
        match self.vars.binary_search_by_key(&s, |&(t, _)| t) {
            Ok(i) => self.vars[i].1,
            Err(_) => 0,
        }
    }

    pub fn mul(&self, o: &Mono) -> Mono {
        if self.vars.is_empty() {
            return o.clone();
        }
        if o.vars.is_empty() {
            return self.clone();
        }
        let mut vars: SmallVec<[(Sym, u32); 4]> = SmallVec::with_capacity(self.vars.len() + o.vars.len());
        let (mut i, mut j) = (0, 0);
        while i < self.vars.len() && j < o.vars.len() {
            let (a, ea) = self.vars[i];
            let (b, eb) = o.vars[j];
            match a.cmp(&b) {
                Ordering::Less => {
                    vars.push((a, ea));
                    i += 1;
                }
                Ordering::Greater => {
                    vars.push((b, eb));
                    j += 1;
                }
                Ordering::Equal => {
                    vars.push((a, ea + eb));
                    i += 1;
                    j += 1;
                }
            }
        }
        vars.extend_from_slice(&self.vars[i..]);
        vars.extend_from_slice(&o.vars[j..]);
        Mono { deg: self.deg + o.deg, vars }
    }

    pub fn divides(&self, o: &Mono) -> bool {
        if self.deg > o.deg {
            return false;
        }
        let mut j = 0;
        for &(s, e) in &self.vars {
            while j < o.vars.len() && o.vars[j].0 < s {
                j += 1;
            }
            if j == o.vars.len() || o.vars[j].0 != s || o.vars[j].1 < e {
                return false;
            }
        }
        true
    }

    /// `o / self` when `self` divides `o`.
    pub fn div_into(&self, o: &Mono) -> Option<Mono> {
        if !self.divides(o) {
            return None;
        }
        let mut vars: SmallVec<[(Sym, u32); 4]> = SmallVec::new();
        let mut i = 0;
        for &(s, e) in &o.vars {
            while i < self.vars.len() && self.vars[i].0 < s {
                i += 1;
            }
            let d = if i < self.vars.len() && self.vars[i].0 == s { self.vars[i].1 } else { 0 };
            if e > d {
                vars.push((s, e - d));
            }
        }
        Some(Mono { deg: o.deg - self.deg, vars })
    }

    /// Componentwise minimum.
    pub fn gcd(&self, o: &Mono) -> Mono {
        let mut vars: SmallVec<[(Sym, u32); 4]> = SmallVec::new();
        let mut j = 0;
        for &(s, e) in &self.vars {
            while j < o.vars.len() && o.vars[j].0 < s {
                j += 1;
            }
            if j < o.vars.len() && o.vars[j].0 == s {
                vars.push((s, e.min(o.vars[j].1)));
            }
        }
        let deg = vars.iter().map(|&(_, e)| e).sum();
        Mono { deg, vars }
    }

    /// Derivative exponent bookkeeping: returns `(e, m / s)` where `e` is the exponent of `s`.
    pub fn diff(&self, s: Sym) -> Option<(u32, Mono)> {
        let i = self.vars.binary_search_by_key(&s, |&(t, _)| t).ok()?;
        let e = self.vars[i].1;
        let mut vars = self.vars.clone();
        if e == 1 {
            vars.remove(i);
        } else {
            vars[i].1 -= 1;
        }
        Some((e, Mono { deg: self.deg - 1, vars }))
    }

    /// Removes the variable `s` entirely, returning its exponent and the rest.
    pub fn split_var(&self, s: Sym) -> (u32, Mono) {
        match self.vars.binary_search_by_key(&s, |&(t, _)| t) {
            Ok(i) => {
                let e = self.vars[i].1;
                let mut vars = self.vars.clone();
                vars.remove(i);
                (e, Mono { deg: self.deg - e, vars })
            }
            Err(_) => (0, self.clone()),
        }
    }
}

impl Ord for Mono {
    fn cmp(&self, o: &Mono) -> Ordering {
        match self.deg.cmp(&o.deg) {
            Ordering::Equal => {}
            c => return c,
        }
        for (a, b) in self.vars.iter().zip(o.vars.iter()) {
            if a.0 != b.0 {
                // smaller id is the more significant variable
                return if a.0 < b.0 { Ordering::Greater } else { Ordering::Less };
            }
            if a.1 != b.1 {
                return a.1.cmp(&b.1);
            }
        }
        self.vars.len().cmp(&o.vars.len())
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, o: &Mono) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.vars.is_empty() {
            return f.write_str("1");
        }
        for (i, &(s, e)) in self.vars.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            if e == 1 {
                write!(f, "{s}")?;
            } else {
                write!(f, "{s}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Mono {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grlex_order() {
        let x = Sym::named("mono_x");
        let y = Sym::named("mono_y");
        let (x, y) = if x < y { (x, y) } else { (y, x) };
        let x2 = Mono::var_pow(x, 2);
        let xy = Mono::from_pairs(&[(x, 1), (y, 1)]);
        let y2 = Mono::var_pow(y, 2);
        let x1 = Mono::var(x);
        assert!(x2 > xy && xy > y2 && y2 > x1);
        assert!(Mono::var(y) < x1);
        assert!(Mono::one() < Mono::var(y));
    }

    #[test]
    fn division_and_gcd() {
        let x = Sym::named("mono_x");
        let y = Sym::named("mono_y");
        let a = Mono::from_pairs(&[(x, 2), (y, 1)]);
        let b = Mono::from_pairs(&[(x, 1)]);
        assert_eq!(b.div_into(&a).unwrap(), Mono::from_pairs(&[(x, 1), (y, 1)]));
        assert!(a.div_into(&b).is_none());
        assert_eq!(a.gcd(&Mono::from_pairs(&[(x, 5)])), Mono::var_pow(x, 2));
        assert_eq!(a.mul(&b), Mono::from_pairs(&[(x, 3), (y, 1)]));
    }
}
