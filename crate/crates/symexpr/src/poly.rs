//! Sparse distributed polynomials with rational coefficients.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed};

use crate::modp;
use crate::mono::Mono;
use crate::rational::{content_gcd, Q};
use crate::sym::Sym;

/// A polynomial as a list of `(monomial, coefficient)` pairs sorted by
/// descending graded lexicographic order, with no zero coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    terms: Vec<(Mono, Q)>,
}

/// Deterministic pseudo-random residue attached to a symbol, used by the
/// modular filters so that repeated checks see the same evaluation point.
pub(crate) fn sym_residue(s: Sym, salt: u64, p: u64) -> u64 {
    let mut z = (s.id() as u64) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z % p
}

fn merge(a: Vec<(Mono, Q)>, b: Vec<(Mono, Q)>) -> Vec<(Mono, Q)> {
    if a.is_empty() {
        return b;
    }
    if b.is_empty() {
        return a;
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut ia = a.into_iter().peekable();
    let mut ib = b.into_iter().peekable();
    loop {
        let ord = match (ia.peek(), ib.peek()) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Greater,
            (None, Some(_)) => Ordering::Less,
            (None, None) => break,
        };
        match ord {
            Ordering::Greater => out.push(ia.next().unwrap()),
            Ordering::Less => out.push(ib.next().unwrap()),
            Ordering::Equal => {
                let (m, c) = ia.next().unwrap();
                let (_, d) = ib.next().unwrap();
                let s = c + d;
                if !s.is_zero() {
                    out.push((m, s));
                }
            }
        }
    }
    out
}

fn merge_all(mut parts: Vec<Vec<(Mono, Q)>>) -> Vec<(Mono, Q)> {
    if parts.is_empty() {
        return Vec::new();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().unwrap()
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { terms: Vec::new() }
    }

    pub fn one() -> Poly {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(Mono::one(), c)] }
        }
    }

    pub fn var(s: Sym) -> Poly {
        Poly { terms: vec![(Mono::var(s), Q::one())] }
    }

    pub fn monomial(m: Mono, c: Q) -> Poly {
        if c.is_zero() {
            Poly::zero()
        } else {
            Poly { terms: vec![(m, c)] }
        }
    }

    /// Builds a polynomial from arbitrary terms, combining duplicates.
    pub fn from_terms(mut terms: Vec<(Mono, Q)>) -> Poly {
        terms.sort_by(|a, b| b.0.cmp(&a.0));
        let mut out: Vec<(Mono, Q)> = Vec::with_capacity(terms.len());
        for (m, c) in terms {
            match out.last_mut() {
                Some((lm, lc)) if *lm == m => *lc = &*lc + &c,
                _ => out.push((m, c)),
            }
        }
        out.retain(|(_, c)| !c.is_zero());
        Poly { terms: out }
    }

    pub fn terms(&self) -> &[(Mono, Q)] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<(Mono, Q)> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].0.is_one())
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0.is_one() && self.terms[0].1.is_one()
    }

    /// The value of a constant polynomial.
    pub fn constant_value(&self) -> Option<Q> {
        match self.terms.as_slice() {
            [] => Some(Q::zero()),
            [(m, c)] if m.is_one() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn leading(&self) -> Option<&(Mono, Q)> {
        self.terms.first()
    }

    pub fn lc(&self) -> Q {
        self.terms.first().map(|t| t.1.clone()).unwrap_or_default()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.first().map(|t| t.0.degree()).unwrap_or(0)
    }

    pub fn degree_in(&self, s: Sym) -> u32 {
        self.terms.iter().map(|(m, _)| m.exp(s)).max().unwrap_or(0)
    }

    /// Sorted, deduplicated list of the variables that occur.
    pub fn vars(&self) -> Vec<Sym> {
        let mut v: Vec<Sym> = self.terms.iter().flat_map(|(m, _)| m.vars().iter().map(|&(s, _)| s)).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn contains_var(&self, s: Sym) -> bool {
        self.terms.iter().any(|(m, _)| m.exp(s) > 0)
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn add(&self, o: &Poly) -> Poly {
        Poly { terms: merge(self.terms.clone(), o.terms.clone()) }
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        Poly { terms: merge(self.terms.clone(), o.neg().terms) }
    }

    pub fn add_owned(self, o: Poly) -> Poly {
        Poly { terms: merge(self.terms, o.terms) }
    }

    pub fn scale(&self, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        if c.is_one() {
            return self.clone();
        }
        Poly { terms: self.terms.iter().map(|(m, d)| (m.clone(), d * c)).collect() }
    }

    /// Multiplication by a single term; order is preserved so no sort is needed.
    pub fn mul_term(&self, m: &Mono, c: &Q) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(n, d)| (n.mul(m), d * c)).collect(),
        }
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let (small, big) = if self.len() <= o.len() { (self, o) } else { (o, self) };
        if small.len() == 1 {
            let (m, c) = &small.terms[0];
            return big.mul_term(m, c);
        }
        let parts: Vec<Vec<(Mono, Q)>> = small.terms.iter().map(|(m, c)| big.mul_term(m, c).terms).collect();
        Poly { terms: merge_all(parts) }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut result = Poly::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn diff(&self, s: Sym) -> Poly {
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            if let Some((e, rest)) = m.diff(s) {
                terms.push((rest, c * &Q::from_i64(e as i64)));
            }
        }
        // differentiation does not preserve the order in general
        Poly::from_terms(terms)
    }

    /// Applies the derivation `s ↦ image(s)` extended by the Leibniz rule.
    pub fn derive_with(&self, image: &dyn Fn(Sym) -> Option<Poly>) -> Poly {
        let mut cache: HashMap<Sym, Option<Poly>> = HashMap::new();
        let mut parts: Vec<Vec<(Mono, Q)>> = Vec::new();
        let mut loose: Vec<(Mono, Q)> = Vec::new();
        for (m, c) in &self.terms {
            for &(s, _) in m.vars() {
                let img = cache.entry(s).or_insert_with(|| image(s).filter(|p| !p.is_zero()));
                let Some(img) = img else { continue };
                let (e, rest) = m.diff(s).unwrap();
                let coef = c * &Q::from_i64(e as i64);
                if img.len() == 1 {
                    let (im, ic) = &img.terms[0];
                    loose.push((rest.mul(im), &coef * ic));
                } else {
                    parts.push(img.mul_term(&rest, &coef).terms);
                }
            }
        }
        if !loose.is_empty() {
            parts.push(Poly::from_terms(loose).terms);
        }
        Poly { terms: merge_all(parts) }
    }

    /// Drops every term containing a variable for which `kill` returns true,
    /// i.e. substitutes zero for those variables.
    pub fn kill_vars(&self, kill: &dyn Fn(Sym) -> bool) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| !m.vars().iter().any(|&(s, _)| kill(s)))
                .cloned()
                .collect(),
        }
    }

    /// Coefficients with respect to `s`: `self = Σ out[i] s^i`.
    pub fn coeffs_in(&self, s: Sym) -> Vec<Poly> {
        let d = self.degree_in(s) as usize;
        let mut buckets: Vec<Vec<(Mono, Q)>> = vec![Vec::new(); d + 1];
        for (m, c) in &self.terms {
            let (e, rest) = m.split_var(s);
            buckets[e as usize].push((rest, c.clone()));
        }
        // removing one variable keeps each bucket sorted
        buckets.into_iter().map(|terms| Poly { terms }).collect()
    }

    pub fn from_coeffs_in(s: Sym, coeffs: &[Poly]) -> Poly {
        let parts = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| c.mul_term(&Mono::var_pow(s, i as u32), &Q::one()).terms)
            .collect();
        Poly { terms: merge_all(parts) }
    }

    /// Rational content: gcd of numerators over lcm of denominators, with the
    /// sign of the leading coefficient.
    pub fn content(&self) -> Q {
        let mut g = Q::zero();
        for (_, c) in &self.terms {
            g = content_gcd(&g, c);
            if g.is_one() {
                break;
            }
        }
        if self.lc().signum() < 0 {
            -g
        } else {
            g
        }
    }

    /// Primitive integer polynomial with positive leading coefficient, and the
    /// factor `c` such that `self = c * primitive`.
    pub fn primitive(&self) -> (Q, Poly) {
        if self.is_zero() {
            return (Q::zero(), Poly::zero());
        }
        let c = self.content();
        (c.clone(), self.scale(&c.recip()))
    }

    /// Monic-free normalization used for denominators: primitive with positive lc.
    pub fn primitive_part(&self) -> Poly {
        self.primitive().1
    }

    /// Greatest monomial dividing every term.
    pub fn monomial_content(&self) -> Mono {
        let mut it = self.terms.iter();
        let Some((first, _)) = it.next() else { return Mono::one() };
        let mut g = first.clone();
        for (m, _) in it {
            if g.is_one() {
                break;
            }
            g = g.gcd(m);
        }
        g
    }

    /// Exact division by a monomial that divides every term.
    pub fn div_mono(&self, m: &Mono) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(n, c)| (m.div_into(n).expect("monomial does not divide"), c.clone()))
                .collect(),
        }
    }

    /// Univariate image in `s` modulo `p`, every other variable replaced by its
    /// deterministic residue. `None` if a coefficient denominator vanishes mod `p`.
    pub fn univariate_image(&self, s: Sym, salt: u64, p: u64) -> Option<Vec<u64>> {
        let d = self.degree_in(s) as usize;
        let mut out = vec![0u64; d + 1];
        let mut cache: HashMap<Sym, u64> = HashMap::new();
        for (m, c) in &self.terms {
            let mut v = c.mod_p(p)?;
            let mut e_s = 0;
            for &(t, e) in m.vars() {
                if t == s {
                    e_s = e;
                } else {
                    let r = *cache.entry(t).or_insert_with(|| sym_residue(t, salt, p));
                    v = modp::mul(v, modp::pow(r, e as u64, p), p);
                }
            }
            out[e_s as usize] = modp::add(out[e_s as usize], v, p);
        }
        Some(out)
    }

    /// Value modulo `p` with every variable at its deterministic residue.
    pub fn eval_residue(&self, salt: u64, p: u64) -> Option<u64> {
        let mut cache: HashMap<Sym, u64> = HashMap::new();
        let mut acc = 0u64;
        for (m, c) in &self.terms {
            let mut v = c.mod_p(p)?;
            for &(t, e) in m.vars() {
                let r = *cache.entry(t).or_insert_with(|| sym_residue(t, salt, p));
                v = modp::mul(v, modp::pow(r, e as u64, p), p);
            }
            acc = modp::add(acc, v, p);
        }
        Some(acc)
    }

    /// Cheap certificate that `d` does not divide `self`. Returning `false`
    /// means "possibly divides".
    pub fn certainly_not_divisible_by(&self, d: &Poly) -> bool {
        if d.is_constant() {
            return false;
        }
        if self.is_zero() {
            return false;
        }
        if d.total_degree() > self.total_degree() {
            return true;
        }
        let dv = d.vars();
        for &s in &dv {
            if d.degree_in(s) > self.degree_in(s) {
                return true;
            }
        }
        let mc = self.monomial_content();
        if !d.monomial_content().divides(&mc) {
            return true;
        }
        // univariate images in the variable of d with the fewest... any variable works
        let s = dv[0];
        for salt in [1u64, 2] {
            let p = modp::PRIME;
            let (Some(a), Some(b)) = (self.univariate_image(s, salt, p), d.univariate_image(s, salt, p)) else {
                continue;
            };
            if b.iter().all(|&x| x == 0) {
                continue;
            }
            let r = modp::rem(&a, &b, p);
            if !r.is_empty() {
                return true;
            }
            if b.len() - 1 == d.degree_in(s) as usize {
                break;
            }
        }
        false
    }

    /// Exact quotient `self / d` if `d` divides `self`, otherwise `None`.
    pub fn div_exact(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        if d.len() == 1 {
            let (m, c) = &d.terms[0];
            let ci = c.recip();
            let mut terms = Vec::with_capacity(self.len());
            for (n, e) in &self.terms {
                terms.push((m.div_into(n)?, e * &ci));
            }
            return Some(Poly { terms });
        }
        if self.certainly_not_divisible_by(d) {
            return None;
        }
        self.div_exact_unchecked(d)
    }

    fn div_exact_unchecked(&self, d: &Poly) -> Option<Poly> {
        let (lm, lc) = d.terms[0].clone();
        let lci = lc.recip();
        let mut rem: BTreeMap<Mono, Q> = self.terms.iter().cloned().collect();
        let mut quot: Vec<(Mono, Q)> = Vec::new();
        while let Some((m, c)) = rem.pop_last() {
            let qm = lm.div_into(&m)?;
            let qc = &c * &lci;
            for (dm, dc) in &d.terms[1..] {
                let pm = dm.mul(&qm);
                let delta = &qc * dc;
                match rem.get_mut(&pm) {
                    Some(v) => {
                        *v = &*v - &delta;
                        if v.is_zero() {
                            rem.remove(&pm);
                        }
                    }
                    None => {
                        rem.insert(pm, -delta);
                    }
                }
            }
            quot.push((qm, qc));
        }
        Some(Poly { terms: quot })
    }

    /// Evaluation at exact rationals; `None` if a variable has no value.
    pub fn eval_q(&self, val: &dyn Fn(Sym) -> Option<Q>) -> Option<Q> {
        let mut cache: HashMap<Sym, Q> = HashMap::new();
        let mut acc = Q::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for &(s, e) in m.vars() {
                let v = match cache.get(&s) {
                    Some(v) => v.clone(),
                    None => {
                        let v = val(s)?;
                        cache.insert(s, v.clone());
                        v
                    }
                };
                t = &t * &v.pow(e as i32);
            }
            acc = &acc + &t;
        }
        Some(acc)
    }

    pub fn eval_f64(&self, val: &dyn Fn(Sym) -> Option<f64>) -> Option<f64> {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = c.to_f64();
            for &(s, e) in m.vars() {
                t *= val(s)?.powi(e as i32);
            }
            acc += t;
        }
        Some(acc)
    }

    /// Replaces the variables for which `val` returns a value, keeping the rest symbolic.
    pub fn partial_eval(&self, val: &dyn Fn(Sym) -> Option<Q>) -> Poly {
        let mut cache: HashMap<Sym, Option<Q>> = HashMap::new();
        let mut terms = Vec::with_capacity(self.len());
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            let mut keep: Vec<(Sym, u32)> = Vec::new();
            for &(s, e) in m.vars() {
                match cache.entry(s).or_insert_with(|| val(s)) {
                    Some(v) => coef = &coef * &v.pow(e as i32),
                    None => keep.push((s, e)),
                }
            }
            if !coef.is_zero() {
                terms.push((Mono::from_pairs(&keep), coef));
            }
        }
        Poly::from_terms(terms)
    }

    /// Simultaneous polynomial substitution of the variables in `map`.
    pub fn substitute(&self, map: &HashMap<Sym, Poly>) -> Poly {
        if map.is_empty() {
            return self.clone();
        }
        let mut powers: HashMap<(Sym, u32), Poly> = HashMap::new();
        let mut groups: BTreeMap<Mono, Vec<(Mono, Q)>> = BTreeMap::new();
        for (m, c) in &self.terms {
            let mut sub: Vec<(Sym, u32)> = Vec::new();
            let mut keep: Vec<(Sym, u32)> = Vec::new();
            for &(s, e) in m.vars() {
                if map.contains_key(&s) {
                    sub.push((s, e));
                } else {
                    keep.push((s, e));
                }
            }
            groups.entry(Mono::from_pairs(&sub)).or_default().push((Mono::from_pairs(&keep), c.clone()));
        }
        let mut parts = Vec::new();
        for (sm, rest) in groups {
            let mut factor = Poly::from_terms(rest);
            for &(s, e) in sm.vars() {
                let pw = powers.entry((s, e)).or_insert_with(|| map[&s].pow(e)).clone();
                factor = factor.mul(&pw);
                if factor.is_zero() {
                    break;
                }
            }
            parts.push(factor.terms);
        }
        Poly { terms: merge_all(parts) }
    }

    /// Clears denominators: returns `(n, p)` with integer polynomial `p` and
    /// `self = p / n`, `n` a positive integer.
    pub fn integer_form(&self) -> (BigInt, Vec<(Mono, BigInt)>) {
        let mut l = BigInt::one();
        for (_, c) in &self.terms {
            let d = c.denom();
            if !d.is_one() {
                l = l.lcm(&d);
            }
        }
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), c.numer() * (&l / c.denom())))
            .collect();
        (l, terms)
    }

    /// Sum of absolute values of the coefficients' numerators, a size measure.
    pub fn height_bits(&self) -> u64 {
        self.terms
            .iter()
            .map(|(_, c)| c.numer().abs().bits() + c.denom().bits())
            .max()
            .unwrap_or(0)
    }

    fn fmt_terms(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.signum() < 0;
            let a = c.abs();
            if i == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            if m.is_one() {
                write!(f, "{a}")?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a}*{m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_terms(f)
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_terms(f)
    }
}

impl From<Q> for Poly {
    fn from(c: Q) -> Poly {
        Poly::constant(c)
    }
}

impl From<Sym> for Poly {
    fn from(s: Sym) -> Poly {
        Poly::var(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Poly {
        Poly::var(Sym::named(n))
    }

    #[test]
    fn expansion() {
        let u = v("pu");
        let w = v("pw");
        let a = u.add(&Poly::one());
        let b = u.sub(&Poly::one());
        assert_eq!(a.mul(&b), u.mul(&u).sub(&Poly::one()));
        let s = u.add(&w);
        let lhs = s.pow(3);
        let rhs = s.mul(&s).mul(&s);
        assert_eq!(lhs, rhs);
        assert_eq!(lhs.len(), 4);
    }

    #[test]
    fn exact_division() {
        let u = v("pu");
        let w = v("pw");
        let num = u.mul(&u).sub(&w.mul(&w));
        let den = u.sub(&w);
        assert_eq!(num.div_exact(&den).unwrap(), u.add(&w));
        assert!(num.div_exact(&u.add(&Poly::one())).is_none());
        assert!(u.div_exact(&w).is_none());
    }

    #[test]
    fn derivative_and_coefficients() {
        let u = v("pu");
        let w = v("pw");
        let p = u.mul(&u).mul(&w).add(&w.scale(&Q::from_i64(3)));
        let su = Sym::named("pu");
        assert_eq!(p.diff(su), u.mul(&w).scale(&Q::from_i64(2)));
        let cs = p.coeffs_in(su);
        assert_eq!(cs.len(), 3);
        assert_eq!(Poly::from_coeffs_in(su, &cs), p);
    }

    #[test]
    fn content_and_primitive() {
        let u = v("pu");
        let p = u.scale(&Q::new(-4, 3)).add(&Poly::constant(Q::new(2, 9)));
        let (c, pp) = p.primitive();
        assert_eq!(c, Q::new(-2, 9));
        assert_eq!(pp, u.scale(&Q::from_i64(6)).sub(&Poly::one()));
    }

    #[test]
    fn substitution() {
        let u = v("pu");
        let w = v("pw");
        let mut map = HashMap::new();
        map.insert(Sym::named("pu"), w.clone());
        assert_eq!(u.add(&w).substitute(&map), w.scale(&Q::from_i64(2)));
    }
}
