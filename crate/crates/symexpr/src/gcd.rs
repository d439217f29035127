//! Multivariate polynomial gcd by recursive primitive remainder sequences.
//!
//! A modular image first bounds the gcd degree in the main variable; most
//! calls in practice are between coprime inputs and stop there.

use crate::modp;
use crate::poly::Poly;
use crate::rational::Q;
use crate::sym::Sym;

/// Normalized gcd: a primitive integer polynomial with positive leading
/// coefficient (or zero if both inputs are zero).
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.primitive_part();
    }
    if b.is_zero() {
        return a.primitive_part();
    }
    let ma = a.monomial_content();
    let mb = b.monomial_content();
    let m = ma.gcd(&mb);
    let a = a.div_mono(&ma).primitive_part();
    let b = b.div_mono(&mb).primitive_part();
    let g = gcd_nomono(&a, &b);
    g.mul_term(&m, &Q::one())
}

/// Gcd of a list; stops early on a unit.
pub fn gcd_many<'a>(ps: impl IntoIterator<Item = &'a Poly>) -> Poly {
    let mut g = Poly::zero();
    for p in ps {
        g = gcd(&g, p);
        if g.is_one() {
            break;
        }
    }
    g
}

// both inputs primitive, free of monomial content
fn gcd_nomono(a: &Poly, b: &Poly) -> Poly {
    if a.is_constant() || b.is_constant() {
        return Poly::one();
    }
    if a == b {
        return a.clone();
    }
    let va = a.vars();
    let vb = b.vars();
    // a variable present in only one argument can be eliminated through content
    if let Some(&s) = va.iter().find(|s| !vb.contains(s)) {
        let c = content_in(a, s);
        return gcd(&c, b);
    }
    if let Some(&s) = vb.iter().find(|s| !va.contains(s)) {
        let c = content_in(b, s);
        return gcd(a, &c);
    }
    // common variables only; choose the one with the smallest degree
    let x = *va
        .iter()
        .min_by_key(|&&s| (a.degree_in(s).max(b.degree_in(s)), s.id()))
        .unwrap();
    if modular_coprime(a, b, x) {
        // gcd has degree 0 in x; any common factor then lives in the x-contents
        let ca = content_in(a, x);
        let cb = content_in(b, x);
        return gcd(&ca, &cb);
    }
    let ca = content_in(a, x);
    let cb = content_in(b, x);
    let c = gcd(&ca, &cb);
    let pa = a.div_exact(&ca).expect("content divides");
    let pb = b.div_exact(&cb).expect("content divides");
    // try the cheap candidates first
    if pa.div_exact(&pb).is_some() {
        return normalize(pb.mul(&c));
    }
    if pb.div_exact(&pa).is_some() {
        return normalize(pa.mul(&c));
    }
    let g = prs(&pa, &pb, x);
    normalize(g.mul(&c))
}

fn normalize(p: Poly) -> Poly {
    p.primitive_part()
}

/// Gcd of the coefficients of `p` viewed as a polynomial in `s`.
pub fn content_in(p: &Poly, s: Sym) -> Poly {
    let mut cs: Vec<Poly> = p.coeffs_in(s).into_iter().filter(|c| !c.is_zero()).collect();
    cs.sort_by_key(|c| c.len());
    gcd_many(cs.iter())
}

/// `true` when a modular image certifies that the gcd has degree 0 in `x`.
fn modular_coprime(a: &Poly, b: &Poly, x: Sym) -> bool {
    let da = a.degree_in(x) as usize;
    let db = b.degree_in(x) as usize;
    for salt in [11u64, 12, 13] {
        let p = modp::PRIME;
        let (Some(ia), Some(ib)) = (a.univariate_image(x, salt, p), b.univariate_image(x, salt, p)) else {
            continue;
        };
        // leading coefficients must survive for the image degree bound to hold
        if ia.len() != da + 1 || ia[da] == 0 || ib.len() != db + 1 || ib[db] == 0 {
            continue;
        }
        return modp::gcd_degree(&ia, &ib, p) == Some(0);
    }
    false
}

/// Primitive pseudo-remainder sequence in `x`; inputs primitive in `x`.
fn prs(a: &Poly, b: &Poly, x: Sym) -> Poly {
    let mut f = a.coeffs_in(x);
    let mut g = b.coeffs_in(x);
    trim(&mut f);
    trim(&mut g);
    if f.len() < g.len() {
        std::mem::swap(&mut f, &mut g);
    }
    while !g.is_empty() {
        if g.len() == 1 {
            // nonzero constant in x: gcd is free of x, and inputs are primitive
            return Poly::one();
        }
        let r = prem(&f, &g);
        f = g;
        g = primitive_coeffs(r);
    }
    let p = Poly::from_coeffs_in(x, &f);
    let c = content_in(&p, x);
    p.div_exact(&c).expect("content divides")
}

fn trim(v: &mut Vec<Poly>) {
    while v.last().is_some_and(|c| c.is_zero()) {
        v.pop();
    }
}

fn prem(f: &[Poly], g: &[Poly]) -> Vec<Poly> {
    let mut r: Vec<Poly> = f.to_vec();
    let dg = g.len() - 1;
    let lg = g[dg].clone();
    while r.len() > dg && !r.is_empty() {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        let shift = dr - dg;
        for c in r.iter_mut() {
            *c = c.mul(&lg);
        }
        for (i, gc) in g.iter().enumerate() {
            r[shift + i] = r[shift + i].sub(&gc.mul(&lr));
        }
        trim(&mut r);
    }
    r
}

fn primitive_coeffs(mut r: Vec<Poly>) -> Vec<Poly> {
    trim(&mut r);
    if r.is_empty() {
        return r;
    }
    let mut sorted: Vec<&Poly> = r.iter().collect();
    sorted.sort_by_key(|c| c.len());
    let c = gcd_many(sorted);
    // keep rational content out as well
    let lead_sign = if r.last().unwrap().lc().signum() < 0 { -1 } else { 1 };
    r.into_iter()
        .map(|p| {
            let q = p.div_exact(&c).expect("content divides");
            if lead_sign < 0 {
                q.neg()
            } else {
                q
            }
        })
        .collect()
}
