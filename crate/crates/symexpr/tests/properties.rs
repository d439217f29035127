use std::collections::HashMap;

use proptest::prelude::*;
use symexpr::{parse, Expr, Poly, Q, Sym};

const VARS: [&str; 4] = ["pa", "pb", "pc", "pd"];

fn sym(i: usize) -> Sym {
    Sym::named(VARS[i])
}

fn arb_poly() -> impl Strategy<Value = Poly> {
    let term = (-5i64..=5, 1i64..=3, proptest::collection::vec(0u32..=2, 4));
    proptest::collection::vec(term, 0..5).prop_map(|ts| {
        let mut p = Poly::zero();
        for (n, d, exps) in ts {
            let mut t = Poly::constant(Q::new(n, d));
            for (i, e) in exps.into_iter().enumerate() {
                t = t.mul(&Poly::var(sym(i)).pow(e));
            }
            p = p.add(&t);
        }
        p
    })
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    (arb_poly(), arb_poly()).prop_map(|(n, d)| {
        let d = d.add(&Poly::var(sym(0)).mul(&Poly::var(sym(3))).add(&Poly::one()));
        Expr::from_poly(n).try_div(&Expr::from_poly(d)).unwrap_or_else(|_| Expr::one())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_axioms(a in arb_expr(), b in arb_expr(), c in arb_expr()) {
        prop_assert_eq!(&(&a + &b) + &c, &a + &(&b + &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn diff_is_a_derivation(a in arb_expr(), b in arb_expr(), i in 0usize..4) {
        let s = sym(i);
        let lhs = (&a * &b).diff(s);
        let rhs = &a.diff(s) * &b + &a * &b.diff(s);
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn normalize_is_idempotent(a in arb_expr(), b in arb_expr()) {
        let e = &a * &b + &a;
        let n1 = e.normalize();
        let n2 = n1.normalize();
        prop_assert_eq!(n1.to_canonical_string(), n2.to_canonical_string());
        prop_assert_eq!(n1.to_canonical_string(), e.to_canonical_string());
    }

    #[test]
    fn canonical_string_round_trips(a in arb_expr()) {
        let s = a.to_canonical_string();
        let back = parse(&s).unwrap();
        prop_assert_eq!(back.to_canonical_string(), s);
    }

    #[test]
    fn eval_commutes_with_substitution(a in arb_expr(), r in arb_poly(), vals in proptest::collection::vec(-7i64..=7, 4)) {
        // substitute pb := r, then evaluate; versus evaluate r first
        let mut map = HashMap::new();
        map.insert(sym(1), Expr::from_poly(r.clone()));
        let point: HashMap<Sym, Q> = (0..4).map(|i| (sym(i), Q::from_i64(vals[i]))).collect();
        let rv = r.eval_q(&|s| point.get(&s).cloned()).unwrap();
        let mut shifted = point.clone();
        shifted.insert(sym(1), rv);
        if let Ok(sub) = a.substitute(&map) {
            let lhs = sub.eval_q(&|s| point.get(&s).cloned());
            let rhs = a.eval_q(&|s| shifted.get(&s).cloned());
            if let (Ok(l), Ok(r)) = (lhs, rhs) {
                prop_assert_eq!(l, r);
            }
        }
    }
}

#[test]
fn zero_tests() {
    let e = parse("(u+v)^2 - u^2 - 2*u*v - v^2").unwrap();
    assert!(e.is_zero());
    assert!(!parse("u - v").unwrap().is_zero());
    assert!(parse("0/(h+1)").unwrap().is_zero());
    let mode = symexpr::ZeroTest::Probabilistic { trials: 4, seed: 7 };
    assert!(e.is_zero_with(mode));
    assert!(!parse("u - v").unwrap().is_zero_with(mode));
}

#[test]
fn substitution_examples() {
    let s = |n: &str| Sym::named(n);
    let mut m = HashMap::new();
    m.insert(s("h"), Expr::one());
    assert_eq!(parse("W_v^2/h").unwrap().substitute(&m).unwrap(), parse("W_v^2").unwrap());
    let mut m = HashMap::new();
    m.insert(s("W_vv"), Expr::zero());
    assert!(parse("1/W_vv").unwrap().substitute(&m).is_err());
    let mut m = HashMap::new();
    m.insert(s("u"), Expr::var(s("v")));
    assert_eq!(parse("u+v").unwrap().substitute(&m).unwrap(), parse("2*v").unwrap());
}
