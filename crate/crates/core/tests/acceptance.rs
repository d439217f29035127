//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Set `KUNDT_ACCEPTANCE_SLOW=1` for the opt-in checks (n = 5 ranks, the
//! rank-13 and rank-40 counts). Criteria listed in `KNOWN_FAILURES` fail for
//! reasons recorded in the README; any other failure fails the target.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use kundt_core::appendix::appendix_quotient_check;
use kundt_core::catalog::{self, Class, Method, VerifyOptions};
use kundt_core::curvature::{self, HorizontalDerivation};
use kundt_core::pseudogroup::{self, Generator};
use kundt_core::signature::{self, KundtClass, MetricSection, Verdict};
use kundt_core::{BaseVar, EqKind, EquationSystem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symexpr::{Expr, Q};

const SEED: u64 = 2024;
/// Cloud distance tolerance of criterion 10.
const TOL: f64 = 1e-6;
const KNOWN_FAILURES: &[u32] = &[6];

type Check = Result<String, String>;

fn slow() -> bool {
    std::env::var("KUNDT_ACCEPTANCE_SLOW").is_ok_and(|v| v == "1")
}

fn eq(kind: EqKind, n: usize) -> EquationSystem {
    EquationSystem::new(kind, n).unwrap()
}

fn inv(name: &str, n: usize, class: Class) -> Expr {
    catalog::build(name, n, class).unwrap().function().unwrap().clone()
}

fn der(name: &str, n: usize, class: Class) -> HorizontalDerivation {
    catalog::build(name, n, class).unwrap().derivation().unwrap().clone()
}

/// Collects sub-check failures; the criterion passes when none occurred.
struct Sub {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Sub {
    fn new() -> Sub {
        Sub { failures: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failures.push(what);
        }
    }

    fn done(self) -> Check {
        if self.failures.is_empty() {
            Ok(self.notes.join("; "))
        } else {
            Err(format!("failed: {}; passed: {}", self.failures.join("; "), self.notes.join("; ")))
        }
    }
}

fn budget(sub: &mut Sub, what: &str, t: Duration, limit: Duration) {
    sub.check(t <= limit, format!("{what} {:.1}s <= {}s", t.as_secs_f64(), limit.as_secs()));
}

/// `H_k` by exact rank for `k = 0..=kmax`.
fn ranks(kind: EqKind, n: usize, kmax: u32) -> Vec<i64> {
    pseudogroup::hilbert(&eq(kind, n), kmax, SEED).unwrap().iter().map(|r| r.hilbert).collect()
}

struct Counts {
    e3: Vec<i64>,
    e4: Vec<i64>,
    ed3: Vec<i64>,
    ed4: Vec<i64>,
    e5: Option<Vec<i64>>,
    ed5: Option<Vec<i64>>,
    time: Duration,
}

fn counts() -> Counts {
    let t = Instant::now();
    let (e3, ed3) = (ranks(EqKind::E, 3, 4), ranks(EqKind::ED, 3, 4));
    let (e4, ed4) = (ranks(EqKind::E, 4, 3), ranks(EqKind::ED, 4, 3));
    let time = t.elapsed();
    let (e5, ed5) = if slow() { (Some(ranks(EqKind::E, 5, 2)), Some(ranks(EqKind::ED, 5, 2))) } else { (None, None) };
    Counts { e3, e4, ed3, ed4, e5, ed5, time }
}

fn criterion_1(c: &Counts) -> Check {
    let mut s = Sub::new();
    let closed = |kind, n, k| pseudogroup::hilbert_closed_form(kind, n, k);
    s.check(c.e3[1..] == [1, 4, 13, 22], format!("E n=3 H_1..4 = {:?}", &c.e3[1..]));
    s.check(c.e4[2] == 14, format!("E n=4 H_2 = {}", c.e4[2]));
    s.check(c.ed3[2..] == [3, 9, 13], format!("ED n=3 H_2..4 = {:?}", &c.ed3[2..]));
    s.check(c.ed4[2] == 12, format!("ED n=4 H_2 = {}", c.ed4[2]));
    for (kind, n, h) in [(EqKind::E, 3, &c.e3), (EqKind::ED, 3, &c.ed3), (EqKind::E, 4, &c.e4), (EqKind::ED, 4, &c.ed4)] {
        let all = (1..h.len()).all(|k| h[k] == closed(kind, n, k as u32));
        s.check(all, format!("{kind} n={n} ranks = closed forms"));
    }
    s.check(closed(EqKind::E, 5, 2) == 34 && closed(EqKind::ED, 5, 2) == 31, "n=5 closed forms 34, 31");
    match (&c.e5, &c.ed5) {
        (Some(e5), Some(ed5)) => s.check(e5[2] == 34 && ed5[2] == 31, format!("n=5 ranks {} {}", e5[2], ed5[2])),
        _ => s.notes.push("n=5 ranks skipped (opt-in)".into()),
    }
    budget(&mut s, "n<=4 ranks", c.time, Duration::from_secs(300));
    s.done()
}

fn criterion_2(c: &Counts) -> Check {
    let mut s = Sub::new();
    let cases: [(EqKind, usize, Option<&Vec<i64>>, u32); 6] = [
        (EqKind::E, 3, Some(&c.e3), 4),
        (EqKind::E, 4, Some(&c.e4), 3),
        (EqKind::E, 5, c.e5.as_ref(), 2),
        (EqKind::ED, 3, Some(&c.ed3), 4),
        (EqKind::ED, 4, Some(&c.ed4), 3),
        (EqKind::ED, 5, c.ed5.as_ref(), 2),
    ];
    for (kind, n, h, kmax) in cases {
        let series = pseudogroup::poincare_series(kind, n, kmax).unwrap();
        let target: Vec<i64> = match h {
            Some(h) => h.clone(),
            None => (0..=kmax).map(|k| pseudogroup::hilbert_closed_form(kind, n, k)).collect(),
        };
        let src = if h.is_some() { "ranks" } else { "closed forms" };
        s.check(series == target, format!("P {kind} n={n} = {src} to k={kmax}"));
    }
    s.done()
}

fn criterion_3() -> Check {
    let mut s = Sub::new();
    for n in [3, 4] {
        for k in [2, 3] {
            let e = pseudogroup::orbit_dimension(&eq(EqKind::E, n), k, SEED).unwrap();
            let d = pseudogroup::orbit_dimension(&eq(EqKind::ED, n), k, SEED).unwrap();
            let closed = (n as i64 - 1) * binomial(n as i64 + k as i64, n as i64 - 1) + k as i64 + 2;
            s.check(e.rank as i64 == closed && d.rank as i64 == closed, format!("n={n} k={k}: {} {} vs {closed}", e.rank, d.rank));
        }
        for kind in [EqKind::E, EqKind::ED] {
            let e = eq(kind, n);
            let r = pseudogroup::orbit_dimension(&e, 1, SEED).unwrap();
            s.check(e.dim(1) - r.rank as i64 == 1, format!("{kind} n={n} codim at k=1 = {}", e.dim(1) - r.rank as i64));
        }
    }
    s.done()
}

fn binomial(n: i64, k: i64) -> i64 {
    kundt_core::jets::binomial(n, k)
}

fn criterion_4() -> Check {
    let mut s = Sub::new();
    for n in [3, 4, 5] {
        let got = pseudogroup::stabilizer_dimension_1jet(n, SEED).unwrap();
        let want = binomial(n as i64 - 2, 2) as usize + 2;
        s.check(got == want, format!("n={n}: {got} = {want}"));
    }
    s.done()
}

fn criterion_5() -> Check {
    let mut s = Sub::new();
    let exact = VerifyOptions { symbolic_size_limit: usize::MAX, ..VerifyOptions::default() };
    let suites: [(usize, &[(Class, &[&str])]); 2] = [
        (3, &[(Class::General, &["I1", "J1", "J2", "J3", "nabla3_I1", "K13"]), (Class::Degenerate, &["I2a", "I2b", "I2c"])]),
        (4, &[(Class::General, &["I1", "I2a", "I2b", "S_h"]), (Class::Degenerate, &["I2a", "I2b"])]),
    ];
    for (n, groups) in suites {
        let t = Instant::now();
        for (class, names) in groups {
            for name in *names {
                let entry = catalog::build(name, n, *class).unwrap();
                let r = catalog::verify_invariance_with(&entry, exact).unwrap();
                let ok = r.invariant && r.method == Method::Symbolic;
                s.check(ok, format!("{name} n={n} {class}"));
            }
        }
        budget(&mut s, &format!("n={n} suite"), t.elapsed(), Duration::from_secs(if n == 3 { 600 } else { 3600 }));
    }
    s.done()
}

fn criterion_6() -> Check {
    let mut s = Sub::new();
    let e3 = eq(EqKind::E, 3);
    let (n1, n2, n3) = (der("nabla1", 3, Class::General), der("nabla2", 3, Class::General), der("nabla3", 3, Class::General));
    let i1 = inv("I1", 3, Class::General);
    s.check(n1.bracket(&n2, &e3).add(&n2).normalize().is_zero(), "[nabla1, nabla2] = -nabla2");
    s.check(n2.apply(&e3, &i1).is_zero(), "nabla2(I1) = 0");
    let two_i1 = i1.scale(&Q::from_i64(2));
    s.check(n3.apply(&e3, &i1).sub(&two_i1).is_zero(), "nabla3(I1) = 2 I1");
    // not part of the criterion: the identity holds for nabla1
    let n1_ok = n1.apply(&e3, &i1).sub(&two_i1).is_zero();
    s.notes.push(format!("(nabla1(I1) = 2 I1 holds: {n1_ok})"));
    for class in [Class::General, Class::Degenerate] {
        let r = catalog::coframe_report(class).unwrap();
        let f = r.factor.as_ref().map_or("none".into(), |q| q.to_string());
        s.check(r.matches(), format!("3D {class} coframe pattern (factor {f})"));
    }
    let e4 = eq(EqKind::E, 4);
    let frame = catalog::frame(4, Class::General).unwrap();
    let g = catalog::coframe_metric(&frame, &e4).unwrap();
    let i1 = inv("I1", 4, Class::General);
    let i2a = inv("I2a", 4, Class::General);
    let table = [
        ((1, 1), i2a, "g(n2,n2) = I2a"),
        ((1, 2), Expr::one(), "g(n2,n3) = 1"),
        ((2, 2), i1.clone(), "g(n3,n3) = I1"),
        ((0, 3), i1.scale(&Q::from_i64(2)), "g(n1,n4) = 2 I1"),
        ((2, 3), Expr::zero(), "g(n3,n4) = 0"),
        ((0, 0), Expr::zero(), "g(n1,n1) = 0"),
        ((0, 1), Expr::zero(), "g(n1,n2) = 0"),
        ((0, 2), Expr::zero(), "g(n1,n3) = 0"),
    ];
    for ((i, j), want, what) in table {
        s.check(g[i][j].sub(&want).normalize().is_zero(), what);
    }
    s.done()
}

fn criterion_7() -> Check {
    let mut s = Sub::new();
    let (e3, ed3, e4) = (eq(EqKind::E, 3), eq(EqKind::ED, 3), eq(EqKind::E, 4));
    let g3 = |names: &[&str]| names.iter().map(|n| inv(n, 3, Class::General)).collect::<Vec<_>>();
    let d3 = |names: &[&str]| names.iter().map(|n| inv(n, 3, Class::Degenerate)).collect::<Vec<_>>();
    let r = catalog::jacobian_rank(&g3(&["I1", "J1", "J2", "J3", "nabla3_I1"]), &e3, SEED).unwrap();
    s.check(r == 5, format!("E2 n=3 rank {r} = 5"));
    let r = catalog::jacobian_rank(&d3(&["I1", "I2a", "I2b", "I2c"]), &ed3, SEED).unwrap();
    s.check(r == 4, format!("ED2 n=3 rank {r} = 4"));
    let h = catalog::horizontal_independence(&d3(&["I1", "I2a", "I2c"]), &ed3, SEED).unwrap();
    s.check(h.independent(), "{I1, I2a, I2c} independent");
    let h = catalog::horizontal_independence(&d3(&["I1", "I2a", "I2b"]), &ed3, SEED).unwrap();
    s.check(!h.independent() && h.wedge_identically_zero, "{I1, I2a, I2b} wedge = 0");
    let four: Vec<Expr> = ["I1", "I2a", "I2b", "S_h"].iter().map(|n| inv(n, 4, Class::General)).collect();
    let h = catalog::horizontal_independence(&four, &e4, SEED).unwrap();
    s.check(h.independent(), "{I1, I2a, I2b, S_h} independent on E3 n=4");
    if slow() {
        let frame = catalog::frame(3, Class::General).unwrap();
        let second = g3(&["J1", "J2", "J3", "nabla3_I1"]);
        let mut third: Vec<Expr> = frame.iter().flat_map(|d| second.iter().map(|f| d.apply(&e3, f)).collect::<Vec<_>>()).collect();
        third.push(inv("K13", 3, Class::General));
        let r = catalog::jacobian_rank(&third, &e3, SEED).unwrap();
        s.check(r == 13, format!("order-3 rank {r} = 13"));
        let mut all = g3(&["I1", "J1", "J2", "J3", "nabla3_I1"]);
        all.extend(third.iter().cloned());
        for (i, d) in frame.iter().enumerate() {
            for dj in &frame[i..] {
                all.extend(second.iter().map(|f| d.apply(&e3, &dj.apply(&e3, f))));
            }
            all.push(d.apply(&e3, third.last().unwrap()));
        }
        let r = catalog::jacobian_rank(&all, &e3, SEED).unwrap();
        s.check(r == 40, format!("order-4 rank {r} = 40"));
    } else {
        s.notes.push("rank-13 and rank-40 skipped (opt-in)".into());
    }
    s.done()
}

fn criterion_8() -> Check {
    let mut s = Sub::new();
    let e3 = eq(EqKind::E, 3);
    let mu = pseudogroup::relative_multiplier(&e3.parse("W_vv").unwrap(), &e3).unwrap();
    match mu {
        Some(mu) if !mu.is_zero() => {
            s.check(true, format!("W_vv multiplier {}", mu.to_quick_string()));
            let mut rng = ChaCha8Rng::seed_from_u64(SEED);
            for _ in 0..2 {
                let xi = Generator::random(&e3.setting, 2, &mut rng);
                let eta = Generator::random(&e3.setting, 2, &mut rng);
                s.check(pseudogroup::cocycle_defect(&mu, &xi, &eta, &e3).unwrap().is_zero(), "cocycle identity");
            }
        }
        _ => s.check(false, "W_vv multiplier"),
    }
    let ew = eq(EqKind::EW, 3);
    let mu = pseudogroup::relative_multiplier(&ew.parse("H_vvv").unwrap(), &ew).unwrap();
    s.check(mu.as_ref().is_some_and(|m| !m.is_zero()), format!("H_vvv multiplier on W_vv = 0: {}", mu.map_or("none".into(), |m| m.to_quick_string())));
    let a = appendix_quotient_check(Q::new(3, 2)).unwrap();
    s.check(a.bracket_ok, "[V1, V2] = -V2");
    s.check(a.v2_z4_zero && a.v2_z6_zero, "V2(z4) = V2(z6) = 0");
    s.check(a.v1_z6_zero, "V1(z6) = 0");
    s.check(a.z4_weight == Some(Q::from_i64(-1)), "V1-weight of z4 = -1");
    s.done()
}

fn criterion_9() -> Check {
    let mut s = Sub::new();
    for n in [3, 4] {
        let ed = eq(EqKind::ED, n);
        let (bad, _) = curvature::ricci_block_check(&ed).unwrap();
        s.check(bad.is_empty(), format!("ED n={n} Ricci block zeros"));
        let traces = curvature::spi_traces(&ed, n).unwrap();
        let ok = traces.iter().all(|t| ed.total_derivative(t, BaseVar::V).is_zero());
        s.check(ok, format!("ED n={n} D_v Tr Ric^i = 0, i <= {n}"));
    }
    let c = curvature::kundt_curvature(&eq(EqKind::E, 3)).unwrap();
    s.check(curvature::bianchi_defects(&c.riemann).is_empty(), "first Bianchi n=3");
    s.check(c.geometry.compatibility_defects().is_empty(), "metric compatibility n=3");
    s.done()
}

fn metric(name: &str) -> MetricSection {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../metrics").join(name);
    MetricSection::parse(&std::fs::read_to_string(&p).unwrap()).unwrap()
}

fn criterion_10() -> Check {
    let mut s = Sub::new();
    let t = Instant::now();
    let base = metric("degenerate_3d.kmt");
    let (ma, ca) = signature::sample_section(&base).unwrap();
    for (file, want) in [("degenerate_3d_transformed.kmt", Verdict::EquivalentCandidate), ("degenerate_3d_h2.kmt", Verdict::Distinct)] {
        let other = metric(file);
        let (mb, cb) = signature::sample_section(&other).unwrap();
        let r = signature::compare((&ma, &ca), (&mb, &cb), TOL).unwrap();
        let enough = ca.points.len() >= 200 && cb.points.len() >= 200;
        s.check(r.verdict == want && enough, format!("{file}: {:?} at {:.1e} ({} + {} points)", r.verdict, r.max_distance, ca.points.len(), cb.points.len()));
    }
    let sections = [
        ("n = 3\nH = u*x^2 + x^3\nW = 0\nh = 1", KundtClass::DegenerateKundt),
        ("n = 3\nH = v^2*u\nW = v*x\nh = 1", KundtClass::DegenerateKundt),
        ("n = 3\nH = 0\nW = v^2\nh = 1", KundtClass::GeneralKundt),
    ];
    for (text, want) in sections {
        let got = signature::classify(&MetricSection::parse(text).unwrap());
        s.check(got == want, format!("classify {want}"));
    }
    budget(&mut s, "workflow", t.elapsed(), Duration::from_secs(60));
    s.done()
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and friends
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    println!("acceptance criteria (exact unless a tolerance is shown; criterion 10 tol = {TOL:e})");
    let c = counts();
    let results: Vec<(u32, Check)> = vec![
        (1, criterion_1(&c)),
        (2, criterion_2(&c)),
        (3, criterion_3()),
        (4, criterion_4()),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8()),
        (9, criterion_9()),
        (10, criterion_10()),
    ];
    let mut unexpected = Vec::new();
    for (id, r) in &results {
        match r {
            Ok(detail) => println!("criterion {id:>2}: PASS  {detail}"),
            Err(detail) => {
                let known = KNOWN_FAILURES.contains(id);
                println!("criterion {id:>2}: FAIL  {detail}{}", if known { "  [known, see README]" } else { "" });
                if !known {
                    unexpected.push(*id);
                }
            }
        }
    }
    let passed = results.iter().filter(|r| r.1.is_ok()).count();
    println!("{passed}/{} criteria pass", results.len());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
