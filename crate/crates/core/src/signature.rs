//! Concrete Kundt metrics: pullback of jet functions along a section,
//! degenerate/general classification, sampled signature varieties and their
//! comparison.
//!
//! Pullbacks are exact. Floating point enters only when a pulled-back
//! signature map is evaluated at sample points.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use symexpr::{parse_with, Expr, ExprError, Poly, Sym};

use crate::catalog::{self, Class};
use crate::error::{KundtError, Result};
use crate::exec;
use crate::jets::{BaseVar, Field, JetVar, Setting};

/// `|denominator|` below this rejects a sample point.
pub const SINGULAR_EPS: f64 = 1e-9;
/// Default cloud distance tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Rejection rate above which sampling fails.
pub const MAX_REJECTION_RATE: f64 = 0.5;

/// A metric of Kundt shape given by rational functions of the coordinates.
#[derive(Clone, Debug)]
pub struct MetricSection {
    pub setting: Setting,
    pub h_fn: Expr,
    pub w: Vec<Expr>,
    /// Symmetric `h_ij`, functions of `(u, x)`.
    pub h: Vec<Vec<Expr>>,
    /// Sampling box per base variable, in the order `u, x.., v`.
    pub domain: Vec<(f64, f64)>,
    pub count: usize,
    pub seed: u64,
}

/// Parses an identifier as a base variable (`x` means `x1` when `n = 3`).
fn base_var(s: &Setting, name: &str) -> Option<BaseVar> {
    if name == "x" && s.nx() == 1 {
        return Some(BaseVar::X(1));
    }
    s.base_vars().into_iter().find(|b| b.name() == name)
}

pub fn parse_base_expr(s: &Setting, text: &str) -> Result<Expr> {
    Ok(parse_with(text, &|name| base_var(s, name).map(|b| Expr::var(b.sym())))?)
}

fn parse_interval(t: &str) -> Option<(f64, f64)> {
    let t = t.trim().strip_prefix('[')?.strip_suffix(']')?;
    let (a, b) = t.split_once(',')?;
    let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (a < b).then_some((a, b))
}

impl MetricSection {
    pub fn new(n: usize, h_fn: Expr, w: Vec<Expr>, h: Vec<Vec<Expr>>) -> Result<MetricSection> {
        let setting = Setting::new(n)?;
        let m = setting.nx();
        if w.len() != m || h.len() != m || h.iter().any(|r| r.len() != m) {
            return Err(KundtError::Invalid(format!("a section with n = {n} needs {m} W and a {m}x{m} h")));
        }
        let v = BaseVar::V.sym();
        for (i, row) in h.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if e.contains_var(v) {
                    return Err(KundtError::Invalid(format!("h{}{} depends on v", i + 1, j + 1)));
                }
                if h[j][i] != *e {
                    return Err(KundtError::Invalid("h is not symmetric".into()));
                }
            }
        }
        let domain = vec![(0.5, 1.5); n];
        Ok(MetricSection { setting, h_fn, w, h, domain, count: 200, seed: 0 })
    }

    /// Reads the `key = value` metric format.
    pub fn parse(text: &str) -> Result<MetricSection> {
        let mut kv: Vec<(String, String)> = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| KundtError::Invalid(format!("expected 'key = value': {line}")))?;
            kv.push((k.trim().to_string(), v.trim().to_string()));
        }
        let get = |k: &str| kv.iter().find(|(a, _)| a == k).map(|(_, b)| b.as_str());
        let n: usize = get("n").ok_or_else(|| KundtError::Invalid("missing 'n'".into()))?.parse().map_err(|_| KundtError::Invalid("bad 'n'".into()))?;
        if !(3..=4).contains(&n) {
            return Err(KundtError::UnsupportedDimension(n));
        }
        let setting = Setting::new(n)?;
        let m = setting.nx();
        let expr = |k: &str, default: Option<&str>| -> Result<Expr> {
            let t = get(k).or(default).ok_or_else(|| KundtError::Invalid(format!("missing '{k}'")))?;
            parse_base_expr(&setting, t).map_err(|e| KundtError::Invalid(format!("{k}: {e}")))
        };
        let h_fn = expr("H", None)?;
        let w = (1..=m)
            .map(|i| expr(&format!("W{i}"), if m == 1 { get("W") } else { None }))
            .collect::<Result<Vec<_>>>()?;
        let mut h = vec![vec![Expr::zero(); m]; m];
        for i in 0..m {
            for j in i..m {
                let key = format!("h{}{}", i + 1, j + 1);
                let default = if m == 1 { get("h") } else if i != j { Some("0") } else { None };
                let e = expr(&key, default)?;
                h[i][j] = e.clone();
                h[j][i] = e;
            }
        }
        let mut s = MetricSection::new(n, h_fn, w, h)?;
        if let Some(b) = get("box") {
            for part in split_box(b) {
                let (name, iv) = part.split_once(':').ok_or_else(|| KundtError::Invalid(format!("bad box entry '{part}'")))?;
                let var = base_var(&setting, name.trim()).ok_or_else(|| KundtError::Invalid(format!("unknown box variable '{name}'")))?;
                let iv = parse_interval(iv).ok_or_else(|| KundtError::Invalid(format!("bad interval '{iv}'")))?;
                let pos = setting.base_vars().iter().position(|&x| x == var).unwrap();
                s.domain[pos] = iv;
            }
        }
        if let Some(c) = get("count") {
            s.count = c.parse().map_err(|_| KundtError::Invalid("bad 'count'".into()))?;
        }
        if let Some(c) = get("seed") {
            s.seed = c.parse().map_err(|_| KundtError::Invalid("bad 'seed'".into()))?;
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.setting.n
    }

    fn field(&self, f: Field) -> &Expr {
        match f {
            Field::H => &self.h_fn,
            Field::W(i) => &self.w[i as usize - 1],
            Field::Hm(i, j) => &self.h[i as usize - 1][j as usize - 1],
        }
    }

    /// The partial derivative of a field named by a jet variable.
    pub fn jet_value(&self, j: &JetVar) -> Expr {
        let mut e = self.field(j.field).clone();
        for (slot, &c) in j.index.counts().iter().enumerate() {
            let s = BaseVar::from_slot(slot).sym();
            for _ in 0..c {
                e = e.diff(s);
            }
        }
        e
    }
}

fn split_box(b: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in b.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out.into_iter().map(|s| s.trim().to_string()).collect()
}

/// `(j^∞ s)^* e`: every jet variable replaced by the matching partial
/// derivative of the section.
pub fn pullback(e: &Expr, s: &MetricSection) -> Result<Expr> {
    let map: HashMap<Sym, Expr> = e.vars().into_iter().filter_map(|v| JetVar::from_sym(v).map(|j| (v, s.jet_value(&j)))).collect();
    let short = |m: String| if m.len() > 160 { format!("{}...", &m[..m.char_indices().nth(160).map_or(m.len(), |c| c.0)]) } else { m };
    e.substitute(&map).map_err(|err| match err {
        ExprError::SingularSubstitution(m) | ExprError::UnboundSymbol(m) => KundtError::SingularOnSection(short(m)),
        ExprError::DivisionByZero => KundtError::SingularOnSection("denominator vanishes".into()),
        other => KundtError::Expr(other),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KundtClass {
    GeneralKundt,
    DegenerateKundt,
}

impl KundtClass {
    pub fn catalog_class(self) -> Class {
        match self {
            KundtClass::GeneralKundt => Class::General,
            KundtClass::DegenerateKundt => Class::Degenerate,
        }
    }
}

impl fmt::Display for KundtClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Degenerate iff every `(W_i)_vv` and `H_vvv` vanish identically.
pub fn classify(s: &MetricSection) -> KundtClass {
    let v = BaseVar::V.sym();
    let wvv = s.w.iter().all(|w| w.diff(v).diff(v).is_zero());
    if wvv && s.h_fn.diff(v).diff(v).diff(v).is_zero() {
        KundtClass::DegenerateKundt
    } else {
        KundtClass::GeneralKundt
    }
}

/// Generator names used for signatures by default.
pub fn default_generators(n: usize, class: Class) -> Vec<&'static str> {
    match (n, class) {
        (3, Class::General) => vec!["I1", "J1", "J2"],
        (3, Class::Degenerate) => vec!["I1", "I2a", "I2c"],
        (4, Class::General) => vec!["I1", "I2a", "I2b", "S_h"],
        _ => vec!["I1", "I2a", "I2b", "c23_1"],
    }
}

/// Floating-point form of a polynomial over numbered slots.
#[derive(Clone, Debug)]
struct CompiledPoly(Vec<(f64, Vec<(usize, u32)>)>);

#[derive(Clone, Debug)]
struct Compiled {
    num: CompiledPoly,
    den: Vec<(CompiledPoly, i32)>,
}

impl CompiledPoly {
    fn new(p: &Poly, slot: &mut dyn FnMut(Sym) -> usize) -> CompiledPoly {
        CompiledPoly(p.terms().iter().map(|(m, c)| (c.to_f64(), m.vars().iter().map(|&(s, e)| (slot(s), e)).collect())).collect())
    }

    fn eval(&self, v: &[f64]) -> f64 {
        self.0.iter().map(|(c, m)| m.iter().fold(*c, |t, &(i, e)| t * v[i].powi(e as i32))).sum()
    }

    /// Value and derivatives along every direction, given slot values and
    /// slot derivatives `dv[slot][dir]`.
    fn eval_dual(&self, v: &[f64], dv: &[Vec<f64>], dirs: usize) -> (f64, Vec<f64>) {
        let mut val = 0.0;
        let mut grad = vec![0.0; dirs];
        for (c, m) in &self.0 {
            let mut t = *c;
            let mut g = vec![0.0; dirs];
            for &(i, e) in m {
                let p = v[i].powi(e as i32);
                let dp = e as f64 * v[i].powi(e as i32 - 1);
                for (gk, d) in g.iter_mut().zip(&dv[i]) {
                    *gk = *gk * p + t * dp * d;
                }
                t *= p;
            }
            val += t;
            for (a, b) in grad.iter_mut().zip(g) {
                *a += b;
            }
        }
        (val, grad)
    }
}

impl Compiled {
    fn new(e: &Expr, slot: &mut dyn FnMut(Sym) -> usize) -> Compiled {
        Compiled {
            num: CompiledPoly::new(e.numer(), slot),
            den: e.den_factors().iter().map(|(f, k)| (CompiledPoly::new(f, slot), *k as i32)).collect(),
        }
    }

    fn eval(&self, v: &[f64]) -> Option<f64> {
        let mut d = 1.0;
        for (f, k) in &self.den {
            let x = f.eval(v);
            if x.abs() < SINGULAR_EPS {
                return None;
            }
            d *= x.powi(*k);
        }
        let r = self.num.eval(v) / d;
        r.is_finite().then_some(r)
    }

    /// Quotient rule on top of [`CompiledPoly::eval_dual`].
    fn eval_dual(&self, v: &[f64], dv: &[Vec<f64>], dirs: usize) -> Option<(f64, Vec<f64>)> {
        let (n, mut grad) = self.num.eval_dual(v, dv, dirs);
        let mut d = 1.0;
        let mut log_grad = vec![0.0; dirs];
        for (f, k) in &self.den {
            let (x, dx) = f.eval_dual(v, dv, dirs);
            if x.abs() < SINGULAR_EPS {
                return None;
            }
            d *= x.powi(*k);
            for (a, b) in log_grad.iter_mut().zip(dx) {
                *a += *k as f64 * b / x;
            }
        }
        let val = n / d;
        for (g, l) in grad.iter_mut().zip(&log_grad) {
            *g = *g / d - val * l;
        }
        (val.is_finite() && grad.iter().all(|g| g.is_finite())).then_some((val, grad))
    }
}

#[derive(Default)]
struct SlotTable {
    index: HashMap<Sym, usize>,
    order: Vec<Sym>,
}

impl SlotTable {
    fn slot(&mut self, s: Sym) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.order.push(s);
        self.index.insert(s, self.order.len() - 1);
        self.order.len() - 1
    }
}

/// Section data feeding one slot: a base coordinate or a jet of the section
/// together with its first partial derivatives.
#[derive(Clone, Debug)]
enum SlotSource {
    Base(usize),
    Jet { value: Compiled, partials: Vec<Compiled> },
}

/// The signature map of a section: generators and their first derivatives
/// along the catalog frame of the section's class, as functions of the base
/// coordinates.
///
/// Catalog entries stay in jet variables. A point is evaluated by reading off
/// the section's jets there, so the large 4D entries are never pulled back
/// symbolically. Agrees with evaluating [`pullback`] pointwise.
#[derive(Clone, Debug)]
pub struct SignatureMap {
    pub names: Vec<String>,
    pub vars: Vec<Sym>,
    slots: Vec<SlotSource>,
    generators: Vec<Compiled>,
    frame: Vec<Vec<Compiled>>,
    /// Slots of the section's own base-coordinate expressions.
    base_slots: Vec<usize>,
}

impl SignatureMap {
    pub fn new(s: &MetricSection, generators: &[&str]) -> Result<SignatureMap> {
        let n = s.n();
        let class = classify(s).catalog_class();
        let bases = s.setting.base_vars();
        let vars: Vec<Sym> = bases.iter().map(|b| b.sym()).collect();
        let invs = generators.iter().map(|g| catalog::build(g, n, class)).collect::<Result<Vec<_>>>()?;
        let frame = catalog::frame(n, class)?;

        // jet-side slots first, then base-coordinate slots for section data
        let mut table = SlotTable::default();
        let mut compiled_invs = Vec::new();
        for e in &invs {
            compiled_invs.push(Compiled::new(e.function()?, &mut |sy| table.slot(sy)));
        }
        let compiled_frame: Vec<Vec<Compiled>> =
            frame.iter().map(|d| d.coeffs.iter().map(|c| Compiled::new(c, &mut |sy| table.slot(sy))).collect()).collect();
        let jet_syms = table.order.clone();
        let base_slots: Vec<usize> = vars.iter().map(|&v| table.slot(v)).collect();
        let mut slots = Vec::with_capacity(jet_syms.len());
        for sy in jet_syms {
            let src = if let Some(b) = BaseVar::from_sym(sy) {
                SlotSource::Base(bases.iter().position(|&x| x == b).ok_or_else(|| KundtError::Invalid(format!("{} is not a base variable here", b.name())))?)
            } else {
                let j = JetVar::from_sym(sy).ok_or_else(|| KundtError::Invalid("unexpected symbol in a catalog entry".into()))?;
                let value = s.jet_value(&j);
                let partials: Vec<Expr> = bases.iter().map(|b| value.diff(b.sym())).collect();
                SlotSource::Jet {
                    value: Compiled::new(&value, &mut |sy| table.slot(sy)),
                    partials: partials.iter().map(|p| Compiled::new(p, &mut |sy| table.slot(sy))).collect(),
                }
            };
            slots.push(src);
        }
        if table.order.len() > slots.len().max(base_slots.iter().max().map_or(0, |m| m + 1)) {
            return Err(KundtError::Invalid("section data uses symbols other than the base coordinates".into()));
        }
        let mut names: Vec<String> = generators.iter().map(|g| g.to_string()).collect();
        for b in 1..=frame.len() {
            names.extend(generators.iter().map(|g| format!("nabla{b}({g})")));
        }
        Ok(SignatureMap { names, vars, slots, generators: compiled_invs, frame: compiled_frame, base_slots })
    }

    /// Values at `x`, or `None` near the singular locus.
    pub fn eval(&self, x: &[f64]) -> Option<Vec<f64>> {
        let dirs = x.len();
        let total = self.slots.len().max(self.base_slots.iter().max().map_or(0, |m| m + 1));
        let mut v = vec![0.0; total];
        let mut dv = vec![vec![0.0; dirs]; total];
        for (k, &i) in self.base_slots.iter().enumerate() {
            v[i] = x[k];
            dv[i][k] = 1.0;
        }
        for (i, src) in self.slots.iter().enumerate() {
            match src {
                SlotSource::Base(k) => {
                    v[i] = x[*k];
                    dv[i] = (0..dirs).map(|d| if d == *k { 1.0 } else { 0.0 }).collect();
                }
                SlotSource::Jet { value, partials } => {
                    v[i] = value.eval(&v)?;
                    dv[i] = partials.iter().map(|p| p.eval(&v)).collect::<Option<Vec<_>>>()?;
                }
            }
        }
        let duals = self.generators.iter().map(|g| g.eval_dual(&v, &dv, dirs)).collect::<Option<Vec<_>>>()?;
        let mut out: Vec<f64> = duals.iter().map(|d| d.0).collect();
        for d in &self.frame {
            let a = d.iter().map(|c| c.eval(&v)).collect::<Option<Vec<_>>>()?;
            for (_, grad) in &duals {
                out.push(a.iter().zip(grad).map(|(p, q)| p * q).sum());
            }
        }
        Some(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SamplePoint {
    pub base: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SignatureCloud {
    pub generators: Vec<String>,
    pub points: Vec<SamplePoint>,
    pub rejected: usize,
    pub seed: u64,
    pub domain: Vec<(f64, f64)>,
    pub count: usize,
}

/// Samples `count` points of the signature map in the section's box.
pub fn signature_sample(map: &SignatureMap, domain: &[(f64, f64)], count: usize, seed: u64) -> Result<SignatureCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limit = ((count as f64) / (1.0 - MAX_REJECTION_RATE)).ceil() as usize + 1;
    let candidates: Vec<Vec<f64>> = (0..limit).map(|_| domain.iter().map(|&(a, b)| rng.gen_range(a..b)).collect()).collect();
    let values = exec::map(&candidates, |x| map.eval(x));
    let mut points = Vec::with_capacity(count);
    let mut rejected = 0;
    for (x, v) in candidates.into_iter().zip(values) {
        if points.len() == count {
            break;
        }
        match v {
            Some(values) => points.push(SamplePoint { base: x, values }),
            None => rejected += 1,
        }
    }
    if points.len() < count {
        return Err(KundtError::SingularLocusDominates { rejected, attempted: rejected + points.len() });
    }
    Ok(SignatureCloud { generators: map.names.clone(), points, rejected, seed, domain: domain.to_vec(), count })
}

/// Samples a section with its default generators and stored box.
pub fn sample_section(s: &MetricSection) -> Result<(SignatureMap, SignatureCloud)> {
    let class = classify(s).catalog_class();
    let map = SignatureMap::new(s, &default_generators(s.n(), class))?;
    let cloud = signature_sample(&map, &s.domain, s.count, s.seed)?;
    Ok((map, cloud))
}

/// Scaled sup distance `max_i |a_i - b_i| / (1 + |a_i|)`.
pub fn value_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + x.abs())).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    EquivalentCandidate,
    Distinct,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub verdict: Verdict,
    pub tol: f64,
    /// Largest distance from a sample point of either cloud to the other
    /// signature variety, after local refinement.
    pub max_distance: f64,
    /// Largest plain nearest-neighbour distance between the clouds.
    pub max_nearest_neighbour: f64,
    pub compared: usize,
}

/// Distance from `y` to the image of `map`: starts at the nearest sample
/// points of `cloud` and refines with damped Gauss-Newton.
fn distance_to_variety(y: &[f64], map: &SignatureMap, cloud: &SignatureCloud, starts: usize) -> (f64, f64) {
    let mut order: Vec<(f64, usize)> = cloud.points.iter().enumerate().map(|(i, p)| (value_distance(y, &p.values), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nn = order.first().map_or(f64::INFINITY, |o| o.0);
    let mut best = nn;
    for &(_, i) in order.iter().take(starts) {
        best = best.min(refine(y, map, &cloud.points[i].base));
        if best < 1e-12 {
            break;
        }
    }
    (best, nn)
}

fn residual(y: &[f64], map: &SignatureMap, x: &[f64]) -> Option<DVector<f64>> {
    let v = map.eval(x)?;
    Some(DVector::from_iterator(y.len(), y.iter().zip(&v).map(|(a, b)| (b - a) / (1.0 + a.abs()))))
}

fn refine(y: &[f64], map: &SignatureMap, x0: &[f64]) -> f64 {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let Some(mut r) = residual(y, map, x.as_slice()) else { return f64::INFINITY };
    let mut lambda = 1e-3;
    for _ in 0..60 {
        let mut jac = DMatrix::zeros(r.len(), n);
        let mut ok = true;
        for k in 0..n {
            let h = 1e-7 * (1.0 + x[k].abs());
            let mut xp = x.clone();
            xp[k] += h;
            match residual(y, map, xp.as_slice()) {
                Some(rp) => jac.set_column(k, &((rp - &r) / h)),
                None => ok = false,
            }
        }
        if !ok {
            break;
        }
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * &r;
        let mut improved = false;
        for _ in 0..12 {
            let mut m = a.clone();
            for k in 0..n {
                m[(k, k)] += lambda * (1.0 + a[(k, k)]);
            }
            let Some(step) = m.lu().solve(&(-&g)) else { break };
            let xn = &x + &step;
            if let Some(rn) = residual(y, map, xn.as_slice()) {
                if rn.norm_squared() < r.norm_squared() {
                    x = xn;
                    r = rn;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved || r.amax() < 1e-13 {
            break;
        }
    }
    r.amax()
}

/// Symmetric comparison of two sampled signatures. `EquivalentCandidate`
/// only says the sampled varieties agree within `tol`.
pub fn compare(a: (&SignatureMap, &SignatureCloud), b: (&SignatureMap, &SignatureCloud), tol: f64) -> Result<CompareReport> {
    if a.1.generators != b.1.generators {
        return Err(KundtError::GeneratorMismatch);
    }
    let mut jobs: Vec<(&[f64], &SignatureMap, &SignatureCloud)> = Vec::new();
    for p in &a.1.points {
        jobs.push((&p.values, b.0, b.1));
    }
    for p in &b.1.points {
        jobs.push((&p.values, a.0, a.1));
    }
    let d = exec::map(&jobs, |&(y, m, c)| distance_to_variety(y, m, c, 4));
    let max_distance = d.iter().map(|x| x.0).fold(0.0, f64::max);
    let max_nn = d.iter().map(|x| x.1).fold(0.0, f64::max);
    let verdict = if max_distance > tol { Verdict::Distinct } else { Verdict::EquivalentCandidate };
    Ok(CompareReport { verdict, tol, max_distance, max_nearest_neighbour: max_nn, compared: jobs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{EqKind, EquationSystem};

    fn section(text: &str) -> MetricSection {
        MetricSection::parse(text).unwrap()
    }

    #[test]
    fn pullback_of_first_order_invariant() {
        let s = section("n = 3\nH = u\nW = v*x\nh = 1");
        let i1 = catalog::build("I1", 3, Class::General).unwrap();
        let p = pullback(i1.function().unwrap(), &s).unwrap();
        assert_eq!(p, parse_base_expr(&s.setting, "x^2").unwrap());
    }

    #[test]
    fn h_must_not_depend_on_v() {
        assert!(MetricSection::parse("n = 3\nH = 0\nW = 0\nh = 1 + v").is_err());
        assert!(MetricSection::parse("n = 3\nH = 0\nW = 0").is_err());
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&section("n = 3\nH = u*x^2\nW = 0\nh = 1")), KundtClass::DegenerateKundt);
        assert_eq!(classify(&section("n = 3\nH = v^2*u\nW = v*x\nh = 1")), KundtClass::DegenerateKundt);
        assert_eq!(classify(&section("n = 3\nH = 0\nW = v^2\nh = 1")), KundtClass::GeneralKundt);
    }

    #[test]
    fn pullback_commutes_with_total_derivative() {
        let s = section("n = 3\nH = v^2*x + u*v\nW = v*x^2 + u\nh = 1 + x^2 + u^2");
        let eq = EquationSystem::new(EqKind::ED, 3).unwrap();
        let f = eq.parse("W_v*H_xv/h + H_vv*W_x").unwrap();
        for b in eq.setting.base_vars() {
            let lhs = pullback(&eq.total_derivative(&f, b), &s).unwrap();
            let rhs = pullback(&f, &s).unwrap().diff(b.sym());
            assert_eq!(lhs.sub(&rhs).normalize(), Expr::zero());
        }
    }

    #[test]
    fn box_and_counts_parse() {
        let s = section("n = 4\nH = v^2\nW1 = v*x1\nW2 = v*x2\nh11 = 1\nh22 = 1\nbox = u:[0,1], x1:[1,2], x2:[-1,0], v:[2,3]\ncount = 7\nseed = 9");
        assert_eq!(s.domain, vec![(0.0, 1.0), (1.0, 2.0), (-1.0, 0.0), (2.0, 3.0)]);
        assert_eq!((s.count, s.seed), (7, 9));
        assert_eq!(s.h[0][1], Expr::zero());
    }

    #[test]
    fn pointwise_map_agrees_with_pullback() {
        let s = section("n = 3\nH = v^2 + x*v + u*x^2\nW = v*x + u\nh = 1 + x^2");
        let gens = default_generators(3, Class::Degenerate);
        let map = SignatureMap::new(&s, &gens).unwrap();
        let frame = catalog::frame(3, Class::Degenerate).unwrap();
        let x = [0.7, 1.3, 0.4];
        let got = map.eval(&x).unwrap();
        let val = |sy: Sym| map.vars.iter().position(|&v| v == sy).map(|i| x[i]);
        let mut want = Vec::new();
        let pulled: Vec<Expr> = gens.iter().map(|g| pullback(catalog::build(g, 3, Class::Degenerate).unwrap().function().unwrap(), &s).unwrap()).collect();
        want.extend(pulled.iter().map(|p| p.eval_f64(&val).unwrap()));
        for d in &frame {
            let a: Vec<Expr> = d.coeffs.iter().map(|c| pullback(c, &s).unwrap()).collect();
            for p in &pulled {
                let e = a.iter().zip(&map.vars).fold(Expr::zero(), |acc, (c, &v)| acc.add(&c.mul(&p.diff(v))));
                want.push(e.eval_f64(&val).unwrap());
            }
        }
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}
