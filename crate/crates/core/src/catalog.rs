//! Catalog of published invariants and invariant derivations for `n = 3, 4`,
//! with the checks run against them: invariance, horizontal independence,
//! Jacobian rank, structure functions, Tresse derivatives and the metric
//! expressed in an invariant coframe.
//!
//! Entries are stored as text fixtures under `catalog/`, one file per entry.
//! A body may refer to other entries of the same dimension and class by name.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symexpr::{linalg, parse_with, Expr, Poly, Q, Sym};

use crate::curvature::{self, pair, HorizontalDerivation, Matrix};
use crate::error::{KundtError, Result};
use crate::exec;
use crate::jets::{BaseVar, EqKind, EquationSystem};
use crate::pseudogroup::{self, Generator, ParamJet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    General,
    Degenerate,
}

impl Class {
    pub fn name(self) -> &'static str {
        match self {
            Class::General => "general",
            Class::Degenerate => "degenerate",
        }
    }

    pub fn parse(s: &str) -> Option<Class> {
        match s {
            "general" | "E" => Some(Class::General),
            "degenerate" | "ED" => Some(Class::Degenerate),
            _ => None,
        }
    }

    pub fn eq_kind(self) -> EqKind {
        match self {
            Class::General => EqKind::E,
            Class::Degenerate => EqKind::ED,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Invariant,
    Derivation,
    /// Auxiliary expression, not invariant on its own.
    Helper,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Invariant => "invariant",
            Kind::Derivation => "derivation",
            Kind::Helper => "helper",
        }
    }

    fn parse(s: &str) -> Option<Kind> {
        match s {
            "invariant" => Some(Kind::Invariant),
            "derivation" => Some(Kind::Derivation),
            "helper" => Some(Kind::Helper),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    /// Printed formula.
    Text(String),
    /// Construction from other entries, e.g. `gradient I1`.
    Construct(String),
}

/// Parsed fixture header and unevaluated body.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub n: usize,
    pub class: Class,
    pub kind: Kind,
    pub order: u32,
    pub note: Option<String>,
    /// What the entry is for, e.g. `invariant frame, first vector`.
    pub role: Option<String>,
    pub source: Source,
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Fixture> {
        let mut fields: HashMap<&str, &str> = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| KundtError::Invalid(format!("fixture line without '=': {line}")))?;
            fields.insert(k.trim(), v.trim());
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| KundtError::Invalid(format!("fixture lacks '{k}='")));
        let bad = |k: &str| KundtError::Invalid(format!("fixture has a malformed '{k}='"));
        let source = match (fields.get("body"), fields.get("construct")) {
            (Some(b), None) => Source::Text(b.to_string()),
            (None, Some(c)) => Source::Construct(c.to_string()),
            _ => return Err(KundtError::Invalid("fixture needs exactly one of 'body=' and 'construct='".into())),
        };
        Ok(Fixture {
            name: get("name")?.to_string(),
            n: get("n")?.parse().map_err(|_| bad("n"))?,
            class: Class::parse(get("class")?).ok_or_else(|| bad("class"))?,
            kind: Kind::parse(get("kind")?).ok_or_else(|| bad("kind"))?,
            order: get("order")?.parse().map_err(|_| bad("order"))?,
            note: fields.get("note").map(|s| s.to_string()),
            role: fields.get("role").map(|s| s.to_string()),
            source,
        })
    }

    pub fn equation(&self) -> Result<EquationSystem> {
        EquationSystem::new(self.class.eq_kind(), self.n)
    }
}

macro_rules! fixtures {
    ($($f:literal),* $(,)?) => {
        &[$(include_str!(concat!("../catalog/", $f, ".kc"))),*]
    };
}

const FIXTURE_TEXT: &[&str] = fixtures![
    "n3_general_I1",
    "n3_general_nabla1",
    "n3_general_nabla2",
    "n3_general_nabla3",
    "n3_general_J1",
    "n3_general_J2",
    "n3_general_J3",
    "n3_general_nabla3_I1",
    "n3_general_K13",
    "n3_degenerate_I1",
    "n3_degenerate_I2a",
    "n3_degenerate_I2b",
    "n3_degenerate_I2c",
    "n3_degenerate_K2a",
    "n3_degenerate_K2b",
    "n3_degenerate_Q",
    "n3_degenerate_R",
    "n3_degenerate_nabla1",
    "n3_degenerate_nabla2",
    "n3_degenerate_nabla3",
    "n3_degenerate_nabla_compact",
    "n4_general_I1",
    "n4_general_A",
    "n4_general_B",
    "n4_general_T",
    "n4_general_nabla1",
    "n4_general_nabla2",
    "n4_general_nabla3",
    "n4_general_nabla3_cov",
    "n4_general_nabla4",
    "n4_general_I2a",
    "n4_general_I2b",
    "n4_general_S_h",
    "n4_degenerate_I1",
    "n4_degenerate_I2a",
    "n4_degenerate_I2b",
    "n4_degenerate_nabla1",
    "n4_degenerate_nabla2",
    "n4_degenerate_nabla3",
    "n4_degenerate_nabla4",
    "n4_degenerate_c23_1",
];

static FIXTURES: Lazy<Vec<Fixture>> =
    Lazy::new(|| FIXTURE_TEXT.iter().map(|t| Fixture::parse(t).expect("bundled fixture parses")).collect());

/// All bundled fixtures in catalog order.
pub fn fixtures() -> &'static [Fixture] {
    &FIXTURES
}

/// Accepts the ASCII names used in the fixtures and a few common spellings.
pub fn canonical_name(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| match c {
            '∇' => 'N',
            '₀'..='₉' => char::from_digit(c as u32 - '₀' as u32, 10).unwrap(),
            '¹' => '1',
            '²' => '2',
            '³' => '3',
            _ => c,
        })
        .filter(|c| !c.is_whitespace())
        .collect();
    let s = s.replace('N', "nabla");
    match s.as_str() {
        "nabla3(I1)" => "nabla3_I1".into(),
        "K1_13" | "K113" => "K13".into(),
        "c2_31" | "c231" => "c23_1".into(),
        _ => s,
    }
}

pub fn find_fixture(name: &str, n: usize, class: Class) -> Option<&'static Fixture> {
    let name = canonical_name(name);
    fixtures().iter().find(|f| f.name == name && f.n == n && f.class == class)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Function(Expr),
    Derivation(HorizontalDerivation),
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub fixture: Fixture,
    pub eq: EquationSystem,
    pub body: Body,
}

impl CatalogEntry {
    pub fn name(&self) -> &str {
        &self.fixture.name
    }

    pub fn kind(&self) -> Kind {
        self.fixture.kind
    }

    pub fn function(&self) -> Result<&Expr> {
        match &self.body {
            Body::Function(e) => Ok(e),
            Body::Derivation(_) => Err(KundtError::Invalid(format!("'{}' is a derivation", self.fixture.name))),
        }
    }

    pub fn derivation(&self) -> Result<&HorizontalDerivation> {
        match &self.body {
            Body::Derivation(d) => Ok(d),
            Body::Function(_) => Err(KundtError::Invalid(format!("'{}' is not a derivation", self.fixture.name))),
        }
    }

    /// Highest jet order among the body's coefficients.
    pub fn jet_order(&self) -> u32 {
        match &self.body {
            Body::Function(e) => EquationSystem::jet_order(e),
            Body::Derivation(d) => d.coeffs.iter().map(EquationSystem::jet_order).max().unwrap_or(0),
        }
    }
}

type Key = (String, usize, Class);

static BUILT: Lazy<Mutex<HashMap<Key, Arc<CatalogEntry>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Builds a catalog entry, resolving references to other entries.
pub fn build(name: &str, n: usize, class: Class) -> Result<Arc<CatalogEntry>> {
    let fx = find_fixture(name, n, class).ok_or_else(|| KundtError::UnknownEntry(format!("{name} (n={n}, {class})")))?;
    let key = (fx.name.clone(), n, class);
    if let Some(e) = BUILT.lock().get(&key) {
        return Ok(e.clone());
    }
    let eq = fx.equation()?;
    let body = match &fx.source {
        Source::Text(t) => text_body(fx, &eq, t)?,
        Source::Construct(c) => construct(fx, &eq, c)?,
    };
    let entry = Arc::new(CatalogEntry { fixture: fx.clone(), eq, body });
    Ok(BUILT.lock().entry(key).or_insert(entry).clone())
}

/// Builds every entry of a dimension and class.
pub fn build_all(n: usize, class: Class) -> Result<Vec<Arc<CatalogEntry>>> {
    fixtures().iter().filter(|f| f.n == n && f.class == class).map(|f| build(&f.name, n, class)).collect()
}

fn parse_in_catalog(fx: &Fixture, eq: &EquationSystem, text: &str) -> Result<Expr> {
    let err: RefCell<Option<KundtError>> = RefCell::new(None);
    let resolver = |name: &str| -> Option<Expr> {
        if name != fx.name {
            if let Some(other) = fixtures().iter().find(|f| f.name == name && f.n == fx.n && f.class == fx.class) {
                return match build(&other.name, other.n, other.class).and_then(|e| e.function().cloned()) {
                    Ok(e) => Some(e),
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        None
                    }
                };
            }
        }
        eq.resolve(name)
    };
    let r = parse_with(text, &resolver);
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(r?)
}

fn text_body(fx: &Fixture, eq: &EquationSystem, text: &str) -> Result<Body> {
    match fx.kind {
        Kind::Derivation => {
            let parts: Vec<&str> = text.split(',').collect();
            if parts.len() != fx.n {
                return Err(KundtError::Invalid(format!("derivation '{}' needs {} coefficients", fx.name, fx.n)));
            }
            let coeffs = parts.iter().map(|p| parse_in_catalog(fx, eq, p)).collect::<Result<Vec<_>>>()?;
            Ok(Body::Derivation(HorizontalDerivation::new(coeffs)))
        }
        _ => Ok(Body::Function(parse_in_catalog(fx, eq, text)?)),
    }
}

fn sibling(fx: &Fixture, name: &str) -> Result<Arc<CatalogEntry>> {
    build(name, fx.n, fx.class)
}

fn construct(fx: &Fixture, eq: &EquationSystem, spec: &str) -> Result<Body> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let bad = || KundtError::Invalid(format!("bad construction '{spec}' for '{}'", fx.name));
    match words.as_slice() {
        ["gradient", f] => Ok(Body::Derivation(gradient(eq, sibling(fx, f)?.function()?)?)),
        ["scalar_curvature_h"] => Ok(Body::Function(curvature::scalar_curvature_h(eq)?)),
        ["covariant", x, y] => {
            let geo = curvature::kundt_geometry(eq)?;
            let x = sibling(fx, x)?;
            let y = sibling(fx, y)?;
            Ok(Body::Derivation(geo.covariant_derivative(x.derivation()?, y.derivation()?)))
        }
        ["degenerate_frame", i] => {
            let i: usize = i.parse().map_err(|_| bad())?;
            let frame = degenerate_frame4(eq)?;
            frame.get(i.wrapping_sub(1)).cloned().map(Body::Derivation).ok_or_else(bad)
        }
        ["structure", i, j, k] => {
            let idx = |s: &str| s.parse::<usize>().ok().filter(|&v| (1..=fx.n).contains(&v)).ok_or_else(bad);
            let (i, j, k) = (idx(i)?, idx(j)?, idx(k)?);
            let frame = (1..=fx.n)
                .map(|m| sibling(fx, &format!("nabla{m}")).and_then(|e| e.derivation().cloned()))
                .collect::<Result<Vec<_>>>()?;
            let br = frame[i - 1].bracket(&frame[j - 1], eq);
            let c = frame_coordinates(&frame, &br)?;
            Ok(Body::Function(c[k - 1].clone()))
        }
        _ => Err(bad()),
    }
}

/// Horizontal differential `(D_μ f)_μ`.
pub fn horizontal_differential(eq: &EquationSystem, f: &Expr) -> Vec<Expr> {
    eq.setting.base_vars().into_iter().map(|b| eq.total_derivative(f, b)).collect()
}

/// `g^{-1} d̂f`.
pub fn gradient(eq: &EquationSystem, f: &Expr) -> Result<HorizontalDerivation> {
    let gi = curvature::kundt_inverse(eq)?;
    Ok(raise(&gi, &horizontal_differential(eq, f)))
}

fn raise(gi: &Matrix, w: &[Expr]) -> HorizontalDerivation {
    let coeffs = gi
        .iter()
        .map(|row| row.iter().zip(w).fold(Expr::zero(), |acc, (a, b)| if a.is_zero() || b.is_zero() { acc } else { acc.add(&a.mul(b)) }))
        .collect();
    HorizontalDerivation::new(coeffs)
}

fn solve(a: &[Vec<Expr>], b: &[Expr], what: &str) -> Result<Vec<Expr>> {
    linalg::solve(a, b).map_err(|_| KundtError::LinearSolveSingular(what.into()))
}

/// Invariant frame for degenerate Kundt metrics with `n = 4`:
/// `∇1 = g^{-1}(d̂I1 + a1 d̂I2a + a2 d̂I2b)` with `a1, a2` chosen to kill the
/// `D_x1, D_x2` components, `∇2 = g^{-1} d̂I2a`, `∇3 = g^{-1} d̂I2b`, and `∇4`
/// fixed by `g(∇1,∇4) = 1`, `g(∇2,∇4) = g(∇3,∇4) = g(∇4,∇4) = 0`.
pub fn degenerate_frame4(eq: &EquationSystem) -> Result<Vec<HorizontalDerivation>> {
    static FRAME: Lazy<Mutex<Option<Vec<HorizontalDerivation>>>> = Lazy::new(|| Mutex::new(None));
    if eq.kind != EqKind::ED || eq.n() != 4 {
        return Err(KundtError::Invalid("the constructive frame is defined for ED with n = 4".into()));
    }
    if let Some(f) = FRAME.lock().as_ref() {
        return Ok(f.clone());
    }
    let get = |name: &str| -> Result<Expr> { build(name, 4, Class::Degenerate)?.function().cloned() };
    let (i1, i2a, i2b) = (get("I1")?, get("I2a")?, get("I2b")?);
    let forms = exec::map(&[&i1, &i2a, &i2b], |f| horizontal_differential(eq, f));
    let (d1, da, db) = (&forms[0], &forms[1], &forms[2]);
    // components: 0 = u, 1 = x1, 2 = x2, 3 = v
    let a = vec![vec![da[1].clone(), db[1].clone()], vec![da[2].clone(), db[2].clone()]];
    let rhs = vec![d1[1].neg(), d1[2].neg()];
    let coef = solve(&a, &rhs, "a1, a2 for the first frame vector")?;
    let omega: Vec<Expr> = (0..4).map(|m| d1[m].add(&coef[0].mul(&da[m])).add(&coef[1].mul(&db[m]))).collect();
    let gi = curvature::kundt_inverse(eq)?;
    let n1 = raise(&gi, &omega);
    let n2 = raise(&gi, da);
    let n3 = raise(&gi, db);
    // particular solution with vanishing D_v component, then shift along ∇1
    let mut ev = vec![Expr::zero(); 4];
    ev[3] = Expr::one();
    let rows = vec![omega.clone(), da.clone(), db.clone(), ev];
    let y0 = HorizontalDerivation::new(solve(&rows, &[Expr::one(), Expr::zero(), Expr::zero(), Expr::zero()], "fourth frame vector")?);
    let g = curvature::kundt_metric(eq);
    let t = pair(&g, &y0, &y0).scale(&Q::new(-1, 2));
    let n4 = y0.add(&n1.scale(&t));
    let frame = vec![n1, n2, n3, n4];
    *FRAME.lock() = Some(frame.clone());
    Ok(frame)
}

/// Matrix `F[i][μ] = ∇_i^μ`.
fn frame_matrix(frame: &[HorizontalDerivation]) -> Matrix {
    frame.iter().map(|d| d.coeffs.clone()).collect()
}

/// Coordinates of `x` in `frame`: `x = Σ c_k ∇_k`.
pub fn frame_coordinates(frame: &[HorizontalDerivation], x: &HorizontalDerivation) -> Result<Vec<Expr>> {
    let f = frame_matrix(frame);
    let d = f.len();
    let ft: Matrix = (0..d).map(|m| (0..d).map(|k| f[k][m].clone()).collect()).collect();
    linalg::solve(&ft, &x.coeffs).map_err(|_| KundtError::SingularFrame)
}

/// `c[i][j][k]` with `[∇_i, ∇_j] = Σ_k c_ij^k ∇_k`, for `i < j`; the rest is
/// filled by antisymmetry.
pub fn structure_functions(frame: &[HorizontalDerivation], eq: &EquationSystem) -> Result<Vec<Vec<Vec<Expr>>>> {
    let d = frame.len();
    if linalg::det(&frame_matrix(frame)).is_zero() {
        return Err(KundtError::SingularFrame);
    }
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| ((i + 1)..d).map(move |j| (i, j))).collect();
    let vals = exec::map(&pairs, |&(i, j)| frame_coordinates(frame, &frame[i].bracket(&frame[j], eq)));
    let mut c = vec![vec![vec![Expr::zero(); d]; d]; d];
    for (&(i, j), v) in pairs.iter().zip(vals) {
        let v = v?;
        for k in 0..d {
            c[j][i][k] = v[k].neg();
            c[i][j][k] = v[k].clone();
        }
    }
    Ok(c)
}

/// Tresse derivatives `∇_{I_s} = Σ_μ (J^{-1})_{μ s} D_μ` with `J = [D_μ I_s]`.
pub fn tresse(invs: &[Expr], eq: &EquationSystem) -> Result<Vec<HorizontalDerivation>> {
    if invs.len() != eq.n() {
        return Err(KundtError::Invalid(format!("Tresse derivatives need {} invariants", eq.n())));
    }
    let jac = exec::map(invs, |f| horizontal_differential(eq, f));
    let det = linalg::det(&jac);
    if det.is_zero() {
        return Err(KundtError::SingularFrame);
    }
    let dinv = det.inv()?;
    let n = eq.n();
    // (J^{-1})_{μ s} = cofactor(s, μ) / det J
    let idx: Vec<(usize, usize)> = (0..n).flat_map(|s| (0..n).map(move |m| (s, m))).collect();
    let cof = exec::map(&idx, |&(s, m)| {
        let minor: Matrix = (0..n).filter(|&r| r != s).map(|r| (0..n).filter(|&c| c != m).map(|c| jac[r][c].clone()).collect()).collect();
        let c = linalg::det(&minor).mul(&dinv);
        if (s + m) % 2 == 0 {
            c
        } else {
            c.neg()
        }
    });
    Ok((0..n).map(|s| HorizontalDerivation::new(cof[s * n..(s + 1) * n].to_vec())).collect())
}

/// `G_ij = g(∇_i, ∇_j)`.
pub fn coframe_metric(frame: &[HorizontalDerivation], eq: &EquationSystem) -> Result<Matrix> {
    if linalg::det(&frame_matrix(frame)).is_zero() {
        return Err(KundtError::SingularFrame);
    }
    let g = curvature::kundt_metric(eq);
    let d = frame.len();
    let idx: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();
    let vals = exec::map(&idx, |&(i, j)| pair(&g, &frame[i], &frame[j]));
    let mut out = vec![vec![Expr::zero(); d]; d];
    for (&(i, j), v) in idx.iter().zip(vals) {
        out[i][j] = v.clone();
        out[j][i] = v;
    }
    Ok(out)
}

/// Printed coefficient matrix of the metric in the dual coframe, for the
/// three-dimensional classes.
pub fn printed_coframe_metric(class: Class) -> Result<Matrix> {
    let get = |name: &str| -> Result<Expr> { build(name, 3, class)?.function().cloned() };
    let i1 = get("I1")?;
    let inv = i1.inv()?;
    let c = |p: i64, q: i64| inv.scale(&Q::new(p, q));
    let z = Expr::zero;
    Ok(match class {
        // I1^{-1}((J1 α3 + J2 α2 - I1 α1) α3 + 4 (α2)^2)
        Class::General => {
            let g33 = get("J1")?.mul(&inv);
            let g23 = get("J2")?.mul(&inv).scale(&Q::new(1, 2));
            vec![
                vec![z(), z(), Expr::constant(Q::new(-1, 2))],
                vec![z(), c(4, 1), g23.clone()],
                vec![Expr::constant(Q::new(-1, 2)), g23, g33],
            ]
        }
        // I1^{-1}((-2 α1 + 2 α2 + α3) α3 + (α2)^2)
        Class::Degenerate => vec![vec![z(), z(), c(-1, 1)], vec![z(), c(1, 1), c(1, 1)], vec![c(-1, 1), c(1, 1), c(1, 1)]],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoframeReport {
    /// `G / printed`, read off a nonzero entry.
    pub factor: Option<Q>,
    /// Entries `(i, j)` where `G_ij != factor * printed_ij`.
    pub mismatches: Vec<(usize, usize)>,
}

impl CoframeReport {
    pub fn matches(&self) -> bool {
        self.factor.is_some() && self.mismatches.is_empty()
    }
}

/// Compares the coframe metric of the three-dimensional frame of `class`
/// with the printed pattern, allowing one constant factor.
pub fn coframe_report(class: Class) -> Result<CoframeReport> {
    let frame: Vec<HorizontalDerivation> =
        (1..=3).map(|i| build(&format!("nabla{i}"), 3, class).and_then(|e| e.derivation().cloned())).collect::<Result<_>>()?;
    let eq = EquationSystem::new(class.eq_kind(), 3)?;
    let g = coframe_metric(&frame, &eq)?;
    let p = printed_coframe_metric(class)?;
    let factor = g[1][1].try_div(&p[1][1])?.normalize().constant_value();
    let mut mismatches = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            let ok = match &factor {
                Some(f) => g[i][j].sub(&p[i][j].scale(f)).is_zero(),
                None => false,
            };
            if !ok {
                mismatches.push((i, j));
            }
        }
    }
    Ok(CoframeReport { factor, mismatches })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Exact zero test of the symbolic residual.
    Symbolic,
    /// Exact evaluation of the residual at random rational points.
    Sampled { points: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub name: String,
    pub kind: Kind,
    pub invariant: bool,
    pub method: Method,
    /// First nonzero residual component, printed.
    pub residual: Option<String>,
}

impl InvarianceReport {
    /// Passing means invariant for invariants and derivations; helpers are
    /// expected to fail.
    pub fn as_expected(&self) -> bool {
        self.invariant == (self.kind != Kind::Helper)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Bodies larger than this (in polynomial terms) are checked by sampling.
    pub symbolic_size_limit: usize,
    pub points: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { symbolic_size_limit: 2000, points: 3, seed: 0x5eed }
    }
}

/// Residual `pr ξ(A^μ) - Σ_ν A^ν D_ν(ξ^μ)` of a horizontal derivation,
/// one parameter jet at a time; the derivation is invariant iff all vanish.
/// Returns the first nonzero component as `(parameter, μ, residual)`.
pub fn derivation_violation(d: &HorizontalDerivation, eq: &EquationSystem) -> Result<Option<(ParamJet, usize, Expr)>> {
    let coeffs: Vec<Expr> = d.coeffs.iter().map(|c| eq.restrict(c)).collect::<Result<_>>()?;
    let k = coeffs.iter().map(EquationSystem::jet_order).max().unwrap_or(0);
    let g = pseudogroup::generic(eq, k);
    let xi = Generator::symbolic(&eq.setting).base_coefficients(eq);
    let dirs = eq.setting.base_vars();
    // dxi[m][ν] split by parameter jet
    let dxi: Vec<Vec<BTreeMap<Sym, Poly>>> =
        xi.iter().map(|(_, p)| dirs.iter().map(|&b| pseudogroup::split_params(&eq.total_derivative_poly(p, b))).collect()).collect();
    let mut params: BTreeSet<Sym> = BTreeSet::new();
    for c in &coeffs {
        params.extend(pseudogroup::params_for(&g, c));
    }
    for row in &dxi {
        for m in row {
            params.extend(m.keys().copied());
        }
    }
    let jobs: Vec<(Sym, usize)> = params.iter().flat_map(|&p| (0..coeffs.len()).map(move |m| (p, m))).collect();
    Ok(exec::find_first(&jobs, |&(p, m)| {
        let mut r = pseudogroup::param_action(&g, &coeffs[m], p);
        for (nu, a) in coeffs.iter().enumerate() {
            if let Some(c) = dxi[m][nu].get(&p) {
                if !a.is_zero() {
                    r = r.sub(&a.mul(&Expr::from_poly(c.clone())));
                }
            }
        }
        (!r.is_zero()).then(|| (ParamJet::from_sym(p).unwrap(), m, r))
    }))
}

pub fn is_invariant_derivation(d: &HorizontalDerivation, eq: &EquationSystem) -> Result<bool> {
    Ok(derivation_violation(d, eq)?.is_none())
}

pub fn verify_invariance(entry: &CatalogEntry) -> Result<InvarianceReport> {
    verify_invariance_with(entry, VerifyOptions::default())
}

pub fn verify_invariance_with(entry: &CatalogEntry, opts: VerifyOptions) -> Result<InvarianceReport> {
    let coeffs: Vec<Expr> = match &entry.body {
        Body::Function(f) => vec![f.clone()],
        Body::Derivation(d) => d.coeffs.clone(),
    };
    let size: usize = coeffs.iter().map(Expr::size).sum();
    let derivation = matches!(entry.body, Body::Derivation(_));
    let (method, residual) = if size <= opts.symbolic_size_limit {
        let r = if derivation {
            derivation_violation(entry.derivation()?, &entry.eq)?.map(|(p, m, r)| format!("{p}, component {m}: {}", r.to_quick_string()))
        } else {
            pseudogroup::first_violation(&coeffs[0], &entry.eq)?.map(|(p, r)| format!("{p}: {}", r.to_quick_string()))
        };
        (Method::Symbolic, r)
    } else {
        let r = sampled_violation(&coeffs, derivation, &entry.eq, opts.points, opts.seed)?
            .map(|(p, m, v)| format!("{p}, component {m}: value {v} at a sample point"));
        (Method::Sampled { points: opts.points }, r)
    };
    Ok(InvarianceReport { name: entry.name().to_string(), kind: entry.kind(), invariant: residual.is_none(), method, residual })
}

/// Pointwise version of the invariance test: each parameter component of the
/// residual is evaluated exactly at random points of the equation. A nonzero
/// value certifies non-invariance.
pub fn sampled_violation(
    coeffs: &[Expr],
    derivation: bool,
    eq: &EquationSystem,
    points: usize,
    seed: u64,
) -> Result<Option<(ParamJet, usize, Q)>> {
    let coeffs: Vec<Expr> = coeffs.iter().map(|c| eq.restrict(c)).collect::<Result<_>>()?;
    let k = coeffs.iter().map(EquationSystem::jet_order).max().unwrap_or(0);
    let g = pseudogroup::generic(eq, k);
    let xi = Generator::symbolic(&eq.setting).base_coefficients(eq);
    let dirs = eq.setting.base_vars();
    let dxi: Vec<Vec<BTreeMap<Sym, Poly>>> = if derivation {
        xi.iter().map(|(_, p)| dirs.iter().map(|&b| pseudogroup::split_params(&eq.total_derivative_poly(p, b))).collect()).collect()
    } else {
        Vec::new()
    };
    let mut params: BTreeSet<Sym> = BTreeSet::new();
    for c in &coeffs {
        params.extend(pseudogroup::params_for(&g, c));
    }
    for m in dxi.iter().flatten() {
        params.extend(m.keys().copied());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = 0;
    for _ in 0..MAX_ATTEMPTS {
        let mut pt = eq.random_point(k, &mut rng);
        for b in eq.setting.base_vars() {
            pt.insert(b.sym(), crate::jets::small_rational(&mut rng));
        }
        let val = |s: Sym| pt.get(&s).cloned().or(Some(Q::zero()));
        let Ok(values) = coeffs.iter().map(|c| c.eval_q(&val)).collect::<std::result::Result<Vec<Q>, _>>() else { continue };
        let jobs: Vec<(Sym, usize)> = params.iter().flat_map(|&p| (0..coeffs.len()).map(move |m| (p, m))).collect();
        let found = exec::map(&jobs, |&(p, m)| -> Option<std::result::Result<Q, ()>> {
            let image = |s: Sym| g.split.get(&s).and_then(|mp| mp.get(&p)).cloned();
            let mut r = match coeffs[m].derive_at(&image, &val) {
                Ok(r) => r,
                Err(_) => return Some(Err(())),
            };
            if derivation {
                for (nu, a) in values.iter().enumerate() {
                    if let Some(c) = dxi[m][nu].get(&p) {
                        let cv = c.eval_q(&val).unwrap_or_default();
                        r = &r - &(a * &cv);
                    }
                }
            }
            (!r.is_zero()).then_some(Ok(r))
        });
        if found.iter().any(|f| matches!(f, Some(Err(())))) {
            continue;
        }
        if let Some((i, Some(Ok(v)))) = found.into_iter().enumerate().find(|(_, f)| f.is_some()) {
            let (p, m) = jobs[i];
            return Ok(Some((ParamJet::from_sym(p).unwrap(), m, v)));
        }
        used += 1;
        if used == points {
            return Ok(None);
        }
    }
    Err(KundtError::DegeneratePointExhausted(MAX_ATTEMPTS))
}

const RETRIES: usize = 3;
const MAX_ATTEMPTS: usize = 24;

/// Evaluates `rows` at random points of `eq`, returning the largest exact
/// rank over `RETRIES` nonsingular points.
fn sampled_rank(eq: &EquationSystem, order: u32, seed: u64, rows: &dyn Fn(&dyn Fn(Sym) -> Option<Q>) -> Option<Vec<Vec<Q>>>) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0;
    let mut good = 0;
    for _ in 0..MAX_ATTEMPTS {
        let mut pt = eq.random_point(order, &mut rng);
        for b in eq.setting.base_vars() {
            pt.insert(b.sym(), crate::jets::small_rational(&mut rng));
        }
        let val = |s: Sym| pt.get(&s).cloned().or(Some(Q::zero()));
        if let Some(m) = rows(&val) {
            best = best.max(linalg::rank(&m));
            good += 1;
            if good == RETRIES {
                return Ok(best);
            }
        }
    }
    if good > 0 {
        Ok(best)
    } else {
        Err(KundtError::DegeneratePointExhausted(MAX_ATTEMPTS))
    }
}

fn eval_rows(m: &[Vec<Expr>], val: &dyn Fn(Sym) -> Option<Q>) -> Option<Vec<Vec<Q>>> {
    m.iter().map(|r| r.iter().map(|e| e.eval_q(val).ok()).collect()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceReport {
    pub size: usize,
    pub rank: usize,
    /// All maximal minors of `[D_μ I_s]` vanish identically.
    pub wedge_identically_zero: bool,
}

impl IndependenceReport {
    pub fn independent(&self) -> bool {
        self.rank == self.size
    }
}

/// Rank of `[D_μ I_s]` at random points, plus the symbolic test of the
/// wedge `d̂I_1 ∧ … ∧ d̂I_s` when the sampled rank is deficient.
pub fn horizontal_independence(invs: &[Expr], eq: &EquationSystem, seed: u64) -> Result<IndependenceReport> {
    let invs: Vec<Expr> = invs.iter().map(|f| eq.restrict(f)).collect::<Result<_>>()?;
    let jac = exec::map(&invs, |f| horizontal_differential(eq, f));
    let order = jac.iter().flatten().map(EquationSystem::jet_order).max().unwrap_or(0);
    let rank = sampled_rank(eq, order, seed, &|val| eval_rows(&jac, val))?;
    let wedge_identically_zero = rank < invs.len() && maximal_minors_vanish(&jac);
    Ok(IndependenceReport { size: invs.len(), rank, wedge_identically_zero })
}

fn maximal_minors_vanish(m: &[Vec<Expr>]) -> bool {
    let s = m.len();
    let n = m.first().map_or(0, |r| r.len());
    if s > n {
        return true;
    }
    let subsets: Vec<Vec<usize>> = combinations(n, s);
    exec::find_first(&subsets, |cols| {
        let minor: Matrix = m.iter().map(|r| cols.iter().map(|&c| r[c].clone()).collect()).collect();
        (!linalg::det(&minor).is_zero()).then_some(())
    })
    .is_none()
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Exact rank of `∂(invs)/∂(jets)` over the kept jets, at random points.
pub fn jacobian_rank(invs: &[Expr], eq: &EquationSystem, seed: u64) -> Result<usize> {
    let invs: Vec<Expr> = invs.iter().map(|f| eq.restrict(f)).collect::<Result<_>>()?;
    let order = invs.iter().map(EquationSystem::jet_order).max().unwrap_or(0);
    let jets = eq.jets(order);
    let jac: Vec<Vec<Expr>> = exec::map(&invs, |f| jets.iter().map(|j| f.diff(j.sym())).collect());
    sampled_rank(eq, order, seed, &|val| eval_rows(&jac, val))
}

/// The catalog frame `∇1..∇n` of a class.
pub fn frame(n: usize, class: Class) -> Result<Vec<HorizontalDerivation>> {
    (1..=n).map(|i| build(&format!("nabla{i}"), n, class).and_then(|e| e.derivation().cloned())).collect()
}

/// `D_v` of every entry of the coframe metric.
pub fn v_derivatives_of_pairings(frame: &[HorizontalDerivation], eq: &EquationSystem) -> Result<Matrix> {
    let g = coframe_metric(frame, eq)?;
    Ok(g.iter().map(|r| r.iter().map(|e| eq.total_derivative(e, BaseVar::V)).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(name: &str, n: usize, class: Class) -> Expr {
        build(name, n, class).unwrap().function().unwrap().clone()
    }

    #[test]
    fn fixtures_parse_and_declare_their_order() {
        for fx in fixtures() {
            if fx.n == 4 && matches!(fx.source, Source::Construct(_)) {
                continue;
            }
            let entry = build(&fx.name, fx.n, fx.class).unwrap();
            assert_eq!(entry.jet_order(), fx.order, "{} n={} {}", fx.name, fx.n, fx.class);
        }
    }

    #[test]
    fn first_order_invariant_reads_as_printed() {
        let eq = EquationSystem::new(EqKind::E, 3).unwrap();
        assert_eq!(e("I1", 3, Class::General), eq.parse("W_v^2/h").unwrap());
        assert_eq!(e("I2a", 3, Class::Degenerate), eq.parse("H_vv").unwrap());
        assert!(matches!(build("nope", 3, Class::General), Err(KundtError::UnknownEntry(_))));
    }

    #[test]
    fn unicode_names() {
        assert_eq!(canonical_name("∇₃(I₁)"), "nabla3_I1");
        assert_eq!(canonical_name("∇2"), "nabla2");
        assert_eq!(canonical_name("c²₃¹"), "c23_1");
    }

    #[test]
    fn bracket_and_first_derivatives_3d_general() {
        let eq = EquationSystem::new(EqKind::E, 3).unwrap();
        let f = frame(3, Class::General).unwrap();
        assert!(f[0].bracket(&f[1], &eq).add(&f[1]).normalize().is_zero());
        let i1 = e("I1", 3, Class::General);
        assert!(f[1].apply(&eq, &i1).is_zero());
        assert!(f[0].apply(&eq, &i1).sub(&i1.scale(&Q::from_i64(2))).is_zero());
        assert_eq!(f[2].apply(&eq, &i1), e("nabla3_I1", 3, Class::General));
    }

    #[test]
    fn helpers_fail_invariance() {
        let q = build("K2a", 3, Class::Degenerate).unwrap();
        let r = verify_invariance(&q).unwrap();
        assert!(!r.invariant && r.as_expected());
    }

    #[test]
    fn sampled_check_agrees_with_symbolic() {
        let opts = VerifyOptions { symbolic_size_limit: 0, ..VerifyOptions::default() };
        for (name, class) in [("R", Class::Degenerate), ("I2c", Class::Degenerate), ("nabla3", Class::Degenerate), ("nabla2", Class::General)] {
            let entry = build(name, 3, class).unwrap();
            let sampled = verify_invariance_with(&entry, opts).unwrap();
            let exact = verify_invariance(&entry).unwrap();
            assert_eq!(sampled.method, Method::Sampled { points: 3 });
            assert_eq!(exact.method, Method::Symbolic);
            assert_eq!(sampled.invariant, exact.invariant, "{name}");
        }
        let fake = HorizontalDerivation::new(vec![Expr::zero(), Expr::zero(), Expr::one()]);
        let eq = EquationSystem::new(EqKind::E, 3).unwrap();
        assert!(!is_invariant_derivation(&fake, &eq).unwrap());
        assert!(sampled_violation(&fake.coeffs, true, &eq, 2, 1).unwrap().is_some());
    }

    #[test]
    fn tresse_derivatives_commute() {
        let eq = EquationSystem::new(EqKind::E, 3).unwrap();
        let invs: Vec<Expr> = ["W_v^2/h", "u*h + W", "H_v + x*W_v"].iter().map(|t| eq.parse(t).unwrap()).collect();
        let t = tresse(&invs, &eq).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let v = t[a].apply(&eq, &invs[b]);
                assert_eq!(v, if a == b { Expr::one() } else { Expr::zero() });
            }
        }
        assert!(t[0].bracket(&t[1], &eq).is_zero());
    }

    #[test]
    fn rank_of_dependent_pair() {
        let eq = EquationSystem::new(EqKind::E, 3).unwrap();
        let i1 = e("I1", 3, Class::General);
        assert_eq!(jacobian_rank(&[i1.clone(), i1.square()], &eq, 7).unwrap(), 1);
    }
}
