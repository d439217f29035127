//! Jet coordinates of the Kundt ansatz, total derivatives, and the equation
//! manifolds E (Kundt) and ED (degenerate Kundt).
//!
//! Base variables are `(u, x1, .., x_{n-2}, v)`; the fields are `H`, `W_i` and
//! `h_ij` with `i <= j`. Every jet coordinate is a structured [`Sym`] whose id
//! encodes the field and multi-index, so symbol order never depends on the
//! order of creation.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use symexpr::{parse_with, Expr, Poly, Q, Sym, SymKind};

use crate::error::{KundtError, Result};
use crate::pseudogroup::ParamJet;

/// Largest supported spacetime dimension.
pub const MAX_N: usize = 6;
/// Slots of the packed multi-index: u, x1..x4, v.
pub const SLOTS: usize = 6;

const KIND_SHIFT: u32 = 30;
const JET_KIND: u32 = 1;
pub(crate) const PARAM_KIND: u32 = 2;

fn binom(n: i64, k: i64) -> i64 {
    if k < 0 || n < 0 || k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

pub fn binomial(n: i64, k: i64) -> i64 {
    binom(n, k)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum BaseVar {
    U,
    X(u8),
    V,
}

impl BaseVar {
    pub fn slot(self) -> usize {
        match self {
            BaseVar::U => 0,
            BaseVar::X(i) => i as usize,
            BaseVar::V => SLOTS - 1,
        }
    }

    pub fn from_slot(s: usize) -> BaseVar {
        match s {
            0 => BaseVar::U,
            5 => BaseVar::V,
            i => BaseVar::X(i as u8),
        }
    }

    pub fn name(self) -> String {
        match self {
            BaseVar::U => "u".into(),
            BaseVar::X(i) => format!("x{i}"),
            BaseVar::V => "v".into(),
        }
    }

    pub fn sym(self) -> Sym {
        let id = self.slot() as u32;
        Sym::declare(id, &self.name(), SymKind::Base).expect("base symbol registry conflict")
    }

    pub fn from_sym(s: Sym) -> Option<BaseVar> {
        let id = s.id();
        if id >> KIND_SHIFT == 0 && (id as usize) < SLOTS {
            Some(BaseVar::from_slot(id as usize))
        } else {
            None
        }
    }
}

impl fmt::Display for BaseVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Field {
    H,
    W(u8),
    /// `h_ij` with `i <= j`, 1-based.
    Hm(u8, u8),
}

const TRI: [(u8, u8); 10] = [(1, 1), (1, 2), (1, 3), (1, 4), (2, 2), (2, 3), (2, 4), (3, 3), (3, 4), (4, 4)];

impl Field {
    pub fn h(i: u8, j: u8) -> Field {
        if i <= j {
            Field::Hm(i, j)
        } else {
            Field::Hm(j, i)
        }
    }

    fn code(self) -> u32 {
        match self {
            Field::H => 0,
            Field::W(i) => i as u32,
            Field::Hm(i, j) => 5 + TRI.iter().position(|&t| t == (i, j)).expect("h index") as u32,
        }
    }

    fn from_code(c: u32) -> Option<Field> {
        match c {
            0 => Some(Field::H),
            1..=4 => Some(Field::W(c as u8)),
            5..=14 => {
                let (i, j) = TRI[(c - 5) as usize];
                Some(Field::Hm(i, j))
            }
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            Field::H => "H".into(),
            Field::W(i) => format!("W{i}"),
            Field::Hm(i, j) => format!("h{i}{j}"),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Derivative counts per base variable, stored by slot.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default, PartialOrd, Ord)]
pub struct MultiIndex {
    counts: [u8; SLOTS],
}

impl MultiIndex {
    pub fn zero() -> MultiIndex {
        MultiIndex::default()
    }

    pub fn from_counts(counts: [u8; SLOTS]) -> MultiIndex {
        MultiIndex { counts }
    }

    pub fn of(vars: &[BaseVar]) -> MultiIndex {
        let mut m = MultiIndex::zero();
        for &b in vars {
            m.counts[b.slot()] += 1;
        }
        m
    }

    pub fn counts(&self) -> [u8; SLOTS] {
        self.counts
    }

    pub fn order(&self) -> u32 {
        self.counts.iter().map(|&c| c as u32).sum()
    }

    pub fn count(&self, b: BaseVar) -> u32 {
        self.counts[b.slot()] as u32
    }

    pub fn plus(&self, b: BaseVar) -> MultiIndex {
        let mut m = *self;
        m.counts[b.slot()] += 1;
        m
    }

    pub fn minus(&self, b: BaseVar) -> Option<MultiIndex> {
        let mut m = *self;
        if m.counts[b.slot()] == 0 {
            return None;
        }
        m.counts[b.slot()] -= 1;
        Some(m)
    }

    pub fn add(&self, o: &MultiIndex) -> MultiIndex {
        let mut m = *self;
        for i in 0..SLOTS {
            m.counts[i] += o.counts[i];
        }
        m
    }

    pub(crate) fn pack(&self, slots: usize) -> u32 {
        let mut p = 0u32;
        for i in 0..slots {
            debug_assert!(self.counts[i] < 16, "multi-index count too large");
            p |= (self.counts[i] as u32) << (4 * i);
        }
        p
    }

    pub(crate) fn unpack(p: u32, slots: usize) -> MultiIndex {
        let mut m = MultiIndex::zero();
        for i in 0..slots {
            m.counts[i] = ((p >> (4 * i)) & 0xF) as u8;
        }
        m
    }

    /// `_`-separated base-variable tokens in canonical order, e.g. `_x1_v_v`.
    pub fn suffix(&self) -> String {
        let mut s = String::new();
        for slot in 0..SLOTS {
            for _ in 0..self.counts[slot] {
                s.push('_');
                s.push_str(&BaseVar::from_slot(slot).name());
            }
        }
        s
    }

    /// All multi-indices over `vars` with order at most `k`, by increasing order.
    pub fn up_to(vars: &[BaseVar], k: u32) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero()];
        let mut layer = vec![MultiIndex::zero()];
        for _ in 0..k {
            let mut next = Vec::new();
            for m in &layer {
                // extend only at or after the last used slot to avoid duplicates
                let last = (0..SLOTS).rev().find(|&s| m.counts[s] > 0).unwrap_or(0);
                for &b in vars {
                    if b.slot() >= last {
                        next.push(m.plus(b));
                    }
                }
            }
            out.extend(next.iter().copied());
            layer = next;
        }
        out
    }
}

/// A jet coordinate `y_σ` of one field.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct JetVar {
    pub field: Field,
    pub index: MultiIndex,
}

impl JetVar {
    pub fn new(field: Field, index: MultiIndex) -> JetVar {
        JetVar { field, index }
    }

    pub fn id(&self) -> u32 {
        (JET_KIND << KIND_SHIFT) | (self.field.code() << 24) | self.index.pack(SLOTS)
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.field.name(), self.index.suffix())
    }

    pub fn sym(&self) -> Sym {
        Sym::declare(self.id(), &self.name(), SymKind::Jet).expect("jet symbol registry conflict")
    }

    pub fn from_sym(s: Sym) -> Option<JetVar> {
        let id = s.id();
        if id >> KIND_SHIFT != JET_KIND {
            return None;
        }
        let field = Field::from_code((id >> 24) & 0x3F)?;
        Some(JetVar { field, index: MultiIndex::unpack(id & 0xFF_FFFF, SLOTS) })
    }

    pub fn order(&self) -> u32 {
        self.index.order()
    }

    pub fn expr(&self) -> Expr {
        Expr::var(self.sym())
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Spacetime dimension and the derived coordinate lists.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Setting {
    pub n: usize,
}

impl Setting {
    pub fn new(n: usize) -> Result<Setting> {
        if !(3..=MAX_N).contains(&n) {
            return Err(KundtError::UnsupportedDimension(n));
        }
        Ok(Setting { n })
    }

    /// Number of transverse coordinates `x^i`.
    pub fn nx(&self) -> usize {
        self.n - 2
    }

    /// Fiber dimension `N = C(n, 2)`.
    pub fn fiber_dim(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    pub fn base_vars(&self) -> Vec<BaseVar> {
        let mut v = vec![BaseVar::U];
        v.extend((1..=self.nx() as u8).map(BaseVar::X));
        v.push(BaseVar::V);
        v
    }

    pub fn xs(&self) -> Vec<BaseVar> {
        (1..=self.nx() as u8).map(BaseVar::X).collect()
    }

    pub fn fields(&self) -> Vec<Field> {
        let m = self.nx() as u8;
        let mut v = vec![Field::H];
        v.extend((1..=m).map(Field::W));
        for i in 1..=m {
            for j in i..=m {
                v.push(Field::Hm(i, j));
            }
        }
        v
    }

    pub fn base_sym(&self, b: BaseVar) -> Sym {
        b.sym()
    }

    pub fn x(&self, i: usize) -> BaseVar {
        BaseVar::X(i as u8)
    }
}

/// Which jet equation the computations live on.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum EqKind {
    /// The full jet space, no equations.
    Jet,
    /// Kundt: `(h_ij)_v = 0` and prolongations.
    E,
    /// Degenerate Kundt: additionally `(W_i)_vv = 0` and `H_vvv = 0`.
    ED,
    /// Kundt with `(W_i)_vv = 0` but no condition on `H`.
    EW,
}

impl EqKind {
    pub fn name(self) -> &'static str {
        match self {
            EqKind::Jet => "J",
            EqKind::E => "E",
            EqKind::ED => "ED",
            EqKind::EW => "EW",
        }
    }

    pub fn parse(s: &str) -> Option<EqKind> {
        match s.to_ascii_uppercase().as_str() {
            "J" | "JET" => Some(EqKind::Jet),
            "E" => Some(EqKind::E),
            "ED" => Some(EqKind::ED),
            "EW" => Some(EqKind::EW),
            _ => None,
        }
    }
}

impl fmt::Display for EqKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An equation manifold in a fixed dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct EquationSystem {
    pub kind: EqKind,
    pub setting: Setting,
}

impl EquationSystem {
    pub fn new(kind: EqKind, n: usize) -> Result<EquationSystem> {
        Ok(EquationSystem { kind, setting: Setting::new(n)? })
    }

    pub fn n(&self) -> usize {
        self.setting.n
    }

    pub fn eliminates(&self, j: &JetVar) -> bool {
        let vc = j.index.count(BaseVar::V);
        match (self.kind, j.field) {
            (EqKind::Jet, _) => false,
            (_, Field::Hm(..)) => vc >= 1,
            (EqKind::ED | EqKind::EW, Field::W(_)) => vc >= 2,
            (EqKind::ED, Field::H) => vc >= 3,
            _ => false,
        }
    }

    /// Whether the symbol is an eliminated jet coordinate.
    pub fn kills(&self, s: Sym) -> bool {
        JetVar::from_sym(s).is_some_and(|j| self.eliminates(&j))
    }

    /// Sets every eliminated jet coordinate to zero.
    pub fn restrict(&self, e: &Expr) -> Result<Expr> {
        if self.kind == EqKind::Jet {
            return Ok(e.clone());
        }
        e.kill_vars(&|s| self.kills(s)).map_err(|err| KundtError::SingularOnEquation(err.to_string()))
    }

    pub fn restrict_poly(&self, p: &Poly) -> Poly {
        if self.kind == EqKind::Jet {
            return p.clone();
        }
        p.kill_vars(&|s| self.kills(s))
    }

    /// Image of a symbol under the total derivative in direction `dir`;
    /// group-parameter jets are differentiated as functions of `(u, x)`.
    pub fn derivative_image(&self, s: Sym, dir: BaseVar) -> Option<Poly> {
        if let Some(b) = BaseVar::from_sym(s) {
            return (b == dir).then(Poly::one);
        }
        if let Some(j) = JetVar::from_sym(s) {
            let next = JetVar::new(j.field, j.index.plus(dir));
            if self.eliminates(&next) {
                return None;
            }
            return Some(Poly::var(next.sym()));
        }
        if let Some(p) = ParamJet::from_sym(s) {
            return p.derivative(dir).map(|q| Poly::var(q.sym()));
        }
        None
    }

    /// Total derivative `D_dir`, restricted to the equation.
    pub fn total_derivative(&self, e: &Expr, dir: BaseVar) -> Expr {
        e.derive_with(&|s| self.derivative_image(s, dir))
    }

    pub fn total_derivative_poly(&self, p: &Poly, dir: BaseVar) -> Poly {
        p.derive_with(&|s| self.derivative_image(s, dir))
    }

    /// Iterated total derivative along a multi-index.
    pub fn total_derivative_multi(&self, e: &Expr, m: &MultiIndex) -> Expr {
        let mut r = e.clone();
        for slot in 0..SLOTS {
            for _ in 0..m.counts[slot] {
                r = self.total_derivative(&r, BaseVar::from_slot(slot));
            }
        }
        r
    }

    /// Non-eliminated jet coordinates of order at most `k`, fields in the
    /// canonical order and indices by increasing order.
    pub fn jets(&self, k: u32) -> Vec<JetVar> {
        let bv = self.setting.base_vars();
        let idx = MultiIndex::up_to(&bv, k);
        let mut out = Vec::new();
        for f in self.setting.fields() {
            for m in &idx {
                let j = JetVar::new(f, *m);
                if !self.eliminates(&j) {
                    out.push(j);
                }
            }
        }
        out
    }

    /// Dimension by direct enumeration of the coordinates.
    pub fn dim_enumerated(&self, k: u32) -> usize {
        self.setting.n + self.jets(k).len()
    }

    /// Closed-form dimension of the equation manifold of order `k`.
    pub fn dim(&self, k: u32) -> i64 {
        let n = self.setting.n as i64;
        match self.kind {
            EqKind::Jet => dim_jet(n, k as i64),
            EqKind::E => dim_e(n, k as i64),
            EqKind::ED => dim_ed(n, k as i64),
            EqKind::EW => self.dim_enumerated(k) as i64,
        }
    }

    /// Highest jet order occurring in `e`.
    pub fn jet_order(e: &Expr) -> u32 {
        e.vars().into_iter().filter_map(JetVar::from_sym).map(|j| j.order()).max().unwrap_or(0)
    }

    /// Resolves an identifier: base variables, jets (with `n = 3` aliases and
    /// concatenated shorthand such as `H_uvv`) and group-parameter jets.
    /// Eliminated jets resolve to zero.
    pub fn resolve(&self, name: &str) -> Option<Expr> {
        if let Some(b) = self.parse_base(name) {
            return Some(Expr::var(b.sym()));
        }
        if let Some(j) = self.parse_jet(name) {
            if self.eliminates(&j) {
                return Some(Expr::zero());
            }
            return Some(j.expr());
        }
        if let Some(p) = ParamJet::parse(name, &self.setting) {
            return Some(Expr::var(p.sym()));
        }
        None
    }

    pub fn parse(&self, text: &str) -> Result<Expr> {
        Ok(parse_with(text, &|name| self.resolve(name))?)
    }

    fn parse_base(&self, name: &str) -> Option<BaseVar> {
        let toks = tokens(name, self.setting.n)?;
        if toks.len() == 1 {
            Some(toks[0])
        } else {
            None
        }
    }

    pub fn parse_jet(&self, name: &str) -> Option<JetVar> {
        let (head, rest) = match name.find('_') {
            Some(i) => (&name[..i], &name[i + 1..]),
            None => (name, ""),
        };
        let field = parse_field(head, &self.setting)?;
        let mut idx = MultiIndex::zero();
        if !rest.is_empty() {
            for seg in rest.split('_') {
                for b in tokens(seg, self.setting.n)? {
                    idx = idx.plus(b);
                }
            }
        }
        if idx.counts.iter().any(|&c| c >= 16) {
            return None;
        }
        Some(JetVar::new(field, idx))
    }

    /// Random point of the equation: base variables at the origin unless
    /// `base` supplies values, jets of order `<= k` with numerators in
    /// `[-9, 9]` and denominators in `{1, 2, 3}`, `h` positive definite.
    pub fn random_point(&self, k: u32, rng: &mut impl Rng) -> HashMap<Sym, Q> {
        let mut pt = HashMap::new();
        for b in self.setting.base_vars() {
            pt.insert(b.sym(), Q::zero());
        }
        for j in self.jets(k) {
            pt.insert(j.sym(), small_rational(rng));
        }
        self.fix_h_positive(&mut pt, rng);
        pt
    }

    /// Resamples the order-0 `h` block until it is positive definite.
    pub fn fix_h_positive(&self, pt: &mut HashMap<Sym, Q>, rng: &mut impl Rng) {
        let m = self.setting.nx();
        loop {
            let mat: Vec<Vec<Q>> = (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            let f = Field::h(i as u8 + 1, j as u8 + 1);
                            pt.get(&JetVar::new(f, MultiIndex::zero()).sym()).cloned().unwrap_or_default()
                        })
                        .collect()
                })
                .collect();
            if positive_definite(&mat) {
                return;
            }
            for i in 1..=m as u8 {
                for j in i..=m as u8 {
                    let s = JetVar::new(Field::Hm(i, j), MultiIndex::zero()).sym();
                    pt.insert(s, small_rational(rng));
                }
            }
        }
    }
}

pub fn small_rational(rng: &mut impl Rng) -> Q {
    Q::new(rng.gen_range(-9..=9), rng.gen_range(1..=3))
}

/// Sylvester's criterion on leading principal minors.
pub fn positive_definite(m: &[Vec<Q>]) -> bool {
    let n = m.len();
    // Gaussian elimination without pivoting; pivots are the minor ratios
    let mut a: Vec<Vec<Q>> = m.to_vec();
    for c in 0..n {
        if a[c][c].signum() <= 0 {
            return false;
        }
        for r in (c + 1)..n {
            let f = &a[r][c] / &a[c][c];
            for j in c..n {
                let t = &f * &a[c][j];
                a[r][j] = &a[r][j] - &t;
            }
        }
    }
    true
}

fn parse_field(head: &str, s: &Setting) -> Option<Field> {
    let m = s.nx() as u8;
    match head {
        "H" => return Some(Field::H),
        "W" if m == 1 => return Some(Field::W(1)),
        "h" if m == 1 => return Some(Field::Hm(1, 1)),
        _ => {}
    }
    let digits = |t: &str| -> Option<Vec<u8>> { t.chars().map(|c| c.to_digit(10).map(|d| d as u8)).collect() };
    if let Some(t) = head.strip_prefix('W') {
        let d = digits(t)?;
        if d.len() == 1 && d[0] >= 1 && d[0] <= m {
            return Some(Field::W(d[0]));
        }
    }
    if let Some(t) = head.strip_prefix('h') {
        let d = digits(t)?;
        if d.len() == 2 && d.iter().all(|&x| x >= 1 && x <= m) {
            return Some(Field::h(d[0], d[1]));
        }
    }
    None
}

/// Splits `uvx1` style strings into base variables; `x` alone means `x1` when `n = 3`.
fn tokens(seg: &str, n: usize) -> Option<Vec<BaseVar>> {
    let m = n - 2;
    let b = seg.as_bytes();
    if b.is_empty() {
        return None;
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        match b[i] {
            b'u' => {
                out.push(BaseVar::U);
                i += 1;
            }
            b'v' => {
                out.push(BaseVar::V);
                i += 1;
            }
            b'x' => {
                i += 1;
                if i < b.len() && b[i].is_ascii_digit() {
                    let d = (b[i] - b'0') as usize;
                    if d == 0 || d > m {
                        return None;
                    }
                    out.push(BaseVar::X(d as u8));
                    i += 1;
                } else if m == 1 {
                    out.push(BaseVar::X(1));
                } else {
                    return None;
                }
            }
            _ => return None,
        }
    }
    Some(out)
}

pub fn dim_jet(n: i64, k: i64) -> i64 {
    n + binom(n, 2) * binom(n + k, n)
}

pub fn dim_e(n: i64, k: i64) -> i64 {
    n + (n - 1) * binom(n + k, n) + binom(n - 1, 2) * binom(n + k - 1, n - 1)
}

pub fn dim_ed(n: i64, k: i64) -> i64 {
    match k {
        0 | 1 => dim_e(n, k),
        2 => (binom(n + 1, 2) + 1) * (binom(n, 2) + 1),
        _ => dim_e(n, k) - (n - 2) * binom(n + k - 2, n) - binom(n + k - 3, n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_ids_round_trip() {
        let e = EquationSystem::new(EqKind::Jet, 4).unwrap();
        let j = e.parse_jet("W1_x1_v_v").unwrap();
        assert_eq!(j.name(), "W1_x1_v_v");
        assert_eq!(JetVar::from_sym(j.sym()), Some(j));
        assert_eq!(e.parse_jet("h21_u").unwrap().name(), "h12_u");
        assert_eq!(e.parse_jet("H_uvv").unwrap().name(), "H_u_v_v");
        assert_eq!(e.parse_jet("W2_x1x2").unwrap().name(), "W2_x1_x2");
        assert!(e.parse_jet("W3").is_none());
        let e3 = EquationSystem::new(EqKind::Jet, 3).unwrap();
        assert_eq!(e3.parse_jet("W_xv").unwrap().name(), "W1_x1_v");
        assert_eq!(e3.parse_jet("h").unwrap().name(), "h11");
    }

    #[test]
    fn enumerated_dimensions_match_closed_forms() {
        for n in 3..=5 {
            for k in 0..=4 {
                let e = EquationSystem::new(EqKind::E, n).unwrap();
                let ed = EquationSystem::new(EqKind::ED, n).unwrap();
                let j = EquationSystem::new(EqKind::Jet, n).unwrap();
                assert_eq!(e.dim_enumerated(k) as i64, e.dim(k), "E n={n} k={k}");
                assert_eq!(ed.dim_enumerated(k) as i64, ed.dim(k), "ED n={n} k={k}");
                assert_eq!(j.dim_enumerated(k) as i64, j.dim(k), "J n={n} k={k}");
            }
        }
    }

    #[test]
    fn multi_index_enumeration_counts() {
        let s = Setting::new(4).unwrap();
        assert_eq!(MultiIndex::up_to(&s.base_vars(), 3).len() as i64, binom(7, 4));
    }

    #[test]
    fn positive_definite_check() {
        let q = |a: i64| Q::from_i64(a);
        assert!(positive_definite(&[vec![q(2), q(1)], vec![q(1), q(2)]]));
        assert!(!positive_definite(&[vec![q(1), q(2)], vec![q(2), q(1)]]));
    }
}
