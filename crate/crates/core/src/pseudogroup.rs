//! The shape-preserving pseudogroup of the Kundt ansatz.
//!
//! A generator is `ξ = c ∂_u + a^i ∂_{x^i} + (b - c' v) ∂_v` with `a^i, b`
//! functions of `(u, x)` and `c` a function of `u`. Its jets are the symbolic
//! [`ParamJet`]s; a concrete generator uses polynomials in the base variables
//! instead. Both go through the same lift and prolongation code.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use symexpr::linalg;
use symexpr::{Expr, Mono, Poly, Sym, SymKind, Q};

use crate::error::{KundtError, Result};
use crate::exec;
use crate::jets::{binomial, BaseVar, EqKind, EquationSystem, Field, JetVar, MultiIndex, Setting, PARAM_KIND};

const PARAM_SLOTS: usize = 5;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Param {
    /// `a^i`, 1-based.
    A(u8),
    B,
    C,
}

impl Param {
    fn code(self) -> u32 {
        match self {
            Param::A(i) => i as u32 - 1,
            Param::B => 4,
            Param::C => 5,
        }
    }

    fn from_code(c: u32) -> Option<Param> {
        match c {
            0..=3 => Some(Param::A(c as u8 + 1)),
            4 => Some(Param::B),
            5 => Some(Param::C),
            _ => None,
        }
    }

    fn name(self) -> String {
        match self {
            Param::A(i) => format!("a{i}"),
            Param::B => "b".into(),
            Param::C => "c".into(),
        }
    }
}

/// A jet `∂_σ a^i`, `∂_σ b` or `c^{(m)}` of the generator data.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct ParamJet {
    pub param: Param,
    pub index: MultiIndex,
}

impl ParamJet {
    pub fn new(param: Param, index: MultiIndex) -> ParamJet {
        debug_assert_eq!(index.count(BaseVar::V), 0);
        debug_assert!(param != Param::C || index.order() == index.count(BaseVar::U));
        ParamJet { param, index }
    }

    pub fn id(&self) -> u32 {
        (PARAM_KIND << 30) | (self.param.code() << 20) | self.index.pack(PARAM_SLOTS)
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.param.name(), self.index.suffix())
    }

    pub fn sym(&self) -> Sym {
        Sym::declare(self.id(), &self.name(), SymKind::Param).expect("parameter symbol registry conflict")
    }

    pub fn from_sym(s: Sym) -> Option<ParamJet> {
        let id = s.id();
        if id >> 30 != PARAM_KIND {
            return None;
        }
        let param = Param::from_code((id >> 20) & 0x3FF)?;
        Some(ParamJet { param, index: MultiIndex::unpack(id & 0xF_FFFF, PARAM_SLOTS) })
    }

    pub fn order(&self) -> u32 {
        self.index.order()
    }

    /// `D_dir` of this jet; zero along `v`, and for `c` along any `x`.
    pub fn derivative(&self, dir: BaseVar) -> Option<ParamJet> {
        match (self.param, dir) {
            (_, BaseVar::V) => None,
            (Param::C, BaseVar::X(_)) => None,
            _ => Some(ParamJet { param: self.param, index: self.index.plus(dir) }),
        }
    }

    /// Parses `a1_u_x1`, `b_x2`, `c_u_u`; for `n = 3` also `a`, `a_x`, `c_uu`.
    pub fn parse(name: &str, s: &Setting) -> Option<ParamJet> {
        let (head, rest) = match name.find('_') {
            Some(i) => (&name[..i], &name[i + 1..]),
            None => (name, ""),
        };
        let m = s.nx() as u8;
        let param = match head {
            "b" => Param::B,
            "c" => Param::C,
            "a" if m == 1 => Param::A(1),
            _ => {
                let d: u8 = head.strip_prefix('a')?.parse().ok()?;
                if d == 0 || d > m {
                    return None;
                }
                Param::A(d)
            }
        };
        let mut idx = MultiIndex::zero();
        if !rest.is_empty() {
            let probe = EquationSystem { kind: EqKind::Jet, setting: *s };
            // reuse the jet-name tokenizer through a dummy field
            let j = probe.parse_jet(&format!("H_{rest}"))?;
            idx = j.index;
        }
        if idx.count(BaseVar::V) > 0 {
            return None;
        }
        if param == Param::C && idx.order() != idx.count(BaseVar::U) {
            return None;
        }
        if idx.counts().iter().any(|&c| c >= 16) {
            return None;
        }
        Some(ParamJet { param, index: idx })
    }

    /// Parameter jets that enter the order-`k` prolongation: `a^i`, `b` up
    /// to order `k + 1` over `(u, x)` and `c` up to order `k + 2`.
    pub fn basis(s: &Setting, k: u32) -> Vec<ParamJet> {
        let mut ux = vec![BaseVar::U];
        ux.extend(s.xs());
        let idx = MultiIndex::up_to(&ux, k + 1);
        let mut out = Vec::new();
        for i in 1..=s.nx() as u8 {
            out.extend(idx.iter().map(|m| ParamJet::new(Param::A(i), *m)));
        }
        out.extend(idx.iter().map(|m| ParamJet::new(Param::B, *m)));
        out.extend(MultiIndex::up_to(&[BaseVar::U], k + 2).into_iter().map(|m| ParamJet::new(Param::C, m)));
        out
    }
}

impl fmt::Display for ParamJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Generator data, either symbolic (parameter jets) or concrete polynomials
/// in the base variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub a: Vec<Poly>,
    pub b: Poly,
    pub c: Poly,
}

impl Generator {
    pub fn symbolic(s: &Setting) -> Generator {
        let z = MultiIndex::zero();
        Generator {
            a: (1..=s.nx() as u8).map(|i| Poly::var(ParamJet::new(Param::A(i), z).sym())).collect(),
            b: Poly::var(ParamJet::new(Param::B, z).sym()),
            c: Poly::var(ParamJet::new(Param::C, z).sym()),
        }
    }

    /// Random concrete generator with small integer coefficients; `a^i, b`
    /// of degree `<= deg` in `(u, x)`, `c` of degree `<= deg + 1` in `u`.
    pub fn random(s: &Setting, deg: u32, rng: &mut impl Rng) -> Generator {
        let mut ux = vec![BaseVar::U];
        ux.extend(s.xs());
        Generator {
            a: (0..s.nx()).map(|_| random_poly(&ux, deg, rng)).collect(),
            b: random_poly(&ux, deg, rng),
            c: random_poly(&[BaseVar::U], deg + 1, rng),
        }
    }

    /// Coefficients `ξ^μ` on the base, in the order `u, x1.., v`.
    pub fn base_coefficients(&self, eq: &EquationSystem) -> Vec<(BaseVar, Poly)> {
        let mut out = vec![(BaseVar::U, self.c.clone())];
        for (i, a) in self.a.iter().enumerate() {
            out.push((BaseVar::X(i as u8 + 1), a.clone()));
        }
        let cp = eq.total_derivative_poly(&self.c, BaseVar::U);
        out.push((BaseVar::V, self.b.sub(&cp.mul(&Poly::var(BaseVar::V.sym())))));
        out
    }

    /// Concrete parameter values: the jet `p` of this generator.
    pub fn jet_value(&self, p: &ParamJet, eq: &EquationSystem) -> Poly {
        let mut f = match p.param {
            Param::A(i) => self.a[i as usize - 1].clone(),
            Param::B => self.b.clone(),
            Param::C => self.c.clone(),
        };
        let c = p.index.counts();
        for (slot, &cnt) in c.iter().enumerate() {
            for _ in 0..cnt {
                f = eq.total_derivative_poly(&f, BaseVar::from_slot(slot));
            }
        }
        f
    }

    /// Bracket `[ξ, η]^μ = ξ(η^μ) - η(ξ^μ)` of concrete generators.
    pub fn bracket(&self, other: &Generator, eq: &EquationSystem) -> Result<Generator> {
        let xs = self.base_coefficients(eq);
        let ys = other.base_coefficients(eq);
        let apply = |field: &[(BaseVar, Poly)], f: &Poly| -> Poly {
            let mut acc = Poly::zero();
            for (b, coef) in field {
                acc = acc.add_owned(coef.mul(&f.diff(b.sym())));
            }
            acc
        };
        let comps: Vec<Poly> = xs.iter().zip(&ys).map(|((_, x), (_, y))| apply(&xs, y).sub(&apply(&ys, x))).collect();
        let m = comps.len();
        let v = BaseVar::V.sym();
        let c = comps[0].clone();
        let a = comps[1..m - 1].to_vec();
        let b = comps[m - 1].partial_eval(&|s| (s == v).then(Q::zero));
        let g = Generator { a, b, c };
        if g.base_coefficients(eq)[m - 1].1 != comps[m - 1] || g.c.contains_var(v) || g.a.iter().any(|p| p.contains_var(v)) {
            return Err(KundtError::GeneratorMismatch);
        }
        Ok(g)
    }
}

fn random_poly(vars: &[BaseVar], deg: u32, rng: &mut impl Rng) -> Poly {
    let terms = MultiIndex::up_to(vars, deg)
        .into_iter()
        .filter_map(|m| {
            let c: i64 = rng.gen_range(-3..=3);
            if c == 0 {
                return None;
            }
            let pairs: Vec<(Sym, u32)> = (0..crate::jets::SLOTS)
                .filter(|&s| m.counts()[s] > 0)
                .map(|s| (BaseVar::from_slot(s).sym(), m.counts()[s] as u32))
                .collect();
            Some((Mono::from_pairs(&pairs), Q::from_i64(c)))
        })
        .collect();
    Poly::from_terms(terms)
}

/// `ξ` lifted to the bundle of metric components.
#[derive(Clone, Debug)]
pub struct LiftedField {
    pub base: Vec<(BaseVar, Poly)>,
    pub fiber: Vec<(Field, Poly)>,
}

pub fn lift(g: &Generator, eq: &EquationSystem) -> LiftedField {
    let s = eq.setting;
    let m = s.nx() as u8;
    let d = |p: &Poly, b: BaseVar| eq.total_derivative_poly(p, b);
    let y = |f: Field| Poly::var(JetVar::new(f, MultiIndex::zero()).sym());
    let cp = d(&g.c, BaseVar::U);
    let cpp = d(&cp, BaseVar::U);
    let a_u: Vec<Poly> = g.a.iter().map(|a| d(a, BaseVar::U)).collect();
    // a_x[l][i] = ∂_{x^i} a^l
    let a_x: Vec<Vec<Poly>> = g.a.iter().map(|a| (1..=m).map(|i| d(a, BaseVar::X(i))).collect()).collect();

    let mut fiber = Vec::new();
    // H
    let mut h = cp.scale(&Q::from_i64(2)).mul(&y(Field::H));
    h = h.sub(&cpp.mul(&Poly::var(BaseVar::V.sym())));
    h = h.add(&d(&g.b, BaseVar::U));
    for j in 1..=m {
        h = h.add_owned(a_u[j as usize - 1].mul(&y(Field::W(j))));
    }
    fiber.push((Field::H, h.neg()));
    for i in 1..=m {
        let mut w = cp.mul(&y(Field::W(i)));
        for j in 1..=m {
            w = w.add_owned(a_x[j as usize - 1][i as usize - 1].mul(&y(Field::W(j))));
        }
        w = w.add(&d(&g.b, BaseVar::X(i)));
        for j in 1..=m {
            w = w.add_owned(a_u[j as usize - 1].mul(&y(Field::h(i, j))).scale(&Q::from_i64(2)));
        }
        fiber.push((Field::W(i), w.neg()));
    }
    for i in 1..=m {
        for j in i..=m {
            let mut t = Poly::zero();
            for l in 1..=m {
                t = t.add_owned(a_x[l as usize - 1][i as usize - 1].mul(&y(Field::h(l, j))));
                t = t.add_owned(a_x[l as usize - 1][j as usize - 1].mul(&y(Field::h(i, l))));
            }
            fiber.push((Field::Hm(i, j), t.neg()));
        }
    }
    LiftedField { base: g.base_coefficients(eq), fiber }
}

/// Prolongation `ξ^{(k)}` restricted to an equation.
#[derive(Clone, Debug)]
pub struct ProlongedField {
    pub eq: EquationSystem,
    pub order: u32,
    pub base: Vec<(BaseVar, Poly)>,
    coeffs: HashMap<JetVar, Poly>,
    /// `dxi[μ][ν] = D_μ ξ^ν`, indexed by slot.
    dxi: Vec<Vec<Poly>>,
}

impl ProlongedField {
    pub fn new(g: &Generator, eq: &EquationSystem, k: u32) -> ProlongedField {
        let l = lift(g, eq);
        let mut dxi = vec![vec![Poly::zero(); crate::jets::SLOTS]; crate::jets::SLOTS];
        for mu in eq.setting.base_vars() {
            for (nu, xi) in &l.base {
                dxi[mu.slot()][nu.slot()] = eq.total_derivative_poly(xi, mu);
            }
        }
        let mut coeffs = HashMap::new();
        for (f, p) in l.fiber {
            coeffs.insert(JetVar::new(f, MultiIndex::zero()), p);
        }
        let mut pf = ProlongedField { eq: *eq, order: 0, base: l.base, coeffs, dxi };
        pf.extend(k);
        pf
    }

    /// Adds the coefficients of orders `order + 1 ..= k`.
    pub fn extend(&mut self, k: u32) {
        let all = self.eq.jets(k);
        for m in (self.order + 1)..=k {
            let layer: Vec<JetVar> = all.iter().filter(|j| j.order() == m).copied().collect();
            let this = &*self;
            let new = exec::map(&layer, |j| {
                let dir = (0..crate::jets::SLOTS).rev().map(BaseVar::from_slot).find(|b| j.index.count(*b) > 0).unwrap();
                let parent = JetVar::new(j.field, j.index.minus(dir).unwrap());
                this.step(&parent, dir)
            });
            for (j, p) in layer.into_iter().zip(new) {
                self.coeffs.insert(j, p);
            }
            self.order = m;
        }
    }

    /// `D_dir φ_σ - Σ_ν D_dir(ξ^ν) y_{σ+ν}` on the equation.
    fn step(&self, parent: &JetVar, dir: BaseVar) -> Poly {
        let mut r = self.eq.total_derivative_poly(&self.coeffs[parent], dir);
        for nu in self.eq.setting.base_vars() {
            let dx = &self.dxi[dir.slot()][nu.slot()];
            if dx.is_zero() {
                continue;
            }
            let y = JetVar::new(parent.field, parent.index.plus(nu));
            if self.eq.eliminates(&y) {
                continue;
            }
            r = r.sub(&dx.mul(&Poly::var(y.sym())));
        }
        r
    }

    pub fn coefficient(&self, j: &JetVar) -> Option<&Poly> {
        self.coeffs.get(j)
    }

    /// Coefficient of `∂_s` for a base or jet symbol.
    pub fn coefficient_of(&self, s: Sym) -> Option<Poly> {
        if let Some(b) = BaseVar::from_sym(s) {
            return self.base.iter().find(|(x, _)| *x == b).map(|(_, p)| p.clone());
        }
        JetVar::from_sym(s).and_then(|j| self.coeffs.get(&j).cloned())
    }

    /// `L_ξ f`; `f` must have jet order at most the prolongation order.
    pub fn apply(&self, f: &Expr) -> Result<Expr> {
        let f = self.eq.restrict(f)?;
        let ord = EquationSystem::jet_order(&f);
        if ord > self.order {
            return Err(KundtError::Invalid(format!("jet order {ord} exceeds prolongation order {}", self.order)));
        }
        Ok(f.derive_with(&|s| self.coefficient_of(s)))
    }

    /// Eliminated jets (reachable from a kept parent) whose coefficient does
    /// not vanish on the equation; empty iff the field is tangent to it.
    pub fn tangency_residuals(&self) -> Vec<JetVar> {
        let k = self.order;
        let bv = self.eq.setting.base_vars();
        let mut out = BTreeSet::new();
        for parent in self.eq.jets(k.saturating_sub(1)) {
            for &dir in &bv {
                let q = JetVar::new(parent.field, parent.index.plus(dir));
                if q.order() <= k && self.eq.eliminates(&q) && !self.step(&parent, dir).is_zero() {
                    out.insert(q);
                }
            }
        }
        out.into_iter().collect()
    }

    /// Splits each coefficient by parameter jet: `coord -> (param -> C)`.
    /// Only meaningful for the symbolic generator, where every coefficient
    /// is linear in parameter jets.
    pub fn split(&self) -> HashMap<Sym, BTreeMap<Sym, Poly>> {
        let mut out = HashMap::new();
        for (b, p) in &self.base {
            out.insert(b.sym(), split_params(p));
        }
        for (j, p) in &self.coeffs {
            out.insert(j.sym(), split_params(p));
        }
        out
    }
}

/// Splits a polynomial linear in parameter jets into its parameter
/// coefficients. Terms without a parameter go under no key and are dropped.
pub fn split_params(p: &Poly) -> BTreeMap<Sym, Poly> {
    let mut acc: BTreeMap<Sym, Vec<(Mono, Q)>> = BTreeMap::new();
    for (m, c) in p.terms() {
        if let Some(&(s, _)) = m.vars().iter().find(|(s, _)| s.kind() == SymKind::Param) {
            let (_, rest) = m.split_var(s);
            acc.entry(s).or_default().push((rest, c.clone()));
        }
    }
    acc.into_iter().map(|(s, t)| (s, Poly::from_terms(t))).collect()
}

/// The symbolic prolongation, cached per equation and extended on demand.
#[derive(Debug)]
pub struct GenericField {
    pub field: ProlongedField,
    pub split: HashMap<Sym, BTreeMap<Sym, Poly>>,
}

static CACHE: Lazy<Mutex<HashMap<EquationSystem, Arc<GenericField>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

pub fn generic(eq: &EquationSystem, k: u32) -> Arc<GenericField> {
    let cached = CACHE.lock().get(eq).cloned();
    if let Some(g) = &cached {
        if g.field.order >= k {
            return g.clone();
        }
    }
    let field = match cached {
        Some(g) => {
            let mut f = g.field.clone();
            f.extend(k);
            f
        }
        None => ProlongedField::new(&Generator::symbolic(&eq.setting), eq, k),
    };
    let split = field.split();
    let g = Arc::new(GenericField { field, split });
    let mut cache = CACHE.lock();
    match cache.get(eq) {
        Some(c) if c.field.order >= k => c.clone(),
        _ => {
            cache.insert(*eq, g.clone());
            g
        }
    }
}

/// `L_ξ f` for the generic symbolic generator, restricted to `eq`.
pub fn lie_derivative(f: &Expr, eq: &EquationSystem) -> Result<Expr> {
    let f = eq.restrict(f)?;
    let k = EquationSystem::jet_order(&f);
    let g = generic(eq, k);
    g.field.apply(&f)
}

/// Parameter jets that occur in the coefficients of the symbols of `f`.
pub fn params_for(g: &GenericField, f: &Expr) -> Vec<Sym> {
    let mut set = BTreeSet::new();
    for s in f.vars() {
        if let Some(m) = g.split.get(&s) {
            set.extend(m.keys().copied());
        }
    }
    set.into_iter().collect()
}

/// `X_p f` for a single parameter jet `p`.
pub fn param_action(g: &GenericField, f: &Expr, p: Sym) -> Expr {
    f.derive_with(&|s| g.split.get(&s).and_then(|m| m.get(&p)).cloned())
}

/// Whether `L_ξ f` vanishes identically; checked one parameter jet at a time.
pub fn is_absolute_invariant(f: &Expr, eq: &EquationSystem) -> Result<bool> {
    Ok(first_violation(f, eq)?.is_none())
}

/// First parameter jet whose component of `L_ξ f` is nonzero, with that
/// component.
pub fn first_violation(f: &Expr, eq: &EquationSystem) -> Result<Option<(ParamJet, Expr)>> {
    let f = eq.restrict(f)?;
    let k = EquationSystem::jet_order(&f);
    let g = generic(eq, k);
    let params = params_for(&g, &f);
    Ok(exec::find_first(&params, |&p| {
        let r = param_action(&g, &f, p);
        (!r.is_zero()).then(|| (ParamJet::from_sym(p).unwrap(), r))
    }))
}

/// Multiplier `μ = L_ξ f / f` when it is a polynomial linear in parameter
/// jets, i.e. when `f` is a relative invariant.
pub fn relative_multiplier(f: &Expr, eq: &EquationSystem) -> Result<Option<Expr>> {
    let f = eq.restrict(f)?;
    if f.is_zero() {
        return Err(KundtError::Invalid("function vanishes on the equation".into()));
    }
    let lf = lie_derivative(&f, eq)?;
    let mu = lf.try_div(&f)?.normalize();
    let Some(p) = mu.as_poly() else { return Ok(None) };
    let linear = p.terms().iter().all(|(m, _)| {
        let deg: u32 = m.vars().iter().filter(|(s, _)| s.kind() == SymKind::Param).map(|(_, e)| *e).sum();
        deg == 1
    });
    Ok(linear.then_some(mu))
}

/// `ω(ξ)`: parameter jets in `μ` replaced by the jets of a concrete generator.
pub fn cocycle_value(mu: &Expr, g: &Generator, eq: &EquationSystem) -> Result<Expr> {
    let mut map = HashMap::new();
    for s in mu.vars() {
        if let Some(p) = ParamJet::from_sym(s) {
            map.insert(s, Expr::from_poly(g.jet_value(&p, eq)));
        }
    }
    Ok(mu.substitute(&map)?)
}

/// `ξ(ω(η)) - η(ω(ξ)) - ω([ξ, η])` for concrete generators.
pub fn cocycle_defect(mu: &Expr, xi: &Generator, eta: &Generator, eq: &EquationSystem) -> Result<Expr> {
    let k = EquationSystem::jet_order(mu).max(1);
    let px = ProlongedField::new(xi, eq, k);
    let py = ProlongedField::new(eta, eq, k);
    let br = xi.bracket(eta, eq)?;
    let a = px.apply(&cocycle_value(mu, eta, eq)?)?;
    let b = py.apply(&cocycle_value(mu, xi, eq)?)?;
    let c = cocycle_value(mu, &br, eq)?;
    Ok(a.sub(&b).sub(&c))
}

/// `[pr ξ, pr η] f - pr [ξ, η] f` for concrete generators at order `k`.
pub fn closure_defect(xi: &Generator, eta: &Generator, f: &Expr, eq: &EquationSystem, k: u32) -> Result<Expr> {
    let px = ProlongedField::new(xi, eq, k);
    let py = ProlongedField::new(eta, eq, k);
    let pb = ProlongedField::new(&xi.bracket(eta, eq)?, eq, k);
    let lhs = px.apply(&py.apply(f)?)?.sub(&py.apply(&px.apply(f)?)?);
    Ok(lhs.sub(&pb.apply(f)?))
}

/// Random polynomial in the base variables and the kept jets of order `<= k`.
pub fn random_jet_function(eq: &EquationSystem, k: u32, terms: usize, rng: &mut impl Rng) -> Expr {
    let mut vars: Vec<Sym> = eq.setting.base_vars().iter().map(|b| b.sym()).collect();
    vars.extend(eq.jets(k).iter().map(|j| j.sym()));
    let mut acc = Vec::new();
    for _ in 0..terms {
        let d = rng.gen_range(1..=3);
        let pairs: Vec<(Sym, u32)> = (0..d).map(|_| (vars[rng.gen_range(0..vars.len())], 1)).collect();
        let mut m = Mono::one();
        for (s, e) in pairs {
            m = m.mul(&Mono::var_pow(s, e));
        }
        acc.push((m, Q::from_i64(rng.gen_range(1..=5))));
    }
    Expr::from_poly(Poly::from_terms(acc))
}

/// Result of an orbit-dimension computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitReport {
    pub kind: EqKind,
    pub n: usize,
    pub k: u32,
    pub rank: usize,
    /// Rank at each sampled point.
    pub ranks: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub closed_form: i64,
    pub warning: Option<String>,
}

/// Closed-form orbit dimension in general position.
pub fn orbit_dim_closed_form(kind: EqKind, n: usize, k: u32) -> i64 {
    let eq = EquationSystem { kind, setting: Setting { n } };
    let n = n as i64;
    match k {
        0 => eq.dim(0),
        1 => eq.dim(1) - 1,
        _ => (n - 1) * binomial(n + k as i64, n - 1) + k as i64 + 2,
    }
}

/// Rows of the evaluated orbit matrix for the given parameter jets.
fn orbit_matrix(g: &GenericField, params: &[ParamJet], cols: &[Sym], pt: &HashMap<Sym, Q>) -> Vec<Vec<Q>> {
    exec::map(params, |p| {
        let ps = p.sym();
        cols.iter()
            .map(|c| {
                g.split
                    .get(c)
                    .and_then(|m| m.get(&ps))
                    .map(|poly| poly.eval_q(&|s| pt.get(&s).cloned()).expect("point covers all coordinates"))
                    .unwrap_or_default()
            })
            .collect()
    })
}

fn columns(eq: &EquationSystem, k: u32) -> Vec<Sym> {
    let mut cols: Vec<Sym> = eq.setting.base_vars().iter().map(|b| b.sym()).collect();
    cols.extend(eq.jets(k).iter().map(|j| j.sym()));
    cols
}

/// Exact rank of the infinitesimal action at random points of `eq^k`:
/// the maximum over three points, with up to five more when the maximum
/// stays below the closed form.
pub fn orbit_dimension(eq: &EquationSystem, k: u32, seed: u64) -> Result<OrbitReport> {
    let g = generic(eq, k);
    let params = ParamJet::basis(&eq.setting, k);
    let cols = columns(eq, k);
    let closed = orbit_dim_closed_form(eq.kind, eq.n(), k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranks = Vec::new();
    for attempt in 0..8 {
        let pt = eq.random_point(k, &mut rng);
        ranks.push(linalg::rank(&orbit_matrix(&g, &params, &cols, &pt)));
        let best = *ranks.iter().max().unwrap() as i64;
        if attempt >= 2 && best >= closed {
            break;
        }
    }
    let rank = *ranks.iter().max().unwrap();
    let warning = if ranks.iter().any(|&r| r != rank) {
        Some(format!("rank differs across sample points: {ranks:?}"))
    } else {
        None
    };
    Ok(OrbitReport { kind: eq.kind, n: eq.n(), k, rank, ranks, rows: params.len(), cols: cols.len(), closed_form: closed, warning })
}

/// Dimension of the stabilizer, among 1-jets of the algebra, of a generic
/// point of `E^1` over `p_0` (`h = δ`, `W = H = 0`, random first jets).
pub fn stabilizer_dimension_1jet(n: usize, seed: u64) -> Result<usize> {
    let eq = EquationSystem::new(EqKind::E, n)?;
    let g = generic(&eq, 1);
    let c3 = ParamJet::new(Param::C, MultiIndex::of(&[BaseVar::U; 3]));
    let params: Vec<ParamJet> = ParamJet::basis(&eq.setting, 1).into_iter().filter(|p| *p != c3).collect();
    let cols = columns(&eq, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<usize> = None;
    for _ in 0..3 {
        let mut pt = eq.random_point(1, &mut rng);
        for f in eq.setting.fields() {
            let v = match f {
                Field::Hm(i, j) if i == j => Q::one(),
                _ => Q::zero(),
            };
            pt.insert(JetVar::new(f, MultiIndex::zero()).sym(), v);
        }
        let kernel = params.len() - linalg::rank(&orbit_matrix(&g, &params, &cols, &pt));
        best = Some(best.map_or(kernel, |b: usize| b.min(kernel)));
    }
    best.ok_or(KundtError::DegeneratePointExhausted(3))
}

pub fn stabilizer_closed_form(n: usize) -> usize {
    binomial(n as i64 - 2, 2) as usize + 2
}

/// Closed-form Hilbert function of the quotient by the pseudogroup.
pub fn hilbert_closed_form(kind: EqKind, n: usize, k: u32) -> i64 {
    let n = n as i64;
    let k = k as i64;
    let c = binomial;
    let e = |k: i64| match k {
        0 => 0,
        1 => 1,
        2 => n - 5 + (n - 1) * (c(n + 2, n) - c(n + 2, n - 1)) + c(n - 1, 2) * c(n + 1, n - 1),
        _ => (n - 1) * (c(n + k - 1, n - 1) - c(n + k - 1, n - 2)) + c(n - 1, 2) * c(n + k - 2, n - 2) - 1,
    };
    match (kind, k) {
        (EqKind::ED, 2) => (n - 1) * (c(n + 2, 2) - c(n + 2, 3)) + c(n - 1, 2) * c(n + 1, 2) - 3,
        (EqKind::ED, k) if k >= 3 => e(k) - (n - 2) * c(n + k - 3, n - 1) - c(n + k - 4, n - 1),
        _ => e(k),
    }
}

/// One row of a Hilbert-function computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountReport {
    pub kind: EqKind,
    pub n: usize,
    pub k: u32,
    pub dim: i64,
    pub orbit_dim: i64,
    /// Codimension of a generic orbit, `s_k`.
    pub codim: i64,
    /// `H_k = s_k - s_{k-1}`.
    pub hilbert: i64,
    pub closed_form: i64,
    pub warning: Option<String>,
}

impl CountReport {
    pub fn matches(&self) -> bool {
        self.hilbert == self.closed_form
    }
}

/// Hilbert function for `k = 0..=kmax` from exact orbit ranks.
pub fn hilbert(eq: &EquationSystem, kmax: u32, seed: u64) -> Result<Vec<CountReport>> {
    let mut out: Vec<CountReport> = Vec::new();
    let mut prev = 0;
    for k in 0..=kmax {
        let orbit = orbit_dimension(eq, k, seed.wrapping_add(k as u64))?;
        let dim = eq.dim(k);
        let codim = dim - orbit.rank as i64;
        out.push(CountReport {
            kind: eq.kind,
            n: eq.n(),
            k,
            dim,
            orbit_dim: orbit.rank as i64,
            codim,
            hilbert: if k == 0 { codim } else { codim - prev },
            closed_form: hilbert_closed_form(eq.kind, eq.n(), k),
            warning: orbit.warning,
        });
        prev = codim;
    }
    Ok(out)
}

/// Numerator coefficients `p` and denominator exponent `d` of the Poincaré
/// function `z p(z) / (1 - z)^d`.
pub fn poincare_rational(kind: EqKind, n: usize) -> Option<(Vec<i64>, u32)> {
    match (kind, n) {
        (EqKind::E, 3) => Some((vec![1, 1, 4, -6, 2], 3)),
        (EqKind::E, 4) => Some((vec![1, 10, -6, -10, 11, -3], 4)),
        (EqKind::E, 5) => Some((vec![1, 29, -41, 0, 33, -23, 5], 5)),
        (EqKind::ED, 3) => Some((vec![1, 1, 4, -2], 2)),
        (EqKind::ED, 4) => Some((vec![1, 9, 2, -8, 3], 3)),
        (EqKind::ED, 5) => Some((vec![1, 27, -15, -15, 18, -5], 4)),
        _ => None,
    }
}

/// Power-series coefficients `[z^0 .. z^kmax]` of the Poincaré function.
pub fn poincare_series(kind: EqKind, n: usize, kmax: u32) -> Option<Vec<i64>> {
    let (num, d) = poincare_rational(kind, n)?;
    let d = d as i64;
    let mut out = vec![0i64; kmax as usize + 1];
    for (k, slot) in out.iter_mut().enumerate().skip(1) {
        // z * p(z) * Σ C(m + d - 1, d - 1) z^m
        for (i, &a) in num.iter().enumerate() {
            let m = k as i64 - 1 - i as i64;
            if m >= 0 {
                *slot += a * binomial(m + d - 1, d - 1);
            }
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e3() -> EquationSystem {
        EquationSystem::new(EqKind::E, 3).unwrap()
    }

    #[test]
    fn param_names_round_trip() {
        let s = Setting::new(4).unwrap();
        let p = ParamJet::parse("a2_u_x1", &s).unwrap();
        assert_eq!(p.name(), "a2_u_x1");
        assert_eq!(ParamJet::from_sym(p.sym()), Some(p));
        assert!(ParamJet::parse("c_x1", &s).is_none());
        assert!(ParamJet::parse("b_v", &s).is_none());
        let s3 = Setting::new(3).unwrap();
        assert_eq!(ParamJet::parse("a_x", &s3).unwrap().name(), "a1_x1");
        assert_eq!(ParamJet::parse("c_uu", &s3).unwrap().name(), "c_u_u");
    }

    #[test]
    fn basis_size_matches_free_jet_count() {
        for n in 3..=5usize {
            let s = Setting::new(n).unwrap();
            for k in 0..=3u32 {
                let expect = (n as i64 - 1) * binomial(n as i64 + k as i64, n as i64 - 1) + k as i64 + 3;
                assert_eq!(ParamJet::basis(&s, k).len() as i64, expect);
            }
        }
    }

    #[test]
    fn lie_derivative_of_constant_is_zero() {
        assert!(lie_derivative(&Expr::int(5), &e3()).unwrap().is_zero());
    }

    #[test]
    fn first_order_invariant() {
        let e = e3();
        let i1 = e.parse("W_v^2/h").unwrap();
        assert!(is_absolute_invariant(&i1, &e).unwrap());
        assert!(!is_absolute_invariant(&e.parse("h").unwrap(), &e).unwrap());
    }

    #[test]
    fn lie_derivative_of_w_v_by_hand() {
        // φ_{W_v} = D_v φ_W + c' W_v = -a_x W_v
        let e = e3();
        let l = lie_derivative(&e.parse("W_v").unwrap(), &e).unwrap();
        assert_eq!(l, e.parse("-a_x*W_v").unwrap());
        // on the full jet space the h_v term survives
        let j = EquationSystem::new(EqKind::Jet, 3).unwrap();
        let lj = lie_derivative(&j.parse("W_v").unwrap(), &j).unwrap();
        assert_eq!(lj, j.parse("-a_x*W_v - 2*a_u*h_v").unwrap());
    }

    #[test]
    fn relative_invariants() {
        let e = e3();
        let mu = relative_multiplier(&e.parse("W_vv").unwrap(), &e).unwrap().unwrap();
        assert_eq!(mu, e.parse("c_u - a_x").unwrap());
        assert!(relative_multiplier(&e.parse("h").unwrap(), &e).unwrap().is_some());
        assert!(relative_multiplier(&e.parse("W_u").unwrap(), &e).unwrap().is_none());
    }

    #[test]
    fn tangent_to_degenerate_equations() {
        for n in [3, 4] {
            let ed = EquationSystem::new(EqKind::ED, n).unwrap();
            assert!(generic(&ed, 3).field.tangency_residuals().is_empty());
        }
    }

    #[test]
    fn closed_form_corollaries() {
        for k in 3..=8i64 {
            let ku = k as u32;
            assert_eq!(hilbert_closed_form(EqKind::E, 3, ku), k * k + 2 * k - 2);
            assert_eq!(hilbert_closed_form(EqKind::E, 4, ku), (k * k * k + 6 * k * k + 5 * k - 8) / 2);
            assert_eq!(
                hilbert_closed_form(EqKind::E, 5, ku),
                (k.pow(4) + 12 * k.pow(3) + 35 * k * k + 12 * k - 42) / 6
            );
            assert_eq!(hilbert_closed_form(EqKind::ED, 3, ku), 4 * k - 3);
            assert_eq!(hilbert_closed_form(EqKind::ED, 4, ku), (7 * k * k + 5 * k - 8) / 2);
            assert_eq!(hilbert_closed_form(EqKind::ED, 5, ku), (11 * k.pow(3) + 36 * k * k + 13 * k - 42) / 6);
        }
        let h2: Vec<i64> = (3..=5).map(|n| hilbert_closed_form(EqKind::E, n, 2)).collect();
        assert_eq!(h2, vec![4, 14, 34]);
        let t2: Vec<i64> = (3..=5).map(|n| hilbert_closed_form(EqKind::ED, n, 2)).collect();
        assert_eq!(t2, vec![3, 12, 31]);
    }

    #[test]
    fn poincare_series_matches_closed_forms() {
        for kind in [EqKind::E, EqKind::ED] {
            for n in 3..=5 {
                let s = poincare_series(kind, n, 12).unwrap();
                for k in 0..=12u32 {
                    assert_eq!(s[k as usize], hilbert_closed_form(kind, n, k), "{kind} n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn orbit_dimensions_n3() {
        for kind in [EqKind::E, EqKind::ED] {
            let eq = EquationSystem::new(kind, 3).unwrap();
            for k in 0..=2 {
                let r = orbit_dimension(&eq, k, 7).unwrap();
                assert_eq!(r.rank as i64, r.closed_form, "{kind} k={k}");
            }
        }
    }

    #[test]
    fn stabilizer_n3() {
        assert_eq!(stabilizer_dimension_1jet(3, 1).unwrap(), 2);
    }

    #[test]
    fn closure_and_cocycle_n3() {
        let e = e3();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xi = Generator::random(&e.setting, 2, &mut rng);
        let eta = Generator::random(&e.setting, 2, &mut rng);
        let f = random_jet_function(&e, 1, 6, &mut rng);
        assert!(closure_defect(&xi, &eta, &f, &e, 2).unwrap().is_zero());
        let mu = relative_multiplier(&e.parse("W_vv").unwrap(), &e).unwrap().unwrap();
        assert!(cocycle_defect(&mu, &xi, &eta, &e).unwrap().is_zero());
    }
}
