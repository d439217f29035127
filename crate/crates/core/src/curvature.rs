//! Horizontal metric of the Kundt ansatz and its curvature in jet variables.
//!
//! Components are read as `g_uv = 1/2`, `g_{u x^i} = W_i / 2`, `g_uu = H`,
//! `g_{x^i x^j} = h_ij`. Partial derivatives are total derivatives restricted
//! to the equation, so every tensor here is a function on the jet space.

use std::collections::HashMap;
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use symexpr::{linalg, Expr, Q};

use crate::error::{KundtError, Result};
use crate::exec;
use crate::jets::{BaseVar, EquationSystem, Field, JetVar, MultiIndex};

pub type Matrix = Vec<Vec<Expr>>;

/// `Σ A^μ D_μ`, coefficients indexed like `Setting::base_vars`.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalDerivation {
    pub coeffs: Vec<Expr>,
}

impl HorizontalDerivation {
    pub fn new(coeffs: Vec<Expr>) -> HorizontalDerivation {
        HorizontalDerivation { coeffs }
    }

    /// The coordinate derivation `D_b`.
    pub fn coordinate(eq: &EquationSystem, b: BaseVar) -> HorizontalDerivation {
        let coeffs = eq.setting.base_vars().iter().map(|&x| if x == b { Expr::one() } else { Expr::zero() }).collect();
        HorizontalDerivation { coeffs }
    }

    pub fn apply(&self, eq: &EquationSystem, f: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for (a, b) in self.coeffs.iter().zip(eq.setting.base_vars()) {
            if !a.is_zero() {
                acc = acc.add(&a.mul(&eq.total_derivative(f, b)));
            }
        }
        acc
    }

    /// `[X, Y]^μ = X(Y^μ) - Y(X^μ)`.
    pub fn bracket(&self, o: &HorizontalDerivation, eq: &EquationSystem) -> HorizontalDerivation {
        let coeffs = self.coeffs.iter().zip(&o.coeffs).map(|(x, y)| self.apply(eq, y).sub(&o.apply(eq, x))).collect();
        HorizontalDerivation { coeffs }
    }

    pub fn scale(&self, f: &Expr) -> HorizontalDerivation {
        HorizontalDerivation { coeffs: self.coeffs.iter().map(|c| c.mul(f)).collect() }
    }

    pub fn add(&self, o: &HorizontalDerivation) -> HorizontalDerivation {
        HorizontalDerivation { coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn normalize(&self) -> HorizontalDerivation {
        HorizontalDerivation { coeffs: self.coeffs.iter().map(|c| c.normalize()).collect() }
    }
}

fn jet0(f: Field) -> Expr {
    JetVar::new(f, MultiIndex::zero()).expr()
}

/// Components of the Kundt metric in the order `u, x1.., v`.
pub fn kundt_metric(eq: &EquationSystem) -> Matrix {
    let n = eq.n();
    let m = n - 2;
    let half = Expr::constant(Q::new(1, 2));
    let mut g = vec![vec![Expr::zero(); n]; n];
    g[0][0] = jet0(Field::H);
    g[0][n - 1] = half.clone();
    g[n - 1][0] = half.clone();
    for i in 0..m {
        let w = jet0(Field::W(i as u8 + 1)).mul(&half);
        g[0][i + 1] = w.clone();
        g[i + 1][0] = w;
        for j in 0..m {
            g[i + 1][j + 1] = jet0(Field::h(i as u8 + 1, j as u8 + 1));
        }
    }
    g
}

/// The transverse metric `h_ij`.
pub fn transverse_metric(eq: &EquationSystem) -> Matrix {
    let m = eq.setting.nx();
    (0..m).map(|i| (0..m).map(|j| jet0(Field::h(i as u8 + 1, j as u8 + 1))).collect()).collect()
}

/// Closed-form inverse: `g^uv = 2`, `g^{x x} = h^{-1}`, `g^{x v} = -h^{-1} W`,
/// `g^vv = W^T h^{-1} W - 4H`, all `g^{u ·}` other than `g^uv` zero.
pub fn kundt_inverse(eq: &EquationSystem) -> Result<Matrix> {
    let n = eq.n();
    let m = n - 2;
    let hinv = linalg::inverse(&transverse_metric(eq)).map_err(|_| KundtError::SingularMetric)?;
    let w: Vec<Expr> = (0..m).map(|i| jet0(Field::W(i as u8 + 1))).collect();
    let hw: Vec<Expr> = (0..m).map(|i| (0..m).fold(Expr::zero(), |acc, j| acc.add(&hinv[i][j].mul(&w[j])))).collect();
    let mut gi = vec![vec![Expr::zero(); n]; n];
    gi[0][n - 1] = Expr::int(2);
    gi[n - 1][0] = Expr::int(2);
    let mut vv = jet0(Field::H).scale(&Q::from_i64(-4));
    for i in 0..m {
        vv = vv.add(&w[i].mul(&hw[i]));
        gi[i + 1][n - 1] = hw[i].neg();
        gi[n - 1][i + 1] = hw[i].neg();
        for j in 0..m {
            gi[i + 1][j + 1] = hinv[i][j].clone();
        }
    }
    gi[n - 1][n - 1] = vv;
    Ok(gi)
}

/// `g(X, Y) = Σ g_{μν} X^μ Y^ν`.
pub fn pair(g: &Matrix, x: &HorizontalDerivation, y: &HorizontalDerivation) -> Expr {
    let mut acc = Expr::zero();
    for (i, row) in g.iter().enumerate() {
        if x.coeffs[i].is_zero() {
            continue;
        }
        for (j, gij) in row.iter().enumerate() {
            if !gij.is_zero() && !y.coeffs[j].is_zero() {
                acc = acc.add(&gij.mul(&x.coeffs[i]).mul(&y.coeffs[j]));
            }
        }
    }
    acc
}

/// Levi-Civita data of a metric on a set of horizontal directions.
#[derive(Debug)]
pub struct Geometry {
    pub eq: EquationSystem,
    pub dirs: Vec<BaseVar>,
    pub g: Matrix,
    pub ginv: Matrix,
    /// `gamma[κ][μ][ν] = Γ^κ_{μν}`.
    pub gamma: Vec<Vec<Vec<Expr>>>,
}

impl Geometry {
    pub fn new(eq: &EquationSystem, dirs: Vec<BaseVar>, g: Matrix, ginv: Matrix) -> Geometry {
        let d = dirs.len();
        // first kind: [λ; μν] = (D_μ g_λν + D_ν g_λμ - D_λ g_μν) / 2
        let dg: Vec<Vec<Vec<Expr>>> =
            dirs.iter().map(|&b| g.iter().map(|r| r.iter().map(|e| eq.total_derivative(e, b)).collect()).collect()).collect();
        let idx: Vec<(usize, usize, usize)> =
            (0..d).flat_map(|l| (0..d).flat_map(move |mu| (mu..d).map(move |nu| (l, mu, nu)))).collect();
        let half = Q::new(1, 2);
        let first = exec::map(&idx, |&(l, mu, nu)| dg[mu][l][nu].add(&dg[nu][l][mu]).sub(&dg[l][mu][nu]).scale(&half));
        let mut fk = vec![vec![vec![Expr::zero(); d]; d]; d];
        for (&(l, mu, nu), e) in idx.iter().zip(first) {
            fk[l][mu][nu] = e.clone();
            fk[l][nu][mu] = e;
        }
        let idx2: Vec<(usize, usize, usize)> =
            (0..d).flat_map(|k| (0..d).flat_map(move |mu| (mu..d).map(move |nu| (k, mu, nu)))).collect();
        let second = exec::map(&idx2, |&(k, mu, nu)| {
            (0..d).fold(Expr::zero(), |acc, l| if ginv[k][l].is_zero() { acc } else { acc.add(&ginv[k][l].mul(&fk[l][mu][nu])) })
        });
        let mut gamma = vec![vec![vec![Expr::zero(); d]; d]; d];
        for (&(k, mu, nu), e) in idx2.iter().zip(second) {
            gamma[k][mu][nu] = e.clone();
            gamma[k][nu][mu] = e;
        }
        Geometry { eq: *eq, dirs, g, ginv, gamma }
    }

    fn d(&self, e: &Expr, mu: usize) -> Expr {
        self.eq.total_derivative(e, self.dirs[mu])
    }

    /// `R^ρ_{σμν} = D_μ Γ^ρ_{νσ} - D_ν Γ^ρ_{μσ} + Γ^ρ_{μλ}Γ^λ_{νσ} - Γ^ρ_{νλ}Γ^λ_{μσ}`,
    /// indexed `[ρ][σ][μ][ν]`.
    pub fn riemann(&self) -> Vec<Vec<Vec<Vec<Expr>>>> {
        let d = self.dirs.len();
        let idx: Vec<(usize, usize, usize, usize)> = (0..d)
            .flat_map(|r| (0..d).flat_map(move |s| (0..d).flat_map(move |mu| ((mu + 1)..d).map(move |nu| (r, s, mu, nu)))))
            .collect();
        let g = &self.gamma;
        let vals = exec::map(&idx, |&(r, s, mu, nu)| {
            let mut e = self.d(&g[r][nu][s], mu).sub(&self.d(&g[r][mu][s], nu));
            for l in 0..d {
                e = e.add(&g[r][mu][l].mul(&g[l][nu][s])).sub(&g[r][nu][l].mul(&g[l][mu][s]));
            }
            e
        });
        let mut out = vec![vec![vec![vec![Expr::zero(); d]; d]; d]; d];
        for (&(r, s, mu, nu), e) in idx.iter().zip(vals) {
            out[r][s][nu][mu] = e.neg();
            out[r][s][mu][nu] = e;
        }
        out
    }

    /// `R_{σν} = R^ρ_{σρν}`.
    pub fn ricci(&self, riem: &[Vec<Vec<Vec<Expr>>>]) -> Matrix {
        let d = self.dirs.len();
        let idx: Vec<(usize, usize)> = (0..d).flat_map(|s| (s..d).map(move |nu| (s, nu))).collect();
        let vals = exec::map(&idx, |&(s, nu)| (0..d).fold(Expr::zero(), |acc, r| acc.add(&riem[r][s][r][nu])));
        let mut out = vec![vec![Expr::zero(); d]; d];
        for (&(s, nu), e) in idx.iter().zip(vals) {
            out[s][nu] = e.clone();
            out[nu][s] = e;
        }
        out
    }

    /// `Ric^μ_ν = g^{μσ} R_{σν}`.
    pub fn ricci_operator(&self, ric: &Matrix) -> Matrix {
        let d = self.dirs.len();
        let idx: Vec<(usize, usize)> = (0..d).flat_map(|a| (0..d).map(move |b| (a, b))).collect();
        let vals = exec::map(&idx, |&(mu, nu)| {
            (0..d).fold(Expr::zero(), |acc, s| if self.ginv[mu][s].is_zero() { acc } else { acc.add(&self.ginv[mu][s].mul(&ric[s][nu])) })
        });
        let mut out = vec![vec![Expr::zero(); d]; d];
        for (&(a, b), e) in idx.iter().zip(vals) {
            out[a][b] = e;
        }
        out
    }

    pub fn scalar(&self, ric: &Matrix) -> Expr {
        let d = self.dirs.len();
        let mut acc = Expr::zero();
        for a in 0..d {
            for b in 0..d {
                if !self.ginv[a][b].is_zero() {
                    acc = acc.add(&self.ginv[a][b].mul(&ric[a][b]));
                }
            }
        }
        acc
    }

    /// `(D^g_X Y)^κ = X(Y^κ) + Γ^κ_{μν} X^μ Y^ν`.
    pub fn covariant_derivative(&self, x: &HorizontalDerivation, y: &HorizontalDerivation) -> HorizontalDerivation {
        let d = self.dirs.len();
        let coeffs = (0..d)
            .map(|k| {
                let mut e = x.apply(&self.eq, &y.coeffs[k]);
                for mu in 0..d {
                    if x.coeffs[mu].is_zero() {
                        continue;
                    }
                    for nu in 0..d {
                        if !y.coeffs[nu].is_zero() && !self.gamma[k][mu][nu].is_zero() {
                            e = e.add(&self.gamma[k][mu][nu].mul(&x.coeffs[mu]).mul(&y.coeffs[nu]));
                        }
                    }
                }
                e
            })
            .collect();
        HorizontalDerivation { coeffs }
    }

    /// Components of `D^g g` that fail to vanish, as `(λ, μ, ν)`.
    pub fn compatibility_defects(&self) -> Vec<(usize, usize, usize)> {
        let d = self.dirs.len();
        let idx: Vec<(usize, usize, usize)> =
            (0..d).flat_map(|l| (0..d).flat_map(move |mu| (mu..d).map(move |nu| (l, mu, nu)))).collect();
        let bad = exec::map(&idx, |&(l, mu, nu)| {
            let mut e = self.d(&self.g[mu][nu], l);
            for k in 0..d {
                e = e.sub(&self.gamma[k][l][mu].mul(&self.g[k][nu])).sub(&self.gamma[k][l][nu].mul(&self.g[mu][k]));
            }
            !e.is_zero()
        });
        idx.into_iter().zip(bad).filter(|(_, b)| *b).map(|(i, _)| i).collect()
    }
}

/// Components violating the first Bianchi identity, as `(ρ, σ, μ, ν)`.
pub fn bianchi_defects(riem: &[Vec<Vec<Vec<Expr>>>]) -> Vec<(usize, usize, usize, usize)> {
    let d = riem.len();
    let mut out = Vec::new();
    for r in 0..d {
        for s in 0..d {
            for mu in 0..d {
                for nu in 0..d {
                    let e = riem[r][s][mu][nu].add(&riem[r][mu][nu][s]).add(&riem[r][nu][s][mu]);
                    if !e.is_zero() {
                        out.push((r, s, mu, nu));
                    }
                }
            }
        }
    }
    out
}

/// Curvature of the Kundt metric on an equation, computed once per equation.
#[derive(Debug)]
pub struct KundtCurvature {
    pub geometry: Geometry,
    pub riemann: Vec<Vec<Vec<Vec<Expr>>>>,
    pub ricci: Matrix,
    pub ricci_operator: Matrix,
}

static CURV: Lazy<Mutex<HashMap<EquationSystem, Arc<KundtCurvature>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

pub fn kundt_geometry(eq: &EquationSystem) -> Result<Geometry> {
    Ok(Geometry::new(eq, eq.setting.base_vars(), kundt_metric(eq), kundt_inverse(eq)?))
}

pub fn kundt_curvature(eq: &EquationSystem) -> Result<Arc<KundtCurvature>> {
    if let Some(c) = CURV.lock().get(eq) {
        return Ok(c.clone());
    }
    let geometry = kundt_geometry(eq)?;
    let riemann = geometry.riemann();
    let ricci = geometry.ricci(&riemann);
    let op = geometry.ricci_operator(&ricci);
    let c = Arc::new(KundtCurvature { geometry, riemann, ricci, ricci_operator: op });
    Ok(CURV.lock().entry(*eq).or_insert(c).clone())
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let d = a.len();
    let idx: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
    let vals = exec::map(&idx, |&(i, j)| {
        (0..d).fold(Expr::zero(), |acc, k| {
            if a[i][k].is_zero() || b[k][j].is_zero() {
                acc
            } else {
                acc.add(&a[i][k].mul(&b[k][j]))
            }
        })
    });
    let mut out = vec![vec![Expr::zero(); d]; d];
    for (&(i, j), e) in idx.iter().zip(vals) {
        out[i][j] = e;
    }
    out
}

/// `Tr(A B) = Σ A_ab B_ba`.
fn trace_of_product(a: &Matrix, b: &Matrix) -> Expr {
    let d = a.len();
    let idx: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
    let terms = exec::map(&idx, |&(i, j)| {
        if a[i][j].is_zero() || b[j][i].is_zero() {
            Expr::zero()
        } else {
            a[i][j].mul(&b[j][i])
        }
    });
    terms.iter().fold(Expr::zero(), |acc, t| acc.add(t))
}

/// `Tr(Ric^i)` for `i = 1..=imax`, as traces of products of powers up to
/// `⌈imax / 2⌉`.
pub fn spi_traces(eq: &EquationSystem, imax: usize) -> Result<Vec<Expr>> {
    let c = kundt_curvature(eq)?;
    let op = &c.ricci_operator;
    let mut powers = vec![op.clone()];
    while powers.len() < imax.div_ceil(2) {
        let next = mat_mul(powers.last().unwrap(), op);
        powers.push(next);
    }
    let mut out = Vec::new();
    for i in 1..=imax {
        if i == 1 {
            out.push((0..op.len()).fold(Expr::zero(), |acc, k| acc.add(&op[k][k])));
        } else {
            out.push(trace_of_product(&powers[i.div_ceil(2) - 1], &powers[i / 2 - 1]));
        }
    }
    Ok(out)
}

pub fn spi_trace(eq: &EquationSystem, i: usize) -> Result<Expr> {
    Ok(spi_traces(eq, i)?.pop().expect("i >= 1"))
}

/// Scalar curvature of `h_ij(u, x)` on the transverse slice.
pub fn scalar_curvature_h(eq: &EquationSystem) -> Result<Expr> {
    if eq.setting.nx() < 2 {
        return Ok(Expr::zero());
    }
    let h = transverse_metric(eq);
    let hinv = linalg::inverse(&h).map_err(|_| KundtError::SingularMetric)?;
    let geo = Geometry::new(eq, eq.setting.xs(), h, hinv);
    let riem = geo.riemann();
    let ric = geo.ricci(&riem);
    Ok(geo.scalar(&ric))
}

/// Entries of the Ricci operator required to vanish by the block form
/// `[λ 0 0; * R_h 0; * * λ]` in the `(u, x, v)` frame, as `(row, col)`,
/// followed by whether the two corner entries agree.
pub fn ricci_block_check(eq: &EquationSystem) -> Result<(Vec<(usize, usize)>, bool)> {
    let c = kundt_curvature(eq)?;
    let op = &c.ricci_operator;
    let n = op.len();
    let mut bad = Vec::new();
    for j in 1..n {
        if !op[0][j].is_zero() {
            bad.push((0, j));
        }
    }
    for i in 1..n - 1 {
        if !op[i][n - 1].is_zero() {
            bad.push((i, n - 1));
        }
    }
    Ok((bad, op[0][0] == op[n - 1][n - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::EqKind;

    fn eq(kind: EqKind, n: usize) -> EquationSystem {
        EquationSystem::new(kind, n).unwrap()
    }

    #[test]
    fn inverse_is_inverse() {
        for n in 3..=5 {
            let e = eq(EqKind::E, n);
            let g = kundt_metric(&e);
            let gi = kundt_inverse(&e).unwrap();
            let p = mat_mul(&g, &gi);
            for (i, row) in p.iter().enumerate() {
                for (j, x) in row.iter().enumerate() {
                    assert_eq!(*x, if i == j { Expr::one() } else { Expr::zero() }, "n={n} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn pairings_read_off_the_ansatz() {
        let e = eq(EqKind::E, 3);
        let g = kundt_metric(&e);
        let dx = HorizontalDerivation::coordinate(&e, BaseVar::X(1));
        let du = HorizontalDerivation::coordinate(&e, BaseVar::U);
        let dv = HorizontalDerivation::coordinate(&e, BaseVar::V);
        assert_eq!(pair(&g, &dx, &dx), e.parse("h").unwrap());
        assert_eq!(pair(&g, &du, &dv), Expr::constant(Q::new(1, 2)));
    }

    #[test]
    fn christoffels_vanish_on_flat_data_and_are_symmetric() {
        let e = eq(EqKind::E, 3);
        let geo = kundt_geometry(&e).unwrap();
        let flat = |s: symexpr::Sym| {
            let j = JetVar::from_sym(s)?;
            Some(if j.field == Field::h(1, 1) && j.order() == 0 { Q::one() } else { Q::zero() })
        };
        for k in 0..3 {
            for mu in 0..3 {
                for nu in 0..3 {
                    assert_eq!(geo.gamma[k][mu][nu], geo.gamma[k][nu][mu]);
                    let v = geo.gamma[k][mu][nu].partial_eval(&flat).unwrap();
                    assert!(v.is_zero());
                }
            }
        }
    }

    #[test]
    fn bianchi_and_compatibility_n3() {
        let e = eq(EqKind::E, 3);
        let c = kundt_curvature(&e).unwrap();
        assert!(bianchi_defects(&c.riemann).is_empty());
        assert!(c.geometry.compatibility_defects().is_empty());
    }

    #[test]
    fn ricci_blocks_on_degenerate_kundt() {
        for n in [3, 4] {
            let (bad, corners) = ricci_block_check(&eq(EqKind::ED, n)).unwrap();
            assert!(bad.is_empty(), "n={n}: {bad:?}");
            assert!(corners);
        }
        let (bad, _) = ricci_block_check(&eq(EqKind::E, 3)).unwrap();
        assert!(!bad.is_empty());
    }

    #[test]
    fn traces_are_v_independent_on_ed_n3() {
        let e = eq(EqKind::ED, 3);
        for t in spi_traces(&e, 3).unwrap() {
            assert!(e.total_derivative(&t, BaseVar::V).is_zero());
        }
    }

    #[test]
    fn flat_transverse_metric_has_zero_scalar_curvature() {
        let e = eq(EqKind::E, 4);
        let s = scalar_curvature_h(&e).unwrap();
        let flat = |x: symexpr::Sym| {
            let j = JetVar::from_sym(x)?;
            Some(match j.field {
                Field::Hm(a, b) if a == b && j.order() == 0 => Q::one(),
                _ => Q::zero(),
            })
        };
        assert!(s.partial_eval(&flat).unwrap().is_zero());
        assert!(!s.is_zero());
    }
}
