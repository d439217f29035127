//! Exact linear algebra: fraction-free rank over the rationals and Gaussian
//! elimination over the field of rational functions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::expr::Expr;
use crate::rational::Q;
use crate::ExprError;

fn integer_rows(rows: &[Vec<Q>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|r| {
            let mut l = BigInt::one();
            for q in r {
                let d = q.denom();
                if !d.is_one() {
                    l = l.lcm(&d);
                }
            }
            r.iter().map(|q| q.numer() * (&l / q.denom())).collect()
        })
        .collect()
}

/// Rank of a rational matrix by Bareiss fraction-free elimination.
pub fn rank(rows: &[Vec<Q>]) -> usize {
    let mut m = integer_rows(rows);
    m.retain(|r| r.iter().any(|x| !x.is_zero()));
    bareiss_rank(&mut m)
}

/// Rank of an integer matrix; the matrix is destroyed.
pub fn bareiss_rank(m: &mut [Vec<BigInt>]) -> usize {
    let nrows = m.len();
    if nrows == 0 {
        return 0;
    }
    let ncols = m[0].len();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..ncols {
        if r == nrows {
            break;
        }
        let Some(p) = (r..nrows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let (top, rest) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let piv = pivot_row[c].clone();
        for row in rest.iter_mut() {
            let f = row[c].clone();
            for j in (c + 1)..ncols {
                let v = &piv * &row[j] - &f * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = piv;
        r += 1;
    }
    r
}

/// Dimension of the kernel of `x ↦ x·A` (left null space) for a rational matrix.
pub fn left_kernel_dim(rows: &[Vec<Q>]) -> usize {
    rows.len() - rank(rows)
}

/// Basis of the right null space `{x : A x = 0}` of a rational matrix with
/// `ncols` columns, from the reduced row echelon form.
pub fn nullspace(rows: &[Vec<Q>], ncols: usize) -> Vec<Vec<Q>> {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for j in c..ncols {
            m[r][j] = &m[r][j] * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..ncols {
                    let t = &f * &m[r][j];
                    m[i][j] = &m[i][j] - &t;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![Q::zero(); ncols];
            x[f] = Q::one();
            for (i, &pc) in pivots.iter().enumerate() {
                x[pc] = -&m[i][f];
            }
            x
        })
        .collect()
}

/// Solves `A x = b` over the rational-function field. `a` is square.
pub fn solve(a: &[Vec<Expr>], b: &[Expr]) -> Result<Vec<Expr>, ExprError> {
    let n = a.len();
    let mut m: Vec<Vec<Expr>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    for c in 0..n {
        // prefer the smallest nonzero pivot to limit growth
        let p = (c..n)
            .filter(|&i| !m[i][c].is_zero())
            .min_by_key(|&i| m[i][c].size())
            .ok_or(ExprError::SingularSystem)?;
        m.swap(c, p);
        let inv = m[c][c].inv()?;
        for j in c..=n {
            m[c][j] = m[c][j].mul(&inv);
        }
        for i in 0..n {
            if i == c || m[i][c].is_zero() {
                continue;
            }
            let f = m[i][c].clone();
            for j in c..=n {
                let t = m[c][j].mul(&f);
                m[i][j] = m[i][j].sub(&t);
            }
        }
    }
    Ok(m.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

/// Determinant by cofactor expansion along the first row; intended for n ≤ 4.
pub fn det(a: &[Vec<Expr>]) -> Expr {
    let n = a.len();
    match n {
        0 => Expr::one(),
        1 => a[0][0].clone(),
        2 => a[0][0].mul(&a[1][1]).sub(&a[0][1].mul(&a[1][0])),
        _ => {
            let mut acc = Expr::zero();
            for j in 0..n {
                if a[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<Expr>> = a[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(k, _)| k != j).map(|(_, e)| e.clone()).collect())
                    .collect();
                let t = a[0][j].mul(&det(&minor));
                acc = if j % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
            }
            acc
        }
    }
}

/// Inverse of a square matrix over the rational-function field.
pub fn inverse(a: &[Vec<Expr>]) -> Result<Vec<Vec<Expr>>, ExprError> {
    let n = a.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let e: Vec<Expr> = (0..n).map(|i| if i == k { Expr::one() } else { Expr::zero() }).collect();
        cols.push(solve(a, &e)?);
    }
    Ok((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;

    fn q(v: i64) -> Q {
        Q::from_i64(v)
    }

    #[test]
    fn rank_of_dependent_rows() {
        let m = vec![
            vec![q(1), q(2), q(3)],
            vec![q(2), q(4), q(6)],
            vec![Q::new(1, 2), q(0), q(1)],
        ];
        assert_eq!(rank(&m), 2);
        assert_eq!(left_kernel_dim(&m), 1);
    }

    #[test]
    fn nullspace_vectors_are_annihilated() {
        let m = vec![vec![q(1), q(2), q(3), q(4)], vec![q(2), q(4), q(7), q(9)]];
        let ns = nullspace(&m, 4);
        assert_eq!(ns.len(), 2);
        for x in &ns {
            for row in &m {
                let s = row.iter().zip(x).fold(Q::zero(), |acc, (a, b)| &acc + &(a * b));
                assert!(s.is_zero());
            }
        }
    }

    #[test]
    fn rank_full_and_zero() {
        let id: Vec<Vec<Q>> = (0..4).map(|i| (0..4).map(|j| q((i == j) as i64)).collect()).collect();
        assert_eq!(rank(&id), 4);
        assert_eq!(rank(&[vec![q(0), q(0)]]), 0);
    }

    #[test]
    fn symbolic_solve() {
        let a = vec![
            vec![parse("la").unwrap(), parse("lb").unwrap()],
            vec![parse("lc").unwrap(), parse("ld").unwrap()],
        ];
        let b = vec![parse("1").unwrap(), parse("0").unwrap()];
        let x = solve(&a, &b).unwrap();
        assert_eq!(x[0], parse("ld/(la*ld - lb*lc)").unwrap());
        assert_eq!(x[1], parse("-lc/(la*ld - lb*lc)").unwrap());
        assert_eq!(det(&a), parse("la*ld - lb*lc").unwrap());
    }

    #[test]
    fn singular_system() {
        let a = vec![vec![parse("la").unwrap(), parse("2*la").unwrap()], vec![parse("1").unwrap(), parse("2").unwrap()]];
        let b = vec![Expr::one(), Expr::one()];
        assert_eq!(solve(&a, &b).unwrap_err(), ExprError::SingularSystem);
    }
}
