//! Dense double-double linear algebra: Cholesky, triangular solves and a
//! cyclic Jacobi eigensolver for symmetric matrices.

use nalgebra::DMatrix;
use num_traits::{One, Zero};

use crate::real::{Dd, Real};

pub fn to_dd(m: &DMatrix<f64>) -> DMatrix<Dd> {
    m.map(Dd::from)
}

pub fn to_f64(m: &DMatrix<Dd>) -> DMatrix<f64> {
    m.map(|x| x.to_f64())
}

pub fn max_abs<R: Real>(m: &DMatrix<R>) -> R {
    m.iter().fold(R::zero(), |acc, &x| if x.abs() > acc { x.abs() } else { acc })
}

/// Lower-triangular `L` with `A = L L^T`, or `None` if a pivot is not positive.
pub fn cholesky(a: &DMatrix<Dd>) -> Option<DMatrix<Dd>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let mut l = DMatrix::<Dd>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d.0 > 0.0) {
            return None;
        }
        let djj = Real::sqrt(d);
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &DMatrix<Dd>, b: &DMatrix<Dd>) -> DMatrix<Dd> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `L^T X = B` for lower-triangular `L`.
pub fn solve_lower_transpose(l: &DMatrix<Dd>, b: &DMatrix<Dd>) -> DMatrix<Dd> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `A X = B` given the Cholesky factor of `A`.
pub fn cholesky_solve(l: &DMatrix<Dd>, b: &DMatrix<Dd>) -> DMatrix<Dd> {
    solve_lower_transpose(l, &solve_lower(l, b))
}

pub fn identity(n: usize) -> DMatrix<Dd> {
    DMatrix::from_fn(n, n, |i, j| if i == j { Dd::one() } else { Dd::zero() })
}

/// Eigen-decomposition of a symmetric matrix; eigenvalues ascending, eigenvectors
/// in the matching columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<Dd>,
    pub vectors: DMatrix<Dd>,
}

impl SymmetricEigen {
    pub fn min(&self) -> Dd {
        self.values[0]
    }

    pub fn max(&self) -> Dd {
        *self.values.last().expect("nonempty spectrum")
    }
}

/// Cyclic Jacobi with the relative off-diagonal test
/// `|a_pq| <= eps * sqrt(|a_pp a_qq|)`, which resolves small eigenvalues of
/// graded positive definite matrices to high relative accuracy.
pub fn jacobi_eigen(a: &DMatrix<Dd>) -> Option<SymmetricEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigen needs a square matrix");
    let mut m = a.clone();
    let mut v = identity(n);
    let eps = Dd::from(1e-31);
    let scale = max_abs(a);
    let floor = scale * Dd::from(1e-64);

    let mut converged = false;
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let bound = eps * Real::sqrt((m[(p, p)] * m[(q, q)]).abs());
                if apq.abs() <= bound || apq.abs() <= floor {
                    continue;
                }
                rotated = true;
                let theta = (m[(q, q)] - m[(p, p)]) / (Dd::from(2.0) * apq);
                let root = Real::sqrt(theta * theta + Dd::one());
                let t = if theta.0 >= 0.0 { Dd::one() / (theta + root) } else { -Dd::one() / (-theta + root) };
                let c = Dd::one() / Real::sqrt(t * t + Dd::one());
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| PartialOrd::partial_cmp(&m[(i, i)], &m[(j, j)]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Some(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hilbert(n: usize) -> DMatrix<Dd> {
        DMatrix::from_fn(n, n, |i, j| Dd::one() / Dd::from((i + j + 1) as f64))
    }

    #[test]
    fn cholesky_reconstructs_ill_conditioned_matrix() {
        // Hilbert(12) has condition about 1.7e16.
        let a = hilbert(12);
        let l = cholesky(&a).unwrap();
        let r = &l * l.transpose() - &a;
        assert!(max_abs(&r).0 < 1e-30);

        let x = cholesky_solve(&l, &identity(12));
        let res = &a * &x - identity(12);
        assert!(max_abs(&res).0 < 1e-12, "{:e}", max_abs(&res).0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = to_dd(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn jacobi_resolves_tiny_eigenvalue() {
        // Smallest eigenvalue of Hilbert(8), from a 50-digit reference run.
        let a = hilbert(8);
        let e = jacobi_eigen(&a).unwrap();
        let lmin = 1.1115389663724424e-10;
        assert!(((e.min().to_f64() - lmin) / lmin).abs() < 1e-14);
        let lmax = 1.6959389969219495;
        assert!((e.max().to_f64() - lmax).abs() < 1e-14);

        let d = DMatrix::from_fn(8, 8, |i, j| if i == j { e.values[i] } else { Dd::zero() });
        let back = &e.vectors * d * e.vectors.transpose() - &a;
        assert!(max_abs(&back).0 < 1e-29);
    }

    #[test]
    fn jacobi_diagonal_is_fixed_point() {
        let a = to_dd(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, -1.0, 2.0])));
        let e = jacobi_eigen(&a).unwrap();
        let vals: Vec<f64> = e.values.iter().map(|x| x.to_f64()).collect();
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
    }
}
