//! Small dense complex matrices and the few factorizations the synthesis
//! passes need: Cholesky solves for Gram systems, Jacobi eigenvalues for
//! Hermitian matrices, and a scaled Taylor matrix exponential.

use crate::error::{Error, Result};
use crate::scalar::{czero, Cx, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct CMat<R: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Cx<R>>,
}

impl<R: Scalar> CMat<R> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![czero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Cx::new(R::one(), R::zero());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Cx<R>>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend(row);
        }
        CMat { rows: r, cols: c, data }
    }

    pub fn mul(&self, other: &CMat<R>) -> CMat<R> {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == czero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Cx<R>]) -> Vec<Cx<R>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn adjoint(&self) -> CMat<R> {
        let mut out = CMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn scale(&self, s: Cx<R>) -> CMat<R> {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| *x * s).collect(),
        }
    }

    pub fn add(&self, other: &CMat<R>) -> CMat<R> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn sub(&self, other: &CMat<R>) -> CMat<R> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    pub fn kron(&self, other: &CMat<R>) -> CMat<R> {
        let mut out = CMat::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// n-fold Kronecker power.
    pub fn kron_pow(&self, n: usize) -> CMat<R> {
        let mut out = CMat::identity(1);
        for _ in 0..n {
            out = out.kron(self);
        }
        out
    }

    pub fn trace(&self) -> Cx<R> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> R {
        self.data.iter().map(|x| x.norm_sqr()).sum::<R>().sqrt()
    }

    pub fn max_abs(&self) -> R {
        self.data
            .iter()
            .map(|x| x.norm())
            .fold(R::zero(), |a, b| if b > a { b } else { a })
    }

    pub fn is_unitary(&self, tol: R) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let prod = self.adjoint().mul(self);
        prod.sub(&CMat::identity(self.rows)).max_abs() < tol
    }

    /// Commutator AB - BA.
    pub fn commutator(&self, other: &CMat<R>) -> CMat<R> {
        self.mul(other).sub(&other.mul(self))
    }

    /// Normalised trace inner product <A, B> = tr(B† A) / dim.
    pub fn ntr_inner(&self, other: &CMat<R>) -> Cx<R> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut acc: Cx<R> = czero();
        for (a, b) in self.data.iter().zip(&other.data) {
            acc = acc + b.conj() * *a;
        }
        acc / Cx::new(R::from_usize(self.rows).unwrap(), R::zero())
    }

    /// Cholesky factor L (lower triangular, L L† = self) for Hermitian
    /// positive-definite input.
    pub fn cholesky(&self) -> Result<CMat<R>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self[(i, j)];
                for k in 0..j {
                    sum = sum - l[(i, k)] * l[(j, k)].conj();
                }
                if i == j {
                    let re = sum.re;
                    if re <= R::zero() {
                        return Err(Error::Linalg(format!(
                            "matrix not positive definite at pivot {i} ({re})"
                        )));
                    }
                    l[(i, j)] = Cx::new(re.sqrt(), R::zero());
                } else {
                    l[(i, j)] = sum / l[(j, j)];
                }
            }
        }
        Ok(l)
    }

    /// Solve self * x = b for Hermitian positive-definite self.
    pub fn solve_hpd(&self, b: &[Cx<R>]) -> Result<Vec<Cx<R>>> {
        let l = self.cholesky()?;
        let n = self.rows;
        // forward: L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let lik = l[(i, k)];
                y[i] = y[i] - lik * y[k];
            }
            y[i] = y[i] / l[(i, i)];
        }
        // backward: L† x = y
        let mut x = y;
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = l[(k, i)].conj();
                x[i] = x[i] - lki * x[k];
            }
            x[i] = x[i] / l[(i, i)];
        }
        Ok(x)
    }

    /// Eigenvalues of a Hermitian matrix via cyclic Jacobi on the real
    /// symmetric embedding [[Re, -Im], [Im, Re]] (each eigenvalue shows up
    /// twice in the embedding).
    pub fn eigenvalues_hermitian(&self) -> Vec<R> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = vec![R::zero(); 4 * n * n];
        let m = 2 * n;
        for i in 0..n {
            for j in 0..n {
                let z = self[(i, j)];
                a[i * m + j] = z.re;
                a[i * m + (j + n)] = -z.im;
                a[(i + n) * m + j] = z.im;
                a[(i + n) * m + (j + n)] = z.re;
            }
        }
        let mut evals = jacobi_symmetric(&mut a, m);
        evals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // keep one of each duplicated value
        evals.into_iter().step_by(2).collect()
    }

    pub fn min_eigenvalue_hermitian(&self) -> R {
        self.eigenvalues_hermitian()
            .into_iter()
            .fold(R::infinity(), |a, b| if b < a { b } else { a })
    }

    /// exp(self) by scaling-and-squaring with a Taylor tail.
    pub fn expm(&self) -> CMat<R> {
        assert_eq!(self.rows, self.cols);
        let norm = self.frobenius_norm();
        let mut s = 0u32;
        let mut scale = R::one();
        while norm * scale > R::of(0.25) {
            scale = scale / R::of(2.0);
            s += 1;
        }
        let a = self.scale(Cx::new(scale, R::zero()));
        let mut term = CMat::identity(self.rows);
        let mut sum = CMat::identity(self.rows);
        for k in 1..=24 {
            term = term.mul(&a).scale(Cx::new(R::one() / R::from_usize(k).unwrap(), R::zero()));
            sum = sum.add(&term);
        }
        for _ in 0..s {
            sum = sum.mul(&sum);
        }
        sum
    }
}

impl<R: Scalar> std::ops::Index<(usize, usize)> for CMat<R> {
    type Output = Cx<R>;
    fn index(&self, (i, j): (usize, usize)) -> &Cx<R> {
        &self.data[i * self.cols + j]
    }
}

impl<R: Scalar> std::ops::IndexMut<(usize, usize)> for CMat<R> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cx<R> {
        &mut self.data[i * self.cols + j]
    }
}

/// Cyclic Jacobi for a real symmetric matrix stored row-major in `a` (n x n).
/// Returns the eigenvalues; `a` is destroyed.
fn jacobi_symmetric<R: Scalar>(a: &mut [R], n: usize) -> Vec<R> {
    let idx = |i: usize, j: usize| i * n + j;
    for _sweep in 0..64 {
        let mut off = R::zero();
        for i in 0..n {
            for j in i + 1..n {
                off = off + a[idx(i, j)] * a[idx(i, j)];
            }
        }
        let scale = (0..n).map(|i| a[idx(i, i)] * a[idx(i, i)]).sum::<R>() + off;
        if off <= R::of(1e-30) * (scale + R::of(1e-300)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[idx(p, q)];
                if apq == R::zero() {
                    continue;
                }
                let app = a[idx(p, p)];
                let aqq = a[idx(q, q)];
                let theta = (aqq - app) / (R::of(2.0) * apq);
                let t = {
                    let sign = if theta >= R::zero() { R::one() } else { -R::one() };
                    sign / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = c * akp - s * akq;
                    a[idx(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = c * apk - s * aqk;
                    a[idx(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[idx(i, i)]).collect()
}

/// Vector 2-norm.
pub fn vec_norm<R: Scalar>(v: &[Cx<R>]) -> R {
    v.iter().map(|x| x.norm_sqr()).sum::<R>().sqrt()
}

/// |<a|b>| for state vectors.
pub fn overlap<R: Scalar>(a: &[Cx<R>], b: &[Cx<R>]) -> R {
    inner(a, b).norm()
}

/// <a|b> with the left argument conjugated.
pub fn inner<R: Scalar>(a: &[Cx<R>], b: &[Cx<R>]) -> Cx<R> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * *y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    type M = CMat<f64>;
    use num_complex::Complex;

    fn cx(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn cholesky_solve_recovers_solution() {
        // Hermitian positive definite 3x3
        let b = M::from_rows(vec![
            vec![cx(2.0, 0.0), cx(0.5, 0.3), cx(0.1, -0.2)],
            vec![cx(0.0, 0.0), cx(1.5, 0.0), cx(0.2, 0.1)],
            vec![cx(0.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0)],
        ]);
        let m = b.adjoint().mul(&b); // PD by construction
        let x_true = vec![cx(1.0, -1.0), cx(0.5, 2.0), cx(-0.25, 0.0)];
        let rhs = m.matvec(&x_true);
        let x = m.solve_hpd(&rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn hermitian_eigenvalues_match_known_matrix() {
        // Pauli Y has eigenvalues -1, 1
        let y = M::from_rows(vec![
            vec![cx(0.0, 0.0), cx(0.0, -1.0)],
            vec![cx(0.0, 1.0), cx(0.0, 0.0)],
        ]);
        let ev = y.eigenvalues_hermitian();
        assert!((ev[0] + 1.0).abs() < 1e-10);
        assert!((ev[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn expm_of_i_pauli_z_is_phase() {
        let theta = 0.7f64;
        let izt = M::from_rows(vec![
            vec![cx(0.0, theta), cx(0.0, 0.0)],
            vec![cx(0.0, 0.0), cx(0.0, -theta)],
        ]);
        let u = izt.expm();
        assert!((u[(0, 0)] - cx(theta.cos(), theta.sin())).norm() < 1e-12);
        assert!((u[(1, 1)] - cx(theta.cos(), -theta.sin())).norm() < 1e-12);
        assert!(u.is_unitary(1e-12));
    }

    #[test]
    fn kron_dimensions_and_values() {
        let a = M::from_rows(vec![vec![cx(1.0, 0.0), cx(2.0, 0.0)]]);
        let b = M::identity(2);
        let k = a.kron(&b);
        assert_eq!((k.rows, k.cols), (2, 4));
        assert_eq!(k[(0, 0)], cx(1.0, 0.0));
        assert_eq!(k[(1, 3)], cx(2.0, 0.0));
    }
}
