//! Small dense linear algebra over `f64` and over jets.
//!
//! Determinants and adjugates are written once against [`Scalar`] so the
//! same code differentiates through matrix operations when fed jets.
//! Matrices are row-major `Vec`s of length `n * n`.

use nalgebra::{DMatrix, DVector};

use crate::expr::Jet;

pub trait Scalar: Clone {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn magnitude(&self) -> f64;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn over(&self, o: &Self) -> Self;
    fn negate(&self) -> Self;
}

impl Scalar for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn negate(&self) -> Self {
        -self
    }
}

impl Scalar for Jet {
    fn zero_like(&self) -> Self {
        Jet::zero_like(self)
    }
    fn one_like(&self) -> Self {
        self.constant_like(1.0)
    }
    fn magnitude(&self) -> f64 {
        self.value().abs()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn negate(&self) -> Self {
        -self
    }
}

/// Determinant by Gaussian elimination with partial pivoting (pivot chosen
/// on magnitude of the value part).
pub fn det<S: Scalar>(m: &[S], n: usize) -> S {
    assert_eq!(m.len(), n * n);
    if n == 0 {
        panic!("determinant of an empty matrix");
    }
    let mut a = m.to_vec();
    let mut sign = false;
    let mut acc = a[0].one_like();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r * n + col].magnitude().total_cmp(&a[s * n + col].magnitude()))
            .expect("nonempty range");
        if a[pivot * n + col].magnitude() == 0.0 {
            // a vanishing value part says nothing about derivative parts
            return laplace_det(m, n);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            sign = !sign;
        }
        let p = a[col * n + col].clone();
        acc = acc.times(&p);
        for r in col + 1..n {
            let f = a[r * n + col].over(&p);
            for k in col + 1..n {
                let v = a[r * n + k].minus(&f.times(&a[col * n + k]));
                a[r * n + k] = v;
            }
        }
    }
    if sign {
        acc.negate()
    } else {
        acc
    }
}

/// Cofactor expansion along the first row.
fn laplace_det<S: Scalar>(m: &[S], n: usize) -> S {
    if n == 1 {
        return m[0].clone();
    }
    let mut acc = m[0].zero_like();
    let mut minor = Vec::with_capacity((n - 1) * (n - 1));
    for j in 0..n {
        minor.clear();
        for r in 1..n {
            for c in (0..n).filter(|&c| c != j) {
                minor.push(m[r * n + c].clone());
            }
        }
        let term = m[j].times(&laplace_det(&minor, n - 1));
        acc = if j % 2 == 0 { acc.plus(&term) } else { acc.minus(&term) };
    }
    acc
}

/// Classical adjugate (transpose of the cofactor matrix): `adj(A) A = det(A) I`.
pub fn adjugate<S: Scalar>(m: &[S], n: usize) -> Vec<S> {
    assert_eq!(m.len(), n * n);
    if n == 1 {
        return vec![m[0].one_like()];
    }
    let mut out = vec![m[0].zero_like(); n * n];
    let mut minor = Vec::with_capacity((n - 1) * (n - 1));
    for i in 0..n {
        for j in 0..n {
            minor.clear();
            for r in (0..n).filter(|&r| r != i) {
                for c in (0..n).filter(|&c| c != j) {
                    minor.push(m[r * n + c].clone());
                }
            }
            let d = det(&minor, n - 1);
            // cofactor C_ij goes to adj[j][i]
            out[j * n + i] = if (i + j) % 2 == 0 { d } else { d.negate() };
        }
    }
    out
}

/// Inverse as adjugate over determinant; `None` when the determinant's
/// magnitude is below `tol`.
pub fn inverse_via_adjugate<S: Scalar>(m: &[S], n: usize, tol: f64) -> Option<(Vec<S>, S)> {
    let d = det(m, n);
    if d.magnitude() <= tol {
        return None;
    }
    let adj = adjugate(m, n);
    Some((adj.iter().map(|x| x.over(&d)).collect(), d))
}

pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

pub fn to_dmatrix(m: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, m)
}

/// Eigenvalues and eigenvectors of a symmetric matrix, eigenvalues ascending.
/// Each eigenvector is sign-normalised so its largest-magnitude entry is
/// positive (ties broken by the lowest index).
pub fn symmetric_eigen(m: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = nalgebra::SymmetricEigen::new(to_dmatrix(m, n));
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let lead = v
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 + 1e-12 { (i, x.abs()) } else { best })
                .0;
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[k], v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Ordinary least squares via SVD; returns the coefficient vector.
pub fn lstsq(design: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let svd = design.clone().svd(true, true);
    svd.solve(rhs, 1e-14 * svd.singular_values.max())
        .expect("SVD computed with both factors")
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_adjugate_small() {
        let m = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let d = det(&m, 3);
        assert!((d - 18.0).abs() < 1e-12);
        let adj = adjugate(&m, 3);
        let prod = matmul(&adj, &m, 3);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { d } else { 0.0 };
                assert!((prod[i * 3 + j] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn det_needs_pivoting() {
        let m = [0.0, 1.0, 1.0, 0.0];
        assert_eq!(det(&m, 2), -1.0);
    }

    #[test]
    fn jet_determinant_derivative_matches_jacobi_formula() {
        // d/dt det(A + tB) at t=0 equals tr(adj(A) B)
        let a = [1.0, 0.5, 0.2, 0.5, -2.0, 0.3, 0.2, 0.3, 1.5];
        let b = [0.3, -0.1, 0.0, 0.4, 0.2, 0.7, -0.5, 0.1, 0.9];
        let t = Jet::variable(1, 3, 0, 0.0);
        let m: Vec<Jet> = a.iter().zip(&b).map(|(x, y)| (&t * *y).offset(*x)).collect();
        let d = det(&m, 3);
        let adj = adjugate(&a, 3);
        let trace: f64 = (0..3).map(|i| (0..3).map(|k| adj[i * 3 + k] * b[k * 3 + i]).sum::<f64>()).sum();
        assert!((d.value() - det(&a, 3)).abs() < 1e-14);
        assert!((d.d1(0) - trace).abs() < 1e-13);
        // cubic in t: third derivative is 6 det(B)
        assert!((d.d3(0, 0, 0) - 6.0 * det(&b, 3)).abs() < 1e-12);
    }

    #[test]
    fn jet_determinant_of_singular_value_part() {
        // det(tB) = t^3 det(B): the value part vanishes, derivatives do not
        let b = [0.3, -0.1, 0.0, 0.4, 0.2, 0.7, -0.5, 0.1, 0.9];
        let t = Jet::variable(1, 3, 0, 0.0);
        let m: Vec<Jet> = b.iter().map(|y| &t * *y).collect();
        let d = det(&m, 3);
        assert_eq!(d.value(), 0.0);
        assert!((d.d3(0, 0, 0) - 6.0 * det(&b, 3)).abs() < 1e-13);
        // off-diagonal minor [[t, 1], [0, t]] has det t^2
        let one = t.constant_like(1.0);
        let zero = t.constant_like(0.0);
        let d = det(&[t.clone(), one, zero, t.clone()], 2);
        assert!((d.d2(0, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvectors_are_sign_normalised() {
        let (vals, vecs) = symmetric_eigen(&[1.0, 0.0, 0.0, -1.0], 2);
        assert_eq!(vals, vec![-1.0, 1.0]);
        assert_eq!(vecs[0], vec![0.0, 1.0]);
        assert_eq!(vecs[1], vec![1.0, 0.0]);
    }
}
