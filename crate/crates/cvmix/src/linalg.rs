//! Small dense complex-symmetric linear algebra.
//!
//! Covariances here are complex symmetric (Σ = Σᵀ, not Hermitian), so the
//! factorization is an unpivoted LDLᵀ without conjugation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Unpivoted LDLᵀ factorization of a complex symmetric matrix.
///
/// When Re Σ ≻ 0 every pivot has positive real part, so no pivoting is needed.
#[derive(Clone, Debug)]
pub struct Ldlt {
    l: CMat,
    d: Vec<C64>,
}

impl Ldlt {
    pub fn new(a: &CMat) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, a.ncols())));
        }
        let scale = (0..n).map(|i| a[(i, i)].norm()).fold(0.0, f64::max);
        let mut l = CMat::identity(n, n);
        let mut d = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let mut dj = a[(j, j)];
            for k in 0..j {
                dj -= l[(j, k)] * l[(j, k)] * d[k];
            }
            if !(dj.norm() > 1e-15 * scale) || !dj.is_finite() {
                return Err(Error::SingularCovariance);
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)] * d[k];
                }
                l[(i, j)] = s / dj;
            }
        }
        Ok(Self { l, d })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve(&self, b: &CVec) -> CVec {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            for k in 0..i {
                let t = self.l[(i, k)] * y[k];
                y[i] -= t;
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = self.l[(k, i)] * y[k];
                y[i] -= t;
            }
        }
        y
    }

    pub fn solve_mat(&self, b: &CMat) -> CMat {
        let mut out = b.clone();
        for c in 0..b.ncols() {
            let col = self.solve(&b.column(c).into_owned());
            out.set_column(c, &col);
        }
        out
    }

    pub fn inverse(&self) -> CMat {
        let n = self.dim();
        let inv = self.solve_mat(&CMat::identity(n, n));
        symmetrize(&inv)
    }

    /// ln √det(2πΣ), principal branch taken per pivot.
    pub fn ln_norm(&self) -> C64 {
        self.d
            .iter()
            .map(|di| 0.5 * (C64::new(LN_2PI, 0.0) + di.ln()))
            .sum()
    }
}

pub fn symmetrize(m: &CMat) -> CMat {
    (m + m.transpose()) * C64::new(0.5, 0.0)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn to_complex_vec(v: &RVec) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> RMat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> RMat {
    m.map(|z| z.im)
}

/// Block-diagonal symplectic form with [[0,1],[-1,0]] blocks.
pub fn omega(num_modes: usize) -> RMat {
    let mut w = RMat::zeros(2 * num_modes, 2 * num_modes);
    for k in 0..num_modes {
        w[(2 * k, 2 * k + 1)] = 1.0;
        w[(2 * k + 1, 2 * k)] = -1.0;
    }
    w
}

pub fn direct_sum<T: nalgebra::ComplexField + Copy>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (na, nb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(na + nb, na + nb);
    out.view_mut((0, 0), (na, na)).copy_from(a);
    out.view_mut((na, na), (nb, nb)).copy_from(b);
    out
}

/// Smallest eigenvalue of a real symmetric matrix.
pub fn min_eigenvalue(m: &RMat) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn is_positive_definite(m: &RMat) -> bool {
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::Cholesky::new(sym).is_some()
}

/// Rows and columns of `m` selected by `idx`.
pub fn select<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select_vec<T: nalgebra::Scalar + Copy>(v: &DVector<T>, idx: &[usize]) -> DVector<T> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Quadrature indices (q_k, p_k) for the listed modes.
pub fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

/// Embed a matrix acting on `modes` into `num_modes`, identity elsewhere.
pub fn embed(m: &RMat, modes: &[usize], num_modes: usize, fill_identity: bool) -> RMat {
    let idx = quadrature_indices(modes);
    let mut out = if fill_identity {
        RMat::identity(2 * num_modes, 2 * num_modes)
    } else {
        RMat::zeros(2 * num_modes, 2 * num_modes)
    };
    for (i, &a) in idx.iter().enumerate() {
        for (j, &b) in idx.iter().enumerate() {
            out[(a, b)] = m[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ldlt_solves_complex_symmetric() {
        let a = CMat::from_row_slice(3, 3, &[
            c(2.0, 0.3), c(0.4, -0.2), c(0.1, 0.0),
            c(0.4, -0.2), c(1.5, 0.5), c(-0.3, 0.1),
            c(0.1, 0.0), c(-0.3, 0.1), c(1.0, -0.4),
        ]);
        let f = Ldlt::new(&a).unwrap();
        let b = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(-2.0, 0.5)]);
        let x = f.solve(&b);
        assert!((&a * x - b).norm() < 1e-12);
        let inv = f.inverse();
        assert!((&a * inv - CMat::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn ln_norm_matches_real_determinant() {
        let a = RMat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = Ldlt::new(&to_complex(&a)).unwrap();
        let det = (2.0 * std::f64::consts::PI).powi(2) * a.determinant();
        assert!((f.ln_norm() - c(0.5 * det.ln(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn singular_is_rejected() {
        let a = CMat::from_element(2, 2, c(1.0, 0.0));
        assert_eq!(Ldlt::new(&a).unwrap_err(), Error::SingularCovariance);
    }

    #[test]
    fn omega_squares_to_minus_identity() {
        let w = omega(3);
        assert_eq!(&w * &w, -RMat::identity(6, 6));
        assert_eq!(w.transpose(), -w);
    }
}
