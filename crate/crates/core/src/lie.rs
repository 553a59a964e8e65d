//! The Lie algebra `sl(2, C)` with its Killing form `B(A, B) = 4 tr(AB)`, a fixed
//! `B`-orthonormal basis, and the adjoint action of `SL(2, C)`.
//!
//! Vectors are stored as coordinates in the orthonormal basis; because the basis
//! is orthonormal for a *bilinear* form, the Killing form in coordinates is the
//! plain (non-conjugated) dot product.

use crate::error::{Error, Result};
use crate::numlin::CMatrix;
use crate::tol;
use crate::words::GroupRingElement;
use crate::C64;
use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Element of `sl(2, C)` in coordinates of the orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LieVec(pub Vector3<C64>);

/// Element of `SL(2, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[[f64; 2]; 2]; 2]", from = "[[[f64; 2]; 2]; 2]")]
pub struct Sl2Matrix(pub Matrix2<C64>);

impl LieVec {
    pub fn new(a: C64, b: C64, c: C64) -> Self {
        LieVec(Vector3::new(a, b, c))
    }

    pub fn zero() -> Self {
        LieVec(Vector3::zeros())
    }

    pub fn from_coords(v: Vector3<C64>) -> Self {
        LieVec(v)
    }

    pub fn coords(&self) -> &Vector3<C64> {
        &self.0
    }

    /// Traceless matrix form `sum_i v_i a_i`.
    pub fn to_matrix(&self) -> Matrix2<C64> {
        let basis = basis_matrices();
        basis[0] * self.0[0] + basis[1] * self.0[1] + basis[2] * self.0[2]
    }

    /// Coordinates of a traceless matrix: `v_i = B(m, a_i)`.
    pub fn from_matrix(m: &Matrix2<C64>) -> Self {
        let basis = basis_matrices();
        LieVec::new(
            killing_matrix(m, &basis[0]),
            killing_matrix(m, &basis[1]),
            killing_matrix(m, &basis[2]),
        )
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl Add for LieVec {
    type Output = LieVec;
    fn add(self, rhs: LieVec) -> LieVec {
        LieVec(self.0 + rhs.0)
    }
}

impl Sub for LieVec {
    type Output = LieVec;
    fn sub(self, rhs: LieVec) -> LieVec {
        LieVec(self.0 - rhs.0)
    }
}

impl Neg for LieVec {
    type Output = LieVec;
    fn neg(self) -> LieVec {
        LieVec(-self.0)
    }
}

impl Mul<C64> for LieVec {
    type Output = LieVec;
    fn mul(self, rhs: C64) -> LieVec {
        LieVec(self.0 * rhs)
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// The `B`-orthonormal basis `{H, E + F, (E - F)/i} / (2 sqrt 2)` as matrices.
pub fn basis_matrices() -> [Matrix2<C64>; 3] {
    let s = 1.0 / (2.0 * std::f64::consts::SQRT_2);
    let z = c(0.0, 0.0);
    let h = Matrix2::new(c(s, 0.0), z, z, c(-s, 0.0));
    let e_plus_f = Matrix2::new(z, c(s, 0.0), c(s, 0.0), z);
    // (E - F) / i = -i (E - F)
    let e_minus_f_over_i = Matrix2::new(z, c(0.0, -s), c(0.0, s), z);
    [h, e_plus_f, e_minus_f_over_i]
}

/// The orthonormal basis as Lie vectors (unit coordinate vectors).
pub fn orthonormal_basis() -> (LieVec, LieVec, LieVec) {
    let one = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    (LieVec::new(one, z, z), LieVec::new(z, one, z), LieVec::new(z, z, one))
}

fn killing_matrix(a: &Matrix2<C64>, b: &Matrix2<C64>) -> C64 {
    (a * b).trace() * 4.0
}

/// `B(a, b) = 4 tr(AB)`.
pub fn killing_form(a: &LieVec, b: &LieVec) -> C64 {
    a.0.dot(&b.0)
}

/// Killing form evaluated directly on matrix forms, independent of coordinates.
pub fn killing_form_matrices(a: &Matrix2<C64>, b: &Matrix2<C64>) -> C64 {
    killing_matrix(a, b)
}

impl Sl2Matrix {
    pub fn identity() -> Self {
        Sl2Matrix(Matrix2::identity())
    }

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Sl2Matrix(Matrix2::new(a, b, c, d))
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Checks `|det - 1| < tol::DET_TOL`.
    pub fn validate(&self) -> Result<()> {
        let d = self.det();
        if !d.re.is_finite() || !d.im.is_finite() || (d - 1.0).norm() >= tol::DET_TOL {
            return Err(Error::InvalidRepresentation(format!(
                "determinant {d} is not 1"
            )));
        }
        Ok(())
    }

    /// Inverse via the adjugate, normalised by the determinant.
    pub fn inverse(&self) -> Self {
        let m = &self.0;
        let d = self.det();
        Sl2Matrix(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / d)
    }

    pub fn frobenius_distance(&self, other: &Sl2Matrix) -> f64 {
        (self.0 - other.0).norm()
    }

    /// `a b a^-1 b^-1`.
    pub fn commutator(a: &Sl2Matrix, b: &Sl2Matrix) -> Sl2Matrix {
        *a * *b * a.inverse() * b.inverse()
    }

    /// Matrix of `Ad_g` in the orthonormal basis (columns are images of basis vectors).
    pub fn ad_matrix(&self) -> Matrix3<C64> {
        let basis = basis_matrices();
        let inv = self.inverse();
        let mut out = Matrix3::zeros();
        for (j, a) in basis.iter().enumerate() {
            let conj = self.0 * a * inv.0;
            out.set_column(j, &LieVec::from_matrix(&conj).0);
        }
        out
    }
}

impl Mul for Sl2Matrix {
    type Output = Sl2Matrix;
    fn mul(self, rhs: Sl2Matrix) -> Sl2Matrix {
        Sl2Matrix(self.0 * rhs.0)
    }
}

impl From<Sl2Matrix> for [[[f64; 2]; 2]; 2] {
    fn from(m: Sl2Matrix) -> Self {
        let p = |z: C64| [z.re, z.im];
        [
            [p(m.0[(0, 0)]), p(m.0[(0, 1)])],
            [p(m.0[(1, 0)]), p(m.0[(1, 1)])],
        ]
    }
}

impl From<[[[f64; 2]; 2]; 2]> for Sl2Matrix {
    fn from(a: [[[f64; 2]; 2]; 2]) -> Self {
        let z = |p: [f64; 2]| C64::new(p[0], p[1]);
        Sl2Matrix::new(z(a[0][0]), z(a[0][1]), z(a[1][0]), z(a[1][1]))
    }
}

/// `Ad_g v = g V g^-1`.
pub fn adjoint(g: &Sl2Matrix, v: &LieVec) -> Result<LieVec> {
    g.validate()?;
    Ok(LieVec(g.ad_matrix() * v.0))
}

/// Matrix of `Ad . rho` extended Z-linearly to the group ring.
pub fn ad_ring(images: &[Sl2Matrix], z: &GroupRingElement) -> Result<Matrix3<C64>> {
    let mut out = Matrix3::zeros();
    for (coeff, word) in z.terms() {
        let g = word.evaluate(images)?;
        out += g.ad_matrix() * C64::from(*coeff as f64);
    }
    Ok(out)
}

/// Copies a 3x3 block into a dynamic matrix at `(row, col)`.
pub(crate) fn put_block(m: &mut CMatrix, row: usize, col: usize, block: &Matrix3<C64>) {
    m.view_mut((row, col), (3, 3)).copy_from(block);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::GroupWord;

    fn e() -> Matrix2<C64> {
        Matrix2::new(c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.))
    }

    fn f() -> Matrix2<C64> {
        Matrix2::new(c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.))
    }

    #[test]
    fn killing_on_standard_triple() {
        let (ee, ff) = (LieVec::from_matrix(&e()), LieVec::from_matrix(&f()));
        assert!((killing_form(&ee, &ff) - 4.0).norm() < 1e-12);
        assert!(killing_form(&ee, &ee).norm() < 1e-12);
        assert!(killing_form(&ee, &LieVec::zero()).norm() < 1e-12);
        // coordinate form agrees with the matrix definition
        assert!((killing_form_matrices(&e(), &f()) - 4.0).norm() < 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = basis_matrices();
        for i in 0..3 {
            assert!(b[i].trace().norm() < 1e-12);
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((killing_form_matrices(&b[i], &b[j]) - expect).norm() < 1e-12);
            }
        }
        let (a1, _, _) = orthonormal_basis();
        assert!((a1.to_matrix() - b[0]).norm() < 1e-15);
    }

    #[test]
    fn matrix_round_trip() {
        let v = LieVec::new(c(0.3, -1.0), c(2.0, 0.5), c(-0.7, 0.1));
        let m = v.to_matrix();
        assert!(m.trace().norm() < 1e-12);
        assert!((LieVec::from_matrix(&m) - v).norm() < 1e-12);
    }

    #[test]
    fn adjoint_examples() {
        let v = LieVec::new(c(0.3, -1.0), c(2.0, 0.5), c(-0.7, 0.1));
        let id = Sl2Matrix::identity();
        assert!((adjoint(&id, &v).unwrap() - v).norm() < 1e-14);
        let minus = Sl2Matrix(-Matrix2::identity());
        assert!((adjoint(&minus, &v).unwrap() - v).norm() < 1e-14);

        let lambda = c(1.3, 0.4);
        let g = Sl2Matrix::new(lambda, c(0., 0.), c(0., 0.), lambda.inv());
        let ee = LieVec::from_matrix(&e());
        let got = adjoint(&g, &ee).unwrap();
        assert!((got - ee * (lambda * lambda)).norm() < 1e-12);

        let bad = Sl2Matrix::new(c(2., 0.), c(0., 0.), c(0., 0.), c(1., 0.));
        assert!(matches!(adjoint(&bad, &v), Err(Error::InvalidRepresentation(_))));
    }

    #[test]
    fn ad_ring_examples() {
        let images = [
            Sl2Matrix::new(c(1., 0.2), c(0.5, 0.), c(-0.3, 1.), c(0., 0.)),
            Sl2Matrix::new(c(2., 0.), c(1., 1.), c(0., 0.), c(0.5, 0.)),
        ];
        // fix det of first image
        let d = images[0].det().sqrt();
        let images = [Sl2Matrix(images[0].0 / d), images[1]];

        let one = GroupRingElement::from_terms(vec![(1, GroupWord::empty())]);
        assert!((ad_ring(&images, &one).unwrap() - Matrix3::identity()).norm() < 1e-14);

        let zero =
            GroupRingElement::from_terms(vec![(1, GroupWord::empty()), (-1, GroupWord::empty())]);
        assert!(ad_ring(&images, &zero).unwrap().norm() < 1e-14);

        let bad = GroupRingElement::from_terms(vec![(1, GroupWord::gen(5))]);
        assert!(matches!(ad_ring(&images, &bad), Err(Error::MalformedWord(_))));
    }
}
