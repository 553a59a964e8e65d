//! Twisted cochain complexes `C^0 -> C^1 -> C^2` with coefficients in `sl(2, C)`
//! and their cohomology.
//!
//! Cochains are stored in the geometric basis: one copy of the orthonormal
//! basis of the Lie algebra per cell. The twisting convention is
//! `theta(g sigma) = Ad rho(g) theta(sigma)`, which gives
//!
//! * `(delta0 v)_i = Ad rho(x_i) v - v`,
//! * `delta1 u = sum_i Ad(dr/dx_i) u_i` (left Fox derivatives of the relator).

use crate::error::{Error, Result};
use crate::lie::{ad_ring, put_block, Sl2Matrix};
use crate::numlin::{self, CMatrix};
use crate::reps::Representation;
use crate::tol;
use crate::words::{fox_derivative, GroupWord};
use crate::C64;
use nalgebra::Matrix3;

/// Coboundary matrices of a complex with one 0-cell.
#[derive(Debug, Clone)]
pub struct TwistedComplex {
    /// `(d0, d1, d2)`; `d_p` is 3 times the number of `p`-cells.
    pub dims: [usize; 3],
    /// `d1 x d0`.
    pub delta0: CMatrix,
    /// `d2 x d1`; has zero rows when there is no 2-cell.
    pub delta1: CMatrix,
}

/// Stacked blocks `Ad rho(x_i) - I`.
pub fn delta0(images: &[Sl2Matrix]) -> CMatrix {
    let mut m = CMatrix::zeros(3 * images.len(), 3);
    for (i, g) in images.iter().enumerate() {
        put_block(&mut m, 3 * i, 0, &(g.ad_matrix() - Matrix3::identity()));
    }
    m
}

/// Row of blocks `Ad(dr/dx_i)`.
pub fn delta1(images: &[Sl2Matrix], relator: &GroupWord) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(3, 3 * images.len());
    for i in 0..images.len() {
        let block = ad_ring(images, &fox_derivative(relator, i + 1))?;
        put_block(&mut m, 0, 3 * i, &block);
    }
    Ok(m)
}

impl TwistedComplex {
    pub fn from_matrices(delta0: CMatrix, delta1: CMatrix) -> Result<Self> {
        if delta0.ncols() != 3 || delta1.ncols() != delta0.nrows() {
            return Err(Error::Shape(format!(
                "coboundaries {:?} and {:?} do not compose",
                delta0.shape(),
                delta1.shape()
            )));
        }
        let dims = [3, delta0.nrows(), delta1.nrows()];
        Ok(TwistedComplex { dims, delta0, delta1 })
    }

    /// The disk: a single 0-cell.
    pub fn disk() -> Self {
        TwistedComplex { dims: [3, 0, 0], delta0: CMatrix::zeros(0, 3), delta1: CMatrix::zeros(0, 0) }
    }

    /// The circle traced by `s`: one 0-cell and one 1-cell, `delta0 = Ad rho(s) - I`.
    pub fn circle(images: &[Sl2Matrix], s: &GroupWord) -> Result<Self> {
        let g = s.evaluate(images)?;
        g.validate()?;
        let mut d0 = CMatrix::zeros(3, 3);
        put_block(&mut d0, 0, 0, &(g.ad_matrix() - Matrix3::identity()));
        Ok(TwistedComplex { dims: [3, 3, 0], delta0: d0, delta1: CMatrix::zeros(0, 3) })
    }

    /// Coboundary `C^p -> C^{p+1}` for `p` in `0..3` (zero map out of `C^2`).
    pub fn coboundary(&self, p: usize) -> CMatrix {
        match p {
            0 => self.delta0.clone(),
            1 => self.delta1.clone(),
            _ => CMatrix::zeros(0, self.dims[2]),
        }
    }

    /// Coboundary `C^{p-1} -> C^p` (zero map into `C^0`).
    pub fn incoming(&self, p: usize) -> CMatrix {
        match p {
            0 => CMatrix::zeros(self.dims[0], 0),
            1 => self.delta0.clone(),
            _ => self.delta1.clone(),
        }
    }

    /// `|delta1 delta0| / (|delta1| |delta0|)`.
    pub fn chain_defect(&self) -> f64 {
        let scale = self.delta1.norm() * self.delta0.norm();
        if scale == 0.0 {
            return 0.0;
        }
        (&self.delta1 * &self.delta0).norm() / scale
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.dims[0] as i64 - self.dims[1] as i64 + self.dims[2] as i64
    }

    /// The same complex written in another orthonormal basis `q` of the Lie
    /// algebra (`q^T q = I`, columns are the new basis in old coordinates).
    pub fn change_coefficient_basis(&self, q: &Matrix3<C64>) -> Result<Self> {
        let qinv = q.try_inverse().ok_or_else(|| Error::DegenerateBasis("singular coefficient basis".into()))?;
        let conj = |n: usize| -> (CMatrix, CMatrix) {
            let mut a = CMatrix::zeros(3 * n, 3 * n);
            let mut b = CMatrix::zeros(3 * n, 3 * n);
            for i in 0..n {
                put_block(&mut a, 3 * i, 3 * i, &qinv);
                put_block(&mut b, 3 * i, 3 * i, q);
            }
            (a, b)
        };
        let (l1, r1) = conj(self.dims[1] / 3);
        let (l2, _) = conj(self.dims[2] / 3);
        let (_, r0) = conj(1);
        let d0 = &l1 * &self.delta0 * &r0;
        let d1 = &l2 * &self.delta1 * &r1;
        Ok(TwistedComplex { dims: self.dims, delta0: d0, delta1: d1 })
    }
}

/// Complex of a surface representation from its presentation.
pub fn build_complex(rep: &Representation) -> Result<TwistedComplex> {
    let residual = rep.relator_residual();
    if residual >= tol::RELATOR_TOL {
        return Err(Error::InvalidRepresentation(format!("relator residual {residual:.3e}")));
    }
    let d0 = delta0(rep.images());
    let d1 = match &rep.presentation().relator {
        Some(r) => delta1(rep.images(), r)?,
        None => CMatrix::zeros(0, d0.nrows()),
    };
    TwistedComplex::from_matrices(d0, d1)
}

/// Cohomology with orthonormal representatives orthogonal to the coboundaries.
#[derive(Debug, Clone)]
pub struct CohomologyData {
    pub dims: [usize; 3],
    /// Columns: representative cocycles in geometric coordinates.
    pub reps: [CMatrix; 3],
    /// Orthonormal bases of the coboundary spaces `B^p`.
    pub coboundaries: [CMatrix; 3],
    /// The coboundary maps, kept for the cocycle test in [`class_coordinates`].
    outgoing: [CMatrix; 3],
    ranks: [usize; 3],
}

pub fn cohomology(cx: &TwistedComplex, rel_tol: f64) -> Result<CohomologyData> {
    let rank_data = [
        numlin::rank_decompose(&cx.coboundary(0), rel_tol)?,
        numlin::rank_decompose(&cx.coboundary(1), rel_tol)?,
    ];
    let ranks = [rank_data[0].rank, rank_data[1].rank, 0];
    let mut dims = [0usize; 3];
    let mut reps: [CMatrix; 3] = Default::default();
    let mut coboundaries: [CMatrix; 3] = Default::default();
    for p in 0..3 {
        let d = cx.dims[p];
        let incoming_rank = if p == 0 { 0 } else { ranks[p - 1] };
        let h = d as i64 - ranks[p] as i64 - incoming_rank as i64;
        if h < 0 {
            return Err(Error::ToleranceFailure(format!(
                "negative cohomology dimension in degree {p}"
            )));
        }
        dims[p] = h as usize;
        coboundaries[p] = if p == 0 {
            CMatrix::zeros(d, 0)
        } else {
            rank_data[p - 1].image_basis.clone()
        };
        reps[p] = if ranks[p] == 0 && incoming_rank == 0 {
            CMatrix::identity(d, d)
        } else {
            let z = if p < 2 { rank_data[p].kernel_basis.clone() } else { CMatrix::identity(d, d) };
            let q = &coboundaries[p];
            let projected = &z - q * (q.adjoint() * &z);
            let rd = numlin::rank_decompose(&projected, rel_tol)?;
            if rd.rank != dims[p] {
                return Err(Error::ToleranceFailure(format!(
                    "degree {p}: {} harmonic representatives for dimension {}",
                    rd.rank, dims[p]
                )));
            }
            rd.image_basis
        };
    }
    let outgoing = [cx.coboundary(0), cx.coboundary(1), cx.coboundary(2)];
    Ok(CohomologyData { dims, reps, coboundaries, outgoing, ranks })
}

impl CohomologyData {
    pub fn ranks(&self) -> [usize; 3] {
        self.ranks
    }

    /// Coordinates of the classes of the cocycle columns of `z` in degree `p`.
    pub fn class_coordinates(&self, p: usize, z: &CMatrix) -> Result<CMatrix> {
        class_coordinates(self, p, z)
    }
}

/// Coordinates `c` with `z - reps c` a coboundary.
///
/// The representatives are orthonormal and orthogonal to the coboundaries, so
/// `c = reps^H z`.
pub fn class_coordinates(coh: &CohomologyData, p: usize, z: &CMatrix) -> Result<CMatrix> {
    let reps = &coh.reps[p];
    if z.nrows() != reps.nrows() {
        return Err(Error::Shape(format!(
            "cochain of length {} in degree {p} of dimension {}",
            z.nrows(),
            reps.nrows()
        )));
    }
    let out = &coh.outgoing[p];
    let scale = numlin::operator_norm(out).max(1.0);
    let q = &coh.coboundaries[p];
    let c = reps.adjoint() * z;
    for j in 0..z.ncols() {
        let zj = z.column(j).into_owned();
        let zn = zj.norm();
        let residual = (out * &zj).norm();
        if residual > tol::COCYCLE_TOL * scale * zn.max(f64::MIN_POSITIVE) {
            return Err(Error::NotACocycle { residual });
        }
        let rem = &zj - reps * c.column(j);
        let off = (&rem - q * (q.adjoint() * &rem)).norm();
        if off > 1e-8 * zn.max(f64::MIN_POSITIVE) {
            return Err(Error::NotACocycle { residual: off });
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::{random_sl2, sample_block_rep, sample_connected_sum};
    use crate::rng;
    use crate::words::surface_presentation;

    #[test]
    fn circle_and_disk() {
        let images = [Sl2Matrix::identity()];
        let cx = TwistedComplex::circle(&images, &GroupWord::gen(1)).unwrap();
        assert!(cx.delta0.norm() < 1e-14);
        let coh = cohomology(&cx, 1e-9).unwrap();
        assert_eq!(coh.dims, [3, 3, 0]);
        assert_eq!(coh.reps[0], CMatrix::identity(3, 3));

        let disk = TwistedComplex::disk();
        let coh = cohomology(&disk, 1e-9).unwrap();
        assert_eq!(coh.dims, [3, 0, 0]);
    }

    #[test]
    fn genus_two_dimensions() {
        let mut r = rng::seeded(17);
        let rep = sample_block_rep(&mut r).unwrap();
        let cx = build_complex(&rep).unwrap();
        assert_eq!(cx.dims, [3, 12, 3]);
        assert!(cx.chain_defect() < 1e-10);
        assert_eq!(cx.euler_characteristic(), 3 * -2);
        let coh = cohomology(&cx, 1e-9).unwrap();
        assert_eq!(coh.dims, [0, 6, 0]);
        assert_eq!(numlin::rank_decompose(&cx.delta0, 1e-9).unwrap().rank, 3);

        let bordered = rep.restrict(1, 2, 1).unwrap();
        let coh = cohomology(&build_complex(&bordered).unwrap(), 1e-9).unwrap();
        assert_eq!(coh.dims, [0, 9, 0]);
    }

    #[test]
    fn genus_four_dimensions() {
        let rep = sample_connected_sum(2, &mut rng::seeded(2)).unwrap();
        let cx = build_complex(&rep).unwrap();
        let coh = cohomology(&cx, 1e-9).unwrap();
        assert_eq!(coh.dims, [0, 18, 0]);
    }

    #[test]
    fn representatives_are_cocycles() {
        let rep = sample_block_rep(&mut rng::seeded(4)).unwrap();
        let cx = build_complex(&rep).unwrap();
        let coh = cohomology(&cx, 1e-9).unwrap();
        assert!((&cx.delta1 * &coh.reps[1]).norm() < 1e-10);
        assert!((coh.reps[1].adjoint() * &cx.delta0).norm() < 1e-10);
    }

    #[test]
    fn class_coordinate_examples() {
        let rep = sample_block_rep(&mut rng::seeded(8)).unwrap();
        let cx = build_complex(&rep).unwrap();
        let coh = cohomology(&cx, 1e-9).unwrap();
        let rep0 = coh.reps[1].columns(0, 1).into_owned();
        let c = class_coordinates(&coh, 1, &rep0).unwrap();
        assert!((c[(0, 0)] - 1.0).norm() < 1e-12);
        assert!(c.rows(1, 5).norm() < 1e-12);

        let mut r = rng::seeded(1);
        let v = numlin::random_matrix(&mut r, 3, 1);
        let cob = &cx.delta0 * &v;
        assert!(class_coordinates(&coh, 1, &cob).unwrap().norm() < 1e-10);

        let z = &rep0 * C64::from(2.0) + &cob;
        let c = class_coordinates(&coh, 1, &z).unwrap();
        assert!((c[(0, 0)] - 2.0).norm() < 1e-10);
        assert!(c.rows(1, 5).norm() < 1e-10);

        let junk = numlin::random_matrix(&mut r, 12, 1);
        assert!(matches!(class_coordinates(&coh, 1, &junk), Err(Error::NotACocycle { .. })));
    }

    #[test]
    fn conjugation_keeps_dimensions() {
        let mut r = rng::seeded(12);
        let rep = sample_block_rep(&mut r).unwrap();
        let g = random_sl2(&mut r).unwrap();
        let a = cohomology(&build_complex(&rep).unwrap(), 1e-9).unwrap();
        let b = cohomology(&build_complex(&rep.conjugate(&g).unwrap()).unwrap(), 1e-9).unwrap();
        assert_eq!(a.dims, b.dims);
    }

    #[test]
    fn trivial_rep_has_full_cohomology() {
        let pres = surface_presentation(2, 0).unwrap();
        let rep = Representation::new(pres, vec![Sl2Matrix::identity(); 4]).unwrap();
        let coh = cohomology(&build_complex(&rep).unwrap(), 1e-9).unwrap();
        assert_eq!(coh.dims, [3, 12, 3]);
    }
}
