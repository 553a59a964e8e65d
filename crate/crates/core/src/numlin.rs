//! Dense complex linear algebra: rank/kernel/image by SVD, minimum-norm
//! preimages, transition determinants and Pfaffians.

use crate::error::{Error, Result};
use crate::tol;
use crate::C64;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

/// Dense complex matrix.
pub type CMatrix = DMatrix<C64>;

/// Rank, kernel and image of a matrix at a relative singular-value threshold.
#[derive(Debug, Clone)]
pub struct RankData {
    pub rank: usize,
    /// Orthonormal columns spanning the kernel.
    pub kernel_basis: CMatrix,
    /// Orthonormal columns spanning the column space.
    pub image_basis: CMatrix,
    /// Singular values in decreasing order.
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
}

/// SVD `A = U diag(s) V^H` with `s` sorted decreasingly; `U` is thin, `V` is square.
struct FullSvd {
    u: CMatrix,
    s: Vec<f64>,
    v: CMatrix,
}

fn full_svd(a: &CMatrix) -> FullSvd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return FullSvd { u: CMatrix::zeros(m, 0), s: vec![], v: CMatrix::identity(n, n) };
    }
    let fa = faer::Mat::<C64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = fa.svd().expect("SVD of a finite matrix converges");
    let (u, v) = (svd.U(), svd.V());
    let sv = svd.S().column_vector();
    let k = m.min(n);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sv[j].re.total_cmp(&sv[i].re));
    let s: Vec<f64> = order.iter().map(|&i| sv[i].re).collect();
    // columns past min(m, n) complete V to a unitary matrix
    let v_col = |c: usize| if c < k { order[c] } else { c };
    FullSvd {
        u: CMatrix::from_fn(m, k, |r, c| u[(r, order[c])]),
        s,
        v: CMatrix::from_fn(n, n, |r, c| v[(r, v_col(c))]),
    }
}

pub fn check_finite(a: &CMatrix) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericInput("matrix has non-finite entries".into()))
    }
}

/// Numerical rank with `rank = #{s_i > max(rel_tol * s_max, RANK_ABS)}`.
pub fn rank_decompose(a: &CMatrix, rel_tol: f64) -> Result<RankData> {
    check_finite(a)?;
    let n = a.ncols();
    let svd = full_svd(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let threshold = (rel_tol * smax).max(tol::RANK_ABS);
    let rank = svd.s.iter().filter(|&&s| s > threshold).count();
    // the kernel is the span of the right singular vectors past the rank
    let kernel_basis = svd.v.columns(rank, n - rank).into_owned();
    let image_basis = svd.u.columns(0, rank).into_owned();
    Ok(RankData {
        rank,
        kernel_basis,
        image_basis,
        singular_values: svd.s,
        tolerance_used: rel_tol,
    })
}

/// Rank-truncated pseudo-inverse.
pub fn pseudo_inverse(a: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    check_finite(a)?;
    let (m, n) = a.shape();
    let svd = full_svd(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let mut out = CMatrix::zeros(n, m);
    let threshold = (rel_tol * smax).max(tol::RANK_ABS);
    for (i, &s) in svd.s.iter().enumerate() {
        if s <= threshold {
            break;
        }
        let vi = svd.v.column(i);
        let ui = svd.u.column(i);
        out += (vi * ui.adjoint()) * C64::from(1.0 / s);
    }
    Ok(out)
}

/// Minimum-norm solution of `A x = b`, column by column.
pub fn min_norm_preimage(a: &CMatrix, b: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "preimage of {} rows under a {}x{} map",
            b.nrows(),
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(b)?;
    let pinv = pseudo_inverse(a, rel_tol)?;
    let x = &pinv * b;
    let scale = operator_norm(a);
    let r = a * &x - b;
    for j in 0..b.ncols() {
        let residual = r.column(j).norm();
        let reference = b.column(j).norm().max(scale * x.column(j).norm());
        if residual > tol::PREIMAGE_TOL * reference {
            return Err(Error::NotInImage { residual: residual / reference.max(f64::MIN_POSITIVE) });
        }
    }
    Ok(x)
}

/// Largest singular value.
pub fn operator_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    full_svd(a).s[0]
}

/// `s_max / s_min` of a square matrix; infinite when singular.
pub fn condition_number(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let s = full_svd(a).s;
    let smin = *s.last().unwrap();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

/// Determinant by LU; the empty matrix has determinant 1.
pub fn det(a: &CMatrix) -> C64 {
    if a.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    a.clone().lu().determinant()
}

/// `det M` where `old * M = new`.
pub fn transition_det(new_basis: &CMatrix, old_basis: &CMatrix) -> Result<C64> {
    if new_basis.shape() != old_basis.shape() || !old_basis.is_square() {
        return Err(Error::Shape(format!(
            "transition between {:?} and {:?} bases",
            new_basis.shape(),
            old_basis.shape()
        )));
    }
    check_finite(new_basis)?;
    check_finite(old_basis)?;
    let condition = condition_number(old_basis);
    if condition > tol::MAX_CONDITION {
        return Err(Error::IllConditionedBasis { condition });
    }
    if old_basis.nrows() == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    let m = old_basis
        .clone()
        .lu()
        .solve(new_basis)
        .ok_or(Error::IllConditionedBasis { condition })?;
    Ok(det(&m))
}

/// Horizontal concatenation of blocks with equal row counts.
pub fn hstack(blocks: &[&CMatrix], rows: usize) -> CMatrix {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Block-diagonal matrix.
pub fn block_diag(blocks: &[&CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Pfaffian of an antisymmetric matrix by skew elimination with pivoting.
///
/// The input is checked for antisymmetry (`|W + W^T| < 1e-8 |W|`) and then
/// replaced by its antisymmetric part.
pub fn pfaffian(w: &CMatrix) -> Result<C64> {
    let n = w.nrows();
    if !w.is_square() || n % 2 == 1 {
        return Err(Error::Shape(format!("Pfaffian of a {:?} matrix", w.shape())));
    }
    check_finite(w)?;
    let scale = w.norm();
    let defect = (w + w.transpose()).norm();
    if defect > tol::ANTISYM_TOL * scale {
        return Err(Error::Symmetry { defect: defect / scale });
    }
    let mut a = (w - w.transpose()) * C64::from(0.5);
    let mut pf = C64::new(1.0, 0.0);
    for k in (0..n.saturating_sub(1)).step_by(2) {
        let (mut kp, mut best) = (k + 1, a[(k + 1, k)].norm());
        for i in k + 2..n {
            let v = a[(i, k)].norm();
            if v > best {
                kp = i;
                best = v;
            }
        }
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        if best == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let pivot = a[(k, k + 1)];
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<C64> = (k + 2..n).map(|j| a[(k, j)] / pivot).collect();
            let col: Vec<C64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    Ok(pf)
}
