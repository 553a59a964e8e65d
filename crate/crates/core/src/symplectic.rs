//! The cup-product symplectic form on `H^1` of a closed surface, its Gram
//! matrix and Pfaffian, and the torsion/volume comparison.
//!
//! A 1-cochain is a crossed homomorphism `u(gh) = u(g) + Ad rho(g) u(h)`,
//! determined by its values on generators. Against the 2-cell attached along
//! `r = y_1 ... y_L` the pairing is
//!
//! ```text
//! Q(u, v) = sum_j B(u(w_{j-1}), Ad rho(w_{j-1}) v(y_j)) + sum_{y_j = x^-1} B(u(x), v(x))
//! ```
//!
//! with `w_j` the prefixes of `r`. The second sum accounts for the degenerate
//! simplices `x . x^-1` that an inverse letter contributes to the fundamental
//! cycle; without it `Q` is not antisymmetric on cocycles.

use crate::cochain::{CohomologyData, TwistedComplex};
use crate::error::{Error, Result};
use crate::lie::{killing_form, LieVec, Sl2Matrix};
use crate::numlin::{self, CMatrix};
use crate::reps::Representation;
use crate::tol;
use crate::torsion;
use crate::words::GroupWord;
use crate::C64;
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

/// A 1-cochain given by its values on the generators.
#[derive(Debug, Clone)]
pub struct CrossedHom {
    pub values: Vec<LieVec>,
    images: Vec<Sl2Matrix>,
}

impl CrossedHom {
    pub fn new(images: &[Sl2Matrix], values: Vec<LieVec>) -> Result<Self> {
        if values.len() != images.len() {
            return Err(Error::Shape(format!(
                "{} values for {} generators",
                values.len(),
                images.len()
            )));
        }
        Ok(CrossedHom { values, images: images.to_vec() })
    }

    /// From a cochain column in geometric coordinates.
    pub fn from_cochain(images: &[Sl2Matrix], u: &CMatrix) -> Result<Self> {
        if u.nrows() != 3 * images.len() || u.ncols() != 1 {
            return Err(Error::Shape(format!("cochain of shape {:?}", u.shape())));
        }
        let values = (0..images.len())
            .map(|i| LieVec::new(u[(3 * i, 0)], u[(3 * i + 1, 0)], u[(3 * i + 2, 0)]))
            .collect();
        CrossedHom::new(images, values)
    }

    pub fn images(&self) -> &[Sl2Matrix] {
        &self.images
    }

    pub fn to_cochain(&self) -> CMatrix {
        let mut out = CMatrix::zeros(3 * self.values.len(), 1);
        for (i, v) in self.values.iter().enumerate() {
            for a in 0..3 {
                out[(3 * i + a, 0)] = v.0[a];
            }
        }
        out
    }
}

/// `u(w)` by left-to-right accumulation.
pub fn crossed_eval(u: &CrossedHom, w: &GroupWord) -> Result<LieVec> {
    let mut acc = Vector3::zeros();
    let mut g = Sl2Matrix::identity();
    for l in w.letters() {
        let x = *u.images.get(l.gen.wrapping_sub(1)).ok_or_else(|| {
            Error::MalformedWord(format!("generator {} out of range", l.gen))
        })?;
        let val = u.values[l.gen - 1].0;
        if l.exp == 1 {
            acc += g.ad_matrix() * val;
            g = g * x;
        } else {
            let xi = x.inverse();
            acc -= (g * xi).ad_matrix() * val;
            g = g * xi;
        }
    }
    Ok(LieVec(acc))
}

/// Pairing of two cocycles against the 2-cell attached along `r`.
pub fn cup_pair(rep: &Representation, r: &GroupWord, u: &CrossedHom, v: &CrossedHom) -> Result<C64> {
    for w in [u, v] {
        let at_r = crossed_eval(w, r)?;
        let scale = w.values.iter().map(|x| x.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        if at_r.norm() > tol::COCYCLE_TOL * scale * (1.0 + r.len() as f64) {
            return Err(Error::NotACocycle { residual: at_r.norm() });
        }
    }
    let images = rep.images();
    let mut total = C64::new(0.0, 0.0);
    let mut g = Sl2Matrix::identity();
    let mut prefix = GroupWord::empty();
    for l in r.letters() {
        let x = images[l.gen - 1];
        let vx = v.values[l.gen - 1];
        let v_letter = if l.exp == 1 {
            vx
        } else {
            LieVec(-(x.inverse().ad_matrix() * vx.0))
        };
        let uw = crossed_eval(u, &prefix)?;
        total += killing_form(&uw, &LieVec(g.ad_matrix() * v_letter.0));
        if l.exp == -1 {
            total += killing_form(&u.values[l.gen - 1], &vx);
        }
        g = if l.exp == 1 { g * x } else { g * x.inverse() };
        prefix = prefix.concat(&GroupWord::from_letters(vec![*l]));
    }
    Ok(total)
}

/// The bilinear form `Q` on all 1-cochains, `Q(u, v) = u^T M v`.
pub fn cup_matrix(images: &[Sl2Matrix], r: &GroupWord) -> Result<CMatrix> {
    let n = images.len();
    let dim = 3 * n;
    if r.max_gen() > n {
        return Err(Error::MalformedWord(format!("relator uses generators beyond x{n}")));
    }
    let ad_inv: Vec<Matrix3<C64>> = images.iter().map(|g| g.inverse().ad_matrix()).collect();
    // prefix: 3 x dim matrix with u(w_{j-1}) = prefix * u
    let mut prefix = CMatrix::zeros(3, dim);
    let mut g = Sl2Matrix::identity();
    let mut q = CMatrix::zeros(dim, dim);
    for l in r.letters() {
        let i = l.gen - 1;
        let ad_g = g.ad_matrix();
        // v(y_j) = sel * v_i
        let sel = if l.exp == 1 { Matrix3::identity() } else { -ad_inv[i] };
        let right = ad_g * sel;
        // Q += prefix^T * right placed at columns of generator i
        let right = CMatrix::from_fn(3, 3, |a, b| right[(a, b)]);
        let contrib = prefix.transpose() * &right;
        let mut cols = q.view_mut((0, 3 * i), (dim, 3));
        cols += &contrib;
        if l.exp == -1 {
            let mut blk = q.view_mut((3 * i, 3 * i), (3, 3));
            blk += CMatrix::identity(3, 3);
        }
        // advance the prefix: u(w_j) = u(w_{j-1}) + Ad(w_{j-1}) u(y_j)
        let mut pcols = prefix.view_mut((0, 3 * i), (3, 3));
        pcols += &right;
        g = if l.exp == 1 { g * images[i] } else { g * images[i].inverse() };
    }
    Ok(q)
}

/// Gram matrix of the symplectic form on a basis of `H^1` and its Pfaffian.
#[derive(Debug, Clone, Serialize)]
pub struct SymplecticGram {
    #[serde(with = "crate::serde_complex::matrix")]
    pub w: CMatrix,
    #[serde(skip)]
    pub basis: CMatrix,
    #[serde(with = "crate::serde_complex::scalar")]
    pub pf: C64,
    pub antisymmetry_defect: f64,
}

/// Gram matrix of `Q` on the cocycle columns `h`.
pub fn gram_for_basis(rep: &Representation, h: &CMatrix) -> Result<SymplecticGram> {
    let r = rep.presentation().relator.as_ref().ok_or_else(|| {
        Error::Precondition("the symplectic form needs a closed surface".into())
    })?;
    let q = cup_matrix(rep.images(), r)?;
    let w = h.transpose() * &q * h;
    // antisymmetry depends only on the span, so measure it on an orthonormal basis of it
    let on = numlin::rank_decompose(h, tol::RANK_REL)?.image_basis;
    let wn = on.transpose() * &q * &on;
    let scale = wn.norm();
    let defect = if scale == 0.0 { 0.0 } else { (&wn + wn.transpose()).norm() / scale };
    if defect > tol::ANTISYM_TOL {
        return Err(Error::CupFormula(format!("Gram matrix antisymmetry defect {defect:.3e}")));
    }
    let w = (&w - w.transpose()) * C64::new(0.5, 0.0);
    let pf = numlin::pfaffian(&w)?;
    Ok(SymplecticGram { w, basis: h.clone(), pf, antisymmetry_defect: defect })
}

/// Gram matrix on the harmonic representatives of `coh`.
pub fn gram(coh: &CohomologyData, rep: &Representation) -> Result<SymplecticGram> {
    if coh.dims[0] != 0 || coh.dims[2] != 0 {
        return Err(Error::Precondition(format!(
            "H^0 and H^2 must vanish, got dimensions {:?}",
            coh.dims
        )));
    }
    gram_for_basis(rep, &coh.reps[1])
}

#[derive(Debug, Clone, Serialize)]
pub struct WittenReport {
    pub torsion_abs: f64,
    pub pf_abs: f64,
    pub rel_err: f64,
}

/// Compares `|T(h^1)|` with `|Pf W(h^1)|` on the basis `h`.
pub fn witten_check_basis(cx: &TwistedComplex, rep: &Representation, h: &CMatrix) -> Result<WittenReport> {
    let g = gram_for_basis(rep, h)?;
    let empty0 = CMatrix::zeros(cx.dims[0], 0);
    let empty2 = CMatrix::zeros(cx.dims[2], 0);
    let t = torsion::torsion(cx, &[empty0, h.clone(), empty2])?;
    let (torsion_abs, pf_abs) = (t.abs(), g.pf.norm());
    Ok(WittenReport { torsion_abs, pf_abs, rel_err: (torsion_abs - pf_abs).abs() / pf_abs })
}

pub fn witten_check(cx: &TwistedComplex, coh: &CohomologyData, rep: &Representation) -> Result<WittenReport> {
    if coh.dims[0] != 0 || coh.dims[2] != 0 {
        return Err(Error::Precondition(format!(
            "H^0 and H^2 must vanish, got dimensions {:?}",
            coh.dims
        )));
    }
    witten_check_basis(cx, rep, &coh.reps[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::{build_complex, cohomology};
    use crate::reps::{sample_block_rep, sample_connected_sum};
    use crate::rng;
    use proptest::prelude::*;

    struct Setup {
        rep: Representation,
        cx: TwistedComplex,
        coh: CohomologyData,
    }

    fn setup(seed: u64, k: usize) -> Setup {
        let mut r = rng::seeded(seed);
        let rep = if k == 1 { sample_block_rep(&mut r).unwrap() } else { sample_connected_sum(k, &mut r).unwrap() };
        let cx = build_complex(&rep).unwrap();
        let coh = cohomology(&cx, 1e-9).unwrap();
        Setup { rep, cx, coh }
    }

    fn column_hom(s: &Setup, m: &CMatrix, j: usize) -> CrossedHom {
        CrossedHom::from_cochain(s.rep.images(), &m.columns(j, 1).into_owned()).unwrap()
    }

    #[test]
    fn crossed_eval_examples() {
        let s = setup(1, 1);
        let u = column_hom(&s, &s.coh.reps[1], 0);
        assert!(crossed_eval(&u, &GroupWord::empty()).unwrap().norm() == 0.0);
        assert!((crossed_eval(&u, &GroupWord::gen(3)).unwrap() - u.values[2]).norm() < 1e-15);
        let r = s.rep.presentation().relator.clone().unwrap();
        assert!(crossed_eval(&u, &r).unwrap().norm() < 1e-9);
        // u(r) equals delta1 u in geometric coordinates
        let mut r2 = rng::seeded(2);
        let any = numlin::random_matrix(&mut r2, 12, 1);
        let hom = CrossedHom::from_cochain(s.rep.images(), &any).unwrap();
        let via_fox = &s.cx.delta1 * &any;
        let direct = crossed_eval(&hom, &r).unwrap();
        assert!((via_fox.column(0) - direct.0).norm() < 1e-10 * via_fox.norm());
    }

    #[test]
    fn cup_pair_examples() {
        let s = setup(3, 1);
        let r = s.rep.presentation().relator.clone().unwrap();
        let u = column_hom(&s, &s.coh.reps[1], 0);
        let v = column_hom(&s, &s.coh.reps[1], 1);
        let zero = CrossedHom::new(s.rep.images(), vec![LieVec::zero(); 4]).unwrap();
        assert_eq!(cup_pair(&s.rep, &r, &u, &zero).unwrap(), C64::new(0.0, 0.0));

        let uv = cup_pair(&s.rep, &r, &u, &v).unwrap();
        let vu = cup_pair(&s.rep, &r, &v, &u).unwrap();
        assert!((uv + vu).norm() < 1e-8 * uv.norm().max(1.0));

        let mut g = rng::seeded(4);
        for _ in 0..5 {
            let z = numlin::random_matrix(&mut g, 3, 1);
            let cob = CrossedHom::from_cochain(s.rep.images(), &(&s.cx.delta0 * z)).unwrap();
            assert!(cup_pair(&s.rep, &r, &u, &cob).unwrap().norm() < 1e-8);
        }

        let q = cup_matrix(s.rep.images(), &r).unwrap();
        let via_matrix = (u.to_cochain().transpose() * &q * v.to_cochain())[(0, 0)];
        assert!((via_matrix - uv).norm() < 1e-12 * uv.norm().max(1.0));
        assert!((numlin::det(&q) - 1.0).norm() < 1e-8);

        let junk = CrossedHom::from_cochain(s.rep.images(), &numlin::random_matrix(&mut g, 12, 1)).unwrap();
        assert!(matches!(cup_pair(&s.rep, &r, &junk, &u), Err(Error::NotACocycle { .. })));
    }

    #[test]
    fn gram_genus_two_and_four() {
        let s = setup(5, 1);
        let g = gram(&s.coh, &s.rep).unwrap();
        assert_eq!(g.w.shape(), (6, 6));
        assert_eq!(numlin::rank_decompose(&g.w, 1e-9).unwrap().rank, 6);
        assert!((g.pf * g.pf - numlin::det(&g.w)).norm() < 1e-8 * g.pf.norm_sqr());

        let s4 = setup(6, 2);
        let g4 = gram(&s4.coh, &s4.rep).unwrap();
        assert_eq!(g4.w.shape(), (18, 18));
        assert!(g4.antisymmetry_defect < 1e-8);
    }

    #[test]
    fn gram_basis_change() {
        let s = setup(7, 1);
        let p = numlin::random_matrix(&mut rng::seeded(8), 6, 6);
        let g = gram(&s.coh, &s.rep).unwrap();
        let moved = gram_for_basis(&s.rep, &(&s.coh.reps[1] * &p)).unwrap();
        let expect = p.transpose() * &g.w * &p;
        assert!((&moved.w - &expect).norm() < 1e-9 * expect.norm());
        let dp = numlin::det(&p);
        assert!((moved.pf - dp * g.pf).norm() < 1e-9 * moved.pf.norm());
    }

    #[test]
    fn coboundaries_do_not_change_gram() {
        let s = setup(9, 1);
        let g = gram(&s.coh, &s.rep).unwrap();
        let shift = &s.cx.delta0 * numlin::random_matrix(&mut rng::seeded(10), 3, 6);
        let moved = gram_for_basis(&s.rep, &(&s.coh.reps[1] + shift)).unwrap();
        assert!((&moved.w - &g.w).norm() < 1e-8 * g.w.norm());
    }

    #[test]
    fn witten_examples() {
        let s = setup(11, 1);
        assert!(witten_check(&s.cx, &s.coh, &s.rep).unwrap().rel_err < 1e-8);
        let s4 = setup(12, 2);
        assert!(witten_check(&s4.cx, &s4.coh, &s4.rep).unwrap().rel_err < 1e-7);

        let p = numlin::random_matrix(&mut rng::seeded(13), 6, 6);
        let base = witten_check(&s.cx, &s.coh, &s.rep).unwrap();
        let moved = witten_check_basis(&s.cx, &s.rep, &(&s.coh.reps[1] * &p)).unwrap();
        let dp = numlin::det(&p).norm();
        assert!((moved.pf_abs / base.pf_abs - dp).abs() < 1e-9 * dp);
        assert!((moved.torsion_abs / base.torsion_abs - dp).abs() < 1e-9 * dp);
        assert!((moved.rel_err - base.rel_err).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn antisymmetric_and_nondegenerate(seed in 0u64..10_000) {
            let s = setup(seed, 1);
            let g = gram(&s.coh, &s.rep).unwrap();
            prop_assert!(g.antisymmetry_defect < 1e-8);
            prop_assert_eq!(numlin::rank_decompose(&g.w, 1e-9).unwrap().rank, 6);
        }
    }
}
