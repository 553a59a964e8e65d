//! Reidemeister torsion of based cochain complexes and of exact sequences.
//!
//! For a complex with coboundaries `delta_p` and cohomology bases `h^p`,
//!
//! ```text
//! T = prod_p [ s_p(b^{p+1}) | h^p | b^p , c^p ] ^ ((-1)^(p+1))
//! ```
//!
//! where `b^{p+1}` is a basis of `im delta_p`, `s_p` a section of `delta_p`,
//! and `c^p` the geometric basis. With this orientation the torsion of a closed
//! surface satisfies `|T| = |Pf W|` for the cup-product Gram matrix `W` of the
//! same `h^1`, and `T` scales by `det P` under `h^1 -> h^1 P`.
//!
//! An exact sequence `V_0 -> V_1 -> ...` with bases `h^q` is treated as an
//! acyclic complex:
//!
//! ```text
//! tau = prod_q [ s_q(b^{q+1}) | b^q , h^q ] ^ ((-1)^(q+1))
//! ```
//!
//! with `q` counted from the sequence's `first_position`.

use crate::cochain::TwistedComplex;
use crate::error::{Error, Result};
use crate::numlin::{self, CMatrix};
use crate::rng::Rng;
use crate::tol;
use crate::C64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Exponent `e` in `T(h P) = det(P)^e T(h)` for a change of the `h^1` basis.
pub const SCALING_EXPONENT: i32 = 1;

/// Torsion, defined up to sign.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionValue {
    pub value: C64,
    pub sign_ambiguous: bool,
    pub choices_digest: String,
}

impl TorsionValue {
    pub fn abs(&self) -> f64 {
        self.value.norm()
    }

    pub fn arg(&self) -> f64 {
        self.value.arg()
    }
}

impl Serialize for TorsionValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("TorsionValue", 4)?;
        st.serialize_field("abs", &self.abs())?;
        st.serialize_field("arg", &self.arg())?;
        st.serialize_field("sign_ambiguous", &self.sign_ambiguous)?;
        st.serialize_field("choices_digest", &self.choices_digest)?;
        st.end()
    }
}

/// How image bases and sections are chosen.
pub enum Choices<'a> {
    /// Orthonormal image bases and minimum-norm sections.
    Canonical,
    /// Random image bases and sections shifted by random kernel vectors.
    Random(&'a mut Rng),
}

struct Digest256(Sha256);

impl Digest256 {
    fn new() -> Self {
        Digest256(Sha256::new())
    }

    fn add(&mut self, m: &CMatrix) {
        self.0.update((m.nrows() as u64).to_le_bytes());
        self.0.update((m.ncols() as u64).to_le_bytes());
        for z in m.iter() {
            self.0.update(z.re.to_le_bytes());
            self.0.update(z.im.to_le_bytes());
        }
    }

    fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

fn sign(p: usize) -> i32 {
    if p.is_multiple_of(2) {
        -1
    } else {
        1
    }
}

fn powi(z: C64, e: i32) -> C64 {
    if e >= 0 {
        z.powi(e)
    } else {
        z.inv().powi(-e)
    }
}

/// Basis of `im f` and a section `s` with `f s = b`.
fn image_and_section(f: &CMatrix, choices: &mut Choices<'_>) -> Result<(CMatrix, CMatrix)> {
    let rd = numlin::rank_decompose(f, tol::RANK_REL)?;
    let mut b = rd.image_basis.clone();
    if let Choices::Random(rng) = choices {
        let g = numlin::random_matrix(*rng, rd.rank, rd.rank);
        b = &b * g;
    }
    let mut s = numlin::min_norm_preimage(f, &b, tol::RANK_REL)?;
    if let Choices::Random(rng) = choices {
        let k = rd.kernel_basis.ncols();
        s += &rd.kernel_basis * numlin::random_matrix(*rng, k, rd.rank);
    }
    Ok((b, s))
}

/// Torsion with canonical choices.
pub fn torsion(cx: &TwistedComplex, h: &[CMatrix; 3]) -> Result<TorsionValue> {
    torsion_with(cx, h, &mut Choices::Canonical)
}

/// Torsion of `cx` with cohomology bases `h[p]` (columns are cocycles in
/// geometric coordinates).
pub fn torsion_with(cx: &TwistedComplex, h: &[CMatrix; 3], choices: &mut Choices<'_>) -> Result<TorsionValue> {
    let mut digest = Digest256::new();
    let mut value = C64::new(1.0, 0.0);
    let mut b_in = CMatrix::zeros(cx.dims[0], 0);
    for p in 0..3 {
        let d = cx.dims[p];
        if h[p].nrows() != d {
            return Err(Error::Shape(format!(
                "degree {p} basis has {} rows, cochains have {d}",
                h[p].nrows()
            )));
        }
        let out = cx.coboundary(p);
        if h[p].ncols() > 0 {
            let scale = numlin::operator_norm(&out).max(1.0) * h[p].norm();
            let residual = (&out * &h[p]).norm();
            if residual > tol::COCYCLE_TOL * scale {
                return Err(Error::NotACocycle { residual });
            }
        }
        let (b_out, s) = image_and_section(&out, choices)?;
        if s.ncols() + h[p].ncols() + b_in.ncols() != d {
            return Err(Error::Shape(format!(
                "degree {p}: {} + {} + {} columns for dimension {d}",
                s.ncols(),
                h[p].ncols(),
                b_in.ncols()
            )));
        }
        let m = numlin::hstack(&[&s, &h[p], &b_in], d);
        let condition = numlin::condition_number(&m);
        if condition > tol::MAX_CONDITION {
            return Err(Error::DegenerateBasis(format!(
                "degree {p} basis has condition number {condition:.3e}"
            )));
        }
        digest.add(&s);
        digest.add(&b_out);
        value *= powi(numlin::det(&m), sign(p));
        b_in = b_out;
    }
    Ok(TorsionValue { value, sign_ambiguous: true, choices_digest: digest.finish() })
}

/// An exact sequence of finite-dimensional spaces with chosen bases.
///
/// `bases[q]` is square (columns in the space's reference coordinates) and
/// `maps[q]` goes from space `q` to space `q + 1`.
#[derive(Debug, Clone)]
pub struct BasedSequence {
    pub bases: Vec<CMatrix>,
    pub maps: Vec<CMatrix>,
    pub first_position: usize,
}

impl BasedSequence {
    pub fn new(bases: Vec<CMatrix>, maps: Vec<CMatrix>, first_position: usize) -> Result<Self> {
        if maps.len() + 1 != bases.len() {
            return Err(Error::Shape(format!(
                "{} spaces need {} maps, got {}",
                bases.len(),
                bases.len().saturating_sub(1),
                maps.len()
            )));
        }
        for (q, b) in bases.iter().enumerate() {
            if !b.is_square() {
                return Err(Error::Shape(format!("basis {q} is not square")));
            }
        }
        for (q, m) in maps.iter().enumerate() {
            if m.ncols() != bases[q].nrows() || m.nrows() != bases[q + 1].nrows() {
                return Err(Error::Shape(format!("map {q} has shape {:?}", m.shape())));
            }
        }
        Ok(BasedSequence { bases, maps, first_position })
    }

    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.nrows()).collect()
    }

    /// Ranks of the maps, or an error if the sequence is not exact.
    pub fn check_exact(&self) -> Result<Vec<usize>> {
        let ranks = self
            .maps
            .iter()
            .map(|m| numlin::rank_decompose(m, tol::RANK_REL).map(|r| r.rank))
            .collect::<Result<Vec<_>>>()?;
        let dims = self.dims();
        for q in 0..dims.len() {
            let incoming = if q == 0 { 0 } else { ranks[q - 1] };
            let outgoing = ranks.get(q).copied().unwrap_or(0);
            if incoming + outgoing != dims[q] {
                return Err(Error::NotExact(format!(
                    "space {q}: ranks {incoming} + {outgoing} != dimension {}",
                    dims[q]
                )));
            }
        }
        for q in 1..self.maps.len() {
            let (f, g) = (&self.maps[q - 1], &self.maps[q]);
            let scale = numlin::operator_norm(f) * numlin::operator_norm(g);
            let composite = (g * f).norm();
            if composite > tol::EXACTNESS_TOL * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::NotExact(format!(
                    "maps {} and {q} compose to {composite:.3e}",
                    q - 1
                )));
            }
        }
        Ok(ranks)
    }
}

/// Torsion of an exact sequence viewed as an acyclic complex.
pub fn sequence_torsion(seq: &BasedSequence) -> Result<TorsionValue> {
    sequence_torsion_with(seq, &mut Choices::Canonical)
}

pub fn sequence_torsion_with(seq: &BasedSequence, choices: &mut Choices<'_>) -> Result<TorsionValue> {
    seq.check_exact()?;
    let mut digest = Digest256::new();
    let mut value = C64::new(1.0, 0.0);
    let n = seq.bases.len();
    let mut b_in = CMatrix::zeros(seq.bases[0].nrows(), 0);
    for q in 0..n {
        let d = seq.bases[q].nrows();
        let (b_out, s) = match seq.maps.get(q) {
            Some(f) => image_and_section(f, choices)?,
            None => (CMatrix::zeros(0, 0), CMatrix::zeros(d, 0)),
        };
        let e = numlin::hstack(&[&s, &b_in], d);
        let t = numlin::transition_det(&e, &seq.bases[q])?;
        digest.add(&s);
        digest.add(&b_out);
        value *= powi(t, sign(seq.first_position + q));
        b_in = b_out;
    }
    Ok(TorsionValue { value, sign_ambiguous: true, choices_digest: digest.finish() })
}

/// Result of comparing torsions before and after `h^1 -> h^1 P`.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    #[serde(with = "crate::serde_complex::scalar")]
    pub ratio: C64,
    #[serde(with = "crate::serde_complex::scalar")]
    pub det_p: C64,
    pub exponent: i32,
    pub rel_err: f64,
}

/// Checks `T(h^1 P) = det(P)^SCALING_EXPONENT T(h^1)`.
pub fn basis_scaling_check(cx: &TwistedComplex, h: &[CMatrix; 3], p: &CMatrix) -> Result<ScalingReport> {
    let before = torsion(cx, h)?;
    let moved = [h[0].clone(), &h[1] * p, h[2].clone()];
    let after = torsion(cx, &moved)?;
    let ratio = after.value / before.value;
    let det_p = numlin::det(p);
    let expected = powi(det_p, SCALING_EXPONENT);
    // torsion is defined up to sign
    let rel_err = ((ratio - expected).norm().min((ratio + expected).norm())) / expected.norm();
    Ok(ScalingReport { ratio, det_p, exponent: SCALING_EXPONENT, rel_err })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cochain::{build_complex, cohomology};
    use crate::lie::Sl2Matrix;
    use crate::reps::sample_block_rep;
    use crate::rng;
    use crate::words::GroupWord;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn block_setup(seed: u64) -> (TwistedComplex, [CMatrix; 3]) {
        let rep = sample_block_rep(&mut rng::seeded(seed)).unwrap();
        let cx = build_complex(&rep).unwrap();
        let coh = cohomology(&cx, 1e-9).unwrap();
        let h = [coh.reps[0].clone(), coh.reps[1].clone(), coh.reps[2].clone()];
        (cx, h)
    }

    #[test]
    fn disk_is_one() {
        let cx = TwistedComplex::disk();
        let t = torsion(&cx, &[CMatrix::identity(3, 3), CMatrix::zeros(0, 0), CMatrix::zeros(0, 0)]).unwrap();
        assert_eq!(t.value, C64::new(1.0, 0.0));
    }

    #[test]
    fn circle_with_geometric_bases() {
        let cx = TwistedComplex::circle(&[Sl2Matrix::identity()], &GroupWord::gen(1)).unwrap();
        let id = CMatrix::identity(3, 3);
        let t = torsion(&cx, &[id.clone(), id, CMatrix::zeros(0, 0)]).unwrap();
        assert!((t.value - 1.0).norm() < 1e-15);
    }

    #[test]
    fn acyclic_two_term() {
        let mut r = rng::seeded(1);
        let d = numlin::random_matrix(&mut r, 3, 3);
        let cx = TwistedComplex::from_matrices(d.clone(), CMatrix::zeros(0, 3)).unwrap();
        let empty = CMatrix::zeros(3, 0);
        let t = torsion(&cx, &[empty.clone(), empty, CMatrix::zeros(0, 0)]).unwrap();
        // degree 0 contributes det(s)^-1 = det(d), degree 1 contributes [b^1] = 1 in b-coordinates
        assert!(rel(t.abs(), numlin::det(&d).norm()) < 1e-10);
    }

    #[test]
    fn sequence_examples() {
        let mut r = rng::seeded(2);
        let id = CMatrix::identity(3, 3);
        let seq = BasedSequence::new(vec![id.clone(), id.clone()], vec![id.clone()], 0).unwrap();
        assert!((sequence_torsion(&seq).unwrap().value - 1.0).norm() < 1e-12);

        let p = numlin::random_matrix(&mut r, 3, 3);
        let dp = numlin::det(&p);
        let seq = BasedSequence::new(vec![id.clone(), id.clone()], vec![p.clone()], 0).unwrap();
        let t = sequence_torsion(&seq).unwrap();
        // position 0: [s, e]^-1 = det(p); position 1: [b, e] = 1 in these coordinates
        assert!((t.value - dp).norm() < 1e-10 * dp.norm() || (t.value + dp).norm() < 1e-10 * dp.norm());
        let shifted = BasedSequence::new(vec![id.clone(), id.clone()], vec![p], 1).unwrap();
        assert!(rel(sequence_torsion(&shifted).unwrap().abs(), 1.0 / dp.norm()) < 1e-10);

        let not_exact = BasedSequence::new(vec![id.clone(), id], vec![CMatrix::zeros(3, 3)], 0).unwrap();
        assert!(matches!(sequence_torsion(&not_exact), Err(Error::NotExact(_))));
    }

    #[test]
    fn sequence_choice_independence() {
        let mut r = rng::seeded(3);
        // 0 -> C^2 -> C^5 -> C^3 -> 0
        let f = numlin::random_matrix(&mut r, 5, 2);
        let rd = numlin::rank_decompose(&f.adjoint(), 1e-9).unwrap();
        let g = numlin::random_matrix(&mut r, 3, 3) * rd.kernel_basis.adjoint();
        let bases = vec![
            numlin::random_matrix(&mut r, 2, 2),
            numlin::random_matrix(&mut r, 5, 5),
            numlin::random_matrix(&mut r, 3, 3),
        ];
        let seq = BasedSequence::new(bases, vec![f, g], 0).unwrap();
        let a = sequence_torsion(&seq).unwrap();
        let mut cr = rng::seeded(4);
        let b = sequence_torsion_with(&seq, &mut Choices::Random(&mut cr)).unwrap();
        assert!(rel(a.abs(), b.abs()) < 1e-9);
        assert_ne!(a.choices_digest, b.choices_digest);
    }

    #[test]
    fn scaling_law() {
        let (cx, h) = block_setup(5);
        let id = CMatrix::identity(6, 6);
        let rep = basis_scaling_check(&cx, &h, &id).unwrap();
        assert!(rep.rel_err < 1e-12);

        let two = &id * C64::new(2.0, 0.0);
        let rep = basis_scaling_check(&cx, &h, &two).unwrap();
        assert!(rel(rep.ratio.norm(), 64.0) < 1e-9);

        let p = numlin::random_matrix(&mut rng::seeded(6), 6, 6);
        assert!(basis_scaling_check(&cx, &h, &p).unwrap().rel_err < 1e-9);
    }

    #[test]
    fn degenerate_basis_rejected() {
        let (cx, h) = block_setup(7);
        let mut bad = h[1].clone();
        let col = bad.column(0).into_owned();
        bad.set_column(1, &col);
        let r = torsion(&cx, &[h[0].clone(), bad, h[2].clone()]);
        assert!(matches!(r, Err(Error::DegenerateBasis(_))));

        let wrong = CMatrix::zeros(12, 5);
        assert!(matches!(torsion(&cx, &[h[0].clone(), wrong, h[2].clone()]), Err(Error::Shape(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_choices_agree(seed in 0u64..1000) {
            let (cx, h) = block_setup(seed);
            let a = torsion(&cx, &h).unwrap();
            let mut r = rng::substream(seed, 9);
            let b = torsion_with(&cx, &h, &mut Choices::Random(&mut r)).unwrap();
            prop_assert!(rel(a.abs(), b.abs()) < 1e-9);
        }
    }
}
