//! Mayer–Vietoris gluing of torsion along circles.
//!
//! Two decompositions of a closed surface `X` are supported:
//!
//! * disk-cap: `X = X1 ∪ D` where `X1` is `X` minus a disk, glued along the
//!   boundary circle;
//! * separating: `X = X1 ∪ X2` with both pieces once-bordered, glued along a
//!   separating circle.
//!
//! Either way the long exact sequence is laid out in seven slots
//!
//! ```text
//! 0: H0(X)  1: H0(X1)+H0(X2)  2: H0(S)  3: H1(X)  4: H1(X1)+H1(X2)  5: H1(S)  6: H2(X)
//! ```
//!
//! (the disk plays the role of `X2` in the disk-cap case). Each slot carries the
//! class coordinates of the harmonic representatives of its spaces, and a basis
//! of a slot is a square matrix in those coordinates. The corrective term is the
//! torsion of this sequence with the position of each slot counted from slot 0.

use crate::cochain::{build_complex, cohomology, CohomologyData, TwistedComplex};
use crate::error::{Error, Result};
use crate::lie::Sl2Matrix;
use crate::numlin::{self, block_diag, CMatrix};
use crate::reps::{self, Representation};
use crate::rng::{self, Rng};
use crate::symplectic::{crossed_eval, gram_for_basis, CrossedHom};
use crate::tol;
use crate::torsion::{self, BasedSequence, TorsionValue};
use crate::words::{surface_presentation, surface_word, GroupWord, Presentation};
use crate::C64;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

pub const SLOTS: usize = 7;

/// A space of the decomposition with its cochain complex and cohomology.
#[derive(Debug, Clone)]
pub struct CohSpace {
    pub label: String,
    pub images: Vec<Sl2Matrix>,
    pub complex: TwistedComplex,
    pub coh: CohomologyData,
}

impl CohSpace {
    pub fn surface(rep: &Representation, label: &str) -> Result<Self> {
        let complex = build_complex(rep)?;
        let coh = cohomology(&complex, tol::RANK_REL)?;
        Ok(CohSpace { label: label.into(), images: rep.images().to_vec(), complex, coh })
    }

    pub fn disk() -> Self {
        let complex = TwistedComplex::disk();
        let coh = cohomology(&complex, tol::RANK_REL).expect("disk cohomology");
        CohSpace { label: "disk".into(), images: vec![], complex, coh }
    }

    /// A circle whose image is the identity up to `SEPARATING_TOL` gets the exact zero coboundary.
    pub fn circle(images: &[Sl2Matrix], s: &GroupWord, label: &str) -> Result<Self> {
        let mut complex = TwistedComplex::circle(images, s)?;
        if s.evaluate(images)?.frobenius_distance(&Sl2Matrix::identity()) <= tol::SEPARATING_TOL {
            complex.delta0.fill(C64::new(0.0, 0.0));
        }
        let coh = cohomology(&complex, tol::RANK_REL)?;
        Ok(CohSpace { label: label.into(), images: images.to_vec(), complex, coh })
    }

    pub fn h(&self, p: usize) -> usize {
        self.coh.dims[p]
    }

    /// Torsion for bases given in class coordinates, one square matrix per degree.
    pub fn torsion(&self, coeffs: &[CMatrix; 3]) -> Result<TorsionValue> {
        let h = [0, 1, 2].map(|p| &self.coh.reps[p] * &coeffs[p]);
        torsion::torsion(&self.complex, &h)
    }

    /// Identity bases in every degree.
    pub fn default_bases(&self) -> [CMatrix; 3] {
        [0, 1, 2].map(|p| CMatrix::identity(self.h(p), self.h(p)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecompositionKind {
    DiskCap,
    Separating,
}

/// How a closed surface is cut. Piece generators are consecutive ambient
/// generators: piece 1 starts at `x_1`, piece 2 at `x_{offset2 + 1}`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub kind: DecompositionKind,
    pub ambient: Presentation,
    pub piece1: Presentation,
    /// `None` for the disk.
    pub piece2: Option<Presentation>,
    pub offset2: usize,
    /// The circle in piece 1's generators.
    pub circle1: GroupWord,
    /// The same circle in piece 2's generators.
    pub circle2: Option<GroupWord>,
}

impl Decomposition {
    /// Genus-`genus` closed surface as a bordered surface plus a disk.
    pub fn disk_cap(genus: usize) -> Result<Self> {
        Ok(Decomposition {
            kind: DecompositionKind::DiskCap,
            ambient: surface_presentation(genus, 0)?,
            piece1: surface_presentation(genus, 1)?,
            piece2: None,
            offset2: 0,
            circle1: surface_word(genus, 1),
            circle2: None,
        })
    }

    /// Genus `g1 + g2` closed surface cut into genus `g1` and `g2` bordered pieces.
    pub fn separating(g1: usize, g2: usize) -> Result<Self> {
        Ok(Decomposition {
            kind: DecompositionKind::Separating,
            ambient: surface_presentation(g1 + g2, 0)?,
            piece1: surface_presentation(g1, 1)?,
            piece2: Some(surface_presentation(g2, 1)?),
            offset2: 2 * g1,
            circle1: surface_word(g1, 1),
            circle2: Some(surface_word(g2, 1).inverse()),
        })
    }

    /// Builds the four spaces from a representation of the ambient surface.
    pub fn spaces(&self, rep: &Representation) -> Result<MvSpaces> {
        if rep.presentation().genus != self.ambient.genus || !rep.is_closed() {
            return Err(Error::Precondition(format!(
                "expected a closed genus-{} representation",
                self.ambient.genus
            )));
        }
        let residual = rep.evaluate(&self.circle1)?.frobenius_distance(&Sl2Matrix::identity());
        if self.kind == DecompositionKind::Separating && residual > tol::SEPARATING_TOL {
            return Err(Error::ConditionCUndefined(format!(
                "separating circle maps to a matrix at distance {residual:.3e} from the identity"
            )));
        }
        let x = Arc::new(CohSpace::surface(rep, "X")?);
        let p1 = rep.restrict(1, self.piece1.genus, 1)?;
        let x1 = Arc::new(CohSpace::surface(&p1, "X1")?);
        let x2 = match &self.piece2 {
            Some(p) => Arc::new(CohSpace::surface(&rep.restrict(self.offset2 + 1, p.genus, 1)?, "X2")?),
            None => Arc::new(CohSpace::disk()),
        };
        let circle = Arc::new(CohSpace::circle(p1.images(), &self.circle1, "S")?);
        Ok(MvSpaces { x, x1, x2, circle })
    }
}

/// The spaces of a decomposition; shared so that several sequences can use
/// literally the same coordinates.
#[derive(Debug, Clone)]
pub struct MvSpaces {
    pub x: Arc<CohSpace>,
    pub x1: Arc<CohSpace>,
    pub x2: Arc<CohSpace>,
    pub circle: Arc<CohSpace>,
}

/// The Mayer–Vietoris sequence as matrices in class coordinates.
#[derive(Debug, Clone)]
pub struct MvSequence {
    pub kind: DecompositionKind,
    pub dims: [usize; SLOTS],
    pub maps: Vec<CMatrix>,
    pub ranks: Vec<usize>,
    /// Largest relative norm of a composite of consecutive maps.
    pub max_composite: f64,
}

impl MvSequence {
    pub fn based(&self, bases: Vec<CMatrix>) -> Result<BasedSequence> {
        BasedSequence::new(bases, self.maps.clone(), 0)
    }

    /// `sum (-1)^q dim`.
    pub fn alternating_sum(&self) -> i64 {
        self.dims.iter().enumerate().map(|(q, &d)| if q % 2 == 0 { d as i64 } else { -(d as i64) }).sum()
    }

    /// Sizes of the summands of slot `q` (two summands for slots 1 and 4).
    pub fn summands(&self, spaces: &MvSpaces, q: usize) -> Vec<usize> {
        match q {
            1 => vec![spaces.x1.h(0), spaces.x2.h(0)],
            4 => vec![spaces.x1.h(1), spaces.x2.h(1)],
            _ => vec![self.dims[q]],
        }
    }
}

fn rows_of(m: &CMatrix, first: usize, count: usize) -> CMatrix {
    m.rows(first, count).into_owned()
}

/// The cocycle on `X` that the connecting map assigns to `v` in `H0(S)`:
/// `Ad rho(x) v - v` on the generators of piece 1 and zero on those of piece 2.
pub fn connecting_hom(spaces: &MvSpaces, v: &CMatrix) -> Result<CMatrix> {
    let x = &spaces.x;
    let n1 = spaces.x1.images.len();
    let s = spaces.circle.images.len();
    debug_assert!(s == n1);
    let mut u = CMatrix::zeros(x.complex.dims[1], v.ncols());
    let d0 = rows_of(&x.complex.delta0, 0, 3 * n1);
    u.view_mut((0, 0), (3 * n1, v.ncols())).copy_from(&(d0 * v));
    let residual = (&x.complex.delta1 * &u).norm();
    let scale = numlin::operator_norm(&x.complex.delta1).max(1.0) * v.norm().max(f64::MIN_POSITIVE);
    if residual > 1e-8 * scale {
        return Err(Error::SnakeConstruction { residual });
    }
    Ok(u)
}

fn restrict_cochain(u: &CMatrix, first_gen: usize, count: usize) -> CMatrix {
    rows_of(u, 3 * first_gen, 3 * count)
}

fn eval_on_circle(space: &CohSpace, reps: &CMatrix, s: &GroupWord) -> Result<CMatrix> {
    let mut out = CMatrix::zeros(3, reps.ncols());
    for j in 0..reps.ncols() {
        let hom = CrossedHom::from_cochain(&space.images, &reps.columns(j, 1).into_owned())?;
        let val = crossed_eval(&hom, s)?;
        for a in 0..3 {
            out[(a, j)] = val.0[a];
        }
    }
    Ok(out)
}

/// Assembles the seven-slot sequence and checks exactness.
pub fn build_mv(dec: &Decomposition, spaces: &MvSpaces) -> Result<MvSequence> {
    let (x, x1, x2, s) = (&spaces.x, &spaces.x1, &spaces.x2, &spaces.circle);
    if x.h(2) != 0 {
        return Err(Error::Precondition(format!("H2(X) has dimension {}, expected 0", x.h(2))));
    }
    let dims = [
        x.h(0),
        x1.h(0) + x2.h(0),
        s.h(0),
        x.h(1),
        x1.h(1) + x2.h(1),
        s.h(1),
        x.h(2),
    ];
    let n1 = x1.images.len();
    let n2 = x2.images.len();

    // H0(X) -> H0(X1) + H0(X2)
    let x0 = &x.coh.reps[0];
    let mut m0 = CMatrix::zeros(dims[1], dims[0]);
    m0.view_mut((0, 0), (x1.h(0), dims[0])).copy_from(&x1.coh.class_coordinates(0, x0)?);
    m0.view_mut((x1.h(0), 0), (x2.h(0), dims[0])).copy_from(&x2.coh.class_coordinates(0, x0)?);

    // H0(X1) + H0(X2) -> H0(S): difference of restrictions
    let mut m1 = CMatrix::zeros(dims[2], dims[1]);
    m1.view_mut((0, 0), (dims[2], x1.h(0))).copy_from(&s.coh.class_coordinates(0, &x1.coh.reps[0])?);
    let neg = -s.coh.class_coordinates(0, &x2.coh.reps[0])?;
    m1.view_mut((0, x1.h(0)), (dims[2], x2.h(0))).copy_from(&neg);

    // H0(S) -> H1(X)
    let u = connecting_hom(spaces, &s.coh.reps[0])?;
    let m2 = x.coh.class_coordinates(1, &u)?;

    // H1(X) -> H1(X1) + H1(X2)
    let hx = &x.coh.reps[1];
    let mut m3 = CMatrix::zeros(dims[4], dims[3]);
    m3.view_mut((0, 0), (x1.h(1), dims[3]))
        .copy_from(&x1.coh.class_coordinates(1, &restrict_cochain(hx, 0, n1))?);
    if n2 > 0 {
        let r2 = restrict_cochain(hx, dec.offset2, n2);
        m3.view_mut((x1.h(1), 0), (x2.h(1), dims[3])).copy_from(&x2.coh.class_coordinates(1, &r2)?);
    }

    // H1(X1) + H1(X2) -> H1(S): u1(s1) - u2(s2)
    let mut m4 = CMatrix::zeros(dims[5], dims[4]);
    let e1 = eval_on_circle(x1, &x1.coh.reps[1], &dec.circle1)?;
    m4.view_mut((0, 0), (dims[5], x1.h(1))).copy_from(&s.coh.class_coordinates(1, &e1)?);
    if let Some(c2) = &dec.circle2 {
        let e2 = eval_on_circle(x2, &x2.coh.reps[1], c2)?;
        let neg = -s.coh.class_coordinates(1, &e2)?;
        m4.view_mut((0, x1.h(1)), (dims[5], x2.h(1))).copy_from(&neg);
    }

    // H1(S) -> H2(X) = 0
    let m5 = CMatrix::zeros(dims[6], dims[5]);

    let mut maps = vec![m0, m1, m2, m3, m4, m5];
    let ranks = maps
        .iter()
        .map(|m| numlin::rank_decompose(m, tol::RANK_REL).map(|r| r.rank))
        .collect::<Result<Vec<_>>>()?;
    // a numerically null map is the zero map
    for (m, &r) in maps.iter_mut().zip(&ranks) {
        if r == 0 {
            m.fill(C64::new(0.0, 0.0));
        }
    }
    for q in 0..SLOTS {
        let incoming = if q == 0 { 0 } else { ranks[q - 1] };
        let outgoing = ranks.get(q).copied().unwrap_or(0);
        if incoming + outgoing != dims[q] {
            return Err(Error::DecompositionInconsistency(format!(
                "slot {q}: ranks {incoming} + {outgoing} != dimension {}",
                dims[q]
            )));
        }
    }
    let mut max_composite: f64 = 0.0;
    for q in 1..maps.len() {
        let scale = numlin::operator_norm(&maps[q]).max(1.0) * numlin::operator_norm(&maps[q - 1]).max(1.0);
        max_composite = max_composite.max((&maps[q] * &maps[q - 1]).norm() / scale);
    }
    if max_composite > tol::EXACTNESS_TOL {
        return Err(Error::DecompositionInconsistency(format!(
            "consecutive maps compose to {max_composite:.3e}"
        )));
    }
    Ok(MvSequence { kind: dec.kind, dims, maps, ranks, max_composite })
}

/// How a slot's basis is obtained in [`construct_compatible_bases`].
#[derive(Debug, Clone)]
pub enum SlotRole {
    Given(CMatrix),
    /// Completed from pushed-forward image bases.
    Free,
    /// Block-diagonal with the given block sizes, one block per summand.
    FreeBlocks(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct CompatibleBases {
    pub bases: Vec<CMatrix>,
    /// Slot whose first basis vector was rescaled.
    pub rescaled_slot: usize,
    /// The factor applied to that vector.
    pub lambda: C64,
    pub corrective_before: C64,
    pub corrective: TorsionValue,
}

/// Columns of `reference` (by greedy pivoting on their images) whose images
/// under `f` form a basis of `im f`.
fn greedy_complement(f: &CMatrix, reference: &CMatrix) -> Result<CMatrix> {
    let rank = numlin::rank_decompose(f, tol::RANK_REL)?.rank;
    let images = f * reference;
    let mut chosen: Vec<usize> = Vec::with_capacity(rank);
    let mut q: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(rank);
    let scale = images.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    while chosen.len() < rank {
        let mut best = (usize::MAX, 0.0);
        for j in 0..images.ncols() {
            if chosen.contains(&j) {
                continue;
            }
            let mut r = images.column(j).into_owned();
            for e in &q {
                let c = e.dotc(&r);
                r -= e * c;
            }
            let n = r.norm();
            if n > best.1 {
                best = (j, n);
            }
        }
        if best.0 == usize::MAX || best.1 <= 1e-9 * scale {
            return Err(Error::BasisCompletion(format!(
                "only {} of {rank} independent images",
                chosen.len()
            )));
        }
        let mut r = images.column(best.0).into_owned();
        for e in &q {
            let c = e.dotc(&r);
            r -= e * c;
        }
        q.push(&r / C64::from(r.norm()));
        chosen.push(best.0);
    }
    Ok(CMatrix::from_fn(reference.nrows(), rank, |i, j| reference[(i, chosen[j])]))
}

/// Bases making the corrective term equal to one.
///
/// Image bases are pushed forward slot by slot (`b^{q+1} = m_q s_q`, with `s_q`
/// picked from the slot's reference basis), each free slot gets `[s_q | b^q]`,
/// and finally the first vector of the first free slot is rescaled by the
/// remaining torsion.
pub fn construct_compatible_bases(mv: &MvSequence, roles: &[SlotRole]) -> Result<CompatibleBases> {
    if roles.len() != SLOTS {
        return Err(Error::Shape(format!("{} roles for {SLOTS} slots", roles.len())));
    }
    let mut bases: Vec<CMatrix> = Vec::with_capacity(SLOTS);
    let mut b_in = CMatrix::zeros(mv.dims[0], 0);
    for q in 0..SLOTS {
        let d = mv.dims[q];
        let reference = match &roles[q] {
            SlotRole::Given(h) => {
                if h.shape() != (d, d) {
                    return Err(Error::Shape(format!("slot {q} basis has shape {:?}, dimension {d}", h.shape())));
                }
                h.clone()
            }
            _ => CMatrix::identity(d, d),
        };
        let (s, b_out) = match mv.maps.get(q) {
            Some(f) => {
                let s = greedy_complement(f, &reference)?;
                let b = f * &s;
                (s, b)
            }
            None => (CMatrix::zeros(d, 0), CMatrix::zeros(0, 0)),
        };
        let basis = match &roles[q] {
            SlotRole::Given(h) => h.clone(),
            SlotRole::Free => numlin::hstack(&[&s, &b_in], d),
            SlotRole::FreeBlocks(sizes) => {
                if sizes.iter().sum::<usize>() != d {
                    return Err(Error::Shape(format!("slot {q} blocks {sizes:?} for dimension {d}")));
                }
                let blocks: Vec<CMatrix> = sizes.iter().map(|&n| CMatrix::identity(n, n)).collect();
                block_diag(&blocks.iter().collect::<Vec<_>>())
            }
        };
        let condition = numlin::condition_number(&basis);
        if condition > tol::MAX_CONDITION {
            return Err(Error::BasisCompletion(format!(
                "slot {q} completion has condition number {condition:.3e}"
            )));
        }
        bases.push(basis);
        b_in = b_out;
    }
    let rescaled_slot = (0..SLOTS)
        .find(|&q| !matches!(roles[q], SlotRole::Given(_)) && mv.dims[q] > 0)
        .ok_or_else(|| Error::BasisCompletion("no free slot to normalize".into()))?;

    let before = torsion::sequence_torsion(&mv.based(bases.clone())?)?;
    // scaling one basis vector by lambda multiplies the slot factor by lambda^-e
    let lambda = if rescaled_slot % 2 == 0 { before.value.inv() } else { before.value };
    let mut col = bases[rescaled_slot].column_mut(0);
    col *= lambda;
    let after = torsion::sequence_torsion(&mv.based(bases.clone())?)?;
    if (after.value - 1.0).norm() > tol::CORRECTIVE_TOL {
        return Err(Error::BasisCompletion(format!(
            "corrective term {} after normalization",
            after.value
        )));
    }
    Ok(CompatibleBases { bases, rescaled_slot, lambda, corrective_before: before.value, corrective: after })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `T(X1) T(X2)` against `T(X) T(S) tau` for one set of slot bases.
#[derive(Debug, Clone, Serialize)]
pub struct GluingIdentity {
    pub torsion_x: f64,
    pub torsion_x1: f64,
    pub torsion_x2: f64,
    pub torsion_circle: f64,
    pub corrective: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_err: f64,
}

fn split_block(m: &CMatrix, first: usize, n: usize) -> CMatrix {
    m.view((first, first), (n, n)).into_owned()
}

/// Evaluates every torsion in the gluing formula for the slot bases `bases`
/// (slots 1 and 4 must be block-diagonal over the two pieces).
pub fn gluing_identity(spaces: &MvSpaces, mv: &MvSequence, bases: &[CMatrix]) -> Result<GluingIdentity> {
    let (x, x1, x2, s) = (&spaces.x, &spaces.x1, &spaces.x2, &spaces.circle);
    let tx = x.torsion(&[bases[0].clone(), bases[3].clone(), bases[6].clone()])?;
    let t1 = x1.torsion(&[
        split_block(&bases[1], 0, x1.h(0)),
        split_block(&bases[4], 0, x1.h(1)),
        CMatrix::zeros(0, 0),
    ])?;
    let t2 = x2.torsion(&[
        split_block(&bases[1], x1.h(0), x2.h(0)),
        split_block(&bases[4], x1.h(1), x2.h(1)),
        CMatrix::zeros(0, 0),
    ])?;
    let ts = s.torsion(&[bases[2].clone(), bases[5].clone(), CMatrix::zeros(0, 0)])?;
    let tau = torsion::sequence_torsion(&mv.based(bases.to_vec())?)?;
    let lhs = t1.abs() * t2.abs();
    let rhs = tx.abs() * ts.abs() * tau.abs();
    Ok(GluingIdentity {
        torsion_x: tx.abs(),
        torsion_x1: t1.abs(),
        torsion_x2: t2.abs(),
        torsion_circle: ts.abs(),
        corrective: tau.abs(),
        lhs,
        rhs,
        rel_err: rel_err(lhs, rhs),
    })
}

/// Random bases in every slot, block-diagonal over the pieces.
pub fn random_bases(spaces: &MvSpaces, mv: &MvSequence, rng: &mut Rng) -> Vec<CMatrix> {
    (0..SLOTS)
        .map(|q| {
            let blocks: Vec<CMatrix> =
                mv.summands(spaces, q).iter().map(|&n| numlin::random_matrix(rng, n, n)).collect();
            block_diag(&blocks.iter().collect::<Vec<_>>())
        })
        .collect()
}

fn given(m: CMatrix) -> SlotRole {
    SlotRole::Given(m)
}

fn empty_slot() -> SlotRole {
    SlotRole::Given(CMatrix::zeros(0, 0))
}

/// Roles for the disk-cap construction: the bordered piece's `H1` basis is
/// given, the disk gets the geometric basis, both circle groups the
/// geometric basis, and `H1(X)` is completed.
pub fn disk_cap_roles(h1_piece: CMatrix) -> Vec<SlotRole> {
    let id3 = CMatrix::identity(3, 3);
    vec![empty_slot(), given(id3.clone()), given(id3.clone()), SlotRole::Free, given(h1_piece), given(id3), empty_slot()]
}

/// Roles for the separating construction: `H1(X)` and the circle bases are
/// given, the pieces' `H1` bases are completed block-diagonally.
pub fn separating_roles(h1_x: CMatrix, piece_dims: (usize, usize)) -> Vec<SlotRole> {
    let id3 = CMatrix::identity(3, 3);
    vec![
        empty_slot(),
        empty_slot(),
        given(id3.clone()),
        given(h1_x),
        SlotRole::FreeBlocks(vec![piece_dims.0, piece_dims.1]),
        given(id3),
        empty_slot(),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct GluingReport {
    pub kind: DecompositionKind,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub max_composite: f64,
    /// Gluing formula with random bases everywhere.
    pub generic: GluingIdentity,
    /// Gluing formula with compatible bases.
    pub constructed: GluingIdentity,
    pub rescale_factor_abs: f64,
    pub pass: bool,
}

/// Checks the gluing formula for random and for compatible bases.
pub fn verify_gluing(dec: &Decomposition, rep: &Representation, rng: &mut Rng, max_rel_err: f64) -> Result<GluingReport> {
    let spaces = dec.spaces(rep)?;
    let mv = build_mv(dec, &spaces)?;
    let generic = gluing_identity(&spaces, &mv, &random_bases(&spaces, &mv, rng))?;
    let roles = match dec.kind {
        DecompositionKind::DiskCap => disk_cap_roles(CMatrix::identity(spaces.x1.h(1), spaces.x1.h(1))),
        DecompositionKind::Separating => separating_roles(
            CMatrix::identity(spaces.x.h(1), spaces.x.h(1)),
            (spaces.x1.h(1), spaces.x2.h(1)),
        ),
    };
    let compatible = construct_compatible_bases(&mv, &roles)?;
    let constructed = gluing_identity(&spaces, &mv, &compatible.bases)?;
    let pass = generic.rel_err <= max_rel_err
        && constructed.rel_err <= max_rel_err
        && (constructed.corrective - 1.0).abs() <= tol::CORRECTIVE_TOL
        && (constructed.torsion_circle - 1.0).abs() <= 1e-12
        && (dec.kind == DecompositionKind::Separating || (constructed.torsion_x2 - 1.0).abs() <= 1e-12);
    Ok(GluingReport {
        kind: dec.kind,
        dims: mv.dims.to_vec(),
        ranks: mv.ranks.clone(),
        max_composite: mv.max_composite,
        generic,
        constructed,
        rescale_factor_abs: compatible.lambda.norm(),
        pass,
    })
}

/// `(6k-3)! / 6^k`.
pub fn m_k(k: usize) -> f64 {
    let n = 6 * k - 3;
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    fact / 6f64.powi(k as i32)
}

/// One gluing step of the connected-sum recursion.
#[derive(Debug, Clone, Serialize)]
pub struct GluingStep {
    pub block: usize,
    pub kind: DecompositionKind,
    pub corrective: f64,
    pub circle_torsion: f64,
    pub disk_torsion: Option<f64>,
    pub identity_rel_err: f64,
}

/// Closed genus-2 blocks with compatible `H1` bases.
#[derive(Debug, Clone)]
pub struct ConnectedSumBases {
    pub sigma: Arc<CohSpace>,
    pub h1_sigma: CMatrix,
    pub blocks: Vec<Arc<CohSpace>>,
    pub block_bases: Vec<CMatrix>,
    pub steps: Vec<GluingStep>,
}

/// Caps the bordered `piece` (sharing its coordinates) and returns the
/// completed basis of the closed surface.
fn cap(
    closed: Arc<CohSpace>,
    piece: Arc<CohSpace>,
    circle: Arc<CohSpace>,
    h1_piece: CMatrix,
    block: usize,
    steps: &mut Vec<GluingStep>,
) -> Result<CMatrix> {
    let genus = piece.images.len() / 2;
    let dec = Decomposition::disk_cap(genus)?;
    let spaces = MvSpaces { x: closed, x1: piece, x2: Arc::new(CohSpace::disk()), circle };
    let mv = build_mv(&dec, &spaces)?;
    let compatible = construct_compatible_bases(&mv, &disk_cap_roles(h1_piece))?;
    let id = gluing_identity(&spaces, &mv, &compatible.bases)?;
    steps.push(GluingStep {
        block,
        kind: DecompositionKind::DiskCap,
        corrective: id.corrective,
        circle_torsion: id.torsion_circle,
        disk_torsion: Some(id.torsion_x2),
        identity_rel_err: id.rel_err,
    });
    Ok(compatible.bases[3].clone())
}

/// Splits off the blocks one at a time from the right, producing closed block
/// bases whose torsions multiply to the torsion of `h1_sigma`.
pub fn connected_sum_bases(rep: &Representation, k: usize, h1_sigma: CMatrix) -> Result<ConnectedSumBases> {
    if k < 2 || rep.genus() != 2 * k || !rep.is_closed() {
        return Err(Error::Precondition(format!("expected a closed genus-{} representation", 2 * k)));
    }
    let sigma = Arc::new(CohSpace::surface(rep, "sigma")?);
    if h1_sigma.shape() != (sigma.h(1), sigma.h(1)) {
        return Err(Error::Shape(format!("H1 basis of shape {:?}", h1_sigma.shape())));
    }
    let mut steps = Vec::new();
    let mut blocks: Vec<Option<(Arc<CohSpace>, CMatrix)>> = vec![None; k];
    let mut current = sigma.clone();
    let mut h1_current = h1_sigma.clone();
    for j in (2..=k).rev() {
        let prefix_genus = 2 * j - 2;
        let dec = Decomposition::separating(prefix_genus, 2)?;
        let prefix_bordered = Arc::new(CohSpace::surface(&rep.restrict(1, prefix_genus, 1)?, "prefix")?);
        let block_bordered = Arc::new(CohSpace::surface(&rep.restrict(4 * j - 3, 2, 1)?, "block")?);
        let circle = Arc::new(CohSpace::circle(&prefix_bordered.images, &dec.circle1, "S")?);
        let spaces = MvSpaces {
            x: current.clone(),
            x1: prefix_bordered.clone(),
            x2: block_bordered.clone(),
            circle: circle.clone(),
        };
        let mv = build_mv(&dec, &spaces)?;
        let (d1, d2) = (prefix_bordered.h(1), block_bordered.h(1));
        let compatible = construct_compatible_bases(&mv, &separating_roles(h1_current.clone(), (d1, d2)))?;
        let id = gluing_identity(&spaces, &mv, &compatible.bases)?;
        steps.push(GluingStep {
            block: j,
            kind: DecompositionKind::Separating,
            corrective: id.corrective,
            circle_torsion: id.torsion_circle,
            disk_torsion: None,
            identity_rel_err: id.rel_err,
        });
        let h_prefix = split_block(&compatible.bases[4], 0, d1);
        let h_block = split_block(&compatible.bases[4], d1, d2);

        let block_closed = Arc::new(CohSpace::surface(&rep.restrict(4 * j - 3, 2, 0)?, "block")?);
        let block_circle = Arc::new(CohSpace::circle(&block_bordered.images, &surface_word(2, 1), "S")?);
        let hb = cap(block_closed.clone(), block_bordered, block_circle, h_block, j, &mut steps)?;
        blocks[j - 1] = Some((block_closed, hb));

        let prefix_closed = Arc::new(CohSpace::surface(&rep.restrict(1, prefix_genus, 0)?, "prefix")?);
        let hp = cap(prefix_closed.clone(), prefix_bordered, circle, h_prefix, j - 1, &mut steps)?;
        current = prefix_closed;
        h1_current = hp;
    }
    blocks[0] = Some((current, h1_current));
    let (blocks, block_bases): (Vec<_>, Vec<_>) = blocks.into_iter().map(|b| b.expect("every block visited")).unzip();
    Ok(ConnectedSumBases { sigma, h1_sigma, blocks, block_bases, steps })
}

#[derive(Debug, Clone, Serialize)]
pub struct TorsionSummary {
    pub sigma: f64,
    pub blocks: Vec<f64>,
}

/// Record of one trial of the connected-sum volume check.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub resamples: usize,
    pub torsions: TorsionSummary,
    pub pfaffians: TorsionSummary,
    pub corrective_terms: Vec<f64>,
    pub circle_torsions: Vec<f64>,
    /// `|T(sigma)|` against the product of block torsions.
    pub torsion_product_rel_err: f64,
    pub ratio: f64,
    pub rel_err: f64,
}

/// `(6k-3)! |Pf W_sigma| / prod 3! |Pf W_i|` for the given bases, with the
/// torsions of the same bases.
pub fn volume_ratio(
    rep: &Representation,
    sigma: &CohSpace,
    h1_sigma: &CMatrix,
    blocks: &[Arc<CohSpace>],
    block_bases: &[CMatrix],
) -> Result<(f64, TorsionSummary, TorsionSummary)> {
    let k = blocks.len();
    let pf_sigma = gram_for_basis(rep, &(&sigma.coh.reps[1] * h1_sigma))?.pf.norm();
    let t_sigma = sigma.torsion(&[CMatrix::zeros(0, 0), h1_sigma.clone(), CMatrix::zeros(0, 0)])?.abs();
    let mut pfs = Vec::with_capacity(k);
    let mut ts = Vec::with_capacity(k);
    for (i, (b, h)) in blocks.iter().zip(block_bases).enumerate() {
        let block_rep = rep.restrict(4 * i + 1, 2, 0)?;
        pfs.push(gram_for_basis(&block_rep, &(&b.coh.reps[1] * h))?.pf.norm());
        ts.push(b.torsion(&[CMatrix::zeros(0, 0), h.clone(), CMatrix::zeros(0, 0)])?.abs());
    }
    let n = 6 * k - 3;
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    let lhs = fact * pf_sigma;
    let rhs: f64 = pfs.iter().map(|p| 6.0 * p).product();
    Ok((
        lhs / rhs,
        TorsionSummary { sigma: t_sigma, blocks: ts },
        TorsionSummary { sigma: pf_sigma, blocks: pfs },
    ))
}

fn is_resample(e: &Error) -> bool {
    matches!(
        e,
        Error::SamplingFailure(_)
            | Error::SolverFailure(_)
            | Error::BasisCompletion(_)
            | Error::DegenerateBasis(_)
            | Error::IllConditionedBasis { .. }
            | Error::DecompositionInconsistency(_)
            | Error::ConditionCUndefined(_)
    )
}

const MAX_RESAMPLES: usize = 20;

/// Runs one trial on its own PRNG substream, resampling on degenerate draws.
pub fn run_trial(k: usize, seed: u64, trial: usize) -> Result<TrialRecord> {
    let mut rng = rng::substream(seed, trial as u64);
    let mut resamples = 0;
    loop {
        match trial_once(k, &mut rng) {
            Ok((torsions, pfaffians, cs, ratio, product_err)) => {
                let target = m_k(k);
                return Ok(TrialRecord {
                    trial,
                    seed,
                    k,
                    resamples,
                    torsions,
                    pfaffians,
                    corrective_terms: cs.steps.iter().map(|s| s.corrective).collect(),
                    circle_torsions: cs.steps.iter().map(|s| s.circle_torsion).collect(),
                    torsion_product_rel_err: product_err,
                    ratio,
                    rel_err: rel_err(ratio, target),
                });
            }
            Err(e) if is_resample(&e) && resamples < MAX_RESAMPLES => resamples += 1,
            Err(e) => return Err(e),
        }
    }
}

type TrialOutput = (TorsionSummary, TorsionSummary, ConnectedSumBases, f64, f64);

fn trial_once(k: usize, rng: &mut Rng) -> Result<TrialOutput> {
    let rep = reps::sample_connected_sum(k, rng)?;
    let cond = reps::check_condition_c(&rep, k)?;
    if !cond.all_good {
        return Err(Error::SamplingFailure("condition C fails for the sampled blocks".into()));
    }
    let h = CMatrix::identity(6 * (2 * k) - 6, 6 * (2 * k) - 6);
    let cs = connected_sum_bases(&rep, k, h)?;
    let (ratio, torsions, pfaffians) = volume_ratio(&rep, &cs.sigma, &cs.h1_sigma, &cs.blocks, &cs.block_bases)?;
    let product: f64 = torsions.blocks.iter().product();
    let product_err = rel_err(torsions.sigma, product);
    Ok((torsions, pfaffians, cs, ratio, product_err))
}

#[derive(Debug, Clone, Serialize)]
pub struct MainReport {
    pub k: usize,
    pub trials: usize,
    #[serde(rename = "M_k")]
    pub m_k: f64,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub max_corrective_deviation: f64,
    pub max_circle_deviation: f64,
    pub records: Vec<TrialRecord>,
    pub pass: bool,
}

/// Default tolerance on the volume ratio.
pub fn default_main_tolerance(k: usize) -> f64 {
    if k <= 2 {
        1e-6
    } else {
        1e-5
    }
}

/// Runs `trials` independent trials in parallel; records are in trial order.
pub fn verify_main_theorem(k: usize, trials: usize, seed: u64, tolerance: f64) -> Result<MainReport> {
    if k < 2 {
        return Err(Error::Precondition(format!("k must be at least 2, got {k}")));
    }
    if 6 * k - 3 > 45 {
        return Err(Error::OutOfScope(format!("6k - 3 = {} exceeds 45", 6 * k - 3)));
    }
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    let records = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(k, seed, t))
        .collect::<Result<Vec<_>>>()?;
    let max_rel_err = records.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let max_corrective_deviation = records
        .iter()
        .flat_map(|r| r.corrective_terms.iter())
        .map(|c| (c - 1.0).abs())
        .fold(0.0, f64::max);
    let max_circle_deviation = records
        .iter()
        .flat_map(|r| r.circle_torsions.iter())
        .map(|c| (c - 1.0).abs())
        .fold(0.0, f64::max);
    let pass = max_rel_err <= tolerance
        && max_corrective_deviation <= tol::CORRECTIVE_TOL
        && max_circle_deviation <= 1e-12;
    Ok(MainReport {
        k,
        trials,
        m_k: m_k(k),
        max_rel_err,
        tolerance,
        max_corrective_deviation,
        max_circle_deviation,
        records,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reps::{sample_block_rep, sample_connected_sum};

    fn genus4(seed: u64) -> Representation {
        sample_connected_sum(2, &mut rng::seeded(seed)).unwrap()
    }

    #[test]
    fn m_k_values() {
        assert_eq!(m_k(2), 10080.0);
        assert!((m_k(3) - 1307674368000.0 / 216.0).abs() < 1e-3);
    }

    #[test]
    fn disk_cap_ledger() {
        let rep = sample_block_rep(&mut rng::seeded(1)).unwrap();
        let dec = Decomposition::disk_cap(2).unwrap();
        let spaces = dec.spaces(&rep).unwrap();
        let mv = build_mv(&dec, &spaces).unwrap();
        assert_eq!(mv.dims, [0, 3, 3, 6, 9, 3, 0]);
        assert_eq!(mv.alternating_sum(), 0);
        assert!(mv.max_composite < 1e-9);
        // the connecting map vanishes: every H0(S) class comes from the disk
        assert_eq!(mv.ranks[2], 0);
    }

    #[test]
    fn separating_ledger() {
        let rep = genus4(2);
        let dec = Decomposition::separating(2, 2).unwrap();
        let spaces = dec.spaces(&rep).unwrap();
        let mv = build_mv(&dec, &spaces).unwrap();
        assert_eq!(mv.dims, [0, 0, 3, 18, 18, 3, 0]);
        assert_eq!(mv.ranks[2..5], [3, 15, 3]);
    }

    #[test]
    fn connecting_map_examples() {
        let rep = genus4(3);
        let dec = Decomposition::separating(2, 2).unwrap();
        let spaces = dec.spaces(&rep).unwrap();
        let zero = connecting_hom(&spaces, &CMatrix::zeros(3, 1)).unwrap();
        assert!(zero.norm() == 0.0);
        let v = numlin::random_matrix(&mut rng::seeded(4), 3, 1);
        let u = connecting_hom(&spaces, &v).unwrap();
        assert!((&spaces.x.complex.delta1 * &u).norm() < 1e-9);
        let c = spaces.x.coh.class_coordinates(1, &u).unwrap();
        assert!(c.norm() > 1e-3);
    }

    #[test]
    fn restriction_of_coboundary_is_zero() {
        let rep = genus4(5);
        let dec = Decomposition::separating(2, 2).unwrap();
        let spaces = dec.spaces(&rep).unwrap();
        let v = numlin::random_matrix(&mut rng::seeded(6), 3, 1);
        let cob = &spaces.x.complex.delta0 * v;
        let coords = spaces.x.coh.class_coordinates(1, &cob).unwrap();
        assert!(coords.norm() < 1e-10);
        let r1 = restrict_cochain(&cob, 0, 4);
        assert!(spaces.x1.coh.class_coordinates(1, &r1).unwrap().norm() < 1e-10);
    }

    #[test]
    fn gluing_both_kinds() {
        let mut r = rng::seeded(7);
        let rep = genus4(8);
        for dec in [Decomposition::separating(2, 2).unwrap(), Decomposition::disk_cap(4).unwrap()] {
            let report = verify_gluing(&dec, &rep, &mut r, 1e-8).unwrap();
            assert!(report.pass, "{report:?}");
            assert!(report.generic.rel_err < 1e-8);
            assert!((report.constructed.corrective - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn corrective_generically_not_one() {
        let mut r = rng::seeded(9);
        let rep = genus4(10);
        let dec = Decomposition::separating(2, 2).unwrap();
        let spaces = dec.spaces(&rep).unwrap();
        let mv = build_mv(&dec, &spaces).unwrap();
        let off = (0..20)
            .filter(|_| {
                let g = gluing_identity(&spaces, &mv, &random_bases(&spaces, &mv, &mut r)).unwrap();
                (g.corrective - 1.0).abs() > 1e-3
            })
            .count();
        assert!(off >= 18);
    }

    #[test]
    fn rescale_factor_matches_corrective() {
        let rep = sample_block_rep(&mut rng::seeded(11)).unwrap();
        let dec = Decomposition::disk_cap(2).unwrap();
        let spaces = dec.spaces(&rep).unwrap();
        let mv = build_mv(&dec, &spaces).unwrap();
        let c = construct_compatible_bases(&mv, &disk_cap_roles(CMatrix::identity(9, 9))).unwrap();
        assert_eq!(c.rescaled_slot, 3);
        // slot 3 enters with exponent +1, so lambda is the corrective term itself
        assert!((c.lambda - c.corrective_before).norm() < 1e-12 * c.lambda.norm());
    }

    #[test]
    fn volume_ratio_k2() {
        let report = verify_main_theorem(2, 3, 1, 1e-6).unwrap();
        assert!(report.pass, "{report:?}");
        assert_eq!(report.records.len(), 3);
        assert!(report.records.iter().all(|r| r.torsion_product_rel_err < 1e-8));
    }

    #[test]
    fn volume_ratio_k3() {
        let report = verify_main_theorem(2 + 1, 1, 2, 1e-5).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn mismatched_block_bases_break_the_ratio() {
        let rep = genus4(12);
        let cs = connected_sum_bases(&rep, 2, CMatrix::identity(18, 18)).unwrap();
        let ident: Vec<CMatrix> = cs.blocks.iter().map(|_| CMatrix::identity(6, 6)).collect();
        let (good, _, _) = volume_ratio(&rep, &cs.sigma, &cs.h1_sigma, &cs.blocks, &cs.block_bases).unwrap();
        let (bad, _, _) = volume_ratio(&rep, &cs.sigma, &cs.h1_sigma, &cs.blocks, &ident).unwrap();
        assert!(rel_err(good, m_k(2)) < 1e-6);
        assert!(rel_err(bad, m_k(2)) > 1e-3);
    }

    #[test]
    fn deterministic_reports() {
        let a = verify_main_theorem(2, 2, 5, 1e-6).unwrap();
        let b = verify_main_theorem(2, 2, 5, 1e-6).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
