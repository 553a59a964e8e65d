//! Sampling and validating good `SL(2, C)` representations of surface groups.
//!
//! A closed genus-`2k` representation is built block by block: each block is a
//! genus-2 representation `(a, b, c, d)` with `[a,b][c,d] = I`, so every
//! separating word `S1_j` evaluates to the identity and the restrictions to
//! capped blocks are defined.
//!
//! Irreducibility of an `SL(2, C)` representation forces the stabilizer of its
//! image under conjugation to be `{+I, -I}`, the center, so goodness is tested
//! as irreducibility plus `H^0 = 0` as an independent numerical check.

use crate::cochain;
use crate::error::{Error, Result};
use crate::lie::Sl2Matrix;
use crate::numlin::{self, CMatrix};
use crate::tol;
use crate::words::{surface_presentation, GroupWord, Presentation};
use crate::C64;
use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A representation of a surface group, validated on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRepresentation")]
pub struct Representation {
    presentation: Presentation,
    images: Vec<Sl2Matrix>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    method: String,
}

#[derive(Deserialize)]
struct RawRepresentation {
    presentation: Presentation,
    images: Vec<Sl2Matrix>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    method: String,
}

impl TryFrom<RawRepresentation> for Representation {
    type Error = Error;
    fn try_from(raw: RawRepresentation) -> Result<Self> {
        let mut rep = Representation::new(raw.presentation, raw.images)?;
        rep.seed = raw.seed;
        rep.method = raw.method;
        Ok(rep)
    }
}

impl Representation {
    /// Checks generator count, unit determinants and the relator.
    pub fn new(presentation: Presentation, images: Vec<Sl2Matrix>) -> Result<Self> {
        presentation.validate()?;
        if images.len() != presentation.generator_count() {
            return Err(Error::InvalidRepresentation(format!(
                "{} images for {} generators",
                images.len(),
                presentation.generator_count()
            )));
        }
        for g in &images {
            g.validate()?;
        }
        let rep = Representation { presentation, images, seed: None, method: String::new() };
        let residual = rep.relator_residual();
        if residual >= tol::RELATOR_TOL {
            return Err(Error::InvalidRepresentation(format!(
                "relator residual {residual:.3e}"
            )));
        }
        Ok(rep)
    }

    pub fn with_meta(mut self, seed: Option<u64>, method: &str) -> Self {
        self.seed = seed;
        self.method = method.to_string();
        self
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn images(&self) -> &[Sl2Matrix] {
        &self.images
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    pub fn genus(&self) -> usize {
        self.presentation.genus
    }

    pub fn is_closed(&self) -> bool {
        self.presentation.relator.is_some()
    }

    pub fn evaluate(&self, w: &GroupWord) -> Result<Sl2Matrix> {
        w.evaluate(&self.images)
    }

    /// Frobenius distance of the relator image from `I` (0 for free groups).
    pub fn relator_residual(&self) -> f64 {
        match &self.presentation.relator {
            Some(r) => r
                .evaluate(&self.images)
                .map(|m| m.frobenius_distance(&Sl2Matrix::identity()))
                .unwrap_or(f64::INFINITY),
            None => 0.0,
        }
    }

    /// Restriction to `genus` consecutive handles starting at generator `first`
    /// (1-based), presented as a closed or once-bordered surface.
    pub fn restrict(&self, first: usize, genus: usize, boundary: usize) -> Result<Representation> {
        let end = first - 1 + 2 * genus;
        if first == 0 || end > self.images.len() {
            return Err(Error::MalformedWord(format!(
                "generators {first}..={end} out of range"
            )));
        }
        let images = self.images[first - 1..end].to_vec();
        Representation::new(surface_presentation(genus, boundary)?, images)
            .map(|r| r.with_meta(self.seed, "restriction"))
    }

    /// `g rho g^-1`.
    pub fn conjugate(&self, g: &Sl2Matrix) -> Result<Representation> {
        g.validate()?;
        let gi = g.inverse();
        let images = self.images.iter().map(|x| *g * *x * gi).collect();
        Representation::new(self.presentation.clone(), images)
            .map(|r| r.with_meta(self.seed, "conjugate"))
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

fn normalize_det(m: Matrix2<C64>) -> Sl2Matrix {
    let d = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Sl2Matrix(m / d.sqrt())
}

/// Gaussian matrix scaled to unit determinant.
pub fn random_sl2<R: Rng + ?Sized>(rng: &mut R) -> Result<Sl2Matrix> {
    for _ in 0..100 {
        let m = Matrix2::from_fn(|_, _| complex_normal(rng));
        let d = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        if d.norm() >= 1e-6 {
            return Ok(normalize_det(m));
        }
    }
    Err(Error::SamplingFailure("no invertible Gaussian matrix in 100 draws".into()))
}

fn adjugate(m: &Matrix2<C64>) -> Matrix2<C64> {
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

fn unit(k: usize) -> Matrix2<C64> {
    let mut m = Matrix2::zeros();
    m[(k / 2, k % 2)] = C64::new(1.0, 0.0);
    m
}

/// Finds `(a, b)` with `[a, b] = T`.
///
/// `[a,b] = T` is equivalent to `b a^-1 b^-1 = a^-1 T`, which needs `a^-1` and
/// `a^-1 T` to be conjugate. For `det a = 1` their traces agree iff
/// `tr(adj(a)(T - I)) = 0`, a linear condition on `a`. Given such `a`, `b` is
/// any invertible solution of the linear equation `b a^-1 = (a^-1 T) b`.
pub fn solve_commutator<R: Rng + ?Sized>(t: &Sl2Matrix, rng: &mut R) -> Result<(Sl2Matrix, Sl2Matrix)> {
    t.validate()?;
    if t.frobenius_distance(&Sl2Matrix::identity()) < 1e-12 {
        return Ok((Sl2Matrix::identity(), Sl2Matrix::identity()));
    }
    if (t.trace() - 2.0).norm() <= tol::PARABOLIC_TOL {
        return Err(Error::SolverFailure("near-parabolic commutator target".into()));
    }
    let t_minus = t.0 - Matrix2::identity();
    let ell: Vec<C64> = (0..4).map(|k| (adjugate(&unit(k)) * t_minus).trace()).collect();
    let ell_norm2: f64 = ell.iter().map(|z| z.norm_sqr()).sum();

    for _ in 0..50 {
        let a0: Vec<C64> = (0..4).map(|_| complex_normal(rng)).collect();
        let dot: C64 = ell.iter().zip(&a0).map(|(l, a)| l * a).sum();
        let a_vec: Vec<C64> =
            a0.iter().zip(&ell).map(|(a, l)| a - l.conj() * dot / ell_norm2).collect();
        let a = Matrix2::new(a_vec[0], a_vec[1], a_vec[2], a_vec[3]);
        let da = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        if da.norm() < 1e-3 {
            continue;
        }
        let a = normalize_det(a);
        let a_inv = a.inverse();
        let r = a_inv.0 * t.0;

        let mut lmap = CMatrix::zeros(4, 4);
        for k in 0..4 {
            let e = unit(k);
            let img = e * a_inv.0 - r * e;
            for i in 0..4 {
                lmap[(i, k)] = img[(i / 2, i % 2)];
            }
        }
        let rd = numlin::rank_decompose(&lmap, 1e-10)?;
        if rd.kernel_basis.ncols() == 0 {
            continue;
        }
        let mut b: Matrix2<C64> = Matrix2::zeros();
        for j in 0..rd.kernel_basis.ncols() {
            let c = complex_normal(rng);
            for i in 0..4 {
                b[(i / 2, i % 2)] += rd.kernel_basis[(i, j)] * c;
            }
        }
        let db = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)];
        if db.norm() < 1e-3 {
            continue;
        }
        let b = normalize_det(b);
        if Sl2Matrix::commutator(&a, &b).frobenius_distance(t) < 1e-10 {
            return Ok((a, b));
        }
    }
    Err(Error::SolverFailure("commutator equation unsolved after 50 restarts".into()))
}

/// A pair of words and how far `tr [rho(u), rho(v)]` is from 2.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceWitness {
    pub u: GroupWord,
    pub v: GroupWord,
    #[serde(with = "crate::serde_complex::scalar")]
    pub trace: C64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoodnessReport {
    pub h0_dim: usize,
    pub irreducible: bool,
    pub trace_witness: TraceWitness,
    pub is_good: bool,
}

/// Goodness of the restriction to the given images.
pub fn check_good_images(images: &[Sl2Matrix]) -> Result<GoodnessReport> {
    let delta0 = cochain::delta0(images);
    let h0_dim = 3 - numlin::rank_decompose(&delta0, tol::RANK_REL)?.rank;

    let n = images.len();
    let mut words: Vec<GroupWord> = (1..=n).map(GroupWord::gen).collect();
    for i in 1..=n {
        for j in i + 1..=n {
            words.push(GroupWord::gen(i).concat(&GroupWord::gen(j)));
        }
    }
    let values: Vec<Sl2Matrix> =
        words.iter().map(|w| w.evaluate(images)).collect::<Result<_>>()?;

    let mut witness = TraceWitness {
        u: GroupWord::empty(),
        v: GroupWord::empty(),
        trace: C64::new(2.0, 0.0),
        distance: 0.0,
    };
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let tr = Sl2Matrix::commutator(&values[i], &values[j]).trace();
            let dist = (tr - 2.0).norm();
            if dist > witness.distance {
                witness = TraceWitness { u: words[i].clone(), v: words[j].clone(), trace: tr, distance: dist };
            }
        }
    }
    let irreducible = witness.distance > tol::IRREDUCIBLE_TOL;
    Ok(GoodnessReport { h0_dim, irreducible, is_good: irreducible && h0_dim == 0, trace_witness: witness })
}

pub fn check_good(rep: &Representation) -> Result<GoodnessReport> {
    check_good_images(rep.images())
}

/// A good genus-2 representation with `[a,b][c,d] = I`.
pub fn sample_block_rep<R: Rng + ?Sized>(rng: &mut R) -> Result<Representation> {
    let pres = surface_presentation(2, 0)?;
    for _ in 0..100 {
        let c = random_sl2(rng)?;
        let d = random_sl2(rng)?;
        if c.0.norm() > tol::MAX_IMAGE_NORM || d.0.norm() > tol::MAX_IMAGE_NORM {
            continue;
        }
        let t = Sl2Matrix::commutator(&c, &d).inverse();
        let (a, b) = match solve_commutator(&t, rng) {
            Ok(ab) => ab,
            Err(Error::SolverFailure(_) | Error::InvalidRepresentation(_)) => continue,
            Err(e) => return Err(e),
        };
        if a.0.norm() > tol::MAX_IMAGE_NORM || b.0.norm() > tol::MAX_IMAGE_NORM {
            continue;
        }
        let rep = match Representation::new(pres.clone(), vec![a, b, c, d]) {
            Ok(r) => r,
            Err(Error::InvalidRepresentation(_)) => continue,
            Err(e) => return Err(e),
        };
        if numlin::operator_norm(&cochain::build_complex(&rep)?.delta1) > tol::MAX_COBOUNDARY_NORM {
            continue;
        }
        if check_good(&rep)?.is_good {
            return Ok(rep.with_meta(None, "block"));
        }
    }
    Err(Error::SamplingFailure("no good block representation in 100 attempts".into()))
}

/// Connected sum of `k >= 2` genus-2 blocks: block `i` occupies generators `4i-3..4i`.
pub fn assemble_connected_sum(blocks: &[Representation]) -> Result<Representation> {
    if blocks.len() < 2 {
        return Err(Error::Precondition(format!(
            "a connected sum needs at least 2 blocks, got {}",
            blocks.len()
        )));
    }
    let mut images = Vec::with_capacity(4 * blocks.len());
    for (i, b) in blocks.iter().enumerate() {
        if b.genus() != 2 || !b.is_closed() {
            return Err(Error::InvalidBlock(format!("block {} is not a closed genus-2 representation", i + 1)));
        }
        let residual = b.relator_residual();
        if residual > tol::RELATOR_TOL {
            return Err(Error::InvalidBlock(format!(
                "block {} relator residual {residual:.3e}",
                i + 1
            )));
        }
        images.extend_from_slice(b.images());
    }
    let pres = surface_presentation(2 * blocks.len(), 0)?;
    let seed = blocks[0].seed();
    Ok(Representation::new(pres, images)?.with_meta(seed, "connected-sum"))
}

/// Samples `k` good blocks and assembles them.
pub fn sample_connected_sum<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Representation> {
    let blocks = (0..k).map(|_| sample_block_rep(rng)).collect::<Result<Vec<_>>>()?;
    assemble_connected_sum(&blocks)
}

/// Samples a good representation of a closed surface of genus 1 or an even genus.
pub fn sample_closed<R: Rng + ?Sized>(genus: usize, rng: &mut R) -> Result<Representation> {
    match genus {
        2 => sample_block_rep(rng),
        g if g >= 4 && g % 2 == 0 => sample_connected_sum(g / 2, rng),
        g => Err(Error::OutOfScope(format!(
            "sampling is implemented for even genus >= 2, got {g}"
        ))),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockCheck {
    pub index: usize,
    pub closed: GoodnessReport,
    pub bordered: GoodnessReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCReport {
    pub k: usize,
    pub separating_residuals: Vec<f64>,
    pub blocks: Vec<BlockCheck>,
    /// Unions of the first `j` blocks, `2 <= j < k`, closed and bordered.
    pub prefixes: Vec<BlockCheck>,
    pub all_good: bool,
}

/// Checks that every block and every prefix union restricts to a good
/// representation, both capped and bordered.
pub fn check_condition_c(rep: &Representation, k: usize) -> Result<ConditionCReport> {
    if k < 2 {
        return Err(Error::Precondition(format!("condition C needs k >= 2, got {k}")));
    }
    if rep.genus() != 2 * k || !rep.is_closed() {
        return Err(Error::Precondition(format!(
            "expected a closed genus-{} representation",
            2 * k
        )));
    }
    let mut separating_residuals = Vec::with_capacity(k - 1);
    for j in 1..k {
        let w = crate::words::surface_word(2 * j, 1);
        let residual = rep.evaluate(&w)?.frobenius_distance(&Sl2Matrix::identity());
        if residual > tol::SEPARATING_TOL {
            return Err(Error::ConditionCUndefined(format!(
                "separating word S1_{j} has residual {residual:.3e}"
            )));
        }
        separating_residuals.push(residual);
    }
    let check = |index: usize, first: usize, genus: usize| -> Result<BlockCheck> {
        let images = &rep.images()[first - 1..first - 1 + 2 * genus];
        let closed = check_good_images(images)?;
        // the bordered restriction has the same images and the same H^0
        let bordered = check_good(&rep.restrict(first, genus, 1)?)?;
        Ok(BlockCheck { index, closed, bordered })
    };
    let blocks = (1..=k).map(|i| check(i, 4 * i - 3, 2)).collect::<Result<Vec<_>>>()?;
    let prefixes = (2..k).map(|j| check(j, 1, 2 * j)).collect::<Result<Vec<_>>>()?;
    let all_good = blocks
        .iter()
        .chain(&prefixes)
        .all(|b| b.closed.is_good && b.bordered.is_good);
    Ok(ConditionCReport { k, separating_residuals, blocks, prefixes, all_good })
}
