//! Free-group words, the integral group ring, surface presentations and Fox calculus.
//!
//! Generators are 1-based. The closed surface of genus `g` has generators
//! `x_1..x_2g` and relator `[x_1,x_2]...[x_{2g-1},x_{2g}]`; the surface with one
//! boundary circle has the same generators, no relator, and that product as its
//! boundary word.

use crate::error::{Error, Result};
use crate::lie::Sl2Matrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A generator (1-based) raised to `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub gen: usize,
    pub exp: i8,
}

impl Letter {
    pub fn new(gen: usize, exp: i8) -> Result<Self> {
        if gen == 0 {
            return Err(Error::MalformedWord("generator indices are 1-based".into()));
        }
        if exp != 1 && exp != -1 {
            return Err(Error::MalformedWord(format!("exponent {exp} is not +-1")));
        }
        Ok(Letter { gen, exp })
    }

    pub fn inverse(self) -> Self {
        Letter { gen: self.gen, exp: -self.exp }
    }
}

/// A word in the generators, stored as written.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<[i64; 2]>", into = "Vec<[i64; 2]>")]
pub struct GroupWord {
    letters: Vec<Letter>,
}

impl GroupWord {
    pub fn empty() -> Self {
        GroupWord::default()
    }

    /// The single letter `x_i`.
    pub fn gen(i: usize) -> Self {
        GroupWord { letters: vec![Letter { gen: i, exp: 1 }] }
    }

    pub fn from_letters(letters: Vec<Letter>) -> Self {
        GroupWord { letters }
    }

    /// Builds a word from `(index, exponent)` pairs, validating each.
    pub fn from_pairs(pairs: &[(usize, i8)]) -> Result<Self> {
        let letters = pairs
            .iter()
            .map(|&(g, e)| Letter::new(g, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupWord { letters })
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn max_gen(&self) -> usize {
        self.letters.iter().map(|l| l.gen).max().unwrap_or(0)
    }

    /// Free reduction.
    pub fn reduce(&self) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        GroupWord { letters: out }
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[0] != w[1].inverse())
    }

    pub fn inverse(&self) -> Self {
        GroupWord { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    pub fn concat(&self, other: &GroupWord) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        GroupWord { letters }
    }

    /// `a b a^-1 b^-1`.
    pub fn commutator(a: &GroupWord, b: &GroupWord) -> Self {
        a.concat(b).concat(&a.inverse()).concat(&b.inverse())
    }

    /// Prefix of the first `n` letters.
    pub fn prefix(&self, n: usize) -> Self {
        GroupWord { letters: self.letters[..n].to_vec() }
    }

    /// Adds `offset` to every generator index.
    pub fn shift(&self, offset: usize) -> Self {
        GroupWord {
            letters: self
                .letters
                .iter()
                .map(|l| Letter { gen: l.gen + offset, exp: l.exp })
                .collect(),
        }
    }

    /// Ordered product of the generator images (1-based indices into `images`).
    pub fn evaluate(&self, images: &[Sl2Matrix]) -> Result<Sl2Matrix> {
        let mut acc = Sl2Matrix::identity();
        for l in &self.letters {
            let g = images.get(l.gen.wrapping_sub(1)).ok_or_else(|| {
                Error::MalformedWord(format!(
                    "generator {} out of range (have {})",
                    l.gen,
                    images.len()
                ))
            })?;
            acc = if l.exp == 1 { acc * *g } else { acc * g.inverse() };
        }
        Ok(acc)
    }
}

impl fmt::Display for GroupWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            if l.exp == 1 {
                write!(f, "x{}", l.gen)?;
            } else {
                write!(f, "x{}^-1", l.gen)?;
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<[i64; 2]>> for GroupWord {
    type Error = Error;
    fn try_from(pairs: Vec<[i64; 2]>) -> Result<Self> {
        let letters = pairs
            .into_iter()
            .map(|[g, e]| {
                if g < 1 {
                    return Err(Error::MalformedWord(format!("generator index {g}")));
                }
                let e = i8::try_from(e)
                    .map_err(|_| Error::MalformedWord(format!("exponent {e}")))?;
                Letter::new(g as usize, e)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroupWord { letters })
    }
}

impl From<GroupWord> for Vec<[i64; 2]> {
    fn from(w: GroupWord) -> Self {
        w.letters.iter().map(|l| [l.gen as i64, l.exp as i64]).collect()
    }
}

/// Element of `Z[F]`: integer combination of reduced words, zero terms dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroupRingElement {
    terms: BTreeMap<GroupWord, i64>,
}

impl GroupRingElement {
    pub fn zero() -> Self {
        GroupRingElement::default()
    }

    pub fn one() -> Self {
        Self::from_word(GroupWord::empty())
    }

    pub fn from_word(w: GroupWord) -> Self {
        Self::from_terms(vec![(1, w)])
    }

    pub fn from_terms(terms: Vec<(i64, GroupWord)>) -> Self {
        let mut out = GroupRingElement::zero();
        for (c, w) in terms {
            out.add_term(c, &w);
        }
        out
    }

    fn add_term(&mut self, c: i64, w: &GroupWord) {
        if c == 0 {
            return;
        }
        let key = w.reduce();
        let entry = self.terms.entry(key.clone()).or_insert(0);
        *entry += c;
        if *entry == 0 {
            self.terms.remove(&key);
        }
    }

    /// `(coefficient, word)` pairs in a canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&i64, &GroupWord)> {
        self.terms.iter().map(|(w, c)| (c, w))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, w: &GroupWord) -> i64 {
        self.terms.get(&w.reduce()).copied().unwrap_or(0)
    }
}

impl Add for &GroupRingElement {
    type Output = GroupRingElement;
    fn add(self, rhs: &GroupRingElement) -> GroupRingElement {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(*c, w);
        }
        out
    }
}

impl Neg for &GroupRingElement {
    type Output = GroupRingElement;
    fn neg(self) -> GroupRingElement {
        GroupRingElement { terms: self.terms.iter().map(|(w, c)| (w.clone(), -c)).collect() }
    }
}

impl Sub for &GroupRingElement {
    type Output = GroupRingElement;
    fn sub(self, rhs: &GroupRingElement) -> GroupRingElement {
        self + &(-rhs)
    }
}

impl Mul for &GroupRingElement {
    type Output = GroupRingElement;
    fn mul(self, rhs: &GroupRingElement) -> GroupRingElement {
        let mut out = GroupRingElement::zero();
        for (u, a) in &self.terms {
            for (v, b) in &rhs.terms {
                out.add_term(a * b, &u.concat(v));
            }
        }
        out
    }
}

/// `dw/dx_k` by the left Fox rule.
///
/// A letter `x_k` at position `j` contributes `+w_{j-1}`; a letter `x_k^-1`
/// contributes `-w_j` (the prefix that already includes it).
pub fn fox_derivative(w: &GroupWord, k: usize) -> GroupRingElement {
    let mut out = GroupRingElement::zero();
    for (j, l) in w.letters.iter().enumerate() {
        if l.gen != k {
            continue;
        }
        if l.exp == 1 {
            out.add_term(1, &w.prefix(j));
        } else {
            out.add_term(-1, &w.prefix(j + 1));
        }
    }
    out
}

/// Ordered product of a representation's generator images along `w`.
pub fn evaluate_word(rep: &crate::reps::Representation, w: &GroupWord) -> Result<Sl2Matrix> {
    w.evaluate(rep.images())
}

/// `[x_1,x_2]...[x_{2g-1},x_{2g}]` over generators starting at `first`.
pub fn surface_word(genus: usize, first: usize) -> GroupWord {
    let mut w = GroupWord::empty();
    for i in 0..genus {
        let a = GroupWord::gen(first + 2 * i);
        let b = GroupWord::gen(first + 2 * i + 1);
        w = w.concat(&GroupWord::commutator(&a, &b));
    }
    w
}

/// Fundamental-group presentation of a closed or once-bordered orientable surface.
///
/// `separating` holds the words `S1_j` cutting off the first `j` genus-2 blocks;
/// for genus `2k` these are `S1_1 .. S1_{k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presentation {
    pub genus: usize,
    pub boundary: usize,
    pub relator: Option<GroupWord>,
    #[serde(default)]
    pub separating: BTreeMap<String, GroupWord>,
}

impl Presentation {
    pub fn generator_count(&self) -> usize {
        2 * self.genus
    }

    /// The product of commutators: the relator when closed, the boundary word otherwise.
    pub fn boundary_word(&self) -> GroupWord {
        surface_word(self.genus, 1)
    }

    pub fn relators(&self) -> Vec<&GroupWord> {
        self.relator.iter().collect()
    }

    pub fn separating_word(&self, j: usize) -> Option<&GroupWord> {
        self.separating.get(&separating_name(j))
    }

    /// Checks internal consistency (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        if self.genus == 0 {
            return Err(Error::OutOfScope("genus must be at least 1".into()));
        }
        if self.boundary > 1 {
            return Err(Error::OutOfScope(format!(
                "{} boundary components are not supported",
                self.boundary
            )));
        }
        if self.relator.is_some() != (self.boundary == 0) {
            return Err(Error::MalformedWord(
                "a relator is present exactly when the surface is closed".into(),
            ));
        }
        let n = self.generator_count();
        let words = self.relator.iter().chain(self.separating.values());
        for w in words {
            if w.max_gen() > n {
                return Err(Error::MalformedWord(format!(
                    "word {w} uses a generator beyond x{n}"
                )));
            }
        }
        Ok(())
    }
}

pub fn separating_name(j: usize) -> String {
    format!("S1_{j}")
}

/// Standard presentation of the genus-`genus` surface with `boundary_count` in {0, 1}.
pub fn surface_presentation(genus: usize, boundary_count: usize) -> Result<Presentation> {
    if genus == 0 {
        return Err(Error::OutOfScope("genus must be at least 1".into()));
    }
    if boundary_count > 1 {
        return Err(Error::OutOfScope(format!(
            "{boundary_count} boundary components are not supported"
        )));
    }
    let relator = (boundary_count == 0).then(|| surface_word(genus, 1));
    let mut separating = BTreeMap::new();
    for j in 1..genus.div_ceil(2) {
        separating.insert(separating_name(j), surface_word(2 * j, 1));
    }
    Ok(Presentation { genus, boundary: boundary_count, relator, separating })
}
