//! Reduced words in finitely generated free groups.
//!
//! A [`Letter`] is a generator or an inverse generator, stored as a nonzero
//! signed integer (`+i` for the `i`-th generator, `-i` for its inverse,
//! indices 1-based). A [`Word`] is a freely reduced sequence of letters; the
//! empty word is the identity. All values are immutable after construction,
//! so equality in the free group is plain sequence equality.

use std::fmt;
use std::num::NonZeroI32;

use crate::{Error, Result};

/// A single generator or inverse generator.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(NonZeroI32);

impl Letter {
    /// The `index`-th positive generator (1-based).
    pub fn gen(index: usize) -> Letter {
        Letter(NonZeroI32::new(i32::try_from(index).expect("generator index fits i32")).expect("index >= 1"))
    }

    /// The inverse of the `index`-th generator.
    pub fn inv_gen(index: usize) -> Letter {
        Letter::gen(index).inverse()
    }

    /// Builds a letter from a signed index, `None` for zero.
    pub fn from_signed(value: i32) -> Option<Letter> {
        NonZeroI32::new(value).map(Letter)
    }

    /// 1-based generator index.
    pub fn index(self) -> usize {
        self.0.get().unsigned_abs() as usize
    }

    pub fn is_positive(self) -> bool {
        self.0.get() > 0
    }

    pub fn sign(self) -> i64 {
        if self.is_positive() { 1 } else { -1 }
    }

    pub fn signed(self) -> i32 {
        self.0.get()
    }

    pub fn inverse(self) -> Letter {
        Letter(NonZeroI32::new(-self.0.get()).expect("negation of nonzero is nonzero"))
    }

    /// Total order used by every deterministic convention in the crate:
    /// generator 1, its inverse, generator 2, its inverse, ...
    pub fn scan_rank(self) -> usize {
        2 * (self.index() - 1) + usize::from(!self.is_positive())
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.get())
    }
}

/// A freely reduced word; the universal carrier of group elements.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    /// The identity element.
    pub fn identity() -> Word {
        Word { letters: Vec::new() }
    }

    /// The `index`-th generator as a one-letter word.
    pub fn gen(index: usize) -> Word {
        Word { letters: vec![Letter::gen(index)] }
    }

    /// Freely reduces an arbitrary letter sequence.
    pub fn reduce<I: IntoIterator<Item = Letter>>(letters: I) -> Word {
        let mut out: Vec<Letter> = Vec::new();
        for l in letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { letters: out }
    }

    /// Builds a word from signed indices, e.g. `[1, -2]` = g1 · g2⁻¹.
    pub fn from_signed(letters: &[i32]) -> Word {
        Word::reduce(letters.iter().map(|&v| Letter::from_signed(v).expect("nonzero letter")))
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

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// Largest generator index appearing in the word (0 for the identity).
    pub fn max_index(&self) -> usize {
        self.letters.iter().map(|l| l.index()).max().unwrap_or(0)
    }

    /// Reduced product `self · other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut out = self.letters.clone();
        for &l in &other.letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { letters: out }
    }

    /// Reduced product of several words.
    pub fn concat_all<'a, I: IntoIterator<Item = &'a Word>>(words: I) -> Word {
        let mut acc = Word::identity();
        for w in words {
            acc = acc.concat(w);
        }
        acc
    }

    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| l.inverse()).collect() }
    }

    /// `by · self · by⁻¹`.
    pub fn conjugated_by(&self, by: &Word) -> Word {
        by.concat(self).concat(&by.inverse())
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..n.unsigned_abs() {
            out = out.concat(&base);
        }
        out
    }

    /// Splits `self = conjugator · core · conjugator⁻¹` with `core`
    /// cyclically reduced. Returns `(core, conjugator)`.
    pub fn cyclically_reduced(&self) -> (Word, Word) {
        let mut lo = 0usize;
        let mut hi = self.letters.len();
        while hi - lo >= 2 && self.letters[lo] == self.letters[hi - 1].inverse() {
            lo += 1;
            hi -= 1;
        }
        let core = Word { letters: self.letters[lo..hi].to_vec() };
        let conjugator = Word { letters: self.letters[..lo].to_vec() };
        (core, conjugator)
    }

    /// Signed exponent sums per generator, for generators `1..=rank`.
    pub fn exponent_vector(&self, rank: usize) -> Result<Vec<i64>> {
        let mut out = vec![0i64; rank];
        for l in &self.letters {
            if l.index() > rank {
                return Err(Error::GeneratorOutOfRange { index: l.index(), rank });
            }
            out[l.index() - 1] += l.sign();
        }
        Ok(out)
    }

    /// Total signed exponent of one generator.
    pub fn exponent_of(&self, index: usize) -> i64 {
        self.letters.iter().filter(|l| l.index() == index).map(|l| l.sign()).sum()
    }

    /// Shortlex comparison under [`Letter::scan_rank`].
    pub fn shortlex_key(&self) -> (usize, Vec<usize>) {
        (self.letters.len(), self.letters.iter().map(|l| l.scan_rank()).collect())
    }

    /// Substitutes `images[i - 1]` for generator `i` homomorphically.
    pub fn substitute(&self, images: &[Word]) -> Result<Word> {
        let mut out = Word::identity();
        for l in &self.letters {
            let img = images
                .get(l.index() - 1)
                .ok_or(Error::GeneratorOutOfRange { index: l.index(), rank: images.len() })?;
            if l.is_positive() {
                out = out.concat(img);
            } else {
                out = out.concat(&img.inverse());
            }
        }
        Ok(out)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "ε");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{:?}", l)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(letters: &[i32]) -> Word {
        Word::from_signed(letters)
    }

    #[test]
    fn reduce_cancels_adjacent_inverses() {
        assert_eq!(w(&[1, -1]), Word::identity());
        assert_eq!(w(&[2, 1, -1, 2]), w(&[2, 2]));
    }

    #[test]
    fn reduce_is_idempotent_on_reduced_input() {
        let u = w(&[2, 1, 1, -2]);
        assert_eq!(Word::reduce(u.letters().to_vec()), u);
    }

    #[test]
    fn concat_reduces_at_seam() {
        // (ab)·(b⁻¹a) = a²
        assert_eq!(w(&[1, 2]).concat(&w(&[-2, 1])), w(&[1, 1]));
        let u = w(&[1, 2, -1]);
        assert_eq!(u.concat(&Word::identity()), u);
        assert_eq!(u.concat(&u.inverse()), Word::identity());
    }

    #[test]
    fn invert_reverses_and_flips() {
        assert_eq!(w(&[1, 2]).inverse(), w(&[-2, -1]));
        assert_eq!(Word::identity().inverse(), Word::identity());
        let u = w(&[1, -2, 1, 1]);
        assert_eq!(u.inverse().inverse(), u);
    }

    #[test]
    fn cyclic_reduction_splits_conjugator() {
        // b a b⁻¹ → core a, conjugator b
        let (core, conj) = w(&[2, 1, -2]).cyclically_reduced();
        assert_eq!(core, w(&[1]));
        assert_eq!(conj, w(&[2]));

        let (core, conj) = w(&[1, 1]).cyclically_reduced();
        assert_eq!(core, w(&[1, 1]));
        assert_eq!(conj, Word::identity());

        let (core, conj) = Word::identity().cyclically_reduced();
        assert_eq!(core, Word::identity());
        assert_eq!(conj, Word::identity());

        let u = w(&[2, -1, 2, 2, 1, -2]);
        let (core, conj) = u.cyclically_reduced();
        assert_eq!(core.conjugated_by(&conj), u);
        let first = core.letters().first().copied();
        let last = core.letters().last().copied().map(Letter::inverse);
        assert!(core.is_empty() || first != last);
    }

    #[test]
    fn exponent_vectors() {
        assert_eq!(w(&[2, 1, -2]).exponent_vector(2).unwrap(), vec![1, 0]);
        assert_eq!(w(&[1, 2, 2]).exponent_vector(2).unwrap(), vec![1, 2]);
        assert_eq!(Word::identity().exponent_vector(2).unwrap(), vec![0, 0]);
        assert!(w(&[3]).exponent_vector(2).is_err());
    }

    #[test]
    fn exponent_vector_is_a_homomorphism() {
        let u = w(&[1, 2, -1]);
        let v = w(&[1, 1, 2]);
        let sum: Vec<i64> = u
            .exponent_vector(2)
            .unwrap()
            .iter()
            .zip(v.exponent_vector(2).unwrap())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(u.concat(&v).exponent_vector(2).unwrap(), sum);
    }
}
