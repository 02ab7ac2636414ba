//! Endomorphisms and certified automorphisms of free groups.
//!
//! An [`Endomorphism`] stores one image word per generator. An
//! [`Automorphism`] pairs an endomorphism with a certified inverse; the
//! constructor checks both compositions on every generator, so an
//! `Automorphism` value is proof that the map is invertible.
//!
//! Certification works in two stages: a fold of the images decides
//! surjectivity (the images generate iff their folded graph is the rose),
//! and Nielsen reduction with expression tracking produces the inverse.
//! Each Nielsen move on the image tuple is mirrored on a tuple of formal
//! expressions, so when the images reach the standard basis the expressions
//! spell out the inverse images.

use crate::stallings::SubgroupGraph;
use crate::words::Word;
use crate::zmat::IntMatrix;
use crate::{Error, Result};

/// Map of a free group into itself, given on generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Endomorphism {
    rank: usize,
    images: Vec<Word>,
}

impl Endomorphism {
    pub fn new(rank: usize, images: Vec<Word>) -> Result<Endomorphism> {
        if images.len() != rank {
            return Err(Error::RankMismatch { left: images.len(), right: rank });
        }
        for w in &images {
            if w.max_index() > rank {
                return Err(Error::GeneratorOutOfRange { index: w.max_index(), rank });
            }
        }
        Ok(Endomorphism { rank, images })
    }

    pub fn identity(rank: usize) -> Endomorphism {
        Endomorphism { rank, images: (1..=rank).map(Word::gen).collect() }
    }

    /// Conjugation `x ↦ g·x·g⁻¹`.
    pub fn conjugation(rank: usize, g: &Word) -> Result<Endomorphism> {
        let images = (1..=rank).map(|i| Word::gen(i).conjugated_by(g)).collect();
        Endomorphism::new(rank, images)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn image_of_gen(&self, index: usize) -> &Word {
        &self.images[index - 1]
    }

    /// Homomorphic image of a word.
    pub fn apply(&self, w: &Word) -> Result<Word> {
        w.substitute(&self.images)
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Endomorphism) -> Result<Endomorphism> {
        if self.rank != other.rank {
            return Err(Error::RankMismatch { left: self.rank, right: other.rank });
        }
        let images: Result<Vec<Word>> = other.images.iter().map(|w| self.apply(w)).collect();
        Endomorphism::new(self.rank, images?)
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, w)| *w == Word::gen(i + 1))
    }

    /// Matrix of the induced map on the abelianization; column `j` is the
    /// exponent vector of the image of generator `j+1`.
    pub fn abelianized(&self) -> IntMatrix {
        let cols: Vec<Vec<i64>> = self
            .images
            .iter()
            .map(|w| w.exponent_vector(self.rank).expect("images validated at construction"))
            .collect();
        IntMatrix::from_columns(self.rank, &cols)
    }
}

/// An endomorphism with a certified two-sided inverse.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Automorphism {
    forward: Endomorphism,
    inverse: Endomorphism,
}

impl Automorphism {
    /// Pairs a map with its claimed inverse, checking both compositions on
    /// every generator.
    pub fn new(forward: Endomorphism, inverse: Endomorphism) -> Result<Automorphism> {
        if forward.rank != inverse.rank {
            return Err(Error::RankMismatch { left: forward.rank, right: inverse.rank });
        }
        for dir in [(&forward, &inverse), (&inverse, &forward)] {
            for i in 1..=forward.rank {
                if dir.0.apply(dir.1.image_of_gen(i))? != Word::gen(i) {
                    return Err(Error::NotSurjective);
                }
            }
        }
        Ok(Automorphism { forward, inverse })
    }

    pub fn identity(rank: usize) -> Automorphism {
        let id = Endomorphism::identity(rank);
        Automorphism { forward: id.clone(), inverse: id }
    }

    pub fn rank(&self) -> usize {
        self.forward.rank
    }

    pub fn forward(&self) -> &Endomorphism {
        &self.forward
    }

    pub fn inverse_map(&self) -> &Endomorphism {
        &self.inverse
    }

    pub fn apply(&self, w: &Word) -> Result<Word> {
        self.forward.apply(w)
    }

    pub fn inverted(&self) -> Automorphism {
        Automorphism { forward: self.inverse.clone(), inverse: self.forward.clone() }
    }

    pub fn compose(&self, other: &Automorphism) -> Result<Automorphism> {
        Ok(Automorphism {
            forward: self.forward.compose(&other.forward)?,
            inverse: other.inverse.compose(&self.inverse)?,
        })
    }

    pub fn abelianized(&self) -> IntMatrix {
        self.forward.abelianized()
    }

    pub fn is_identity(&self) -> bool {
        self.forward.is_identity()
    }

    /// Composite automorphism of a word in the letters of `autos`:
    /// `word_action([φ₁, φ₂], t₁t₂)` is `φ₁ ∘ φ₂`.
    pub fn word_action(autos: &[Automorphism], w: &Word) -> Result<Automorphism> {
        let rank = autos.first().map_or(0, Automorphism::rank);
        let mut acc = Automorphism::identity(rank);
        for &l in w.letters() {
            let a = autos
                .get(l.index() - 1)
                .ok_or(Error::GeneratorOutOfRange { index: l.index(), rank: autos.len() })?;
            let step = if l.is_positive() { a.clone() } else { a.inverted() };
            acc = acc.compose(&step)?;
        }
        Ok(acc)
    }
}

/// Certifies that an endomorphism is an automorphism and computes its
/// inverse. Fails with [`Error::NotSurjective`] when the images generate a
/// proper subgroup.
pub fn certify_automorphism(f: &Endomorphism) -> Result<Automorphism> {
    let folded = SubgroupGraph::fold(&f.images, f.rank)?;
    if folded != SubgroupGraph::whole_group(f.rank) {
        return Err(Error::NotSurjective);
    }
    let inverse = invert_by_nielsen(f)?;
    Automorphism::new(f.clone(), inverse)
}

/// Nielsen reduction with expression tracking. Invariant: substituting the
/// original images into `expr[i]` yields `tuple[i]`. When the tuple reaches
/// the standard basis, the expressions are the inverse images.
fn invert_by_nielsen(f: &Endomorphism) -> Result<Endomorphism> {
    let rank = f.rank;
    let mut tuple: Vec<Word> = f.images.clone();
    let mut expr: Vec<Word> = (1..=rank).map(Word::gen).collect();

    loop {
        let mut applied = false;

        // Inversion when the inverse is shortlex-smaller.
        for i in 0..rank {
            let inv = tuple[i].inverse();
            if inv.shortlex_key() < tuple[i].shortlex_key() {
                tuple[i] = inv;
                expr[i] = expr[i].inverse();
                applied = true;
            }
        }

        // One-sided multiplications; strictly shorter always wins, equal
        // length wins on shortlex to drain half-cancellation plateaus.
        'scan: for i in 0..rank {
            for j in 0..rank {
                if i == j || tuple[j].is_empty() {
                    continue;
                }
                for right in [true, false] {
                    for inverse in [false, true] {
                        let factor = if inverse { tuple[j].inverse() } else { tuple[j].clone() };
                        let cand = if right { tuple[i].concat(&factor) } else { factor.concat(&tuple[i]) };
                        if cand.shortlex_key() < tuple[i].shortlex_key() {
                            let e = if inverse { expr[j].inverse() } else { expr[j].clone() };
                            expr[i] = if right { expr[i].concat(&e) } else { e.concat(&expr[i]) };
                            tuple[i] = cand;
                            applied = true;
                            break 'scan;
                        }
                    }
                }
            }
        }

        if !applied {
            break;
        }
    }

    // A reduced tuple generating the whole group must be the standard basis
    // up to permutation (surjectivity was already checked by folding).
    let mut inverse_images: Vec<Option<Word>> = vec![None; rank];
    for (i, t) in tuple.iter().enumerate() {
        let [l] = t.letters() else {
            return Err(Error::NotSurjective);
        };
        let idx = l.index();
        if inverse_images[idx - 1].is_some() {
            return Err(Error::NotSurjective);
        }
        let e = if l.is_positive() { expr[i].clone() } else { expr[i].inverse() };
        inverse_images[idx - 1] = Some(e);
    }
    let images: Option<Vec<Word>> = inverse_images.into_iter().collect();
    Endomorphism::new(rank, images.ok_or(Error::NotSurjective)?)
}

/// Searches for a conjugator witnessing that `f` is inner. The candidate is
/// pinned down exactly: the first generator forces `g ∈ c₁·⟨x₁⟩` via cyclic
/// reduction, the second generator fixes the power, and the result is
/// verified on all generators. Complete for rank ≥ 2; for rank 1 only the
/// identity is inner.
pub fn is_inner(f: &Automorphism) -> Option<Word> {
    let rank = f.rank();
    if rank == 0 {
        return Some(Word::identity());
    }
    if rank == 1 {
        return f.is_identity().then(Word::identity);
    }
    let x1 = Word::gen(1);
    let (core, c1) = f.forward.image_of_gen(1).cyclically_reduced();
    if core != x1 {
        return None;
    }
    // f(x₂) must equal c₁ · x₁ⁿ x₂ x₁⁻ⁿ · c₁⁻¹ for the same n as g = c₁·x₁ⁿ.
    let u = c1.inverse().concat(f.forward.image_of_gen(2)).concat(&c1);
    let mut n: i64 = 0;
    let mut stripped = u;
    loop {
        let letters = stripped.letters();
        let (Some(first), Some(last)) = (letters.first(), letters.last()) else { break };
        if first.index() == 1 && *last == first.inverse() && letters.len() >= 2 {
            n += first.sign();
            stripped = Word::reduce(letters[1..letters.len() - 1].to_vec());
        } else {
            break;
        }
    }
    if stripped != Word::gen(2) {
        return None;
    }
    let g = c1.concat(&Word::gen(1).pow(n));
    for i in 1..=rank {
        if *f.forward.image_of_gen(i) != Word::gen(i).conjugated_by(&g) {
            return None;
        }
    }
    Some(g)
}

/// A subgroup together with a chosen ordered basis.
///
/// The graph's own breadth-first basis is the default; an explicit basis
/// reorders or rewrites it so that downstream matrices come out in the
/// caller's preferred coordinates. The change of basis is certified once at
/// construction.
#[derive(Clone, Debug)]
pub struct BasedSubgroup {
    graph: SubgroupGraph,
    basis: Vec<Word>,
    /// Automorphism of the abstract free group F_rank sending the letter
    /// for `basis[i]` to the rewrite of `basis[i]` over the graph basis.
    change: Automorphism,
}

impl BasedSubgroup {
    /// The graph's own deterministic basis.
    pub fn canonical(graph: SubgroupGraph) -> BasedSubgroup {
        let basis = graph.basis();
        let change = Automorphism::identity(basis.len());
        BasedSubgroup { graph, basis, change }
    }

    /// An explicit basis, given as words in the ambient group. The words
    /// must generate the same subgroup and be exactly `rank` many.
    pub fn with_basis(graph: SubgroupGraph, basis: Vec<Word>) -> Result<BasedSubgroup> {
        let refold = SubgroupGraph::fold(&basis, graph.ambient_rank())?;
        if refold != graph || basis.len() != graph.rank() {
            return Err(Error::NotABasis);
        }
        let images: Result<Vec<Word>> = basis.iter().map(|b| graph.rewrite(b)).collect();
        let forward = Endomorphism::new(graph.rank(), images?)?;
        let change = certify_automorphism(&forward).map_err(|_| Error::NotABasis)?;
        Ok(BasedSubgroup { graph, basis, change })
    }

    pub fn graph(&self) -> &SubgroupGraph {
        &self.graph
    }

    pub fn basis(&self) -> &[Word] {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Rewrites an ambient word over this basis.
    pub fn rewrite(&self, w: &Word) -> Result<Word> {
        let over_graph_basis = self.graph.rewrite(w)?;
        self.change.inverse_map().apply(&over_graph_basis)
    }

    /// Expands a word over this basis back into the ambient group.
    pub fn expand(&self, w: &Word) -> Result<Word> {
        w.substitute(&self.basis)
    }
}

/// Restriction of an ambient automorphism to a preserved subgroup, expressed
/// over the subgroup's basis alphabet. Errors with [`Error::NotPreserved`]
/// when the image subgroup differs.
pub fn restrict(f: &Automorphism, sub: &BasedSubgroup) -> Result<Automorphism> {
    if sub.graph().image(f.forward().images())? != *sub.graph() {
        return Err(Error::NotPreserved);
    }
    let mut fwd = Vec::with_capacity(sub.rank());
    let mut inv = Vec::with_capacity(sub.rank());
    for b in sub.basis() {
        fwd.push(sub.rewrite(&f.apply(b)?)?);
        inv.push(sub.rewrite(&f.inverse_map().apply(b)?)?);
    }
    Automorphism::new(Endomorphism::new(sub.rank(), fwd)?, Endomorphism::new(sub.rank(), inv)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(letters: &[i32]) -> Word {
        Word::from_signed(letters)
    }

    fn endo(rank: usize, images: &[&[i32]]) -> Endomorphism {
        Endomorphism::new(rank, images.iter().map(|i| w(i)).collect()).unwrap()
    }

    fn lam() -> Endomorphism {
        endo(2, &[&[1, 2], &[2]]) // a ↦ ab, b ↦ b
    }

    fn rho() -> Endomorphism {
        endo(2, &[&[1], &[2, 1]]) // a ↦ a, b ↦ ba
    }

    #[test]
    fn compose_examples() {
        let ll = lam().compose(&lam()).unwrap();
        assert_eq!(ll.images(), &[w(&[1, 2, 2]), w(&[2])]);

        let id = Endomorphism::identity(2);
        assert_eq!(lam().compose(&id).unwrap(), lam());

        let lam_inv = endo(2, &[&[1, -2], &[2]]);
        assert!(lam().compose(&lam_inv).unwrap().is_identity());
    }

    #[test]
    fn certification() {
        let a = certify_automorphism(&lam()).unwrap();
        assert_eq!(a.inverse_map().images(), &[w(&[1, -2]), w(&[2])]);

        let id = certify_automorphism(&Endomorphism::identity(3)).unwrap();
        assert!(id.is_identity());

        let bad = endo(2, &[&[1, 1], &[2]]);
        assert_eq!(certify_automorphism(&bad).unwrap_err(), Error::NotSurjective);
    }

    #[test]
    fn certification_of_longer_words() {
        // Inner automorphisms and products of Nielsen moves certify too.
        let conj = Endomorphism::conjugation(2, &w(&[1, 2])).unwrap();
        let a = certify_automorphism(&conj).unwrap();
        assert!(a.compose(&a.inverted()).unwrap().is_identity());

        let f = lam().compose(&rho()).unwrap().compose(&lam()).unwrap();
        let c = certify_automorphism(&f).unwrap();
        assert!(c.compose(&c.inverted()).unwrap().is_identity());
    }

    #[test]
    fn abelianized_matrices() {
        let m = lam().abelianized();
        assert_eq!(m.column(0), vec![1.into(), 1.into()]);
        assert_eq!(m.column(1), vec![0.into(), 1.into()]);
        assert!(Endomorphism::identity(4).abelianized().is_identity());
    }

    #[test]
    fn abelianized_is_functorial() {
        let f = lam();
        let g = rho();
        let fg = f.compose(&g).unwrap();
        assert_eq!(fg.abelianized(), f.abelianized().mul(&g.abelianized()));
    }

    #[test]
    fn inner_detection() {
        let by_b = certify_automorphism(&Endomorphism::conjugation(2, &w(&[2])).unwrap()).unwrap();
        assert_eq!(is_inner(&by_b), Some(w(&[2])));

        let by_ab = certify_automorphism(&Endomorphism::conjugation(2, &w(&[1, 2])).unwrap()).unwrap();
        assert_eq!(is_inner(&by_ab), Some(w(&[1, 2])));

        let l = certify_automorphism(&lam()).unwrap();
        assert_eq!(is_inner(&l), None);

        assert_eq!(is_inner(&Automorphism::identity(2)), Some(Word::identity()));
    }

    #[test]
    fn inner_recovers_random_conjugators() {
        for g in [w(&[1]), w(&[2, 1]), w(&[1, 1, 2]), w(&[2, -1, 2]), w(&[-1, -2, -1])] {
            let f = certify_automorphism(&Endomorphism::conjugation(2, &g).unwrap()).unwrap();
            let found = is_inner(&f).expect("conjugation is inner");
            for i in 1..=2 {
                assert_eq!(Word::gen(i).conjugated_by(&found), *f.forward().image_of_gen(i));
            }
        }
    }

    #[test]
    fn restriction_to_preserved_subgroup() {
        // H = ⟨x, y, z⟩ = ⟨a, b², bab⁻¹⟩ with explicit basis order (x, y, z).
        let h = SubgroupGraph::fold(&[w(&[1]), w(&[2, 2]), w(&[2, 1, -2])], 2).unwrap();
        let based =
            BasedSubgroup::with_basis(h, vec![w(&[1]), w(&[2, 2]), w(&[2, 1, -2])]).unwrap();

        let lam2 = certify_automorphism(&lam().compose(&lam()).unwrap()).unwrap();
        let r = restrict(&lam2, &based).unwrap();
        // x ↦ xy, y ↦ y, z ↦ zy
        assert_eq!(r.forward().images(), &[w(&[1, 2]), w(&[2]), w(&[3, 2])]);
        let m = r.abelianized();
        assert_eq!(m.row(0), vec![1.into(), 0.into(), 0.into()]);
        assert_eq!(m.row(1), vec![1.into(), 1.into(), 1.into()]);
        assert_eq!(m.row(2), vec![0.into(), 0.into(), 1.into()]);

        let rho_a = certify_automorphism(&rho()).unwrap();
        let r = restrict(&rho_a, &based).unwrap();
        // x ↦ x, y ↦ zyx, z ↦ z
        assert_eq!(r.forward().images(), &[w(&[1]), w(&[3, 2, 1]), w(&[3])]);

        let id = Automorphism::identity(2);
        assert!(restrict(&id, &based).unwrap().is_identity());

        // λ itself moves H.
        let l = certify_automorphism(&lam()).unwrap();
        assert_eq!(restrict(&l, &based).unwrap_err(), Error::NotPreserved);
    }

    #[test]
    fn based_subgroup_rejects_non_bases() {
        let h = SubgroupGraph::fold(&[w(&[1]), w(&[2, 2]), w(&[2, 1, -2])], 2).unwrap();
        assert!(BasedSubgroup::with_basis(h.clone(), vec![w(&[1]), w(&[2, 2])]).is_err());
        assert!(BasedSubgroup::with_basis(h, vec![w(&[1]), w(&[2]), w(&[2, 1, -2])]).is_err());
    }

    #[test]
    fn word_action_composes_left_to_right() {
        let l = certify_automorphism(&lam()).unwrap();
        let r = certify_automorphism(&rho()).unwrap();
        let both = Automorphism::word_action(&[l.clone(), r.clone()], &w(&[1, 2])).unwrap();
        assert_eq!(both.forward().images(), l.compose(&r).unwrap().forward().images());

        let trivial = Automorphism::word_action(&[l.clone(), l.inverted()], &w(&[1, 2])).unwrap();
        assert!(trivial.is_identity());
    }
}
