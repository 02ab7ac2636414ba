//! The homological decision layer.
//!
//! For `G = H ⋊ F_k`, the first Betti number is `k` plus the rank of the
//! coinvariants of `H₁(H)` under the actions. Having a character that is
//! nontrivial on the fiber — *excessive homology* — forces an algebraic
//! fibering, and forces incoherence whenever the fiber itself does not
//! fiber and `k ≥ 2`. This module computes those characters, assembles the
//! corresponding certificates, and knows three incoherence routes:
//!
//! * **R1** — excessive homology plus a non-fibering fiber;
//! * **R2** — a nontrivial base word acting by an inner automorphism, which
//!   spans a copy of `F₂ × F₂`;
//! * **R3** — a finite-index subgroup found by [`crate::search`] that has
//!   excessive homology of its own.
//!
//! Certificates embed everything needed to recompute their verdict; see
//! [`Certificate::replay`].

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::endos::{is_inner, restrict, Automorphism, BasedSubgroup};
use crate::fpgroups::{Actions, ExtensionSpec, Fiber, NonfiberingEvidence};
use crate::stallings::SubgroupGraph;
use crate::words::Word;
use crate::zmat::{AbelianGroupShape, IntMatrix};
use crate::{search, Error, Result};

/// A rational character of the extension, split into fiber and base values.
/// Characters vanish on every relator of the semidirect presentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Character {
    fiber: Vec<BigRational>,
    base: Vec<BigRational>,
}

impl Character {
    pub fn new(fiber: Vec<BigRational>, base: Vec<BigRational>) -> Character {
        Character { fiber, base }
    }

    pub fn from_integers(fiber: Vec<BigInt>, base_len: usize) -> Character {
        Character {
            fiber: fiber.into_iter().map(BigRational::from_integer).collect(),
            base: vec![BigRational::zero(); base_len],
        }
    }

    pub fn fiber_values(&self) -> &[BigRational] {
        &self.fiber
    }

    pub fn base_values(&self) -> &[BigRational] {
        &self.base
    }

    pub fn fiber_is_zero(&self) -> bool {
        self.fiber.iter().all(Zero::is_zero)
    }

    /// Does the fiber part annihilate every column of the fiber-block
    /// relation matrix? Base values never enter: conjugation relators have
    /// zero base exponent and fiber relators carry no base letters.
    pub fn kills_relations(&self, stacked: &IntMatrix) -> bool {
        if stacked.rows() != self.fiber.len() {
            return false;
        }
        (0..stacked.cols()).all(|j| {
            let mut acc = BigRational::zero();
            for i in 0..stacked.rows() {
                acc += &self.fiber[i] * BigRational::from_integer(stacked.get(i, j).clone());
            }
            acc.is_zero()
        })
    }

    /// Is the fiber part a primitive integer vector?
    pub fn fiber_is_primitive(&self) -> bool {
        let mut gcd = BigInt::zero();
        for v in &self.fiber {
            if !v.denom().is_one() {
                return false;
            }
            gcd = gcd.gcd(v.numer());
        }
        gcd.is_one()
    }
}

/// Basis of characters witnessing excessive homology: fiber parts span the
/// left annihilator of the stacked relation matrix, base parts vanish.
/// Empty iff the extension is not excessive.
pub fn excessive_characters(e: &ExtensionSpec) -> Vec<Character> {
    let ann = e.stacked_relations().left_annihilator();
    ann.into_iter().map(|row| Character::from_integers(row, e.base_rank())).collect()
}

/// Is the first Betti number at least `base_rank + 1`?
pub fn is_excessive(e: &ExtensionSpec) -> bool {
    !excessive_characters(e).is_empty()
}

/// Zeroes the base values and scales the fiber part to a primitive integer
/// vector (positive scaling only), so the character restricts to a
/// surjection of the fiber onto Z.
pub fn normalize(e: &ExtensionSpec, chi: &Character) -> Result<Character> {
    if chi.fiber_is_zero() {
        return Err(Error::ZeroFiberPart);
    }
    let mut lcm = BigInt::one();
    for v in &chi.fiber {
        lcm = lcm.lcm(v.denom());
    }
    let ints: Vec<BigInt> = chi.fiber.iter().map(|v| (v * BigRational::from_integer(lcm.clone())).to_integer()).collect();
    let mut gcd = BigInt::zero();
    for v in &ints {
        gcd = gcd.gcd(v);
    }
    let prim: Vec<BigInt> = ints.iter().map(|v| v / &gcd).collect();
    Ok(Character::from_integers(prim, e.base_rank()))
}

/// One kernel description per base generator: the fibering recipe
/// `βᵢ = αᵢ + (1/r)·γ` with `r` left as a symbolic positive integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelPiece {
    /// 1-based base generator index `i`.
    pub base_index: usize,
    /// Nonzero fiber offsets `(generator j, γ(aⱼ))`: the kernel of `βᵢ`
    /// contains the elements `aⱼ · tᵢ^{-r·γ(aⱼ)}`-shaped combinations.
    pub fiber_offsets: Vec<(usize, BigRational)>,
}

/// Constructive fibering plan. The scale `r` stays symbolic: openness of
/// the relevant invariant guarantees some finite `r` works, but no bound is
/// claimed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FibrationPlan {
    pub character: Character,
    pub pieces: Vec<KernelPiece>,
    pub non_effective: bool,
}

/// The fibering recipe for a normalized excessive character: the kernel
/// subgroup `N = ⟨ ker β₁ ∪ … ∪ ker β_k ⟩` is normal with infinite cyclic
/// quotient.
pub fn fibration_plan(e: &ExtensionSpec, gamma: &Character) -> Result<FibrationPlan> {
    if !is_excessive(e) {
        return Err(Error::NotExcessive);
    }
    if gamma.fiber_is_zero() {
        return Err(Error::ZeroFiberPart);
    }
    if !gamma.base_values().iter().all(Zero::is_zero)
        || !gamma.fiber_is_primitive()
        || !gamma.kills_relations(&e.stacked_relations())
    {
        return Err(Error::HypothesisViolated("fibration plans need a normalized character"));
    }
    let pieces = (1..=e.base_rank())
        .map(|i| KernelPiece {
            base_index: i,
            fiber_offsets: gamma
                .fiber_values()
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(j, v)| (j + 1, v.clone()))
                .collect(),
        })
        .collect();
    Ok(FibrationPlan { character: gamma.clone(), pieces, non_effective: true })
}

/// Witness that some nontrivial base word acts by an inner automorphism:
/// together with a non-commuting conjugate this spans a copy of `F₂ × F₂`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InnerPairWitness {
    /// Nontrivial base word acting innerly.
    pub word: Word,
    /// Fiber conjugator: the action of `word` is `x ↦ g·x·g⁻¹`.
    pub conjugator: Word,
    /// A conjugate `u·word·u⁻¹` not commuting with `word`.
    pub second_word: Word,
    pub second_conjugator: Word,
}

/// Searches base words of length ≤ `l_max` for a nontrivial word acting by
/// an inner automorphism of the free fiber. Absence up to the bound is
/// reported as `None`, never as a negative certificate.
pub fn outer_kernel_probe(e: &ExtensionSpec, l_max: usize) -> Result<Option<InnerPairWitness>> {
    let Fiber::Free { rank } = e.fiber() else {
        return Err(Error::AbelianizedOnlyFiber);
    };
    if *rank < 2 {
        return Err(Error::HypothesisViolated("inner-pair probe needs fiber rank at least two"));
    }
    let autos = e.certified_actions()?;
    let k = e.base_rank();
    for w in reduced_words(k, l_max) {
        let phi = Automorphism::word_action(autos, &w)?;
        let Some(g) = is_inner(&phi) else { continue };
        // A conjugate of w that does not commute with w; short conjugators
        // suffice since the centralizer of w is cyclic.
        let mut pair = None;
        'outer: for len in 1..=2 {
            for u in reduced_words(k, len) {
                if u.len() != len {
                    continue;
                }
                let t = w.conjugated_by(&u);
                if w.concat(&t) != t.concat(&w) {
                    pair = Some(t);
                    break 'outer;
                }
            }
        }
        let Some(t) = pair else { continue };
        let phi_t = Automorphism::word_action(autos, &t)?;
        let g_t = is_inner(&phi_t)
            .ok_or(Error::HypothesisViolated("conjugate of an inner action must be inner"))?;
        return Ok(Some(InnerPairWitness {
            word: w,
            conjugator: g,
            second_word: t,
            second_conjugator: g_t,
        }));
    }
    Ok(None)
}

/// All nontrivial reduced words of length ≤ `l_max` in rank `k`, shortest
/// first, deterministic order.
fn reduced_words(k: usize, l_max: usize) -> Vec<Word> {
    let mut out: Vec<Word> = Vec::new();
    let mut layer: Vec<Word> = vec![Word::identity()];
    for _ in 0..l_max {
        let mut next = Vec::new();
        for w in &layer {
            for g in 1..=k {
                for positive in [true, false] {
                    let l = if positive {
                        crate::words::Letter::gen(g)
                    } else {
                        crate::words::Letter::inv_gen(g)
                    };
                    if w.letters().last() == Some(&l.inverse()) {
                        continue;
                    }
                    let mut letters = w.letters().to_vec();
                    letters.push(l);
                    next.push(Word::reduce(letters));
                }
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Lifts a fibering character of the quotient data back to the group:
/// values are copied on the fiber and transported through the chosen
/// quotient generators. Pure character arithmetic; the quotient-rank
/// hypothesis is taken as an input assertion.
pub fn strong_fiber_lift(
    h1_q_rank: usize,
    y_values: &[BigRational],
    fiber_character: &[BigRational],
) -> Result<Character> {
    if h1_q_rank != y_values.len() {
        return Err(Error::HypothesisViolated(
            "quotient first-cohomology rank must equal the number of chosen generators",
        ));
    }
    Ok(Character::new(fiber_character.to_vec(), y_values.to_vec()))
}

/// Outcome of the rank-one sign descent.
#[derive(Clone, Debug)]
pub enum DescentOutcome {
    /// Every action fixes the rank-one free part; the extension itself is
    /// already excessive.
    AlreadyInvariant,
    /// Index-two base subgroup on which all induced signs are positive.
    Descended { spec: ExtensionSpec, signs: Vec<i8>, base_words: Vec<Word> },
}

/// For a fiber with first cohomology of free rank one, each action acts on
/// the free part by a sign. If some sign is negative, pass to the sign
/// kernel of the base: an index-two subgroup of rank `2k − 1` whose induced
/// actions all fix the free part, hence an excessive subgroup.
pub fn rank_one_descent(e: &ExtensionSpec) -> Result<DescentOutcome> {
    if e.fiber_h1_free_rank() != 1 {
        return Err(Error::NotRankOne);
    }
    let signs = rank_one_signs(e)?;
    if signs.iter().all(|&s| s == 1) {
        return Ok(DescentOutcome::AlreadyInvariant);
    }
    let base_words = sign_kernel_generators(&signs);
    let spec = compose_along(e, &base_words)?;
    Ok(DescentOutcome::Descended { spec, signs, base_words })
}

/// Sign of each action on the rank-one free part of `H₁(fiber)`.
pub fn rank_one_signs(e: &ExtensionSpec) -> Result<Vec<i8>> {
    if e.fiber_h1_free_rank() != 1 {
        return Err(Error::NotRankOne);
    }
    let to_sign = |v: &BigInt| -> Result<i8> {
        if v.abs().is_one() {
            Ok(if v.is_negative() { -1 } else { 1 })
        } else {
            Err(Error::InvalidRankOneAction)
        }
    };
    match e.fiber() {
        Fiber::Free { .. } | Fiber::AbelianizedOnly { .. } => {
            e.action_matrices().iter().map(|m| to_sign(m.get(0, 0))).collect()
        }
        Fiber::Presented(p) => {
            // Free part of Z^n / R sits in the zero rows of the Smith form;
            // transport each action matrix there.
            let r = p.relator_matrix();
            let snf = r.snf();
            let n = r.rows();
            let u_inv = snf
                .u
                .inverse_unimodular()
                .ok_or(Error::HypothesisViolated("smith transform must be unimodular"))?;
            let row = n - 1;
            e.action_matrices()
                .iter()
                .map(|m| {
                    let mut acc = BigInt::zero();
                    for a in 0..n {
                        for b in 0..n {
                            acc += snf.u.get(row, a) * m.get(a, b) * u_inv.get(b, row);
                        }
                    }
                    to_sign(&acc)
                })
                .collect()
        }
    }
}

/// A positive-word free basis of the kernel of the sign map `F_k → Z/2`,
/// `tᵢ ↦ signs[i-1]`; rank `2k − 1`. Positive words keep the construction
/// usable for trusted endomorphism data, which has no inverses.
pub fn sign_kernel_generators(signs: &[i8]) -> Vec<Word> {
    let k = signs.len();
    let negatives: Vec<usize> = (1..=k).filter(|&i| signs[i - 1] == -1).collect();
    let i0 = negatives[0];
    let t = Word::gen;
    let mut out: Vec<Word> = Vec::new();
    for j in 1..=k {
        if signs[j - 1] == 1 {
            out.push(t(j));
        }
    }
    out.push(t(i0).concat(&t(i0)));
    for &i in &negatives[1..] {
        out.push(t(i0).concat(&t(i)));
    }
    for &i in &negatives[1..] {
        out.push(t(i).concat(&t(i0)));
    }
    for j in 1..=k {
        if signs[j - 1] == 1 {
            out.push(t(i0).concat(&t(j)).concat(&t(i0)));
        }
    }
    out
}

/// The extension restricted to the base subgroup generated by the given
/// positive base words, with composite actions.
pub fn compose_along(e: &ExtensionSpec, base_words: &[Word]) -> Result<ExtensionSpec> {
    let keep_flags = e.nonfibering();
    let surface = keep_flags == NonfiberingEvidence::SurfaceGenusAtLeastTwo;
    let asserted = keep_flags == NonfiberingEvidence::UserAsserted;
    let actions = match e.actions() {
        Actions::Certified(autos) => Actions::Certified(
            base_words
                .iter()
                .map(|w| Automorphism::word_action(autos, w))
                .collect::<Result<Vec<_>>>()?,
        ),
        Actions::Trusted(endos) => {
            let mut out = Vec::with_capacity(base_words.len());
            for w in base_words {
                let mut acc = crate::endos::Endomorphism::identity(endos[0].rank());
                for l in w.letters() {
                    if !l.is_positive() {
                        return Err(Error::HypothesisViolated(
                            "trusted actions compose along positive words only",
                        ));
                    }
                    acc = acc.compose(&endos[l.index() - 1])?;
                }
                out.push(acc);
            }
            Actions::Trusted(out)
        }
        Actions::Abelianized(mats) => {
            let h1 = e.fiber_h1_free_rank();
            let mut out = Vec::with_capacity(base_words.len());
            for w in base_words {
                let mut acc = IntMatrix::identity(h1);
                for l in w.letters() {
                    if !l.is_positive() {
                        return Err(Error::HypothesisViolated(
                            "abelianized actions compose along positive words only",
                        ));
                    }
                    acc = acc.mul(&mats[l.index() - 1]);
                }
                out.push(acc);
            }
            Actions::Abelianized(out)
        }
    };
    ExtensionSpec::with_flags(e.fiber().clone(), actions, surface, asserted)
}

/// Verdicts a certificate can carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    ExcessiveHomology,
    Incoherent,
    AlgebraicallyFibers,
    VirtuallyExcessive,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ExcessiveHomology => "ExcessiveHomology",
            Verdict::Incoherent => "Incoherent",
            Verdict::AlgebraicallyFibers => "AlgebraicallyFibers",
            Verdict::VirtuallyExcessive => "VirtuallyExcessive",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

/// Which argument produced the verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// R1: excessive homology with a non-fibering fiber.
    DirectExcessive,
    /// R2: inner-acting pair.
    InnerPair,
    /// R3: finite-index subgroup with excessive homology.
    FiniteIndex,
    /// Fibering plan.
    Plan,
    /// Direct Betti-number computation.
    Homology,
    /// No route applied within bounds.
    None,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::DirectExcessive => "R1",
            Route::InnerPair => "R2",
            Route::FiniteIndex => "R3",
            Route::Plan => "plan",
            Route::Homology => "homology",
            Route::None => "none",
        }
    }
}

/// How a finite-index witness subgroup was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    /// The group itself (index one).
    Index1,
    /// Fiber-side orbit/stabilizer search.
    Orbit,
    /// Whole-group low-index enumeration.
    LowIndex,
    /// Rank-one sign descent.
    Descent,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Index1 => "index1",
            StrategyKind::Orbit => "orbit",
            StrategyKind::LowIndex => "lowindex",
            StrategyKind::Descent => "descent",
        }
    }
}

/// Search limits; defaults cover the worked examples in well under a
/// second each.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBounds {
    /// Fiber-subgroup index bound for the orbit strategy.
    pub fiber_index: usize,
    /// Whole-group index bound for the low-index strategy.
    pub group_index: usize,
    /// Orbit size cap.
    pub orbit_cap: usize,
    /// Word-length bound for the inner-pair probe.
    pub probe_length: usize,
    pub strategy: Strategy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Orbit,
    LowIndex,
    Both,
}

impl Default for SearchBounds {
    fn default() -> SearchBounds {
        SearchBounds {
            fiber_index: 4,
            group_index: 6,
            orbit_cap: 64,
            probe_length: 4,
            strategy: Strategy::Both,
        }
    }
}

/// A finite-index subgroup together with its recomputable homology claim.
/// `base_rank` is the rank of the witness subgroup's image in the base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupWitness {
    pub strategy: StrategyKind,
    pub detail: WitnessDetail,
    pub index: usize,
    pub base_rank: usize,
    pub fiber_rank: Option<usize>,
    pub h1: AbelianGroupShape,
    pub character: Character,
}

/// Enough data to rebuild the witness subgroup with the library alone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessDetail {
    /// `K = L ⋊ F_l` inside a free-fiber extension: `fiber_generators`
    /// give `L` inside the fiber, `lifts` generate the complement in the
    /// semidirect presentation's letters (fiber letters first).
    FreeFiber { fiber_generators: Vec<Word>, lifts: Vec<Word> },
    /// Coset action of the semidirect presentation (presented fibers).
    CosetAction { permutations: Vec<Vec<usize>> },
    /// Rank-one sign descent: base subgroup generated by these positive
    /// base words.
    SignKernel { base_words: Vec<Word> },
}

/// Payload backing a verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertificateData {
    ExcessiveHomology { h1: AbelianGroupShape, characters: Vec<Character> },
    DirectIncoherence { character: Character },
    InnerPairIncoherence(InnerPairWitness),
    SubgroupIncoherence(SubgroupWitness),
    VirtuallyExcessive(SubgroupWitness),
    /// A fibering recipe; `plan` is absent exactly when the witness is a
    /// coset action, whose embedded character is the fibering direction.
    Fibering { plan: Option<FibrationPlan>, witness: Option<SubgroupWitness> },
    Inconclusive { bounds: SearchBounds },
}

/// Machine-checkable verdict: every numeric claim is recomputable from the
/// embedded data by [`Certificate::replay`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub verdict: Verdict,
    pub route: Route,
    pub citations: Vec<&'static str>,
    pub group: ExtensionSpec,
    pub data: CertificateData,
    pub assumptions: Vec<String>,
    pub bounds: Option<SearchBounds>,
}

pub mod citations {
    pub const EXTENSION_H1: &str = "extension-first-homology-formula";
    pub const EXCESSIVE_INCOHERENT: &str = "excessive-homology-implies-incoherence";
    pub const EXCESSIVE_FIBERS: &str = "excessive-homology-implies-fibering";
    pub const BNS_OPEN: &str = "openness-of-the-fibered-cone";
    pub const NEUMANN: &str = "amalgam-over-infinitely-generated-subgroup-is-not-finitely-presented";
    pub const INNER_PAIR: &str = "inner-acting-pair-spans-f2xf2";
    pub const VIRTUAL_IFF: &str = "virtual-fibering-iff-virtually-excessive-homology";
    pub const HEREDITY: &str = "incoherence-passes-to-overgroups";
    pub const FINITE_INDEX_HEREDITY: &str = "finite-index-subgroups-inherit-extension-form";
    pub const DESCENT: &str = "rank-one-sign-descent";
    pub const FREE_NONFIBER: &str = "free-groups-of-rank-at-least-two-do-not-fiber";
}

fn nonfibering_assumption(e: &ExtensionSpec) -> Option<String> {
    match e.nonfibering() {
        NonfiberingEvidence::FreeRankAtLeastTwo => {
            Some("fiber-does-not-fiber: free-rank>=2".to_string())
        }
        NonfiberingEvidence::SurfaceGenusAtLeastTwo => {
            Some("fiber-does-not-fiber: surface-genus>=2".to_string())
        }
        NonfiberingEvidence::UserAsserted => {
            Some("fiber-does-not-fiber: user-asserted".to_string())
        }
        NonfiberingEvidence::Unknown => None,
    }
}

/// The direct (no-search) verdict set: homology shape, excessive
/// characters, a fibering plan when excessive, and incoherence via R1 or
/// the R2 probe.
pub fn direct_verdicts(e: &ExtensionSpec, probe_length: usize) -> Result<Vec<Certificate>> {
    let mut out = Vec::new();
    let h1 = e.h1();
    let chars = excessive_characters(e);
    if !chars.is_empty() {
        out.push(Certificate {
            verdict: Verdict::ExcessiveHomology,
            route: Route::Homology,
            citations: vec![citations::EXTENSION_H1],
            group: e.clone(),
            data: CertificateData::ExcessiveHomology { h1: h1.clone(), characters: chars.clone() },
            assumptions: Vec::new(),
            bounds: None,
        });
        let gamma = normalize(e, &chars[0])?;
        let plan = fibration_plan(e, &gamma)?;
        out.push(Certificate {
            verdict: Verdict::AlgebraicallyFibers,
            route: Route::Plan,
            citations: vec![citations::EXCESSIVE_FIBERS, citations::BNS_OPEN],
            group: e.clone(),
            data: CertificateData::Fibering { plan: Some(plan), witness: None },
            assumptions: Vec::new(),
            bounds: None,
        });
        if e.base_rank() >= 2 {
            if let Some(assumption) = nonfibering_assumption(e) {
                out.push(Certificate {
                    verdict: Verdict::Incoherent,
                    route: Route::DirectExcessive,
                    citations: vec![citations::EXCESSIVE_INCOHERENT, citations::NEUMANN],
                    group: e.clone(),
                    data: CertificateData::DirectIncoherence { character: gamma },
                    assumptions: vec![assumption],
                    bounds: None,
                });
            }
        }
    } else if e.base_rank() >= 2 && matches!(e.fiber(), Fiber::Free { rank } if *rank >= 2) {
        if let Some(witness) = outer_kernel_probe(e, probe_length)? {
            out.push(Certificate {
                verdict: Verdict::Incoherent,
                route: Route::InnerPair,
                citations: vec![citations::INNER_PAIR],
                group: e.clone(),
                data: CertificateData::InnerPairIncoherence(witness),
                assumptions: Vec::new(),
                bounds: None,
            });
        }
    }
    Ok(out)
}

/// R1 → R2 → R3, cheapest first. Requires base rank ≥ 2 (rank-one bases
/// are outside the criterion: `H ⋊ Z` can be coherent).
pub fn incoherence_certificate(e: &ExtensionSpec, bounds: &SearchBounds) -> Result<Certificate> {
    if e.base_rank() < 2 {
        return Err(Error::BaseRankTooSmall(e.base_rank()));
    }
    let direct = direct_verdicts(e, bounds.probe_length)?;
    if let Some(c) = direct.into_iter().find(|c| c.verdict == Verdict::Incoherent) {
        return Ok(c);
    }
    if let Some(witness) = search::find_excessive_subgroup(e, bounds)? {
        if let Some(assumption) = witness_nonfibering_assumption(e, &witness) {
            if witness.base_rank >= 2 {
                return Ok(Certificate {
                    verdict: Verdict::Incoherent,
                    route: Route::FiniteIndex,
                    citations: vec![
                        citations::FINITE_INDEX_HEREDITY,
                        citations::EXCESSIVE_INCOHERENT,
                        citations::HEREDITY,
                    ],
                    group: e.clone(),
                    data: CertificateData::SubgroupIncoherence(witness),
                    assumptions: vec![assumption],
                    bounds: Some(*bounds),
                });
            }
        }
    }
    Ok(Certificate {
        verdict: Verdict::Inconclusive,
        route: Route::None,
        citations: Vec::new(),
        group: e.clone(),
        data: CertificateData::Inconclusive { bounds: *bounds },
        assumptions: Vec::new(),
        bounds: Some(*bounds),
    })
}

/// Non-fibering evidence for the witness subgroup's fiber. A free sub-fiber
/// of rank ≥ 2 stands on its own. Descent keeps the fiber untouched, so any
/// original evidence carries over verbatim. A proper finite-index sub-fiber
/// inherits only the structural evidence (free rank ≥ 2, surface genus
/// ≥ 2); a bare user assertion about the fiber says nothing about its
/// subgroups.
pub fn witness_nonfibering_assumption(e: &ExtensionSpec, w: &SubgroupWitness) -> Option<String> {
    match &w.detail {
        WitnessDetail::FreeFiber { fiber_generators, .. } => (fiber_generators.len() >= 2)
            .then(|| "subgroup-fiber-does-not-fiber: free-rank>=2".to_string()),
        WitnessDetail::SignKernel { .. } => nonfibering_assumption(e),
        WitnessDetail::CosetAction { .. } => match e.nonfibering() {
            NonfiberingEvidence::FreeRankAtLeastTwo => {
                Some("subgroup-fiber-does-not-fiber: free-rank>=2".to_string())
            }
            NonfiberingEvidence::SurfaceGenusAtLeastTwo => Some(
                "subgroup-fiber-does-not-fiber: surface-genus>=2 (finite-index subgroup)"
                    .to_string(),
            ),
            _ => None,
        },
    }
}

impl Certificate {
    /// Recomputes every claim in the certificate from its own data.
    pub fn replay(&self) -> Result<()> {
        match (&self.verdict, &self.data) {
            (Verdict::ExcessiveHomology, CertificateData::ExcessiveHomology { h1, characters }) => {
                let computed = self.group.h1();
                if computed != *h1 {
                    return Err(Error::Replay(format!("h1 mismatch: {} vs {}", computed, h1)));
                }
                if computed.free_rank < self.group.base_rank() + 1 {
                    return Err(Error::Replay("homology is not excessive".into()));
                }
                let stacked = self.group.stacked_relations();
                for c in characters {
                    if c.fiber_is_zero() || !c.kills_relations(&stacked) {
                        return Err(Error::Replay("character fails relation check".into()));
                    }
                }
                if characters.len() != excessive_characters(&self.group).len() {
                    return Err(Error::Replay("character count mismatch".into()));
                }
                Ok(())
            }
            (Verdict::Incoherent, CertificateData::DirectIncoherence { character }) => {
                if self.group.base_rank() < 2 {
                    return Err(Error::Replay("incoherence route needs base rank >= 2".into()));
                }
                if !self.group.nonfibering().established() {
                    return Err(Error::Replay("fiber non-fibering not established".into()));
                }
                if character.fiber_is_zero()
                    || !character.kills_relations(&self.group.stacked_relations())
                {
                    return Err(Error::Replay("character fails relation check".into()));
                }
                Ok(())
            }
            (Verdict::Incoherent, CertificateData::InnerPairIncoherence(w)) => {
                if w.word.is_empty() {
                    return Err(Error::Replay("inner-pair word is trivial".into()));
                }
                let autos = self.group.certified_actions().map_err(|e| Error::Replay(e.to_string()))?;
                for (word, conj) in [(&w.word, &w.conjugator), (&w.second_word, &w.second_conjugator)] {
                    let phi = Automorphism::word_action(autos, word)
                        .map_err(|e| Error::Replay(e.to_string()))?;
                    match is_inner(&phi) {
                        Some(g) if g == *conj => {}
                        _ => return Err(Error::Replay("conjugator does not witness innerness".into())),
                    }
                }
                let (u, t) = (&w.word, &w.second_word);
                if u.concat(t) == t.concat(u) {
                    return Err(Error::Replay("witness words commute".into()));
                }
                Ok(())
            }
            (Verdict::Incoherent, CertificateData::SubgroupIncoherence(w))
            | (Verdict::VirtuallyExcessive, CertificateData::VirtuallyExcessive(w)) => {
                self.replay_witness(w)
            }
            (Verdict::AlgebraicallyFibers, CertificateData::Fibering { plan, witness }) => {
                let Some(plan) = plan else {
                    // Coset-action witness: its character is the fibering
                    // direction and is checked by the witness replay.
                    let Some(w) = witness else {
                        return Err(Error::Replay("fibering certificate carries no data".into()));
                    };
                    if !matches!(w.detail, WitnessDetail::CosetAction { .. }) {
                        return Err(Error::Replay("plan may only be omitted for coset actions".into()));
                    }
                    return self.replay_witness(w);
                };
                let subject = match witness {
                    None => self.group.clone(),
                    Some(w) => {
                        self.replay_witness(w)?;
                        rebuild_witness_spec(&self.group, w)?
                    }
                };
                let gamma = &plan.character;
                if gamma.fiber_is_zero()
                    || !gamma.fiber_is_primitive()
                    || !gamma.kills_relations(&subject.stacked_relations())
                {
                    return Err(Error::Replay("plan character fails checks".into()));
                }
                if plan.pieces.len() != subject.base_rank() {
                    return Err(Error::Replay("plan must cover every base generator".into()));
                }
                if !is_excessive(&subject) {
                    return Err(Error::Replay("plan subject is not excessive".into()));
                }
                Ok(())
            }
            (Verdict::Inconclusive, CertificateData::Inconclusive { .. }) => Ok(()),
            _ => Err(Error::Replay("verdict and data do not match".into())),
        }
    }

    fn replay_witness(&self, w: &SubgroupWitness) -> Result<()> {
        match &w.detail {
            WitnessDetail::CosetAction { permutations } => {
                let p = self.group.semidirect_presentation().map_err(|e| Error::Replay(e.to_string()))?;
                let table = crate::fpgroups::CosetTable::new(p.n_generators(), permutations.clone())
                    .map_err(|e| Error::Replay(e.to_string()))?;
                if !table.satisfies(&p) {
                    return Err(Error::Replay("witness table does not satisfy the relators".into()));
                }
                let data = crate::fpgroups::reidemeister_schreier(&p, &table)
                    .map_err(|e| Error::Replay(e.to_string()))?;
                let h1 = data.presentation.abelianization();
                if h1 != w.h1 {
                    return Err(Error::Replay(format!("witness h1 mismatch: {} vs {}", h1, w.h1)));
                }
                let base_rank = base_image_rank(&self.group, &data.generators)
                    .map_err(|e| Error::Replay(e.to_string()))?;
                if base_rank != w.base_rank {
                    return Err(Error::Replay("witness base rank mismatch".into()));
                }
                if h1.free_rank < base_rank + 1 {
                    return Err(Error::Replay("witness subgroup is not excessive".into()));
                }
                if w.character.fiber_values().len() != data.generators.len()
                    || w.character.fiber_is_zero()
                    || !w.character.kills_relations(&data.presentation.relator_matrix())
                {
                    return Err(Error::Replay("witness character fails checks".into()));
                }
                Ok(())
            }
            _ => {
                let spec = rebuild_witness_spec(&self.group, w)?;
                let h1 = spec.h1();
                if h1 != w.h1 {
                    return Err(Error::Replay(format!("witness h1 mismatch: {} vs {}", h1, w.h1)));
                }
                if spec.base_rank() != w.base_rank {
                    return Err(Error::Replay("witness base rank mismatch".into()));
                }
                if h1.free_rank < spec.base_rank() + 1 {
                    return Err(Error::Replay("witness subgroup is not excessive".into()));
                }
                if w.character.fiber_is_zero()
                    || !w.character.kills_relations(&spec.stacked_relations())
                {
                    return Err(Error::Replay("witness character fails checks".into()));
                }
                Ok(())
            }
        }
    }
}

/// Rank of the image in the base of the subgroup generated by the given
/// words of the semidirect presentation.
pub fn base_image_rank(group: &ExtensionSpec, generators: &[Word]) -> Result<usize> {
    let m = group.fiber_gen_count()?;
    let k = group.base_rank();
    let mut kill_fiber: Vec<Word> = vec![Word::identity(); m];
    kill_fiber.extend((1..=k).map(Word::gen));
    let projections: Result<Vec<Word>> = generators.iter().map(|g| g.substitute(&kill_fiber)).collect();
    Ok(SubgroupGraph::fold(&projections?, k)?.rank())
}

/// Rebuilds the witness sub-extension from stored words alone.
pub fn rebuild_witness_spec(group: &ExtensionSpec, w: &SubgroupWitness) -> Result<ExtensionSpec> {
    match &w.detail {
        WitnessDetail::SignKernel { base_words } => {
            let signs = rank_one_signs(group)?;
            if sign_kernel_generators(&signs) != *base_words {
                return Err(Error::Replay("descent words do not match the sign kernel".into()));
            }
            compose_along(group, base_words)
        }
        WitnessDetail::FreeFiber { fiber_generators, lifts } => {
            let m = group.fiber_gen_count()?;
            let sub = SubgroupGraph::fold(fiber_generators, m)?;
            if sub.index_in_ambient().is_none() {
                return Err(Error::Replay("witness fiber subgroup has infinite index".into()));
            }
            let based = BasedSubgroup::canonical(sub);
            let k = group.base_rank();
            let mut kill_fiber: Vec<Word> = vec![Word::identity(); m];
            kill_fiber.extend((1..=k).map(Word::gen));
            let mut projections = Vec::new();
            let mut actions = Vec::new();
            for lift in lifts {
                projections.push(lift.substitute(&kill_fiber)?);
                let phi = group.conjugation_action(lift)?;
                actions.push(restrict(&phi, &based).map_err(|e| Error::Replay(e.to_string()))?);
            }
            let base_image = SubgroupGraph::fold(&projections, k)?;
            if base_image.index_in_ambient().is_none() {
                return Err(Error::Replay("witness base image has infinite index".into()));
            }
            if base_image.rank() != lifts.len() {
                return Err(Error::Replay("lift projections are not a free basis".into()));
            }
            ExtensionSpec::new(Fiber::Free { rank: based.rank() }, Actions::Certified(actions))
        }
        WitnessDetail::CosetAction { .. } => {
            Err(Error::Replay("coset-action witnesses replay through the presentation".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::endos::{certify_automorphism, Endomorphism};
    use crate::fpgroups::Presentation;

    fn w(letters: &[i32]) -> Word {
        Word::from_signed(letters)
    }

    fn auto(images: &[&[i32]]) -> Automorphism {
        let rank = images.len();
        let endo = Endomorphism::new(rank, images.iter().map(|i| w(i)).collect()).unwrap();
        certify_automorphism(&endo).unwrap()
    }

    fn f2xf2() -> ExtensionSpec {
        let id = Automorphism::identity(2);
        ExtensionSpec::new(Fiber::Free { rank: 2 }, Actions::Certified(vec![id.clone(), id])).unwrap()
    }

    fn lam2_rho() -> ExtensionSpec {
        let lam = auto(&[&[1, 2], &[2]]);
        let rho = auto(&[&[1], &[2, 1]]);
        ExtensionSpec::new(
            Fiber::Free { rank: 2 },
            Actions::Certified(vec![lam.compose(&lam).unwrap(), rho]),
        )
        .unwrap()
    }

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn excessive_characters_for_identity_actions() {
        let chars = excessive_characters(&f2xf2());
        assert_eq!(chars.len(), 2);
        assert_eq!(chars[0].fiber_values(), &[rat(1), rat(0)]);
        assert_eq!(chars[1].fiber_values(), &[rat(0), rat(1)]);
        assert!(chars.iter().all(|c| c.base_values().iter().all(Zero::is_zero)));
    }

    #[test]
    fn excessive_characters_empty_for_full_rank_actions() {
        assert!(excessive_characters(&lam2_rho()).is_empty());
        assert!(!is_excessive(&lam2_rho()));
    }

    #[test]
    fn normalization() {
        let e = f2xf2();
        let chi = Character::new(vec![rat(2), rat(0)], vec![rat(3), rat(0)]);
        let n = normalize(&e, &chi).unwrap();
        assert_eq!(n.fiber_values(), &[rat(1), rat(0)]);
        assert!(n.base_values().iter().all(Zero::is_zero));
        assert_eq!(normalize(&e, &n).unwrap(), n);

        let half = Character::new(vec![rat(1) / rat(2), rat(0)], vec![rat(0), rat(0)]);
        assert_eq!(normalize(&e, &half).unwrap().fiber_values(), &[rat(1), rat(0)]);

        let zero = Character::new(vec![rat(0), rat(0)], vec![rat(1), rat(0)]);
        assert_eq!(normalize(&e, &zero).unwrap_err(), Error::ZeroFiberPart);
    }

    #[test]
    fn fibration_plan_shape() {
        let e = f2xf2();
        let diagonal = Character::new(vec![rat(1), rat(1)], vec![rat(0), rat(0)]);
        let plan = fibration_plan(&e, &diagonal).unwrap();
        assert_eq!(plan.pieces.len(), 2);
        assert_eq!(plan.pieces[0].base_index, 1);
        assert_eq!(plan.pieces[0].fiber_offsets, vec![(1, rat(1)), (2, rat(1))]);
        assert!(plan.non_effective);

        assert_eq!(
            fibration_plan(&lam2_rho(), &diagonal).unwrap_err(),
            Error::NotExcessive
        );
    }

    #[test]
    fn probe_finds_inner_actions() {
        // Both actions are conjugations: the first base generator is already
        // in the kernel of the outer action.
        let conj_a = auto(&[&[1], &[-1, 2, 1]]);
        let conj_b = auto(&[&[-2, 1, 2], &[2]]);
        let e = ExtensionSpec::new(Fiber::Free { rank: 2 }, Actions::Certified(vec![conj_a, conj_b]))
            .unwrap();
        let witness = outer_kernel_probe(&e, 2).unwrap().unwrap();
        assert_eq!(witness.word, w(&[1]));
        assert_eq!(witness.conjugator, w(&[-1]));
        assert!(!witness.second_word.is_empty());

        // λ, λ⁻¹ as the two actions: s·t acts trivially, hence innerly.
        let lam = auto(&[&[1, 2], &[2]]);
        let e = ExtensionSpec::new(
            Fiber::Free { rank: 2 },
            Actions::Certified(vec![lam.clone(), lam.inverted()]),
        )
        .unwrap();
        let witness = outer_kernel_probe(&e, 2).unwrap().unwrap();
        assert_eq!(witness.word, w(&[1, 2]));
        assert_eq!(witness.conjugator, Word::identity());
    }

    #[test]
    fn probe_reports_absence() {
        assert!(outer_kernel_probe(&lam2_rho(), 3).unwrap().is_none());
    }

    #[test]
    fn strong_lift_arithmetic() {
        let lifted = strong_fiber_lift(2, &[rat(0), rat(0)], &[rat(1), rat(0), rat(-1)]).unwrap();
        assert_eq!(lifted.fiber_values().len(), 3);
        assert!(lifted.base_values().iter().all(Zero::is_zero));

        assert!(strong_fiber_lift(1, &[rat(0), rat(0)], &[rat(1)]).is_err());

        let trivial_q = strong_fiber_lift(0, &[], &[rat(2)]).unwrap();
        assert!(trivial_q.base_values().is_empty());
    }

    #[test]
    fn rank_one_descent_signs() {
        let flip = IntMatrix::from_rows(&[vec![-1i64]]);
        let keep = IntMatrix::identity(1);
        let e = ExtensionSpec::with_flags(
            Fiber::AbelianizedOnly { h1_rank: 1 },
            Actions::Abelianized(vec![flip.clone(), keep.clone()]),
            false,
            true,
        )
        .unwrap();
        let DescentOutcome::Descended { spec, signs, base_words } = rank_one_descent(&e).unwrap()
        else {
            panic!("expected descent");
        };
        assert_eq!(signs, vec![-1, 1]);
        assert_eq!(base_words, vec![w(&[2]), w(&[1, 1]), w(&[1, 2, 1])]);
        assert_eq!(spec.base_rank(), 3);
        assert!(is_excessive(&spec));
        assert_eq!(spec.h1(), AbelianGroupShape::free(4));

        let all_plus = ExtensionSpec::with_flags(
            Fiber::AbelianizedOnly { h1_rank: 1 },
            Actions::Abelianized(vec![keep.clone(), keep]),
            false,
            true,
        )
        .unwrap();
        assert!(matches!(rank_one_descent(&all_plus).unwrap(), DescentOutcome::AlreadyInvariant));
    }

    #[test]
    fn sign_kernel_words_generate_the_kernel() {
        for signs in [vec![-1i8, 1], vec![-1, -1], vec![1, -1, -1]] {
            let gens = sign_kernel_generators(&signs);
            let k = signs.len();
            assert_eq!(gens.len(), 2 * k - 1);
            let graph = SubgroupGraph::fold(&gens, k).unwrap();
            assert_eq!(graph.index_in_ambient(), Some(2));
            for g in &gens {
                let sign: i32 = g
                    .letters()
                    .iter()
                    .map(|l| if signs[l.index() - 1] == -1 { 1 } else { 0 })
                    .sum();
                assert_eq!(sign % 2, 0, "generator stays in the kernel");
            }
        }
        // The classical index-two generating set lives in the same subgroup.
        let gens = sign_kernel_generators(&[-1, -1]);
        let graph = SubgroupGraph::fold(&gens, 2).unwrap();
        let classical = SubgroupGraph::fold(&[w(&[1, 1]), w(&[2, 2]), w(&[1, 2])], 2).unwrap();
        assert_eq!(graph, classical);
    }

    #[test]
    fn descent_on_presented_rank_one_fiber() {
        // ⟨a, b | b²⟩: H₁ = Z ⊕ Z/2 with free part generated by a.
        let p = Presentation::new(2, vec![w(&[2, 2])]).unwrap();
        // a ↦ a⁻¹ (b fixed) flips the free part.
        let flip = Endomorphism::new(2, vec![w(&[-1]), w(&[2])]).unwrap();
        let id = Endomorphism::identity(2);
        let e = ExtensionSpec::with_flags(
            Fiber::Presented(p),
            Actions::Trusted(vec![flip, id]),
            false,
            true,
        )
        .unwrap();
        assert_eq!(rank_one_signs(&e).unwrap(), vec![-1, 1]);
        let DescentOutcome::Descended { spec, .. } = rank_one_descent(&e).unwrap() else {
            panic!("expected descent");
        };
        assert!(is_excessive(&spec));
    }

    #[test]
    fn direct_verdicts_for_f2xf2() {
        let certs = direct_verdicts(&f2xf2(), 4).unwrap();
        let verdicts: Vec<Verdict> = certs.iter().map(|c| c.verdict).collect();
        assert_eq!(
            verdicts,
            vec![Verdict::ExcessiveHomology, Verdict::AlgebraicallyFibers, Verdict::Incoherent]
        );
        let incoherent = &certs[2];
        assert_eq!(incoherent.route, Route::DirectExcessive);
        for c in &certs {
            c.replay().unwrap();
        }
    }

    #[test]
    fn incoherence_requires_base_rank_two() {
        let id = Automorphism::identity(2);
        let e = ExtensionSpec::new(Fiber::Free { rank: 2 }, Actions::Certified(vec![id])).unwrap();
        assert_eq!(
            incoherence_certificate(&e, &SearchBounds::default()).unwrap_err(),
            Error::BaseRankTooSmall(1)
        );
    }

    #[test]
    fn inner_pair_certificate_replays() {
        let lam = auto(&[&[1, 2], &[2]]);
        let e = ExtensionSpec::new(
            Fiber::Free { rank: 2 },
            Actions::Certified(vec![lam.clone(), lam.inverted()]),
        )
        .unwrap();
        let cert = incoherence_certificate(&e, &SearchBounds::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Incoherent);
        assert_eq!(cert.route, Route::InnerPair);
        cert.replay().unwrap();
    }
}
