//! Finite presentations, semidirect products, low-index subgroup
//! enumeration, and Reidemeister–Schreier rewriting.
//!
//! The central type is [`ExtensionSpec`], the data of a split extension
//! `G = H ⋊ F_k`: a fiber description plus one automorphism per base
//! generator (conjugation convention `tᵢ·a·tᵢ⁻¹ = φᵢ(a)`). Its first
//! homology comes out of the cokernel of the stacked `Φᵢ − I` matrices; the
//! same answer must arrive through [`Presentation::abelianization`] of the
//! semidirect presentation, and the test suites hold the two routes
//! together.
//!
//! Low-index enumeration is permutation backtracking over coset tables (not
//! coset enumeration with coincidences): cosets are filled in scan order so
//! every complete table is standardized, and completed tables are kept only
//! when they are lexicographically minimal over all base points, which
//! yields exactly one table per conjugacy class of subgroup. The intended
//! working range is small (degree at most ~12).

use std::collections::BTreeSet;

use crate::endos::{restrict, Automorphism, BasedSubgroup, Endomorphism};
use crate::stallings::SubgroupGraph;
use crate::words::{Letter, Word};
use crate::zmat::{AbelianGroupShape, IntMatrix};
use crate::{Error, Result};

/// A finite presentation; relators are kept cyclically reduced.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Presentation {
    n_generators: usize,
    relators: Vec<Word>,
}

impl Presentation {
    pub fn new(n_generators: usize, relators: Vec<Word>) -> Result<Presentation> {
        let mut reduced = Vec::with_capacity(relators.len());
        for r in relators {
            if r.max_index() > n_generators {
                return Err(Error::GeneratorOutOfRange { index: r.max_index(), rank: n_generators });
            }
            let (core, _) = r.cyclically_reduced();
            if !core.is_empty() {
                reduced.push(core);
            }
        }
        Ok(Presentation { n_generators, relators: reduced })
    }

    /// Free group of the given rank.
    pub fn free(n_generators: usize) -> Presentation {
        Presentation { n_generators, relators: Vec::new() }
    }

    pub fn n_generators(&self) -> usize {
        self.n_generators
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    /// Exponent matrix: one column per relator.
    pub fn relator_matrix(&self) -> IntMatrix {
        let cols: Vec<Vec<i64>> = self
            .relators
            .iter()
            .map(|r| r.exponent_vector(self.n_generators).expect("validated"))
            .collect();
        IntMatrix::from_columns(self.n_generators, &cols)
    }

    /// Structure of the abelianized group.
    pub fn abelianization(&self) -> AbelianGroupShape {
        self.relator_matrix().cokernel()
    }
}

/// A complete coset table: the transitive action of a presented group on the
/// right cosets of a finite-index subgroup. Coset 0 is the subgroup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetTable {
    n_generators: usize,
    /// `fwd[g-1][c]`: image of coset `c` under generator `g`.
    fwd: Vec<Vec<usize>>,
    /// `bwd[g-1][c]`: preimage of coset `c` under generator `g`.
    bwd: Vec<Vec<usize>>,
}

impl CosetTable {
    /// Builds a table from the generator permutations, validating that they
    /// are permutations and act transitively.
    pub fn new(n_generators: usize, fwd: Vec<Vec<usize>>) -> Result<CosetTable> {
        if fwd.len() != n_generators {
            return Err(Error::TableMismatch);
        }
        let degree = fwd.first().map_or(0, Vec::len);
        if degree == 0 {
            return Err(Error::TableMismatch);
        }
        let mut bwd = vec![vec![usize::MAX; degree]; n_generators];
        for (g, p) in fwd.iter().enumerate() {
            if p.len() != degree {
                return Err(Error::TableMismatch);
            }
            for (c, &t) in p.iter().enumerate() {
                if t >= degree || bwd[g][t] != usize::MAX {
                    return Err(Error::TableMismatch);
                }
                bwd[g][t] = c;
            }
        }
        let table = CosetTable { n_generators, fwd, bwd };
        if !table.is_transitive() {
            return Err(Error::TableMismatch);
        }
        Ok(table)
    }

    fn is_transitive(&self) -> bool {
        let d = self.degree();
        let mut seen = vec![false; d];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(c) = stack.pop() {
            for g in 0..self.n_generators {
                for t in [self.fwd[g][c], self.bwd[g][c]] {
                    if !seen[t] {
                        seen[t] = true;
                        count += 1;
                        stack.push(t);
                    }
                }
            }
        }
        count == d
    }

    pub fn degree(&self) -> usize {
        self.fwd.first().map_or(0, Vec::len)
    }

    pub fn n_generators(&self) -> usize {
        self.n_generators
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.fwd
    }

    pub fn step(&self, c: usize, l: Letter) -> usize {
        if l.is_positive() {
            self.fwd[l.index() - 1][c]
        } else {
            self.bwd[l.index() - 1][c]
        }
    }

    pub fn trace(&self, start: usize, w: &Word) -> usize {
        w.letters().iter().fold(start, |c, &l| self.step(c, l))
    }

    /// Does the table carry an action of the presented group?
    pub fn satisfies(&self, p: &Presentation) -> bool {
        if p.n_generators() != self.n_generators {
            return false;
        }
        (0..self.degree()).all(|c| p.relators().iter().all(|r| self.trace(c, r) == c))
    }

    /// BFS-standardized relabeling with `c` as the new coset 0.
    fn rebase(&self, c: usize) -> CosetTable {
        let d = self.degree();
        let mut order = vec![c];
        let mut id = vec![usize::MAX; d];
        id[c] = 0;
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            i += 1;
            for g in 0..self.n_generators {
                for t in [self.fwd[g][v], self.bwd[g][v]] {
                    if id[t] == usize::MAX {
                        id[t] = order.len();
                        order.push(t);
                    }
                }
            }
        }
        let mut fwd = vec![vec![0usize; d]; self.n_generators];
        let mut bwd = vec![vec![0usize; d]; self.n_generators];
        for (g, p) in self.fwd.iter().enumerate() {
            for (v, &t) in p.iter().enumerate() {
                fwd[g][id[v]] = id[t];
                bwd[g][id[t]] = id[v];
            }
        }
        CosetTable { n_generators: self.n_generators, fwd, bwd }
    }

    /// Flattened comparison key in cell-scan order.
    fn key(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree() * self.n_generators * 2);
        for c in 0..self.degree() {
            for g in 0..self.n_generators {
                out.push(self.fwd[g][c]);
                out.push(self.bwd[g][c]);
            }
        }
        out
    }

    /// Number of subgroups in this table's conjugacy class.
    pub fn subgroups_in_class(&self) -> usize {
        let me = self.rebase(0).key();
        let fixers = (0..self.degree()).filter(|&c| self.rebase(c).key() == me).count();
        self.degree() / fixers
    }
}

/// All transitive coset tables of degree ≤ `d_max` satisfying the relators,
/// one per conjugacy class of subgroup, in deterministic order.
pub fn low_index(p: &Presentation, d_max: usize) -> Vec<CosetTable> {
    let mut search = LowIndexSearch::new(p, d_max);
    search.run();
    let mut out = search.found;
    out.sort_by_key(|t| (t.degree(), t.key()));
    out
}

struct LowIndexSearch<'a> {
    p: &'a Presentation,
    d_max: usize,
    n: usize,
    fwd: Vec<Vec<Option<usize>>>,
    bwd: Vec<Vec<Option<usize>>>,
    n_used: usize,
    trail: Vec<TrailEntry>,
    found: Vec<CosetTable>,
}

enum TrailEntry {
    Set { g: usize, from: usize, to: usize },
    NewCoset,
}

impl<'a> LowIndexSearch<'a> {
    fn new(p: &'a Presentation, d_max: usize) -> LowIndexSearch<'a> {
        let n = p.n_generators();
        LowIndexSearch {
            p,
            d_max: d_max.max(1),
            n,
            fwd: vec![Vec::new(); n],
            bwd: vec![Vec::new(); n],
            n_used: 0,
            trail: Vec::new(),
            found: Vec::new(),
        }
    }

    fn run(&mut self) {
        self.new_coset();
        self.search();
    }

    fn new_coset(&mut self) {
        for g in 0..self.n {
            self.fwd[g].push(None);
            self.bwd[g].push(None);
        }
        self.n_used += 1;
        self.trail.push(TrailEntry::NewCoset);
    }

    fn set(&mut self, g: usize, from: usize, to: usize) {
        self.fwd[g][from] = Some(to);
        self.bwd[g][to] = Some(from);
        self.trail.push(TrailEntry::Set { g, from, to });
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().expect("trail entry") {
                TrailEntry::Set { g, from, to } => {
                    self.fwd[g][from] = None;
                    self.bwd[g][to] = None;
                }
                TrailEntry::NewCoset => {
                    for g in 0..self.n {
                        self.fwd[g].pop();
                        self.bwd[g].pop();
                    }
                    self.n_used -= 1;
                }
            }
        }
    }

    /// Scans relator `r` at coset `c`; fills a single gap when forced.
    /// Returns `false` on contradiction, sets `*deduced` when it filled.
    fn scan(&mut self, c: usize, ri: usize, deduced: &mut bool) -> bool {
        let r = &self.p.relators()[ri];
        let letters = r.letters().to_vec();
        let len = letters.len();
        let mut f = c;
        let mut i = 0;
        while i < len {
            let l = letters[i];
            let next = if l.is_positive() { self.fwd[l.index() - 1][f] } else { self.bwd[l.index() - 1][f] };
            match next {
                Some(t) => {
                    f = t;
                    i += 1;
                }
                None => break,
            }
        }
        if i == len {
            return f == c;
        }
        let mut b = c;
        let mut j = len;
        while j > i {
            let l = letters[j - 1];
            let prev = if l.is_positive() { self.bwd[l.index() - 1][b] } else { self.fwd[l.index() - 1][b] };
            match prev {
                Some(t) => {
                    b = t;
                    j -= 1;
                }
                None => break,
            }
        }
        if j == i {
            return f == b;
        }
        if j == i + 1 {
            // The single missing transition is forced.
            let l = letters[i];
            let (g, from, to) = if l.is_positive() { (l.index() - 1, f, b) } else { (l.index() - 1, b, f) };
            if self.fwd[g][from].is_some() || self.bwd[g][to].is_some() {
                return false;
            }
            self.set(g, from, to);
            *deduced = true;
        }
        true
    }

    /// Relator propagation to a fixed point.
    fn propagate(&mut self) -> bool {
        loop {
            let mut deduced = false;
            for c in 0..self.n_used {
                for ri in 0..self.p.relators().len() {
                    if !self.scan(c, ri, &mut deduced) {
                        return false;
                    }
                }
            }
            if !deduced {
                return true;
            }
        }
    }

    /// First undefined cell in scan order: coset-major, then g fwd, g bwd.
    fn first_undefined(&self) -> Option<(usize, usize, bool)> {
        for c in 0..self.n_used {
            for g in 0..self.n {
                if self.fwd[g][c].is_none() {
                    return Some((c, g, true));
                }
                if self.bwd[g][c].is_none() {
                    return Some((c, g, false));
                }
            }
        }
        None
    }

    fn search(&mut self) {
        if !self.propagate() {
            return;
        }
        let Some((c, g, is_fwd)) = self.first_undefined() else {
            self.emit();
            return;
        };
        let candidates: Vec<usize> = (0..self.n_used)
            .filter(|&t| if is_fwd { self.bwd[g][t].is_none() } else { self.fwd[g][t].is_none() })
            .collect();
        for t in candidates {
            let mark = self.trail.len();
            if is_fwd {
                self.set(g, c, t);
            } else {
                self.set(g, t, c);
            }
            self.search();
            self.undo_to(mark);
        }
        if self.n_used < self.d_max {
            let mark = self.trail.len();
            self.new_coset();
            let t = self.n_used - 1;
            if is_fwd {
                self.set(g, c, t);
            } else {
                self.set(g, t, c);
            }
            self.search();
            self.undo_to(mark);
        }
    }

    /// Completed table: keep it iff it is first in its conjugacy class.
    fn emit(&mut self) {
        let fwd: Vec<Vec<usize>> =
            self.fwd.iter().map(|col| col.iter().map(|v| v.expect("complete")).collect()).collect();
        let table = CosetTable::new(self.n, fwd).expect("search builds valid tables");
        let own = table.key();
        debug_assert_eq!(own, table.rebase(0).key(), "search tables are standardized");
        for c in 1..table.degree() {
            if table.rebase(c).key() < own {
                return;
            }
        }
        self.found.push(table);
    }
}

/// How a coset is represented in a Schreier transversal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransversalStyle {
    Bfs,
    Dfs,
}

/// Output of Reidemeister–Schreier rewriting: a presentation of the
/// subgroup on its Schreier generators, the generators as ambient words,
/// and the coset transversal used.
#[derive(Clone, Debug)]
pub struct SchreierData {
    pub presentation: Presentation,
    pub generators: Vec<Word>,
    pub transversal: Vec<Word>,
}

/// Presentation of the subgroup at coset 0, on Schreier generators from the
/// deterministic BFS transversal (smallest generator first).
pub fn reidemeister_schreier(p: &Presentation, t: &CosetTable) -> Result<SchreierData> {
    reidemeister_schreier_with(p, t, TransversalStyle::Bfs)
}

/// Same, with an explicit transversal style; the abelianization of the
/// result must not depend on the choice.
pub fn reidemeister_schreier_with(
    p: &Presentation,
    t: &CosetTable,
    style: TransversalStyle,
) -> Result<SchreierData> {
    if !t.satisfies(p) {
        return Err(Error::TableMismatch);
    }
    let d = t.degree();
    let n = p.n_generators();

    // Transversal: tree pairs are the (source, generator) edges used for
    // discovery, stored positively.
    let mut rep: Vec<Option<Word>> = vec![None; d];
    rep[0] = Some(Word::identity());
    let mut tree_pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut frontier = vec![0usize];
    match style {
        TransversalStyle::Bfs => {
            let mut qi = 0;
            while qi < frontier.len() {
                let c = frontier[qi];
                qi += 1;
                for g in 1..=n {
                    for positive in [true, false] {
                        let l = if positive { Letter::gen(g) } else { Letter::inv_gen(g) };
                        let tgt = t.step(c, l);
                        if rep[tgt].is_none() {
                            rep[tgt] = Some(rep[c].clone().expect("visited").concat(&Word::reduce([l])));
                            tree_pairs.insert(if positive { (c, g) } else { (tgt, g) });
                            frontier.push(tgt);
                        }
                    }
                }
            }
        }
        TransversalStyle::Dfs => {
            let mut stack = vec![0usize];
            while let Some(c) = stack.pop() {
                for g in 1..=n {
                    for positive in [true, false] {
                        let l = if positive { Letter::gen(g) } else { Letter::inv_gen(g) };
                        let tgt = t.step(c, l);
                        if rep[tgt].is_none() {
                            rep[tgt] = Some(rep[c].clone().expect("visited").concat(&Word::reduce([l])));
                            tree_pairs.insert(if positive { (c, g) } else { (tgt, g) });
                            stack.push(tgt);
                        }
                    }
                }
            }
            let _ = frontier;
        }
    }
    let rep: Vec<Word> = rep.into_iter().map(|w| w.expect("transitive table")).collect();

    // Schreier generators for the non-tree pairs, in (coset, generator) order.
    let mut gen_index: Vec<Vec<Option<usize>>> = vec![vec![None; d]; n];
    let mut generators = Vec::new();
    for c in 0..d {
        for g in 1..=n {
            if tree_pairs.contains(&(c, g)) {
                continue;
            }
            let tgt = t.fwd[g - 1][c];
            let word = rep[c].concat(&Word::gen(g)).concat(&rep[tgt].inverse());
            gen_index[g - 1][c] = Some(generators.len() + 1);
            generators.push(word);
        }
    }

    // Rewrite each relator at each coset over the Schreier alphabet.
    let rewrite = |start: usize, r: &Word| -> Word {
        let mut out = Vec::new();
        let mut cur = start;
        for &l in r.letters() {
            let g = l.index();
            if l.is_positive() {
                if let Some(i) = gen_index[g - 1][cur] {
                    out.push(Letter::gen(i));
                }
                cur = t.fwd[g - 1][cur];
            } else {
                let prev = t.bwd[g - 1][cur];
                if let Some(i) = gen_index[g - 1][prev] {
                    out.push(Letter::inv_gen(i));
                }
                cur = prev;
            }
        }
        Word::reduce(out)
    };

    let mut seen: BTreeSet<Vec<i32>> = BTreeSet::new();
    let mut relators = Vec::new();
    for c in 0..d {
        for r in p.relators() {
            let (core, _) = rewrite(c, r).cyclically_reduced();
            if core.is_empty() {
                continue;
            }
            if seen.insert(cyclic_canonical_key(&core)) {
                relators.push(core);
            }
        }
    }

    Ok(SchreierData {
        presentation: Presentation::new(generators.len(), relators)?,
        generators,
        transversal: rep,
    })
}

/// Canonical key of a cyclic word up to rotation and inversion.
fn cyclic_canonical_key(w: &Word) -> Vec<i32> {
    let mut best: Option<Vec<i32>> = None;
    for candidate in [w.clone(), w.inverse()] {
        let letters: Vec<i32> = candidate.letters().iter().map(|l| l.signed()).collect();
        for shift in 0..letters.len().max(1) {
            let mut rot = letters.clone();
            rot.rotate_left(shift);
            if best.as_ref().is_none_or(|b| rot < *b) {
                best = Some(rot);
            }
        }
    }
    best.unwrap_or_default()
}

/// Fiber description of an extension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Fiber {
    /// Free group of the given rank.
    Free { rank: usize },
    /// Finitely presented fiber; word-level action data is trusted to
    /// descend to the quotient.
    Presented(Presentation),
    /// Only the abelianization is known: `H₁(H)` free of the given rank,
    /// actions given as unimodular integer matrices.
    AbelianizedOnly { h1_rank: usize },
}

/// Action data matching the fiber mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Actions {
    /// Certified automorphisms of the free fiber.
    Certified(Vec<Automorphism>),
    /// Word-level endomorphisms of the presented fiber's free cover.
    Trusted(Vec<Endomorphism>),
    /// Matrices on the abelianization.
    Abelianized(Vec<IntMatrix>),
}

impl Actions {
    pub fn len(&self) -> usize {
        match self {
            Actions::Certified(v) => v.len(),
            Actions::Trusted(v) => v.len(),
            Actions::Abelianized(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Why the fiber is known not to algebraically fiber (map onto Z with
/// finitely generated kernel), if it is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonfiberingEvidence {
    FreeRankAtLeastTwo,
    SurfaceGenusAtLeastTwo,
    UserAsserted,
    Unknown,
}

impl NonfiberingEvidence {
    pub fn established(self) -> bool {
        self != NonfiberingEvidence::Unknown
    }
}

/// The data of `G = H ⋊ F_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtensionSpec {
    fiber: Fiber,
    actions: Actions,
    nonfibering: NonfiberingEvidence,
}

impl ExtensionSpec {
    pub fn new(fiber: Fiber, actions: Actions) -> Result<ExtensionSpec> {
        ExtensionSpec::with_flags(fiber, actions, false, false)
    }

    /// `surface_fiber` and `assert_nonfibering` are caller-supplied claims
    /// recorded as assumptions; a free fiber of rank ≥ 2 needs neither.
    pub fn with_flags(
        fiber: Fiber,
        actions: Actions,
        surface_fiber: bool,
        assert_nonfibering: bool,
    ) -> Result<ExtensionSpec> {
        match (&fiber, &actions) {
            (Fiber::Free { rank }, Actions::Certified(autos)) => {
                for a in autos {
                    if a.rank() != *rank {
                        return Err(Error::RankMismatch { left: a.rank(), right: *rank });
                    }
                }
            }
            (Fiber::Presented(p), Actions::Trusted(endos)) => {
                for e in endos {
                    if e.rank() != p.n_generators() {
                        return Err(Error::RankMismatch { left: e.rank(), right: p.n_generators() });
                    }
                }
            }
            (Fiber::AbelianizedOnly { h1_rank }, Actions::Abelianized(mats)) => {
                for m in mats {
                    if m.rows() != *h1_rank || m.cols() != *h1_rank {
                        return Err(Error::RankMismatch { left: m.rows(), right: *h1_rank });
                    }
                    if !m.determinant().magnitude().eq(&1u32.into()) {
                        return Err(Error::HypothesisViolated("abelianized action must be unimodular"));
                    }
                }
            }
            _ => return Err(Error::HypothesisViolated("fiber and action modes must match")),
        }
        let nonfibering = match &fiber {
            Fiber::Free { rank } if *rank >= 2 => NonfiberingEvidence::FreeRankAtLeastTwo,
            _ if surface_fiber => NonfiberingEvidence::SurfaceGenusAtLeastTwo,
            _ if assert_nonfibering => NonfiberingEvidence::UserAsserted,
            _ => NonfiberingEvidence::Unknown,
        };
        Ok(ExtensionSpec { fiber, actions, nonfibering })
    }

    pub fn fiber(&self) -> &Fiber {
        &self.fiber
    }

    pub fn actions(&self) -> &Actions {
        &self.actions
    }

    pub fn base_rank(&self) -> usize {
        self.actions.len()
    }

    pub fn nonfibering(&self) -> NonfiberingEvidence {
        self.nonfibering
    }

    /// Number of fiber generators for word-level modes.
    pub fn fiber_gen_count(&self) -> Result<usize> {
        match &self.fiber {
            Fiber::Free { rank } => Ok(*rank),
            Fiber::Presented(p) => Ok(p.n_generators()),
            Fiber::AbelianizedOnly { .. } => Err(Error::AbelianizedOnlyFiber),
        }
    }

    /// Free rank of `H₁(fiber)`.
    pub fn fiber_h1_free_rank(&self) -> usize {
        match &self.fiber {
            Fiber::Free { rank } => *rank,
            Fiber::Presented(p) => p.abelianization().free_rank,
            Fiber::AbelianizedOnly { h1_rank } => *h1_rank,
        }
    }

    /// Certified automorphisms (free fiber mode only).
    pub fn certified_actions(&self) -> Result<&[Automorphism]> {
        match &self.actions {
            Actions::Certified(v) => Ok(v),
            _ => Err(Error::AbelianizedOnlyFiber),
        }
    }

    /// Word-level images of fiber generators under action `i` (0-based).
    pub fn action_images(&self, i: usize) -> Result<&[Word]> {
        match &self.actions {
            Actions::Certified(v) => Ok(v[i].forward().images()),
            Actions::Trusted(v) => Ok(v[i].images()),
            Actions::Abelianized(_) => Err(Error::AbelianizedOnlyFiber),
        }
    }

    /// Induced matrices on the generator lattice of the fiber abelianization.
    pub fn action_matrices(&self) -> Vec<IntMatrix> {
        match &self.actions {
            Actions::Certified(v) => v.iter().map(Automorphism::abelianized).collect(),
            Actions::Trusted(v) => v.iter().map(Endomorphism::abelianized).collect(),
            Actions::Abelianized(v) => v.clone(),
        }
    }

    /// Relation matrix of `H₁(G)` restricted to the fiber block: fiber
    /// relators (if any) followed by the columns of every `Φᵢ − I`.
    pub fn stacked_relations(&self) -> IntMatrix {
        let mats = self.action_matrices();
        let diffs: Vec<IntMatrix> = mats.iter().map(IntMatrix::minus_identity).collect();
        match &self.fiber {
            Fiber::Presented(p) => {
                let r = p.relator_matrix();
                let mut blocks: Vec<&IntMatrix> = vec![&r];
                blocks.extend(diffs.iter());
                IntMatrix::hstack(&blocks)
            }
            _ => {
                if diffs.is_empty() {
                    IntMatrix::zero(self.fiber_h1_free_rank(), 0)
                } else {
                    let blocks: Vec<&IntMatrix> = diffs.iter().collect();
                    IntMatrix::hstack(&blocks)
                }
            }
        }
    }

    /// `H₁(G) = Z^k ⊕ (H₁(H) / ⟨(Φᵢ − I)·H₁(H)⟩)`, computed exactly.
    pub fn h1(&self) -> AbelianGroupShape {
        let mut shape = self.stacked_relations().cokernel();
        shape.free_rank += self.base_rank();
        shape
    }

    /// Presentation `⟨fiber gens, base gens | fiber relators,
    /// tᵢ·aⱼ·tᵢ⁻¹·φᵢ(aⱼ)⁻¹⟩`.
    pub fn semidirect_presentation(&self) -> Result<Presentation> {
        let m = self.fiber_gen_count()?;
        let k = self.base_rank();
        let mut relators: Vec<Word> = match &self.fiber {
            Fiber::Presented(p) => p.relators().to_vec(),
            _ => Vec::new(),
        };
        for i in 1..=k {
            let t = Word::gen(m + i);
            for j in 1..=m {
                let image = self.action_images(i - 1)?[j - 1].clone();
                let relator = t
                    .concat(&Word::gen(j))
                    .concat(&t.inverse())
                    .concat(&image.inverse());
                relators.push(relator);
            }
        }
        Presentation::new(m + k, relators)
    }

    /// Conjugation action of a word in the semidirect presentation's
    /// letters on the free fiber: fiber letters act by conjugation, base
    /// letters by their automorphisms.
    pub fn conjugation_action(&self, w: &Word) -> Result<Automorphism> {
        let Fiber::Free { rank: m } = self.fiber else {
            return Err(Error::AbelianizedOnlyFiber);
        };
        let autos = self.certified_actions()?;
        let mut acc = Automorphism::identity(m);
        for &l in w.letters() {
            let step = if l.index() <= m {
                let g = if l.is_positive() { Word::gen(l.index()) } else { Word::gen(l.index()).inverse() };
                Automorphism::new(
                    Endomorphism::conjugation(m, &g)?,
                    Endomorphism::conjugation(m, &g.inverse())?,
                )?
            } else {
                let i = l.index() - m;
                if i > autos.len() {
                    return Err(Error::GeneratorOutOfRange { index: l.index(), rank: m + autos.len() });
                }
                if l.is_positive() { autos[i - 1].clone() } else { autos[i - 1].inverted() }
            };
            acc = acc.compose(&step)?;
        }
        Ok(acc)
    }

    /// Restriction of the extension to the finite-index subgroup given by a
    /// coset table of the semidirect presentation (free fiber only):
    /// `K = L ⋊ F_l` with `L = K ∩ H` and `F_l` the image of `K` in the
    /// base. Base lifts are chosen deterministically (shortest fiber-side
    /// Schreier word).
    pub fn sub_extension(&self, table: &CosetTable) -> Result<SubExtension> {
        let Fiber::Free { rank: m } = self.fiber else {
            return Err(Error::AbelianizedOnlyFiber);
        };
        let k = self.base_rank();
        let p = self.semidirect_presentation()?;
        if !table.satisfies(&p) {
            return Err(Error::TableMismatch);
        }
        let autos = self.certified_actions()?;

        // L = K ∩ H is read off the fiber-generator action on the orbit of
        // coset 0: its Schreier graph is already the folded subgroup graph.
        let fiber_perms: Vec<Vec<usize>> = table.permutations()[..m].to_vec();
        let fiber_subgroup = SubgroupGraph::from_permutation_action(&fiber_perms, 0, m);

        // π(K) ≤ F_k, folded from the base-coordinate projections of K's
        // Schreier generators.
        let schreier = reidemeister_schreier(&p, table)?;
        let mut kill_fiber: Vec<Word> = vec![Word::identity(); m];
        kill_fiber.extend((1..=k).map(Word::gen));
        let projections: Result<Vec<Word>> =
            schreier.generators.iter().map(|w| w.substitute(&kill_fiber)).collect();
        let base_image = SubgroupGraph::fold(&projections?, k)?;
        let base_basis = base_image.basis();

        // One lift per base-image basis element: g = h · u with h the
        // shortest fiber word moving coset 0 to the coset where u returns
        // to 0.
        let embed: Vec<Word> = (1..=k).map(|i| Word::gen(m + i)).collect();
        let based_fiber = BasedSubgroup::canonical(fiber_subgroup.clone());
        let mut restricted = Vec::with_capacity(base_basis.len());
        let mut lifts = Vec::with_capacity(base_basis.len());
        for u in &base_basis {
            let u_in_g = u.substitute(&embed)?;
            let needed = table.trace(0, &u_in_g.inverse());
            let h = fiber_word_to(table, m, needed)?;
            let lift = h.concat(&u_in_g);
            debug_assert_eq!(table.trace(0, &lift), 0, "lift lies in the subgroup");
            let conj = Automorphism::new(
                Endomorphism::conjugation(m, &h)?,
                Endomorphism::conjugation(m, &h.inverse())?,
            )?;
            let action = conj.compose(&Automorphism::word_action(autos, u)?)?;
            restricted.push(restrict(&action, &based_fiber)?);
            lifts.push(lift);
        }

        let spec = ExtensionSpec::with_flags(
            Fiber::Free { rank: fiber_subgroup.rank() },
            Actions::Certified(restricted),
            false,
            self.nonfibering != NonfiberingEvidence::Unknown,
        )?;
        Ok(SubExtension {
            spec,
            fiber_subgroup,
            base_image,
            base_lifts: lifts,
            index_in_group: table.degree(),
        })
    }
}

/// Shortest word in the fiber letters moving coset 0 to `target`,
/// breadth-first with the usual direction order.
fn fiber_word_to(table: &CosetTable, m: usize, target: usize) -> Result<Word> {
    let d = table.degree();
    let mut prev: Vec<Option<(usize, Letter)>> = vec![None; d];
    let mut seen = vec![false; d];
    seen[0] = true;
    let mut queue = vec![0usize];
    let mut qi = 0;
    while qi < queue.len() {
        let c = queue[qi];
        qi += 1;
        if c == target {
            break;
        }
        for g in 1..=m {
            for positive in [true, false] {
                let l = if positive { Letter::gen(g) } else { Letter::inv_gen(g) };
                let t = table.step(c, l);
                if !seen[t] {
                    seen[t] = true;
                    prev[t] = Some((c, l));
                    queue.push(t);
                }
            }
        }
    }
    if !seen[target] {
        return Err(Error::TableMismatch);
    }
    let mut letters = Vec::new();
    let mut cur = target;
    while let Some((c, l)) = prev[cur] {
        letters.push(l);
        cur = c;
    }
    letters.reverse();
    Ok(Word::reduce(letters))
}

/// A finite-index subgroup of an extension, again in extension form.
#[derive(Clone, Debug)]
pub struct SubExtension {
    pub spec: ExtensionSpec,
    /// `L = K ∩ H` as a subgroup of the fiber.
    pub fiber_subgroup: SubgroupGraph,
    /// `π(K)` as a subgroup of the base.
    pub base_image: SubgroupGraph,
    /// Chosen lifts of the base-image basis, as words in the semidirect
    /// presentation's letters (fiber gens first).
    pub base_lifts: Vec<Word>,
    pub index_in_group: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(letters: &[i32]) -> Word {
        Word::from_signed(letters)
    }

    fn auto(images: &[&[i32]]) -> Automorphism {
        let rank = images.len();
        let endo = Endomorphism::new(rank, images.iter().map(|i| w(i)).collect()).unwrap();
        certify_automorphism(&endo).unwrap()
    }

    fn lam() -> Automorphism {
        auto(&[&[1, 2], &[2]])
    }

    fn rho() -> Automorphism {
        auto(&[&[1], &[2, 1]])
    }

    fn f2xf2() -> ExtensionSpec {
        let id = Automorphism::identity(2);
        ExtensionSpec::new(Fiber::Free { rank: 2 }, Actions::Certified(vec![id.clone(), id])).unwrap()
    }

    #[test]
    fn presentation_basics() {
        let p = Presentation::new(2, vec![w(&[2, 1, -2, -1]), w(&[1, -1])]).unwrap();
        assert_eq!(p.relators().len(), 1);
        assert_eq!(p.abelianization(), AbelianGroupShape::free(2));

        let torsion = Presentation::new(1, vec![w(&[1, 1])]).unwrap();
        assert_eq!(torsion.abelianization().to_string(), "Z/2");
    }

    #[test]
    fn semidirect_presentation_f2xf2() {
        let p = f2xf2().semidirect_presentation().unwrap();
        assert_eq!(p.n_generators(), 4);
        // Four commutators [tᵢ, aⱼ].
        assert_eq!(p.relators().len(), 4);
        assert_eq!(p.relators()[0], w(&[3, 1, -3, -1]));
        assert_eq!(p.abelianization(), AbelianGroupShape::free(4));
    }

    #[test]
    fn semidirect_presentation_klein_bottle() {
        let flip = auto(&[&[-1]]);
        let e = ExtensionSpec::new(Fiber::Free { rank: 1 }, Actions::Certified(vec![flip])).unwrap();
        let p = e.semidirect_presentation().unwrap();
        assert_eq!(p.n_generators(), 2);
        assert_eq!(p.relators(), &[w(&[2, 1, -2, 1])]);
        assert_eq!(e.h1().to_string(), "Z + Z/2");
    }

    #[test]
    fn extension_h1_examples() {
        assert_eq!(f2xf2().h1(), AbelianGroupShape::free(4));

        let e = ExtensionSpec::new(
            Fiber::Free { rank: 2 },
            Actions::Certified(vec![lam().compose(&lam()).unwrap(), rho()]),
        )
        .unwrap();
        assert_eq!(e.h1().to_string(), "Z^2 + Z/2");
        assert_eq!(e.h1(), e.semidirect_presentation().unwrap().abelianization());
    }

    #[test]
    fn low_index_free_groups() {
        let f2 = Presentation::free(2);
        let tables = low_index(&f2, 2);
        assert_eq!(tables.len(), 4);
        assert_eq!(tables.iter().filter(|t| t.degree() == 1).count(), 1);
        assert_eq!(tables.iter().filter(|t| t.degree() == 2).count(), 3);

        let tables3 = low_index(&f2, 3);
        let classes3: Vec<&CosetTable> = tables3.iter().filter(|t| t.degree() == 3).collect();
        assert_eq!(classes3.len(), 7);
        let subgroups: usize = classes3.iter().map(|t| t.subgroups_in_class()).sum();
        assert_eq!(subgroups, 13);
    }

    #[test]
    fn low_index_z_mod_2() {
        let p = Presentation::new(1, vec![w(&[1, 1])]).unwrap();
        let tables = low_index(&p, 2);
        assert_eq!(tables.len(), 2);
        assert!(tables.iter().all(|t| t.satisfies(&p)));
    }

    #[test]
    fn low_index_respects_relators() {
        // Z = ⟨a, b | b⟩ has exactly one subgroup per index.
        let p = Presentation::new(2, vec![w(&[2])]).unwrap();
        for d in 1..=4 {
            let at_d = low_index(&p, d).into_iter().filter(|t| t.degree() == d).count();
            assert_eq!(at_d, 1);
        }
    }

    #[test]
    fn reidemeister_schreier_index_two_in_f2() {
        let f2 = Presentation::free(2);
        // b-parity table: a fixes both cosets, b swaps them.
        let t = CosetTable::new(2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        let data = reidemeister_schreier(&f2, &t).unwrap();
        assert_eq!(data.presentation.n_generators(), 3);
        assert!(data.presentation.relators().is_empty());
        assert_eq!(data.generators, vec![w(&[1]), w(&[2, 1, -2]), w(&[2, 2])]);
        assert_eq!(data.transversal, vec![Word::identity(), w(&[2])]);
    }

    #[test]
    fn reidemeister_schreier_index_one() {
        let p = Presentation::new(2, vec![w(&[1, 2, -1, -2])]).unwrap();
        let t = CosetTable::new(2, vec![vec![0], vec![0]]).unwrap();
        let data = reidemeister_schreier(&p, &t).unwrap();
        assert_eq!(data.presentation, p);
        assert_eq!(data.generators, vec![w(&[1]), w(&[2])]);
    }

    #[test]
    fn rs_abelianization_matches_extension_h1() {
        // F₂×F₂ at the fiber b-parity subgroup: H₁ = Z⁵.
        let e = f2xf2();
        let p = e.semidirect_presentation().unwrap();
        // a, s, t fix cosets; b swaps.
        let t = CosetTable::new(
            4,
            vec![vec![0, 1], vec![1, 0], vec![0, 1], vec![0, 1]],
        )
        .unwrap();
        assert!(t.satisfies(&p));
        let data = reidemeister_schreier(&p, &t).unwrap();
        assert_eq!(data.presentation.abelianization(), AbelianGroupShape::free(5));

        let sub = e.sub_extension(&t).unwrap();
        assert_eq!(sub.spec.h1(), AbelianGroupShape::free(5));
        assert_eq!(sub.fiber_subgroup.rank(), 3);
        assert_eq!(sub.base_image.rank(), 2);
    }

    #[test]
    fn sub_extension_index_one_is_identity() {
        let e = ExtensionSpec::new(
            Fiber::Free { rank: 2 },
            Actions::Certified(vec![lam().compose(&lam()).unwrap(), rho()]),
        )
        .unwrap();
        let p = e.semidirect_presentation().unwrap();
        let t = CosetTable::new(4, vec![vec![0]; 4]).unwrap();
        assert!(t.satisfies(&p));
        let sub = e.sub_extension(&t).unwrap();
        assert_eq!(sub.spec, e);
    }

    #[test]
    fn sub_extension_fiber_side_reproduces_phi_matrices() {
        // F₂ ⋊_{λ², ρ} F₂, restricted to the fiber b-parity subgroup.
        let e = ExtensionSpec::new(
            Fiber::Free { rank: 2 },
            Actions::Certified(vec![lam().compose(&lam()).unwrap(), rho()]),
        )
        .unwrap();
        let p = e.semidirect_presentation().unwrap();
        let t = CosetTable::new(4, vec![vec![0, 1], vec![1, 0], vec![0, 1], vec![0, 1]]).unwrap();
        assert!(t.satisfies(&p));
        let sub = e.sub_extension(&t).unwrap();
        assert_eq!(sub.spec.base_rank(), 2);
        assert_eq!(sub.spec.h1(), AbelianGroupShape::free(3));
        // Homology agrees with Reidemeister–Schreier on the same table.
        let data = reidemeister_schreier(&p, &t).unwrap();
        assert_eq!(data.presentation.abelianization(), AbelianGroupShape::free(3));
    }

    #[test]
    fn rs_transversal_choice_does_not_change_homology() {
        let e = ExtensionSpec::new(
            Fiber::Free { rank: 2 },
            Actions::Certified(vec![lam(), rho()]),
        )
        .unwrap();
        let p = e.semidirect_presentation().unwrap();
        for t in low_index(&p, 3) {
            let bfs = reidemeister_schreier_with(&p, &t, TransversalStyle::Bfs).unwrap();
            let dfs = reidemeister_schreier_with(&p, &t, TransversalStyle::Dfs).unwrap();
            assert_eq!(
                bfs.presentation.abelianization(),
                dfs.presentation.abelianization()
            );
        }
    }

    #[test]
    fn coset_table_class_counting() {
        // The three index-2 subgroups of F₂ are all normal.
        let f2 = Presentation::free(2);
        for t in low_index(&f2, 2).iter().filter(|t| t.degree() == 2) {
            assert_eq!(t.subgroups_in_class(), 1);
        }
    }
}
