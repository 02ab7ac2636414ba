//! Folded subgroup graphs for finitely generated subgroups of free groups.
//!
//! A [`SubgroupGraph`] is the core of the folded graph obtained by wedging
//! loops for the generators at a base vertex and folding until no vertex has
//! two equally labeled edges in the same direction. It decides membership,
//! computes the index, carries a deterministic Nielsen–Schreier basis, and
//! rewrites subgroup elements over that basis.
//!
//! Deterministic conventions used throughout the crate:
//!
//! * vertices are renumbered breadth-first from the base vertex, scanning
//!   each vertex's directions in the order `g₁, g₁⁻¹, g₂, g₂⁻¹, …`;
//! * the spanning tree consists of the BFS discovery edges;
//! * the basis enumerates non-tree positive edges in vertex-major,
//!   label-minor order.
//!
//! Two graphs built this way are equal as subgroups iff they are equal as
//! values, so `PartialEq`/`Hash` double as subgroup equality.

use std::collections::{BTreeSet, HashMap};

use crate::words::{Letter, Word};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubgroupGraph {
    ambient_rank: usize,
    /// `succ[v][g-1]`: endpoint of the g-labeled edge leaving `v`.
    succ: Vec<Vec<Option<usize>>>,
    /// `pred[v][g-1]`: source of the g-labeled edge entering `v`.
    pred: Vec<Vec<Option<usize>>>,
    /// BFS tree: `tree[v] = (parent, letter read from parent to v)`.
    tree: Vec<Option<(usize, Letter)>>,
    /// Non-tree positive edges `(u, g, v)` in canonical order; one basis
    /// element each.
    nontree: Vec<(usize, usize, usize)>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[drop] = keep;
        }
    }
}

impl SubgroupGraph {
    /// Folds the subgroup generated by `generators` inside the free group of
    /// the given rank.
    pub fn fold(generators: &[Word], ambient_rank: usize) -> Result<SubgroupGraph> {
        for w in generators {
            if w.max_index() > ambient_rank {
                return Err(Error::GeneratorOutOfRange { index: w.max_index(), rank: ambient_rank });
            }
        }
        let mut edges: Vec<(usize, usize, usize)> = Vec::new();
        let mut next = 1usize;
        for w in generators {
            if w.is_empty() {
                continue;
            }
            let mut cur = 0usize;
            for (i, &l) in w.letters().iter().enumerate() {
                let tgt = if i + 1 == w.len() { 0 } else { next };
                if i + 1 != w.len() {
                    next += 1;
                }
                if l.is_positive() {
                    edges.push((cur, l.index(), tgt));
                } else {
                    edges.push((tgt, l.index(), cur));
                }
                cur = tgt;
            }
        }
        Ok(build(edges, next, ambient_rank))
    }

    /// The whole free group: the rose with one loop per generator.
    pub fn whole_group(ambient_rank: usize) -> SubgroupGraph {
        let gens: Vec<Word> = (1..=ambient_rank).map(Word::gen).collect();
        SubgroupGraph::fold(&gens, ambient_rank).expect("rose always folds")
    }

    /// The trivial subgroup.
    pub fn trivial(ambient_rank: usize) -> SubgroupGraph {
        SubgroupGraph::fold(&[], ambient_rank).expect("empty fold")
    }

    /// Schreier graph of a permutation action: vertices are the orbit of
    /// `base` under the listed permutations (one per generator), edges
    /// `c → perms[g-1][c]`. This is already folded and complete on its orbit.
    pub(crate) fn from_permutation_action(
        perms: &[Vec<usize>],
        base: usize,
        ambient_rank: usize,
    ) -> SubgroupGraph {
        assert_eq!(perms.len(), ambient_rank);
        let n = perms.first().map_or(0, Vec::len);
        let mut inverse: Vec<Vec<usize>> = vec![vec![0; n]; ambient_rank];
        for (g, p) in perms.iter().enumerate() {
            for (c, &t) in p.iter().enumerate() {
                inverse[g][t] = c;
            }
        }
        let mut in_orbit = vec![false; n.max(base + 1)];
        let mut orbit = vec![base];
        in_orbit[base] = true;
        let mut i = 0;
        while i < orbit.len() {
            let c = orbit[i];
            i += 1;
            for g in 0..ambient_rank {
                for t in [perms[g][c], inverse[g][c]] {
                    if !in_orbit[t] {
                        in_orbit[t] = true;
                        orbit.push(t);
                    }
                }
            }
        }
        let mut id = vec![usize::MAX; n.max(base + 1)];
        for (k, &c) in orbit.iter().enumerate() {
            id[c] = k;
        }
        let mut edges = Vec::new();
        for &c in &orbit {
            for g in 0..ambient_rank {
                edges.push((id[c], g + 1, id[perms[g][c]]));
            }
        }
        build(edges, orbit.len(), ambient_rank)
    }

    pub fn ambient_rank(&self) -> usize {
        self.ambient_rank
    }

    pub fn vertex_count(&self) -> usize {
        self.succ.len()
    }

    /// Rank of the subgroup (number of basis elements).
    pub fn rank(&self) -> usize {
        self.nontree.len()
    }

    fn step(&self, v: usize, l: Letter) -> Option<usize> {
        if l.is_positive() {
            self.succ[v][l.index() - 1]
        } else {
            self.pred[v][l.index() - 1]
        }
    }

    /// True iff `w` labels a base-to-base path.
    pub fn contains(&self, w: &Word) -> bool {
        if w.max_index() > self.ambient_rank {
            return false;
        }
        let mut cur = 0usize;
        for &l in w.letters() {
            match self.step(cur, l) {
                Some(t) => cur = t,
                None => return false,
            }
        }
        cur == 0
    }

    /// Index in the ambient free group: the vertex count when the graph is
    /// complete, `None` (infinite) otherwise.
    pub fn index_in_ambient(&self) -> Option<usize> {
        let complete = self
            .succ
            .iter()
            .zip(&self.pred)
            .all(|(s, p)| s.iter().all(Option::is_some) && p.iter().all(Option::is_some));
        complete.then_some(self.succ.len())
    }

    /// Tree path from the base to `v`, as a word.
    fn path_from_base(&self, v: usize) -> Word {
        let mut letters = Vec::new();
        let mut cur = v;
        while let Some((parent, l)) = self.tree[cur] {
            letters.push(l);
            cur = parent;
        }
        letters.reverse();
        Word::reduce(letters)
    }

    /// Deterministic Nielsen–Schreier basis, one word per non-tree edge.
    pub fn basis(&self) -> Vec<Word> {
        self.nontree
            .iter()
            .map(|&(u, g, v)| {
                self.path_from_base(u)
                    .concat(&Word::gen(g))
                    .concat(&self.path_from_base(v).inverse())
            })
            .collect()
    }

    /// Rewrites a subgroup element as a word over the basis alphabet.
    pub fn rewrite(&self, w: &Word) -> Result<Word> {
        let mut index_of: HashMap<(usize, usize, usize), usize> = HashMap::new();
        for (i, &e) in self.nontree.iter().enumerate() {
            index_of.insert(e, i + 1);
        }
        let mut out = Vec::new();
        let mut cur = 0usize;
        for &l in w.letters() {
            if l.index() > self.ambient_rank {
                return Err(Error::NotInSubgroup);
            }
            let t = self.step(cur, l).ok_or(Error::NotInSubgroup)?;
            let edge = if l.is_positive() { (cur, l.index(), t) } else { (t, l.index(), cur) };
            if let Some(&i) = index_of.get(&edge) {
                out.push(if l.is_positive() { Letter::gen(i) } else { Letter::inv_gen(i) });
            }
            cur = t;
        }
        if cur != 0 {
            return Err(Error::NotInSubgroup);
        }
        Ok(Word::reduce(out))
    }

    /// Core of the product graph at the base pair: the intersection.
    pub fn intersect(&self, other: &SubgroupGraph) -> Result<SubgroupGraph> {
        if self.ambient_rank != other.ambient_rank {
            return Err(Error::RankMismatch { left: self.ambient_rank, right: other.ambient_rank });
        }
        let mut id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut pairs = vec![(0usize, 0usize)];
        id.insert((0, 0), 0);
        let mut edges = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let (a, b) = pairs[i];
            i += 1;
            for g in 1..=self.ambient_rank {
                for positive in [true, false] {
                    let l = if positive { Letter::gen(g) } else { Letter::inv_gen(g) };
                    let (Some(ta), Some(tb)) = (self.step(a, l), other.step(b, l)) else {
                        continue;
                    };
                    let next_id = id.len();
                    let t = *id.entry((ta, tb)).or_insert_with(|| {
                        pairs.push((ta, tb));
                        next_id
                    });
                    let s = id[&(a, b)];
                    if positive {
                        edges.push((s, g, t));
                    } else {
                        edges.push((t, g, s));
                    }
                }
            }
        }
        Ok(build(edges, pairs.len(), self.ambient_rank))
    }

    /// Folded graph of the subgroup generated by the images of the basis
    /// under the substitution `generator i ↦ images[i-1]`.
    pub fn image(&self, images: &[Word]) -> Result<SubgroupGraph> {
        let mapped: Result<Vec<Word>> = self.basis().iter().map(|b| b.substitute(images)).collect();
        SubgroupGraph::fold(&mapped?, self.ambient_rank)
    }

    /// The conjugate subgroup `g · H · g⁻¹`.
    pub fn conjugated(&self, g: &Word) -> Result<SubgroupGraph> {
        let words: Vec<Word> = self.basis().iter().map(|b| b.conjugated_by(g)).collect();
        SubgroupGraph::fold(&words, self.ambient_rank)
    }

    /// Canonical adjacency text, for golden tests and diagnostics.
    pub fn adjacency_text(&self) -> String {
        let mut out = format!("rank {}\n", self.ambient_rank);
        for v in 0..self.succ.len() {
            out.push_str(&v.to_string());
            for g in 1..=self.ambient_rank {
                match self.succ[v][g - 1] {
                    Some(t) => out.push_str(&format!(" {g}:{t}")),
                    None => out.push_str(&format!(" {g}:-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Folds, trims to the pointed core, and renumbers canonically.
fn build(edges: Vec<(usize, usize, usize)>, n_vertices: usize, ambient_rank: usize) -> SubgroupGraph {
    let mut uf = UnionFind::new(n_vertices.max(1));
    let mut edge_set: BTreeSet<(usize, usize, usize)> = edges.into_iter().collect();

    // Fold: identify endpoints of equally labeled edges sharing a source or
    // a target, until none remain.
    loop {
        let resolved: BTreeSet<(usize, usize, usize)> =
            edge_set.iter().map(|&(u, g, v)| (uf.find(u), g, uf.find(v))).collect();
        let mut merge: Option<(usize, usize)> = None;
        let mut prev: Option<(usize, usize, usize)> = None;
        for &(u, g, v) in &resolved {
            if let Some((pu, pg, pv)) = prev {
                if pu == u && pg == g {
                    merge = Some((pv, v));
                    break;
                }
            }
            prev = Some((u, g, v));
        }
        if merge.is_none() {
            let mut by_target: Vec<(usize, usize, usize)> =
                resolved.iter().map(|&(u, g, v)| (v, g, u)).collect();
            by_target.sort_unstable();
            let mut prev: Option<(usize, usize, usize)> = None;
            for &(v, g, u) in &by_target {
                if let Some((pv, pg, pu)) = prev {
                    if pv == v && pg == g {
                        merge = Some((pu, u));
                        break;
                    }
                }
                prev = Some((v, g, u));
            }
        }
        match merge {
            Some((a, b)) => {
                uf.union(a, b);
                edge_set = resolved;
            }
            None => {
                edge_set = resolved;
                break;
            }
        }
    }

    // Trim hanging trees: repeatedly drop non-base vertices of degree ≤ 1.
    let base = uf.find(0);
    loop {
        let mut degree: HashMap<usize, usize> = HashMap::new();
        for &(u, _, v) in &edge_set {
            *degree.entry(u).or_insert(0) += 1;
            *degree.entry(v).or_insert(0) += 1;
        }
        let before = edge_set.len();
        edge_set.retain(|&(u, _, v)| {
            let dead = |x: usize| x != base && degree.get(&x).copied().unwrap_or(0) <= 1;
            !dead(u) && !dead(v)
        });
        if edge_set.len() == before {
            break;
        }
    }

    // Canonical BFS renumbering from the base vertex.
    let mut succ_raw: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pred_raw: HashMap<(usize, usize), usize> = HashMap::new();
    for &(u, g, v) in &edge_set {
        succ_raw.insert((u, g), v);
        pred_raw.insert((v, g), u);
    }
    let mut order: Vec<usize> = vec![base];
    let mut new_id: HashMap<usize, usize> = HashMap::new();
    new_id.insert(base, 0);
    let mut tree: Vec<Option<(usize, Letter)>> = vec![None];
    let mut i = 0;
    while i < order.len() {
        let v = order[i];
        i += 1;
        for g in 1..=ambient_rank {
            let steps = [
                (succ_raw.get(&(v, g)).copied(), Letter::gen(g)),
                (pred_raw.get(&(v, g)).copied(), Letter::inv_gen(g)),
            ];
            for (tgt, letter) in steps {
                let Some(t) = tgt else { continue };
                if !new_id.contains_key(&t) {
                    new_id.insert(t, order.len());
                    order.push(t);
                    tree.push(Some((new_id[&v], letter)));
                }
            }
        }
    }

    let n = order.len();
    let mut succ = vec![vec![None; ambient_rank]; n];
    let mut pred = vec![vec![None; ambient_rank]; n];
    for &(u, g, v) in &edge_set {
        succ[new_id[&u]][g - 1] = Some(new_id[&v]);
        pred[new_id[&v]][g - 1] = Some(new_id[&u]);
    }

    // Tree edges as positive-edge triples.
    let mut tree_edges: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for (v, entry) in tree.iter().enumerate() {
        if let Some((parent, l)) = entry {
            if l.is_positive() {
                tree_edges.insert((*parent, l.index(), v));
            } else {
                tree_edges.insert((v, l.index(), *parent));
            }
        }
    }
    let mut nontree = Vec::new();
    for u in 0..n {
        for g in 1..=ambient_rank {
            if let Some(v) = succ[u][g - 1] {
                if !tree_edges.contains(&(u, g, v)) {
                    nontree.push((u, g, v));
                }
            }
        }
    }

    SubgroupGraph { ambient_rank, succ, pred, tree, nontree }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(letters: &[i32]) -> Word {
        Word::from_signed(letters)
    }

    /// The index-two subgroup ⟨a, b², bab⁻¹⟩ of F₂.
    fn h_even_b() -> SubgroupGraph {
        SubgroupGraph::fold(&[w(&[1]), w(&[2, 2]), w(&[2, 1, -2])], 2).unwrap()
    }

    #[test]
    fn fold_even_b_subgroup() {
        let h = h_even_b();
        assert_eq!(h.vertex_count(), 2);
        assert_eq!(h.index_in_ambient(), Some(2));
        assert_eq!(h.rank(), 3);
    }

    #[test]
    fn fold_whole_group_and_cyclic() {
        let rose = SubgroupGraph::fold(&[w(&[1]), w(&[2])], 2).unwrap();
        assert_eq!(rose.vertex_count(), 1);
        assert_eq!(rose.index_in_ambient(), Some(1));
        assert_eq!(rose, SubgroupGraph::whole_group(2));

        let sq = SubgroupGraph::fold(&[w(&[1, 1])], 2).unwrap();
        assert_eq!(sq.vertex_count(), 2);
        assert_eq!(sq.index_in_ambient(), None);
        assert_eq!(sq.rank(), 1);
        assert_eq!(sq.basis(), vec![w(&[1, 1])]);
    }

    #[test]
    fn membership() {
        let h = h_even_b();
        assert!(h.contains(&w(&[1])));
        assert!(!h.contains(&w(&[2])));
        assert!(h.contains(&Word::identity()));
        assert!(h.contains(&w(&[2, 1, 1, 2])));
        assert!(!h.contains(&w(&[2, 1, 1])));
    }

    #[test]
    fn nielsen_schreier_rank() {
        let h = h_even_b();
        let index = h.index_in_ambient().unwrap();
        assert_eq!(h.rank() - 1, index * (2 - 1));
    }

    #[test]
    fn basis_matches_generators_as_a_set() {
        let h = h_even_b();
        let basis = h.basis();
        assert_eq!(basis.len(), 3);
        for b in &basis {
            assert!(h.contains(b));
        }
        // Deterministic convention: a, then the loop at the far vertex, then
        // the return edge.
        assert_eq!(basis, vec![w(&[1]), w(&[2, 1, -2]), w(&[2, 2])]);

        assert_eq!(SubgroupGraph::whole_group(2).basis(), vec![w(&[1]), w(&[2])]);
        assert!(SubgroupGraph::trivial(2).basis().is_empty());
    }

    #[test]
    fn rewrite_round_trip() {
        let h = h_even_b();
        let basis = h.basis();
        for u in [w(&[2, 1, 2, 1]), w(&[1, 2, 2]), Word::identity(), w(&[2, 1, 1, -2, 1])] {
            let r = h.rewrite(&u).unwrap();
            assert_eq!(r.substitute(&basis).unwrap(), u);
        }
        assert!(h.rewrite(&w(&[2])).is_err());
    }

    #[test]
    fn rewrite_known_words() {
        let h = h_even_b();
        // basis order (x, z, y) = (a, bab⁻¹, b²)
        assert_eq!(h.rewrite(&w(&[2, 1, 2, 1])).unwrap(), w(&[2, 3, 1]));
        assert_eq!(h.rewrite(&w(&[1, 2, 2])).unwrap(), w(&[1, 3]));
        assert_eq!(h.rewrite(&Word::identity()).unwrap(), Word::identity());
    }

    #[test]
    fn intersection_examples() {
        let h = h_even_b();
        let rose = SubgroupGraph::whole_group(2);
        assert_eq!(h.intersect(&rose).unwrap(), h);

        let a = SubgroupGraph::fold(&[w(&[1])], 2).unwrap();
        let b = SubgroupGraph::fold(&[w(&[2])], 2).unwrap();
        assert_eq!(a.intersect(&b).unwrap(), SubgroupGraph::trivial(2));

        let k = SubgroupGraph::fold(&[w(&[2]), w(&[1, 1]), w(&[1, 2, -1])], 2).unwrap();
        let meet = h.intersect(&k).unwrap();
        assert_eq!(meet.index_in_ambient(), Some(4));
        assert!(meet.contains(&w(&[1, 1])));
        assert!(meet.contains(&w(&[2, 2])));
        assert!(!meet.contains(&w(&[1])));
        assert!(!meet.contains(&w(&[1, 2])));
    }

    #[test]
    fn image_under_substitution() {
        let h = h_even_b();
        // λ: a ↦ ab, b ↦ b sends H to the even-total-exponent subgroup.
        let lam = [w(&[1, 2]), w(&[2])];
        let img = h.image(&lam).unwrap();
        assert_ne!(img, h);
        assert_eq!(img.index_in_ambient(), Some(2));
        assert_eq!(img, SubgroupGraph::fold(&[w(&[1, 2]), w(&[2, 2]), w(&[2, 1])], 2).unwrap());

        // ρ: a ↦ a, b ↦ ba preserves H.
        let rho = [w(&[1]), w(&[2, 1])];
        assert_eq!(h.image(&rho).unwrap(), h);

        let id = [w(&[1]), w(&[2])];
        assert_eq!(h.image(&id).unwrap(), h);
    }

    #[test]
    fn conjugates_and_stem_graphs() {
        let z = SubgroupGraph::fold(&[w(&[2, 1, -2])], 2).unwrap();
        // bab⁻¹ needs a stem of length one plus a loop.
        assert_eq!(z.vertex_count(), 2);
        assert!(z.contains(&w(&[2, 1, -2])));
        assert!(!z.contains(&w(&[1])));

        let back = z.conjugated(&w(&[-2])).unwrap();
        assert_eq!(back, SubgroupGraph::fold(&[w(&[1])], 2).unwrap());
    }

    #[test]
    fn permutation_action_graph() {
        // Z/2 action of b, trivial action of a: the even-b subgroup.
        let perms = vec![vec![0, 1], vec![1, 0]];
        let g = SubgroupGraph::from_permutation_action(&perms, 0, 2);
        assert_eq!(g, h_even_b());
    }

    #[test]
    fn adjacency_text_is_stable() {
        let h = h_even_b();
        assert_eq!(h.adjacency_text(), "rank 2\n0 1:0 2:1\n1 1:1 2:0\n");
    }
}
