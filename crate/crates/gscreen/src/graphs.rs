//! Graph of strong dependence, connected-subgraph enumeration and component splitting.

use std::collections::VecDeque;
use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use thiserror::Error;

use crate::model::RegularizedGram;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("subgraph size bound must be at least 1")]
    ZeroSubgraphSize,
    #[error("more than {cap} connected subgraphs; the dependence graph is not sparse enough")]
    TooManySubgraphs { cap: usize },
    #[error("vertex {vertex} out of range for a graph on {p} nodes")]
    VertexOutOfRange { vertex: usize, p: usize },
}

/// Undirected graph on the predictors; sorted adjacency lists, no self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gosd {
    adjacency: Vec<Vec<usize>>,
    max_degree: usize,
}

impl Gosd {
    /// Builds a graph from an edge list, ignoring self-loops and duplicates.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut adjacency = vec![Vec::new(); p];
        for &(a, b) in edges {
            for v in [a, b] {
                if v >= p {
                    return Err(GraphError::VertexOutOfRange { vertex: v, p });
                }
            }
            if a != b {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
        Ok(Self::from_adjacency(adjacency))
    }

    fn from_adjacency(mut adjacency: Vec<Vec<usize>>) -> Self {
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Self {
            adjacency,
            max_degree,
        }
    }

    pub fn p(&self) -> usize {
        self.adjacency.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    /// Two-column CSV of edges with 1-based vertex labels.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "from,to")?;
        for (a, b) in self.edges() {
            writeln!(out, "{},{}", a + 1, b + 1)?;
        }
        Ok(())
    }

    /// Whether `set` induces a connected subgraph. The empty set is not connected.
    pub fn is_connected_set(&self, set: &[usize]) -> bool {
        if set.is_empty() {
            return false;
        }
        let mut seen = vec![false; set.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(k) = stack.pop() {
            for (m, &w) in set.iter().enumerate() {
                if !seen[m] && self.is_adjacent(set[k], w) {
                    seen[m] = true;
                    reached += 1;
                    stack.push(m);
                }
            }
        }
        reached == set.len()
    }
}

pub fn build_gosd(reg: &RegularizedGram) -> Gosd {
    let adjacency = (0..reg.p())
        .map(|i| {
            reg.row(i)
                .iter()
                .filter(|&&(j, _)| j != i)
                .map(|&(j, _)| j)
                .collect()
        })
        .collect();
    Gosd::from_adjacency(adjacency)
}

/// Connected vertex sets, each sorted, ordered by size and then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgraphList {
    sets: Vec<Vec<usize>>,
}

impl SubgraphList {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.sets.iter().map(Vec::as_slice)
    }

    pub fn get(&self, k: usize) -> &[usize] {
        &self.sets[k]
    }

    /// Count of listed sets of each size `1..=m`.
    pub fn size_histogram(&self) -> Vec<usize> {
        let largest = self.sets.last().map_or(0, Vec::len);
        let mut hist = vec![0; largest];
        for s in &self.sets {
            hist[s.len() - 1] += 1;
        }
        hist
    }

    pub fn into_sets(self) -> Vec<Vec<usize>> {
        self.sets
    }
}

/// Upper bound `p·m0·(eK)^m0` on the number of connected sets of size at most m0.
pub fn subgraph_count_bound(p: usize, m0: usize, max_degree: usize) -> f64 {
    p as f64 * m0 as f64 * (std::f64::consts::E * max_degree as f64).powi(m0 as i32)
}

/// Lists every connected vertex set of size at most `m0`.
///
/// Each seed vertex grows the sets in which it is the smallest member; a vertex enters the
/// extension frontier only through the first member of the current set that touches it,
/// so every set is produced exactly once.
pub fn enumerate_connected_subgraphs(
    g: &Gosd,
    m0: usize,
    cap: usize,
) -> Result<SubgraphList, GraphError> {
    if m0 == 0 {
        return Err(GraphError::ZeroSubgraphSize);
    }
    let total = AtomicUsize::new(0);
    let per_seed: Vec<Option<Vec<Vec<usize>>>> = (0..g.p())
        .into_par_iter()
        .map_init(
            || vec![0u32; g.p()],
            |touch, seed| {
                let mut grower = SeedGrower {
                    g,
                    seed,
                    m0,
                    cap,
                    total: &total,
                    touch,
                    current: Vec::new(),
                    found: Vec::new(),
                };
                grower.run().then_some(grower.found)
            },
        )
        .collect();
    let mut sets = Vec::with_capacity(total.load(Ordering::Relaxed).min(cap));
    for found in per_seed {
        match found {
            Some(found) => sets.extend(found),
            None => return Err(GraphError::TooManySubgraphs { cap }),
        }
    }
    if sets.len() > cap {
        return Err(GraphError::TooManySubgraphs { cap });
    }
    for s in &mut sets {
        s.sort_unstable();
    }
    sets.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(SubgraphList { sets })
}

struct SeedGrower<'a> {
    g: &'a Gosd,
    seed: usize,
    m0: usize,
    cap: usize,
    total: &'a AtomicUsize,
    /// Multiplicity with which a vertex lies in the closed neighborhood of `current`;
    /// all zero between seeds.
    touch: &'a mut Vec<u32>,
    current: Vec<usize>,
    found: Vec<Vec<usize>>,
}

impl SeedGrower<'_> {
    fn run(&mut self) -> bool {
        self.push(self.seed);
        let frontier: Vec<usize> = self
            .g
            .neighbors(self.seed)
            .iter()
            .copied()
            .filter(|&u| u > self.seed)
            .collect();
        let ok = self.extend(frontier);
        self.pop();
        ok
    }

    fn push(&mut self, v: usize) {
        self.current.push(v);
        self.touch[v] += 1;
        for &u in self.g.neighbors(v) {
            self.touch[u] += 1;
        }
    }

    fn pop(&mut self) {
        let v = self.current.pop().expect("pop on empty set");
        self.touch[v] -= 1;
        for &u in self.g.neighbors(v) {
            self.touch[u] -= 1;
        }
    }

    fn extend(&mut self, mut frontier: Vec<usize>) -> bool {
        if self.total.fetch_add(1, Ordering::Relaxed) >= self.cap {
            return false;
        }
        self.found.push(self.current.clone());
        if self.current.len() == self.m0 {
            return true;
        }
        while let Some(w) = frontier.pop() {
            let mut next = frontier.clone();
            for &u in self.g.neighbors(w) {
                if u > self.seed && self.touch[u] == 0 {
                    next.push(u);
                }
            }
            self.push(w);
            let ok = self.extend(next);
            self.pop();
            if !ok {
                return false;
            }
        }
        true
    }
}

/// Splits `subset` into the connected components of its induced subgraph.
/// Components are sorted internally and ordered by their smallest member.
pub fn components_of(g: &Gosd, subset: &[usize]) -> Result<Vec<Vec<usize>>, GraphError> {
    let p = g.p();
    let mut member = vec![false; p];
    for &v in subset {
        if v >= p {
            return Err(GraphError::VertexOutOfRange { vertex: v, p });
        }
        member[v] = true;
    }
    let mut order: Vec<usize> = subset.to_vec();
    order.sort_unstable();
    order.dedup();
    let mut visited = vec![false; p];
    let mut components = Vec::new();
    let mut queue = VecDeque::new();
    for &start in &order {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &u in g.neighbors(v) {
                if member[u] && !visited[u] {
                    visited[u] = true;
                    queue.push_back(u);
                }
            }
        }
        comp.sort_unstable();
        components.push(comp);
    }
    Ok(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{regularize_gram, GramMatrix};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn path(p: usize) -> Gosd {
        let edges: Vec<_> = (1..p).map(|i| (i - 1, i)).collect();
        Gosd::from_edges(p, &edges).unwrap()
    }

    fn brute_force(g: &Gosd, m0: usize) -> Vec<Vec<usize>> {
        let p = g.p();
        let mut out = Vec::new();
        for mask in 1u32..(1 << p) {
            if mask.count_ones() as usize > m0 {
                continue;
            }
            let set: Vec<usize> = (0..p).filter(|&v| mask & (1 << v) != 0).collect();
            if g.is_connected_set(&set) {
                out.push(set);
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        out
    }

    fn union_find_partition(g: &Gosd, subset: &[usize]) -> Vec<Vec<usize>> {
        let p = g.p();
        let mut parent: Vec<usize> = (0..p).collect();
        fn find(parent: &mut [usize], v: usize) -> usize {
            let mut root = v;
            while parent[root] != root {
                root = parent[root];
            }
            parent[v] = root;
            root
        }
        for &a in subset {
            for &b in subset {
                if g.is_adjacent(a, b) {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for &v in subset {
            let root = find(&mut parent, v);
            groups.entry(root).or_default().push(v);
        }
        let mut parts: Vec<Vec<usize>> = groups
            .into_values()
            .map(|mut c| {
                c.sort_unstable();
                c
            })
            .collect();
        parts.sort_by_key(|c| c[0]);
        parts
    }

    #[test]
    fn identity_gives_empty_graph() {
        let reg = regularize_gram(&GramMatrix::from_matrix(DMatrix::identity(5, 5)).unwrap(), 0.1)
            .unwrap();
        let g = build_gosd(&reg);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.max_degree(), 0);
    }

    #[test]
    fn block_pairs_give_perfect_matching() {
        let mut m = DMatrix::identity(6, 6);
        for b in 0..3 {
            let h = if b % 2 == 0 { 0.7 } else { -0.7 };
            m[(2 * b, 2 * b + 1)] = h;
            m[(2 * b + 1, 2 * b)] = h;
        }
        let g = build_gosd(&regularize_gram(&GramMatrix::from_matrix(m).unwrap(), 0.1174).unwrap());
        assert_eq!(g.max_degree(), 1);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (2, 3), (4, 5)]);
    }

    #[test]
    fn tridiagonal_gives_path() {
        let m = DMatrix::from_fn(5, 5, |i, j| match i.abs_diff(j) {
            0 => 1.0,
            1 => 0.4,
            _ => 0.0,
        });
        let g = build_gosd(&regularize_gram(&GramMatrix::from_matrix(m).unwrap(), 0.2).unwrap());
        assert_eq!(g, path(5));
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn path_of_three_hand_enumeration() {
        let list = enumerate_connected_subgraphs(&path(3), 2, 1000).unwrap();
        let expect: Vec<Vec<usize>> = vec![vec![0], vec![1], vec![2], vec![0, 1], vec![1, 2]];
        assert_eq!(list.into_sets(), expect);
    }

    #[test]
    fn empty_graph_lists_singletons_only() {
        let g = Gosd::from_edges(4, &[]).unwrap();
        let list = enumerate_connected_subgraphs(&g, 3, 1000).unwrap();
        assert_eq!(list.len(), 4);
        assert_eq!(list.size_histogram(), vec![4]);
    }

    #[test]
    fn cap_aborts_enumeration() {
        let edges: Vec<_> = (0..6).flat_map(|a| ((a + 1)..6).map(move |b| (a, b))).collect();
        let g = Gosd::from_edges(6, &edges).unwrap();
        let err = enumerate_connected_subgraphs(&g, 4, 20).unwrap_err();
        assert_eq!(err, GraphError::TooManySubgraphs { cap: 20 });
        assert_eq!(enumerate_connected_subgraphs(&g, 4, 56).unwrap().len(), 56);
    }

    #[test]
    fn components_on_path() {
        let g = path(4);
        assert!(components_of(&g, &[]).unwrap().is_empty());
        assert_eq!(components_of(&g, &[3, 0, 1]).unwrap(), vec![vec![0, 1], vec![3]]);
    }

    #[test]
    fn edge_list_is_one_based() {
        let mut buf = Vec::new();
        path(3).write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "from,to\n1,2\n2,3\n");
    }

    fn arb_graph(p: usize) -> impl Strategy<Value = Gosd> {
        proptest::collection::vec(proptest::bool::weighted(0.25), p * (p - 1) / 2).prop_map(
            move |bits| {
                let mut edges = Vec::new();
                let mut k = 0;
                for a in 0..p {
                    for b in (a + 1)..p {
                        if bits[k] {
                            edges.push((a, b));
                        }
                        k += 1;
                    }
                }
                Gosd::from_edges(p, &edges).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn enumeration_matches_brute_force(g in arb_graph(9), m0 in 1usize..5) {
            let list = enumerate_connected_subgraphs(&g, m0, usize::MAX).unwrap();
            prop_assert_eq!(list.clone().into_sets(), brute_force(&g, m0));
            if g.max_degree() >= 1 {
                prop_assert!(list.len() as f64 <= subgraph_count_bound(g.p(), m0, g.max_degree()));
            }
            for (k, s) in list.iter().take(g.p()).enumerate() {
                prop_assert_eq!(s, &[k][..]);
            }
        }

        #[test]
        fn components_match_union_find(g in arb_graph(12), mask in 0u32..4096) {
            let subset: Vec<usize> = (0..12).filter(|v| mask & (1 << v) != 0).collect();
            let comps = components_of(&g, &subset).unwrap();
            prop_assert_eq!(&comps, &union_find_partition(&g, &subset));
            for (a, ca) in comps.iter().enumerate() {
                prop_assert!(g.is_connected_set(ca));
                for cb in &comps[a + 1..] {
                    for &u in ca {
                        for &v in cb {
                            prop_assert!(!g.is_adjacent(u, v));
                        }
                    }
                }
            }
        }
    }
}
