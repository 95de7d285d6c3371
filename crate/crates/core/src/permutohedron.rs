//! The permutohedron of order `n`: all `n!` permutations of `1..=n`, with an
//! edge between two permutations that differ by one swap of adjacent
//! elements.
//!
//! Vertices are identified by the Lehmer-code rank of their permutation, so
//! vertex `0` is the identity and vertex `n! - 1` is the full reversal. The
//! all-pairs distance matrix is computed once at build time by breadth-first
//! search from every vertex and stored flat as bytes (the diameter never
//! exceeds 21 for the supported orders).

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use num_rational::Ratio;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::OrderDistribution;

/// Largest order for which the full graph and distance matrix are built.
pub const MAX_ORDER: usize = 7;

/// Largest order accepted by [`mahonian`]; `20!` still fits in a `u64`.
pub const MAX_MAHONIAN_ORDER: usize = 20;

/// Largest order for which [`automorphism_count`] runs.
pub const MAX_AUTOMORPHISM_ORDER: usize = 5;

/// A permutation of `1..=n`, stored as its sequence of elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<u8>);

impl Permutation {
    /// Validates that `elements` is a bijection of `1..=n`.
    pub fn new(elements: Vec<u8>) -> Result<Self> {
        let n = elements.len();
        if n == 0 || n > u8::MAX as usize {
            return Err(Error::Argument(format!("permutation length {n} out of range")));
        }
        let mut seen = vec![false; n + 1];
        for &e in &elements {
            let e = e as usize;
            if e == 0 || e > n || seen[e] {
                return Err(Error::Argument(format!(
                    "{elements:?} is not a permutation of 1..={n}"
                )));
            }
            seen[e] = true;
        }
        Ok(Permutation(elements))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((1..=n as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn elements(&self) -> &[u8] {
        &self.0
    }

    /// Lehmer-code rank in `0..n!`. The identity has rank 0 and ranks follow
    /// lexicographic order of the element sequences.
    pub fn rank(&self) -> usize {
        let n = self.0.len();
        let mut rank = 0usize;
        for i in 0..n {
            let smaller_after = self.0[i + 1..].iter().filter(|&&x| x < self.0[i]).count();
            rank = rank * (n - i) + smaller_after;
        }
        rank
    }

    /// Inverse of [`Permutation::rank`].
    pub fn from_rank(n: usize, rank: usize) -> Result<Self> {
        if n == 0 || n > MAX_MAHONIAN_ORDER {
            return Err(Error::Size { n, min: 1, max: MAX_MAHONIAN_ORDER });
        }
        let total = factorial(n);
        if rank as u64 >= total {
            return Err(Error::Argument(format!("rank {rank} out of range for n={n}")));
        }
        let mut remaining: Vec<u8> = (1..=n as u8).collect();
        let mut rest = rank as u64;
        let mut elements = Vec::with_capacity(n);
        for i in 0..n {
            let radix = factorial(n - 1 - i);
            let digit = (rest / radix) as usize;
            rest %= radix;
            elements.push(remaining.remove(digit));
        }
        Ok(Permutation(elements))
    }

    /// Number of position pairs `a < b` with `π_a > π_b`.
    pub fn inversions(&self) -> usize {
        count_inversions(&self.0)
    }

    pub fn reversed(&self) -> Self {
        Permutation(self.0.iter().rev().copied().collect())
    }

    /// Kendall-tau distance: the number of element pairs whose relative order
    /// differs between `self` and `other`.
    pub fn swap_distance(&self, other: &Permutation) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::Dimension { expected: self.len(), got: other.len() });
        }
        let mut position = vec![0u8; self.len() + 1];
        for (i, &e) in other.0.iter().enumerate() {
            position[e as usize] = i as u8;
        }
        let mapped: Vec<u8> = self.0.iter().map(|&e| position[e as usize]).collect();
        Ok(count_inversions(&mapped))
    }

    /// The permutation obtained by swapping positions `i` and `i + 1`.
    pub fn adjacent_swap(&self, i: usize) -> Self {
        let mut elements = self.0.clone();
        elements.swap(i, i + 1);
        Permutation(elements)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&e| e < 10) {
            for e in &self.0 {
                write!(f, "{e}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

fn count_inversions(seq: &[u8]) -> usize {
    let mut count = 0;
    for i in 0..seq.len() {
        for j in i + 1..seq.len() {
            if seq[i] > seq[j] {
                count += 1;
            }
        }
    }
    count
}

/// `n!` as a `u64`; callers keep `n <= 20`.
pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn binomial2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Permutohedron of order `n` with precomputed all-pairs swap distances.
#[derive(Clone, Debug)]
pub struct Permutohedron {
    n: usize,
    vertices: Vec<Permutation>,
    adjacency: Vec<Vec<usize>>,
    distances: Vec<u8>,
    d_max: usize,
}

impl Permutohedron {
    /// Builds the graph for `1 <= n <= MAX_ORDER`.
    pub fn build(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_ORDER {
            return Err(Error::Size { n, min: 1, max: MAX_ORDER });
        }
        let count = factorial(n) as usize;
        let vertices: Vec<Permutation> = (0..count)
            .map(|r| Permutation::from_rank(n, r))
            .collect::<Result<_>>()?;
        let adjacency: Vec<Vec<usize>> = vertices
            .iter()
            .map(|p| (0..n - 1).map(|i| p.adjacent_swap(i).rank()).collect())
            .collect();

        let rows: Vec<Vec<u8>> = (0..count)
            .into_par_iter()
            .map(|source| bfs(&adjacency, source))
            .collect();
        let distances: Vec<u8> = rows.into_iter().flatten().collect();
        let d_max = distances.iter().copied().max().unwrap_or(0) as usize;

        Ok(Permutohedron { n, vertices, adjacency, distances, d_max })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// `N = n!`.
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, v: usize) -> &Permutation {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Permutation] {
        &self.vertices
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn is_adjacent(&self, u: usize, v: usize) -> bool {
        self.distance(u, v) == 1
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v`, in increasing order of `u` then `v`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.edge_count());
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            let mut higher: Vec<usize> = nbrs.iter().copied().filter(|&v| v > u).collect();
            higher.sort_unstable();
            edges.extend(higher.into_iter().map(|v| (u, v)));
        }
        edges
    }

    #[inline]
    pub fn distance(&self, u: usize, v: usize) -> usize {
        self.distances[u * self.vertices.len() + v] as usize
    }

    pub fn distance_row(&self, u: usize) -> &[u8] {
        let n = self.vertices.len();
        &self.distances[u * n..(u + 1) * n]
    }

    /// Diameter, equal to `C(n, 2)`.
    pub fn d_max(&self) -> usize {
        self.d_max
    }

    /// Vertex id of the reversed order.
    pub fn reversal(&self, v: usize) -> usize {
        self.vertices[v].reversed().rank()
    }

    pub fn vertex_of(&self, p: &Permutation) -> Result<usize> {
        if p.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: p.len() });
        }
        Ok(p.rank())
    }

    /// Number of vertices at each distance `0..=d_max` from `v`.
    pub fn distance_histogram(&self, v: usize) -> Vec<u64> {
        let mut hist = vec![0u64; self.d_max + 1];
        for &d in self.distance_row(v) {
            hist[d as usize] += 1;
        }
        hist
    }

    /// Mean distance over ordered pairs and over unordered pairs of distinct
    /// vertices, as exact fractions summed from the distance matrix.
    pub fn mean_distances(&self) -> (Ratio<u64>, Ratio<u64>) {
        let n = self.vertices.len() as u64;
        let total: u64 = self.distances.iter().map(|&d| d as u64).sum();
        let op = Ratio::new(total, n * n);
        let up = if n > 1 {
            Ratio::new(total, n * (n - 1))
        } else {
            Ratio::from_integer(0)
        };
        (op, up)
    }

    /// Graphviz rendering. With weights, each vertex carries `p_i` and each
    /// edge `p_i * p_j`.
    pub fn export_dot(&self, weights: Option<&OrderDistribution>) -> Result<String> {
        let probs = match weights {
            Some(d) => {
                if d.len() != self.vertex_count() {
                    return Err(Error::Dimension { expected: self.vertex_count(), got: d.len() });
                }
                Some(d.probabilities())
            }
            None => None,
        };
        let label = |v: usize| match weights {
            Some(d) => d.vertex_label(self.vertex(v)),
            None => self.vertex(v).to_string(),
        };

        let mut out = String::new();
        writeln!(out, "graph permutohedron_{} {{", self.n).unwrap();
        for v in 0..self.vertex_count() {
            match &probs {
                Some(p) => writeln!(out, "  \"{}\" [weight={}];", label(v), p[v]).unwrap(),
                None => writeln!(out, "  \"{}\";", label(v)).unwrap(),
            }
        }
        for (u, v) in self.edges() {
            match &probs {
                Some(p) => {
                    writeln!(out, "  \"{}\" -- \"{}\" [weight={}];", label(u), label(v), p[u] * p[v])
                        .unwrap()
                }
                None => writeln!(out, "  \"{}\" -- \"{}\";", label(u), label(v)).unwrap(),
            }
        }
        out.push_str("}\n");
        Ok(out)
    }
}

fn bfs(adjacency: &[Vec<usize>], source: usize) -> Vec<u8> {
    let mut dist = vec![u8::MAX; adjacency.len()];
    let mut queue = VecDeque::with_capacity(adjacency.len());
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let next = dist[u] + 1;
        for &v in &adjacency[u] {
            if dist[v] == u8::MAX {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Mahonian numbers `T(n, k)`: permutations of `n` elements with `k`
/// inversions, for `k` in `0..=C(n, 2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MahonianTable {
    pub n: usize,
    pub counts: Vec<u64>,
}

impl MahonianTable {
    pub fn get(&self, k: usize) -> u64 {
        self.counts.get(k).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `Σ_k T(n, k) · k`.
    pub fn weighted_sum(&self) -> u64 {
        self.counts.iter().enumerate().map(|(k, &c)| c * k as u64).sum()
    }
}

/// Builds row `n` with `T(n, k) = Σ_{j=0}^{n-1} T(n-1, k-j)` from `T(1, 0) = 1`.
pub fn mahonian(n: usize) -> Result<MahonianTable> {
    if n == 0 || n > MAX_MAHONIAN_ORDER {
        return Err(Error::Size { n, min: 1, max: MAX_MAHONIAN_ORDER });
    }
    let mut row = vec![1u64];
    for order in 2..=n {
        let width = binomial2(order) + 1;
        let mut next = vec![0u64; width];
        for (k, slot) in next.iter_mut().enumerate() {
            *slot = (0..order)
                .filter(|&j| j <= k)
                .map(|j| row.get(k - j).copied().unwrap_or(0))
                .sum();
        }
        row = next;
    }
    Ok(MahonianTable { n, counts: row })
}

/// Number of graph automorphisms, by backtracking over vertex images in BFS
/// order. A candidate image must keep every distance to already-mapped
/// vertices and must have the same distance profile as its preimage.
pub fn automorphism_count(g: &Permutohedron) -> Result<u64> {
    if g.order() > MAX_AUTOMORPHISM_ORDER {
        return Err(Error::Size { n: g.order(), min: 1, max: MAX_AUTOMORPHISM_ORDER });
    }
    let count = g.vertex_count();
    let profiles: Vec<Vec<u64>> = (0..count).map(|v| g.distance_histogram(v)).collect();

    // BFS order from vertex 0, each vertex after its BFS parent.
    let mut order = Vec::with_capacity(count);
    let mut parent = vec![usize::MAX; count];
    let mut seen = vec![false; count];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }

    struct Search<'a> {
        g: &'a Permutohedron,
        profiles: &'a [Vec<u64>],
        order: &'a [usize],
        parent: &'a [usize],
        image: Vec<usize>,
        used: Vec<bool>,
        found: u64,
    }

    impl Search<'_> {
        fn extend(&mut self, depth: usize) {
            if depth == self.order.len() {
                self.found += 1;
                return;
            }
            let x = self.order[depth];
            let candidates: Vec<usize> = if depth == 0 {
                (0..self.g.vertex_count()).collect()
            } else {
                self.g.neighbors(self.image[self.parent[x]]).to_vec()
            };
            for y in candidates {
                if self.used[y] || self.profiles[x] != self.profiles[y] {
                    continue;
                }
                let consistent = self.order[..depth]
                    .iter()
                    .all(|&u| self.g.distance(x, u) == self.g.distance(y, self.image[u]));
                if !consistent {
                    continue;
                }
                self.image[x] = y;
                self.used[y] = true;
                self.extend(depth + 1);
                self.used[y] = false;
                self.image[x] = usize::MAX;
            }
        }
    }

    let mut search = Search {
        g,
        profiles: &profiles,
        order: &order,
        parent: &parent,
        image: vec![usize::MAX; count],
        used: vec![false; count],
        found: 0,
    };
    search.extend(0);
    Ok(search.found)
}

/// All permutations of `1..=n` in Steinhaus-Johnson-Trotter order, where
/// consecutive permutations differ by one adjacent swap.
pub fn hamiltonian_enumeration(n: usize) -> Result<Vec<Permutation>> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::Size { n, min: 1, max: MAX_ORDER });
    }
    // Direction of each element: -1 looks left, +1 looks right.
    let mut perm: Vec<u8> = (1..=n as u8).collect();
    let mut dir = vec![-1i8; n + 1];
    let mut out = Vec::with_capacity(factorial(n) as usize);
    out.push(Permutation(perm.clone()));
    loop {
        let mut mobile: Option<usize> = None;
        for i in 0..n {
            let e = perm[i];
            let j = i as isize + dir[e as usize] as isize;
            if j < 0 || j >= n as isize || perm[j as usize] > e {
                continue;
            }
            if mobile.is_none_or(|m| perm[m] < e) {
                mobile = Some(i);
            }
        }
        let Some(i) = mobile else { break };
        let e = perm[i];
        let j = (i as isize + dir[e as usize] as isize) as usize;
        perm.swap(i, j);
        for &other in &perm {
            if other > e {
                dir[other as usize] = -dir[other as usize];
            }
        }
        out.push(Permutation(perm.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_perms_brute(n: usize) -> Vec<Vec<u8>> {
        fn rec(prefix: &mut Vec<u8>, left: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if left.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for i in 0..left.len() {
                let e = left.remove(i);
                prefix.push(e);
                rec(prefix, left, out);
                prefix.pop();
                left.insert(i, e);
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut (1..=n as u8).collect(), &mut out);
        out
    }

    #[test]
    fn rank_round_trip_and_lexicographic() {
        for n in 1..=6 {
            let perms = all_perms_brute(n);
            for (r, p) in perms.iter().enumerate() {
                let p = Permutation::new(p.clone()).unwrap();
                assert_eq!(p.rank(), r);
                assert_eq!(Permutation::from_rank(n, r).unwrap(), p);
            }
        }
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(Permutation::new(vec![1, 1, 3]).is_err());
        assert!(Permutation::new(vec![0, 1, 2]).is_err());
        assert!(Permutation::new(vec![]).is_err());
    }

    #[test]
    fn small_graphs() {
        let g = Permutohedron::build(1).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count(), g.d_max()), (1, 0, 0));
        let g = Permutohedron::build(3).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count(), g.d_max()), (6, 6, 3));
        let g = Permutohedron::build(4).unwrap();
        assert_eq!((g.vertex_count(), g.edge_count(), g.d_max()), (24, 36, 6));
        assert!(Permutohedron::build(0).is_err());
        assert!(Permutohedron::build(MAX_ORDER + 1).is_err());
    }

    #[test]
    fn distance_matrix_n3() {
        let g = Permutohedron::build(3).unwrap();
        let expected = [
            [0, 1, 1, 2, 2, 3],
            [1, 0, 2, 1, 3, 2],
            [1, 2, 0, 3, 1, 2],
            [2, 1, 3, 0, 2, 1],
            [2, 3, 1, 2, 0, 1],
            [3, 2, 2, 1, 1, 0],
        ];
        // Rows follow the lexicographic order of the inverse permutations.
        let inverse_vertex = |rank: usize| {
            let p = Permutation::from_rank(3, rank).unwrap();
            let mut inv = vec![0u8; 3];
            for (pos, &e) in p.elements().iter().enumerate() {
                inv[e as usize - 1] = pos as u8 + 1;
            }
            g.vertex_of(&Permutation::new(inv).unwrap()).unwrap()
        };
        for (i, row) in expected.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                assert_eq!(g.distance(inverse_vertex(i), inverse_vertex(j)), d);
            }
        }
    }

    #[test]
    fn word_order_distances() {
        // S=1, O=2, V=3.
        let sov = Permutation::new(vec![1, 2, 3]).unwrap();
        let svo = Permutation::new(vec![1, 3, 2]).unwrap();
        let vos = Permutation::new(vec![3, 2, 1]).unwrap();
        assert_eq!(sov.swap_distance(&svo).unwrap(), 1);
        assert_eq!(sov.swap_distance(&vos).unwrap(), 3);
        assert_eq!(vos.swap_distance(&vos).unwrap(), 0);
        assert!(sov.swap_distance(&Permutation::identity(4)).is_err());

        let g = Permutohedron::build(3).unwrap();
        assert_eq!(g.reversal(sov.rank()), vos.rank());
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(Permutation::identity(5).inversions(), 0);
        assert_eq!(Permutation::identity(4).reversed().inversions(), 6);
        assert_eq!(Permutation::new(vec![2, 1, 3]).unwrap().inversions(), 1);
    }

    #[test]
    fn reversal_is_involution_at_diameter() {
        let g = Permutohedron::build(4).unwrap();
        for v in 0..g.vertex_count() {
            let r = g.reversal(v);
            assert_eq!(g.reversal(r), v);
            assert_eq!(g.distance(v, r), g.d_max());
        }
    }

    #[test]
    fn mahonian_small_rows() {
        assert_eq!(mahonian(1).unwrap().counts, vec![1]);
        assert_eq!(mahonian(3).unwrap().counts, vec![1, 2, 2, 1]);
        assert_eq!(mahonian(4).unwrap().weighted_sum(), 72);
        assert!(mahonian(0).is_err());
        assert!(mahonian(MAX_MAHONIAN_ORDER + 1).is_err());
        let t = mahonian(MAX_MAHONIAN_ORDER).unwrap();
        assert_eq!(t.total(), factorial(MAX_MAHONIAN_ORDER));
    }

    #[test]
    fn mean_distance_fractions() {
        let g = Permutohedron::build(3).unwrap();
        assert_eq!(g.mean_distances(), (Ratio::new(3, 2), Ratio::new(9, 5)));
        let g = Permutohedron::build(4).unwrap();
        assert_eq!(g.mean_distances().0, Ratio::from_integer(3));
        let g = Permutohedron::build(1).unwrap();
        assert_eq!(g.mean_distances(), (Ratio::from_integer(0), Ratio::from_integer(0)));
    }

    #[test]
    fn automorphisms_small() {
        let counts: Vec<u64> = (1..=4)
            .map(|n| automorphism_count(&Permutohedron::build(n).unwrap()).unwrap())
            .collect();
        assert_eq!(counts, vec![1, 2, 12, 48]);
        assert!(automorphism_count(&Permutohedron::build(6).unwrap()).is_err());
    }

    #[test]
    fn sjt_orders() {
        let seq = hamiltonian_enumeration(2).unwrap();
        assert_eq!(seq.iter().map(|p| p.to_string()).collect::<Vec<_>>(), vec!["12", "21"]);
        for n in 1..=6 {
            let seq = hamiltonian_enumeration(n).unwrap();
            assert_eq!(seq.len() as u64, factorial(n));
            let mut ranks: Vec<usize> = seq.iter().map(Permutation::rank).collect();
            for w in seq.windows(2) {
                assert_eq!(w[0].swap_distance(&w[1]).unwrap(), 1);
            }
            ranks.sort_unstable();
            ranks.dedup();
            assert_eq!(ranks.len() as u64, factorial(n));
        }
    }

    #[test]
    fn dot_without_weights() {
        let g = Permutohedron::build(3).unwrap();
        let dot = g.export_dot(None).unwrap();
        assert_eq!(dot.matches(" -- ").count(), 6);
        assert_eq!(
            dot.lines().filter(|l| l.starts_with("  \"") && !l.contains(" -- ")).count(),
            6
        );
        assert!(dot.starts_with("graph permutohedron_3 {"));
    }
}
