//! Concrete matchings for each switch family and graph metrics of the
//! static expander.

use std::collections::VecDeque;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A permutation mapping input port `i` to output port `perm[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    perm: Vec<usize>,
}

impl Matching {
    /// Validates that `perm` is a bijection on `0..perm.len()`.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::input(format!("not a permutation of 0..{n}: {perm:?}")));
            }
            seen[p] = true;
        }
        Ok(Matching { perm })
    }

    /// Cyclic shift `i -> (i + shift) mod n`.
    pub fn shift(n: usize, shift: usize) -> Self {
        Matching {
            perm: (0..n).map(|i| (i + shift) % n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn target(&self, input: usize) -> usize {
        self.perm[input]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_fixed_point_free(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i != p)
    }

    /// Directed edges `(i, perm[i])`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.perm.iter().enumerate().map(|(i, &p)| (i, p))
    }
}

/// The n−1 cyclic-shift matchings a rotor switch cycles through; matching
/// `t - 1` is the shift by `t`.
pub fn rotor_cycle(n: usize) -> Result<Vec<Matching>> {
    if n < 2 {
        return Err(Error::input(format!("rotor cycle needs n >= 2, got {n}")));
    }
    Ok((1..n).map(|t| Matching::shift(n, t)).collect())
}

/// Union of `degree` matchings over `n` nodes. Parallel edges are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpanderGraph {
    n: usize,
    matchings: Vec<Matching>,
    seed: Option<u64>,
    /// Distinct out-neighbors per node.
    out: Vec<Vec<usize>>,
    /// Distinct in-neighbors per node.
    inn: Vec<Vec<usize>>,
    /// Number of parallel edges per directed pair, indexed `u * n + v`.
    multiplicity: Vec<u32>,
}

impl ExpanderGraph {
    pub fn from_matchings(n: usize, matchings: Vec<Matching>) -> Result<Self> {
        Self::assemble(n, matchings, None)
    }

    fn assemble(n: usize, matchings: Vec<Matching>, seed: Option<u64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::input(format!("graph needs n >= 2, got {n}")));
        }
        let mut multiplicity = vec![0u32; n * n];
        for m in &matchings {
            if m.len() != n {
                return Err(Error::input(format!(
                    "matching of size {} does not fit n = {n}",
                    m.len()
                )));
            }
            for (u, v) in m.edges() {
                if u != v {
                    multiplicity[u * n + v] += 1;
                }
            }
        }
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        for u in 0..n {
            for v in 0..n {
                if multiplicity[u * n + v] > 0 {
                    out[u].push(v);
                    inn[v].push(u);
                }
            }
        }
        Ok(ExpanderGraph {
            n,
            matchings,
            seed,
            out,
            inn,
            multiplicity,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of matchings in the union (k_s).
    pub fn degree(&self) -> usize {
        self.matchings.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn matchings(&self) -> &[Matching] {
        &self.matchings
    }

    pub fn out_neighbors(&self, u: usize) -> &[usize] {
        &self.out[u]
    }

    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.inn[v]
    }

    /// Parallel edges from `u` to `v`.
    pub fn multiplicity(&self, u: usize, v: usize) -> u32 {
        self.multiplicity[u * self.n + v]
    }

    /// Out-degree counting parallel edges.
    pub fn out_degree(&self, u: usize) -> usize {
        self.out[u]
            .iter()
            .map(|&v| self.multiplicity(u, v) as usize)
            .sum::<usize>()
            + self.matchings.iter().filter(|m| m.target(u) == u).count()
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.inn[v]
            .iter()
            .map(|&u| self.multiplicity(u, v) as usize)
            .sum::<usize>()
            + self.matchings.iter().filter(|m| m.target(v) == v).count()
    }

    /// Unweighted hop distances from `src`; `usize::MAX` marks unreachable.
    pub fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = VecDeque::with_capacity(self.n);
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &self.out[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Shortest-path structure rooted at `src`.
    pub fn shortest_paths_from(&self, src: usize) -> ShortestPaths {
        let dist = self.bfs(src);
        let mut order: Vec<usize> = (0..self.n).filter(|&v| dist[v] != usize::MAX).collect();
        order.sort_by_key(|&v| dist[v]);
        let mut count = vec![0.0f64; self.n];
        count[src] = 1.0;
        for &v in &order {
            if v == src {
                continue;
            }
            count[v] = self.inn[v]
                .iter()
                .filter(|&&u| dist[u] != usize::MAX && dist[u] + 1 == dist[v])
                .map(|&u| count[u])
                .sum();
        }
        ShortestPaths { src, dist, count }
    }

    /// Picks one shortest path uniformly among all shortest paths from
    /// `sp.src` to `dst`. Returns the node sequence including both ends.
    pub fn sample_shortest_path<R: Rng + ?Sized>(
        &self,
        sp: &ShortestPaths,
        dst: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        if sp.dist[dst] == usize::MAX {
            return Err(Error::Disconnected { src: sp.src, dst });
        }
        let mut path = vec![dst];
        let mut v = dst;
        while v != sp.src {
            let preds: Vec<usize> = self.inn[v]
                .iter()
                .copied()
                .filter(|&u| sp.dist[u] != usize::MAX && sp.dist[u] + 1 == sp.dist[v])
                .collect();
            let total: f64 = preds.iter().map(|&u| sp.count[u]).sum();
            let mut pick = rng.random::<f64>() * total;
            let mut chosen = preds[preds.len() - 1];
            for &u in &preds {
                pick -= sp.count[u];
                if pick < 0.0 {
                    chosen = u;
                    break;
                }
            }
            path.push(chosen);
            v = chosen;
        }
        path.reverse();
        Ok(path)
    }

    /// Writes one `src dst` line per matching edge (parallel edges repeated).
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for m in &self.matchings {
            for (u, v) in m.edges() {
                writeln!(w, "{u} {v}")?;
            }
        }
        Ok(())
    }
}

/// Distances and shortest-path counts from one source.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub src: usize,
    pub dist: Vec<usize>,
    /// Number of distinct shortest paths (parallel edges counted once).
    pub count: Vec<f64>,
}

/// Union of `k_s` uniformly random fixed-point-free permutations, each drawn
/// by rejection. Deterministic per seed.
pub fn build_expander(n: usize, k_s: usize, seed: u64) -> Result<ExpanderGraph> {
    if n < 2 {
        return Err(Error::input(format!("expander needs n >= 2, got {n}")));
    }
    if k_s < 1 {
        return Err(Error::input("expander needs k_s >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matchings = Vec::with_capacity(k_s);
    for _ in 0..k_s {
        let mut perm: Vec<usize> = (0..n).collect();
        loop {
            perm.shuffle(&mut rng);
            if perm.iter().enumerate().all(|(i, &p)| i != p) {
                break;
            }
        }
        matchings.push(Matching { perm });
    }
    ExpanderGraph::assemble(n, matchings, Some(seed))
}

/// Mean shortest-path hop count over all ordered pairs `u != v`, by BFS
/// from every source.
pub fn expected_path_length(graph: &ExpanderGraph) -> Result<f64> {
    let n = graph.n();
    let per_source: Vec<std::result::Result<u64, (usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let dist = graph.bfs(s);
            let mut sum = 0u64;
            for (v, &d) in dist.iter().enumerate() {
                if v == s {
                    continue;
                }
                if d == usize::MAX {
                    return Err((s, v));
                }
                sum += d as u64;
            }
            Ok(sum)
        })
        .collect();
    let mut total = 0u64;
    for r in per_source {
        match r {
            Ok(s) => total += s,
            Err((src, dst)) => return Err(Error::Disconnected { src, dst }),
        }
    }
    Ok(total as f64 / (n * (n - 1)) as f64)
}

/// Mean epl over `seeds` independent expanders `seed0, seed0 + 1, ...`.
pub fn mean_expected_path_length(n: usize, k_s: usize, seed0: u64, seeds: usize) -> Result<f64> {
    let mut acc = 0.0;
    for s in 0..seeds {
        let g = build_expander(n, k_s, seed0 + s as u64)?;
        acc += expected_path_length(&g)?;
    }
    Ok(acc / seeds as f64)
}
