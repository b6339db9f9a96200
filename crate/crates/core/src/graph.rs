//! CSR directed graph with both out- and in-adjacency views.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Immutable directed graph without self-loops or parallel arcs.
///
/// Adjacency lists are sorted by node id in both directions, so every
/// traversal downstream visits neighbours in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<usize>,
    in_offsets: Vec<usize>,
    in_sources: Vec<usize>,
}

impl DirectedGraph {
    /// Builds a graph from `(tail, head)` arcs. Duplicate arcs collapse to one.
    pub fn new(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        for &(tail, head) in arcs {
            if tail >= n || head >= n {
                return Err(Error::EndpointOutOfRange { tail, head, n });
            }
            if tail == head {
                return Err(Error::SelfLoop { node: tail });
            }
        }
        let mut sorted = arcs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        Ok(Self::from_sorted_unique(n, &sorted))
    }

    /// `arcs` must be sorted, duplicate-free and validated.
    fn from_sorted_unique(n: usize, arcs: &[(usize, usize)]) -> Self {
        let mut out_offsets = vec![0usize; n + 1];
        for &(t, _) in arcs {
            out_offsets[t + 1] += 1;
        }
        for v in 0..n {
            out_offsets[v + 1] += out_offsets[v];
        }
        let out_targets: Vec<usize> = arcs.iter().map(|&(_, h)| h).collect();

        let mut in_offsets = vec![0usize; n + 1];
        for &(_, h) in arcs {
            in_offsets[h + 1] += 1;
        }
        for v in 0..n {
            in_offsets[v + 1] += in_offsets[v];
        }
        // Arcs are sorted by tail, so filling in order keeps each in-list sorted.
        let mut cursor = in_offsets.clone();
        let mut in_sources = vec![0usize; arcs.len()];
        for &(t, h) in arcs {
            in_sources[cursor[h]] = t;
            cursor[h] += 1;
        }
        Self {
            n,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
        }
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn arc_count(&self) -> usize {
        self.out_targets.len()
    }

    #[inline]
    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    /// Tails of the arcs entering `v` (the in-neighbourhood `𝒩⁻(v)`).
    #[inline]
    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    #[inline]
    pub fn out_degree(&self, v: usize) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    #[inline]
    pub fn in_degree(&self, v: usize) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.out_degree(v)).collect()
    }

    pub fn has_arc(&self, tail: usize, head: usize) -> bool {
        self.out_neighbors(tail).binary_search(&head).is_ok()
    }

    /// All arcs in ascending `(tail, head)` order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |v| self.out_neighbors(v).iter().map(move |&u| (v, u)))
    }

    pub fn transpose(&self) -> DirectedGraph {
        let mut arcs: Vec<(usize, usize)> = self.arcs().map(|(t, h)| (h, t)).collect();
        arcs.sort_unstable();
        Self::from_sorted_unique(self.n, &arcs)
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<DirectedGraph> {
        if perm.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("relabeling is not a permutation"));
            }
        }
        let arcs: Vec<(usize, usize)> = self.arcs().map(|(t, h)| (perm[t], perm[h])).collect();
        DirectedGraph::new(self.n, &arcs)
    }

    /// First node with out-degree zero, if any.
    pub fn first_dangling(&self) -> Option<usize> {
        (0..self.n).find(|&v| self.out_degree(v) == 0)
    }

    /// Whether the undirected symmetrisation has a single component.
    pub fn is_weakly_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &u in self.out_neighbors(v).iter().chain(self.in_neighbors(v)) {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    queue.push_back(u);
                }
            }
        }
        count == self.n
    }

    /// Whether every node reaches every other node along arcs.
    pub fn is_strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.n];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(v) = stack.pop() {
                let next = if forward {
                    self.out_neighbors(v)
                } else {
                    self.in_neighbors(v)
                };
                for &u in next {
                    if !seen[u] {
                        seen[u] = true;
                        count += 1;
                        stack.push(u);
                    }
                }
            }
            count
        };
        reach(true) == self.n && reach(false) == self.n
    }
}

/// Free-function form of [`DirectedGraph::new`].
pub fn build_graph(n: usize, arcs: &[(usize, usize)]) -> Result<DirectedGraph> {
    DirectedGraph::new(n, arcs)
}

/// Free-function form of [`DirectedGraph::is_weakly_connected`].
pub fn is_weakly_connected(g: &DirectedGraph) -> bool {
    g.is_weakly_connected()
}
