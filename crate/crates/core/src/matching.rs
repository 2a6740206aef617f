//! Maximum-weight matching on general graphs.
//!
//! The per-round pairing problem for even, non-power-of-2 cluster sizes is a
//! weighted matching on a general (non-bipartite) graph, so an exact blossom
//! solver is required; greedy pairing can stall chunk propagation. The solver
//! below follows the classic primal-dual blossom construction (Edmonds'
//! blossoms with Galil's labeling scheme, as popularized by Van Rantwijk's
//! reference implementation). Vertex duals are stored pre-multiplied by two
//! so all arithmetic stays integral for integer weights.
//!
//! [`max_weight_matching`] additionally breaks ties among equal-weight optima
//! toward more matched pairs (weight is scaled so cardinality acts as a
//! secondary objective), which keeps more ranks busy per round without ever
//! sacrificing total weight.

use crate::model::RankId;
use std::collections::BTreeSet;

const NONE: usize = usize::MAX;

/// Need relation between ranks for one generation round. An edge has weight 2
/// when each endpoint holds a fully reduced chunk the other lacks, and weight
/// 1 when the need is one-directional.
#[derive(Debug, Clone, Default)]
pub struct NeedGraph {
    vertices: BTreeSet<RankId>,
    edges: Vec<(RankId, RankId, u8)>,
}

impl NeedGraph {
    pub fn new(vertices: impl IntoIterator<Item = RankId>) -> Self {
        NeedGraph {
            vertices: vertices.into_iter().collect(),
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, u: RankId, v: RankId, weight: u8) {
        assert!(weight == 1 || weight == 2, "need edges weigh 1 or 2");
        assert_ne!(u, v, "no self-loops");
        assert!(
            self.vertices.contains(&u) && self.vertices.contains(&v),
            "edge endpoints must be graph vertices"
        );
        self.edges.push((u, v, weight));
    }

    pub fn vertices(&self) -> &BTreeSet<RankId> {
        &self.vertices
    }

    pub fn edges(&self) -> &[(RankId, RankId, u8)] {
        &self.edges
    }
}

/// A vertex-disjoint edge set and its total weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingSolution {
    /// Matched pairs, each ordered (low, high), sorted by first member.
    pub edges: Vec<(RankId, RankId)>,
    pub total_weight: u64,
}

/// Exact maximum-weight matching of a [`NeedGraph`]. Deterministic for a
/// fixed vertex set and edge insertion order; among maximum-weight matchings
/// it returns one of maximum cardinality.
pub fn max_weight_matching(graph: &NeedGraph) -> MatchingSolution {
    let index_of: std::collections::BTreeMap<RankId, usize> = graph
        .vertices
        .iter()
        .enumerate()
        .map(|(i, r)| (*r, i))
        .collect();
    let ranks: Vec<RankId> = graph.vertices.iter().copied().collect();

    // Scale weights so that cardinality decides ties without ever outweighing
    // a single unit of real weight.
    let scale = ranks.len() as i64 + 1;
    let edges: Vec<(usize, usize, i64)> = graph
        .edges
        .iter()
        .map(|&(u, v, w)| (index_of[&u], index_of[&v], scale * w as i64 + 1))
        .collect();

    let mate = blossom_mates(ranks.len(), &edges);
    let mut matched = Vec::new();
    let mut total = 0u64;
    for (k, &(u, v, w)) in graph.edges.iter().enumerate() {
        let (i, j) = (edges[k].0, edges[k].1);
        if mate[i] == j {
            matched.push((u.min(v), u.max(v)));
            total += w as u64;
        }
    }
    matched.sort_unstable();
    matched.dedup();
    MatchingSolution {
        edges: matched,
        total_weight: total,
    }
}

/// Maximum-weight matching over `edges` on vertices `0..n_vertices`;
/// returns `mate[v]` = partner of v, or `usize::MAX` when v is single.
/// Edge weights must be positive here (the need graph guarantees it).
pub(crate) fn blossom_mates(n_vertices: usize, edges: &[(usize, usize, i64)]) -> Vec<usize> {
    if n_vertices == 0 || edges.is_empty() {
        return vec![NONE; n_vertices];
    }
    let mut solver = Blossom::new(n_vertices, edges.to_vec());
    solver.solve();
    solver.verify_optimum();
    // Translate matched endpoints into partner vertices.
    let mates: Vec<usize> = (0..n_vertices)
        .map(|v| {
            if solver.mate[v] == NONE {
                NONE
            } else {
                solver.endpoint[solver.mate[v]]
            }
        })
        .collect();
    for v in 0..n_vertices {
        assert!(mates[v] == NONE || mates[mates[v]] == v);
    }
    mates
}

/// Primal-dual blossom solver state.
///
/// Vertices are `0..nv`; non-trivial blossoms are numbered `nv..2*nv`. Edge
/// endpoints are numbered so that endpoints 2k and 2k+1 belong to edge k.
/// `dualvar[v]` holds 2*u(v) for vertices and z(b) for blossoms, keeping all
/// slacks integral.
struct Blossom {
    nv: usize,
    edges: Vec<(usize, usize, i64)>,
    endpoint: Vec<usize>,
    neighb_end: Vec<Vec<usize>>,
    mate: Vec<usize>,
    label: Vec<u8>,
    label_end: Vec<usize>,
    in_blossom: Vec<usize>,
    blossom_parent: Vec<usize>,
    blossom_childs: Vec<Vec<usize>>,
    blossom_base: Vec<usize>,
    blossom_endps: Vec<Vec<usize>>,
    best_edge: Vec<usize>,
    blossom_best_edges: Vec<Vec<usize>>,
    unused_blossoms: Vec<usize>,
    dualvar: Vec<i64>,
    allow_edge: Vec<bool>,
    queue: Vec<usize>,
}

impl Blossom {
    fn new(nv: usize, edges: Vec<(usize, usize, i64)>) -> Self {
        let ne = edges.len();
        let max_weight = edges.iter().map(|e| e.2).max().unwrap().max(0);
        let endpoint: Vec<usize> = (0..2 * ne)
            .map(|p| {
                if p % 2 == 0 {
                    edges[p / 2].0
                } else {
                    edges[p / 2].1
                }
            })
            .collect();
        let mut neighb_end = vec![Vec::new(); nv];
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            assert_ne!(i, j);
            neighb_end[i].push(2 * k + 1);
            neighb_end[j].push(2 * k);
        }
        let mut blossom_base: Vec<usize> = (0..nv).collect();
        blossom_base.extend(vec![NONE; nv]);
        let mut dualvar = vec![max_weight; nv];
        dualvar.extend(vec![0; nv]);
        Blossom {
            nv,
            edges,
            endpoint,
            neighb_end,
            mate: vec![NONE; nv],
            label: vec![0; 2 * nv],
            label_end: vec![NONE; 2 * nv],
            in_blossom: (0..nv).collect(),
            blossom_parent: vec![NONE; 2 * nv],
            blossom_childs: vec![Vec::new(); 2 * nv],
            blossom_base,
            blossom_endps: vec![Vec::new(); 2 * nv],
            best_edge: vec![NONE; 2 * nv],
            blossom_best_edges: vec![Vec::new(); 2 * nv],
            unused_blossoms: (nv..2 * nv).collect(),
            dualvar,
            allow_edge: vec![false; ne],
            queue: Vec::new(),
        }
    }

    /// 2 * slack of edge k (not meaningful inside blossoms).
    fn slack(&self, k: usize) -> i64 {
        let (i, j, wt) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2 * wt
    }

    fn blossom_leaves(&self, b: usize) -> Vec<usize> {
        let mut leaves = Vec::new();
        if b < self.nv {
            leaves.push(b);
        } else {
            for &child in &self.blossom_childs[b] {
                if child < self.nv {
                    leaves.push(child);
                } else {
                    leaves.extend(self.blossom_leaves(child));
                }
            }
        }
        leaves
    }

    /// Label the top-level blossom of w with t (1 = S, 2 = T), reached via
    /// remote endpoint p. T-labels immediately propagate an S-label to the
    /// base's mate.
    fn assign_label(&mut self, w: usize, t: u8, p: usize) {
        let b = self.in_blossom[w];
        assert!(self.label[w] == 0 && self.label[b] == 0);
        self.label[w] = t;
        self.label[b] = t;
        self.label_end[w] = p;
        self.label_end[b] = p;
        self.best_edge[w] = NONE;
        self.best_edge[b] = NONE;
        if t == 1 {
            let leaves = self.blossom_leaves(b);
            self.queue.extend(leaves);
        } else if t == 2 {
            let base = self.blossom_base[b];
            assert!(self.mate[base] != NONE);
            let mate_end = self.mate[base];
            self.assign_label(self.endpoint[mate_end], 1, mate_end ^ 1);
        }
    }

    /// Trace back from v and w; returns the base of a new blossom, or NONE
    /// if the paths discover an augmenting path instead.
    fn scan_blossom(&mut self, v: usize, w: usize) -> usize {
        let mut path = Vec::new();
        let mut base = NONE;
        let (mut v, mut w) = (v, w);
        while v != NONE || w != NONE {
            let mut b = self.in_blossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossom_base[b];
                break;
            }
            assert_eq!(self.label[b], 1);
            path.push(b);
            self.label[b] = 5;
            assert_eq!(self.label_end[b], self.mate[self.blossom_base[b]]);
            if self.label_end[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.label_end[b]];
                b = self.in_blossom[v];
                assert_eq!(self.label[b], 2);
                assert!(self.label_end[b] != NONE);
                v = self.endpoint[self.label_end[b]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for b in path {
            self.label[b] = 1;
        }
        base
    }

    /// Wrap a new blossom with the given base around the cycle through edge
    /// k; relabel swallowed T-vertices as S and refresh least-slack caches.
    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.in_blossom[base];
        let mut bv = self.in_blossom[v];
        let mut bw = self.in_blossom[w];

        let b = self.unused_blossoms.pop().expect("blossom ids exhausted");
        self.blossom_base[b] = base;
        self.blossom_parent[b] = NONE;
        self.blossom_parent[bb] = b;

        let mut childs = Vec::new();
        let mut endps = Vec::new();
        while bv != bb {
            self.blossom_parent[bv] = b;
            childs.push(bv);
            endps.push(self.label_end[bv]);
            assert!(
                self.label[bv] == 2
                    || (self.label[bv] == 1
                        && self.label_end[bv] == self.mate[self.blossom_base[bv]])
            );
            assert!(self.label_end[bv] != NONE);
            v = self.endpoint[self.label_end[bv]];
            bv = self.in_blossom[v];
        }
        childs.push(bb);
        childs.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossom_parent[bw] = b;
            childs.push(bw);
            endps.push(self.label_end[bw] ^ 1);
            assert!(
                self.label[bw] == 2
                    || (self.label[bw] == 1
                        && self.label_end[bw] == self.mate[self.blossom_base[bw]])
            );
            assert!(self.label_end[bw] != NONE);
            w = self.endpoint[self.label_end[bw]];
            bw = self.in_blossom[w];
        }
        self.blossom_childs[b] = childs;
        self.blossom_endps[b] = endps;

        assert_eq!(self.label[bb], 1);
        self.label[b] = 1;
        self.label_end[b] = self.label_end[bb];
        self.dualvar[b] = 0;

        for v in self.blossom_leaves(b) {
            if self.label[self.in_blossom[v]] == 2 {
                self.queue.push(v);
            }
            self.in_blossom[v] = b;
        }

        // Merge least-slack edge lists of the children.
        let mut best_edge_to = vec![NONE; 2 * self.nv];
        for bv in self.blossom_childs[b].clone() {
            let nblists: Vec<Vec<usize>> = if self.blossom_best_edges[bv].is_empty() {
                self.blossom_leaves(bv)
                    .into_iter()
                    .map(|v| self.neighb_end[v].iter().map(|p| p / 2).collect())
                    .collect()
            } else {
                vec![self.blossom_best_edges[bv].clone()]
            };
            for nblist in nblists {
                for k in nblist {
                    let (mut i, mut j, _) = self.edges[k];
                    if self.in_blossom[j] == b {
                        std::mem::swap(&mut i, &mut j);
                    }
                    let _ = i;
                    let bj = self.in_blossom[j];
                    if bj != b
                        && self.label[bj] == 1
                        && (best_edge_to[bj] == NONE
                            || self.slack(k) < self.slack(best_edge_to[bj]))
                    {
                        best_edge_to[bj] = k;
                    }
                }
            }
            self.blossom_best_edges[bv] = Vec::new();
            self.best_edge[bv] = NONE;
        }
        self.blossom_best_edges[b] = best_edge_to.into_iter().filter(|k| *k != NONE).collect();
        self.best_edge[b] = NONE;
        for &k in &self.blossom_best_edges[b] {
            if self.best_edge[b] == NONE || self.slack(k) < self.slack(self.best_edge[b]) {
                self.best_edge[b] = k;
            }
        }
    }

    /// Undo a blossom; at stage end zero-dual sub-blossoms are expanded
    /// recursively, mid-stage a T-blossom's children are relabeled along the
    /// alternating path through it.
    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        for s in self.blossom_childs[b].clone() {
            self.blossom_parent[s] = NONE;
            if s < self.nv {
                self.in_blossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                for v in self.blossom_leaves(s) {
                    self.in_blossom[v] = s;
                }
            }
        }

        if !endstage && self.label[b] == 2 {
            assert!(self.label_end[b] != NONE);
            let entry_child = self.in_blossom[self.endpoint[self.label_end[b] ^ 1]];
            let mut j = self.blossom_childs[b]
                .iter()
                .position(|c| *c == entry_child)
                .unwrap() as i64;
            let (jstep, endptrick): (i64, usize) = if j & 1 != 0 {
                j -= self.blossom_childs[b].len() as i64;
                (1, 0)
            } else {
                (-1, 1)
            };
            let mut p = self.label_end[b];
            while j != 0 {
                self.label[self.endpoint[p ^ 1]] = 0;
                let q = self.cyc_endp(b, j - endptrick as i64) ^ endptrick ^ 1;
                self.label[self.endpoint[q]] = 0;
                let ep = self.endpoint[p ^ 1];
                self.assign_label(ep, 2, p);
                let edge = self.cyc_endp(b, j - endptrick as i64) / 2;
                self.allow_edge[edge] = true;
                j += jstep;
                p = self.cyc_endp(b, j - endptrick as i64) ^ endptrick;
                self.allow_edge[p / 2] = true;
                j += jstep;
            }
            let bv = self.cyc_child(b, j);
            self.label[self.endpoint[p ^ 1]] = 2;
            self.label[bv] = 2;
            self.label_end[self.endpoint[p ^ 1]] = p;
            self.label_end[bv] = p;
            self.best_edge[bv] = NONE;
            j += jstep;
            while self.cyc_child(b, j) != entry_child {
                let bv = self.cyc_child(b, j);
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                let mut v = NONE;
                for leaf in self.blossom_leaves(bv) {
                    v = leaf;
                    if self.label[leaf] != 0 {
                        break;
                    }
                }
                if v != NONE && self.label[v] != 0 {
                    assert_eq!(self.label[v], 2);
                    assert_eq!(self.in_blossom[v], bv);
                    self.label[v] = 0;
                    self.label[self.endpoint[self.mate[self.blossom_base[bv]]]] = 0;
                    let lblend = self.label_end[v];
                    self.assign_label(v, 2, lblend);
                }
                j += jstep;
            }
        }

        self.label[b] = 0;
        self.label_end[b] = NONE;
        self.blossom_base[b] = NONE;
        self.best_edge[b] = NONE;
        self.blossom_childs[b] = Vec::new();
        self.blossom_endps[b] = Vec::new();
        self.blossom_best_edges[b] = Vec::new();
        self.unused_blossoms.push(b);
    }

    /// Swap matched/unmatched edges along the path inside blossom b from
    /// vertex v down to the base, then rotate so v becomes the new base.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossom_parent[t] != b {
            t = self.blossom_parent[t];
        }
        if t >= self.nv {
            self.augment_blossom(t, v);
        }
        let i = self.blossom_childs[b].iter().position(|c| *c == t).unwrap();
        let mut j = i as i64;
        let (jstep, endptrick): (i64, usize) = if i & 1 != 0 {
            j -= self.blossom_childs[b].len() as i64;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.cyc_child(b, j);
            let p = self.cyc_endp(b, j - endptrick as i64) ^ endptrick;
            if t >= self.nv {
                self.augment_blossom(t, self.endpoint[p]);
            }
            j += jstep;
            let t = self.cyc_child(b, j);
            if t >= self.nv {
                self.augment_blossom(t, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossom_childs[b].rotate_left(i);
        self.blossom_endps[b].rotate_left(i);
        self.blossom_base[b] = self.blossom_base[self.blossom_childs[b][0]];
        assert_eq!(self.blossom_base[b], v);
    }

    /// Swap matched/unmatched edges along the augmenting path through edge k.
    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.in_blossom[s];
                assert_eq!(self.label[bs], 1);
                assert_eq!(self.label_end[bs], self.mate[self.blossom_base[bs]]);
                if bs >= self.nv {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.label_end[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.label_end[bs]];
                let bt = self.in_blossom[t];
                assert_eq!(self.label[bt], 2);
                assert!(self.label_end[bt] != NONE);
                s = self.endpoint[self.label_end[bt]];
                let j = self.endpoint[self.label_end[bt] ^ 1];
                assert_eq!(self.blossom_base[bt], t);
                if bt >= self.nv {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.label_end[bt];
                p = self.label_end[bt] ^ 1;
            }
        }
    }

    fn cyc_child(&self, b: usize, j: i64) -> usize {
        let len = self.blossom_childs[b].len() as i64;
        let idx = if j >= 0 { j } else { len + j };
        self.blossom_childs[b][idx as usize]
    }

    fn cyc_endp(&self, b: usize, j: i64) -> usize {
        let len = self.blossom_endps[b].len() as i64;
        let idx = if j >= 0 { j } else { len + j };
        self.blossom_endps[b][idx as usize]
    }

    fn solve(&mut self) {
        for _stage in 0..self.nv {
            self.label = vec![0; 2 * self.nv];
            self.best_edge = vec![NONE; 2 * self.nv];
            for b in self.nv..2 * self.nv {
                self.blossom_best_edges[b] = Vec::new();
            }
            self.allow_edge = vec![false; self.edges.len()];
            self.queue.clear();
            for v in 0..self.nv {
                if self.mate[v] == NONE && self.label[self.in_blossom[v]] == 0 {
                    self.assign_label(v, 1, NONE);
                }
            }

            let mut augmented = false;
            loop {
                while let Some(v) = self.queue.pop() {
                    assert_eq!(self.label[self.in_blossom[v]], 1);
                    for p in self.neighb_end[v].clone() {
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.in_blossom[v] == self.in_blossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allow_edge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allow_edge[k] = true;
                            }
                        }
                        if self.allow_edge[k] {
                            if self.label[self.in_blossom[w]] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[self.in_blossom[w]] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                assert_eq!(self.label[self.in_blossom[w]], 2);
                                self.label[w] = 2;
                                self.label_end[w] = p ^ 1;
                            }
                        } else if self.label[self.in_blossom[w]] == 1 {
                            let b = self.in_blossom[v];
                            if self.best_edge[b] == NONE || kslack < self.slack(self.best_edge[b]) {
                                self.best_edge[b] = k;
                            }
                        } else if self.label[w] == 0
                            && (self.best_edge[w] == NONE || kslack < self.slack(self.best_edge[w]))
                        {
                            self.best_edge[w] = k;
                        }
                    }
                    if augmented {
                        break;
                    }
                }
                if augmented {
                    break;
                }

                // No augmenting path yet: pump slack out of the duals.
                // delta1 caps at the smallest vertex dual (we do not force
                // maximum cardinality); delta2/delta3 reach the nearest edge
                // to grow through; delta4 pops the shallowest T-blossom.
                let mut delta_type = 1;
                let mut delta = *self.dualvar[..self.nv].iter().min().unwrap();
                let mut delta_edge = NONE;
                let mut delta_blossom = NONE;

                for v in 0..self.nv {
                    if self.label[self.in_blossom[v]] == 0 && self.best_edge[v] != NONE {
                        let d = self.slack(self.best_edge[v]);
                        if d < delta {
                            delta = d;
                            delta_type = 2;
                            delta_edge = self.best_edge[v];
                        }
                    }
                }
                for b in 0..2 * self.nv {
                    if self.blossom_parent[b] == NONE
                        && self.label[b] == 1
                        && self.best_edge[b] != NONE
                    {
                        let d = self.slack(self.best_edge[b]) / 2;
                        if d < delta {
                            delta = d;
                            delta_type = 3;
                            delta_edge = self.best_edge[b];
                        }
                    }
                }
                for b in self.nv..2 * self.nv {
                    if self.blossom_base[b] != NONE
                        && self.blossom_parent[b] == NONE
                        && self.label[b] == 2
                        && self.dualvar[b] < delta
                    {
                        delta = self.dualvar[b];
                        delta_type = 4;
                        delta_blossom = b;
                    }
                }

                for v in 0..self.nv {
                    match self.label[self.in_blossom[v]] {
                        0 => {}
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => unreachable!(),
                    }
                }
                for b in self.nv..2 * self.nv {
                    if self.blossom_base[b] != NONE && self.blossom_parent[b] == NONE {
                        match self.label[b] {
                            0 => {}
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => unreachable!(),
                        }
                    }
                }

                match delta_type {
                    1 => break, // optimum reached
                    2 => {
                        self.allow_edge[delta_edge] = true;
                        let (mut i, j, _) = self.edges[delta_edge];
                        if self.label[self.in_blossom[i]] == 0 {
                            i = j;
                        }
                        assert_eq!(self.label[self.in_blossom[i]], 1);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allow_edge[delta_edge] = true;
                        let (i, _, _) = self.edges[delta_edge];
                        assert_eq!(self.label[self.in_blossom[i]], 1);
                        self.queue.push(i);
                    }
                    4 => self.expand_blossom(delta_blossom, false),
                    _ => unreachable!(),
                }
            }

            if !augmented {
                break;
            }

            for b in self.nv..2 * self.nv {
                if self.blossom_parent[b] == NONE
                    && self.blossom_base[b] != NONE
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
    }

    /// Check the complementary-slackness certificate: non-negative slacks,
    /// tight matched edges, zero duals on single vertices, and full blossoms
    /// for positive blossom duals. Cheap relative to the solve itself.
    fn verify_optimum(&self) {
        for (k, &(i, j, wt)) in self.edges.iter().enumerate() {
            let mut s = self.dualvar[i] + self.dualvar[j] - 2 * wt;
            let mut i_blossoms = vec![i];
            let mut j_blossoms = vec![j];
            while self.blossom_parent[*i_blossoms.last().unwrap()] != NONE {
                i_blossoms.push(self.blossom_parent[*i_blossoms.last().unwrap()]);
            }
            while self.blossom_parent[*j_blossoms.last().unwrap()] != NONE {
                j_blossoms.push(self.blossom_parent[*j_blossoms.last().unwrap()]);
            }
            i_blossoms.reverse();
            j_blossoms.reverse();
            for (&bi, &bj) in i_blossoms.iter().zip(j_blossoms.iter()) {
                if bi != bj {
                    break;
                }
                s += 2 * self.dualvar[bi];
            }
            assert!(s >= 0, "edge {k} has negative slack");
            let matched = self.mate[i] != NONE && self.mate[i] / 2 == k;
            let matched_j = self.mate[j] != NONE && self.mate[j] / 2 == k;
            if matched || matched_j {
                assert!(matched && matched_j);
                assert_eq!(s, 0, "matched edge {k} is not tight");
            }
        }
        for v in 0..self.nv {
            assert!(
                self.mate[v] != NONE || self.dualvar[v] == 0,
                "single vertex {v} has non-zero dual"
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: u32, edges: &[(u32, u32, u8)]) -> NeedGraph {
        let mut g = NeedGraph::new((0..n).map(RankId));
        for &(u, v, w) in edges {
            g.add_edge(RankId(u), RankId(v), w);
        }
        g
    }

    /// Exhaustive search over all matchings; the independent oracle for the
    /// blossom solver.
    pub(crate) fn brute_force_max_weight(edges: &[(u32, u32, u8)]) -> u64 {
        fn go(edges: &[(u32, u32, u8)], used: u64) -> u64 {
            match edges.split_first() {
                None => 0,
                Some((&(u, v, w), rest)) => {
                    let skip = go(rest, used);
                    if used & (1 << u) == 0 && used & (1 << v) == 0 {
                        let take = w as u64 + go(rest, used | (1 << u) | (1 << v));
                        skip.max(take)
                    } else {
                        skip
                    }
                }
            }
        }
        go(edges, 0)
    }

    #[test]
    fn empty_graph_yields_empty_matching() {
        let g = NeedGraph::new([]);
        let sol = max_weight_matching(&g);
        assert!(sol.edges.is_empty());
        assert_eq!(sol.total_weight, 0);
    }

    #[test]
    fn triangle_takes_one_heavy_edge() {
        let g = graph(3, &[(0, 1, 2), (1, 2, 2), (0, 2, 1)]);
        let sol = max_weight_matching(&g);
        assert_eq!(sol.edges.len(), 1);
        assert_eq!(sol.total_weight, 2);
    }

    #[test]
    fn weight_beats_cardinality() {
        // A heavy middle edge must win over two light disjoint ones:
        // 2 + 2 > 1 + 1 + 1.
        let mut g = NeedGraph::new((0..6).map(RankId));
        g.add_edge(RankId(0), RankId(1), 1);
        g.add_edge(RankId(1), RankId(2), 2);
        g.add_edge(RankId(2), RankId(3), 1);
        g.add_edge(RankId(3), RankId(4), 2);
        g.add_edge(RankId(4), RankId(5), 1);
        let sol = max_weight_matching(&g);
        assert_eq!(sol.total_weight, 4);
        assert_eq!(
            sol.edges,
            vec![(RankId(1), RankId(2)), (RankId(3), RankId(4))]
        );
    }

    #[test]
    fn cardinality_breaks_weight_ties() {
        // One w2 edge or two disjoint w1 edges both weigh 2; prefer pairing
        // four ranks over two.
        let g = graph(4, &[(0, 1, 2), (0, 2, 1), (1, 3, 1)]);
        let sol = max_weight_matching(&g);
        assert_eq!(sol.total_weight, 2);
        assert_eq!(sol.edges.len(), 2);
    }

    #[test]
    fn blossom_formation_and_augmentation() {
        // Odd cycle that forces a blossom, plus a tail.
        let g = graph(5, &[(0, 1, 2), (0, 2, 2), (1, 2, 2), (2, 3, 2), (3, 4, 2)]);
        let sol = max_weight_matching(&g);
        assert_eq!(
            sol.total_weight,
            brute_force_max_weight(&[(0, 1, 2), (0, 2, 2), (1, 2, 2), (2, 3, 2), (3, 4, 2)])
        );
        assert_eq!(sol.edges.len(), 2);
    }

    #[test]
    fn deterministic_for_fixed_input() {
        let edges = [
            (0, 1, 2),
            (2, 3, 1),
            (1, 2, 2),
            (0, 3, 1),
            (4, 5, 2),
            (3, 4, 2),
        ];
        let a = max_weight_matching(&graph(6, &edges));
        let b = max_weight_matching(&graph(6, &edges));
        assert_eq!(a, b);
    }

    #[test]
    fn random_graphs_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _case in 0..200 {
            let n = rng.gen_range(2..=6u32);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen_bool(0.6) {
                        edges.push((u, v, rng.gen_range(1..=2u8)));
                    }
                }
            }
            let sol = max_weight_matching(&graph(n, &edges));
            assert_eq!(
                sol.total_weight,
                brute_force_max_weight(&edges),
                "edges: {edges:?}"
            );
        }
    }
}
