//! Forest configurations with dynamic connectivity.
//!
//! Every vertex carries a component label; a label table stores tree sizes.
//! Adding an edge relabels the smaller of the two trees. Removing an edge runs
//! two breadth-first searches in lockstep from its endpoints, stops as soon as
//! one side is exhausted, and gives that (smaller) side a fresh label. The
//! cost of a toggle is therefore proportional to the smaller tree involved.

use crate::error::{Error, Result};
use crate::lattice::Graph;

/// Result of [`ForestState::toggle_edge`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ToggleOutcome {
    Added { merged: usize },
    Removed { sizes: (usize, usize) },
    Rejected,
}

/// A pending single-edge move, produced by [`ForestState::propose`] and
/// resolved by [`ForestState::commit`] or [`ForestState::abort`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Proposal {
    /// Adding edge `e` merges trees of sizes `su` and `sv`.
    Merge { e: usize, su: usize, sv: usize },
    /// Removing edge `e` splits a tree into sizes `su` (side of the edge's
    /// first endpoint) and `sv`.
    Split { e: usize, su: usize, sv: usize },
    /// Adding edge `e` would close a cycle.
    Cycle { e: usize },
}

impl Proposal {
    /// Metropolis ratio `w(F') / w(F)` for the uniform weights `beta`, `h`.
    /// Zero for cycle-closing proposals.
    pub fn weight_ratio(&self, beta: f64, h: f64) -> f64 {
        match *self {
            Proposal::Merge { su, sv, .. } => merge_ratio(beta, h * su as f64, h * sv as f64),
            Proposal::Split { su, sv, .. } => {
                let m = merge_ratio(beta, h * su as f64, h * sv as f64);
                if m == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / m
                }
            }
            Proposal::Cycle { .. } => 0.0,
        }
    }

    /// Acceptance probability `min(1, ratio)`.
    pub fn acceptance(&self, beta: f64, h: f64) -> f64 {
        self.weight_ratio(beta, h).min(1.0)
    }
}

/// `beta (1 + H_u + H_v) / ((1 + H_u)(1 + H_v))`: the weight ratio for joining
/// two trees with field sums `H_u`, `H_v` by an edge of weight `beta`.
pub fn merge_ratio(beta: f64, hu: f64, hv: f64) -> f64 {
    beta * (1.0 + hu + hv) / ((1.0 + hu) * (1.0 + hv))
}

/// Unnormalised forest weight `beta^k prod_T (1 + h |V(T)|)`, kept both as a
/// logarithm and in factored form.
#[derive(Clone, Debug, PartialEq)]
pub struct ForestWeight {
    pub log_weight: f64,
    pub edges: usize,
    /// Tree sizes in non-increasing order.
    pub tree_sizes: Vec<usize>,
}

impl ForestWeight {
    pub fn value(&self) -> f64 {
        self.log_weight.exp()
    }

    /// Direct product form, independent of `log_weight`.
    pub fn product(&self, beta: f64, h: f64) -> f64 {
        let mut w = beta.powi(self.edges as i32);
        for &s in &self.tree_sizes {
            w *= 1.0 + h * s as f64;
        }
        w
    }
}

#[derive(Clone, Debug)]
pub struct ForestState {
    ends: Vec<(usize, usize)>,
    present: Vec<bool>,
    n_present: usize,
    adj: Vec<Vec<(usize, usize)>>,
    label: Vec<usize>,
    size: Vec<usize>,
    free: Vec<usize>,
    // scratch for splits
    side: [Vec<usize>; 2],
    mark: Vec<u32>,
    epoch: u32,
    pending_small: Option<(usize, bool)>,
}

impl ForestState {
    /// The empty forest on the graph's vertex set.
    pub fn empty(graph: &Graph) -> Self {
        let n = graph.vertex_count();
        ForestState {
            ends: graph.edges().iter().map(|e| (e.u, e.v)).collect(),
            present: vec![false; graph.edge_count()],
            n_present: 0,
            adj: vec![Vec::new(); n],
            label: (0..n).collect(),
            size: vec![1; n],
            free: Vec::new(),
            side: [Vec::new(), Vec::new()],
            mark: vec![0; n],
            epoch: 0,
            pending_small: None,
        }
    }

    /// Forest with the given edges present; errors if they contain a cycle.
    pub fn from_edges(graph: &Graph, edges: &[usize]) -> Result<Self> {
        let mut s = Self::empty(graph);
        for &e in edges {
            if e >= s.ends.len() {
                return Err(Error::InvalidArgument(format!("edge index {e} out of range")));
            }
            if s.present[e] {
                return Err(Error::InvalidArgument(format!("edge {e} listed twice")));
            }
            if s.toggle_edge(e) == ToggleOutcome::Rejected {
                return Err(Error::InvalidArgument(format!("edge {e} closes a cycle")));
            }
        }
        Ok(s)
    }

    pub fn vertex_count(&self) -> usize {
        self.label.len()
    }
    pub fn edge_slots(&self) -> usize {
        self.ends.len()
    }
    pub fn edge_count(&self) -> usize {
        self.n_present
    }
    pub fn is_present(&self, e: usize) -> bool {
        self.present[e]
    }
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        self.ends[e]
    }
    pub fn tree_count(&self) -> usize {
        self.vertex_count() - self.n_present
    }

    /// Indices of present edges in increasing order.
    pub fn present_edges(&self) -> Vec<usize> {
        (0..self.ends.len()).filter(|&e| self.present[e]).collect()
    }

    /// `(component id, tree size)` of the tree containing `x`.
    #[inline]
    pub fn tree_of(&self, x: usize) -> (usize, usize) {
        let l = self.label[x];
        (l, self.size[l])
    }

    #[inline]
    pub fn connected(&self, x: usize, y: usize) -> bool {
        self.label[x] == self.label[y]
    }

    /// Component labels of all vertices.
    pub fn labels(&self) -> &[usize] {
        &self.label
    }

    /// Size of the tree with component id `id`.
    pub fn size_of_label(&self, id: usize) -> usize {
        self.size[id]
    }

    /// Forest neighbours of `x` as `(neighbour, edge index)`.
    pub fn forest_neighbors(&self, x: usize) -> &[(usize, usize)] {
        &self.adj[x]
    }

    /// Tree sizes in non-increasing order.
    pub fn tree_sizes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.size.len()];
        let mut out = Vec::with_capacity(self.tree_count());
        for &l in &self.label {
            if !seen[l] {
                seen[l] = true;
                out.push(self.size[l]);
            }
        }
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    /// The weight `beta^{|E(F)|} prod_T (1 + h |V(T)|)`.
    pub fn weight(&self, beta: f64, h: f64) -> ForestWeight {
        let sizes = self.tree_sizes();
        let k = self.n_present;
        let mut lw = if k == 0 { 0.0 } else { k as f64 * beta.ln() };
        for &s in &sizes {
            lw += (h * s as f64).ln_1p();
        }
        ForestWeight { log_weight: lw, edges: k, tree_sizes: sizes }
    }

    /// Classify the toggle of edge `e` without changing the forest's
    /// observable state. A `Split` must be followed by `commit` or `abort`
    /// before any other operation.
    pub fn propose(&mut self, e: usize) -> Proposal {
        let (u, v) = self.ends[e];
        if !self.present[e] {
            let (lu, lv) = (self.label[u], self.label[v]);
            if lu == lv {
                return Proposal::Cycle { e };
            }
            return Proposal::Merge { e, su: self.size[lu], sv: self.size[lv] };
        }
        self.detach(e);
        let total = self.size[self.label[u]];
        let (small_is_u, small) = self.smaller_side(u, v);
        self.pending_small = Some((e, small_is_u));
        let (su, sv) = if small_is_u { (small, total - small) } else { (total - small, small) };
        Proposal::Split { e, su, sv }
    }

    /// Apply a proposal returned by [`propose`](Self::propose).
    pub fn commit(&mut self, p: Proposal) {
        match p {
            Proposal::Merge { e, .. } => self.link(e),
            Proposal::Split { e, su, sv } => {
                let (pe, small_is_u) = self.pending_small.take().expect("split pending");
                assert_eq!(pe, e, "commit of a stale split");
                let old = self.label[self.ends[e].0];
                let fresh = self.new_label();
                let idx = if small_is_u { 0 } else { 1 };
                let small = std::mem::take(&mut self.side[idx]);
                for &x in &small {
                    self.label[x] = fresh;
                }
                self.side[idx] = small;
                let (s_small, s_big) = if small_is_u { (su, sv) } else { (sv, su) };
                self.size[fresh] = s_small;
                self.size[old] = s_big;
                self.present[e] = false;
                self.n_present -= 1;
            }
            Proposal::Cycle { .. } => {}
        }
    }

    /// Undo a pending proposal.
    pub fn abort(&mut self, p: Proposal) {
        if let Proposal::Split { e, .. } = p {
            let (pe, _) = self.pending_small.take().expect("split pending");
            assert_eq!(pe, e, "abort of a stale split");
            let (u, v) = self.ends[e];
            self.adj[u].push((v, e));
            self.adj[v].push((u, e));
        }
    }

    /// Toggle edge `e` unconditionally, unless adding it would close a cycle.
    pub fn toggle_edge(&mut self, e: usize) -> ToggleOutcome {
        let p = self.propose(e);
        self.commit(p);
        match p {
            Proposal::Merge { su, sv, .. } => ToggleOutcome::Added { merged: su + sv },
            Proposal::Split { su, sv, .. } => ToggleOutcome::Removed { sizes: (su, sv) },
            Proposal::Cycle { .. } => ToggleOutcome::Rejected,
        }
    }

    fn new_label(&mut self) -> usize {
        self.free.pop().expect("a free label exists whenever a tree splits")
    }

    fn link(&mut self, e: usize) {
        let (u, v) = self.ends[e];
        let (lu, lv) = (self.label[u], self.label[v]);
        debug_assert_ne!(lu, lv);
        // relabel the smaller tree by traversal from its endpoint
        let (keep, gone, start) = if self.size[lu] >= self.size[lv] { (lu, lv, v) } else { (lv, lu, u) };
        let mut stack = vec![start];
        self.label[start] = keep;
        while let Some(x) = stack.pop() {
            for i in 0..self.adj[x].len() {
                let y = self.adj[x][i].0;
                if self.label[y] == gone {
                    self.label[y] = keep;
                    stack.push(y);
                }
            }
        }
        self.size[keep] += self.size[gone];
        self.size[gone] = 0;
        self.free.push(gone);
        self.adj[u].push((v, e));
        self.adj[v].push((u, e));
        self.present[e] = true;
        self.n_present += 1;
    }

    fn detach(&mut self, e: usize) {
        let (u, v) = self.ends[e];
        for x in [u, v] {
            let pos = self.adj[x].iter().position(|&(_, f)| f == e).expect("edge in adjacency");
            self.adj[x].swap_remove(pos);
        }
    }

    /// Lockstep BFS from `u` and `v` in the forest with the edge already
    /// detached. Returns whether the `u` side is the smaller one, and its size.
    /// The vertices of the smaller side are left in `self.side`.
    fn smaller_side(&mut self, u: usize, v: usize) -> (bool, usize) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        let ep = self.epoch;
        for s in &mut self.side {
            s.clear();
        }
        self.side[0].push(u);
        self.side[1].push(v);
        self.mark[u] = ep;
        self.mark[v] = ep;
        let mut head = [0usize, 0usize];
        loop {
            for k in 0..2 {
                if head[k] == self.side[k].len() {
                    return (k == 0, self.side[k].len());
                }
                let x = self.side[k][head[k]];
                head[k] += 1;
                for i in 0..self.adj[x].len() {
                    let y = self.adj[x][i].0;
                    if self.mark[y] != ep {
                        self.mark[y] = ep;
                        self.side[k].push(y);
                    }
                }
            }
        }
    }

    /// Check acyclicity, labels and sizes against a fresh traversal of the
    /// present edges. Returns a description of the first inconsistency.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.vertex_count();
        let mut comp = vec![usize::MAX; n];
        let mut adj = vec![Vec::new(); n];
        for (e, &(u, v)) in self.ends.iter().enumerate() {
            if self.present[e] {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut ncomp = 0;
        let mut edges_seen = 0usize;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = ncomp;
            let mut members = vec![s];
            while let Some(x) = stack.pop() {
                for &y in &adj[x] {
                    if comp[y] == usize::MAX {
                        comp[y] = ncomp;
                        members.push(y);
                        stack.push(y);
                    }
                }
            }
            let deg: usize = members.iter().map(|&x| adj[x].len()).sum();
            edges_seen += deg / 2;
            if deg / 2 + 1 != members.len() {
                return Err(format!("component of {s} is not a tree"));
            }
            let l = self.label[s];
            if members.iter().any(|&x| self.label[x] != l) {
                return Err(format!("labels differ inside component of {s}"));
            }
            if self.size[l] != members.len() {
                return Err(format!("size of label {l} is {} not {}", self.size[l], members.len()));
            }
            ncomp += 1;
        }
        if edges_seen != self.n_present {
            return Err("edge count mismatch".into());
        }
        let mut labels: Vec<usize> = self.label.clone();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != ncomp {
            return Err("two components share a label".into());
        }
        let total: usize = self.tree_sizes().iter().sum();
        if total != n {
            return Err("tree sizes do not sum to the vertex count".into());
        }
        Ok(())
    }

    /// Newline-delimited sorted list of present edge indices.
    pub fn to_snapshot(&self) -> String {
        self.present_edges().iter().map(|e| format!("{e}\n")).collect()
    }

    pub fn from_snapshot(graph: &Graph, text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            edges.push(t.parse::<usize>().map_err(|_| Error::Parse { line: i + 1, msg: "bad edge index".into() })?);
        }
        Self::from_edges(graph, &edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        Graph::builtin("p3").unwrap()
    }

    #[test]
    fn weight_examples() {
        let g = p3();
        let f = ForestState::empty(&g);
        assert_eq!(f.weight(2.0, 0.0).value(), 1.0);
        let f = ForestState::from_edges(&g, &[0]).unwrap();
        let w = f.weight(2.0, 0.5);
        assert!((w.value() - 6.0).abs() < 1e-14);
        assert_eq!(w.product(2.0, 0.5), 6.0);
        let c3 = Graph::builtin("c3").unwrap();
        let f = ForestState::from_edges(&c3, &[0, 1]).unwrap();
        assert!((f.weight(1.7, 0.0).value() - 1.7 * 1.7).abs() < 1e-14);
    }

    #[test]
    fn toggle_examples() {
        let c3 = Graph::builtin("c3").unwrap();
        let mut f = ForestState::empty(&c3);
        assert_eq!(f.toggle_edge(0), ToggleOutcome::Added { merged: 2 });
        assert_eq!(f.toggle_edge(0), ToggleOutcome::Removed { sizes: (1, 1) });
        f.toggle_edge(0);
        f.toggle_edge(1);
        assert_eq!(f.toggle_edge(2), ToggleOutcome::Rejected);
        assert!(!f.is_present(2));
        f.check_invariants().unwrap();
    }

    #[test]
    fn tree_of_examples() {
        let g = p3();
        let mut f = ForestState::from_edges(&g, &[0]).unwrap();
        assert_eq!(f.tree_of(0), f.tree_of(1));
        assert_eq!(f.tree_of(0).1, 2);
        assert_eq!(f.tree_of(2).1, 1);
        f.toggle_edge(1);
        assert!((0..3).all(|x| f.tree_of(x).1 == 3));
    }

    #[test]
    fn abort_restores_state() {
        let c3 = Graph::builtin("c3").unwrap();
        let mut f = ForestState::from_edges(&c3, &[0, 1]).unwrap();
        let p = f.propose(0);
        assert_eq!(p, Proposal::Split { e: 0, su: 1, sv: 2 });
        f.abort(p);
        f.check_invariants().unwrap();
        assert_eq!(f.tree_sizes(), vec![3]);
    }

    #[test]
    fn snapshot_round_trip() {
        let c3 = Graph::builtin("c3").unwrap();
        let f = ForestState::from_edges(&c3, &[2, 0]).unwrap();
        assert_eq!(f.to_snapshot(), "0\n2\n");
        let g = ForestState::from_snapshot(&c3, &f.to_snapshot()).unwrap();
        assert_eq!(g.present_edges(), vec![0, 2]);
        assert!(ForestState::from_snapshot(&c3, "0\n1\n2\n").is_err());
    }

    #[test]
    fn ratio_at_h_zero_is_beta() {
        let p = Proposal::Merge { e: 0, su: 3, sv: 5 };
        assert_eq!(p.weight_ratio(2.5, 0.0), 2.5);
        assert_eq!(p.acceptance(0.0, 0.3), 0.0);
    }
}
