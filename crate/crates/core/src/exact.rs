//! Exact oracle: enumerate every forest of a small graph and compute the
//! partition function and connection probabilities by direct summation.
//!
//! Forests are generated by depth-first backtracking over the edge list with
//! a union-find structure that supports rollback, so each acyclic subset is
//! visited exactly once. All sums use compensated summation.

use crate::error::{Error, Result};
use crate::forest::{ForestState, Proposal};
use crate::lattice::Graph;
use crate::numeric::CompensatedSum;
use std::collections::HashMap;

/// Largest edge count accepted by the enumerator.
pub const MAX_ENUM_EDGES: usize = 24;
/// Largest edge count accepted by [`sampler_transition_matrix`].
pub const MAX_KERNEL_EDGES: usize = 14;

struct RollbackDsu {
    parent: Vec<usize>,
    size: Vec<usize>,
    history: Vec<(usize, usize)>,
}

impl RollbackDsu {
    fn new(n: usize) -> Self {
        RollbackDsu { parent: (0..n).collect(), size: vec![1; n], history: Vec::new() }
    }
    fn find(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.history.push((rb, ra));
        true
    }
    fn rollback(&mut self) {
        let (rb, ra) = self.history.pop().expect("rollback without union");
        self.parent[rb] = rb;
        self.size[ra] -= self.size[rb];
    }
}

/// A forest visited by [`for_each_forest`].
pub struct ForestView<'a> {
    /// Bit `e` set iff edge `e` is present.
    pub mask: u64,
    /// Number of present edges.
    pub edges: usize,
    /// Root label of every vertex; two vertices share a root iff connected.
    pub root: &'a [usize],
}

fn check_size(graph: &Graph, limit: usize) -> Result<()> {
    if graph.edge_count() > limit {
        return Err(Error::TooLarge(format!(
            "{} edges exceeds the enumeration limit {limit}",
            graph.edge_count()
        )));
    }
    Ok(())
}

/// Call `f` once for every forest of `graph`, in a fixed order.
pub fn for_each_forest(graph: &Graph, mut f: impl FnMut(&ForestView)) -> Result<()> {
    check_size(graph, MAX_ENUM_EDGES)?;
    let ends: Vec<(usize, usize)> = graph.edges().iter().map(|e| (e.u, e.v)).collect();
    let mut dsu = RollbackDsu::new(graph.vertex_count());
    let mut root = vec![0; graph.vertex_count()];
    fn rec(
        i: usize,
        mask: u64,
        k: usize,
        ends: &[(usize, usize)],
        dsu: &mut RollbackDsu,
        root: &mut Vec<usize>,
        f: &mut dyn FnMut(&ForestView),
    ) {
        if i == ends.len() {
            for (x, r) in root.iter_mut().enumerate() {
                *r = dsu.find(x);
            }
            f(&ForestView { mask, edges: k, root });
            return;
        }
        rec(i + 1, mask, k, ends, dsu, root, f);
        let (u, v) = ends[i];
        if dsu.union(u, v) {
            rec(i + 1, mask | (1 << i), k + 1, ends, dsu, root, f);
            dsu.rollback();
        }
    }
    rec(0, 0, 0, &ends, &mut dsu, &mut root, &mut f);
    Ok(())
}

/// All forests as edge masks.
pub fn enumerate_forests(graph: &Graph) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for_each_forest(graph, |v| out.push(v.mask))?;
    Ok(out)
}

/// Per-vertex field sum `H(T)` of each root label, and the forest weight
/// `prod beta_e prod_T (1 + H(T))`.
fn tree_fields_and_weight(graph: &Graph, view: &ForestView, hsum: &mut [f64]) -> f64 {
    hsum.iter_mut().for_each(|s| *s = 0.0);
    for (x, &r) in view.root.iter().enumerate() {
        hsum[r] += graph.h()[x];
    }
    let mut w = 1.0;
    for (e, edge) in graph.edges().iter().enumerate() {
        if view.mask >> e & 1 == 1 {
            w *= edge.beta;
        }
    }
    for (x, &r) in view.root.iter().enumerate() {
        if r == x {
            w *= 1.0 + hsum[x];
        }
    }
    w
}

/// `Z = sum_F prod_{e in F} beta_e prod_T (1 + sum_{x in T} h_x)` with the
/// graph's own edge and vertex weights.
pub fn partition_function(graph: &Graph) -> Result<f64> {
    let mut z = CompensatedSum::new();
    let mut hs = vec![0.0; graph.vertex_count()];
    for_each_forest(graph, |v| z.add(tree_fields_and_weight(graph, v, &mut hs)))?;
    Ok(z.value())
}

/// Matrix-forest determinant `det(L_beta + diag(h))`, where `L_beta` is the
/// edge-weighted Laplacian. Equals the weighted sum over rooted forests with
/// root weight `h_x`.
pub fn matrix_forest_determinant(graph: &Graph) -> f64 {
    let n = graph.vertex_count();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    for e in graph.edges() {
        m[(e.u, e.u)] += e.beta;
        m[(e.v, e.v)] += e.beta;
        m[(e.u, e.v)] -= e.beta;
        m[(e.v, e.u)] -= e.beta;
    }
    for x in 0..n {
        m[(x, x)] += graph.h()[x];
    }
    m.determinant()
}

/// Rooted-forest sum `sum_F prod beta_e prod_T (sum_{x in T} h_x)` by
/// enumeration; the enumeration side of the matrix-forest identity.
pub fn rooted_forest_sum(graph: &Graph) -> Result<f64> {
    let mut z = CompensatedSum::new();
    let mut hs = vec![0.0; graph.vertex_count()];
    for_each_forest(graph, |v| {
        tree_fields_and_weight(graph, v, &mut hs);
        let mut w = 1.0;
        for (e, edge) in graph.edges().iter().enumerate() {
            if v.mask >> e & 1 == 1 {
                w *= edge.beta;
            }
        }
        for (x, &r) in v.root.iter().enumerate() {
            if r == x {
                w *= hs[x];
            }
        }
        z.add(w);
    })?;
    Ok(z.value())
}

/// Exact observables of the arboreal gas on a small graph. Events involving
/// the ghost vertex are computed by summing over the ghost-edge choices of
/// each tree analytically: a tree `T` is joined to the ghost with
/// probability `H(T) / (1 + H(T))`, through vertex `x` with probability
/// `h_x / (1 + H(T))`.
#[derive(Clone, Debug)]
pub struct ExactSummary {
    pub n: usize,
    pub z: f64,
    /// `P[x <-> y]`, row-major `n x n`.
    pub conn: Vec<f64>,
    /// `P[x <-> g]`.
    pub ghost: Vec<f64>,
    /// `P[x <-> y, x !<-> g]`.
    pub conn_unrooted: Vec<f64>,
    /// `P[x !<-> y, x <-> g, y <-> g]`.
    pub both_rooted_apart: Vec<f64>,
    /// `P[x !<-> y, x !<-> g, y !<-> g]`.
    pub none_rooted_apart: Vec<f64>,
    /// `P[x g]`: the ghost edge at `x` is present.
    pub ghost_edge: Vec<f64>,
    /// `P[x g, y g]`.
    pub ghost_edge_pair: Vec<f64>,
    /// `E |T_x|`.
    pub mean_tree_size: Vec<f64>,
    /// Number of forests.
    pub forests: usize,
}

impl ExactSummary {
    #[inline]
    fn at(v: &[f64], n: usize, x: usize, y: usize) -> f64 {
        v[x * n + y]
    }
    pub fn conn(&self, x: usize, y: usize) -> f64 {
        Self::at(&self.conn, self.n, x, y)
    }
    pub fn conn_unrooted(&self, x: usize, y: usize) -> f64 {
        Self::at(&self.conn_unrooted, self.n, x, y)
    }
    pub fn both_rooted_apart(&self, x: usize, y: usize) -> f64 {
        Self::at(&self.both_rooted_apart, self.n, x, y)
    }
    pub fn none_rooted_apart(&self, x: usize, y: usize) -> f64 {
        Self::at(&self.none_rooted_apart, self.n, x, y)
    }
    pub fn ghost_edge_pair(&self, x: usize, y: usize) -> f64 {
        Self::at(&self.ghost_edge_pair, self.n, x, y)
    }
    /// `theta = P[x <-> g]`.
    pub fn theta(&self, x: usize) -> f64 {
        self.ghost[x]
    }
    /// `tau(o, x) = P[o <-> x, o !<-> g]`.
    pub fn tau(&self, o: usize, x: usize) -> f64 {
        self.conn_unrooted(o, x)
    }
    /// `sigma(o, x) = P[o !<-> g] P[x !<-> g] - P[o !<-> x, o !<-> g, x !<-> g]`.
    /// On vertex-transitive graphs the first term is `P[o !<-> g]^2`; the
    /// product form keeps the quantity symmetric in general.
    pub fn sigma(&self, o: usize, x: usize) -> f64 {
        (1.0 - self.ghost[o]) * (1.0 - self.ghost[x]) - self.none_rooted_apart(o, x)
    }
}

/// Compute all exact observables by a single pass over the forests.
pub fn exact_summary(graph: &Graph) -> Result<ExactSummary> {
    let n = graph.vertex_count();
    let h = graph.h();
    let mut z = CompensatedSum::new();
    let nn = n * n;
    let mut conn = vec![CompensatedSum::new(); nn];
    let mut conn_unrooted = vec![CompensatedSum::new(); nn];
    let mut both = vec![CompensatedSum::new(); nn];
    let mut none = vec![CompensatedSum::new(); nn];
    let mut ge_pair = vec![CompensatedSum::new(); nn];
    let mut ghost = vec![CompensatedSum::new(); n];
    let mut ge = vec![CompensatedSum::new(); n];
    let mut size = vec![CompensatedSum::new(); n];
    let mut hs = vec![0.0; n];
    let mut tsize = vec![0usize; n];
    let mut count = 0usize;
    for_each_forest(graph, |v| {
        count += 1;
        let w = tree_fields_and_weight(graph, v, &mut hs);
        z.add(w);
        tsize.iter_mut().for_each(|s| *s = 0);
        for &r in v.root {
            tsize[r] += 1;
        }
        for x in 0..n {
            let rx = v.root[x];
            let hx = hs[rx];
            ghost[x].add(w * hx / (1.0 + hx));
            ge[x].add(w * h[x] / (1.0 + hx));
            size[x].add(w * tsize[rx] as f64);
            for y in 0..n {
                let ry = v.root[y];
                let i = x * n + y;
                if rx == ry {
                    conn[i].add(w);
                    conn_unrooted[i].add(w / (1.0 + hx));
                } else {
                    let hy = hs[ry];
                    let d = (1.0 + hx) * (1.0 + hy);
                    both[i].add(w * hx * hy / d);
                    none[i].add(w / d);
                    ge_pair[i].add(w * h[x] * h[y] / d);
                }
            }
        }
    })?;
    let zv = z.value();
    let fin = |v: Vec<CompensatedSum>| -> Vec<f64> { v.iter().map(|s| s.value() / zv).collect() };
    let mut ge_pair = fin(ge_pair);
    let ge = fin(ge);
    // x = y: the single ghost edge at x
    for x in 0..n {
        ge_pair[x * n + x] = ge[x];
    }
    Ok(ExactSummary {
        n,
        z: zv,
        conn: fin(conn),
        ghost: fin(ghost),
        conn_unrooted: fin(conn_unrooted),
        both_rooted_apart: fin(both),
        none_rooted_apart: fin(none),
        ghost_edge: ge,
        ghost_edge_pair: ge_pair,
        mean_tree_size: fin(size),
        forests: count,
    })
}

/// `P[x <-> y]` under the graph's weights.
pub fn connection_probability(graph: &Graph, x: usize, y: usize) -> Result<f64> {
    Ok(exact_summary(graph)?.conn(x, y))
}

/// `P[x <-> g] = E[H(T_x) / (1 + H(T_x))]`.
pub fn ghost_probability(graph: &Graph, x: usize) -> Result<f64> {
    Ok(exact_summary(graph)?.ghost[x])
}

/// Connection probability in an explicit graph (no ghost reweighting): the
/// plain edge-weighted forest measure with unit tree factors. Applied to a
/// ghost-amended graph this gives `P[x <-> g]` by a route independent of the
/// analytic root expansion.
pub fn plain_connection_probability(graph: &Graph, x: usize, y: usize) -> Result<f64> {
    let mut z = CompensatedSum::new();
    let mut c = CompensatedSum::new();
    for_each_forest(graph, |v| {
        let mut w = 1.0;
        for (e, edge) in graph.edges().iter().enumerate() {
            if v.mask >> e & 1 == 1 {
                w *= edge.beta;
            }
        }
        z.add(w);
        if v.root[x] == v.root[y] {
            c.add(w);
        }
    })?;
    Ok(c.value() / z.value())
}

/// The single-edge Metropolis kernel over all forests, for uniform weights
/// `beta`, `h`. Rows are sparse `(column, probability)` lists.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub forests: Vec<u64>,
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Normalised forest weights.
    pub pi: Vec<f64>,
}

impl TransitionMatrix {
    /// `max_j |(pi P)_j - pi_j|`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut out = vec![CompensatedSum::new(); self.pi.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                out[j].add(self.pi[i] * p);
            }
        }
        out.iter().zip(&self.pi).map(|(s, p)| (s.value() - p).abs()).fold(0.0, f64::max)
    }

    /// `max_i |sum_j P_ij - 1|`.
    pub fn row_sum_residual(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (crate::numeric::ksum(r.iter().map(|x| x.1)) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |pi_i P_ij - pi_j P_ji|` over all pairs.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                let back = self.rows[j].iter().find(|x| x.0 == i).map_or(0.0, |x| x.1);
                worst = worst.max((self.pi[i] * p - self.pi[j] * back).abs());
            }
        }
        worst
    }
}

/// Build the exact kernel of the sampler: from forest `F`, pick an edge
/// uniformly and accept its toggle with the probability the sampler uses
/// ([`Proposal::acceptance`]). The stationary weights are computed
/// independently from [`ForestState::weight`].
pub fn sampler_transition_matrix(graph: &Graph, beta: f64, h: f64) -> Result<TransitionMatrix> {
    check_size(graph, MAX_KERNEL_EDGES)?;
    let forests = enumerate_forests(graph)?;
    let index: HashMap<u64, usize> = forests.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let m = graph.edge_count();
    let mut rows = Vec::with_capacity(forests.len());
    let mut weights = Vec::with_capacity(forests.len());
    for &mask in &forests {
        let present: Vec<usize> = (0..m).filter(|e| mask >> e & 1 == 1).collect();
        let mut state = ForestState::from_edges(graph, &present)?;
        weights.push(state.weight(beta, h).product(beta, h));
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut stay = CompensatedSum::new();
        stay.add(1.0);
        for e in 0..m {
            let p = state.propose(e);
            let acc = p.acceptance(beta, h) / m as f64;
            if let Proposal::Split { .. } = p {
                state.abort(p);
            }
            if acc > 0.0 {
                let j = index[&(mask ^ (1 << e))];
                row.push((j, acc));
                stay.add(-acc);
            }
        }
        let s = stay.value();
        if s > 0.0 {
            row.push((index[&mask], s));
        }
        row.sort_by_key(|x| x.0);
        rows.push(row);
    }
    let total = crate::numeric::ksum(weights.iter().copied());
    let pi = weights.iter().map(|w| w / total).collect();
    Ok(TransitionMatrix { forests, rows, pi })
}

/// All connected simple graphs on `1..=max_n` vertices, one per isomorphism
/// class, in order of vertex count then edge count.
pub fn small_connected_graphs(max_n: usize) -> Vec<Graph> {
    assert!(max_n <= 6, "isomorphism check is brute force");
    let mut out = Vec::new();
    for n in 1..=max_n {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let perms = permutations(n);
        let mut seen: std::collections::HashSet<u64> = std::collections::HashSet::new();
        let mut found: Vec<(usize, Graph)> = Vec::new();
        for mask in 0u64..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &p)| p).collect();
            let g = Graph::unweighted(n, &edges).expect("simple by construction");
            if !g.is_connected() {
                continue;
            }
            let canon = perms
                .iter()
                .map(|p| {
                    edges.iter().fold(0u64, |acc, &(u, v)| {
                        let (a, b) = (p[u].min(p[v]), p[u].max(p[v]));
                        let idx = pairs.iter().position(|&q| q == (a, b)).unwrap();
                        acc | 1 << idx
                    })
                })
                .min()
                .unwrap();
            if seen.insert(canon) {
                found.push((edges.len(), g));
            }
        }
        found.sort_by_key(|x| x.0);
        out.extend(found.into_iter().map(|x| x.1));
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forest_counts() {
        assert_eq!(enumerate_forests(&Graph::builtin("k2").unwrap()).unwrap().len(), 2);
        assert_eq!(enumerate_forests(&Graph::builtin("c3").unwrap()).unwrap().len(), 7);
        assert_eq!(enumerate_forests(&Graph::builtin("p3").unwrap()).unwrap().len(), 4);
        // K4 has 38 forests (16 spanning trees, 15 two-edge forests, ...)
        assert_eq!(enumerate_forests(&Graph::builtin("k4").unwrap()).unwrap().len(), 38);
    }

    #[test]
    fn size_guard() {
        let g = crate::lattice::Torus::with_side(2, 4).unwrap().graph(1.0, 0.0);
        assert!(matches!(enumerate_forests(&g), Err(Error::TooLarge(_))));
    }

    #[test]
    fn small_graph_census() {
        let counts: Vec<usize> = (1..=5).map(|n| {
            small_connected_graphs(5).iter().filter(|g| g.vertex_count() == n).count()
        }).collect();
        assert_eq!(counts, vec![1, 1, 2, 6, 21]);
    }
}
