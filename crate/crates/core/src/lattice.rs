//! Tori `Z^d / L^N Z^d`, general finite weighted graphs, and the ghost
//! amendment.
//!
//! Torus vertices are indexed in row-major order (last coordinate varies
//! fastest). Torus edges are listed axis by axis, and within an axis by the
//! index of the lower endpoint `x`, as the pair `(x, x + e_axis)`.

use crate::error::{Error, Result};
use std::collections::HashSet;

/// The discrete torus of side `L^N` in dimension `d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Torus {
    d: usize,
    l: usize,
    n: usize,
    side: usize,
    volume: usize,
}

impl Torus {
    /// Build the torus `Z^d / L^N Z^d`. Sides below 3 are rejected because
    /// they would produce loops or parallel edges.
    pub fn new(d: usize, l: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidTorus("dimension must be positive".into()));
        }
        if l < 2 {
            return Err(Error::InvalidTorus(format!("block side L={l} must be at least 2")));
        }
        if n == 0 {
            return Err(Error::InvalidTorus("scale count N must be at least 1".into()));
        }
        let side = l
            .checked_pow(n as u32)
            .ok_or_else(|| Error::InvalidTorus("side overflows".into()))?;
        Self::with_side_inner(d, l, n, side)
    }

    /// A torus of arbitrary side, not necessarily a power of a block size.
    /// `block()` and `scales()` then report `(side, 1)`.
    pub fn with_side(d: usize, side: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidTorus("dimension must be positive".into()));
        }
        Self::with_side_inner(d, side, 1, side)
    }

    fn with_side_inner(d: usize, l: usize, n: usize, side: usize) -> Result<Self> {
        if side < 3 {
            return Err(Error::InvalidTorus(format!(
                "side {side} < 3 gives a multigraph"
            )));
        }
        let volume = side
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidTorus("volume overflows".into()))?;
        Ok(Torus { d, l, n, side, volume })
    }

    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn block(&self) -> usize {
        self.l
    }
    pub fn scales(&self) -> usize {
        self.n
    }
    pub fn side(&self) -> usize {
        self.side
    }
    pub fn volume(&self) -> usize {
        self.volume
    }
    pub fn edge_count(&self) -> usize {
        self.d * self.volume
    }

    /// Coordinates of vertex `x`.
    pub fn coords(&self, mut x: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for i in (0..self.d).rev() {
            c[i] = x % self.side;
            x /= self.side;
        }
        c
    }

    /// Index of the vertex with the given coordinates, reduced mod the side.
    pub fn index(&self, c: &[i64]) -> usize {
        debug_assert_eq!(c.len(), self.d);
        let s = self.side as i64;
        c.iter().fold(0usize, |acc, &ci| acc * self.side + ci.rem_euclid(s) as usize)
    }

    /// `x` shifted by one step along `axis`, forwards or backwards.
    pub fn step(&self, x: usize, axis: usize, forward: bool) -> usize {
        let stride = self.side.pow((self.d - 1 - axis) as u32);
        let coord = (x / stride) % self.side;
        let new = if forward {
            (coord + 1) % self.side
        } else {
            (coord + self.side - 1) % self.side
        };
        x - coord * stride + new * stride
    }

    /// The `2d` neighbours of `x`, ordered `+e_0, -e_0, +e_1, -e_1, ...`.
    pub fn neighbors(&self, x: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).flat_map(move |a| [self.step(x, a, true), self.step(x, a, false)])
    }

    /// Edge list in the canonical order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::with_capacity(self.edge_count());
        for a in 0..self.d {
            for x in 0..self.volume {
                e.push((x, self.step(x, a, true)));
            }
        }
        e
    }

    /// Minimal-image displacement `y - x`, each component in
    /// `(-side/2, side/2]`.
    pub fn displacement(&self, x: usize, y: usize) -> Vec<i64> {
        let cx = self.coords(x);
        let cy = self.coords(y);
        let s = self.side as i64;
        cx.iter()
            .zip(&cy)
            .map(|(&a, &b)| {
                let mut r = (b as i64 - a as i64).rem_euclid(s);
                if r > s / 2 {
                    r -= s;
                }
                r
            })
            .collect()
    }

    /// `(l-infinity distance, Euclidean norm)` of the minimal displacement.
    pub fn distances(&self, x: usize, y: usize) -> (usize, f64) {
        let v = self.displacement(x, y);
        let linf = v.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
        let e2: i64 = v.iter().map(|c| c * c).sum();
        (linf, (e2 as f64).sqrt())
    }

    /// The vertex `x - y` (difference in the torus group); kernels of
    /// translation-invariant operators are indexed by it.
    pub fn difference(&self, x: usize, y: usize) -> usize {
        let cx = self.coords(x);
        let cy = self.coords(y);
        let diff: Vec<i64> = cx.iter().zip(&cy).map(|(&a, &b)| a as i64 - b as i64).collect();
        self.index(&diff)
    }

    /// The torus as a weighted graph with uniform edge weight `beta` and
    /// vertex weight `h`.
    pub fn graph(&self, beta: f64, h: f64) -> Graph {
        let edges = self.edges().into_iter().map(|(u, v)| (u, v, beta)).collect();
        Graph::new(self.volume, edges)
            .expect("torus of side >= 3 is simple")
            .with_uniform_h(h)
    }
}

/// A weighted edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub beta: f64,
}

/// A finite simple graph with edge weights `beta_uv` and vertex weights
/// `h_x`. If `ghost` is set, the last vertex is the ghost vertex and the
/// edges touching it carry the vertex weights of their other endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    h: Vec<f64>,
    ghost: Option<usize>,
}

fn check_weight(w: f64, what: &str) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::InvalidGraph(format!("{what} weight {w} must be finite and >= 0")));
    }
    Ok(())
}

impl Graph {
    /// Build a graph from `(u, v, beta)` triples. Vertex weights start at 0.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (u, v, beta) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) out of range for n={n}")));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("parallel edge ({u},{v})")));
            }
            check_weight(beta, "edge")?;
            out.push(Edge { u, v, beta });
        }
        Ok(Graph { n, edges: out, h: vec![0.0; n], ghost: None })
    }

    /// Unit-weight graph from an edge list.
    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)).collect())
    }

    /// Small named graphs: `k1`, `k2` (single edge), `p3`, `c3`, `c4`, `k4`,
    /// `p4`, `star4`.
    pub fn builtin(name: &str) -> Result<Self> {
        let (n, e): (usize, Vec<(usize, usize)>) = match name {
            "k1" => (1, vec![]),
            "k2" | "edge" => (2, vec![(0, 1)]),
            "p3" => (3, vec![(0, 1), (1, 2)]),
            "c3" => (3, vec![(0, 1), (1, 2), (0, 2)]),
            "p4" => (4, vec![(0, 1), (1, 2), (2, 3)]),
            "c4" => (4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]),
            "star4" => (4, vec![(0, 1), (0, 2), (0, 3)]),
            "k4" => (4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),
            _ => return Err(Error::InvalidGraph(format!("unknown builtin graph '{name}'"))),
        };
        Self::unweighted(n, &e)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    pub fn h(&self) -> &[f64] {
        &self.h
    }
    pub fn ghost(&self) -> Option<usize> {
        self.ghost
    }

    /// Replace every edge weight by `beta` and every vertex weight by `h`.
    pub fn reweighted(&self, beta: f64, h: f64) -> Self {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.beta = beta;
        }
        g.with_uniform_h(h)
    }

    pub fn with_uniform_h(mut self, h: f64) -> Self {
        self.h = vec![h; self.n];
        self
    }

    pub fn with_h(mut self, h: Vec<f64>) -> Result<Self> {
        if h.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: h.len() });
        }
        for &w in &h {
            check_weight(w, "vertex")?;
        }
        self.h = h;
        Ok(self)
    }

    /// Adjacency lists of `(neighbour, edge index)`.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.u].push((e.v, i));
            adj[e.v].push((e.u, i));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = stack.pop() {
            for &(y, _) in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    stack.push(y);
                }
            }
        }
        count == self.n
    }

    /// Add the ghost vertex `n`, joined to every base vertex `x` by an edge of
    /// weight `h_x` (the current vertex weights). The vertex weights of the
    /// result are all zero: the external field now lives on the ghost edges.
    pub fn amend_with_ghost(&self) -> Self {
        let g = self.n;
        let mut edges = self.edges.clone();
        for x in 0..self.n {
            edges.push(Edge { u: x, v: g, beta: self.h[x] });
        }
        Graph { n: self.n + 1, edges, h: vec![0.0; self.n + 1], ghost: Some(g) }
    }

    /// Parse the edge-list text format: a header `n m`, then `m` lines
    /// `u v beta`, then optional `h x value` lines. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let (hl, header) = lines.next().ok_or_else(|| perr(0, "missing header"))?;
        let hv: Vec<&str> = header.split_whitespace().collect();
        if hv.len() != 2 {
            return Err(perr(hl, "header must be 'n m'"));
        }
        let n: usize = hv[0].parse().map_err(|_| perr(hl, "bad vertex count"))?;
        let m: usize = hv[1].parse().map_err(|_| perr(hl, "bad edge count"))?;
        let mut edges = Vec::with_capacity(m);
        let mut h = vec![0.0; n];
        for (ln, line) in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.first() == Some(&"h") {
                if t.len() != 3 {
                    return Err(perr(ln, "expected 'h x value'"));
                }
                let x: usize = t[1].parse().map_err(|_| perr(ln, "bad vertex"))?;
                let v: f64 = t[2].parse().map_err(|_| perr(ln, "bad field value"))?;
                if x >= n {
                    return Err(perr(ln, "vertex out of range"));
                }
                h[x] = v;
            } else {
                if edges.len() == m {
                    return Err(perr(ln, "more edges than declared"));
                }
                if t.len() != 3 {
                    return Err(perr(ln, "expected 'u v beta'"));
                }
                let u: usize = t[0].parse().map_err(|_| perr(ln, "bad endpoint"))?;
                let v: usize = t[1].parse().map_err(|_| perr(ln, "bad endpoint"))?;
                let b: f64 = t[2].parse().map_err(|_| perr(ln, "bad weight"))?;
                edges.push((u, v, b));
            }
        }
        if edges.len() != m {
            return Err(perr(0, &format!("declared {m} edges, found {}", edges.len())));
        }
        Graph::new(n, edges)?.with_h(h)
    }

    /// Serialise to the edge-list format; `h` lines are written for nonzero
    /// vertex weights.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            s.push_str(&format!("{} {} {:e}\n", e.u, e.v, e.beta));
        }
        for (x, &hx) in self.h.iter().enumerate() {
            if hx != 0.0 {
                s.push_str(&format!("h {x} {hx:e}\n"));
            }
        }
        s
    }
}
