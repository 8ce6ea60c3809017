//! Path-system graphs encoding factor products, their adjacency
//! matrices and grid-freeness checks, and ordered subdivisions of
//! sparse graphs built from the edge biorder.

use crate::error::{Error, Result};
use crate::factor::factor_pipeline;
use crate::minor::{find_minor_with_cap, Matrix01, MinorKind, MinorWitness, DEFAULT_DIVISION_CAP};
use crate::perm::{Biorder, Permutation};
use std::fmt::Write as _;

/// A disjoint union of n paths arranged in m+1 ordered layers, one
/// matching per consecutive layer pair.  The matching between layers
/// i−1 and i joins position x to position σ_i(x), so following the
/// paths from the first layer to the last reads off σ_m ∘ … ∘ σ_1.
#[derive(Clone, Debug)]
pub struct PathSystemGraph {
    n: usize,
    factors: Vec<Permutation>,
}

impl PathSystemGraph {
    /// Number of elements per layer.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of matchings (the layer count is m + 1).
    pub fn m(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Permutation] {
        &self.factors
    }

    /// Matching edges between layers i−1 and i, 1-based positions.
    pub fn matching(&self, i: usize) -> Vec<(usize, usize)> {
        (1..=self.n)
            .map(|x| (x, self.factors[i - 1].apply(x)))
            .collect()
    }

    /// Position in the last layer reached from position x in the first.
    pub fn follow(&self, x: usize) -> usize {
        self.factors.iter().fold(x, |p, f| f.apply(p))
    }

    /// The composed permutation read off by path-following.
    pub fn composed(&self) -> Result<Permutation> {
        Permutation::new((1..=self.n).map(|x| self.follow(x)).collect())
    }

    /// Index of the vertex at position x of layer i in the canonical
    /// order (first layer first, positions in order), 1-based.
    pub fn canonical_index(&self, layer: usize, x: usize) -> usize {
        layer * self.n + x
    }

    pub fn vertex_count(&self) -> usize {
        (self.m() + 1) * self.n
    }

    /// DOT rendering with one ranked column per layer.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph pathsystem {\n  rankdir=LR;\n");
        for layer in 0..=self.m() {
            let _ = writeln!(out, "  subgraph cluster_{layer} {{ rank=same;");
            for x in 1..=self.n {
                let _ = writeln!(out, "    v{layer}_{x} [label=\"{x}\"];");
            }
            out.push_str("  }\n");
        }
        for i in 1..=self.m() {
            for (x, y) in self.matching(i) {
                let _ = writeln!(out, "  v{}_{x} -- v{i}_{y};", i - 1);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Builds the path system of a factor list (applied left to right).
pub fn build_path_system(factors: &[Permutation]) -> Result<PathSystemGraph> {
    let first = factors.first().ok_or(Error::Empty)?;
    let n = first.len();
    for f in factors {
        if f.len() != n {
            return Err(Error::SizeMismatch {
                left: n,
                right: f.len(),
            });
        }
    }
    Ok(PathSystemGraph {
        n,
        factors: factors.to_vec(),
    })
}

/// Symmetric adjacency matrix of the path system under the canonical
/// vertex order: permutation-matrix blocks on the double diagonal.
pub fn path_system_matrix(g: &PathSystemGraph) -> Matrix01 {
    let size = g.vertex_count();
    let mut bits = vec![false; size * size];
    for i in 1..=g.m() {
        for (x, y) in g.matching(i) {
            let a = g.canonical_index(i - 1, x) - 1;
            let b = g.canonical_index(i, y) - 1;
            bits[a * size + b] = true;
            bits[b * size + a] = true;
        }
    }
    Matrix01::new(size, size, bits).expect("square matrix of declared size")
}

/// Outcome of a grid search on a path-system matrix.
#[derive(Clone, Debug)]
pub struct GridReport {
    /// Grid size whose absence was to be certified (3r + 2).
    pub target: usize,
    /// No grid of the target size exists.
    pub gridfree: bool,
    /// Largest grid found below the target (always ≥ 1 on a nonempty
    /// matrix: a single all-ones cell division).
    pub largest_found: usize,
    pub witness: Option<MinorWitness>,
}

/// Exhaustively searches the path-system matrix for grid minors up to
/// size 3r + 2 and reports the largest one found.
pub fn check_path_system_gridfree(g: &PathSystemGraph, r: usize) -> Result<GridReport> {
    let m = path_system_matrix(g);
    let target = 3 * r + 2;
    let mut largest = 0;
    let mut witness = None;
    for k in 1..=target {
        match find_minor_with_cap(&m, k, MinorKind::Grid, DEFAULT_DIVISION_CAP)? {
            Some(w) => {
                largest = k;
                witness = Some(w);
            }
            None => break,
        }
    }
    Ok(GridReport {
        target,
        gridfree: largest < target,
        largest_found: largest,
        witness,
    })
}

/// A simple undirected graph with a total vertex order 1..n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl OrderedGraph {
    /// Builds a graph on n ordered vertices; edges are normalized to
    /// (min, max), deduplicated, and must be loop-free and in range.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut norm = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u == 0 || v == 0 || u > n || v > n {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) out of range 1..={n}"
                )));
            }
            if u == v {
                return Err(Error::Graph(format!("loop at vertex {u}")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(OrderedGraph { n, edges: norm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as (min, max) pairs, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Text format: header "n m", then one "u v" line per edge.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.edges.len());
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (lno, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let parse_pair = |line: usize, s: &str| -> Result<(usize, usize)> {
            let mut it = s.split_whitespace();
            let bad = || Error::Parse {
                line: line + 1,
                msg: format!("expected two integers, got {s:?}"),
            };
            let a = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            let b = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if it.next().is_some() {
                return Err(bad());
            }
            Ok((a, b))
        };
        let (n, m) = parse_pair(lno, header)?;
        let mut edges = Vec::with_capacity(m);
        for (lno, line) in lines {
            edges.push(parse_pair(lno, line)?);
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: lno + 1,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        OrderedGraph::new(n, &edges)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph ordered {\n");
        for v in 1..=self.n {
            let _ = writeln!(out, "  v{v};");
        }
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "  v{u} -- v{v};");
        }
        out.push_str("}\n");
        out
    }

    fn degree_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n + 1];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }
}

/// The biorder of the directed edges (each oriented from smaller to
/// larger endpoint): order 1 is lexicographic by (source, target),
/// order 2 lexicographic by (target, source).
pub fn edge_biorder(g: &OrderedGraph) -> Result<Option<Biorder>> {
    if g.edges().is_empty() {
        return Ok(None);
    }
    let e = g.edges().len();
    let by_source: Vec<usize> = (1..=e).collect();
    let mut by_target: Vec<usize> = (1..=e).collect();
    by_target.sort_by_key(|&i| {
        let (u, v) = g.edges()[i - 1];
        (v, u)
    });
    Ok(Some(Biorder::from_orders(&by_source, &by_target)?))
}

/// Builds the subdivided ordered graph: original vertices first under
/// their order, then the path system of the edge permutation's
/// factorization under its canonical order.  Every original edge
/// becomes a path through one interior vertex per layer.  Returns the
/// graph and the factor count m.
pub fn build_subdivision(g: &OrderedGraph) -> Result<(OrderedGraph, usize)> {
    let sigma = match edge_biorder(g)? {
        Some(b) => b,
        None => return Ok((g.clone(), 0)),
    };
    let cert = factor_pipeline(&sigma.permutation())?;
    let factors: Vec<Permutation> = if cert.factors.is_empty() {
        vec![Permutation::identity(sigma.n())?]
    } else {
        cert.factors.iter().rev().cloned().collect()
    };
    let ps = build_path_system(&factors)?;
    let m = ps.m();
    let n = g.n();
    let e = g.edges().len();
    let offset = |layer: usize, x: usize| n + ps.canonical_index(layer, x);
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity((m + 2) * e);
    // Matching edges between consecutive layers.
    for i in 1..=m {
        for (x, y) in ps.matching(i) {
            edges.push((offset(i - 1, x), offset(i, y)));
        }
    }
    // Attachment: edge i (in source order) hangs off its source at the
    // first layer and off its target at the last layer, where its path
    // ends at the edge's target-order position.
    let mut target_pos = vec![0usize; e + 1];
    {
        let mut by_target: Vec<usize> = (1..=e).collect();
        by_target.sort_by_key(|&i| {
            let (u, v) = g.edges()[i - 1];
            (v, u)
        });
        for (pos, &i) in by_target.iter().enumerate() {
            target_pos[i] = pos + 1;
        }
    }
    for i in 1..=e {
        let (u, v) = g.edges()[i - 1];
        edges.push((u, offset(0, i)));
        debug_assert_eq!(ps.follow(i), target_pos[i]);
        edges.push((v, offset(m, target_pos[i])));
    }
    Ok((OrderedGraph::new(n + ps.vertex_count(), &edges)?, m))
}

/// Reference subdivision: replaces each edge by a path through `inner`
/// fresh vertices, appended after the original vertex order.
pub fn naive_subdivision(g: &OrderedGraph, inner: usize) -> Result<OrderedGraph> {
    let mut next = g.n() + 1;
    let mut edges = Vec::new();
    for &(u, v) in g.edges() {
        let mut prev = u;
        for _ in 0..inner {
            edges.push((prev, next));
            prev = next;
            next += 1;
        }
        edges.push((prev, v));
    }
    OrderedGraph::new(next - 1, &edges)
}

/// Exact graph-isomorphism check by backtracking on degree-compatible
/// assignments; intended for the small graphs used in tests.
pub fn isomorphic(a: &OrderedGraph, b: &OrderedGraph) -> bool {
    if a.n() != b.n() || a.edges().len() != b.edges().len() {
        return false;
    }
    let n = a.n();
    let adj_a = a.degree_lists();
    let adj_b = b.degree_lists();
    let mut deg_a: Vec<usize> = adj_a.iter().map(|l| l.len()).collect();
    let mut deg_b: Vec<usize> = adj_b.iter().map(|l| l.len()).collect();
    deg_a.sort_unstable();
    deg_b.sort_unstable();
    if deg_a != deg_b {
        return false;
    }
    let has_edge_b: std::collections::HashSet<(usize, usize)> =
        b.edges().iter().copied().collect();
    // Assign vertices of `a` in decreasing-degree order; prefer
    // candidates adjacent to already-mapped neighbors.
    let mut order: Vec<usize> = (1..=n).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(adj_a[v].len()));
    let mut map = vec![0usize; n + 1];
    let mut used = vec![false; n + 1];
    fn backtrack(
        idx: usize,
        order: &[usize],
        adj_a: &[Vec<usize>],
        adj_b: &[Vec<usize>],
        has_edge_b: &std::collections::HashSet<(usize, usize)>,
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if idx == order.len() {
            return true;
        }
        let v = order[idx];
        let n = map.len() - 1;
        for w in 1..=n {
            if used[w] || adj_b[w].len() != adj_a[v].len() {
                continue;
            }
            let ok = adj_a[v].iter().all(|&x| {
                map[x] == 0 || has_edge_b.contains(&(map[x].min(w), map[x].max(w)))
            });
            if !ok {
                continue;
            }
            map[v] = w;
            used[w] = true;
            if backtrack(idx + 1, order, adj_a, adj_b, has_edge_b, map, used) {
                return true;
            }
            map[v] = 0;
            used[w] = false;
        }
        false
    }
    backtrack(0, &order, &adj_a, &adj_b, &has_edge_b, &mut map, &mut used)
}

/// Checks that the first-layer and last-layer neighborhoods of every
/// original vertex form intervals of the subdivided graph's order.
pub fn interval_neighborhoods(g: &OrderedGraph, sub: &OrderedGraph, m: usize) -> bool {
    let n = g.n();
    let e = g.edges().len();
    let first_layer = |x: usize| n + x;
    let last_layer = |x: usize| n + m * e + x;
    for v in 1..=n {
        for layer in [0usize, 1] {
            let mut hits: Vec<usize> = sub
                .edges()
                .iter()
                .filter_map(|&(a, b)| {
                    let (orig, other) = if a == v {
                        (a, b)
                    } else if b == v {
                        (b, a)
                    } else {
                        return None;
                    };
                    let _ = orig;
                    let in_layer = if layer == 0 {
                        other > n && other <= first_layer(e)
                    } else {
                        other > last_layer(0) && other <= last_layer(e)
                    };
                    in_layer.then_some(other)
                })
                .collect();
            hits.sort_unstable();
            if hits.windows(2).any(|w| w[1] != w[0] + 1) {
                return false;
            }
        }
    }
    true
}
