//! Interval partitions and their mixed structure: pair classification,
//! split forests of non-mixed partitions, overlap and mixed graphs, and
//! degeneracy-based colorings.

use crate::error::{Error, Result};
use crate::perm::Biorder;
use std::collections::BTreeSet;

/// A partition of positions `1..=n` into consecutive non-empty intervals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalPartition {
    n: usize,
    parts: Vec<(usize, usize)>,
}

impl IntervalPartition {
    pub fn new(n: usize, parts: Vec<(usize, usize)>) -> Result<Self> {
        let mut next = 1;
        for &(lo, hi) in &parts {
            if lo != next || hi < lo {
                return Err(Error::BadPartition);
            }
            next = hi + 1;
        }
        if next != n + 1 {
            return Err(Error::BadPartition);
        }
        Ok(IntervalPartition { n, parts })
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut parts = Vec::with_capacity(sizes.len());
        let mut next = 1;
        for &s in sizes {
            if s == 0 {
                return Err(Error::BadPartition);
            }
            parts.push((next, next + s - 1));
            next += s;
        }
        IntervalPartition::new(next - 1, parts)
    }

    pub fn singletons(n: usize) -> Self {
        IntervalPartition {
            n,
            parts: (1..=n).map(|x| (x, x)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn parts(&self) -> &[(usize, usize)] {
        &self.parts
    }

    pub fn elements(&self, i: usize) -> impl Iterator<Item = usize> {
        let (lo, hi) = self.parts[i];
        lo..=hi
    }

    /// Order-2 rank span (min, max) of every part.
    pub fn spans(&self, b: &Biorder) -> Vec<(usize, usize)> {
        self.parts
            .iter()
            .map(|&(lo, hi)| {
                let mut mn = usize::MAX;
                let mut mx = 0;
                for e in lo..=hi {
                    let r = b.rank2(e);
                    mn = mn.min(r);
                    mx = mx.max(r);
                }
                (mn, mx)
            })
            .collect()
    }
}

/// Relation between two disjoint parts under the second order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairClass {
    /// All of the first part precedes all of the second.
    Before,
    /// All of the second part precedes all of the first.
    After,
    /// The first part is an interval of the union, cutting the second.
    FirstSplitsSecond,
    /// The second part is an interval of the union, cutting the first.
    SecondSplitsFirst,
    /// Neither part is an interval of the union.
    Mixed,
}

/// Classifies a disjoint pair of element sets under the second order.
pub fn classify_pair(b: &Biorder, p1: &[usize], p2: &[usize]) -> Result<PairClass> {
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::EmptySubset);
    }
    if p1.iter().any(|x| p2.contains(x)) {
        return Err(Error::BadPartition);
    }
    let span = |p: &[usize]| -> (usize, usize) {
        let ranks = p.iter().map(|&x| b.rank2(x));
        (ranks.clone().min().unwrap(), ranks.max().unwrap())
    };
    let (a1, b1) = span(p1);
    let (a2, b2) = span(p2);
    if b1 < a2 {
        return Ok(PairClass::Before);
    }
    if b2 < a1 {
        return Ok(PairClass::After);
    }
    let inside = |p: &[usize], lo: usize, hi: usize| {
        p.iter().any(|&x| {
            let r = b.rank2(x);
            lo < r && r < hi
        })
    };
    let p2_in_1 = inside(p2, a1, b1);
    let p1_in_2 = inside(p1, a2, b2);
    match (p2_in_1, p1_in_2) {
        (false, _) => Ok(PairClass::FirstSplitsSecond),
        (true, false) => Ok(PairClass::SecondSplitsFirst),
        (true, true) => Ok(PairClass::Mixed),
    }
}

/// The laminar forest of a non-mixed family of parts: ancestors are the
/// parts split by a given part; roots and siblings follow the second order.
#[derive(Clone, Debug)]
pub struct SplitForest {
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub roots: Vec<usize>,
}

/// Builds the split forest of arbitrary disjoint element sets, assumed
/// pairwise non-mixed.  Spans that overlap prove a mixed pair and error;
/// with debug assertions every pair is classified.
pub fn build_split_forest(b: &Biorder, parts: &[Vec<usize>]) -> Result<SplitForest> {
    #[cfg(debug_assertions)]
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            if classify_pair(b, &parts[i], &parts[j])? == PairClass::Mixed {
                return Err(Error::MixedPairFound { a: i, b: j });
            }
        }
    }
    let spans: Vec<(usize, usize)> = parts
        .iter()
        .map(|p| {
            if p.is_empty() {
                return Err(Error::EmptySubset);
            }
            let ranks = p.iter().map(|&x| b.rank2(x));
            Ok((ranks.clone().min().unwrap(), ranks.max().unwrap()))
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..parts.len()).collect();
    // Outer spans first: ascending left endpoint, descending right.
    order.sort_by_key(|&i| (spans[i].0, usize::MAX - spans[i].1));
    let mut parent = vec![None; parts.len()];
    let mut children = vec![Vec::new(); parts.len()];
    let mut roots = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for &i in &order {
        while let Some(&top) = stack.last() {
            if spans[top].1 < spans[i].0 {
                stack.pop();
            } else if spans[i].1 <= spans[top].1 {
                break;
            } else {
                return Err(Error::MixedPairFound { a: top, b: i });
            }
        }
        match stack.last() {
            Some(&top) => {
                parent[i] = Some(top);
                children[top].push(i);
            }
            None => roots.push(i),
        }
        stack.push(i);
    }
    Ok(SplitForest {
        parent,
        children,
        roots,
    })
}

/// Whether an edge connects parts with nested or overlapping closures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    Nested,
    Overlap,
}

/// Undirected graph on part indices with tagged edges.
#[derive(Clone, Debug)]
pub struct PartGraph {
    adj: Vec<Vec<(usize, EdgeKind)>>,
}

impl PartGraph {
    pub fn new(parts: usize) -> Self {
        PartGraph {
            adj: vec![Vec::new(); parts],
        }
    }

    pub fn parts(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, a: usize, c: usize, kind: EdgeKind) {
        self.adj[a].push((c, kind));
        self.adj[c].push((a, kind));
    }

    pub fn neighbors(&self, a: usize) -> &[(usize, EdgeKind)] {
        &self.adj[a]
    }

    pub fn degree(&self, a: usize) -> usize {
        self.adj[a].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Sorted edge list `(a, b, kind)` with `a < b`.
    pub fn edge_set(&self) -> Vec<(usize, usize, EdgeKind)> {
        let mut out: Vec<_> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| {
                ns.iter()
                    .filter(move |&&(c, _)| a < c)
                    .map(move |&(c, kind)| (a, c, kind))
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph parts {\n");
        for a in 0..self.adj.len() {
            out.push_str(&format!("  p{a};\n"));
        }
        for (a, c, kind) in self.edge_set() {
            let style = match kind {
                EdgeKind::Nested => "solid",
                EdgeKind::Overlap => "dashed",
            };
            out.push_str(&format!("  p{a} -- p{c} [style={style}];\n"));
        }
        out.push_str("}\n");
        out
    }
}

/// Proper coloring of part indices with colors `1..=count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    pub colors: Vec<usize>,
}

impl Coloring {
    pub fn count(&self) -> usize {
        self.colors.iter().copied().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.colors).expect("serializing a vector of integers")
    }

    /// Part indices grouped by color (1-based color index).
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.count()];
        for (i, &c) in self.colors.iter().enumerate() {
            classes[c - 1].push(i);
        }
        classes
    }
}

/// Overlap (circle) graph of a family of intervals in `1..=n`: edges
/// between intersecting, non-nested intervals, by a left-to-right sweep
/// with a right-endpoint-sorted active list.
pub fn overlap_graph(intervals: &[(usize, usize)]) -> Result<PartGraph> {
    let mut n = 0;
    for &(a, b) in intervals {
        if a == 0 || a > b {
            return Err(Error::BadRange { lo: a, hi: b, n });
        }
        n = n.max(b);
    }
    let mut g = PartGraph::new(intervals.len());
    let mut starting: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for (i, &(a, _)) in intervals.iter().enumerate() {
        starting[a].push(i);
    }
    // Active intervals containing the sweep point, keyed by right endpoint.
    let mut active: BTreeSet<(usize, usize)> = BTreeSet::new();
    for p in 1..=n {
        // Process intervals starting at p by decreasing right endpoint so
        // that same-start (nested) intervals never see each other.
        let mut todo = starting[p].clone();
        todo.sort_by_key(|&i| usize::MAX - intervals[i].1);
        for &i in &todo {
            let b = intervals[i].1;
            // Active intervals with right endpoint in [p, b) started
            // strictly earlier, so they overlap the new interval.
            for &(_, j) in active.range((p, 0)..(b, 0)) {
                g.add_edge(j, i, EdgeKind::Overlap);
            }
            active.insert((b, i));
        }
        // Drop intervals ending at the sweep point.
        let expired: Vec<(usize, usize)> = active.range((p, 0)..(p + 1, 0)).copied().collect();
        for e in expired {
            active.remove(&e);
        }
    }
    Ok(g)
}

/// Exact mixed graph by quadratic pairwise classification.
pub fn mixed_graph_quadratic(b: &Biorder, p: &IntervalPartition) -> Result<PartGraph> {
    let mut g = PartGraph::new(p.len());
    let spans = p.spans(b);
    let sets: Vec<Vec<usize>> = (0..p.len()).map(|i| p.elements(i).collect()).collect();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if classify_pair(b, &sets[i], &sets[j])? == PairClass::Mixed {
                let nested = (spans[i].0 <= spans[j].0 && spans[j].1 <= spans[i].1)
                    || (spans[j].0 <= spans[i].0 && spans[i].1 <= spans[j].1);
                g.add_edge(
                    i,
                    j,
                    if nested {
                        EdgeKind::Nested
                    } else {
                        EdgeKind::Overlap
                    },
                );
            }
        }
    }
    Ok(g)
}

/// Laminar forest of non-overlapping spans with point location: for each
/// rank, the index (into `members`) of the deepest span containing it.
struct LaminarIndex {
    parent: Vec<Option<usize>>,
    deepest: Vec<Option<usize>>,
}

fn laminar_index(members: &[usize], spans: &[(usize, usize)], n: usize) -> LaminarIndex {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by_key(|&i| (spans[members[i]].0, usize::MAX - spans[members[i]].1));
    let mut parent = vec![None; members.len()];
    let mut deepest: Vec<Option<usize>> = vec![None; n + 1];
    let mut stack: Vec<usize> = Vec::new();
    let mut events: Vec<Vec<usize>> = vec![Vec::new(); n + 2];
    for &i in &order {
        events[spans[members[i]].0].push(i);
    }
    for r in 1..=n {
        while let Some(&top) = stack.last() {
            if spans[members[top]].1 < r {
                stack.pop();
            } else {
                break;
            }
        }
        for &i in &events[r] {
            parent[i] = stack.last().copied();
            stack.push(i);
        }
        deepest[r] = stack.last().copied();
    }
    LaminarIndex { parent, deepest }
}

/// The mixed graph of an interval partition: edges exactly between mixed
/// part pairs, tagged by closure relation.  Overlap edges come from the
/// closures' overlap graph; nested edges from walking witnesses up the
/// laminar forests of the overlap-coloring classes.
pub fn mixed_graph(b: &Biorder, p: &IntervalPartition) -> Result<PartGraph> {
    let spans = p.spans(b);
    let e2 = overlap_graph(&spans)?;
    let c2 = greedy_degeneracy_coloring(&e2);
    let mut g = PartGraph::new(p.len());
    for (a, c, _) in e2.edge_set() {
        g.add_edge(a, c, EdgeKind::Overlap);
    }
    // Element -> containing part (elements are order-1 positions).
    let mut part_of = vec![0usize; p.n() + 1];
    for (i, &(lo, hi)) in p.parts().iter().enumerate() {
        for e in lo..=hi {
            part_of[e] = i;
        }
    }
    let mut seen: Vec<Option<usize>> = vec![None; p.len()]; // stamp: outer part
    for members in c2.classes() {
        let idx = laminar_index(&members, &spans, p.n());
        for outer in 0..p.len() {
            for e in p.elements(outer) {
                let r = b.rank2(e);
                let mut cur = idx.deepest[r];
                while let Some(ci) = cur {
                    let a = members[ci];
                    if seen[a] == Some(outer) {
                        break; // the rest of this chain was already walked
                    }
                    let proper = spans[outer].0 <= spans[a].0
                        && spans[a].1 <= spans[outer].1
                        && a != outer;
                    if !proper {
                        break;
                    }
                    seen[a] = Some(outer);
                    g.add_edge(a, outer, EdgeKind::Nested);
                    cur = idx.parent[ci];
                }
            }
        }
        for m in members {
            seen[m] = None;
        }
    }
    Ok(g)
}

/// Minimum-degree peeling order of a graph; returns the removal order and
/// the degeneracy (maximum degree at removal time).  Ties break on the
/// smallest part index.
pub fn degeneracy_order(g: &PartGraph) -> (Vec<usize>, usize) {
    let n = g.parts();
    let mut degree: Vec<usize> = (0..n).map(|v| g.degree(v)).collect();
    let mut alive = vec![true; n];
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (degree[v], v)).collect();
    let mut order = Vec::with_capacity(n);
    let mut degeneracy = 0;
    while let Some(&(d, v)) = queue.iter().next() {
        queue.remove(&(d, v));
        alive[v] = false;
        degeneracy = degeneracy.max(d);
        order.push(v);
        for &(w, _) in g.neighbors(v) {
            if alive[w] && queue.remove(&(degree[w], w)) {
                degree[w] -= 1;
                queue.insert((degree[w], w));
            }
        }
    }
    (order, degeneracy)
}

/// Greedy coloring along the reverse peeling order: proper and using at
/// most degeneracy + 1 colors.
pub fn greedy_degeneracy_coloring(g: &PartGraph) -> Coloring {
    let (order, _) = degeneracy_order(g);
    let mut colors = vec![0usize; g.parts()];
    for &v in order.iter().rev() {
        let used: BTreeSet<usize> = g
            .neighbors(v)
            .iter()
            .map(|&(w, _)| colors[w])
            .filter(|&c| c != 0)
            .collect();
        let mut c = 1;
        while used.contains(&c) {
            c += 1;
        }
        colors[v] = c;
    }
    Coloring { colors }
}

/// Default part-count threshold above which `color_mixed_parts` switches
/// to the overlap-coloring fast path.
pub const FAST_COLORING_THRESHOLD: usize = 512;

pub fn color_mixed_parts(b: &Biorder, p: &IntervalPartition) -> Result<Coloring> {
    color_mixed_parts_with(b, p, FAST_COLORING_THRESHOLD)
}

/// Proper coloring of the mixed graph.  Below the threshold the full
/// quadratic mixed graph is colored directly; above it, an overlap-graph
/// coloring is combined with per-class nested-edge colorings into a
/// product coloring.
pub fn color_mixed_parts_with(
    b: &Biorder,
    p: &IntervalPartition,
    threshold: usize,
) -> Result<Coloring> {
    if p.len() <= threshold {
        return Ok(greedy_degeneracy_coloring(&mixed_graph_quadratic(b, p)?));
    }
    let g = mixed_graph(b, p)?;
    let spans = p.spans(b);
    let e2 = overlap_graph(&spans)?;
    let c2 = greedy_degeneracy_coloring(&e2);
    // Within each overlap-color class, color the nested mixed edges.
    let mut c1 = vec![1usize; p.len()];
    let mut max_c1 = 1;
    for members in c2.classes() {
        let mut index_of = vec![usize::MAX; p.len()];
        for (i, &m) in members.iter().enumerate() {
            index_of[m] = i;
        }
        let mut sub = PartGraph::new(members.len());
        for &m in &members {
            for &(w, kind) in g.neighbors(m) {
                if kind == EdgeKind::Nested && index_of[w] != usize::MAX && m < w {
                    sub.add_edge(index_of[m], index_of[w], EdgeKind::Nested);
                }
            }
        }
        let coloring = greedy_degeneracy_coloring(&sub);
        for (i, &m) in members.iter().enumerate() {
            c1[m] = coloring.colors[i];
            max_c1 = max_c1.max(c1[m]);
        }
    }
    let colors: Vec<usize> = (0..p.len())
        .map(|i| (c2.colors[i] - 1) * max_c1 + c1[i])
        .collect();
    Ok(Coloring { colors })
}

/// Orientation of an overlap graph in which, assuming the graph has no
/// clique of size `t` and no `t`-by-`t` biclique subgraph, every interval
/// has out-degree at most `2(t-1)^2`: each edge is oriented away from the
/// endpoint with at least `t` private ancestors.  Quadratic; used as a
/// density oracle in tests.
pub fn private_ancestor_orientation(
    intervals: &[(usize, usize)],
    t: usize,
) -> Result<Vec<(usize, usize)>> {
    let g = overlap_graph(intervals)?;
    let contains = |outer: (usize, usize), inner: (usize, usize)| {
        outer.0 <= inner.0 && inner.1 <= outer.1
    };
    let private_ancestors = |a: usize, other: usize| -> usize {
        intervals
            .iter()
            .filter(|&&c| contains(c, intervals[a]) && !contains(c, intervals[other]))
            .count()
    };
    let mut oriented = Vec::new();
    for (a, c, _) in g.edge_set() {
        if private_ancestors(a, c) < t {
            oriented.push((c, a)); // towards the endpoint with few ancestors
        } else {
            oriented.push((a, c));
        }
    }
    Ok(oriented)
}
