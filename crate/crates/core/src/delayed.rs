//! Delayed structured trees: construction, realization, quotients and the
//! three-factor decomposition.
//!
//! A delayed structured tree over elements `1..=n` is an ordered tree whose
//! leaves (in left-to-right order) are the elements, where every leaf is a
//! single child, and where every node `t` carries a linear order on its
//! grandchildren.  The tree realizes a second order `≺` on the elements:
//! two leaves are compared at their closest common ancestor `t`, through
//! the grandchildren of `t` containing them.

use crate::error::{Error, Result};
use crate::perm::{Biorder, Permutation};
use crate::rmq::Rmq;
use std::collections::BinaryHeap;

/// Which side of a node's element interval a split witness lies on.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Left,
    Right,
}

/// An element outside a node's interval certifying that two consecutive
/// children are distinguished.
#[derive(Clone, Copy, Debug)]
pub struct SplitWitness {
    pub element: usize,
    pub side: Side,
}

#[derive(Clone, Debug)]
pub struct DelayedNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// `Some(x)` if this node is the leaf carrying element `x`.
    pub leaf: Option<usize>,
    /// Order-1 interval of elements below this node.
    pub lo: usize,
    pub hi: usize,
    /// Grandchild node ids in increasing `≺_t`.
    pub grand_order: Vec<usize>,
    /// One entry per consecutive child pair; `None` is only allowed for
    /// nodes with exactly two children (arbitrary splits).
    pub witnesses: Vec<Option<SplitWitness>>,
}

/// A delayed structured tree over elements `1..=n`.
#[derive(Clone, Debug)]
pub struct DelayedTree {
    n: usize,
    nodes: Vec<DelayedNode>,
    root: usize,
}

impl DelayedTree {
    /// An empty manual tree with a root spanning `1..=n`; intended for
    /// hand-built trees in tests.  `realize` validates the result.
    pub fn manual(n: usize) -> Self {
        DelayedTree {
            n,
            nodes: vec![DelayedNode {
                parent: None,
                children: Vec::new(),
                leaf: None,
                lo: 1,
                hi: n,
                grand_order: Vec::new(),
                witnesses: Vec::new(),
            }],
            root: 0,
        }
    }

    pub fn add_node(&mut self, parent: usize, leaf: Option<usize>, lo: usize, hi: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(DelayedNode {
            parent: Some(parent),
            children: Vec::new(),
            leaf,
            lo,
            hi,
            grand_order: Vec::new(),
            witnesses: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn set_grand_order(&mut self, node: usize, order: Vec<usize>) {
        self.nodes[node].grand_order = order;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: usize) -> &DelayedNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[DelayedNode] {
        &self.nodes
    }

    /// Representative element of a node: its leftmost descendant leaf.
    pub fn representative(&self, id: usize) -> usize {
        self.nodes[id].lo
    }

    /// Depth of the tree (root at depth 0).
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut best = 0;
        for id in 0..self.nodes.len() {
            if let Some(p) = self.nodes[id].parent {
                depth[id] = depth[p] + 1;
                best = best.max(depth[id]);
            }
        }
        best
    }

    /// Rank of every node inside its grandparent's grandchild order, or
    /// `u32::MAX` when absent.
    fn grand_ranks(&self) -> Vec<u32> {
        let mut grank = vec![u32::MAX; self.nodes.len()];
        for node in &self.nodes {
            for (r, &g) in node.grand_order.iter().enumerate() {
                grank[g] = r as u32;
            }
        }
        grank
    }

    /// Recovers the realized biorder, validating that the grandchild
    /// orders induce a single total order on the elements.
    pub fn realize(&self) -> Result<Biorder> {
        let grank = self.grand_ranks();
        let order2 = self.realized_order(&grank)?;
        if order2.len() != self.n {
            return Err(Error::LeafCountMismatch {
                leaves: order2.len(),
                expected: self.n,
            });
        }
        let mut rank2 = vec![0usize; self.n];
        for (i, &(e, _)) in order2.iter().enumerate() {
            let e = e as usize;
            if e == 0 || e > self.n || rank2[e - 1] != 0 {
                return Err(Error::NotWellFormed(format!(
                    "leaf labels are not a permutation of 1..={}",
                    self.n
                )));
            }
            rank2[e - 1] = i + 1;
        }
        Ok(Biorder::from_permutation(&Permutation::new(rank2)?))
    }

    /// Bottom-up merge computing the `≺`-sorted element sequence, each
    /// tagged with the child of the processed node it descends from.
    fn realized_order(&self, grank: &[u32]) -> Result<Vec<(u32, u32)>> {
        let m = self.nodes.len();
        let mut results: Vec<Option<Vec<(u32, u32)>>> = vec![None; m];
        // Children always have larger ids than their parent.
        for id in (0..m).rev() {
            let node = &self.nodes[id];
            if let Some(x) = node.leaf {
                results[id] = Some(vec![(x as u32, id as u32)]);
                continue;
            }
            if node.children.is_empty() {
                return Err(Error::NotWellFormed(format!(
                    "internal node {id} has no children"
                )));
            }
            if node.children.len() == 1 {
                let c = node.children[0];
                let inner = results[c].take().ok_or_else(|| {
                    Error::NotWellFormed(format!("child {c} of node {id} not yet realized"))
                })?;
                results[id] = Some(inner.into_iter().map(|(e, _)| (e, c as u32)).collect());
                continue;
            }
            if node.children.iter().any(|&c| self.nodes[c].leaf.is_some()) {
                return Err(Error::NotWellFormed(format!(
                    "leaf with siblings under node {id}"
                )));
            }
            let mut lists: Vec<Vec<(u32, u32)>> = Vec::with_capacity(node.children.len());
            for &c in &node.children {
                lists.push(results[c].take().ok_or_else(|| {
                    Error::NotWellFormed(format!("child {c} of node {id} not yet realized"))
                })?);
            }
            results[id] = Some(self.merge_lists(id, node, lists, grank)?);
        }
        results[self.root]
            .take()
            .ok_or_else(|| Error::NotWellFormed("root not realized".into()))
    }

    fn merge_lists(
        &self,
        id: usize,
        node: &DelayedNode,
        lists: Vec<Vec<(u32, u32)>>,
        grank: &[u32],
    ) -> Result<Vec<(u32, u32)>> {
        // k-way merge by minimal grandchild rank among list heads.  A
        // cross-list inversion against those ranks means the induced
        // relation is not a total order.
        let total: usize = lists.iter().map(Vec::len).sum();
        let mut out: Vec<(u32, u32)> = Vec::with_capacity(total);
        let mut cursors = vec![0usize; lists.len()];
        let mut heap: BinaryHeap<std::cmp::Reverse<(u32, usize)>> = BinaryHeap::new();
        let rank_of = |tag: u32| -> Result<u32> {
            let r = grank[tag as usize];
            if r == u32::MAX {
                return Err(Error::NotWellFormed(format!(
                    "grandchild {tag} missing from the grandchild order of node {id}"
                )));
            }
            Ok(r)
        };
        for (li, list) in lists.iter().enumerate() {
            if let Some(&(_, tag)) = list.first() {
                heap.push(std::cmp::Reverse((rank_of(tag)?, li)));
            }
        }
        // Top two popped ranks from distinct lists, for inversion checks:
        // popping an element whose rank is below an already-popped rank
        // from another list contradicts the cross-list ordering.
        let mut max1: Option<(u32, usize)> = None; // (rank, list)
        let mut max2: Option<(u32, usize)> = None; // best among lists != max1's
        while let Some(std::cmp::Reverse((rank, li))) = heap.pop() {
            let (elem, _tag) = lists[li][cursors[li]];
            let other_max = match max1 {
                Some((r1, l1)) if l1 != li => Some(r1),
                _ => max2.map(|(r2, _)| r2),
            };
            if other_max.is_some_and(|r| r > rank) {
                let (a, b, c) = self.find_violating_triple(grank)?;
                return Err(Error::NotTotalOrder { a, b, c });
            }
            match max1 {
                None => max1 = Some((rank, li)),
                Some((r1, l1)) if l1 == li => {
                    if rank > r1 {
                        max1 = Some((rank, li));
                    }
                }
                Some((r1, _)) => {
                    if rank > r1 {
                        max2 = max1;
                        max1 = Some((rank, li));
                    } else if max2.map_or(true, |(r2, _)| rank > r2) {
                        max2 = Some((rank, li));
                    }
                }
            }
            out.push((elem, node.children[li] as u32));
            cursors[li] += 1;
            if cursors[li] < lists[li].len() {
                heap.push(std::cmp::Reverse((rank_of(lists[li][cursors[li]].1)?, li)));
            }
        }
        Ok(out)
    }

    /// Direct pairwise comparison of two leaf elements through their
    /// closest common ancestor; `true` when `x ≺ y`.
    fn precedes(
        &self,
        leaf_of: &[usize],
        depth: &[usize],
        grank: &[u32],
        x: usize,
        y: usize,
    ) -> Result<bool> {
        // Walk both up to the common ancestor, then compare through the
        // grandchildren of that ancestor on each side.
        let (mut a, mut b) = (leaf_of[x - 1], leaf_of[y - 1]);
        while depth[a] > depth[b] {
            a = self.nodes[a].parent.unwrap();
        }
        while depth[b] > depth[a] {
            b = self.nodes[b].parent.unwrap();
        }
        while a != b {
            a = self.nodes[a].parent.unwrap();
            b = self.nodes[b].parent.unwrap();
        }
        let lca = a;
        let ca_child = self.child_toward(lca, leaf_of[x - 1], depth);
        let cb_child = self.child_toward(lca, leaf_of[y - 1], depth);
        let ca = self.child_toward(ca_child, leaf_of[x - 1], depth);
        let cb = self.child_toward(cb_child, leaf_of[y - 1], depth);
        let (ra, rb) = (grank[ca], grank[cb]);
        if ra == u32::MAX || rb == u32::MAX || ra == rb {
            return Err(Error::NotWellFormed(format!(
                "elements {x} and {y} are not comparable at their closest ancestor"
            )));
        }
        Ok(ra < rb)
    }

    /// The child of `node` on the path towards the leaf `target`.
    fn child_toward(&self, node: usize, target: usize, depth: &[usize]) -> usize {
        let mut cur = target;
        while depth[cur] > depth[node] + 1 {
            cur = self.nodes[cur].parent.unwrap();
        }
        cur
    }

    fn leaf_index(&self) -> Result<Vec<usize>> {
        let mut leaf_of = vec![usize::MAX; self.n];
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(x) = node.leaf {
                if x == 0 || x > self.n || leaf_of[x - 1] != usize::MAX {
                    return Err(Error::NotWellFormed(format!("bad leaf label {x}")));
                }
                leaf_of[x - 1] = id;
            }
        }
        if leaf_of.iter().any(|&v| v == usize::MAX) {
            return Err(Error::LeafCountMismatch {
                leaves: leaf_of.iter().filter(|&&v| v != usize::MAX).count(),
                expected: self.n,
            });
        }
        Ok(leaf_of)
    }

    fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0usize; self.nodes.len()];
        for id in 0..self.nodes.len() {
            if let Some(p) = self.nodes[id].parent {
                depth[id] = depth[p] + 1;
            }
        }
        depth
    }

    /// Exhaustively searches for a cyclic element triple; used to produce
    /// a precise error once an inconsistency was detected.
    fn find_violating_triple(&self, grank: &[u32]) -> Result<(usize, usize, usize)> {
        let leaf_of = self.leaf_index()?;
        let depth = self.depths();
        for x in 1..=self.n {
            for y in 1..=self.n {
                if y == x {
                    continue;
                }
                for z in 1..=self.n {
                    if z == x || z == y {
                        continue;
                    }
                    if self.precedes(&leaf_of, &depth, grank, x, y)?
                        && self.precedes(&leaf_of, &depth, grank, y, z)?
                        && self.precedes(&leaf_of, &depth, grank, z, x)?
                    {
                        return Ok((x, y, z));
                    }
                }
            }
        }
        Err(Error::NotWellFormed(
            "merge inconsistency without a cyclic triple".into(),
        ))
    }

    /// Structural and semantic well-formedness: leaves are single
    /// children, witnesses are present and valid wherever required, and
    /// every grandchild order is reproduced by its representative map
    /// under the realized order.
    pub fn check_well_formed(&self) -> Result<()> {
        let realized = self.realize()?;
        // min/max realized rank per node.
        let m = self.nodes.len();
        let mut min_rank = vec![usize::MAX; m];
        let mut max_rank = vec![0usize; m];
        for id in (0..m).rev() {
            if let Some(x) = self.nodes[id].leaf {
                min_rank[id] = realized.rank2(x);
                max_rank[id] = realized.rank2(x);
            }
            if let Some(p) = self.nodes[id].parent {
                min_rank[p] = min_rank[p].min(min_rank[id]);
                max_rank[p] = max_rank[p].max(max_rank[id]);
            }
        }
        for (id, node) in self.nodes.iter().enumerate() {
            if node.leaf.is_some() {
                if node.parent.is_none() || self.nodes[node.parent.unwrap()].children.len() != 1 {
                    return Err(Error::NotWellFormed(format!(
                        "leaf {} is not a single child",
                        node.leaf.unwrap()
                    )));
                }
                continue;
            }
            if node.children.len() >= 2 {
                if node.witnesses.len() != node.children.len() - 1 {
                    return Err(Error::NotWellFormed(format!(
                        "node {id} has {} children but {} witness slots",
                        node.children.len(),
                        node.witnesses.len()
                    )));
                }
                for (i, w) in node.witnesses.iter().enumerate() {
                    match w {
                        None => {
                            if node.children.len() > 2 {
                                return Err(Error::NotWellFormed(format!(
                                    "node {id} has three or more children but an unwitnessed pair"
                                )));
                            }
                        }
                        Some(w) => {
                            if w.element >= node.lo && w.element <= node.hi {
                                return Err(Error::NotWellFormed(format!(
                                    "witness {} of node {id} lies inside its interval",
                                    w.element
                                )));
                            }
                            let expect = if w.element < node.lo { Side::Left } else { Side::Right };
                            if w.side != expect {
                                return Err(Error::NotWellFormed(format!(
                                    "witness {} of node {id} carries the wrong side flag",
                                    w.element
                                )));
                            }
                            let (a, b) = (node.children[i], node.children[i + 1]);
                            let wr = realized.rank2(w.element);
                            let between = (max_rank[a] < wr && wr < min_rank[b])
                                || (max_rank[b] < wr && wr < min_rank[a]);
                            if !between {
                                return Err(Error::NotWellFormed(format!(
                                    "witness {} does not distinguish children {a} and {b}",
                                    w.element
                                )));
                            }
                        }
                    }
                }
            }
            // Grandchild order must match the representative map.
            let mut grandchildren: Vec<usize> = Vec::new();
            for &c in &node.children {
                grandchildren.extend(self.nodes[c].children.iter().copied());
                if let Some(x) = self.nodes[c].leaf {
                    let _ = x; // leaves have no children
                }
            }
            let mut expected: Vec<usize> = grandchildren.clone();
            expected.sort_by_key(|&g| realized.rank2(self.representative(g)));
            let mut stored = node.grand_order.clone();
            if stored.len() != expected.len() {
                return Err(Error::NotWellFormed(format!(
                    "node {id} orders {} grandchildren but has {}",
                    stored.len(),
                    expected.len()
                )));
            }
            if stored != expected {
                stored.sort_unstable();
                let mut sorted = expected.clone();
                sorted.sort_unstable();
                if stored != sorted {
                    return Err(Error::NotWellFormed(format!(
                        "grandchild order of node {id} is not the set of its grandchildren"
                    )));
                }
                return Err(Error::NotWellFormed(format!(
                    "grandchild order of node {id} disagrees with its representatives"
                )));
            }
        }
        Ok(())
    }

    /// Indistinguishability classes of the children of `node`, each a list
    /// of child ids in order-1 order; classes are returned in realized
    /// order of their leaf intervals.
    pub fn indistinguishability_classes(&self, node: usize) -> Result<Vec<Vec<usize>>> {
        let realized = self.realize()?;
        self.classes_with_ranks(node, &|x| realized.rank2(x))
    }

    /// Same as `indistinguishability_classes` but with realized ranks
    /// supplied by the caller (avoids re-realizing per node).
    pub fn classes_with_ranks(
        &self,
        node: usize,
        rank: &dyn Fn(usize) -> usize,
    ) -> Result<Vec<Vec<usize>>> {
        let children = &self.nodes[node].children;
        if children.len() <= 1 {
            return Ok(children.iter().map(|&c| vec![c]).collect());
        }
        // Rank span per child and the sorted ranks of the node's leaves.
        let mut spans: Vec<(usize, usize, usize)> = Vec::new(); // (min, max, child)
        for &c in children {
            let (lo, hi) = (self.nodes[c].lo, self.nodes[c].hi);
            let mut mn = usize::MAX;
            let mut mx = 0;
            for e in lo..=hi {
                let r = rank(e);
                mn = mn.min(r);
                mx = mx.max(r);
            }
            spans.push((mn, mx, c));
        }
        let mut inside: Vec<usize> = (self.nodes[node].lo..=self.nodes[node].hi)
            .map(|e| rank(e))
            .collect();
        inside.sort_unstable();
        let inside_count = |a: usize, b: usize| -> usize {
            // ranks strictly between a and b that belong to this node
            let lo = inside.partition_point(|&r| r <= a);
            let hi = inside.partition_point(|&r| r < b);
            hi - lo
        };
        spans.sort_unstable();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut hull: (usize, usize) = (0, 0);
        for &(mn, mx, c) in &spans {
            // Merge into the running class if the spans overlap, or if no
            // rank in the gap belongs to an element outside this node.
            let merge = !classes.is_empty()
                && (mn <= hull.1 || mn - hull.1 - 1 == inside_count(hull.1, mn));
            if merge {
                classes.last_mut().unwrap().push(c);
                hull.1 = hull.1.max(mx);
            } else {
                classes.push(vec![c]);
                hull = (mn, mx);
            }
        }
        // Children inside a class are reported in order-1 order.
        for class in &mut classes {
            class.sort_by_key(|&c| self.nodes[c].lo);
        }
        Ok(classes)
    }

    /// Indented text dump, one node per line, depth-first.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(usize, usize)> = vec![(self.root, 0)];
        while let Some((id, depth)) = stack.pop() {
            let node = &self.nodes[id];
            for _ in 0..depth {
                out.push_str("  ");
            }
            match node.leaf {
                Some(x) => out.push_str(&format!("leaf {x}\n")),
                None => {
                    out.push_str(&format!("node {id} [{}..={}]", node.lo, node.hi));
                    if !node.grand_order.is_empty() {
                        out.push_str(&format!(" grand-order {:?}", node.grand_order));
                    }
                    let wits: Vec<String> = node
                        .witnesses
                        .iter()
                        .map(|w| match w {
                            None => "-".into(),
                            Some(w) => format!(
                                "{}{}",
                                w.element,
                                if w.side == Side::Left { "L" } else { "R" }
                            ),
                        })
                        .collect();
                    if !wits.is_empty() {
                        out.push_str(&format!(" witnesses [{}]", wits.join(",")));
                    }
                    out.push('\n');
                }
            }
            for &c in node.children.iter().rev() {
                stack.push((c, depth + 1));
            }
        }
        out
    }

    /// DOT export: tree edges solid, grandchild orders as dashed chains.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph delayed {\n  node [shape=box];\n");
        for (id, node) in self.nodes.iter().enumerate() {
            let label = match node.leaf {
                Some(x) => format!("leaf {x}"),
                None => format!("{}..={}", node.lo, node.hi),
            };
            out.push_str(&format!("  n{id} [label=\"{label}\"];\n"));
            for &c in &node.children {
                out.push_str(&format!("  n{id} -> n{c};\n"));
            }
            for pair in node.grand_order.windows(2) {
                out.push_str(&format!(
                    "  n{} -> n{} [style=dashed, constraint=false];\n",
                    pair[0], pair[1]
                ));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Preprocessed splitting structures for one biorder (four sparse tables).
pub struct Splitter {
    n: usize,
    sigma: Vec<usize>,
    lmin: Option<Rmq>,
    rmax: Option<Rmq>,
    smin: Rmq,
    smax: Rmq,
}

impl Splitter {
    pub fn new(b: &Biorder) -> Splitter {
        let n = b.n();
        let sigma: Vec<usize> = (1..=n).map(|x| b.rank2(x)).collect();
        let mut pos = vec![0usize; n + 1];
        for (i, &v) in sigma.iter().enumerate() {
            pos[v] = i + 1;
        }
        let pos_vals: Vec<i64> = (1..=n).map(|v| pos[v] as i64).collect();
        let pmin = Rmq::new_min(pos_vals.clone());
        let pmax = Rmq::new_max(pos_vals);
        // Leftmost / rightmost distinguisher of each consecutive pair.
        let mut lvals: Vec<i64> = Vec::with_capacity(n.saturating_sub(1));
        let mut rvals: Vec<i64> = Vec::with_capacity(n.saturating_sub(1));
        for i in 1..n {
            let (a, b2) = (sigma[i - 1], sigma[i]);
            let (lo, hi) = (a.min(b2) + 1, a.max(b2).wrapping_sub(1));
            if lo > hi {
                lvals.push((n + 1) as i64);
                rvals.push(0);
            } else {
                lvals.push(pmin.query(lo - 1, hi - 1).unwrap().1);
                rvals.push(pmax.query(lo - 1, hi - 1).unwrap().1);
            }
        }
        let (lmin, rmax) = if n >= 2 {
            (Some(Rmq::new_min(lvals)), Some(Rmq::new_max(rvals)))
        } else {
            (None, None)
        };
        let smin = Rmq::new_min(sigma.iter().map(|&v| v as i64).collect());
        let smax = Rmq::new_max(sigma.iter().map(|&v| v as i64).collect());
        Splitter { n, sigma, lmin, rmax, smin, smax }
    }

    /// Whether positions `lo..=hi` carry a contiguous set of order-2 ranks.
    pub fn is_value_interval(&self, lo: usize, hi: usize) -> bool {
        let mn = self.smin.query(lo - 1, hi - 1).unwrap().1;
        let mx = self.smax.query(lo - 1, hi - 1).unwrap().1;
        (mx - mn) as usize == hi - lo
    }

    /// Finds a consecutive pair inside `lo..=hi` distinguished by an
    /// element outside `ylo..=yhi`; returns `(p, witness)` meaning the
    /// range splits after position `p`.
    fn outside_split(&self, lo: usize, hi: usize, ylo: usize, yhi: usize) -> Option<(usize, usize)> {
        let lmin = self.lmin.as_ref()?;
        let rmax = self.rmax.as_ref()?;
        let (idx, lval) = lmin.query(lo - 1, hi - 2).unwrap();
        if (lval as usize) < ylo {
            return Some((idx + 1, lval as usize));
        }
        let (idx, rval) = rmax.query(lo - 1, hi - 2).unwrap();
        if (rval as usize) > yhi {
            return Some((idx + 1, rval as usize));
        }
        None
    }

    /// Splits `ylo..=yhi` into its maximal local modules, with a witness
    /// for each boundary.  Errors if the range is an order-2 interval.
    pub fn split_range(&self, ylo: usize, yhi: usize) -> Result<(Vec<(usize, usize)>, Vec<SplitWitness>)> {
        if ylo >= yhi || yhi > self.n {
            return Err(Error::BadRange { lo: ylo, hi: yhi, n: self.n });
        }
        if self.is_value_interval(ylo, yhi) {
            return Err(Error::NoOutsideSplit {
                set: format!("{ylo}..={yhi}"),
            });
        }
        let mut parts: Vec<(usize, usize)> = Vec::new();
        // Indexed by position − ylo; sized to the range so that repeated
        // calls over many small ranges stay linear overall.
        let mut boundary: Vec<Option<SplitWitness>> = vec![None; yhi - ylo + 1];
        let mut stack = vec![(ylo, yhi)];
        while let Some((lo, hi)) = stack.pop() {
            if lo == hi {
                parts.push((lo, hi));
                continue;
            }
            match self.outside_split(lo, hi, ylo, yhi) {
                Some((p, w)) => {
                    let side = if w < ylo { Side::Left } else { Side::Right };
                    boundary[p - ylo] = Some(SplitWitness { element: w, side });
                    stack.push((p + 1, hi));
                    stack.push((lo, p));
                }
                None => parts.push((lo, hi)),
            }
        }
        parts.sort_unstable();
        let mut wits = Vec::with_capacity(parts.len() - 1);
        for &(_, hi) in &parts[..parts.len() - 1] {
            wits.push(boundary[hi - ylo].take().ok_or_else(|| {
                Error::NotWellFormed(format!("missing witness at boundary {hi}"))
            })?);
        }
        Ok((parts, wits))
    }
}

/// Maximal local modules of the order-1 interval `lo..=hi` of `b`, each
/// boundary certified by an outside distinguisher.
pub fn split_local_modules(
    b: &Biorder,
    lo: usize,
    hi: usize,
) -> Result<(Vec<(usize, usize)>, Vec<SplitWitness>)> {
    Splitter::new(b).split_range(lo, hi)
}

/// Builds a delayed structured tree realizing `b`, in O(n log n).
pub fn build_delayed_tree(b: &Biorder) -> Result<DelayedTree> {
    let n = b.n();
    let splitter = Splitter::new(b);
    let mut t = DelayedTree::manual(n);
    // Every element yields at most one leaf and one chain node besides
    // the split nodes; reserving up front avoids arena re-copies.
    t.nodes.reserve(2 * n + 2);
    let mut work: Vec<(usize, usize, usize)> = vec![(t.root, 1, n)];
    while let Some((id, lo, hi)) = work.pop() {
        if lo == hi {
            // The root keeps an internal chain node above its only leaf so
            // that every leaf's parent is a proper internal node.
            let target = if id == t.root {
                t.add_node(id, None, lo, hi)
            } else {
                id
            };
            t.add_node(target, Some(lo), lo, hi);
            continue;
        }
        if splitter.is_value_interval(lo, hi) {
            // Arbitrary split: first part takes the ceiling half.
            let mid = lo + (hi - lo + 2) / 2 - 1;
            let c1 = t.add_node(id, None, lo, mid);
            let c2 = t.add_node(id, None, mid + 1, hi);
            t.nodes[id].witnesses = vec![None];
            work.push((c2, mid + 1, hi));
            work.push((c1, lo, mid));
        } else {
            let (parts, wits) = splitter.split_range(lo, hi)?;
            let mut ids = Vec::with_capacity(parts.len());
            for &(plo, phi) in &parts {
                ids.push(t.add_node(id, None, plo, phi));
            }
            t.nodes[id].witnesses = wits.into_iter().map(Some).collect();
            for (&cid, &(plo, phi)) in ids.iter().zip(&parts).rev() {
                work.push((cid, plo, phi));
            }
        }
    }
    // Grandchild orders from representatives (leftmost leaves).  Keys are
    // packed as `rank << 32 | node` so sorting stays allocation-free.
    let mut grands: Vec<u64> = Vec::new();
    for id in 0..t.nodes.len() {
        grands.clear();
        for ci in 0..t.nodes[id].children.len() {
            let c = t.nodes[id].children[ci];
            for &g in &t.nodes[c].children {
                grands.push(((splitter.sigma[t.nodes[g].lo - 1] as u64) << 32) | g as u64);
            }
        }
        grands.sort_unstable();
        t.nodes[id].grand_order = grands.iter().map(|&k| (k & 0xffff_ffff) as usize).collect();
    }
    Ok(t)
}

/// The quotient of a delayed tree by indistinguishability, with per-node
/// representative elements, ready for substitution.
#[derive(Clone, Debug)]
pub struct QuotientTree {
    pub nodes: Vec<QuotientNode>,
    pub root: usize,
}

#[derive(Clone, Debug)]
pub struct QuotientNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Original tree nodes identified into this class.
    pub members: Vec<usize>,
    /// `Some(x)` if this quotient node is the leaf `x`.
    pub leaf: Option<usize>,
    /// Representative element: leftmost leaf of the order-1-smallest member.
    pub rep: usize,
}

/// Quotients `t` by indistinguishability under the realized order ranks.
pub fn quotient_tree(t: &DelayedTree, rank: &dyn Fn(usize) -> usize) -> Result<QuotientTree> {
    let mut q = QuotientTree {
        nodes: vec![QuotientNode {
            parent: None,
            children: Vec::new(),
            members: vec![t.root()],
            leaf: None,
            rep: t.representative(t.root()),
        }],
        root: 0,
    };
    let mut work: Vec<usize> = vec![0];
    while let Some(qid) = work.pop() {
        // Children classes: union over members of their children classes.
        let mut child_classes: Vec<Vec<usize>> = Vec::new();
        for &m in &q.nodes[qid].members.clone() {
            if t.node(m).leaf.is_some() {
                continue;
            }
            child_classes.extend(t.classes_with_ranks(m, rank)?);
        }
        // Order classes by realized rank of the class leaf interval.
        child_classes.sort_by_key(|class| {
            class
                .iter()
                .flat_map(|&c| (t.node(c).lo..=t.node(c).hi).map(|e| rank(e)))
                .min()
                .unwrap_or(usize::MAX)
        });
        for class in child_classes {
            let leader = *class.iter().min_by_key(|&&c| t.node(c).lo).unwrap();
            let leaf = if class.len() == 1 { t.node(leader).leaf } else { None };
            let id = q.nodes.len();
            q.nodes.push(QuotientNode {
                parent: Some(qid),
                children: Vec::new(),
                members: class,
                leaf,
                rep: t.representative(leader),
            });
            q.nodes[qid].children.push(id);
            if leaf.is_none() {
                work.push(id);
            }
        }
    }
    Ok(q)
}

/// The three-factor decomposition of a delayed tree: `g3 ∘ g2 ∘ g1`
/// equals the realized permutation.  `g1` is the substitution built from
/// representatives, `g2`/`g3` realize the rest along the quotient tree.
pub fn factor_delayed(t: &DelayedTree) -> Result<(Permutation, Permutation, Permutation)> {
    let realized = t.realize()?;
    let n = t.n();
    let rank = |x: usize| realized.rank2(x);

    // Order <' : children of every node reordered by the realized rank of
    // their representatives.
    let oprime = order_prime(t, &rank);

    // Quotient tree and order <'' : classes reordered by representative
    // element (order-1 position).
    let q = quotient_tree(t, &rank)?;
    let osecond = quotient_order(&q, &|qn: &QuotientNode| qn.rep);

    let id_order: Vec<usize> = (1..=n).collect();
    let prec_order = realized.order2_sequence();
    let g1 = perm_between(&id_order, &oprime)?;
    let g2 = perm_between(&oprime, &osecond)?;
    let g3 = perm_between(&osecond, &prec_order)?;
    Ok((g1, g2, g3))
}

/// Extension of the per-node representative orders to a linear order on
/// elements: a traversal of `t` with children sorted by `key` of their
/// representative.
pub fn order_prime(t: &DelayedTree, key: &dyn Fn(usize) -> usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(t.n());
    let mut stack = vec![t.root()];
    while let Some(id) = stack.pop() {
        if let Some(x) = t.node(id).leaf {
            out.push(x);
            continue;
        }
        let mut kids = t.node(id).children.clone();
        kids.sort_by_key(|&c| key(t.representative(c)));
        for &c in kids.iter().rev() {
            stack.push(c);
        }
    }
    out
}

/// Traversal of a quotient tree with children sorted by a node key.
pub fn quotient_order(q: &QuotientTree, key: &dyn Fn(&QuotientNode) -> usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![q.root];
    while let Some(id) = stack.pop() {
        if let Some(x) = q.nodes[id].leaf {
            out.push(x);
            continue;
        }
        let mut kids = q.nodes[id].children.clone();
        kids.sort_by_key(|&c| key(&q.nodes[c]));
        for &c in kids.iter().rev() {
            stack.push(c);
        }
    }
    out
}

/// The permutation mapping positions of order `a` to positions of order `b`.
pub fn perm_between(a: &[usize], b: &[usize]) -> Result<Permutation> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let top = a.iter().copied().max().unwrap_or(0);
    let mut rank_b = vec![0usize; top + 1];
    for (i, &e) in b.iter().enumerate() {
        if e > top || e == 0 {
            return Err(Error::OutOfRange { element: e, n: top });
        }
        rank_b[e] = i + 1;
    }
    let images: Vec<usize> = a.iter().map(|&e| rank_b[e]).collect();
    Permutation::new(images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separable::enumerate_all;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_biorder(n: usize, rng: &mut ChaCha8Rng) -> Biorder {
        let mut images: Vec<usize> = (1..=n).collect();
        images.shuffle(rng);
        Biorder::from_permutation(&Permutation::new(images).unwrap())
    }

    /// Quadratic reference: a boundary after position p of [lo..=hi] exists
    /// iff some element outside [lo..=hi] lies strictly between the order-2
    /// ranks of p and p+1.
    fn boundary_oracle(b: &Biorder, lo: usize, hi: usize) -> Vec<usize> {
        let mut cuts = Vec::new();
        for p in lo..hi {
            let (a, c) = (b.rank2(p), b.rank2(p + 1));
            let (vlo, vhi) = (a.min(c), a.max(c));
            let split = (1..=b.n())
                .filter(|&e| e < lo || e > hi)
                .any(|e| vlo < b.rank2(e) && b.rank2(e) < vhi);
            if split {
                cuts.push(p);
            }
        }
        cuts
    }

    #[test]
    fn round_trip_small_exhaustive() {
        for n in 1..=6 {
            for p in enumerate_all(n).unwrap() {
                let b = Biorder::from_permutation(&p);
                let t = build_delayed_tree(&b).unwrap();
                assert_eq!(t.realize().unwrap().permutation(), p, "n={n} p={p}");
                t.check_well_formed().unwrap();
            }
        }
    }

    #[test]
    fn round_trip_random_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd31a);
        for &n in &[2usize, 10, 100, 1000, 5000] {
            for _ in 0..4 {
                let b = random_biorder(n, &mut rng);
                let t = build_delayed_tree(&b).unwrap();
                let r = t.realize().unwrap();
                assert!((1..=n).all(|x| r.rank2(x) == b.rank2(x)));
            }
        }
    }

    #[test]
    fn singleton_tree_shape() {
        let b = Biorder::from_permutation(&Permutation::identity(1).unwrap());
        let t = build_delayed_tree(&b).unwrap();
        // Root, one internal chain node, one leaf.
        assert_eq!(t.node_count(), 3);
        assert!(t.node(t.root()).leaf.is_none());
        let chain = t.node(t.root()).children[0];
        assert!(t.node(chain).leaf.is_none());
        let leaf = t.node(chain).children[0];
        assert_eq!(t.node(leaf).leaf, Some(1));
        t.check_well_formed().unwrap();
    }

    #[test]
    fn local_module_split_example() {
        // 18-element running example: restricting to the first 12 positions
        // splits into maximal local modules of sizes 4, 1 and 7.
        let p =
            Permutation::new(vec![3, 1, 10, 5, 16, 9, 8, 4, 2, 6, 7, 11, 17, 15, 13, 12, 18, 14])
                .unwrap();
        let b = Biorder::from_permutation(&p);
        let (parts, wits) = split_local_modules(&b, 1, 12).unwrap();
        assert_eq!(parts, vec![(1, 4), (5, 5), (6, 12)]);
        assert_eq!(wits.len(), 2);
        for w in &wits {
            assert!(w.element > 12);
            assert_eq!(w.side, Side::Right);
        }
        // Witnesses must actually distinguish the adjacent parts.
        for (i, w) in wits.iter().enumerate() {
            let span = |(lo, hi): (usize, usize)| {
                let ranks = (lo..=hi).map(|e| b.rank2(e));
                (ranks.clone().min().unwrap(), ranks.max().unwrap())
            };
            let (lmin, lmax) = span(parts[i]);
            let (rmin, rmax) = span(parts[i + 1]);
            let wr = b.rank2(w.element);
            assert!(
                (lmax < wr && wr < rmin) || (rmax < wr && wr < lmin),
                "witness {} does not separate parts {i} and {}",
                w.element,
                i + 1
            );
        }
    }

    #[test]
    fn split_rejects_order2_interval() {
        let p = Permutation::new(vec![2, 1, 4, 3]).unwrap();
        let b = Biorder::from_permutation(&p);
        // Positions 1..=2 carry ranks {1,2}: an order-2 interval.
        assert!(matches!(
            split_local_modules(&b, 1, 2),
            Err(Error::NoOutsideSplit { .. })
        ));
    }

    #[test]
    fn built_parts_are_maximal_local_modules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x51ab);
        for _ in 0..40 {
            let b = random_biorder(30, &mut rng);
            let t = build_delayed_tree(&b).unwrap();
            for node in t.nodes() {
                if node.children.len() < 2 || node.witnesses.iter().any(Option::is_none) {
                    continue; // leaf/chain nodes and arbitrary interval splits
                }
                let cuts = boundary_oracle(&b, node.lo, node.hi);
                let child_cuts: Vec<usize> = node.children[..node.children.len() - 1]
                    .iter()
                    .map(|&c| t.node(c).hi)
                    .collect();
                assert_eq!(child_cuts, cuts, "node [{}..={}]", node.lo, node.hi);
            }
        }
    }

    #[test]
    fn inconsistent_grand_orders_name_a_triple() {
        // Root with two children of two elements each; the root's grandchild
        // order inverts the left child's internal order.
        let mut t = DelayedTree::manual(4);
        let c1 = t.add_node(0, None, 1, 2);
        let c2 = t.add_node(0, None, 3, 4);
        let d1 = t.add_node(c1, None, 1, 1);
        let d2 = t.add_node(c1, None, 2, 2);
        let d3 = t.add_node(c2, None, 3, 3);
        let d4 = t.add_node(c2, None, 4, 4);
        for (d, x) in [(d1, 1), (d2, 2), (d3, 3), (d4, 4)] {
            t.add_node(d, Some(x), x, x);
        }
        let leaves: Vec<usize> = (d1..=d4).map(|d| t.node(d).children[0]).collect();
        t.set_grand_order(c1, vec![leaves[0], leaves[1]]);
        t.set_grand_order(c2, vec![leaves[2], leaves[3]]);
        t.set_grand_order(0, vec![d2, d3, d1, d4]);
        match t.realize() {
            Err(Error::NotTotalOrder { a, b, c }) => assert_eq!((a, b, c), (1, 2, 3)),
            other => panic!("expected a cyclic triple, got {other:?}"),
        }
    }

    #[test]
    fn indistinguishability_classes_example() {
        // Three top-level blocks; realized order 8,1,3,9,2 | 7,4,6 | 10,5,11.
        let sigma = [8usize, 1, 3, 9, 2, 7, 4, 6, 10, 5, 11];
        let p = Permutation::new(sigma.to_vec()).unwrap();
        let b = Biorder::from_permutation(&p);
        let mut t = DelayedTree::manual(11);
        let blocks = [(1usize, 5usize), (6, 8), (9, 11)];
        let mut chains: Vec<Vec<usize>> = Vec::new();
        for &(lo, hi) in &blocks {
            let c = t.add_node(0, None, lo, hi);
            let mut ds = Vec::new();
            for x in lo..=hi {
                let d = t.add_node(c, None, x, x);
                t.add_node(d, Some(x), x, x);
                ds.push(d);
            }
            chains.push(ds);
        }
        // Grandchild orders from the intended realized ranks.
        let kids: Vec<usize> = t.node(0).children.to_vec();
        for (ci, &c) in kids.iter().enumerate() {
            let mut gs: Vec<usize> = chains[ci].iter().map(|&d| t.node(d).children[0]).collect();
            gs.sort_by_key(|&g| b.rank2(t.node(g).lo));
            t.set_grand_order(c, gs);
        }
        let mut top: Vec<usize> = chains.iter().flatten().copied().collect();
        top.sort_by_key(|&d| b.rank2(t.node(d).lo));
        t.set_grand_order(0, top);
        assert_eq!(t.realize().unwrap().permutation(), p);

        let labels = |classes: Vec<Vec<usize>>| -> Vec<Vec<usize>> {
            classes
                .iter()
                .map(|cl| cl.iter().map(|&c| sigma[t.node(c).lo - 1]).collect())
                .collect()
        };
        // Expected sibling classes, in realized order, labelled by rank.
        assert_eq!(
            labels(t.indistinguishability_classes(kids[0]).unwrap()),
            vec![vec![1, 3, 2], vec![8, 9]]
        );
        assert_eq!(
            labels(t.indistinguishability_classes(kids[1]).unwrap()),
            vec![vec![4], vec![7, 6]]
        );
        assert_eq!(
            labels(t.indistinguishability_classes(kids[2]).unwrap()),
            vec![vec![5], vec![10, 11]]
        );
    }

    #[test]
    fn three_factor_decomposition() {
        for n in 1..=5 {
            for p in enumerate_all(n).unwrap() {
                let b = Biorder::from_permutation(&p);
                let t = build_delayed_tree(&b).unwrap();
                let (g1, g2, g3) = factor_delayed(&t).unwrap();
                assert_eq!(g3.compose(&g2.compose(&g1).unwrap()).unwrap(), p, "n={n} p={p}");
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xfac7);
        for _ in 0..100 {
            let b = random_biorder(50, &mut rng);
            let t = build_delayed_tree(&b).unwrap();
            let (g1, g2, g3) = factor_delayed(&t).unwrap();
            assert_eq!(g3.compose(&g2.compose(&g1).unwrap()).unwrap(), b.permutation());
        }
    }

    #[test]
    fn dumps_render() {
        let p = Permutation::new(vec![3, 1, 4, 2]).unwrap();
        let t = build_delayed_tree(&Biorder::from_permutation(&p)).unwrap();
        let text = t.to_text();
        assert!(text.contains("leaf 3"));
        assert!(text.lines().count() >= t.node_count() - 1);
        let dot = t.to_dot();
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("style=dashed"));
    }
}
