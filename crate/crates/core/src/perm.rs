//! Permutations, biorders and ordered trees.
//!
//! A permutation of size `n` maps positions `1..=n` to values `1..=n`.  A
//! biorder is the same object seen as a set carrying two linear orders; we
//! keep biorders in canonical form, where the first order is the identity
//! order on `1..=n` and the second order is described by the rank of every
//! element.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// A permutation of `{1, .., n}`, stored as the image sequence.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    /// Builds a permutation from its one-line notation (1-based images).
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        if n == 0 {
            return Err(Error::Empty);
        }
        let mut seen = vec![false; n];
        for &v in &images {
            if v == 0 || v > n {
                return Err(Error::NotAPermutation {
                    len: n,
                    reason: format!("value {v} out of range"),
                });
            }
            if seen[v - 1] {
                return Err(Error::NotAPermutation {
                    len: n,
                    reason: format!("value {v} repeated"),
                });
            }
            seen[v - 1] = true;
        }
        Ok(Self { images })
    }

    /// The identity permutation of size `n`.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new((1..=n).collect())
    }

    /// The decreasing permutation `n, n-1, .., 1`.
    pub fn reversal(n: usize) -> Result<Self> {
        Self::new((1..=n).rev().collect())
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Image of position `i` (1-based).
    pub fn apply(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &v)| v == i + 1)
    }

    /// `self ∘ other`: `other` is applied first.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.len() != other.len() {
            return Err(Error::SizeMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        let images = (1..=self.len()).map(|i| self.apply(other.apply(i))).collect();
        Permutation::new(images)
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.len()];
        for (i, &v) in self.images.iter().enumerate() {
            images[v - 1] = i + 1;
        }
        Permutation { images }
    }

    /// The symmetry `i ↦ n+1−σ(n+1−i)` (reverses both orders).
    pub fn symmetry(&self) -> Permutation {
        let n = self.len();
        let images = (1..=n).map(|i| n + 1 - self.apply(n + 1 - i)).collect();
        Permutation { images }
    }

    /// Searches for an occurrence of `pattern` and returns the 1-based
    /// positions of the leftmost (lexicographically smallest) witness.
    pub fn contains_pattern(&self, pattern: &Permutation) -> Option<Vec<usize>> {
        let n = self.len();
        let k = pattern.len();
        if k > n {
            return None;
        }
        // Backtracking over position tuples; a partial choice is kept only
        // while its values realize the corresponding partial pattern.
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        fn consistent(perm: &Permutation, pattern: &Permutation, chosen: &[usize], cand: usize) -> bool {
            let d = chosen.len();
            let vc = perm.apply(cand);
            for (j, &p) in chosen.iter().enumerate() {
                let vp = perm.apply(p);
                if (pattern.apply(j + 1) < pattern.apply(d + 1)) != (vp < vc) {
                    return false;
                }
            }
            true
        }
        fn search(
            perm: &Permutation,
            pattern: &Permutation,
            chosen: &mut Vec<usize>,
            start: usize,
        ) -> bool {
            let k = pattern.len();
            let n = perm.len();
            if chosen.len() == k {
                return true;
            }
            let remaining = k - chosen.len();
            for cand in start..=n + 1 - remaining {
                if consistent(perm, pattern, chosen, cand) {
                    chosen.push(cand);
                    if search(perm, pattern, chosen, cand + 1) {
                        return true;
                    }
                    chosen.pop();
                }
            }
            false
        }
        if search(self, pattern, &mut chosen, 1) {
            Some(chosen)
        } else {
            None
        }
    }

    /// Direct sum: `other` appended above and after `self`.
    pub fn direct_sum(&self, other: &Permutation) -> Permutation {
        let n = self.len();
        let mut images = self.images.clone();
        images.extend(other.images.iter().map(|&v| v + n));
        Permutation { images }
    }

    /// Skew sum: `other` appended after `self`, below it.
    pub fn skew_sum(&self, other: &Permutation) -> Permutation {
        let m = other.len();
        let mut images: Vec<usize> = self.images.iter().map(|&v| v + m).collect();
        images.extend(other.images.iter().copied());
        Permutation { images }
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({})", self)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.images.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for Permutation {
    type Err = Error;

    /// Parses whitespace- or comma-separated one-line notation.
    fn from_str(s: &str) -> Result<Self> {
        let mut images = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == ',') {
            if tok.is_empty() {
                continue;
            }
            let v: usize = tok.parse().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("invalid integer {tok:?}"),
            })?;
            images.push(v);
        }
        Permutation::new(images)
    }
}

/// A set `{1, .., n}` with two linear orders, in canonical form: the first
/// order is `1 < 2 < .. < n`, and `rank2[x-1]` is the rank of `x` in the
/// second order.  Canonically a biorder and a permutation carry the same
/// data; the two types mark which reading is intended.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Biorder {
    rank2: Vec<usize>,
}

impl Biorder {
    /// Biorder of a permutation: element `x` has order-2 rank `σ(x)`.
    pub fn from_permutation(p: &Permutation) -> Self {
        Self {
            rank2: p.images().to_vec(),
        }
    }

    /// Builds a biorder from two orders given as element sequences, then
    /// canonicalizes by renaming elements to their order-1 ranks.
    pub fn from_orders(order1: &[usize], order2: &[usize]) -> Result<Self> {
        let n = order1.len();
        if n != order2.len() {
            return Err(Error::SizeMismatch {
                left: n,
                right: order2.len(),
            });
        }
        // Validate that both sequences enumerate the same element set.
        let p1 = Permutation::new(order1.to_vec())?;
        let _p2 = Permutation::new(order2.to_vec())?;
        // rank1[x-1] = position of x in order1; the canonical name of x.
        let rank1 = p1.inverse();
        let mut rank2 = vec![0; n];
        for (j, &x) in order2.iter().enumerate() {
            rank2[rank1.apply(x) - 1] = j + 1;
        }
        Ok(Self { rank2 })
    }

    pub fn n(&self) -> usize {
        self.rank2.len()
    }

    /// Order-2 rank of element `x`.
    pub fn rank2(&self, x: usize) -> usize {
        self.rank2[x - 1]
    }

    /// `x ≺ y` in the second order.
    pub fn before2(&self, x: usize, y: usize) -> bool {
        self.rank2(x) < self.rank2(y)
    }

    /// The defining permutation `σ(X, <₁, <₂)`.
    pub fn permutation(&self) -> Permutation {
        Permutation {
            images: self.rank2.clone(),
        }
    }

    /// Elements listed in increasing order-2.
    pub fn order2_sequence(&self) -> Vec<usize> {
        let mut seq: Vec<usize> = (1..=self.n()).collect();
        seq.sort_by_key(|&x| self.rank2(x));
        seq
    }

    /// Swap the two orders (the inverse permutation).
    pub fn swap_orders(&self) -> Biorder {
        Biorder {
            rank2: self.permutation().inverse().images,
        }
    }

    /// Reverse both orders (the symmetry `i ↦ n+1−σ(n+1−i)`).
    pub fn symmetry(&self) -> Biorder {
        Biorder {
            rank2: self.permutation().symmetry().images,
        }
    }

    /// Restriction to a non-empty element subset, canonicalized.  The
    /// subset may be given in any order.
    pub fn restrict(&self, subset: &[usize]) -> Result<Biorder> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut elems = subset.to_vec();
        elems.sort_unstable();
        elems.dedup();
        if elems.len() != subset.len() {
            return Err(Error::BadPartition);
        }
        for &x in &elems {
            if x == 0 || x > self.n() {
                return Err(Error::OutOfRange {
                    element: x,
                    n: self.n(),
                });
            }
        }
        // Rank the restricted order-2 values.
        let mut by2: Vec<usize> = (0..elems.len()).collect();
        by2.sort_by_key(|&i| self.rank2(elems[i]));
        let mut rank2 = vec![0; elems.len()];
        for (r, &i) in by2.iter().enumerate() {
            rank2[i] = r + 1;
        }
        Ok(Biorder { rank2 })
    }
}

impl fmt::Display for Biorder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.permutation())
    }
}

/// A rooted tree with ordered children; leaves carry element labels.
#[derive(Clone, Debug)]
pub struct OrderedTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// `Some(x)` for the leaf carrying element `x`.
    pub leaf: Option<usize>,
}

impl OrderedTree {
    /// Creates a tree with a single root node (no children yet).
    pub fn new_root() -> Self {
        OrderedTree {
            nodes: vec![TreeNode {
                parent: None,
                children: Vec::new(),
                leaf: None,
            }],
            root: 0,
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn add_child(&mut self, parent: usize, leaf: Option<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            parent: Some(parent),
            children: Vec::new(),
            leaf,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].leaf.is_some()
    }

    /// Leaf labels in left-to-right (in-order) sequence.
    pub fn leaf_sequence(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if let Some(x) = self.nodes[id].leaf {
                out.push(x);
            }
            for &c in self.nodes[id].children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Internal (non-leaf) node ids in preorder.
    pub fn internal_nodes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if self.nodes[id].leaf.is_none() {
                out.push(id);
            }
            for &c in self.nodes[id].children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }
}

/// Realizes the substitution of node-level permutations along an ordered
/// tree whose leaves, read left to right, are the positions `1..=n`.
///
/// `node_perms[id]` must hold a permutation whose size equals the number of
/// children of node `id`, for every internal node with at least two
/// children; single-child nodes may omit theirs.
pub fn substitute_along_tree(
    tree: &OrderedTree,
    node_perms: &dyn Fn(usize) -> Option<Permutation>,
) -> Result<Permutation> {
    let leaves = tree.leaf_sequence();
    let n = leaves.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    for (i, &x) in leaves.iter().enumerate() {
        if x != i + 1 {
            return Err(Error::MalformedTree(format!(
                "leaf at in-order position {} is labeled {}",
                i + 1,
                x
            )));
        }
    }
    // Recursively produce the order-2 sequence of leaves.
    fn order2_of(
        tree: &OrderedTree,
        node_perms: &dyn Fn(usize) -> Option<Permutation>,
        id: usize,
    ) -> Result<Vec<usize>> {
        if let Some(x) = tree.node(id).leaf {
            return Ok(vec![x]);
        }
        let children = &tree.node(id).children;
        if children.is_empty() {
            return Err(Error::MalformedTree("internal node without children".into()));
        }
        let per_child: Vec<Vec<usize>> = children
            .iter()
            .map(|&c| order2_of(tree, node_perms, c))
            .collect::<Result<_>>()?;
        let tau = match node_perms(id) {
            Some(p) => {
                if p.len() != children.len() {
                    return Err(Error::ArityMismatch {
                        children: children.len(),
                        perm: p.len(),
                    });
                }
                p
            }
            None => {
                if children.len() > 1 {
                    return Err(Error::ArityMismatch {
                        children: children.len(),
                        perm: 0,
                    });
                }
                Permutation::identity(1)?
            }
        };
        // Child at order-1 position i has order-2 rank τ(i): emit children
        // in increasing order-2 rank.
        let inv = tau.inverse();
        let mut out = Vec::new();
        for r in 1..=children.len() {
            out.extend(per_child[inv.apply(r) - 1].iter().copied());
        }
        Ok(out)
    }
    let order2 = order2_of(tree, node_perms, tree.root())?;
    let mut images = vec![0; n];
    for (r, &x) in order2.iter().enumerate() {
        images[x - 1] = r + 1;
    }
    Permutation::new(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Permutation {
        s.parse().unwrap()
    }

    #[test]
    fn rejects_empty_and_non_permutations() {
        assert!(Permutation::new(vec![]).is_err());
        assert!(Permutation::new(vec![1, 1]).is_err());
        assert!(Permutation::new(vec![2, 3]).is_err());
    }

    #[test]
    fn compose_right_to_left() {
        // Worked three-factor product for 163524.
        let f1 = p("1 2 3 5 4 6");
        let f2 = p("1 4 5 2 3 6");
        let f3 = p("1 2 5 6 3 4");
        let prod = f3.compose(&f2.compose(&f1).unwrap()).unwrap();
        assert_eq!(prod, p("1 6 3 5 2 4"));
    }

    #[test]
    fn inverse_and_symmetry() {
        let s = p("3 1 4 2");
        assert!(s.compose(&s.inverse()).unwrap().is_identity());
        // Symmetry of 2413 is 2413's reverse-complement: fixed under it.
        assert_eq!(p("2 4 1 3").symmetry(), p("2 4 1 3"));
        assert_eq!(p("1 3 2").symmetry(), p("2 1 3"));
    }

    #[test]
    fn pattern_search_finds_leftmost_witness() {
        // 163524 contains 2413: positions 3,4,5,6 hold values 3,5,2,4.
        let s = p("1 6 3 5 2 4");
        assert_eq!(s.contains_pattern(&p("2 4 1 3")), Some(vec![3, 4, 5, 6]));
        let s2 = p("3 1 4 2");
        assert_eq!(s2.contains_pattern(&p("3 1 4 2")), Some(vec![1, 2, 3, 4]));
        assert_eq!(s2.contains_pattern(&p("2 4 1 3")), None);
        assert_eq!(p("1 2 3").contains_pattern(&p("2 1")), None);
    }

    #[test]
    fn biorder_roundtrip_and_restrict() {
        let s = p("2 4 1 3");
        let b = Biorder::from_permutation(&s);
        assert_eq!(b.permutation(), s);
        assert_eq!(b.order2_sequence(), vec![3, 1, 4, 2]);
        // Restriction of 2413 to {1,2,4} has pattern 2 3 1? ranks 2,4,3 -> 1 3 2.
        let r = b.restrict(&[1, 2, 4]).unwrap();
        assert_eq!(r.permutation(), p("1 3 2"));
        assert!(b.restrict(&[]).is_err());
        assert!(b.restrict(&[0]).is_err());
    }

    #[test]
    fn biorder_from_orders_canonicalizes() {
        // Elements {1,2,3} with order1 = 2,1,3 and order2 = 3,2,1:
        // renaming by order-1 rank: 2↦1, 1↦2, 3↦3; order2 becomes 3,1,2,
        // so rank2 = (2,3,1)? element 1 (old 2) has rank 2, element 2 (old 1)
        // has rank 3, element 3 has rank 1.
        let b = Biorder::from_orders(&[2, 1, 3], &[3, 2, 1]).unwrap();
        assert_eq!(b.permutation(), p("2 3 1"));
    }

    #[test]
    fn substitution_realizes_trees() {
        // Root with two children: a leaf block {1,2} ordered 21 and leaf 3,
        // outer order 12: result 2 1 3.
        let mut t = OrderedTree::new_root();
        let a = t.add_child(t.root(), None);
        t.add_child(a, Some(1));
        t.add_child(a, Some(2));
        t.add_child(t.root(), Some(3));
        let root = t.root();
        let perms = move |id: usize| -> Option<Permutation> {
            if id == root {
                Some("1 2".parse().unwrap())
            } else if id == a {
                Some("2 1".parse().unwrap())
            } else {
                None
            }
        };
        let s = substitute_along_tree(&t, &perms).unwrap();
        assert_eq!(s, p("2 1 3"));
    }
}
