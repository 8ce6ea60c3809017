//! Separable permutations: detection, separating trees, and a small
//! exhaustive oracle for the separable index.

use crate::error::{Error, Result};
use crate::perm::Permutation;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

/// Largest `n` accepted by [`separable_index_oracle`].
pub const SEPARABLE_INDEX_ORACLE_CAP: usize = 7;

/// A separating tree: leaves are order-1 positions, internal nodes are
/// direct sums (`+`) or skew sums (`-`) with at least two children.  In
/// canonical form consecutive levels alternate polarity.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SeparatingTree {
    Leaf(usize),
    Sum {
        /// `true` for a direct sum (`+`), `false` for a skew sum (`-`).
        direct: bool,
        children: Vec<SeparatingTree>,
    },
}

impl SeparatingTree {
    pub fn leaf_count(&self) -> usize {
        match self {
            SeparatingTree::Leaf(_) => 1,
            SeparatingTree::Sum { children, .. } => children.iter().map(|c| c.leaf_count()).sum(),
        }
    }

    fn leaves_into(&self, out: &mut Vec<usize>) {
        match self {
            SeparatingTree::Leaf(x) => out.push(*x),
            SeparatingTree::Sum { children, .. } => {
                for c in children {
                    c.leaves_into(out);
                }
            }
        }
    }

    /// Leaf labels in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.leaves_into(&mut out);
        out
    }
}

/// Tests separability via the interval-merging stack; linear time.
pub fn is_separable(p: &Permutation) -> bool {
    separating_tree(p).is_ok()
}

/// Builds a separating tree, or reports the size of the irreducible stack.
pub fn separating_tree(p: &Permutation) -> Result<SeparatingTree> {
    struct Item {
        lo: usize,
        hi: usize,
        tree: SeparatingTree,
    }
    let mut stack: Vec<Item> = Vec::new();
    for pos in 1..=p.len() {
        let v = p.apply(pos);
        let mut cur = Item {
            lo: v,
            hi: v,
            tree: SeparatingTree::Leaf(pos),
        };
        while let Some(top) = stack.last() {
            let direct = top.hi + 1 == cur.lo;
            let skew = cur.hi + 1 == top.lo;
            if !direct && !skew {
                break;
            }
            let top = stack.pop().unwrap();
            cur = Item {
                lo: top.lo.min(cur.lo),
                hi: top.hi.max(cur.hi),
                tree: merge(top.tree, cur.tree, direct),
            };
        }
        stack.push(cur);
    }
    if stack.len() == 1 {
        Ok(stack.pop().unwrap().tree)
    } else {
        Err(Error::NotSeparable { stack: stack.len() })
    }
}

/// Joins two trees under a sum node, flattening same-polarity children so
/// the result stays canonical (alternating levels, arity >= 2).
fn merge(left: SeparatingTree, right: SeparatingTree, direct: bool) -> SeparatingTree {
    let mut children = Vec::new();
    let mut absorb = |t: SeparatingTree| match t {
        SeparatingTree::Sum {
            direct: d,
            children: cs,
        } if d == direct => children.extend(cs),
        other => children.push(other),
    };
    absorb(left);
    absorb(right);
    SeparatingTree::Sum { direct, children }
}

/// Realizes a separating tree back into its permutation.  The leaves, read
/// left to right, must be exactly `1..=n`.
pub fn realize_separating_tree(t: &SeparatingTree) -> Result<Permutation> {
    let leaves = t.leaves();
    for (i, &x) in leaves.iter().enumerate() {
        if x != i + 1 {
            return Err(Error::MalformedTree(format!(
                "leaf at in-order position {} is labeled {}",
                i + 1,
                x
            )));
        }
    }
    fn realize(t: &SeparatingTree) -> Result<Permutation> {
        match t {
            SeparatingTree::Leaf(_) => Permutation::identity(1),
            SeparatingTree::Sum { direct, children } => {
                if children.len() < 2 {
                    return Err(Error::MalformedTree(
                        "sum node with fewer than two children".into(),
                    ));
                }
                let mut acc: Option<Permutation> = None;
                for c in children {
                    let r = realize(c)?;
                    acc = Some(match acc {
                        None => r,
                        Some(a) => {
                            if *direct {
                                a.direct_sum(&r)
                            } else {
                                a.skew_sum(&r)
                            }
                        }
                    });
                }
                Ok(acc.unwrap())
            }
        }
    }
    realize(t)
}

impl fmt::Display for SeparatingTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeparatingTree::Leaf(x) => write!(f, "{x}"),
            SeparatingTree::Sum { direct, children } => {
                write!(f, "({}", if *direct { "+" } else { "-" })?;
                for c in children {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for SeparatingTree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut toks: Vec<String> = Vec::new();
        let mut cur = String::new();
        for ch in s.chars() {
            match ch {
                '(' | ')' => {
                    if !cur.is_empty() {
                        toks.push(std::mem::take(&mut cur));
                    }
                    toks.push(ch.to_string());
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        toks.push(std::mem::take(&mut cur));
                    }
                }
                c => cur.push(c),
            }
        }
        if !cur.is_empty() {
            toks.push(cur);
        }
        fn parse(toks: &[String], at: &mut usize) -> Result<SeparatingTree> {
            let err = |msg: &str| Error::Parse {
                line: 1,
                msg: msg.to_string(),
            };
            let tok = toks.get(*at).ok_or_else(|| err("unexpected end of input"))?;
            if tok == "(" {
                *at += 1;
                let op = toks.get(*at).ok_or_else(|| err("missing operator"))?;
                let direct = match op.as_str() {
                    "+" => true,
                    "-" => false,
                    other => return Err(err(&format!("expected + or -, got {other:?}"))),
                };
                *at += 1;
                let mut children = Vec::new();
                while toks.get(*at).map(String::as_str) != Some(")") {
                    children.push(parse(toks, at)?);
                }
                *at += 1; // consume ")"
                if children.len() < 2 {
                    return Err(err("sum node needs at least two children"));
                }
                Ok(SeparatingTree::Sum { direct, children })
            } else if tok == ")" {
                Err(err("unexpected )"))
            } else {
                let x: usize = tok
                    .parse()
                    .map_err(|_| err(&format!("invalid leaf label {tok:?}")))?;
                *at += 1;
                Ok(SeparatingTree::Leaf(x))
            }
        }
        let mut at = 0;
        let t = parse(&toks, &mut at)?;
        if at != toks.len() {
            return Err(Error::Parse {
                line: 1,
                msg: "trailing tokens after tree".into(),
            });
        }
        Ok(t)
    }
}

/// Lehmer rank of a permutation, used to index `S_n` exhaustively.
fn lehmer_rank(p: &Permutation) -> usize {
    let n = p.len();
    let mut rank = 0usize;
    let mut fact = 1usize;
    for i in (1..=n).rev() {
        let smaller_after = (i + 1..=n).filter(|&j| p.apply(j) < p.apply(i)).count();
        rank += smaller_after * fact;
        fact *= n - i + 1;
    }
    rank
}

/// All separable members of `S_n`.
pub fn enumerate_separable(n: usize) -> Result<Vec<Permutation>> {
    let mut out = Vec::new();
    for p in enumerate_all(n)? {
        if is_separable(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// All of `S_n`, in lexicographic order.
pub fn enumerate_all(n: usize) -> Result<Vec<Permutation>> {
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut out = Vec::new();
    let mut images: Vec<usize> = (1..=n).collect();
    loop {
        out.push(Permutation::new(images.clone())?);
        // Next lexicographic arrangement.
        let Some(i) = (0..n - 1).rev().find(|&i| images[i] < images[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| images[j] > images[i]).unwrap();
        images.swap(i, j);
        images[i + 1..].reverse();
    }
    Ok(out)
}

/// Smallest `k <= max_k` such that `p` is a product of `k` separable
/// permutations, by breadth-first closure of the separables under
/// composition.  The identity has index 0 (the empty product).  Only
/// `n <= SEPARABLE_INDEX_ORACLE_CAP` is supported.
pub fn separable_index_oracle(p: &Permutation, max_k: usize) -> Result<Option<usize>> {
    let n = p.len();
    if n > SEPARABLE_INDEX_ORACLE_CAP {
        return Err(Error::OracleCap {
            n,
            cap: SEPARABLE_INDEX_ORACLE_CAP,
        });
    }
    let fact: usize = (1..=n).product();
    let mut dist: Vec<Option<u8>> = vec![None; fact];
    let id = Permutation::identity(n)?;
    dist[lehmer_rank(&id)] = Some(0);
    if p.is_identity() {
        return Ok(Some(0));
    }
    let seps = enumerate_separable(n)?;
    let target = lehmer_rank(p);
    let mut frontier: VecDeque<Permutation> = VecDeque::new();
    frontier.push_back(id);
    for k in 1..=max_k.min(255) {
        let mut next = VecDeque::new();
        while let Some(tau) = frontier.pop_front() {
            for s in &seps {
                let prod = s.compose(&tau)?;
                let r = lehmer_rank(&prod);
                if dist[r].is_none() {
                    dist[r] = Some(k as u8);
                    if r == target {
                        return Ok(Some(k));
                    }
                    next.push_back(prod);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Permutation {
        s.parse().unwrap()
    }

    /// Oracle: separable iff avoiding both 2413 and 3142.
    fn separable_by_avoidance(s: &Permutation) -> bool {
        s.contains_pattern(&p("2 4 1 3")).is_none() && s.contains_pattern(&p("3 1 4 2")).is_none()
    }

    #[test]
    fn detection_matches_pattern_avoidance_up_to_s6() {
        // Schröder counts 1, 2, 6, 22, 90, 394 for n = 1..6.
        let expected = [1usize, 2, 6, 22, 90, 394];
        for n in 1..=6 {
            let mut count = 0;
            for s in enumerate_all(n).unwrap() {
                let sep = is_separable(&s);
                assert_eq!(sep, separable_by_avoidance(&s), "disagree on {s}");
                if sep {
                    count += 1;
                    let t = separating_tree(&s).unwrap();
                    assert_eq!(realize_separating_tree(&t).unwrap(), s);
                }
            }
            assert_eq!(count, expected[n - 1]);
        }
    }

    #[test]
    fn tree_serialization_roundtrip() {
        let t = separating_tree(&p("2 1 3")).unwrap();
        assert_eq!(t.to_string(), "(+ (- 1 2) 3)");
        let back: SeparatingTree = t.to_string().parse().unwrap();
        assert_eq!(back, t);
        assert!("(+ 1)".parse::<SeparatingTree>().is_err());
        assert!("(* 1 2)".parse::<SeparatingTree>().is_err());
    }

    #[test]
    fn oracle_small_indices() {
        // 2413 is a product of two separable permutations but not one.
        assert_eq!(
            separable_index_oracle(&p("2 4 1 3"), 4).unwrap(),
            Some(2)
        );
        assert_eq!(separable_index_oracle(&p("1 2 3"), 4).unwrap(), Some(0));
        assert_eq!(separable_index_oracle(&p("2 1"), 4).unwrap(), Some(1));
        assert!(separable_index_oracle(&p("1 2 3 4 5 6 7 8"), 2).is_err());
    }
}
