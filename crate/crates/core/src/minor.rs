//! Dense 0/1 matrices of biorders, detection of grid, mixed and
//! almost-mixed minors, partition-sequence width, and the search for a
//! third order making both side permutations almost-mixed simple.

use crate::error::{Error, Result};
use crate::perm::Biorder;
use serde::Serialize;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Dense 0/1 matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix01 {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Matrix01 {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::SizeMismatch {
                left: rows * cols,
                right: bits.len(),
            });
        }
        Ok(Matrix01 { rows, cols, bits })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 1-based (row, col).
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[(r - 1) * self.cols + (c - 1)]
    }
}

impl std::fmt::Display for Matrix01 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 1..=self.rows {
            for c in 1..=self.cols {
                write!(f, "{}", if self.get(r, c) { '1' } else { '0' })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Adjacency matrix of a biorder: rows and columns in order-1, entry
/// (x, y) = 1 exactly when x precedes y in order 2.
pub fn adjacency_matrix(b: &Biorder) -> Matrix01 {
    let n = b.n();
    let mut bits = vec![false; n * n];
    for x in 1..=n {
        for y in 1..=n {
            bits[(x - 1) * n + (y - 1)] = b.rank2(x) < b.rank2(y);
        }
    }
    Matrix01 {
        rows: n,
        cols: n,
        bits,
    }
}

/// Homogeneity class of a matrix cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellClass {
    /// Every row of the cell is constant.
    Horizontal,
    /// Every column of the cell is constant.
    Vertical,
    /// Both: a single repeated value.
    Constant,
    /// Some row and some column are non-constant.
    Mixed,
}

/// Classifies the cell spanned by 1-based inclusive row/column ranges.
pub fn cell_class(
    m: &Matrix01,
    rows: (usize, usize),
    cols: (usize, usize),
) -> Result<CellClass> {
    let (r1, r2) = rows;
    let (c1, c2) = cols;
    if r1 == 0 || r1 > r2 || r2 > m.rows() {
        return Err(Error::BadRange {
            lo: r1,
            hi: r2,
            n: m.rows(),
        });
    }
    if c1 == 0 || c1 > c2 || c2 > m.cols() {
        return Err(Error::BadRange {
            lo: c1,
            hi: c2,
            n: m.cols(),
        });
    }
    let rows_constant = (r1..=r2).all(|r| (c1..c2).all(|c| m.get(r, c) == m.get(r, c + 1)));
    let cols_constant = (c1..=c2).all(|c| (r1..r2).all(|r| m.get(r, c) == m.get(r + 1, c)));
    Ok(match (rows_constant, cols_constant) {
        (true, true) => CellClass::Constant,
        (true, false) => CellClass::Horizontal,
        (false, true) => CellClass::Vertical,
        (false, false) => CellClass::Mixed,
    })
}

/// O(1) cell queries after O(rows x cols) preprocessing: 1-counts, and
/// counts of differing horizontally / vertically adjacent entry pairs.
struct CellIndex {
    rows: usize,
    cols: usize,
    ones: Vec<u32>,
    hdiff: Vec<u32>,
    vdiff: Vec<u32>,
}

impl CellIndex {
    fn new(m: &Matrix01) -> Self {
        let (rows, cols) = (m.rows(), m.cols());
        let idx = |r: usize, c: usize| r * (cols + 1) + c;
        let mut ones = vec![0u32; (rows + 1) * (cols + 1)];
        let mut hdiff = vec![0u32; (rows + 1) * (cols + 1)];
        let mut vdiff = vec![0u32; (rows + 1) * (cols + 1)];
        for r in 1..=rows {
            for c in 1..=cols {
                let one = m.get(r, c) as u32;
                let hd = (c < cols && m.get(r, c) != m.get(r, c + 1)) as u32;
                let vd = (r < rows && m.get(r, c) != m.get(r + 1, c)) as u32;
                ones[idx(r, c)] = one + ones[idx(r - 1, c)] + ones[idx(r, c - 1)]
                    - ones[idx(r - 1, c - 1)];
                hdiff[idx(r, c)] = hd + hdiff[idx(r - 1, c)] + hdiff[idx(r, c - 1)]
                    - hdiff[idx(r - 1, c - 1)];
                vdiff[idx(r, c)] = vd + vdiff[idx(r - 1, c)] + vdiff[idx(r, c - 1)]
                    - vdiff[idx(r - 1, c - 1)];
            }
        }
        CellIndex {
            rows,
            cols,
            ones,
            hdiff,
            vdiff,
        }
    }

    fn rect(&self, t: &[u32], r1: usize, r2: usize, c1: usize, c2: usize) -> u32 {
        let idx = |r: usize, c: usize| r * (self.cols + 1) + c;
        t[idx(r2, c2)] + t[idx(r1 - 1, c1 - 1)] - t[idx(r1 - 1, c2)] - t[idx(r2, c1 - 1)]
    }

    fn has_one(&self, r1: usize, r2: usize, c1: usize, c2: usize) -> bool {
        self.rect(&self.ones, r1, r2, c1, c2) > 0
    }

    fn mixed(&self, r1: usize, r2: usize, c1: usize, c2: usize) -> bool {
        c2 > c1
            && r2 > r1
            && self.rect(&self.hdiff, r1, r2, c1, c2 - 1) > 0
            && self.rect(&self.vdiff, r1, r2 - 1, c1, c2) > 0
    }

    fn rows(&self) -> usize {
        self.rows
    }
}

/// Kind of matrix minor searched for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MinorKind {
    /// Every cell contains a 1.
    Grid,
    /// Every cell is mixed.
    Mixed,
    /// Every off-diagonal cell is mixed.
    AlmostMixed,
}

/// Per-cell proof: either a 1-entry, or one differing horizontal pair and
/// one differing vertical pair of adjacent entries.
#[derive(Clone, Debug, Serialize)]
pub struct CellEvidence {
    pub row_block: usize,
    pub col_block: usize,
    /// (row, col) of a 1-entry, for grid witnesses.
    pub one: Option<(usize, usize)>,
    /// (row, col): entries (row, col) and (row, col + 1) differ.
    pub row_split: Option<(usize, usize)>,
    /// (row, col): entries (row, col) and (row + 1, col) differ.
    pub col_split: Option<(usize, usize)>,
}

/// A verified division of a matrix into k x k blocks of consecutive rows
/// and columns, with per-cell evidence.
#[derive(Clone, Debug, Serialize)]
pub struct MinorWitness {
    pub kind: MinorKind,
    pub k: usize,
    /// Last row of each block except the final one (k - 1 cuts).
    pub row_cuts: Vec<usize>,
    pub col_cuts: Vec<usize>,
    pub evidence: Vec<CellEvidence>,
}

fn blocks(cuts: &[usize], total: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut lo = 1;
    for &c in cuts {
        out.push((lo, c));
        lo = c + 1;
    }
    out.push((lo, total));
    out
}

impl MinorWitness {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("witness serialization")
    }

    /// Re-checks the witness against a matrix by direct cell inspection.
    pub fn verify(&self, m: &Matrix01) -> bool {
        let rb = blocks(&self.row_cuts, m.rows());
        let cb = blocks(&self.col_cuts, m.cols());
        if rb.len() != self.k || cb.len() != self.k {
            return false;
        }
        if self
            .row_cuts
            .windows(2)
            .chain(self.col_cuts.windows(2))
            .any(|w| w[0] >= w[1])
        {
            return false;
        }
        for i in 0..self.k {
            for j in 0..self.k {
                if self.kind == MinorKind::AlmostMixed && i == j {
                    continue;
                }
                let ev = match self
                    .evidence
                    .iter()
                    .find(|e| e.row_block == i + 1 && e.col_block == j + 1)
                {
                    Some(e) => e,
                    None => return false,
                };
                let inside = |r: usize, c: usize| {
                    rb[i].0 <= r && r <= rb[i].1 && cb[j].0 <= c && c <= cb[j].1
                };
                let ok = match self.kind {
                    MinorKind::Grid => match ev.one {
                        Some((r, c)) => inside(r, c) && m.get(r, c),
                        None => false,
                    },
                    MinorKind::Mixed | MinorKind::AlmostMixed => {
                        match (ev.row_split, ev.col_split) {
                            (Some((r, c)), Some((r2, c2))) => {
                                inside(r, c)
                                    && inside(r, c + 1)
                                    && m.get(r, c) != m.get(r, c + 1)
                                    && inside(r2, c2)
                                    && inside(r2 + 1, c2)
                                    && m.get(r2, c2) != m.get(r2 + 1, c2)
                            }
                            _ => false,
                        }
                    }
                };
                if !ok {
                    return false;
                }
            }
        }
        true
    }
}

/// Default cap on the number of candidate divisions scanned by
/// `find_minor`.
pub const DEFAULT_DIVISION_CAP: u128 = 100_000_000;

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut out: u128 = 1;
    for i in 0..k.min(n - k) {
        out = out.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    out
}

/// Iterator over the k-1 increasing cut positions of a k-block division.
struct Divisions {
    total: usize,
    cuts: Vec<usize>,
    done: bool,
}

impl Divisions {
    fn new(total: usize, k: usize) -> Self {
        let cuts: Vec<usize> = (1..k).collect();
        Divisions {
            total,
            done: k > total,
            cuts,
        }
    }
}

impl Iterator for Divisions {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cuts.clone();
        // Advance to the lexicographic successor.
        let k = self.cuts.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.cuts[i] < self.total - 1 - (k - 1 - i) {
                self.cuts[i] += 1;
                for j in i + 1..k {
                    self.cuts[j] = self.cuts[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

fn cell_satisfies(idx: &CellIndex, kind: MinorKind, rb: (usize, usize), cb: (usize, usize)) -> bool {
    match kind {
        MinorKind::Grid => idx.has_one(rb.0, rb.1, cb.0, cb.1),
        MinorKind::Mixed | MinorKind::AlmostMixed => idx.mixed(rb.0, rb.1, cb.0, cb.1),
    }
}

/// Greedy earliest-finish assignment of k column blocks for fixed row
/// blocks; sound because cell properties are preserved by enlargement.
fn greedy_columns(
    idx: &CellIndex,
    kind: MinorKind,
    row_blocks: &[(usize, usize)],
    cols: usize,
    k: usize,
) -> Option<Vec<usize>> {
    let mut cuts = Vec::with_capacity(k - 1);
    let mut lo = 1;
    for j in 0..k {
        let mut hi = lo;
        loop {
            let ok = row_blocks.iter().enumerate().all(|(i, &rb)| {
                (kind == MinorKind::AlmostMixed && i == j)
                    || cell_satisfies(idx, kind, rb, (lo, hi))
            });
            if ok {
                break;
            }
            if hi == cols {
                return None;
            }
            hi += 1;
        }
        if j + 1 == k {
            // The last block must also extend to the final column.
            let full_ok = row_blocks.iter().enumerate().all(|(i, &rb)| {
                (kind == MinorKind::AlmostMixed && i == j)
                    || cell_satisfies(idx, kind, rb, (lo, cols))
            });
            return if full_ok { Some(cuts) } else { None };
        }
        if hi >= cols {
            return None; // no room left for the remaining blocks
        }
        cuts.push(hi);
        lo = hi + 1;
    }
    unreachable!()
}

fn evidence_for(
    m: &Matrix01,
    kind: MinorKind,
    rb: (usize, usize),
    cb: (usize, usize),
    i: usize,
    j: usize,
) -> CellEvidence {
    let mut ev = CellEvidence {
        row_block: i + 1,
        col_block: j + 1,
        one: None,
        row_split: None,
        col_split: None,
    };
    match kind {
        MinorKind::Grid => {
            'outer: for r in rb.0..=rb.1 {
                for c in cb.0..=cb.1 {
                    if m.get(r, c) {
                        ev.one = Some((r, c));
                        break 'outer;
                    }
                }
            }
        }
        MinorKind::Mixed | MinorKind::AlmostMixed => {
            'rs: for r in rb.0..=rb.1 {
                for c in cb.0..cb.1 {
                    if m.get(r, c) != m.get(r, c + 1) {
                        ev.row_split = Some((r, c));
                        break 'rs;
                    }
                }
            }
            'cs: for c in cb.0..=cb.1 {
                for r in rb.0..rb.1 {
                    if m.get(r, c) != m.get(r + 1, c) {
                        ev.col_split = Some((r, c));
                        break 'cs;
                    }
                }
            }
        }
    }
    ev
}

const BATCH: usize = 4096;

fn scan_batch(
    idx: &CellIndex,
    kind: MinorKind,
    batch: &[Vec<usize>],
    cols: usize,
    k: usize,
) -> Option<(Vec<usize>, Vec<usize>)> {
    let rows = idx.rows();
    let attempt = |rc: &Vec<usize>| -> Option<(Vec<usize>, Vec<usize>)> {
        let rb = blocks(rc, rows);
        greedy_columns(idx, kind, &rb, cols, k).map(|cc| (rc.clone(), cc))
    };
    #[cfg(feature = "parallel")]
    {
        batch.par_iter().find_map_first(attempt)
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch.iter().find_map(attempt)
    }
}

pub fn find_minor(m: &Matrix01, k: usize, kind: MinorKind) -> Result<Option<MinorWitness>> {
    find_minor_with_cap(m, k, kind, DEFAULT_DIVISION_CAP)
}

/// Exhaustive search for a k x k minor of the given kind: row divisions
/// are scanned in lexicographic order, column blocks assigned greedily.
/// `None` is a proof of absence.  The estimated number of candidate
/// divisions must not exceed `cap`.
pub fn find_minor_with_cap(
    m: &Matrix01,
    k: usize,
    kind: MinorKind,
    cap: u128,
) -> Result<Option<MinorWitness>> {
    if k == 0 {
        return Err(Error::BadBound { k });
    }
    if k > m.rows() || k > m.cols() {
        return Ok(None);
    }
    let estimate =
        binom(m.rows() - 1, k - 1).saturating_mul(binom(m.cols() - 1, k - 1));
    if estimate > cap {
        return Err(Error::CapExceeded { estimate, cap });
    }
    let idx = CellIndex::new(m);
    let mut divisions = Divisions::new(m.rows(), k);
    let mut batch: Vec<Vec<usize>> = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        while batch.len() < BATCH {
            match divisions.next() {
                Some(d) => batch.push(d),
                None => break,
            }
        }
        if batch.is_empty() {
            return Ok(None);
        }
        if let Some((row_cuts, col_cuts)) = scan_batch(&idx, kind, &batch, m.cols(), k) {
            let rb = blocks(&row_cuts, m.rows());
            let cb = blocks(&col_cuts, m.cols());
            let mut evidence = Vec::new();
            for i in 0..k {
                for j in 0..k {
                    if kind == MinorKind::AlmostMixed && i == j {
                        continue;
                    }
                    evidence.push(evidence_for(m, kind, rb[i], cb[j], i, j));
                }
            }
            let witness = MinorWitness {
                kind,
                k,
                row_cuts,
                col_cuts,
                evidence,
            };
            debug_assert!(witness.verify(m));
            return Ok(Some(witness));
        }
    }
}

/// Merges the blocks of a 2k-almost-mixed witness pairwise into a
/// k-mixed witness (diagonal cells of the merged division contain an
/// off-diagonal mixed cell of the original).
pub fn halve_almost_mixed(m: &Matrix01, w: &MinorWitness) -> Result<MinorWitness> {
    if w.kind != MinorKind::AlmostMixed || w.k % 2 != 0 {
        return Err(Error::BadBound { k: w.k });
    }
    let k = w.k / 2;
    let take_odd = |cuts: &[usize]| -> Vec<usize> {
        cuts.iter().skip(1).step_by(2).copied().collect()
    };
    let row_cuts = take_odd(&w.row_cuts);
    let col_cuts = take_odd(&w.col_cuts);
    let rb = blocks(&row_cuts, m.rows());
    let cb = blocks(&col_cuts, m.cols());
    let mut evidence = Vec::new();
    for i in 0..k {
        for j in 0..k {
            let ev = evidence_for(m, MinorKind::Mixed, rb[i], cb[j], i, j);
            if ev.row_split.is_none() || ev.col_split.is_none() {
                return Err(Error::BadCertificate(format!(
                    "merged cell ({}, {}) is not mixed",
                    i + 1,
                    j + 1
                )));
            }
            evidence.push(ev);
        }
    }
    Ok(MinorWitness {
        kind: MinorKind::Mixed,
        k,
        row_cuts,
        col_cuts,
        evidence,
    })
}

/// Smallest k such that the biorder has no k-almost-mixed minor; at
/// least 2 for every non-empty biorder.
pub fn almost_mixed_number(b: &Biorder) -> Result<usize> {
    almost_mixed_number_with_cap(b, DEFAULT_DIVISION_CAP)
}

pub fn almost_mixed_number_with_cap(b: &Biorder, cap: u128) -> Result<usize> {
    let m = adjacency_matrix(b);
    for k in 2..=(b.n() + 1) {
        if find_minor_with_cap(&m, k, MinorKind::AlmostMixed, cap)?.is_none() {
            return Ok(k);
        }
    }
    unreachable!("a minor larger than the matrix cannot exist")
}

/// A merge sequence from singletons to the one-part partition: step i
/// merges the parts containing the two named elements.
#[derive(Clone, Debug)]
pub struct PartitionSequence {
    n: usize,
    merges: Vec<(usize, usize)>,
}

impl PartitionSequence {
    pub fn new(n: usize, merges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 || merges.len() + 1 != n {
            return Err(Error::BadPartition);
        }
        // Union-find validation: each step merges two distinct live parts.
        let mut parent: Vec<usize> = (0..=n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                return find(parent, parent[x]);
            }
            x
        }
        for &(a, b) in &merges {
            if a == 0 || a > n || b == 0 || b > n {
                return Err(Error::OutOfRange {
                    element: a.max(b),
                    n,
                });
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return Err(Error::BadPartition);
            }
            parent[ra] = rb;
        }
        Ok(PartitionSequence { n, merges })
    }

    /// Merge 1 with 2, then the growing prefix with each next element.
    pub fn left_to_right(n: usize) -> Result<Self> {
        PartitionSequence::new(n, (2..=n).map(|x| (1, x)).collect())
    }

    pub fn merges(&self) -> &[(usize, usize)] {
        &self.merges
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn spans_of(parts: &[Vec<usize>], rank: &dyn Fn(usize) -> usize) -> Vec<(usize, usize)> {
    parts
        .iter()
        .map(|p| {
            let rs = p.iter().map(|&x| rank(x));
            (rs.clone().min().unwrap(), rs.max().unwrap())
        })
        .collect()
}

/// Maximum number of parts non-homogeneous with any single part, over
/// both orders of the partition state.
fn state_width(parts: &[Vec<usize>], b: &Biorder) -> usize {
    let mut width = 0;
    for rank in [
        &(|x: usize| x) as &dyn Fn(usize) -> usize,
        &(|x: usize| b.rank2(x)),
    ] {
        let spans = spans_of(parts, rank);
        for i in 0..spans.len() {
            let deg = (0..spans.len())
                .filter(|&j| j != i && spans[i].0 <= spans[j].1 && spans[j].0 <= spans[i].1)
                .count();
            width = width.max(deg);
        }
    }
    width
}

/// Maximum error degree over all steps of the sequence: for each order, a
/// part is in error with every other part whose rank span interleaves
/// with its own.
pub fn sequence_width(b: &Biorder, s: &PartitionSequence) -> Result<usize> {
    if s.n() != b.n() {
        return Err(Error::SizeMismatch {
            left: s.n(),
            right: b.n(),
        });
    }
    let mut parts: Vec<Vec<usize>> = (1..=b.n()).map(|x| vec![x]).collect();
    let mut where_is: Vec<usize> = (0..b.n()).collect();
    let mut width = state_width(&parts, b);
    for &(a, c) in s.merges() {
        let (pa, pc) = (where_is[a - 1], where_is[c - 1]);
        let moved = std::mem::take(&mut parts[pc]);
        for &x in &moved {
            where_is[x - 1] = pa;
        }
        parts[pa].extend(moved);
        parts.swap_remove(pc);
        if pc < parts.len() {
            for &x in &parts[pc] {
                where_is[x - 1] = pc;
            }
        }
        width = width.max(state_width(&parts, b));
    }
    Ok(width)
}

/// Result of the third-order search.
#[derive(Clone, Debug)]
pub struct ThirdOrder {
    /// Elements listed in the constructed order.
    pub order: Vec<usize>,
    /// Largest almost-mixed number of the two side biorders when
    /// verified, otherwise the heuristic bound 4 * width + 4.
    pub k: usize,
    pub verified: bool,
}

/// Almost-mixed number of the larger of the two side biorders
/// (order3, order1) and (order3, order2).
fn sides_k(b: &Biorder, order3: &[usize], cap: u128) -> Result<usize> {
    let o1: Vec<usize> = (1..=b.n()).collect();
    let o2 = b.order2_sequence();
    let s1 = Biorder::from_orders(order3, &o1)?;
    let s2 = Biorder::from_orders(order3, &o2)?;
    Ok(almost_mixed_number_with_cap(&s1, cap)?
        .max(almost_mixed_number_with_cap(&s2, cap)?))
}

/// Builds a third order on the elements such that both side biorders
/// (order3 vs order1, order3 vs order2) have small almost-mixed number.
/// Exhaustive for n <= 8; otherwise a greedy partition-sequence
/// heuristic whose merge tree yields the order.  Verification runs when
/// the minor search is feasible and k stays within `k_budget`.
pub fn mixed_free_order(b: &Biorder, k_budget: usize) -> ThirdOrder {
    let n = b.n();
    if n <= 8 {
        return exhaustive_order(b, k_budget);
    }
    let (order, width) = greedy_merge_order(b);
    match sides_k(b, &order, DEFAULT_DIVISION_CAP) {
        Ok(k) if k <= k_budget => ThirdOrder {
            order,
            k,
            verified: true,
        },
        _ => ThirdOrder {
            order,
            k: 4 * width + 4,
            verified: false,
        },
    }
}

fn exhaustive_order(b: &Biorder, k_budget: usize) -> ThirdOrder {
    let n = b.n();
    let mut order: Vec<usize> = (1..=n).collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    loop {
        if let Ok(k) = sides_k(b, &order, DEFAULT_DIVISION_CAP) {
            if best.as_ref().map_or(true, |(bk, _)| k < *bk) {
                best = Some((k, order.clone()));
                if k == 2 {
                    break;
                }
            }
        }
        // Next permutation in lexicographic order.
        let mut i = n.wrapping_sub(1);
        while i > 0 && order[i - 1] >= order[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = n - 1;
        while order[j] <= order[i - 1] {
            j -= 1;
        }
        order.swap(i - 1, j);
        order[i..].reverse();
    }
    let (k, order) = best.expect("at least one order is always evaluated");
    ThirdOrder {
        order,
        k,
        verified: k <= k_budget,
    }
}

/// Greedy partition sequence: repeatedly merge the candidate pair that
/// minimizes the resulting maximum error degree; candidates are pairs
/// adjacent in either order plus current error-graph neighbors.  Returns
/// the leaf order of the merge tree and the sequence width.
fn greedy_merge_order(b: &Biorder) -> (Vec<usize>, usize) {
    let n = b.n();
    // parts store their elements in order-1; trees in parallel.
    let mut parts: Vec<Vec<usize>> = (1..=n).map(|x| vec![x]).collect();
    let mut orders: Vec<Vec<usize>> = (1..=n).map(|x| vec![x]).collect();
    let mut width = 0;
    while parts.len() > 1 {
        let spans1 = spans_of(&parts, &|x| x);
        let spans2 = spans_of(&parts, &|x| b.rank2(x));
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        for spans in [&spans1, &spans2] {
            let mut idxs: Vec<usize> = (0..parts.len()).collect();
            idxs.sort_by_key(|&i| spans[i].0);
            for w in idxs.windows(2) {
                candidates.push((w[0].min(w[1]), w[0].max(w[1])));
            }
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    if spans[i].0 <= spans[j].1 && spans[j].0 <= spans[i].1 {
                        candidates.push((i, j));
                    }
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut best: Option<(usize, usize, usize)> = None; // (width, i, j)
        for &(i, j) in &candidates {
            let mut merged = parts.clone();
            let mv = merged.swap_remove(j);
            merged[i].extend(mv);
            let w = state_width(&merged, b);
            if best.map_or(true, |(bw, _, _)| w < bw) {
                best = Some((w, i, j));
            }
        }
        let (w, i, j) = best.expect("at least one candidate pair exists");
        width = width.max(w);
        let mv = parts.swap_remove(j);
        parts[i].extend(mv);
        let mo = orders.swap_remove(j);
        // Children ordered by smallest element for determinism.
        if mo[0] < orders[i][0] {
            let mut newo = mo;
            newo.extend(orders[i].iter().copied());
            orders[i] = newo;
        } else {
            orders[i].extend(mo);
        }
    }
    (orders.pop().unwrap(), width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::Permutation;
    use crate::separable::{enumerate_all, is_separable};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn biorder_of(images: Vec<usize>) -> Biorder {
        Biorder::from_permutation(&Permutation::new(images).unwrap())
    }

    #[test]
    fn adjacency_examples() {
        let m = adjacency_matrix(&biorder_of(vec![3, 1, 4, 2]));
        let rows: Vec<String> = (1..=4)
            .map(|r| {
                (1..=4)
                    .map(|c| if m.get(r, c) { '1' } else { '0' })
                    .collect()
            })
            .collect();
        assert_eq!(rows, vec!["0010", "1011", "0000", "1010"]);

        let id = adjacency_matrix(&biorder_of((1..=5).collect()));
        for r in 1..=5 {
            for c in 1..=5 {
                assert_eq!(id.get(r, c), r < c);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut images: Vec<usize> = (1..=30).collect();
        images.shuffle(&mut rng);
        let m = adjacency_matrix(&biorder_of(images));
        for x in 1..=30 {
            for y in 1..=30 {
                if x != y {
                    assert!(m.get(x, y) ^ m.get(y, x));
                } else {
                    assert!(!m.get(x, y));
                }
            }
        }
    }

    #[test]
    fn cell_class_examples() {
        let ones = Matrix01::new(2, 2, vec![true; 4]).unwrap();
        assert_eq!(
            cell_class(&ones, (1, 2), (1, 2)).unwrap(),
            CellClass::Constant
        );
        let vertical = Matrix01::new(2, 2, vec![false, true, false, true]).unwrap();
        assert_eq!(
            cell_class(&vertical, (1, 2), (1, 2)).unwrap(),
            CellClass::Vertical
        );
        let mixed = Matrix01::new(2, 2, vec![false, true, true, false]).unwrap();
        assert_eq!(
            cell_class(&mixed, (1, 2), (1, 2)).unwrap(),
            CellClass::Mixed
        );
        assert!(cell_class(&mixed, (2, 1), (1, 2)).is_err());
    }

    #[test]
    fn find_minor_examples() {
        let m = adjacency_matrix(&biorder_of(vec![3, 1, 4, 2]));
        let w = find_minor(&m, 2, MinorKind::Mixed).unwrap().unwrap();
        assert_eq!(w.row_cuts, vec![2]);
        assert_eq!(w.col_cuts, vec![2]);
        assert!(w.verify(&m));

        let id4 = adjacency_matrix(&biorder_of((1..=4).collect()));
        assert!(find_minor(&id4, 2, MinorKind::AlmostMixed)
            .unwrap()
            .is_none());
        assert!(find_minor(&m, 3, MinorKind::AlmostMixed).unwrap().is_none());
    }

    #[test]
    fn find_minor_monotone_and_capped() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x3141);
        for _ in 0..30 {
            let n = rng.gen_range(3..9);
            let mut images: Vec<usize> = (1..=n).collect();
            images.shuffle(&mut rng);
            let m = adjacency_matrix(&biorder_of(images));
            for kind in [MinorKind::Grid, MinorKind::Mixed, MinorKind::AlmostMixed] {
                let mut seen_none = false;
                for k in 1..=n {
                    match find_minor(&m, k, kind).unwrap() {
                        Some(w) => {
                            assert!(!seen_none, "monotonicity violated at k={k}");
                            assert!(w.verify(&m));
                        }
                        None => seen_none = true,
                    }
                }
            }
        }
        let big = adjacency_matrix(&biorder_of((1..=60).collect()));
        assert!(matches!(
            find_minor_with_cap(&big, 20, MinorKind::Grid, 1000),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn almost_mixed_halving() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x4a1f);
        let mut converted = 0;
        for case in 0..40 {
            // Interleavings of two increasing runs reliably contain large
            // almost-mixed minors; pad the pool with random permutations.
            let images: Vec<usize> = if case < 8 {
                let half = 4 + case;
                (1..=half).flat_map(|i| [i, i + half]).collect()
            } else {
                let n = rng.gen_range(4..10);
                let mut v: Vec<usize> = (1..=n).collect();
                v.shuffle(&mut rng);
                v
            };
            let m = adjacency_matrix(&biorder_of(images));
            if let Some(w) = find_minor(&m, 4, MinorKind::AlmostMixed).unwrap() {
                let halved = halve_almost_mixed(&m, &w).unwrap();
                assert_eq!(halved.k, 2);
                assert!(halved.verify(&m));
                converted += 1;
            }
        }
        assert!(converted > 0);
    }

    #[test]
    fn almost_mixed_number_examples() {
        assert_eq!(
            almost_mixed_number(&biorder_of((1..=6).collect())).unwrap(),
            2
        );
        assert_eq!(almost_mixed_number(&biorder_of(vec![3, 1, 4, 2])).unwrap(), 3);
        // If the almost-mixed number is 2, the permutation is separable.
        for p in enumerate_all(4).unwrap() {
            let b = Biorder::from_permutation(&p);
            if almost_mixed_number(&b).unwrap() == 2 {
                assert!(is_separable(&p));
            }
        }
        // The odd-before-even shuffle has a large mixed minor.
        let shuffle = biorder_of(vec![1, 5, 2, 6, 3, 7, 4, 8]);
        let m = adjacency_matrix(&shuffle);
        assert!(find_minor(&m, 4, MinorKind::Mixed).unwrap().is_some());
        assert!(almost_mixed_number(&shuffle).unwrap() >= 5);
    }

    #[test]
    fn sequence_width_examples() {
        let id = biorder_of((1..=6).collect());
        let s = PartitionSequence::left_to_right(6).unwrap();
        assert_eq!(sequence_width(&id, &s).unwrap(), 0);

        let b = biorder_of(vec![3, 1, 4, 2]);
        let s = PartitionSequence::left_to_right(4).unwrap();
        let got = sequence_width(&b, &s).unwrap();
        // Direct quadratic re-derivation over explicit partition states.
        let states: Vec<Vec<Vec<usize>>> = vec![
            vec![vec![1], vec![2], vec![3], vec![4]],
            vec![vec![1, 2], vec![3], vec![4]],
            vec![vec![1, 2, 3], vec![4]],
            vec![vec![1, 2, 3, 4]],
        ];
        let want = states.iter().map(|p| state_width(p, &b)).max().unwrap();
        assert_eq!(got, want);

        assert!(PartitionSequence::new(4, vec![(1, 2), (1, 2), (3, 4)]).is_err());
    }

    #[test]
    fn third_order_identity_and_small_exhaustive() {
        let id = biorder_of((1..=6).collect());
        let t = mixed_free_order(&id, 8);
        assert_eq!(t.order, (1..=6).collect::<Vec<_>>());
        assert_eq!(t.k, 2);
        assert!(t.verified);

        for p in enumerate_all(4).unwrap() {
            let b = Biorder::from_permutation(&p);
            let t = mixed_free_order(&b, 8);
            assert!(t.verified);
            assert_eq!(t.k, sides_k(&b, &t.order, DEFAULT_DIVISION_CAP).unwrap());
        }
    }

    #[test]
    fn third_order_large_heuristic_returns() {
        // A 321-avoider: interleave two increasing runs.
        let n = 40;
        let mut images = Vec::new();
        for i in 1..=n / 2 {
            images.push(i + n / 2);
            images.push(i);
        }
        let b = biorder_of(images);
        let t = mixed_free_order(&b, 3);
        assert_eq!(t.order.len(), n);
        let mut sorted = t.order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (1..=n).collect::<Vec<_>>());
        assert!(t.k >= 2);
    }
}
